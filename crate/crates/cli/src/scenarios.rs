use std::f64::consts::{FRAC_PI_2, PI};

use clock_squeeze::observables::{moments, MomentSet};
use clock_squeeze::qfi::fisher_report;
use clock_squeeze::qnd::{
    analytic_post_qnd_moments, coherence_after_qnd, coherence_after_qnd_printed, record_rng,
    run_protocol, variance_after_qnd, CoherenceModel, QndConfig,
};
use clock_squeeze::ramsey::{
    delta_theta_from_moments, eq8_sensitivity, heisenberg_limit, optimal_theta_default,
    sql_limit,
};
use clock_squeeze::state::{fock_mixture_state, prepared_clock_state, AtomState, NumberDistribution};
use rayon::prelude::*;

use crate::config::{Scenario, ScenarioConfig};
use crate::emit::{CurveRow, QfiRow};
use crate::Result;

/// Phase window for optimization.
pub const OPT_WINDOW: (f64, f64) = (-FRAC_PI_2, PI);

#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Curves(Vec<CurveRow>),
    Qfi(Vec<QfiRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    /// Human-readable diagnostics, written to stderr by the binary.
    pub notes: Vec<String>,
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Fig1 => curves(cfg, cfg.analytic_n_mean),
        Scenario::Sweep => curves(cfg, cfg.n_mean),
        Scenario::Fig2 => fig2(cfg),
        Scenario::QndDemo => qnd_demo(cfg),
        Scenario::QfiTable => qfi_table(cfg),
    }
}

/// Post-squeezing moments with the accumulated phase tuned to an even
/// multiple of pi.
pub fn analytic_moments(n_mean: f64, sigma2: f64, gamma: f64) -> MomentSet {
    analytic_post_qnd_moments(n_mean, sigma2, gamma, 0.0, CoherenceModel::Calibrated)
}

fn clock_state(n_mean: f64, sigma2: f64) -> Result<AtomState> {
    Ok(prepared_clock_state(&NumberDistribution::gaussian(n_mean, sigma2, 6.0)?)?)
}

fn probe_config(cfg: &ScenarioConfig, state: &AtomState, gamma: f64) -> Result<QndConfig> {
    let omega_max = cfg.omega_n_max / state.max_na().max(1) as f64;
    Ok(QndConfig::for_gamma(gamma, cfg.alpha, omega_max, cfg.seed)?)
}

/// Posterior moments of `cfg.records` Monte Carlo records. Record `r` for
/// the `k`-th gamma draws from stream `(k << 32) | r`.
fn record_moments(
    cfg: &ScenarioConfig,
    state: &AtomState,
    gamma: f64,
    k: usize,
) -> Result<Vec<MomentSet>> {
    if gamma == 0.0 {
        return Ok(vec![moments(state); cfg.records as usize]);
    }
    let qcfg = probe_config(cfg, state, gamma)?;
    (0..cfg.records)
        .into_par_iter()
        .map(|r| {
            let mut rng = record_rng(cfg.seed, ((k as u64) << 32) | r);
            let (post, _) = run_protocol(state, &qcfg, &mut rng)?;
            Ok(moments(&post))
        })
        .collect()
}

fn point(moms: &MomentSet, theta: f64, m: u64) -> Result<Option<f64>> {
    Ok(delta_theta_from_moments(moms, theta, m)?.delta_theta)
}

fn mean_finite(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = xs.flatten().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn curves(cfg: &ScenarioConfig, analytic_n: f64) -> Result<RunOutput> {
    let thetas = cfg.thetas();
    let s2 = cfg.sigma2_for(analytic_n);
    let row = |theta, delta_theta, gamma, n_mean, sigma2, route: &str| CurveRow {
        theta,
        delta_theta,
        gamma,
        n_mean,
        sigma2,
        m: cfg.m,
        route: route.to_string(),
    };
    let mut rows = Vec::new();
    for &gamma in &cfg.gamma_list {
        let moms = analytic_moments(analytic_n, s2, gamma);
        for &t in &thetas {
            rows.push(row(t, point(&moms, t, cfg.m)?, gamma, analytic_n, s2, "analytic"));
        }
    }
    let mut notes = Vec::new();
    if cfg.records > 0 {
        let n = cfg.n_mean;
        let mc_s2 = cfg.sigma2_for(n);
        let state = clock_state(n, mc_s2)?;
        for (k, &gamma) in cfg.gamma_list.iter().enumerate() {
            let recs = record_moments(cfg, &state, gamma, k)?;
            for &t in &thetas {
                let per = recs
                    .iter()
                    .map(|m| point(m, t, cfg.m))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row(t, mean_finite(per.into_iter()), gamma, n, mc_s2, "mc"));
            }
            if gamma > 0.0 {
                let v = probe_config(cfg, &state, gamma)?.validity(&state);
                notes.push(format!(
                    "gamma {gamma:e}: {} records, omega*n_max = {:.3e}{}",
                    cfg.records,
                    v.omega_n_max,
                    if v.ok { "" } else { " (outside linear regime)" }
                ));
            }
        }
    }
    for &t in &thetas {
        rows.push(row(t, Some(sql_limit(analytic_n, cfg.m)), 0.0, analytic_n, s2, "sql"));
        rows.push(row(t, Some(heisenberg_limit(analytic_n, cfg.m)), 0.0, analytic_n, s2, "heisenberg"));
    }
    Ok(RunOutput {
        table: Table::Curves(rows),
        notes,
    })
}

fn fig2(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let n = cfg.analytic_n_mean;
    let s2 = cfg.sigma2_for(n);
    let mut rows = Vec::new();
    let row = |theta, delta_theta, gamma, n_mean, sigma2, route: &str| CurveRow {
        theta,
        delta_theta: Some(delta_theta),
        gamma,
        n_mean,
        sigma2,
        m: cfg.m,
        route: route.to_string(),
    };
    for &gamma in &cfg.gamma_list {
        for (sigma2, route) in [(s2, "analytic"), (0.0, "analytic-sigma0")] {
            let opt = optimal_theta_default(&analytic_moments(n, sigma2, gamma), cfg.m, OPT_WINDOW)?;
            rows.push(row(opt.theta, opt.delta_theta, gamma, n, sigma2, route));
        }
        rows.push(row(0.0, eq8_sensitivity(n, s2, gamma, cfg.m), gamma, n, s2, "closed-form"));
        rows.push(row(0.0, eq8_sensitivity(n, 0.0, gamma, cfg.m), gamma, n, 0.0, "closed-form-sigma0"));
    }
    let mut notes = Vec::new();
    if cfg.records > 0 {
        let mc_n = cfg.n_mean;
        let mc_s2 = cfg.sigma2_for(mc_n);
        let state = clock_state(mc_n, mc_s2)?;
        let mut worst: Option<f64> = None;
        for (k, &gamma) in cfg.gamma_list.iter().enumerate() {
            let recs = record_moments(cfg, &state, gamma, k)?;
            let opts = recs
                .iter()
                .map(|m| optimal_theta_default(m, cfg.m, OPT_WINDOW))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let count = opts.len() as f64;
            let theta = opts.iter().map(|o| o.theta).sum::<f64>() / count;
            let dt = opts.iter().map(|o| o.delta_theta).sum::<f64>() / count;
            rows.push(row(theta, dt, gamma, mc_n, mc_s2, "mc"));
            if gamma * (mc_s2 + mc_n) >= 1.0 {
                let dev = (dt / eq8_sensitivity(mc_n, 0.0, gamma, cfg.m) - 1.0).abs();
                worst = Some(worst.map_or(dev, |w: f64| w.max(dev)));
            }
        }
        if let Some(w) = worst {
            notes.push(format!(
                "largest deviation of the Monte Carlo optimum from the sigma = 0 closed-form line \
                 where gamma(sigma2 + n) >= 1: {:.1}% ({})",
                100.0 * w,
                if w <= 0.05 { "within 5%" } else { "above 5%" }
            ));
        }
    }
    if let Some(g) = cfg.gamma_list.iter().find(|&&g| g * n >= 1e3) {
        notes.push(format!(
            "analytic route is a weak-squeezing model; gamma*n = {:.1e} at gamma {g:e} is near the Fock regime",
            g * n
        ));
    }
    Ok(RunOutput {
        table: Table::Curves(rows),
        notes,
    })
}

fn qnd_demo(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let n = cfg.n_mean;
    let s2 = cfg.sigma2_for(n);
    let gamma = cfg.gamma_list[0];
    let thetas = cfg.thetas();
    let state = clock_state(n, s2)?;
    let prior = moments(&state);
    let mut rows = Vec::new();
    let mut push_curve = |moms: &MomentSet, g: f64, route: &str| -> Result<()> {
        for &t in &thetas {
            rows.push(CurveRow {
                theta: t,
                delta_theta: point(moms, t, cfg.m)?,
                gamma: g,
                n_mean: n,
                sigma2: s2,
                m: cfg.m,
                route: route.to_string(),
            });
        }
        Ok(())
    };
    push_curve(&prior, 0.0, "prior")?;
    push_curve(&analytic_moments(n, s2, gamma), gamma, "analytic")?;
    let mut notes = Vec::new();
    if cfg.records > 0 && gamma > 0.0 {
        let qcfg = probe_config(cfg, &state, gamma)?;
        let (post, rec) = run_protocol(&state, &qcfg, &mut record_rng(cfg.seed, 0))?;
        let pm = moments(&post);
        push_curve(&pm, rec.gamma, "posterior")?;
        let v = qcfg.validity(&state);
        notes.push(format!(
            "alpha {} omega {:.6e} rounds {} gamma {:.6e} (omega*n_max {:.2e}{})",
            qcfg.alpha,
            qcfg.omega,
            qcfg.rounds,
            rec.gamma,
            v.omega_n_max,
            if v.ok { "" } else { ", outside linear regime" }
        ));
        notes.push(format!("mean outcome {:.9e}, posterior digest {}", rec.mean_outcome, rec.posterior_state_digest));
        notes.push(format!(
            "na variance {:.6e} -> {:.6e} (formula {:.6e})",
            prior.na_var,
            pm.na_var,
            variance_after_qnd(n, s2, rec.gamma)
        ));
        notes.push(format!(
            "coherence {:.6e} -> {:.6e} (calibrated {:.6e}, printed {:.6e})",
            prior.coherence,
            pm.coherence,
            coherence_after_qnd(n, qcfg.alpha, qcfg.omega, qcfg.rounds),
            coherence_after_qnd_printed(n, qcfg.alpha, qcfg.omega, qcfg.rounds)
        ));
    }
    Ok(RunOutput {
        table: Table::Curves(rows),
        notes,
    })
}

/// `(N, nb)` pairs: single-port input, a small b population and the twin
/// Fock optimum, for a ladder of `N`.
pub fn qfi_grid() -> Vec<(usize, usize)> {
    [1usize, 10, 100, 1000]
        .iter()
        .flat_map(|&n| {
            let mut nbs = vec![0, (n as f64 * 0.1).round() as usize, n];
            nbs.dedup();
            nbs.into_iter().map(move |nb| (n, nb))
        })
        .collect()
}

fn qfi_table(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let rows = qfi_grid()
        .into_iter()
        .map(|(n, nb)| {
            let mut rho = vec![0.0; nb + 1];
            rho[nb] = 1.0;
            let report = fisher_report(&fock_mixture_state(n, &rho)?, cfg.m, None)?;
            Ok(QfiRow {
                n: n as u64,
                nb_mean: nb as f64,
                f_q: report.f_q,
                delta_theta: report.cr_delta_theta,
                witness: report.witness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        table: Table::Qfi(rows),
        notes: Vec::new(),
    })
}
