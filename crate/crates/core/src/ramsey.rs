//! Ramsey readout of the mode-`a` population and error-propagation sensitivity.
//!
//! The pulse sequence acts on the input as conjugation by `exp(-i theta Jy)`,
//! so the measured operator is `na_out = n/2 + cos(theta) Jz - sin(theta) Jx`.
//! This reproduces
//! `<na>_out = <na> cos^2(theta/2) + <nb> sin^2(theta/2) - <a'b + b'a> sin(theta) / 2`. Flipping the rotation sign only negates the
//! slope and leaves every sensitivity unchanged.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::observables::{moments, MomentSet};
use crate::state::AtomState;

/// Grid size of the coarse scan in [`optimal_theta`].
pub const DEFAULT_OPT_GRID: usize = 2001;
/// Bracket width at which golden-section refinement stops (radians).
pub const DEFAULT_OPT_TOL: f64 = 1e-6;

const SLOPE_REL_TOL: f64 = 1e-10;
const VAR_REL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-6;

/// `(<na>_out, (dna)^2_out, d<na>_out/dtheta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputMoments {
    pub mean: f64,
    pub var: f64,
    pub slope: f64,
}

pub fn output_number_moments(m: &MomentSet, theta: f64) -> OutputMoments {
    let (s, c) = theta.sin_cos();
    let sign = m.jx_sign;
    // 1 - sign sin(theta) without cancellation where it vanishes
    let one_minus_s = 2.0 * (FRAC_PI_4 - sign * theta / 2.0).sin().powi(2);
    OutputMoments {
        mean: m.n_mean / 2.0 + c * m.jz - s * m.jx,
        // na_out = (1 - sign s) n/2 + c Jz - sign s D
        var: m.cov.quadratic([one_minus_s / 2.0, c, -sign * s]).max(0.0),
        slope: -s * m.jz - c * m.jx,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPoint {
    pub theta: f64,
    /// `None` where the estimator carries no phase information.
    pub delta_theta: Option<f64>,
    pub mean_out: f64,
    pub var_out: f64,
    pub slope: f64,
    pub m: u64,
}

impl SensitivityPoint {
    pub fn value(&self) -> Result<f64> {
        self.delta_theta
            .ok_or(Error::DivergentSensitivity { theta: self.theta })
    }
}

fn check_m(m: u64) -> Result<()> {
    if m == 0 {
        return Err(Error::Domain("measurement count m must be >= 1".into()));
    }
    Ok(())
}

/// `(dna)_out / (sqrt(m) |d<na>_out/dtheta|)` at `theta`.
///
/// Where both the output variance and the slope vanish (the input is an
/// eigenstate of the readout, e.g. a coherent spin state at mid-fringe) the
/// removable `0/0` is replaced by its limit `sqrt(Var(d na_out/dtheta)) /
/// |d^2<na>_out/dtheta^2|`.
pub fn delta_theta_from_moments(moms: &MomentSet, theta: f64, m: u64) -> Result<SensitivityPoint> {
    check_m(m)?;
    let out = output_number_moments(moms, theta);
    let sqrt_m = (m as f64).sqrt();
    let slope_tol = SLOPE_REL_TOL * (moms.jx.abs() + moms.jz.abs());
    let var_scale = moms.cov.nn / 4.0 + moms.cov.zz + moms.cov.dd;

    let flat = out.slope.abs() <= slope_tol || out.slope.abs() < 1e-14 * out.var.sqrt();
    let delta_theta = if !flat {
        Some(out.var.sqrt() / (sqrt_m * out.slope.abs()))
    } else if out.var <= VAR_REL_TOL * var_scale {
        let (s, c) = theta.sin_cos();
        let sign = moms.jx_sign;
        let var_deriv = moms.cov.quadratic([-sign * c / 2.0, -s, -sign * c]).max(0.0);
        let curvature = -c * moms.jz + s * moms.jx;
        (curvature.abs() > slope_tol).then(|| var_deriv.sqrt() / (sqrt_m * curvature.abs()))
    } else {
        None
    };
    Ok(SensitivityPoint {
        theta,
        delta_theta,
        mean_out: out.mean,
        var_out: out.var,
        slope: out.slope,
        m,
    })
}

pub fn delta_theta(state: &AtomState, theta: f64, m: u64) -> Result<SensitivityPoint> {
    delta_theta_from_moments(&moments(state), theta, m)
}

/// Small-angle form `2 (dna) / (sqrt(m) |<a'b + b'a>|)`; needs `<na> = <nb>`.
pub fn small_angle_delta_theta(moms: &MomentSet, m: u64) -> Result<f64> {
    check_m(m)?;
    let asym = (moms.na_mean - moms.nb_mean()).abs();
    if asym > SYMMETRY_TOL * moms.n_mean {
        return Err(Error::Precondition(format!(
            "populations not symmetric: <na> - <nb> = {asym}"
        )));
    }
    if moms.coherence == 0.0 {
        return Err(Error::DivergentSensitivity { theta: 0.0 });
    }
    Ok(2.0 * moms.na_var.sqrt() / ((m as f64).sqrt() * moms.coherence.abs()))
}

/// Shot-noise limit `1/sqrt(m n)`.
pub fn sql_limit(n_mean: f64, m: u64) -> f64 {
    1.0 / (m as f64 * n_mean).sqrt()
}

/// Fock-limit Heisenberg scaling `sqrt(2) / (n sqrt(m))`.
pub fn heisenberg_limit(n_mean: f64, m: u64) -> f64 {
    std::f64::consts::SQRT_2 / (n_mean * (m as f64).sqrt())
}

/// Sensitivity of the pi/2-pulsed clock state with total-number variance
/// `sigma2`. `(1 - sin)/cos` is evaluated as `tan(pi/4 - theta/2)`, which is
/// regular at `pi/2`.
pub fn eq6_sensitivity(n_mean: f64, sigma2: f64, theta: f64, m: u64) -> Result<f64> {
    check_m(m)?;
    let half = FRAC_PI_4 - theta / 2.0;
    if half.cos().abs() < 1e-12 {
        return Err(Error::Domain(format!(
            "sensitivity is singular at theta = {theta}"
        )));
    }
    let ratio = half.tan();
    let inner = 1.0 / n_mean + sigma2 / (n_mean * n_mean) * ratio * ratio;
    Ok((inner / m as f64).sqrt())
}

/// Small-angle sensitivity after QND squeezing of strength `gamma`.
pub fn eq8_sensitivity(n_mean: f64, sigma2: f64, gamma: f64, m: u64) -> f64 {
    let spread = sigma2 + n_mean;
    (spread / (1.0 + gamma * spread)).sqrt() / (n_mean * (m as f64).sqrt())
}

/// Phase that minimizes the error-propagation sensitivity in a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalPhase {
    pub theta: f64,
    pub delta_theta: f64,
}

fn objective(moms: &MomentSet, theta: f64, m: u64) -> f64 {
    delta_theta_from_moments(moms, theta, m)
        .ok()
        .and_then(|p| p.delta_theta)
        .unwrap_or(f64::INFINITY)
}

/// Grid scan followed by golden-section refinement around the best node.
/// Among grid nodes tied to within 1e-9 relative, the one nearest the
/// mid-fringe point `pi/2` wins, so flat curves report `pi/2`.
pub fn optimal_theta(
    moms: &MomentSet,
    m: u64,
    window: (f64, f64),
    grid_points: usize,
    tol: f64,
) -> Result<OptimalPhase> {
    check_m(m)?;
    let (lo, hi) = window;
    if !(hi > lo) || grid_points < 3 {
        return Err(Error::Domain(format!("bad window [{lo}, {hi}] / grid {grid_points}")));
    }
    let grid = linspace(lo, hi, grid_points);
    let values: Vec<f64> = grid.par_iter().map(|&t| objective(moms, t, m)).collect();
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::NoMinimum { lo, hi });
    }
    let tie = best * (1.0 + 1e-9);
    let i = (0..grid.len())
        .filter(|&i| values[i] <= tie)
        .min_by(|&a, &b| {
            (grid[a] - FRAC_PI_2)
                .abs()
                .total_cmp(&(grid[b] - FRAC_PI_2).abs())
        })
        .unwrap();

    let left = i.saturating_sub(1);
    let right = (i + 1).min(grid.len() - 1);
    if values[left] <= tie && values[right] <= tie {
        return Ok(OptimalPhase {
            theta: grid[i],
            delta_theta: values[i],
        });
    }
    let (t, v) = golden_section(|t| objective(moms, t, m), grid[left], grid[right], tol);
    Ok(if v < values[i] {
        OptimalPhase {
            theta: t,
            delta_theta: v,
        }
    } else {
        OptimalPhase {
            theta: grid[i],
            delta_theta: values[i],
        }
    })
}

pub fn optimal_theta_default(moms: &MomentSet, m: u64, window: (f64, f64)) -> Result<OptimalPhase> {
    optimal_theta(moms, m, window, DEFAULT_OPT_GRID, DEFAULT_OPT_TOL)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Evenly spaced grid including both ends.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Where a curve came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveProvenance {
    pub label: String,
    pub gamma: f64,
    pub n_mean: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityCurve {
    pub points: Vec<SensitivityPoint>,
    pub provenance: CurveProvenance,
}

impl SensitivityCurve {
    /// Smallest finite sensitivity on the curve.
    pub fn minimum(&self) -> Option<&SensitivityPoint> {
        self.points
            .iter()
            .filter(|p| p.delta_theta.is_some())
            .min_by(|a, b| a.delta_theta.unwrap().total_cmp(&b.delta_theta.unwrap()))
    }
}

/// Sensitivity at every grid phase; divergent phases stay in the curve with
/// `delta_theta = None`.
pub fn sensitivity_curve(
    moms: &MomentSet,
    theta_grid: &[f64],
    m: u64,
    provenance: CurveProvenance,
) -> Result<SensitivityCurve> {
    check_m(m)?;
    if theta_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("theta grid must be strictly increasing".into()));
    }
    let points = theta_grid
        .par_iter()
        .map(|&t| delta_theta_from_moments(moms, t, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityCurve { points, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{binomial_sector_state, prepared_clock_state, NumberDistribution};

    fn clock(n: f64, s2: f64) -> MomentSet {
        moments(&prepared_clock_state(&NumberDistribution::gaussian(n, s2, 6.0).unwrap()).unwrap())
    }

    #[test]
    fn identity_sequence_at_zero_phase() {
        let m = clock(100.0, 100.0);
        let out = output_number_moments(&m, 0.0);
        assert!((out.mean - m.na_mean).abs() < 1e-12);
        assert!((out.var - m.na_var).abs() < 1e-10);
    }

    #[test]
    fn two_atom_css_at_mid_fringe() {
        let m = moments(&AtomState::pure(binomial_sector_state(2)).unwrap());
        let out = output_number_moments(&m, FRAC_PI_2);
        assert!(out.mean.abs() < 1e-14);
        assert!(out.var.abs() < 1e-14);
    }

    #[test]
    fn clock_state_mid_fringe_is_noiseless_readout() {
        // every sector is a Jx eigenstate, so na_out = n/2 - Jx vanishes identically
        let m = clock(100.0, 100.0);
        let out = output_number_moments(&m, FRAC_PI_2);
        assert!(out.mean.abs() < 1e-9);
        assert!(out.var < 1e-12);
        let p = delta_theta_from_moments(&m, FRAC_PI_2, 1).unwrap();
        let want = eq6_sensitivity(m.n_mean, m.cov.nn, FRAC_PI_2, 1).unwrap();
        assert!((p.value().unwrap() / want - 1.0).abs() < 1e-6);
    }

    #[test]
    fn twin_fock_is_divergent() {
        let m = moments(&AtomState::twin_fock(5));
        for t in [0.0, 0.3, FRAC_PI_2] {
            let p = delta_theta_from_moments(&m, t, 1).unwrap();
            assert!(matches!(p.value(), Err(Error::DivergentSensitivity { .. })));
        }
    }

    #[test]
    fn reference_limits() {
        assert!((sql_limit(1e5, 1) - 3.1623e-3).abs() < 1e-7);
        assert!((heisenberg_limit(1e5, 1) - 1.4142e-5).abs() < 1e-9);
        assert_eq!(sql_limit(1.0, 1), 1.0);
        assert_eq!(heisenberg_limit(1.0, 1), std::f64::consts::SQRT_2);
        assert!((sql_limit(100.0, 4) - 0.05).abs() < 1e-15);
        assert!((heisenberg_limit(100.0, 4) - 7.0711e-3).abs() < 1e-7);
    }

    #[test]
    fn eq6_values() {
        let sql = eq6_sensitivity(1e5, 1e5, FRAC_PI_2, 3).unwrap();
        assert!((sql - 1.0 / (3e5f64).sqrt()).abs() < 1e-15);
        let at0 = eq6_sensitivity(1e5, 1e5, 0.0, 1).unwrap();
        assert!((at0 - 2e-5f64.sqrt()).abs() < 1e-15);
        assert!((at0 - 4.472e-3).abs() < 1e-6);
        for t in [-1.0, 0.2, 2.5] {
            let v = eq6_sensitivity(400.0, 0.0, t, 2).unwrap();
            assert!((v - 1.0 / 800f64.sqrt()).abs() < 1e-15);
        }
        assert!(matches!(
            eq6_sensitivity(1e3, 1e3, 3.0 * FRAC_PI_2, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn eq8_values() {
        let v = eq8_sensitivity(1e5, 1e5, 0.0, 1);
        assert!((v - eq6_sensitivity(1e5, 1e5, 0.0, 1).unwrap()).abs() < 1e-15);
        // large squeezing: 1/(n sqrt(m gamma))
        let (n, g) = (1e4, 1e3);
        let v = eq8_sensitivity(n, n, g, 2);
        assert!((v / (1.0 / (n * (2.0 * g).sqrt())) - 1.0).abs() < 1e-4);
        // sub shot-noise threshold gamma* = s2 / (n (n + s2)) gives exactly the SQL
        let (n, s2) = (1e3, 4e3);
        let g = s2 / (n * (n + s2));
        let v = eq8_sensitivity(n, s2, g, 1);
        assert!((v - sql_limit(n, 1)).abs() < 1e-12 * v);
        assert!(eq8_sensitivity(n, s2, g * 1.01, 1) < sql_limit(n, 1));
    }

    #[test]
    fn small_angle_requires_symmetry() {
        let m = moments(&crate::state::fock_mixture_state(3, &[1.0]).unwrap());
        assert!(matches!(small_angle_delta_theta(&m, 1), Err(Error::Precondition(_))));
        let m = moments(&AtomState::twin_fock(3));
        assert!(matches!(
            small_angle_delta_theta(&m, 1),
            Err(Error::DivergentSensitivity { .. })
        ));
    }

    #[test]
    fn unsqueezed_clock_optimum_is_mid_fringe() {
        let m = clock(1e4, 1e4);
        let opt = optimal_theta_default(&m, 1, (-1.5, 3.1)).unwrap();
        assert!((opt.theta - FRAC_PI_2).abs() < 1e-3, "{opt:?}");
        assert!((opt.delta_theta * 100.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fixed_number_curve_is_flat() {
        let m = moments(&AtomState::pure(binomial_sector_state(400)).unwrap());
        let opt = optimal_theta_default(&m, 1, (-1.5, 3.1)).unwrap();
        assert!((opt.theta - FRAC_PI_2).abs() < 1e-3);
        for t in linspace(-1.5, 3.1, 47) {
            let v = delta_theta_from_moments(&m, t, 1).unwrap().value().unwrap();
            assert!((v - 0.05).abs() < 1e-6, "theta {t}: {v}");
        }
    }

    #[test]
    fn curve_rejects_unsorted_grid() {
        let m = clock(100.0, 100.0);
        let prov = CurveProvenance {
            label: "x".into(),
            gamma: 0.0,
            n_mean: 100.0,
            sigma2: 100.0,
        };
        assert!(sensitivity_curve(&m, &[0.1, 0.1], 1, prov).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (t, v) = golden_section(|x| (x - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-9);
        assert!((t - 0.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-15);
    }
}
