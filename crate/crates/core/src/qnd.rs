//! QND atom-light coupling `H = hbar g c'c na` with homodyne readout of the
//! light quadrature `p = (c - c')/2i`.
//!
//! A probe in the coherent state `|alpha>` (alpha real) that interacts for a
//! time `t` with `n` atoms in mode `a` leaves in `|alpha e^{-i Omega n}>`,
//! `Omega = g t`. Measuring `p` with result `p0` multiplies the atomic
//! amplitude `c_n` by the overlap `K(p0, n) = <p0 | alpha e^{-i Omega n}>`:
//!
//! ```text
//! |K|^2 = sqrt(2/pi) exp(-2 (p0 - q_n)^2),     q_n = -alpha sin(Omega n)
//! arg K = -2 p0 x_n + q_n x_n,                 x_n =  alpha cos(Omega n)
//! ```
//!
//! (n-independent phases dropped). The phase follows from
//! `<p|beta> = (2/pi)^(1/4) exp(-(p - Im beta)^2 - 2i p Re beta + i Re beta Im beta)`.
//!
//! `K` depends only on the mode-`a` occupation, so `M` rounds with outcomes
//! `p_1..p_M` act on the atoms through the mean outcome alone: the product of
//! the kernels is, up to an n-independent factor,
//! `exp(-M (pbar - q_n)^2) exp(i M (q_n - 2 pbar) x_n)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::observables::{Covariance, MomentSet};
use crate::state::{AtomState, Sector, AMPLITUDE_CUTOFF};

/// Quadrature variance of a coherent state for `p = (c - c')/2i`.
pub const VACUUM_QUADRATURE_VARIANCE: f64 = 0.25;

/// `Omega * n_max` above this is flagged as outside the linear regime.
pub const VALIDITY_LIMIT: f64 = 0.1;

/// Rounds above this count keep only the mean outcome in the record.
pub const DEFAULT_OUTCOME_RECORD_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseTuning {
    None,
    /// Adjust `Omega` so `M alpha^2 Omega` is the nearest nonzero multiple of pi.
    SnapToPiMultiple,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QndConfig {
    /// Coherent probe amplitude (real).
    pub alpha: f64,
    /// Single-pass phase per atom, `g t`.
    pub omega: f64,
    pub rounds: u64,
    pub seed: u64,
    pub phase_tuning: PhaseTuning,
}

/// `Omega * n_max` against the state's support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validity {
    pub omega_n_max: f64,
    pub ok: bool,
}

impl QndConfig {
    pub fn new(alpha: f64, omega: f64, rounds: u64, seed: u64) -> Result<Self> {
        let cfg = Self {
            alpha,
            omega,
            rounds,
            seed,
            phase_tuning: PhaseTuning::None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parameters reaching squeezing strength `gamma` with probe amplitude
    /// `alpha` and `Omega <= omega_max`, with `M alpha^2 Omega` an even
    /// multiple of pi so the coherence keeps its sign. The realized
    /// `gamma()` differs from the request by the rounding of `M`.
    pub fn for_gamma(gamma: f64, alpha: f64, omega_max: f64, seed: u64) -> Result<Self> {
        if !(gamma > 0.0) || !(alpha > 0.0) || !(omega_max > 0.0) {
            return Err(Error::Domain(format!(
                "need gamma, alpha, omega_max > 0 (got {gamma}, {alpha}, {omega_max})"
            )));
        }
        // gamma = Omega * (M alpha^2 Omega) = Omega k pi
        let k_min = (gamma / (PI * omega_max)).max(alpha * gamma.sqrt() / PI);
        let mut k = 2.0 * (k_min / 2.0).ceil().max(1.0);
        let mut rounds = ((k * PI).powi(2) / (alpha * alpha * gamma)).round();
        while rounds < 1.0 {
            k += 2.0;
            rounds = ((k * PI).powi(2) / (alpha * alpha * gamma)).round();
        }
        if rounds > u64::MAX as f64 / 2.0 {
            return Err(Error::Domain(format!("gamma {gamma} needs too many rounds")));
        }
        let rounds = rounds as u64;
        let omega = k * PI / (rounds as f64 * alpha * alpha);
        Ok(Self {
            alpha,
            omega,
            rounds,
            seed,
            phase_tuning: PhaseTuning::SnapToPiMultiple,
        })
    }

    pub fn with_tuning(mut self, tuning: PhaseTuning) -> Self {
        self.phase_tuning = tuning;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !self.omega.is_finite() {
            return Err(Error::Domain("omega must be finite".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Domain("rounds must be >= 1".into()));
        }
        Ok(())
    }

    /// Squeezing strength `alpha^2 Omega^2 M`.
    pub fn gamma(&self) -> f64 {
        self.alpha * self.alpha * self.omega * self.omega * self.rounds as f64
    }

    /// Accumulated linear phase `M alpha^2 Omega`.
    pub fn total_phase(&self) -> f64 {
        self.rounds as f64 * self.alpha * self.alpha * self.omega
    }

    /// Applies the phase tuning policy.
    pub fn tuned(&self) -> Self {
        let mut out = *self;
        if self.phase_tuning == PhaseTuning::SnapToPiMultiple && self.alpha > 0.0 && self.omega != 0.0 {
            let scale = self.rounds as f64 * self.alpha * self.alpha;
            let k = (self.total_phase() / PI).round();
            let k = if k == 0.0 { self.omega.signum() } else { k };
            out.omega = k * PI / scale;
        }
        out
    }

    pub fn validity(&self, state: &AtomState) -> Validity {
        let omega_n_max = self.omega.abs() * state.max_na() as f64;
        Validity {
            omega_n_max,
            ok: omega_n_max <= VALIDITY_LIMIT,
        }
    }

    /// Center `q_n = -alpha sin(Omega n)` of the quadrature distribution.
    pub fn outcome_mean(&self, n: usize) -> f64 {
        -self.alpha * (self.omega * n as f64).sin()
    }
}

/// Single-round overlap `<p | alpha e^{-i Omega n}>` without n-independent phases.
pub fn kernel(p: f64, n: usize, alpha: f64, omega: f64) -> Complex64 {
    let (s, c) = (omega * n as f64).sin_cos();
    let q = -alpha * s;
    let x = alpha * c;
    let modulus = (2.0 / PI).powf(0.25) * (-(p - q).powi(2)).exp();
    Complex64::from_polar(modulus, -2.0 * p * x + q * x)
}

/// Quadrature density: a Gaussian mixture with one component per mode-`a`
/// occupation.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneDensity {
    /// `(n, weight, center)`; weights sum to one.
    pub components: Vec<(usize, f64, f64)>,
    pub variance: f64,
}

impl HomodyneDensity {
    pub fn pdf(&self, p: f64) -> f64 {
        let norm = 1.0 / (2.0 * PI * self.variance).sqrt();
        self.components
            .iter()
            .map(|&(_, w, q)| w * (-(p - q).powi(2) / (2.0 * self.variance)).exp())
            .sum::<f64>()
            * norm
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|&(_, w, q)| w * q).sum()
    }

    fn latent(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.components.iter().map(|c| c.1)).expect("weights sum to one")
    }

    /// Draws the occupation `n` then `p ~ Normal(q_n, variance)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (_, _, q) = self.components[self.latent().sample(rng)];
        Normal::new(q, self.variance.sqrt()).unwrap().sample(rng)
    }
}

/// Probability weight of each mode-`a` occupation, `sum_N P_N |c_n^(N)|^2`.
fn occupation_weights(state: &AtomState) -> Vec<(usize, f64)> {
    let hi = state.max_na();
    let lo = state
        .sectors()
        .iter()
        .map(|s| s.state.support().0)
        .min()
        .unwrap_or(0);
    let mut w = vec![0.0; hi - lo + 1];
    for s in state.sectors() {
        for (n, c) in s.state.iter() {
            w[n - lo] += s.weight * c.norm_sqr();
        }
    }
    let total: f64 = w.iter().sum();
    w.iter()
        .enumerate()
        .filter(|(_, x)| **x > 0.0)
        .map(|(k, x)| (lo + k, x / total))
        .collect()
}

/// `P_0(p)` for one probe.
pub fn homodyne_distribution(state: &AtomState, cfg: &QndConfig) -> HomodyneDensity {
    HomodyneDensity {
        components: occupation_weights(state)
            .into_iter()
            .map(|(n, w)| (n, w, cfg.outcome_mean(n)))
            .collect(),
        variance: VACUUM_QUADRATURE_VARIANCE,
    }
}

pub fn sample_homodyne<R: Rng + ?Sized>(state: &AtomState, cfg: &QndConfig, rng: &mut R) -> f64 {
    homodyne_distribution(state, cfg).sample(rng)
}

/// Conditional state after one probe with outcome `p0`.
pub fn qnd_update(state: &AtomState, p0: f64, cfg: &QndConfig) -> Result<AtomState> {
    apply_outcomes(state, p0, 1, cfg)
}

/// Conditional state after `rounds` probes whose outcomes average to `mean_outcome`.
pub fn apply_outcomes(
    state: &AtomState,
    mean_outcome: f64,
    rounds: u64,
    cfg: &QndConfig,
) -> Result<AtomState> {
    if rounds == 0 {
        return Ok(state.clone());
    }
    let m = rounds as f64;
    let lo = state
        .sectors()
        .iter()
        .map(|s| s.state.support().0)
        .min()
        .unwrap_or(0);
    let hi = state.max_na();
    let log_mod: Vec<f64> = (lo..=hi)
        .map(|n| -m * (mean_outcome - cfg.outcome_mean(n)).powi(2))
        .collect();
    let shift = log_mod.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // the outcome density, Gaussian in pbar with variance 1/(4M), underflows
    if 2.0 * shift < f64::MIN_POSITIVE.ln() {
        return Err(Error::Underflow(format!(
            "outcome mean {mean_outcome} lies outside the support of the outcome density"
        )));
    }
    let factors: Vec<Complex64> = (lo..=hi)
        .zip(&log_mod)
        .map(|(n, &lm)| {
            Complex64::from_polar((lm - shift).exp(), m * phase_step(lo, n, mean_outcome, cfg))
        })
        .collect();

    let mut sectors: Vec<Sector> = state.sectors().to_vec();
    sectors.par_iter_mut().for_each(|s| {
        let (slo, _) = s.state.support();
        for (k, c) in s.state.amplitudes_mut().iter_mut().enumerate() {
            *c *= factors[slo + k - lo];
        }
        let likelihood = s.state.norm_sqr();
        s.weight *= likelihood;
        if likelihood > 0.0 {
            let scale = 1.0 / likelihood.sqrt();
            s.state.amplitudes_mut().iter_mut().for_each(|c| *c *= scale);
        }
    });
    AtomState::from_normalized(sectors).map_err(|_| {
        Error::Underflow(format!(
            "outcome mean {mean_outcome} has vanishing likelihood on the state support"
        ))
    })
}

/// `(q_n - 2p) x_n - (q_r - 2p) x_r`, written with sum-to-product identities
/// so it stays accurate when multiplied by a large round count.
fn phase_step(r: usize, n: usize, p: f64, cfg: &QndConfig) -> f64 {
    let (a, w) = (cfg.alpha, cfg.omega);
    let half_diff = 0.5 * w * (n as f64 - r as f64);
    let half_sum = 0.5 * w * (n as f64 + r as f64);
    // q x = -(a^2/2) sin(2 w n)
    let d_qx = -a * a * (2.0 * half_sum).cos() * (2.0 * half_diff).sin();
    let d_x = -2.0 * a * half_sum.sin() * half_diff.sin();
    d_qx - 2.0 * p * d_x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolMode {
    /// Sample and update round by round from the running posterior.
    Sequential,
    /// Draw the conserved occupation once, then all outcomes, and apply them
    /// in one pass; same joint law as `Sequential`.
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub mode: ProtocolMode,
    /// Keep individual outcomes when `rounds` does not exceed this.
    pub outcome_record_limit: u64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self {
            mode: ProtocolMode::Fused,
            outcome_record_limit: DEFAULT_OUTCOME_RECORD_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QndRecord {
    /// Per-round outcomes; empty when `rounds` exceeds the record limit.
    pub outcomes: Vec<f64>,
    pub mean_outcome: f64,
    pub rounds: u64,
    pub gamma: f64,
    /// Single-pass phase actually used (after tuning).
    pub omega: f64,
    pub posterior_state_digest: String,
}

/// RNG for Monte Carlo record `index`: one ChaCha stream per record.
pub fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run_protocol<R: Rng + ?Sized>(
    state: &AtomState,
    cfg: &QndConfig,
    rng: &mut R,
) -> Result<(AtomState, QndRecord)> {
    run_protocol_with(state, cfg, rng, ProtocolOptions::default())
}

pub fn run_protocol_with<R: Rng + ?Sized>(
    state: &AtomState,
    cfg: &QndConfig,
    rng: &mut R,
    opts: ProtocolOptions,
) -> Result<(AtomState, QndRecord)> {
    cfg.validate()?;
    let cfg = cfg.tuned();
    let keep = cfg.rounds <= opts.outcome_record_limit;
    let mut outcomes = Vec::new();

    let (posterior, mean_outcome) = match opts.mode {
        ProtocolMode::Sequential => {
            let mut current = state.clone();
            let mut sum = 0.0;
            for _ in 0..cfg.rounds {
                let p = sample_homodyne(&current, &cfg, rng);
                current = qnd_update(&current, p, &cfg)?;
                trim_state(&mut current);
                sum += p;
                if keep {
                    outcomes.push(p);
                }
            }
            (current, sum / cfg.rounds as f64)
        }
        ProtocolMode::Fused => {
            let density = homodyne_distribution(state, &cfg);
            let (_, _, q) = density.components[density.latent().sample(rng)];
            let mean_outcome = if keep {
                let noise = Normal::new(q, VACUUM_QUADRATURE_VARIANCE.sqrt()).unwrap();
                outcomes.extend((0..cfg.rounds).map(|_| noise.sample(rng)));
                outcomes.iter().sum::<f64>() / cfg.rounds as f64
            } else {
                let sd = (VACUUM_QUADRATURE_VARIANCE / cfg.rounds as f64).sqrt();
                Normal::new(q, sd).unwrap().sample(rng)
            };
            let mut post = apply_outcomes(state, mean_outcome, cfg.rounds, &cfg)?;
            trim_state(&mut post);
            (post, mean_outcome)
        }
    };
    let record = QndRecord {
        outcomes,
        mean_outcome,
        rounds: cfg.rounds,
        gamma: cfg.gamma(),
        omega: cfg.omega,
        posterior_state_digest: state_digest(&posterior),
    };
    Ok((posterior, record))
}

/// Drops amplitudes below [`AMPLITUDE_CUTOFF`] of each sector peak and
/// sectors below that fraction of the heaviest sector.
pub fn trim_state(state: &mut AtomState) {
    let max_w = state.sectors().iter().map(|s| s.weight).fold(0.0, f64::max);
    let mut sectors: Vec<Sector> = state
        .sectors()
        .iter()
        .filter(|s| s.weight >= AMPLITUDE_CUTOFF * max_w)
        .cloned()
        .collect();
    sectors.par_iter_mut().for_each(|s| {
        s.state.trim(AMPLITUDE_CUTOFF);
        let norm2 = s.state.norm_sqr();
        s.weight *= norm2;
        let scale = 1.0 / norm2.sqrt();
        s.state.amplitudes_mut().iter_mut().for_each(|c| *c *= scale);
    });
    *state = AtomState::from_normalized(sectors).expect("heaviest sector survives");
}

/// SHA-256 over sector totals, windows, weights and amplitude bits.
pub fn state_digest(state: &AtomState) -> String {
    let mut h = Sha256::new();
    for s in state.sectors() {
        let (lo, hi) = s.state.support();
        h.update((s.state.total_n() as u64).to_le_bytes());
        h.update((lo as u64).to_le_bytes());
        h.update((hi as u64).to_le_bytes());
        h.update(s.weight.to_bits().to_le_bytes());
        for c in s.state.amplitudes() {
            h.update(c.re.to_bits().to_le_bytes());
            h.update(c.im.to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Mode-`a` number variance after squeezing of strength `gamma`:
/// `((s2 + n)/4) / (1 + gamma (s2 + n))`.
pub fn variance_after_qnd(n_mean: f64, sigma2: f64, gamma: f64) -> f64 {
    let spread = sigma2 + n_mean;
    spread / 4.0 / (1.0 + gamma * spread)
}

/// Coherence `<a'b + b'a>` after `rounds` probes, `n cos(M alpha^2 Omega)`.
///
/// The prefactor 1 is the one that reproduces the unsqueezed coherence `n`
/// of the clock state and the small-angle sensitivity formula; the
/// protocol simulation confirms it.
pub fn coherence_after_qnd(n_mean: f64, alpha: f64, omega: f64, rounds: u64) -> f64 {
    n_mean * (rounds as f64 * alpha * alpha * omega).cos()
}

/// The same expression with the prefactor 2, as it is usually quoted.
pub fn coherence_after_qnd_printed(n_mean: f64, alpha: f64, omega: f64, rounds: u64) -> f64 {
    2.0 * coherence_after_qnd(n_mean, alpha, omega, rounds)
}

/// Mean spin length used by [`analytic_post_qnd_moments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherenceModel {
    /// `n cos(M alpha^2 Omega)`, as in [`coherence_after_qnd`].
    Calibrated,
    /// The calibrated value shortened by the back-action deficit `<D>`.
    Refined,
}

/// Gaussian moment model of the clock state after squeezing strength
/// `gamma`, for an outcome record at the prior mean.
///
/// Total number and the mode-`a` population are conditioned as jointly
/// Gaussian variables on a measurement of `na` with noise variance
/// `1/(4 gamma)`; `na_var` equals [`variance_after_qnd`]. Phase-side
/// quantities come from the Holstein-Primakoff picture of a squeezed
/// coherent spin with `x = gamma n`: `Var(D) = (x(2+x)/(1+x))^2 / 8` and,
/// for the refined model, `<D> = -x^2 / (4(1+x))`, where `D = |Jx| - n/2`.
pub fn analytic_post_qnd_moments(
    n_mean: f64,
    sigma2: f64,
    gamma: f64,
    total_phase: f64,
    model: CoherenceModel,
) -> MomentSet {
    let v0 = (sigma2 + n_mean) / 4.0;
    // 1 / (V0 + r) with r = 1/(4 gamma)
    let k = 4.0 * gamma / (1.0 + 4.0 * gamma * v0);
    let c_nna = sigma2 / 2.0;
    let c_zna = n_mean / 4.0;
    let nn = sigma2 - c_nna * c_nna * k;
    let nz = -c_nna * c_zna * k;
    let zz = n_mean / 4.0 - c_zna * c_zna * k;

    let x = gamma * n_mean;
    let cos = total_phase.cos();
    let d_mean = match model {
        CoherenceModel::Calibrated => 0.0,
        CoherenceModel::Refined => -x * x / (4.0 * (1.0 + x)),
    } - (1.0 - cos.abs()) * n_mean / 2.0;
    let d_var = (x * (2.0 + x) / (1.0 + x)).powi(2) / 8.0;
    // d<D>/dN, carried through the spread of N
    let d_slope = -gamma * x * (2.0 + x) / (4.0 * (1.0 + x).powi(2));
    let cov = Covariance {
        nn,
        nz,
        nd: d_slope * nn,
        zz,
        zd: d_slope * nz,
        dd: d_var + d_slope * d_slope * nn,
    };
    let sign = if cos < 0.0 { -1.0 } else { 1.0 };
    let jx = sign * (n_mean / 2.0 + d_mean);
    let var_jx = cov.quadratic([0.5, 0.0, 1.0]);
    MomentSet {
        jx,
        jy: 0.0,
        jz: 0.0,
        jx2: var_jx + jx * jx,
        jz2: zz,
        jxjz_sym: 2.0 * sign * (cov.zd + 0.5 * cov.nz),
        n_mean,
        n2_mean: nn + n_mean * n_mean,
        na_mean: n_mean / 2.0,
        na_var: cov.quadratic([0.5, 1.0, 0.0]),
        coherence: 2.0 * jx,
        jx_sign: sign,
        cov,
    }
}
