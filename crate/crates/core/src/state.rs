//! Two-mode bosonic states with conserved total particle number.
//!
//! A state is stored as a mixture of fixed-total-`N` sectors. Within a
//! sector the basis is `|n, N - n>` (mode `a` holds `n` particles, mode `b`
//! the rest), so a sector is an amplitude vector indexed by the mode-`a`
//! occupation. Every operator used downstream (number operators, collective
//! spin components, the Ramsey rotation and the QND coupling) conserves the
//! total number, so coherences between different sectors never enter any
//! computed quantity and are not stored.
//!
//! Amplitudes are kept only on a window `[support_lo, support_hi]`; entries
//! outside it are exactly zero.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Amplitudes with `|c|^2` below this fraction of the sector peak are cut.
pub const AMPLITUDE_CUTOFF: f64 = 1e-30;

/// Gaussian total-number distributions are cut at this many standard deviations.
pub const DEFAULT_TRUNCATION_HALFWIDTH: f64 = 6.0;

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Half-width, in standard deviations, of the window that keeps `|c|^2`
/// above [`AMPLITUDE_CUTOFF`] for a Gaussian probability profile.
fn cutoff_halfwidth() -> f64 {
    (-2.0 * AMPLITUDE_CUTOFF.ln()).sqrt()
}

/// Pure state of one fixed-total-number sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    total_n: usize,
    lo: usize,
    amps: Vec<Complex64>,
}

impl SectorState {
    /// Builds a sector from the amplitudes on `[lo, lo + amps.len() - 1]`.
    pub fn new(total_n: usize, lo: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Domain("sector window must be non-empty".into()));
        }
        if lo + amps.len() - 1 > total_n {
            return Err(Error::Domain(format!(
                "window [{lo}, {}] exceeds total {total_n}",
                lo + amps.len() - 1
            )));
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        Ok(Self { total_n, lo, amps })
    }

    /// Full amplitude vector of length `total_n + 1`.
    pub fn from_dense(amps: &[Complex64]) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Domain("empty amplitude vector".into()));
        }
        let total_n = amps.len() - 1;
        let first = amps.iter().position(|c| c.norm_sqr() > 0.0);
        let Some(first) = first else {
            return Err(Error::Degenerate("all amplitudes vanish".into()));
        };
        let last = amps.iter().rposition(|c| c.norm_sqr() > 0.0).unwrap();
        Self::new(total_n, first, amps[first..=last].to_vec())
    }

    /// `|na, total_n - na>`.
    pub fn fock(total_n: usize, na: usize) -> Result<Self> {
        Self::new(total_n, na, vec![Complex64::new(1.0, 0.0)])
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    /// Inclusive truncation window `(support_lo, support_hi)`.
    pub fn support(&self) -> (usize, usize) {
        (self.lo, self.lo + self.amps.len() - 1)
    }

    /// Amplitudes on the support window, starting at `support().0`.
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn amplitude(&self, n: usize) -> Complex64 {
        if n < self.lo {
            return Complex64::new(0.0, 0.0);
        }
        self.amps
            .get(n - self.lo)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        (0..=self.total_n).map(|n| self.amplitude(n)).collect()
    }

    /// `(n, c_n)` over the support window.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.amps.iter().enumerate().map(move |(k, c)| (self.lo + k, *c))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Rescales to unit norm and returns the norm squared before scaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm2 = self.norm_sqr();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::Degenerate(format!(
                "sector N={} has norm^2 = {norm2}",
                self.total_n
            )));
        }
        let scale = 1.0 / norm2.sqrt();
        for c in &mut self.amps {
            *c *= scale;
        }
        Ok(norm2)
    }

    /// Shrinks the window, dropping edge amplitudes with `|c|^2 < rel * peak`.
    pub fn trim(&mut self, rel: f64) {
        let peak = self.amps.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        if peak == 0.0 {
            return;
        }
        let keep = |c: &Complex64| c.norm_sqr() >= rel * peak;
        let first = self.amps.iter().position(keep).unwrap();
        let last = self.amps.iter().rposition(keep).unwrap();
        if first > 0 || last + 1 < self.amps.len() {
            self.amps.truncate(last + 1);
            self.amps.drain(..first);
            self.lo += first;
        }
    }
}

/// One mixture component: a sector state with its probability `P_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub weight: f64,
    pub state: SectorState,
}

/// Weighted mixture of sector states.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomState {
    sectors: Vec<Sector>,
    n_mean: f64,
    n_var: f64,
}

impl AtomState {
    /// Normalizes weights and every sector; zero-weight sectors are dropped.
    pub fn from_sectors(sectors: impl IntoIterator<Item = (f64, SectorState)>) -> Result<Self> {
        let mut out = Vec::new();
        for (weight, mut state) in sectors {
            if !(weight >= 0.0) || !weight.is_finite() {
                return Err(Error::Domain(format!("invalid sector weight {weight}")));
            }
            if weight == 0.0 {
                continue;
            }
            state.normalize()?;
            out.push(Sector { weight, state });
        }
        Self::from_normalized(out)
    }

    /// Renormalizes the weights of sectors whose states are already unit norm.
    pub(crate) fn from_normalized(mut sectors: Vec<Sector>) -> Result<Self> {
        sectors.retain(|s| s.weight > 0.0);
        let total: f64 = sectors.iter().map(|s| s.weight).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate("total sector weight vanishes".into()));
        }
        for s in &mut sectors {
            s.weight /= total;
        }
        let n_mean: f64 = sectors.iter().map(|s| s.weight * s.state.total_n as f64).sum();
        let n_var: f64 = sectors
            .iter()
            .map(|s| s.weight * (s.state.total_n as f64 - n_mean).powi(2))
            .sum();
        Ok(Self {
            sectors,
            n_mean,
            n_var,
        })
    }

    pub fn pure(state: SectorState) -> Result<Self> {
        Self::from_sectors([(1.0, state)])
    }

    /// `|n, n>`.
    pub fn twin_fock(n: usize) -> Self {
        Self::pure(SectorState::fock(2 * n, n).unwrap()).unwrap()
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    /// Mean of the total-number distribution.
    pub fn n_mean(&self) -> f64 {
        self.n_mean
    }

    /// Variance of the total-number distribution.
    pub fn n_var(&self) -> f64 {
        self.n_var
    }

    pub fn max_total(&self) -> usize {
        self.sectors.iter().map(|s| s.state.total_n).max().unwrap_or(0)
    }

    /// Largest mode-`a` occupation inside any support window.
    pub fn max_na(&self) -> usize {
        self.sectors.iter().map(|s| s.state.support().1).max().unwrap_or(0)
    }

    pub fn amplitude_count(&self) -> usize {
        self.sectors.iter().map(|s| s.state.amps.len()).sum()
    }

    /// `sum_N P_N sum_n |c_n|^2`.
    pub fn total_probability(&self) -> f64 {
        self.sectors
            .iter()
            .map(|s| s.weight * s.state.norm_sqr())
            .sum()
    }

    /// True when every sector holds a single Fock amplitude.
    pub fn is_fock_diagonal(&self) -> bool {
        self.sectors
            .iter()
            .all(|s| s.state.amps.iter().filter(|c| c.norm_sqr() > 0.0).count() == 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Gaussian,
    Delta,
    Custom,
}

/// Discrete probability distribution of the total atom number.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberDistribution {
    pub kind: DistributionKind,
    pub mean: f64,
    pub variance: f64,
    pub truncation_halfwidth: f64,
    first: usize,
    weights: Vec<f64>,
}

impl NumberDistribution {
    pub fn gaussian(mean: f64, variance: f64, truncation_halfwidth: f64) -> Result<Self> {
        check_moments(mean, variance)?;
        if !(truncation_halfwidth > 0.0) {
            return Err(Error::Domain(format!(
                "truncation half-width must be positive, got {truncation_halfwidth}"
            )));
        }
        if variance == 0.0 {
            let mut d = Self::delta(mean)?;
            d.kind = DistributionKind::Gaussian;
            d.truncation_halfwidth = truncation_halfwidth;
            return Ok(d);
        }
        let sd = variance.sqrt();
        let lo = (mean - truncation_halfwidth * sd).ceil().max(0.0) as usize;
        let hi = (mean + truncation_halfwidth * sd).floor();
        if hi < lo as f64 {
            return Err(Error::Degenerate(format!(
                "no integer support for mean {mean}, variance {variance}"
            )));
        }
        let hi = hi as usize;
        let mut weights: Vec<f64> = (lo..=hi)
            .map(|n| (-(n as f64 - mean).powi(2) / (2.0 * variance)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            kind: DistributionKind::Gaussian,
            mean,
            variance,
            truncation_halfwidth,
            first: lo,
            weights,
        })
    }

    /// Point mass at the integer nearest to `mean`.
    pub fn delta(mean: f64) -> Result<Self> {
        check_moments(mean, 0.0)?;
        Ok(Self {
            kind: DistributionKind::Delta,
            mean,
            variance: 0.0,
            truncation_halfwidth: DEFAULT_TRUNCATION_HALFWIDTH,
            first: mean.round() as usize,
            weights: vec![1.0],
        })
    }

    /// Explicit weights `P_0, P_1, ...`; they must be non-negative and sum to one.
    pub fn custom(weights: &[f64]) -> Result<Self> {
        validate_probabilities(weights)?;
        let total: f64 = weights.iter().sum();
        let first = weights.iter().position(|&w| w > 0.0).unwrap();
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap();
        let weights: Vec<f64> = weights[first..=last].iter().map(|w| w / total).collect();
        let mut d = Self {
            kind: DistributionKind::Custom,
            mean: 0.0,
            variance: 0.0,
            truncation_halfwidth: DEFAULT_TRUNCATION_HALFWIDTH,
            first,
            weights,
        };
        d.mean = d.sample_mean();
        d.variance = d.sample_variance();
        Ok(d)
    }

    /// `(N, P_N)` over the support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(k, &w)| (self.first + k, w))
    }

    pub fn weight(&self, n: usize) -> f64 {
        if n < self.first {
            return 0.0;
        }
        self.weights.get(n - self.first).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> (usize, usize) {
        (self.first, self.first + self.weights.len() - 1)
    }

    /// Mean of the emitted (truncated, renormalized) weights.
    pub fn sample_mean(&self) -> f64 {
        self.iter().map(|(n, w)| w * n as f64).sum()
    }

    pub fn sample_variance(&self) -> f64 {
        let mu = self.sample_mean();
        self.iter().map(|(n, w)| w * (n as f64 - mu).powi(2)).sum()
    }
}

fn check_moments(mean: f64, variance: f64) -> Result<()> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::Domain(format!("mean must be >= 0, got {mean}")));
    }
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!("variance must be >= 0, got {variance}")));
    }
    Ok(())
}

fn validate_probabilities(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    if let Some(bad) = p.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::Domain(format!("invalid probability {bad}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Builds a distribution of the requested kind. `Custom` needs explicit
/// weights and is rejected here; use [`NumberDistribution::custom`].
pub fn make_number_distribution(
    kind: DistributionKind,
    mean: f64,
    variance: f64,
) -> Result<NumberDistribution> {
    match kind {
        DistributionKind::Gaussian => {
            NumberDistribution::gaussian(mean, variance, DEFAULT_TRUNCATION_HALFWIDTH)
        }
        DistributionKind::Delta => {
            if variance != 0.0 {
                check_moments(mean, variance)?;
                return Err(Error::Domain(format!(
                    "delta distribution requires zero variance, got {variance}"
                )));
            }
            NumberDistribution::delta(mean)
        }
        DistributionKind::Custom => Err(Error::Domain(
            "custom distributions are built from explicit weights".into(),
        )),
    }
}

/// State after a pi/2 pulse on `|N, 0>`: amplitudes
/// `2^(-N/2) sqrt(N! / (n! (N-n)!))`, windowed at [`AMPLITUDE_CUTOFF`].
pub fn binomial_sector_state(total_n: usize) -> SectorState {
    let peak = total_n / 2;
    let log_cut = AMPLITUDE_CUTOFF.ln() / 2.0;
    // log c_{n+1} - log c_n = ln((N - n) / (n + 1)) / 2, relative to the peak
    let mut upper = vec![0.0_f64];
    let mut l = 0.0;
    for n in peak..total_n {
        l += 0.5 * ((total_n - n) as f64 / (n + 1) as f64).ln();
        if l < log_cut {
            break;
        }
        upper.push(l);
    }
    let mut lower = Vec::new();
    let mut l = 0.0;
    for n in (1..=peak).rev() {
        l -= 0.5 * ((total_n - n + 1) as f64 / n as f64).ln();
        if l < log_cut {
            break;
        }
        lower.push(l);
    }
    let lo = peak - lower.len();
    let amps: Vec<Complex64> = lower
        .iter()
        .rev()
        .chain(upper.iter())
        .map(|&l| Complex64::new(l.exp(), 0.0))
        .collect();
    let mut s = SectorState::new(total_n, lo, amps).expect("window inside [0, N]");
    s.normalize().expect("peak amplitude is 1");
    s
}

/// `sum_N P_N |psi_N><psi_N|` with binomial `|psi_N>`.
pub fn prepared_clock_state(dist: &NumberDistribution) -> Result<AtomState> {
    let comps: Vec<(usize, f64)> = dist.iter().filter(|(_, w)| *w > 0.0).collect();
    let sectors: Vec<Sector> = comps
        .par_iter()
        .map(|&(n, w)| Sector {
            weight: w,
            state: binomial_sector_state(n),
        })
        .collect();
    AtomState::from_normalized(sectors)
}

/// Real Gaussian mode amplitudes `exp(-(n - mu)^2 / (4 sigma^2))`; `sigma = 0`
/// gives the Fock state at the integer nearest to `mu`.
fn mode_gaussian(mu: f64, sigma: f64) -> (usize, Vec<f64>) {
    if sigma == 0.0 {
        return (mu.round().max(0.0) as usize, vec![1.0]);
    }
    let w = sigma * cutoff_halfwidth();
    let lo = (mu - w).ceil().max(0.0) as usize;
    let hi = (mu + w).floor().max(lo as f64) as usize;
    let amps = (lo..=hi)
        .map(|n| (-(n as f64 - mu).powi(2) / (4.0 * sigma * sigma)).exp())
        .collect();
    (lo, amps)
}

/// Product of two Gaussian pure states centered at `mean_total / 2`,
/// decomposed into total-number sectors.
pub fn gaussian_product_state(mean_total: f64, sigma_a: f64, sigma_b: f64) -> Result<AtomState> {
    if !(mean_total >= 0.0) || !mean_total.is_finite() {
        return Err(Error::Domain(format!("mean_total must be >= 0, got {mean_total}")));
    }
    for s in [sigma_a, sigma_b] {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("mode width must be >= 0, got {s}")));
        }
    }
    let mu = mean_total / 2.0;
    let (la, a) = mode_gaussian(mu, sigma_a);
    let (lb, b) = mode_gaussian(mu, sigma_b);
    let ha = la + a.len() - 1;
    let hb = lb + b.len() - 1;
    let mut sectors = Vec::with_capacity(ha + hb - la - lb + 1);
    for total in (la + lb)..=(ha + hb) {
        let n_lo = la.max(total.saturating_sub(hb));
        let n_hi = ha.min(total - lb);
        let amps: Vec<Complex64> = (n_lo..=n_hi)
            .map(|n| Complex64::new(a[n - la] * b[total - n - lb], 0.0))
            .collect();
        let state = SectorState::new(total, n_lo, amps)?;
        let weight = state.norm_sqr();
        if weight > 0.0 {
            sectors.push((weight, state));
        }
    }
    if sectors.is_empty() {
        return Err(Error::Degenerate("product state has no weight after truncation".into()));
    }
    AtomState::from_sectors(sectors)
}

/// `|N_a><N_a| (x) sum_n rho_b[n] |n><n|`.
pub fn fock_mixture_state(na: usize, rho_b: &[f64]) -> Result<AtomState> {
    validate_probabilities(rho_b)?;
    let sectors = rho_b
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(nb, &w)| Ok((w, SectorState::fock(na + nb, na)?)))
        .collect::<Result<Vec<_>>>()?;
    AtomState::from_sectors(sectors)
}
