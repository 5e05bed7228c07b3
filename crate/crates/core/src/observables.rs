//! First and second moments of the collective spin and number operators.
//!
//! Spin convention (Schwinger): `Jx = (a'b + b'a)/2`, `Jy = (a'b - b'a)/2i`,
//! `Jz = (na - nb)/2`. The interferometric coherence `<a'b + b'a>` is `2 Jx`.
//! Some texts call `(a'b + b'a)/2` "Jy"; only the labels differ, and every
//! quantity exported here that enters a physical result (populations,
//! coherence, in-plane spin length) is label independent.
//!
//! Second moments are assembled from central per-sector moments plus the
//! spread of sector means (law of total covariance). Fluctuations of `Jx`
//! are carried through the deficit `D = s Jx - n/2` (`s` the sign of
//! `<Jx>`), which vanishes on coherent spin states; that keeps
//! `Var(n/2 - Jx)` free of cancellation near the mid-fringe point.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::state::{AtomState, SectorState};

/// Central second moments of `(n, Jz, D)` with `D = s Jx - n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Covariance {
    pub nn: f64,
    pub nz: f64,
    pub nd: f64,
    pub zz: f64,
    pub zd: f64,
    pub dd: f64,
}

impl Covariance {
    /// Variance of `v[0] n + v[1] Jz + v[2] D`.
    pub fn quadratic(&self, v: [f64; 3]) -> f64 {
        let [a, b, c] = v;
        a * a * self.nn
            + b * b * self.zz
            + c * c * self.dd
            + 2.0 * (a * b * self.nz + a * c * self.nd + b * c * self.zd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    /// `<Jx^2>`
    pub jx2: f64,
    /// `<Jz^2>`
    pub jz2: f64,
    /// `<Jx Jz + Jz Jx>`
    pub jxjz_sym: f64,
    pub n_mean: f64,
    pub n2_mean: f64,
    pub na_mean: f64,
    pub na_var: f64,
    /// `<a'b + b'a>`
    pub coherence: f64,
    /// Sign `s` of `<Jx>` used in the deficit `D = s Jx - n/2`.
    pub jx_sign: f64,
    pub cov: Covariance,
}

impl MomentSet {
    pub fn nb_mean(&self) -> f64 {
        self.n_mean - self.na_mean
    }

    pub fn var_jx(&self) -> f64 {
        self.cov.quadratic([0.5, 0.0, 1.0])
    }

    pub fn var_jz(&self) -> f64 {
        self.cov.zz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SectorMoments {
    n: f64,
    jz: f64,
    /// `<a'b>`
    ab: Complex64,
    zz: f64,
    zd: f64,
    dd: f64,
}

fn sector_moments(s: &SectorState) -> SectorMoments {
    let big_n = s.total_n();
    let nf = big_n as f64;
    let (lo, hi) = s.support();
    let amps = s.amplitudes();

    let mut jz = 0.0;
    let mut ab = Complex64::new(0.0, 0.0);
    for (k, c) in amps.iter().enumerate() {
        let n = lo + k;
        jz += c.norm_sqr() * (n as f64 - nf / 2.0);
        if let Some(next) = amps.get(k + 1) {
            ab += next.conj() * c * (((n + 1) * (big_n - n)) as f64).sqrt();
        }
    }
    let jx = ab.re;

    // Jx c over the window grown by one on each side
    let out_lo = lo.saturating_sub(1);
    let out_hi = (hi + 1).min(big_n);
    let mut zz = 0.0;
    let mut zd = 0.0;
    let mut dd = 0.0;
    for m in out_lo..=out_hi {
        let c_m = s.amplitude(m);
        let mut jxc = Complex64::new(0.0, 0.0);
        if m >= 1 {
            jxc += s.amplitude(m - 1) * ((m * (big_n - m + 1)) as f64).sqrt();
        }
        if m < big_n {
            jxc += s.amplitude(m + 1) * (((m + 1) * (big_n - m)) as f64).sqrt();
        }
        let w = 0.5 * jxc - jx * c_m;
        let u = (m as f64 - nf / 2.0 - jz) * c_m;
        zz += u.norm_sqr();
        dd += w.norm_sqr();
        zd += (u.conj() * w).re;
    }
    SectorMoments {
        n: nf,
        jz,
        ab,
        zz,
        zd,
        dd,
    }
}

/// Sum in a fixed binary-tree order, independent of thread scheduling.
fn pairwise_sum<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
    if hi - lo <= 8 {
        return (lo..hi).map(f).sum();
    }
    let mid = lo + (hi - lo) / 2;
    pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f)
}

pub fn moments(state: &AtomState) -> MomentSet {
    let sectors = state.sectors();
    let per: Vec<(f64, SectorMoments)> = sectors
        .par_iter()
        .map(|s| (s.weight, sector_moments(&s.state)))
        .collect();
    let k = per.len();
    let mean = |f: &(dyn Fn(&SectorMoments) -> f64 + Sync)| {
        pairwise_sum(0, k, &|i| per[i].0 * f(&per[i].1))
    };

    let n_mean = mean(&|m| m.n);
    let jz = mean(&|m| m.jz);
    let jx = mean(&|m| m.ab.re);
    let jy = mean(&|m| m.ab.im);
    let sign = if jx < 0.0 { -1.0 } else { 1.0 };
    let d_mean = mean(&|m| sign * m.ab.re - m.n / 2.0);

    let dn = |m: &SectorMoments| m.n - n_mean;
    let dz = |m: &SectorMoments| m.jz - jz;
    let ddm = |m: &SectorMoments| (sign * m.ab.re - m.n / 2.0) - d_mean;
    let cov = Covariance {
        nn: mean(&|m| dn(m) * dn(m)),
        nz: mean(&|m| dn(m) * dz(m)),
        nd: mean(&|m| dn(m) * ddm(m)),
        zz: mean(&|m| m.zz + dz(m) * dz(m)),
        zd: mean(&|m| sign * m.zd + dz(m) * ddm(m)),
        dd: mean(&|m| m.dd + ddm(m) * ddm(m)),
    };

    let var_jx = cov.quadratic([0.5, 0.0, 1.0]);
    let cov_jx_jz = sign * (cov.zd + 0.5 * cov.nz);
    MomentSet {
        jx,
        jy,
        jz,
        jx2: var_jx + jx * jx,
        jz2: cov.zz + jz * jz,
        jxjz_sym: 2.0 * (cov_jx_jz + jx * jz),
        n_mean,
        n2_mean: cov.nn + n_mean * n_mean,
        na_mean: n_mean / 2.0 + jz,
        na_var: cov.quadratic([0.5, 1.0, 0.0]),
        coherence: 2.0 * jx,
        jx_sign: sign,
        cov,
    }
}

/// Value of `(dJz)^2 / (<Jx>^2 + <Jy>^2)`, with its two pathological cases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiSquared {
    Value(f64),
    /// Zero in-plane spin with nonzero `Jz` fluctuations.
    Divergent,
    /// `0/0`.
    Undetermined,
}

/// Squeezing ratio as written, without a particle-number prefactor: a
/// coherent spin state of `N` atoms gives `1/N` rather than 1.
pub fn xi_squared(state: &AtomState) -> XiSquared {
    xi_squared_from(&moments(state))
}

pub fn xi_squared_from(m: &MomentSet) -> XiSquared {
    let num = m.var_jz();
    let den = m.jx * m.jx + m.jy * m.jy;
    if num < 1e-15 && den < 1e-15 {
        XiSquared::Undetermined
    } else if num > 0.0 && den < 1e-12 * num {
        XiSquared::Divergent
    } else {
        XiSquared::Value(num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{binomial_sector_state, fock_mixture_state, prepared_clock_state, NumberDistribution};

    #[test]
    fn binomial_two_atoms() {
        let m = moments(&AtomState::pure(binomial_sector_state(2)).unwrap());
        assert!((m.jx - 1.0).abs() < 1e-14);
        assert!(m.jz.abs() < 1e-15);
        assert!((m.coherence - 2.0).abs() < 1e-14);
        assert!(m.var_jx().abs() < 1e-14);
    }

    #[test]
    fn all_atoms_in_a() {
        let m = moments(&fock_mixture_state(7, &[1.0]).unwrap());
        assert_eq!(m.coherence, 0.0);
        assert_eq!(m.jz, 3.5);
        assert_eq!(m.na_var, 0.0);
        assert!((m.var_jx() - 7.0 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn clock_state_hundred_atoms() {
        let d = NumberDistribution::gaussian(100.0, 100.0, 6.0).unwrap();
        let m = moments(&prepared_clock_state(&d).unwrap());
        assert!((m.coherence / 100.0 - 1.0).abs() < 0.01);
        assert!((m.na_var / 50.0 - 1.0).abs() < 0.01);
        assert!(m.jz2 >= m.jz * m.jz);
    }

    #[test]
    fn xi_squared_cases() {
        assert_eq!(
            xi_squared(&fock_mixture_state(4, &[0.2, 0.3, 0.5]).unwrap()),
            XiSquared::Divergent
        );
        assert_eq!(xi_squared(&AtomState::twin_fock(6)), XiSquared::Undetermined);
        match xi_squared(&AtomState::pure(binomial_sector_state(100)).unwrap()) {
            XiSquared::Value(v) => assert!((v - 0.01).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        let s = pairwise_sum(0, xs.len(), &|i| xs[i]);
        assert_eq!(s, xs.iter().sum::<f64>());
    }
}
