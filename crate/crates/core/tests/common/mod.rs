//! Dense two-mode Fock-space oracle: explicit operator matrices on all
//! `|na, nb>` with `na + nb <= nmax`.
#![allow(dead_code)]

use std::collections::HashMap;

use clock_squeeze::state::AtomState;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub struct Dense {
    pub basis: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    pub jx: CMat,
    pub jy: CMat,
    pub jz: CMat,
    pub n: CMat,
    pub na: CMat,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl Dense {
    pub fn new(nmax: usize) -> Self {
        let basis: Vec<(usize, usize)> = (0..=nmax)
            .flat_map(|t| (0..=t).map(move |a| (a, t - a)))
            .collect();
        let index: HashMap<_, _> = basis.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let dim = basis.len();
        let mut ab = CMat::zeros(dim, dim);
        let mut jz = CMat::zeros(dim, dim);
        let mut n = CMat::zeros(dim, dim);
        let mut na = CMat::zeros(dim, dim);
        for (i, &(a, b)) in basis.iter().enumerate() {
            jz[(i, i)] = c((a as f64 - b as f64) / 2.0);
            n[(i, i)] = c((a + b) as f64);
            na[(i, i)] = c(a as f64);
            if b > 0 {
                let j = index[&(a + 1, b - 1)];
                ab[(j, i)] = c((((a + 1) * b) as f64).sqrt());
            }
        }
        let ba = ab.adjoint();
        let jx = (&ab + &ba) * c(0.5);
        let jy = (&ab - &ba) * Complex64::new(0.0, -0.5);
        Self { basis, index, jx, jy, jz, n, na }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn density(&self, state: &AtomState) -> CMat {
        let mut rho = CMat::zeros(self.dim(), self.dim());
        for s in state.sectors() {
            let t = s.state.total_n();
            let mut psi = DVector::<Complex64>::zeros(self.dim());
            for (n, amp) in s.state.iter() {
                psi[self.index[&(n, t - n)]] = amp;
            }
            rho += &psi * psi.adjoint() * c(s.weight);
        }
        rho
    }

    pub fn expect(rho: &CMat, op: &CMat) -> f64 {
        (rho * op).trace().re
    }

    /// `exp(-i theta Jy)` by Hermitian eigendecomposition.
    pub fn rotation(&self, theta: f64) -> CMat {
        let eig = SymmetricEigen::new(self.jy.clone());
        let phases = CMat::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -theta * l)));
        &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
    }

    pub fn index(&self, a: usize, b: usize) -> usize {
        self.index[&(a, b)]
    }
}

/// `F = 2 sum (l_k - l_m)^2 / (l_k + l_m) |<k|G|m>|^2` over eigenpairs of rho.
pub fn eigen_qfi(rho: &CMat, g: &CMat) -> f64 {
    let eig = SymmetricEigen::new(rho.clone());
    let v = &eig.eigenvectors;
    let gk = v.adjoint() * g * v;
    let l = &eig.eigenvalues;
    let mut f = 0.0;
    for k in 0..l.len() {
        for m in 0..l.len() {
            let s = l[k] + l[m];
            if s > 1e-14 {
                f += 2.0 * (l[k] - l[m]).powi(2) / s * gk[(k, m)].norm_sqr();
            }
        }
    }
    f
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
