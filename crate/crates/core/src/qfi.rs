//! Quantum Fisher information of Fock-diagonal inputs for rotations generated
//! by `Jx = (a'b + b'a)/2`, and the classical Fisher information of counting
//! mode `a` after the Ramsey rotation `exp(-i theta Jy)`.
//!
//! For Fock-diagonal states the two generators give the same QFI: `Jx` and
//! `Jy` differ by a phase on each Fock state, which leaves the state invariant.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::state::AtomState;

/// Largest total number the classical Fisher information will rotate densely.
pub const N_ROT_MAX: usize = 200;
pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const PROBABILITY_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    pub f_q: f64,
    pub cr_delta_theta: f64,
    pub witness: bool,
    pub f_classical: Option<f64>,
}

/// QFI from `F = 2 sum_{k,l} (p_k - p_l)^2 / (p_k + p_l) |<k|Jx|l>|^2`,
/// with unoccupied neighbours entering at `p = 0`.
pub fn qfi_diagonal(state: &AtomState) -> Result<f64> {
    if !state.is_fock_diagonal() {
        return Err(Error::Precondition(
            "quantum Fisher information needs a Fock-diagonal state".into(),
        ));
    }
    let mut probs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for s in state.sectors() {
        let (n, _) = s
            .state
            .iter()
            .find(|(_, c)| c.norm_sqr() > 0.0)
            .expect("one occupied level");
        *probs.entry((s.state.total_n(), n)).or_default() += s.weight;
    }
    let coupling = |total: usize, n: usize| 0.25 * ((n + 1) * (total - n)) as f64;
    let pair = |p: f64, q: f64| if p + q > 0.0 { (p - q).powi(2) / (p + q) } else { 0.0 };

    let mut f = 0.0;
    for (&(total, n), &p) in &probs {
        // each pair (n, n+1) once: from its lower member, or from the upper
        // member when the lower one is unoccupied
        if n < total {
            let q = probs.get(&(total, n + 1)).copied().unwrap_or(0.0);
            f += pair(p, q) * coupling(total, n);
        }
        if n > 0 && !probs.contains_key(&(total, n - 1)) {
            f += p * coupling(total, n - 1);
        }
    }
    Ok(4.0 * f)
}

/// `1 / sqrt(m (2 N nb + N + nb))`.
pub fn eq5_sensitivity(n: f64, nb_mean: f64, m: u64) -> f64 {
    1.0 / (m as f64 * (2.0 * n * nb_mean + n + nb_mean)).sqrt()
}

pub fn entanglement_witness(state: &AtomState, f_q: f64) -> bool {
    f_q > state.n_mean()
}

/// `exp(-i theta Jy)` on a sector of `total` atoms; real because
/// `-i Jy = -(a'b - b'a)/2`.
pub fn rotation_matrix(total: usize, theta: f64) -> DMatrix<f64> {
    let dim = total + 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..total {
        let g = 0.5 * theta * (((n + 1) * (total - n)) as f64).sqrt();
        // <n+1| a'b |n> enters with a minus sign, its transpose with a plus
        a[(n + 1, n)] = -g;
        a[(n, n + 1)] = g;
    }
    a.exp()
}

/// Distribution of the mode-`a` count after the Ramsey rotation.
pub fn output_distribution(state: &AtomState, theta: f64) -> Result<Vec<f64>> {
    let max_total = state.max_total();
    if max_total > N_ROT_MAX {
        return Err(Error::Size {
            what: "total atom number for dense rotation",
            value: max_total,
            limit: N_ROT_MAX,
        });
    }
    let parts: Vec<Vec<f64>> = state
        .sectors()
        .par_iter()
        .map(|s| {
            let u = rotation_matrix(s.state.total_n(), theta);
            let dim = s.state.total_n() + 1;
            let mut p = vec![0.0; max_total + 1];
            for (row, pr) in p.iter_mut().enumerate().take(dim) {
                let mut re = 0.0;
                let mut im = 0.0;
                for (n, c) in s.state.iter() {
                    re += u[(row, n)] * c.re;
                    im += u[(row, n)] * c.im;
                }
                *pr = s.weight * (re * re + im * im);
            }
            p
        })
        .collect();
    let mut total = vec![0.0; max_total + 1];
    for p in parts {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    Ok(total)
}

/// Classical Fisher information of counting mode `a` at phase `theta`,
/// by central difference with step `epsilon`.
pub fn classical_fisher_single_port(state: &AtomState, theta: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {epsilon}")));
    }
    let plus = output_distribution(state, theta + epsilon)?;
    let minus = output_distribution(state, theta - epsilon)?;
    let center = output_distribution(state, theta)?;
    Ok(center
        .iter()
        .zip(plus.iter().zip(&minus))
        .filter(|(p, _)| **p > PROBABILITY_FLOOR)
        .map(|(p, (a, b))| ((a - b) / (2.0 * epsilon)).powi(2) / p)
        .sum())
}

pub fn fisher_report(state: &AtomState, m: u64, theta: Option<f64>) -> Result<FisherReport> {
    let f_q = qfi_diagonal(state)?;
    let f_classical = theta
        .map(|t| classical_fisher_single_port(state, t, DEFAULT_FD_STEP))
        .transpose()?;
    Ok(FisherReport {
        f_q,
        cr_delta_theta: 1.0 / (m as f64 * f_q).sqrt(),
        witness: entanglement_witness(state, f_q),
        f_classical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{binomial_sector_state, fock_mixture_state};

    #[test]
    fn single_port_input_is_at_sql() {
        let st = fock_mixture_state(9, &[1.0]).unwrap();
        let f = qfi_diagonal(&st).unwrap();
        assert!((f - 9.0).abs() < 1e-12);
        assert!(!entanglement_witness(&st, f));
        assert!((eq5_sensitivity(9.0, 0.0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn twin_fock_value() {
        let f = qfi_diagonal(&AtomState::twin_fock(5)).unwrap();
        assert!((f - 60.0).abs() < 1e-12);
    }

    #[test]
    fn three_atoms_with_mixed_b() {
        let st = fock_mixture_state(3, &[0.25, 0.5, 0.25]).unwrap();
        assert!((qfi_diagonal(&st).unwrap() - 10.0).abs() < 1e-12);
        assert!((eq5_sensitivity(3.0, 1.0, 1) - 10f64.sqrt().recip()).abs() < 1e-15);
    }

    #[test]
    fn coherent_input_rejected() {
        let st = AtomState::pure(binomial_sector_state(4)).unwrap();
        assert!(matches!(qfi_diagonal(&st), Err(Error::Precondition(_))));
    }

    #[test]
    fn vacuum_is_not_entangled() {
        let st = fock_mixture_state(0, &[1.0]).unwrap();
        assert_eq!(qfi_diagonal(&st).unwrap(), 0.0);
        assert!(!entanglement_witness(&st, 0.0));
    }

    #[test]
    fn twin_fock_counting_saturates() {
        let cfi = classical_fisher_single_port(&AtomState::twin_fock(5), 1e-3, DEFAULT_FD_STEP).unwrap();
        assert!((cfi / 60.0 - 1.0).abs() < 0.01, "{cfi}");
    }

    #[test]
    fn mixed_b_counting() {
        let st = fock_mixture_state(4, &[0.5, 0.5]).unwrap();
        let cfi = classical_fisher_single_port(&st, 1e-3, DEFAULT_FD_STEP).unwrap();
        assert!((cfi / 8.5 - 1.0).abs() < 0.02, "{cfi}");
    }

    #[test]
    fn rotation_size_limit() {
        let st = AtomState::twin_fock(101);
        assert!(matches!(
            classical_fisher_single_port(&st, 0.1, 1e-5),
            Err(Error::Size { .. })
        ));
    }
}
