use clock_squeeze::qfi::{classical_fisher_single_port, qfi_diagonal};
use clock_squeeze::qnd::{qnd_update, QndConfig};
use clock_squeeze::ramsey::eq8_sensitivity;
use clock_squeeze::state::{fock_mixture_state, AtomState, SectorState};
use num_complex::Complex64;
use proptest::prelude::*;

fn distribution(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_filter_map("zero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn sector_mixture() -> impl Strategy<Value = AtomState> {
    prop::collection::vec(
        (0usize..30, 0.0f64..1.0, 0.05f64..1.0, prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)),
        1..5,
    )
    .prop_filter_map("empty sector", |parts| {
        let sectors: Vec<_> = parts
            .into_iter()
            .filter_map(|(t, lo_frac, w, amps)| {
                let lo = ((t as f64) * lo_frac) as usize;
                let len = amps.len().min(t - lo + 1);
                let amps = amps[..len].iter().map(|&(r, i)| Complex64::new(r, i)).collect();
                let s = SectorState::new(t, lo, amps).ok()?;
                (s.norm_sqr() > 1e-12).then_some((w, s))
            })
            .collect();
        AtomState::from_sectors(sectors).ok()
    })
}

fn fisher_identity(n: usize, rho: &[f64]) -> f64 {
    let nb: f64 = rho.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
    let n = n as f64;
    2.0 * n * nb + n + nb
}

proptest! {
    #[test]
    fn states_stay_normalized(st in sector_mixture(), p in -2.0f64..2.0, omega in 0.0f64..0.2) {
        prop_assert!((st.total_probability() - 1.0).abs() < 1e-12);
        let post = qnd_update(&st, p, &QndConfig::new(2.0, omega, 1, 0).unwrap()).unwrap();
        prop_assert!((post.total_probability() - 1.0).abs() < 1e-12);
        let w: f64 = post.sectors().iter().map(|s| s.weight).sum();
        prop_assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fisher_of_fock_mixture_has_closed_form(n in 0usize..=20, rho in distribution(10)) {
        let st = fock_mixture_state(n, &rho).unwrap();
        let want = fisher_identity(n, &rho);
        let got = qfi_diagonal(&st).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn squeezing_always_helps(n in 1.0f64..1e6, s2 in 0.0f64..1e6, g in 0.0f64..1.0, dg in 1e-6f64..1.0) {
        prop_assert!(eq8_sensitivity(n, s2, g + dg, 1) < eq8_sensitivity(n, s2, g, 1));
    }

    #[test]
    fn counting_never_beats_quantum_bound(n in 0usize..=10, rho in distribution(6), theta in 0.01f64..3.0) {
        let st = fock_mixture_state(n, &rho).unwrap();
        let f_q = qfi_diagonal(&st).unwrap();
        let f_c = classical_fisher_single_port(&st, theta, 1e-5).unwrap();
        prop_assert!(f_c <= f_q * (1.0 + 1e-6) + 1e-9, "{} > {}", f_c, f_q);
    }

    #[test]
    fn mixing_does_not_raise_fisher(n in 0usize..=15, r1 in distribution(8), r2 in distribution(8), t in 0.0f64..=1.0) {
        let len = r1.len().max(r2.len());
        let pad = |r: &[f64]| { let mut v = r.to_vec(); v.resize(len, 0.0); v };
        let (a, b) = (pad(&r1), pad(&r2));
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let f = |r: &[f64]| qfi_diagonal(&fock_mixture_state(n, r).unwrap()).unwrap();
        prop_assert!(f(&mix) <= t * f(&a) + (1.0 - t) * f(&b) + 1e-9);
    }
}
