use proptest::prelude::*;

use ldp_core::hamiltonian::{eval_h, eval_h_ess};
use ldp_core::legendre::{k_inverse, Conjugate, Lagrangian};
use ldp_core::{HamiltonianParams, Kernel};

fn kernel(json: &str) -> Kernel {
    Kernel::from_json(json).unwrap()
}

fn conj(json: &str) -> Conjugate<HamiltonianParams> {
    Conjugate::of(HamiltonianParams::new(kernel(json), false).unwrap())
}

const UNIFORM: &str = r#"{"family": "compact_uniform", "params": {"rho": 1}}"#;
const EXP_LINEAR: &str = r#"{"family": "exp_linear", "params": {"alpha": 1}}"#;
const EXP_POWER: &str = r#"{"family": "exp_power", "params": {"alpha": 2}}"#;
const DEMO: &str = r#"{"family": "asymmetric_1d_demo"}"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fenchel_young(p in -0.9f64..0.9, q in -30.0f64..30.0) {
        for json in [UNIFORM, EXP_LINEAR, EXP_POWER, DEMO] {
            let c = conj(json);
            let l = c.lagrangian(&[q]).unwrap();
            let h = eval_h(&c.hamiltonian, &[p]).unwrap();
            prop_assert!(l + h >= p * q - 1e-9 * (1.0 + (p * q).abs()), "{json}: L={l} H={h}");
            prop_assert!(l >= -1e-12);
        }
    }

    #[test]
    fn symmetric_kernels_give_even_lagrangians(q in 0.01f64..200.0) {
        for json in [UNIFORM, EXP_LINEAR, EXP_POWER] {
            let c = conj(json);
            let a = c.lagrangian(&[q]).unwrap();
            let b = c.lagrangian(&[-q]).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn lagrangian_over_radius_is_monotone(r in 0.5f64..100.0, c in 1.01f64..4.0) {
        // L convex with L(0) = 0, so L(r)/r is non-decreasing in r.
        for json in [UNIFORM, EXP_LINEAR, DEMO] {
            let l = conj(json);
            for s in [1.0, -1.0] {
                let a = l.lagrangian(&[s * r]).unwrap() / r;
                let b = l.lagrangian(&[s * c * r]).unwrap() / (c * r);
                prop_assert!(b >= a - 1e-9 * a.abs().max(1.0), "{json} s={s}: {a} > {b}");
            }
        }
    }

    #[test]
    fn k_inverse_is_monotone(z in 0.5f64..500.0, c in 1.01f64..10.0) {
        let k = kernel(EXP_POWER);
        let a = k_inverse(&k, z).unwrap();
        let b = k_inverse(&k, c * z).unwrap();
        prop_assert!(b > a);
        let k = kernel(r#"{"family": "compact_uniform", "params": {"rho": 2}}"#);
        prop_assert!(k_inverse(&k, c * z).unwrap() > k_inverse(&k, z).unwrap());
    }

    #[test]
    fn smaller_kernel_has_smaller_hamiltonian(p in 10.0f64..40.0) {
        let reduced = HamiltonianParams::new(kernel(
            r#"{"family": "compact_custom", "rho0": 0.5, "params": {"radii": [0.3, 0.45, 1.0], "values": [0.5, 0.25, 0.5]}}"#,
        ), false).unwrap();
        let full = HamiltonianParams::new(kernel(UNIFORM), false).unwrap();
        for s in [1.0, -1.0] {
            prop_assert!(eval_h(&reduced, &[s * p]).unwrap() <= eval_h(&full, &[s * p]).unwrap());
        }
    }

    #[test]
    fn essential_part_is_below_full_at_large_p(p in 5.0f64..40.0) {
        let h = HamiltonianParams::new(kernel(UNIFORM), false).unwrap();
        let full = eval_h(&h, &[p]).unwrap();
        let ess = eval_h_ess(&h, &[p]).unwrap();
        prop_assert!(ess <= full + 1.0);
        prop_assert!(ess >= 0.5 * full);
    }
}

#[test]
fn critical_lagrangian_slope_tends_to_one() {
    // exp_linear{1}: |DL| < 1, so L(q) < |q|, and L(q)/|q| increases to 1.
    let l = conj(EXP_LINEAR);
    let ratios: Vec<f64> = [10.0, 100.0, 1000.0, 1e4]
        .iter()
        .map(|&q| l.lagrangian(&[q]).unwrap() / q)
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    assert!(ratios.iter().all(|&r| r < 1.0));
    assert!(ratios[3] > 0.97, "{ratios:?}");
    for &q in &[10.0, 100.0, 1000.0] {
        let r = l.solve(&[q]).unwrap();
        assert!(r.argmax[0] < 1.0);
    }
}
