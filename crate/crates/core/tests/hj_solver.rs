use ldp_core::hj::{max_slope, solve_hj, solve_hj_constrained, HJGrid, Reflected};
use ldp_core::legendre::Conjugate;
use ldp_core::rate::lax_oleinik;
use ldp_core::{Error, HamiltonianParams, Kernel, QuadraticHamiltonian};

fn hp(json: &str) -> HamiltonianParams {
    HamiltonianParams::new(Kernel::from_json(json).unwrap(), false).unwrap()
}

#[test]
fn comparison_for_ordered_hamiltonians() {
    // H1 <= H2 gives I1 >= I2.
    let grid = HJGrid::new(199, 1.0, 10.0);
    let times = [0.25, 1.0];
    let small = solve_hj(&QuadraticHamiltonian::isotropic(1, 0.5), &grid, &times).unwrap();
    let large = solve_hj(&QuadraticHamiltonian::isotropic(1, 1.0), &grid, &times).unwrap();
    for (a, b) in small.snapshots.iter().zip(&large.snapshots) {
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(x + 1e-12 >= *y);
        }
    }
}

#[test]
fn values_stay_between_zero_and_level() {
    let grid = HJGrid::new(199, 1.0, 10.0);
    let sol = solve_hj(
        &hp(r#"{"family": "compact_uniform", "params": {"rho": 1}}"#),
        &grid,
        &[0.1, 1.0],
    )
    .unwrap();
    for s in &sol.snapshots {
        assert!(s.values.iter().all(|&v| (0.0..=10.0 + 1e-12).contains(&v)));
        assert_eq!(s.values[0], 0.0);
        assert_eq!(*s.values.last().unwrap(), 0.0);
    }
}

#[test]
fn error_against_lax_oleinik_shrinks_under_refinement() {
    let h = hp(r#"{"family": "exp_power", "params": {"alpha": 2}}"#);
    let l = Conjugate::of(h.clone());
    let err = |n: usize| {
        let sol = solve_hj(&h, &HJGrid::new(n, 0.5, 10.0), &[0.5]).unwrap();
        sol.x
            .iter()
            .zip(&sol.snapshots[0].values)
            .map(|(x, v)| (v - lax_oleinik(&l, 10.0, &[*x], 0.5).unwrap()).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(99), err(199));
    assert!(fine < coarse, "{coarse} -> {fine}");
    assert!(fine < 0.1, "{fine}");
}

#[test]
fn reflected_hamiltonian_mirrors_the_solution() {
    let h = hp(
        r#"{"family": "compact_custom", "params": {"radii": [1.0], "values": [0.5], "left_radii": [0.5], "left_values": [1.0]}}"#,
    );
    let grid = HJGrid::new(99, 0.5, 10.0);
    let a = solve_hj(&h, &grid, &[0.5]).unwrap();
    let b = solve_hj(&Reflected(h), &grid, &[0.5]).unwrap();
    let (a, b) = (&a.snapshots[0].values, &b.snapshots[0].values);
    for i in 0..a.len() {
        assert!((a[i] - b[a.len() - 1 - i]).abs() < 1e-9);
    }
}

#[test]
fn critical_kernel_needs_the_constrained_solver() {
    let h = hp(r#"{"family": "exp_linear", "params": {"alpha": 1}}"#);
    let grid = HJGrid::new(99, 1.0, 10.0);
    assert!(matches!(
        solve_hj(&h, &grid, &[1.0]),
        Err(Error::DomainViolation { .. })
    ));
    let sol = solve_hj_constrained(&h, 1.0, &grid, &[0.1, 1.0]).unwrap();
    for s in &sol.snapshots {
        assert!(max_slope(&s.values, grid.h()) <= 1.0 + 2.0 * grid.h());
    }
}
