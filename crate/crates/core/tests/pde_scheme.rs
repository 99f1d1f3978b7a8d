use ldp_core::pde::{
    fit_rate, records_from_table, run_sweep, simulate, simulate_difference, sweep_table, BcMode,
    InitialData, SimConfig,
};
use ldp_core::{Error, Kernel};

fn uniform() -> Kernel {
    Kernel::from_json(r#"{"family": "compact_uniform", "params": {"rho": 1}}"#).unwrap()
}

#[test]
fn constants_are_stationary_on_the_whole_line() {
    let cfg = SimConfig::new(uniform(), 6.0, 1.0).with_mode(BcMode::WholeLine);
    let u = simulate(&cfg).unwrap();
    for s in &u.snapshots {
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}

#[test]
fn dirichlet_and_barrier_fields_stay_in_range() {
    for mode in [BcMode::DirichletZeroOutside, BcMode::Barrier] {
        let u = simulate(&SimConfig::new(uniform(), 4.0, 1.0).with_mode(mode)).unwrap();
        for s in &u.snapshots {
            assert!(s.values.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        }
    }
}

#[test]
fn whole_line_scheme_conserves_mass() {
    let mut cfg = SimConfig::new(uniform(), 6.0, 1.0).with_mode(BcMode::WholeLine);
    cfg.u0 = InitialData::Tent {
        center: 0.0,
        half_width: 1.0,
        height: 1.0,
    };
    let u = simulate(&cfg).unwrap();
    let h = cfg.h();
    let mass = |v: &[f64]| v.iter().sum::<f64>() * h;
    let m0: f64 = u.x.iter().map(|&x| cfg.u0.eval(x)).sum::<f64>() * h;
    let m1 = mass(&u.snapshots.last().unwrap().values);
    assert!((m1 - m0).abs() < 1e-9 * m0, "{m0} vs {m1}");
}

#[test]
fn difference_march_matches_direct_subtraction() {
    let cfg = SimConfig::new(uniform(), 3.0, 0.5);
    let ur = simulate(&cfg).unwrap();
    let d = simulate_difference(&cfg).unwrap();
    let s = d.snapshots.last().unwrap();
    let r = ur.snapshots.last().unwrap();
    for (dv, rv) in s.values.iter().zip(&r.values) {
        assert!((dv - (1.0 - rv)).abs() < 1e-12);
    }
}

#[test]
fn log_scale_grid_convergence() {
    let minus_log = |n: usize| {
        let mut base = SimConfig::new(uniform(), 8.0, 1.0);
        base.n_per_unit = n;
        let r = run_sweep(&base, &[8.0], 0.0, 1.0).unwrap();
        -r[0].sup_diff.ln()
    };
    let (a, b) = (minus_log(20), minus_log(40));
    assert!((a - b).abs() < 0.05 * b, "{a} vs {b}");
}

#[test]
fn compound_poisson_exit_probability() {
    // Uniform jumps of unit rate: -ln P(|X_1| >= R) from the Irwin-Hall
    // convolution series, computed in arbitrary precision.
    let base = SimConfig::new(uniform(), 8.0, 1.0);
    let recs = run_sweep(&base, &[8.0, 12.0], 0.0, 1.0).unwrap();
    for (rec, exact) in recs.iter().zip([29.7257, 49.1765]) {
        let got = -rec.sup_diff.ln();
        assert!(
            (got - exact).abs() < 0.01 * exact,
            "R={}: {got} vs {exact}",
            rec.r
        );
    }
}

#[test]
fn sweep_table_round_trip_into_fit() {
    let mut base = SimConfig::new(uniform(), 4.0, 0.5);
    base.n_per_unit = 10;
    let recs = run_sweep(&base, &[4.0, 5.0, 6.0], 0.0, 0.5).unwrap();
    let table = sweep_table(&recs);
    let mut buf = Vec::new();
    table.write(&mut buf).unwrap();
    let back = records_from_table(&ldp_core::table::Table::read(buf.as_slice()).unwrap()).unwrap();
    assert_eq!(back.len(), 3);
    let a = fit_rate(&recs).unwrap();
    let b = fit_rate(&back).unwrap();
    assert!((a.slope - b.slope).abs() < 1e-9 * a.slope.abs().max(1.0));
    assert!(matches!(
        fit_rate(&recs[..2]),
        Err(Error::InsufficientData { .. })
    ));
}
