use std::f64::consts::PI;
use std::io::Write;

use vpsteady::analysis::{
    check_theorem1, check_theorem2, classify_solution, omega_crit, sweep_omega_c, Holds, OmegaCrit,
    SweepSettings,
};
use vpsteady::compact::{
    integrate_compact, CompactSettings, CompactState, CompactSystem, Direction, LimitPoint, StopReason,
};
use vpsteady::export::{write_orbit, write_profile, FULL_PRECISION};
use vpsteady::physical::{integrate_physical, Classification, Radius, SolveSettings};
use vpsteady::{DistributionModel, Interpolation, Regularity, Table};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn wilson_crit(model: &DistributionModel) -> f64 {
    match omega_crit(model).unwrap().value {
        OmegaCrit::Finite(w) => w,
        other => panic!("{other:?}"),
    }
}

#[test]
fn lane_emden_scaling_for_three_central_values() {
    let model = DistributionModel::polytrope(1.0, 1.0, 0.0).unwrap();
    let settings = SolveSettings::default();
    let k = (4.0 * PI * 2f64.powf(1.5) * PI * PI).sqrt();
    // n = 1 makes the radius independent of ω_c
    for w in [0.5, 1.0, 2.0] {
        let r = integrate_physical(&model, w, &settings).unwrap().radius.finite().unwrap();
        assert!(rel(r, PI / k) < 1e-5);
    }
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    let sweep = sweep_omega_c(&model, &grid, &SweepSettings::default()).unwrap();
    for e in &sweep.entries {
        let p = e.point.unwrap();
        assert_eq!(p.classification, Classification::FiniteRadius);
        assert!(rel(p.radius.finite().unwrap(), PI / k) < 1e-6);
    }
}

#[test]
fn classification_labels() {
    let le = DistributionModel::polytrope(1.0, 1.0, 0.0).unwrap();
    let profile = integrate_physical(&le, 1.0, &SolveSettings::default()).unwrap();
    let class = classify_solution(&le, &profile, None);
    assert_eq!(class.classification, Classification::FiniteRadius);
    assert_eq!(class.forward, LimitPoint::ZeroOneZero);
    assert_eq!(class.backward, LimitPoint::L2);
    assert_eq!(class.mass_converged, None);

    let plummer = DistributionModel::polytrope(5.0, 1.0, 0.0).unwrap();
    let profile = integrate_physical(&plummer, 1.0, &SolveSettings::default()).unwrap();
    let class = classify_solution(&plummer, &profile, None);
    assert_eq!(class.classification, Classification::InfiniteFiniteMass);
    assert_eq!(class.mass_converged, Some(true));
    assert_eq!(class.backward, LimitPoint::L2);
}

#[test]
fn orbit_from_regular_centre_reaches_zero_one_zero() {
    let king = DistributionModel::king(0.0).unwrap();
    let profile = integrate_physical(&king, 0.8, &SolveSettings::default()).unwrap();
    let first = profile.samples[0];
    let d = vpsteady::to_dimensionless(&king, &first).unwrap();
    let initial = vpsteady::compactify(&d).unwrap();
    let sys = CompactSystem::with_index_table(&king, 1e-11, 0.9).unwrap();
    let orbit = integrate_compact(&sys, &initial, &CompactSettings::default()).unwrap();
    assert_eq!(orbit.stop, StopReason::Attracted(LimitPoint::ZeroOneZero));
    for w in orbit.samples.windows(2) {
        assert!(w[1].state.omega < w[0].state.omega);
    }
    let class = classify_solution(&king, &profile, Some(&orbit));
    assert_eq!(class.forward, LimitPoint::ZeroOneZero);

    let back = CompactSettings { direction: Direction::Backward, ..CompactSettings::default() };
    let start = orbit.samples[orbit.samples.len() / 4].state;
    let orbit = integrate_compact(&sys, &start, &back).unwrap();
    assert_eq!(orbit.stop, StopReason::Attracted(LimitPoint::L2));
}

#[test]
fn theorem_examples() {
    let wilson = DistributionModel::wilson(0.0).unwrap();
    let crit = wilson_crit(&wilson);
    assert!((wilson.index(crit).unwrap() - 5.0).abs() < 1e-8);
    assert_eq!(check_theorem2(&wilson, 0.5 * crit).unwrap().holds, Holds::Guaranteed);
    assert_eq!(check_theorem2(&wilson, 2.0 * crit).unwrap().holds, Holds::Inconclusive);
    let p5 = DistributionModel::polytrope(5.0, 1.0, 0.0).unwrap();
    for w in [0.1, 1.0, 10.0] {
        assert_eq!(check_theorem2(&p5, w).unwrap().holds, Holds::Inconclusive);
    }
    assert!(check_theorem2(&wilson, -1.0).is_err());
}

/// Guaranteed verdicts must agree with the solver across a small model set.
#[test]
fn verdicts_agree_with_solver() {
    let models = [
        DistributionModel::polytrope(2.0, 1.0, 0.0).unwrap(),
        DistributionModel::polytrope(3.5, 1.0, 0.5).unwrap(),
        DistributionModel::king(0.0).unwrap(),
        DistributionModel::king(1.0).unwrap(),
        DistributionModel::wilson(0.0).unwrap(),
        DistributionModel::wilson(-0.3).unwrap(),
    ];
    let settings = SolveSettings::default();
    for model in &models {
        for w in [0.05, 0.5, 2.0] {
            let finite = integrate_physical(model, w, &settings).unwrap().classification
                == Classification::FiniteRadius;
            if check_theorem1(model, w).unwrap().holds == Holds::Guaranteed {
                assert!(finite, "{} at {w}", model.label());
            }
            if check_theorem2(model, w).unwrap().holds == Holds::Guaranteed {
                assert!(finite, "{} at {w}", model.label());
            }
        }
    }
}

#[test]
fn unbounded_polytropes_stay_unbounded() {
    let model = DistributionModel::polytrope(6.0, 1.0, 0.0).unwrap();
    let settings = SweepSettings::default();
    let grid: Vec<f64> = (1..=6).map(|i| 0.5 * i as f64).collect();
    let sweep = sweep_omega_c(&model, &grid, &settings).unwrap();
    assert!(sweep.entries.iter().all(|e| e.point.unwrap().radius == Radius::Infinite));
    assert!(sweep.critical_values().is_empty());
}

#[test]
fn tabulated_king_matches_builtin() {
    let king = DistributionModel::king(0.0).unwrap();
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "E,phi").unwrap();
    writeln!(file, "# sampled e^E - 1").unwrap();
    for i in 0..=800 {
        let e = 2.0 * i as f64 / 800.0;
        writeln!(file, "{e},{}", e.exp_m1()).unwrap();
    }
    file.flush().unwrap();
    let table = Table::from_csv_path(file.path(), Interpolation::MonotoneCubic).unwrap();
    let reg = Regularity { k: 1.0, k_prime: 0.0, holder_index: Some(1.0) };
    let tab = DistributionModel::tabulated(table, 0.0, reg).unwrap();
    for w in [0.3, 1.0, 1.9] {
        let a = tab.g(0.5, w).unwrap().value;
        let b = king.g(0.5, w).unwrap().value;
        assert!(rel(a, b) < 1e-6, "{a} vs {b}");
    }
    let r_tab = integrate_physical(&tab, 1.0, &SolveSettings::default()).unwrap();
    let r_king = integrate_physical(&king, 1.0, &SolveSettings::default()).unwrap();
    assert!(rel(r_tab.radius.finite().unwrap(), r_king.radius.finite().unwrap()) < 1e-5);
    assert!(tab.phi(2.5).is_err());
}

#[test]
fn exports_are_deterministic() {
    let model = DistributionModel::wilson(0.0).unwrap();
    let render = || {
        let profile = integrate_physical(&model, 2.0, &SolveSettings::default()).unwrap();
        let mut buf = Vec::new();
        write_profile(&model, &profile, &mut buf, FULL_PRECISION).unwrap();
        let sys = CompactSystem::new(&model);
        let orbit = integrate_compact(&sys, &CompactState::new(0.7, 0.2, 0.6), &CompactSettings::default()).unwrap();
        write_orbit(&orbit, &mut buf, FULL_PRECISION).unwrap();
        buf
    };
    let a = render();
    assert_eq!(a, render());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("r,m,omega,rho,p_rad\n"));
    assert!(text.contains("lambda,U,Q,Omega,Z_log,Phi,S1\n"));
}
