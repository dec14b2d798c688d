use frdvasc::diagnostics::{mass, Reference};
use frdvasc::dynamics::{run, RunSpec, State, StepConfig, Stepper};
use frdvasc::fields::{Grid, ScalarField, VectorField};
use frdvasc::steady::{build_steady, SeriesSpec};
use frdvasc::{Coefficients, ModelParams, PhiBc};

fn params(tau: f64) -> ModelParams {
    ModelParams::new(Coefficients {
        tau,
        ..Coefficients::default()
    })
    .unwrap()
}

fn bump(g: Grid, amp: f64) -> ScalarField {
    ScalarField::from_fn(g, |x, y| amp * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos())
}

#[test]
fn sampled_steady_state_barely_moves() {
    let g = Grid::new(32).unwrap();
    let p = params(1.0);
    let s = build_steady(&p, PhiBc::Dirichlet, 1.0, g, &SeriesSpec::new(201, 1e-8).unwrap()).unwrap();
    let init = State::from_velocity(0.0, s.rho.clone(), &VectorField::zeros(g), s.phi.clone()).unwrap();
    let mut st = Stepper::new(g, p, PhiBc::Dirichlet, StepConfig::default()).unwrap();
    let reference = Reference::Steady {
        rho: s.rho.clone(),
        phi: s.phi.clone(),
    };
    let spec = RunSpec {
        t_end: 0.5,
        sample_every: 0.1,
        snapshot_every: None,
    };
    let tr = run(init, &mut st, &reference, &spec).unwrap();
    assert!(tr.error.is_none());
    let last = tr.records.last().unwrap();
    // discretisation-level drift only
    assert!(last.rho_pert.linf < 5e-3, "{}", last.rho_pert.linf);
    assert!(last.u.linf < 5e-3, "{}", last.u.linf);
}

#[test]
fn perturbation_decays_and_mass_is_kept() {
    let g = Grid::new(32).unwrap();
    let p = params(1.0);
    let rho0 = 1.0;
    let phi0 = p.b() / p.a() * rho0;
    let rho = ScalarField::constant(g, rho0).zip_map(&bump(g, 0.01), |a, b| a + b);
    let init = State::from_velocity(0.0, rho, &VectorField::zeros(g), ScalarField::constant(g, phi0)).unwrap();
    let m0 = mass(&init);
    let mut st = Stepper::new(g, p, PhiBc::Neumann, StepConfig::default()).unwrap();
    let reference = Reference::Constant {
        rho0,
        phi0_mean: phi0,
    };
    let spec = RunSpec {
        t_end: 6.0,
        sample_every: 0.2,
        snapshot_every: None,
    };
    let tr = run(init, &mut st, &reference, &spec).unwrap();
    assert!(tr.error.is_none());
    assert!(tr.warnings.is_empty());
    for r in &tr.records {
        assert!((r.mass - m0).abs() <= 1e-13 * m0);
    }
    let e = tr.reduced_energies();
    assert!(e[e.len() - 1] < 1e-2 * e[0], "{} -> {}", e[0], e[e.len() - 1]);
    assert!(tr.final_state.rho.min() > 0.0);
}

#[test]
fn run_lands_on_sample_times() {
    let g = Grid::new(8).unwrap();
    let p = params(0.0);
    let rho = ScalarField::constant(g, 1.0).zip_map(&bump(g, 0.05), |a, b| a + b);
    let init = State::from_velocity(0.0, rho, &VectorField::zeros(g), ScalarField::constant(g, 1.0)).unwrap();
    let mut st = Stepper::new(g, p, PhiBc::Neumann, StepConfig::default()).unwrap();
    let spec = RunSpec {
        t_end: 0.3,
        sample_every: 0.07,
        snapshot_every: Some(0.15),
    };
    let reference = Reference::Constant {
        rho0: 1.0,
        phi0_mean: 1.0,
    };
    let tr = run(init, &mut st, &reference, &spec).unwrap();
    let t = tr.times();
    let want = [0.0, 0.07, 0.14, 0.21, 0.28, 0.3];
    assert_eq!(t.len(), want.len(), "{t:?}");
    for (a, b) in t.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{t:?}");
    }
    assert_eq!(tr.snapshots.len(), 3);
    assert!((tr.final_state.t - 0.3).abs() < 1e-12);
}
