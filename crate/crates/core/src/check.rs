//! Self-check suite behind `frdvasc check`: oracle and invariant tests that
//! run in seconds. The grid size applies to the conservation, fixed-point
//! and steady-identity items; convergence items always use at least 64².

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::diagnostics::fit_decay;
use crate::dynamics::{State, StepConfig, Stepper};
use crate::fields::{curl2d, gradient, helmholtz_solve, EdgeRule, Grid, LinearSolveConfig, Norms, ScalarField, VectorField};
use crate::model::{Coefficients, ModelParams, PhiBc};
use crate::steady::{
    build_steady, check_resonance, compute_lambda, mass_series_coefficient, mass_series_sum, quadrature_mass_series,
    SeriesSpec,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Grid size for the grid-dependent items.
    pub n: usize,
    /// Replaces the mass-series coefficient in the K-oracle item. Used to
    /// confirm that the oracle catches a wrong constant.
    pub k_override: Option<f64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { n: 32, k_override: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn benchmark(tau: f64) -> ModelParams {
    ModelParams::new(Coefficients {
        tau,
        ..Coefficients::default()
    })
    .expect("benchmark coefficients")
}

fn k_oracle(opts: &CheckOptions) -> CheckResult {
    let p = benchmark(0.0);
    let spec = SeriesSpec::default();
    let k = opts.k_override.unwrap_or_else(|| mass_series_coefficient(&p));
    let analytic = k * mass_series_sum(compute_lambda(&p), &spec);
    match quadrature_mass_series(&p, &spec, 512) {
        Ok(q) => {
            let rel = (q - analytic).abs() / analytic.abs();
            result("mass coefficient oracle", rel <= 1e-6, format!("quadrature {q:.12e} vs K*S {analytic:.12e}, rel {rel:.2e}"))
        }
        Err(e) => result("mass coefficient oracle", false, e.to_string()),
    }
}

fn steady_identities(n: usize) -> CheckResult {
    let name = "steady identities";
    let p = benchmark(0.0);
    let s = match build_steady(&p, PhiBc::Dirichlet, 1.0, Grid::new(n).expect("grid"), &SeriesSpec::default()) {
        Ok(s) => s,
        Err(e) => return result(name, false, e.to_string()),
    };
    let mut worst_lin = 0.0f64;
    let mut worst_sym = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let (r, f) = (s.rho.at(i, j), s.phi.at(i, j));
            worst_lin = worst_lin.max((2.0 * p.a0() * r - p.beta() * f - s.c_hat()).abs());
            worst_sym = worst_sym
                .max((f - s.phi.at(n - 1 - i, j)).abs())
                .max((f - s.phi.at(i, n - 1 - j)).abs());
        }
    }
    let edge = [0.0, 0.3, 0.5, 1.0]
        .iter()
        .map(|&t| {
            let e = &s.series;
            e.phi_hat(0.0, t).abs() + e.phi_hat(1.0, t).abs() + e.phi_hat(t, 0.0).abs() + e.phi_hat(t, 1.0).abs()
        })
        .sum::<f64>();
    let mom = crate::steady::steady_residual(&s).momentum;
    let pass = worst_lin <= 1e-13 && worst_sym == 0.0 && edge == 0.0 && mom <= 1e-10 && s.positivity_warning.is_none();
    result(
        name,
        pass,
        format!("linear relation {worst_lin:.1e}, symmetry {worst_sym:.1e}, boundary {edge:.1e}, momentum residual {mom:.1e}"),
    )
}

fn mass_constraint() -> CheckResult {
    let p = benchmark(0.0);
    match build_steady(&p, PhiBc::Dirichlet, 1.0, Grid::new(1024).expect("grid"), &SeriesSpec::default()) {
        Ok(s) => {
            let m = s.rho.integral();
            result("steady mass", (m - 1.0).abs() <= 1e-8, format!("midpoint mass on 1024^2 = {m:.12}"))
        }
        Err(e) => result("steady mass", false, e.to_string()),
    }
}

fn resonance_enumeration() -> CheckResult {
    let spec = SeriesSpec::new(9, 1e-8).expect("spec");
    let mut bad = vec![];
    for k in 0..200usize {
        let brute = (1..=9).step_by(2).any(|m| (1..=9).step_by(2).any(|n| m * m + n * n == k));
        if check_resonance(-(k as f64) * PI * PI, &spec).is_err() != brute {
            bad.push(k);
        }
    }
    result("resonance enumeration", bad.is_empty(), format!("mismatches at {bad:?}"))
}

fn manufactured(n: usize) -> CheckResult {
    let n = n.max(64);
    let cfg = LinearSolveConfig::default();
    let (d, a) = (10.0, 1.0);
    let err = |n: usize, bc: PhiBc| {
        let g = Grid::new(n).expect("grid");
        let exact = match bc {
            PhiBc::Dirichlet => ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin()),
            PhiBc::Neumann => ScalarField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos()),
        };
        let rhs = exact.map(|v| (2.0 * PI * PI * d + a) * v);
        helmholtz_solve(&rhs, d, a, 0.0, bc, &cfg).map(|phi| Norms::l2(&phi.zip_map(&exact, |p, q| p - q)))
    };
    let mut orders = vec![];
    for bc in [PhiBc::Dirichlet, PhiBc::Neumann] {
        match (err(n, bc), err(2 * n, bc)) {
            (Ok(c), Ok(f)) => orders.push((c / f).log2()),
            (Err(e), _) | (_, Err(e)) => return result("manufactured solutions", false, e.to_string()),
        }
    }
    let pass = orders.iter().all(|&o| o >= 1.9);
    result(
        "manufactured solutions",
        pass,
        format!("Helmholtz order {n}->{}: Dirichlet {:.3}, Neumann {:.3}", 2 * n, orders[0], orders[1]),
    )
}

fn smooth_state(g: Grid) -> State {
    let rho = ScalarField::from_fn(g, |x, y| 1.0 + 0.2 * x * y + 0.05 * (PI * x).cos());
    let vel = VectorField::from_fn(g, |x, y| {
        (0.05 * (PI * x).sin() * (PI * y).cos(), 0.05 * (2.0 * PI * x).cos() * (PI * y).sin())
    });
    let phi = ScalarField::from_fn(g, |x, y| 1.0 + (PI * x).sin() * (PI * y).sin());
    State::from_velocity(0.0, rho, &vel, phi).expect("state")
}

fn conservation(n: usize) -> CheckResult {
    let g = Grid::new(n).expect("grid");
    let mut worst = 0.0f64;
    for (tau, bc) in [(1.0, PhiBc::Neumann), (0.0, PhiBc::Dirichlet)] {
        let mut s = smooth_state(g);
        let m0 = s.rho.integral();
        let mut st = match Stepper::new(g, benchmark(tau), bc, StepConfig::default()) {
            Ok(st) => st,
            Err(e) => return result("mass conservation", false, e.to_string()),
        };
        for _ in 0..50 {
            match st.step(&s) {
                Ok((next, _)) => s = next,
                Err(e) => return result("mass conservation", false, e.to_string()),
            }
        }
        worst = worst.max(((s.rho.integral() - m0) / m0).abs());
    }
    result("mass conservation", worst <= 1e-12, format!("relative drift over 50 steps {worst:.2e}"))
}

fn fixed_point(n: usize) -> CheckResult {
    let g = Grid::new(n).expect("grid");
    let mut worst = 0.0f64;
    for tau in [0.0, 1.0] {
        let p = benchmark(tau);
        let (rho0, phi0) = (1.7, p.b() / p.a() * 1.7);
        let s0 = State::new(0.0, ScalarField::constant(g, rho0), VectorField::zeros(g), ScalarField::constant(g, phi0))
            .expect("state");
        let mut st = match Stepper::new(g, p, PhiBc::Neumann, StepConfig::default()) {
            Ok(st) => st,
            Err(e) => return result("constant fixed point", false, e.to_string()),
        };
        let mut s = s0.clone();
        for _ in 0..10 {
            match st.step(&s) {
                Ok((next, _)) => s = next,
                Err(e) => return result("constant fixed point", false, e.to_string()),
            }
        }
        let dev = |a: &ScalarField, b: &ScalarField, scale: f64| {
            a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
        };
        worst = worst
            .max(dev(&s.rho, &s0.rho, rho0))
            .max(dev(&s.phi, &s0.phi, phi0))
            .max(Norms::of_velocity(&s.mom).linf / rho0);
    }
    result("constant fixed point", worst <= 1e-13, format!("largest relative change after 10 steps {worst:.2e}"))
}

fn mean_phi(n: usize) -> CheckResult {
    let g = Grid::new(n).expect("grid");
    let p = benchmark(1.0);
    let mut s = smooth_state(g);
    s.phi = s.phi.map(|v| v + 0.1);
    let rho_bar = s.rho.mean();
    let mut st = match Stepper::new(g, p, PhiBc::Neumann, StepConfig { dt_max: 1e-2, ..StepConfig::default() }) {
        Ok(st) => st,
        Err(e) => return result("mean phi recursion", false, e.to_string()),
    };
    // the spatial mean obeys the scalar backward-Euler recursion exactly
    let mut m = s.phi.mean();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        match st.step(&s) {
            Ok((next, info)) => {
                m = (p.tau() / info.dt * m + p.b() * rho_bar) / (p.tau() / info.dt + p.a());
                s = next;
            }
            Err(e) => return result("mean phi recursion", false, e.to_string()),
        }
        worst = worst.max((s.phi.mean() - m).abs());
    }
    result("mean phi recursion", worst <= 1e-10, format!("max deviation from scalar recursion {worst:.2e}"))
}

fn decay_fit() -> CheckResult {
    let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
    let e: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
    match fit_decay(&t, &e, (0.0, 10.0)) {
        Ok(f) => result(
            "decay fit",
            (f.eta_rate - 2.0).abs() <= 1e-10 && (f.eta_amp - 3.0).abs() <= 1e-9,
            format!("rate {:.12}, amplitude {:.12}", f.eta_rate, f.eta_amp),
        ),
        Err(e) => result("decay fit", false, e.to_string()),
    }
}

fn curl_of_gradient(n: usize) -> CheckResult {
    let g = Grid::new(n).expect("grid");
    let psi = ScalarField::from_fn(g, |x, y| (PI * x).cos() * (2.0 * PI * y).cos() + x * y);
    let w = curl2d(&gradient(&psi, EdgeRule::Neumann));
    let m = w.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    result("curl of gradient", m <= 1e-9, format!("max |curl grad psi| {m:.2e}"))
}

/// Runs every item; independent items run on the rayon pool.
pub fn run_suite(opts: &CheckOptions) -> Vec<CheckResult> {
    let n = opts.n;
    let items: Vec<Box<dyn Fn() -> CheckResult + Send + Sync>> = vec![
        Box::new(move || k_oracle(opts)),
        Box::new(move || steady_identities(n)),
        Box::new(mass_constraint),
        Box::new(resonance_enumeration),
        Box::new(move || manufactured(n)),
        Box::new(move || conservation(n)),
        Box::new(move || fixed_point(n)),
        Box::new(move || mean_phi(n)),
        Box::new(decay_fit),
        Box::new(move || curl_of_gradient(n)),
    ];
    items.par_iter().map(|f| f()).collect()
}
