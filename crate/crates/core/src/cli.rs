//! The `steady`, `simulate` and `check` commands and their file output.
//!
//! Exit codes: 0 success, 1 check failure, 2 steady-state construction
//! failure (resonance, degenerate mass constraint, unsupported setup),
//! 3 non-positive equilibrium density, 4 blow-up or failed chemical solve
//! during a run, 5 configuration or I/O error.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::check::{run_suite, CheckOptions, CheckResult};
use crate::config::RunConfig;
use crate::diagnostics::{fit_decay, vorticity_check, EnergyRecord, Reference};
use crate::dynamics::{run, RunSpec, RunWarning, State, Stepper, Trajectory};
use crate::fields::{helmholtz_solve, ScalarField};
use crate::model::PhiBc;
use crate::steady::{
    build_steady, constant_steady, mass_series_coefficient, quadrature_mass_series, steady_residual, SteadyError,
    SteadySolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    CheckFailed = 1,
    SteadyFailed = 2,
    Positivity = 3,
    BlowUp = 4,
    Config = 5,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Error carrying the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Failure {
            exit,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure::new(Exit::Config, format!("{}: {e}", path.display()))
    }
}

/// 17 significant digits, enough to round-trip binary64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    RunConfig::parse(&text).map_err(|e| Failure::new(Exit::Config, format!("{}: {e}", path.display())))
}

fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf, Failure> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| Failure::io(path, e))
}

/// Field CSV: one header row with the x coordinates of the cell centres,
/// then `n` rows (y ascending) of `n` values.
pub fn field_csv(f: &ScalarField) -> String {
    let g = f.grid();
    let n = g.n();
    let mut s = String::new();
    let header: Vec<String> = (0..n).map(|i| fmt_f64(g.center(i))).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for j in 0..n {
        let row: Vec<String> = (0..n).map(|i| fmt_f64(f.at(i, j))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub const DIAGNOSTICS_HEADER: &str = "t,mass,rho_l2,rho_h1,rho_linf,u_l2,u_h1,u_linf,phi_l2,phi_h1,phi_linf,sigma_l2,vorticity_l2,dt_diff,phi_mean,phi_mean_err,reduced_energy";

/// One diagnostics row; optional entries are left empty.
pub fn diagnostics_row(r: &EnergyRecord) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    [
        fmt_f64(r.t),
        fmt_f64(r.mass),
        fmt_f64(r.rho_pert.l2),
        fmt_f64(r.rho_pert.h1),
        fmt_f64(r.rho_pert.linf),
        fmt_f64(r.u.l2),
        fmt_f64(r.u.h1),
        fmt_f64(r.u.linf),
        fmt_f64(r.phi_pert.l2),
        fmt_f64(r.phi_pert.h1),
        fmt_f64(r.phi_pert.linf),
        opt(r.sigma_pert_l2),
        fmt_f64(r.vorticity_l2),
        fmt_f64(r.dt_first_diff),
        fmt_f64(r.phi_mean),
        opt(r.phi_mean_err),
        fmt_f64(r.reduced_energy()),
    ]
    .join(",")
}

fn steady_error_exit(e: &SteadyError) -> Failure {
    Failure::new(Exit::SteadyFailed, format!("steady state: {e}"))
}

fn steady_report(cfg: &RunConfig, s: &SteadySolution) -> String {
    let p = &cfg.params;
    let res = steady_residual(s);
    let margin = s.series.resonance_margin();
    let k = mass_series_coefficient(p);
    let oracle = quadrature_mass_series(p, &cfg.series, 512)
        .map(fmt_f64)
        .unwrap_or_else(|e| format!("unavailable ({e})"));
    let analytic = k * crate::steady::mass_series_sum(s.lambda(), &cfg.series);
    let mut r = String::new();
    let _ = writeln!(r, "grid_n = {}", cfg.n);
    let _ = writeln!(r, "m_max = {}", cfg.series.m_max());
    let _ = writeln!(r, "total_mass = {}", fmt_f64(cfg.total_mass));
    let _ = writeln!(r, "lambda = {}", fmt_f64(s.lambda()));
    let _ = writeln!(r, "c_hat = {}", fmt_f64(s.c_hat()));
    let _ = writeln!(r, "d_hat = {}", fmt_f64(s.series.d_hat()));
    let _ = writeln!(r, "mass_coefficient_k = {}", fmt_f64(k));
    let _ = writeln!(r, "k_times_s = {}", fmt_f64(analytic));
    let _ = writeln!(r, "k_oracle_quadrature = {oracle}");
    let _ = writeln!(r, "residual_helmholtz_l2 = {}", fmt_f64(res.helmholtz));
    let _ = writeln!(r, "residual_momentum_l2 = {}", fmt_f64(res.momentum));
    let _ = writeln!(r, "quadrature_mass = {}", fmt_f64(s.rho.integral()));
    let _ = writeln!(r, "min_rho_hat = {}", fmt_f64(s.min_rho));
    let _ = writeln!(r, "resonance_margin = {} (m = {}, n = {})", fmt_f64(margin.distance), margin.m, margin.n);
    let _ = writeln!(r, "tail_estimate = {}", fmt_f64(s.series.tail_estimate()));
    let _ = writeln!(r, "positivity = {}", if s.positivity_warning.is_some() { "FAILED" } else { "ok" });
    r
}

/// `frdvasc steady`: series equilibrium on the configured grid.
pub fn cmd_steady(cfg: &RunConfig, out: Option<&Path>) -> Result<Exit, Failure> {
    if cfg.bc != PhiBc::Dirichlet {
        return Err(steady_error_exit(&SteadyError::WrongBoundary));
    }
    let s = build_steady(&cfg.params, cfg.bc, cfg.total_mass, cfg.grid(), &cfg.series).map_err(|e| steady_error_exit(&e))?;
    let dir = output_dir(cfg, out)?;
    write_file(&dir.join("phi_hat.csv"), &field_csv(&s.phi))?;
    write_file(&dir.join("rho_hat.csv"), &field_csv(&s.rho))?;
    write_file(&dir.join("steady_report.txt"), &steady_report(cfg, &s))?;
    if let Some(w) = s.positivity_warning {
        eprintln!("warning: equilibrium density not positive (min {:e})", w.min_rho);
        return Ok(Exit::Positivity);
    }
    Ok(Exit::Ok)
}

/// Base state, reference and perturbed initial state for a run.
pub fn initial_state(cfg: &RunConfig) -> Result<(State, Reference), Failure> {
    let g = cfg.grid();
    let p = &cfg.params;
    let (base_rho, base_phi) = match cfg.bc {
        PhiBc::Dirichlet => {
            let s = build_steady(p, cfg.bc, cfg.total_mass, g, &cfg.series).map_err(|e| steady_error_exit(&e))?;
            if let Some(w) = s.positivity_warning {
                return Err(Failure::new(
                    Exit::Positivity,
                    format!("equilibrium density not positive (min {:e})", w.min_rho),
                ));
            }
            (s.rho, s.phi)
        }
        PhiBc::Neumann => {
            let (rho0, _, phi0) = constant_steady(p, cfg.total_mass);
            (ScalarField::constant(g, rho0), ScalarField::constant(g, phi0))
        }
    };
    let (d_rho, vel, d_phi) = cfg.perturb.sample(g, cfg.bc);
    let rho = base_rho.zip_map(&d_rho, |a, b| a + b);
    let phi = if p.tau() == 0.0 {
        let rhs = rho.map(|r| p.b() * r);
        helmholtz_solve(&rhs, p.d(), p.a(), 0.0, cfg.bc, &cfg.step.solver)
            .map_err(|e| Failure::new(Exit::BlowUp, format!("initial chemical solve: {e}")))?
    } else {
        let offset = if cfg.bc == PhiBc::Neumann { cfg.perturb.phi_offset } else { 0.0 };
        base_phi.zip_map(&d_phi, |a, b| a + b + offset)
    };
    if rho.min() <= 0.0 {
        return Err(Failure::new(Exit::Positivity, "perturbed initial density is not positive"));
    }
    let state = State::from_velocity(0.0, rho, &vel, phi).map_err(|e| Failure::new(Exit::Config, e.to_string()))?;
    let reference = match cfg.bc {
        PhiBc::Dirichlet => Reference::Steady {
            rho: base_rho,
            phi: base_phi,
        },
        PhiBc::Neumann => Reference::Constant {
            rho0: state.rho.mean(),
            phi0_mean: state.phi.mean(),
        },
    };
    Ok((state, reference))
}

fn fit_report(cfg: &RunConfig, tr: &Trajectory) -> String {
    let mut r = String::new();
    let window = cfg.window();
    let _ = writeln!(r, "# reduced energy = |rho~|_H1^2 + |u|_H1^2 + |phi~|_H1^2 + |d/dt (rho~, u)|^2");
    let _ = writeln!(r, "steps = {}", tr.steps);
    let _ = writeln!(r, "final_t = {}", fmt_f64(tr.final_state.t));
    match fit_decay(&tr.times(), &tr.reduced_energies(), window) {
        Ok(f) => {
            let _ = writeln!(r, "window = [{}, {}]", fmt_f64(f.window.0), fmt_f64(f.window.1));
            let _ = writeln!(r, "samples = {}", f.samples);
            let _ = writeln!(r, "eta_amp = {}", fmt_f64(f.eta_amp));
            let _ = writeln!(r, "eta_rate = {}", fmt_f64(f.eta_rate));
            let _ = writeln!(r, "r_squared = {}", fmt_f64(f.r_squared));
        }
        Err(e) => {
            let _ = writeln!(r, "energy_fit = unavailable ({e})");
        }
    }
    match vorticity_check(&tr.records, window) {
        Ok(v) => match v.fit {
            Some(f) => {
                let _ = writeln!(r, "vorticity_rate = {}", fmt_f64(f.eta_rate));
                let _ = writeln!(r, "vorticity_r_squared = {}", fmt_f64(f.r_squared));
            }
            None => {
                let _ = writeln!(r, "vorticity_rate = none (vorticity vanishes)");
            }
        },
        Err(e) => {
            let _ = writeln!(r, "vorticity_rate = unavailable ({e})");
        }
    }
    for w in &tr.warnings {
        match w {
            RunWarning::Vacuum { first_t, steps } => {
                let _ = writeln!(r, "warning = vacuum: density floored in {steps} step(s), first at t = {}", fmt_f64(*first_t));
            }
        }
    }
    if let Some(e) = &tr.error {
        let _ = writeln!(r, "error = {e}");
    }
    r
}

/// `frdvasc simulate`: perturbed run with diagnostics and a decay fit.
/// Partial output is written before a blow-up is reported.
pub fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>) -> Result<Exit, Failure> {
    let (init, reference) = initial_state(cfg)?;
    let dir = output_dir(cfg, out)?;
    let mut stepper = Stepper::new(cfg.grid(), cfg.params, cfg.bc, cfg.step).map_err(|e| Failure::new(Exit::Config, e.to_string()))?;
    let spec = RunSpec {
        t_end: cfg.t_end,
        sample_every: cfg.sample_every,
        snapshot_every: cfg.snapshot_every,
    };
    let tr = run(init, &mut stepper, &reference, &spec).map_err(|e| Failure::new(Exit::Config, e.to_string()))?;

    let mut csv = String::from("# frdvasc diagnostics v1\n");
    csv.push_str(DIAGNOSTICS_HEADER);
    csv.push('\n');
    for r in &tr.records {
        csv.push_str(&diagnostics_row(r));
        csv.push('\n');
    }
    write_file(&dir.join("diagnostics.csv"), &csv)?;
    for (k, s) in tr.snapshots.iter().enumerate() {
        write_file(&dir.join(format!("rho_t{k}.csv")), &field_csv(&s.rho))?;
        write_file(&dir.join(format!("phi_t{k}.csv")), &field_csv(&s.phi))?;
    }
    write_file(&dir.join("decay_fit.txt"), &fit_report(cfg, &tr))?;
    for w in &tr.warnings {
        eprintln!("warning: {w:?}");
    }
    match &tr.error {
        Some(e) => Err(Failure::new(Exit::BlowUp, e.to_string())),
        None => Ok(Exit::Ok),
    }
}

/// `frdvasc check`: prints one line per item.
pub fn cmd_check(opts: &CheckOptions, out: &mut impl Write) -> Exit {
    let results: Vec<CheckResult> = run_suite(opts);
    let mut ok = true;
    for r in &results {
        let _ = writeln!(out, "[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        ok &= r.passed;
    }
    let _ = writeln!(out, "{} of {} checks passed", results.iter().filter(|r| r.passed).count(), results.len());
    if ok {
        Exit::Ok
    } else {
        Exit::CheckFailed
    }
}
