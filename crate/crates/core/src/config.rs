//! Run configuration: plain-text `key = value` lines with dotted keys and
//! `#` comments. Every key is optional; unknown or repeated keys are errors.
//!
//! ```text
//! params.A0 = 1        params.gamma = 2     params.alpha = 1
//! params.beta = 0.5    params.tau = 0       params.d = 10
//! params.a = 1         params.b = 1
//! bc.phi = dirichlet | neumann
//! grid.n = 64
//! series.m_max = 201   series.tail_tol = 1e-8
//! step.cfl = 0.4       step.rho_floor = 1e-12   step.dt_max = inf
//! step.limiter = minmod | none      step.scheme = ssp_rk2 | euler
//! solver.tol = 1e-10   solver.max_iter = 20000  solver.preconditioner = spectral | none
//! run.t_end = 10       run.sample_every = 0.1   run.snapshot_every = (unset)
//! run.total_mass = 1
//! perturb.rho_amp = 0  perturb.u_amp = 0   perturb.phi_amp = 0
//! perturb.phi_offset = 0   perturb.modes = 3    perturb.seed = 0
//! fit.window_start = 0.2·t_end   fit.window_end = t_end
//! output.dir = (unset)
//! ```

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{Limiter, StepConfig, TimeScheme};
use crate::fields::{Grid, LinearSolveConfig, Preconditioner, ScalarField, VectorField};
use crate::model::{Coefficients, ModelParams, PhiBc};
use crate::steady::SeriesSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given more than once")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Random smooth perturbation of the base state. Amplitudes are L∞ norms
/// (for the velocity, of `|u|`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    pub rho_amp: f64,
    pub u_amp: f64,
    /// Ignored when τ = 0 (φ is slaved to ρ).
    pub phi_amp: f64,
    /// Constant added to φ (Neumann only; τ > 0).
    pub phi_offset: f64,
    /// Modes `1..=modes` in each direction.
    pub modes: usize,
    pub seed: u64,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        PerturbSpec {
            rho_amp: 0.0,
            u_amp: 0.0,
            phi_amp: 0.0,
            phi_offset: 0.0,
            modes: 3,
            seed: 0,
        }
    }
}

/// Random cosine/sine series normalized to L∞ = `amp`. `basis(k, x)` is the
/// 1D profile of mode `k`.
fn random_series(
    g: Grid,
    rng: &mut ChaCha8Rng,
    modes: usize,
    amp: f64,
    bx: fn(usize, f64) -> f64,
    by: fn(usize, f64) -> f64,
) -> ScalarField {
    let mut coef = vec![];
    for kx in 1..=modes {
        for ky in 1..=modes {
            coef.push((kx, ky, rng.gen_range(-1.0..1.0)));
        }
    }
    if amp == 0.0 {
        return ScalarField::zeros(g);
    }
    let mut f = ScalarField::from_fn(g, |x, y| coef.iter().map(|&(kx, ky, c)| c * bx(kx, x) * by(ky, y)).sum());
    let m = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        f.scale(amp / m);
    }
    f
}

fn cosk(k: usize, x: f64) -> f64 {
    (k as f64 * PI * x).cos()
}

fn sink(k: usize, x: f64) -> f64 {
    (k as f64 * PI * x).sin()
}

impl PerturbSpec {
    /// Mean-free density perturbation, a wall-tangent velocity and a φ
    /// perturbation compatible with `bc`.
    pub fn sample(&self, g: Grid, bc: PhiBc) -> (ScalarField, VectorField, ScalarField) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = self.modes;
        let rho = random_series(g, &mut rng, m, self.rho_amp, cosk, cosk);
        let mut u = random_series(g, &mut rng, m, 1.0, sink, cosk);
        let mut v = random_series(g, &mut rng, m, 1.0, cosk, sink);
        let speed = u
            .values()
            .iter()
            .zip(v.values())
            .fold(0.0f64, |s, (a, b)| s.max(a.hypot(*b)));
        let su = if speed > 0.0 { self.u_amp / speed } else { 0.0 };
        u.scale(su);
        v.scale(su);
        let phi = match bc {
            PhiBc::Neumann => random_series(g, &mut rng, m, self.phi_amp, cosk, cosk),
            PhiBc::Dirichlet => random_series(g, &mut rng, m, self.phi_amp, sink, sink),
        };
        (rho, VectorField { u, v }, phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub bc: PhiBc,
    pub n: usize,
    pub series: SeriesSpec,
    pub step: StepConfig,
    pub t_end: f64,
    pub sample_every: f64,
    pub snapshot_every: Option<f64>,
    pub total_mass: f64,
    pub perturb: PerturbSpec,
    pub fit_window: Option<(f64, f64)>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ModelParams::new(Coefficients::default()).expect("default coefficients"),
            bc: PhiBc::Dirichlet,
            n: 64,
            series: SeriesSpec::default(),
            step: StepConfig::default(),
            t_end: 10.0,
            sample_every: 0.1,
            snapshot_every: None,
            total_mass: 1.0,
            perturb: PerturbSpec::default(),
            fit_window: None,
            out_dir: None,
        }
    }
}

const KEYS: &[&str] = &[
    "params.A0",
    "params.gamma",
    "params.alpha",
    "params.beta",
    "params.tau",
    "params.d",
    "params.a",
    "params.b",
    "bc.phi",
    "grid.n",
    "series.m_max",
    "series.tail_tol",
    "step.cfl",
    "step.rho_floor",
    "step.dt_max",
    "step.limiter",
    "step.scheme",
    "solver.tol",
    "solver.max_iter",
    "solver.preconditioner",
    "run.t_end",
    "run.sample_every",
    "run.snapshot_every",
    "run.total_mass",
    "perturb.rho_amp",
    "perturb.u_amp",
    "perturb.phi_amp",
    "perturb.phi_offset",
    "perturb.modes",
    "perturb.seed",
    "fit.window_start",
    "fit.window_end",
    "output.dir",
];

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn bad(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            line: self.line,
            key: self.key.to_string(),
            value: self.value.to_string(),
            reason: reason.into(),
        }
    }

    fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.value.parse::<T>().map_err(|e| self.bad(e.to_string()))
    }

    fn float(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.parse()?;
        if v.is_nan() {
            return Err(self.bad("NaN is not allowed"));
        }
        Ok(v)
    }

    fn positive(&self) -> Result<f64, ConfigError> {
        let v = self.float()?;
        if !(v > 0.0) {
            return Err(self.bad("must be > 0"));
        }
        Ok(v)
    }

    fn nonneg(&self) -> Result<f64, ConfigError> {
        let v = self.float()?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(self.bad("must be finite and >= 0"));
        }
        Ok(v)
    }

    fn choice<T: Copy>(&self, options: &[(&str, T)]) -> Result<T, ConfigError> {
        let v = self.value.to_ascii_lowercase();
        options.iter().find(|(k, _)| *k == v).map(|(_, t)| *t).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
            self.bad(format!("expected one of {}", names.join(", ")))
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = vec![];
        let mut seen = HashSet::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if !seen.insert(key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
            entries.push(Entry { line, key, value });
        }

        let mut cfg = RunConfig::default();
        let mut coef = cfg.params.coefficients();
        let (mut m_max, mut tail_tol) = (cfg.series.m_max(), cfg.series.tail_tol());
        let mut solver = LinearSolveConfig::default();
        let (mut w_start, mut w_end) = (None, None);
        for e in &entries {
            match e.key {
                "params.A0" => coef.a0 = e.float()?,
                "params.gamma" => coef.gamma = e.float()?,
                "params.alpha" => coef.alpha = e.float()?,
                "params.beta" => coef.beta = e.float()?,
                "params.tau" => coef.tau = e.float()?,
                "params.d" => coef.d = e.float()?,
                "params.a" => coef.a = e.float()?,
                "params.b" => coef.b = e.float()?,
                "bc.phi" => cfg.bc = e.choice(&[("dirichlet", PhiBc::Dirichlet), ("neumann", PhiBc::Neumann)])?,
                "grid.n" => cfg.n = e.parse()?,
                "series.m_max" => m_max = e.parse()?,
                "series.tail_tol" => tail_tol = e.float()?,
                "step.cfl" => cfg.step.cfl = e.float()?,
                "step.rho_floor" => cfg.step.rho_floor = e.float()?,
                "step.dt_max" => cfg.step.dt_max = e.positive()?,
                "step.limiter" => cfg.step.limiter = e.choice(&[("minmod", Limiter::Minmod), ("none", Limiter::None)])?,
                "step.scheme" => {
                    cfg.step.scheme = e.choice(&[("ssp_rk2", TimeScheme::SspRk2), ("euler", TimeScheme::ForwardEuler)])?
                }
                "solver.tol" => solver.tol = e.float()?,
                "solver.max_iter" => solver.max_iter = e.parse()?,
                "solver.preconditioner" => {
                    solver.preconditioner =
                        e.choice(&[("spectral", Preconditioner::Spectral), ("none", Preconditioner::None)])?
                }
                "run.t_end" => cfg.t_end = e.positive()?,
                "run.sample_every" => cfg.sample_every = e.positive()?,
                "run.snapshot_every" => cfg.snapshot_every = Some(e.positive()?),
                "run.total_mass" => cfg.total_mass = e.nonneg()?,
                "perturb.rho_amp" => cfg.perturb.rho_amp = e.nonneg()?,
                "perturb.u_amp" => cfg.perturb.u_amp = e.nonneg()?,
                "perturb.phi_amp" => cfg.perturb.phi_amp = e.nonneg()?,
                "perturb.phi_offset" => cfg.perturb.phi_offset = e.float()?,
                "perturb.modes" => cfg.perturb.modes = e.parse()?,
                "perturb.seed" => cfg.perturb.seed = e.parse()?,
                "fit.window_start" => w_start = Some(e.nonneg()?),
                "fit.window_end" => w_end = Some(e.positive()?),
                "output.dir" => cfg.out_dir = Some(PathBuf::from(e.value)),
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        cfg.params = ModelParams::new(coef).map_err(|e| invalid(&e))?;
        cfg.series = SeriesSpec::new(m_max, tail_tol).map_err(|e| invalid(&e))?;
        cfg.step.solver = solver;
        cfg.step.validate().map_err(|e| invalid(&e))?;
        Grid::new(cfg.n).map_err(|e| invalid(&e))?;
        if cfg.perturb.modes == 0 {
            return Err(ConfigError::Invalid("perturb.modes must be >= 1".into()));
        }
        if w_start.is_some() || w_end.is_some() {
            let (lo, hi) = (w_start.unwrap_or(0.2 * cfg.t_end), w_end.unwrap_or(cfg.t_end));
            if lo > hi {
                return Err(ConfigError::Invalid(format!("fit window [{lo}, {hi}] is empty")));
            }
            cfg.fit_window = Some((lo, hi));
        }
        Ok(cfg)
    }

    /// The configured fit window, or `[0.2·t_end, t_end]`.
    pub fn window(&self) -> (f64, f64) {
        self.fit_window.unwrap_or((0.2 * self.t_end, self.t_end))
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n).expect("validated at parse time")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse("# only a comment\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn parses_all_sections() {
        let text = "
            params.A0 = 2   # pressure amplitude
            params.beta = -0.25
            params.tau = 1
            bc.phi = Neumann
            grid.n = 32
            series.m_max = 51
            step.cfl = 0.3
            step.dt_max = 1e-3
            step.limiter = none
            solver.preconditioner = none
            run.t_end = 5
            run.snapshot_every = 1
            perturb.rho_amp = 1e-3
            perturb.seed = 7
            fit.window_start = 1
            output.dir = out/run1
        ";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.params.a0(), 2.0);
        assert_eq!(c.params.beta(), -0.25);
        assert_eq!(c.bc, PhiBc::Neumann);
        assert_eq!(c.n, 32);
        assert_eq!(c.series.m_max(), 51);
        assert_eq!(c.step.dt_max, 1e-3);
        assert_eq!(c.step.limiter, Limiter::None);
        assert_eq!(c.step.solver.preconditioner, Preconditioner::None);
        assert_eq!(c.snapshot_every, Some(1.0));
        assert_eq!(c.perturb.seed, 7);
        assert_eq!(c.window(), (1.0, 5.0));
        assert_eq!(c.out_dir, Some(PathBuf::from("out/run1")));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("params.zeta = 1"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(RunConfig::parse("grid.n = 8\ngrid.n = 9"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(RunConfig::parse("grid.n"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(RunConfig::parse("grid.n = eight"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("bc.phi = robin"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("params.d = -1"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("grid.n = 3"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("series.m_max = 10"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("step.cfl = 2"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("run.t_end = 0"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("params.b = nan"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn perturbation_is_seeded_and_scaled() {
        let g = Grid::new(16).unwrap();
        let spec = PerturbSpec {
            rho_amp: 1e-3,
            u_amp: 2e-3,
            phi_amp: 5e-4,
            seed: 11,
            ..PerturbSpec::default()
        };
        let (r1, w1, p1) = spec.sample(g, PhiBc::Dirichlet);
        let (r2, w2, p2) = spec.sample(g, PhiBc::Dirichlet);
        assert_eq!((r1.clone(), w1.clone(), p1.clone()), (r2, w2, p2));
        let linf = |f: &ScalarField| f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((linf(&r1) - 1e-3).abs() < 1e-15);
        assert!((linf(&p1) - 5e-4).abs() < 1e-15);
        let speed = w1.u.values().iter().zip(w1.v.values()).fold(0.0f64, |s, (a, b)| s.max(a.hypot(*b)));
        assert!((speed - 2e-3).abs() < 1e-15);
        // cosine modes k >= 1 have zero mean on the cell-centred grid
        assert!(r1.mean().abs() < 1e-17);
        let other = PerturbSpec { seed: 12, ..spec }.sample(g, PhiBc::Dirichlet).0;
        assert_ne!(other, r1);
    }

    #[test]
    fn zero_amplitudes_give_zero_fields() {
        let g = Grid::new(8).unwrap();
        let (r, w, p) = PerturbSpec::default().sample(g, PhiBc::Neumann);
        assert!(r.values().iter().chain(w.u.values()).chain(w.v.values()).chain(p.values()).all(|&v| v == 0.0));
    }
}
