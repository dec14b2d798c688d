//! Perturbation energies, mass, vorticity and exponential decay fits.
//!
//! The energies are reduced to L², H¹ and L∞ norms of the perturbations
//! plus the first time difference of `(ρ̃, u)`; higher Sobolev norms of a
//! shock-capturing solution are dominated by grid noise.

use thiserror::Error;

use crate::dynamics::State;
use crate::fields::{curl2d, EdgeRule, Norms, ScalarField};
use crate::model::{ModelParams, PhiBc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("fit window [{0}, {1}] is empty or not finite")]
    BadWindow(f64, f64),
    #[error("need at least {need} samples in the fit window, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("non-positive sample {value:e} at t = {t} in the fit window")]
    NonPositive { t: f64, value: f64 },
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// What the perturbations are measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// Series equilibrium sampled on the grid (Dirichlet φ, zero velocity).
    Steady { rho: ScalarField, phi: ScalarField },
    /// Constant density with φ compared to its exact spatial mean
    /// `mean_phi_exact(t, rho0, phi0_mean)` (Neumann φ).
    Constant { rho0: f64, phi0_mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub t: f64,
    pub mass: f64,
    pub rho_pert: Norms,
    pub u: Norms,
    pub phi_pert: Norms,
    /// L² norm of `σ(ρ) − σ(ρ_ref)`; `None` unless γ > 1.
    pub sigma_pert_l2: Option<f64>,
    pub vorticity_l2: f64,
    /// `‖(ρ(t+Δ) − ρ(t), u(t+Δ) − u(t))‖₂ / Δ` over the adjacent step.
    pub dt_first_diff: f64,
    pub phi_mean: f64,
    /// `|mean φ − mean_phi_exact(t)|`; Neumann references only.
    pub phi_mean_err: Option<f64>,
}

impl EnergyRecord {
    /// `‖ρ̃‖²_{H¹} + ‖u‖²_{H¹} + ‖φ̃‖²_{H¹} + ‖∂ₜ(ρ̃,u)‖²`.
    pub fn reduced_energy(&self) -> f64 {
        self.rho_pert.h1.powi(2) + self.u.h1.powi(2) + self.phi_pert.h1.powi(2) + self.dt_first_diff.powi(2)
    }
}

/// `h² Σ ρ`.
pub fn mass(state: &State) -> f64 {
    state.rho.integral()
}

/// All perturbation norms at `state.t`. `dt_first_diff` is left at zero;
/// the driver fills it from adjacent states.
pub fn measure(state: &State, reference: &Reference, params: &ModelParams, bc: PhiBc, floor: f64) -> EnergyRecord {
    let g = state.grid();
    let (rho_ref, phi_ref, mean_exact) = match reference {
        Reference::Steady { rho, phi } => (rho.clone(), phi.clone(), None),
        Reference::Constant { rho0, phi0_mean } => {
            let m = params.mean_phi_exact(state.t, *rho0, *phi0_mean);
            (ScalarField::constant(g, *rho0), ScalarField::constant(g, m), Some(m))
        }
    };
    let rho_t = state.rho.zip_map(&rho_ref, |a, b| a - b);
    let phi_t = state.phi.zip_map(&phi_ref, |a, b| a - b);
    let vel = state.velocity(floor);
    let sigma_pert_l2 = (params.gamma() > 1.0).then(|| {
        let d = state.rho.zip_map(&rho_ref, |a, b| {
            let s = |r: f64| params.sigma_transform(r.max(0.0)).unwrap_or(f64::NAN);
            s(a) - s(b)
        });
        Norms::l2(&d)
    });
    let phi_mean = state.phi.mean();
    EnergyRecord {
        t: state.t,
        mass: mass(state),
        rho_pert: Norms::of_scalar(&rho_t, EdgeRule::Extrapolate),
        u: Norms::of_velocity(&vel),
        phi_pert: Norms::of_scalar(&phi_t, bc),
        sigma_pert_l2,
        vorticity_l2: Norms::l2(&curl2d(&vel)),
        dt_first_diff: 0.0,
        phi_mean,
        phi_mean_err: mean_exact.map(|m| (phi_mean - m).abs()),
    }
}

/// First time difference of `(ρ, u)` between two states.
pub fn time_difference(a: &State, b: &State, floor: f64) -> f64 {
    let dt = b.t - a.t;
    if !(dt > 0.0) {
        return 0.0;
    }
    let (va, vb) = (a.velocity(floor), b.velocity(floor));
    let d = |x: &ScalarField, y: &ScalarField| Norms::l2(&y.zip_map(x, |p, q| p - q)).powi(2);
    (d(&a.rho, &b.rho) + d(&va.u, &vb.u) + d(&va.v, &vb.v)).sqrt() / dt
}

/// Least-squares fit `E ≈ eta_amp · e^{−eta_rate·t}` through `(t, ln E)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub eta_amp: f64,
    pub eta_rate: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Fits the samples with `t` inside the closed `window`.
pub fn fit_decay(t: &[f64], e: &[f64], window: (f64, f64)) -> Result<DecayFit, DiagnosticsError> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(DiagnosticsError::BadWindow(lo, hi));
    }
    let mut xs = vec![];
    let mut ys = vec![];
    for (&ti, &ei) in t.iter().zip(e) {
        if ti < lo || ti > hi {
            continue;
        }
        if !(ei > 0.0) || !ei.is_finite() {
            return Err(DiagnosticsError::NonPositive { t: ti, value: ei });
        }
        xs.push(ti);
        ys.push(ei.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::TooFewSamples {
            need: MIN_FIT_SAMPLES,
            got: xs.len(),
        });
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - icept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit {
        eta_amp: icept.exp(),
        eta_rate: -slope,
        window,
        r_squared,
        samples: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VorticityReport {
    /// `(t, ‖ω‖₂)` per sample.
    pub samples: Vec<(f64, f64)>,
    /// `None` when ω vanishes identically in the window (nothing to fit).
    pub fit: Option<DecayFit>,
}

/// Vorticity history of a trajectory and its fitted decay rate; in the
/// small-velocity regime the rate approaches α.
pub fn vorticity_check(records: &[EnergyRecord], window: (f64, f64)) -> Result<VorticityReport, DiagnosticsError> {
    let samples: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.vorticity_l2)).collect();
    let inside: Vec<&(f64, f64)> = samples.iter().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if inside.iter().all(|(_, w)| *w == 0.0) {
        return Ok(VorticityReport { samples, fit: None });
    }
    let t: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let w: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let fit = fit_decay(&t, &w, window)?;
    Ok(VorticityReport { samples, fit: Some(fit) })
}

/// Default fit window `[0.2·t_end, t_end]`.
pub fn default_window(t_end: f64) -> (f64, f64) {
    (0.2 * t_end, t_end)
}
