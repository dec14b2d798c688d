//! Physical parameters, the γ-law pressure and the sound-speed transforms.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("negative density {0}")]
    NegativeDensity(f64),
    #[error("sound-speed transform is undefined for gamma = {gamma}")]
    UnsupportedTransform { gamma: f64 },
}

/// Raw, unvalidated coefficients of the model. Turn into [`ModelParams`] with
/// [`ModelParams::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// Pressure amplitude in `P(ρ) = A0 ρ^γ`.
    pub a0: f64,
    pub gamma: f64,
    /// Damping rate.
    pub alpha: f64,
    /// Chemotactic sensitivity; positive attracts, negative repels.
    pub beta: f64,
    /// Relaxation time of the chemical; zero makes its equation elliptic.
    pub tau: f64,
    /// Chemical diffusion.
    pub d: f64,
    /// Chemical degradation.
    pub a: f64,
    /// Chemical secretion.
    pub b: f64,
}

impl Default for Coefficients {
    /// The benchmark set used throughout the test-suite.
    fn default() -> Self {
        Coefficients {
            a0: 1.0,
            gamma: 2.0,
            alpha: 1.0,
            beta: 0.5,
            tau: 0.0,
            d: 10.0,
            a: 1.0,
            b: 1.0,
        }
    }
}

/// Validated model parameters. Every constructor enforces
/// `A0, α, d, a, b > 0`, `γ ≥ 1` and `τ ≥ 0`, so the per-call operations
/// never re-check them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    c: Coefficients,
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

impl ModelParams {
    pub fn new(c: Coefficients) -> Result<Self, ModelError> {
        positive("A0", c.a0)?;
        positive("alpha", c.alpha)?;
        positive("d", c.d)?;
        positive("a", c.a)?;
        positive("b", c.b)?;
        if !(c.gamma.is_finite() && c.gamma >= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "gamma",
                value: c.gamma,
                reason: "must be finite and >= 1",
            });
        }
        if !(c.tau.is_finite() && c.tau >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "tau",
                value: c.tau,
                reason: "must be finite and >= 0",
            });
        }
        if !c.beta.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "beta",
                value: c.beta,
                reason: "must be finite",
            });
        }
        Ok(ModelParams { c })
    }

    pub fn coefficients(&self) -> Coefficients {
        self.c
    }

    pub fn a0(&self) -> f64 {
        self.c.a0
    }
    pub fn gamma(&self) -> f64 {
        self.c.gamma
    }
    pub fn alpha(&self) -> f64 {
        self.c.alpha
    }
    pub fn beta(&self) -> f64 {
        self.c.beta
    }
    pub fn tau(&self) -> f64 {
        self.c.tau
    }
    pub fn d(&self) -> f64 {
        self.c.d
    }
    pub fn a(&self) -> f64 {
        self.c.a
    }
    pub fn b(&self) -> f64 {
        self.c.b
    }

    /// `P(ρ) = A0 ρ^γ`.
    pub fn pressure(&self, rho: f64) -> Result<f64, ModelError> {
        check_density(rho)?;
        Ok(self.pressure_unchecked(rho))
    }

    #[inline]
    pub(crate) fn pressure_unchecked(&self, rho: f64) -> f64 {
        if self.c.gamma == 2.0 {
            self.c.a0 * rho * rho
        } else if self.c.gamma == 1.0 {
            self.c.a0 * rho
        } else {
            self.c.a0 * rho.powf(self.c.gamma)
        }
    }

    /// Characteristic speed `√P'(ρ) = √(γ A0 ρ^{γ-1})`.
    pub fn sound_speed(&self, rho: f64) -> Result<f64, ModelError> {
        check_density(rho)?;
        Ok(self.sound_speed_unchecked(rho))
    }

    #[inline]
    pub(crate) fn sound_speed_unchecked(&self, rho: f64) -> f64 {
        let g = self.c.gamma;
        if g == 1.0 {
            self.c.a0.sqrt()
        } else if g == 2.0 {
            (2.0 * self.c.a0 * rho).sqrt()
        } else {
            (g * self.c.a0 * rho.powf(g - 1.0)).sqrt()
        }
    }

    /// Prefactor and exponent of `σ = 𝔄 ρ^κ`.
    fn transform_constants(&self) -> Result<(f64, f64), ModelError> {
        let g = self.c.gamma;
        if g == 1.0 {
            return Err(ModelError::UnsupportedTransform { gamma: g });
        }
        Ok((2.0 * (g * self.c.a0).sqrt() / (g - 1.0), 0.5 * (g - 1.0)))
    }

    /// Sound-speed transform of the density: `2√(2A0ρ)` for γ = 2 and
    /// `𝔄ρ^κ` with `𝔄 = 2√(γA0)/(γ-1)`, `κ = (γ-1)/2` otherwise.
    pub fn sigma_transform(&self, rho: f64) -> Result<f64, ModelError> {
        check_density(rho)?;
        if self.c.gamma == 2.0 {
            return Ok(2.0 * (2.0 * self.c.a0 * rho).sqrt());
        }
        let (amp, kappa) = self.transform_constants()?;
        Ok(amp * rho.powf(kappa))
    }

    /// General-γ branch of the transform, exposed so the γ = 2 shortcut can
    /// be checked against it.
    pub fn sigma_transform_general(&self, rho: f64) -> Result<f64, ModelError> {
        check_density(rho)?;
        let (amp, kappa) = self.transform_constants()?;
        Ok(amp * rho.powf(kappa))
    }

    pub fn sigma_inverse(&self, sigma: f64) -> Result<f64, ModelError> {
        if sigma < 0.0 || sigma.is_nan() {
            return Err(ModelError::NegativeDensity(sigma));
        }
        if self.c.gamma == 2.0 {
            return Ok(sigma * sigma / (8.0 * self.c.a0));
        }
        let (amp, kappa) = self.transform_constants()?;
        Ok((sigma / amp).powf(1.0 / kappa))
    }

    /// `b P'(ρ̄) − a α ρ̄` and whether it is strictly positive.
    pub fn pressure_condition(&self, rho_bar: f64) -> PressureMargin {
        let c = &self.c;
        let dp = c.gamma * c.a0 * rho_bar.powf(c.gamma - 1.0);
        let margin = c.b * dp - c.a * c.alpha * rho_bar;
        PressureMargin {
            margin,
            holds: margin > 0.0,
        }
    }

    /// Spatial mean of φ at time `t` for the no-flux chemical problem, given
    /// the (conserved) mean density and the initial mean concentration.
    /// With τ = 0 the mean is slaved to the density: `(b/a) ρ̄`.
    pub fn mean_phi_exact(&self, t: f64, rho0_mean: f64, phi0_mean: f64) -> f64 {
        let c = &self.c;
        let eq = c.b / c.a * rho0_mean;
        if c.tau == 0.0 {
            return eq;
        }
        eq + (phi0_mean - eq) * (-(c.a / c.tau) * t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureMargin {
    pub margin: f64,
    pub holds: bool,
}

fn check_density(rho: f64) -> Result<(), ModelError> {
    if rho >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::NegativeDensity(rho))
    }
}

/// Boundary condition on the chemical concentration. The velocity always
/// satisfies `u·n = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiBc {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryConfig {
    pub phi: PhiBc,
}

impl BoundaryConfig {
    pub fn dirichlet() -> Self {
        BoundaryConfig {
            phi: PhiBc::Dirichlet,
        }
    }

    pub fn neumann() -> Self {
        BoundaryConfig { phi: PhiBc::Neumann }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(f: impl FnOnce(&mut Coefficients)) -> ModelParams {
        let mut c = Coefficients::default();
        f(&mut c);
        ModelParams::new(c).unwrap()
    }

    #[test]
    fn rejects_invalid_coefficients() {
        for (name, f) in [
            ("A0", (|c: &mut Coefficients| c.a0 = 0.0) as fn(&mut Coefficients)),
            ("alpha", |c| c.alpha = -1.0),
            ("d", |c| c.d = 0.0),
            ("a", |c| c.a = 0.0),
            ("b", |c| c.b = f64::NAN),
            ("gamma", |c| c.gamma = 0.5),
            ("tau", |c| c.tau = -1e-3),
        ] {
            let mut c = Coefficients::default();
            f(&mut c);
            match ModelParams::new(c) {
                Err(ModelError::InvalidParameter { name: got, .. }) => assert_eq!(got, name),
                other => panic!("{name}: {other:?}"),
            }
        }
        // any finite beta is accepted
        assert!(ModelParams::new(Coefficients {
            beta: -1e6,
            ..Coefficients::default()
        })
        .is_ok());
    }

    #[test]
    fn pressure_examples() {
        let p = params(|c| c.gamma = 2.0);
        assert_eq!(p.pressure(0.0).unwrap(), 0.0);
        let p = params(|c| c.gamma = 1.0);
        assert_eq!(p.pressure(3.0).unwrap(), 3.0);
        let p = params(|c| {
            c.a0 = 2.0;
            c.gamma = 2.0
        });
        assert!((p.pressure(1.5).unwrap() - 4.5).abs() < 1e-15);
        assert_eq!(p.pressure(-1.0), Err(ModelError::NegativeDensity(-1.0)));
        let p = params(|c| c.gamma = 1.7);
        assert!((p.pressure(2.0).unwrap() - 2f64.powf(1.7)).abs() < 1e-14);
    }

    #[test]
    fn sound_speed_examples() {
        let p = params(|c| c.gamma = 1.0);
        assert_eq!(p.sound_speed(7.0).unwrap(), 1.0);
        let p = params(|c| c.gamma = 2.0);
        assert!((p.sound_speed(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let p = params(|c| {
            c.a0 = 0.5;
            c.gamma = 3.0
        });
        assert!((p.sound_speed(2.0).unwrap() - 6f64.sqrt()).abs() < 1e-14);
        assert!(p.sound_speed(-0.1).is_err());
    }

    #[test]
    fn sigma_examples() {
        let p = params(|c| {
            c.a0 = 0.125;
            c.gamma = 2.0
        });
        assert!((p.sigma_transform(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(p.sigma_transform(0.0).unwrap(), 0.0);
        assert!((p.sigma_inverse(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(p.sigma_inverse(0.0).unwrap(), 0.0);

        let p = params(|c| {
            c.a0 = 1.0 / 3.0;
            c.gamma = 3.0
        });
        assert!((p.sigma_transform(0.7).unwrap() - 0.7).abs() < 1e-14);

        let p = params(|c| {
            c.a0 = 1.0;
            c.gamma = 2.5
        });
        let back = p.sigma_inverse(p.sigma_transform(0.37).unwrap()).unwrap();
        assert!((back - 0.37).abs() < 1e-14);

        let p = params(|c| c.gamma = 1.0);
        assert_eq!(
            p.sigma_transform(1.0),
            Err(ModelError::UnsupportedTransform { gamma: 1.0 })
        );
        assert!(p.sigma_inverse(1.0).is_err());
    }

    #[test]
    fn pressure_condition_examples() {
        let p = params(|c| {
            c.gamma = 2.0;
            c.b = 1.0;
            c.a = 1.0;
            c.alpha = 1.0
        });
        let m = p.pressure_condition(1.0);
        assert!((m.margin - 1.0).abs() < 1e-15 && m.holds);

        let p = params(|c| {
            c.gamma = 2.0;
            c.a = 2.0
        });
        let m = p.pressure_condition(1.0);
        assert_eq!(m.margin, 0.0);
        assert!(!m.holds);

        let p = params(|c| {
            c.gamma = 1.0;
            c.b = 3.0
        });
        let m = p.pressure_condition(2.0);
        assert!((m.margin - 1.0).abs() < 1e-15 && m.holds);
    }

    #[test]
    fn pressure_condition_sign_flip() {
        let p = params(|c| {
            c.gamma = 1.5;
            c.b = 1.0;
            c.a = 1.0;
            c.alpha = 1.0
        });
        // 1.5 ρ^{1/2} = ρ  ⇒ ρ = 2.25
        assert!(p.pressure_condition(2.25 * 0.99).holds);
        assert!(!p.pressure_condition(2.25 * 1.01).holds);
    }

    #[test]
    fn mean_phi_examples() {
        let p = params(|c| {
            c.tau = 1.0;
            c.a = 1.0;
            c.b = 1.0
        });
        assert_eq!(p.mean_phi_exact(0.0, 1.0, 0.0), 0.0);
        assert!((p.mean_phi_exact(2f64.ln(), 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((p.mean_phi_exact(60.0, 1.0, 0.0) - 1.0).abs() < 1e-15);

        let p0 = params(|c| {
            c.tau = 0.0;
            c.a = 2.0
        });
        assert_eq!(p0.mean_phi_exact(0.0, 1.0, 7.0), 0.5);
        assert_eq!(p0.mean_phi_exact(3.0, 1.0, 7.0), 0.5);
    }

    #[test]
    fn mean_phi_solves_mean_ode() {
        let p = params(|c| {
            c.tau = 0.7;
            c.a = 1.3;
            c.b = 0.9
        });
        let (rho0, phi0) = (1.1, 0.2);
        let eps = 1e-5;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..50 {
            let t = 0.1 * k as f64 + 0.05;
            let v = p.mean_phi_exact(t, rho0, phi0);
            assert!(v >= prev);
            prev = v;
            let dv = (p.mean_phi_exact(t + eps, rho0, phi0) - p.mean_phi_exact(t - eps, rho0, phi0))
                / (2.0 * eps);
            let resid = p.tau() * dv + p.a() * v - p.b() * rho0;
            assert!(resid.abs() < 1e-10, "t={t} resid={resid}");
        }
    }

    proptest! {
        #[test]
        fn sigma_roundtrip(rho in 0.0f64..1e3, gamma in 1.0001f64..5.0, a0 in 0.01f64..10.0) {
            let p = ModelParams::new(Coefficients { gamma, a0, ..Coefficients::default() }).unwrap();
            let back = p.sigma_inverse(p.sigma_transform(rho).unwrap()).unwrap();
            prop_assert!((back - rho).abs() <= 1e-12 * rho.max(1e-300));
        }

        #[test]
        fn gamma_two_branches_agree(rho in 0.0f64..1e3, a0 in 0.01f64..10.0) {
            let p = ModelParams::new(Coefficients { gamma: 2.0, a0, ..Coefficients::default() }).unwrap();
            let s = p.sigma_transform(rho).unwrap();
            let g = p.sigma_transform_general(rho).unwrap();
            prop_assert!((s - g).abs() <= 1e-14 * s.max(1.0));
        }
    }
}
