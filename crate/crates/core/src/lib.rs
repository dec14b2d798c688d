//! Numerical laboratory for the fluid-reaction-diffusion (FRD) model of
//! vasculogenesis on the unit square:
//!
//! ```text
//! ρ_t + ∇·(ρu) = 0
//! (ρu)_t + ∇·(ρu⊗u) + ∇P(ρ) = −αρu + βρ∇φ,   P(ρ) = A0 ρ^γ
//! τφ_t − dΔφ + aφ = bρ
//! ```
//!
//! with `u·n = 0` on the boundary and either `φ = 0` or `∂φ/∂n = 0`.

pub mod check;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod fields;
pub mod model;
pub mod steady;

pub use fields::{Grid, ScalarField, VectorField};
pub use model::{BoundaryConfig, Coefficients, ModelParams, PhiBc};
