//! Conjugate-gradient solver for the screened Poisson operator
//! `(a + shift) φ − d Δ_h φ` with ghost-cell boundary closure.

use std::fmt;
use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use super::grid::{Grid, ScalarField};
use super::ops::{laplacian_into, Reflection};
use super::FieldError;
use crate::model::PhiBc;

/// Preconditioner for the conjugate-gradient iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// Separable cosine/sine-transform inverse of the 5-point operator.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveConfig {
    /// Target for `‖rhs − Aφ‖ / ‖rhs‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for LinearSolveConfig {
    fn default() -> Self {
        LinearSolveConfig {
            tol: 1e-10,
            max_iter: 20_000,
            preconditioner: Preconditioner::Spectral,
        }
    }
}

impl LinearSolveConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(FieldError::InvalidSolverConfig("tol must be finite and > 0"));
        }
        if self.max_iter == 0 {
            return Err(FieldError::InvalidSolverConfig("max_iter must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Achieved `‖rhs − Aφ‖ / ‖rhs‖`, recomputed from the returned φ.
    pub relative_residual: f64,
}

struct SpectralInverse {
    n: usize,
    /// eigenvalues of the 1D operator −D² with the chosen reflection
    mu: Vec<f64>,
    plan: Arc<dyn TransformType2And3<f64>>,
    refl: Reflection,
}

impl fmt::Debug for SpectralInverse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralInverse")
            .field("n", &self.n)
            .field("refl", &self.refl)
            .finish()
    }
}

impl SpectralInverse {
    fn new(grid: Grid, refl: Reflection) -> Self {
        let n = grid.n();
        let h = grid.h();
        let shift = match refl {
            Reflection::Even => 0.0,
            Reflection::Odd => 1.0,
        };
        let mu = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * (k as f64 + shift) / (2.0 * n as f64)).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        let plan = DctPlanner::new().plan_dct2(n);
        SpectralInverse { n, mu, plan, refl }
    }

    fn forward_rows(&self, buf: &mut [f64]) {
        for row in buf.chunks_exact_mut(self.n) {
            match self.refl {
                Reflection::Even => self.plan.process_dct2(row),
                Reflection::Odd => self.plan.process_dst2(row),
            }
        }
    }

    fn inverse_rows(&self, buf: &mut [f64]) {
        for row in buf.chunks_exact_mut(self.n) {
            match self.refl {
                Reflection::Even => self.plan.process_dct3(row),
                Reflection::Odd => self.plan.process_dst3(row),
            }
        }
    }

    /// `z = ((c) I − d Δ_h)^{-1} r`
    fn apply(&self, r: &[f64], c: f64, d: f64, z: &mut [f64], scratch: &mut [f64]) {
        let n = self.n;
        z.copy_from_slice(r);
        self.forward_rows(z);
        transpose(z, scratch, n);
        self.forward_rows(scratch);
        // scratch[l * n + k]: k along x, l along y after the transpose
        // (rows of `scratch` are x-mode columns)
        for (kx, row) in scratch.chunks_exact_mut(n).enumerate() {
            for (ky, v) in row.iter_mut().enumerate() {
                *v /= c + d * (self.mu[kx] + self.mu[ky]);
            }
        }
        self.inverse_rows(scratch);
        transpose(scratch, z, n);
        self.inverse_rows(z);
        let norm = (2.0 / n as f64) * (2.0 / n as f64);
        z.iter_mut().for_each(|v| *v *= norm);
    }
}

fn transpose(src: &[f64], dst: &mut [f64], n: usize) {
    for j in 0..n {
        for i in 0..n {
            dst[i * n + j] = src[j * n + i];
        }
    }
}

/// The operator `c φ − d Δ_h φ` on one grid with one boundary closure.
#[derive(Debug)]
pub struct HelmholtzOperator {
    grid: Grid,
    d: f64,
    c: f64,
    refl: Reflection,
    spectral: Option<SpectralInverse>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl HelmholtzOperator {
    /// `c` is the full zeroth-order coefficient `a + shift`.
    pub fn new(grid: Grid, d: f64, c: f64, bc: PhiBc, pre: Preconditioner) -> Result<Self, FieldError> {
        let mut op = HelmholtzOperator {
            grid,
            d,
            c,
            refl: bc.into(),
            spectral: None,
        };
        op.set_coefficients(d, c)?;
        if pre == Preconditioner::Spectral {
            op.spectral = Some(SpectralInverse::new(grid, op.refl));
        }
        Ok(op)
    }

    pub fn set_coefficients(&mut self, d: f64, c: f64) -> Result<(), FieldError> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(FieldError::InvalidOperator("diffusion must be finite and > 0"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(FieldError::InvalidOperator("a + shift must be finite and > 0"));
        }
        self.d = d;
        self.c = c;
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn apply(&self, x: &ScalarField, out: &mut ScalarField) {
        laplacian_into(x, self.refl, out);
        let (c, d) = (self.c, self.d);
        for (o, &xv) in out.values_mut().iter_mut().zip(x.values()) {
            *o = c * xv - d * *o;
        }
    }

    fn residual(&self, rhs: &ScalarField, x: &ScalarField, r: &mut ScalarField) {
        self.apply(x, r);
        for (rv, &b) in r.values_mut().iter_mut().zip(rhs.values()) {
            *rv = b - *rv;
        }
    }

    fn precondition(&self, r: &ScalarField, z: &mut ScalarField, scratch: &mut [f64]) {
        match &self.spectral {
            Some(s) => s.apply(r.values(), self.c, self.d, z.values_mut(), scratch),
            None => z.values_mut().copy_from_slice(r.values()),
        }
    }

    pub fn solve(&self, rhs: &ScalarField, cfg: &LinearSolveConfig) -> Result<(ScalarField, SolveReport), FieldError> {
        self.solve_from(rhs, &ScalarField::zeros(self.grid), cfg)
    }

    /// Preconditioned CG started from `guess`. Iterates on the correction
    /// until its residual drops by `tol`; the returned report carries the
    /// residual recomputed from the final iterate.
    pub fn solve_from(
        &self,
        rhs: &ScalarField,
        guess: &ScalarField,
        cfg: &LinearSolveConfig,
    ) -> Result<(ScalarField, SolveReport), FieldError> {
        cfg.validate()?;
        let g = self.grid;
        let rhs_norm = norm(rhs.values());
        let rel = |r: f64| if rhs_norm > 0.0 { r / rhs_norm } else { r };

        let mut x = guess.clone();
        let mut r = ScalarField::zeros(g);
        self.residual(rhs, &x, &mut r);
        let r0 = norm(r.values());
        if r0 == 0.0 {
            return Ok((
                x,
                SolveReport {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        let target = cfg.tol * r0;
        let fallback = cfg.tol * rhs_norm;

        let mut scratch = vec![0.0; g.len()];
        let mut z = ScalarField::zeros(g);
        let mut ap = ScalarField::zeros(g);
        self.precondition(&r, &mut z, &mut scratch);
        let mut p = z.clone();
        let mut rz = dot(r.values(), z.values());
        let mut iterations = 0;
        let mut restarts = 0;

        while iterations < cfg.max_iter {
            iterations += 1;
            self.apply(&p, &mut ap);
            let pap = dot(p.values(), ap.values());
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            x.add_scaled(alpha, &p);
            r.add_scaled(-alpha, &ap);
            if norm(r.values()) <= target {
                // guard against drift of the recursive residual
                self.residual(rhs, &x, &mut r);
                let true_norm = norm(r.values());
                if true_norm <= target || restarts >= 3 {
                    break;
                }
                restarts += 1;
                self.precondition(&r, &mut z, &mut scratch);
                p.values_mut().copy_from_slice(z.values());
                rz = dot(r.values(), z.values());
                continue;
            }
            self.precondition(&r, &mut z, &mut scratch);
            let rz_new = dot(r.values(), z.values());
            let beta = rz_new / rz;
            rz = rz_new;
            for (pv, &zv) in p.values_mut().iter_mut().zip(z.values()) {
                *pv = zv + beta * *pv;
            }
        }

        self.residual(rhs, &x, &mut r);
        let achieved = norm(r.values());
        if !x.is_finite() || achieved > target.max(fallback) {
            return Err(FieldError::NotConverged {
                iterations,
                relative_residual: rel(achieved),
            });
        }
        Ok((
            x,
            SolveReport {
                iterations,
                relative_residual: rel(achieved),
            },
        ))
    }
}

/// Solves `(a + shift) φ − d Δ_h φ = rhs` with the given boundary condition.
pub fn helmholtz_solve(
    rhs: &ScalarField,
    d: f64,
    a: f64,
    shift: f64,
    bc: PhiBc,
    cfg: &LinearSolveConfig,
) -> Result<ScalarField, FieldError> {
    if shift < 0.0 {
        return Err(FieldError::InvalidOperator("shift must be >= 0"));
    }
    let op = HelmholtzOperator::new(rhs.grid(), d, a + shift, bc, cfg.preconditioner)?;
    op.solve(rhs, cfg).map(|(phi, _)| phi)
}
