//! Explicit equilibria: the double-sine series steady state for the
//! Dirichlet chemical condition (γ = 2), and the constant state for the
//! Neumann condition.
//!
//! With `Λ = (2aA0 − bβ)/(2dA0)` the series reads
//!
//! ```text
//! φ̂(x,y) = 8bĈ/(dA0π²) ΣΣ sin(mπx) sin(nπy) / (mn[(m²+n²)π² + Λ]),  m, n odd
//! ρ̂      = (β/(2A0)) φ̂ + Ĉ/(2A0)
//! ```
//!
//! and Ĉ is fixed by the total mass. Integrating `sin(mπx)` over `[0, 1]`
//! gives `2/(mπ)` for odd `m`, so the mass of the series part of ρ̂ is
//! `16bβĈ/(dA0²π⁴) · S` with `S = ΣΣ 1/(m²n²[(m²+n²)π² + Λ])`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::fields::{gradient, laplacian, EdgeRule, Grid, Norms, Reflection, ScalarField};
use crate::model::{ModelParams, PhiBc};

/// Guard band around a resonance, relative to π².
pub const RESONANCE_EPS: f64 = 1e-8;
/// Degenerate-denominator threshold, relative to `1/(2A0)`.
pub const DENOM_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("m_max must be odd and >= 1, got {0}")]
    InvalidTruncation(usize),
    #[error("tail_tol must be finite and > 0, got {0}")]
    InvalidTailTol(f64),
    #[error("resonance: Λ is within {distance:e} of −({m}²+{n}²)π²")]
    Resonance { m: usize, n: usize, distance: f64 },
    #[error("mass constraint is degenerate: denominator {denominator:e}")]
    DegenerateDenominator { denominator: f64 },
    #[error("the series steady state needs a Dirichlet chemical condition")]
    WrongBoundary,
    #[error("the series steady state needs gamma = 2, got {0}")]
    UnsupportedGamma(f64),
}

/// Truncation of the double series to odd `m, n ≤ m_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSpec {
    m_max: usize,
    tail_tol: f64,
}

impl Default for SeriesSpec {
    fn default() -> Self {
        SeriesSpec {
            m_max: 201,
            tail_tol: 1e-8,
        }
    }
}

impl SeriesSpec {
    pub fn new(m_max: usize, tail_tol: f64) -> Result<Self, SteadyError> {
        if m_max == 0 || m_max % 2 == 0 {
            return Err(SteadyError::InvalidTruncation(m_max));
        }
        if !(tail_tol > 0.0 && tail_tol.is_finite()) {
            return Err(SteadyError::InvalidTailTol(tail_tol));
        }
        Ok(SeriesSpec { m_max, tail_tol })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Odd mode numbers in ascending order.
    pub fn modes(&self) -> impl DoubleEndedIterator<Item = usize> + ExactSizeIterator + Clone {
        (0..self.mode_count()).map(|k| 2 * k + 1)
    }

    fn mode_count(&self) -> usize {
        self.m_max.div_ceil(2)
    }
}

/// `Λ = (2aA0 − bβ)/(2dA0)`.
pub fn compute_lambda(params: &ModelParams) -> f64 {
    (2.0 * params.a() * params.a0() - params.b() * params.beta()) / (2.0 * params.d() * params.a0())
}

/// Smallest distance `|Λ + (m²+n²)π²|` over the odd pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceMargin {
    pub m: usize,
    pub n: usize,
    pub distance: f64,
}

/// Fails when Λ sits within `RESONANCE_EPS·π²` of some `−(m²+n²)π²`.
pub fn check_resonance(lambda: f64, spec: &SeriesSpec) -> Result<ResonanceMargin, SteadyError> {
    // (m²+n²) for odd m, n takes every value ≡ 2 (mod 8) from 2 upwards,
    // so only the pairs nearest −Λ/π² matter; scanning them all keeps the
    // nearest pair explicit.
    let mut best = ResonanceMargin {
        m: 1,
        n: 1,
        distance: f64::INFINITY,
    };
    for m in spec.modes() {
        for n in spec.modes().filter(|&n| n >= m) {
            let dist = (lambda + ((m * m + n * n) as f64) * PI * PI).abs();
            if dist < best.distance {
                best = ResonanceMargin { m, n, distance: dist };
            }
        }
    }
    if best.distance <= RESONANCE_EPS * PI * PI {
        return Err(SteadyError::Resonance {
            m: best.m,
            n: best.n,
            distance: best.distance,
        });
    }
    Ok(best)
}

/// `K` in `∫ρ̂ = Ĉ (K·S + 1/(2A0))`: `16bβ/(dA0²π⁴)`.
pub fn mass_series_coefficient(params: &ModelParams) -> f64 {
    16.0 * params.b() * params.beta() / (params.d() * params.a0() * params.a0() * PI.powi(4))
}

/// `S = ΣΣ 1/(m²n²[(m²+n²)π² + Λ])` over odd `m, n ≤ m_max`, smallest
/// terms first.
pub fn mass_series_sum(lambda: f64, spec: &SeriesSpec) -> f64 {
    let mut s = 0.0;
    for m in spec.modes().rev() {
        let mf = m as f64;
        let mut row = 0.0;
        for n in spec.modes().rev() {
            let nf = n as f64;
            row += 1.0 / (mf * mf * nf * nf * ((mf * mf + nf * nf) * PI * PI + lambda));
        }
        s += row;
    }
    s
}

/// `K·S + 1/(2A0)`, the factor multiplying Ĉ in the mass constraint.
pub fn mass_denominator(params: &ModelParams, spec: &SeriesSpec) -> Result<f64, SteadyError> {
    let lambda = compute_lambda(params);
    check_resonance(lambda, spec)?;
    Ok(mass_series_coefficient(params) * mass_series_sum(lambda, spec) + 0.5 / params.a0())
}

/// Ĉ from the total-mass constraint.
pub fn solve_c_hat(total_mass: f64, params: &ModelParams, spec: &SeriesSpec) -> Result<f64, SteadyError> {
    let den = mass_denominator(params, spec)?;
    if den.abs() < DENOM_EPS * (0.5 / params.a0()) {
        return Err(SteadyError::DegenerateDenominator { denominator: den });
    }
    Ok(total_mass / den)
}

/// `sin(mπx)` for odd `m`, evaluated on the half of the interval nearer
/// to the wall so that the walls give exact zeros and the midline symmetry
/// is exact.
#[inline]
fn odd_sine(m: usize, x: f64) -> f64 {
    let xr = if x > 0.5 { 1.0 - x } else { x };
    (m as f64 * PI * xr).sin()
}

/// Truncated double sine series of φ̂ for a given Ĉ and Λ. Boundary
/// points return exactly zero.
pub fn eval_phi_hat(x: f64, y: f64, c_hat: f64, lambda: f64, params: &ModelParams, spec: &SeriesSpec) -> Result<f64, SteadyError> {
    check_resonance(lambda, spec)?;
    Ok(phi_series(x, y, c_hat, lambda, params, spec))
}

fn phi_prefactor(c_hat: f64, params: &ModelParams) -> f64 {
    8.0 * params.b() * c_hat / (params.d() * params.a0() * PI * PI)
}

fn phi_series(x: f64, y: f64, c_hat: f64, lambda: f64, params: &ModelParams, spec: &SeriesSpec) -> f64 {
    if x <= 0.0 || x >= 1.0 || y <= 0.0 || y >= 1.0 {
        return 0.0;
    }
    let sy: Vec<f64> = spec.modes().map(|n| odd_sine(n, y)).collect();
    let mut sum = 0.0;
    // largest m + n first
    for m in spec.modes().rev() {
        let mf = m as f64;
        let sx = odd_sine(m, x);
        let mut row = 0.0;
        for (ni, n) in spec.modes().enumerate().rev() {
            let nf = n as f64;
            row += sy[ni] / (nf * ((mf * mf + nf * nf) * PI * PI + lambda));
        }
        sum += sx * row / mf;
    }
    phi_prefactor(c_hat, params) * sum
}

/// Grid-independent description of the series equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadySeries {
    params: ModelParams,
    spec: SeriesSpec,
    c_hat: f64,
    lambda: f64,
    total_mass: f64,
    resonance: ResonanceMargin,
}

impl SteadySeries {
    pub fn new(params: &ModelParams, total_mass: f64, spec: &SeriesSpec) -> Result<Self, SteadyError> {
        if params.gamma() != 2.0 {
            return Err(SteadyError::UnsupportedGamma(params.gamma()));
        }
        let lambda = compute_lambda(params);
        let resonance = check_resonance(lambda, spec)?;
        let c_hat = solve_c_hat(total_mass, params, spec)?;
        Ok(SteadySeries {
            params: *params,
            spec: *spec,
            c_hat,
            lambda,
            total_mass,
            resonance,
        })
    }

    pub fn c_hat(&self) -> f64 {
        self.c_hat
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `D̂ = bĈ/(2dA0)`.
    pub fn d_hat(&self) -> f64 {
        self.params.b() * self.c_hat / (2.0 * self.params.d() * self.params.a0())
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn spec(&self) -> &SeriesSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn resonance_margin(&self) -> ResonanceMargin {
        self.resonance
    }

    pub fn phi_hat(&self, x: f64, y: f64) -> f64 {
        phi_series(x, y, self.c_hat, self.lambda, &self.params, &self.spec)
    }

    /// ρ̂ through the linear relation with φ̂, so that relation holds exactly.
    pub fn rho_hat(&self, x: f64, y: f64) -> f64 {
        self.rho_from_phi(self.phi_hat(x, y))
    }

    #[inline]
    fn rho_from_phi(&self, phi: f64) -> f64 {
        let two_a0 = 2.0 * self.params.a0();
        (self.params.beta() / two_a0) * phi + self.c_hat / two_a0
    }

    /// Magnitude of the last diagonal band `m + n = 2·m_max` kept in the
    /// sum. A heuristic tail indicator, not a bound.
    pub fn tail_estimate(&self) -> f64 {
        let m = self.spec.m_max as f64;
        (phi_prefactor(self.c_hat, &self.params) / (m * m * (2.0 * m * m * PI * PI + self.lambda))).abs()
    }

    /// Samples φ̂ and ρ̂ at the cell centres of `grid`. Separable: the sine
    /// tables are built once per axis.
    pub fn sample(&self, grid: Grid) -> (ScalarField, ScalarField) {
        let n = grid.n();
        let modes: Vec<usize> = self.spec.modes().collect();
        let k = self.spec.mode_count();
        // table[q * n + i] = sin(m_q π x_i)
        let mut table = vec![0.0; k * n];
        for (q, &m) in modes.iter().enumerate() {
            for i in 0..n {
                // odd modes are even about x = 1/2; reuse the mirrored cell
                table[q * n + i] = odd_sine(m, grid.center(i.min(n - 1 - i)));
            }
        }
        // inner[q * n + j] = Σ_n sin(nπy_j) / (n[(m_q²+n²)π²+Λ]), summed from large n
        let mut inner = vec![0.0; k * n];
        for (q, &m) in modes.iter().enumerate() {
            let mf = m as f64;
            let w: Vec<f64> = modes
                .iter()
                .map(|&nn| {
                    let nf = nn as f64;
                    1.0 / (nf * ((mf * mf + nf * nf) * PI * PI + self.lambda))
                })
                .collect();
            for j in 0..n {
                let mut acc = 0.0;
                for r in (0..k).rev() {
                    acc += w[r] * table[r * n + j];
                }
                inner[q * n + j] = acc / mf;
            }
        }
        let pref = phi_prefactor(self.c_hat, &self.params);
        let mut phi = ScalarField::zeros(grid);
        for j in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for q in (0..k).rev() {
                    acc += table[q * n + i] * inner[q * n + j];
                }
                phi[(i, j)] = pref * acc;
            }
        }
        let rho = phi.map(|p| self.rho_from_phi(p));
        (phi, rho)
    }
}

/// Raised when the sampled equilibrium density is not strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityWarning {
    pub min_rho: f64,
}

/// Series equilibrium sampled on a grid.
#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub series: SteadySeries,
    pub grid: Grid,
    pub phi: ScalarField,
    pub rho: ScalarField,
    pub min_rho: f64,
    pub positivity_warning: Option<PositivityWarning>,
}

impl SteadySolution {
    pub fn c_hat(&self) -> f64 {
        self.series.c_hat()
    }

    pub fn lambda(&self) -> f64 {
        self.series.lambda()
    }
}

/// Builds the Dirichlet-case equilibrium (zero velocity) on `grid`.
pub fn build_steady(params: &ModelParams, bc: PhiBc, total_mass: f64, grid: Grid, spec: &SeriesSpec) -> Result<SteadySolution, SteadyError> {
    if bc != PhiBc::Dirichlet {
        return Err(SteadyError::WrongBoundary);
    }
    let series = SteadySeries::new(params, total_mass, spec)?;
    let (phi, rho) = series.sample(grid);
    let min_rho = rho.min();
    let positivity_warning = (min_rho <= 0.0).then_some(PositivityWarning { min_rho });
    Ok(SteadySolution {
        series,
        grid,
        phi,
        rho,
        min_rho,
        positivity_warning,
    })
}

/// Constant Neumann-case equilibrium `(ρ̂0, 0, (b/a) ρ̂0)`; on the unit
/// square the mean density equals the total mass.
pub fn constant_steady(params: &ModelParams, total_mass: f64) -> (f64, [f64; 2], f64) {
    (total_mass, [0.0, 0.0], params.b() / params.a() * total_mass)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyResidual {
    /// L² norm of `dΔ_hφ̂ − aφ̂ + bρ̂` over cells whose 5-point stencil
    /// stays inside the domain.
    pub helmholtz: f64,
    /// L² norm of `2A0ρ̂∇_hρ̂ − βρ̂∇_hφ̂` over all cells.
    pub momentum: f64,
}

/// Discrete residuals of the steady equations with second-order central
/// operators.
pub fn steady_residual(steady: &SteadySolution) -> SteadyResidual {
    let p = &steady.series.params;
    let grid = steady.grid;
    let n = grid.n();
    let h = grid.h();
    let lap = laplacian(&steady.phi, Reflection::Odd);
    let mut sq = 0.0;
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let r = p.d() * lap.at(i, j) - p.a() * steady.phi.at(i, j) + p.b() * steady.rho.at(i, j);
            sq += r * r;
        }
    }
    let helmholtz = h * sq.sqrt();

    // the same stencil on both fields
    let grad_rho = gradient(&steady.rho, EdgeRule::Extrapolate);
    let grad_phi = gradient(&steady.phi, EdgeRule::Extrapolate);
    let two_a0 = 2.0 * p.a0();
    let mut sq = 0.0;
    for k in 0..grid.len() {
        let rho = steady.rho.values()[k];
        let rx = two_a0 * rho * grad_rho.u.values()[k] - p.beta() * rho * grad_phi.u.values()[k];
        let ry = two_a0 * rho * grad_rho.v.values()[k] - p.beta() * rho * grad_phi.v.values()[k];
        sq += rx * rx + ry * ry;
    }
    SteadyResidual {
        helmholtz,
        momentum: h * sq.sqrt(),
    }
}

/// Midpoint-rule integral of the series part of ρ̂ per unit Ĉ, i.e. an
/// estimate of `K·S`, on an `n × n` grid, Richardson-extrapolated with the
/// `n/2` grid.
pub fn quadrature_mass_series(params: &ModelParams, spec: &SeriesSpec, n: usize) -> Result<f64, SteadyError> {
    let lambda = compute_lambda(params);
    let unit = SteadySeries {
        params: *params,
        spec: *spec,
        c_hat: 1.0,
        lambda,
        total_mass: f64::NAN,
        resonance: check_resonance(lambda, spec)?,
    };
    let integrate = |cells: usize| {
        let grid = Grid::new(cells).expect("quadrature grid");
        let (_, rho) = unit.sample(grid);
        rho.integral() - 0.5 / params.a0()
    };
    let fine = integrate(n);
    let coarse = integrate(n / 2);
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Re-quadratured `∫ρ̂` on the sampling grid (composite midpoint rule).
pub fn quadrature_mass(steady: &SteadySolution) -> f64 {
    steady.rho.integral()
}

/// The L∞ norm over a grid of the change in φ̂ when the truncation moves
/// from `m_max` to `2·m_max + 1`.
pub fn truncation_change(params: &ModelParams, total_mass: f64, spec: &SeriesSpec, grid: Grid) -> Result<f64, SteadyError> {
    let coarse = SteadySeries::new(params, total_mass, spec)?;
    let fine_spec = SeriesSpec::new(2 * spec.m_max() + 1, spec.tail_tol())?;
    let fine = SteadySeries::new(params, total_mass, &fine_spec)?;
    let (a, _) = coarse.sample(grid);
    let (b, _) = fine.sample(grid);
    Ok(Norms::of_scalar(&a.zip_map(&b, |p, q| p - q), EdgeRule::Dirichlet).linf)
}
