//! Time integration of the full system: a finite-volume update of
//! `(ρ, ρu)` (MUSCL reconstruction, Rusanov flux, SSP-RK2) Strang-split
//! with the damping/chemotaxis source, and a backward-Euler (τ > 0) or
//! elliptic (τ = 0) update of φ.

use thiserror::Error;

use crate::diagnostics::{self, EnergyRecord, Reference};
use crate::fields::{
    gradient, laplacian, FieldError, Grid, HelmholtzOperator, LinearSolveConfig, ScalarField, VectorField,
};
use crate::model::{ModelParams, PhiBc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid step configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("state fields live on different grids")]
    GridMismatch,
    #[error("non-finite state at t = {t}")]
    BlowUp { t: f64 },
    #[error("time step collapsed to {dt:e} at t = {t}")]
    DtCollapse { t: f64, dt: f64 },
    #[error("chemical solve failed at t = {t}: {source}")]
    Solver { t: f64, source: FieldError },
}

/// Density, momentum and chemical concentration at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub rho: ScalarField,
    pub mom: VectorField,
    pub phi: ScalarField,
}

impl State {
    pub fn new(t: f64, rho: ScalarField, mom: VectorField, phi: ScalarField) -> Result<Self, DynamicsError> {
        let g = rho.grid();
        if mom.u.grid() != g || mom.v.grid() != g || phi.grid() != g {
            return Err(DynamicsError::GridMismatch);
        }
        Ok(State { t, rho, mom, phi })
    }

    /// Builds the momentum from a velocity field.
    pub fn from_velocity(t: f64, rho: ScalarField, vel: &VectorField, phi: ScalarField) -> Result<Self, DynamicsError> {
        let mom = VectorField {
            u: rho.zip_map(&vel.u, |r, u| r * u),
            v: rho.zip_map(&vel.v, |r, v| r * v),
        };
        State::new(t, rho, mom, phi)
    }

    pub fn grid(&self) -> Grid {
        self.rho.grid()
    }

    /// `u = m/ρ`, with ρ clamped below by `floor`.
    pub fn velocity(&self, floor: f64) -> VectorField {
        let inv = |m: f64, r: f64| m / r.max(floor);
        VectorField {
            u: self.mom.u.zip_map(&self.rho, inv),
            v: self.mom.v.zip_map(&self.rho, inv),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.rho.is_finite() && self.mom.is_finite() && self.phi.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Limiter {
    #[default]
    Minmod,
    /// Piecewise-constant reconstruction (first order).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    #[default]
    SspRk2,
    ForwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub cfl: f64,
    pub rho_floor: f64,
    /// Upper bound on the step; `f64::INFINITY` leaves the CFL rule alone.
    pub dt_max: f64,
    pub limiter: Limiter,
    pub scheme: TimeScheme,
    pub solver: LinearSolveConfig,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            cfl: 0.4,
            rho_floor: 1e-12,
            dt_max: f64::INFINITY,
            limiter: Limiter::Minmod,
            scheme: TimeScheme::SspRk2,
            solver: LinearSolveConfig::default(),
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(DynamicsError::InvalidConfig("cfl must lie in (0, 0.9]"));
        }
        if !(self.rho_floor > 0.0 && self.rho_floor.is_finite()) {
            return Err(DynamicsError::InvalidConfig("rho_floor must be finite and > 0"));
        }
        if !(self.dt_max > 0.0) {
            return Err(DynamicsError::InvalidConfig("dt_max must be > 0"));
        }
        self.solver
            .validate()
            .map_err(|_| DynamicsError::InvalidConfig("invalid linear solver settings"))
    }
}

/// Smallest step below which a run is declared collapsed.
const DT_COLLAPSE: f64 = 1e-12;

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Scratch buffers for one grid line, padded by two ghost cells per side.
struct LineBuf {
    rho: Vec<f64>,
    un: Vec<f64>,
    ut: Vec<f64>,
    s_rho: Vec<f64>,
    s_un: Vec<f64>,
    s_ut: Vec<f64>,
    f_rho: Vec<f64>,
    f_mn: Vec<f64>,
    f_mt: Vec<f64>,
}

impl LineBuf {
    fn new(n: usize) -> Self {
        let z = |k| vec![0.0; k];
        LineBuf {
            rho: z(n + 4),
            un: z(n + 4),
            ut: z(n + 4),
            s_rho: z(n + 4),
            s_un: z(n + 4),
            s_ut: z(n + 4),
            f_rho: z(n + 1),
            f_mn: z(n + 1),
            f_mt: z(n + 1),
        }
    }

    /// Fills the two ghost layers by mirror reflection across the walls:
    /// the normal velocity changes sign, everything else is copied.
    fn fill_ghosts(&mut self, n: usize) {
        for q in [&mut self.rho, &mut self.ut] {
            q[1] = q[2];
            q[0] = q[3];
            q[n + 2] = q[n + 1];
            q[n + 3] = q[n];
        }
        let q = &mut self.un;
        q[1] = -q[2];
        q[0] = -q[3];
        q[n + 2] = -q[n + 1];
        q[n + 3] = -q[n];
    }

    fn slopes(&mut self, n: usize, limiter: Limiter) {
        for (q, s) in [
            (&self.rho, &mut self.s_rho),
            (&self.un, &mut self.s_un),
            (&self.ut, &mut self.s_ut),
        ] {
            match limiter {
                Limiter::Minmod => {
                    for k in 1..=n + 2 {
                        s[k] = minmod(q[k] - q[k - 1], q[k + 1] - q[k]);
                    }
                }
                Limiter::None => s.iter_mut().for_each(|v| *v = 0.0),
            }
        }
    }

    /// Rusanov fluxes on the `n + 1` faces; face `f` sits between padded
    /// cells `f + 1` and `f + 2`.
    fn fluxes(&mut self, n: usize, params: &ModelParams) {
        for f in 0..=n {
            let (l, r) = (f + 1, f + 2);
            let rl = self.rho[l] + 0.5 * self.s_rho[l];
            let rr = self.rho[r] - 0.5 * self.s_rho[r];
            let ul = self.un[l] + 0.5 * self.s_un[l];
            let ur = self.un[r] - 0.5 * self.s_un[r];
            let wl = self.ut[l] + 0.5 * self.s_ut[l];
            let wr = self.ut[r] - 0.5 * self.s_ut[r];
            let pl = params.pressure_unchecked(rl);
            let pr = params.pressure_unchecked(rr);
            let s = (ul.abs() + params.sound_speed_unchecked(rl)).max(ur.abs() + params.sound_speed_unchecked(rr));
            let (ml, mr) = (rl * ul, rr * ur);
            self.f_mn[f] = 0.5 * ((ml * ul + pl) + (mr * ur + pr)) - 0.5 * s * (mr - ml);
            if f == 0 || f == n {
                self.f_rho[f] = 0.0;
                self.f_mt[f] = 0.0;
            } else {
                self.f_rho[f] = 0.5 * (ml + mr) - 0.5 * s * (rr - rl);
                self.f_mt[f] = 0.5 * (ml * wl + mr * wr) - 0.5 * s * (rr * wr - rl * wl);
            }
        }
    }
}

/// Tendencies `(dρ/dt, dm/dt)` of the hyperbolic part
/// `ρ_t + ∇·(ρu) = 0`, `(ρu)_t + ∇·(ρu⊗u) + ∇P = 0`.
pub fn hyperbolic_rhs(state: &State, params: &ModelParams, cfg: &StepConfig) -> (ScalarField, VectorField) {
    let g = state.grid();
    let n = g.n();
    let inv_h = 1.0 / g.h();
    let floor = cfg.rho_floor;
    let rho = state.rho.values();
    let mu = state.mom.u.values();
    let mv = state.mom.v.values();
    let mut d_rho = ScalarField::zeros(g);
    let mut d_mom = VectorField::zeros(g);
    let mut buf = LineBuf::new(n);

    // x sweeps: normal = u, tangential = v
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let r = rho[k].max(floor);
            buf.rho[i + 2] = r;
            buf.un[i + 2] = mu[k] / r;
            buf.ut[i + 2] = mv[k] / r;
        }
        buf.fill_ghosts(n);
        buf.slopes(n, cfg.limiter);
        buf.fluxes(n, params);
        let (dr, du, dv) = (d_rho.values_mut(), d_mom.u.values_mut(), d_mom.v.values_mut());
        for i in 0..n {
            let k = j * n + i;
            dr[k] = -(buf.f_rho[i + 1] - buf.f_rho[i]) * inv_h;
            du[k] = -(buf.f_mn[i + 1] - buf.f_mn[i]) * inv_h;
            dv[k] = -(buf.f_mt[i + 1] - buf.f_mt[i]) * inv_h;
        }
    }
    // y sweeps: normal = v, tangential = u
    for i in 0..n {
        for j in 0..n {
            let k = j * n + i;
            let r = rho[k].max(floor);
            buf.rho[j + 2] = r;
            buf.un[j + 2] = mv[k] / r;
            buf.ut[j + 2] = mu[k] / r;
        }
        buf.fill_ghosts(n);
        buf.slopes(n, cfg.limiter);
        buf.fluxes(n, params);
        let (dr, du, dv) = (d_rho.values_mut(), d_mom.u.values_mut(), d_mom.v.values_mut());
        for j in 0..n {
            let k = j * n + i;
            dr[k] -= (buf.f_rho[j + 1] - buf.f_rho[j]) * inv_h;
            dv[k] -= (buf.f_mn[j + 1] - buf.f_mn[j]) * inv_h;
            du[k] -= (buf.f_mt[j + 1] - buf.f_mt[j]) * inv_h;
        }
    }
    (d_rho, d_mom)
}

/// Largest stable step from the CFL rule, `cfl·h / max(max(|u|,|v|) + c)`.
pub fn cfl_dt(state: &State, params: &ModelParams, cfg: &StepConfig) -> f64 {
    let floor = cfg.rho_floor;
    let mut smax = 0.0f64;
    for ((&r, &mu), &mv) in state.rho.values().iter().zip(state.mom.u.values()).zip(state.mom.v.values()) {
        let r = r.max(floor);
        let s = (mu / r).abs().max((mv / r).abs()) + params.sound_speed_unchecked(r);
        smax = smax.max(s);
    }
    if smax > 0.0 {
        cfg.cfl * state.grid().h() / smax
    } else {
        f64::INFINITY
    }
}

/// Exact integration of `u' = −αu + β∇φ` over `dt` with φ frozen; ρ is
/// unchanged and the momentum is recomposed from the new velocity.
pub fn source_update(state: &State, dt: f64, params: &ModelParams, bc: PhiBc, floor: f64) -> State {
    let alpha = params.alpha();
    let beta = params.beta();
    // u ← u·e^{−αdt} + g·(1 − e^{−αdt})/α
    let decay = (-alpha * dt).exp();
    let gain = if alpha > 0.0 { -(-alpha * dt).exp_m1() / alpha } else { dt };
    let mut out = state.clone();
    let force = (beta != 0.0).then(|| gradient(&state.phi, bc));
    let rho = state.rho.values();
    for (c, m) in [(0, &mut out.mom.u), (1, &mut out.mom.v)] {
        let g = force.as_ref().map(|f| if c == 0 { f.u.values() } else { f.v.values() });
        for (k, mk) in m.values_mut().iter_mut().enumerate() {
            let r = rho[k].max(floor);
            let mut u = *mk / r * decay;
            if let Some(g) = g {
                u += beta * g[k] * gain;
            }
            *mk = r * u;
        }
    }
    out
}

/// Reusable integrator: keeps the Helmholtz operator (and its transform
/// plans) between steps.
#[derive(Debug)]
pub struct Stepper {
    params: ModelParams,
    bc: PhiBc,
    cfg: StepConfig,
    op: HelmholtzOperator,
}

/// What happened during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    /// Some cell density had to be raised to the floor.
    pub floored: bool,
    pub solver_iterations: usize,
}

impl Stepper {
    pub fn new(grid: Grid, params: ModelParams, bc: PhiBc, cfg: StepConfig) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        let op = HelmholtzOperator::new(grid, params.d(), params.a(), bc, cfg.solver.preconditioner)
            .map_err(|_| DynamicsError::InvalidConfig("chemical operator is not positive definite"))?;
        Ok(Stepper { params, bc, cfg, op })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn bc(&self) -> PhiBc {
        self.bc
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    /// The step the CFL rule and `dt_max` allow from `state`.
    pub fn stable_dt(&self, state: &State) -> f64 {
        cfl_dt(state, &self.params, &self.cfg).min(self.cfg.dt_max)
    }

    /// Elliptic (τ = 0) or backward-Euler (τ > 0) update of φ from the
    /// current density. The τ > 0 solve is written for the increment
    /// `δ = φ_new − φ_old`:
    /// `(τ/dt + a)δ − dΔδ = bρ − aφ_old + dΔφ_old`,
    /// which is the same linear system as `(τ/dt + a)φ_new − dΔφ_new = bρ + (τ/dt)φ_old`.
    pub fn chem_update(&mut self, rho: &ScalarField, phi: &ScalarField, dt: f64) -> Result<(ScalarField, usize), FieldError> {
        let p = self.params;
        let shift = if p.tau() > 0.0 { p.tau() / dt } else { 0.0 };
        self.op.set_coefficients(p.d(), p.a() + shift)?;
        if p.tau() == 0.0 {
            let rhs = rho.map(|r| p.b() * r);
            let (phi_new, rep) = self.op.solve_from(&rhs, phi, &self.cfg.solver)?;
            return Ok((phi_new, rep.iterations));
        }
        let lap = laplacian(phi, self.bc);
        let mut rhs = rho.map(|r| p.b() * r);
        rhs.add_scaled(-p.a(), phi);
        rhs.add_scaled(p.d(), &lap);
        let (delta, rep) = self.op.solve_from(&rhs, &ScalarField::zeros(phi.grid()), &self.cfg.solver)?;
        let mut phi_new = phi.clone();
        phi_new.add_scaled(1.0, &delta);
        Ok((phi_new, rep.iterations))
    }

    fn floor_density(&self, rho: &mut ScalarField) -> bool {
        let floor = self.cfg.rho_floor;
        let mut hit = false;
        for r in rho.values_mut() {
            // NaN falls through and is caught by the finiteness check
            if *r < floor {
                *r = floor;
                hit = true;
            }
        }
        hit
    }

    fn euler_stage(&self, s: &State, dt: f64) -> State {
        let (dr, dm) = hyperbolic_rhs(s, &self.params, &self.cfg);
        let mut out = s.clone();
        out.rho.add_scaled(dt, &dr);
        out.mom.u.add_scaled(dt, &dm.u);
        out.mom.v.add_scaled(dt, &dm.v);
        out
    }

    fn hyperbolic_step(&self, s: &State, dt: f64) -> (State, bool) {
        let mut s1 = self.euler_stage(s, dt);
        let mut floored = self.floor_density(&mut s1.rho);
        if self.cfg.scheme == TimeScheme::ForwardEuler {
            return (s1, floored);
        }
        let s2 = self.euler_stage(&s1, dt);
        let avg = |a: &ScalarField, b: &ScalarField| a.zip_map(b, |x, y| 0.5 * x + 0.5 * y);
        let mut out = s.clone();
        out.rho = avg(&s.rho, &s2.rho);
        out.mom.u = avg(&s.mom.u, &s2.mom.u);
        out.mom.v = avg(&s.mom.v, &s2.mom.v);
        floored |= self.floor_density(&mut out.rho);
        (out, floored)
    }

    /// One Strang-split step of length `dt`: half source, hyperbolic
    /// update, chemical update, half source.
    pub fn step_with(&mut self, state: &State, dt: f64) -> Result<(State, StepInfo), DynamicsError> {
        if !(dt >= DT_COLLAPSE && dt.is_finite()) {
            return Err(if dt.is_finite() {
                DynamicsError::DtCollapse { t: state.t, dt }
            } else {
                DynamicsError::BlowUp { t: state.t }
            });
        }
        let (p, bc, floor) = (self.params, self.bc, self.cfg.rho_floor);
        let half = source_update(state, 0.5 * dt, &p, bc, floor);
        let (mut s, floored) = self.hyperbolic_step(&half, dt);
        let t_new = state.t + dt;
        if !s.rho.is_finite() || !s.mom.is_finite() {
            return Err(DynamicsError::BlowUp { t: t_new });
        }
        let (phi, iterations) = self
            .chem_update(&s.rho, &s.phi, dt)
            .map_err(|source| DynamicsError::Solver { t: t_new, source })?;
        s.phi = phi;
        let mut out = source_update(&s, 0.5 * dt, &p, bc, floor);
        out.t = t_new;
        if !out.is_finite() {
            return Err(DynamicsError::BlowUp { t: t_new });
        }
        Ok((
            out,
            StepInfo {
                dt,
                floored,
                solver_iterations: iterations,
            },
        ))
    }

    /// One step with the CFL/`dt_max` step size.
    pub fn step(&mut self, state: &State) -> Result<(State, StepInfo), DynamicsError> {
        let dt = self.stable_dt(state);
        if !dt.is_finite() && !state.is_finite() {
            return Err(DynamicsError::BlowUp { t: state.t });
        }
        self.step_with(state, dt)
    }
}

/// Elliptic or backward-Euler chemical update (builds a fresh operator).
pub fn chem_update(
    state: &State,
    dt: f64,
    params: &ModelParams,
    bc: PhiBc,
    cfg: &LinearSolveConfig,
) -> Result<ScalarField, FieldError> {
    let step_cfg = StepConfig {
        solver: *cfg,
        ..StepConfig::default()
    };
    let mut st = Stepper::new(state.grid(), *params, bc, step_cfg)
        .map_err(|_| FieldError::InvalidOperator("chemical operator is not positive definite"))?;
    st.chem_update(&state.rho, &state.phi, dt).map(|(phi, _)| phi)
}

/// One step with a freshly built integrator.
pub fn step(state: &State, params: &ModelParams, bc: PhiBc, cfg: &StepConfig) -> Result<(State, StepInfo), DynamicsError> {
    Stepper::new(state.grid(), *params, bc, *cfg)?.step(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub t_end: f64,
    /// Time between diagnostic samples.
    pub sample_every: f64,
    /// Time between stored snapshots; `None` keeps only the final state.
    pub snapshot_every: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunWarning {
    /// Density was floored; `first_t` is the end time of the first such step.
    Vacuum { first_t: f64, steps: usize },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<EnergyRecord>,
    pub snapshots: Vec<State>,
    pub final_state: State,
    pub steps: usize,
    pub warnings: Vec<RunWarning>,
    /// Set when the run stopped early; everything above is kept.
    pub error: Option<DynamicsError>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn reduced_energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reduced_energy()).collect()
    }
}

/// Integrates from `initial` to `spec.t_end`, landing exactly on every
/// sample time, and records diagnostics against `reference`.
pub fn run(initial: State, stepper: &mut Stepper, reference: &Reference, spec: &RunSpec) -> Result<Trajectory, DynamicsError> {
    if !(spec.t_end > initial.t) || !(spec.sample_every > 0.0) {
        return Err(DynamicsError::InvalidConfig("need t_end > t0 and sample_every > 0"));
    }
    if let Some(s) = spec.snapshot_every {
        if !(s > 0.0) {
            return Err(DynamicsError::InvalidConfig("snapshot_every must be > 0"));
        }
    }
    let params = *stepper.params();
    let bc = stepper.bc();
    let floor = stepper.config().rho_floor;
    let t0 = initial.t;
    let sample_time = |k: usize| (t0 + k as f64 * spec.sample_every).min(spec.t_end);
    let snap_time = |k: usize| spec.snapshot_every.map(|s| t0 + k as f64 * s);

    let mut records = vec![diagnostics::measure(&initial, reference, &params, bc, floor)];
    let mut snapshots = vec![];
    if spec.snapshot_every.is_some() {
        snapshots.push(initial.clone());
    }
    let mut next_sample = 1;
    let mut next_snap = 1;
    let mut state = initial;
    let mut steps = 0;
    let mut vacuum: Option<RunWarning> = None;
    let mut error = None;

    while state.t < spec.t_end {
        let target = sample_time(next_sample);
        let mut dt = stepper.stable_dt(&state);
        // land on the sample time, without leaving a sliver behind
        if state.t + dt >= target - 1e-9 * dt.min(1.0) {
            dt = target - state.t;
        }
        let prev = state.clone();
        match stepper.step_with(&state, dt) {
            Ok((mut s, info)) => {
                steps += 1;
                if info.floored {
                    match &mut vacuum {
                        Some(RunWarning::Vacuum { steps, .. }) => *steps += 1,
                        None => vacuum = Some(RunWarning::Vacuum { first_t: s.t, steps: 1 }),
                    }
                }
                if s.t >= target - 1e-12 * target.abs().max(1.0) {
                    s.t = target;
                }
                state = s;
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
        if steps == 1 {
            records[0].dt_first_diff = diagnostics::time_difference(&prev, &state, floor);
        }
        if state.t == target {
            let mut rec = diagnostics::measure(&state, reference, &params, bc, floor);
            rec.dt_first_diff = diagnostics::time_difference(&prev, &state, floor);
            records.push(rec);
            next_sample += 1;
        }
        if let Some(ts) = snap_time(next_snap) {
            if state.t >= ts - 1e-12 {
                snapshots.push(state.clone());
                next_snap += 1;
            }
        }
    }
    Ok(Trajectory {
        records,
        snapshots,
        final_state: state,
        steps,
        warnings: vacuum.into_iter().collect(),
        error,
    })
}
