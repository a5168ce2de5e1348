//! Curvature flows and the Newton solver.
//!
//! All flows run in `u`-coordinates. The extended Ricci flow follows
//! `du/dt = Kbar - Ktilde` with the extended curvature and therefore survives
//! degenerate configurations; the ordinary Ricci flow stops with an error the
//! moment a face degenerates. The Calabi flow follows `du/dt = -L (K - Kbar)`
//! with the curvature Jacobian `L` and halts gracefully when the state leaves
//! the admissible region. The Newton solver minimizes the target potential
//! directly.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::curvature::{
    curvature_jacobian, extended_flow_jacobian, state_nondegenerate, vertex_curvature,
    CurvatureError,
};
use crate::energy::{ricci_energy, validate_target, EnergyError};
use crate::hyper::HyperError;
use crate::surface::TriangulatedSurface;
use crate::weights::WeightScheme;
use crate::{Background, ConformalState};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("initial state has degenerate face {0}")]
    DegenerateStart(usize),
    #[error("line search stalled at Newton iteration {iteration}")]
    LineSearchStall { iteration: usize },
    #[error("no convergence after {iterations} Newton iterations (error {final_error:.3e})")]
    MaxIterations { iterations: usize, final_error: f64 },
    #[error("linear solve failed; the system matrix is numerically singular")]
    LinearSolveFailed,
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Hyper(#[from] HyperError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    ExplicitRk4,
    ImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    TMaxReached,
    Diverged,
    DegeneracyHalt,
}

impl std::fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FlowStatus::Converged => "converged",
            FlowStatus::TMaxReached => "t_max_reached",
            FlowStatus::Diverged => "diverged",
            FlowStatus::DegeneracyHalt => "degeneracy_halt",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Convergence threshold on `max |K - Kbar|`.
    pub tol: f64,
    pub method: IntegrationMethod,
    pub max_newton_iter: usize,
    /// Record every n-th accepted step in the trace.
    pub record_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            dt: 0.05,
            t_max: 500.0,
            tol: 1e-9,
            method: IntegrationMethod::ExplicitRk4,
            max_newton_iter: 50,
            record_every: 1,
        }
    }
}

/// Time series of one flow run. Rows are recorded states; the initial state
/// is always row 0 and the final state is always the last row.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
    pub sum_u: Vec<f64>,
    pub status: FlowStatus,
    pub steps: usize,
    pub final_state: ConformalState,
}

impl FlowTrace {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("trace has at least the initial row")
    }
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub state: ConformalState,
    pub iterations: usize,
    pub final_error: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    RicciExtended,
    RicciOrdinary,
    Calabi,
}

struct Ctx<'a> {
    surface: &'a TriangulatedSurface,
    scheme: &'a WeightScheme,
    k_bar: &'a [f64],
    background: Background,
    kind: Kind,
}

/// Largest step component accepted before the step size is halved.
const MAX_STEP_NORM: f64 = 0.1;
/// Step size below which the integrator gives up.
const MIN_DT: f64 = 1e-13;
/// Tolerance of the inner Newton iteration of the implicit integrator.
const IMPLICIT_TOL: f64 = 1e-12;

fn is_degenerate_face(err: &FlowError) -> Option<usize> {
    match err {
        FlowError::Curvature(CurvatureError::DegenerateFace(i)) => Some(*i),
        _ => None,
    }
}

impl Ctx<'_> {
    fn n(&self) -> usize {
        self.surface.vertex_count()
    }

    fn state(&self, u: &[f64]) -> Result<ConformalState, FlowError> {
        ConformalState::from_u_coords(self.background, self.scheme, u).map_err(FlowError::from)
    }

    /// Strictly inside the coordinate box. Hyperbolic scaling coordinates
    /// must stay negative; everything else is unconstrained.
    fn box_ok(&self, u: &[f64]) -> bool {
        if self.background == Background::Hyperbolic {
            for (v, &ui) in u.iter().enumerate() {
                if self.scheme.epsilon(v) == 1 && ui >= -1e-12 {
                    return false;
                }
            }
        }
        true
    }

    fn error_of(&self, u: &[f64]) -> Result<f64, FlowError> {
        let st = self.state(u)?;
        let extended = self.kind == Kind::RicciExtended;
        let field = vertex_curvature(self.surface, self.scheme, &st, extended)?;
        Ok(field.max_deviation(self.k_bar))
    }

    fn velocity(&self, u: &[f64]) -> Result<Vec<f64>, FlowError> {
        let st = self.state(u)?;
        match self.kind {
            Kind::RicciExtended | Kind::RicciOrdinary => {
                let extended = self.kind == Kind::RicciExtended;
                let field = vertex_curvature(self.surface, self.scheme, &st, extended)?;
                Ok(field
                    .values
                    .iter()
                    .zip(self.k_bar)
                    .map(|(k, kb)| kb - k)
                    .collect())
            }
            Kind::Calabi => {
                let field = vertex_curvature(self.surface, self.scheme, &st, false)?;
                let lambda = curvature_jacobian(self.surface, self.scheme, &st, false)?;
                let n = self.n();
                let mut v = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += lambda[(i, j)] * (field.values[j] - self.k_bar[j]);
                    }
                    v[i] = -acc;
                }
                Ok(v)
            }
        }
    }

    /// Velocity with step-control semantics: `Ok(None)` asks the driver to
    /// halve the step (the stage left the coordinate box), hard errors
    /// bubble up.
    fn stage_velocity(&self, u: &[f64]) -> Result<Option<Vec<f64>>, FlowError> {
        if !self.box_ok(u) {
            return Ok(None);
        }
        match self.velocity(u) {
            Ok(v) => Ok(Some(v)),
            Err(FlowError::Hyper(HyperError::Domain { .. })) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn step_jacobian(&self, u: &[f64], dt: f64) -> Result<DMatrix<f64>, FlowError> {
        let st = self.state(u)?;
        let lam = match self.kind {
            Kind::RicciExtended => extended_flow_jacobian(self.surface, self.scheme, &st)?,
            Kind::RicciOrdinary => curvature_jacobian(self.surface, self.scheme, &st, false)?,
            Kind::Calabi => {
                let l = curvature_jacobian(self.surface, self.scheme, &st, false)?;
                &l * &l
            }
        };
        let n = self.n();
        let mut j = lam * dt;
        for i in 0..n {
            j[(i, i)] += 1.0;
        }
        Ok(j)
    }

    fn rk4_du(&self, u: &[f64], dt: f64) -> Result<Option<Vec<f64>>, FlowError> {
        let n = u.len();
        let Some(k1) = self.stage_velocity(u)? else {
            return Ok(None);
        };
        let stage = |k: &[f64], scale: f64| -> Vec<f64> {
            (0..n).map(|i| u[i] + scale * k[i]).collect()
        };
        let Some(k2) = self.stage_velocity(&stage(&k1, 0.5 * dt))? else {
            return Ok(None);
        };
        let Some(k3) = self.stage_velocity(&stage(&k2, 0.5 * dt))? else {
            return Ok(None);
        };
        let Some(k4) = self.stage_velocity(&stage(&k3, dt))? else {
            return Ok(None);
        };
        Ok(Some(
            (0..n)
                .map(|i| dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect(),
        ))
    }

    fn implicit_du(
        &self,
        u: &[f64],
        dt: f64,
        max_iter: usize,
    ) -> Result<Option<Vec<f64>>, FlowError> {
        let n = u.len();
        let Some(f0) = self.stage_velocity(u)? else {
            return Ok(None);
        };
        let mut v: Vec<f64> = (0..n).map(|i| u[i] + dt * f0[i]).collect();
        for _ in 0..max_iter.max(20) {
            let Some(fv) = self.stage_velocity(&v)? else {
                return Ok(None);
            };
            let g: Vec<f64> = (0..n).map(|i| v[i] - u[i] - dt * fv[i]).collect();
            let gnorm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if gnorm < IMPLICIT_TOL {
                return Ok(Some((0..n).map(|i| v[i] - u[i]).collect()));
            }
            let j = self.step_jacobian(&v, dt)?;
            let rhs = DVector::from_column_slice(&g);
            let Some(delta) = solve_linear(j, rhs) else {
                return Err(FlowError::LinearSolveFailed);
            };
            for i in 0..n {
                v[i] -= delta[i];
            }
        }
        Ok(None)
    }

    fn try_step(
        &self,
        u: &[f64],
        dt: f64,
        opts: &FlowOptions,
    ) -> Result<Option<Vec<f64>>, FlowError> {
        let du = match opts.method {
            IntegrationMethod::ExplicitRk4 => self.rk4_du(u, dt)?,
            IntegrationMethod::ImplicitEuler => self.implicit_du(u, dt, opts.max_newton_iter)?,
        };
        let Some(du) = du else {
            return Ok(None);
        };
        let norm = du.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm > MAX_STEP_NORM {
            return Ok(None);
        }
        let next: Vec<f64> = (0..u.len()).map(|i| u[i] + du[i]).collect();
        if !self.box_ok(&next) {
            return Ok(None);
        }
        Ok(Some(du))
    }
}

fn solve_linear(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(&b));
    }
    a.lu().solve(&b)
}

fn run_flow(
    ctx: &Ctx<'_>,
    state0: &ConformalState,
    opts: &FlowOptions,
) -> Result<FlowTrace, FlowError> {
    assert!(opts.dt > 0.0 && opts.t_max > 0.0, "dt and t_max must be positive");
    assert!(opts.record_every >= 1, "record_every must be at least 1");
    validate_target(ctx.surface, ctx.k_bar, ctx.background)?;
    assert_eq!(state0.vertex_count(), ctx.n(), "one factor per vertex");

    let mut u = state0.u_coords(ctx.scheme);
    let err0 = match ctx.error_of(&u) {
        Ok(e) => e,
        Err(e) => match (ctx.kind, is_degenerate_face(&e)) {
            (Kind::Calabi, Some(face)) => return Err(FlowError::DegenerateStart(face)),
            _ => return Err(e),
        },
    };

    let mut trace = FlowTrace {
        times: vec![0.0],
        states: vec![u.clone()],
        errors: vec![err0],
        sum_u: vec![u.iter().sum()],
        status: FlowStatus::TMaxReached,
        steps: 0,
        final_state: state0.clone(),
    };
    if err0 < opts.tol {
        trace.status = FlowStatus::Converged;
        return Ok(trace);
    }

    let mut t = 0.0;
    let mut dt = opts.dt;
    let mut err;
    let mut accepted = 0usize;
    let mut streak = 0usize;
    let mut bad_streak = 0usize;
    let mut last_recorded = 0usize;

    let status = loop {
        if t >= opts.t_max * (1.0 - 1e-15) {
            break FlowStatus::TMaxReached;
        }
        let dt_eff = dt.min(opts.t_max - t);
        let step = match ctx.try_step(&u, dt_eff, opts) {
            Ok(s) => s,
            Err(e) => match (ctx.kind, is_degenerate_face(&e)) {
                (Kind::Calabi, Some(_)) => break FlowStatus::DegeneracyHalt,
                _ => return Err(e),
            },
        };
        let Some(du) = step else {
            dt *= 0.5;
            streak = 0;
            if dt < MIN_DT {
                break FlowStatus::Diverged;
            }
            continue;
        };

        let u_prev = u.clone();
        for i in 0..u.len() {
            u[i] += du[i];
        }
        t += dt_eff;
        err = match ctx.error_of(&u) {
            Ok(e) => e,
            Err(e) => match (ctx.kind, is_degenerate_face(&e)) {
                (Kind::Calabi, Some(_)) => {
                    u = u_prev;
                    break FlowStatus::DegeneracyHalt;
                }
                _ => return Err(e),
            },
        };
        accepted += 1;
        streak += 1;
        if streak >= 10 {
            dt *= 2.0;
            streak = 0;
        }
        if err > 10.0 * err0 {
            bad_streak += 1;
        } else {
            bad_streak = 0;
        }
        if accepted % opts.record_every == 0 {
            trace.times.push(t);
            trace.states.push(u.clone());
            trace.errors.push(err);
            trace.sum_u.push(u.iter().sum());
            last_recorded = accepted;
        }
        if err < opts.tol {
            break FlowStatus::Converged;
        }
        if bad_streak >= 1000 {
            break FlowStatus::Diverged;
        }
    };

    if last_recorded != accepted {
        let final_err = ctx.error_of(&u).unwrap_or(f64::NAN);
        trace.times.push(t);
        trace.states.push(u.clone());
        trace.errors.push(final_err);
        trace.sum_u.push(u.iter().sum());
    }
    trace.status = status;
    trace.steps = accepted;
    trace.final_state = ctx.state(&u)?;
    Ok(trace)
}

/// Ricci flow with the extended curvature: well defined on the whole
/// coordinate box, converges for every feasible target.
pub fn run_extended_ricci(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state0: &ConformalState,
    k_bar: &[f64],
    opts: &FlowOptions,
) -> Result<FlowTrace, FlowError> {
    let ctx = Ctx {
        surface,
        scheme,
        k_bar,
        background: state0.background,
        kind: Kind::RicciExtended,
    };
    run_flow(&ctx, state0, opts)
}

/// Ricci flow with ordinary angles; fails with a `DegenerateFace` error as
/// soon as any face leaves the admissible region.
pub fn run_ordinary_ricci(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state0: &ConformalState,
    k_bar: &[f64],
    opts: &FlowOptions,
) -> Result<FlowTrace, FlowError> {
    let ctx = Ctx {
        surface,
        scheme,
        k_bar,
        background: state0.background,
        kind: Kind::RicciOrdinary,
    };
    run_flow(&ctx, state0, opts)
}

/// Calabi flow `du/dt = -L (K - Kbar)`. Requires a nondegenerate start and
/// halts with `DegeneracyHalt` status if the state later degenerates.
pub fn run_calabi(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state0: &ConformalState,
    k_bar: &[f64],
    opts: &FlowOptions,
) -> Result<FlowTrace, FlowError> {
    let ctx = Ctx {
        surface,
        scheme,
        k_bar,
        background: state0.background,
        kind: Kind::Calabi,
    };
    run_flow(&ctx, state0, opts)
}

fn newton_direction(
    lambda: &DMatrix<f64>,
    g: &[f64],
    background: Background,
) -> Result<Vec<f64>, FlowError> {
    let n = g.len();
    let rhs = DVector::from_iterator(n, g.iter().map(|x| -x));
    let solution = match background {
        Background::Hyperbolic => solve_linear(lambda.clone(), rhs),
        Background::Euclidean => {
            // The Euclidean Jacobian has the all-ones kernel. Shift it away,
            // solve, then project back onto the zero-mean complement so the
            // iteration conserves the total factor.
            let sigma = (lambda.trace() / n as f64).max(1e-8);
            let mut a = lambda.clone();
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] += sigma / n as f64;
                }
            }
            solve_linear(a, rhs).map(|mut d| {
                let mean = d.mean();
                for i in 0..n {
                    d[i] -= mean;
                }
                d
            })
        }
    };
    solution
        .map(|d| d.iter().copied().collect())
        .ok_or(FlowError::LinearSolveFailed)
}

/// Newton iteration on the target potential. Quadratic convergence near the
/// solution; each step is validated by a backtracking line search that keeps
/// the iterate nondegenerate and decreases the extended potential.
pub fn newton_solve(
    surface: &TriangulatedSurface,
    scheme: &WeightScheme,
    state0: &ConformalState,
    k_bar: &[f64],
    opts: &FlowOptions,
) -> Result<NewtonReport, FlowError> {
    let background = state0.background;
    validate_target(surface, k_bar, background)?;
    let n = surface.vertex_count();
    assert_eq!(state0.vertex_count(), n, "one factor per vertex");

    let potential = |u: &[f64]| -> Result<f64, FlowError> {
        let e = ricci_energy(surface, scheme, u, background, true)?;
        let shift: f64 = k_bar.iter().zip(u).map(|(k, ui)| k * ui).sum();
        Ok(e - shift)
    };
    let curvature_at = |u: &[f64]| -> Result<(ConformalState, Vec<f64>), FlowError> {
        let st = ConformalState::from_u_coords(background, scheme, u)?;
        let field = vertex_curvature(surface, scheme, &st, false)?;
        Ok((st, field.values))
    };
    let box_ok = |u: &[f64]| -> bool {
        background == Background::Euclidean
            || u
                .iter()
                .enumerate()
                .all(|(v, &ui)| scheme.epsilon(v) == 0 || ui < -1e-12)
    };

    let mut u = state0.u_coords(scheme);
    let (mut state, mut k) = match curvature_at(&u) {
        Ok(pair) => pair,
        Err(e) => match is_degenerate_face(&e) {
            Some(face) => return Err(FlowError::DegenerateStart(face)),
            None => return Err(e),
        },
    };
    let mut g: Vec<f64> = k.iter().zip(k_bar).map(|(ki, kb)| ki - kb).collect();
    let mut err = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut h_cur = potential(&u)?;
    let mut iterations = 0usize;

    while err >= opts.tol {
        if iterations >= opts.max_newton_iter {
            return Err(FlowError::MaxIterations {
                iterations,
                final_error: err,
            });
        }
        iterations += 1;
        let lambda = curvature_jacobian(surface, scheme, &state, false)?;
        let delta = newton_direction(&lambda, &g, background)?;
        let slope: f64 = g.iter().zip(&delta).map(|(gi, di)| gi * di).sum();
        let mut step = 1.0f64;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(ui, di)| ui + step * di).collect();
            if box_ok(&trial) {
                if let Ok(trial_state) =
                    ConformalState::from_u_coords(background, scheme, &trial)
                {
                    if state_nondegenerate(surface, scheme, &trial_state)
                        .map_err(CurvatureError::from)?
                    {
                        let h_trial = potential(&trial)?;
                        if h_trial <= h_cur + 1e-4 * step * slope {
                            accepted = Some((trial, h_trial));
                            break;
                        }
                    }
                }
            }
            step *= 0.5;
        }
        let Some((trial, h_trial)) = accepted else {
            return Err(FlowError::LineSearchStall {
                iteration: iterations,
            });
        };
        u = trial;
        h_cur = h_trial;
        let (st, kk) = curvature_at(&u)?;
        state = st;
        k = kk;
        g = k.iter().zip(k_bar).map(|(ki, kb)| ki - kb).collect();
        err = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }

    Ok(NewtonReport {
        state,
        iterations,
        final_error: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{calabi_energy, target_potential};
    use crate::surface::tetrahedron_faces;
    use std::f64::consts::PI;

    fn tetra(eps: u8, eta: f64) -> (TriangulatedSurface, WeightScheme) {
        let s = TriangulatedSurface::new(4, &tetrahedron_faces()).unwrap();
        let w = WeightScheme::uniform(&s, eps, eta);
        (s, w)
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn converged_immediately_at_a_fixed_point() {
        let (s, w) = tetra(1, 1.0);
        let state = ConformalState::flat(Background::Euclidean, 4);
        let trace =
            run_extended_ricci(&s, &w, &state, &[PI; 4], &FlowOptions::default()).unwrap();
        assert_eq!(trace.status, FlowStatus::Converged);
        assert_eq!(trace.steps, 0);
        assert_eq!(trace.times.len(), 1);
    }

    #[test]
    fn euclidean_flow_restores_the_round_packing() {
        let (s, w) = tetra(1, 1.0);
        let state =
            ConformalState::new(Background::Euclidean, vec![0.2, -0.1, 0.05, -0.15]);
        let trace =
            run_extended_ricci(&s, &w, &state, &[PI; 4], &FlowOptions::default()).unwrap();
        assert_eq!(trace.status, FlowStatus::Converged);
        assert!(trace.final_error() < 1e-9);
        let sum0 = trace.sum_u[0];
        for &srow in &trace.sum_u {
            assert!(
                (srow - sum0).abs() < 1e-10,
                "total u drifted by {}",
                (srow - sum0).abs()
            );
        }
        for &f in &trace.final_state.f {
            assert!(f.abs() < 1e-6, "expected the round packing, got f = {f}");
        }
    }

    #[test]
    fn hyperbolic_flow_reaches_the_closed_form() {
        let (s, w) = tetra(1, 1.0);
        let state = ConformalState::flat(Background::Hyperbolic, 4);
        let trace =
            run_extended_ricci(&s, &w, &state, &[1.5 * PI; 4], &FlowOptions::default()).unwrap();
        assert_eq!(trace.status, FlowStatus::Converged);
        let expect = 0.5 * (1.0 + 3f64.sqrt()).ln();
        for &f in &trace.final_state.f {
            assert!((f - expect).abs() < 1e-7);
        }
    }

    #[test]
    fn implicit_euler_matches_the_explicit_integrator() {
        let (s, w) = tetra(1, 1.0);
        let state =
            ConformalState::new(Background::Euclidean, vec![0.2, -0.1, 0.05, -0.15]);
        let opts = FlowOptions {
            method: IntegrationMethod::ImplicitEuler,
            ..FlowOptions::default()
        };
        let implicit = run_extended_ricci(&s, &w, &state, &[PI; 4], &opts).unwrap();
        let explicit =
            run_extended_ricci(&s, &w, &state, &[PI; 4], &FlowOptions::default()).unwrap();
        assert_eq!(implicit.status, FlowStatus::Converged);
        assert!(max_abs_diff(&implicit.final_state.f, &explicit.final_state.f) < 1e-6);
    }

    #[test]
    fn step_halving_is_consistent() {
        let (s, w) = tetra(1, 1.0);
        let state =
            ConformalState::new(Background::Euclidean, vec![0.2, -0.1, 0.05, -0.15]);
        let run = |dt: f64| {
            let opts = FlowOptions {
                dt,
                t_max: 0.45,
                tol: 0.0,
                ..FlowOptions::default()
            };
            run_extended_ricci(&s, &w, &state, &[PI; 4], &opts).unwrap()
        };
        let coarse = run(0.05);
        let fine = run(0.025);
        assert_eq!(coarse.status, FlowStatus::TMaxReached);
        assert_eq!(fine.status, FlowStatus::TMaxReached);
        assert!(
            max_abs_diff(
                coarse.states.last().unwrap(),
                fine.states.last().unwrap()
            ) < 1e-5
        );
    }

    #[test]
    fn potential_decreases_along_the_flow() {
        let (s, w) = tetra(1, 1.0);
        let state =
            ConformalState::new(Background::Euclidean, vec![0.3, -0.2, 0.1, -0.2]);
        let k_bar = vec![PI; 4];
        let trace = run_extended_ricci(&s, &w, &state, &k_bar, &FlowOptions::default()).unwrap();
        let mut prev = f64::INFINITY;
        for u in trace.states.iter().step_by(10) {
            let h = target_potential(&s, &w, u, &k_bar, Background::Euclidean, true).unwrap();
            assert!(h <= prev + 1e-10, "potential rose from {prev} to {h}");
            prev = h;
        }
    }

    #[test]
    fn ordinary_flow_fails_where_the_extended_flow_survives() {
        let (s, w) = tetra(1, 2.0);
        let mut f = vec![0.0; 4];
        f[0] = 0.05f64.ln();
        let state = ConformalState::new(Background::Euclidean, f);
        let err = run_ordinary_ricci(&s, &w, &state, &[PI; 4], &FlowOptions::default())
            .unwrap_err();
        assert!(matches!(
            err,
            FlowError::Curvature(CurvatureError::DegenerateFace(_))
        ));
        let trace =
            run_extended_ricci(&s, &w, &state, &[PI; 4], &FlowOptions::default()).unwrap();
        assert_eq!(trace.status, FlowStatus::Converged);
    }

    #[test]
    fn calabi_rejects_a_degenerate_start() {
        let (s, w) = tetra(1, 2.0);
        let mut f = vec![0.0; 4];
        f[0] = 0.05f64.ln();
        let state = ConformalState::new(Background::Euclidean, f);
        let err = run_calabi(&s, &w, &state, &[PI; 4], &FlowOptions::default()).unwrap_err();
        assert!(matches!(err, FlowError::DegenerateStart(_)));
    }

    #[test]
    fn calabi_flow_drives_the_deviation_to_zero() {
        let (s, w) = tetra(1, 1.0);
        let state =
            ConformalState::new(Background::Euclidean, vec![0.2, -0.1, 0.05, -0.15]);
        let k_bar = vec![PI; 4];
        let trace = run_calabi(&s, &w, &state, &k_bar, &FlowOptions::default()).unwrap();
        assert_eq!(trace.status, FlowStatus::Converged);
        let start = calabi_energy(&s, &w, &trace.states[0], &k_bar, Background::Euclidean)
            .unwrap();
        let end = calabi_energy(
            &s,
            &w,
            trace.states.last().unwrap(),
            &k_bar,
            Background::Euclidean,
        )
        .unwrap();
        assert!(end < start * 1e-12);
    }

    #[test]
    fn newton_solves_the_euclidean_problem() {
        let (s, w) = tetra(1, 1.0);
        let state =
            ConformalState::new(Background::Euclidean, vec![0.2, -0.1, 0.05, -0.15]);
        let report = newton_solve(&s, &w, &state, &[PI; 4], &FlowOptions::default()).unwrap();
        assert!(report.iterations <= 10, "took {} iterations", report.iterations);
        assert!(report.final_error < 1e-9);
        let sum0: f64 = state.f.iter().sum();
        let sum1: f64 = report.state.f.iter().sum();
        assert!((sum0 - sum1).abs() < 1e-10);
        for &f in &report.state.f {
            assert!(f.abs() < 1e-8);
        }
    }

    #[test]
    fn newton_solves_the_hyperbolic_problem() {
        let (s, w) = tetra(1, 1.0);
        let state = ConformalState::flat(Background::Hyperbolic, 4);
        let report =
            newton_solve(&s, &w, &state, &[1.5 * PI; 4], &FlowOptions::default()).unwrap();
        assert!(report.iterations <= 10);
        let expect = 0.5 * (1.0 + 3f64.sqrt()).ln();
        for &f in &report.state.f {
            assert!((f - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn flows_reject_infeasible_targets() {
        let (s, w) = tetra(1, 1.0);
        let state = ConformalState::flat(Background::Euclidean, 4);
        let err = run_extended_ricci(&s, &w, &state, &[PI, PI, PI, PI + 0.1], &FlowOptions::default())
            .unwrap_err();
        assert!(matches!(err, FlowError::Energy(EnergyError::BadTarget { .. })));
        let err = newton_solve(&s, &w, &state, &[3.0; 4], &FlowOptions::default()).unwrap_err();
        assert!(matches!(err, FlowError::Energy(EnergyError::BadTarget { .. })));
    }
}
