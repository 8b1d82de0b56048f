//! Finite-difference integration of `u_t = u_xx + f(x, u)` on a truncated
//! line, and the positive stationary state `p` by supersolution relaxation.
//!
//! Time stepping is an IMEX theta-scheme: diffusion weighted by `theta`
//! between levels, reaction explicit at the current iterate. With
//! `theta = 1` the implicit matrix is an M-matrix and, for `dt Lip(f) <= 1`,
//! the update map is monotone, so ordered data stay ordered.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{Interpolation, NodalReaction, PeriodicField, ReactionModel};
use crate::error::{KppError, Result};
use crate::linalg::{CyclicLu, TridiagonalLu};

/// Uniform grid on `[x_min, x_max]` for a medium of period `period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    period: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize, period: f64) -> Result<Self> {
        let grid = Self {
            x_min,
            x_max,
            n_points,
            period,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with `cells_per_period` nodes per period, so `L / dx` is an
    /// integer. `x_max` is rounded to the nearest node.
    pub fn with_cells(
        x_min: f64,
        x_max: f64,
        period: f64,
        cells_per_period: usize,
    ) -> Result<Self> {
        if cells_per_period == 0 || !(period > 0.0) {
            return Err(KppError::InvalidInput(
                "period and cells per period must be positive".into(),
            ));
        }
        let dx = period / cells_per_period as f64;
        let intervals = ((x_max - x_min) / dx).round();
        if !(intervals >= 1.0) {
            return Err(KppError::InvalidInput(format!(
                "grid needs x_max > x_min (got [{x_min}, {x_max}])"
            )));
        }
        let n = intervals as usize + 1;
        Self::new(x_min, x_min + intervals * dx, n, period)
    }

    fn validate(&self) -> Result<()> {
        let Self {
            x_min,
            x_max,
            n_points,
            period,
        } = *self;
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(KppError::InvalidInput(format!(
                "grid needs finite x_max > x_min (got [{x_min}, {x_max}])"
            )));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(KppError::InvalidInput(format!(
                "period must be positive, got {period}"
            )));
        }
        if x_max - x_min < 20.0 * period * (1.0 - 1e-12) {
            return Err(KppError::InvalidInput(format!(
                "grid width {} is below 20 periods ({})",
                x_max - x_min,
                20.0 * period
            )));
        }
        if n_points < 641 {
            return Err(KppError::InvalidInput(format!(
                "grid needs at least 641 points, got {n_points}"
            )));
        }
        if self.dx() > period / 32.0 * (1.0 + 1e-12) {
            return Err(KppError::InvalidInput(format!(
                "dx = {} does not resolve the period (need <= L/32 = {})",
                self.dx(),
                period / 32.0
            )));
        }
        Ok(())
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_points)
            .map(|i| self.x_min + i as f64 * dx)
            .collect()
    }

    /// `L / dx` when it is an integer.
    pub fn cells_per_period(&self) -> Option<usize> {
        let m = self.period / self.dx();
        let r = m.round();
        ((m - r).abs() < 1e-9 * m && r >= 1.0).then_some(r as usize)
    }

    /// Offset of node 0 within the periodic cell, in cells, when nodes sit on
    /// the lattice `dx Z` and `L / dx` is an integer.
    pub fn cell_offset(&self) -> Option<usize> {
        let m = self.cells_per_period()?;
        let k = self.x_min / self.dx();
        let r = k.round();
        ((k - r).abs() < 1e-9 * k.abs().max(1.0)).then(|| (r as i64).rem_euclid(m as i64) as usize)
    }

    /// Index of the node at `x`, if `x` is (to rounding) a node.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let s = (x - self.x_min) / self.dx();
        let r = s.round();
        ((s - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < self.n_points).then_some(r as usize)
    }

    /// Linear interpolation of nodal values at `x` (clamped to the grid).
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        let s = ((x - self.x_min) / self.dx()).clamp(0.0, (self.n_points - 1) as f64);
        let i = (s.floor() as usize).min(self.n_points - 2);
        let w = s - i as f64;
        if w == 0.0 {
            u[i]
        } else {
            u[i] + w * (u[i + 1] - u[i])
        }
    }
}

/// Density profile on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub t: f64,
    pub u: Vec<f64>,
    pub grid: Grid,
}

impl SolutionState {
    pub fn new(grid: Grid, t: f64, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(KppError::InvalidInput(format!(
                "state has {} values for {} nodes",
                u.len(),
                grid.len()
            )));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(KppError::InvalidInput(format!(
                "initial value at node {i} is not finite"
            )));
        }
        Ok(Self { t, u, grid })
    }

    /// Trapezoidal integral of `u`.
    pub fn mass(&self) -> f64 {
        let n = self.u.len();
        let inner: f64 = self.u[1..n - 1].iter().sum();
        self.grid.dx() * (inner + 0.5 * (self.u[0] + self.u[n - 1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LeftBoundary {
    /// `u(x_min) = p(x_min)`
    #[default]
    DirichletP,
    NeumannZero,
}

/// Time-stepping parameters. The right boundary is always `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub theta: f64,
    pub boundary_left: LeftBoundary,
    pub monotone: bool,
}

impl SchemeConfig {
    /// Implicit Euler diffusion with `dt = dx / 4`, monotone mode on.
    pub fn default_for(grid: &Grid) -> Self {
        Self {
            dt: 0.25 * grid.dx(),
            theta: 1.0,
            boundary_left: LeftBoundary::DirichletP,
            monotone: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(KppError::InvalidInput(format!(
                "scheme.dt must be positive, got {}",
                self.dt
            )));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(KppError::InvalidInput(format!(
                "scheme.theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Positive stationary state on a grid.
#[derive(Debug, Clone)]
pub struct StationaryState {
    pub values: Vec<f64>,
    /// one period of `p`, present when the model is periodic
    pub cell: Option<PeriodicField>,
    /// `max |D2 p + f(x, p)|` over the relaxation nodes
    pub residual: f64,
    pub iterations: usize,
}

impl StationaryState {
    pub fn is_periodic(&self) -> bool {
        self.cell.is_some()
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.cell {
            Some(c) => c.sup_norm(),
            None => self.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// `p(x)`; periodic extension for periodic models, linear interpolation
    /// on the grid otherwise.
    pub fn eval(&self, grid: &Grid, x: f64) -> f64 {
        match &self.cell {
            Some(c) => c.eval(x),
            None => grid.interpolate(&self.values, x),
        }
    }
}

pub const DEFAULT_STATIONARY_TOL: f64 = 1e-11;

/// Densities below this are flushed to zero ahead of the front.
pub const FLUSH_FLOOR: f64 = 1e-280;

/// Maximal positive stationary state, relaxed from the constant
/// supersolution `1.1 * sup_x (local capacity)` with Neumann ends.
///
/// Periodic models relax on one cell with periodic ends (`L / dx` nodes) and
/// tile the result; otherwise the whole grid is relaxed.
pub fn stationary_upper(model: &ReactionModel, grid: &Grid, tol: f64) -> Result<StationaryState> {
    if !(tol > 0.0) {
        return Err(KppError::InvalidInput(format!(
            "stationary tolerance must be positive, got {tol}"
        )));
    }
    if model.is_periodic() {
        stationary_periodic(model, grid, tol)
    } else {
        stationary_full(model, grid, tol)
    }
}

fn relaxation_dt(nodal: &NodalReaction, sup: f64) -> Result<f64> {
    let lip = nodal.lipschitz_bound(sup);
    if !(lip.is_finite()) {
        return Err(KppError::InvalidInput(
            "reaction Lipschitz bound is not finite".into(),
        ));
    }
    Ok(0.5 / lip.max(1e-3))
}

/// Iterates `u <- solve(u + dt f(u))` until `|u_t| < tol`; `solve` applies
/// `(I - dt D2)^{-1}` in place.
fn relax(
    u: &mut [f64],
    nodal: &NodalReaction,
    dt: f64,
    tol: f64,
    mut solve: impl FnMut(&mut [f64]),
) -> Result<usize> {
    let mut next = vec![0.0; u.len()];
    const MAX_ITERATIONS: usize = 2_000_000;
    for it in 1..=MAX_ITERATIONS {
        for (i, (n, v)) in next.iter_mut().zip(u.iter()).enumerate() {
            *n = v + dt * nodal.eval(i, *v);
        }
        solve(&mut next);
        let mut rate: f64 = 0.0;
        for (n, v) in next.iter().zip(u.iter()) {
            if !n.is_finite() {
                return Err(KppError::BlowUp { t: it as f64 * dt });
            }
            let inc = n - v;
            if inc > 1e-8 {
                return Err(KppError::NotMonotone(format!(
                    "stationary relaxation increased by {inc:.3e} at iteration {it}"
                )));
            }
            rate = rate.max(inc.abs() / dt);
        }
        u.copy_from_slice(&next);
        if rate < tol {
            return Ok(it);
        }
    }
    Err(KppError::Internal(format!(
        "stationary relaxation did not reach {tol:e} in {MAX_ITERATIONS} iterations"
    )))
}

fn stationary_periodic(model: &ReactionModel, grid: &Grid, tol: f64) -> Result<StationaryState> {
    let period = grid.period();
    let n = grid
        .cells_per_period()
        .unwrap_or_else(|| (period / grid.dx()).round() as usize);
    let h = period / n as f64;
    let xs: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
    let nodal = model.on_nodes(&xs);
    let sup = 1.1
        * xs.iter()
            .map(|&x| model.local_capacity(x))
            .fold(0.0, f64::max);
    if !(sup > 0.0) || !sup.is_finite() {
        return Err(KppError::InvalidInput(
            "model has no positive capacity".into(),
        ));
    }
    let dt = relaxation_dt(&nodal, sup)?;
    let a = dt / (h * h);
    let factor = CyclicLu::new(&vec![-a; n], &vec![1.0 + 2.0 * a; n], &vec![-a; n])?;
    let mut p = vec![sup; n];
    let iterations = relax(&mut p, &nodal, dt, tol, |v| factor.solve_in_place(v))?;
    let residual = (0..n)
        .map(|i| {
            let d2 = (p[(i + n - 1) % n] - 2.0 * p[i] + p[(i + 1) % n]) / (h * h);
            (d2 + nodal.eval(i, p[i])).abs()
        })
        .fold(0.0, f64::max);
    let cell = PeriodicField::new(period, p, Interpolation::Cubic)?;
    let values = match grid.cell_offset() {
        Some(off) if grid.cells_per_period() == Some(n) => (0..grid.len())
            .map(|i| cell.samples()[(off + i) % n])
            .collect(),
        _ => grid.nodes().iter().map(|&x| cell.eval(x)).collect(),
    };
    Ok(StationaryState {
        values,
        cell: Some(cell),
        residual,
        iterations,
    })
}

fn stationary_full(model: &ReactionModel, grid: &Grid, tol: f64) -> Result<StationaryState> {
    let xs = grid.nodes();
    let n = xs.len();
    let h = grid.dx();
    let nodal = model.on_nodes(&xs);
    let sup = 1.1
        * xs.iter()
            .map(|&x| model.local_capacity(x))
            .fold(0.0, f64::max);
    if !(sup > 0.0) || !sup.is_finite() {
        return Err(KppError::InvalidInput(
            "model has no positive capacity".into(),
        ));
    }
    let dt = relaxation_dt(&nodal, sup)?;
    let a = dt / (h * h);
    let (sub, diag, sup_band) = neumann_bands(n, a);
    let factor = TridiagonalLu::new(&sub, &diag, &sup_band)?;
    let mut p = vec![sup; n];
    let iterations = relax(&mut p, &nodal, dt, tol, |v| factor.solve_in_place(v))?;
    let residual = (0..n)
        .map(|i| {
            let left = if i == 0 { p[1] } else { p[i - 1] };
            let right = if i + 1 == n { p[n - 2] } else { p[i + 1] };
            ((left - 2.0 * p[i] + right) / (h * h) + nodal.eval(i, p[i])).abs()
        })
        .fold(0.0, f64::max);
    Ok(StationaryState {
        values: p,
        cell: None,
        residual,
        iterations,
    })
}

/// Bands of `I - a D2` with reflecting ghosts at both ends.
fn neumann_bands(n: usize, a: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut sub = vec![-a; n];
    let diag = vec![1.0 + 2.0 * a; n];
    let mut sup = vec![-a; n];
    sup[0] = -2.0 * a;
    sub[n - 1] = -2.0 * a;
    (sub, diag, sup)
}

/// Pre-factored time stepper for one grid, model and scheme.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    scheme: SchemeConfig,
    nodal: NodalReaction,
    lu: TridiagonalLu,
    left_value: f64,
    right_value: f64,
    u_cap: f64,
    stationary: Arc<StationaryState>,
}

impl Stepper {
    /// Builds the stepper; `stationary` is computed when not supplied.
    pub fn new(
        grid: Grid,
        model: &ReactionModel,
        scheme: SchemeConfig,
        stationary: Option<Arc<StationaryState>>,
    ) -> Result<Self> {
        scheme.validate()?;
        let stationary = match stationary {
            Some(s) => {
                if s.values.len() != grid.len() {
                    return Err(KppError::InvalidInput(
                        "stationary state does not match the grid".into(),
                    ));
                }
                s
            }
            None => Arc::new(stationary_upper(model, &grid, DEFAULT_STATIONARY_TOL)?),
        };
        let xs = grid.nodes();
        let nodal = model.on_nodes(&xs);
        let u_cap = if model.is_periodic() {
            let n = grid.cells_per_period().unwrap_or(64).max(64);
            (0..n)
                .map(|j| model.local_capacity(j as f64 * grid.period() / n as f64))
                .fold(0.0, f64::max)
        } else {
            xs.iter()
                .map(|&x| model.local_capacity(x))
                .fold(0.0, f64::max)
        }
        .max(stationary.values.iter().copied().fold(0.0, f64::max));
        let dx = grid.dx();
        let a = scheme.dt / (dx * dx);
        if scheme.monotone {
            let lip = nodal.lipschitz_bound(u_cap);
            if scheme.theta < 1.0 && scheme.dt > 0.5 * dx * dx {
                return Err(KppError::NotMonotone(format!(
                    "theta = {} needs dt <= dx^2/2 = {:.3e}, got {:.3e}",
                    scheme.theta,
                    0.5 * dx * dx,
                    scheme.dt
                )));
            }
            if 2.0 * (1.0 - scheme.theta) * a + scheme.dt * lip > 1.0 {
                return Err(KppError::NotMonotone(format!(
                    "dt = {:.3e} with reaction Lipschitz bound {lip:.3} (need dt Lip < 1)",
                    scheme.dt
                )));
            }
        }
        let n = grid.len();
        let ta = scheme.theta * a;
        let mut sub = vec![-ta; n];
        let mut diag = vec![1.0 + 2.0 * ta; n];
        let mut sup = vec![-ta; n];
        match scheme.boundary_left {
            LeftBoundary::DirichletP => {
                diag[0] = 1.0;
                sup[0] = 0.0;
            }
            LeftBoundary::NeumannZero => sup[0] = -2.0 * ta,
        }
        sub[n - 1] = 0.0;
        diag[n - 1] = 1.0;
        let lu = TridiagonalLu::new(&sub, &diag, &sup)?;
        let left_value = stationary.values[0];
        Ok(Self {
            grid,
            scheme,
            nodal,
            lu,
            left_value,
            right_value: 0.0,
            u_cap,
            stationary,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.scheme.dt
    }

    pub fn stationary(&self) -> &Arc<StationaryState> {
        &self.stationary
    }

    /// Clamp ceiling used in monotone mode.
    pub fn u_cap(&self) -> f64 {
        self.u_cap
    }

    /// Dirichlet value at `x_max`; zero unless changed.
    pub fn set_right_value(&mut self, v: f64) {
        self.right_value = v;
    }

    /// The same stepper with a different time step.
    pub fn with_dt(&self, model: &ReactionModel, dt: f64) -> Result<Self> {
        let mut s = Self::new(
            self.grid,
            model,
            SchemeConfig { dt, ..self.scheme },
            Some(Arc::clone(&self.stationary)),
        )?;
        s.right_value = self.right_value;
        Ok(s)
    }

    /// Advances `state` by one time step in place.
    pub fn step(&self, state: &mut SolutionState) -> Result<()> {
        let u = &mut state.u;
        let n = u.len();
        if n != self.grid.len() {
            return Err(KppError::InvalidInput(
                "state does not match the stepper grid".into(),
            ));
        }
        let dt = self.scheme.dt;
        let dx = self.grid.dx();
        let ea = (1.0 - self.scheme.theta) * dt / (dx * dx);
        let left_rhs = match self.scheme.boundary_left {
            LeftBoundary::DirichletP => self.left_value,
            LeftBoundary::NeumannZero => {
                u[0] + dt * self.nodal.eval(0, u[0]) + 2.0 * ea * (u[1] - u[0])
            }
        };
        if ea == 0.0 {
            for (i, v) in u.iter_mut().enumerate().take(n - 1).skip(1) {
                *v += dt * self.nodal.eval(i, *v);
            }
        } else {
            let mut prev = u[0];
            for i in 1..n - 1 {
                let cur = u[i];
                u[i] = cur + dt * self.nodal.eval(i, cur) + ea * (prev - 2.0 * cur + u[i + 1]);
                prev = cur;
            }
        }
        u[0] = left_rhs;
        u[n - 1] = self.right_value;
        self.lu.solve_in_place_flushed(u, FLUSH_FLOOR);
        if self.scheme.monotone {
            for v in u.iter_mut() {
                *v = v.clamp(0.0, self.u_cap);
            }
        }
        state.t += dt;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(KppError::BlowUp { t: state.t });
        }
        Ok(())
    }
}

/// One step from scratch: builds a [`Stepper`] (including the stationary
/// state when the left boundary needs it). Use a `Stepper` for repeated steps.
pub fn step(
    state: &SolutionState,
    model: &ReactionModel,
    scheme: &SchemeConfig,
) -> Result<SolutionState> {
    let stepper = Stepper::new(state.grid, model, *scheme, None)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// Probes evaluated during [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observer {
    /// full profile every `every` time units, plus the initial one
    Snapshots { every: f64 },
    /// front position at `level` and mass every `every` time units
    Trace { every: f64, level: f64 },
    /// first time `u(t, x_k) >= level` at each station, sampled every step
    Stations { positions: Vec<f64>, level: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    /// rightmost crossing of the trace level; `None` when not attained
    pub front_pos: Option<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationHit {
    pub position: f64,
    /// `None` when the station was not reached by the end of the run
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationLog {
    pub snapshots: Vec<Snapshot>,
    pub trace: Vec<TraceRecord>,
    pub hits: Vec<StationHit>,
}

impl ObservationLog {
    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty() && self.trace.is_empty() && self.hits.is_empty()
    }
}

/// Rightmost `x` where nodal data cross `level` downward, by linear
/// interpolation between the bracketing nodes.
pub(crate) fn rightmost_crossing(grid: &Grid, u: &[f64], level: f64) -> Option<f64> {
    let i = u.iter().rposition(|&v| v >= level)?;
    if i + 1 == u.len() {
        return None;
    }
    let (a, b) = (u[i], u[i + 1]);
    let w = if a == b { 0.0 } else { (a - level) / (a - b) };
    Some(grid.x(i) + w * grid.dx())
}

/// Linear-in-time first passage between two samples.
pub(crate) fn passage_time(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        t1
    } else {
        t0 + (t1 - t0) * ((level - v0) / (v1 - v0)).clamp(0.0, 1.0)
    }
}

struct Cadence {
    t0: f64,
    every: f64,
    next: u64,
}

impl Cadence {
    fn new(t0: f64, every: f64) -> Self {
        Self { t0, every, next: 0 }
    }

    /// True when `t` reached the next scheduled time; advances the schedule.
    fn due(&mut self, t: f64, dt: f64) -> bool {
        let target = self.t0 + self.next as f64 * self.every;
        if t >= target - 1e-6 * dt {
            while self.t0 + self.next as f64 * self.every <= t + 1e-6 * dt {
                self.next += 1;
            }
            true
        } else {
            false
        }
    }
}

struct Probes<'a> {
    observers: &'a [Observer],
    cadences: Vec<Option<Cadence>>,
    stations: Vec<Vec<(f64, Option<f64>)>>,
    last: Option<(f64, Vec<Vec<f64>>)>,
    log: ObservationLog,
}

impl<'a> Probes<'a> {
    fn new(observers: &'a [Observer], t0: f64) -> Result<Self> {
        let mut cadences = Vec::new();
        let mut stations = Vec::new();
        for o in observers {
            match o {
                Observer::Snapshots { every } | Observer::Trace { every, .. } => {
                    if !(*every > 0.0) || !every.is_finite() {
                        return Err(KppError::InvalidInput(format!(
                            "observer cadence must be positive, got {every}"
                        )));
                    }
                    cadences.push(Some(Cadence::new(t0, *every)));
                    stations.push(Vec::new());
                }
                Observer::Stations { positions, .. } => {
                    cadences.push(None);
                    stations.push(positions.iter().map(|&x| (x, None)).collect());
                }
            }
        }
        Ok(Self {
            observers,
            cadences,
            stations,
            last: None,
            log: ObservationLog::default(),
        })
    }

    fn observe(&mut self, state: &SolutionState, dt: f64) {
        let mut current = Vec::new();
        for (k, o) in self.observers.iter().enumerate() {
            match o {
                Observer::Snapshots { .. } => {
                    if self.cadences[k]
                        .as_mut()
                        .is_some_and(|c| c.due(state.t, dt))
                    {
                        self.log.snapshots.push(Snapshot {
                            t: state.t,
                            u: state.u.clone(),
                        });
                    }
                    current.push(Vec::new());
                }
                Observer::Trace { level, .. } => {
                    if self.cadences[k]
                        .as_mut()
                        .is_some_and(|c| c.due(state.t, dt))
                    {
                        self.log.trace.push(TraceRecord {
                            t: state.t,
                            front_pos: rightmost_crossing(&state.grid, &state.u, *level),
                            mass: state.mass(),
                        });
                    }
                    current.push(Vec::new());
                }
                Observer::Stations { level, .. } => {
                    let values: Vec<f64> = self.stations[k]
                        .iter()
                        .map(|(x, _)| state.grid.interpolate(&state.u, *x))
                        .collect();
                    for (j, (_, hit)) in self.stations[k].iter_mut().enumerate() {
                        if hit.is_some() || values[j] < *level {
                            continue;
                        }
                        *hit = Some(match &self.last {
                            Some((t_prev, prev)) => {
                                passage_time(*t_prev, prev[k][j], state.t, values[j], *level)
                            }
                            None => state.t,
                        });
                    }
                    current.push(values);
                }
            }
        }
        self.last = Some((state.t, current));
    }

    fn finish(mut self) -> ObservationLog {
        for s in self.stations.into_iter() {
            self.log.hits.extend(
                s.into_iter()
                    .map(|(position, time)| StationHit { position, time }),
            );
        }
        self.log
    }
}

/// Steps from `state.t` to `t_end`, evaluating `observers` along the way.
/// The last step is shortened when `t_end - t` is not a multiple of `dt`.
pub fn run(
    mut state: SolutionState,
    model: &ReactionModel,
    stepper: &Stepper,
    t_end: f64,
    observers: &[Observer],
) -> Result<(SolutionState, ObservationLog)> {
    if !(t_end >= state.t) {
        return Err(KppError::InvalidInput(format!(
            "t_end = {t_end} precedes the state time {}",
            state.t
        )));
    }
    if t_end == state.t {
        return Ok((state, ObservationLog::default()));
    }
    let dt = stepper.dt();
    let t0 = state.t;
    let span = t_end - t0;
    let full = (span / dt * (1.0 + 1e-12)).floor() as u64;
    let remainder = span - full as f64 * dt;
    let mut probes = Probes::new(observers, t0)?;
    probes.observe(&state, dt);
    for k in 1..=full {
        stepper.step(&mut state)?;
        state.t = t0 + k as f64 * dt;
        probes.observe(&state, dt);
    }
    if remainder > 1e-9 * dt {
        stepper.with_dt(model, remainder)?.step(&mut state)?;
        state.t = t_end;
        probes.observe(&state, dt);
    }
    Ok((state, probes.finish()))
}

/// Initial data library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `min(height, p)` on `[a, b]`, zero elsewhere, smoothed by one explicit
    /// diffusion step of size `dx^2 / 4`
    Bump {
        a: f64,
        b: f64,
        height: f64,
    },
    /// `min(p(x), amplitude * exp(-rate * x))`
    ExpTail {
        amplitude: f64,
        rate: f64,
    },
    /// `p(x)` for `x < a`, zero beyond
    Heaviside {
        a: f64,
    },
    Zero,
}

impl InitialData {
    pub fn build(&self, grid: &Grid, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != grid.len() {
            return Err(KppError::InvalidInput(
                "stationary state does not match the grid".into(),
            ));
        }
        let xs = grid.nodes();
        Ok(match *self {
            Self::Bump { a, b, height } => {
                if !(b > a) || !(height > 0.0) {
                    return Err(KppError::InvalidInput(format!(
                        "bump needs a < b and height > 0 (got [{a}, {b}], {height})"
                    )));
                }
                let raw: Vec<f64> = xs
                    .iter()
                    .zip(p)
                    .map(|(&x, &pv)| {
                        if x >= a && x <= b {
                            height.min(pv)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let n = raw.len();
                (0..n)
                    .map(|i| {
                        let l = if i == 0 { raw[0] } else { raw[i - 1] };
                        let r = if i + 1 == n { raw[n - 1] } else { raw[i + 1] };
                        (0.25 * l + 0.5 * raw[i] + 0.25 * r).min(p[i])
                    })
                    .collect()
            }
            Self::ExpTail { amplitude, rate } => {
                if !(amplitude > 0.0) || !(rate > 0.0) {
                    return Err(KppError::InvalidInput(
                        "exponential tail needs positive amplitude and rate".into(),
                    ));
                }
                xs.iter()
                    .zip(p)
                    .map(|(&x, &pv)| pv.min(amplitude * (-rate * x).exp()))
                    .collect()
            }
            Self::Heaviside { a } => xs
                .iter()
                .zip(p)
                .map(|(&x, &pv)| if x < a { pv } else { 0.0 })
                .collect(),
            Self::Zero => vec![0.0; xs.len()],
        })
    }
}
