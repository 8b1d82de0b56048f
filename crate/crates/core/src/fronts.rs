//! Pulsating travelling waves `U_c` extracted from long Cauchy runs.
//!
//! A pulsating wave of speed `c` in a medium of period `L` satisfies
//! `U(t + T, x) = U(t, x - L)` with `T = L / c`. The profile is stored as
//! `n_phase` snapshots `U(j T / n_phase, .)` on one spatial window and
//! normalised so that `U(0, 0) = p(0) / 2`.
//!
//! Runs use a window that is moved forward by whole periods (exact for a
//! periodic medium). For `c = c*` the datum is `H(-x) p(x)`; for `c > c*`
//! it is `min(p, phi e^{-lambda_c x})` and the right end carries the exact
//! solution `phi(x) e^{-lambda_c (x - c t)}` of the linearised problem, so the
//! selected speed is not eroded by truncation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{PeriodicField, ReactionModel};
use crate::error::{KppError, Result};
use crate::floquet::{lambda_roots, DispersionData};
use crate::linalg::fit_line;
use crate::solver::{
    passage_time, rightmost_crossing, stationary_upper, Grid, LeftBoundary, SchemeConfig,
    SolutionState, StationaryState, Stepper, DEFAULT_STATIONARY_TOL,
};

pub const DEFAULT_N_PHASE: usize = 16;
pub const DEFAULT_TOL_FRONT: f64 = 1e-3;

/// Speeds this close to `c*` are snapped to it.
pub const SPEED_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontOptions {
    pub cells_per_period: usize,
    pub n_phase: usize,
    /// shape tolerance relative to `sup p`; a run that ends above it fails
    pub tol_front: f64,
    /// the run stops early once the shape residual falls below this
    /// (relative to `sup p`); otherwise it continues to the horizon
    pub settle_tol: f64,
    /// window extent behind the front, in periods
    pub behind: f64,
    /// minimal window extent ahead of the front, in periods; widened to
    /// `40 / lambda` for slowly decaying tails
    pub ahead: f64,
    /// target time step as a fraction of `dx`
    pub dt_factor: f64,
    /// keep running at least this long before testing convergence
    pub min_time: f64,
}

impl Default for FrontOptions {
    fn default() -> Self {
        Self {
            cells_per_period: 64,
            n_phase: DEFAULT_N_PHASE,
            tol_front: DEFAULT_TOL_FRONT,
            settle_tol: 1e-5,
            behind: 40.0,
            ahead: 40.0,
            dt_factor: 0.25,
            min_time: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub lambda_fit: f64,
    pub b_c: f64,
    /// root-mean-square residual of the log-linear fit
    pub rms_log_residual: f64,
    pub window: (f64, f64),
}

/// Pulsating wave profile, immutable once built.
#[derive(Debug, Clone)]
pub struct FrontProfile {
    pub c: f64,
    /// time period `L / c`
    pub period_time: f64,
    pub period: f64,
    pub dx: f64,
    /// coordinate of node 0 of every phase array
    pub x_min: f64,
    /// `phases[j][i] = U(j T / n_phase, x_min + i dx)`
    pub phases: Vec<Vec<f64>>,
    /// one period of the stationary state, used left of the window
    pub p: PeriodicField,
    /// decay rate `lambda_c` (`lambda*` at the minimal speed)
    pub lambda: f64,
    /// `phi_lambda`, normalised to `max = 1`
    pub phi: PeriodicField,
    pub is_minimal: bool,
    /// last shape residual `|u(t + T, .) - u(t, . - L)|_inf` of the run
    pub convergence_residual: f64,
    /// speed measured from station hitting times in the run
    pub measured_speed: f64,
    /// time the run needed
    pub run_time: f64,
}

impl FrontProfile {
    /// Profile from given phase arrays; no run, no normalisation.
    #[allow(clippy::too_many_arguments)]
    pub fn from_phases(
        c: f64,
        period: f64,
        dx: f64,
        x_min: f64,
        phases: Vec<Vec<f64>>,
        p: PeriodicField,
        lambda: f64,
        phi: PeriodicField,
    ) -> Result<Self> {
        if !(c > 0.0)
            || phases.is_empty()
            || phases
                .iter()
                .any(|ph| ph.len() != phases[0].len() || ph.len() < 2)
        {
            return Err(KppError::InvalidInput(
                "profile needs c > 0 and equally sized phases".into(),
            ));
        }
        Ok(Self {
            c,
            period_time: period / c,
            period,
            dx,
            x_min,
            phases,
            p,
            lambda,
            phi,
            is_minimal: false,
            convergence_residual: f64::NAN,
            measured_speed: f64::NAN,
            run_time: 0.0,
        })
    }

    pub fn n_phase(&self) -> usize {
        self.phases.len()
    }

    pub fn len(&self) -> usize {
        self.phases[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases[0].is_empty()
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + (self.len() - 1) as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.x_min + i as f64 * self.dx)
            .collect()
    }

    /// `p(0) / 2`.
    pub fn level(&self) -> f64 {
        0.5 * self.p.eval(0.0)
    }

    pub fn sup_p(&self) -> f64 {
        self.p.sup_norm()
    }

    /// Phase `j` at `x`; `p` to the left of the window, zero to the right.
    /// Phase `n_phase` is phase 0 moved one period forward.
    fn phase_value(&self, j: usize, x: f64) -> f64 {
        let (arr, x) = if j == self.n_phase() {
            (&self.phases[0], x - self.period)
        } else {
            (&self.phases[j], x)
        };
        let s = (x - self.x_min) / self.dx;
        let last = (arr.len() - 1) as f64;
        if s < 0.0 {
            return self.p.eval(x);
        }
        if s > last {
            return 0.0;
        }
        let i = (s.floor() as usize).min(arr.len() - 2);
        let w = s - i as f64;
        if w == 0.0 {
            arr[i]
        } else {
            arr[i] + w * (arr[i + 1] - arr[i])
        }
    }

    /// `U(t, x)` for any real `t`, using `U(t + kT, x) = U(t, x - kL)` and
    /// linear interpolation between phases.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let tp = self.period_time;
        let mut k = (t / tp).floor();
        let mut tau = t - k * tp;
        if tau >= tp {
            k += 1.0;
            tau -= tp;
        }
        let y = x - k * self.period;
        let s = tau / tp * self.n_phase() as f64;
        let j = (s.floor() as usize).min(self.n_phase() - 1);
        let w = s - j as f64;
        let a = self.phase_value(j, y);
        if w == 0.0 {
            a
        } else {
            a + w * (self.phase_value(j + 1, y) - a)
        }
    }

    /// `U(t, .)` on the nodes of `grid`.
    pub fn sample(&self, t: f64, grid: &Grid) -> Vec<f64> {
        grid.nodes().iter().map(|&x| self.eval(t, x)).collect()
    }

    /// Time in `(-T, T]` closest to zero at which `U(., 0)` crosses the
    /// level upward.
    fn anchor_time(&self) -> Result<f64> {
        let level = self.level();
        let n = self.n_phase() as i64;
        let h = self.period_time / n as f64;
        let g = |k: i64| self.eval(k as f64 * h, 0.0) - level;
        if g(0) == 0.0 {
            return Ok(0.0);
        }
        let mut best: Option<f64> = None;
        for k in -n..n {
            let (a, b) = (g(k), g(k + 1));
            if a < 0.0 && b >= 0.0 {
                let tau = (k as f64 + a / (a - b)) * h;
                if best.is_none_or(|t| tau.abs() < t.abs()) {
                    best = Some(tau);
                }
            }
        }
        best.ok_or_else(|| {
            KppError::LevelNotAttained(format!("U(., 0) does not cross p(0)/2 = {level}"))
        })
    }

    /// Re-normalises so that `U(0, 0) = p(0) / 2`; the identity on an
    /// already anchored profile.
    pub fn anchored(&self) -> Result<Self> {
        let tau = self.anchor_time()?;
        if tau == 0.0 {
            return Ok(self.clone());
        }
        let xs = self.nodes();
        let h = self.period_time / self.n_phase() as f64;
        let phases = (0..self.n_phase())
            .map(|j| {
                xs.iter()
                    .map(|&x| self.eval(tau + j as f64 * h, x))
                    .collect()
            })
            .collect();
        Ok(Self {
            phases,
            ..self.clone()
        })
    }

    /// Window `[z_lo, z_hi]` on phase 0 where `1e-8 < U < 1e-2 sup p`,
    /// starting ahead of the anchor.
    pub fn default_tail_window(&self) -> Result<(f64, f64)> {
        let u = &self.phases[0];
        let hi_level = 1e-2 * self.sup_p();
        let lo_level = 1e-8;
        let start = u
            .iter()
            .enumerate()
            .position(|(i, &v)| self.x_min + i as f64 * self.dx >= 0.0 && v < hi_level)
            .ok_or_else(|| {
                KppError::TailUnderflow("profile never drops below 1e-2 sup p".into())
            })?;
        let end = u[start..]
            .iter()
            .position(|&v| v <= lo_level)
            .map(|k| start + k - 1)
            .ok_or_else(|| {
                KppError::InsufficientData(
                    "profile tail does not reach 1e-8 inside the window".into(),
                )
            })?;
        if end <= start + 8 {
            return Err(KppError::InsufficientData(
                "tail window holds too few nodes".into(),
            ));
        }
        // stay one period clear of both ends of the region
        let z_lo = self.x_min + start as f64 * self.dx + self.period;
        let z_hi = self.x_min + end as f64 * self.dx - self.period;
        Ok((z_lo, z_hi.max(z_lo + self.dx)))
    }
}

/// Least-squares fit of `ln(U / phi_lambda)` against `z` on phase 0.
pub fn tail_fit(profile: &FrontProfile, window: (f64, f64)) -> Result<TailFit> {
    let (z_lo, z_hi) = window;
    if !(z_hi > z_lo) {
        return Err(KppError::InvalidInput(format!(
            "tail window needs z_lo < z_hi (got [{z_lo}, {z_hi}])"
        )));
    }
    let mut zs = Vec::new();
    let mut ys = Vec::new();
    for (i, &u) in profile.phases[0].iter().enumerate() {
        let z = profile.x_min + i as f64 * profile.dx;
        if z < z_lo || z > z_hi {
            continue;
        }
        if !(u > 1e-280) {
            return Err(KppError::TailUnderflow(format!(
                "U({z:.3}) = {u:e} is at the floating-point floor"
            )));
        }
        zs.push(z);
        ys.push((u / profile.phi.eval(z)).ln());
    }
    if zs.len() < 3 {
        return Err(KppError::InsufficientData(format!(
            "tail window holds {} nodes",
            zs.len()
        )));
    }
    let (slope, intercept, _, _) = fit_line(&zs, &ys)?;
    let rms = (zs
        .iter()
        .zip(&ys)
        .map(|(z, y)| (y - intercept - slope * z).powi(2))
        .sum::<f64>()
        / zs.len() as f64)
        .sqrt();
    Ok(TailFit {
        lambda_fit: -slope,
        b_c: intercept.exp(),
        rms_log_residual: rms,
        window,
    })
}

fn stationary_on(grid: &Grid, cell: &PeriodicField) -> Arc<StationaryState> {
    let values = match grid.cell_offset() {
        Some(off) if grid.cells_per_period() == Some(cell.len()) => (0..grid.len())
            .map(|i| cell.samples()[(off + i) % cell.len()])
            .collect(),
        _ => grid.nodes().iter().map(|&x| cell.eval(x)).collect(),
    };
    Arc::new(StationaryState {
        values,
        cell: Some(cell.clone()),
        residual: 0.0,
        iterations: 0,
    })
}

/// Steps per period: a multiple of `n_phase` with `dt <= dt_factor dx`.
fn steps_per_period(period_time: f64, dx: f64, dt_factor: f64, n_phase: usize) -> usize {
    let per_phase = (period_time / (n_phase as f64 * dt_factor * dx))
        .ceil()
        .max(1.0) as usize;
    per_phase * n_phase
}

/// Builds the pulsating wave of speed `c` (snapped to `c*` within
/// [`SPEED_SNAP`]) for a periodic model.
pub fn compute_front(
    model: &ReactionModel,
    c: f64,
    disp: &DispersionData,
    options: &FrontOptions,
    horizon: f64,
) -> Result<FrontProfile> {
    if !model.is_periodic() {
        return Err(KppError::InvalidInput(
            "pulsating fronts need a periodic model".into(),
        ));
    }
    if !c.is_finite() || c < disp.c_star - SPEED_SNAP {
        return Err(KppError::NoSubcriticalFront {
            c,
            c_star: disp.c_star,
        });
    }
    if options.n_phase == 0 || options.cells_per_period < 32 || !(options.tol_front > 0.0) {
        return Err(KppError::InvalidInput(
            "front options need n_phase >= 1, >= 32 cells per period, tol > 0".into(),
        ));
    }
    let is_minimal = (c - disp.c_star).abs() <= SPEED_SNAP;
    let c = if is_minimal { disp.c_star } else { c };
    let lambda = if is_minimal {
        disp.lambda_star
    } else {
        lambda_roots(disp, c)?.0
    };
    let phi = disp.eigen(lambda)?.phi;

    let period = model.period();
    let m = options.cells_per_period;
    let ahead = options.ahead.max(40.0 / (lambda * period));
    let grid = Grid::with_cells(-options.behind * period, ahead * period, period, m)?;
    let dx = grid.dx();
    let stationary = Arc::new(stationary_upper(model, &grid, DEFAULT_STATIONARY_TOL)?);
    let p_cell = stationary
        .cell
        .clone()
        .ok_or_else(|| KppError::Internal("periodic model without cell".into()))?;
    let level = 0.5 * p_cell.samples()[0];

    let period_time = period / c;
    let spp = steps_per_period(period_time, dx, options.dt_factor, options.n_phase);
    let dt = period_time / spp as f64;
    let scheme = SchemeConfig {
        dt,
        theta: 1.0,
        boundary_left: LeftBoundary::DirichletP,
        monotone: true,
    };
    let mut stepper = Stepper::new(grid, model, scheme, Some(Arc::clone(&stationary)))?;

    let xs = grid.nodes();
    let u0: Vec<f64> = if is_minimal {
        xs.iter()
            .zip(&stationary.values)
            .map(|(&x, &p)| if x < 0.0 { p } else { 0.0 })
            .collect()
    } else {
        xs.iter()
            .zip(&stationary.values)
            .map(|(&x, &p)| p.min(phi.eval(x) * (-lambda * x).exp()))
            .collect()
    };
    let mut state = SolutionState::new(grid, 0.0, u0)?;
    let x_right = grid.x_max();
    let phi_right = phi.eval(x_right);
    // lab x = grid x + offset * L
    let mut offset: i64 = 0;
    let right_value = |t: f64, offset: i64| {
        if is_minimal {
            0.0
        } else {
            phi_right * (-lambda * (x_right + offset as f64 * period - c * t)).exp()
        }
    };

    let mut station = 1i64;
    let mut hits: Vec<(f64, f64)> = Vec::new();
    let station_index =
        |station: i64, offset: i64| grid.node_index((station - offset) as f64 * period);
    let mut step_once =
        |state: &mut SolutionState, stepper: &mut Stepper, offset: i64, k: u64| -> Result<f64> {
            let t_prev = state.t;
            let prev_val = station_index(station, offset).map(|i| state.u[i]);
            stepper.set_right_value(right_value(t_prev + dt, offset));
            stepper.step(state)?;
            state.t = k as f64 * dt;
            if let (Some(v0), Some(i)) = (prev_val, station_index(station, offset)) {
                let v1 = state.u[i];
                if v0 < level && v1 >= level {
                    hits.push((
                        (station as f64) * period,
                        passage_time(t_prev, v0, state.t, v1, level),
                    ));
                    station += 1;
                } else if v0 >= level {
                    station += 1;
                }
            }
            Ok(state.t)
        };

    let shift_cells = |offset_now: i64, offset_prev: i64| (offset_now - offset_prev - 1) * m as i64;
    let mut prev: Option<(Vec<f64>, i64)> = None;
    let mut k: u64 = 0;
    let mut residual = f64::INFINITY;
    let sup_p = p_cell.sup_norm();
    let margin = 2 * m;
    loop {
        for _ in 0..spp {
            k += 1;
            step_once(&mut state, &mut stepper, offset, k)?;
        }
        if let Some((u_prev, off_prev)) = &prev {
            // compare u(t, x) with u(t - T, x - L) over interior nodes
            let s = shift_cells(offset, *off_prev);
            let n = state.u.len() as i64;
            let mut r: f64 = 0.0;
            for i in margin as i64..n - margin as i64 {
                let j = i + s;
                if j >= margin as i64 && j < n - margin as i64 {
                    r = r.max((state.u[i as usize] - u_prev[j as usize]).abs());
                }
            }
            residual = r;
        }
        if state.t >= options.min_time
            && residual <= options.settle_tol.min(options.tol_front) * sup_p
        {
            break;
        }
        if state.t >= horizon {
            if residual <= options.tol_front * sup_p {
                break;
            }
            return Err(KppError::FrontNotConverged { horizon, residual });
        }
        // move the window forward by whole periods
        let front = rightmost_crossing(&grid, &state.u, level)
            .ok_or_else(|| KppError::LevelNotAttained("front lost inside the window".into()))?;
        let periods = (front / period).floor() as i64;
        if periods >= 1 {
            let cells = periods as usize * m;
            let n = state.u.len();
            state.u.copy_within(cells.., 0);
            offset += periods;
            for (u, &x0) in state.u[n - cells..].iter_mut().zip(&xs[n - cells..]) {
                *u = if is_minimal {
                    0.0
                } else {
                    let x = x0 + offset as f64 * period;
                    phi.eval(x0) * (-lambda * (x - c * state.t)).exp()
                };
            }
        }
        prev = Some((state.u.clone(), offset));
    }

    // anchor on the next station: first step with u(kL) >= level
    let run_time = state.t;
    let anchor_station = {
        let front = rightmost_crossing(&grid, &state.u, level)
            .ok_or_else(|| KppError::LevelNotAttained("front lost inside the window".into()))?;
        (front / period).floor() as i64 + 1 + offset
    };
    let ia = station_index(anchor_station, offset)
        .ok_or_else(|| KppError::Internal("anchor station outside the window".into()))?;
    let mut before = state.clone();
    let mut guard = 0;
    loop {
        before.u.copy_from_slice(&state.u);
        before.t = state.t;
        k += 1;
        step_once(&mut state, &mut stepper, offset, k)?;
        if state.u[ia] >= level {
            break;
        }
        guard += 1;
        if guard > 4 * spp {
            return Err(KppError::Internal(
                "front did not reach the anchor station".into(),
            ));
        }
    }
    let (v0, v1) = (before.u[ia], state.u[ia]);
    let s = if v1 == v0 {
        1.0
    } else {
        (level - v0) / (v1 - v0)
    };
    let blend = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| if s == 1.0 { *y } else { x + s * (y - x) })
            .collect()
    };
    let mut phases = vec![blend(&before.u, &state.u)];
    let per_phase = spp / options.n_phase;
    for _ in 1..options.n_phase {
        for _ in 0..per_phase - 1 {
            k += 1;
            step_once(&mut state, &mut stepper, offset, k)?;
        }
        before.u.copy_from_slice(&state.u);
        k += 1;
        step_once(&mut state, &mut stepper, offset, k)?;
        phases.push(blend(&before.u, &state.u));
    }
    // exact anchor value at the station node
    phases[0][ia] = level;

    let x_min = grid.x_min() + (offset - anchor_station) as f64 * period;
    let recent: Vec<&(f64, f64)> = hits.iter().rev().take(12).collect();
    let measured_speed = if recent.len() >= 3 {
        let xs: Vec<f64> = recent.iter().map(|h| h.1).collect();
        let ys: Vec<f64> = recent.iter().map(|h| h.0).collect();
        fit_line(&xs, &ys).map(|f| f.0).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(FrontProfile {
        c,
        period_time,
        period,
        dx,
        x_min,
        phases,
        p: p_cell,
        lambda,
        phi,
        is_minimal,
        convergence_residual: residual,
        measured_speed,
        run_time,
    })
}

/// Re-evolves phase 0 for one time period and returns
/// `sup |u(T, x) - U(0, x - L)|` over the window interior.
pub fn periodicity_residual(
    profile: &FrontProfile,
    model: &ReactionModel,
    dt_factor: f64,
) -> Result<f64> {
    let n = profile.len();
    let grid = Grid::new(profile.x_min, profile.x_max(), n, profile.period)?;
    let stationary = stationary_on(&grid, &profile.p);
    let spp = steps_per_period(
        profile.period_time,
        profile.dx,
        dt_factor,
        profile.n_phase(),
    );
    let scheme = SchemeConfig {
        dt: profile.period_time / spp as f64,
        theta: 1.0,
        boundary_left: LeftBoundary::DirichletP,
        monotone: true,
    };
    let mut stepper = Stepper::new(grid, model, scheme, Some(stationary))?;
    let mut state = SolutionState::new(grid, 0.0, profile.phases[0].clone())?;
    for _ in 0..spp {
        // keep the right end on the exact linear tail when one is present
        let tail = if profile.is_minimal {
            0.0
        } else {
            profile.phases[0][n - 1] * (profile.lambda * profile.c * (state.t + scheme.dt)).exp()
        };
        stepper.set_right_value(tail);
        stepper.step(&mut state)?;
    }
    let m = (profile.period / profile.dx).round() as usize;
    let margin = 2 * m;
    let mut r: f64 = 0.0;
    for i in margin + m..n - margin {
        r = r.max((state.u[i] - profile.phases[0][i - m]).abs());
    }
    Ok(r)
}
