//! Observables of a run: level crossings, hitting times, speeds, the
//! logarithmic shift, steepness, intersection counts and distances to a
//! reference front.

use serde::{Deserialize, Serialize};

use crate::error::{KppError, Result};
use crate::fronts::FrontProfile;
use crate::linalg::{fit_line, least_squares};
use crate::optimize::golden_section;
use crate::solver::{
    passage_time, rightmost_crossing, Grid, Snapshot, SolutionState, StationHit, TraceRecord,
};

/// Relative deadband used when the caller has no better scale: `1e-9 |p|`.
pub const DEFAULT_DEADBAND_REL: f64 = 1e-9;

/// Largest condition estimate accepted by the shift and log-corrected fits.
pub const MAX_FIT_CONDITION: f64 = 1e8;

/// Smallest `t_end / t_burn` accepted by [`shift_estimate`].
pub const MIN_SHIFT_SPAN: f64 = 4.0;

/// Front position `X_theta(t)` sampled along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSeries {
    pub level: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// positions located by linear interpolation between nodes
    pub interpolated: bool,
}

impl CrossingSeries {
    pub fn new(level: f64, times: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(KppError::InvalidInput(format!(
                "{} times but {} positions",
                times.len(),
                positions.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KppError::InvalidInput(
                "crossing times must increase strictly".into(),
            ));
        }
        if times.iter().chain(&positions).any(|v| !v.is_finite()) {
            return Err(KppError::InvalidInput(
                "crossing series holds non-finite values".into(),
            ));
        }
        Ok(Self {
            level,
            times,
            positions,
            interpolated: true,
        })
    }

    /// Series from trace records; records where the level was not attained
    /// are dropped.
    pub fn from_trace(level: f64, trace: &[TraceRecord]) -> Result<Self> {
        let (times, positions) = trace
            .iter()
            .filter_map(|r| r.front_pos.map(|x| (r.t, x)))
            .unzip();
        Self::new(level, times, positions)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn window(&self, window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        self.times
            .iter()
            .zip(&self.positions)
            .filter(|(t, _)| **t >= window.0 && **t <= window.1)
            .map(|(t, x)| (*t, *x))
            .unzip()
    }
}

/// Rightmost downward crossing of `theta`, linearly interpolated.
pub fn level_crossing(state: &SolutionState, theta: f64) -> Result<f64> {
    rightmost_crossing(&state.grid, &state.u, theta).ok_or_else(|| {
        KppError::LevelNotAttained(format!(
            "u never drops through {theta} with u(x_max) below it (max u = {})",
            state.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        ))
    })
}

/// First time `u(t, x_k) >= level` at each station, linear in time between
/// consecutive snapshots. Stations already at the level in the first
/// snapshot get its time; unreached ones get `None`.
pub fn hitting_times(
    grid: &Grid,
    snapshots: &[Snapshot],
    positions: &[f64],
    level: f64,
) -> Result<Vec<StationHit>> {
    if snapshots.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(KppError::InvalidInput(
            "snapshot times must increase strictly".into(),
        ));
    }
    if snapshots.iter().any(|s| s.u.len() != grid.len()) {
        return Err(KppError::InvalidInput(
            "snapshot length differs from the grid".into(),
        ));
    }
    let hits = positions
        .iter()
        .map(|&x| {
            let mut prev: Option<(f64, f64)> = None;
            for s in snapshots {
                let v = grid.interpolate(&s.u, x);
                if v >= level {
                    let time = match prev {
                        Some((t0, v0)) => passage_time(t0, v0, s.t, v, level),
                        None => s.t,
                    };
                    return StationHit {
                        position: x,
                        time: Some(time),
                    };
                }
                prev = Some((s.t, v));
            }
            StationHit {
                position: x,
                time: None,
            }
        })
        .collect();
    Ok(hits)
}

/// Least-squares slope of `X(t)` on `window`; returns `(c_hat, stderr)`.
pub fn speed_estimate(series: &CrossingSeries, window: (f64, f64)) -> Result<(f64, f64)> {
    let (t, x) = series.window(window);
    if t.len() < 10 {
        return Err(KppError::InsufficientData(format!(
            "speed fit needs >= 10 crossings in [{}, {}], got {}",
            window.0,
            window.1,
            t.len()
        )));
    }
    let (slope, _, se, _) = fit_line(&t, &x)?;
    Ok((slope, se))
}

/// `X(t) = c t - a ln t + b` with all three coefficients free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogCorrectedFit {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub condition: f64,
}

pub fn log_corrected_fit(series: &CrossingSeries, window: (f64, f64)) -> Result<LogCorrectedFit> {
    let (t, x) = series.window(window);
    if t.len() < 10 || t[0] <= 0.0 {
        return Err(KppError::InsufficientData(format!(
            "log-corrected fit needs >= 10 crossings at positive times, got {}",
            t.len()
        )));
    }
    let cols = vec![
        t.clone(),
        t.iter().map(|v| -v.ln()).collect(),
        vec![1.0; t.len()],
    ];
    let (coef, condition) = least_squares(&cols, &x)?;
    if condition > MAX_FIT_CONDITION {
        return Err(KppError::IllConditioned(format!(
            "log-corrected fit condition {condition:.3e}"
        )));
    }
    Ok(LogCorrectedFit {
        c: coef[0],
        a: coef[1],
        b: coef[2],
        condition,
    })
}

/// Front lag behind `c* t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSeries {
    pub c_star: f64,
    pub lambda_star: f64,
    pub t_burn: f64,
    pub times: Vec<f64>,
    /// time shift `m(t)`
    pub m: Vec<f64>,
    /// spatial lag `c* m(t)`
    pub lag: Vec<f64>,
    /// coefficient of `ln t` in the spatial lag
    pub a_fit: f64,
    pub a_stderr: f64,
    pub b_fit: f64,
    /// `a_fit / c*`, the coefficient in time units
    pub a_time: f64,
    /// `3 / (2 lambda*)`
    pub bramson: f64,
}

/// Level-crossing offset `X_U(tau) - c tau` of a pulsating front over one
/// time period, sampled at `n` points.
fn wobble_table(profile: &FrontProfile, level: f64, n: usize) -> Result<Vec<f64>> {
    let tp = profile.period_time;
    let xs = profile.nodes();
    (0..n)
        .map(|j| {
            let tau = j as f64 * tp / n as f64;
            let u: Vec<f64> = xs.iter().map(|&x| profile.eval(tau, x)).collect();
            let i = u
                .iter()
                .rposition(|&v| v >= level)
                .filter(|&i| i + 1 < u.len())
                .ok_or_else(|| {
                    KppError::LevelNotAttained(format!("reference front never crosses {level}"))
                })?;
            let w = (u[i] - level) / (u[i] - u[i + 1]);
            Ok(profile.x_min + (i as f64 + w) * profile.dx - profile.c * tau)
        })
        .collect()
}

fn periodic_lookup(table: &[f64], period: f64, tau: f64) -> f64 {
    let n = table.len();
    let s = (tau / period).rem_euclid(1.0) * n as f64;
    let j = (s.floor() as usize).min(n - 1);
    let w = s - j as f64;
    table[j] + w * (table[(j + 1) % n] - table[j])
}

/// Fits `c* t - X(t) = a ln t - b` on `t >= t_burn` and reports the shift
/// series. With a reference front, `m(t)` is the time shift that puts the
/// front's own crossing at `X(t)`, which removes its periodic wobble;
/// without one the wobble stays in `m`.
pub fn shift_estimate(
    series: &CrossingSeries,
    c_star: f64,
    lambda_star: f64,
    t_burn: f64,
    reference: Option<&FrontProfile>,
) -> Result<ShiftSeries> {
    if !(c_star > 0.0) || !(lambda_star > 0.0) || !(t_burn > 0.0) {
        return Err(KppError::InvalidInput(
            "shift fit needs positive c*, lambda* and burn-in".into(),
        ));
    }
    let (times, xs) = series.window((t_burn, f64::INFINITY));
    let t_end = times.last().copied().unwrap_or(t_burn);
    if times.len() < 10 || t_end < MIN_SHIFT_SPAN * t_burn {
        return Err(KppError::InsufficientData(format!(
            "shift fit needs >= 10 crossings spanning t_end >= {MIN_SHIFT_SPAN} t_burn; got {} up to t = {t_end}",
            times.len()
        )));
    }
    let log_t: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let (_, condition) = least_squares(&[log_t.clone(), vec![1.0; times.len()]], &xs)?;
    if condition > MAX_FIT_CONDITION {
        return Err(KppError::IllConditioned(format!(
            "shift fit condition {condition:.3e}"
        )));
    }
    let y: Vec<f64> = times.iter().zip(&xs).map(|(t, x)| c_star * t - x).collect();
    let (a_fit, icpt, a_stderr, _) = fit_line(&log_t, &y)?;

    let table = match reference {
        Some(p) => Some((
            wobble_table(p, series.level, 4 * p.n_phase())?,
            p.period_time,
        )),
        None => None,
    };
    let m: Vec<f64> = times
        .iter()
        .zip(&xs)
        .map(|(&t, &x)| {
            let base = (c_star * t - x) / c_star;
            match &table {
                None => base,
                // X = c* (t - m) + w(t - m); a contraction while |w'| < c*
                Some((tab, tp)) => {
                    let mut m = base;
                    for _ in 0..50 {
                        let next = base + periodic_lookup(tab, *tp, t - m) / c_star;
                        let done = (next - m).abs() <= 1e-13 * (1.0 + m.abs());
                        m = next;
                        if done {
                            break;
                        }
                    }
                    m
                }
            }
        })
        .collect();
    Ok(ShiftSeries {
        c_star,
        lambda_star,
        t_burn,
        lag: m.iter().map(|v| c_star * v).collect(),
        times,
        m,
        a_fit,
        a_stderr,
        b_fit: -icpt,
        a_time: a_fit / c_star,
        bramson: 1.5 / lambda_star,
    })
}

fn sign_pattern<'a>(u1: &'a [f64], u2: &'a [f64], deadband: f64) -> impl Iterator<Item = i8> + 'a {
    u1.iter().zip(u2).map(move |(a, b)| {
        let d = a - b;
        if d.abs() <= deadband {
            0
        } else if d > 0.0 {
            1
        } else {
            -1
        }
    })
}

/// `u1` is steeper than `u2`: some point splits the line into `u1 >= u2` on
/// the left and `u1 <= u2` on the right. Differences within `deadband`
/// count as equality, so the test is that no `-` precedes a `+`.
pub fn is_steeper(u1: &[f64], u2: &[f64], deadband: f64) -> bool {
    debug_assert_eq!(u1.len(), u2.len());
    let mut seen_minus = false;
    for s in sign_pattern(u1, u2, deadband) {
        match s {
            -1 => seen_minus = true,
            1 if seen_minus => return false,
            _ => {}
        }
    }
    true
}

/// Sign changes of `u1 - u2` once entries within `deadband` are removed.
pub fn intersection_count(u1: &[f64], u2: &[f64], deadband: f64) -> usize {
    debug_assert_eq!(u1.len(), u2.len());
    let mut last = 0i8;
    let mut count = 0;
    for s in sign_pattern(u1, u2, deadband).filter(|&s| s != 0) {
        if last != 0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// `sup_{x >= a} |u(t, x) - U(t - shift, x)|` over the grid nodes.
pub fn half_line_distance(
    state: &SolutionState,
    profile: &FrontProfile,
    a: f64,
    shift: f64,
) -> Result<f64> {
    let grid = &state.grid;
    let start = ((a - grid.x_min()) / grid.dx() - 1e-9).ceil().max(0.0) as usize;
    if start >= grid.len() {
        return Err(KppError::InvalidInput(format!(
            "half-line [{a}, inf) holds no node of the grid"
        )));
    }
    let tau = state.t - shift;
    let d = (start..grid.len())
        .map(|i| (state.u[i] - profile.eval(tau, grid.x(i))).abs())
        .fold(0.0, f64::max);
    Ok(d)
}

/// Time shift predicted from the front position: `t - X(t) / c`.
pub fn predicted_shift(state: &SolutionState, profile: &FrontProfile) -> Result<f64> {
    Ok(state.t - level_crossing(state, profile.level())? / profile.c)
}

/// Shift minimising [`half_line_distance`] over `predicted +- 2T`: coarse
/// scan, then golden section on the best bracket. Returns
/// `(shift, distance)`.
pub fn optimal_shift(
    state: &SolutionState,
    profile: &FrontProfile,
    a: f64,
    predicted: f64,
) -> Result<(f64, f64)> {
    let tp = profile.period_time;
    let n = 16 * profile.n_phase();
    let h = 4.0 * tp / n as f64;
    let lo = predicted - 2.0 * tp;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=n {
        let s = lo + k as f64 * h;
        let d = half_line_distance(state, profile, a, s)?;
        if d < best.1 {
            best = (s, d);
        }
    }
    let min = golden_section(
        |s| half_line_distance(state, profile, a, s),
        best.0 - h,
        best.0 + h,
        1e-6 * tp,
    )?;
    Ok(if min.value < best.1 {
        (min.x, min.value)
    } else {
        best
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::PeriodicField;
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::with_cells(-10.0, 10.0, 1.0, 64).unwrap()
    }

    fn synthetic(f: impl Fn(f64) -> f64, t0: f64, t1: f64, n: usize) -> CrossingSeries {
        let times: Vec<f64> = (0..n)
            .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
            .collect();
        let positions = times.iter().map(|&t| f(t)).collect();
        CrossingSeries::new(0.5, times, positions).unwrap()
    }

    #[test]
    fn crossing_of_linear_profile() {
        let g = grid();
        let u = g
            .nodes()
            .iter()
            .map(|&x| (1.0 - x).clamp(0.0, 1.0))
            .collect();
        let s = SolutionState::new(g, 0.0, u).unwrap();
        assert!((level_crossing(&s, 0.5).unwrap() - 0.5).abs() <= g.dx() * g.dx());
    }

    #[test]
    fn crossing_below_level_errors() {
        let g = grid();
        let s = SolutionState::new(g, 0.0, vec![0.2; g.len()]).unwrap();
        assert!(matches!(
            level_crossing(&s, 0.5),
            Err(KppError::LevelNotAttained(_))
        ));
    }

    #[test]
    fn crossing_is_rightmost() {
        let g = grid();
        // sawtooth down-crossings at 2, 5 and 8
        let u = g
            .nodes()
            .iter()
            .map(|&x| {
                if (0.5..9.0).contains(&x) {
                    1.0 - ((x - 0.5) % 3.0) / 3.0
                } else {
                    0.0
                }
            })
            .collect();
        let s = SolutionState::new(g, 0.0, u).unwrap();
        assert!((level_crossing(&s, 0.5).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn hitting_times_of_translating_profile() {
        let g = grid();
        let theta = 0.5;
        let snaps: Vec<Snapshot> = (0..=40)
            .map(|k| {
                let t = 0.1 * k as f64;
                Snapshot {
                    t,
                    u: g.nodes()
                        .iter()
                        .map(|&x| (theta - (x - 2.0 * t)).clamp(0.0, 1.0))
                        .collect(),
                }
            })
            .collect();
        let hits = hitting_times(&g, &snaps, &[1.0, 2.0, 3.0, 9.5, -3.0], theta).unwrap();
        for h in &hits[..3] {
            assert!((h.time.unwrap() - h.position / 2.0).abs() < 1e-12, "{h:?}");
        }
        assert_eq!(hits[3].time, None);
        assert_eq!(hits[4].time, Some(0.0));
    }

    #[test]
    fn speed_slope_of_log_corrected_track() {
        let s = synthetic(|t| 2.0 * t - 1.5 * t.ln() + 0.3, 50.0, 400.0, 351);
        let (c, _) = speed_estimate(&s, (50.0, 400.0)).unwrap();
        let times = &s.times;
        let t_bar = times.iter().sum::<f64>() / times.len() as f64;
        assert!((c - (2.0 - 1.5 / t_bar)).abs() < 0.01 * (2.0 - 1.5 / t_bar));
        let fit = log_corrected_fit(&s, (50.0, 400.0)).unwrap();
        assert!(
            (fit.c - 2.0).abs() < 1e-6 && (fit.a - 1.5).abs() < 1e-6 && (fit.b - 0.3).abs() < 1e-6,
            "{fit:?}"
        );
    }

    #[test]
    fn speed_needs_ten_points() {
        let s = synthetic(|t| 2.0 * t, 0.0, 9.0, 10);
        assert!(speed_estimate(&s, (0.0, 9.0)).is_ok());
        assert!(matches!(
            speed_estimate(&s, (0.5, 9.0)),
            Err(KppError::InsufficientData(_))
        ));
    }

    #[test]
    fn shift_of_synthetic_tracks() {
        let s = synthetic(|t| 2.0 * t - 1.5 * t.ln() + 0.3, 50.0, 400.0, 351);
        let sh = shift_estimate(&s, 2.0, 1.0, 50.0, None).unwrap();
        assert!((sh.a_fit - 1.5).abs() < 1e-6 && (sh.b_fit - 0.3).abs() < 1e-6);
        assert!((sh.a_time - 0.75).abs() < 1e-6 && sh.bramson == 1.5);
        let k = sh.times.len() - 1;
        assert!((sh.lag[k] - (1.5 * 400f64.ln() - 0.3)).abs() < 1e-9);
        assert!((sh.lag[k] - 2.0 * sh.m[k]).abs() < 1e-12);

        let s = synthetic(|t| 2.0 * t, 50.0, 400.0, 351);
        assert!(
            shift_estimate(&s, 2.0, 1.0, 50.0, None)
                .unwrap()
                .a_fit
                .abs()
                < 1e-6
        );
        // less than the required span beyond the burn-in
        assert!(shift_estimate(&s, 2.0, 1.0, 200.0, None).is_err());
    }

    #[test]
    fn shift_removes_front_wobble() {
        // U(t, x) = G(x - c t + 0.1 sin(2 pi c t)), crossing wobbles with period T = 1 / c
        let c = 2.0;
        let gshape = |z: f64| 0.5 * (1.0 - (2.0 * z).tanh());
        let wob = |t: f64| 0.1 * (2.0 * std::f64::consts::PI * c * t).sin();
        let dx = 1.0 / 64.0;
        let x_min = -20.0;
        let phases: Vec<Vec<f64>> = (0..16)
            .map(|j| {
                let tau = j as f64 / 16.0 / c;
                (0..2561)
                    .map(|i| gshape(x_min + i as f64 * dx - c * tau + wob(tau)))
                    .collect()
            })
            .collect();
        let one = PeriodicField::constant(1.0, 1.0, 8).unwrap();
        let prof =
            FrontProfile::from_phases(c, 1.0, dx, x_min, phases, one.clone(), 1.0, one).unwrap();
        // the solution is the front delayed by m(t) = 0.2 ln t
        let s = synthetic(
            |t| {
                let tau = t - 0.2 * t.ln();
                c * tau - wob(tau)
            },
            10.0,
            100.0,
            901,
        );
        let sh = shift_estimate(&s, c, 1.0, 10.0, Some(&prof)).unwrap();
        let worst = sh
            .times
            .iter()
            .zip(&sh.m)
            .map(|(t, m)| (m - 0.2 * t.ln()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "m deviates by {worst}");
        let raw = shift_estimate(&s, c, 1.0, 10.0, None).unwrap();
        let worst_raw = raw
            .times
            .iter()
            .zip(&raw.m)
            .map(|(t, m)| (m - 0.2 * t.ln()).abs())
            .fold(0.0, f64::max);
        assert!(worst_raw > 0.04, "raw deviation {worst_raw}");
    }

    #[test]
    fn heaviside_is_steeper_than_any_admissible_datum() {
        let g = grid();
        let p: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&x| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).cos())
            .collect();
        let h: Vec<f64> = g
            .nodes()
            .iter()
            .zip(&p)
            .map(|(&x, &pv)| if x < 1.0 { pv } else { 0.0 })
            .collect();
        let u2: Vec<f64> = g
            .nodes()
            .iter()
            .zip(&p)
            .map(|(&x, &pv)| pv / (1.0 + (x - 3.0).exp()))
            .collect();
        assert!(is_steeper(&h, &u2, 1e-9));
        assert!(!is_steeper(&u2, &h, 1e-9));
        assert!(is_steeper(&p, &p, 1e-9) && intersection_count(&p, &p, 1e-9) == 0);
    }

    #[test]
    fn faster_decay_is_steeper() {
        let g = grid();
        let u1: Vec<f64> = g.nodes().iter().map(|&x| (-2.0 * x).exp()).collect();
        let u2: Vec<f64> = g.nodes().iter().map(|&x| (-x).exp()).collect();
        assert!(is_steeper(&u1, &u2, 0.0));
        assert!(!is_steeper(&u2, &u1, 0.0));
        assert_eq!(intersection_count(&u1, &u2, 0.0), 1);
    }

    #[test]
    fn sine_difference_has_two_intersections() {
        let n = 301;
        let u1: Vec<f64> = (0..n)
            .map(|i| (3.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).sin())
            .collect();
        let zero = vec![0.0; n];
        assert_eq!(intersection_count(&u1, &zero, 1e-12), 2);
        // a zero run between equal signs is no crossing
        assert_eq!(
            intersection_count(&[1.0, 0.0, 0.0, 1.0, -1.0], &[0.0; 5], 1e-12),
            1
        );
    }

    #[test]
    fn self_distance_and_period_identity() {
        let c = 2.0;
        let dx = 1.0 / 64.0;
        let phases: Vec<Vec<f64>> = (0..16)
            .map(|j| {
                let tau = j as f64 / 16.0 / c;
                (0..2561)
                    .map(|i| 0.5 * (1.0 - (-20.0 + i as f64 * dx - c * tau).tanh()))
                    .collect()
            })
            .collect();
        let one = PeriodicField::constant(1.0, 1.0, 8).unwrap();
        let prof =
            FrontProfile::from_phases(c, 1.0, dx, -20.0, phases.clone(), one.clone(), 1.0, one)
                .unwrap();
        let g = Grid::new(-20.0, 20.0, 2561, 1.0).unwrap();
        let s = SolutionState::new(g, 0.0, phases[0].clone()).unwrap();
        assert!(half_line_distance(&s, &prof, -20.0, 0.0).unwrap() <= 1e-8);
        // one period later and one cell to the right
        let moved: Vec<f64> = g.nodes().iter().map(|&x| prof.eval(0.0, x - 1.0)).collect();
        let s = SolutionState::new(g, 0.5, moved).unwrap();
        assert!(half_line_distance(&s, &prof, -19.0, 0.0).unwrap() <= 1e-6);
        let (shift, d) =
            optimal_shift(&s, &prof, 0.0, predicted_shift(&s, &prof).unwrap()).unwrap();
        assert!(
            shift.abs() < 1e-4 && d < 1e-6,
            "shift {shift}, distance {d}"
        );
        assert!(half_line_distance(&s, &prof, 25.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn intersection_count_ignores_scaling_and_orientation(
            d in prop::collection::vec(-1.0f64..1.0, 2..60),
            scale in 0.1f64..10.0,
        ) {
            let zero = vec![0.0; d.len()];
            let scaled: Vec<f64> = d.iter().map(|v| v * scale).collect();
            let neg: Vec<f64> = d.iter().map(|v| -v).collect();
            let n = intersection_count(&d, &zero, 0.0);
            prop_assert_eq!(n, intersection_count(&scaled, &zero, 0.0));
            prop_assert_eq!(n, intersection_count(&zero, &d, 0.0));
            prop_assert_eq!(n, intersection_count(&neg, &zero, 0.0));
            // one sign change at most exactly when one of the two is steeper
            prop_assert_eq!(n <= 1, is_steeper(&d, &zero, 0.0) || is_steeper(&zero, &d, 0.0));
        }
    }
}
