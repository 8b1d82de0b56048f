//! Periodic coefficient fields and KPP reaction terms `f(x, u)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, KppError, Result};
use crate::linalg::CyclicLu;

/// Positions are snapped to multiples of `period / 2^32` before lookup so
/// that `x` and `x + L` land on the same sample cell.
const POSITION_QUANTUM: f64 = 4_294_967_296.0;

/// Reduces `x` to a cell fraction in `[0, 1)`.
#[inline]
pub(crate) fn cell_fraction(x: f64, period: f64) -> f64 {
    let s = x / period;
    let frac = s - s.floor();
    let q = (frac * POSITION_QUANTUM).round() / POSITION_QUANTUM;
    if q >= 1.0 {
        0.0
    } else {
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Interpolation {
    Linear,
    #[default]
    Cubic,
}

/// A real `L`-periodic function sampled at `n` uniform nodes `x_j = j L / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    period: f64,
    samples: Vec<f64>,
    interpolation: Interpolation,
    // periodic cubic spline second derivatives (empty for linear)
    curvature: Vec<f64>,
}

impl PeriodicField {
    pub fn new(period: f64, samples: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(KppError::InvalidInput(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        let min_len = match interpolation {
            Interpolation::Linear => 1,
            Interpolation::Cubic => 3,
        };
        if samples.len() < min_len {
            return Err(KppError::InvalidInput(format!(
                "{interpolation:?} periodic field needs at least {min_len} samples, got {}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().position(|v| !v.is_finite()) {
            return Err(KppError::InvalidInput(format!(
                "sample {bad} is not finite"
            )));
        }
        let curvature = match interpolation {
            Interpolation::Linear => Vec::new(),
            Interpolation::Cubic => spline_curvature(period, &samples)?,
        };
        Ok(Self {
            period,
            samples,
            interpolation,
            curvature,
        })
    }

    pub fn constant(period: f64, value: f64, n: usize) -> Result<Self> {
        Self::new(period, vec![value; n.max(3)], Interpolation::Cubic)
    }

    /// `a_0 + sum_k [cos_k cos(2 pi k x / L) + sin_k sin(2 pi k x / L)]`, where
    /// `cos[0]` is the constant term and `sin[0]` is ignored.
    pub fn from_fourier(
        period: f64,
        cos: &[f64],
        sin: &[f64],
        n: usize,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let samples = (0..n)
            .map(|j| fourier_value(period, cos, sin, j as f64 * period / n as f64))
            .collect();
        Self::new(period, samples, interpolation)
    }

    /// Samples `g` on `n` nodes of one cell.
    pub fn from_fn(
        period: f64,
        n: usize,
        interpolation: Interpolation,
        g: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let samples = (0..n).map(|j| g(j as f64 * period / n as f64)).collect();
        Self::new(period, samples, interpolation)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.period / self.samples.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Evaluates the field at any real `x`; `eval(x + L) == eval(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.samples.len();
        let pos = cell_fraction(x, self.period) * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let t = pos - i as f64;
        let j = if i + 1 == n { 0 } else { i + 1 };
        let (y0, y1) = (self.samples[i], self.samples[j]);
        match self.interpolation {
            Interpolation::Linear => {
                if t == 0.0 {
                    y0
                } else {
                    y0 + t * (y1 - y0)
                }
            }
            Interpolation::Cubic => {
                if t == 0.0 {
                    return y0;
                }
                let h = self.period / n as f64;
                let s = 1.0 - t;
                let (m0, m1) = (self.curvature[i], self.curvature[j]);
                s * y0 + t * y1 + h * h / 6.0 * ((s * s * s - s) * m0 + (t * t * t - t) * m1)
            }
        }
    }

    /// Returns a new field with `g` applied to every sample.
    pub fn map(&self, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.period,
            self.samples.iter().map(|&v| g(v)).collect(),
            self.interpolation,
        )
    }
}

fn fourier_value(period: f64, cos: &[f64], sin: &[f64], x: f64) -> f64 {
    let w = 2.0 * PI * x / period;
    let mut v = cos.first().copied().unwrap_or(0.0);
    for (k, a) in cos.iter().enumerate().skip(1) {
        v += a * (k as f64 * w).cos();
    }
    for (k, b) in sin.iter().enumerate().skip(1) {
        v += b * (k as f64 * w).sin();
    }
    v
}

fn spline_curvature(period: f64, y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    let h = period / n as f64;
    let sub = vec![h / 6.0; n];
    let diag = vec![4.0 * h / 6.0; n];
    let sup = vec![h / 6.0; n];
    let rhs: Vec<f64> = (0..n)
        .map(|i| (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n]) / h)
        .collect();
    CyclicLu::new(&sub, &diag, &sup)?.solve(&rhs)
}

/// Reaction term tabulated on an `(x mod L, u)` grid with bilinear
/// interpolation. Linear extrapolation in `u` outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedReaction {
    period: f64,
    nx: usize,
    u_nodes: Vec<f64>,
    // row-major: values[ix * nu + iu]
    values: Vec<f64>,
}

impl TabulatedReaction {
    /// `rows[ix]` holds `f(ix * L / nx, u_nodes[iu])`. The first u-node must be
    /// zero; its column is forced to exactly zero.
    pub fn new(period: f64, u_nodes: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(KppError::InvalidInput(format!(
                "period must be positive and finite, got {period}"
            )));
        }
        if u_nodes.len() < 2 || u_nodes[0] != 0.0 {
            return Err(KppError::InvalidInput(
                "u_nodes must start at 0 and have at least two entries".into(),
            ));
        }
        if u_nodes.windows(2).any(|w| !(w[1] > w[0])) || u_nodes.iter().any(|u| !u.is_finite()) {
            return Err(KppError::InvalidInput(
                "u_nodes must be finite and strictly increasing".into(),
            ));
        }
        if rows.is_empty() {
            return Err(KppError::InvalidInput(
                "tabulated reaction needs at least one x row".into(),
            ));
        }
        let nu = u_nodes.len();
        let mut values = Vec::with_capacity(rows.len() * nu);
        for (ix, row) in rows.iter().enumerate() {
            if row.len() != nu {
                return Err(KppError::InvalidInput(format!(
                    "row {ix} has {} entries, expected {nu}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(KppError::InvalidInput(format!(
                    "row {ix} contains non-finite values"
                )));
            }
            if row[0].abs() > 1e-12 {
                return Err(KppError::InvalidInput(format!(
                    "f(x, 0) must vanish; row {ix} has f(x,0) = {}",
                    row[0]
                )));
            }
            values.push(0.0);
            values.extend_from_slice(&row[1..]);
        }
        Ok(Self {
            period,
            nx: rows.len(),
            u_nodes,
            values,
        })
    }

    /// Tabulates a closure on `nx` x-nodes and the given u-nodes.
    pub fn from_fn(
        period: f64,
        nx: usize,
        u_nodes: Vec<f64>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let rows = (0..nx)
            .map(|ix| {
                let x = ix as f64 * period / nx as f64;
                u_nodes.iter().map(|&u| f(x, u)).collect()
            })
            .collect();
        Self::new(period, u_nodes, rows)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn u_nodes(&self) -> &[f64] {
        &self.u_nodes
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    fn x_weights(&self, x: f64) -> (usize, usize, f64) {
        let pos = cell_fraction(x, self.period) * self.nx as f64;
        let i = (pos.floor() as usize).min(self.nx - 1);
        let j = if i + 1 == self.nx { 0 } else { i + 1 };
        (i, j, pos - i as f64)
    }

    #[inline]
    fn row_value(&self, ix: usize, u: f64) -> f64 {
        let nu = self.u_nodes.len();
        let row = &self.values[ix * nu..(ix + 1) * nu];
        // segment k spans [u_k, u_{k+1}]
        let k = match self.u_nodes.partition_point(|&node| node <= u) {
            0 => 0,
            p if p >= nu => nu - 2,
            p => p - 1,
        };
        let (u0, u1) = (self.u_nodes[k], self.u_nodes[k + 1]);
        let t = (u - u0) / (u1 - u0);
        row[k] + t * (row[k + 1] - row[k])
    }

    #[inline]
    fn eval_weighted(&self, (i, j, t): (usize, usize, f64), u: f64) -> f64 {
        let a = self.row_value(i, u);
        if t == 0.0 {
            a
        } else {
            a + t * (self.row_value(j, u) - a)
        }
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        self.eval_weighted(self.x_weights(x), u)
    }
}

/// Reaction nonlinearity `f(x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReactionModel {
    /// `f(x,u) = growth(x) * u * (capacity(x) - u)`.
    PeriodicLogistic {
        growth: PeriodicField,
        capacity: PeriodicField,
    },
    GeneralPeriodic(Arc<TabulatedReaction>),
    /// `f(x,u) = base(x,u) + amplitude * exp(-decay * max(x,0)) * u`.
    CloseToPeriodic {
        base: Box<ReactionModel>,
        amplitude: f64,
        decay: f64,
    },
}

impl ReactionModel {
    pub fn logistic(growth: PeriodicField, capacity: PeriodicField) -> Result<Self> {
        if (growth.period() - capacity.period()).abs() > 1e-12 * growth.period() {
            return Err(KppError::InvalidInput(format!(
                "growth and capacity periods differ ({} vs {})",
                growth.period(),
                capacity.period()
            )));
        }
        if growth.min() <= 0.0 || capacity.min() <= 0.0 {
            return Err(KppError::InvalidInput(
                "logistic growth and capacity must be positive".into(),
            ));
        }
        Ok(Self::PeriodicLogistic { growth, capacity })
    }

    /// Homogeneous logistic `growth * u * (capacity - u)` with period `period`.
    pub fn homogeneous_logistic(period: f64, growth: f64, capacity: f64) -> Result<Self> {
        Self::logistic(
            PeriodicField::constant(period, growth, 64)?,
            PeriodicField::constant(period, capacity, 64)?,
        )
    }

    pub fn tabulated(table: TabulatedReaction) -> Self {
        Self::GeneralPeriodic(Arc::new(table))
    }

    pub fn close_to_periodic(base: ReactionModel, amplitude: f64, decay: f64) -> Result<Self> {
        if !base.is_strictly_periodic() {
            return Err(KppError::InvalidInput(
                "close-to-periodic base must be periodic".into(),
            ));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(KppError::InvalidInput(format!(
                "perturbation amplitude must be >= 0, got {amplitude}"
            )));
        }
        if !(decay > 0.0) || !decay.is_finite() {
            return Err(KppError::InvalidInput(format!(
                "perturbation decay rate must be > 0, got {decay}"
            )));
        }
        Ok(Self::CloseToPeriodic {
            base: Box::new(base),
            amplitude,
            decay,
        })
    }

    pub fn period(&self) -> f64 {
        match self {
            Self::PeriodicLogistic { growth, .. } => growth.period(),
            Self::GeneralPeriodic(t) => t.period(),
            Self::CloseToPeriodic { base, .. } => base.period(),
        }
    }

    fn is_strictly_periodic(&self) -> bool {
        !matches!(self, Self::CloseToPeriodic { .. })
    }

    /// True when `f` is `L`-periodic in `x` (a vanishing perturbation counts).
    pub fn is_periodic(&self) -> bool {
        match self {
            Self::CloseToPeriodic { amplitude, .. } => *amplitude == 0.0,
            _ => true,
        }
    }

    /// The periodic limit `f~` (the model itself when already periodic).
    pub fn limiting(&self) -> &ReactionModel {
        match self {
            Self::CloseToPeriodic { base, .. } => base,
            other => other,
        }
    }

    #[inline]
    fn perturbation_weight(amplitude: f64, decay: f64, x: f64) -> f64 {
        amplitude * (-decay * x.max(0.0)).exp()
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64, u: f64) -> f64 {
        match self {
            Self::PeriodicLogistic { growth, capacity } => {
                growth.eval(x) * u * (capacity.eval(x) - u)
            }
            Self::GeneralPeriodic(t) => t.eval(x, u),
            Self::CloseToPeriodic {
                base,
                amplitude,
                decay,
            } => base.eval_unchecked(x, u) + Self::perturbation_weight(*amplitude, *decay, x) * u,
        }
    }

    /// `f(x, u)`; rejects non-finite input.
    pub fn evaluate_f(&self, x: f64, u: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        ensure_finite("u", u)?;
        Ok(self.eval_unchecked(x, u))
    }

    /// `r(x) = d f / d u (x, 0)`.
    pub fn linearization(&self, x: f64) -> Result<f64> {
        ensure_finite("x", x)?;
        Ok(match self {
            Self::PeriodicLogistic { growth, capacity } => growth.eval(x) * capacity.eval(x),
            Self::GeneralPeriodic(t) => richardson_slope(|u| t.eval(x, u), DEFAULT_FD_STEP),
            Self::CloseToPeriodic {
                base,
                amplitude,
                decay,
            } => base.linearization(x)? + Self::perturbation_weight(*amplitude, *decay, x),
        })
    }

    /// The linearisation of the periodic limit sampled on `n` nodes of a cell.
    pub fn periodic_linearization(&self, n: usize) -> Result<PeriodicField> {
        let lim = self.limiting();
        let period = lim.period();
        let samples = (0..n)
            .map(|j| lim.linearization(j as f64 * period / n as f64))
            .collect::<Result<Vec<_>>>()?;
        PeriodicField::new(period, samples, Interpolation::Cubic)
    }

    /// Largest `s > 0` with `f(x, s) >= 0` at this `x` (the local carrying
    /// capacity); zero when `f(x, .) < 0` for all `s > 0`.
    pub fn local_capacity(&self, x: f64) -> f64 {
        match self {
            Self::PeriodicLogistic { capacity, .. } => capacity.eval(x),
            Self::CloseToPeriodic {
                base,
                amplitude,
                decay,
            } => {
                if let Self::PeriodicLogistic { growth, capacity } = base.as_ref() {
                    capacity.eval(x)
                        + Self::perturbation_weight(*amplitude, *decay, x) / growth.eval(x)
                } else {
                    generic_capacity(|u| self.eval_unchecked(x, u))
                }
            }
            Self::GeneralPeriodic(t) => generic_capacity(|u| t.eval(x, u)),
        }
    }

    /// Precomputes per-node coefficients for fast evaluation along a grid.
    pub fn on_nodes(&self, xs: &[f64]) -> NodalReaction {
        let (base, extra) = match self {
            Self::CloseToPeriodic {
                base,
                amplitude,
                decay,
            } => {
                let extra = if *amplitude == 0.0 {
                    None
                } else {
                    Some(
                        xs.iter()
                            .map(|&x| Self::perturbation_weight(*amplitude, *decay, x))
                            .collect(),
                    )
                };
                (base.as_ref(), extra)
            }
            other => (other, None),
        };
        let kind = match base {
            Self::PeriodicLogistic { growth, capacity } => NodalKind::Logistic {
                growth: xs.iter().map(|&x| growth.eval(x)).collect(),
                capacity: xs.iter().map(|&x| capacity.eval(x)).collect(),
            },
            Self::GeneralPeriodic(t) => NodalKind::Tabulated {
                weights: xs.iter().map(|&x| t.x_weights(x)).collect(),
                table: Arc::clone(t),
            },
            Self::CloseToPeriodic { .. } => {
                unreachable!("nested close-to-periodic models are rejected at construction")
            }
        };
        NodalReaction { kind, extra }
    }
}

/// Finite-difference step used for tabulated linearisations.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// One-sided difference quotient at `u = 0` with one Richardson step.
pub fn richardson_slope(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let f0 = f(0.0);
    let d1 = (f(h) - f0) / h;
    let d2 = (f(0.5 * h) - f0) / (0.5 * h);
    2.0 * d2 - d1
}

fn generic_capacity(f: impl Fn(f64) -> f64) -> f64 {
    // KPP: f(s)/s is decreasing, so {f >= 0} is an interval [0, s+].
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) >= 0.0 && guard < 200 {
        hi *= 2.0;
        guard += 1;
    }
    if guard == 200 {
        return f64::INFINITY;
    }
    let mut lo = 0.0;
    if f(hi * 1e-12) < 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

/// Reaction coefficients frozen on a set of nodes.
#[derive(Debug, Clone)]
pub struct NodalReaction {
    kind: NodalKind,
    extra: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
enum NodalKind {
    Logistic {
        growth: Vec<f64>,
        capacity: Vec<f64>,
    },
    Tabulated {
        weights: Vec<(usize, usize, f64)>,
        table: Arc<TabulatedReaction>,
    },
}

impl NodalReaction {
    pub fn len(&self) -> usize {
        match &self.kind {
            NodalKind::Logistic { growth, .. } => growth.len(),
            NodalKind::Tabulated { weights, .. } => weights.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn eval(&self, i: usize, u: f64) -> f64 {
        let base = match &self.kind {
            NodalKind::Logistic { growth, capacity } => growth[i] * u * (capacity[i] - u),
            NodalKind::Tabulated { weights, table } => table.eval_weighted(weights[i], u),
        };
        match &self.extra {
            Some(w) => base + w[i] * u,
            None => base,
        }
    }

    /// Upper bound of `|d f / d u|` over `u in [0, u_max]` on these nodes.
    pub fn lipschitz_bound(&self, u_max: f64) -> f64 {
        let base = match &self.kind {
            NodalKind::Logistic { growth, capacity } => growth
                .iter()
                .zip(capacity)
                .map(|(g, k)| g * k.abs().max((2.0 * u_max - k).abs()))
                .fold(0.0, f64::max),
            NodalKind::Tabulated { table, .. } => {
                let nu = table.u_nodes.len();
                let mut lip: f64 = 0.0;
                for ix in 0..table.nx {
                    let row = &table.values[ix * nu..(ix + 1) * nu];
                    for k in 0..nu - 1 {
                        if table.u_nodes[k] > u_max {
                            break;
                        }
                        let s = (row[k + 1] - row[k]) / (table.u_nodes[k + 1] - table.u_nodes[k]);
                        lip = lip.max(s.abs());
                    }
                }
                lip
            }
        };
        base + self
            .extra
            .as_ref()
            .map_or(0.0, |w| w.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

/// Outcome of a sampled KPP check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KppReport {
    /// `(s1, s2, min over x of f(x,s1)/s1 - f(x,s2)/s2)` per adjacent pair.
    pub gaps: Vec<(f64, f64, f64)>,
    pub min_gap: f64,
    pub pass: bool,
    /// largest `|f(x, 0)|` seen on the sampled nodes
    pub max_abs_f_at_zero: f64,
}

/// Samples the ratio gap of the KPP hypothesis on `s_grid` and `x_resolution`
/// nodes per period. Close-to-periodic models are sampled on `[-L, 4L)`.
pub fn check_kpp(model: &ReactionModel, s_grid: &[f64], x_resolution: usize) -> Result<KppReport> {
    if s_grid.len() < 2 {
        return Err(KppError::InvalidInput(
            "s_grid needs at least two densities".into(),
        ));
    }
    if s_grid[0] <= 0.0 || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KppError::InvalidInput(
            "s_grid must be positive and strictly increasing".into(),
        ));
    }
    if x_resolution == 0 {
        return Err(KppError::InvalidInput(
            "x_resolution must be positive".into(),
        ));
    }
    let period = model.period();
    let xs: Vec<f64> = if model.is_periodic() {
        (0..x_resolution)
            .map(|j| j as f64 * period / x_resolution as f64)
            .collect()
    } else {
        (0..5 * x_resolution)
            .map(|j| -period + j as f64 * period / x_resolution as f64)
            .collect()
    };
    let mut gaps = Vec::with_capacity(s_grid.len() - 1);
    for w in s_grid.windows(2) {
        let (s1, s2) = (w[0], w[1]);
        let gap = xs
            .iter()
            .map(|&x| model.eval_unchecked(x, s1) / s1 - model.eval_unchecked(x, s2) / s2)
            .fold(f64::INFINITY, f64::min);
        gaps.push((s1, s2, gap));
    }
    let min_gap = gaps.iter().map(|g| g.2).fold(f64::INFINITY, f64::min);
    let max_abs_f_at_zero = xs
        .iter()
        .map(|&x| model.eval_unchecked(x, 0.0).abs())
        .fold(0.0, f64::max);
    Ok(KppReport {
        gaps,
        min_gap,
        pass: min_gap > 0.0 && max_abs_f_at_zero == 0.0,
        max_abs_f_at_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_logistic() -> ReactionModel {
        ReactionModel::homogeneous_logistic(1.0, 1.0, 1.0).unwrap()
    }

    fn sine_capacity() -> ReactionModel {
        let kappa =
            PeriodicField::from_fourier(1.0, &[1.0], &[0.0, 0.25], 512, Interpolation::Cubic)
                .unwrap();
        ReactionModel::logistic(PeriodicField::constant(1.0, 1.0, 64).unwrap(), kappa).unwrap()
    }

    #[test]
    fn periodicity_is_exact() {
        let field = PeriodicField::from_fourier(
            1.0,
            &[1.0, 0.5, 0.1],
            &[0.0, 0.3],
            200,
            Interpolation::Cubic,
        )
        .unwrap();
        let lin =
            PeriodicField::from_fourier(2.5, &[1.0, 0.5], &[0.0, 0.3], 77, Interpolation::Linear)
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-5.0..5.0);
            assert_eq!(field.eval(x + 1.0), field.eval(x), "x = {x}");
            assert_eq!(lin.eval(x + 2.5), lin.eval(x), "x = {x}");
        }
    }

    #[test]
    fn cubic_field_interpolates_smooth_functions() {
        let field =
            PeriodicField::from_fourier(1.0, &[1.0, 0.5], &[], 128, Interpolation::Cubic).unwrap();
        for k in 0..97 {
            let x = k as f64 * 0.0371 - 1.3;
            let exact = 1.0 + 0.5 * (2.0 * PI * x).cos();
            assert!((field.eval(x) - exact).abs() < 1e-6);
        }
        // nodes are reproduced exactly
        assert_eq!(field.eval(field.node(5)), field.samples()[5]);
    }

    #[test]
    fn field_rejects_non_finite_samples() {
        assert!(PeriodicField::new(1.0, vec![1.0, f64::NAN, 2.0], Interpolation::Linear).is_err());
        assert!(PeriodicField::new(0.0, vec![1.0; 4], Interpolation::Linear).is_err());
    }

    #[test]
    fn evaluate_f_examples() {
        let m = unit_logistic();
        assert_eq!(m.evaluate_f(0.3, 0.0).unwrap(), 0.0);
        for x in [-3.7, 0.0, 0.42, 11.0] {
            assert_eq!(m.evaluate_f(x, 0.5).unwrap(), 0.25);
        }
        let ctp = ReactionModel::close_to_periodic(unit_logistic(), 1.0, 2.0).unwrap();
        assert_eq!(ctp.evaluate_f(0.0, 0.5).unwrap(), 0.75);
        assert!(m.evaluate_f(f64::NAN, 0.5).is_err());
        assert!(m.evaluate_f(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn linearization_examples() {
        let m = unit_logistic();
        for x in [0.0, 0.25, 7.3] {
            assert_eq!(m.linearization(x).unwrap(), 1.0);
        }
        let s = sine_capacity();
        for j in 0..16 {
            let x = j as f64 / 16.0;
            let exact = 1.0 + 0.25 * (2.0 * PI * x).sin();
            assert!((s.linearization(x).unwrap() - exact).abs() < 1e-12);
        }
        let ctp = ReactionModel::close_to_periodic(unit_logistic(), 0.5, 2.0).unwrap();
        assert!((ctp.linearization(1.0).unwrap() - (1.0 + 0.5 * (-2.0f64).exp())).abs() < 1e-15);
        assert_eq!(ctp.linearization(-4.0).unwrap(), 1.5);
    }

    fn fine_u_nodes() -> Vec<f64> {
        // uniform spacing near zero so the difference stencil hits nodes
        let mut u: Vec<f64> = (0..=4).map(|k| k as f64 * 2.5e-5).collect();
        u.extend([1e-3, 1e-2]);
        u.extend((1..=30).map(|k| 0.05 * k as f64));
        u
    }

    #[test]
    fn tabulated_linearization_matches_closed_form() {
        let exact = sine_capacity();
        let table =
            TabulatedReaction::from_fn(1.0, 64, fine_u_nodes(), |x, u| exact.eval_unchecked(x, u))
                .unwrap();
        let tab = ReactionModel::tabulated(table);
        for j in 0..64 {
            let x = j as f64 / 64.0;
            let r = tab.linearization(x).unwrap();
            assert!(
                (r - exact.linearization(x).unwrap()).abs() < 1e-6,
                "x = {x}: {r}"
            );
        }
    }

    #[test]
    fn tabulated_forces_zero_at_origin() {
        let bad = TabulatedReaction::new(1.0, vec![0.0, 1.0], vec![vec![0.1, 0.0]]);
        assert!(bad.is_err());
        let t = TabulatedReaction::new(1.0, vec![0.0, 1.0], vec![vec![1e-14, 0.0]]).unwrap();
        assert_eq!(t.eval(0.3, 0.0), 0.0);
    }

    #[test]
    fn kpp_check_examples() {
        let rep = check_kpp(&unit_logistic(), &[0.1, 0.5, 0.9], 64).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.gaps.len(), 2);
        for (_, _, g) in &rep.gaps {
            assert!((g - 0.4).abs() < 1e-14);
        }

        let square = TabulatedReaction::from_fn(
            1.0,
            8,
            (0..=20).map(|k| k as f64 * 0.1).collect(),
            |_, u| u * u,
        )
        .unwrap();
        let rep = check_kpp(&ReactionModel::tabulated(square), &[0.1, 0.5, 0.9], 16).unwrap();
        assert!(!rep.pass);
        assert!(rep.min_gap < 0.0);
    }

    #[test]
    fn kpp_gap_matches_dense_scan() {
        let m = sine_capacity();
        let s_grid = [0.1, 0.5, 0.9];
        let rep = check_kpp(&m, &s_grid, 64).unwrap();
        assert!(rep.pass);
        for (k, w) in s_grid.windows(2).enumerate() {
            let dense = (0..640)
                .map(|j| {
                    let x = j as f64 / 640.0;
                    let (s1, s2) = (w[0], w[1]);
                    let kappa = 1.0 + 0.25 * (2.0 * PI * x).sin();
                    s1 * (kappa - s1) / s1 - s2 * (kappa - s2) / s2
                })
                .fold(f64::INFINITY, f64::min);
            assert!((rep.gaps[k].2 - dense).abs() < 1e-8);
        }
    }

    #[test]
    fn close_to_periodic_closeness_bound() {
        let base = sine_capacity();
        let (c, rho) = (1.0, 2.0);
        let ctp = ReactionModel::close_to_periodic(base.clone(), c, rho).unwrap();
        let kmax = 1.25;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let x: f64 = rng.random_range(0.0..20.0);
            let u: f64 = rng.random_range(1e-6..kmax);
            let diff = (ctp.evaluate_f(x, u).unwrap() - base.evaluate_f(x, u).unwrap()).abs();
            assert!(diff <= c * (-rho * x).exp() * u + 1e-12);
        }
    }

    #[test]
    fn nodal_reaction_matches_direct_evaluation() {
        let ctp = ReactionModel::close_to_periodic(sine_capacity(), 1.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..200).map(|i| -3.0 + i as f64 / 32.0).collect();
        let nodal = ctp.on_nodes(&xs);
        for (i, &x) in xs.iter().enumerate() {
            for u in [0.0, 0.2, 0.9, 1.3] {
                assert_eq!(nodal.eval(i, u), ctp.eval_unchecked(x, u));
            }
        }
    }

    #[test]
    fn vanishing_perturbation_is_periodic() {
        let zero = ReactionModel::close_to_periodic(sine_capacity(), 0.0, 2.0).unwrap();
        assert!(zero.is_periodic());
        let xs: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 / 16.0).collect();
        let a = zero.on_nodes(&xs);
        let b = sine_capacity().on_nodes(&xs);
        for i in 0..xs.len() {
            assert_eq!(a.eval(i, 0.37).to_bits(), b.eval(i, 0.37).to_bits());
        }
    }

    #[test]
    fn local_capacity_of_perturbed_logistic() {
        let ctp = ReactionModel::close_to_periodic(unit_logistic(), 1.0, 2.0).unwrap();
        assert!((ctp.local_capacity(-1.0) - 2.0).abs() < 1e-14);
        assert!((ctp.local_capacity(50.0) - 1.0).abs() < 1e-12);
        let tab = ReactionModel::tabulated(
            TabulatedReaction::from_fn(
                1.0,
                4,
                (0..=30).map(|k| k as f64 * 0.1).collect(),
                |_, u| u * (1.0 - u),
            )
            .unwrap(),
        );
        assert!((tab.local_capacity(0.0) - 1.0).abs() < 1e-12);
    }
}
