//! Periodic principal eigenvalues and the KPP dispersion relation.
//!
//! For a decay rate `lambda` the drifted operator
//!
//! ```text
//! A(lambda) phi = -phi'' + 2 lambda phi' - r(x) phi
//! ```
//!
//! is discretised on one periodic cell with second-order central
//! differences. For `|lambda| h < 1` the off-diagonal entries are
//! non-positive, so `A - sigma I` is a non-singular M-matrix for any `sigma`
//! below the principal eigenvalue and shifted inverse iteration converges
//! to the Perron pair `(mu(lambda), phi_lambda)` with `phi_lambda > 0`.
//!
//! The speed curve is `c(lambda) = (lambda^2 - mu(lambda)) / lambda`, its
//! minimum over `lambda > 0` is the minimal speed `c*`, attained at
//! `lambda*`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{Interpolation, PeriodicField};
use crate::error::{KppError, Result};
use crate::linalg::{fit_line, CyclicLu};
use crate::optimize::{bisect, golden_section};

pub const DEFAULT_N_CELL: usize = 256;
pub const DEFAULT_LAMBDA_TOL: f64 = 1e-8;

const MAX_INVERSE_ITERATIONS: usize = 400;

/// Principal eigenvalue `mu(lambda)` with its positive periodic eigenfunction
/// (normalised to `max phi = 1`).
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    pub mu: f64,
    pub phi: PeriodicField,
    /// `max_i |(A phi)_i - mu phi_i|` on the discrete cell
    pub residual: f64,
}

struct DriftOperator {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    h: f64,
}

impl DriftOperator {
    fn new(r: &PeriodicField, lambda: f64, n: usize) -> Result<Self> {
        let period = r.period();
        let h = period / n as f64;
        if lambda.abs() * h >= 1.0 {
            return Err(KppError::NoPerronPair(format!(
                "|lambda| h = {:.3} >= 1 (lambda = {lambda}, n_cell = {n}); refine the cell",
                lambda.abs() * h
            )));
        }
        let ih2 = 1.0 / (h * h);
        let sub = vec![-ih2 - lambda / h; n];
        let sup = vec![-ih2 + lambda / h; n];
        let diag = (0..n).map(|i| 2.0 * ih2 - r.eval(i as f64 * h)).collect();
        Ok(Self { sub, diag, sup, h })
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            let left = v[if i == 0 { n - 1 } else { i - 1 }];
            let right = v[if i + 1 == n { 0 } else { i + 1 }];
            out[i] = self.sub[i] * left + self.diag[i] * v[i] + self.sup[i] * right;
        }
    }

    fn shifted_factor(&self, sigma: f64) -> Result<CyclicLu> {
        let diag: Vec<f64> = self.diag.iter().map(|d| d - sigma).collect();
        CyclicLu::new(&self.sub, &diag, &self.sup)
    }

    /// Roundoff floor of `A v` relative to `|v|_inf`.
    fn noise_floor(&self) -> f64 {
        64.0 * f64::EPSILON * 4.0 / (self.h * self.h)
    }
}

/// Raw Perron pair on the discrete cell: `(mu, phi samples, residual)`.
fn perron_samples(r: &PeriodicField, lambda: f64, n_cell: usize) -> Result<(f64, Vec<f64>, f64)> {
    if n_cell < 32 {
        return Err(KppError::InvalidInput(format!(
            "n_cell must be >= 32, got {n_cell}"
        )));
    }
    if !lambda.is_finite() {
        return Err(KppError::InvalidInput(format!(
            "lambda is not finite ({lambda})"
        )));
    }
    let op = DriftOperator::new(r, lambda, n_cell)?;
    let n = op.len();
    let r_max = r.max();
    let r_scale = r.sup_norm().max(1.0);

    // mu(lambda) >= -max r, so this shift is strictly below the spectrum bound.
    let mut sigma = -r_max - 1.0;
    let mut factor = op.shifted_factor(sigma)?;
    let mut phi = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut a_phi = vec![0.0; n];
    let mut mu = f64::NAN;
    let mut converged = false;

    for _ in 0..MAX_INVERSE_ITERATIONS {
        y.copy_from_slice(&phi);
        factor.solve_in_place(&mut y);
        if y.iter().any(|v| !(*v > 0.0)) {
            return Err(KppError::NoPerronPair(format!(
                "inverse iterate lost positivity at lambda = {lambda}, n_cell = {n_cell}"
            )));
        }
        let mu_new = sigma + phi.iter().sum::<f64>() / y.iter().sum::<f64>();
        let ymax = y.iter().copied().fold(0.0, f64::max);
        let mut change: f64 = 0.0;
        for (p, v) in phi.iter_mut().zip(&y) {
            let next = v / ymax;
            change = change.max((next - *p).abs());
            *p = next;
        }
        let mu_change = (mu_new - mu).abs();
        mu = mu_new;
        if change <= 1e-14 && mu_change <= 1e-14 * mu.abs().max(1.0) {
            converged = true;
            break;
        }
        // Collatz-Wielandt: min_i (A phi)_i / phi_i <= mu.
        op.apply(&phi, &mut a_phi);
        let lo = a_phi
            .iter()
            .zip(&phi)
            .map(|(a, p)| a / p)
            .fold(f64::INFINITY, f64::min);
        let candidate = lo - 1e-3 * (1.0 + lo.abs());
        if candidate.is_finite() && candidate > sigma + 1e-6 * (1.0 + sigma.abs()) {
            sigma = candidate;
            factor = op.shifted_factor(sigma)?;
        }
    }

    op.apply(&phi, &mut a_phi);
    let residual = a_phi
        .iter()
        .zip(&phi)
        .map(|(a, p)| (a - mu * p).abs())
        .fold(0.0, f64::max);
    let tol = 1e-9 * r_scale + op.noise_floor();
    if !converged && residual > tol {
        return Err(KppError::NoPerronPair(format!(
            "inverse iteration did not converge (residual {residual:.3e}) at lambda = {lambda}"
        )));
    }
    if residual > tol {
        return Err(KppError::NoPerronPair(format!(
            "residual {residual:.3e} exceeds {tol:.3e} at lambda = {lambda}"
        )));
    }
    Ok((mu, phi, residual))
}

/// Principal (Perron) eigenpair of `-D^2 + 2 lambda D - r` on one periodic
/// cell of `n_cell` nodes.
pub fn principal_eigen(r: &PeriodicField, lambda: f64, n_cell: usize) -> Result<EigenPair> {
    let (mu, phi, residual) = perron_samples(r, lambda, n_cell)?;
    let phi = PeriodicField::new(r.period(), phi, Interpolation::Cubic)?;
    Ok(EigenPair {
        lambda,
        mu,
        phi,
        residual,
    })
}

/// `mu(lambda)` alone.
pub fn principal_mu(r: &PeriodicField, lambda: f64, n_cell: usize) -> Result<f64> {
    perron_samples(r, lambda, n_cell).map(|(mu, _, _)| mu)
}

/// `mu'(lambda)` of the discrete operator via the adjoint eigenvector; the
/// transpose of `A(lambda)` is `A(-lambda)`.
pub fn mu_derivative(r: &PeriodicField, lambda: f64, n_cell: usize) -> Result<f64> {
    let (_, phi, _) = perron_samples(r, lambda, n_cell)?;
    let (_, psi, _) = perron_samples(r, -lambda, n_cell)?;
    let n = phi.len();
    let h = r.period() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let dphi = (phi[(i + 1) % n] - phi[(i + n - 1) % n]) / (2.0 * h);
        num += psi[i] * 2.0 * dphi;
        den += psi[i] * phi[i];
    }
    Ok(num / den)
}

/// Scan and refinement settings for [`minimal_speed_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionOptions {
    pub n_cell: usize,
    /// scan range in units of `1 / L`
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_scan: usize,
    /// golden-section tolerance in `lambda`
    pub tol: f64,
}

impl Default for DispersionOptions {
    fn default() -> Self {
        Self {
            n_cell: DEFAULT_N_CELL,
            lambda_min: 1e-3,
            lambda_max: 20.0,
            n_scan: 160,
            tol: DEFAULT_LAMBDA_TOL,
        }
    }
}

/// Sampled dispersion curve with the minimal speed and its decay rate.
#[derive(Debug, Clone)]
pub struct DispersionData {
    pub r: PeriodicField,
    pub n_cell: usize,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    /// `c(lambda) = (lambda^2 - mu) / lambda`
    pub speeds: Vec<f64>,
    pub c_star: f64,
    pub lambda_star: f64,
    pub mu_zero: f64,
}

/// Minimal speed with default options and golden-section tolerance `tol`.
pub fn minimal_speed(r: &PeriodicField, tol: f64) -> Result<DispersionData> {
    minimal_speed_with(
        r,
        &DispersionOptions {
            tol,
            ..DispersionOptions::default()
        },
    )
}

pub fn minimal_speed_with(r: &PeriodicField, opts: &DispersionOptions) -> Result<DispersionData> {
    let n = opts.n_cell;
    let period = r.period();
    let mu_zero = principal_mu(r, 0.0, n)?;
    if mu_zero >= 0.0 {
        return Err(KppError::NotLinearlyUnstable { mu_zero });
    }
    if !(opts.lambda_min > 0.0 && opts.lambda_max > opts.lambda_min) || opts.n_scan < 3 {
        return Err(KppError::InvalidInput(
            "dispersion scan needs 0 < lambda_min < lambda_max and n_scan >= 3".into(),
        ));
    }
    let (lo, hi) = (opts.lambda_min / period, opts.lambda_max / period);
    let ratio = (hi / lo).ln();
    let lambdas: Vec<f64> = (0..opts.n_scan)
        .map(|k| lo * (ratio * k as f64 / (opts.n_scan - 1) as f64).exp())
        .collect();
    let mus = lambdas
        .par_iter()
        .map(|&l| principal_mu(r, l, n))
        .collect::<Result<Vec<f64>>>()?;
    let speeds: Vec<f64> = lambdas
        .iter()
        .zip(&mus)
        .map(|(l, m)| (l * l - m) / l)
        .collect();
    let imin = speeds
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if imin == 0 || imin + 1 == lambdas.len() {
        return Err(KppError::NoInteriorMinimum {
            lo,
            hi,
            at: lambdas[imin],
        });
    }
    let speed = |l: f64| principal_mu(r, l, n).map(|m| (l * l - m) / l);
    let golden = golden_section(speed, lambdas[imin - 1], lambdas[imin + 1], opts.tol)?;
    let lambda_star = polish_stationary_point(r, n, golden.x, opts.tol).unwrap_or(golden.x);
    let mu_star = principal_mu(r, lambda_star, n)?;
    let c_star = (lambda_star * lambda_star - mu_star) / lambda_star;
    Ok(DispersionData {
        r: r.clone(),
        n_cell: n,
        lambdas,
        mus,
        speeds,
        c_star,
        lambda_star,
        mu_zero,
    })
}

/// Sharpens the golden-section minimiser by bisecting the stationarity
/// condition `lambda^2 + mu - lambda mu' = 0` near `guess`.
fn polish_stationary_point(r: &PeriodicField, n: usize, guess: f64, tol: f64) -> Option<f64> {
    let slope = |l: f64| -> Result<f64> {
        let mu = principal_mu(r, l, n)?;
        let dmu = mu_derivative(r, l, n)?;
        Ok(l * l + mu - l * dmu)
    };
    // The golden-section bracket is limited by roundoff in c(lambda), so the
    // window grows until the slope changes sign.
    let mut width = 20.0 * tol.max(1e-10);
    while width <= 1e-3 * guess {
        let (a, b) = (guess - width, guess + width);
        let (sa, sb) = (slope(a).ok()?, slope(b).ok()?);
        if sa.signum() != sb.signum() {
            return bisect(slope, a, b, 1e-15 * guess).ok();
        }
        width *= 4.0;
    }
    None
}

impl DispersionData {
    pub fn period(&self) -> f64 {
        self.r.period()
    }

    pub fn mu(&self, lambda: f64) -> Result<f64> {
        principal_mu(&self.r, lambda, self.n_cell)
    }

    pub fn eigen(&self, lambda: f64) -> Result<EigenPair> {
        principal_eigen(&self.r, lambda, self.n_cell)
    }

    /// `c(lambda) = (lambda^2 - mu(lambda)) / lambda`.
    pub fn speed_of(&self, lambda: f64) -> Result<f64> {
        Ok((lambda * lambda - self.mu(lambda)?) / lambda)
    }

    /// `g(lambda) = lambda^2 - mu(lambda) - c lambda`.
    pub fn g(&self, lambda: f64, c: f64) -> Result<f64> {
        Ok(lambda * lambda - self.mu(lambda)? - c * lambda)
    }

    /// Largest `lambda` the discretisation supports.
    fn lambda_ceiling(&self) -> f64 {
        0.95 * self.n_cell as f64 / self.period()
    }

    /// `|2 lambda* - c* - mu'(lambda*)|` with `mu'` from a central difference.
    pub fn tangency_residual(&self, step: f64) -> Result<f64> {
        let l = self.lambda_star;
        let dmu = (self.mu(l + step)? - self.mu(l - step)?) / (2.0 * step);
        Ok((2.0 * l - self.c_star - dmu).abs())
    }
}

/// Roots `lambda_minus <= lambda* <= lambda_plus` of
/// `lambda^2 - mu(lambda) - c lambda = 0`; the double root at `c = c*`.
pub fn lambda_roots(disp: &DispersionData, c: f64) -> Result<(f64, f64)> {
    if !c.is_finite() {
        return Err(KppError::InvalidInput(format!("speed is not finite ({c})")));
    }
    // c* carries the eigenvalue roundoff, so speeds this close count as c*.
    let slack = 1e-9 * disp.c_star.abs().max(1.0);
    if c < disp.c_star - slack {
        return Err(KppError::SubcriticalSpeed {
            c,
            c_star: disp.c_star,
        });
    }
    let ls = disp.lambda_star;
    let g = |l: f64| disp.g(l, c);
    if c <= disp.c_star || g(ls)? >= 0.0 {
        return Ok((ls, ls));
    }
    let lower = bisect(g, 0.0, ls, 4.0 * f64::EPSILON * ls)?;
    let ceiling = disp.lambda_ceiling();
    let mut hi = (2.0 * ls).min(ceiling);
    while g(hi)? <= 0.0 {
        if hi >= ceiling {
            return Err(KppError::InvalidInput(format!(
                "upper decay rate exceeds the resolvable range (lambda < {ceiling:.3}) at c = {c}"
            )));
        }
        hi = (2.0 * hi).min(ceiling);
    }
    let upper = bisect(g, ls, hi, 4.0 * f64::EPSILON * hi)?;
    Ok((lower, upper))
}

/// Fitted `c - c* ~ K (lambda* - lambda_c)^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyFit {
    pub n_fit: f64,
    pub k_fit: f64,
    /// `(offset, lambda* - lambda_c)` pairs used in the fit
    pub points: Vec<(f64, f64)>,
}

/// Default speed offsets for [`degeneracy_exponent`]: nine points log-spaced
/// over `[1e-8, 1e-6]`.
pub fn default_offsets() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-8.0 + 0.25 * k as f64)).collect()
}

pub fn degeneracy_exponent(disp: &DispersionData, offsets: &[f64]) -> Result<DegeneracyFit> {
    if offsets.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(KppError::InvalidInput(
            "speed offsets must be positive".into(),
        ));
    }
    if offsets.iter().any(|&d| d >= 0.5 * disp.c_star) {
        return Err(KppError::InvalidInput(format!(
            "speed offsets must stay below c*/2 = {}",
            0.5 * disp.c_star
        )));
    }
    let (min, max) = offsets
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    if offsets.len() < 3 || max / min < 100.0 * (1.0 - 1e-12) {
        return Err(KppError::InsufficientData(format!(
            "need >= 3 offsets spanning two decades (got {} spanning {:.2} decades)",
            offsets.len(),
            if min > 0.0 { (max / min).log10() } else { 0.0 }
        )));
    }
    let points: Vec<(f64, f64)> = offsets
        .par_iter()
        .map(|&d| lambda_roots(disp, disp.c_star + d).map(|(lc, _)| (d, disp.lambda_star - lc)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&(_, e)| e > 0.0 && e.is_finite())
        .collect();
    if points.len() < 3 {
        return Err(KppError::InsufficientData(format!(
            "only {} usable root offsets",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let (slope, intercept, _, _) = fit_line(&xs, &ys)?;
    Ok(DegeneracyFit {
        n_fit: slope,
        k_fit: intercept.exp(),
        points,
    })
}
