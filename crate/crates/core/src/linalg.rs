//! Tridiagonal and cyclic tridiagonal solvers.
//!
//! Rows are stored as three diagonals: `sub[i]` multiplies `x[i-1]`,
//! `diag[i]` multiplies `x[i]`, `sup[i]` multiplies `x[i+1]`. `sub[0]` and
//! `sup[n-1]` are ignored by the plain solver and hold the wrap-around
//! corner entries in the cyclic one.

use crate::error::{KppError, Result};

/// Thomas algorithm, no pivoting. Stable for the M-matrices produced by the
/// diffusion stencils in this crate.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let factor = TridiagonalLu::new(sub, diag, sup)?;
    let mut x = rhs.to_vec();
    factor.solve_in_place(&mut x);
    Ok(x)
}

/// Pre-factored tridiagonal matrix for repeated solves with a fixed operator.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    sub: Vec<f64>,
    // modified super-diagonal c'_i
    sup_mod: Vec<f64>,
    // reciprocal pivots
    inv_pivot: Vec<f64>,
}

impl TridiagonalLu {
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || sub.len() != n || sup.len() != n {
            return Err(KppError::InvalidInput(format!(
                "tridiagonal bands must share a non-zero length (sub {}, diag {}, sup {})",
                sub.len(),
                n,
                sup.len()
            )));
        }
        let mut sup_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_sup = 0.0;
        for i in 0..n {
            let pivot = if i == 0 {
                diag[0]
            } else {
                diag[i] - sub[i] * prev_sup
            };
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(KppError::Internal(format!(
                    "tridiagonal breakdown at row {i} (pivot {pivot})"
                )));
            }
            inv_pivot[i] = 1.0 / pivot;
            sup_mod[i] = if i + 1 < n {
                sup[i] * inv_pivot[i]
            } else {
                0.0
            };
            prev_sup = sup_mod[i];
        }
        Ok(Self {
            sub: sub.to_vec(),
            sup_mod,
            inv_pivot,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.sub[i] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.sup_mod[i] * x[i + 1];
        }
    }

    /// As [`Self::solve_in_place`], except that past the last non-zero
    /// right-hand side entry the forward sweep stops once it decays below
    /// `floor` and the remaining unknowns are set to zero. Geometric tails
    /// otherwise settle on the smallest subnormal and slow every later sweep.
    pub fn solve_in_place_flushed(&self, x: &mut [f64], floor: f64) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        let support = x.iter().rposition(|v| *v != 0.0).map_or(0, |k| k + 1);
        x[0] *= self.inv_pivot[0];
        let mut end = n;
        for i in 1..n {
            x[i] = (x[i] - self.sub[i] * x[i - 1]) * self.inv_pivot[i];
            if i >= support && x[i].abs() < floor {
                end = i;
                break;
            }
        }
        x[end..].fill(0.0);
        for i in (0..end.saturating_sub(1)).rev() {
            x[i] -= self.sup_mod[i] * x[i + 1];
        }
    }
}

/// Solves a periodic tridiagonal system with corner entries
/// `A[0][n-1] = sub[0]` and `A[n-1][0] = sup[n-1]` (Sherman–Morrison).
pub fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    CyclicLu::new(sub, diag, sup)?.solve(rhs)
}

/// Pre-factored cyclic tridiagonal operator.
#[derive(Debug, Clone)]
pub struct CyclicLu {
    inner: TridiagonalLu,
    z: Vec<f64>,
    gamma: f64,
    top_corner: f64,
    denom: f64,
}

impl CyclicLu {
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(KppError::InvalidInput(format!(
                "cyclic system needs n >= 3, got {n}"
            )));
        }
        let top_corner = sub[0]; // A[0][n-1]
        let bottom_corner = sup[n - 1]; // A[n-1][0]
        let gamma = -diag[0];
        let mut bb = diag.to_vec();
        bb[0] = diag[0] - gamma;
        bb[n - 1] = diag[n - 1] - bottom_corner * top_corner / gamma;
        let inner = TridiagonalLu::new(sub, &bb, sup)?;
        let mut z = vec![0.0; n];
        z[0] = gamma;
        z[n - 1] = bottom_corner;
        inner.solve_in_place(&mut z);
        let denom = 1.0 + z[0] + top_corner * z[n - 1] / gamma;
        if denom == 0.0 || !denom.is_finite() {
            return Err(KppError::Internal(
                "cyclic tridiagonal solve is singular".into(),
            ));
        }
        Ok(Self {
            inner,
            z,
            gamma,
            top_corner,
            denom,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        self.inner.solve_in_place(x);
        let fact = (x[0] + self.top_corner * x[n - 1] / self.gamma) / self.denom;
        for (xi, zi) in x.iter_mut().zip(&self.z) {
            *xi -= fact * zi;
        }
    }
}

/// Least-squares line `y = slope * x + intercept`; returns
/// `(slope, intercept, slope_stderr, intercept_stderr)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(KppError::InsufficientData(format!(
            "line fit needs >= 2 paired points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(KppError::IllConditioned("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (se_slope, se_icpt) = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - slope * xi - intercept).powi(2))
            .sum();
        let s2 = rss / (nf - 2.0);
        let se_s = (s2 / sxx).sqrt();
        let se_i = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
        (se_s, se_i)
    } else {
        (0.0, 0.0)
    };
    Ok((slope, intercept, se_slope, se_icpt))
}

/// Least squares `y ~ sum_j coef[j] * columns[j]` by Householder QR on the
/// column-scaled design matrix. Returns the coefficients and the ratio of
/// the largest to smallest |R_jj| as a condition estimate.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let k = columns.len();
    let n = y.len();
    if k == 0 || n < k || columns.iter().any(|c| c.len() != n) {
        return Err(KppError::InsufficientData(format!(
            "least squares with {k} columns needs >= {k} rows, got {n}"
        )));
    }
    let scale: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if scale.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(KppError::IllConditioned(
            "zero or non-finite design column".into(),
        ));
    }
    let mut a: Vec<Vec<f64>> = columns
        .iter()
        .zip(&scale)
        .map(|(c, s)| c.iter().map(|v| v / s).collect())
        .collect();
    let mut b = y.to_vec();
    let mut rdiag = vec![0.0; k];
    for j in 0..k {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(KppError::IllConditioned(
                "rank-deficient design matrix".into(),
            ));
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(j) {
                let dot: f64 = v.iter().zip(&col[j..]).map(|(p, q)| p * q).sum();
                let f = 2.0 * dot / vnorm2;
                for (ci, vi) in col[j..].iter_mut().zip(&v) {
                    *ci -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[j..]).map(|(p, q)| p * q).sum();
            let f = 2.0 * dot / vnorm2;
            for (bi, vi) in b[j..].iter_mut().zip(&v) {
                *bi -= f * vi;
            }
        }
        rdiag[j] = a[j][j];
    }
    let mut coef = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in i + 1..k {
            s -= a[j][i] * coef[j];
        }
        coef[i] = s / a[i][i];
    }
    for (c, s) in coef.iter_mut().zip(&scale) {
        *c /= s;
    }
    let max_r = rdiag.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let min_r = rdiag.iter().fold(f64::INFINITY, |m, r| m.min(r.abs()));
    Ok((coef, max_r / min_r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| sub[i] * x[(i + n - 1) % n] + diag[i] * x[i] + sup[i] * x[(i + 1) % n])
            .collect()
    }

    #[test]
    fn flushed_solve_truncates_decaying_tail() {
        let n = 4000;
        let a = 16.0;
        let lu = TridiagonalLu::new(&vec![-a; n], &vec![1.0 + 2.0 * a; n], &vec![-a; n]).unwrap();
        let mut rhs = vec![0.0; n];
        rhs[..50].fill(1.0);
        let mut full = rhs.clone();
        lu.solve_in_place(&mut full);
        let mut flushed = rhs;
        lu.solve_in_place_flushed(&mut flushed, 1e-280);
        assert!(full.iter().any(|v| *v > 0.0 && *v < f64::MIN_POSITIVE));
        assert!(flushed.iter().all(|v| *v == 0.0 || *v >= 1e-281));
        for (a, b) in full.iter().zip(&flushed) {
            assert!((a - b).abs() <= 1e-279);
        }
    }

    #[test]
    fn thomas_recovers_known_solution() {
        let n = 9;
        let sub = vec![-1.0; n];
        let diag = vec![2.5; n];
        let sup = vec![-1.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += sub[i] * x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] += sup[i] * x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn cyclic_recovers_known_solution() {
        let n = 16;
        let sub: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * (i as f64).cos()).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.7 + 0.05 * i as f64 / n as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + 0.2 * (i as f64).sin()).collect();
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (0.7 * i as f64).cos()).collect();
        let rhs = matvec_cyclic(&sub, &diag, &sup, &x_true);
        let x = solve_cyclic(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let r = solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(KppError::Internal(_))));
    }

    #[test]
    fn line_fit_is_exact_on_lines() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let (s, i, se, _) = fit_line(&x, &y).unwrap();
        assert!((s - 3.0).abs() < 1e-14 && (i + 2.0).abs() < 1e-13 && se < 1e-12);
    }

    #[test]
    fn least_squares_three_columns() {
        let t: Vec<f64> = (0..50).map(|i| 50.0 + 7.0 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t - 1.5 * t.ln() + 0.3).collect();
        let cols = vec![
            t.clone(),
            t.iter().map(|t| -t.ln()).collect(),
            vec![1.0; t.len()],
        ];
        let (c, _) = least_squares(&cols, &y).unwrap();
        assert!(
            (c[0] - 2.0).abs() < 1e-9 && (c[1] - 1.5).abs() < 1e-7 && (c[2] - 0.3).abs() < 1e-6
        );
    }
}
