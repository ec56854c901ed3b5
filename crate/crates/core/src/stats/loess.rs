//! Local polynomial regression with tricube weights, plus a robust
//! residual rule for flagging outliers.

use std::collections::BTreeSet;

use crate::numeric;

use super::StatsError;

#[derive(Debug, Clone, PartialEq)]
pub struct LoessFit {
    pub span: f64,
    pub degree: u8,
    pub points: Vec<(f64, f64)>,
    /// Fitted values at the kept points, in index order.
    pub fitted: Vec<f64>,
    pub excluded_outliers: BTreeSet<usize>,
}

impl LoessFit {
    /// Indices of points that took part in the fit.
    pub fn kept(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|i| !self.excluded_outliers.contains(i))
            .collect()
    }

    fn kept_xy(&self) -> (Vec<f64>, Vec<f64>) {
        self.kept().iter().map(|&i| self.points[i]).unzip()
    }

    /// Local estimate at an arbitrary `x` from the kept points.
    pub fn predict(&self, x: f64) -> f64 {
        let (xs, ys) = self.kept_xy();
        local_estimate(&xs, &ys, x, self.span, self.degree)
    }

    /// `(index, y − fitted)` for every kept point.
    pub fn residuals(&self) -> Vec<(usize, f64)> {
        self.kept()
            .into_iter()
            .zip(&self.fitted)
            .map(|(i, f)| (i, self.points[i].1 - f))
            .collect()
    }
}

/// Minimum number of points for a fit of `degree`.
pub fn min_points(degree: u8) -> usize {
    4.max(degree as usize + 2)
}

/// Fits every point using all points.
pub fn loess_fit(points: &[(f64, f64)], span: f64, degree: u8) -> Result<LoessFit, StatsError> {
    loess_fit_excluding(points, span, degree, BTreeSet::new())
}

/// Fits the points not listed in `excluded`.
pub fn loess_fit_excluding(
    points: &[(f64, f64)],
    span: f64,
    degree: u8,
    excluded: BTreeSet<usize>,
) -> Result<LoessFit, StatsError> {
    if !(span > 0.0 && span <= 1.0) {
        return Err(StatsError::InvalidSpan(span));
    }
    if !(1..=2).contains(&degree) {
        return Err(StatsError::InvalidDegree(degree));
    }
    let kept: Vec<usize> = (0..points.len()).filter(|i| !excluded.contains(i)).collect();
    let needed = min_points(degree);
    if kept.len() < needed {
        return Err(StatsError::TooFewPoints {
            needed,
            got: kept.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = kept.iter().map(|&i| points[i]).unzip();
    let fitted = xs
        .iter()
        .map(|&x0| local_estimate(&xs, &ys, x0, span, degree))
        .collect();
    Ok(LoessFit {
        span,
        degree,
        points: points.to_vec(),
        fitted,
        excluded_outliers: excluded,
    })
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Weighted least-squares polynomial at `x0` over the ⌈span·n⌉ nearest
/// neighbours (ties at the cut-off distance included).
fn local_estimate(xs: &[f64], ys: &[f64], x0: f64, span: f64, degree: u8) -> f64 {
    let n = xs.len();
    let q = ((span * n as f64).ceil() as usize).clamp(1, n);
    let mut dist: Vec<f64> = xs.iter().map(|x| (x - x0).abs()).collect();
    let d_max = {
        dist.sort_by(f64::total_cmp);
        dist[q - 1]
    };

    let mut nb_x = Vec::with_capacity(q);
    let mut nb_y = Vec::with_capacity(q);
    let mut nb_w = Vec::with_capacity(q);
    for (&x, &y) in xs.iter().zip(ys) {
        let d = (x - x0).abs();
        if d <= d_max {
            let w = if d_max > 0.0 { tricube(d / d_max) } else { 1.0 };
            nb_x.push(x);
            nb_y.push(y);
            nb_w.push(w);
        }
    }

    let scale = if d_max > 0.0 { d_max } else { 1.0 };
    let distinct_weighted = {
        let mut v: Vec<f64> = nb_x
            .iter()
            .zip(&nb_w)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&x, _)| x)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    if distinct_weighted > degree as usize {
        if let Some(v) = solve_local(&nb_x, &nb_y, &nb_w, x0, scale, degree as usize) {
            return v;
        }
    }
    weighted_mean(&nb_y, &nb_w)
}

fn weighted_mean(ys: &[f64], ws: &[f64]) -> f64 {
    let sw: f64 = ws.iter().sum();
    if sw > 0.0 {
        numeric::compensated_sum(ys.iter().zip(ws).map(|(y, w)| y * w)) / sw
    } else {
        numeric::mean(ys).unwrap_or(f64::NAN)
    }
}

/// Normal equations in the centred, scaled coordinate t = (x − x0)/scale;
/// the intercept is the estimate at x0.
fn solve_local(xs: &[f64], ys: &[f64], ws: &[f64], x0: f64, scale: f64, degree: usize) -> Option<f64> {
    let m = degree + 1;
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        if w == 0.0 {
            continue;
        }
        let t = (x - x0) / scale;
        let pow = [1.0, t, t * t];
        for i in 0..m {
            b[i] += w * pow[i] * y;
            for j in 0..m {
                a[i][j] += w * pow[i] * pow[j];
            }
        }
    }
    gaussian_solve(&mut a, &mut b, m).map(|c| c[0])
}

fn gaussian_solve(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], m: usize) -> Option<[f64; 3]> {
    let scale = (0..m).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Points whose residual lies more than `k` robust standard deviations
/// (1.4826 × MAD) from the median residual. A zero MAD flags nothing.
pub fn detect_outliers_residual(fit: &LoessFit, k: f64) -> BTreeSet<usize> {
    let residuals = fit.residuals();
    let values: Vec<f64> = residuals.iter().map(|(_, r)| *r).collect();
    let Some(center) = numeric::median(&values) else {
        return BTreeSet::new();
    };
    let deviations: Vec<f64> = values.iter().map(|r| (r - center).abs()).collect();
    let mad = numeric::median(&deviations).unwrap_or(0.0) * 1.4826;
    if !(mad > 0.0) {
        return BTreeSet::new();
    }
    residuals
        .into_iter()
        .filter(|(_, r)| (r - center).abs() > k * mad)
        .map(|(i, _)| i)
        .collect()
}
