//! Weighted least squares with high-dimensional fixed effects: alternating
//! projections for the within-transformation, Frisch-Waugh-Lovell recovery of
//! residuals and fitted values, and a rank-revealing dense solve.

use ndarray::Array1;
use rayon::prelude::*;

use crate::dataset::{Dataset, FactorColumn, NO_LEVEL};
use crate::error::Error;

#[derive(Debug, Clone)]
pub struct WlsOptions {
    /// Relative per-cell convergence tolerance of the within-transform.
    pub tol_projection: f64,
    pub max_sweeps: usize,
    /// Sweeps before Aitken extrapolation kicks in.
    pub accel_warmup: usize,
    /// Drop a pivot when |R_kk| < rank_tol * max |R_11..R_kk|.
    pub rank_tol: f64,
}

impl Default for WlsOptions {
    fn default() -> Self {
        WlsOptions {
            tol_projection: 1e-10,
            max_sweeps: 100_000,
            accel_warmup: 3,
            rank_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WlsSolution {
    /// Coefficient per active dense column; collinear-dropped columns get 0.
    pub coefficients: Vec<f64>,
    pub dropped: Vec<bool>,
    pub fitted: Array1<f64>,
    pub residuals: Array1<f64>,
    pub converged: bool,
    pub projection_iterations: usize,
}

/// One weighted group-demeaning pass over all factors.
fn demean_sweep(x: &mut [f64], factors: &[FactorColumn], weights: &[f64]) {
    for f in factors {
        let nl = f.n_levels();
        let mut sums = vec![0.0f64; nl];
        let mut wsum = vec![0.0f64; nl];
        for (i, &l) in f.levels.iter().enumerate() {
            if l != NO_LEVEL {
                sums[l as usize] += weights[i] * x[i];
                wsum[l as usize] += weights[i];
            }
        }
        for l in 0..nl {
            if wsum[l] > 0.0 {
                sums[l] /= wsum[l];
            }
        }
        for (i, &l) in f.levels.iter().enumerate() {
            if l != NO_LEVEL {
                x[i] -= sums[l as usize];
            }
        }
    }
}

fn within_transform_column(
    col: &mut Array1<f64>,
    factors: &[FactorColumn],
    weights: &[f64],
    opts: &WlsOptions,
) -> Result<usize, Error> {
    if factors.is_empty() {
        return Ok(0);
    }
    let x = col.as_slice_mut().expect("contiguous column");
    if factors.len() == 1 {
        // a single demeaning is an exact projection
        demean_sweep(x, factors, weights);
        return Ok(1);
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0);
    }
    // With several factors the weighted projection is solved by LSQR on the
    // sqrt-weight-scaled least-squares problem over the level coefficients,
    // with the columns normalized to unit norm. Alternating demeaning
    // contracts at a rate that can be indistinguishable from 1 when the
    // weights are very skewed (the detector puts enormous weight on the
    // non-boundary rows), silently stalling far from the projection. A
    // Krylov method is immune to a lone extreme singular value, and working
    // on the scaled problem instead of its normal equations keeps the
    // attainable accuracy proportional to the square root of the weight
    // ratio rather than the ratio itself.
    let n = x.len();
    let mut offsets = Vec::with_capacity(factors.len());
    let mut nlev = 0usize;
    for f in factors {
        offsets.push(nlev);
        nlev += f.n_levels();
    }
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut diag = vec![0.0f64; nlev];
    for (f, &off) in factors.iter().zip(&offsets) {
        for (i, &l) in f.levels.iter().enumerate() {
            if l != NO_LEVEL {
                diag[off + l as usize] += weights[i];
            }
        }
    }
    // column scale: each level column of sqrt(W) D gets unit norm
    let cs: Vec<f64> = diag
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    // y -> sqrt(W) D S y
    let apply = |y: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (f, &off) in factors.iter().zip(&offsets) {
            for (i, &l) in f.levels.iter().enumerate() {
                if l != NO_LEVEL {
                    let j = off + l as usize;
                    out[i] += cs[j] * y[j];
                }
            }
        }
        for (o, s) in out.iter_mut().zip(&sw) {
            *o *= s;
        }
    };
    // r -> S' D' sqrt(W) r
    let apply_t = |r: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (f, &off) in factors.iter().zip(&offsets) {
            for (i, &l) in f.levels.iter().enumerate() {
                if l != NO_LEVEL {
                    let j = off + l as usize;
                    out[j] += cs[j] * sw[i] * r[i];
                }
            }
        }
    };
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();

    // right-hand side sqrt(W) x
    let mut u: Vec<f64> = x.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let beta0 = norm(&u);
    // gradient reference: the largest normal-equations residual a column of
    // this scale can produce, used for the absolute convergence test so that
    // re-projecting an already projected column is a no-op
    let target = opts.tol_projection * 1e-3;
    let grad_ref =
        scale * weights.iter().sum::<f64>().sqrt() * (factors.len() as f64).sqrt();
    let tol_grad = target * grad_ref.max(f64::MIN_POSITIVE);
    if beta0 == 0.0 {
        return Ok(0);
    }
    for v in u.iter_mut() {
        *v /= beta0;
    }
    let mut v = vec![0.0f64; nlev];
    apply_t(&u, &mut v);
    let mut alpha = norm(&v);
    if alpha * beta0 <= tol_grad {
        return Ok(0);
    }
    for q in v.iter_mut() {
        *q /= alpha;
    }
    let mut w = v.clone();
    let mut y = vec![0.0f64; nlev];
    let mut phibar = beta0;
    let mut rhobar = alpha;
    let mut tmp_n = vec![0.0f64; n];
    let mut tmp_l = vec![0.0f64; nlev];
    let mut best_grad = f64::INFINITY;
    let mut best_y = y.clone();
    let mut since_best = 0usize;
    let mut iters = 0usize;
    let mut grad = alpha * beta0;
    while iters < opts.max_sweeps && since_best < 20 {
        iters += 1;
        // bidiagonalization step
        apply(&v, &mut tmp_n);
        for ((t, uk), _) in tmp_n.iter_mut().zip(&u).zip(0..n) {
            *t -= alpha * uk;
        }
        let beta = norm(&tmp_n);
        if beta > 0.0 {
            for (uk, t) in u.iter_mut().zip(&tmp_n) {
                *uk = t / beta;
            }
        }
        apply_t(&u, &mut tmp_l);
        for (t, vk) in tmp_l.iter_mut().zip(&v) {
            *t -= beta * vk;
        }
        alpha = norm(&tmp_l);
        if alpha > 0.0 {
            for (vk, t) in v.iter_mut().zip(&tmp_l) {
                *vk = t / alpha;
            }
        }
        // apply the next plane rotation
        let rho = rhobar.hypot(beta);
        if rho == 0.0 {
            break;
        }
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar *= s;
        let t1 = phi / rho;
        let t2 = theta / rho;
        for ((yk, wk), vk) in y.iter_mut().zip(w.iter_mut()).zip(&v) {
            *yk += t1 * *wk;
            *wk = vk - t2 * *wk;
        }
        // size of the normal-equations residual at the current iterate
        grad = phibar * alpha * c.abs();
        if grad <= tol_grad {
            best_grad = grad;
            best_y.copy_from_slice(&y);
            break;
        }
        if grad < 0.99 * best_grad {
            best_grad = grad;
            best_y.copy_from_slice(&y);
            since_best = 0;
        } else {
            since_best += 1;
        }
    }
    if grad > best_grad {
        y.copy_from_slice(&best_y);
        grad = best_grad;
    }
    if iters >= opts.max_sweeps && grad > tol_grad {
        return Err(Error::ProjectionDiverged {
            sweeps: iters,
            last_delta: grad,
        });
    }
    // remove the fitted group effects from the raw column
    for (f, &off) in factors.iter().zip(&offsets) {
        for (i, &l) in f.levels.iter().enumerate() {
            if l != NO_LEVEL {
                let j = off + l as usize;
                x[i] -= cs[j] * y[j];
            }
        }
    }
    Ok(iters)
}

/// Residualize each column on the factor-group structure by iterated
/// weighted group demeaning. Columns are independent and run in parallel.
pub fn within_transform(
    columns: &mut [Array1<f64>],
    factors: &[FactorColumn],
    weights: &Array1<f64>,
    opts: &WlsOptions,
) -> Result<usize, Error> {
    let w = weights.as_slice().expect("contiguous weights");
    let iters: Result<Vec<usize>, Error> = columns
        .par_iter_mut()
        .map(|col| within_transform_column(col, factors, w, opts))
        .collect();
    Ok(iters?.into_iter().max().unwrap_or(0))
}

/// Householder QR with column pivoting on sqrt(weight)-scaled columns.
/// Returns (coefficients, dropped flags).
fn pivoted_qr_solve(
    cols: &[Array1<f64>],
    rhs: &Array1<f64>,
    weights: &Array1<f64>,
    rank_tol: f64,
) -> (Vec<f64>, Vec<bool>) {
    let n = rhs.len();
    let p = cols.len();
    if p == 0 {
        return (vec![], vec![]);
    }
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut a: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| c.iter().zip(&sw).map(|(v, s)| v * s).collect())
        .collect();
    let mut b: Vec<f64> = rhs.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let mut pivots: Vec<usize> = (0..p).collect();
    let mut rdiag_max = 0.0f64;
    let mut rank = 0usize;

    for k in 0..p.min(n) {
        // pivot: largest remaining column norm below row k
        let mut best = k;
        let mut best_norm = 0.0;
        for j in k..p {
            let norm: f64 = a[j][k..].iter().map(|v| v * v).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        a.swap(k, best);
        pivots.swap(k, best);
        let rkk = best_norm.sqrt();
        rdiag_max = rdiag_max.max(rkk);
        if rkk < rank_tol * rdiag_max || rkk == 0.0 {
            break;
        }
        rank += 1;
        // Householder vector for column k
        let alpha = if a[k][k] >= 0.0 { -rkk } else { rkk };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        a[k][k] = alpha;
        for x in a[k][k + 1..].iter_mut() {
            *x = 0.0;
        }
        if vnorm2 > 0.0 {
            for j in k + 1..p {
                let dot: f64 = v.iter().zip(&a[j][k..]).map(|(vi, xi)| vi * xi).sum();
                let scale = 2.0 * dot / vnorm2;
                for (vi, xi) in v.iter().zip(a[j][k..].iter_mut()) {
                    *xi -= scale * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[k..]).map(|(vi, xi)| vi * xi).sum();
            let scale = 2.0 * dot / vnorm2;
            for (vi, xi) in v.iter().zip(b[k..].iter_mut()) {
                *xi -= scale * vi;
            }
        }
    }

    // back-substitution over the leading rank x rank triangle
    let mut sol = vec![0.0f64; p];
    for k in (0..rank).rev() {
        let mut s = b[k];
        for j in k + 1..rank {
            s -= a[j][k] * sol[j];
        }
        sol[k] = s / a[k][k];
    }
    let mut coefficients = vec![0.0f64; p];
    let mut dropped = vec![true; p];
    for k in 0..rank {
        coefficients[pivots[k]] = sol[k];
        dropped[pivots[k]] = false;
    }
    (coefficients, dropped)
}

/// Weighted least squares of `regressand` on the active dense columns plus
/// all factors of the dataset, by partialling out the factors and solving
/// the low-dimensional problem. Fitted values come from the FWL residual
/// identity: the partialled regression has the same residuals as the full
/// one.
pub fn wls_solve(
    regressand: &Array1<f64>,
    ds: &Dataset,
    active_columns: &[usize],
    weights: &Array1<f64>,
    opts: &WlsOptions,
) -> Result<WlsSolution, Error> {
    if active_columns.is_empty() && ds.factors.is_empty() {
        return Err(Error::EmptyModel);
    }
    let mut work: Vec<Array1<f64>> = Vec::with_capacity(active_columns.len() + 1);
    work.push(regressand.clone());
    for &j in active_columns {
        work.push(ds.dense[j].1.clone());
    }
    let projection_iterations = within_transform(&mut work, &ds.factors, weights, opts)?;
    let y_tilde = work.remove(0);
    let (coefficients, dropped) = pivoted_qr_solve(&work, &y_tilde, weights, opts.rank_tol);
    if ds.factors.is_empty() && dropped.iter().all(|&d| d) {
        return Err(Error::EmptyModel);
    }
    let mut residuals = y_tilde;
    for (j, col) in work.iter().enumerate() {
        let c = coefficients[j];
        if c != 0.0 {
            for (r, x) in residuals.iter_mut().zip(col.iter()) {
                *r -= c * x;
            }
        }
    }
    let fitted = regressand - &residuals;
    Ok(WlsSolution {
        coefficients,
        dropped,
        fitted,
        residuals,
        converged: true,
        projection_iterations,
    })
}

/// Decompose a vector living (approximately) in the factor-dummy column
/// space into per-factor level effects by weighted backfitting. Levels the
/// target does not identify (NO_LEVEL rows) contribute nothing.
pub fn recover_factor_effects(
    target: &Array1<f64>,
    factors: &[FactorColumn],
    weights: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Vec<Vec<f64>> {
    let n = target.len();
    let mut effects: Vec<Vec<f64>> = factors.iter().map(|f| vec![0.0; f.n_levels()]).collect();
    if factors.is_empty() {
        return effects;
    }
    let mut fitted = vec![0.0f64; n];
    for _ in 0..max_iter {
        let mut max_change = 0.0f64;
        for (q, f) in factors.iter().enumerate() {
            let nl = f.n_levels();
            let mut sums = vec![0.0f64; nl];
            let mut wsum = vec![0.0f64; nl];
            for (i, &l) in f.levels.iter().enumerate() {
                if l != NO_LEVEL {
                    let partial = target[i] - (fitted[i] - effects[q][l as usize]);
                    sums[l as usize] += weights[i] * partial;
                    wsum[l as usize] += weights[i];
                }
            }
            for l in 0..nl {
                let new = if wsum[l] > 0.0 { sums[l] / wsum[l] } else { 0.0 };
                let delta = new - effects[q][l];
                if delta != 0.0 {
                    max_change = max_change.max(delta.abs());
                    for (i, &li) in f.levels.iter().enumerate() {
                        if li as usize == l && li != NO_LEVEL {
                            fitted[i] += delta;
                        }
                    }
                }
                effects[q][l] = new;
            }
        }
        if max_change < tol {
            break;
        }
    }
    effects
}
