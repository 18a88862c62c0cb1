//! Independent oracles and instance generators for the end-to-end suite.
//! Nothing here shares numerical machinery with the library: feasibility
//! questions are answered in exact rational arithmetic by Fourier-Motzkin
//! elimination and estimation questions by a dense Newton solver with
//! explicit dummy columns.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use ndarray::Array1;
use num::{BigInt, BigRational, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sepguard::lp_oracle::expanded_row;
use sepguard::{Dataset, FactorColumn, ModelFamily};

type Q = BigRational;

fn q_int(v: i64) -> Q {
    BigRational::from_integer(BigInt::from(v))
}

fn q_exact(v: f64) -> Q {
    assert!(
        v.fract() == 0.0 && v.abs() < 1e15,
        "oracle inputs must be integral, got {v}"
    );
    q_int(v as i64)
}

/// Feasibility of the system a.x <= b by Fourier-Motzkin elimination in
/// exact rationals. Quadratic blowup is tamed by normalizing and
/// deduplicating after each elimination; instances here are tiny.
pub fn fm_feasible(mut cons: Vec<(Vec<Q>, Q)>, nvars: usize) -> bool {
    for var in 0..nvars {
        let mut pos: Vec<(Vec<Q>, Q)> = Vec::new();
        let mut neg: Vec<(Vec<Q>, Q)> = Vec::new();
        let mut next: Vec<(Vec<Q>, Q)> = Vec::new();
        for (a, b) in cons {
            if a[var].is_zero() {
                next.push((a, b));
            } else if a[var].is_positive() {
                pos.push((a, b));
            } else {
                neg.push((a, b));
            }
        }
        for (ap, bp) in &pos {
            for (an, bn) in &neg {
                let cp = ap[var].clone();
                let cn = -an[var].clone();
                let mut a: Vec<Q> = (0..nvars)
                    .map(|j| &ap[j] * &cn + &an[j] * &cp)
                    .collect();
                a[var] = Q::zero();
                let b = bp * &cn + bn * &cp;
                next.push((a, b));
            }
        }
        let mut seen = HashSet::new();
        cons = next
            .into_iter()
            .filter_map(|(mut a, mut b)| {
                let scale = a
                    .iter()
                    .map(|v| v.abs())
                    .fold(Q::zero(), |m, v| if v > m { v } else { m });
                if scale.is_zero() {
                    // variable-free constraint: either trivially true or a
                    // contradiction to keep for the final check
                    return if b.is_negative() { Some((a, b)) } else { None };
                }
                for v in a.iter_mut() {
                    *v = &*v / &scale;
                }
                b = &b / &scale;
                let key = format!("{a:?}|{b}");
                if seen.insert(key) {
                    Some((a, b))
                } else {
                    None
                }
            })
            .collect();
    }
    cons.iter().all(|(_, b)| !b.is_negative())
}

fn expanded_rational(ds: &Dataset) -> Vec<Vec<Q>> {
    (0..ds.n_obs())
        .map(|i| expanded_row(ds, i).iter().map(|&v| q_exact(v)).collect())
        .collect()
}

/// Existence of Gamma PML estimates, answered exactly: estimates fail to
/// exist when some direction has z >= 0 on every positive-outcome row
/// together with a strictly negative total, or a zero total that is strictly
/// positive somewhere on the positive rows.
pub fn gamma_exists_oracle(ds: &Dataset) -> bool {
    let x = expanded_rational(ds);
    let m = ds.n_columns();
    let pos: Vec<usize> = (0..ds.n_obs()).filter(|&i| ds.y[i] > 0.0).collect();
    let total: Vec<Q> = (0..m)
        .map(|j| x.iter().map(|r| r[j].clone()).fold(Q::zero(), |s, v| s + v))
        .collect();

    let sign_conditions = |cons: &mut Vec<(Vec<Q>, Q)>| {
        for &i in &pos {
            let a: Vec<Q> = x[i].iter().map(|v| -v.clone()).collect();
            cons.push((a, Q::zero()));
        }
    };

    // strictly negative total, normalized to <= -1
    let mut cons = Vec::new();
    sign_conditions(&mut cons);
    cons.push((total.clone(), q_int(-1)));
    if fm_feasible(cons, m) {
        return false;
    }

    // zero total with z >= 1 on some positive row
    for &k in &pos {
        let mut cons = Vec::new();
        sign_conditions(&mut cons);
        cons.push((total.clone(), Q::zero()));
        cons.push((total.iter().map(|v| -v.clone()).collect(), Q::zero()));
        cons.push((x[k].iter().map(|v| -v.clone()).collect(), q_int(-1)));
        if fm_feasible(cons, m) {
            return false;
        }
    }
    true
}

/// Existence of Inverse Gaussian PML estimates: they fail to exist when some
/// direction has z >= 0 on every positive row and z <= -1 on a zero row.
pub fn invgauss_exists_oracle(ds: &Dataset) -> bool {
    let x = expanded_rational(ds);
    let m = ds.n_columns();
    let pos: Vec<usize> = (0..ds.n_obs()).filter(|&i| ds.y[i] > 0.0).collect();
    let zero: Vec<usize> = (0..ds.n_obs()).filter(|&i| ds.y[i] == 0.0).collect();
    for &k in &zero {
        let mut cons: Vec<(Vec<Q>, Q)> = Vec::new();
        for &i in &pos {
            cons.push((x[i].iter().map(|v| -v.clone()).collect(), Q::zero()));
        }
        cons.push((x[k].clone(), q_int(-1)));
        if fm_feasible(cons, m) {
            return false;
        }
    }
    true
}

/// Dense Fisher-scoring fit with explicit dummy columns, solving the normal
/// equations by Gaussian elimination. Returns the coefficients over the
/// expanded columns, the linear predictors, and -2 * log-likelihood.
pub struct DenseFit {
    pub beta: Vec<f64>,
    pub eta: Array1<f64>,
    pub deviance: f64,
}

pub fn dense_newton(ds: &Dataset, family: &ModelFamily, start: Option<&[f64]>) -> DenseFit {
    let n = ds.n_obs();
    let cols: Vec<Vec<f64>> = {
        let mut cols: Vec<Vec<f64>> =
            ds.dense.iter().map(|(_, c)| c.to_vec()).collect();
        for f in &ds.factors {
            for l in 0..f.n_levels() {
                cols.push(
                    (0..n)
                        .map(|i| if f.levels[i] == l as u32 { 1.0 } else { 0.0 })
                        .collect(),
                );
            }
        }
        cols
    };
    let p = cols.len();
    let mut beta = start.map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; p]);
    let eta_of = |beta: &[f64]| -> Array1<f64> {
        Array1::from_iter((0..n).map(|i| {
            cols.iter().zip(beta).map(|(c, b)| c[i] * b).sum::<f64>()
        }))
    };
    // NAN marks an inadmissible trial point (for example a mean pinned to a
    // boundary), which the line search simply rejects
    let loglik_of = |eta: &Array1<f64>| -> f64 {
        (0..n)
            .map(|i| {
                family
                    .loglik_contribution(ds.y[i], eta[i], ds.weights[i])
                    .unwrap_or(f64::NAN)
            })
            .sum()
    };

    let mut eta = eta_of(&beta);
    let mut ll = loglik_of(&eta);
    for _ in 0..200 {
        // expected-information step: H = X' diag(psi) X, g = X' score
        let mut h = vec![vec![0.0f64; p]; p];
        let mut g = vec![0.0f64; p];
        for i in 0..n {
            let (psi, _) = family
                .irls_weight_and_response(ds.y[i], eta[i], ds.weights[i], 0.0)
                .unwrap();
            let s = family
                .score_contribution(ds.y[i], eta[i], ds.weights[i])
                .unwrap();
            for a in 0..p {
                let xa = cols[a][i];
                if xa == 0.0 {
                    continue;
                }
                g[a] += s * xa;
                for b in a..p {
                    h[a][b] += psi * xa * cols[b][i];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[a][b] = h[b][a];
            }
        }
        let delta = solve_symmetric(h, g);
        let gmax = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax < 1e-12 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&delta)
                .map(|(b, d)| b + step * d)
                .collect();
            let trial_eta = eta_of(&trial);
            let trial_ll = loglik_of(&trial_eta);
            if trial_ll.is_finite() && trial_ll >= ll - 1e-12 * (ll.abs() + 1.0) {
                let moved = trial_eta
                    .iter()
                    .zip(eta.iter())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                beta = trial;
                eta = trial_eta;
                ll = trial_ll;
                accepted = true;
                if moved < 1e-12 {
                    return DenseFit {
                        beta,
                        eta,
                        deviance: -2.0 * ll,
                    };
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    DenseFit {
        beta,
        eta,
        deviance: -2.0 * ll,
    }
}

/// Gaussian elimination with partial pivoting; near-singular pivots zero the
/// corresponding coordinate (redundant dummy directions).
fn solve_symmetric(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let p = b.len();
    let mut perm: Vec<usize> = (0..p).collect();
    let scale = (0..p).fold(0.0f64, |m, i| m.max(a[i][i].abs()));
    let tol = 1e-12 * scale.max(1e-300);
    let mut dropped = vec![false; p];
    for k in 0..p {
        let piv = (k..p).max_by(|&i, &j| {
            a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap()
        });
        let piv = piv.unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        perm.swap(k, piv);
        if a[k][k].abs() < tol {
            dropped[k] = true;
            continue;
        }
        for i in k + 1..p {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..p {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0f64; p];
    for k in (0..p).rev() {
        if dropped[k] {
            continue;
        }
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    let mut out = vec![0.0f64; p];
    for k in 0..p {
        out[perm[k]] = x[k];
    }
    out
}

/// Keep only the listed rows, re-encoding factor levels in first-seen order
/// the way a fresh CSV load would.
pub fn subset(ds: &Dataset, keep: &[usize]) -> Dataset {
    let y: Vec<f64> = keep.iter().map(|&i| ds.y[i]).collect();
    let dense: Vec<(String, Vec<f64>)> = ds
        .dense
        .iter()
        .map(|(name, c)| (name.clone(), keep.iter().map(|&i| c[i]).collect()))
        .collect();
    let factors: Vec<FactorColumn> = ds
        .factors
        .iter()
        .map(|f| {
            let mut names: Vec<String> = Vec::new();
            let mut remap: HashMap<u32, u32> = HashMap::new();
            let levels: Vec<u32> = keep
                .iter()
                .map(|&i| {
                    let old = f.levels[i];
                    *remap.entry(old).or_insert_with(|| {
                        names.push(f.level_names[old as usize].clone());
                        (names.len() - 1) as u32
                    })
                })
                .collect();
            FactorColumn {
                name: f.name.clone(),
                levels,
                level_names: names,
            }
        })
        .collect();
    let weights: Vec<f64> = keep.iter().map(|&i| ds.weights[i]).collect();
    Dataset::from_parts(y, dense, factors, Some(weights), true).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random count-data instance: integer covariates in [-2, 2], about
/// 40% zero outcomes, 0 to 2 small factors. A constant is included when no
/// factor is.
pub fn random_small_instance(seed: u64) -> Dataset {
    let mut r = rng(seed);
    let n = r.gen_range(5..=30);
    let p = r.gen_range(1..=5);
    let n_factors = r.gen_range(0..=2usize);
    let dense: Vec<(String, Vec<f64>)> = (0..p)
        .map(|j| {
            (
                format!("x{j}"),
                (0..n).map(|_| r.gen_range(-2..=2) as f64).collect(),
            )
        })
        .collect();
    let factors: Vec<FactorColumn> = (0..n_factors)
        .map(|fj| {
            let l = r.gen_range(2..=3usize);
            // lead with one row per level so none is declared but unused
            FactorColumn {
                name: format!("f{fj}"),
                levels: (0..n)
                    .map(|i| if i < l { i as u32 } else { r.gen_range(0..l) as u32 })
                    .collect(),
                level_names: (0..l).map(|k| format!("l{k}")).collect(),
            }
        })
        .collect();
    let mut y: Vec<f64> = (0..n)
        .map(|_| {
            if r.gen_bool(0.4) {
                0.0
            } else {
                r.gen_range(1..=6) as f64
            }
        })
        .collect();
    if y.iter().all(|&v| v == 0.0) {
        y[0] = 1.0;
    }
    Dataset::from_parts(y, dense, factors, None, false).unwrap()
}

/// Instance with quasi-complete separation planted through a dense column:
/// x_sep is 0 on every positive-outcome row and strictly negative on a known
/// subset of the zero rows. Returns (dataset, planted 0-based rows).
pub fn planted_dense_separation(seed: u64, with_factor: bool) -> (Dataset, Vec<usize>) {
    let mut r = rng(seed);
    let n = r.gen_range(30..=60);
    let mut x1 = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut planted = Vec::new();
    for i in 0..n {
        // two pinned interior covariate values keep the certificate from
        // recruiting x1
        let v1 = if i < 2 { (i + 1) as f64 } else { r.gen_range(-2..=2) as f64 };
        x1.push(v1);
        if i % 4 == 0 && i >= 4 {
            let neg = r.gen_bool(0.5);
            if neg {
                planted.push(i);
                xs.push(-(r.gen_range(1..=3) as f64));
            } else {
                xs.push(0.0);
            }
            y.push(0.0);
        } else {
            xs.push(0.0);
            y.push(r.gen_range(1..=5) as f64);
        }
    }
    let dense = vec![("x1".to_string(), x1), ("xsep".to_string(), xs)];
    let factors = if with_factor {
        // every level gets both boundary and interior rows, so the factor
        // stays out of the certificate
        let l = 3usize;
        vec![FactorColumn {
            name: "f".to_string(),
            levels: (0..n).map(|i| (i % l) as u32).collect(),
            level_names: (0..l).map(|k| format!("l{k}")).collect(),
        }]
    } else {
        vec![]
    };
    let ds = Dataset::from_parts(y, dense, factors, None, false).unwrap();
    (ds, planted)
}

/// Binary instance with verified overlap, for the bounded-outcome paths.
pub fn random_binary_instance(seed: u64, n: usize, p: usize) -> Dataset {
    let mut r = rng(seed);
    let beta: Vec<f64> = (0..=p).map(|_| r.gen_range(-0.8..0.8)).collect();
    let dense: Vec<(String, Vec<f64>)> = (0..p)
        .map(|j| {
            (
                format!("x{j}"),
                (0..n).map(|_| r.gen_range(-1.5..1.5)).collect(),
            )
        })
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta: f64 = beta[0]
                + dense
                    .iter()
                    .zip(&beta[1..])
                    .map(|((_, c), b)| c[i] * b)
                    .sum::<f64>();
            let pr = 1.0 / (1.0 + (-eta).exp());
            if r.gen_bool(pr.clamp(0.02, 0.98)) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Dataset::from_parts(y, dense, vec![], None, false).unwrap()
}
