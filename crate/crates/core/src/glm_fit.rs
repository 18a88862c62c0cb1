//! Estimation workflow: detect separation, drop the separated observations,
//! fit the remaining sample by IRLS with the factors partialled out, and
//! flag the coefficients whose estimates the certificate shows diverging.

use ndarray::Array1;

use crate::dataset::{Dataset, NO_LEVEL};
use crate::error::Error;
use crate::families::ModelFamily;
use crate::hdfe_wls::{recover_factor_effects, within_transform, wls_solve, WlsOptions};
use crate::lp_oracle::{existence_check, lp_detect_with, reduced_lp_detect, LpOptions};
use crate::rectifier::{detect, DetectorOptions, SeparationReport};

/// Which detector runs before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectStrategy {
    /// Iterative rectifier (default; scales to large problems).
    Rectifier,
    /// Simplex oracle on the expanded design (small problems).
    Lp,
    /// Collinearity-screened LP; fast but blind to factor-only certificates.
    ReducedLp,
    /// Rectifier, cross-checked against the LP when the problem is small.
    Auto,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub strategy: DetectStrategy,
    pub detector: DetectorOptions,
    pub lp: LpOptions,
    pub tol_dev: f64,
    pub tol_eta: f64,
    pub max_iterations: usize,
    pub step_halving_max: usize,
    /// IRLS weights below this are treated as a collapsed mean.
    pub weight_floor: f64,
    pub wls: WlsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            strategy: DetectStrategy::Rectifier,
            detector: DetectorOptions {
                recover_gamma: true,
                ..Default::default()
            },
            lp: LpOptions::default(),
            tol_dev: 1e-9,
            tol_eta: 1e-8,
            max_iterations: 1000,
            step_halving_max: 20,
            weight_floor: 1e-12,
            wls: WlsOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// One entry per dense column; collinear-dropped and diverging columns
    /// report 0 here and have no standard error.
    pub coefficients: Vec<f64>,
    pub collinear_dropped: Vec<bool>,
    /// Columns the overall certificate loads on; their estimates diverge in
    /// the compactified model and the remaining ones are relative to them.
    pub implicated: Vec<bool>,
    /// Per factor, one effect per level, normalized so each connected
    /// component has a single free constant.
    pub factor_effects: Vec<Vec<f64>>,
    /// Linear predictors and means on the retained rows, in retained order.
    pub eta: Array1<f64>,
    pub mu: Array1<f64>,
    /// Original indices of the rows the model was fit on.
    pub retained: Vec<usize>,
    /// Original indices of the rows dropped as separated.
    pub dropped: Vec<usize>,
    pub loglik: f64,
    pub deviance: f64,
    /// Expected information over the partialled dense columns.
    pub information: Vec<Vec<f64>>,
    pub std_errors: Vec<Option<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub report: Option<SeparationReport>,
}

pub fn fit(ds: &Dataset, family: &ModelFamily, opts: &FitOptions) -> Result<FitResult, Error> {
    ds.validate_for(family)?;
    if !family.likelihood_bounded() {
        // no amount of dropping rescues these; refuse unless estimates exist
        let verdict = existence_check(ds, family)?;
        if !verdict.exists {
            return Err(Error::NonExistence {
                family: family.name(),
                reason: verdict.reason.as_str().to_string(),
            });
        }
        let mut res = irls_solve(ds, family, None, opts)?;
        res.retained = (0..ds.n_obs()).collect();
        return Ok(res);
    }

    let report = run_detector(ds, family, opts)?;
    let dropped = report.separated.clone();
    if dropped.len() == ds.n_obs() {
        return Err(Error::CompleteSeparation);
    }
    let retained: Vec<usize> = (0..ds.n_obs()).filter(|i| !dropped.contains(i)).collect();
    let sub = ds.subset(&retained)?;

    let mut res = irls_solve(&sub, family, None, opts)?;
    res.retained = retained;
    res.dropped = dropped;
    if let Some(cert) = report.certificate.as_ref() {
        if let Some(gamma) = cert.gamma.as_ref() {
            let scale = gamma
                .iter()
                .take(ds.n_dense())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            for (m, g) in gamma.iter().take(ds.n_dense()).enumerate() {
                if g.abs() > 1e-6 * scale {
                    res.implicated[m] = true;
                    res.coefficients[m] = 0.0;
                    res.std_errors[m] = None;
                }
            }
        }
    }
    res.report = Some(report);
    Ok(res)
}

fn run_detector(
    ds: &Dataset,
    family: &ModelFamily,
    opts: &FitOptions,
) -> Result<SeparationReport, Error> {
    match opts.strategy {
        DetectStrategy::Rectifier => detect(ds, family, &opts.detector),
        DetectStrategy::Lp => lp_detect_with(ds, family, &opts.lp),
        DetectStrategy::ReducedLp => reduced_lp_detect(ds, family),
        DetectStrategy::Auto => {
            let rep = detect(ds, family, &opts.detector)?;
            if ds.n_obs() <= 1000 && ds.n_columns() <= opts.lp.max_columns {
                let oracle = lp_detect_with(ds, family, &opts.lp)?;
                if oracle.separated != rep.separated {
                    // the simplex result is exact on small problems
                    return Ok(oracle);
                }
            }
            Ok(rep)
        }
    }
}

pub fn irls_solve(
    ds: &Dataset,
    family: &ModelFamily,
    start: Option<&Array1<f64>>,
    opts: &FitOptions,
) -> Result<FitResult, Error> {
    let n = ds.n_obs();
    let p = ds.n_dense();
    let active: Vec<usize> = (0..p).collect();
    if n == 0 {
        return Err(Error::InvalidData("no observations to fit".into()));
    }

    let mut eta = match start {
        Some(e) => e.clone(),
        None => starting_eta(ds, family)?,
    };
    let mut beta = vec![0.0f64; p];
    let mut dropped = vec![false; p];
    // the warm start lies off the model manifold and may beat every model
    // point, so the monotone-deviance guard only arms after the first step
    let mut dev = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0usize;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut psi = Array1::zeros(n);
        let mut q = Array1::zeros(n);
        for i in 0..n {
            let (w, r) = family
                .irls_weight_and_response(ds.y[i], eta[i], ds.weights[i], opts.weight_floor)
                .map_err(|e| {
                    Error::IrlsDiverged(format!(
                        "row {}: {e}; run separation detection on this sample",
                        i + 1
                    ))
                })?;
            psi[i] = w;
            q[i] = r;
        }
        let sol = wls_solve(&q, ds, &active, &psi, &opts.wls)?;

        // accept the step, halving toward the current point if the deviance
        // worsens
        let mut step = 1.0f64;
        let (eta_new, beta_new, dev_new) = loop {
            let trial_eta: Array1<f64> = eta
                .iter()
                .zip(sol.fitted.iter())
                .map(|(a, b)| (1.0 - step) * a + step * b)
                .collect();
            let trial_beta: Vec<f64> = beta
                .iter()
                .zip(&sol.coefficients)
                .map(|(b0, b1)| (1.0 - step) * b0 + step * b1)
                .collect();
            match deviance_at(ds, family, &trial_eta) {
                Ok(d) if d <= dev + 1e-8 * (dev.abs() + 1.0) => break (trial_eta, trial_beta, d),
                _ if step > 0.5f64.powi(opts.step_halving_max as i32) => {
                    step *= 0.5;
                }
                Ok(d) => {
                    return Err(Error::IrlsDiverged(format!(
                        "deviance increased from {dev} to {d} after {} halvings",
                        opts.step_halving_max
                    )))
                }
                Err(e) => return Err(Error::IrlsDiverged(e.to_string())),
            }
        };

        let max_deta = eta
            .iter()
            .zip(eta_new.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let dev_change = (dev - dev_new).abs();
        eta = eta_new;
        beta = beta_new;
        dropped = sol.dropped;
        dev = dev_new;
        if dev_change < opts.tol_dev * (dev.abs() + 1.0) && max_deta < opts.tol_eta {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::IrlsDiverged(format!(
            "no convergence after {} iterations (deviance {dev})",
            opts.max_iterations
        )));
    }

    let mut mu = Array1::zeros(n);
    for i in 0..n {
        mu[i] = family.mean(eta[i])?;
    }
    let mut loglik = 0.0;
    for i in 0..n {
        loglik += family.loglik_contribution(ds.y[i], eta[i], ds.weights[i])?;
    }

    // final working weights drive the expected information
    let mut psi = Array1::zeros(n);
    for i in 0..n {
        let (w, _) =
            family.irls_weight_and_response(ds.y[i], eta[i], ds.weights[i], opts.weight_floor)?;
        psi[i] = w;
    }
    let (information, std_errors) = information_and_se(ds, &psi, &dropped, &opts.wls)?;

    let factor_effects = if ds.factors.is_empty() {
        Vec::new()
    } else {
        let mut fe_part = eta.clone();
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                fe_part.scaled_add(-b, &ds.dense[j].1);
            }
        }
        let effects =
            recover_factor_effects(&fe_part, &ds.factors, &Array1::ones(n), 1e-10, 10_000);
        normalize_effects(ds, effects)
    };

    Ok(FitResult {
        coefficients: beta,
        collinear_dropped: dropped,
        implicated: vec![false; p],
        factor_effects,
        eta,
        mu,
        retained: (0..n).collect(),
        dropped: Vec::new(),
        loglik,
        deviance: dev,
        information,
        std_errors,
        iterations,
        converged,
        report: None,
    })
}

fn starting_eta(ds: &Dataset, family: &ModelFamily) -> Result<Array1<f64>, Error> {
    let n = ds.n_obs();
    if family.is_bounded() {
        return Ok(Array1::zeros(n));
    }
    let mean = ds.y.sum() / n as f64;
    if !(mean > 0.0) {
        return Err(Error::InvalidData(
            "every outcome is zero; the conditional mean has no interior solution".into(),
        ));
    }
    Ok(ds.y.mapv(|y| (y + mean / 2.0).ln()))
}

fn deviance_at(ds: &Dataset, family: &ModelFamily, eta: &Array1<f64>) -> Result<f64, Error> {
    let mut l = 0.0;
    for i in 0..ds.n_obs() {
        l += family.loglik_contribution(ds.y[i], eta[i], ds.weights[i])?;
    }
    Ok(-2.0 * l)
}

/// Expected information over the partialled dense columns and the standard
/// errors from its inverse. Columns that are collinear-dropped, or whose
/// pivot falls below tolerance (singular information), get no standard error.
fn information_and_se(
    ds: &Dataset,
    psi: &Array1<f64>,
    dropped: &[bool],
    wls: &WlsOptions,
) -> Result<(Vec<Vec<f64>>, Vec<Option<f64>>), Error> {
    let p = ds.n_dense();
    let mut cols: Vec<Array1<f64>> = ds.dense.iter().map(|(_, c)| c.clone()).collect();
    within_transform(&mut cols, &ds.factors, psi, wls)?;

    let mut info = vec![vec![0.0f64; p]; p];
    for a in 0..p {
        for b in a..p {
            let v: f64 = cols[a]
                .iter()
                .zip(cols[b].iter())
                .zip(psi.iter())
                .map(|((x, y), w)| w * x * y)
                .sum();
            info[a][b] = v;
            info[b][a] = v;
        }
    }

    let kept: Vec<usize> = (0..p).filter(|&m| !dropped[m]).collect();
    let variances = inverse_diagonal(&info, &kept);
    let mut se = vec![None; p];
    for (slot, &m) in variances.iter().zip(&kept) {
        se[m] = slot.map(f64::sqrt);
    }
    Ok((info, se))
}

/// Diagonal of the inverse of `info` restricted to `kept`, via pivoted
/// Cholesky; entries whose pivot collapses are reported as absent.
fn inverse_diagonal(info: &[Vec<f64>], kept: &[usize]) -> Vec<Option<f64>> {
    let k = kept.len();
    let mut a = vec![vec![0.0f64; k]; k];
    for (r, &i) in kept.iter().enumerate() {
        for (c, &j) in kept.iter().enumerate() {
            a[r][c] = info[i][j];
        }
    }
    let max_diag = (0..k).fold(0.0f64, |m, i| m.max(a[i][i]));
    if max_diag <= 0.0 {
        return vec![None; k];
    }
    let tol = 1e-12 * max_diag;

    // pivoted Cholesky: perm tracks the chosen order, rank the usable pivots
    let mut perm: Vec<usize> = (0..k).collect();
    let mut l = vec![vec![0.0f64; k]; k];
    let mut rank = 0usize;
    let mut work = a.clone();
    for step in 0..k {
        let (best, best_val) = (step..k)
            .map(|i| (i, work[perm[i]][perm[i]]))
            .fold((step, f64::NEG_INFINITY), |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            });
        if best_val <= tol {
            break;
        }
        perm.swap(step, best);
        let pj = perm[step];
        let d = work[pj][pj].sqrt();
        l[step][step] = d;
        for i in (step + 1)..k {
            let pi = perm[i];
            l[i][step] = work[pi][pj] / d;
        }
        for i in (step + 1)..k {
            for j in (step + 1)..=i {
                work[perm[i]][perm[j]] -= l[i][step] * l[j][step];
                work[perm[j]][perm[i]] = work[perm[i]][perm[j]];
            }
        }
        rank += 1;
    }

    // invert the rank x rank lower-triangular factor; diag(A^-1) over the
    // pivoted block is the column sums of squares of L^-1
    let mut linv = vec![vec![0.0f64; rank]; rank];
    for j in 0..rank {
        linv[j][j] = 1.0 / l[j][j];
        for i in (j + 1)..rank {
            let s: f64 = (j..i).map(|t| l[i][t] * linv[t][j]).sum();
            linv[i][j] = -s / l[i][i];
        }
    }
    let mut out = vec![None; k];
    for j in 0..rank {
        let v: f64 = (j..rank).map(|i| linv[i][j] * linv[i][j]).sum();
        out[perm[j]] = Some(v);
    }
    out
}

/// Pin one reference constant per connected component of the bipartite
/// observation graph over (factor, level) nodes: within a component, the
/// first level of every factor after the first is shifted to 0 and the shift
/// is absorbed into the component's first factor. Skipped when some rows
/// lack a level for some factor, since the shifts would not cancel there.
fn normalize_effects(ds: &Dataset, mut effects: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let nf = ds.factors.len();
    if nf < 2 {
        return effects;
    }
    for f in &ds.factors {
        if f.levels.iter().any(|&l| l == NO_LEVEL) {
            return effects;
        }
    }

    // union-find over (factor, level) nodes, rows connect their levels
    let offsets: Vec<usize> = ds
        .factors
        .iter()
        .scan(0usize, |acc, f| {
            let o = *acc;
            *acc += f.n_levels();
            Some(o)
        })
        .collect();
    let total: usize = ds.factors.iter().map(|f| f.n_levels()).sum();
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..ds.n_obs() {
        let first = offsets[0] + ds.factors[0].levels[i] as usize;
        for (q, f) in ds.factors.iter().enumerate().skip(1) {
            let node = offsets[q] + f.levels[i] as usize;
            let (a, b) = (find(&mut parent, first), find(&mut parent, node));
            if a != b {
                parent[b] = a;
            }
        }
    }

    // component -> (anchor factor, its levels), then shift the later factors
    use std::collections::HashMap;
    let mut anchor: HashMap<usize, usize> = HashMap::new();
    for q in 0..nf {
        for l in 0..ds.factors[q].n_levels() {
            let root = find(&mut parent, offsets[q] + l);
            anchor.entry(root).or_insert(q);
        }
    }
    for q in 1..nf {
        // reference level per (component, factor q): first level seen
        let mut reference: HashMap<usize, f64> = HashMap::new();
        let mut shifts: HashMap<usize, f64> = HashMap::new();
        for l in 0..ds.factors[q].n_levels() {
            let root = find(&mut parent, offsets[q] + l);
            if anchor[&root] == q {
                continue;
            }
            let c = *reference.entry(root).or_insert(effects[q][l]);
            effects[q][l] -= c;
            shifts.insert(root, c);
        }
        for (aq, eff) in effects.iter_mut().enumerate().take(q) {
            for (l, v) in eff.iter_mut().enumerate() {
                let root = find(&mut parent, offsets[aq] + l);
                if anchor[&root] == aq {
                    if let Some(c) = shifts.get(&root) {
                        *v += c;
                    }
                }
            }
        }
    }
    effects
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FactorColumn;
    use crate::testdata::table2_dataset;

    fn poisson_const(y: Vec<f64>) -> Dataset {
        let n = y.len();
        Dataset::from_parts(y, vec![("one".into(), vec![1.0; n])], vec![], None, true).unwrap()
    }

    #[test]
    fn const_only_poisson_closed_form() {
        let ds = poisson_const(vec![1.0, 2.0, 3.0]);
        let res = fit(&ds, &ModelFamily::Poisson, &FitOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 10);
        assert!((res.coefficients[0] - 2.0f64.ln()).abs() < 1e-9);
        for m in res.mu.iter() {
            assert!((m - 2.0).abs() < 1e-8);
        }
        // information = sum of fitted means = 6
        assert!((res.information[0][0] - 6.0).abs() < 1e-6);
        let se = res.std_errors[0].unwrap();
        assert!((se - 1.0 / 6.0f64.sqrt()).abs() < 1e-8);
        assert!(res.dropped.is_empty());
    }

    #[test]
    fn single_factor_poisson_group_means() {
        let ds = Dataset::from_parts(
            vec![1.0, 3.0, 5.0],
            vec![],
            vec![FactorColumn {
                name: "g".into(),
                levels: vec![0, 0, 1],
                level_names: vec!["a".into(), "b".into()],
            }],
            None,
            true,
        )
        .unwrap();
        let res = fit(&ds, &ModelFamily::Poisson, &FitOptions::default()).unwrap();
        assert!((res.mu[0] - 2.0).abs() < 1e-7);
        assert!((res.mu[1] - 2.0).abs() < 1e-7);
        assert!((res.mu[2] - 5.0).abs() < 1e-7);
        assert_eq!(res.factor_effects.len(), 1);
        assert!((res.factor_effects[0][0] - 2.0f64.ln()).abs() < 1e-6);
        assert!((res.factor_effects[0][1] - 5.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn table2_drops_and_reports_relative_columns() {
        let ds = table2_dataset();
        let res = fit(&ds, &ModelFamily::Poisson, &FitOptions::default()).unwrap();
        assert_eq!(res.dropped, vec![0, 1, 2]);
        assert_eq!(res.retained, vec![3, 4, 5, 6, 7, 8]);
        // x2 = x3 = x4 on every retained row, so two of the three drop
        let n_collinear = res.collinear_dropped.iter().filter(|&&d| d).count();
        assert_eq!(n_collinear, 2);
        assert!(!res.collinear_dropped[0], "the constant survives");
        // certificate loads on x2, x3, x4 but not the constant
        assert!(!res.implicated[0]);
        assert!(res.implicated.iter().skip(1).any(|&f| f));
        for (m, imp) in res.implicated.iter().enumerate() {
            if *imp {
                assert!(res.std_errors[m].is_none());
            }
        }
        // score at the solution vanishes on retained columns
        let sub = ds.subset(&res.retained).unwrap();
        for (j, (_, col)) in sub.dense.iter().enumerate() {
            if res.collinear_dropped[j] || res.implicated[j] {
                continue;
            }
            let mut s = 0.0;
            for i in 0..sub.n_obs() {
                s += ModelFamily::Poisson
                    .score_contribution(sub.y[i], res.eta[i], 1.0)
                    .unwrap()
                    * col[i];
            }
            assert!(s.abs() < 1e-7, "score on column {j}: {s}");
        }
        // retained means stay strictly interior
        for (i, m) in res.mu.iter().enumerate() {
            assert!(*m > 0.0, "mu[{i}]");
        }
    }

    #[test]
    fn complete_separation_is_an_error() {
        let ds = Dataset::from_parts(
            vec![0.0, 1.0],
            vec![("x".into(), vec![-1.0, 1.0])],
            vec![],
            None,
            false,
        )
        .unwrap();
        let err = fit(&ds, &ModelFamily::Logit, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::CompleteSeparation));
    }

    #[test]
    fn gamma_refuses_when_estimates_do_not_exist() {
        let ds = table2_dataset();
        let err = fit(&ds, &ModelFamily::GammaPml, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonExistence { .. }));
    }

    #[test]
    fn gamma_fits_when_estimates_exist() {
        let ds = Dataset::from_parts(
            vec![1.0, 2.0, 4.0],
            vec![("x".into(), vec![0.0, 1.0, 2.0])],
            vec![],
            None,
            false,
        )
        .unwrap();
        let res = fit(&ds, &ModelFamily::GammaPml, &FitOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.dropped.is_empty());
        // exact solution: log-linear in x with ratio 2
        assert!((res.coefficients[1] - 2.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn logit_matches_dense_newton() {
        // small, well-conditioned binary problem
        let y = vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let x = vec![-1.0, -0.5, 0.5, 1.0, 0.3, -0.2, 0.8, 0.1];
        let ds = Dataset::from_parts(y.clone(), vec![("x".into(), x.clone())], vec![], None, false)
            .unwrap();
        let res = fit(&ds, &ModelFamily::Logit, &FitOptions::default()).unwrap();
        assert!(res.dropped.is_empty());

        // Newton-Raphson on (const, x)
        let mut b = [0.0f64; 2];
        for _ in 0..50 {
            let mut g = [0.0f64; 2];
            let mut h = [[0.0f64; 2]; 2];
            for i in 0..y.len() {
                let eta = b[0] + b[1] * x[i];
                let p = 1.0 / (1.0 + (-eta).exp());
                let r = y[i] - p;
                let w = p * (1.0 - p);
                let xi = [1.0, x[i]];
                for a in 0..2 {
                    g[a] += r * xi[a];
                    for c in 0..2 {
                        h[a][c] += w * xi[a] * xi[c];
                    }
                }
            }
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            b[0] += (h[1][1] * g[0] - h[0][1] * g[1]) / det;
            b[1] += (h[0][0] * g[1] - h[1][0] * g[0]) / det;
        }
        assert!((res.coefficients[0] - b[0]).abs() < 1e-7, "{:?} vs {b:?}", res.coefficients);
        assert!((res.coefficients[1] - b[1]).abs() < 1e-7);
    }

    #[test]
    fn two_factor_effects_are_normalized() {
        // crossed two-way layout, fully connected
        let ds = Dataset::from_parts(
            vec![1.0, 2.0, 2.0, 4.0],
            vec![],
            vec![
                FactorColumn {
                    name: "f".into(),
                    levels: vec![0, 0, 1, 1],
                    level_names: vec!["a".into(), "b".into()],
                },
                FactorColumn {
                    name: "g".into(),
                    levels: vec![0, 1, 0, 1],
                    level_names: vec!["u".into(), "v".into()],
                },
            ],
            None,
            true,
        )
        .unwrap();
        let res = fit(&ds, &ModelFamily::Poisson, &FitOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.factor_effects[1][0], 0.0, "reference level pinned");
        // eta reassembles from the effects
        for i in 0..4 {
            let e = res.factor_effects[0][ds.factors[0].levels[i] as usize]
                + res.factor_effects[1][ds.factors[1].levels[i] as usize];
            assert!((e - res.eta[i]).abs() < 1e-6, "row {i}");
        }
    }

    #[test]
    fn all_zero_outcomes_are_rejected() {
        let ds = poisson_const(vec![0.0, 0.0]);
        let err = fit(&ds, &ModelFamily::Poisson, &FitOptions::default()).unwrap_err();
        // detection flags everything: the mean must collapse to zero
        assert!(matches!(
            err,
            Error::CompleteSeparation | Error::InvalidData(_)
        ));
    }

    #[test]
    fn weighted_poisson_moves_the_mean() {
        let ds = Dataset::from_parts(
            vec![1.0, 3.0],
            vec![("one".into(), vec![1.0, 1.0])],
            vec![],
            Some(vec![3.0, 1.0]),
            true,
        )
        .unwrap();
        let res = fit(&ds, &ModelFamily::Poisson, &FitOptions::default()).unwrap();
        // weighted FOC: sum alpha_i (y_i - mu) = 0 => mu = 6/4
        assert!((res.mu[0] - 1.5).abs() < 1e-8);
    }

    #[test]
    fn auto_strategy_agrees_with_rectifier() {
        let ds = table2_dataset();
        let auto = fit(
            &ds,
            &ModelFamily::Poisson,
            &FitOptions {
                strategy: DetectStrategy::Auto,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(auto.dropped, vec![0, 1, 2]);
    }
}
