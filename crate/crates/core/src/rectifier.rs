//! Iterative rectifier: separation detection by repeated weighted least
//! squares on a rectified working regressand. Converges to a certificate of
//! separation whose negative entries mark the separated observations.

use ndarray::Array1;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::families::ModelFamily;
use crate::hdfe_wls::{recover_factor_effects, wls_solve, WlsOptions};
use crate::logit_poisson;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMethod {
    Rectifier,
    Lp,
    RankOnly,
}

impl DetectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectionMethod::Rectifier => "rectifier",
            DetectionMethod::Lp => "lp",
            DetectionMethod::RankOnly => "rank_only",
        }
    }
}

/// Observation-level witness z = Xγ of separation: zero on the interior,
/// weakly negative where y = 0, weakly positive where y is at the upper
/// bound, strictly nonzero somewhere.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub z: Array1<f64>,
    /// Loadings over model columns (dense, then factor levels); absent when
    /// only z was recovered.
    pub gamma: Option<Vec<f64>>,
    /// Number of strictly nonzero entries of z.
    pub strictness: usize,
}

/// Internal-consistency measurements of a rectifier run.
#[derive(Debug, Clone, Copy)]
pub struct RectifierDiagnostics {
    /// Running sum of weighted SSR values across iterations; bounded by the
    /// number of boundary observations.
    pub ssr_sum: f64,
    /// Largest working-regressand entry seen at any iteration (must stay
    /// <= 0).
    pub max_u: f64,
    /// Unweighted R-squared of the final iteration.
    pub final_r2: f64,
    pub n_boundary: usize,
}

#[derive(Debug, Clone)]
pub struct SeparationReport {
    pub separated: Vec<usize>,
    pub certificate: Option<Certificate>,
    pub method: DetectionMethod,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon: Option<f64>,
    pub k: Option<f64>,
    pub diagnostics: Option<RectifierDiagnostics>,
}

impl SeparationReport {
    pub fn empty(method: DetectionMethod) -> Self {
        SeparationReport {
            separated: Vec::new(),
            certificate: None,
            method,
            iterations: 0,
            converged: true,
            epsilon: None,
            k: None,
            diagnostics: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectorOptions {
    pub epsilon: f64,
    /// Iteration cap.
    pub max_iterations: usize,
    /// Re-derive K (and shrink epsilon) from the current regressand each
    /// iteration instead of fixing them once up front.
    pub tighten: bool,
    /// Also back-solve the factor-level loadings of the certificate.
    pub recover_gamma: bool,
    pub wls: WlsOptions,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        DetectorOptions {
            epsilon: 1e-5,
            max_iterations: 10_000,
            tighten: false,
            recover_gamma: false,
            wls: WlsOptions::default(),
        }
    }
}

/// Smallest integer strictly greater than u'u / epsilon^2; the weight put on
/// the non-boundary rows so their fitted values stay within epsilon of zero.
pub fn choose_k(u_squared_sum: f64, epsilon: f64) -> Result<f64, Error> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidData("epsilon must be positive".into()));
    }
    let q = u_squared_sum / (epsilon * epsilon);
    // guard against the quotient landing a few ulps below an exact integer
    let nearest = q.round();
    let q = if (q - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        q
    };
    let k = q.floor() + 1.0;
    if !k.is_finite() || k > 1e308 {
        return Err(Error::KOverflow { epsilon });
    }
    Ok(k)
}

const EPSILON_FLOOR: f64 = 1e-14;
// Weight put on the non-boundary rows is capped: past this point the
// least-squares solves lose more accuracy to the weight ratio than the
// larger weight buys in tighter interior fitted values.
const K_CAP: f64 = 1e12;

/// Detect separation. Families with bounded outcomes are first rewritten
/// into their count-model equivalent (which only has the y = 0 boundary);
/// families with unbounded likelihoods are refused, as dropping observations
/// is not a valid remedy for them.
pub fn detect(
    ds: &Dataset,
    family: &ModelFamily,
    opts: &DetectorOptions,
) -> Result<SeparationReport, Error> {
    ds.validate_for(family)?;
    if !family.likelihood_bounded() {
        return Err(Error::UnboundedLikelihoodFamily(family.name()));
    }
    if family.is_bounded() {
        let eq = logit_poisson::to_poisson_equivalent(ds)?;
        let report = detect_zero_boundary(&eq.data, opts)?;
        return logit_poisson::map_report_back(report, &eq, ds.n_obs());
    }
    detect_zero_boundary(ds, opts)
}

/// One rectifier run over the rows not yet flagged. Flagged rows carry zero
/// weight and are released from the sign clamp (their working value tracks
/// the fitted value), so the run solves the detection problem on the
/// remaining data while still producing an in-span vector over all rows.
struct RectifierPass {
    u: Array1<f64>,
    new_separated: Vec<usize>,
    gamma: Option<Vec<f64>>,
    iterations: usize,
    converged: bool,
    epsilon: f64,
    k: f64,
    ssr_sum: f64,
    max_u: f64,
    final_r2: f64,
    n_boundary: usize,
}

fn rectifier_pass(
    ds: &Dataset,
    opts: &DetectorOptions,
    excluded: &[bool],
) -> Result<RectifierPass, Error> {
    let n = ds.n_obs();
    let epsilon = opts.epsilon.max(EPSILON_FLOOR);
    let at_zero: Vec<usize> = (0..n)
        .filter(|&i| ds.y[i] == 0.0 && !excluded[i])
        .collect();
    let n0 = at_zero.len();

    let mut u = Array1::zeros(n);
    for &i in &at_zero {
        u[i] = -1.0;
    }
    let k0 = choose_k(n0 as f64, epsilon)?.min(K_CAP);
    let mut weights = Array1::ones(n);
    for i in 0..n {
        if excluded[i] {
            weights[i] = 0.0;
        } else if ds.y[i] > 0.0 {
            weights[i] = k0;
        }
    }
    let active: Vec<usize> = (0..ds.n_dense()).collect();

    let mut ssr_sum = 0.0f64;
    let mut max_u = f64::NEG_INFINITY;
    let mut final_r2 = 1.0f64;
    let mut eps_iter = epsilon;
    let mut k_iter = k0;
    let mut last_sol = None;
    let mut converged = false;
    let mut iterations = 0usize;
    let mut prev_scale = 0.0f64;
    let mut ratios: Vec<f64> = Vec::new();

    // without separation the iterates decay geometrically to zero; once the
    // live part of the regressand is this small relative to its unit start,
    // stop looking
    const DECAY_FLOOR: f64 = 1e-9;
    // a stopped iterate only counts as a certificate if the regression
    // reproduces it almost exactly, relative to its own scale; otherwise the
    // run was still mid-decay and the candidate is spurious
    const EXACTNESS: f64 = 1e-8;

    while iterations < opts.max_iterations {
        iterations += 1;
        if opts.tighten && iterations > 1 {
            let uu: f64 = at_zero.iter().map(|&i| u[i] * u[i]).sum();
            eps_iter = (eps_iter * 0.5).max(EPSILON_FLOOR);
            k_iter = choose_k(uu, eps_iter)?.min(K_CAP);
            for i in 0..n {
                if !excluded[i] && ds.y[i] > 0.0 {
                    weights[i] = k_iter;
                }
            }
        }
        max_u = (0..n)
            .filter(|&i| !excluded[i])
            .fold(max_u, |m, i| m.max(u[i]));
        let sol = wls_solve(&u, ds, &active, &weights, &opts.wls)?;
        let ssr: f64 = sol
            .residuals
            .iter()
            .zip(weights.iter())
            .map(|(e, w)| w * e * e)
            .sum();
        ssr_sum += ssr;
        let sse: f64 = u
            .iter()
            .zip(sol.fitted.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let sst: f64 = u.iter().map(|v| v * v).sum();
        final_r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };

        let scale = at_zero
            .iter()
            .fold(0.0f64, |m, &i| m.max(sol.fitted[i].abs()));
        if scale < DECAY_FLOOR {
            converged = true;
            u.fill(0.0);
            last_sol = Some(sol);
            break;
        }

        if sol.residuals.iter().all(|e| e.abs() < eps_iter) {
            let max_err = sol
                .residuals
                .iter()
                .fold(0.0f64, |m, e| m.max(e.abs()));
            if max_err < EXACTNESS * scale {
                converged = true;
                u = sol.fitted.clone();
                for (i, v) in u.iter_mut().enumerate() {
                    if !excluded[i] && v.abs() < epsilon {
                        *v = 0.0;
                    }
                }
                last_sol = Some(sol);
                break;
            }
            // the residual test passed only because the iterate has decayed,
            // not because it stopped moving; chase it with a smaller epsilon
            let uu: f64 = at_zero.iter().map(|&i| u[i] * u[i]).sum();
            eps_iter = (eps_iter * 0.1).max(EPSILON_FLOOR);
            k_iter = choose_k(uu.max(EPSILON_FLOOR), eps_iter)?.min(K_CAP);
            for i in 0..n {
                if !excluded[i] && ds.y[i] > 0.0 {
                    weights[i] = k_iter;
                }
            }
        }
        // A vanishing iterate can shrink geometrically with a ratio close to
        // one and take tens of thousands of sweeps to reach the decay floor.
        // The ratio is a stable, well-measured quantity in that regime, so
        // once it holds steady below one, extrapolate every coordinate to
        // its geometric limit and continue from there. A converging
        // certificate keeps its scale, never enters this branch, and a bad
        // jump is harmless because every stopping rule re-checks the iterate.
        if prev_scale > 0.0 {
            ratios.push(scale / prev_scale);
        }
        let mut factor = 0.0f64;
        if ratios.len() >= 5 {
            let recent = &ratios[ratios.len() - 5..];
            let lo = recent.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = recent.iter().cloned().fold(0.0f64, f64::max);
            if hi < 0.9999 && hi - lo < 1e-3 {
                let lambda = recent.iter().sum::<f64>() / 5.0;
                let f = lambda / (1.0 - lambda);
                // only fast-forward when the whole iterate is projected to
                // die out; a surviving component means a certificate is
                // forming and the extrapolation would overshoot it
                let vanishing = at_zero.iter().all(|&i| {
                    let next = sol.fitted[i].min(0.0);
                    (next + f * (next - u[i])).abs() < 0.05 * scale
                });
                if vanishing {
                    factor = f;
                    ratios.clear();
                    prev_scale = 0.0;
                } else {
                    prev_scale = scale;
                }
            } else {
                prev_scale = scale;
            }
        } else {
            prev_scale = scale;
        }
        for &i in &at_zero {
            let next = sol.fitted[i].min(0.0);
            u[i] = (next + factor * (next - u[i])).min(0.0);
        }
        for i in 0..n {
            if excluded[i] {
                let next = sol.fitted[i];
                u[i] = next + factor * (next - u[i]);
            }
        }
        last_sol = Some(sol);
    }

    let new_separated: Vec<usize> = at_zero.iter().copied().filter(|&i| u[i] < 0.0).collect();
    let gamma = last_sol.as_ref().and_then(|sol| {
        if new_separated.is_empty() {
            None
        } else if ds.factors.is_empty() {
            Some(sol.coefficients.clone())
        } else if opts.recover_gamma {
            let mut fe_part = u.clone();
            for (j, &c) in active.iter().zip(&sol.coefficients) {
                if c != 0.0 {
                    fe_part.scaled_add(-c, &ds.dense[*j].1);
                }
            }
            let effects =
                recover_factor_effects(&fe_part, &ds.factors, &Array1::ones(n), 1e-10, 10_000);
            let mut g = sol.coefficients.clone();
            for eff in effects {
                g.extend(eff);
            }
            Some(g)
        } else {
            None
        }
    });
    Ok(RectifierPass {
        u,
        new_separated,
        gamma,
        iterations,
        converged,
        epsilon: eps_iter,
        k: k_iter,
        ssr_sum,
        max_u,
        final_r2,
        n_boundary: n0,
    })
}

fn detect_zero_boundary(ds: &Dataset, opts: &DetectorOptions) -> Result<SeparationReport, Error> {
    let n = ds.n_obs();
    let epsilon = opts.epsilon.max(EPSILON_FLOOR);
    let n0 = (0..n).filter(|&i| ds.y[i] == 0.0).count();
    if n0 == 0 {
        let mut rep = SeparationReport::empty(DetectionMethod::Rectifier);
        rep.epsilon = Some(epsilon);
        return Ok(rep);
    }

    // A single run can stop at a valid but non-maximal certificate: a row
    // whose own direction lies in the certificate cone has leverage near one
    // under the K-weighting, so its working value creeps toward the maximal
    // certificate at a rate of order 1/K and the stopping rule fires first.
    // Flagged rows are therefore removed (zero weight, no clamp) and the run
    // repeated until nothing new is found. On the reduced data the maximal
    // separated set is exactly the not-yet-flagged remainder of the full
    // maximal set: restricting a certificate keeps it valid, and a reduced
    // certificate scaled by a small positive factor adds to the running one
    // without breaking its sign conditions. The same scaling combines the
    // per-pass certificates into one in-span certificate for the union.
    let mut excluded = vec![false; n];
    let mut z_total: Option<Array1<f64>> = None;
    let mut gamma_total: Option<Vec<f64>> = None;
    let mut separated: Vec<usize> = Vec::new();
    let mut iterations = 0usize;
    let mut converged = true;
    let mut diag = RectifierDiagnostics {
        ssr_sum: 0.0,
        max_u: f64::NEG_INFINITY,
        final_r2: 1.0,
        n_boundary: 0,
    };
    let mut eps_last;
    let mut k_last;

    loop {
        let pass = rectifier_pass(ds, opts, &excluded)?;
        iterations += pass.iterations;
        converged &= pass.converged;
        diag.ssr_sum += pass.ssr_sum;
        diag.max_u = diag.max_u.max(pass.max_u);
        // the R-squared of a pass that found nothing describes a decayed
        // iterate; keep the one from the last pass that produced certificate
        // rows unless no pass did
        if !pass.new_separated.is_empty() || separated.is_empty() {
            diag.final_r2 = pass.final_r2;
        }
        diag.n_boundary += pass.n_boundary;
        eps_last = pass.epsilon;
        k_last = pass.k;

        if pass.new_separated.is_empty() {
            break;
        }
        match (&mut z_total, &mut gamma_total) {
            (None, _) => {
                z_total = Some(pass.u.clone());
                gamma_total = pass.gamma.clone();
            }
            (Some(z), g) => {
                // scale the new certificate so it cannot push an already
                // strictly negative entry across zero
                let mut t = 1.0f64;
                for i in 0..n {
                    if excluded[i] && pass.u[i] > 0.0 {
                        t = t.min(-z[i] / (2.0 * pass.u[i]));
                    }
                }
                for i in 0..n {
                    z[i] += t * pass.u[i];
                }
                if let (Some(gt), Some(gp)) = (g.as_mut(), pass.gamma.as_ref()) {
                    for (a, b) in gt.iter_mut().zip(gp) {
                        *a += t * b;
                    }
                } else {
                    *g = None;
                }
            }
        }
        for &i in &pass.new_separated {
            excluded[i] = true;
        }
        separated.extend(&pass.new_separated);
        if separated.len() == n0 || !pass.converged {
            break;
        }
    }

    separated.sort_unstable();
    if converged && separated.is_empty() {
        let mut rep = SeparationReport::empty(DetectionMethod::Rectifier);
        rep.iterations = iterations;
        rep.epsilon = Some(eps_last);
        rep.k = Some(k_last);
        rep.diagnostics = Some(diag);
        return Ok(rep);
    }

    let strictness = separated.len();
    let z = z_total.unwrap_or_else(|| Array1::zeros(n));
    Ok(SeparationReport {
        separated,
        certificate: Some(Certificate {
            z,
            gamma: gamma_total,
            strictness,
        }),
        method: DetectionMethod::Rectifier,
        iterations,
        converged,
        epsilon: Some(eps_last),
        k: Some(k_last),
        diagnostics: Some(diag),
    })
}

/// Check a claimed certificate: z must lie in the model column space
/// (uncentered R-squared of 1 when regressed on the regressors) and satisfy
/// the boundary sign conditions with at least one strict entry.
pub fn verify_certificate(
    ds: &Dataset,
    family: &ModelFamily,
    cert: &Certificate,
) -> (bool, Vec<String>) {
    let mut violations = Vec::new();
    let n = ds.n_obs();
    if cert.z.len() != n {
        return (false, vec!["certificate length mismatch".into()]);
    }
    let zmax = cert.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps_cert = 1e-6 * zmax;
    if zmax == 0.0 {
        return (false, vec!["certificate is identically zero".into()]);
    }

    let active: Vec<usize> = (0..ds.n_dense()).collect();
    match wls_solve(&cert.z, ds, &active, &Array1::ones(n), &WlsOptions::default()) {
        Ok(sol) => {
            let sse: f64 = sol.residuals.iter().map(|e| e * e).sum();
            let sst: f64 = cert.z.iter().map(|v| v * v).sum();
            if sse > 1e-8 * sst {
                violations.push(format!(
                    "z is not in the column space (residual share {:.3e})",
                    sse / sst
                ));
            }
        }
        Err(e) => violations.push(format!("column-space regression failed: {e}")),
    }

    let part = ds.boundary_partition(family);
    let mut strict = 0usize;
    for &i in &part.interior {
        if cert.z[i].abs() > eps_cert {
            violations.push(format!("z[{i}] nonzero on an interior observation"));
        }
    }
    for &i in &part.at_zero {
        if cert.z[i] > eps_cert {
            violations.push(format!("z[{i}] positive on a y=0 observation"));
        }
        if cert.z[i] < -eps_cert {
            strict += 1;
        }
    }
    for &i in &part.at_upper {
        if cert.z[i] < -eps_cert {
            violations.push(format!("z[{i}] negative on an upper-bound observation"));
        }
        if cert.z[i] > eps_cert {
            strict += 1;
        }
    }
    if strict == 0 {
        violations.push("no strictly separated observation".into());
    }
    (violations.is_empty(), violations)
}
