//! Rewrite a bounded-outcome (binary or fractional) model as a count model
//! on a doubled dataset: each observation gains an artificial partner with
//! outcome 1 - y and all covariates zeroed, and the pair is tied together by
//! a pair-level factor. Estimation and separation carry over exactly, which
//! lets the y = 0 machinery handle the upper bound too.

use ndarray::Array1;

use crate::dataset::{Dataset, FactorColumn, NO_LEVEL};
use crate::error::Error;
use crate::rectifier::{Certificate, SeparationReport};

#[derive(Debug, Clone)]
pub struct EquivalentDataset {
    /// 2N rows: original i at 2i, its artificial partner at 2i+1.
    pub data: Dataset,
    /// Original row of each equivalent row.
    pub origin: Vec<usize>,
}

pub fn to_poisson_equivalent(ds: &Dataset) -> Result<EquivalentDataset, Error> {
    let n = ds.n_obs();
    if let Some(i) = ds.y.iter().position(|&v| v > 1.0) {
        return Err(Error::InvalidData(format!(
            "outcome must lie in [0, 1], row {} has {}",
            i + 1,
            ds.y[i]
        )));
    }
    let mut y = Vec::with_capacity(2 * n);
    let mut origin = Vec::with_capacity(2 * n);
    for i in 0..n {
        y.push(ds.y[i]);
        y.push(1.0 - ds.y[i]);
        origin.push(i);
        origin.push(i);
    }
    let dense: Vec<(String, Vec<f64>)> = ds
        .dense
        .iter()
        .map(|(name, col)| {
            let mut v = Vec::with_capacity(2 * n);
            for i in 0..n {
                v.push(col[i]);
                v.push(0.0);
            }
            (name.clone(), v)
        })
        .collect();
    let mut factors: Vec<FactorColumn> = ds
        .factors
        .iter()
        .map(|f| {
            let mut levels = Vec::with_capacity(2 * n);
            for i in 0..n {
                levels.push(f.levels[i]);
                levels.push(NO_LEVEL);
            }
            FactorColumn {
                name: f.name.clone(),
                levels,
                level_names: f.level_names.clone(),
            }
        })
        .collect();
    let mut pair_levels = Vec::with_capacity(2 * n);
    for i in 0..n {
        pair_levels.push(i as u32);
        pair_levels.push(i as u32);
    }
    factors.push(FactorColumn {
        name: "_pair".to_string(),
        levels: pair_levels,
        level_names: (1..=n).map(|i| i.to_string()).collect(),
    });
    let mut weights = Vec::with_capacity(2 * n);
    for i in 0..n {
        weights.push(ds.weights[i]);
        weights.push(ds.weights[i]);
    }
    let data = Dataset::from_parts(y, dense, factors, Some(weights), true)?;
    Ok(EquivalentDataset { data, origin })
}

/// Re-index a report on the doubled dataset back to the original rows. An
/// original row is separated when either member of its pair is; its
/// certificate value is the difference of the pair's values, which lies in
/// the original column space (the pair effect cancels) and carries the
/// boundary sign conditions for the bounded model.
pub fn map_report_back(
    report: SeparationReport,
    eq: &EquivalentDataset,
    n_original: usize,
) -> Result<SeparationReport, Error> {
    if eq.origin.len() != 2 * n_original {
        return Err(Error::InvalidData(
            "equivalent dataset does not match the original row count".into(),
        ));
    }
    let certificate = match &report.certificate {
        None => None,
        Some(cert) => {
            if cert.z.len() != 2 * n_original {
                return Err(Error::InvalidData(
                    "certificate length does not match the equivalent dataset".into(),
                ));
            }
            let mut z = Array1::zeros(n_original);
            for i in 0..n_original {
                z[i] = cert.z[2 * i] - cert.z[2 * i + 1];
            }
            let strictness = z.iter().filter(|v| **v != 0.0).count();
            // pair-level loadings occupy the tail of gamma and cancel in z
            let gamma = cert.gamma.as_ref().and_then(|g| {
                let keep = g.len().checked_sub(n_original)?;
                Some(g[..keep].to_vec())
            });
            Some(Certificate {
                z,
                gamma,
                strictness,
            })
        }
    };
    let mut separated: Vec<usize> = report.separated.iter().map(|&r| eq.origin[r]).collect();
    separated.sort_unstable();
    separated.dedup();
    Ok(SeparationReport {
        separated,
        certificate,
        method: report.method,
        iterations: report.iterations,
        converged: report.converged,
        epsilon: report.epsilon,
        k: report.k,
        diagnostics: report.diagnostics,
    })
}
