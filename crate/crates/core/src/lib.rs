//! Detection and repair of non-existent (pseudo) maximum likelihood
//! estimates in generalized linear models, with support for
//! high-dimensional fixed effects.
//!
//! The pipeline: partition observations by boundary status, search for a
//! linear combination of regressors that certifies some observations as
//! separated, drop those observations, and fit the remaining sample by
//! IRLS with the fixed effects partialled out.

pub mod dataset;
pub mod error;
pub mod families;
pub mod glm_fit;
pub mod hdfe_wls;
pub mod logit_poisson;
pub mod lp_oracle;
pub mod rectifier;

#[doc(hidden)]
pub mod testdata;

pub use dataset::{load_csv, write_csv, BoundaryPartition, Dataset, FactorColumn, Schema, NO_LEVEL};
pub use error::Error;
pub use families::ModelFamily;
pub use glm_fit::{fit, irls_solve, DetectStrategy, FitOptions, FitResult};
pub use hdfe_wls::{recover_factor_effects, within_transform, wls_solve, WlsOptions, WlsSolution};
pub use logit_poisson::{map_report_back, to_poisson_equivalent, EquivalentDataset};
pub use lp_oracle::{
    existence_check, gamma_existence_check, interior_rank_check, invgauss_existence_check,
    lp_detect, lp_detect_with, reduced_lp_detect, ExistenceReason, ExistenceVerdict, LpOptions,
};
pub use rectifier::{
    choose_k, detect, verify_certificate, Certificate, DetectionMethod, DetectorOptions,
    SeparationReport,
};
