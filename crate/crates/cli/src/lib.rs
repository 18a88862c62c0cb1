//! Command-line front end: CSV ingestion, detection and estimation
//! orchestration, and machine-readable reports with stable formatting and
//! exit codes.

pub mod json;
pub mod simulate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use json::Json;
use sepguard::{
    detect, existence_check, fit, load_csv, lp_detect_with, reduced_lp_detect, Dataset,
    DetectStrategy, DetectorOptions, Error, FitOptions, FitResult, LpOptions, ModelFamily, Schema,
    SeparationReport,
};

/// Exit codes are a stable contract: 0 no separation, 1 error, 2 separation
/// found, 3 estimates do not exist (Gamma / Inverse Gaussian), 4 complete
/// separation.
pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_SEPARATION: u8 = 2;
pub const EXIT_NONEXISTENCE: u8 = 3;
pub const EXIT_COMPLETE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "sepguard", about = "Separation diagnostics and estimation for GLMs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect separated observations (or check existence for Gamma /
    /// Inverse Gaussian) without fitting.
    Check(CheckArgs),
    /// Detect, drop separated observations, and estimate.
    Fit(FitArgs),
    /// Generate a dataset with a planted separation pattern plus a
    /// ground-truth sidecar.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Poisson,
    Logit,
    Probit,
    Negbin,
    GammaPml,
    GaussianLog,
    InvgaussPml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Iterative rectifier.
    Ir,
    /// Simplex on the expanded design.
    Lp,
    /// Collinearity-screened LP.
    ReducedLp,
    /// Rectifier with an LP cross-check on small problems.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Human,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Input CSV file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Dispersion for the negative binomial family.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Outcome column.
    #[arg(long)]
    pub depvar: String,
    /// Comma-separated regressor columns.
    #[arg(long, value_delimiter = ',')]
    pub vars: Vec<String>,
    /// Comma-separated factor (fixed effect) columns.
    #[arg(long, value_delimiter = ',')]
    pub factors: Vec<String>,
    /// Weight column.
    #[arg(long)]
    pub weight: Option<String>,
    /// Suppress the automatic constant.
    #[arg(long)]
    pub no_constant: bool,
    #[arg(long, value_enum, default_value = "ir")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_dev: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_eta: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub pattern: simulate::Pattern,
    #[arg(long)]
    pub seed: u64,
    /// Rows to generate.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Output CSV path; the ground truth goes to <output>.truth.json.
    #[arg(long)]
    pub output: PathBuf,
}

impl FamilyArg {
    pub fn to_family(self, nu: f64) -> ModelFamily {
        match self {
            FamilyArg::Poisson => ModelFamily::Poisson,
            FamilyArg::Logit => ModelFamily::Logit,
            FamilyArg::Probit => ModelFamily::Probit,
            FamilyArg::Negbin => ModelFamily::NegativeBinomial { nu },
            FamilyArg::GammaPml => ModelFamily::GammaPml,
            FamilyArg::GaussianLog => ModelFamily::GaussianLogLink,
            FamilyArg::InvgaussPml => ModelFamily::InverseGaussianPml,
        }
    }
}

/// Run a parsed command; returns (exit code, report text).
pub fn run(cli: &Cli) -> (u8, String) {
    let out = match &cli.command {
        Command::Check(args) => run_check(args),
        Command::Fit(args) => run_fit(args),
        Command::Simulate(args) => simulate::run_simulate(args),
    };
    match out {
        Ok(pair) => pair,
        Err(e) => (EXIT_ERROR, format!("error: {e}\n")),
    }
}

fn load(model: &ModelArgs) -> Result<(Dataset, ModelFamily), Error> {
    let schema = Schema {
        outcome: model.depvar.clone(),
        dense: model.vars.clone(),
        factors: model.factors.clone(),
        weight: model.weight.clone(),
        no_constant: model.no_constant,
    };
    let ds = load_csv(&model.input, &schema)?;
    Ok((ds, model.family.to_family(model.nu)))
}

fn detect_by_method(
    ds: &Dataset,
    family: &ModelFamily,
    model: &ModelArgs,
) -> Result<SeparationReport, Error> {
    let detector = DetectorOptions {
        epsilon: model.epsilon,
        recover_gamma: true,
        ..Default::default()
    };
    match model.method {
        MethodArg::Ir => detect(ds, family, &detector),
        MethodArg::Lp => lp_detect_with(ds, family, &LpOptions::default()),
        MethodArg::ReducedLp => reduced_lp_detect(ds, family),
        MethodArg::Auto => {
            let rep = detect(ds, family, &detector)?;
            if ds.n_obs() <= 1000 && ds.n_columns() <= LpOptions::default().max_columns {
                let oracle = lp_detect_with(ds, family, &LpOptions::default())?;
                if oracle.separated != rep.separated {
                    return Ok(oracle);
                }
            }
            Ok(rep)
        }
    }
}

pub fn run_check(args: &CheckArgs) -> Result<(u8, String), Error> {
    let (ds, family) = load(&args.model)?;

    // the unbounded-likelihood families get an existence verdict instead of
    // a separated-row report
    if matches!(
        family,
        ModelFamily::GammaPml | ModelFamily::InverseGaussianPml
    ) {
        let verdict = existence_check(&ds, &family)?;
        let code = if verdict.exists {
            EXIT_OK
        } else {
            EXIT_NONEXISTENCE
        };
        let report = Json::Obj(vec![
            ("schema_version".into(), Json::Str("1".into())),
            ("command".into(), Json::Str("check".into())),
            ("family".into(), Json::Str(family.name().into())),
            ("separated_indices".into(), Json::Arr(vec![])),
            (
                "certificate_z".into(),
                match &verdict.witness {
                    Some(c) => Json::Arr(c.z.iter().map(|&v| Json::Num(v)).collect()),
                    None => Json::Null,
                },
            ),
            ("method".into(), Json::Str("lp".into())),
            ("iterations".into(), Json::Int(0)),
            ("epsilon".into(), Json::Null),
            ("K".into(), Json::Null),
            (
                "existence_verdict".into(),
                Json::Obj(vec![
                    ("exists".into(), Json::Bool(verdict.exists)),
                    (
                        "reason".into(),
                        Json::Str(verdict.reason.as_str().into()),
                    ),
                ]),
            ),
        ]);
        let text = match args.model.format {
            FormatArg::Json => report.render(),
            FormatArg::Csv => format!("exists,reason\n{},{}\n", verdict.exists, verdict.reason.as_str()),
            FormatArg::Human => format!(
                "family {}: estimates {} ({})\n",
                family.name(),
                if verdict.exists { "exist" } else { "do not exist" },
                verdict.reason.as_str()
            ),
        };
        return finish(args.model.output.as_deref(), code, text);
    }

    let rep = detect_by_method(&ds, &family, &args.model)?;
    let code = if rep.separated.is_empty() {
        EXIT_OK
    } else {
        EXIT_SEPARATION
    };
    let report = Json::Obj(vec![
        ("schema_version".into(), Json::Str("1".into())),
        ("command".into(), Json::Str("check".into())),
        ("family".into(), Json::Str(family.name().into())),
        (
            "separated_indices".into(),
            Json::Arr(
                rep.separated
                    .iter()
                    .map(|&i| Json::Int((i + 1) as i64))
                    .collect(),
            ),
        ),
        (
            "certificate_z".into(),
            match &rep.certificate {
                Some(c) => Json::Arr(c.z.iter().map(|&v| Json::Num(v)).collect()),
                None => Json::Null,
            },
        ),
        ("method".into(), Json::Str(rep.method.as_str().into())),
        ("iterations".into(), Json::Int(rep.iterations as i64)),
        (
            "epsilon".into(),
            rep.epsilon.map_or(Json::Null, Json::Num),
        ),
        ("K".into(), rep.k.map_or(Json::Null, Json::Num)),
        ("existence_verdict".into(), Json::Null),
    ]);
    let text = match args.model.format {
        FormatArg::Json => report.render(),
        FormatArg::Csv => {
            let mut s = String::from("row,separated,z\n");
            for i in 0..ds.n_obs() {
                let z = rep
                    .certificate
                    .as_ref()
                    .map_or(0.0, |c| c.z[i]);
                let sep = rep.separated.contains(&i);
                s.push_str(&format!("{},{},{}\n", i + 1, sep, sepguard::dataset::format_g17(z)));
            }
            s
        }
        FormatArg::Human => {
            if rep.separated.is_empty() {
                "no separation found\n".to_string()
            } else {
                format!(
                    "quasi-complete separation: {} observation(s) carry a certificate of separation\nrows (1-based): {:?}\n",
                    rep.separated.len(),
                    rep.separated.iter().map(|&i| i + 1).collect::<Vec<_>>()
                )
            }
        }
    };
    finish(args.model.output.as_deref(), code, text)
}

pub fn run_fit(args: &FitArgs) -> Result<(u8, String), Error> {
    let (ds, family) = load(&args.model)?;
    let opts = FitOptions {
        strategy: match args.model.method {
            MethodArg::Ir => DetectStrategy::Rectifier,
            MethodArg::Lp => DetectStrategy::Lp,
            MethodArg::ReducedLp => DetectStrategy::ReducedLp,
            MethodArg::Auto => DetectStrategy::Auto,
        },
        detector: DetectorOptions {
            epsilon: args.model.epsilon,
            recover_gamma: true,
            ..Default::default()
        },
        tol_dev: args.tol_dev,
        tol_eta: args.tol_eta,
        ..Default::default()
    };
    let res = match fit(&ds, &family, &opts) {
        Ok(r) => r,
        Err(Error::CompleteSeparation) => {
            return finish(
                args.model.output.as_deref(),
                EXIT_COMPLETE,
                "complete separation: every observation is separated; meaningful estimation is impossible\n".to_string(),
            )
        }
        Err(Error::NonExistence { family, reason }) => {
            return finish(
                args.model.output.as_deref(),
                EXIT_NONEXISTENCE,
                format!("estimates do not exist for this {family} model: {reason}\n"),
            )
        }
        Err(e) => return Err(e),
    };
    let code = if res.dropped.is_empty() {
        EXIT_OK
    } else {
        EXIT_SEPARATION
    };
    let text = match args.model.format {
        FormatArg::Json => fit_json(&ds, family.name(), &res).render(),
        FormatArg::Csv => {
            let mut s = String::from("name,estimate,se,implicated\n");
            for (j, (name, _)) in ds.dense.iter().enumerate() {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    name,
                    estimate_label(&res, j),
                    res.std_errors[j]
                        .map_or("".to_string(), sepguard::dataset::format_g17),
                    res.implicated[j]
                ));
            }
            s
        }
        FormatArg::Human => fit_human(&ds, &res),
    };
    finish(args.model.output.as_deref(), code, text)
}

fn estimate_label(res: &FitResult, j: usize) -> String {
    if res.implicated[j] {
        "diverges".to_string()
    } else if res.collinear_dropped[j] {
        "collinear".to_string()
    } else {
        sepguard::dataset::format_g17(res.coefficients[j])
    }
}

fn fit_json(ds: &Dataset, family: &str, res: &FitResult) -> Json {
    let coefficients = ds
        .dense
        .iter()
        .enumerate()
        .map(|(j, (name, _))| {
            Json::Obj(vec![
                ("name".into(), Json::Str(name.clone())),
                (
                    "estimate".into(),
                    if res.implicated[j] {
                        Json::Str("diverges".into())
                    } else if res.collinear_dropped[j] {
                        Json::Str("collinear".into())
                    } else {
                        Json::Num(res.coefficients[j])
                    },
                ),
                (
                    "se".into(),
                    res.std_errors[j].map_or(Json::Null, Json::Num),
                ),
                ("implicated".into(), Json::Bool(res.implicated[j])),
            ])
        })
        .collect();
    let note = if res.implicated.iter().any(|&f| f) {
        Json::Str(
            "some regressors are implicated in separation: their estimates diverge to +/- infinity in the compactified model and the remaining coefficients may need to be interpreted as relative to an omitted regressor".into(),
        )
    } else {
        Json::Null
    };
    Json::Obj(vec![
        ("schema_version".into(), Json::Str("1".into())),
        ("command".into(), Json::Str("fit".into())),
        ("family".into(), Json::Str(family.into())),
        (
            "dropped_rows".into(),
            Json::Arr(
                res.dropped
                    .iter()
                    .map(|&i| Json::Int((i + 1) as i64))
                    .collect(),
            ),
        ),
        ("coefficients".into(), Json::Arr(coefficients)),
        ("note".into(), note),
        ("loglik".into(), Json::Num(res.loglik)),
        ("deviance".into(), Json::Num(res.deviance)),
        ("iterations".into(), Json::Int(res.iterations as i64)),
        ("converged".into(), Json::Bool(res.converged)),
    ])
}

fn fit_human(ds: &Dataset, res: &FitResult) -> String {
    let mut s = String::new();
    if res.dropped.is_empty() {
        s.push_str("no separation found\n");
    } else {
        s.push_str(&format!(
            "dropped {} separated observation(s), rows (1-based): {:?}\n",
            res.dropped.len(),
            res.dropped.iter().map(|&i| i + 1).collect::<Vec<_>>()
        ));
    }
    s.push_str(&format!(
        "{:<16} {:>20} {:>16}\n",
        "regressor", "estimate", "std. error"
    ));
    for (j, (name, _)) in ds.dense.iter().enumerate() {
        s.push_str(&format!(
            "{:<16} {:>20} {:>16}\n",
            name,
            estimate_label(res, j),
            res.std_errors[j]
                .map_or("-".to_string(), |v| format!("{v:.6}")),
        ));
    }
    if res.implicated.iter().any(|&f| f) {
        s.push_str("note: estimates marked \"diverges\" head to +/- infinity in the compactified model; the remaining coefficients may be relative to an omitted regressor\n");
    }
    s.push_str(&format!(
        "log-likelihood {:.6}, {} iteration(s)\n",
        res.loglik, res.iterations
    ));
    s
}

fn finish(output: Option<&std::path::Path>, code: u8, text: String) -> Result<(u8, String), Error> {
    if let Some(path) = output {
        std::fs::write(path, &text)?;
        Ok((code, String::new()))
    } else {
        Ok((code, text))
    }
}

/// Build the global thread pool from SEPGUARD_THREADS if set; no-op when the
/// pool already exists.
pub fn configure_threads() {
    if let Ok(v) = std::env::var("SEPGUARD_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}
