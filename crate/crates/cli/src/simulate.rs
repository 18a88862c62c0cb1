//! Deterministic dataset generator with planted separation patterns. The
//! construction is the oracle: the sidecar records exactly which rows carry
//! a certificate by design.

use clap::ValueEnum;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::json::Json;
use crate::{SimulateArgs, EXIT_OK};
use sepguard::dataset::format_g17;
use sepguard::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Pattern {
    /// Separation through a dense regressor only.
    DenseOnly,
    /// A factor level that never sees a positive outcome.
    FeOnly,
    /// Both at once.
    Mixed,
    /// Overlapping boundary rows; ground truth is no separation.
    Overlap,
    /// A direction with a negative column sum: Gamma estimates do not exist.
    GammaSum,
}

pub fn run_simulate(args: &SimulateArgs) -> Result<(u8, String), Error> {
    let n = args.n.max(12);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let mut header: Vec<&str> = vec!["y", "x1", "x2"];
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(n);
    let mut separated: Vec<usize> = Vec::new();
    let mut exists = true;

    match args.pattern {
        Pattern::DenseOnly => {
            for i in 0..n {
                let interior = i % 5 != 0;
                // two fixed interior covariate values pin the certificate to x2
                let x1 = if i < 2 { (i + 1) as f64 } else { rng.gen_range(-2..=2) as f64 };
                if interior {
                    rows.push(vec![
                        format_g17(rng.gen_range(1..=5) as f64),
                        format_g17(x1),
                        format_g17(0.0),
                    ]);
                } else {
                    let x2 = if i % 10 == 0 {
                        -(rng.gen_range(1..=3) as f64)
                    } else {
                        0.0
                    };
                    if x2 < 0.0 {
                        separated.push(i);
                    }
                    rows.push(vec![format_g17(0.0), format_g17(x1), format_g17(x2)]);
                }
            }
        }
        Pattern::FeOnly => {
            header = vec!["y", "f"];
            let n_levels = 6usize;
            for i in 0..n {
                let level = i % n_levels;
                if level == 0 {
                    // this level only ever sees y = 0
                    separated.push(i);
                    rows.push(vec![format_g17(0.0), format!("g{level}")]);
                } else {
                    // guarantee one positive outcome per level up front
                    let y = if i < 2 * n_levels {
                        rng.gen_range(1..=4) as f64
                    } else if rng.gen_bool(0.3) {
                        0.0
                    } else {
                        rng.gen_range(1..=4) as f64
                    };
                    rows.push(vec![format_g17(y), format!("g{level}")]);
                }
            }
        }
        Pattern::Mixed => {
            header = vec!["y", "x1", "x2", "f"];
            let n_levels = 5usize;
            for i in 0..n {
                let level = i % n_levels;
                let x1 = rng.gen_range(-2..=2) as f64;
                if level == 0 {
                    separated.push(i);
                    rows.push(vec![
                        format_g17(0.0),
                        format_g17(x1),
                        format_g17(0.0),
                        "g0".to_string(),
                    ]);
                    continue;
                }
                // each surviving level needs two distinct interior x1 values
                let interior = i < 3 * n_levels || !rng.gen_bool(0.25);
                if interior {
                    let x1 = if i < 2 * n_levels { (i / n_levels + 1) as f64 } else { x1 };
                    rows.push(vec![
                        format_g17(rng.gen_range(1..=5) as f64),
                        format_g17(x1),
                        format_g17(0.0),
                        format!("g{level}"),
                    ]);
                } else {
                    let x2 = if rng.gen_bool(0.5) {
                        -(rng.gen_range(1..=2) as f64)
                    } else {
                        0.0
                    };
                    if x2 < 0.0 {
                        separated.push(i);
                    }
                    rows.push(vec![
                        format_g17(0.0),
                        format_g17(x1),
                        format_g17(x2),
                        format!("g{level}"),
                    ]);
                }
            }
            separated.sort_unstable();
        }
        Pattern::Overlap => {
            // boundary rows come in covariate-identical pairs with one
            // positive twin, which forces any certificate to vanish there
            let mut i = 0;
            while rows.len() + 2 <= n {
                let x1 = rng.gen_range(-2..=2) as f64;
                let x2 = rng.gen_range(-2..=2) as f64;
                if i % 2 == 0 {
                    rows.push(vec![format_g17(0.0), format_g17(x1), format_g17(x2)]);
                    rows.push(vec![
                        format_g17(rng.gen_range(1..=4) as f64),
                        format_g17(x1),
                        format_g17(x2),
                    ]);
                } else {
                    rows.push(vec![
                        format_g17(rng.gen_range(1..=4) as f64),
                        format_g17(x1),
                        format_g17(x2),
                    ]);
                    rows.push(vec![
                        format_g17(rng.gen_range(1..=4) as f64),
                        format_g17(x1),
                        format_g17(x2),
                    ]);
                }
                i += 1;
            }
        }
        Pattern::GammaSum => {
            // x2 = 0 wherever y > 0 and negative once: the direction z = x2
            // has a negative sum while staying 0 on the positive rows
            for i in 0..n {
                let x1 = rng.gen_range(-2..=2) as f64;
                if i == 0 {
                    rows.push(vec![format_g17(0.0), format_g17(x1), format_g17(-1.0)]);
                } else {
                    rows.push(vec![
                        format_g17(rng.gen_range(1..=5) as f64),
                        format_g17(x1),
                        format_g17(0.0),
                    ]);
                }
            }
            exists = false;
        }
    }

    let mut csv = String::new();
    csv.push_str(&header.join(","));
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(&args.output, &csv)?;

    let truth = Json::Obj(vec![
        ("schema_version".into(), Json::Str("1".into())),
        (
            "pattern".into(),
            Json::Str(
                args.pattern
                    .to_possible_value()
                    .map(|v| v.get_name().to_string())
                    .unwrap_or_default(),
            ),
        ),
        ("seed".into(), Json::Int(args.seed as i64)),
        ("n".into(), Json::Int(rows.len() as i64)),
        (
            "separated_indices".into(),
            Json::Arr(
                separated
                    .iter()
                    .map(|&i| Json::Int((i + 1) as i64))
                    .collect(),
            ),
        ),
        ("exists".into(), Json::Bool(exists)),
    ]);
    let mut sidecar = args.output.clone();
    sidecar.set_extension("truth.json");
    std::fs::write(&sidecar, truth.render())?;
    Ok((EXIT_OK, String::new()))
}
