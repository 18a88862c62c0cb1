//! Synthetic dataset builders shared by the benchmarks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sepguard::{Dataset, FactorColumn};

/// Poisson-style count data with `n` rows, `k` dense regressors, and two
/// crossed factors of `levels` levels each. Roughly a third of the outcomes
/// are zero; no separation is planted.
pub fn synthetic(n: usize, k: usize, levels: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense: Vec<(String, Vec<f64>)> = (0..k)
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (format!("x{j}"), col)
        })
        .collect();
    let factors = (0..2)
        .map(|f| {
            let assign: Vec<u32> = if f == 0 {
                (0..n).map(|i| (i % levels) as u32).collect()
            } else {
                (0..n).map(|_| rng.gen_range(0..levels) as u32).collect()
            };
            FactorColumn {
                name: format!("f{f}"),
                levels: assign,
                level_names: (0..levels).map(|l| format!("l{l}")).collect(),
            }
        })
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.35) {
                0.0
            } else {
                rng.gen_range(1..=8) as f64
            }
        })
        .collect();
    Dataset::from_parts(y, dense, factors, None, true).unwrap()
}
