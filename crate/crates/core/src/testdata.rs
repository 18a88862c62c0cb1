//! Small built-in datasets used by tests and the documentation examples.

/// Nine observations, columns y, x1 (explicit constant), x2, x3, x4. The
/// first three observations are quasi-completely separated even though both
/// x3 - x4 and x2 - x4 individually overlap over y = 0; every certificate is
/// a combination a*(x3 - x4) + b*(x2 - x4) with b <= a <= 2b.
pub const TABLE2: [[f64; 5]; 9] = [
    [0.0, 1.0, -1.0, 5.0, 3.0],
    [0.0, 1.0, 2.0, 0.0, 1.0],
    [0.0, 1.0, 0.0, -6.0, -3.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 3.0, 3.0, 3.0],
    [2.0, 1.0, 6.0, 6.0, 6.0],
    [3.0, 1.0, 5.0, 5.0, 5.0],
    [4.0, 1.0, 7.0, 7.0, 7.0],
    [5.0, 1.0, 4.0, 4.0, 4.0],
];

use crate::dataset::Dataset;

/// The dataset above with the explicit constant x1 included as a dense
/// column (so no automatic constant is added).
pub fn table2_dataset() -> Dataset {
    let y = TABLE2.iter().map(|r| r[0]).collect();
    let dense = (1..=4)
        .map(|j| {
            (
                format!("x{j}"),
                TABLE2.iter().map(|r| r[j]).collect::<Vec<_>>(),
            )
        })
        .collect();
    Dataset::from_parts(y, dense, vec![], None, true).unwrap()
}
