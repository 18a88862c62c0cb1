//! Data ingestion, design assembly, and partition of observations by
//! boundary status.

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array1;

use crate::error::Error;
use crate::families::ModelFamily;

/// Sentinel level id for observations that belong to no level of a factor
/// (all dummies zero). Used by the Logit-equivalent construction.
pub const NO_LEVEL: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct FactorColumn {
    pub name: String,
    /// Level id per observation, `NO_LEVEL` meaning "no level".
    pub levels: Vec<u32>,
    /// Level labels in first-appearance order.
    pub level_names: Vec<String>,
}

impl FactorColumn {
    pub fn n_levels(&self) -> usize {
        self.level_names.len()
    }
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    pub outcome: String,
    pub dense: Vec<String>,
    pub factors: Vec<String>,
    pub weight: Option<String>,
    /// Suppress the automatic constant for no-factor models.
    pub no_constant: bool,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Array1<f64>,
    pub dense: Vec<(String, Array1<f64>)>,
    pub factors: Vec<FactorColumn>,
    pub weights: Array1<f64>,
    pub has_constant: bool,
}

/// Index partition by comparison of y with 0 and the family bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPartition {
    pub interior: Vec<usize>,
    pub at_zero: Vec<usize>,
    pub at_upper: Vec<usize>,
}

impl Dataset {
    /// Assemble a dataset from in-memory parts, enforcing the invariants. A
    /// constant column is auto-added when there are no factors, unless
    /// suppressed.
    pub fn from_parts(
        y: Vec<f64>,
        dense: Vec<(String, Vec<f64>)>,
        factors: Vec<FactorColumn>,
        weights: Option<Vec<f64>>,
        no_constant: bool,
    ) -> Result<Self, Error> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidData("no data rows".into()));
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!("non-finite outcome in row {}", i + 1)));
            }
            if v < 0.0 {
                return Err(Error::InvalidData(format!("negative outcome in row {}", i + 1)));
            }
        }
        let mut dense_cols = Vec::with_capacity(dense.len() + 1);
        for (name, col) in dense {
            if col.len() != n {
                return Err(Error::InvalidData(format!(
                    "column {name} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "non-finite value in column {name}, row {}",
                    i + 1
                )));
            }
            dense_cols.push((name, Array1::from(col)));
        }
        for f in &factors {
            if f.levels.len() != n {
                return Err(Error::InvalidData(format!(
                    "factor {} has {} rows, expected {n}",
                    f.name,
                    f.levels.len()
                )));
            }
            let mut seen = vec![false; f.n_levels()];
            for &l in &f.levels {
                if l != NO_LEVEL {
                    seen[l as usize] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidData(format!(
                    "factor {} has an empty level",
                    f.name
                )));
            }
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::InvalidData("weight column length mismatch".into()));
                }
                if let Some(i) = w.iter().position(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::InvalidData(format!(
                        "weights must be positive and finite, row {}",
                        i + 1
                    )));
                }
                Array1::from(w)
            }
            None => Array1::ones(n),
        };
        let has_constant = factors.is_empty() && !no_constant;
        if has_constant {
            dense_cols.insert(0, ("_cons".to_string(), Array1::ones(n)));
        }
        Ok(Dataset {
            y: Array1::from(y),
            dense: dense_cols,
            factors,
            weights,
            has_constant,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_dense(&self) -> usize {
        self.dense.len()
    }

    /// Total number of model columns: dense columns plus factor levels.
    pub fn n_columns(&self) -> usize {
        self.n_dense() + self.factors.iter().map(|f| f.n_levels()).sum::<usize>()
    }

    pub fn dense_names(&self) -> Vec<&str> {
        self.dense.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Check outcome admissibility for a family (y <= 1 for bounded).
    pub fn validate_for(&self, family: &ModelFamily) -> Result<(), Error> {
        if family.is_bounded() {
            if let Some(i) = self.y.iter().position(|&v| v > family.bound()) {
                return Err(Error::InvalidData(format!(
                    "outcome exceeds {} in row {} for family {}",
                    family.bound(),
                    i + 1,
                    family.name()
                )));
            }
        }
        Ok(())
    }

    /// Exact partition by comparison of y with 0 and the family bound. No
    /// tolerance: y values are data, not estimates.
    pub fn boundary_partition(&self, family: &ModelFamily) -> BoundaryPartition {
        let upper = family.bound();
        let mut part = BoundaryPartition {
            interior: Vec::new(),
            at_zero: Vec::new(),
            at_upper: Vec::new(),
        };
        for (i, &v) in self.y.iter().enumerate() {
            if v == 0.0 {
                part.at_zero.push(i);
            } else if v == upper {
                part.at_upper.push(i);
            } else {
                part.interior.push(i);
            }
        }
        part
    }

    /// Keep only the given rows (sorted, deduplicated by caller). Factor
    /// levels are re-interned so every surviving level is populated.
    pub fn subset(&self, rows: &[usize]) -> Result<Self, Error> {
        if rows.is_empty() {
            return Err(Error::InvalidData("no data rows".into()));
        }
        let y = rows.iter().map(|&i| self.y[i]).collect::<Vec<_>>();
        let dense = self
            .dense
            .iter()
            .map(|(name, col)| {
                (
                    name.clone(),
                    Array1::from(rows.iter().map(|&i| col[i]).collect::<Vec<_>>()),
                )
            })
            .collect::<Vec<_>>();
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let mut remap: Vec<u32> = vec![NO_LEVEL; f.n_levels()];
            let mut level_names = Vec::new();
            let mut levels = Vec::with_capacity(rows.len());
            for &i in rows {
                let l = f.levels[i];
                if l == NO_LEVEL {
                    levels.push(NO_LEVEL);
                    continue;
                }
                if remap[l as usize] == NO_LEVEL {
                    remap[l as usize] = level_names.len() as u32;
                    level_names.push(f.level_names[l as usize].clone());
                }
                levels.push(remap[l as usize]);
            }
            factors.push(FactorColumn {
                name: f.name.clone(),
                levels,
                level_names,
            });
        }
        let weights = Array1::from(rows.iter().map(|&i| self.weights[i]).collect::<Vec<_>>());
        Ok(Dataset {
            y: Array1::from(y),
            dense,
            factors,
            weights,
            has_constant: self.has_constant,
        })
    }
}

/// Load a dataset from an RFC-4180 CSV file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset, Error> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col_index = |name: &str| -> Result<usize, Error> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("missing column '{name}'")))
    };

    let y_idx = col_index(&schema.outcome)?;
    let dense_idx: Vec<usize> = schema
        .dense
        .iter()
        .map(|n| col_index(n))
        .collect::<Result<_, _>>()?;
    let factor_idx: Vec<usize> = schema
        .factors
        .iter()
        .map(|n| col_index(n))
        .collect::<Result<_, _>>()?;
    let weight_idx = schema.weight.as_deref().map(col_index).transpose()?;

    let mut y = Vec::new();
    let mut dense: Vec<Vec<f64>> = vec![Vec::new(); dense_idx.len()];
    let mut factor_levels: Vec<Vec<u32>> = vec![Vec::new(); factor_idx.len()];
    let mut factor_interners: Vec<(HashMap<String, u32>, Vec<String>)> =
        vec![(HashMap::new(), Vec::new()); factor_idx.len()];
    let mut weights = weight_idx.map(|_| Vec::new());

    let parse = |raw: &str, row: usize, name: &str| -> Result<f64, Error> {
        let v: f64 = raw.trim().parse().map_err(|_| {
            Error::InvalidData(format!("unparseable cell in row {row}, column '{name}': '{raw}'"))
        })?;
        if !v.is_finite() {
            return Err(Error::InvalidData(format!(
                "non-finite value in row {row}, column '{name}'"
            )));
        }
        Ok(v)
    };

    for (rec_no, record) in reader.records().enumerate() {
        let record = record?;
        let row = rec_no + 1; // 1-based data row for messages
        let yv = parse(&record[y_idx], row, &schema.outcome)?;
        if yv < 0.0 {
            return Err(Error::InvalidData(format!("negative outcome in row {row}")));
        }
        y.push(yv);
        for (k, &ci) in dense_idx.iter().enumerate() {
            dense[k].push(parse(&record[ci], row, &schema.dense[k])?);
        }
        for (k, &ci) in factor_idx.iter().enumerate() {
            let raw = record[ci].trim().to_string();
            if raw.is_empty() {
                return Err(Error::InvalidData(format!(
                    "missing factor value in row {row}, column '{}'",
                    schema.factors[k]
                )));
            }
            let (map, names) = &mut factor_interners[k];
            let next = names.len() as u32;
            let id = *map.entry(raw.clone()).or_insert_with(|| {
                names.push(raw);
                next
            });
            factor_levels[k].push(id);
        }
        if let (Some(wi), Some(w)) = (weight_idx, weights.as_mut()) {
            let wv = parse(&record[wi], row, schema.weight.as_deref().unwrap())?;
            if wv <= 0.0 {
                return Err(Error::InvalidData(format!("negative or zero weight in row {row}")));
            }
            w.push(wv);
        }
    }
    if y.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }

    let factors = factor_idx
        .iter()
        .enumerate()
        .map(|(k, _)| FactorColumn {
            name: schema.factors[k].clone(),
            levels: std::mem::take(&mut factor_levels[k]),
            level_names: std::mem::take(&mut factor_interners[k].1),
        })
        .collect();

    Dataset::from_parts(
        y,
        schema
            .dense
            .iter()
            .cloned()
            .zip(dense.into_iter())
            .collect(),
        factors,
        weights,
        schema.no_constant,
    )
}

/// Write a dataset back to CSV (outcome, dense columns except the automatic
/// constant, factors, weights). Numeric cells use 17 significant digits so a
/// reload reproduces the values bit-for-bit.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    let dense_out: Vec<&(String, Array1<f64>)> = ds
        .dense
        .iter()
        .filter(|(n, _)| !(ds.has_constant && n == "_cons"))
        .collect();
    header.extend(dense_out.iter().map(|(n, _)| n.clone()));
    header.extend(ds.factors.iter().map(|f| f.name.clone()));
    header.push("weight".to_string());
    writer.write_record(&header)?;
    for i in 0..ds.n_obs() {
        let mut rec = vec![format_g17(ds.y[i])];
        for (_, col) in &dense_out {
            rec.push(format_g17(col[i]));
        }
        for f in &ds.factors {
            let l = f.levels[i];
            rec.push(if l == NO_LEVEL {
                String::new()
            } else {
                f.level_names[l as usize].clone()
            });
        }
        rec.push(format_g17(ds.weights[i]));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest representation that round-trips a f64 (Rust's Display for f64 is
/// shortest-roundtrip), bounded by 17 significant digits.
pub fn format_g17(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    pub fn table2_csv() -> String {
        let mut s = String::from("y,x1,x2,x3,x4\n");
        for row in crate::testdata::TABLE2 {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                row[0], row[1], row[2], row[3], row[4]
            ));
        }
        s
    }

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn table2_schema() -> Schema {
        Schema {
            outcome: "y".into(),
            dense: vec!["x1".into(), "x2".into(), "x3".into(), "x4".into()],
            factors: vec![],
            weight: None,
            no_constant: true,
        }
    }

    #[test]
    fn loads_table2() {
        let f = write_temp(&table2_csv());
        let ds = load_csv(f.path(), &table2_schema()).unwrap();
        assert_eq!(ds.n_obs(), 9);
        assert_eq!(ds.n_dense(), 4);
        assert!(ds.factors.is_empty());
        assert_eq!(ds.y[4], 1.0);
        assert_eq!(ds.dense[2].1[0], 5.0);
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_temp("y,x1,x2,x3,x4\n");
        let err = load_csv(f.path(), &table2_schema()).unwrap_err();
        assert!(err.to_string().contains("no data rows"));
    }

    #[test]
    fn negative_outcome_names_the_row() {
        let f = write_temp("y,x\n1,2\n0,1\n-1,3\n");
        let schema = Schema {
            outcome: "y".into(),
            dense: vec!["x".into()],
            ..Default::default()
        };
        let err = load_csv(f.path(), &schema).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn missing_column_and_bad_cell() {
        let f = write_temp("y,x\n1,2\n");
        let schema = Schema {
            outcome: "y".into(),
            dense: vec!["z".into()],
            ..Default::default()
        };
        assert!(load_csv(f.path(), &schema).is_err());

        let f = write_temp("y,x\n1,abc\n");
        let schema = Schema {
            outcome: "y".into(),
            dense: vec!["x".into()],
            ..Default::default()
        };
        let err = load_csv(f.path(), &schema).unwrap_err();
        assert!(err.to_string().contains("row 1"));
        assert!(err.to_string().contains("'x'"));
    }

    #[test]
    fn partition_examples() {
        let f = write_temp(&table2_csv());
        let ds = load_csv(f.path(), &table2_schema()).unwrap();
        let part = ds.boundary_partition(&ModelFamily::Poisson);
        assert_eq!(part.at_zero, vec![0, 1, 2, 3]);
        assert_eq!(part.interior, vec![4, 5, 6, 7, 8]);
        assert!(part.at_upper.is_empty());

        let ds = Dataset::from_parts(
            vec![1.0, 2.0],
            vec![("x".into(), vec![0.5, 0.6])],
            vec![],
            None,
            false,
        )
        .unwrap();
        let part = ds.boundary_partition(&ModelFamily::Poisson);
        assert!(part.at_zero.is_empty());

        let ds = Dataset::from_parts(
            vec![0.0, 1.0, 1.0],
            vec![("x".into(), vec![0.5, 0.6, 0.7])],
            vec![],
            None,
            false,
        )
        .unwrap();
        let part = ds.boundary_partition(&ModelFamily::Logit);
        assert!(part.interior.is_empty());
        assert_eq!(part.at_zero, vec![0]);
        assert_eq!(part.at_upper, vec![1, 2]);
    }

    #[test]
    fn partition_covers_all_rows() {
        let f = write_temp(&table2_csv());
        let ds = load_csv(f.path(), &table2_schema()).unwrap();
        let p = ds.boundary_partition(&ModelFamily::Poisson);
        assert_eq!(p.interior.len() + p.at_zero.len() + p.at_upper.len(), ds.n_obs());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut csv = String::from("y,x,g\n");
        let vals = [
            0.1234567890123456_f64,
            -3.0e-17,
            1.0 / 3.0,
            17.0,
            2.5e300,
        ];
        for (i, v) in vals.iter().enumerate() {
            csv.push_str(&format!("{i},{v},g{}\n", i % 2));
        }
        let f = write_temp(&csv);
        let schema = Schema {
            outcome: "y".into(),
            dense: vec!["x".into()],
            factors: vec!["g".into()],
            ..Default::default()
        };
        let ds = load_csv(f.path(), &schema).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path()).unwrap();
        let schema2 = Schema {
            outcome: "y".into(),
            dense: vec!["x".into()],
            factors: vec!["g".into()],
            weight: Some("weight".into()),
            ..Default::default()
        };
        let ds2 = load_csv(out.path(), &schema2).unwrap();
        assert_eq!(ds.y.to_vec(), ds2.y.to_vec());
        for ((_, a), (_, b)) in ds.dense.iter().zip(&ds2.dense) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(ds.factors[0].levels, ds2.factors[0].levels);
    }

    #[test]
    fn subset_reinterns_levels() {
        let ds = Dataset::from_parts(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![("x".into(), vec![1.0, 2.0, 3.0, 4.0])],
            vec![FactorColumn {
                name: "g".into(),
                levels: vec![0, 1, 1, 2],
                level_names: vec!["a".into(), "b".into(), "c".into()],
            }],
            None,
            false,
        )
        .unwrap();
        let sub = ds.subset(&[1, 3]).unwrap();
        assert_eq!(sub.factors[0].levels, vec![0, 1]);
        assert_eq!(sub.factors[0].level_names, vec!["b".to_string(), "c".to_string()]);
    }
}
