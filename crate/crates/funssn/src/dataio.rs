//! Functional datasets: CSV ingestion, standardization, and splitting.
//!
//! Predictor and outcome files are wide CSV: one row per functional
//! observation, one numeric column per grid point. An optional header row
//! is detected and skipped.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// A set of discretized functional predictors with one functional outcome.
#[derive(Debug, Clone)]
pub struct FunctionalDataset {
    /// J arrays of shape n x R_j.
    pub predictors: Vec<Array2<f64>>,
    pub predictor_grids: Vec<Grid>,
    /// n x Q outcome evaluations.
    pub outcome: Array2<f64>,
    pub outcome_grid: Grid,
    pub names: Vec<String>,
}

impl FunctionalDataset {
    pub fn new(
        predictors: Vec<Array2<f64>>,
        predictor_grids: Vec<Grid>,
        outcome: Array2<f64>,
        outcome_grid: Grid,
        names: Vec<String>,
    ) -> Result<Self> {
        if predictors.len() != predictor_grids.len() || predictors.len() != names.len() {
            return Err(Error::invalid("predictor / grid / name counts differ"));
        }
        let n = outcome.nrows();
        if outcome.ncols() != outcome_grid.len() {
            return Err(Error::invalid(format!(
                "outcome has {} columns but grid has {} points",
                outcome.ncols(),
                outcome_grid.len()
            )));
        }
        for (j, (x, g)) in predictors.iter().zip(&predictor_grids).enumerate() {
            if x.nrows() != n {
                return Err(Error::invalid(format!(
                    "predictor {j} has {} rows, outcome has {n}",
                    x.nrows()
                )));
            }
            if x.ncols() != g.len() {
                return Err(Error::invalid(format!(
                    "predictor {j} has {} columns but its grid has {} points",
                    x.ncols(),
                    g.len()
                )));
            }
        }
        if predictors.iter().any(|x| x.iter().any(|v| !v.is_finite()))
            || outcome.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(FunctionalDataset {
            predictors,
            predictor_grids,
            outcome,
            outcome_grid,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.outcome.nrows()
    }

    pub fn num_predictors(&self) -> usize {
        self.predictors.len()
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.iter().any(|&r| r >= self.n()) {
            return Err(Error::invalid("subset row index out of range"));
        }
        let take = |a: &Array2<f64>| {
            let mut out = Array2::zeros((rows.len(), a.ncols()));
            for (i, &r) in rows.iter().enumerate() {
                out.row_mut(i).assign(&a.row(r));
            }
            out
        };
        Ok(FunctionalDataset {
            predictors: self.predictors.iter().map(take).collect(),
            predictor_grids: self.predictor_grids.clone(),
            outcome: take(&self.outcome),
            outcome_grid: self.outcome_grid.clone(),
            names: self.names.clone(),
        })
    }

    /// Loads predictors and outcome from wide CSV files.
    pub fn load_csv<P: AsRef<Path>>(
        predictor_paths: &[P],
        outcome_path: P,
        predictor_specs: &[GridSpec],
        outcome_spec: &GridSpec,
    ) -> Result<Self> {
        if predictor_paths.len() != predictor_specs.len() {
            return Err(Error::invalid(format!(
                "{} predictor files but {} grid specs",
                predictor_paths.len(),
                predictor_specs.len()
            )));
        }
        let mut predictors = Vec::new();
        let mut grids = Vec::new();
        let mut names = Vec::new();
        for (path, spec) in predictor_paths.iter().zip(predictor_specs) {
            let label = path.as_ref().display().to_string();
            let bytes = std::fs::read(path)?;
            let m = parse_matrix_csv(&bytes, &label)?;
            let grid = spec.to_grid(m.ncols())?;
            if grid.len() != m.ncols() {
                return Err(Error::Format {
                    file: label,
                    message: format!(
                        "{} columns but grid spec yields {} points",
                        m.ncols(),
                        grid.len()
                    ),
                });
            }
            names.push(
                path.as_ref()
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| label.clone()),
            );
            predictors.push(m);
            grids.push(grid);
        }
        let out_label = outcome_path.as_ref().display().to_string();
        let outcome = parse_matrix_csv(&std::fs::read(&outcome_path)?, &out_label)?;
        let outcome_grid = outcome_spec.to_grid(outcome.ncols())?;

        let n = outcome.nrows();
        for (path, m) in predictor_paths.iter().zip(&predictors) {
            if m.nrows() != n {
                return Err(Error::Format {
                    file: path.as_ref().display().to_string(),
                    message: format!("{} rows, but outcome file has {n}", m.nrows()),
                });
            }
        }
        FunctionalDataset::new(predictors, grids, outcome, outcome_grid, names)
    }
}

/// Parses a wide numeric CSV into a matrix. An optional header row (any
/// cell that is not a number) is skipped. Non-finite cells are rejected.
pub fn parse_matrix_csv(bytes: &[u8], file_label: &str) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            file: file_label.to_string(),
            message: e.to_string(),
        })?;
        let mut row = Vec::with_capacity(record.len());
        let mut is_header = false;
        for (col_idx, cell) in record.iter().enumerate() {
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => {
                    return Err(Error::Parse {
                        file: file_label.to_string(),
                        row: row_idx + 1,
                        col: col_idx + 1,
                        message: format!("non-finite value '{}'", cell.trim()),
                    })
                }
                Err(_) => {
                    if row_idx == 0 {
                        is_header = true;
                        break;
                    }
                    return Err(Error::Parse {
                        file: file_label.to_string(),
                        row: row_idx + 1,
                        col: col_idx + 1,
                        message: format!("cannot parse '{}' as a number", cell.trim()),
                    });
                }
            }
        }
        if is_header {
            continue;
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    file: file_label.to_string(),
                    row: row_idx + 1,
                    col: row.len(),
                    message: format!("expected {w} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::Format {
        file: file_label.to_string(),
        message: "no data rows".to_string(),
    })?;
    if width == 0 {
        return Err(Error::Format {
            file: file_label.to_string(),
            message: "rows have no columns".to_string(),
        });
    }
    let mut m = Array2::zeros((rows.len(), width));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    Ok(m)
}

/// Grid specification: explicit points or a uniform range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridSpec {
    Points { points: Vec<f64> },
    Range { lo: f64, hi: f64, count: usize },
}

impl GridSpec {
    /// Builds the grid; `Range` with count 0 takes the column count from
    /// the data file instead.
    pub fn to_grid(&self, data_cols: usize) -> Result<Grid> {
        match self {
            GridSpec::Points { points } => Grid::from_points(points.clone()),
            GridSpec::Range { lo, hi, count } => {
                let count = if *count == 0 { data_cols } else { *count };
                Grid::uniform(*lo, *hi, count)
            }
        }
    }
}

/// Parses a JSON grid spec document.
pub fn parse_grid_spec(json: &str) -> Result<GridSpec> {
    serde_json::from_str(json).map_err(|e| Error::invalid(format!("bad grid spec: {e}")))
}

/// Training-set-based standardization: per predictor, a pointwise mean
/// curve and a single scale scalar (the pooled standard deviation of all
/// training evaluations), so curve shapes are preserved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean_curves: Vec<Array1<f64>>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &FunctionalDataset, train_rows: &[usize]) -> Result<Self> {
        if train_rows.is_empty() {
            return Err(Error::invalid("empty training row set"));
        }
        if train_rows.iter().any(|&r| r >= ds.n()) {
            return Err(Error::invalid("training row index out of range"));
        }
        let mut mean_curves = Vec::new();
        let mut scales = Vec::new();
        for (j, x) in ds.predictors.iter().enumerate() {
            let r_len = x.ncols();
            let mut mean = Array1::<f64>::zeros(r_len);
            for &i in train_rows {
                mean += &x.row(i);
            }
            mean /= train_rows.len() as f64;

            let mut ss = 0.0;
            for &i in train_rows {
                for r in 0..r_len {
                    let d = x[[i, r]] - mean[r];
                    ss += d * d;
                }
            }
            let scale = (ss / (train_rows.len() * r_len) as f64).sqrt();
            if scale <= 0.0 {
                return Err(Error::DegenerateData(format!(
                    "predictor {j} ('{}') is constant on the training rows",
                    ds.names[j]
                )));
            }
            mean_curves.push(mean);
            scales.push(scale);
        }
        Ok(Standardizer {
            mean_curves,
            scales,
        })
    }

    /// `x' = (x - mean)/scale` pointwise; outcome untouched.
    pub fn apply(&self, ds: &FunctionalDataset) -> Result<FunctionalDataset> {
        self.check_shapes(ds)?;
        let mut out = ds.clone();
        for (j, x) in out.predictors.iter_mut().enumerate() {
            for mut row in x.rows_mut() {
                row -= &self.mean_curves[j];
                row /= self.scales[j];
            }
        }
        Ok(out)
    }

    /// Inverse of `apply`.
    pub fn invert(&self, ds: &FunctionalDataset) -> Result<FunctionalDataset> {
        self.check_shapes(ds)?;
        let mut out = ds.clone();
        for (j, x) in out.predictors.iter_mut().enumerate() {
            for mut row in x.rows_mut() {
                row *= self.scales[j];
                row += &self.mean_curves[j];
            }
        }
        Ok(out)
    }

    fn check_shapes(&self, ds: &FunctionalDataset) -> Result<()> {
        if ds.num_predictors() != self.mean_curves.len() {
            return Err(Error::invalid(format!(
                "standardizer fitted on {} predictors, dataset has {}",
                self.mean_curves.len(),
                ds.num_predictors()
            )));
        }
        for (j, x) in ds.predictors.iter().enumerate() {
            if x.ncols() != self.mean_curves[j].len() {
                return Err(Error::invalid(format!(
                    "predictor {j}: {} grid points vs standardizer's {}",
                    x.ncols(),
                    self.mean_curves[j].len()
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic shuffled train/test split of the dataset rows.
pub fn split(
    ds: &FunctionalDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(FunctionalDataset, FunctionalDataset)> {
    let (train_rows, test_rows) = split_indices(ds.n(), test_fraction, seed)?;
    Ok((ds.subset(&train_rows)?, ds.subset(&test_rows)?))
}

/// Row index partition behind `split`; exposed so callers can standardize
/// on training rows before subsetting.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    let n_test = ((n as f64) * test_fraction).round() as usize;
    let n_test = n_test.clamp(1, n.saturating_sub(1));
    let test = rows[..n_test].to_vec();
    let train = rows[n_test..].to_vec();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_dataset(n: usize, r: usize, q: usize) -> FunctionalDataset {
        let grid = Grid::uniform(0.0, 1.0, r).unwrap();
        let out_grid = Grid::uniform(0.0, 1.0, q).unwrap();
        let x = Array2::from_shape_fn((n, r), |(i, j)| (i * r + j) as f64 * 0.1 + 1.0);
        let y = Array2::from_shape_fn((n, q), |(i, j)| (i + j) as f64);
        FunctionalDataset::new(
            vec![x],
            vec![grid],
            y,
            out_grid,
            vec!["x1".to_string()],
        )
        .unwrap()
    }

    #[test]
    fn parse_plain_csv() {
        let m = parse_matrix_csv(b"1,2,3\n4,5,6\n", "t").unwrap();
        assert_eq!(m.dim(), (2, 3));
        assert_eq!(m[[1, 2]], 6.0);
    }

    #[test]
    fn parse_skips_header() {
        let m = parse_matrix_csv(b"a,b,c\n1,2,3\n", "t").unwrap();
        assert_eq!(m.dim(), (1, 3));
    }

    #[test]
    fn parse_rejects_nan_cell() {
        let err = parse_matrix_csv(b"1,2\n3,NaN\n", "t").unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!(row, 2);
                assert_eq!(col, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        assert!(parse_matrix_csv(b"1,2,3\n4,5\n", "t").is_err());
    }

    #[test]
    fn parse_rejects_text_cell_mid_file() {
        let err = parse_matrix_csv(b"1,2\n3,oops\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, col: 2, .. }));
    }

    #[test]
    fn load_csv_shapes_and_row_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("x1.csv");
        let p2 = dir.path().join("x2.csv");
        let py = dir.path().join("y.csv");
        let row: String = (0..101).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        let body = vec![row.clone(); 10].join("\n");
        std::fs::write(&p1, &body).unwrap();
        std::fs::write(&p2, &body).unwrap();
        std::fs::write(&py, &body).unwrap();
        let spec = GridSpec::Range {
            lo: 0.0,
            hi: 1.0,
            count: 101,
        };
        let ds = FunctionalDataset::load_csv(
            &[&p1, &p2],
            &py,
            &[spec.clone(), spec.clone()],
            &spec,
        )
        .unwrap();
        assert_eq!(ds.n(), 10);
        assert_eq!(ds.num_predictors(), 2);
        assert_eq!(ds.outcome.ncols(), 101);

        // 9 rows in a predictor vs 10 in the outcome
        let short = vec![row; 9].join("\n");
        std::fs::write(&p2, short).unwrap();
        let err = FunctionalDataset::load_csv(
            &[&p1, &p2],
            &py,
            &[spec.clone(), spec.clone()],
            &spec,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn grid_spec_parsing() {
        let s = parse_grid_spec(r#"{"points": [0.0, 0.5, 1.0]}"#).unwrap();
        assert_eq!(s.to_grid(3).unwrap().len(), 3);
        let s = parse_grid_spec(r#"{"lo": 0.0, "hi": 1.0, "count": 11}"#).unwrap();
        assert_eq!(s.to_grid(11).unwrap().len(), 11);
        assert!(parse_grid_spec("{}").is_err());
    }

    #[test]
    fn standardizer_two_rows() {
        let grid = Grid::uniform(0.0, 1.0, 4).unwrap();
        let x = ndarray::arr2(&[[0.0, 0.0, 0.0, 0.0], [2.0, 2.0, 2.0, 2.0]]);
        let y = Array2::zeros((2, 4));
        let ds = FunctionalDataset::new(
            vec![x],
            vec![grid.clone()],
            y,
            grid,
            vec!["x".to_string()],
        )
        .unwrap();
        let std = Standardizer::fit(&ds, &[0, 1]).unwrap();
        assert!(std.mean_curves[0].iter().all(|&m| m == 1.0));
        assert_relative_eq!(std.scales[0], 1.0, max_relative = 1e-12);

        // standardizing its own training data gives pooled mean 0, sd 1
        let z = std.apply(&ds).unwrap();
        let refit = Standardizer::fit(&z, &[0, 1]).unwrap();
        assert!(refit.mean_curves[0].iter().all(|&m| m.abs() <= 1e-10));
        assert!((refit.scales[0] - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn standardizer_rejects_constant_predictor() {
        let grid = Grid::uniform(0.0, 1.0, 3).unwrap();
        let x = Array2::from_elem((3, 3), 5.0);
        let y = Array2::zeros((3, 3));
        let ds = FunctionalDataset::new(
            vec![x],
            vec![grid.clone()],
            y,
            grid,
            vec!["x".to_string()],
        )
        .unwrap();
        assert!(matches!(
            Standardizer::fit(&ds, &[0, 1, 2]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn standardize_round_trip() {
        let ds = toy_dataset(6, 5, 4);
        let std = Standardizer::fit(&ds, &[0, 1, 2, 3]).unwrap();
        let z = std.apply(&ds).unwrap();
        let back = std.invert(&z).unwrap();
        for (a, b) in ds.predictors[0].iter().zip(back.predictors[0].iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let ds = toy_dataset(10, 3, 3);
        let (a1, b1) = split(&ds, 0.2, 42).unwrap();
        let (a2, b2) = split(&ds, 0.2, 42).unwrap();
        assert_eq!(a1.n(), 8);
        assert_eq!(b1.n(), 2);
        assert_eq!(a1.outcome, a2.outcome);
        assert_eq!(b1.outcome, b2.outcome);

        for seed in [0u64, 1, 7, 1234] {
            let (tr, te) = split_indices(10, 0.3, seed).unwrap();
            let mut all: Vec<usize> = tr.iter().chain(te.iter()).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = toy_dataset(5, 3, 3);
        assert!(split(&ds, 0.0, 1).is_err());
        assert!(split(&ds, 1.0, 1).is_err());
    }
}
