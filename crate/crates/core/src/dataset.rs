//! Multi-label datasets, their text format, and cross-validation splits.
//!
//! A feature file holds one instance per line with `d` numeric fields. The
//! matching label file has the same row order and `q` fields per line, each
//! one of `0`, `1`, `-1` or `+1`; `0` is read as `-1`. The label file may
//! start with a `#labels name1,...,nameq` line. Features are used as given:
//! no scaling or normalization is applied anywhere in the pipeline.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::textio::{self, parse_scalar, split_fields};

const LABEL_HEADER: &str = "#labels";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Matrix<T>,
    names: Option<Vec<String>>,
}

impl<T: Scalar> Dataset<T> {
    /// Validates and wraps a feature matrix and a ±1 label matrix.
    pub fn new(features: Matrix<T>, labels: Matrix<T>, names: Option<Vec<String>>) -> Result<Self> {
        let (n, d) = features.shape();
        let (n_labels, q) = labels.shape();
        if n == 0 {
            return Err(Error::Empty {
                context: "dataset features".into(),
            });
        }
        if n != n_labels {
            return Err(Error::shape(
                "dataset rows",
                format!("{n} label rows"),
                format!("{n_labels} label rows"),
            ));
        }
        if d == 0 {
            return Err(Error::InvalidInput("dataset needs at least one feature".into()));
        }
        if q < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset needs at least two labels, found {q}"
            )));
        }
        if let Some(pos) = features.as_slice().iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature at row {}, column {} is not finite",
                pos / d,
                pos % d
            )));
        }
        if let Some(pos) = labels
            .as_slice()
            .iter()
            .position(|&y| y != T::one() && y != -T::one())
        {
            return Err(Error::InvalidInput(format!(
                "label at row {}, column {} is not -1 or +1",
                pos / q,
                pos % q
            )));
        }
        if let Some(names) = &names {
            if names.len() != q {
                return Err(Error::shape("label names", q, names.len()));
            }
        }
        Ok(Self {
            features,
            labels,
            names,
        })
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    /// Label matrix with entries in {-1, +1}.
    pub fn labels(&self) -> &Matrix<T> {
        &self.labels
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Rows picked by index, keeping label names.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Empty {
                context: "dataset subset".into(),
            });
        }
        Ok(Self {
            features: self.features.select_rows(indices),
            labels: self.labels.select_rows(indices),
            names: self.names.clone(),
        })
    }

    pub fn describe(&self) -> DatasetSummary {
        let positives = self
            .labels
            .as_slice()
            .iter()
            .filter(|&&y| y == T::one())
            .count();
        DatasetSummary {
            n: self.n_instances(),
            d: self.n_features(),
            q: self.n_labels(),
            cardinality: positives as f64 / self.n_instances() as f64,
        }
    }

    pub fn features_text(&self) -> String {
        textio::format_matrix(&self.features)
    }

    /// Label file contents in ±1 encoding, with the names header if present.
    pub fn labels_text(&self) -> String {
        let mut out = String::new();
        if let Some(names) = &self.names {
            out.push_str(LABEL_HEADER);
            out.push(' ');
            out.push_str(&names.join(","));
            out.push('\n');
        }
        out.push_str(&format_label_matrix(&self.labels));
        out
    }

    pub fn save(&self, features_path: &Path, labels_path: &Path) -> Result<()> {
        write_file(features_path, &self.features_text())?;
        write_file(labels_path, &self.labels_text())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// ±1 matrix as integer tokens.
pub fn format_label_matrix<T: Scalar>(labels: &Matrix<T>) -> String {
    let mut out = String::with_capacity(labels.nrows() * labels.ncols() * 3);
    for row in labels.rows_iter() {
        let line: Vec<&str> = row
            .iter()
            .map(|&y| if y > T::zero() { "1" } else { "-1" })
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub d: usize,
    pub q: usize,
    /// Mean number of +1 entries per instance.
    pub cardinality: f64,
}

pub fn parse_features<T: Scalar>(text: &str) -> Result<Matrix<T>> {
    let features: Matrix<T> = textio::parse_matrix(text, "feature file")?;
    Ok(features)
}

/// Parses a label file into a ±1 matrix and optional label names.
pub fn parse_labels<T: Scalar>(text: &str) -> Result<(Matrix<T>, Option<Vec<String>>)> {
    let context = "label file";
    let mut names = None;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(LABEL_HEADER) {
            if !rows.is_empty() || names.is_some() {
                return Err(Error::Parse {
                    context: context.into(),
                    line: idx + 1,
                    message: "label-name header must be the first line".into(),
                });
            }
            names = Some(
                rest.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>(),
            );
            continue;
        }
        let row = split_fields(trimmed)
            .map(|tok| {
                let v: T = parse_scalar(tok, context, idx + 1)?;
                if v == T::one() {
                    Ok(T::one())
                } else if v == T::zero() || v == -T::one() {
                    Ok(-T::one())
                } else {
                    Err(Error::Parse {
                        context: context.into(),
                        line: idx + 1,
                        message: format!("label token `{tok}` is not one of 0, 1, -1, +1"),
                    })
                }
            })
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    context: context.into(),
                    line: idx + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty {
            context: context.into(),
        });
    }
    Ok((Matrix::from_rows(&rows)?, names))
}

pub fn load_dataset<T: Scalar>(features_path: &Path, labels_path: &Path) -> Result<Dataset<T>> {
    let features = parse_features(&textio::read_to_string(features_path)?)?;
    let (labels, names) = parse_labels(&textio::read_to_string(labels_path)?)?;
    Dataset::new(features, labels, names)
}

/// Assignment of `n` instances to `k` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    fold_count: usize,
    assignments: Vec<usize>,
    seed: u64,
}

impl FoldSplit {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fold_count];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Held-out indices of `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    /// Training indices of `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Uniformly shuffled partition into `k` folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k <= 1 || k > n {
        return Err(Error::param(
            "k",
            format!("fold count must satisfy 1 < k <= n (k = {k}, n = {n})"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldSplit {
        fold_count: k,
        assignments,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_all_positive() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "x.txt", "1.0 2.0\n3.0,4.0\n");
        let l = write(dir.path(), "y.txt", "1 1\n1 1\n");
        let ds: Dataset<f64> = load_dataset(&f, &l).unwrap();
        assert!(ds.labels().as_slice().iter().all(|&y| y == 1.0));
        assert_eq!(ds.describe().cardinality, 2.0);
    }

    #[test]
    fn zero_one_labels_map_to_signs() {
        let (y, names) = parse_labels::<f64>("#labels a,b\n0 1\n1,0\n").unwrap();
        assert_eq!(y.as_slice(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(names.unwrap(), vec!["a", "b"]);
        let (y, _) = parse_labels::<f64>("+1 -1\n").unwrap();
        assert_eq!(y.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn row_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "x.txt", "1\n2\n3\n");
        let l = write(dir.path(), "y.txt", "1 0\n0 1\n");
        let err = load_dataset::<f64>(&f, &l).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn bad_tokens() {
        assert!(matches!(
            parse_labels::<f64>("1 2\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_features::<f64>("1 x\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse_features::<f64>("\n\n"), Err(Error::Empty { .. })));
        assert!(matches!(parse_labels::<f64>(""), Err(Error::Empty { .. })));
    }

    #[test]
    fn invariants_enforced() {
        let x = Matrix::from_rows(&[vec![1.0f64]]).unwrap();
        let one_label = Matrix::from_rows(&[vec![1.0f64]]).unwrap();
        assert!(Dataset::new(x.clone(), one_label, None).is_err());
        let nan = Matrix::from_rows(&[vec![f64::NAN]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        assert!(Dataset::new(nan, y.clone(), None).is_err());
        assert!(Dataset::new(x.clone(), y.clone(), Some(vec!["a".into()])).is_err());
        assert!(Dataset::new(x, y, None).is_ok());
    }

    #[test]
    fn describe_counts_positives() {
        let x = Matrix::from_rows(&[vec![0.0f64], vec![1.0]]).unwrap();
        let neg = Matrix::filled(2, 3, -1.0);
        let ds = Dataset::new(x.clone(), neg, None).unwrap();
        assert_eq!(ds.describe().cardinality, 0.0);
        let pos = Matrix::filled(2, 4, 1.0);
        let s = Dataset::new(x, pos, None).unwrap().describe();
        assert_eq!((s.n, s.d, s.q, s.cardinality), (2, 1, 4, 4.0));
    }

    #[test]
    fn kfold_examples() {
        let s = kfold_split(10, 10, 0).unwrap();
        assert!(s.fold_sizes().iter().all(|&c| c == 1));
        let mut sizes = kfold_split(5, 2, 3).unwrap().fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3]);
        assert_eq!(kfold_split(100, 10, 7).unwrap(), kfold_split(100, 10, 7).unwrap());
        assert!(kfold_split(5, 1, 0).is_err());
        assert!(kfold_split(5, 6, 0).is_err());
    }

    #[test]
    fn train_and_test_partition() {
        let s = kfold_split(23, 4, 11).unwrap();
        for f in 0..4 {
            let mut all = s.train_indices(f);
            all.extend(s.test_indices(f));
            all.sort_unstable();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
        }
    }
}
