//! Synthetic data, LibSVM input and row sharding.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::{seed_stream, Purpose};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Regression,
    /// Labels in `{-1, +1}`.
    Binary,
}

/// Dense design matrix with one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vector,
    pub kind: DatasetKind,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vector, kind: DatasetKind) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if kind == DatasetKind::Binary && labels.iter().any(|&b| b != 1.0 && b != -1.0) {
            return Err(Error::InvalidArgument(
                "binary labels must be -1 or +1".into(),
            ));
        }
        Ok(Self {
            features,
            labels,
            kind,
        })
    }

    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `rows` as a new dataset, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(rows),
            labels: self.labels.select_rows(rows),
            kind: self.kind,
        }
    }
}

/// Linear regression data: Gaussian features, a weight vector with
/// `n_informative` nonzero entries drawn from `[0, 100)`, and labels
/// `A w + noise_std * N(0, 1)`. Returns the data and the weights.
pub fn make_regression(
    m: usize,
    d: usize,
    n_informative: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(Dataset, Vector)> {
    if m == 0 || d == 0 || n_informative == 0 || n_informative > d {
        return Err(Error::InvalidArgument(format!(
            "make_regression needs m, d >= 1 and 1 <= n_informative <= d (m={m}, d={d}, n_informative={n_informative})"
        )));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidArgument(format!("noise_std = {noise_std}")));
    }
    let mut rng = seed_stream(seed, 0, 0, Purpose::Data);
    let features = Matrix::from_fn(m, d, |_, _| rng.sample(StandardNormal));
    let mut weights = Vector::zeros(d);
    for j in index::sample(&mut rng, d, n_informative) {
        weights[j] = rng.random_range(0.0..100.0);
    }
    let mut labels = &features * &weights;
    if noise_std > 0.0 {
        for y in labels.iter_mut() {
            *y += noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok((
        Dataset::new(features, labels, DatasetKind::Regression)?,
        weights,
    ))
}

/// Noise-free regression where every row is generated from one dense weight
/// vector, so every worker's residual vanishes at that vector.
pub fn make_interpolation_regression(
    m: usize,
    d: usize,
    workers: usize,
    seed: u64,
) -> Result<(Dataset, Vector)> {
    if workers == 0 || workers > m {
        return Err(Error::InvalidArgument(format!(
            "cannot split {m} rows across {workers} workers"
        )));
    }
    make_regression(m, d, d, 0.0, seed)
}

/// Parsing options for LibSVM text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibsvmOptions {
    /// Number of features. Defaults to the largest index seen.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Map two label values to `{-1, +1}` and reject any third value.
    #[serde(default = "default_true")]
    pub binary: bool,
    /// Divide every column by its largest absolute value.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for LibsvmOptions {
    fn default() -> Self {
        Self {
            dim: None,
            binary: true,
            normalize: false,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Read a LibSVM file (`label idx:val ...`, 1-based indices).
pub fn parse_libsvm(path: &Path, options: &LibsvmOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_libsvm_reader(
        std::io::BufReader::new(file),
        &path.display().to_string(),
        options,
    )
}

/// Parse LibSVM text from any reader; `source` names it in error messages.
pub fn parse_libsvm_reader<R: BufRead>(
    reader: R,
    source: &str,
    options: &LibsvmOptions,
) -> Result<Dataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(lineno, format!("bad label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(err(lineno, format!("non-finite label {label_tok:?}")));
        }
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut previous = 0usize;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected index:value, got {tok:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| err(lineno, format!("bad index {i:?}")))?;
            if i == 0 {
                return Err(err(lineno, "indices are 1-based; found 0".into()));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| err(lineno, format!("bad value {v:?}")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite value at index {i}")));
            }
            if let Some(slot) = entries.iter_mut().find(|(j, _)| *j == i) {
                log::warn!("{source}:{lineno}: duplicate index {i}; keeping the last value");
                slot.1 = v;
                continue;
            }
            if i < previous {
                log::warn!("{source}:{lineno}: index {i} out of order");
            }
            previous = i;
            max_index = max_index.max(i);
            entries.push((i, v));
        }
        labels.push((lineno, label));
        rows.push(entries);
    }
    let dim = match options.dim {
        Some(d) if d < max_index => {
            return Err(err(0, format!("feature index {max_index} exceeds dim {d}")));
        }
        Some(d) => d,
        None => max_index,
    };
    let mut features = Matrix::zeros(rows.len(), dim);
    for (r, entries) in rows.iter().enumerate() {
        for &(i, v) in entries {
            features[(r, i - 1)] = v;
        }
    }
    if options.normalize {
        for mut col in features.column_iter_mut() {
            let scale = col.amax();
            if scale > 0.0 {
                col /= scale;
            }
        }
    }
    let (kind, label_vec) = if options.binary {
        (DatasetKind::Binary, binary_labels(&labels, &err)?)
    } else {
        (
            DatasetKind::Regression,
            Vector::from_iterator(labels.len(), labels.iter().map(|l| l.1)),
        )
    };
    Dataset::new(features, label_vec, kind)
}

fn binary_labels(labels: &[(usize, f64)], err: &impl Fn(usize, String) -> Error) -> Result<Vector> {
    let mut distinct: Vec<f64> = Vec::new();
    for &(line, l) in labels {
        if !distinct.contains(&l) {
            if distinct.len() == 2 {
                return Err(err(
                    line,
                    format!("third distinct label {l} in binary data"),
                ));
            }
            distinct.push(l);
        }
    }
    distinct.sort_by(f64::total_cmp);
    let map = |l: f64| -> f64 {
        match distinct.as_slice() {
            [_, hi] => {
                if l == *hi {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => {
                if l > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    };
    Ok(Vector::from_iterator(
        labels.len(),
        labels.iter().map(|l| map(l.1)),
    ))
}

/// Write `data` in LibSVM format, listing nonzero features only. Values use
/// the shortest representation that parses back to the same float.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for r in 0..data.rows() {
        write!(out, "{}", data.labels[r])?;
        for (j, v) in data.features.row(r).iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Rows assigned to one worker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shard {
    pub worker: usize,
    pub rows: Vec<usize>,
}

/// Randomly permute `m` rows and cut them into `n` contiguous blocks whose
/// sizes differ by at most one.
pub fn shard(m: usize, n: usize, seed: u64) -> Result<Vec<Shard>> {
    if n == 0 || n > m {
        return Err(Error::InvalidArgument(format!(
            "cannot split {m} rows across {n} workers"
        )));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut seed_stream(seed, 0, 0, Purpose::Shard));
    let (base, extra) = (m / n, m % n);
    let mut start = 0;
    Ok((0..n)
        .map(|worker| {
            let len = base + usize::from(worker < extra);
            let rows = perm[start..start + len].to_vec();
            start += len;
            Shard { worker, rows }
        })
        .collect())
}
