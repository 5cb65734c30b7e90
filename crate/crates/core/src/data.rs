//! Sparse binary-classification datasets and LIBSVM text I/O.
//!
//! Feature indices are 1-based in files and 0-based in memory.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major sparse samples `a_i`, labels `y_i ∈ {−1, +1}` and offsets `b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<f64>,
    offsets: Vec<f64>,
    n_features: usize,
}

/// Column-major copy of the feature matrix, for block slicing.
#[derive(Debug, Clone)]
pub struct ColumnMajor {
    pub indptr: Vec<usize>,
    pub rows: Vec<usize>,
    pub values: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from 0-based `(feature, value)` rows.
    ///
    /// Labels are normalized: positive → `+1`, anything else → `−1`.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, n_features: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Shape { context: "Dataset::from_rows labels", expected: rows.len(), got: labels.len() });
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, row) in rows.iter().enumerate() {
            for (pos, &(j, v)) in row.iter().enumerate() {
                if j >= n_features {
                    return Err(Error::Config(format!("row {r}: feature {j} out of range (n = {n_features})")));
                }
                if pos > 0 && row[pos - 1].0 >= j {
                    return Err(Error::Config(format!("row {r}: feature indices not strictly ascending")));
                }
                if !v.is_finite() {
                    return Err(Error::Config(format!("row {r}: non-finite value")));
                }
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        let labels = labels.into_iter().map(normalize_label).collect();
        let offsets = vec![0.0; rows.len()];
        Ok(Self { indptr, indices, values, labels, offsets, n_features })
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.n_features
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(indices, values)` of sample `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Result<Self> {
        if offsets.len() != self.num_samples() {
            return Err(Error::Shape { context: "Dataset::with_offsets", expected: self.num_samples(), got: offsets.len() });
        }
        self.offsets = offsets;
        Ok(self)
    }

    /// Appends a constant feature equal to 1, so the last model coordinate acts as an intercept.
    pub fn with_intercept(self) -> Self {
        let n = self.n_features;
        let mut indptr = Vec::with_capacity(self.indptr.len());
        let mut indices = Vec::with_capacity(self.nnz() + self.num_samples());
        let mut values = Vec::with_capacity(self.nnz() + self.num_samples());
        indptr.push(0);
        for i in 0..self.num_samples() {
            let (idx, val) = self.row(i);
            indices.extend_from_slice(idx);
            values.extend_from_slice(val);
            indices.push(n);
            values.push(1.0);
            indptr.push(indices.len());
        }
        Self { indptr, indices, values, n_features: n + 1, ..self }
    }

    /// `A x + b`.
    pub fn margins(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n_features, "margins: dimension mismatch");
        DVector::from_fn(self.num_samples(), |i, _| {
            let (idx, val) = self.row(i);
            idx.iter().zip(val).map(|(&j, &v)| v * x[j]).sum::<f64>() + self.offsets[i]
        })
    }

    /// `Aᵀ w`.
    pub fn transpose_mul(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_features);
        for i in 0..self.num_samples() {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[j] += v * wi;
            }
        }
        out
    }

    pub fn column_major(&self) -> ColumnMajor {
        let mut counts = vec![0usize; self.n_features + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_features {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut rows = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.num_samples() {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                rows[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        ColumnMajor { indptr, rows, values }
    }
}

fn normalize_label(y: f64) -> f64 {
    if y > 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Reads LIBSVM text: `<label> <idx>:<val> ...` with 1-based, strictly
/// ascending indices. Text after `#` is ignored, blank lines are skipped.
///
/// `n_features` overrides the feature count (it must cover every index seen);
/// otherwise the largest index is used.
pub fn parse_libsvm<R: BufRead>(reader: R, n_features: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label '{label_tok}'")))?;
        if !label.is_finite() {
            return Err(parse_err(lineno, format!("bad label '{label_tok}'")));
        }
        let mut row: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected <index>:<value>, got '{tok}'")))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad index '{idx_s}'")))?;
            if idx < 1 {
                return Err(parse_err(lineno, "feature index must be >= 1"));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value '{val_s}'")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value '{val_s}'")));
            }
            if let Some(&(prev, _)) = row.last() {
                if idx - 1 == prev {
                    return Err(parse_err(lineno, format!("duplicate index {idx}")));
                }
                if idx - 1 < prev {
                    return Err(parse_err(lineno, format!("index {idx} after {}: indices must ascend", prev + 1)));
                }
            }
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no samples"));
    }
    let n = match n_features {
        Some(n) if n < max_index => {
            return Err(Error::Config(format!("feature count {n} is smaller than the largest index {max_index}")))
        }
        Some(n) => n,
        None => max_index,
    };
    Dataset::from_rows(rows, labels, n)
}

pub fn read_libsvm_file(path: impl AsRef<std::path::Path>, n_features: Option<usize>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_libsvm(std::io::BufReader::new(file), n_features)
}

/// Shortest decimal that parses back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes LIBSVM text; `parse_libsvm` of the output reproduces `ds` exactly
/// (offsets are not part of the format).
pub fn write_libsvm<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for i in 0..ds.num_samples() {
        out.write_all(if ds.labels[i] > 0.0 { b"+1" } else { b"-1" })?;
        let (idx, val) = ds.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            write!(out, " {}:{}", j + 1, fmt_f64(v))?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Fraction of samples with `sign(a_iᵀx + b_i) = y_i`, counting `sign(0)` as `+1`.
pub fn training_accuracy(ds: &Dataset, x: &DVector<f64>) -> f64 {
    if ds.num_samples() == 0 {
        return 0.0;
    }
    let margins = ds.margins(x);
    let hits = margins
        .iter()
        .zip(&ds.labels)
        .filter(|(&m, &y)| (if m >= 0.0 { 1.0 } else { -1.0 }) == y)
        .count();
    hits as f64 / ds.num_samples() as f64
}

/// Parameters of a synthetic sparse classification set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    #[serde(default = "SyntheticSpec::default_sparsity")]
    pub sparsity: f64,
    #[serde(default = "SyntheticSpec::default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    fn default_sparsity() -> f64 {
        0.1
    }
    fn default_noise() -> f64 {
        0.1
    }

    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n, sparsity: Self::default_sparsity(), noise: Self::default_noise(), seed: 0 }
    }

    /// Parses `m=200,n=100[,sparsity=0.1][,noise=0.1][,seed=3]`.
    pub fn parse_kv(s: &str) -> Result<Self> {
        let mut spec = Self::new(0, 0);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("synthetic spec: expected key=value, got '{part}'")))?;
            let bad = || Error::Config(format!("synthetic spec: bad value for '{k}': '{v}'"));
            match k {
                "m" => spec.m = v.parse().map_err(|_| bad())?,
                "n" => spec.n = v.parse().map_err(|_| bad())?,
                "sparsity" => spec.sparsity = v.parse().map_err(|_| bad())?,
                "noise" => spec.noise = v.parse().map_err(|_| bad())?,
                "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                _ => return Err(Error::Config(format!("synthetic spec: unknown key '{k}'"))),
            }
        }
        Ok(spec)
    }

    pub fn generate(&self) -> Result<Dataset> {
        gen_synthetic(self.seed, self.m, self.n, self.sparsity, self.noise)
    }
}

/// Fraction of ground-truth weights that are nonzero.
const TRUTH_DENSITY: f64 = 0.1;

/// Synthetic data with a sparse linear ground truth.
///
/// Each feature entry is present with probability `sparsity` and drawn from
/// `N(0, 1/(n·sparsity))`, so rows have unit expected squared norm. The
/// ground truth has about 10% nonzero Gaussian weights, rescaled so that the
/// clean margin `a_iᵀx*` has unit variance. Labels are `sign(a_iᵀx* + noise·ξ_i)`
/// with `ξ_i ~ N(0,1)` and `sign(0) = +1`.
pub fn gen_synthetic(seed: u64, m: usize, n: usize, sparsity: f64, noise: f64) -> Result<Dataset> {
    if m == 0 || n == 0 {
        return Err(Error::Config(format!("synthetic data needs m, n >= 1 (got m = {m}, n = {n})")));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::Config(format!("sparsity must lie in (0, 1], got {sparsity}")));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::Config(format!("noise must be finite and >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut truth = vec![0.0; n];
    let mut support = 0usize;
    for w in truth.iter_mut() {
        if rng.random::<f64>() < TRUTH_DENSITY {
            *w = rng.sample(StandardNormal);
            support += 1;
        }
    }
    if support == 0 {
        let j = rng.random_range(0..n);
        truth[j] = rng.sample(StandardNormal);
        support = 1;
    }
    let scale = (n as f64 / support as f64).sqrt();
    let norm2: f64 = truth.iter().map(|w| w * w).sum::<f64>() / support as f64;
    let truth_scale = scale / norm2.sqrt().max(f64::MIN_POSITIVE);
    truth.iter_mut().for_each(|w| *w *= truth_scale);

    let feature_scale = 1.0 / (n as f64 * sparsity).sqrt();
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let mut row = Vec::new();
        let mut margin = 0.0;
        for (j, w) in truth.iter().enumerate() {
            if sparsity >= 1.0 || rng.random::<f64>() < sparsity {
                let z: f64 = rng.sample(StandardNormal);
                let v = z * feature_scale;
                margin += v * w;
                row.push((j, v));
            }
        }
        let xi: f64 = rng.sample(StandardNormal);
        margin += noise * xi;
        labels.push(if margin >= 0.0 { 1.0 } else { -1.0 });
        rows.push(row);
    }
    Dataset::from_rows(rows, labels, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn parse_example() {
        let ds = parse_libsvm("+1 1:0.5 3:-2\n-1 2:1\n".as_bytes(), None).unwrap();
        assert_eq!(ds.num_samples(), 2);
        assert_eq!(ds.num_features(), 3);
        assert_eq!(ds.row(0), (&[0usize, 2][..], &[0.5, -2.0][..]));
        assert_eq!(ds.row(1), (&[1usize][..], &[1.0][..]));
        assert_eq!(ds.labels(), &[1.0, -1.0]);
    }

    #[test]
    fn parse_zero_one_labels_comments_blank_lines() {
        let text = "# header comment\n1 1:2 # trailing\n\n0 2:3\n";
        let ds = parse_libsvm(text.as_bytes(), Some(5)).unwrap();
        assert_eq!(ds.labels(), &[1.0, -1.0]);
        assert_eq!(ds.num_features(), 5);
    }

    fn parse_error_line(text: &str) -> usize {
        match parse_libsvm(text.as_bytes(), None) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(parse_error_line("1 2:1 2:3"), 1);
        assert_eq!(parse_error_line("1 1:1\n1 0:3"), 2);
        assert_eq!(parse_error_line("1 1:1\n-1 3:1 2:1"), 2);
        assert_eq!(parse_error_line("abc 1:1"), 1);
        assert_eq!(parse_error_line("1 1:x"), 1);
        assert_eq!(parse_error_line("1 a:1"), 1);
        assert_eq!(parse_error_line("1 11"), 1);
        assert!(matches!(parse_libsvm("".as_bytes(), None), Err(Error::Parse { .. })));
        assert!(matches!(parse_libsvm("# only\n\n".as_bytes(), None), Err(Error::Parse { .. })));
        assert!(parse_libsvm("1 4:1".as_bytes(), Some(3)).is_err());
    }

    #[test]
    fn write_then_parse() {
        let ds = Dataset::from_rows(
            vec![vec![(0, 0.1), (4, -1e-9)], vec![], vec![(2, 3.0e20), (3, 1.0 / 3.0)]],
            vec![1.0, -1.0, 1.0],
            5,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_libsvm(&ds, &mut buf).unwrap();
        let back = parse_libsvm(buf.as_slice(), Some(5)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn accuracy_rules() {
        let ds = Dataset::from_rows(
            vec![vec![(0, 1.0)], vec![(0, -1.0)], vec![(1, 1.0)], vec![(1, 2.0)]],
            vec![1.0, -1.0, -1.0, 1.0],
            2,
        )
        .unwrap();
        assert_eq!(training_accuracy(&ds, &dvector![1.0, 1.0]), 0.75);
        assert_eq!(training_accuracy(&ds, &dvector![1.0, 0.0]), 0.75);
        assert_eq!(training_accuracy(&ds, &dvector![0.0, 0.0]), 0.5);
        let perfect = Dataset::from_rows(vec![vec![(0, 1.0)], vec![(0, -2.0)]], vec![1.0, -1.0], 1).unwrap();
        assert_eq!(training_accuracy(&perfect, &dvector![0.5]), 1.0);
    }

    #[test]
    fn synthetic_is_deterministic_and_valid() {
        let a = gen_synthetic(5, 50, 40, 0.2, 0.1).unwrap();
        let b = gen_synthetic(5, 50, 40, 0.2, 0.1).unwrap();
        assert_eq!(a, b);
        assert!(a.labels().iter().all(|&y| y == 1.0 || y == -1.0));
        assert_ne!(a, gen_synthetic(6, 50, 40, 0.2, 0.1).unwrap());
        assert!(gen_synthetic(0, 0, 4, 0.1, 0.0).is_err());
        assert!(gen_synthetic(0, 4, 4, 0.0, 0.0).is_err());
        assert!(gen_synthetic(0, 4, 4, 1.5, 0.0).is_err());
    }

    #[test]
    fn synthetic_row_density() {
        // nnz per row ~ Binomial(1000, 0.1): mean 100, variance 90
        let m = 200;
        let ds = gen_synthetic(9, m, 1000, 0.1, 0.0).unwrap();
        let mean = ds.nnz() as f64 / m as f64;
        let se = (1000.0 * 0.1 * 0.9 / m as f64).sqrt();
        assert!((mean - 100.0).abs() < 3.0 * se, "mean nnz {mean}");
    }

    #[test]
    fn column_major_matches_rows() {
        let ds = gen_synthetic(2, 30, 12, 0.3, 0.1).unwrap();
        let csc = ds.column_major();
        let mut dense = nalgebra::DMatrix::zeros(30, 12);
        for i in 0..30 {
            let (idx, val) = ds.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                dense[(i, j)] = v;
            }
        }
        for j in 0..12 {
            for p in csc.indptr[j]..csc.indptr[j + 1] {
                assert_eq!(dense[(csc.rows[p], j)], csc.values[p]);
            }
        }
        assert_eq!(*csc.indptr.last().unwrap(), ds.nnz());
    }

    #[test]
    fn intercept_column() {
        let ds = Dataset::from_rows(vec![vec![(0, 2.0)]], vec![1.0], 2).unwrap().with_intercept();
        assert_eq!(ds.num_features(), 3);
        assert_eq!(ds.row(0), (&[0usize, 2][..], &[2.0, 1.0][..]));
    }

    #[test]
    fn synthetic_kv() {
        let s = SyntheticSpec::parse_kv("m=200,n=100").unwrap();
        assert_eq!((s.m, s.n, s.sparsity, s.noise, s.seed), (200, 100, 0.1, 0.1, 0));
        let s = SyntheticSpec::parse_kv("m=5, n=4, noise=0, seed=3, sparsity=1").unwrap();
        assert_eq!((s.noise, s.seed, s.sparsity), (0.0, 3, 1.0));
        assert!(SyntheticSpec::parse_kv("m=5,q=1").is_err());
        assert!(SyntheticSpec::parse_kv("m=x").is_err());
    }
}
