//! Synthetic truncated-Gaussian-mixture generation, CSV ingestion and a
//! deterministic streaming iterator.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CsvErrorKind, Error, Result};

/// A spherical Gaussian mixture with per-component rejection truncation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub k: usize,
    pub m: usize,
    /// Component means, one vector of length `m` per component.
    pub means: Vec<Vec<f64>>,
    /// Covariance is `cov_scale * I`.
    pub cov_scale: f64,
    /// Samples are rejected beyond `truncation * sqrt(cov_scale)` from their
    /// mean. Rejection (rather than clipping) preserves the conditional law.
    pub truncation: f64,
    /// Component probabilities, summing to one.
    pub probs: Vec<f64>,
}

impl MixtureSpec {
    /// Uniform component probabilities and 3-sigma truncation, with means
    /// drawn uniformly from `[lo, hi]^m`.
    pub fn with_random_means(
        k: usize,
        m: usize,
        cov_scale: f64,
        lo: f64,
        hi: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let means = (0..k)
            .map(|_| (0..m).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
            .collect();
        Self {
            k,
            m,
            means,
            cov_scale,
            truncation: 3.0,
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::InvalidConfig("mixture needs k >= 1 and m >= 1".into()));
        }
        if self.means.len() != self.k || self.means.iter().any(|mu| mu.len() != self.m) {
            return Err(Error::InvalidConfig(
                "means must be k vectors of length m".into(),
            ));
        }
        if !(self.cov_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cov_scale must be > 0, got {}",
                self.cov_scale
            )));
        }
        if !(self.truncation > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "truncation must be > 0, got {}",
                self.truncation
            )));
        }
        if self.probs.len() != self.k {
            return Err(Error::InvalidConfig("probs must have k entries".into()));
        }
        if self.probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidConfig("probs must be finite and >= 0".into()));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("probs sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Where a dataset came from; serialized into the sidecar next to generated
/// CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Mixture { spec: MixtureSpec, seed: u64 },
    File { path: String },
    Unknown,
}

/// Column-major samples with optional integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// m x n matrix, one sample per column.
    pub x: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.column(i)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.n() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    self.n()
                )));
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(())
    }
}

/// Draws `n` samples: pick a component by its probability, then draw a
/// spherical Gaussian and reject until the draw lands within
/// `truncation * sigma` of the mean. Labels record the chosen components.
pub fn gen_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::EmptyInput("cannot generate an empty dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = spec.cov_scale.sqrt();
    let radius = spec.truncation * sigma;
    let mut x = Array2::<f64>::zeros((spec.m, n));
    let mut labels = Vec::with_capacity(n);
    for col in 0..n {
        let mut target = rng.random::<f64>();
        let mut component = spec.k - 1;
        for (i, &p) in spec.probs.iter().enumerate() {
            target -= p;
            if target <= 0.0 {
                component = i;
                break;
            }
        }
        let mean = &spec.means[component];
        loop {
            let mut dist_sq = 0.0;
            let mut draw = Array1::<f64>::zeros(spec.m);
            for r in 0..spec.m {
                let z: f64 = StandardNormal.sample(&mut rng);
                let offset = sigma * z;
                draw[r] = mean[r] + offset;
                dist_sq += offset * offset;
            }
            if dist_sq.sqrt() <= radius {
                x.column_mut(col).assign(&draw);
                break;
            }
        }
        labels.push(component);
    }
    Ok(Dataset {
        x,
        labels: Some(labels),
        provenance: Provenance::Mixture {
            spec: spec.clone(),
            seed,
        },
    })
}

/// Options for CSV ingestion. Rows are samples; when `label_column` is set
/// the final column holds integer labels and is excluded from the features.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub header: bool,
    pub label_column: bool,
}

/// Reads a rectangular numeric table. Ragged rows, non-numeric cells and
/// empty files each produce their own error.
pub fn read_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let display = path.display().to_string();
    let csv_err = |kind: CsvErrorKind| Error::Csv {
        path: display.clone(),
        kind,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(CsvErrorKind::Other(e.to_string())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 1 + usize::from(options.header);
        let record = record.map_err(|e| csv_err(CsvErrorKind::Other(e.to_string())))?;
        if record.len() == 1 && record[0].is_empty() {
            // Trailing blank line.
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(csv_err(CsvErrorKind::RaggedRow {
                    row: row_no,
                    expected: w,
                    found: record.len(),
                }))
            }
            _ => {}
        }
        let w = width.unwrap();
        if options.label_column && w < 2 {
            return Err(csv_err(CsvErrorKind::Other(
                "label column requested but rows have fewer than 2 fields".into(),
            )));
        }
        let feature_cols = if options.label_column { w - 1 } else { w };
        let mut row = Vec::with_capacity(feature_cols);
        for (col, cell) in record.iter().take(feature_cols).enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                csv_err(CsvErrorKind::NonNumericCell {
                    row: row_no,
                    col: col + 1,
                    value: cell.to_string(),
                })
            })?;
            row.push(value);
        }
        if options.label_column {
            let cell = &record[w - 1];
            let label: usize = cell.parse().map_err(|_| {
                csv_err(CsvErrorKind::BadLabel {
                    row: row_no,
                    value: cell.to_string(),
                })
            })?;
            labels.push(label);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(csv_err(CsvErrorKind::Empty));
    }
    let n = rows.len();
    let m = rows[0].len();
    let mut x = Array2::<f64>::zeros((m, n));
    for (col, row) in rows.iter().enumerate() {
        for (r, &v) in row.iter().enumerate() {
            x[[r, col]] = v;
        }
    }
    Ok(Dataset {
        x,
        labels: if options.label_column { Some(labels) } else { None },
        provenance: Provenance::File { path: display },
    })
}

/// Writes rows-as-samples CSV. Floats print in shortest round-trip form, so
/// a write/read cycle reproduces the matrix exactly. Labels, when present,
/// are appended as a final integer column.
pub fn write_csv(ds: &Dataset, path: &Path, header: bool) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let m = ds.m();
    if header {
        let mut names: Vec<String> = (0..m).map(|i| format!("x{i}")).collect();
        if ds.labels.is_some() {
            names.push("label".to_string());
        }
        writeln!(file, "{}", names.join(","))?;
    }
    for col in 0..ds.n() {
        let mut fields: Vec<String> = ds.x.column(col).iter().map(|v| format!("{v}")).collect();
        if let Some(labels) = &ds.labels {
            fields.push(labels[col].to_string());
        }
        writeln!(file, "{}", fields.join(","))?;
    }
    file.flush()?;
    Ok(())
}

/// Epoch order for [`stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamOrder {
    AsIs,
    Shuffled,
}

/// Infinite sample iterator over a dataset. Every epoch yields each column
/// exactly once; shuffled order redraws a seeded permutation per epoch.
pub struct SampleStream<'a> {
    ds: &'a Dataset,
    order: StreamOrder,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    pos: usize,
}

/// Iterator over `ds` columns in the requested order, repeating for as many
/// epochs as the caller consumes.
pub fn stream(ds: &Dataset, order: StreamOrder, seed: u64) -> SampleStream<'_> {
    let mut s = SampleStream {
        ds,
        order,
        rng: ChaCha8Rng::seed_from_u64(seed),
        perm: (0..ds.n()).collect(),
        pos: 0,
    };
    s.reshuffle();
    s
}

impl SampleStream<'_> {
    fn reshuffle(&mut self) {
        if self.order == StreamOrder::Shuffled {
            self.perm.shuffle(&mut self.rng);
        }
        self.pos = 0;
    }

    /// Index of the underlying dataset column the next call will yield.
    pub fn peek_index(&self) -> usize {
        self.perm[self.pos]
    }
}

impl Iterator for SampleStream<'_> {
    type Item = Array1<f64>;

    fn next(&mut self) -> Option<Array1<f64>> {
        if self.pos >= self.perm.len() {
            self.reshuffle();
        }
        let col = self.perm[self.pos];
        self.pos += 1;
        Some(self.ds.x.column(col).to_owned())
    }
}
