//! CSV ingestion and synthetic dataset generation.

use std::fs;
use std::path::Path;

use masga_core::rng::{NoiseSource, Role};
use masga_core::{math, Dataset};

use crate::error::{Error, Result};

/// Load a CSV whose last column is a binary label (`0/1` or `-1/1`) and whose
/// other columns are numeric features. A first row that does not parse as
/// numbers is treated as a header. Features are standardised to zero mean and
/// unit variance; constant columns are only centred.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    parse_csv(text, true)
}

/// Load an unlabelled numeric CSV as-is (no standardisation).
pub fn load_features(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, false)
}

fn parse_csv(text: &str, labelled: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let numeric: Vec<Option<f64>> = record.iter().map(|f| f.parse::<f64>().ok()).collect();
        if i == 0 && numeric.iter().any(Option::is_none) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                column: record.len().min(w) + 1,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        let n_features = if labelled { w - 1 } else { w };
        if n_features < 1 {
            return Err(Error::Parse { row, column: 1, message: "need at least one feature column".into() });
        }
        for (c, v) in numeric[..n_features].iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => rows.push(*v),
                _ => {
                    return Err(Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("not a finite number: {:?}", &record[c]),
                    })
                }
            }
        }
        if !labelled {
            continue;
        }
        let label = &record[w - 1];
        targets.push(match numeric[w - 1] {
            Some(v) if v == 1.0 => 1.0,
            Some(v) if v == 0.0 || v == -1.0 => -1.0,
            _ => return Err(Error::Target { row, value: label.to_string() }),
        });
    }
    let Some(w) = width else {
        return Err(Error::Invalid("dataset has no data rows".into()));
    };
    if !labelled {
        return Ok(Dataset::new(rows, w)?);
    }
    standardize(&mut rows, w - 1);
    Ok(Dataset::new(rows, w - 1)?.with_targets(targets)?)
}

/// In-place column standardisation of a row-major matrix.
pub fn standardize(rows: &mut [f64], d: usize) {
    let m = rows.len() / d;
    if m == 0 {
        return;
    }
    for c in 0..d {
        let mean = (0..m).map(|r| rows[r * d + c]).sum::<f64>() / m as f64;
        let var = (0..m).map(|r| (rows[r * d + c] - mean).powi(2)).sum::<f64>() / m as f64;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for r in 0..m {
            rows[r * d + c] = (rows[r * d + c] - mean) * scale;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Standard normal features, labels from a logistic link with a random
    /// true parameter.
    Logistic,
    /// Each entry drawn from an equal mixture of `N(0, 5)` and `N(1, 5)`.
    Mixture,
    /// Scalar-per-coordinate OU data, standard normal around 1.
    Ou,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Self::Logistic),
            "mixture" => Ok(Self::Mixture),
            "ou" => Ok(Self::Ou),
            _ => Err(Error::Invalid(format!("unknown synthetic dataset kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Logistic => "logistic",
            Self::Mixture => "mixture",
            Self::Ou => "ou",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub m: usize,
    pub d: usize,
    pub seed: u64,
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.m == 0 || spec.d == 0 {
        return Err(Error::Invalid("synthetic dataset needs m > 0 and d > 0".into()));
    }
    let mut noise = NoiseSource::from_seed(spec.seed, Role::Data);
    let (m, d) = (spec.m, spec.d);
    let mut rows = vec![0.0; m * d];
    match spec.kind {
        SyntheticKind::Logistic => {
            let mut truth = vec![0.0; d];
            noise.fill_gaussian(&mut truth);
            noise.fill_gaussian(&mut rows);
            let targets = rows
                .chunks_exact(d)
                .map(|r| {
                    let p = math::sigmoid(math::dot(r, &truth));
                    if noise.uniform() < p {
                        1.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            Ok(Dataset::new(rows, d)?.with_targets(targets)?)
        }
        SyntheticKind::Mixture => {
            let sd = 5f64.sqrt();
            for v in rows.iter_mut() {
                let shift = if noise.uniform() < 0.5 { 0.0 } else { 1.0 };
                *v = shift + sd * noise.gaussian();
            }
            Ok(Dataset::new(rows, d)?)
        }
        SyntheticKind::Ou => {
            noise.fill_gaussian(&mut rows);
            rows.iter_mut().for_each(|v| *v += 1.0);
            Ok(Dataset::new(rows, d)?)
        }
    }
}

/// Write a dataset as CSV (features, then the label when present).
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = data.feature_dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    if data.targets().is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| format!("{v:?}")).collect();
        if let Some(t) = data.target(i) {
            rec.push(if t > 0.0 { "1".into() } else { "0".into() });
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
