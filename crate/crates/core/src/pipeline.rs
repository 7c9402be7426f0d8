//! Dataset assembly: label ingestion, IQR outlier removal, standardization, splits, metrics
//! and CSV/JSON serialization.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLITS_FILE: &str = "splits.csv";

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqrFences {
    pub q1: f64,
    pub q3: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn iqr_fences(values: &[f64]) -> Result<IqrFences> {
    if values.len() < 4 {
        return Err(Error::TooFewValues {
            needed: 4,
            found: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok(IqrFences {
        q1,
        q3,
        lower: q1 - 1.5 * iqr,
        upper: q3 + 1.5 * iqr,
    })
}

/// Keep-mask for values inside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, aligned with the input.
pub fn iqr_filter(values: &[f64]) -> Result<Vec<bool>> {
    let fences = iqr_fences(values)?;
    Ok(values
        .iter()
        .map(|&v| v >= fences.lower && v <= fences.upper)
        .collect())
}

/// Per-column standardization with population standard deviation. Zero-variance columns
/// store a scale of 1, so they map to 0 and invert back to the constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidParameter("cannot fit a scaler on zero rows".into()))?;
        let width = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::LengthMismatch {
                expected: width,
                found: bad.len(),
            });
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; width];
        for row in rows {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; width];
        for row in rows {
            for ((s, x), m) in stds.iter_mut().zip(row).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(ScalerParams { means, stds })
    }

    pub fn fit_column(values: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Self::fit(&rows)
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    /// Percent; `None` when some true value is zero.
    pub mape: Option<f64>,
    pub r2: f64,
}

/// MSE, MAPE (%) and R². A constant target gives R² = 1 for a perfect fit and 0 otherwise.
pub fn metrics(y: &[f64], yhat: &[f64]) -> Result<Metrics> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: yhat.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            found: y.len(),
        });
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    let mape = if y.contains(&0.0) {
        None
    } else {
        Some(100.0 * y.iter().zip(yhat).map(|(a, b)| ((a - b) / a).abs()).sum::<f64>() / n)
    };
    let r2 = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(Metrics {
        mse: ss_res / n,
        mape,
        r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Labels {
    #[serde(rename = "E_coul")]
    pub e_coul: Option<f64>,
    #[serde(rename = "E_solv")]
    pub e_solv: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelKey {
    #[serde(rename = "E_coul")]
    Coulomb,
    #[serde(rename = "E_solv")]
    Solvation,
}

impl LabelKey {
    pub fn get(self, labels: &Labels) -> Option<f64> {
        match self {
            LabelKey::Coulomb => labels.e_coul,
            LabelKey::Solvation => labels.e_solv,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelKey::Coulomb => "E_coul",
            LabelKey::Solvation => "E_solv",
        }
    }
}

fn parse_optional(cell: &str, line: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::parse(line, format!("invalid energy {cell:?}")))
}

/// Parses a label CSV with header `id` plus any of `E_coul`, `E_solv`.
pub fn ingest_labels<R: Read>(reader: R) -> Result<BTreeMap<String, Labels>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv.headers()?.clone();
    if headers.get(0) != Some("id") {
        return Err(Error::Schema(format!(
            "label header must start with \"id\", found {:?}",
            headers.get(0).unwrap_or("")
        )));
    }
    let mut columns = Vec::new();
    for name in headers.iter().skip(1) {
        let key = match name {
            "E_coul" => LabelKey::Coulomb,
            "E_solv" => LabelKey::Solvation,
            other => return Err(Error::Schema(format!("unknown label column {other:?}"))),
        };
        if columns.contains(&key) {
            return Err(Error::Schema(format!("repeated label column {name:?}")));
        }
        columns.push(key);
    }
    let mut out = BTreeMap::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let id = record.get(0).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty id"));
        }
        let mut labels = Labels::default();
        for (key, cell) in columns.iter().zip(record.iter().skip(1)) {
            let value = parse_optional(cell, line)?;
            match key {
                LabelKey::Coulomb => labels.e_coul = value,
                LabelKey::Solvation => labels.e_solv = value,
            }
        }
        if out.insert(id.clone(), labels).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub id: String,
    pub electro: Vec<f64>,
    pub topo: Vec<u32>,
    pub labels: Labels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScalers {
    pub features: ScalerParams,
    /// Keyed by label column name; present only for labels every record carries.
    pub labels: BTreeMap<String, ScalerParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqrRecord {
    pub key: LabelKey,
    pub fences: IqrFences,
    pub removed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub test_fraction: f64,
    pub folds: usize,
}

/// Provenance and layout of an exported dataset. Field names match the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub ordering_version: String,
    pub order: usize,
    pub levels: usize,
    pub feature_count: usize,
    pub theta: f64,
    pub eps1: f64,
    pub units: crate::coulomb::EnergyUnits,
    pub unit_constant: f64,
    pub l_scale: f64,
    pub n_bins: usize,
    pub max_dim: usize,
    pub filtration_scale: f64,
    pub max_simplices: usize,
    pub topo_length: usize,
    pub channel_order: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub scalers: Option<DatasetScalers>,
    #[serde(default)]
    pub iqr: Option<IqrRecord>,
    #[serde(default)]
    pub split: Option<SplitRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    pub records: Vec<LabeledRecord>,
    pub manifest: Manifest,
}

/// Seventeen significant digits; parses back to the identical `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn column_names(prefix: char, count: usize) -> impl Iterator<Item = String> {
    let width = count.to_string().len().max(4);
    (1..=count).map(move |i| format!("{prefix}_{i:0width$}"))
}

fn check_shape(records: &[LabeledRecord], electro: usize, topo: usize) -> Result<()> {
    for r in records {
        if r.electro.len() != electro {
            return Err(Error::LengthMismatch {
                expected: electro,
                found: r.electro.len(),
            });
        }
        if r.topo.len() != topo {
            return Err(Error::LengthMismatch {
                expected: topo,
                found: r.topo.len(),
            });
        }
    }
    Ok(())
}

fn optional_cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Writes `id, e_0001.., t_0001.., E_coul, E_solv` rows.
pub fn write_features_csv<W: Write>(writer: W, records: &[LabeledRecord], electro_len: usize, topo_len: usize) -> Result<()> {
    check_shape(records, electro_len, topo_len)?;
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend(column_names('e', electro_len));
    header.extend(column_names('t', topo_len));
    header.push("E_coul".into());
    header.push("E_solv".into());
    out.write_record(&header)?;
    for r in records {
        let mut row = Vec::with_capacity(header.len());
        row.push(r.id.clone());
        row.extend(r.electro.iter().map(|&v| format_float(v)));
        row.extend(r.topo.iter().map(|v| v.to_string()));
        row.push(optional_cell(r.labels.e_coul));
        row.push(optional_cell(r.labels.e_solv));
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

/// Reads a features CSV written by [`write_features_csv`].
pub fn read_features_csv<R: Read>(reader: R) -> Result<Vec<LabeledRecord>> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let electro_len = names.iter().filter(|n| n.starts_with("e_")).count();
    let topo_len = names.iter().filter(|n| n.starts_with("t_")).count();
    let expected: Vec<String> = std::iter::once("id".to_string())
        .chain(column_names('e', electro_len))
        .chain(column_names('t', topo_len))
        .chain(["E_coul".to_string(), "E_solv".to_string()])
        .collect();
    if names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Schema("features header does not match id,e_*,t_*,E_coul,E_solv".into()));
    }
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let electro = (1..=electro_len)
            .map(|i| {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("invalid feature {:?}", &record[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        let topo = (1 + electro_len..1 + electro_len + topo_len)
            .map(|i| {
                record[i]
                    .parse::<u32>()
                    .map_err(|_| Error::parse(line, format!("invalid count {:?}", &record[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        let base = 1 + electro_len + topo_len;
        let labels = Labels {
            e_coul: parse_optional(&record[base], line)?,
            e_solv: parse_optional(&record[base + 1], line)?,
        };
        records.push(LabeledRecord {
            id,
            electro,
            topo,
            labels,
        });
    }
    Ok(records)
}

pub fn write_labels_csv<W: Write>(writer: W, records: &[LabeledRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["id", "E_coul", "E_solv"])?;
    for r in records {
        out.write_record([r.id.clone(), optional_cell(r.labels.e_coul), optional_cell(r.labels.e_solv)])?;
    }
    out.flush().map_err(|e| Error::io("<labels>", e))?;
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn features_bytes(d: &DatasetMatrix) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_features_csv(&mut buf, &d.records, d.manifest.feature_count, d.manifest.topo_length)?;
    Ok(buf)
}

/// Writes `features.csv`, `labels.csv` and `manifest.json` into `dir`.
pub fn export_dataset(d: &DatasetMatrix, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let features = features_bytes(d)?;
    let mut labels = Vec::new();
    write_labels_csv(&mut labels, &d.records)?;
    let mut manifest = serde_json::to_vec_pretty(&d.manifest)?;
    manifest.push(b'\n');
    write_file(&dir.join(FEATURES_FILE), &features)?;
    write_file(&dir.join(LABELS_FILE), &labels)?;
    write_file(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn import_dataset(dir: &Path) -> Result<DatasetMatrix> {
    let manifest = read_manifest(&dir.join(MANIFEST_FILE))?;
    let path = dir.join(FEATURES_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let records = read_features_csv(std::io::BufReader::new(file))?;
    check_shape(&records, manifest.feature_count, manifest.topo_length)?;
    Ok(DatasetMatrix { records, manifest })
}

/// Seeded shuffle of `0..n` split into (train, test); the test part holds
/// `round(n * test_fraction)` indices. Both parts are returned sorted.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in [0, 1), got {test_fraction}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut test = indices[..n_test].to_vec();
    let mut train = indices[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Fold id per index from a seeded shuffle dealt round-robin into `folds` folds.
pub fn kfold_assignments(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n.max(2) {
        return Err(Error::InvalidParameter(format!("cannot make {folds} folds from {n} records")));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    // Separate stream from the train/test shuffle.
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15));
    let mut fold = vec![0; n];
    for (rank, &i) in indices.iter().enumerate() {
        fold[i] = rank % folds;
    }
    Ok(fold)
}
