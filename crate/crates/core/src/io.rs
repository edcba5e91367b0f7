//! File formats: calibration store, shot tables, and result exports.
//!
//! Every file written here carries the hash of the configuration that
//! produced it. JSON documents hold it in a `config_hash` field; CSV files
//! start with a `# config_hash: <hex>` comment line, which the readers skip.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{BimodalResponse, CalibrationDataset, IQShot, ProjectionSpec, QubitResponseModel};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::multiqubit::BasisIndex;
use crate::posterior::PosteriorGrid1D;
use crate::shots::{ShotRecord, Shots};

pub const SCHEMA_VERSION: u32 = 1;

/// SHA-256 of the canonical JSON form of `config` (object keys sorted).
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&value)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub n_shots: usize,
    pub timestamp: String,
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub projection: ProjectionSpec,
    pub p_g: BimodalResponse,
    pub p_e: BimodalResponse,
    pub meta: CalibrationMeta,
}

/// Calibrated detectors keyed by qubit id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CalibrationStore {
    pub qubits: BTreeMap<String, CalibrationEntry>,
}

impl CalibrationStore {
    pub fn insert(&mut self, model: &QubitResponseModel, meta: CalibrationMeta) {
        self.qubits.insert(
            model.qubit_id.clone(),
            CalibrationEntry {
                projection: model.projection,
                p_g: model.p_g,
                p_e: model.p_e,
                meta,
            },
        );
    }

    pub fn model(&self, qubit_id: &str) -> Result<QubitResponseModel> {
        let e = self.qubits.get(qubit_id).ok_or_else(|| {
            Error::QubitMismatch(format!("qubit `{qubit_id}` is not in the calibration store"))
        })?;
        QubitResponseModel::new(qubit_id, e.projection, e.p_g, e.p_e)
    }

    /// Models in the order of `qubit_ids`.
    pub fn models(&self, qubit_ids: &[String]) -> Result<Vec<QubitResponseModel>> {
        qubit_ids.iter().map(|id| self.model(id)).collect()
    }
}

pub fn read_calibration(path: &Path) -> Result<CalibrationStore> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let store: CalibrationStore = serde_json::from_str(&text)?;
    for (id, e) in &store.qubits {
        if e.meta.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "qubit `{id}`: unsupported calibration schema version {}",
                e.meta.schema_version
            )));
        }
    }
    Ok(store)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Shot records with their qubit ids, qubits in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotFile {
    pub qubit_ids: Vec<String>,
    pub records: Vec<ShotRecord>,
}

impl ShotFile {
    /// Projected values in qubit order, raw IQ records going through each
    /// model's projection.
    pub fn to_shots(&self, models: &[QubitResponseModel]) -> Result<Shots> {
        if models.len() != self.qubit_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: self.qubit_ids.len(),
                got: models.len(),
            });
        }
        let mut shots = Shots::new(models.len());
        let mut row = vec![0.0; models.len()];
        for r in &self.records {
            match r {
                ShotRecord::Raw(iq) => {
                    for ((x, s), m) in row.iter_mut().zip(iq).zip(models) {
                        *x = m.projection.project(*s);
                    }
                }
                ShotRecord::Projected(xs) => row.copy_from_slice(xs),
            }
            shots.push(&row)?;
        }
        Ok(shots)
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_err(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| parse_err(path, 1, format!("missing column `{name}`")))
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, path: &Path, row: usize) -> Result<&'a str> {
    rec.get(idx)
        .ok_or_else(|| parse_err(path, row, "too few fields"))
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str, path: &Path, row: usize) -> Result<f64> {
    let s = field(rec, idx, path, row)?;
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, row, format!("`{name}` is not a number: `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, row, format!("`{name}` is not finite")));
    }
    Ok(v)
}

enum ShotColumns {
    Raw { i: usize, q: usize },
    Projected { x: usize },
}

/// Reads a shot table with columns `shot_index, qubit_id, i, q` (raw) or
/// `shot_index, qubit_id, x` (projected), one row per qubit per shot.
pub fn read_shots(path: &Path) -> Result<ShotFile> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers()?.clone();
    let shot_col = column(&headers, "shot_index", path)?;
    let qubit_col = column(&headers, "qubit_id", path)?;
    let cols = if headers.iter().any(|h| h == "x") {
        ShotColumns::Projected {
            x: column(&headers, "x", path)?,
        }
    } else {
        ShotColumns::Raw {
            i: column(&headers, "i", path)?,
            q: column(&headers, "q", path)?,
        }
    };

    let mut qubit_ids: Vec<String> = Vec::new();
    let mut shot_order: Vec<u64> = Vec::new();
    let mut values: BTreeMap<u64, BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    let mut first_row: BTreeMap<u64, usize> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let shot_s = field(&rec, shot_col, path, row)?;
        let shot: u64 = shot_s
            .parse()
            .map_err(|_| parse_err(path, row, format!("`shot_index` is not an integer: `{shot_s}`")))?;
        let qubit = field(&rec, qubit_col, path, row)?;
        if qubit.is_empty() {
            return Err(parse_err(path, row, "empty `qubit_id`"));
        }
        let q_idx = match qubit_ids.iter().position(|id| id == qubit) {
            Some(k) => k,
            None => {
                qubit_ids.push(qubit.to_string());
                qubit_ids.len() - 1
            }
        };
        let v = match cols {
            ShotColumns::Raw { i, q } => (
                number(&rec, i, "i", path, row)?,
                number(&rec, q, "q", path, row)?,
            ),
            ShotColumns::Projected { x } => (number(&rec, x, "x", path, row)?, 0.0),
        };
        let entry = values.entry(shot).or_insert_with(|| {
            shot_order.push(shot);
            first_row.insert(shot, row);
            BTreeMap::new()
        });
        if entry.insert(q_idx, v).is_some() {
            return Err(parse_err(
                path,
                row,
                format!("qubit `{qubit}` appears twice in shot {shot}"),
            ));
        }
    }
    let n = qubit_ids.len();
    let mut records = Vec::with_capacity(shot_order.len());
    for shot in shot_order {
        let per_qubit = &values[&shot];
        if per_qubit.len() != n {
            let missing: Vec<&str> = (0..n)
                .filter(|k| !per_qubit.contains_key(k))
                .map(|k| qubit_ids[k].as_str())
                .collect();
            return Err(parse_err(
                path,
                first_row[&shot],
                format!("shot {shot} has no value for qubit(s) {}", missing.join(", ")),
            ));
        }
        records.push(match cols {
            ShotColumns::Raw { .. } => ShotRecord::Raw(
                per_qubit.values().map(|&(i, q)| IQShot { i, q }).collect(),
            ),
            ShotColumns::Projected { .. } => {
                ShotRecord::Projected(per_qubit.values().map(|&(x, _)| x).collect())
            }
        });
    }
    if records.is_empty() {
        return Err(parse_err(path, 1, "no shots"));
    }
    Ok(ShotFile { qubit_ids, records })
}

/// Reads calibration shots with columns `shot_index, qubit_id, prepared,
/// i, q`, where `prepared` is `g` or `e`. Datasets come back in order of
/// first appearance of each qubit.
pub fn read_calibration_shots(path: &Path) -> Result<Vec<CalibrationDataset>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers()?.clone();
    column(&headers, "shot_index", path)?;
    let qubit_col = column(&headers, "qubit_id", path)?;
    let prep_col = column(&headers, "prepared", path)?;
    let i_col = column(&headers, "i", path)?;
    let q_col = column(&headers, "q", path)?;
    let mut sets: Vec<CalibrationDataset> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        let qubit = field(&rec, qubit_col, path, row)?;
        if qubit.is_empty() {
            return Err(parse_err(path, row, "empty `qubit_id`"));
        }
        let shot = IQShot {
            i: number(&rec, i_col, "i", path, row)?,
            q: number(&rec, q_col, "q", path, row)?,
        };
        let k = match sets.iter().position(|d| d.qubit_id == qubit) {
            Some(k) => k,
            None => {
                sets.push(CalibrationDataset {
                    qubit_id: qubit.to_string(),
                    ground_shots: Vec::new(),
                    excited_shots: Vec::new(),
                });
                sets.len() - 1
            }
        };
        match field(&rec, prep_col, path, row)? {
            "g" | "0" => sets[k].ground_shots.push(shot),
            "e" | "1" => sets[k].excited_shots.push(shot),
            other => {
                return Err(parse_err(
                    path,
                    row,
                    format!("`prepared` must be g or e, got `{other}`"),
                ))
            }
        }
    }
    if sets.is_empty() {
        return Err(parse_err(path, 1, "no calibration shots"));
    }
    Ok(sets)
}

/// CSV writer that starts with the config-hash comment line.
pub struct HashedCsv {
    path: std::path::PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl HashedCsv {
    pub fn create(path: &Path, config_hash: &str, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "# config_hash: {config_hash}").map_err(|e| Error::io(path, e))?;
        let mut inner = csv::Writer::from_writer(buf);
        inner.write_record(header)?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_shots_raw(
    path: &Path,
    config_hash: &str,
    qubit_ids: &[String],
    iq_rows: &[Vec<IQShot>],
) -> Result<()> {
    let mut w = HashedCsv::create(path, config_hash, &["shot_index", "qubit_id", "i", "q"])?;
    for (n, row) in iq_rows.iter().enumerate() {
        for (id, s) in qubit_ids.iter().zip(row) {
            w.row([n.to_string(), id.clone(), s.i.to_string(), s.q.to_string()])?;
        }
    }
    w.finish()
}

pub fn write_shots_projected(
    path: &Path,
    config_hash: &str,
    qubit_ids: &[String],
    shots: &Shots,
) -> Result<()> {
    let mut w = HashedCsv::create(path, config_hash, &["shot_index", "qubit_id", "x"])?;
    for (n, row) in shots.rows().enumerate() {
        for (id, x) in qubit_ids.iter().zip(row) {
            w.row([n.to_string(), id.clone(), x.to_string()])?;
        }
    }
    w.finish()
}

pub fn write_calibration_shots(
    path: &Path,
    config_hash: &str,
    datasets: &[CalibrationDataset],
) -> Result<()> {
    let mut w = HashedCsv::create(
        path,
        config_hash,
        &["shot_index", "qubit_id", "prepared", "i", "q"],
    )?;
    for d in datasets {
        for (prep, list) in [("g", &d.ground_shots), ("e", &d.excited_shots)] {
            for (n, s) in list.iter().enumerate() {
                w.row([
                    n.to_string(),
                    d.qubit_id.clone(),
                    prep.to_string(),
                    s.i.to_string(),
                    s.q.to_string(),
                ])?;
            }
        }
    }
    w.finish()
}

/// Posterior density over `ρ_g`, columns `rho_g, density`.
pub fn write_posterior_csv(path: &Path, config_hash: &str, grid: &PosteriorGrid1D) -> Result<()> {
    let mut w = HashedCsv::create(path, config_hash, &["rho_g", "density"])?;
    for (k, d) in grid.densities().iter().enumerate() {
        w.row([grid.rho(k).to_string(), d.to_string()])?;
    }
    w.finish()
}

/// Columns `metric, estimator, n_shots, seed, value`.
pub fn write_metrics_csv(path: &Path, config_hash: &str, reports: &[MetricReport]) -> Result<()> {
    let mut w = HashedCsv::create(path, config_hash, &["metric", "estimator", "n_shots", "seed", "value"])?;
    for r in reports {
        w.row([
            r.metric.clone(),
            r.estimator.label().to_string(),
            r.n_shots.to_string(),
            r.seed.to_string(),
            r.value.to_string(),
        ])?;
    }
    w.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    pub population: f64,
    pub std_dev: f64,
}

/// `bitstring → {population, std_dev}`.
pub fn population_map(n_qubits: usize, populations: &[f64], std_devs: &[f64]) -> BTreeMap<String, PopulationEntry> {
    populations
        .iter()
        .zip(std_devs)
        .enumerate()
        .map(|(s, (&population, &std_dev))| {
            (
                BasisIndex(s).bitstring(n_qubits),
                PopulationEntry { population, std_dev },
            )
        })
        .collect()
}

/// Counts export, `bitstring → count`.
pub fn write_counts_json(path: &Path, counts: &crate::baselines::Counts) -> Result<()> {
    write_json(path, &counts.to_map())
}

/// Current UTC time in RFC 3339 form.
pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
