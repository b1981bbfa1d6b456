//! On-disk artifact formats. JSON artifacts carry `config_hash` and `seed`
//! fields; CSV artifacts carry them in a leading `#` comment line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use emod_core::blocks::BlockTable;
use emod_core::device::{EnergyMeasurement, PowerTrace};
use emod_core::frontend::ast::Program;
use emod_core::opdict::{BlockLog, OpDictionary};
use emod_core::planner::ExecutionCase;
use emod_core::regress::{CostModel, RoundMetrics};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub type Result<T> = std::result::Result<T, CliError>;

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stamp {
    #[serde(default)]
    pub config_hash: String,
    #[serde(default)]
    pub seed: u64,
}

impl Stamp {
    fn comment(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

/// Where each stage reads and writes, relative to one output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Layout { dir: dir.into() }
    }
    pub fn program(&self) -> PathBuf {
        self.dir.join("program.json")
    }
    pub fn blocks(&self) -> PathBuf {
        self.dir.join("blocks.json")
    }
    pub fn dict(&self) -> PathBuf {
        self.dir.join("dict.csv")
    }
    pub fn plan(&self) -> PathBuf {
        self.dir.join("plan.json")
    }
    pub fn runs(&self) -> PathBuf {
        self.dir.join("runs")
    }
    pub fn truth(&self) -> PathBuf {
        self.dir.join("truth.json")
    }
    pub fn traces(&self) -> PathBuf {
        self.dir.join("traces")
    }
    pub fn measurements(&self) -> PathBuf {
        self.dir.join("measurements.csv")
    }
    pub fn counts(&self) -> PathBuf {
        self.dir.join("counts.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
    pub fn validation(&self) -> PathBuf {
        self.dir.join("validation.json")
    }
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn report_csv(&self, table: &str) -> PathBuf {
        self.dir.join(format!("report_{table}.csv"))
    }
    pub fn svg(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.svg"))
    }
}

pub fn case_file(dir: &Path, id: u32, ext: &str) -> PathBuf {
    dir.join(format!("case_{id:04}.{ext}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn bad(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.to_path_buf(), source: std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()) }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| bad(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| bad(path, e))
}

fn csv_writer(path: &Path, stamp: &Stamp) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = create(path)?;
    w.write_all(stamp.comment().as_bytes()).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(w))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(open(path)?))
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.into_inner().map_err(|e| bad(path, e))?.flush().map_err(|e| CliError::io(path, e))
}

/// The stamp of a CSV artifact, if it has one.
pub fn read_csv_stamp(path: &Path) -> Result<Option<Stamp>> {
    let mut line = String::new();
    open(path)?.read_line(&mut line).map_err(|e| CliError::io(path, e))?;
    let Some(rest) = line.trim_end().strip_prefix("# ") else { return Ok(None) };
    let mut stamp = Stamp::default();
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("config_hash", v)) => stamp.config_hash = v.into(),
            Some(("seed", v)) => stamp.seed = v.parse().map_err(|e| bad(path, e))?,
            _ => {}
        }
    }
    Ok(Some(stamp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub cases: Vec<ExecutionCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub id: u32,
    pub method: String,
    pub kind: String,
    pub first_line: u32,
    pub last_line: u32,
    pub succ: Vec<u32>,
    pub removable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlocksFile {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub blocks: Vec<BlockEntry>,
}

pub fn blocks_file(program: &Program, table: &BlockTable, stamp: Stamp) -> BlocksFile {
    let blocks = table
        .blocks
        .iter()
        .map(|b| {
            let class = &program.classes[b.method.class as usize];
            let name = &program.method(b.method).name;
            BlockEntry {
                id: b.id,
                method: match &class.name {
                    Some(c) => format!("{c}.{name}"),
                    None => name.clone(),
                },
                kind: b.kind.name().into(),
                first_line: b.first_line,
                last_line: b.last_line,
                succ: b.succ.clone(),
                removable: b.removable,
            }
        })
        .collect();
    BlocksFile { stamp, blocks }
}

/// Rows are blocks, columns operations; the header fixes column order.
pub fn dict_csv<W: Write>(mut out: W, dict: &OpDictionary, stamp: &Stamp) -> std::io::Result<()> {
    out.write_all(stamp.comment().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["block".to_string()];
    header.extend(dict.op_ids());
    w.write_record(&header)?;
    for i in 0..dict.blocks {
        let mut row = vec![i.to_string()];
        row.extend(dict.row(i).iter().map(u32::to_string));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_dict_csv(path: &Path, dict: &OpDictionary, stamp: &Stamp) -> Result<()> {
    let mut w = create(path)?;
    dict_csv(&mut w, dict, stamp).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// `(op ids, rows)` of a dictionary CSV.
pub fn read_dict_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<u32>>)> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| bad(path, e))?.clone();
    let ops = header.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(path, e))?;
        rows.push(rec.iter().skip(1).map(|v| v.parse().map_err(|e| bad(path, e))).collect::<Result<Vec<u32>>>()?);
    }
    Ok((ops, rows))
}

/// Compact block log: `block_id,count` for every entered block.
pub fn write_block_log(path: &Path, log: &BlockLog, stamp: &Stamp) -> Result<()> {
    let mut w = csv_writer(path, stamp)?;
    w.write_record(["block_id", "count"]).map_err(|e| bad(path, e))?;
    for (i, &n) in log.counts.iter().enumerate().filter(|(_, n)| **n > 0) {
        w.write_record([i.to_string(), n.to_string()]).map_err(|e| bad(path, e))?;
    }
    finish(path, w)
}

pub fn read_block_log(path: &Path, case_id: u32, blocks: usize) -> Result<BlockLog> {
    let mut counts = vec![0u64; blocks];
    for rec in csv_reader(path)?.deserialize::<(u32, u64)>() {
        let (b, n) = rec.map_err(|e| bad(path, e))?;
        *counts.get_mut(b as usize).ok_or_else(|| bad(path, format!("block {b} out of range")))? += n;
    }
    Ok(BlockLog { case_id, counts })
}

/// One line per block entry.
pub fn write_entries(path: &Path, entries: &[u32]) -> Result<()> {
    let mut w = create(path)?;
    for b in entries {
        writeln!(w, "{b}").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_entries(path: &Path) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(line.trim().parse().map_err(|e| bad(path, e))?);
        }
    }
    Ok(out)
}

pub fn write_trace(path: &Path, trace: &PowerTrace) -> Result<()> {
    let mut w = create(path).map(csv::Writer::from_writer)?;
    w.write_record(["t_s", "power_w"]).map_err(|e| bad(path, e))?;
    for (t, p) in &trace.samples {
        w.serialize((t, p)).map_err(|e| bad(path, e))?;
    }
    finish(path, w)
}

pub fn read_trace(path: &Path) -> Result<PowerTrace> {
    let samples = csv_reader(path)?.deserialize::<(f64, f64)>().collect::<std::result::Result<_, _>>().map_err(|e| bad(path, e))?;
    Ok(PowerTrace { samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub case_id: u32,
    pub e_joules: f64,
    pub e_idle: f64,
    pub e_meas: f64,
    pub repeats: u32,
    pub stderr: f64,
}

impl From<&EnergyMeasurement> for MeasurementRow {
    fn from(m: &EnergyMeasurement) -> Self {
        MeasurementRow { case_id: m.case_id, e_joules: m.e, e_idle: m.e_idle, e_meas: m.e_meas, repeats: m.repeats, stderr: m.stderr }
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], stamp: &Stamp) -> Result<()> {
    let mut w = csv_writer(path, stamp)?;
    for r in rows {
        w.serialize(r).map_err(|e| bad(path, e))?;
    }
    finish(path, w)
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv_reader(path)?.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| bad(path, e))
}

pub fn write_measurements(path: &Path, rows: &[MeasurementRow], stamp: &Stamp) -> Result<()> {
    write_rows(path, rows, stamp)
}

pub fn read_measurements(path: &Path) -> Result<Vec<MeasurementRow>> {
    read_rows(path)
}

/// The counts matrix: one row per case, one column per operation.
pub fn write_counts(path: &Path, op_ids: &[String], rows: &[(u32, Vec<u64>)], stamp: &Stamp) -> Result<()> {
    let mut w = csv_writer(path, stamp)?;
    let mut header = vec!["case_id".to_string()];
    header.extend(op_ids.iter().cloned());
    w.write_record(&header).map_err(|e| bad(path, e))?;
    for (id, counts) in rows {
        let mut rec = vec![id.to_string()];
        rec.extend(counts.iter().map(u64::to_string));
        w.write_record(&rec).map_err(|e| bad(path, e))?;
    }
    finish(path, w)
}

#[allow(clippy::type_complexity)]
pub fn read_counts(path: &Path) -> Result<(Vec<String>, Vec<(u32, Vec<u64>)>)> {
    let mut r = csv_reader(path)?;
    let ops = r.headers().map_err(|e| bad(path, e))?.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.deserialize::<Vec<u64>>() {
        let rec = rec.map_err(|e| bad(path, e))?;
        let (id, counts) = rec.split_first().ok_or_else(|| bad(path, "empty row"))?;
        rows.push((*id as u32, counts.to_vec()));
    }
    Ok((ops, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCost {
    pub id: String,
    pub cost_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub config_hash: String,
    pub iters: u64,
    #[serde(rename = "final_J")]
    pub final_j: f64,
    pub restart: u32,
    pub final_alpha: f64,
    pub converged: bool,
    pub rank: usize,
    pub unidentified: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub ops: Vec<OpCost>,
    pub meta: ModelMeta,
}

impl ModelFile {
    pub fn new(model: &CostModel, config_hash: &str) -> Self {
        let m = &model.meta;
        ModelFile {
            ops: model.op_ids.iter().zip(&model.cost).map(|(id, c)| OpCost { id: id.clone(), cost_j: *c }).collect(),
            meta: ModelMeta {
                seed: m.seed,
                config_hash: config_hash.into(),
                iters: m.iters,
                final_j: m.final_j,
                restart: m.restart,
                final_alpha: m.final_alpha,
                converged: m.converged,
                rank: m.rank,
                unidentified: m.unidentified.clone(),
            },
        }
    }

    pub fn to_model(&self) -> CostModel {
        let m = &self.meta;
        CostModel {
            op_ids: self.ops.iter().map(|o| o.id.clone()).collect(),
            cost: self.ops.iter().map(|o| o.cost_j).collect(),
            meta: emod_core::regress::FitMeta {
                seed: m.seed,
                restart: m.restart,
                iters: m.iters,
                final_j: m.final_j,
                final_alpha: m.final_alpha,
                converged: m.converged,
                rank: m.rank,
                unidentified: m.unidentified.clone(),
                j_history: Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub round: u32,
    pub train_r: Option<f64>,
    pub val_r: Option<f64>,
    pub train_nmae: f64,
    pub val_nmae: f64,
}

impl From<&RoundMetrics> for MetricsRow {
    fn from(r: &RoundMetrics) -> Self {
        MetricsRow { round: r.round, train_r: r.train_r, val_r: r.val_r, train_nmae: r.train_nmae.value, val_nmae: r.val_nmae.value }
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow], stamp: &Stamp) -> Result<()> {
    write_rows(path, rows, stamp)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_rows(path)
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T], stamp: &Stamp) -> Result<()> {
    write_rows(path, rows, stamp)
}
