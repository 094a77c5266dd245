//! Result files.
//!
//! CSV files have one header row and one row per record; floating-point
//! values carry 17 significant digits. Provenance (kind, config hash, engine
//! version, seed) lives in a sidecar `<file>.meta.json`. JSON files hold the
//! kind and the full records. Every file is written to a temporary name in the
//! target directory and renamed into place.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::NonplanarityReport;
use crate::stats::{RateOutcome, TailPoint};
use crate::walk::{BirkhoffPoint, EstimatePoint};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Estimate,
    Rate,
    Tail,
    Checkpoint,
    Birkhoff,
    Lyapunov,
    Density,
    Nonplanar,
}

impl RecordKind {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            RecordKind::Estimate => &["n", "observable", "mean", "stderr", "trials", "aborted"],
            RecordKind::Rate => &["observable", "eta_hat", "c_hat", "r2", "eta_lo", "eta_hi", "n_min", "n_max"],
            RecordKind::Tail => &["n", "prob", "lo", "hi", "trials"],
            RecordKind::Checkpoint => &["trial", "step", "observable", "value"],
            RecordKind::Birkhoff => &["n", "observable", "average", "stderr"],
            RecordKind::Lyapunov => &["trial", "v", "exponent"],
            RecordKind::Density => &["cell", "lo", "hi", "histogram", "analytic", "flagged"],
            RecordKind::Nonplanar => &["curve", "samples", "tol", "zero_count", "zero_fraction", "min_abs", "median_abs"],
        }
    }
}

/// One row of a rate-fit file. A series that reached its noise floor before
/// three signal points has `NaN` fit values and `n_max` set to the first step
/// at the floor (empty if the floor was never reached).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub observable: String,
    #[serde(with = "crate::float_serde")]
    pub eta_hat: f64,
    #[serde(with = "crate::float_serde")]
    pub c_hat: f64,
    #[serde(with = "crate::float_serde")]
    pub r2: f64,
    #[serde(with = "crate::float_serde")]
    pub eta_lo: f64,
    #[serde(with = "crate::float_serde")]
    pub eta_hi: f64,
    pub n_min: usize,
    pub n_max: Option<usize>,
}

impl RateRow {
    pub fn new(observable: impl Into<String>, outcome: &RateOutcome) -> Self {
        let observable = observable.into();
        match outcome {
            RateOutcome::Fit(f) => RateRow {
                observable,
                eta_hat: f.eta_hat,
                c_hat: f.c_hat,
                r2: f.r2,
                eta_lo: f.eta_lo,
                eta_hi: f.eta_hi,
                n_min: f.n_min,
                n_max: Some(f.n_max),
            },
            RateOutcome::FloorReached { n_min, floor_n, .. } => RateRow {
                observable,
                eta_hat: f64::NAN,
                c_hat: f64::NAN,
                r2: f64::NAN,
                eta_lo: f64::NAN,
                eta_hi: f64::NAN,
                n_min: *n_min,
                n_max: *floor_n,
            },
        }
    }

    pub fn is_floor(&self) -> bool {
        self.eta_hat.is_nan()
    }
}

/// Observable values of one trial at one recorded step; `None` after an abort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub trial: u64,
    pub step: usize,
    pub observable: String,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub trial: u64,
    pub v: usize,
    #[serde(with = "crate::float_serde")]
    pub exponent: f64,
}

/// One grid cell of a density comparison; `lo` and `hi` are the cell corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub cell: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub histogram: f64,
    pub analytic: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonplanarRow {
    pub curve: String,
    pub samples: u64,
    pub tol: f64,
    pub zero_count: u64,
    pub zero_fraction: f64,
    pub min_abs: f64,
    pub median_abs: f64,
}

impl NonplanarRow {
    pub fn new(curve: impl Into<String>, r: &NonplanarityReport) -> Self {
        NonplanarRow {
            curve: curve.into(),
            samples: r.samples,
            tol: r.tol,
            zero_count: r.zero_count,
            zero_fraction: r.zero_fraction,
            min_abs: r.min_abs,
            median_abs: r.median_abs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Estimate(EstimatePoint),
    Rate(RateRow),
    Tail(TailPoint),
    Checkpoint(CheckpointRow),
    Birkhoff(BirkhoffPoint),
    Lyapunov(LyapunovRow),
    Density(DensityRow),
    Nonplanar(NonplanarRow),
}

impl Payload {
    pub fn kind(&self) -> RecordKind {
        match self {
            Payload::Estimate(_) => RecordKind::Estimate,
            Payload::Rate(_) => RecordKind::Rate,
            Payload::Tail(_) => RecordKind::Tail,
            Payload::Checkpoint(_) => RecordKind::Checkpoint,
            Payload::Birkhoff(_) => RecordKind::Birkhoff,
            Payload::Lyapunov(_) => RecordKind::Lyapunov,
            Payload::Density(_) => RecordKind::Density,
            Payload::Nonplanar(_) => RecordKind::Nonplanar,
        }
    }

    fn order(&self, other: &Payload) -> std::cmp::Ordering {
        use Payload::*;
        match (self, other) {
            (Estimate(a), Estimate(b)) => (a.n, &a.observable).cmp(&(b.n, &b.observable)),
            (Rate(a), Rate(b)) => a.observable.cmp(&b.observable),
            (Tail(a), Tail(b)) => a.n.cmp(&b.n),
            (Checkpoint(a), Checkpoint(b)) => {
                (a.trial, a.step, &a.observable).cmp(&(b.trial, b.step, &b.observable))
            }
            (Birkhoff(a), Birkhoff(b)) => (a.n, &a.observable).cmp(&(b.n, &b.observable)),
            (Lyapunov(a), Lyapunov(b)) => (a.trial, a.v).cmp(&(b.trial, b.v)),
            (Density(a), Density(b)) => a.cell.cmp(&b.cell),
            (Nonplanar(a), Nonplanar(b)) => a.curve.cmp(&b.curve),
            _ => self.kind_index().cmp(&other.kind_index()),
        }
    }

    fn kind_index(&self) -> usize {
        self.kind() as usize
    }

    fn to_fields(&self) -> Vec<String> {
        match self {
            Payload::Estimate(e) => vec![
                e.n.to_string(),
                e.observable.clone(),
                fmt_f(e.mean),
                fmt_f(e.stderr),
                e.trials.to_string(),
                e.aborted.to_string(),
            ],
            Payload::Rate(r) => vec![
                r.observable.clone(),
                fmt_f(r.eta_hat),
                fmt_f(r.c_hat),
                fmt_f(r.r2),
                fmt_f(r.eta_lo),
                fmt_f(r.eta_hi),
                r.n_min.to_string(),
                r.n_max.map(|n| n.to_string()).unwrap_or_default(),
            ],
            Payload::Tail(t) => vec![
                t.n.to_string(),
                fmt_f(t.prob),
                fmt_f(t.lo),
                fmt_f(t.hi),
                t.trials.to_string(),
            ],
            Payload::Checkpoint(c) => vec![
                c.trial.to_string(),
                c.step.to_string(),
                c.observable.clone(),
                c.value.map(fmt_f).unwrap_or_default(),
            ],
            Payload::Birkhoff(b) => vec![
                b.n.to_string(),
                b.observable.clone(),
                fmt_f(b.average),
                fmt_f(b.stderr),
            ],
            Payload::Lyapunov(l) => vec![l.trial.to_string(), l.v.to_string(), fmt_f(l.exponent)],
            Payload::Density(d) => vec![
                d.cell.to_string(),
                fmt_vec(&d.lo),
                fmt_vec(&d.hi),
                fmt_f(d.histogram),
                fmt_f(d.analytic),
                d.flagged.to_string(),
            ],
            Payload::Nonplanar(p) => vec![
                p.curve.clone(),
                p.samples.to_string(),
                fmt_f(p.tol),
                p.zero_count.to_string(),
                fmt_f(p.zero_fraction),
                fmt_f(p.min_abs),
                fmt_f(p.median_abs),
            ],
        }
    }

    fn from_fields(kind: RecordKind, f: &Fields) -> std::result::Result<Payload, String> {
        Ok(match kind {
            RecordKind::Estimate => Payload::Estimate(EstimatePoint {
                n: f.parse(0)?,
                observable: f.text(1),
                mean: f.parse(2)?,
                stderr: f.parse(3)?,
                trials: f.parse(4)?,
                aborted: f.parse(5)?,
            }),
            RecordKind::Rate => Payload::Rate(RateRow {
                observable: f.text(0),
                eta_hat: f.parse(1)?,
                c_hat: f.parse(2)?,
                r2: f.parse(3)?,
                eta_lo: f.parse(4)?,
                eta_hi: f.parse(5)?,
                n_min: f.parse(6)?,
                n_max: f.optional(7)?,
            }),
            RecordKind::Tail => {
                let prob: f64 = f.parse(1)?;
                let trials: u64 = f.parse(4)?;
                Payload::Tail(TailPoint {
                    n: f.parse(0)?,
                    prob,
                    lo: f.parse(2)?,
                    hi: f.parse(3)?,
                    trials,
                    count: (prob * trials as f64).round() as u64,
                })
            }
            RecordKind::Checkpoint => Payload::Checkpoint(CheckpointRow {
                trial: f.parse(0)?,
                step: f.parse(1)?,
                observable: f.text(2),
                value: f.optional(3)?,
            }),
            RecordKind::Birkhoff => Payload::Birkhoff(BirkhoffPoint {
                n: f.parse(0)?,
                observable: f.text(1),
                average: f.parse(2)?,
                stderr: f.parse(3)?,
            }),
            RecordKind::Lyapunov => Payload::Lyapunov(LyapunovRow {
                trial: f.parse(0)?,
                v: f.parse(1)?,
                exponent: f.parse(2)?,
            }),
            RecordKind::Density => Payload::Density(DensityRow {
                cell: f.parse(0)?,
                lo: f.vec(1)?,
                hi: f.vec(2)?,
                histogram: f.parse(3)?,
                analytic: f.parse(4)?,
                flagged: f.parse(5)?,
            }),
            RecordKind::Nonplanar => Payload::Nonplanar(NonplanarRow {
                curve: f.text(0),
                samples: f.parse(1)?,
                tol: f.parse(2)?,
                zero_count: f.parse(3)?,
                zero_fraction: f.parse(4)?,
                min_abs: f.parse(5)?,
                median_abs: f.parse(6)?,
            }),
        })
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_vec(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(" ")
}

struct Fields<'a> {
    rec: &'a csv::StringRecord,
    header: &'static [&'static str],
}

impl Fields<'_> {
    fn text(&self, i: usize) -> String {
        self.rec[i].to_string()
    }

    fn parse<T: FromStr>(&self, i: usize) -> std::result::Result<T, String>
    where
        T::Err: fmt::Display,
    {
        self.rec[i]
            .parse()
            .map_err(|e| format!("column `{}`: {e} ({:?})", self.header[i], &self.rec[i]))
    }

    fn optional<T: FromStr>(&self, i: usize) -> std::result::Result<Option<T>, String>
    where
        T::Err: fmt::Display,
    {
        if self.rec[i].is_empty() {
            Ok(None)
        } else {
            self.parse(i).map(Some)
        }
    }

    fn vec(&self, i: usize) -> std::result::Result<Vec<f64>, String> {
        self.rec[i]
            .split_whitespace()
            .map(|s| s.parse().map_err(|e| format!("column `{}`: {e}", self.header[i])))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance {
            config_hash: config_hash.into(),
            version: ENGINE_VERSION.to_string(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub provenance: Provenance,
    pub payload: Payload,
}

impl ResultRecord {
    pub fn new(provenance: &Provenance, payload: Payload) -> Self {
        ResultRecord {
            provenance: provenance.clone(),
            payload,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonFile {
    kind: RecordKind,
    records: Vec<ResultRecord>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    kind: RecordKind,
    #[serde(flatten)]
    provenance: Provenance,
}

/// The provenance sidecar of a CSV file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// `<dir>/<stem>.<ext>`.
pub fn result_path(dir: &Path, stem: &str, format: Format) -> PathBuf {
    dir.join(format!("{stem}.{}", format.extension()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes `records`, all of `kind`, sorted into the canonical row order.
/// CSV output requires every record to share one provenance; an empty list
/// gives a header-only file without a sidecar.
pub fn emit_results(kind: RecordKind, records: &[ResultRecord], format: Format, path: &Path) -> Result<()> {
    if let Some(r) = records.iter().find(|r| r.payload.kind() != kind) {
        return Err(Error::InvalidArgument(format!(
            "{:?} record in a {kind:?} file",
            r.payload.kind()
        )));
    }
    let mut sorted: Vec<&ResultRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.payload.order(&b.payload));
    match format {
        Format::Json => {
            let file = JsonFile {
                kind,
                records: sorted.into_iter().cloned().collect(),
            };
            let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| Error::format(path, e))?;
            bytes.push(b'\n');
            write_atomic(path, &bytes)
        }
        Format::Csv => {
            let provenance = sorted.first().map(|r| &r.provenance);
            if let Some(p) = provenance {
                if sorted.iter().any(|r| &r.provenance != p) {
                    return Err(Error::InvalidArgument(
                        "CSV records must share one provenance".into(),
                    ));
                }
            }
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let werr = |e: csv::Error| Error::format(path, e);
            w.write_record(kind.header()).map_err(werr)?;
            for r in &sorted {
                w.write_record(r.payload.to_fields()).map_err(werr)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::format(path, e))?;
            if let Some(p) = provenance {
                let meta = Meta {
                    kind,
                    provenance: p.clone(),
                };
                let mut m = serde_json::to_vec_pretty(&meta).map_err(|e| Error::format(path, e))?;
                m.push(b'\n');
                write_atomic(&meta_path(path), &m)?;
            }
            write_atomic(path, &bytes)
        }
    }
}

/// Reads a file written by [`emit_results`]; a CSV header must match the
/// schema of `kind` exactly.
pub fn parse_results(kind: RecordKind, format: Format, path: &Path) -> Result<Vec<ResultRecord>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Json => {
            let file: JsonFile = serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e))?;
            if file.kind != kind {
                return Err(Error::format(path, format!("holds {:?} records, expected {kind:?}", file.kind)));
            }
            if let Some(r) = file.records.iter().find(|r| r.payload.kind() != kind) {
                return Err(Error::format(path, format!("stray {:?} record", r.payload.kind())));
            }
            Ok(file.records)
        }
        Format::Csv => {
            let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
            let header = rd.headers().map_err(|e| Error::format(path, e))?.clone();
            let expected = kind.header();
            if header.len() != expected.len() || header.iter().zip(expected).any(|(a, b)| a != *b) {
                let bad = header
                    .iter()
                    .zip(expected)
                    .find(|(a, b)| a != *b)
                    .map(|(a, b)| format!("column `{a}` where `{b}` was expected"))
                    .unwrap_or_else(|| format!("{} columns, expected {}", header.len(), expected.len()));
                return Err(Error::format(path, format!("header mismatch: {bad}")));
            }
            let mut payloads = Vec::new();
            for (line, rec) in rd.records().enumerate() {
                let rec = rec.map_err(|e| Error::format(path, e))?;
                let f = Fields { rec: &rec, header: expected };
                payloads.push(
                    Payload::from_fields(kind, &f)
                        .map_err(|e| Error::format(path, format!("row {}: {e}", line + 1)))?,
                );
            }
            if payloads.is_empty() {
                return Ok(Vec::new());
            }
            let mpath = meta_path(path);
            let mbytes = std::fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
            let meta: Meta = serde_json::from_slice(&mbytes).map_err(|e| Error::format(&mpath, e))?;
            if meta.kind != kind {
                return Err(Error::format(&mpath, format!("describes {:?} records, expected {kind:?}", meta.kind)));
            }
            Ok(payloads
                .into_iter()
                .map(|payload| ResultRecord {
                    provenance: meta.provenance.clone(),
                    payload,
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::RateFit;

    fn prov() -> Provenance {
        Provenance::new("ab".repeat(32), 7)
    }

    fn estimate(n: usize, obs: &str, mean: f64) -> ResultRecord {
        ResultRecord::new(
            &prov(),
            Payload::Estimate(EstimatePoint {
                n,
                observable: obs.into(),
                mean,
                stderr: 0.1,
                trials: 10,
                aborted: 0,
            }),
        )
    }

    #[test]
    fn empty_list_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        emit_results(RecordKind::Estimate, &[], Format::Csv, &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "n,observable,mean,stderr,trials,aborted\n");
        assert!(parse_results(RecordKind::Estimate, Format::Csv, &p).unwrap().is_empty());
    }

    #[test]
    fn one_estimate_is_two_lines_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let (p, q) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        let r = [estimate(3, "siegel_count_r1.5", 1.0 / 3.0)];
        emit_results(RecordKind::Estimate, &r, Format::Csv, &p).unwrap();
        emit_results(RecordKind::Estimate, &r, Format::Csv, &q).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "3,siegel_count_r1.5,3.3333333333333331e-1,1.0000000000000001e-1,10,0"
        );
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap());
        assert_eq!(parse_results(RecordKind::Estimate, Format::Csv, &p).unwrap(), r);
        let meta = std::fs::read_to_string(meta_path(&p)).unwrap();
        assert!(meta.contains(&"ab".repeat(32)) && meta.contains(ENGINE_VERSION));
    }

    #[test]
    fn rows_are_sorted_by_n_then_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.json");
        let r = [estimate(2, "b", 1.0), estimate(1, "z", 1.0), estimate(2, "a", 1.0)];
        emit_results(RecordKind::Estimate, &r, Format::Json, &p).unwrap();
        let back = parse_results(RecordKind::Estimate, Format::Json, &p).unwrap();
        let keys: Vec<_> = back
            .iter()
            .map(|r| match &r.payload {
                Payload::Estimate(e) => (e.n, e.observable.clone()),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(keys, vec![(1, "z".into()), (2, "a".into()), (2, "b".into())]);
    }

    fn one_of_each() -> Vec<(RecordKind, Vec<ResultRecord>)> {
        let p = prov();
        let fit = RateOutcome::Fit(RateFit {
            eta_hat: 0.2,
            c_hat: 3.0,
            r2: 0.99,
            eta_lo: 0.1,
            eta_hi: 0.3,
            n_min: 2,
            n_max: 20,
            points: 10,
        });
        let floor = RateOutcome::FloorReached { n_min: 2, floor_n: Some(6), signal_points: 2 };
        let never = RateOutcome::FloorReached { n_min: 2, floor_n: None, signal_points: 1 };
        let rec = |x| ResultRecord::new(&p, x);
        vec![
            (RecordKind::Estimate, vec![estimate(1, "x", f64::NAN), estimate(2, "x", -1e-300)]),
            (
                RecordKind::Rate,
                vec![
                    rec(Payload::Rate(RateRow::new("a", &fit))),
                    rec(Payload::Rate(RateRow::new("b", &floor))),
                    rec(Payload::Rate(RateRow::new("c", &never))),
                ],
            ),
            (RecordKind::Tail, vec![rec(Payload::Tail(TailPoint::new(10, 3, 7))), rec(Payload::Tail(TailPoint::new(20, 0, 7)))]),
            (
                RecordKind::Checkpoint,
                vec![
                    rec(Payload::Checkpoint(CheckpointRow { trial: 0, step: 1, observable: "x".into(), value: Some(0.1) })),
                    rec(Payload::Checkpoint(CheckpointRow { trial: 0, step: 2, observable: "x".into(), value: None })),
                ],
            ),
            (
                RecordKind::Birkhoff,
                vec![rec(Payload::Birkhoff(BirkhoffPoint { n: 1, observable: "x".into(), average: 2.5, stderr: f64::NAN }))],
            ),
            (
                RecordKind::Lyapunov,
                vec![
                    rec(Payload::Lyapunov(LyapunovRow { trial: 0, v: 0, exponent: 0.7 })),
                    rec(Payload::Lyapunov(LyapunovRow { trial: 0, v: 1, exponent: f64::NEG_INFINITY })),
                ],
            ),
            (
                RecordKind::Density,
                vec![rec(Payload::Density(DensityRow {
                    cell: 0,
                    lo: vec![0.0, 0.5],
                    hi: vec![0.1, 0.6],
                    histogram: 0.01,
                    analytic: 0.011,
                    flagged: true,
                }))],
            ),
            (
                RecordKind::Nonplanar,
                vec![rec(Payload::Nonplanar(NonplanarRow {
                    curve: "moment".into(),
                    samples: 100,
                    tol: 1e-12,
                    zero_count: 0,
                    zero_fraction: 0.0,
                    min_abs: 1e-7,
                    median_abs: 0.02,
                }))],
            ),
        ]
    }

    fn same(a: &[ResultRecord], b: &[ResultRecord]) -> bool {
        // NaN != NaN, so compare the serialized forms.
        serde_json::to_string(a).unwrap() == serde_json::to_string(b).unwrap()
    }

    #[test]
    fn every_kind_round_trips_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        for (kind, records) in one_of_each() {
            for format in [Format::Csv, Format::Json] {
                let p = result_path(dir.path(), &format!("{kind:?}"), format);
                emit_results(kind, &records, format, &p).unwrap();
                let back = parse_results(kind, format, &p).unwrap();
                assert!(same(&back, &records), "{kind:?} {format}: {back:?}");
            }
        }
    }

    #[test]
    fn rejects_mixed_and_mismatched_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let recs = one_of_each();
        assert!(emit_results(RecordKind::Tail, &recs[0].1, Format::Csv, &p).is_err());
        emit_results(RecordKind::Tail, &recs[2].1, Format::Csv, &p).unwrap();
        let err = parse_results(RecordKind::Estimate, Format::Csv, &p).unwrap_err();
        assert!(err.to_string().contains("column `prob`"), "{err}");
        let mut other = recs[2].1.clone();
        other[1].provenance.seed = 8;
        assert!(emit_results(RecordKind::Tail, &other, Format::Csv, &p).is_err());
    }

    #[test]
    fn no_temporary_files_remain() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("e.csv");
        emit_results(RecordKind::Estimate, &[estimate(1, "x", 1.0)], Format::Csv, &p).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(p.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, vec!["e.csv", "e.csv.meta.json"]);
    }
}
