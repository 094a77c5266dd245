//! Experiment configuration files (TOML).
//!
//! ```toml
//! [dims]
//! k1 = 1
//! k2 = 1
//!
//! [diagonal]
//! means = [0.5, -0.5]
//! widths = 0.2            # or one half-width per coordinate
//! kind = "uniform_box"    # or "discrete_two_point"
//!
//! [unipotent]
//! curve = "moment"        # planar_demo, constant_demo, custom_polynomial
//! coefficients = [[0.0, 0.0, 1.0]]
//! mixture = 0.0
//! aux = { kind = "uniform_ball", radius = 1.0 }
//!
//! [walk]
//! steps = 40
//! trials = 1000
//! seed = 0
//! record = [10, 20, 40]   # default: every step
//! start = [[1.0, 0.0], [0.0, 1.0]]
//!
//! [[observables]]
//! kind = "siegel_count"
//! radius = 1.5
//!
//! [output]
//! directory = "results"
//! format = "csv"
//! ```
//!
//! Every section and key is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::group::Dims;
use crate::lattice::{LatticePoint, Observable};
use crate::measures::{AuxLaw, CurveKind, CurveSpec, DiagonalLawSpec, LawKind, UnipotentLawSpec};
use crate::results::Format;
use crate::walk::WalkConfig;

pub const DEFAULT_STEPS: usize = 40;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_RADIUS: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimsConfig {
    pub k1: usize,
    pub k2: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalConfig {
    pub means: Vec<f64>,
    /// Half-widths; the last one is not used.
    pub widths: Vec<f64>,
    pub kind: LawKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnipotentConfig {
    pub curve: CurveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<f64>>>,
    pub mixture: f64,
    pub aux: AuxLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkSection {
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    /// `None` records every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<Vec<usize>>,
    /// Row-major basis; `None` is the standard lattice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: Format,
}

/// A parsed and validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dims: DimsConfig,
    pub diagonal: DiagonalConfig,
    pub unipotent: UnipotentConfig,
    pub walk: WalkSection,
    pub observables: Vec<Observable>,
    pub output: OutputConfig,
}

/// Command-line overrides applied after parsing.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Widths {
    One(f64),
    Each(Vec<f64>),
}

#[derive(Deserialize)]
struct RawDims {
    k1: Option<usize>,
    k2: Option<usize>,
}

#[derive(Deserialize)]
struct RawDiagonal {
    means: Option<Vec<f64>>,
    widths: Option<Widths>,
    kind: Option<LawKind>,
}

#[derive(Deserialize)]
struct RawUnipotent {
    curve: Option<CurveKind>,
    coefficients: Option<Vec<Vec<f64>>>,
    mixture: Option<f64>,
    aux: Option<AuxLaw>,
}

#[derive(Deserialize)]
struct RawWalk {
    steps: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    record: Option<Vec<usize>>,
    start: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
struct RawOutput {
    directory: Option<PathBuf>,
    format: Option<Format>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("dims", &["k1", "k2"]),
    ("diagonal", &["means", "widths", "kind"]),
    ("unipotent", &["curve", "coefficients", "mixture", "aux"]),
    ("walk", &["steps", "trials", "seed", "record", "start"]),
    ("output", &["directory", "format"]),
];

fn observable_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "siegel_count" => &["kind", "radius"],
        "shortest_bump" => &["kind", "center", "width"],
        "shortest_log" => &["kind"],
        "constant" => &["kind", "value"],
        _ => return None,
    })
}

fn aux_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "none" => &["kind"],
        "uniform_ball" => &["kind", "radius"],
        "point_mass" => &["kind", "x"],
        _ => return None,
    })
}

fn check_keys(table: &toml::Table, allowed: &[&str], at: &str, errs: &mut Vec<String>) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            errs.push(format!("unknown key `{at}{key}`"));
        }
    }
}

fn section<T: DeserializeOwned>(root: &toml::Table, name: &str, errs: &mut Vec<String>) -> Option<T> {
    let value = root
        .get(name)
        .cloned()
        .unwrap_or_else(|| toml::Value::Table(toml::Table::new()));
    match value.try_into() {
        Ok(v) => Some(v),
        Err(e) => {
            errs.push(format!("[{name}]: {}", e.message()));
            None
        }
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Parses and validates, reporting every problem found rather than the first.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string().trim_end().to_string()]))?;
    let mut errs = Vec::new();

    for key in root.keys() {
        if key != "observables" && !SECTIONS.iter().any(|(s, _)| s == key) {
            errs.push(format!("unknown section `{key}`"));
        }
    }
    for (name, keys) in SECTIONS {
        match root.get(*name) {
            Some(toml::Value::Table(t)) => {
                check_keys(t, keys, &format!("{name}."), &mut errs);
                if *name == "unipotent" {
                    if let Some(toml::Value::Table(aux)) = t.get("aux") {
                        if let Some(keys) = aux.get("kind").and_then(|k| k.as_str()).and_then(aux_keys) {
                            check_keys(aux, keys, "unipotent.aux.", &mut errs);
                        }
                    }
                }
            }
            Some(_) => errs.push(format!("`{name}` must be a table")),
            None => {}
        }
    }

    let dims: Option<RawDims> = section(&root, "dims", &mut errs);
    let diagonal: Option<RawDiagonal> = section(&root, "diagonal", &mut errs);
    let unipotent: Option<RawUnipotent> = section(&root, "unipotent", &mut errs);
    let walk: Option<RawWalk> = section(&root, "walk", &mut errs);
    let output: Option<RawOutput> = section(&root, "output", &mut errs);

    let observables = match root.get("observables") {
        None => Some(vec![Observable::SiegelCount { radius: DEFAULT_RADIUS }]),
        Some(toml::Value::Array(items)) => {
            let mut out = Vec::new();
            let mut ok = true;
            for (i, item) in items.iter().enumerate() {
                if let toml::Value::Table(t) = item {
                    if let Some(keys) = t.get("kind").and_then(|k| k.as_str()).and_then(observable_keys) {
                        check_keys(t, keys, &format!("observables[{i}]."), &mut errs);
                    }
                }
                match item.clone().try_into::<Observable>() {
                    Ok(o) => out.push(o),
                    Err(e) => {
                        ok = false;
                        errs.push(format!("observables[{i}]: {}", e.message()));
                    }
                }
            }
            ok.then_some(out)
        }
        Some(_) => {
            errs.push("`observables` must be an array of tables".into());
            None
        }
    };

    let (Some(dims), Some(diagonal), Some(unipotent), Some(walk), Some(output), Some(observables)) =
        (dims, diagonal, unipotent, walk, output, observables)
    else {
        return Err(Error::Config(errs));
    };

    let k1 = dims.k1.unwrap_or(1);
    let k2 = dims.k2.unwrap_or(1);
    let cfg = match Dims::new(k1, k2) {
        Ok(d) => {
            let default_law = DiagonalLawSpec::default_for(d);
            let widths = match diagonal.widths {
                None => vec![1.0; d.k0()],
                Some(Widths::One(w)) => vec![w; d.k0()],
                Some(Widths::Each(ws)) => ws,
            };
            ExperimentConfig {
                dims: DimsConfig { k1, k2 },
                diagonal: DiagonalConfig {
                    means: diagonal.means.unwrap_or_else(|| default_law.means().to_vec()),
                    widths,
                    kind: diagonal.kind.unwrap_or(LawKind::UniformBox),
                },
                unipotent: UnipotentConfig {
                    curve: unipotent.curve.unwrap_or(CurveKind::Moment),
                    coefficients: unipotent.coefficients,
                    mixture: unipotent.mixture.unwrap_or(0.0),
                    aux: unipotent.aux.unwrap_or(AuxLaw::None),
                },
                walk: WalkSection {
                    steps: walk.steps.unwrap_or(DEFAULT_STEPS),
                    trials: walk.trials.unwrap_or(DEFAULT_TRIALS),
                    seed: walk.seed.unwrap_or(0),
                    record: walk.record,
                    start: walk.start,
                },
                observables,
                output: OutputConfig {
                    directory: output.directory.unwrap_or_else(|| PathBuf::from("results")),
                    format: output.format.unwrap_or(Format::Csv),
                },
            }
        }
        Err(e) => {
            errs.push(format!("[dims]: {e}"));
            return Err(Error::Config(errs));
        }
    };
    errs.extend(cfg.check());
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errs))
    }
}

impl Default for ExperimentConfig {
    /// The default two-dimensional experiment.
    fn default() -> Self {
        parse_config_str("").expect("the empty config is valid")
    }
}

impl ExperimentConfig {
    pub fn dims(&self) -> Dims {
        Dims::new(self.dims.k1, self.dims.k2).expect("validated")
    }

    pub fn diagonal_law(&self) -> Result<DiagonalLawSpec> {
        let d = &self.diagonal;
        DiagonalLawSpec::new(self.dims(), d.means.clone(), d.widths.clone(), d.kind)
    }

    pub fn unipotent_law(&self) -> Result<UnipotentLawSpec> {
        let u = &self.unipotent;
        if u.coefficients.is_some() && u.curve != CurveKind::CustomPolynomial {
            return Err(Error::InvalidLaw(
                "coefficients only apply to curve = \"custom_polynomial\"".into(),
            ));
        }
        let curve = CurveSpec::from_kind(u.curve, self.dims().k(), u.coefficients.clone())?;
        UnipotentLawSpec::new(self.dims(), curve, u.mixture, u.aux.clone())
    }

    pub fn start_point(&self) -> Result<LatticePoint> {
        let dims = self.dims();
        let Some(rows) = &self.walk.start else {
            return Ok(LatticePoint::standard(dims));
        };
        let k0 = dims.k0();
        if rows.len() != k0 || rows.iter().any(|r| r.len() != k0) {
            return Err(Error::InvalidArgument(format!("start basis must be {k0} x {k0}")));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        LatticePoint::new(dims, DMatrix::from_row_slice(k0, k0, &flat))
    }

    pub fn walk_config(&self) -> Result<WalkConfig> {
        let errs = self.check();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        WalkConfig {
            dims: self.dims(),
            diagonal: self.diagonal_law()?,
            unipotent: self.unipotent_law()?,
            steps: self.walk.steps,
            trials: self.walk.trials,
            seed: self.walk.seed,
            start: self.start_point()?,
            observables: self.observables.clone(),
            record: self.record(),
        }
        .validate()
    }

    /// The effective record schedule.
    pub fn record(&self) -> Vec<usize> {
        self.walk
            .record
            .clone()
            .unwrap_or_else(|| (1..=self.walk.steps).collect())
    }

    /// Applies overrides and revalidates.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self> {
        if let Some(s) = o.seed {
            self.walk.seed = s;
        }
        if let Some(t) = o.trials {
            self.walk.trials = t;
        }
        if let Some(s) = o.steps {
            self.walk.steps = s;
        }
        if let Some(p) = &o.out {
            self.output.directory = p.clone();
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        let errs = self.check();
        if errs.is_empty() {
            Ok(self)
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Semantic checks on a filled-in config.
    fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let Ok(dims) = Dims::new(self.dims.k1, self.dims.k2) else {
            return vec![format!(
                "[dims]: k1 = {}, k2 = {} (both must be at least 1)",
                self.dims.k1, self.dims.k2
            )];
        };
        match self.diagonal_law() {
            Ok(law) => {
                for (i, j) in law.violations() {
                    let (ai, aj) = (law.means()[i - 1], law.means()[j - 1]);
                    errs.push(format!(
                        "[diagonal]: means are not U-expanding at (i, j) = ({i}, {j}): \
                         alpha_{i} - alpha_{j} = {} must be positive",
                        ai - aj
                    ));
                }
            }
            Err(Error::DimensionMismatch { expected, .. }) => {
                let (m, w) = (self.diagonal.means.len(), self.diagonal.widths.len());
                errs.push(format!(
                    "[diagonal]: need {expected} means and widths for k0 = {}, got {m} and {w}",
                    dims.k0()
                ));
            }
            Err(Error::InvalidLaw(msg)) if msg.contains("sum to zero") => {
                errs.push(format!("[diagonal]: zero-sum constraint violated: {msg}"))
            }
            Err(e) => errs.push(format!("[diagonal]: {e}")),
        }
        if let Err(e) = self.unipotent_law() {
            errs.push(format!("[unipotent]: {e}"));
        }
        let w = &self.walk;
        if w.steps == 0 {
            errs.push("[walk]: steps must be at least 1".into());
        }
        if w.trials == 0 {
            errs.push("[walk]: trials must be at least 1".into());
        }
        if let Some(r) = &w.record {
            if r.is_empty() {
                errs.push("[walk]: record must not be empty".into());
            }
            if let Some(s) = r.iter().find(|s| **s == 0 || **s > w.steps) {
                errs.push(format!("[walk]: record step {s} outside 1..={}", w.steps));
            }
        }
        if let Err(e) = self.start_point() {
            errs.push(format!("[walk]: start: {e}"));
        }
        if self.observables.is_empty() {
            errs.push("observables: at least one observable is required".into());
        }
        for (i, o) in self.observables.iter().enumerate() {
            if let Err(e) = o.validate() {
                errs.push(format!("observables[{i}]: {e}"));
            }
        }
        errs
    }

    /// SHA-256 of the canonical JSON form (sorted keys) of everything except
    /// the output section, as lowercase hex.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            dims: &'a DimsConfig,
            diagonal: &'a DiagonalConfig,
            unipotent: &'a UnipotentConfig,
            walk: &'a WalkSection,
            observables: &'a [Observable],
        }
        let value = serde_json::to_value(Hashed {
            dims: &self.dims,
            diagonal: &self.diagonal,
            unipotent: &self.unipotent,
            walk: &self.walk,
            observables: &self.observables,
        })
        .expect("config serializes");
        let canonical = serde_json::to_vec(&value).expect("json value serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// The filled-in config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
