//! Command-line front end. [`run`] parses arguments, dispatches a subcommand
//! and returns the process exit code: 0 on success, 1 for invalid input or
//! configuration, 2 for runtime failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use horowalk::config::{parse_config, ExperimentConfig, Overrides};
use horowalk::group::DiagonalMap;
use horowalk::measures::{nonplanarity_check, pushforward_density_check, CurveSpec, Grid};
use horowalk::results::{
    emit_results, parse_results, result_path, CheckpointRow, DensityRow, Format, LyapunovRow,
    NonplanarRow, Payload, Provenance, RateRow, RecordKind, ResultRecord,
};
use horowalk::stats::{
    chernoff_bound, chernoff_tail, conjugation_growth, estimate_rate, expansion_set_mass,
    lyapunov_check, random_traceless, SeriesPoint, TailCurve,
};
use horowalk::walk::{run_birkhoff, run_ensemble};
use horowalk::Error;

#[derive(Parser, Debug)]
#[command(name = "horowalk", version, about = "Random walks on the space of unimodular lattices")]
struct Cli {
    /// Experiment config (TOML); defaults are used when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    steps: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum TailKind {
    Chernoff,
    Expansion,
    Growth,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the trial ensemble and write per-step estimates.
    Walk {
        /// Also write every trial's recorded values.
        #[arg(long)]
        checkpoints: bool,
    },
    /// Running time averages along one trajectory of `steps` steps.
    Birkhoff,
    /// Fit convergence rates to a previous `walk` output.
    Rate,
    /// Chernoff tails, expansion-set masses and conjugation growth.
    Tails {
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["chernoff", "expansion", "growth"])]
        kind: Vec<TailKind>,
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20, 40, 80])]
        ns: Vec<usize>,
        /// Deviation threshold for the Chernoff tail.
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Diagonal coordinate (0-based) for the Chernoff tail.
        #[arg(long, default_value_t = 0)]
        coord: usize,
        /// Growth threshold C; defaults to e^beta for the smallest gap beta.
        #[arg(long)]
        c_probe: Option<f64>,
    },
    /// Lyapunov exponents of the adjoint action on random traceless matrices.
    Lyapunov {
        #[arg(long, default_value_t = 20)]
        vectors: usize,
    },
    /// Fraction of uniform tuples where the curve's determinant vanishes.
    Nonplanar {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Histogram of the pushforward of Lebesgue measure against its analytic density.
    Density {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Cells per axis; defaults to 200 for k = 1 and 40 for k = 2.
        #[arg(long)]
        cells: Option<usize>,
        /// Positive map coefficients, k per map, k maps; identity by default.
        #[arg(long, value_delimiter = ',')]
        coeffs: Vec<f64>,
    },
    /// Parse and validate the config, then print it with defaults filled in.
    Validate,
}

/// Runs the command line `argv` (including the program name).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidArgument(_)
        | Error::InvalidLaw(_)
        | Error::InvalidDims { .. }
        | Error::DimensionMismatch { .. } => 1,
        _ => 2,
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    provenance: Provenance,
}

impl Ctx {
    fn path(&self, stem: &str) -> PathBuf {
        result_path(&self.cfg.output.directory, stem, self.cfg.output.format)
    }

    fn write(&self, stem: &str, kind: RecordKind, rows: Vec<Payload>) -> horowalk::Result<PathBuf> {
        let records: Vec<ResultRecord> = rows
            .into_iter()
            .map(|p| ResultRecord::new(&self.provenance, p))
            .collect();
        let path = self.path(stem);
        emit_results(kind, &records, self.cfg.output.format, &path)?;
        eprintln!("wrote {} ({} rows)", path.display(), records.len());
        Ok(path)
    }
}

fn dispatch(cli: Cli) -> horowalk::Result<()> {
    let base = match &cli.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::default(),
    };
    let cfg = base.with_overrides(&Overrides {
        seed: cli.seed,
        trials: cli.trials,
        steps: cli.steps,
        out: cli.out.clone(),
        format: cli.format.map(Format::from),
    })?;
    let provenance = Provenance::new(cfg.hash(), cfg.walk.seed);
    let ctx = Ctx { cfg, provenance };
    match cli.command {
        Command::Validate => {
            print!("{}", ctx.cfg.to_toml());
            eprintln!("config hash {}", ctx.provenance.config_hash);
            Ok(())
        }
        Command::Walk { checkpoints } => walk(&ctx, checkpoints),
        Command::Birkhoff => birkhoff(&ctx),
        Command::Rate => rate(&ctx),
        Command::Tails { kind, ns, eps, coord, c_probe } => tails(&ctx, &kind, &ns, eps, coord, c_probe),
        Command::Lyapunov { vectors } => lyapunov(&ctx, vectors),
        Command::Nonplanar { samples, tol } => nonplanar(&ctx, samples, tol),
        Command::Density { samples, cells, coeffs } => density(&ctx, samples, cells, &coeffs),
    }
}

fn walk(ctx: &Ctx, checkpoints: bool) -> horowalk::Result<()> {
    let wc = ctx.cfg.walk_config()?;
    let res = run_ensemble(&wc)?;
    let aborted = res.traces.iter().filter(|t| t.aborted_at.is_some()).count();
    let excursions: usize = res.traces.iter().map(|t| t.excursions.len()).sum();
    let drift = res.traces.iter().filter(|t| t.drift_flag).count();
    eprintln!(
        "{} trials, {aborted} aborted, {excursions} excursions, {drift} drift-flagged",
        res.traces.len()
    );
    ctx.write(
        "estimates",
        RecordKind::Estimate,
        res.estimates.into_iter().map(Payload::Estimate).collect(),
    )?;
    if checkpoints {
        let mut rows = Vec::new();
        for t in &res.traces {
            for (r, &step) in wc.record.iter().enumerate() {
                for (o, obs) in wc.observables.iter().enumerate() {
                    rows.push(Payload::Checkpoint(CheckpointRow {
                        trial: t.trial,
                        step,
                        observable: obs.name(),
                        value: t.values[r][o],
                    }));
                }
            }
        }
        ctx.write("checkpoints", RecordKind::Checkpoint, rows)?;
    }
    Ok(())
}

fn birkhoff(ctx: &Ctx) -> horowalk::Result<()> {
    let wc = ctx.cfg.walk_config()?;
    let res = run_birkhoff(&wc, wc.steps)?;
    eprintln!("{} excursions, aborted at {:?}", res.excursions.len(), res.aborted_at);
    ctx.write(
        "birkhoff",
        RecordKind::Birkhoff,
        res.points.into_iter().map(Payload::Birkhoff).collect(),
    )?;
    Ok(())
}

fn rate(ctx: &Ctx) -> horowalk::Result<()> {
    let input = ctx.path("estimates");
    if !input.exists() {
        return Err(Error::Io {
            path: input.display().to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "missing estimates file; run `walk` first",
            ),
        });
    }
    let records = parse_results(RecordKind::Estimate, ctx.cfg.output.format, &input)?;
    let provenance = records.first().map_or_else(|| ctx.provenance.clone(), |r| r.provenance.clone());
    if provenance.config_hash != ctx.provenance.config_hash {
        eprintln!("warning: {} was produced by a different config", input.display());
    }
    let mut series: BTreeMap<String, Vec<SeriesPoint>> = BTreeMap::new();
    for r in &records {
        if let Payload::Estimate(e) = &r.payload {
            series.entry(e.observable.clone()).or_default().push(SeriesPoint {
                n: e.n,
                mean: e.mean,
                stderr: e.stderr,
            });
        }
    }
    let dims = ctx.cfg.dims();
    let mut rows = Vec::new();
    for (name, pts) in &series {
        let Some(haar) = ctx
            .cfg
            .observables
            .iter()
            .find(|o| &o.name() == name)
            .and_then(|o| o.haar_mean(dims))
        else {
            eprintln!("skipping {name}: no closed-form mean");
            continue;
        };
        let outcome = estimate_rate(pts, haar)?;
        rows.push(Payload::Rate(RateRow::new(name.clone(), &outcome)));
    }
    let records: Vec<ResultRecord> = rows.into_iter().map(|p| ResultRecord::new(&provenance, p)).collect();
    let path = ctx.path("rates");
    emit_results(RecordKind::Rate, &records, ctx.cfg.output.format, &path)?;
    eprintln!("wrote {} ({} rows)", path.display(), records.len());
    Ok(())
}

fn tail_rows(curve: TailCurve) -> Vec<Payload> {
    curve.points.into_iter().map(Payload::Tail).collect()
}

fn tails(
    ctx: &Ctx,
    kinds: &[TailKind],
    ns: &[usize],
    eps: f64,
    coord: usize,
    c_probe: Option<f64>,
) -> horowalk::Result<()> {
    let law = ctx.cfg.diagonal_law()?;
    let trials = ctx.cfg.walk.trials as u64;
    let seed = ctx.cfg.walk.seed;
    for kind in kinds {
        match kind {
            TailKind::Chernoff => {
                let c = chernoff_tail(&law, coord, eps, ns, trials, seed)?;
                for p in &c.points {
                    eprintln!("n = {}: tail {:.4e}, bound {:.4e}", p.n, p.prob, chernoff_bound(&law, coord, eps, p.n));
                }
                ctx.write("tails_chernoff", RecordKind::Tail, tail_rows(c))?;
            }
            TailKind::Expansion => {
                let c = expansion_set_mass(&law, ns, trials, seed)?;
                ctx.write("tails_expansion", RecordKind::Tail, tail_rows(c))?;
            }
            TailKind::Growth => {
                let probe = c_probe.unwrap_or_else(|| law.beta_min().exp());
                let c = conjugation_growth(&law, &ctx.cfg.unipotent_law()?, ns, trials, probe, seed)?;
                ctx.write("tails_growth", RecordKind::Tail, tail_rows(c))?;
            }
        }
    }
    Ok(())
}

fn lyapunov(ctx: &Ctx, vectors: usize) -> horowalk::Result<()> {
    let wc = ctx.cfg.walk_config()?;
    let vs = random_traceless(wc.dims, vectors, wc.seed);
    let r = lyapunov_check(&wc, &vs, wc.steps, wc.trials)?;
    eprintln!(
        "{} of {} exponents nonpositive, {} underflows",
        r.nonpositive,
        r.trials * vs.len(),
        r.underflows
    );
    let mut rows = Vec::new();
    for (t, row) in r.exponents.iter().enumerate() {
        for (v, e) in row.iter().enumerate() {
            rows.push(Payload::Lyapunov(LyapunovRow {
                trial: t as u64,
                v,
                exponent: *e,
            }));
        }
    }
    ctx.write("lyapunov", RecordKind::Lyapunov, rows)?;
    Ok(())
}

fn curve_name(curve: &CurveSpec) -> String {
    serde_json::to_value(curve.kind())
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn nonplanar(ctx: &Ctx, samples: u64, tol: f64) -> horowalk::Result<()> {
    let u = ctx.cfg.unipotent_law()?;
    let r = nonplanarity_check(u.curve(), samples, tol, ctx.cfg.walk.seed)?;
    eprintln!("zero fraction {} ({} of {})", r.zero_fraction, r.zero_count, r.samples);
    ctx.write(
        "nonplanar",
        RecordKind::Nonplanar,
        vec![Payload::Nonplanar(NonplanarRow::new(curve_name(u.curve()), &r))],
    )?;
    Ok(())
}

fn density(ctx: &Ctx, samples: u64, cells: Option<usize>, coeffs: &[f64]) -> horowalk::Result<()> {
    let curve = ctx.cfg.unipotent_law()?.curve().clone();
    let k = curve.dim();
    if k > 2 {
        return Err(Error::InvalidArgument(format!("density supports k <= 2, got {k}")));
    }
    let maps: Vec<DiagonalMap> = if coeffs.is_empty() {
        vec![DiagonalMap::identity(k); k]
    } else if coeffs.len() == k * k {
        coeffs.chunks(k).map(DiagonalMap::from_coeffs).collect::<horowalk::Result<_>>()?
    } else {
        return Err(Error::InvalidArgument(format!("--coeffs needs {} values", k * k)));
    };
    let (lo, hi) = image_box(&maps, &curve);
    let per_axis = cells.unwrap_or(if k == 1 { 200 } else { 40 });
    let grid = Grid::new(lo, hi, vec![per_axis; k])?;
    let d = pushforward_density_check(&maps, &curve, &grid, samples, ctx.cfg.walk.seed)?;
    eprintln!("total variation {:.4e}, {} flagged cells", d.tv, d.flagged_count);
    let rows = (0..grid.len())
        .map(|c| {
            let b = grid.cell_bounds(c);
            Payload::Density(DensityRow {
                cell: c,
                lo: b.iter().map(|p| p.0).collect(),
                hi: b.iter().map(|p| p.1).collect(),
                histogram: d.histogram[c],
                analytic: d.analytic[c],
                flagged: d.flagged[c],
            })
        })
        .collect();
    ctx.write("density", RecordKind::Density, rows)?;
    Ok(())
}

/// Bounding box of `sum_i a_i phi(x_i)` over `[0, 1]^k`, from a fine scan of
/// each coordinate of the curve.
fn image_box(maps: &[DiagonalMap], curve: &CurveSpec) -> (Vec<f64>, Vec<f64>) {
    let k = curve.dim();
    let mut cmin = vec![f64::INFINITY; k];
    let mut cmax = vec![f64::NEG_INFINITY; k];
    for s in 0..=4096 {
        let p = curve.eval(s as f64 / 4096.0);
        for j in 0..k {
            cmin[j] = cmin[j].min(p[j]);
            cmax[j] = cmax[j].max(p[j]);
        }
    }
    let mut lo = vec![0.0; k];
    let mut hi = vec![0.0; k];
    for m in maps {
        let c = m.coeffs();
        for j in 0..k {
            lo[j] += c[j] * cmin[j];
            hi[j] += c[j] * cmax[j];
        }
    }
    for j in 0..k {
        if hi[j] <= lo[j] {
            hi[j] = lo[j] + 1.0;
        }
    }
    (lo, hi)
}
