//! Command-line front end for the `dafir` distributed-arithmetic FIR model.
//!
//! Exit codes: 0 on success, 1 when a verification or architecture comparison
//! finds disagreeing outputs, 2 for usage and parse errors.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::Serialize;

use dafir::adder_models::{AdderKind, CostModel};
use dafir::da_engine::{memory_locations, DaEngine, DaFilter, DelayLine, PpgMode};
use dafir::numerics::{DirectFir, FixedFormat, Sample};
use dafir::resource_report::{
    compare_architectures, estimate_resources, ArchConfig, ExternalMetrics,
};
use dafir::FilterDesign;

pub mod input;

/// Largest input space `verify --exhaustive` will enumerate, in bits.
pub const EXHAUSTIVE_LIMIT_BITS: u32 = 20;

/// Length of the probe stream `report --compare` filters when no samples are given.
const PROBE_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Mismatch(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Mismatch(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "dafir",
    version,
    about = "Distributed-arithmetic FIR filter model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize coefficients, partition taps and write a design file.
    Design(DesignArgs),
    /// Filter a sample file through a design's DA datapath.
    Run(RunArgs),
    /// Check a design's DA datapath against the direct-form reference.
    Verify(VerifyArgs),
    /// Print resource estimates, optionally comparing two designs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Coefficient file, one value per line.
    pub coefficients: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub coeff_width: u32,
    #[arg(long, default_value_t = 16)]
    pub input_width: u32,
    #[arg(long, default_value_t = 2)]
    pub group_size: usize,
    #[arg(long, default_value = "stored")]
    pub ppg: PpgMode,
    #[arg(long, default_value = "cla")]
    pub tree: AdderKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-cycle trace, one JSON object per line.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub design: PathBuf,
    /// Enumerate every input window.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub exhaustive: bool,
    /// Check this many random input windows.
    #[arg(long)]
    pub random: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub cells: Option<u64>,
    #[arg(long)]
    pub time_ns: Option<Decimal>,
    #[arg(long)]
    pub power_mw: Option<Decimal>,
    /// Second design, reported side by side with deltas relative to the first.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long, requires = "compare")]
    pub compare_cells: Option<u64>,
    #[arg(long, requires = "compare")]
    pub compare_time_ns: Option<Decimal>,
    #[arg(long, requires = "compare")]
    pub compare_power_mw: Option<Decimal>,
    /// Samples both designs must agree on; a fixed probe stream otherwise.
    #[arg(long, requires = "compare")]
    pub samples: Option<PathBuf>,
    /// JSON overrides for the unit-gate cost constants.
    #[arg(long)]
    pub cost_model: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

pub fn load_design(path: &Path) -> Result<FilterDesign, Failure> {
    FilterDesign::from_json(&read(path)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Design(args) => cmd_design(&args, out, err),
        Command::Run(args) => cmd_run(&args),
        Command::Verify(args) => cmd_verify(&args, out),
        Command::Report(args) => cmd_report(&args, out),
    }
}

pub fn cmd_design(
    args: &DesignArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let format = FixedFormat::new(args.coeff_width).map_err(usage)?;
    let source = args.coefficients.display().to_string();
    let parsed = input::parse_coefficients(&read(&args.coefficients)?, &source, format)?;
    for w in &parsed.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let config = ArchConfig {
        taps: parsed.set.len(),
        coeff_width: args.coeff_width,
        input_width: args.input_width,
        group_size: args.group_size,
        ppg: args.ppg,
        tree: args.tree,
    };
    let design = FilterDesign::build(config, parsed.set).map_err(usage)?;
    write(&args.out, design.to_json().as_bytes())?;
    let memory = match config.ppg {
        PpgMode::StoredLut => memory_locations(&design.plan),
        PpgMode::Mux => 0,
    };
    let _ = writeln!(out, "taps: {}", config.taps);
    let _ = writeln!(out, "groups: {}", design.plan.partitions());
    let _ = writeln!(out, "memory locations: {memory}");
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    sample_index: usize,
    cycle: u32,
    addresses: &'a [u32],
    partials: &'a [i128],
    tree_sum: i128,
    subtract: bool,
    acc: i128,
}

pub fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let design = load_design(&args.design)?;
    let source = args.samples.display().to_string();
    let samples = input::parse_samples(&read(&args.samples)?, &source, design.input_format())?;
    let mut filter = DaFilter::new(design.engine().map_err(usage)?);
    let mut trace = match &args.trace {
        Some(path) => {
            Some(BufWriter::new(fs::File::create(path).map_err(|e| {
                Failure::Usage(format!("{}: {e}", path.display()))
            })?))
        }
        None => None,
    };
    let mut output = String::new();
    for (index, &sample) in samples.iter().enumerate() {
        let failed = |e| Failure::Usage(format!("{source}: sample {}: {e}", index + 1));
        let y = match trace.as_mut() {
            Some(sink) => {
                let (y, cycles) = filter.push_traced(sample).map_err(failed)?;
                for r in &cycles.records {
                    let line = TraceLine {
                        sample_index: index,
                        cycle: r.cycle,
                        addresses: &r.addresses,
                        partials: &r.partials,
                        tree_sum: r.tree_sum,
                        subtract: r.subtract,
                        acc: r.acc,
                    };
                    serde_json::to_writer(&mut *sink, &line).map_err(usage)?;
                    sink.write_all(b"\n").map_err(usage)?;
                }
                y
            }
            None => filter.push(sample).map_err(failed)?,
        };
        output.push_str(&y.to_string());
        output.push('\n');
    }
    if let Some(mut sink) = trace {
        sink.flush().map_err(usage)?;
    }
    write(&args.out, output.as_bytes())
}

/// Sign-extends the low `width` bits of `raw`.
fn sign_extend(raw: u64, width: u32) -> i64 {
    let shift = 64 - width;
    ((raw << shift) as i64) >> shift
}

/// Outcome of checking one window (newest sample first) against the reference.
fn check_window(engine: &DaEngine, window: &[i64]) -> Result<(), String> {
    let input = engine.input_format();
    let mut reference =
        DirectFir::new(engine.coefficients().clone(), input).map_err(|e| e.to_string())?;
    let mut expected = 0;
    for &x in window.iter().rev() {
        let s = Sample::new(x, input).map_err(|e| e.to_string())?;
        expected = reference.push(s).map_err(|e| e.to_string())?;
    }
    let line = DelayLine::from_window(window.to_vec(), input).map_err(|e| e.to_string())?;
    match engine.inner_product(&line) {
        Ok(got) if got == expected => Ok(()),
        Ok(got) => Err(format!(
            "window {window:?} (newest first): da={got} direct={expected}"
        )),
        Err(e) => Err(format!(
            "window {window:?} (newest first): da failed: {e}; direct={expected}"
        )),
    }
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let design = load_design(&args.design)?;
    let engine = design.engine().map_err(usage)?;
    let taps = design.config.taps;
    let width = design.config.input_width;
    let windows: Box<dyn Fn(u64) -> Vec<i64> + Sync> = if args.exhaustive {
        let bits = taps as u64 * width as u64;
        if bits > EXHAUSTIVE_LIMIT_BITS as u64 {
            return Err(Failure::Usage(format!(
                "exhaustive mode needs K*L <= {EXHAUSTIVE_LIMIT_BITS}, design has {taps}*{width} = {bits}"
            )));
        }
        let mask = (1u64 << width) - 1;
        Box::new(move |i| {
            (0..taps)
                .map(|k| sign_extend((i >> (k as u32 * width)) & mask, width))
                .collect()
        })
    } else {
        let count = args.random.unwrap_or(0);
        let format = design.input_format();
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let drawn: Vec<Vec<i64>> = (0..count)
            .map(|_| {
                (0..taps)
                    .map(|_| rng.random_range(format.min_value()..=format.max_value()))
                    .collect()
            })
            .collect();
        Box::new(move |i| drawn[i as usize].clone())
    };
    let total = if args.exhaustive {
        1u64 << (taps as u32 * width)
    } else {
        args.random.unwrap_or(0)
    };
    let first = (0..total)
        .into_par_iter()
        .map(|i| check_window(&engine, &windows(i)))
        .find_first(|r| r.is_err());
    match first {
        None => {
            let _ = writeln!(out, "{total}/{total} ok");
            Ok(())
        }
        Some(Err(counterexample)) => {
            let failures = (0..total)
                .into_par_iter()
                .filter(|&i| check_window(&engine, &windows(i)).is_err())
                .count() as u64;
            let _ = writeln!(out, "first counterexample: {counterexample}");
            let _ = writeln!(out, "{}/{total} ok", total - failures);
            Err(Failure::Mismatch(format!(
                "{failures} of {total} windows disagree with the direct-form reference"
            )))
        }
        Some(Ok(())) => unreachable!(),
    }
}

fn external(
    cells: Option<u64>,
    time: Option<Decimal>,
    power: Option<Decimal>,
    side: &str,
) -> Result<Option<ExternalMetrics>, Failure> {
    match (cells, time) {
        (None, None) if power.is_none() => Ok(None),
        (Some(c), Some(t)) => ExternalMetrics::new(c, t, power).map(Some).map_err(usage),
        _ => Err(Failure::Usage(format!(
            "{side}: external figures need both cells and time-ns"
        ))),
    }
}

/// Deterministic stream for comparisons: both extremes held for K samples,
/// then uniform noise.
fn probe_stream(format: FixedFormat, taps: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (lo, hi) = (format.min_value(), format.max_value());
    std::iter::repeat_n(lo, taps)
        .chain(std::iter::repeat_n(hi, taps))
        .chain((0..PROBE_SAMPLES).map(|_| rng.random_range(lo..=hi)))
        .map(|v| Sample::new(v, format).expect("drawn in range"))
        .collect()
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let model = match &args.cost_model {
        Some(path) => serde_json::from_str::<CostModel>(&read(path)?)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => CostModel::default(),
    };
    let design = load_design(&args.design)?;
    let ext_a = external(args.cells, args.time_ns, args.power_mw, "baseline")?;
    let json = match &args.compare {
        None => {
            let report = estimate_resources(&design.config, &model)
                .map_err(usage)?
                .with_external(ext_a);
            serde_json::to_string_pretty(&report)
        }
        Some(other) => {
            let candidate = load_design(other)?;
            let ext_b = external(
                args.compare_cells,
                args.compare_time_ns,
                args.compare_power_mw,
                "candidate",
            )?;
            let samples = match &args.samples {
                Some(path) => input::parse_samples(
                    &read(path)?,
                    &path.display().to_string(),
                    design.input_format(),
                )?,
                None => probe_stream(design.input_format(), design.config.taps),
            };
            let cmp =
                compare_architectures(&design, &candidate, Some(&samples), &model, (ext_a, ext_b))
                    .map_err(|e| match e {
                        dafir::Error::OutputMismatch { .. } => Failure::Mismatch(e.to_string()),
                        other => usage(other),
                    })?;
            serde_json::to_string_pretty(&cmp)
        }
    }
    .map_err(usage)?;
    let _ = writeln!(out, "{json}");
    Ok(())
}
