//! The `chebyqst` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 a
//! threshold run that never reached its threshold (output is still written).
//!
//! Results are JSON with an embedded manifest; grids and spectra are CSV.
//! Two runs with the same arguments produce identical JSON apart from
//! `manifest.duration_seconds`, whatever the thread count.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chebyshev::{max_total_degree, oracle_coefficients, reconstruct};
use crate::error::Error;
use crate::fields::{
    downsample_with, energy_spectrum, load_grid, synth_field, vorticity, write_grid, Builtin, DownsampleFilter,
    FlowField2D, Format, Grid, GridData, GridFunction,
};
use crate::tomography::{fidelity, run_qst_cp, Mode, StopRule, TomographyConfig, DEFAULT_SHOTS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_UNCONVERGED: i32 = 3;

/// Fallback for `--threads`.
pub const THREADS_ENV: &str = "CHEBYQST_THREADS";

const TOOL: &str = "chebyqst";

#[derive(Debug, Parser)]
#[command(
    name = "chebyqst",
    version,
    about = "Chebyshev-basis quantum state tomography simulator"
)]
struct Cli {
    /// Worker threads (default: CHEBYQST_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate Chebyshev coefficients with simulated Hadamard tests.
    Run(RunArgs),
    /// Exact classical expansion of the same input.
    Oracle(OracleArgs),
    /// Shell-binned kinetic energy spectrum of a 2D velocity field.
    Spectrum(SpectrumArgs),
    /// Seeded divergence-free random field with a power-law spectrum.
    Synth(SynthArgs),
    /// Vorticity of a 2D velocity field.
    Vorticity(VorticityArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GridArg {
    Endpoints,
    Midpoints,
    LeftOpen,
}

impl From<GridArg> for Grid {
    fn from(g: GridArg) -> Self {
        match g {
            GridArg::Endpoints => Grid::Endpoints,
            GridArg::Midpoints => Grid::Midpoints,
            GridArg::LeftOpen => Grid::LeftOpen,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Ideal,
    Faithful,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Ideal => Mode::Ideal,
            ModeArg::Faithful => Mode::Faithful,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterArg {
    Stride,
    BlockMean,
}

impl From<FilterArg> for DownsampleFilter {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Stride => DownsampleFilter::Stride,
            FilterArg::BlockMean => DownsampleFilter::BlockMean,
        }
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// `builtin:NAME`, `file:PATH`, or a bare path (`.csv` or raw binary).
    #[arg(long)]
    input: String,
    /// Qubits per dimension, e.g. `6` or `6,6`. Inferred for files if omitted.
    #[arg(long, value_delimiter = ',')]
    qubits: Vec<usize>,
    /// Sampling grid for builtins (default depends on the function).
    #[arg(long, value_enum)]
    grid: Option<GridArg>,
    /// Downsample a 2D file input by this factor before encoding.
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long, value_enum, default_value = "stride")]
    filter: FilterArg,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "ideal")]
    mode: ModeArg,
    /// Stop at the first shell whose partial sum reaches this value.
    #[arg(long, conflicts_with = "order", required_unless_present = "order")]
    threshold: Option<f64>,
    /// Estimate every shell up to this total degree.
    #[arg(long)]
    order: Option<usize>,
    /// Upper bound on the total degree for threshold runs.
    #[arg(long)]
    max_order: Option<usize>,
    /// Shots per Hadamard test.
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON result path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reconstruction grid in physical units (`.csv` or raw).
    #[arg(long)]
    recon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    order: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    recon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    /// Velocity field file, or a 2D complex grid read as `u_x + i u_y`.
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long, value_enum, default_value = "stride")]
    filter: FilterArg,
    /// CSV path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    nx: usize,
    #[arg(long, default_value_t = 64)]
    ny: usize,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    slope: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; raw binary unless it ends in `.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VorticityArgs {
    #[arg(long)]
    field: PathBuf,
    /// CSV path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::UnknownBuiltin(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        _ => Ok(None),
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    let threads = thread_count(cli.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Vorticity(a) => cmd_vorticity(a),
    })
}

/// Where the target came from; echoed in the manifest.
#[derive(Debug, Serialize)]
struct InputInfo {
    source: String,
    dims: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    downsample: Option<usize>,
    /// Norm of the raw samples before normalization.
    norm: f64,
    /// SHA-256 over the normalized amplitudes as little-endian `(re, im)` f64 pairs.
    checksum: String,
}

struct LoadedInput {
    target: GridFunction,
    qubits: Vec<usize>,
    info: InputInfo,
    /// Kept for decoding velocity reconstructions.
    velocity: Option<FlowField2D>,
}

fn amplitude_checksum(values: &[Complex64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.re.to_le_bytes());
        h.update(v.im.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn log2_dims(dims: &[usize]) -> std::result::Result<Vec<usize>, Failure> {
    dims.iter()
        .map(|&p| {
            if p.is_power_of_two() && p >= 2 {
                Ok(p.trailing_zeros() as usize)
            } else {
                Err(Failure {
                    code: EXIT_DATA,
                    message: format!("grid size {p} is not a power of two of at least 2"),
                })
            }
        })
        .collect()
}

fn load_input(args: &InputArgs) -> std::result::Result<LoadedInput, Failure> {
    if let Some(name) = args.input.strip_prefix("builtin:") {
        let builtin: Builtin = name.parse()?;
        if args.qubits.len() != 1 {
            return Err(Failure::usage("builtin inputs are 1D and need --qubits N"));
        }
        if args.downsample.is_some() {
            return Err(Failure::usage("--downsample applies to 2D file inputs only"));
        }
        let grid = args.grid.map(Grid::from).unwrap_or(builtin.default_grid());
        let target = crate::fields::sample_builtin(builtin, args.qubits[0], grid)?;
        let info = InputInfo {
            source: args.input.clone(),
            dims: target.dims.clone(),
            grid: Some(grid),
            downsample: None,
            norm: target.norm,
            checksum: amplitude_checksum(&target.values),
        };
        return Ok(LoadedInput {
            target,
            qubits: args.qubits.clone(),
            info,
            velocity: None,
        });
    }
    if args.grid.is_some() {
        return Err(Failure::usage("--grid applies to builtin inputs only"));
    }
    let path = Path::new(args.input.strip_prefix("file:").unwrap_or(&args.input));
    let mut data = load_grid(path, Format::from_path(path))?;
    if let Some(factor) = args.downsample {
        let flow = data.to_flow()?;
        data = GridData::Velocity(downsample_with(&flow, factor, args.filter.into())?);
    }
    let velocity = match &data {
        GridData::Velocity(f) => Some(f.clone()),
        _ => None,
    };
    let target = data.to_grid_function()?;
    let inferred = log2_dims(&target.dims)?;
    let qubits = if args.qubits.is_empty() {
        inferred
    } else if args.qubits == inferred {
        args.qubits.clone()
    } else {
        return Err(Failure {
            code: EXIT_DATA,
            message: format!("--qubits {:?} does not match grid dims {:?}", args.qubits, target.dims),
        });
    };
    let info = InputInfo {
        source: args.input.clone(),
        dims: target.dims.clone(),
        grid: None,
        downsample: args.downsample,
        norm: target.norm,
        checksum: amplitude_checksum(&target.values),
    };
    Ok(LoadedInput {
        target,
        qubits,
        info,
        velocity,
    })
}

/// Writes a reconstruction in physical units: rescaled to unit norm, then
/// multiplied by the input's raw norm. Velocity inputs are written back as
/// velocity pairs.
fn write_reconstruction(path: &Path, input: &LoadedInput, recon: &[Complex64]) -> std::result::Result<(), Failure> {
    let norm = recon.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let scale = if norm > 0.0 { input.target.norm / norm } else { 0.0 };
    let values: Vec<Complex64> = recon.iter().map(|v| v * scale).collect();
    let data = match &input.velocity {
        Some(f) => GridData::Velocity(FlowField2D::from_complex(f.nx, f.ny, &values, f.lx, f.ly)?),
        None => GridData::Complex {
            dims: input.target.dims.clone(),
            values,
        },
    };
    write_grid(path, Format::from_path(path), &data)?;
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(Error::from)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(Error::from)?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("result types serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct Manifest<C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: C,
    seed: u64,
    input: InputInfo,
    duration_seconds: f64,
}

#[derive(Debug, Serialize)]
struct CoefficientRecord {
    index: Vec<usize>,
    re: f64,
    im: f64,
    stderr_re: f64,
    stderr_im: f64,
    shots: u64,
    prep_success: f64,
    clamped: bool,
}

#[derive(Debug, Serialize)]
struct RunOutput {
    manifest: Manifest<TomographyConfig>,
    coefficients: Vec<CoefficientRecord>,
    partial_sums: Vec<f64>,
    stop_order: usize,
    converged: bool,
    fidelity: f64,
    counters: crate::tomography::Counters,
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let start = Instant::now();
    let input = load_input(&args.input)?;
    let stop = match (args.threshold, args.order) {
        (Some(a), None) => StopRule::Threshold(a),
        (None, Some(m)) => StopRule::Order(m),
        _ => return Err(Failure::usage("give exactly one of --threshold or --order")),
    };
    let mut config = TomographyConfig::new(input.qubits.clone(), stop, args.mode.into())
        .with_seed(args.seed)
        .with_shots(args.shots);
    if let Some(cap) = args.max_order {
        config = config.with_max_order(cap);
    }
    config.validate()?;
    let result = run_qst_cp(&input.target.values, &config)?;

    if let Some(path) = &args.recon {
        write_reconstruction(path, &input, &result.reconstruction)?;
    }
    let output = RunOutput {
        coefficients: result
            .coefficients
            .iter()
            .map(|c| CoefficientRecord {
                index: c.index.0.clone(),
                re: c.re,
                im: c.im,
                stderr_re: c.stderr_re,
                stderr_im: c.stderr_im,
                shots: c.shots_used,
                prep_success: c.prep_success,
                clamped: c.clamped,
            })
            .collect(),
        partial_sums: result.partial_sums,
        stop_order: result.stop_order,
        converged: result.converged,
        fidelity: result.fidelity,
        counters: result.counters,
        manifest: Manifest {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: "run",
            seed: config.seed,
            config,
            input: input.info,
            duration_seconds: start.elapsed().as_secs_f64(),
        },
    };
    emit(args.out.as_deref(), &to_json(&output))?;
    if output.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "warning: partial sum {:.6} never reached the threshold by order {}",
            output.partial_sums.last().copied().unwrap_or(0.0),
            output.stop_order
        );
        Ok(EXIT_UNCONVERGED)
    }
}

#[derive(Debug, Serialize)]
struct OracleConfig {
    qubits: Vec<usize>,
    order: usize,
}

#[derive(Debug, Serialize)]
struct OracleCoefficient {
    index: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize)]
struct OracleOutput {
    manifest: Manifest<OracleConfig>,
    coefficients: Vec<OracleCoefficient>,
    partial_sums: Vec<f64>,
    fidelity: f64,
    /// Truncated series in normalized units, as `[re, im]` pairs.
    reconstruction: Vec<[f64; 2]>,
}

fn cmd_oracle(args: OracleArgs) -> CmdResult {
    let start = Instant::now();
    let input = load_input(&args.input)?;
    let dims = input.target.dims.clone();
    let full = max_total_degree(&dims);
    if args.order > full {
        return Err(Failure::usage(format!(
            "order {} exceeds the full grid order {full}",
            args.order
        )));
    }
    let set = oracle_coefficients(&input.target.values, &dims, args.order)?;
    let recon = reconstruct(&set)?;
    let fid = match fidelity(&input.target.values, &recon) {
        Ok(f) => f,
        Err(Error::ZeroVector) => 0.0,
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = &args.recon {
        write_reconstruction(path, &input, &recon)?;
    }
    let output = OracleOutput {
        coefficients: set
            .entries
            .iter()
            .map(|(i, v)| OracleCoefficient {
                index: i.0.clone(),
                re: v.re,
                im: v.im,
            })
            .collect(),
        partial_sums: (0..=args.order).map(|m| set.partial_sum(m)).collect(),
        fidelity: fid,
        reconstruction: recon.iter().map(|v| [v.re, v.im]).collect(),
        manifest: Manifest {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: "oracle",
            config: OracleConfig {
                qubits: input.qubits.clone(),
                order: args.order,
            },
            seed: 0,
            input: input.info,
            duration_seconds: start.elapsed().as_secs_f64(),
        },
    };
    emit(args.out.as_deref(), &to_json(&output))?;
    Ok(EXIT_OK)
}

fn load_flow(path: &Path) -> std::result::Result<FlowField2D, Failure> {
    Ok(load_grid(path, Format::from_path(path))?.to_flow()?)
}

fn cmd_spectrum(args: SpectrumArgs) -> CmdResult {
    let mut flow = load_flow(&args.field)?;
    if let Some(factor) = args.downsample {
        flow = downsample_with(&flow, factor, args.filter.into())?;
    }
    let mut csv = String::from("k,E\n");
    for (k, e) in energy_spectrum(&flow) {
        let _ = writeln!(csv, "{k},{e}");
    }
    emit(args.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    let field = synth_field(args.nx, args.ny, args.slope, args.seed)?;
    write_grid(&args.out, Format::from_path(&args.out), &GridData::Velocity(field))?;
    Ok(EXIT_OK)
}

fn cmd_vorticity(args: VorticityArgs) -> CmdResult {
    let flow = load_flow(&args.field)?;
    let data = GridData::Real {
        dims: vec![flow.nx, flow.ny],
        values: vorticity(&flow),
    };
    emit(args.out.as_deref(), &data.to_csv_string())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> i32 {
        run(std::iter::once("chebyqst").chain(args.iter().copied()))
    }

    fn read_json(path: &Path) -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(
            code(&[
                "run",
                "--input",
                "builtin:sin_pi_x",
                "--qubits",
                "4",
                "--threshold",
                "1.5"
            ]),
            EXIT_USAGE
        );
        assert_eq!(
            code(&["run", "--input", "builtin:sin_pi_x", "--qubits", "4"]),
            EXIT_USAGE
        );
        assert_eq!(
            code(&["run", "--input", "builtin:nope", "--qubits", "4", "--order", "1"]),
            EXIT_USAGE
        );
        assert_eq!(code(&["frobnicate"]), EXIT_USAGE);
        assert_eq!(code(&["--help"]), EXIT_OK);
    }

    #[test]
    fn missing_file_is_data_error() {
        assert_eq!(
            code(&[
                "run",
                "--input",
                "file:/nonexistent/grid.csv",
                "--order",
                "1",
                "--mode",
                "exact"
            ]),
            EXIT_DATA
        );
    }

    #[test]
    fn sin_order_three_exact() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.json");
        let rc = code(&[
            "run",
            "--input",
            "builtin:sin_pi_x",
            "--qubits",
            "6",
            "--mode",
            "exact",
            "--order",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(rc, EXIT_OK);
        let v = read_json(&out);
        let f = v["fidelity"].as_f64().unwrap();
        assert!((f - 0.9774).abs() <= 0.01, "fidelity {f}");
        assert_eq!(v["coefficients"].as_array().unwrap().len(), 4);
        assert_eq!(v["manifest"]["config"]["qubits"], serde_json::json!([6]));
        assert_eq!(v["manifest"]["input"]["checksum"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn unconverged_exits_three() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.json");
        let rc = code(&[
            "run",
            "--input",
            "builtin:x2_sin10x",
            "--qubits",
            "5",
            "--mode",
            "exact",
            "--threshold",
            "0.99",
            "--max-order",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(rc, EXIT_UNCONVERGED);
        assert_eq!(read_json(&out)["converged"], serde_json::json!(false));
    }

    #[test]
    fn oracle_matches_run_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let common = ["--input", "builtin:x2_sin10x", "--qubits", "5", "--order", "6"];
        let mut run_args = vec!["run", "--mode", "exact", "--out", a.to_str().unwrap()];
        run_args.extend(common);
        let mut oracle_args = vec!["oracle", "--out", b.to_str().unwrap()];
        oracle_args.extend(common);
        assert_eq!(code(&run_args), EXIT_OK);
        assert_eq!(code(&oracle_args), EXIT_OK);
        let (ra, rb) = (read_json(&a), read_json(&b));
        let (ca, cb) = (
            ra["coefficients"].as_array().unwrap(),
            rb["coefficients"].as_array().unwrap(),
        );
        assert_eq!(ca.len(), cb.len());
        for (x, y) in ca.iter().zip(cb) {
            assert_eq!(x["index"], y["index"]);
            for part in ["re", "im"] {
                assert!((x[part].as_f64().unwrap() - y[part].as_f64().unwrap()).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn threads_env_must_parse() {
        assert_eq!(thread_count(Some(3)).unwrap(), Some(3));
    }
}
