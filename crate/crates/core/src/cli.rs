//! Command-line front end.
//!
//! Precedence: flags override the `--config` file, which overrides the
//! built-in defaults. Exit codes: 0 success, 1 computation or I/O failure,
//! 2 usage error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::calibrate::{fit_constants_with, parse_references};
use crate::config::{parse_config, parse_constants, write_constants, RunConfig};
use crate::generator::{generate_seeded, puff_up, Method, PuffOptions};
use crate::geometry::Axis;
use crate::graph::{build_contact_graph, CircuitGraph, Terminals, GRAPH_HEADER};
use crate::io::write_atomic;
use crate::montecarlo::{
    run_campaign, rve_convergence_scan, write_csv, write_records_csv, write_rve_csv, SweepVariable,
};
use crate::sample::{Sample, SAMPLE_HEADER};
use crate::solver::{conductivity_tensor_with, solve_system, SolveMethod, TENSOR_COMPONENTS};
use crate::voxel::{
    load_slice_stack, load_voxel_raw, parse_pgm, voxel_effective_conductivity, voxelize_sample,
    Connectivity, VoxelGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "graphcond",
    version,
    about = "Effective conductivity of particulate composites from contact graphs",
    args_override_self = true,
    arg_required_else_help = true
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Also write the effective config to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub save_config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one sample and write it in sample text format.
    Generate(GenerateArgs),
    /// Effective conductance of a graph file, or of a sample along one axis.
    Homogenize(HomogenizeArgs),
    /// Full conductivity tensor of a sample.
    Tensor(TensorArgs),
    /// Monte Carlo sweep written as CSV.
    Campaign(CampaignArgs),
    /// Axis conductivities of a voxel volume.
    Voxel(VoxelArgs),
    /// Fit calibration constants from reference conductances.
    Calibrate(CalibrateArgs),
    /// Sample-size convergence table written as CSV.
    RveScan(RveScanArgs),
}

#[derive(Debug, Args, Default)]
pub struct GenerationFlags {
    #[arg(long)]
    pub volume_fraction: Option<f64>,
    #[arg(long)]
    pub cylinder_share: Option<f64>,
    #[arg(long)]
    pub n_spheres: Option<usize>,
    #[arg(long)]
    pub n_cylinders: Option<usize>,
    /// Cylinder length over radius.
    #[arg(long)]
    pub aspect: Option<f64>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub puff_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    /// Calibration constants file (TOML).
    #[arg(long, value_name = "FILE")]
    pub constants: Option<PathBuf>,
    #[arg(long, value_parser = parse_solve_method)]
    pub solver: Option<SolveMethod>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Skip the puff-up step.
    #[arg(long)]
    pub no_puff: bool,
    #[command(flatten)]
    pub generation: GenerationFlags,
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false, args = ["sample", "graph"])]
pub struct HomogenizeArgs {
    #[arg(long, value_name = "FILE")]
    pub sample: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub graph: Option<PathBuf>,
    /// Electrode axis for a sample.
    #[arg(long, default_value = "x", value_parser = parse_axis)]
    pub axis: Axis,
    /// Also write potentials and currents.
    #[arg(long, value_name = "FILE")]
    pub solution_out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct TensorArgs {
    #[arg(long, value_name = "FILE")]
    pub sample: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Per-sample CSV dump.
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[arg(long, value_parser = parse_sweep_variable)]
    pub sweep_variable: Option<SweepVariable>,
    /// Comma-separated sweep values; an empty string runs a single point.
    #[arg(long, value_parser = parse_f64_list)]
    pub sweep_values: Option<F64List>,
    #[command(flatten)]
    pub generation: GenerationFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
#[group(id = "input", required = true, multiple = false, args = ["raw", "pgm", "sample"])]
pub struct VoxelArgs {
    /// Raw 8-bit volume, x fastest.
    #[arg(long, value_name = "FILE")]
    pub raw: Option<PathBuf>,
    /// PGM slices in z order.
    #[arg(long, value_name = "FILE", num_args = 1..)]
    pub pgm: Option<Vec<PathBuf>>,
    /// Sample to voxelize.
    #[arg(long, value_name = "FILE")]
    pub sample: Option<PathBuf>,
    /// Raw volume dimensions as nx,ny,nz.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    #[arg(long)]
    pub threshold: Option<u16>,
    #[arg(long, value_parser = parse_connectivity)]
    pub connectivity: Option<Connectivity>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Lines of `kind depth conductance`.
    #[arg(long, value_name = "FILE")]
    pub references: PathBuf,
    /// Fitted constants (TOML).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Starting constants; kinds absent from the references keep these.
    #[arg(long, value_name = "FILE")]
    pub constants: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RveScanArgs {
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Comma-separated inclusion count multipliers, each >= 1.
    #[arg(long, value_parser = parse_f64_list)]
    pub multipliers: Option<F64List>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    #[command(flatten)]
    pub generation: GenerationFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct F64List(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dims(pub [usize; 3]);

fn parse_f64_list(s: &str) -> Result<F64List, String> {
    if s.trim().is_empty() {
        return Ok(F64List(Vec::new()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()
        .map(F64List)
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok(Dims([x, y, z])),
        _ => Err(format!("expected nx,ny,nz, got {} values", v.len())),
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_solve_method(s: &str) -> Result<SolveMethod, String> {
    s.parse()
}

fn parse_sweep_variable(s: &str) -> Result<SweepVariable, String> {
    s.parse()
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    s.parse()
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Cli::try_parse_from(argv)
}

/// Long flags given more than once, in first-seen order.
pub fn duplicate_flags(argv: &[OsString]) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut order = Vec::new();
    for a in argv.iter().skip(1) {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if let Some(name) = a.strip_prefix("--") {
            let name = name.split('=').next().unwrap_or(name).to_string();
            let c = counts.entry(name.clone()).or_insert(0);
            *c += 1;
            if *c == 2 {
                order.push(name);
            }
        }
    }
    order
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse_args(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    for name in duplicate_flags(&argv) {
        log::warn!("--{name} given more than once; the last occurrence wins");
    }
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path)
        .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes)
        .map_err(|_| CliError::Failure(format!("{} is not UTF-8 text", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputKind {
    Graph,
    Sample,
    Other,
}

fn sniff(bytes: &[u8]) -> InputKind {
    let head = &bytes[..bytes.len().min(256)];
    let text = String::from_utf8_lossy(head);
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("");
    match first.split_whitespace().next() {
        Some(GRAPH_HEADER) => InputKind::Graph,
        Some(SAMPLE_HEADER) => InputKind::Sample,
        _ => InputKind::Other,
    }
}

fn expect_kind(path: &Path, bytes: &[u8], want: InputKind, command: &str) -> Result<(), CliError> {
    let got = sniff(bytes);
    let wrong = match want {
        InputKind::Other => got != InputKind::Other,
        _ => got != want && got != InputKind::Other,
    };
    if wrong {
        let what = match got {
            InputKind::Graph => "a graph file",
            InputKind::Sample => "a sample file",
            InputKind::Other => "not in the expected format",
        };
        return Err(CliError::Usage(format!(
            "{} is {what}, which `{command}` does not accept",
            path.display()
        )));
    }
    Ok(())
}

fn load_sample(path: &Path, command: &str) -> Result<Sample, CliError> {
    let bytes = read_bytes(path)?;
    expect_kind(path, &bytes, InputKind::Sample, command)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Failure(format!("{} is not UTF-8 text", path.display())))?;
    Sample::parse(&text).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<CircuitGraph, CliError> {
    let bytes = read_bytes(path)?;
    expect_kind(path, &bytes, InputKind::Graph, "homogenize --graph")?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Failure(format!("{} is not UTF-8 text", path.display())))?;
    CircuitGraph::parse(&text).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn apply_generation(cfg: &mut RunConfig, f: &GenerationFlags) {
    let g = &mut cfg.generation;
    if let Some(v) = f.volume_fraction {
        g.volume_fraction = v;
    }
    if let Some(v) = f.cylinder_share {
        g.cylinder_share = v;
    }
    if let Some(v) = f.n_spheres {
        g.n_spheres = v;
    }
    if let Some(v) = f.n_cylinders {
        g.n_cylinders = v;
    }
    if let Some(v) = f.aspect {
        g.cylinder_aspect = v;
    }
    if let Some(v) = f.method {
        g.method = v;
    }
    if let Some(v) = f.puff_factor {
        g.puff_factor = v;
    }
}

fn apply_solver(cfg: &mut RunConfig, f: &SolverFlags) -> Result<(), CliError> {
    if let Some(path) = &f.constants {
        let text = read_text(path)?;
        cfg.calibration = parse_constants(&text)
            .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
    }
    if let Some(m) = f.solver {
        cfg.solver.method = m;
    }
    Ok(())
}

/// Loads the config file and applies every flag of `cli`.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = read_text(path)?;
            parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Generate(a) => {
            apply_generation(&mut cfg, &a.generation);
            if let Some(s) = a.seed {
                cfg.generation.seed = s;
            }
        }
        Command::Homogenize(a) => apply_solver(&mut cfg, &a.solver)?,
        Command::Tensor(a) => apply_solver(&mut cfg, &a.solver)?,
        Command::Campaign(a) => {
            apply_generation(&mut cfg, &a.generation);
            apply_solver(&mut cfg, &a.solver)?;
            if let Some(n) = a.samples {
                cfg.campaign.n_samples = n;
            }
            if let Some(s) = a.master_seed {
                cfg.campaign.master_seed = s;
            }
            if let Some(v) = a.sweep_variable {
                cfg.campaign.sweep_variable = v;
            }
            if let Some(v) = &a.sweep_values {
                cfg.campaign.sweep_values = v.0.clone();
            }
        }
        Command::Voxel(a) => {
            apply_solver(&mut cfg, &a.solver)?;
            let v = &mut cfg.voxel;
            if let Some(d) = a.dims {
                v.dims = Some(d.0);
            }
            if let Some(t) = a.threshold {
                v.threshold = t;
            }
            if let Some(c) = a.connectivity {
                v.connectivity = c;
            }
            if let Some(r) = a.resolution {
                v.resolution = r;
            }
            if let Some(s) = a.spacing {
                v.spacing = s;
            }
        }
        Command::Calibrate(a) => {
            if let Some(path) = &a.constants {
                let text = read_text(path)?;
                cfg.calibration = parse_constants(&text)
                    .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
            }
        }
        Command::RveScan(a) => {
            apply_generation(&mut cfg, &a.generation);
            apply_solver(&mut cfg, &a.solver)?;
            if let Some(m) = &a.multipliers {
                cfg.campaign.rve_multipliers = m.0.clone();
            }
            if let Some(n) = a.samples {
                cfg.campaign.n_samples = n;
            }
            if let Some(s) = a.master_seed {
                cfg.campaign.master_seed = s;
            }
        }
    }
    if let Some(w) = cli.workers {
        cfg.campaign.workers = w;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    cfg.resolved().map_err(|e| CliError::Usage(e.to_string()))
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = effective_config(cli)?;
    match cfg.to_toml() {
        Ok(text) => {
            log::info!("effective config:\n{text}");
            if let Some(path) = &cli.save_config {
                write_output(path, text.as_bytes())?;
            }
        }
        Err(e) => {
            log::warn!("effective config cannot be echoed: {e}");
            if cli.save_config.is_some() {
                return Err(CliError::Usage(format!(
                    "effective config cannot be saved: {e}"
                )));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.campaign.workers)
        .build()
        .map_err(failure)?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => cmd_generate(a, cfg),
        Command::Homogenize(a) => cmd_homogenize(a, cfg),
        Command::Tensor(a) => cmd_tensor(a, cfg),
        Command::Campaign(a) => cmd_campaign(a, cfg),
        Command::Voxel(a) => cmd_voxel(a, cfg),
        Command::Calibrate(a) => cmd_calibrate(a, cfg),
        Command::RveScan(a) => cmd_rve_scan(a, cfg),
    }
}

fn cmd_generate(a: &GenerateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg
        .generation
        .to_spec()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let packed = generate_seeded(&spec).map_err(failure)?;
    let sample = if a.no_puff {
        packed
    } else {
        puff_up(&packed, &PuffOptions::from_spec(&spec))
    };
    log::info!(
        "{} inclusions, solid fraction {:.6}",
        sample.len(),
        sample.achieved_fraction
    );
    write_output(&a.out, sample.to_text().as_bytes())
}

fn cmd_homogenize(a: &HomogenizeArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let opts = cfg
        .solver
        .to_options()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let g = match (&a.graph, &a.sample) {
        (Some(path), _) => load_graph(path)?,
        (None, Some(path)) => {
            let sample = load_sample(path, "homogenize --sample")?;
            build_contact_graph(&sample, &Terminals::Opposite(a.axis), &cfg.calibration)
                .map_err(failure)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --graph or --sample is required".into(),
            ))
        }
    };
    let sol = solve_system(&g, &opts.solver).map_err(failure)?;
    println!(
        "conductance {:.12e}",
        sol.total_current / opts.solver.full_conductor_reference
    );
    if let Some(path) = &a.solution_out {
        write_output(path, sol.to_text(&g).as_bytes())?;
    }
    Ok(())
}

fn cmd_tensor(a: &TensorArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let opts = cfg
        .solver
        .to_options()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let sample = load_sample(&a.sample, "tensor")?;
    let t = conductivity_tensor_with(&sample, &cfg.calibration, &opts).map_err(failure)?;
    let mut text = String::new();
    for (name, v) in TENSOR_COMPONENTS.iter().zip(t.components()) {
        text.push_str(&format!("{name} {v:.12e}\n"));
    }
    print!("{text}");
    if let Some(path) = &a.out {
        write_output(path, text.as_bytes())?;
    }
    Ok(())
}

fn cmd_campaign(a: &CampaignArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let cc = cfg
        .campaign_config()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let result = run_campaign(&cc).map_err(failure)?;
    for p in &result.points {
        log::info!(
            "point {:.6}: mean diagonal {:.6e}, percolation {:.3}, n {}",
            p.sweep_value,
            p.mean_diagonal(),
            p.percolation_rate,
            p.n
        );
        if p.flagged() {
            log::warn!(
                "point {:.6}: fewer than half of the generations succeeded",
                p.sweep_value
            );
        }
    }
    let mut buf = Vec::new();
    write_csv(&result, &mut buf).map_err(failure)?;
    let records = match &a.records {
        Some(path) => {
            let mut rb = Vec::new();
            write_records_csv(&result, &mut rb).map_err(failure)?;
            Some((path, rb))
        }
        None => None,
    };
    write_output(&a.out, &buf)?;
    if let Some((path, rb)) = records {
        write_output(path, &rb)?;
    }
    Ok(())
}

fn cmd_voxel(a: &VoxelArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let v = &cfg.voxel;
    let mut grid: VoxelGrid = if let Some(path) = &a.raw {
        let bytes = read_bytes(path)?;
        expect_kind(path, &bytes, InputKind::Other, "voxel")?;
        let dims = v
            .dims
            .ok_or_else(|| CliError::Usage("--raw needs --dims or voxel.dims".into()))?;
        let threshold = u8::try_from(v.threshold).map_err(|_| {
            CliError::Usage(format!(
                "threshold {} exceeds 255 for 8-bit raw data",
                v.threshold
            ))
        })?;
        let mut g = load_voxel_raw(&bytes, dims, threshold).map_err(failure)?;
        if v.spacing != 1.0 {
            g = rescale(&g, v.spacing)?;
        }
        g
    } else if let Some(paths) = &a.pgm {
        let mut slices = Vec::with_capacity(paths.len());
        for path in paths {
            let bytes = read_bytes(path)?;
            expect_kind(path, &bytes, InputKind::Other, "voxel")?;
            slices.push(
                parse_pgm(&bytes)
                    .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?,
            );
        }
        let mut g = load_slice_stack(&slices, v.threshold).map_err(failure)?;
        if v.spacing != 1.0 {
            g = rescale(&g, v.spacing)?;
        }
        g
    } else if let Some(path) = &a.sample {
        let sample = load_sample(path, "voxel --sample")?;
        voxelize_sample(&sample, v.resolution).map_err(failure)?
    } else {
        return Err(CliError::Usage(
            "one of --raw, --pgm or --sample is required".into(),
        ));
    };
    if let Some(p) = v.periodic_transverse {
        grid.periodic_transverse = p;
    }
    log::info!(
        "grid {:?}, solid fraction {:.6}",
        grid.dims(),
        grid.occupied_fraction()
    );
    let opts = cfg
        .solver
        .to_options()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let sigma = voxel_effective_conductivity(&grid, &cfg.calibration, v.connectivity, &opts.solver)
        .map_err(failure)?;
    for (axis, s) in Axis::ALL.iter().zip(sigma) {
        println!("{} {s:.12e}", axis.name());
    }
    Ok(())
}

fn rescale(g: &VoxelGrid, spacing: f64) -> Result<VoxelGrid, CliError> {
    let mut out =
        VoxelGrid::from_fn(g.dims(), spacing, |x, y, z| g.get(x, y, z)).map_err(failure)?;
    out.periodic_transverse = g.periodic_transverse;
    Ok(out)
}

fn cmd_calibrate(a: &CalibrateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let text = read_text(&a.references)?;
    let points = parse_references(&text)
        .map_err(|e| CliError::Failure(format!("{}: {e}", a.references.display())))?;
    let report = fit_constants_with(&points, &cfg.calibration, &[]).map_err(failure)?;
    for fit in &report.fits {
        println!(
            "{} k {:.12e} rms {:.3e}",
            fit.kind,
            fit.k,
            fit.rms_residual()
        );
    }
    write_output(&a.out, write_constants(&report.constants).as_bytes())
}

fn cmd_rve_scan(a: &RveScanArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let mut cc = cfg
        .campaign_config()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    cc.sweep = None;
    let rows = rve_convergence_scan(&cc, &cfg.campaign.rve_multipliers).map_err(failure)?;
    let mut buf = Vec::new();
    write_rve_csv(&rows, &mut buf).map_err(failure)?;
    write_output(&a.out, &buf)
}
