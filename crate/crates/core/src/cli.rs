//! Command-line front end: `gridmap simulate|cluster|validate-assumption|evaluate|sweep-noise`.
//!
//! Settings resolve as flags > `--config` JSON file > `GRIDMAP_SEED` (seed
//! only) > built-in defaults. Every JSON output records seed, method and
//! tool version.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{evaluate_labels, write_json, KMeansConfig, MappingFile, Method};
use crate::feeder_sim::{simulate, FeederSpec};
use crate::geo::GeoMetric;
use crate::graph::{voltage_similarity, Scale};
use crate::guarantee;
use crate::ingest::{
    load_dataset, load_ground_truth_for, load_transformers, write_ground_truth, write_locations,
    write_transformers, write_voltages, IngestReport, MeterDataset, TransformerSet,
};
use crate::multiview::{FinalView, MultiViewConfig};
use crate::pipeline::{self, ClusterOptions};
use crate::{Error, Result, VERSION};

pub const SEED_ENV: &str = "GRIDMAP_SEED";

#[derive(Debug, Parser)]
#[command(name = "gridmap", version, about = "Smart-meter to transformer mapping from voltage time series")]
pub struct Cli {
    /// Flat JSON file with default settings; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic feeder and write its CSV files.
    Simulate(SimulateArgs),
    /// Map meters to transformers.
    Cluster(ClusterArgs),
    /// Compare ideal and real Laplacian spectra and evaluate the subspace bound.
    ValidateAssumption(ValidateArgs),
    /// Score a mapping.json against ground truth.
    Evaluate(EvaluateArgs),
    /// Success probability of the clustering across measurement-noise levels.
    SweepNoise(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the spec file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct ClusteringFlags {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub method: Option<Method>,
    /// Shorthand for `--method multiview`.
    #[arg(long)]
    pub multiview: bool,
    /// Voltage kernel scale: a positive number or `auto`.
    #[arg(long)]
    pub sigma: Option<Scale>,
    /// Location kernel scale in km: a positive number or `auto`.
    #[arg(long = "sigma-l")]
    pub sigma_l: Option<Scale>,
    #[arg(long = "geo-metric")]
    pub geo_metric: Option<GeoMetric>,
    /// Coupling multiplier of the two views.
    #[arg(long = "lambda")]
    pub lambda_reg: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "final-view")]
    pub final_view: Option<FinalView>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub voltages: PathBuf,
    #[arg(long)]
    pub locations: Option<PathBuf>,
    #[arg(long)]
    pub transformers: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the voltage similarity matrix as dense CSV.
    #[arg(long = "dump-similarity")]
    pub dump_similarity: Option<PathBuf>,
    /// Write the embedding rows with their meter ids.
    #[arg(long = "dump-embedding")]
    pub dump_embedding: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ClusteringFlags,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub voltages: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub transformers: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to the number of transformers in the ground truth.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub sigma: Option<Scale>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub mapping: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Directory for `evaluation.json`; the report is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated noise standard deviations in p.u.
    #[arg(long = "noise-grid", value_delimiter = ',')]
    pub noise_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[command(flatten)]
    pub flags: ClusteringFlags,
}

/// Contents of a `--config` file. All fields optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub k: Option<usize>,
    pub method: Option<Method>,
    pub sigma: Option<Scale>,
    pub sigma_l: Option<Scale>,
    pub geo_metric: Option<GeoMetric>,
    pub lambda_reg: Option<f64>,
    #[serde(alias = "max_iters")]
    pub max_outer_iters: Option<usize>,
    pub tol: Option<f64>,
    pub final_view: Option<FinalView>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub noise_grid: Option<Vec<f64>>,
    pub trials: Option<usize>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Seed from `GRIDMAP_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Fully resolved settings for a clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: Option<usize>,
    pub options: ClusterOptions,
    pub noise_grid: Vec<f64>,
    pub trials: usize,
}

pub const DEFAULT_NOISE_GRID: [f64; 8] = [0.0, 0.0005, 0.001, 0.002, 0.003, 0.004, 0.006, 0.008];
pub const DEFAULT_TRIALS: usize = 100;

impl RunConfig {
    pub fn resolve(flags: &ClusteringFlags, file: &ConfigFile, default_seed: u64) -> Result<Self> {
        let method = if flags.multiview {
            if flags.method.is_some_and(|m| m != Method::Multiview) {
                return Err(Error::invalid("--multiview conflicts with --method"));
            }
            Method::Multiview
        } else {
            flags.method.or(file.method).unwrap_or(Method::Spectral)
        };
        let seed = match flags.seed.or(file.seed) {
            Some(s) => s,
            None => env_seed()?.unwrap_or(default_seed),
        };
        let defaults = MultiViewConfig::default();
        let multiview = MultiViewConfig {
            lambda_reg: flags.lambda_reg.or(file.lambda_reg).unwrap_or(defaults.lambda_reg),
            max_outer_iters: flags
                .max_iters
                .or(file.max_outer_iters)
                .unwrap_or(defaults.max_outer_iters),
            tol: flags.tol.or(file.tol).unwrap_or(defaults.tol),
            final_view: flags.final_view.or(file.final_view).unwrap_or(defaults.final_view),
        };
        multiview.validate()?;
        let kmeans = KMeansConfig {
            restarts: flags
                .restarts
                .or(file.restarts)
                .unwrap_or(KMeansConfig::default().restarts),
            ..KMeansConfig::default()
        };
        if kmeans.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        let k = flags.k.or(file.k);
        Ok(Self {
            k,
            options: ClusterOptions {
                k: k.unwrap_or(0),
                method,
                sigma: flags.sigma.or(file.sigma).unwrap_or_default(),
                sigma_l: flags.sigma_l.or(file.sigma_l).unwrap_or_default(),
                geo_metric: flags.geo_metric.or(file.geo_metric).unwrap_or_default(),
                multiview,
                kmeans,
                seed,
            },
            noise_grid: file.noise_grid.clone().unwrap_or_else(|| DEFAULT_NOISE_GRID.to_vec()),
            trials: file.trials.unwrap_or(DEFAULT_TRIALS),
        })
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn report_ingest(report: &IngestReport) {
    if report.imputed_cells > 0 {
        log::info!("imputed {} missing voltage cells", report.imputed_cells);
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
}

fn load_inputs(
    voltages: &Path,
    locations: Option<&Path>,
    transformers: Option<&Path>,
) -> Result<(MeterDataset, Option<TransformerSet>)> {
    let (data, report) = load_dataset(voltages, locations)?;
    report_ingest(&report);
    let xfmrs = transformers.map(load_transformers).transpose()?;
    Ok((data, xfmrs))
}

#[derive(Debug, Serialize)]
struct SpecEcho<'a> {
    #[serde(flatten)]
    spec: &'a FeederSpec,
    version: &'static str,
}

/// Runs the simulator and writes the four ingest CSVs plus `spec_echo.json`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
    let mut spec = FeederSpec::from_json(&text)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let sim = simulate(&spec)?;
    ensure_dir(&args.out)?;
    let paths: Vec<PathBuf> = ["voltages.csv", "locations.csv", "transformers.csv", "ground_truth.csv", "spec_echo.json"]
        .iter()
        .map(|f| args.out.join(f))
        .collect();
    write_voltages(&sim.dataset, &paths[0])?;
    write_locations(&sim.dataset, &paths[1])?;
    write_transformers(&sim.transformers, &paths[2])?;
    write_ground_truth(&sim.truth, &paths[3])?;
    write_json(
        &paths[4],
        &SpecEcho {
            spec: &spec,
            version: VERSION,
        },
    )?;
    Ok(paths)
}

pub fn cmd_cluster(args: &ClusterArgs, file: &ConfigFile) -> Result<Vec<PathBuf>> {
    let cfg = RunConfig::resolve(&args.flags, file, 0)?;
    let k = cfg.k.ok_or_else(|| Error::invalid("--k is required"))?;
    let opts = ClusterOptions { k, ..cfg.options };
    let (data, xfmrs) = load_inputs(&args.voltages, args.locations.as_deref(), args.transformers.as_deref())?;
    let out = pipeline::run(&data, xfmrs.as_ref(), &opts)?;
    ensure_dir(&args.out)?;
    let mut written = Vec::new();
    let mapping_path = args.out.join("mapping.json");
    out.mapping.write_json(&mapping_path)?;
    written.push(mapping_path);
    if let Some(path) = &args.dump_similarity {
        let g = out
            .graph
            .as_ref()
            .ok_or_else(|| Error::invalid("--dump-similarity needs a graph-based method"))?;
        g.write_similarity_csv(path)?;
        written.push(path.clone());
    }
    if let Some(path) = &args.dump_embedding {
        let emb = out
            .embedding
            .as_ref()
            .ok_or_else(|| Error::invalid("--dump-embedding needs a graph-based method"))?;
        emb.write_csv(&data.meter_ids, path)?;
        written.push(path.clone());
    }
    Ok(written)
}

pub fn cmd_validate(args: &ValidateArgs, file: &ConfigFile) -> Result<Vec<PathBuf>> {
    let flags = ClusteringFlags {
        k: args.k,
        sigma: args.sigma,
        seed: args.seed,
        ..ClusteringFlags::default()
    };
    let cfg = RunConfig::resolve(&flags, file, 0)?;
    let (data, xfmrs) = load_inputs(&args.voltages, None, args.transformers.as_deref())?;
    let truth = load_ground_truth_for(
        &args.truth,
        &data.meter_ids,
        xfmrs.as_ref().map(|x| x.xfmr_ids.as_slice()),
    )?;
    let k = cfg.k.unwrap_or_else(|| truth.k());
    let g = voltage_similarity(&data, cfg.options.sigma)?;
    let report = guarantee::validate(&g, &truth, k, cfg.options.seed)?;
    if !report.assumption_holds {
        log::warn!("assumption violated: delta = {}", report.delta);
    }
    ensure_dir(&args.out)?;
    let json = args.out.join("guarantee.json");
    let eigs = args.out.join("eigs.csv");
    report.write_json(&json)?;
    report.write_eigs_csv(&eigs)?;
    Ok(vec![json, eigs])
}

#[derive(Debug, Serialize)]
pub struct EvaluationFile {
    pub exact_recovery: bool,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub seed: u64,
    pub method: Method,
    pub version: String,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationFile> {
    let mapping = MappingFile::read(&args.mapping)?;
    let meter_ids = mapping.meter_ids();
    let truth = load_ground_truth_for(&args.truth, &meter_ids, None)?;
    let pred = mapping.labels();
    if let Some(bad) = pred.iter().find(|&&c| c >= mapping.k) {
        return Err(Error::invalid(format!("cluster {bad} out of range for k = {}", mapping.k)));
    }
    let report = evaluate_labels(&pred, mapping.k, &truth.labels, truth.k())?;
    let eval = EvaluationFile {
        exact_recovery: report.exact_recovery,
        accuracy: report.accuracy,
        confusion: report.confusion,
        seed: mapping.seed,
        method: mapping.method,
        version: VERSION.to_owned(),
    };
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_json(&dir.join("evaluation.json"), &eval)?;
    }
    Ok(eval)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise_std_pu: f64,
    pub success_rate: f64,
    pub mean_accuracy: f64,
    pub trials: usize,
}

/// `trials` simulate + cluster + evaluate runs per noise level; trial t
/// uses seed `seed + t` for both simulator and clustering. Levels are sorted ascending.
pub fn sweep_noise(spec: &FeederSpec, grid: &[f64], trials: usize, opts: &ClusterOptions) -> Result<Vec<SweepRow>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if grid.is_empty() || grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("noise grid must be non-empty and non-negative"));
    }
    let mut levels = grid.to_vec();
    levels.sort_by(f64::total_cmp);
    levels
        .iter()
        .map(|&noise| {
            let results: Vec<(bool, f64)> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let seed = opts.seed.wrapping_add(t as u64);
                    let trial_spec = FeederSpec {
                        noise_std_pu: noise,
                        seed,
                        ..spec.clone()
                    };
                    let trial_opts = ClusterOptions {
                        seed,
                        ..opts.clone()
                    };
                    pipeline::simulate_and_evaluate(&trial_spec, &trial_opts).map(|r| (r.exact_recovery, r.accuracy))
                })
                .collect::<Result<_>>()?;
            let successes = results.iter().filter(|r| r.0).count();
            let accuracy: f64 = results.iter().map(|r| r.1).sum();
            Ok(SweepRow {
                noise_std_pu: noise,
                success_rate: successes as f64 / trials as f64,
                mean_accuracy: accuracy / trials as f64,
                trials,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| Error::csv(path, e.to_string());
    w.write_record(["noise_std_pu", "success_rate", "mean_accuracy", "trials"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.noise_std_pu.to_string(),
            r.success_rate.to_string(),
            r.mean_accuracy.to_string(),
            r.trials.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_sweep_noise(args: &SweepArgs, file: &ConfigFile) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
    let spec = FeederSpec::from_json(&text)?;
    let cfg = RunConfig::resolve(&args.flags, file, spec.seed)?;
    let grid = args.noise_grid.clone().unwrap_or(cfg.noise_grid);
    let trials = args.trials.unwrap_or(cfg.trials);
    let rows = sweep_noise(&spec, &grid, trials, &cfg.options)?;
    ensure_dir(&args.out)?;
    let path = args.out.join("sweep.csv");
    write_sweep_csv(&rows, &path)?;
    Ok(vec![path])
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::read(path)?,
        None => ConfigFile::default(),
    };
    let written = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Cluster(a) => cmd_cluster(a, &file)?,
        Command::ValidateAssumption(a) => cmd_validate(a, &file)?,
        Command::Evaluate(a) => {
            let eval = cmd_evaluate(a)?;
            println!("{}", serde_json::to_string_pretty(&eval)?);
            return Ok(());
        }
        Command::SweepNoise(a) => cmd_sweep_noise(a, &file)?,
    };
    for path in written {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
