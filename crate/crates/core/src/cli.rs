//! Batch command-line interface.
//!
//! Exit status: 0 on success, 1 when a stage fails at run time, 2 for
//! usage and configuration errors. Configuration, parameters, and the
//! presence of every input a stage reads are checked before any raster is
//! loaded.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::error::Error;
use crate::io::artifacts::{
    self, read_depth_field, read_extent, read_truth, scored_in_portfolio_order, write_depth, write_detection,
    write_scenario, write_triage_products, CI_HIGH_FILE, CI_LOW_FILE, DEPTH_FILE, EXTENT_FILE, SCORES_FILE,
};
use crate::io::products::{format_summary, EventSummary};
use crate::io::raster_io::{read_mask, read_raster};
use crate::io::tables::{read_parcels, read_scores, write_scores};
use crate::io::{format_g, RunConfig, Stage};
use crate::pipeline::{self, PipelineParams};
use crate::scoring::score_portfolio;
use crate::synth::{self, depth_metrics, ScenarioSpec, TerrainKind};
use crate::triage::{assign_tiers, evaluate, extent_metrics, rank, sensitivity_sweep, RankedList};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const EVAL_FILE: &str = "eval.txt";
pub const ABLATION_FILE: &str = "ablation.csv";

#[derive(Debug, Parser)]
#[command(name = "floodtriage", version, about = "SAR flood mapping, depth estimation, and claim triage")]
struct Cli {
    /// Log progress (-v) or detail (-vv) to stderr.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Run configuration (`key = value` lines).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, replacing `output_dir` from the config.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scenario with inputs, truth, and a run config.
    Synth {
        /// plane, bowl, valley, or composite.
        #[arg(long, default_value = "composite")]
        terrain: String,
        /// Seeds terrain, SAR speckle, DEM error, and the portfolio.
        #[arg(long)]
        seed: u64,
        /// Scenario directory to create.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Grid rows [default: 128].
        #[arg(long)]
        rows: Option<usize>,
        /// Grid columns [default: 128].
        #[arg(long)]
        cols: Option<usize>,
        /// Standard deviation of the DEM error handed to the pipeline (m).
        #[arg(long)]
        dem_noise_m: Option<f64>,
        /// Log-space std of multiplicative noise on truth losses.
        #[arg(long)]
        claims_noise_sigma: Option<f64>,
        /// Acquisition date written into the generated config.
        #[arg(long)]
        sar_date: Option<String>,
    },
    /// Map the flood extent.
    Detect {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Estimate water depth with Monte Carlo uncertainty.
    Depth {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Seeds the Monte Carlo DEM perturbations and boundary sampling.
        #[arg(long)]
        seed: u64,
        /// Flood extent mask; defaults to the one in the output directory.
        #[arg(long, value_name = "FILE")]
        extent: Option<PathBuf>,
    },
    /// Score every property against the depth field.
    Score {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Rank, tier, and write the triage table, GeoJSON, and summary.
    Triage {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run every stage.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Seeds the Monte Carlo DEM perturbations and boundary sampling.
        #[arg(long)]
        seed: u64,
    },
    /// Compare written products against scenario truth.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Truth directory written by `synth`.
        #[arg(long, value_name = "DIR")]
        truth: PathBuf,
        /// Damage thresholds (USD) for the sensitivity sweep; defaults to
        /// 0.5, 1, 2, and 4 times `theta_damage_usd`.
        #[arg(long, value_delimiter = ',', value_name = "USD,...")]
        thetas: Vec<f64>,
        /// Shift of the tier-1 boundary for TES sensitivity.
        #[arg(long, default_value_t = 0.05)]
        tier_delta: f64,
        /// Also score each detection channel combination.
        #[arg(long)]
        ablation: bool,
    },
    /// Detect with each channel combination and report extent size.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Truth directory; adds extent accuracy columns.
        #[arg(long, value_name = "DIR")]
        truth: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

trait UsageExt<T> {
    fn usage(self) -> Result<T, CliError>;
}

impl<T> UsageExt<T> for crate::Result<T> {
    fn usage(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Usage(e.to_string()))
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (program name first), runs the command, and returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Synth {
            terrain,
            seed,
            out,
            rows,
            cols,
            dem_noise_m,
            claims_noise_sigma,
            sar_date,
        } => cmd_synth(&terrain, seed, &out, rows, cols, dem_noise_m, claims_noise_sigma, sar_date),
        Command::Detect { cfg } => cmd_detect(&cfg),
        Command::Depth { cfg, seed, extent } => cmd_depth(&cfg, seed, extent),
        Command::Score { cfg } => cmd_score(&cfg),
        Command::Triage { cfg } => cmd_triage(&cfg),
        Command::Run { cfg, seed } => cmd_run(&cfg, seed),
        Command::Eval {
            cfg,
            truth,
            thetas,
            tier_delta,
            ablation,
        } => cmd_eval(&cfg, &truth, thetas, tier_delta, ablation),
        Command::Ablate { cfg, truth } => cmd_ablate(&cfg, truth.as_deref()),
    }
}

fn load_config(args: &ConfigArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::from_file(&args.config).usage()?;
    cfg.apply_overrides(args.set.iter().map(String::as_str)).usage()?;
    if let Some(out) = &args.output {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

/// Config plus parameters bound to `seed`, after checking every stage's
/// inputs.
fn prepare(args: &ConfigArgs, stages: &[Stage], seed: u64) -> CliResult<(RunConfig, PipelineParams)> {
    let cfg = load_config(args)?;
    for &s in stages {
        cfg.require(s).usage()?;
    }
    let params = cfg.params(seed).usage()?;
    Ok((cfg, params))
}

fn require_files(dir: &Path, names: &[&str], producer: &str) -> CliResult<()> {
    for name in names {
        let p = dir.join(name);
        if !p.is_file() {
            return Err(CliError::Usage(format!("{} does not exist (run `{producer}` first)", p.display())));
        }
    }
    Ok(())
}

fn require_path(p: &Path, what: &str) -> CliResult<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", p.display())))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    terrain: &str,
    seed: u64,
    out: &Path,
    rows: Option<usize>,
    cols: Option<usize>,
    dem_noise_m: Option<f64>,
    claims_noise_sigma: Option<f64>,
    sar_date: Option<String>,
) -> CliResult<()> {
    let kind: TerrainKind = terrain.parse().usage()?;
    let mut spec = ScenarioSpec::new(kind, seed);
    if rows.is_some() || cols.is_some() {
        let (r, c) = (rows.unwrap_or(spec.rows), cols.unwrap_or(spec.cols));
        spec = spec.with_size(r, c);
    }
    if let Some(v) = dem_noise_m {
        spec.dem_noise_m = v;
    }
    if let Some(v) = claims_noise_sigma {
        spec.claims_noise_sigma = v;
    }
    spec.validate().usage()?;
    log::info!("generating {kind} scenario, seed {seed}");
    let (inputs, truth) = synth::generate(&spec)?;
    let files = write_scenario(out, &spec, &inputs, &truth)?;
    if let Some(date) = sar_date {
        let mut f = std::fs::OpenOptions::new()
            .append(true)
            .open(&files.config)
            .map_err(|e| Error::Io {
                path: files.config.clone(),
                source: e,
            })?;
        writeln!(f, "sar_date = {date}").map_err(|e| Error::Io {
            path: files.config.clone(),
            source: e,
        })?;
    }
    println!("config = {}", files.config.display());
    println!("truth = {}", files.truth_dir.display());
    Ok(())
}

fn cmd_detect(args: &ConfigArgs) -> CliResult<()> {
    // Detection does not draw random numbers; any seed binds the same params.
    let (cfg, params) = prepare(args, &[Stage::Detect], 0)?;
    let inputs = cfg.load_inputs()?;
    log::info!("detecting with channels {}", params.detection.channels);
    let (evidence, detection) = pipeline::detect(&inputs, &params)?;
    write_detection(&cfg.output_dir, &evidence, &detection)?;
    println!("flooded_cells = {}", detection.extent.count_true());
    Ok(())
}

fn cmd_depth(args: &ConfigArgs, seed: u64, extent: Option<PathBuf>) -> CliResult<()> {
    let (cfg, params) = prepare(args, &[Stage::Depth], seed)?;
    let extent_path = match extent {
        Some(p) => {
            require_path(&p, "extent")?;
            p
        }
        None => {
            require_files(&cfg.output_dir, &[EXTENT_FILE], "detect")?;
            cfg.output_dir.join(EXTENT_FILE)
        }
    };
    let extent = read_mask(&extent_path)?;
    let dem = read_raster(cfg.inputs.dem.as_ref().expect("checked by require"))?;
    let water = cfg.inputs.permanent_water.as_deref().map(read_mask).transpose()?;
    log::info!("estimating depth with {} Monte Carlo draws", params.mc.n_mc);
    let depth = pipeline::estimate_depth_on(&extent, &dem, &cfg.dem_label, water.as_ref(), &params)?;
    write_depth(&cfg.output_dir, &depth)?;
    println!("wet_cells = {}", depth.field.depth.cells().iter().filter(|v| **v > 0.0).count());
    Ok(())
}

fn cmd_score(args: &ConfigArgs) -> CliResult<()> {
    // Scoring is deterministic; the seed is not used.
    let (cfg, params) = prepare(args, &[Stage::Score], 0)?;
    require_files(&cfg.output_dir, &[DEPTH_FILE, CI_LOW_FILE, CI_HIGH_FILE], "depth")?;
    let properties = read_parcels(cfg.inputs.parcels.as_ref().expect("checked by require"))?;
    let field = read_depth_field(&cfg.output_dir)?;
    let scored = score_portfolio(&properties, &field, &params.curves, &params.scoring)?;
    write_scores(&scored, &cfg.output_dir.join(SCORES_FILE))?;
    println!("properties = {}", scored.len());
    Ok(())
}

fn read_ranked(cfg: &RunConfig) -> CliResult<(Vec<crate::scoring::Property>, RankedList)> {
    require_files(&cfg.output_dir, &[SCORES_FILE], "score")?;
    let properties = read_parcels(cfg.inputs.parcels.as_ref().expect("checked by require"))?;
    let scored = read_scores(&cfg.output_dir.join(SCORES_FILE), &properties)?;
    Ok((properties, rank(scored)))
}

fn cmd_triage(args: &ConfigArgs) -> CliResult<()> {
    let (cfg, params) = prepare(args, &[Stage::Triage], 0)?;
    require_files(&cfg.output_dir, &[EXTENT_FILE], "detect")?;
    let (properties, ranked) = read_ranked(&cfg)?;
    let tiers = assign_tiers(&ranked, &params.tiers)?;
    let extent = read_extent(&cfg.output_dir)?;
    let (_, summary) = write_triage_products(
        &cfg.output_dir,
        &ranked,
        &tiers,
        &properties,
        &extent,
        params.scoring.theta_damage_usd,
        &cfg.sar_date,
        cfg.geo_origin.as_ref().expect("checked by require"),
    )?;
    print_summary(&summary);
    Ok(())
}

fn cmd_run(args: &ConfigArgs, seed: u64) -> CliResult<()> {
    let (cfg, params) = prepare(args, &[Stage::Detect, Stage::Depth, Stage::Score, Stage::Triage], seed)?;
    let inputs = cfg.load_inputs()?;
    log::info!("running all stages, seed {seed}");
    let out = pipeline::run(&inputs, &params)?;
    let dir = &cfg.output_dir;
    write_detection(dir, &out.evidence, &out.detection)?;
    write_depth(dir, &out.depth)?;
    write_scores(&scored_in_portfolio_order(&out.ranked, &inputs.properties), &dir.join(SCORES_FILE))?;
    let (_, summary) = write_triage_products(
        dir,
        &out.ranked,
        &out.tiers,
        &inputs.properties,
        &out.detection.extent,
        params.scoring.theta_damage_usd,
        &cfg.sar_date,
        cfg.geo_origin.as_ref().expect("checked by require"),
    )?;
    print_summary(&summary);
    Ok(())
}

fn print_summary(s: &EventSummary) {
    print!("{}", format_summary(s));
}

fn require_truth(dir: &Path) -> CliResult<()> {
    require_path(dir, "truth directory")?;
    require_files(dir, &["truth.txt", "flood.altr", "depth.altr", "claims.csv"], "synth")
}

fn cmd_eval(args: &ConfigArgs, truth_dir: &Path, thetas: Vec<f64>, tier_delta: f64, ablation: bool) -> CliResult<()> {
    let mut stages = vec![Stage::Score];
    if ablation {
        stages.push(Stage::Ablate);
    }
    let (cfg, params) = prepare(args, &stages, 0)?;
    require_truth(truth_dir)?;
    require_files(&cfg.output_dir, &[EXTENT_FILE, DEPTH_FILE, CI_LOW_FILE, CI_HIGH_FILE], "run")?;
    if !(tier_delta.is_finite() && tier_delta >= 0.0) {
        return Err(CliError::Usage(format!("--tier-delta must be >= 0, got {tier_delta}")));
    }
    let theta = params.scoring.theta_damage_usd;
    let thetas = if thetas.is_empty() {
        vec![0.5 * theta, theta, 2.0 * theta, 4.0 * theta]
    } else {
        thetas
    };

    let truth = read_truth(truth_dir)?;
    let extent = read_extent(&cfg.output_dir)?;
    let field = read_depth_field(&cfg.output_dir)?;
    let (_, ranked) = read_ranked(&cfg)?;

    let mut report = String::new();
    let mut kv = |k: &str, v: String| writeln!(report, "{k} = {v}").expect("write to String");

    let em = extent_metrics(&extent, &truth.flood)?;
    kv("extent_precision", format_g(em.precision));
    kv("extent_recall", format_g(em.recall));
    kv("extent_iou", format_g(em.iou));
    kv("extent_f1", format_g(em.f1));

    match depth_metrics(&field, &truth.depth)? {
        Some(d) => {
            kv("depth_cells", d.n_cells.to_string());
            kv("depth_rmse_m", format_g(d.rmse_m));
            kv("depth_mae_m", format_g(d.mae_m));
            kv("depth_r2", format_g(d.r2));
            kv("depth_ci90_coverage", format_g(d.ci90_coverage));
        }
        None => kv("depth_cells", "0".into()),
    }

    let tau = params.tiers.t1;
    kv("triage_theta_usd", format_g(theta));
    kv("triage_tau", format_g(tau));
    match evaluate(&ranked, &truth.high_severity_at(theta), tau) {
        Ok(m) => {
            kv("triage_n", m.n.to_string());
            kv("triage_n_truth", m.n_truth.to_string());
            kv("triage_k", m.k.to_string());
            kv("triage_irr", format_g(m.irr));
            kv("triage_recall", format_g(m.recall));
            kv("triage_dfdr", format_g(m.dfdr));
            kv("triage_tes", format_g(m.tes));
            kv("triage_auirc", format_g(m.auirc));
            for (rho, v) in &m.irr_at_recall {
                kv(&format!("triage_irr_at_{}", (rho * 100.0).round()), format_g(*v));
            }
        }
        Err(Error::EmptyTruth) => kv("triage_n_truth", "0".into()),
        Err(e) => return Err(e.into()),
    }

    let rows = sensitivity_sweep(&ranked, &thetas, |t| truth.high_severity_at(t), &params.tiers, tier_delta)?;
    for row in rows {
        let p = format!("sweep_{}", format_g(row.theta));
        kv(&format!("{p}_n_truth"), row.n_truth.to_string());
        match row.metrics {
            Some(m) => {
                kv(&format!("{p}_irr_at_90"), format_g(m.irr_at_90));
                kv(&format!("{p}_tes"), format_g(m.tes));
                kv(&format!("{p}_auirc"), format_g(m.auirc));
                kv(&format!("{p}_tes_delta_t1_minus"), format_g(m.tes_delta_t1_minus));
                kv(&format!("{p}_tes_delta_t1_plus"), format_g(m.tes_delta_t1_plus));
            }
            None => kv(&format!("{p}_irr_at_90"), "n/a".into()),
        }
    }

    if ablation {
        let inputs = cfg.load_inputs()?;
        for det in pipeline::ablate(&inputs, &params)? {
            let m = extent_metrics(&det.extent, &truth.flood)?;
            let p = format!("ablation_{}", det.channels.to_string().replace('+', "_"));
            kv(&format!("{p}_iou"), format_g(m.iou));
            kv(&format!("{p}_f1"), format_g(m.f1));
        }
    }

    artifacts::ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(EVAL_FILE);
    std::fs::write(&path, &report).map_err(|e| Error::Io { path, source: e })?;
    print!("{report}");
    Ok(())
}

fn cmd_ablate(args: &ConfigArgs, truth_dir: Option<&Path>) -> CliResult<()> {
    let (cfg, params) = prepare(args, &[Stage::Ablate], 0)?;
    if let Some(dir) = truth_dir {
        require_truth(dir)?;
    }
    let truth = truth_dir.map(read_truth).transpose()?;
    let inputs = cfg.load_inputs()?;
    let detections = pipeline::ablate(&inputs, &params)?;

    let mut header = vec!["channels", "flooded_cells"];
    if truth.is_some() {
        header.extend(["precision", "recall", "iou", "f1"]);
    }
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(&header).map_err(Error::from)?;
    for det in &detections {
        let mut rec = vec![det.channels.to_string(), det.extent.count_true().to_string()];
        if let Some(t) = &truth {
            let m = extent_metrics(&det.extent, &t.flood)?;
            rec.extend([m.precision, m.recall, m.iou, m.f1].map(format_g));
        }
        w.write_record(&rec).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    artifacts::ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(ABLATION_FILE);
    std::fs::write(&path, &bytes).map_err(|e| Error::Io { path, source: e })?;
    std::io::stdout().write_all(&bytes).map_err(|e| Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })?;
    Ok(())
}
