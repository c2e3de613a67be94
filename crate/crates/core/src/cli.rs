//! The `crosswalk` command line.
//!
//! Exit status: 0 success (or gates passed), 1 usage error, 2 runtime
//! failure, 3 gates failed.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::agents::{HumanDriverParams, SoftYieldParams, StrategySpec, WalkSpeedModel};
use crate::config::{RunConfig, StrategyChoice};
use crate::eval::{compute_report, PairOutcome};
use crate::ingest::{extract_all, generate_synthetic, read_observations_csv, read_trajectory_csv, reference_generator};
use crate::mixture::{select_components, GaussianMixture};
use crate::scenario::{ObservationVector, TtcConvention};
use crate::seed::derive_seed;
use crate::sim::{run_episode, run_paired_experiments, write_trajectory_csv, Outcome, WalkSource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_GATE_FAIL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "crosswalk", version, about = "Vehicle-pedestrian interaction model and passing-strategy evaluation")]
pub struct Cli {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub parallel: usize,
    /// Existing directory receiving every output file.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic observation set (observations.csv, generator.toml).
    GenData {
        /// Sample size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Convert a trajectory log (event_id,t,R,L,v) into observations.csv.
    Ingest {
        #[arg(long, value_name = "PATH")]
        log: Option<PathBuf>,
    },
    /// Fit mixtures over a K range and keep the BIC choice (model.toml, bic.csv).
    Fit {
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Tabulate a conditional density (conditional.csv with value,pdf).
    Condition {
        /// Observed value, e.g. `--given inv_R=0.05`; repeatable.
        #[arg(long = "given", value_name = "NAME=VALUE", value_parser = parse_assignment)]
        given: Vec<(String, f64)>,
        /// Variable to tabulate.
        #[arg(long)]
        free: Option<String>,
    },
    /// Run one episode and dump its trajectory (trajectory.csv, episode.toml).
    Simulate {
        #[arg(long)]
        strategy: Option<StrategyChoice>,
        /// Experiment index whose pedestrians are replayed.
        #[arg(long, default_value_t = 0)]
        episode: u64,
    },
    /// Paired evaluation against the human baseline (report.toml, series.csv).
    Evaluate {
        #[arg(long)]
        av_strategy: Option<StrategyChoice>,
        #[arg(long)]
        experiments: Option<usize>,
    },
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("not a number: {value:?}"))?;
    Ok((name.trim().to_owned(), value))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `args` (program name first) and runs the command, returning the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("usage error: {m}"),
                Failure::Runtime(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::read(p).map_err(runtime)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if !cli.out.is_dir() {
        return Err(Failure::Runtime(format!("output directory {} does not exist", cli.out.display())));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.parallel).build().map_err(runtime)?;
    pool.install(|| match &cli.command {
        Command::GenData { n } => gen_data(&config, *n, &cli.out),
        Command::Ingest { log } => ingest(&config, log.as_deref(), &cli.out),
        Command::Fit { k_min, k_max } => fit(&mut config, *k_min, *k_max, &cli.out),
        Command::Condition { given, free } => condition(&mut config, given, free.as_deref(), &cli.out),
        Command::Simulate { strategy, episode } => simulate(&config, *strategy, *episode, &cli.out),
        Command::Evaluate { av_strategy, experiments } => evaluate(&mut config, *av_strategy, *experiments, &cli.out),
    })
}

/// Relative inputs are looked up in the working directory, then in `out`.
fn resolve_input(path: &Path, out: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() && out.join(path).exists() {
        out.join(path)
    } else {
        path.to_path_buf()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn read_model(config: &RunConfig, out: &Path) -> Result<GaussianMixture, Failure> {
    GaussianMixture::read_toml(&resolve_input(&config.paths.model, out)).map_err(runtime)
}

fn gen_data(config: &RunConfig, n: Option<usize>, out: &Path) -> Result<i32, Failure> {
    let generator = match &config.paths.generator {
        Some(p) => GaussianMixture::read_toml(&resolve_input(p, out)).map_err(runtime)?,
        None => reference_generator(),
    };
    let n = n.unwrap_or(config.data.n);
    let data = generate_synthetic(&generator, n, derive_seed(config.seed, "gen-data", 0)).map_err(runtime)?;
    data.write_csv(create(&out.join("observations.csv"))?).map_err(runtime)?;
    write_text(&out.join("generator.toml"), &generator.to_toml_string())?;
    println!("wrote {n} synthetic observations to {}", out.join("observations.csv").display());
    Ok(EXIT_OK)
}

fn ingest(config: &RunConfig, log: Option<&Path>, out: &Path) -> Result<i32, Failure> {
    let path = log
        .map(Path::to_path_buf)
        .or_else(|| config.paths.trajectory_log.clone())
        .ok_or_else(|| Failure::Usage("no trajectory log given (--log or paths.trajectory_log)".into()))?;
    let file = File::open(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let logs = read_trajectory_csv(file).map_err(runtime)?;
    let (obs, empty) = extract_all(&logs, config.data.sample_stride, TtcConvention::DistanceOverSpeed).map_err(runtime)?;
    for id in &empty {
        eprintln!("warning: event {id} produced no usable observations");
    }
    obs.write_csv(create(&out.join("observations.csv"))?).map_err(runtime)?;
    println!("extracted {} observations from {} events", obs.len(), logs.len());
    Ok(EXIT_OK)
}

fn fit(config: &mut RunConfig, k_min: Option<usize>, k_max: Option<usize>, out: &Path) -> Result<i32, Failure> {
    config.fit.k_min = k_min.unwrap_or(config.fit.k_min);
    config.fit.k_max = k_max.unwrap_or(config.fit.k_max);
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let path = resolve_input(&config.paths.observations, out);
    let file = File::open(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let data = read_observations_csv(file).map_err(runtime)?;
    let fit_config = config.fit.fit_config(data.ncols(), derive_seed(config.seed, "fit", 0));
    let selection =
        select_components(&data, &config.fit.k_range(), &fit_config, config.fit.rate_threshold).map_err(runtime)?;

    let mut w = csv::Writer::from_writer(create(&out.join("bic.csv"))?);
    w.write_record(["K", "BIC", "change_rate"]).map_err(runtime)?;
    for p in &selection.curve {
        let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([p.k.to_string(), fmt(p.bic), fmt(p.change_rate)]).map_err(runtime)?;
        if let Some(e) = &p.error {
            eprintln!("warning: fit with K={} failed: {e}", p.k);
        }
    }
    w.flush().map_err(runtime)?;
    write_text(&out.join("model.toml"), &selection.model.to_toml_string())?;
    println!("selected K={} ({} observations)", selection.selected_k, data.nrows());
    Ok(EXIT_OK)
}

fn condition(config: &mut RunConfig, given: &[(String, f64)], free: Option<&str>, out: &Path) -> Result<i32, Failure> {
    for (name, value) in given {
        config.condition.observed.insert(name.clone(), *value);
    }
    if let Some(f) = free {
        config.condition.free = f.to_owned();
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let c = &config.condition;
    let model = read_model(config, out)?;
    if model.dim() != ObservationVector::DIM {
        return Err(Failure::Runtime(format!("model must be 4-dimensional, got {}", model.dim())));
    }
    let dim = |n: &str| ObservationVector::dim_of(n).expect("validated");
    let observed_dims: Vec<usize> = c.observed.keys().map(|n| dim(n)).collect();
    let values: Vec<f64> = c.observed.values().copied().collect();
    let free_dim = dim(&c.free);
    let table_model = if observed_dims.is_empty() {
        model.marginalize(&[free_dim]).map_err(runtime)?
    } else {
        let conditional = model.condition(&observed_dims, &values).map_err(runtime)?;
        let remaining: Vec<usize> = (0..4).filter(|i| !observed_dims.contains(i)).collect();
        let pos = remaining.iter().position(|&i| i == free_dim).expect("free is not observed");
        conditional.marginalize(&[pos]).map_err(runtime)?
    };
    let step = (c.hi - c.lo) / (c.points - 1) as f64;
    let mut w = csv::Writer::from_writer(create(&out.join("conditional.csv"))?);
    w.write_record(["value", "pdf"]).map_err(runtime)?;
    let mut integral = 0.0;
    let mut prev: Option<f64> = None;
    for i in 0..c.points {
        let x = if i == c.points - 1 { c.hi } else { c.lo + step * i as f64 };
        let p = table_model.density(&[x]).map_err(runtime)?;
        if let Some(q) = prev {
            integral += 0.5 * (p + q) * step;
        }
        prev = Some(p);
        w.write_record([x.to_string(), p.to_string()]).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    println!("conditional density of {} on [{}, {}]: trapezoid mass {integral:.6}", c.free, c.lo, c.hi);
    Ok(EXIT_OK)
}

fn strategy_spec(choice: StrategyChoice, soft_yield: SoftYieldParams, human: &Arc<HumanDriverParams>) -> StrategySpec {
    match choice {
        StrategyChoice::SoftYield => StrategySpec::SoftYield(soft_yield),
        StrategyChoice::Human => StrategySpec::Human(Arc::clone(human)),
        StrategyChoice::Cruise => StrategySpec::Cruise,
    }
}

fn agents(config: &RunConfig, out: &Path) -> Result<(Arc<HumanDriverParams>, Arc<WalkSpeedModel>), Failure> {
    let model = read_model(config, out)?;
    let walk = WalkSpeedModel::new(&model).map_err(runtime)?;
    let human = HumanDriverParams::new(model, config.human).map_err(runtime)?;
    Ok((Arc::new(human), Arc::new(walk)))
}

#[derive(Serialize)]
struct EpisodeSummary {
    strategy: StrategyChoice,
    episode: u64,
    outcome: Outcome,
    passing_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    crash_time: Option<f64>,
    arrival_times: Vec<f64>,
    walk_speeds: Vec<f64>,
    fallback_events: usize,
}

fn simulate(config: &RunConfig, strategy: Option<StrategyChoice>, episode: u64, out: &Path) -> Result<i32, Failure> {
    let (human, walk) = agents(config, out)?;
    let choice = strategy.unwrap_or(config.evaluate.av_strategy);
    let spec = strategy_spec(choice, config.soft_yield, &human);
    let schedule = config.sim.schedule(derive_seed(config.seed, "schedule", episode));
    let source = WalkSource::decide(walk, derive_seed(config.seed, "walk", episode));
    let result = run_episode(&config.sim, spec.build().as_mut(), &schedule, &source, true).map_err(runtime)?;
    let rows = result.trajectory.as_deref().unwrap_or_default();
    write_trajectory_csv(rows, create(&out.join("trajectory.csv"))?).map_err(runtime)?;
    let summary = EpisodeSummary {
        strategy: choice,
        episode,
        outcome: result.outcome,
        passing_time: result.passing_time,
        crash_time: result.crash_time,
        arrival_times: schedule.times.clone(),
        walk_speeds: result.walk_speeds.clone(),
        fallback_events: result.fallback_events,
    };
    write_text(&out.join("episode.toml"), &toml::to_string(&summary).map_err(runtime)?)?;
    println!("{:?} after {:.3} s ({} pedestrians)", result.outcome, result.passing_time, schedule.len());
    Ok(EXIT_OK)
}

fn evaluate(
    config: &mut RunConfig,
    av_strategy: Option<StrategyChoice>,
    experiments: Option<usize>,
    out: &Path,
) -> Result<i32, Failure> {
    config.evaluate.av_strategy = av_strategy.unwrap_or(config.evaluate.av_strategy);
    config.evaluate.experiments = experiments.unwrap_or(config.evaluate.experiments);
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (human, walk) = agents(config, out)?;
    let av = strategy_spec(config.evaluate.av_strategy, config.soft_yield, &human);
    let baseline = StrategySpec::Human(Arc::clone(&human));
    let pairs = run_paired_experiments(&config.sim, &av, &baseline, walk, config.evaluate.experiments, config.seed)
        .map_err(runtime)?;
    let outcomes: Vec<PairOutcome> = pairs.iter().map(PairOutcome::from).collect();
    let report = compute_report(&outcomes, config.gates).map_err(runtime)?;
    report.write_toml(&out.join("report.toml")).map_err(runtime)?;
    report.write_series(create(&out.join("series.csv"))?).map_err(runtime)?;
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
    println!(
        "mu = {}, cv = {}, kappa = {:.4} over {} experiments ({} excluded)",
        fmt(report.mu),
        fmt(report.cv),
        report.kappa,
        report.experiments,
        report.excluded
    );
    Ok(match report.passed() {
        Some(false) => {
            println!("gates failed");
            EXIT_GATE_FAIL
        }
        Some(true) => {
            println!("gates passed");
            EXIT_OK
        }
        None => EXIT_OK,
    })
}
