//! Command-line front end: graph generation, trajectory analysis, rate
//! optimization, Monte Carlo simulation, and rate/EMSE curves.
//!
//! Every command is deterministic given its flags; outputs carry a metadata
//! block (version, seed, config hash) for provenance. Exit codes: 0 success,
//! 2 usage/configuration/I-O error, 3 infeasible target, 4 numerical failure.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::Digest;

use ratecon::error::{Error, Result};
use ratecon::ggp::{self, Mode};
use ratecon::graph::{
    generate_rgg_torus, max_degree_weights, metropolis_weights, WeightMatrix,
};
use ratecon::heuristic;
use ratecon::linalg::signal_plus_noise_cov;
use ratecon::rd_models::RdModel;
use ratecon::simulator::{self, SimConfig, SimScheme};
use ratecon::state_evolution::{self, DistortionSchedule};
use ratecon::{DistortionSchedule64, RateAllocation64, Topology64, WeightMatrix64};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "RATECON_OUT_DIR";

#[derive(Parser)]
#[command(name = "ratecon", version, about = "Rate-constrained consensus toolkit")]
struct Cli {
    /// JSON experiment configuration; values there override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for relative output paths (default: $RATECON_OUT_DIR or ".").
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a connected random geometric graph on the unit torus.
    Graph(GraphArgs),
    /// Evolve and export the analytic MSE/variance trajectory.
    Analyze(AnalyzeArgs),
    /// Minimize the aggregate coding rate under a final-MSE constraint.
    Optimize(OptimizeArgs),
    /// Monte Carlo simulation of quantized consensus.
    Simulate(SimulateArgs),
    /// Rate vs excess-MSE trade-off curves across schemes.
    Rdcurve(RdcurveArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum WeightsOpt {
    #[value(name = "max-degree")]
    #[serde(rename = "max-degree")]
    MaxDegree,
    #[value(name = "metropolis")]
    #[serde(rename = "metropolis")]
    Metropolis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum ModelOpt {
    #[value(name = "gauss-vq")]
    #[serde(rename = "gauss-vq")]
    GaussVq,
    #[value(name = "ecsq")]
    #[serde(rename = "ecsq")]
    Ecsq,
    #[value(name = "dithered-uniform")]
    #[serde(rename = "dithered-uniform")]
    DitheredUniform,
}

#[derive(Args, Serialize)]
struct GraphArgs {
    /// Number of nodes.
    #[arg(long)]
    m: usize,
    /// Connectivity radius on the unit torus.
    #[arg(long)]
    rho: f64,
    /// Position seed.
    #[arg(long)]
    seed: u64,
    /// Output topology JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    /// Topology JSON produced by `graph`.
    #[arg(long)]
    graph: PathBuf,
    /// Horizon (number of consensus iterations).
    #[arg(long = "T")]
    horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma_x2: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma_n2: f64,
    #[arg(long, value_enum, default_value_t = WeightsOpt::MaxDegree)]
    weights: WeightsOpt,
    /// Optional distortion schedule JSON; omitted means lossless.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Output trajectory CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct OptimizeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelOpt::GaussVq)]
    model: ModelOpt,
    /// Override the model's rate offset in bits.
    #[arg(long)]
    rc: Option<f64>,
    /// Override the model's normalized distortion cap.
    #[arg(long)]
    dmax: Option<f64>,
    /// Override the dithered-uniform range in standard deviations.
    #[arg(long)]
    delta: Option<f64>,
    /// Final network-MSE constraint.
    #[arg(long)]
    mse_target: f64,
    /// Horizon; required unless --sweep-T is given.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Tie all node distortions per iteration to one variable.
    #[arg(long)]
    constant_distortion: bool,
    /// Sweep horizons "lo..hi" minimizing K1*R_agg + K2*T.
    #[arg(long = "sweep-T")]
    sweep_t: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    k1: f64,
    #[arg(long, default_value_t = 0.0)]
    k2: f64,
    /// Also search the integer fixed-rate trellis around the relaxed optimum.
    #[arg(long)]
    integer: bool,
    #[arg(long, value_enum, default_value_t = WeightsOpt::MaxDegree)]
    weights: WeightsOpt,
    #[arg(long, default_value_t = 1.0)]
    sigma_x2: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma_n2: f64,
    /// Output allocation JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum SchemeOpt {
    #[value(name = "lossless")]
    #[serde(rename = "lossless")]
    Lossless,
    #[value(name = "fixed-rate")]
    #[serde(rename = "fixed-rate")]
    FixedRate,
    #[value(name = "dithered-uniform")]
    #[serde(rename = "dithered-uniform")]
    DitheredUniform,
    #[value(name = "ecsq")]
    #[serde(rename = "ecsq")]
    Ecsq,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeOpt::Lossless)]
    scheme: SchemeOpt,
    /// Allocation JSON from `optimize` (for dithered-uniform / ecsq schemes).
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Comma-separated integer rates for the fixed-rate scheme, e.g. "3,3,4".
    #[arg(long)]
    rates: Option<String>,
    /// Horizon; defaults to the schedule length.
    #[arg(long = "T")]
    horizon: Option<usize>,
    /// Samples per node (vector length).
    #[arg(long = "L", default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma_x2: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma_n2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable subtractive dithering for the ECSQ scheme.
    #[arg(long)]
    undithered: bool,
    #[arg(long, value_enum, default_value_t = WeightsOpt::MaxDegree)]
    weights: WeightsOpt,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct RdcurveArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    rho: f64,
    /// Comma-separated topology seeds to average over.
    #[arg(long, default_value = "1")]
    seeds: String,
    /// Comma-separated target EMSE values in dB.
    #[arg(long)]
    emse_grid: String,
    #[arg(long = "T")]
    horizon: usize,
    #[arg(long = "L", default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma_x2: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma_n2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = WeightsOpt::MaxDegree)]
    weights: WeightsOpt,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Experiment configuration file; any present key overrides the matching
/// flag. Unknown keys are rejected.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    m: Option<usize>,
    rho: Option<f64>,
    seed: Option<u64>,
    weights: Option<WeightsOpt>,
    model: Option<ModelOpt>,
    rc: Option<f64>,
    dmax: Option<f64>,
    delta: Option<f64>,
    horizon: Option<usize>,
    mse_target: Option<f64>,
    constant_distortion: Option<bool>,
    sweep_t: Option<String>,
    k1: Option<f64>,
    k2: Option<f64>,
    samples: Option<usize>,
    trials: Option<usize>,
    sigma_x2: Option<f64>,
    sigma_n2: Option<f64>,
    scheme: Option<SchemeOpt>,
    out_dir: Option<PathBuf>,
}

/// Provenance block attached to every artifact.
#[derive(Serialize, Deserialize)]
struct Meta {
    version: String,
    seed: Option<u64>,
    config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct Artifact<D> {
    meta: Meta,
    data: D,
}

fn meta_for(args: &impl Serialize, seed: Option<u64>) -> Meta {
    let canon = serde_json::to_string(args).unwrap_or_default();
    let hash = sha2::Sha256::digest(canon.as_bytes());
    Meta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_hash: format!("{hash:x}"),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InfeasibleTarget { .. }
        | Error::InfeasibleHorizon(_)
        | Error::InfeasibleSweep(_) => 3,
        Error::Numerical(_) | Error::SearchTooLarge(_) => 4,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let config: ExperimentConfig = match &cli.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| config.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match cli.cmd {
        Cmd::Graph(a) => cmd_graph(a, &config, &out_dir),
        Cmd::Analyze(a) => cmd_analyze(a, &config, &out_dir),
        Cmd::Optimize(a) => cmd_optimize(a, &config, &out_dir),
        Cmd::Simulate(a) => cmd_simulate(a, &config, &out_dir),
        Cmd::Rdcurve(a) => cmd_rdcurve(a, &config, &out_dir),
    }
}

fn resolve(out_dir: &Path, out: &Path) -> PathBuf {
    if out.is_absolute() {
        out.to_path_buf()
    } else {
        out_dir.join(out)
    }
}

fn load_topology(path: &Path) -> Result<Topology64> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(art) = serde_json::from_str::<Artifact<Topology64>>(&text) {
        return Ok(art.data);
    }
    Ok(serde_json::from_str::<Topology64>(&text)?)
}

fn weights_for(topo: &Topology64, opt: WeightsOpt) -> Result<WeightMatrix64> {
    match opt {
        WeightsOpt::MaxDegree => max_degree_weights(topo),
        WeightsOpt::Metropolis => metropolis_weights(topo),
    }
}

fn model_for(
    opt: ModelOpt,
    rc: Option<f64>,
    dmax: Option<f64>,
    delta: Option<f64>,
) -> Result<RdModel<f64>> {
    let mut model = match opt {
        ModelOpt::GaussVq => RdModel::gaussian_vq(),
        ModelOpt::Ecsq => RdModel::ecsq(),
        ModelOpt::DitheredUniform => RdModel::dithered_uniform(delta.unwrap_or(12.0))?,
    };
    if let Some(rc) = rc {
        model = model.with_rate_offset(rc);
    }
    if let Some(dmax) = dmax {
        model = model.with_dmax(dmax);
    }
    Ok(model)
}

fn write_json<D: Serialize>(path: &Path, artifact: &Artifact<D>) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut text = serde_json::to_string_pretty(artifact)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, meta: &Meta, header: &str, rows: &[String]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# version: {}", meta.version)?;
    if let Some(seed) = meta.seed {
        writeln!(f, "# seed: {seed}")?;
    }
    writeln!(f, "# config_hash: {}", meta.config_hash)?;
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{row}")?;
    }
    Ok(())
}

fn parse_range(s: &str) -> Result<std::ops::Range<usize>> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| Error::InvalidConfig(format!("bad range '{s}', expected lo..hi")))?;
    let lo: usize = lo
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad range bound in '{s}'")))?;
    let hi: usize = hi
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad range bound in '{s}'")))?;
    Ok(lo..hi)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidConfig(format!("bad {what} entry '{x}'")))
        })
        .collect()
}

fn cmd_graph(mut a: GraphArgs, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    if let Some(m) = cfg.m {
        a.m = m;
    }
    if let Some(rho) = cfg.rho {
        a.rho = rho;
    }
    if let Some(seed) = cfg.seed {
        a.seed = seed;
    }
    let topo: Topology64 = generate_rgg_torus(a.m, a.rho, a.seed)?;
    let degrees = topo.degrees();
    let mean_deg = degrees.iter().sum::<usize>() as f64 / a.m as f64;
    let meta = meta_for(&a, Some(a.seed));
    let path = resolve(out_dir, &a.out);
    write_json(&path, &Artifact { meta, data: topo.clone() })?;
    println!(
        "graph: m={} rho_c={} seed={} edges={} degree min/mean/max = {}/{:.2}/{}",
        a.m,
        a.rho,
        a.seed,
        topo.edge_count(),
        degrees.iter().min().unwrap(),
        mean_deg,
        degrees.iter().max().unwrap()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_analyze(mut a: AnalyzeArgs, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    if let Some(h) = cfg.horizon {
        a.horizon = h;
    }
    if let Some(v) = cfg.sigma_x2 {
        a.sigma_x2 = v;
    }
    if let Some(v) = cfg.sigma_n2 {
        a.sigma_n2 = v;
    }
    if let Some(w) = cfg.weights {
        a.weights = w;
    }
    let topo = load_topology(&a.graph)?;
    let w = weights_for(&topo, a.weights)?;
    let m = topo.node_count();
    let cov0 = signal_plus_noise_cov(m, a.sigma_x2, a.sigma_n2);
    let mean0 = vec![0.0; m];
    let schedule: Option<DistortionSchedule64> = match &a.schedule {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            if let Ok(art) = serde_json::from_str::<Artifact<DistortionSchedule64>>(&text) {
                Some(art.data)
            } else {
                Some(serde_json::from_str(&text)?)
            }
        }
        None => None,
    };
    let mut rows = Vec::new();
    for t in 0..=a.horizon {
        let (cov, stats) = match &schedule {
            Some(s) => {
                let cov = state_evolution::evolve_covariance(&w, &cov0, s, t)?;
                let stats = state_evolution::error_stats(&w, &mean0, &cov0, s, t)?;
                (cov, stats)
            }
            None => {
                let zero = zero_schedule(m, t);
                let cov = state_evolution::evolve_covariance(&w, &cov0, &zero, t)?;
                let stats = state_evolution::error_stats(&w, &mean0, &cov0, &zero, t)?;
                (cov, stats)
            }
        };
        for i in 0..m {
            rows.push(format!(
                "{t},{i},{},{},{}",
                cov[(i, i)],
                stats.node_mse[i],
                stats.network_mse
            ));
        }
    }
    let meta = meta_for(&a, None);
    let path = resolve(out_dir, &a.out);
    write_csv(&path, &meta, "t,node,variance,node_mse,network_mse", &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Effectively-zero distortion schedule for lossless trajectories.
fn zero_schedule(m: usize, horizon: usize) -> DistortionSchedule64 {
    DistortionSchedule::Variable(vec![vec![f64::MIN_POSITIVE; m]; horizon])
}

#[derive(Serialize, Deserialize)]
struct OptimizeOutput {
    mode: Mode,
    model: ModelOpt,
    horizon: usize,
    mse_target: f64,
    lossless_floor: f64,
    allocation: RateAllocation64,
    integer_schedule: Option<heuristic::IntegerSchedule<f64>>,
}

fn cmd_optimize(mut a: OptimizeArgs, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    if let Some(v) = cfg.model {
        a.model = v;
    }
    if let Some(v) = cfg.rc {
        a.rc = Some(v);
    }
    if let Some(v) = cfg.dmax {
        a.dmax = Some(v);
    }
    if let Some(v) = cfg.delta {
        a.delta = Some(v);
    }
    if let Some(v) = cfg.mse_target {
        a.mse_target = v;
    }
    if let Some(v) = cfg.horizon {
        a.horizon = Some(v);
    }
    if let Some(v) = cfg.constant_distortion {
        a.constant_distortion = v;
    }
    if let Some(v) = &cfg.sweep_t {
        a.sweep_t = Some(v.clone());
    }
    if let Some(v) = cfg.k1 {
        a.k1 = v;
    }
    if let Some(v) = cfg.k2 {
        a.k2 = v;
    }
    if let Some(v) = cfg.weights {
        a.weights = v;
    }
    if let Some(v) = cfg.sigma_x2 {
        a.sigma_x2 = v;
    }
    if let Some(v) = cfg.sigma_n2 {
        a.sigma_n2 = v;
    }
    let topo = load_topology(&a.graph)?;
    let w = weights_for(&topo, a.weights)?;
    let m = topo.node_count();
    let cov0 = signal_plus_noise_cov(m, a.sigma_x2, a.sigma_n2);
    let mean0 = vec![0.0; m];
    let model = model_for(a.model, a.rc, a.dmax, a.delta)?;
    let mode = if a.constant_distortion {
        Mode::Constant
    } else {
        Mode::Variable
    };
    let (horizon, mut alloc) = match (&a.sweep_t, a.horizon) {
        (Some(range), _) => {
            let range = parse_range(range)?;
            ggp::sweep_total_cost(
                &w, &mean0, &cov0, &model, a.mse_target, a.k1, a.k2, range, mode,
            )?
        }
        (None, Some(horizon)) => {
            let problem = ggp::build_problem(
                &w,
                &mean0,
                &cov0,
                horizon,
                a.mse_target,
                model.clone(),
                mode,
            )?;
            let mut alloc = ggp::solve(&problem, 1e-8, 500)?;
            ggp::predicted_trajectory(&w, &mean0, &cov0, &mut alloc)?;
            (horizon, alloc)
        }
        (None, None) => {
            return Err(Error::InvalidConfig(
                "either --T or --sweep-T is required".into(),
            ));
        }
    };
    let floor = state_evolution::lossless_mse(&w, &mean0, &cov0, horizon)?;
    let integer_schedule = if a.integer {
        let rggp = heuristic::average_ggp_rates(&alloc);
        let candidates = heuristic::build_trellis(&rggp, m);
        let fr_model = RdModel::dithered_uniform_default();
        match heuristic::search(&candidates, &w, &mean0, &cov0, &fr_model, a.mse_target)? {
            heuristic::SearchOutcome::Feasible(s) => Some(s),
            heuristic::SearchOutcome::Infeasible { .. } => {
                eprintln!("note: no feasible integer schedule in the trellis");
                None
            }
        }
    } else {
        None
    };
    ggp::predicted_trajectory(&w, &mean0, &cov0, &mut alloc)?;
    println!("horizon T = {horizon}, lossless floor = {floor:.6e}");
    println!("t    mean rate (bits)");
    for (t, row) in alloc.rates.iter().enumerate() {
        let mean_rate = row.iter().sum::<f64>() / row.len() as f64;
        println!("{t:<4} {mean_rate:.4}");
    }
    println!(
        "aggregate rate = {:.4} bits, predicted final MSE = {:.6e} (target {:.6e})",
        alloc.aggregate_rate,
        alloc.predicted_mse.last().copied().unwrap_or(f64::NAN),
        a.mse_target
    );
    if let Some(s) = &integer_schedule {
        println!("integer schedule R(t) = {:?}, aggregate = {} bits", s.rates, s.aggregate);
    }
    let output = OptimizeOutput {
        mode,
        model: a.model,
        horizon,
        mse_target: a.mse_target,
        lossless_floor: floor,
        allocation: alloc,
        integer_schedule,
    };
    let meta = meta_for(&a, None);
    let path = resolve(out_dir, &a.out);
    write_json(&path, &Artifact { meta, data: output })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn load_allocation(path: &Path) -> Result<OptimizeOutput> {
    let text = std::fs::read_to_string(path)?;
    let art: Artifact<OptimizeOutput> = serde_json::from_str(&text)?;
    Ok(art.data)
}

fn cmd_simulate(mut a: SimulateArgs, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    if let Some(v) = cfg.scheme {
        a.scheme = v;
    }
    if let Some(v) = cfg.horizon {
        a.horizon = Some(v);
    }
    if let Some(v) = cfg.samples {
        a.samples = v;
    }
    if let Some(v) = cfg.trials {
        a.trials = v;
    }
    if let Some(v) = cfg.sigma_x2 {
        a.sigma_x2 = v;
    }
    if let Some(v) = cfg.sigma_n2 {
        a.sigma_n2 = v;
    }
    if let Some(v) = cfg.seed {
        a.seed = v;
    }
    if let Some(v) = cfg.weights {
        a.weights = v;
    }
    let topo = load_topology(&a.graph)?;
    let w = weights_for(&topo, a.weights)?;
    let m = topo.node_count();
    let scheme: SimScheme<f64> = match a.scheme {
        SchemeOpt::Lossless => SimScheme::Lossless,
        SchemeOpt::FixedRate => {
            let rates = match (&a.rates, &a.schedule) {
                (Some(list), _) => parse_list::<u32>(list, "rate")?,
                (None, Some(path)) => {
                    let out = load_allocation(path)?;
                    out.integer_schedule
                        .ok_or_else(|| {
                            Error::InvalidConfig(
                                "allocation file has no integer schedule; rerun optimize with --integer"
                                    .into(),
                            )
                        })?
                        .rates
                }
                (None, None) => {
                    return Err(Error::InvalidConfig(
                        "fixed-rate scheme needs --rates or --schedule".into(),
                    ))
                }
            };
            SimScheme::FixedRate { rates }
        }
        SchemeOpt::DitheredUniform | SchemeOpt::Ecsq => {
            let path = a.schedule.as_ref().ok_or_else(|| {
                Error::InvalidConfig("this scheme needs --schedule".into())
            })?;
            let out = load_allocation(path)?;
            let schedule = out.allocation.distortions;
            if a.scheme == SchemeOpt::Ecsq {
                SimScheme::Ecsq { schedule, dithered: !a.undithered }
            } else {
                SimScheme::DitheredSchedule { schedule }
            }
        }
    };
    let horizon = match (a.horizon, scheme.horizon()) {
        (Some(h), _) => h,
        (None, Some(h)) => h,
        (None, None) => {
            return Err(Error::InvalidConfig(
                "lossless simulation needs an explicit --T".into(),
            ))
        }
    };
    let sim_cfg = SimConfig {
        horizon,
        samples: a.samples,
        sigma_x2: a.sigma_x2,
        sigma_n2: a.sigma_n2,
        trials: a.trials,
        master_seed: a.seed,
    };
    let result = simulator::run(&sim_cfg, &w, &scheme)?;
    let cov0 = signal_plus_noise_cov(m, a.sigma_x2, a.sigma_n2);
    let mean0 = vec![0.0; m];
    let mut rows = Vec::new();
    for t in 0..=horizon {
        let lossless = state_evolution::lossless_mse(&w, &mean0, &cov0, t)?;
        let emse_db = if t == 0 {
            0.0
        } else {
            simulator::emse(result.mean_network_mse[t], lossless)?
        };
        rows.push(format!(
            "{t},{},{},{},{}",
            result.mean_network_mse[t], result.se_network_mse[t], lossless, emse_db
        ));
    }
    if let Some(rate) = result.aggregate_rate {
        println!("measured aggregate rate = {rate:.4} bits");
    }
    println!(
        "final empirical network MSE = {:.6e} (+/- {:.2e})",
        result.final_mse(),
        result.se_network_mse.last().unwrap()
    );
    let meta = meta_for(&a, Some(a.seed));
    let path = resolve(out_dir, &a.out);
    write_csv(
        &path,
        &meta,
        "t,empirical_network_mse,standard_error,lossless_mse,emse_db",
        &rows,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_rdcurve(mut a: RdcurveArgs, cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    if let Some(v) = cfg.m {
        a.m = v;
    }
    if let Some(v) = cfg.rho {
        a.rho = v;
    }
    if let Some(v) = cfg.horizon {
        a.horizon = v;
    }
    if let Some(v) = cfg.samples {
        a.samples = v;
    }
    if let Some(v) = cfg.trials {
        a.trials = v;
    }
    if let Some(v) = cfg.sigma_x2 {
        a.sigma_x2 = v;
    }
    if let Some(v) = cfg.sigma_n2 {
        a.sigma_n2 = v;
    }
    if let Some(v) = cfg.seed {
        a.seed = v;
    }
    if let Some(v) = cfg.weights {
        a.weights = v;
    }
    let seeds: Vec<u64> = parse_list(&a.seeds, "seed")?;
    let grid: Vec<f64> = parse_list(&a.emse_grid, "EMSE")?;
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("empty seed list or EMSE grid".into()));
    }
    let mean0 = vec![0.0; a.m];
    let cov0 = signal_plus_noise_cov(a.m, a.sigma_x2, a.sigma_n2);
    // accumulate (predicted rate, predicted emse, simulated rate, simulated
    // emse, count) per (scheme, grid point)
    let schemes = ["dithered-uniform", "ecsq", "fixed-rate"];
    let mut acc = vec![vec![(0.0, 0.0, 0.0, 0.0, 0usize); grid.len()]; schemes.len()];
    for &seed in &seeds {
        let topo: Topology64 = generate_rgg_torus(a.m, a.rho, seed)?;
        let w = weights_for(&topo, a.weights)?;
        let floor = state_evolution::lossless_mse(&w, &mean0, &cov0, a.horizon)?;
        for (gi, &emse_db) in grid.iter().enumerate() {
            let target = floor * 10f64.powf(emse_db / 10.0);
            if !(target > floor) {
                eprintln!("note: skipping non-positive EMSE target {emse_db} dB");
                continue;
            }
            for (si, &scheme) in schemes.iter().enumerate() {
                match rdcurve_point(
                    &a, &w, &mean0, &cov0, floor, target, scheme, seed,
                ) {
                    Ok((pr, pe, sr, se)) => {
                        let slot = &mut acc[si][gi];
                        slot.0 += pr;
                        slot.1 += pe;
                        slot.2 += sr;
                        slot.3 += se;
                        slot.4 += 1;
                    }
                    Err(Error::InfeasibleTarget { .. }) => {
                        eprintln!(
                            "note: {scheme} infeasible at {emse_db} dB for seed {seed}"
                        );
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (si, &scheme) in schemes.iter().enumerate() {
        for (gi, &emse_db) in grid.iter().enumerate() {
            let (pr, pe, sr, se, n) = acc[si][gi];
            if n == 0 {
                continue;
            }
            let n = n as f64;
            rows.push(format!(
                "{scheme},{emse_db},{},{},{},{}",
                pr / n,
                pe / n,
                sr / n,
                se / n
            ));
        }
    }
    let meta = meta_for(&a, Some(a.seed));
    let path = resolve(out_dir, &a.out);
    write_csv(
        &path,
        &meta,
        "scheme,target_emse_db,predicted_rate,predicted_emse_db,simulated_rate,simulated_emse_db",
        &rows,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

/// One rate/EMSE operating point: optimize for the target, then simulate.
/// Returns (predicted rate, predicted EMSE dB, simulated rate, simulated
/// EMSE dB).
#[allow(clippy::too_many_arguments)]
fn rdcurve_point(
    a: &RdcurveArgs,
    w: &WeightMatrix<f64>,
    mean0: &[f64],
    cov0: &ratecon::Matrix64,
    floor: f64,
    target: f64,
    scheme: &str,
    seed: u64,
) -> Result<(f64, f64, f64, f64)> {
    let sim_cfg = SimConfig {
        horizon: a.horizon,
        samples: a.samples,
        sigma_x2: a.sigma_x2,
        sigma_n2: a.sigma_n2,
        trials: a.trials,
        master_seed: a.seed.wrapping_add(seed),
    };
    let (model, mode) = match scheme {
        "ecsq" => (RdModel::ecsq(), Mode::Constant),
        _ => (RdModel::dithered_uniform_default(), Mode::Constant),
    };
    let problem =
        ggp::build_problem(w, mean0, cov0, a.horizon, target, model.clone(), mode)?;
    let mut alloc = ggp::solve(&problem, 1e-8, 500)?;
    ggp::predicted_trajectory(w, mean0, cov0, &mut alloc)?;
    let predicted_mse = *alloc.predicted_mse.last().unwrap();
    match scheme {
        "fixed-rate" => {
            let rggp = heuristic::average_ggp_rates(&alloc);
            let cands = heuristic::build_trellis(&rggp, w.size());
            let sched = heuristic::search(&cands, w, mean0, cov0, &model, target)?
                .feasible()?;
            let predicted_rate = sched.aggregate as f64;
            let predicted_emse =
                simulator::emse(sched.predicted_mse.unwrap(), floor)?;
            let result = simulator::run(
                &sim_cfg,
                w,
                &SimScheme::FixedRate { rates: sched.rates.clone() },
            )?;
            Ok((
                predicted_rate,
                predicted_emse,
                result.aggregate_rate.unwrap(),
                simulator::emse(result.final_mse(), floor)?,
            ))
        }
        "ecsq" => {
            let result = simulator::run(
                &sim_cfg,
                w,
                &SimScheme::Ecsq {
                    schedule: alloc.distortions.clone(),
                    dithered: true,
                },
            )?;
            Ok((
                alloc.aggregate_rate,
                simulator::emse(predicted_mse, floor)?,
                result.aggregate_rate.unwrap(),
                simulator::emse(result.final_mse(), floor)?,
            ))
        }
        _ => {
            let result = simulator::run(
                &sim_cfg,
                w,
                &SimScheme::DitheredSchedule { schedule: alloc.distortions.clone() },
            )?;
            Ok((
                alloc.aggregate_rate,
                simulator::emse(predicted_mse, floor)?,
                result.aggregate_rate.unwrap(),
                simulator::emse(result.final_mse(), floor)?,
            ))
        }
    }
}
