use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use bnsim_core::exact::exact_posterior;
use bnsim_core::netgen::{generate, select_low_prior_evidence};
use bnsim_core::{parse_network, read_network_file, write_network, Evidence, GaParams, NetGenConfig, Network};
use bnsim_harness::config::{read_config, NetworkSource, RmseMode};
use bnsim_harness::experiment::{
    oracle_for, run_phases, summarize, Method, Oracle, PhasePlan, RunSettings,
};
use bnsim_harness::output::{
    write_phase_table, write_posterior, write_study_summary, write_summary, write_trace,
};
use bnsim_harness::study::{prepare_networks, run_random_study, standard_grid};
use bnsim_harness::DEMO_NETWORK;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser, Debug)]
#[command(name = "bnsim", version, about = "Belief estimation experiments on discrete Bayesian networks")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output files; single-table commands print to stdout without it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random network file.
    GenNet(GenNetArgs),
    /// Exact posterior by enumeration.
    Exact(ExactArgs),
    /// Sample trials and trace both estimators.
    Simulate(SimulateArgs),
    /// Simulate, then run the genetic search.
    Search(SearchArgs),
    /// Run a configuration file.
    Experiment(ExperimentArgs),
    /// Run the comparison grid over random networks.
    Study(StudyArgs),
}

#[derive(Args, Debug)]
struct NetGenFlags {
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    max_parents: Option<usize>,
    #[arg(long)]
    zero_prob: Option<f64>,
    #[arg(long)]
    evidence_count: Option<usize>,
    /// Configuration file whose [netgen] and [ga] sections are used.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenNetArgs {
    #[command(flatten)]
    netgen: NetGenFlags,
    /// Also print low-prior leaf evidence for the network.
    #[arg(long)]
    evidence: bool,
}

#[derive(Args, Debug)]
struct NetworkArgs {
    /// Network file, or `demo` for the bundled example.
    #[arg(long)]
    network: String,
    /// Observations such as `S1=1,S3=0`.
    #[arg(long, default_value = "")]
    evidence: String,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Largest number of joint states to enumerate.
    #[arg(long, default_value_t = bnsim_core::DEFAULT_BUDGET)]
    budget: u128,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum SimMethod {
    Logic,
    Forward,
    Backward,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, value_enum, default_value_t = SimMethod::Forward)]
    method: SimMethod,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 100)]
    stride: u64,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Sampler for the initial simulation and the breeding set.
    #[arg(long, value_enum, default_value_t = SimMethod::Forward)]
    method: SimMethod,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 50)]
    generations: usize,
    #[arg(long, default_value_t = 100)]
    stride: u64,
    #[arg(long)]
    generation_size: Option<usize>,
    #[arg(long)]
    breeding_size: Option<usize>,
    #[arg(long)]
    crossover_prob: Option<f64>,
    #[arg(long)]
    mutation_prob: Option<f64>,
    #[arg(long)]
    max_radius: Option<usize>,
    /// Configuration file whose [ga] section is used.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    config: PathBuf,
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[command(flatten)]
    netgen: NetGenFlags,
    /// Number of random networks.
    #[arg(long, default_value_t = 12)]
    networks: usize,
    #[arg(long, default_value_t = 500)]
    stride: u64,
    #[arg(long, value_enum, default_value_t = RmseArg::Auto)]
    rmse: RmseArg,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RmseArg {
    Auto,
    On,
    Off,
}

/// Failures caused by the invocation rather than the run.
#[derive(Debug)]
struct Usage(anyhow::Error);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl Into<anyhow::Error>) -> anyhow::Error {
    Usage(e.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let Format::Csv = cli.format;
    match &cli.command {
        Command::GenNet(args) => gen_net(cli, args),
        Command::Exact(args) => exact(cli, args),
        Command::Simulate(args) => simulate(cli, args),
        Command::Search(args) => search(cli, args),
        Command::Experiment(args) => experiment(cli, args),
        Command::Study(args) => study(cli, args),
    }
}

fn load_network(source: &str) -> anyhow::Result<Network> {
    if source == "demo" {
        return Ok(parse_network(DEMO_NETWORK)?);
    }
    Ok(read_network_file(Path::new(source))?)
}

fn parse_evidence(net: &Network, text: &str) -> anyhow::Result<Evidence> {
    Evidence::parse(net, text).map_err(usage)
}

/// Writer for `name` under `--out-dir`, or stdout without one.
fn sink(cli: &Cli, name: &str) -> anyhow::Result<Box<dyn Write>> {
    match &cli.out_dir {
        Some(dir) => Ok(Box::new(BufWriter::new(create(dir, name)?))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<File> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    info!("writing {}", path.display());
    File::create(&path).with_context(|| format!("creating {}", path.display()))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn netgen_config(cli: &Cli, flags: &NetGenFlags) -> anyhow::Result<(NetGenConfig, Option<GaParams>)> {
    let (mut cfg, ga) = match &flags.config {
        Some(path) => {
            let file = read_config_lenient(path)?;
            (file.0, Some(file.1))
        }
        None => (NetGenConfig::default(), None),
    };
    cfg.seed = cli.seed;
    if let Some(n) = flags.nodes {
        cfg.node_count = n;
        cfg.max_parents = cfg.max_parents.min(n.saturating_sub(1));
    }
    if let Some(p) = flags.max_parents {
        cfg.max_parents = p;
    }
    if let Some(z) = flags.zero_prob {
        cfg.zero_cell_prob = z;
    }
    if let Some(e) = flags.evidence_count {
        cfg.evidence_count = e;
    }
    cfg.validate().map_err(usage)?;
    Ok((cfg, ga))
}

/// [netgen] and [ga] from a file that need not declare any phase.
fn read_config_lenient(path: &Path) -> anyhow::Result<(NetGenConfig, GaParams)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let padded = format!("{text}\n[phase]\n");
    let base = path.parent().unwrap_or(Path::new("."));
    let file = bnsim_harness::config::parse_config(&padded, base).map_err(usage)?;
    Ok((file.netgen, file.ga))
}

fn gen_net(cli: &Cli, args: &GenNetArgs) -> anyhow::Result<()> {
    let (cfg, _) = netgen_config(cli, &args.netgen)?;
    let net = generate(&cfg, &mut cfg.rng())?;
    let text = write_network(&net);
    let mut out = sink(cli, &format!("{}.net", net.name()))?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    if args.evidence {
        let mut rng = cfg.rng();
        let ev = select_low_prior_evidence(&net, cfg.evidence_count, &mut rng)?;
        eprintln!("evidence: {}", ev.render(&net));
    }
    Ok(())
}

fn exact(cli: &Cli, args: &ExactArgs) -> anyhow::Result<()> {
    let net = load_network(&args.net.network)?;
    let ev = parse_evidence(&net, &args.net.evidence)?;
    let sol = exact_posterior(&net, &ev, args.budget)?;
    let mut out = sink(cli, "exact.csv")?;
    write_posterior(&mut out, &net, &sol)?;
    Ok(())
}

fn sim_method(m: SimMethod, genetic: bool) -> Method {
    match (m, genetic) {
        (SimMethod::Logic, false) => Method::Logic,
        (SimMethod::Forward, false) => Method::Forward,
        (SimMethod::Backward, false) => Method::Backward,
        (SimMethod::Forward, true) => Method::GaForward,
        (SimMethod::Backward, true) => Method::GaBackward,
        (SimMethod::Logic, true) => unreachable!("rejected before"),
    }
}

fn traced_run(
    cli: &Cli,
    net: &Network,
    phase: PhasePlan,
    settings: &RunSettings,
) -> anyhow::Result<()> {
    if settings.method.sampling() == bnsim_core::SamplingMethod::Backward && phase.evidence.is_empty() {
        return Err(usage(anyhow!(
            "backward simulation needs evidence; use --method forward"
        )));
    }
    let phases = [phase];
    let oracle = oracle_for(net, &phases, false)?;
    if oracle.is_none() {
        info!("network too large to enumerate; RMSE columns left empty");
    }
    let run = run_phases(net, &phases, settings, oracle.as_ref(), cli.seed)?;
    let mut out = sink(cli, "trace.csv")?;
    write_trace(&mut out, &run.trace)?;
    Ok(())
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> anyhow::Result<()> {
    let net = load_network(&args.net.network)?;
    let evidence = parse_evidence(&net, &args.net.evidence)?;
    let settings = RunSettings {
        method: sim_method(args.method, false),
        stride: args.stride,
        ..RunSettings::default()
    };
    let phase = PhasePlan {
        evidence,
        trials: args.trials,
        generations: 0,
    };
    traced_run(cli, &net, phase, &settings)
}

fn search(cli: &Cli, args: &SearchArgs) -> anyhow::Result<()> {
    if args.method == SimMethod::Logic {
        return Err(usage(anyhow!("search seeds from forward or backward simulation")));
    }
    let net = load_network(&args.net.network)?;
    let evidence = parse_evidence(&net, &args.net.evidence)?;
    let mut ga = match &args.config {
        Some(path) => read_config_lenient(path)?.1,
        None => GaParams::default(),
    };
    if let Some(v) = args.generation_size {
        ga.generation_size = v;
    }
    if let Some(v) = args.breeding_size {
        ga.breeding_size = v;
    }
    if let Some(v) = args.crossover_prob {
        ga.crossover_prob = v;
    }
    if let Some(v) = args.mutation_prob {
        ga.mutation_prob = v;
    }
    if let Some(v) = args.max_radius {
        ga.max_radius = v;
    }
    ga.validate().map_err(usage)?;
    let settings = RunSettings {
        method: sim_method(args.method, true),
        ga,
        stride: args.stride,
        ..RunSettings::default()
    };
    let phase = PhasePlan {
        evidence,
        trials: args.trials,
        generations: args.generations,
    };
    traced_run(cli, &net, phase, &settings)
}

fn experiment(cli: &Cli, args: &ExperimentArgs) -> anyhow::Result<()> {
    let cfg = match read_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) if e.is::<bnsim_harness::config::ConfigError>() => return Err(usage(e)),
        Err(e) => return Err(e),
    };
    let net = match &cfg.network {
        NetworkSource::Demo => parse_network(DEMO_NETWORK)?,
        NetworkSource::File(path) => read_network_file(path)?,
        NetworkSource::Generated => generate(&cfg.netgen, &mut cfg.netgen.rng())?,
    };
    let phases = cfg
        .phases
        .iter()
        .enumerate()
        .map(|(i, p)| {
            Ok(PhasePlan {
                evidence: Evidence::parse(&net, &p.evidence)
                    .map_err(|e| usage(anyhow!("phase {i}: {e}")))?,
                trials: p.trials,
                generations: p.generations,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let oracle: Option<Oracle> = match cfg.rmse {
        RmseMode::Off => None,
        RmseMode::Auto => oracle_for(&net, &phases, false)?,
        RmseMode::On => oracle_for(&net, &phases, true)?,
    };
    let settings = RunSettings {
        method: cfg.method,
        ga: cfg.ga.clone(),
        stride: cfg.stride,
        estimators: cfg.estimators,
        time_limit: cfg.time_limit,
    };

    let dir = out_dir(cli);
    let several = cfg.seeds.len() > 1;
    let mut summaries = Vec::new();
    for &seed in &cfg.seeds {
        let run = run_phases(&net, &phases, &settings, oracle.as_ref(), seed)?;
        let (trace_name, row_name) = if several {
            (format!("{}-seed{seed}-trace.csv", cfg.name), format!("{}/seed={seed}", cfg.name))
        } else {
            (format!("{}-trace.csv", cfg.name), cfg.name.clone())
        };
        let mut out = BufWriter::new(create(&dir, &trace_name)?);
        write_trace(&mut out, &run.trace)?;
        out.flush()?;
        summaries.push(summarize(&row_name, &phases, &settings, &run));
    }
    let mut out = BufWriter::new(create(&dir, &format!("{}-summary.csv", cfg.name))?);
    write_summary(&mut out, &summaries)?;
    out.flush()?;
    Ok(())
}

fn study(cli: &Cli, args: &StudyArgs) -> anyhow::Result<()> {
    let flags = &args.netgen;
    let mut flags_nodes = flags.nodes;
    if flags_nodes.is_none() && flags.config.is_none() {
        flags_nodes = Some(12);
    }
    let adjusted = NetGenFlags {
        nodes: flags_nodes,
        max_parents: flags.max_parents,
        zero_prob: flags.zero_prob,
        evidence_count: flags.evidence_count,
        config: flags.config.clone(),
    };
    let (cfg, ga) = netgen_config(cli, &adjusted)?;
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    let rmse = match args.rmse {
        RmseArg::Auto => RmseMode::Auto,
        RmseArg::On => RmseMode::On,
        RmseArg::Off => RmseMode::Off,
    };
    let grid = standard_grid();
    let networks = prepare_networks(&cfg, args.networks, &grid, rmse)?;
    info!("running {} grid rows on {} networks", grid.len(), networks.len());
    let settings = RunSettings {
        ga: ga.unwrap_or_default(),
        stride: args.stride,
        ..RunSettings::default()
    };
    let report = run_random_study(&networks, &grid, &settings);
    let dir = out_dir(cli);
    let mut out = BufWriter::new(create(&dir, "study-summary.csv")?);
    write_study_summary(&mut out, &report.summary)?;
    out.flush()?;
    let mut out = BufWriter::new(create(&dir, "study-phases.csv")?);
    write_phase_table(&mut out, &report.phases)?;
    out.flush()?;
    Ok(())
}
