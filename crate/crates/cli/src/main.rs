use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use inav_core::agents::{AgentKind, AgentSpec};
use inav_core::bundled;
use inav_core::harness::{
    self, measure_throughput, run_benchmark, run_episode, summarize, BenchmarkConfig, EpisodeConfig, EpisodeStatus,
    ResultSet,
};
use inav_core::metrics::DEFAULT_ALPHA_GRID;
use inav_core::physics::RobotPreset;
use inav_core::planner::{build_grid, GridOptions};
use inav_core::scene::{generate_scene, load_scene, GenConfig, Scene};
use inav_core::seed;

#[derive(Parser)]
#[command(name = "inav", version, about = "Interactive navigation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random multi-room scenes.
    Generate(GenerateArgs),
    /// Run a single episode.
    Run(RunArgs),
    /// Run a benchmark sweep over scenes, agents, parameters and seeds.
    Sweep(SweepArgs),
    /// Re-aggregate the records of a previous sweep.
    Report(ReportArgs),
    /// Time environment stepping (physics plus observation) on one thread.
    Bench(BenchArgs),
    /// Serve the environment as newline-delimited JSON on stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Robot {
    Turtlebot,
    Fetch,
}

impl Robot {
    fn preset(self) -> RobotPreset {
        match self {
            Robot::Turtlebot => RobotPreset::turtlebot(),
            Robot::Fetch => RobotPreset::fetch(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Agent {
    PathFollower,
    Avoider,
    CostAware,
}

impl Agent {
    fn kind(self) -> AgentKind {
        match self {
            Agent::PathFollower => AgentKind::PathFollower,
            Agent::Avoider => AgentKind::Avoider,
            Agent::CostAware => AgentKind::CostAware,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    rooms: u32,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    width: f64,
    #[arg(long, default_value_t = 8.0)]
    height: f64,
    /// Furniture pieces per 4 m² of floor.
    #[arg(long, default_value_t = 0.5)]
    furniture_density: f64,
    #[arg(long, default_value_t = 0.5)]
    door_fraction: f64,
    /// Name prefix for the generated scenes.
    #[arg(long, default_value = "scene")]
    prefix: String,
    #[arg(long, env = "INAV_BENCH_DIR")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct EpisodeArgs {
    #[arg(long, value_enum, default_value = "turtlebot")]
    robot: Robot,
    /// Comma-separated alpha values for INS.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHA_GRID.to_vec())]
    alpha_grid: Vec<f64>,
    /// Clutter objects per episode (scenes may override).
    #[arg(long)]
    clutter: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
}

impl EpisodeArgs {
    fn config(&self) -> EpisodeConfig {
        let mut c = EpisodeConfig::new(self.robot.preset());
        c.alpha_grid = self.alpha_grid.clone();
        if let Some(n) = self.clutter {
            c.clutter = n;
        }
        if let Some(n) = self.max_steps {
            c.max_steps = n;
        }
        c
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scene file or bundled scene name.
    #[arg(long)]
    scene: String,
    #[arg(long, value_enum, default_value = "path_follower")]
    agent: Agent,
    /// Interaction penalty k_int; also lambda for cost_aware.
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    episode: EpisodeArgs,
    /// Keep observations in the written trace.
    #[arg(long)]
    record_observations: bool,
    /// Directory for the episode record.
    #[arg(long, env = "INAV_BENCH_DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Training scene (file or bundled name); repeatable.
    #[arg(long = "scene", required = true)]
    scenes: Vec<String>,
    /// Held-out scene; repeatable.
    #[arg(long = "test-scene")]
    test_scenes: Vec<String>,
    /// Agents to run; defaults to all three.
    #[arg(long = "agent", value_enum)]
    agents: Vec<Agent>,
    #[arg(long = "param", value_delimiter = ',', default_values_t = vec![0.0, 0.1, 1.0])]
    params: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    seeds_per_cell: usize,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    episode: EpisodeArgs,
    #[arg(long, env = "INAV_BENCH_DIR", default_value = "inav_results")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep output directory containing records.jsonl.
    #[arg(long = "in")]
    input: PathBuf,
    /// Where to write the tables; defaults to the input directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ALPHA_GRID.to_vec())]
    alpha_grid: Vec<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "four_room")]
    scene: String,
    #[arg(long, default_value_t = 20_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    episode: EpisodeArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    scene: String,
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    episode: EpisodeArgs,
}

/// Errors that map to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve_scene(arg: &str) -> Result<Scene> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut scene = load_scene(&text).with_context(|| format!("loading {}", path.display()))?;
        if scene.name.is_empty() {
            scene.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        return Ok(scene);
    }
    bundled::scene(arg).ok_or_else(|| usage(format!("scene `{arg}` is neither a file nor a bundled scene")))
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(usage(format!("alpha must lie in [0, 1], got {a}")));
    }
    Ok(())
}

fn check_param(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(usage(format!("--param must be finite and non-negative, got {p}")));
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let cfg = GenConfig {
        rooms: args.rooms as usize,
        width: args.width,
        height: args.height,
        furniture_density: args.furniture_density,
        door_fraction: args.door_fraction,
        ..GenConfig::default()
    };
    cfg.validate().map_err(usage)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for i in 0..args.count {
        let scene_seed = seed::derive(seed::split(args.seed, seed::Stream::Scene), i as u64);
        let mut scene = generate_scene(&cfg, scene_seed)?;
        scene.name = format!("{}_{i:03}", args.prefix);
        let free = build_grid(&scene, 0.0, true, None, &GridOptions::default());
        let res = free.frame.resolution;
        let free_area = (free.cells.len() - free.occupied_count()) as f64 * res * res;
        let path = args.out.join(format!("{}.json", scene.name));
        fs::write(&path, scene.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{}: rooms {} objects {} doors {} free area {:.2} m2",
            path.display(),
            args.rooms,
            scene.objects.len(),
            scene.doors.len(),
            free_area
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    check_alphas(&args.episode.alpha_grid)?;
    check_param(args.param)?;
    let scene = resolve_scene(&args.scene)?;
    let mut config = args.episode.config();
    config.k_int = args.param;
    config.record_observations = args.record_observations;
    let spec = AgentSpec::new(args.agent.kind(), args.param);
    let record = run_episode(&config, &scene, &spec, args.seed);
    println!("scene {} agent {} param {} robot {}", record.scene, spec.kind.name(), args.param, config.robot.name);
    println!("status {}", record.status.name());
    if let Some(e) = &record.error {
        println!("error {e}");
    }
    println!("steps {}", record.trace.len());
    if let Some(r) = &record.report {
        println!("P_eff {:.4}", r.p_eff);
        println!("E_eff {:.4}", r.e_eff);
        for (a, v) in &r.ins {
            println!("INS_{a} {v:.4}");
        }
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(record.file_name());
        fs::write(&path, serde_json::to_string_pretty(&record)? + "\n")?;
        println!("record {}", path.display());
    }
    Ok(match record.status {
        EpisodeStatus::Error | EpisodeStatus::AgentAbort => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    })
}

fn print_summary(results: &ResultSet) {
    println!("{:<14} {:<10} {:>6} {:>5} {:>8} {:>8} {:>8} {:>8} {:>4}", "agent", "robot", "param", "alpha", "INS", "std", "P_eff", "E_eff", "n");
    for r in &results.summary {
        println!(
            "{:<14} {:<10} {:>6} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>4}",
            r.agent, r.robot, r.k_param, r.alpha, r.ins_mean, r.ins_std, r.p_eff_mean, r.e_eff_mean, r.n
        );
    }
    for t in &results.ttest {
        println!(
            "train/test {} {} {}: welch p {:.4}, paired p {:.4}",
            t.agent, t.robot, t.k_param, t.test.welch.p, t.test.paired.p
        );
    }
    if results.errors > 0 {
        println!("{} episode(s) failed", results.errors);
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    check_alphas(&args.episode.alpha_grid)?;
    for p in &args.params {
        check_param(*p)?;
    }
    if args.seeds_per_cell == 0 {
        return Err(usage("--seeds-per-cell must be positive"));
    }
    let train = args.scenes.iter().map(|s| resolve_scene(s)).collect::<Result<Vec<_>>>()?;
    let test = args.test_scenes.iter().map(|s| resolve_scene(s)).collect::<Result<Vec<_>>>()?;
    let agents = if args.agents.is_empty() {
        AgentKind::ALL.to_vec()
    } else {
        args.agents.iter().map(|a| a.kind()).collect()
    };
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let config = BenchmarkConfig {
        episode: args.episode.config(),
        train,
        test,
        agents,
        params: args.params.clone(),
        seeds_per_cell: args.seeds_per_cell,
        master_seed: args.seed,
        workers,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let results = run_benchmark(&config)?;
    harness::write_results(&args.out, &results)?;
    print_summary(&results);
    println!("{} records written to {}", results.records.len(), args.out.display());
    Ok(if results.errors > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    check_alphas(&args.alpha_grid)?;
    let path = args.input.join("records.jsonl");
    if !path.is_file() {
        return Err(usage(format!("{} not found", path.display())));
    }
    let records = harness::read_records(&path)?;
    let results = summarize(records, &args.alpha_grid);
    let out = args.out.unwrap_or(args.input);
    harness::write_tables(&out, &results)?;
    print_summary(&results);
    Ok(if results.errors > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let scene = resolve_scene(&args.scene)?;
    if args.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    let t = measure_throughput(&args.episode.config(), &scene, args.steps, args.seed)?;
    println!(
        "{} steps over {} episode(s) in {:.3} s: {:.0} steps/s",
        t.steps, t.episodes, t.elapsed_s, t.steps_per_s
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(args: ServeArgs) -> Result<ExitCode> {
    check_param(args.param)?;
    let scene = resolve_scene(&args.scene)?;
    let mut config = args.episode.config();
    config.k_int = args.param;
    harness::serve_ndjson(&config, &scene, args.seed, io::stdin().lock(), io::stdout().lock())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
