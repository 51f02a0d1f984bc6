//! Episode lifecycle, benchmark execution, persistence and the stdio
//! environment protocol.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, AgentKind, AgentSpec, WorldView};
use crate::geometry::Pose;
use crate::metrics::{
    self, EffortLedger, EpisodeScore, MetricReport, MetricsError, RewardTerms, SummaryRow, TTestPair, DEFAULT_ALPHA_GRID,
};
use crate::physics::{self, Contact, PhysicsConfig, PhysicsError, RobotPreset, WheelCommand, WorldState};
use crate::planner::{geodesic_field, shortest_path, GeodesicField, GridOptions, PathPolyline, PlanError, StaticMap};
use crate::scene::{place_clutter, sample_episode, EpisodeSpec, Scene, SceneError};
use crate::seed::{self, Stream};
use crate::sensors::{make_observation, Observation, SensorConfig};

pub const MAX_STEPS: u64 = 1000;
pub const DEFAULT_CLUTTER: usize = 10;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("episode is already done")]
    EpisodeDone,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Settings shared by every episode of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub robot: RobotPreset,
    pub max_steps: u64,
    /// Clutter objects added per episode unless the scene overrides it.
    pub clutter: usize,
    /// Interaction penalty in the reward.
    pub k_int: f64,
    pub alpha_grid: Vec<f64>,
    pub physics: PhysicsConfig,
    pub sensor: SensorConfig,
    pub grid: GridOptions,
    /// Store the full observation in every trace step.
    pub record_observations: bool,
}

impl EpisodeConfig {
    pub fn new(robot: RobotPreset) -> Self {
        Self {
            robot,
            max_steps: MAX_STEPS,
            clutter: DEFAULT_CLUTTER,
            k_int: 0.0,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            physics: PhysicsConfig::default(),
            sensor: SensorConfig::default(),
            grid: GridOptions::default(),
            record_observations: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.robot.validate().map_err(HarnessError::Config)?;
        if self.max_steps == 0 {
            return Err(HarnessError::Config("max_steps must be positive".into()));
        }
        if !(self.k_int.is_finite() && self.k_int >= 0.0) {
            return Err(HarnessError::Config(format!("k_int must be finite and non-negative, got {}", self.k_int)));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(MetricsError::AlphaOutOfRange(*a).into());
        }
        Ok(())
    }
}

/// Seeds used by one episode, all split from `master`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedChain {
    pub master: u64,
    pub clutter: u64,
    pub episode: u64,
    pub agent: u64,
}

impl SeedChain {
    pub fn new(master: u64) -> Self {
        Self {
            master,
            clutter: seed::split(master, Stream::Clutter),
            episode: seed::split(master, Stream::Episode),
            agent: seed::split(master, Stream::Agent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub t: u64,
    pub contacts: Vec<Contact>,
    pub interacted: bool,
    /// Geodesic distance to goal after the step.
    pub gd: f64,
    pub success: bool,
    pub robot_displacement: f64,
    pub reward_terms: RewardTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One live episode.
pub struct Env {
    config: EpisodeConfig,
    scene: Scene,
    spec: EpisodeSpec,
    seeds: SeedChain,
    map: StaticMap,
    field: GeodesicField,
    path: PathPolyline,
    l_star: f64,
    state: WorldState,
    ledger: EffortLedger,
    gd: f64,
    gd_start: f64,
    success: bool,
    done: bool,
}

impl Env {
    /// Builds the episode for `master_seed`: clutter placement, start and goal
    /// sampling, and the static-map distance field and oracle path.
    pub fn reset(config: &EpisodeConfig, base: &Scene, master_seed: u64) -> Result<(Env, Observation), HarnessError> {
        config.validate()?;
        let seeds = SeedChain::new(master_seed);
        let clutter = base.clutter.unwrap_or(config.clutter);
        let scene = place_clutter(base, clutter, seeds.clutter)?;
        let map = StaticMap::new(&scene, config.robot.body_radius, &config.grid);
        let mut spec = sample_episode(&scene, &map, seeds.episode)?;
        spec.clutter_seed = Some(seeds.clutter);
        spec.robot = config.robot.name.clone();
        let field = geodesic_field(&map.grid, spec.goal)?;
        let path = shortest_path(&field, spec.start.position())?;
        let gd_start = field.distance_at(spec.start.position()).unwrap_or(path.length());
        let l_star = path.length().max(gd_start);
        let state = WorldState::initial(&scene, spec.start);
        let mut masses = vec![config.robot.mass];
        masses.extend(scene.object_masses());
        let env = Env {
            config: config.clone(),
            ledger: EffortLedger::new(masses),
            scene,
            spec,
            seeds,
            map,
            field,
            path,
            l_star,
            state,
            gd: gd_start,
            gd_start,
            success: false,
            done: false,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn observe(&self) -> Observation {
        make_observation(&self.scene, &self.state, self.spec.goal, &self.path, &self.config.sensor)
    }

    pub fn step(&mut self, action: WheelCommand) -> Result<StepResult, HarnessError> {
        if self.done {
            return Err(HarnessError::EpisodeDone);
        }
        let outcome = physics::step(&self.scene, &self.config.robot, &self.config.physics, &self.state, action)?;
        self.ledger.record_step(&outcome)?;
        self.state = outcome.state;
        let pos = self.state.robot.position();
        // scraping a wall can put the robot centre in an occupied cell
        let gd_now = self.field.distance_at(pos).unwrap_or(self.gd);
        let reached = self.is_success();
        let first = reached && !self.success;
        self.success |= reached;
        let r = metrics::reward(self.gd, gd_now, outcome.interacted, first, self.config.k_int);
        self.gd = gd_now;
        self.done = reached || self.state.t >= self.config.max_steps;
        Ok(StepResult {
            observation: self.observe(),
            reward: r.total,
            done: self.done,
            info: StepInfo {
                t: self.state.t,
                contacts: outcome.contacts,
                interacted: outcome.interacted,
                gd: gd_now,
                success: self.success,
                robot_displacement: outcome.displacements[0],
                reward_terms: r,
            },
        })
    }

    fn is_success(&self) -> bool {
        self.state.robot.position().distance(self.spec.goal) < self.config.robot.convergence_threshold()
    }

    pub fn view(&self) -> WorldView<'_> {
        WorldView {
            scene: &self.scene,
            state: &self.state,
            preset: &self.config.robot,
            goal: self.spec.goal,
            static_grid: &self.map.grid,
        }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn spec(&self) -> &EpisodeSpec {
        &self.spec
    }

    pub fn seeds(&self) -> SeedChain {
        self.seeds
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn ledger(&self) -> &EffortLedger {
        &self.ledger
    }

    pub fn field(&self) -> &GeodesicField {
        &self.field
    }

    pub fn oracle_path(&self) -> &PathPolyline {
        &self.path
    }

    pub fn static_map(&self) -> &StaticMap {
        &self.map
    }

    pub fn l_star(&self) -> f64 {
        self.l_star
    }

    /// Geodesic distance at the start and after the latest step.
    pub fn gd(&self) -> (f64, f64) {
        (self.gd_start, self.gd)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn succeeded(&self) -> bool {
        self.success
    }

    pub fn report(&self) -> Result<MetricReport, HarnessError> {
        Ok(MetricReport::compute(&self.ledger, self.l_star, self.success, &self.config.alpha_grid)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Success,
    Timeout,
    AgentAbort,
    Error,
}

impl EpisodeStatus {
    pub fn name(self) -> &'static str {
        match self {
            EpisodeStatus::Success => "success",
            EpisodeStatus::Timeout => "timeout",
            EpisodeStatus::AgentAbort => "agent_abort",
            EpisodeStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub action: WheelCommand,
    /// Robot pose after the step.
    pub pose: Pose,
    pub reward: f64,
    pub contacts: Vec<Contact>,
    pub robot_displacement: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WallClock {
    pub elapsed_s: f64,
    pub steps_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scene: String,
    pub split: Split,
    pub agent: AgentSpec,
    pub param: f64,
    pub robot: String,
    /// Index of the seed within its cell.
    pub seed_index: usize,
    pub seeds: SeedChain,
    pub spec: Option<EpisodeSpec>,
    pub status: EpisodeStatus,
    pub error: Option<String>,
    pub trace: Vec<TraceStep>,
    pub final_state: Option<WorldState>,
    pub ledger: Option<EffortLedger>,
    pub report: Option<MetricReport>,
    /// Timing is machine-dependent and kept out of serialized records.
    #[serde(skip)]
    pub wall_clock: WallClock,
}

impl EpisodeRecord {
    pub fn file_name(&self) -> String {
        format!("{}_{}_{}_{}.json", self.scene, self.agent.kind.name(), self.param, self.seed_index)
    }

    pub fn score(&self) -> Option<EpisodeScore> {
        let report = self.report.as_ref()?;
        Some(EpisodeScore {
            agent: self.agent.kind.name().to_string(),
            robot: self.robot.clone(),
            k_param: self.param,
            success: report.success,
            p_eff: report.p_eff,
            e_eff: report.e_eff,
        })
    }

    pub fn actions(&self) -> Vec<WheelCommand> {
        self.trace.iter().map(|s| s.action).collect()
    }
}

/// Runs one episode of `agent_spec` and never fails: errors end up in the record.
///
/// `param` is the reward's interaction penalty and, for `cost_aware`, its lambda.
pub fn run_episode(config: &EpisodeConfig, scene: &Scene, agent_spec: &AgentSpec, seed: u64) -> EpisodeRecord {
    let mut record = EpisodeRecord {
        scene: scene.name.clone(),
        split: Split::Train,
        agent: agent_spec.clone(),
        param: config.k_int,
        robot: config.robot.name.clone(),
        seed_index: 0,
        seeds: SeedChain::new(seed),
        spec: None,
        status: EpisodeStatus::Error,
        error: None,
        trace: Vec::new(),
        final_state: None,
        ledger: None,
        report: None,
        wall_clock: WallClock::default(),
    };
    match agent_spec.build() {
        Ok(mut agent) => run_with_agent(config, scene, agent.as_mut(), seed, &mut record),
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

fn run_with_agent(config: &EpisodeConfig, scene: &Scene, agent: &mut dyn Agent, seed: u64, record: &mut EpisodeRecord) {
    let started = Instant::now();
    let (mut env, mut obs) = match Env::reset(config, scene, seed) {
        Ok(x) => x,
        Err(e) => {
            record.error = Some(e.to_string());
            return;
        }
    };
    record.spec = Some(env.spec().clone());
    agent.reset(&env.view());
    let mut status = EpisodeStatus::Timeout;
    while !env.is_done() {
        let action = match agent.act(&obs, &env.view()) {
            Ok(a) => a,
            Err(e) => {
                status = EpisodeStatus::AgentAbort;
                record.error = Some(e.to_string());
                break;
            }
        };
        match env.step(action) {
            Ok(res) => {
                record.trace.push(TraceStep {
                    action,
                    pose: env.state().robot,
                    reward: res.reward,
                    contacts: res.info.contacts,
                    robot_displacement: res.info.robot_displacement,
                    observation: config.record_observations.then(|| res.observation.clone()),
                });
                obs = res.observation;
            }
            Err(e) => {
                status = EpisodeStatus::Error;
                record.error = Some(e.to_string());
                break;
            }
        }
    }
    if env.succeeded() {
        status = EpisodeStatus::Success;
    }
    record.status = status;
    record.final_state = Some(env.state().clone());
    record.ledger = Some(env.ledger().clone());
    if status != EpisodeStatus::Error {
        match env.report() {
            Ok(r) => record.report = Some(r),
            Err(e) => {
                record.status = EpisodeStatus::Error;
                record.error = Some(e.to_string());
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let steps = record.trace.len() as f64;
    record.wall_clock = WallClock { elapsed_s: elapsed, steps_per_s: if elapsed > 0.0 { steps / elapsed } else { 0.0 } };
}

/// Re-simulates `actions` from the episode built for `seed`.
pub fn replay(
    config: &EpisodeConfig,
    scene: &Scene,
    seed: u64,
    actions: &[WheelCommand],
) -> Result<(WorldState, EffortLedger), HarnessError> {
    let (mut env, _) = Env::reset(config, scene, seed)?;
    for a in actions {
        env.step(*a)?;
    }
    Ok((env.state().clone(), env.ledger().clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub episode: EpisodeConfig,
    pub train: Vec<Scene>,
    pub test: Vec<Scene>,
    pub agents: Vec<AgentKind>,
    pub params: Vec<f64>,
    pub seeds_per_cell: usize,
    pub master_seed: u64,
    pub workers: usize,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.episode.validate()?;
        if self.train.is_empty() && self.test.is_empty() {
            return Err(HarnessError::Config("no scenes".into()));
        }
        if self.agents.is_empty() || self.params.is_empty() || self.seeds_per_cell == 0 {
            return Err(HarnessError::Config("need at least one agent, parameter and seed".into()));
        }
        if let Some(p) = self.params.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(HarnessError::Config(format!("parameters must be finite and non-negative, got {p}")));
        }
        let mut names: Vec<&str> = self.train.iter().chain(&self.test).map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::Config("scene names must be unique and train/test disjoint".into()));
        }
        Ok(())
    }

    /// Episode master seed for seed index `i` on `scene`, shared by all agents
    /// and parameters so cells are paired.
    pub fn episode_seed(&self, scene: &str, i: usize) -> u64 {
        seed::derive(seed::derive(self.master_seed, seed::hash_name(scene)), i as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTestRow {
    pub agent: String,
    pub robot: String,
    pub k_param: f64,
    pub alpha: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_mean: f64,
    pub test_mean: f64,
    pub test: TTestPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub records: Vec<EpisodeRecord>,
    pub summary: Vec<SummaryRow>,
    pub ttest: Vec<TrainTestRow>,
    pub errors: usize,
}

/// Alpha used for the train/test comparison.
pub const TTEST_ALPHA: f64 = 0.5;

/// Runs every (scene, agent, parameter, seed) cell on a pool of
/// `config.workers` threads. Records come back in job order regardless of the
/// worker count.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<ResultSet, HarnessError> {
    config.validate()?;
    let mut jobs = Vec::new();
    for (split, scenes) in [(Split::Train, &config.train), (Split::Test, &config.test)] {
        for scene in scenes.iter() {
            for &kind in &config.agents {
                for &param in &config.params {
                    for i in 0..config.seeds_per_cell {
                        jobs.push((split, scene, kind, param, i));
                    }
                }
            }
        }
    }
    let run = |&(split, scene, kind, param, i): &(Split, &Scene, AgentKind, f64, usize)| {
        let mut episode = config.episode.clone();
        episode.k_int = param;
        let spec = AgentSpec::new(kind, param);
        let mut record = run_episode(&episode, scene, &spec, config.episode_seed(&scene.name, i));
        record.split = split;
        record.seed_index = i;
        record
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let records: Vec<EpisodeRecord> = pool.install(|| jobs.par_iter().map(run).collect());
    Ok(summarize(records, &config.episode.alpha_grid))
}

/// Aggregates records into the summary and train/test comparison.
pub fn summarize(records: Vec<EpisodeRecord>, alphas: &[f64]) -> ResultSet {
    let errors = records.iter().filter(|r| r.status == EpisodeStatus::Error).count();
    let scores: Vec<EpisodeScore> = records.iter().filter_map(EpisodeRecord::score).collect();
    let summary = metrics::aggregate(&scores, alphas);
    let ttest = train_test(&records);
    ResultSet { records, summary, ttest, errors }
}

fn train_test(records: &[EpisodeRecord]) -> Vec<TrainTestRow> {
    let mut keys: Vec<(String, String, f64)> = records
        .iter()
        .map(|r| (r.agent.kind.name().to_string(), r.robot.clone(), r.param))
        .collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    keys.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1 && a.2.to_bits() == b.2.to_bits());
    let mut rows = Vec::new();
    for (agent, robot, k) in keys {
        let sample = |split: Split| -> Vec<f64> {
            let mut v: Vec<(&str, usize, f64)> = records
                .iter()
                .filter(|r| {
                    r.split == split && r.agent.kind.name() == agent && r.robot == robot && r.param.to_bits() == k.to_bits()
                })
                .filter_map(|r| r.report.as_ref().map(|m| (r.scene.as_str(), r.seed_index, m.ins_at(TTEST_ALPHA))))
                .collect();
            v.sort_by(|a, b| a.0.cmp(b.0).then(a.1.cmp(&b.1)));
            v.into_iter().map(|x| x.2).collect()
        };
        let (train, test) = (sample(Split::Train), sample(Split::Test));
        if train.is_empty() || test.is_empty() {
            continue;
        }
        rows.push(TrainTestRow {
            agent,
            robot,
            k_param: k,
            alpha: TTEST_ALPHA,
            n_train: train.len(),
            n_test: test.len(),
            train_mean: metrics::mean_std(&train).0,
            test_mean: metrics::mean_std(&test).0,
            test: metrics::t_test(&train, &test),
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub agent: String,
    pub robot: String,
    pub k_param: f64,
    pub p_eff_mean: f64,
    pub e_eff_mean: f64,
    pub success_rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub agent: String,
    pub robot: String,
    pub k_param: f64,
    pub alpha: f64,
    pub ins_mean: f64,
    pub ins_std: f64,
}

/// One trade-off row per (agent, robot, parameter), in summary order.
pub fn tradeoff_rows(summary: &[SummaryRow]) -> Vec<TradeoffRow> {
    let mut rows: Vec<TradeoffRow> = Vec::new();
    for s in summary {
        let same = rows
            .last()
            .is_some_and(|r| r.agent == s.agent && r.robot == s.robot && r.k_param.to_bits() == s.k_param.to_bits());
        if !same {
            rows.push(TradeoffRow {
                agent: s.agent.clone(),
                robot: s.robot.clone(),
                k_param: s.k_param,
                p_eff_mean: s.p_eff_mean,
                e_eff_mean: s.e_eff_mean,
                success_rate: s.success_rate,
                n: s.n,
            });
        }
    }
    rows
}

pub fn alpha_rows(summary: &[SummaryRow]) -> Vec<AlphaRow> {
    summary
        .iter()
        .map(|s| AlphaRow {
            agent: s.agent.clone(),
            robot: s.robot.clone(),
            k_param: s.k_param,
            alpha: s.alpha,
            ins_mean: s.ins_mean,
            ins_std: s.ins_std,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<_, _>>()?;
    Ok(rows)
}

/// Writes the summary tables (`summary.csv`, `tradeoff.csv`,
/// `ins_vs_alpha.csv`, `ttest.json`).
pub fn write_tables(dir: &Path, results: &ResultSet) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("summary.csv"), &results.summary)?;
    write_csv(&dir.join("tradeoff.csv"), &tradeoff_rows(&results.summary))?;
    write_csv(&dir.join("ins_vs_alpha.csv"), &alpha_rows(&results.summary))?;
    fs::write(dir.join("ttest.json"), serde_json::to_string_pretty(&results.ttest)? + "\n")?;
    Ok(())
}

/// Writes per-episode records under `dir/records/`, `records.jsonl`, and the
/// summary tables.
pub fn write_results(dir: &Path, results: &ResultSet) -> Result<(), HarnessError> {
    let rec_dir = dir.join("records");
    fs::create_dir_all(&rec_dir)?;
    let mut lines = String::new();
    for r in &results.records {
        fs::write(rec_dir.join(r.file_name()), serde_json::to_string_pretty(r)? + "\n")?;
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    fs::write(dir.join("records.jsonl"), lines)?;
    write_tables(dir, results)
}

pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, HarnessError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(HarnessError::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub steps: u64,
    pub episodes: u64,
    pub elapsed_s: f64,
    pub steps_per_s: f64,
}

/// Times `steps` environment steps (physics plus observation) on one thread
/// under a fixed open-loop drive pattern. Episode resets are not timed.
pub fn measure_throughput(config: &EpisodeConfig, scene: &Scene, steps: u64, seed: u64) -> Result<Throughput, HarnessError> {
    let v = 0.8 * config.robot.max_wheel_speed;
    let mut episode_seed = seed;
    let (mut env, _) = Env::reset(config, scene, episode_seed)?;
    let mut episodes = 1;
    let mut elapsed = 0.0;
    for i in 0..steps {
        if env.is_done() {
            episode_seed = seed::derive(episode_seed, 1);
            env = Env::reset(config, scene, episode_seed)?.0;
            episodes += 1;
        }
        // weave so the robot meets walls and objects
        let turn = if (i / 40) % 2 == 0 { 0.7 } else { 1.0 };
        let action = WheelCommand::new(v * turn, v);
        let t0 = Instant::now();
        std::hint::black_box(env.step(action)?);
        elapsed += t0.elapsed().as_secs_f64();
    }
    Ok(Throughput { steps, episodes, elapsed_s: elapsed, steps_per_s: steps as f64 / elapsed.max(1e-12) })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Request {
    op: String,
    #[serde(default)]
    action: Option<[f64; 2]>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct Response<'a> {
    observation: &'a Observation,
    reward: f64,
    done: bool,
    info: serde_json::Value,
}

/// Serves the environment over newline-delimited JSON.
///
/// Requests are `{"op":"reset"}` (optionally with `"seed"`) and
/// `{"op":"step","action":[wl,wr]}`; each gets one response line
/// `{observation, reward, done, info}`, or `{"error": ...}`.
pub fn serve_ndjson<R: BufRead, W: Write>(
    config: &EpisodeConfig,
    scene: &Scene,
    seed: u64,
    reader: R,
    mut writer: W,
) -> Result<(), HarnessError> {
    let mut env: Option<Env> = None;
    let mut resets = 0u64;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match handle_request(config, scene, seed, &mut env, &mut resets, &line) {
            Ok(v) => v,
            Err(e) => serde_json::json!({ "error": e.to_string() }),
        };
        serde_json::to_writer(&mut writer, &reply)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

fn handle_request(
    config: &EpisodeConfig,
    scene: &Scene,
    seed: u64,
    env: &mut Option<Env>,
    resets: &mut u64,
    line: &str,
) -> Result<serde_json::Value, HarnessError> {
    let req: Request = serde_json::from_str(line)?;
    match req.op.as_str() {
        "reset" => {
            let s = req.seed.unwrap_or_else(|| seed::derive(seed, *resets));
            *resets += 1;
            let (e, obs) = Env::reset(config, scene, s)?;
            let info = serde_json::json!({
                "spec": e.spec(),
                "seed": s,
                "gd": e.gd().0,
                "l_star": e.l_star(),
            });
            let v = serde_json::to_value(Response { observation: &obs, reward: 0.0, done: false, info })?;
            *env = Some(e);
            Ok(v)
        }
        "step" => {
            let e = env.as_mut().ok_or_else(|| HarnessError::Config("step before reset".into()))?;
            let [l, r] = req.action.ok_or_else(|| HarnessError::Config("step needs an action".into()))?;
            let res = e.step(WheelCommand::new(l, r))?;
            let mut info = serde_json::to_value(&res.info)?;
            if res.done {
                info["report"] = serde_json::to_value(e.report()?)?;
            }
            Ok(serde_json::to_value(Response { observation: &res.observation, reward: res.reward, done: res.done, info })?)
        }
        other => Err(HarnessError::Config(format!("unknown op `{other}`"))),
    }
}
