//! Scripted baseline agents.
//!
//! `path_follower` drives the static-map shortest path and pushes whatever is
//! in the way. `avoider` replans around every movable object and stops when no
//! such path exists. `cost_aware` charges `lambda * mu * m * g` per entered
//! cell under an object and refuses objects the robot cannot push at all.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::physics::{twist_to_wheels, RobotPreset, Twist, WheelCommand, WorldState};
use crate::planner::{cost_field, geodesic_field, shortest_path, waypoints, OccupancyGrid, PathPolyline, PlanError};
use crate::scene::Scene;
use crate::sensors::Observation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid agent spec: {0}")]
    InvalidSpec(String),
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    PathFollower,
    Avoider,
    CostAware,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::PathFollower, AgentKind::Avoider, AgentKind::CostAware];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::PathFollower => "path_follower",
            AgentKind::Avoider => "avoider",
            AgentKind::CostAware => "cost_aware",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AgentError::InvalidSpec(format!("unknown agent `{s}`")))
    }
}

/// Pure-pursuit controller settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub lookahead: f64,
    /// Upper bound on forward speed, m/s; also capped at 80% of the robot's top speed.
    pub cruise_speed: f64,
    /// Heading errors above this (rad) turn in place.
    pub turn_in_place: f64,
    /// Angular speed while turning in place, rad/s.
    pub turn_rate: f64,
    /// Forward speed ramps down inside this distance to the goal.
    pub slow_radius: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self { lookahead: 0.3, cruise_speed: 0.5, turn_in_place: 0.8, turn_rate: 1.5, slow_radius: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    /// Interaction cost weight; only read by `cost_aware`.
    pub lambda: f64,
    pub gains: ControllerGains,
    /// Steps between replans for the planning agents.
    pub replan_period: u64,
    /// Extra clearance around movable objects when planning, m.
    pub object_margin: f64,
    /// Whether the agent reads true object poses from the simulator.
    pub oracle_grid: bool,
}

impl AgentSpec {
    pub fn new(kind: AgentKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            gains: ControllerGains::default(),
            replan_period: 10,
            object_margin: 0.1,
            oracle_grid: kind != AgentKind::PathFollower,
        }
    }

    pub fn path_follower() -> Self {
        Self::new(AgentKind::PathFollower, 0.0)
    }

    pub fn avoider() -> Self {
        Self::new(AgentKind::Avoider, 0.0)
    }

    pub fn cost_aware(lambda: f64) -> Self {
        Self::new(AgentKind::CostAware, lambda)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let g = &self.gains;
        let values = [self.lambda, self.object_margin, g.lookahead, g.cruise_speed, g.turn_in_place, g.turn_rate, g.slow_radius];
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AgentError::InvalidSpec("parameters must be finite and non-negative".into()));
        }
        if self.replan_period == 0 {
            return Err(AgentError::InvalidSpec("replan period must be at least 1".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Agent>, AgentError> {
        self.validate()?;
        Ok(match self.kind {
            AgentKind::PathFollower => Box::new(PathFollower { gains: self.gains.clone() }),
            AgentKind::Avoider | AgentKind::CostAware => Box::new(PlanningAgent::new(self.clone())),
        })
    }
}

/// Privileged simulator access handed to agents alongside the observation.
pub struct WorldView<'a> {
    pub scene: &'a Scene,
    pub state: &'a WorldState,
    pub preset: &'a RobotPreset,
    pub goal: Vec2,
    /// Static-only occupancy grid inflated by the robot radius.
    pub static_grid: &'a OccupancyGrid,
}

pub trait Agent: Send {
    fn reset(&mut self, _view: &WorldView) {}

    fn act(&mut self, obs: &Observation, view: &WorldView) -> Result<WheelCommand, AgentError>;

    /// The path the agent is currently following, if it plans its own.
    fn current_plan(&self) -> Option<&PathPolyline> {
        None
    }
}

/// Steers toward the first waypoint at least `lookahead` away (the goal when
/// none is), turning in place on large heading errors.
pub fn pursue(waypoints_local: &[Vec2], goal_local: Vec2, preset: &RobotPreset, gains: &ControllerGains) -> WheelCommand {
    let target = waypoints_local
        .iter()
        .copied()
        .find(|w| w.norm() >= gains.lookahead)
        .unwrap_or(goal_local);
    let d2 = target.norm_sq();
    if d2 < 1e-12 {
        return WheelCommand::new(0.0, 0.0);
    }
    let heading_error = target.y.atan2(target.x);
    let twist = if heading_error.abs() > gains.turn_in_place {
        Twist { v: 0.0, omega: gains.turn_rate.copysign(heading_error) }
    } else {
        let cruise = gains.cruise_speed.min(0.8 * preset.max_linear_speed());
        let ramp = (goal_local.norm() / gains.slow_radius).clamp(0.5, 1.0);
        let v = cruise * ramp;
        let omega = (v * 2.0 * target.y / d2).clamp(-2.0 * gains.turn_rate, 2.0 * gains.turn_rate);
        Twist { v, omega }
    };
    twist_to_wheels(twist, preset)
}

/// Follows the oracle waypoints in the observation.
#[derive(Debug, Clone)]
pub struct PathFollower {
    pub gains: ControllerGains,
}

impl Agent for PathFollower {
    fn act(&mut self, obs: &Observation, view: &WorldView) -> Result<WheelCommand, AgentError> {
        Ok(pursue(&obs.waypoints_local, obs.goal_local, view.preset, &self.gains))
    }
}

/// Avoider and cost-aware agents: periodic replanning on a grid that knows
/// the current object poses.
#[derive(Debug, Clone)]
pub struct PlanningAgent {
    spec: AgentSpec,
    path: Option<PathPolyline>,
    steps: u64,
}

impl PlanningAgent {
    pub fn new(spec: AgentSpec) -> Self {
        Self { spec, path: None, steps: 0 }
    }

    /// Plans from the robot's current position; `None` when no path exists.
    pub fn plan(&self, view: &WorldView) -> Option<PathPolyline> {
        let inflation = view.preset.body_radius + self.spec.object_margin;
        let start = view.state.robot.position();
        let field = match self.spec.kind {
            AgentKind::CostAware => {
                let penalty = interaction_penalty(view, self.spec.lambda, inflation);
                cost_field(view.static_grid, view.goal, Some(penalty))
            }
            _ => {
                let mut grid = view.static_grid.clone();
                for (o, pose) in view.scene.objects.iter().zip(&view.state.objects) {
                    grid.mark(&o.shape_at(pose), inflation);
                }
                geodesic_field(&grid, view.goal)
            }
        };
        field.and_then(|f| shortest_path(&f, start)).ok()
    }
}

/// Per-cell entry penalty: `lambda * F_s` under each pushable object's
/// inflated footprint, infinite under objects heavier than the robot can push.
pub fn interaction_penalty(view: &WorldView, lambda: f64, inflation: f64) -> Vec<f64> {
    let frame = &view.static_grid.frame;
    let mut penalty = vec![0.0; frame.len()];
    for (o, pose) in view.scene.objects.iter().zip(&view.state.objects) {
        let fs = o.friction_force();
        let value = if view.preset.can_push(fs) { lambda * fs } else { f64::INFINITY };
        frame.rasterize(&o.shape_at(pose), inflation, |i| penalty[i] += value);
    }
    penalty
}

impl Agent for PlanningAgent {
    fn reset(&mut self, _view: &WorldView) {
        self.path = None;
        self.steps = 0;
    }

    fn act(&mut self, _obs: &Observation, view: &WorldView) -> Result<WheelCommand, AgentError> {
        if self.steps % self.spec.replan_period == 0 {
            self.path = self.plan(view);
        }
        self.steps += 1;
        let Some(path) = &self.path else {
            return Ok(WheelCommand::new(0.0, 0.0));
        };
        let pose = view.state.robot;
        let local: Vec<Vec2> = waypoints(path, 0.2, 10, pose.position())
            .into_iter()
            .map(|w| pose.inverse_transform(w))
            .collect();
        Ok(pursue(&local, pose.inverse_transform(view.goal), view.preset, &self.spec.gains))
    }

    fn current_plan(&self) -> Option<&PathPolyline> {
        self.path.as_ref()
    }
}
