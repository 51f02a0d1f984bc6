//! Fixed-timestep quasi-static simulation of a differential-drive robot
//! pushing movable objects and hinged doors.
//!
//! Objects have no momentum: they translate only while the robot (directly or
//! through a chain of touching objects) pushes them, and only when the summed
//! friction threshold `mu * m * g` of the chain does not exceed the robot's
//! push capacity. A pushed object slides along walls and door leaves it runs
//! into. Forces are recorded once per contacted body per step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{penetration, wrap_angle, Pose, Shape, Vec2};
use crate::scene::{Scene, DOOR_HALF_THICKNESS};
use crate::GRAVITY;

/// Overlaps shallower than this are treated as touching.
const CONTACT_EPS: f64 = 1e-9;
/// Residual overlap tolerated after a push before it counts as wedged.
const WEDGE_TOL: f64 = 1e-6;
/// Push/slide relaxation passes; sliding along a wall converges geometrically.
const PUSH_ITERATIONS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("non-finite wheel command ({left}, {right})")]
    NonFiniteAction { left: f64, right: f64 },
    #[error("timestep must be positive and finite, got {0}")]
    InvalidTimestep(f64),
    #[error("robot moved {displacement:.4} m in one substep (limit {limit:.4} m); use a smaller dt or more substeps")]
    Tunneling { displacement: f64, limit: f64 },
    #[error("world state does not match scene: {0}")]
    StateMismatch(String),
}

/// Differential-drive platform parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotPreset {
    pub name: String,
    pub body_radius: f64,
    pub mass: f64,
    pub wheel_radius: f64,
    pub wheel_base: f64,
    /// rad/s
    pub max_wheel_speed: f64,
    /// Largest force the body can apply, newtons.
    pub push_capacity: f64,
}

impl RobotPreset {
    /// Light TurtleBot-like base.
    pub fn turtlebot() -> Self {
        Self {
            name: "turtlebot".into(),
            body_radius: 0.18,
            mass: 6.3,
            wheel_radius: 0.038,
            wheel_base: 0.23,
            max_wheel_speed: 13.0,
            push_capacity: 15.0,
        }
    }

    /// Heavy Fetch-like base.
    pub fn fetch() -> Self {
        Self {
            name: "fetch".into(),
            body_radius: 0.28,
            mass: 113.0,
            wheel_radius: 0.0613,
            wheel_base: 0.372,
            max_wheel_speed: 16.3,
            push_capacity: 250.0,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "turtlebot" => Some(Self::turtlebot()),
            "fetch" => Some(Self::fetch()),
            _ => None,
        }
    }

    /// Goal convergence threshold: the body width.
    pub fn convergence_threshold(&self) -> f64 {
        2.0 * self.body_radius
    }

    pub fn max_linear_speed(&self) -> f64 {
        self.max_wheel_speed * self.wheel_radius
    }

    /// `G = m_0 g`.
    pub fn gravity_force(&self) -> f64 {
        self.mass * GRAVITY
    }

    /// Whether a chain with summed friction threshold `friction_force` can be pushed.
    pub fn can_push(&self, friction_force: f64) -> bool {
        friction_force <= self.push_capacity
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("body_radius", self.body_radius),
            ("mass", self.mass),
            ("wheel_radius", self.wheel_radius),
            ("wheel_base", self.wheel_base),
            ("max_wheel_speed", self.max_wheel_speed),
            ("push_capacity", self.push_capacity),
        ];
        for (n, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{n} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    pub dt: f64,
    pub substeps: u32,
    /// Penalty stiffness for wall contact forces, N/m.
    pub wall_stiffness: f64,
    pub max_chain_depth: usize,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { dt: 0.1, substeps: 10, wall_stiffness: 1e4, max_chain_depth: 3 }
    }
}

/// Wheel joint velocities, rad/s. Serialized as `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct WheelCommand {
    pub left: f64,
    pub right: f64,
}

impl From<[f64; 2]> for WheelCommand {
    fn from(v: [f64; 2]) -> Self {
        WheelCommand { left: v[0], right: v[1] }
    }
}

impl From<WheelCommand> for [f64; 2] {
    fn from(c: WheelCommand) -> Self {
        [c.left, c.right]
    }
}

impl WheelCommand {
    pub fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn is_finite(&self) -> bool {
        self.left.is_finite() && self.right.is_finite()
    }
}

/// Linear and angular body velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub v: f64,
    pub omega: f64,
}

/// Unicycle twist of wheel speeds, each clamped to the preset limit.
pub fn diff_drive_twist(cmd: WheelCommand, preset: &RobotPreset) -> Twist {
    let max = preset.max_wheel_speed;
    let l = cmd.left.clamp(-max, max);
    let r = cmd.right.clamp(-max, max);
    Twist { v: preset.wheel_radius * (l + r) / 2.0, omega: preset.wheel_radius * (r - l) / preset.wheel_base }
}

/// Inverse of [`diff_drive_twist`], scaled down uniformly to respect the wheel limit.
pub fn twist_to_wheels(twist: Twist, preset: &RobotPreset) -> WheelCommand {
    let half = twist.omega * preset.wheel_base / 2.0;
    let mut l = (twist.v - half) / preset.wheel_radius;
    let mut r = (twist.v + half) / preset.wheel_radius;
    let peak = l.abs().max(r.abs());
    if peak > preset.max_wheel_speed {
        let s = preset.max_wheel_speed / peak;
        l *= s;
        r *= s;
    }
    WheelCommand::new(l, r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: Pose,
    pub twist: Twist,
    /// Object poses in scene object order.
    pub objects: Vec<Pose>,
    pub doors: Vec<f64>,
    pub t: u64,
}

impl WorldState {
    pub fn initial(scene: &Scene, robot: Pose) -> Self {
        Self {
            robot,
            twist: Twist::default(),
            objects: scene.objects.iter().map(|o| o.pose).collect(),
            doors: scene.doors.iter().map(|d| d.rest_angle).collect(),
            t: 0,
        }
    }
}

/// Non-floor body touched by the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyRef {
    Wall(usize),
    Door(usize),
    /// Object id (1-based).
    Object(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub body: BodyRef,
    /// Applied force magnitude, newtons.
    pub force: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: WorldState,
    /// One entry per contacted body, sorted by body.
    pub contacts: Vec<Contact>,
    /// Centre-of-mass path length this step: robot, objects, door leaves.
    pub displacements: Vec<f64>,
    /// Ids of objects that took part in any push chain this step.
    pub chain: Vec<u32>,
    pub interacted: bool,
}

impl StepOutcome {
    pub fn total_force(&self) -> f64 {
        self.contacts.iter().map(|c| c.force).sum()
    }
}

struct Sim<'a> {
    scene: &'a Scene,
    preset: &'a RobotPreset,
    config: &'a PhysicsConfig,
    walls: Vec<Shape>,
    objects: Vec<Pose>,
    doors: Vec<f64>,
    forces: BTreeMap<BodyRef, f64>,
    disp: Vec<f64>,
    in_chain: Vec<bool>,
}

enum PushResult {
    Moved { moves: Vec<(usize, Vec2)>, threshold: f64 },
    Blocked,
}

impl Sim<'_> {
    fn record(&mut self, body: BodyRef, force: f64) {
        let f = self.forces.entry(body).or_insert(0.0);
        *f = f.max(force);
    }

    fn object_shape(&self, i: usize, pos: Vec2) -> Shape {
        let o = &self.scene.objects[i];
        o.shape_at(&self.objects[i].with_position(pos))
    }

    fn door_shape(&self, d: usize) -> Shape {
        self.scene.doors[d].leaf_shape(self.doors[d])
    }

    fn statics(&self) -> impl Iterator<Item = Shape> + '_ {
        self.walls.iter().cloned().chain((0..self.doors.len()).map(|d| self.door_shape(d)))
    }

    /// Slides an object out of walls and door leaves.
    fn slide_out_of_statics(&self, i: usize, mut pos: Vec2) -> Vec2 {
        for _ in 0..4 {
            let shape = self.object_shape(i, pos);
            let worst = self
                .statics()
                .filter_map(|s| penetration(&s, &shape))
                .max_by(|a, b| a.depth.total_cmp(&b.depth));
            match worst {
                Some(p) if p.depth > CONTACT_EPS => pos += p.normal * p.depth,
                _ => break,
            }
        }
        pos
    }

    /// Pushes object `first` out of the robot disc at `robot`, propagating
    /// through touching objects.
    fn try_push(&mut self, robot: &Shape, first: usize) -> PushResult {
        let k = self.objects.len();
        let mut tentative: Vec<Option<Vec2>> = vec![None; k];
        let mut member = vec![false; k];
        let pos_of = |t: &Vec<Option<Vec2>>, objs: &Vec<Pose>, i: usize| t[i].unwrap_or(objs[i].position());
        let mut budget = 1024usize;
        for _ in 0..PUSH_ITERATIONS {
            let shape = self.object_shape(first, pos_of(&tentative, &self.objects, first));
            let Some(p) = penetration(robot, &shape).filter(|p| p.depth > WEDGE_TOL) else { break };
            let mut queue = vec![(first, p.normal * p.depth, 1usize)];
            while let Some((j, mv, level)) = queue.pop() {
                member[j] = true;
                if level > self.config.max_chain_depth || budget == 0 {
                    self.mark_chain(&member);
                    return PushResult::Blocked;
                }
                budget -= 1;
                let new_pos = self.slide_out_of_statics(j, pos_of(&tentative, &self.objects, j) + mv);
                tentative[j] = Some(new_pos);
                let moved = self.object_shape(j, new_pos);
                for other in 0..k {
                    if other == j {
                        continue;
                    }
                    let os = self.object_shape(other, pos_of(&tentative, &self.objects, other));
                    if let Some(q) = penetration(&moved, &os).filter(|q| q.depth > CONTACT_EPS) {
                        queue.push((other, q.normal * q.depth, level + 1));
                    }
                }
            }
        }
        self.mark_chain(&member);
        let threshold: f64 = (0..k)
            .filter(|&i| member[i])
            .map(|i| self.scene.objects[i].friction_force())
            .sum();
        if !self.preset.can_push(threshold) {
            return PushResult::Blocked;
        }
        // wedged: a member still overlaps the robot or a static
        for i in (0..k).filter(|&i| member[i]) {
            let shape = self.object_shape(i, pos_of(&tentative, &self.objects, i));
            if penetration(robot, &shape).is_some_and(|p| p.depth > WEDGE_TOL) {
                return PushResult::Blocked;
            }
            if self.statics().any(|s| penetration(&s, &shape).is_some_and(|p| p.depth > WEDGE_TOL)) {
                return PushResult::Blocked;
            }
        }
        let moves = (0..k).filter_map(|i| tentative[i].map(|p| (i, p))).collect();
        PushResult::Moved { moves, threshold }
    }

    fn mark_chain(&mut self, member: &[bool]) {
        for (i, m) in member.iter().enumerate() {
            if *m {
                self.in_chain[i] = true;
            }
        }
    }

    fn resolve_objects(&mut self, robot_pos: &mut Vec2) {
        let r = self.preset.body_radius;
        for _ in 0..2 {
            for i in 0..self.objects.len() {
                let robot = Shape::Circle { center: *robot_pos, radius: r };
                let shape = self.object_shape(i, self.objects[i].position());
                let Some(pen) = penetration(&robot, &shape).filter(|p| p.depth > CONTACT_EPS) else { continue };
                let id = self.scene.objects[i].id;
                match self.try_push(&robot, i) {
                    PushResult::Moved { moves, threshold } => {
                        for (j, p) in moves {
                            let d = p.distance(self.objects[j].position());
                            self.disp[1 + j] += d;
                            self.objects[j].x = p.x;
                            self.objects[j].y = p.y;
                        }
                        self.record(BodyRef::Object(id), threshold);
                    }
                    PushResult::Blocked => {
                        *robot_pos -= pen.normal * pen.depth;
                        self.record(BodyRef::Object(id), self.preset.push_capacity);
                    }
                }
            }
        }
    }

    fn resolve_doors(&mut self, robot_pos: &mut Vec2) {
        let r = self.preset.body_radius;
        let f_max = self.preset.push_capacity;
        let k = self.objects.len();
        for d in 0..self.doors.len() {
            let robot = Shape::Circle { center: *robot_pos, radius: r };
            let leaf = self.door_shape(d);
            let Some(pen) = penetration(&robot, &leaf).filter(|p| p.depth > CONTACT_EPS) else { continue };
            let door = &self.scene.doors[d];
            let angle = self.doors[d];
            let to_robot = *robot_pos - door.hinge;
            let dist = to_robot.norm();
            let clearance = r + DOOR_HALF_THICKNESS;
            let lever = {
                let Shape::Capsule { seg, .. } = &leaf else { unreachable!() };
                seg.closest_point(*robot_pos).distance(door.hinge)
            };
            let mut rotated = None;
            if f_max * lever >= door.hinge_static_torque && dist > clearance && lever > 0.0 {
                let rel = wrap_angle(to_robot.angle() - angle);
                let side = if rel >= 0.0 { 1.0 } else { -1.0 };
                let target = angle + rel - side * (clearance / dist).asin();
                let [lo, hi] = door.swing_range;
                if (lo..=hi).contains(&target) {
                    let new_leaf = door.leaf_shape(target);
                    let hits_object = (0..k).any(|i| {
                        penetration(&new_leaf, &self.object_shape(i, self.objects[i].position()))
                            .is_some_and(|p| p.depth > CONTACT_EPS)
                    });
                    if !hits_object {
                        rotated = Some(target);
                    }
                }
            }
            match rotated {
                Some(target) => {
                    let door = &self.scene.doors[d];
                    self.disp[1 + k + d] += (target - angle).abs() * door.leaf_length / 2.0;
                    self.doors[d] = target;
                    let force = (door.hinge_kinetic_torque / lever).min(f_max);
                    self.record(BodyRef::Door(d), force);
                }
                None => {
                    *robot_pos -= pen.normal * pen.depth;
                    self.record(BodyRef::Door(d), f_max);
                }
            }
        }
    }

    fn resolve_walls(&mut self, robot_pos: &mut Vec2) {
        let r = self.preset.body_radius;
        for _ in 0..4 {
            let mut any = false;
            for w in 0..self.walls.len() {
                let robot = Shape::Circle { center: *robot_pos, radius: r };
                if let Some(p) = penetration(&robot, &self.walls[w]).filter(|p| p.depth > CONTACT_EPS) {
                    *robot_pos -= p.normal * p.depth;
                    let force = (self.config.wall_stiffness * p.depth).min(self.preset.push_capacity);
                    self.record(BodyRef::Wall(w), force);
                    any = true;
                }
            }
            if !any {
                break;
            }
        }
    }
}

/// Advances the world by one control step of `config.dt` seconds.
///
/// Pure in its inputs: identical arguments always produce an identical outcome.
pub fn step(
    scene: &Scene,
    preset: &RobotPreset,
    config: &PhysicsConfig,
    state: &WorldState,
    cmd: WheelCommand,
) -> Result<StepOutcome, PhysicsError> {
    if !cmd.is_finite() {
        return Err(PhysicsError::NonFiniteAction { left: cmd.left, right: cmd.right });
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(PhysicsError::InvalidTimestep(config.dt));
    }
    if state.objects.len() != scene.objects.len() || state.doors.len() != scene.doors.len() {
        return Err(PhysicsError::StateMismatch(format!(
            "{} object poses / {} door angles for {} objects / {} doors",
            state.objects.len(),
            state.doors.len(),
            scene.objects.len(),
            scene.doors.len()
        )));
    }
    let twist = diff_drive_twist(cmd, preset);
    let substeps = config.substeps.max(1);
    let h = config.dt / substeps as f64;
    let mut sim = Sim {
        scene,
        preset,
        config,
        walls: scene.wall_shapes(),
        objects: state.objects.clone(),
        doors: state.doors.clone(),
        forces: BTreeMap::new(),
        disp: vec![0.0; scene.body_count()],
        in_chain: vec![false; scene.objects.len()],
    };
    let mut pose = state.robot;
    for _ in 0..substeps {
        let (x0, y0, th0) = (pose.x, pose.y, pose.theta);
        let th1 = th0 + twist.omega * h;
        let (dx, dy) = if (twist.omega * h).abs() > 1e-12 {
            let k = twist.v / twist.omega;
            (k * (th1.sin() - th0.sin()), -k * (th1.cos() - th0.cos()))
        } else {
            (twist.v * h * th0.cos(), twist.v * h * th0.sin())
        };
        let travel = dx.hypot(dy);
        if travel > preset.body_radius {
            return Err(PhysicsError::Tunneling { displacement: travel, limit: preset.body_radius });
        }
        let mut p = Vec2::new(x0 + dx, y0 + dy);
        sim.resolve_objects(&mut p);
        sim.resolve_doors(&mut p);
        sim.resolve_walls(&mut p);
        sim.disp[0] += p.distance(Vec2::new(x0, y0));
        pose = Pose::new(p.x, p.y, wrap_angle(th1));
    }

    let contacts: Vec<Contact> = sim.forces.iter().map(|(b, f)| Contact { body: *b, force: *f }).collect();
    let chain = (0..scene.objects.len())
        .filter(|&i| sim.in_chain[i])
        .map(|i| scene.objects[i].id)
        .collect();
    let interacted = !contacts.is_empty();
    Ok(StepOutcome {
        state: WorldState { robot: pose, twist, objects: sim.objects, doors: sim.doors, t: state.t + 1 },
        contacts,
        displacements: sim.disp,
        chain,
        interacted,
    })
}

/// Deepest robot-wall penetration in `state`, meters (0 when clear).
pub fn wall_penetration(scene: &Scene, preset: &RobotPreset, state: &WorldState) -> f64 {
    let robot = Shape::Circle { center: state.robot.position(), radius: preset.body_radius };
    scene
        .wall_shapes()
        .iter()
        .filter_map(|w| penetration(&robot, w))
        .map(|p| p.depth)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Footprint, MovableObject, ObjectClass};

    fn room_with(objects: Vec<MovableObject>) -> Scene {
        let mut s = Scene::empty_room("t", 10.0, 10.0);
        s.objects = objects;
        s
    }

    fn obj(id: u32, class: ObjectClass, x: f64, y: f64) -> MovableObject {
        MovableObject {
            id,
            class,
            footprint: class.default_footprint(),
            pose: Pose::new(x, y, 0.0),
            mass: class.default_mass(),
            friction: 0.5,
        }
    }

    #[test]
    fn twist_formulas() {
        let p = RobotPreset::turtlebot();
        let t = diff_drive_twist(WheelCommand::new(5.0, 5.0), &p);
        assert!((t.v - 5.0 * p.wheel_radius).abs() < 1e-15 && t.omega == 0.0);
        let t = diff_drive_twist(WheelCommand::new(-3.0, 3.0), &p);
        assert_eq!(t.v, 0.0);
        assert!(t.omega > 0.0);
        let t = diff_drive_twist(WheelCommand::new(2.0, 4.0), &p);
        assert!((t.v - 0.114).abs() < 1e-12);
        assert!((t.omega - 0.038 * 2.0 / 0.23).abs() < 1e-12);
        assert!((t.omega - 0.3304).abs() < 1e-4);
        let clamped = diff_drive_twist(WheelCommand::new(100.0, 100.0), &p);
        assert!((clamped.v - p.max_linear_speed()).abs() < 1e-12);
    }

    #[test]
    fn wheels_round_trip() {
        let p = RobotPreset::fetch();
        let tw = Twist { v: 0.3, omega: -0.4 };
        let back = diff_drive_twist(twist_to_wheels(tw, &p), &p);
        assert!((back.v - tw.v).abs() < 1e-12 && (back.omega - tw.omega).abs() < 1e-12);
    }

    #[test]
    fn free_space_straight_drive() {
        let p = RobotPreset::fetch();
        let scene = room_with(vec![]);
        let state = WorldState::initial(&scene, Pose::new(5.0, 5.0, 0.0));
        let w = 0.5 / p.wheel_radius;
        let out = step(&scene, &p, &PhysicsConfig::default(), &state, WheelCommand::new(w, w)).unwrap();
        assert!((out.state.robot.x - 5.05).abs() < 1e-12);
        assert!((out.displacements[0] - 0.05).abs() < 1e-12);
        assert!(out.contacts.is_empty() && !out.interacted);
    }

    fn push_into(class: ObjectClass, preset: &RobotPreset) -> (WorldState, StepOutcome) {
        let scene = room_with(vec![obj(1, class, 5.0, 5.0)]);
        let r = class.default_footprint().bounding_radius();
        let reach = match class.default_footprint() {
            Footprint::Rect { length, .. } => length / 2.0,
            _ => r,
        };
        let start = Pose::new(5.0 - reach - preset.body_radius - 0.01, 5.0, 0.0);
        let state = WorldState::initial(&scene, start);
        let w = 0.3 / preset.wheel_radius;
        let out = step(&scene, preset, &PhysicsConfig::default(), &state, WheelCommand::new(w, w)).unwrap();
        (state, out)
    }

    #[test]
    fn basket_is_pushed_at_friction_limit() {
        let (before, out) = push_into(ObjectClass::Basket, &RobotPreset::turtlebot());
        assert_eq!(out.contacts.len(), 1);
        assert!((out.contacts[0].force - 0.5 * 0.5 * 9.81).abs() < 1e-12);
        assert!((out.contacts[0].force - 2.4525).abs() < 1e-12);
        assert!(out.state.objects[0].x > before.objects[0].x);
        assert!(out.displacements[1] > 0.0);
        assert_eq!(out.chain, vec![1]);
        assert!(out.interacted);
    }

    #[test]
    fn sofa_blocks_turtlebot() {
        let (before, out) = push_into(ObjectClass::Sofa, &RobotPreset::turtlebot());
        assert_eq!(out.contacts[0].force, 15.0);
        assert_eq!(out.state.objects[0], before.objects[0]);
        assert_eq!(out.displacements[1], 0.0);
        let sofa_fs: f64 = 0.5 * 45.0 * 9.81;
        assert!((sofa_fs - 220.725).abs() < 1e-9);
    }

    #[test]
    fn fetch_pushes_sofa() {
        let (before, out) = push_into(ObjectClass::Sofa, &RobotPreset::fetch());
        assert!(out.state.objects[0].x > before.objects[0].x);
        assert!((out.contacts[0].force - 0.5 * 45.0 * 9.81).abs() < 1e-9);
    }

    #[test]
    fn chain_of_two_baskets_sums_thresholds() {
        let p = RobotPreset::turtlebot();
        let scene = room_with(vec![obj(1, ObjectClass::Basket, 5.0, 5.0), obj(2, ObjectClass::Basket, 5.3, 5.0)]);
        let state = WorldState::initial(&scene, Pose::new(5.0 - 0.15 - 0.18 - 0.005, 5.0, 0.0));
        let w = 0.3 / p.wheel_radius;
        let out = step(&scene, &p, &PhysicsConfig::default(), &state, WheelCommand::new(w, w)).unwrap();
        assert_eq!(out.chain, vec![1, 2]);
        assert!((out.contacts[0].force - 2.0 * 2.4525).abs() < 1e-12);
        assert!(out.displacements[2] > 0.0);
    }

    #[test]
    fn wall_contact_projects_robot_out() {
        let p = RobotPreset::turtlebot();
        let scene = room_with(vec![]);
        let mut state = WorldState::initial(&scene, Pose::new(9.8, 5.0, 0.0));
        let w = 0.5 / p.wheel_radius;
        for _ in 0..5 {
            let out = step(&scene, &p, &PhysicsConfig::default(), &state, WheelCommand::new(w, w)).unwrap();
            assert!(wall_penetration(&scene, &p, &out.state) <= 1e-4);
            state = out.state;
        }
        assert!((state.robot.x - (10.0 - 0.18)).abs() < 1e-9);
    }

    #[test]
    fn door_swings_when_pushed_away_from_hinge() {
        let p = RobotPreset::turtlebot();
        let mut scene = room_with(vec![]);
        scene.doors.push(crate::scene::Door {
            hinge: Vec2::new(5.0, 4.5),
            leaf_length: 0.88,
            rest_angle: std::f64::consts::FRAC_PI_2,
            swing_range: [0.0, std::f64::consts::PI],
            leaf_mass: 25.0,
            hinge_static_torque: 2.0,
            hinge_kinetic_torque: 1.5,
        });
        let mut state = WorldState::initial(&scene, Pose::new(4.7, 5.2, 0.0));
        let w = 0.3 / p.wheel_radius;
        let mut rotated = false;
        for _ in 0..20 {
            let out = step(&scene, &p, &PhysicsConfig::default(), &state, WheelCommand::new(w, w)).unwrap();
            if out.state.doors[0] < std::f64::consts::FRAC_PI_2 {
                rotated = true;
                assert!(out.displacements[1] > 0.0);
            }
            state = out.state;
        }
        assert!(rotated);
        assert!(state.robot.x > 5.0);
    }

    #[test]
    fn non_finite_action_is_rejected() {
        let p = RobotPreset::turtlebot();
        let scene = room_with(vec![]);
        let state = WorldState::initial(&scene, Pose::new(5.0, 5.0, 0.0));
        let err = step(&scene, &p, &PhysicsConfig::default(), &state, WheelCommand::new(f64::NAN, 0.0));
        assert!(matches!(err, Err(PhysicsError::NonFiniteAction { .. })));
    }

    #[test]
    fn tunneling_guard() {
        let p = RobotPreset::turtlebot();
        let scene = room_with(vec![]);
        let state = WorldState::initial(&scene, Pose::new(5.0, 5.0, 0.0));
        let cfg = PhysicsConfig { dt: 1.0, substeps: 1, ..PhysicsConfig::default() };
        let w = p.max_wheel_speed;
        assert!(matches!(
            step(&scene, &p, &cfg, &state, WheelCommand::new(w, w)),
            Err(PhysicsError::Tunneling { .. })
        ));
    }
}
