//! Agent observations: a planar range scan with per-ray semantic labels,
//! proprioception, and the goal and path waypoints in the robot frame.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{ray_cast, Pose, Shape, Vec2};
use crate::physics::{Twist, WorldState};
use crate::planner::{waypoints, PathPolyline};
use crate::scene::{ObjectClass, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub n_rays: usize,
    /// Field of view, radians.
    pub fov: f64,
    pub max_range: f64,
    pub waypoint_spacing: f64,
    pub waypoint_count: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            n_rays: 68,
            fov: 2.0 * std::f64::consts::PI / 3.0,
            max_range: 5.0,
            waypoint_spacing: 0.2,
            waypoint_count: 10,
        }
    }
}

/// Class of the body a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemanticLabel {
    Object(ObjectClass),
    Wall,
    None,
}

impl SemanticLabel {
    pub fn name(&self) -> &'static str {
        match self {
            SemanticLabel::Object(c) => c.name(),
            SemanticLabel::Wall => "wall",
            SemanticLabel::None => "none",
        }
    }
}

impl Serialize for SemanticLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SemanticLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "wall" => Ok(SemanticLabel::Wall),
            "none" => Ok(SemanticLabel::None),
            other => other.parse().map(SemanticLabel::Object).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub goal_local: Vec2,
    pub twist: Twist,
    pub waypoints_local: Vec<Vec2>,
    pub depth: Vec<f64>,
    pub semantic: Vec<SemanticLabel>,
}

/// Bodies visible to the range sensor, with their labels.
pub fn visible_bodies(scene: &Scene, state: &WorldState) -> Vec<(Shape, SemanticLabel)> {
    let mut out = Vec::with_capacity(scene.walls.len() + scene.doors.len() + scene.objects.len());
    out.extend(scene.wall_shapes().into_iter().map(|s| (s, SemanticLabel::Wall)));
    out.extend(
        scene
            .doors
            .iter()
            .zip(&state.doors)
            .map(|(d, a)| (d.leaf_shape(*a), SemanticLabel::Object(ObjectClass::Door))),
    );
    out.extend(
        scene
            .objects
            .iter()
            .zip(&state.objects)
            .map(|(o, p)| (o.shape_at(p), SemanticLabel::Object(o.class))),
    );
    out
}

/// Ray direction angles (world frame) for a scan taken at `pose`.
pub fn ray_angles(pose: &Pose, n_rays: usize, fov: f64) -> impl Iterator<Item = f64> {
    let start = pose.theta - fov / 2.0;
    let step = fov / n_rays as f64;
    (0..n_rays).map(move |i| start + (i as f64 + 0.5) * step)
}

/// Casts `n_rays` rays evenly spread over `fov` around the heading.
///
/// Each ray returns the distance to the nearest intersected body, capped at
/// `max_range`, and that body's label (`None` on a miss).
pub fn raycast(
    scene: &Scene,
    state: &WorldState,
    pose: &Pose,
    n_rays: usize,
    fov: f64,
    max_range: f64,
) -> (Vec<f64>, Vec<SemanticLabel>) {
    let bodies = visible_bodies(scene, state);
    let origin = pose.position();
    let mut depth = Vec::with_capacity(n_rays);
    let mut semantic = Vec::with_capacity(n_rays);
    // cull bodies whose bounding box lies beyond max range
    let near: Vec<&(Shape, SemanticLabel)> = bodies
        .iter()
        .filter(|(s, _)| {
            let bb = s.aabb();
            let dx = (bb.min.x - origin.x).max(origin.x - bb.max.x).max(0.0);
            let dy = (bb.min.y - origin.y).max(origin.y - bb.max.y).max(0.0);
            dx.hypot(dy) <= max_range
        })
        .collect();
    for angle in ray_angles(pose, n_rays, fov) {
        let dir = Vec2::from_angle(angle);
        let mut best = max_range;
        let mut label = SemanticLabel::None;
        for (shape, l) in &near {
            if let Some(t) = ray_cast(origin, dir, shape, 1e-9) {
                if t < best {
                    best = t;
                    label = *l;
                }
            }
        }
        depth.push(best);
        semantic.push(label);
    }
    (depth, semantic)
}

/// Builds the agent observation for the robot in `state`.
pub fn make_observation(
    scene: &Scene,
    state: &WorldState,
    goal: Vec2,
    path: &PathPolyline,
    config: &SensorConfig,
) -> Observation {
    let pose = state.robot;
    let (depth, semantic) = raycast(scene, state, &pose, config.n_rays, config.fov, config.max_range);
    Observation {
        goal_local: pose.inverse_transform(goal),
        twist: state.twist,
        waypoints_local: waypoints(path, config.waypoint_spacing, config.waypoint_count, pose.position())
            .into_iter()
            .map(|w| pose.inverse_transform(w))
            .collect(),
        depth,
        semantic,
    }
}
