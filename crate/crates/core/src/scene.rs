//! Scenes: static walls, hinged doors and movable objects, plus the JSON
//! scene format, procedural floor generation, clutter placement and
//! start/goal sampling.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{penetration, polygon_signed_area, Aabb, Pose, Segment, Shape, Vec2};
use crate::planner::StaticMap;
use crate::seed;

/// Half thickness of a door leaf, meters.
pub const DOOR_HALF_THICKNESS: f64 = 0.02;
/// Width of generated doorway openings, meters.
pub const DOORWAY_WIDTH: f64 = 0.9;
/// Minimum start-goal separation, meters.
pub const MIN_START_GOAL_DISTANCE: f64 = 1.0;

const MAX_SAMPLE_TRIES: usize = 10_000;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("object {id}: {reason}")]
    InvalidObject { id: u32, reason: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("scene generation failed for seed {seed}: {reason}")]
    Generation { seed: u64, reason: String },
    #[error("clutter placement failed for seed {seed} after {tries} tries")]
    Placement { seed: u64, tries: usize },
    #[error("episode sampling failed for seed {seed}: {reason}")]
    Sampling { seed: u64, reason: String },
}

/// Semantic class of a movable body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectClass {
    Chair,
    Desk,
    Door,
    Sofa,
    Table,
    Basket,
    Shoe,
    Pot,
    Toy,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 9] = [
        ObjectClass::Chair,
        ObjectClass::Desk,
        ObjectClass::Door,
        ObjectClass::Sofa,
        ObjectClass::Table,
        ObjectClass::Basket,
        ObjectClass::Shoe,
        ObjectClass::Pot,
        ObjectClass::Toy,
    ];
    /// Furniture placed by the generator (doors are placed as hinged leaves).
    pub const FURNITURE: [ObjectClass; 4] =
        [ObjectClass::Chair, ObjectClass::Desk, ObjectClass::Sofa, ObjectClass::Table];
    /// Small objects scattered by [`place_clutter`].
    pub const CLUTTER: [ObjectClass; 4] =
        [ObjectClass::Basket, ObjectClass::Shoe, ObjectClass::Pot, ObjectClass::Toy];

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Chair => "chair",
            ObjectClass::Desk => "desk",
            ObjectClass::Door => "door",
            ObjectClass::Sofa => "sofa",
            ObjectClass::Table => "table",
            ObjectClass::Basket => "basket",
            ObjectClass::Shoe => "shoe",
            ObjectClass::Pot => "pot",
            ObjectClass::Toy => "toy",
        }
    }

    pub fn default_mass(self) -> f64 {
        match self {
            ObjectClass::Chair => 7.0,
            ObjectClass::Desk => 30.0,
            ObjectClass::Door => 25.0,
            ObjectClass::Sofa => 45.0,
            ObjectClass::Table => 20.0,
            ObjectClass::Basket => 0.5,
            ObjectClass::Shoe => 0.3,
            ObjectClass::Pot => 1.2,
            ObjectClass::Toy => 0.2,
        }
    }

    pub fn default_friction(self) -> f64 {
        0.5
    }

    /// Footprint used when the generator or clutter placer creates an object.
    pub fn default_footprint(self) -> Footprint {
        match self {
            ObjectClass::Chair => Footprint::Rect { length: 0.5, width: 0.5 },
            ObjectClass::Desk => Footprint::Rect { length: 1.2, width: 0.6 },
            ObjectClass::Door => Footprint::Rect { length: 0.88, width: 2.0 * DOOR_HALF_THICKNESS },
            ObjectClass::Sofa => Footprint::Rect { length: 1.8, width: 0.85 },
            ObjectClass::Table => Footprint::Rect { length: 1.2, width: 0.8 },
            ObjectClass::Basket => Footprint::Circle { radius: 0.15 },
            ObjectClass::Shoe => Footprint::Circle { radius: 0.08 },
            ObjectClass::Pot => Footprint::Circle { radius: 0.12 },
            ObjectClass::Toy => Footprint::Circle { radius: 0.07 },
        }
    }

    pub fn is_clutter(self) -> bool {
        Self::CLUTTER.contains(&self)
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown class `{s}`"))
    }
}

impl Serialize for ObjectClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ObjectClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub mass: f64,
    pub friction: f64,
}

/// Body-frame footprint of a movable object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Footprint {
    Circle { radius: f64 },
    /// Rectangle with `length` along the body x axis.
    Rect { length: f64, width: f64 },
    /// Convex polygon, counterclockwise.
    Polygon { vertices: Vec<Vec2> },
}

impl Footprint {
    pub fn world_shape(&self, pose: &Pose) -> Shape {
        match self {
            Footprint::Circle { radius } => Shape::Circle { center: pose.position(), radius: *radius },
            Footprint::Rect { length, width } => {
                let (hx, hy) = (length * 0.5, width * 0.5);
                Shape::Polygon(
                    [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
                        .into_iter()
                        .map(|(x, y)| pose.transform(Vec2::new(x, y)))
                        .collect(),
                )
            }
            Footprint::Polygon { vertices } => {
                Shape::Polygon(vertices.iter().map(|v| pose.transform(*v)).collect())
            }
        }
    }

    /// Radius of the smallest origin-centred disc containing the footprint.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Footprint::Circle { radius } => *radius,
            Footprint::Rect { length, width } => 0.5 * length.hypot(*width),
            Footprint::Polygon { vertices } => vertices.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    fn validate(&mut self) -> Result<(), String> {
        match self {
            Footprint::Circle { radius } if !(*radius > 0.0 && radius.is_finite()) => {
                Err(format!("degenerate circle radius {radius}"))
            }
            Footprint::Rect { length, width }
                if !(*length > 0.0 && *width > 0.0 && length.is_finite() && width.is_finite()) =>
            {
                Err(format!("degenerate rectangle {length} x {width}"))
            }
            Footprint::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err("polygon needs at least 3 vertices".into());
                }
                let area = polygon_signed_area(vertices);
                if area.abs() < 1e-9 {
                    return Err("polygon has zero area".into());
                }
                if area < 0.0 {
                    vertices.reverse();
                }
                let n = vertices.len();
                let convex = (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    (b - a).cross(c - b) >= -1e-12
                });
                if convex {
                    Ok(())
                } else {
                    Err("polygon is not convex".into())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovableObject {
    pub id: u32,
    pub class: ObjectClass,
    pub footprint: Footprint,
    pub pose: Pose,
    pub mass: f64,
    pub friction: f64,
}

impl MovableObject {
    pub fn shape_at(&self, pose: &Pose) -> Shape {
        self.footprint.world_shape(pose)
    }

    pub fn shape(&self) -> Shape {
        self.shape_at(&self.pose)
    }

    /// Static friction threshold `mu * m * g`, newtons.
    pub fn friction_force(&self) -> f64 {
        self.friction * self.mass * crate::GRAVITY
    }
}

/// Leaf rotating about a revolute hinge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub hinge: Vec2,
    pub leaf_length: f64,
    pub rest_angle: f64,
    pub swing_range: [f64; 2],
    pub leaf_mass: f64,
    pub hinge_static_torque: f64,
    pub hinge_kinetic_torque: f64,
}

impl Door {
    pub fn leaf_shape(&self, angle: f64) -> Shape {
        Shape::Capsule {
            seg: Segment::new(self.hinge, self.hinge + Vec2::from_angle(angle) * self.leaf_length),
            radius: DOOR_HALF_THICKNESS,
        }
    }
}

/// Rectangles from which fixed-protocol scenes draw starts and goals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRegions {
    pub start: Aabb,
    pub goal: Aabb,
}

/// An immutable floor: statics, doors and movable objects at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub bounds: Aabb,
    pub walls: Vec<Segment>,
    pub doors: Vec<Door>,
    pub objects: Vec<MovableObject>,
    pub class_defaults: BTreeMap<ObjectClass, ClassParams>,
    /// Doorway gaps; clutter is never placed across them.
    pub openings: Vec<Segment>,
    pub episode_regions: Option<EpisodeRegions>,
    /// Per-scene override of the benchmark's added-clutter count.
    pub clutter: Option<usize>,
}

pub fn builtin_class_defaults() -> BTreeMap<ObjectClass, ClassParams> {
    ObjectClass::ALL
        .into_iter()
        .map(|c| (c, ClassParams { mass: c.default_mass(), friction: c.default_friction() }))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: u32,
    class: ObjectClass,
    #[serde(alias = "shape")]
    footprint: Footprint,
    pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    friction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DoorDoc {
    hinge: Vec2,
    leaf_length: f64,
    rest_angle: f64,
    swing_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    current_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaf_mass: Option<f64>,
    #[serde(default = "default_static_torque")]
    hinge_static_torque: f64,
    #[serde(default = "default_kinetic_torque")]
    hinge_kinetic_torque: f64,
}

fn default_static_torque() -> f64 {
    2.0
}

fn default_kinetic_torque() -> f64 {
    1.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    #[serde(default)]
    name: String,
    bounds: Aabb,
    walls: Vec<Segment>,
    #[serde(default)]
    doors: Vec<DoorDoc>,
    #[serde(default)]
    objects: Vec<ObjectDoc>,
    #[serde(default)]
    class_defaults: BTreeMap<ObjectClass, ClassParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    openings: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    episode_regions: Option<EpisodeRegions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clutter: Option<usize>,
}

/// Parses and validates a scene document.
///
/// Objects that overlap walls are pushed out along the shortest separation
/// axis before the invariants are checked.
pub fn load_scene(text: &str) -> Result<Scene, SceneError> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scene_from_doc(doc)
}

fn scene_from_doc(doc: SceneDoc) -> Result<Scene, SceneError> {
    let bounds = doc.bounds;
    if !(bounds.min.is_finite() && bounds.max.is_finite() && bounds.width() > 0.0 && bounds.height() > 0.0) {
        return Err(SceneError::Invalid("bounds must have positive extent".into()));
    }
    for (i, w) in doc.walls.iter().enumerate() {
        if !(w.a.is_finite() && w.b.is_finite()) || w.length() <= 0.0 {
            return Err(SceneError::Invalid(format!("wall {i} has coincident or non-finite endpoints")));
        }
    }
    let mut class_defaults = builtin_class_defaults();
    for (class, p) in &doc.class_defaults {
        check_mass_friction(p.mass, p.friction)
            .map_err(|r| SceneError::Invalid(format!("class_defaults.{class}: {r}")))?;
        class_defaults.insert(*class, *p);
    }

    let mut doors = Vec::with_capacity(doc.doors.len());
    for (i, d) in doc.doors.into_iter().enumerate() {
        let [lo, hi] = d.swing_range;
        let bad = |r: &str| SceneError::Invalid(format!("door {i}: {r}"));
        if !(d.leaf_length > 0.0) {
            return Err(bad("leaf_length must be positive"));
        }
        if !(lo <= d.rest_angle && d.rest_angle <= hi) {
            return Err(bad("rest_angle outside swing_range"));
        }
        if let Some(a) = d.current_angle {
            if a != d.rest_angle {
                return Err(bad("doors must be closed (current_angle == rest_angle) at load"));
            }
        }
        if d.hinge_static_torque < 0.0 || d.hinge_kinetic_torque < 0.0 {
            return Err(bad("hinge torques must be non-negative"));
        }
        let leaf_mass = d.leaf_mass.unwrap_or(class_defaults[&ObjectClass::Door].mass);
        if !(leaf_mass > 0.0) {
            return Err(bad("leaf_mass must be positive"));
        }
        doors.push(Door {
            hinge: d.hinge,
            leaf_length: d.leaf_length,
            rest_angle: d.rest_angle,
            swing_range: d.swing_range,
            leaf_mass,
            hinge_static_torque: d.hinge_static_torque,
            hinge_kinetic_torque: d.hinge_kinetic_torque,
        });
    }

    let mut objects = Vec::with_capacity(doc.objects.len());
    for o in doc.objects {
        let defaults = class_defaults[&o.class];
        let mut footprint = o.footprint;
        footprint
            .validate()
            .map_err(|reason| SceneError::InvalidObject { id: o.id, reason })?;
        let mass = o.mass.unwrap_or(defaults.mass);
        let friction = o.friction.unwrap_or(defaults.friction);
        check_mass_friction(mass, friction).map_err(|reason| SceneError::InvalidObject { id: o.id, reason })?;
        objects.push(MovableObject { id: o.id, class: o.class, footprint, pose: o.pose, mass, friction });
    }
    objects.sort_by_key(|o| o.id);
    for (i, o) in objects.iter().enumerate() {
        if o.id as usize != i + 1 {
            return Err(SceneError::InvalidObject {
                id: o.id,
                reason: format!("object ids must be exactly 1..={} without gaps", objects.len()),
            });
        }
    }

    let mut scene = Scene {
        name: doc.name,
        bounds,
        walls: doc.walls,
        doors,
        objects,
        class_defaults,
        openings: doc.openings,
        episode_regions: doc.episode_regions,
        clutter: doc.clutter,
    };
    relax_objects(&mut scene)?;
    validate_scene(&scene)?;
    Ok(scene)
}

fn check_mass_friction(mass: f64, friction: f64) -> Result<(), String> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(format!("mass must be positive, got {mass}"));
    }
    if !(friction > 0.0 && friction <= 2.0) {
        return Err(format!("friction must lie in (0, 2], got {friction}"));
    }
    Ok(())
}

/// Pushes every object out of the walls it penetrates.
fn relax_objects(scene: &mut Scene) -> Result<(), SceneError> {
    let walls: Vec<Shape> = scene.walls.iter().map(|w| Shape::segment(w.a, w.b)).collect();
    for obj in &mut scene.objects {
        for _ in 0..16 {
            let shape = obj.shape();
            let worst = walls
                .iter()
                .filter_map(|w| penetration(w, &shape))
                .max_by(|a, b| a.depth.total_cmp(&b.depth));
            match worst {
                Some(p) if p.depth > 1e-12 => {
                    let d = p.normal * p.depth;
                    obj.pose.x += d.x;
                    obj.pose.y += d.y;
                }
                _ => break,
            }
        }
    }
    Ok(())
}

/// Checks the load-time invariants: objects inside bounds and clear of walls.
pub fn validate_scene(scene: &Scene) -> Result<(), SceneError> {
    let walls: Vec<Shape> = scene.walls.iter().map(|w| Shape::segment(w.a, w.b)).collect();
    let bounds = scene.bounds.inflate(1e-9);
    for obj in &scene.objects {
        let shape = obj.shape();
        if !bounds.contains_box(&shape.aabb()) {
            return Err(SceneError::InvalidObject { id: obj.id, reason: "footprint leaves floor bounds".into() });
        }
        if walls.iter().any(|w| penetration(w, &shape).is_some_and(|p| p.depth > 1e-9)) {
            return Err(SceneError::InvalidObject { id: obj.id, reason: "footprint penetrates a wall".into() });
        }
    }
    Ok(())
}

impl Scene {
    /// Empty rectangular room enclosed by four walls.
    pub fn empty_room(name: &str, width: f64, height: f64) -> Scene {
        let (a, b, c, d) =
            (Vec2::new(0.0, 0.0), Vec2::new(width, 0.0), Vec2::new(width, height), Vec2::new(0.0, height));
        Scene {
            name: name.to_string(),
            bounds: Aabb::new(a, c),
            walls: vec![Segment::new(a, b), Segment::new(b, c), Segment::new(c, d), Segment::new(d, a)],
            doors: Vec::new(),
            objects: Vec::new(),
            class_defaults: builtin_class_defaults(),
            openings: Vec::new(),
            episode_regions: None,
            clutter: None,
        }
    }

    /// Canonical pretty-printed JSON; identical scenes serialize byte-identically.
    pub fn to_json(&self) -> String {
        let doc = SceneDoc {
            name: self.name.clone(),
            bounds: self.bounds,
            walls: self.walls.clone(),
            doors: self
                .doors
                .iter()
                .map(|d| DoorDoc {
                    hinge: d.hinge,
                    leaf_length: d.leaf_length,
                    rest_angle: d.rest_angle,
                    swing_range: d.swing_range,
                    current_angle: None,
                    leaf_mass: Some(d.leaf_mass),
                    hinge_static_torque: d.hinge_static_torque,
                    hinge_kinetic_torque: d.hinge_kinetic_torque,
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    id: o.id,
                    class: o.class,
                    footprint: o.footprint.clone(),
                    pose: o.pose,
                    mass: Some(o.mass),
                    friction: Some(o.friction),
                })
                .collect(),
            class_defaults: self.class_defaults.clone(),
            openings: self.openings.clone(),
            episode_regions: self.episode_regions.clone(),
            clutter: self.clutter,
        };
        serde_json::to_string_pretty(&doc).expect("scene serialization is infallible")
    }

    pub fn wall_shapes(&self) -> Vec<Shape> {
        self.walls.iter().map(|w| Shape::segment(w.a, w.b)).collect()
    }

    /// Movable objects followed by door leaves, in the order used for per-body ledgers.
    pub fn body_count(&self) -> usize {
        1 + self.objects.len() + self.doors.len()
    }

    pub fn object_masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.objects.iter().map(|o| o.mass).chain(self.doors.iter().map(|d| d.leaf_mass))
    }

    fn next_object_id(&self) -> u32 {
        self.objects.len() as u32 + 1
    }

    fn class_params(&self, class: ObjectClass) -> ClassParams {
        self.class_defaults
            .get(&class)
            .copied()
            .unwrap_or(ClassParams { mass: class.default_mass(), friction: class.default_friction() })
    }
}

/// Parameters of the procedural floor generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub rooms: usize,
    pub width: f64,
    pub height: f64,
    /// Furniture pieces per 4 m² of room floor.
    pub furniture_density: f64,
    /// Fraction of doorway openings that carry a door leaf.
    pub door_fraction: f64,
    pub min_room_side: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { rooms: 4, width: 10.0, height: 8.0, furniture_density: 0.5, door_fraction: 0.5, min_room_side: 2.0 }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rooms == 0 {
            return Err("room count must be at least 1".into());
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err("floor extent must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.furniture_density) {
            return Err("furniture density must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.door_fraction) {
            return Err("door fraction must lie in [0, 1]".into());
        }
        if self.min_room_side < DOORWAY_WIDTH + 0.8 {
            return Err(format!("min_room_side must be at least {}", DOORWAY_WIDTH + 0.8));
        }
        Ok(())
    }
}

struct Split {
    seg: Segment,
    /// true when the split line is vertical (x = const)
    vertical: bool,
}

/// Builds a floor of axis-aligned rooms joined by doorway openings.
///
/// Rooms come from a binary space partition; each partition line carries one
/// opening, so the room graph is a spanning tree and every room is reachable.
pub fn generate_scene(config: &GenConfig, seed: u64) -> Result<Scene, SceneError> {
    config
        .validate()
        .map_err(|reason| SceneError::Generation { seed, reason })?;
    let mut last_err = String::new();
    for attempt in 0..32u64 {
        let mut rng = seed::rng(seed::derive(seed, attempt));
        match try_generate(config, seed, &mut rng) {
            Ok(scene) => return Ok(scene),
            Err(e) => last_err = e,
        }
    }
    Err(SceneError::Generation { seed, reason: format!("bounded retries exhausted: {last_err}") })
}

fn try_generate(config: &GenConfig, seed: u64, rng: &mut impl Rng) -> Result<Scene, String> {
    let floor = Aabb::new(Vec2::ZERO, Vec2::new(config.width, config.height));
    let min_side = config.min_room_side;
    let mut rooms = vec![floor];
    let mut splits: Vec<Split> = Vec::new();
    while rooms.len() < config.rooms {
        let mut order: Vec<usize> = (0..rooms.len()).collect();
        order.sort_by(|&a, &b| rooms[b].area().total_cmp(&rooms[a].area()).then(a.cmp(&b)));
        let Some(&idx) = order
            .iter()
            .find(|&&i| rooms[i].width().max(rooms[i].height()) >= 2.0 * min_side)
        else {
            return Err(format!("floor too small for {} rooms", config.rooms));
        };
        let r = rooms.swap_remove(idx);
        let vertical = r.width() >= r.height();
        let len = if vertical { r.width() } else { r.height() };
        let lo = (min_side / len).max(0.35);
        let hi = (1.0 - min_side / len).min(0.65);
        let f = if hi > lo { rng.gen_range(lo..hi) } else { 0.5 };
        if vertical {
            let x = r.min.x + f * len;
            splits.push(Split { seg: Segment::new(Vec2::new(x, r.min.y), Vec2::new(x, r.max.y)), vertical });
            rooms.push(Aabb::new(r.min, Vec2::new(x, r.max.y)));
            rooms.push(Aabb::new(Vec2::new(x, r.min.y), r.max));
        } else {
            let y = r.min.y + f * len;
            splits.push(Split { seg: Segment::new(Vec2::new(r.min.x, y), Vec2::new(r.max.x, y)), vertical });
            rooms.push(Aabb::new(r.min, Vec2::new(r.max.x, y)));
            rooms.push(Aabb::new(Vec2::new(r.min.x, y), r.max));
        }
    }
    rooms.sort_by(|a, b| (a.min.y, a.min.x).partial_cmp(&(b.min.y, b.min.x)).unwrap());

    let (c0, c2) = (floor.min, floor.max);
    let (c1, c3) = (Vec2::new(c2.x, c0.y), Vec2::new(c0.x, c2.y));
    let mut walls = vec![Segment::new(c0, c1), Segment::new(c1, c2), Segment::new(c2, c3), Segment::new(c3, c0)];
    let mut openings = Vec::new();
    let mut doors = Vec::new();
    let params = builtin_class_defaults()[&ObjectClass::Door];

    for (si, split) in splits.iter().enumerate() {
        // coordinate along the split of every T-junction with another split
        let along = |p: Vec2| if split.vertical { p.y } else { p.x };
        let fixed = |p: Vec2| if split.vertical { p.x } else { p.y };
        let (s0, s1) = (along(split.seg.a), along(split.seg.b));
        let mut junctions: Vec<f64> = splits
            .iter()
            .enumerate()
            .filter(|(j, o)| *j != si && o.vertical != split.vertical)
            .flat_map(|(_, o)| [o.seg.a, o.seg.b])
            .filter(|p| (fixed(*p) - fixed(split.seg.a)).abs() < 1e-9 && along(*p) > s0 + 1e-9 && along(*p) < s1 - 1e-9)
            .map(along)
            .collect();
        junctions.sort_by(f64::total_cmp);
        // feasible opening starts avoid junctions by a 0.3 m jamb
        let jamb = 0.3;
        let mut fences = vec![s0];
        fences.extend(junctions.iter().copied());
        fences.push(s1);
        let intervals: Vec<(f64, f64)> = fences
            .windows(2)
            .map(|w| (w[0] + jamb, w[1] - jamb - DOORWAY_WIDTH))
            .filter(|(a, b)| b >= a)
            .collect();
        let total: f64 = intervals.iter().map(|(a, b)| b - a).sum();
        if intervals.is_empty() {
            return Err(format!("no room for a doorway on partition {si}"));
        }
        let mut pick = rng.gen_range(0.0..=total);
        let mut start = intervals[0].0;
        for (a, b) in &intervals {
            if pick <= b - a {
                start = a + pick;
                break;
            }
            pick -= b - a;
        }
        let point = |t: f64| {
            if split.vertical {
                Vec2::new(fixed(split.seg.a), t)
            } else {
                Vec2::new(t, fixed(split.seg.a))
            }
        };
        let (g0, g1) = (point(start), point(start + DOORWAY_WIDTH));
        walls.push(Segment::new(split.seg.a, g0));
        walls.push(Segment::new(g1, split.seg.b));
        openings.push(Segment::new(g0, g1));
        if rng.gen_bool(config.door_fraction) {
            let rest = (g1 - g0).angle();
            doors.push(Door {
                hinge: g0,
                leaf_length: DOORWAY_WIDTH - 0.02,
                rest_angle: rest,
                swing_range: [rest - FRAC_PI_2, rest + FRAC_PI_2],
                leaf_mass: params.mass,
                hinge_static_torque: default_static_torque(),
                hinge_kinetic_torque: default_kinetic_torque(),
            });
        }
    }
    walls.retain(|w| w.length() > 1e-9);

    let mut scene = Scene {
        name: format!("gen_r{}_s{}", config.rooms, seed),
        bounds: floor,
        walls,
        doors,
        objects: Vec::new(),
        class_defaults: builtin_class_defaults(),
        openings,
        episode_regions: None,
        clutter: None,
    };

    for room in &rooms {
        let count = (config.furniture_density * room.area() / 4.0).round() as usize;
        for _ in 0..count {
            let obj = place_furniture(&scene, room, rng).ok_or("furniture density infeasible")?;
            scene.objects.push(obj);
        }
    }
    Ok(scene)
}

fn place_furniture(scene: &Scene, room: &Aabb, rng: &mut impl Rng) -> Option<MovableObject> {
    let walls = scene.wall_shapes();
    for _ in 0..200 {
        let class = ObjectClass::FURNITURE[rng.gen_range(0..ObjectClass::FURNITURE.len())];
        let footprint = class.default_footprint();
        let Footprint::Rect { length, width } = footprint else { unreachable!() };
        let side = rng.gen_range(0..4);
        let gap = 0.02;
        // long side runs along the chosen wall
        let (pose, along_len) = match side {
            0 | 1 => {
                let y = if side == 0 { room.min.y + width / 2.0 + gap } else { room.max.y - width / 2.0 - gap };
                let lo = room.min.x + length / 2.0 + gap;
                let hi = room.max.x - length / 2.0 - gap;
                if hi <= lo {
                    continue;
                }
                (Pose::new(rng.gen_range(lo..hi), y, 0.0), hi - lo)
            }
            _ => {
                let x = if side == 2 { room.min.x + width / 2.0 + gap } else { room.max.x - width / 2.0 - gap };
                let lo = room.min.y + length / 2.0 + gap;
                let hi = room.max.y - length / 2.0 - gap;
                if hi <= lo {
                    continue;
                }
                (Pose::new(x, rng.gen_range(lo..hi), FRAC_PI_2), hi - lo)
            }
        };
        debug_assert!(along_len > 0.0);
        let params = scene.class_params(class);
        let obj = MovableObject {
            id: scene.next_object_id(),
            class,
            footprint,
            pose,
            mass: params.mass,
            friction: params.friction,
        };
        let shape = obj.shape();
        if walls.iter().any(|w| penetration(w, &shape).is_some()) {
            continue;
        }
        let keep_out = DOORWAY_WIDTH;
        if scene
            .openings
            .iter()
            .any(|o| shape_segment_distance(&shape, o) < keep_out)
        {
            continue;
        }
        let clearance = shape_inflated(&shape, 0.05);
        if scene.objects.iter().any(|o| penetration(&o.shape(), &clearance).is_some()) {
            continue;
        }
        return Some(obj);
    }
    None
}

fn shape_inflated(shape: &Shape, r: f64) -> Shape {
    match shape {
        Shape::Circle { center, radius } => Shape::Circle { center: *center, radius: radius + r },
        Shape::Polygon(v) => {
            let c = shape.centroid();
            Shape::Polygon(
                v.iter()
                    .map(|p| *p + (*p - c).normalized().unwrap_or(Vec2::ZERO) * (r * std::f64::consts::SQRT_2))
                    .collect(),
            )
        }
        Shape::Capsule { seg, radius } => Shape::Capsule { seg: *seg, radius: radius + r },
    }
}

/// Minimum distance between a shape and a segment (zero when they intersect).
fn shape_segment_distance(shape: &Shape, seg: &Segment) -> f64 {
    if penetration(shape, &Shape::segment(seg.a, seg.b)).is_some() {
        return 0.0;
    }
    let mut d = shape.distance_to_point(seg.a).min(shape.distance_to_point(seg.b));
    if let Shape::Polygon(v) = shape {
        for p in v {
            d = d.min(seg.distance_to(*p));
        }
    }
    if let Shape::Circle { center, radius } = shape {
        d = d.min((seg.distance_to(*center) - radius).max(0.0));
    }
    d
}

/// Adds `count` clutter objects sampled uniformly over the floor.
///
/// Candidates are rejected when they touch a wall, a closed door leaf, a
/// doorway opening, or any existing object.
pub fn place_clutter(scene: &Scene, count: usize, seed: u64) -> Result<Scene, SceneError> {
    let mut out = scene.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut rng = seed::rng(seed);
    let walls = scene.wall_shapes();
    let leaves: Vec<Shape> = scene.doors.iter().map(|d| d.leaf_shape(d.rest_angle)).collect();
    let tries_per_object = 2_000;
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..tries_per_object {
            let class = ObjectClass::CLUTTER[rng.gen_range(0..ObjectClass::CLUTTER.len())];
            let footprint = class.default_footprint();
            let r = footprint.bounding_radius();
            let b = &scene.bounds;
            if b.width() <= 2.0 * r || b.height() <= 2.0 * r {
                break;
            }
            let pose = Pose::new(
                rng.gen_range(b.min.x + r..b.max.x - r),
                rng.gen_range(b.min.y + r..b.max.y - r),
                rng.gen_range(0.0..TAU),
            );
            let params = out.class_params(class);
            let obj = MovableObject {
                id: out.next_object_id(),
                class,
                footprint,
                pose,
                mass: params.mass,
                friction: params.friction,
            };
            let shape = obj.shape();
            if walls.iter().chain(leaves.iter()).any(|w| penetration(w, &shape).is_some()) {
                continue;
            }
            if out.openings.iter().any(|o| shape_segment_distance(&shape, o) <= 0.0) {
                continue;
            }
            if out.objects.iter().any(|o| penetration(&o.shape(), &shape).is_some()) {
                continue;
            }
            out.objects.push(obj);
            placed = true;
            break;
        }
        if !placed {
            return Err(SceneError::Placement { seed, tries: tries_per_object });
        }
    }
    Ok(out)
}

/// Start pose and goal of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub scene_id: String,
    pub start: Pose,
    pub goal: Vec2,
    pub episode_seed: u64,
    #[serde(default)]
    pub clutter_seed: Option<u64>,
    #[serde(default)]
    pub robot: String,
}

/// Samples a start pose and goal uniformly over static free space.
///
/// The start is drawn first; goals are redrawn for that start until one is at
/// least 1 m away and in the same static-grid component. Positions touching a
/// movable object or a closed door leaf are rejected.
pub fn sample_episode(scene: &Scene, map: &StaticMap, seed: u64) -> Result<EpisodeSpec, SceneError> {
    let mut rng = seed::rng(seed);
    let clearance = map.grid.inflation_radius;
    let objects: Vec<Shape> = scene.objects.iter().map(|o| o.shape()).collect();
    let leaves: Vec<Shape> = scene.doors.iter().map(|d| d.leaf_shape(d.rest_angle)).collect();
    let usable = |p: Vec2| {
        map.grid.is_free_at(p)
            && objects.iter().all(|s| s.distance_to_point(p) > clearance)
            && leaves.iter().all(|s| s.distance_to_point(p) > clearance)
    };
    let (start_region, goal_region) = match &scene.episode_regions {
        Some(r) => (r.start, r.goal),
        None => (scene.bounds, scene.bounds),
    };
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, region: &Aabb| {
        Vec2::new(rng.gen_range(region.min.x..=region.max.x), rng.gen_range(region.min.y..=region.max.y))
    };
    let mut tries = 0usize;
    while tries < MAX_SAMPLE_TRIES {
        tries += 1;
        let start = draw(&mut rng, &start_region);
        if !usable(start) {
            continue;
        }
        let start_comp = map.component_at(start);
        for _ in 0..64 {
            tries += 1;
            let goal = draw(&mut rng, &goal_region);
            if goal.distance(start) < MIN_START_GOAL_DISTANCE || !usable(goal) {
                continue;
            }
            if start_comp.is_some() && map.component_at(goal) == start_comp {
                let heading = rng.gen_range(0.0..TAU);
                return Ok(EpisodeSpec {
                    scene_id: scene.name.clone(),
                    start: Pose::new(start.x, start.y, heading),
                    goal,
                    episode_seed: seed,
                    clutter_seed: None,
                    robot: String::new(),
                });
            }
        }
    }
    Err(SceneError::Sampling {
        seed,
        reason: format!("no start/goal pair at least {MIN_START_GOAL_DISTANCE} m apart after {tries} draws"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "bounds": {"min": [0, 0], "max": [4, 3]},
        "walls": [[[0,0],[4,0]], [[4,0],[4,3]], [[4,3],[0,3]], [[0,3],[0,0]]],
        "doors": [],
        "objects": [],
        "class_defaults": {}
    }"#;

    #[test]
    fn minimal_document_loads_with_no_objects() {
        let scene = load_scene(MINIMAL).unwrap();
        assert_eq!(scene.walls.len(), 4);
        assert!(scene.objects.is_empty());
    }

    #[test]
    fn unknown_class_is_rejected_with_position() {
        let text = MINIMAL.replace(
            r#""objects": []"#,
            r#""objects": [{"id": 1, "class": "lamp", "footprint": {"circle": {"radius": 0.1}}, "pose": [1, 1, 0]}]"#,
        );
        let err = load_scene(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown class"), "{msg}");
        assert!(matches!(err, SceneError::Parse { line, .. } if line > 1));
    }

    #[test]
    fn chair_overlapping_wall_is_relaxed() {
        // chair half-extent 0.25, centred 0.23 from the y=0 wall: 0.02 overlap
        let text = MINIMAL.replace(
            r#""objects": []"#,
            r#""objects": [{"id": 1, "class": "chair", "footprint": {"rect": {"length": 0.5, "width": 0.5}}, "pose": [2, 0.23, 0]}]"#,
        );
        let scene = load_scene(&text).unwrap();
        let chair = &scene.objects[0];
        assert!((chair.pose.y - 0.25).abs() < 1e-9, "{}", chair.pose.y);
        assert_eq!(chair.pose.x, 2.0);
        assert_eq!(chair.mass, 7.0);
    }

    #[test]
    fn object_outside_bounds_names_id() {
        let text = MINIMAL.replace(
            r#""objects": []"#,
            r#""objects": [{"id": 1, "class": "toy", "footprint": {"circle": {"radius": 0.1}}, "pose": [9, 1, 0]}]"#,
        );
        match load_scene(&text).unwrap_err() {
            SceneError::InvalidObject { id, .. } => assert_eq!(id, 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn open_door_at_load_is_rejected() {
        let text = MINIMAL.replace(
            r#""doors": []"#,
            r#""doors": [{"hinge": [1, 0], "leaf_length": 0.8, "rest_angle": 0, "swing_range": [-1.5, 1.5], "current_angle": 0.4}]"#,
        );
        assert!(load_scene(&text).is_err());
    }

    #[test]
    fn two_rooms_zero_density() {
        let cfg = GenConfig { rooms: 2, width: 8.0, height: 5.0, furniture_density: 0.0, ..GenConfig::default() };
        let scene = generate_scene(&cfg, 7).unwrap();
        assert_eq!(scene.openings.len(), 1);
        assert!(scene.objects.is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::default();
        let a = generate_scene(&cfg, 11).unwrap().to_json();
        let b = generate_scene(&cfg, 11).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, generate_scene(&cfg, 12).unwrap().to_json());
    }

    #[test]
    fn infeasible_generation_reports_seed() {
        let cfg = GenConfig { rooms: 40, width: 5.0, height: 5.0, ..GenConfig::default() };
        match generate_scene(&cfg, 3).unwrap_err() {
            SceneError::Generation { seed, .. } => assert_eq!(seed, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn generated_scene_round_trips_through_loader() {
        let scene = generate_scene(&GenConfig::default(), 5).unwrap();
        let again = load_scene(&scene.to_json()).unwrap();
        assert_eq!(again, scene);
    }

    #[test]
    fn clutter_zero_is_identity_and_ten_adds_ten() {
        let scene = Scene::empty_room("room", 6.0, 6.0);
        assert_eq!(place_clutter(&scene, 0, 1).unwrap(), scene);
        let cluttered = place_clutter(&scene, 10, 1).unwrap();
        assert_eq!(cluttered.objects.len(), 10);
        assert!(cluttered.objects.iter().all(|o| o.class.is_clutter()));
        validate_scene(&cluttered).unwrap();
        assert_eq!(cluttered, place_clutter(&scene, 10, 1).unwrap());
        for (i, a) in cluttered.objects.iter().enumerate() {
            for b in &cluttered.objects[i + 1..] {
                assert!(penetration(&a.shape(), &b.shape()).is_none());
            }
        }
    }

    #[test]
    fn class_parsing() {
        assert_eq!("sofa".parse::<ObjectClass>().unwrap(), ObjectClass::Sofa);
        assert!("lamp".parse::<ObjectClass>().is_err());
    }
}
