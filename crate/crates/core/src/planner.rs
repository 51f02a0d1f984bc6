//! Occupancy grids, geodesic distance fields, shortest paths and waypoints.
//!
//! Distances are exact Dijkstra over 8-connected free cells with straight
//! edges costing one resolution and diagonals `resolution * sqrt(2)`.
//! A diagonal move is only allowed when both orthogonal neighbours are free.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Pose, Shape, Vec2};
use crate::scene::Scene;

pub const DEFAULT_RESOLUTION: f64 = 0.05;
/// Radius within which an occupied goal or start is snapped to a free cell.
pub const SNAP_RADIUS: f64 = 0.3;

/// Descent candidates closer than this count as ties and fall back to
/// neighbour order. Path lengths that are mathematically equal differ in the last
/// bits depending on summation order, and an additive penalty elsewhere on
/// the route would otherwise flip which of them wins.
const TIE_EPS: f64 = 1e-9;

/// Neighbour order E, N, W, S, NE, NW, SW, SE; also the descent tie-break.
pub const NEIGHBORS: [(i32, i32); 8] = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, 1), (-1, -1), (1, -1)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("point ({x:.3}, {y:.3}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("no free cell within {SNAP_RADIUS} m of ({x:.3}, {y:.3})")]
    NoFreeCell { x: f64, y: f64 },
    #[error("start is unreachable from the goal")]
    Unreachable,
}

/// Cell layout shared by grids and the fields computed on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    pub resolution: f64,
    pub origin: Vec2,
    pub width: usize,
    pub height: usize,
}

impl GridFrame {
    pub fn covering(bounds: &Aabb, resolution: f64) -> Self {
        let width = ((bounds.width() / resolution) - 1e-9).ceil().max(1.0) as usize;
        let height = ((bounds.height() / resolution) - 1e-9).ceil().max(1.0) as usize;
        Self { resolution, origin: bounds.min, width, height }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<usize> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some(self.index(fx as usize, fy as usize))
    }

    pub fn center(&self, idx: usize) -> Vec2 {
        let (ix, iy) = self.coords(idx);
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn neighbor(&self, idx: usize, d: (i32, i32)) -> Option<usize> {
        let (ix, iy) = self.coords(idx);
        let nx = ix as i64 + d.0 as i64;
        let ny = iy as i64 + d.1 as i64;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return None;
        }
        Some(self.index(nx as usize, ny as usize))
    }

    pub fn edge_cost(&self, d: (i32, i32)) -> f64 {
        if d.0 != 0 && d.1 != 0 {
            self.resolution * std::f64::consts::SQRT_2
        } else {
            self.resolution
        }
    }

    /// Index range of cells whose centres may lie within `aabb`.
    fn cell_range(&self, aabb: &Aabb) -> (usize, usize, usize, usize) {
        let r = self.resolution;
        let clamp_x = |v: f64| (((v - self.origin.x) / r).floor().max(0.0) as usize).min(self.width - 1);
        let clamp_y = |v: f64| (((v - self.origin.y) / r).floor().max(0.0) as usize).min(self.height - 1);
        (clamp_x(aabb.min.x), clamp_x(aabb.max.x), clamp_y(aabb.min.y), clamp_y(aabb.max.y))
    }

    /// Calls `f` for every cell whose centre is within `inflation` of `shape`.
    pub fn rasterize(&self, shape: &Shape, inflation: f64, mut f: impl FnMut(usize)) {
        let bb = shape.aabb().inflate(inflation + self.resolution);
        let (x0, x1, y0, y1) = self.cell_range(&bb);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let idx = self.index(ix, iy);
                if shape.distance_to_point(self.center(idx)) <= inflation {
                    f(idx);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub frame: GridFrame,
    pub cells: Vec<bool>,
    pub inflation_radius: f64,
}

/// Grid construction switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub resolution: f64,
    /// Closed door leaves occupy cells when true; by default doors count as open.
    pub doors_block: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { resolution: DEFAULT_RESOLUTION, doors_block: false }
    }
}

impl OccupancyGrid {
    pub fn empty(bounds: &Aabb, resolution: f64, inflation_radius: f64) -> Self {
        let frame = GridFrame::covering(bounds, resolution);
        Self { cells: vec![false; frame.len()], frame, inflation_radius }
    }

    pub fn is_occupied(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    /// False outside the grid.
    pub fn is_free_at(&self, p: Vec2) -> bool {
        self.frame.cell_of(p).is_some_and(|i| !self.cells[i])
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn mark(&mut self, shape: &Shape, inflation: f64) {
        let cells = &mut self.cells;
        self.frame.rasterize(shape, inflation, |i| cells[i] = true);
    }

    /// Nearest free cell to `p` within [`SNAP_RADIUS`].
    pub fn snap_to_free(&self, p: Vec2) -> Result<usize, PlanError> {
        let frame = &self.frame;
        if let Some(i) = frame.cell_of(p) {
            if !self.cells[i] {
                return Ok(i);
            }
        }
        let bb = Aabb::new(p, p).inflate(SNAP_RADIUS);
        let (x0, x1, y0, y1) = frame.cell_range(&bb);
        let mut best: Option<(f64, usize)> = None;
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let idx = frame.index(ix, iy);
                if self.cells[idx] {
                    continue;
                }
                let d = frame.center(idx).distance(p);
                if d <= SNAP_RADIUS && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, idx));
                }
            }
        }
        best.map(|(_, i)| i).ok_or(PlanError::NoFreeCell { x: p.x, y: p.y })
    }
}

/// Occupancy grid of the scene.
///
/// Cells are occupied iff their centre lies within `inflation_radius` of a
/// wall (or of a closed door leaf when `doors_block`). With
/// `include_movables`, object footprints at `object_poses` (or their rest
/// poses) also occupy cells.
pub fn build_grid(
    scene: &Scene,
    inflation_radius: f64,
    include_movables: bool,
    object_poses: Option<&[Pose]>,
    options: &GridOptions,
) -> OccupancyGrid {
    let mut grid = OccupancyGrid::empty(&scene.bounds, options.resolution, inflation_radius);
    for w in scene.wall_shapes() {
        grid.mark(&w, inflation_radius);
    }
    if options.doors_block {
        for d in &scene.doors {
            grid.mark(&d.leaf_shape(d.rest_angle), inflation_radius);
        }
    }
    if include_movables {
        for (i, o) in scene.objects.iter().enumerate() {
            let pose = object_poses.map_or(o.pose, |p| p[i]);
            grid.mark(&o.shape_at(&pose), inflation_radius);
        }
    }
    grid
}

/// Static-only grid plus its 8-connected components, used for reachability.
#[derive(Debug, Clone)]
pub struct StaticMap {
    pub grid: OccupancyGrid,
    /// Component label per cell; 0 for occupied cells.
    pub components: Vec<u32>,
}

impl StaticMap {
    pub fn new(scene: &Scene, inflation_radius: f64, options: &GridOptions) -> Self {
        let grid = build_grid(scene, inflation_radius, false, None, options);
        let components = label_components(&grid);
        Self { grid, components }
    }

    pub fn component_at(&self, p: Vec2) -> Option<u32> {
        self.grid.frame.cell_of(p).map(|i| self.components[i]).filter(|c| *c != 0)
    }

    pub fn component_count(&self) -> u32 {
        self.components.iter().copied().max().unwrap_or(0)
    }
}

fn diagonal_ok(frame: &GridFrame, free: &impl Fn(usize) -> bool, idx: usize, d: (i32, i32)) -> bool {
    if d.0 == 0 || d.1 == 0 {
        return true;
    }
    let a = frame.neighbor(idx, (d.0, 0));
    let b = frame.neighbor(idx, (0, d.1));
    matches!((a, b), (Some(a), Some(b)) if free(a) && free(b))
}

fn label_components(grid: &OccupancyGrid) -> Vec<u32> {
    let frame = &grid.frame;
    let free = |i: usize| !grid.cells[i];
    let mut labels = vec![0u32; frame.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for seed in 0..frame.len() {
        if !free(seed) || labels[seed] != 0 {
            continue;
        }
        next += 1;
        labels[seed] = next;
        stack.push(seed);
        while let Some(c) = stack.pop() {
            for d in NEIGHBORS {
                if let Some(n) = frame.neighbor(c, d) {
                    if free(n) && labels[n] == 0 && diagonal_ok(frame, &free, c, d) {
                        labels[n] = next;
                        stack.push(n);
                    }
                }
            }
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    idx: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distance-to-goal field over a grid.
///
/// `penalty[i]` is added whenever a path enters cell `i`; infinite penalties
/// make the cell impassable.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub frame: GridFrame,
    pub goal_cell: usize,
    pub dist: Vec<f64>,
    blocked: Vec<bool>,
    penalty: Option<Vec<f64>>,
}

impl GeodesicField {
    /// Distance at the cell containing `p`; `None` outside, on occupied
    /// cells, or where unreachable.
    pub fn distance_at(&self, p: Vec2) -> Option<f64> {
        let i = self.frame.cell_of(p)?;
        (!self.blocked[i] && self.dist[i].is_finite()).then_some(self.dist[i])
    }

    pub fn is_blocked(&self, idx: usize) -> bool {
        self.blocked[idx]
    }

    fn enter_cost(&self, idx: usize) -> f64 {
        self.penalty.as_ref().map_or(0.0, |p| p[idx])
    }

    fn passable(&self, idx: usize) -> bool {
        !self.blocked[idx] && self.enter_cost(idx).is_finite()
    }
}

/// Exact Dijkstra from the goal over the grid's free cells.
///
/// An occupied goal is snapped to the nearest free cell within 0.3 m.
pub fn geodesic_field(grid: &OccupancyGrid, goal: Vec2) -> Result<GeodesicField, PlanError> {
    cost_field(grid, goal, None)
}

/// Dijkstra with additive per-cell entry penalties (see [`GeodesicField`]).
pub fn cost_field(grid: &OccupancyGrid, goal: Vec2, penalty: Option<Vec<f64>>) -> Result<GeodesicField, PlanError> {
    let frame = grid.frame;
    if frame.cell_of(goal).is_none() {
        return Err(PlanError::OutOfBounds { x: goal.x, y: goal.y });
    }
    let goal_cell = grid.snap_to_free(goal)?;
    let mut field = GeodesicField {
        frame,
        goal_cell,
        dist: vec![f64::INFINITY; frame.len()],
        blocked: grid.cells.clone(),
        penalty,
    };
    if !field.enter_cost(goal_cell).is_finite() {
        return Ok(field);
    }
    field.dist[goal_cell] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, idx: goal_cell });
    while let Some(HeapEntry { dist, idx }) = heap.pop() {
        if dist > field.dist[idx] {
            continue;
        }
        // forward paths leave neighbour n and enter idx
        let step_in = field.enter_cost(idx);
        for d in NEIGHBORS {
            let Some(n) = frame.neighbor(idx, d) else { continue };
            if field.blocked[n] || !diagonal_ok(&frame, &|i| !field.blocked[i], idx, d) {
                continue;
            }
            let nd = dist + frame.edge_cost(d) + step_in;
            if nd < field.dist[n] {
                field.dist[n] = nd;
                if field.passable(n) {
                    heap.push(HeapEntry { dist: nd, idx: n });
                }
            }
        }
    }
    Ok(field)
}

/// Polyline through cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPolyline {
    pub points: Vec<Vec2>,
    #[serde(skip)]
    pub cells: Vec<usize>,
    /// Arc length at each point.
    pub cumulative: Vec<f64>,
}

impl PathPolyline {
    pub fn from_points(points: Vec<Vec2>, cells: Vec<usize>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut s = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                s += p.distance(points[i - 1]);
            }
            cumulative.push(s);
        }
        Self { points, cells, cumulative }
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn goal(&self) -> Vec2 {
        *self.points.last().expect("paths are never empty")
    }

    /// Point at arc position `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s <= 0.0 {
            return self.points[0];
        }
        if s >= self.length() {
            return self.goal();
        }
        let i = self.cumulative.partition_point(|c| *c <= s).max(1);
        let (s0, s1) = (self.cumulative[i - 1], self.cumulative[i]);
        let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        self.points[i - 1] + (self.points[i] - self.points[i - 1]) * t
    }

    /// Arc position of the point on the path closest to `p`.
    pub fn project(&self, p: Vec2) -> f64 {
        if self.points.len() == 1 {
            return 0.0;
        }
        let mut best = (f64::INFINITY, 0.0);
        for i in 1..self.points.len() {
            let seg = crate::geometry::Segment::new(self.points[i - 1], self.points[i]);
            let t = seg.closest_param(p);
            let q = seg.a + (seg.b - seg.a) * t;
            let d = q.distance(p);
            if d < best.0 {
                best = (d, self.cumulative[i - 1] + t * (self.cumulative[i] - self.cumulative[i - 1]));
            }
        }
        best.1
    }
}

/// Descends `field` from `start` to the goal cell.
///
/// Each move goes to the neighbour minimising `dist + edge + entry penalty`,
/// ties broken by [`NEIGHBORS`] order. An occupied start is snapped to the
/// nearest free cell within 0.3 m.
pub fn shortest_path(field: &GeodesicField, start: Vec2) -> Result<PathPolyline, PlanError> {
    let frame = &field.frame;
    let mut cur = frame.cell_of(start).ok_or(PlanError::OutOfBounds { x: start.x, y: start.y })?;
    if field.blocked[cur] {
        cur = snap_in_field(field, start).ok_or(PlanError::Unreachable)?;
    }
    if !field.dist[cur].is_finite() {
        return Err(PlanError::Unreachable);
    }
    let mut cells = vec![cur];
    let free = |i: usize| !field.blocked[i];
    while cur != field.goal_cell {
        let mut best: Option<(f64, usize)> = None;
        for d in NEIGHBORS {
            let Some(n) = frame.neighbor(cur, d) else { continue };
            if !field.passable(n) || !diagonal_ok(frame, &free, cur, d) {
                continue;
            }
            let v = field.dist[n] + frame.edge_cost(d) + field.enter_cost(n);
            if best.is_none_or(|(bv, _)| v < bv - TIE_EPS) {
                best = Some((v, n));
            }
        }
        match best {
            Some((_, n)) if field.dist[n] < field.dist[cur] => {
                cur = n;
                cells.push(n);
            }
            _ => return Err(PlanError::Unreachable),
        }
    }
    let points = cells.iter().map(|&c| frame.center(c)).collect();
    Ok(PathPolyline::from_points(points, cells))
}

fn snap_in_field(field: &GeodesicField, p: Vec2) -> Option<usize> {
    let frame = &field.frame;
    let bb = Aabb::new(p, p).inflate(SNAP_RADIUS);
    let mut best: Option<(f64, usize)> = None;
    let (x0, x1, y0, y1) = frame.cell_range(&bb);
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            let idx = frame.index(ix, iy);
            if field.blocked[idx] || !field.dist[idx].is_finite() {
                continue;
            }
            let d = frame.center(idx).distance(p);
            if d <= SNAP_RADIUS && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Resamples `path` at `spacing` and returns the `count` points ahead of the
/// path point nearest `from`, padding with the goal when the path runs out.
pub fn waypoints(path: &PathPolyline, spacing: f64, count: usize, from: Vec2) -> Vec<Vec2> {
    let s0 = path.project(from);
    let end = path.length();
    (1..=count)
        .map(|k| {
            let s = s0 + k as f64 * spacing;
            if s >= end - 1e-9 {
                path.goal()
            } else {
                path.point_at(s)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;

    fn open_grid(w: f64, h: f64) -> OccupancyGrid {
        OccupancyGrid::empty(&Aabb::new(Vec2::ZERO, Vec2::new(w, h)), DEFAULT_RESOLUTION, 0.0)
    }

    #[test]
    fn empty_bounds_are_free() {
        let scene = Scene {
            walls: vec![],
            ..Scene::empty_room("r", 2.0, 2.0)
        };
        let g = build_grid(&scene, 0.18, false, None, &GridOptions::default());
        assert_eq!(g.occupied_count(), 0);
        assert_eq!(g.frame.width, 40);
    }

    #[test]
    fn wall_band_matches_distance_oracle() {
        let mut scene = Scene::empty_room("r", 3.0, 3.0);
        scene.walls = vec![Segment::new(Vec2::new(0.5, 1.5), Vec2::new(2.5, 1.5))];
        let g = build_grid(&scene, 0.18, false, None, &GridOptions::default());
        for i in 0..g.frame.len() {
            let c = g.frame.center(i);
            let d = scene.walls[0].distance_to(c);
            assert_eq!(g.cells[i], d <= 0.18, "cell {i} at {c:?}, d={d}");
        }
        assert!(g.occupied_count() > 0);
    }

    #[test]
    fn straight_and_diagonal_distances() {
        let g = open_grid(3.0, 3.0);
        let goal = Vec2::new(1.025, 1.025);
        let f = geodesic_field(&g, goal).unwrap();
        assert_eq!(f.distance_at(goal), Some(0.0));
        let straight = f.distance_at(Vec2::new(1.825, 1.025)).unwrap();
        assert!((straight - 0.8).abs() < 1e-9, "{straight}");
        let diag = f.distance_at(Vec2::new(1.425, 1.425)).unwrap();
        assert!((diag - 0.4 * std::f64::consts::SQRT_2).abs() < 1e-9, "{diag}");
    }

    #[test]
    fn occupied_goal_snaps_or_errors() {
        let mut g = open_grid(2.0, 2.0);
        let c = g.frame.cell_of(Vec2::new(1.0, 1.0)).unwrap();
        g.cells[c] = true;
        let f = geodesic_field(&g, Vec2::new(1.01, 1.01)).unwrap();
        assert_ne!(f.goal_cell, c);
        g.cells.iter_mut().for_each(|x| *x = true);
        assert!(matches!(geodesic_field(&g, Vec2::new(1.0, 1.0)), Err(PlanError::NoFreeCell { .. })));
    }

    #[test]
    fn start_equals_goal_gives_single_point() {
        let g = open_grid(2.0, 2.0);
        let f = geodesic_field(&g, Vec2::new(1.0, 1.0)).unwrap();
        let p = shortest_path(&f, Vec2::new(1.01, 1.01)).unwrap();
        assert_eq!(p.points.len(), 1);
        assert_eq!(p.length(), 0.0);
    }

    #[test]
    fn corridor_path_length() {
        let g = open_grid(4.0, 0.5);
        let f = geodesic_field(&g, Vec2::new(3.5, 0.25)).unwrap();
        let p = shortest_path(&f, Vec2::new(0.5, 0.25)).unwrap();
        assert!((p.length() - 3.0).abs() <= DEFAULT_RESOLUTION, "{}", p.length());
    }

    #[test]
    fn unreachable_start_is_reported() {
        let mut g = open_grid(2.0, 1.0);
        for iy in 0..g.frame.height {
            let i = g.frame.index(20, iy);
            g.cells[i] = true;
        }
        let f = geodesic_field(&g, Vec2::new(1.8, 0.5)).unwrap();
        assert_eq!(shortest_path(&f, Vec2::new(0.2, 0.5)), Err(PlanError::Unreachable));
        assert_eq!(f.distance_at(Vec2::new(0.2, 0.5)), None);
    }

    #[test]
    fn waypoint_spacing_and_padding() {
        let pts: Vec<Vec2> = (0..=60).map(|i| Vec2::new(i as f64 * 0.05, 0.0)).collect();
        let path = PathPolyline::from_points(pts, vec![]);
        let w = waypoints(&path, 0.2, 10, Vec2::ZERO);
        assert_eq!(w.len(), 10);
        for (k, p) in w.iter().enumerate() {
            assert!((p.x - 0.2 * (k + 1) as f64).abs() < 1e-9);
        }
        let short = PathPolyline::from_points((0..=10).map(|i| Vec2::new(i as f64 * 0.05, 0.0)).collect(), vec![]);
        let w = waypoints(&short, 0.2, 10, Vec2::ZERO);
        assert!((w[0].x - 0.2).abs() < 1e-9 && (w[1].x - 0.4).abs() < 1e-9);
        assert!(w[2..].iter().all(|p| *p == short.goal()));
        let at_goal = waypoints(&short, 0.2, 10, short.goal());
        assert!(at_goal.iter().all(|p| *p == short.goal()));
    }

    #[test]
    fn static_map_components() {
        let mut scene = Scene::empty_room("r", 4.0, 2.0);
        scene.walls.push(Segment::new(Vec2::new(2.0, 0.0), Vec2::new(2.0, 2.0)));
        let m = StaticMap::new(&scene, 0.18, &GridOptions::default());
        assert_eq!(m.component_count(), 2);
        assert_ne!(m.component_at(Vec2::new(1.0, 1.0)), m.component_at(Vec2::new(3.0, 1.0)));
    }
}
