//! Deterministic 2D gridworld: environment, agent kinematics, depth and
//! semantic sensing, and ground-truth path-length oracles.
//!
//! Conventions: one cell is `cell_size` meters on a side (0.25 m default),
//! `MoveAhead` advances one cell, rotations are 30 degree increments.
//! Heading 0 points along +x; positive headings rotate toward +y, so
//! `RotateRight` turns clockwise on screen.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{normalize_deg, ray_cells, supercover_line, Cell};

/// Degrees per rotation action.
pub const ROTATION_INCREMENT_DEG: u16 = 30;
/// Default meters per cell, and therefore per `MoveAhead`.
pub const DEFAULT_CELL_SIZE_M: f64 = 0.25;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid grid dimensions: width={width}, height={height}, cell_size={cell_size}")]
    InvalidDimensions { width: i32, height: i32, cell_size: f64 },
    #[error("{field} row {row}: expected {expected} columns, found {found}")]
    RowLength { field: &'static str, row: usize, expected: usize, found: usize },
    #[error("{field} row {row}, column {col}: {msg}")]
    BadCell { field: &'static str, row: usize, col: usize, msg: String },
    #[error("object {id}: {msg}")]
    BadObject { id: String, msg: String },
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("cell {0} is not free")]
    NotFree(Cell),
    #[error("cell {0} is out of bounds")]
    OutOfBounds(Cell),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("world json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Wall,
}

/// A physical object placed on a free cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    pub category: String,
    /// Descriptor terms, order preserved from authoring, no duplicates.
    #[serde(default)]
    pub attributes: Vec<String>,
    pub position: Cell,
    #[serde(default)]
    pub hidden: bool,
    #[serde(default)]
    pub container_hint: Option<String>,
}

/// Discrete agent state: a cell plus a heading that is a multiple of 30 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentPose {
    pub cell: Cell,
    pub heading_deg: u16,
}

impl AgentPose {
    pub fn new(cell: Cell, heading_deg: u16) -> Self {
        AgentPose { cell, heading_deg }
    }

    /// Cell offset of one `MoveAhead` at this heading: the unit direction
    /// vector with each component rounded to the nearest integer. Axis
    /// headings move orthogonally, 30/60 degree headings move diagonally.
    pub fn ahead_offset(&self) -> (i32, i32) {
        let rad = (self.heading_deg as f64).to_radians();
        (rad.cos().round() as i32, rad.sin().round() as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    MoveAhead,
    RotateLeft,
    RotateRight,
    Stop,
}

impl Action {
    pub fn letter(&self) -> char {
        match self {
            Action::MoveAhead => 'M',
            Action::RotateLeft => 'L',
            Action::RotateRight => 'R',
            Action::Stop => 'S',
        }
    }
}

/// One depth ray: offset from the heading, measured range, and whether a
/// wall was hit before `max_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub angle_offset_deg: f64,
    pub range_m: f64,
    pub hit: bool,
}

/// A horizontal depth scan taken from a pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScan {
    pub pose: AgentPose,
    pub max_range_m: f64,
    pub rays: Vec<Ray>,
}

/// Immutable environment: occupancy, room labels, and object instances.
#[derive(Debug, Clone)]
pub struct GridWorld {
    id: String,
    width: i32,
    height: i32,
    cell_size: f64,
    occupancy: Vec<CellState>,
    room_ids: Vec<char>,
    room_names: BTreeMap<char, String>,
    objects: Vec<ObjectInstance>,
    /// Bounding rectangle of each room's free cells, precomputed.
    room_extents: BTreeMap<char, (Cell, Cell)>,
}

/// On-disk schema for a world file.
#[derive(Serialize, Deserialize)]
struct WorldFile {
    id: String,
    width: i32,
    height: i32,
    cell_size: f64,
    occupancy: Vec<String>,
    rooms: Vec<String>,
    room_names: BTreeMap<char, String>,
    objects: Vec<ObjectFile>,
}

#[derive(Serialize, Deserialize)]
struct ObjectFile {
    id: String,
    category: String,
    #[serde(default)]
    attributes: Vec<String>,
    x: i32,
    y: i32,
    #[serde(default)]
    hidden: bool,
    #[serde(default)]
    container_hint: Option<String>,
}

impl GridWorld {
    pub fn new(
        id: impl Into<String>,
        width: i32,
        height: i32,
        cell_size: f64,
        occupancy: Vec<CellState>,
        room_ids: Vec<char>,
        room_names: BTreeMap<char, String>,
        objects: Vec<ObjectInstance>,
    ) -> Result<Self, WorldError> {
        if width < 1 || height < 1 || cell_size <= 0.0 {
            return Err(WorldError::InvalidDimensions { width, height, cell_size });
        }
        let n = (width as usize) * (height as usize);
        if occupancy.len() != n || room_ids.len() != n {
            return Err(WorldError::InvalidArgument(format!(
                "grid vectors must have {} entries",
                n
            )));
        }
        let mut world = GridWorld {
            id: id.into(),
            width,
            height,
            cell_size,
            occupancy,
            room_ids,
            room_names,
            objects,
            room_extents: BTreeMap::new(),
        };
        world.room_extents = world.compute_room_extents();
        // Every free cell needs a named room.
        for y in 0..height {
            for x in 0..width {
                let c = Cell::new(x, y);
                if world.state(c) == Some(CellState::Free)
                    && world.room_name(c).is_none()
                {
                    return Err(WorldError::BadCell {
                        field: "rooms",
                        row: y as usize + 1,
                        col: x as usize + 1,
                        msg: format!(
                            "free cell has room id '{}' missing from room_names",
                            world.room_ids[world.index(c)]
                        ),
                    });
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for o in &world.objects {
            if !seen.insert(o.id.clone()) {
                return Err(WorldError::BadObject {
                    id: o.id.clone(),
                    msg: "duplicate object id".into(),
                });
            }
            if world.state(o.position) != Some(CellState::Free) {
                return Err(WorldError::BadObject {
                    id: o.id.clone(),
                    msg: format!("position {} is not a free cell", o.position),
                });
            }
            if o.hidden && o.container_hint.is_none() {
                return Err(WorldError::BadObject {
                    id: o.id.clone(),
                    msg: "hidden object must carry a container_hint".into(),
                });
            }
            let mut attr_seen = std::collections::HashSet::new();
            for a in &o.attributes {
                if !attr_seen.insert(a) {
                    return Err(WorldError::BadObject {
                        id: o.id.clone(),
                        msg: format!("duplicate attribute '{}'", a),
                    });
                }
            }
        }
        Ok(world)
    }

    /// Build a world from ASCII occupancy rows ('.' free, '#' wall) with a
    /// matching room-id grid. Mostly a test and fixture convenience.
    pub fn from_ascii(
        id: &str,
        occupancy_rows: &[&str],
        room_rows: &[&str],
        room_names: &[(char, &str)],
        cell_size: f64,
        objects: Vec<ObjectInstance>,
    ) -> Result<Self, WorldError> {
        let height = occupancy_rows.len() as i32;
        let width = occupancy_rows.first().map(|r| r.chars().count()).unwrap_or(0) as i32;
        let occ = parse_occupancy(occupancy_rows.iter().map(|s| s.to_string()), width as usize)?;
        let rooms = parse_rooms(room_rows.iter().map(|s| s.to_string()), width as usize)?;
        let names = room_names
            .iter()
            .map(|(c, n)| (*c, n.to_string()))
            .collect();
        GridWorld::new(id, width, height, cell_size, occ, rooms, names, objects)
    }

    /// Single-room variant of [`GridWorld::from_ascii`].
    pub fn from_ascii_single_room(
        id: &str,
        occupancy_rows: &[&str],
        room: &str,
        cell_size: f64,
        objects: Vec<ObjectInstance>,
    ) -> Result<Self, WorldError> {
        let room_rows: Vec<String> = occupancy_rows
            .iter()
            .map(|r| "0".repeat(r.chars().count()))
            .collect();
        let refs: Vec<&str> = room_rows.iter().map(|s| s.as_str()).collect();
        GridWorld::from_ascii(id, occupancy_rows, &refs, &[('0', room)], cell_size, objects)
    }

    pub fn from_json_str(s: &str) -> Result<Self, WorldError> {
        let file: WorldFile = serde_json::from_str(s)?;
        if file.occupancy.len() != file.height as usize {
            return Err(WorldError::RowLength {
                field: "occupancy",
                row: file.occupancy.len(),
                expected: file.height as usize,
                found: file.occupancy.len(),
            });
        }
        if file.rooms.len() != file.height as usize {
            return Err(WorldError::RowLength {
                field: "rooms",
                row: file.rooms.len(),
                expected: file.height as usize,
                found: file.rooms.len(),
            });
        }
        let occ = parse_occupancy(file.occupancy.into_iter(), file.width as usize)?;
        let rooms = parse_rooms(file.rooms.into_iter(), file.width as usize)?;
        let objects = file
            .objects
            .into_iter()
            .map(|o| ObjectInstance {
                id: o.id,
                category: o.category,
                attributes: o.attributes,
                position: Cell::new(o.x, o.y),
                hidden: o.hidden,
                container_hint: o.container_hint,
            })
            .collect();
        GridWorld::new(
            file.id, file.width, file.height, file.cell_size, occ, rooms, file.room_names, objects,
        )
    }

    pub fn to_json_string(&self) -> String {
        let file = WorldFile {
            id: self.id.clone(),
            width: self.width,
            height: self.height,
            cell_size: self.cell_size,
            occupancy: (0..self.height)
                .map(|y| {
                    (0..self.width)
                        .map(|x| match self.state(Cell::new(x, y)).unwrap() {
                            CellState::Free => '.',
                            CellState::Wall => '#',
                        })
                        .collect()
                })
                .collect(),
            rooms: (0..self.height)
                .map(|y| {
                    (0..self.width)
                        .map(|x| self.room_ids[self.index(Cell::new(x, y))])
                        .collect()
                })
                .collect(),
            room_names: self.room_names.clone(),
            objects: self
                .objects
                .iter()
                .map(|o| ObjectFile {
                    id: o.id.clone(),
                    category: o.category.clone(),
                    attributes: o.attributes.clone(),
                    x: o.position.x,
                    y: o.position.y,
                    hidden: o.hidden,
                    container_hint: o.container_hint.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("world serialization")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    fn index(&self, c: Cell) -> usize {
        (c.y as usize) * (self.width as usize) + (c.x as usize)
    }

    pub fn state(&self, c: Cell) -> Option<CellState> {
        if self.in_bounds(c) {
            Some(self.occupancy[self.index(c)])
        } else {
            None
        }
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.state(c) == Some(CellState::Free)
    }

    pub fn room_id(&self, c: Cell) -> Option<char> {
        if self.in_bounds(c) {
            Some(self.room_ids[self.index(c)])
        } else {
            None
        }
    }

    pub fn room_name(&self, c: Cell) -> Option<&str> {
        self.room_id(c)
            .and_then(|id| self.room_names.get(&id).map(|s| s.as_str()))
    }

    pub fn room_names(&self) -> &BTreeMap<char, String> {
        &self.room_names
    }

    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Bounding rectangle (inclusive) of the room's free cells.
    pub fn room_extent(&self, room_id: char) -> Option<(Cell, Cell)> {
        self.room_extents.get(&room_id).copied()
    }

    fn compute_room_extents(&self) -> BTreeMap<char, (Cell, Cell)> {
        let mut extents: BTreeMap<char, (Cell, Cell)> = BTreeMap::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = Cell::new(x, y);
                if !self.is_free(c) {
                    continue;
                }
                let id = self.room_ids[self.index(c)];
                extents
                    .entry(id)
                    .and_modify(|(min, max)| {
                        *min = Cell::new(min.x.min(x), min.y.min(y));
                        *max = Cell::new(max.x.max(x), max.y.max(y));
                    })
                    .or_insert((c, c));
            }
        }
        extents
    }

    pub fn validate_pose(&self, pose: &AgentPose) -> Result<(), WorldError> {
        if !self.in_bounds(pose.cell) {
            return Err(WorldError::InvalidPose(format!("cell {} out of bounds", pose.cell)));
        }
        if !self.is_free(pose.cell) {
            return Err(WorldError::InvalidPose(format!("cell {} is a wall", pose.cell)));
        }
        if pose.heading_deg >= 360 || pose.heading_deg % ROTATION_INCREMENT_DEG != 0 {
            return Err(WorldError::InvalidPose(format!(
                "heading {} is not a multiple of {} in [0, 360)",
                pose.heading_deg, ROTATION_INCREMENT_DEG
            )));
        }
        Ok(())
    }
}

fn parse_occupancy(
    rows: impl Iterator<Item = String>,
    width: usize,
) -> Result<Vec<CellState>, WorldError> {
    let mut out = Vec::new();
    for (i, row) in rows.enumerate() {
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != width {
            return Err(WorldError::RowLength {
                field: "occupancy",
                row: i + 1,
                expected: width,
                found: chars.len(),
            });
        }
        for (j, ch) in chars.iter().enumerate() {
            out.push(match ch {
                '.' => CellState::Free,
                '#' => CellState::Wall,
                other => {
                    return Err(WorldError::BadCell {
                        field: "occupancy",
                        row: i + 1,
                        col: j + 1,
                        msg: format!("invalid character '{}', expected '.' or '#'", other),
                    })
                }
            });
        }
    }
    Ok(out)
}

fn parse_rooms(rows: impl Iterator<Item = String>, width: usize) -> Result<Vec<char>, WorldError> {
    let mut out = Vec::new();
    for (i, row) in rows.enumerate() {
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != width {
            return Err(WorldError::RowLength {
                field: "rooms",
                row: i + 1,
                expected: width,
                found: chars.len(),
            });
        }
        out.extend(chars);
    }
    Ok(out)
}

/// Apply one non-Stop action. Pure: identical inputs give identical results.
/// A blocked `MoveAhead` leaves the pose unchanged and reports a collision.
pub fn step(world: &GridWorld, pose: &AgentPose, action: Action) -> Result<(AgentPose, bool), WorldError> {
    world.validate_pose(pose)?;
    match action {
        Action::Stop => Err(WorldError::InvalidArgument(
            "Stop is terminal and not a kinematic action".into(),
        )),
        Action::RotateLeft => {
            let heading = (pose.heading_deg + 360 - ROTATION_INCREMENT_DEG) % 360;
            Ok((AgentPose::new(pose.cell, heading), false))
        }
        Action::RotateRight => {
            let heading = (pose.heading_deg + ROTATION_INCREMENT_DEG) % 360;
            Ok((AgentPose::new(pose.cell, heading), false))
        }
        Action::MoveAhead => {
            let (dx, dy) = pose.ahead_offset();
            let target = pose.cell.offset(dx, dy);
            if world.is_free(target) {
                Ok((AgentPose::new(target, pose.heading_deg), false))
            } else {
                Ok((*pose, true))
            }
        }
    }
}

/// Cast `n_rays` depth rays evenly spanning `fov_deg` about the heading.
/// Each range is the exact distance from the cell center to the boundary of
/// the first wall cell along the ray, capped at `max_range_m`. A ray that
/// leaves the grid without hitting a wall reports `max_range_m` with no hit.
pub fn sense_depth(
    world: &GridWorld,
    pose: &AgentPose,
    fov_deg: f64,
    n_rays: usize,
    max_range_m: f64,
) -> Result<DepthScan, WorldError> {
    world.validate_pose(pose)?;
    if !(fov_deg > 0.0 && fov_deg <= 360.0) {
        return Err(WorldError::InvalidArgument(format!("fov {} not in (0, 360]", fov_deg)));
    }
    if n_rays < 1 {
        return Err(WorldError::InvalidArgument("n_rays must be >= 1".into()));
    }
    if max_range_m <= 0.0 {
        return Err(WorldError::InvalidArgument("max_range must be > 0".into()));
    }

    let mut rays = Vec::with_capacity(n_rays);
    for i in 0..n_rays {
        let offset = if n_rays == 1 {
            0.0
        } else {
            -fov_deg / 2.0 + (i as f64) * fov_deg / ((n_rays - 1) as f64)
        };
        let (range_m, hit) = cast_depth_ray(world, pose, offset, max_range_m);
        rays.push(Ray { angle_offset_deg: offset, range_m, hit });
    }
    Ok(DepthScan { pose: *pose, max_range_m, rays })
}

fn cast_depth_ray(world: &GridWorld, pose: &AgentPose, offset_deg: f64, max_range_m: f64) -> (f64, bool) {
    let angle = (pose.heading_deg as f64 + offset_deg).to_radians();
    let dir = (angle.cos(), angle.sin());
    let start = pose.cell.center();
    let t_max_cells = max_range_m / world.cell_size();
    for step in ray_cells(start, dir, t_max_cells) {
        match world.state(step.cell) {
            None => break, // left the grid: nothing to hit
            Some(CellState::Wall) => {
                let dist_m = step.t_enter * world.cell_size();
                if dist_m < max_range_m {
                    return (dist_m, true);
                }
                break;
            }
            Some(CellState::Free) => {}
        }
    }
    (max_range_m, false)
}

/// Ground-truth visibility. Regular objects must be within range and field
/// of view with an unobstructed supercover line of sight. Hidden objects are
/// seen only from a Chebyshev-adjacent cell, regardless of gaze direction.
pub fn visible_objects<'w>(
    world: &'w GridWorld,
    pose: &AgentPose,
    fov_deg: f64,
    max_range_m: f64,
) -> Result<Vec<&'w ObjectInstance>, WorldError> {
    world.validate_pose(pose)?;
    let mut out = Vec::new();
    for obj in world.objects() {
        if obj.hidden {
            if pose.cell.chebyshev(&obj.position) <= 1 {
                out.push(obj);
            }
            continue;
        }
        let dist_m = pose.cell.euclidean(&obj.position) * world.cell_size();
        if dist_m > max_range_m {
            continue;
        }
        if obj.position != pose.cell {
            let dx = (obj.position.x - pose.cell.x) as f64;
            let dy = (obj.position.y - pose.cell.y) as f64;
            let bearing = dy.atan2(dx).to_degrees();
            let rel = normalize_deg(bearing - pose.heading_deg as f64);
            if rel.abs() > fov_deg / 2.0 + 1e-9 {
                continue;
            }
            let blocked = supercover_line(pose.cell, obj.position)
                .into_iter()
                .any(|c| world.state(c) == Some(CellState::Wall));
            if blocked {
                continue;
            }
        }
        out.push(obj);
    }
    Ok(out)
}

/// Length in meters of the shortest 4-connected path over free cells, or
/// `None` when the endpoints are disconnected.
pub fn shortest_path_length(world: &GridWorld, from: Cell, to: Cell) -> Result<Option<f64>, WorldError> {
    for c in [from, to] {
        if !world.in_bounds(c) {
            return Err(WorldError::OutOfBounds(c));
        }
        if !world.is_free(c) {
            return Err(WorldError::NotFree(c));
        }
    }
    if from == to {
        return Ok(Some(0.0));
    }
    let mut dist = vec![u32::MAX; (world.width() * world.height()) as usize];
    let idx = |c: Cell| (c.y * world.width() + c.x) as usize;
    let mut queue = VecDeque::new();
    dist[idx(from)] = 0;
    queue.push_back(from);
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)];
        if c == to {
            return Ok(Some(d as f64 * world.cell_size()));
        }
        for n in c.neighbors4() {
            if world.is_free(n) && dist[idx(n)] == u32::MAX {
                dist[idx(n)] = d + 1;
                queue.push_back(n);
            }
        }
    }
    Ok(None)
}
