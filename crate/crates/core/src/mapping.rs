//! Semantic navigation map built from depth scans and detections.
//!
//! Depth rays carve free space and obstacles into an occupancy grid (the 3D
//! voxelization of the source pipeline collapses to a single layer in a 2D
//! world; the top-down projection is then the identity). Detections stamp
//! object instances and room labels onto known cells.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::grid::{ray_cells, Cell};
use crate::perception::Detections;
use crate::world::DepthScan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OccState {
    Unknown,
    Free,
    Obstacle,
}

/// Agent-built belief map: occupancy, per-cell object instances, and room
/// labels. Dimensions and resolution come from configuration, not from
/// peeking at the world.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    width: i32,
    height: i32,
    cell_size: f64,
    occ: Vec<OccState>,
    /// instance_id -> category, per cell. Sparse; deterministic iteration.
    objects: BTreeMap<Cell, BTreeMap<String, String>>,
    room: BTreeMap<Cell, String>,
    explored_count: usize,
}

impl SemanticMap {
    pub fn new(width: i32, height: i32, cell_size: f64) -> Self {
        assert!(width >= 1 && height >= 1 && cell_size > 0.0);
        SemanticMap {
            width,
            height,
            cell_size,
            occ: vec![OccState::Unknown; (width * height) as usize],
            objects: BTreeMap::new(),
            room: BTreeMap::new(),
            explored_count: 0,
        }
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
        (c.y * self.width + c.x) as usize
    }

    pub fn occ(&self, c: Cell) -> OccState {
        if self.in_bounds(c) {
            self.occ[self.index(c)]
        } else {
            OccState::Unknown
        }
    }

    /// Latest-wins occupancy write. Out-of-bounds cells are ignored and a
    /// known cell never returns to Unknown.
    pub fn set_occ(&mut self, c: Cell, state: OccState) {
        if !self.in_bounds(c) || state == OccState::Unknown {
            return;
        }
        let idx = self.index(c);
        if self.occ[idx] == OccState::Unknown {
            self.explored_count += 1;
        }
        self.occ[idx] = state;
    }

    /// Build a map from an occupancy picture: '?' unknown, '.' free,
    /// '#' obstacle. Rows must be equal length.
    pub fn from_ascii(rows: &[&str], cell_size: f64) -> Self {
        let height = rows.len() as i32;
        let width = rows.first().map(|r| r.chars().count()).unwrap_or(0) as i32;
        let mut map = SemanticMap::new(width.max(1), height.max(1), cell_size);
        for (y, row) in rows.iter().enumerate() {
            assert_eq!(row.chars().count() as i32, width, "ragged map row {}", y);
            for (x, ch) in row.chars().enumerate() {
                let c = Cell::new(x as i32, y as i32);
                match ch {
                    '.' => map.set_occ(c, OccState::Free),
                    '#' => map.set_occ(c, OccState::Obstacle),
                    '?' => {}
                    other => panic!("invalid map character '{}'", other),
                }
            }
        }
        map
    }

    pub fn explored_count(&self) -> usize {
        self.explored_count
    }

    pub fn objects_at(&self, c: Cell) -> impl Iterator<Item = (&str, &str)> {
        self.objects
            .get(&c)
            .into_iter()
            .flat_map(|m| m.iter().map(|(id, cat)| (id.as_str(), cat.as_str())))
    }

    /// All (cell, instance_id, category) entries in deterministic order.
    pub fn all_objects(&self) -> impl Iterator<Item = (Cell, &str, &str)> {
        self.objects.iter().flat_map(|(c, m)| {
            m.iter().map(move |(id, cat)| (*c, id.as_str(), cat.as_str()))
        })
    }

    pub fn room_label(&self, c: Cell) -> Option<&str> {
        self.room.get(&c).map(|s| s.as_str())
    }

    pub fn room_labels(&self) -> impl Iterator<Item = (Cell, &str)> {
        self.room.iter().map(|(c, r)| (*c, r.as_str()))
    }

    /// JSON snapshot with a row-major occupancy grid ('?' unknown, '.' free,
    /// '#' obstacle) plus object and room entries.
    pub fn snapshot_json(&self) -> String {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            width: i32,
            height: i32,
            cell_size: f64,
            occ: Vec<String>,
            objects: Vec<SnapObject<'a>>,
            rooms: Vec<SnapRoom<'a>>,
        }
        #[derive(Serialize)]
        struct SnapObject<'a> {
            instance_id: &'a str,
            category: &'a str,
            x: i32,
            y: i32,
        }
        #[derive(Serialize)]
        struct SnapRoom<'a> {
            room: &'a str,
            x: i32,
            y: i32,
        }
        let occ = (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| match self.occ(Cell::new(x, y)) {
                        OccState::Unknown => '?',
                        OccState::Free => '.',
                        OccState::Obstacle => '#',
                    })
                    .collect()
            })
            .collect();
        let snap = Snapshot {
            width: self.width,
            height: self.height,
            cell_size: self.cell_size,
            occ,
            objects: self
                .all_objects()
                .map(|(c, id, cat)| SnapObject { instance_id: id, category: cat, x: c.x, y: c.y })
                .collect(),
            rooms: self
                .room
                .iter()
                .map(|(c, r)| SnapRoom { room: r, x: c.x, y: c.y })
                .collect(),
        };
        serde_json::to_string_pretty(&snap).expect("map snapshot serialization")
    }
}

/// Integrate one depth scan: for each ray, cells crossed before the measured
/// endpoint become Free; the cell containing the endpoint becomes Obstacle
/// on a hit and Free otherwise. Out-of-bounds cells are clipped. The pose's
/// own cell is marked Free.
pub fn integrate_depth(map: &mut SemanticMap, scan: &DepthScan) {
    map.set_occ(scan.pose.cell, OccState::Free);
    let start = scan.pose.cell.center();
    for ray in &scan.rays {
        let angle = (scan.pose.heading_deg as f64 + ray.angle_offset_deg).to_radians();
        let dir = (angle.cos(), angle.sin());
        let t_end_cells = ray.range_m / map.cell_size();
        // Tiny overshoot keeps a hit cell entered exactly at the measured
        // range inside the traversal under inexact cell sizes.
        let steps = ray_cells(start, dir, t_end_cells + 1e-9);
        let Some((last, before)) = steps.split_last() else { continue };
        for step in before {
            map.set_occ(step.cell, OccState::Free);
        }
        let end_state = if ray.hit { OccState::Obstacle } else { OccState::Free };
        map.set_occ(last.cell, end_state);
    }
}

/// Integrate detections: each detected object is written to its cell keyed
/// by instance id (idempotent); a detection on an Unknown cell forces the
/// cell Free first. Room extents label known cells that have no label yet.
pub fn integrate_semantics(map: &mut SemanticMap, d: &Detections) {
    for obj in &d.objects {
        if !map.in_bounds(obj.cell) {
            continue;
        }
        if map.occ(obj.cell) == OccState::Unknown {
            // Sight along an unobstructed line implies traversable space.
            map.set_occ(obj.cell, OccState::Free);
        }
        map.objects
            .entry(obj.cell)
            .or_default()
            .insert(obj.instance_id.clone(), obj.category.clone());
    }
    for room in &d.rooms {
        for y in room.min.y..=room.max.y {
            for x in room.min.x..=room.max.x {
                let c = Cell::new(x, y);
                if !map.in_bounds(c) || map.occ(c) == OccState::Unknown {
                    continue;
                }
                // First label wins.
                map.room.entry(c).or_insert_with(|| room.room_category.clone());
            }
        }
    }
}

/// Fraction of cells no longer Unknown.
pub fn explored_fraction(map: &SemanticMap) -> f64 {
    map.explored_count() as f64 / ((map.width() * map.height()) as f64)
}

/// Cells of the map grouped by occupancy state, for oracle comparisons.
pub fn occ_sets(map: &SemanticMap) -> (BTreeSet<Cell>, BTreeSet<Cell>) {
    let mut free = BTreeSet::new();
    let mut obstacle = BTreeSet::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            let c = Cell::new(x, y);
            match map.occ(c) {
                OccState::Free => {
                    free.insert(c);
                }
                OccState::Obstacle => {
                    obstacle.insert(c);
                }
                OccState::Unknown => {}
            }
        }
    }
    (free, obstacle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{DetectedObject, DetectedRoom};
    use crate::world::{AgentPose, DepthScan, Ray};

    fn scan_single(pose: AgentPose, max_range_m: f64, range_m: f64, hit: bool) -> DepthScan {
        DepthScan {
            pose,
            max_range_m,
            rays: vec![Ray { angle_offset_deg: 0.0, range_m, hit }],
        }
    }

    #[test]
    fn single_hit_ray_carves_free_then_obstacle() {
        let mut map = SemanticMap::new(8, 8, 0.25);
        let pose = AgentPose::new(Cell::new(0, 0), 0);
        // The 1.0 m endpoint is 4.0 cells from center x=0.5, inside cell x=4.
        integrate_depth(&mut map, &scan_single(pose, 5.0, 1.0, true));
        assert_eq!(map.occ(Cell::new(0, 0)), OccState::Free);
        for x in 1..=3 {
            assert_eq!(map.occ(Cell::new(x, 0)), OccState::Free, "x={}", x);
        }
        assert_eq!(map.occ(Cell::new(4, 0)), OccState::Obstacle);
        assert_eq!(map.occ(Cell::new(5, 0)), OccState::Unknown);
    }

    #[test]
    fn non_hit_ray_marks_free_up_to_cap() {
        let mut map = SemanticMap::new(8, 8, 0.25);
        let pose = AgentPose::new(Cell::new(0, 0), 0);
        integrate_depth(&mut map, &scan_single(pose, 0.5, 0.5, false));
        // Cap at 0.5 m = 2.0 cells from center: the capped endpoint sits on
        // the boundary entering cell 2, which is still swept free.
        assert_eq!(map.occ(Cell::new(1, 0)), OccState::Free);
        assert_eq!(map.occ(Cell::new(2, 0)), OccState::Free);
        assert_eq!(map.occ(Cell::new(3, 0)), OccState::Unknown);
    }

    #[test]
    fn out_of_bounds_cells_are_clipped() {
        let mut map = SemanticMap::new(3, 3, 0.25);
        let pose = AgentPose::new(Cell::new(1, 1), 0);
        integrate_depth(&mut map, &scan_single(pose, 5.0, 5.0, false));
        assert_eq!(map.occ(Cell::new(2, 1)), OccState::Free);
        assert_eq!(map.explored_count(), 2);
    }

    #[test]
    fn semantic_idempotence_per_instance() {
        let mut map = SemanticMap::new(8, 8, 0.25);
        let det = Detections {
            objects: vec![DetectedObject {
                category: "bowl".into(),
                attributes: vec![],
                cell: Cell::new(5, 5),
                instance_id: "o1".into(),
            }],
            rooms: vec![],
            step: 0,
        };
        integrate_semantics(&mut map, &det);
        integrate_semantics(&mut map, &det);
        assert_eq!(map.all_objects().count(), 1);
        // Detection forced the unknown cell free.
        assert_eq!(map.occ(Cell::new(5, 5)), OccState::Free);
    }

    #[test]
    fn empty_detections_leave_map_unchanged() {
        let mut map = SemanticMap::new(4, 4, 0.25);
        let before = map.clone();
        integrate_semantics(&mut map, &Detections { objects: vec![], rooms: vec![], step: 0 });
        assert_eq!(map, before);
    }

    #[test]
    fn first_room_label_wins() {
        let mut map = SemanticMap::new(6, 6, 0.25);
        let pose = AgentPose::new(Cell::new(0, 0), 0);
        integrate_depth(&mut map, &scan_single(pose, 1.0, 1.0, false));
        let bedroom = Detections {
            objects: vec![],
            rooms: vec![DetectedRoom {
                room_category: "bedroom".into(),
                min: Cell::new(1, 0),
                max: Cell::new(1, 0),
            }],
            step: 0,
        };
        let kitchen = Detections {
            objects: vec![],
            rooms: vec![DetectedRoom {
                room_category: "kitchen".into(),
                min: Cell::new(0, 0),
                max: Cell::new(2, 0),
            }],
            step: 1,
        };
        integrate_semantics(&mut map, &bedroom);
        integrate_semantics(&mut map, &kitchen);
        assert_eq!(map.room_label(Cell::new(1, 0)), Some("bedroom"));
        assert_eq!(map.room_label(Cell::new(0, 0)), Some("kitchen"));
    }

    #[test]
    fn room_labels_only_on_known_cells() {
        let mut map = SemanticMap::new(6, 6, 0.25);
        let det = Detections {
            objects: vec![],
            rooms: vec![DetectedRoom {
                room_category: "kitchen".into(),
                min: Cell::new(0, 0),
                max: Cell::new(5, 5),
            }],
            step: 0,
        };
        integrate_semantics(&mut map, &det);
        assert_eq!(map.room_labels().count(), 0);
    }

    #[test]
    fn explored_fraction_arithmetic() {
        let mut map = SemanticMap::new(4, 3, 0.25);
        assert_eq!(explored_fraction(&map), 0.0);
        map.set_occ(Cell::new(0, 0), OccState::Free);
        map.set_occ(Cell::new(1, 0), OccState::Free);
        map.set_occ(Cell::new(2, 0), OccState::Obstacle);
        assert_eq!(explored_fraction(&map), 0.25);
        for y in 0..3 {
            for x in 0..4 {
                map.set_occ(Cell::new(x, y), OccState::Free);
            }
        }
        assert_eq!(explored_fraction(&map), 1.0);
    }

    #[test]
    fn pose_cell_free_after_integration() {
        let mut map = SemanticMap::new(8, 8, 0.25);
        let pose = AgentPose::new(Cell::new(3, 3), 90);
        integrate_depth(&mut map, &scan_single(pose, 2.0, 0.7, true));
        assert_eq!(map.occ(Cell::new(3, 3)), OccState::Free);
    }

    #[test]
    fn ray_permutation_invariance_without_conflicts() {
        let pose = AgentPose::new(Cell::new(4, 4), 0);
        let rays = vec![
            Ray { angle_offset_deg: -30.0, range_m: 0.9, hit: true },
            Ray { angle_offset_deg: 0.0, range_m: 1.1, hit: true },
            Ray { angle_offset_deg: 30.0, range_m: 2.0, hit: false },
        ];
        let scan_fwd = DepthScan { pose, max_range_m: 2.0, rays: rays.clone() };
        let mut rev = rays;
        rev.reverse();
        let scan_rev = DepthScan { pose, max_range_m: 2.0, rays: rev };
        let mut a = SemanticMap::new(16, 16, 0.25);
        let mut b = SemanticMap::new(16, 16, 0.25);
        integrate_depth(&mut a, &scan_fwd);
        integrate_depth(&mut b, &scan_rev);
        assert_eq!(a, b);
    }
}
