//! Frontier extraction, clustering, and linguistic summarization.
//!
//! A frontier cell is a known-free cell 4-adjacent to an unknown cell;
//! candidates are 8-connected clusters of such cells.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::grid::Cell;
use crate::mapping::{OccState, SemanticMap};

/// One frontier candidate: an 8-connected cluster of frontier cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    /// Stable within one extraction: assigned in row-major order of each
    /// cluster's minimal cell.
    pub id: usize,
    /// Member cells in row-major order.
    pub cells: Vec<Cell>,
    /// Arithmetic mean of member cell coordinates, in cell units.
    pub centroid: (f64, f64),
    pub size: usize,
}

/// Linguistic summary of a frontier used to build selection prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierContext {
    pub frontier_id: usize,
    /// Room label near the centroid, or "unknown area".
    pub room: String,
    /// Deduplicated, sorted object categories within the context radius.
    pub nearby_objects: Vec<String>,
    /// Shortest-path meters from the agent over known-free cells;
    /// infinite when unreachable through known space.
    pub distance_from_agent: f64,
}

pub const UNKNOWN_AREA: &str = "unknown area";

/// Exactly the cells satisfying the frontier predicate: known Free and
/// 4-adjacent to at least one in-bounds Unknown cell.
pub fn extract_frontier_cells(map: &SemanticMap) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for y in 0..map.height() {
        for x in 0..map.width() {
            let c = Cell::new(x, y);
            if map.occ(c) != OccState::Free {
                continue;
            }
            let frontier = c
                .neighbors4()
                .iter()
                .any(|n| map.in_bounds(*n) && map.occ(*n) == OccState::Unknown);
            if frontier {
                out.insert(c);
            }
        }
    }
    out
}

/// Group frontier cells into 8-connected components of at least
/// `min_cluster_size` cells. Ids follow row-major order of each component's
/// minimal cell, so identical inputs yield identical lists.
pub fn cluster_frontiers(cells: &BTreeSet<Cell>, min_cluster_size: usize) -> Vec<Frontier> {
    assert!(min_cluster_size >= 1, "min_cluster_size must be >= 1");
    let mut visited: BTreeSet<Cell> = BTreeSet::new();
    let mut clusters: Vec<Vec<Cell>> = Vec::new();
    // BTreeSet iterates row-major, so components are discovered in
    // row-major order of their minimal cell.
    for &start in cells {
        if visited.contains(&start) {
            continue;
        }
        let mut component = Vec::new();
        let mut queue = VecDeque::new();
        visited.insert(start);
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            component.push(c);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = c.offset(dx, dy);
                    if cells.contains(&n) && !visited.contains(&n) {
                        visited.insert(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        component.sort();
        clusters.push(component);
    }

    clusters
        .into_iter()
        .filter(|c| c.len() >= min_cluster_size)
        .enumerate()
        .map(|(id, cells)| {
            let n = cells.len() as f64;
            let cx = cells.iter().map(|c| c.x as f64).sum::<f64>() / n;
            let cy = cells.iter().map(|c| c.y as f64).sum::<f64>() / n;
            Frontier { id, size: cells.len(), centroid: (cx, cy), cells }
        })
        .collect()
}

/// Keep at most `n_max` frontiers: the largest first, ties broken by
/// centroid distance to the agent, then by id. Output keeps extraction ids.
pub fn cap_candidates(frontiers: Vec<Frontier>, agent_cell: Cell, n_max: usize) -> Vec<Frontier> {
    if frontiers.len() <= n_max {
        return frontiers;
    }
    let (ax, ay) = (agent_cell.x as f64, agent_cell.y as f64);
    let mut ranked: Vec<(usize, f64, Frontier)> = frontiers
        .into_iter()
        .map(|f| {
            let d = ((f.centroid.0 - ax).powi(2) + (f.centroid.1 - ay).powi(2)).sqrt();
            (f.size, d, f)
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(a.1.partial_cmp(&b.1).expect("finite distances"))
            .then(a.2.id.cmp(&b.2.id))
    });
    let mut kept: Vec<Frontier> = ranked.into_iter().take(n_max).map(|(_, _, f)| f).collect();
    kept.sort_by_key(|f| f.id);
    kept
}

/// Summarize a frontier for prompting: the room label of the nearest labeled
/// cell to the centroid (within `radius_m`), the sorted unique object
/// categories within `radius_m`, and the shortest-path distance from the
/// agent to the nearest frontier cell over known-free cells.
pub fn summarize(
    map: &SemanticMap,
    f: &Frontier,
    agent_cell: Cell,
    radius_m: f64,
) -> FrontierContext {
    let (cx, cy) = f.centroid;
    let radius_cells = radius_m / map.cell_size();

    let mut room: Option<(f64, Cell, String)> = None;
    for (cell, label) in map.room_labels() {
        let d = ((cell.x as f64 - cx).powi(2) + (cell.y as f64 - cy).powi(2)).sqrt();
        if d > radius_cells {
            continue;
        }
        let better = match &room {
            None => true,
            // Ties: smallest row-major cell.
            Some((best_d, best_c, _)) => d < *best_d || (d == *best_d && cell < *best_c),
        };
        if better {
            room = Some((d, cell, label.to_string()));
        }
    }

    let mut categories: BTreeSet<String> = BTreeSet::new();
    for (cell, _, category) in map.all_objects() {
        let d = ((cell.x as f64 - cx).powi(2) + (cell.y as f64 - cy).powi(2)).sqrt();
        if d <= radius_cells {
            categories.insert(category.to_string());
        }
    }

    FrontierContext {
        frontier_id: f.id,
        room: room.map(|(_, _, r)| r).unwrap_or_else(|| UNKNOWN_AREA.to_string()),
        nearby_objects: categories.into_iter().collect(),
        distance_from_agent: distance_over_free(map, agent_cell, &f.cells),
    }
}

/// BFS shortest-path meters from `from` to the nearest target cell, walking
/// only known-free cells. Unknown and obstacle cells are impassable for this
/// measurement. Infinity when no target is reachable.
pub fn distance_over_free(map: &SemanticMap, from: Cell, targets: &[Cell]) -> f64 {
    if !map.in_bounds(from) || map.occ(from) != OccState::Free {
        return f64::INFINITY;
    }
    let target_set: BTreeSet<Cell> = targets.iter().copied().collect();
    if target_set.contains(&from) {
        return 0.0;
    }
    let mut dist = vec![u32::MAX; (map.width() * map.height()) as usize];
    let idx = |c: Cell| (c.y * map.width() + c.x) as usize;
    let mut queue = VecDeque::new();
    dist[idx(from)] = 0;
    queue.push_back(from);
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)];
        for n in c.neighbors4() {
            if !map.in_bounds(n) || map.occ(n) != OccState::Free || dist[idx(n)] != u32::MAX {
                continue;
            }
            dist[idx(n)] = d + 1;
            if target_set.contains(&n) {
                return (d + 1) as f64 * map.cell_size();
            }
            queue.push_back(n);
        }
    }
    f64::INFINITY
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from_ascii(rows: &[&str]) -> SemanticMap {
        SemanticMap::from_ascii(rows, 0.25)
    }

    #[test]
    fn all_unknown_map_has_no_frontiers() {
        let map = SemanticMap::new(8, 8, 0.25);
        assert!(extract_frontier_cells(&map).is_empty());
    }

    #[test]
    fn single_free_cell_is_a_frontier() {
        let map = map_from_ascii(&["???", "?.?", "???"]);
        let cells = extract_frontier_cells(&map);
        assert_eq!(cells.len(), 1);
        assert!(cells.contains(&Cell::new(1, 1)));
    }

    #[test]
    fn fully_explored_map_has_no_frontiers() {
        let map = map_from_ascii(&["....", "..#.", "...."]);
        assert!(extract_frontier_cells(&map).is_empty());
    }

    #[test]
    fn cluster_two_adjacent_cells() {
        let mut cells = BTreeSet::new();
        cells.insert(Cell::new(3, 3));
        cells.insert(Cell::new(3, 4));
        let fs = cluster_frontiers(&cells, 1);
        assert_eq!(fs.len(), 1);
        assert_eq!(fs[0].centroid, (3.0, 3.5));
        assert_eq!(fs[0].size, 2);
    }

    #[test]
    fn cluster_empty_input() {
        assert!(cluster_frontiers(&BTreeSet::new(), 1).is_empty());
    }

    #[test]
    fn min_cluster_size_filters_slivers() {
        let mut cells = BTreeSet::new();
        cells.insert(Cell::new(0, 0));
        cells.insert(Cell::new(5, 5));
        cells.insert(Cell::new(6, 5));
        let fs = cluster_frontiers(&cells, 2);
        assert_eq!(fs.len(), 1);
        assert_eq!(fs[0].cells, vec![Cell::new(5, 5), Cell::new(6, 5)]);
    }

    #[test]
    fn diagonal_cells_join_one_cluster() {
        let mut cells = BTreeSet::new();
        cells.insert(Cell::new(2, 2));
        cells.insert(Cell::new(3, 3));
        let fs = cluster_frontiers(&cells, 1);
        assert_eq!(fs.len(), 1);
    }

    #[test]
    fn cap_keeps_largest() {
        let mut cells = BTreeSet::new();
        for x in 0..3 {
            cells.insert(Cell::new(x, 0));
        }
        for x in 0..2 {
            cells.insert(Cell::new(x, 5));
        }
        cells.insert(Cell::new(9, 9));
        let fs = cluster_frontiers(&cells, 1);
        let capped = cap_candidates(fs, Cell::new(0, 0), 2);
        assert_eq!(capped.len(), 2);
        assert_eq!(capped[0].size, 3);
        assert_eq!(capped[1].size, 2);
    }

    #[test]
    fn summarize_reports_room_and_objects() {
        use crate::perception::{DetectedObject, DetectedRoom, Detections};
        let mut map = map_from_ascii(&[
            "??????",
            "?....?",
            "?....?",
            "??????",
        ]);
        let det = Detections {
            objects: vec![
                DetectedObject {
                    category: "lamp".into(),
                    attributes: vec![],
                    cell: Cell::new(2, 1),
                    instance_id: "l1".into(),
                },
                DetectedObject {
                    category: "bed".into(),
                    attributes: vec![],
                    cell: Cell::new(3, 2),
                    instance_id: "b1".into(),
                },
            ],
            rooms: vec![DetectedRoom {
                room_category: "bedroom".into(),
                min: Cell::new(1, 1),
                max: Cell::new(4, 2),
            }],
            step: 0,
        };
        crate::mapping::integrate_semantics(&mut map, &det);
        let cells = extract_frontier_cells(&map);
        let fs = cluster_frontiers(&cells, 1);
        assert!(!fs.is_empty());
        let ctx = summarize(&map, &fs[0], Cell::new(2, 2), 2.0);
        assert_eq!(ctx.room, "bedroom");
        assert_eq!(ctx.nearby_objects, vec!["bed".to_string(), "lamp".to_string()]);
    }

    #[test]
    fn summarize_defaults_to_unknown_area() {
        let map = map_from_ascii(&["???", "?.?", "???"]);
        let fs = cluster_frontiers(&extract_frontier_cells(&map), 1);
        let ctx = summarize(&map, &fs[0], Cell::new(1, 1), 2.0);
        assert_eq!(ctx.room, UNKNOWN_AREA);
        assert!(ctx.nearby_objects.is_empty());
        assert_eq!(ctx.distance_from_agent, 0.0);
    }

    #[test]
    fn distance_to_adjacent_frontier_is_one_step() {
        let map = map_from_ascii(&["??????", "?....?", "??????"]);
        let cells = extract_frontier_cells(&map);
        let fs = cluster_frontiers(&cells, 1);
        // All four free cells are frontier cells; from (2,1) the nearest is itself.
        let ctx = summarize(&map, &fs[0], Cell::new(2, 1), 2.0);
        assert_eq!(ctx.distance_from_agent, 0.0);
        // Distance from a frontier member to a disjoint target list instead:
        let d = distance_over_free(&map, Cell::new(1, 1), &[Cell::new(2, 1)]);
        assert_eq!(d, 0.25);
    }

    #[test]
    fn deterministic_extraction_and_ids() {
        let map = map_from_ascii(&[
            "?.??.?",
            "?.??.?",
            "??????",
        ]);
        let a = cluster_frontiers(&extract_frontier_cells(&map), 1);
        let b = cluster_frontiers(&extract_frontier_cells(&map), 1);
        assert_eq!(a, b);
        for (i, f) in a.iter().enumerate() {
            assert_eq!(f.id, i);
        }
    }
}
