//! Top-down trajectory rendering to binary PPM (P6): walls dark, explored
//! free space light, unknown gray; the trajectory fades blue to white;
//! the goal cell is outlined green and rejected distractors red.

use std::path::Path;

use crate::grid::Cell;
use crate::mapping::{integrate_depth, OccState, SemanticMap};
use crate::perception::SensorConfig;
use crate::world::{sense_depth, step, Action, AgentPose, GridWorld};

use super::metrics::EpisodeRow;
use super::{BenchError, Episode};

const SCALE: usize = 6;

const COLOR_WALL: [u8; 3] = [40, 40, 40];
const COLOR_FREE: [u8; 3] = [230, 230, 230];
const COLOR_UNKNOWN: [u8; 3] = [150, 150, 150];
const COLOR_TRAJ_START: [u8; 3] = [40, 80, 255];
const COLOR_TRAJ_END: [u8; 3] = [255, 255, 255];
const COLOR_GOAL: [u8; 3] = [0, 200, 0];
const COLOR_DISTRACTOR: [u8; 3] = [220, 0, 0];

struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Image {
    fn new(width: usize, height: usize) -> Self {
        Image { width, height, pixels: vec![0; width * height * 3] }
    }

    fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    fn fill_cell(&mut self, cell: Cell, color: [u8; 3]) {
        for dy in 0..SCALE {
            for dx in 0..SCALE {
                self.put(
                    cell.x as i64 * SCALE as i64 + dx as i64,
                    cell.y as i64 * SCALE as i64 + dy as i64,
                    color,
                );
            }
        }
    }

    fn outline_cell(&mut self, cell: Cell, color: [u8; 3]) {
        let x0 = cell.x as i64 * SCALE as i64;
        let y0 = cell.y as i64 * SCALE as i64;
        for d in 0..SCALE as i64 {
            self.put(x0 + d, y0, color);
            self.put(x0 + d, y0 + SCALE as i64 - 1, color);
            self.put(x0, y0 + d, color);
            self.put(x0 + SCALE as i64 - 1, y0 + d, color);
        }
    }

    /// Bresenham segment in pixel space.
    fn line(&mut self, a: (i64, i64), b: (i64, i64), color: [u8; 3]) {
        let (mut x0, mut y0) = a;
        let (x1, y1) = b;
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, color);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

fn lerp_color(a: [u8; 3], b: [u8; 3], t: f64) -> [u8; 3] {
    let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * t).round() as u8;
    [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])]
}

fn center_px(cell: Cell) -> (i64, i64) {
    (
        cell.x as i64 * SCALE as i64 + SCALE as i64 / 2,
        cell.y as i64 * SCALE as i64 + SCALE as i64 / 2,
    )
}

/// Replay recorded actions on the world, rebuilding the occupancy belief the
/// agent would have held (mapping is deterministic given poses).
pub fn replay(
    world: &GridWorld,
    start: AgentPose,
    actions: &[Action],
    sensor: &SensorConfig,
) -> (SemanticMap, Vec<AgentPose>) {
    let mut map = SemanticMap::new(world.width(), world.height(), world.cell_size());
    let mut pose = start;
    let mut poses = vec![pose];
    let scan = sense_depth(world, &pose, sensor.fov_deg, sensor.n_rays, sensor.max_range_m)
        .expect("replay start pose");
    integrate_depth(&mut map, &scan);
    for action in actions {
        if *action == Action::Stop {
            break;
        }
        let (next, _collided) = step(world, &pose, *action).expect("replayable actions");
        pose = next;
        poses.push(pose);
        let scan = sense_depth(world, &pose, sensor.fov_deg, sensor.n_rays, sensor.max_range_m)
            .expect("replay pose");
        integrate_depth(&mut map, &scan);
    }
    (map, poses)
}

/// Render the final map and trajectory to a P6 PPM file.
pub fn render_trajectory(
    world: &GridWorld,
    map: &SemanticMap,
    poses: &[AgentPose],
    goal_cell: Cell,
    rejected_cells: &[Cell],
    out_path: &Path,
) -> Result<(), BenchError> {
    let mut img = Image::new(
        world.width() as usize * SCALE,
        world.height() as usize * SCALE,
    );
    for y in 0..world.height() {
        for x in 0..world.width() {
            let cell = Cell::new(x, y);
            let color = match map.occ(cell) {
                OccState::Unknown => COLOR_UNKNOWN,
                OccState::Free => COLOR_FREE,
                OccState::Obstacle => COLOR_WALL,
            };
            img.fill_cell(cell, color);
        }
    }

    // Blue-to-white gradient, one sample per pose.
    let n = poses.len();
    for (i, pair) in poses.windows(2).enumerate() {
        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let color = lerp_color(COLOR_TRAJ_START, COLOR_TRAJ_END, t);
        img.line(center_px(pair[0].cell), center_px(pair[1].cell), color);
    }
    if let Some(first) = poses.first() {
        img.fill_cell(first.cell, COLOR_TRAJ_START);
    }
    if let Some(last) = poses.last() {
        let (px, py) = center_px(last.cell);
        for dy in -1..=1 {
            for dx in -1..=1 {
                img.put(px + dx, py + dy, COLOR_TRAJ_END);
            }
        }
    }

    for cell in rejected_cells {
        img.outline_cell(*cell, COLOR_DISTRACTOR);
    }
    img.outline_cell(goal_cell, COLOR_GOAL);

    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out_path, img.to_ppm())?;
    Ok(())
}

/// Replay an episode row and render it.
pub fn render_episode(
    world: &GridWorld,
    episode: &Episode,
    row: &EpisodeRow,
    sensor: &SensorConfig,
    out_path: &Path,
) -> Result<(), BenchError> {
    let actions: Vec<Action> = row
        .actions
        .chars()
        .map(|c| match c {
            'M' => Ok(Action::MoveAhead),
            'L' => Ok(Action::RotateLeft),
            'R' => Ok(Action::RotateRight),
            'S' => Ok(Action::Stop),
            other => Err(BenchError::Validation(format!("bad action letter '{}'", other))),
        })
        .collect::<Result<_, _>>()?;
    let (map, poses) = replay(world, episode.start, &actions, sensor);
    let goal = world
        .object(&episode.goal_instance_id)
        .ok_or_else(|| BenchError::Validation("goal instance missing".into()))?;
    let rejected: Vec<Cell> = row
        .rejected_instance_ids
        .iter()
        .filter_map(|id| world.object(id).map(|o| o.position))
        .collect();
    render_trajectory(world, &map, &poses, goal.position, &rejected, out_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ObjectInstance;

    fn world() -> GridWorld {
        GridWorld::from_ascii_single_room(
            "render-fixture",
            &["########", "#......#", "#......#", "########"],
            "room",
            0.25,
            vec![ObjectInstance {
                id: "g".into(),
                category: "mug".into(),
                attributes: vec![],
                position: Cell::new(6, 2),
                hidden: false,
                container_hint: None,
            }],
        )
        .unwrap()
    }

    #[test]
    fn zero_action_render_is_a_valid_image() {
        let w = world();
        let sensor = SensorConfig::default();
        let (map, poses) = replay(&w, AgentPose::new(Cell::new(1, 1), 0), &[], &sensor);
        let dir = std::env::temp_dir().join("totnav-render-test");
        let path = dir.join("zero.ppm");
        render_trajectory(&w, &map, &poses, Cell::new(6, 2), &[], &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P6\n48 24\n255\n"));
        assert_eq!(bytes.len(), "P6\n48 24\n255\n".len() + 48 * 24 * 3);
    }

    #[test]
    fn straight_run_renders_gradient_and_reruns_identically() {
        let w = world();
        let sensor = SensorConfig::default();
        let actions = vec![Action::MoveAhead; 5];
        let (map, poses) = replay(&w, AgentPose::new(Cell::new(1, 1), 0), &actions, &sensor);
        assert_eq!(poses.len(), 6);
        let dir = std::env::temp_dir().join("totnav-render-test");
        let golden = dir.join("golden.ppm");
        let again = dir.join("again.ppm");
        render_trajectory(&w, &map, &poses, Cell::new(6, 2), &[Cell::new(3, 2)], &golden).unwrap();
        render_trajectory(&w, &map, &poses, Cell::new(6, 2), &[Cell::new(3, 2)], &again).unwrap();
        assert_eq!(std::fs::read(&golden).unwrap(), std::fs::read(&again).unwrap());
    }
}
