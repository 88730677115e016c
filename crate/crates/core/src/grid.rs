//! Grid cells and lattice traversal shared by the simulator and the mapper.

use serde::{Deserialize, Serialize};

/// A cell coordinate on the grid. `x` grows rightward, `y` grows downward,
/// so row-major order sorts by `(y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    /// Center of the cell in continuous cell units.
    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + 0.5, self.y as f64 + 0.5)
    }

    pub fn offset(&self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }

    /// 4-neighbors in row-major order (up, left, right, down).
    pub fn neighbors4(&self) -> [Cell; 4] {
        [
            self.offset(0, -1),
            self.offset(-1, 0),
            self.offset(1, 0),
            self.offset(0, 1),
        ]
    }

    pub fn chebyshev(&self, other: &Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    /// Euclidean distance between cell coordinates, in cell units.
    pub fn euclidean(&self, other: &Cell) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// One cell entered by a ray, with the parametric distance (in cell units)
/// at which the ray crossed into it.
#[derive(Debug, Clone, Copy)]
pub struct RayStep {
    pub cell: Cell,
    pub t_enter: f64,
}

/// Cells entered by a ray from `start` along `dir`, in crossing order, up to
/// parametric distance `t_max` (cell units). The start cell is not included.
///
/// Uses the floor convention: a point belongs to cell `(floor(x), floor(y))`.
/// When the ray crosses a lattice corner exactly, both indices advance at
/// once (diagonal step), matching what dense point sampling would observe.
pub fn ray_cells(start: (f64, f64), dir: (f64, f64), t_max: f64) -> Vec<RayStep> {
    let (px, py) = start;
    let (dx, dy) = dir;
    let mut x = px.floor() as i32;
    let mut y = py.floor() as i32;

    let step_x: i32 = if dx > 0.0 {
        1
    } else if dx < 0.0 {
        -1
    } else {
        0
    };
    let step_y: i32 = if dy > 0.0 {
        1
    } else if dy < 0.0 {
        -1
    } else {
        0
    };

    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };

    let mut t_next_x = if step_x > 0 {
        (x as f64 + 1.0 - px) / dx
    } else if step_x < 0 {
        (px - x as f64) / -dx
    } else {
        f64::INFINITY
    };
    let mut t_next_y = if step_y > 0 {
        (y as f64 + 1.0 - py) / dy
    } else if step_y < 0 {
        (py - y as f64) / -dy
    } else {
        f64::INFINITY
    };

    // Crossings closer than this are treated as one corner crossing. Rays at
    // 45 degrees off a cell center pass exactly through lattice corners, but
    // cos/sin round differently by a few ulps; without the tolerance the
    // traversal would visit sliver cells of measure ~1e-16 that dense point
    // sampling can never observe.
    const TIE_EPS: f64 = 1e-9;

    let mut out = Vec::new();
    loop {
        if t_next_x.is_infinite() && t_next_y.is_infinite() {
            break;
        }
        let t;
        let tie = t_next_x.is_finite()
            && t_next_y.is_finite()
            && (t_next_x - t_next_y).abs() <= TIE_EPS * t_next_x.abs().max(1.0);
        if tie {
            t = t_next_x.min(t_next_y);
            x += step_x;
            y += step_y;
            t_next_x += t_delta_x;
            t_next_y += t_delta_y;
        } else if t_next_x < t_next_y {
            t = t_next_x;
            x += step_x;
            t_next_x += t_delta_x;
        } else {
            t = t_next_y;
            y += step_y;
            t_next_y += t_delta_y;
        }
        if t > t_max {
            break;
        }
        out.push(RayStep {
            cell: Cell::new(x, y),
            t_enter: t,
        });
    }
    out
}

/// All cells a segment between two cell centers passes through, including
/// both side cells at exact corner crossings (supercover). Endpoint cells
/// are included. Used for line-of-sight tests.
pub fn supercover_line(a: Cell, b: Cell) -> Vec<Cell> {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    let dx = bx - ax;
    let dy = by - ay;
    let len = (dx * dx + dy * dy).sqrt();
    let mut cells = vec![a];
    if len == 0.0 {
        return cells;
    }
    let dir = (dx / len, dy / len);

    let mut x = a.x;
    let mut y = a.y;
    let step_x: i32 = if dx > 0.0 {
        1
    } else if dx < 0.0 {
        -1
    } else {
        0
    };
    let step_y: i32 = if dy > 0.0 {
        1
    } else if dy < 0.0 {
        -1
    } else {
        0
    };
    let t_delta_x = if dx != 0.0 { 1.0 / dir.0.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dir.1.abs() } else { f64::INFINITY };
    let mut t_next_x = if step_x != 0 { 0.5 * t_delta_x } else { f64::INFINITY };
    let mut t_next_y = if step_y != 0 { 0.5 * t_delta_y } else { f64::INFINITY };

    while (x, y) != (b.x, b.y) {
        if t_next_x < t_next_y {
            x += step_x;
            t_next_x += t_delta_x;
        } else if t_next_y < t_next_x {
            y += step_y;
            t_next_y += t_delta_y;
        } else {
            // Corner: record both side cells, then step diagonally.
            cells.push(Cell::new(x + step_x, y));
            cells.push(Cell::new(x, y + step_y));
            x += step_x;
            y += step_y;
            t_next_x += t_delta_x;
            t_next_y += t_delta_y;
        }
        cells.push(Cell::new(x, y));
        if cells.len() > 4 * ((dx.abs() + dy.abs()) as usize + 2) {
            break; // degenerate numeric input; never hit for lattice endpoints
        }
    }
    cells
}

/// Normalize an angle in degrees to the half-open interval (-180, 180].
pub fn normalize_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_east_crosses_cells_in_order() {
        let steps = ray_cells((0.5, 0.5), (1.0, 0.0), 3.0);
        let cells: Vec<Cell> = steps.iter().map(|s| s.cell).collect();
        assert_eq!(cells, vec![Cell::new(1, 0), Cell::new(2, 0), Cell::new(3, 0)]);
        assert!((steps[0].t_enter - 0.5).abs() < 1e-12);
        assert!((steps[2].t_enter - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ray_diagonal_steps_through_corners() {
        // 45 degrees from a cell center crosses lattice corners exactly.
        let d = (2.0f64).sqrt() / 2.0;
        let steps = ray_cells((0.5, 0.5), (d, d), 3.0);
        let cells: Vec<Cell> = steps.iter().map(|s| s.cell).collect();
        assert_eq!(cells, vec![Cell::new(1, 1), Cell::new(2, 2)]);
    }

    #[test]
    fn supercover_diagonal_includes_corner_side_cells() {
        let cells = supercover_line(Cell::new(0, 0), Cell::new(2, 2));
        assert!(cells.contains(&Cell::new(1, 0)));
        assert!(cells.contains(&Cell::new(0, 1)));
        assert!(cells.contains(&Cell::new(1, 1)));
        assert!(cells.contains(&Cell::new(2, 2)));
    }

    #[test]
    fn supercover_straight_line() {
        let cells = supercover_line(Cell::new(2, 3), Cell::new(5, 3));
        assert_eq!(
            cells,
            vec![Cell::new(2, 3), Cell::new(3, 3), Cell::new(4, 3), Cell::new(5, 3)]
        );
    }

    #[test]
    fn normalize_deg_wraps() {
        assert_eq!(normalize_deg(190.0), -170.0);
        assert_eq!(normalize_deg(-190.0), 170.0);
        assert_eq!(normalize_deg(180.0), 180.0);
        assert_eq!(normalize_deg(360.0), 0.0);
    }
}
