//! Procedural suite generation: corridor worlds with furnished side rooms,
//! goals placed in their highest-affinity room, instructions from templates.
//!
//! Construction guarantees the properties the harness audits later: relation
//! phrases name an object within 1.0 m of the goal, attribute terms are
//! present on the goal instance, distract variants add one same-category
//! plain distractor near the start, hidden goals sit adjacent to their
//! container, and each non-distract goal is the unique instance of its
//! category in its world.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::agent::Instruction;
use crate::grid::Cell;
use crate::llm::AffinityTable;
use crate::world::{AgentPose, CellState, GridWorld, ObjectInstance};

use super::{BenchError, Episode, GenParams, Split, Suite, SuiteManifest};

const ROOMS_PER_SIDE: usize = 5;
const ROOM_W: i32 = 9;
const ROOM_H: i32 = 7;

/// Room types and their signature furniture; the first item is placed just
/// inside the door so it is visible from the corridor.
const ROOM_TYPES: &[(&str, &[&str])] = &[
    ("bedroom", &["bed", "dresser", "desk lamp", "wardrobe"]),
    ("kitchen", &["fridge", "sink", "stove", "toaster"]),
    ("bathroom", &["toilet", "bathtub", "towel rack"]),
    ("living room", &["sofa", "coffee table", "bookshelf", "armchair"]),
    ("office", &["desk", "office chair", "filing cabinet", "monitor"]),
    ("dining room", &["dining table", "sideboard", "candle holder"]),
    ("garage", &["workbench", "toolbox", "bicycle"]),
    ("laundry room", &["washing machine", "dryer", "ironing board"]),
    ("kids room", &["toy box", "bunk bed", "rocking horse"]),
    ("gym", &["treadmill", "dumbbell rack", "yoga mat"]),
    ("pantry", &["storage shelf", "crate", "jar rack"]),
];

const HALLWAY: &str = "hallway";

pub const COMMON_GOALS: &[&str] = &[
    "alarm clock", "apple", "baseball bat", "basketball", "bowl", "garbage can",
    "house plant", "laptop", "mug", "spray bottle", "television", "vase",
];

pub const UNCOMMON_GOALS: &[&str] = &[
    "gingerbread house", "lava lamp", "rubber duck", "gnome statue", "ukulele",
    "snow globe", "whoopee cushion", "bonsai tree", "disco ball", "typewriter",
    "chess set", "terrarium",
];

/// Attribute families; one attribute per family keeps descriptions
/// consistent (never "small, large").
const ATTRIBUTE_GROUPS: &[&[&str]] = &[
    &["small", "large", "tiny"],
    &["red", "blue", "green", "yellow"],
    &["metallic", "wooden", "plastic", "ceramic"],
    &["shiny", "striped", "plain", "dusty"],
];

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
struct RoomPlan {
    room_type: String,
    interior_min: Cell,
    interior_max: Cell,
    door_x: i32,
    /// The two in-room cells adjacent to the door gap.
    door_inside: [Cell; 2],
    /// (instance_id, category, cell) of placed furniture.
    furniture: Vec<(String, String, Cell)>,
}

struct WorldDraft {
    id: String,
    width: i32,
    height: i32,
    occ_rows: Vec<Vec<char>>,
    room_rows: Vec<Vec<char>>,
    room_names: std::collections::BTreeMap<char, String>,
    objects: Vec<ObjectInstance>,
    rooms: Vec<RoomPlan>,
    corridor_y: i32,
    next_obj: usize,
    used_cells: BTreeSet<Cell>,
    /// Shuffled category pools consumed by episode assignment.
    common_pool: Vec<String>,
    uncommon_pool: Vec<String>,
}

impl WorldDraft {
    fn alloc_object_id(&mut self) -> String {
        self.next_obj += 1;
        format!("{}-o{:03}", self.id, self.next_obj)
    }

    fn add_object(
        &mut self,
        category: &str,
        attributes: Vec<String>,
        cell: Cell,
        hidden: bool,
        container_hint: Option<String>,
    ) -> String {
        let id = self.alloc_object_id();
        self.objects.push(ObjectInstance {
            id: id.clone(),
            category: category.to_string(),
            attributes,
            position: cell,
            hidden,
            container_hint,
        });
        self.used_cells.insert(cell);
        id
    }

    fn interior_cells(&self, room: &RoomPlan) -> Vec<Cell> {
        let mut out = Vec::new();
        for y in room.interior_min.y..=room.interior_max.y {
            for x in room.interior_min.x..=room.interior_max.x {
                out.push(Cell::new(x, y));
            }
        }
        out
    }

    fn pick_unused_interior(&self, rng: &mut ChaCha8Rng, room: &RoomPlan) -> Option<Cell> {
        let candidates: Vec<Cell> = self
            .interior_cells(room)
            .into_iter()
            .filter(|c| !self.used_cells.contains(c))
            .collect();
        if candidates.is_empty() {
            None
        } else {
            Some(candidates[rng.random_range(0..candidates.len())])
        }
    }

    /// An unused cell orthogonally adjacent (falling back to diagonal) to
    /// `anchor`, inside the room. Both stay within 1.0 m of the anchor.
    fn pick_adjacent(&self, rng: &mut ChaCha8Rng, room: &RoomPlan, anchor: Cell) -> Option<Cell> {
        let in_room = |c: &Cell| {
            c.x >= room.interior_min.x
                && c.x <= room.interior_max.x
                && c.y >= room.interior_min.y
                && c.y <= room.interior_max.y
        };
        for offsets in [
            [(0, -1), (-1, 0), (1, 0), (0, 1)].as_slice(),
            [(-1, -1), (1, -1), (-1, 1), (1, 1)].as_slice(),
        ] {
            let candidates: Vec<Cell> = offsets
                .iter()
                .map(|(dx, dy)| anchor.offset(*dx, *dy))
                .filter(|c| in_room(c) && !self.used_cells.contains(c))
                .collect();
            if !candidates.is_empty() {
                return Some(candidates[rng.random_range(0..candidates.len())]);
            }
        }
        None
    }

    fn into_world(self) -> Result<GridWorld, BenchError> {
        let occ: Vec<CellState> = self
            .occ_rows
            .iter()
            .flat_map(|row| {
                row.iter().map(|c| match c {
                    '#' => CellState::Wall,
                    _ => CellState::Free,
                })
            })
            .collect();
        let rooms: Vec<char> = self.room_rows.iter().flatten().copied().collect();
        Ok(GridWorld::new(
            self.id,
            self.width,
            self.height,
            crate::world::DEFAULT_CELL_SIZE_M,
            occ,
            rooms,
            self.room_names,
            self.objects,
        )?)
    }
}

fn build_world_draft(master_seed: u64, index: usize) -> WorldDraft {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master_seed, 0x8000_0000 + index as u64));
    let width = 1 + (ROOMS_PER_SIDE as i32) * (ROOM_W + 1);
    let height = 2 * ROOM_H + 7;
    let top_wall_y = ROOM_H + 1;
    let bottom_wall_y = ROOM_H + 5;
    let corridor_y = ROOM_H + 3;

    let mut occ_rows = vec![vec!['.'; width as usize]; height as usize];
    for x in 0..width as usize {
        occ_rows[0][x] = '#';
        occ_rows[(height - 1) as usize][x] = '#';
        occ_rows[top_wall_y as usize][x] = '#';
        occ_rows[bottom_wall_y as usize][x] = '#';
    }
    for y in 0..height as usize {
        occ_rows[y][0] = '#';
        occ_rows[y][(width - 1) as usize] = '#';
    }
    // Separator walls between rooms, in the room bands only.
    for k in 1..ROOMS_PER_SIDE as i32 {
        let x = (k * (ROOM_W + 1)) as usize;
        for y in 1..=ROOM_H {
            occ_rows[y as usize][x] = '#';
        }
        for y in (bottom_wall_y + 1)..(height - 1) {
            occ_rows[y as usize][x] = '#';
        }
    }

    let mut type_order: Vec<usize> = (0..ROOM_TYPES.len()).collect();
    type_order.shuffle(&mut rng);

    let room_rows = vec![vec!['h'; width as usize]; height as usize];
    let mut room_names = std::collections::BTreeMap::new();
    room_names.insert('h', HALLWAY.to_string());

    let id = format!("world-{:02}", index);
    let mut draft = WorldDraft {
        id,
        width,
        height,
        occ_rows,
        room_rows,
        room_names,
        objects: Vec::new(),
        rooms: Vec::new(),
        corridor_y,
        next_obj: 0,
        used_cells: BTreeSet::new(),
        common_pool: Vec::new(),
        uncommon_pool: Vec::new(),
    };

    let mut rooms = Vec::new();
    for side in 0..2 {
        for k in 0..ROOMS_PER_SIDE {
            let idx = side * ROOMS_PER_SIDE + k;
            let id_char = char::from(b'0' + idx as u8);
            let (room_type, _) = ROOM_TYPES[type_order[idx]];
            let min_x = 1 + (k as i32) * (ROOM_W + 1);
            let max_x = min_x + ROOM_W - 1;
            let (min_y, max_y, wall_y, inside_y) = if side == 0 {
                (1, ROOM_H, top_wall_y, ROOM_H)
            } else {
                (bottom_wall_y + 1, height - 2, bottom_wall_y, bottom_wall_y + 1)
            };
            let door_x = rng.random_range(min_x + 1..=max_x - 2);
            draft.occ_rows[wall_y as usize][door_x as usize] = '.';
            draft.occ_rows[wall_y as usize][(door_x + 1) as usize] = '.';

            for y in min_y..=max_y {
                for x in min_x..=max_x {
                    draft.room_rows[y as usize][x as usize] = id_char;
                }
            }
            draft.room_rows[wall_y as usize][door_x as usize] = id_char;
            draft.room_rows[wall_y as usize][(door_x + 1) as usize] = id_char;
            draft.room_names.insert(id_char, room_type.to_string());

            rooms.push(RoomPlan {
                room_type: room_type.to_string(),
                interior_min: Cell::new(min_x, min_y),
                interior_max: Cell::new(max_x, max_y),
                door_x,
                door_inside: [Cell::new(door_x, inside_y), Cell::new(door_x + 1, inside_y)],
                furniture: Vec::new(),
            });
        }
    }

    // Furnish: the first signature item sits just inside the door.
    for r in 0..rooms.len() {
        let categories: Vec<String> = ROOM_TYPES
            .iter()
            .find(|(t, _)| *t == rooms[r].room_type)
            .map(|(_, f)| f.iter().map(|s| s.to_string()).collect())
            .expect("room type known");
        for (i, category) in categories.iter().enumerate() {
            let cell = if i == 0 {
                rooms[r].door_inside[0]
            } else {
                match draft.pick_unused_interior(&mut rng, &rooms[r]) {
                    Some(c) => c,
                    None => continue,
                }
            };
            let id = draft.add_object(category, vec![], cell, false, None);
            rooms[r].furniture.push((id, category.clone(), cell));
        }
    }
    draft.rooms = rooms;

    let mut common: Vec<String> = COMMON_GOALS.iter().map(|s| s.to_string()).collect();
    common.shuffle(&mut rng);
    let mut uncommon: Vec<String> = UNCOMMON_GOALS.iter().map(|s| s.to_string()).collect();
    uncommon.shuffle(&mut rng);
    draft.common_pool = common;
    draft.uncommon_pool = uncommon;

    draft
}

/// Room with the highest affinity to the goal (hallway excluded).
fn goal_room_index(table: &AffinityTable, draft: &WorldDraft, category: &str) -> usize {
    let mut best = 0usize;
    let mut best_score = f64::MIN;
    for (i, room) in draft.rooms.iter().enumerate() {
        let s = table.score(category, &room.room_type);
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

/// Furniture instance in the room with the highest affinity to the goal.
fn best_furniture(table: &AffinityTable, room: &RoomPlan, category: &str) -> (String, String, Cell) {
    room.furniture
        .iter()
        .max_by(|a, b| {
            table
                .score(category, &a.1)
                .total_cmp(&table.score(category, &b.1))
                .then(b.0.cmp(&a.0))
        })
        .cloned()
        .expect("rooms are furnished")
}

fn gen_error(split: Split, msg: impl Into<String>) -> BenchError {
    BenchError::Generation { split: split.as_str().to_string(), msg: msg.into() }
}

/// Generate a deterministic suite: same master seed, same bytes.
pub fn generate_suite(master_seed: u64, params: &GenParams) -> Result<Suite, BenchError> {
    if params.worlds == 0 || params.episodes_per_split == 0 || params.splits.is_empty() {
        return Err(BenchError::Config("gen params must be positive".into()));
    }
    let table = AffinityTable::shipped();
    let mut drafts: Vec<WorldDraft> = (0..params.worlds)
        .map(|i| build_world_draft(master_seed, i))
        .collect();

    let mut episodes = Vec::new();
    for (split_no, &split) in params.splits.iter().enumerate() {
        for k in 0..params.episodes_per_split {
            let w = k % params.worlds;
            let mut rng = ChaCha8Rng::seed_from_u64(mix(
                master_seed,
                (split_no as u64) << 32 | k as u64,
            ));
            let episode_seed = mix(master_seed, mix(split_no as u64 + 101, k as u64));
            let draft = &mut drafts[w];

            let category = match split {
                Split::Uncommon => draft.uncommon_pool.pop(),
                _ => draft.common_pool.pop(),
            }
            .ok_or_else(|| {
                gen_error(
                    split,
                    format!(
                        "world {} ran out of distinct goal categories; use more worlds or fewer episodes per split",
                        draft.id
                    ),
                )
            })?;

            let room_idx = goal_room_index(&table, draft, &category);
            let room = draft.rooms[room_idx].clone();

            let mut attributes: Vec<String> = Vec::new();
            let mut relation_terms: Vec<String> = Vec::new();
            let mut relation_phrase = String::new();
            let mut hidden = false;
            let mut container_hint = None;

            let n_attrs = match split {
                Split::Appearance | Split::AppearanceDistract => 2,
                Split::SpaceDistract | Split::HiddenDistract => 1,
                _ => 0,
            };
            if n_attrs > 0 {
                let mut groups: Vec<&[&str]> = ATTRIBUTE_GROUPS.to_vec();
                groups.shuffle(&mut rng);
                attributes = groups
                    .into_iter()
                    .take(n_attrs)
                    .map(|g| g[rng.random_range(0..g.len())].to_string())
                    .collect();
            }

            let anchor = match split {
                Split::Space | Split::SpaceDistract => {
                    Some(best_furniture(&table, &room, &category))
                }
                Split::Hidden | Split::HiddenDistract => {
                    let f = best_furniture(&table, &room, &category);
                    hidden = true;
                    container_hint = Some(format!("under the {}", f.1));
                    Some(f)
                }
                _ => None,
            };

            let goal_cell = match &anchor {
                Some((_, _, cell)) => draft
                    .pick_adjacent(&mut rng, &room, *cell)
                    .ok_or_else(|| gen_error(split, "no free cell adjacent to anchor"))?,
                None => draft
                    .pick_unused_interior(&mut rng, &room)
                    .ok_or_else(|| gen_error(split, "room is fully occupied"))?,
            };

            if let Some((_, anchor_cat, _)) = &anchor {
                match split {
                    Split::Space | Split::SpaceDistract => {
                        relation_phrase = format!("near the {}", anchor_cat);
                    }
                    Split::Hidden | Split::HiddenDistract => {
                        relation_phrase = format!("under the {}", anchor_cat);
                    }
                    _ => {}
                }
                relation_terms.push(relation_phrase.clone());
            }

            let goal_id = draft.add_object(
                &category,
                attributes.clone(),
                goal_cell,
                hidden,
                container_hint.clone(),
            );

            // Start at the corridor end far from the goal room's door.
            let far_left = room.door_x > draft.width / 2;
            let offset = rng.random_range(1..=3);
            let start_x = if far_left { 1 + offset } else { draft.width - 2 - offset };
            let start = AgentPose::new(
                Cell::new(start_x, draft.corridor_y),
                30 * rng.random_range(0..12u16),
            );

            // Distract variants: a plain same-category object in the room
            // whose door is nearest the start, just inside its door.
            if split.has_distractor() {
                let mut best: Option<(i32, usize)> = None;
                for (i, r) in draft.rooms.iter().enumerate() {
                    if i == room_idx {
                        continue;
                    }
                    let d = (r.door_x - start_x).abs();
                    if best.map_or(true, |(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
                let (_, d_idx) = best.ok_or_else(|| gen_error(split, "no distractor room"))?;
                let d_room = draft.rooms[d_idx].clone();
                let d_cell = if draft.used_cells.contains(&d_room.door_inside[1]) {
                    draft
                        .pick_adjacent(&mut rng, &d_room, d_room.door_inside[1])
                        .ok_or_else(|| gen_error(split, "distractor room full"))?
                } else {
                    d_room.door_inside[1]
                };
                draft.add_object(&category, vec![], d_cell, false, None);
            }

            let text = match split {
                Split::CategoryOnly | Split::Uncommon => format!("Find the {}.", category),
                Split::Appearance | Split::AppearanceDistract => {
                    format!("Find the {} {}.", attributes.join(", "), category)
                }
                Split::Space | Split::SpaceDistract => {
                    if attributes.is_empty() {
                        format!("Find the {} {}.", category, relation_phrase)
                    } else {
                        format!("Find the {} {} {}.", attributes.join(", "), category, relation_phrase)
                    }
                }
                Split::Hidden | Split::HiddenDistract => {
                    if attributes.is_empty() {
                        format!("Find the {} hidden {}.", category, relation_phrase)
                    } else {
                        format!(
                            "Find the {} {} hidden {}.",
                            attributes.join(", "),
                            category,
                            relation_phrase
                        )
                    }
                }
            };

            episodes.push(Episode {
                id: format!("ep-{}-{:03}", split.as_str(), k),
                world_ref: draft.id.clone(),
                start,
                instruction: Instruction {
                    text,
                    goal_category: category,
                    attribute_terms: attributes,
                    relation_terms,
                },
                goal_instance_id: goal_id,
                split,
                seed: episode_seed,
            });
        }
    }

    let mut worlds = std::collections::BTreeMap::new();
    let mut world_ids = Vec::new();
    for draft in drafts {
        world_ids.push(draft.id.clone());
        let world = draft.into_world()?;
        worlds.insert(world.id().to_string(), world);
    }

    let suite = Suite {
        manifest: SuiteManifest { master_seed, params: params.clone(), world_ids },
        worlds,
        episodes,
    };
    suite.validate()?;

    // Start-to-goal connectivity is part of the generation contract.
    for ep in &suite.episodes {
        let world = suite.world(&ep.world_ref)?;
        let goal = world.object(&ep.goal_instance_id).expect("validated");
        let reachable =
            crate::world::shortest_path_length(world, ep.start.cell, goal.position)?;
        match reachable {
            Some(d) if d > 0.0 => {}
            _ => {
                return Err(gen_error(
                    ep.split,
                    format!("episode {}: goal not reachable from start", ep.id),
                ))
            }
        }
    }
    Ok(suite)
}
