//! Simulated detector: turns ground-truth visibility into (optionally noisy)
//! detections against a prompt vocabulary, and renders scenes as text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{normalize_deg, Cell};
use crate::world::{visible_objects, AgentPose, GridWorld, WorldError};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("prompt vocabulary must not be empty")]
    EmptyVocab,
    #[error("prompt vocabulary has duplicate entry '{0}'")]
    DuplicatePrompt(String),
    #[error("noise probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Object and room category prompts the detector is queried with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptVocab {
    pub object_prompts: Vec<String>,
    pub room_prompts: Vec<String>,
}

impl PromptVocab {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.object_prompts.is_empty() || self.room_prompts.is_empty() {
            return Err(PerceptionError::EmptyVocab);
        }
        for list in [&self.object_prompts, &self.room_prompts] {
            let mut seen = std::collections::HashSet::new();
            for p in list {
                if !seen.insert(p) {
                    return Err(PerceptionError::DuplicatePrompt(p.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct VocabFile {
            objects: Vec<String>,
            rooms: Vec<String>,
        }
        let f: VocabFile = serde_json::from_str(s)?;
        Ok(PromptVocab { object_prompts: f.objects, room_prompts: f.rooms })
    }
}

/// Detector imperfection model. All draws are keyed on
/// `(seed, step, instance)` so reruns and parallel episodes reproduce the
/// same noise realization regardless of evaluation order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModel {
    pub miss_prob: f64,
    pub false_pos_prob: f64,
    /// Optional category -> category substitution applied after the miss filter.
    #[serde(default)]
    pub confusion: std::collections::BTreeMap<String, String>,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noise_free(seed: u64) -> Self {
        NoiseModel { miss_prob: 0.0, false_pos_prob: 0.0, confusion: Default::default(), seed }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        for p in [self.miss_prob, self.false_pos_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(PerceptionError::BadProbability(p));
            }
        }
        Ok(())
    }
}

/// Sensor geometry shared by depth sensing and detection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SensorConfig {
    pub fov_deg: f64,
    pub n_rays: usize,
    pub max_range_m: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig { fov_deg: 90.0, n_rays: 60, max_range_m: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub category: String,
    pub attributes: Vec<String>,
    pub cell: Cell,
    pub instance_id: String,
}

/// A detected room with its reported extent (inclusive cell rectangle).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedRoom {
    pub room_category: String,
    pub min: Cell,
    pub max: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detections {
    pub objects: Vec<DetectedObject>,
    pub rooms: Vec<DetectedRoom>,
    pub step: u64,
}

/// splitmix64; stable across platforms.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Uniform draw in [0, 1) keyed on (seed, step, tag).
fn noise_u01(seed: u64, step: u64, tag: &str) -> f64 {
    let h = mix64(seed ^ mix64(step ^ mix64(fnv1a(tag))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Query the simulated detector. Visible objects whose category is in the
/// vocabulary pass a seeded miss/confusion filter; a false positive may be
/// injected at a visible free cell; the agent's current room is always
/// reported from ground truth with the room's bounding extent.
pub fn detect(
    world: &GridWorld,
    pose: &AgentPose,
    vocab: &PromptVocab,
    noise: &NoiseModel,
    sensor: &SensorConfig,
    step: u64,
) -> Result<Detections, PerceptionError> {
    vocab.validate()?;
    noise.validate()?;

    let mut objects = Vec::new();
    let visible = visible_objects(world, pose, sensor.fov_deg, sensor.max_range_m)?;
    for obj in &visible {
        if !vocab.object_prompts.contains(&obj.category) {
            continue;
        }
        if noise.miss_prob > 0.0 {
            let u = noise_u01(noise.seed, step, &format!("miss/{}", obj.id));
            if u < noise.miss_prob {
                continue;
            }
        }
        let mut category = obj.category.clone();
        if let Some(sub) = noise.confusion.get(&category) {
            category = sub.clone();
            if !vocab.object_prompts.contains(&category) {
                continue;
            }
        }
        objects.push(DetectedObject {
            category,
            attributes: obj.attributes.clone(),
            cell: obj.position,
            instance_id: obj.id.clone(),
        });
    }

    if noise.false_pos_prob > 0.0 {
        let u = noise_u01(noise.seed, step, "false-positive");
        if u < noise.false_pos_prob {
            if let Some(cell) = false_positive_cell(world, pose, sensor, noise, step) {
                let pick = noise_u01(noise.seed, step, "false-positive/category");
                let i = (pick * vocab.object_prompts.len() as f64) as usize;
                let i = i.min(vocab.object_prompts.len() - 1);
                objects.push(DetectedObject {
                    category: vocab.object_prompts[i].clone(),
                    attributes: vec![],
                    cell,
                    instance_id: format!("fp-{}-{}", noise.seed, step),
                });
            }
        }
    }

    // The current room is always reported from the ground-truth room grid,
    // independent of the miss filter.
    let mut rooms = Vec::new();
    if let (Some(room_id), Some(name)) = (world.room_id(pose.cell), world.room_name(pose.cell)) {
        if let Some((min, max)) = world.room_extent(room_id) {
            rooms.push(DetectedRoom { room_category: name.to_string(), min, max });
        }
    }

    Ok(Detections { objects, rooms, step })
}

/// Deterministically pick a visible free cell for a false positive: the cell
/// at the hit-free end of a seeded depth ray.
fn false_positive_cell(
    world: &GridWorld,
    pose: &AgentPose,
    sensor: &SensorConfig,
    noise: &NoiseModel,
    step: u64,
) -> Option<Cell> {
    let u = noise_u01(noise.seed, step, "false-positive/cell");
    let offset = (u - 0.5) * sensor.fov_deg;
    let angle = (pose.heading_deg as f64 + offset).to_radians();
    let dir = (angle.cos(), angle.sin());
    let t_max = sensor.max_range_m / world.cell_size();
    let mut last_free = None;
    for s in crate::grid::ray_cells(pose.cell.center(), dir, t_max) {
        match world.state(s.cell) {
            Some(crate::world::CellState::Free) => last_free = Some(s.cell),
            _ => break,
        }
    }
    last_free
}

/// Relative direction bucket of `target` seen from `pose`.
pub fn relative_direction(pose: &AgentPose, target: Cell) -> &'static str {
    if target == pose.cell {
        return "ahead";
    }
    let dx = (target.x - pose.cell.x) as f64;
    let dy = (target.y - pose.cell.y) as f64;
    let rel = normalize_deg(dy.atan2(dx).to_degrees() - pose.heading_deg as f64);
    if rel.abs() <= 45.0 {
        "ahead"
    } else if rel.abs() >= 135.0 {
        "behind"
    } else if rel > 0.0 {
        "right"
    } else {
        "left"
    }
}

/// Render detections as one deterministic sentence, e.g.
/// `You see: small metallic alarm clock ahead; you are in the bedroom.`
pub fn describe_scene(d: &Detections, pose: &AgentPose) -> String {
    let room_phrase = match d.rooms.first() {
        Some(r) => format!("you are in the {}", r.room_category),
        None => "you are in an unlabeled area".to_string(),
    };
    if d.objects.is_empty() {
        return format!("You see nothing notable; {}.", room_phrase);
    }
    let parts: Vec<String> = d
        .objects
        .iter()
        .map(|o| {
            let mut words: Vec<&str> = o.attributes.iter().map(|s| s.as_str()).collect();
            words.push(&o.category);
            format!("{} {}", words.join(" "), relative_direction(pose, o.cell))
        })
        .collect();
    format!("You see: {}; {}.", parts.join("; "), room_phrase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ObjectInstance;

    fn vocab() -> PromptVocab {
        PromptVocab {
            object_prompts: vec!["bowl".into(), "mug".into(), "alarm clock".into()],
            room_prompts: vec!["kitchen".into(), "bedroom".into()],
        }
    }

    fn world_with_bowl() -> GridWorld {
        GridWorld::from_ascii_single_room(
            "t",
            &["......", "......", "......"],
            "kitchen",
            0.25,
            vec![ObjectInstance {
                id: "o1".into(),
                category: "bowl".into(),
                attributes: vec![],
                position: Cell::new(4, 1),
                hidden: false,
                container_hint: None,
            }],
        )
        .unwrap()
    }

    #[test]
    fn noise_free_detection_passes_through() {
        let w = world_with_bowl();
        let d = detect(
            &w,
            &AgentPose::new(Cell::new(1, 1), 0),
            &vocab(),
            &NoiseModel::noise_free(1),
            &SensorConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(d.objects.len(), 1);
        assert_eq!(d.objects[0].category, "bowl");
        assert_eq!(d.objects[0].cell, Cell::new(4, 1));
        assert_eq!(d.rooms[0].room_category, "kitchen");
    }

    #[test]
    fn full_miss_drops_objects_but_keeps_rooms() {
        let w = world_with_bowl();
        let noise = NoiseModel { miss_prob: 1.0, ..NoiseModel::noise_free(1) };
        let d = detect(
            &w,
            &AgentPose::new(Cell::new(1, 1), 0),
            &vocab(),
            &noise,
            &SensorConfig::default(),
            0,
        )
        .unwrap();
        assert!(d.objects.is_empty());
        assert!(!d.rooms.is_empty());
    }

    #[test]
    fn miss_rate_matches_bernoulli_model() {
        // Monte-Carlo estimate over seeds: detection rate ~ 0.7 +/- 0.03.
        let w = world_with_bowl();
        let pose = AgentPose::new(Cell::new(1, 1), 0);
        let mut detected = 0;
        let trials = 1000;
        for seed in 0..trials {
            let noise = NoiseModel { miss_prob: 0.3, ..NoiseModel::noise_free(seed) };
            let d = detect(&w, &pose, &vocab(), &noise, &SensorConfig::default(), 0).unwrap();
            if !d.objects.is_empty() {
                detected += 1;
            }
        }
        let rate = detected as f64 / trials as f64;
        assert!((rate - 0.7).abs() <= 0.03, "empirical rate {}", rate);
    }

    #[test]
    fn detection_is_deterministic_per_key() {
        let w = world_with_bowl();
        let pose = AgentPose::new(Cell::new(1, 1), 0);
        let noise = NoiseModel { miss_prob: 0.5, false_pos_prob: 0.3, ..NoiseModel::noise_free(42) };
        let a = detect(&w, &pose, &vocab(), &noise, &SensorConfig::default(), 3).unwrap();
        let b = detect(&w, &pose, &vocab(), &noise, &SensorConfig::default(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn confusion_substitutes_category() {
        let w = world_with_bowl();
        let mut noise = NoiseModel::noise_free(1);
        noise.confusion.insert("bowl".into(), "mug".into());
        let d = detect(
            &w,
            &AgentPose::new(Cell::new(1, 1), 0),
            &vocab(),
            &noise,
            &SensorConfig::default(),
            0,
        )
        .unwrap();
        assert_eq!(d.objects[0].category, "mug");
    }

    #[test]
    fn empty_vocab_is_a_configuration_error() {
        let w = world_with_bowl();
        let empty = PromptVocab { object_prompts: vec![], room_prompts: vec![] };
        let err = detect(
            &w,
            &AgentPose::new(Cell::new(1, 1), 0),
            &empty,
            &NoiseModel::noise_free(1),
            &SensorConfig::default(),
            0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn describe_scene_single_object() {
        let pose = AgentPose::new(Cell::new(1, 1), 0);
        let d = Detections {
            objects: vec![DetectedObject {
                category: "alarm clock".into(),
                attributes: vec!["small".into(), "metallic".into()],
                cell: Cell::new(4, 1),
                instance_id: "o9".into(),
            }],
            rooms: vec![DetectedRoom {
                room_category: "bedroom".into(),
                min: Cell::new(0, 0),
                max: Cell::new(5, 2),
            }],
            step: 0,
        };
        assert_eq!(
            describe_scene(&d, &pose),
            "You see: small metallic alarm clock ahead; you are in the bedroom."
        );
    }

    #[test]
    fn describe_scene_empty_and_multiple() {
        let pose = AgentPose::new(Cell::new(1, 1), 0);
        let empty = Detections {
            objects: vec![],
            rooms: vec![DetectedRoom {
                room_category: "kitchen".into(),
                min: Cell::new(0, 0),
                max: Cell::new(2, 2),
            }],
            step: 0,
        };
        assert_eq!(
            describe_scene(&empty, &pose),
            "You see nothing notable; you are in the kitchen."
        );
        let two = Detections {
            objects: vec![
                DetectedObject {
                    category: "bowl".into(),
                    attributes: vec![],
                    cell: Cell::new(4, 1),
                    instance_id: "a".into(),
                },
                DetectedObject {
                    category: "mug".into(),
                    attributes: vec![],
                    cell: Cell::new(1, 0),
                    instance_id: "b".into(),
                },
            ],
            rooms: vec![DetectedRoom {
                room_category: "kitchen".into(),
                min: Cell::new(0, 0),
                max: Cell::new(5, 2),
            }],
            step: 0,
        };
        let s = describe_scene(&two, &pose);
        assert_eq!(s, "You see: bowl ahead; mug left; you are in the kitchen.");
    }

    #[test]
    fn relative_direction_buckets() {
        let pose = AgentPose::new(Cell::new(5, 5), 0);
        assert_eq!(relative_direction(&pose, Cell::new(8, 5)), "ahead");
        assert_eq!(relative_direction(&pose, Cell::new(2, 5)), "behind");
        assert_eq!(relative_direction(&pose, Cell::new(5, 8)), "right");
        assert_eq!(relative_direction(&pose, Cell::new(5, 2)), "left");
    }
}
