//! Benchmark harness: suite generation, episode execution, SR/SPL metrics,
//! reports, and trajectory rendering.

pub mod gen;
pub mod metrics;
pub mod render;
pub mod run;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, EpisodeSpec, Instruction};
use crate::llm::ModelConfig;
use crate::perception::{NoiseModel, PromptVocab, SensorConfig};
use crate::reasoning::{PromptDecorators, ToTConfig};
use crate::world::{AgentPose, GridWorld, WorldError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("suite generation failed for split {split}: {msg}")]
    Generation { split: String, msg: String },
    #[error("suite validation: {0}")]
    Validation(String),
    #[error("metrics over an empty result set")]
    EmptyResults,
    #[error("config: {0}")]
    Config(String),
}

/// Instruction splits mirroring the benchmark's episode families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Uncommon,
    Appearance,
    Space,
    AppearanceDistract,
    SpaceDistract,
    Hidden,
    HiddenDistract,
    CategoryOnly,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Uncommon => "uncommon",
            Split::Appearance => "appearance",
            Split::Space => "space",
            Split::AppearanceDistract => "appearance-distract",
            Split::SpaceDistract => "space-distract",
            Split::Hidden => "hidden",
            Split::HiddenDistract => "hidden-distract",
            Split::CategoryOnly => "category-only",
        }
    }

    /// The seven benchmark splits; `CategoryOnly` is opt-in.
    pub fn default_splits() -> Vec<Split> {
        vec![
            Split::Uncommon,
            Split::Appearance,
            Split::Space,
            Split::AppearanceDistract,
            Split::SpaceDistract,
            Split::Hidden,
            Split::HiddenDistract,
        ]
    }

    pub fn has_distractor(&self) -> bool {
        matches!(
            self,
            Split::AppearanceDistract | Split::SpaceDistract | Split::HiddenDistract
        )
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uncommon" => Ok(Split::Uncommon),
            "appearance" => Ok(Split::Appearance),
            "space" => Ok(Split::Space),
            "appearance-distract" => Ok(Split::AppearanceDistract),
            "space-distract" => Ok(Split::SpaceDistract),
            "hidden" => Ok(Split::Hidden),
            "hidden-distract" => Ok(Split::HiddenDistract),
            "category-only" => Ok(Split::CategoryOnly),
            other => Err(format!("unknown split '{}'", other)),
        }
    }
}

/// One benchmark episode bound to a world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub world_ref: String,
    pub start: AgentPose,
    pub instruction: Instruction,
    pub goal_instance_id: String,
    pub split: Split,
    pub seed: u64,
}

impl Episode {
    pub fn spec(&self) -> EpisodeSpec {
        EpisodeSpec {
            start: self.start,
            instruction: self.instruction.clone(),
            goal_instance_id: self.goal_instance_id.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenParams {
    pub worlds: usize,
    pub episodes_per_split: usize,
    pub splits: Vec<Split>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { worlds: 5, episodes_per_split: 10, splits: Split::default_splits() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub master_seed: u64,
    pub params: GenParams,
    pub world_ids: Vec<String>,
}

/// A generated suite: worlds plus their episodes.
pub struct Suite {
    pub manifest: SuiteManifest,
    pub worlds: BTreeMap<String, GridWorld>,
    pub episodes: Vec<Episode>,
}

impl Suite {
    pub fn world(&self, id: &str) -> Result<&GridWorld, BenchError> {
        self.worlds
            .get(id)
            .ok_or_else(|| BenchError::Validation(format!("world '{}' missing from suite", id)))
    }

    /// Write `manifest.json`, `worlds/<id>.json`, and `episodes.json`.
    pub fn save(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir.join("worlds"))?;
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&self.manifest)?,
        )?;
        for (id, world) in &self.worlds {
            std::fs::write(dir.join("worlds").join(format!("{}.json", id)), world.to_json_string())?;
        }
        std::fs::write(
            dir.join("episodes.json"),
            serde_json::to_string_pretty(&self.episodes)?,
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let manifest: SuiteManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut worlds = BTreeMap::new();
        for id in &manifest.world_ids {
            let text = std::fs::read_to_string(dir.join("worlds").join(format!("{}.json", id)))?;
            worlds.insert(id.clone(), GridWorld::from_json_str(&text)?);
        }
        let episodes: Vec<Episode> =
            serde_json::from_str(&std::fs::read_to_string(dir.join("episodes.json"))?)?;
        let suite = Suite { manifest, worlds, episodes };
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        for ep in &self.episodes {
            let world = self.world(&ep.world_ref)?;
            world.validate_pose(&ep.start).map_err(|e| {
                BenchError::Validation(format!("episode {}: bad start pose: {}", ep.id, e))
            })?;
            let goal = world.object(&ep.goal_instance_id).ok_or_else(|| {
                BenchError::Validation(format!(
                    "episode {}: goal instance {} not in world {}",
                    ep.id, ep.goal_instance_id, ep.world_ref
                ))
            })?;
            if goal.category != ep.instruction.goal_category {
                return Err(BenchError::Validation(format!(
                    "episode {}: goal category mismatch", ep.id
                )));
            }
            match ep.split {
                Split::Space | Split::SpaceDistract => {
                    if ep.instruction.relation_terms.is_empty() {
                        return Err(BenchError::Validation(format!(
                            "episode {}: space split without relation terms", ep.id
                        )));
                    }
                }
                Split::Hidden | Split::HiddenDistract => {
                    if !goal.hidden {
                        return Err(BenchError::Validation(format!(
                            "episode {}: hidden split with visible goal", ep.id
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Noise settings in a run configuration. The per-episode seed comes from
/// each episode, so parallel runs reproduce the same realizations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default)]
    pub miss_prob: f64,
    #[serde(default)]
    pub false_pos_prob: f64,
    #[serde(default)]
    pub confusion: BTreeMap<String, String>,
}

impl NoiseConfig {
    pub fn model_for(&self, seed: u64) -> NoiseModel {
        NoiseModel {
            miss_prob: self.miss_prob,
            false_pos_prob: self.false_pos_prob,
            confusion: self.confusion.clone(),
            seed,
        }
    }
}

/// Everything a `run` invocation needs beyond the suite and CLI flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub tot: ToTConfig,
    #[serde(default)]
    pub decorators: PromptDecorators,
    #[serde(default = "default_bench_agent")]
    pub agent: AgentConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub vocab_path: Option<String>,
}

/// Bench defaults differ from the bare agent defaults in one place: the
/// suite convention is a panoramic survey sensor (the full turn an embodied
/// agent would make), which lets door-adjacent furniture enter the map as
/// the agent passes by.
fn default_bench_agent() -> AgentConfig {
    AgentConfig {
        sensor: SensorConfig { fov_deg: 360.0, n_rays: 120, max_range_m: 5.0 },
        ..AgentConfig::default()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            tot: ToTConfig::default(),
            decorators: PromptDecorators::default(),
            agent: default_bench_agent(),
            noise: NoiseConfig::default(),
            vocab_path: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_json_str(
            &std::fs::read_to_string(path)
                .map_err(|e| BenchError::Config(format!("{}: {}", path.display(), e)))?,
        )
        .map_err(|e| BenchError::Config(format!("{}: {}", path.display(), e)))
    }

    pub fn vocab(&self) -> Result<PromptVocab, BenchError> {
        match &self.vocab_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| BenchError::Config(format!("vocab {}: {}", path, e)))?;
                PromptVocab::from_json_str(&text)
                    .map_err(|e| BenchError::Config(format!("vocab {}: {}", path, e)))
            }
            None => Ok(default_vocab()),
        }
    }
}

/// The vocabulary shipped with the repository, covering every suite
/// category and room type.
pub fn default_vocab() -> PromptVocab {
    PromptVocab::from_json_str(include_str!(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/default_vocab.json"
    )))
    .expect("shipped vocab parses")
}

pub use gen::generate_suite;
pub use metrics::{compute_metrics, EpisodeRow, Metrics, SuiteReport};
pub use render::render_trajectory;
pub use run::{run_suite, RunOptions};
