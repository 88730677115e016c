//! Co-occurrence oracle backend: answers the two prompt shapes the agent
//! produces (frontier selection and goal identification) from an affinity
//! table, enabling deterministic end-to-end runs without a network.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

use super::{AffinityTable, CompletionModel, CompletionParams, LlmError};

/// Phrase identifying a frontier-selection query.
pub const FRONTIER_SENTINEL: &str = "pick one single location";
/// Phrase identifying a goal-identification query.
pub const IDENT_SENTINEL: &str = "Does the scene contain the target object as described?";

/// Words carrying no descriptive content in instructions.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "find", "locate", "go", "to", "it", "is", "are", "on", "in", "at",
    "near", "under", "over", "behind", "beside", "next", "by", "with", "and", "or", "of",
    "that", "hidden",
];

#[derive(Debug, Clone)]
pub struct OracleModel {
    table: AffinityTable,
}

fn location_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?m)^location #(\d+), located near (.+?), where (.+)$").expect("regex")
    })
}

fn goal_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"pick one single location where (.+?) is most likely to occur").expect("regex")
    })
}

fn objects_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\{(.*)\} are also found\.$").expect("regex"))
}

fn strip_article(phrase: &str) -> &str {
    for art in ["a ", "an ", "the "] {
        if let Some(rest) = phrase.strip_prefix(art) {
            return rest;
        }
    }
    phrase
}

fn words(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_string())
        .collect()
}

impl OracleModel {
    pub fn new(table: AffinityTable) -> Self {
        OracleModel { table }
    }

    pub fn with_shipped_table() -> Self {
        OracleModel::new(AffinityTable::shipped())
    }

    fn answer_frontier_query(&self, prompt: &str) -> Result<String, LlmError> {
        let goal = goal_re()
            .captures(prompt)
            .map(|c| strip_article(c.get(1).expect("group").as_str()).to_string())
            .ok_or_else(|| LlmError::Oracle { prefix: prefix(prompt) })?;

        let mut best: Option<(usize, f64)> = None;
        for caps in location_line_re().captures_iter(prompt) {
            let index: usize = caps[1].parse().map_err(|_| LlmError::Oracle {
                prefix: prefix(prompt),
            })?;
            let room = &caps[2];
            let tail = &caps[3];
            let objects: Vec<String> = if tail == "nothing is yet found." {
                Vec::new()
            } else if let Some(m) = objects_re().captures(tail) {
                m[1].split(", ").map(|s| s.to_string()).collect()
            } else {
                return Err(LlmError::Oracle { prefix: prefix(prompt) });
            };
            let object_score = objects
                .iter()
                .map(|o| self.table.score(&goal, o))
                .fold(0.0_f64, f64::max);
            let score = object_score + self.table.score(&goal, room);
            let better = match best {
                None => true,
                // Ties go to the lowest index.
                Some((_, s)) => score > s,
            };
            if better {
                best = Some((index, score));
            }
        }
        let (index, score) = best.ok_or_else(|| LlmError::Oracle { prefix: prefix(prompt) })?;
        let percent = (100.0 * score.clamp(0.0, 1.0)).round() as u32;
        Ok(format!(
            "Conclusion, location #{} with highest likelihood {}%.",
            index, percent
        ))
    }

    fn answer_identification(&self, prompt: &str) -> Result<String, LlmError> {
        let scene = line_after(prompt, "Scene: ")
            .ok_or_else(|| LlmError::Oracle { prefix: prefix(prompt) })?;
        let target = line_after(prompt, "Target: ")
            .ok_or_else(|| LlmError::Oracle { prefix: prefix(prompt) })?;
        let scene_words = words(&scene);
        let required: Vec<String> = words(&target)
            .into_iter()
            .filter(|w| !STOPWORDS.contains(&w.as_str()))
            .collect();
        let all_present = required.iter().all(|w| scene_words.contains(w));
        Ok(if all_present { "yes".to_string() } else { "no".to_string() })
    }
}

fn line_after(text: &str, marker: &str) -> Option<String> {
    text.lines()
        .find_map(|l| l.strip_prefix(marker).map(|s| s.to_string()))
}

fn prefix(prompt: &str) -> String {
    prompt.chars().take(60).collect()
}

impl CompletionModel for OracleModel {
    fn complete(&self, prompt: &str, _params: &CompletionParams) -> Result<String, LlmError> {
        if prompt.contains(IDENT_SENTINEL) {
            self.answer_identification(prompt)
        } else if prompt.contains(FRONTIER_SENTINEL) {
            self.answer_frontier_query(prompt)
        } else {
            Err(LlmError::Oracle { prefix: prefix(prompt) })
        }
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn backend_name(&self) -> &str {
        "oracle"
    }
}
