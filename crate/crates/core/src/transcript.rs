//! Per-episode JSON-lines transcript: observations, frontier sets, every
//! completion request/response pair, decisions, and actions. Entries carry
//! no wall-clock timestamps so reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::frontier::FrontierContext;
use crate::grid::Cell;
use crate::world::{Action, AgentPose};

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Entry<'a> {
    Observation {
        step: usize,
        pose: AgentPose,
        scene: &'a str,
        detections: usize,
    },
    Frontiers {
        step: usize,
        contexts: &'a [FrontierContext],
    },
    Completion {
        step: usize,
        backend: &'a str,
        prompt: &'a str,
        response: &'a str,
    },
    Identification {
        step: usize,
        instance_id: &'a str,
        method: &'a str,
        accepted: bool,
    },
    Decision {
        step: usize,
        policy: &'a str,
        chosen_location: Option<usize>,
        fallback: bool,
        detail: String,
    },
    ActionTaken {
        step: usize,
        action: Action,
        collided: bool,
        pose: AgentPose,
    },
    GoalAccepted {
        step: usize,
        instance_id: &'a str,
        cell: Cell,
    },
    Result {
        success: bool,
        steps: usize,
        path_length_m: f64,
        termination: &'a str,
    },
}

/// Appends JSON lines to a file, or swallows entries when disabled.
pub struct Transcript {
    out: Option<BufWriter<File>>,
}

impl Transcript {
    pub fn disabled() -> Self {
        Transcript { out: None }
    }

    pub fn to_file(path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(Transcript { out: Some(BufWriter::new(File::create(path)?)) })
    }

    pub fn log(&mut self, entry: &Entry<'_>) {
        if let Some(out) = &mut self.out {
            let line = serde_json::to_string(entry).expect("transcript entry serialization");
            let _ = writeln!(out, "{}", line);
        }
    }

    pub fn flush(&mut self) {
        if let Some(out) = &mut self.out {
            let _ = out.flush();
        }
    }
}
