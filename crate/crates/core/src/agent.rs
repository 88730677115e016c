//! The navigation policy loop: sense, map, identify goal candidates, pick a
//! frontier, plan, act. Also houses path planning over the belief map, goal
//! identification, and the baseline frontier policies.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::{
    cap_candidates, cluster_frontiers, extract_frontier_cells, summarize, Frontier,
    FrontierContext,
};
use crate::grid::Cell;
use crate::llm::{CompletionModel, CompletionParams, LlmError, RecordingModel};
use crate::mapping::{integrate_depth, integrate_semantics, OccState, SemanticMap};
use crate::perception::{describe_scene, detect, NoiseModel, PromptVocab, SensorConfig};
use crate::reasoning::{
    select_frontier, select_frontier_direct, PromptDecorators, ToTConfig,
};
use crate::transcript::{Entry, Transcript};
use crate::world::{
    sense_depth, shortest_path_length, step, visible_objects, Action, AgentPose, GridWorld,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    ToT,
    NearestFrontier,
    Random,
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tot" => Ok(Policy::ToT),
            "nearest" => Ok(Policy::NearestFrontier),
            "random" => Ok(Policy::Random),
            other => Err(format!("unknown policy '{}'", other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentifierKind {
    Llm,
    AttributeMatch,
    CategoryOnly,
}

impl std::str::FromStr for IdentifierKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(IdentifierKind::Llm),
            "attribute-match" => Ok(IdentifierKind::AttributeMatch),
            "category-only" => Ok(IdentifierKind::CategoryOnly),
            other => Err(format!("unknown identifier '{}'", other)),
        }
    }
}

/// Prompt style for the frontier-selection ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptStyle {
    /// Reasoning decorators plus the query.
    Tot,
    /// The bare query with no reasoning directive.
    Direct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub max_steps: usize,
    pub success_distance_m: f64,
    pub sensor: SensorConfig,
    pub policy: Policy,
    pub identifier: IdentifierKind,
    /// Actions executed between map refreshes and replans.
    pub replan_interval: usize,
    pub min_cluster_size: usize,
    pub context_radius_m: f64,
    /// Frontier candidate cap per selection query.
    pub max_frontiers: usize,
    /// Consecutive reasoning failures tolerated before the episode aborts.
    pub max_reasoning_failures: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_steps: 500,
            success_distance_m: 1.0,
            sensor: SensorConfig::default(),
            policy: Policy::ToT,
            identifier: IdentifierKind::Llm,
            replan_interval: 8,
            min_cluster_size: 2,
            context_radius_m: 2.0,
            max_frontiers: 8,
            max_reasoning_failures: 25,
        }
    }
}

/// The language goal: full text plus the parsed category and descriptor terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub goal_category: String,
    #[serde(default)]
    pub attribute_terms: Vec<String>,
    #[serde(default)]
    pub relation_terms: Vec<String>,
}

impl Instruction {
    pub fn category_only(category: &str) -> Self {
        Instruction {
            text: format!("Find the {}.", category),
            goal_category: category.to_string(),
            attribute_terms: vec![],
            relation_terms: vec![],
        }
    }

    /// "a"/"an" phrase used in frontier queries, e.g. "an alarm clock".
    pub fn goal_phrase(&self) -> String {
        let first = self.goal_category.chars().next().unwrap_or('x');
        let article = if "aeiou".contains(first.to_ascii_lowercase()) { "an" } else { "a" };
        format!("{} {}", article, self.goal_category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Stopped,
    StepBudget,
    ReasoningFallbackExhausted,
    Crashed,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Stopped => "stopped",
            Termination::StepBudget => "step-budget",
            Termination::ReasoningFallbackExhausted => "reasoning-fallback-exhausted",
            Termination::Crashed => "crashed",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub actions: Vec<Action>,
    pub path_length_m: f64,
    /// Ground-truth shortest path from start to goal; infinite if sealed off.
    pub optimal_length_m: f64,
    pub steps: usize,
    pub termination: Termination,
    pub transcript_ref: Option<String>,
    /// Candidates rejected by goal identification, in rejection order.
    pub rejected_instance_ids: Vec<String>,
}

/// What the agent is asked to do in one episode.
#[derive(Debug, Clone)]
pub struct EpisodeSpec {
    pub start: AgentPose,
    pub instruction: Instruction,
    pub goal_instance_id: String,
    pub seed: u64,
}

/// Everything an episode needs besides the world and the episode itself.
pub struct Runtime<'a> {
    pub agent: &'a AgentConfig,
    pub vocab: &'a PromptVocab,
    pub noise: NoiseModel,
    pub tot: &'a ToTConfig,
    pub decorators: &'a PromptDecorators,
    pub model: &'a dyn CompletionModel,
    pub params: CompletionParams,
    pub prompt_style: PromptStyle,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no path from {from} to {to} over the current map")]
    Unreachable { from: Cell, to: Cell },
    #[error("plan start {0} is not known-free")]
    StartUnknown(Cell),
}

/// Best-first plan over the belief map: known-free cells cost 1, unknown
/// cells cost 3, obstacles are impassable. Returns rotate/move primitives
/// from the given pose. Ties are resolved by row-major successor order and
/// row-major pop order, so plans are deterministic.
pub fn plan_path(map: &SemanticMap, from: &AgentPose, to: Cell) -> Result<Vec<Action>, PlanError> {
    if map.occ(from.cell) != OccState::Free {
        return Err(PlanError::StartUnknown(from.cell));
    }
    if !map.in_bounds(to) || map.occ(to) == OccState::Obstacle {
        return Err(PlanError::Unreachable { from: from.cell, to });
    }
    if from.cell == to {
        return Ok(Vec::new());
    }

    let width = map.width();
    let idx = |c: Cell| (c.y * width + c.x) as usize;
    let n = (map.width() * map.height()) as usize;
    let mut best = vec![u32::MAX; n];
    let mut parent: Vec<Option<Cell>> = vec![None; n];
    let mut heap: BinaryHeap<Reverse<(u32, i32, Cell)>> = BinaryHeap::new();
    best[idx(from.cell)] = 0;
    heap.push(Reverse((0, from.cell.y * width + from.cell.x, from.cell)));

    while let Some(Reverse((cost, _, cell))) = heap.pop() {
        if cost > best[idx(cell)] {
            continue;
        }
        if cell == to {
            break;
        }
        for next in cell.neighbors4() {
            if !map.in_bounds(next) {
                continue;
            }
            let step_cost = match map.occ(next) {
                OccState::Free => 1,
                OccState::Unknown => 3,
                OccState::Obstacle => continue,
            };
            let candidate = cost + step_cost;
            if candidate < best[idx(next)] {
                best[idx(next)] = candidate;
                parent[idx(next)] = Some(cell);
                heap.push(Reverse((candidate, next.y * width + next.x, next)));
            }
        }
    }

    if best[idx(to)] == u32::MAX {
        return Err(PlanError::Unreachable { from: from.cell, to });
    }

    let mut cells = vec![to];
    let mut cursor = to;
    while let Some(p) = parent[idx(cursor)] {
        cells.push(p);
        cursor = p;
    }
    cells.reverse();

    let mut actions = Vec::new();
    let mut heading = from.heading_deg;
    for pair in cells.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let target_heading = match (b.x - a.x, b.y - a.y) {
            (1, 0) => 0,
            (0, 1) => 90,
            (-1, 0) => 180,
            (0, -1) => 270,
            other => unreachable!("non-adjacent plan step {:?}", other),
        };
        append_rotations(&mut actions, heading, target_heading);
        heading = target_heading;
        actions.push(Action::MoveAhead);
    }
    Ok(actions)
}

/// Minimal 30-degree rotation sequence; an exact 180 goes right.
fn append_rotations(actions: &mut Vec<Action>, from_deg: u16, to_deg: u16) {
    let cw = (360 + to_deg as i32 - from_deg as i32) % 360;
    if cw == 0 {
        return;
    }
    if cw <= 180 {
        for _ in 0..cw / 30 {
            actions.push(Action::RotateRight);
        }
    } else {
        for _ in 0..(360 - cw) / 30 {
            actions.push(Action::RotateLeft);
        }
    }
}

/// Decide whether a described scene satisfies the instruction.
pub fn identify_goal(
    instruction: &Instruction,
    scene: &str,
    model: &dyn CompletionModel,
    params: &CompletionParams,
    kind: IdentifierKind,
) -> Result<bool, LlmError> {
    match kind {
        IdentifierKind::CategoryOnly => Ok(contains_ci(scene, &instruction.goal_category)),
        IdentifierKind::AttributeMatch => Ok(contains_ci(scene, &instruction.goal_category)
            && instruction.attribute_terms.iter().all(|t| contains_ci(scene, t))),
        IdentifierKind::Llm => {
            let prompt = format!(
                "Scene: {}\nTarget: {}\nDoes the scene contain the target object as described? Answer yes or no.",
                scene, instruction.text
            );
            let reply = model.complete(&prompt, params)?;
            Ok(parse_yes_no(&reply).unwrap_or(false))
        }
    }
}

fn contains_ci(haystack: &str, needle: &str) -> bool {
    haystack.to_lowercase().contains(&needle.to_lowercase())
}

/// Leading yes/no of a reply, ignoring case and punctuation. None when the
/// reply starts with neither.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let cleaned: String = reply
        .trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match cleaned.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

struct StepBudget {
    max_steps: usize,
}

/// Episode driver state threaded through the loop below.
struct Drive<'w> {
    world: &'w GridWorld,
    pose: AgentPose,
    actions: Vec<Action>,
    path_length_m: f64,
}

impl Drive<'_> {
    fn steps(&self) -> usize {
        self.actions.len()
    }

    fn exhausted(&self, budget: &StepBudget) -> bool {
        self.actions.len() >= budget.max_steps
    }

    /// Execute one action against the world, keeping the path-length
    /// accounting identity: 0.25 m per non-collided MoveAhead.
    fn act(&mut self, action: Action, transcript: &mut Transcript) -> bool {
        let step_no = self.actions.len();
        let (next, collided) = step(self.world, &self.pose, action).expect("valid pose in loop");
        if action == Action::MoveAhead && !collided {
            self.path_length_m += self.world.cell_size();
        }
        self.pose = next;
        self.actions.push(action);
        transcript.log(&Entry::ActionTaken { step: step_no, action, collided, pose: self.pose });
        collided
    }
}

/// Run one episode to completion. Individual reasoning failures fall back to
/// the nearest frontier; persistent failure aborts with
/// `ReasoningFallbackExhausted`. Success is judged against ground truth:
/// stopped within the success distance with the goal visible.
pub fn run_episode(
    world: &GridWorld,
    episode: &EpisodeSpec,
    rt: &Runtime<'_>,
    transcript: &mut Transcript,
) -> EpisodeResult {
    world.validate_pose(&episode.start).expect("episode start pose must be valid");
    let goal = world
        .object(&episode.goal_instance_id)
        .unwrap_or_else(|| panic!("goal instance {} not in world", episode.goal_instance_id));
    let goal_cell = goal.position;
    let optimal_length_m = shortest_path_length(world, episode.start.cell, goal_cell)
        .expect("endpoints free")
        .unwrap_or(f64::INFINITY);

    let recording = RecordingModel::new(rt.model);
    let mut map = SemanticMap::new(world.width(), world.height(), world.cell_size());
    let mut drive = Drive { world, pose: episode.start, actions: Vec::new(), path_length_m: 0.0 };
    let budget = StepBudget { max_steps: rt.agent.max_steps };
    let mut deny: BTreeSet<String> = BTreeSet::new();
    let mut rejected_order: Vec<String> = Vec::new();
    let mut target: Option<(String, Cell)> = None;
    let mut reasoning_failures = 0usize;
    let mut termination = Termination::StepBudget;

    'episode: while !drive.exhausted(&budget) {
        let step_no = drive.steps();

        // Sense and integrate.
        let scan = sense_depth(
            world,
            &drive.pose,
            rt.agent.sensor.fov_deg,
            rt.agent.sensor.n_rays,
            rt.agent.sensor.max_range_m,
        )
        .expect("pose valid by construction");
        integrate_depth(&mut map, &scan);
        let detections = detect(
            world,
            &drive.pose,
            rt.vocab,
            &rt.noise,
            &rt.agent.sensor,
            step_no as u64,
        )
        .expect("vocab and noise validated before the run");
        integrate_semantics(&mut map, &detections);
        let scene = describe_scene(&detections, &drive.pose);
        transcript.log(&Entry::Observation {
            step: step_no,
            pose: drive.pose,
            scene: &scene,
            detections: detections.objects.len(),
        });

        // Goal identification over fresh candidates, nearest first.
        if target.is_none() {
            let mut candidates: Vec<(f64, String, Cell)> = detections
                .objects
                .iter()
                .filter(|o| o.category == episode.instruction.goal_category)
                .filter(|o| !deny.contains(&o.instance_id))
                .map(|o| (drive.pose.cell.euclidean(&o.cell), o.instance_id.clone(), o.cell))
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            for (_, instance_id, cell) in candidates {
                let accepted = identify_goal(
                    &episode.instruction,
                    &scene,
                    &recording,
                    &rt.params,
                    rt.agent.identifier,
                )
                .unwrap_or(false);
                drain_completions(&recording, transcript, step_no, rt.model.backend_name());
                transcript.log(&Entry::Identification {
                    step: step_no,
                    instance_id: &instance_id,
                    method: identifier_name(rt.agent.identifier),
                    accepted,
                });
                if accepted {
                    transcript.log(&Entry::GoalAccepted {
                        step: step_no,
                        instance_id: &instance_id,
                        cell,
                    });
                    target = Some((instance_id, cell));
                    break;
                }
                deny.insert(instance_id.clone());
                rejected_order.push(instance_id);
            }
        }

        // Approach an accepted candidate.
        if let Some((instance_id, cell)) = target.clone() {
            let dist_m = drive.pose.cell.euclidean(&cell) * world.cell_size();
            // Stop only when close AND the candidate is in the current
            // detections: straight-line distance can undershoot through a
            // wall the agent still has to walk around.
            let detected_now = detections
                .objects
                .iter()
                .any(|o| o.instance_id == instance_id);
            if dist_m <= rt.agent.success_distance_m && detected_now {
                if face_target(&mut drive, cell, rt.agent.sensor.fov_deg, &budget, transcript)
                    && !drive.exhausted(&budget)
                {
                    drive.actions.push(Action::Stop);
                    termination = Termination::Stopped;
                }
                break 'episode;
            }
            match plan_path(&map, &drive.pose, cell) {
                Ok(plan) if !plan.is_empty() => {
                    execute_plan(
                        &mut drive,
                        &mut map,
                        plan,
                        rt.agent.replan_interval,
                        &budget,
                        transcript,
                        Some((cell, rt.agent.success_distance_m)),
                    );
                }
                Ok(_) | Err(_) => {
                    // Target cell unreachable on the current belief map;
                    // give up on this candidate rather than looping.
                    deny.insert(instance_id.clone());
                    rejected_order.push(instance_id);
                    target = None;
                    if !drive.exhausted(&budget) {
                        drive.act(Action::RotateRight, transcript);
                    }
                }
            }
            continue 'episode;
        }

        // Frontier exploration.
        let cells = extract_frontier_cells(&map);
        let frontiers = cap_candidates(
            cluster_frontiers(&cells, rt.agent.min_cluster_size),
            drive.pose.cell,
            rt.agent.max_frontiers,
        );
        if frontiers.is_empty() {
            // Nothing to explore and no goal in sight: scan in place.
            drive.act(Action::RotateRight, transcript);
            continue 'episode;
        }
        let contexts: Vec<FrontierContext> = frontiers
            .iter()
            .map(|f| summarize(&map, f, drive.pose.cell, rt.agent.context_radius_m))
            .collect();
        transcript.log(&Entry::Frontiers { step: step_no, contexts: &contexts });

        let preference = choose_frontiers(
            rt,
            episode,
            &contexts,
            &recording,
            step_no,
            &mut reasoning_failures,
            transcript,
        );
        let preference = match preference {
            Some(p) => p,
            None => {
                termination = Termination::ReasoningFallbackExhausted;
                break 'episode;
            }
        };

        let mut advanced = false;
        for choice_idx in preference {
            let frontier = &frontiers[choice_idx];
            let goto = nearest_frontier_cell(frontier, drive.pose.cell);
            match plan_path(&map, &drive.pose, goto) {
                Ok(plan) if !plan.is_empty() => {
                    execute_plan(
                        &mut drive,
                        &mut map,
                        plan,
                        rt.agent.replan_interval,
                        &budget,
                        transcript,
                        None,
                    );
                    advanced = true;
                    break;
                }
                Ok(_) => {
                    // Standing on the frontier already; turn to sweep it.
                    drive.act(Action::RotateRight, transcript);
                    advanced = true;
                    break;
                }
                Err(_) => continue,
            }
        }
        if !advanced && !drive.exhausted(&budget) {
            drive.act(Action::RotateRight, transcript);
        }
    }

    let success = termination == Termination::Stopped && ground_truth_success(world, &drive, goal_cell, rt);
    transcript.log(&Entry::Result {
        success,
        steps: drive.steps(),
        path_length_m: drive.path_length_m,
        termination: termination.as_str(),
    });
    transcript.flush();

    EpisodeResult {
        success,
        steps: drive.actions.len(),
        actions: drive.actions,
        path_length_m: drive.path_length_m,
        optimal_length_m,
        termination,
        transcript_ref: None,
        rejected_instance_ids: rejected_order,
    }
}

fn identifier_name(kind: IdentifierKind) -> &'static str {
    match kind {
        IdentifierKind::Llm => "llm",
        IdentifierKind::AttributeMatch => "attribute-match",
        IdentifierKind::CategoryOnly => "category-only",
    }
}

fn drain_completions(
    recording: &RecordingModel<'_>,
    transcript: &mut Transcript,
    step: usize,
    backend: &str,
) {
    for (prompt, response) in recording.drain() {
        transcript.log(&Entry::Completion { step, backend, prompt: &prompt, response: &response });
    }
}

/// Frontier indices in preference order per the active policy. `None` means
/// the reasoning failure budget is exhausted and the episode should abort.
fn choose_frontiers(
    rt: &Runtime<'_>,
    episode: &EpisodeSpec,
    contexts: &[FrontierContext],
    recording: &RecordingModel<'_>,
    step_no: usize,
    reasoning_failures: &mut usize,
    transcript: &mut Transcript,
) -> Option<Vec<usize>> {
    let by_distance = || {
        let mut order: Vec<usize> = (0..contexts.len()).collect();
        order.sort_by(|&a, &b| {
            contexts[a]
                .distance_from_agent
                .total_cmp(&contexts[b].distance_from_agent)
                .then(a.cmp(&b))
        });
        order
    };

    match rt.agent.policy {
        Policy::NearestFrontier => {
            let order = by_distance();
            transcript.log(&Entry::Decision {
                step: step_no,
                policy: "nearest",
                chosen_location: Some(order[0] + 1),
                fallback: false,
                detail: String::new(),
            });
            Some(order)
        }
        Policy::Random => {
            let pick = seeded_pick(episode.seed, step_no as u64, contexts.len());
            let mut order = by_distance();
            order.retain(|&i| i != pick);
            order.insert(0, pick);
            transcript.log(&Entry::Decision {
                step: step_no,
                policy: "random",
                chosen_location: Some(pick + 1),
                fallback: false,
                detail: String::new(),
            });
            Some(order)
        }
        Policy::ToT => {
            let selection = match rt.prompt_style {
                PromptStyle::Tot => select_frontier(
                    &episode.instruction.goal_phrase(),
                    contexts,
                    recording,
                    rt.tot,
                    rt.decorators,
                    &rt.params,
                ),
                PromptStyle::Direct => select_frontier_direct(
                    &episode.instruction.goal_phrase(),
                    contexts,
                    recording,
                    &rt.params,
                ),
            };
            drain_completions(recording, transcript, step_no, rt.model.backend_name());
            match selection {
                Ok(choice) => {
                    *reasoning_failures = 0;
                    let idx = choice.location_index - 1;
                    let mut order = by_distance();
                    order.retain(|&i| i != idx);
                    order.insert(0, idx);
                    transcript.log(&Entry::Decision {
                        step: step_no,
                        policy: "tot",
                        chosen_location: Some(choice.location_index),
                        fallback: false,
                        detail: choice.raw_text,
                    });
                    Some(order)
                }
                Err(err) => {
                    *reasoning_failures += 1;
                    transcript.log(&Entry::Decision {
                        step: step_no,
                        policy: "tot",
                        chosen_location: None,
                        fallback: true,
                        detail: err.to_string(),
                    });
                    if *reasoning_failures >= rt.agent.max_reasoning_failures {
                        None
                    } else {
                        Some(by_distance())
                    }
                }
            }
        }
    }
}

fn seeded_pick(seed: u64, step: u64, n: usize) -> usize {
    // splitmix64 over (seed, step); uniform enough for a baseline policy.
    let mut z = seed ^ step.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    ((z ^ (z >> 31)) % n as u64) as usize
}

fn nearest_frontier_cell(frontier: &Frontier, from: Cell) -> Cell {
    *frontier
        .cells
        .iter()
        .min_by(|a, b| from.euclidean(a).total_cmp(&from.euclidean(b)).then(a.cmp(b)))
        .expect("frontier has cells")
}

/// Execute up to `replan_interval` actions. A collision marks the blocked
/// cell as an obstacle and ends the batch early; approaching within the
/// success distance of the target pauses the batch so the outer loop can
/// confirm the candidate is in view.
fn execute_plan(
    drive: &mut Drive<'_>,
    map: &mut SemanticMap,
    plan: Vec<Action>,
    replan_interval: usize,
    budget: &StepBudget,
    transcript: &mut Transcript,
    approach: Option<(Cell, f64)>,
) {
    for action in plan.into_iter().take(replan_interval) {
        if drive.exhausted(budget) {
            return;
        }
        let before = drive.pose;
        let collided = drive.act(action, transcript);
        if collided {
            let (dx, dy) = before.ahead_offset();
            map.set_occ(before.cell.offset(dx, dy), OccState::Obstacle);
            return;
        }
        if let Some((cell, success_distance_m)) = approach {
            let dist_m = drive.pose.cell.euclidean(&cell) * drive.world.cell_size();
            if dist_m <= success_distance_m {
                return;
            }
        }
    }
}

/// Rotate in place until the target cell sits inside the field of view.
/// Returns false if the step budget ran out mid-turn.
fn face_target(
    drive: &mut Drive<'_>,
    target: Cell,
    fov_deg: f64,
    budget: &StepBudget,
    transcript: &mut Transcript,
) -> bool {
    for _ in 0..12 {
        if target == drive.pose.cell {
            return true;
        }
        let dx = (target.x - drive.pose.cell.x) as f64;
        let dy = (target.y - drive.pose.cell.y) as f64;
        let rel = crate::grid::normalize_deg(
            dy.atan2(dx).to_degrees() - drive.pose.heading_deg as f64,
        );
        if rel.abs() <= fov_deg / 2.0 {
            return true;
        }
        if drive.exhausted(budget) {
            return false;
        }
        let turn = if rel > 0.0 { Action::RotateRight } else { Action::RotateLeft };
        drive.act(turn, transcript);
    }
    true
}

fn ground_truth_success(
    world: &GridWorld,
    drive: &Drive<'_>,
    goal_cell: Cell,
    rt: &Runtime<'_>,
) -> bool {
    let dist_m = drive.pose.cell.euclidean(&goal_cell) * world.cell_size();
    if dist_m > rt.agent.success_distance_m {
        return false;
    }
    visible_objects(world, &drive.pose, rt.agent.sensor.fov_deg, rt.agent.sensor.max_range_m)
        .map(|seen| seen.iter().any(|o| o.position == goal_cell))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedModel;
    use crate::world::ObjectInstance;

    fn corridor_map(rows: &[&str]) -> SemanticMap {
        SemanticMap::from_ascii(rows, 0.25)
    }

    #[test]
    fn plan_straight_corridor() {
        let map = corridor_map(&["..."]);
        let plan = plan_path(&map, &AgentPose::new(Cell::new(0, 0), 0), Cell::new(2, 0)).unwrap();
        assert_eq!(plan, vec![Action::MoveAhead, Action::MoveAhead]);
    }

    #[test]
    fn plan_turns_left_with_three_rotations() {
        // Target one cell "left" of an east-facing agent (y-1 => heading 270).
        let map = corridor_map(&["...", "...", "..."]);
        let plan = plan_path(&map, &AgentPose::new(Cell::new(1, 1), 0), Cell::new(1, 0)).unwrap();
        assert_eq!(
            plan,
            vec![Action::RotateLeft, Action::RotateLeft, Action::RotateLeft, Action::MoveAhead]
        );
    }

    #[test]
    fn plan_prefers_known_free_over_unknown() {
        // Upper route is free, lower route unknown; free route wins despite
        // equal cell count.
        let map = corridor_map(&[
            ".....",
            ".###.",
            "?????",
        ]);
        let plan = plan_path(&map, &AgentPose::new(Cell::new(0, 0), 0), Cell::new(4, 0)).unwrap();
        assert_eq!(plan.iter().filter(|a| **a == Action::MoveAhead).count(), 4);
        assert_eq!(plan.len(), 4); // no rotations: straight along row 0
    }

    #[test]
    fn plan_unreachable_is_an_error() {
        let map = corridor_map(&[".#."]);
        assert!(matches!(
            plan_path(&map, &AgentPose::new(Cell::new(0, 0), 0), Cell::new(2, 0)),
            Err(PlanError::Unreachable { .. })
        ));
    }

    #[test]
    fn identify_attribute_match_requires_all_terms() {
        let instruction = Instruction {
            text: "Find the small, metallic alarm clock.".into(),
            goal_category: "alarm clock".into(),
            attribute_terms: vec!["small".into(), "metallic".into()],
            relation_terms: vec![],
        };
        let model = ScriptedModel::with_default("unused");
        let params = CompletionParams::default();
        let yes = identify_goal(
            &instruction,
            "You see: small metallic alarm clock ahead; you are in the bedroom.",
            &model,
            &params,
            IdentifierKind::AttributeMatch,
        )
        .unwrap();
        assert!(yes);
        let no = identify_goal(
            &instruction,
            "You see: large wooden alarm clock ahead; you are in the bedroom.",
            &model,
            &params,
            IdentifierKind::AttributeMatch,
        )
        .unwrap();
        assert!(!no);
    }

    #[test]
    fn identify_llm_parses_loose_yes() {
        let instruction = Instruction::category_only("alarm clock");
        let model = ScriptedModel::with_default("Yes - the clock matches.");
        let ok = identify_goal(
            &instruction,
            "scene",
            &model,
            &CompletionParams::default(),
            IdentifierKind::Llm,
        )
        .unwrap();
        assert!(ok);
        let negative = ScriptedModel::with_default("No.");
        assert!(!identify_goal(
            &instruction,
            "scene",
            &negative,
            &CompletionParams::default(),
            IdentifierKind::Llm,
        )
        .unwrap());
        let unparsable = ScriptedModel::with_default("perhaps");
        assert!(!identify_goal(
            &instruction,
            "scene",
            &unparsable,
            &CompletionParams::default(),
            IdentifierKind::Llm,
        )
        .unwrap());
    }

    fn fixture_world() -> GridWorld {
        GridWorld::from_ascii_single_room(
            "fixture",
            &[
                "########",
                "#......#",
                "#......#",
                "#......#",
                "########",
            ],
            "kitchen",
            0.25,
            vec![ObjectInstance {
                id: "goal".into(),
                category: "bowl".into(),
                attributes: vec![],
                position: Cell::new(4, 2),
                hidden: false,
                container_hint: None,
            }],
        )
        .unwrap()
    }

    fn runtime<'a>(
        agent: &'a AgentConfig,
        vocab: &'a PromptVocab,
        tot: &'a ToTConfig,
        decorators: &'a PromptDecorators,
        model: &'a dyn CompletionModel,
    ) -> Runtime<'a> {
        Runtime {
            agent,
            vocab,
            noise: NoiseModel::noise_free(7),
            tot,
            decorators,
            model,
            params: CompletionParams::default(),
            prompt_style: PromptStyle::Tot,
        }
    }

    #[test]
    fn goal_visible_at_start_is_reached_quickly() {
        let world = fixture_world();
        let vocab = PromptVocab {
            object_prompts: vec!["bowl".into()],
            room_prompts: vec!["kitchen".into()],
        };
        let agent = AgentConfig {
            success_distance_m: 0.25,
            identifier: IdentifierKind::CategoryOnly,
            ..AgentConfig::default()
        };
        let tot = ToTConfig::default();
        let decorators = PromptDecorators::default();
        let model = ScriptedModel::with_default("unused");
        let rt = runtime(&agent, &vocab, &tot, &decorators, &model);
        let episode = EpisodeSpec {
            start: AgentPose::new(Cell::new(2, 2), 0),
            instruction: Instruction::category_only("bowl"),
            goal_instance_id: "goal".into(),
            seed: 1,
        };
        let result = run_episode(&world, &episode, &rt, &mut Transcript::disabled());
        assert!(result.success, "termination {:?}", result.termination);
        assert!(result.steps <= 4, "steps {}", result.steps);
        assert!((result.path_length_m - result.optimal_length_m).abs() <= 0.25);
        assert_eq!(result.termination, Termination::Stopped);
    }

    #[test]
    fn sealed_goal_exhausts_budget() {
        let world = GridWorld::from_ascii_single_room(
            "sealed",
            &[
                "#########",
                "#...#...#",
                "#...#...#",
                "#...#...#",
                "#########",
            ],
            "kitchen",
            0.25,
            vec![ObjectInstance {
                id: "o".into(),
                category: "bowl".into(),
                attributes: vec![],
                position: Cell::new(6, 2),
                hidden: false,
                container_hint: None,
            }],
        )
        .unwrap();
        let vocab = PromptVocab {
            object_prompts: vec!["bowl".into()],
            room_prompts: vec!["kitchen".into()],
        };
        let agent = AgentConfig {
            max_steps: 60,
            identifier: IdentifierKind::CategoryOnly,
            policy: Policy::NearestFrontier,
            ..AgentConfig::default()
        };
        let tot = ToTConfig::default();
        let decorators = PromptDecorators::default();
        let model = ScriptedModel::with_default("unused");
        let rt = runtime(&agent, &vocab, &tot, &decorators, &model);
        let episode = EpisodeSpec {
            start: AgentPose::new(Cell::new(2, 2), 0),
            instruction: Instruction::category_only("bowl"),
            goal_instance_id: "o".into(),
            seed: 1,
        };
        let result = run_episode(&world, &episode, &rt, &mut Transcript::disabled());
        assert!(!result.success);
        assert_eq!(result.termination, Termination::StepBudget);
        assert_eq!(result.steps, 60);
        assert!(result.optimal_length_m.is_infinite());
    }

    #[test]
    fn reasoning_errors_fall_back_to_nearest() {
        // Model always errors (no rules, no default): ToT policy should
        // still explore via fallback until the failure cap aborts.
        let world = fixture_world();
        let vocab = PromptVocab {
            object_prompts: vec!["mug".into()],
            room_prompts: vec!["kitchen".into()],
        };
        let agent = AgentConfig {
            max_steps: 80,
            policy: Policy::ToT,
            identifier: IdentifierKind::CategoryOnly,
            max_reasoning_failures: 3,
            ..AgentConfig::default()
        };
        let tot = ToTConfig::default();
        let decorators = PromptDecorators::default();
        let model = ScriptedModel::new();
        let rt = runtime(&agent, &vocab, &tot, &decorators, &model);
        let episode = EpisodeSpec {
            start: AgentPose::new(Cell::new(2, 2), 0),
            instruction: Instruction::category_only("mug"),
            goal_instance_id: "goal".into(),
            seed: 1,
        };
        let result = run_episode(&world, &episode, &rt, &mut Transcript::disabled());
        // The room is tiny: frontiers vanish quickly; either the failure cap
        // tripped or exploration ran out of frontiers and burned the budget.
        assert!(!result.success);
        assert!(matches!(
            result.termination,
            Termination::ReasoningFallbackExhausted | Termination::StepBudget
        ));
    }

    #[test]
    fn path_length_accounting_identity() {
        let world = fixture_world();
        let vocab = PromptVocab {
            object_prompts: vec!["bowl".into()],
            room_prompts: vec!["kitchen".into()],
        };
        let agent = AgentConfig {
            success_distance_m: 0.25,
            identifier: IdentifierKind::CategoryOnly,
            ..AgentConfig::default()
        };
        let tot = ToTConfig::default();
        let decorators = PromptDecorators::default();
        let model = ScriptedModel::with_default("unused");
        let rt = runtime(&agent, &vocab, &tot, &decorators, &model);
        let episode = EpisodeSpec {
            start: AgentPose::new(Cell::new(1, 1), 0),
            instruction: Instruction::category_only("bowl"),
            goal_instance_id: "goal".into(),
            seed: 1,
        };
        let result = run_episode(&world, &episode, &rt, &mut Transcript::disabled());
        let moves = result.actions.iter().filter(|a| **a == Action::MoveAhead).count();
        assert!((result.path_length_m - 0.25 * moves as f64).abs() < 1e-12);
    }
}
