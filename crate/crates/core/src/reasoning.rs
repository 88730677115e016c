//! Tree-of-thoughts search over a completion model, prompt construction for
//! frontier selection, and conclusion parsing.
//!
//! The search keeps a beam of thought chains: every surviving state is
//! expanded into up to `k` child thoughts, all candidates are scored, and
//! the best `b` continue, for `t_limit` steps; the answer is one final
//! generation from the best surviving state. `SingleShot` mode skips the
//! explicit tree and sends the four reasoning decorators plus the query as
//! one completion call, which is how the deliberating-experts prompt style
//! is normally used; `Programmatic` mode drives the tree literally.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::FrontierContext;
use crate::llm::{CompletionModel, CompletionParams, LlmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToTMode {
    Programmatic,
    SingleShot,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ToTConfig {
    /// Thoughts generated per expanded state.
    pub k: usize,
    /// Search depth.
    pub t_limit: usize,
    /// Beam width.
    pub b: usize,
    pub mode: ToTMode,
}

impl Default for ToTConfig {
    fn default() -> Self {
        ToTConfig { k: 3, t_limit: 2, b: 3, mode: ToTMode::SingleShot }
    }
}

impl ToTConfig {
    pub fn validate(&self) -> Result<(), ReasoningError> {
        if self.k < 1 || self.t_limit < 1 || self.b < 1 {
            return Err(ReasoningError::BadConfig(format!(
                "k={}, t_limit={}, b={} must all be >= 1",
                self.k, self.t_limit, self.b
            )));
        }
        Ok(())
    }
}

/// A chain of thoughts; the first element is the input query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThoughtState {
    pub thoughts: Vec<String>,
    pub value: Option<f64>,
}

impl ThoughtState {
    pub fn root(x: &str) -> Self {
        ThoughtState { thoughts: vec![x.to_string()], value: None }
    }

    pub fn child(&self, thought: String) -> Self {
        let mut thoughts = self.thoughts.clone();
        thoughts.push(thought);
        ThoughtState { thoughts, value: None }
    }

    pub fn chain(&self) -> String {
        self.thoughts.join("\n")
    }
}

/// The four reasoning decorators prepended to frontier-selection queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDecorators {
    pub decomposition: String,
    pub generation: String,
    pub evaluation: String,
    pub search: String,
}

impl Default for PromptDecorators {
    /// The deliberating-experts decorator texts shipped in
    /// `data/decorators.json`.
    fn default() -> Self {
        serde_json::from_str(include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/decorators.json"
        )))
        .expect("shipped decorators parse")
    }
}

impl PromptDecorators {
    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn validate(&self) -> Result<(), ReasoningError> {
        for (name, text) in [
            ("decomposition", &self.decomposition),
            ("generation", &self.generation),
            ("evaluation", &self.evaluation),
            ("search", &self.search),
        ] {
            if text.trim().is_empty() {
                return Err(ReasoningError::BadConfig(format!("empty {} decorator", name)));
            }
        }
        Ok(())
    }
}

/// Parsed frontier selection answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierChoice {
    /// 1-based index into the prompt's location list.
    pub location_index: usize,
    pub likelihood: Option<f64>,
    pub raw_text: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("no location index in reply starting with {preview:?}")]
    NoIndex { preview: String },
    #[error("location index {index} outside [1, {n_locations}]")]
    IndexOutOfRange { index: usize, n_locations: usize },
}

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error("thought generation failed at step {step}: {source}")]
    Generation {
        step: usize,
        #[source]
        source: LlmError,
        /// Beam at the time of failure.
        partial: Vec<ThoughtState>,
    },
    #[error("state evaluation failed at step {step}: {source}")]
    Evaluation {
        step: usize,
        #[source]
        source: LlmError,
        partial: Vec<ThoughtState>,
    },
    #[error("completion failed: {0}")]
    Completion(#[from] LlmError),
    #[error("generator produced no thoughts")]
    EmptyGeneration,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("frontier selection needs at least one context")]
    NoContexts,
    #[error("invalid reasoning config: {0}")]
    BadConfig(String),
}

/// Produces up to `k` candidate thoughts extending a state, plus the final
/// generation from the winning state.
pub trait ThoughtGenerator {
    fn expand(
        &self,
        model: &dyn CompletionModel,
        state: &ThoughtState,
        k: usize,
    ) -> Result<Vec<String>, LlmError>;

    fn conclude(
        &self,
        model: &dyn CompletionModel,
        state: &ThoughtState,
    ) -> Result<String, LlmError> {
        Ok(self.expand(model, state, 1)?.into_iter().next().unwrap_or_default())
    }
}

/// Scores a batch of states in [0, 1].
pub trait StateEvaluator {
    fn evaluate(
        &self,
        model: &dyn CompletionModel,
        states: &[ThoughtState],
    ) -> Result<Vec<f64>, LlmError>;
}

/// Beam search over thought chains. Ties in value are broken by the
/// lexicographically smallest thought sequence so runs are reproducible.
pub fn tot_search(
    x: &str,
    model: &dyn CompletionModel,
    gen: &dyn ThoughtGenerator,
    k: usize,
    eval: &dyn StateEvaluator,
    t_limit: usize,
    b: usize,
) -> Result<String, ReasoningError> {
    ToTConfig { k, t_limit, b, mode: ToTMode::Programmatic }.validate()?;

    let mut beam = vec![ThoughtState::root(x)];
    for t in 1..=t_limit {
        let mut candidates = Vec::new();
        for state in &beam {
            let thoughts = gen.expand(model, state, k).map_err(|source| {
                ReasoningError::Generation { step: t, source, partial: beam.clone() }
            })?;
            for thought in thoughts.into_iter().take(k) {
                candidates.push(state.child(thought));
            }
        }
        if candidates.is_empty() {
            return Err(ReasoningError::EmptyGeneration);
        }
        let values = eval.evaluate(model, &candidates).map_err(|source| {
            ReasoningError::Evaluation { step: t, source, partial: beam.clone() }
        })?;
        for (state, value) in candidates.iter_mut().zip(values) {
            state.value = Some(value);
        }
        candidates.sort_by(|a, b| {
            let va = a.value.unwrap_or(0.0);
            let vb = b.value.unwrap_or(0.0);
            vb.total_cmp(&va).then_with(|| a.thoughts.cmp(&b.thoughts))
        });
        candidates.truncate(b);
        beam = candidates;
    }
    let best = beam.first().ok_or(ReasoningError::EmptyGeneration)?;
    gen.conclude(model, best).map_err(ReasoningError::from)
}

/// One numbered line per frontier followed by the selection query. Location
/// numbering is the 1-based position in `contexts`, so stale extraction ids
/// never leak into prompts.
pub fn build_frontier_query(
    goal_phrase: &str,
    contexts: &[FrontierContext],
) -> Result<String, ReasoningError> {
    if contexts.is_empty() {
        return Err(ReasoningError::NoContexts);
    }
    let mut out = String::new();
    for (i, ctx) in contexts.iter().enumerate() {
        if ctx.nearby_objects.is_empty() {
            out.push_str(&format!(
                "location #{}, located near {}, where nothing is yet found.\n",
                i + 1,
                ctx.room
            ));
        } else {
            out.push_str(&format!(
                "location #{}, located near {}, where {{{}}} are also found.\n",
                i + 1,
                ctx.room,
                ctx.nearby_objects.join(", ")
            ));
        }
    }
    out.push_str(&format!(
        "pick one single location where {} is most likely to occur and give a final answer with one single location index.",
        goal_phrase
    ));
    Ok(out)
}

/// Render a conclusion in the output grammar; the inverse of
/// [`parse_conclusion`] for integer percents.
pub fn format_conclusion(index: usize, percent: u32) -> String {
    format!("Conclusion, location #{} with highest likelihood {}%.", index, percent)
}

fn index_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)location\s*#\s*(\d+)").expect("regex"))
}

fn percent_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d+)\s*%").expect("regex"))
}

/// Scan a reply for the last `location #<i>` occurrence and an optional
/// `<p>%` likelihood after it.
pub fn parse_conclusion(text: &str, n_locations: usize) -> Result<FrontierChoice, ParseError> {
    let last = index_re().captures_iter(text).last().ok_or_else(|| ParseError::NoIndex {
        preview: text.chars().take(60).collect(),
    })?;
    let index: usize = last[1].parse().map_err(|_| ParseError::NoIndex {
        preview: text.chars().take(60).collect(),
    })?;
    if index < 1 || index > n_locations {
        return Err(ParseError::IndexOutOfRange { index, n_locations });
    }
    let tail = &text[last.get(0).expect("match").end()..];
    let likelihood = percent_re()
        .captures(tail)
        .and_then(|c| c[1].parse::<f64>().ok())
        .map(|p| (p / 100.0).clamp(0.0, 1.0));
    Ok(FrontierChoice { location_index: index, likelihood, raw_text: text.to_string() })
}

/// Generator used in `Programmatic` mode: decomposition and generation
/// decorators frame each expansion prompt; the search decorator is appended
/// to the final generation.
pub struct ProgrammaticGenerator<'a> {
    pub decorators: &'a PromptDecorators,
    pub params: CompletionParams,
}

impl ThoughtGenerator for ProgrammaticGenerator<'_> {
    fn expand(
        &self,
        model: &dyn CompletionModel,
        state: &ThoughtState,
        k: usize,
    ) -> Result<Vec<String>, LlmError> {
        let mut thoughts = Vec::with_capacity(k);
        for i in 1..=k {
            let prompt = format!(
                "{}\n\n{}\n\n{}\n\nExpert {} of {}, write down the next step of your thinking.",
                self.decorators.decomposition,
                self.decorators.generation,
                state.chain(),
                i,
                k
            );
            thoughts.push(model.complete(&prompt, &self.params)?);
        }
        Ok(thoughts)
    }

    fn conclude(
        &self,
        model: &dyn CompletionModel,
        state: &ThoughtState,
    ) -> Result<String, LlmError> {
        let prompt = format!("{}\n\n{}", state.chain(), self.decorators.search);
        model.complete(&prompt, &self.params)
    }
}

/// Evaluator used in `Programmatic` mode: asks for a percentage and parses
/// the last integer percent in the reply, defaulting to 0.5.
pub struct ProgrammaticEvaluator<'a> {
    pub decorators: &'a PromptDecorators,
    pub params: CompletionParams,
}

impl StateEvaluator for ProgrammaticEvaluator<'_> {
    fn evaluate(
        &self,
        model: &dyn CompletionModel,
        states: &[ThoughtState],
    ) -> Result<Vec<f64>, LlmError> {
        let mut values = Vec::with_capacity(states.len());
        for state in states {
            let prompt = format!(
                "{}\n\n{}\n\nState the likelihood as a percentage.",
                self.decorators.evaluation,
                state.chain()
            );
            let reply = model.complete(&prompt, &self.params)?;
            let value = percent_re()
                .captures_iter(&reply)
                .last()
                .and_then(|c| c[1].parse::<f64>().ok())
                .map(|p| (p / 100.0).clamp(0.0, 1.0))
                .unwrap_or(0.5);
            values.push(value);
        }
        Ok(values)
    }
}

/// Compose the query, run the configured reasoning mode, and parse the
/// conclusion into a [`FrontierChoice`].
pub fn select_frontier(
    goal_phrase: &str,
    contexts: &[FrontierContext],
    model: &dyn CompletionModel,
    config: &ToTConfig,
    decorators: &PromptDecorators,
    params: &CompletionParams,
) -> Result<FrontierChoice, ReasoningError> {
    config.validate()?;
    decorators.validate()?;
    let query = build_frontier_query(goal_phrase, contexts)?;
    let raw = match config.mode {
        ToTMode::SingleShot => {
            let prompt = format!(
                "{}\n\n{}\n\n{}\n\n{}\n\n{}",
                decorators.decomposition,
                decorators.generation,
                decorators.evaluation,
                decorators.search,
                query
            );
            model.complete(&prompt, params)?
        }
        ToTMode::Programmatic => {
            let gen = ProgrammaticGenerator { decorators, params: params.clone() };
            let eval = ProgrammaticEvaluator { decorators, params: params.clone() };
            tot_search(&query, model, &gen, config.k, &eval, config.t_limit, config.b)?
        }
    };
    Ok(parse_conclusion(&raw, contexts.len())?)
}

/// Ablation variant: the bare query with no reasoning decorators.
pub fn select_frontier_direct(
    goal_phrase: &str,
    contexts: &[FrontierContext],
    model: &dyn CompletionModel,
    params: &CompletionParams,
) -> Result<FrontierChoice, ReasoningError> {
    let query = build_frontier_query(goal_phrase, contexts)?;
    let raw = model.complete(&query, params)?;
    Ok(parse_conclusion(&raw, contexts.len())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedModel;
    use std::collections::BTreeMap;

    /// Scripted tree for search tests: maps a chain to its children and each
    /// chain to a value.
    #[derive(Default, Clone)]
    pub(crate) struct ScriptedTree {
        pub children: BTreeMap<Vec<String>, Vec<String>>,
        pub values: BTreeMap<Vec<String>, f64>,
        pub conclusions: BTreeMap<Vec<String>, String>,
    }

    impl ThoughtGenerator for ScriptedTree {
        fn expand(
            &self,
            _model: &dyn CompletionModel,
            state: &ThoughtState,
            k: usize,
        ) -> Result<Vec<String>, LlmError> {
            Ok(self
                .children
                .get(&state.thoughts)
                .cloned()
                .unwrap_or_default()
                .into_iter()
                .take(k)
                .collect())
        }

        fn conclude(
            &self,
            _model: &dyn CompletionModel,
            state: &ThoughtState,
        ) -> Result<String, LlmError> {
            Ok(self
                .conclusions
                .get(&state.thoughts)
                .cloned()
                .unwrap_or_else(|| state.thoughts.join("/")))
        }
    }

    impl StateEvaluator for ScriptedTree {
        fn evaluate(
            &self,
            _model: &dyn CompletionModel,
            states: &[ThoughtState],
        ) -> Result<Vec<f64>, LlmError> {
            Ok(states
                .iter()
                .map(|s| self.values.get(&s.thoughts).copied().unwrap_or(0.0))
                .collect())
        }
    }

    fn dummy_model() -> ScriptedModel {
        ScriptedModel::with_default("unused")
    }

    fn ctx(room: &str, objects: &[&str]) -> FrontierContext {
        FrontierContext {
            frontier_id: 0,
            room: room.to_string(),
            nearby_objects: objects.iter().map(|s| s.to_string()).collect(),
            distance_from_agent: 1.0,
        }
    }

    #[test]
    fn single_path_search() {
        let mut tree = ScriptedTree::default();
        let x = vec!["x".to_string()];
        tree.children.insert(x.clone(), vec!["a".into()]);
        tree.values.insert(vec!["x".into(), "a".into()], 1.0);
        tree.conclusions.insert(vec!["x".into(), "a".into()], "answer".into());
        let out = tot_search("x", &dummy_model(), &tree, 1, &tree, 1, 1).unwrap();
        assert_eq!(out, "answer");
    }

    #[test]
    fn beam_of_one_is_greedy() {
        // Depth 1 values: a=0.9, b=0.1; children of the 0.9 branch score
        // 0.2/0.3 while the pruned branch hides a 1.0 leaf.
        let mut tree = ScriptedTree::default();
        let x = || vec!["x".to_string()];
        tree.children.insert(x(), vec!["a".into(), "b".into()]);
        tree.values.insert(vec!["x".into(), "a".into()], 0.9);
        tree.values.insert(vec!["x".into(), "b".into()], 0.1);
        tree.children
            .insert(vec!["x".into(), "a".into()], vec!["a1".into(), "a2".into()]);
        tree.children
            .insert(vec!["x".into(), "b".into()], vec!["jackpot".into()]);
        tree.values.insert(vec!["x".into(), "a".into(), "a1".into()], 0.2);
        tree.values.insert(vec!["x".into(), "a".into(), "a2".into()], 0.3);
        tree.values
            .insert(vec!["x".into(), "b".into(), "jackpot".into()], 1.0);
        tree.conclusions
            .insert(vec!["x".into(), "a".into(), "a2".into()], "greedy".into());
        let out = tot_search("x", &dummy_model(), &tree, 2, &tree, 2, 1).unwrap();
        assert_eq!(out, "greedy");
    }

    #[test]
    fn value_ties_break_lexicographically() {
        let mut tree = ScriptedTree::default();
        tree.children
            .insert(vec!["x".into()], vec!["zeta".into(), "alpha".into()]);
        tree.values.insert(vec!["x".into(), "zeta".into()], 0.5);
        tree.values.insert(vec!["x".into(), "alpha".into()], 0.5);
        tree.conclusions
            .insert(vec!["x".into(), "alpha".into()], "alpha wins".into());
        let out = tot_search("x", &dummy_model(), &tree, 2, &tree, 1, 1).unwrap();
        assert_eq!(out, "alpha wins");
    }

    #[test]
    fn generator_failure_carries_partial_beam() {
        struct FailingGen;
        impl ThoughtGenerator for FailingGen {
            fn expand(
                &self,
                _m: &dyn CompletionModel,
                _s: &ThoughtState,
                _k: usize,
            ) -> Result<Vec<String>, LlmError> {
                Err(LlmError::Config("boom".into()))
            }
        }
        let tree = ScriptedTree::default();
        let err = tot_search("x", &dummy_model(), &FailingGen, 1, &tree, 1, 1).unwrap_err();
        match err {
            ReasoningError::Generation { step, partial, .. } => {
                assert_eq!(step, 1);
                assert_eq!(partial.len(), 1);
                assert_eq!(partial[0].thoughts, vec!["x".to_string()]);
            }
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn query_format_matches_contract() {
        let contexts = vec![ctx("bedroom", &["bed", "lamp"]), ctx("unknown area", &[])];
        let q = build_frontier_query("an alarm clock", &contexts).unwrap();
        assert!(q.contains("location #1, located near bedroom, where {bed, lamp} are also found."));
        assert!(q.contains("location #2, located near unknown area, where nothing is yet found."));
        assert!(q.contains(
            "pick one single location where an alarm clock is most likely to occur and give a final answer with one single location index."
        ));
        assert!(build_frontier_query("a mug", &[]).is_err());
    }

    #[test]
    fn parse_conclusion_grammar() {
        let c = parse_conclusion("Conclusion, location #3 with highest likelihood 85%.", 5).unwrap();
        assert_eq!(c.location_index, 3);
        assert_eq!(c.likelihood, Some(0.85));

        // Last occurrence wins.
        let c = parse_conclusion(
            "…experts agree… location #2. Conclusion, location #1 with highest likelihood 60%.",
            2,
        )
        .unwrap();
        assert_eq!(c.location_index, 1);
        assert_eq!(c.likelihood, Some(0.60));

        assert!(matches!(
            parse_conclusion("I cannot decide.", 3),
            Err(ParseError::NoIndex { .. })
        ));
        assert!(matches!(
            parse_conclusion("location #9", 3),
            Err(ParseError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn parse_without_percent_leaves_likelihood_empty() {
        let c = parse_conclusion("the experts settle on location #4.", 8).unwrap();
        assert_eq!(c.location_index, 4);
        assert_eq!(c.likelihood, None);
    }

    #[test]
    fn select_frontier_single_shot_passthrough() {
        let model = ScriptedModel::new().rule(
            "pick one single location",
            "Conclusion, location #1 with highest likelihood 90%.",
        );
        let contexts = vec![ctx("bathroom", &["toilet"]), ctx("office", &["desk", "chair"])];
        let choice = select_frontier(
            "a laptop",
            &contexts,
            &model,
            &ToTConfig::default(),
            &PromptDecorators::default(),
            &CompletionParams::default(),
        )
        .unwrap();
        assert_eq!(choice.location_index, 1);
        assert_eq!(choice.likelihood, Some(0.9));
    }

    #[test]
    fn select_frontier_with_oracle_prefers_high_affinity() {
        use crate::llm::{AffinityTable, OracleModel};
        let model = OracleModel::new(AffinityTable::from_pairs(
            0.0,
            &[("laptop", "desk", 0.9), ("laptop", "toilet", 0.05)],
        ));
        let contexts = vec![ctx("bathroom", &["toilet"]), ctx("office", &["desk", "chair"])];
        for mode in [ToTMode::SingleShot, ToTMode::Programmatic] {
            let config = ToTConfig { mode, ..ToTConfig::default() };
            let choice = select_frontier(
                "a laptop",
                &contexts,
                &model,
                &config,
                &PromptDecorators::default(),
                &CompletionParams::default(),
            )
            .unwrap();
            assert_eq!(choice.location_index, 2, "mode {:?}", mode);
        }
    }

    #[test]
    fn select_frontier_surfaces_parse_errors() {
        let model = ScriptedModel::with_default("no idea");
        let contexts = vec![ctx("bathroom", &["toilet"])];
        let err = select_frontier(
            "a laptop",
            &contexts,
            &model,
            &ToTConfig::default(),
            &PromptDecorators::default(),
            &CompletionParams::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ReasoningError::Parse(_)));
    }

    #[test]
    fn decorators_default_to_expert_prompts() {
        let d = PromptDecorators::default();
        assert!(d.decomposition.starts_with("Imagine ten different experts"));
        assert!(d.evaluation.contains("assign a likelihood"));
        assert!(d.search.contains("Continue until the experts agree"));
        d.validate().unwrap();
    }
}
