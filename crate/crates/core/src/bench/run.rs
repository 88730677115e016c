//! Suite execution: a bounded worker pool runs episodes against a shared
//! model, results are canonically sorted, and reports land on disk.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::agent::{
    run_episode, AgentConfig, EpisodeResult, IdentifierKind, Policy, PromptStyle, Runtime,
    Termination,
};
use crate::llm::CompletionModel;
use crate::transcript::Transcript;

use super::metrics::{format_table, EpisodeRow, SuiteReport};
use super::{BenchError, RunConfig, Split, Suite};

/// Per-invocation knobs that come from CLI flags rather than the config file.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub label: String,
    pub policy: Policy,
    pub identifier: Option<IdentifierKind>,
    pub prompt_style: PromptStyle,
    pub parallelism: usize,
    pub out_dir: Option<PathBuf>,
    /// Restrict the run to one split (identifier ablations).
    pub split_filter: Option<Split>,
}

impl RunOptions {
    pub fn new(label: &str, policy: Policy) -> Self {
        RunOptions {
            label: label.to_string(),
            policy,
            identifier: None,
            prompt_style: PromptStyle::Tot,
            parallelism: 1,
            out_dir: None,
            split_filter: None,
        }
    }
}

/// Hash of everything that determines a run's outcome with a deterministic
/// backend: suite identity, agent/tot/noise config, model, policy knobs.
pub fn config_fingerprint(suite: &Suite, cfg: &RunConfig, opts: &RunOptions) -> String {
    #[derive(serde::Serialize)]
    struct Fingerprint<'a> {
        master_seed: u64,
        params: &'a super::GenParams,
        agent: &'a AgentConfig,
        tot: &'a crate::reasoning::ToTConfig,
        noise: &'a super::NoiseConfig,
        backend: &'a crate::llm::ModelConfig,
        policy: Policy,
        identifier: Option<IdentifierKind>,
        prompt_style: PromptStyle,
        split_filter: Option<Split>,
    }
    let fp = Fingerprint {
        master_seed: suite.manifest.master_seed,
        params: &suite.manifest.params,
        agent: &cfg.agent,
        tot: &cfg.tot,
        noise: &cfg.noise,
        backend: &cfg.model,
        policy: opts.policy,
        identifier: opts.identifier,
        prompt_style: opts.prompt_style,
        split_filter: opts.split_filter,
    };
    let bytes = serde_json::to_vec(&fp).expect("fingerprint serialization");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{:02x}", b)).collect()
}

/// Run every episode of the suite. Crashed episodes are recorded as failed
/// rows; the suite always completes.
pub fn run_suite(
    suite: &Suite,
    cfg: &RunConfig,
    model: &dyn CompletionModel,
    opts: &RunOptions,
) -> Result<SuiteReport, BenchError> {
    let vocab = cfg.vocab()?;
    vocab
        .validate()
        .map_err(|e| BenchError::Config(format!("vocab: {}", e)))?;

    let mut agent_cfg = cfg.agent.clone();
    agent_cfg.policy = opts.policy;
    if let Some(ident) = opts.identifier {
        agent_cfg.identifier = ident;
    }

    let episodes: Vec<&super::Episode> = suite
        .episodes
        .iter()
        .filter(|e| opts.split_filter.map_or(true, |s| e.split == s))
        .collect();
    if episodes.is_empty() {
        return Err(BenchError::Validation("no episodes selected".into()));
    }

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir.join("transcripts"))?;
    }

    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<EpisodeRow>> = Mutex::new(Vec::with_capacity(episodes.len()));
    let workers = opts.parallelism.max(1).min(episodes.len());
    let backend = model.backend_name().to_string();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= episodes.len() {
                    break;
                }
                let episode = episodes[i];
                let row = run_one(suite, cfg, &agent_cfg, model, opts, episode, &vocab, &backend);
                rows.lock().expect("rows lock").push(row);
            });
        }
    });

    let rows = rows.into_inner().expect("rows lock");
    let fingerprint = config_fingerprint(suite, cfg, opts);
    let report = SuiteReport::build(&opts.label, &fingerprint, rows)?;

    if let Some(dir) = &opts.out_dir {
        write_report(dir, &report)?;
    }
    Ok(report)
}

fn run_one(
    suite: &Suite,
    cfg: &RunConfig,
    agent_cfg: &AgentConfig,
    model: &dyn CompletionModel,
    opts: &RunOptions,
    episode: &super::Episode,
    vocab: &crate::perception::PromptVocab,
    backend: &str,
) -> EpisodeRow {
    let transcript_rel = format!("transcripts/{}.jsonl", episode.id);
    let mut transcript = match &opts.out_dir {
        Some(dir) => Transcript::to_file(&dir.join(&transcript_rel))
            .unwrap_or_else(|_| Transcript::disabled()),
        None => Transcript::disabled(),
    };

    let world = match suite.world(&episode.world_ref) {
        Ok(w) => w,
        Err(e) => return crash_row(episode, backend, &e.to_string()),
    };

    let rt = Runtime {
        agent: agent_cfg,
        vocab,
        noise: cfg.noise.model_for(episode.seed),
        tot: &cfg.tot,
        decorators: &cfg.decorators,
        model,
        params: cfg.model.params(),
        prompt_style: opts.prompt_style,
    };

    let spec = episode.spec();
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        run_episode(world, &spec, &rt, &mut transcript)
    }));

    match outcome {
        Ok(mut result) => {
            if opts.out_dir.is_some() {
                result.transcript_ref = Some(transcript_rel);
            }
            EpisodeRow::from_result(&episode.id, episode.split, backend, &result)
        }
        Err(panic) => {
            let msg = panic_message(&panic);
            crash_row(episode, backend, &msg)
        }
    }
}

fn panic_message(panic: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_string()
    } else {
        "unknown panic".to_string()
    }
}

fn crash_row(episode: &super::Episode, backend: &str, _msg: &str) -> EpisodeRow {
    EpisodeRow::from_result(
        &episode.id,
        episode.split,
        backend,
        &EpisodeResult {
            success: false,
            actions: vec![],
            path_length_m: 0.0,
            optimal_length_m: f64::INFINITY,
            steps: 0,
            termination: Termination::Crashed,
            transcript_ref: None,
            rejected_instance_ids: vec![],
        },
    )
}

/// Write `results.json`, `report.csv`, and `report.txt` under `dir`.
pub fn write_report(dir: &Path, report: &SuiteReport) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.json"), serde_json::to_string_pretty(report)?)?;
    std::fs::write(dir.join("report.csv"), report.to_csv())?;
    std::fs::write(dir.join("report.txt"), format_table(&[report]))?;
    Ok(())
}

pub fn load_report(dir: &Path) -> Result<SuiteReport, BenchError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(
        dir.join("results.json"),
    )?)?)
}

/// Frontier-prompt ablation: the same suite under reasoning prompts vs the
/// bare query. Returns (with-decorators, without-decorators).
pub fn ablate_tot_prompts(
    suite: &Suite,
    cfg: &RunConfig,
    model: &dyn CompletionModel,
    parallelism: usize,
) -> Result<(SuiteReport, SuiteReport), BenchError> {
    let mut with = RunOptions::new("tot-prompts", Policy::ToT);
    with.parallelism = parallelism;
    let with_report = run_suite(suite, cfg, model, &with)?;

    let mut without = RunOptions::new("no-tot-prompts", Policy::ToT);
    without.prompt_style = PromptStyle::Direct;
    without.parallelism = parallelism;
    let without_report = run_suite(suite, cfg, model, &without)?;
    Ok((with_report, without_report))
}

/// Goal-identification ablation on one split (default: space-distract).
pub fn ablate_identifier(
    suite: &Suite,
    cfg: &RunConfig,
    model: &dyn CompletionModel,
    parallelism: usize,
    split: Split,
) -> Result<Vec<SuiteReport>, BenchError> {
    let mut reports = Vec::new();
    for ident in [IdentifierKind::Llm, IdentifierKind::AttributeMatch, IdentifierKind::CategoryOnly]
    {
        let label = match ident {
            IdentifierKind::Llm => "identifier-llm",
            IdentifierKind::AttributeMatch => "identifier-attribute-match",
            IdentifierKind::CategoryOnly => "identifier-category-only",
        };
        let mut opts = RunOptions::new(label, Policy::ToT);
        opts.identifier = Some(ident);
        opts.split_filter = Some(split);
        opts.parallelism = parallelism;
        reports.push(run_suite(suite, cfg, model, &opts)?);
    }
    Ok(reports)
}
