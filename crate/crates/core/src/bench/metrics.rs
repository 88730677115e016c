//! Success rate and success-weighted-by-path-length over episode results.

use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeResult, Termination};

use super::{BenchError, Split};

/// One scored episode, as persisted in `results.json` and the CSV report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode_id: String,
    pub split: Split,
    pub success: bool,
    pub steps: usize,
    pub path_m: f64,
    pub optimal_m: f64,
    pub spl_term: f64,
    pub termination: Termination,
    pub model_backend: String,
    #[serde(default)]
    pub transcript_ref: Option<String>,
    /// Compact action letters (M/L/R/S) for trajectory replay.
    #[serde(default)]
    pub actions: String,
    #[serde(default)]
    pub rejected_instance_ids: Vec<String>,
}

impl EpisodeRow {
    pub fn from_result(
        episode_id: &str,
        split: Split,
        backend: &str,
        result: &EpisodeResult,
    ) -> Self {
        EpisodeRow {
            episode_id: episode_id.to_string(),
            split,
            success: result.success,
            steps: result.steps,
            path_m: result.path_length_m,
            optimal_m: result.optimal_length_m,
            spl_term: spl_term(result.success, result.path_length_m, result.optimal_length_m),
            termination: result.termination,
            model_backend: backend.to_string(),
            transcript_ref: result.transcript_ref.clone(),
            actions: result.actions.iter().map(|a| a.letter()).collect(),
            rejected_instance_ids: result.rejected_instance_ids.clone(),
        }
    }
}

/// Per-episode SPL contribution: S_i * l_i / max(p_i, l_i).
pub fn spl_term(success: bool, path_m: f64, optimal_m: f64) -> f64 {
    if !success {
        return 0.0;
    }
    optimal_m / path_m.max(optimal_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Success rate in percent.
    pub sr: f64,
    /// Success weighted by path length, in percent.
    pub spl: f64,
    pub episodes: usize,
}

/// SR = 100 * (#success / N); SPL = 100 * mean of S_i * l_i / max(p_i, l_i).
pub fn compute_metrics(rows: &[EpisodeRow]) -> Result<Metrics, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    let n = rows.len() as f64;
    let successes = rows.iter().filter(|r| r.success).count() as f64;
    let spl_sum: f64 = rows.iter().map(|r| r.spl_term).sum();
    Ok(Metrics {
        sr: 100.0 * successes / n,
        spl: 100.0 * spl_sum / n,
        episodes: rows.len(),
    })
}

/// Report over one run: per-split metrics plus the aggregate, with the
/// configuration fingerprint that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub label: String,
    pub fingerprint: String,
    pub per_split: Vec<(Split, Metrics)>,
    pub aggregate: Metrics,
    pub rows: Vec<EpisodeRow>,
}

impl SuiteReport {
    pub fn build(label: &str, fingerprint: &str, mut rows: Vec<EpisodeRow>) -> Result<Self, BenchError> {
        rows.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
        let mut splits: Vec<Split> = rows.iter().map(|r| r.split).collect();
        splits.sort();
        splits.dedup();
        let mut per_split = Vec::new();
        for split in splits {
            let subset: Vec<EpisodeRow> =
                rows.iter().filter(|r| r.split == split).cloned().collect();
            per_split.push((split, compute_metrics(&subset)?));
        }
        let aggregate = compute_metrics(&rows)?;
        Ok(SuiteReport {
            label: label.to_string(),
            fingerprint: fingerprint.to_string(),
            per_split,
            aggregate,
            rows,
        })
    }

    pub fn split_metrics(&self, split: Split) -> Option<Metrics> {
        self.per_split.iter().find(|(s, _)| *s == split).map(|(_, m)| *m)
    }

    /// Fixed-column CSV; one row per episode, sorted by id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "episode_id,split,success,steps,path_m,optimal_m,spl_term,termination,model_backend\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.4},{:.4},{:.4},{},{}\n",
                r.episode_id,
                r.split.as_str(),
                r.success,
                r.steps,
                r.path_m,
                if r.optimal_m.is_finite() { r.optimal_m } else { -1.0 },
                r.spl_term,
                r.termination.as_str(),
                r.model_backend,
            ));
        }
        out
    }
}

/// Human-readable table over one or more reports: a column per split (SR)
/// plus aggregate SPL and SR, one row per report label.
pub fn format_table(reports: &[&SuiteReport]) -> String {
    let mut splits: Vec<Split> = Vec::new();
    for r in reports {
        for (s, _) in &r.per_split {
            if !splits.contains(s) {
                splits.push(*s);
            }
        }
    }
    splits.sort();

    let mut header = format!("{:<24}", "run");
    for s in &splits {
        header.push_str(&format!("{:>20}", format!("{} SR", s.as_str())));
    }
    header.push_str(&format!("{:>12}{:>10}", "avg SPL", "avg SR"));

    let mut out = String::new();
    out.push_str(&header);
    out.push('\n');
    out.push_str(&"-".repeat(header.len()));
    out.push('\n');
    for r in reports {
        out.push_str(&format!("{:<24}", r.label));
        for s in &splits {
            match r.split_metrics(*s) {
                Some(m) => out.push_str(&format!("{:>20.1}", m.sr)),
                None => out.push_str(&format!("{:>20}", "-")),
            }
        }
        out.push_str(&format!("{:>12.1}{:>10.1}\n", r.aggregate.spl, r.aggregate.sr));
    }
    out.push_str(&format!(
        "\nSPL = success weighted by path length, 100/N * sum S_i * l_i / max(p_i, l_i) \
         (standard navigation-metrics definition).\n"
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, success: bool, path: f64, optimal: f64) -> EpisodeRow {
        EpisodeRow {
            episode_id: id.into(),
            split: Split::Appearance,
            success,
            steps: 10,
            path_m: path,
            optimal_m: optimal,
            spl_term: spl_term(success, path, optimal),
            termination: if success { Termination::Stopped } else { Termination::StepBudget },
            model_backend: "oracle".into(),
            transcript_ref: None,
            actions: String::new(),
            rejected_instance_ids: vec![],
        }
    }

    #[test]
    fn all_failures_score_zero() {
        let rows = vec![row("a", false, 1.0, 1.0), row("b", false, 2.0, 1.0)];
        let m = compute_metrics(&rows).unwrap();
        assert_eq!((m.sr, m.spl), (0.0, 0.0));
    }

    #[test]
    fn optimal_success_scores_hundred() {
        let rows = vec![row("a", true, 2.0, 2.0)];
        let m = compute_metrics(&rows).unwrap();
        assert_eq!((m.sr, m.spl), (100.0, 100.0));
    }

    #[test]
    fn half_success_with_double_path() {
        // One success with p = 2l, one failure: (50, 25).
        let rows = vec![row("a", true, 4.0, 2.0), row("b", false, 1.0, 2.0)];
        let m = compute_metrics(&rows).unwrap();
        assert_eq!((m.sr, m.spl), (50.0, 25.0));
    }

    #[test]
    fn empty_results_is_an_error() {
        assert!(compute_metrics(&[]).is_err());
    }

    #[test]
    fn shorter_than_optimal_path_caps_at_one() {
        // Diagonal shortcuts can make p < l; the term must not exceed 1.
        let rows = vec![row("a", true, 1.0, 2.0)];
        let m = compute_metrics(&rows).unwrap();
        assert_eq!(m.spl, 100.0);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let mut rows = vec![
            row("a", true, 4.0, 2.0),
            row("b", false, 1.0, 2.0),
            row("c", true, 2.0, 2.0),
        ];
        let m1 = compute_metrics(&rows).unwrap();
        rows.reverse();
        let m2 = compute_metrics(&rows).unwrap();
        assert_eq!(m1, m2);
    }
}
