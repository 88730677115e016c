//! Scratch calibration: generate a suite, run both policies, print SRs.

use totnav::agent::Policy;
use totnav::bench::{generate_suite, run::RunOptions, run_suite, GenParams, RunConfig};
use totnav::llm::OracleModel;

fn main() {
    let t0 = std::time::Instant::now();
    let params = GenParams::default();
    let suite = generate_suite(2024, &params).unwrap();
    println!("suite: {} episodes, gen in {:?}", suite.episodes.len(), t0.elapsed());

    let cfg = RunConfig::default();
    let model = OracleModel::with_shipped_table();

    for (label, policy) in [("tot", Policy::ToT), ("nearest", Policy::NearestFrontier)] {
        let t = std::time::Instant::now();
        let mut opts = RunOptions::new(label, policy);
        opts.parallelism = 8;
        let report = run_suite(&suite, &cfg, &model, &opts).unwrap();
        println!(
            "{:>8}: SR {:5.1}  SPL {:5.1}  ({} eps, {:?})",
            label,
            report.aggregate.sr,
            report.aggregate.spl,
            report.aggregate.episodes,
            t.elapsed()
        );
        for (split, m) in &report.per_split {
            println!("          {:>20}: SR {:5.1} SPL {:5.1}", split.as_str(), m.sr, m.spl);
        }
    }
}
