//! Scratch: per-episode diff between policies.

use totnav::agent::Policy;
use totnav::bench::{generate_suite, run::RunOptions, run_suite, GenParams, RunConfig};
use totnav::llm::OracleModel;

fn main() {
    let params = GenParams::default();
    let suite = generate_suite(2024, &params).unwrap();
    let cfg = RunConfig::default();
    let model = OracleModel::with_shipped_table();

    let mut opts = RunOptions::new("tot", Policy::ToT);
    opts.parallelism = 8;
    let tot = run_suite(&suite, &cfg, &model, &opts).unwrap();
    let mut opts = RunOptions::new("nearest", Policy::NearestFrontier);
    opts.parallelism = 8;
    let nearest = run_suite(&suite, &cfg, &model, &opts).unwrap();

    for (t, n) in tot.rows.iter().zip(nearest.rows.iter()) {
        assert_eq!(t.episode_id, n.episode_id);
        if t.success != n.success {
            let ep = suite.episodes.iter().find(|e| e.id == t.episode_id).unwrap();
            println!(
                "{:<28} tot: {:>5} {:>4} steps ({:<10}) | nearest: {:>5} {:>4} steps ({:<10}) goal={} world={}",
                t.episode_id,
                t.success,
                t.steps,
                t.termination.as_str(),
                n.success,
                n.steps,
                n.termination.as_str(),
                ep.instruction.goal_category,
                ep.world_ref,
            );
        }
    }
    println!("tot SR {:.1} nearest SR {:.1}", tot.aggregate.sr, nearest.aggregate.sr);
}
