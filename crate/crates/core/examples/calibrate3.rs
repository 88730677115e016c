//! Scratch: transcript dump for one episode under one policy.

use totnav::agent::Policy;
use totnav::bench::{generate_suite, run::RunOptions, run_suite, GenParams, RunConfig};
use totnav::llm::OracleModel;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episode_id = args.get(1).cloned().unwrap_or("ep-appearance-001".into());
    let policy = if args.get(2).map(|s| s == "nearest").unwrap_or(false) {
        Policy::NearestFrontier
    } else {
        Policy::ToT
    };
    let params = GenParams::default();
    let suite = generate_suite(2024, &params).unwrap();
    let cfg = RunConfig::default();
    let model = OracleModel::with_shipped_table();

    let out = std::path::PathBuf::from("/tmp/totnav-debug");
    let _ = std::fs::remove_dir_all(&out);
    let mut opts = RunOptions::new("debug", policy);
    opts.parallelism = 8;
    opts.out_dir = Some(out.clone());
    let report = run_suite(&suite, &cfg, &model, &opts).unwrap();

    let ep = suite.episodes.iter().find(|e| e.id == episode_id).unwrap();
    let world = suite.world(&ep.world_ref).unwrap();
    println!("instruction: {:?}", ep.instruction);
    println!("start: {:?}", ep.start);
    let goal = world.object(&ep.goal_instance_id).unwrap();
    println!("goal: {:?}", goal);
    println!("world occupancy:");
    for line in world.to_json_string().lines() {
        if line.contains('#') {
            println!("  {}", line.trim());
        }
    }
    let row = report.rows.iter().find(|r| r.episode_id == episode_id).unwrap();
    println!(
        "result: success={} steps={} term={:?} rejected={:?}",
        row.success, row.steps, row.termination, row.rejected_instance_ids
    );
    let transcript =
        std::fs::read_to_string(out.join(format!("transcripts/{}.jsonl", episode_id))).unwrap();
    let lines: Vec<&str> = transcript.lines().collect();
    for l in lines.iter().rev().take(40).rev() {
        let trimmed: String = l.chars().take(400).collect();
        println!("{}", trimmed);
    }
}
