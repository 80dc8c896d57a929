//! Runs the default 50-node scenario and prints the per-window rates.
//!
//! Usage: `cargo run --release --example run_scenario -- [seed] [DROP_REQ|DROP_REP] [drop_prob]`

use std::time::Instant;

use mesh_sentinel::sim::{run_with, RunOptions};
use mesh_sentinel::{ScenarioConfig, Strategy};

fn fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn main() -> mesh_sentinel::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut config = ScenarioConfig::default();
    if let Some(seed) = args.next() {
        config.seed = seed.parse().expect("seed must be an integer");
    }
    if let Some(s) = args.next() {
        config.strategy = s.parse::<Strategy>().expect("strategy");
    }
    if let Some(p) = args.next() {
        config.drop_prob = p.parse().expect("drop probability");
    }

    let started = Instant::now();
    let out = run_with(
        &config,
        RunOptions {
            record_trace: false,
            keep_details: false,
        },
    )?;
    let m = &out.metrics;
    println!(
        "seed {} {} p={} selfish={} sessions={} tx={} ({:.2?})",
        m.seed,
        m.strategy,
        m.drop_prob,
        m.selfish.len(),
        m.sessions,
        m.tx_count,
        started.elapsed()
    );
    println!("drops: {:?}", m.drops);
    println!(
        "{:>8}  {:>14}  {:>14}  {:>14}  {:>14}",
        "window", "dr (fused)", "fp (fused)", "dr (stat)", "fp (stat)"
    );
    for r in &m.records {
        println!(
            "{:>8}  {:>14}  {:>14}  {:>14}  {:>14}",
            r.window_end.as_secs_f64(),
            fmt(r.fused.detection_rate),
            fmt(r.fused.false_positive_rate),
            fmt(r.statistical.detection_rate),
            fmt(r.statistical.false_positive_rate)
        );
    }
    let honest_violations: u64 = m
        .evidence
        .iter()
        .filter(|(n, _)| !m.selfish.contains(n))
        .map(|(_, e)| e.violations())
        .sum();
    println!("cross-check violations charged to honest nodes: {honest_violations}");
    Ok(())
}
