//! Runs a short scenario with per-monitor details kept and prints what one
//! monitor concluded at each detection tick.
//!
//! Usage: `cargo run --release --example detection_window -- [monitor_id]`

use mesh_sentinel::detect::Verdict;
use mesh_sentinel::sim::{run_with, RunOptions};
use mesh_sentinel::{NodeId, ScenarioConfig, Strategy};

fn main() -> mesh_sentinel::Result<()> {
    let watched = NodeId(
        std::env::args()
            .nth(1)
            .map_or(0, |s| s.parse().expect("monitor id")),
    );
    let config = ScenarioConfig {
        sim_duration: 800.0,
        strategy: Strategy::DropReq,
        drop_prob: 0.8,
        ..ScenarioConfig::default()
    };
    let out = run_with(
        &config,
        RunOptions {
            record_trace: false,
            keep_details: true,
        },
    )?;
    let selfish = &out.metrics.selfish;
    println!(
        "monitor {watched} neighbors: {:?}",
        out.topology.neighbor_slice(watched)
    );

    for tick in &out.details {
        let Some(mine) = tick.monitors.iter().find(|m| m.monitor == watched) else {
            continue;
        };
        let c = &mine.report.classification;
        println!(
            "window ending {}: chosen cut {:?}",
            tick.window_end, c.chosen_k
        );
        for (node, stat) in &mine.statistical {
            let fused = mine.fused[node];
            let e = mine.evidence.get(node).copied().unwrap_or_default();
            let truth = if selfish.contains(node) {
                "selfish"
            } else {
                "honest"
            };
            let mark = if fused == Verdict::Selfish { "*" } else { " " };
            println!(
                "  {mark} node {node:>2} ({truth:>7}) score {:>7.2}  stat {stat:?}, fused {fused:?}, violations {}/{}",
                c.scores[node],
                e.violations(),
                e.obligations_total
            );
        }
    }
    Ok(())
}
