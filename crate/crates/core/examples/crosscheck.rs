//! Shows how header cross-check evidence changes statistical verdicts, first
//! on hand-made evidence and then across a DropRep run.

use mesh_sentinel::crosscheck::{fuse_one, EvidenceCounts, FusionPolicy};
use mesh_sentinel::detect::Verdict;
use mesh_sentinel::sim::{run_with, RunOptions};
use mesh_sentinel::{ScenarioConfig, Strategy};

fn rep_evidence(obligations: u64, violations: u64) -> EvidenceCounts {
    EvidenceCounts {
        obligations_total: obligations,
        rrep_obligations: obligations,
        fulfilled: obligations - violations,
        violations_rep: violations,
        ..EvidenceCounts::default()
    }
}

fn main() -> mesh_sentinel::Result<()> {
    let policy = FusionPolicy::default();
    let cases = [
        (Verdict::Cooperative, rep_evidence(8, 6)),
        (Verdict::Selfish, rep_evidence(8, 1)),
        (Verdict::Selfish, rep_evidence(8, 0)),
        (Verdict::Selfish, rep_evidence(2, 0)),
        (Verdict::Unascertained, rep_evidence(3, 1)),
    ];
    for (stat, e) in cases {
        println!(
            "{stat:?} with {}/{} violated replies -> {:?}",
            e.violations(),
            e.obligations_total,
            fuse_one(stat, &e, &policy)
        );
    }

    let config = ScenarioConfig {
        strategy: Strategy::DropRep,
        drop_prob: 0.7,
        ..ScenarioConfig::default()
    };
    let out = run_with(
        &config,
        RunOptions {
            record_trace: false,
            keep_details: false,
        },
    )?;
    let m = &out.metrics;
    let r = m
        .final_record()
        .expect("run longer than one detection window");
    let show = |x: Option<f64>| x.map_or("-".into(), |v| format!("{v:.3}"));
    println!("\nDropRep p=0.7, seed {}", m.seed);
    println!(
        "  statistical only: dr {} fp {}",
        show(r.statistical.detection_rate),
        show(r.statistical.false_positive_rate)
    );
    println!(
        "  with cross-check: dr {} fp {}",
        show(r.fused.detection_rate),
        show(r.fused.false_positive_rate)
    );

    let (mut honest, mut selfish) = (Vec::new(), Vec::new());
    for (node, totals) in &m.evidence {
        if totals.rrep_obligations == 0 {
            continue;
        }
        let ratio = totals.rrep_violated as f64 / totals.rrep_obligations as f64;
        if m.selfish.contains(node) {
            selfish.push(ratio)
        } else {
            honest.push(ratio)
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!(
        "  mean reply violation ratio: honest {:.3}, selfish {:.3}",
        mean(&honest),
        mean(&selfish)
    );
    Ok(())
}
