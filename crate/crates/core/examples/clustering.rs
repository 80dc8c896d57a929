//! Runs the statistical pipeline on synthetic transition matrices for six
//! neighbors, two of which time out most of the floods they receive.

use mesh_sentinel::detect::{cooperation_score, detect, DetectorParams};
use mesh_sentinel::monitor::{FsmState, TransitionMatrix};
use mesh_sentinel::NodeId;

fn neighbor(forwarded: u64, dropped: u64, replies: u64) -> TransitionMatrix {
    let mut t = TransitionMatrix::zero();
    t.add(FsmState::Init, FsmState::RcvdRreq, forwarded + dropped);
    t.add(FsmState::RcvdRreq, FsmState::FwdRreq, forwarded);
    t.add(FsmState::RcvdRreq, FsmState::TimeoutRreq, dropped);
    t.add(
        FsmState::FwdRreq,
        FsmState::TimeoutRreq,
        forwarded - replies,
    );
    t.add(FsmState::FwdRreq, FsmState::LmuComplete, replies);
    t
}

fn main() -> mesh_sentinel::Result<()> {
    let nodes: Vec<NodeId> = (0..6).map(NodeId).collect();
    let matrices = vec![
        neighbor(30, 1, 6),
        neighbor(26, 0, 5),
        neighbor(1, 24, 0),
        neighbor(33, 2, 8),
        neighbor(2, 29, 0),
        neighbor(28, 1, 4),
    ];

    let report = detect(&nodes, &matrices, &DetectorParams::default())?;
    println!("dissimilarity:");
    for row in report.dissimilarity.rows() {
        let cells: Vec<String> = row.iter().map(|d| format!("{d:.3}")).collect();
        println!("  {}", cells.join(" "));
    }
    println!("merges:");
    for m in &report.dendrogram.merges {
        println!(
            "  {} + {} at {:.3} (size {})",
            m.left, m.right, m.height, m.size
        );
    }
    let c = &report.classification;
    for (k, p) in &c.p_sequence {
        println!("P{k} = {p:.4}");
    }
    println!("chosen cut: {:?}", c.chosen_k);
    for (i, node) in nodes.iter().enumerate() {
        println!(
            "  node {node}: score {:>6.2}  {:?}",
            cooperation_score(&matrices[i]),
            c.verdict(*node).unwrap()
        );
    }
    Ok(())
}
