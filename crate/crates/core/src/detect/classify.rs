use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::anova::anova_p;
use super::linkage::{single_linkage, Dendrogram};
use super::pearson::PearsonTest;
use super::similarity::{DissimilarityMatrix, SimilarityMatrix};
use crate::error::Result;
use crate::monitor::{FsmState, TransitionMatrix, STATE_COUNT};
use crate::net::NodeId;

/// Transitions that show a completed forwarding duty.
pub const COOPERATIVE_TRANSITIONS: [(FsmState, FsmState); 4] = [
    (FsmState::RcvdRreq, FsmState::FwdRreq),
    (FsmState::RcvdRrep, FsmState::LmuComplete),
    (FsmState::FwdRreq, FsmState::LmuComplete),
    (FsmState::RcvdRreq, FsmState::LmuComplete),
];

/// Transitions that show a received packet that was never passed on.
pub const SELFISH_TRANSITIONS: [(FsmState, FsmState); 2] = [
    (FsmState::RcvdRreq, FsmState::TimeoutRreq),
    (FsmState::RcvdRrep, FsmState::TimeoutRrep),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub alpha: f64,
    pub beta: f64,
    pub states: usize,
    pub min_row_total: u64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            alpha: 0.1,
            beta: 0.4,
            states: STATE_COUNT,
            min_row_total: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Cooperative,
    Selfish,
    Unascertained,
}

/// Mean count over the cooperative transitions minus the mean count over the
/// selfish ones.
pub fn cooperation_score(t: &TransitionMatrix) -> f64 {
    let good: u64 = COOPERATIVE_TRANSITIONS
        .iter()
        .map(|&(i, j)| t.get(i, j))
        .sum();
    let bad: u64 = SELFISH_TRANSITIONS.iter().map(|&(i, j)| t.get(i, j)).sum();
    good as f64 / COOPERATIVE_TRANSITIONS.len() as f64
        - bad as f64 / SELFISH_TRANSITIONS.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub verdicts: BTreeMap<NodeId, Verdict>,
    pub scores: BTreeMap<NodeId, f64>,
    pub p_sequence: Vec<(usize, f64)>,
    pub chosen_k: Option<usize>,
}

impl ClassificationResult {
    pub fn verdict(&self, node: NodeId) -> Option<Verdict> {
        self.verdicts.get(&node).copied()
    }
}

/// ANOVA-gated cut selection over the dendrogram.
///
/// For `k = 2, 3, ...` the `k`-cluster cut is scored; the first `P_k < beta`
/// marks the lowest-mean cluster selfish, a `P_k` rising above the previous
/// one (with `P_1 = 1`) clears everyone, and running out of cuts leaves every
/// node unascertained.
pub fn classify(
    dendrogram: &Dendrogram,
    nodes: &[NodeId],
    matrices: &[TransitionMatrix],
    params: &DetectorParams,
) -> ClassificationResult {
    assert_eq!(nodes.len(), matrices.len());
    assert_eq!(dendrogram.leaves, nodes.len());
    let scores: Vec<f64> = matrices.iter().map(cooperation_score).collect();
    let all = |v: Verdict| nodes.iter().map(|n| (*n, v)).collect::<BTreeMap<_, _>>();
    let mut p_sequence = Vec::new();
    let mut previous = 1.0;
    let mut outcome = None;

    for k in 2..=nodes.len() {
        let partition = dendrogram.cut(k);
        let groups: Vec<Vec<f64>> = partition
            .iter()
            .map(|c| c.iter().map(|&i| scores[i]).collect())
            .collect();
        let Ok(p) = anova_p(&groups) else { continue };
        p_sequence.push((k, p));
        if p < params.beta {
            let mean = |g: &Vec<f64>| g.iter().sum::<f64>() / g.len() as f64;
            let (worst, _) =
                groups
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |(bi, bm), (i, g)| {
                        let m = mean(g);
                        if m < bm {
                            (i, m)
                        } else {
                            (bi, bm)
                        }
                    });
            let mut verdicts = all(Verdict::Cooperative);
            for &i in &partition[worst] {
                verdicts.insert(nodes[i], Verdict::Selfish);
            }
            outcome = Some((verdicts, Some(k)));
            break;
        }
        if p > previous {
            outcome = Some((all(Verdict::Cooperative), None));
            break;
        }
        previous = p;
    }

    let (verdicts, chosen_k) = outcome.unwrap_or_else(|| (all(Verdict::Unascertained), None));
    ClassificationResult {
        verdicts,
        scores: nodes.iter().copied().zip(scores).collect(),
        p_sequence,
        chosen_k,
    }
}

/// Everything one monitor computes at a detection tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub nodes: Vec<NodeId>,
    pub similarity: SimilarityMatrix,
    pub dissimilarity: DissimilarityMatrix,
    pub dendrogram: Dendrogram,
    pub classification: ClassificationResult,
}

/// Runs the full statistical pipeline over one monitor's neighbors.
pub fn detect(
    nodes: &[NodeId],
    matrices: &[TransitionMatrix],
    params: &DetectorParams,
) -> Result<DetectionReport> {
    let test = PearsonTest::new(params.alpha, params.states, params.min_row_total)?;
    Ok(detect_with(nodes, matrices, params, &test))
}

pub fn detect_with(
    nodes: &[NodeId],
    matrices: &[TransitionMatrix],
    params: &DetectorParams,
    test: &PearsonTest,
) -> DetectionReport {
    let similarity = SimilarityMatrix::from_matrices(matrices, test);
    let dissimilarity = DissimilarityMatrix::from_similarity(&similarity);
    let dendrogram = single_linkage(&dissimilarity);
    let classification = classify(&dendrogram, nodes, matrices, params);
    DetectionReport {
        nodes: nodes.to_vec(),
        similarity,
        dissimilarity,
        dendrogram,
        classification,
    }
}
