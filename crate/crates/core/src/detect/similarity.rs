use serde::{Deserialize, Serialize};

use super::pearson::{PearsonOutcome, PearsonTest};
use crate::monitor::{FsmState, TransitionMatrix, STATE_COUNT};

/// Per-row rejection bits `B_i` and their sum `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionVector {
    pub bits: [bool; STATE_COUNT],
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub l: f64,
    pub rejections: RejectionVector,
}

/// `L = alpha^S`, where `S` counts the rows on which the homogeneity test rejects.
pub fn similarity_l(
    tr: &TransitionMatrix,
    ts: &TransitionMatrix,
    test: &PearsonTest,
) -> Similarity {
    let mut bits = [false; STATE_COUNT];
    for state in FsmState::ALL {
        let PearsonOutcome { reject, .. } = test.test(tr.row(state), ts.row(state));
        bits[state.index()] = reject;
    }
    let count = bits.iter().filter(|b| **b).count() as u32;
    Similarity {
        l: test.alpha.powi(count as i32),
        rejections: RejectionVector { bits, count },
    }
}

/// Symmetric grid of pairwise similarities with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    n: usize,
    l: Vec<f64>,
    rejections: Vec<u32>,
}

impl SimilarityMatrix {
    pub fn from_values(n: usize, l: Vec<f64>) -> Self {
        assert_eq!(l.len(), n * n);
        SimilarityMatrix {
            n,
            l,
            rejections: vec![0; n * n],
        }
    }

    pub fn from_matrices(matrices: &[TransitionMatrix], test: &PearsonTest) -> Self {
        let n = matrices.len();
        let mut l = vec![1.0; n * n];
        let mut rejections = vec![0; n * n];
        for r in 0..n {
            for s in (r + 1)..n {
                let sim = similarity_l(&matrices[r], &matrices[s], test);
                l[r * n + s] = sim.l;
                l[s * n + r] = sim.l;
                rejections[r * n + s] = sim.rejections.count;
                rejections[s * n + r] = sim.rejections.count;
            }
        }
        SimilarityMatrix { n, l, rejections }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.l[r * self.n + s]
    }

    pub fn rejections(&self, r: usize, s: usize) -> u32 {
        self.rejections[r * self.n + s]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.l.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityTerms {
    pub n_rs: f64,
    pub n_r_given_s: f64,
    pub n_s_given_r: f64,
    pub d: f64,
}

/// Robust dissimilarity between `r` and `s` built from how consistently they
/// relate to every third neighbor; `L_rs` itself is not used. With no third
/// neighbor it falls back to `1 - L_rs`.
pub fn dissimilarity_terms(sim: &SimilarityMatrix, r: usize, s: usize) -> DissimilarityTerms {
    if r == s {
        return DissimilarityTerms {
            n_rs: 0.0,
            n_r_given_s: 0.0,
            n_s_given_r: 0.0,
            d: 0.0,
        };
    }
    let mut n_rs = 0.0;
    let mut n_r = 0.0;
    let mut n_s = 0.0;
    let mut thirds = 0;
    for t in 0..sim.len() {
        if t == r || t == s {
            continue;
        }
        thirds += 1;
        let a = sim.get(r, t);
        let b = sim.get(s, t);
        n_rs += a.min(b);
        n_r += a;
        n_s += b;
    }
    let d = if thirds == 0 {
        1.0 - sim.get(r, s)
    } else {
        (1.0 - n_rs * n_rs / (n_r * n_s)).clamp(0.0, 1.0)
    };
    DissimilarityTerms {
        n_rs,
        n_r_given_s: n_r,
        n_s_given_r: n_s,
        d,
    }
}

pub fn dissimilarity(sim: &SimilarityMatrix, r: usize, s: usize) -> f64 {
    dissimilarity_terms(sim, r, s).d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DissimilarityMatrix {
    pub fn from_similarity(sim: &SimilarityMatrix) -> Self {
        let n = sim.len();
        let mut d = vec![0.0; n * n];
        for r in 0..n {
            for s in (r + 1)..n {
                let v = dissimilarity(sim, r, s);
                d[r * n + s] = v;
                d[s * n + r] = v;
            }
        }
        DissimilarityMatrix { n, d }
    }

    /// Takes an explicit symmetric, zero-diagonal grid (row-major).
    pub fn from_values(n: usize, d: Vec<f64>) -> Self {
        assert_eq!(d.len(), n * n);
        DissimilarityMatrix { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, r: usize, s: usize) -> f64 {
        self.d[r * self.n + s]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.d.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }
}
