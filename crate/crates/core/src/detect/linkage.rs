//! Single-linkage agglomerative clustering.

use serde::{Deserialize, Serialize};

use super::similarity::DissimilarityMatrix;

/// One agglomeration step. Leaves are clusters `0..n`; the cluster created by
/// merge `i` gets id `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Partition into `k` clusters (clamped to `1..=leaves`), obtained by
    /// undoing the last `k - 1` merges. Members are sorted and clusters are
    /// ordered by their smallest member.
    pub fn cut(&self, k: usize) -> Vec<Vec<usize>> {
        let n = self.leaves;
        if n == 0 {
            return Vec::new();
        }
        let k = k.clamp(1, n);
        let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
        for m in &self.merges[..n - k] {
            let mut joined = members[m.left]
                .take()
                .expect("merge refers to live cluster");
            joined.extend(
                members[m.right]
                    .take()
                    .expect("merge refers to live cluster"),
            );
            joined.sort_unstable();
            members.push(Some(joined));
        }
        let mut clusters: Vec<Vec<usize>> = members.into_iter().flatten().collect();
        clusters.sort_by_key(|c| c[0]);
        clusters
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }
}

/// Standard single linkage with Lance-Williams `min` updates.
///
/// Among equally close cluster pairs the one whose smallest members form the
/// lexicographically smallest pair merges first.
pub fn single_linkage(dist: &DissimilarityMatrix) -> Dendrogram {
    let n = dist.len();
    // active[slot] = (cluster id, smallest member); slot distances in `d`.
    let mut active: Vec<Option<(usize, usize, usize)>> = (0..n).map(|i| Some((i, i, 1))).collect();
    let mut d: Vec<f64> = (0..n * n).map(|i| dist.get(i / n, i % n)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..n {
            let Some((_, min_a, _)) = active[a] else {
                continue;
            };
            for b in (a + 1)..n {
                let Some((_, min_b, _)) = active[b] else {
                    continue;
                };
                let h = d[a * n + b];
                let (lo, hi) = if min_a < min_b {
                    (min_a, min_b)
                } else {
                    (min_b, min_a)
                };
                let better = match best {
                    None => true,
                    Some((bh, blo, bhi, _, _)) => h < bh || (h == bh && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((h, lo, hi, a, b));
                }
            }
        }
        let (height, _, _, a, b) = best.expect("at least two active clusters");
        let (id_a, min_a, size_a) = active[a].unwrap();
        let (id_b, min_b, size_b) = active[b].unwrap();
        let (left, right) = if min_a < min_b {
            (id_a, id_b)
        } else {
            (id_b, id_a)
        };
        merges.push(Merge {
            left,
            right,
            height,
            size: size_a + size_b,
        });
        for c in 0..n {
            if c == a || c == b || active[c].is_none() {
                continue;
            }
            let v = d[a * n + c].min(d[b * n + c]);
            d[a * n + c] = v;
            d[c * n + a] = v;
        }
        active[a] = Some((n + step, min_a.min(min_b), size_a + size_b));
        active[b] = None;
    }
    Dendrogram { leaves: n, merges }
}
