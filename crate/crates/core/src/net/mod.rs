//! Static mesh topology and scenario configuration.

mod config;
mod rng;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use config::{ScenarioConfig, Strategy};
pub use rng::{substream, Substream};

use crate::error::{Error, Result};

/// Resampling budget for [`build_topology`].
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unit-disk graph over fixed node positions.
///
/// Two distinct nodes are adjacent iff their Euclidean distance is at most
/// `radio_range`, so the relation is symmetric and irreflexive by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    radio_range: f64,
    adjacency: Vec<Vec<NodeId>>,
    matrix: Vec<bool>,
}

impl Topology {
    /// Builds the disk graph without checking connectivity.
    pub fn from_positions(positions: Vec<(f64, f64)>, radio_range: f64) -> Self {
        let n = positions.len();
        let mut matrix = vec![false; n * n];
        let mut adjacency = vec![Vec::new(); n];
        let r2 = radio_range * radio_range;
        for a in 0..n {
            for b in (a + 1)..n {
                let dx = positions[a].0 - positions[b].0;
                let dy = positions[a].1 - positions[b].1;
                if dx * dx + dy * dy <= r2 {
                    matrix[a * n + b] = true;
                    matrix[b * n + a] = true;
                    adjacency[a].push(NodeId::from(b));
                    adjacency[b].push(NodeId::from(a));
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Topology {
            positions,
            radio_range,
            adjacency,
            matrix,
        }
    }

    /// Like [`Topology::from_positions`] but rejects a disconnected layout.
    pub fn connected_from_positions(positions: Vec<(f64, f64)>, radio_range: f64) -> Result<Self> {
        let topo = Self::from_positions(positions, radio_range);
        if topo.is_connected() {
            Ok(topo)
        } else {
            Err(Error::ConnectivityUnreachable { attempts: 1 })
        }
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId::from)
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn radio_range(&self) -> f64 {
        self.radio_range
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.node_count()
    }

    /// Sorted neighbor list; panics on an out-of-range id.
    pub fn neighbor_slice(&self, node: NodeId) -> &[NodeId] {
        &self.adjacency[node.index()]
    }

    pub fn neighbors(&self, node: NodeId) -> Result<BTreeSet<NodeId>> {
        if !self.contains(node) {
            return Err(Error::UnknownNode(node));
        }
        Ok(self.adjacency[node.index()].iter().copied().collect())
    }

    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        let n = self.node_count();
        a.index() < n && b.index() < n && self.matrix[a.index() * n + b.index()]
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for v in &self.adjacency[u] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    reached += 1;
                    queue.push_back(v.index());
                }
            }
        }
        reached == n
    }
}

/// Places `node_count` nodes uniformly in the configured area, resampling the
/// whole layout until the disk graph is connected.
pub fn build_topology<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Topology> {
    if config.node_count < 4 {
        return Err(Error::ConfigInvalid(format!(
            "node_count must be at least 4, got {}",
            config.node_count
        )));
    }
    if config.radio_range.is_nan() || config.radio_range <= 0.0 {
        return Err(Error::ConfigInvalid("radio_range must be positive".into()));
    }
    let (width, height) = config.area;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let positions: Vec<(f64, f64)> = (0..config.node_count)
            .map(|_| (rng.random::<f64>() * width, rng.random::<f64>() * height))
            .collect();
        let topo = Topology::from_positions(positions, config.radio_range);
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(Error::ConnectivityUnreachable {
        attempts: MAX_PLACEMENT_ATTEMPTS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_neighbors(topo: &Topology, node: NodeId) -> BTreeSet<NodeId> {
        let (x, y) = topo.positions()[node.index()];
        topo.nodes()
            .filter(|&o| o != node)
            .filter(|o| {
                let (ox, oy) = topo.positions()[o.index()];
                ((ox - x).powi(2) + (oy - y).powi(2)).sqrt() <= topo.radio_range()
            })
            .collect()
    }

    #[test]
    fn square_corners_form_full_mesh() {
        let topo = Topology::from_positions(
            vec![(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)],
            15.0,
        );
        assert!(topo.is_connected());
        assert_eq!(
            topo.neighbors(NodeId(0)).unwrap(),
            [1, 2, 3].map(NodeId).into_iter().collect()
        );
        for a in topo.nodes() {
            for b in topo.nodes() {
                assert_eq!(topo.adjacent(a, b), a != b);
            }
        }
    }

    #[test]
    fn line_with_spacing_equal_to_range() {
        let topo = Topology::from_positions(vec![(0.0, 0.0), (5.0, 0.0), (10.0, 0.0)], 5.0);
        assert_eq!(
            topo.neighbors(NodeId(1)).unwrap(),
            [0, 2].map(NodeId).into_iter().collect()
        );
        assert!(!topo.adjacent(NodeId(0), NodeId(2)));
    }

    #[test]
    fn far_apart_pair_is_not_connected() {
        let err =
            Topology::connected_from_positions(vec![(0.0, 0.0), (1000.0, 0.0)], 250.0).unwrap_err();
        assert!(matches!(err, Error::ConnectivityUnreachable { .. }));
    }

    #[test]
    fn unknown_node_is_rejected() {
        let topo = Topology::from_positions(vec![(0.0, 0.0), (1.0, 0.0)], 5.0);
        assert!(matches!(
            topo.neighbors(NodeId(7)),
            Err(Error::UnknownNode(NodeId(7)))
        ));
    }

    #[test]
    fn default_scenario_is_connected_and_matches_brute_force() {
        let cfg = ScenarioConfig::default();
        let mut rng = substream(cfg.seed, Substream::Placement);
        let topo = build_topology(&cfg, &mut rng).unwrap();
        assert_eq!(topo.node_count(), 50);
        assert!(topo.is_connected());
        for node in topo.nodes() {
            let n = topo.neighbors(node).unwrap();
            assert!(!n.contains(&node));
            assert_eq!(n, brute_neighbors(&topo, node));
            for other in &n {
                assert!(topo.adjacent(*other, node));
            }
        }
    }

    #[test]
    fn placement_is_deterministic_per_seed() {
        let cfg = ScenarioConfig::default();
        let a = build_topology(&cfg, &mut substream(99, Substream::Placement)).unwrap();
        let b = build_topology(&cfg, &mut substream(99, Substream::Placement)).unwrap();
        let c = build_topology(&cfg, &mut substream(100, Substream::Placement)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn impossible_geometry_exhausts_retries() {
        let cfg = ScenarioConfig {
            node_count: 4,
            area: (10_000.0, 10_000.0),
            radio_range: 1.0,
            ..ScenarioConfig::default()
        };
        let err = build_topology(&cfg, &mut substream(1, Substream::Placement)).unwrap_err();
        assert!(matches!(
            err,
            Error::ConnectivityUnreachable {
                attempts: MAX_PLACEMENT_ATTEMPTS
            }
        ));
    }

    #[test]
    fn too_few_nodes_is_config_error() {
        let cfg = ScenarioConfig {
            node_count: 3,
            ..ScenarioConfig::default()
        };
        assert!(
            build_topology(&cfg, &mut substream(1, Substream::Placement))
                .unwrap_err()
                .is_config_error()
        );
    }
}
