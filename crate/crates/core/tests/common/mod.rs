//! Reference implementations and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use mesh_sentinel::detect::{DissimilarityMatrix, Row};
use mesh_sentinel::monitor::{Monitor, MonitorParams, ObservedTransition};
use mesh_sentinel::sim::TraceEvent;
use mesh_sentinel::time::SimTime;
use mesh_sentinel::{NodeId, ScenarioConfig, Topology};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

/// Homogeneity statistic of a 2 x c table by the cross-product identity
/// `sum_j (a_j R_s - b_j R_r)^2 / (R_r R_s C_j)`, with exact integer numerators.
pub fn reference_chi2(a: &Row, b: &Row) -> f64 {
    let rr: i128 = a.iter().map(|&x| x as i128).sum();
    let rs: i128 = b.iter().map(|&x| x as i128).sum();
    if rr == 0 || rs == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..a.len() {
        let c = a[j] as i128 + b[j] as i128;
        if c == 0 {
            continue;
        }
        let cross = a[j] as i128 * rs - b[j] as i128 * rr;
        total += (cross * cross) as f64 / (rr * rs * c) as f64;
    }
    total
}

/// Textbook one-way ANOVA with the reference F distribution.
pub fn reference_anova(groups: &[Vec<f64>]) -> f64 {
    let k = groups.len() as f64;
    let n: f64 = groups.iter().map(|g| g.len() as f64).sum();
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / n;
    let ss_total: f64 = all.iter().map(|x| (x - grand).powi(2)).sum();
    let ss_within: f64 = groups
        .iter()
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    let ss_between = ss_total - ss_within;
    let f = (ss_between / (k - 1.0)) / (ss_within / (n - k));
    FisherSnedecor::new(k - 1.0, n - k).unwrap().sf(f)
}

/// Naive agglomeration: every step rescans all member pairs of all cluster
/// pairs. Ties go to the pair whose smallest members are lexicographically
/// smallest. Returns the partition and merge height after each step.
pub fn naive_single_linkage(d: &DissimilarityMatrix) -> Vec<(Vec<Vec<usize>>, f64)> {
    let n = d.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut steps = vec![(clusters.clone(), 0.0)];
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let mut h = f64::INFINITY;
                for &a in &clusters[i] {
                    for &b in &clusters[j] {
                        h = h.min(d.get(a, b));
                    }
                }
                let mi = *clusters[i].iter().min().unwrap();
                let mj = *clusters[j].iter().min().unwrap();
                let key = (mi.min(mj), mi.max(mj));
                let take = match best {
                    None => true,
                    Some((bh, bkey, _, _)) => h < bh || (h == bh && key < bkey),
                };
                if take {
                    best = Some((h, key, i, j));
                }
            }
        }
        let (h, _, i, j) = best.unwrap();
        let moved = clusters.remove(j);
        clusters[i].extend(moved);
        let mut partition: Vec<Vec<usize>> = clusters
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.sort_unstable();
                c
            })
            .collect();
        partition.sort_by_key(|c| c[0]);
        steps.push((partition, h));
    }
    steps
}

/// Six-node discovery written out by hand.
///
/// Layout (range 10): S and Y sit above, X-N-Z-D along a line. N hears X, Y
/// and Z but neither S nor D. S floods for D; X, Y, N and Z rebroadcast; the
/// reply returns D-Z-N-X-S; Y never hears a reply and times out.
pub mod six_node {
    use super::*;

    pub const S: NodeId = NodeId(0);
    pub const X: NodeId = NodeId(1);
    pub const Y: NodeId = NodeId(2);
    pub const N: NodeId = NodeId(3);
    pub const Z: NodeId = NodeId(4);
    pub const D: NodeId = NodeId(5);

    pub const TRACE: &str = r#"{"t":0.000000,"kind":"header","version":1,"seed":0,"node_count":6,"strategy":"DropReq","drop_prob":1.0,"selfish":[],"sim_duration":10.000000}
{"t":1.000000,"kind":"tx","seq":0,"src":0,"dst":"bcast","type":"RREQ","src_id":0,"dest_id":5,"src_seq_num":1,"dest_seq_num":0,"bcast_id":1,"ttl":35,"next_to_source":null,"duplicate_flag":false}
{"t":1.002000,"kind":"tx","seq":1,"src":1,"dst":"bcast","type":"RREQ","src_id":0,"dest_id":5,"src_seq_num":1,"dest_seq_num":0,"bcast_id":1,"ttl":34,"next_to_source":0,"duplicate_flag":false}
{"t":1.003000,"kind":"tx","seq":2,"src":2,"dst":"bcast","type":"RREQ","src_id":0,"dest_id":5,"src_seq_num":1,"dest_seq_num":0,"bcast_id":1,"ttl":34,"next_to_source":0,"duplicate_flag":false}
{"t":1.004000,"kind":"tx","seq":3,"src":3,"dst":"bcast","type":"RREQ","src_id":0,"dest_id":5,"src_seq_num":1,"dest_seq_num":0,"bcast_id":1,"ttl":33,"next_to_source":1,"duplicate_flag":true}
{"t":1.006000,"kind":"tx","seq":4,"src":4,"dst":"bcast","type":"RREQ","src_id":0,"dest_id":5,"src_seq_num":1,"dest_seq_num":0,"bcast_id":1,"ttl":32,"next_to_source":3,"duplicate_flag":false}
{"t":1.008000,"kind":"tx","seq":5,"src":5,"dst":4,"type":"RREP","src_id":0,"dest_id":5,"dest_seq_num":1,"hop_count":0,"next_to_source":1,"duplicate_flag":false,"next_to_destination":3}
{"t":1.010000,"kind":"tx","seq":6,"src":4,"dst":3,"type":"RREP","src_id":0,"dest_id":5,"dest_seq_num":1,"hop_count":1,"next_to_source":1,"duplicate_flag":false,"next_to_destination":1}
{"t":1.012000,"kind":"tx","seq":7,"src":3,"dst":1,"type":"RREP","src_id":0,"dest_id":5,"dest_seq_num":1,"hop_count":2,"next_to_source":1,"duplicate_flag":false,"next_to_destination":0}
{"t":1.014000,"kind":"tx","seq":8,"src":1,"dst":0,"type":"RREP","src_id":0,"dest_id":5,"dest_seq_num":1,"hop_count":3,"next_to_source":1,"duplicate_flag":false,"next_to_destination":null}
{"t":10.000000,"kind":"end","tx_count":9}
"#;

    pub fn topology() -> Topology {
        let positions = vec![
            (-9.0, 9.0),
            (-8.0, 0.0),
            (0.0, 9.0),
            (0.0, 0.0),
            (8.0, 0.0),
            (16.0, 0.0),
        ];
        Topology::connected_from_positions(positions, 10.0).unwrap()
    }

    pub fn config() -> ScenarioConfig {
        ScenarioConfig {
            node_count: 6,
            radio_range: 10.0,
            sim_duration: 10.0,
            ..ScenarioConfig::default()
        }
    }

    pub fn transitions_seen_by_n(
        trace: &[TraceEvent],
        config: &ScenarioConfig,
    ) -> (Monitor, Vec<ObservedTransition>) {
        let topo = topology();
        let params = MonitorParams {
            rreq_timeout: SimTime::from_secs_f64(config.rreq_timeout),
            rrep_timeout: SimTime::from_secs_f64(config.rrep_timeout),
            windows_per_detection: config.windows_per_detection(),
        };
        let mut monitor = Monitor::for_topology(&topo, N, params);
        let mut seen = Vec::new();
        for event in trace {
            if let TraceEvent::Tx { t, packet, .. } = event {
                seen.extend(monitor.expire(*t, false));
                let tx = packet.sender();
                if tx == N || topo.adjacent(tx, N) {
                    seen.extend(monitor.observe(&topo, packet, *t));
                }
            }
        }
        seen.extend(monitor.expire(config.duration(), true));
        (monitor, seen)
    }

    /// Start state followed by every state entered, per monitored neighbor.
    pub fn walks(seen: &[ObservedTransition]) -> BTreeMap<NodeId, Vec<usize>> {
        let mut out: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        for tr in seen {
            let walk = out
                .entry(tr.monitored)
                .or_insert_with(|| vec![tr.from.number()]);
            assert_eq!(
                *walk.last().unwrap(),
                tr.from.number(),
                "discontinuous walk for {}",
                tr.monitored
            );
            walk.push(tr.to.number());
        }
        out
    }
}
