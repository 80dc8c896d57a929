use std::collections::BTreeMap;
use std::path::Path;

use super::engine::{offered_packets, plant_selfish, RunMetrics};
use super::observer::{ObservationOutcome, Observatory, TickDetail};
use super::trace::{read_trace, TraceEvent, TraceHeader};
use crate::aodv::ControlPacket;
use crate::error::{Error, Result};
use crate::net::{build_topology, substream, NodeId, ScenarioConfig, Substream, Topology};

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub metrics: RunMetrics,
    pub details: Vec<TickDetail>,
    pub topology: Topology,
}

fn header(trace: &[TraceEvent]) -> Result<&TraceHeader> {
    match trace.first() {
        Some(TraceEvent::Header(h)) => Ok(h),
        _ => Err(Error::TraceCorrupt(
            "trace does not start with a header".into(),
        )),
    }
}

/// Rebuilds the topology the trace was recorded on (placement depends only on
/// the seed and the geometry settings) and replays onto it.
///
/// The header's seed wins over `config.seed`; the planted selfish set is
/// re-derived and must agree with the header.
pub fn replay(trace: &[TraceEvent], config: &ScenarioConfig) -> Result<ReplayOutput> {
    let h = header(trace)?;
    let config = ScenarioConfig {
        seed: h.seed,
        ..config.clone()
    };
    config.validate()?;
    if h.node_count != config.node_count {
        return Err(Error::ConfigInvalid(format!(
            "trace has {} nodes, configuration {}",
            h.node_count, config.node_count
        )));
    }
    let topo = build_topology(&config, &mut substream(config.seed, Substream::Placement))?;
    let planted = plant_selfish(&config, &mut substream(config.seed, Substream::Behavior));
    let planted: Vec<NodeId> = topo.nodes().filter(|n| planted[n.index()]).collect();
    if planted != h.selfish {
        return Err(Error::TraceCorrupt(
            "selfish set in header does not match the configuration".into(),
        ));
    }
    replay_on(topo, trace, &config, false)
}

pub fn replay_file(path: &Path, config: &ScenarioConfig) -> Result<ReplayOutput> {
    let file = std::fs::File::open(path)?;
    let trace = read_trace(std::io::BufReader::new(file))?;
    replay(&trace, config)
}

/// Replays recorded transmissions through the monitor and detection pipeline
/// on an explicit topology. Ground truth comes from the header.
pub fn replay_on(
    topo: Topology,
    trace: &[TraceEvent],
    config: &ScenarioConfig,
    keep_details: bool,
) -> Result<ReplayOutput> {
    let h = header(trace)?;
    if h.node_count != topo.node_count() {
        return Err(Error::TraceCorrupt(format!(
            "header names {} nodes, topology has {}",
            h.node_count,
            topo.node_count()
        )));
    }
    let end = config.duration();
    if h.sim_duration != end {
        return Err(Error::ConfigInvalid(format!(
            "trace covers {} s, configuration {} s",
            h.sim_duration, end
        )));
    }
    let mut selfish = vec![false; topo.node_count()];
    for n in &h.selfish {
        if !topo.contains(*n) {
            return Err(Error::TraceCorrupt(format!(
                "selfish node {n} out of range"
            )));
        }
        selfish[n.index()] = true;
    }
    let mut obs = Observatory::new(topo.clone(), selfish, config, keep_details)?;

    let mut sessions = 0;
    let mut offered = 0;
    let mut drops = BTreeMap::new();
    let mut expected_seq = 0u64;
    let mut last_t = crate::time::SimTime::ZERO;
    let mut ended = None;
    let mut i = 1;
    while i < trace.len() {
        let event = &trace[i];
        i += 1;
        let t = event.time();
        if t < last_t {
            return Err(Error::TraceCorrupt(format!(
                "time goes backwards at record {i}"
            )));
        }
        last_t = t;
        match event {
            TraceEvent::Header(_) => return Err(Error::TraceCorrupt("repeated header".into())),
            TraceEvent::Session { t, until, .. } => {
                sessions += 1;
                offered += offered_packets(*t, *until, end, config.cbr_rate);
            }
            TraceEvent::Drop { reason, .. } => *drops.entry(*reason).or_insert(0) += 1,
            TraceEvent::Loss { seq, .. } => {
                return Err(Error::TraceCorrupt(format!(
                    "loss record for tx {seq} out of place"
                )));
            }
            TraceEvent::Tx { t, seq, packet } => {
                if *seq != expected_seq {
                    return Err(Error::TraceCorrupt(format!(
                        "tx seq {seq}, expected {expected_seq}"
                    )));
                }
                expected_seq += 1;
                check_packet(&topo, packet)?;
                let mut lost = Vec::new();
                while let Some(TraceEvent::Loss { seq: s, node, .. }) = trace.get(i) {
                    if s != seq {
                        return Err(Error::TraceCorrupt(format!(
                            "loss record for tx {s} after tx {seq}"
                        )));
                    }
                    lost.push(*node);
                    i += 1;
                }
                obs.observe_transmission(*t, packet, &lost)?;
            }
            TraceEvent::End { tx_count, .. } => {
                if *tx_count != expected_seq {
                    return Err(Error::TraceCorrupt(format!(
                        "end record counts {tx_count} transmissions, trace holds {expected_seq}"
                    )));
                }
                ended = Some(*tx_count);
            }
        }
    }
    let Some(tx_count) = ended else {
        return Err(Error::TraceCorrupt("missing end record".into()));
    };
    let ObservationOutcome {
        records,
        details,
        evidence,
    } = obs.finish();
    Ok(ReplayOutput {
        metrics: RunMetrics {
            seed: h.seed,
            crosscheck_enabled: config.crosscheck_enabled,
            strategy: h.strategy,
            drop_prob: h.drop_prob,
            selfish: h.selfish.clone(),
            sessions,
            offered_data_packets: offered,
            tx_count,
            drops,
            records,
            evidence,
        },
        details,
        topology: topo,
    })
}

fn check_packet(topo: &Topology, packet: &ControlPacket) -> Result<()> {
    let sender = packet.sender();
    if !topo.contains(sender) {
        return Err(Error::TraceCorrupt(format!(
            "transmitter {sender} out of range"
        )));
    }
    if let ControlPacket::Rrep(p) = packet {
        if !topo.adjacent(sender, p.receiver) {
            return Err(Error::TraceCorrupt(format!(
                "RREP from {sender} to non-neighbor {}",
                p.receiver
            )));
        }
    }
    Ok(())
}
