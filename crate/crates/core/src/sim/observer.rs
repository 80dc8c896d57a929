//! Monitor side of a run: everything downstream of the radio.
//!
//! The live engine and trace replay both drive an [`Observatory`] with the same
//! sequence of `advance_to` / `observe_transmission` calls, which is what makes
//! replayed metrics identical to the original ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aodv::ControlPacket;
use crate::crosscheck::{fuse, EvidenceCounts, EvidenceLedger, EvidenceTotals, FusionPolicy};
use crate::detect::{detect_with, DetectionReport, DetectorParams, PearsonTest, Verdict};
use crate::error::{Error, Result};
use crate::monitor::{Monitor, MonitorParams};
use crate::net::{NodeId, ScenarioConfig, Topology};
use crate::time::SimTime;

/// Rates for one fusion mode at one detection tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRates {
    /// `None` when the run has no selfish nodes.
    pub detection_rate: Option<f64>,
    /// `None` when every node is selfish.
    pub false_positive_rate: Option<f64>,
    pub flagged: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub window_end: SimTime,
    /// Network-level verdicts in the configured mode.
    pub verdicts: BTreeMap<NodeId, Verdict>,
    pub detection_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
    /// Statistical detector alone.
    pub statistical: ModeRates,
    /// Statistical detector fused with header cross-checks.
    pub fused: ModeRates,
}

/// What one monitor concluded at one detection tick.
#[derive(Debug, Clone)]
pub struct MonitorReport {
    pub monitor: NodeId,
    pub report: DetectionReport,
    pub evidence: BTreeMap<NodeId, EvidenceCounts>,
    pub statistical: BTreeMap<NodeId, Verdict>,
    pub fused: BTreeMap<NodeId, Verdict>,
}

#[derive(Debug, Clone)]
pub struct TickDetail {
    pub window_end: SimTime,
    pub monitors: Vec<MonitorReport>,
}

/// Majority over per-monitor verdicts for one node.
///
/// Unascertained votes abstain, a tie goes to Cooperative and an all-abstain
/// vote stays Unascertained.
pub fn node_verdict_majority(node: NodeId, votes: &[Verdict]) -> Result<Verdict> {
    if votes.is_empty() {
        return Err(Error::NoMonitors(node));
    }
    let selfish = votes.iter().filter(|v| **v == Verdict::Selfish).count();
    let cooperative = votes.iter().filter(|v| **v == Verdict::Cooperative).count();
    Ok(if selfish + cooperative == 0 {
        Verdict::Unascertained
    } else if selfish > cooperative {
        Verdict::Selfish
    } else {
        Verdict::Cooperative
    })
}

pub fn rates(verdicts: &BTreeMap<NodeId, Verdict>, selfish: &[bool]) -> ModeRates {
    let flagged: Vec<NodeId> = verdicts
        .iter()
        .filter(|(_, v)| **v == Verdict::Selfish)
        .map(|(n, _)| *n)
        .collect();
    let bad = selfish.iter().filter(|s| **s).count();
    let good = selfish.len() - bad;
    let caught = flagged.iter().filter(|n| selfish[n.index()]).count();
    let accused = flagged.len() - caught;
    ModeRates {
        detection_rate: (bad > 0).then(|| caught as f64 / bad as f64),
        false_positive_rate: (good > 0).then(|| accused as f64 / good as f64),
        flagged,
    }
}

#[derive(Debug, Clone)]
pub struct ObservationOutcome {
    pub records: Vec<MetricsRecord>,
    pub details: Vec<TickDetail>,
    /// Whole-run cross-check tallies per monitored node, summed over monitors.
    pub evidence: BTreeMap<NodeId, EvidenceTotals>,
}

pub struct Observatory {
    topo: Topology,
    monitors: Vec<Monitor>,
    ledgers: Vec<EvidenceLedger>,
    selfish: Vec<bool>,
    detector: DetectorParams,
    test: PearsonTest,
    fusion: FusionPolicy,
    crosscheck_enabled: bool,
    window: SimTime,
    detection_start: SimTime,
    end: SimTime,
    next_tick: SimTime,
    keep_details: bool,
    records: Vec<MetricsRecord>,
    details: Vec<TickDetail>,
}

impl Observatory {
    pub fn new(
        topo: Topology,
        selfish: Vec<bool>,
        config: &ScenarioConfig,
        keep_details: bool,
    ) -> Result<Self> {
        if selfish.len() != topo.node_count() {
            return Err(Error::ConfigInvalid(
                "ground truth does not match node count".into(),
            ));
        }
        if let Some(lonely) = topo.nodes().find(|n| topo.neighbor_slice(*n).is_empty()) {
            return Err(Error::NoMonitors(lonely));
        }
        let params = MonitorParams {
            rreq_timeout: SimTime::from_secs_f64(config.rreq_timeout),
            rrep_timeout: SimTime::from_secs_f64(config.rrep_timeout),
            windows_per_detection: config.windows_per_detection(),
        };
        let monitors = topo
            .nodes()
            .map(|n| {
                let mut m = Monitor::for_topology(&topo, n, params);
                m.set_transition_log(false);
                m
            })
            .collect();
        let ledgers = topo
            .nodes()
            .map(|n| {
                EvidenceLedger::new(
                    topo.neighbor_slice(n).to_vec(),
                    params.rreq_timeout,
                    params.rrep_timeout,
                    params.windows_per_detection,
                )
            })
            .collect();
        let detector = DetectorParams {
            alpha: config.alpha,
            beta: config.beta,
            min_row_total: config.min_row_total,
            ..DetectorParams::default()
        };
        let test = PearsonTest::new(detector.alpha, detector.states, detector.min_row_total)?;
        Ok(Observatory {
            topo,
            monitors,
            ledgers,
            selfish,
            detector,
            test,
            fusion: FusionPolicy {
                hard_ratio: config.fusion_hard_ratio,
                min_obligations: config.fusion_min_obligations,
                confirm_min: config.fusion_confirm_min,
            },
            crosscheck_enabled: config.crosscheck_enabled,
            window: config.window(),
            detection_start: config.detection_window(),
            end: config.duration(),
            next_tick: config.window(),
            keep_details,
            records: Vec::new(),
            details: Vec::new(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn monitor(&self, node: NodeId) -> Option<&Monitor> {
        self.monitors.get(node.index())
    }

    pub fn ledger(&self, node: NodeId) -> Option<&EvidenceLedger> {
        self.ledgers.get(node.index())
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    /// Brings timers and window ticks up to `t`: ticks at or before `t` fire
    /// (each after the deadlines strictly before it), then deadlines `<= t`.
    pub fn advance_to(&mut self, t: SimTime) {
        while self.next_tick < self.end && self.next_tick <= t {
            let tick = self.next_tick;
            self.expire(tick, false);
            self.window_tick(tick);
            self.next_tick = tick + self.window;
        }
        self.expire(t, true);
    }

    /// Feeds one transmission to the transmitter's own monitor and to every
    /// neighbor that received it.
    pub fn observe_transmission(
        &mut self,
        t: SimTime,
        packet: &ControlPacket,
        lost: &[NodeId],
    ) -> Result<()> {
        let sender = packet.sender();
        if !self.topo.contains(sender) {
            return Err(Error::UnknownNode(sender));
        }
        self.advance_to(t);
        let observers = std::iter::once(sender).chain(
            self.topo
                .neighbor_slice(sender)
                .iter()
                .copied()
                .filter(|n| !lost.contains(n)),
        );
        let observers: Vec<NodeId> = observers.collect();
        for m in observers {
            self.monitors[m.index()].observe(&self.topo, packet, t);
            self.ledgers[m.index()].observe(&self.topo, packet, t);
        }
        Ok(())
    }

    fn expire(&mut self, until: SimTime, inclusive: bool) {
        for (m, l) in self.monitors.iter_mut().zip(self.ledgers.iter_mut()) {
            m.expire(until, inclusive);
            l.expire(until, inclusive);
        }
    }

    fn window_tick(&mut self, tick: SimTime) {
        let detecting = tick >= self.detection_start;
        let mut reports = Vec::new();
        for i in 0..self.monitors.len() {
            let (matrices, ready) = self.monitors[i].window_rollover(tick);
            let evidence = self.ledgers[i].rollover(tick);
            if !(detecting && ready) {
                continue;
            }
            let neighbors = self.monitors[i].neighbors().to_vec();
            let report = detect_with(&neighbors, &matrices, &self.detector, &self.test);
            let evidence: BTreeMap<NodeId, EvidenceCounts> =
                neighbors.iter().copied().zip(evidence).collect();
            let statistical = report.classification.verdicts.clone();
            let fused = fuse(&report.classification, &evidence, &self.fusion, true);
            reports.push(MonitorReport {
                monitor: self.monitors[i].id(),
                report,
                evidence,
                statistical,
                fused,
            });
        }
        if reports.is_empty() {
            return;
        }
        let network = |pick: fn(&MonitorReport) -> &BTreeMap<NodeId, Verdict>| {
            let mut votes: BTreeMap<NodeId, Vec<Verdict>> = BTreeMap::new();
            for r in &reports {
                for (n, v) in pick(r) {
                    votes.entry(*n).or_default().push(*v);
                }
            }
            self.topo
                .nodes()
                .map(|n| {
                    let v = votes.get(&n).map_or(Verdict::Unascertained, |vs| {
                        node_verdict_majority(n, vs).unwrap_or(Verdict::Unascertained)
                    });
                    (n, v)
                })
                .collect::<BTreeMap<_, _>>()
        };
        let stat_verdicts = network(|r| &r.statistical);
        let fused_verdicts = network(|r| &r.fused);
        let statistical = rates(&stat_verdicts, &self.selfish);
        let fused = rates(&fused_verdicts, &self.selfish);
        let (verdicts, chosen) = if self.crosscheck_enabled {
            (fused_verdicts, &fused)
        } else {
            (stat_verdicts, &statistical)
        };
        self.records.push(MetricsRecord {
            window_end: tick,
            detection_rate: chosen.detection_rate,
            false_positive_rate: chosen.false_positive_rate,
            verdicts,
            statistical,
            fused,
        });
        if self.keep_details {
            self.details.push(TickDetail {
                window_end: tick,
                monitors: reports,
            });
        }
    }

    /// Runs the pipeline to the end of the simulation and hands back results.
    pub fn finish(mut self) -> ObservationOutcome {
        let end = self.end;
        self.advance_to(end);
        let mut evidence: BTreeMap<NodeId, EvidenceTotals> =
            self.topo.nodes().map(|n| (n, Default::default())).collect();
        for l in &self.ledgers {
            for &n in l.neighbors() {
                if let Some(t) = l.totals(n) {
                    evidence.entry(n).or_default().accumulate(&t);
                }
            }
        }
        ObservationOutcome {
            records: self.records,
            details: self.details,
            evidence,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn majority_rules() {
        use Verdict::*;
        assert_eq!(
            node_verdict_majority(NodeId(0), &[Selfish, Selfish, Cooperative]).unwrap(),
            Selfish
        );
        assert_eq!(
            node_verdict_majority(NodeId(0), &[Selfish, Cooperative]).unwrap(),
            Cooperative
        );
        assert_eq!(
            node_verdict_majority(NodeId(0), &[Unascertained, Selfish]).unwrap(),
            Selfish
        );
        assert_eq!(
            node_verdict_majority(NodeId(0), &[Unascertained, Unascertained]).unwrap(),
            Unascertained
        );
        assert!(node_verdict_majority(NodeId(0), &[]).is_err());
    }

    #[test]
    fn rates_count_flags_against_truth() {
        let verdicts: BTreeMap<_, _> = [
            (NodeId(0), Verdict::Selfish),
            (NodeId(1), Verdict::Cooperative),
            (NodeId(2), Verdict::Selfish),
            (NodeId(3), Verdict::Unascertained),
        ]
        .into_iter()
        .collect();
        let r = rates(&verdicts, &[true, true, false, false]);
        assert_eq!(r.detection_rate, Some(0.5));
        assert_eq!(r.false_positive_rate, Some(0.5));
        let none = rates(&verdicts, &[false; 4]);
        assert_eq!(none.detection_rate, None);
    }
}
