//! Rule-based detection from the extended RREQ/RREP header fields.
//!
//! A monitor that overhears a fresh (`duplicate_flag = false`) RREQ reaching a
//! neighbor expects that neighbor to rebroadcast or answer within the RREQ
//! timeout; an RREP handed to a neighbor must be passed on, to
//! `next_to_destination` when the header names it, within the RREP timeout.
//! Missed deadlines are violations. [`fuse`] combines this evidence with the
//! statistical verdicts.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rustc_hash::FxHashMap as HashMap;
use serde::{Deserialize, Serialize};

use crate::aodv::ControlPacket;
use crate::detect::{ClassificationResult, Verdict};
use crate::monitor::LmuKey;
use crate::net::{NodeId, Topology};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObligationKind {
    RreqRebroadcast,
    RrepForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObligationStatus {
    Pending,
    Fulfilled,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardObligation {
    pub monitored: NodeId,
    pub lmu: LmuKey,
    pub kind: ObligationKind,
    pub expected_next: Option<NodeId>,
    pub deadline: SimTime,
    pub status: ObligationStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub at: SimTime,
    pub obligation: ForwardObligation,
}

/// Windowed evidence about one monitored neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvidenceCounts {
    pub obligations_total: u64,
    pub rreq_obligations: u64,
    pub rrep_obligations: u64,
    pub fulfilled: u64,
    pub violations_req: u64,
    pub violations_rep: u64,
}

impl EvidenceCounts {
    pub fn violations(&self) -> u64 {
        self.violations_req + self.violations_rep
    }

    pub fn violation_ratio(&self) -> Option<f64> {
        (self.obligations_total > 0)
            .then(|| self.violations() as f64 / self.obligations_total as f64)
    }

    fn accumulate(&mut self, o: &EvidenceCounts) {
        self.obligations_total += o.obligations_total;
        self.rreq_obligations += o.rreq_obligations;
        self.rrep_obligations += o.rrep_obligations;
        self.fulfilled += o.fulfilled;
        self.violations_req += o.violations_req;
        self.violations_rep += o.violations_rep;
    }
}

/// Whole-run tallies per obligation kind, kept alongside the windowed counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvidenceTotals {
    pub rreq_obligations: u64,
    pub rreq_fulfilled: u64,
    pub rreq_violated: u64,
    pub rrep_obligations: u64,
    pub rrep_fulfilled: u64,
    pub rrep_violated: u64,
}

impl EvidenceTotals {
    pub fn accumulate(&mut self, o: &EvidenceTotals) {
        self.rreq_obligations += o.rreq_obligations;
        self.rreq_fulfilled += o.rreq_fulfilled;
        self.rreq_violated += o.rreq_violated;
        self.rrep_obligations += o.rrep_obligations;
        self.rrep_fulfilled += o.rrep_fulfilled;
        self.rrep_violated += o.rrep_violated;
    }

    pub fn violations(&self) -> u64 {
        self.rreq_violated + self.rrep_violated
    }

    /// Violated share of resolved RREQ obligations.
    pub fn rreq_violation_ratio(&self) -> Option<f64> {
        let resolved = self.rreq_fulfilled + self.rreq_violated;
        (resolved > 0).then(|| self.rreq_violated as f64 / resolved as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionPolicy {
    pub hard_ratio: f64,
    pub min_obligations: u64,
    pub confirm_min: u64,
}

impl Default for FusionPolicy {
    fn default() -> Self {
        FusionPolicy {
            hard_ratio: 0.5,
            min_obligations: 5,
            confirm_min: 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    obligation: ForwardObligation,
    slot: usize,
    window_serial: u64,
}

/// Obligation tracking for one monitor node.
#[derive(Debug, Clone)]
pub struct EvidenceLedger {
    neighbors: Vec<NodeId>,
    slot_of: HashMap<NodeId, usize>,
    rreq_timeout: SimTime,
    rrep_timeout: SimTime,
    depth: usize,
    windows: Vec<Vec<EvidenceCounts>>,
    window_serial: u64,
    totals: Vec<EvidenceTotals>,
    entries: HashMap<u64, Entry>,
    pending: Vec<Vec<u64>>,
    deadlines: BinaryHeap<Reverse<(SimTime, u64)>>,
    next_id: u64,
    /// (slot, source, bcast_id) of floods a neighbor was heard acting on.
    acted: HashMap<(usize, NodeId, u32), SimTime>,
    current_flood: HashMap<(NodeId, NodeId), u32>,
    /// Last RREP each neighbor was heard sending per (source, dest). Replies
    /// carry no broadcast id, so they are matched to floods by time.
    replied: HashMap<(usize, NodeId, NodeId), SimTime>,
}

impl EvidenceLedger {
    pub fn new(
        neighbors: Vec<NodeId>,
        rreq_timeout: SimTime,
        rrep_timeout: SimTime,
        depth: usize,
    ) -> Self {
        assert!(depth > 0);
        let slot_of = neighbors.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let n = neighbors.len();
        EvidenceLedger {
            neighbors,
            slot_of,
            rreq_timeout,
            rrep_timeout,
            depth,
            windows: vec![vec![EvidenceCounts::default(); n]; depth],
            window_serial: 0,
            totals: vec![EvidenceTotals::default(); n],
            entries: HashMap::default(),
            pending: vec![Vec::new(); n],
            deadlines: BinaryHeap::new(),
            next_id: 0,
            acted: HashMap::default(),
            current_flood: HashMap::default(),
            replied: HashMap::default(),
        }
    }

    pub fn neighbors(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn totals(&self, neighbor: NodeId) -> Option<EvidenceTotals> {
        self.slot_of.get(&neighbor).map(|&s| self.totals[s])
    }

    pub fn pending_count(&self, neighbor: NodeId) -> usize {
        self.slot_of
            .get(&neighbor)
            .map_or(0, |&s| self.pending[s].len())
    }

    fn window_mut(&mut self, serial: u64) -> Option<&mut Vec<EvidenceCounts>> {
        if serial + self.depth as u64 <= self.window_serial {
            return None;
        }
        let idx = (serial % self.depth as u64) as usize;
        Some(&mut self.windows[idx])
    }

    fn register(&mut self, slot: usize, obligation: ForwardObligation) {
        let id = self.next_id;
        self.next_id += 1;
        let serial = self.window_serial;
        self.entries.insert(
            id,
            Entry {
                obligation,
                slot,
                window_serial: serial,
            },
        );
        self.pending[slot].push(id);
        self.deadlines.push(Reverse((obligation.deadline, id)));
        if let Some(w) = self.window_mut(serial) {
            let c = &mut w[slot];
            c.obligations_total += 1;
            match obligation.kind {
                ObligationKind::RreqRebroadcast => c.rreq_obligations += 1,
                ObligationKind::RrepForward => c.rrep_obligations += 1,
            }
        }
        let t = &mut self.totals[slot];
        match obligation.kind {
            ObligationKind::RreqRebroadcast => t.rreq_obligations += 1,
            ObligationKind::RrepForward => t.rrep_obligations += 1,
        }
    }

    fn resolve(
        &mut self,
        id: u64,
        status: ObligationStatus,
        at: SimTime,
        out: &mut Vec<StatusChange>,
    ) {
        let Some(mut entry) = self.entries.remove(&id) else {
            return;
        };
        entry.obligation.status = status;
        self.pending[entry.slot].retain(|p| *p != id);
        let slot = entry.slot;
        let kind = entry.obligation.kind;
        if let Some(w) = self.window_mut(entry.window_serial) {
            let c = &mut w[slot];
            match (status, kind) {
                (ObligationStatus::Fulfilled, _) => c.fulfilled += 1,
                (ObligationStatus::Violated, ObligationKind::RreqRebroadcast) => {
                    c.violations_req += 1
                }
                (ObligationStatus::Violated, ObligationKind::RrepForward) => c.violations_rep += 1,
                (ObligationStatus::Pending, _) => {}
            }
        }
        let t = &mut self.totals[slot];
        match (status, kind) {
            (ObligationStatus::Fulfilled, ObligationKind::RreqRebroadcast) => t.rreq_fulfilled += 1,
            (ObligationStatus::Fulfilled, ObligationKind::RrepForward) => t.rrep_fulfilled += 1,
            (ObligationStatus::Violated, ObligationKind::RreqRebroadcast) => t.rreq_violated += 1,
            (ObligationStatus::Violated, ObligationKind::RrepForward) => t.rrep_violated += 1,
            (ObligationStatus::Pending, _) => {}
        }
        out.push(StatusChange {
            at,
            obligation: entry.obligation,
        });
    }

    fn fulfill_matching(
        &mut self,
        slot: usize,
        now: SimTime,
        out: &mut Vec<StatusChange>,
        matches: impl Fn(&ForwardObligation) -> bool,
        first_only: bool,
    ) {
        let ids: Vec<u64> = self.pending[slot]
            .iter()
            .copied()
            .filter(|id| matches(&self.entries[id].obligation))
            .collect();
        for id in ids {
            self.resolve(id, ObligationStatus::Fulfilled, now, out);
            if first_only {
                break;
            }
        }
    }

    /// Feeds one transmission this monitor heard: first settles obligations the
    /// transmitter meets, then registers the obligations it creates.
    pub fn observe(
        &mut self,
        topo: &Topology,
        packet: &ControlPacket,
        now: SimTime,
    ) -> Vec<StatusChange> {
        let mut out = Vec::new();
        let transmitter = packet.sender();
        let tx_slot = self.slot_of.get(&transmitter).copied();
        match packet {
            ControlPacket::Rreq(p) => {
                self.current_flood.insert((p.src_id, p.dest_id), p.bcast_id);
                if let Some(slot) = tx_slot {
                    self.acted.insert((slot, p.src_id, p.bcast_id), now);
                    let key = (p.src_id, p.dest_id, Some(p.bcast_id));
                    self.fulfill_matching(
                        slot,
                        now,
                        &mut out,
                        |o| {
                            o.kind == ObligationKind::RreqRebroadcast
                                && (o.lmu.source, o.lmu.dest, o.lmu.bcast_id) == key
                        },
                        false,
                    );
                }
                if p.duplicate_flag || p.ttl < 1 {
                    return out;
                }
                let lmu = LmuKey {
                    source: p.src_id,
                    dest: p.dest_id,
                    bcast_id: Some(p.bcast_id),
                };
                for slot in 0..self.neighbors.len() {
                    let x = self.neighbors[slot];
                    if x == transmitter
                        || x == p.dest_id
                        || x == p.src_id
                        || !topo.adjacent(transmitter, x)
                    {
                        continue;
                    }
                    if self.acted.contains_key(&(slot, p.src_id, p.bcast_id)) {
                        continue;
                    }
                    let recent_reply = self
                        .replied
                        .get(&(slot, p.src_id, p.dest_id))
                        .is_some_and(|t| *t + self.rreq_timeout >= now);
                    if recent_reply {
                        continue;
                    }
                    let already = self.pending[slot].iter().any(|id| {
                        let o = &self.entries[id].obligation;
                        o.kind == ObligationKind::RreqRebroadcast && o.lmu == lmu
                    });
                    if already {
                        continue;
                    }
                    self.register(
                        slot,
                        ForwardObligation {
                            monitored: x,
                            lmu,
                            kind: ObligationKind::RreqRebroadcast,
                            expected_next: None,
                            deadline: now + self.rreq_timeout,
                            status: ObligationStatus::Pending,
                        },
                    );
                }
            }
            ControlPacket::Rrep(p) => {
                if let Some(slot) = tx_slot {
                    self.replied.insert((slot, p.src_id, p.dest_id), now);
                    let (src, dest, receiver) = (p.src_id, p.dest_id, p.receiver);
                    // replying is a valid way to discharge a rebroadcast duty
                    self.fulfill_matching(
                        slot,
                        now,
                        &mut out,
                        |o| {
                            o.kind == ObligationKind::RreqRebroadcast
                                && o.lmu.source == src
                                && o.lmu.dest == dest
                        },
                        false,
                    );
                    self.fulfill_matching(
                        slot,
                        now,
                        &mut out,
                        |o| {
                            o.kind == ObligationKind::RrepForward
                                && o.lmu.source == src
                                && o.lmu.dest == dest
                                && o.expected_next.is_none_or(|n| n == receiver)
                        },
                        true,
                    );
                }
                if p.receiver != transmitter && p.receiver != p.src_id {
                    if let Some(&slot) = self.slot_of.get(&p.receiver) {
                        let lmu = LmuKey {
                            source: p.src_id,
                            dest: p.dest_id,
                            bcast_id: self.current_flood.get(&(p.src_id, p.dest_id)).copied(),
                        };
                        self.register(
                            slot,
                            ForwardObligation {
                                monitored: p.receiver,
                                lmu,
                                kind: ObligationKind::RrepForward,
                                expected_next: p.next_to_destination,
                                deadline: now + self.rrep_timeout,
                                status: ObligationStatus::Pending,
                            },
                        );
                    }
                }
            }
        }
        out
    }

    /// Marks every pending obligation whose deadline is `< until` (or `<=`
    /// when `inclusive`) as violated.
    pub fn expire(&mut self, until: SimTime, inclusive: bool) -> Vec<StatusChange> {
        let mut out = Vec::new();
        while let Some(&Reverse((deadline, id))) = self.deadlines.peek() {
            let due = if inclusive {
                deadline <= until
            } else {
                deadline < until
            };
            if !due {
                break;
            }
            self.deadlines.pop();
            if self.entries.contains_key(&id) {
                self.resolve(id, ObligationStatus::Violated, deadline, &mut out);
            }
        }
        out
    }

    /// Per-neighbor sums over the retained windows, then evicts the oldest.
    pub fn rollover(&mut self, now: SimTime) -> Vec<EvidenceCounts> {
        let mut sums = vec![EvidenceCounts::default(); self.neighbors.len()];
        for w in &self.windows {
            for (s, c) in sums.iter_mut().zip(w.iter()) {
                s.accumulate(c);
            }
        }
        self.window_serial += 1;
        let idx = (self.window_serial % self.depth as u64) as usize;
        self.windows[idx] = vec![EvidenceCounts::default(); self.neighbors.len()];
        let horizon = self.rrep_timeout + self.rrep_timeout;
        self.acted.retain(|_, t| *t + horizon >= now);
        self.replied.retain(|_, t| *t + horizon >= now);
        sums
    }
}

/// Combines statistical verdicts with header cross-check evidence.
///
/// A node is selfish on hard evidence or when the statistics say selfish and
/// at least `confirm_min` violations back it. A statistical selfish verdict
/// with zero violations over at least `min_obligations` duties is overturned.
/// With cross-checking disabled the statistical verdicts pass through.
///
/// Hard evidence is judged per obligation kind: violations of one kind must
/// reach `hard_ratio` of `max(obligations of that kind, min_obligations)`.
/// Pooling the kinds would let a node that drops every RREP hide behind the
/// RREQs it forwards.
pub fn fuse(
    stat: &ClassificationResult,
    evidence: &BTreeMap<NodeId, EvidenceCounts>,
    policy: &FusionPolicy,
    enabled: bool,
) -> BTreeMap<NodeId, Verdict> {
    if !enabled {
        return stat.verdicts.clone();
    }
    stat.verdicts
        .iter()
        .map(|(&node, &verdict)| {
            let e = evidence.get(&node).copied().unwrap_or_default();
            (node, fuse_one(verdict, &e, policy))
        })
        .collect()
}

pub fn fuse_one(stat: Verdict, e: &EvidenceCounts, policy: &FusionPolicy) -> Verdict {
    let violations = e.violations();
    let hard_for = |v: u64, o: u64| {
        v > 0 && v as f64 >= policy.hard_ratio * o.max(policy.min_obligations) as f64
    };
    let hard = hard_for(e.violations_req, e.rreq_obligations)
        || hard_for(e.violations_rep, e.rrep_obligations);
    let confirmed = stat == Verdict::Selfish && violations >= policy.confirm_min;
    if hard || confirmed {
        Verdict::Selfish
    } else if stat == Verdict::Selfish
        && violations == 0
        && e.obligations_total >= policy.min_obligations
    {
        Verdict::Cooperative
    } else {
        stat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aodv::{RrepPacket, RreqPacket};

    fn counts(obligations: u64, violations: u64) -> EvidenceCounts {
        EvidenceCounts {
            obligations_total: obligations,
            rreq_obligations: obligations,
            rrep_obligations: 0,
            fulfilled: obligations - violations,
            violations_req: violations,
            violations_rep: 0,
        }
    }

    #[test]
    fn fusion_branches() {
        let p = FusionPolicy::default();
        assert_eq!(
            fuse_one(Verdict::Selfish, &counts(3, 3), &p),
            Verdict::Selfish
        );
        assert_eq!(
            fuse_one(Verdict::Cooperative, &counts(10, 9), &p),
            Verdict::Selfish
        );
        assert_eq!(
            fuse_one(Verdict::Selfish, &counts(20, 0), &p),
            Verdict::Cooperative
        );
        assert_eq!(
            fuse_one(Verdict::Selfish, &counts(3, 0), &p),
            Verdict::Selfish
        );
        assert_eq!(
            fuse_one(Verdict::Unascertained, &counts(2, 0), &p),
            Verdict::Unascertained
        );
        assert_eq!(
            fuse_one(Verdict::Cooperative, &counts(40, 2), &p),
            Verdict::Cooperative
        );
        // every reply dropped, every request forwarded
        let mixed = EvidenceCounts {
            obligations_total: 60,
            rreq_obligations: 50,
            rrep_obligations: 10,
            fulfilled: 50,
            violations_req: 0,
            violations_rep: 10,
        };
        assert_eq!(fuse_one(Verdict::Cooperative, &mixed, &p), Verdict::Selfish);
    }

    fn line() -> Topology {
        // 0 - 1 - 2 - 3, monitor 1 watches 0 and 2
        Topology::from_positions(
            vec![(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (30.0, 0.0)],
            10.0,
        )
    }

    fn rreq(sender: u32, dup: bool) -> ControlPacket {
        ControlPacket::Rreq(RreqPacket {
            src_id: NodeId(0),
            dest_id: NodeId(3),
            src_seq_num: 1,
            dest_seq_num: 0,
            bcast_id: 1,
            ttl: 10,
            sender: NodeId(sender),
            next_to_source: None,
            duplicate_flag: dup,
        })
    }

    fn ledger(topo: &Topology) -> EvidenceLedger {
        EvidenceLedger::new(
            topo.neighbor_slice(NodeId(1)).to_vec(),
            SimTime::from_micros(500_000),
            SimTime::from_micros(3_000_000),
            4,
        )
    }

    #[test]
    fn fresh_rreq_creates_obligation_fulfilled_by_rebroadcast() {
        let topo = line();
        let mut l = ledger(&topo);
        // monitor 1 rebroadcasts the source's RREQ; 2 now owes a rebroadcast
        l.observe(&topo, &rreq(0, false), SimTime::from_micros(1_000));
        l.observe(&topo, &rreq(1, false), SimTime::from_micros(3_000));
        assert_eq!(l.pending_count(NodeId(2)), 1);
        assert_eq!(l.pending_count(NodeId(0)), 0, "the source owes nothing");
        let changes = l.observe(&topo, &rreq(2, false), SimTime::from_micros(5_000));
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[0].obligation.status, ObligationStatus::Fulfilled);
        assert!(l.expire(SimTime::from_micros(10_000_000), true).is_empty());
    }

    #[test]
    fn duplicate_flagged_rreq_creates_nothing() {
        let topo = line();
        let mut l = ledger(&topo);
        l.observe(&topo, &rreq(1, true), SimTime::from_micros(3_000));
        assert_eq!(l.pending_count(NodeId(2)), 0);
    }

    #[test]
    fn silence_past_deadline_is_a_violation() {
        let topo = line();
        let mut l = ledger(&topo);
        l.observe(&topo, &rreq(1, false), SimTime::from_micros(3_000));
        assert!(l.expire(SimTime::from_micros(503_000), false).is_empty());
        let changes = l.expire(SimTime::from_micros(503_000), true);
        assert_eq!(changes[0].obligation.status, ObligationStatus::Violated);
        let sums = l.rollover(SimTime::from_micros(100_000_000));
        let slot = l.neighbors().iter().position(|n| *n == NodeId(2)).unwrap();
        assert_eq!(sums[slot].violations_req, 1);
        assert_eq!(sums[slot].obligations_total, 1);
        assert_eq!(
            l.totals(NodeId(2)).unwrap().rreq_violation_ratio(),
            Some(1.0)
        );
    }

    #[test]
    fn rrep_obligation_expects_named_next_hop() {
        let topo = line();
        let mut l = ledger(&topo);
        let to_two = ControlPacket::Rrep(RrepPacket {
            src_id: NodeId(0),
            dest_id: NodeId(3),
            dest_seq_num: 1,
            hop_count: 0,
            sender: NodeId(3),
            receiver: NodeId(2),
            next_to_source: None,
            duplicate_flag: false,
            next_to_destination: Some(NodeId(1)),
        });
        // monitor 1 cannot hear 3, but it is told about the delivery in this test
        l.observe(&topo, &to_two, SimTime::from_micros(1_000));
        assert_eq!(l.pending_count(NodeId(2)), 1);
        let ControlPacket::Rrep(mut fwd) = to_two.clone() else {
            unreachable!()
        };
        fwd.sender = NodeId(2);
        fwd.receiver = NodeId(1);
        fwd.next_to_destination = Some(NodeId(0));
        let changes = l.observe(
            &topo,
            &ControlPacket::Rrep(fwd),
            SimTime::from_micros(3_000),
        );
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[0].obligation.kind, ObligationKind::RrepForward);
        assert_eq!(changes[0].obligation.status, ObligationStatus::Fulfilled);
    }
}
