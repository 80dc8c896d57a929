//! Promiscuous per-node observation of neighbor behavior.
//!
//! Every node runs one [`Monitor`] over its neighbors. Each observed control
//! transmission drives a small finite state machine per (neighbor, local
//! message unit); the resulting transitions are counted into 8x8 matrices
//! kept in a ring of per-window slots.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use rustc_hash::FxHashMap as HashMap;
use serde::{Deserialize, Serialize};

use crate::aodv::ControlPacket;
use crate::error::{Error, Result};
use crate::net::{NodeId, Topology};
use crate::time::SimTime;

pub const STATE_COUNT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum FsmState {
    Init = 1,
    UnexpRrep = 2,
    RcvdRreq = 3,
    FwdRreq = 4,
    TimeoutRreq = 5,
    RcvdRrep = 6,
    LmuComplete = 7,
    TimeoutRrep = 8,
}

impl FsmState {
    pub const ALL: [FsmState; STATE_COUNT] = [
        FsmState::Init,
        FsmState::UnexpRrep,
        FsmState::RcvdRreq,
        FsmState::FwdRreq,
        FsmState::TimeoutRreq,
        FsmState::RcvdRrep,
        FsmState::LmuComplete,
        FsmState::TimeoutRrep,
    ];

    /// State number as printed in the state table (1-based).
    pub fn number(self) -> usize {
        self as usize
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_number(n: usize) -> Option<FsmState> {
        Self::ALL.get(n.checked_sub(1)?).copied()
    }

    pub fn is_final(self) -> bool {
        matches!(
            self,
            FsmState::TimeoutRreq | FsmState::LmuComplete | FsmState::TimeoutRrep
        )
    }

    /// Edges of the monitored-node state machine.
    pub fn is_valid_transition(from: FsmState, to: FsmState) -> bool {
        use FsmState::*;
        matches!(
            (from, to),
            (Init, RcvdRreq)
                | (Init, FwdRreq)
                | (Init, UnexpRrep)
                | (RcvdRreq, FwdRreq)
                | (RcvdRreq, RcvdRreq)
                | (FwdRreq, FwdRreq)
                | (RcvdRreq, TimeoutRreq)
                | (FwdRreq, TimeoutRreq)
                | (RcvdRreq, RcvdRrep)
                | (FwdRreq, RcvdRrep)
                | (RcvdRrep, LmuComplete)
                | (FwdRreq, LmuComplete)
                | (RcvdRreq, LmuComplete)
                | (RcvdRrep, TimeoutRrep)
                | (UnexpRrep, LmuComplete)
                | (UnexpRrep, TimeoutRrep)
        )
    }

    fn on_timeout(self) -> Option<FsmState> {
        match self {
            FsmState::RcvdRreq | FsmState::FwdRreq => Some(FsmState::TimeoutRreq),
            FsmState::RcvdRrep | FsmState::UnexpRrep => Some(FsmState::TimeoutRrep),
            _ => None,
        }
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// `counts[i][j]` is the number of observed transitions from state `i+1` to `j+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub counts: [[u64; STATE_COUNT]; STATE_COUNT],
}

impl TransitionMatrix {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn get(&self, from: FsmState, to: FsmState) -> u64 {
        self.counts[from.index()][to.index()]
    }

    pub fn add(&mut self, from: FsmState, to: FsmState, n: u64) {
        self.counts[from.index()][to.index()] += n;
    }

    pub fn row(&self, from: FsmState) -> &[u64; STATE_COUNT] {
        &self.counts[from.index()]
    }

    pub fn row_total(&self, from: FsmState) -> u64 {
        self.counts[from.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accumulate(&mut self, other: &TransitionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(other.counts.iter()) {
            for (c, o) in row.iter_mut().zip(orow.iter()) {
                *c += o;
            }
        }
    }
}

/// Identity of a local message unit: the RREQ flood `(source, dest)` plus its
/// broadcast id when known (an RREP seen before any RREQ carries none).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LmuKey {
    pub source: NodeId,
    pub dest: NodeId,
    pub bcast_id: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmuFsm {
    pub monitored: NodeId,
    pub lmu: LmuKey,
    pub state: FsmState,
    pub rreq_deadline: Option<SimTime>,
    pub rrep_deadline: Option<SimTime>,
    touched: SimTime,
    generation: u64,
    queued: Option<(SimTime, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedTransition {
    pub at: SimTime,
    pub monitored: NodeId,
    pub lmu: LmuKey,
    pub from: FsmState,
    pub to: FsmState,
}

/// Ring of `d` per-window matrices for each monitored neighbor.
#[derive(Debug, Clone)]
pub struct ObservationBuffer {
    windows: Vec<Vec<TransitionMatrix>>,
    current: usize,
    completed: usize,
}

impl ObservationBuffer {
    pub fn new(neighbor_count: usize, windows_per_detection: usize) -> Self {
        assert!(windows_per_detection > 0);
        ObservationBuffer {
            windows: vec![vec![TransitionMatrix::zero(); windows_per_detection]; neighbor_count],
            current: 0,
            completed: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.windows.first().map_or(0, Vec::len)
    }

    pub fn record(&mut self, slot: usize, from: FsmState, to: FsmState) {
        self.windows[slot][self.current].add(from, to, 1);
    }

    pub fn current_window(&self, slot: usize) -> &TransitionMatrix {
        &self.windows[slot][self.current]
    }

    pub fn aggregate_slot(&self, slot: usize) -> TransitionMatrix {
        let mut sum = TransitionMatrix::zero();
        for w in &self.windows[slot] {
            sum.accumulate(w);
        }
        sum
    }

    /// Closes the current window: returns the per-slot sums over the retained
    /// windows (the most recent `d`) and whether `d` full windows have been seen,
    /// then evicts the oldest window to make room for the next one.
    pub fn rollover(&mut self) -> (Vec<TransitionMatrix>, bool) {
        let sums = (0..self.windows.len())
            .map(|s| self.aggregate_slot(s))
            .collect();
        self.completed += 1;
        let ready = self.completed >= self.depth();
        let depth = self.depth();
        if depth > 0 {
            self.current = (self.current + 1) % depth;
            for slot in &mut self.windows {
                slot[self.current] = TransitionMatrix::zero();
            }
        }
        (sums, ready)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonitorParams {
    pub rreq_timeout: SimTime,
    pub rrep_timeout: SimTime,
    pub windows_per_detection: usize,
}

type FsmSlotKey = (usize, NodeId, NodeId);

/// Observation state of one monitor node.
#[derive(Debug, Clone)]
pub struct Monitor {
    id: NodeId,
    neighbors: Vec<NodeId>,
    slot_of: HashMap<NodeId, usize>,
    params: MonitorParams,
    fsms: HashMap<FsmSlotKey, LmuFsm>,
    timers: BinaryHeap<Reverse<(SimTime, u64, FsmSlotKey)>>,
    next_generation: u64,
    buffer: ObservationBuffer,
    log_transitions: bool,
}

enum Stimulus {
    MonitoredBroadcast,
    RreqDelivered,
    MonitoredSendsRrep,
    RrepDelivered { at_source: bool },
}

impl Monitor {
    pub fn new(id: NodeId, neighbors: Vec<NodeId>, params: MonitorParams) -> Self {
        let slot_of = neighbors.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let buffer = ObservationBuffer::new(neighbors.len(), params.windows_per_detection);
        Monitor {
            id,
            neighbors,
            slot_of,
            params,
            fsms: HashMap::default(),
            timers: BinaryHeap::new(),
            next_generation: 0,
            buffer,
            log_transitions: true,
        }
    }

    pub fn for_topology(topo: &Topology, id: NodeId, params: MonitorParams) -> Self {
        Self::new(id, topo.neighbor_slice(id).to_vec(), params)
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn neighbors(&self) -> &[NodeId] {
        &self.neighbors
    }

    pub fn slot(&self, node: NodeId) -> Option<usize> {
        self.slot_of.get(&node).copied()
    }

    /// When off, `observe` and `expire` return empty vectors. The matrices are
    /// updated either way.
    pub fn set_transition_log(&mut self, enabled: bool) {
        self.log_transitions = enabled;
    }

    pub fn buffer(&self) -> &ObservationBuffer {
        &self.buffer
    }

    /// Non-destructive sum of the retained windows for one neighbor.
    pub fn aggregate(&self, neighbor: NodeId) -> Result<TransitionMatrix> {
        let slot = self
            .slot(neighbor)
            .ok_or(Error::UnknownNeighbor(neighbor))?;
        Ok(self.buffer.aggregate_slot(slot))
    }

    pub fn fsm(&self, monitored: NodeId, source: NodeId, dest: NodeId) -> Option<&LmuFsm> {
        let slot = self.slot(monitored)?;
        self.fsms.get(&(slot, source, dest))
    }

    fn record(
        &mut self,
        out: &mut Vec<ObservedTransition>,
        key: FsmSlotKey,
        to: FsmState,
        now: SimTime,
    ) {
        let Some(fsm) = self.fsms.get_mut(&key) else {
            return;
        };
        let from = fsm.state;
        debug_assert!(
            FsmState::is_valid_transition(from, to),
            "transition {from}->{to} is not an edge of the state machine"
        );
        fsm.state = to;
        fsm.touched = now;
        fsm.rreq_deadline = None;
        fsm.rrep_deadline = None;
        match to {
            FsmState::RcvdRreq | FsmState::FwdRreq => {
                fsm.rreq_deadline = Some(now + self.params.rreq_timeout);
            }
            FsmState::RcvdRrep | FsmState::UnexpRrep => {
                fsm.rrep_deadline = Some(now + self.params.rrep_timeout);
            }
            _ => {}
        }
        self.next_generation += 1;
        fsm.generation = self.next_generation;
        // A queued entry that is not later than the new deadline is reused:
        // when it pops, the timer is pushed again at the real deadline.
        if let Some(deadline) = fsm.rreq_deadline.or(fsm.rrep_deadline) {
            if fsm.queued.is_none_or(|(q, _)| q > deadline) {
                fsm.queued = Some((deadline, fsm.generation));
                self.timers.push(Reverse((deadline, fsm.generation, key)));
            }
        }
        let monitored = fsm.monitored;
        let lmu = fsm.lmu;
        self.buffer.record(key.0, from, to);
        if !self.log_transitions {
            return;
        }
        out.push(ObservedTransition {
            at: now,
            monitored,
            lmu,
            from,
            to,
        });
    }

    fn apply(
        &mut self,
        out: &mut Vec<ObservedTransition>,
        key: FsmSlotKey,
        stimulus: Stimulus,
        now: SimTime,
    ) {
        use FsmState::*;
        let Some(state) = self.fsms.get(&key).map(|f| f.state) else {
            return;
        };
        if state.is_final() {
            return;
        }
        match stimulus {
            Stimulus::MonitoredBroadcast => match state {
                Init | RcvdRreq | FwdRreq => self.record(out, key, FwdRreq, now),
                _ => {}
            },
            Stimulus::RreqDelivered => match state {
                Init | RcvdRreq => self.record(out, key, RcvdRreq, now),
                FwdRreq => self.record(out, key, FwdRreq, now),
                _ => {}
            },
            Stimulus::MonitoredSendsRrep => match state {
                Init => {
                    self.record(out, key, UnexpRrep, now);
                    self.record(out, key, LmuComplete, now);
                }
                RcvdRreq | FwdRreq | RcvdRrep | UnexpRrep => {
                    self.record(out, key, LmuComplete, now)
                }
                _ => {}
            },
            Stimulus::RrepDelivered { at_source } => {
                match state {
                    Init => self.record(out, key, UnexpRrep, now),
                    RcvdRreq | FwdRreq => self.record(out, key, RcvdRrep, now),
                    _ => return,
                }
                if at_source {
                    self.record(out, key, LmuComplete, now);
                }
            }
        }
    }

    /// Fetches the FSM for `(slot, source, dest)`, starting a fresh one in
    /// state 1 when none exists or when a new flood supersedes the old one.
    /// A superseded LMU that is still open is closed through its timeout edge.
    fn ensure_fsm(
        &mut self,
        out: &mut Vec<ObservedTransition>,
        slot: usize,
        lmu: LmuKey,
        now: SimTime,
    ) {
        let key = (slot, lmu.source, lmu.dest);
        if let Some(existing) = self.fsms.get(&key) {
            let superseded = lmu.bcast_id.is_some() && existing.lmu.bcast_id != lmu.bcast_id;
            if !superseded {
                return;
            }
            if let Some(to) = existing.state.on_timeout() {
                self.record(out, key, to, now);
            }
        }
        self.fsms.insert(
            key,
            LmuFsm {
                monitored: self.neighbors[slot],
                lmu,
                state: FsmState::Init,
                rreq_deadline: None,
                rrep_deadline: None,
                touched: now,
                generation: 0,
                queued: None,
            },
        );
    }

    /// Feeds one transmission this monitor heard (or made itself).
    pub fn observe(
        &mut self,
        topo: &Topology,
        packet: &ControlPacket,
        now: SimTime,
    ) -> Vec<ObservedTransition> {
        let mut out = Vec::new();
        let transmitter = packet.sender();
        match packet {
            ControlPacket::Rreq(p) => {
                let lmu = LmuKey {
                    source: p.src_id,
                    dest: p.dest_id,
                    bcast_id: Some(p.bcast_id),
                };
                for slot in 0..self.neighbors.len() {
                    let x = self.neighbors[slot];
                    let stimulus = if x == transmitter {
                        Stimulus::MonitoredBroadcast
                    } else if topo.adjacent(transmitter, x) {
                        Stimulus::RreqDelivered
                    } else {
                        continue;
                    };
                    self.ensure_fsm(&mut out, slot, lmu, now);
                    self.apply(&mut out, (slot, p.src_id, p.dest_id), stimulus, now);
                }
            }
            ControlPacket::Rrep(p) => {
                let lmu = LmuKey {
                    source: p.src_id,
                    dest: p.dest_id,
                    bcast_id: None,
                };
                if let Some(slot) = self.slot(transmitter) {
                    self.ensure_fsm(&mut out, slot, lmu, now);
                    self.apply(
                        &mut out,
                        (slot, p.src_id, p.dest_id),
                        Stimulus::MonitoredSendsRrep,
                        now,
                    );
                }
                if p.receiver != transmitter {
                    if let Some(slot) = self.slot(p.receiver) {
                        self.ensure_fsm(&mut out, slot, lmu, now);
                        let at_source = p.receiver == p.src_id;
                        self.apply(
                            &mut out,
                            (slot, p.src_id, p.dest_id),
                            Stimulus::RrepDelivered { at_source },
                            now,
                        );
                    }
                }
            }
        }
        out
    }

    /// Fires every armed deadline `< until` (or `<= until` when `inclusive`).
    pub fn expire(&mut self, until: SimTime, inclusive: bool) -> Vec<ObservedTransition> {
        let mut out = Vec::new();
        while let Some(Reverse((deadline, generation, key))) = self.timers.peek().copied() {
            let due = if inclusive {
                deadline <= until
            } else {
                deadline < until
            };
            if !due {
                break;
            }
            self.timers.pop();
            let Some(fsm) = self.fsms.get_mut(&key) else {
                continue;
            };
            if fsm.queued != Some((deadline, generation)) {
                continue;
            }
            fsm.queued = None;
            let Some(real) = fsm.rreq_deadline.or(fsm.rrep_deadline) else {
                continue;
            };
            if (real, fsm.generation) != (deadline, generation) {
                fsm.queued = Some((real, fsm.generation));
                self.timers.push(Reverse((real, fsm.generation, key)));
                continue;
            }
            if let Some(to) = fsm.state.on_timeout() {
                self.record(&mut out, key, to, deadline);
            }
        }
        out
    }

    /// Closes the current observation window at `now`; see
    /// [`ObservationBuffer::rollover`]. Final-state LMUs idle for more than two
    /// RREP timeouts are forgotten.
    pub fn window_rollover(&mut self, now: SimTime) -> (Vec<TransitionMatrix>, bool) {
        let horizon = self.params.rrep_timeout + self.params.rrep_timeout;
        self.fsms
            .retain(|_, f| !f.state.is_final() || f.touched + horizon >= now);
        self.buffer.rollover()
    }
}
