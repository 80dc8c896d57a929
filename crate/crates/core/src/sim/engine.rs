use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use serde::{Deserialize, Serialize};

use super::observer::{MetricsRecord, ObservationOutcome, Observatory, TickDetail};
use super::queue::EventQueue;
use super::trace::{TraceEvent, TraceHeader, TRACE_VERSION};
use crate::aodv::{Action, AodvParams, ControlPacket, DropReason, NodeBehavior, NodeState};
use crate::crosscheck::EvidenceTotals;
use crate::error::{Error, Result};
use crate::net::{
    build_topology, substream, NodeId, ScenarioConfig, Strategy, Substream, Topology,
};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub record_trace: bool,
    /// Keep every monitor's per-tick detection report in the output.
    pub keep_details: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_trace: true,
            keep_details: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub crosscheck_enabled: bool,
    pub strategy: Strategy,
    pub drop_prob: f64,
    pub selfish: Vec<NodeId>,
    pub sessions: u64,
    /// CBR data packets the sessions would have offered (accounting only).
    pub offered_data_packets: u64,
    pub tx_count: u64,
    pub drops: BTreeMap<DropReason, u64>,
    pub records: Vec<MetricsRecord>,
    pub evidence: BTreeMap<NodeId, EvidenceTotals>,
}

impl RunMetrics {
    pub fn final_record(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }

    pub fn final_detection_rate(&self) -> Option<f64> {
        self.final_record().and_then(|r| r.detection_rate)
    }

    pub fn final_false_positive_rate(&self) -> Option<f64> {
        self.final_record().and_then(|r| r.false_positive_rate)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Vec<TraceEvent>,
    pub details: Vec<TickDetail>,
    pub topology: Topology,
}

/// Picks the selfish nodes from the behavior substream: `floor(f * N)` of
/// them, uniformly without replacement.
pub fn plant_selfish(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut selfish = vec![false; config.node_count];
    for i in rand::seq::index::sample(rng, config.node_count, config.selfish_count()) {
        selfish[i] = true;
    }
    selfish
}

pub(crate) fn offered_packets(start: SimTime, until: SimTime, end: SimTime, cbr_rate: f64) -> u64 {
    let stop = until.min(end);
    let secs = (stop - start).as_secs_f64();
    (secs * cbr_rate).floor() as u64
}

#[derive(Debug)]
enum EventKind {
    SessionArrival,
    Transmission {
        node: NodeId,
        packet: ControlPacket,
    },
    /// Route check for an active session: rediscover if no valid route.
    PairCheck {
        src: NodeId,
        dst: NodeId,
    },
    WindowTick,
    SimEnd,
}

struct Engine<'c> {
    config: &'c ScenarioConfig,
    topo: Topology,
    nodes: Vec<NodeState>,
    queue: EventQueue<EventKind>,
    traffic: ChaCha8Rng,
    behavior: ChaCha8Rng,
    channel: ChaCha8Rng,
    observatory: Observatory,
    trace: Option<Vec<TraceEvent>>,
    tx_count: u64,
    sessions: u64,
    offered: u64,
    drops: BTreeMap<DropReason, u64>,
    session_until: HashMap<(NodeId, NodeId), SimTime>,
    checking: HashSet<(NodeId, NodeId)>,
    latency_us: i64,
    jitter_us: i64,
    rrep_timeout: SimTime,
    end: SimTime,
}

impl Engine<'_> {
    fn delay(&mut self) -> SimTime {
        let j = if self.jitter_us > 0 {
            self.channel.random_range(-self.jitter_us..=self.jitter_us)
        } else {
            0
        };
        SimTime::from_micros((self.latency_us + j).max(1) as u64)
    }

    fn log(&mut self, e: TraceEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.push(e);
        }
    }

    fn schedule_arrival(&mut self, now: SimTime) {
        if self.config.session_arrival_rate <= 0.0 {
            return;
        }
        let gap = Exp::new(self.config.session_arrival_rate)
            .expect("validated rate")
            .sample(&mut self.traffic);
        let at = now + SimTime::from_secs_f64(gap);
        if at < self.end {
            self.queue.push(at, EventKind::SessionArrival);
        }
    }

    fn session_arrival(&mut self, now: SimTime) {
        let n = self.topo.node_count() as u32;
        let src = self.traffic.random_range(0..n);
        let mut dst = self.traffic.random_range(0..n - 1);
        if dst >= src {
            dst += 1;
        }
        let (src, dst) = (NodeId(src), NodeId(dst));
        let length = Exp::new(1.0 / self.config.mean_session_duration)
            .expect("validated duration")
            .sample(&mut self.traffic);
        let until = now + SimTime::from_secs_f64(length);
        self.sessions += 1;
        self.offered += offered_packets(now, until, self.end, self.config.cbr_rate);
        self.log(TraceEvent::Session {
            t: now,
            src,
            dst,
            until,
        });
        let slot = self.session_until.entry((src, dst)).or_insert(until);
        *slot = (*slot).max(until);
        if self.checking.insert((src, dst)) {
            self.pair_check(now, src, dst);
        }
        self.schedule_arrival(now);
    }

    fn pair_check(&mut self, now: SimTime, src: NodeId, dst: NodeId) {
        let active = self
            .session_until
            .get(&(src, dst))
            .is_some_and(|u| *u > now);
        if !active {
            self.checking.remove(&(src, dst));
            return;
        }
        if let Some(route) = self.nodes[src.index()].valid_route(dst, now) {
            let at = route.expires_at;
            self.queue.push(at, EventKind::PairCheck { src, dst });
            return;
        }
        let pkt = self.nodes[src.index()].originate_rreq(dst, now);
        let at = now + self.delay();
        self.queue.push(
            at,
            EventKind::Transmission {
                node: src,
                packet: ControlPacket::Rreq(pkt),
            },
        );
        self.queue
            .push(now + self.rrep_timeout, EventKind::PairCheck { src, dst });
    }

    fn transmit(&mut self, now: SimTime, node: NodeId, mut packet: ControlPacket) -> Result<()> {
        if let ControlPacket::Rreq(p) = &mut packet {
            self.nodes[node.index()].finalize_rreq(p);
        }
        let seq = self.tx_count;
        self.tx_count += 1;
        let neighbors = self.topo.neighbor_slice(node).to_vec();
        let mut lost = Vec::new();
        if self.config.channel_loss_prob > 0.0 {
            for &nb in &neighbors {
                if self.channel.random_bool(self.config.channel_loss_prob) {
                    lost.push(nb);
                }
            }
        }
        if self.trace.is_some() {
            self.log(TraceEvent::Tx {
                t: now,
                seq,
                packet: packet.clone(),
            });
            for &nb in &lost {
                self.log(TraceEvent::Loss {
                    t: now,
                    seq,
                    node: nb,
                });
            }
        }
        self.observatory.observe_transmission(now, &packet, &lost)?;

        match &packet {
            ControlPacket::Rreq(p) => {
                for nb in neighbors.into_iter().filter(|n| !lost.contains(n)) {
                    let action = self.nodes[nb.index()].handle_rreq(p, now, &mut self.behavior)?;
                    self.act(now, nb, action, &packet);
                }
            }
            ControlPacket::Rrep(p) => {
                let r = p.receiver;
                if !self.topo.adjacent(node, r) {
                    return Err(Error::MalformedPacket(format!(
                        "RREP from {node} to non-neighbor {r}"
                    )));
                }
                if lost.contains(&r) {
                    self.act(now, r, Action::Drop(DropReason::ChannelLoss), &packet);
                } else {
                    let action = self.nodes[r.index()].handle_rrep(p, now, &mut self.behavior)?;
                    self.act(now, r, action, &packet);
                }
            }
        }
        Ok(())
    }

    fn act(&mut self, now: SimTime, node: NodeId, action: Action, cause: &ControlPacket) {
        let out = match action {
            Action::Rebroadcast(p) => ControlPacket::Rreq(p),
            Action::SendRrep(p) | Action::ForwardRrep(p) => ControlPacket::Rrep(p),
            Action::Consume | Action::Ignore => return,
            Action::Drop(reason) => {
                *self.drops.entry(reason).or_insert(0) += 1;
                let (src_id, dest_id) = cause.endpoints();
                self.log(TraceEvent::Drop {
                    t: now,
                    node,
                    reason,
                    src_id,
                    dest_id,
                });
                return;
            }
        };
        let at = now + self.delay();
        self.queue
            .push(at, EventKind::Transmission { node, packet: out });
    }
}

/// Runs one scenario with a trace and without per-monitor detail.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &ScenarioConfig, options: RunOptions) -> Result<RunOutput> {
    config.validate()?;
    let topo = build_topology(config, &mut substream(config.seed, Substream::Placement))?;
    let mut behavior = substream(config.seed, Substream::Behavior);
    let selfish = plant_selfish(config, &mut behavior);
    let params = AodvParams {
        initial_ttl: config.initial_ttl as i32,
        route_lifetime: SimTime::from_secs_f64(config.route_lifetime),
        reverse_timeout: SimTime::from_secs_f64(config.rrep_timeout),
    };
    let nodes = topo
        .nodes()
        .map(|n| {
            let b = if selfish[n.index()] {
                NodeBehavior::Selfish {
                    strategy: config.strategy,
                    drop_prob: config.drop_prob,
                }
            } else {
                NodeBehavior::Honest
            };
            NodeState::new(n, b, params)
        })
        .collect();
    let observatory =
        Observatory::new(topo.clone(), selfish.clone(), config, options.keep_details)?;
    let selfish_ids: Vec<NodeId> = topo.nodes().filter(|n| selfish[n.index()]).collect();
    let end = config.duration();

    let mut engine = Engine {
        config,
        topo,
        nodes,
        queue: EventQueue::new(),
        traffic: substream(config.seed, Substream::Traffic),
        behavior,
        channel: substream(config.seed, Substream::Channel),
        observatory,
        trace: options.record_trace.then(Vec::new),
        tx_count: 0,
        sessions: 0,
        offered: 0,
        drops: BTreeMap::new(),
        session_until: HashMap::default(),
        checking: HashSet::default(),
        latency_us: SimTime::from_secs_f64(config.per_hop_latency).as_micros() as i64,
        jitter_us: SimTime::from_secs_f64(config.per_hop_jitter).as_micros() as i64,
        rrep_timeout: SimTime::from_secs_f64(config.rrep_timeout),
        end,
    };
    engine.log(TraceEvent::Header(TraceHeader {
        version: TRACE_VERSION,
        seed: config.seed,
        node_count: config.node_count,
        strategy: config.strategy,
        drop_prob: config.drop_prob,
        selfish: selfish_ids.clone(),
        sim_duration: end,
    }));
    engine.queue.push(end, EventKind::SimEnd);
    let window = config.window();
    if window < end {
        engine.queue.push(window, EventKind::WindowTick);
    }
    engine.schedule_arrival(SimTime::ZERO);

    while let Some((now, _, event)) = engine.queue.pop() {
        match event {
            EventKind::SimEnd => break,
            EventKind::SessionArrival => engine.session_arrival(now),
            EventKind::PairCheck { src, dst } => engine.pair_check(now, src, dst),
            EventKind::Transmission { node, packet } => engine.transmit(now, node, packet)?,
            EventKind::WindowTick => {
                engine.observatory.advance_to(now);
                for n in &mut engine.nodes {
                    n.purge_expired(now);
                }
                if now + window < end {
                    engine.queue.push(now + window, EventKind::WindowTick);
                }
            }
        }
    }
    let tx_count = engine.tx_count;
    engine.log(TraceEvent::End { t: end, tx_count });

    let Engine {
        observatory,
        trace,
        topo,
        sessions,
        offered,
        drops,
        ..
    } = engine;
    let ObservationOutcome {
        records,
        details,
        evidence,
    } = observatory.finish();
    Ok(RunOutput {
        metrics: RunMetrics {
            seed: config.seed,
            crosscheck_enabled: config.crosscheck_enabled,
            strategy: config.strategy,
            drop_prob: config.drop_prob,
            selfish: selfish_ids,
            sessions,
            offered_data_packets: offered,
            tx_count,
            drops,
            records,
            evidence,
        },
        trace: trace.unwrap_or_default(),
        details,
        topology: topo,
    })
}
