//! Abstracted AODV route discovery with injectable selfish behavior.
//!
//! Only the control plane is modelled: RREQ floods, RREP unicasts along the
//! reverse path, route and duplicate caches with lifetimes. The RREQ and RREP
//! headers carry three extra fields (`next_to_source`, `duplicate_flag`,
//! `next_to_destination`) that the cross-check detector consumes.

use std::collections::BTreeMap;

use rand::Rng;
use rustc_hash::FxHashMap as HashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{NodeId, Strategy};
use crate::time::SimTime;

/// `(src_id, bcast_id)` names one flood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FloodKey {
    pub src: NodeId,
    pub bcast_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RreqPacket {
    pub src_id: NodeId,
    pub dest_id: NodeId,
    pub src_seq_num: u32,
    pub dest_seq_num: u32,
    pub bcast_id: u32,
    pub ttl: i32,
    pub sender: NodeId,
    pub next_to_source: Option<NodeId>,
    pub duplicate_flag: bool,
}

impl RreqPacket {
    pub fn flood(&self) -> FloodKey {
        FloodKey {
            src: self.src_id,
            bcast_id: self.bcast_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RrepPacket {
    pub src_id: NodeId,
    pub dest_id: NodeId,
    pub dest_seq_num: u32,
    pub hop_count: u32,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub next_to_source: Option<NodeId>,
    pub duplicate_flag: bool,
    /// Hop the receiver is expected to forward this reply to, when the sender
    /// can infer it; `None` when unknown or when the receiver is the source.
    pub next_to_destination: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlPacket {
    Rreq(RreqPacket),
    Rrep(RrepPacket),
}

impl ControlPacket {
    pub fn sender(&self) -> NodeId {
        match self {
            ControlPacket::Rreq(p) => p.sender,
            ControlPacket::Rrep(p) => p.sender,
        }
    }

    pub fn endpoints(&self) -> (NodeId, NodeId) {
        match self {
            ControlPacket::Rreq(p) => (p.src_id, p.dest_id),
            ControlPacket::Rrep(p) => (p.src_id, p.dest_id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    pub dest_seq_num: u32,
    pub hop_count: u32,
    pub expires_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeBehavior {
    Honest,
    Selfish { strategy: Strategy, drop_prob: f64 },
}

impl NodeBehavior {
    pub fn is_selfish(&self) -> bool {
        matches!(self, NodeBehavior::Selfish { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    SelfishRreq,
    SelfishRrep,
    TtlExhausted,
    NoReversePath,
    ChannelLoss,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Rebroadcast(RreqPacket),
    SendRrep(RrepPacket),
    ForwardRrep(RrepPacket),
    /// The reply reached the source and a route was installed.
    Consume,
    Drop(DropReason),
    Ignore,
}

/// Reverse-path bookkeeping for one flood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeenRreq {
    pub dest: NodeId,
    pub first_sender: NodeId,
    pub copies_heard: u32,
    pub reverse_timer_expires: SimTime,
    /// `next_to_source` of the triggering copy.
    pub upstream_next_to_source: Option<NodeId>,
    pub rreps_sent: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AodvParams {
    pub initial_ttl: i32,
    pub route_lifetime: SimTime,
    pub reverse_timeout: SimTime,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            initial_ttl: 35,
            route_lifetime: SimTime::from_micros(10_000_000),
            reverse_timeout: SimTime::from_micros(3_000_000),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: NodeId,
    pub behavior: NodeBehavior,
    params: AodvParams,
    route_table: BTreeMap<NodeId, RouteEntry>,
    seen_rreq: HashMap<FloodKey, SeenRreq>,
    latest_flood: HashMap<(NodeId, NodeId), FloodKey>,
    own_bcast_counter: u32,
    own_seq_num: u32,
}

impl NodeState {
    pub fn new(id: NodeId, behavior: NodeBehavior, params: AodvParams) -> Self {
        NodeState {
            id,
            behavior,
            params,
            route_table: BTreeMap::new(),
            seen_rreq: HashMap::default(),
            latest_flood: HashMap::default(),
            own_bcast_counter: 0,
            own_seq_num: 0,
        }
    }

    pub fn valid_route(&self, dest: NodeId, now: SimTime) -> Option<&RouteEntry> {
        self.route_table.get(&dest).filter(|r| r.expires_at > now)
    }

    pub fn own_bcast_counter(&self) -> u32 {
        self.own_bcast_counter
    }

    pub fn seen(&self, key: FloodKey, now: SimTime) -> Option<&SeenRreq> {
        self.seen_rreq
            .get(&key)
            .filter(|s| s.reverse_timer_expires > now)
    }

    /// Drops reverse-path entries whose timer has fired.
    pub fn purge_expired(&mut self, now: SimTime) {
        self.seen_rreq.retain(|_, s| s.reverse_timer_expires > now);
        let seen = &self.seen_rreq;
        self.latest_flood.retain(|_, k| seen.contains_key(k));
        self.route_table.retain(|_, r| r.expires_at > now);
    }

    fn install_route(
        &mut self,
        dest: NodeId,
        next_hop: NodeId,
        hop_count: u32,
        seq: u32,
        now: SimTime,
    ) {
        self.route_table.insert(
            dest,
            RouteEntry {
                dest,
                next_hop,
                dest_seq_num: seq,
                hop_count,
                expires_at: now + self.params.route_lifetime,
            },
        );
    }

    /// Starts a new flood toward `dest`.
    pub fn originate_rreq(&mut self, dest: NodeId, now: SimTime) -> RreqPacket {
        self.own_bcast_counter += 1;
        self.own_seq_num += 1;
        let pkt = RreqPacket {
            src_id: self.id,
            dest_id: dest,
            src_seq_num: self.own_seq_num,
            dest_seq_num: self.route_table.get(&dest).map_or(0, |r| r.dest_seq_num),
            bcast_id: self.own_bcast_counter,
            ttl: self.params.initial_ttl,
            sender: self.id,
            next_to_source: None,
            duplicate_flag: false,
        };
        let key = pkt.flood();
        self.seen_rreq.insert(
            key,
            SeenRreq {
                dest,
                first_sender: self.id,
                copies_heard: 0,
                reverse_timer_expires: now + self.params.reverse_timeout,
                upstream_next_to_source: None,
                rreps_sent: 0,
            },
        );
        self.latest_flood.insert((self.id, dest), key);
        pkt
    }

    /// Stamps `duplicate_flag` at the moment the node actually transmits: set
    /// iff it has heard at least two copies of the flood by then.
    pub fn finalize_rreq(&self, pkt: &mut RreqPacket) {
        if pkt.src_id == self.id {
            pkt.duplicate_flag = false;
            return;
        }
        pkt.duplicate_flag = self
            .seen_rreq
            .get(&pkt.flood())
            .is_some_and(|s| s.copies_heard >= 2);
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, strategy: Strategy) -> bool {
        match self.behavior {
            NodeBehavior::Selfish {
                strategy: s,
                drop_prob,
            } if s == strategy => {
                // `random_bool` rejects p outside [0, 1]; config validation guarantees it.
                rng.random_bool(drop_prob)
            }
            _ => false,
        }
    }

    /// Predecessor of `receiver` on the reverse path, when this node can tell.
    fn infer_next_to_destination(
        src: NodeId,
        receiver: NodeId,
        upstream_nts: Option<NodeId>,
    ) -> Option<NodeId> {
        if receiver == src {
            None
        } else if upstream_nts == Some(receiver) {
            Some(src)
        } else {
            None
        }
    }

    fn reply_for(
        &mut self,
        pkt: &RreqPacket,
        hop_count: u32,
        seq: u32,
        stamped_nts: Option<NodeId>,
    ) -> RrepPacket {
        let key = pkt.flood();
        if let Some(s) = self.seen_rreq.get_mut(&key) {
            s.rreps_sent += 1;
        }
        RrepPacket {
            src_id: pkt.src_id,
            dest_id: pkt.dest_id,
            dest_seq_num: seq,
            hop_count,
            sender: self.id,
            receiver: pkt.sender,
            next_to_source: stamped_nts,
            duplicate_flag: false,
            next_to_destination: Self::infer_next_to_destination(
                pkt.src_id,
                pkt.sender,
                pkt.next_to_source,
            ),
        }
    }

    pub fn handle_rreq<R: Rng + ?Sized>(
        &mut self,
        pkt: &RreqPacket,
        now: SimTime,
        rng: &mut R,
    ) -> Result<Action> {
        if pkt.ttl < 0 {
            return Err(Error::MalformedPacket(format!("RREQ with ttl {}", pkt.ttl)));
        }
        let key = pkt.flood();
        if let Some(seen) = self.seen_rreq.get_mut(&key) {
            if seen.reverse_timer_expires > now {
                seen.copies_heard += 1;
                return Ok(Action::Ignore);
            }
        }
        if pkt.src_id == self.id {
            return Ok(Action::Ignore);
        }
        self.seen_rreq.insert(
            key,
            SeenRreq {
                dest: pkt.dest_id,
                first_sender: pkt.sender,
                copies_heard: 1,
                reverse_timer_expires: now + self.params.reverse_timeout,
                upstream_next_to_source: pkt.next_to_source,
                rreps_sent: 0,
            },
        );
        self.latest_flood.insert((pkt.src_id, pkt.dest_id), key);

        let stamped_nts = if pkt.sender == pkt.src_id {
            Some(self.id)
        } else {
            pkt.next_to_source
        };

        if pkt.dest_id == self.id {
            self.own_seq_num += 1;
            let seq = self.own_seq_num;
            return Ok(Action::SendRrep(self.reply_for(pkt, 0, seq, stamped_nts)));
        }

        if self.draw(rng, Strategy::DropReq) {
            return Ok(Action::Drop(DropReason::SelfishRreq));
        }

        let ignores_cache = matches!(
            self.behavior,
            NodeBehavior::Selfish {
                strategy: Strategy::DropRep,
                ..
            }
        );
        if !ignores_cache {
            if let Some(route) = self.valid_route(pkt.dest_id, now).copied() {
                return Ok(Action::SendRrep(self.reply_for(
                    pkt,
                    route.hop_count,
                    route.dest_seq_num,
                    stamped_nts,
                )));
            }
        }

        if pkt.ttl == 0 {
            return Ok(Action::Drop(DropReason::TtlExhausted));
        }
        Ok(Action::Rebroadcast(RreqPacket {
            ttl: pkt.ttl - 1,
            sender: self.id,
            next_to_source: stamped_nts,
            duplicate_flag: false,
            ..pkt.clone()
        }))
    }

    pub fn handle_rrep<R: Rng + ?Sized>(
        &mut self,
        pkt: &RrepPacket,
        now: SimTime,
        rng: &mut R,
    ) -> Result<Action> {
        if pkt.receiver != self.id {
            return Err(Error::MalformedPacket(format!(
                "RREP addressed to {} delivered to {}",
                pkt.receiver, self.id
            )));
        }
        if pkt.src_id == self.id {
            self.install_route(
                pkt.dest_id,
                pkt.sender,
                pkt.hop_count + 1,
                pkt.dest_seq_num,
                now,
            );
            return Ok(Action::Consume);
        }
        let Some(key) = self.latest_flood.get(&(pkt.src_id, pkt.dest_id)).copied() else {
            return Ok(Action::Drop(DropReason::NoReversePath));
        };
        let Some(seen) = self.seen(key, now).copied() else {
            return Ok(Action::Drop(DropReason::NoReversePath));
        };
        if self.draw(rng, Strategy::DropRep) {
            return Ok(Action::Drop(DropReason::SelfishRrep));
        }
        self.install_route(
            pkt.dest_id,
            pkt.sender,
            pkt.hop_count + 1,
            pkt.dest_seq_num,
            now,
        );
        if let Some(s) = self.seen_rreq.get_mut(&key) {
            s.rreps_sent += 1;
        }
        Ok(Action::ForwardRrep(RrepPacket {
            hop_count: pkt.hop_count + 1,
            sender: self.id,
            receiver: seen.first_sender,
            duplicate_flag: seen.rreps_sent > 0,
            next_to_destination: Self::infer_next_to_destination(
                pkt.src_id,
                seen.first_sender,
                seen.upstream_next_to_source,
            ),
            ..pkt.clone()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{substream, Substream};

    fn t(ms: u64) -> SimTime {
        SimTime::from_micros(ms * 1000)
    }

    fn honest(id: u32) -> NodeState {
        NodeState::new(NodeId(id), NodeBehavior::Honest, AodvParams::default())
    }

    fn selfish(id: u32, strategy: Strategy, p: f64) -> NodeState {
        NodeState::new(
            NodeId(id),
            NodeBehavior::Selfish {
                strategy,
                drop_prob: p,
            },
            AodvParams::default(),
        )
    }

    fn rng() -> rand_chacha::ChaCha8Rng {
        substream(5, Substream::Behavior)
    }

    #[test]
    fn origination_increments_bcast_id() {
        let mut s = honest(0);
        let a = s.originate_rreq(NodeId(9), t(0));
        assert_eq!((a.src_id, a.dest_id, a.bcast_id), (NodeId(0), NodeId(9), 1));
        assert_eq!(a.next_to_source, None);
        assert!(!a.duplicate_flag);
        assert_eq!(a.ttl, 35);
        let b = s.originate_rreq(NodeId(9), t(20_000));
        assert_eq!(b.bcast_id, 2);
        let mut other = honest(1);
        let c = other.originate_rreq(NodeId(9), t(0));
        assert_ne!(a.flood(), c.flood());
    }

    #[test]
    fn first_copy_rebroadcasts_and_second_is_ignored() {
        let mut src = honest(0);
        let pkt = src.originate_rreq(NodeId(5), t(0));
        let mut n = honest(1);
        let act = n.handle_rreq(&pkt, t(2), &mut rng()).unwrap();
        let Action::Rebroadcast(fwd) = act else {
            panic!("expected rebroadcast, got {act:?}")
        };
        assert_eq!(fwd.ttl, pkt.ttl - 1);
        assert_eq!(fwd.sender, NodeId(1));
        assert_eq!(fwd.next_to_source, Some(NodeId(1)));
        let mut again = pkt.clone();
        again.sender = NodeId(3);
        assert_eq!(
            n.handle_rreq(&again, t(3), &mut rng()).unwrap(),
            Action::Ignore
        );
        assert_eq!(n.seen(pkt.flood(), t(3)).unwrap().copies_heard, 2);

        let mut later = honest(2);
        let act = later.handle_rreq(&fwd, t(4), &mut rng()).unwrap();
        let Action::Rebroadcast(fwd2) = act else {
            panic!()
        };
        assert_eq!(
            fwd2.next_to_source,
            Some(NodeId(1)),
            "copied verbatim past the first hop"
        );
    }

    #[test]
    fn duplicate_flag_reflects_copies_heard_at_transmission() {
        let mut src = honest(0);
        let pkt = src.originate_rreq(NodeId(5), t(0));
        let mut n = honest(1);
        let Action::Rebroadcast(mut fwd) = n.handle_rreq(&pkt, t(2), &mut rng()).unwrap() else {
            panic!()
        };
        n.finalize_rreq(&mut fwd);
        assert!(!fwd.duplicate_flag);
        let mut dup = pkt.clone();
        dup.sender = NodeId(4);
        n.handle_rreq(&dup, t(3), &mut rng()).unwrap();
        n.finalize_rreq(&mut fwd);
        assert!(fwd.duplicate_flag);
    }

    #[test]
    fn negative_ttl_is_malformed() {
        let mut src = honest(0);
        let mut pkt = src.originate_rreq(NodeId(5), t(0));
        pkt.ttl = -1;
        assert!(matches!(
            honest(1).handle_rreq(&pkt, t(1), &mut rng()),
            Err(Error::MalformedPacket(_))
        ));
    }

    #[test]
    fn ttl_zero_is_not_forwarded() {
        let mut src = honest(0);
        let mut pkt = src.originate_rreq(NodeId(5), t(0));
        pkt.ttl = 0;
        assert_eq!(
            honest(1).handle_rreq(&pkt, t(1), &mut rng()).unwrap(),
            Action::Drop(DropReason::TtlExhausted)
        );
    }

    #[test]
    fn drop_req_with_probability_one_always_drops() {
        let mut r = rng();
        for i in 0..50 {
            let mut src = honest(0);
            let pkt = src.originate_rreq(NodeId(5), t(i));
            let mut s = selfish(1, Strategy::DropReq, 1.0);
            assert_eq!(
                s.handle_rreq(&pkt, t(i + 1), &mut r).unwrap(),
                Action::Drop(DropReason::SelfishRreq)
            );
        }
    }

    #[test]
    fn drop_req_still_answers_as_destination() {
        let mut src = honest(0);
        let pkt = src.originate_rreq(NodeId(1), t(0));
        let mut s = selfish(1, Strategy::DropReq, 1.0);
        let Action::SendRrep(rep) = s.handle_rreq(&pkt, t(1), &mut rng()).unwrap() else {
            panic!()
        };
        assert_eq!(rep.receiver, NodeId(0));
        assert_eq!(rep.next_to_destination, None);
    }

    #[test]
    fn zero_drop_probability_is_honest() {
        let mut src = honest(0);
        let pkt = src.originate_rreq(NodeId(5), t(0));
        let mut h = honest(1);
        let mut s = selfish(1, Strategy::DropReq, 0.0);
        assert_eq!(
            h.handle_rreq(&pkt, t(1), &mut rng()).unwrap(),
            s.handle_rreq(&pkt, t(1), &mut rng()).unwrap()
        );
    }

    fn three_hop_setup() -> (NodeState, NodeState, NodeState, NodeState, RreqPacket) {
        // 0 (source) -> 1 -> 2 -> 3 (destination)
        let mut n0 = honest(0);
        let mut n1 = honest(1);
        let mut n2 = honest(2);
        let n3 = honest(3);
        let p0 = n0.originate_rreq(NodeId(3), t(0));
        let Action::Rebroadcast(p1) = n1.handle_rreq(&p0, t(2), &mut rng()).unwrap() else {
            panic!()
        };
        let Action::Rebroadcast(p2) = n2.handle_rreq(&p1, t(4), &mut rng()).unwrap() else {
            panic!()
        };
        (n0, n1, n2, n3, p2)
    }

    #[test]
    fn reply_travels_reverse_path_and_installs_routes() {
        let (mut n0, mut n1, mut n2, mut n3, p2) = three_hop_setup();
        let Action::SendRrep(r3) = n3.handle_rreq(&p2, t(6), &mut rng()).unwrap() else {
            panic!()
        };
        assert_eq!(r3.receiver, NodeId(2));
        // 3 cannot name 2's predecessor; 2 can name 1's (the source).
        assert_eq!(r3.next_to_destination, None);
        let Action::ForwardRrep(r2) = n2.handle_rreq_reply(&r3, t(8)) else {
            panic!()
        };
        assert_eq!(r2.receiver, NodeId(1));
        assert_eq!(r2.next_to_destination, Some(NodeId(0)));
        assert!(n2.valid_route(NodeId(3), t(8)).is_some());
        let Action::ForwardRrep(r1) = n1.handle_rreq_reply(&r2, t(10)) else {
            panic!()
        };
        assert_eq!(r1.receiver, NodeId(0));
        assert_eq!(r1.next_to_destination, None);
        assert_eq!(n0.handle_rreq_reply(&r1, t(12)), Action::Consume);
        let route = n0.valid_route(NodeId(3), t(12)).unwrap();
        assert_eq!((route.next_hop, route.hop_count), (NodeId(1), 3));
        assert!(n0
            .valid_route(NodeId(3), t(12) + SimTime::from_micros(10_000_000))
            .is_none());
    }

    #[test]
    fn cached_route_answers_unless_drop_rep() {
        let (mut n0, mut n1, mut n2, mut n3, p2) = three_hop_setup();
        let Action::SendRrep(r3) = n3.handle_rreq(&p2, t(6), &mut rng()).unwrap() else {
            panic!()
        };
        let Action::ForwardRrep(r2) = n2.handle_rreq_reply(&r3, t(8)) else {
            panic!()
        };
        let Action::ForwardRrep(r1) = n1.handle_rreq_reply(&r2, t(10)) else {
            panic!()
        };
        n0.handle_rreq_reply(&r1, t(12));

        let mut other = honest(7);
        let q = other.originate_rreq(NodeId(3), t(100));
        assert!(matches!(
            n2.handle_rreq(&q, t(102), &mut rng()).unwrap(),
            Action::SendRrep(_)
        ));
        let mut dr = selfish(2, Strategy::DropRep, 1.0);
        dr.install_route(NodeId(3), NodeId(3), 1, 1, t(50));
        assert!(matches!(
            dr.handle_rreq(&q, t(102), &mut rng()).unwrap(),
            Action::Rebroadcast(_)
        ));
    }

    #[test]
    fn drop_rep_with_probability_one_never_forwards() {
        let mut n0 = honest(0);
        let p0 = n0.originate_rreq(NodeId(3), t(0));
        let mut dr = selfish(1, Strategy::DropRep, 1.0);
        let Action::Rebroadcast(_) = dr.handle_rreq(&p0, t(2), &mut rng()).unwrap() else {
            panic!()
        };
        let rep = RrepPacket {
            src_id: NodeId(0),
            dest_id: NodeId(3),
            dest_seq_num: 1,
            hop_count: 1,
            sender: NodeId(2),
            receiver: NodeId(1),
            next_to_source: Some(NodeId(1)),
            duplicate_flag: false,
            next_to_destination: Some(NodeId(0)),
        };
        assert_eq!(
            dr.handle_rrep(&rep, t(5), &mut rng()).unwrap(),
            Action::Drop(DropReason::SelfishRrep)
        );
    }

    #[test]
    fn expired_reverse_path_discards_reply() {
        let (_, _, mut n2, mut n3, p2) = three_hop_setup();
        let Action::SendRrep(r3) = n3.handle_rreq(&p2, t(6), &mut rng()).unwrap() else {
            panic!()
        };
        assert_eq!(
            n2.handle_rrep(&r3, t(4) + SimTime::from_micros(3_000_000), &mut rng())
                .unwrap(),
            Action::Drop(DropReason::NoReversePath)
        );
    }

    impl NodeState {
        fn handle_rreq_reply(&mut self, pkt: &RrepPacket, now: SimTime) -> Action {
            self.handle_rrep(pkt, now, &mut rng()).unwrap()
        }
    }
}
