//! Watches a four-node chain from node 1 and prints the state machine walk
//! of each overheard neighbor, for one honest flood and one that node 2
//! swallows.

use mesh_sentinel::aodv::{Action, AodvParams, ControlPacket, NodeBehavior, NodeState};
use mesh_sentinel::monitor::{FsmState, Monitor, MonitorParams};
use mesh_sentinel::{NodeId, SimTime, Strategy, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WATCHER: NodeId = NodeId(1);

fn main() -> mesh_sentinel::Result<()> {
    let topo =
        Topology::from_positions(vec![(0.0, 0.0), (8.0, 0.0), (16.0, 0.0), (24.0, 0.0)], 10.0);
    let mut monitor = Monitor::for_topology(
        &topo,
        WATCHER,
        MonitorParams {
            rreq_timeout: SimTime::from_secs_f64(0.5),
            rrep_timeout: SimTime::from_secs_f64(1.0),
            windows_per_detection: 4,
        },
    );
    let params = AodvParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut nodes: Vec<NodeState> = (0..4)
        .map(|i| NodeState::new(NodeId(i), NodeBehavior::Honest, params))
        .collect();

    let step = SimTime::from_micros(2_000);
    let mut now = SimTime::ZERO;
    for round in 0..2 {
        if round == 1 {
            nodes[2].behavior = NodeBehavior::Selfish {
                strategy: Strategy::DropReq,
                drop_prob: 1.0,
            };
        }
        println!(
            "flood {} (node 2 {}):",
            round + 1,
            if round == 0 { "honest" } else { "selfish" }
        );
        // far enough apart that cached routes have expired
        now = now + SimTime::from_secs_f64(15.0);

        // flood outward, then hand the reply back; stop at the first silent hop
        let mut pending = ControlPacket::Rreq(nodes[0].originate_rreq(NodeId(3), now));
        let mut sent = vec![(now, pending.clone())];
        loop {
            now = now + step;
            let action = match &pending {
                ControlPacket::Rreq(p) => {
                    let next = p.sender.0 as usize + 1;
                    nodes[next].handle_rreq(p, now, &mut rng)?
                }
                ControlPacket::Rrep(p) => {
                    nodes[p.receiver.index()].handle_rrep(p, now, &mut rng)?
                }
            };
            pending = match action {
                Action::Rebroadcast(p) => ControlPacket::Rreq(p),
                Action::SendRrep(r) | Action::ForwardRrep(r) => ControlPacket::Rrep(r),
                _ => break,
            };
            sent.push((now, pending.clone()));
        }

        for (at, packet) in &sent {
            let tx = packet.sender();
            if tx == WATCHER || topo.adjacent(tx, WATCHER) {
                for t in monitor.observe(&topo, packet, *at) {
                    println!(
                        "  {:>9}  node {}: {:?} -> {:?}",
                        t.at, t.monitored, t.from, t.to
                    );
                }
            }
        }
        for t in monitor.expire(now + SimTime::from_secs_f64(2.0), true) {
            println!(
                "  {:>9}  node {}: {:?} -> {:?} (timer)",
                t.at, t.monitored, t.from, t.to
            );
        }
    }

    let m = monitor.aggregate(NodeId(2))?;
    println!(
        "node 2 matrix: {} transitions, {} forwarded floods, {} timed-out floods",
        m.total(),
        m.get(FsmState::RcvdRreq, FsmState::FwdRreq),
        m.get(FsmState::RcvdRreq, FsmState::TimeoutRreq)
    );
    Ok(())
}
