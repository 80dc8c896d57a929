//! Hand-drives one route discovery over a four-node chain and prints every
//! protocol action, once with an honest relay and once with a relay that
//! drops replies.

use mesh_sentinel::aodv::{Action, AodvParams, NodeBehavior, NodeState};
use mesh_sentinel::{NodeId, SimTime, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn discover(relay: NodeBehavior) -> mesh_sentinel::Result<()> {
    let params = AodvParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nodes: Vec<NodeState> = (0..4)
        .map(|i| {
            let behavior = if i == 2 { relay } else { NodeBehavior::Honest };
            NodeState::new(NodeId(i), behavior, params)
        })
        .collect();
    let mut now = SimTime::ZERO;
    let step = SimTime::from_micros(2_000);

    // 0 - 1 - 2 - 3, each node hears only its chain neighbors
    let mut rreq = nodes[0].originate_rreq(NodeId(3), now);
    println!("  {} floods for {}", rreq.src_id, rreq.dest_id);
    let mut reply = None;
    for (hop, node) in nodes.iter_mut().enumerate().skip(1) {
        now = now + step;
        match node.handle_rreq(&rreq, now, &mut rng)? {
            Action::Rebroadcast(next) => {
                println!("  {} rebroadcasts (ttl {})", next.sender, next.ttl);
                rreq = next;
            }
            Action::SendRrep(r) => {
                println!("  {} answers toward {}", r.sender, r.receiver);
                reply = Some(r);
                break;
            }
            other => {
                println!("  node {hop}: {other:?}");
                return Ok(());
            }
        }
    }

    let Some(mut rrep) = reply else { return Ok(()) };
    loop {
        now = now + step;
        let at = rrep.receiver.index();
        match nodes[at].handle_rrep(&rrep, now, &mut rng)? {
            Action::ForwardRrep(next) => {
                println!("  {} forwards the reply to {}", next.sender, next.receiver);
                rrep = next;
            }
            Action::Consume => {
                let route = nodes[0]
                    .valid_route(NodeId(3), now)
                    .expect("route installed");
                println!(
                    "  source has a route: next hop {}, {} hops",
                    route.next_hop, route.hop_count
                );
                return Ok(());
            }
            other => {
                println!("  node {at}: {other:?}");
                return Ok(());
            }
        }
    }
}

fn main() -> mesh_sentinel::Result<()> {
    println!("honest relay:");
    discover(NodeBehavior::Honest)?;
    println!("relay dropping every reply:");
    discover(NodeBehavior::Selfish {
        strategy: Strategy::DropRep,
        drop_prob: 1.0,
    })
}
