//! Places nodes for a few seeds and prints degree statistics.
//!
//! Usage: `cargo run --example topology -- [node_count] [radio_range]`

use mesh_sentinel::net::build_topology;
use mesh_sentinel::net::{substream, Substream};
use mesh_sentinel::ScenarioConfig;

fn main() -> mesh_sentinel::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut config = ScenarioConfig::default();
    if let Some(n) = args.next() {
        config.node_count = n.parse().expect("node count");
    }
    if let Some(r) = args.next() {
        config.radio_range = r.parse().expect("radio range");
    }
    config.validate()?;

    for seed in 1..=5 {
        let mut rng = substream(seed, Substream::Placement);
        let topo = build_topology(&config, &mut rng)?;
        let degrees: Vec<usize> = topo.nodes().map(|n| topo.neighbor_slice(n).len()).collect();
        let min = degrees.iter().min().unwrap();
        let max = degrees.iter().max().unwrap();
        let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
        println!(
            "seed {seed}: {} nodes, range {}, degree min {min} mean {mean:.2} max {max}, connected {}",
            topo.node_count(),
            topo.radio_range(),
            topo.is_connected()
        );
    }
    Ok(())
}
