//! Records a run to a JSONL trace, replays the file and checks the metrics
//! agree, then shows that a damaged trace is rejected.

use mesh_sentinel::sim::{replay_file, run, write_trace};
use mesh_sentinel::{Error, ScenarioConfig};

fn main() -> mesh_sentinel::Result<()> {
    let config = ScenarioConfig {
        sim_duration: 500.0,
        node_count: 30,
        ..ScenarioConfig::default()
    };
    let out = run(&config)?;
    let path =
        std::env::temp_dir().join(format!("mesh-sentinel-replay-{}.jsonl", std::process::id()));
    write_trace(
        std::io::BufWriter::new(std::fs::File::create(&path)?),
        &out.trace,
    )?;
    println!("wrote {} events to {}", out.trace.len(), path.display());

    let replayed = replay_file(&path, &config)?;
    println!(
        "metrics identical after replay: {}",
        replayed.metrics == out.metrics
    );

    let text = std::fs::read_to_string(&path)?;
    std::fs::write(&path, &text[..text.len() * 2 / 3])?;
    match replay_file(&path, &config) {
        Err(e @ Error::TraceCorrupt(_)) => println!("truncated trace rejected: {e}"),
        other => println!(
            "unexpected result for truncated trace: {:?}",
            other.map(|r| r.metrics.tx_count)
        ),
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
