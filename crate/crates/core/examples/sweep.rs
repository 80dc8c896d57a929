//! Small drop-probability sweep for one strategy, printed as CSV.
//!
//! Usage: `cargo run --release --example sweep -- [DROP_REQ|DROP_REP] [runs]`

use mesh_sentinel::sim::{sweep, SweepSpec};
use mesh_sentinel::{ScenarioConfig, Strategy};

fn main() -> mesh_sentinel::Result<()> {
    let mut args = std::env::args().skip(1);
    let strategy: Strategy = args
        .next()
        .map_or(Strategy::DropReq, |s| s.parse().expect("strategy"));
    let base = ScenarioConfig {
        sim_duration: 800.0,
        ..ScenarioConfig::default()
    };
    let mut spec = SweepSpec::new(base, strategy);
    spec.drop_probs = vec![1.0, 0.6, 0.2];
    spec.runs_per_point = args.next().map_or(3, |s| s.parse().expect("runs"));
    spec.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());

    let result = sweep(&spec)?;
    print!("{}", result.to_csv_string()?);
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    eprintln!("{} cells, {failed} failed", result.cells.len());
    Ok(())
}
