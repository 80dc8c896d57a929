use mesh_sentinel::sim::{
    parse_trace, replay, replay_file, run, run_with, sweep, trace_to_string, RunOptions, SweepSpec,
    TraceEvent,
};
use mesh_sentinel::{Error, ScenarioConfig, Strategy};

fn short(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        sim_duration: 800.0,
        ..ScenarioConfig::default()
    }
}

#[test]
fn default_run_has_one_record_per_detection_tick() {
    let out = run_with(
        &ScenarioConfig::default(),
        RunOptions {
            record_trace: false,
            keep_details: false,
        },
    )
    .unwrap();
    let ends: Vec<f64> = out
        .metrics
        .records
        .iter()
        .map(|r| r.window_end.as_secs_f64())
        .collect();
    let expected: Vec<f64> = (4..=15).map(|i| i as f64 * 100.0).collect();
    assert_eq!(ends, expected);
    assert_eq!(out.metrics.selfish.len(), 25);
    for r in &out.metrics.records {
        for rate in [r.detection_rate, r.false_positive_rate]
            .into_iter()
            .flatten()
        {
            assert!((0.0..=1.0).contains(&rate));
        }
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = run(&short(17)).unwrap();
    let b = run(&short(17)).unwrap();
    assert_eq!(a.metrics.to_json().unwrap(), b.metrics.to_json().unwrap());
    assert_eq!(
        trace_to_string(&a.trace).unwrap(),
        trace_to_string(&b.trace).unwrap()
    );
    let c = run(&short(18)).unwrap();
    assert_ne!(
        trace_to_string(&a.trace).unwrap(),
        trace_to_string(&c.trace).unwrap()
    );
}

#[test]
fn replay_reproduces_run_metrics() {
    for strategy in [Strategy::DropReq, Strategy::DropRep] {
        let config = ScenarioConfig {
            strategy,
            drop_prob: 0.6,
            channel_loss_prob: 0.02,
            ..short(5)
        };
        let out = run(&config).unwrap();
        let text = trace_to_string(&out.trace).unwrap();
        let replayed = replay(&parse_trace(&text).unwrap(), &config).unwrap();
        assert_eq!(replayed.metrics, out.metrics, "{strategy}");
        assert_eq!(
            replayed.metrics.to_json().unwrap(),
            out.metrics.to_json().unwrap()
        );
    }
}

#[test]
fn replay_from_file_and_truncation() {
    let config = short(9);
    let out = run(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let text = trace_to_string(&out.trace).unwrap();
    std::fs::write(&path, &text).unwrap();
    assert_eq!(replay_file(&path, &config).unwrap().metrics, out.metrics);

    let cut = &text[..text.len() / 2];
    std::fs::write(&path, cut).unwrap();
    assert!(matches!(
        replay_file(&path, &config),
        Err(Error::TraceCorrupt(_))
    ));

    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&path, lines.join("\n")).unwrap();
    assert!(matches!(
        replay_file(&path, &config),
        Err(Error::TraceCorrupt(_))
    ));

    let bumped = text.replacen("\"version\":1", "\"version\":99", 1);
    std::fs::write(&path, bumped).unwrap();
    assert!(matches!(
        replay_file(&path, &config),
        Err(Error::TraceVersionMismatch { found: 99, .. })
    ));
}

#[test]
fn without_selfish_nodes_detection_rate_is_null_and_false_alarms_are_rare() {
    for seed in [1, 2, 3] {
        let config = ScenarioConfig {
            selfish_fraction: 0.0,
            channel_loss_prob: 0.0,
            seed,
            ..ScenarioConfig::default()
        };
        let out = run_with(&config, RunOptions::default()).unwrap();
        assert!(!out.metrics.records.is_empty());
        for r in &out.metrics.records {
            assert_eq!(r.detection_rate, None);
            let fp = r.false_positive_rate.unwrap();
            assert!(fp <= 0.05, "seed {seed}, window {}: fp {fp}", r.window_end);
        }
        assert!(out.metrics.evidence.values().all(|e| e.violations() == 0));
    }
}

fn tx_lines(trace: &[TraceEvent]) -> Vec<String> {
    trace
        .iter()
        .filter(|e| {
            matches!(
                e,
                TraceEvent::Tx { .. } | TraceEvent::Loss { .. } | TraceEvent::Session { .. }
            )
        })
        .map(|e| mesh_sentinel::sim::trace::to_line(e).unwrap())
        .collect()
}

#[test]
fn zero_drop_probability_is_indistinguishable_from_honesty() {
    let honest = ScenarioConfig {
        selfish_fraction: 0.0,
        ..short(23)
    };
    let harmless = ScenarioConfig {
        selfish_fraction: 0.5,
        drop_prob: 0.0,
        strategy: Strategy::DropReq,
        ..short(23)
    };
    let a = run(&honest).unwrap();
    let b = run(&harmless).unwrap();
    assert_eq!(tx_lines(&a.trace), tx_lines(&b.trace));
}

#[test]
fn sweep_is_ordered_and_deterministic() {
    let base = ScenarioConfig {
        sim_duration: 500.0,
        node_count: 30,
        seed: 40,
        ..ScenarioConfig::default()
    };
    let mut spec = SweepSpec::new(base, Strategy::DropReq);
    spec.drop_probs = vec![1.0, 0.5];
    spec.runs_per_point = 2;
    let serial = sweep(&spec).unwrap();
    spec.jobs = 3;
    let parallel = sweep(&spec).unwrap();
    assert_eq!(
        serial.to_csv_string().unwrap(),
        parallel.to_csv_string().unwrap()
    );

    let csv = serial.to_csv_string().unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "strategy,drop_prob,mode,mean_detection_rate,sd_detection_rate,mean_fp_rate,sd_fp_rate,runs"
    );
    assert_eq!(lines.count(), 4);
    let seeds: Vec<u64> = serial.cells.iter().map(|c| c.seed).collect();
    assert_eq!(seeds, vec![40, 41, 42, 43]);

    spec.runs_per_point = 1;
    let single = sweep(&spec).unwrap();
    for row in &single.rows {
        assert_eq!(row.runs, 1);
        assert_eq!(row.sd_detection_rate, Some(0.0));
    }
}

#[test]
fn invalid_configuration_is_reported_as_such() {
    let config = ScenarioConfig {
        drop_prob: 1.5,
        ..ScenarioConfig::default()
    };
    let err = run(&config).unwrap_err();
    assert!(err.is_config_error(), "{err}");
}
