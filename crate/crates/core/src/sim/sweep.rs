use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::engine::{run_with, RunOptions};
use super::observer::ModeRates;
use crate::error::Result;
use crate::net::{ScenarioConfig, Strategy};

pub const SEED_SCHEME: &str =
    "seed = base_seed + prob_index * runs_per_point + run_index (wrapping)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub strategy: Strategy,
    pub drop_probs: Vec<f64>,
    pub runs_per_point: usize,
    /// Worker threads; the output does not depend on it.
    pub jobs: usize,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig, strategy: Strategy) -> Self {
        SweepSpec {
            base,
            strategy,
            drop_probs: default_drop_probs(),
            runs_per_point: 10,
            jobs: 1,
        }
    }

    pub fn cell_seed(&self, prob_index: usize, run_index: usize) -> u64 {
        let cell = (prob_index * self.runs_per_point + run_index) as u64;
        self.base.seed.wrapping_add(cell)
    }
}

/// 1.0, 0.9, ..., 0.1
pub fn default_drop_probs() -> Vec<f64> {
    (1..=10).rev().map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    CrosscheckOn,
    CrosscheckOff,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::CrosscheckOn, Mode::CrosscheckOff];

    pub fn label(self) -> &'static str {
        match self {
            Mode::CrosscheckOn => "crosscheck_on",
            Mode::CrosscheckOff => "crosscheck_off",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRates {
    pub detection_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
}

impl From<&ModeRates> for FinalRates {
    fn from(r: &ModeRates) -> Self {
        FinalRates {
            detection_rate: r.detection_rate,
            false_positive_rate: r.false_positive_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub prob_index: usize,
    pub run_index: usize,
    pub drop_prob: f64,
    pub seed: u64,
    pub crosscheck_on: Option<FinalRates>,
    pub crosscheck_off: Option<FinalRates>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn rates(&self, mode: Mode) -> Option<&FinalRates> {
        match mode {
            Mode::CrosscheckOn => self.crosscheck_on.as_ref(),
            Mode::CrosscheckOff => self.crosscheck_off.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub drop_prob: f64,
    pub mode: &'static str,
    pub mean_detection_rate: Option<f64>,
    pub sd_detection_rate: Option<f64>,
    pub mean_fp_rate: Option<f64>,
    pub sd_fp_rate: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata<'a> {
    pub seed_scheme: &'static str,
    pub base_seed: u64,
    pub strategy: Strategy,
    pub drop_probs: &'a [f64],
    pub runs_per_point: usize,
    pub cells: &'a [CellResult],
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<CellResult>,
    pub rows: Vec<SweepRow>,
}

/// Mean and sample standard deviation; zero spread for a single value.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

fn run_cell(spec: &SweepSpec, prob_index: usize, run_index: usize) -> CellResult {
    let drop_prob = spec.drop_probs[prob_index];
    let seed = spec.cell_seed(prob_index, run_index);
    let config = ScenarioConfig {
        seed,
        strategy: spec.strategy,
        drop_prob,
        ..spec.base.clone()
    };
    let options = RunOptions {
        record_trace: false,
        keep_details: false,
    };
    // Fusion never feeds back into the protocol, so one simulation yields the
    // final-window rates of both modes.
    let mut cell = CellResult {
        prob_index,
        run_index,
        drop_prob,
        seed,
        crosscheck_on: None,
        crosscheck_off: None,
        error: None,
    };
    match run_with(&config, options) {
        Ok(out) => match out.metrics.final_record() {
            Some(rec) => {
                cell.crosscheck_on = Some((&rec.fused).into());
                cell.crosscheck_off = Some((&rec.statistical).into());
            }
            None => cell.error = Some("run produced no detection windows".into()),
        },
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.base.validate()?;
    for &p in &spec.drop_probs {
        ScenarioConfig {
            drop_prob: p,
            ..spec.base.clone()
        }
        .validate()?;
    }
    let total = spec.drop_probs.len() * spec.runs_per_point;
    let slots: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; total]);
    let next = AtomicUsize::new(0);
    let workers = spec.jobs.clamp(1, total.max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= total {
                    break;
                }
                let cell = run_cell(spec, idx / spec.runs_per_point, idx % spec.runs_per_point);
                slots
                    .lock()
                    .expect("no worker panics while holding the lock")[idx] = Some(cell);
            });
        }
    });
    let cells: Vec<CellResult> = slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|c| c.expect("every cell ran"))
        .collect();

    let mut rows = Vec::new();
    for (pi, &drop_prob) in spec.drop_probs.iter().enumerate() {
        let point: Vec<&CellResult> = cells.iter().filter(|c| c.prob_index == pi).collect();
        for mode in Mode::BOTH {
            let rates: Vec<&FinalRates> = point.iter().filter_map(|c| c.rates(mode)).collect();
            let dr: Vec<f64> = rates.iter().filter_map(|r| r.detection_rate).collect();
            let fp: Vec<f64> = rates.iter().filter_map(|r| r.false_positive_rate).collect();
            let dr = mean_sd(&dr);
            let fp = mean_sd(&fp);
            rows.push(SweepRow {
                strategy: spec.strategy,
                drop_prob,
                mode: mode.label(),
                mean_detection_rate: dr.map(|x| x.0),
                sd_detection_rate: dr.map(|x| x.1),
                mean_fp_rate: fp.map(|x| x.0),
                sd_fp_rate: fp.map(|x| x.1),
                runs: rates.len(),
            });
        }
    }
    Ok(SweepResult {
        spec: spec.clone(),
        cells,
        rows,
    })
}

impl SweepResult {
    pub fn row(&self, drop_prob: f64, mode: Mode) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.mode == mode.label() && (r.drop_prob - drop_prob).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn metadata(&self) -> SweepMetadata<'_> {
        SweepMetadata {
            seed_scheme: SEED_SCHEME,
            base_seed: self.spec.base.seed,
            strategy: self.spec.strategy,
            drop_probs: &self.spec.drop_probs,
            runs_per_point: self.spec.runs_per_point,
            cells: &self.cells,
        }
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metadata())?)
    }
}
