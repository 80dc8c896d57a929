use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Control-packet dropping strategy of a selfish node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(alias = "drop_req", alias = "DROP_REQ", alias = "drop-req")]
    DropReq,
    #[serde(alias = "drop_rep", alias = "DROP_REP", alias = "drop-rep")]
    DropRep,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::DropReq => "DROP_REQ",
            Strategy::DropRep => "DROP_REP",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dropreq" | "drop_req" => Ok(Strategy::DropReq),
            "droprep" | "drop_rep" => Ok(Strategy::DropRep),
            other => Err(Error::ConfigInvalid(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Every knob of one simulated scenario. All times are in seconds.
///
/// Defaults follow the evaluation setup: a 900 m square with 50 stationary
/// nodes, 1600 s runs, RREQ/RREP timeouts of 0.5 s and 3 s, alpha 0.1,
/// beta 0.4, 100 s observation windows and a 400 s detection window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area: (f64, f64),
    pub node_count: usize,
    pub radio_range: f64,
    pub sim_duration: f64,
    pub rreq_timeout: f64,
    pub rrep_timeout: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "window_W", alias = "window_w")]
    pub window_w: f64,
    #[serde(rename = "detection_D", alias = "detection_d")]
    pub detection_d: f64,
    pub selfish_fraction: f64,
    pub strategy: Strategy,
    pub drop_prob: f64,
    pub session_arrival_rate: f64,
    pub mean_session_duration: f64,
    pub per_hop_latency: f64,
    pub per_hop_jitter: f64,
    pub channel_loss_prob: f64,
    pub crosscheck_enabled: bool,
    pub seed: u64,
    pub initial_ttl: u32,
    pub route_lifetime: f64,
    pub cbr_rate: f64,
    pub packet_size: u32,
    pub min_row_total: u64,
    pub fusion_hard_ratio: f64,
    pub fusion_min_obligations: u64,
    pub fusion_confirm_min: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            area: (900.0, 900.0),
            node_count: 50,
            radio_range: 250.0,
            sim_duration: 1600.0,
            rreq_timeout: 0.5,
            rrep_timeout: 3.0,
            alpha: 0.1,
            beta: 0.4,
            window_w: 100.0,
            detection_d: 400.0,
            selfish_fraction: 0.5,
            strategy: Strategy::DropReq,
            drop_prob: 1.0,
            session_arrival_rate: 0.15,
            mean_session_duration: 60.0,
            per_hop_latency: 0.002,
            per_hop_jitter: 0.0005,
            channel_loss_prob: 0.0,
            crosscheck_enabled: true,
            seed: 1,
            initial_ttl: 35,
            route_lifetime: 10.0,
            cbr_rate: 60.0,
            packet_size: 512,
            min_row_total: 5,
            fusion_hard_ratio: 0.5,
            fusion_min_obligations: 5,
            fusion_confirm_min: 1,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

fn open_unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!(
            "{name} must lie in (0, 1), got {v}"
        )))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 4 {
            return Err(Error::ConfigInvalid(format!(
                "node_count must be at least 4, got {}",
                self.node_count
            )));
        }
        positive("area width", self.area.0)?;
        positive("area height", self.area.1)?;
        positive("radio_range", self.radio_range)?;
        positive("sim_duration", self.sim_duration)?;
        positive("rreq_timeout", self.rreq_timeout)?;
        positive("rrep_timeout", self.rrep_timeout)?;
        positive("window_W", self.window_w)?;
        positive("detection_D", self.detection_d)?;
        positive("per_hop_latency", self.per_hop_latency)?;
        positive("route_lifetime", self.route_lifetime)?;
        open_unit_interval("alpha", self.alpha)?;
        open_unit_interval("beta", self.beta)?;
        unit_interval("selfish_fraction", self.selfish_fraction)?;
        unit_interval("drop_prob", self.drop_prob)?;
        unit_interval("channel_loss_prob", self.channel_loss_prob)?;
        if !(self.fusion_hard_ratio > 0.0 && self.fusion_hard_ratio <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "fusion_hard_ratio must lie in (0, 1], got {}",
                self.fusion_hard_ratio
            )));
        }
        if self.session_arrival_rate < 0.0 || !self.session_arrival_rate.is_finite() {
            return Err(Error::ConfigInvalid(
                "session_arrival_rate must be >= 0".into(),
            ));
        }
        positive("mean_session_duration", self.mean_session_duration)?;
        if self.per_hop_jitter < 0.0 || self.per_hop_jitter >= self.per_hop_latency {
            return Err(Error::ConfigInvalid(
                "per_hop_jitter must be >= 0 and smaller than per_hop_latency".into(),
            ));
        }
        let w = self.window().as_micros();
        let d = self.detection_window().as_micros();
        if w == 0 || d < w || !d.is_multiple_of(w) {
            return Err(Error::ConfigInvalid(format!(
                "detection_D ({}) must be a positive integer multiple of window_W ({})",
                self.detection_d, self.window_w
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> SimTime {
        SimTime::from_secs_f64(self.window_w)
    }

    pub fn detection_window(&self) -> SimTime {
        SimTime::from_secs_f64(self.detection_d)
    }

    /// Number of observation windows per detection window (`d = D / W`).
    pub fn windows_per_detection(&self) -> usize {
        (self.detection_window().as_micros() / self.window().as_micros()) as usize
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.sim_duration)
    }

    pub fn selfish_count(&self) -> usize {
        (self.selfish_fraction * self.node_count as f64 + 1e-9).floor() as usize
    }
}
