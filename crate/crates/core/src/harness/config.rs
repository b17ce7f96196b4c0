//! Experiment configuration: a flat TOML table. Missing keys take their
//! defaults except `n_rbs`, which is required; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::LearnerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[default]
    Fixed,
    Dynamic,
    Rate,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Scenario::Fixed),
            "dynamic" => Ok(Scenario::Dynamic),
            "rate" => Ok(Scenario::Rate),
            _ => Err(Error::config("scenario", format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    None,
    MaxRate,
    Pf,
    Aloha,
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Baseline::None),
            "max_rate" => Ok(Baseline::MaxRate),
            "pf" => Ok(Baseline::Pf),
            "aloha" => Ok(Baseline::Aloha),
            _ => Err(Error::config("baseline", format!("unknown baseline `{s}`"))),
        }
    }
}

/// Effective configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n_rbs: usize,
    pub k_max: usize,
    /// Fixed scenario population size.
    pub num_users: usize,
    /// Poisson arrivals per slot (dynamic, and synthetic rate traces).
    pub arrival_rate: f64,
    pub t_min: u64,
    pub t_max: u64,
    /// Mobility trace for the rate scenario; synthesized when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
    pub cell_radius: f64,
    /// Averaging windows reported per user.
    pub t_w: Vec<u64>,
    /// Window used for the per-slot Gamma columns and the run objective.
    pub slot_log_window: u64,
    pub horizon: u64,

    pub lstm_hidden: usize,
    pub value_hidden: usize,
    pub learning_rate: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub minibatch: usize,
    pub t1: u64,
    pub t2: u64,
    pub buffer_capacity: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<PathBuf>,

    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub path_loss_exponent: f64,
    pub fading_correlation: f64,

    pub baseline: Baseline,
    /// Transmit probability of the random-access baseline; `min(1, N/|K(t)|)`
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aloha_p: Option<f64>,
    pub pf_window: u64,

    pub seed: u64,
    pub out_dir: PathBuf,
    pub sequential: bool,
}

/// Same keys as [`ExperimentConfig`], all optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<Scenario>,
    n_rbs: Option<usize>,
    k_max: Option<usize>,
    num_users: Option<usize>,
    arrival_rate: Option<f64>,
    t_min: Option<u64>,
    t_max: Option<u64>,
    trace_path: Option<PathBuf>,
    cell_radius: Option<f64>,
    t_w: Option<Vec<u64>>,
    slot_log_window: Option<u64>,
    horizon: Option<u64>,
    lstm_hidden: Option<usize>,
    value_hidden: Option<usize>,
    learning_rate: Option<f64>,
    tau: Option<f64>,
    epsilon: Option<f64>,
    epsilon_decay: Option<f64>,
    epsilon_floor: Option<f64>,
    minibatch: Option<usize>,
    t1: Option<u64>,
    t2: Option<u64>,
    buffer_capacity: Option<usize>,
    warm_start: Option<PathBuf>,
    bandwidth_hz: Option<f64>,
    tx_power_dbm: Option<f64>,
    noise_psd_dbm_hz: Option<f64>,
    path_loss_exponent: Option<f64>,
    fading_correlation: Option<f64>,
    baseline: Option<Baseline>,
    aloha_p: Option<f64>,
    pf_window: Option<u64>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    sequential: Option<bool>,
}

impl ExperimentConfig {
    /// Defaults for everything but the RB count.
    pub fn with_rbs(n_rbs: usize) -> Self {
        let l = LearnerConfig::default();
        ExperimentConfig {
            scenario: Scenario::Fixed,
            n_rbs,
            k_max: 5,
            num_users: 5,
            arrival_rate: 0.02,
            t_min: 100,
            t_max: 200,
            trace_path: None,
            cell_radius: 250.0,
            t_w: vec![5, 10, 20],
            slot_log_window: 20,
            horizon: 50_000,
            lstm_hidden: l.lstm_hidden,
            value_hidden: l.value_hidden,
            learning_rate: l.learning_rate,
            tau: l.tau,
            epsilon: l.epsilon,
            epsilon_decay: l.epsilon_decay,
            epsilon_floor: l.epsilon_floor,
            minibatch: l.minibatch,
            t1: l.t1,
            t2: l.t2,
            buffer_capacity: l.buffer_capacity,
            warm_start: None,
            bandwidth_hz: 20e6,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            path_loss_exponent: 3.38,
            fading_correlation: 0.9,
            baseline: Baseline::None,
            aloha_p: None,
            pf_window: 20,
            seed: 0,
            out_dir: PathBuf::from("out"),
            sequential: false,
        }
    }

    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            lstm_hidden: self.lstm_hidden,
            value_hidden: self.value_hidden,
            learning_rate: self.learning_rate,
            tau: self.tau,
            epsilon: self.epsilon,
            epsilon_decay: self.epsilon_decay,
            epsilon_floor: self.epsilon_floor,
            minibatch: self.minibatch,
            t1: self.t1,
            t2: self.t2,
            buffer_capacity: self.buffer_capacity,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            // serde reports unknown keys as "unknown field `x`, expected ..."
            let key = msg
                .strip_prefix("unknown field `")
                .and_then(|s| s.split('`').next())
                .unwrap_or("<file>")
                .to_string();
            Error::config(key, msg)
        })?;
        let n_rbs = raw.n_rbs.ok_or_else(|| Error::config("n_rbs", "required key is missing"))?;
        let d = ExperimentConfig::with_rbs(n_rbs);
        let scenario = raw.scenario.unwrap_or(d.scenario);
        let default_horizon = if scenario == Scenario::Fixed { 50_000 } else { 100_000 };
        let cfg = ExperimentConfig {
            scenario,
            n_rbs,
            k_max: raw.k_max.unwrap_or(d.k_max),
            num_users: raw.num_users.unwrap_or(d.num_users),
            arrival_rate: raw.arrival_rate.unwrap_or(d.arrival_rate),
            t_min: raw.t_min.unwrap_or(d.t_min),
            t_max: raw.t_max.unwrap_or(d.t_max),
            trace_path: raw.trace_path,
            cell_radius: raw.cell_radius.unwrap_or(d.cell_radius),
            t_w: raw.t_w.unwrap_or(d.t_w),
            slot_log_window: raw.slot_log_window.unwrap_or(d.slot_log_window),
            horizon: raw.horizon.unwrap_or(default_horizon),
            lstm_hidden: raw.lstm_hidden.unwrap_or(d.lstm_hidden),
            value_hidden: raw.value_hidden.unwrap_or(d.value_hidden),
            learning_rate: raw.learning_rate.unwrap_or(d.learning_rate),
            tau: raw.tau.unwrap_or(d.tau),
            epsilon: raw.epsilon.unwrap_or(d.epsilon),
            epsilon_decay: raw.epsilon_decay.unwrap_or(d.epsilon_decay),
            epsilon_floor: raw.epsilon_floor.unwrap_or(d.epsilon_floor),
            minibatch: raw.minibatch.unwrap_or(d.minibatch),
            t1: raw.t1.unwrap_or(d.t1),
            t2: raw.t2.unwrap_or(d.t2),
            buffer_capacity: raw.buffer_capacity.unwrap_or(d.buffer_capacity),
            warm_start: raw.warm_start,
            bandwidth_hz: raw.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            tx_power_dbm: raw.tx_power_dbm.unwrap_or(d.tx_power_dbm),
            noise_psd_dbm_hz: raw.noise_psd_dbm_hz.unwrap_or(d.noise_psd_dbm_hz),
            path_loss_exponent: raw.path_loss_exponent.unwrap_or(d.path_loss_exponent),
            fading_correlation: raw.fading_correlation.unwrap_or(d.fading_correlation),
            baseline: raw.baseline.unwrap_or(d.baseline),
            aloha_p: raw.aloha_p,
            pf_window: raw.pf_window.unwrap_or(d.pf_window),
            seed: raw.seed.unwrap_or(d.seed),
            out_dir: raw.out_dir.unwrap_or(d.out_dir),
            sequential: raw.sequential.unwrap_or(d.sequential),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &str, bound: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::config(key, format!("must satisfy {bound}")))
            }
        }
        check(self.n_rbs >= 1, "n_rbs", ">= 1")?;
        check(self.k_max >= 1, "k_max", ">= 1")?;
        check(self.num_users >= 1, "num_users", ">= 1")?;
        check(self.arrival_rate > 0.0 && self.arrival_rate.is_finite(), "arrival_rate", "> 0")?;
        check(self.t_min >= 1, "t_min", ">= 1")?;
        check(self.t_max >= self.t_min, "t_max", ">= t_min")?;
        check(self.cell_radius > 0.0, "cell_radius", "> 0")?;
        check(!self.t_w.is_empty() && self.t_w.iter().all(|&w| w >= 1), "t_w", "non-empty, each >= 1")?;
        check(self.slot_log_window >= 1, "slot_log_window", ">= 1")?;
        check(self.horizon >= 1, "horizon", ">= 1")?;
        check(self.lstm_hidden >= 1, "lstm_hidden", ">= 1")?;
        check(self.value_hidden >= 1, "value_hidden", ">= 1")?;
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate", "> 0")?;
        check((0.0..=1.0).contains(&self.tau), "tau", "0 <= tau <= 1")?;
        check((0.0..=1.0).contains(&self.epsilon), "epsilon", "0 <= epsilon <= 1")?;
        check(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0, "epsilon_decay", "0 < decay <= 1")?;
        check(
            (0.0..=1.0).contains(&self.epsilon_floor) && self.epsilon_floor <= self.epsilon,
            "epsilon_floor",
            "0 <= floor <= epsilon",
        )?;
        check(self.minibatch >= 1, "minibatch", ">= 1")?;
        check(self.t1 >= 1, "t1", ">= 1")?;
        check(self.t2 >= 1, "t2", ">= 1")?;
        check(self.buffer_capacity >= self.minibatch, "buffer_capacity", ">= minibatch")?;
        check(self.bandwidth_hz > 0.0, "bandwidth_hz", "> 0")?;
        check(self.tx_power_dbm.is_finite(), "tx_power_dbm", "finite")?;
        check(self.noise_psd_dbm_hz.is_finite(), "noise_psd_dbm_hz", "finite")?;
        check(self.path_loss_exponent >= 2.0, "path_loss_exponent", ">= 2")?;
        check((0.0..1.0).contains(&self.fading_correlation), "fading_correlation", "0 <= xi < 1")?;
        if let Some(p) = self.aloha_p {
            check((0.0..=1.0).contains(&p), "aloha_p", "0 <= p <= 1")?;
        }
        check(self.pf_window >= 1, "pf_window", ">= 1")?;
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ExperimentConfig::parse(&text)
}
