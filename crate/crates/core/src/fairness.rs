//! Short-term fairness metrics.
//!
//! Windowed averages use the inclusive index set
//! `[max(t_arr, t - T_w) : t]`, so once a user has been active for more than
//! `T_w` slots each average covers `T_w + 1` samples.

use std::collections::VecDeque;

use crate::env::UserId;
use crate::error::{Error, Result};

/// Whether throughput is the 0/1 success indicator or a Shannon rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MetricMode {
    #[default]
    Indicator,
    Rate,
}

/// Fair per-user share `min(1, N / |K(t)|)`.
pub fn gamma_target(active_count: usize, n_rbs: usize) -> Result<f64> {
    if active_count == 0 {
        return Err(Error::Domain("target throughput of an empty slot".into()));
    }
    Ok((n_rbs as f64 / active_count as f64).min(1.0))
}

/// Rate-mode target: the fair share of the user's best RB rate.
pub fn rate_target(active_count: usize, n_rbs: usize, rates: &[f64]) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::Domain("rate target needs at least one RB rate".into()));
    }
    let best = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(gamma_target(active_count, n_rbs)? * best)
}

/// First slot of the averaging window ending at `t`.
pub fn window_start(t: u64, t_arr: u64, window: u64) -> u64 {
    t_arr.max(t.saturating_sub(window))
}

/// Mean of `series` over the window ending at slot `t`; `series[0]` is the
/// value at slot `t_arr`.
pub fn windowed_average(series: &[f64], t: u64, t_arr: u64, window: u64) -> f64 {
    let start = (window_start(t, t_arr, window) - t_arr) as usize;
    let end = (t - t_arr) as usize;
    let slice = &series[start..=end];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Online form of [`windowed_average`]: push one sample per active slot.
#[derive(Clone, Debug)]
pub struct SlidingWindow {
    window: u64,
    samples: VecDeque<f64>,
}

impl SlidingWindow {
    pub fn new(window: u64) -> Self {
        SlidingWindow { window, samples: VecDeque::with_capacity(window as usize + 1) }
    }

    pub fn push(&mut self, value: f64) {
        if self.samples.len() as u64 == self.window + 1 {
            self.samples.pop_front();
        }
        self.samples.push_back(value);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

/// Per-user series of achieved and target instantaneous throughput.
#[derive(Clone, Debug)]
pub struct FairnessLedger {
    pub user: UserId,
    pub t_arr: u64,
    pub mode: MetricMode,
    gamma: Vec<f64>,
    target: Vec<f64>,
}

impl FairnessLedger {
    pub fn new(user: UserId, t_arr: u64, mode: MetricMode) -> Self {
        FairnessLedger { user, t_arr, mode, gamma: Vec::new(), target: Vec::new() }
    }

    pub fn from_series(
        user: UserId,
        t_arr: u64,
        mode: MetricMode,
        gamma: Vec<f64>,
        target: Vec<f64>,
    ) -> Self {
        assert_eq!(gamma.len(), target.len());
        FairnessLedger { user, t_arr, mode, gamma, target }
    }

    pub fn push(&mut self, gamma: f64, target: f64) {
        self.gamma.push(gamma);
        self.target.push(target);
    }

    /// Active duration `T_k`, counted in recorded slots.
    pub fn duration(&self) -> u64 {
        self.gamma.len() as u64
    }

    pub fn t_dep(&self) -> u64 {
        self.t_arr + self.duration() - 1
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn long_term_throughput(&self) -> f64 {
        mean(&self.gamma)
    }

    pub fn long_term_target(&self) -> f64 {
        mean(&self.target)
    }

    /// `(Gamma_k(t), Gamma_target,k(t))` for every active slot.
    pub fn windowed(&self, window: u64) -> (Vec<f64>, Vec<f64>) {
        let mut achieved = SlidingWindow::new(window);
        let mut target = SlidingWindow::new(window);
        self.gamma
            .iter()
            .zip(&self.target)
            .map(|(&g, &tg)| {
                achieved.push(g);
                target.push(tg);
                (achieved.mean(), target.mean())
            })
            .unzip()
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Average shortfall `Delta_k` of the windowed achieved throughput against
/// its windowed target. Rate mode uses the shortfall ratio; slots with a zero
/// target contribute nothing.
pub fn throughput_loss(ledger: &FairnessLedger, window: u64) -> f64 {
    let (achieved, target) = ledger.windowed(window);
    if achieved.is_empty() {
        return 0.0;
    }
    let total: f64 = achieved
        .iter()
        .zip(&target)
        .map(|(&g, &tg)| match ledger.mode {
            MetricMode::Indicator => (tg - g).max(0.0),
            MetricMode::Rate if tg > 0.0 => ((tg - g) / tg).max(0.0),
            MetricMode::Rate => 0.0,
        })
        .sum();
    total / achieved.len() as f64
}

/// Duration-weighted mean of per-user losses, from `(T_k, Delta_k)` pairs.
pub fn weighted_objective(users: &[(u64, f64)]) -> Result<f64> {
    let total: u64 = users.iter().map(|u| u.0).sum();
    if users.is_empty() || total == 0 {
        return Err(Error::Domain("weighted objective needs a completed user".into()));
    }
    Ok(users.iter().map(|&(tk, d)| tk as f64 / total as f64 * d).sum())
}
