//! Reference schedulers: centralized greedy max-rate, centralized
//! proportional fair, and uncoordinated p-persistent random access.

use std::collections::BTreeMap;

use rand::Rng;

use crate::env::{TransmissionChoice, UserId};
use crate::fairness::SlidingWindow;

/// Denominator floor for users without throughput history.
pub const PF_FLOOR: f64 = 1e-6;

pub type ScheduleAssignment = BTreeMap<UserId, TransmissionChoice>;

/// Greedy assignment: `min(|K|, N)` rounds, each taking the largest
/// remaining `metric[k][n]` (smallest `(k, n)` on ties) and retiring that
/// user and RB. Users left over stay idle.
pub fn centralized_max_rate(metric: &BTreeMap<UserId, Vec<f64>>, n_rbs: usize) -> ScheduleAssignment {
    let mut out: ScheduleAssignment = metric.keys().map(|&u| (u, TransmissionChoice::IDLE)).collect();
    let mut users: Vec<UserId> = metric.keys().copied().collect();
    let mut rbs: Vec<usize> = (1..=n_rbs).collect();
    for _ in 0..users.len().min(n_rbs) {
        let mut best: Option<(usize, usize, f64)> = None;
        for (ui, u) in users.iter().enumerate() {
            for (ri, &rb) in rbs.iter().enumerate() {
                let v = metric[u][rb - 1];
                if best.is_none_or(|b| v > b.2) {
                    best = Some((ui, ri, v));
                }
            }
        }
        let (ui, ri, _) = best.expect("users and RBs remain");
        out.insert(users.remove(ui), TransmissionChoice(rbs.remove(ri)));
    }
    out
}

/// Windowed average throughput per user.
#[derive(Clone, Debug)]
pub struct PfState {
    window: u64,
    history: BTreeMap<UserId, SlidingWindow>,
}

impl PfState {
    pub fn new(window: u64) -> Self {
        PfState { window, history: BTreeMap::new() }
    }

    /// `r_ave` up to the previous slot; 0 for users without history.
    pub fn average(&self, user: UserId) -> f64 {
        self.history.get(&user).map_or(0.0, SlidingWindow::mean)
    }

    pub fn remove(&mut self, user: UserId) {
        self.history.remove(&user);
    }

    /// Drops history of users not in `active` (sorted).
    pub fn retain(&mut self, active: &[UserId]) {
        self.history.retain(|u, _| active.binary_search(u).is_ok());
    }

    /// Appends this slot's achieved rate for each listed user; unscheduled
    /// users should be listed with 0.
    pub fn update(&mut self, achieved: &BTreeMap<UserId, f64>) {
        for (&u, &r) in achieved {
            let window = self.window;
            self.history.entry(u).or_insert_with(|| SlidingWindow::new(window)).push(r);
        }
    }
}

pub fn pf_metric(rates: &BTreeMap<UserId, Vec<f64>>, pf: &PfState) -> BTreeMap<UserId, Vec<f64>> {
    rates
        .iter()
        .map(|(&u, row)| {
            let denom = pf.average(u).max(PF_FLOOR);
            (u, row.iter().map(|c| c / denom).collect())
        })
        .collect()
}

/// Max-rate greedy on the rate / average-throughput metric.
pub fn centralized_pf(rates: &BTreeMap<UserId, Vec<f64>>, pf: &PfState, n_rbs: usize) -> ScheduleAssignment {
    centralized_max_rate(&pf_metric(rates, pf), n_rbs)
}

/// Each user transmits with probability `p` on a uniformly drawn RB.
pub fn random_access_baseline<R: Rng + ?Sized>(
    users: &[UserId],
    n_rbs: usize,
    p: f64,
    rng: &mut R,
) -> ScheduleAssignment {
    users
        .iter()
        .map(|&u| {
            let choice = if rng.random::<f64>() < p {
                TransmissionChoice(rng.random_range(1..=n_rbs))
            } else {
                TransmissionChoice::IDLE
            };
            (u, choice)
        })
        .collect()
}
