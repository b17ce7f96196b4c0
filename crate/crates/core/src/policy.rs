//! Decision-window protocol.
//!
//! Time is cut into decision windows: the window opening at `T[i]` spans
//! `K[i] = min(|K(T[i])|, k_max)` slots and every active user commits one
//! sub-action per slot. A schedule is an [`ActionVector`] with at most
//! `min(K[i], N)` transmissions, built greedily from the `(N+1) x k_max`
//! [`QMatrix`] produced by the user's network.

use rand::seq::index;
use rand::Rng;

use crate::env::{Feedback, TransmissionChoice};
use crate::error::{Error, Result};
use crate::fairness::MetricMode;

/// One decision window `[start : start + len - 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecisionWindow {
    pub start: u64,
    pub len: usize,
}

impl DecisionWindow {
    pub fn end(&self) -> u64 {
        self.start + self.len as u64 - 1
    }

    pub fn next_start(&self) -> u64 {
        self.start + self.len as u64
    }
}

/// Global window schedule shared by all agents.
#[derive(Clone, Debug)]
pub struct DecisionSchedule {
    k_max: usize,
    next_start: u64,
    windows: Vec<DecisionWindow>,
}

impl DecisionSchedule {
    pub fn new(k_max: usize) -> Self {
        assert!(k_max >= 1, "k_max must be positive");
        DecisionSchedule { k_max, next_start: 1, windows: Vec::new() }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Slot at which the next window opens.
    pub fn next_start(&self) -> u64 {
        self.next_start
    }

    /// Opens the window at the current boundary given the number of users
    /// active there.
    pub fn next_decision(&mut self, active_count: usize) -> Result<DecisionWindow> {
        if active_count == 0 {
            return Err(Error::Domain("decision time with no active users".into()));
        }
        let window = DecisionWindow { start: self.next_start, len: active_count.min(self.k_max) };
        self.next_start = window.next_start();
        self.windows.push(window);
        Ok(window)
    }

    /// Drops an empty slot from the timeline without opening a window.
    pub fn skip_empty_slot(&mut self) {
        self.next_start += 1;
    }

    pub fn windows(&self) -> &[DecisionWindow] {
        &self.windows
    }
}

/// Schedule for one window: entry `j` is the RB used in slot `T[i] + j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ActionVector(pub Vec<usize>);

impl ActionVector {
    pub fn idle(len: usize) -> Self {
        ActionVector(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn choice(&self, slot: usize) -> TransmissionChoice {
        TransmissionChoice(self.0[slot])
    }

    pub fn transmissions(&self) -> usize {
        self.0.iter().filter(|&&a| a != 0).count()
    }

    /// Membership in the valid action set for `N = n_rbs`.
    pub fn is_valid(&self, n_rbs: usize) -> bool {
        self.0.iter().all(|&a| a <= n_rbs) && self.transmissions() <= self.len().min(n_rbs)
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RewardVector(pub Vec<f64>);

impl RewardVector {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// What an agent saw over its previous window.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AgentObservation {
    pub prev_action: ActionVector,
    pub prev_rewards: RewardVector,
    /// Rate mode only: the last slot's per-RB rates divided by their maximum.
    pub prev_rates: Option<Vec<f64>>,
}

impl AgentObservation {
    /// Observation of a freshly arrived user: nothing seen yet.
    pub fn initial() -> Self {
        AgentObservation::default()
    }
}

/// Fixed-length network input.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInput(pub Vec<f64>);

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn encoded_len(n_rbs: usize, k_max: usize, mode: MetricMode) -> usize {
    let base = (n_rbs + 1) * k_max + k_max;
    match mode {
        MetricMode::Indicator => base,
        MetricMode::Rate => base + n_rbs,
    }
}

/// One-hot action block (column-major by window slot), then the reward
/// block, then the rate block in rate mode. Columns past the previous
/// window's length stay zero.
pub fn encode_state(
    obs: &AgentObservation,
    n_rbs: usize,
    k_max: usize,
    mode: MetricMode,
) -> Result<EncodedInput> {
    let len = obs.prev_action.len();
    if len > k_max || obs.prev_rewards.0.len() > k_max {
        return Err(Error::Encoding { len: len.max(obs.prev_rewards.0.len()), k_max });
    }
    if obs.prev_rewards.0.len() != len {
        return Err(Error::Shape {
            context: "observation rewards",
            expected: len,
            got: obs.prev_rewards.0.len(),
        });
    }
    let mut values = vec![0.0; encoded_len(n_rbs, k_max, mode)];
    for (j, &a) in obs.prev_action.0.iter().enumerate() {
        if a > n_rbs {
            return Err(Error::Domain(format!("sub-action {a} exceeds N = {n_rbs}")));
        }
        values[j * (n_rbs + 1) + a] = 1.0;
    }
    let reward_base = (n_rbs + 1) * k_max;
    values[reward_base..reward_base + len].copy_from_slice(&obs.prev_rewards.0);
    if mode == MetricMode::Rate {
        if let Some(rates) = &obs.prev_rates {
            if rates.len() != n_rbs {
                return Err(Error::Shape { context: "observed rates", expected: n_rbs, got: rates.len() });
            }
            values[reward_base + k_max..].copy_from_slice(rates);
        }
    }
    Ok(EncodedInput(values))
}

/// `(N+1) x k_max` Q-values, row `a` = sub-action, column `j` = window slot.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    n_rbs: usize,
    k_max: usize,
    values: Vec<f64>,
}

impl QMatrix {
    pub fn zeros(n_rbs: usize, k_max: usize) -> Self {
        QMatrix { n_rbs, k_max, values: vec![0.0; (n_rbs + 1) * k_max] }
    }

    /// From row-major values, `values[a * k_max + j]`.
    pub fn from_rows(n_rbs: usize, k_max: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != (n_rbs + 1) * k_max {
            return Err(Error::Shape { context: "QMatrix", expected: (n_rbs + 1) * k_max, got: values.len() });
        }
        Ok(QMatrix { n_rbs, k_max, values })
    }

    pub fn n_rbs(&self) -> usize {
        self.n_rbs
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn rows(&self) -> usize {
        self.n_rbs + 1
    }

    pub fn get(&self, a: usize, j: usize) -> f64 {
        self.values[a * self.k_max + j]
    }

    pub fn set(&mut self, a: usize, j: usize, v: f64) {
        self.values[a * self.k_max + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Best sub-action in column `j`, lowest index on ties.
    pub fn argmax_column(&self, j: usize) -> usize {
        let mut best = 0;
        for a in 1..self.rows() {
            if self.get(a, j) > self.get(best, j) {
                best = a;
            }
        }
        best
    }
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `|A[i]|`: vectors in `[0:N]^K` with at most `min(K, N)` non-zero entries.
/// `None` when the count overflows `u128`.
pub fn action_space_size(window: usize, n_rbs: usize) -> Option<u128> {
    let mut total: u128 = 0;
    for m in 0..=window.min(n_rbs) {
        let term = binomial(window, m)?.checked_mul((n_rbs as u128).checked_pow(m as u32)?)?;
        total = total.checked_add(term)?;
    }
    Some(total)
}

/// Uniform draw from `A[i]`: pick the transmission count `m` with weight
/// `C(K, m) N^m`, then `m` distinct slots, then an RB for each.
pub fn sample_uniform_action<R: Rng + ?Sized>(window: usize, n_rbs: usize, rng: &mut R) -> ActionVector {
    let max_tx = window.min(n_rbs);
    // log-weights keep large (K, N) finite
    let log_w: Vec<f64> = (0..=max_tx)
        .map(|m| ln_binomial(window, m) + m as f64 * (n_rbs as f64).ln())
        .collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut m = max_tx;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            m = i;
            break;
        }
        u -= w;
    }
    let mut action = vec![0; window];
    for slot in index::sample(rng, window, m) {
        action[slot] = rng.random_range(1..=n_rbs);
    }
    ActionVector(action)
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Probability that thinning keeps a scheduled entry.
pub fn thinning_keep_probability(n_rbs: usize, k_max: usize, active_count: usize) -> f64 {
    if n_rbs < active_count {
        (n_rbs.max(k_max) as f64 / active_count as f64).min(1.0)
    } else {
        1.0
    }
}

/// Greedy construction of a window schedule from `q`: `min(K, N)` rounds,
/// each taking the largest entry over unassigned columns (lowest sub-action,
/// then lowest column on ties). Entries are then thinned independently when
/// more users are active than RBs exist.
pub fn select_action<R: Rng + ?Sized>(
    q: &QMatrix,
    window: usize,
    n_rbs: usize,
    active_count: usize,
    k_max: usize,
    rng: &mut R,
) -> Result<ActionVector> {
    if window > k_max || window > q.k_max() {
        return Err(Error::Schedule { window, k_max });
    }
    if q.n_rbs() != n_rbs {
        return Err(Error::Shape { context: "QMatrix rows", expected: n_rbs + 1, got: q.rows() });
    }
    let mut action = greedy_schedule(q, window);
    let keep = thinning_keep_probability(n_rbs, k_max, active_count);
    if keep < 1.0 {
        for entry in action.0.iter_mut() {
            if rng.random::<f64>() >= keep {
                *entry = 0;
            }
        }
    }
    Ok(action)
}

fn greedy_schedule(q: &QMatrix, window: usize) -> ActionVector {
    let mut action = vec![0; window];
    let mut open = vec![true; window];
    for _ in 0..window.min(q.n_rbs()) {
        let mut best: Option<(usize, usize)> = None;
        for a in 0..q.rows() {
            for j in (0..window).filter(|&j| open[j]) {
                if best.is_none_or(|(ba, bj)| q.get(a, j) > q.get(ba, bj)) {
                    best = Some((a, j));
                }
            }
        }
        let (a, j) = best.expect("an open column remains");
        action[j] = a;
        open[j] = false;
    }
    ActionVector(action)
}

/// Rates seen by one user in one slot, used by rate-mode rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotRates(pub Vec<f64>);

impl SlotRates {
    fn ratio(&self, rb: usize) -> f64 {
        let best = self.0.iter().copied().fold(0.0, f64::max);
        if best > 0.0 {
            self.0[rb - 1] / best
        } else {
            0.0
        }
    }
}

/// Per-slot rewards for an executed window and their sum. `rates` is `Some`
/// in rate mode, one entry per observed slot.
pub fn compute_reward(
    action: &ActionVector,
    feedback: &[Feedback],
    rates: Option<&[SlotRates]>,
) -> Result<(RewardVector, f64)> {
    if feedback.len() > action.len() {
        return Err(Error::Shape { context: "window feedback", expected: action.len(), got: feedback.len() });
    }
    if let Some(r) = rates {
        if r.len() != feedback.len() {
            return Err(Error::Shape { context: "window rates", expected: feedback.len(), got: r.len() });
        }
    }
    let rewards: Vec<f64> = feedback
        .iter()
        .enumerate()
        .map(|(j, fb)| {
            let choice = action.choice(j);
            let Some(rb) = choice.rb() else { return 0.0 };
            let bonus = rates.map_or(0.0, |r| r[j].ratio(rb));
            if fb.acked(choice) {
                1.0 + bonus
            } else {
                -1.0 + bonus
            }
        })
        .collect();
    let total = rewards.iter().sum();
    Ok((RewardVector(rewards), total))
}
