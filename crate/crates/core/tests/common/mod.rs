//! Independent reference implementations and the criterion checks built on
//! them. Shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use chanaccess::baselines::centralized_max_rate;
use chanaccess::channel::{evolve_coefficient, complex_normal, shannon_rate, RadioParams};
use chanaccess::env::{resolve_slot, FeedbackBit, TransmissionChoice, UserId};
use chanaccess::fairness::{throughput_loss, weighted_objective, FairnessLedger, MetricMode};
use chanaccess::harness::{emit_metrics, run_experiment, Baseline, ExperimentConfig, MetricsLog, Scenario};
use chanaccess::learner::{build_targets, DoubleDqn};
use chanaccess::nn::{
    adam_update, masked_mse, Activation, AdamState, Dense, DuelingQNet, LstmLayer, LstmState, NetShape,
    Parameterized, Tensor,
};
use chanaccess::policy::{action_space_size, select_action, ActionVector, EncodedInput, QMatrix, RewardVector};
use chanaccess::rng::{stream, SimRng, Stream};
use rand::Rng;
use rayon::prelude::*;

pub type Check = Result<String, String>;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn rng(i: u64) -> SimRng {
    stream(20_240_601, Stream::Baseline, i)
}

fn timed(limit_s: f64, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let detail = f()?;
    let secs = start.elapsed().as_secs_f64();
    if secs >= limit_s {
        return Err(format!("{detail}; took {secs:.2}s, limit {limit_s}s"));
    }
    Ok(format!("{detail} ({secs:.3}s)"))
}

// ---------------------------------------------------------------- env

/// Every assignment of `users` transmitters to `{0..=rbs}`.
fn all_assignments(users: usize, rbs: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..users {
        out = out
            .into_iter()
            .flat_map(|p| (0..=rbs).map(move |c| [p.clone(), vec![c]].concat()))
            .collect();
    }
    out
}

pub fn env_oracle() -> Check {
    timed(1.0, || {
        let mut cases = 0;
        for users in 0..=4 {
            for rbs in 1..=3 {
                for assign in all_assignments(users, rbs) {
                    let mut counts = vec![0usize; rbs + 1];
                    for &c in &assign {
                        counts[c] += 1;
                    }
                    let choices: BTreeMap<UserId, TransmissionChoice> = assign
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| (UserId(i as u32 + 1), TransmissionChoice(c)))
                        .collect();
                    let out = resolve_slot(&choices, rbs).map_err(|e| e.to_string())?;
                    for (rb, &count) in counts.iter().enumerate().skip(1) {
                        let want = if count == 1 { FeedbackBit::Ack } else { FeedbackBit::Nak };
                        if out.feedback.get(rb) != want {
                            return Err(format!("feedback mismatch for {assign:?} on RB {rb}"));
                        }
                    }
                    for (i, &c) in assign.iter().enumerate() {
                        let want = c != 0 && counts[c] == 1;
                        if out.success[&UserId(i as u32 + 1)] != want {
                            return Err(format!("success mismatch for {assign:?}, user {}", i + 1));
                        }
                    }
                    let collided = (1..=rbs).filter(|&rb| counts[rb] >= 2).count();
                    if out.collisions != collided {
                        return Err(format!("collision count mismatch for {assign:?}"));
                    }
                    cases += 1;
                }
            }
        }
        Ok(format!("{cases} configurations agree"))
    })
}

// ---------------------------------------------------------------- action space

pub fn enumerate_actions(window: usize, n_rbs: usize) -> Vec<Vec<usize>> {
    all_assignments(window, n_rbs)
        .into_iter()
        .filter(|v| v.iter().filter(|&&a| a != 0).count() <= window.min(n_rbs))
        .collect()
}

pub fn action_space_oracle() -> Check {
    timed(1.0, || {
        if action_space_size(3, 2) != Some(19) || action_space_size(2, 3) != Some(16) {
            return Err("(3,2) and (2,3) counts differ from 19 and 16".into());
        }
        for k in 1..=4 {
            for n in 1..=4 {
                let want = enumerate_actions(k, n).len() as u128;
                if action_space_size(k, n) != Some(want) {
                    return Err(format!("|A|({k},{n}) = {:?}, enumeration gives {want}", action_space_size(k, n)));
                }
            }
        }
        Ok("(3,2)=19, (2,3)=16, all K,N <= 4 match enumeration".into())
    })
}

// ---------------------------------------------------------------- greedy selection

/// Replays the greedy rounds by sorting every open `(value, a, j)` triple.
pub fn greedy_replay(q: &QMatrix, window: usize) -> Vec<usize> {
    let mut action = vec![0; window];
    let mut open: Vec<usize> = (0..window).collect();
    for _ in 0..window.min(q.n_rbs()) {
        let mut cands: Vec<(f64, usize, usize)> =
            (0..q.rows()).flat_map(|a| open.iter().map(move |&j| (q.get(a, j), a, j))).collect();
        cands.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let (_, a, j) = cands[0];
        action[j] = a;
        open.retain(|&c| c != j);
    }
    action
}

pub fn select_action_oracle() -> Check {
    timed(1.0, || {
        let mut r = rng(1);
        for case in 0..1000 {
            let n = r.random_range(1..=4);
            let k_max = r.random_range(1..=4);
            let window = r.random_range(1..=k_max);
            // coarse values force ties
            let values = (0..(n + 1) * k_max).map(|_| r.random_range(0..6) as f64 / 2.0).collect();
            let q = QMatrix::from_rows(n, k_max, values).unwrap();
            // active <= N disables thinning
            let active = r.random_range(1..=n);
            let got = select_action(&q, window, n, active, k_max, &mut r).map_err(|e| e.to_string())?;
            let want = greedy_replay(&q, window);
            if got.0 != want {
                return Err(format!("case {case}: got {:?}, replay {want:?}", got.0));
            }
        }
        Ok("1000 random Q-matrices agree".into())
    })
}

// ---------------------------------------------------------------- targets

/// The double-DQN target patch written out entry by entry.
#[allow(clippy::too_many_arguments)]
pub fn targets_oracle(
    online: &DuelingQNet,
    target_net: &DuelingQNet,
    q_i: &QMatrix,
    action: &[usize],
    rewards: &[f64],
    next: &EncodedInput,
    carried: &LstmState,
    tau: f64,
) -> (Vec<f64>, Vec<bool>) {
    let (qa_next, _, _) = online.forward(next, carried).unwrap();
    let (qb_next, _, _) = target_net.forward(next, carried).unwrap();
    let rows = q_i.rows();
    let cols = q_i.k_max();
    let mut y = q_i.values().to_vec();
    let mut mask = vec![false; rows * cols];
    for j in 0..action.len() {
        let mut a_star = 0;
        let mut best = f64::NEG_INFINITY;
        for a in 0..rows {
            let v = qa_next.values()[a * cols + j];
            if v > best {
                best = v;
                a_star = a;
            }
        }
        let idx = action[j] * cols + j;
        y[idx] = rewards[j] + tau * qb_next.values()[a_star * cols + j];
        mask[idx] = true;
    }
    (y, mask)
}

pub fn build_targets_oracle() -> Check {
    timed(1.0, || {
        let mut r = rng(2);
        for case in 0..100 {
            let n = r.random_range(1..=3);
            let k_max = r.random_range(1..=3);
            let shape = NetShape {
                inputs: r.random_range(2..=6),
                n_rbs: n,
                k_max,
                lstm_hidden: r.random_range(2..=5),
                value_hidden: r.random_range(2..=4),
            };
            let mut dqn = DoubleDqn::new(shape, &mut r);
            dqn.target = DuelingQNet::new(shape, &mut r);
            let window = r.random_range(1..=k_max);
            let action: Vec<usize> = (0..window).map(|_| r.random_range(0..=n)).collect();
            let rewards: Vec<f64> = (0..window).map(|_| [-1.0, 0.0, 1.0][r.random_range(0..3)]).collect();
            let q_i = QMatrix::from_rows(n, k_max, (0..(n + 1) * k_max).map(|_| r.random_range(-2.0..2.0)).collect())
                .unwrap();
            let next = EncodedInput((0..shape.inputs).map(|_| r.random_range(0.0..1.0)).collect());
            let carried = LstmState {
                h: (0..shape.lstm_hidden).map(|_| r.random_range(-0.5..0.5)).collect(),
                c: (0..shape.lstm_hidden).map(|_| r.random_range(-0.5..0.5)).collect(),
            };
            let tau = r.random_range(0.0..=1.0);
            let (got, got_mask) = build_targets(
                &dqn,
                &q_i,
                &ActionVector(action.clone()),
                &RewardVector(rewards.clone()),
                &next,
                &carried,
                tau,
            )
            .map_err(|e| e.to_string())?;
            let (want, want_mask) = targets_oracle(&dqn.online, &dqn.target, &q_i, &action, &rewards, &next, &carried, tau);
            if got.values() != want.as_slice() || got_mask != want_mask {
                return Err(format!("case {case}: targets differ"));
            }
        }
        Ok("100 random nets agree".into())
    })
}

// ---------------------------------------------------------------- max-rate

/// Greedy replay: repeatedly take the best `(rate, k, n)` triple among
/// unassigned users and RBs, ties to the lowest `(k, n)`.
pub fn max_rate_replay(rates: &[Vec<f64>]) -> Vec<usize> {
    let n_rbs = rates.first().map_or(0, Vec::len);
    let mut out = vec![0; rates.len()];
    let mut users: Vec<usize> = (0..rates.len()).collect();
    let mut rbs: Vec<usize> = (0..n_rbs).collect();
    while !users.is_empty() && !rbs.is_empty() {
        let mut c: Vec<(f64, usize, usize)> =
            users.iter().flat_map(|&k| rbs.iter().map(move |&n| (rates[k][n], k, n))).collect();
        c.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let (_, k, n) = c[0];
        out[k] = n + 1;
        users.retain(|&u| u != k);
        rbs.retain(|&b| b != n);
    }
    out
}

/// Best total rate over every partial one-to-one assignment.
pub fn exhaustive_best(rates: &[Vec<f64>]) -> f64 {
    fn go(rates: &[Vec<f64>], k: usize, used: &mut Vec<bool>) -> f64 {
        if k == rates.len() {
            return 0.0;
        }
        let mut best = go(rates, k + 1, used);
        for n in 0..used.len() {
            if !used[n] {
                used[n] = true;
                best = best.max(rates[k][n] + go(rates, k + 1, used));
                used[n] = false;
            }
        }
        best
    }
    let n = rates.first().map_or(0, Vec::len);
    go(rates, 0, &mut vec![false; n])
}

fn table(rates: &[Vec<f64>]) -> BTreeMap<UserId, Vec<f64>> {
    rates.iter().enumerate().map(|(i, r)| (UserId(i as u32 + 1), r.clone())).collect()
}

pub fn max_rate_oracle() -> Check {
    timed(1.0, || {
        let mut r = rng(3);
        for case in 0..500 {
            let k = r.random_range(1..=4);
            let n = r.random_range(1..=4);
            let rates: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.random_range(0..5) as f64).collect()).collect();
            let got = centralized_max_rate(&table(&rates), n);
            let want = max_rate_replay(&rates);
            for (i, w) in want.iter().enumerate() {
                if got[&UserId(i as u32 + 1)].0 != *w {
                    return Err(format!("case {case}: greedy differs from replay on {rates:?}"));
                }
            }
        }
        let rates = vec![vec![3.0, 2.0], vec![3.0, 1.0]];
        let s = centralized_max_rate(&table(&rates), 2);
        let greedy: f64 = s.iter().filter_map(|(u, c)| c.rb().map(|rb| rates[u.0 as usize - 1][rb - 1])).sum();
        let best = exhaustive_best(&rates);
        if greedy != 4.0 || best != 5.0 {
            return Err(format!("[[3,2],[3,1]]: greedy {greedy}, optimum {best}; expected 4 and 5"));
        }
        Ok("500 random tables match replay; [[3,2],[3,1]] greedy 4 < optimum 5".into())
    })
}

// ---------------------------------------------------------------- gradients

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Worst relative error between `analytic` and central differences of
/// `loss` over every parameter of `model`.
fn fd_worst<M: Parameterized + Clone>(model: &M, analytic: &M, loss: impl Fn(&M) -> f64) -> f64 {
    let eps = 1e-5;
    let mut probe = model.clone();
    let grads: Vec<f64> = analytic.tensors().iter().flat_map(|t| t.data().to_vec()).collect();
    let mut worst: f64 = 0.0;
    let mut idx = 0;
    for ti in 0..probe.tensors().len() {
        for k in 0..probe.tensors()[ti].len() {
            let orig = probe.tensors()[ti].data()[k];
            probe.tensors_mut()[ti].data_mut()[k] = orig + eps;
            let up = loss(&probe);
            probe.tensors_mut()[ti].data_mut()[k] = orig - eps;
            let down = loss(&probe);
            probe.tensors_mut()[ti].data_mut()[k] = orig;
            worst = worst.max(rel_err(grads[idx], (up - down) / (2.0 * eps)));
            idx += 1;
        }
    }
    worst
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn uniform_vec(n: usize, lo: f64, hi: f64, r: &mut SimRng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

/// One randomized gradient check; cycles over dense, ReLU dense, LSTM and
/// the full dueling network.
fn gradient_instance(i: u64) -> f64 {
    let mut r = rng(1000 + i);
    match i % 4 {
        0 | 1 => {
            let act = if i.is_multiple_of(4) { Activation::Identity } else { Activation::Relu };
            let (nin, nout) = (r.random_range(1..=6), r.random_range(1..=6));
            let mut layer = Dense::new(nin, nout, act, &mut r);
            layer.bias.data_mut().iter_mut().for_each(|b| *b = r.random_range(-0.5..0.5));
            let x = uniform_vec(nin, -1.0, 1.0, &mut r);
            let w = uniform_vec(nout, -1.0, 1.0, &mut r);
            let y = layer.forward(&x);
            let mut g = layer.zeros_like();
            layer.backward(&x, &y, &w, &mut g);
            fd_worst(&layer, &g, |l| dot(&l.forward(&x), &w))
        }
        2 => {
            let (nin, h) = (r.random_range(1..=5), r.random_range(1..=5));
            let layer = LstmLayer::new(nin, h, &mut r);
            let x = uniform_vec(nin, -1.0, 1.0, &mut r);
            let s = LstmState { h: uniform_vec(h, -0.5, 0.5, &mut r), c: uniform_vec(h, -1.0, 1.0, &mut r) };
            let w = uniform_vec(h, -1.0, 1.0, &mut r);
            let (_, cache) = layer.step(&x, &s).unwrap();
            let mut g = layer.zeros_like();
            layer.backward(&cache, &w, &mut g);
            fd_worst(&layer, &g, |l| dot(&l.step(&x, &s).unwrap().0.h, &w))
        }
        _ => {
            let shape = NetShape {
                inputs: r.random_range(2..=5),
                n_rbs: r.random_range(1..=3),
                k_max: r.random_range(1..=3),
                lstm_hidden: r.random_range(2..=5),
                value_hidden: r.random_range(2..=4),
            };
            let net = DuelingQNet::new(shape, &mut r);
            let cells = (shape.n_rbs + 1) * shape.k_max;
            let x = EncodedInput(uniform_vec(shape.inputs, -1.0, 1.0, &mut r));
            let s = LstmState {
                h: uniform_vec(shape.lstm_hidden, -0.5, 0.5, &mut r),
                c: uniform_vec(shape.lstm_hidden, -1.0, 1.0, &mut r),
            };
            let t = QMatrix::from_rows(shape.n_rbs, shape.k_max, uniform_vec(cells, -2.0, 2.0, &mut r)).unwrap();
            let mask: Vec<bool> = (0..cells).map(|c| c == 0 || r.random_bool(0.5)).collect();
            let (_, g) = net.backward(&x, &s, &t, &mask).unwrap();
            let count = mask.iter().filter(|&&m| m).count() as f64;
            fd_worst(&net, &g, |m| {
                let (q, _, _) = m.forward(&x, &s).unwrap();
                masked_mse(&q, &t, &mask, count).0
            })
        }
    }
}

pub fn gradient_check() -> Check {
    let worst = (0..100).map(gradient_instance).fold(0.0, f64::max);
    if worst <= 1e-4 {
        Ok(format!("100 layer instances, worst relative error {worst:.2e}"))
    } else {
        Err(format!("worst relative error {worst:.2e} > 1e-4"))
    }
}

pub fn advantage_normalization() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let mut r = rng(5000 + i);
        let shape = NetShape { inputs: 7, n_rbs: r.random_range(1..=5), k_max: r.random_range(1..=5), lstm_hidden: 6, value_hidden: 4 };
        let net = DuelingQNet::new(shape, &mut r);
        let x = EncodedInput(uniform_vec(7, -1.0, 1.0, &mut r));
        let s = net.initial_state();
        let (q, next, _) = net.forward(&x, &s).map_err(|e| e.to_string())?;
        let v = net.value_out.forward(&net.value_hidden.forward(&next.h))[0];
        for j in 0..shape.k_max {
            let sum_b: f64 = (0..q.rows()).map(|a| q.get(a, j) - v).sum();
            worst = worst.max(sum_b.abs());
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max |sum_a B_j| = {worst:.1e}"))
    } else {
        Err(format!("max |sum_a B_j| = {worst:.1e} > 1e-9"))
    }
}

pub fn adam_first_step() -> Check {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let init = uniform_vec(8, -3.0, 3.0, &mut r);
        let g = uniform_vec(8, -2.0, 2.0, &mut r);
        let lr = r.random_range(1e-4..0.1);
        let mut p = Tensor::from_vec(&[8], init.clone());
        let mut st = AdamState::new(&p);
        adam_update(&mut p, &Tensor::from_vec(&[8], g.clone()), &mut st, lr);
        for ((w, w0), gi) in p.data().iter().zip(&init).zip(&g) {
            // m_hat = g and v_hat = g^2 after bias correction
            let want = w0 - lr * gi / (gi.abs() + 1e-8);
            worst = worst.max((w - want).abs());
        }
    }
    if worst <= 1e-9 {
        Ok(format!("max deviation from closed form {worst:.1e}"))
    } else {
        Err(format!("max deviation {worst:.1e} > 1e-9"))
    }
}

// ---------------------------------------------------------------- channel

pub fn jakes_statistics() -> Check {
    let mut r = stream(3, Stream::Fading, 0);
    let steps = 100_000;
    let xi = 0.9;
    let mut h = complex_normal(1.0, &mut r);
    let (mut power, mut lag) = (0.0, 0.0);
    for _ in 0..steps {
        let next = evolve_coefficient(h, xi, &mut r);
        power += next.norm_sqr();
        lag += (next * h.conj()).re;
        h = next;
    }
    let power = power / steps as f64;
    let rho = lag / steps as f64 / power;
    if (power - 1.0).abs() <= 0.05 && (rho - 0.9).abs() <= 0.02 {
        Ok(format!("E|h|^2 = {power:.4}, lag-1 correlation {rho:.4}"))
    } else {
        Err(format!("E|h|^2 = {power:.4} (want 1 +- 0.05), correlation {rho:.4} (want 0.9 +- 0.02)"))
    }
}

pub fn shannon_unit_snr() -> Check {
    // powers of two keep the SNR exactly 1
    let exact = RadioParams {
        bandwidth: 2f64.powi(21),
        tx_power: 1.0,
        noise_psd: 2f64.powi(-20),
        ..RadioParams::defaults(2, 250.0)
    };
    let got = shannon_rate(1.0, &exact);
    if got != exact.bandwidth / 2.0 {
        return Err(format!("rate at SNR 1 is {got}, want {}", exact.bandwidth / 2.0));
    }
    let p = RadioParams::defaults(5, 250.0);
    let w = p.bandwidth / 5.0;
    let gain = w * p.noise_psd / p.tx_power;
    let dflt = shannon_rate(gain, &p);
    if (dflt - w).abs() > 1e-12 * w {
        return Err(format!("default parameters: rate at SNR 1 is {dflt}, want {w}"));
    }
    Ok(format!("rate at SNR 1 = W/N exactly ({got}); default radio within 1e-12"))
}

// ---------------------------------------------------------------- fairness

/// `Delta_k` straight from its definition: per slot, average both series
/// over `[max(t_arr, t - T_w) : t]` and accumulate the clamped shortfall.
pub fn delta_oracle(gamma: &[f64], target: &[f64], t_arr: u64, window: u64, mode: MetricMode) -> f64 {
    let t_dep = t_arr + gamma.len() as u64 - 1;
    let mut total = 0.0;
    for t in t_arr..=t_dep {
        let lo = std::cmp::max(t_arr, t.saturating_sub(window));
        let (mut g, mut tg, mut n) = (0.0, 0.0, 0.0);
        for s in lo..=t {
            g += gamma[(s - t_arr) as usize];
            tg += target[(s - t_arr) as usize];
            n += 1.0;
        }
        let (g, tg) = (g / n, tg / n);
        total += match mode {
            MetricMode::Indicator => f64::max(tg - g, 0.0),
            MetricMode::Rate => {
                if tg == 0.0 {
                    0.0
                } else {
                    f64::max((tg - g) / tg, 0.0)
                }
            }
        };
    }
    total / gamma.len() as f64
}

pub fn fairness_oracle() -> Check {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    let mut weight_dev: f64 = 0.0;
    for case in 0..200 {
        let mode = if case % 2 == 0 { MetricMode::Indicator } else { MetricMode::Rate };
        let users = r.random_range(1..=20);
        let mut pairs = Vec::new();
        let mut direct = 0.0;
        let mut total_t = 0u64;
        let mut entries = Vec::new();
        for u in 0..users {
            let len = r.random_range(1..=120);
            let t_arr = r.random_range(1..=500);
            let gamma: Vec<f64> = match mode {
                MetricMode::Indicator => (0..len).map(|_| r.random_range(0..2) as f64).collect(),
                MetricMode::Rate => (0..len).map(|_| r.random_range(0.0..5e6)).collect(),
            };
            let target: Vec<f64> = match mode {
                MetricMode::Indicator => (0..len).map(|_| [0.2, 0.4, 0.5, 1.0][r.random_range(0..4)]).collect(),
                MetricMode::Rate => (0..len).map(|_| if r.random_bool(0.05) { 0.0 } else { r.random_range(0.0..4e6) }).collect(),
            };
            let window = [5, 10, 20][r.random_range(0..3)];
            let ledger = FairnessLedger::from_series(UserId(u), t_arr, mode, gamma.clone(), target.clone());
            let got = throughput_loss(&ledger, window);
            let want = delta_oracle(&gamma, &target, t_arr, window, mode);
            worst = worst.max((got - want).abs());
            pairs.push((len, got));
            entries.push((len, want));
            total_t += len;
        }
        let mut weight_sum = 0.0;
        for &(tk, d) in &entries {
            let wk = tk as f64 / total_t as f64;
            weight_sum += wk;
            direct += wk * d;
        }
        weight_dev = weight_dev.max((weight_sum - 1.0).abs());
        let obj = weighted_objective(&pairs).map_err(|e| e.to_string())?;
        worst = worst.max((obj - direct).abs());
    }
    if worst <= 1e-12 && weight_dev <= 1e-12 {
        Ok(format!("max deviation {worst:.1e}; weights sum to 1 within {weight_dev:.1e}"))
    } else {
        Err(format!("max deviation {worst:.1e}, weight-sum deviation {weight_dev:.1e}"))
    }
}

// ---------------------------------------------------------------- simulation

pub fn fixed_config(users: usize, rbs: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_rbs(rbs);
    c.scenario = Scenario::Fixed;
    c.num_users = users;
    c.k_max = users;
    c.horizon = 50_000;
    c.seed = seed;
    c
}

pub fn rate_config(seed: u64, baseline: Baseline) -> ExperimentConfig {
    let mut c = ExperimentConfig::with_rbs(5);
    c.scenario = Scenario::Rate;
    c.k_max = 5;
    c.horizon = 12_000;
    c.trace_path = Some(fixture("trace60.csv"));
    c.baseline = baseline;
    c.seed = seed;
    c
}

pub const SEEDS: [u64; 3] = [1, 2, 3];

pub fn run_seeds(make: impl Fn(u64) -> ExperimentConfig + Sync) -> Result<Vec<MetricsLog>, String> {
    SEEDS.par_iter().map(|&s| run_experiment(&make(s)).map_err(|e| e.to_string())).collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn delta_index(log: &MetricsLog, w: u64) -> Result<usize, String> {
    log.windows.iter().position(|&x| x == w).ok_or_else(|| format!("T_w = {w} not configured"))
}

pub fn throughput_and_fairness(logs: &[MetricsLog], label: &str) -> Check {
    let thr = mean(logs.iter().map(|l| l.summary.sum_throughput));
    let idx = delta_index(&logs[0], 20)?;
    let delta = mean(logs.iter().map(|l| l.mean_delta(idx)));
    let detail = format!("{label}: mean sum throughput {thr:.4} (>= 1.70), mean Delta(T_w=20) {delta:.4} (<= 0.10)");
    if thr >= 1.70 && delta <= 0.10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn delta_monotone(logs: &[MetricsLog]) -> Check {
    let d: Vec<f64> = [5, 10, 20]
        .iter()
        .map(|&w| delta_index(&logs[0], w).map(|i| mean(logs.iter().map(|l| l.mean_delta(i)))))
        .collect::<Result<_, _>>()?;
    let detail = format!("Delta(5) {:.4} >= Delta(10) {:.4} >= Delta(20) {:.4}", d[0], d[1], d[2]);
    if d[0] >= d[1] && d[1] >= d[2] {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn collision_suppression(logs: &[MetricsLog], horizon: u64) -> Check {
    let rates: Vec<f64> = logs.iter().map(|l| l.collision_rate_after(horizon / 2)).collect();
    let worst = rates.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "second-half collided/attempted per seed: {}",
        rates.iter().map(|r| format!("{:.4}", r)).collect::<Vec<_>>().join(", ")
    );
    if worst <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn determinism() -> Check {
    let configs = [
        ExperimentConfig { horizon: 3_000, sequential: true, ..fixed_config(5, 2, 11) },
        ExperimentConfig {
            scenario: Scenario::Dynamic,
            horizon: 3_000,
            sequential: true,
            ..fixed_config(5, 2, 12)
        },
        ExperimentConfig { horizon: 2_000, sequential: true, ..rate_config(13, Baseline::None) },
    ];
    for cfg in &configs {
        let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
        for d in &dirs {
            let log = run_experiment(cfg).map_err(|e| e.to_string())?;
            emit_metrics(&log, d.path()).map_err(|e| e.to_string())?;
        }
        for f in ["slots.csv", "users.csv", "summary.csv"] {
            let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!("{:?} scenario: {f} differs between runs", cfg.scenario));
            }
        }
    }
    Ok("fixed, dynamic and rate runs reproduce slots/users/summary CSVs byte for byte".into())
}

pub fn rate_smoke() -> Check {
    let rl = run_seeds(|s| rate_config(s, Baseline::None))?;
    let aloha = run_seeds(|s| rate_config(s, Baseline::Aloha))?;
    let mut lines = Vec::new();
    let mut ok = true;
    for ((s, a), b) in SEEDS.iter().zip(&rl).zip(&aloha) {
        let finite = a.slots.iter().all(|r| r.gamma.is_finite() && r.gamma_avg.is_finite() && r.target_avg.is_finite())
            && a.users.iter().all(|u| u.long_term_throughput.is_finite() && u.deltas.iter().all(|d| d.is_finite()));
        let (x, y) = (a.summary.sum_throughput, b.summary.sum_throughput);
        ok &= finite && x.is_finite() && x > y;
        lines.push(format!("seed {s}: RL {:.1} Mbit/s vs ALOHA {:.1} Mbit/s{}", x / 1e6, y / 1e6, if finite { "" } else { " (non-finite values)" }));
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}
