use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{Baseline, ExperimentConfig, Scenario};
use super::metrics::{MetricsLog, RunSummary, SlotRow, SlotStats, UserRow};
use crate::baselines::{centralized_max_rate, centralized_pf, random_access_baseline, PfState};
use crate::channel::{dbm_to_watts, rate_table, FadingState, RadioParams, RateTable};
use crate::env::{resolve_slot, Feedback, TransmissionChoice, UserId};
use crate::error::{Error, Result};
use crate::fairness::{gamma_target, rate_target, throughput_loss, weighted_objective, FairnessLedger, MetricMode, SlidingWindow};
use crate::learner::Agent;
use crate::nn::{read_snapshot, DuelingQNet, NetShape};
use crate::policy::{compute_reward, encoded_len, ActionVector, AgentObservation, DecisionSchedule, SlotRates};
use crate::population::{load_trace, synthetic_trace, Population, PopulationModel};
use crate::rng::{stream, SimRng, Stream};

/// Materializes the configured population.
pub fn build_population(cfg: &ExperimentConfig) -> Result<Population> {
    let mut rng = stream(cfg.seed, Stream::Population, 0);
    match cfg.scenario {
        Scenario::Fixed => Population::materialize(&PopulationModel::FixedK { k: cfg.num_users }, cfg.horizon, &mut rng),
        Scenario::Dynamic => Population::materialize(
            &PopulationModel::PoissonDynamic { lambda: cfg.arrival_rate, t_min: cfg.t_min, t_max: cfg.t_max },
            cfg.horizon,
            &mut rng,
        ),
        Scenario::Rate => {
            let records = match &cfg.trace_path {
                Some(path) => load_trace(path)?,
                None => synthetic_trace(cfg.arrival_rate, cfg.t_min, cfg.t_max, cfg.cell_radius, cfg.horizon, &mut rng)?,
            };
            Population::materialize(&PopulationModel::TraceDriven { records }, cfg.horizon, &mut rng)
        }
    }
}

pub fn radio_params(cfg: &ExperimentConfig) -> RadioParams {
    RadioParams {
        bandwidth: cfg.bandwidth_hz,
        tx_power: dbm_to_watts(cfg.tx_power_dbm),
        noise_psd: dbm_to_watts(cfg.noise_psd_dbm_hz),
        n_rbs: cfg.n_rbs,
        path_loss_exponent: cfg.path_loss_exponent,
        fading_correlation: cfg.fading_correlation,
        cell_radius: cfg.cell_radius,
    }
}

/// Live per-user bookkeeping.
struct UserTrack {
    ledger: FairnessLedger,
    achieved: SlidingWindow,
    target: SlidingWindow,
}

/// Feedback collected by an agent over the current window.
#[derive(Default)]
struct WindowTrace {
    feedback: Vec<Feedback>,
    rates: Vec<SlotRates>,
    last_rates: Option<Vec<f64>>,
}

struct Sim<'a> {
    cfg: &'a ExperimentConfig,
    mode: MetricMode,
    pop: Population,
    radio: RadioParams,
    fading: FadingState,
    pf: PfState,
    baseline_rng: SimRng,
    warm: Option<DuelingQNet>,
    agents: BTreeMap<UserId, Agent>,
    tracks: BTreeMap<UserId, UserTrack>,
    log: MetricsLog,
    gamma_total: f64,
    nonempty_slots: u64,
    attempts: u64,
    collided: u64,
    finished: Vec<(u64, f64)>,
}

/// Runs one experiment to the horizon and returns its metrics. The result
/// depends only on the configuration (including its seed).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsLog> {
    cfg.validate()?;
    let mode = if cfg.scenario == Scenario::Rate { MetricMode::Rate } else { MetricMode::Indicator };
    let pop = build_population(cfg)?;
    let radio = radio_params(cfg);
    radio.validate()?;
    let warm = match &cfg.warm_start {
        Some(path) => {
            let shape = NetShape {
                inputs: encoded_len(cfg.n_rbs, cfg.k_max, mode),
                n_rbs: cfg.n_rbs,
                k_max: cfg.k_max,
                lstm_hidden: cfg.lstm_hidden,
                value_hidden: cfg.value_hidden,
            };
            let mut net = DuelingQNet::new(shape, &mut stream(cfg.seed, Stream::AgentInit, u64::MAX));
            read_snapshot(&mut net, &std::fs::read_to_string(path)?)?;
            Some(net)
        }
        None => None,
    };
    let mut sim = Sim {
        cfg,
        mode,
        pop,
        radio,
        fading: FadingState::default(),
        pf: PfState::new(cfg.pf_window),
        baseline_rng: stream(cfg.seed, Stream::Baseline, 0),
        warm,
        agents: BTreeMap::new(),
        tracks: BTreeMap::new(),
        log: MetricsLog {
            windows: cfg.t_w.clone(),
            slots: Vec::new(),
            users: Vec::new(),
            slot_stats: Vec::new(),
            decisions: Vec::new(),
            summary: RunSummary { sum_throughput: 0.0, weighted_objective: 0.0, collision_rate: 0.0, seed: cfg.seed },
        },
        gamma_total: 0.0,
        nonempty_slots: 0,
        attempts: 0,
        collided: 0,
        finished: Vec::new(),
    };
    sim.run()?;
    Ok(sim.log)
}

impl Sim<'_> {
    fn run(&mut self) -> Result<()> {
        let horizon = self.cfg.horizon;
        let mut schedule = DecisionSchedule::new(self.cfg.k_max);
        while schedule.next_start() <= horizon {
            let start = schedule.next_start();
            let active = self.pop.active_set(start)?;
            if active.is_empty() {
                self.close_departed(start + 1);
                schedule.skip_empty_slot();
                continue;
            }
            let window = schedule.next_decision(active.len())?;
            let actions = if self.cfg.baseline == Baseline::None {
                self.act(&active, window.len)?
            } else {
                BTreeMap::new()
            };
            let mut traces: BTreeMap<UserId, WindowTrace> =
                actions.keys().map(|&u| (u, WindowTrace::default())).collect();
            let last = window.end().min(horizon);
            for t in window.start..=last {
                self.slot(t, (t - window.start) as usize, &actions, &mut traces)?;
            }
            if window.end() <= horizon {
                self.learn(&actions, traces, window.next_start())?;
            }
            self.close_departed(window.next_start());
        }
        self.close_departed(u64::MAX);
        self.log.decisions = schedule.windows().to_vec();
        self.finish()
    }

    fn act(&mut self, active: &[UserId], window: usize) -> Result<BTreeMap<UserId, ActionVector>> {
        for &u in active {
            if !self.agents.contains_key(&u) {
                let mut init = stream(self.cfg.seed, Stream::AgentInit, u.0 as u64);
                let mut agent = Agent::new(
                    self.cfg.learner(),
                    self.cfg.n_rbs,
                    self.cfg.k_max,
                    self.mode,
                    &mut init,
                    stream(self.cfg.seed, Stream::AgentPolicy, u.0 as u64),
                );
                if let Some(w) = &self.warm {
                    agent.load_weights(w);
                }
                self.agents.insert(u, agent);
            }
        }
        let count = active.len();
        let mut acting: Vec<(UserId, &mut Agent)> =
            self.agents.iter_mut().filter(|(u, _)| active.binary_search(u).is_ok()).map(|(u, a)| (*u, a)).collect();
        let results: Vec<Result<(UserId, ActionVector)>> = if self.cfg.sequential {
            acting.iter_mut().map(|(u, a)| a.act(window, count).map(|v| (*u, v))).collect()
        } else {
            acting.par_iter_mut().map(|(u, a)| a.act(window, count).map(|v| (*u, v))).collect()
        };
        results.into_iter().collect()
    }

    fn slot(
        &mut self,
        t: u64,
        offset: usize,
        actions: &BTreeMap<UserId, ActionVector>,
        traces: &mut BTreeMap<UserId, WindowTrace>,
    ) -> Result<()> {
        let active = self.pop.active_set(t)?;
        if active.is_empty() {
            return Ok(());
        }
        let rates = if self.mode == MetricMode::Rate { Some(self.advance_channel(t, &active)?) } else { None };
        let choices = self.choices(&active, offset, actions, rates.as_ref())?;
        let outcome = resolve_slot(&choices, self.cfg.n_rbs)?;

        let n = self.cfg.n_rbs;
        let mut stats = SlotStats {
            t,
            active: active.len(),
            attempts: 0,
            successes: outcome.successes(),
            collided_attempts: 0,
            collided_rbs: outcome.collisions,
            busy_rbs: 0,
        };
        let mut busy = vec![false; n];
        let mut achieved_rates = BTreeMap::new();
        for &u in &active {
            let choice = choices[&u];
            let ok = outcome.success[&u];
            let row = rates.as_ref().and_then(|r| r.row(u));
            let (gamma, target) = match row {
                Some(row) => {
                    let g = match choice.rb() {
                        Some(rb) if ok => row[rb - 1],
                        _ => 0.0,
                    };
                    (g, rate_target(active.len(), n, row)?)
                }
                None => (if ok { 1.0 } else { 0.0 }, gamma_target(active.len(), n)?),
            };
            if let Some(rb) = choice.rb() {
                stats.attempts += 1;
                busy[rb - 1] = true;
                if !ok {
                    stats.collided_attempts += 1;
                }
            }
            achieved_rates.insert(u, gamma);
            let window = self.cfg.slot_log_window;
            let mode = self.mode;
            let track = self.tracks.entry(u).or_insert_with(|| UserTrack {
                ledger: FairnessLedger::new(u, t, mode),
                achieved: SlidingWindow::new(window),
                target: SlidingWindow::new(window),
            });
            track.ledger.push(gamma, target);
            track.achieved.push(gamma);
            track.target.push(target);
            self.log.slots.push(SlotRow {
                t,
                user: u,
                choice: choice.0,
                gamma,
                gamma_avg: track.achieved.mean(),
                target_avg: track.target.mean(),
                collided: choice.rb().is_some() && !ok,
            });
            self.gamma_total += gamma;
            if let Some(tr) = traces.get_mut(&u) {
                tr.feedback.push(outcome.feedback.clone());
                if let (Some(r), Some(table)) = (row, rates.as_ref()) {
                    tr.rates.push(SlotRates(r.to_vec()));
                    tr.last_rates = table.normalized_row(u);
                }
            }
        }
        stats.busy_rbs = busy.iter().filter(|&&b| b).count();
        self.attempts += stats.attempts as u64;
        self.collided += stats.collided_attempts as u64;
        self.nonempty_slots += 1;
        self.log.slot_stats.push(stats);
        if self.cfg.baseline == Baseline::Pf {
            self.pf.update(&achieved_rates);
        }
        Ok(())
    }

    fn advance_channel(&mut self, t: u64, active: &[UserId]) -> Result<RateTable> {
        self.fading.users.retain(|u, _| active.binary_search(u).is_ok());
        self.fading.evolve(self.cfg.fading_correlation);
        let mut positions = BTreeMap::new();
        for &u in active {
            self.fading.admit(self.cfg.seed, u, self.cfg.n_rbs);
            let pos = self
                .pop
                .record(u)
                .and_then(|r| r.position(t))
                .ok_or(Error::Trajectory { user: u, slot: t })?;
            positions.insert(u, pos);
        }
        let table = rate_table(&positions, &self.fading, &self.radio, t)?;
        if table.rates.values().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("rate table at slot {t}")));
        }
        Ok(table)
    }

    fn choices(
        &mut self,
        active: &[UserId],
        offset: usize,
        actions: &BTreeMap<UserId, ActionVector>,
        rates: Option<&RateTable>,
    ) -> Result<BTreeMap<UserId, TransmissionChoice>> {
        let n = self.cfg.n_rbs;
        let metric = || -> BTreeMap<UserId, Vec<f64>> {
            match rates {
                Some(r) => r.rates.clone(),
                None => active.iter().map(|&u| (u, vec![1.0; n])).collect(),
            }
        };
        Ok(match self.cfg.baseline {
            Baseline::None => active
                .iter()
                .map(|&u| (u, actions.get(&u).map_or(TransmissionChoice::IDLE, |a| a.choice(offset))))
                .collect(),
            Baseline::MaxRate => centralized_max_rate(&metric(), n),
            Baseline::Pf => {
                self.pf.retain(active);
                centralized_pf(&metric(), &self.pf, n)
            }
            Baseline::Aloha => {
                let p = self.cfg.aloha_p.unwrap_or_else(|| (n as f64 / active.len() as f64).min(1.0));
                random_access_baseline(active, n, p, &mut self.baseline_rng)
            }
        })
    }

    fn learn(
        &mut self,
        actions: &BTreeMap<UserId, ActionVector>,
        mut traces: BTreeMap<UserId, WindowTrace>,
        next_start: u64,
    ) -> Result<()> {
        let mut updates = Vec::new();
        for (&u, action) in actions {
            let staying = self.pop.record(u).is_some_and(|r| r.t_dep >= next_start);
            let trace = traces.remove(&u).unwrap_or_default();
            if !staying || trace.feedback.len() != action.len() {
                continue;
            }
            let rates = (self.mode == MetricMode::Rate).then_some(trace.rates.as_slice());
            let (rewards, _) = compute_reward(action, &trace.feedback, rates)?;
            let next_obs = AgentObservation {
                prev_action: action.clone(),
                prev_rewards: rewards.clone(),
                prev_rates: trace.last_rates,
            };
            updates.push((u, rewards, next_obs));
        }
        let mut work: Vec<(&mut Agent, _, _)> = Vec::with_capacity(updates.len());
        let mut updates = updates.into_iter().peekable();
        for (u, agent) in self.agents.iter_mut() {
            if updates.peek().is_some_and(|(id, _, _)| id == u) {
                let (_, r, o) = updates.next().expect("peeked");
                work.push((agent, r, o));
            }
        }
        let results: Vec<Result<_>> = if self.cfg.sequential {
            work.into_iter().map(|(a, r, o)| a.learn(r, o)).collect()
        } else {
            work.into_par_iter().map(|(a, r, o)| a.learn(r, o)).collect()
        };
        for r in results {
            r?;
        }
        Ok(())
    }

    /// Finalizes users whose departure precedes `before`.
    fn close_departed(&mut self, before: u64) {
        let gone: Vec<UserId> = self
            .tracks
            .keys()
            .copied()
            .filter(|u| self.pop.record(*u).is_none_or(|r| r.t_dep < before || before == u64::MAX))
            .collect();
        for u in gone {
            let track = self.tracks.remove(&u).expect("listed");
            self.agents.remove(&u);
            self.pf.remove(u);
            let ledger = track.ledger;
            let deltas: Vec<f64> = self.cfg.t_w.iter().map(|&w| throughput_loss(&ledger, w)).collect();
            let objective_delta = throughput_loss(&ledger, self.cfg.slot_log_window);
            self.finished.push((ledger.duration(), objective_delta));
            self.log.users.push(UserRow {
                user: u,
                t_arr: ledger.t_arr,
                t_dep: ledger.t_dep(),
                long_term_throughput: ledger.long_term_throughput(),
                long_term_target: ledger.long_term_target(),
                deltas,
            });
        }
        // users that left while the population held no one still have agents
        if before == u64::MAX {
            self.agents.clear();
        }
    }

    fn finish(&mut self) -> Result<()> {
        self.log.users.sort_by_key(|u| u.user);
        let s = &mut self.log.summary;
        s.sum_throughput = if self.nonempty_slots > 0 { self.gamma_total / self.nonempty_slots as f64 } else { 0.0 };
        s.collision_rate = if self.attempts > 0 { self.collided as f64 / self.attempts as f64 } else { 0.0 };
        s.weighted_objective = if self.finished.is_empty() { 0.0 } else { weighted_objective(&self.finished)? };
        Ok(())
    }
}
