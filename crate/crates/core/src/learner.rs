//! Per-user double Q-learning agent.
//!
//! Each decision the online network scores the observation, the agent acts
//! epsilon-greedily, and once the window's feedback is in, the Q-matrix is
//! patched in the executed entries with `r_j + tau * Q_target(a*, j)`, where
//! `a*` is the online network's argmax on the next observation. The patched
//! matrix is stored and regressed onto every `t1` decisions; the target
//! network copies the online one every `t1 * t2` decisions.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fairness::MetricMode;
use crate::nn::{adam_update, masked_mse, AdamState, DuelingQNet, LstmState, NetShape, Parameterized};
use crate::policy::{
    encode_state, encoded_len, sample_uniform_action, select_action, ActionVector, AgentObservation,
    EncodedInput, QMatrix, RewardVector,
};
use crate::rng::SimRng;

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
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
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            lstm_hidden: 64,
            value_hidden: 32,
            learning_rate: 0.01,
            tau: 0.95,
            epsilon: 0.1,
            epsilon_decay: 0.995,
            epsilon_floor: 0.001,
            minibatch: 40,
            t1: 5,
            t2: 10,
            buffer_capacity: 2000,
        }
    }
}

/// Online (`alpha`) and target (`beta`) networks.
#[derive(Clone, Debug)]
pub struct DoubleDqn {
    pub online: DuelingQNet,
    pub target: DuelingQNet,
}

impl DoubleDqn {
    pub fn new<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        let online = DuelingQNet::new(shape, rng);
        let target = online.clone();
        DoubleDqn { online, target }
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online);
    }
}

/// Stored regression sample. `carried` is the LSTM state the online network
/// held when it processed `input`.
#[derive(Clone, Debug)]
pub struct Transition {
    pub input: EncodedInput,
    pub carried: LstmState,
    pub target: QMatrix,
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        ReplayBuffer { capacity, entries: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.entries[i]
    }
}

/// Training cadence and exploration rate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSchedule {
    pub t1: u64,
    pub t2: u64,
    pub epsilon: f64,
    pub decay: f64,
    pub floor: f64,
    /// Stored decisions so far (`T_training`).
    pub decisions: u64,
    pub trainings: u64,
}

/// What a stored decision triggered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct StepEvents {
    pub trained: bool,
    pub synced: bool,
}

impl TrainingSchedule {
    pub fn new(cfg: &LearnerConfig) -> Self {
        TrainingSchedule {
            t1: cfg.t1,
            t2: cfg.t2,
            epsilon: cfg.epsilon,
            decay: cfg.epsilon_decay,
            floor: cfg.epsilon_floor.min(cfg.epsilon),
            decisions: 0,
            trainings: 0,
        }
    }

    /// Counts a stored decision and reports whether training and target sync
    /// are due.
    pub fn record_decision(&mut self) -> StepEvents {
        self.decisions += 1;
        StepEvents {
            trained: self.decisions.is_multiple_of(self.t1),
            synced: self.decisions.is_multiple_of(self.t1 * self.t2),
        }
    }

    pub fn after_training(&mut self) {
        self.trainings += 1;
        self.epsilon = (self.epsilon * self.decay).max(self.floor);
    }
}

/// Outcome of [`train_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrainOutcome {
    /// Pre-step minibatch loss.
    Trained(f64),
    /// Fewer stored samples than the minibatch size.
    Skipped,
}

/// A decision awaiting its feedback.
#[derive(Clone, Debug)]
pub struct PendingDecision {
    pub input: EncodedInput,
    pub carried: LstmState,
    pub q: QMatrix,
    pub action: ActionVector,
}

/// One user's learner: networks, buffer, optimizer, cadence and carried
/// recurrent state.
#[derive(Clone, Debug)]
pub struct Agent {
    pub dqn: DoubleDqn,
    pub buffer: ReplayBuffer,
    pub schedule: TrainingSchedule,
    pub adam: AdamState,
    pub carried: LstmState,
    pub observation: AgentObservation,
    pub pending: Option<PendingDecision>,
    config: LearnerConfig,
    n_rbs: usize,
    k_max: usize,
    mode: MetricMode,
    rng: SimRng,
}

impl Agent {
    /// Fresh agent. `init_rng` seeds the weights; `rng` drives exploration,
    /// thinning and minibatch sampling.
    pub fn new(
        config: LearnerConfig,
        n_rbs: usize,
        k_max: usize,
        mode: MetricMode,
        init_rng: &mut SimRng,
        rng: SimRng,
    ) -> Self {
        let shape = NetShape {
            inputs: encoded_len(n_rbs, k_max, mode),
            n_rbs,
            k_max,
            lstm_hidden: config.lstm_hidden,
            value_hidden: config.value_hidden,
        };
        let dqn = DoubleDqn::new(shape, init_rng);
        let adam = AdamState::new(&dqn.online);
        let carried = dqn.online.initial_state();
        Agent {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            schedule: TrainingSchedule::new(&config),
            adam,
            carried,
            observation: AgentObservation::initial(),
            pending: None,
            dqn,
            config,
            n_rbs,
            k_max,
            mode,
            rng,
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.epsilon
    }

    pub fn encode(&self, obs: &AgentObservation) -> Result<EncodedInput> {
        encode_state(obs, self.n_rbs, self.k_max, self.mode)
    }

    /// Replaces both networks with `online` weights.
    pub fn load_weights(&mut self, online: &DuelingQNet) {
        self.dqn.online.copy_from(online);
        self.dqn.sync_target();
    }

    /// Scores the current observation, advances the carried state and picks
    /// a schedule for a window of `window` slots.
    pub fn act(&mut self, window: usize, active_count: usize) -> Result<ActionVector> {
        let input = self.encode(&self.observation)?;
        let (q, next_state, _) = self.dqn.online.forward(&input, &self.carried)?;
        if !q.is_finite() {
            return Err(Error::NonFinite("online network produced a non-finite Q-value".into()));
        }
        let action = choose_action(&q, window, self.n_rbs, active_count, self.k_max, self.schedule.epsilon, &mut self.rng)?;
        let carried = std::mem::replace(&mut self.carried, next_state);
        self.pending = Some(PendingDecision { input, carried, q, action: action.clone() });
        Ok(action)
    }

    /// Closes the pending decision with its rewards and next observation:
    /// builds and stores the target, then trains and syncs on schedule.
    pub fn learn(&mut self, rewards: RewardVector, next_obs: AgentObservation) -> Result<StepEvents> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Domain("learn called without a pending decision".into()))?;
        let next_input = self.encode(&next_obs)?;
        let (target, mask) =
            build_targets(&self.dqn, &pending.q, &pending.action, &rewards, &next_input, &self.carried, self.config.tau)?;
        self.buffer.push(Transition { input: pending.input, carried: pending.carried, target, mask });
        self.observation = next_obs;

        let events = self.schedule.record_decision();
        if events.trained {
            if let TrainOutcome::Trained(loss) = train_step(
                &mut self.dqn.online,
                &mut self.adam,
                &self.buffer,
                self.config.minibatch,
                self.config.learning_rate,
                &mut self.rng,
            )? {
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("training loss {loss}")));
                }
                self.schedule.after_training();
            }
        }
        if events.synced {
            self.dqn.sync_target();
        }
        Ok(events)
    }
}

/// Epsilon-greedy choice between a uniform draw from the valid action set
/// and the greedy construction from `q`.
pub fn choose_action<R: Rng + ?Sized>(
    q: &QMatrix,
    window: usize,
    n_rbs: usize,
    active_count: usize,
    k_max: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<ActionVector> {
    if window > k_max {
        return Err(Error::Schedule { window, k_max });
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        Ok(sample_uniform_action(window, n_rbs, rng))
    } else {
        select_action(q, window, n_rbs, active_count, k_max, rng)
    }
}

/// Target matrix and mask for one decision. Every executed column `j`
/// (including idle ones) gets `r_j + tau * Q_beta(a*, j)` in the row of its
/// executed sub-action, with `a*` the online argmax on the next input; all
/// other entries keep `q_online` and are masked out.
pub fn build_targets(
    dqn: &DoubleDqn,
    q_online: &QMatrix,
    action: &ActionVector,
    rewards: &RewardVector,
    next_input: &EncodedInput,
    next_carried: &LstmState,
    tau: f64,
) -> Result<(QMatrix, Vec<bool>)> {
    let (q_next_online, _, _) = dqn.online.forward(next_input, next_carried)?;
    let (q_next_target, _, _) = dqn.target.forward(next_input, next_carried)?;
    let mut target = q_online.clone();
    let mut mask = vec![false; q_online.values().len()];
    let k_max = q_online.k_max();
    for (j, &reward) in rewards.0.iter().enumerate() {
        let a_star = q_next_online.argmax_column(j);
        let executed = action.0[j];
        target.set(executed, j, reward + tau * q_next_target.get(a_star, j));
        mask[executed * k_max + j] = true;
    }
    if !target.is_finite() {
        return Err(Error::NonFinite("target Q-value".into()));
    }
    Ok((target, mask))
}

/// One Adam step on a uniform minibatch drawn without replacement.
pub fn train_step<R: Rng + ?Sized>(
    net: &mut DuelingQNet,
    adam: &mut AdamState,
    buffer: &ReplayBuffer,
    minibatch: usize,
    lr: f64,
    rng: &mut R,
) -> Result<TrainOutcome> {
    if buffer.len() < minibatch || minibatch == 0 {
        return Ok(TrainOutcome::Skipped);
    }
    let picks = index::sample(rng, buffer.len(), minibatch);
    let samples: Vec<&Transition> = picks.iter().map(|i| buffer.get(i)).collect();
    let count = samples.iter().map(|s| s.mask.iter().filter(|&&m| m).count()).sum::<usize>().max(1) as f64;
    let mut grads = net.zeros_like();
    let mut loss = 0.0;
    for s in samples {
        let (q, _, cache) = net.forward(&s.input, &s.carried)?;
        let (l, d_q) = masked_mse(&q, &s.target, &s.mask, count);
        loss += l;
        net.accumulate_gradients(&cache, &d_q, &mut grads);
    }
    if grads.tensors().iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    adam_update(net, &grads, adam, lr);
    Ok(TrainOutcome::Trained(loss))
}
