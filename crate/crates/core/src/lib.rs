//! Distributed multichannel random access driven by independent per-user
//! deep Q-learning agents.
//!
//! Every active user owns a double DQN with a recurrent core and a branching
//! dueling head. At each decision time the users commit a transmission
//! schedule covering the next `K[i]` slots; the access point broadcasts
//! per-RB ACK/NAK feedback after each slot. The crate also carries the
//! fairness metrics, a correlated Rayleigh channel model for rate-based
//! experiments, centralized reference schedulers and the experiment harness
//! that wires everything together.

pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod learner;
pub mod nn;
pub mod policy;
pub mod population;
pub mod rng;

pub use env::{resolve_slot, FeedbackBit, Feedback, SlotOutcome, TransmissionChoice, UserId};
pub use error::{Error, Result};
pub use fairness::MetricMode;
pub use harness::{run_experiment, ExperimentConfig, MetricsLog, RunSummary};
pub use policy::{ActionVector, QMatrix, RewardVector};
