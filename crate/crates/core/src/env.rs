//! Slot-synchronous multichannel medium.
//!
//! A slot is resolved by counting transmitters per RB: an RB with exactly one
//! transmitter is ACKed, everything else (idle or collided) is NAKed. The
//! access point broadcasts the same N-bit feedback vector to every user.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Stable user identifier, assigned in arrival order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-slot access decision of one user: 0 is idle, `n` in `1..=N` sends one
/// packet on RB `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TransmissionChoice(pub usize);

impl TransmissionChoice {
    pub const IDLE: TransmissionChoice = TransmissionChoice(0);

    pub fn rb(self) -> Option<usize> {
        (self.0 != 0).then_some(self.0)
    }

    pub fn is_idle(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeedbackBit {
    Ack,
    Nak,
}

/// ACK/NAK per RB, indexed from RB 1 at position 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Feedback(Vec<FeedbackBit>);

impl Feedback {
    pub fn all_nak(n_rbs: usize) -> Self {
        Feedback(vec![FeedbackBit::Nak; n_rbs])
    }

    pub fn from_bits(bits: Vec<FeedbackBit>) -> Self {
        Feedback(bits)
    }

    pub fn n_rbs(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &[FeedbackBit] {
        &self.0
    }

    /// Feedback for 1-based RB `rb`.
    pub fn get(&self, rb: usize) -> FeedbackBit {
        self.0[rb - 1]
    }

    /// Whether a user that made `choice` succeeded.
    pub fn acked(&self, choice: TransmissionChoice) -> bool {
        choice.rb().is_some_and(|rb| self.get(rb) == FeedbackBit::Ack)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotOutcome {
    pub feedback: Feedback,
    pub success: BTreeMap<UserId, bool>,
    /// RBs with two or more transmitters.
    pub collisions: usize,
}

impl SlotOutcome {
    pub fn successes(&self) -> usize {
        self.success.values().filter(|&&s| s).count()
    }
}

pub fn resolve_slot(
    choices: &BTreeMap<UserId, TransmissionChoice>,
    n_rbs: usize,
) -> Result<SlotOutcome> {
    if n_rbs == 0 {
        return Err(Error::Domain("at least one RB is required".into()));
    }
    let mut transmitters = vec![0usize; n_rbs];
    for (&user, &choice) in choices {
        match choice.rb() {
            Some(rb) if rb > n_rbs => {
                return Err(Error::InvalidChoice { user, choice: rb, n_rbs });
            }
            Some(rb) => transmitters[rb - 1] += 1,
            None => {}
        }
    }
    let feedback = Feedback(
        transmitters
            .iter()
            .map(|&c| if c == 1 { FeedbackBit::Ack } else { FeedbackBit::Nak })
            .collect(),
    );
    let collisions = transmitters.iter().filter(|&&c| c >= 2).count();
    let success = choices.iter().map(|(&u, &c)| (u, feedback.acked(c))).collect();
    Ok(SlotOutcome { feedback, success, collisions })
}

/// Feedback as seen by every user in the cell.
pub fn broadcast_feedback(outcome: &SlotOutcome) -> Feedback {
    outcome.feedback.clone()
}
