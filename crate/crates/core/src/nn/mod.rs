//! Hand-written differentiable layers for the per-user Q-network: dense
//! layers, a single LSTM cell, the branching dueling head and Adam.
//!
//! Backpropagation is truncated to one decision: the carried LSTM state that
//! enters a forward pass is treated as a constant.

mod adam;
mod dense;
mod lstm;
mod net;
mod snapshot;
mod tensor;

pub use adam::{adam_update, AdamState};
pub use dense::{Activation, Dense};
pub use lstm::{LstmCache, LstmLayer, LstmState};
pub use net::{dueling_combine, masked_mse, DuelingQNet, ForwardCache, NetShape};
pub use snapshot::{read_snapshot, write_snapshot};
pub use tensor::{Parameterized, Tensor};
