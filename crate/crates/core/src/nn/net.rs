use rand::Rng;

use super::dense::{Activation, Dense};
use super::lstm::{LstmCache, LstmLayer, LstmState};
use super::tensor::{Parameterized, Tensor};
use crate::error::{Error, Result};
use crate::policy::{EncodedInput, QMatrix};

/// Sizes that fix a network's architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub inputs: usize,
    pub n_rbs: usize,
    pub k_max: usize,
    pub lstm_hidden: usize,
    pub value_hidden: usize,
}

/// Q = V + (A_j - mean_a A_j) for each branch `j`.
pub fn dueling_combine(value: f64, advantages: &[Vec<f64>]) -> QMatrix {
    let k_max = advantages.len();
    let rows = advantages.first().map_or(1, Vec::len);
    let mut q = QMatrix::zeros(rows - 1, k_max);
    for (j, adv) in advantages.iter().enumerate() {
        let mean = adv.iter().sum::<f64>() / rows as f64;
        for (a, &v) in adv.iter().enumerate() {
            q.set(a, j, value + v - mean);
        }
    }
    q
}

/// Sum of squared residuals over masked entries and its gradient with
/// respect to `q`, both divided by `denom`.
pub fn masked_mse(q: &QMatrix, target: &QMatrix, mask: &[bool], denom: f64) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let grad = q
        .values()
        .iter()
        .zip(target.values())
        .zip(mask)
        .map(|((&y, &t), &m)| {
            if m {
                let r = y - t;
                loss += r * r;
                2.0 * r / denom
            } else {
                0.0
            }
        })
        .collect();
    (loss / denom, grad)
}

/// LSTM core feeding a value stream (dense ReLU layer, then a scalar) and
/// one advantage branch of width `N + 1` per window slot.
#[derive(Clone, Debug, PartialEq)]
pub struct DuelingQNet {
    shape: NetShape,
    pub lstm: LstmLayer,
    pub value_hidden: Dense,
    pub value_out: Dense,
    pub branches: Vec<Dense>,
}

#[derive(Clone, Debug)]
pub struct ForwardCache {
    lstm: LstmCache,
    h: Vec<f64>,
    value_hidden: Vec<f64>,
    value: f64,
}

impl DuelingQNet {
    pub fn new<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        let lstm = LstmLayer::new(shape.inputs, shape.lstm_hidden, rng);
        let value_hidden = Dense::new(shape.lstm_hidden, shape.value_hidden, Activation::Relu, rng);
        let value_out = Dense::new(shape.value_hidden, 1, Activation::Identity, rng);
        let branches = (0..shape.k_max)
            .map(|_| Dense::new(shape.lstm_hidden, shape.n_rbs + 1, Activation::Identity, rng))
            .collect();
        DuelingQNet { shape, lstm, value_hidden, value_out, branches }
    }

    /// Same architecture with every parameter zero; used as a gradient
    /// accumulator.
    pub fn zeros_like(&self) -> Self {
        DuelingQNet {
            shape: self.shape,
            lstm: self.lstm.zeros_like(),
            value_hidden: self.value_hidden.zeros_like(),
            value_out: self.value_out.zeros_like(),
            branches: self.branches.iter().map(Dense::zeros_like).collect(),
        }
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.shape.lstm_hidden)
    }

    pub fn forward(&self, input: &EncodedInput, state: &LstmState) -> Result<(QMatrix, LstmState, ForwardCache)> {
        if input.len() != self.shape.inputs {
            return Err(Error::Shape { context: "network input", expected: self.shape.inputs, got: input.len() });
        }
        let (next, lstm_cache) = self.lstm.step(&input.0, state)?;
        let h = next.h.clone();
        let hidden = self.value_hidden.forward(&h);
        let value = self.value_out.forward(&hidden)[0];
        let advantages: Vec<Vec<f64>> = self.branches.iter().map(|b| b.forward(&h)).collect();
        let q = dueling_combine(value, &advantages);
        let cache = ForwardCache { lstm: lstm_cache, h, value_hidden: hidden, value };
        Ok((q, next, cache))
    }

    /// Backpropagates `dL/dQ` (row-major, like [`QMatrix::values`]) and
    /// accumulates parameter gradients into `grads`.
    pub fn accumulate_gradients(&self, cache: &ForwardCache, d_q: &[f64], grads: &mut DuelingQNet) {
        let rows = self.shape.n_rbs + 1;
        let k_max = self.shape.k_max;
        let mut d_value = 0.0;
        let mut d_h = vec![0.0; self.shape.lstm_hidden];
        for (j, branch) in self.branches.iter().enumerate() {
            let col: Vec<f64> = (0..rows).map(|a| d_q[a * k_max + j]).collect();
            let col_sum: f64 = col.iter().sum();
            d_value += col_sum;
            let mean = col_sum / rows as f64;
            let d_adv: Vec<f64> = col.iter().map(|g| g - mean).collect();
            if d_adv.iter().all(|&g| g == 0.0) {
                continue;
            }
            // identity activation: the output itself is not needed
            let dx = branch.backward(&cache.h, &[], &d_adv, &mut grads.branches[j]);
            d_h.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        let d_hidden = self.value_out.backward(&cache.value_hidden, &[cache.value], &[d_value], &mut grads.value_out);
        let dx = self.value_hidden.backward(&cache.h, &cache.value_hidden, &d_hidden, &mut grads.value_hidden);
        d_h.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        self.lstm.backward(&cache.lstm, &d_h, &mut grads.lstm);
    }

    /// Masked mean-squared error against `target` for one input and the
    /// gradients of that loss.
    pub fn backward(
        &self,
        input: &EncodedInput,
        state: &LstmState,
        target: &QMatrix,
        mask: &[bool],
    ) -> Result<(f64, DuelingQNet)> {
        let (q, _, cache) = self.forward(input, state)?;
        let count = mask.iter().filter(|&&m| m).count().max(1) as f64;
        let (loss, d_q) = masked_mse(&q, target, mask, count);
        let mut grads = self.zeros_like();
        self.accumulate_gradients(&cache, &d_q, &mut grads);
        Ok((loss, grads))
    }

    pub fn copy_from(&mut self, other: &DuelingQNet) {
        self.clone_from(other);
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

impl Parameterized for DuelingQNet {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut layers = vec![
            ("lstm".to_string(), self.lstm.named_tensors()),
            ("value_hidden".to_string(), self.value_hidden.named_tensors()),
            ("value_out".to_string(), self.value_out.named_tensors()),
        ];
        for (j, b) in self.branches.iter().enumerate() {
            layers.push((format!("branch{j}"), b.named_tensors()));
        }
        layers
            .into_iter()
            .flat_map(|(prefix, layer)| layer.into_iter().map(move |(name, t)| (format!("{prefix}.{name}"), t)))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.lstm.tensors_mut();
        out.extend(self.value_hidden.tensors_mut());
        out.extend(self.value_out.tensors_mut());
        for b in &mut self.branches {
            out.extend(b.tensors_mut());
        }
        out
    }
}
