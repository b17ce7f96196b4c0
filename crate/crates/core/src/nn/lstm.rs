use rand::Rng;

use super::tensor::{Parameterized, Tensor};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hidden and cell state carried between decisions.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState { h: vec![0.0; hidden], c: vec![0.0; hidden] }
    }
}

/// Single LSTM cell. Gate rows are stacked `[input, forget, candidate,
/// output]`, each `hidden` long.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub w_input: Tensor,
    pub w_recurrent: Tensor,
    pub bias: Tensor,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct LstmCache {
    input: Vec<f64>,
    prev: LstmState,
    gates: Vec<f64>,
    c_tanh: Vec<f64>,
}

impl LstmLayer {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
        LstmLayer {
            w_input: Tensor::glorot(&[4 * hidden, inputs], inputs, hidden, rng),
            w_recurrent: Tensor::glorot(&[4 * hidden, hidden], hidden, hidden, rng),
            bias,
        }
    }

    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        LstmLayer {
            w_input: Tensor::zeros(&[4 * hidden, inputs]),
            w_recurrent: Tensor::zeros(&[4 * hidden, hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmLayer::zeros(self.inputs(), self.hidden())
    }

    pub fn inputs(&self) -> usize {
        self.w_input.shape()[1]
    }

    pub fn hidden(&self) -> usize {
        self.w_recurrent.shape()[1]
    }

    pub fn step(&self, input: &[f64], state: &LstmState) -> Result<(LstmState, LstmCache)> {
        if input.len() != self.inputs() {
            return Err(Error::Shape { context: "lstm input", expected: self.inputs(), got: input.len() });
        }
        let hid = self.hidden();
        if state.h.len() != hid || state.c.len() != hid {
            return Err(Error::Shape { context: "lstm state", expected: hid, got: state.h.len() });
        }
        let mut z = self.bias.data().to_vec();
        self.w_input.matvec_into(input, &mut z);
        self.w_recurrent.matvec_into(&state.h, &mut z);
        let mut gates = z;
        for (k, g) in gates.iter_mut().enumerate() {
            *g = if (2 * hid..3 * hid).contains(&k) { g.tanh() } else { sigmoid(*g) };
        }
        let mut c = vec![0.0; hid];
        let mut h = vec![0.0; hid];
        let mut c_tanh = vec![0.0; hid];
        for u in 0..hid {
            let (i, f, g, o) = (gates[u], gates[hid + u], gates[2 * hid + u], gates[3 * hid + u]);
            c[u] = f * state.c[u] + i * g;
            c_tanh[u] = c[u].tanh();
            h[u] = o * c_tanh[u];
        }
        let cache = LstmCache { input: input.to_vec(), prev: state.clone(), gates, c_tanh };
        Ok((LstmState { h, c }, cache))
    }

    /// Backward through one step given `dL/dh'`; the incoming state is
    /// constant. Accumulates into `grads` and returns `dL/dx`.
    pub fn backward(&self, cache: &LstmCache, dh: &[f64], grads: &mut LstmLayer) -> Vec<f64> {
        let hid = self.hidden();
        let g = &cache.gates;
        let mut dz = vec![0.0; 4 * hid];
        for u in 0..hid {
            let (i, f, cand, o) = (g[u], g[hid + u], g[2 * hid + u], g[3 * hid + u]);
            let tc = cache.c_tanh[u];
            let d_o = dh[u] * tc;
            let dc = dh[u] * o * (1.0 - tc * tc);
            dz[u] = dc * cand * i * (1.0 - i);
            dz[hid + u] = dc * cache.prev.c[u] * f * (1.0 - f);
            dz[2 * hid + u] = dc * i * (1.0 - cand * cand);
            dz[3 * hid + u] = d_o * o * (1.0 - o);
        }
        grads.w_input.add_outer(&dz, &cache.input);
        grads.w_recurrent.add_outer(&dz, &cache.prev.h);
        grads.bias.data_mut().iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
        let mut dx = vec![0.0; self.inputs()];
        self.w_input.matvec_t_into(&dz, &mut dx);
        dx
    }
}

impl Parameterized for LstmLayer {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_input".into(), &self.w_input),
            ("w_recurrent".into(), &self.w_recurrent),
            ("bias".into(), &self.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_input, &mut self.w_recurrent, &mut self.bias]
    }
}
