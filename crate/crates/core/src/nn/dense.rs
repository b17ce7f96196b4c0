use rand::Rng;

use super::tensor::{Parameterized, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

/// Fully connected layer `y = act(W x + b)` with `W` shaped `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        Dense {
            weight: Tensor::glorot(&[outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense {
            weight: Tensor::zeros(self.weight.shape()),
            bias: Tensor::zeros(self.bias.shape()),
            activation: self.activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.data().to_vec();
        self.weight.matvec_into(x, &mut y);
        if self.activation == Activation::Relu {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        y
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    /// `y` is this layer's forward output for `x`.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grads: &mut Dense) -> Vec<f64> {
        let dz: Vec<f64> = match self.activation {
            Activation::Identity => dy.to_vec(),
            Activation::Relu => dy.iter().zip(y).map(|(&g, &v)| if v > 0.0 { g } else { 0.0 }).collect(),
        };
        grads.weight.add_outer(&dz, x);
        grads.bias.data_mut().iter_mut().zip(&dz).for_each(|(b, g)| *b += g);
        let mut dx = vec![0.0; self.inputs()];
        self.weight.matvec_t_into(&dz, &mut dx);
        dx
    }
}

impl Parameterized for Dense {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
