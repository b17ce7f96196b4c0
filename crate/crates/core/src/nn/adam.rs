use super::tensor::Parameterized;

/// First/second moment estimates for every parameter of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameterized + ?Sized>(params: &P) -> Self {
        Self::with_betas(params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas<P: Parameterized + ?Sized>(params: &P, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let m: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let v = m.clone();
        AdamState { beta1, beta2, epsilon, step: 0, m, v }
    }
}

/// One bias-corrected Adam step of `params` along `grads`.
pub fn adam_update<P: Parameterized + ?Sized>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let grads = grads.tensors();
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((w, &dw), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * dw;
            *vi = b2 * *vi + (1.0 - b2) * dw * dw;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
