use rand::Rng;

/// Dense row-major array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor data/shape mismatch");
        Tensor { shape: shape.to_vec(), data }
    }

    /// Uniform on `[-limit, limit]` with `limit = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `y = self * x` for a `[rows, cols]` matrix.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let cols = self.shape[1];
        debug_assert_eq!(x.len(), cols);
        for (row, out) in self.data.chunks_exact(cols).zip(y.iter_mut()) {
            *out += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// `dx += self^T * dy`.
    pub fn matvec_t_into(&self, dy: &[f64], dx: &mut [f64]) {
        let cols = self.shape[1];
        for (row, &g) in self.data.chunks_exact(cols).zip(dy) {
            if g != 0.0 {
                dx.iter_mut().zip(row).for_each(|(d, w)| *d += w * g);
            }
        }
    }

    /// `self += dy * x^T`.
    pub fn add_outer(&mut self, dy: &[f64], x: &[f64]) {
        let cols = self.shape[1];
        for (row, &g) in self.data.chunks_exact_mut(cols).zip(dy) {
            if g != 0.0 {
                row.iter_mut().zip(x).for_each(|(w, v)| *w += g * v);
            }
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|a| *a *= k);
    }
}

/// Anything that owns trainable tensors in a fixed order.
pub trait Parameterized {
    fn named_tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl Parameterized for Tensor {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("tensor".into(), self)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![self]
    }
}
