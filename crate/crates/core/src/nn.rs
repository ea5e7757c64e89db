//! Dense tanh perceptron with hand-written backpropagation.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (`out × in`, row-major) followed by the bias vector. Hidden layers use `tanh`,
//! the output layer is linear.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NnError {
    /// Fewer than two layer sizes, or a zero-width layer.
    BadArchitecture,
    /// Parameter vector length disagrees with the architecture.
    ShapeMismatch { expected: usize, found: usize },
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::BadArchitecture => f.write_str("network needs >= 2 non-zero layer sizes"),
            NnError::ShapeMismatch { expected, found } => {
                write!(f, "expected {expected} parameters, found {found}")
            }
        }
    }
}

impl core::error::Error for NnError {}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer outputs from the last forward pass; `layers[0]` is the input.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpNet {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn check_sizes(sizes: &[usize]) -> Result<(), NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::BadArchitecture);
        }
        Ok(())
    }

    /// All-zero network.
    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        Self::check_sizes(sizes)?;
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; Self::param_count(sizes)] })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, NnError> {
        Self::check_sizes(sizes)?;
        let expected = Self::param_count(sizes);
        if params.len() != expected {
            return Err(NnError::ShapeMismatch { expected, found: params.len() });
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    /// Glorot-uniform weights, zero biases; the output layer's weights are
    /// additionally multiplied by `output_gain`.
    pub fn glorot<R: Rng + ?Sized>(
        sizes: &[usize],
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        let n_layers = sizes.len() - 1;
        let mut offset = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = gain * rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated non-empty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    /// Offset of the output layer's bias vector inside `params`.
    pub fn output_bias_offset(&self) -> usize {
        self.params.len() - self.output_dim()
    }

    /// Range of the output layer's weights and biases inside `params`.
    pub fn output_layer_range(&self) -> core::ops::Range<usize> {
        let n = self.sizes.len();
        let (fan_in, fan_out) = (self.sizes[n - 2], self.sizes[n - 1]);
        self.params.len() - (fan_in * fan_out + fan_out)..self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn activations(&self) -> Activations {
        let widest = self.sizes.iter().copied().max().unwrap_or(0);
        Activations {
            layers: self.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            delta: vec![0.0; widest],
            delta_prev: vec![0.0; widest],
        }
    }

    /// Forward pass; the returned slice borrows from `acts`.
    pub fn forward<'a>(&self, input: &[f64], acts: &'a mut Activations) -> &'a [f64] {
        assert_eq!(input.len(), self.input_dim(), "input width mismatch");
        if acts.layers.len() != self.sizes.len() {
            *acts = self.activations();
        }
        acts.layers[0].copy_from_slice(input);
        let n_layers = self.sizes.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let (head, tail) = acts.layers.split_at_mut(l + 1);
            let x = &head[l];
            let y = &mut tail[0];
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                y[j] = b[j] + dot(row, x);
            }
            if l + 1 < n_layers {
                for v in y.iter_mut() {
                    *v = libm::tanh(*v);
                }
            }
            offset += fan_in * fan_out + fan_out;
        }
        acts.output()
    }

    /// Convenience forward pass that allocates.
    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        let mut acts = self.activations();
        self.forward(input, &mut acts).to_vec()
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output` for the forward
    /// pass recorded in `acts`.
    pub fn backward(&self, acts: &mut Activations, d_output: &[f64], grad: &mut [f64]) {
        assert_eq!(d_output.len(), self.output_dim(), "output gradient width mismatch");
        assert_eq!(grad.len(), self.params.len(), "gradient buffer length mismatch");
        let n_layers = self.sizes.len() - 1;
        let Activations { layers, delta, delta_prev } = acts;
        delta[..d_output.len()].copy_from_slice(d_output);
        let mut offset = self.params.len();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= fan_in * fan_out + fan_out;
            let w = &self.params[offset..offset + fan_in * fan_out];
            let (gw, gb) = grad[offset..offset + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let x = &layers[l];
            for j in 0..fan_out {
                let d = delta[j];
                gb[j] += d;
                if d != 0.0 {
                    axpy(d, x, &mut gw[j * fan_in..(j + 1) * fan_in]);
                }
            }
            if l == 0 {
                break;
            }
            let d_in = &mut delta_prev[..fan_in];
            d_in.fill(0.0);
            for j in 0..fan_out {
                let d = delta[j];
                if d != 0.0 {
                    axpy(d, &w[j * fan_in..(j + 1) * fan_in], d_in);
                }
            }
            // tanh'(z) = 1 − tanh(z)²
            for (g, a) in d_in.iter_mut().zip(x.iter()) {
                *g *= 1.0 - a * a;
            }
            core::mem::swap(delta, delta_prev);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes() {
        assert_eq!(MlpNet::param_count(&[3, 4, 2]), 3 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(MlpNet::zeros(&[3]), Err(NnError::BadArchitecture));
        assert_eq!(MlpNet::zeros(&[3, 0, 1]), Err(NnError::BadArchitecture));
        assert_eq!(
            MlpNet::from_params(&[2, 1], vec![0.0; 2]),
            Err(NnError::ShapeMismatch { expected: 3, found: 2 })
        );
    }

    #[test]
    fn hand_computed_forward() {
        // 2 -> 1 (tanh) -> 1
        let net = MlpNet::from_params(&[2, 1, 1], vec![0.5, -1.0, 0.1, 2.0, -0.3]).unwrap();
        let h = libm::tanh(0.5 * 1.0 - 1.0 * 2.0 + 0.1);
        let y = net.predict(&[1.0, 2.0]);
        assert!((y[0] - (2.0 * h - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = MlpNet::glorot(&[5, 7, 6, 3], 1.0, &mut rng).unwrap();
        let x = [0.3, -0.2, 0.9, 0.1, -0.7];
        let w = [1.0, -2.0, 0.5];
        let loss = |n: &MlpNet| n.predict(&x).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let mut acts = net.activations();
        net.forward(&x, &mut acts);
        let mut grad = vec![0.0; net.params().len()];
        net.backward(&mut acts, &w, &mut grad);
        let h = 1e-6;
        for i in 0..net.params().len() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-7 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = MlpNet::glorot(&[4, 8, 1], 1.0, &mut rng).unwrap();
        let range = net.output_layer_range();
        net.params_mut()[range].fill(0.0);
        assert_eq!(net.predict(&[1.0, 2.0, 3.0, 4.0]), vec![0.0]);
    }
}
