use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::MAX_DIM;

/// Fully connected network `[d_in, d_h, d_h, 1]` with relu hidden layers and
/// a linear scalar output. Layer `l` maps `dims[l]` inputs to `dims[l + 1]`
/// outputs; its weight matrix is stored row-major, one row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    frame: usize,
    fill_in_feature: bool,
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped container for gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradient {
    /// All entries, weights layer by layer, then biases.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().chain(&self.biases).flatten().copied()
    }
}

/// Input width for a frame size.
pub fn input_dim(frame: usize, fill_in_feature: bool) -> usize {
    frame * (frame + 2) + fill_in_feature as usize
}

impl QNetwork {
    /// All parameters zero.
    pub fn zeros(frame: usize, fill_in_feature: bool) -> Result<Self> {
        if frame == 0 || frame > MAX_DIM {
            return Err(Error::Unsupported { n: frame });
        }
        let hidden = frame * (frame + 2);
        let dims = vec![input_dim(frame, fill_in_feature), hidden, hidden, 1];
        let weights = dims.windows(2).map(|d| vec![0.0; d[0] * d[1]]).collect();
        let biases = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(QNetwork {
            frame,
            fill_in_feature,
            dims,
            weights,
            biases,
        })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, drawn layer by
    /// layer in storage order; biases zero.
    pub fn random<R: Rng + ?Sized>(
        frame: usize,
        fill_in_feature: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = QNetwork::zeros(frame, fill_in_feature)?;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let bound = libm::sqrt(6.0 / (net.dims[l] + net.dims[l + 1]) as f64);
            for x in w.iter_mut() {
                *x = rng.gen_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Reassembles a network from stored parts, checking every shape.
    pub fn from_parts(
        frame: usize,
        fill_in_feature: bool,
        dims: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut net = QNetwork::zeros(frame, fill_in_feature)?;
        if dims != net.dims.as_slice() {
            return Err(Error::Invalid("layer sizes do not fit the frame size"));
        }
        let shapes_ok = weights.len() == net.weights.len()
            && biases.len() == net.biases.len()
            && weights
                .iter()
                .zip(&net.weights)
                .all(|(a, b)| a.len() == b.len())
            && biases
                .iter()
                .zip(&net.biases)
                .all(|(a, b)| a.len() == b.len());
        if !shapes_ok {
            return Err(Error::Invalid(
                "parameter shapes do not match the layer sizes",
            ));
        }
        net.weights = weights;
        net.biases = biases;
        Ok(net)
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn fill_in_feature(&self) -> bool {
        self.fill_in_feature
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// All parameters, in the order of [`Gradient::flat`].
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims[0] {
            return Err(Error::Dimension {
                expected: self.dims[0],
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations of every layer.
    fn pass(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(self.weights.len());
        for l in 0..self.weights.len() {
            let input: &[f64] = if l == 0 { x } else { &zs[l - 1] };
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                *zo += dot(row, input, l > 0);
            }
            debug_assert_eq!(z.len(), fan_out);
            zs.push(z);
        }
        zs
    }

    /// Q-value of one feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.pass(x).last().expect("at least one layer")[0])
    }

    /// Gradient of `mean_k (forward(x_k) - y_k)²` over the batch.
    pub fn backward(&self, batch: &[(Vec<f64>, f64)]) -> Result<Gradient> {
        let mut grad = Gradient {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        if batch.is_empty() {
            return Ok(grad);
        }
        let scale = 2.0 / batch.len() as f64;
        let layers = self.weights.len();
        for (x, y) in batch {
            self.check_input(x)?;
            let zs = self.pass(x);
            let mut delta = vec![scale * (zs[layers - 1][0] - y)];
            for l in (0..layers).rev() {
                let fan_in = self.dims[l];
                let input: &[f64] = if l == 0 { x } else { &zs[l - 1] };
                let gw = &mut grad.weights[l];
                for (o, &d) in delta.iter().enumerate() {
                    grad.biases[l][o] += d;
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                    for (g, &a) in row.iter_mut().zip(input) {
                        *g += d * if l > 0 { relu(a) } else { a };
                    }
                }
                if l == 0 {
                    break;
                }
                let w = &self.weights[l];
                let mut next = vec![0.0; fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (nx, &wv) in next.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *nx += d * wv;
                    }
                }
                for (nx, &z) in next.iter_mut().zip(&zs[l - 1]) {
                    if z <= 0.0 {
                        *nx = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok(grad)
    }

    /// `θ ← θ − lr·grad`.
    pub fn sgd_step(&mut self, grad: &Gradient, lr: f64) -> Result<()> {
        let fits = grad.weights.len() == self.weights.len()
            && grad.biases.len() == self.biases.len()
            && grad
                .weights
                .iter()
                .zip(&self.weights)
                .all(|(a, b)| a.len() == b.len())
            && grad
                .biases
                .iter()
                .zip(&self.biases)
                .all(|(a, b)| a.len() == b.len());
        if !fits {
            return Err(Error::Invalid("gradient shape does not match the network"));
        }
        for (p, g) in self.params_mut().zip(grad.flat()) {
            *p -= lr * g;
        }
        Ok(())
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Dot product; `activate` applies relu to the input first.
fn dot(w: &[f64], x: &[f64], activate: bool) -> f64 {
    if activate {
        w.iter().zip(x).map(|(a, &b)| a * relu(b)).sum()
    } else {
        w.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}
