//! Fully connected network with ReLU hidden layers, a linear output layer,
//! and hand-written reverse mode.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Layer `l` maps `x (batch x sizes[l])` to `x W_l + b_l`, where `W_l` has
/// shape `sizes[l] x sizes[l + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Parameter-shaped gradient (or optimizer moment) storage.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::contract(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect(),
            biases: sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new(sizes: &[usize], rng: &mut RngStream) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
            let bound = 1.0 / (w.nrows() as f64).sqrt();
            w.iter_mut().for_each(|x| *x = rng.uniform(-bound, bound));
            b.iter_mut().for_each(|x| *x = rng.uniform(-bound, bound));
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::contract(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut h = x.to_owned();
        let last = self.n_layers() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = h.dot(w);
            z += b;
            if l < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(h);
            h = z;
        }
        Ok((h, ForwardCache { inputs }))
    }

    /// Single-input forward pass.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::contract(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse pass from `grad_out = dL/d(output)`. Returns parameter
    /// gradients (when requested) and `dL/d(input)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &Array2<f64>,
        want_params: bool,
    ) -> Result<(Option<MlpGrads>, Array2<f64>)> {
        let batch = cache.inputs[0].nrows();
        if grad_out.dim() != (batch, self.output_dim()) {
            return Err(Error::contract(format!(
                "output gradient has shape {:?}, expected ({batch}, {})",
                grad_out.dim(),
                self.output_dim()
            )));
        }
        let mut gw = Vec::with_capacity(self.n_layers());
        let mut gb = Vec::with_capacity(self.n_layers());
        let mut delta = grad_out.clone();
        for l in (0..self.n_layers()).rev() {
            let input = &cache.inputs[l];
            if want_params {
                gw.push(input.t().dot(&delta));
                gb.push(delta.sum_axis(Axis(0)));
            }
            let mut back = delta.dot(&self.weights[l].t());
            if l > 0 {
                // The input of layer l is the ReLU output of layer l - 1.
                ndarray::Zip::from(&mut back).and(input).for_each(|g, &h| {
                    if h <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            delta = back;
        }
        let grads = want_params.then(|| {
            gw.reverse();
            gb.reverse();
            MlpGrads { weights: gw, biases: gb }
        });
        Ok((grads, delta))
    }

    /// `self <- (1 - tau) self + tau source`.
    pub fn soft_update(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if self.sizes != source.sizes {
            return Err(Error::contract("soft update between networks of different shapes"));
        }
        for (t, s) in self.weights.iter_mut().zip(&source.weights) {
            t.zip_mut_with(s, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        }
        for (t, s) in self.biases.iter_mut().zip(&source.biases) {
            t.zip_mut_with(s, |a, &b| *a = (1.0 - tau) * *a + tau * b);
        }
        Ok(())
    }

    /// Parameters in layer order, each layer's weights (row-major) then its
    /// biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn from_flat(sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if flat.len() != net.param_count() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                net.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for (w, b) in net.weights.iter_mut().zip(net.biases.iter_mut()) {
            w.iter_mut().for_each(|x| *x = it.next().unwrap());
            b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
        Ok(net)
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    /// Same ordering as [`Mlp::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }
}
