//! Fully connected ReLU network with a scalar linear output.
//!
//! Parameters live in one flat vector. Layer `l` maps `fan_in -> fan_out` and
//! occupies `fan_in * fan_out` weights stored row-major with one row per
//! *input* unit (`w[i * fan_out + o]`), followed by `fan_out` biases. The
//! flat layout is what the optimizers, the finite-difference checks and the
//! checkpoint format all see.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const BLOB_MAGIC: &[u8; 8] = b"PPBOMLP\0";
const BLOB_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer activations of a batched forward pass, kept for backprop.
#[derive(Clone, Debug, Default)]
pub struct Activations<T> {
    batch: usize,
    /// `layers[0]` is the input, `layers[l]` the post-ReLU output of hidden
    /// layer `l`, and the last entry the raw network output.
    layers: Vec<Vec<T>>,
}

impl<T: Scalar> Activations<T> {
    pub fn output(&self) -> &[T] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Post-ReLU outputs of hidden layer `l` (1-based), row-major by batch.
    pub fn hidden(&self, l: usize) -> &[T] {
        assert!(l >= 1 && l + 1 < self.layers.len(), "no hidden layer {l}");
        &self.layers[l]
    }

    pub fn num_hidden(&self) -> usize {
        self.layers.len().saturating_sub(2)
    }

    /// Which hidden units are switched on, in layer order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        (1..=self.num_hidden()).flat_map(|l| self.hidden(l).iter().map(|&v| v > T::zero())).collect()
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Scalar> Mlp<T> {
    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = T::lit(rng.random_range(-bound..bound));
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "network needs an input and an output layer");
        assert!(sizes.iter().all(|&s| s > 0), "layer widths must be positive");
        assert_eq!(*sizes.last().unwrap(), 1, "output layer must be scalar");
        Self { sizes: sizes.to_vec(), params: vec![T::zero(); param_count(sizes)] }
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<T>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(Error::Format(format!("bad layer sizes {sizes:?}")));
        }
        if params.len() != param_count(&sizes) {
            return Err(Error::Format(format!(
                "expected {} parameters for sizes {sizes:?}, got {}",
                param_count(&sizes),
                params.len()
            )));
        }
        Ok(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Offsets of (weights, biases) for layer `l`.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let w_off = param_count(&self.sizes[..=l]);
        (w_off, w_off + self.sizes[l] * self.sizes[l + 1])
    }

    /// Forward pass over `xs`, a row-major `batch x input_dim` matrix.
    pub fn forward(&self, xs: &[T]) -> Activations<T> {
        let d = self.input_dim();
        assert_eq!(xs.len() % d, 0, "input length not a multiple of input_dim");
        let batch = xs.len() / d;
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(xs.to_vec());
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let w = &self.params[w_off..b_off];
            let b = &self.params[b_off..b_off + fan_out];
            let input = &layers[l];
            let mut out = Vec::with_capacity(batch * fan_out);
            for row in input.chunks_exact(fan_in) {
                let start = out.len();
                out.extend_from_slice(b);
                let acc = &mut out[start..];
                for (&a, w_row) in row.iter().zip(w.chunks_exact(fan_out)) {
                    if a == T::zero() {
                        continue;
                    }
                    for (o, &wv) in acc.iter_mut().zip(w_row) {
                        *o += a * wv;
                    }
                }
            }
            if l + 1 < self.num_layers() {
                out.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
            layers.push(out);
        }
        Activations { batch, layers }
    }

    /// Backpropagates `d_out` (one entry per batch row, the derivative of some
    /// scalar loss with respect to each raw output) and *adds* the parameter
    /// gradient into `grad`. Returns the gradient with respect to the inputs.
    pub fn backward(&self, acts: &Activations<T>, d_out: &[T], grad: &mut [T]) -> Vec<T> {
        assert_eq!(d_out.len(), acts.batch);
        assert_eq!(grad.len(), self.params.len());
        let mut delta = d_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let w = &self.params[w_off..b_off];
            let input = &acts.layers[l];
            {
                let (gw, gb) = grad[w_off..b_off + fan_out].split_at_mut(fan_in * fan_out);
                for (row, d_row) in input.chunks_exact(fan_in).zip(delta.chunks_exact(fan_out)) {
                    for (g, &dv) in gb.iter_mut().zip(d_row) {
                        *g += dv;
                    }
                    for (&a, gw_row) in row.iter().zip(gw.chunks_exact_mut(fan_out)) {
                        if a == T::zero() {
                            continue;
                        }
                        for (g, &dv) in gw_row.iter_mut().zip(d_row) {
                            *g += a * dv;
                        }
                    }
                }
            }
            let mut d_in = vec![T::zero(); acts.batch * fan_in];
            for ((row, d_row), din_row) in
                input.chunks_exact(fan_in).zip(delta.chunks_exact(fan_out)).zip(d_in.chunks_exact_mut(fan_in))
            {
                for ((din, w_row), &a) in din_row.iter_mut().zip(w.chunks_exact(fan_out)).zip(row) {
                    // Hidden inputs are post-ReLU: zero means the unit is off.
                    if l > 0 && a <= T::zero() {
                        continue;
                    }
                    *din = w_row.iter().zip(d_row).map(|(&wv, &dv)| wv * dv).sum();
                }
            }
            delta = d_in;
        }
        delta
    }

    /// Raw scalar output at a single input.
    pub fn output(&self, x: &[T]) -> T {
        self.forward(x).output()[0]
    }

    /// Raw output at `x` and its gradient with respect to `x`.
    pub fn output_with_input_grad(&self, x: &[T]) -> (T, Vec<T>) {
        let acts = self.forward(x);
        let mut scratch = vec![T::zero(); self.params.len()];
        let dx = self.backward(&acts, &[T::one()], &mut scratch);
        (acts.output()[0], dx)
    }

    /// Checkpoint blob: magic `PPBOMLP\0`, `u32` version, `u32` layer-size
    /// count, the sizes as `u64`, then every parameter as an `f64`, all
    /// little-endian.
    pub fn write_blob<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BLOB_MAGIC)?;
        w.write_all(&BLOB_VERSION.to_le_bytes())?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_blob<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BLOB_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != BLOB_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b4)?;
        let n_sizes = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            r.read_exact(&mut b8)?;
            sizes.push(u64::from_le_bytes(b8) as usize);
        }
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Format(format!("bad layer sizes {sizes:?}")));
        }
        let n_params = param_count(&sizes);
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            r.read_exact(&mut b8)?;
            params.push(T::lit(f64::from_le_bytes(b8)));
        }
        Self::from_parts(sizes, params)
    }
}
