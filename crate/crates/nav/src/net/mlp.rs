//! Fully-connected layers, ReLU stacks, and row-wise softmax, all batched
//! over the leading axis.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::{NetError, ParamGroup, Scalar, TensorRef, TensorRefMut};

/// One affine layer; `w` has shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    /// Uniform fan-in init: U[-1/sqrt(in), 1/sqrt(in)].
    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self::init_with_bound(input, output, bound, rng)
    }

    /// Small-uniform init for final heads.
    pub fn init_with_bound<R: Rng>(input: usize, output: usize, bound: f64, rng: &mut R) -> Self {
        let w = Array2::from_shape_fn((output, input), |_| F::c(rng.gen_range(-bound..=bound)));
        let b = Array1::from_shape_fn(output, |_| F::c(rng.gen_range(-bound..=bound)));
        Self { w, b }
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    /// `x` is (batch, in); returns (batch, out).
    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        debug_assert_eq!(x.ncols(), self.in_dim());
        let mut y = x.dot(&self.w.t());
        for mut row in y.rows_mut() {
            row.zip_mut_with(&self.b, |a, &b| *a = *a + b);
        }
        y
    }

    /// Given dL/dy, accumulates gradients and returns dL/dx.
    pub fn backward(&self, x: &Array2<F>, dy: &Array2<F>) -> (Linear<F>, Array2<F>) {
        let dw = dy.t().dot(x);
        let db = dy.sum_axis(Axis(0));
        let dx = dy.dot(&self.w);
        (Linear { w: dw, b: db }, dx)
    }
}

impl<F: Scalar> ParamGroup<F> for Linear<F> {
    fn tensors(&self) -> Vec<TensorRef<'_, F>> {
        vec![
            TensorRef {
                name: "w".into(),
                shape: self.w.shape().to_vec(),
                data: self.w.as_slice().expect("standard layout"),
            },
            TensorRef {
                name: "b".into(),
                shape: self.b.shape().to_vec(),
                data: self.b.as_slice().expect("standard layout"),
            },
        ]
    }

    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>> {
        let w_shape = self.w.shape().to_vec();
        let b_shape = self.b.shape().to_vec();
        vec![
            TensorRefMut {
                name: "w".into(),
                shape: w_shape,
                data: self.w.as_slice_mut().expect("standard layout"),
            },
            TensorRefMut {
                name: "b".into(),
                shape: b_shape,
                data: self.b.as_slice_mut().expect("standard layout"),
            },
        ]
    }
}

/// Activation applied after the last layer. Hidden layers are always ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
}

/// Architecture description: input width, hidden/output widths, and the
/// output activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input: usize,
    pub widths: Vec<usize>,
    pub output: Activation,
}

impl MlpSpec {
    pub fn relu(input: usize, widths: &[usize]) -> Self {
        Self {
            input,
            widths: widths.to_vec(),
            output: Activation::Relu,
        }
    }
}

/// A stack of affine layers with ReLU between (and optionally after) them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    pub layers: Vec<Linear<F>>,
    pub output: Activation,
}

/// Per-layer inputs and pre-activations kept from a forward pass.
pub struct MlpCache<F> {
    xs: Vec<Array2<F>>,
    zs: Vec<Array2<F>>,
}

fn relu_inplace<F: Scalar>(a: &mut Array2<F>) {
    a.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
}

impl<F: Scalar> Mlp<F> {
    pub fn init<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(spec.widths.len());
        let mut prev = spec.input;
        for &w in &spec.widths {
            layers.push(Linear::init(prev, w, rng));
            prev = w;
        }
        Self {
            layers,
            output: spec.output,
        }
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            input: self.layers[0].in_dim(),
            widths: self.layers.iter().map(|l| l.out_dim()).collect(),
            output: self.output,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim()
    }

    pub fn check_input(&self, x: &Array2<F>) -> Result<(), NetError> {
        if x.ncols() != self.in_dim() {
            return Err(NetError::ShapeMismatch {
                context: "mlp input",
                expected: vec![self.in_dim()],
                got: vec![x.ncols()],
            });
        }
        Ok(())
    }

    /// Batched forward pass; the cache is sufficient for exact backprop.
    pub fn forward(&self, x: &Array2<F>) -> (Array2<F>, MlpCache<F>) {
        debug_assert_eq!(x.ncols(), self.in_dim());
        let mut xs = Vec::with_capacity(self.layers.len());
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&cur);
            xs.push(cur);
            let mut a = z.clone();
            let activate = i + 1 < self.layers.len() || self.output == Activation::Relu;
            if activate {
                relu_inplace(&mut a);
            }
            zs.push(z);
            cur = a;
        }
        (cur, MlpCache { xs, zs })
    }

    /// Exact backprop; returns parameter gradients (same structure) and
    /// dL/dinput.
    pub fn backward(&self, cache: &MlpCache<F>, d_out: &Array2<F>) -> (Mlp<F>, Array2<F>) {
        let mut grads: Vec<Linear<F>> = Vec::with_capacity(self.layers.len());
        let mut dy = d_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let activate = i + 1 < self.layers.len() || self.output == Activation::Relu;
            if activate {
                // gate by the sign of the pre-activation
                dy.zip_mut_with(&cache.zs[i], |g, &z| {
                    if z <= F::zero() {
                        *g = F::zero();
                    }
                });
            }
            let (g, dx) = layer.backward(&cache.xs[i], &dy);
            grads.push(g);
            dy = dx;
        }
        grads.reverse();
        (
            Mlp {
                layers: grads,
                output: self.output,
            },
            dy,
        )
    }
}

impl<F: Scalar> ParamGroup<F> for Mlp<F> {
    fn tensors(&self) -> Vec<TensorRef<'_, F>> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.tensors().into_iter().map(move |mut t| {
                    t.name = format!("l{i}.{}", t.name);
                    t
                })
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                l.tensors_mut().into_iter().map(move |mut t| {
                    t.name = format!("l{i}.{}", t.name);
                    t
                })
            })
            .collect()
    }
}

/// Numerically stable softmax over each row.
pub fn softmax_rows<F: Scalar>(scores: &Array2<F>) -> Array2<F> {
    let mut out = scores.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Backward of row softmax: given weights `w` and dL/dw, returns dL/dscores.
pub fn softmax_rows_backward<F: Scalar>(w: &Array2<F>, dw: &Array2<F>) -> Array2<F> {
    let mut ds = Array2::zeros(w.raw_dim());
    for ((mut ds_row, w_row), dw_row) in ds.rows_mut().into_iter().zip(w.rows()).zip(dw.rows()) {
        let dot: F = w_row
            .iter()
            .zip(dw_row.iter())
            .fold(F::zero(), |acc, (&wi, &gi)| acc + wi * gi);
        for ((d, &wi), &gi) in ds_row.iter_mut().zip(w_row.iter()).zip(dw_row.iter()) {
            *d = wi * (gi - dot);
        }
    }
    ds
}
