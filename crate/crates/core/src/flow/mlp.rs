//! Dense layers over a flat parameter buffer, with ELU hidden activations and
//! a hand-written backward pass.

/// Location of one affine map `W x + b` inside the flat parameter vector.
/// `W` is row-major `n_out × n_in`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    pub fn new(offset: &mut usize, n_in: usize, n_out: usize) -> Self {
        let w = *offset;
        let b = w + n_in * n_out;
        *offset = b + n_out;
        Self { w, b, n_in, n_out }
    }

    pub fn size(&self) -> usize {
        self.n_in * self.n_out + self.n_out
    }

    pub fn apply(&self, params: &[f64], x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.n_in);
        out.clear();
        out.extend_from_slice(&params[self.b..self.b + self.n_out]);
        let w = &params[self.w..self.w + self.n_in * self.n_out];
        for (o, row) in out.iter_mut().zip(w.chunks_exact(self.n_in)) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients for upstream adjoint `g_out` and,
    /// when requested, writes the input adjoint.
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        g_out: &[f64],
        grad: &mut [f64],
        g_in: Option<&mut Vec<f64>>,
    ) {
        let (gw, rest) = grad[self.w..].split_at_mut(self.n_in * self.n_out);
        for (gb, g) in rest[..self.n_out].iter_mut().zip(g_out) {
            *gb += g;
        }
        for (row, &g) in gw.chunks_exact_mut(self.n_in).zip(g_out) {
            if g != 0.0 {
                for (r, xi) in row.iter_mut().zip(x) {
                    *r += g * xi;
                }
            }
        }
        if let Some(g_in) = g_in {
            g_in.clear();
            g_in.resize(self.n_in, 0.0);
            let w = &params[self.w..self.w + self.n_in * self.n_out];
            for (row, &g) in w.chunks_exact(self.n_in).zip(g_out) {
                if g != 0.0 {
                    for (gi, wi) in g_in.iter_mut().zip(row) {
                        *gi += g * wi;
                    }
                }
            }
        }
    }
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Multi-layer perceptron: hidden layers with ELU, linear output.
#[derive(Debug, Clone)]
pub(crate) struct Mlp {
    pub layers: Vec<Linear>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct MlpCache {
    /// Input to each linear layer.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pub pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    pub fn new(offset: &mut usize, n_in: usize, hidden: usize, n_hidden: usize, n_out: usize) -> Self {
        let mut layers = Vec::with_capacity(n_hidden + 1);
        let mut width = n_in;
        for _ in 0..n_hidden {
            layers.push(Linear::new(offset, width, hidden));
            width = hidden;
        }
        layers.push(Linear::new(offset, width, n_out));
        Self { layers }
    }

    pub fn output_layer(&self) -> &Linear {
        self.layers.last().expect("mlp has an output layer")
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> MlpCache {
        let mut cache = MlpCache::default();
        let mut a = x.to_vec();
        let (out_layer, hidden) = self.layers.split_last().expect("mlp has layers");
        for layer in hidden {
            let mut z = Vec::new();
            layer.apply(params, &a, &mut z);
            let next: Vec<f64> = z.iter().map(|&v| elu(v)).collect();
            cache.inputs.push(std::mem::replace(&mut a, next));
            cache.pre.push(z);
        }
        let mut out = Vec::new();
        out_layer.apply(params, &a, &mut out);
        cache.inputs.push(a);
        cache.output = out;
        cache
    }

    /// Backpropagates `g_out`, accumulating into `grad`; returns the input adjoint.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, g_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let mut g = g_out.to_vec();
        let mut g_in = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            layer.backward(params, &cache.inputs[i], &g, grad, Some(&mut g_in));
            if i > 0 {
                for (gi, &z) in g_in.iter_mut().zip(&cache.pre[i - 1]) {
                    *gi *= elu_grad(z);
                }
            }
            std::mem::swap(&mut g, &mut g_in);
        }
        g
    }
}
