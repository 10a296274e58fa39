//! Conditional Gaussianization flow over circuit parameter vectors.
//!
//! Generation maps a latent `z ~ N(0, σ²I)` to parameters through `K`
//! layers, each a Householder rotation followed by the dimension-wise
//! marginal map `Ψ(x) = Φ⁻¹(F(x))`, where `F` is a logistic-mixture CDF.
//! The mixture anchors and log-bandwidths of every layer are emitted by a
//! conditioning MLP fed with a linear embedding of the context vector.
//!
//! "forward" is latent → parameters, "inverse" is parameters → latent.
//! Log-likelihood gradients are exact: the inverse marginal map is
//! differentiated through its defining relation `F(y) = Φ(x)`.
//!
//! All trainable scalars live in one flat vector so optimizers and
//! checkpoints can treat the model as a plain `Vec<f64>`.

mod checkpoint;
mod mixture;
mod mlp;
pub(crate) mod normal;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ContextVector;
use mixture::{sigmoid, Mixture};
use mlp::{Linear, Mlp, MlpCache};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Parameter-vector dimension `d`.
    pub dim: usize,
    /// Length of the raw context vector.
    pub context_len: usize,
    /// Number of rotation + marginal layers `K`.
    pub layers: usize,
    /// Logistic components per dimension `P`.
    pub mixture_size: usize,
    pub embed_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Householder reflections per rotation; `None` means `dim`.
    pub reflections: Option<usize>,
    pub base_variance: f64,
    /// One conditioner emitting all layers' marginals instead of one per layer.
    pub share_conditioner: bool,
    /// Spread of the initial anchor grid.
    pub anchor_init_std: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            context_len: 1,
            layers: 7,
            mixture_size: 32,
            embed_dim: 16,
            hidden_width: 256,
            hidden_layers: 3,
            reflections: None,
            base_variance: 0.01,
            share_conditioner: false,
            anchor_init_std: 0.1,
        }
    }
}

impl FlowConfig {
    pub fn new(dim: usize, context_len: usize, layers: usize) -> Self {
        Self {
            dim,
            context_len,
            layers,
            ..Self::default()
        }
    }

    pub fn reflections(&self) -> usize {
        self.reflections.unwrap_or(self.dim)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("flow config: {msg}")));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.mixture_size == 0 {
            return bad("mixture_size must be positive");
        }
        if !(self.base_variance > 0.0 && self.base_variance.is_finite()) {
            return bad("base_variance must be positive");
        }
        if self.layers > 0 && (self.embed_dim == 0 || self.hidden_width == 0) {
            return bad("embed_dim and hidden_width must be positive");
        }
        Ok(())
    }
}

/// Which part of the model a trainable scalar belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamClass {
    Embedding,
    Householder,
    ConditionerHidden,
    /// Output-layer rows emitting mixture anchors.
    AnchorHead,
    /// Output-layer rows emitting log-bandwidths.
    BandwidthHead,
}

#[derive(Debug, Clone)]
struct Layout {
    embed: Linear,
    householder: Vec<usize>,
    conditioners: Vec<Mlp>,
    total: usize,
}

impl Layout {
    fn new(cfg: &FlowConfig) -> Self {
        let mut offset = 0;
        let embed_dim = if cfg.layers == 0 { 0 } else { cfg.embed_dim };
        let embed = Linear::new(&mut offset, cfg.context_len, embed_dim);
        let m = cfg.reflections();
        let householder = (0..cfg.layers)
            .map(|_| {
                let start = offset;
                offset += m * cfg.dim;
                start
            })
            .collect();
        let per_layer = 2 * cfg.dim * cfg.mixture_size;
        let conditioners = if cfg.layers == 0 {
            Vec::new()
        } else if cfg.share_conditioner {
            vec![Mlp::new(
                &mut offset,
                embed_dim,
                cfg.hidden_width,
                cfg.hidden_layers,
                per_layer * cfg.layers,
            )]
        } else {
            (0..cfg.layers)
                .map(|_| Mlp::new(&mut offset, embed_dim, cfg.hidden_width, cfg.hidden_layers, per_layer))
                .collect()
        };
        Self {
            embed,
            householder,
            conditioners,
            total: offset,
        }
    }
}

/// Conditioner outputs for one context, plus the activations needed to
/// backpropagate into the conditioner and embedding weights.
#[derive(Debug, Clone)]
pub struct Conditioned {
    context: Vec<f64>,
    embed: Vec<f64>,
    caches: Vec<MlpCache>,
    bandwidth: Vec<Vec<f64>>,
}

/// Per-layer values recorded during an inverse pass.
struct Tape {
    /// Input to the inverse marginal map of each layer (indexed by layer).
    xs: Vec<Vec<f64>>,
    /// Output of the inverse marginal map of each layer.
    ys: Vec<Vec<f64>>,
    z: Vec<f64>,
    logdet: f64,
}

#[derive(Debug, Clone)]
pub struct FlowModel {
    config: FlowConfig,
    term_order: Vec<String>,
    layout: Layout,
    params: Vec<f64>,
}

/// Bandwidth giving the marginal map unit slope at the origin for the given
/// symmetric anchor grid, so an untrained layer is close to the identity.
fn unit_slope_bandwidth(anchors: &[f64]) -> f64 {
    let phi0 = (-normal::LN_SQRT_2PI).exp();
    let slope = |h: f64| {
        anchors
            .iter()
            .map(|&a| {
                let s = sigmoid(-a / h);
                s * (1.0 - s) / h
            })
            .sum::<f64>()
            / anchors.len() as f64
            / phi0
    };
    // slope decreases in h over the bracket
    let (mut lo, mut hi) = (1e-3_f64, 1e3_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if slope(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

impl FlowModel {
    /// Builds a freshly initialized model.
    ///
    /// The conditioner output layers start with zero weights and a bias
    /// holding a symmetric anchor grid and a calibrated bandwidth, so every
    /// marginal map starts near the identity and samples start near the base.
    pub fn new<R: Rng + ?Sized>(config: FlowConfig, term_order: Vec<String>, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if term_order.len() != config.context_len {
            return Err(Error::DimensionMismatch {
                what: "context length vs term order",
                expected: config.context_len,
                got: term_order.len(),
            });
        }
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];

        let uniform_fill = |lin: &Linear, params: &mut [f64], rng: &mut R| {
            if lin.n_in == 0 || lin.n_out == 0 {
                return;
            }
            let bound = 1.0 / (lin.n_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for p in &mut params[lin.w..lin.w + lin.size()] {
                *p = dist.sample(rng);
            }
        };
        uniform_fill(&layout.embed, &mut params, rng);

        let d = config.dim;
        let m = config.reflections();
        for &start in &layout.householder {
            for r in 0..m {
                let v = &mut params[start + r * d..start + (r + 1) * d];
                loop {
                    for x in v.iter_mut() {
                        *x = StandardNormal.sample(rng);
                    }
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-6 {
                        v.iter_mut().for_each(|x| *x /= norm);
                        break;
                    }
                }
            }
        }

        let p = config.mixture_size;
        let anchors: Vec<f64> = (0..p)
            .map(|j| config.anchor_init_std * normal::ppf((j as f64 + 0.5) / p as f64))
            .collect();
        let log_bw = unit_slope_bandwidth(&anchors).ln();
        let per_layer = 2 * d * p;
        for mlp in &layout.conditioners {
            let (out, hidden) = mlp.layers.split_last().expect("mlp has layers");
            for lin in hidden {
                uniform_fill(lin, &mut params, rng);
            }
            let bias = &mut params[out.b..out.b + out.n_out];
            for chunk in bias.chunks_exact_mut(per_layer) {
                let (a, s) = chunk.split_at_mut(d * p);
                for row in a.chunks_exact_mut(p) {
                    row.copy_from_slice(&anchors);
                }
                s.fill(log_bw);
            }
        }

        Ok(Self {
            config,
            term_order,
            layout,
            params,
        })
    }

    pub(crate) fn from_parts(config: FlowConfig, term_order: Vec<String>, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch {
                what: "checkpoint parameter count",
                expected: layout.total,
                got: params.len(),
            });
        }
        if term_order.len() != config.context_len {
            return Err(Error::DimensionMismatch {
                what: "context length vs term order",
                expected: config.context_len,
                got: term_order.len(),
            });
        }
        Ok(Self {
            config,
            term_order,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn term_order(&self) -> &[String] {
        &self.term_order
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Class of the trainable scalar at `index`.
    pub fn param_class(&self, index: usize) -> ParamClass {
        let lay = &self.layout;
        if index < lay.embed.w + lay.embed.size() {
            return ParamClass::Embedding;
        }
        let hh = self.config.reflections() * self.config.dim;
        if lay.householder.iter().any(|&s| index >= s && index < s + hh) {
            return ParamClass::Householder;
        }
        let per_layer = 2 * self.config.dim * self.config.mixture_size;
        let half = per_layer / 2;
        for mlp in &lay.conditioners {
            let out = mlp.output_layer();
            let row = if index >= out.w && index < out.b {
                Some((index - out.w) / out.n_in)
            } else if index >= out.b && index < out.b + out.n_out {
                Some(index - out.b)
            } else {
                None
            };
            if let Some(row) = row {
                return if row % per_layer < half {
                    ParamClass::AnchorHead
                } else {
                    ParamClass::BandwidthHead
                };
            }
        }
        ParamClass::ConditionerHidden
    }

    fn check_context(&self, ctx: &ContextVector) -> Result<()> {
        if ctx.term_order != self.term_order {
            return Err(Error::ContextMismatch);
        }
        Ok(())
    }

    fn check_dim(&self, v: &[f64], what: &'static str) -> Result<()> {
        if v.len() != self.config.dim {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.config.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Runs the embedding and conditioners for one context.
    pub fn condition(&self, ctx: &ContextVector) -> Result<Conditioned> {
        self.check_context(ctx)?;
        let mut embed = Vec::new();
        self.layout.embed.apply(&self.params, &ctx.values, &mut embed);
        let caches: Vec<MlpCache> = self
            .layout
            .conditioners
            .iter()
            .map(|mlp| mlp.forward(&self.params, &embed))
            .collect();
        let mut cond = Conditioned {
            context: ctx.values.clone(),
            embed,
            caches,
            bandwidth: Vec::with_capacity(self.config.layers),
        };
        let dp = self.config.dim * self.config.mixture_size;
        for layer in 0..self.config.layers {
            let out = self.cond_output(&cond, layer);
            let bw: Vec<f64> = out[dp..].iter().map(|s| s.exp()).collect();
            if out.iter().any(|v| !v.is_finite()) || bw.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                return Err(Error::NonFinite { layer });
            }
            cond.bandwidth.push(bw);
        }
        Ok(cond)
    }

    fn cond_output<'a>(&self, cond: &'a Conditioned, layer: usize) -> &'a [f64] {
        let per_layer = 2 * self.config.dim * self.config.mixture_size;
        if self.config.share_conditioner {
            &cond.caches[0].output[layer * per_layer..(layer + 1) * per_layer]
        } else {
            &cond.caches[layer].output
        }
    }

    fn mixture<'a>(&self, cond: &'a Conditioned, layer: usize, k: usize) -> Mixture<'a> {
        let p = self.config.mixture_size;
        let dp = self.config.dim * p;
        let out = self.cond_output(cond, layer);
        Mixture {
            anchors: &out[k * p..(k + 1) * p],
            log_bw: &out[dp + k * p..dp + (k + 1) * p],
            bw: &cond.bandwidth[layer][k * p..(k + 1) * p],
        }
    }

    fn householder(&self, layer: usize, r: usize) -> &[f64] {
        let d = self.config.dim;
        let start = self.layout.householder[layer] + r * d;
        &self.params[start..start + d]
    }

    fn reflect(v: &[f64], x: &mut [f64]) {
        let n: f64 = v.iter().map(|a| a * a).sum();
        let s: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        let c = 2.0 * s / n;
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi -= c * vi;
        }
    }

    /// `x <- R x` with `R = H_0 H_1 ⋯ H_{m-1}`.
    fn rotate(&self, layer: usize, x: &mut [f64]) {
        for r in (0..self.config.reflections()).rev() {
            Self::reflect(self.householder(layer, r), x);
        }
    }

    /// `x <- Rᵀ x`.
    fn rotate_transpose(&self, layer: usize, x: &mut [f64]) {
        for r in 0..self.config.reflections() {
            Self::reflect(self.householder(layer, r), x);
        }
    }

    /// The assembled orthogonal matrix of one rotation layer, row-major.
    pub fn rotation_matrix(&self, layer: usize) -> Vec<f64> {
        let d = self.config.dim;
        let mut m = vec![0.0; d * d];
        let mut col = vec![0.0; d];
        for j in 0..d {
            col.fill(0.0);
            col[j] = 1.0;
            self.rotate(layer, &mut col);
            for i in 0..d {
                m[i * d + j] = col[i];
            }
        }
        m
    }

    fn base_log_pdf(&self, z: &[f64]) -> f64 {
        let var = self.config.base_variance;
        let sq: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * sq / var - z.len() as f64 * (normal::LN_SQRT_2PI + 0.5 * var.ln())
    }

    /// Latent → parameters, also returning `log p(θ | γ)`.
    pub fn forward_with(&self, cond: &Conditioned, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dim(z, "latent length")?;
        let mut x = z.to_vec();
        let mut logp = self.base_log_pdf(z);
        for layer in 0..self.config.layers {
            self.rotate(layer, &mut x);
            for (k, xk) in x.iter_mut().enumerate() {
                let m = self.mixture(cond, layer, k);
                let out = m.psi(*xk);
                logp -= m.log_pdf(*xk) - normal::log_pdf(out);
                *xk = out;
            }
            if x.iter().any(|v| !v.is_finite()) || !logp.is_finite() {
                return Err(Error::NonFinite { layer });
            }
        }
        Ok((x, logp))
    }

    pub fn forward(&self, z: &[f64], ctx: &ContextVector) -> Result<Vec<f64>> {
        let cond = self.condition(ctx)?;
        Ok(self.forward_with(&cond, z)?.0)
    }

    fn inverse_tape(&self, cond: &Conditioned, theta: &[f64]) -> Result<Tape> {
        self.check_dim(theta, "parameter vector length")?;
        let k_layers = self.config.layers;
        let mut xs = vec![Vec::new(); k_layers];
        let mut ys = vec![Vec::new(); k_layers];
        let mut x = theta.to_vec();
        let mut logdet = 0.0;
        for layer in (0..k_layers).rev() {
            let mut y = Vec::with_capacity(x.len());
            for (k, &xk) in x.iter().enumerate() {
                let m = self.mixture(cond, layer, k);
                let yk = m.psi_inverse(xk)?;
                logdet += normal::log_pdf(xk) - m.log_pdf(yk);
                y.push(yk);
            }
            if y.iter().any(|v| !v.is_finite()) || !logdet.is_finite() {
                return Err(Error::NonFinite { layer });
            }
            let mut next = y.clone();
            self.rotate_transpose(layer, &mut next);
            xs[layer] = std::mem::replace(&mut x, next);
            ys[layer] = y;
        }
        Ok(Tape { xs, ys, z: x, logdet })
    }

    /// Parameters → latent, with `log |det ∂z/∂θ|`.
    pub fn inverse_with(&self, cond: &Conditioned, theta: &[f64]) -> Result<(Vec<f64>, f64)> {
        let tape = self.inverse_tape(cond, theta)?;
        Ok((tape.z, tape.logdet))
    }

    pub fn inverse(&self, theta: &[f64], ctx: &ContextVector) -> Result<(Vec<f64>, f64)> {
        let cond = self.condition(ctx)?;
        self.inverse_with(&cond, theta)
    }

    pub fn log_prob_with(&self, cond: &Conditioned, theta: &[f64]) -> Result<f64> {
        let (z, logdet) = self.inverse_with(cond, theta)?;
        Ok(self.base_log_pdf(&z) + logdet)
    }

    pub fn log_prob(&self, theta: &[f64], ctx: &ContextVector) -> Result<f64> {
        let cond = self.condition(ctx)?;
        self.log_prob_with(&cond, theta)
    }

    /// Draws one latent from the base distribution.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(0.0, self.config.base_variance.sqrt()).expect("positive variance");
        (0..self.config.dim).map(|_| normal.sample(rng)).collect()
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, cond: &Conditioned, rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let z = self.sample_latent(rng);
        self.forward_with(cond, &z)
    }

    /// Draws `count` parameter vectors with their log-likelihoods.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        ctx: &ContextVector,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<(Vec<f64>, f64)>> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let cond = self.condition(ctx)?;
        (0..count).map(|_| self.sample_with(&cond, rng)).collect()
    }

    /// Adds `weight · ∇ log p(θ | γ)` for every `(θ, weight)` in `items`
    /// (all sharing the conditioned context) into `grad`, and returns
    /// `Σ weight · log p`.
    pub fn accumulate_log_prob_grad(
        &self,
        cond: &Conditioned,
        items: &[(&[f64], f64)],
        grad: &mut [f64],
    ) -> Result<f64> {
        if grad.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient buffer length",
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let d = self.config.dim;
        let p = self.config.mixture_size;
        let dp = d * p;
        let m_refl = self.config.reflections();
        let var = self.config.base_variance;
        let k_layers = self.config.layers;

        let mut out_adj: Vec<Vec<f64>> = cond.caches.iter().map(|c| vec![0.0; c.output.len()]).collect();
        let mut total = 0.0;

        let mut weights = vec![0.0; p];
        let mut sig = vec![0.0; p];
        let mut us = vec![0.0; p];
        let mut chain: Vec<Vec<f64>> = vec![vec![0.0; d]; m_refl + 1];

        for &(theta, wgt) in items {
            let tape = self.inverse_tape(cond, theta)?;
            total += wgt * (self.base_log_pdf(&tape.z) + tape.logdet);
            if wgt == 0.0 {
                continue;
            }
            let mut adj: Vec<f64> = tape.z.iter().map(|zi| -wgt * zi / var).collect();

            // layer 0 was the last one applied in the inverse pass
            for layer in 0..k_layers {
                // out = Rᵀ y = H_{m-1} ⋯ H_0 y
                let y = &tape.ys[layer];
                chain[0].copy_from_slice(y);
                for r in 0..m_refl {
                    let (head, tail) = chain.split_at_mut(r + 1);
                    tail[0].copy_from_slice(&head[r]);
                    Self::reflect(self.householder(layer, r), &mut tail[0]);
                }
                let hh_start = self.layout.householder[layer];
                for r in (0..m_refl).rev() {
                    let v = self.householder(layer, r);
                    let a = &chain[r];
                    let n: f64 = v.iter().map(|x| x * x).sum();
                    let s: f64 = v.iter().zip(a).map(|(x, y)| x * y).sum();
                    let t: f64 = v.iter().zip(&adj).map(|(x, y)| x * y).sum();
                    let g = &mut grad[hh_start + r * d..hh_start + (r + 1) * d];
                    for i in 0..d {
                        g[i] += -2.0 * ((s / n) * adj[i] + t * a[i] / n - 2.0 * t * s * v[i] / (n * n));
                    }
                    Self::reflect(v, &mut adj);
                }

                // adj now holds the adjoint of y; push through y = Ψ⁻¹(x)
                let (ci, base) = if self.config.share_conditioner {
                    (0, layer * 2 * dp)
                } else {
                    (layer, 0)
                };
                let xs = &tape.xs[layer];
                for k in 0..d {
                    let m = self.mixture(cond, layer, k);
                    let (x, yk) = (xs[k], y[k]);
                    let r = m.adjoint_terms(yk, &mut weights, &mut sig, &mut us);
                    let dydx = (normal::log_pdf(x) - m.log_pdf(yk)).exp();
                    let y_bar = adj[k];
                    adj[k] = y_bar * dydx + wgt * (-x - r * dydx);
                    let oa = &mut out_adj[ci];
                    for j in 0..p {
                        let w = weights[j];
                        let h = m.bw[j];
                        let dy_dmu = w;
                        let dy_ds = w * h * us[j];
                        let dt_dmu = w * (1.0 - 2.0 * sig[j]) / h - r * dy_dmu;
                        let dt_ds = w * (us[j] * (1.0 - 2.0 * sig[j]) + 1.0) - r * dy_ds;
                        oa[base + k * p + j] += y_bar * dy_dmu + wgt * dt_dmu;
                        oa[base + dp + k * p + j] += y_bar * dy_ds + wgt * dt_ds;
                    }
                }
            }
        }

        if k_layers > 0 {
            let mut embed_adj = vec![0.0; cond.embed.len()];
            for (mlp, (cache, g_out)) in self.layout.conditioners.iter().zip(cond.caches.iter().zip(&out_adj)) {
                let g_in = mlp.backward(&self.params, cache, g_out, grad);
                for (a, b) in embed_adj.iter_mut().zip(&g_in) {
                    *a += b;
                }
            }
            self.layout
                .embed
                .backward(&self.params, &cond.context, &embed_adj, grad, None);
        }
        Ok(total)
    }

    /// Negative mean log-likelihood of `(θ, γ)` pairs and its exact gradient
    /// with respect to every trainable scalar.
    pub fn nll_and_grad(&self, batch: &[(&[f64], &ContextVector)]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let weight = -1.0 / batch.len() as f64;
        let weighted: Vec<(&[f64], &ContextVector, f64)> =
            batch.iter().map(|&(t, c)| (t, c, weight)).collect();
        self.weighted_log_prob_grad(&weighted)
    }

    /// `Σ w_i log p(θ_i | γ_i)` and its gradient. Samples are grouped by
    /// context in order of first appearance so each conditioner runs once
    /// per distinct context.
    pub fn weighted_log_prob_grad(&self, items: &[(&[f64], &ContextVector, f64)]) -> Result<(f64, Vec<f64>)> {
        let mut groups: Vec<(&ContextVector, Vec<(&[f64], f64)>)> = Vec::new();
        for &(theta, ctx, w) in items {
            match groups.iter_mut().find(|(c, _)| same_context(c, ctx)) {
                Some((_, members)) => members.push((theta, w)),
                None => groups.push((ctx, vec![(theta, w)])),
            }
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for (ctx, members) in groups {
            let cond = self.condition(ctx)?;
            total += self.accumulate_log_prob_grad(&cond, &members, &mut grad)?;
        }
        Ok((total, grad))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        checkpoint::load(path)
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        checkpoint::encode(self)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        checkpoint::decode(bytes)
    }
}

fn same_context(a: &ContextVector, b: &ContextVector) -> bool {
    a.values.len() == b.values.len()
        && a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits())
}
