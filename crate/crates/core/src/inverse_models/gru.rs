//! Stacked GRU mapping reading sequences to force means and log standard
//! deviations, trained by truncated backpropagation through time on a
//! Gaussian negative log-likelihood.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use super::{Standardizer, MODEL_FORMAT_VERSION};
use crate::error::{ensure_positive, Error, Result};

/// Which reading axes feed the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputAxes {
    /// (B_x, B_z).
    Two,
    /// (B_x, B_y, B_z).
    #[default]
    Three,
}

impl InputAxes {
    pub fn width(self) -> usize {
        match self {
            InputAxes::Two => 2,
            InputAxes::Three => 3,
        }
    }

    pub fn indices(self) -> &'static [usize] {
        match self {
            InputAxes::Two => &[0, 2],
            InputAxes::Three => &[0, 1, 2],
        }
    }

    pub fn parse(n: u32) -> Result<Self> {
        match n {
            2 => Ok(InputAxes::Two),
            3 => Ok(InputAxes::Three),
            other => Err(Error::Validation(format!("input axes must be 2 or 3, got {other}"))),
        }
    }

    pub fn select(self, reading: &[f64; 3]) -> Vec<f64> {
        self.indices().iter().map(|&i| reading[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GruConfig {
    pub layers: usize,
    pub hidden: usize,
    /// Truncation length for backpropagation, samples.
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub input_axes: InputAxes,
    /// Parallel contiguous streams per update.
    pub streams: usize,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Standardize targets with training statistics. A constant target is
    /// an error when enabled.
    pub normalize_targets: bool,
    /// Stop after this many updates even if epochs remain.
    pub max_updates: Option<usize>,
    /// Learning rate at the end of training as a fraction of the initial
    /// rate; the rate follows a cosine decay between the two.
    pub final_lr_fraction: f64,
}

impl Default for GruConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            hidden: 32,
            window: 100,
            epochs: 12,
            learning_rate: 3e-3,
            seed: 0,
            input_axes: InputAxes::Three,
            streams: 8,
            clip_norm: 1.0,
            normalize_targets: true,
            max_updates: None,
            final_lr_fraction: 0.1,
        }
    }
}

impl GruConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.window == 0 || self.streams == 0 {
            return Err(Error::Validation(
                "GRU layers, hidden size, window and streams must all be ≥ 1".into(),
            ));
        }
        ensure_positive("learning rate", self.learning_rate)?;
        ensure_positive("clip norm", self.clip_norm)?;
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(Error::Validation("final learning-rate fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Offsets of one layer's tensors inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct LayerShape {
    input: usize,
    w_ih: usize,
    w_hh: usize,
    b_ih: usize,
    b_hh: usize,
}

/// Parameter layout: per layer `w_ih (3H×I)`, `w_hh (3H×H)`, `b_ih (3H)`,
/// `b_hh (3H)` with gate blocks ordered reset, update, candidate; then the
/// head `w_out (4×H)`, `b_out (4)` producing (μ_x, μ_z, log σ_x, log σ_z).
#[derive(Debug, Clone)]
struct Layout {
    hidden: usize,
    layers: Vec<LayerShape>,
    w_out: usize,
    b_out: usize,
    len: usize,
}

const OUTPUTS: usize = 4;

impl Layout {
    fn new(input: usize, hidden: usize, layers: usize) -> Self {
        let mut at = 0;
        let mut shapes = Vec::with_capacity(layers);
        for l in 0..layers {
            let i = if l == 0 { input } else { hidden };
            let s = LayerShape {
                input: i,
                w_ih: at,
                w_hh: at + 3 * hidden * i,
                b_ih: at + 3 * hidden * (i + hidden),
                b_hh: at + 3 * hidden * (i + hidden) + 3 * hidden,
            };
            at = s.b_hh + 3 * hidden;
            shapes.push(s);
        }
        let w_out = at;
        let b_out = w_out + OUTPUTS * hidden;
        Self {
            hidden,
            layers: shapes,
            w_out,
            b_out,
            len: b_out + OUTPUTS,
        }
    }
}

/// Recurrent state: one hidden vector per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruState {
    pub hidden: Vec<Vec<f64>>,
}

/// Per-sample network output in newtons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceEstimate {
    pub mean: [f64; 2],
    pub sigma: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruModel {
    pub format_version: u32,
    pub layers: usize,
    pub hidden: usize,
    pub input_axes: InputAxes,
    pub input: Standardizer,
    pub output: Standardizer,
    pub params: Vec<f64>,
    pub seed: u64,
    pub training_source: String,
    /// Mean training loss per epoch (normalized units).
    pub loss_history: Vec<f64>,
}

/// Activations of one layer at one time step, kept for the backward pass.
#[derive(Debug, Clone, Default)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    hn: Vec<f64>,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[inline]
fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *o += acc;
    }
}

#[inline]
fn outer_add(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (row, &di) in g.chunks_exact_mut(cols).zip(d) {
        if di != 0.0 {
            for (gi, xi) in row.iter_mut().zip(x) {
                *gi += di * xi;
            }
        }
    }
}

#[inline]
fn matvec_t_add(w: &[f64], d: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (row, &di) in w.chunks_exact(cols).zip(d) {
        for (o, wi) in out.iter_mut().zip(row) {
            *o += di * wi;
        }
    }
}

/// One layer step. Fills `cache` and writes the new hidden state to `h`.
fn layer_step(params: &[f64], s: &LayerShape, hidden: usize, x: &[f64], h: &mut [f64], cache: &mut StepCache, scratch: &mut [f64]) {
    let hh = 3 * hidden;
    let (ai, ah) = scratch.split_at_mut(hh);
    ai.copy_from_slice(&params[s.b_ih..s.b_ih + hh]);
    ah.copy_from_slice(&params[s.b_hh..s.b_hh + hh]);
    matvec_add(&params[s.w_ih..s.w_ih + hh * s.input], x, ai);
    matvec_add(&params[s.w_hh..s.w_hh + hh * hidden], h, ah);
    cache.x.clear();
    cache.x.extend_from_slice(x);
    cache.h_prev.clear();
    cache.h_prev.extend_from_slice(h);
    cache.r.resize(hidden, 0.0);
    cache.z.resize(hidden, 0.0);
    cache.n.resize(hidden, 0.0);
    cache.hn.resize(hidden, 0.0);
    for k in 0..hidden {
        let r = sigmoid(ai[k] + ah[k]);
        let z = sigmoid(ai[hidden + k] + ah[hidden + k]);
        let hn = ah[2 * hidden + k];
        let n = (ai[2 * hidden + k] + r * hn).tanh();
        cache.r[k] = r;
        cache.z[k] = z;
        cache.n[k] = n;
        cache.hn[k] = hn;
        h[k] = (1.0 - z) * n + z * h[k];
    }
}

/// Backward through one layer step. `dh` is the gradient on the step's
/// output and becomes the gradient on its previous hidden state; the
/// gradient on the step input is added into `dx`.
#[allow(clippy::too_many_arguments)]
fn layer_step_back(
    params: &[f64],
    grad: &mut [f64],
    s: &LayerShape,
    hidden: usize,
    c: &StepCache,
    dh: &mut [f64],
    dx: Option<&mut [f64]>,
    scratch: &mut [f64],
) {
    let hh = 3 * hidden;
    let (dai, dah) = scratch.split_at_mut(hh);
    for k in 0..hidden {
        let (r, z, n) = (c.r[k], c.z[k], c.n[k]);
        let g = dh[k];
        let dn = g * (1.0 - z);
        let dz = g * (c.h_prev[k] - n);
        let dpre_n = dn * (1.0 - n * n);
        let dr = dpre_n * c.hn[k];
        let dpre_r = dr * r * (1.0 - r);
        let dpre_z = dz * z * (1.0 - z);
        dai[k] = dpre_r;
        dai[hidden + k] = dpre_z;
        dai[2 * hidden + k] = dpre_n;
        dah[k] = dpre_r;
        dah[hidden + k] = dpre_z;
        dah[2 * hidden + k] = dpre_n * r;
        dh[k] = g * z;
    }
    for (g, d) in grad[s.b_ih..s.b_ih + hh].iter_mut().zip(dai.iter()) {
        *g += d;
    }
    for (g, d) in grad[s.b_hh..s.b_hh + hh].iter_mut().zip(dah.iter()) {
        *g += d;
    }
    outer_add(&mut grad[s.w_ih..s.w_ih + hh * s.input], dai, &c.x);
    outer_add(&mut grad[s.w_hh..s.w_hh + hh * hidden], dah, &c.h_prev);
    matvec_t_add(&params[s.w_hh..s.w_hh + hh * hidden], dah, dh);
    if let Some(dx) = dx {
        matvec_t_add(&params[s.w_ih..s.w_ih + hh * s.input], dai, dx);
    }
}

/// Gaussian NLL in normalized units, averaged over steps and both axes,
/// without the constant ½·log 2π.
fn nll_term(out: &[f64; OUTPUTS], y: &[f64; 2]) -> f64 {
    (0..2)
        .map(|a| {
            let e = y[a] - out[a];
            out[2 + a] + 0.5 * e * e * (-2.0 * out[2 + a]).exp()
        })
        .sum()
}

fn nll_grad(out: &[f64; OUTPUTS], y: &[f64; 2], scale: f64) -> [f64; OUTPUTS] {
    let mut g = [0.0; OUTPUTS];
    for a in 0..2 {
        let e = y[a] - out[a];
        let inv = (-2.0 * out[2 + a]).exp();
        g[a] = -e * inv * scale;
        g[2 + a] = (1.0 - e * e * inv) * scale;
    }
    g
}

/// Raw network: parameters plus layout, operating on standardized data.
struct Net<'a> {
    params: &'a [f64],
    layout: Layout,
}

impl<'a> Net<'a> {
    fn head(&self, h: &[f64]) -> [f64; OUTPUTS] {
        let lay = &self.layout;
        let mut out = [0.0; OUTPUTS];
        out.copy_from_slice(&self.params[lay.b_out..lay.b_out + OUTPUTS]);
        matvec_add(&self.params[lay.w_out..lay.w_out + OUTPUTS * lay.hidden], h, &mut out);
        out
    }

    fn zero_state(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.layout.hidden]; self.layout.layers.len()]
    }

    /// Forward only, updating `state` in place.
    fn run(&self, xs: &[Vec<f64>], state: &mut [Vec<f64>], mut emit: impl FnMut([f64; OUTPUTS])) {
        let hidden = self.layout.hidden;
        let mut cache = StepCache::default();
        let mut scratch = vec![0.0; 6 * hidden];
        let mut input = Vec::with_capacity(hidden.max(3));
        for x in xs {
            input.clear();
            input.extend_from_slice(x);
            for (l, s) in self.layout.layers.iter().enumerate() {
                layer_step(self.params, s, hidden, &input, &mut state[l], &mut cache, &mut scratch);
                input.clear();
                input.extend_from_slice(&state[l]);
            }
            emit(self.head(&input));
        }
    }

    /// Loss over one window and its gradient, accumulated into `grad`.
    /// `state` is advanced to the end of the window. `scale` multiplies every
    /// per-step loss term.
    fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[[f64; 2]], state: &mut [Vec<f64>], scale: f64, grad: &mut [f64]) -> f64 {
        let lay = &self.layout;
        let hidden = lay.hidden;
        let depth = lay.layers.len();
        let steps = xs.len();
        let mut caches: Vec<Vec<StepCache>> = vec![vec![StepCache::default(); depth]; steps];
        let mut outs = Vec::with_capacity(steps);
        let mut scratch = vec![0.0; 6 * hidden];
        let mut input = Vec::with_capacity(hidden.max(3));
        let mut loss = 0.0;
        for t in 0..steps {
            input.clear();
            input.extend_from_slice(&xs[t]);
            for (l, s) in lay.layers.iter().enumerate() {
                layer_step(self.params, s, hidden, &input, &mut state[l], &mut caches[t][l], &mut scratch);
                input.clear();
                input.extend_from_slice(&state[l]);
            }
            let out = self.head(&input);
            loss += scale * nll_term(&out, &ys[t]);
            outs.push(out);
        }

        let mut carry = vec![vec![0.0; hidden]; depth];
        let mut dx_below = vec![0.0; hidden];
        for t in (0..steps).rev() {
            let g = nll_grad(&outs[t], &ys[t], scale);
            let top = &state_after(&caches[t][depth - 1]);
            for (o, &go) in g.iter().enumerate() {
                grad[lay.b_out + o] += go;
                for k in 0..hidden {
                    grad[lay.w_out + o * hidden + k] += go * top[k];
                }
            }
            matvec_t_add(&self.params[lay.w_out..lay.w_out + OUTPUTS * hidden], &g, &mut carry[depth - 1]);
            for l in (0..depth).rev() {
                let s = &lay.layers[l];
                if l > 0 {
                    dx_below.iter_mut().for_each(|v| *v = 0.0);
                    layer_step_back(self.params, grad, s, hidden, &caches[t][l], &mut carry[l], Some(&mut dx_below), &mut scratch);
                    for (c, d) in carry[l - 1].iter_mut().zip(&dx_below) {
                        *c += d;
                    }
                } else {
                    layer_step_back(self.params, grad, s, hidden, &caches[t][l], &mut carry[l], None, &mut scratch);
                }
            }
        }
        loss
    }
}

/// Hidden state produced by a cached step.
fn state_after(c: &StepCache) -> Vec<f64> {
    (0..c.r.len())
        .map(|k| (1.0 - c.z[k]) * c.n[k] + c.z[k] * c.h_prev[k])
        .collect()
}

impl GruModel {
    /// Freshly initialized, untrained model with identity normalization.
    pub fn init(cfg: &GruConfig) -> Result<Self> {
        cfg.validate()?;
        let width = cfg.input_axes.width();
        let layout = Layout::new(width, cfg.hidden, cfg.layers);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let bound = 1.0 / (cfg.hidden as f64).sqrt();
        let params = (0..layout.len).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            layers: cfg.layers,
            hidden: cfg.hidden,
            input_axes: cfg.input_axes,
            input: Standardizer::identity(width),
            output: Standardizer::identity(2),
            params,
            seed: cfg.seed,
            training_source: String::new(),
            loss_history: Vec::new(),
        })
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_axes.width(), self.hidden, self.layers)
    }

    fn net(&self) -> Net<'_> {
        Net {
            params: &self.params,
            layout: self.layout(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.layers == 0 || self.hidden == 0 {
            return Err(Error::Validation("GRU needs at least one layer and one hidden unit".into()));
        }
        let expected = self.layout().len;
        if self.params.len() != expected {
            return Err(Error::Validation(format!(
                "GRU has {} parameters, expected {expected} for {} layers × {} hidden",
                self.params.len(),
                self.layers,
                self.hidden
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("GRU parameters must be finite".into()));
        }
        self.input.validate(self.input_axes.width())?;
        self.output.validate(2)
    }

    pub fn zero_state(&self) -> GruState {
        GruState {
            hidden: self.net().zero_state(),
        }
    }

    /// Run on feature rows of the model's input width (gauss). Returns the
    /// estimates and the final state.
    pub fn forward(&self, features: &[Vec<f64>], state: Option<GruState>) -> Result<(Vec<ForceEstimate>, GruState)> {
        let width = self.input_axes.width();
        if let Some(bad) = features.iter().position(|f| f.len() != width) {
            return Err(Error::Validation(format!(
                "input row {bad} has width {}, model expects {width}",
                features[bad].len()
            )));
        }
        let xs: Vec<Vec<f64>> = features.iter().map(|f| self.input.apply(f)).collect();
        let mut state = state.unwrap_or_else(|| self.zero_state());
        if state.hidden.len() != self.layers || state.hidden.iter().any(|h| h.len() != self.hidden) {
            return Err(Error::Validation("recurrent state does not match the model shape".into()));
        }
        let mut out = Vec::with_capacity(xs.len());
        self.net().run(&xs, &mut state.hidden, |o| {
            out.push(ForceEstimate {
                mean: [self.output.invert_one(0, o[0]), self.output.invert_one(1, o[1])],
                sigma: [o[2].exp() * self.output.scale[0], o[3].exp() * self.output.scale[1]],
            });
        });
        Ok((out, state))
    }

    /// Run on full 3-axis readings, selecting the model's input axes.
    pub fn forward_readings(&self, readings: &[[f64; 3]], state: Option<GruState>) -> Result<(Vec<ForceEstimate>, GruState)> {
        let features: Vec<Vec<f64>> = readings.iter().map(|r| self.input_axes.select(r)).collect();
        self.forward(&features, state)
    }

    /// Mean NLL (normalized units) over one window from `state`, and its
    /// gradient with respect to every parameter.
    pub fn loss_gradient(&self, features: &[Vec<f64>], targets: &[[f64; 2]], state: Option<GruState>) -> Result<(f64, Vec<f64>)> {
        if features.len() != targets.len() || features.is_empty() {
            return Err(Error::Validation("loss needs matching, non-empty inputs and targets".into()));
        }
        let xs: Vec<Vec<f64>> = features.iter().map(|f| self.input.apply(f)).collect();
        let ys: Vec<[f64; 2]> = targets
            .iter()
            .map(|y| [self.output.apply_one(0, y[0]), self.output.apply_one(1, y[1])])
            .collect();
        let mut state = state.unwrap_or_else(|| self.zero_state()).hidden;
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / (2.0 * xs.len() as f64);
        let loss = self.net().loss_and_grad(&xs, &ys, &mut state, scale, &mut grad);
        Ok((loss, grad))
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, features: &[Vec<f64>], targets: &[[f64; 2]], state: Option<GruState>) -> Result<f64> {
        let mut total = 0.0;
        let ys: Vec<[f64; 2]> = targets
            .iter()
            .map(|y| [self.output.apply_one(0, y[0]), self.output.apply_one(1, y[1])])
            .collect();
        let xs: Vec<Vec<f64>> = features.iter().map(|f| self.input.apply(f)).collect();
        let mut state = state.unwrap_or_else(|| self.zero_state()).hidden;
        let mut t = 0;
        self.net().run(&xs, &mut state, |o| {
            total += nll_term(&o, &ys[t]);
            t += 1;
        });
        Ok(total / (2.0 * xs.len() as f64))
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
    }
}

/// Train on the training split of `dataset`. Each contiguous training
/// segment is cut into `streams` stretches that are walked window by window
/// with the hidden state carried across windows; one update averages the
/// windows of all streams at the same position.
pub fn gru_train(dataset: &Dataset, cfg: &GruConfig) -> Result<GruModel> {
    cfg.validate()?;
    let train: Vec<usize> = dataset
        .segments(Split::Train)
        .into_iter()
        .flatten()
        .collect();
    if train.len() < cfg.window {
        return Err(Error::Validation(format!(
            "training split has {} samples, fewer than one window of {}",
            train.len(),
            cfg.window
        )));
    }
    let features: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| cfg.input_axes.select(&dataset.samples[i].reading))
        .collect();
    let targets: Vec<[f64; 2]> = train.iter().map(|&i| dataset.samples[i].force).collect();
    let mut model = GruModel::init(cfg)?;
    model.input = Standardizer::fit(features.iter().map(|f| f.as_slice()), cfg.input_axes.width(), true)?;
    model.output = if cfg.normalize_targets {
        Standardizer::fit(targets.iter().map(|t| t.as_slice()), 2, false)?
    } else {
        Standardizer::identity(2)
    };
    model.training_source = dataset.meta.id.clone();
    let xs: Vec<Vec<f64>> = features.iter().map(|f| model.input.apply(f)).collect();
    let ys: Vec<[f64; 2]> = targets
        .iter()
        .map(|y| [model.output.apply_one(0, y[0]), model.output.apply_one(1, y[1])])
        .collect();

    let streams = cfg.streams.min(xs.len() / cfg.window).max(1);
    let stretch = xs.len() / streams;
    let windows_per_stream = stretch / cfg.window;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut adam = Adam {
        m: vec![0.0; model.params.len()],
        v: vec![0.0; model.params.len()],
        t: 0,
    };
    let layout = model.layout();
    let mut grad = vec![0.0; model.params.len()];
    let mut updates = 0usize;
    let scale = 1.0 / (2.0 * (cfg.window * streams) as f64);
    let planned = (cfg.epochs * windows_per_stream).min(cfg.max_updates.unwrap_or(usize::MAX)).max(1);
    let rate = |update: usize| {
        let progress = (update as f64 / planned as f64).min(1.0);
        let k = cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        cfg.learning_rate * k
    };
    'epochs: for epoch in 0..cfg.epochs {
        // Shift window boundaries each epoch so truncation points vary.
        let offset = if windows_per_stream > 1 {
            rng.random_range(0..cfg.window)
        } else {
            0
        };
        let usable = (stretch - offset) / cfg.window;
        let mut states = vec![vec![vec![0.0; cfg.hidden]; cfg.layers]; streams];
        let mut epoch_loss = 0.0;
        let mut epoch_updates = 0usize;
        for w in 0..usable {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            let net = Net {
                params: &model.params,
                layout: layout.clone(),
            };
            for (s, state) in states.iter_mut().enumerate() {
                let start = s * stretch + offset + w * cfg.window;
                let range = start..start + cfg.window;
                loss += net.loss_and_grad(&xs[range.clone()], &ys[range], state, scale, &mut grad);
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite loss or gradient at epoch {epoch}, window {w} (loss {loss}, lr {}, {} updates so far)",
                    cfg.learning_rate, updates
                )));
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.clip_norm {
                let k = cfg.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            adam.step(&mut model.params, &grad, rate(updates));
            epoch_loss += loss;
            epoch_updates += 1;
            updates += 1;
            if cfg.max_updates.is_some_and(|m| updates >= m) {
                model.loss_history.push(epoch_loss / epoch_updates as f64);
                break 'epochs;
            }
        }
        let mean = epoch_loss / epoch_updates.max(1) as f64;
        log::debug!("GRU epoch {epoch}: mean NLL {mean:.5}");
        model.loss_history.push(mean);
    }
    Ok(model)
}
