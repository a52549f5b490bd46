//! Feed-forward scalar network on invariant inputs with softplus hidden
//! layers and a linear output layer.
//!
//! With non-negative weights (biases free) the output is convex and
//! non-decreasing in every input.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `log(1 + exp(x))`, overflow-safe.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, the derivative of [`softplus`].
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkArchitecture {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub constrain_weights: bool,
}

impl NetworkArchitecture {
    pub fn new(
        input_dim: usize,
        hidden_layers: Vec<usize>,
        constrain_weights: bool,
    ) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_layers,
            constrain_weights,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim != 4 && self.input_dim != 6 {
            return Err(Error::InvalidParameter(format!(
                "network input dimension must be 4 or 6, got {}",
                self.input_dim
            )));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidParameter(
                "every hidden layer needs at least one node".into(),
            ));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        Layout::new(self).len
    }
}

/// Offsets of each block inside the flat parameter vector.
///
/// Order: for every hidden layer its weights (row-major, one row per node)
/// followed by its biases; the output weights come last.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    layers: Vec<LayerLayout>,
    output: usize,
    len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    n_in: usize,
    n_out: usize,
    weights: usize,
    biases: usize,
}

impl Layout {
    fn new(arch: &NetworkArchitecture) -> Self {
        let mut layers = Vec::with_capacity(arch.hidden_layers.len());
        let mut n_in = arch.input_dim;
        let mut off = 0;
        for &n_out in &arch.hidden_layers {
            layers.push(LayerLayout {
                n_in,
                n_out,
                weights: off,
                biases: off + n_in * n_out,
            });
            off += n_in * n_out + n_out;
            n_in = n_out;
        }
        let output = off;
        Self {
            layers,
            output,
            len: output + n_in,
        }
    }
}

/// Network parameters as a flat vector with a structured view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkDocument", try_from = "NetworkDocument")]
pub struct NetworkParams {
    architecture: NetworkArchitecture,
    layout: Layout,
    values: Vec<f64>,
    seed: Option<u64>,
}

impl NetworkParams {
    pub fn zeros(architecture: NetworkArchitecture) -> Self {
        let layout = Layout::new(&architecture);
        let values = vec![0.0; layout.len];
        Self {
            architecture,
            layout,
            values,
            seed: None,
        }
    }

    pub fn from_flat(architecture: NetworkArchitecture, values: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(&architecture);
        if values.len() != layout.len {
            return Err(Error::DimensionMismatch {
                expected: layout.len,
                actual: values.len(),
            });
        }
        Ok(Self {
            architecture,
            layout,
            values,
            seed: None,
        })
    }

    /// Random initialization: weights uniform on `[0, 0.5]` when constrained,
    /// `[-0.5, 0.5]` otherwise; biases uniform on `[-0.5, 0.5]`.
    pub fn random<R: Rng + ?Sized>(architecture: NetworkArchitecture, rng: &mut R) -> Self {
        let mut p = Self::zeros(architecture);
        let mask = p.weight_mask();
        let low = if p.architecture.constrain_weights {
            0.0
        } else {
            -0.5
        };
        for (v, is_weight) in p.values.iter_mut().zip(mask) {
            *v = if is_weight {
                rng.gen_range(low..=0.5)
            } else {
                rng.gen_range(-0.5..=0.5)
            };
        }
        p
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn architecture(&self) -> &NetworkArchitecture {
        &self.architecture
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `true` for entries that are weights (as opposed to biases).
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.values.len()];
        for l in &self.layout.layers {
            mask[l.biases..l.biases + l.n_out].fill(false);
        }
        mask
    }

    pub fn hidden_weights(&self, layer: usize) -> &[f64] {
        let l = &self.layout.layers[layer];
        &self.values[l.weights..l.weights + l.n_in * l.n_out]
    }

    pub fn hidden_biases(&self, layer: usize) -> &[f64] {
        let l = &self.layout.layers[layer];
        &self.values[l.biases..l.biases + l.n_out]
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.values[self.layout.output..]
    }

    /// Clamp every weight to `max(w, 0)`; biases are left untouched.
    pub fn project_nonnegative(&self) -> Self {
        let mut p = self.clone();
        let mask = p.weight_mask();
        project_in_place(&mut p.values, &mask);
        p
    }

    /// Whether every weight is non-negative.
    pub fn weights_nonnegative(&self) -> bool {
        self.values
            .iter()
            .zip(self.weight_mask())
            .all(|(v, w)| !w || *v >= 0.0)
    }

    fn check_inputs(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.architecture.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.architecture.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(&self.layout)
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_inputs(x)?;
        let mut ws = self.workspace();
        Ok(self.eval(x, &mut ws, true))
    }

    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(x)?;
        let mut ws = self.workspace();
        self.eval(x, &mut ws, false);
        let mut g = vec![0.0; x.len()];
        self.backprop_inputs(&mut ws, &mut g);
        Ok(g)
    }

    /// Forward pass filling the workspace. Returns ψ when `want_value`,
    /// otherwise NaN (the last activation is skipped).
    pub(crate) fn eval(&self, x: &[f64], ws: &mut Workspace, want_value: bool) -> f64 {
        let n_layers = self.layout.layers.len();
        for (h, l) in self.layout.layers.iter().enumerate() {
            let w = &self.values[l.weights..l.weights + l.n_in * l.n_out];
            let b = &self.values[l.biases..l.biases + l.n_out];
            let (prev, cur) = ws.act.split_at_mut(h);
            let input: &[f64] = if h == 0 { x } else { &prev[h - 1] };
            let last = h + 1 == n_layers;
            for a in 0..l.n_out {
                let row = &w[a * l.n_in..(a + 1) * l.n_in];
                let z = b[a] + row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>();
                let e = (-z.abs()).exp();
                let sig = if z >= 0.0 {
                    1.0 / (1.0 + e)
                } else {
                    e / (1.0 + e)
                };
                ws.sig[h][a] = sig;
                if !last || want_value {
                    cur[0][a] = z.max(0.0) + e.ln_1p();
                }
            }
        }
        if want_value {
            let out = &self.values[self.layout.output..];
            out.iter()
                .zip(&ws.act[n_layers - 1])
                .map(|(w, a)| w * a)
                .sum()
        } else {
            f64::NAN
        }
    }

    /// `∂ψ/∂x` after [`Self::eval`].
    pub(crate) fn backprop_inputs(&self, ws: &mut Workspace, g: &mut [f64]) {
        let n_layers = self.layout.layers.len();
        let out = &self.values[self.layout.output..];
        for (d, (w, s)) in ws.delta[n_layers - 1]
            .iter_mut()
            .zip(out.iter().zip(&ws.sig[n_layers - 1]))
        {
            *d = w * s;
        }
        for h in (1..n_layers).rev() {
            let l = &self.layout.layers[h];
            let w = &self.values[l.weights..l.weights + l.n_in * l.n_out];
            let (lower, upper) = ws.delta.split_at_mut(h);
            let below = &mut lower[h - 1];
            below.fill(0.0);
            for (a, da) in upper[0].iter().enumerate() {
                let row = &w[a * l.n_in..(a + 1) * l.n_in];
                for (bv, wv) in below.iter_mut().zip(row) {
                    *bv += wv * da;
                }
            }
            for (bv, s) in below.iter_mut().zip(&ws.sig[h - 1]) {
                *bv *= s;
            }
        }
        let l = &self.layout.layers[0];
        let w = &self.values[l.weights..l.weights + l.n_in * l.n_out];
        g.fill(0.0);
        for (a, da) in ws.delta[0].iter().enumerate() {
            let row = &w[a * l.n_in..(a + 1) * l.n_in];
            for (gi, wv) in g.iter_mut().zip(row) {
                *gi += wv * da;
            }
        }
    }

    /// Adds `∇_θ (v · ∇_x ψ(θ, x))` to `grad` (reverse pass over the
    /// forward-mode tangent of ψ along `v`). Requires a prior [`Self::eval`]
    /// on `x` with the same workspace.
    pub(crate) fn accumulate_input_gradient_vjp(
        &self,
        x: &[f64],
        v: &[f64],
        ws: &mut Workspace,
        grad: &mut [f64],
    ) {
        let layers = &self.layout.layers;
        let n_layers = layers.len();

        // tangent pass
        for (h, l) in layers.iter().enumerate() {
            let w = &self.values[l.weights..l.weights + l.n_in * l.n_out];
            let (prev, cur) = ws.adot.split_at_mut(h);
            let input: &[f64] = if h == 0 { v } else { &prev[h - 1] };
            for a in 0..l.n_out {
                let row = &w[a * l.n_in..(a + 1) * l.n_in];
                let zd = row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>();
                ws.zdot[h][a] = zd;
                cur[0][a] = ws.sig[h][a] * zd;
            }
        }

        // reverse pass
        let out_off = self.layout.output;
        for (k, ad) in ws.adot[n_layers - 1].iter().enumerate() {
            grad[out_off + k] += ad;
        }
        ws.adj_adot[n_layers - 1].copy_from_slice(&self.values[out_off..]);
        ws.adj_act[n_layers - 1].fill(0.0);

        for h in (0..n_layers).rev() {
            let l = layers[h];
            for a in 0..l.n_out {
                let s = ws.sig[h][a];
                let ds = s * (1.0 - s);
                ws.adj_zdot[h][a] = ws.adj_adot[h][a] * s;
                ws.adj_z[h][a] = ws.adj_adot[h][a] * ds * ws.zdot[h][a] + ws.adj_act[h][a] * s;
            }
            let (tangent_in, primal_in): (&[f64], &[f64]) = if h == 0 {
                (v, x)
            } else {
                (&ws.adot[h - 1], &ws.act[h - 1])
            };
            for a in 0..l.n_out {
                let az = ws.adj_z[h][a];
                let azd = ws.adj_zdot[h][a];
                let row = &mut grad[l.weights + a * l.n_in..l.weights + (a + 1) * l.n_in];
                for ((gw, ti), pi) in row.iter_mut().zip(tangent_in).zip(primal_in) {
                    *gw += azd * ti + az * pi;
                }
                grad[l.biases + a] += az;
            }
            if h > 0 {
                let w = &self.values[l.weights..l.weights + l.n_in * l.n_out];
                let (lo_adot, hi_adot) = ws.adj_adot.split_at_mut(h);
                let (lo_act, _) = ws.adj_act.split_at_mut(h);
                let _ = hi_adot;
                let adj_adot_below = &mut lo_adot[h - 1];
                let adj_act_below = &mut lo_act[h - 1];
                adj_adot_below.fill(0.0);
                adj_act_below.fill(0.0);
                for a in 0..l.n_out {
                    let row = &w[a * l.n_in..(a + 1) * l.n_in];
                    let (azd, az) = (ws.adj_zdot[h][a], ws.adj_z[h][a]);
                    for (b, wv) in row.iter().enumerate() {
                        adj_adot_below[b] += wv * azd;
                        adj_act_below[b] += wv * az;
                    }
                }
            }
        }
    }
}

pub(crate) fn project_in_place(values: &mut [f64], mask: &[bool]) {
    for (v, is_weight) in values.iter_mut().zip(mask) {
        if *is_weight && *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Scratch buffers for repeated network evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    sig: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    zdot: Vec<Vec<f64>>,
    adot: Vec<Vec<f64>>,
    adj_adot: Vec<Vec<f64>>,
    adj_act: Vec<Vec<f64>>,
    adj_zdot: Vec<Vec<f64>>,
    adj_z: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(layout: &Layout) -> Self {
        let buf =
            || -> Vec<Vec<f64>> { layout.layers.iter().map(|l| vec![0.0; l.n_out]).collect() };
        Self {
            sig: buf(),
            act: buf(),
            delta: buf(),
            zdot: buf(),
            adot: buf(),
            adj_adot: buf(),
            adj_act: buf(),
            adj_zdot: buf(),
            adj_z: buf(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDocument {
    /// Row-major, one row per node.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkDocument {
    architecture: NetworkArchitecture,
    layers: Vec<LayerDocument>,
    output_weights: Vec<f64>,
    seed: Option<u64>,
}

impl From<NetworkParams> for NetworkDocument {
    fn from(p: NetworkParams) -> Self {
        let layers = (0..p.layout.layers.len())
            .map(|h| LayerDocument {
                weights: p.hidden_weights(h).to_vec(),
                biases: p.hidden_biases(h).to_vec(),
            })
            .collect();
        NetworkDocument {
            output_weights: p.output_weights().to_vec(),
            layers,
            architecture: p.architecture,
            seed: p.seed,
        }
    }
}

impl TryFrom<NetworkDocument> for NetworkParams {
    type Error = Error;

    fn try_from(doc: NetworkDocument) -> Result<Self> {
        doc.architecture.validate()?;
        let layout = Layout::new(&doc.architecture);
        if doc.layers.len() != layout.layers.len() {
            return Err(Error::Format(format!(
                "expected {} hidden layers, found {}",
                layout.layers.len(),
                doc.layers.len()
            )));
        }
        let mut values = Vec::with_capacity(layout.len);
        for (l, d) in layout.layers.iter().zip(&doc.layers) {
            if d.weights.len() != l.n_in * l.n_out || d.biases.len() != l.n_out {
                return Err(Error::Format("hidden layer shape mismatch".into()));
            }
            values.extend_from_slice(&d.weights);
            values.extend_from_slice(&d.biases);
        }
        values.extend_from_slice(&doc.output_weights);
        let mut p = NetworkParams::from_flat(doc.architecture, values)
            .map_err(|_| Error::Format("output layer shape mismatch".into()))?;
        p.seed = doc.seed;
        Ok(p)
    }
}
