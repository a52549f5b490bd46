//! Calibration of network models to stress data: mean squared stress
//! error, its parameter gradient and residual Jacobian, two projected
//! optimizers (Levenberg–Marquardt and L-BFGS) and the multi-restart driver.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constitutive::Hyperelastic;
use crate::datagen::{Dataset, SplitDataset};
use crate::error::{Error, Result};
use crate::icnn::{logistic, project_in_place, NetworkArchitecture, NetworkParams, Workspace};
use crate::invariants::{compute_invariants, MaterialSymmetry};
use crate::pann::{
    constants_from_reference_gradient, growth_coefficient, reference_invariants, slot_coefficients,
    ModelVariant, NormalizationConstants, PannModel, SimpleFpModel, SimpleFpParams, TrainedModel,
};
use crate::tensor3::{SymTensor3, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the projected-gradient norm falls below this value.
    pub gradient_tolerance: f64,
    /// Stop when the loss (kPa²) falls below this value.
    pub loss_floor: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Projected Gauss–Newton with Levenberg–Marquardt damping.
    #[default]
    LevenbergMarquardt,
    /// Projected limited-memory BFGS with Armijo backtracking.
    Lbfgs,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            restarts: 30,
            max_iterations: 500,
            gradient_tolerance: 1e-9,
            loss_floor: 1e-12,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "at least one restart is required".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: u64,
    /// Final training loss; `None` if the restart produced non-finite values.
    pub loss: Option<f64>,
    pub iterations: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LossFloor,
    GradientTolerance,
    IterationCap,
    Stalled,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: TrainedModel,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub seed: u64,
}

/// Per-point data of an invariant-based problem, fixed during calibration.
struct InvariantPoints {
    dim: usize,
    /// Network inputs, `n × dim`.
    x: Vec<f64>,
    /// `∂I_k/∂C` in storage order, `n × dim`.
    d: Vec<[f64; 6]>,
    /// Growth stress minus target stress, `n × 6`; growth omitted when inactive.
    base: Vec<[f64; 6]>,
    /// Weighted residual components, six per tuple.
    full: RowSystem,
    /// The same residuals projected onto the span of the weighted invariant
    /// derivatives of each tuple; equal loss, gradient and `JᵀJ`.
    reduced: RowSystem,
}

/// Residuals of the form `r_j = off_j + Σ_k dirs_j[k]·coef_k`, grouped by tuple.
struct RowSystem {
    /// Row range of tuple `i` is `start[i]..start[i + 1]`.
    start: Vec<usize>,
    dirs: Vec<[f64; 6]>,
    off: Vec<f64>,
    /// Part of the squared residual no parameter can change.
    constant: f64,
}

impl RowSystem {
    fn new(n: usize) -> Self {
        Self {
            start: vec![0],
            dirs: Vec::with_capacity(6 * n),
            off: Vec::with_capacity(6 * n),
            constant: 0.0,
        }
    }

    fn len(&self) -> usize {
        self.off.len()
    }

    fn push_full(&mut self, d: &[[f64; 6]], base: &[f64; 6]) {
        for c in 0..6 {
            let w = FROB[c].sqrt();
            let mut row = [0.0; 6];
            for (k, dk) in d.iter().enumerate() {
                row[k] = w * dk[c];
            }
            self.dirs.push(row);
            self.off.push(w * base[c]);
        }
        self.start.push(self.off.len());
    }

    /// Rows `σ_j v_jᵀ` and offsets `u_jᵀ b` from the thin SVD `A = U Σ Vᵀ` of
    /// the weighted derivative matrix, dropping directions with
    /// `σ_j ≤ 1e-12 σ_max`.
    fn push_reduced(&mut self, d: &[[f64; 6]], base: &[f64; 6]) {
        let dim = d.len();
        let w = FROB.map(f64::sqrt);
        let a = DMatrix::from_fn(6, dim, |c, k| w[c] * d[k][c]);
        let b = DVector::from_fn(6, |c, _| w[c] * base[c]);
        let svd = a.svd(true, true);
        let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᵀ"));
        let smax = svd.singular_values.max();
        let mut perp = b.clone();
        for (j, sj) in svd.singular_values.iter().enumerate() {
            if *sj <= 1e-12 * smax {
                continue;
            }
            let uj = u.column(j);
            let o = uj.dot(&b);
            perp -= uj * o;
            let mut row = [0.0; 6];
            for (k, v) in row.iter_mut().enumerate().take(dim) {
                *v = sj * vt[(j, k)];
            }
            self.dirs.push(row);
            self.off.push(o);
        }
        self.constant += perp.norm_squared();
        self.start.push(self.off.len());
    }
}

/// Storage weights turning a component-wise product into `A : B`.
const FROB: [f64; 6] = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];

fn frob(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter()
        .zip(b)
        .zip(&FROB)
        .map(|((x, y), w)| w * x * y)
        .sum()
}

struct SimplePoints {
    f: Vec<[f64; 9]>,
    p: Vec<[f64; 9]>,
}

enum Points {
    Invariant(InvariantPoints),
    Simple(SimplePoints),
}

/// A fixed dataset together with a model family; maps flat parameter
/// vectors to the mean squared stress error.
pub struct CalibrationProblem {
    variant: ModelVariant,
    symmetry: MaterialSymmetry,
    hidden_layers: Vec<usize>,
    arch: Option<NetworkArchitecture>,
    reference: Vec<f64>,
    points: Points,
    n: usize,
    /// Optimizer coordinates are `θ_i / scaling_i`; output-layer entries are
    /// measured in units of the RMS data stress.
    scaling: Vec<f64>,
}

fn rms_stress(data: &Dataset) -> f64 {
    let sum: f64 = data.samples.iter().map(|s| s.t.ddot(&s.t)).sum();
    (sum / data.len() as f64).sqrt().max(1.0)
}

impl CalibrationProblem {
    pub fn new(
        variant: ModelVariant,
        symmetry: MaterialSymmetry,
        hidden_layers: Vec<usize>,
        data: &Dataset,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.len();
        if variant == ModelVariant::SimpleFp {
            if hidden_layers.len() != 1 || hidden_layers[0] == 0 {
                return Err(Error::InvalidParameter(
                    "the F → P baseline has exactly one hidden layer".into(),
                ));
            }
            let mut f = Vec::with_capacity(n);
            let mut p = Vec::with_capacity(n);
            for s in &data.samples {
                let (ff, pp) = simple_fp_target(&s.c, &s.t)?;
                f.push(ff.to_row_major());
                p.push(pp.to_row_major());
            }
            let nodes = hidden_layers[0];
            let mut scaling = vec![1.0; SimpleFpParams::parameter_count(nodes)];
            let stress = rms_stress(data);
            let len = scaling.len();
            scaling[..9].fill(stress);
            scaling[len - 9 * nodes..].fill(stress);
            return Ok(Self {
                variant,
                symmetry,
                hidden_layers,
                arch: None,
                reference: Vec::new(),
                points: Points::Simple(SimplePoints { f, p }),
                n,
                scaling,
            });
        }

        let arch = NetworkArchitecture::new(
            symmetry.input_dim(),
            hidden_layers.clone(),
            variant.constrained(),
        )?;
        let dim = arch.input_dim;
        let mut pts = InvariantPoints {
            dim,
            x: Vec::with_capacity(n * dim),
            d: Vec::with_capacity(n * dim),
            base: Vec::with_capacity(n),
            full: RowSystem::new(n),
            reduced: RowSystem::new(n),
        };
        for s in &data.samples {
            let inv = compute_invariants(&s.c, &symmetry)?;
            pts.x.extend(inv.inputs());
            for dk in inv.input_derivatives() {
                pts.d.push(dk.to_array());
            }
            let mut base = (SymTensor3::zero() - s.t).to_array();
            if variant.has_growth() {
                let g = (inv.c_inv * growth_coefficient(inv.j)).to_array();
                for (b, gv) in base.iter_mut().zip(g) {
                    *b += gv;
                }
            }
            let d = &pts.d[pts.d.len() - dim..];
            pts.full.push_full(d, &base);
            pts.reduced.push_reduced(d, &base);
            pts.base.push(base);
        }
        let mut scaling = vec![1.0; arch.parameter_count()];
        let len = scaling.len();
        let last = *hidden_layers.last().expect("validated architecture");
        scaling[len - last..].fill(rms_stress(data));
        Ok(Self {
            variant,
            symmetry,
            hidden_layers,
            reference: reference_invariants(&symmetry).inputs(),
            arch: Some(arch),
            points: Points::Invariant(pts),
            n,
            scaling,
        })
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        match &self.arch {
            Some(a) => a.parameter_count(),
            None => SimpleFpParams::parameter_count(self.hidden_layers[0]),
        }
    }

    /// Entries restricted to be non-negative, if any.
    pub fn bound_mask(&self) -> Option<Vec<bool>> {
        let arch = self.arch.as_ref()?;
        arch.constrain_weights
            .then(|| NetworkParams::zeros(arch.clone()).weight_mask())
    }

    /// Random starting point for a restart seed, in optimizer coordinates.
    fn initial_coordinates(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match &self.arch {
            Some(a) => NetworkParams::random(a.clone(), &mut rng)
                .as_flat()
                .to_vec(),
            None => SimpleFpParams::random(self.hidden_layers[0], &mut rng)
                .as_flat()
                .to_vec(),
        }
    }

    /// Random starting point for a restart seed.
    pub fn initial_parameters(&self, seed: u64) -> Vec<f64> {
        self.to_parameters(&self.initial_coordinates(seed))
    }

    fn to_parameters(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scaling).map(|(a, b)| a * b).collect()
    }

    fn scaled_loss_and_gradient(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let f = self.loss_and_gradient(&self.to_parameters(z), grad);
        for (g, s) in grad.iter_mut().zip(&self.scaling) {
            *g *= s;
        }
        f
    }

    pub fn model(&self, theta: &[f64]) -> Result<TrainedModel> {
        match &self.arch {
            Some(a) => {
                let net = NetworkParams::from_flat(a.clone(), theta.to_vec())?;
                Ok(TrainedModel::Pann(PannModel::new(
                    self.variant,
                    self.symmetry,
                    net,
                )?))
            }
            None => Ok(TrainedModel::SimpleFp(SimpleFpModel {
                params: SimpleFpParams::from_flat(self.hidden_layers[0], theta.to_vec())?,
            })),
        }
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, None)
    }

    /// Analytical gradient of the loss.
    pub fn loss_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(theta, Some(grad))
    }

    /// Central finite-difference gradient with step `1e-6·max(1, |θ_i|)`.
    pub fn loss_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut t = theta.to_vec();
        (0..theta.len())
            .map(|i| {
                let h = 1e-6 * theta[i].abs().max(1.0);
                t[i] = theta[i] + h;
                let plus = self.loss(&t);
                t[i] = theta[i] - h;
                let minus = self.loss(&t);
                t[i] = theta[i];
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    /// Number of residual components: six per tuple for T, nine for P.
    pub fn residual_len(&self) -> usize {
        match &self.points {
            Points::Invariant(_) => 6 * self.n,
            Points::Simple(_) => 9 * self.n,
        }
    }

    /// Weighted residuals `r` with `loss = ‖r‖²/n`, and the transposed
    /// Jacobian `(∂r/∂θ)ᵀ` (`dim × residual_len`, one column per residual).
    pub fn residuals_and_jacobian(&self, theta: &[f64], r: &mut [f64], jt: &mut DMatrix<f64>) {
        match &self.points {
            Points::Invariant(p) => {
                self.rows_invariant(&p.full, p, theta, r, Some(jt));
            }
            Points::Simple(p) => self.jacobian_simple(p, theta, r, jt),
        }
    }

    /// Residual count of the least-squares form the optimizer works on.
    fn lm_len(&self) -> usize {
        match &self.points {
            Points::Invariant(p) => p.reduced.len(),
            Points::Simple(_) => self.residual_len(),
        }
    }

    /// Loss at optimizer coordinates `z` from the optimizer's residuals
    /// (written to `r`), and their scaled transposed Jacobian when requested.
    fn lm_eval(&self, z: &[f64], r: &mut [f64], jt: Option<&mut DMatrix<f64>>) -> f64 {
        let theta = self.to_parameters(z);
        let n = self.n as f64;
        match (&self.points, jt) {
            (Points::Invariant(p), jt) => {
                let scaled = jt.map(|jt| {
                    let f = self.rows_invariant(&p.reduced, p, &theta, r, Some(&mut *jt));
                    self.scale_jacobian(jt);
                    f
                });
                scaled.unwrap_or_else(|| self.rows_invariant(&p.reduced, p, &theta, r, None)) / n
            }
            (Points::Simple(p), Some(jt)) => {
                self.jacobian_simple(p, &theta, r, jt);
                self.scale_jacobian(jt);
                r.iter().map(|v| v * v).sum::<f64>() / n
            }
            (Points::Simple(_), None) => self.loss(&theta),
        }
    }

    fn scale_jacobian(&self, jt: &mut DMatrix<f64>) {
        let np = self.scaling.len();
        for col in jt.as_mut_slice().chunks_exact_mut(np) {
            for (v, s) in col.iter_mut().zip(&self.scaling) {
                *v *= s;
            }
        }
    }

    /// Fills the residuals of `sys` (and their transposed Jacobian) and
    /// returns the total squared residual including `sys.constant`.
    fn rows_invariant(
        &self,
        sys: &RowSystem,
        pts: &InvariantPoints,
        theta: &[f64],
        r: &mut [f64],
        mut jt: Option<&mut DMatrix<f64>>,
    ) -> f64 {
        let arch = self
            .arch
            .as_ref()
            .expect("invariant problem has an architecture");
        let net = NetworkParams::from_flat(arch.clone(), theta.to_vec())
            .expect("parameter length checked by caller");
        let dim = pts.dim;
        let np = theta.len();
        let mut ws = net.workspace();
        let mut g = vec![0.0; dim];
        let mut coef = vec![0.0; dim];
        let mut jg = vec![0.0; dim * np];
        // constant-slot contribution to ∂coef_k/∂θ, row-major dim × np
        let mut jconst = vec![0.0; dim * np];

        let constants = if self.variant.normalized() {
            net.eval(&self.reference, &mut ws, false);
            net.backprop_inputs(&mut ws, &mut g);
            input_jacobian(&net, &self.reference, &mut ws, &mut jg);
            let m = constants_jacobian(&self.symmetry, &g);
            for k in 0..dim {
                for l in 0..dim {
                    let mkl = m[k * dim + l];
                    if mkl != 0.0 {
                        for q in 0..np {
                            jconst[k * np + q] += mkl * jg[l * np + q];
                        }
                    }
                }
            }
            constants_from_reference_gradient(&self.symmetry, &g)
        } else {
            NormalizationConstants::None
        };
        let const_slots: Vec<usize> = (0..dim)
            .filter(|&k| jconst[k * np..(k + 1) * np].iter().any(|v| *v != 0.0))
            .collect();

        let single = arch.hidden_layers.len() == 1;
        let nodes = arch.hidden_layers[0];
        let mut sig = vec![0.0; nodes];
        let mut dsig = vec![0.0; nodes];
        let mut total = sys.constant;
        for i in 0..self.n {
            let x = &pts.x[i * dim..(i + 1) * dim];
            let rows = sys.start[i]..sys.start[i + 1];
            net.eval(x, &mut ws, false);
            net.backprop_inputs(&mut ws, &mut g);
            slot_coefficients(&g, &constants, &mut coef);
            for j in rows.clone() {
                let e = &sys.dirs[j];
                r[j] = sys.off[j] + (0..dim).map(|k| e[k] * coef[k]).sum::<f64>();
                total += r[j] * r[j];
            }
            let Some(jt) = jt.as_deref_mut() else {
                continue;
            };

            let block = &mut jt.as_mut_slice()[rows.start * np..rows.end * np];
            if single {
                single_layer_slopes(&net, x, &mut sig, &mut dsig);
                let w = net.hidden_weights(0);
                let out = net.output_weights();
                let (b_off, o_off) = (nodes * dim, nodes * dim + nodes);
                for (col, e) in block.chunks_exact_mut(np).zip(&sys.dirs[rows]) {
                    for a in 0..nodes {
                        let row = &w[a * dim..(a + 1) * dim];
                        let u: f64 = 2.0 * (0..dim).map(|k| e[k] * row[k]).sum::<f64>();
                        col[o_off + a] = sig[a] * u;
                        let t = out[a] * dsig[a] * u;
                        col[b_off + a] = t;
                        let so = 2.0 * out[a] * sig[a];
                        for (l, v) in col[a * dim..(a + 1) * dim].iter_mut().enumerate() {
                            *v = t * x[l] + so * e[l];
                        }
                    }
                    for &k in &const_slots {
                        for (v, jc) in col.iter_mut().zip(&jconst[k * np..(k + 1) * np]) {
                            *v += e[k] * jc;
                        }
                    }
                }
            } else {
                input_jacobian(&net, x, &mut ws, &mut jg);
                let mut dc = [0.0; 6];
                for (col, e) in block.chunks_exact_mut(np).zip(&sys.dirs[rows]) {
                    for (q, v) in col.iter_mut().enumerate() {
                        for k in 0..dim {
                            dc[k] = 2.0 * jg[k * np + q] + jconst[k * np + q];
                        }
                        *v = (0..dim).map(|k| e[k] * dc[k]).sum();
                    }
                }
            }
        }
        total
    }

    fn jacobian_simple(
        &self,
        pts: &SimplePoints,
        theta: &[f64],
        r: &mut [f64],
        jt: &mut DMatrix<f64>,
    ) {
        let params = SimpleFpParams::from_flat(self.hidden_layers[0], theta.to_vec())
            .expect("parameter length checked by caller");
        for (i, (f, target)) in pts.f.iter().zip(&pts.p).enumerate() {
            let p = params.pk1_flat(f);
            for c in 0..9 {
                r[9 * i + c] = p[c] - target[c];
                let mut e = [0.0; 9];
                e[c] = 1.0;
                let mut col = jt.column_mut(9 * i + c);
                col.fill(0.0);
                params.accumulate_gradient(f, &e, col.as_mut_slice());
            }
        }
    }

    fn evaluate(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match &self.points {
            Points::Invariant(p) => self.evaluate_invariant(p, theta, grad),
            Points::Simple(p) => self.evaluate_simple(p, theta, grad),
        }
    }

    fn evaluate_invariant(
        &self,
        pts: &InvariantPoints,
        theta: &[f64],
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let arch = self
            .arch
            .as_ref()
            .expect("invariant problem has an architecture");
        let net = NetworkParams::from_flat(arch.clone(), theta.to_vec())
            .expect("parameter length checked by caller");
        let dim = pts.dim;
        let mut ws = net.workspace();
        let mut g = vec![0.0; dim];
        let mut coef = vec![0.0; dim];

        let constants = if self.variant.normalized() {
            net.eval(&self.reference, &mut ws, false);
            net.backprop_inputs(&mut ws, &mut g);
            constants_from_reference_gradient(&self.symmetry, &g)
        } else {
            NormalizationConstants::None
        };
        let g0 = g.clone();

        if let Some(gr) = grad.as_deref_mut() {
            gr.fill(0.0);
        }
        let scale = 2.0 / self.n as f64;
        let mut slot_sum = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        let mut total = 0.0;
        for i in 0..self.n {
            let x = &pts.x[i * dim..(i + 1) * dim];
            net.eval(x, &mut ws, false);
            net.backprop_inputs(&mut ws, &mut g);
            slot_coefficients(&g, &constants, &mut coef);
            let mut r = pts.base[i];
            for (k, ck) in coef.iter().enumerate() {
                let dk = &pts.d[i * dim + k];
                for (rc, dc) in r.iter_mut().zip(dk) {
                    *rc += ck * dc;
                }
            }
            total += frob(&r, &r);
            if let Some(gr) = grad.as_deref_mut() {
                for k in 0..dim {
                    let a = scale * frob(&r, &pts.d[i * dim + k]);
                    slot_sum[k] += a;
                    v[k] = 2.0 * a;
                }
                net.accumulate_input_gradient_vjp(x, &v, &mut ws, gr);
            }
        }

        if let Some(gr) = grad {
            if self.variant.normalized() {
                let v0 = constants_adjoint(&self.symmetry, &g0, &slot_sum);
                net.eval(&self.reference, &mut ws, false);
                net.accumulate_input_gradient_vjp(&self.reference, &v0, &mut ws, gr);
            }
        }
        total / self.n as f64
    }

    fn evaluate_simple(
        &self,
        pts: &SimplePoints,
        theta: &[f64],
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let params = SimpleFpParams::from_flat(self.hidden_layers[0], theta.to_vec())
            .expect("parameter length checked by caller");
        if let Some(gr) = grad.as_deref_mut() {
            gr.fill(0.0);
        }
        let scale = 2.0 / self.n as f64;
        let mut total = 0.0;
        for (f, target) in pts.f.iter().zip(&pts.p) {
            let p = params.pk1_flat(f);
            let mut r = [0.0; 9];
            for k in 0..9 {
                r[k] = p[k] - target[k];
                total += r[k] * r[k];
            }
            if let Some(gr) = grad.as_deref_mut() {
                params.accumulate_gradient(f, &r.map(|v| v * scale), gr);
            }
        }
        total / self.n as f64
    }
}

/// `∂L/∂g⁰` from the loss sensitivities `A_k` of the slot coefficients,
/// through the normalization constants.
fn constants_adjoint(sym: &MaterialSymmetry, g0: &[f64], slot_sum: &[f64]) -> Vec<f64> {
    let dim = g0.len();
    let m = constants_jacobian(sym, g0);
    (0..dim)
        .map(|l| (0..dim).map(|k| slot_sum[k] * m[k * dim + l]).sum())
        .collect()
}

/// Row-major `∂(slot correction)_k/∂g⁰_l`; the relu kink takes the zero
/// subgradient.
fn constants_jacobian(sym: &MaterialSymmetry, g0: &[f64]) -> Vec<f64> {
    let dim = g0.len();
    let mut m = vec![0.0; dim * dim];
    match sym {
        MaterialSymmetry::Isotropic => {
            m[3 * dim..4 * dim].copy_from_slice(&[2.0, 4.0, 2.0, -2.0]);
        }
        MaterialSymmetry::TransverselyIsotropic { beta } => {
            let tr_g = beta.trace();
            let x = g0[3] - g0[4];
            let mut dq = [0.0; 6];
            let mut dp = [0.0; 6];
            if x > 0.0 {
                dq[3] = 1.0;
                dq[4] = -1.0;
            } else if x < 0.0 {
                dp[3] = -1.0;
                dp[4] = 1.0;
            }
            let o = [2.0, 4.0, 2.0, 0.0, 2.0 * tr_g, -2.0];
            for l in 0..6 {
                m[3 * dim + l] = 2.0 * dp[l];
                m[4 * dim + l] = 2.0 * dq[l];
                m[5 * dim + l] = o[l] + 2.0 * tr_g * dq[l];
            }
        }
    }
    m
}

/// Logistic slopes `σ(z_a)` and `σ'(z_a)` of a single hidden layer at `x`.
fn single_layer_slopes(net: &NetworkParams, x: &[f64], sig: &mut [f64], dsig: &mut [f64]) {
    let dim = x.len();
    let w = net.hidden_weights(0);
    let b = net.hidden_biases(0);
    for a in 0..sig.len() {
        let z = b[a]
            + w[a * dim..(a + 1) * dim]
                .iter()
                .zip(x)
                .map(|(p, q)| p * q)
                .sum::<f64>();
        let s = logistic(z);
        sig[a] = s;
        dsig[a] = s * (1.0 - s);
    }
}

/// Row-major `∂(∇_x ψ)_k/∂θ` at `x`, one VJP per input.
fn input_jacobian(net: &NetworkParams, x: &[f64], ws: &mut Workspace, out: &mut [f64]) {
    let np = net.len();
    let mut e = vec![0.0; x.len()];
    out.fill(0.0);
    for k in 0..x.len() {
        e.fill(0.0);
        e[k] = 1.0;
        net.accumulate_input_gradient_vjp(x, &e, ws, &mut out[k * np..(k + 1) * np]);
    }
}

/// `(F, P)` for the F → P baseline: `F = √C` and `P = F·T`.
pub fn simple_fp_target(c: &SymTensor3, t: &SymTensor3) -> Result<(Tensor3, Tensor3)> {
    let f = c.sqrt_spd()?.to_tensor();
    let p = f * t.to_tensor();
    Ok((f, p))
}

/// Mean squared Frobenius stress error of a model over a dataset (kPa²).
///
/// Invariant-based models are compared on T; the F → P baseline on P.
pub fn loss(model: &TrainedModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for s in &data.samples {
        total += match model {
            TrainedModel::Pann(m) => {
                let r = m.stress(&s.c)? - s.t;
                r.ddot(&r)
            }
            TrainedModel::SimpleFp(m) => {
                let (f, p) = simple_fp_target(&s.c, &s.t)?;
                let r = m.pk1(&f) - p;
                r.norm().powi(2)
            }
        };
    }
    Ok(total / data.len() as f64)
}

/// Mean squared stress error of any hyperelastic model on T.
pub fn stress_mse(model: &dyn Hyperelastic, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for s in &data.samples {
        let r = model.stress(&s.c)? - s.t;
        total += r.ddot(&r);
    }
    Ok(total / data.len() as f64)
}

struct OptimOutcome {
    theta: Vec<f64>,
    loss: f64,
    iterations: usize,
    stop: StopReason,
}

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const STALL_ITERATIONS: usize = 10;
const STALL_TOLERANCE: f64 = 1e-12;

/// Projected L-BFGS with Armijo backtracking along the projection arc.
fn minimize(
    problem: &CalibrationProblem,
    theta0: Vec<f64>,
    cfg: &CalibrationConfig,
) -> OptimOutcome {
    let n = theta0.len();
    let mask = problem.bound_mask();
    let project = |t: &mut [f64]| {
        if let Some(m) = &mask {
            project_in_place(t, m);
        }
    };
    let at_bound = |t: &[f64], g: &[f64], i: usize| -> bool {
        mask.as_ref()
            .is_some_and(|m| m[i] && t[i] <= 0.0 && g[i] > 0.0)
    };

    let mut theta = theta0;
    project(&mut theta);
    let mut grad = vec![0.0; n];
    let mut f = problem.scaled_loss_and_gradient(&theta, &mut grad);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut stall = 0;
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    for iter in 0..cfg.max_iterations {
        if !f.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return OptimOutcome {
                theta,
                loss: f,
                iterations: iter,
                stop: StopReason::NonFinite,
            };
        }
        if f <= cfg.loss_floor {
            return OptimOutcome {
                theta,
                loss: f,
                iterations: iter,
                stop: StopReason::LossFloor,
            };
        }
        let pg: Vec<f64> = (0..n)
            .map(|i| {
                if at_bound(&theta, &grad, i) {
                    0.0
                } else {
                    grad[i]
                }
            })
            .collect();
        let pg_norm = pg.iter().map(|v| v * v).sum::<f64>().sqrt();
        if pg_norm <= cfg.gradient_tolerance {
            return OptimOutcome {
                theta,
                loss: f,
                iterations: iter,
                stop: StopReason::GradientTolerance,
            };
        }

        let mut dir = two_loop(&pg, &memory);
        for (i, d) in dir.iter_mut().enumerate() {
            if at_bound(&theta, &grad, i) {
                *d = 0.0;
            }
        }
        let slope: f64 = dir.iter().zip(&pg).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            memory.clear();
            dir = pg.iter().map(|g| -g).collect();
        }

        let mut step = if memory.is_empty() {
            (1.0 / pg_norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = theta[i] + step * dir[i];
            }
            project(&mut trial);
            let decrease: f64 = (0..n).map(|i| grad[i] * (trial[i] - theta[i])).sum();
            let ft = problem.scaled_loss_and_gradient(&trial, &mut trial_grad);
            if ft.is_finite() && ft <= f + ARMIJO * decrease {
                accepted = Some(ft);
                break;
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else {
            if memory.is_empty() {
                return OptimOutcome {
                    theta,
                    loss: f,
                    iterations: iter,
                    stop: StopReason::Stalled,
                };
            }
            memory.clear();
            continue;
        };

        let s: Vec<f64> = (0..n).map(|i| trial[i] - theta[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| trial_grad[i] - grad[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }

        if f - ft <= STALL_TOLERANCE * f.abs().max(1e-300) {
            stall += 1;
        } else {
            stall = 0;
        }
        std::mem::swap(&mut theta, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        f = ft;
        if stall >= STALL_ITERATIONS {
            return OptimOutcome {
                theta,
                loss: f,
                iterations: iter + 1,
                stop: StopReason::Stalled,
            };
        }
    }
    OptimOutcome {
        theta,
        loss: f,
        iterations: cfg.max_iterations,
        stop: StopReason::IterationCap,
    }
}

const LM_MAX_REJECTIONS: usize = 40;

/// Projected Levenberg–Marquardt with Marquardt diagonal scaling. Variables
/// held at their bound by the gradient are frozen for the step; the trial
/// point is projected back onto the feasible set.
fn minimize_lm(
    problem: &CalibrationProblem,
    z0: Vec<f64>,
    cfg: &CalibrationConfig,
) -> OptimOutcome {
    let np = z0.len();
    let n = problem.n as f64;
    let mask = problem.bound_mask();
    let project = |t: &mut [f64]| {
        if let Some(m) = &mask {
            project_in_place(t, m);
        }
    };

    let mut z = z0;
    project(&mut z);
    let mut r = vec![0.0; problem.lm_len()];
    let mut r_trial = r.clone();
    let mut jt = DMatrix::zeros(np, r.len());
    let mut trial = vec![0.0; np];
    let mut mu: Option<f64> = None;
    let mut nu = 2.0;
    let mut stall = 0;
    let mut f = f64::NAN;

    for iter in 0..cfg.max_iterations {
        f = problem.lm_eval(&z, &mut r, Some(&mut jt));
        if !f.is_finite() || !jt.as_slice().iter().all(|v| v.is_finite()) {
            return OptimOutcome {
                theta: z,
                loss: f,
                iterations: iter,
                stop: StopReason::NonFinite,
            };
        }
        if f <= cfg.loss_floor {
            return OptimOutcome {
                theta: z,
                loss: f,
                iterations: iter,
                stop: StopReason::LossFloor,
            };
        }
        let h = gram(&jt);
        let jr = &jt * DVector::from_column_slice(&r);
        let free: Vec<usize> = (0..np)
            .filter(|&i| {
                !mask
                    .as_ref()
                    .is_some_and(|m| m[i] && z[i] <= 0.0 && jr[i] > 0.0)
            })
            .collect();
        let pg_norm = 2.0 / n * free.iter().map(|&i| jr[i] * jr[i]).sum::<f64>().sqrt();
        if pg_norm <= cfg.gradient_tolerance {
            return OptimOutcome {
                theta: z,
                loss: f,
                iterations: iter,
                stop: StopReason::GradientTolerance,
            };
        }

        let max_diag = h.diagonal().max();
        let floor = 1e-12 * max_diag.max(1e-300);
        let damping: Vec<f64> = free.iter().map(|&i| h[(i, i)].max(floor)).collect();
        let m = free.len();
        let hf = DMatrix::from_fn(m, m, |a, b| h[(free[a], free[b])]);
        let gf = DVector::from_fn(m, |a, _| -jr[free[a]]);
        let lambda = mu.get_or_insert(1e-3);

        let mut accepted = None;
        for _ in 0..LM_MAX_REJECTIONS {
            let mut a = hf.clone();
            for (k, d) in damping.iter().enumerate() {
                a[(k, k)] += *lambda * d;
            }
            let Some(delta) = bounded_step(&a, &gf, &free, &z, mask.as_deref()) else {
                *lambda *= nu;
                nu *= 2.0;
                continue;
            };
            trial.copy_from_slice(&z);
            for (k, &i) in free.iter().enumerate() {
                trial[i] += delta[k];
            }
            project(&mut trial);
            let ft = problem.lm_eval(&trial, &mut r_trial, None);
            let predicted = delta.dot(&gf) - 0.5 * delta.dot(&(&hf * &delta));
            let actual = 0.5 * n * (f - ft);
            if ft.is_finite() && actual > 0.0 {
                let rho = if predicted > 0.0 {
                    actual / predicted
                } else {
                    1.0
                };
                *lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                accepted = Some(ft);
                break;
            }
            *lambda *= nu;
            nu *= 2.0;
        }
        let Some(ft) = accepted else {
            return OptimOutcome {
                theta: z,
                loss: f,
                iterations: iter + 1,
                stop: StopReason::Stalled,
            };
        };
        if f - ft <= STALL_TOLERANCE * f {
            stall += 1;
        } else {
            stall = 0;
        }
        std::mem::swap(&mut z, &mut trial);
        f = ft;
        if stall >= STALL_ITERATIONS {
            return OptimOutcome {
                theta: z,
                loss: f,
                iterations: iter + 1,
                stop: StopReason::Stalled,
            };
        }
    }
    OptimOutcome {
        theta: z,
        loss: f,
        iterations: cfg.max_iterations,
        stop: StopReason::IterationCap,
    }
}

/// `Jᵀ J` from the stored transpose, without materializing `J`.
fn gram(jt: &DMatrix<f64>) -> DMatrix<f64> {
    let (np, m) = jt.shape();
    let mut h = DMatrix::zeros(np, np);
    let a = jt.as_slice();
    // SAFETY: both operands view the same column-major np × m buffer (the
    // second with swapped strides) and `h` is a distinct np × np buffer.
    unsafe {
        matrixmultiply::dgemm(
            np,
            m,
            np,
            1.0,
            a.as_ptr(),
            1,
            np as isize,
            a.as_ptr(),
            np as isize,
            1,
            0.0,
            h.as_mut_slice().as_mut_ptr(),
            1,
            np as isize,
        );
    }
    h
}

/// Solves `A δ = b` over the free variables; bounded variables the step
/// would push below zero are pinned at zero and the rest re-solved.
fn bounded_step(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    free: &[usize],
    z: &[f64],
    mask: Option<&[bool]>,
) -> Option<DVector<f64>> {
    let m = free.len();
    let mut pinned = vec![false; m];
    let mut delta = DVector::zeros(m);
    for _ in 0..m.max(1) {
        let open: Vec<usize> = (0..m).filter(|&k| !pinned[k]).collect();
        let mut rhs = DVector::from_fn(open.len(), |u, _| b[open[u]]);
        for k in (0..m).filter(|&k| pinned[k]) {
            delta[k] = -z[free[k]];
            for (u, &o) in open.iter().enumerate() {
                rhs[u] -= a[(o, k)] * delta[k];
            }
        }
        let sub = DMatrix::from_fn(open.len(), open.len(), |u, v| a[(open[u], open[v])]);
        let sol = sub.cholesky()?.solve(&rhs);
        for (u, &o) in open.iter().enumerate() {
            delta[o] = sol[u];
        }
        let Some(mask) = mask else { return Some(delta) };
        let mut changed = false;
        for &o in &open {
            if mask[free[o]] && z[free[o]] + delta[o] < 0.0 {
                pinned[o] = true;
                changed = true;
            }
        }
        if !changed {
            return Some(delta);
        }
    }
    Some(delta)
}

/// `−H g` from the L-BFGS two-loop recursion.
fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; memory.len()];
    for (k, (s, y, rho)) in memory.iter().enumerate().rev() {
        let a = rho * s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
        alpha[k] = a;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
    }
    if let Some((s, y, _)) = memory.back() {
        let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let gamma = sy / yy;
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for (k, (s, y, rho)) in memory.iter().enumerate() {
        let b = rho * y.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha[k] - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Runs one restart from its seeded initialization.
fn run_restart(
    problem: &CalibrationProblem,
    cfg: &CalibrationConfig,
    restart: usize,
) -> (RestartSummary, Vec<f64>) {
    let seed = cfg.seed.wrapping_add(restart as u64);
    let z0 = problem.initial_coordinates(seed);
    let out = match cfg.optimizer {
        Optimizer::LevenbergMarquardt => minimize_lm(problem, z0, cfg),
        Optimizer::Lbfgs => minimize(problem, z0, cfg),
    };
    let finite = out.loss.is_finite() && out.stop != StopReason::NonFinite;
    (
        RestartSummary {
            restart,
            seed,
            loss: finite.then_some(out.loss),
            iterations: out.iterations,
            stop: out.stop,
        },
        problem.to_parameters(&out.theta),
    )
}

/// Multi-restart calibration; restarts run in parallel and the lowest
/// training loss wins (ties by restart index).
pub fn calibrate(
    variant: ModelVariant,
    symmetry: MaterialSymmetry,
    hidden_layers: Vec<usize>,
    data: &SplitDataset,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult> {
    cfg.validate()?;
    let problem = CalibrationProblem::new(variant, symmetry, hidden_layers, &data.calibration)?;
    let runs: Vec<(RestartSummary, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&problem, cfg, r))
        .collect();

    let best = runs
        .iter()
        .filter_map(|(s, theta)| s.loss.map(|l| (l, s.restart, theta)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((train_mse, best_restart, theta)) = best else {
        return Err(Error::NonFiniteLoss { restart: 0 });
    };
    let mut model = problem.model(theta)?;
    set_seed(&mut model, cfg.seed.wrapping_add(best_restart as u64));
    let test_mse = if data.test.is_empty() {
        None
    } else {
        Some(loss(&model, &data.test)?)
    };
    Ok(CalibrationResult {
        model,
        best_restart,
        restarts: runs.into_iter().map(|(s, _)| s).collect(),
        train_mse,
        test_mse,
        seed: cfg.seed,
    })
}

fn set_seed(model: &mut TrainedModel, seed: u64) {
    match model {
        TrainedModel::Pann(m) => m.set_seed(seed),
        TrainedModel::SimpleFp(m) => m.params = m.params.clone().with_seed(seed),
    }
}

/// Calibrates on the whole dataset (no test part).
pub fn calibrate_all(
    variant: ModelVariant,
    symmetry: MaterialSymmetry,
    hidden_layers: Vec<usize>,
    data: &Dataset,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult> {
    let split = SplitDataset {
        calibration: data.clone(),
        test: Dataset::new(Vec::new()),
        seed: cfg.seed,
    };
    calibrate(variant, symmetry, hidden_layers, &split, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{NeoHooke, NeoHookeParams, TransIso, TransIsoParams};
    use crate::datagen::{sample_multiaxial, MultiaxialSpec, Sample};
    use crate::loadcases::LoadPath;

    fn nh_data(n: usize) -> Dataset {
        let m = NeoHooke::new(NeoHookeParams::default()).unwrap();
        sample_multiaxial(&m, &MultiaxialSpec::new(n, 3)).unwrap()
    }

    fn ti_data(n: usize) -> Dataset {
        let m = TransIso::new(TransIsoParams::default()).unwrap();
        sample_multiaxial(&m, &MultiaxialSpec::new(n, 4)).unwrap()
    }

    fn assert_gradients_agree(problem: &CalibrationProblem, theta: &[f64]) {
        let mut g = vec![0.0; theta.len()];
        let l = problem.loss_and_gradient(theta, &mut g);
        assert!((l - problem.loss(theta)).abs() <= 1e-12 * l);
        let fd = problem.loss_gradient(theta);
        let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-4 * scale, "{a} vs {b} (scale {scale})");
        }
    }

    #[test]
    fn analytical_gradient_matches_finite_differences() {
        let iso = nh_data(12);
        let ti = ti_data(12);
        let sym_ti = MaterialSymmetry::transversely_isotropic(2.0).unwrap();
        for variant in ModelVariant::LADDER {
            let p = CalibrationProblem::new(variant, MaterialSymmetry::Isotropic, vec![4, 3], &iso)
                .unwrap();
            assert_gradients_agree(&p, &p.initial_parameters(1));
            let p = CalibrationProblem::new(variant, sym_ti, vec![5], &ti).unwrap();
            assert_gradients_agree(&p, &p.initial_parameters(2));
        }
        let p = CalibrationProblem::new(
            ModelVariant::SimpleFp,
            MaterialSymmetry::Isotropic,
            vec![4],
            &iso,
        )
        .unwrap();
        assert_gradients_agree(&p, &p.initial_parameters(3));
    }

    fn assert_jacobian_agrees(problem: &CalibrationProblem, theta: &[f64]) {
        let m = problem.residual_len();
        let mut r = vec![0.0; m];
        let mut jt = DMatrix::zeros(theta.len(), m);
        problem.residuals_and_jacobian(theta, &mut r, &mut jt);
        let loss: f64 = r.iter().map(|v| v * v).sum::<f64>() / problem.n as f64;
        assert!((loss - problem.loss(theta)).abs() <= 1e-12 * loss);
        let scale = jt.amax();
        let mut t = theta.to_vec();
        let (mut rp, mut rm) = (vec![0.0; m], vec![0.0; m]);
        let mut scratch = DMatrix::zeros(theta.len(), m);
        for q in 0..theta.len() {
            let h = 1e-6 * theta[q].abs().max(1.0);
            t[q] = theta[q] + h;
            problem.residuals_and_jacobian(&t, &mut rp, &mut scratch);
            t[q] = theta[q] - h;
            problem.residuals_and_jacobian(&t, &mut rm, &mut scratch);
            t[q] = theta[q];
            for row in 0..m {
                let fd = (rp[row] - rm[row]) / (2.0 * h);
                assert!(
                    (jt[(q, row)] - fd).abs() <= 1e-5 * scale,
                    "θ{q} r{row}: {} vs {fd}",
                    jt[(q, row)]
                );
            }
        }
    }

    #[test]
    fn residual_jacobian_matches_finite_differences() {
        let iso = nh_data(6);
        let ti = ti_data(6);
        let sym_ti = MaterialSymmetry::transversely_isotropic(2.0).unwrap();
        for variant in ModelVariant::LADDER {
            for hidden in [vec![3], vec![3, 2]] {
                let p = CalibrationProblem::new(
                    variant,
                    MaterialSymmetry::Isotropic,
                    hidden.clone(),
                    &iso,
                )
                .unwrap();
                assert_jacobian_agrees(&p, &p.initial_parameters(5));
                let p = CalibrationProblem::new(variant, sym_ti, hidden, &ti).unwrap();
                for seed in 0..4 {
                    assert_jacobian_agrees(&p, &p.initial_parameters(seed));
                }
            }
        }
        let p = CalibrationProblem::new(
            ModelVariant::SimpleFp,
            MaterialSymmetry::Isotropic,
            vec![3],
            &iso,
        )
        .unwrap();
        assert_jacobian_agrees(&p, &p.initial_parameters(6));
    }

    fn assert_reduction_is_exact(problem: &CalibrationProblem, seed: u64) {
        let z = problem.initial_coordinates(seed);
        let theta = &problem.to_parameters(&z);
        let np = theta.len();
        let m = problem.residual_len();
        let mut r = vec![0.0; m];
        let mut jt = DMatrix::zeros(np, m);
        problem.residuals_and_jacobian(theta, &mut r, &mut jt);
        problem.scale_jacobian(&mut jt);
        let k = problem.lm_len();
        assert!(k < m, "{k} rows of {m}");
        let mut rr = vec![0.0; k];
        let mut jr = DMatrix::zeros(np, k);
        let loss = problem.lm_eval(&z, &mut rr, Some(&mut jr));
        let plain = problem.lm_eval(&z, &mut rr.clone(), None);
        let full = problem.loss(theta);
        assert!((loss - full).abs() <= 1e-10 * full, "{loss} vs {full}");
        assert!((plain - full).abs() <= 1e-10 * full);

        let (g, gr) = (&jt * DVector::from_vec(r), &jr * DVector::from_vec(rr));
        assert!((&g - &gr).amax() <= 1e-9 * g.amax());
        let (h, hr) = (&jt * jt.transpose(), &jr * jr.transpose());
        assert!((&h - &hr).amax() <= 1e-9 * h.amax());
    }

    #[test]
    fn reduced_rows_preserve_loss_gradient_and_gauss_newton_matrix() {
        let iso = nh_data(8);
        let ti = ti_data(8);
        let sym_ti = MaterialSymmetry::transversely_isotropic(2.0).unwrap();
        for variant in ModelVariant::LADDER {
            for hidden in [vec![4], vec![3, 2]] {
                let p = CalibrationProblem::new(
                    variant,
                    MaterialSymmetry::Isotropic,
                    hidden.clone(),
                    &iso,
                )
                .unwrap();
                assert_reduction_is_exact(&p, 7);
                let p = CalibrationProblem::new(variant, sym_ti, hidden, &ti).unwrap();
                assert_reduction_is_exact(&p, 8);
            }
        }
    }

    #[test]
    fn both_optimizers_reduce_the_loss() {
        let data = nh_data(20);
        for optimizer in [Optimizer::LevenbergMarquardt, Optimizer::Lbfgs] {
            let cfg = CalibrationConfig {
                restarts: 1,
                max_iterations: 30,
                optimizer,
                ..Default::default()
            };
            let p = CalibrationProblem::new(
                ModelVariant::Pann,
                MaterialSymmetry::Isotropic,
                vec![4],
                &data,
            )
            .unwrap();
            let start = p.loss(&p.initial_parameters(0));
            let r = calibrate_all(
                ModelVariant::Pann,
                MaterialSymmetry::Isotropic,
                vec![4],
                &data,
                &cfg,
            )
            .unwrap();
            assert!(
                r.train_mse < 0.1 * start,
                "{optimizer:?}: {} vs {start}",
                r.train_mse
            );
            let TrainedModel::Pann(m) = &r.model else {
                unreachable!()
            };
            assert!(m.network().weights_nonnegative());
        }
    }

    #[test]
    fn transiso_gradient_covers_both_relu_branches() {
        let ti = ti_data(8);
        let sym = MaterialSymmetry::transversely_isotropic(2.0).unwrap();
        let p = CalibrationProblem::new(ModelVariant::Pann, sym, vec![4], &ti).unwrap();
        let mut signs = [false; 2];
        for seed in 0..20 {
            let theta = p.initial_parameters(seed);
            let TrainedModel::Pann(m) = p.model(&theta).unwrap() else {
                unreachable!()
            };
            match m.constants() {
                NormalizationConstants::TransverselyIsotropic { p: pp, .. } => {
                    signs[usize::from(pp > 0.0)] = true
                }
                _ => unreachable!(),
            }
            assert_gradients_agree(&p, &theta);
        }
        assert!(signs[0] && signs[1]);
    }

    #[test]
    fn loss_definition() {
        let c = SymTensor3::identity();
        let mut t = SymTensor3::zero();
        t.c11 = 2.0;
        let data = Dataset::new(vec![Sample { c, t }]);
        let arch = NetworkArchitecture::new(4, vec![2], true).unwrap();
        let zero = PannModel::new(
            ModelVariant::Pann,
            MaterialSymmetry::Isotropic,
            NetworkParams::zeros(arch),
        )
        .unwrap();
        assert_eq!(loss(&TrainedModel::Pann(zero), &data).unwrap(), 4.0);
        let empty = Dataset::new(vec![]);
        assert!(matches!(
            CalibrationProblem::new(
                ModelVariant::Pann,
                MaterialSymmetry::Isotropic,
                vec![2],
                &empty
            ),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn calibration_fits_ideal_uniaxial_data() {
        let m = NeoHooke::new(NeoHookeParams::default()).unwrap();
        let data = LoadPath::uniaxial([0.8, 2.0], 30).dataset(&m).unwrap();
        let cfg = CalibrationConfig {
            restarts: 2,
            ..Default::default()
        };
        let res = calibrate_all(
            ModelVariant::Pann,
            MaterialSymmetry::Isotropic,
            vec![4],
            &data,
            &cfg,
        )
        .unwrap();
        assert!(res.train_mse <= 1e-2, "{}", res.train_mse);
        let TrainedModel::Pann(model) = &res.model else {
            panic!()
        };
        assert!(model.network().weights_nonnegative());
        assert!(model.stress(&SymTensor3::identity()).unwrap().norm() <= 1e-10);
        let best = res
            .restarts
            .iter()
            .filter_map(|r| r.loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, res.train_mse);
    }

    #[test]
    fn calibration_is_deterministic() {
        let data = nh_data(40);
        let s = crate::datagen::split(&data, 0.7, 1).unwrap();
        let cfg = CalibrationConfig {
            restarts: 3,
            max_iterations: 60,
            seed: 11,
            ..Default::default()
        };
        let a = calibrate(
            ModelVariant::Polyconvex,
            MaterialSymmetry::Isotropic,
            vec![4],
            &s,
            &cfg,
        )
        .unwrap();
        let b = calibrate(
            ModelVariant::Polyconvex,
            MaterialSymmetry::Isotropic,
            vec![4],
            &s,
            &cfg,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.test_mse.is_some());
    }

    #[test]
    fn more_restarts_never_hurt() {
        let data = nh_data(30);
        let mut last = f64::INFINITY;
        for restarts in [1, 2, 4] {
            let cfg = CalibrationConfig {
                restarts,
                max_iterations: 40,
                ..Default::default()
            };
            let r = calibrate_all(
                ModelVariant::Basic,
                MaterialSymmetry::Isotropic,
                vec![4],
                &data,
                &cfg,
            )
            .unwrap();
            assert!(r.train_mse <= last);
            last = r.train_mse;
        }
    }
}
