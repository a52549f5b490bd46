//! Physics-augmented neural network constitutive models.
//!
//! The energy of the full model is
//! `ψ = ψ_NN(I) + ψ_growth(J) + ψ_stress + ψ_energy`, where the stress term
//! makes the undeformed state stress-free and the constant `ψ_energy` makes
//! it energy-free. Lower variants drop terms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constitutive::Hyperelastic;
use crate::error::{Error, Result};
use crate::icnn::{logistic, softplus, NetworkArchitecture, NetworkParams, Workspace};
use crate::invariants::{compute_invariants, InvariantSet, MaterialSymmetry, StructuralTensor};
use crate::tensor3::{SymTensor3, Tensor3};

pub use crate::constitutive::tangent;

/// Model variants ordered by the number of physical conditions built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Unconstrained weights, network energy only.
    Basic,
    /// Non-negative weights.
    Polyconvex,
    /// Non-negative weights plus the volumetric growth term.
    PolyconvexGrowth,
    /// Growth plus stress and energy normalization.
    Pann,
    /// Direct F → P network without any built-in conditions.
    SimpleFp,
}

impl ModelVariant {
    pub const LADDER: [ModelVariant; 4] = [
        ModelVariant::Basic,
        ModelVariant::Polyconvex,
        ModelVariant::PolyconvexGrowth,
        ModelVariant::Pann,
    ];

    pub fn constrained(self) -> bool {
        matches!(
            self,
            ModelVariant::Polyconvex | ModelVariant::PolyconvexGrowth | ModelVariant::Pann
        )
    }

    pub fn has_growth(self) -> bool {
        matches!(self, ModelVariant::PolyconvexGrowth | ModelVariant::Pann)
    }

    pub fn normalized(self) -> bool {
        self == ModelVariant::Pann
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelVariant::Basic => "i",
            ModelVariant::Polyconvex => "ii",
            ModelVariant::PolyconvexGrowth => "iii",
            ModelVariant::Pann => "iv",
            ModelVariant::SimpleFp => "simple_fp",
        }
    }
}

/// `(J + 1/J − 2)²`, with an implicit modulus of 1 kPa.
pub fn growth_energy(j: f64) -> Result<f64> {
    if !(j > 0.0) {
        return Err(Error::NonPositiveJ(j));
    }
    let s = j + 1.0 / j - 2.0;
    Ok(s * s)
}

/// `2 (J + 1/J − 2)(1 − 1/J²) J C⁻¹`.
pub fn growth_stress(j: f64, c_inv: &SymTensor3) -> Result<SymTensor3> {
    if !(j > 0.0) {
        return Err(Error::NonPositiveJ(j));
    }
    Ok(*c_inv * growth_stress_factor(j))
}

fn growth_stress_factor(j: f64) -> f64 {
    2.0 * (j + 1.0 / j - 2.0) * (1.0 - 1.0 / (j * j)) * j
}

/// Constants of the stress normalization term, evaluated at C = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizationConstants {
    None,
    Isotropic { n: f64 },
    TransverselyIsotropic { o: f64, p: f64, q: f64 },
}

impl NormalizationConstants {
    fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        use NormalizationConstants::*;
        match (self, other) {
            (None, None) => Some(0.0),
            (Isotropic { n: a }, Isotropic { n: b }) => Some(rel_diff(*a, *b)),
            (
                TransverselyIsotropic { o, p, q },
                TransverselyIsotropic {
                    o: o2,
                    p: p2,
                    q: q2,
                },
            ) => Some(
                rel_diff(*o, *o2)
                    .max(rel_diff(*p, *p2))
                    .max(rel_diff(*q, *q2)),
            ),
            _ => Option::None,
        }
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Invariants of the undeformed state for a symmetry group.
pub(crate) fn reference_invariants(sym: &MaterialSymmetry) -> InvariantSet {
    compute_invariants(&SymTensor3::identity(), sym).expect("identity has unit determinant")
}

/// Normalization constants from the network gradient `g0` at C = 1.
pub(crate) fn constants_from_reference_gradient(
    sym: &MaterialSymmetry,
    g0: &[f64],
) -> NormalizationConstants {
    match sym {
        MaterialSymmetry::Isotropic => NormalizationConstants::Isotropic {
            // ∂I1*/∂I3 = −1/√I3 = −1 at the reference state
            n: 2.0 * (g0[0] + 2.0 * g0[1] + g0[2] - g0[3]),
        },
        MaterialSymmetry::TransverselyIsotropic { beta } => {
            let tr_g = beta.trace();
            let x = g0[3] - g0[4];
            let p = (-x).max(0.0);
            let q = x.max(0.0);
            let o = 2.0 * (g0[0] + 2.0 * g0[1] + g0[2] - g0[5] + g0[4] * tr_g + q * tr_g);
            NormalizationConstants::TransverselyIsotropic { o, p, q }
        }
    }
}

/// Per-slot coefficients `c_k` such that `T = Σ c_k ∂I_k/∂C + T_growth`.
///
/// The stress-normalization terms map onto existing slots because
/// `∂I1*/∂C = −J C⁻¹`, `∂I4/∂C = G` and `∂I5/∂C` is the I5 derivative.
pub(crate) fn slot_coefficients(g: &[f64], constants: &NormalizationConstants, out: &mut [f64]) {
    for (o, gk) in out.iter_mut().zip(g) {
        *o = 2.0 * gk;
    }
    match *constants {
        NormalizationConstants::None => {}
        NormalizationConstants::Isotropic { n } => out[3] += n,
        NormalizationConstants::TransverselyIsotropic { o, p, q } => {
            out[3] += 2.0 * p;
            out[4] += 2.0 * q;
            out[5] += o;
        }
    }
}

/// `2 (J + 1/J − 2)(1 − 1/J²) J`, the growth stress coefficient on C⁻¹.
pub(crate) fn growth_coefficient(j: f64) -> f64 {
    growth_stress_factor(j)
}

/// Isotropic normalization constant 𝔫 of a 4-input network.
pub fn iso_normalization_constant(net: &NetworkParams) -> Result<f64> {
    let sym = MaterialSymmetry::Isotropic;
    if net.architecture().input_dim != sym.input_dim() {
        return Err(Error::WrongSymmetry {
            expected: "isotropic",
        });
    }
    let g0 = net.input_gradient(&reference_invariants(&sym).inputs())?;
    match constants_from_reference_gradient(&sym, &g0) {
        NormalizationConstants::Isotropic { n } => Ok(n),
        _ => unreachable!(),
    }
}

/// Transversely isotropic normalization constants `(𝔬, 𝔭, 𝔮)` of a 6-input network.
pub fn transiso_normalization_constants(
    net: &NetworkParams,
    g: &StructuralTensor,
) -> Result<(f64, f64, f64)> {
    let sym = MaterialSymmetry::TransverselyIsotropic { beta: *g };
    if net.architecture().input_dim != sym.input_dim() {
        return Err(Error::WrongSymmetry {
            expected: "transversely isotropic",
        });
    }
    let g0 = net.input_gradient(&reference_invariants(&sym).inputs())?;
    match constants_from_reference_gradient(&sym, &g0) {
        NormalizationConstants::TransverselyIsotropic { o, p, q } => Ok((o, p, q)),
        _ => unreachable!(),
    }
}

/// Invariant-based network model, variants (i) to (iv).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PannDocument", try_from = "PannDocument")]
pub struct PannModel {
    variant: ModelVariant,
    symmetry: MaterialSymmetry,
    net: NetworkParams,
    constants: NormalizationConstants,
    energy_shift: f64,
    reference: Vec<f64>,
}

impl PannModel {
    pub fn new(
        variant: ModelVariant,
        symmetry: MaterialSymmetry,
        net: NetworkParams,
    ) -> Result<Self> {
        if variant == ModelVariant::SimpleFp {
            return Err(Error::InvalidParameter(
                "the F → P baseline is not invariant based".into(),
            ));
        }
        let arch = net.architecture();
        if arch.input_dim != symmetry.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: symmetry.input_dim(),
                actual: arch.input_dim,
            });
        }
        if arch.constrain_weights != variant.constrained() {
            return Err(Error::InvalidParameter(format!(
                "variant {} requires constrain_weights = {}",
                variant.label(),
                variant.constrained()
            )));
        }
        if variant.constrained() && !net.weights_nonnegative() {
            return Err(Error::InvalidParameter(
                "constrained variant has negative weights".into(),
            ));
        }

        let reference = reference_invariants(&symmetry);
        let x0 = reference.inputs();
        let constants = if variant.normalized() {
            let g0 = net.input_gradient(&x0)?;
            constants_from_reference_gradient(&symmetry, &g0)
        } else {
            NormalizationConstants::None
        };
        let mut model = Self {
            variant,
            symmetry,
            net,
            constants,
            energy_shift: 0.0,
            reference: x0,
        };
        if variant.normalized() {
            // ψ_stress and ψ_growth vanish at C = 1; summed anyway.
            let inv = reference;
            let psi0 = model.net.forward(&model.reference)?
                + model.stress_energy(&inv)
                + growth_energy(inv.j)?;
            model.energy_shift = -psi0;
        }
        Ok(model)
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub(crate) fn set_seed(&mut self, seed: u64) {
        self.net = self.net.clone().with_seed(seed);
    }

    pub fn network(&self) -> &NetworkParams {
        &self.net
    }

    pub fn constants(&self) -> NormalizationConstants {
        self.constants
    }

    pub fn energy_shift(&self) -> f64 {
        self.energy_shift
    }

    fn invariants(&self, c: &SymTensor3) -> Result<InvariantSet> {
        let inv = compute_invariants(c, &self.symmetry)?;
        if let Some(a) = &inv.aniso {
            for (index, value) in [(4, a.i4), (5, a.i5)] {
                if !(value > 0.0) {
                    return Err(Error::NonPositiveAnisotropicInvariant { index, value });
                }
            }
        }
        Ok(inv)
    }

    fn stress_energy(&self, inv: &InvariantSet) -> f64 {
        match self.constants {
            NormalizationConstants::None => 0.0,
            NormalizationConstants::Isotropic { n } => -n * (inv.j - 1.0),
            NormalizationConstants::TransverselyIsotropic { o, p, q } => {
                let a = inv.aniso.expect("transversely isotropic invariants");
                -o * (inv.j - 1.0) + p * (a.i4 - self.reference[3]) + q * (a.i5 - self.reference[4])
            }
        }
    }

    /// Energy as a function of the extended arguments `(I1, I2, I3, J)` or
    /// `(I1, I2, I3, I4, I5, J)`, in which the constrained variants are convex.
    pub fn energy_from_arguments(&self, args: &[f64]) -> Result<f64> {
        let dim = self.symmetry.input_dim();
        if args.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: args.len(),
            });
        }
        let j = args[dim - 1];
        if !(j > 0.0) {
            return Err(Error::NonPositiveJ(j));
        }
        let mut x = args.to_vec();
        x[dim - 1] = -2.0 * j;
        let mut psi = self.net.forward(&x)?;
        if self.variant.has_growth() {
            psi += growth_energy(j)?;
        }
        psi += match self.constants {
            NormalizationConstants::None => 0.0,
            NormalizationConstants::Isotropic { n } => -n * (j - 1.0),
            NormalizationConstants::TransverselyIsotropic { o, p, q } => {
                -o * (j - 1.0)
                    + p * (args[3] - self.reference[3])
                    + q * (args[4] - self.reference[4])
            }
        };
        Ok(psi + self.energy_shift)
    }

    /// `∂ψ/∂I_k` of the network part at C, in input order.
    pub fn network_slopes(&self, c: &SymTensor3) -> Result<Vec<f64>> {
        let inv = self.invariants(c)?;
        self.net.input_gradient(&inv.inputs())
    }

    pub(crate) fn stress_with(&self, inv: &InvariantSet, ws: &mut Workspace) -> SymTensor3 {
        let x = inv.inputs();
        self.net.eval(&x, ws, false);
        let mut g = vec![0.0; x.len()];
        self.net.backprop_inputs(ws, &mut g);
        let mut coef = vec![0.0; x.len()];
        slot_coefficients(&g, &self.constants, &mut coef);
        let mut t = SymTensor3::zero();
        for (ck, dk) in coef.iter().zip(inv.input_derivatives()) {
            t += dk * *ck;
        }
        if self.variant.has_growth() {
            t += inv.c_inv * growth_coefficient(inv.j);
        }
        t
    }
}

impl Hyperelastic for PannModel {
    fn energy(&self, c: &SymTensor3) -> Result<f64> {
        let inv = self.invariants(c)?;
        let mut psi = self.net.forward(&inv.inputs())?;
        if self.variant.has_growth() {
            psi += growth_energy(inv.j)?;
        }
        Ok(psi + self.stress_energy(&inv) + self.energy_shift)
    }

    fn stress(&self, c: &SymTensor3) -> Result<SymTensor3> {
        let inv = self.invariants(c)?;
        let mut ws = self.net.workspace();
        Ok(self.stress_with(&inv, &mut ws))
    }

    fn symmetry(&self) -> MaterialSymmetry {
        self.symmetry
    }

    fn isotropic_slopes(&self, c: &SymTensor3) -> Option<Result<(f64, f64)>> {
        match self.symmetry {
            // growth and normalization depend on J only
            MaterialSymmetry::Isotropic => Some(self.network_slopes(c).map(|g| (g[0], g[1]))),
            MaterialSymmetry::TransverselyIsotropic { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PannDocument {
    variant: ModelVariant,
    symmetry: MaterialSymmetry,
    network: NetworkParams,
    /// Stored for audit, recomputed on load.
    constants: NormalizationConstants,
    energy_shift: f64,
    growth_modulus_kpa: f64,
}

impl From<PannModel> for PannDocument {
    fn from(m: PannModel) -> Self {
        Self {
            variant: m.variant,
            symmetry: m.symmetry,
            network: m.net,
            constants: m.constants,
            energy_shift: m.energy_shift,
            growth_modulus_kpa: 1.0,
        }
    }
}

/// Tolerance for the cross-check of stored and recomputed constants.
const CONSTANT_CHECK_TOLERANCE: f64 = 1e-12;

impl TryFrom<PannDocument> for PannModel {
    type Error = Error;

    fn try_from(doc: PannDocument) -> Result<Self> {
        let model = PannModel::new(doc.variant, doc.symmetry, doc.network)?;
        let diff = model
            .constants
            .max_abs_diff(&doc.constants)
            .ok_or_else(|| {
                Error::Format("normalization constants do not match the symmetry".into())
            })?;
        let shift_diff = rel_diff(model.energy_shift, doc.energy_shift);
        if diff > CONSTANT_CHECK_TOLERANCE || shift_diff > CONSTANT_CHECK_TOLERANCE {
            return Err(Error::Format(format!(
                "stored normalization constants differ from recomputed ones by {:.3e}",
                diff.max(shift_diff)
            )));
        }
        Ok(model)
    }
}

/// Parameters of the F → P baseline
/// `P_kL = B_kL + Σ_α W_αkL SP(w_α : F + b_α)`.
///
/// Flat layout: `B` (9, row-major), hidden weights `w` (N × 9), hidden
/// biases `b` (N), output weights `W` (N × 9).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SimpleFpDocument", try_from = "SimpleFpDocument")]
pub struct SimpleFpParams {
    nodes: usize,
    values: Vec<f64>,
    seed: Option<u64>,
}

impl SimpleFpParams {
    pub fn parameter_count(nodes: usize) -> usize {
        9 + 19 * nodes
    }

    pub fn zeros(nodes: usize) -> Self {
        Self {
            nodes,
            values: vec![0.0; Self::parameter_count(nodes)],
            seed: None,
        }
    }

    pub fn from_flat(nodes: usize, values: Vec<f64>) -> Result<Self> {
        let expected = Self::parameter_count(nodes);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            nodes,
            values,
            seed: None,
        })
    }

    /// All entries uniform on `[−0.5, 0.5]`.
    pub fn random<R: Rng + ?Sized>(nodes: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(nodes);
        for v in &mut p.values {
            *v = rng.gen_range(-0.5..=0.5);
        }
        p
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    fn hidden_weights(&self) -> &[f64] {
        &self.values[9..9 + 9 * self.nodes]
    }

    fn hidden_biases(&self) -> &[f64] {
        &self.values[9 + 9 * self.nodes..9 + 10 * self.nodes]
    }

    fn output_weights(&self) -> &[f64] {
        &self.values[9 + 10 * self.nodes..]
    }

    fn pre_activations(&self, f: &[f64; 9]) -> Vec<f64> {
        let (w, b) = (self.hidden_weights(), self.hidden_biases());
        (0..self.nodes)
            .map(|a| {
                b[a] + w[9 * a..9 * a + 9]
                    .iter()
                    .zip(f)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn pk1_flat(&self, f: &[f64; 9]) -> [f64; 9] {
        let mut p = [0.0; 9];
        p.copy_from_slice(&self.values[..9]);
        let out = self.output_weights();
        for (a, z) in self.pre_activations(f).into_iter().enumerate() {
            let s = softplus(z);
            for (pk, wk) in p.iter_mut().zip(&out[9 * a..9 * a + 9]) {
                *pk += wk * s;
            }
        }
        p
    }

    /// Adds `∇_θ (r : P(F))` to `grad`.
    pub(crate) fn accumulate_gradient(&self, f: &[f64; 9], r: &[f64; 9], grad: &mut [f64]) {
        let n = self.nodes;
        for (g, rk) in grad[..9].iter_mut().zip(r) {
            *g += rk;
        }
        let out = self.output_weights();
        for (a, z) in self.pre_activations(f).into_iter().enumerate() {
            let s = softplus(z);
            let wa = &out[9 * a..9 * a + 9];
            let go = 9 + 10 * n + 9 * a;
            for (k, rk) in r.iter().enumerate() {
                grad[go + k] += rk * s;
            }
            let dz = logistic(z) * wa.iter().zip(r).map(|(w, r)| w * r).sum::<f64>();
            for (k, fk) in f.iter().enumerate() {
                grad[9 + 9 * a + k] += dz * fk;
            }
            grad[9 + 9 * n + a] += dz;
        }
    }
}

/// Evaluates the baseline network: first Piola–Kirchhoff stress in kPa.
pub fn simple_fp_stress(params: &SimpleFpParams, f: &Tensor3) -> Tensor3 {
    Tensor3::from_row_major(params.pk1_flat(&f.to_row_major()))
}

#[derive(Serialize, Deserialize)]
struct SimpleFpDocument {
    nodes: usize,
    /// Row-major 3×3.
    bias: Vec<f64>,
    hidden_weights: Vec<Vec<f64>>,
    hidden_biases: Vec<f64>,
    output_weights: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl From<SimpleFpParams> for SimpleFpDocument {
    fn from(p: SimpleFpParams) -> Self {
        Self {
            nodes: p.nodes,
            bias: p.values[..9].to_vec(),
            hidden_weights: p.hidden_weights().chunks(9).map(<[f64]>::to_vec).collect(),
            hidden_biases: p.hidden_biases().to_vec(),
            output_weights: p.output_weights().chunks(9).map(<[f64]>::to_vec).collect(),
            seed: p.seed,
        }
    }
}

impl TryFrom<SimpleFpDocument> for SimpleFpParams {
    type Error = Error;

    fn try_from(d: SimpleFpDocument) -> Result<Self> {
        let rows_ok = |m: &[Vec<f64>]| m.len() == d.nodes && m.iter().all(|r| r.len() == 9);
        if d.bias.len() != 9
            || d.hidden_biases.len() != d.nodes
            || !rows_ok(&d.hidden_weights)
            || !rows_ok(&d.output_weights)
        {
            return Err(Error::Format("F → P network shape mismatch".into()));
        }
        let mut values = d.bias.clone();
        values.extend(d.hidden_weights.iter().flatten());
        values.extend(&d.hidden_biases);
        values.extend(d.output_weights.iter().flatten());
        let mut p = SimpleFpParams::from_flat(d.nodes, values)?;
        p.seed = d.seed;
        Ok(p)
    }
}

/// The F → P baseline as a model object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleFpModel {
    pub params: SimpleFpParams,
}

impl SimpleFpModel {
    pub fn pk1(&self, f: &Tensor3) -> Tensor3 {
        simple_fp_stress(&self.params, f)
    }

    /// Evaluates at `F = U = √C` and returns `(P, sym(F⁻¹ P))`.
    pub fn evaluate_at(&self, c: &SymTensor3) -> Result<(Tensor3, SymTensor3)> {
        let f = c.sqrt_spd()?.to_tensor();
        let p = self.pk1(&f);
        let t = (f.inverse()? * p).sym_part();
        Ok((p, t))
    }
}

/// Any calibrated model, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Pann(PannModel),
    SimpleFp(SimpleFpModel),
}

impl TrainedModel {
    pub fn variant(&self) -> ModelVariant {
        match self {
            TrainedModel::Pann(m) => m.variant(),
            TrainedModel::SimpleFp(_) => ModelVariant::SimpleFp,
        }
    }

    /// Second Piola–Kirchhoff stress; the F → P baseline is evaluated at
    /// `F = √C` and symmetrized.
    pub fn stress(&self, c: &SymTensor3) -> Result<SymTensor3> {
        match self {
            TrainedModel::Pann(m) => m.stress(c),
            TrainedModel::SimpleFp(m) => Ok(m.evaluate_at(c)?.1),
        }
    }

    /// The model as a hyperelastic potential, if it has one.
    pub fn as_hyperelastic(&self) -> Option<&dyn Hyperelastic> {
        match self {
            TrainedModel::Pann(m) => Some(m),
            TrainedModel::SimpleFp(_) => None,
        }
    }
}

/// Convenience constructor for a random invariant-based model.
pub fn random_model<R: Rng + ?Sized>(
    variant: ModelVariant,
    symmetry: MaterialSymmetry,
    hidden_layers: Vec<usize>,
    rng: &mut R,
) -> Result<PannModel> {
    let arch =
        NetworkArchitecture::new(symmetry.input_dim(), hidden_layers, variant.constrained())?;
    PannModel::new(variant, symmetry, NetworkParams::random(arch, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{fd_step, fd_stress, major_asymmetry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_node_net() -> NetworkParams {
        let arch = NetworkArchitecture::new(4, vec![1], true).unwrap();
        NetworkParams::from_flat(arch, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn transiso() -> MaterialSymmetry {
        MaterialSymmetry::transversely_isotropic(2.0).unwrap()
    }

    #[test]
    fn growth_examples() {
        assert_eq!(growth_energy(1.0).unwrap(), 0.0);
        assert!((growth_energy(2.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((growth_energy(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(growth_energy(0.0), Err(Error::NonPositiveJ(_))));
        assert!(growth_stress(-1.0, &SymTensor3::identity()).is_err());
        assert_eq!(
            growth_stress(1.0, &SymTensor3::identity()).unwrap(),
            SymTensor3::zero()
        );
    }

    #[test]
    fn growth_stress_closed_form() {
        // C = diag(4,1,1): J = 2, C⁻¹ = diag(¼,1,1); 2·0.5·0.75·2 = 1.5
        let c_inv = SymTensor3::diag(0.25, 1.0, 1.0);
        let t = growth_stress(2.0, &c_inv).unwrap();
        assert!((t - SymTensor3::diag(0.375, 1.5, 1.5)).max_abs() < 1e-15);
        let c = SymTensor3::new(1.4, 0.8, 1.2, 0.1, 0.2, -0.1);
        let energy = |c: &SymTensor3| growth_energy(c.det().sqrt());
        let fd = fd_stress(energy, &c, fd_step(&c)).unwrap();
        let t = growth_stress(c.det().sqrt(), &c.inverse().unwrap()).unwrap();
        assert!((fd - t).max_abs() <= 1e-6 * t.max_abs());
    }

    #[test]
    fn iso_constant_of_single_node() {
        let n = iso_normalization_constant(&single_node_net()).unwrap();
        assert!((n - 2.0 * logistic(3.0)).abs() < 1e-15);
        assert!((n - 1.905_148_253_644_866_7).abs() < 1e-12);
        let zero = NetworkParams::zeros(NetworkArchitecture::new(4, vec![4], true).unwrap());
        assert_eq!(iso_normalization_constant(&zero).unwrap(), 0.0);
    }

    #[test]
    fn constants_reject_wrong_symmetry() {
        let st = StructuralTensor::new(2.0).unwrap();
        assert!(matches!(
            transiso_normalization_constants(&single_node_net(), &st),
            Err(Error::WrongSymmetry { .. })
        ));
        let ti_net = NetworkParams::zeros(NetworkArchitecture::new(6, vec![2], true).unwrap());
        assert!(iso_normalization_constant(&ti_net).is_err());
        assert_eq!(
            transiso_normalization_constants(&ti_net, &st).unwrap(),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn relu_split_of_anisotropic_slopes() {
        let sym = transiso();
        for (g4, g5, p, q) in [
            (0.7, 0.2, 0.0, 0.5),
            (0.1, 0.4, 0.3, 0.0),
            (0.3, 0.3, 0.0, 0.0),
        ] {
            let g0 = [0.0, 0.0, 0.0, g4, g5, 0.0];
            match constants_from_reference_gradient(&sym, &g0) {
                NormalizationConstants::TransverselyIsotropic { p: pp, q: qq, .. } => {
                    assert!((pp - p).abs() < 1e-15 && (qq - q).abs() < 1e-15);
                }
                _ => panic!(),
            }
        }
    }

    #[test]
    fn pann_is_normalized_for_random_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for sym in [MaterialSymmetry::Isotropic, transiso()] {
            for _ in 0..100 {
                let m = random_model(ModelVariant::Pann, sym, vec![8], &mut rng).unwrap();
                let c = SymTensor3::identity();
                assert!(m.energy(&c).unwrap().abs() <= 1e-12);
                assert!(m.stress(&c).unwrap().norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn lower_variants_are_not_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_model(
            ModelVariant::Polyconvex,
            MaterialSymmetry::Isotropic,
            vec![8],
            &mut rng,
        )
        .unwrap();
        assert!(m.stress(&SymTensor3::identity()).unwrap().norm() > 1e-3);
        assert_eq!(m.constants(), NormalizationConstants::None);
    }

    #[test]
    fn stress_matches_energy_gradient_for_every_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = SymTensor3::new(1.3, 0.8, 1.1, 0.15, -0.1, 0.05);
        for sym in [MaterialSymmetry::Isotropic, transiso()] {
            for variant in ModelVariant::LADDER {
                let m = random_model(variant, sym, vec![6, 4], &mut rng).unwrap();
                let fd = fd_stress(|c| m.energy(c), &c, fd_step(&c)).unwrap();
                let t = m.stress(&c).unwrap();
                assert!(
                    (fd - t).max_abs() <= 1e-6 * t.max_abs().max(1.0),
                    "{variant:?}"
                );
            }
        }
    }

    #[test]
    fn variant_constraints_are_checked() {
        let constrained = single_node_net();
        assert!(PannModel::new(
            ModelVariant::Basic,
            MaterialSymmetry::Isotropic,
            constrained.clone()
        )
        .is_err());
        assert!(PannModel::new(
            ModelVariant::SimpleFp,
            MaterialSymmetry::Isotropic,
            constrained.clone()
        )
        .is_err());
        assert!(PannModel::new(ModelVariant::Pann, transiso(), constrained).is_err());
        let arch = NetworkArchitecture::new(4, vec![1], true).unwrap();
        let negative = NetworkParams::from_flat(arch, vec![-1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(PannModel::new(ModelVariant::Pann, MaterialSymmetry::Isotropic, negative).is_err());
    }

    #[test]
    fn energy_from_arguments_matches_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = SymTensor3::new(1.2, 0.9, 1.4, 0.1, 0.0, -0.2);
        for sym in [MaterialSymmetry::Isotropic, transiso()] {
            let m = random_model(ModelVariant::Pann, sym, vec![8], &mut rng).unwrap();
            let inv = compute_invariants(&c, &sym).unwrap();
            let mut args = inv.inputs();
            let last = args.len() - 1;
            args[last] = inv.j;
            let a = m.energy_from_arguments(&args).unwrap();
            assert!((a - m.energy(&c).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_model(ModelVariant::Pann, transiso(), vec![8], &mut rng).unwrap();
        let t = tangent(&m, &SymTensor3::identity()).unwrap();
        assert!(t.iter().flatten().all(|v| v.is_finite()));
        assert!(major_asymmetry(&t) <= 1e-4);
    }

    #[test]
    fn serialization_cross_checks_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_model(ModelVariant::Pann, transiso(), vec![8], &mut rng).unwrap();
        let text = serde_json::to_string(&TrainedModel::Pann(m.clone())).unwrap();
        let back: TrainedModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, TrainedModel::Pann(m.clone()));

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["constants"]["o"] = serde_json::json!(123.0);
        let err = serde_json::from_value::<TrainedModel>(doc).unwrap_err();
        assert!(err.to_string().contains("normalization constants"));
    }

    #[test]
    fn simple_fp_zero_and_asymmetry() {
        let zero = SimpleFpParams::zeros(4);
        assert_eq!(SimpleFpParams::parameter_count(4), 85);
        let f = Tensor3::from_row_major([1.2, 0.1, 0.0, 0.0, 0.9, 0.3, 0.0, 0.0, 1.0]);
        assert_eq!(simple_fp_stress(&zero, &f), Tensor3::zero());

        let p = SimpleFpParams::random(4, &mut ChaCha8Rng::seed_from_u64(7));
        let pk = simple_fp_stress(&p, &f);
        let a = pk * f.transpose();
        assert!((a - a.transpose()).max_abs() > 1e-6);

        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<SimpleFpParams>(&text).unwrap(), p);
    }

    #[test]
    fn simple_fp_gradient_matches_finite_differences() {
        let p = SimpleFpParams::random(3, &mut ChaCha8Rng::seed_from_u64(8));
        let f = [1.1, 0.2, -0.1, 0.0, 0.95, 0.05, 0.1, 0.0, 1.2];
        let r = [0.3, -0.2, 0.1, 0.5, 0.0, -0.4, 0.2, 0.1, 0.7];
        let mut grad = vec![0.0; p.as_flat().len()];
        p.accumulate_gradient(&f, &r, &mut grad);
        let s = |q: &SimpleFpParams| {
            q.pk1_flat(&f)
                .iter()
                .zip(&r)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        for k in 0..grad.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.values[k] += 1e-6;
            minus.values[k] -= 1e-6;
            let fd = (s(&plus) - s(&minus)) / 2e-6;
            assert!((fd - grad[k]).abs() < 1e-7, "{k}");
        }
    }
}
