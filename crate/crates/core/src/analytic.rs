//! Analytical reference models: compressible Neo-Hooke and the
//! transversely isotropic Schröder model with an energy normalization shift.

use serde::{Deserialize, Serialize};

use crate::constitutive::Hyperelastic;
use crate::error::{Error, Result};
use crate::invariants::{compute_invariants, InvariantSet, MaterialSymmetry, StructuralTensor};
use crate::tensor3::SymTensor3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeoHookeParams {
    /// Young's modulus in kPa.
    pub e: f64,
    /// Poisson's ratio.
    pub nu: f64,
}

impl Default for NeoHookeParams {
    fn default() -> Self {
        Self { e: 1e3, nu: 0.3 }
    }
}

impl NeoHookeParams {
    pub fn mu(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    pub fn lambda(&self) -> f64 {
        self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0) || !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "Neo-Hooke requires E > 0 and -1 < nu < 0.5, got E = {}, nu = {}",
                self.e, self.nu
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransIsoParams {
    pub beta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub alpha4: f64,
    pub eta1: f64,
}

impl Default for TransIsoParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            alpha1: 8.0,
            alpha2: 0.0,
            delta1: 10.0,
            delta2: 56.0,
            alpha4: 2.0,
            eta1: 10.0,
        }
    }
}

impl TransIsoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.alpha4 >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "transversely isotropic model requires beta > 0 and alpha4 >= 1, got beta = {}, alpha4 = {}",
                self.beta, self.alpha4
            )));
        }
        Ok(())
    }

    /// `η* = η1 / (α4 (tr G)^α4)`.
    pub fn eta_star(&self) -> f64 {
        let tr_g = self.beta * self.beta + 2.0 / self.beta;
        self.eta1 / (self.alpha4 * tr_g.powf(self.alpha4))
    }

    /// Constant shift that zeroes the energy at C = 1.
    pub fn energy_shift(&self) -> f64 {
        -(3.0 * self.alpha1 + 3.0 * self.alpha2 + self.delta1 + 2.0 * self.eta1 / self.alpha4)
    }
}

fn require_positive_i3(inv: &InvariantSet) -> Result<()> {
    if !(inv.i3 > 0.0) {
        return Err(Error::NonPositiveDeterminant { det: inv.i3 });
    }
    Ok(())
}

pub fn nh_energy(inv: &InvariantSet, p: &NeoHookeParams) -> Result<f64> {
    require_positive_i3(inv)?;
    let ln_i3 = inv.i3.ln();
    Ok(0.5 * (p.mu() * (inv.i1 - ln_i3 - 3.0) + 0.5 * p.lambda() * (inv.i3 - ln_i3 - 1.0)))
}

pub fn nh_stress(inv: &InvariantSet, p: &NeoHookeParams) -> Result<SymTensor3> {
    require_positive_i3(inv)?;
    let (mu, lambda) = (p.mu(), p.lambda());
    Ok(SymTensor3::identity() * mu
        + inv.cof_c * (0.5 * lambda - (2.0 * mu + lambda) / (2.0 * inv.i3)))
}

fn aniso_parts(inv: &InvariantSet) -> Result<(f64, f64, SymTensor3, SymTensor3)> {
    let a = inv.aniso.ok_or(Error::WrongSymmetry {
        expected: "transversely isotropic",
    })?;
    if !(a.i4 > 0.0) {
        return Err(Error::NonPositiveAnisotropicInvariant {
            index: 4,
            value: a.i4,
        });
    }
    if !(a.i5 > 0.0) {
        return Err(Error::NonPositiveAnisotropicInvariant {
            index: 5,
            value: a.i5,
        });
    }
    Ok((a.i4, a.i5, a.d_i4, a.d_i5))
}

pub fn ti_energy(inv: &InvariantSet, p: &TransIsoParams) -> Result<f64> {
    require_positive_i3(inv)?;
    let (i4, i5, _, _) = aniso_parts(inv)?;
    let raw = p.alpha1 * inv.i1 + p.alpha2 * inv.i2 + p.delta1 * inv.i3
        - p.delta2 * 0.5 * inv.i3.ln()
        + p.eta_star() * (i4.powf(p.alpha4) + i5.powf(p.alpha4));
    Ok(raw + p.energy_shift())
}

pub fn ti_stress(inv: &InvariantSet, p: &TransIsoParams) -> Result<SymTensor3> {
    require_positive_i3(inv)?;
    let (i4, i5, d_i4, d_i5) = aniso_parts(inv)?;
    let k = p.alpha4 * p.eta_star();
    let inner = SymTensor3::identity() * p.alpha1
        + inv.d_i2 * p.alpha2
        + inv.c_inv * (p.delta1 * inv.i3 - 0.5 * p.delta2)
        + d_i4 * (k * i4.powf(p.alpha4 - 1.0))
        + d_i5 * (k * i5.powf(p.alpha4 - 1.0));
    Ok(inner * 2.0)
}

/// Isotropic compressible Neo-Hooke model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoHooke {
    pub params: NeoHookeParams,
}

impl NeoHooke {
    pub fn new(params: NeoHookeParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl Hyperelastic for NeoHooke {
    fn energy(&self, c: &SymTensor3) -> Result<f64> {
        nh_energy(
            &compute_invariants(c, &MaterialSymmetry::Isotropic)?,
            &self.params,
        )
    }

    fn stress(&self, c: &SymTensor3) -> Result<SymTensor3> {
        nh_stress(
            &compute_invariants(c, &MaterialSymmetry::Isotropic)?,
            &self.params,
        )
    }

    fn symmetry(&self) -> MaterialSymmetry {
        MaterialSymmetry::Isotropic
    }

    fn isotropic_slopes(&self, _c: &SymTensor3) -> Option<Result<(f64, f64)>> {
        Some(Ok((0.5 * self.params.mu(), 0.0)))
    }
}

/// Transversely isotropic model with preferred direction X1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransIso {
    pub params: TransIsoParams,
    symmetry: MaterialSymmetry,
}

impl TransIso {
    pub fn new(params: TransIsoParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            symmetry: MaterialSymmetry::TransverselyIsotropic {
                beta: StructuralTensor::new(params.beta)?,
            },
        })
    }
}

impl Hyperelastic for TransIso {
    fn energy(&self, c: &SymTensor3) -> Result<f64> {
        ti_energy(&compute_invariants(c, &self.symmetry)?, &self.params)
    }

    fn stress(&self, c: &SymTensor3) -> Result<SymTensor3> {
        ti_stress(&compute_invariants(c, &self.symmetry)?, &self.params)
    }

    fn symmetry(&self) -> MaterialSymmetry {
        self.symmetry
    }
}

/// Serializable choice of reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceModel {
    NeoHooke(NeoHookeParams),
    TransIso(TransIsoParams),
}

impl ReferenceModel {
    pub fn build(&self) -> Result<Box<dyn Hyperelastic>> {
        Ok(match self {
            ReferenceModel::NeoHooke(p) => Box::new(NeoHooke::new(*p)?),
            ReferenceModel::TransIso(p) => Box::new(TransIso::new(*p)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReferenceModel::NeoHooke(_) => "neo_hooke",
            ReferenceModel::TransIso(_) => "trans_iso",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{fd_step, fd_stress};

    #[test]
    fn lame_constants_from_default_params() {
        let p = NeoHookeParams::default();
        assert!((p.mu() - 384.615_384_615_384_6).abs() < 1e-9);
        assert!((p.lambda() - 576.923_076_923_076_9).abs() < 1e-9);
    }

    #[test]
    fn neo_hooke_identity_and_uniaxial_energy() {
        let nh = NeoHooke::new(NeoHookeParams::default()).unwrap();
        assert_eq!(nh.energy(&SymTensor3::identity()).unwrap(), 0.0);
        assert!(nh.stress(&SymTensor3::identity()).unwrap().max_abs() < 1e-10);

        // (I1, I3) = (6, 4): ½(μ(6 − ln4 − 3) + λ/2 (4 − ln4 − 1))
        let (mu, lambda) = (5000.0 / 13.0, 7500.0 / 13.0);
        let ln4 = 4.0_f64.ln();
        let want = 0.5 * (mu * (3.0 - ln4) + 0.5 * lambda * (3.0 - ln4));
        let got = nh.energy(&SymTensor3::diag(4.0, 1.0, 1.0)).unwrap();
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn trans_iso_constants() {
        let p = TransIsoParams::default();
        assert_eq!(p.energy_shift(), -44.0);
        // trG = 4 + 2/2 = 5
        assert!((p.eta_star() - 10.0 / (2.0 * 5.0 * 5.0)).abs() < 1e-15);
    }

    #[test]
    fn trans_iso_identity_normalized() {
        let ti = TransIso::new(TransIsoParams::default()).unwrap();
        assert!(ti.energy(&SymTensor3::identity()).unwrap().abs() < 1e-12);
        assert!(ti.stress(&SymTensor3::identity()).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn trans_iso_uniaxial_stress_by_hand() {
        // C = diag(4,1,1), β = 2: I1 = 6, I2 = 9, I3 = 4, I4 = 16 + 0.5 + 0.5 = 17,
        // Cof C = diag(1,4,4) so I5 = 4 + 2 + 2 = 8.
        let ti = TransIso::new(TransIsoParams::default()).unwrap();
        let c = SymTensor3::diag(4.0, 1.0, 1.0);
        let t = ti.stress(&c).unwrap();
        let es = 10.0 / (2.0 * 5.0 * 5.0);
        let k = 2.0 * es;
        // dI5/dC = I5 C⁻¹ − Cof C · G · C⁻¹ = 8 diag(¼,1,1) − diag(1·4·¼, 4·½·1, 4·½·1)
        let d_i5 = [2.0 - 1.0, 8.0 - 2.0, 8.0 - 2.0];
        let c_inv = [0.25, 1.0, 1.0];
        let g = [4.0, 0.5, 0.5];
        for i in 0..3 {
            let want =
                2.0 * (8.0 + (10.0 * 4.0 - 28.0) * c_inv[i] + k * 17.0 * g[i] + k * 8.0 * d_i5[i]);
            assert!(
                (t.get(i, i) - want).abs() < 1e-12 * want.abs().max(1.0),
                "{i}"
            );
        }
        assert_eq!(t.c12, 0.0);
    }

    #[test]
    fn stresses_match_energy_gradients() {
        let nh = NeoHooke::new(NeoHookeParams::default()).unwrap();
        let ti = TransIso::new(TransIsoParams::default()).unwrap();
        let c = SymTensor3::new(1.3, 0.9, 1.1, 0.12, -0.05, 0.08);
        for model in [&nh as &dyn Hyperelastic, &ti] {
            let fd = fd_stress(|c| model.energy(c), &c, fd_step(&c)).unwrap();
            let t = model.stress(&c).unwrap();
            let scale = t.max_abs();
            assert!((fd - t).max_abs() <= 1e-6 * scale, "{fd:?} vs {t:?}");
        }
    }

    #[test]
    fn trans_iso_requires_anisotropic_invariants() {
        let inv =
            compute_invariants(&SymTensor3::identity(), &MaterialSymmetry::Isotropic).unwrap();
        assert!(matches!(
            ti_energy(&inv, &TransIsoParams::default()),
            Err(Error::WrongSymmetry { .. })
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(NeoHooke::new(NeoHookeParams { e: 1e3, nu: 0.5 }).is_err());
        assert!(NeoHooke::new(NeoHookeParams { e: -1.0, nu: 0.3 }).is_err());
        let bad = TransIsoParams {
            alpha4: 0.5,
            ..Default::default()
        };
        assert!(TransIso::new(bad).is_err());
    }
}
