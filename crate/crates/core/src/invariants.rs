//! Isotropic and transversely isotropic invariants of the right Cauchy–Green
//! tensor together with their derivatives with respect to C.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor3::SymTensor3;

/// Transversely isotropic structural tensor with preferred direction X1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralTensor {
    beta: f64,
    g: SymTensor3,
    tr_g: f64,
}

impl StructuralTensor {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "structural parameter beta must be positive, got {beta}"
            )));
        }
        Ok(Self {
            beta,
            g: SymTensor3::diag(beta * beta, 1.0 / beta, 1.0 / beta),
            tr_g: beta * beta + 2.0 / beta,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tensor(&self) -> &SymTensor3 {
        &self.g
    }

    pub fn trace(&self) -> f64 {
        self.tr_g
    }
}

impl Serialize for StructuralTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.beta.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StructuralTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let beta = f64::deserialize(d)?;
        StructuralTensor::new(beta).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaterialSymmetry {
    Isotropic,
    TransverselyIsotropic { beta: StructuralTensor },
}

impl MaterialSymmetry {
    pub fn transversely_isotropic(beta: f64) -> Result<Self> {
        Ok(MaterialSymmetry::TransverselyIsotropic {
            beta: StructuralTensor::new(beta)?,
        })
    }

    /// Number of network inputs: (I1, I2, I3, I1*) or (I1, I2, I3, I4, I5, I1*).
    pub fn input_dim(&self) -> usize {
        match self {
            MaterialSymmetry::Isotropic => 4,
            MaterialSymmetry::TransverselyIsotropic { .. } => 6,
        }
    }

    pub fn structural_tensor(&self) -> Option<&StructuralTensor> {
        match self {
            MaterialSymmetry::Isotropic => None,
            MaterialSymmetry::TransverselyIsotropic { beta } => Some(beta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaterialSymmetry::Isotropic => "isotropic",
            MaterialSymmetry::TransverselyIsotropic { .. } => "transversely isotropic",
        }
    }
}

/// Anisotropic part of an invariant set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropicInvariants {
    pub i4: f64,
    pub i5: f64,
    pub d_i4: SymTensor3,
    pub d_i5: SymTensor3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantSet {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub j: f64,
    pub i1_star: f64,
    pub c_inv: SymTensor3,
    pub cof_c: SymTensor3,
    pub d_i1: SymTensor3,
    pub d_i2: SymTensor3,
    pub d_i3: SymTensor3,
    pub d_j: SymTensor3,
    pub d_i1_star: SymTensor3,
    pub aniso: Option<AnisotropicInvariants>,
}

impl InvariantSet {
    /// Network input vector in the order used throughout the crate.
    pub fn inputs(&self) -> Vec<f64> {
        match &self.aniso {
            None => vec![self.i1, self.i2, self.i3, self.i1_star],
            Some(a) => vec![self.i1, self.i2, self.i3, a.i4, a.i5, self.i1_star],
        }
    }

    /// `∂I_k/∂C` aligned with [`InvariantSet::inputs`].
    pub fn input_derivatives(&self) -> Vec<SymTensor3> {
        match &self.aniso {
            None => vec![self.d_i1, self.d_i2, self.d_i3, self.d_i1_star],
            Some(a) => vec![
                self.d_i1,
                self.d_i2,
                self.d_i3,
                a.d_i4,
                a.d_i5,
                self.d_i1_star,
            ],
        }
    }

    pub fn i4(&self) -> Option<f64> {
        self.aniso.map(|a| a.i4)
    }

    pub fn i5(&self) -> Option<f64> {
        self.aniso.map(|a| a.i5)
    }
}

pub fn compute_invariants(c: &SymTensor3, sym: &MaterialSymmetry) -> Result<InvariantSet> {
    let i3 = c.det();
    if !(i3 > 0.0) {
        return Err(Error::NonPositiveDeterminant { det: i3 });
    }
    let cof_c = c.cof();
    let c_inv = cof_c * (1.0 / i3);
    let i1 = c.trace();
    let i2 = cof_c.trace();
    let j = i3.sqrt();

    let aniso = sym.structural_tensor().map(|st| {
        let g = st.tensor();
        let i4 = c.ddot(g);
        let i5 = cof_c.ddot(g);
        let cgc = (cof_c.to_tensor() * g.to_tensor() * c_inv.to_tensor()).sym_part();
        AnisotropicInvariants {
            i4,
            i5,
            d_i4: *g,
            d_i5: c_inv * i5 - cgc,
        }
    });

    Ok(InvariantSet {
        i1,
        i2,
        i3,
        j,
        i1_star: -2.0 * j,
        c_inv,
        cof_c,
        d_i1: SymTensor3::identity(),
        d_i2: SymTensor3::identity() * i1 - *c,
        d_i3: cof_c,
        d_j: c_inv * (0.5 * j),
        d_i1_star: c_inv * (-j),
        aniso,
    })
}

/// Discriminant-type admissibility function of the principal invariants.
///
/// Real eigenvalues require `Γ ≤ 0`; together with positive invariants this
/// characterizes positive-definite C.
pub fn admissibility_gamma(i1: f64, i2: f64, i3: f64) -> f64 {
    (4.0 * i1.powi(3) * i3 - i1 * i1 * i2 * i2 + 4.0 * i2.powi(3) + 27.0 * i3 * i3
        - 18.0 * i1 * i2 * i3)
        / 108.0
}

/// Roundoff allowance on Γ, relative to the degree-six scale `max(1, I1⁶)`.
pub const GAMMA_TOLERANCE: f64 = 1e-12;

pub fn is_admissible(i1: f64, i2: f64, i3: f64) -> bool {
    let scale = 1.0_f64.max(i1.abs().powi(6));
    i1 > 0.0 && i2 > 0.0 && i3 > 0.0 && admissibility_gamma(i1, i2, i3) <= GAMMA_TOLERANCE * scale
}

/// Admissibility check of a symmetric deformation tensor.
pub fn is_admissible_tensor(c: &SymTensor3) -> bool {
    is_admissible(c.trace(), c.cof().trace(), c.det())
}
