//! Common interface of hyperelastic models mapping C to (ψ, T), plus
//! finite-difference helpers shared by verification and tangent code.

use crate::error::Result;
use crate::invariants::MaterialSymmetry;
use crate::tensor3::{SymTensor3, SYM_PAIRS};

/// A hyperelastic constitutive model in terms of the right Cauchy–Green tensor.
///
/// Energies are in kPa, stresses are second Piola–Kirchhoff stresses in kPa.
pub trait Hyperelastic: Send + Sync {
    fn energy(&self, c: &SymTensor3) -> Result<f64>;

    fn stress(&self, c: &SymTensor3) -> Result<SymTensor3>;

    fn symmetry(&self) -> MaterialSymmetry;

    /// `(∂ψ/∂I1, ∂ψ/∂I2)` at C for isotropic invariant-based models.
    fn isotropic_slopes(&self, _c: &SymTensor3) -> Option<Result<(f64, f64)>> {
        None
    }
}

/// Default relative step for finite differences in C.
pub const FD_RELATIVE_STEP: f64 = 1e-6;

pub fn fd_step(c: &SymTensor3) -> f64 {
    FD_RELATIVE_STEP * c.norm().max(1.0)
}

fn perturbed(c: &SymTensor3, k: usize, delta: f64) -> SymTensor3 {
    let mut a = c.to_array();
    a[k] += delta;
    SymTensor3::from_array(a)
}

/// `2 ∂ψ/∂C` by central differences of the energy.
///
/// Off-diagonal storage components move both `C_ij` and `C_ji`, so their
/// difference quotient already equals `2 ∂ψ/∂C_ij`.
pub fn fd_stress<F>(energy: F, c: &SymTensor3, h: f64) -> Result<SymTensor3>
where
    F: Fn(&SymTensor3) -> Result<f64>,
{
    let mut out = [0.0; 6];
    for (k, v) in out.iter_mut().enumerate() {
        let plus = energy(&perturbed(c, k, h))?;
        let minus = energy(&perturbed(c, k, -h))?;
        let d = (plus - minus) / (2.0 * h);
        *v = if k < 3 { 2.0 * d } else { d };
    }
    Ok(SymTensor3::from_array(out))
}

/// Material tangent `2 ∂T/∂C` in the symmetric 6×6 representation.
///
/// Rows and columns follow the storage order `(11, 22, 33, 12, 13, 23)`;
/// entry `[a][b]` is the tensor component `ℂ_{ij kl}` for pairs `a = ij`,
/// `b = kl`, without Voigt weighting. Computed by central differences of
/// the analytical stress with step `1e-6·max(1, ‖C‖)`.
pub fn tangent(model: &dyn Hyperelastic, c: &SymTensor3) -> Result<[[f64; 6]; 6]> {
    let h = fd_step(c);
    let mut out = [[0.0; 6]; 6];
    for b in 0..6 {
        let plus = model.stress(&perturbed(c, b, h))?.to_array();
        let minus = model.stress(&perturbed(c, b, -h))?.to_array();
        let factor = if SYM_PAIRS[b].0 == SYM_PAIRS[b].1 {
            2.0
        } else {
            1.0
        };
        for (a, row) in out.iter_mut().enumerate() {
            row[b] = factor * (plus[a] - minus[a]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Largest relative asymmetry `|A_ab − A_ba| / max|A|` of a 6×6 matrix.
pub fn major_asymmetry(m: &[[f64; 6]; 6]) -> f64 {
    let scale = m.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for a in 0..6 {
        for b in a + 1..6 {
            worst = worst.max((m[a][b] - m[b][a]).abs());
        }
    }
    worst / scale
}
