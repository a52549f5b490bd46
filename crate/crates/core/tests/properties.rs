use pann::analytic::{NeoHooke, NeoHookeParams, TransIso, TransIsoParams};
use pann::constitutive::{fd_step, fd_stress, Hyperelastic};
use pann::datagen::{sample_multiaxial, Dataset, MultiaxialSpec, Sample};
use pann::invariants::{compute_invariants, is_admissible, is_admissible_tensor, MaterialSymmetry};
use pann::pann::{growth_energy, random_model, ModelVariant, PannModel};
use pann::tensor3::{Rotation3, SymTensor3, Tensor3};
use pann::verify::relative_error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn sym_close(a: &SymTensor3, b: &SymTensor3, rel: f64) -> bool {
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    (*a - *b).max_abs() <= rel * scale
}

fn arb_rotation() -> impl Strategy<Value = Rotation3> {
    prop::array::uniform4(-1.0_f64..1.0)
        .prop_filter("non-degenerate quaternion", |q| {
            q.iter().map(|v| v * v).sum::<f64>() > 1e-2
        })
        .prop_map(Rotation3::from_quaternion)
}

/// F = I + H with moderate H and positive determinant.
fn arb_deformation_gradient() -> impl Strategy<Value = Tensor3> {
    prop::array::uniform9(-0.4_f64..0.4)
        .prop_map(|h| {
            let mut f = Tensor3::identity();
            for (k, v) in h.iter().enumerate() {
                f.0[k / 3][k % 3] += v;
            }
            f
        })
        .prop_filter("orientation preserving", |f| f.det() > 0.05)
}

fn arb_c() -> impl Strategy<Value = SymTensor3> {
    arb_deformation_gradient().prop_map(|f| f.right_cauchy_green())
}

fn transiso() -> MaterialSymmetry {
    MaterialSymmetry::transversely_isotropic(2.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cofactor_equals_det_times_inverse(f in arb_deformation_gradient()) {
        let cof = f.cof();
        let want = f.inverse().unwrap().transpose().scale(f.det());
        prop_assert!((cof - want).max_abs() <= 1e-12 * cof.max_abs().max(1.0));

        let c = f.right_cauchy_green();
        let want = c.inverse().unwrap() * c.det();
        prop_assert!(sym_close(&c.cof(), &want, 1e-12));
    }

    #[test]
    fn right_cauchy_green_is_symmetric_with_det_squared(f in arb_deformation_gradient()) {
        let c = f.right_cauchy_green();
        let full = f.transpose() * f;
        prop_assert!((c.to_tensor() - full).max_abs() <= 1e-14 * full.max_abs());
        prop_assert!(close(c.det(), f.det() * f.det(), 1e-12));
    }

    #[test]
    fn rotation_preserves_scalar_invariants(c in arb_c(), r in arb_rotation()) {
        prop_assert!(close(r.det(), 1.0, 1e-12));
        let rc = c.rotate(&r);
        prop_assert!(close(rc.trace(), c.trace(), 1e-12));
        prop_assert!(close(rc.det(), c.det(), 1e-12));
        prop_assert!(close(rc.cof().trace(), c.cof().trace(), 1e-12));
    }

    #[test]
    fn spd_square_root_squares_back(c in arb_c()) {
        let u = c.sqrt_spd().unwrap();
        let uu = (u.to_tensor() * u.to_tensor()).sym_part();
        prop_assert!(sym_close(&uu, &c, 1e-12));
        prop_assert!(is_admissible_tensor(&u));
    }

    #[test]
    fn invariant_derivatives_match_finite_differences(c in arb_c()) {
        let sym = transiso();
        let inv = compute_invariants(&c, &sym).unwrap();
        let h = fd_step(&c);
        for k in 0..6 {
            // fd_stress returns 2 ∂f/∂C; the analytic derivatives are ∂I/∂C.
            let fd = fd_stress(|c| Ok(compute_invariants(c, &sym)?.inputs()[k]), &c, h).unwrap() * 0.5;
            let d = inv.input_derivatives()[k];
            prop_assert!(sym_close(&fd, &d, 1e-6), "input {k}: {fd:?} vs {d:?}");
        }
        let fd_j = fd_stress(|c| Ok(compute_invariants(c, &sym)?.j), &c, h).unwrap() * 0.5;
        prop_assert!(sym_close(&fd_j, &inv.d_j, 1e-6));
    }

    #[test]
    fn isotropic_invariants_are_rotation_invariant(c in arb_c(), r in arb_rotation()) {
        let a = compute_invariants(&c, &MaterialSymmetry::Isotropic).unwrap().inputs();
        let b = compute_invariants(&c.rotate(&r), &MaterialSymmetry::Isotropic).unwrap().inputs();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close(*x, *y, 1e-11));
        }
    }

    #[test]
    fn anisotropic_invariants_respect_preferred_direction(c in arb_c(), phi in 0.0_f64..6.3) {
        let sym = transiso();
        let r = Rotation3::about_x1(phi);
        let a = compute_invariants(&c, &sym).unwrap().inputs();
        let b = compute_invariants(&c.rotate(&r), &sym).unwrap().inputs();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(close(*x, *y, 1e-11));
        }
    }

    #[test]
    fn positive_definite_tensors_are_admissible(c in arb_c()) {
        prop_assert!(is_admissible_tensor(&c));
    }

    #[test]
    fn two_negative_eigenvalues_are_rejected(
        l in prop::array::uniform3(0.05_f64..5.0),
        r in arb_rotation(),
    ) {
        // positive determinant and possibly positive I1, but not definite
        let c = SymTensor3::diag(-l[0], -l[1], l[2]).rotate(&r);
        prop_assert!(!is_admissible(c.trace(), c.cof().trace(), c.det()));
    }

    #[test]
    fn reference_models_are_objective_and_consistent(c in arb_c(), r in arb_rotation(), phi in 0.0_f64..6.3) {
        let nh = NeoHooke::new(NeoHookeParams::default()).unwrap();
        let ti = TransIso::new(TransIsoParams::default()).unwrap();

        let rc = c.rotate(&r);
        prop_assert!(close(nh.energy(&c).unwrap(), nh.energy(&rc).unwrap(), 1e-10));
        let t = nh.stress(&c).unwrap();
        prop_assert!(sym_close(&nh.stress(&rc).unwrap(), &t.rotate(&r), 1e-10));

        let r1 = Rotation3::about_x1(phi);
        let r1c = c.rotate(&r1);
        prop_assert!(close(ti.energy(&c).unwrap(), ti.energy(&r1c).unwrap(), 1e-10));
        let t = ti.stress(&c).unwrap();
        prop_assert!(sym_close(&ti.stress(&r1c).unwrap(), &t.rotate(&r1), 1e-10));

        for model in [&nh as &dyn Hyperelastic, &ti] {
            let fd = fd_stress(|c| model.energy(c), &c, fd_step(&c)).unwrap();
            prop_assert!(sym_close(&fd, &model.stress(&c).unwrap(), 1e-5));
            prop_assert!(model.energy(&c).unwrap() >= -1e-10);
        }
    }
}

fn arb_variant() -> impl Strategy<Value = ModelVariant> {
    prop::sample::select(ModelVariant::LADDER.to_vec())
}

fn model(variant: ModelVariant, symmetry: MaterialSymmetry, seed: u64) -> PannModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model(variant, symmetry, vec![4, 3], &mut rng).unwrap()
}

/// Stresses of a wrapped model scaled by a constant.
struct Scaled<'a>(&'a dyn Hyperelastic, f64);

impl Hyperelastic for Scaled<'_> {
    fn energy(&self, c: &SymTensor3) -> pann::error::Result<f64> {
        Ok(self.1 * self.0.energy(c)?)
    }

    fn stress(&self, c: &SymTensor3) -> pann::error::Result<SymTensor3> {
        Ok(SymTensor3::from_array(
            self.0.stress(c)?.to_array().map(|t| self.1 * t),
        ))
    }

    fn symmetry(&self) -> MaterialSymmetry {
        self.0.symmetry()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pann_models_are_objective(
        variant in arb_variant(), seed in any::<u64>(), c in arb_c(), r in arb_rotation(), phi in 0.0_f64..6.3,
    ) {
        let iso = model(variant, MaterialSymmetry::Isotropic, seed);
        let rc = c.rotate(&r);
        prop_assert!(close(iso.energy(&c).unwrap(), iso.energy(&rc).unwrap(), 1e-9));
        prop_assert!(sym_close(&iso.stress(&rc).unwrap(), &iso.stress(&c).unwrap().rotate(&r), 1e-9));

        let ti = model(variant, transiso(), seed);
        let r1 = Rotation3::about_x1(phi);
        let r1c = c.rotate(&r1);
        prop_assert!(close(ti.energy(&c).unwrap(), ti.energy(&r1c).unwrap(), 1e-9));
        prop_assert!(sym_close(&ti.stress(&r1c).unwrap(), &ti.stress(&c).unwrap().rotate(&r1), 1e-9));
    }

    #[test]
    fn pann_stress_is_the_energy_gradient(variant in arb_variant(), seed in any::<u64>(), c in arb_c()) {
        for sym in [MaterialSymmetry::Isotropic, transiso()] {
            let m = model(variant, sym, seed);
            let t = m.stress(&c).unwrap();
            let fd = fd_stress(|c| m.energy(c), &c, fd_step(&c)).unwrap();
            let scale = t.max_abs().max(1.0);
            prop_assert!((fd - t).max_abs() <= 1e-5 * scale, "{variant:?} {sym:?}: {fd:?} vs {t:?}");
        }
    }

    #[test]
    fn normalized_models_vanish_at_the_identity(seed in any::<u64>()) {
        for sym in [MaterialSymmetry::Isotropic, transiso()] {
            let m = model(ModelVariant::Pann, sym, seed);
            let one = SymTensor3::identity();
            let scale = 1.0 + m.energy_shift().abs();
            prop_assert!(m.energy(&one).unwrap().abs() <= 1e-12 * scale);
            prop_assert!(m.stress(&one).unwrap().norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn constrained_networks_have_non_negative_weights(variant in arb_variant(), seed in any::<u64>()) {
        let m = model(variant, transiso(), seed);
        if variant.constrained() {
            prop_assert!(m.network().weights_nonnegative());
        }
    }

    #[test]
    fn growth_energy_rises_away_from_unit_volume(a in 1e-3_f64..1e3, b in 1e-3_f64..1e3) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi / lo > 1.0 + 1e-9);
        let (glo, ghi) = (growth_energy(lo).unwrap(), growth_energy(hi).unwrap());
        if lo >= 1.0 {
            prop_assert!(ghi > glo);
        }
        if hi <= 1.0 {
            prop_assert!(glo > ghi);
        }
        prop_assert!(close(growth_energy(lo).unwrap(), growth_energy(1.0 / lo).unwrap(), 1e-12));
    }

    #[test]
    fn relative_error_is_scale_invariant(seed in any::<u64>(), k in -8_i32..8, e in 200.0_f64..5000.0) {
        let reference = NeoHooke::new(NeoHookeParams::default()).unwrap();
        let candidate = NeoHooke::new(NeoHookeParams { e, nu: 0.3 }).unwrap();
        let data = sample_multiaxial(&reference, &MultiaxialSpec::new(20, seed)).unwrap();
        let factor = 2f64.powi(k);
        let scaled = Dataset::new(
            data.samples
                .iter()
                .map(|s| Sample { c: s.c, t: SymTensor3::from_array(s.t.to_array().map(|t| factor * t)) })
                .collect(),
        );
        let base = relative_error(&candidate, &data).unwrap();
        let rescaled = relative_error(&Scaled(&candidate, factor), &scaled).unwrap();
        prop_assert!(close(base, rescaled, 1e-12) || (base - rescaled).abs() <= 1e-15);
    }
}
