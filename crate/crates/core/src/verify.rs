//! Numerical verification: relative error statistics, non-negativity
//! scans, gradient audits, convexity and growth probes, and the
//! variant-ladder study.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, CalibrationConfig};
use crate::constitutive::{fd_step, fd_stress, Hyperelastic};
use crate::datagen::{split, Dataset, MultiaxialSpec};
use crate::error::{Error, Result};
use crate::icnn::NetworkParams;
use crate::invariants::{is_admissible_tensor, MaterialSymmetry};
use crate::pann::{ModelVariant, TrainedModel};
use crate::tensor3::{Rotation3, SymTensor3};

/// Energies below this value (kPa) count as non-negativity violations.
pub const VIOLATION_THRESHOLD: f64 = -1e-10;

/// `max ‖T − T_model‖ / max ‖T‖` over a dataset.
pub fn relative_error(model: &dyn Hyperelastic, data: &Dataset) -> Result<f64> {
    relative_error_with(|c| model.stress(c), data)
}

/// [`relative_error`] for any calibrated model, including the F → P baseline.
pub fn relative_error_trained(model: &TrainedModel, data: &Dataset) -> Result<f64> {
    relative_error_with(|c| model.stress(c), data)
}

fn relative_error_with<F>(stress: F, data: &Dataset) -> Result<f64>
where
    F: Fn(&SymTensor3) -> Result<SymTensor3>,
{
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut num = 0.0_f64;
    let mut den = 0.0_f64;
    for s in &data.samples {
        num = num.max((stress(&s.c)? - s.t).norm());
        den = den.max(s.t.norm());
    }
    if den == 0.0 {
        return Err(Error::AllZeroStress);
    }
    Ok(num / den)
}

/// Order statistics of a list of ε values (no distribution assumed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Values in run order.
    pub values: Vec<f64>,
    pub min: f64,
    pub p01: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p99: f64,
    pub max: f64,
}

impl ErrorStats {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("no values to summarize".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "ε values must be finite and non-negative".into(),
            ));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self {
            min: sorted[0],
            p01: percentile(&sorted, 0.01),
            p25: percentile(&sorted, 0.25),
            median: percentile(&sorted, 0.5),
            p75: percentile(&sorted, 0.75),
            p99: percentile(&sorted, 0.99),
            max: sorted[sorted.len() - 1],
            values,
        })
    }
}

/// Linear interpolation between order statistics of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Writes ε values one per line under the header `epsilon`.
pub fn write_epsilon_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["epsilon"])
        .map_err(|e| csv_error(path, e))?;
    for v in values {
        w.write_record([format!("{v:.16e}")])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_epsilon_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.len() != 1 || &header[0] != "epsilon" {
        return Err(Error::Format(format!(
            "{}: expected header \"epsilon\"",
            path.display()
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

/// Result of sampling a model's energy for negative values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonNegReport {
    pub sweep: String,
    pub min_energy: f64,
    pub argmin: SymTensor3,
    /// Admissible states with `ψ < −1e-10 kPa` (or a non-finite energy).
    pub violations: usize,
    pub samples: usize,
    /// Constructed states rejected by the admissibility predicate (never evaluated).
    pub inadmissible: usize,
    /// Isotropic scans: whether `∂ψ/∂I1 > 0` and `∂ψ/∂I2 > 0` held on the checked states.
    pub hypothesis_holds: Option<bool>,
    pub hypothesis_note: Option<String>,
}

impl NonNegReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Evaluates the energy at `state(i)` for `i < count`.
fn scan<F>(model: &dyn Hyperelastic, sweep: String, count: usize, state: F) -> Result<NonNegReport>
where
    F: Fn(usize) -> SymTensor3 + Sync,
{
    let energies: Vec<Option<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let c = state(i);
            if is_admissible_tensor(&c) {
                model.energy(&c).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut min_energy = f64::INFINITY;
    let mut argmin = 0;
    let mut violations = 0;
    let mut inadmissible = 0;
    for (i, e) in energies.iter().enumerate() {
        match e {
            None => inadmissible += 1,
            Some(e) => {
                if !(*e >= VIOLATION_THRESHOLD) {
                    violations += 1;
                }
                if *e < min_energy {
                    min_energy = *e;
                    argmin = i;
                }
            }
        }
    }
    Ok(NonNegReport {
        sweep,
        min_energy,
        argmin: state(argmin),
        violations,
        samples: count - inadmissible,
        inadmissible,
        hypothesis_holds: None,
        hypothesis_note: None,
    })
}

/// `n` log-spaced values on `[a, b]`, with 1 inserted when inside the range.
pub fn log_grid_with_identity(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut grid = log_grid(a, b, n);
    if a <= 1.0 && 1.0 <= b && !grid.contains(&1.0) {
        grid.push(1.0);
        grid.sort_by(f64::total_cmp);
    }
    grid
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| match i {
            0 => a,
            _ if i == n - 1 => b,
            _ => (la + (lb - la) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn check_range(range: [f64; 2], what: &str) -> Result<()> {
    if !(range[0] > 0.0 && range[1] > range[0] && range[1].is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "invalid {what} range {range:?}"
        )));
    }
    Ok(())
}

fn principal(l: [f64; 3]) -> SymTensor3 {
    SymTensor3::diag(l[0] * l[0], l[1] * l[1], l[2] * l[2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsoScanConfig {
    pub lambda_range: [f64; 2],
    /// Points of the volumetric grid (λ = 1 is added when missing).
    pub count: usize,
    /// Points per axis of the principal-stretch sweep.
    pub sweep_per_axis: usize,
    /// Run the principal-stretch sweep even when the hypothesis holds.
    pub full_sweep: bool,
}

impl Default for IsoScanConfig {
    fn default() -> Self {
        Self {
            lambda_range: [0.1, 10.0],
            count: 1000,
            sweep_per_axis: 40,
            full_sweep: false,
        }
    }
}

/// Checks `∂ψ/∂I1 > 0` and `∂ψ/∂I2 > 0` on the given states. Under this
/// hypothesis an isotropic energy can have local minima only at volumetric
/// states.
pub fn check_volumetric_hypothesis(model: &dyn Hyperelastic, states: &[SymTensor3]) -> Result<()> {
    for c in states {
        let Some(slopes) = model.isotropic_slopes(c) else {
            return Err(Error::HypothesisViolated(
                "model does not expose isotropic invariant slopes".into(),
            ));
        };
        let (a, b) = slopes?;
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::HypothesisViolated(format!(
                "∂ψ/∂I1 = {a:e}, ∂ψ/∂I2 = {b:e} at C = diag({:.4}, {:.4}, {:.4})",
                c.c11, c.c22, c.c33
            )));
        }
    }
    Ok(())
}

/// Volumetric non-negativity scan `C = λ²·1` of an isotropic model.
///
/// The invariant-slope hypothesis is checked on the volumetric grid and a
/// coarse principal-stretch grid; if it fails (or `full_sweep` is set) the
/// scan is extended by a full principal-stretch sweep.
pub fn nonneg_scan_iso(model: &dyn Hyperelastic, cfg: &IsoScanConfig) -> Result<NonNegReport> {
    if model.symmetry() != MaterialSymmetry::Isotropic {
        return Err(Error::WrongSymmetry {
            expected: "isotropic",
        });
    }
    check_range(cfg.lambda_range, "stretch")?;
    if cfg.count < 2 || cfg.sweep_per_axis < 2 {
        return Err(Error::InvalidParameter(
            "scan grids need at least two points".into(),
        ));
    }
    let [a, b] = cfg.lambda_range;
    let grid = log_grid_with_identity(a, b, cfg.count);
    let volumetric: Vec<SymTensor3> = grid.iter().map(|l| principal([*l; 3])).collect();

    let coarse = log_grid_with_identity(a, b, 12);
    let mut check_states = volumetric.clone();
    for &l1 in &coarse {
        for &l2 in &coarse {
            for &l3 in &coarse {
                check_states.push(principal([l1, l2, l3]));
            }
        }
    }
    let hypothesis = check_volumetric_hypothesis(model, &check_states);

    let mut report = if hypothesis.is_err() || cfg.full_sweep {
        let axis = log_grid_with_identity(a, b, cfg.sweep_per_axis);
        let k = axis.len();
        let nv = volumetric.len();
        let sweep =
            format!("volumetric λ ∈ [{a}, {b}] ({nv} points) + principal stretches ({k}³ points)");
        scan(model, sweep, nv + k * k * k, |i| {
            if i < nv {
                volumetric[i]
            } else {
                let j = i - nv;
                principal([axis[j / (k * k)], axis[(j / k) % k], axis[j % k]])
            }
        })?
    } else {
        let sweep = format!("volumetric λ ∈ [{a}, {b}] ({} points)", volumetric.len());
        scan(model, sweep, volumetric.len(), |i| volumetric[i])?
    };
    report.hypothesis_holds = Some(hypothesis.is_ok());
    report.hypothesis_note = hypothesis.err().map(|e| e.to_string());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransIsoScanConfig {
    pub lambda_range: [f64; 2],
    pub phi_range: [f64; 2],
    /// Quasi-random sample budget, including the identity state.
    pub samples: usize,
    pub seed: u64,
    /// Replaces the quasi-random points by a full grid with this many points per axis.
    pub dense_per_axis: Option<usize>,
}

impl Default for TransIsoScanConfig {
    fn default() -> Self {
        Self {
            lambda_range: [0.1, 10.0],
            phi_range: [0.0, FRAC_PI_2],
            samples: 200_000,
            seed: 0,
            dense_per_axis: None,
        }
    }
}

/// `C = R·diag(λ²)·Rᵀ` with `R = R_x2(φ2)·R_x3(φ3)`.
pub fn rotated_stretch(l: [f64; 3], phi2: f64, phi3: f64) -> SymTensor3 {
    principal(l).rotate(&Rotation3::about_axes(phi2, phi3))
}

/// Five-parameter `(λ1, λ2, λ3, φ2, φ3)` non-negativity sweep of a
/// transversely isotropic model. Sample 0 is the identity; the rest are
/// scrambled Sobol points (log-uniform stretches, uniform angles) or a
/// dense grid.
pub fn nonneg_scan_transiso(
    model: &dyn Hyperelastic,
    cfg: &TransIsoScanConfig,
) -> Result<NonNegReport> {
    if !matches!(
        model.symmetry(),
        MaterialSymmetry::TransverselyIsotropic { .. }
    ) {
        return Err(Error::WrongSymmetry {
            expected: "transversely isotropic",
        });
    }
    check_range(cfg.lambda_range, "stretch")?;
    let [pa, pb] = cfg.phi_range;
    if !(pa.is_finite() && pb.is_finite() && pb >= pa) {
        return Err(Error::InvalidParameter(format!(
            "invalid angle range {:?}",
            cfg.phi_range
        )));
    }
    let (la, lb) = (cfg.lambda_range[0].ln(), cfg.lambda_range[1].ln());
    let stretch = |u: f64| (la + (lb - la) * u).exp();
    let angle = |u: f64| pa + (pb - pa) * u;

    if let Some(k) = cfg.dense_per_axis {
        if k < 2 {
            return Err(Error::InvalidParameter(
                "dense grid needs at least two points per axis".into(),
            ));
        }
        let lam = log_grid(cfg.lambda_range[0], cfg.lambda_range[1], k);
        let phi: Vec<f64> = (0..k).map(|i| angle(i as f64 / (k - 1) as f64)).collect();
        let count = 1 + k.pow(5);
        let sweep = format!("dense grid {k}⁵ over (λ1, λ2, λ3, φ2, φ3) + identity");
        return scan(model, sweep, count, |i| {
            if i == 0 {
                return SymTensor3::identity();
            }
            let mut j = i - 1;
            let mut idx = [0; 5];
            for v in idx.iter_mut().rev() {
                *v = j % k;
                j /= k;
            }
            rotated_stretch(
                [lam[idx[0]], lam[idx[1]], lam[idx[2]]],
                phi[idx[3]],
                phi[idx[4]],
            )
        });
    }

    if cfg.samples == 0 {
        return Err(Error::InvalidParameter(
            "sample budget must be positive".into(),
        ));
    }
    let seed = (cfg.seed ^ (cfg.seed >> 32)) as u32;
    let sweep = format!(
        "scrambled Sobol, {} samples over (λ1, λ2, λ3, φ2, φ3) incl. identity, seed {}",
        cfg.samples, cfg.seed
    );
    scan(model, sweep, cfg.samples, |i| {
        if i == 0 {
            return SymTensor3::identity();
        }
        let u = |d: u32| f64::from(sobol_point(i - 1, d, seed));
        rotated_stretch(
            [stretch(u(0)), stretch(u(1)), stretch(u(2))],
            angle(u(3)),
            angle(u(4)),
        )
    })
}

/// Point `i` of a scrambled Sobol sequence, continued past the 2¹⁶ points
/// one scramble supports by chaining independently seeded blocks.
fn sobol_point(i: usize, dim: u32, seed: u32) -> f32 {
    const BLOCK: usize = 1 << 16;
    let block = (i / BLOCK) as u32;
    let seed = seed ^ block.wrapping_mul(0x9e37_79b9);
    sobol_burley::sample((i % BLOCK) as u32, dim, seed)
}

/// Analytical stress against `2·∂ψ/∂C` by central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientAudit {
    pub states: usize,
    pub seed: u64,
    /// Max over states of `‖T − T_fd‖ / max(‖T‖, 1 kPa)`.
    pub max_relative_deviation: f64,
    pub worst_state: SymTensor3,
}

impl GradientAudit {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_deviation <= tolerance
    }
}

/// Audits the stress of `model` on `count` random admissible multiaxial states.
pub fn gradient_audit(model: &dyn Hyperelastic, count: usize, seed: u64) -> Result<GradientAudit> {
    let states = MultiaxialSpec::new(count, seed).deformations()?;
    let devs = states
        .par_iter()
        .map(|c| {
            let t = model.stress(c)?;
            let fd = fd_stress(|x| model.energy(x), c, fd_step(c))?;
            Ok((t - fd).norm() / t.norm().max(1.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (worst, dev) = devs
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |(bi, bv), (i, v)| {
            if *v > bv || v.is_nan() {
                (i, *v)
            } else {
                (bi, bv)
            }
        });
    Ok(GradientAudit {
        states: count,
        seed,
        max_relative_deviation: dev,
        worst_state: states
            .get(worst)
            .copied()
            .unwrap_or_else(SymTensor3::identity),
    })
}

/// Midpoint convexity of a network on random input pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProbe {
    pub pairs: usize,
    /// Max of `ψ((x+y)/2) − (ψ(x)+ψ(y))/2`, relative to `1 + |ψ(x)| + |ψ(y)|`.
    pub worst_gap: f64,
}

impl ConvexityProbe {
    pub fn passed(&self) -> bool {
        self.worst_gap <= 1e-12
    }
}

/// Samples input pairs uniformly in `[−10, 10]^d`.
pub fn midpoint_convexity_probe(
    net: &NetworkParams,
    pairs: usize,
    seed: u64,
) -> Result<ConvexityProbe> {
    let dim = net.architecture().input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fx, fy, fm) = (net.forward(&x)?, net.forward(&y)?, net.forward(&m)?);
        worst = worst.max((fm - 0.5 * (fx + fy)) / (1.0 + fx.abs() + fy.abs()));
    }
    Ok(ConvexityProbe {
        pairs,
        worst_gap: worst,
    })
}

/// Energy along the volumetric path `C = λ²·1` towards compression and
/// extension limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub lambda_range: [f64; 2],
    pub end_energies: [f64; 2],
    pub interior_max: f64,
    /// Stretches beyond which the energy increases monotonically outwards.
    pub monotone_beyond: [f64; 2],
    pub holds: bool,
}

/// On each side of the identity, the end of the log grid must exceed every
/// interior value of that side and the energy must rise monotonically towards it.
pub fn growth_divergence(
    model: &dyn Hyperelastic,
    lambda_range: [f64; 2],
    count: usize,
) -> Result<GrowthReport> {
    check_range(lambda_range, "stretch")?;
    if count < 3 {
        return Err(Error::InvalidParameter(
            "growth probe needs at least three points".into(),
        ));
    }
    let grid = log_grid_with_identity(lambda_range[0], lambda_range[1], count);
    let e: Vec<f64> = grid
        .iter()
        .map(|l| model.energy(&principal([*l; 3])))
        .collect::<Result<_>>()?;
    let n = e.len();
    let split = grid.partition_point(|l| *l < 1.0).clamp(1, n - 1);
    let side_max =
        |r: std::ops::Range<usize>| e[r].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (compressive_max, tensile_max) = (side_max(1..split), side_max(split..n - 1));
    let interior_max = compressive_max.max(tensile_max);
    let mut lo = 0;
    while lo + 1 < n && e[lo] > e[lo + 1] {
        lo += 1;
    }
    let mut hi = n - 1;
    while hi > 0 && e[hi] > e[hi - 1] {
        hi -= 1;
    }
    Ok(GrowthReport {
        lambda_range,
        end_energies: [e[0], e[n - 1]],
        interior_max,
        monotone_beyond: [grid[lo], grid[hi]],
        holds: e[0] > compressive_max && e[n - 1] > tensile_max && lo > 0 && hi < n - 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub runs: usize,
    pub variants: Vec<ModelVariant>,
    pub hidden_layers: Vec<usize>,
    pub split_fraction: f64,
    pub calibration: CalibrationConfig,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            runs: 20,
            variants: ModelVariant::LADDER.to_vec(),
            hidden_layers: vec![8],
            split_fraction: 0.7,
            calibration: CalibrationConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStudy {
    pub variant: ModelVariant,
    /// ε of the best restart of each run, on the full dataset.
    pub epsilon: ErrorStats,
    pub train_mse: Vec<f64>,
    pub test_mse: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub symmetry: MaterialSymmetry,
    pub data_size: usize,
    pub variants: Vec<VariantStudy>,
}

impl LadderReport {
    pub fn median(&self, variant: ModelVariant) -> Option<f64> {
        self.variants
            .iter()
            .find(|v| v.variant == variant)
            .map(|v| v.epsilon.median)
    }
}

/// Per-run `(split seed, initialization seed)`, shared by all variants so
/// that runs are paired.
fn run_seeds(seed: u64, runs: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..runs).map(|_| (rng.gen(), rng.gen())).collect()
}

/// Calibrates every variant `runs` times on fresh 70/30 splits and reports
/// the ε statistics over the full dataset.
pub fn variant_ladder_study(
    symmetry: MaterialSymmetry,
    data: &Dataset,
    cfg: &StudyConfig,
) -> Result<LadderReport> {
    if cfg.runs == 0 {
        return Err(Error::InvalidParameter(
            "at least one run is required".into(),
        ));
    }
    if cfg.variants.contains(&ModelVariant::SimpleFp) {
        return Err(Error::InvalidParameter(
            "the ladder covers invariant-based variants only".into(),
        ));
    }
    cfg.calibration.validate()?;
    let seeds = run_seeds(cfg.seed, cfg.runs);
    let mut variants = Vec::with_capacity(cfg.variants.len());
    for &variant in &cfg.variants {
        let mut eps = Vec::with_capacity(cfg.runs);
        let mut train = Vec::with_capacity(cfg.runs);
        let mut test = Vec::with_capacity(cfg.runs);
        for (run, &(split_seed, init_seed)) in seeds.iter().enumerate() {
            let tag = |e: Error| Error::StudyRun {
                variant: variant.label(),
                run,
                source: Box::new(e),
            };
            let parts = split(data, cfg.split_fraction, split_seed).map_err(tag)?;
            let ccfg = CalibrationConfig {
                seed: init_seed,
                ..cfg.calibration.clone()
            };
            let res = calibrate(variant, symmetry, cfg.hidden_layers.clone(), &parts, &ccfg)
                .map_err(tag)?;
            eps.push(relative_error_trained(&res.model, data).map_err(tag)?);
            train.push(res.train_mse);
            test.push(res.test_mse);
        }
        variants.push(VariantStudy {
            variant,
            epsilon: ErrorStats::from_values(eps)?,
            train_mse: train,
            test_mse: test,
        });
    }
    Ok(LadderReport {
        symmetry,
        data_size: data.len(),
        variants,
    })
}
