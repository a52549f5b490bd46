//! Homogeneous load paths: uniaxial and equibiaxial stress with a solved
//! lateral stretch, simple shear, and stress perturbations of datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constitutive::Hyperelastic;
use crate::datagen::{Dataset, Perturbation, Sample};
use crate::error::{Error, Result};
use crate::tensor3::SymTensor3;

/// Bracket searched for the lateral stretch.
pub const LATERAL_BRACKET: (f64, f64) = (0.2, 5.0);
pub const MAX_NEWTON_ITERATIONS: usize = 100;
/// Newton stops once the lateral stress is below `NEWTON_TOLERANCE·max(1, |T11|)`.
pub const NEWTON_TOLERANCE: f64 = 1e-12;
/// Points are emitted only if the lateral stress is below `EMIT_TOLERANCE·max(1, |T11|)`.
pub const EMIT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadPath {
    Uniaxial {
        range: [f64; 2],
        count: usize,
        #[serde(default = "default_true")]
        duplicate_identity: bool,
    },
    Biaxial {
        range: [f64; 2],
        count: usize,
        #[serde(default = "default_true")]
        duplicate_identity: bool,
    },
    SimpleShear {
        range: [f64; 2],
        count: usize,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    /// λ1 for stretch paths, γ for shear.
    pub control: f64,
    pub lateral_stretch: Option<f64>,
    pub c: SymTensor3,
    pub t: SymTensor3,
    pub newton_residual: f64,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Stretch grid over `range`. When the range strictly contains 1 and
/// `duplicate_identity` is set, the count is split proportionally into a
/// compression and a tension branch that both end at λ = 1.
pub fn stretch_grid(range: [f64; 2], count: usize, duplicate_identity: bool) -> Vec<f64> {
    let [lo, hi] = range;
    if !(duplicate_identity && lo < 1.0 && hi > 1.0 && count >= 4) {
        return linspace(lo, hi, count);
    }
    let share = (1.0 - lo) / (hi - lo);
    let n_c = ((count as f64 * share).round() as usize).clamp(2, count - 2);
    let mut grid = linspace(lo, 1.0, n_c);
    grid.extend(linspace(1.0, hi, count - n_c));
    grid
}

impl LoadPath {
    pub fn uniaxial(range: [f64; 2], count: usize) -> Self {
        LoadPath::Uniaxial {
            range,
            count,
            duplicate_identity: true,
        }
    }

    pub fn biaxial(range: [f64; 2], count: usize) -> Self {
        LoadPath::Biaxial {
            range,
            count,
            duplicate_identity: true,
        }
    }

    pub fn shear(range: [f64; 2], count: usize) -> Self {
        LoadPath::SimpleShear { range, count }
    }

    pub fn validate(&self) -> Result<()> {
        let (range, count) = match *self {
            LoadPath::Uniaxial { range, count, .. } | LoadPath::Biaxial { range, count, .. } => {
                if !(range[0] > 0.0) {
                    return Err(Error::InvalidParameter("stretches must be positive".into()));
                }
                (range, count)
            }
            LoadPath::SimpleShear { range, count } => {
                if !(range[0] >= 0.0) {
                    return Err(Error::InvalidParameter("shear must be non-negative".into()));
                }
                (range, count)
            }
        };
        if !(range[1] >= range[0]) || !range.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid range {range:?}")));
        }
        if count == 0 {
            return Err(Error::InvalidParameter(
                "load path needs at least one point".into(),
            ));
        }
        Ok(())
    }

    pub fn controls(&self) -> Vec<f64> {
        match *self {
            LoadPath::Uniaxial {
                range,
                count,
                duplicate_identity,
            }
            | LoadPath::Biaxial {
                range,
                count,
                duplicate_identity,
            } => stretch_grid(range, count, duplicate_identity),
            LoadPath::SimpleShear { range, count } => linspace(range[0], range[1], count),
        }
    }

    /// Solves every point in order, continuing from the previous solution.
    pub fn solve(&self, model: &dyn Hyperelastic) -> Result<Vec<LoadPoint>> {
        self.validate()?;
        let mut guess = None;
        let mut points = Vec::new();
        for control in self.controls() {
            let p = match self {
                LoadPath::Uniaxial { .. } => solve_uniaxial_from(model, control, guess)?,
                LoadPath::Biaxial { .. } => solve_biaxial_from(model, control, guess)?,
                LoadPath::SimpleShear { .. } => shear_point(model, control)?,
            };
            guess = p.lateral_stretch;
            points.push(p);
        }
        Ok(points)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LoadPath::Uniaxial { .. } => "uniaxial",
            LoadPath::Biaxial { .. } => "biaxial",
            LoadPath::SimpleShear { .. } => "simple_shear",
        }
    }

    /// Solves the path and packs the points into a dataset.
    pub fn dataset(&self, model: &dyn Hyperelastic) -> Result<Dataset> {
        let points = self.solve(model)?;
        let mut data = Dataset::from_points(&points);
        data.metadata.load = Some(crate::datagen::LoadDescription::Path(*self));
        Ok(data)
    }
}

#[derive(Clone, Copy)]
enum Lateral {
    Uniaxial,
    Biaxial,
}

impl Lateral {
    fn c(self, l1: f64, l2: f64) -> SymTensor3 {
        match self {
            Lateral::Uniaxial => SymTensor3::diag(l1 * l1, l2 * l2, l2 * l2),
            Lateral::Biaxial => SymTensor3::diag(l1 * l1, l1 * l1, l2 * l2),
        }
    }

    fn residual(self, t: &SymTensor3) -> f64 {
        match self {
            Lateral::Uniaxial => t.c22,
            Lateral::Biaxial => t.c33,
        }
    }

    /// Largest lateral stress that must vanish.
    fn lateral_error(self, t: &SymTensor3) -> f64 {
        match self {
            Lateral::Uniaxial => t.c22.abs().max(t.c33.abs()),
            Lateral::Biaxial => t.c33.abs(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Lateral::Uniaxial => "uniaxial",
            Lateral::Biaxial => "biaxial",
        }
    }
}

/// Uniaxial stress in X1: `C = diag(λ1², λ2², λ2²)` with `T22 = T33 = 0`.
pub fn solve_uniaxial(model: &dyn Hyperelastic, lambda1: f64) -> Result<LoadPoint> {
    solve_uniaxial_from(model, lambda1, None)
}

pub fn solve_uniaxial_from(
    model: &dyn Hyperelastic,
    lambda1: f64,
    guess: Option<f64>,
) -> Result<LoadPoint> {
    solve_lateral(model, lambda1, guess, Lateral::Uniaxial)
}

/// Equibiaxial stress: `C = diag(λ1², λ1², λ2²)` with `T33 = 0`.
pub fn solve_biaxial(model: &dyn Hyperelastic, lambda1: f64) -> Result<LoadPoint> {
    solve_biaxial_from(model, lambda1, None)
}

pub fn solve_biaxial_from(
    model: &dyn Hyperelastic,
    lambda1: f64,
    guess: Option<f64>,
) -> Result<LoadPoint> {
    solve_lateral(model, lambda1, guess, Lateral::Biaxial)
}

fn solve_lateral(
    model: &dyn Hyperelastic,
    lambda1: f64,
    guess: Option<f64>,
    kind: Lateral,
) -> Result<LoadPoint> {
    if !(lambda1 > 0.0 && lambda1.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "stretch must be positive, got {lambda1}"
        )));
    }
    let diverged = |reason: String| Error::NewtonDivergence {
        control: lambda1,
        reason,
    };
    let eval = |l2: f64| -> Result<(f64, SymTensor3)> {
        let t = model.stress(&kind.c(lambda1, l2))?;
        Ok((kind.residual(&t), t))
    };

    let (mut a, mut b) = LATERAL_BRACKET;
    let (mut fa, _) = eval(a)?;
    let (fb, _) = eval(b)?;
    if fa.signum() == fb.signum() {
        return Err(diverged(format!(
            "no sign change of the lateral stress on [{a}, {b}] ({} test)",
            kind.name()
        )));
    }

    let mut x = guess
        .filter(|g| *g > a && *g < b)
        .unwrap_or(if (lambda1 - 1.0).abs() < 0.5 {
            1.0
        } else {
            0.5 * (a + b)
        });
    let mut converged = None;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let (fx, t) = eval(x)?;
        if !fx.is_finite() {
            return Err(diverged("non-finite lateral stress".into()));
        }
        if kind.lateral_error(&t) <= NEWTON_TOLERANCE * t.c11.abs().max(1.0) {
            converged = Some((x, t));
            break;
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let h = 1e-7 * x;
        let slope = (eval(x + h)?.0 - eval(x - h)?.0) / (2.0 * h);
        let newton = x - fx / slope;
        x = if slope.is_finite() && slope != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if b - a <= 4.0 * f64::EPSILON * x {
            let (_, t) = eval(x)?;
            converged = Some((x, t));
            break;
        }
    }
    let (l2, t) = match converged {
        Some(s) => s,
        None => {
            let (_, t) = eval(x)?;
            (x, t)
        }
    };
    let residual = kind.lateral_error(&t);
    if residual > EMIT_TOLERANCE * t.c11.abs().max(1.0) {
        return Err(diverged(format!(
            "lateral stress {residual:.3e} kPa above tolerance after {MAX_NEWTON_ITERATIONS} iterations"
        )));
    }
    Ok(LoadPoint {
        control: lambda1,
        lateral_stretch: Some(l2),
        c: kind.c(lambda1, l2),
        t,
        newton_residual: residual,
    })
}

/// Simple shear `C = [[1, γ, 0], [γ, γ² + 1, 0], [0, 0, 1]]`.
pub fn shear_point(model: &dyn Hyperelastic, gamma: f64) -> Result<LoadPoint> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "shear must be non-negative, got {gamma}"
        )));
    }
    let c = shear_c(gamma);
    Ok(LoadPoint {
        control: gamma,
        lateral_stretch: None,
        c,
        t: model.stress(&c)?,
        newton_residual: 0.0,
    })
}

pub fn shear_c(gamma: f64) -> SymTensor3 {
    SymTensor3::new(1.0, gamma * gamma + 1.0, 1.0, gamma, 0.0, 0.0)
}

/// Adds `offset` kPa to T11 of every tuple.
pub fn apply_offset(data: &Dataset, offset: f64) -> Dataset {
    let mut out = data.clone();
    for s in &mut out.samples {
        s.t.c11 += offset;
    }
    out.metadata
        .perturbations
        .push(Perturbation::Offset { t11: offset });
    out
}

/// Adds i.i.d. normal noise with standard deviation `sigma` kPa to T11.
pub fn apply_noise(data: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise level {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for s in &mut out.samples {
        s.t.c11 += normal.sample(&mut rng);
    }
    out.metadata
        .perturbations
        .push(Perturbation::Noise { sigma, seed });
    Ok(out)
}

impl Dataset {
    pub fn from_points(points: &[LoadPoint]) -> Self {
        Dataset::new(points.iter().map(|p| Sample { c: p.c, t: p.t }).collect())
    }
}
