//! Datasets of `(C, T)` tuples: multiaxial sampling, invariant-space
//! filtering, calibration/test splits and CSV storage.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::ReferenceModel;
use crate::constitutive::Hyperelastic;
use crate::error::{Error, Result};
use crate::invariants::{compute_invariants, is_admissible_tensor, MaterialSymmetry};
use crate::loadcases::LoadPath;
use crate::tensor3::{Rotation3, SymTensor3, Tensor3};

pub const CSV_HEADER: [&str; 12] = [
    "C11", "C22", "C33", "C12", "C13", "C23", "T11", "T22", "T33", "T12", "T13", "T23",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub c: SymTensor3,
    /// Second Piola–Kirchhoff stress, kPa.
    pub t: SymTensor3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    Offset { t11: f64 },
    Noise { sigma: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadDescription {
    Path(LoadPath),
    Multiaxial(MultiaxialSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub source: Option<ReferenceModel>,
    pub load: Option<LoadDescription>,
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
    /// Relative tolerance of the invariant filter, if applied.
    pub filter_eta: Option<f64>,
    pub units: String,
    pub note: Option<String>,
    /// Tool, version and configuration that produced the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl Default for DatasetMetadata {
    fn default() -> Self {
        Self {
            source: None,
            load: None,
            perturbations: Vec::new(),
            filter_eta: None,
            units: "C dimensionless; T in kPa".into(),
            note: None,
            provenance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub metadata: DatasetMetadata,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self {
            samples,
            metadata: DatasetMetadata::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_source(mut self, source: ReferenceModel) -> Self {
        self.metadata.source = Some(source);
        self
    }

    /// Concatenates tuples; metadata of `self` is kept.
    pub fn extend(&mut self, other: &Dataset) {
        self.samples.extend_from_slice(&other.samples);
    }
}

/// Random multiaxial deformation states.
///
/// `C = Rᵀ Sᵀ diag(λ²) S R` with stretches log-uniform in `stretch_range`,
/// `S = 1 + γ e1⊗e2` with γ uniform in `shear_range`, and a uniformly
/// random rotation R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiaxialSpec {
    pub count: usize,
    #[serde(default = "default_stretch_range")]
    pub stretch_range: [f64; 2],
    #[serde(default = "default_shear_range")]
    pub shear_range: [f64; 2],
    pub seed: u64,
}

fn default_stretch_range() -> [f64; 2] {
    [0.7, 1.6]
}

fn default_shear_range() -> [f64; 2] {
    [0.0, 0.3]
}

impl MultiaxialSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            stretch_range: default_stretch_range(),
            shear_range: default_shear_range(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.stretch_range;
        let [g0, g1] = self.shear_range;
        if self.count == 0 {
            return Err(Error::InvalidParameter(
                "sample count must be positive".into(),
            ));
        }
        if !(a > 0.0 && b >= a && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid stretch range {:?}",
                self.stretch_range
            )));
        }
        if !(g0.is_finite() && g1 >= g0 && g1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid shear range {:?}",
                self.shear_range
            )));
        }
        Ok(())
    }

    /// Deformation states only, without stresses.
    pub fn deformations(&self) -> Result<Vec<SymTensor3>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (ln_a, ln_b) = (self.stretch_range[0].ln(), self.stretch_range[1].ln());
        let mut out = Vec::with_capacity(self.count);
        while out.len() < self.count {
            let l: [f64; 3] = std::array::from_fn(|_| uniform(&mut rng, ln_a, ln_b).exp());
            let gamma = uniform(&mut rng, self.shear_range[0], self.shear_range[1]);
            let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let r = Rotation3::from_quaternion(q);
            let mut s = Tensor3::identity();
            s.0[0][1] = gamma;
            let f = Tensor3([[l[0], 0.0, 0.0], [0.0, l[1], 0.0], [0.0, 0.0, l[2]]])
                * s
                * *r.as_tensor();
            let c = f.right_cauchy_green();
            if is_admissible_tensor(&c) {
                out.push(c);
            }
        }
        Ok(out)
    }
}

fn uniform<R: Rng>(rng: &mut R, a: f64, b: f64) -> f64 {
    if b > a {
        rng.gen_range(a..b)
    } else {
        a
    }
}

/// Evaluates `model` on random multiaxial states; stresses are computed in parallel.
pub fn sample_multiaxial(model: &dyn Hyperelastic, spec: &MultiaxialSpec) -> Result<Dataset> {
    let cs = spec.deformations()?;
    let samples = cs
        .par_iter()
        .map(|c| {
            Ok(Sample {
                c: *c,
                t: model.stress(c)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Dataset::new(samples);
    data.metadata.load = Some(LoadDescription::Multiaxial(*spec));
    data.metadata.note =
        Some("random rotated-stretch sampling in place of finite element quadrature data".into());
    Ok(data)
}

/// Greedy thinning in invariant space.
///
/// A tuple is kept iff, against every tuple kept so far, at least one
/// invariant (I1, I2, I3 and, for transverse isotropy, I4, I5) differs by
/// more than `eta` times that invariant's range over the tuples seen so far.
pub fn filter_by_invariants(data: &Dataset, eta: f64, sym: &MaterialSymmetry) -> Result<Dataset> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "filter tolerance must lie in (0, 1), got {eta}"
        )));
    }
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut samples = Vec::new();
    let mut lo: Vec<f64> = Vec::new();
    let mut hi: Vec<f64> = Vec::new();
    for s in &data.samples {
        let inv = compute_invariants(&s.c, sym)?;
        let mut x = inv.inputs();
        x.pop(); // I1* is a function of I3
        if lo.is_empty() {
            lo = x.clone();
            hi = x.clone();
        }
        for (k, v) in x.iter().enumerate() {
            lo[k] = lo[k].min(*v);
            hi[k] = hi[k].max(*v);
        }
        let distinct = kept.iter().all(|y| {
            x.iter()
                .zip(y)
                .enumerate()
                .any(|(k, (a, b))| (a - b).abs() > eta * (hi[k] - lo[k]))
        });
        if distinct {
            kept.push(x);
            samples.push(*s);
        }
    }
    let mut metadata = data.metadata.clone();
    metadata.filter_eta = Some(eta);
    Ok(Dataset { samples, metadata })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub calibration: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// Random split: the first `⌈fraction·n⌉` shuffled tuples calibrate, the
/// rest test. Both parts keep at least one tuple.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<SplitDataset> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::DatasetTooSmall(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_cal = ((fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let pick = |ids: &[usize]| Dataset {
        samples: ids.iter().map(|&i| data.samples[i]).collect(),
        metadata: data.metadata.clone(),
    };
    Ok(SplitDataset {
        calibration: pick(&idx[..n_cal]),
        test: pick(&idx[n_cal..]),
        seed,
    })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes the CSV table and the JSON metadata sidecar.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for s in &data.samples {
        let row: Vec<String> =
            s.c.to_array()
                .iter()
                .chain(s.t.to_array().iter())
                .map(|v| format!("{v:.16e}"))
                .collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta =
        serde_json::to_string_pretty(&data.metadata).map_err(|e| Error::Format(e.to_string()))?;
    let side = sidecar_path(path);
    fs::write(&side, meta + "\n").map_err(|e| Error::io(side, e))
}

/// Reads a dataset; a missing sidecar yields default metadata.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "{}: expected header {}, found {}",
            path.display(),
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let mut v = [0.0; 12];
        for (k, cell) in rec.iter().enumerate() {
            if k >= 12 {
                return Err(Error::Format(format!("row {}: too many columns", line + 2)));
            }
            let x: f64 = cell.trim().parse().map_err(|_| {
                Error::Format(format!("row {}: non-numeric cell {cell:?}", line + 2))
            })?;
            if !x.is_finite() {
                return Err(Error::Format(format!("row {}: non-finite value", line + 2)));
            }
            v[k] = x;
        }
        let c = SymTensor3::from_array([v[0], v[1], v[2], v[3], v[4], v[5]]);
        let t = SymTensor3::from_array([v[6], v[7], v[8], v[9], v[10], v[11]]);
        samples.push(Sample { c, t });
    }
    let side = sidecar_path(path);
    let metadata = match fs::read_to_string(&side) {
        Ok(text) => serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", side.display())))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => DatasetMetadata::default(),
        Err(e) => return Err(Error::io(side, e)),
    };
    Ok(Dataset { samples, metadata })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}
