//! Command-line interface: experiment configuration and the `gen-data`,
//! `calibrate`, `evaluate`, `verify` and `sweep` commands.
//!
//! Every command reads one JSON [`ExperimentConfig`]; `--seed` and `--out`
//! override its scalar fields. All output files carry the resolved
//! configuration and the crate version and contain no timestamps, so equal
//! configurations produce byte-identical files.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analytic::{NeoHookeParams, ReferenceModel};
use crate::calibrate::{self, calibrate, calibrate_all, CalibrationConfig, RestartSummary};
use crate::constitutive::Hyperelastic;
use crate::datagen::{
    filter_by_invariants, read_csv, sample_multiaxial, split, write_csv, Dataset, LoadDescription,
    Perturbation, SplitDataset,
};
use crate::error::{Error, Result};
use crate::invariants::MaterialSymmetry;
use crate::loadcases::{apply_noise, apply_offset, LoadPath};
use crate::pann::{ModelVariant, TrainedModel};
use crate::tensor3::SymTensor3;
use crate::verify::{
    gradient_audit, growth_divergence, midpoint_convexity_probe, nonneg_scan_iso,
    nonneg_scan_transiso, relative_error_trained, variant_ladder_study, write_epsilon_csv,
    ConvexityProbe, ErrorStats, GradientAudit, GrowthReport, IsoScanConfig, NonNegReport,
    StudyConfig, TransIsoScanConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_CALIBRATION: u8 = 4;
pub const EXIT_VIOLATION: u8 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "pann",
    version,
    about = "Physics-augmented neural network hyperelastic models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration (JSON); defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the global seed of the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Overrides the output directory of the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset from the reference model.
    GenData,
    /// Calibrate the configured model variant to a dataset.
    Calibrate {
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
    },
    /// Evaluate a calibrated model on a dataset and on the configured load paths.
    Evaluate {
        #[arg(long, value_name = "JSON")]
        model: PathBuf,
        #[arg(long, value_name = "CSV")]
        data: Option<PathBuf>,
    },
    /// Run the gradient audit and non-negativity scans on a calibrated model.
    Verify {
        #[arg(long, value_name = "JSON")]
        model: PathBuf,
    },
    /// Run the variant-ladder study.
    Sweep {
        /// Dataset to use instead of generating one from the configuration.
        #[arg(long, value_name = "CSV")]
        data: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub symmetry: MaterialSymmetry,
    pub variant: ModelVariant,
    pub hidden_layers: Vec<usize>,
    pub reference: ReferenceModel,
    pub data: LoadDescription,
    /// Relative tolerance of the invariant filter applied after generation.
    pub filter_eta: Option<f64>,
    /// Applied in order after filtering.
    pub perturbations: Vec<Perturbation>,
    /// Calibration share of a random split; `null` calibrates on all tuples.
    pub split_fraction: Option<f64>,
    /// Its `seed` is replaced by the global seed.
    pub calibration: CalibrationConfig,
    /// Load paths for `evaluate`, solved with the reference model.
    pub evaluation: Vec<LoadPath>,
    pub verify: VerifyConfig,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            symmetry: MaterialSymmetry::Isotropic,
            variant: ModelVariant::Pann,
            hidden_layers: vec![4],
            reference: ReferenceModel::NeoHooke(NeoHookeParams::default()),
            data: LoadDescription::Path(LoadPath::uniaxial([0.8, 2.0], 30)),
            filter_eta: None,
            perturbations: Vec::new(),
            split_fraction: None,
            calibration: CalibrationConfig::default(),
            evaluation: vec![LoadPath::uniaxial([0.5, 4.0], 100)],
            verify: VerifyConfig::default(),
            sweep: SweepConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub audit_states: usize,
    pub audit_tolerance: f64,
    pub iso: IsoScanConfig,
    /// Its `seed` is replaced by the global seed.
    pub transiso: TransIsoScanConfig,
    pub convexity_pairs: usize,
    pub growth_range: [f64; 2],
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            audit_states: 100,
            audit_tolerance: 1e-4,
            iso: IsoScanConfig::default(),
            transiso: TransIsoScanConfig::default(),
            convexity_pairs: 1000,
            growth_range: [1e-3, 1e3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub runs: usize,
    pub variants: Vec<ModelVariant>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            runs: 20,
            variants: ModelVariant::LADDER.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Applies flag overrides and propagates the global seed.
    pub fn resolve(mut self, args: &GlobalArgs) -> Self {
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(out) = &args.out {
            self.output_dir = out.clone();
        }
        self.calibration.seed = self.seed;
        self.verify.transiso.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.reference.build()?;
        if model.symmetry() != self.symmetry {
            return Err(Error::InvalidParameter(format!(
                "reference model {} does not have the configured {} symmetry",
                self.reference.name(),
                self.symmetry.name()
            )));
        }
        if let Some(f) = self.split_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "split fraction must lie in (0, 1), got {f}"
                )));
            }
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::InvalidParameter(
                "hidden layers must be non-empty with positive widths".into(),
            ));
        }
        self.calibration.validate()?;
        if self.sweep.runs == 0 {
            return Err(Error::InvalidParameter(
                "sweep needs at least one run".into(),
            ));
        }
        Ok(())
    }
}

/// Tool, version, command and resolved configuration of an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
}

impl Provenance {
    fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: "pann".into(),
            version: VERSION.into(),
            command: command.into(),
            config: config.clone(),
        }
    }
}

/// Calibrated model as written by `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub provenance: Provenance,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub provenance: Provenance,
    pub variant: ModelVariant,
    pub calibration_tuples: usize,
    pub test_tuples: usize,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    /// `‖T(C = 1)‖` of the calibrated model, kPa.
    pub identity_stress_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub tuples: usize,
    pub mse: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub load: LoadPath,
    pub file: String,
    pub errors: ErrorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub provenance: Provenance,
    pub variant: ModelVariant,
    pub data: Option<ErrorSummary>,
    pub data_file: Option<String>,
    pub curves: Vec<CurveSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub provenance: Provenance,
    pub variant: ModelVariant,
    pub gradient_audit: GradientAudit,
    pub audit_passed: bool,
    pub nonneg: NonNegReport,
    pub convexity: Option<ConvexityProbe>,
    pub growth: Option<GrowthReport>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepVariantSummary {
    pub variant: ModelVariant,
    pub file: String,
    pub epsilon: ErrorStats,
    pub train_mse: Vec<f64>,
    pub test_mse: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub data_size: usize,
    pub variants: Vec<SweepVariantSummary>,
    /// Median ε of variant (iv) over that of variant (i), when both ran.
    pub median_ratio_iv_over_i: Option<f64>,
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub violation: bool,
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::NonFiniteLoss { .. } => EXIT_CALIBRATION,
        Error::StudyRun { source, .. } => exit_code(source),
        _ => EXIT_CONFIG,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.violation {
                eprintln!("verification found violations");
                EXIT_VIOLATION
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let config = match &cli.global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    }
    .resolve(&cli.global);
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
        match &cli.command {
            Command::GenData => cmd_gen_data(&config),
            Command::Calibrate { data } => cmd_calibrate(&config, data),
            Command::Evaluate { model, data } => cmd_evaluate(&config, model, data.as_deref()),
            Command::Verify { model } => cmd_verify(&config, model),
            Command::Sweep { data } => cmd_sweep(&config, data.as_deref()),
        }
    })
}

/// Reference data as described by the configuration: load path or
/// multiaxial sampling, then the invariant filter, then perturbations.
pub fn generate_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let model = config.reference.build()?;
    let mut data = match &config.data {
        LoadDescription::Path(path) => path.dataset(model.as_ref())?,
        LoadDescription::Multiaxial(spec) => sample_multiaxial(model.as_ref(), spec)?,
    };
    data = data.with_source(config.reference);
    if let Some(eta) = config.filter_eta {
        data = filter_by_invariants(&data, eta, &config.symmetry)?;
    }
    for p in &config.perturbations {
        data = match *p {
            Perturbation::Offset { t11 } => apply_offset(&data, t11),
            Perturbation::Noise { sigma, seed } => apply_noise(&data, sigma, seed)?,
        };
    }
    Ok(data)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn provenance_value(command: &str, config: &ExperimentConfig) -> Result<serde_json::Value> {
    serde_json::to_value(Provenance::new(command, config)).map_err(|e| Error::Format(e.to_string()))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let data = read_csv(path)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(data)
}

pub fn cmd_gen_data(config: &ExperimentConfig) -> Result<Outcome> {
    let mut data = generate_dataset(config)?;
    data.metadata.provenance = Some(provenance_value("gen-data", config)?);
    let path = config.output_dir.join("data.csv");
    write_csv(&data, &path)?;
    Ok(Outcome {
        files: vec![path.clone(), crate::datagen::sidecar_path(&path)],
        violation: false,
    })
}

pub fn cmd_calibrate(config: &ExperimentConfig, data_path: &Path) -> Result<Outcome> {
    let data = load_dataset(data_path)?;
    let hidden = config.hidden_layers.clone();
    let res = match config.split_fraction {
        Some(f) => {
            let parts: SplitDataset = split(&data, f, config.seed)?;
            calibrate(
                config.variant,
                config.symmetry,
                hidden,
                &parts,
                &config.calibration,
            )?
        }
        None => calibrate_all(
            config.variant,
            config.symmetry,
            hidden,
            &data,
            &config.calibration,
        )?,
    };
    let calibration_tuples = match config.split_fraction {
        Some(f) => split(&data, f, config.seed)?.calibration.len(),
        None => data.len(),
    };
    let identity_stress_norm = res.model.stress(&SymTensor3::identity())?.norm();
    let provenance = Provenance::new("calibrate", config);
    let model_path = config.output_dir.join("model.json");
    write_json(
        &model_path,
        &ModelFile {
            provenance: provenance.clone(),
            model: res.model.clone(),
        },
    )?;
    let report_path = config.output_dir.join("calibration.json");
    write_json(
        &report_path,
        &CalibrationReport {
            provenance,
            variant: config.variant,
            calibration_tuples,
            test_tuples: data.len() - calibration_tuples,
            train_mse: res.train_mse,
            test_mse: res.test_mse,
            best_restart: res.best_restart,
            restarts: res.restarts,
            identity_stress_norm,
        },
    )?;
    Ok(Outcome {
        files: vec![model_path, report_path],
        violation: false,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_fail(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

const CURVE_HEADER: [&str; 21] = [
    "control",
    "lateral_stretch",
    "C11",
    "C22",
    "C33",
    "C12",
    "C13",
    "C23",
    "T11",
    "T22",
    "T33",
    "T12",
    "T13",
    "T23",
    "ref_T11",
    "ref_T22",
    "ref_T33",
    "ref_T12",
    "ref_T13",
    "ref_T23",
    "psi",
];

/// Writes one row per state: control value, state, model stress, reference stress, energy.
fn write_curve(
    path: &Path,
    model: &TrainedModel,
    rows: &[(f64, Option<f64>, SymTensor3, SymTensor3)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_fail(path, e))?;
    w.write_record(CURVE_HEADER)
        .map_err(|e| csv_fail(path, e))?;
    for (control, lateral, c, t_ref) in rows {
        let t = model.stress(c)?;
        let psi = match model.as_hyperelastic() {
            Some(m) => fmt(m.energy(c)?),
            None => String::new(),
        };
        let mut rec = vec![fmt(*control), lateral.map(fmt).unwrap_or_default()];
        rec.extend(c.to_array().map(fmt));
        rec.extend(t.to_array().map(fmt));
        rec.extend(t_ref.to_array().map(fmt));
        rec.push(psi);
        w.write_record(&rec).map_err(|e| csv_fail(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn error_summary(model: &TrainedModel, data: &Dataset) -> Result<ErrorSummary> {
    Ok(ErrorSummary {
        tuples: data.len(),
        mse: calibrate::loss(model, data)?,
        epsilon: relative_error_trained(model, data)?,
    })
}

pub fn cmd_evaluate(
    config: &ExperimentConfig,
    model_path: &Path,
    data_path: Option<&Path>,
) -> Result<Outcome> {
    let model = ModelFile::load(model_path)?.model;
    let mut files = Vec::new();
    let (data, data_file) = match data_path {
        Some(p) => {
            let data = load_dataset(p)?;
            let path = config.output_dir.join("points.csv");
            let rows: Vec<_> = data
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| (i as f64, None, s.c, s.t))
                .collect();
            write_curve(&path, &model, &rows)?;
            files.push(path);
            (
                Some(error_summary(&model, &data)?),
                Some("points.csv".to_string()),
            )
        }
        None => (None, None),
    };

    let reference = config.reference.build()?;
    let mut curves = Vec::new();
    for (k, load) in config.evaluation.iter().enumerate() {
        let points = load.solve(reference.as_ref())?;
        let name = format!("curve_{k}_{}.csv", load.name());
        let path = config.output_dir.join(&name);
        let rows: Vec<_> = points
            .iter()
            .map(|p| (p.control, p.lateral_stretch, p.c, p.t))
            .collect();
        write_curve(&path, &model, &rows)?;
        files.push(path);
        curves.push(CurveSummary {
            load: *load,
            file: name,
            errors: error_summary(&model, &Dataset::from_points(&points))?,
        });
    }

    let report_path = config.output_dir.join("evaluation.json");
    write_json(
        &report_path,
        &EvaluationReport {
            provenance: Provenance::new("evaluate", config),
            variant: model.variant(),
            data,
            data_file,
            curves,
        },
    )?;
    files.push(report_path);
    Ok(Outcome {
        files,
        violation: false,
    })
}

pub fn cmd_verify(config: &ExperimentConfig, model_path: &Path) -> Result<Outcome> {
    let file = ModelFile::load(model_path)?;
    let TrainedModel::Pann(model) = &file.model else {
        return Err(Error::InvalidParameter(
            "the F → P baseline has no energy to verify".into(),
        ));
    };
    let v = &config.verify;
    let audit = gradient_audit(model, v.audit_states, config.seed)?;
    let audit_passed = audit.passed(v.audit_tolerance);
    let nonneg = match model.symmetry() {
        MaterialSymmetry::Isotropic => nonneg_scan_iso(model, &v.iso)?,
        MaterialSymmetry::TransverselyIsotropic { .. } => nonneg_scan_transiso(model, &v.transiso)?,
    };
    let convexity = if model.variant().constrained() {
        Some(midpoint_convexity_probe(
            model.network(),
            v.convexity_pairs,
            config.seed,
        )?)
    } else {
        None
    };
    let growth = if model.variant().has_growth() {
        Some(growth_divergence(model, v.growth_range, 200)?)
    } else {
        None
    };
    let passed = audit_passed
        && nonneg.passed()
        && convexity.as_ref().map_or(true, ConvexityProbe::passed)
        && growth.as_ref().map_or(true, |g| g.holds);
    let path = config.output_dir.join("verify.json");
    write_json(
        &path,
        &VerifyReport {
            provenance: Provenance::new("verify", config),
            variant: model.variant(),
            gradient_audit: audit,
            audit_passed,
            nonneg,
            convexity,
            growth,
            passed,
        },
    )?;
    Ok(Outcome {
        files: vec![path],
        violation: !passed,
    })
}

pub fn cmd_sweep(config: &ExperimentConfig, data_path: Option<&Path>) -> Result<Outcome> {
    let data = match data_path {
        Some(p) => load_dataset(p)?,
        None => generate_dataset(config)?,
    };
    let study = StudyConfig {
        runs: config.sweep.runs,
        variants: config.sweep.variants.clone(),
        hidden_layers: config.hidden_layers.clone(),
        split_fraction: config.split_fraction.unwrap_or(0.7),
        calibration: config.calibration.clone(),
        seed: config.seed,
    };
    let report = variant_ladder_study(config.symmetry, &data, &study)?;
    let mut files = Vec::new();
    let mut variants = Vec::new();
    for v in report.variants {
        let name = format!("epsilon_{}.csv", v.variant.label());
        let path = config.output_dir.join(&name);
        write_epsilon_csv(&path, &v.epsilon.values)?;
        files.push(path);
        variants.push(SweepVariantSummary {
            variant: v.variant,
            file: name,
            epsilon: v.epsilon,
            train_mse: v.train_mse,
            test_mse: v.test_mse,
        });
    }
    let median = |variant| {
        variants
            .iter()
            .find(|s: &&SweepVariantSummary| s.variant == variant)
            .map(|s| s.epsilon.median)
    };
    let ratio = match (median(ModelVariant::Pann), median(ModelVariant::Basic)) {
        (Some(iv), Some(i)) if i > 0.0 => Some(iv / i),
        _ => None,
    };
    let path = config.output_dir.join("sweep.json");
    write_json(
        &path,
        &SweepReport {
            provenance: Provenance::new("sweep", config),
            data_size: report.data_size,
            variants,
            median_ratio_iv_over_i: ratio,
        },
    )?;
    files.push(path);
    Ok(Outcome {
        files,
        violation: false,
    })
}
