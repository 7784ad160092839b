//! Declarative experiments: Monte-Carlo MSE studies, single reconstructions, design and
//! certificate reports, and result persistence.

use crate::certificates::{
    pre_certificate, regularized_certificate, theta_admissibility, AdmissibilityReport, DEFAULT_GRID, DEFAULT_TOL_INTERP,
};
use crate::design::{design_criterion, fisher_info, theory_constants, whitened_condition, DesignReport, TheoryConstants};
use crate::error::{Result, SikError};
use crate::forward::{apply_k, derive_seed, sample_noise, Observation, SensorConfig};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::measures::{params_from_measure, weighted_norm, Atom, BoxDomain, ParamVec, SparseMeasure, Weighting};
use crate::metrics::{hk_distance, hk_distance_sq, HkSolveConfig};
use crate::solvers::{gauss_newton_from_measure, linearized_estimate, solve_blasso_pdap, GnConfig, PdapConfig, SolveReport, SolveStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CSV_HEADER: [&str; 10] = [
    "experiment",
    "sensor_set",
    "beta0",
    "p",
    "estimator",
    "mean_hk2",
    "stderr",
    "expected_mse",
    "samples",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorToggles {
    pub pdap: bool,
    pub gauss_newton: bool,
    pub linearized: bool,
}

impl Default for EstimatorToggles {
    fn default() -> Self {
        Self {
            pdap: true,
            gauss_newton: true,
            linearized: true,
        }
    }
}

/// A named sensor array: explicit points, or `uniform` points per axis on the observation
/// domain with endpoints included. Variances default to identical sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSetSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0_sq: Option<Vec<f64>>,
}

fn default_samples() -> usize {
    1000
}

fn default_grid() -> Vec<usize> {
    vec![DEFAULT_GRID]
}

fn default_bounds_grid() -> Vec<usize> {
    vec![256]
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub kernel: KernelFamily,
    pub obs_domain: BoxDomain,
    pub src_domain: BoxDomain,
    pub truth: Vec<Atom>,
    pub sensor_sets: Vec<SensorSetSpec>,
    pub beta0: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimators: EstimatorToggles,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub pdap: PdapConfig,
    #[serde(default)]
    pub gauss_newton: GnConfig,
    #[serde(default)]
    pub hk: HkSolveConfig,
    /// Grid for certificate curves and θ-admissibility (per axis).
    #[serde(default = "default_grid")]
    pub certificate_grid: Vec<usize>,
    /// Grid for the kernel derivative bounds entering the theory constants.
    #[serde(default = "default_bounds_grid")]
    pub bounds_grid: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SikError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SikError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(SikError::Config("samples must be at least 1".into()));
        }
        if self.sensor_sets.is_empty() || self.beta0.is_empty() || self.p.is_empty() {
            return Err(SikError::Config("sensor_sets, beta0 and p must be nonempty".into()));
        }
        if self.beta0.iter().chain(&self.p).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(SikError::Config("beta0 and p values must be positive".into()));
        }
        for (i, s) in self.sensor_sets.iter().enumerate() {
            if self.sensor_sets[..i].iter().any(|o| o.name == s.name) {
                return Err(SikError::Config(format!("duplicate sensor set name {:?}", s.name)));
            }
            if s.points.is_some() == s.uniform.is_some() {
                return Err(SikError::Config(format!(
                    "sensor set {:?} needs exactly one of points or uniform",
                    s.name
                )));
            }
        }
        self.kernel_spec()?;
        if self.truth.iter().any(|a| a.weight == 0.0) {
            return Err(SikError::Config("ground-truth weights must be nonzero".into()));
        }
        let truth = self.truth_measure()?;
        if truth.len() != self.truth.len() {
            return Err(SikError::Config("ground-truth atoms must be distinct".into()));
        }
        for s in &self.sensor_sets {
            self.sensors(&s.name, self.p[0])?;
        }
        self.pdap.validate()?;
        self.gauss_newton.validate()?;
        self.hk.validate()?;
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel.clone(), self.obs_domain.clone(), self.src_domain.clone()).map_err(|e| SikError::Config(e.to_string()))
    }

    pub fn truth_measure(&self) -> Result<SparseMeasure> {
        SparseMeasure::new(self.truth.clone(), self.src_domain.clone()).map_err(|e| SikError::Config(e.to_string()))
    }

    pub fn set_names(&self) -> Vec<String> {
        self.sensor_sets.iter().map(|s| s.name.clone()).collect()
    }

    /// Sensor configuration of a named set at total precision p.
    pub fn sensors(&self, name: &str, p: f64) -> Result<SensorConfig> {
        let set = self
            .sensor_sets
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| SikError::Config(format!("unknown sensor set {name:?}")))?;
        let x = match (&set.points, set.uniform) {
            (Some(pts), _) => pts.clone(),
            (None, Some(n)) => self.obs_domain.grid(&vec![n; self.obs_domain.dim()]),
            (None, None) => return Err(SikError::Config(format!("sensor set {name:?} has no points"))),
        };
        let sensors = match &set.sigma0_sq {
            Some(v) => SensorConfig::new(x, v.clone(), p),
            None => SensorConfig::uniform_weights(x, p),
        }
        .map_err(|e| SikError::Config(format!("sensor set {name:?}: {e}")))?;
        sensors.check_against(&self.kernel_spec()?)?;
        Ok(sensors)
    }
}

/// Runs `f` on a dedicated thread pool when a thread count is given.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SikError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSample {
    pub hk2: f64,
    pub atoms: usize,
    pub status: SolveStatus,
}

/// Everything computed for one noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub seed: u64,
    pub pdap: Option<EstimatorSample>,
    pub gauss_newton: Option<EstimatorSample>,
    /// ‖δm̂‖²_{W†} of the linearized estimate.
    pub linearized: Option<f64>,
    /// d_HK(μ̂, μ̄) when both estimators ran.
    pub pdap_gn_hk: Option<f64>,
    pub errors: Vec<String>,
}

/// Fixed data of one (sensor set, β0, p) cell of a study.
pub struct StudyCell {
    pub spec: KernelSpec,
    pub sensors: SensorConfig,
    pub truth: SparseMeasure,
    pub m_truth: ParamVec,
    pub beta: f64,
    pub master_seed: u64,
    pub toggles: EstimatorToggles,
    pub pdap: PdapConfig,
    pub gn: GnConfig,
    pub hk: HkSolveConfig,
}

impl StudyCell {
    pub fn new(cfg: &ExperimentConfig, set: &str, beta0: f64, p: f64) -> Result<Self> {
        let truth = cfg.truth_measure()?;
        Ok(Self {
            spec: cfg.kernel_spec()?,
            sensors: cfg.sensors(set, p)?,
            m_truth: params_from_measure(&truth),
            truth,
            beta: beta0 / p.sqrt(),
            master_seed: cfg.seed,
            toggles: cfg.estimators,
            pdap: cfg.pdap.clone(),
            gn: cfg.gauss_newton.clone(),
            hk: cfg.hk.clone(),
        })
    }

    /// Sample `index` uses the noise seed derive_seed(master, index).
    pub fn run_sample(&self, index: usize) -> SampleOutcome {
        let seed = derive_seed(self.master_seed, index as u64);
        let eps = sample_noise(&self.sensors, seed);
        let clean = apply_k(&self.spec, &self.sensors, &self.truth);
        let z = Observation {
            z: (clean + &eps).iter().copied().collect(),
            epsilon: Some(eps.iter().copied().collect()),
            seed: Some(seed),
        };
        let mut out = SampleOutcome {
            index,
            seed,
            pdap: None,
            gauss_newton: None,
            linearized: None,
            pdap_gn_hk: None,
            errors: Vec::new(),
        };
        let mut bar = None;
        if self.toggles.pdap {
            match solve_blasso_pdap(&self.spec, &self.sensors, &z, self.beta, &self.pdap)
                .and_then(|(mu, rep)| Ok((hk_distance_sq(&self.truth, &mu, &self.hk)?, mu, rep)))
            {
                Ok((hk2, mu, rep)) => {
                    out.pdap = Some(EstimatorSample {
                        hk2,
                        atoms: mu.len(),
                        status: rep.status,
                    });
                    bar = Some(mu);
                }
                Err(e) => out.errors.push(format!("pdap: {e}")),
            }
        }
        if self.toggles.gauss_newton {
            match gauss_newton_from_measure(&self.spec, &self.sensors, &z, self.beta, &self.truth, &self.gn)
                .and_then(|(mu, rep)| Ok((hk_distance_sq(&self.truth, &mu, &self.hk)?, mu, rep)))
            {
                Ok((hk2, hat, rep)) => {
                    out.gauss_newton = Some(EstimatorSample {
                        hk2,
                        atoms: hat.len(),
                        status: rep.status,
                    });
                    if let Some(bar) = &bar {
                        match hk_distance(&hat, bar, &self.hk) {
                            Ok(d) => out.pdap_gn_hk = Some(d),
                            Err(e) => out.errors.push(format!("pdap vs gauss_newton: {e}")),
                        }
                    }
                }
                Err(e) => out.errors.push(format!("gauss_newton: {e}")),
            }
        }
        if self.toggles.linearized {
            let r = Weighting::from_params(&self.m_truth).and_then(|w| {
                let dm = linearized_estimate(&self.sensors, &self.spec, &self.m_truth, &eps, self.beta)?;
                Ok(weighted_norm(&dm, &w)?.powi(2))
            });
            match r {
                Ok(v) => out.linearized = Some(v),
                Err(e) => out.errors.push(format!("linearized: {e}")),
            }
        }
        out
    }

    /// Samples 0..count, computed in parallel and returned in index order.
    pub fn run_samples(&self, count: usize) -> Vec<SampleOutcome> {
        (0..count).into_par_iter().map(|i| self.run_sample(i)).collect()
    }
}

/// Aggregated Monte-Carlo result for one estimator in one study cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub sensor_set: String,
    pub beta0: f64,
    pub p: f64,
    pub estimator: String,
    pub mean_hk2: f64,
    pub stderr: f64,
    pub expected_mse: f64,
    pub samples: usize,
    pub seed: u64,
    /// Samples whose solver stopped without converging (their best iterate is included).
    pub failed: usize,
    /// Samples without a value because a computation raised an error.
    pub excluded: usize,
    pub admissible: Option<bool>,
    /// Fraction of included samples with as many atoms as the ground truth.
    pub exact_support_fraction: Option<f64>,
    /// Largest d_HK(μ̂, μ̄) over samples where PDAP recovered the ground-truth atom count.
    pub max_pdap_gn_hk: Option<f64>,
}

/// Mean and standard error (sample standard deviation over √n) in index order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Pre-certificate θ-admissibility of a design; a singular Fisher matrix counts as inadmissible.
pub fn certify_design(spec: &KernelSpec, sensors: &SensorConfig, truth: &SparseMeasure, grid: &[usize]) -> Result<AdmissibilityReport> {
    let m = params_from_measure(truth);
    match pre_certificate(spec, sensors, &m) {
        Ok(eta) => theta_admissibility(&eta, truth, grid, DEFAULT_TOL_INTERP),
        Err(SikError::SingularFisher(c)) => Ok(AdmissibilityReport {
            admissible: false,
            theta_star: None,
            failure: Some(format!("singular Fisher information (whitened condition {c:.3e})")),
            interp_value_residual: f64::NAN,
            interp_gradient_residual: f64::NAN,
            hessian_caps: Vec::new(),
            hessian_margins: Vec::new(),
            global_margin: f64::NAN,
            grid_theta: f64::NAN,
            max_abs_on_grid: f64::NAN,
        }),
        Err(e) => Err(e),
    }
}

/// Monte-Carlo MSE study over every (sensor set, β0, p) cell with the enabled estimators.
pub fn run_mse_study(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let spec = cfg.kernel_spec()?;
    let truth = cfg.truth_measure()?;
    let m = params_from_measure(&truth);
    let n_truth = truth.len();
    let mut records = Vec::new();
    for set in cfg.set_names() {
        let admissible = certify_design(&spec, &cfg.sensors(&set, cfg.p[0])?, &truth, &cfg.certificate_grid)?.admissible;
        for &beta0 in &cfg.beta0 {
            for &p in &cfg.p {
                let cell = StudyCell::new(cfg, &set, beta0, p)?;
                let expected_mse = design_criterion(&spec, &cell.sensors, &m, beta0)?.expected_mse;
                let outcomes = with_threads(cfg.threads, || cell.run_samples(cfg.samples))?;
                let base = ResultRecord {
                    experiment: cfg.experiment.clone(),
                    sensor_set: set.clone(),
                    beta0,
                    p,
                    estimator: String::new(),
                    mean_hk2: f64::NAN,
                    stderr: f64::NAN,
                    expected_mse,
                    samples: 0,
                    seed: cfg.seed,
                    failed: 0,
                    excluded: 0,
                    admissible: Some(admissible),
                    exact_support_fraction: None,
                    max_pdap_gn_hk: None,
                };
                let estimator_record = |name: &str, pick: &dyn Fn(&SampleOutcome) -> Option<EstimatorSample>| {
                    let vals: Vec<EstimatorSample> = outcomes.iter().filter_map(pick).collect();
                    let hk2: Vec<f64> = vals.iter().map(|v| v.hk2).collect();
                    let (mean, se) = mean_stderr(&hk2);
                    let exact = vals.iter().filter(|v| v.atoms == n_truth).count();
                    ResultRecord {
                        estimator: name.into(),
                        mean_hk2: mean,
                        stderr: se,
                        samples: vals.len(),
                        failed: vals.iter().filter(|v| v.status != SolveStatus::Converged).count(),
                        excluded: outcomes.len() - vals.len(),
                        exact_support_fraction: (!vals.is_empty()).then(|| exact as f64 / vals.len() as f64),
                        ..base.clone()
                    }
                };
                if cfg.estimators.pdap {
                    records.push(estimator_record("pdap", &|o| o.pdap));
                }
                if cfg.estimators.gauss_newton {
                    let mut r = estimator_record("gauss_newton", &|o| o.gauss_newton);
                    r.max_pdap_gn_hk = outcomes
                        .iter()
                        .filter(|o| o.pdap.is_some_and(|s| s.atoms == n_truth))
                        .filter_map(|o| o.pdap_gn_hk)
                        .reduce(f64::max);
                    records.push(r);
                }
                if cfg.estimators.linearized {
                    let vals: Vec<f64> = outcomes.iter().filter_map(|o| o.linearized).collect();
                    let (mean, se) = mean_stderr(&vals);
                    records.push(ResultRecord {
                        estimator: "linearized".into(),
                        mean_hk2: mean,
                        stderr: se,
                        samples: vals.len(),
                        excluded: outcomes.len() - vals.len(),
                        ..base.clone()
                    });
                }
            }
        }
    }
    Ok(records)
}

/// Fixed numeric format: 9 significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes `<stem>.csv` with the fixed header and `<stem>.json` with full records.
pub fn emit_results(records: &[ResultRecord], dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.sensor_set.clone(),
            sci(r.beta0),
            sci(r.p),
            r.estimator.clone(),
            sci(r.mean_hk2),
            sci(r.stderr),
            sci(r.expected_mse),
            r.samples.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    let json_path = dir.join(format!("{stem}.json"));
    write_json(&json_path, &records)?;
    Ok((csv_path, json_path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Design report of one (sensor set, β0, p) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRecord {
    pub sensor_set: String,
    pub report: DesignReport,
}

pub fn run_criterion(cfg: &ExperimentConfig) -> Result<Vec<CriterionRecord>> {
    let spec = cfg.kernel_spec()?;
    let m = params_from_measure(&cfg.truth_measure()?);
    let mut out = Vec::new();
    for set in cfg.set_names() {
        for &beta0 in &cfg.beta0 {
            for &p in &cfg.p {
                let report = design_criterion(&spec, &cfg.sensors(&set, p)?, &m, beta0)?;
                out.push(CriterionRecord {
                    sensor_set: set.clone(),
                    report,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_criterion_csv(records: &[CriterionRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "sensor_set",
        "beta0",
        "p",
        "psi",
        "expected_mse",
        "trace_term",
        "bias_term",
        "condition_number",
        "singular",
    ])?;
    for r in records {
        let d = &r.report;
        w.write_record([
            r.sensor_set.clone(),
            sci(d.beta0),
            sci(d.p),
            sci(d.psi),
            sci(d.expected_mse),
            sci(d.trace_term),
            sci(d.bias_term),
            sci(d.condition_number),
            d.singular.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyRecord {
    pub sensor_set: String,
    pub whitened_condition: f64,
    pub report: AdmissibilityReport,
}

pub fn run_certify(cfg: &ExperimentConfig) -> Result<Vec<CertifyRecord>> {
    let spec = cfg.kernel_spec()?;
    let truth = cfg.truth_measure()?;
    let m = params_from_measure(&truth);
    let w = Weighting::from_params(&m)?;
    cfg.set_names()
        .into_iter()
        .map(|set| {
            let sensors = cfg.sensors(&set, cfg.p[0])?;
            let report = certify_design(&spec, &sensors, &truth, &cfg.certificate_grid)?;
            let whitened_condition = whitened_condition(&fisher_info(&spec, &sensors, &m), &w);
            Ok(CertifyRecord {
                sensor_set: set,
                whitened_condition,
                report,
            })
        })
        .collect()
}

pub fn write_certify_csv(records: &[CertifyRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sensor_set", "admissible", "theta_star", "whitened_condition", "failure"])?;
    for r in records {
        w.write_record([
            r.sensor_set.clone(),
            r.report.admissible.to_string(),
            r.report.theta_star.map(sci).unwrap_or_default(),
            sci(r.whitened_condition),
            r.report.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsRecord {
    pub sensor_set: String,
    pub beta0: f64,
    pub p: f64,
    pub constants: Option<TheoryConstants>,
    pub error: Option<String>,
}

/// Theory constants with θ taken from the pre-certificate's admissibility.
pub fn run_constants(cfg: &ExperimentConfig) -> Result<Vec<ConstantsRecord>> {
    let spec = cfg.kernel_spec()?;
    let truth = cfg.truth_measure()?;
    let m = params_from_measure(&truth);
    let mut out = Vec::new();
    for set in cfg.set_names() {
        let adm = certify_design(&spec, &cfg.sensors(&set, cfg.p[0])?, &truth, &cfg.certificate_grid)?;
        for &beta0 in &cfg.beta0 {
            for &p in &cfg.p {
                let sensors = cfg.sensors(&set, p)?;
                let (constants, error) = match adm.theta_star {
                    Some(theta) => match theory_constants(&spec, &sensors, &m, theta, beta0, p, &cfg.bounds_grid) {
                        Ok(c) => (Some(c), None),
                        Err(e) => (None, Some(e.to_string())),
                    },
                    None => (
                        None,
                        Some(adm.failure.clone().unwrap_or_else(|| "pre-certificate not admissible".into())),
                    ),
                };
                out.push(ConstantsRecord {
                    sensor_set: set.clone(),
                    beta0,
                    p,
                    constants,
                    error,
                });
            }
        }
    }
    Ok(out)
}

/// Outputs of a single reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionBundle {
    pub sensor_set: String,
    pub beta0: f64,
    pub p: f64,
    pub beta: f64,
    pub seed: Option<u64>,
    pub observation: Observation,
    pub truth: SparseMeasure,
    pub mu_bar: Option<SparseMeasure>,
    pub pdap_report: Option<SolveReport>,
    pub mu_hat: Option<SparseMeasure>,
    pub gauss_newton_report: Option<SolveReport>,
    pub admissibility: AdmissibilityReport,
    pub errors: Vec<String>,
    /// Rows (y, η̄(y), η_PC(y)) on the certificate grid.
    #[serde(skip)]
    pub certificate_curve: Vec<(Vec<f64>, Option<f64>, Option<f64>)>,
}

/// Reconstructs from synthetic data: noisy under `seed`, exact when `seed` is None.
pub fn run_reconstruction(cfg: &ExperimentConfig, set: &str, beta0: f64, p: f64, seed: Option<u64>) -> Result<ReconstructionBundle> {
    let cell = StudyCell::new(cfg, set, beta0, p)?;
    let observation = match seed {
        Some(s) => Observation::synthesize(&cell.spec, &cell.sensors, &cell.truth, s),
        None => Observation::exact(apply_k(&cell.spec, &cell.sensors, &cell.truth).iter().copied().collect()),
    };
    let admissibility = certify_design(&cell.spec, &cell.sensors, &cell.truth, &cfg.certificate_grid)?;
    let mut errors = Vec::new();
    let (mu_bar, pdap_report) = if cfg.estimators.pdap {
        match solve_blasso_pdap(&cell.spec, &cell.sensors, &observation, cell.beta, &cell.pdap) {
            Ok((mu, rep)) => (Some(mu), Some(rep)),
            Err(e) => {
                errors.push(format!("pdap: {e}"));
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    let (mu_hat, gauss_newton_report) = if cfg.estimators.gauss_newton {
        match gauss_newton_from_measure(&cell.spec, &cell.sensors, &observation, cell.beta, &cell.truth, &cell.gn) {
            Ok((mu, rep)) => (Some(mu), Some(rep)),
            Err(e) => {
                errors.push(format!("gauss_newton: {e}"));
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    let eta_bar = match &mu_bar {
        Some(mu) => Some(regularized_certificate(&cell.spec, &cell.sensors, mu, &observation, cell.beta)?),
        None => None,
    };
    let eta_pc = pre_certificate(&cell.spec, &cell.sensors, &cell.m_truth).ok();
    let grid = crate::certificates::source_grid(&cell.spec, &cfg.certificate_grid)?;
    let certificate_curve = grid
        .into_iter()
        .map(|y| {
            let b = eta_bar.as_ref().map(|e| e.value(&y));
            let c = eta_pc.as_ref().map(|e| e.value(&y));
            (y, b, c)
        })
        .collect();
    Ok(ReconstructionBundle {
        sensor_set: set.into(),
        beta0,
        p,
        beta: cell.beta,
        seed,
        observation,
        truth: cell.truth,
        mu_bar,
        pdap_report,
        mu_hat,
        gauss_newton_report,
        admissibility,
        errors,
        certificate_curve,
    })
}

/// Writes `reconstruction.json`, `certificate.csv` and `atoms.csv` into `dir`.
pub fn write_reconstruction(bundle: &ReconstructionBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("reconstruction.json"), bundle)?;
    let d = bundle.truth.dim();
    let axes: Vec<String> = (1..=d).map(|a| format!("y{a}")).collect();
    let mut w = csv::Writer::from_path(dir.join("certificate.csv"))?;
    w.write_record(axes.iter().cloned().chain(["eta_bar".into(), "eta_pc".into()]))?;
    for (y, b, c) in &bundle.certificate_curve {
        let row: Vec<String> = y
            .iter()
            .map(|v| sci(*v))
            .chain([b.map(sci).unwrap_or_default(), c.map(sci).unwrap_or_default()])
            .collect();
        w.write_record(row)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("atoms.csv"))?;
    w.write_record(["measure".to_string(), "weight".to_string()].into_iter().chain(axes))?;
    let sets = [
        ("truth", Some(&bundle.truth)),
        ("pdap", bundle.mu_bar.as_ref()),
        ("gauss_newton", bundle.mu_hat.as_ref()),
    ];
    for (name, mu) in sets {
        for a in mu.map(|m| m.atoms()).unwrap_or_default() {
            let row: Vec<String> = [name.to_string(), sci(a.weight)]
                .into_iter()
                .chain(a.position.iter().map(|v| sci(*v)))
                .collect();
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_config() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "experiment": "gaussian_9_sensors",
                "kernel": {"family": "gaussian", "sigma": 0.2, "normalized": true},
                "obs_domain": {"lower": [-1.0], "upper": [1.0]},
                "src_domain": {"lower": [-1.0], "upper": [1.0]},
                "truth": [{"weight": 0.4, "position": [-0.7]}, {"weight": 0.3, "position": [-0.3]}, {"weight": -0.2, "position": [0.3]}],
                "sensor_sets": [{"name": "uniform9", "uniform": 9}, {"name": "uniform6", "uniform": 6}],
                "beta0": [2.0],
                "p": [1e4],
                "samples": 8,
                "seed": 42
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let cfg = reference_config();
        assert_eq!(cfg.sensors("uniform9", 1e4).unwrap().n_obs(), 9);
        assert!(cfg.sensors("missing", 1e4).is_err());
        let mut bad = cfg.clone();
        bad.samples = 0;
        assert!(bad.validate().unwrap_err().is_config());
        let mut bad = cfg.clone();
        bad.sensor_sets.push(bad.sensor_sets[0].clone());
        assert!(bad.validate().is_err());
        assert!(ExperimentConfig::from_json("{\"experiment\": 1}").unwrap_err().is_config());
    }

    #[test]
    fn mean_stderr_matches_definition() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(mean_stderr(&[]).0.is_nan());
    }

    #[test]
    fn study_is_deterministic_and_order_independent() {
        let cfg = reference_config();
        let cell = StudyCell::new(&cfg, "uniform9", 2.0, 1e4).unwrap();
        let a = cell.run_samples(6);
        let b = with_threads(Some(1), || cell.run_samples(6)).unwrap();
        assert_eq!(a, b);
        let single = cell.run_sample(4);
        assert_eq!(single, a[4]);
        let dir = tempfile::tempdir().unwrap();
        let r1 = run_mse_study(&cfg).unwrap();
        emit_results(&r1, dir.path(), "one").unwrap();
        emit_results(&run_mse_study(&cfg).unwrap(), dir.path(), "two").unwrap();
        let one = std::fs::read(dir.path().join("one.csv")).unwrap();
        assert_eq!(one, std::fs::read(dir.path().join("two.csv")).unwrap());
        let text = String::from_utf8(one).unwrap();
        assert!(text.starts_with("experiment,sensor_set,beta0,p,estimator,mean_hk2,stderr,expected_mse,samples,seed\n"));
        let six = r1
            .iter()
            .find(|r| r.sensor_set == "uniform6" && r.estimator == "linearized")
            .unwrap();
        assert_eq!(six.admissible, Some(false));
        assert_eq!(six.excluded + six.samples, 8);
    }

    #[test]
    fn empty_records_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, _) = emit_results(&[], dir.path(), "empty").unwrap();
        assert_eq!(std::fs::read_to_string(csv_path).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn closed_form_column_independent_of_samples_and_seed() {
        let mut cfg = reference_config();
        cfg.estimators = EstimatorToggles {
            pdap: false,
            gauss_newton: false,
            linearized: true,
        };
        let a = run_mse_study(&cfg).unwrap();
        cfg.samples = 3;
        cfg.seed = 7;
        let b = run_mse_study(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.expected_mse.to_bits(), y.expected_mse.to_bits());
        }
    }

    #[test]
    fn reconstruction_bundle_files() {
        let cfg = reference_config();
        let b = run_reconstruction(&cfg, "uniform9", 2.0, 1e4, Some(3)).unwrap();
        assert!(b.admissibility.admissible);
        assert_eq!(b.mu_bar.as_ref().unwrap().len(), 3);
        let dir = tempfile::tempdir().unwrap();
        write_reconstruction(&b, dir.path()).unwrap();
        let curve = std::fs::read_to_string(dir.path().join("certificate.csv")).unwrap();
        assert_eq!(curve.lines().count(), DEFAULT_GRID + 1);
        let exact = run_reconstruction(&cfg, "uniform6", 2.0, 1e4, None).unwrap();
        assert!(!exact.admissibility.admissible);
    }
}
