//! End-to-end runs: one sensing pass and Monte Carlo sweeps over
//! sub-sampling rates.
//!
//! Every random draw is keyed by `(seed + trial, purpose, …)` through
//! [`crate::seed::derive`]. Scenes and frames depend only on the trial, so
//! all rates and both methods see the same signals; the sampler also
//! depends on the rate index. Results are therefore independent of the
//! worker count.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlate::{
    estimate_compressive_autocorr, stack_autocorr, AutocorrVector, CompressiveEstimator,
    DictionaryBundle,
};
use crate::detect::{aggregate_report, evaluate_trial, DetectionReport};
use crate::error::{invalid, Result};
use crate::linalg::relative_error;
use crate::model::{generate_scene, reference_plan, synthesize_frames, SubbandPlan, WidebandScene};
use crate::sampling::{compress_frame, m_from_rate, make_subsampling_matrix, MeasurementMatrix};
use crate::seed::{derive, tag};
use crate::solve::{solve_lasso_cwss, solve_tvm_cwss, SolveResult, SolverConfig};
use crate::tvops::build_tv_operator;

pub const VERSION: &str = concat!("cwss ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lasso,
    Tvm,
    Both,
}

impl Method {
    fn expand(self) -> &'static [Method] {
        match self {
            Method::Lasso => &[Method::Lasso],
            Method::Tvm => &[Method::Tvm],
            Method::Both => &[Method::Lasso, Method::Tvm],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::Tvm => "tvm",
            Method::Both => "both",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Method::Lasso),
            "tvm" => Ok(Method::Tvm),
            "both" => Ok(Method::Both),
            other => Err(invalid(format!(
                "unknown method {other:?}; expected lasso, tvm or both"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    /// The eight-channel 0–500 MHz reference layout.
    Reference,
    /// A plan JSON file; its edges are re-gridded at the configured `n`.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plan: PlanSource,
    /// Nyquist samples per frame; the PSD grid has `2n` bins.
    pub n: usize,
    pub t_periods: usize,
    pub n_active: usize,
    /// `null` disables noise.
    pub snr_db: Option<f64>,
    pub frames_per_period: usize,
    pub estimator: CompressiveEstimator,
    /// Sweep used by `montecarlo`.
    pub subsample_rates: Vec<f64>,
    /// Rate used by `sense`.
    pub rate: f64,
    pub trials: usize,
    /// Radius of the residual ball relative to the measurement norm.
    pub mu_factor: f64,
    pub method: Method,
    pub seed: u64,
    /// Subband whose false alarms are reported (counted when it is inactive).
    pub false_alarm_subband: usize,
    /// Subband whose detections are reported (counted when it is active).
    pub detection_subband: usize,
    /// `mu_factor` here is overridden by the top-level field.
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plan: PlanSource::Reference,
            n: 128,
            t_periods: 2,
            n_active: 5,
            snr_db: Some(10.0),
            frames_per_period: 50,
            estimator: CompressiveEstimator::LagPooled,
            subsample_rates: vec![0.2, 0.4, 0.6, 0.8],
            rate: 0.25,
            trials: 200,
            mu_factor: 0.05,
            method: Method::Both,
            seed: 0,
            false_alarm_subband: 4,
            detection_subband: 5,
            solver: SolverConfig {
                primal_tol: 1e-4,
                dual_tol: 1e-4,
                ..SolverConfig::default()
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            mu: None,
            mu_factor: self.mu_factor,
            ..self.solver.clone()
        }
    }

    pub fn snr(&self) -> f64 {
        self.snr_db.unwrap_or(f64::INFINITY)
    }

    pub fn plan(&self) -> Result<SubbandPlan> {
        match &self.plan {
            PlanSource::Reference => reference_plan(self.n),
            PlanSource::File(path) => {
                let p: SubbandPlan = serde_json::from_str(&fs::read_to_string(path)?)?;
                let edges: Vec<(f64, f64)> =
                    p.subbands().iter().map(|s| (s.low_hz, s.high_hz)).collect();
                SubbandPlan::new(p.total_bandwidth_hz(), self.n, &edges)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(invalid(format!(
                "n = {} must be a power of two >= 2",
                self.n
            )));
        }
        if self.t_periods == 0 {
            return Err(invalid("t_periods must be at least 1"));
        }
        if self.frames_per_period == 0 {
            return Err(invalid("frames_per_period must be at least 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.subsample_rates.is_empty() {
            return Err(invalid("subsample_rates is empty"));
        }
        for &r in self
            .subsample_rates
            .iter()
            .chain(std::iter::once(&self.rate))
        {
            if !(r > 0.0 && r <= 1.0) {
                return Err(invalid(format!("sub-sampling rate {r} outside (0, 1]")));
            }
        }
        if !(self.mu_factor >= 0.0 && self.mu_factor.is_finite()) {
            return Err(invalid(format!(
                "mu_factor = {} must be finite and >= 0",
                self.mu_factor
            )));
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(invalid("snr_db must be finite; use null to disable noise"));
            }
        }
        self.solver_config().validate()?;
        let plan = self.plan()?;
        if self.n_active > plan.len() {
            return Err(invalid(format!(
                "n_active = {} exceeds {} subbands",
                self.n_active,
                plan.len()
            )));
        }
        for (name, q) in [
            ("false_alarm_subband", self.false_alarm_subband),
            ("detection_subband", self.detection_subband),
        ] {
            if q >= plan.len() {
                return Err(invalid(format!(
                    "{name} = {q} out of range for {} subbands",
                    plan.len()
                )));
            }
        }
        Ok(())
    }
}

/// Compressive autocorrelation of each period for one trial.
struct TrialData {
    scene: WidebandScene,
    r_y: Vec<AutocorrVector>,
}

fn simulate(
    cfg: &ExperimentConfig,
    plan: &SubbandPlan,
    phi: &MeasurementMatrix,
    trial_seed: u64,
) -> Result<TrialData> {
    let scene = generate_scene(
        plan,
        cfg.n_active,
        cfg.snr(),
        derive(trial_seed, &[tag::SCENE]),
    )?;
    let r_y = (0..cfg.t_periods)
        .map(|t| {
            let frames = synthesize_frames(
                &scene,
                cfg.frames_per_period,
                derive(trial_seed, &[tag::FRAMES, t as u64]),
            )?;
            let compressed = frames
                .iter()
                .map(|f| compress_frame(phi, f))
                .collect::<Result<Vec<_>>>()?;
            estimate_compressive_autocorr(&compressed, phi, cfg.estimator)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialData { scene, r_y })
}

/// LASSO works on the last period alone; TVM on all of them.
fn recover(
    method: Method,
    bundle: &DictionaryBundle,
    data: &TrialData,
    tv: &crate::tvops::TvOperator,
    solver: &SolverConfig,
) -> Result<SolveResult> {
    match method {
        Method::Lasso => solve_lasso_cwss(
            bundle,
            data.r_y.last().expect("at least one period"),
            solver,
        ),
        Method::Tvm => solve_tvm_cwss(bundle, tv, &stack_autocorr(&data.r_y)?, solver),
        Method::Both => unreachable!("expanded before solving"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseRun {
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub constraint_residual: f64,
    pub mu: f64,
    pub psd_relative_error: f64,
    /// Estimate for the last period.
    pub p_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseResult {
    pub version: String,
    pub config: ExperimentConfig,
    pub scene: WidebandScene,
    pub m: usize,
    pub runs: Vec<SenseRun>,
}

impl SenseResult {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.converged)
    }
}

fn write_psd_csv(path: &Path, plan: &SubbandPlan, values: &[f64]) -> Result<()> {
    let peak = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut out = String::from("bin_hz,value\n");
    for (b, v) in values.iter().enumerate() {
        let v = if peak > 0.0 { v / peak } else { *v };
        out.push_str(&format!("{},{}\n", plan.bin_hz(b), v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// One end-to-end pass at `config.rate` with trial seed `config.seed`.
///
/// With `out_dir` set, writes `truth.csv`, one `<method>.csv` per method
/// (PSD normalized to unit peak, indexed by bin frequency) and `sense.json`.
pub fn run_sense(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<SenseResult> {
    config.validate()?;
    let plan = config.plan()?;
    let m = m_from_rate(config.rate, config.n)?;
    let phi = make_subsampling_matrix(m, config.n, derive(config.seed, &[tag::PHI, 0]))?;
    let bundle = DictionaryBundle::for_measurement(&phi)?;
    let tv = build_tv_operator(plan.n_bins(), config.t_periods)?;
    let data = simulate(config, &plan, &phi, config.seed)?;
    let solver = config.solver_config();
    let mut runs = Vec::new();
    for &method in config.method.expand() {
        let r = recover(method, &bundle, &data, &tv, &solver)?;
        let p_hat = r.last_column().to_vec();
        runs.push(SenseRun {
            method,
            converged: r.converged,
            iterations: r.iterations,
            objective: r.objective,
            constraint_residual: r.constraint_residual,
            mu: r.mu,
            psd_relative_error: relative_error(&p_hat, &data.scene.true_psd),
            p_hat,
        });
    }
    let result = SenseResult {
        version: VERSION.to_string(),
        config: config.clone(),
        scene: data.scene,
        m,
        runs,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_psd_csv(&dir.join("truth.csv"), &plan, &result.scene.true_psd)?;
        for run in &result.runs {
            write_psd_csv(
                &dir.join(format!("{}.csv", run.method.name())),
                &plan,
                &run.p_hat,
            )?;
        }
        fs::write(
            dir.join("sense.json"),
            serde_json::to_string_pretty(&result)? + "\n",
        )?;
    }
    Ok(result)
}

/// Summary for one (rate, method) cell of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub rate: f64,
    pub m: usize,
    pub method: Method,
    /// False-alarm ratio of the designated subband, `None` if it was never inactive.
    pub p_f: Option<f64>,
    pub p_f_ci: Option<(f64, f64)>,
    /// Detection ratio of the designated subband, `None` if it was never active.
    pub p_d: Option<f64>,
    pub p_d_ci: Option<(f64, f64)>,
    pub mean_psd_relative_error: f64,
    pub mean_iterations: f64,
    pub nonconverged: usize,
    pub detection: DetectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub entries: Vec<SweepEntry>,
}

impl MonteCarloReport {
    pub fn entry(&self, rate: f64, method: Method) -> Option<&SweepEntry> {
        self.entries
            .iter()
            .find(|e| e.rate == rate && e.method == method)
    }
}

/// Wall-clock per sweep cell; kept apart from the report so reports stay
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub rate: f64,
    pub seconds: f64,
}

struct TrialResult {
    outcome: crate::detect::TrialOutcome,
    psd_error: f64,
    iterations: usize,
    converged: bool,
}

const CSV_HEADER: &str = "rate,method,p_f,p_d,p_f_ci_low,p_f_ci_high,p_d_ci_low,p_d_ci_high\n";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("nan".to_string(), |x| x.to_string())
}

fn csv_line(e: &SweepEntry) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        e.rate,
        e.method.name(),
        fmt_opt(e.p_f),
        fmt_opt(e.p_d),
        fmt_opt(e.p_f_ci.map(|c| c.0)),
        fmt_opt(e.p_f_ci.map(|c| c.1)),
        fmt_opt(e.p_d_ci.map(|c| c.0)),
        fmt_opt(e.p_d_ci.map(|c| c.1)),
    )
}

/// Runs `config.trials` paired trials at every rate on a pool of `workers`
/// threads.
///
/// With `out_dir` set, `montecarlo.csv` grows by whole lines as each rate
/// finishes (a partial sweep leaves a valid file), and `report.json` and
/// `timing.json` are written at the end.
pub fn run_montecarlo(
    config: &ExperimentConfig,
    workers: usize,
    out_dir: Option<&Path>,
) -> Result<(MonteCarloReport, Vec<Timing>)> {
    config.validate()?;
    if workers == 0 {
        return Err(invalid("workers must be at least 1"));
    }
    let plan = config.plan()?;
    let tv = build_tv_operator(plan.n_bins(), config.t_periods)?;
    let solver = config.solver_config();
    let methods = config.method.expand();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;

    let csv_path = out_dir.map(|d| d.join("montecarlo.csv"));
    if let (Some(dir), Some(path)) = (out_dir, &csv_path) {
        fs::create_dir_all(dir)?;
        fs::write(path, CSV_HEADER)?;
    }

    let mut entries = Vec::new();
    let mut timings = Vec::new();
    for (ri, &rate) in config.subsample_rates.iter().enumerate() {
        let start = Instant::now();
        let m = m_from_rate(rate, config.n)?;
        let per_trial: Vec<Vec<TrialResult>> = pool.install(|| {
            (0..config.trials)
                .into_par_iter()
                .map(|i| {
                    let trial_seed = config.seed.wrapping_add(i as u64);
                    let phi = make_subsampling_matrix(
                        m,
                        config.n,
                        derive(trial_seed, &[tag::PHI, ri as u64]),
                    )?;
                    let bundle = DictionaryBundle::for_measurement(&phi)?;
                    let data = simulate(config, &plan, &phi, trial_seed)?;
                    methods
                        .iter()
                        .map(|&method| {
                            let r = recover(method, &bundle, &data, &tv, &solver)?;
                            let p = r.last_column();
                            Ok(TrialResult {
                                outcome: evaluate_trial(p, &data.scene)?,
                                psd_error: relative_error(p, &data.scene.true_psd),
                                iterations: r.iterations,
                                converged: r.converged,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let mut lines = String::new();
        for (k, &method) in methods.iter().enumerate() {
            let results: Vec<&TrialResult> = per_trial.iter().map(|t| &t[k]).collect();
            let outcomes: Vec<_> = results.iter().map(|r| r.outcome.clone()).collect();
            let detection = aggregate_report(&outcomes, config.trials)?;
            let fa = &detection.false_alarm[config.false_alarm_subband];
            let det = &detection.detection[config.detection_subband];
            let n = results.len() as f64;
            let entry = SweepEntry {
                rate,
                m,
                method,
                p_f: fa.ratio,
                p_f_ci: fa.ci_low.zip(fa.ci_high),
                p_d: det.ratio,
                p_d_ci: det.ci_low.zip(det.ci_high),
                mean_psd_relative_error: results.iter().map(|r| r.psd_error).sum::<f64>() / n,
                mean_iterations: results.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                nonconverged: results.iter().filter(|r| !r.converged).count(),
                detection,
            };
            lines.push_str(&csv_line(&entry));
            entries.push(entry);
        }
        if let Some(path) = &csv_path {
            let mut f = OpenOptions::new().append(true).open(path)?;
            for line in lines.split_inclusive('\n') {
                f.write_all(line.as_bytes())?;
            }
            f.flush()?;
        }
        timings.push(Timing {
            rate,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let report = MonteCarloReport {
        version: VERSION.to_string(),
        config: config.clone(),
        entries,
    };
    if let Some(dir) = out_dir {
        let mut f = File::create(dir.join("report.json"))?;
        f.write_all((serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
        fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&timings)? + "\n",
        )?;
    }
    Ok((report, timings))
}
