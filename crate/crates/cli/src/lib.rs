//! `qcra` command-line front end: config ingestion, analysis orchestration,
//! and JSON/CSV/text reports.

pub mod args;
pub mod config;
mod format;

use std::fs;
use std::path::Path;

use serde::Serialize;

use qcra_core::estimation::iqae;
use qcra_core::resources::{estimate_resources, ResourceReport};
use qcra_core::risk::{
    cdf_point, exact_loss_distribution, loss_support, monte_carlo_distribution, var_bisection, CdfProbe, Estimator,
    QuantumPipeline, VarResult,
};

pub use config::{AnalysisConfig, EstimatorKind, Overrides};
pub use format::fmt_g;

use config::config_error;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    /// Estimation failed; `partial` is the report written so far.
    #[error("estimation failed: {message}")]
    Estimation { message: String, partial: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Estimation { .. } => 1,
            _ => 2,
        }
    }
}

fn load(config: &Path, overrides: &Overrides) -> Result<AnalysisConfig, CliError> {
    let mut cfg = AnalysisConfig::load(config)?;
    cfg.apply(overrides);
    Ok(cfg)
}

fn pipeline(cfg: &AnalysisConfig) -> Result<QuantumPipeline, CliError> {
    let (portfolio, grids) = cfg.model()?;
    let a = &cfg.analysis;
    QuantumPipeline::new(portfolio, grids, a.variant, a.encoding, a.mode).map_err(config_error)
}

fn estimator(cfg: &AnalysisConfig, pipe: &QuantumPipeline) -> Result<Estimator, CliError> {
    Ok(match cfg.analysis.estimator {
        EstimatorKind::Exact => Estimator::Exact,
        EstimatorKind::Iqae => Estimator::Iqae(cfg.iqae_config()),
        EstimatorKind::Classical => {
            Estimator::Classical(exact_loss_distribution(pipe.portfolio(), pipe.grids()).map_err(config_error)?)
        }
    })
}

fn write_output(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
struct Sampling {
    probes: usize,
    rounds: usize,
    quantum_samples: u64,
    shots: u64,
    max_power: usize,
    all_converged: bool,
}

impl Sampling {
    fn of(trace: &[CdfProbe]) -> Self {
        Sampling {
            probes: trace.len(),
            rounds: trace.iter().map(|p| p.rounds).sum(),
            quantum_samples: trace.iter().map(|p| p.quantum_samples).sum(),
            shots: trace.iter().map(|p| p.shots).sum(),
            max_power: trace.iter().map(|p| p.max_power).max().unwrap_or(0),
            all_converged: trace.iter().all(|p| p.converged),
        }
    }
}

#[derive(Debug, Serialize)]
struct AnalyzeReport<'a> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    config: &'a AnalysisConfig,
    estimator: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<VarResult>,
    /// Model expected loss minus `Σ LGD·p0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    expected_loss_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    partial_trace: Option<Vec<CdfProbe>>,
    sampling: Sampling,
    resources: ResourceReport,
}

/// Run the VaR search and render the JSON report. On estimator failure the
/// partial report is still written to `output`.
pub fn cmd_analyze(config: &Path, output: Option<&Path>, overrides: &Overrides) -> Result<String, CliError> {
    let cfg = load(config, overrides)?;
    let pipe = pipeline(&cfg)?;
    let est = estimator(&cfg, &pipe)?;
    let a = &cfg.analysis;
    let resources =
        estimate_resources(pipe.portfolio(), pipe.grids(), a.variant, a.encoding, a.mode).map_err(config_error)?;
    let mut report = AnalyzeReport {
        status: "ok",
        error: None,
        config: &cfg,
        estimator: est.label(),
        result: None,
        expected_loss_gap: None,
        partial_trace: None,
        sampling: Sampling::of(&[]),
        resources,
    };
    match var_bisection(&pipe, a.alpha, &est) {
        Ok(r) => {
            report.sampling = Sampling::of(&r.bisection_trace);
            report.expected_loss_gap = Some(r.expected_loss - r.naive_expected_loss);
            report.result = Some(r);
            let text = to_json(&report);
            write_output(output, &text)?;
            Ok(text)
        }
        Err(failure) => {
            report.status = "error";
            report.error = Some(failure.error.to_string());
            report.sampling = Sampling::of(&failure.trace);
            report.partial_trace = Some(failure.trace);
            let text = to_json(&report);
            write_output(output, &text)?;
            Err(CliError::Estimation { message: failure.error.to_string(), partial: text })
        }
    }
}

/// CSV `loss,probability,cdf` of the exact loss distribution.
pub fn cmd_distribution(config: &Path, output: Option<&Path>, overrides: &Overrides) -> Result<String, CliError> {
    let cfg = load(config, overrides)?;
    let (portfolio, grids) = cfg.model()?;
    let dist = exact_loss_distribution(&portfolio, &grids).map_err(config_error)?;
    let mut text = String::from("loss,probability,cdf\n");
    for ((loss, p), c) in dist.points.iter().zip(dist.cumulative()) {
        text.push_str(&format!("{},{},{}\n", fmt_g(*loss, 12), fmt_g(*p, 12), fmt_g(c, 12)));
    }
    write_output(output, &text)?;
    Ok(text)
}

#[derive(Debug, Serialize)]
struct ResourcesOutput<'a> {
    config: &'a AnalysisConfig,
    resources: ResourceReport,
}

pub fn cmd_resources(config: &Path, output: Option<&Path>, overrides: &Overrides) -> Result<String, CliError> {
    let cfg = load(config, overrides)?;
    let (portfolio, grids) = cfg.model()?;
    let a = &cfg.analysis;
    let resources = estimate_resources(&portfolio, &grids, a.variant, a.encoding, a.mode).map_err(config_error)?;
    let text = to_json(&ResourcesOutput { config: &cfg, resources });
    write_output(output, &text)?;
    Ok(text)
}

/// One row of the `compare` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub loss: f64,
    pub exact: f64,
    pub classical: f64,
    pub iqae: f64,
    pub iqae_ok: bool,
    pub monte_carlo: f64,
    pub mc_sigma: f64,
    pub mc_ok: bool,
}

/// Exact, classical, IQAE and Monte Carlo cdf at every support point.
pub fn compare_rows(cfg: &AnalysisConfig) -> Result<Vec<CompareRow>, CliError> {
    let pipe = pipeline(cfg)?;
    let classical = exact_loss_distribution(pipe.portfolio(), pipe.grids()).map_err(config_error)?;
    let a = &cfg.analysis;
    let mc = monte_carlo_distribution(pipe.portfolio(), pipe.grids(), a.mc_paths, a.seed).map_err(config_error)?;
    let support = loss_support(pipe.portfolio()).map_err(config_error)?;
    let n = a.mc_paths as f64;
    let mut rows = Vec::with_capacity(support.len());
    for (i, &x) in support.iter().enumerate() {
        let exact = cdf_point(&pipe, x, &Estimator::Exact).map_err(estimation_error)?.estimate;
        let iq_cfg = cfg.iqae_config().with_seed(a.seed.wrapping_add(i as u64));
        let iq = iqae(&pipe.build(x).map_err(estimation_error)?, &iq_cfg).map_err(estimation_error)?.estimate;
        let c = classical.cdf(x);
        let m = mc.cdf(x);
        // Monte Carlo samples the discretized model, so it is judged against
        // enumeration rather than the (possibly linearized) circuit.
        let sigma = (c * (1.0 - c) / n).max(0.0).sqrt();
        rows.push(CompareRow {
            loss: x,
            exact,
            classical: c,
            iqae: iq,
            iqae_ok: (iq - exact).abs() <= a.epsilon,
            monte_carlo: m,
            mc_sigma: sigma,
            mc_ok: (m - c).abs() <= (3.0 * sigma).max(1e-9),
        });
    }
    Ok(rows)
}

fn estimation_error(e: qcra_core::Error) -> CliError {
    CliError::Estimation { message: e.to_string(), partial: String::new() }
}

/// Plain-text consistency table.
pub fn cmd_compare(config: &Path, output: Option<&Path>, overrides: &Overrides) -> Result<String, CliError> {
    let cfg = load(config, overrides)?;
    let rows = compare_rows(&cfg)?;
    let mut text = format!(
        "{:>14} {:>14} {:>14} {:>14} {:>10} {:>4} {:>14} {:>10} {:>4}\n",
        "loss", "exact", "classical", "iqae", "|iqae-ex|", "ok", "monte_carlo", "3sigma", "ok"
    );
    for r in &rows {
        text.push_str(&format!(
            "{:>14} {:>14.10} {:>14.10} {:>14.10} {:>10.6} {:>4} {:>14.10} {:>10.6} {:>4}\n",
            fmt_g(r.loss, 12),
            r.exact,
            r.classical,
            r.iqae,
            (r.iqae - r.exact).abs(),
            if r.iqae_ok { "yes" } else { "no" },
            r.monte_carlo,
            3.0 * r.mc_sigma,
            if r.mc_ok { "yes" } else { "no" },
        ));
    }
    let max_gap = rows.iter().map(|r| (r.exact - r.classical).abs()).fold(0.0, f64::max);
    text.push_str(&format!(
        "epsilon {} | max |exact-classical| {:.3e} | iqae within epsilon {}/{} | monte carlo ({} paths) within 3 sigma {}/{}\n",
        cfg.analysis.epsilon,
        max_gap,
        rows.iter().filter(|r| r.iqae_ok).count(),
        rows.len(),
        cfg.analysis.mc_paths,
        rows.iter().filter(|r| r.mc_ok).count(),
        rows.len(),
    ));
    write_output(output, &text)?;
    Ok(text)
}
