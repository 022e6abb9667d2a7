//! JSON analysis configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qcra_core::estimation::IqaeConfig;
use qcra_core::gaussian::{standard_grids, FactorGrid, DEFAULT_BOUND_SIGMAS};
use qcra_core::objective::ComparatorMode;
use qcra_core::uncertainty::{Asset, Encoding, Portfolio, Variant};
use qcra_core::Error;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub risk_factors: RiskFactors,
    pub assets: Vec<AssetConfig>,
    pub analysis: AnalysisSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskFactors {
    pub count: usize,
    pub qubits_per_factor: usize,
    #[serde(default = "default_bound_sigmas")]
    pub bound_sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetConfig {
    pub lgd: f64,
    pub p0: f64,
    pub rho: f64,
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Exact,
    Iqae,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    pub alpha: f64,
    pub epsilon: f64,
    pub confidence: f64,
    #[serde(default = "default_shots")]
    pub shots_per_round: u64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_encoding")]
    pub encoding: Encoding,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_mode")]
    pub mode: ComparatorMode,
    /// Monte Carlo paths used by `compare`.
    #[serde(default = "default_mc_paths")]
    pub mc_paths: u64,
}

fn default_bound_sigmas() -> f64 {
    DEFAULT_BOUND_SIGMAS
}
fn default_shots() -> u64 {
    IqaeConfig::DEFAULT_SHOTS_PER_ROUND
}
fn default_max_rounds() -> usize {
    IqaeConfig::DEFAULT_MAX_ROUNDS
}
fn default_variant() -> Variant {
    Variant::MultiRotation
}
fn default_encoding() -> Encoding {
    Encoding::Linear
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::Iqae
}
fn default_mode() -> ComparatorMode {
    ComparatorMode::SFree
}
fn default_mc_paths() -> u64 {
    100_000
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub estimator: Option<EstimatorKind>,
    pub variant: Option<Variant>,
    pub encoding: Option<Encoding>,
    pub mode: Option<ComparatorMode>,
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(vec![format!("{path}: {}", e.inner())])
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let a = &mut self.analysis;
        a.seed = o.seed.unwrap_or(a.seed);
        a.estimator = o.estimator.unwrap_or(a.estimator);
        a.variant = o.variant.unwrap_or(a.variant);
        a.encoding = o.encoding.unwrap_or(a.encoding);
        a.mode = o.mode.unwrap_or(a.mode);
    }

    /// Every problem found, each prefixed with its field path.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let rf = &self.risk_factors;
        if rf.count == 0 {
            out.push("risk_factors.count: must be at least 1".to_string());
        }
        if rf.qubits_per_factor == 0 {
            out.push("risk_factors.qubits_per_factor: must be at least 1".to_string());
        }
        if !(rf.bound_sigmas > 0.0 && rf.bound_sigmas.is_finite()) {
            out.push(format!("risk_factors.bound_sigmas: must be positive, got {}", rf.bound_sigmas));
        }
        if self.assets.is_empty() {
            out.push("assets: at least one asset is required".to_string());
        }
        for (i, a) in self.assets.iter().enumerate() {
            if a.alphas.len() != rf.count {
                out.push(format!("assets[{i}].alphas: expected {} weights, got {}", rf.count, a.alphas.len()));
            }
            if !(a.lgd >= 0.0 && a.lgd.is_finite()) {
                out.push(format!("assets[{i}].lgd: must be finite and >= 0, got {}", a.lgd));
            }
            if !(a.p0 > 0.0 && a.p0 < 1.0) {
                out.push(format!("assets[{i}].p0: must lie in (0,1), got {}", a.p0));
            }
            if !(0.0..1.0).contains(&a.rho) {
                out.push(format!("assets[{i}].rho: must lie in [0,1), got {}", a.rho));
            }
        }
        let s = &self.analysis;
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            out.push(format!("analysis.alpha: must lie in (0,1), got {}", s.alpha));
        }
        if let Err(e) = self.iqae_config().validate() {
            out.push(format!("analysis: {e}"));
        }
        if s.mc_paths == 0 {
            out.push("analysis.mc_paths: must be at least 1".to_string());
        }
        out
    }

    pub fn iqae_config(&self) -> IqaeConfig {
        let s = &self.analysis;
        IqaeConfig {
            epsilon: s.epsilon,
            confidence: s.confidence,
            shots_per_round: s.shots_per_round,
            max_rounds: s.max_rounds,
            seed: s.seed,
        }
    }

    /// Validated portfolio and factor grids.
    pub fn model(&self) -> Result<(Portfolio, Vec<FactorGrid>), CliError> {
        let problems = self.problems();
        if !problems.is_empty() {
            return Err(CliError::Config(problems));
        }
        let assets = self.assets.iter().map(|a| Asset::new(a.lgd, a.p0, a.rho, a.alphas.clone())).collect();
        let portfolio = Portfolio::new(assets, self.risk_factors.count).map_err(config_error)?;
        let grids = standard_grids(
            self.risk_factors.count,
            self.risk_factors.qubits_per_factor,
            self.risk_factors.bound_sigmas,
        )
        .map_err(|e| CliError::Config(vec![format!("risk_factors: {e}")]))?;
        Ok((portfolio, grids))
    }
}

/// Map an asset-level model error onto its config path.
pub(crate) fn config_error(e: Error) -> CliError {
    match e {
        Error::AssetPrecondition { asset, reason } => CliError::Config(vec![format!("assets[{asset}]: {reason}")]),
        other => CliError::Config(vec![other.to_string()]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "risk_factors": {"count": 1, "qubits_per_factor": 2},
        "assets": [{"lgd": 1, "p0": 0.1, "rho": 0.1, "alphas": [1]}],
        "analysis": {"alpha": 0.9, "epsilon": 0.01, "confidence": 0.95}
    }"#;

    #[test]
    fn defaults_are_filled_in() {
        let c = AnalysisConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.risk_factors.bound_sigmas, 3.0);
        assert_eq!(c.analysis.shots_per_round, 100);
        assert_eq!(c.analysis.estimator, EstimatorKind::Iqae);
        assert_eq!(c.analysis.variant, Variant::MultiRotation);
        assert_eq!(c.analysis.encoding, Encoding::Linear);
        assert_eq!(c.analysis.mode, ComparatorMode::SFree);
        assert!(c.problems().is_empty());
    }

    #[test]
    fn parse_errors_carry_the_path() {
        let bad = MINIMAL.replace("\"p0\": 0.1", "\"p0\": \"x\"");
        match AnalysisConfig::from_json(&bad) {
            Err(CliError::Config(msgs)) => assert!(msgs[0].starts_with("assets[0].p0"), "{msgs:?}"),
            other => panic!("{other:?}"),
        }
        let unknown = MINIMAL.replace("\"seed\"", "x").replace("\"alpha\"", "\"alfa\"");
        assert!(AnalysisConfig::from_json(&unknown).is_err());
    }

    #[test]
    fn mismatched_alphas_name_the_asset() {
        let bad = MINIMAL.replace("\"alphas\": [1]", "\"alphas\": [1, 2]");
        let c = AnalysisConfig::from_json(&bad).unwrap();
        assert_eq!(c.problems(), vec!["assets[0].alphas: expected 1 weights, got 2".to_string()]);
        assert!(matches!(c.model(), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_replace_settings() {
        let mut c = AnalysisConfig::from_json(MINIMAL).unwrap();
        c.apply(&Overrides { seed: Some(7), estimator: Some(EstimatorKind::Exact), ..Overrides::default() });
        assert_eq!(c.analysis.seed, 7);
        assert_eq!(c.analysis.estimator, EstimatorKind::Exact);
        assert_eq!(c.analysis.mode, ComparatorMode::SFree);
    }
}
