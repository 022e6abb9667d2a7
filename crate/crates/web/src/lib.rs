//! Browser demo bindings. Every export takes and returns JSON strings so the
//! same functions run natively under `cargo test`.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use qcra_core::circuit::Circuit;
use qcra_core::estimation::{exact_amplitude, iqae, AmplifiedSampler, IqaeConfig, IqaeRound};
use qcra_core::gaussian::{standard_grids, FactorGrid, DEFAULT_BOUND_SIGMAS};
use qcra_core::objective::{ComparatorMode, ObjectiveCircuit};
use qcra_core::risk::{exact_loss_distribution, var_bisection, Estimator, QuantumPipeline};
use qcra_core::uncertainty::{Asset, Encoding, Portfolio, Variant};

/// Portfolio as edited on the page.
#[derive(Debug, Clone, Deserialize)]
pub struct DemoPortfolio {
    pub factors: usize,
    pub qubits_per_factor: usize,
    #[serde(default = "default_bound")]
    pub bound_sigmas: f64,
    pub assets: Vec<Asset>,
    #[serde(default = "default_encoding")]
    pub encoding: Encoding,
}

fn default_bound() -> f64 {
    DEFAULT_BOUND_SIGMAS
}

fn default_encoding() -> Encoding {
    Encoding::Linear
}

impl DemoPortfolio {
    fn parse(json: &str) -> Result<Self, String> {
        serde_json::from_str(json).map_err(|e| format!("bad portfolio: {e}"))
    }

    fn model(&self) -> Result<(Portfolio, Vec<FactorGrid>), String> {
        let p = Portfolio::new(self.assets.clone(), self.factors).map_err(|e| e.to_string())?;
        let g = standard_grids(self.factors, self.qubits_per_factor, self.bound_sigmas).map_err(|e| e.to_string())?;
        Ok((p, g))
    }

    fn pipeline(&self) -> Result<QuantumPipeline, String> {
        let (p, g) = self.model()?;
        QuantumPipeline::new(p, g, Variant::MultiRotation, self.encoding, ComparatorMode::SFree)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Serialize)]
struct DistributionPoint {
    loss: f64,
    probability: f64,
    cdf: f64,
    /// `P[L <= loss]` read from the circuit.
    circuit_cdf: f64,
}

#[derive(Debug, Serialize)]
struct DistributionView {
    points: Vec<DistributionPoint>,
    alpha: f64,
    var: f64,
    expected_loss: f64,
    economic_capital: f64,
}

/// Exact loss distribution, circuit cdf and VaR at level `alpha`.
pub fn distribution_json(portfolio: &str, alpha: f64) -> Result<String, String> {
    let demo = DemoPortfolio::parse(portfolio)?;
    let pipe = demo.pipeline()?;
    let dist = exact_loss_distribution(pipe.portfolio(), pipe.grids()).map_err(|e| e.to_string())?;
    let mut points = Vec::with_capacity(dist.points.len());
    for ((loss, probability), cdf) in dist.points.iter().zip(dist.cumulative()) {
        let a = pipe.build(*loss).and_then(|c| exact_amplitude(&c)).map_err(|e| e.to_string())?;
        points.push(DistributionPoint { loss: *loss, probability: *probability, cdf, circuit_cdf: a });
    }
    let r = var_bisection(&pipe, alpha, &Estimator::Exact).map_err(|e| e.to_string())?;
    let view = DistributionView {
        points,
        alpha,
        var: r.var,
        expected_loss: r.expected_loss,
        economic_capital: r.economic_capital,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct GroverPoint {
    k: usize,
    simulated: f64,
    formula: f64,
}

/// `P(good)` after `k` Grover steps on a one-qubit `A` with amplitude `a`,
/// simulated and from `sin^2((2k+1) asin sqrt a)`.
pub fn grover_json(a: f64, k_max: usize) -> Result<String, String> {
    if !(0.0..=1.0).contains(&a) {
        return Err(format!("amplitude must lie in [0,1], got {a}"));
    }
    let mut circuit = Circuit::new(1).map_err(|e| e.to_string())?;
    circuit.ry(2.0 * a.sqrt().asin(), 0).map_err(|e| e.to_string())?;
    let op = ObjectiveCircuit {
        circuit,
        objective_qubit: 0,
        mode: ComparatorMode::SFree,
        threshold: 0.0,
        comparator_gates: 0,
        sum_qubits: None,
    };
    let mut sampler = AmplifiedSampler::new(&op).map_err(|e| e.to_string())?;
    let theta = a.sqrt().asin();
    let points = (0..=k_max.min(200))
        .map(|k| {
            let simulated = sampler.probability(k).map_err(|e| e.to_string())?;
            Ok(GroverPoint { k, simulated, formula: ((2 * k + 1) as f64 * theta).sin().powi(2) })
        })
        .collect::<Result<Vec<_>, String>>()?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct IqaeView {
    threshold: f64,
    exact: f64,
    estimate: f64,
    ci_low: f64,
    ci_high: f64,
    quantum_samples: u64,
    converged: bool,
    rounds: Vec<IqaeRound>,
}

/// One IQAE run for `P[L <= threshold]`, with its round-by-round intervals.
pub fn iqae_json(portfolio: &str, threshold: f64, epsilon: f64, confidence: f64, seed: u64) -> Result<String, String> {
    let pipe = DemoPortfolio::parse(portfolio)?.pipeline()?;
    let a = pipe.build(threshold).map_err(|e| e.to_string())?;
    let exact = exact_amplitude(&a).map_err(|e| e.to_string())?;
    let r = iqae(&a, &IqaeConfig::new(epsilon, confidence).with_seed(seed)).map_err(|e| e.to_string())?;
    let view = IqaeView {
        threshold,
        exact,
        estimate: r.estimate,
        ci_low: r.ci_low,
        ci_high: r.ci_high,
        quantum_samples: r.quantum_samples,
        converged: r.converged,
        rounds: r.trace,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn distribution(portfolio: &str, alpha: f64) -> Result<String, JsValue> {
    distribution_json(portfolio, alpha).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn grover(a: f64, k_max: usize) -> Result<String, JsValue> {
    grover_json(a, k_max).map_err(|e| JsValue::from_str(&e))
}

/// `seed` is 32-bit so the page can pass a plain JS number.
#[wasm_bindgen]
pub fn estimate(portfolio: &str, threshold: f64, epsilon: f64, confidence: f64, seed: u32) -> Result<String, JsValue> {
    iqae_json(portfolio, threshold, epsilon, confidence, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}
