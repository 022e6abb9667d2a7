//! Amplitude readout: exact statevector marginals, the Grover operator, and
//! Iterative Quantum Amplitude Estimation (IQAE).
//!
//! IQAE follows the standard iterative scheme: each round picks the largest
//! Grover power `k` whose amplified angle `(4k+2)·θ` keeps the current
//! interval inside one half-circle, measures the objective qubit of
//! `Q^k A |0>`, builds a Clopper-Pearson interval on the pooled counts of the
//! rounds that used the same `k`, and maps it back to an interval on `θ`.
//! The per-round error budget is `(1 - confidence) / T` with
//! `T = floor(log2(π / (4ε))) + 1` the worst-case number of distinct powers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use std::f64::consts::PI;

use crate::circuit::{inverse, marginal_probability, sample_bernoulli, Circuit, Control, Statevector};
use crate::error::{domain, Result};
use crate::objective::ObjectiveCircuit;

/// `P(objective = 1)` for `A|0...0>`.
pub fn exact_amplitude(a: &ObjectiveCircuit) -> Result<f64> {
    let mut state = Statevector::zero(a.circuit.n_qubits())?;
    state.apply_circuit(&a.circuit)?;
    marginal_probability(&state, a.objective_qubit, true)
}

/// `Q = A · S0 · A^-1 · S_good`, written as a gate list applied left to right:
/// `S_good` (phase flip of objective = 1), `A^-1`, `S0` (phase flip of
/// `|0...0>`), then `A`.
pub fn grover_operator(a: &ObjectiveCircuit) -> Result<Circuit> {
    let n = a.circuit.n_qubits();
    let mut q = Circuit::new(n)?;
    q.z(a.objective_qubit)?;
    q.extend(&inverse(&a.circuit))?;
    // X·CZ·X on qubit 0 with every other qubit controlled on |0> flips |0...0>.
    q.x(0)?;
    q.mcz(0, (1..n).map(Control::zero).collect())?;
    q.x(0)?;
    q.extend(&a.circuit)?;
    Ok(q)
}

/// Statevector backend that measures `Q^k A |0>`.
///
/// The simulation is deterministic, so the good-state probability for each
/// power is computed once by stepping `Q` forward and cached; sampling then
/// draws shots from the cached probability.
#[derive(Debug, Clone)]
pub struct AmplifiedSampler {
    a: Circuit,
    a_inv: Circuit,
    objective: usize,
    state: Statevector,
    probs: Vec<f64>,
}

impl AmplifiedSampler {
    pub fn new(a: &ObjectiveCircuit) -> Result<Self> {
        let mut state = Statevector::zero(a.circuit.n_qubits())?;
        state.apply_circuit(&a.circuit)?;
        let p0 = marginal_probability(&state, a.objective_qubit, true)?;
        Ok(AmplifiedSampler {
            a: a.circuit.clone(),
            a_inv: inverse(&a.circuit),
            objective: a.objective_qubit,
            state,
            probs: vec![p0],
        })
    }

    /// `P(objective = 1)` after `k` Grover applications.
    pub fn probability(&mut self, k: usize) -> Result<f64> {
        while self.probs.len() <= k {
            // Same action as `grover_operator`, with the two reflections
            // applied directly to the amplitudes.
            self.state.flip_phase_on(self.objective);
            self.state.apply_circuit(&self.a_inv)?;
            self.state.flip_zero_phase();
            self.state.apply_circuit(&self.a)?;
            self.probs.push(marginal_probability(&self.state, self.objective, true)?);
        }
        Ok(self.probs[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqaeConfig {
    /// Target half-width of the final interval on `a`.
    pub epsilon: f64,
    /// Target confidence level `1 - alpha`.
    pub confidence: f64,
    pub shots_per_round: u64,
    pub max_rounds: usize,
    pub seed: u64,
}

impl IqaeConfig {
    pub const DEFAULT_SHOTS_PER_ROUND: u64 = 100;
    pub const DEFAULT_MAX_ROUNDS: usize = 64;

    pub fn new(epsilon: f64, confidence: f64) -> Self {
        IqaeConfig {
            epsilon,
            confidence,
            shots_per_round: Self::DEFAULT_SHOTS_PER_ROUND,
            max_rounds: Self::DEFAULT_MAX_ROUNDS,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        IqaeConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return domain(format!("epsilon must lie in (0, 0.5), got {}", self.epsilon));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return domain(format!("confidence must lie in (0, 1), got {}", self.confidence));
        }
        if self.shots_per_round == 0 {
            return domain("shots_per_round must be at least 1");
        }
        if self.max_rounds == 0 {
            return domain("max_rounds must be at least 1");
        }
        Ok(())
    }

    /// Number of distinct powers the error budget is split across.
    pub fn budget_splits(&self) -> usize {
        const MIN_RATIO: f64 = 2.0;
        ((MIN_RATIO * PI / 8.0 / self.epsilon).ln() / MIN_RATIO.ln()) as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqaeRound {
    pub power: usize,
    pub ones: u64,
    pub shots: u64,
    /// Interval on `a` after this round.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqaeResult {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rounds: usize,
    /// Grover-operator applications summed over all shots (`Σ shots·k`).
    pub quantum_samples: u64,
    /// Circuit executions summed over all rounds.
    pub shots: u64,
    /// Whether the interval reached `2·epsilon` within `max_rounds`.
    pub converged: bool,
    pub trace: Vec<IqaeRound>,
}

/// Clopper-Pearson interval for `ones` successes in `shots` trials at total
/// tail probability `alpha`.
pub fn clopper_pearson(ones: u64, shots: u64, alpha: f64) -> (f64, f64) {
    let (x, n) = (ones as f64, shots as f64);
    let lower = if ones == 0 { 0.0 } else { beta_quantile(alpha / 2.0, x, n - x + 1.0) };
    let upper = if ones == shots { 1.0 } else { beta_quantile(1.0 - alpha / 2.0, x + 1.0, n - x) };
    (lower, upper)
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Next power `k` and half-plane flag; keeps `k` when no larger feasible
/// power is found.
fn find_next_k(k: usize, upper_half: bool, theta: (f64, f64)) -> (usize, bool) {
    const MIN_RATIO: f64 = 2.0;
    let (lo, hi) = theta;
    let old_scaling = (4 * k + 2) as f64;
    let max_scaling = (1.0 / (2.0 * (hi - lo))).floor();
    let max_scaling = if max_scaling.is_finite() { max_scaling as i64 } else { i64::MAX / 8 };
    let mut scaling = max_scaling - (max_scaling - 2).rem_euclid(4);
    while scaling as f64 >= MIN_RATIO * old_scaling {
        let s = scaling as f64;
        let t_min = s * lo - (s * lo).floor();
        let t_max = s * hi - (s * hi).floor();
        if t_min <= t_max && t_max <= 0.5 {
            return (((scaling - 2) / 4) as usize, true);
        }
        if t_max >= 0.5 && t_max >= t_min && t_min >= 0.5 {
            return (((scaling - 2) / 4) as usize, false);
        }
        scaling -= 4;
    }
    (k, upper_half)
}

/// Run IQAE on `a`.
pub fn iqae(a: &ObjectiveCircuit, cfg: &IqaeConfig) -> Result<IqaeResult> {
    let mut sampler = AmplifiedSampler::new(a)?;
    iqae_with(&mut sampler, cfg)
}

/// Run IQAE against an existing (possibly warm) sampler.
pub fn iqae_with(sampler: &mut AmplifiedSampler, cfg: &IqaeConfig) -> Result<IqaeResult> {
    cfg.validate()?;
    let alpha_round = (1.0 - cfg.confidence) / cfg.budget_splits() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // θ is tracked in units of full turns: a = sin^2(2π θ), θ ∈ [0, 1/4].
    let (mut theta_lo, mut theta_hi) = (0.0_f64, 0.25_f64);
    let mut k = 0usize;
    let mut upper_half = true;
    let (mut pooled_ones, mut pooled_shots) = (0u64, 0u64);
    let mut trace: Vec<IqaeRound> = Vec::new();
    let (mut quantum_samples, mut shots) = (0u64, 0u64);
    let mut converged = true;

    while theta_hi - theta_lo > cfg.epsilon / PI {
        if trace.len() == cfg.max_rounds {
            converged = false;
            break;
        }
        let (next_k, next_half) = find_next_k(k, upper_half, (theta_lo, theta_hi));
        if next_k != k || trace.is_empty() {
            pooled_ones = 0;
            pooled_shots = 0;
        }
        k = next_k;
        upper_half = next_half;

        let p = sampler.probability(k)?;
        let counts = sample_bernoulli(p, cfg.shots_per_round, &mut rng)?;
        quantum_samples += cfg.shots_per_round * k as u64;
        shots += cfg.shots_per_round;
        pooled_ones += counts.ones;
        pooled_shots += counts.shots();

        let (a_min, a_max) = clopper_pearson(pooled_ones, pooled_shots, alpha_round);
        let turn = |a: f64| (1.0 - 2.0 * a).clamp(-1.0, 1.0).acos() / (2.0 * PI);
        let (t_min, t_max) =
            if upper_half { (turn(a_min), turn(a_max)) } else { (1.0 - turn(a_max), 1.0 - turn(a_min)) };
        let scaling = (4 * k + 2) as f64;
        theta_hi = ((scaling * theta_hi).floor() + t_max) / scaling;
        theta_lo = ((scaling * theta_lo).floor() + t_min) / scaling;

        let (ci_low, ci_high) = to_amplitude(theta_lo, theta_hi);
        trace.push(IqaeRound { power: k, ones: counts.ones, shots: counts.shots(), ci_low, ci_high });
    }

    let (ci_low, ci_high) = to_amplitude(theta_lo, theta_hi);
    Ok(IqaeResult {
        estimate: 0.5 * (ci_low + ci_high),
        ci_low,
        ci_high,
        rounds: trace.len(),
        quantum_samples,
        shots,
        converged,
        trace,
    })
}

fn to_amplitude(theta_lo: f64, theta_hi: f64) -> (f64, f64) {
    let a = |t: f64| (2.0 * PI * t).sin().powi(2);
    let (lo, hi) = (a(theta_lo), a(theta_hi));
    (lo.min(hi), lo.max(hi))
}
