//! Value at Risk, expected loss and economic capital, together with the
//! classical exact-enumeration and Monte Carlo loss distributions.

use std::collections::BTreeMap;
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimation::{exact_amplitude, iqae, IqaeConfig};
use crate::gaussian::FactorGrid;
use crate::objective::{
    build_objective, integer_lgds, pattern_loss, ComparatorMode, ObjectiveCircuit, MAX_COMPARATOR_ASSETS,
};
use crate::uncertainty::{build_model, check_grids, Encoding, ModelCircuit, Portfolio, Variant};

/// Upper bound on `joint grid points × 2^K` for exact enumeration.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Discrete loss distribution, sorted by loss with unique support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDistribution {
    pub points: Vec<(f64, f64)>,
}

impl LossDistribution {
    /// Group per-pattern probabilities by total loss.
    fn from_patterns(lgds: &[f64], patterns: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut points: Vec<(f64, f64)> = patterns.into_iter().map(|(b, p)| (pattern_loss(lgds, b), p)).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for (loss, p) in points {
            match merged.last_mut() {
                Some(last) if last.0 == loss => last.1 += p,
                _ => merged.push((loss, p)),
            }
        }
        LossDistribution { points: merged }
    }

    pub fn losses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum()
    }

    /// `P[L <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.points.iter().take_while(|p| p.0 <= x).map(|p| p.1).sum()
    }

    /// Running sums of the probabilities, aligned with `points`.
    pub fn cumulative(&self) -> Vec<f64> {
        self.points
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p.1;
                Some(*acc)
            })
            .collect()
    }

    /// Smallest support point whose cdf reaches `alpha`; the largest loss if
    /// rounding keeps the total just under `alpha`.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let cum = self.cumulative();
        cum.iter()
            .position(|&c| c >= alpha)
            .map_or_else(|| self.points.last().map_or(0.0, |p| p.0), |i| self.points[i].0)
    }

    pub fn expected_loss(&self) -> f64 {
        self.points.iter().map(|(l, p)| l * p).sum()
    }

    /// Total-variation distance `½ Σ |p - q|` over the union of supports.
    pub fn total_variation(&self, other: &LossDistribution) -> f64 {
        let (a, b) = (&self.points, &other.points);
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < a.len() || j < b.len() {
            let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
            let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
            if take_a {
                sum += a[i].1;
                i += 1;
            } else if take_b {
                sum += b[j].1;
                j += 1;
            } else {
                sum += (a[i].1 - b[j].1).abs();
                i += 1;
                j += 1;
            }
        }
        0.5 * sum
    }
}

/// Joint grid realization: factor values and their product probability.
struct JointGrid<'a> {
    grids: &'a [FactorGrid],
    len: usize,
}

impl<'a> JointGrid<'a> {
    fn new(grids: &'a [FactorGrid]) -> Self {
        // Saturates so oversized grids fail the budget check instead of wrapping.
        let len = grids.iter().try_fold(1usize, |acc, g| acc.checked_mul(g.len())).unwrap_or(usize::MAX);
        JointGrid { grids, len }
    }

    /// Mixed-radix decomposition with factor 0 varying fastest.
    fn indices(&self, mut flat: usize) -> Vec<usize> {
        self.grids
            .iter()
            .map(|g| {
                let i = flat % g.len();
                flat /= g.len();
                i
            })
            .collect()
    }

    fn point(&self, flat: usize) -> (Vec<f64>, f64) {
        let idx = self.indices(flat);
        let z = idx.iter().zip(self.grids).map(|(&i, g)| g.value(i)).collect();
        let p = idx.iter().zip(self.grids).map(|(&i, g)| g.probs()[i]).product();
        (z, p)
    }
}

fn conditional_pds(portfolio: &Portfolio, z: &[f64]) -> Vec<f64> {
    portfolio
        .assets()
        .iter()
        .map(|a| {
            let y: f64 = a.alphas.iter().zip(z).map(|(w, z)| w * z).sum();
            a.pd_of()(y)
        })
        .collect()
}

/// Exact loss distribution by enumerating every joint grid point and every
/// default pattern.
pub fn exact_loss_distribution(portfolio: &Portfolio, grids: &[FactorGrid]) -> Result<LossDistribution> {
    check_grids(portfolio, grids)?;
    let joint = JointGrid::new(grids);
    let k = portfolio.len();
    let needed = (joint.len as u128).saturating_mul(1u128.checked_shl(k as u32).unwrap_or(u128::MAX));
    if k >= 64 || needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { needed, budget: ENUMERATION_BUDGET });
    }

    let mut acc = vec![0.0; 1 << k];
    let mut probs = Vec::with_capacity(1 << k);
    for flat in 0..joint.len {
        let (z, pz) = joint.point(flat);
        probs.clear();
        probs.push(pz);
        for (bit, pd) in conditional_pds(portfolio, &z).into_iter().enumerate() {
            // Bit `bit` of the pattern index is asset `bit`.
            for b in 0..1usize << bit {
                let p = probs[b];
                probs.push(p * pd);
                probs[b] = p * (1.0 - pd);
            }
        }
        for (a, p) in acc.iter_mut().zip(&probs) {
            *a += p;
        }
    }
    Ok(LossDistribution::from_patterns(&portfolio.lgds(), acc.into_iter().enumerate()))
}

/// Empirical loss distribution from `n_paths` seeded simulations of the
/// discretized model.
pub fn monte_carlo_distribution(
    portfolio: &Portfolio,
    grids: &[FactorGrid],
    n_paths: u64,
    seed: u64,
) -> Result<LossDistribution> {
    check_grids(portfolio, grids)?;
    if n_paths == 0 {
        return domain("Monte Carlo needs at least one path");
    }
    if portfolio.len() >= usize::BITS as usize {
        return domain(format!("Monte Carlo supports at most {} assets", usize::BITS - 1));
    }
    let joint = JointGrid::new(grids);
    if joint.len as u128 > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { needed: joint.len as u128, budget: ENUMERATION_BUDGET });
    }
    let pds: Vec<Vec<f64>> = (0..joint.len).map(|flat| conditional_pds(portfolio, &joint.point(flat).0)).collect();
    let samplers: Vec<WeightedIndex<f64>> = grids
        .iter()
        .map(|g| WeightedIndex::new(g.probs()).map_err(|e| Error::Domain(format!("grid weights: {e}"))))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..n_paths {
        let mut flat = 0;
        let mut stride = 1;
        for (s, g) in samplers.iter().zip(grids) {
            flat += s.sample(&mut rng) * stride;
            stride *= g.len();
        }
        let pattern =
            pds[flat].iter().enumerate().fold(0usize, |b, (k, &pd)| if rng.gen::<f64>() < pd { b | 1 << k } else { b });
        *counts.entry(pattern).or_default() += 1;
    }
    let n = n_paths as f64;
    Ok(LossDistribution::from_patterns(&portfolio.lgds(), counts.into_iter().map(|(b, c)| (b, c as f64 / n))))
}

/// `Σ_k LGD_k · Σ_z p(z) PD_k(z)` for the discretized model.
pub fn model_expected_loss(portfolio: &Portfolio, grids: &[FactorGrid]) -> Result<f64> {
    check_grids(portfolio, grids)?;
    let joint = JointGrid::new(grids);
    if joint.len as u128 > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { needed: joint.len as u128, budget: ENUMERATION_BUDGET });
    }
    let mut uncond = vec![0.0; portfolio.len()];
    for flat in 0..joint.len {
        let (z, pz) = joint.point(flat);
        for (u, pd) in uncond.iter_mut().zip(conditional_pds(portfolio, &z)) {
            *u += pz * pd;
        }
    }
    Ok(portfolio.assets().iter().zip(uncond).map(|(a, u)| a.lgd * u).sum())
}

/// `Σ_k LGD_k · p0_k`, ignoring the factor discretization.
pub fn naive_expected_loss(portfolio: &Portfolio) -> f64 {
    portfolio.assets().iter().map(|a| a.lgd * a.p0).sum()
}

pub fn economic_capital(var: f64, expected_loss: f64) -> f64 {
    var - expected_loss
}

/// Sorted, unique subset sums of the portfolio's LGDs.
pub fn loss_support(portfolio: &Portfolio) -> Result<Vec<f64>> {
    if portfolio.len() > MAX_COMPARATOR_ASSETS {
        return domain(format!("loss support enumeration supports at most {MAX_COMPARATOR_ASSETS} assets"));
    }
    let lgds = portfolio.lgds();
    let mut losses: Vec<f64> = (0..1usize << lgds.len()).map(|b| pattern_loss(&lgds, b)).collect();
    losses.sort_by(f64::total_cmp);
    losses.dedup();
    Ok(losses)
}

/// A portfolio with its uncertainty model built once; `build` appends the
/// comparator for a given threshold.
#[derive(Debug, Clone)]
pub struct QuantumPipeline {
    portfolio: Portfolio,
    grids: Vec<FactorGrid>,
    variant: Variant,
    encoding: Encoding,
    mode: ComparatorMode,
    model: ModelCircuit,
}

impl QuantumPipeline {
    pub fn new(
        portfolio: Portfolio,
        grids: Vec<FactorGrid>,
        variant: Variant,
        encoding: Encoding,
        mode: ComparatorMode,
    ) -> Result<Self> {
        if mode == ComparatorMode::WeightedSum {
            integer_lgds(&portfolio)?;
        }
        let model = build_model(&portfolio, &grids, variant, encoding)?;
        Ok(QuantumPipeline { portfolio, grids, variant, encoding, mode, model })
    }

    pub fn build(&self, threshold: f64) -> Result<ObjectiveCircuit> {
        build_objective(&self.portfolio, &self.model, threshold, self.mode)
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.portfolio
    }

    pub fn grids(&self) -> &[FactorGrid] {
        &self.grids
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn mode(&self) -> ComparatorMode {
        self.mode
    }

    pub fn model(&self) -> &ModelCircuit {
        &self.model
    }
}

/// How `P[L <= x]` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    /// Statevector readout of the objective qubit.
    Exact,
    /// Iterative amplitude estimation on the same circuit.
    Iqae(IqaeConfig),
    /// Lookup in a classical distribution.
    Classical(LossDistribution),
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::Iqae(_) => "iqae",
            Estimator::Classical(_) => "classical",
        }
    }
}

/// One CDF evaluation. Exact and classical probes have a degenerate
/// interval and zero sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfProbe {
    pub threshold: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rounds: usize,
    pub quantum_samples: u64,
    pub shots: u64,
    /// Largest Grover power applied.
    pub max_power: usize,
    pub converged: bool,
}

impl CdfProbe {
    fn point(threshold: f64, estimate: f64) -> Self {
        CdfProbe {
            threshold,
            estimate,
            ci_low: estimate,
            ci_high: estimate,
            rounds: 0,
            quantum_samples: 0,
            shots: 0,
            max_power: 0,
            converged: true,
        }
    }
}

/// `P[L <= x]` through the chosen estimator.
pub fn cdf_point(pipeline: &QuantumPipeline, x: f64, estimator: &Estimator) -> Result<CdfProbe> {
    match estimator {
        Estimator::Exact => Ok(CdfProbe::point(x, exact_amplitude(&pipeline.build(x)?)?)),
        Estimator::Classical(dist) => Ok(CdfProbe::point(x, dist.cdf(x))),
        Estimator::Iqae(cfg) => {
            let r = iqae(&pipeline.build(x)?, cfg)?;
            Ok(CdfProbe {
                threshold: x,
                estimate: r.estimate,
                ci_low: r.ci_low,
                ci_high: r.ci_high,
                rounds: r.rounds,
                quantum_samples: r.quantum_samples,
                shots: r.shots,
                max_power: r.trace.iter().map(|t| t.power).max().unwrap_or(0),
                converged: r.converged,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarResult {
    pub var: f64,
    pub alpha: f64,
    pub cdf_at_var: f64,
    /// Estimated cdf at the support point just below `var`, if any.
    pub predecessor_cdf: Option<f64>,
    /// Expected loss of the discretized model.
    pub expected_loss: f64,
    /// `Σ LGD·p0`, reported for comparison only.
    pub naive_expected_loss: f64,
    pub economic_capital: f64,
    pub bisection_trace: Vec<CdfProbe>,
}

impl VarResult {
    pub fn quantum_samples(&self) -> u64 {
        self.bisection_trace.iter().map(|p| p.quantum_samples).sum()
    }
}

/// An estimator error raised mid-search, with the probes completed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct VarFailure {
    pub error: Error,
    pub trace: Vec<CdfProbe>,
}

impl fmt::Display for VarFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} probes)", self.error, self.trace.len())
    }
}

impl std::error::Error for VarFailure {}

impl From<Error> for VarFailure {
    fn from(error: Error) -> Self {
        VarFailure { error, trace: Vec::new() }
    }
}

/// Smallest support point `x` with estimated `P[L <= x] >= alpha`, found by
/// bisection over the sorted loss support.
///
/// With IQAE the probe at support index `i` uses seed `cfg.seed + i`, so a
/// given threshold always sees the same sample stream.
pub fn var_bisection(
    pipeline: &QuantumPipeline,
    alpha: f64,
    estimator: &Estimator,
) -> std::result::Result<VarResult, VarFailure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")).into());
    }
    let portfolio = pipeline.portfolio();
    let support = loss_support(portfolio)?;
    let expected_loss = model_expected_loss(portfolio, pipeline.grids())?;

    let mut trace: Vec<CdfProbe> = Vec::new();
    let mut probed: BTreeMap<usize, f64> = BTreeMap::new();
    let probe = |i: usize,
                 trace: &mut Vec<CdfProbe>,
                 probed: &mut BTreeMap<usize, f64>|
     -> std::result::Result<f64, VarFailure> {
        let est = match estimator {
            Estimator::Iqae(cfg) => Estimator::Iqae(cfg.with_seed(cfg.seed.wrapping_add(i as u64))),
            other => other.clone(),
        };
        match cdf_point(pipeline, support[i], &est) {
            Ok(p) => {
                let e = p.estimate;
                trace.push(p);
                probed.insert(i, e);
                Ok(e)
            }
            Err(error) => Err(VarFailure { error, trace: trace.clone() }),
        }
    };

    // Invariant: cdf(support[lo]) < alpha (lo = -1 stands for "below 0"),
    // and support[hi] is the answer if nothing smaller qualifies.
    let (mut lo, mut hi) = (-1isize, support.len() as isize - 1);
    while hi - lo > 1 {
        let mid = (lo + hi).div_euclid(2);
        if probe(mid as usize, &mut trace, &mut probed)? >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let hi = hi as usize;
    let cdf_at_var = match probed.get(&hi) {
        Some(&e) => e,
        None => probe(hi, &mut trace, &mut probed)?,
    };
    let predecessor_cdf = hi.checked_sub(1).and_then(|i| probed.get(&i).copied());
    let var = support[hi];
    Ok(VarResult {
        var,
        alpha,
        cdf_at_var,
        predecessor_cdf,
        expected_loss,
        naive_expected_loss: naive_expected_loss(portfolio),
        economic_capital: economic_capital(var, expected_loss),
        bisection_trace: trace,
    })
}
