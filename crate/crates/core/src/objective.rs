//! Comparator operators that flip the objective qubit when the total loss of
//! the loaded default pattern is at most the threshold `x`.
//!
//! The **S-free** comparator reads the asset register directly: the losses of
//! all `2^K` default patterns are summed classically at build time, and every
//! qualifying pattern contributes one pattern-controlled X on the objective.
//! Any real-valued LGD works.
//!
//! The **weighted-sum** comparator is the integer-only construction: an adder
//! writes `sum_k LGD_k x_k` into an `n_S`-qubit register, an integer
//! comparator flips the objective when the register holds a value `<= x`,
//! and the adder is uncomputed.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::circuit::{inverse, Circuit, Control};
use crate::error::{domain, Error, Result};
use crate::uncertainty::{controlled_add_power, ModelCircuit, Portfolio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorMode {
    SFree,
    WeightedSum,
}

/// The full operator `A` with its objective qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveCircuit {
    pub circuit: Circuit,
    pub objective_qubit: usize,
    pub mode: ComparatorMode,
    pub threshold: f64,
    /// Number of gates contributed by the comparator stage.
    pub comparator_gates: usize,
    /// Weighted-sum register, if one was allocated.
    pub sum_qubits: Option<Range<usize>>,
}

/// Total loss of a default pattern (bit `k` set means asset `k` defaulted).
///
/// Every loss comparison in the crate goes through this function, so that
/// circuit construction and the classical oracles agree on ties bit for bit.
pub fn pattern_loss(lgds: &[f64], pattern: usize) -> f64 {
    lgds.iter().enumerate().filter(|(k, _)| pattern >> k & 1 == 1).fold(0.0, |acc, (_, l)| acc + l)
}

/// Default patterns whose loss is `<= threshold`.
pub fn qualifying_patterns(lgds: &[f64], threshold: f64) -> Vec<usize> {
    (0..1usize << lgds.len()).filter(|&b| pattern_loss(lgds, b) <= threshold).collect()
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold.is_nan() {
        return domain("threshold must not be NaN");
    }
    Ok(())
}

/// Maximum number of assets the pattern-enumerating comparator accepts.
pub const MAX_COMPARATOR_ASSETS: usize = 24;

/// S-free comparator over `asset_qubits`, as a circuit of width `n_qubits`.
pub fn build_s_free_comparator(
    portfolio: &Portfolio,
    asset_qubits: &[usize],
    threshold: f64,
    objective: usize,
    n_qubits: usize,
) -> Result<Circuit> {
    check_threshold(threshold)?;
    if asset_qubits.len() != portfolio.len() {
        return Err(Error::DimensionMismatch { expected: portfolio.len(), got: asset_qubits.len() });
    }
    if portfolio.len() > MAX_COMPARATOR_ASSETS {
        return domain(format!("pattern comparator supports at most {MAX_COMPARATOR_ASSETS} assets"));
    }
    let mut circuit = Circuit::new(n_qubits)?;
    for pattern in qualifying_patterns(&portfolio.lgds(), threshold) {
        let controls = asset_qubits
            .iter()
            .enumerate()
            .map(|(k, &q)| Control { qubit: q, on_one: pattern >> k & 1 == 1 })
            .collect();
        circuit.mcx(objective, controls)?;
    }
    Ok(circuit)
}

/// `floor(log2(sum)) + 1`, the register width holding every subset sum.
pub fn n_sum_qubits(lgds: &[u64]) -> Result<usize> {
    let total = lgds.iter().try_fold(0u64, |acc, &l| acc.checked_add(l));
    match total {
        None => domain("sum of losses overflows"),
        Some(0) => domain("sum of losses must be at least 1"),
        Some(t) => Ok((u64::BITS - t.leading_zeros()) as usize),
    }
}

/// Largest LGD the integer adder accepts.
const MAX_INTEGER_LGD: f64 = (1u64 << 40) as f64;

/// The LGDs as integers, or a precondition error naming the first asset
/// whose LGD is fractional.
pub fn integer_lgds(portfolio: &Portfolio) -> Result<Vec<u64>> {
    portfolio
        .assets()
        .iter()
        .enumerate()
        .map(|(k, a)| {
            if a.lgd.fract() != 0.0 || a.lgd > MAX_INTEGER_LGD {
                Err(Error::AssetPrecondition {
                    asset: k,
                    reason: format!("weighted-sum register needs an integer LGD up to 2^40, got {}", a.lgd),
                })
            } else {
                Ok(a.lgd as u64)
            }
        })
        .collect()
}

/// Width of the weighted-sum register for `lgds`; one qubit when they are all
/// zero.
pub(crate) fn sum_register_width(lgds: &[u64]) -> usize {
    n_sum_qubits(lgds).unwrap_or(1)
}

/// Flip `objective` when the unsigned value of `register` is `<= bound`.
///
/// `value < bound + 1` splits into disjoint cases, one per set bit `j` of
/// `bound + 1`: the register has 0 at bit `j` and agrees above it.
fn integer_leq(circuit: &mut Circuit, register: &[usize], bound: i128, objective: usize) -> Result<()> {
    if bound < 0 {
        return Ok(());
    }
    let limit = bound + 1;
    if limit >= 1i128 << register.len() {
        return circuit.x(objective);
    }
    for j in (0..register.len()).filter(|j| limit >> j & 1 == 1) {
        let mut controls = vec![Control::zero(register[j])];
        controls.extend((j + 1..register.len()).map(|i| Control { qubit: register[i], on_one: limit >> i & 1 == 1 }));
        circuit.mcx(objective, controls)?;
    }
    Ok(())
}

/// Weighted-sum comparator: compute the loss into `sum_qubits`, compare,
/// uncompute.
pub fn build_weighted_sum(
    portfolio: &Portfolio,
    asset_qubits: &[usize],
    sum_qubits: &[usize],
    threshold: f64,
    objective: usize,
    n_qubits: usize,
) -> Result<Circuit> {
    check_threshold(threshold)?;
    let lgds = integer_lgds(portfolio)?;
    if asset_qubits.len() != lgds.len() {
        return Err(Error::DimensionMismatch { expected: lgds.len(), got: asset_qubits.len() });
    }
    let needed = sum_register_width(&lgds);
    if sum_qubits.len() < needed {
        return Err(Error::DimensionMismatch { expected: needed, got: sum_qubits.len() });
    }

    let mut adder = Circuit::new(n_qubits)?;
    for (&lgd, &q) in lgds.iter().zip(asset_qubits) {
        for bit in (0..64).filter(|b| lgd >> b & 1 == 1) {
            controlled_add_power(&mut adder, sum_qubits, bit, Control::one(q))?;
        }
    }
    let mut circuit = adder.clone();
    let bound = if threshold >= i128::MAX as f64 { i128::MAX - 1 } else { threshold.floor() as i128 };
    integer_leq(&mut circuit, sum_qubits, bound, objective)?;
    circuit.extend(&inverse(&adder))?;
    Ok(circuit)
}

/// Concatenate the model and comparator into `A`.
pub fn assemble_a(
    model: &ModelCircuit,
    comparator: &Circuit,
    objective: usize,
    mode: ComparatorMode,
    threshold: f64,
) -> Result<ObjectiveCircuit> {
    if comparator.n_qubits() < model.width() {
        return Err(Error::DimensionMismatch { expected: model.width(), got: comparator.n_qubits() });
    }
    if objective >= comparator.n_qubits() || objective < model.width() {
        return domain(format!(
            "objective qubit {objective} must lie outside the model (width {}) and inside the comparator (width {})",
            model.width(),
            comparator.n_qubits()
        ));
    }
    let mut circuit = model.circuit.widened(comparator.n_qubits())?;
    circuit.extend(comparator)?;
    Ok(ObjectiveCircuit {
        circuit,
        objective_qubit: objective,
        mode,
        threshold,
        comparator_gates: comparator.gate_count(),
        sum_qubits: None,
    })
}

/// Append the comparator for `mode` after `model`, placing the sum register
/// (weighted-sum only) and then the objective qubit after the model's qubits.
pub fn build_objective(
    portfolio: &Portfolio,
    model: &ModelCircuit,
    threshold: f64,
    mode: ComparatorMode,
) -> Result<ObjectiveCircuit> {
    let base = model.width();
    match mode {
        ComparatorMode::SFree => {
            let comparator = build_s_free_comparator(portfolio, &model.asset_qubits, threshold, base, base + 1)?;
            assemble_a(model, &comparator, base, mode, threshold)
        }
        ComparatorMode::WeightedSum => {
            let width = sum_register_width(&integer_lgds(portfolio)?);
            let sum: Vec<usize> = (base..base + width).collect();
            let objective = base + width;
            let comparator =
                build_weighted_sum(portfolio, &model.asset_qubits, &sum, threshold, objective, objective + 1)?;
            let mut a = assemble_a(model, &comparator, objective, mode, threshold)?;
            a.sum_qubits = Some(base..base + width);
            Ok(a)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{apply, marginal_probability, Statevector};
    use crate::gaussian::discretize_normal;
    use crate::uncertainty::{build_multi_rotation, Asset, Encoding};
    use approx::assert_abs_diff_eq;

    fn amplitude(a: &ObjectiveCircuit) -> f64 {
        let s = apply(&a.circuit, &Statevector::zero(a.circuit.n_qubits()).unwrap()).unwrap();
        marginal_probability(&s, a.objective_qubit, true).unwrap()
    }

    fn portfolio(lgds: &[f64]) -> Portfolio {
        let assets =
            lgds.iter().enumerate().map(|(k, &l)| Asset::new(l, 0.1 + 0.05 * k as f64, 0.1, vec![0.3, 0.2])).collect();
        Portfolio::new(assets, 2).unwrap()
    }

    fn model(p: &Portfolio) -> ModelCircuit {
        let g: Vec<_> = (0..2).map(|_| discretize_normal(2, 0.0, 1.0, 3.0).unwrap()).collect();
        build_multi_rotation(p, &g, Encoding::Exact).unwrap()
    }

    #[test]
    fn n_sum_qubits_examples() {
        assert_eq!(n_sum_qubits(&[1, 2]).unwrap(), 2);
        assert_eq!(n_sum_qubits(&[3, 4]).unwrap(), 3);
        assert_eq!(n_sum_qubits(&[1]).unwrap(), 1);
        assert_eq!(n_sum_qubits(&[1, 2, 4]).unwrap(), 3);
        assert!(n_sum_qubits(&[0, 0]).is_err());
        assert!(n_sum_qubits(&[]).is_err());
    }

    #[test]
    fn base_case_threshold_selects_two_patterns() {
        let lgds = [1000.5, 2000.5];
        assert_eq!(qualifying_patterns(&lgds, 1500.0), vec![0b00, 0b01]);
        assert_eq!(qualifying_patterns(&lgds, 3001.0).len(), 4);
        assert_eq!(qualifying_patterns(&lgds, -1.0), Vec::<usize>::new());
        assert_eq!(pattern_loss(&lgds, 0b11), 3001.0);
    }

    #[test]
    fn full_and_empty_acceptance() {
        let p = portfolio(&[1000.5, 2000.5]);
        let m = model(&p);
        let all = build_objective(&p, &m, 1e9, ComparatorMode::SFree).unwrap();
        assert_eq!(all.comparator_gates, 4);
        assert_abs_diff_eq!(amplitude(&all), 1.0, epsilon = 1e-12);
        let none = build_objective(&p, &m, -1.0, ComparatorMode::SFree).unwrap();
        assert_eq!(none.comparator_gates, 0);
        assert_eq!(amplitude(&none), 0.0);
    }

    #[test]
    fn zero_threshold_keeps_only_the_no_default_pattern() {
        let p = portfolio(&[1000.5, 2000.5]);
        let m = model(&p);
        let s = apply(&m.circuit, &Statevector::zero(m.width()).unwrap()).unwrap();
        let no_default: f64 = s.probabilities().iter().enumerate().filter(|(i, _)| i >> 4 == 0).map(|(_, p)| p).sum();
        let a = build_objective(&p, &m, 0.0, ComparatorMode::SFree).unwrap();
        assert_abs_diff_eq!(amplitude(&a), no_default, epsilon = 1e-12);
    }

    #[test]
    fn weighted_sum_rejects_fractional_lgd() {
        let p = portfolio(&[1000.5, 2000.5]);
        let m = model(&p);
        let err = build_objective(&p, &m, 1500.0, ComparatorMode::WeightedSum).unwrap_err();
        assert!(matches!(err, Error::AssetPrecondition { asset: 0, .. }));
    }

    #[test]
    fn weighted_sum_matches_s_free_on_integer_portfolios() {
        for lgds in [vec![1.0, 2.0], vec![3.0, 4.0], vec![1.0, 2.0, 4.0], vec![5.0, 0.0, 7.0]] {
            let assets = lgds.iter().map(|&l| Asset::new(l, 0.2, 0.1, vec![0.5])).collect();
            let p = Portfolio::new(assets, 1).unwrap();
            let g = [discretize_normal(2, 0.0, 1.0, 3.0).unwrap()];
            let m = build_multi_rotation(&p, &g, Encoding::Exact).unwrap();
            let total: f64 = lgds.iter().sum();
            for x in -1..=(total as i64 + 1) {
                let x = x as f64;
                let s = amplitude(&build_objective(&p, &m, x, ComparatorMode::SFree).unwrap());
                let w = build_objective(&p, &m, x, ComparatorMode::WeightedSum).unwrap();
                assert_abs_diff_eq!(s, amplitude(&w), epsilon = 1e-10);
                // fractional thresholds floor onto the same integer cut
                let wf = build_objective(&p, &m, x + 0.5, ComparatorMode::WeightedSum).unwrap();
                assert_abs_diff_eq!(s, amplitude(&wf), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn weighted_sum_register_is_uncomputed() {
        let assets = [1.0, 2.0].iter().map(|&l| Asset::new(l, 0.3, 0.2, vec![1.0])).collect();
        let p = Portfolio::new(assets, 1).unwrap();
        let g = [discretize_normal(1, 0.0, 1.0, 2.0).unwrap()];
        let m = build_multi_rotation(&p, &g, Encoding::Exact).unwrap();
        let a = build_objective(&p, &m, 1.0, ComparatorMode::WeightedSum).unwrap();
        let sum = a.sum_qubits.clone().unwrap();
        assert_eq!(sum.len(), 2);
        let s = apply(&a.circuit, &Statevector::zero(a.circuit.n_qubits()).unwrap()).unwrap();
        for q in sum {
            assert_abs_diff_eq!(marginal_probability(&s, q, true).unwrap(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn all_zero_lgds_accept_everything() {
        let assets = (0..3).map(|_| Asset::new(0.0, 0.3, 0.2, vec![1.0])).collect();
        let p = Portfolio::new(assets, 1).unwrap();
        let g = [discretize_normal(1, 0.0, 1.0, 2.0).unwrap()];
        let m = build_multi_rotation(&p, &g, Encoding::Exact).unwrap();
        for mode in [ComparatorMode::SFree, ComparatorMode::WeightedSum] {
            assert_abs_diff_eq!(amplitude(&build_objective(&p, &m, 0.0, mode).unwrap()), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn assemble_checks_widths() {
        let p = portfolio(&[1.0, 2.0]);
        let m = model(&p);
        let narrow = Circuit::new(m.width() - 1).unwrap();
        assert!(assemble_a(&m, &narrow, 0, ComparatorMode::SFree, 0.0).is_err());
        let wide = Circuit::new(m.width() + 1).unwrap();
        assert!(assemble_a(&m, &wide, 0, ComparatorMode::SFree, 0.0).is_err());
        assert!(assemble_a(&m, &wide, m.width(), ComparatorMode::SFree, 0.0).is_ok());
        assert!(build_objective(&p, &m, f64::NAN, ComparatorMode::SFree).is_err());
    }

    #[test]
    fn amplitude_is_monotone_in_threshold() {
        let p = portfolio(&[1000.5, 2000.5, 250.25]);
        let m = model(&p);
        let lgds = p.lgds();
        let mut support: Vec<f64> = (0..8).map(|b| pattern_loss(&lgds, b)).collect();
        support.sort_by(f64::total_cmp);
        let mut last = 0.0;
        for x in support {
            let a = amplitude(&build_objective(&p, &m, x, ComparatorMode::SFree).unwrap());
            assert!(a >= last - 1e-15);
            last = a;
        }
        assert_abs_diff_eq!(last, 1.0, epsilon = 1e-12);
    }
}
