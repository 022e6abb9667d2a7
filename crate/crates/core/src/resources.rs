//! Qubit and gate accounting.
//!
//! `width_paper_layout` follows the reference layout, where the loss
//! comparison goes through a linear amplitude function with one ancilla per
//! asset. The built circuits enumerate qualifying patterns directly and need
//! fewer qubits; their measured counts are reported next to the closed forms.

use serde::{Deserialize, Serialize};

use crate::circuit::GateKind;
use crate::error::Result;
use crate::gaussian::FactorGrid;
use crate::objective::{build_objective, integer_lgds, n_sum_qubits, ComparatorMode};
use crate::uncertainty::{build_model, check_grids, sum_grid, Encoding, Portfolio, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub variant: Variant,
    pub mode: ComparatorMode,
    pub encoding: Encoding,
    pub assets: usize,
    pub factors: usize,
    /// Qubits holding the factor registers (plus the sum register for the
    /// single-rotation model).
    pub factor_qubits: usize,
    pub width_paper_layout: usize,
    /// Width of the circuit actually built, when it fits the simulator.
    pub width_built: Option<usize>,
    /// Rotation blocks acting on asset qubits.
    pub rotation_count: usize,
    /// Worst-case comparator size: qualifying patterns for the pattern
    /// comparator, prefix cases for the integer comparator.
    pub comparator_pattern_count: u64,
    pub sum_register_width: Option<usize>,
    pub built: Option<BuiltCounts>,
}

/// Counts measured on `A` built at a threshold every pattern satisfies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltCounts {
    pub width: usize,
    pub gates: usize,
    pub ry_gates: usize,
    pub comparator_gates: usize,
}

/// Closed-form and measured resources for `variant` and `mode`.
///
/// The integer weighted-sum layout on a single factor corresponds to
/// `Variant::SingleFactor` with `ComparatorMode::WeightedSum`.
pub fn estimate_resources(
    portfolio: &Portfolio,
    grids: &[FactorGrid],
    variant: Variant,
    encoding: Encoding,
    mode: ComparatorMode,
) -> Result<ResourceReport> {
    check_grids(portfolio, grids)?;
    let k = portfolio.len();
    let r = portfolio.n_factors();
    let factor_qubits = match variant {
        Variant::SingleFactor => grids[0].n_z(),
        Variant::MultiRotation => grids.iter().map(|g| g.n_z()).sum(),
        Variant::SingleRotation => {
            let sg = sum_grid(grids, &portfolio.assets()[0].alphas)?;
            sg.factor_widths().iter().sum::<usize>() + sg.sum_width()
        }
    };
    let grid_points: usize = match variant {
        Variant::SingleFactor => grids[0].len(),
        _ => grids.iter().map(|g| g.len()).product(),
    };
    let rotation_count = match (variant, encoding) {
        (Variant::MultiRotation, Encoding::Linear) => k * r,
        (_, Encoding::Linear) => k,
        (Variant::SingleRotation, Encoding::Exact) => {
            let sg = sum_grid(grids, &portfolio.assets()[0].alphas)?;
            k * (sg.max_index + 1)
        }
        (_, Encoding::Exact) => k * grid_points,
    };

    let (width_paper_layout, comparator_pattern_count, sum_register_width) = match mode {
        ComparatorMode::SFree => (factor_qubits + 2 * k + 1, 1u64.checked_shl(k as u32).unwrap_or(u64::MAX), None),
        ComparatorMode::WeightedSum => {
            let lgds = integer_lgds(portfolio)?;
            let n_s = if lgds.iter().all(|&l| l == 0) { 1 } else { n_sum_qubits(&lgds)? };
            (factor_qubits + k + n_s + 1, n_s as u64, Some(n_s))
        }
    };

    let total: f64 = portfolio.lgds().iter().sum();
    let built = build_model(portfolio, grids, variant, encoding)
        .and_then(|m| build_objective(portfolio, &m, total, mode))
        .ok()
        .map(|a| BuiltCounts {
            width: a.circuit.n_qubits(),
            gates: a.circuit.gate_count(),
            ry_gates: a.circuit.count_where(|g| matches!(g.kind, GateKind::Ry(_))),
            comparator_gates: a.comparator_gates,
        });

    Ok(ResourceReport {
        variant,
        mode,
        encoding,
        assets: k,
        factors: r,
        factor_qubits,
        width_paper_layout,
        width_built: built.as_ref().map(|b| b.width),
        rotation_count,
        comparator_pattern_count,
        sum_register_width,
        built,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::standard_grids;
    use crate::uncertainty::Asset;

    fn base_case_assets() -> Vec<Asset> {
        vec![Asset::new(1000.5, 0.15, 0.1, vec![0.35, 0.2]), Asset::new(2000.5, 0.25, 0.05, vec![0.1, 0.25])]
    }

    fn report(
        assets: Vec<Asset>,
        r: usize,
        variant: Variant,
        encoding: Encoding,
        mode: ComparatorMode,
    ) -> ResourceReport {
        let p = Portfolio::new(assets, r).unwrap();
        estimate_resources(&p, &standard_grids(r, 2, 3.0).unwrap(), variant, encoding, mode).unwrap()
    }

    #[test]
    fn base_case_width_is_nine() {
        let rep = report(base_case_assets(), 2, Variant::MultiRotation, Encoding::Linear, ComparatorMode::SFree);
        assert_eq!(rep.width_paper_layout, 9);
        assert_eq!(rep.width_built, Some(7));
        assert_eq!(rep.rotation_count, 4);
        assert_eq!(rep.comparator_pattern_count, 4);
        assert_eq!(rep.sum_register_width, None);
        let built = rep.built.unwrap();
        assert_eq!(built.comparator_gates, 4);
    }

    #[test]
    fn width_grows_by_two_per_asset() {
        let mut widths = Vec::new();
        for k in 2..=4 {
            let mut assets = base_case_assets();
            while assets.len() < k {
                assets.push(Asset::new(500.0, 0.1, 0.1, vec![0.2, 0.3]));
            }
            widths.push(
                report(assets, 2, Variant::MultiRotation, Encoding::Linear, ComparatorMode::SFree).width_paper_layout,
            );
        }
        assert_eq!(widths, vec![9, 11, 13]);
    }

    #[test]
    fn width_grows_with_factor_register() {
        let base = report(base_case_assets(), 2, Variant::MultiRotation, Encoding::Linear, ComparatorMode::SFree);
        let mut assets = base_case_assets();
        for a in &mut assets {
            a.alphas.push(0.1);
        }
        let more = report(assets, 3, Variant::MultiRotation, Encoding::Linear, ComparatorMode::SFree);
        assert_eq!(more.width_paper_layout, base.width_paper_layout + 2);
        assert_eq!(more.rotation_count, 6);
    }

    #[test]
    fn single_rotation_count_is_independent_of_factors() {
        let shared = |r: usize| vec![Asset::new(1.0, 0.1, 0.1, vec![0.3; r]), Asset::new(2.0, 0.2, 0.1, vec![0.3; r])];
        let two = report(shared(2), 2, Variant::SingleRotation, Encoding::Linear, ComparatorMode::SFree);
        let three = report(shared(3), 3, Variant::SingleRotation, Encoding::Linear, ComparatorMode::SFree);
        assert_eq!(two.rotation_count, 2);
        assert_eq!(three.rotation_count, 2);
    }

    #[test]
    fn legacy_integer_layout() {
        let assets = vec![
            Asset::new(1.0, 0.15, 0.1, vec![1.0]),
            Asset::new(2.0, 0.25, 0.05, vec![1.0]),
            Asset::new(4.0, 0.2, 0.1, vec![1.0]),
        ];
        let rep = report(assets, 1, Variant::SingleFactor, Encoding::Linear, ComparatorMode::WeightedSum);
        assert_eq!(rep.sum_register_width, Some(3));
        assert_eq!(rep.width_paper_layout, 2 + 3 + 3 + 1);
        assert_eq!(rep.width_built, Some(rep.width_paper_layout));
    }

    #[test]
    fn weighted_sum_rejects_fractional_lgd() {
        let p = Portfolio::new(base_case_assets(), 2).unwrap();
        let g = standard_grids(2, 2, 3.0).unwrap();
        assert!(
            estimate_resources(&p, &g, Variant::MultiRotation, Encoding::Linear, ComparatorMode::WeightedSum).is_err()
        );
    }

    #[test]
    fn measured_counts_within_closed_forms() {
        for encoding in [Encoding::Linear, Encoding::Exact] {
            let rep = report(base_case_assets(), 2, Variant::MultiRotation, encoding, ComparatorMode::SFree);
            let built = rep.built.unwrap();
            assert!(built.width <= rep.width_paper_layout);
            assert!(built.comparator_gates as u64 <= rep.comparator_pattern_count);
        }
    }
}
