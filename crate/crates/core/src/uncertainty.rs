//! Builders for the uncertainty-loading operator `U`.
//!
//! Three model variants are supported:
//!
//! * **single factor**: one latent factor register, PD from the one-factor
//!   Vasicek formula (factor weights are not used);
//! * **multi rotation**: one register per factor, and every asset receives one
//!   controlled linear rotation per factor, with the factor weight carried in
//!   the slope of the rotation;
//! * **single rotation**: per-factor registers holding the *weighted* factors
//!   `alpha_i Z_i` on a common value step, an in-place adder that sums them
//!   into a sum register, and one linear rotation per asset driven by the sum.
//!
//! Each variant can load the PD either with the **exact** encoding (one
//! pattern-controlled rotation per joint grid point and asset, which is
//! exponential in the factor qubits) or the **linear** encoding (an affine
//! rotation angle fitted by endpoint secants).
//!
//! Register layout is factors first, then the sum register (single rotation
//! only), then one qubit per asset.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::circuit::{Circuit, Control};
use crate::error::{domain, Error, Result};
use crate::gaussian::{pd_given_y, pdf, ppf, probability_angle, FactorGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    /// Loss given default, in monetary units.
    pub lgd: f64,
    /// Default probability parameter `p0`.
    pub p0: f64,
    /// Sensitivity to the systemic factors, in `[0, 1)`.
    pub rho: f64,
    /// One weight per systemic factor.
    pub alphas: Vec<f64>,
}

impl Asset {
    pub fn new(lgd: f64, p0: f64, rho: f64, alphas: Vec<f64>) -> Self {
        Asset { lgd, p0, rho, alphas }
    }

    fn check(&self, index: usize, n_factors: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::AssetPrecondition { asset: index, reason });
        if !(self.lgd >= 0.0 && self.lgd.is_finite()) {
            return fail(format!("loss given default must be finite and >= 0, got {}", self.lgd));
        }
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return fail(format!("default probability must lie in (0,1), got {}", self.p0));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return fail(format!("sensitivity must lie in [0,1), got {}", self.rho));
        }
        if self.alphas.len() != n_factors {
            return fail(format!("expected {n_factors} factor weights, got {}", self.alphas.len()));
        }
        if self.alphas.iter().any(|a| !a.is_finite()) {
            return fail("factor weights must be finite".into());
        }
        Ok(())
    }

    /// PD as a function of the combined factor `y = sum_i alpha_i z_i`.
    pub(crate) fn pd_of(&self) -> impl Fn(f64) -> f64 {
        let threshold = ppf(self.p0);
        let rho = self.rho;
        move |y| pd_given_y(threshold, rho, y)
    }

    /// Rotation angle `2 asin sqrt(PD)` for factor realization `z`.
    pub fn angle(&self, z: &[f64]) -> f64 {
        let y: f64 = self.alphas.iter().zip(z).map(|(a, z)| a * z).sum();
        probability_angle(self.pd_of()(y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    assets: Vec<Asset>,
    n_factors: usize,
}

impl Portfolio {
    pub fn new(assets: Vec<Asset>, n_factors: usize) -> Result<Self> {
        if assets.is_empty() {
            return domain("a portfolio needs at least one asset");
        }
        if n_factors == 0 {
            return domain("a portfolio needs at least one risk factor");
        }
        for (i, a) in assets.iter().enumerate() {
            a.check(i, n_factors)?;
        }
        Ok(Portfolio { assets, n_factors })
    }

    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    pub fn lgds(&self) -> Vec<f64> {
        self.assets.iter().map(|a| a.lgd).collect()
    }

    /// The weight vector shared by all assets, if there is one.
    pub fn shared_alphas(&self) -> Option<&[f64]> {
        let first = &self.assets[0].alphas;
        self.assets.iter().all(|a| alphas_match(&a.alphas, first)).then_some(first.as_slice())
    }
}

fn alphas_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Exact,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SingleFactor,
    MultiRotation,
    SingleRotation,
}

/// The loading circuit together with its register layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCircuit {
    pub circuit: Circuit,
    pub variant: Variant,
    pub encoding: Encoding,
    pub factor_qubits: Vec<Range<usize>>,
    /// Sum register (single rotation only; empty when every weight is zero).
    pub sum_qubits: Option<Range<usize>>,
    pub asset_qubits: Vec<usize>,
    pub ancilla_qubits: Vec<usize>,
    /// Number of linear-rotation blocks acting on asset qubits.
    pub linear_rotations: usize,
    pub layout_note: String,
}

impl ModelCircuit {
    pub fn width(&self) -> usize {
        self.circuit.n_qubits()
    }
}

/// Load `probs` (length `2^qubits.len()`, little-endian over `qubits`) as
/// amplitudes `sqrt(p_i)` with pattern-controlled Y rotations, most
/// significant qubit first.
pub fn load_distribution(circuit: &mut Circuit, qubits: &[usize], probs: &[f64]) -> Result<()> {
    let n = qubits.len();
    if probs.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, got: probs.len() });
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return domain("probabilities must be finite and nonnegative");
    }
    for level in (0..n).rev() {
        let block = 1usize << level;
        for prefix in 0..(1usize << (n - 1 - level)) {
            let base = prefix << (level + 1);
            let mass0: f64 = probs[base..base + block].iter().sum();
            let mass1: f64 = probs[base + block..base + 2 * block].iter().sum();
            if mass1 == 0.0 {
                continue;
            }
            let theta = 2.0 * mass1.sqrt().atan2(mass0.sqrt());
            let controls = (level + 1..n)
                .map(|b| Control { qubit: qubits[b], on_one: prefix >> (b - level - 1) & 1 == 1 })
                .collect();
            circuit.cry(theta, qubits[level], controls)?;
        }
    }
    Ok(())
}

/// Affine rotation angle `offset + slope * index`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearRotation {
    pub slope: f64,
    pub offset: f64,
}

impl LinearRotation {
    pub fn angle(&self, index: f64) -> f64 {
        self.offset + self.slope * index
    }
}

/// Endpoint-secant fit of an asset's angle along factor `factor_index`, with
/// every other factor held at the centre of its range.
pub fn fit_linear_rotation(asset: &Asset, factor_index: usize, grids: &[FactorGrid]) -> Result<LinearRotation> {
    if factor_index >= grids.len() || grids.len() != asset.alphas.len() {
        return domain(format!(
            "factor {factor_index} is not valid for {} grids and {} weights",
            grids.len(),
            asset.alphas.len()
        ));
    }
    let mut z: Vec<f64> = grids.iter().map(FactorGrid::midpoint).collect();
    let grid = &grids[factor_index];
    z[factor_index] = grid.z_min();
    let low = asset.angle(&z);
    z[factor_index] = grid.z_max();
    let high = asset.angle(&z);
    Ok(LinearRotation { slope: (high - low) / (grid.len() - 1) as f64, offset: low })
}

/// The multi-factor linear angle realized by the multi-rotation circuit:
/// `sum_f (offset_f + slope_f i_f) - (R - 1) theta(mid)`.
///
/// Each factor's block reproduces its own fit; the correction term makes the
/// combination exact whenever the angle is affine in the combined factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAngle {
    pub constant: f64,
    pub slopes: Vec<f64>,
}

impl LinearAngle {
    pub fn for_asset(asset: &Asset, grids: &[FactorGrid]) -> Result<Self> {
        let fits = (0..grids.len()).map(|f| fit_linear_rotation(asset, f, grids)).collect::<Result<Vec<_>>>()?;
        let mid: Vec<f64> = grids.iter().map(FactorGrid::midpoint).collect();
        let centre = asset.angle(&mid);
        let constant = fits.iter().map(|f| f.offset).sum::<f64>() - (grids.len() as f64 - 1.0) * centre;
        Ok(LinearAngle { constant, slopes: fits.iter().map(|f| f.slope).collect() })
    }

    pub fn angle(&self, indices: &[usize]) -> f64 {
        self.constant + self.slopes.iter().zip(indices).map(|(s, &i)| s * i as f64).sum::<f64>()
    }
}

/// Apply `RY(constant + slope * value(register))` to `target`, one
/// controlled rotation per register bit.
fn linear_rotation_gates(circuit: &mut Circuit, register: &[usize], slope: f64, target: usize) -> Result<()> {
    if slope == 0.0 {
        return Ok(());
    }
    for (bit, &q) in register.iter().enumerate() {
        circuit.cry(slope * (1u64 << bit) as f64, target, vec![Control::one(q)])?;
    }
    Ok(())
}

/// One rotation per basis state of `register`, controlled on that pattern.
fn pattern_rotations(
    circuit: &mut Circuit,
    register: &[usize],
    target: usize,
    angle: impl Fn(usize) -> f64,
) -> Result<()> {
    for pattern in 0..(1usize << register.len()) {
        let theta = angle(pattern);
        if theta == 0.0 {
            continue;
        }
        let controls =
            register.iter().enumerate().map(|(b, &q)| Control { qubit: q, on_one: pattern >> b & 1 == 1 }).collect();
        circuit.cry(theta, target, controls)?;
    }
    Ok(())
}

pub(crate) fn check_grids(portfolio: &Portfolio, grids: &[FactorGrid]) -> Result<()> {
    if grids.len() != portfolio.n_factors() {
        return Err(Error::DimensionMismatch { expected: portfolio.n_factors(), got: grids.len() });
    }
    Ok(())
}

fn consecutive(start: &mut usize, len: usize) -> Range<usize> {
    let r = *start..*start + len;
    *start += len;
    r
}

fn describe(ranges: &[Range<usize>]) -> String {
    ranges
        .iter()
        .map(|r| match r.len() {
            0 => "-".to_string(),
            1 => format!("q{}", r.start),
            _ => format!("q{}-q{}", r.start, r.end - 1),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

const EXACT_NOTE: &str = "exact encoding: one pattern-controlled rotation per joint grid point and asset (exponential in factor qubits, desk-scale oracle)";

/// Split a joint little-endian index over concatenated registers into
/// per-register indices.
fn split_index(joint: usize, widths: &[usize]) -> Vec<usize> {
    let mut shift = 0;
    widths
        .iter()
        .map(|&w| {
            let i = (joint >> shift) & ((1 << w) - 1);
            shift += w;
            i
        })
        .collect()
}

/// Build the single-factor model: one factor register and the one-factor
/// Vasicek PD (the factor weights are ignored).
pub fn build_single_factor(portfolio: &Portfolio, grid: &FactorGrid, encoding: Encoding) -> Result<ModelCircuit> {
    if portfolio.n_factors() != 1 {
        return domain(format!("single-factor model needs R = 1, got R = {}", portfolio.n_factors()));
    }
    let unit: Vec<Asset> = portfolio.assets().iter().map(|a| Asset { alphas: vec![1.0], ..a.clone() }).collect();
    let unit = Portfolio::new(unit, 1)?;
    let mut model = build_multi_rotation(&unit, std::slice::from_ref(grid), encoding)?;
    model.variant = Variant::SingleFactor;
    model.layout_note = model.layout_note.replacen("multi_rotation", "single_factor", 1);
    Ok(model)
}

/// Build the multi-rotation model: one register per factor and, per asset,
/// one linear rotation per factor (or exact pattern rotations).
pub fn build_multi_rotation(portfolio: &Portfolio, grids: &[FactorGrid], encoding: Encoding) -> Result<ModelCircuit> {
    check_grids(portfolio, grids)?;
    let widths: Vec<usize> = grids.iter().map(FactorGrid::n_z).collect();
    let mut next = 0;
    let factor_qubits: Vec<Range<usize>> = widths.iter().map(|&w| consecutive(&mut next, w)).collect();
    let asset_qubits: Vec<usize> = (0..portfolio.len()).map(|k| next + k).collect();
    let mut circuit = Circuit::new(next + portfolio.len())?;

    for (range, grid) in factor_qubits.iter().zip(grids) {
        let qubits: Vec<usize> = range.clone().collect();
        load_distribution(&mut circuit, &qubits, grid.probs())?;
    }

    let all_factor_qubits: Vec<usize> = factor_qubits.iter().flat_map(Range::clone).collect();
    for (asset, &target) in portfolio.assets().iter().zip(&asset_qubits) {
        match encoding {
            Encoding::Exact => pattern_rotations(&mut circuit, &all_factor_qubits, target, |joint| {
                let z: Vec<f64> = split_index(joint, &widths).iter().zip(grids).map(|(&i, g)| g.value(i)).collect();
                asset.angle(&z)
            })?,
            Encoding::Linear => {
                let lin = LinearAngle::for_asset(asset, grids)?;
                if lin.constant != 0.0 {
                    circuit.ry(lin.constant, target)?;
                }
                for (range, &slope) in factor_qubits.iter().zip(&lin.slopes) {
                    let register: Vec<usize> = range.clone().collect();
                    linear_rotation_gates(&mut circuit, &register, slope, target)?;
                }
            }
        }
    }

    let mut layout_note = format!(
        "multi_rotation/{}: factor registers [{}]; assets [{}]; no ancillas",
        encoding_name(encoding),
        describe(&factor_qubits),
        describe(&asset_qubits.iter().map(|&q| q..q + 1).collect::<Vec<_>>()),
    );
    if encoding == Encoding::Exact {
        layout_note.push_str("; ");
        layout_note.push_str(EXACT_NOTE);
    }
    Ok(ModelCircuit {
        circuit,
        variant: Variant::MultiRotation,
        encoding,
        factor_qubits,
        sum_qubits: None,
        asset_qubits,
        ancilla_qubits: Vec::new(),
        linear_rotations: portfolio.len() * grids.len(),
        layout_note,
    })
}

fn encoding_name(e: Encoding) -> &'static str {
    match e {
        Encoding::Exact => "exact",
        Encoding::Linear => "linear",
    }
}

fn bits_for(max_value: usize) -> usize {
    (usize::BITS - max_value.leading_zeros()) as usize
}

/// Discretization of the weighted factors `alpha_i Z_i` on one common value
/// step, so that adding register indices adds values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumGrid {
    /// Common value step `delta`.
    pub step: f64,
    /// Value of the combined factor at sum index 0.
    pub offset: f64,
    /// Number of points per weighted factor.
    pub factor_points: Vec<usize>,
    /// Probabilities per weighted factor (length `factor_points[f]`).
    pub factor_probs: Vec<Vec<f64>>,
    /// Largest reachable sum index.
    pub max_index: usize,
}

impl SumGrid {
    pub fn factor_widths(&self) -> Vec<usize> {
        self.factor_points.iter().map(|&m| bits_for(m - 1)).collect()
    }

    pub fn sum_width(&self) -> usize {
        bits_for(self.max_index)
    }

    /// Combined factor value at sum index `s`.
    pub fn value(&self, s: usize) -> f64 {
        self.offset + self.step * s as f64
    }
}

/// Discretize `alpha_f Z_f` for every factor on the coarsest of the scaled
/// grid steps; the factor with the largest weighted range keeps all of its
/// points and the others get proportionally fewer.
pub fn sum_grid(grids: &[FactorGrid], alphas: &[f64]) -> Result<SumGrid> {
    if grids.len() != alphas.len() || grids.is_empty() {
        return Err(Error::DimensionMismatch { expected: grids.len(), got: alphas.len() });
    }
    let spans: Vec<f64> = grids.iter().zip(alphas).map(|(g, a)| a.abs() * (g.z_max() - g.z_min())).collect();
    let step = grids.iter().zip(&spans).map(|(g, span)| span / (g.len() - 1) as f64).fold(0.0, f64::max);

    let mut factor_points = Vec::with_capacity(grids.len());
    let mut factor_probs = Vec::with_capacity(grids.len());
    let mut offset = 0.0;
    for ((g, &a), span) in grids.iter().zip(alphas).zip(&spans) {
        let centre = a * g.midpoint();
        let points = if step > 0.0 { ((span / step).round() as usize + 1).min(g.len()) } else { 1 };
        let half = (points - 1) as f64 / 2.0;
        let probs = if points == 1 {
            vec![1.0]
        } else {
            let w: Vec<f64> = (0..points).map(|j| pdf(step * (j as f64 - half) / a.abs())).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        };
        offset += centre - step * half;
        factor_points.push(points);
        factor_probs.push(probs);
    }
    let max_index = factor_points.iter().map(|m| m - 1).sum();
    Ok(SumGrid { step, offset, factor_points, factor_probs, max_index })
}

/// Add the constant `2^bit` to `register` when `control` is set, as a ripple
/// of multi-controlled X gates (no ancillas, wraps modulo `2^len`).
pub(crate) fn controlled_add_power(
    circuit: &mut Circuit,
    register: &[usize],
    bit: usize,
    control: Control,
) -> Result<()> {
    for top in (bit..register.len()).rev() {
        let mut controls = vec![control];
        controls.extend(register[bit..top].iter().map(|&q| Control::one(q)));
        circuit.mcx(register[top], controls)?;
    }
    Ok(())
}

/// Build the single-rotation model. Every asset must carry `shared_alphas`.
pub fn build_single_rotation(
    portfolio: &Portfolio,
    grids: &[FactorGrid],
    shared_alphas: &[f64],
    encoding: Encoding,
) -> Result<ModelCircuit> {
    check_grids(portfolio, grids)?;
    for (k, a) in portfolio.assets().iter().enumerate() {
        if !alphas_match(&a.alphas, shared_alphas) {
            return Err(Error::AssetPrecondition {
                asset: k,
                reason: format!(
                    "single-rotation model needs every asset to share the weights {shared_alphas:?}, got {:?}",
                    a.alphas
                ),
            });
        }
    }
    let sg = sum_grid(grids, shared_alphas)?;
    let widths = sg.factor_widths();
    let mut next = 0;
    let factor_qubits: Vec<Range<usize>> = widths.iter().map(|&w| consecutive(&mut next, w)).collect();
    let sum_range = consecutive(&mut next, sg.sum_width());
    let asset_qubits: Vec<usize> = (0..portfolio.len()).map(|k| next + k).collect();
    let mut circuit = Circuit::new(next + portfolio.len())?;
    let sum: Vec<usize> = sum_range.clone().collect();

    for ((range, probs), &w) in factor_qubits.iter().zip(&sg.factor_probs).zip(&widths) {
        let qubits: Vec<usize> = range.clone().collect();
        let mut padded = probs.clone();
        padded.resize(1 << w, 0.0);
        load_distribution(&mut circuit, &qubits, &padded)?;
    }
    let mut adder_gates = 0;
    for range in &factor_qubits {
        for (bit, q) in range.clone().enumerate() {
            let before = circuit.gate_count();
            controlled_add_power(&mut circuit, &sum, bit, Control::one(q))?;
            adder_gates += circuit.gate_count() - before;
        }
    }

    for (asset, &target) in portfolio.assets().iter().zip(&asset_qubits) {
        let pd = asset.pd_of();
        let theta = |s: usize| probability_angle(pd(sg.value(s)));
        match encoding {
            Encoding::Exact => {
                pattern_rotations(&mut circuit, &sum, target, |s| if s <= sg.max_index { theta(s) } else { 0.0 })?
            }
            Encoding::Linear => {
                let offset = theta(0);
                let slope = if sg.max_index > 0 { (theta(sg.max_index) - offset) / sg.max_index as f64 } else { 0.0 };
                if offset != 0.0 {
                    circuit.ry(offset, target)?;
                }
                linear_rotation_gates(&mut circuit, &sum, slope, target)?;
            }
        }
    }

    let mut layout_note = format!(
        "single_rotation/{}: weighted factor registers [{}] with points {:?} on common step {:.6}; sum register [{}] ({} qubits, {} adder gates, 0 ancillas); assets [{}]",
        encoding_name(encoding),
        describe(&factor_qubits),
        sg.factor_points,
        sg.step,
        describe(std::slice::from_ref(&sum_range)),
        sum.len(),
        adder_gates,
        describe(&asset_qubits.iter().map(|&q| q..q + 1).collect::<Vec<_>>()),
    );
    if encoding == Encoding::Exact {
        layout_note.push_str("; exact encoding: one pattern-controlled rotation per sum value and asset");
    }
    Ok(ModelCircuit {
        circuit,
        variant: Variant::SingleRotation,
        encoding,
        factor_qubits,
        sum_qubits: Some(sum_range),
        asset_qubits,
        ancilla_qubits: Vec::new(),
        linear_rotations: portfolio.len(),
        layout_note,
    })
}

/// Build the model for `variant`. Single rotation uses the portfolio's shared
/// weights.
pub fn build_model(
    portfolio: &Portfolio,
    grids: &[FactorGrid],
    variant: Variant,
    encoding: Encoding,
) -> Result<ModelCircuit> {
    match variant {
        Variant::SingleFactor => {
            check_grids(portfolio, grids)?;
            build_single_factor(portfolio, &grids[0], encoding)
        }
        Variant::MultiRotation => build_multi_rotation(portfolio, grids, encoding),
        Variant::SingleRotation => {
            let shared = portfolio.assets()[0].alphas.clone();
            build_single_rotation(portfolio, grids, &shared, encoding)
        }
    }
}
