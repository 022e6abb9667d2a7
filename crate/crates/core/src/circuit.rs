//! Gate-level circuits over `n` qubits and a dense statevector simulator.
//!
//! Qubit ordering is little-endian: qubit `q` is bit `q` of the basis-state
//! index, so `|q2 q1 q0>` with `q0 = 1` is index 1.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{domain, Error, Result};

/// Widest register the dense simulator will allocate.
pub const MAX_QUBITS: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Z,
    /// Rotation `exp(-i θ Y / 2)`.
    Ry(f64),
}

/// A control line. `on_one == false` means the gate fires when the control
/// qubit is `|0>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub on_one: bool,
}

impl Control {
    pub fn one(qubit: usize) -> Self {
        Control { qubit, on_one: true }
    }

    pub fn zero(qubit: usize) -> Self {
        Control { qubit, on_one: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub controls: Vec<Control>,
}

impl Gate {
    pub fn new(kind: GateKind, target: usize) -> Self {
        Gate { kind, target, controls: Vec::new() }
    }

    pub fn controlled(kind: GateKind, target: usize, controls: Vec<Control>) -> Self {
        Gate { kind, target, controls }
    }

    pub fn adjoint(&self) -> Gate {
        let kind = match self.kind {
            GateKind::Ry(theta) => GateKind::Ry(-theta),
            other => other,
        };
        Gate { kind, target: self.target, controls: self.controls.clone() }
    }

    /// Bit mask of the control qubits and the pattern they must match.
    fn control_mask(&self) -> (usize, usize) {
        self.controls.iter().fold((0, 0), |(mask, pattern), c| {
            let bit = 1usize << c.qubit;
            (mask | bit, if c.on_one { pattern | bit } else { pattern })
        })
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return domain(format!("target qubit {} out of range for width {n_qubits}", self.target));
        }
        if let GateKind::Ry(theta) = self.kind {
            if !theta.is_finite() {
                return domain("rotation angle must be finite");
            }
        }
        let mut seen = 1usize << self.target;
        for c in &self.controls {
            if c.qubit >= n_qubits {
                return domain(format!("control qubit {} out of range for width {n_qubits}", c.qubit));
            }
            let bit = 1usize << c.qubit;
            if seen & bit != 0 {
                return domain(format!("qubit {} used twice in one gate", c.qubit));
            }
            seen |= bit;
        }
        Ok(())
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GateKind::X => write!(f, "x q{}", self.target)?,
            GateKind::Z => write!(f, "z q{}", self.target)?,
            GateKind::Ry(theta) => write!(f, "ry({theta:.12}) q{}", self.target)?,
        }
        if !self.controls.is_empty() {
            let ctrl: Vec<String> =
                self.controls.iter().map(|c| format!("q{}={}", c.qubit, u8::from(c.on_one))).collect();
            write!(f, " ctrl[{}]", ctrl.join(","))?;
        }
        Ok(())
    }
}

/// An ordered list of gates over a fixed number of qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return domain(format!("circuit width must be in 1..={MAX_QUBITS}, got {n_qubits}"));
        }
        Ok(Circuit { n_qubits, gates: Vec::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Number of gates whose kind satisfies `pred`.
    pub fn count_where(&self, pred: impl Fn(&Gate) -> bool) -> usize {
        self.gates.iter().filter(|g| pred(g)).count()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn x(&mut self, target: usize) -> Result<()> {
        self.push(Gate::new(GateKind::X, target))
    }

    pub fn z(&mut self, target: usize) -> Result<()> {
        self.push(Gate::new(GateKind::Z, target))
    }

    pub fn ry(&mut self, theta: f64, target: usize) -> Result<()> {
        self.push(Gate::new(GateKind::Ry(theta), target))
    }

    pub fn cry(&mut self, theta: f64, target: usize, controls: Vec<Control>) -> Result<()> {
        self.push(Gate::controlled(GateKind::Ry(theta), target, controls))
    }

    pub fn mcx(&mut self, target: usize, controls: Vec<Control>) -> Result<()> {
        self.push(Gate::controlled(GateKind::X, target, controls))
    }

    pub fn mcz(&mut self, target: usize, controls: Vec<Control>) -> Result<()> {
        self.push(Gate::controlled(GateKind::Z, target, controls))
    }

    /// Append every gate of `other`, which must not be wider than `self`.
    pub fn extend(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: other.n_qubits });
        }
        self.gates.extend(other.gates.iter().cloned());
        Ok(())
    }

    /// Same gates on a register of `n_qubits >= self.n_qubits()` qubits.
    pub fn widened(&self, n_qubits: usize) -> Result<Circuit> {
        let mut wide = Circuit::new(n_qubits)?;
        wide.extend(self)?;
        Ok(wide)
    }

    /// Text dump, one gate per line.
    pub fn dump(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

/// Reverse gate order and replace every gate by its adjoint.
pub fn inverse(circuit: &Circuit) -> Circuit {
    Circuit { n_qubits: circuit.n_qubits, gates: circuit.gates.iter().rev().map(Gate::adjoint).collect() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return domain(format!("statevector width must be in 1..={MAX_QUBITS}, got {n_qubits}"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amps })
    }

    /// Wrap a normalized amplitude vector whose length is a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return domain(format!("amplitude vector length {len} is not a power of two >= 2"));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return domain(format!("amplitudes are not normalized (norm^2 = {norm})"));
        }
        Ok(Statevector { n_qubits: len.trailing_zeros() as usize, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Apply every gate of `circuit` in place.
    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: circuit.n_qubits });
        }
        for gate in &circuit.gates {
            self.apply_gate(gate);
        }
        Ok(())
    }

    pub(crate) fn apply_gate(&mut self, gate: &Gate) {
        let t = 1usize << gate.target;
        let (mask, pattern) = gate.control_mask();
        let low = t - 1;
        let half = self.amps.len() / 2;
        let amps = &mut self.amps;

        // Walk the indices whose target bit is 0; `j` is the partner with it set.
        let pairs = (0..half).map(|k| ((k & !low) << 1) | (k & low)).filter(|i| i & mask == pattern);
        match gate.kind {
            GateKind::X => pairs.for_each(|i| amps.swap(i, i | t)),
            GateKind::Z => pairs.for_each(|i| amps[i | t] = -amps[i | t]),
            GateKind::Ry(theta) => {
                let (s, c) = (0.5 * theta).sin_cos();
                pairs.for_each(|i| {
                    let (a0, a1) = (amps[i], amps[i | t]);
                    amps[i] = a0 * c - a1 * s;
                    amps[i | t] = a0 * s + a1 * c;
                });
            }
        }
    }

    /// Multiply the amplitude of `|0...0>` by -1.
    pub(crate) fn flip_zero_phase(&mut self) {
        self.amps[0] = -self.amps[0];
    }

    /// Multiply every amplitude whose `qubit` bit is 1 by -1.
    pub(crate) fn flip_phase_on(&mut self, qubit: usize) {
        let bit = 1usize << qubit;
        self.amps.iter_mut().enumerate().filter(|(i, _)| i & bit != 0).for_each(|(_, a)| *a = -*a);
    }
}

/// Run `circuit` on a copy of `state`.
pub fn apply(circuit: &Circuit, state: &Statevector) -> Result<Statevector> {
    let mut out = state.clone();
    out.apply_circuit(circuit)?;
    Ok(out)
}

/// Probability of reading `outcome` on `qubit`.
pub fn marginal_probability(state: &Statevector, qubit: usize, outcome: bool) -> Result<f64> {
    if qubit >= state.n_qubits {
        return domain(format!("qubit {qubit} out of range for width {}", state.n_qubits));
    }
    let bit = 1usize << qubit;
    Ok(state.amps.iter().enumerate().filter(|(i, _)| (i & bit != 0) == outcome).map(|(_, a)| a.norm_sqr()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub zeros: u64,
    pub ones: u64,
}

impl Counts {
    pub fn shots(&self) -> u64 {
        self.zeros + self.ones
    }
}

/// Measure `qubit` `shots` times.
///
/// Shots are drawn from a ChaCha8 stream seeded with `seed`, which is
/// reproducible across platforms and crate versions.
pub fn sample(state: &Statevector, qubit: usize, shots: u64, seed: u64) -> Result<Counts> {
    let p = marginal_probability(state, qubit, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_bernoulli(p, shots, &mut rng)
}

pub(crate) fn sample_bernoulli<R: Rng>(p: f64, shots: u64, rng: &mut R) -> Result<Counts> {
    if shots == 0 {
        return domain("at least one shot is required");
    }
    let ones = (0..shots).filter(|_| rng.gen::<f64>() < p).count() as u64;
    Ok(Counts { zeros: shots - ones, ones })
}
