//! Dense statevector simulation.
//!
//! Basis index `k = sum_j b_j 2^j` with qubit 0 the least significant bit.
//! All public operations are pure: they take a state by reference and return a
//! new one.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|norm^2 - 1|` for states and `Prepare` payloads.
pub const NORM_TOL: f64 = 1e-12;

/// A normalized pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros basis state `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    /// The computational basis state `|index>`.
    ///
    /// Panics if `index >= 2^n_qubits`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amplitudes }
    }

    /// Wraps an amplitude vector, checking its length and normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n_qubits = log2_exact(amplitudes.len())?;
        let norm_sqr = norm_sqr(&amplitudes);
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    /// `<self|other>`, conjugating `self`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check_qubit(&self, index: usize) -> Result<()> {
        if index >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    pub(crate) fn apply_in_place(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        apply_controlled(&mut self.amplitudes, gate, 0, 0);
        Ok(())
    }
}

pub(crate) fn norm_sqr(values: &[Complex64]) -> f64 {
    values.iter().map(|a| a.norm_sqr()).sum()
}

pub(crate) fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// One operation of a circuit.
///
/// `Phase(angle)` is `diag(1, e^{i angle})`; `S` is `Phase(pi/2)`.
/// `Controlled` fires when the control qubit holds `control_value`, so
/// `control_value = false` is an anti-control. Controls nest.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOp {
    Hadamard(usize),
    PhaseS(usize),
    PhaseSInverse(usize),
    Phase {
        target: usize,
        angle: f64,
    },
    Controlled {
        inner: Box<GateOp>,
        control: usize,
        control_value: bool,
    },
    /// Unitary whose first column is `amplitudes`: it maps the all-zeros
    /// configuration of `targets` to `sum_t amplitudes[t] |t>`, where
    /// `t = sum_j bit(targets[j]) 2^j`.
    Prepare {
        targets: Vec<usize>,
        amplitudes: Arc<[Complex64]>,
    },
}

impl GateOp {
    pub fn controlled(self, control: usize, control_value: bool) -> GateOp {
        GateOp::Controlled {
            inner: Box::new(self),
            control,
            control_value,
        }
    }

    /// The inverse for the single-qubit gates; `None` for `Prepare`.
    pub fn inverse(&self) -> Option<GateOp> {
        Some(match self {
            GateOp::Hadamard(q) => GateOp::Hadamard(*q),
            GateOp::PhaseS(q) => GateOp::PhaseSInverse(*q),
            GateOp::PhaseSInverse(q) => GateOp::PhaseS(*q),
            GateOp::Phase { target, angle } => GateOp::Phase {
                target: *target,
                angle: -angle,
            },
            GateOp::Controlled {
                inner,
                control,
                control_value,
            } => inner.inverse()?.controlled(*control, *control_value),
            GateOp::Prepare { .. } => return None,
        })
    }

    /// Every qubit the gate touches, controls included.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            GateOp::Controlled { inner, control, .. } => {
                let mut q = inner.qubits();
                q.push(*control);
                q
            }
            other => other.targets(),
        }
    }

    fn targets(&self) -> Vec<usize> {
        match self {
            GateOp::Hadamard(q) | GateOp::PhaseS(q) | GateOp::PhaseSInverse(q) => vec![*q],
            GateOp::Phase { target, .. } => vec![*target],
            GateOp::Controlled { inner, .. } => inner.targets(),
            GateOp::Prepare { targets, .. } => targets.clone(),
        }
    }

    pub(crate) fn validate(&self, n_qubits: usize) -> Result<()> {
        let in_range = |index: usize| {
            if index >= n_qubits {
                Err(Error::QubitOutOfRange { index, n_qubits })
            } else {
                Ok(())
            }
        };
        match self {
            GateOp::Hadamard(q) | GateOp::PhaseS(q) | GateOp::PhaseSInverse(q) => in_range(*q),
            GateOp::Phase { target, angle } => {
                in_range(*target)?;
                if !angle.is_finite() {
                    return Err(Error::NonFiniteAngle(*angle));
                }
                Ok(())
            }
            GateOp::Controlled { inner, control, .. } => {
                in_range(*control)?;
                if inner.qubits().contains(control) {
                    return Err(Error::ControlOverlapsTarget(*control));
                }
                inner.validate(n_qubits)
            }
            GateOp::Prepare { targets, amplitudes } => {
                let mut seen = 0usize;
                for &t in targets {
                    in_range(t)?;
                    if seen & (1 << t) != 0 {
                        return Err(Error::DuplicateTarget(t));
                    }
                    seen |= 1 << t;
                }
                let expected = 1usize << targets.len();
                if amplitudes.len() != expected {
                    return Err(Error::LengthMismatch {
                        expected,
                        actual: amplitudes.len(),
                    });
                }
                let norm_sqr = norm_sqr(amplitudes);
                if (norm_sqr - 1.0).abs() > NORM_TOL {
                    return Err(Error::NotNormalized { norm_sqr });
                }
                Ok(())
            }
        }
    }
}

/// Applies `gate` to every basis index `i` with `i & mask == value`.
fn apply_controlled(amps: &mut [Complex64], gate: &GateOp, mask: usize, value: usize) {
    match gate {
        GateOp::Controlled {
            inner,
            control,
            control_value,
        } => {
            let bit = 1 << control;
            let v = if *control_value { bit } else { 0 };
            apply_controlled(amps, inner, mask | bit, value | v);
        }
        GateOp::Hadamard(q) => {
            let bit = 1 << q;
            for i in 0..amps.len() {
                if i & bit != 0 || i & mask != value {
                    continue;
                }
                let (a, b) = (amps[i], amps[i | bit]);
                amps[i] = (a + b) * FRAC_1_SQRT_2;
                amps[i | bit] = (a - b) * FRAC_1_SQRT_2;
            }
        }
        GateOp::PhaseS(q) => apply_diagonal(amps, *q, Complex64::i(), mask, value),
        GateOp::PhaseSInverse(q) => apply_diagonal(amps, *q, -Complex64::i(), mask, value),
        GateOp::Phase { target, angle } => {
            apply_diagonal(amps, *target, Complex64::from_polar(1.0, *angle), mask, value)
        }
        GateOp::Prepare { targets, amplitudes } => apply_prepare(amps, targets, amplitudes, mask, value),
    }
}

fn apply_diagonal(amps: &mut [Complex64], q: usize, phase: Complex64, mask: usize, value: usize) {
    let mask = mask | (1 << q);
    let value = value | (1 << q);
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask == value {
            *a *= phase;
        }
    }
}

/// Householder construction `U = R D` with `D = diag(alpha, 1, ...)`,
/// `alpha = psi_0 / |psi_0|`, and `R` the reflection swapping `alpha e_0` and
/// `psi`. Then `U e_0 = psi` exactly and `U` is unitary on the whole block.
fn apply_prepare(amps: &mut [Complex64], targets: &[usize], psi: &[Complex64], mask: usize, value: usize) {
    let dim = psi.len();
    let offsets: Vec<usize> = (0..dim)
        .map(|t| {
            targets
                .iter()
                .enumerate()
                .filter(|(j, _)| t >> j & 1 == 1)
                .map(|(_, &q)| 1usize << q)
                .sum()
        })
        .collect();
    let target_mask: usize = targets.iter().map(|&q| 1usize << q).sum();

    let alpha = if psi[0].norm() > 0.0 {
        psi[0] / psi[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    // v = alpha e_0 - psi; |v|^2 = 2 - 2 |psi_0| for unit psi.
    let mut v: Vec<Complex64> = psi.iter().map(|c| -c).collect();
    v[0] += alpha;
    let v_norm_sqr = norm_sqr(&v);
    let reflect = v_norm_sqr > 1e-30;

    let mut block = vec![Complex64::new(0.0, 0.0); dim];
    for base in 0..amps.len() {
        if base & target_mask != 0 || base & mask != value {
            continue;
        }
        for (slot, &off) in block.iter_mut().zip(&offsets) {
            *slot = amps[base | off];
        }
        block[0] *= alpha;
        if reflect {
            let proj: Complex64 = v.iter().zip(&block).map(|(a, b)| a.conj() * b).sum();
            let scale = proj * (2.0 / v_norm_sqr);
            for (slot, vi) in block.iter_mut().zip(&v) {
                *slot -= vi * scale;
            }
        }
        for (slot, &off) in block.iter().zip(&offsets) {
            amps[base | off] = *slot;
        }
    }
}

/// An ordered gate list over a fixed register width.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    /// Appends a gate after checking it against the register width.
    pub fn push(&mut self, gate: GateOp) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.ops.push(gate);
        Ok(self)
    }

    pub fn gate_count(&self) -> usize {
        self.ops.len()
    }

    /// ASAP layer count, treating every gate as occupying all of its qubits.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        for op in &self.ops {
            let qubits = op.qubits();
            let layer = qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for q in qubits {
                level[q] = layer;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }
}

/// Returns the image of `state` under `gate`.
pub fn apply_gate(state: &StateVector, gate: &GateOp) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_in_place(gate)?;
    Ok(out)
}

/// Applies the circuit's gates left to right.
pub fn run_circuit(circuit: &Circuit, initial: &StateVector) -> Result<StateVector> {
    if circuit.n_qubits != initial.n_qubits {
        return Err(Error::QubitCountMismatch {
            circuit: circuit.n_qubits,
            state: initial.n_qubits,
        });
    }
    let mut state = initial.clone();
    for op in &circuit.ops {
        state.apply_in_place(op)?;
    }
    Ok(state)
}

/// Born-rule probability that `qubit` reads `outcome`.
pub fn marginal_probability(state: &StateVector, qubit: usize, outcome: u8) -> Result<f64> {
    state.check_qubit(qubit)?;
    let want = usize::from(outcome != 0);
    Ok(state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| i >> qubit & 1 == want)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// Projects `qubit` onto `outcome` and renormalizes.
///
/// The measured qubit stays in the register, fixed at `outcome`. Returns the
/// post-measurement state and the branch probability.
pub fn postselect(state: &StateVector, qubit: usize, outcome: u8) -> Result<(StateVector, f64)> {
    let probability = marginal_probability(state, qubit, outcome)?;
    if probability <= 0.0 {
        return Err(Error::ImpossiblePostselection { qubit, outcome });
    }
    let want = usize::from(outcome != 0);
    let scale = probability.sqrt().recip();
    let amplitudes = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if i >> qubit & 1 == want {
                a * scale
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok((
        StateVector {
            n_qubits: state.n_qubits,
            amplitudes,
        },
        probability,
    ))
}

/// Exact joint distribution of the listed qubits.
///
/// Entry `o` is the probability of outcome `o = sum_i bit(qubits[i]) 2^i`.
pub fn outcome_distribution(state: &StateVector, qubits: &[usize]) -> Result<Vec<f64>> {
    for &q in qubits {
        state.check_qubit(q)?;
    }
    let mut dist = vec![0.0; 1 << qubits.len()];
    for (i, a) in state.amplitudes.iter().enumerate() {
        let o = qubits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &q)| acc | ((i >> q & 1) << j));
        dist[o] += a.norm_sqr();
    }
    Ok(dist)
}

/// Counts for one observed bitstring.
///
/// Character `i` of `bits` is the outcome of the `i`-th listed qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub bits: String,
    pub count: u64,
}

impl ShotRecord {
    /// The bit of the `i`-th measured qubit.
    pub fn bit(&self, i: usize) -> bool {
        self.bits.as_bytes()[i] == b'1'
    }
}

/// Draws `shots` samples of the listed qubits from a seeded generator.
pub fn sample_outcomes(state: &StateVector, qubits: &[usize], shots: u64, seed: u64) -> Result<Vec<ShotRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_outcomes_with(state, qubits, shots, &mut rng)
}

/// As [`sample_outcomes`], drawing from a caller-provided generator.
pub fn sample_outcomes_with<R: Rng + ?Sized>(
    state: &StateVector,
    qubits: &[usize],
    shots: u64,
    rng: &mut R,
) -> Result<Vec<ShotRecord>> {
    let dist = outcome_distribution(state, qubits)?;
    Ok(sample_distribution(&dist, qubits.len(), shots, rng))
}

pub(crate) fn sample_distribution<R: Rng + ?Sized>(
    dist: &[f64],
    width: usize,
    shots: u64,
    rng: &mut R,
) -> Vec<ShotRecord> {
    // Rounding can leave tiny negative or all-zero weights; clamp them away.
    let weights: Vec<f64> = dist.iter().map(|p| p.max(0.0)).collect();
    let sampler = WeightedIndex::new(&weights).expect("distribution has positive mass");
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(sampler.sample(rng)).or_default() += 1;
    }
    let mut records: Vec<ShotRecord> = counts
        .into_iter()
        .map(|(o, count)| ShotRecord {
            bits: (0..width).map(|j| if o >> j & 1 == 1 { '1' } else { '0' }).collect(),
            count,
        })
        .collect();
    records.sort_by(|a, b| a.bits.cmp(&b.bits));
    records
}
