//! Gate-level Chebyshev basis preparation and Hadamard-test overlap circuits.
//!
//! # Basis preparation
//!
//! With `theta = s pi / 2^n` and `phi = theta / 2`, the circuit
//!
//! ```text
//! H(anc); H(r_j) for all j;
//! Phase(-theta 2^j)(r_j), Phase(+2 theta 2^j)(r_j) controlled on anc, for all j;
//! Phase(2 phi)(anc); H(anc)
//! ```
//!
//! leaves the register, in the `anc = 0` branch, proportional to
//! `e^{i phi} cos(k theta + phi) = e^{i phi} T_s(X_{2^n, k})`. That branch has
//! squared norm 1/2 for `s != 0` and 1 for `s = 0`.
//!
//! # Overlap circuits
//!
//! Layout for a job over `d` dimensions with `N = sum n_i` register qubits:
//! register qubits `0..N` (dimension 1 on the most significant block), then
//! the prep ancillas `N..N+d` (faithful construction only), then the test
//! ancilla. Measured bits are reported test ancilla first, then prep ancillas
//! in dimension order.
//!
//! * [`Construction::Ideal`] prepares the normalized basis state directly with
//!   a `Prepare` primitive, so the test ancilla reads `0` with probability
//!   `(1 + Re a)/2` (or `(1 - Im a)/2` with the S stage).
//! * [`Construction::Faithful`] uses the gate-level preparation above. The
//!   prep branch then carries amplitude `gamma = prod_i gamma_i`
//!   (`gamma_i = 1/sqrt 2` for `s_i != 0`), and the joint probability of
//!   reading all zeros is `P00 = (1 + gamma^2)/4 + (gamma/2) Re a`, which the
//!   estimator inverts. A `Phase(sum phi_i)` on the test ancilla cancels the
//!   `e^{i phi}` factor that the preparation leaves on the anti-controlled
//!   branch; without it the interference term would read `Re(e^{-i phi} a)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{tensor_basis, ChebyshevIndex};
use crate::error::{Error, Result};
use crate::statevec::{Circuit, GateOp, ShotRecord};

/// Degree and width of one single-variable basis preparation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisPrepSpec {
    pub s: usize,
    pub n: usize,
    pub theta: f64,
    pub phi: f64,
}

impl BasisPrepSpec {
    pub fn new(s: usize, n: usize) -> Result<Self> {
        if n == 0 || n >= usize::BITS as usize - 1 {
            return Err(Error::InvalidConfig(format!("register width {n} unsupported")));
        }
        if s >= 1 << n {
            return Err(Error::DegreeOutOfRange { degree: s, p: 1 << n });
        }
        let phi = s as f64 * PI / (1u64 << (n + 1)) as f64;
        Ok(Self {
            s,
            n,
            theta: 2.0 * phi,
            phi,
        })
    }

    /// `theta 2^j` reduced modulo `2 pi`, computed in integers.
    fn scaled_theta(&self, j: usize) -> f64 {
        let period = 1u128 << (self.n + 1);
        let units = (self.s as u128) << j;
        (units % period) as f64 * PI / (1u128 << self.n) as f64
    }
}

/// Appends the basis preparation for `spec` on `register` (least significant
/// qubit first) with prep ancilla `ancilla`; every gate is wrapped in
/// `control` when given.
pub fn append_basis_prep(
    circuit: &mut Circuit,
    spec: &BasisPrepSpec,
    ancilla: usize,
    register: &[usize],
    control: Option<(usize, bool)>,
) -> Result<()> {
    if register.len() != spec.n {
        return Err(Error::LengthMismatch {
            expected: spec.n,
            actual: register.len(),
        });
    }
    let wrap = |g: GateOp| match control {
        Some((c, v)) => g.controlled(c, v),
        None => g,
    };
    circuit.push(wrap(GateOp::Hadamard(ancilla)))?;
    for &q in register {
        circuit.push(wrap(GateOp::Hadamard(q)))?;
    }
    for (j, &q) in register.iter().enumerate() {
        let angle = spec.scaled_theta(j);
        circuit.push(wrap(GateOp::Phase {
            target: q,
            angle: -angle,
        }))?;
        circuit.push(wrap(
            GateOp::Phase {
                target: q,
                angle: 2.0 * angle,
            }
            .controlled(ancilla, true),
        ))?;
    }
    circuit.push(wrap(GateOp::Phase {
        target: ancilla,
        angle: 2.0 * spec.phi,
    }))?;
    circuit.push(wrap(GateOp::Hadamard(ancilla)))?;
    Ok(())
}

/// Stand-alone preparation circuit: register on qubits `0..n`, ancilla on `n`.
pub fn build_basis_prep(spec: &BasisPrepSpec) -> Result<Circuit> {
    let mut circuit = Circuit::new(spec.n + 1);
    let register: Vec<usize> = (0..spec.n).collect();
    append_basis_prep(&mut circuit, spec, spec.n, &register, None)?;
    Ok(circuit)
}

/// Which part of the overlap a circuit measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
}

/// How the basis state is prepared inside the overlap circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Ideal,
    Faithful,
}

/// One overlap measurement `<T_index | target>`.
#[derive(Debug, Clone)]
pub struct InnerProductJob {
    /// Normalized register amplitudes, flattened with dimension 1 slowest.
    pub target: Arc<[Complex64]>,
    /// Qubits per dimension.
    pub qubits: Vec<usize>,
    pub index: ChebyshevIndex,
    pub part: Part,
    pub construction: Construction,
}

impl InnerProductJob {
    pub fn register_width(&self) -> usize {
        self.qubits.iter().sum()
    }

    pub fn n_qubits(&self) -> usize {
        self.register_width() + self.prep_ancillas().len() + 1
    }

    pub fn test_ancilla(&self) -> usize {
        self.register_width() + self.prep_ancillas().len()
    }

    pub fn prep_ancillas(&self) -> Vec<usize> {
        match self.construction {
            Construction::Ideal => Vec::new(),
            Construction::Faithful => {
                let n = self.register_width();
                (n..n + self.qubits.len()).collect()
            }
        }
    }

    /// Test ancilla followed by the prep ancillas.
    pub fn measured_qubits(&self) -> Vec<usize> {
        let mut q = vec![self.test_ancilla()];
        q.extend(self.prep_ancillas());
        q
    }

    /// Register qubits of dimension `dim`, least significant first.
    pub fn dimension_qubits(&self, dim: usize) -> Vec<usize> {
        let offset: usize = self.qubits[dim + 1..].iter().sum();
        (offset..offset + self.qubits[dim]).collect()
    }

    fn specs(&self) -> Result<Vec<BasisPrepSpec>> {
        self.index
            .degrees()
            .iter()
            .zip(&self.qubits)
            .map(|(&s, &n)| BasisPrepSpec::new(s, n))
            .collect()
    }

    pub fn model(&self) -> OutcomeModel {
        OutcomeModel::new(&self.index, self.construction)
    }
}

/// Builds the Hadamard-test circuit for `job`; run it on `|0...0>`.
pub fn build_inner_product_circuit(job: &InnerProductJob) -> Result<Circuit> {
    let width = job.register_width();
    if job.qubits.is_empty() {
        return Err(Error::InvalidConfig("at least one dimension is required".into()));
    }
    if job.index.dim() != job.qubits.len() {
        return Err(Error::LengthMismatch {
            expected: job.qubits.len(),
            actual: job.index.dim(),
        });
    }
    if job.target.len() != 1usize << width {
        return Err(Error::LengthMismatch {
            expected: 1 << width,
            actual: job.target.len(),
        });
    }
    let specs = job.specs()?;
    let test = job.test_ancilla();
    let register: Vec<usize> = (0..width).collect();
    let mut circuit = Circuit::new(job.n_qubits());

    circuit.push(GateOp::Hadamard(test))?;
    match job.construction {
        Construction::Ideal => {
            let dims: Vec<usize> = job.qubits.iter().map(|&n| 1usize << n).collect();
            let basis: Arc<[Complex64]> = tensor_basis(&job.index, &dims)?
                .into_iter()
                .map(|t| Complex64::new(t, 0.0))
                .collect();
            circuit.push(
                GateOp::Prepare {
                    targets: register.clone(),
                    amplitudes: basis,
                }
                .controlled(test, false),
            )?;
        }
        Construction::Faithful => {
            let ancillas = job.prep_ancillas();
            for (dim, spec) in specs.iter().enumerate() {
                let qubits = job.dimension_qubits(dim);
                append_basis_prep(&mut circuit, spec, ancillas[dim], &qubits, Some((test, false)))?;
            }
        }
    }
    circuit.push(
        GateOp::Prepare {
            targets: register,
            amplitudes: job.target.clone(),
        }
        .controlled(test, true),
    )?;
    if job.construction == Construction::Faithful {
        let phase: f64 = specs.iter().map(|s| s.phi).sum();
        if phase != 0.0 {
            circuit.push(GateOp::Phase {
                target: test,
                angle: phase,
            })?;
        }
    }
    if job.part == Part::Im {
        circuit.push(GateOp::PhaseS(test))?;
    }
    circuit.push(GateOp::Hadamard(test))?;
    Ok(circuit)
}

/// Maps outcome statistics of an overlap circuit back to `Re a` or `Im a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeModel {
    pub construction: Construction,
    /// Squared norm of the postselected prep branch; 1 for the ideal
    /// construction.
    pub gamma_sqr: f64,
}

impl OutcomeModel {
    pub fn new(index: &ChebyshevIndex, construction: Construction) -> Self {
        let gamma_sqr = match construction {
            Construction::Ideal => 1.0,
            Construction::Faithful => index
                .degrees()
                .iter()
                .map(|&s| if s == 0 { 1.0 } else { 0.5 })
                .product(),
        };
        Self {
            construction,
            gamma_sqr,
        }
    }

    /// Probability that every prep ancilla reads 0.
    pub fn prep_success_probability(&self) -> f64 {
        (1.0 + self.gamma_sqr) / 2.0
    }

    /// Inverts the outcome probability: the conditional `P(test=0 | preps=0)`
    /// for the ideal construction, the joint `P(test=0, preps=0)` for the
    /// faithful one.
    pub fn invert(&self, part: Part, p: f64) -> f64 {
        let re_like = match self.construction {
            Construction::Ideal => 2.0 * p - 1.0,
            Construction::Faithful => {
                let gamma = self.gamma_sqr.sqrt();
                (4.0 * p - self.gamma_sqr - 1.0) / (2.0 * gamma)
            }
        };
        match part {
            Part::Re => re_like,
            Part::Im => -re_like,
        }
    }

    /// Absolute slope of [`invert`](Self::invert) in `p`.
    pub fn slope(&self) -> f64 {
        match self.construction {
            Construction::Ideal => 2.0,
            Construction::Faithful => 2.0 / self.gamma_sqr.sqrt(),
        }
    }
}

/// One estimated part with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartEstimate {
    pub value: f64,
    pub stderr: f64,
    pub prep_success_rate: f64,
    /// Shots whose prep ancillas all read 0.
    pub valid_shots: u64,
    pub total_shots: u64,
}

/// Estimates one part from sampled records (test bit first, then preps).
pub fn estimate_from_counts(records: &[ShotRecord], model: &OutcomeModel, part: Part) -> Result<PartEstimate> {
    let mut total = 0u64;
    let mut valid = 0u64;
    let mut zeros = 0u64;
    for r in records {
        total += r.count;
        let preps_ok = r.bits.bytes().skip(1).all(|b| b == b'0');
        if preps_ok {
            valid += r.count;
            if !r.bit(0) {
                zeros += r.count;
            }
        }
    }
    if valid == 0 {
        return Err(Error::NoValidShots);
    }
    let (p, n) = match model.construction {
        Construction::Ideal => (zeros as f64 / valid as f64, valid),
        Construction::Faithful => (zeros as f64 / total as f64, total),
    };
    let stderr = model.slope() * (p * (1.0 - p) / n as f64).sqrt();
    Ok(PartEstimate {
        value: model.invert(part, p),
        stderr,
        prep_success_rate: valid as f64 / total as f64,
        valid_shots: valid,
        total_shots: total,
    })
}

/// Infinite-shot estimate from an exact outcome distribution, indexed as
/// returned by [`crate::statevec::outcome_distribution`] over
/// [`InnerProductJob::measured_qubits`].
pub fn estimate_from_distribution(dist: &[f64], model: &OutcomeModel, part: Part) -> Result<PartEstimate> {
    // Outcomes with every prep bit 0 are 0 and 1 (the test bit is bit 0).
    let valid = dist[0] + dist.get(1).copied().unwrap_or(0.0);
    if valid <= 0.0 {
        return Err(Error::NoValidShots);
    }
    let p = match model.construction {
        Construction::Ideal => dist[0] / valid,
        Construction::Faithful => dist[0],
    };
    Ok(PartEstimate {
        value: model.invert(part, p),
        stderr: 0.0,
        prep_success_rate: valid,
        valid_shots: 0,
        total_shots: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::{basis_vector, oracle_coefficients};
    use crate::statevec::{outcome_distribution, postselect, run_circuit, StateVector};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(len: usize, seed: u64) -> Arc<[Complex64]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn prep_register(s: usize, n: usize) -> (Vec<Complex64>, f64) {
        let spec = BasisPrepSpec::new(s, n).unwrap();
        let out = run_circuit(&build_basis_prep(&spec).unwrap(), &StateVector::zero(n + 1)).unwrap();
        let (post, p) = postselect(&out, n, 0).unwrap();
        (post.amplitudes()[..1 << n].to_vec(), p)
    }

    #[test]
    fn spec_angles() {
        let spec = BasisPrepSpec::new(5, 3).unwrap();
        assert_eq!(2.0 * spec.phi, spec.theta);
        assert_abs_diff_eq!(spec.theta, 5.0 * PI / 8.0, epsilon = 1e-15);
        assert!(BasisPrepSpec::new(8, 3).is_err());
    }

    #[test]
    fn s0_prep_gives_uniform_register() {
        let (reg, p) = prep_register(0, 3);
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);
        for a in reg {
            assert!((a - Complex64::new(8f64.sqrt().recip(), 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn prep_matches_oracle_up_to_phase() {
        for n in 1..=8 {
            let p = 1usize << n;
            for s in 0..p {
                let (reg, prob) = prep_register(s, n);
                let want = basis_vector(s, p).unwrap().values;
                let overlap: Complex64 = reg.iter().zip(&want).map(|(a, t)| a * t).sum();
                assert!((overlap.norm() - 1.0).abs() <= 1e-10, "n={n} s={s}");
                let expect_p = if s == 0 { 1.0 } else { 0.5 };
                assert!((prob - expect_p).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn prep_size_is_affine_in_width() {
        for n in 1..=12 {
            let c = build_basis_prep(&BasisPrepSpec::new(1, n).unwrap()).unwrap();
            assert_eq!(c.gate_count(), 3 * n + 3);
            assert!(c.depth() <= 2 * n + 4);
        }
    }

    fn job(
        target: Arc<[Complex64]>,
        qubits: Vec<usize>,
        index: Vec<usize>,
        part: Part,
        c: Construction,
    ) -> InnerProductJob {
        InnerProductJob {
            target,
            qubits,
            index: ChebyshevIndex(index),
            part,
            construction: c,
        }
    }

    fn exact(job: &InnerProductJob) -> (Vec<f64>, PartEstimate) {
        let circuit = build_inner_product_circuit(job).unwrap();
        let out = run_circuit(&circuit, &StateVector::zero(job.n_qubits())).unwrap();
        let dist = outcome_distribution(&out, &job.measured_qubits()).unwrap();
        let est = estimate_from_distribution(&dist, &job.model(), job.part).unwrap();
        (dist, est)
    }

    #[test]
    fn ideal_self_overlap_reads_zero_with_certainty() {
        let t: Arc<[Complex64]> = basis_vector(3, 16)
            .unwrap()
            .values
            .into_iter()
            .map(|x| Complex64::new(x, 0.0))
            .collect();
        let (dist, est) = exact(&job(t.clone(), vec![4], vec![3], Part::Re, Construction::Ideal));
        assert_abs_diff_eq!(dist[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-12);
        let (dist, _) = exact(&job(t, vec![4], vec![5], Part::Re, Construction::Ideal));
        assert_abs_diff_eq!(dist[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn faithful_joint_probability_for_zero_real_part() {
        // Target = i * T_2: Re a_2 = 0, Im a_2 = 1.
        let t: Arc<[Complex64]> = basis_vector(2, 8)
            .unwrap()
            .values
            .into_iter()
            .map(|x| Complex64::new(0.0, x))
            .collect();
        let (dist, est) = exact(&job(t.clone(), vec![3], vec![2], Part::Re, Construction::Faithful));
        assert_abs_diff_eq!(dist[0], 3.0 / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.prep_success_rate, 0.75, epsilon = 1e-12);
        let (_, est) = exact(&job(t, vec![3], vec![2], Part::Im, Construction::Faithful));
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infinite_shot_estimates_match_oracle() {
        for (seed, qubits) in [(1u64, vec![3usize]), (2, vec![5]), (3, vec![2, 3]), (4, vec![3, 3])] {
            let dims: Vec<usize> = qubits.iter().map(|&n| 1usize << n).collect();
            let len: usize = dims.iter().product();
            let t = random_unit(len, seed);
            let oracle = oracle_coefficients(&t, &dims, 4).unwrap();
            for (index, a) in &oracle.entries {
                for c in [Construction::Ideal, Construction::Faithful] {
                    let re = exact(&job(t.clone(), qubits.clone(), index.0.clone(), Part::Re, c)).1;
                    let im = exact(&job(t.clone(), qubits.clone(), index.0.clone(), Part::Im, c)).1;
                    assert!((re.value - a.re).abs() <= 1e-10, "{c:?} {index:?}");
                    assert!((im.value - a.im).abs() <= 1e-10, "{c:?} {index:?}");
                    let want = OutcomeModel::new(index, c).prep_success_probability();
                    assert!((re.prep_success_rate - want).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn counts_estimators() {
        let ideal = OutcomeModel::new(&ChebyshevIndex(vec![1]), Construction::Ideal);
        let all_zero = [ShotRecord {
            bits: "0".into(),
            count: 500,
        }];
        let est = estimate_from_counts(&all_zero, &ideal, Part::Re).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.stderr, 0.0);

        let faithful = OutcomeModel::new(&ChebyshevIndex(vec![1]), Construction::Faithful);
        assert_eq!(faithful.gamma_sqr, 0.5);
        // P00 = 3/8 exactly: 300 of 800 shots at "00".
        let rec = [
            ShotRecord {
                bits: "00".into(),
                count: 300,
            },
            ShotRecord {
                bits: "10".into(),
                count: 300,
            },
            ShotRecord {
                bits: "01".into(),
                count: 100,
            },
            ShotRecord {
                bits: "11".into(),
                count: 100,
            },
        ];
        let est = estimate_from_counts(&rec, &faithful, Part::Re).unwrap();
        assert_abs_diff_eq!(est.value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.prep_success_rate, 0.75, epsilon = 1e-15);

        let none = [ShotRecord {
            bits: "01".into(),
            count: 10,
        }];
        assert!(matches!(
            estimate_from_counts(&none, &faithful, Part::Re),
            Err(Error::NoValidShots)
        ));
    }

    #[test]
    fn faithful_reduces_to_ideal_when_gamma_is_one() {
        let idx = ChebyshevIndex(vec![0, 0]);
        let f = OutcomeModel::new(&idx, Construction::Faithful);
        let i = OutcomeModel::new(&idx, Construction::Ideal);
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            for part in [Part::Re, Part::Im] {
                assert_eq!(f.invert(part, p), i.invert(part, p));
            }
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let t = random_unit(8, 0);
        assert!(build_inner_product_circuit(&job(t.clone(), vec![4], vec![0], Part::Re, Construction::Ideal)).is_err());
        assert!(build_inner_product_circuit(&job(t, vec![3], vec![0, 0], Part::Re, Construction::Ideal)).is_err());
    }
}
