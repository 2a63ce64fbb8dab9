//! Shell-by-shell coefficient estimation with a cumulative-energy stopping rule.
//!
//! Coefficients are estimated in shells of increasing total degree. After each
//! completed shell `m` the driver records `A_m = sum |a|^2` over all indices of
//! total degree `<= m` and stops at the first shell with `A_m >= A_c` (or at a
//! fixed order). Grid slot `k` is read as the value at Chebyshev node `k`, so
//! the reconstruction comes back in the caller's slot order.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{self, max_total_degree, shell_indices, ChebyshevIndex, CoefficientSet};
use crate::circuits::{
    build_inner_product_circuit, estimate_from_counts, estimate_from_distribution, Construction, InnerProductJob, Part,
    PartEstimate,
};
use crate::error::{Error, Result};
use crate::statevec::{outcome_distribution, run_circuit, sample_outcomes_with, StateVector};

/// Shots per estimated part used in the reference experiments.
pub const DEFAULT_SHOTS: u64 = 500;

/// Tolerance on the target's squared norm.
pub const TARGET_NORM_TOL: f64 = 1e-9;

/// Largest register the driver accepts.
pub const MAX_REGISTER_QUBITS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Ideal circuits, probabilities read from the statevector.
    Exact,
    /// Ideal circuits, finite shots.
    Ideal,
    /// Gate-level preparation with postselection, finite shots.
    Faithful,
}

impl Mode {
    fn construction(self) -> Construction {
        match self {
            Mode::Exact | Mode::Ideal => Construction::Ideal,
            Mode::Faithful => Construction::Faithful,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// Stop at the first completed shell with `A_m >= A_c`, `A_c` in (0, 1).
    Threshold(f64),
    /// Estimate every shell up to and including this total degree.
    Order(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    /// Qubits per dimension.
    pub qubits: Vec<usize>,
    pub stop: StopRule,
    pub shots_per_part: u64,
    pub mode: Mode,
    pub seed: u64,
    /// Cap on the total degree; defaults to the full grid order.
    pub max_order: Option<usize>,
}

impl TomographyConfig {
    pub fn new(qubits: Vec<usize>, stop: StopRule, mode: Mode) -> Self {
        Self {
            qubits,
            stop,
            shots_per_part: DEFAULT_SHOTS,
            mode,
            seed: 0,
            max_order: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots_per_part = shots;
        self
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = Some(max_order);
        self
    }

    /// Node counts per dimension, `2^{n_i}`.
    pub fn dims(&self) -> Vec<usize> {
        self.qubits.iter().map(|&n| 1usize << n).collect()
    }

    /// Effective total-degree cap.
    pub fn order_cap(&self) -> usize {
        let full = max_total_degree(&self.dims());
        match (self.stop, self.max_order) {
            (StopRule::Order(m), _) => m,
            (StopRule::Threshold(_), Some(cap)) => cap,
            (StopRule::Threshold(_), None) => full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.qubits.is_empty() || self.qubits.contains(&0) {
            return bad("every dimension needs at least one qubit".into());
        }
        let width: usize = self.qubits.iter().sum();
        if width > MAX_REGISTER_QUBITS {
            return bad(format!(
                "{width} register qubits exceeds the limit of {MAX_REGISTER_QUBITS}"
            ));
        }
        let full = max_total_degree(&self.dims());
        match self.stop {
            StopRule::Threshold(a) if !(a > 0.0 && a < 1.0) => {
                return bad(format!("threshold must lie in (0, 1), got {a}"));
            }
            StopRule::Order(m) if m > full => {
                return bad(format!("order {m} exceeds the full grid order {full}"));
            }
            _ => {}
        }
        if let Some(cap) = self.max_order {
            if cap > full {
                return bad(format!("max order {cap} exceeds the full grid order {full}"));
            }
        }
        if self.mode != Mode::Exact && self.shots_per_part == 0 {
            return bad("shots must be at least 1".into());
        }
        Ok(())
    }
}

/// One estimated coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub index: ChebyshevIndex,
    pub re: f64,
    pub im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub shots_used: u64,
    pub preps_succeeded: u64,
    /// Observed prep success rate, averaged over the two parts.
    pub prep_success: f64,
    /// Set when a part was clamped into [-1, 1].
    pub clamped: bool,
}

impl CoefficientEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Standard error of the complex estimate, `sqrt(se_re^2 + se_im^2)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }

    fn from_parts(index: ChebyshevIndex, re: PartEstimate, im: PartEstimate) -> Self {
        let clamp = |v: f64| v.clamp(-1.0, 1.0);
        let clamped = clamp(re.value) != re.value || clamp(im.value) != im.value;
        Self {
            index,
            re: clamp(re.value),
            im: clamp(im.value),
            stderr_re: re.stderr,
            stderr_im: im.stderr,
            shots_used: re.total_shots + im.total_shots,
            preps_succeeded: re.valid_shots + im.valid_shots,
            prep_success: (re.prep_success_rate + im.prep_success_rate) / 2.0,
            clamped,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub coefficients: u64,
    pub circuits_built: u64,
    pub total_shots: u64,
    pub postselection_successes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub coefficients: Vec<CoefficientEstimate>,
    /// `A_m` for every completed shell `m = 0..=stop_order`.
    pub partial_sums: Vec<f64>,
    pub stop_order: usize,
    /// False when a threshold run hit its order cap first.
    pub converged: bool,
    pub reconstruction: Vec<Complex64>,
    pub fidelity: f64,
    pub counters: Counters,
}

impl TomographyResult {
    pub fn coefficient_set(&self, dims: &[usize]) -> CoefficientSet {
        CoefficientSet {
            dims: dims.to_vec(),
            entries: self.coefficients.iter().map(|c| (c.index.clone(), c.value())).collect(),
        }
    }
}

/// Runs the protocol on a normalized target.
pub fn run_qst_cp(target: &[Complex64], config: &TomographyConfig) -> Result<TomographyResult> {
    config.validate()?;
    let dims = config.dims();
    let len: usize = dims.iter().product();
    if target.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: target.len(),
        });
    }
    let norm_sqr: f64 = target.iter().map(|a| a.norm_sqr()).sum();
    if (norm_sqr - 1.0).abs() > TARGET_NORM_TOL {
        return Err(Error::NotNormalized { norm_sqr });
    }
    let norm = norm_sqr.sqrt();
    let payload: Arc<[Complex64]> = target.iter().map(|a| a / norm).collect();

    let cap = config.order_cap();
    let mut coefficients = Vec::new();
    let mut partial_sums = Vec::new();
    let mut counters = Counters::default();
    let mut energy = 0.0;
    let mut converged = matches!(config.stop, StopRule::Order(_));
    let mut stop_order = 0;

    for m in 0..=cap {
        let shell = shell_indices(&dims, m);
        let estimates: Vec<CoefficientEstimate> = shell
            .into_par_iter()
            .map(|index| estimate_coefficient(&payload, config, index))
            .collect::<Result<_>>()?;
        for e in &estimates {
            energy += e.re * e.re + e.im * e.im;
            counters.coefficients += 1;
            counters.circuits_built += 2;
            if config.mode != Mode::Exact {
                counters.total_shots += e.shots_used;
                counters.postselection_successes += e.preps_succeeded;
            }
        }
        coefficients.extend(estimates);
        partial_sums.push(energy);
        stop_order = m;
        if let StopRule::Threshold(a_c) = config.stop {
            if energy >= a_c {
                converged = true;
                break;
            }
        }
    }

    let reconstruction = reconstruct_state(&coefficients, &dims)?;
    let fidelity = match fidelity(&payload, &reconstruction) {
        Ok(f) => f,
        Err(Error::ZeroVector) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(TomographyResult {
        coefficients,
        partial_sums,
        stop_order,
        converged,
        reconstruction,
        fidelity,
        counters,
    })
}

/// Stream id for the `(index, part)` job, so sampled results do not depend on
/// scheduling order.
fn stream_id(index: &ChebyshevIndex, part: Part) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64 ^ u64::from(part == Part::Im);
    for &s in index.degrees() {
        h = splitmix64(h ^ s as u64);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn estimate_part(
    target: &Arc<[Complex64]>,
    config: &TomographyConfig,
    index: &ChebyshevIndex,
    part: Part,
) -> Result<PartEstimate> {
    let job = InnerProductJob {
        target: target.clone(),
        qubits: config.qubits.clone(),
        index: index.clone(),
        part,
        construction: config.mode.construction(),
    };
    let circuit = build_inner_product_circuit(&job)?;
    let state = run_circuit(&circuit, &StateVector::zero(job.n_qubits()))?;
    let model = job.model();
    match config.mode {
        Mode::Exact => {
            let dist = outcome_distribution(&state, &job.measured_qubits())?;
            estimate_from_distribution(&dist, &model, part)
        }
        Mode::Ideal | Mode::Faithful => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream_id(index, part));
            let records = sample_outcomes_with(&state, &job.measured_qubits(), config.shots_per_part, &mut rng)?;
            estimate_from_counts(&records, &model, part)
        }
    }
}

fn estimate_coefficient(
    target: &Arc<[Complex64]>,
    config: &TomographyConfig,
    index: ChebyshevIndex,
) -> Result<CoefficientEstimate> {
    let re = estimate_part(target, config, &index, Part::Re)?;
    let im = estimate_part(target, config, &index, Part::Im)?;
    Ok(CoefficientEstimate::from_parts(index, re, im))
}

/// `A_m` over the estimates: the energy of every index with total degree
/// `<= m`. Fails if any such index on the `dims` grid is missing.
pub fn partial_sum(estimates: &[CoefficientEstimate], dims: &[usize], m: usize) -> Result<f64> {
    for shell in 0..=m {
        for index in shell_indices(dims, shell) {
            if !estimates.iter().any(|e| e.index == index) {
                return Err(Error::MissingCoefficient(index.0));
            }
        }
    }
    Ok(estimates
        .iter()
        .filter(|e| e.index.total_degree() <= m)
        .map(|e| e.re * e.re + e.im * e.im)
        .sum())
}

/// Truncated-series amplitudes on the grid; not renormalized.
pub fn reconstruct_state(estimates: &[CoefficientEstimate], dims: &[usize]) -> Result<Vec<Complex64>> {
    let set = CoefficientSet {
        dims: dims.to_vec(),
        entries: estimates.iter().map(|e| (e.index.clone(), e.value())).collect(),
    };
    chebyshev::reconstruct(&set)
}

/// `|<a/|a|, b/|b|>|^2`.
pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok((overlap.norm_sqr() / (na * nb)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::{basis_vector, oracle_coefficients};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_unit(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn estimate(index: Vec<usize>, re: f64, im: f64) -> CoefficientEstimate {
        CoefficientEstimate {
            index: ChebyshevIndex(index),
            re,
            im,
            stderr_re: 0.0,
            stderr_im: 0.0,
            shots_used: 0,
            preps_succeeded: 0,
            prep_success: 1.0,
            clamped: false,
        }
    }

    #[test]
    fn uniform_target_stops_at_zero() {
        let t: Vec<Complex64> = basis_vector(0, 64)
            .unwrap()
            .values
            .iter()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        let cfg = TomographyConfig::new(vec![3, 3], StopRule::Threshold(0.9), Mode::Exact);
        let r = run_qst_cp(&t, &cfg).unwrap();
        assert_eq!(r.stop_order, 0);
        assert!((r.partial_sums[0] - 1.0).abs() <= 1e-12);
        assert!((r.fidelity - 1.0).abs() <= 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn exact_mode_matches_oracle_and_is_complete_at_full_order() {
        let t = random_unit(32, 5);
        let cfg = TomographyConfig::new(vec![5], StopRule::Order(31), Mode::Exact);
        let r = run_qst_cp(&t, &cfg).unwrap();
        let oracle = oracle_coefficients(&t, &[32], 31).unwrap();
        for (e, (i, a)) in r.coefficients.iter().zip(&oracle.entries) {
            assert_eq!(&e.index, i);
            assert!((e.value() - a).norm() <= 1e-10);
        }
        assert!((r.partial_sums[31] - 1.0).abs() <= 1e-10);
        for (x, y) in r.reconstruction.iter().zip(&t) {
            assert!((x - y).norm() <= 1e-10);
        }
        assert_eq!(r.counters.total_shots, 0);
        assert_eq!(r.counters.circuits_built, 64);
    }

    #[test]
    fn exact_truncation_equals_oracle_truncation() {
        let t = random_unit(64, 9);
        let cfg = TomographyConfig::new(vec![3, 3], StopRule::Order(4), Mode::Exact);
        let r = run_qst_cp(&t, &cfg).unwrap();
        let oracle = chebyshev::reconstruct(&oracle_coefficients(&t, &[8, 8], 4).unwrap()).unwrap();
        for (x, y) in r.reconstruction.iter().zip(&oracle) {
            assert!((x - y).norm() <= 1e-10);
        }
    }

    #[test]
    fn sampled_counters_and_determinism() {
        let t = random_unit(16, 1);
        let cfg = TomographyConfig::new(vec![4], StopRule::Order(5), Mode::Ideal)
            .with_seed(7)
            .with_shots(100);
        let a = run_qst_cp(&t, &cfg).unwrap();
        assert_eq!(a.counters.coefficients, 6);
        assert_eq!(a.counters.total_shots, 2 * 100 * 6);
        assert_eq!(a.counters.postselection_successes, 2 * 100 * 6);
        let b = run_qst_cp(&t, &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| run_qst_cp(&t, &cfg).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn faithful_counts_postselection() {
        let t = random_unit(16, 2);
        let cfg = TomographyConfig::new(vec![4], StopRule::Order(3), Mode::Faithful)
            .with_seed(3)
            .with_shots(2000);
        let r = run_qst_cp(&t, &cfg).unwrap();
        assert_eq!(r.coefficients[0].preps_succeeded, 4000);
        for c in &r.coefficients[1..] {
            let rate = c.preps_succeeded as f64 / c.shots_used as f64;
            assert!((rate - 0.75).abs() < 0.05, "{rate}");
        }
    }

    #[test]
    fn unconverged_threshold_is_flagged() {
        let t = random_unit(16, 3);
        let cfg = TomographyConfig::new(vec![4], StopRule::Threshold(0.999), Mode::Exact).with_max_order(1);
        let r = run_qst_cp(&t, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.stop_order, 1);
    }

    #[test]
    fn config_errors() {
        let t = random_unit(16, 3);
        let bad = [
            TomographyConfig::new(vec![4], StopRule::Threshold(1.5), Mode::Exact),
            TomographyConfig::new(vec![4], StopRule::Threshold(0.0), Mode::Exact),
            TomographyConfig::new(vec![4], StopRule::Order(16), Mode::Exact),
            TomographyConfig::new(vec![4], StopRule::Order(1), Mode::Ideal).with_shots(0),
            TomographyConfig::new(vec![], StopRule::Order(1), Mode::Exact),
        ];
        for cfg in bad {
            assert!(matches!(run_qst_cp(&t, &cfg), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
        let cfg = TomographyConfig::new(vec![4], StopRule::Order(1), Mode::Exact);
        let doubled: Vec<Complex64> = t.iter().map(|x| x * 2.0).collect();
        assert!(matches!(run_qst_cp(&doubled, &cfg), Err(Error::NotNormalized { .. })));
        assert!(matches!(run_qst_cp(&t[..8], &cfg), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn partial_sum_examples() {
        assert_eq!(partial_sum(&[estimate(vec![0], 1.0, 0.0)], &[8], 0).unwrap(), 1.0);
        let est = vec![estimate(vec![0], 0.6, 0.0), estimate(vec![1], 0.0, 0.8)];
        assert!((partial_sum(&est, &[8], 1).unwrap() - 1.0).abs() < 1e-15);
        assert!(partial_sum(&est, &[8], 0).unwrap() <= partial_sum(&est, &[8], 1).unwrap());
        assert!(matches!(partial_sum(&est, &[8], 2), Err(Error::MissingCoefficient(_))));
    }

    #[test]
    fn reconstruct_state_single_coefficient() {
        let r = reconstruct_state(&[estimate(vec![0], 1.0, 0.0)], &[4]).unwrap();
        assert!(r.iter().all(|x| (x.re - 0.5).abs() < 1e-15));
    }

    #[test]
    fn fidelity_examples() {
        let v = random_unit(8, 4);
        assert!((fidelity(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        let e0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e1 = vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)];
        assert_eq!(fidelity(&e0, &e1).unwrap(), 0.0);
        assert!(matches!(
            fidelity(&e0, &[Complex64::new(0.0, 0.0); 2]),
            Err(Error::ZeroVector)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fidelity_invariant_under_phase_and_scale(seed in any::<u64>(), scale in 1e-3f64..1e3, alpha in -7.0f64..7.0) {
            let a = random_unit(16, seed);
            let b = random_unit(16, seed ^ 0xabc);
            let f = fidelity(&a, &b).unwrap();
            let rot = Complex64::from_polar(scale, alpha);
            let b2: Vec<Complex64> = b.iter().map(|x| x * rot).collect();
            let a2: Vec<Complex64> = a.iter().map(|x| x * rot.conj()).collect();
            prop_assert!((fidelity(&a, &b2).unwrap() - f).abs() <= 1e-12);
            prop_assert!((fidelity(&a2, &b).unwrap() - f).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
