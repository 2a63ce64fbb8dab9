//! Chebyshev polynomials of the first kind on the zeros of `T_p`.
//!
//! On the `p` nodes `X_{p,k} = cos((2k+1) pi / (2p))` the polynomials
//! `T_0, ..., T_{p-1}` are orthogonal under plain summation, with squared norms
//! `p` for `s = 0` and `p/2` otherwise. Dividing by those norms gives the
//! orthonormal basis used for amplitude readout, and the expansion
//! coefficients of a sampled function are its inner products with that basis.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance accepted by [`oracle_coefficients`].
pub const ORACLE_NORM_TOL: f64 = 1e-9;

/// `T_s(x)` by the three-term recurrence.
pub fn chebyshev_eval(s: usize, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::OutsideDomain(x));
    }
    let (mut prev, mut cur) = (1.0, x);
    if s == 0 {
        return Ok(prev);
    }
    for _ in 1..s {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// The zeros of `T_p`, in decreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrid {
    pub p: usize,
    pub nodes: Vec<f64>,
}

pub fn nodes(p: usize) -> Result<NodeGrid> {
    if p == 0 {
        return Err(Error::EmptyGrid);
    }
    let nodes = (0..p)
        .map(|k| ((2 * k + 1) as f64 * PI / (2 * p) as f64).cos())
        .collect();
    Ok(NodeGrid { p, nodes })
}

/// `T_s` at the `p` nodes, from the closed form `cos((2k+1) s pi / (2p))`.
pub fn eval_at_nodes(s: usize, p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::EmptyGrid);
    }
    let denom = (2 * p) as f64;
    Ok((0..p)
        .map(|k| {
            // Reduce (2k+1)s mod 4p before scaling so large degrees stay exact.
            let num = ((2 * k + 1) as u128 * s as u128 % (4 * p) as u128) as f64;
            (num * PI / denom).cos()
        })
        .collect())
}

/// `sum_k conj(f_k) g_k`.
pub fn discrete_inner_product(f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            actual: g.len(),
        });
    }
    Ok(f.iter().zip(g).map(|(a, b)| a.conj() * b).sum())
}

/// Values of the orthonormal basis function of degree `s` on `p` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    pub s: usize,
    pub p: usize,
    pub values: Vec<f64>,
}

pub fn basis_vector(s: usize, p: usize) -> Result<BasisVector> {
    if p == 0 {
        return Err(Error::EmptyGrid);
    }
    if s >= p {
        return Err(Error::DegreeOutOfRange { degree: s, p });
    }
    let norm = if s == 0 {
        (p as f64).sqrt()
    } else {
        (p as f64 / 2.0).sqrt()
    };
    let values = eval_at_nodes(s, p)?.into_iter().map(|v| v / norm).collect();
    Ok(BasisVector { s, p, values })
}

/// A single or multi-index `(s_1, ..., s_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChebyshevIndex(pub Vec<usize>);

impl ChebyshevIndex {
    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<usize>> for ChebyshevIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Multi-indices of total degree exactly `m` with `s_i <= dims[i] - 1`, in
/// lexicographic order.
pub fn shell_indices(dims: &[usize], m: usize) -> Vec<ChebyshevIndex> {
    fn rec(dims: &[usize], remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<ChebyshevIndex>) {
        match dims {
            [] => {
                if remaining == 0 {
                    out.push(ChebyshevIndex(prefix.clone()));
                }
            }
            [last] => {
                if remaining < *last {
                    prefix.push(remaining);
                    out.push(ChebyshevIndex(prefix.clone()));
                    prefix.pop();
                }
            }
            [first, rest @ ..] => {
                let rest_cap: usize = rest.iter().map(|p| p - 1).sum();
                let lo = remaining.saturating_sub(rest_cap);
                let hi = remaining.min(first - 1);
                if lo > hi {
                    return;
                }
                for s in lo..=hi {
                    prefix.push(s);
                    rec(rest, remaining - s, prefix, out);
                    prefix.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    if dims.contains(&0) {
        return out;
    }
    rec(dims, m, &mut Vec::with_capacity(dims.len()), &mut out);
    out
}

/// All multi-indices of total degree `<= m`, shell by shell.
pub fn indices_up_to(dims: &[usize], m: usize) -> Vec<ChebyshevIndex> {
    (0..=m).flat_map(|shell| shell_indices(dims, shell)).collect()
}

/// Largest total degree on a grid, `sum (p_i - 1)`.
pub fn max_total_degree(dims: &[usize]) -> usize {
    dims.iter().map(|p| p.saturating_sub(1)).sum()
}

/// Tensor-product basis values on the flattened grid (dimension 1 slowest).
pub fn tensor_basis(index: &ChebyshevIndex, dims: &[usize]) -> Result<Vec<f64>> {
    if index.dim() != dims.len() {
        return Err(Error::LengthMismatch {
            expected: dims.len(),
            actual: index.dim(),
        });
    }
    let mut out = vec![1.0];
    for (&s, &p) in index.0.iter().zip(dims) {
        let factor = basis_vector(s, p)?.values;
        out = out.iter().flat_map(|a| factor.iter().map(move |b| a * b)).collect();
    }
    Ok(out)
}

/// Expansion coefficients keyed by multi-index, in shell order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub dims: Vec<usize>,
    pub entries: Vec<(ChebyshevIndex, Complex64)>,
}

impl CoefficientSet {
    pub fn new(dims: Vec<usize>) -> Self {
        Self {
            dims,
            entries: Vec::new(),
        }
    }

    /// Appends an entry after checking its range against `dims`.
    pub fn insert(&mut self, index: ChebyshevIndex, value: Complex64) -> Result<()> {
        if index.dim() != self.dims.len() {
            return Err(Error::LengthMismatch {
                expected: self.dims.len(),
                actual: index.dim(),
            });
        }
        for (&s, &p) in index.0.iter().zip(&self.dims) {
            if s >= p {
                return Err(Error::DegreeOutOfRange { degree: s, p });
            }
        }
        self.entries.push((index, value));
        Ok(())
    }

    pub fn get(&self, index: &ChebyshevIndex) -> Option<Complex64> {
        self.entries.iter().find(|(i, _)| i == index).map(|(_, v)| *v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.entries.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Coefficient energy over indices of total degree `<= m`.
    pub fn partial_sum(&self, m: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(i, _)| i.total_degree() <= m)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Entries of total degree `<= m`.
    pub fn truncated(&self, m: usize) -> CoefficientSet {
        CoefficientSet {
            dims: self.dims.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(i, _)| i.total_degree() <= m)
                .cloned()
                .collect(),
        }
    }
}

/// Exact coefficients `a_s = <T_s, values>` for every index with total degree
/// `<= max_total_degree` (capped at the full grid order).
///
/// This is the classical reference every quantum estimate is checked against.
pub fn oracle_coefficients(values: &[Complex64], dims: &[usize], max_total_degree: usize) -> Result<CoefficientSet> {
    let len: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::EmptyGrid);
    }
    if values.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: values.len(),
        });
    }
    let norm_sqr: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    if (norm_sqr - 1.0).abs() > ORACLE_NORM_TOL {
        return Err(Error::NotNormalized { norm_sqr });
    }

    let m = max_total_degree.min(self::max_total_degree(dims));
    let mut set = CoefficientSet::new(dims.to_vec());
    for index in indices_up_to(dims, m) {
        let basis = tensor_basis(&index, dims)?;
        let a: Complex64 = basis.iter().zip(values).map(|(t, v)| v * t).sum();
        set.entries.push((index, a));
    }
    Ok(set)
}

/// Pointwise sum of `a * basis` over the set; not renormalized.
pub fn reconstruct(coeffs: &CoefficientSet) -> Result<Vec<Complex64>> {
    let len: usize = coeffs.dims.iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (index, a) in &coeffs.entries {
        let basis = tensor_basis(index, &coeffs.dims)?;
        for (o, t) in out.iter_mut().zip(&basis) {
            *o += a * t;
        }
    }
    Ok(out)
}

/// Uniform error bound `2V / (pi r (P - r)^r)` for a truncation at order `P`
/// of a function whose `r`-th derivative has total variation `V`.
pub fn truncation_error_bound(variation: f64, smoothness: usize, order: usize) -> Result<f64> {
    if smoothness < 1 || order <= smoothness {
        return Err(Error::InvalidTruncation { order, smoothness });
    }
    if variation.is_nan() || variation < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "total variation must be non-negative, got {variation}"
        )));
    }
    let r = smoothness as f64;
    Ok(2.0 * variation / (PI * r * ((order - smoothness) as f64).powi(smoothness as i32)))
}
