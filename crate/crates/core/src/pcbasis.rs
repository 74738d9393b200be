//! Multi-index sets and the orthonormal multivariate Legendre basis.
//!
//! Basis functions are tensor products `ψ_α(y) = ∏ ψ_{α_i}(y_i)` of
//! univariate Legendre polynomials normalized so that `E[ψ_j ψ_k] = δ_jk`
//! under the uniform density 1/2 on [-1, 1].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-dimension polynomial degrees `(α_1, …, α_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zero(d: usize) -> Self {
        Self(vec![0; d])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `‖α‖₁`.
    pub fn total_order(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    /// Number of active dimensions `‖α‖₀`.
    pub fn active_dims(&self) -> usize {
        self.0.iter().filter(|&&a| a > 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }
}

/// Dash-joined degrees, e.g. `1-0-2`.
impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .split('-')
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|e| Error::Parse(format!("bad multi-index '{s}': {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

/// Canonical ordering key: total order first, then reverse-colexicographic
/// on `(α_d, …, α_1)` so that indices living on low-numbered variables come
/// first within each order.
fn canonical_cmp(a: &MultiIndex, b: &MultiIndex) -> std::cmp::Ordering {
    a.total_order()
        .cmp(&b.total_order())
        .then_with(|| a.0.iter().rev().cmp(b.0.iter().rev()))
}

/// Ordered set of multi-indices defining a PC basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    dim: usize,
    order: usize,
    nu_limit: usize,
    prefix_limit: Option<usize>,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest total order present in the set.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nu_limit(&self) -> usize {
        self.nu_limit
    }

    /// Number of order-(p+1) indices appended by [`prefix_truncate`], if any.
    pub fn prefix_limit(&self) -> Option<usize> {
        self.prefix_limit
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Builds a set from arbitrary indices (deduplicated, canonically sorted).
    pub fn from_indices(dim: usize, mut indices: Vec<MultiIndex>) -> Result<Self> {
        for a in &indices {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        indices.sort_by(canonical_cmp);
        indices.dedup();
        let order = indices
            .iter()
            .map(MultiIndex::total_order)
            .max()
            .unwrap_or(0);
        let nu_limit = indices
            .iter()
            .map(MultiIndex::active_dims)
            .max()
            .unwrap_or(0);
        Ok(Self {
            dim,
            order,
            nu_limit,
            prefix_limit: None,
            indices,
        })
    }
}

/// `(p+d)! / (p! d!)` in exact integer arithmetic.
pub fn cardinality(p: usize, d: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension d must be ≥ 1".into()));
    }
    // C(p+d, k) built up with k = min(p, d); each partial product is itself
    // a binomial coefficient, so the division is exact.
    let k = p.min(d);
    let n = p + d;
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc
            .checked_mul((n - k + i) as u128)
            .ok_or(Error::CardinalityOverflow { p, d })?
            / i as u128;
    }
    usize::try_from(acc).map_err(|_| Error::CardinalityOverflow { p, d })
}

/// Indices of total order exactly `order` in `d` variables, at most `nu`
/// of them active, in canonical order.
fn indices_of_order(order: usize, d: usize, nu: usize) -> Vec<MultiIndex> {
    fn rec(
        pos: usize,
        left: u32,
        active: usize,
        nu: usize,
        cur: &mut Vec<u32>,
        out: &mut Vec<MultiIndex>,
    ) {
        if pos + 1 == cur.len() {
            let extra = usize::from(left > 0);
            if active + extra <= nu {
                cur[pos] = left;
                out.push(MultiIndex(cur.clone()));
                cur[pos] = 0;
            }
            return;
        }
        for a in 0..=left {
            let act = active + usize::from(a > 0);
            if act > nu {
                break;
            }
            cur[pos] = a;
            rec(pos + 1, left - a, act, nu, cur, out);
        }
        cur[pos] = 0;
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    rec(0, order as u32, 0, nu, &mut cur, &mut out);
    out.sort_by(canonical_cmp);
    out
}

/// Total-order set `Λ_{p,d} = {α : ‖α‖₁ ≤ p}`.
pub fn total_order_set(p: usize, d: usize) -> Result<MultiIndexSet> {
    restricted_set(p, d, d)
}

/// `Λ_{p,ν} = {α : ‖α‖₁ ≤ p, ‖α‖₀ ≤ ν}`.
pub fn restricted_set(p: usize, nu: usize, d: usize) -> Result<MultiIndexSet> {
    if nu > d {
        return Err(Error::InvalidArgument(format!("nu = {nu} exceeds d = {d}")));
    }
    let size = cardinality(p, d)?;
    let mut indices = Vec::with_capacity(if nu == d { size } else { 0 });
    for order in 0..=p {
        indices.extend(indices_of_order(order, d, nu));
    }
    Ok(MultiIndexSet {
        dim: d,
        order: p,
        nu_limit: nu,
        prefix_limit: None,
        indices,
    })
}

/// Keeps every index of order ≤ `keep_through_order`, then appends the first
/// `extra_count` indices of order `keep_through_order + 1` in canonical order.
pub fn prefix_truncate(
    set: &MultiIndexSet,
    keep_through_order: usize,
    extra_count: usize,
) -> Result<MultiIndexSet> {
    let mut indices: Vec<MultiIndex> = set
        .indices
        .iter()
        .filter(|a| a.total_order() <= keep_through_order)
        .cloned()
        .collect();
    if extra_count == 0 {
        let order = indices
            .iter()
            .map(MultiIndex::total_order)
            .max()
            .unwrap_or(0);
        return Ok(MultiIndexSet {
            dim: set.dim,
            order,
            nu_limit: set.nu_limit,
            prefix_limit: None,
            indices,
        });
    }
    let next: Vec<&MultiIndex> = set
        .indices
        .iter()
        .filter(|a| a.total_order() == keep_through_order + 1)
        .collect();
    if extra_count > next.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {extra_count} indices of order {} but the set has only {}",
            keep_through_order + 1,
            next.len()
        )));
    }
    indices.extend(next.into_iter().take(extra_count).cloned());
    Ok(MultiIndexSet {
        dim: set.dim,
        order: keep_through_order + 1,
        nu_limit: set.nu_limit,
        prefix_limit: Some(extra_count),
        indices,
    })
}

/// A PC basis: an index set whose first element is the zero multi-index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    index_set: MultiIndexSet,
}

impl BasisSpec {
    pub fn new(index_set: MultiIndexSet) -> Result<Self> {
        match index_set.indices.first() {
            Some(a) if a.is_zero() => Ok(Self { index_set }),
            _ => Err(Error::InvalidArgument(
                "basis must start with the zero multi-index".into(),
            )),
        }
    }

    pub fn total_order(p: usize, d: usize) -> Result<Self> {
        Self::new(total_order_set(p, d)?)
    }

    /// `Λ_{p,d}` truncated to order `p` plus the first `extra` indices of
    /// order `p + 1`.
    pub fn with_prefix(p: usize, d: usize, extra: usize) -> Result<Self> {
        if extra == 0 {
            return Self::total_order(p, d);
        }
        let full = total_order_set(p + 1, d)?;
        Self::new(prefix_truncate(&full, p, extra)?)
    }

    pub fn index_set(&self) -> &MultiIndexSet {
        &self.index_set
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.index_set.indices
    }

    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.index_set.dim
    }

    pub fn order(&self) -> usize {
        self.index_set.order
    }

    /// Position of each multi-index in this basis.
    pub fn position_map(&self) -> HashMap<&MultiIndex, usize> {
        self.indices()
            .iter()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect()
    }

    /// Evaluates every basis function at `y`.
    pub fn eval_all(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if y.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: y.len(),
            });
        }
        let p = self.order();
        let table: Vec<Vec<f64>> = y.iter().map(|&yi| univariate_table(p, yi)).collect();
        Ok(self
            .indices()
            .iter()
            .map(|a| {
                a.0.iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(i, &k)| table[i][k as usize])
                    .product()
            })
            .collect())
    }
}

/// `ψ_0(y), …, ψ_p(y)` by the three-term recurrence
/// `(k+1) L_{k+1} = (2k+1) y L_k − k L_{k−1}`, scaled by `√(2k+1)`.
pub fn univariate_table(p: usize, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(p + 1);
    let mut l0 = 1.0;
    let mut l1 = y;
    out.push(1.0);
    if p >= 1 {
        out.push(3f64.sqrt() * y);
    }
    for k in 1..p {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0) * y * l1 - kf * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
        out.push((2.0 * kf + 3.0).sqrt() * l2);
    }
    out
}

/// Orthonormal Legendre polynomial `ψ_k(y) = √(2k+1) L_k(y)`.
///
/// Defined for all real `y`; the orthonormality only holds on [-1, 1].
pub fn eval_univariate(k: usize, y: f64) -> f64 {
    univariate_table(k, y)[k]
}

/// `ψ_α(y) = ∏_i ψ_{α_i}(y_i)`.
pub fn eval_basis(alpha: &MultiIndex, y: &[f64]) -> Result<f64> {
    if y.len() != alpha.dim() {
        return Err(Error::DimensionMismatch {
            expected: alpha.dim(),
            got: y.len(),
        });
    }
    Ok(alpha
        .0
        .iter()
        .zip(y)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, &yi)| eval_univariate(k as usize, yi))
        .product())
}

/// `‖ψ_α‖_∞ = ∏_i √(2α_i + 1)`, attained at the corners of [-1, 1]^d.
pub fn sup_norm(alpha: &MultiIndex) -> f64 {
    alpha
        .0
        .iter()
        .map(|&a| (2.0 * a as f64 + 1.0).sqrt())
        .product()
}

/// `c_{p,d} = (ln 3 / 2) · p / ln P` with `P = (p+d)!/(p!d!)`.
pub fn coherence_exponent(p: usize, d: usize) -> Result<f64> {
    let big_p = cardinality(p, d)?;
    if big_p <= 1 {
        return Err(Error::InvalidArgument(
            "coherence exponent undefined for a basis of size 1".into(),
        ));
    }
    Ok(0.5 * 3f64.ln() * p as f64 / (big_p as f64).ln())
}
