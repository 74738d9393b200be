//! Reference coefficients: tensor Gauss–Legendre projection, Monte Carlo
//! projection, and the statistics derived from a chaos expansion.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::pcbasis::{BasisSpec, MultiIndex, MultiIndexSet};
use crate::quadrature::GaussLegendre;
use crate::sampling::SampleSet;
use crate::{Error, Result};

/// Largest tensor grid the quadrature oracle will attempt.
pub const TENSOR_NODE_LIMIT: f64 = 1e7;
const CHUNK: usize = 1024;

/// Chaos coefficients keyed by multi-index.
#[derive(Debug, Clone)]
pub struct CoefficientVector {
    basis: BasisSpec,
    values: Vec<f64>,
}

/// Same indices in the same order with the same values; index-set metadata
/// is ignored.
impl PartialEq for CoefficientVector {
    fn eq(&self, other: &Self) -> bool {
        self.basis.indices() == other.basis.indices() && self.values == other.values
    }
}

impl CoefficientVector {
    /// `values[k]` belongs to `basis.indices()[k]`.
    pub fn new(basis: BasisSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coefficient {v}"
            )));
        }
        Ok(Self { basis, values })
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coefficient of `alpha`, or `None` if it is not in the basis.
    pub fn get(&self, alpha: &MultiIndex) -> Option<f64> {
        self.basis
            .indices()
            .iter()
            .position(|a| a == alpha)
            .map(|k| self.values[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.basis.indices().iter().zip(self.values.iter().copied())
    }

    fn as_map(&self) -> BTreeMap<&MultiIndex, f64> {
        self.iter().collect()
    }

    /// Evaluates the expansion at `y`.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let psi = self.basis.eval_all(y)?;
        Ok(psi.iter().zip(&self.values).map(|(a, b)| a * b).sum())
    }

    /// `alpha,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha,value")?;
        for (alpha, v) in self.iter() {
            writeln!(w, "{alpha},{v}")?;
        }
        Ok(())
    }

    /// Reads the format of [`write_csv`](Self::write_csv). Rows may come in
    /// any order; the zero multi-index must be present.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut entries: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        let mut dim = None;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("alpha") || line.starts_with('#') {
                continue;
            }
            let (a, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected `alpha,value`, got `{line}`")))?;
            let alpha: MultiIndex = a.trim().parse()?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad coefficient `{v}`")))?;
            if *dim.get_or_insert(alpha.dim()) != alpha.dim() {
                return Err(Error::Parse("multi-indices of mixed dimension".into()));
            }
            if entries.insert(alpha, value).is_some() {
                return Err(Error::Parse("duplicate multi-index".into()));
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("no coefficients".into()))?;
        let set = MultiIndexSet::from_indices(dim, entries.keys().cloned().collect())?;
        let basis = BasisSpec::new(set)?;
        let values = basis.indices().iter().map(|a| entries[a]).collect();
        Self::new(basis, values)
    }
}

/// Projection `c_α = E[u ψ_α]` by a `q_per_dim^d` tensor Gauss–Legendre
/// rule. Exact when `u ψ_α` is a polynomial of degree ≤ 2q−1 in each
/// variable.
pub fn tensor_quadrature_coeffs<F>(
    forward: F,
    basis: &BasisSpec,
    q_per_dim: usize,
) -> Result<CoefficientVector>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let d = basis.dim();
    if q_per_dim == 0 {
        return Err(Error::InvalidArgument("q_per_dim must be positive".into()));
    }
    let nodes_f = (q_per_dim as f64).powi(d as i32);
    if nodes_f > TENSOR_NODE_LIMIT {
        return Err(Error::QuadratureBudget {
            nodes: nodes_f,
            limit: TENSOR_NODE_LIMIT,
        });
    }
    let total = q_per_dim.pow(d as u32);
    let rule = GaussLegendre::new(q_per_dim);
    let half_w: Vec<f64> = rule.weights.iter().map(|w| 0.5 * w).collect();

    let node = |mut k: usize| -> (Vec<f64>, f64) {
        let mut y = vec![0.0; d];
        let mut w = 1.0;
        for yi in y.iter_mut() {
            let j = k % q_per_dim;
            k /= q_per_dim;
            *yi = rule.nodes[j];
            w *= half_w[j];
        }
        (y, w)
    };

    // Chunks are summed independently and combined in chunk order, so the
    // result does not depend on the thread count.
    let n_chunks = total.div_ceil(CHUNK);
    let partials = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; basis.len()];
            for k in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let (y, w) = node(k);
                let u = forward(&y)?;
                let psi = basis.eval_all(&y)?;
                for (a, p) in acc.iter_mut().zip(&psi) {
                    *a += w * u * p;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; basis.len()];
    for p in partials {
        for (v, x) in values.iter_mut().zip(p) {
            *v += x;
        }
    }
    CoefficientVector::new(basis.clone(), values)
}

/// Sample-average projection `c_α = (1/N) Σ_i u_i ψ_α(y_i)`.
pub fn mc_coeffs(
    samples: &SampleSet,
    values: &[f64],
    basis: &BasisSpec,
) -> Result<CoefficientVector> {
    if samples.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            got: values.len(),
        });
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut c = vec![0.0; basis.len()];
    for (y, u) in samples.points().iter().zip(values) {
        let psi = basis.eval_all(y)?;
        for (a, p) in c.iter_mut().zip(&psi) {
            *a += u * p;
        }
    }
    let n = samples.len() as f64;
    c.iter_mut().for_each(|a| *a /= n);
    CoefficientVector::new(basis.clone(), c)
}

/// `(mean, std_dev)` of the expansion: `c_0` and `√Σ_{α≠0} c_α²`.
pub fn statistics(c: &CoefficientVector) -> (f64, f64) {
    let mut mean = 0.0;
    let mut var = 0.0;
    for (alpha, v) in c.iter() {
        if alpha.is_zero() {
            mean = v;
        } else {
            var += v * v;
        }
    }
    (mean, var.sqrt())
}

/// `‖c − c_ref‖₂` over the union of both index sets.
pub fn rms_error(c: &CoefficientVector, c_ref: &CoefficientVector) -> f64 {
    let mut diff: BTreeMap<&MultiIndex, f64> = c.as_map();
    for (alpha, v) in c_ref.iter() {
        *diff.entry(alpha).or_insert(0.0) -= v;
    }
    diff.values().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖c − c_ref‖₂ / ‖c_ref‖₂`.
pub fn relative_rms_error(c: &CoefficientVector, c_ref: &CoefficientVector) -> f64 {
    let norm = c_ref.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    rms_error(c, c_ref) / norm
}

/// Sample mean and unbiased sample standard deviation.
pub fn mc_statistics(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(
            "standard deviation needs at least two values".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}
