//! Random inputs, measurement matrices and coherence diagnostics.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{dot, DenseMatrix};
use crate::pcbasis::{self, BasisSpec, MultiIndex, MultiIndexSet};
use crate::{Error, Result};

/// `n` points in `[-1, 1]^d`. Row `i` is a pure function of `(seed, i)`, so
/// a smaller draw is always a row-prefix of a larger one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub d: usize,
    pub seed: u64,
    /// Index of the first row within the seeded stream.
    pub stream_position: usize,
    points: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn from_points(d: usize, seed: u64, points: Vec<Vec<f64>>) -> Result<Self> {
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: p.len(),
                });
            }
            if p.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                return Err(Error::InvalidArgument("sample outside [-1, 1]".into()));
            }
        }
        Ok(Self {
            d,
            seed,
            stream_position: 0,
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn prefix(&self, n: usize) -> Self {
        Self {
            d: self.d,
            seed: self.seed,
            stream_position: self.stream_position,
            points: self.points[..n.min(self.len())].to_vec(),
        }
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            d: self.d,
            seed: self.seed,
            stream_position: self.stream_position,
            points: rows.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }
}

/// The `index`-th point of the stream for `seed`: ChaCha8 keyed by `seed`,
/// stream number `index`, mapped from [0, 1) by `2u − 1`.
pub fn sample_point(d: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

/// `n` i.i.d. uniform points on `[-1, 1]^d`.
pub fn draw_samples(d: usize, n: usize, seed: u64) -> SampleSet {
    let points = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_point(d, seed, i))
        .collect();
    SampleSet {
        d,
        seed,
        stream_position: 0,
        points,
    }
}

/// `Ψ[i][j] = ψ_{α_j}(y_i)` with the column ℓ2 norms as weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    pub values: DenseMatrix,
    pub basis: BasisSpec,
    pub column_weights: Vec<f64>,
    /// Seed of the samples the rows came from, when known.
    pub seed: Option<u64>,
}

impl MeasurementMatrix {
    /// Wraps a raw matrix (e.g. identity test matrices) with computed weights.
    pub fn from_matrix(values: DenseMatrix, basis: BasisSpec) -> Result<Self> {
        if values.ncols() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: values.ncols(),
            });
        }
        let column_weights = column_norms(&values);
        Ok(Self {
            values,
            basis,
            column_weights,
            seed: None,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.values.column(j)
    }

    /// Sub-matrix on a subset of rows; weights are recomputed.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let values = self.values.select_rows(rows);
        let column_weights = column_norms(&values);
        Self {
            values,
            basis: self.basis.clone(),
            column_weights,
            seed: self.seed,
        }
    }

    /// CSV layout: a `# d=.. n=.. p=.. seed=..` header, a row naming each
    /// column by its multi-index, then one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            w,
            "# d={} n={} p={} seed={}",
            self.basis.dim(),
            self.nrows(),
            self.ncols(),
            seed
        )?;
        let names: Vec<String> = self.basis.indices().iter().map(|a| a.to_string()).collect();
        writeln!(w, "{}", names.join(","))?;
        for i in 0..self.nrows() {
            let row: Vec<String> = (0..self.ncols())
                .map(|j| self.get(i, j).to_string())
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))??;
        let mut seed = None;
        if header.starts_with('#') {
            for tok in header.trim_start_matches('#').split_whitespace() {
                if let Some(v) = tok.strip_prefix("seed=") {
                    seed = v.parse().ok();
                }
            }
            header = lines
                .next()
                .ok_or_else(|| Error::Parse("missing column header".into()))??;
        }
        let indices = header
            .split(',')
            .map(str::parse::<MultiIndex>)
            .collect::<Result<Vec<_>>>()?;
        let d = indices.first().map_or(0, MultiIndex::dim);
        let set = MultiIndexSet::from_indices(d, indices.clone())?;
        if set.indices() != indices.as_slice() {
            return Err(Error::Parse(
                "matrix columns are not in canonical basis order".into(),
            ));
        }
        let basis = BasisSpec::new(set)?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(parse_row(&line)?);
        }
        let values = DenseMatrix::from_rows(&rows)?;
        let mut m = Self::from_matrix(values, basis)?;
        m.seed = seed;
        Ok(m)
    }
}

pub(crate) fn parse_row(line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number '{t}': {e}")))
        })
        .collect()
}

fn column_norms(m: &DenseMatrix) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| dot(m.column(j), m.column(j)).sqrt())
        .collect()
}

pub fn assemble_measurement(basis: &BasisSpec, samples: &SampleSet) -> Result<MeasurementMatrix> {
    if samples.d != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: samples.d,
        });
    }
    let rows: Vec<Vec<f64>> = samples
        .points()
        .par_iter()
        .map(|y| basis.eval_all(y))
        .collect::<Result<_>>()?;
    let values = if rows.is_empty() {
        DenseMatrix::zeros(0, basis.len())
    } else {
        DenseMatrix::from_rows(&rows)?
    };
    let mut m = MeasurementMatrix::from_matrix(values, basis.clone())?;
    m.seed = Some(samples.seed);
    Ok(m)
}

/// Largest absolute normalized inner product between two distinct columns.
pub fn mutual_coherence(m: &MeasurementMatrix) -> Result<f64> {
    let p = m.ncols();
    if p < 2 {
        return Err(Error::InvalidArgument(
            "coherence needs at least two columns".into(),
        ));
    }
    if let Some(j) = m.column_weights.iter().position(|&w| w <= 0.0) {
        return Err(Error::ZeroColumn { column: j });
    }
    // Max over rows of the Gram matrix; each row is independent, and max is
    // order-insensitive, so the parallel reduction is deterministic.
    let mu = (0..p)
        .into_par_iter()
        .map(|j| {
            let cj = m.column(j);
            let wj = m.column_weights[j];
            ((j + 1)..p)
                .map(|k| dot(cj, m.column(k)).abs() / (wj * m.column_weights[k]))
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(mu.min(1.0))
}

/// Tail bound on the coherence of a random Legendre measurement matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceTailBound {
    /// `r = 2 √(ζ P^{4c} ln P / n)`
    pub r: f64,
    /// `Prob[μ ≥ r/(1−r)] ≤ 4 P^{2−2ζ}`
    pub prob_bound: f64,
    /// `r/(1−r)`, the coherence level the probability refers to.
    pub coherence_level: f64,
    /// Whether `r ≤ 1/2`, the range where the bound holds.
    pub applicable: bool,
}

/// `P^{4 c_{p,d}}`, which equals `9^p`.
fn p_pow_4c(p: usize, d: usize) -> Result<(f64, f64)> {
    let big_p = pcbasis::cardinality(p, d)? as f64;
    let c = pcbasis::coherence_exponent(p, d)?;
    Ok((big_p, big_p.powf(4.0 * c)))
}

pub fn coherence_tail_bound(n: usize, p: usize, d: usize, zeta: f64) -> Result<CoherenceTailBound> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be ≥ 1".into()));
    }
    let (big_p, k) = p_pow_4c(p, d)?;
    let r = 2.0 * (zeta * k * big_p.ln() / n as f64).sqrt();
    Ok(CoherenceTailBound {
        r,
        prob_bound: 4.0 * big_p.powf(2.0 - 2.0 * zeta),
        coherence_level: r / (1.0 - r),
        applicable: r <= 0.5,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityMode {
    /// ℓ1 recovery: `n / (64 P^{4c} ln P)`.
    L1,
    /// ℓ0 recovery: `n / (16 P^{4c} ln P)`.
    L0,
}

/// Theoretical recoverable sparsity `S_max`.
pub fn sparsity_budget(n: usize, p: usize, d: usize, mode: SparsityMode) -> Result<f64> {
    let (big_p, k) = p_pow_4c(p, d)?;
    let constant = match mode {
        SparsityMode::L1 => 64.0,
        SparsityMode::L0 => 16.0,
    };
    Ok(n as f64 / (constant * k * big_p.ln()))
}
