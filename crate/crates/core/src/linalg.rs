//! Small dense linear-algebra kernels: a column-major matrix, an incrementally
//! grown QR factorization, and the cyclic Jacobi symmetric eigensolver.

use crate::{Error, Result};

/// Column-major dense matrix. Columns are contiguous, which is the access
/// pattern of every solver here (column correlations, `Ψᵀr`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from row slices; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            if c.len() != nrows {
                return Err(Error::DimensionMismatch {
                    expected: nrows,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            nrows,
            ncols: columns.len(),
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.ncols);
        for j in 0..self.ncols {
            let src = self.column(j);
            let dst = out.column_mut(j);
            for (k, &i) in rows.iter().enumerate() {
                dst[k] = src[i];
            }
        }
        out
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.column(j));
        }
        Self {
            nrows: self.nrows,
            ncols: cols.len(),
            data,
        }
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.column(j), &mut y);
            }
        }
        y
    }

    /// `y = Aᵀ x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        (0..self.ncols).map(|j| dot(self.column(j), x)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Thin QR factorization `A_S = Q R` grown one column at a time by modified
/// Gram–Schmidt with one re-orthogonalization pass.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    nrows: usize,
    q: Vec<Vec<f64>>,
    // r[k] holds column k of R: entries 0..=k
    r: Vec<Vec<f64>>,
}

/// Relative size below which a new column is treated as dependent.
const RANK_TOL: f64 = 1e-10;

impl IncrementalQr {
    pub fn new(nrows: usize) -> Self {
        Self {
            nrows,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// Appends a column. Returns `false` (and leaves the factorization
    /// untouched) when it lies in the span of the existing columns.
    pub fn push(&mut self, col: &[f64]) -> bool {
        assert_eq!(col.len(), self.nrows);
        if self.q.len() >= self.nrows {
            return false;
        }
        let scale = norm2(col);
        if scale == 0.0 {
            return false;
        }
        let mut v = col.to_vec();
        let mut rcol = vec![0.0; self.q.len() + 1];
        for _pass in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let h = dot(qk, &v);
                rcol[k] += h;
                axpy(-h, qk, &mut v);
            }
        }
        let nv = norm2(&v);
        if nv <= RANK_TOL * scale {
            return false;
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        *rcol.last_mut().unwrap() = nv;
        self.q.push(v);
        self.r.push(rcol);
        true
    }

    /// `Qᵀ b`
    pub fn qt_mul(&self, b: &[f64]) -> Vec<f64> {
        self.q.iter().map(|qk| dot(qk, b)).collect()
    }

    /// Least-squares coefficients for the columns pushed so far.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = self.qt_mul(b);
        let k = z.len();
        for i in (0..k).rev() {
            let mut s = z[i];
            for j in (i + 1)..k {
                s -= self.r[j][i] * z[j];
            }
            z[i] = s / self.r[i][i];
        }
        z
    }

    /// `b − Q Qᵀ b`, the component of `b` orthogonal to the column span.
    pub fn residual(&self, b: &[f64]) -> Vec<f64> {
        let mut r = b.to_vec();
        // Two passes keep the residual orthogonal to working precision.
        for _ in 0..2 {
            for qk in &self.q {
                let h = dot(qk, &r);
                axpy(-h, qk, &mut r);
            }
        }
        r
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DenseMatrix,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigensolver for a dense symmetric matrix.
///
/// Sweeps through every off-diagonal pair (p, q) applying a rotation that
/// zeroes `a_pq`, until the off-diagonal Frobenius norm is below
/// `1e-15 · ‖A‖_F`. Fails after `max_sweeps` sweeps.
pub fn jacobi_eigen(a: &DenseMatrix, max_sweeps: usize) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    // Row-major working copy; rows p and q are touched together in each
    // rotation, columns via the symmetric update.
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();

    let fro: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * fro.max(f64::MIN_POSITIVE);

    let off = |m: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[i][j] * m[i][j];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > tol {
        if sweeps >= max_sweeps {
            return Err(Error::EigenNoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p][p];
                let aqq = m[q][q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // A ← Jᵀ A J applied to rows/cols p and q.
                for k in 0..n {
                    let akp = m[k][p];
                    let akq = m[k][q];
                    m[k][p] = c * akp - s * akq;
                    m[k][q] = s * akp + c * akq;
                }
                let (rp, rq) = if p < q {
                    let (lo, hi) = m.split_at_mut(q);
                    (&mut lo[p], &mut hi[0])
                } else {
                    unreachable!()
                };
                for k in 0..n {
                    let apk = rp[k];
                    let aqk = rq[k];
                    rp[k] = c * apk - s * aqk;
                    rq[k] = s * apk + c * aqk;
                }
                m[p][q] = 0.0;
                m[q][p] = 0.0;

                let (vp, vq) = {
                    let (lo, hi) = v.split_at_mut(q);
                    (&mut lo[p], &mut hi[0])
                };
                // v rows hold eigenvector columns transposed
                for k in 0..n {
                    let a1 = vp[k];
                    let a2 = vq[k];
                    vp[k] = c * a1 - s * a2;
                    vq[k] = s * a1 + c * a2;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let cols: Vec<Vec<f64>> = order.iter().map(|&i| v[i].clone()).collect();
    Ok(SymmetricEigen {
        values,
        vectors: DenseMatrix::from_columns(n, &cols)?,
        sweeps,
    })
}
