//! Quadratic finite elements for `−(a u')' = f` on [0, 1] with
//! `u(0) = u(1) = 0`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 3-point Gauss rule on [0, 1].
const GAUSS_XI: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7,
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];
const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

pub const DEFAULT_ELEMENTS: usize = 64;

/// Uniform mesh of quadratic Lagrange elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mesh1D {
    n_elements: usize,
}

impl Default for Mesh1D {
    fn default() -> Self {
        Self {
            n_elements: DEFAULT_ELEMENTS,
        }
    }
}

impl Mesh1D {
    pub fn uniform(n_elements: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidArgument(
                "mesh needs at least one element".into(),
            ));
        }
        Ok(Self { n_elements })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_elements as f64
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.n_elements + 1
    }

    /// `nodes[k] = k / (2 n_elements)`, so element `e` owns `2e, 2e+1, 2e+2`.
    pub fn nodes(&self) -> Vec<f64> {
        let m = 2 * self.n_elements;
        (0..=m).map(|k| k as f64 / m as f64).collect()
    }

    /// Gauss points, three per element, element by element.
    pub fn quadrature_points(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n_elements)
            .flat_map(|e| GAUSS_XI.iter().map(move |xi| (e as f64 + xi) * h))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemSolution {
    pub mesh: Mesh1D,
    pub dof_values: Vec<f64>,
}

fn shape(xi: f64) -> [f64; 3] {
    [
        2.0 * (xi - 0.5) * (xi - 1.0),
        4.0 * xi * (1.0 - xi),
        2.0 * xi * (xi - 0.5),
    ]
}

fn shape_deriv(xi: f64) -> [f64; 3] {
    [4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0]
}

/// Galerkin solve with the coefficient evaluated at the Gauss points.
pub fn assemble_solve(
    coefficient: impl Fn(f64) -> f64,
    f_const: f64,
    mesh: Mesh1D,
) -> Result<FemSolution> {
    let a: Vec<f64> = mesh
        .quadrature_points()
        .into_iter()
        .map(coefficient)
        .collect();
    assemble_solve_values(&a, f_const, mesh)
}

/// Same as [`assemble_solve`], with `a` already tabulated at
/// [`Mesh1D::quadrature_points`].
pub fn assemble_solve_values(a_qp: &[f64], f_const: f64, mesh: Mesh1D) -> Result<FemSolution> {
    let ne = mesh.n_elements;
    if a_qp.len() != 3 * ne {
        return Err(Error::DimensionMismatch {
            expected: 3 * ne,
            got: a_qp.len(),
        });
    }
    let qp = mesh.quadrature_points();
    if let Some((x, v)) = qp.iter().zip(a_qp).find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveCoefficient { x: *x, value: *v });
    }
    let h = mesh.h();
    let n_nodes = mesh.n_nodes();
    // Unknowns are the interior nodes 1..n_nodes-1, half-bandwidth 2.
    let n = n_nodes - 2;
    let mut band = vec![[0.0f64; 3]; n];
    let mut rhs = vec![0.0; n];

    let shapes: Vec<[f64; 3]> = GAUSS_XI.iter().map(|&xi| shape(xi)).collect();
    let derivs: Vec<[f64; 3]> = GAUSS_XI.iter().map(|&xi| shape_deriv(xi)).collect();
    for e in 0..ne {
        let mut ke = [[0.0; 3]; 3];
        let mut fe = [0.0; 3];
        for q in 0..3 {
            let wa = GAUSS_W[q] * a_qp[3 * e + q] / h;
            for i in 0..3 {
                fe[i] += GAUSS_W[q] * h * f_const * shapes[q][i];
                for j in 0..3 {
                    ke[i][j] += wa * derivs[q][i] * derivs[q][j];
                }
            }
        }
        for i in 0..3 {
            let gi = 2 * e + i;
            if gi == 0 || gi == n_nodes - 1 {
                continue;
            }
            rhs[gi - 1] += fe[i];
            for j in 0..=i {
                let gj = 2 * e + j;
                if gj == 0 || gj == n_nodes - 1 {
                    continue;
                }
                band[gi - 1][gi - gj] += ke[i][j];
            }
        }
    }

    let interior = if n == 0 {
        Vec::new()
    } else {
        band_cholesky_solve(&mut band, rhs)?
    };
    let mut dof_values = Vec::with_capacity(n_nodes);
    dof_values.push(0.0);
    dof_values.extend(interior);
    dof_values.push(0.0);
    Ok(FemSolution { mesh, dof_values })
}

/// In-place Cholesky of an SPD matrix with half-bandwidth 2, stored as
/// `band[i][k] = A[i][i−k]`, followed by the two triangular solves.
fn band_cholesky_solve(band: &mut [[f64; 3]], mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = band.len();
    for i in 0..n {
        for k in (1..=2).rev() {
            if k > i {
                continue;
            }
            let j = i - k;
            // L[i][j] = (A[i][j] − Σ_{m<j} L[i][m] L[j][m]) / L[j][j]
            let mut s = band[i][k];
            for m in j.saturating_sub(2).max(i.saturating_sub(2))..j {
                s -= band[i][i - m] * band[j][j - m];
            }
            band[i][k] = s / band[j][0];
        }
        let mut d = band[i][0];
        for k in 1..=2.min(i) {
            d -= band[i][k] * band[i][k];
        }
        if !(d > 0.0) {
            return Err(Error::SingularSystem);
        }
        band[i][0] = d.sqrt();
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 1..=2.min(i) {
            s -= band[i][k] * b[i - k];
        }
        b[i] = s / band[i][0];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in 1..=2 {
            if i + k < n {
                s -= band[i + k][k] * b[i + k];
            }
        }
        b[i] = s / band[i][0];
    }
    Ok(b)
}

/// Quadratic interpolation inside the containing element; exact nodal
/// values at nodes.
pub fn eval_solution(sol: &FemSolution, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} is outside [0, 1]")));
    }
    let m = 2 * sol.mesh.n_elements;
    let scaled = x * m as f64;
    let k = scaled.round();
    if (k / m as f64) == x {
        return Ok(sol.dof_values[k as usize]);
    }
    let ne = sol.mesh.n_elements;
    let e = ((x * ne as f64).floor() as usize).min(ne - 1);
    let xi = x * ne as f64 - e as f64;
    let n = shape(xi);
    Ok((0..3).map(|i| n[i] * sol.dof_values[2 * e + i]).sum())
}

impl FemSolution {
    pub fn eval(&self, x: f64) -> Result<f64> {
        eval_solution(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub n_elements: usize,
    pub max_nodal_error: f64,
    /// `log2(e_{prev} / e)` against the previous (half as fine) mesh.
    pub observed_order: Option<f64>,
}

/// Nodal L∞ error against `exact` for each mesh size; sizes are expected
/// to double from one entry to the next.
pub fn convergence_study(
    coefficient: impl Fn(f64) -> f64 + Copy,
    f_const: f64,
    element_counts: &[usize],
    exact: impl Fn(f64) -> f64,
) -> Result<Vec<ConvergencePoint>> {
    let mut out: Vec<ConvergencePoint> = Vec::with_capacity(element_counts.len());
    for &ne in element_counts {
        let mesh = Mesh1D::uniform(ne)?;
        let sol = assemble_solve(coefficient, f_const, mesh)?;
        let err = mesh
            .nodes()
            .iter()
            .zip(&sol.dof_values)
            .map(|(&x, &u)| (u - exact(x)).abs())
            .fold(0.0, f64::max);
        let observed_order = out.last().map(|prev: &ConvergencePoint| {
            (prev.max_nodal_error / err).ln() / (ne as f64 / prev.n_elements as f64).ln()
        });
        out.push(ConvergencePoint {
            n_elements: ne,
            max_nodal_error: err,
            observed_order,
        });
    }
    Ok(out)
}
