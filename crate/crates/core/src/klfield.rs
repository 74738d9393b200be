//! Karhunen–Loève representation of the random diffusion coefficient
//!
//! `a(x, y) = ā + σ_a Σ_i √λ_i φ_i(x) y_i` on [0, 1], with `(λ_i, φ_i)` the
//! leading eigenpairs of a Gaussian covariance kernel computed by the
//! Nyström method on a Gauss–Legendre grid.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{jacobi_eigen, DenseMatrix};
use crate::quadrature::GaussLegendre;
use crate::sampling::parse_row;
use crate::{Error, Result};

/// `C(x1, x2) = exp(−(x1 − x2)² / l_c²)`.
pub fn gaussian_cov(x1: f64, x2: f64, l_c: f64) -> Result<f64> {
    if !(l_c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "correlation length must be positive, got {l_c}"
        )));
    }
    Ok(kernel(x1, x2, l_c))
}

#[inline]
fn kernel(x1: f64, x2: f64, l_c: f64) -> f64 {
    let t = (x1 - x2) / l_c;
    (-t * t).exp()
}

/// Gaussian covariance on the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub correlation_length: f64,
}

impl CovarianceSpec {
    pub fn new(correlation_length: f64) -> Result<Self> {
        gaussian_cov(0.0, 0.0, correlation_length)?;
        Ok(Self { correlation_length })
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        kernel(x1, x2, self.correlation_length)
    }
}

/// Eigenvalues below this are treated as numerically zero; their
/// eigenfunctions are interpolated instead of Nyström-extended.
const EXTENSION_CUTOFF: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLExpansion {
    pub cov: CovarianceSpec,
    /// `ā`
    pub mean: f64,
    /// `σ_a`
    pub sigma: f64,
    /// Retained `λ_1 ≥ … ≥ λ_d ≥ 0`.
    pub eigenvalues: Vec<f64>,
    /// Full discrete spectrum (all M values, descending, clipped at 0).
    pub spectrum: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `eigenfunctions[i][b] = φ_i(nodes[b])`.
    pub eigenfunctions: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Nyström discretization of the covariance eigenproblem with an
/// `m_quad`-point Gauss–Legendre rule on [0, 1].
///
/// The symmetric matrix `W^{1/2} K W^{1/2}` is diagonalized by cyclic Jacobi;
/// node values `φ_i(x_b) = v_ib / √w_b` have unit quadrature L² norm.
/// Signs are fixed so that `∫φ_i ≥ 0` (if that integral vanishes, so that
/// `φ_i` at the first node is ≥ 0). The returned field has `ā = 0`,
/// `σ_a = 1`; see [`KLExpansion::with_field`].
pub fn nystrom_eig(cov: CovarianceSpec, m_quad: usize, d: usize) -> Result<KLExpansion> {
    if d > m_quad {
        return Err(Error::InvalidArgument(format!(
            "cannot retain {d} modes from {m_quad} quadrature nodes"
        )));
    }
    let rule = GaussLegendre::on_interval(m_quad, 0.0, 1.0);
    let sw: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
    let mut b = DenseMatrix::zeros(m_quad, m_quad);
    for i in 0..m_quad {
        for j in 0..=i {
            let v = sw[i] * cov.eval(rule.nodes[i], rule.nodes[j]) * sw[j];
            b.set(i, j, v);
            b.set(j, i, v);
        }
    }
    let eig = jacobi_eigen(&b, MAX_SWEEPS)?;
    let spectrum: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();

    let eigenfunctions = (0..d)
        .map(|k| {
            let mut phi: Vec<f64> = eig
                .vectors
                .column(k)
                .iter()
                .zip(&sw)
                .map(|(v, s)| v / s)
                .collect();
            let integral: f64 = phi.iter().zip(&rule.weights).map(|(p, w)| p * w).sum();
            let flip = if integral.abs() > 1e-12 {
                integral < 0.0
            } else {
                phi[0] < 0.0
            };
            if flip {
                phi.iter_mut().for_each(|p| *p = -*p);
            }
            phi
        })
        .collect();

    Ok(KLExpansion {
        cov,
        mean: 0.0,
        sigma: 1.0,
        eigenvalues: spectrum[..d].to_vec(),
        spectrum,
        nodes: rule.nodes,
        weights: rule.weights,
        eigenfunctions,
        sweeps: eig.sweeps,
    })
}

impl KLExpansion {
    /// Sets `ā` and `σ_a`.
    pub fn with_field(mut self, mean: f64, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be ≥ 0, got {sigma}"
            )));
        }
        self.mean = mean;
        self.sigma = sigma;
        Ok(self)
    }

    /// Number of retained modes.
    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn m_quad(&self) -> usize {
        self.nodes.len()
    }

    /// `φ_i(x)`: Nyström extension `(1/λ_i) Σ_b w_b C(x, x_b) φ_i(x_b)` for
    /// non-negligible `λ_i`, piecewise-cubic interpolation otherwise.
    pub fn eigenfunction(&self, i: usize, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.eigenfunction_unchecked(i, x))
    }

    fn eigenfunction_unchecked(&self, i: usize, x: f64) -> f64 {
        let lambda = self.eigenvalues[i];
        let phi = &self.eigenfunctions[i];
        if lambda > EXTENSION_CUTOFF {
            let s: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .zip(phi)
                .map(|((&xb, &wb), &pb)| wb * self.cov.eval(x, xb) * pb)
                .sum();
            s / lambda
        } else {
            cubic_interpolate(&self.nodes, phi, x)
        }
    }

    /// `√λ_i φ_i(x)` for every retained mode.
    pub fn scaled_modes_at(&self, x: f64) -> Result<Vec<f64>> {
        check_unit(x)?;
        Ok((0..self.d())
            .map(|i| self.eigenvalues[i].sqrt() * self.eigenfunction_unchecked(i, x))
            .collect())
    }

    /// `a(x, y) = ā + σ_a Σ √λ_i φ_i(x) y_i`.
    pub fn eval_field(&self, x: f64, y: &[f64]) -> Result<f64> {
        if y.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: y.len(),
            });
        }
        let modes = self.scaled_modes_at(x)?;
        Ok(self.mean + self.sigma * modes.iter().zip(y).map(|(m, yi)| m * yi).sum::<f64>())
    }

    /// Precomputes the modes at fixed points for repeated field evaluation.
    pub fn tabulate(&self, xs: &[f64]) -> Result<FieldTable> {
        let modes = xs
            .iter()
            .map(|&x| self.scaled_modes_at(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldTable {
            mean: self.mean,
            sigma: self.sigma,
            points: xs.to_vec(),
            modes,
        })
    }

    /// Worst case over `y ∈ [−1, 1]^d` of `a(x, y)`, minimized over `grid`
    /// equispaced points of [0, 1]: `min_x ā − σ_a Σ √λ_i |φ_i(x)|`.
    pub fn positivity_margin(&self, grid: usize) -> f64 {
        let grid = grid.max(2);
        (0..grid)
            .map(|k| {
                let x = k as f64 / (grid - 1) as f64;
                let spread: f64 = (0..self.d())
                    .map(|i| self.eigenvalues[i].sqrt() * self.eigenfunction_unchecked(i, x).abs())
                    .sum();
                self.mean - self.sigma * spread
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Writes `kl.json` (scalars and spectrum) and `kl_modes.csv`
    /// (`x, w, φ_1 … φ_d` per node) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let header = KlHeader {
            correlation_length: self.cov.correlation_length,
            mean: self.mean,
            sigma: self.sigma,
            d: self.d(),
            m_quad: self.m_quad(),
            eigenvalues: self.eigenvalues.clone(),
            spectrum: self.spectrum.clone(),
            sweeps: self.sweeps,
        };
        fs::write(dir.join("kl.json"), serde_json::to_string_pretty(&header)?)?;
        let mut f = fs::File::create(dir.join("kl_modes.csv"))?;
        let mut cols = vec!["x".to_string(), "w".to_string()];
        cols.extend((1..=self.d()).map(|i| format!("phi{i}")));
        writeln!(f, "{}", cols.join(","))?;
        for b in 0..self.m_quad() {
            let mut row = vec![self.nodes[b].to_string(), self.weights[b].to_string()];
            row.extend(self.eigenfunctions.iter().map(|phi| phi[b].to_string()));
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: KlHeader = serde_json::from_str(&fs::read_to_string(dir.join("kl.json"))?)?;
        let reader = BufReader::new(fs::File::open(dir.join("kl_modes.csv"))?);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut eigenfunctions = vec![Vec::new(); header.d];
        for line in reader.lines().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = parse_row(&line)?;
            if row.len() != header.d + 2 {
                return Err(Error::Parse("kl_modes.csv row has the wrong width".into()));
            }
            nodes.push(row[0]);
            weights.push(row[1]);
            for (phi, v) in eigenfunctions.iter_mut().zip(&row[2..]) {
                phi.push(*v);
            }
        }
        if nodes.len() != header.m_quad {
            return Err(Error::Parse(
                "kl_modes.csv has the wrong number of nodes".into(),
            ));
        }
        Ok(Self {
            cov: CovarianceSpec::new(header.correlation_length)?,
            mean: header.mean,
            sigma: header.sigma,
            eigenvalues: header.eigenvalues,
            spectrum: header.spectrum,
            nodes,
            weights,
            eigenfunctions,
            sweeps: header.sweeps,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct KlHeader {
    correlation_length: f64,
    mean: f64,
    sigma: f64,
    d: usize,
    m_quad: usize,
    eigenvalues: Vec<f64>,
    spectrum: Vec<f64>,
    sweeps: usize,
}

/// Field modes frozen at a set of points (e.g. finite-element quadrature
/// points).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTable {
    mean: f64,
    sigma: f64,
    points: Vec<f64>,
    modes: Vec<Vec<f64>>,
}

impl FieldTable {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Field values at every tabulated point for the realization `y`.
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| self.mean + self.sigma * m.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} is outside [0, 1]")));
    }
    Ok(())
}

/// Cubic Lagrange interpolation through the four nodes nearest `x`.
fn cubic_interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n < 4 {
        // too few nodes for a cubic; fall back to the nearest value
        let k = xs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map_or(0, |(k, _)| k);
        return ys[k];
    }
    let pos = xs.partition_point(|&xi| xi < x);
    let start = pos.saturating_sub(2).min(n - 4);
    let idx = start..start + 4;
    let mut s = 0.0;
    for i in idx.clone() {
        let mut l = 1.0;
        for j in idx.clone() {
            if j != i {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        s += l * ys[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(gaussian_cov(0.3, 0.3, 0.2).unwrap(), 1.0);
        assert_eq!(
            gaussian_cov(0.1, 0.7, 0.2).unwrap(),
            gaussian_cov(0.7, 0.1, 0.2).unwrap()
        );
        let v = gaussian_cov(0.2, 0.4, 0.2).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!((v - 0.367_879).abs() < 1e-6);
        assert!(gaussian_cov(0.0, 0.1, 0.0).is_err());
        assert!(CovarianceSpec::new(-1.0).is_err());
    }

    #[test]
    fn small_expansion_is_orthonormal_and_mercer_consistent() {
        let kl = nystrom_eig(CovarianceSpec::new(0.3).unwrap(), 40, 40).unwrap();
        assert!(kl.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(kl.eigenvalues.iter().all(|&l| l >= 0.0));
        for i in 0..40 {
            for j in 0..40 {
                let ip: f64 = (0..40)
                    .map(|b| kl.weights[b] * kl.eigenfunctions[i][b] * kl.eigenfunctions[j][b])
                    .sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ip - e).abs() < 1e-8, "({i},{j}) {ip}");
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = rng.random_range(0..40);
            let b = rng.random_range(0..40);
            let s: f64 = (0..40)
                .map(|k| kl.eigenvalues[k] * kl.eigenfunctions[k][a] * kl.eigenfunctions[k][b])
                .sum();
            assert!((s - kl.cov.eval(kl.nodes[a], kl.nodes[b])).abs() < 1e-6);
        }
        let trace: f64 = kl.spectrum.iter().sum();
        assert!((trace - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sign_convention_and_extension_consistency() {
        let kl = nystrom_eig(CovarianceSpec::new(0.2).unwrap(), 60, 6).unwrap();
        for (i, phi) in kl.eigenfunctions.iter().enumerate() {
            let integral: f64 = phi.iter().zip(&kl.weights).map(|(p, w)| p * w).sum();
            assert!(integral > -1e-12 || (integral.abs() <= 1e-12 && phi[0] >= 0.0));
            // The Nyström extension reproduces node values.
            for b in [0, 17, 59] {
                let ext = kl.eigenfunction(i, kl.nodes[b]).unwrap();
                assert!((ext - phi[b]).abs() < 1e-8, "mode {i} node {b}");
            }
        }
    }

    #[test]
    fn field_is_affine_in_y() {
        let kl = nystrom_eig(CovarianceSpec::new(0.5).unwrap(), 50, 4)
            .unwrap()
            .with_field(0.1, 0.03)
            .unwrap();
        assert_eq!(kl.eval_field(0.4, &[0.0; 4]).unwrap(), 0.1);
        let y = [0.3, -0.2, 0.9, -0.7];
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let a1 = kl.eval_field(0.4, &y).unwrap() - 0.1;
        let a2 = kl.eval_field(0.4, &y2).unwrap() - 0.1;
        assert!((a2 - 2.0 * a1).abs() < 1e-15);
        assert!(kl.eval_field(1.2, &y).is_err());
        assert!(kl.eval_field(0.5, &y[..3]).is_err());
    }

    #[test]
    fn margin_bounds_field() {
        let kl = nystrom_eig(CovarianceSpec::new(0.5).unwrap(), 50, 4)
            .unwrap()
            .with_field(0.1, 0.03)
            .unwrap();
        let margin = kl.positivity_margin(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x: f64 = rng.random();
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(margin <= kl.eval_field(x, &y).unwrap() + 1e-15);
        }
        let flat = kl.clone().with_field(0.1, 0.0).unwrap();
        assert_eq!(flat.positivity_margin(100), 0.1);
    }

    #[test]
    fn tabulated_field_matches_direct_evaluation() {
        let kl = nystrom_eig(CovarianceSpec::new(0.5).unwrap(), 50, 3)
            .unwrap()
            .with_field(1.0, 0.2)
            .unwrap();
        let xs = [0.0, 0.25, 0.9];
        let t = kl.tabulate(&xs).unwrap();
        let y = [0.5, -0.5, 0.1];
        for (x, a) in xs.iter().zip(t.eval(&y)) {
            assert!((kl.eval_field(*x, &y).unwrap() - a).abs() < 1e-14);
        }
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 / 9.0).powi(2)).collect();
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3);
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for x in [0.0, 0.013, 0.5, 0.77, 1.0] {
            assert!((cubic_interpolate(&xs, &ys, x) - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn save_and_load() {
        let kl = nystrom_eig(CovarianceSpec::new(0.5).unwrap(), 20, 3)
            .unwrap()
            .with_field(0.1, 0.02)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        kl.save(dir.path()).unwrap();
        let back = KLExpansion::load(dir.path()).unwrap();
        assert_eq!(back, kl);
    }
}
