//! Sparse recovery of PC coefficients.
//!
//! * [`omp`]: orthogonal matching pursuit for the ℓ0 problem
//!   `min ‖c‖₀ s.t. ‖Ψc − u‖₂ ≤ δ`.
//! * [`bpdn`]: basis pursuit denoising, `min ‖Wc‖₁ s.t. ‖Ψc − u‖₂ ≤ δ`,
//!   solved by Newton root finding on the Pareto curve
//!   `φ(τ) = ‖Ψc_τ − u‖₂` where `c_τ` solves the LASSO problem
//!   `min ½‖Ψc − u‖₂² s.t. ‖Wc‖₁ ≤ τ` ([`lasso_spg`]).
//!
//! `W` is the diagonal matrix of column ℓ2 norms of `Ψ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm2, DenseMatrix, IncrementalQr};
use crate::sampling::MeasurementMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Omp,
    Bpdn,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Omp => "omp",
            SolverKind::Bpdn => "bpdn",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "omp" => Ok(SolverKind::Omp),
            "bpdn" => Ok(SolverKind::Bpdn),
            other => Err(Error::Parse(format!("unknown solver '{other}'"))),
        }
    }
}

impl SolverKind {
    /// Runs the solver with default options.
    pub fn solve(self, m: &MeasurementMatrix, u: &[f64], delta: f64) -> Result<RecoveryResult> {
        match self {
            SolverKind::Omp => omp(m, u, delta, None),
            SolverKind::Bpdn => bpdn(m, u, delta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryStatus {
    /// Residual within tolerance of `δ`.
    Converged,
    /// Stopped (support cap or stagnation) with residual above `δ`.
    ToleranceNotMet,
    /// BPDN only: residual reached the numerical floor `bp_tol·‖u‖`, which
    /// lies above `δ`. Happens for `δ ≈ 0` on consistent systems.
    ResidualFloor,
    /// BPDN only: the root finder ran out of iterations.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub coefficients: Vec<f64>,
    /// Nonzero positions of `coefficients`, ascending.
    pub support: Vec<usize>,
    /// `‖Ψc − u‖₂`
    pub residual_norm: f64,
    /// OMP: columns added. BPDN: total projected-gradient iterations.
    pub iterations: usize,
    pub solver: SolverKind,
    pub delta: f64,
    pub status: RecoveryStatus,
}

impl RecoveryResult {
    pub fn converged(&self) -> bool {
        self.status == RecoveryStatus::Converged
    }

    /// `‖W c‖₁`
    pub fn weighted_l1(&self, weights: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(weights)
            .map(|(c, w)| (c * w).abs())
            .sum()
    }
}

fn nonzero_support(c: &[f64]) -> Vec<usize> {
    c.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

fn check_rhs(m: &MeasurementMatrix, u: &[f64], delta: f64) -> Result<()> {
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if u.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: u.len(),
        });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be ≥ 0, got {delta}"
        )));
    }
    Ok(())
}

/// Least-squares fit `min ‖A c − b‖₂` for a full-column-rank `A`.
///
/// Fails with [`Error::RankDeficient`] naming the first column that lies in
/// the span of the preceding ones.
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let mut qr = IncrementalQr::new(a.nrows());
    for j in 0..a.ncols() {
        if !qr.push(a.column(j)) {
            return Err(Error::RankDeficient { column: j });
        }
    }
    Ok(qr.solve(b))
}

/// Orthogonal matching pursuit.
///
/// Each iteration adds the column minimizing
/// `ε(j) = ‖ψ_j α_j − r‖₂` with `α_j = ψ_jᵀr / ‖ψ_j‖₂²`, then refits the
/// coefficients on the enlarged support by least squares. Stops once
/// `‖u − Ψc‖₂ ≤ δ` or the support holds `max_support` columns
/// (default `min(N − 1, P)`, at least 1). Ties go to the lower column index.
pub fn omp(
    m: &MeasurementMatrix,
    u: &[f64],
    delta: f64,
    max_support: Option<usize>,
) -> Result<RecoveryResult> {
    check_rhs(m, u, delta)?;
    let n = m.nrows();
    let p = m.ncols();
    let cap = max_support
        .unwrap_or_else(|| (n.saturating_sub(1)).min(p).max(1))
        .min(p)
        .min(n);

    let mut qr = IncrementalQr::new(n);
    let mut in_support = vec![false; p];
    let mut excluded = vec![false; p];
    let mut order = Vec::new();
    let mut r = u.to_vec();
    let mut rnorm = norm2(&r);

    while rnorm > delta && order.len() < cap {
        // ε(j)² = ‖r‖² − (ψ_jᵀr)²/‖ψ_j‖², so the argmin of ε is the argmax
        // of the normalized correlation.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            let w = m.column_weights[j];
            if in_support[j] || excluded[j] || w == 0.0 {
                continue;
            }
            let c = dot(m.column(j), &r);
            let score = c * c / (w * w);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else { break };
        if score <= (1e-14 * rnorm).powi(2) {
            break;
        }
        if !qr.push(m.column(j)) {
            excluded[j] = true;
            continue;
        }
        in_support[j] = true;
        order.push(j);
        r = qr.residual(u);
        rnorm = norm2(&r);
    }

    let mut coefficients = vec![0.0; p];
    for (&j, cj) in order.iter().zip(qr.solve(u)) {
        coefficients[j] = cj;
    }
    Ok(RecoveryResult {
        support: nonzero_support(&coefficients),
        coefficients,
        residual_norm: rnorm,
        iterations: order.len(),
        solver: SolverKind::Omp,
        delta,
        status: if rnorm <= delta {
            RecoveryStatus::Converged
        } else {
            RecoveryStatus::ToleranceNotMet
        },
    })
}

/// Euclidean projection onto `{x : Σ w_j |x_j| ≤ τ}`.
///
/// The solution is a weighted soft threshold `x_j = sign(v_j)·max(|v_j| − θw_j, 0)`;
/// `θ` is found by sorting the ratios `|v_j|/w_j` and scanning for the
/// breakpoint where the constraint becomes active.
pub fn project_weighted_l1(v: &[f64], weights: &[f64], tau: f64) -> Vec<f64> {
    debug_assert_eq!(v.len(), weights.len());
    if tau <= 0.0 {
        return vec![0.0; v.len()];
    }
    let norm: f64 = v.iter().zip(weights).map(|(x, w)| (x * w).abs()).sum();
    if norm <= tau {
        return v.to_vec();
    }
    let mut idx: Vec<usize> = (0..v.len()).filter(|&j| v[j] != 0.0).collect();
    idx.sort_by(|&a, &b| {
        let ra = v[a].abs() / weights[a];
        let rb = v[b].abs() / weights[b];
        rb.total_cmp(&ra)
    });
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut theta = 0.0;
    for (k, &j) in idx.iter().enumerate() {
        s1 += weights[j] * v[j].abs();
        s2 += weights[j] * weights[j];
        theta = (s1 - tau) / s2;
        let next = idx.get(k + 1).map(|&i| v[i].abs() / weights[i]);
        if next.is_none_or(|t| theta >= t) {
            break;
        }
    }
    let theta = theta.max(0.0);
    v.iter()
        .zip(weights)
        .map(|(&x, &w)| x.signum() * (x.abs() - theta * w).max(0.0))
        .collect()
}

/// Tuning of the spectral projected-gradient LASSO solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpgOptions {
    /// Relative duality-gap tolerance, `gap / max(f, f_floor)`.
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Non-monotone line-search memory.
    pub memory: usize,
    pub step_min: f64,
    pub step_max: f64,
    /// Armijo constant.
    pub gamma: f64,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            max_iter: 10_000,
            memory: 10,
            step_min: 1e-10,
            step_max: 1e10,
            gamma: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub coefficients: Vec<f64>,
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    /// Relative duality gap at exit.
    pub dual_gap: f64,
    /// `max_j |ψ_jᵀr| / w_j`, the dual norm of the gradient. On the Pareto
    /// curve `φ'(τ) = −dual_norm / ‖r‖`.
    pub dual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn weighted_dual_norm(g: &[f64], w: &[f64]) -> f64 {
    g.iter()
        .zip(w)
        .filter(|(_, &wj)| wj > 0.0)
        .map(|(gj, wj)| gj.abs() / wj)
        .fold(0.0, f64::max)
}

/// LASSO `min ½‖Ψc − u‖₂² s.t. ‖Wc‖₁ ≤ τ` with default options and a zero
/// starting point.
pub fn lasso_spg(m: &MeasurementMatrix, u: &[f64], tau: f64) -> Result<LassoSolution> {
    lasso_spg_with(m, u, tau, None, &SpgOptions::default())
}

/// Spectral projected gradient with Barzilai–Borwein steps and a
/// non-monotone (max over the last `memory` values) Armijo line search.
///
/// Exits when the relative duality gap drops below `opts.gap_tol`, when the
/// line search can no longer make progress, or at `opts.max_iter` (then
/// `converged` is false).
pub fn lasso_spg_with(
    m: &MeasurementMatrix,
    u: &[f64],
    tau: f64,
    warm_start: Option<&[f64]>,
    opts: &SpgOptions,
) -> Result<LassoSolution> {
    check_rhs(m, u, 0.0)?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must be ≥ 0, got {tau}"
        )));
    }
    let p = m.ncols();
    // Zero-norm columns cannot carry weight; pin them to zero.
    let w: Vec<f64> = m
        .column_weights
        .iter()
        .map(|&x| if x > 0.0 { x } else { f64::INFINITY })
        .collect();
    let project = |v: &[f64]| -> Vec<f64> {
        let mut out = project_weighted_l1(v, &w, tau);
        for (o, &wj) in out.iter_mut().zip(&w) {
            if wj.is_infinite() {
                *o = 0.0;
            }
        }
        out
    };

    let mut x = match warm_start {
        Some(x0) if x0.len() == p => project(x0),
        _ => vec![0.0; p],
    };
    let ax = m.values.matvec(&x);
    let mut r: Vec<f64> = u.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let mut f = 0.5 * dot(&r, &r);
    let mut g: Vec<f64> = m.values.matvec_t(&r).into_iter().map(|v| -v).collect();
    let mut history = vec![f];
    let f_floor = 0.5 * (f64::EPSILON * norm2(u)).powi(2);

    let dx0: f64 = {
        let xs: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        project(&xs)
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let mut step = if dx0 > 0.0 { 1.0 / dx0 } else { 1.0 };
    step = step.clamp(opts.step_min, opts.step_max);

    let mut iterations = 0;
    let mut converged = false;
    let mut gap_rel;
    let mut dual_norm;
    loop {
        dual_norm = weighted_dual_norm(&g, &m.column_weights);
        let gap = (dot(&x, &g) + tau * dual_norm).max(0.0);
        gap_rel = gap / f.max(f_floor).max(f64::MIN_POSITIVE);
        if gap_rel <= opts.gap_tol || f <= f_floor {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let d: Vec<f64> = project(&trial).iter().zip(&x).map(|(a, b)| a - b).collect();
        let gtd = dot(&g, &d);
        if !(gtd < 0.0) {
            // x is stationary to working precision
            converged = true;
            break;
        }
        let ad = m.values.matvec(&d);
        let f_ref = history
            .iter()
            .rev()
            .take(opts.memory)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let rt: Vec<f64> = r
                .iter()
                .zip(&ad)
                .map(|(ri, adi)| ri - alpha * adi)
                .collect();
            let ft = 0.5 * dot(&rt, &rt);
            if ft <= f_ref + opts.gamma * alpha * gtd {
                accepted = Some((rt, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((r_new, f_new)) = accepted else {
            break;
        };
        let x_new: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
        let g_new: Vec<f64> = m.values.matvec_t(&r_new).into_iter().map(|v| -v).collect();

        let mut sts = 0.0;
        let mut sty = 0.0;
        for j in 0..p {
            let s = x_new[j] - x[j];
            sts += s * s;
            sty += s * (g_new[j] - g[j]);
        }
        step = if sty <= 0.0 {
            opts.step_max
        } else {
            (sts / sty).clamp(opts.step_min, opts.step_max)
        };
        x = x_new;
        r = r_new;
        g = g_new;
        f = f_new;
        history.push(f);
    }

    // Recompute the residual from x to drop the drift of the r − αΨd updates.
    let ax = m.values.matvec(&x);
    let residual: Vec<f64> = u.iter().zip(&ax).map(|(a, b)| a - b).collect();
    Ok(LassoSolution {
        residual_norm: norm2(&residual),
        residual,
        coefficients: x,
        dual_gap: gap_rel,
        dual_norm,
        iterations,
        converged,
    })
}

/// Tuning of the BPDN root finder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnOptions {
    /// Accept when `|‖r‖ − δ| ≤ rtol·δ`.
    pub rtol: f64,
    /// Residual floor `bp_tol·‖u‖`, reached in the noiseless limit `δ → 0`.
    pub bp_tol: f64,
    pub max_newton: usize,
    pub spg: SpgOptions,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-4,
            bp_tol: 1e-10,
            max_newton: 100,
            spg: SpgOptions::default(),
        }
    }
}

pub fn bpdn(m: &MeasurementMatrix, u: &[f64], delta: f64) -> Result<RecoveryResult> {
    bpdn_with(m, u, delta, &BpdnOptions::default())
}

/// Basis pursuit denoising by Newton iteration on the Pareto curve.
///
/// `φ(τ) = ‖r_τ‖₂` is convex and decreasing, with `φ'(τ) = −λ_τ` where
/// `λ_τ = ‖Ψᵀr_τ‖_{W⁻¹,∞} / ‖r_τ‖₂`. Each step solves the LASSO subproblem
/// at the current `τ` (warm-started), then moves to
/// `τ + (φ(τ) − δ)/λ_τ`. A bracket `[τ_lo, τ_hi]` of the root is kept from
/// the observed residuals; steps that leave it fall back to secant or
/// bisection. The subproblem tolerance tightens with the root error.
pub fn bpdn_with(
    m: &MeasurementMatrix,
    u: &[f64],
    delta: f64,
    opts: &BpdnOptions,
) -> Result<RecoveryResult> {
    check_rhs(m, u, delta)?;
    let p = m.ncols();
    let unorm = norm2(u);
    if delta >= unorm {
        return Ok(RecoveryResult {
            coefficients: vec![0.0; p],
            support: Vec::new(),
            residual_norm: unorm,
            iterations: 0,
            solver: SolverKind::Bpdn,
            delta,
            status: RecoveryStatus::Converged,
        });
    }

    let floor = opts.bp_tol * unorm;
    let mut tau = 0.0;
    let mut x = vec![0.0; p];
    // (τ, φ(τ)) with φ > δ, and with φ < δ
    let mut lo = (0.0, unorm);
    let mut hi: Option<(f64, f64)> = None;
    let mut root_err: f64 = 1.0;
    let mut total_iters = 0;
    let mut status = RecoveryStatus::NotConverged;
    let mut rnorm = unorm;

    for _ in 0..opts.max_newton {
        let spg = SpgOptions {
            gap_tol: opts.spg.gap_tol.max((0.1 * root_err).min(1e-2)),
            ..opts.spg
        };
        let sol = lasso_spg_with(m, u, tau, Some(&x), &spg)?;
        total_iters += sol.iterations;
        x = sol.coefficients;
        rnorm = sol.residual_norm;

        if (rnorm - delta).abs() <= opts.rtol * delta {
            status = RecoveryStatus::Converged;
            break;
        }
        if rnorm <= floor && rnorm > delta {
            status = RecoveryStatus::ResidualFloor;
            break;
        }
        root_err = (rnorm - delta).abs() / rnorm.max(delta);

        if rnorm > delta {
            if tau >= lo.0 {
                lo = (tau, rnorm);
            }
        } else if hi.is_none_or(|(t, _)| tau <= t) {
            hi = Some((tau, rnorm));
        }

        let lambda = sol.dual_norm / rnorm;
        let mut next = if lambda > 0.0 {
            tau + (rnorm - delta) / lambda
        } else {
            f64::NAN
        };
        let inside = |t: f64| t.is_finite() && t > lo.0 && hi.is_none_or(|(h, _)| t < h);
        if !inside(next) {
            next = match hi {
                Some((th, fh)) => {
                    // secant through the bracket ends, else bisect
                    let s = lo.0 + (lo.1 - delta) * (th - lo.0) / (lo.1 - fh);
                    if inside(s) {
                        s
                    } else {
                        0.5 * (lo.0 + th)
                    }
                }
                None => 2.0 * tau.max(1e-300),
            };
        }
        if (next - tau).abs() <= 1e-15 * tau.abs() {
            status = RecoveryStatus::NotConverged;
            break;
        }
        tau = next;
    }

    let coefficients = x;
    Ok(RecoveryResult {
        support: nonzero_support(&coefficients),
        coefficients,
        residual_norm: rnorm,
        iterations: total_iters,
        solver: SolverKind::Bpdn,
        delta,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcbasis::BasisSpec;
    use crate::sampling::{assemble_measurement, draw_samples};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> MeasurementMatrix {
        let basis = BasisSpec::total_order(1, n - 1).unwrap();
        MeasurementMatrix::from_matrix(DenseMatrix::identity(n), basis).unwrap()
    }

    fn planted(
        n: usize,
        p_order: usize,
        d: usize,
        s: usize,
        seed: u64,
    ) -> (MeasurementMatrix, Vec<f64>, Vec<f64>) {
        let basis = BasisSpec::total_order(p_order, d).unwrap();
        let m = assemble_measurement(&basis, &draw_samples(d, n, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        let mut c = vec![0.0; basis.len()];
        let mut placed = 0;
        while placed < s {
            let j = rng.random_range(0..basis.len());
            if c[j] == 0.0 {
                let mag = 1.0 + rng.random::<f64>();
                c[j] = if rng.random::<bool>() { mag } else { -mag };
                placed += 1;
            }
        }
        let u = m.values.matvec(&c);
        (m, c, u)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        num / norm2(b)
    }

    #[test]
    fn least_squares_identity_and_consistent() {
        let c = least_squares(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c, vec![1.0, 2.0, 3.0]);
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i| vec![1.0, i as f64, (i * i) as f64])
            .collect();
        let a = DenseMatrix::from_rows(&rows).unwrap();
        let b = a.matvec(&[0.5, -1.0, 0.25]);
        let c = least_squares(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&c).iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(norm2(&r) < 1e-12);
    }

    #[test]
    fn least_squares_is_optimal_against_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = DenseMatrix::from_rows(&rows).unwrap();
        let b: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = least_squares(&a, &b).unwrap();
        let res = |c: &[f64]| {
            let ac = a.matvec(c);
            norm2(&ac.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>())
        };
        let best = res(&c);
        for _ in 0..100 {
            let pert: Vec<f64> = c
                .iter()
                .map(|x| x + rng.random_range(-1e-3..1e-3))
                .collect();
            assert!(best <= res(&pert));
        }
    }

    #[test]
    fn least_squares_reports_dependent_column() {
        let rows = vec![
            vec![1.0, 2.0, 1.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 2.0, 0.0],
        ];
        let a = DenseMatrix::from_rows(&rows).unwrap();
        assert!(matches!(
            least_squares(&a, &[1.0, 1.0, 1.0]),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn omp_trivial_cases() {
        let m = identity(4);
        let r = omp(&m, &[0.0, 0.0, 1.0, 0.0], 0.0, None).unwrap();
        assert_eq!(r.coefficients, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.iterations, 1);
        assert!(r.converged());
        let r = omp(&m, &[0.3, 0.4, 0.0, 0.0], 0.5, None).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn omp_ties_pick_lower_index() {
        let m = identity(3);
        let r = omp(&m, &[1.0, 1.0, 0.5], 1.2, None).unwrap();
        assert_eq!(r.support, vec![0]);
    }

    #[test]
    fn omp_recovers_planted_support() {
        let (m, c, u) = planted(30, 2, 8, 4, 21);
        assert_eq!(m.ncols(), 45);
        let r = omp(&m, &u, 1e-10, None).unwrap();
        let truth: Vec<usize> = nonzero_support(&c);
        assert_eq!(r.support, truth);
        assert!(rel_err(&r.coefficients, &c) <= 1e-8);
    }

    #[test]
    fn omp_flags_unmet_tolerance() {
        let (m, _, mut u) = planted(30, 2, 8, 4, 3);
        u[0] += 1.0;
        let r = omp(&m, &u, 1e-12, Some(2)).unwrap();
        assert_eq!(r.status, RecoveryStatus::ToleranceNotMet);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn omp_residual_strictly_decreases() {
        let (m, _, mut u) = planted(40, 3, 4, 6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x in u.iter_mut() {
            *x += 0.1 * rng.random_range(-1.0..1.0);
        }
        let mut prev = f64::INFINITY;
        for k in 1..=15 {
            let r = omp(&m, &u, 0.0, Some(k)).unwrap();
            assert!(r.residual_norm < prev);
            assert_eq!(r.support.len(), k);
            prev = r.residual_norm;
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(
            project_weighted_l1(&[0.5, -0.2], &[1.0, 2.0], 1.0),
            vec![0.5, -0.2]
        );
        assert_eq!(
            project_weighted_l1(&[3.0, 1.0], &[1.0, 1.0], 0.0),
            vec![0.0, 0.0]
        );
        let x = project_weighted_l1(&[3.0, 1.0], &[1.0, 1.0], 2.0);
        assert!((x[0] - 2.0).abs() < 1e-15 && x[1] == 0.0);
    }

    #[test]
    fn projection_matches_grid_search() {
        // v=(3,1), w=(1,2), τ=2: brute-force over the boundary segment.
        let v = [3.0, 1.0];
        let w = [1.0, 2.0];
        let x = project_weighted_l1(&v, &w, 2.0);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = 200_000;
        for k in 0..=steps {
            let a = 2.0 * k as f64 / steps as f64;
            for s in [1.0, -1.0] {
                let x0 = a;
                let x1 = s * (2.0 - a) / 2.0;
                let d = (x0 - v[0]).powi(2) + (x1 - v[1]).powi(2);
                if d < best.0 {
                    best = (d, x0, x1);
                }
            }
        }
        assert!(
            (x[0] - best.1).abs() < 1e-4 && (x[1] - best.2).abs() < 1e-4,
            "{x:?} {best:?}"
        );
    }

    #[test]
    fn lasso_trivial_and_inactive_constraint() {
        let (m, _, u) = planted(30, 1, 6, 3, 2);
        let s = lasso_spg(&m, &u, 0.0).unwrap();
        assert!(s.coefficients.iter().all(|&c| c == 0.0));
        assert!((s.residual_norm - norm2(&u)).abs() < 1e-12);

        // N ≥ P: constraint inactive at τ ≥ ‖W c_LS‖₁
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noisy: Vec<f64> = u
            .iter()
            .map(|x| x + 0.05 * rng.random_range(-1.0..1.0))
            .collect();
        let c_ls = least_squares(&m.values, &noisy).unwrap();
        let ls_res = {
            let a = m.values.matvec(&c_ls);
            norm2(&a.iter().zip(&noisy).map(|(x, y)| y - x).collect::<Vec<_>>())
        };
        let tau: f64 = c_ls
            .iter()
            .zip(&m.column_weights)
            .map(|(c, w)| (c * w).abs())
            .sum();
        let s = lasso_spg(&m, &noisy, 1.01 * tau).unwrap();
        assert!(
            (s.residual_norm - ls_res).abs() < 1e-8,
            "{} vs {}",
            s.residual_norm,
            ls_res
        );
    }

    #[test]
    fn lasso_pareto_curve_is_monotone() {
        let (m, c, u) = planted(40, 2, 8, 5, 6);
        let t_ref: f64 = c
            .iter()
            .zip(&m.column_weights)
            .map(|(c, w)| (c * w).abs())
            .sum();
        let mut prev = f64::INFINITY;
        for f in [0.0, 0.5, 1.0, 2.0] {
            let s = lasso_spg(&m, &u, f * t_ref).unwrap();
            assert!(s.residual_norm <= prev + 1e-12);
            let l1: f64 = s
                .coefficients
                .iter()
                .zip(&m.column_weights)
                .map(|(c, w)| (c * w).abs())
                .sum();
            assert!(l1 <= f * t_ref * (1.0 + 1e-12) + 1e-14);
            prev = s.residual_norm;
        }
    }

    #[test]
    fn bpdn_trivial_cases() {
        let m = identity(4);
        let u = [1.0, -2.0, 0.5, 0.0];
        let r = bpdn(&m, &u, 10.0).unwrap();
        assert!(r.coefficients.iter().all(|&c| c == 0.0));
        let r = bpdn(&m, &u, 0.0).unwrap();
        for (a, b) in r.coefficients.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8, "{:?}", r);
        }
    }

    #[test]
    fn bpdn_recovers_planted_solution() {
        let (m, c, u) = planted(30, 2, 8, 4, 21);
        let r = bpdn(&m, &u, 1e-10).unwrap();
        assert!(
            rel_err(&r.coefficients, &c) <= 1e-4,
            "{}",
            rel_err(&r.coefficients, &c)
        );
    }

    #[test]
    fn bpdn_meets_tolerance_and_beats_omp_in_l1() {
        let (m, _, mut u) = planted(40, 3, 4, 5, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for x in u.iter_mut() {
            *x += 0.05 * rng.random_range(-1.0..1.0);
        }
        for delta in [0.1, 0.3, 1.0] {
            let b = bpdn(&m, &u, delta).unwrap();
            assert!(b.converged(), "{b:?}");
            assert!(b.residual_norm <= delta * (1.0 + 1e-4));
            let o = omp(&m, &u, delta, None).unwrap();
            if o.converged() {
                let lb = b.weighted_l1(&m.column_weights);
                let lo = o.weighted_l1(&m.column_weights);
                assert!(lb <= lo * (1.0 + 1e-3), "{lb} > {lo}");
            }
        }
    }
}
