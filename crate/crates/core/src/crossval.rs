//! Choice of the residual tolerance `δ` by repeated reconstruction /
//! validation splits.
//!
//! For each candidate `δ_r` the solver runs on `N_r` reconstruction samples
//! and is scored by the residual `δ_v` on the remaining samples. The
//! minimizer `δ̂_r` of the replication-averaged `δ_v` is rescaled to the full
//! sample size as `δ = √(N/N_r) δ̂_r`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::norm2;
use crate::pcbasis::BasisSpec;
use crate::sampling::{assemble_measurement, MeasurementMatrix, SampleSet};
use crate::solvers::SolverKind;
use crate::{Error, Result};

pub const DEFAULT_REPLICATIONS: usize = 4;
pub const DEFAULT_GRID_POINTS: usize = 12;

/// Candidate reconstruction tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaGrid {
    /// Fixed values (sorted and deduplicated on use).
    Explicit(Vec<f64>),
    /// `points` log-spaced values in `[lo, hi]·‖u_r‖₂`, with `u_r` the
    /// reconstruction values of replication 0.
    Relative { points: usize, lo: f64, hi: f64 },
}

impl Default for DeltaGrid {
    fn default() -> Self {
        DeltaGrid::Relative {
            points: DEFAULT_GRID_POINTS,
            lo: 1e-3,
            hi: 1.0,
        }
    }
}

impl DeltaGrid {
    fn resolve(&self, base: f64) -> Result<Vec<f64>> {
        let mut g = match self {
            DeltaGrid::Explicit(v) => v.clone(),
            DeltaGrid::Relative { points, lo, hi } => {
                if *points == 0 || !(*lo > 0.0) || !(hi >= lo) {
                    return Err(Error::InvalidArgument(format!(
                        "bad relative grid: {points} points in [{lo}, {hi}]"
                    )));
                }
                if *points == 1 {
                    vec![lo * base]
                } else {
                    let (a, b) = (lo.ln(), hi.ln());
                    (0..*points)
                        .map(|k| base * (a + (b - a) * k as f64 / (*points - 1) as f64).exp())
                        .collect()
                }
            }
        };
        if g.is_empty() || g.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "delta grid must be non-empty with positive finite values".into(),
            ));
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValPlan {
    pub n_total: usize,
    pub n_reconstruction: usize,
    pub replications: usize,
    pub delta_grid: DeltaGrid,
    pub seed: u64,
}

impl CrossValPlan {
    /// `N_r = ⌊3N/4⌋`, four replications, default relative grid.
    pub fn new(n_total: usize, seed: u64) -> Result<Self> {
        Self {
            n_total,
            n_reconstruction: 3 * n_total / 4,
            replications: DEFAULT_REPLICATIONS,
            delta_grid: DeltaGrid::default(),
            seed,
        }
        .validated()
    }

    pub fn with_grid(mut self, grid: DeltaGrid) -> Self {
        self.delta_grid = grid;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_reconstruction == 0 || self.n_reconstruction >= self.n_total {
            return Err(Error::InvalidArgument(format!(
                "need 0 < N_r < N, got N_r = {}, N = {}",
                self.n_reconstruction, self.n_total
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidArgument(
                "need at least one replication".into(),
            ));
        }
        Ok(self)
    }
}

/// Reconstruction and validation row indices (each sorted ascending) for one
/// replication. Deterministic in `(plan.seed, replication)`.
pub fn split_indices(plan: &CrossValPlan, replication: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let plan = plan.clone().validated()?;
    if replication >= plan.replications {
        return Err(Error::InvalidArgument(format!(
            "replication {replication} out of range (plan has {})",
            plan.replications
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(replication as u64);
    let mut perm: Vec<usize> = (0..plan.n_total).collect();
    perm.shuffle(&mut rng);
    let (r, v) = perm.split_at(plan.n_reconstruction);
    let (mut r, mut v) = (r.to_vec(), v.to_vec());
    r.sort_unstable();
    v.sort_unstable();
    Ok((r, v))
}

pub type Part = (SampleSet, Vec<f64>);

/// Splits samples and values into `(reconstruction, validation)` parts.
pub fn split(
    samples: &SampleSet,
    values: &[f64],
    plan: &CrossValPlan,
    replication: usize,
) -> Result<(Part, Part)> {
    check_sizes(plan, samples.len(), values.len())?;
    let (r, v) = split_indices(plan, replication)?;
    let pick = |rows: &[usize]| -> Part {
        (
            samples.select(rows),
            rows.iter().map(|&i| values[i]).collect(),
        )
    };
    Ok((pick(&r), pick(&v)))
}

fn check_sizes(plan: &CrossValPlan, n_rows: usize, n_values: usize) -> Result<()> {
    if n_rows != plan.n_total || n_values != plan.n_total {
        return Err(Error::DimensionMismatch {
            expected: plan.n_total,
            got: if n_rows != plan.n_total {
                n_rows
            } else {
                n_values
            },
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta_r: f64,
    /// Mean of the successful replications; `None` if every solve failed.
    pub mean_delta_v: Option<f64>,
    pub per_replication: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValResult {
    pub chosen_delta: f64,
    pub delta_r_hat: f64,
    pub n_total: usize,
    pub n_reconstruction: usize,
    pub validation_curve: Vec<CurvePoint>,
}

impl CrossValResult {
    /// `delta_r,mean_delta_v,delta_v_0,…`; failed entries are written `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let reps = self
            .validation_curve
            .first()
            .map_or(0, |c| c.per_replication.len());
        let mut header = vec!["delta_r".to_string(), "mean_delta_v".to_string()];
        header.extend((0..reps).map(|r| format!("delta_v_{r}")));
        writeln!(w, "{}", header.join(","))?;
        let fmt = |v: Option<f64>| v.map_or("nan".to_string(), |x| x.to_string());
        for p in &self.validation_curve {
            let mut row = vec![p.delta_r.to_string(), fmt(p.mean_delta_v)];
            row.extend(p.per_replication.iter().map(|v| fmt(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Cross-validated `δ` for `solver` on sample points and values.
pub fn estimate_delta(
    samples: &SampleSet,
    values: &[f64],
    basis: &BasisSpec,
    solver: SolverKind,
    plan: &CrossValPlan,
) -> Result<CrossValResult> {
    let m = assemble_measurement(basis, samples)?;
    estimate_delta_matrix(&m, values, solver, plan)
}

/// As [`estimate_delta`] with the full measurement matrix already built.
pub fn estimate_delta_matrix(
    m: &MeasurementMatrix,
    values: &[f64],
    solver: SolverKind,
    plan: &CrossValPlan,
) -> Result<CrossValResult> {
    check_sizes(plan, m.nrows(), values.len())?;
    let splits = (0..plan.replications)
        .map(|r| split_indices(plan, r))
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<(MeasurementMatrix, Vec<f64>, MeasurementMatrix, Vec<f64>)> = splits
        .iter()
        .map(|(r, v)| {
            (
                m.select_rows(r),
                r.iter().map(|&i| values[i]).collect(),
                m.select_rows(v),
                v.iter().map(|&i| values[i]).collect(),
            )
        })
        .collect();
    let grid = plan.delta_grid.resolve(norm2(&parts[0].1))?;

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..plan.replications).map(move |r| (g, r)))
        .collect();
    let scores: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let (mr, ur, mv, uv) = &parts[r];
            solver.solve(mr, ur, grid[g]).ok().map(|res| {
                let pred = mv.values.matvec(&res.coefficients);
                let diff: Vec<f64> = pred.iter().zip(uv).map(|(a, b)| a - b).collect();
                norm2(&diff)
            })
        })
        .collect();

    let curve: Vec<CurvePoint> = grid
        .iter()
        .enumerate()
        .map(|(g, &delta_r)| {
            let per: Vec<Option<f64>> =
                scores[g * plan.replications..(g + 1) * plan.replications].to_vec();
            let ok: Vec<f64> = per.iter().flatten().copied().collect();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            CurvePoint {
                delta_r,
                mean_delta_v: mean,
                per_replication: per,
            }
        })
        .collect();

    // strict < keeps the smallest δ_r among ties
    let mut best: Option<(f64, f64)> = None;
    for p in &curve {
        if let Some(v) = p.mean_delta_v {
            if best.is_none_or(|(_, bv)| v < bv) {
                best = Some((p.delta_r, v));
            }
        }
    }
    let (delta_r_hat, _) = best.ok_or(Error::CrossValidationFailed)?;
    Ok(CrossValResult {
        chosen_delta: (plan.n_total as f64 / plan.n_reconstruction as f64).sqrt() * delta_r_hat,
        delta_r_hat,
        n_total: plan.n_total,
        n_reconstruction: plan.n_reconstruction,
        validation_curve: curve,
    })
}
