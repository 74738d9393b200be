//! End-to-end stochastic elliptic study.
//!
//! A configured random field drives the finite-element forward model; for
//! each seed the samples are drawn once at the largest budget and every
//! smaller budget uses a prefix of them. Each `(N, solver)` pair gets a
//! cross-validated tolerance, a recovery on all `N` samples, and a
//! comparison against reference coefficients and plain Monte Carlo.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crossval::{estimate_delta_matrix, CrossValPlan, CrossValResult, DeltaGrid};
use crate::femsolver::{assemble_solve_values, eval_solution, Mesh1D, DEFAULT_ELEMENTS};
use crate::klfield::{nystrom_eig, CovarianceSpec, FieldTable, KLExpansion};
use crate::oracle::{
    mc_coeffs, mc_statistics, relative_rms_error, statistics, tensor_quadrature_coeffs,
    CoefficientVector,
};
use crate::pcbasis::BasisSpec;
use crate::sampling::{
    assemble_measurement, coherence_tail_bound, draw_samples, mutual_coherence, sparsity_budget,
    SampleSet, SparsityMode,
};
use crate::solvers::SolverKind;
use crate::{Error, Result};

fn default_quadrature_nodes() -> usize {
    200
}
fn default_n_elements() -> usize {
    DEFAULT_ELEMENTS
}
fn default_eval_point() -> f64 {
    0.5
}
fn default_forcing() -> f64 {
    1.0
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2]
}
fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Omp, SolverKind::Bpdn]
}
fn default_positivity_grid() -> usize {
    1000
}

/// Random diffusion coefficient `ā + σ_a Σ √λ_i φ_i(x) y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub mean: f64,
    pub sigma: f64,
    pub correlation_length: f64,
    /// Number of retained modes, i.e. the stochastic dimension `d`.
    pub dim: usize,
    #[serde(default = "default_quadrature_nodes")]
    pub quadrature_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_n_elements")]
    pub n_elements: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            n_elements: DEFAULT_ELEMENTS,
        }
    }
}

/// One sample budget and the basis used with it: total order `order`
/// plus the first `extra` indices of order `order + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub n: usize,
    pub order: usize,
    #[serde(default)]
    pub extra: usize,
}

impl ScheduleEntry {
    pub fn basis(&self, d: usize) -> Result<BasisSpec> {
        BasisSpec::with_prefix(self.order, d, self.extra)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossValConfig {
    pub replications: usize,
    pub grid_points: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

impl Default for CrossValConfig {
    fn default() -> Self {
        Self {
            replications: crate::crossval::DEFAULT_REPLICATIONS,
            grid_points: crate::crossval::DEFAULT_GRID_POINTS,
            grid_lo: 1e-3,
            grid_hi: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Tensor Gauss–Legendre projection onto `Λ_{order,d}`; `order`
    /// defaults to the highest order in the schedule.
    TensorQuadrature {
        q_per_dim: usize,
        #[serde(default)]
        order: Option<usize>,
    },
    /// Coefficient CSV (`alpha,value`).
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default = "default_eval_point")]
    pub eval_point: f64,
    #[serde(default = "default_forcing")]
    pub forcing: f64,
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub crossval: CrossValConfig,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default = "default_positivity_grid")]
    pub positivity_grid: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let f = &self.field;
        if f.dim == 0 {
            return bad("field.dim must be ≥ 1".into());
        }
        if !(f.correlation_length > 0.0) {
            return bad("field.correlation_length must be positive".into());
        }
        if !(f.sigma >= 0.0) || !f.mean.is_finite() {
            return bad("field.sigma must be ≥ 0 and field.mean finite".into());
        }
        if f.quadrature_nodes < f.dim {
            return bad("field.quadrature_nodes must be ≥ field.dim".into());
        }
        if self.mesh.n_elements == 0 {
            return bad("mesh.n_elements must be ≥ 1".into());
        }
        if !(0.0..=1.0).contains(&self.eval_point) {
            return bad(format!("eval_point {} outside [0, 1]", self.eval_point));
        }
        if !self.forcing.is_finite() {
            return bad("forcing must be finite".into());
        }
        if self.schedule.is_empty() {
            return bad("schedule is empty".into());
        }
        if self.schedule.windows(2).any(|w| w[1].n <= w[0].n) {
            return bad("schedule sample counts must be strictly increasing".into());
        }
        for e in &self.schedule {
            if e.n < 4 {
                return bad(format!(
                    "schedule entry n = {} is too small for cross-validation",
                    e.n
                ));
            }
            e.basis(f.dim)
                .map_err(|err| Error::Config(format!("schedule entry {e:?}: {err}")))?;
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("duplicate seeds".into());
        }
        if self.solvers.is_empty() {
            return bad("no solvers".into());
        }
        let cv = &self.crossval;
        if cv.replications == 0
            || cv.grid_points == 0
            || !(cv.grid_lo > 0.0)
            || !(cv.grid_hi >= cv.grid_lo)
        {
            return bad(
                "crossval needs replications ≥ 1, grid_points ≥ 1, 0 < grid_lo ≤ grid_hi".into(),
            );
        }
        if let Some(ReferenceConfig::TensorQuadrature { q_per_dim: 0, .. }) = self.reference {
            return bad("reference.q_per_dim must be ≥ 1".into());
        }
        Ok(())
    }

    pub fn max_n(&self) -> usize {
        self.schedule.iter().map(|e| e.n).max().unwrap_or(0)
    }

    /// Highest total order appearing in any scheduled basis.
    pub fn max_order(&self) -> usize {
        self.schedule
            .iter()
            .map(|e| e.order + usize::from(e.extra > 0))
            .max()
            .unwrap_or(0)
    }

    /// Identifies everything that determines a forward-solve value apart
    /// from the sample point and the mesh.
    pub fn field_hash(&self) -> String {
        let key = serde_json::json!({
            "field": self.field,
            "eval_point": self.eval_point,
            "forcing": self.forcing,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Cross-validation plan for `n` samples under the configured settings.
    pub fn crossval_plan(&self, n: usize, seed: u64) -> Result<CrossValPlan> {
        CrossValPlan::new(n, seed)?
            .with_replications(self.crossval.replications)
            .with_grid(DeltaGrid::Relative {
                points: self.crossval.grid_points,
                lo: self.crossval.grid_lo,
                hi: self.crossval.grid_hi,
            })
            .validated()
    }
}

/// `y ↦ u(x*, y)`: field realization, FEM solve, point evaluation.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    kl: KLExpansion,
    table: FieldTable,
    mesh: Mesh1D,
    forcing: f64,
    eval_point: f64,
}

impl ForwardModel {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let f = &config.field;
        let kl = nystrom_eig(
            CovarianceSpec::new(f.correlation_length)?,
            f.quadrature_nodes,
            f.dim,
        )?
        .with_field(f.mean, f.sigma)?;
        let mesh = Mesh1D::uniform(config.mesh.n_elements)?;
        let table = kl.tabulate(&mesh.quadrature_points())?;
        Ok(Self {
            kl,
            table,
            mesh,
            forcing: config.forcing,
            eval_point: config.eval_point,
        })
    }

    pub fn kl(&self) -> &KLExpansion {
        &self.kl
    }

    pub fn mesh(&self) -> Mesh1D {
        self.mesh
    }

    pub fn solve(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.kl.d() {
            return Err(Error::DimensionMismatch {
                expected: self.kl.d(),
                got: y.len(),
            });
        }
        let a = self.table.eval(y);
        let sol = assemble_solve_values(&a, self.forcing, self.mesh)?;
        eval_solution(&sol, self.eval_point)
    }
}

const CACHE_HEADER: &str = "seed,index,field_hash,n_elements,value";

/// Forward-solve values keyed by `(seed, sample index)` for one field hash
/// and mesh, optionally persisted as CSV. Rows for other fields or meshes
/// found in the file are kept untouched.
#[derive(Debug)]
pub struct ForwardCache {
    path: Option<PathBuf>,
    field_hash: String,
    n_elements: usize,
    entries: BTreeMap<(u64, u64), f64>,
    foreign: Vec<String>,
    solves: usize,
    hits: usize,
}

impl ForwardCache {
    pub fn in_memory(field_hash: &str, n_elements: usize) -> Self {
        Self {
            path: None,
            field_hash: field_hash.to_string(),
            n_elements,
            entries: BTreeMap::new(),
            foreign: Vec::new(),
            solves: 0,
            hits: 0,
        }
    }

    /// Opens (or starts) the cache file at `path`.
    pub fn open(path: &Path, field_hash: &str, n_elements: usize) -> Result<Self> {
        let mut c = Self::in_memory(field_hash, n_elements);
        c.path = Some(path.to_path_buf());
        if !path.exists() {
            return Ok(c);
        }
        let text = fs::read_to_string(path)?;
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let parsed = (f.len() == 5)
                .then(|| {
                    Some((
                        f[0].parse::<u64>().ok()?,
                        f[1].parse::<u64>().ok()?,
                        f[3].parse::<usize>().ok()?,
                        f[4].parse::<f64>().ok()?,
                    ))
                })
                .flatten();
            let (seed, index, ne, value) = parsed.ok_or_else(|| {
                Error::Parse(format!("bad cache row `{line}` in {}", path.display()))
            })?;
            if f[2] == field_hash && ne == n_elements {
                c.entries.insert((seed, index), value);
            } else {
                c.foreign.push(line.to_string());
            }
        }
        Ok(c)
    }

    /// FEM solves performed through this cache (misses).
    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Values for every row of `samples`; rows not cached yet are solved in
    /// parallel. Returns the values and the number of new solves.
    pub fn values(
        &mut self,
        model: &ForwardModel,
        samples: &SampleSet,
    ) -> Result<(Vec<f64>, usize)> {
        let seed = samples.seed;
        let offset = samples.stream_position as u64;
        let missing: Vec<usize> = (0..samples.len())
            .filter(|&i| !self.entries.contains_key(&(seed, offset + i as u64)))
            .collect();
        let solved = missing
            .par_iter()
            .map(|&i| model.solve(samples.point(i)))
            .collect::<Result<Vec<_>>>()?;
        for (&i, v) in missing.iter().zip(solved) {
            self.entries.insert((seed, offset + i as u64), v);
        }
        self.solves += missing.len();
        self.hits += samples.len() - missing.len();
        if !missing.is_empty() {
            self.persist()?;
        }
        let values = (0..samples.len())
            .map(|i| self.entries[&(seed, offset + i as u64)])
            .collect();
        Ok((values, missing.len()))
    }

    fn persist(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "{CACHE_HEADER}")?;
        for line in &self.foreign {
            writeln!(w, "{line}")?;
        }
        for ((seed, index), v) in &self.entries {
            writeln!(
                w,
                "{seed},{index},{},{},{v}",
                self.field_hash, self.n_elements
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One line of `report.csv`. `solver` is `omp`, `bpdn` or `mc` (plain Monte
/// Carlo: sample mean/std and the sample-average projection of the
/// coefficients). Missing values mean the row failed or no reference is
/// available; `status` says which.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub seed: u64,
    pub n: usize,
    pub order: usize,
    pub extra: usize,
    pub basis_size: usize,
    pub solver: String,
    pub chosen_delta: Option<f64>,
    pub residual_norm: Option<f64>,
    pub support_size: Option<usize>,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
    pub rel_err_mean: Option<f64>,
    pub rel_err_std: Option<f64>,
    pub rel_rms_err: Option<f64>,
    pub status: String,
}

pub const REPORT_COLUMNS: [&str; 15] = [
    "seed",
    "n",
    "order",
    "extra",
    "basis_size",
    "solver",
    "chosen_delta",
    "residual_norm",
    "support_size",
    "mean",
    "std_dev",
    "rel_err_mean",
    "rel_err_std",
    "rel_rms_err",
    "status",
];

impl ReportRow {
    fn blank(seed: u64, e: &ScheduleEntry, basis_size: usize, solver: &str) -> Self {
        Self {
            seed,
            n: e.n,
            order: e.order,
            extra: e.extra,
            basis_size,
            solver: solver.to_string(),
            chosen_delta: None,
            residual_norm: None,
            support_size: None,
            mean: None,
            std_dev: None,
            rel_err_mean: None,
            rel_err_std: None,
            rel_rms_err: None,
            status: "ok".into(),
        }
    }

    fn fill_stats(
        &mut self,
        mean: f64,
        std: f64,
        c: Option<&CoefficientVector>,
        reference: Option<&Reference>,
    ) {
        self.mean = Some(mean);
        self.std_dev = Some(std);
        if let Some(r) = reference {
            self.rel_err_mean = Some(relative_or_absolute(mean, r.mean));
            self.rel_err_std = Some(relative_or_absolute(std, r.std_dev));
            self.rel_rms_err = c.map(|c| relative_rms_error(c, &r.coefficients));
        } else if self.status == "ok" {
            self.status = "no_reference".into();
        } else {
            self.status.push_str(";no_reference");
        }
    }

    fn csv_line(&self) -> String {
        let o = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        [
            self.seed.to_string(),
            self.n.to_string(),
            self.order.to_string(),
            self.extra.to_string(),
            self.basis_size.to_string(),
            self.solver.clone(),
            o(self.chosen_delta),
            o(self.residual_norm),
            self.support_size.map_or(String::new(), |s| s.to_string()),
            o(self.mean),
            o(self.std_dev),
            o(self.rel_err_mean),
            o(self.rel_err_std),
            o(self.rel_rms_err),
            self.status.replace(',', ";"),
        ]
        .join(",")
    }
}

fn relative_or_absolute(x: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        x.abs()
    } else {
        ((x - reference) / reference).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub coefficients: CoefficientVector,
    pub mean: f64,
    pub std_dev: f64,
}

impl Reference {
    pub fn new(coefficients: CoefficientVector) -> Self {
        let (mean, std_dev) = statistics(&coefficients);
        Self {
            coefficients,
            mean,
            std_dev,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub seed: u64,
    pub n: usize,
    pub solver: SolverKind,
    pub result: CrossValResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRecord {
    pub seed: u64,
    pub n: usize,
    pub solver: String,
    pub coefficients: CoefficientVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub seed: u64,
    pub n: usize,
    pub solver: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub curves: Vec<CurveRecord>,
    pub coefficients: Vec<CoefficientRecord>,
    pub reference: Option<Reference>,
    pub positivity_margin: f64,
    pub warnings: Vec<String>,
    /// FEM solves performed for each seed in this run (cache misses).
    pub forward_solves: Vec<(u64, usize)>,
    pub cache_hits: usize,
    /// Wall-clock time per row; kept out of `report.csv` so that file is
    /// reproducible.
    pub timings: Vec<Timing>,
}

impl ExperimentReport {
    pub fn rows_for(&self, solver: &str) -> impl Iterator<Item = &ReportRow> + '_ {
        let solver = solver.to_string();
        self.rows.iter().filter(move |r| r.solver == solver)
    }

    pub fn write_report_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", REPORT_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.csv_line())?;
        }
        Ok(())
    }

    /// Writes `report.csv`, `summary.json`, `timings.csv`,
    /// `run_stats.json`, `reference.csv`, and per-row validation curves and
    /// coefficients under `curves/` and `coefficients/`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("curves"))?;
        fs::create_dir_all(dir.join("coefficients"))?;
        self.write_report_csv(BufWriter::new(fs::File::create(dir.join("report.csv"))?))?;

        let summary = serde_json::json!({
            "columns": REPORT_COLUMNS,
            "config": self.config,
            "field_hash": self.config.field_hash(),
            "positivity_margin": self.positivity_margin,
            "reference": self.reference.as_ref().map(|r| serde_json::json!({
                "mean": r.mean,
                "std_dev": r.std_dev,
                "basis_size": r.coefficients.len(),
            })),
            "rows": self.rows,
            "warnings": self.warnings,
        });
        fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;

        let stats = serde_json::json!({
            "forward_solves": self.forward_solves.iter().map(|(s, n)| serde_json::json!({"seed": s, "solves": n})).collect::<Vec<_>>(),
            "cache_hits": self.cache_hits,
        });
        fs::write(
            dir.join("run_stats.json"),
            serde_json::to_string_pretty(&stats)?,
        )?;

        let mut t = BufWriter::new(fs::File::create(dir.join("timings.csv"))?);
        writeln!(t, "seed,n,solver,seconds")?;
        for x in &self.timings {
            writeln!(t, "{},{},{},{}", x.seed, x.n, x.solver, x.seconds)?;
        }
        t.flush()?;

        if let Some(r) = &self.reference {
            r.coefficients
                .write_csv(BufWriter::new(fs::File::create(dir.join("reference.csv"))?))?;
        }
        for c in &self.curves {
            let name = format!("cv_seed{}_n{}_{}.csv", c.seed, c.n, c.solver);
            c.result.write_csv(BufWriter::new(fs::File::create(
                dir.join("curves").join(name),
            )?))?;
        }
        for c in &self.coefficients {
            let name = format!("seed{}_n{}_{}.csv", c.seed, c.n, c.solver);
            c.coefficients.write_csv(BufWriter::new(fs::File::create(
                dir.join("coefficients").join(name),
            )?))?;
        }
        Ok(())
    }
}

/// Reference coefficients as configured.
pub fn compute_reference(
    config: &ExperimentConfig,
    model: &ForwardModel,
) -> Result<Option<Reference>> {
    let coefficients = match &config.reference {
        None => return Ok(None),
        Some(ReferenceConfig::TensorQuadrature { q_per_dim, order }) => {
            let basis =
                BasisSpec::total_order(order.unwrap_or(config.max_order()), config.field.dim)?;
            tensor_quadrature_coeffs(|y| model.solve(y), &basis, *q_per_dim)?
        }
        Some(ReferenceConfig::File { path }) => {
            let f = fs::File::open(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let c = CoefficientVector::read_csv(std::io::BufReader::new(f))?;
            if c.basis().dim() != config.field.dim {
                return Err(Error::Config(format!(
                    "reference has dimension {}, field has {}",
                    c.basis().dim(),
                    config.field.dim
                )));
            }
            c
        }
    };
    Ok(Some(Reference::new(coefficients)))
}

/// Runs the configured study. With `out` set, forward solves are cached in
/// `out/forward_cache.csv` and reused by later runs; the report itself is
/// written separately by [`ExperimentReport::write_to`].
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    config.validate()?;
    let model = ForwardModel::new(config)?;
    let d = config.field.dim;
    let mut warnings = Vec::new();

    let positivity_margin = model.kl().positivity_margin(config.positivity_grid);
    if positivity_margin <= 0.0 {
        warnings.push(format!(
            "positivity margin {positivity_margin} ≤ 0: some realizations may have a non-positive coefficient"
        ));
    }
    let reference = match compute_reference(config, &model) {
        Ok(r) => r,
        Err(e) => {
            warnings.push(format!("reference unavailable: {e}"));
            None
        }
    };

    let hash = config.field_hash();
    let mut cache = match out {
        Some(dir) => ForwardCache::open(
            &dir.join("forward_cache.csv"),
            &hash,
            config.mesh.n_elements,
        )?,
        None => ForwardCache::in_memory(&hash, config.mesh.n_elements),
    };

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut coefficients = Vec::new();
    let mut timings = Vec::new();
    let mut forward_solves = Vec::new();

    for &seed in &config.seeds {
        let samples = draw_samples(d, config.max_n(), seed);
        let values = match cache.values(&model, &samples) {
            Ok((v, solved)) => {
                forward_solves.push((seed, solved));
                v
            }
            Err(e) => {
                forward_solves.push((seed, 0));
                for entry in &config.schedule {
                    let size = entry.basis(d).map_or(0, |b| b.len());
                    for s in config
                        .solvers
                        .iter()
                        .map(|s| s.to_string())
                        .chain(["mc".to_string()])
                    {
                        let mut row = ReportRow::blank(seed, entry, size, &s);
                        row.status = format!("error: forward solve failed: {e}");
                        rows.push(row);
                    }
                }
                continue;
            }
        };

        for entry in &config.schedule {
            let basis = entry.basis(d)?;
            let sub = samples.prefix(entry.n);
            let u = &values[..entry.n];
            let m = assemble_measurement(&basis, &sub)?;

            for &solver in &config.solvers {
                let start = Instant::now();
                let mut row = ReportRow::blank(seed, entry, basis.len(), &solver.to_string());
                let outcome = config.crossval_plan(entry.n, seed).and_then(|plan| {
                    let cv = estimate_delta_matrix(&m, u, solver, &plan)?;
                    let res = solver.solve(&m, u, cv.chosen_delta)?;
                    Ok((cv, res))
                });
                match outcome {
                    Ok((cv, res)) => {
                        row.chosen_delta = Some(cv.chosen_delta);
                        row.residual_norm = Some(res.residual_norm);
                        row.support_size = Some(res.support.len());
                        if !res.converged() {
                            row.status = serde_json::to_value(res.status)?
                                .as_str()
                                .unwrap_or("unknown")
                                .to_string();
                        }
                        let c = CoefficientVector::new(basis.clone(), res.coefficients)?;
                        let (mean, std) = statistics(&c);
                        row.fill_stats(mean, std, Some(&c), reference.as_ref());
                        curves.push(CurveRecord {
                            seed,
                            n: entry.n,
                            solver,
                            result: cv,
                        });
                        coefficients.push(CoefficientRecord {
                            seed,
                            n: entry.n,
                            solver: solver.to_string(),
                            coefficients: c,
                        });
                    }
                    Err(e) => row.status = format!("error: {e}"),
                }
                rows.push(row);
                timings.push(Timing {
                    seed,
                    n: entry.n,
                    solver: solver.to_string(),
                    seconds: start.elapsed().as_secs_f64(),
                });
            }

            let start = Instant::now();
            let mut row = ReportRow::blank(seed, entry, basis.len(), "mc");
            let c = mc_coeffs(&sub, u, &basis)?;
            let (mean, std) = mc_statistics(u)?;
            row.fill_stats(mean, std, Some(&c), reference.as_ref());
            rows.push(row);
            coefficients.push(CoefficientRecord {
                seed,
                n: entry.n,
                solver: "mc".into(),
                coefficients: c,
            });
            timings.push(Timing {
                seed,
                n: entry.n,
                solver: "mc".into(),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }

    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        curves,
        coefficients,
        reference,
        positivity_margin,
        warnings,
        forward_solves,
        cache_hits: cache.hits(),
        timings,
    })
}

/// Coherence and sparsity-budget diagnostics for one `(seed, N)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnoseRow {
    pub seed: u64,
    pub n: usize,
    pub order: usize,
    pub basis_size: usize,
    pub coherence: f64,
    pub tail_r: f64,
    pub tail_prob_bound: f64,
    pub tail_applicable: bool,
    pub smax_l1: f64,
    pub smax_l0: f64,
}

/// Mutual coherence of the scheduled measurement matrices, with the
/// theoretical tail bound (parameter `zeta`) and sparsity budgets for the
/// basis order in use.
pub fn diagnose(config: &ExperimentConfig, zeta: f64) -> Result<Vec<DiagnoseRow>> {
    config.validate()?;
    let d = config.field.dim;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let samples = draw_samples(d, config.max_n(), seed);
        for e in &config.schedule {
            let basis = e.basis(d)?;
            let p = basis.order();
            let m = assemble_measurement(&basis, &samples.prefix(e.n))?;
            let bound = coherence_tail_bound(e.n, p, d, zeta)?;
            rows.push(DiagnoseRow {
                seed,
                n: e.n,
                order: p,
                basis_size: basis.len(),
                coherence: mutual_coherence(&m)?,
                tail_r: bound.r,
                tail_prob_bound: bound.prob_bound,
                tail_applicable: bound.applicable,
                smax_l1: sparsity_budget(e.n, p, d, SparsityMode::L1)?,
                smax_l0: sparsity_budget(e.n, p, d, SparsityMode::L0)?,
            });
        }
    }
    Ok(rows)
}

pub fn write_diagnose_csv<W: Write>(rows: &[DiagnoseRow], mut w: W) -> Result<()> {
    writeln!(
        w,
        "seed,n,order,basis_size,coherence,tail_r,tail_prob_bound,tail_applicable,smax_l1,smax_l0"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.n,
            r.order,
            r.basis_size,
            r.coherence,
            r.tail_r,
            r.tail_prob_bound,
            r.tail_applicable,
            r.smax_l1,
            r.smax_l0
        )?;
    }
    Ok(())
}
