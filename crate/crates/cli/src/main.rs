//! `sparsepc` command-line driver.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures.

use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparsepc::crossval::{estimate_delta_matrix, CrossValPlan};
use sparsepc::experiment::{
    compute_reference, diagnose, run_experiment, write_diagnose_csv, ExperimentConfig,
    ForwardModel, ReferenceConfig,
};
use sparsepc::oracle::CoefficientVector;
use sparsepc::sampling::{assemble_measurement, draw_samples};
use sparsepc::solvers::RecoveryStatus;
use sparsepc::{Error, MeasurementMatrix, SolverKind};

#[derive(Parser)]
#[command(
    name = "sparsepc",
    version,
    about = "Sparse polynomial-chaos recovery and stochastic elliptic experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seeds with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Recover coefficients from a measurement matrix and sample values.
    Recover(RecoverArgs),
    /// Run the configured study and write the report.
    Experiment,
    /// Coherence and sparsity-budget table for the configured schedule.
    Diagnose {
        /// Tail-bound parameter.
        #[arg(long, default_value_t = 2.0)]
        zeta: f64,
    },
    /// Reference coefficients by tensor Gauss–Legendre projection.
    Oracle {
        /// Nodes per dimension (overrides the configured reference).
        #[arg(long)]
        q: Option<usize>,
        /// Total order of the reference basis.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Cross-validation curves, from a matrix and values or from a config.
    Crossval(CrossvalArgs),
}

#[derive(Args)]
struct RecoverArgs {
    /// Measurement matrix CSV (as written by this tool's library).
    #[arg(long)]
    matrix: PathBuf,
    /// Sample values, one per line.
    #[arg(long)]
    values: PathBuf,
    #[arg(long, default_value = "bpdn")]
    solver: SolverKind,
    /// Residual tolerance; chosen by cross-validation when omitted.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long, requires = "values")]
    matrix: Option<PathBuf>,
    #[arg(long, requires = "matrix")]
    values: Option<PathBuf>,
    /// Solver used for matrix input; config input uses the configured list.
    #[arg(long, default_value = "bpdn")]
    solver: SolverKind,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::CardinalityOverflow { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

type Res<T> = sparsepc::Result<T>;

fn dispatch(cli: &Cli) -> Res<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Recover(a) => recover(g, a),
        Command::Experiment => experiment(g),
        Command::Diagnose { zeta } => {
            let config = load_config(g)?;
            let rows = diagnose(&config, *zeta)?;
            emit(g, "diagnose.csv", |w| write_diagnose_csv(&rows, w))?;
            Ok(0)
        }
        Command::Oracle { q, order } => oracle(g, *q, *order),
        Command::Crossval(a) => crossval(g, a),
    }
}

fn load_config(g: &Global) -> Res<ExperimentConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config <path>".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = g.seed {
        config.seeds = vec![seed];
    }
    Ok(config)
}

/// Writes to `out/name` when `--out` is given, otherwise to stdout.
fn emit(g: &Global, name: &str, f: impl FnOnce(&mut dyn Write) -> Res<()>) -> Res<()> {
    match &g.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let mut file = io::BufWriter::new(fs::File::create(dir.join(name))?);
            f(&mut file)?;
            file.flush()?;
            eprintln!("wrote {}", dir.join(name).display());
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Res<MeasurementMatrix> {
    let f = fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    MeasurementMatrix::read_csv(BufReader::new(f))
}

fn read_values(path: &Path) -> Res<Vec<f64>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::Parse(format!("{}: bad value `{l}`", path.display())))
        })
        .collect()
}

fn recover(g: &Global, a: &RecoverArgs) -> Res<u8> {
    let m = read_matrix(&a.matrix)?;
    let u = read_values(&a.values)?;
    if u.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: u.len(),
        });
    }
    let delta = match a.delta {
        Some(d) => d,
        None => {
            let plan = CrossValPlan::new(m.nrows(), g.seed.or(m.seed).unwrap_or(0))?;
            estimate_delta_matrix(&m, &u, a.solver, &plan)?.chosen_delta
        }
    };
    let res = a.solver.solve(&m, &u, delta)?;
    let c = CoefficientVector::new(m.basis.clone(), res.coefficients.clone())?;
    emit(g, "coefficients.csv", |w| c.write_csv(w))?;
    let summary = serde_json::json!({
        "solver": a.solver,
        "delta": delta,
        "residual_norm": res.residual_norm,
        "support_size": res.support.len(),
        "iterations": res.iterations,
        "status": res.status,
    });
    if let Some(dir) = &g.out {
        fs::write(
            dir.join("recovery.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
    } else {
        eprintln!("{summary}");
    }
    match res.status {
        RecoveryStatus::NotConverged => Ok(3),
        RecoveryStatus::Converged => Ok(0),
        other => {
            eprintln!("warning: solver finished with status {other:?}");
            Ok(0)
        }
    }
}

fn experiment(g: &Global) -> Res<u8> {
    let config = load_config(g)?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let report = run_experiment(&config, Some(&out))?;
    report.write_to(&out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let failed = report
        .rows
        .iter()
        .filter(|r| r.status.starts_with("error"))
        .count();
    eprintln!(
        "{} rows, forward solves {:?}, cache hits {}; report in {}",
        report.rows.len(),
        report.forward_solves,
        report.cache_hits,
        out.display()
    );
    if failed > 0 {
        eprintln!("{failed} rows failed");
        return Ok(3);
    }
    Ok(0)
}

fn oracle(g: &Global, q: Option<usize>, order: Option<usize>) -> Res<u8> {
    let mut config = load_config(g)?;
    let (cfg_q, cfg_order) = match &config.reference {
        Some(ReferenceConfig::TensorQuadrature { q_per_dim, order }) => (Some(*q_per_dim), *order),
        _ => (None, None),
    };
    config.reference = Some(ReferenceConfig::TensorQuadrature {
        q_per_dim: q.or(cfg_q).unwrap_or(7),
        order: order.or(cfg_order),
    });
    config.validate()?;
    let model = ForwardModel::new(&config)?;
    let reference = compute_reference(&config, &model)?.expect("reference is configured");
    emit(g, "reference.csv", |w| reference.coefficients.write_csv(w))?;
    eprintln!("mean {} std {}", reference.mean, reference.std_dev);
    Ok(0)
}

fn crossval(g: &Global, a: &CrossvalArgs) -> Res<u8> {
    if let (Some(mp), Some(vp)) = (&a.matrix, &a.values) {
        let m = read_matrix(mp)?;
        let u = read_values(vp)?;
        let plan = CrossValPlan::new(m.nrows(), g.seed.or(m.seed).unwrap_or(0))?;
        let res = estimate_delta_matrix(&m, &u, a.solver, &plan)?;
        emit(g, "crossval.csv", |w| res.write_csv(w))?;
        eprintln!(
            "delta_r_hat {} chosen_delta {}",
            res.delta_r_hat, res.chosen_delta
        );
        return Ok(0);
    }
    let config = load_config(g)?;
    let model = ForwardModel::new(&config)?;
    let d = config.field.dim;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let mut cache = sparsepc::experiment::ForwardCache::open(
        &out.join("forward_cache.csv"),
        &config.field_hash(),
        config.mesh.n_elements,
    )?;
    for &seed in &config.seeds {
        let samples = draw_samples(d, config.max_n(), seed);
        let (values, _) = cache.values(&model, &samples)?;
        for e in &config.schedule {
            let m = assemble_measurement(&e.basis(d)?, &samples.prefix(e.n))?;
            for &solver in &config.solvers {
                let plan = config.crossval_plan(e.n, seed)?;
                let res = estimate_delta_matrix(&m, &values[..e.n], solver, &plan)?;
                let name = format!("cv_seed{seed}_n{}_{solver}.csv", e.n);
                let mut f = io::BufWriter::new(fs::File::create(out.join(&name))?);
                res.write_csv(&mut f)?;
                f.flush()?;
                eprintln!("{name}: chosen_delta {}", res.chosen_delta);
            }
        }
    }
    Ok(0)
}
