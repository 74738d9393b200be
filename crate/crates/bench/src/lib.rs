//! Fixtures shared by the benchmarks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsepc::pcbasis::BasisSpec;
use sparsepc::sampling::{assemble_measurement, draw_samples};
use sparsepc::MeasurementMatrix;

/// Noiseless `n`-sample problem on `Λ_{p,d}` with an `s`-sparse solution.
pub fn planted_problem(
    n: usize,
    p: usize,
    d: usize,
    s: usize,
    seed: u64,
) -> (MeasurementMatrix, Vec<f64>, Vec<f64>) {
    let basis = BasisSpec::total_order(p, d).expect("basis");
    let m = assemble_measurement(&basis, &draw_samples(d, n, seed)).expect("matrix");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = vec![0.0; basis.len()];
    for j in sample(&mut rng, basis.len(), s) {
        c[j] = if rng.random::<bool>() { 1.0 } else { -1.0 } * (1.0 + rng.random::<f64>());
    }
    let u = m.values.matvec(&c);
    (m, u, c)
}
