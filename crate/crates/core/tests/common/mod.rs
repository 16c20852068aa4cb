#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use panelvar::model::{simulate, CountryData, Deterministic, Month, PanelDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = normal_matrix(n, n, rng);
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

pub fn start() -> Month {
    Month::new(2003, 1).unwrap()
}

/// Simulates a VAR with Gaussian innovations of covariance `chol·cholᵀ`,
/// discarding a burn-in.
pub fn simulate_var(
    b: &DMatrix<f64>,
    intercept: &DMatrix<f64>,
    chol: &DMatrix<f64>,
    t: usize,
    rng: &mut impl Rng,
) -> DMatrix<f64> {
    let n = b.ncols();
    let lags = b.nrows() / n;
    let burn = 100;
    let shocks = normal_matrix(t + burn, n, rng) * chol.transpose();
    let z = DMatrix::from_element(t + burn, 1, 1.0);
    let y = simulate(b, intercept, &DMatrix::zeros(lags, n), &z, &shocks).unwrap();
    y.rows(lags + burn, t).clone_owned()
}

pub fn panel_from(ys: Vec<DMatrix<f64>>) -> PanelDataset {
    let n = ys[0].ncols();
    PanelDataset::new(
        (0..n).map(|i| format!("v{i}")).collect(),
        ys.into_iter()
            .enumerate()
            .map(|(i, y)| CountryData::new(format!("C{i}"), start(), y, Deterministic::Intercept))
            .collect(),
    )
    .unwrap()
}
