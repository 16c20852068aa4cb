#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use panelvar::model::simulate;
use panelvar::{CountryData, Deterministic, Month, PanelDataset};
use panelvar_ingest::catalog::Variant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(r: usize, c: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn start() -> Month {
    Month::new(2003, 1).unwrap()
}

/// Impact matrix whose first three columns meet the baseline sign and zero
/// pattern, at impact and under a diagonal positive-persistence VAR.
pub fn conforming_impact() -> DMatrix<f64> {
    let mut a = DMatrix::zeros(7, 7);
    a.set_column(0, &DVector::from_vec(vec![-1.0, 0.2, -0.8, -0.5, 0.1, 0.1, 0.1]));
    a.set_column(1, &DVector::from_vec(vec![-0.6, 0.1, -0.7, 0.6, 0.0, 0.2, -0.1]));
    a.set_column(2, &DVector::from_vec(vec![-0.4, 0.1, -0.3, 0.4, 0.5, 0.8, -0.3]));
    for (col, row) in [(3, 1), (4, 4), (5, 5), (6, 6)] {
        a[(row, col)] = 1.0;
    }
    a
}

/// Lag-one coefficients of the synthetic structural VAR.
pub fn persistence() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![0.8, 0.7, 0.75, 0.7, 0.8, 0.75, 0.7]))
}

/// `T` observations of the structural VAR `y_t = c + B'y_{t−1} + A ε_t`.
pub fn simulate_country(impact: &DMatrix<f64>, t: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let b = persistence();
    let n = b.ncols();
    let burn = 100;
    let intercept = DMatrix::from_fn(1, n, |_, j| 0.1 * j as f64);
    let shocks = normal_matrix(t + burn, n, rng) * impact.transpose();
    let z = DMatrix::from_element(t + burn, 1, 1.0);
    let y = simulate(&b, &intercept, &DMatrix::zeros(1, n), &z, &shocks).unwrap();
    y.rows(1 + burn, t).clone_owned()
}

pub fn synthetic_panel(seed: u64, codes: &[&str], t: usize) -> PanelDataset {
    synthetic_panel_with(&conforming_impact(), seed, codes, t)
}

pub fn synthetic_panel_with(impact: &DMatrix<f64>, seed: u64, codes: &[&str], t: usize) -> PanelDataset {
    let mut r = rng(seed);
    let countries = codes
        .iter()
        .map(|c| CountryData::new(*c, start(), simulate_country(impact, t, &mut r), Deterministic::Intercept))
        .collect();
    PanelDataset::new(Variant::Baseline.variables(), countries).unwrap()
}

/// Writes `<dir>/panel_in/*.csv` and a small configuration reading them.
/// `extra` is appended verbatim and may add or override sections.
pub fn panel_project(dir: &Path, seed: u64, t: usize, model: &str, extra: &str) -> PathBuf {
    let panel = synthetic_panel(seed, &["ES", "IT"], t);
    let input = dir.join("panel_in");
    fs::create_dir_all(&input).unwrap();
    panelvar_ingest::write_panel_dir(&input, &panel, &[]).unwrap();
    let end = start().offset(t as i64 - 1);
    let config = format!(
        r#"seed = 11
chains = 2
thinning = 1
workers = 1

[data]
provider = "panel"
panel_dir = "panel_in"
countries = ["ES", "IT"]
start = "2003-01"
end = "{end}"

[model]
{model}

[output]
dir = "out"
fevd_horizons = [1, 6, 12]
hd_draws = 40
{extra}"#
    );
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    path
}

pub const SMALL_MODEL: &str = "lags = 1\nn_draws = 300\nn_burn = 100\nhorizon = 12";

pub fn panelvar(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panelvar"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("binary runs")
}

pub fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Header and data rows of a comma-separated output, comments skipped.
pub fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let split = |l: &str| l.split(',').map(String::from).collect::<Vec<_>>();
    let header = split(lines.next().expect("header"));
    (header, lines.map(split).collect())
}

pub fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}
