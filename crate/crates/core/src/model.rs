//! Domain types and reduced-form mechanics of the panel VAR.
//!
//! Country `c` follows `Y_c = X_c B_c + Z_c Γ_c + U_c` where row `t` of `X_c`
//! stacks lags `1..L` of the endogenous vector. `B_c` is stored as an
//! `(N·L)×N` matrix (column `i` holds equation `i`), so the column-major
//! vectorisation of `B_c` is the coefficient vector `β_c`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar month, ordered and convertible to a linear index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} out of range")));
        }
        Ok(Month { year, month })
    }

    pub fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn from_index(idx: i64) -> Self {
        Month {
            year: idx.div_euclid(12) as i32,
            month: idx.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn offset(self, months: i64) -> Self {
        Month::from_index(self.index() + months)
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;

    /// Accepts `YYYY-MM`, `YYYY-MM-DD` and the SDMX-style `YYYYMmm`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidInput(format!("unparseable month '{s}'"));
        let (y, m) = if let Some((y, rest)) = s.split_once('-') {
            (y, rest.split('-').next().unwrap_or(""))
        } else if let Some((y, m)) = s.split_once('M') {
            (y, m)
        } else {
            return Err(bad());
        };
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if y.len() != 4 {
            return Err(bad());
        }
        Month::new(year, month).map_err(|_| bad())
    }
}

impl From<Month> for String {
    fn from(m: Month) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Month {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Deterministic regressors `z_{c,t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Deterministic {
    #[default]
    Intercept,
    InterceptTrend,
}

impl Deterministic {
    pub fn count(self) -> usize {
        match self {
            Deterministic::Intercept => 1,
            Deterministic::InterceptTrend => 2,
        }
    }

    /// `T×M` matrix of deterministic terms for a sample of `t` months.
    pub fn matrix(self, t: usize) -> DMatrix<f64> {
        DMatrix::from_fn(t, self.count(), |r, c| match c {
            0 => 1.0,
            _ => (r + 1) as f64,
        })
    }
}

/// One country's block of the panel.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryData {
    pub code: String,
    /// First month of `y`.
    pub start: Month,
    /// `T_c×N` endogenous data in transformed units.
    pub y: DMatrix<f64>,
    /// `T_c×M` deterministic terms aligned with `y`.
    pub z: DMatrix<f64>,
}

impl CountryData {
    pub fn new(code: impl Into<String>, start: Month, y: DMatrix<f64>, det: Deterministic) -> Self {
        let z = det.matrix(y.nrows());
        CountryData {
            code: code.into(),
            start,
            y,
            z,
        }
    }

    pub fn sample_range(&self) -> (Month, Month) {
        (self.start, self.start.offset(self.y.nrows() as i64 - 1))
    }

    /// Regression matrices for lag order `lags`.
    pub fn design(&self, lags: usize) -> Result<Design> {
        let (x, y) = build_lag_matrices(&self.y, lags)?;
        let z = self.z.rows(lags, self.z.nrows() - lags).clone_owned();
        Ok(Design { x, y, z })
    }
}

/// `(X_c, Y_c, Z_c)` trimmed to the usable sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

impl Design {
    pub fn rows(&self) -> usize {
        self.y.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub variable_names: Vec<String>,
    pub countries: Vec<CountryData>,
}

impl PanelDataset {
    pub fn new(variable_names: Vec<String>, countries: Vec<CountryData>) -> Result<Self> {
        if countries.is_empty() {
            return Err(Error::InvalidInput("panel has no countries".into()));
        }
        let n = variable_names.len();
        let m = countries[0].z.ncols();
        for c in &countries {
            if c.y.ncols() != n {
                return Err(Error::shape("panel variables", n, c.y.ncols()));
            }
            if c.z.ncols() != m || c.z.nrows() != c.y.nrows() {
                return Err(Error::shape(
                    "deterministic terms",
                    format!("{}x{}", c.y.nrows(), m),
                    format!("{}x{}", c.z.nrows(), c.z.ncols()),
                ));
            }
            if c.y.iter().chain(c.z.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "country {} has non-finite entries",
                    c.code
                )));
            }
        }
        Ok(PanelDataset {
            variable_names,
            countries,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_det(&self) -> usize {
        self.countries[0].z.ncols()
    }

    /// Checks `T_c > N·L + M` for every country.
    pub fn validate_for(&self, lags: usize) -> Result<()> {
        let required = self.n_vars() * lags + self.n_det();
        for c in &self.countries {
            if c.y.nrows() <= required {
                return Err(Error::InsufficientSample {
                    rows: c.y.nrows(),
                    required,
                });
            }
        }
        Ok(())
    }

    pub fn designs(&self, lags: usize) -> Result<Vec<Design>> {
        self.countries.iter().map(|c| c.design(lags)).collect()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variable_names.iter().position(|v| v == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Partial,
    Full,
}

impl FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partial" => Ok(Pooling::Partial),
            "full" => Ok(Pooling::Full),
            other => Err(Error::Config(format!("unknown pooling '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub lags: usize,
    pub deterministic: Deterministic,
    pub lambda2: f64,
    pub lambda3: f64,
    pub ig_shape: f64,
    pub ig_scale: f64,
    pub pooling: Pooling,
    pub n_draws: usize,
    pub n_burn: usize,
    pub horizon: usize,
    pub ci_quantiles: Vec<f64>,
    /// Pins the overall tightness instead of sampling it.
    pub lambda1_fixed: Option<f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            lags: 4,
            deterministic: Deterministic::Intercept,
            lambda2: 1.0,
            lambda3: 0.0,
            ig_shape: 0.001,
            ig_scale: 0.001,
            pooling: Pooling::Partial,
            n_draws: 110_000,
            n_burn: 10_000,
            horizon: 48,
            ci_quantiles: vec![0.16, 0.50, 0.84],
            lambda1_fixed: None,
        }
    }
}

impl ModelSpec {
    pub fn n_det(&self) -> usize {
        self.deterministic.count()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.lags < 1 {
            return fail("lag order must be at least 1".into());
        }
        if self.n_draws <= self.n_burn {
            return fail(format!(
                "n_draws ({}) must exceed n_burn ({})",
                self.n_draws, self.n_burn
            ));
        }
        if self.horizon < 1 {
            return fail("horizon must be at least 1".into());
        }
        if self.ci_quantiles.is_empty() || self.ci_quantiles.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return fail("quantiles must lie strictly inside (0, 1)".into());
        }
        if !(self.lambda2 > 0.0) || !(self.lambda3 >= 0.0) {
            return fail("lambda2 must be positive and lambda3 non-negative".into());
        }
        if !(self.ig_shape > 0.0) || !(self.ig_scale >= 0.0) {
            return fail("inverse-gamma shape must be positive and scale non-negative".into());
        }
        if let Some(l) = self.lambda1_fixed {
            if !(l > 0.0) {
                return fail("fixed lambda1 must be positive".into());
            }
        }
        Ok(())
    }
}

/// Reduced-form parameters of one country within a Gibbs state.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryParams {
    /// `(N·L)×N` lag coefficients.
    pub b: DMatrix<f64>,
    /// `M×N` deterministic coefficients.
    pub gamma: DMatrix<f64>,
    /// `N×N` innovation covariance.
    pub sigma: DMatrix<f64>,
}

impl CountryParams {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(self.b.as_slice())
    }
}

/// One retained Gibbs state.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub chain: usize,
    pub index: usize,
    pub countries: Vec<CountryParams>,
    /// Common mean `b` of the exchangeable prior (`N²L`).
    pub common_mean: DVector<f64>,
    /// Overall tightness; `None` in the fully pooled model.
    pub lambda1: Option<f64>,
}

/// `Y_trim` and `X_c` for lag order `lags`.
///
/// Row `t` of the regressor matrix is `[y'_{t+L-1}, …, y'_t]`, the `L` lags of
/// row `t` of the trimmed response matrix.
pub fn build_lag_matrices(y: &DMatrix<f64>, lags: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (t, n) = y.shape();
    if t <= lags {
        return Err(Error::InsufficientSample {
            rows: t,
            required: lags,
        });
    }
    let rows = t - lags;
    let x = DMatrix::from_fn(rows, n * lags, |r, col| {
        let lag = col / n + 1;
        y[(r + lags - lag, col % n)]
    });
    Ok((x, y.rows(lags, rows).clone_owned()))
}

/// Companion representation of a VAR(L).
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionForm {
    /// `(N·L)×(N·L)` companion matrix.
    pub a: DMatrix<f64>,
    /// `N×(N·L)` selector of the leading block.
    pub j: DMatrix<f64>,
}

impl CompanionForm {
    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `J A^h Jᵀ`.
    pub fn multiplier(&self, h: usize) -> DMatrix<f64> {
        let mut p = self.j.transpose();
        for _ in 0..h {
            p = &self.a * p;
        }
        &self.j * p
    }
}

fn check_coefficients(b: &DMatrix<f64>, lags: usize, n: usize) -> Result<()> {
    if b.shape() != (n * lags, n) {
        return Err(Error::shape(
            "coefficient stack",
            format!("{}x{}", n * lags, n),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    Ok(())
}

/// Lag matrix `A_l` in `y_t = Σ_l A_l y_{t-l} + …` (zero-based `l`).
pub fn lag_matrix(b: &DMatrix<f64>, n: usize, l: usize) -> DMatrix<f64> {
    b.rows(l * n, n).transpose()
}

pub fn companion(b: &DMatrix<f64>, lags: usize, n: usize) -> Result<CompanionForm> {
    check_coefficients(b, lags, n)?;
    let k = n * lags;
    let mut a = DMatrix::zeros(k, k);
    a.rows_mut(0, n).copy_from(&b.transpose());
    for i in n..k {
        a[(i, i - n)] = 1.0;
    }
    let mut j = DMatrix::zeros(n, k);
    for i in 0..n {
        j[(i, i)] = 1.0;
    }
    Ok(CompanionForm { a, j })
}

/// Reduced-form moving-average multipliers `Φ_0 … Φ_H` by the lag recursion
/// `Φ_h = Σ_{l=1}^{min(h,L)} A_l Φ_{h-l}`.
pub fn ma_multipliers(b: &DMatrix<f64>, lags: usize, n: usize, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    check_coefficients(b, lags, n)?;
    let a: Vec<DMatrix<f64>> = (0..lags).map(|l| lag_matrix(b, n, l)).collect();
    let mut phi: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    phi.push(DMatrix::identity(n, n));
    for h in 1..=horizon {
        let mut next = DMatrix::zeros(n, n);
        for l in 1..=h.min(lags) {
            next += &a[l - 1] * &phi[h - l];
        }
        phi.push(next);
    }
    Ok(phi)
}

/// Responses `Θ_h = Φ_h · impact` for `h = 0..=horizon`, by the recursion
/// `Θ_h = Σ_l A_l Θ_{h−l}`. Cheaper than forming `Φ_h` when `impact` has
/// few columns.
pub fn propagate(b: &DMatrix<f64>, lags: usize, impact: &DMatrix<f64>, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = b.ncols();
    check_coefficients(b, lags, n)?;
    if impact.nrows() != n {
        return Err(Error::shape("impact rows", n, impact.nrows()));
    }
    let a: Vec<DMatrix<f64>> = (0..lags).map(|l| lag_matrix(b, n, l)).collect();
    let mut theta: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    theta.push(impact.clone());
    for h in 1..=horizon {
        let mut next = DMatrix::zeros(n, impact.ncols());
        for l in 1..=h.min(lags) {
            next.gemm(1.0, &a[l - 1], &theta[h - l], 1.0);
        }
        theta.push(next);
    }
    Ok(theta)
}

/// `U = Y − XB − ZΓ`.
pub fn residuals(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    b: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (t, n) = y.shape();
    if x.nrows() != t || z.nrows() != t {
        return Err(Error::shape("residual rows", t, format!("{}/{}", x.nrows(), z.nrows())));
    }
    if b.shape() != (x.ncols(), n) {
        return Err(Error::shape(
            "residual coefficients",
            format!("{}x{}", x.ncols(), n),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    if gamma.shape() != (z.ncols(), n) {
        return Err(Error::shape(
            "residual deterministic coefficients",
            format!("{}x{}", z.ncols(), n),
            format!("{}x{}", gamma.nrows(), gamma.ncols()),
        ));
    }
    let mut u = y - x * b;
    if z.ncols() > 0 {
        u -= z * gamma;
    }
    Ok(u)
}

/// Simulates `T` observations of a VAR given initial lags, deterministic
/// terms and innovations. `init` holds the `L` pre-sample rows (oldest first);
/// the returned matrix has `L + T` rows, starting with `init`.
pub fn simulate(
    b: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    init: &DMatrix<f64>,
    z: &DMatrix<f64>,
    shocks: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = b.ncols();
    let lags = b.nrows() / n;
    check_coefficients(b, lags, n)?;
    if init.shape() != (lags, n) {
        return Err(Error::shape("initial conditions", format!("{lags}x{n}"), format!("{}x{}", init.nrows(), init.ncols())));
    }
    let t = shocks.nrows();
    if z.nrows() != t || gamma.shape() != (z.ncols(), n) {
        return Err(Error::shape("deterministic terms", t, z.nrows()));
    }
    let mut y = DMatrix::zeros(lags + t, n);
    y.rows_mut(0, lags).copy_from(init);
    for s in 0..t {
        let mut row = shocks.row(s).clone_owned();
        if z.ncols() > 0 {
            row += z.row(s) * gamma;
        }
        for l in 1..=lags {
            row += y.row(lags + s - l) * b.rows((l - 1) * n, n);
        }
        y.row_mut(lags + s).copy_from(&row);
    }
    Ok(y)
}
