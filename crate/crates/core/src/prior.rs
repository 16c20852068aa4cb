//! Minnesota-type prior covariance for the exchangeable coefficient prior,
//! and the inverse-Gamma hyperprior on the overall tightness.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_lag_matrices, PanelDataset};

/// Diagonal of `Ω` together with the pooled residual scales it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MinnesotaScale {
    /// Diagonal of `Ω`, ordered like `β = vec(B)`.
    pub omega: DVector<f64>,
    pub sigma: DVector<f64>,
    pub n_vars: usize,
    pub lags: usize,
}

impl MinnesotaScale {
    /// Position of the coefficient of `variable` at `lag` (1-based) in `equation`.
    pub fn index(&self, equation: usize, variable: usize, lag: usize) -> usize {
        coefficient_index(self.n_vars, self.lags, equation, variable, lag)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega_inv(&self) -> DVector<f64> {
        self.omega.map(|v| 1.0 / v)
    }
}

pub fn coefficient_index(n: usize, lags: usize, equation: usize, variable: usize, lag: usize) -> usize {
    equation * n * lags + (lag - 1) * n + variable
}

/// Residual standard deviation of each variable regressed on an intercept and
/// `lags` lags of all variables, with every country's rows stacked.
pub fn pooled_sigma(data: &PanelDataset, lags: usize) -> Result<DVector<f64>> {
    let n = data.n_vars();
    let k = n * lags + 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in &data.countries {
        let (x, y) = build_lag_matrices(&c.y, lags)?;
        if x.nrows() < k {
            return Err(Error::InsufficientSample {
                rows: c.y.nrows(),
                required: k + lags - 1,
            });
        }
        xs.push(x);
        ys.push(y);
    }
    let rows: usize = xs.iter().map(|x| x.nrows()).sum();
    let mut x = DMatrix::zeros(rows, k);
    let mut y = DMatrix::zeros(rows, n);
    let mut at = 0;
    for (xc, yc) in xs.iter().zip(&ys) {
        let r = xc.nrows();
        x.view_mut((at, 0), (r, 1)).fill(1.0);
        x.view_mut((at, 1), (r, k - 1)).copy_from(xc);
        y.rows_mut(at, r).copy_from(yc);
        at += r;
    }
    let coef = linalg::ols(&x, &y)?;
    let resid = &y - &x * coef;
    let sigma = DVector::from_iterator(
        n,
        resid
            .column_iter()
            .map(|col| (col.norm_squared() / rows as f64).sqrt()),
    );
    if let Some(i) = sigma.iter().position(|s| !(*s > 1e-12)) {
        return Err(Error::DegenerateData(format!(
            "pooled regression for variable {} has zero residual variance",
            data.variable_names.get(i).map(String::as_str).unwrap_or("?")
        )));
    }
    Ok(sigma)
}

/// Prior variances: `(1/l^{λ3})²` on own lags, `(σ_i λ2 / σ_j)²` on lag `l`
/// of variable `j` in equation `i ≠ j`.
pub fn minnesota_omega(sigma: &DVector<f64>, n: usize, lags: usize, lambda2: f64, lambda3: f64) -> Result<MinnesotaScale> {
    if sigma.len() != n {
        return Err(Error::shape("minnesota sigma", n, sigma.len()));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidInput("residual scales must be positive".into()));
    }
    let mut omega = DVector::zeros(n * n * lags);
    for eq in 0..n {
        for lag in 1..=lags {
            for var in 0..n {
                let sd = if eq == var {
                    1.0 / (lag as f64).powf(lambda3)
                } else {
                    sigma[eq] * lambda2 / sigma[var]
                };
                omega[coefficient_index(n, lags, eq, var, lag)] = sd * sd;
            }
        }
    }
    Ok(MinnesotaScale {
        omega,
        sigma: sigma.clone(),
        n_vars: n,
        lags,
    })
}

/// `log p(λ1 | s, ν)` up to an additive constant: `−(s+1) ln λ1 − ν/λ1`.
pub fn lambda1_log_density(lambda1: f64, shape: f64, scale: f64) -> Result<f64> {
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidInput(format!("lambda1 must be positive, got {lambda1}")));
    }
    Ok(-(shape + 1.0) * lambda1.ln() - scale / lambda1)
}
