//! Posterior summaries of identified draws: credible bands, shock
//! normalisation, forecast-error-variance decomposition, historical
//! decomposition and counterfactuals.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{residuals, simulate, CountryParams, Design};
use crate::stats;

/// Pointwise quantiles of impulse responses for one country.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfSummary {
    pub probs: Vec<f64>,
    /// `bands[q][h]` is the `N×K` matrix of quantile `probs[q]` at horizon `h`.
    pub bands: Vec<Vec<DMatrix<f64>>>,
}

impl IrfSummary {
    pub fn horizons(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }
}

fn check_tensors(thetas: &[&[DMatrix<f64>]]) -> Result<(usize, usize, usize)> {
    let first = thetas
        .first()
        .ok_or_else(|| Error::InvalidInput("empty draw set".into()))?;
    let h = first.len();
    let (n, k) = first.first().map_or((0, 0), |m| m.shape());
    if thetas.iter().any(|t| t.len() != h || t.iter().any(|m| m.shape() != (n, k))) {
        return Err(Error::shape("impulse-response draws", format!("{h} horizons of {n}x{k}"), "ragged draws"));
    }
    Ok((h, n, k))
}

/// `target / median(impacts)`: the factor that moves the median impact
/// response to `target`.
pub fn normalization_factor(impacts: &[f64], target: f64) -> Result<f64> {
    let median = stats::quantiles(impacts, &[0.5]).ok_or_else(|| Error::InvalidInput("empty draw set".into()))?[0];
    if median == 0.0 || !median.is_finite() {
        return Err(Error::InvalidInput("median impact response is zero".into()));
    }
    Ok(target / median)
}

/// Scales the `shock` column of every draw by one common factor so that the
/// median impact response of `variable` equals `target`. Returns the factor.
pub fn normalize_shock(thetas: &mut [Vec<DMatrix<f64>>], shock: usize, variable: usize, target: f64) -> Result<f64> {
    let impacts: Vec<f64> = thetas
        .iter()
        .map(|t| {
            t.first()
                .filter(|m| variable < m.nrows() && shock < m.ncols())
                .map(|m| m[(variable, shock)])
                .ok_or_else(|| Error::InvalidInput("normalisation index out of range".into()))
        })
        .collect::<Result<_>>()?;
    let factor = normalization_factor(&impacts, target)?;
    for t in thetas.iter_mut() {
        for m in t.iter_mut() {
            m.column_mut(shock).scale_mut(factor);
        }
    }
    Ok(factor)
}

/// Pointwise empirical quantiles over draws.
pub fn irf_bands(thetas: &[&[DMatrix<f64>]], probs: &[f64]) -> Result<IrfSummary> {
    let (h, n, k) = check_tensors(thetas)?;
    let mut bands = vec![vec![DMatrix::zeros(n, k); h]; probs.len()];
    let mut buf = vec![0.0; thetas.len()];
    for hh in 0..h {
        for i in 0..n {
            for j in 0..k {
                for (slot, t) in buf.iter_mut().zip(thetas) {
                    *slot = t[hh][(i, j)];
                }
                buf.sort_by(f64::total_cmp);
                for (q, &p) in probs.iter().enumerate() {
                    bands[q][hh][(i, j)] = stats::quantile_sorted(&buf, p);
                }
            }
        }
    }
    Ok(IrfSummary {
        probs: probs.to_vec(),
        bands,
    })
}

/// Pointwise median tensor.
pub fn median_irf(thetas: &[&[DMatrix<f64>]]) -> Result<Vec<DMatrix<f64>>> {
    Ok(irf_bands(thetas, &[0.5])?.bands.remove(0))
}

/// Variance shares `share[i, j]` of shock `j` in the `H`-step forecast error of
/// variable `i`, for each `H` in `horizons`:
/// `Σ_{h<H} Θ_h[i,j]² / Σ_{j'} Σ_{h<H} Θ_h[i,j']²`. `H = 1` is impact only.
pub fn fevd(theta: &[DMatrix<f64>], horizons: &[usize]) -> Result<Vec<DMatrix<f64>>> {
    let (n, k) = theta.first().map(|m| m.shape()).ok_or_else(|| Error::InvalidInput("empty IRF".into()))?;
    let mut out = Vec::with_capacity(horizons.len());
    for &hz in horizons {
        if hz == 0 || hz > theta.len() {
            return Err(Error::InvalidInput(format!(
                "FEVD horizon {hz} outside 1..={}",
                theta.len()
            )));
        }
        let mut acc = DMatrix::zeros(n, k);
        for m in &theta[..hz] {
            acc += m.component_mul(m);
        }
        for i in 0..n {
            let total: f64 = acc.row(i).sum();
            if !(total > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "zero forecast error variance for variable {i} at horizon {hz}"
                )));
            }
            acc.row_mut(i).unscale_mut(total);
        }
        out.push(acc);
    }
    Ok(out)
}

/// `ε_t = (PQ)⁻¹ u_t` for every row of `u`.
pub fn structural_shocks(u: &DMatrix<f64>, impact: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = impact.nrows();
    if !impact.is_square() || u.ncols() != n {
        return Err(Error::shape("structural shocks", n, u.ncols()));
    }
    let lu = impact.clone().lu();
    let ut = u.transpose();
    let eps = lu
        .solve(&ut)
        .filter(|e| e.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::InvalidInput("impact matrix is singular".into()))?;
    Ok(eps.transpose())
}

/// Additive split of the estimation sample into a baseline (deterministic
/// terms propagated from the pre-sample lags) and one cumulative
/// contribution per structural shock.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalDecomposition {
    /// `T×N` observed data (after dropping the `L` pre-sample rows).
    pub actual: DMatrix<f64>,
    pub baseline: DMatrix<f64>,
    /// One `T×N` matrix per shock, in reporting order.
    pub contributions: Vec<DMatrix<f64>>,
    pub shocks: DMatrix<f64>,
}

impl HistoricalDecomposition {
    /// `max |baseline + Σ_j contribution_j − actual|`.
    pub fn additivity_error(&self) -> f64 {
        let mut recon = self.baseline.clone();
        for c in &self.contributions {
            recon += c;
        }
        crate::linalg::max_abs(&(recon - &self.actual))
    }
}

/// Pre-sample lags stored in the first regressor row, oldest first.
fn initial_conditions(design: &Design, lags: usize) -> DMatrix<f64> {
    let n = design.y.ncols();
    DMatrix::from_fn(lags, n, |r, k| design.x[(0, (lags - r - 1) * n + k)])
}

/// Historical decomposition of one country under one structural draw.
/// `impact` is `P_c Q`; the contributions follow the VAR recursion driven by
/// a single shock's series, which equals the moving-average convolution
/// `Σ_{s≤t} Θ_s[:, j] ε_{t−s, j}`.
pub fn historical_decomposition(
    design: &Design,
    params: &CountryParams,
    impact: &DMatrix<f64>,
    lags: usize,
) -> Result<HistoricalDecomposition> {
    let n = design.y.ncols();
    let t = design.rows();
    let u = residuals(&design.y, &design.x, &design.z, &params.b, &params.gamma)?;
    let eps = structural_shocks(&u, impact)?;
    let init = initial_conditions(design, lags);
    let baseline = simulate(&params.b, &params.gamma, &init, &design.z, &DMatrix::zeros(t, n))?
        .rows(lags, t)
        .clone_owned();
    let zero_init = DMatrix::zeros(lags, n);
    let no_det = DMatrix::zeros(0, n);
    let no_z = DMatrix::zeros(t, 0);
    let contributions = (0..impact.ncols())
        .map(|j| {
            let mut drive = DMatrix::zeros(t, n);
            for s in 0..t {
                for i in 0..n {
                    drive[(s, i)] = impact[(i, j)] * eps[(s, j)];
                }
            }
            Ok(simulate(&params.b, &no_det, &zero_init, &no_z, &drive)?
                .rows(lags, t)
                .clone_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HistoricalDecomposition {
        actual: design.y.clone(),
        baseline,
        contributions,
        shocks: eps,
    })
}

/// Data with the contributions of `removed` shocks taken out.
pub fn counterfactual(hd: &HistoricalDecomposition, removed: &[usize]) -> Result<DMatrix<f64>> {
    let mut out = hd.actual.clone();
    for &j in removed {
        let c = hd
            .contributions
            .get(j)
            .ok_or_else(|| Error::UnknownShock(format!("#{j}")))?;
        out -= c;
    }
    Ok(out)
}

/// Quantile bands across draws of `actual − counterfactual` when `shock` is
/// removed. Returns one `T×N` matrix per probability.
pub fn counterfactual_bands(hds: &[HistoricalDecomposition], shock: usize, probs: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let diffs: Vec<DMatrix<f64>> = hds
        .iter()
        .map(|hd| Ok(&hd.actual - counterfactual(hd, &[shock])?))
        .collect::<Result<_>>()?;
    let first = diffs.first().ok_or_else(|| Error::InvalidInput("empty draw set".into()))?;
    let (t, n) = first.shape();
    let mut out = vec![DMatrix::zeros(t, n); probs.len()];
    let mut buf = vec![0.0; diffs.len()];
    for r in 0..t {
        for i in 0..n {
            for (slot, d) in buf.iter_mut().zip(&diffs) {
                *slot = d[(r, i)];
            }
            buf.sort_by(f64::total_cmp);
            for (q, &p) in probs.iter().enumerate() {
                out[q][(r, i)] = stats::quantile_sorted(&buf, p);
            }
        }
    }
    Ok(out)
}
