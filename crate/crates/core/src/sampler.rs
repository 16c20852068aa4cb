//! Gibbs sampler for the partially pooled (exchangeable prior) panel VAR and
//! its fully pooled limit.
//!
//! One sweep of the partially pooled sampler draws, in order,
//!
//! 1. `β_c | b, λ1, Σ_c, Γ_c, data` for every country,
//! 2. `b | {β_c}, λ1` (flat prior on `b`),
//! 3. `λ1 | {β_c}, b` (inverse-Gamma),
//! 4. `Σ_c | β_c, Γ_c, data` (inverse-Wishart under the diffuse prior),
//! 5. `Γ_c | β_c, Σ_c, data` (flat prior).
//!
//! The fully pooled model replaces steps 1–3 by a single common `β` with a
//! flat prior, and step 5 by a common `Γ`.
//!
//! Every random block draws from its own substream keyed by
//! `(chain, sweep, block, country)`, so output is bitwise reproducible for a
//! given seed whatever the number of worker threads.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_lower, spd_inverse};
use crate::model::{companion, residuals, CountryParams, Design, ModelSpec, PanelDataset, Pooling, PosteriorDraw};
use crate::prior::{minnesota_omega, pooled_sigma, MinnesotaScale};
use crate::rng::{substream, tag};
use crate::stats;

const LAMBDA1_INIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub seed: u64,
    pub n_chains: usize,
    pub thinning: usize,
    /// Worker threads; does not affect results.
    pub workers: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            seed: 0,
            n_chains: 1,
            thinning: 1,
            workers: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains < 1 || self.thinning < 1 || self.workers < 1 {
            return Err(Error::Config("chains, thinning and workers must be at least 1".into()));
        }
        Ok(())
    }
}

fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draw from `N(P⁻¹r, P⁻¹)` given precision `P` and `r = Pμ`.
pub fn normal_from_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    rhs: &DVector<f64>,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let chol = linalg::symmetrize(precision).cholesky()?;
    let mean = chol.solve(rhs);
    let z = standard_normal_vec(rhs.len(), rng);
    // Lᵀ w = z gives w ~ N(0, P⁻¹)
    let w = chol.l_dirty().tr_solve_lower_triangular(&z)?;
    let out = mean + w;
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Posterior precision and precision-weighted mean contribution of one
/// country's likelihood for `β`: `Σ⁻¹ ⊗ X'X` and `vec(X'(Y − ZΓ)Σ⁻¹)`.
fn beta_likelihood_terms(
    design: &Design,
    gamma: &DMatrix<f64>,
    sigma_inv: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = design.y.ncols();
    let k = design.x.ncols();
    let xtx = design.x.transpose() * &design.x;
    let mut prec = DMatrix::zeros(n * k, n * k);
    for i in 0..n {
        for j in 0..n {
            prec.view_mut((i * k, j * k), (k, k))
                .copy_from(&(&xtx * sigma_inv[(i, j)]));
        }
    }
    let mut ytil = design.y.clone();
    if design.z.ncols() > 0 {
        ytil -= &design.z * gamma;
    }
    let rhs = design.x.transpose() * ytil * sigma_inv;
    (prec, DVector::from_column_slice(rhs.as_slice()))
}

/// Precision and precision-weighted mean `(V*⁻¹, V*⁻¹μ*)` of the conditional
/// of `β_c` under the prior `N(b, Λ)` with diagonal `Λ` given by `prior_var`.
pub fn beta_conditional(
    design: &Design,
    gamma: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    prior_mean: &DVector<f64>,
    prior_var: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let q = design.x.ncols() * design.y.ncols();
    if prior_mean.len() != q || prior_var.len() != q {
        return Err(Error::shape("beta prior", q, prior_mean.len()));
    }
    if prior_var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("prior variances must be positive".into()));
    }
    let sigma_inv = spd_inverse(sigma).ok_or(Error::Numerical { step: "beta", sweep: 0 })?;
    let (mut prec, mut rhs) = beta_likelihood_terms(design, gamma, &sigma_inv);
    for i in 0..q {
        let p = 1.0 / prior_var[i];
        prec[(i, i)] += p;
        rhs[i] += p * prior_mean[i];
    }
    Ok((prec, rhs))
}

/// Mean `P⁻¹r` of a Gaussian given in precision form.
pub fn precision_mean(precision: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    linalg::symmetrize(precision).cholesky().map(|c| c.solve(rhs))
}

/// Conditional draw of `β_c = vec(B_c)`.
pub fn draw_beta_c<R: Rng + ?Sized>(
    design: &Design,
    gamma: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    prior_mean: &DVector<f64>,
    prior_var: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (prec, rhs) = beta_conditional(design, gamma, sigma, prior_mean, prior_var)?;
    normal_from_precision(&prec, &rhs, rng).ok_or(Error::Numerical { step: "beta", sweep: 0 })
}

/// Common `β` for the fully pooled model (flat prior, shared across countries).
pub fn draw_beta_pooled<R: Rng + ?Sized>(
    designs: &[Design],
    gamma: &DMatrix<f64>,
    sigmas: &[DMatrix<f64>],
    rng: &mut R,
) -> Result<DVector<f64>> {
    let mut acc: Option<(DMatrix<f64>, DVector<f64>)> = None;
    for (d, s) in designs.iter().zip(sigmas) {
        let sigma_inv = spd_inverse(s).ok_or(Error::Numerical { step: "beta", sweep: 0 })?;
        let (p, r) = beta_likelihood_terms(d, gamma, &sigma_inv);
        acc = Some(match acc {
            None => (p, r),
            Some((ap, ar)) => (ap + p, ar + r),
        });
    }
    let (prec, rhs) = acc.ok_or_else(|| Error::InvalidInput("no countries".into()))?;
    normal_from_precision(&prec, &rhs, rng).ok_or(Error::Numerical { step: "beta", sweep: 0 })
}

/// Mean and (diagonal) variance of `b | {β_c}, Λ`: `mean_c β_c` and `Λ/C`.
pub fn common_mean_conditional(betas: &[DVector<f64>], prior_var: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let c = betas.len();
    if c == 0 {
        return Err(Error::InvalidInput("no country coefficients".into()));
    }
    let q = prior_var.len();
    if betas.iter().any(|b| b.len() != q) {
        return Err(Error::shape("common mean", q, betas[0].len()));
    }
    let mut mean = DVector::zeros(q);
    for b in betas {
        mean += b;
    }
    mean /= c as f64;
    Ok((mean, prior_var / c as f64))
}

pub fn draw_common_mean<R: Rng + ?Sized>(
    betas: &[DVector<f64>],
    prior_var: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (mean, var) = common_mean_conditional(betas, prior_var)?;
    let z = standard_normal_vec(mean.len(), rng);
    Ok(mean + z.zip_map(&var, |z, v| z * v.sqrt()))
}

/// Shape and scale of the inverse-Gamma conditional of `λ1`:
/// `s + C·q/2` and `ν + ½ Σ_c (β_c − b)ᵀ Ω⁻¹ (β_c − b)`.
pub fn lambda1_conditional(
    betas: &[DVector<f64>],
    common_mean: &DVector<f64>,
    omega: &DVector<f64>,
    shape: f64,
    scale: f64,
) -> Result<(f64, f64)> {
    if omega.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("omega must be positive".into()));
    }
    let q = omega.len();
    let mut dispersion = 0.0;
    for b in betas {
        if b.len() != q || common_mean.len() != q {
            return Err(Error::shape("lambda1 conditional", q, b.len()));
        }
        dispersion += (b - common_mean)
            .iter()
            .zip(omega.iter())
            .map(|(d, w)| d * d / w)
            .sum::<f64>();
    }
    Ok((shape + (betas.len() * q) as f64 / 2.0, scale + 0.5 * dispersion))
}

pub fn draw_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Option<f64> {
    if !(scale > 0.0) || !(shape > 0.0) {
        return None;
    }
    let g = Gamma::new(shape, 1.0).ok()?.sample(rng);
    let v = scale / g;
    (v.is_finite() && v > 0.0).then_some(v)
}

pub fn draw_lambda1<R: Rng + ?Sized>(
    betas: &[DVector<f64>],
    common_mean: &DVector<f64>,
    omega: &DVector<f64>,
    shape: f64,
    scale: f64,
    rng: &mut R,
) -> Result<f64> {
    let (a, s) = lambda1_conditional(betas, common_mean, omega, shape, scale)?;
    draw_inverse_gamma(a, s, rng).ok_or(Error::Numerical { step: "lambda1", sweep: 0 })
}

/// `IW(S, df)` draw from a `df×N` matrix of standard normals:
/// `S^{1/2} (GᵀG)⁻¹ S^{1/2}`. Using the symmetric root makes the draw
/// equivariant to relabelling variables when the noise columns are relabelled
/// along with them.
pub fn inverse_wishart_from_noise(scale: &DMatrix<f64>, noise: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (root, _) = linalg::sym_sqrt_pair(scale)?;
    let gram = noise.transpose() * noise;
    let inner = spd_inverse(&gram)?;
    let out = linalg::symmetrize(&(&root * inner * &root));
    cholesky_lower(&out).map(|_| out)
}

/// `Σ_c ~ IW(UᵀU, T)` with `T` the number of residual rows.
pub fn draw_sigma_c<R: Rng + ?Sized>(u: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let (t, n) = u.shape();
    if t <= n {
        return Err(Error::InsufficientSample { rows: t, required: n });
    }
    let noise = DMatrix::from_row_iterator(t, n, (0..t * n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    inverse_wishart_from_noise(&(u.transpose() * u), &noise).ok_or(Error::Numerical { step: "sigma", sweep: 0 })
}

/// OLS fit `Γ̂` of `Y − XB` on `Z` and `(ZᵀZ)⁻¹`.
pub fn gamma_conditional(design: &Design, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = design.z.ncols();
    let ytil = &design.y - &design.x * b;
    let zz_inv = spd_inverse(&(design.z.transpose() * &design.z))
        .filter(|_| linalg::rank(&design.z, 1e-12) == m)
        .ok_or_else(|| Error::DegenerateData("deterministic regressors are rank deficient".into()))?;
    let hat = &zz_inv * design.z.transpose() * ytil;
    Ok((hat, zz_inv))
}

/// `Γ_c | B_c, Σ_c ~ MN(Γ̂, (ZᵀZ)⁻¹, Σ_c)`.
pub fn draw_gamma_c<R: Rng + ?Sized>(
    design: &Design,
    b: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let m = design.z.ncols();
    let n = design.y.ncols();
    if m == 0 {
        return Ok(DMatrix::zeros(0, n));
    }
    let (hat, zz_inv) = gamma_conditional(design, b)?;
    let left = cholesky_lower(&zz_inv).ok_or(Error::Numerical { step: "gamma", sweep: 0 })?;
    let right = cholesky_lower(sigma).ok_or(Error::Numerical { step: "gamma", sweep: 0 })?;
    let g = DMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
    Ok(hat + left * g * right.transpose())
}

/// Common `Γ` for the fully pooled model.
pub fn draw_gamma_pooled<R: Rng + ?Sized>(
    designs: &[Design],
    b: &DMatrix<f64>,
    sigmas: &[DMatrix<f64>],
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let n = b.ncols();
    let m = designs[0].z.ncols();
    if m == 0 {
        return Ok(DMatrix::zeros(0, n));
    }
    let mut prec = DMatrix::zeros(m * n, m * n);
    let mut rhs = DVector::zeros(m * n);
    for (d, s) in designs.iter().zip(sigmas) {
        let sigma_inv = spd_inverse(s).ok_or(Error::Numerical { step: "gamma", sweep: 0 })?;
        let ztz = d.z.transpose() * &d.z;
        for i in 0..n {
            for j in 0..n {
                let mut blk = prec.view_mut((i * m, j * m), (m, m));
                blk += &ztz * sigma_inv[(i, j)];
            }
        }
        let r = d.z.transpose() * (&d.y - &d.x * b) * sigma_inv;
        rhs += DVector::from_column_slice(r.as_slice());
    }
    let v = normal_from_precision(&prec, &rhs, rng).ok_or(Error::Numerical { step: "gamma", sweep: 0 })?;
    Ok(DMatrix::from_column_slice(m, n, v.as_slice()))
}

/// Per-chain and pooled summaries emitted alongside the draws.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsDiagnostics {
    /// Retained `λ1` values per chain (empty for the pooled model).
    pub lambda1_trace: Vec<Vec<f64>>,
    pub lambda1_quantiles: Option<Vec<f64>>,
    pub rhat_lambda1: Option<f64>,
    /// Largest split-R̂ over the elements of the common mean.
    pub rhat_common_mean_max: f64,
    /// Fraction of retained country draws whose companion matrix has spectral
    /// radius at least one.
    pub explosive_share: f64,
    pub retained: usize,
}

#[derive(Debug, Clone)]
pub struct GibbsOutput {
    pub draws: Vec<PosteriorDraw>,
    pub diagnostics: GibbsDiagnostics,
}

/// Data-dependent pieces fixed for the whole run.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    pub spec: ModelSpec,
    pub designs: Vec<Design>,
    pub prior: MinnesotaScale,
    n_vars: usize,
}

struct State {
    countries: Vec<CountryParams>,
    common_mean: DVector<f64>,
    lambda1: Option<f64>,
}

impl GibbsSampler {
    pub fn new(data: &PanelDataset, spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        if data.n_det() != spec.n_det() {
            return Err(Error::Config(format!(
                "panel carries {} deterministic terms but the model expects {}",
                data.n_det(),
                spec.n_det()
            )));
        }
        data.validate_for(spec.lags)?;
        let sigma = pooled_sigma(data, spec.lags)?;
        let prior = minnesota_omega(&sigma, data.n_vars(), spec.lags, spec.lambda2, spec.lambda3)?;
        Ok(GibbsSampler {
            spec: spec.clone(),
            designs: data.designs(spec.lags)?,
            prior,
            n_vars: data.n_vars(),
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    fn init_state(&self) -> Result<State> {
        let n = self.n_vars;
        let k = n * self.spec.lags;
        let mut countries = Vec::with_capacity(self.designs.len());
        for d in &self.designs {
            let m = d.z.ncols();
            let mut xz = DMatrix::zeros(d.rows(), k + m);
            xz.columns_mut(0, k).copy_from(&d.x);
            xz.columns_mut(k, m).copy_from(&d.z);
            let coef = linalg::ols(&xz, &d.y)?;
            let b = coef.rows(0, k).clone_owned();
            let gamma = coef.rows(k, m).clone_owned();
            let u = residuals(&d.y, &d.x, &d.z, &b, &gamma)?;
            let sigma = linalg::symmetrize(&(u.transpose() * &u / d.rows() as f64));
            cholesky_lower(&sigma)
                .ok_or_else(|| Error::DegenerateData("OLS residual covariance is singular".into()))?;
            countries.push(CountryParams { b, gamma, sigma });
        }
        let c = countries.len() as f64;
        let q = n * k;
        let mut common_mean = DVector::zeros(q);
        for p in &countries {
            common_mean += p.beta();
        }
        common_mean /= c;
        let lambda1 = match self.spec.pooling {
            Pooling::Full => None,
            Pooling::Partial => Some(self.spec.lambda1_fixed.unwrap_or(LAMBDA1_INIT)),
        };
        if self.spec.pooling == Pooling::Full {
            let b = DMatrix::from_column_slice(k, n, common_mean.as_slice());
            let mut gamma = DMatrix::zeros(countries[0].gamma.nrows(), n);
            for p in &countries {
                gamma += &p.gamma;
            }
            gamma /= c;
            for p in &mut countries {
                p.b = b.clone();
                p.gamma = gamma.clone();
            }
        }
        Ok(State {
            countries,
            common_mean,
            lambda1,
        })
    }

    fn sweep(&self, state: &mut State, seed: u64, chain: usize, sweep: usize) -> Result<()> {
        let key = |block: u64, country: usize| substream(seed, &[chain as u64, sweep as u64, block, country as u64]);
        let n = self.n_vars;
        let k = n * self.spec.lags;
        let numerical = |e: Error| e.at_sweep(sweep);

        match self.spec.pooling {
            Pooling::Partial => {
                let lambda1 = state.lambda1.expect("partial pooling carries lambda1");
                let prior_var = &self.prior.omega * lambda1;
                let betas: Vec<DVector<f64>> = self
                    .designs
                    .par_iter()
                    .zip(state.countries.par_iter())
                    .enumerate()
                    .map(|(c, (d, p))| {
                        draw_beta_c(d, &p.gamma, &p.sigma, &state.common_mean, &prior_var, &mut key(tag::BETA, c))
                    })
                    .collect::<Result<_>>()
                    .map_err(numerical)?;
                for (p, beta) in state.countries.iter_mut().zip(&betas) {
                    p.b = DMatrix::from_column_slice(k, n, beta.as_slice());
                }
                state.common_mean = draw_common_mean(&betas, &prior_var, &mut key(tag::COMMON_MEAN, 0)).map_err(numerical)?;
                state.lambda1 = Some(match self.spec.lambda1_fixed {
                    Some(fixed) => fixed,
                    None => draw_lambda1(
                        &betas,
                        &state.common_mean,
                        &self.prior.omega,
                        self.spec.ig_shape,
                        self.spec.ig_scale,
                        &mut key(tag::LAMBDA1, 0),
                    )
                    .map_err(numerical)?,
                });
            }
            Pooling::Full => {
                let sigmas: Vec<DMatrix<f64>> = state.countries.iter().map(|p| p.sigma.clone()).collect();
                let beta = draw_beta_pooled(&self.designs, &state.countries[0].gamma, &sigmas, &mut key(tag::BETA, 0))
                    .map_err(numerical)?;
                let b = DMatrix::from_column_slice(k, n, beta.as_slice());
                for p in &mut state.countries {
                    p.b = b.clone();
                }
                state.common_mean = beta;
            }
        }

        let sigmas: Vec<DMatrix<f64>> = self
            .designs
            .par_iter()
            .zip(state.countries.par_iter())
            .enumerate()
            .map(|(c, (d, p))| {
                let u = residuals(&d.y, &d.x, &d.z, &p.b, &p.gamma)?;
                draw_sigma_c(&u, &mut key(tag::SIGMA, c))
            })
            .collect::<Result<_>>()
            .map_err(numerical)?;
        for (p, s) in state.countries.iter_mut().zip(sigmas) {
            p.sigma = s;
        }

        match self.spec.pooling {
            Pooling::Partial => {
                let gammas: Vec<DMatrix<f64>> = self
                    .designs
                    .par_iter()
                    .zip(state.countries.par_iter())
                    .enumerate()
                    .map(|(c, (d, p))| draw_gamma_c(d, &p.b, &p.sigma, &mut key(tag::GAMMA, c)))
                    .collect::<Result<_>>()
                    .map_err(numerical)?;
                for (p, g) in state.countries.iter_mut().zip(gammas) {
                    p.gamma = g;
                }
            }
            Pooling::Full => {
                let sigmas: Vec<DMatrix<f64>> = state.countries.iter().map(|p| p.sigma.clone()).collect();
                let g = draw_gamma_pooled(&self.designs, &state.countries[0].b, &sigmas, &mut key(tag::GAMMA, 0))
                    .map_err(numerical)?;
                for p in &mut state.countries {
                    p.gamma = g.clone();
                }
            }
        }
        Ok(())
    }

    /// Runs one chain, handing each retained draw to `sink` in sweep order.
    pub fn run_chain(
        &self,
        seed: u64,
        chain: usize,
        thinning: usize,
        sink: &mut dyn FnMut(PosteriorDraw) -> Result<()>,
    ) -> Result<()> {
        let mut state = self.init_state()?;
        let thinning = thinning.max(1);
        let mut kept = 0;
        for sweep in 0..self.spec.n_draws {
            self.sweep(&mut state, seed, chain, sweep)?;
            if sweep >= self.spec.n_burn && (sweep - self.spec.n_burn) % thinning == 0 {
                sink(PosteriorDraw {
                    chain,
                    index: kept,
                    countries: state.countries.clone(),
                    common_mean: state.common_mean.clone(),
                    lambda1: state.lambda1,
                })?;
                kept += 1;
            }
        }
        Ok(())
    }

    /// Runs all chains (in parallel across `workers` threads) and collects the
    /// retained draws, chain by chain.
    pub fn run(&self, config: &ChainConfig) -> Result<GibbsOutput> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let chains: Vec<(Vec<PosteriorDraw>, ChainTrace)> = pool.install(|| {
            (0..config.n_chains)
                .into_par_iter()
                .map(|chain| {
                    let mut out = Vec::new();
                    let mut trace = ChainTrace::default();
                    self.run_chain(config.seed, chain, config.thinning, &mut |d| {
                        trace.record(&d, self.spec.lags)?;
                        out.push(d);
                        Ok(())
                    })?;
                    Ok((out, trace))
                })
                .collect::<Result<_>>()
        })?;
        let (draws, traces): (Vec<_>, Vec<_>) = chains.into_iter().unzip();
        Ok(GibbsOutput {
            draws: draws.into_iter().flatten().collect(),
            diagnostics: GibbsDiagnostics::from_traces(&traces, &self.spec.ci_quantiles),
        })
    }

    /// Retained draws per chain.
    pub fn retained_per_chain(&self, thinning: usize) -> usize {
        let kept = self.spec.n_draws.saturating_sub(self.spec.n_burn);
        kept.div_ceil(thinning.max(1))
    }
}

/// The parts of a chain needed for convergence diagnostics, accumulated while
/// the draws themselves go elsewhere.
#[derive(Debug, Clone, Default)]
pub struct ChainTrace {
    lambda1: Vec<f64>,
    common_mean: Vec<DVector<f64>>,
    explosive: usize,
    country_draws: usize,
}

impl ChainTrace {
    pub fn record(&mut self, draw: &PosteriorDraw, lags: usize) -> Result<()> {
        self.lambda1.extend(draw.lambda1);
        self.common_mean.push(draw.common_mean.clone());
        for p in &draw.countries {
            self.country_draws += 1;
            if companion(&p.b, lags, p.b.ncols())?.spectral_radius() >= 1.0 {
                self.explosive += 1;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.common_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.common_mean.is_empty()
    }
}

impl GibbsDiagnostics {
    /// Pools per-chain traces; `probs` are the reported `λ1` quantiles.
    pub fn from_traces(traces: &[ChainTrace], probs: &[f64]) -> Self {
        let lambda1_trace: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| t.lambda1.clone())
            .filter(|t| !t.is_empty())
            .collect();
        let pooled: Vec<f64> = lambda1_trace.iter().flatten().copied().collect();
        let lambda1_quantiles = stats::quantiles(&pooled, probs);
        let rhat_lambda1 = (!lambda1_trace.is_empty()).then(|| stats::split_rhat(&lambda1_trace));
        let q = traces
            .iter()
            .find_map(|t| t.common_mean.first())
            .map_or(0, |v| v.len());
        let mut rhat_common_mean_max = f64::NAN;
        for i in 0..q {
            let per_chain: Vec<Vec<f64>> = traces
                .iter()
                .map(|t| t.common_mean.iter().map(|v| v[i]).collect())
                .collect();
            let r = stats::split_rhat(&per_chain);
            if r.is_finite() && !(r <= rhat_common_mean_max) {
                rhat_common_mean_max = r;
            }
        }
        let explosive: usize = traces.iter().map(|t| t.explosive).sum();
        let total: usize = traces.iter().map(|t| t.country_draws).sum();
        GibbsDiagnostics {
            lambda1_trace,
            lambda1_quantiles,
            rhat_lambda1,
            rhat_common_mean_max,
            explosive_share: if total == 0 { 0.0 } else { explosive as f64 / total as f64 },
            retained: traces.iter().map(ChainTrace::len).sum(),
        }
    }
}

/// Builds the sampler and runs it.
pub fn run_gibbs(data: &PanelDataset, spec: &ModelSpec, config: &ChainConfig) -> Result<GibbsOutput> {
    GibbsSampler::new(data, spec)?.run(config)
}
