//! Structural identification with sign and zero restrictions on impulse
//! responses.
//!
//! For a reduced-form draw with innovation covariance `Σ = PPᵀ`, candidate
//! impact matrices are `PQ` with `Q` orthonormal. Columns of `Q` are drawn one
//! at a time: column `j` is a standard-normal vector projected onto the null
//! space of the stacked zero-restriction rows for shock `j` and the columns
//! already drawn, then normalised. Shocks with more zero restrictions are
//! processed first so that shock `j` never carries more than `K − j` of them.
//! A candidate is kept when every sign restriction holds strictly; a column
//! whose restricted responses all have the opposite sign is negated instead
//! of rejected.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_lower};
use crate::model::{ma_multipliers, PosteriorDraw};
use crate::rng::{substream, tag, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignKind {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Zero,
}

impl SignKind {
    fn symbol(self) -> &'static str {
        match self {
            SignKind::Positive => "+",
            SignKind::Negative => "-",
            SignKind::Zero => "0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub variable: usize,
    pub kind: SignKind,
    /// Inclusive horizon window; impact is horizon 0.
    pub horizons: (usize, usize),
}

/// Presentation scaling of a shock: the median impact response of
/// `variable` is set to `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub variable: String,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shock {
    pub name: String,
    pub restrictions: Vec<Restriction>,
    pub normalize: Option<Normalization>,
}

impl Shock {
    pub fn zero_count(&self) -> usize {
        self.restrictions.iter().filter(|r| r.kind == SignKind::Zero).count()
    }
}

/// Ordered, validated set of shock restrictions over a fixed variable list.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionSet {
    pub variables: Vec<String>,
    pub shocks: Vec<Shock>,
    /// Processing order: indices into `shocks`, descending zero count with
    /// ties in configured order.
    order: Vec<usize>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FileRestriction {
    variable: String,
    sign: SignKind,
    horizons: [usize; 2],
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FileShock {
    name: String,
    #[serde(default)]
    normalize: Option<Normalization>,
    #[serde(default)]
    restrictions: Vec<FileRestriction>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RestrictionFile {
    variables: Vec<String>,
    #[serde(default, rename = "shock")]
    shocks: Vec<FileShock>,
}

pub const BASELINE_VARIABLES: [&str; 7] = [
    "output",
    "prices",
    "loans",
    "lending_rate",
    "home_bias",
    "spread",
    "short_rate",
];

pub const UNEMPLOYMENT_VARIABLES: [&str; 7] = [
    "unemployment",
    "prices",
    "loans",
    "lending_rate",
    "home_bias",
    "spread",
    "short_rate",
];

impl RestrictionSet {
    pub fn new(variables: Vec<String>, shocks: Vec<Shock>) -> Result<Self> {
        let k = variables.len();
        if shocks.len() > k {
            return Err(Error::InfeasibleRestrictions(format!(
                "{} shocks for {} variables",
                shocks.len(),
                k
            )));
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &shocks {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("duplicate shock '{}'", s.name)));
            }
            for r in &s.restrictions {
                if r.variable >= k {
                    return Err(Error::Config(format!("shock '{}': variable index {} out of range", s.name, r.variable)));
                }
                if r.horizons.0 > r.horizons.1 {
                    return Err(Error::Config(format!("shock '{}': empty horizon window", s.name)));
                }
                if r.kind == SignKind::Zero && r.horizons.0 != r.horizons.1 {
                    return Err(Error::Config(format!(
                        "shock '{}': zero restrictions apply at a single horizon",
                        s.name
                    )));
                }
            }
            if let Some(norm) = &s.normalize {
                if !variables.contains(&norm.variable) || !(norm.target != 0.0 && norm.target.is_finite()) {
                    return Err(Error::Config(format!("shock '{}': invalid normalisation", s.name)));
                }
            }
        }
        let mut order: Vec<usize> = (0..shocks.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(shocks[i].zero_count()));
        for (pos, &i) in order.iter().enumerate() {
            let z = shocks[i].zero_count();
            // position is 1-based in the bound `z_j ≤ K − j`
            if z > k - (pos + 1) {
                return Err(Error::InfeasibleRestrictions(format!(
                    "shock '{}' has {} zero restrictions but at most {} are possible at position {}",
                    shocks[i].name,
                    z,
                    k - (pos + 1),
                    pos + 1
                )));
            }
        }
        Ok(RestrictionSet { variables, shocks, order })
    }

    /// Parses the TOML restriction file format.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: RestrictionFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("restriction file: {e}")))?;
        let index = |name: &str| {
            file.variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::Config(format!("unknown variable '{name}' in restriction file")))
        };
        let mut shocks = Vec::new();
        for s in &file.shocks {
            let restrictions = s
                .restrictions
                .iter()
                .map(|r| {
                    Ok(Restriction {
                        variable: index(&r.variable)?,
                        kind: r.sign,
                        horizons: (r.horizons[0], r.horizons[1]),
                    })
                })
                .collect::<Result<_>>()?;
            shocks.push(Shock {
                name: s.name.clone(),
                restrictions,
                normalize: s.normalize.clone(),
            });
        }
        RestrictionSet::new(file.variables.clone(), shocks)
    }

    pub fn to_toml(&self) -> String {
        let file = RestrictionFile {
            variables: self.variables.clone(),
            shocks: self
                .shocks
                .iter()
                .map(|s| FileShock {
                    name: s.name.clone(),
                    normalize: s.normalize.clone(),
                    restrictions: s
                        .restrictions
                        .iter()
                        .map(|r| FileRestriction {
                            variable: self.variables[r.variable].clone(),
                            sign: r.kind,
                            horizons: [r.horizons.0, r.horizons.1],
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("restriction file serialises")
    }

    /// The three-shock scheme of the baseline study; with `unemployment` the
    /// activity variable is the unemployment rate and its responses are
    /// positive instead of negative.
    pub fn baseline(unemployment: bool) -> Self {
        let vars = if unemployment { UNEMPLOYMENT_VARIABLES } else { BASELINE_VARIABLES };
        let activity = if unemployment { SignKind::Positive } else { SignKind::Negative };
        let r = |variable: usize, kind: SignKind, lo: usize, hi: usize| Restriction {
            variable,
            kind,
            horizons: (lo, hi),
        };
        let lagged = |lending: SignKind| vec![r(0, activity, 3, 6), r(2, SignKind::Negative, 3, 6), r(3, lending, 3, 6)];
        let mut supply = lagged(SignKind::Positive);
        supply.push(r(4, SignKind::Zero, 0, 0));
        let mut sovereign = lagged(SignKind::Positive);
        sovereign.extend([
            r(4, SignKind::Positive, 0, 0),
            r(5, SignKind::Positive, 0, 0),
            r(6, SignKind::Negative, 0, 0),
        ]);
        let shocks = vec![
            Shock {
                name: "credit_demand".into(),
                restrictions: lagged(SignKind::Negative),
                normalize: None,
            },
            Shock {
                name: "credit_supply".into(),
                restrictions: supply,
                normalize: Some(Normalization {
                    variable: "lending_rate".into(),
                    target: 0.1,
                }),
            },
            Shock {
                name: "sovereign_risk".into(),
                restrictions: sovereign,
                normalize: Some(Normalization {
                    variable: "spread".into(),
                    target: 0.1,
                }),
            },
        ];
        RestrictionSet::new(vars.iter().map(|s| s.to_string()).collect(), shocks).expect("baseline restrictions are valid")
    }

    /// A set with no restrictions and no named shocks over `variables`.
    pub fn unrestricted(variables: Vec<String>) -> Self {
        RestrictionSet::new(variables, Vec::new()).expect("empty set is valid")
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn processing_order(&self) -> &[usize] {
        &self.order
    }

    pub fn max_horizon(&self) -> usize {
        self.shocks
            .iter()
            .flat_map(|s| s.restrictions.iter().map(|r| r.horizons.1))
            .max()
            .unwrap_or(0)
    }

    /// Names of all `K` structural shocks in reporting order: configured
    /// shocks, then `unidentified_1…`.
    pub fn shock_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.shocks.iter().map(|s| s.name.clone()).collect();
        for i in 1..=self.n_vars() - self.shocks.len() {
            names.push(format!("unidentified_{i}"));
        }
        names
    }

    pub fn shock_index(&self, name: &str) -> Result<usize> {
        self.shock_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownShock(name.to_string()))
    }

    /// Fails unless `variables` equals this set's variable list exactly.
    pub fn check_variables(&self, variables: &[String]) -> Result<()> {
        if self.variables != variables {
            return Err(Error::Config(format!(
                "variable order mismatch: restrictions use {:?}, data has {:?}",
                self.variables, variables
            )));
        }
        Ok(())
    }
}

/// A retained structural draw for one country.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralDraw {
    pub country: usize,
    /// Position of the reduced-form draw in the posterior sequence.
    pub draw: usize,
    /// Lower Cholesky factor of `Σ_c`.
    pub p: DMatrix<f64>,
    /// Rotation with columns in reporting order.
    pub q: DMatrix<f64>,
    /// Impulse responses `Θ_0 … Θ_H`, each `N×K` (variable × shock).
    pub theta: Vec<DMatrix<f64>>,
}

impl StructuralDraw {
    pub fn impact(&self) -> DMatrix<f64> {
        &self.p * &self.q
    }
}

/// Lower-triangular `P` with positive diagonal and `PPᵀ = Σ`.
pub fn chol_impact(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cholesky_lower(sigma).ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))
}

/// `Θ_h = Φ_h P Q` for `h = 0..=horizon`.
pub fn irf_tensor(
    b: &DMatrix<f64>,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    lags: usize,
    horizon: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let n = b.ncols();
    if p.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::shape("impact matrix", format!("{n}x{n}"), format!("{}x{}", q.nrows(), q.ncols())));
    }
    let impact = p * q;
    Ok(ma_multipliers(b, lags, n, horizon)?
        .into_iter()
        .map(|phi| phi * &impact)
        .collect())
}

/// Draws `Q` satisfying every zero restriction, with columns in reporting
/// order. `chol_irf[h]` is `Φ_h P` for at least every zero-restricted horizon.
///
/// Each column is a standard normal vector projected onto the orthogonal
/// complement of its zero-restriction rows and the columns already drawn, then
/// normalized: a uniform draw on the unit sphere of that null space.
pub fn draw_q_nullspace<R: Rng + ?Sized>(
    chol_irf: &[DMatrix<f64>],
    set: &RestrictionSet,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let k = set.n_vars();
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    for pos in 0..k {
        // orthonormal span of the previous columns and this shock's zero rows
        basis.clear();
        basis.extend(columns.iter().cloned());
        if let Some(&shock) = set.order.get(pos) {
            for r in set.shocks[shock].restrictions.iter().filter(|r| r.kind == SignKind::Zero) {
                let f = chol_irf
                    .get(r.horizons.0)
                    .ok_or_else(|| Error::InvalidInput("zero restriction beyond supplied horizons".into()))?;
                let row = f.row(r.variable).transpose();
                let scale = row.amax();
                let mut u = row;
                project_out(&mut u, &basis);
                let norm = u.norm();
                if basis.len() >= k || !(norm > 1e-12 * scale) {
                    return Err(Error::InfeasibleRestrictions(format!(
                        "trivial null space for rotation column {}",
                        pos + 1
                    )));
                }
                basis.push(u / norm);
            }
        }
        if basis.len() >= k {
            return Err(Error::InfeasibleRestrictions(format!(
                "trivial null space for rotation column {}",
                pos + 1
            )));
        }
        let mut x = DVector::from_fn(k, |_, _| rng.sample(StandardNormal));
        project_out(&mut x, &basis);
        let norm = x.norm();
        if !(norm > 0.0) {
            return Err(Error::InfeasibleRestrictions("degenerate rotation draw".into()));
        }
        columns.push(x / norm);
    }
    // processing position → reporting column
    let mut q = DMatrix::zeros(k, k);
    let labelled = set.shocks.len();
    for (pos, col) in columns.iter().enumerate() {
        let target = if pos < labelled { set.order[pos] } else { pos };
        q.set_column(target, col);
    }
    Ok(q)
}

/// Removes the components of `v` along the orthonormal `basis`, twice for
/// numerical orthogonality.
fn project_out(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for u in basis {
            let c = u.dot(v);
            v.axpy(-c, u, 1.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub shock: String,
    pub variable: String,
    pub horizon: usize,
    pub expected: SignKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignCheck {
    pub satisfied: bool,
    /// Per configured shock: the column must be negated to satisfy its signs.
    pub flips: Vec<bool>,
    /// Violations of the (possibly flipped) columns.
    pub violations: Vec<Violation>,
}

/// Checks every sign restriction (strictly) on `theta`, after allowing each
/// configured shock's column to be negated as a whole. Zero restrictions are
/// not checked here.
pub fn check_signs(theta: &[DMatrix<f64>], set: &RestrictionSet) -> SignCheck {
    let mut flips = Vec::with_capacity(set.shocks.len());
    let mut violations = Vec::new();
    for (j, shock) in set.shocks.iter().enumerate() {
        let mut values = Vec::new();
        for r in shock.restrictions.iter().filter(|r| r.kind != SignKind::Zero) {
            for h in r.horizons.0..=r.horizons.1 {
                let v = theta.get(h).map_or(f64::NAN, |t| t[(r.variable, j)]);
                values.push((r, h, v));
            }
        }
        let holds = |r: &Restriction, v: f64, sign: f64| match r.kind {
            SignKind::Positive => sign * v > 0.0,
            SignKind::Negative => sign * v < 0.0,
            SignKind::Zero => true,
        };
        let direct = values.iter().all(|&(r, _, v)| holds(r, v, 1.0));
        let flipped = !direct && !values.is_empty() && values.iter().all(|&(r, _, v)| holds(r, v, -1.0));
        let sign = if flipped { -1.0 } else { 1.0 };
        flips.push(flipped);
        for &(r, h, v) in &values {
            if !holds(r, v, sign) {
                violations.push(Violation {
                    shock: shock.name.clone(),
                    variable: set.variables[r.variable].clone(),
                    horizon: h,
                    expected: r.kind,
                    value: sign * v,
                });
            }
        }
    }
    SignCheck {
        satisfied: violations.is_empty(),
        flips,
        violations,
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} response of {} at h={} should be {} but is {:.4e}",
            self.shock,
            self.variable,
            self.horizon,
            self.expected.symbol(),
            self.value
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyConfig {
    pub seed: u64,
    pub horizon: usize,
    pub max_tries_per_draw: usize,
    pub acceptance_floor: f64,
    pub workers: usize,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            seed: 0,
            horizon: 48,
            max_tries_per_draw: 1000,
            acceptance_floor: 1e-4,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountryAcceptance {
    pub attempted: usize,
    pub accepted: usize,
    pub rotations_tried: usize,
}

impl CountryAcceptance {
    pub fn rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyDiagnostics {
    pub per_country: Vec<CountryAcceptance>,
    /// `(draw, country)` pairs for which no admissible rotation was found.
    pub skipped: Vec<(usize, usize)>,
}

impl IdentifyDiagnostics {
    pub fn acceptance(&self) -> f64 {
        let attempted: usize = self.per_country.iter().map(|c| c.attempted).sum();
        let accepted: usize = self.per_country.iter().map(|c| c.accepted).sum();
        if attempted == 0 {
            0.0
        } else {
            accepted as f64 / attempted as f64
        }
    }

    /// Adds the counts of a later block.
    pub fn merge(&mut self, other: IdentifyDiagnostics) {
        if self.per_country.len() < other.per_country.len() {
            self.per_country.resize(other.per_country.len(), CountryAcceptance::default());
        }
        for (a, b) in self.per_country.iter_mut().zip(other.per_country) {
            a.attempted += b.attempted;
            a.accepted += b.accepted;
            a.rotations_tried += b.rotations_tried;
        }
        self.skipped.extend(other.skipped);
    }

    /// Fails when nothing was retained or the pooled acceptance rate is below
    /// `floor`.
    pub fn check_floor(&self, floor: f64) -> Result<()> {
        let attempted: usize = self.per_country.iter().map(|c| c.attempted).sum();
        let accepted: usize = self.per_country.iter().map(|c| c.accepted).sum();
        let acceptance = self.acceptance();
        if acceptance < floor || accepted == 0 {
            return Err(Error::IdentificationInfeasible {
                acceptance,
                floor,
                accepted,
                attempted,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IdentifiedSet {
    pub draws: Vec<StructuralDraw>,
    pub diagnostics: IdentifyDiagnostics,
}

impl IdentifiedSet {
    pub fn for_country(&self, country: usize) -> impl Iterator<Item = &StructuralDraw> {
        self.draws.iter().filter(move |d| d.country == country)
    }
}

enum Outcome {
    Accepted(StructuralDraw, usize),
    Rejected(usize),
}

/// Column flips making `Θ_h = chol_irf[h]·Q` meet every sign restriction, or
/// `None` as soon as some shock fails both as drawn and negated. Agrees with
/// [`check_signs`] but computes only the restricted entries.
fn sign_flips(chol_irf: &[DMatrix<f64>], q: &DMatrix<f64>, set: &RestrictionSet) -> Option<Vec<bool>> {
    let mut flips = Vec::with_capacity(set.shocks.len());
    for (j, shock) in set.shocks.iter().enumerate() {
        let col = q.column(j);
        let (mut direct, mut negated, mut any) = (true, true, false);
        for r in shock.restrictions.iter().filter(|r| r.kind != SignKind::Zero) {
            for f in &chol_irf[r.horizons.0..=r.horizons.1] {
                let v = f.row(r.variable).transpose().dot(&col);
                any = true;
                match r.kind {
                    SignKind::Positive => {
                        direct &= v > 0.0;
                        negated &= v < 0.0;
                    }
                    SignKind::Negative => {
                        direct &= v < 0.0;
                        negated &= v > 0.0;
                    }
                    SignKind::Zero => {}
                }
                if !direct && !negated {
                    return None;
                }
            }
        }
        flips.push(!direct && negated && any);
    }
    Some(flips)
}

/// Searches for an admissible rotation for one reduced-form draw.
pub fn identify_one(
    b: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    lags: usize,
    set: &RestrictionSet,
    max_tries: usize,
    rng: &mut StreamRng,
) -> Result<Option<(DMatrix<f64>, DMatrix<f64>, usize)>> {
    let n = b.ncols();
    if set.n_vars() != n {
        return Err(Error::shape("restriction variables", n, set.n_vars()));
    }
    let p = chol_impact(sigma)?;
    let hmax = set.max_horizon();
    let chol_irf: Vec<DMatrix<f64>> = ma_multipliers(b, lags, n, hmax)?
        .into_iter()
        .map(|phi| phi * &p)
        .collect();
    for attempt in 1..=max_tries {
        let mut q = match draw_q_nullspace(&chol_irf, set, rng) {
            Ok(q) => q,
            Err(Error::InfeasibleRestrictions(_)) => continue,
            Err(e) => return Err(e),
        };
        if let Some(flips) = sign_flips(&chol_irf, &q, set) {
            for (j, flip) in flips.iter().enumerate() {
                if *flip {
                    q.column_mut(j).neg_mut();
                }
            }
            return Ok(Some((p, q, attempt)));
        }
    }
    Ok(None)
}

/// Identifies every `(draw, country)` pair, in parallel over draws, with the
/// rotation stream of each pair keyed by its draw index and country. Fails
/// when the acceptance rate falls below the configured floor.
pub fn identify_draws(
    draws: &[PosteriorDraw],
    lags: usize,
    set: &RestrictionSet,
    config: &IdentifyConfig,
) -> Result<IdentifiedSet> {
    let out = identify_block(draws, 0, lags, set, config)?;
    out.diagnostics.check_floor(config.acceptance_floor)?;
    Ok(out)
}

/// Identifies the draws at positions `first..first + draws.len()` of the
/// posterior sequence without applying the acceptance floor. Streams are keyed
/// by absolute position, so a run split into blocks matches a single call.
pub fn identify_block(
    draws: &[PosteriorDraw],
    first: usize,
    lags: usize,
    set: &RestrictionSet,
    config: &IdentifyConfig,
) -> Result<IdentifiedSet> {
    if config.horizon < set.max_horizon() {
        return Err(Error::Config(format!(
            "horizon {} is shorter than the longest restricted horizon {}",
            config.horizon,
            set.max_horizon()
        )));
    }
    if config.workers < 1 || config.max_tries_per_draw < 1 {
        return Err(Error::Config("workers and max tries must be at least 1".into()));
    }
    let n_countries = draws.first().map_or(0, |d| d.countries.len());
    let jobs: Vec<(usize, usize)> = (0..draws.len())
        .flat_map(|d| (0..n_countries).map(move |c| (d, c)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(d, c)| {
                let params = &draws[d].countries[c];
                let pos = first + d;
                let mut rng = substream(config.seed, &[tag::ROTATION, pos as u64, c as u64]);
                match identify_one(&params.b, &params.sigma, lags, set, config.max_tries_per_draw, &mut rng)? {
                    Some((p, q, tries)) => {
                        let theta = irf_tensor(&params.b, &p, &q, lags, config.horizon)?;
                        Ok(Outcome::Accepted(
                            StructuralDraw {
                                country: c,
                                draw: pos,
                                p,
                                q,
                                theta,
                            },
                            tries,
                        ))
                    }
                    None => Ok(Outcome::Rejected(config.max_tries_per_draw)),
                }
            })
            .collect::<Result<_>>()
    })?;

    let mut per_country = vec![CountryAcceptance::default(); n_countries];
    let mut skipped = Vec::new();
    let mut kept = Vec::new();
    for (&(d, c), outcome) in jobs.iter().zip(outcomes) {
        per_country[c].attempted += 1;
        match outcome {
            Outcome::Accepted(draw, tries) => {
                per_country[c].accepted += 1;
                per_country[c].rotations_tried += tries;
                kept.push(draw);
            }
            Outcome::Rejected(tries) => {
                per_country[c].rotations_tried += tries;
                skipped.push((first + d, c));
            }
        }
    }
    let diagnostics = IdentifyDiagnostics { per_country, skipped };
    Ok(IdentifiedSet {
        draws: kept,
        diagnostics,
    })
}

/// Invariant measurements for one retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawAudit {
    pub orthonormality: f64,
    pub cholesky_error: f64,
    pub max_zero_violation: f64,
    pub sign_violations: usize,
    /// `max |(PQ)(PQ)ᵀ − Σ|`.
    pub covariance_error: f64,
}

pub fn audit_draw(draw: &StructuralDraw, sigma: &DMatrix<f64>, set: &RestrictionSet) -> DrawAudit {
    let mut max_zero = 0.0_f64;
    for (j, s) in set.shocks.iter().enumerate() {
        for r in s.restrictions.iter().filter(|r| r.kind == SignKind::Zero) {
            max_zero = max_zero.max(draw.theta[r.horizons.0][(r.variable, j)].abs());
        }
    }
    let impact = draw.impact();
    let signs = check_signs(&draw.theta, set);
    DrawAudit {
        orthonormality: linalg::orthonormality_error(&draw.q),
        cholesky_error: linalg::max_abs(&(&draw.p * draw.p.transpose() - sigma)),
        max_zero_violation: max_zero,
        // a retained draw must satisfy its signs without further negation
        sign_violations: signs.violations.len() + signs.flips.iter().filter(|f| **f).count(),
        covariance_error: linalg::max_abs(&(&impact * impact.transpose() - sigma)),
    }
}

/// Summary of acceptance by country name, for reports.
pub fn acceptance_table(diag: &IdentifyDiagnostics, countries: &[String]) -> BTreeMap<String, f64> {
    countries
        .iter()
        .zip(&diag.per_country)
        .map(|(name, acc)| (name.clone(), acc.rate()))
        .collect()
}
