use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;

use nalgebra::DMatrix;
use panelvar::analyze::{fevd, historical_decomposition, normalization_factor};
use panelvar::checkpoint::RotationReader;
use panelvar::identify::chol_impact;
use panelvar::model::propagate;
use panelvar::stats::quantile_sorted;
use panelvar::{CountryParams, Design};

use super::{load_panel, open_posterior, require};
use crate::config::Run;
use crate::error::{Error, Result};
use crate::table::{num, quantile_label, Table};

const UNITS: &str = "units: log levels x100 (percent); rates and spreads in percentage points";

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
    /// Identified draws per country.
    pub draws: Vec<usize>,
    /// Countries without a single identified draw; they are left out of
    /// every table.
    pub skipped_countries: Vec<String>,
    /// Largest `|baseline + Σ contributions − actual|` over all
    /// decompositions.
    pub max_additivity_error: f64,
}

/// One identified draw of one country.
struct Kept {
    params: CountryParams,
    impact: DMatrix<f64>,
}

/// Figure-sized subsets of the main tables, keyed by file name.
type PlotData = BTreeMap<String, (Vec<String>, Vec<Vec<String>>)>;

/// Turns the identified draws into `irf.csv`, `fevd.csv`, `hd.csv`,
/// `counterfactual.csv` and one `plotdata/` file per figure.
pub fn report(run: &Run) -> Result<ReportSummary> {
    let c = &run.config;
    let art = run.artifacts();
    let set = run.restrictions();
    let panel = load_panel(run)?;
    let designs = panel.designs(c.model.lags)?;
    let rotations = read_rotations(run)?;

    let probs = &c.model.ci_quantiles;
    let qlabels: Vec<String> = probs.iter().map(|&p| quantile_label(p)).collect();
    let with_q = |cols: &[&str], extra: &[&str]| -> Vec<String> {
        cols.iter()
            .map(|s| s.to_string())
            .chain(qlabels.iter().cloned())
            .chain(extra.iter().map(|s| s.to_string()))
            .collect()
    };
    let mut preamble = run.preamble();
    preamble.push(UNITS.into());
    let mut irf = Table::create(&art.irf(), &preamble, &with_q(&["country", "shock", "variable", "horizon"], &[]))?;
    let mut fevd_t = Table::create(
        &art.fevd(),
        &run.preamble(),
        &with_q(&["country", "shock", "variable", "horizon"], &["mean", "median_irf"]),
    )?;
    let mut hd = Table::create(
        &art.hd(),
        &preamble,
        &with_q(&["country", "shock", "variable", "date", "actual"], &["additivity"]),
    )?;
    let mut cf = Table::create(
        &art.counterfactual(),
        &preamble,
        &with_q(&["country", "shock", "variable", "date", "actual"], &[]),
    )?;

    let mut plots = PlotData::new();
    let named = &set.shocks;
    for s in named {
        plots.insert(format!("irf_{}.csv", s.name), (with_q(&["country", "variable", "horizon"], &[]), Vec::new()));
        plots.insert(
            format!("fevd_{}.csv", s.name),
            (with_q(&["country", "variable", "horizon"], &["median_irf"]), Vec::new()),
        );
        plots.insert(format!("hd_{}.csv", s.name), (with_q(&["country", "variable", "date"], &[]), Vec::new()));
    }

    let mut summary = ReportSummary {
        files: vec![art.irf(), art.fevd(), art.hd(), art.counterfactual()],
        draws: Vec::new(),
        skipped_countries: Vec::new(),
        max_additivity_error: 0.0,
    };
    for (ci, wanted) in rotations.iter().enumerate() {
        let code = &c.data.countries[ci];
        let kept = collect_country(run, ci, wanted)?;
        summary.draws.push(kept.len());
        if kept.is_empty() {
            summary.skipped_countries.push(code.clone());
            continue;
        }
        let ctx = Ctx {
            run,
            code,
            probs,
            kept: &kept,
        };
        let median = ctx.irf(&mut irf, &mut plots)?;
        ctx.fevd(&median, &mut fevd_t, &mut plots)?;
        let err = ctx.hd(&designs[ci], panel.countries[ci].start, &mut hd, &mut cf, &mut plots)?;
        summary.max_additivity_error = summary.max_additivity_error.max(err);
    }
    irf.finish()?;
    fevd_t.finish()?;
    hd.finish()?;
    cf.finish()?;

    let dir = art.plotdata();
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    for (name, (header, rows)) in plots {
        let path = dir.join(name);
        let mut t = Table::create(&path, &preamble, &header)?;
        for r in rows {
            t.row(r)?;
        }
        t.finish()?;
        summary.files.push(path);
    }
    Ok(summary)
}

/// Retained rotations grouped by country, in posterior order.
fn read_rotations(run: &Run) -> Result<Vec<Vec<(usize, DMatrix<f64>)>>> {
    let path = run.artifacts().rotations();
    require(&path, "identify")?;
    let file = File::open(&path).map_err(Error::io(&path))?;
    let reader = RotationReader::new(BufReader::new(file))?;
    let k = run.restrictions().n_vars();
    let n_countries = run.config.data.countries.len();
    let stale = |reason: String| Error::StaleArtifact {
        path: path.clone(),
        reason,
    };
    if reader.dim() != k {
        return Err(stale(format!("rotations are {0}x{0}, expected {k}x{k}", reader.dim())));
    }
    let mut out = vec![Vec::new(); n_countries];
    for rec in reader {
        let rec = rec?;
        let slot: &mut Vec<(usize, DMatrix<f64>)> = out
            .get_mut(rec.country)
            .ok_or_else(|| stale(format!("country index {} out of range", rec.country)))?;
        slot.push((rec.draw, rec.q));
    }
    for v in &mut out {
        v.sort_by_key(|(d, _)| *d);
    }
    Ok(out)
}

/// Pulls the parameters of the identified draws of one country out of the
/// checkpoint in a single pass.
fn collect_country(run: &Run, country: usize, wanted: &[(usize, DMatrix<f64>)]) -> Result<Vec<Kept>> {
    let mut reader = open_posterior(run)?;
    let mut out = Vec::with_capacity(wanted.len());
    let mut next = wanted.iter().peekable();
    let mut pos = 0;
    while let Some((want, q)) = next.peek() {
        let Some(draw) = reader.next() else { break };
        let draw = draw?;
        if *want == pos {
            let params = draw.countries[country].clone();
            let impact = chol_impact(&params.sigma)? * q;
            out.push(Kept { params, impact });
            next.next();
        }
        pos += 1;
    }
    if out.len() != wanted.len() {
        return Err(Error::StaleArtifact {
            path: run.artifacts().rotations(),
            reason: "rotations refer to draws missing from the checkpoint; rerun `panelvar identify`".into(),
        });
    }
    Ok(out)
}

fn sort(v: &mut [f64]) {
    v.sort_by(f64::total_cmp);
}

fn quantiles(sorted: &[f64], probs: &[f64]) -> Vec<String> {
    probs.iter().map(|&p| num(quantile_sorted(sorted, p))).collect()
}

/// Evenly spaced positions `⌊i·n/m⌋`; all of `0..n` when `m` is 0 or at
/// least `n`.
fn spread(n: usize, m: usize) -> Vec<usize> {
    if m == 0 || m >= n {
        (0..n).collect()
    } else {
        (0..m).map(|i| i * n / m).collect()
    }
}

struct Ctx<'a> {
    run: &'a Run,
    code: &'a str,
    probs: &'a [f64],
    kept: &'a [Kept],
}

impl Ctx<'_> {
    fn plot(&self, plots: &mut PlotData, name: String, row: Vec<String>) {
        if let Some((_, rows)) = plots.get_mut(&name) {
            rows.push(row);
        }
    }

    /// Impulse-response bands, one shock at a time. Normalized shocks are
    /// rescaled by a common factor per country; the unscaled pointwise
    /// medians up to the longest FEVD horizon are returned.
    fn irf(&self, table: &mut Table, plots: &mut PlotData) -> Result<Vec<DMatrix<f64>>> {
        let c = &self.run.config;
        let set = self.run.restrictions();
        let vars = self.run.variables();
        let shocks = set.shock_names();
        let (n, k, d) = (vars.len(), shocks.len(), self.kept.len());
        let hn = c.model.horizon + 1;
        let hf = *c.output.fevd_horizons.iter().max().expect("validated");
        let mut median = vec![DMatrix::zeros(n, k); hf];
        let mut values = vec![0.0; hn * n * d];
        let mut scaled = vec![0.0; d];
        for (j, shock) in shocks.iter().enumerate() {
            for (s, kd) in self.kept.iter().enumerate() {
                let col = kd.impact.columns(j, 1).clone_owned();
                for (h, m) in propagate(&kd.params.b, c.model.lags, &col, c.model.horizon)?.iter().enumerate() {
                    for i in 0..n {
                        values[(h * n + i) * d + s] = m[(i, 0)];
                    }
                }
            }
            let factor = match set.shocks.get(j).and_then(|s| s.normalize.as_ref()) {
                Some(norm) => {
                    let var = vars.iter().position(|v| *v == norm.variable).ok_or_else(|| {
                        Error::Config(format!("shock {shock} is normalized by unknown variable {}", norm.variable))
                    })?;
                    normalization_factor(&values[var * d..(var + 1) * d], norm.target)?
                }
                None => 1.0,
            };
            let mut rows = vec![Vec::new(); n];
            for h in 0..hn {
                for (i, row) in rows.iter_mut().enumerate() {
                    let slice = &mut values[(h * n + i) * d..(h * n + i + 1) * d];
                    sort(slice);
                    if h < hf {
                        median[h][(i, j)] = quantile_sorted(slice, 0.5);
                    }
                    if factor >= 0.0 {
                        for (dst, src) in scaled.iter_mut().zip(slice.iter()) {
                            *dst = src * factor;
                        }
                    } else {
                        for (dst, src) in scaled.iter_mut().zip(slice.iter().rev()) {
                            *dst = src * factor;
                        }
                    }
                    row.push(quantiles(&scaled, self.probs));
                }
            }
            for (i, per_h) in rows.into_iter().enumerate() {
                for (h, q) in per_h.into_iter().enumerate() {
                    let mut r = vec![self.code.to_string(), shock.clone(), vars[i].clone(), h.to_string()];
                    r.extend(q.iter().cloned());
                    table.row(r)?;
                    let mut p = vec![self.code.to_string(), vars[i].clone(), h.to_string()];
                    p.extend(q);
                    self.plot(plots, format!("irf_{shock}.csv"), p);
                }
            }
        }
        Ok(median)
    }

    /// Per-draw variance shares summarized by quantiles and mean, next to the
    /// shares implied by the pointwise median IRF.
    fn fevd(&self, median: &[DMatrix<f64>], table: &mut Table, plots: &mut PlotData) -> Result<()> {
        let c = &self.run.config;
        let horizons = &c.output.fevd_horizons;
        let shocks = self.run.restrictions().shock_names();
        let vars = self.run.variables();
        let (n, k, d, nh) = (vars.len(), shocks.len(), self.kept.len(), horizons.len());
        let hf = median.len();
        let mut shares = vec![0.0; nh * n * k * d];
        for (s, kd) in self.kept.iter().enumerate() {
            let theta = propagate(&kd.params.b, c.model.lags, &kd.impact, hf - 1)?;
            for (x, m) in fevd(&theta, horizons)?.iter().enumerate() {
                for i in 0..n {
                    for j in 0..k {
                        shares[((x * n + i) * k + j) * d + s] = m[(i, j)];
                    }
                }
            }
        }
        let at_median = fevd(median, horizons)?;
        for (j, shock) in shocks.iter().enumerate() {
            for (i, var) in vars.iter().enumerate() {
                for (x, hz) in horizons.iter().enumerate() {
                    let slice = &mut shares[((x * n + i) * k + j) * d..((x * n + i) * k + j + 1) * d];
                    let mean = slice.iter().sum::<f64>() / d as f64;
                    sort(slice);
                    let q = quantiles(slice, self.probs);
                    let mut r = vec![self.code.to_string(), shock.clone(), var.clone(), hz.to_string()];
                    r.extend(q.iter().cloned());
                    r.push(num(mean));
                    r.push(num(at_median[x][(i, j)]));
                    table.row(r)?;
                    let mut p = vec![self.code.to_string(), var.clone(), hz.to_string()];
                    p.extend(q);
                    p.push(num(at_median[x][(i, j)]));
                    self.plot(plots, format!("fevd_{shock}.csv"), p);
                }
            }
        }
        Ok(())
    }

    /// Historical decompositions over evenly spaced identified draws.
    /// Returns the largest additivity error.
    fn hd(
        &self,
        design: &Design,
        start: panelvar::Month,
        hd_table: &mut Table,
        cf_table: &mut Table,
        plots: &mut PlotData,
    ) -> Result<f64> {
        let c = &self.run.config;
        let lags = c.model.lags;
        let shocks = self.run.restrictions().shock_names();
        let vars = self.run.variables();
        let picks = spread(self.kept.len(), c.output.hd_draws);
        let (n, k, t, s_n) = (vars.len(), shocks.len(), design.rows(), picks.len());
        // Slot 0 holds the baseline, slot j + 1 the contribution of shock j.
        let mut parts = vec![0.0; (k + 1) * t * n * s_n];
        let mut additivity = vec![0.0f64; t * n];
        for (s, &idx) in picks.iter().enumerate() {
            let kd = &self.kept[idx];
            let dec = historical_decomposition(design, &kd.params, &kd.impact, lags)?;
            for r in 0..t {
                for i in 0..n {
                    let mut recon = dec.baseline[(r, i)];
                    parts[(r * n + i) * s_n + s] = dec.baseline[(r, i)];
                    for (j, m) in dec.contributions.iter().enumerate() {
                        parts[(((j + 1) * t + r) * n + i) * s_n + s] = m[(r, i)];
                        recon += m[(r, i)];
                    }
                    let err = (recon - dec.actual[(r, i)]).abs();
                    additivity[r * n + i] = additivity[r * n + i].max(err);
                }
            }
        }
        let date = |r: usize| start.offset((lags + r) as i64).to_string();
        let mut buf = vec![0.0; s_n];
        for slot in 0..=k {
            let name = if slot == 0 { "baseline" } else { &shocks[slot - 1] };
            for (i, var) in vars.iter().enumerate() {
                for r in 0..t {
                    let actual = design.y[(r, i)];
                    let slice = &mut parts[((slot * t + r) * n + i) * s_n..((slot * t + r) * n + i + 1) * s_n];
                    sort(slice);
                    let q = quantiles(slice, self.probs);
                    let mut row = vec![self.code.to_string(), name.to_string(), var.clone(), date(r), num(actual)];
                    row.extend(q.iter().cloned());
                    row.push(num(additivity[r * n + i]));
                    hd_table.row(row)?;
                    if slot == 0 {
                        continue;
                    }
                    let mut p = vec![self.code.to_string(), var.clone(), date(r)];
                    p.extend(q);
                    self.plot(plots, format!("hd_{name}.csv"), p);
                    for (dst, x) in buf.iter_mut().zip(slice.iter().rev()) {
                        *dst = actual - x;
                    }
                    let mut row = vec![self.code.to_string(), name.to_string(), var.clone(), date(r), num(actual)];
                    row.extend(quantiles(&buf, self.probs));
                    cf_table.row(row)?;
                }
            }
        }
        Ok(additivity.iter().copied().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_picks_evenly() {
        assert_eq!(spread(5, 0), vec![0, 1, 2, 3, 4]);
        assert_eq!(spread(5, 9), vec![0, 1, 2, 3, 4]);
        assert_eq!(spread(10, 4), vec![0, 2, 5, 7]);
    }
}
