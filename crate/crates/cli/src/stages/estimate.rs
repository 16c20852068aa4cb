use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use panelvar::checkpoint::{CheckpointHeader, DrawReader, DrawWriter};
use panelvar::{ChainTrace, GibbsDiagnostics, GibbsSampler, Pooling};
use rayon::prelude::*;
use serde::Serialize;

use super::load_panel;
use crate::config::Run;
use crate::error::{Error, Result};
use crate::table::{num, quantile_label, write_json, Meta, Table};

#[derive(Debug, Clone)]
pub struct EstimateSummary {
    pub retained: usize,
    pub diagnostics: GibbsDiagnostics,
}

#[derive(Serialize)]
struct Lambda1Report {
    fixed: Option<f64>,
    quantiles: Option<Vec<(String, f64)>>,
    split_rhat: Option<f64>,
}

#[derive(Serialize)]
struct DiagnosticsReport<'a> {
    meta: Meta,
    countries: &'a [String],
    pooling: Pooling,
    lags: usize,
    chains: usize,
    n_draws: usize,
    n_burn: usize,
    thinning: usize,
    retained: usize,
    lambda1: Lambda1Report,
    common_mean_split_rhat_max: f64,
    explosive_share: f64,
}

/// Runs the Gibbs sampler, streaming each chain to disk, and writes
/// `posterior.bin`, `diagnostics.json` and the `λ1` trace.
pub fn estimate(run: &Run) -> Result<EstimateSummary> {
    let c = &run.config;
    let art = run.artifacts();
    let panel = load_panel(run)?;
    let sampler = GibbsSampler::new(&panel, &c.model)?;
    let per_chain = sampler.retained_per_chain(c.thinning);
    let header = CheckpointHeader {
        n_vars: panel.n_vars(),
        lags: c.model.lags,
        n_det: c.model.n_det(),
        n_countries: panel.n_countries(),
        pooling: c.model.pooling,
        n_draws: per_chain * c.chains,
    };
    let parts: Vec<PathBuf> = (0..c.chains)
        .map(|i| art.root.join(format!("posterior.chain{i}.part")))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let traces: Vec<ChainTrace> = pool.install(|| {
        parts
            .par_iter()
            .enumerate()
            .map(|(chain, path)| {
                let file = File::create(path).map_err(Error::io(path))?;
                let chain_header = CheckpointHeader {
                    n_draws: per_chain,
                    ..header
                };
                let mut w = DrawWriter::new(BufWriter::new(file), chain_header)?;
                let mut trace = ChainTrace::default();
                sampler.run_chain(c.seed, chain, c.thinning, &mut |d| {
                    trace.record(&d, c.model.lags)?;
                    w.push(&d)
                })?;
                w.finish()?;
                Ok(trace)
            })
            .collect::<Result<_>>()
    })?;

    let target = art.posterior();
    let staging = art.root.join("posterior.bin.part");
    let file = File::create(&staging).map_err(Error::io(&staging))?;
    let mut w = DrawWriter::new(BufWriter::new(file), header)?;
    for part in &parts {
        let file = File::open(part).map_err(Error::io(part))?;
        let mut r = DrawReader::new(BufReader::new(file))?;
        for d in r.by_ref() {
            w.push(&d?)?;
        }
        r.finish()?;
        fs::remove_file(part).map_err(Error::io(part))?;
    }
    w.finish()?;
    fs::rename(&staging, &target).map_err(Error::io(&target))?;

    let diagnostics = GibbsDiagnostics::from_traces(&traces, &c.model.ci_quantiles);
    let report = DiagnosticsReport {
        meta: Meta::new(&run.checksum),
        countries: &c.data.countries,
        pooling: c.model.pooling,
        lags: c.model.lags,
        chains: c.chains,
        n_draws: c.model.n_draws,
        n_burn: c.model.n_burn,
        thinning: c.thinning,
        retained: diagnostics.retained,
        lambda1: Lambda1Report {
            fixed: c.model.lambda1_fixed,
            quantiles: diagnostics.lambda1_quantiles.as_ref().map(|q| {
                c.model
                    .ci_quantiles
                    .iter()
                    .map(|&p| quantile_label(p))
                    .zip(q.iter().copied())
                    .collect()
            }),
            split_rhat: diagnostics.rhat_lambda1,
        },
        common_mean_split_rhat_max: diagnostics.rhat_common_mean_max,
        explosive_share: diagnostics.explosive_share,
    };
    write_json(&art.diagnostics(), &report)?;
    write_lambda1_trace(run, &diagnostics)?;
    Ok(EstimateSummary {
        retained: diagnostics.retained,
        diagnostics,
    })
}

fn write_lambda1_trace(run: &Run, diagnostics: &GibbsDiagnostics) -> Result<()> {
    let dir = run.artifacts().plotdata();
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let path = dir.join("lambda1_trace.csv");
    if diagnostics.lambda1_trace.is_empty() {
        if path.exists() {
            fs::remove_file(&path).map_err(Error::io(&path))?;
        }
        return Ok(());
    }
    let header = ["chain", "draw", "lambda1"].map(String::from);
    let mut t = Table::create(&path, &run.preamble(), &header)?;
    for (chain, trace) in diagnostics.lambda1_trace.iter().enumerate() {
        for (i, v) in trace.iter().enumerate() {
            t.row(vec![chain.to_string(), i.to_string(), num(*v)])?;
        }
    }
    t.finish()
}
