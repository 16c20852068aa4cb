use std::fs;
use std::path::PathBuf;

use panelvar::{CountryData, Deterministic, Month, PanelDataset};
use panelvar_ingest::fetch::sha256_hex;
use panelvar_ingest::pipeline::{build_panel, DataSource, FetchPlan};
use panelvar_ingest::{read_panel_dir, write_panel_dir, NoNetwork, SeriesCache, Transport};

use super::{Manifest, PanelFile};
use crate::config::{DataProvider, Run};
use crate::error::{Error, Result};
use crate::table::{write_json, Meta};

#[derive(Debug, Clone)]
pub struct FetchSummary {
    pub files: Vec<PathBuf>,
    pub rows: Vec<usize>,
    /// Remote series served from the cache.
    pub cache_hits: usize,
}

fn clip(panel: PanelDataset, window: (Month, Month), det: Deterministic) -> Result<PanelDataset> {
    let mut out = Vec::with_capacity(panel.countries.len());
    for c in panel.countries {
        let (first, last) = c.sample_range();
        let from = first.max(window.0);
        let to = last.min(window.1);
        if from > to {
            return Err(panelvar_ingest::Error::EmptySample(c.code).into());
        }
        let skip = (from.index() - first.index()) as usize;
        let len = (to.index() - from.index() + 1) as usize;
        let y = c.y.rows(skip, len).clone_owned();
        out.push(CountryData::new(c.code, from, y, det));
    }
    Ok(PanelDataset::new(panel.variable_names, out)?)
}

/// Builds the panel from the configured source and writes
/// `panel/<COUNTRY>.csv` plus `panel/manifest.json`.
pub fn fetch(run: &Run, transport: &dyn Transport) -> Result<FetchSummary> {
    let c = &run.config;
    let d = &c.data;
    let window = (d.start, d.end);
    let variables = run.variables();
    let (panel, sources, cache_hits) = match d.provider {
        DataProvider::Panel => {
            let dir = d.panel_dir.as_ref().expect("validated");
            let panel = read_panel_dir(dir, &d.countries, &variables, c.model.deterministic)?;
            (clip(panel, window, c.model.deterministic)?, Vec::new(), 0)
        }
        DataProvider::Remote | DataProvider::Local => {
            let source = match d.provider {
                DataProvider::Local => DataSource::Local(d.raw_dir.clone().expect("validated")),
                _ => DataSource::Remote,
            };
            let plan = FetchPlan {
                source,
                countries: d.countries.clone(),
                variant: d.variant,
                window,
                shared_dir: d.shared_dir.clone().expect("validated"),
                interpolate: d.interpolate,
                deterministic: c.model.deterministic,
            };
            let cache = SeriesCache::new(&d.cache_dir);
            let transport: &dyn Transport = if d.offline { &NoNetwork } else { transport };
            let built = build_panel(&plan, transport, &cache)?;
            (built.panel, built.provenance, built.cache_hits)
        }
    };

    let art = run.artifacts();
    let dir = art.panel_dir();
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let files = write_panel_dir(&dir, &panel, &run.preamble())?;
    let mut entries = Vec::with_capacity(files.len());
    for (path, country) in files.iter().zip(&panel.countries) {
        let bytes = fs::read(path).map_err(Error::io(path))?;
        let (start, end) = country.sample_range();
        entries.push(PanelFile {
            code: country.code.clone(),
            file: format!("{}.csv", country.code),
            start,
            end,
            rows: country.y.nrows(),
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = Manifest {
        meta: Meta::new(&run.checksum),
        variant: d.variant,
        variables,
        countries: entries,
        sources,
        cache_hits,
    };
    write_json(&art.manifest(), &manifest)?;
    Ok(FetchSummary {
        files,
        rows: panel.countries.iter().map(|c| c.y.nrows()).collect(),
        cache_hits,
    })
}
