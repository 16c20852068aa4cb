//! Pipeline stages. Each reads the artifacts of the previous one from the
//! output directory, so estimation is never repeated for a new restriction
//! set.

mod estimate;
mod fetch;
mod identify;
mod report;

use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use panelvar::checkpoint::DrawReader;
use panelvar::{Month, PanelDataset};
use panelvar_ingest::catalog::Variant;
use panelvar_ingest::fetch::{sha256_hex, Provenance};
use panelvar_ingest::read_panel_dir;
use serde::{Deserialize, Serialize};

use crate::config::Run;
use crate::error::{Error, Result};
use crate::table::Meta;

pub use estimate::{estimate, EstimateSummary};
pub use fetch::{fetch, FetchSummary};
pub use identify::{identify, IdentifySummary};
pub use report::{report, ReportSummary};

/// Index of the assembled panel written by `fetch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub meta: Meta,
    pub variant: Variant,
    pub variables: Vec<String>,
    pub countries: Vec<PanelFile>,
    pub sources: Vec<Provenance>,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelFile {
    pub code: String,
    pub file: String,
    pub start: Month,
    pub end: Month,
    pub rows: usize,
    pub sha256: String,
}

fn require(path: &Path, stage: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            stage,
        })
    }
}

/// Reads the panel written by `fetch`, checking every file against the
/// manifest and the configuration.
pub fn load_panel(run: &Run) -> Result<PanelDataset> {
    let art = run.artifacts();
    let path = art.manifest();
    require(&path, "fetch")?;
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::StaleArtifact {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let stale = |reason: String| Error::StaleArtifact {
        path: path.clone(),
        reason,
    };
    let variables = run.variables();
    if manifest.variables != variables {
        return Err(stale(format!("panel variables {:?}, expected {:?}", manifest.variables, variables)));
    }
    let codes: Vec<String> = manifest.countries.iter().map(|c| c.code.clone()).collect();
    if codes != run.config.data.countries {
        return Err(stale(format!("panel countries {codes:?}, expected {:?}", run.config.data.countries)));
    }
    let dir = art.panel_dir();
    for c in &manifest.countries {
        let file = dir.join(&c.file);
        let bytes = fs::read(&file).map_err(Error::io(&file))?;
        let actual = sha256_hex(&bytes);
        if actual != c.sha256 {
            return Err(panelvar_ingest::Error::Integrity {
                path: file,
                expected: c.sha256.clone(),
                actual,
            }
            .into());
        }
    }
    Ok(read_panel_dir(&dir, &codes, &variables, run.config.model.deterministic)?)
}

/// Opens the posterior checkpoint and checks its dimensions against the run.
pub fn open_posterior(run: &Run) -> Result<DrawReader<BufReader<File>>> {
    let path = run.artifacts().posterior();
    require(&path, "estimate")?;
    let file = File::open(&path).map_err(Error::io(&path))?;
    let reader = DrawReader::new(BufReader::new(file))?;
    let h = *reader.header();
    let m = &run.config.model;
    let expected = (
        run.variables().len(),
        m.lags,
        m.n_det(),
        run.config.data.countries.len(),
        m.pooling,
    );
    if (h.n_vars, h.lags, h.n_det, h.n_countries, h.pooling) != expected {
        return Err(Error::StaleArtifact {
            path,
            reason: format!(
                "checkpoint has N={}, L={}, M={}, C={}, {:?} pooling; rerun `panelvar estimate`",
                h.n_vars, h.lags, h.n_det, h.n_countries, h.pooling
            ),
        });
    }
    Ok(reader)
}

/// Runs every stage in order.
pub fn run_all(run: &Run, transport: &dyn panelvar_ingest::Transport) -> Result<ReportSummary> {
    fetch(run, transport)?;
    estimate(run)?;
    identify(run)?;
    report(run)
}
