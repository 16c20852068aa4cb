use std::fs::{self, File};
use std::io::BufWriter;

use panelvar::checkpoint::{RotationRecord, RotationWriter};
use panelvar::identify::{identify_block, CountryAcceptance, IdentifyConfig, IdentifyDiagnostics};
use panelvar::PosteriorDraw;

use super::open_posterior;
use crate::config::Run;
use crate::error::{Error, Result};
use crate::table::{num, Table};

/// Posterior draws identified per parallel batch.
const BLOCK: usize = 512;

#[derive(Debug, Clone)]
pub struct IdentifySummary {
    pub retained: usize,
    pub diagnostics: IdentifyDiagnostics,
}

/// Searches an admissible rotation for every `(draw, country)` pair and
/// writes `rotations.bin` and `acceptance.csv`. The acceptance report is
/// written even when identification fails the acceptance floor.
pub fn identify(run: &Run) -> Result<IdentifySummary> {
    let c = &run.config;
    let art = run.artifacts();
    let set = run.restrictions();
    let mut reader = open_posterior(run)?;
    let config = IdentifyConfig {
        seed: c.seed,
        horizon: set.max_horizon(),
        max_tries_per_draw: c.identification.max_tries_per_draw,
        acceptance_floor: c.identification.acceptance_floor,
        workers: c.workers,
    };
    let staging = art.root.join("rotations.bin.part");
    let file = File::create(&staging).map_err(Error::io(&staging))?;
    let mut writer = RotationWriter::new(BufWriter::new(file), set.n_vars())?;
    let mut diagnostics = IdentifyDiagnostics {
        per_country: vec![CountryAcceptance::default(); c.data.countries.len()],
        skipped: Vec::new(),
    };
    let mut first = 0;
    let mut retained = 0;
    loop {
        let block: Vec<PosteriorDraw> = reader.by_ref().take(BLOCK).collect::<panelvar::Result<_>>()?;
        if block.is_empty() {
            break;
        }
        let part = identify_block(&block, first, c.model.lags, set, &config)?;
        for d in part.draws {
            writer.push(&RotationRecord {
                country: d.country,
                draw: d.draw,
                q: d.q,
            })?;
            retained += 1;
        }
        diagnostics.merge(part.diagnostics);
        first += block.len();
    }
    reader.finish()?;
    writer.finish()?;
    write_acceptance(run, &diagnostics)?;

    let target = art.rotations();
    if let Err(e) = diagnostics.check_floor(c.identification.acceptance_floor) {
        let _ = fs::remove_file(&staging);
        let _ = fs::remove_file(&target);
        return Err(e.into());
    }
    fs::rename(&staging, &target).map_err(Error::io(&target))?;
    Ok(IdentifySummary { retained, diagnostics })
}

fn write_acceptance(run: &Run, diagnostics: &IdentifyDiagnostics) -> Result<()> {
    let header = ["country", "attempted", "accepted", "acceptance_rate", "rotations_tried"].map(String::from);
    let mut t = Table::create(&run.artifacts().acceptance(), &run.preamble(), &header)?;
    let mut total = CountryAcceptance::default();
    for (code, a) in run.config.data.countries.iter().zip(&diagnostics.per_country) {
        t.row(vec![
            code.clone(),
            a.attempted.to_string(),
            a.accepted.to_string(),
            num(a.rate()),
            a.rotations_tried.to_string(),
        ])?;
        total.attempted += a.attempted;
        total.accepted += a.accepted;
        total.rotations_tried += a.rotations_tried;
    }
    t.row(vec![
        "all".into(),
        total.attempted.to_string(),
        total.accepted.to_string(),
        num(total.rate()),
        total.rotations_tried.to_string(),
    ])?;
    t.finish()
}
