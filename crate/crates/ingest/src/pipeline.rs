//! Raw series → transformed variables → panel.

use std::collections::BTreeMap;
use std::path::PathBuf;

use panelvar::{Deterministic, Month, PanelDataset};

use crate::catalog::{remote_code, Variant, SHARED_SERIES};
use crate::error::{Error, Result};
use crate::fetch::{fetch_series, Provenance, Provider, SeriesCache, SeriesRequest, Transport};
use crate::panel::{assemble_panel, CountrySeries};
use crate::series::Series;
use crate::transform::apply_transform;

/// Where country-level raw series come from. The euro-area swap and shadow
/// rates are always local files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    /// ECB and Eurostat SDMX endpoints.
    Remote,
    /// `<dir>/<COUNTRY>/<series>.csv` files in `date,value` form.
    Local(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchPlan {
    pub source: DataSource,
    pub countries: Vec<String>,
    pub variant: Variant,
    pub window: (Month, Month),
    /// `<series>.csv` files for the shared euro-area series.
    pub shared_dir: PathBuf,
    pub interpolate: bool,
    pub deterministic: Deterministic,
}

/// A raw series to retrieve, with the country it belongs to (`None` for the
/// shared euro-area series).
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSeries {
    pub country: Option<String>,
    pub series: &'static str,
    pub request: SeriesRequest,
}

impl FetchPlan {
    pub fn requests(&self) -> Result<Vec<PlannedSeries>> {
        let (from, to) = self.window;
        let mut out = Vec::new();
        for country in &self.countries {
            for series in self.variant.country_series() {
                let request = match &self.source {
                    DataSource::Remote => {
                        let (provider, code) = remote_code(series, country)
                            .ok_or_else(|| Error::Invalid(format!("no remote code for {series}")))?;
                        SeriesRequest::new(provider, code, country.clone()).between(from, to)
                    }
                    DataSource::Local(dir) => SeriesRequest::new(
                        Provider::LocalCsv,
                        dir.join(country).join(format!("{series}.csv")).display().to_string(),
                        country.clone(),
                    ),
                };
                out.push(PlannedSeries {
                    country: Some(country.clone()),
                    series,
                    request,
                });
            }
        }
        for series in SHARED_SERIES {
            out.push(PlannedSeries {
                country: None,
                series,
                request: SeriesRequest::new(
                    Provider::LocalCsv,
                    self.shared_dir.join(format!("{series}.csv")).display().to_string(),
                    "EA",
                ),
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct BuiltPanel {
    pub panel: PanelDataset,
    pub provenance: Vec<Provenance>,
    /// Number of remote series served from the cache.
    pub cache_hits: usize,
}

/// Fetches everything in `plan`, applies the variant's transforms and
/// assembles the panel in model variable order.
pub fn build_panel(plan: &FetchPlan, transport: &dyn Transport, cache: &SeriesCache) -> Result<BuiltPanel> {
    let mut shared: BTreeMap<String, Series> = BTreeMap::new();
    let mut raw: BTreeMap<String, BTreeMap<String, Series>> = BTreeMap::new();
    let mut provenance = Vec::new();
    let mut cache_hits = 0;
    for planned in plan.requests()? {
        let fetched = fetch_series(&planned.request, transport, cache, plan.interpolate)?;
        cache_hits += usize::from(fetched.from_cache);
        provenance.push(fetched.provenance);
        let mut series = fetched.series;
        series.name = planned.series.to_string();
        match planned.country {
            Some(c) => raw.entry(c).or_default().insert(planned.series.to_string(), series),
            None => shared.insert(planned.series.to_string(), series),
        };
    }
    let transforms = plan.variant.transforms();
    let mut countries = Vec::with_capacity(plan.countries.len());
    for code in &plan.countries {
        let mut inputs = shared.clone();
        inputs.extend(raw.remove(code).unwrap_or_default());
        let mut variables = BTreeMap::new();
        for (name, spec) in &transforms {
            let s = apply_transform(spec, &inputs, name).map_err(|e| match e {
                Error::EmptySample(_) => Error::EmptySample(format!("{code} {name}")),
                other => other,
            })?;
            variables.insert(name.clone(), s);
        }
        countries.push(CountrySeries {
            code: code.clone(),
            variables,
        });
    }
    let panel = assemble_panel(&countries, &plan.variant.variables(), plan.window, plan.deterministic)?;
    Ok(BuiltPanel {
        panel,
        provenance,
        cache_hits,
    })
}
