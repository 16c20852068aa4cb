//! Alignment of per-country variables into a [`PanelDataset`] and the panel
//! CSV cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use panelvar::{CountryData, Deterministic, Month, PanelDataset};

use crate::error::{Error, Result};
use crate::series::Series;

/// First and last month of the estimation sample.
pub fn sample_window() -> (Month, Month) {
    (Month::new(2003, 1).expect("valid"), Month::new(2018, 12).expect("valid"))
}

/// Transformed variables of one country, keyed by variable name.
#[derive(Debug, Clone, PartialEq)]
pub struct CountrySeries {
    pub code: String,
    pub variables: BTreeMap<String, Series>,
}

/// Aligns every country on the months where all of its variables are
/// observed, clipped to `window`. Countries may start and end at different
/// months.
pub fn assemble_panel(
    countries: &[CountrySeries],
    variables: &[String],
    window: (Month, Month),
    deterministic: Deterministic,
) -> Result<PanelDataset> {
    let mut out = Vec::with_capacity(countries.len());
    for c in countries {
        let series: Vec<&Series> = variables
            .iter()
            .map(|v| {
                c.variables.get(v).ok_or_else(|| Error::MissingVariable {
                    country: c.code.clone(),
                    variable: v.clone(),
                })
            })
            .collect::<Result<_>>()?;
        let from = series.iter().map(|s| s.start).max().unwrap_or(window.0).max(window.0);
        let to = series.iter().map(|s| s.end()).min().unwrap_or(window.1).min(window.1);
        if from > to {
            return Err(Error::EmptySample(c.code.clone()));
        }
        let t = (to.index() - from.index() + 1) as usize;
        let mut y = DMatrix::zeros(t, variables.len());
        for (j, s) in series.iter().enumerate() {
            let w = s.window(from, to).expect("window inside the series range");
            for (i, v) in w.values.iter().enumerate() {
                y[(i, j)] = *v;
            }
        }
        out.push(CountryData::new(c.code.clone(), from, y, deterministic));
    }
    Ok(PanelDataset::new(variables.to_vec(), out)?)
}

/// Writes one country as `date,<variables…>` rows after `preamble`, each line
/// of which becomes a `#` comment. Values use the shortest representation
/// that round-trips, so re-reading is exact.
pub fn write_panel_csv(path: &Path, variables: &[String], country: &CountryData, preamble: &[String]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    for line in preamble {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["date".to_string()];
    header.extend(variables.iter().cloned());
    w.write_record(&header).map_err(csv_io)?;
    for t in 0..country.y.nrows() {
        let mut row = vec![country.start.offset(t as i64).to_string()];
        row.extend(country.y.row(t).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads a panel CSV written by [`write_panel_csv`]. Dates must be
/// consecutive months.
pub fn read_panel_csv(path: &Path, code: &str, deterministic: Deterministic) -> Result<(Vec<String>, CountryData)> {
    let source = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let parse_err = |line: usize, reason: String| Error::Parse {
        source_name: source.clone(),
        line,
        reason,
    };
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.get(0) != Some("date") || header.len() < 2 {
        return Err(parse_err(1, "expected 'date' followed by variable columns".into()));
    }
    let variables: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = variables.len();
    let mut start = None;
    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut expected: Option<Month> = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != n + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", n + 1, rec.len())));
        }
        let month: Month = rec[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad date '{}'", &rec[0])))?;
        if let Some(e) = expected {
            if month <= e.offset(-1) {
                return Err(parse_err(line, format!("dates out of order at {month}")));
            }
            let mut m = e;
            while m < month {
                missing.push(m);
                m = m.offset(1);
            }
        }
        start.get_or_insert(month);
        expected = Some(month.offset(1));
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("'{field}' is not a number")))?;
            values.push(v);
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData {
            series: source,
            months: missing,
        });
    }
    let start = start.ok_or_else(|| parse_err(2, "no observations".into()))?;
    let t = values.len() / n;
    let y = DMatrix::from_row_slice(t, n, &values);
    Ok((variables, CountryData::new(code, start, y, deterministic)))
}

/// Writes `<dir>/<country>.csv` for every country.
pub fn write_panel_dir(dir: &Path, panel: &PanelDataset, preamble: &[String]) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir)?;
    panel
        .countries
        .iter()
        .map(|c| {
            let path = dir.join(format!("{}.csv", c.code));
            write_panel_csv(&path, &panel.variable_names, c, preamble)?;
            Ok(path)
        })
        .collect()
}

/// Reads `<dir>/<country>.csv` for each code, requiring the columns to match
/// `variables` exactly and in order.
pub fn read_panel_dir(
    dir: &Path,
    countries: &[String],
    variables: &[String],
    deterministic: Deterministic,
) -> Result<PanelDataset> {
    let mut out = Vec::with_capacity(countries.len());
    for code in countries {
        let (vars, data) = read_panel_csv(&dir.join(format!("{code}.csv")), code, deterministic)?;
        if vars != variables {
            return Err(Error::Invalid(format!(
                "{code}: panel columns {vars:?} do not match the expected variable order {variables:?}"
            )));
        }
        out.push(data);
    }
    Ok(PanelDataset::new(variables.to_vec(), out)?)
}
