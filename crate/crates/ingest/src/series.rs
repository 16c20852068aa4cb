//! Monthly series and the two text formats they arrive in.

use std::collections::BTreeMap;

use panelvar::Month;

use crate::error::{Error, Result};

/// Observations keyed by month, possibly with holes.
pub type Observations = BTreeMap<Month, f64>;

/// A contiguous monthly series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub start: Month,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, start: Month, values: Vec<f64>) -> Self {
        Series {
            name: name.into(),
            start,
            values,
        }
    }

    /// Builds a contiguous series from keyed observations. Interior holes are
    /// an error unless `interpolate` is set, in which case they are filled
    /// linearly between the neighbouring observations.
    pub fn from_observations(name: impl Into<String>, obs: &Observations, interpolate: bool) -> Result<Self> {
        let name = name.into();
        let (&first, _) = obs
            .first_key_value()
            .ok_or_else(|| Error::Invalid(format!("{name} has no observations")))?;
        let (&last, _) = obs.last_key_value().expect("non-empty");
        let len = (last.index() - first.index() + 1) as usize;
        let mut values = Vec::with_capacity(len);
        let mut missing = Vec::new();
        for i in 0..len {
            let m = first.offset(i as i64);
            match obs.get(&m) {
                Some(v) => values.push(*v),
                None => {
                    missing.push(m);
                    values.push(f64::NAN);
                }
            }
        }
        if !missing.is_empty() {
            if !interpolate {
                return Err(Error::MissingData { series: name, months: missing });
            }
            fill_linear(&mut values);
        }
        Ok(Series::new(name, first, values))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> Month {
        self.start.offset(self.values.len() as i64 - 1)
    }

    pub fn get(&self, month: Month) -> Option<f64> {
        let i = month.index() - self.start.index();
        usize::try_from(i).ok().and_then(|i| self.values.get(i).copied())
    }

    pub fn months(&self) -> impl Iterator<Item = Month> + '_ {
        (0..self.values.len()).map(|i| self.start.offset(i as i64))
    }

    /// The part of the series within `[from, to]`, or `None` if they do not
    /// overlap.
    pub fn window(&self, from: Month, to: Month) -> Option<Series> {
        let lo = from.max(self.start);
        let hi = to.min(self.end());
        if lo > hi {
            return None;
        }
        let off = (lo.index() - self.start.index()) as usize;
        let len = (hi.index() - lo.index() + 1) as usize;
        Some(Series::new(self.name.clone(), lo, self.values[off..off + len].to_vec()))
    }
}

fn fill_linear(values: &mut [f64]) {
    let mut i = 0;
    while i < values.len() {
        if values[i].is_nan() {
            let left = i - 1;
            let mut right = i;
            while values[right].is_nan() {
                right += 1;
            }
            let (a, b) = (values[left], values[right]);
            let span = (right - left) as f64;
            for (k, v) in values.iter_mut().enumerate().take(right).skip(i) {
                *v = a + (b - a) * (k - left) as f64 / span;
            }
            i = right;
        }
        i += 1;
    }
}

fn parse_value(text: &str, source: &str, line: usize) -> Result<Option<f64>> {
    let t = text.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") || t == "NA" {
        return Ok(None);
    }
    let v: f64 = t.parse().map_err(|_| Error::Parse {
        source_name: source.to_string(),
        line,
        reason: format!("'{t}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            source_name: source.to_string(),
            line,
            reason: format!("non-finite value '{t}'"),
        });
    }
    Ok(Some(v))
}

fn parse_month(text: &str, source: &str, line: usize) -> Result<Month> {
    text.trim().parse().map_err(|_| Error::Parse {
        source_name: source.to_string(),
        line,
        reason: format!("'{}' is not a monthly date", text.trim()),
    })
}

fn insert(obs: &mut Observations, month: Month, value: f64, source: &str, line: usize) -> Result<()> {
    if obs.insert(month, value).is_some() {
        return Err(Error::Parse {
            source_name: source.to_string(),
            line,
            reason: format!("duplicate observation for {month}"),
        });
    }
    Ok(())
}

/// Reads the header-led table in `text`, returning the header and records
/// along with their 1-based line numbers.
fn records(text: &str, source: &str) -> Result<(csv::StringRecord, Vec<(usize, csv::StringRecord)>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let bad = |line: usize, e: csv::Error| Error::Parse {
        source_name: source.to_string(),
        line,
        reason: e.to_string(),
    };
    let header = reader.headers().map_err(|e| bad(1, e))?.clone();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(0, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok((header, out))
}

/// Parses a two-column `date,value` CSV with `YYYY-MM` dates.
pub fn parse_local_csv(text: &str, source: &str) -> Result<Observations> {
    let (header, rows) = records(text, source)?;
    if header.len() != 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::Parse {
            source_name: source.to_string(),
            line: 1,
            reason: format!("expected header 'date,value', found '{}'", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut obs = Observations::new();
    for (line, rec) in rows {
        if rec.len() != 2 {
            return Err(Error::Parse {
                source_name: source.to_string(),
                line,
                reason: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let month = parse_month(&rec[0], source, line)?;
        if let Some(v) = parse_value(&rec[1], source, line)? {
            insert(&mut obs, month, v, source, line)?;
        }
    }
    Ok(obs)
}

/// Parses SDMX-CSV as served by the ECB and Eurostat: any number of
/// dimension columns plus `TIME_PERIOD` and `OBS_VALUE`. Empty observation
/// values are treated as missing.
pub fn parse_sdmx_csv(text: &str, source: &str) -> Result<Observations> {
    let (header, rows) = records(text, source)?;
    let column = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            source_name: source.to_string(),
            line: 1,
            reason: format!("no {name} column"),
        })
    };
    let time = column("TIME_PERIOD")?;
    let value = column("OBS_VALUE")?;
    let mut obs = Observations::new();
    for (line, rec) in rows {
        let (Some(t), Some(v)) = (rec.get(time), rec.get(value)) else {
            return Err(Error::Parse {
                source_name: source.to_string(),
                line,
                reason: "short record".into(),
            });
        };
        let month = parse_month(t, source, line)?;
        if let Some(v) = parse_value(v, source, line)? {
            insert(&mut obs, month, v, source, line)?;
        }
    }
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(y: i32, mo: u32) -> Month {
        Month::new(y, mo).unwrap()
    }

    #[test]
    fn gaps_are_reported_or_filled() {
        let obs: Observations = [(m(2010, 1), 1.0), (m(2010, 2), 2.0), (m(2010, 5), 8.0)].into_iter().collect();
        match Series::from_observations("x", &obs, false) {
            Err(Error::MissingData { months, .. }) => assert_eq!(months, vec![m(2010, 3), m(2010, 4)]),
            other => panic!("{other:?}"),
        }
        let s = Series::from_observations("x", &obs, true).unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(s.end(), m(2010, 5));
    }

    #[test]
    fn window_clips_both_ends() {
        let s = Series::new("x", m(2002, 11), (0..10).map(f64::from).collect());
        let w = s.window(m(2003, 1), m(2003, 3)).unwrap();
        assert_eq!((w.start, w.values.clone()), (m(2003, 1), vec![2.0, 3.0, 4.0]));
        assert!(s.window(m(2010, 1), m(2011, 1)).is_none());
        assert_eq!(s.get(m(2003, 8)), Some(9.0));
        assert_eq!(s.get(m(2002, 1)), None);
    }

    #[test]
    fn local_csv_rejects_bad_rows() {
        assert!(parse_local_csv("date,value\n2010-01,abc\n", "t").is_err());
        assert!(parse_local_csv("date,value\n2010-01,1\n2010-01,2\n", "t").is_err());
        assert!(parse_local_csv("when,value\n2010-01,1\n", "t").is_err());
        let obs = parse_local_csv("# note\ndate,value\n2010-01,1.5\n2010-02,\n", "t").unwrap();
        assert_eq!(obs.len(), 1);
    }
}
