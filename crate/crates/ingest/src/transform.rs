//! Transforms from raw source series to model variables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

/// How a model variable is built from raw series, referenced by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    /// `100·ln(x)`.
    Log100 { input: String },
    /// `a − b`, for yields already in percent.
    Spread { minuend: String, subtrahend: String },
    /// `100·a/b`.
    Ratio100 { numerator: String, denominator: String },
    Passthrough { input: String },
}

impl TransformSpec {
    pub fn inputs(&self) -> Vec<&str> {
        match self {
            TransformSpec::Log100 { input } | TransformSpec::Passthrough { input } => vec![input],
            TransformSpec::Spread { minuend, subtrahend } => vec![minuend, subtrahend],
            TransformSpec::Ratio100 { numerator, denominator } => vec![numerator, denominator],
        }
    }
}

fn lookup<'a>(inputs: &'a BTreeMap<String, Series>, name: &str) -> Result<&'a Series> {
    inputs
        .get(name)
        .ok_or_else(|| Error::Invalid(format!("transform input '{name}' is not available")))
}

fn require_positive(series: &Series) -> Result<()> {
    for (m, &v) in series.months().zip(&series.values) {
        if !(v > 0.0) {
            return Err(Error::NonPositive {
                series: series.name.clone(),
                month: m,
                value: v,
            });
        }
    }
    Ok(())
}

/// Applies `spec` to the named `inputs`, over the months common to all of
/// them. The result is named `output`.
pub fn apply_transform(spec: &TransformSpec, inputs: &BTreeMap<String, Series>, output: &str) -> Result<Series> {
    let series: Vec<&Series> = spec.inputs().iter().map(|n| lookup(inputs, n)).collect::<Result<_>>()?;
    let from = series.iter().map(|s| s.start).max().expect("at least one input");
    let to = series.iter().map(|s| s.end()).min().expect("at least one input");
    let aligned: Vec<Series> = series
        .iter()
        .map(|s| s.window(from, to))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::EmptySample(format!("inputs of {output}")))?;
    let values = match spec {
        TransformSpec::Log100 { .. } => {
            require_positive(&aligned[0])?;
            aligned[0].values.iter().map(|v| 100.0 * v.ln()).collect()
        }
        TransformSpec::Passthrough { .. } => aligned[0].values.clone(),
        TransformSpec::Spread { .. } => aligned[0].values.iter().zip(&aligned[1].values).map(|(a, b)| a - b).collect(),
        TransformSpec::Ratio100 { .. } => {
            require_positive(&aligned[1])?;
            aligned[0].values.iter().zip(&aligned[1].values).map(|(a, b)| 100.0 * a / b).collect()
        }
    };
    Ok(Series::new(output, from, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use panelvar::Month;

    fn inputs(pairs: &[(&str, f64)]) -> BTreeMap<String, Series> {
        pairs
            .iter()
            .map(|(n, v)| (n.to_string(), Series::new(*n, Month::new(2010, 1).unwrap(), vec![*v])))
            .collect()
    }

    #[test]
    fn worked_values() {
        let log = TransformSpec::Log100 { input: "x".into() };
        let out = apply_transform(&log, &inputs(&[("x", std::f64::consts::E)]), "y").unwrap();
        assert!((out.values[0] - 100.0).abs() < 1e-12);

        let spread = TransformSpec::Spread {
            minuend: "a".into(),
            subtrahend: "b".into(),
        };
        let out = apply_transform(&spread, &inputs(&[("a", 3.5), ("b", 1.5)]), "s").unwrap();
        assert_eq!(out.values, vec![2.0]);

        let ratio = TransformSpec::Ratio100 {
            numerator: "a".into(),
            denominator: "b".into(),
        };
        let out = apply_transform(&ratio, &inputs(&[("a", 50.0), ("b", 200.0)]), "r").unwrap();
        assert_eq!(out.values, vec![25.0]);
    }

    #[test]
    fn logs_and_ratios_need_positive_inputs() {
        let log = TransformSpec::Log100 { input: "x".into() };
        assert!(matches!(
            apply_transform(&log, &inputs(&[("x", 0.0)]), "y"),
            Err(Error::NonPositive { .. })
        ));
        let ratio = TransformSpec::Ratio100 {
            numerator: "a".into(),
            denominator: "b".into(),
        };
        assert!(apply_transform(&ratio, &inputs(&[("a", 1.0), ("b", -2.0)]), "r").is_err());
        assert!(apply_transform(&log, &inputs(&[("z", 1.0)]), "y").is_err());
    }

    #[test]
    fn inputs_are_aligned_on_common_months() {
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), Series::new("a", Month::new(2010, 1).unwrap(), vec![1.0, 2.0, 3.0]));
        map.insert("b".to_string(), Series::new("b", Month::new(2010, 2).unwrap(), vec![1.0, 1.0, 1.0]));
        let spread = TransformSpec::Spread {
            minuend: "a".into(),
            subtrahend: "b".into(),
        };
        let out = apply_transform(&spread, &map, "s").unwrap();
        assert_eq!(out.start, Month::new(2010, 2).unwrap());
        assert_eq!(out.values, vec![1.0, 2.0]);
    }
}
