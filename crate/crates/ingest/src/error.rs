use std::path::PathBuf;

use panelvar::Month;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fetching {code}: {reason}")]
    Fetch { code: String, reason: String },

    #[error("network access disabled, {code} is not cached")]
    Offline { code: String },

    #[error("{source_name}:{line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("{series} has no observations for {}", format_months(.months))]
    MissingData { series: String, months: Vec<Month> },

    #[error("{series} is not strictly positive at {month} ({value})")]
    NonPositive { series: String, month: Month, value: f64 },

    #[error("{country}: missing variable '{variable}'")]
    MissingVariable { country: String, variable: String },

    #[error("{0}: no months common to all series within the sample window")]
    EmptySample(String),

    #[error("checksum mismatch for {}: expected {expected}, found {actual}", .path.display())]
    Integrity {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Model(#[from] panelvar::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_months(months: &[Month]) -> String {
    const SHOWN: usize = 12;
    let mut out: Vec<String> = months.iter().take(SHOWN).map(Month::to_string).collect();
    if months.len() > SHOWN {
        out.push(format!("and {} more", months.len() - SHOWN));
    }
    out.join(", ")
}
