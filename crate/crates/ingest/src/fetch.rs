//! Retrieval of raw series with an on-disk, checksummed cache.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use panelvar::Month;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::series::{parse_local_csv, parse_sdmx_csv, Series};

const ECB_BASE: &str = "https://data-api.ecb.europa.eu/service/data";
const EUROSTAT_BASE: &str = "https://ec.europa.eu/eurostat/api/dissemination/sdmx/2.1/data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provider {
    EcbSdmx,
    Eurostat,
    LocalCsv,
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provider::EcbSdmx => "ecb-sdmx",
            Provider::Eurostat => "eurostat",
            Provider::LocalCsv => "local-csv",
        })
    }
}

impl FromStr for Provider {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ecb-sdmx" => Ok(Provider::EcbSdmx),
            "eurostat" => Ok(Provider::Eurostat),
            "local-csv" => Ok(Provider::LocalCsv),
            other => Err(Error::Invalid(format!("unknown provider '{other}'"))),
        }
    }
}

/// One monthly series to retrieve.
///
/// `code` is an ECB series key (`BSI.M.ES.…`), a Eurostat `dataset/key`
/// pair, or a path to a `date,value` CSV for the local provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesRequest {
    pub provider: Provider,
    pub code: String,
    pub country: String,
    pub start: Option<Month>,
    pub end: Option<Month>,
}

impl SeriesRequest {
    pub fn new(provider: Provider, code: impl Into<String>, country: impl Into<String>) -> Self {
        SeriesRequest {
            provider,
            code: code.into(),
            country: country.into(),
            start: None,
            end: None,
        }
    }

    pub fn between(mut self, start: Month, end: Month) -> Self {
        self.start = Some(start);
        self.end = Some(end);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.code.trim().is_empty() {
            return Err(Error::Invalid("empty series code".into()));
        }
        let monthly = match self.provider {
            Provider::EcbSdmx => self.code.split('.').nth(1) == Some("M"),
            Provider::Eurostat => self.code.contains('/') && self.code.split('/').nth(1).is_some_and(|k| k.starts_with("M.")),
            Provider::LocalCsv => true,
        };
        if !monthly {
            return Err(Error::Invalid(format!("{} is not a monthly {} series", self.code, self.provider)));
        }
        if let (Some(a), Some(b)) = (self.start, self.end) {
            if a > b {
                return Err(Error::Invalid(format!("{}: start {a} after end {b}", self.code)));
            }
        }
        Ok(())
    }

    /// SDMX-CSV endpoint for the remote providers.
    pub fn url(&self) -> Option<String> {
        let mut query = String::new();
        if let Some(s) = self.start {
            query.push_str(&format!("&startPeriod={s}"));
        }
        if let Some(e) = self.end {
            query.push_str(&format!("&endPeriod={e}"));
        }
        match self.provider {
            Provider::EcbSdmx => {
                let (flow, key) = self.code.split_once('.')?;
                Some(format!("{ECB_BASE}/{flow}/{key}?format=csvdata{query}"))
            }
            Provider::Eurostat => {
                let (dataset, key) = self.code.split_once('/')?;
                Some(format!("{EUROSTAT_BASE}/{dataset}/{key}?format=SDMX-CSV{query}"))
            }
            Provider::LocalCsv => None,
        }
    }

    fn cache_stem(&self) -> String {
        let mut stem: String = format!("{}_{}", self.provider, self.code)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        if let (Some(s), Some(e)) = (self.start, self.end) {
            stem.push_str(&format!("_{s}_{e}"));
        }
        stem
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// The transport does not reach the network.
    Disabled,
    Failed(String),
}

/// Moves bytes over the network; swapped out in tests and offline runs.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> std::result::Result<String, TransportError>;
}

/// Blocking HTTPS client.
#[derive(Debug, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<String, TransportError> {
        ureq::get(url)
            .set("Accept", "text/csv")
            .call()
            .map_err(|e| TransportError::Failed(e.to_string()))?
            .into_string()
            .map_err(|e| TransportError::Failed(e.to_string()))
    }
}

/// Refuses every request: only cached or local data can be used.
#[derive(Debug, Default)]
pub struct NoNetwork;

impl Transport for NoNetwork {
    fn get(&self, _url: &str) -> std::result::Result<String, TransportError> {
        Err(TransportError::Disabled)
    }
}

/// Where a series came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub provider: Provider,
    pub code: String,
    pub country: String,
    pub source: String,
    /// Seconds since the Unix epoch at first download, or the file
    /// modification time for local files.
    pub retrieved: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fetched {
    pub series: Series,
    pub provenance: Provenance,
    pub from_cache: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Raw responses stored verbatim next to a provenance sidecar holding their
/// checksum.
#[derive(Debug, Clone)]
pub struct SeriesCache {
    dir: PathBuf,
}

impl SeriesCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SeriesCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, req: &SeriesRequest) -> (PathBuf, PathBuf) {
        let stem = req.cache_stem();
        (self.dir.join(format!("{stem}.csv")), self.dir.join(format!("{stem}.json")))
    }

    /// Cached body and provenance, verified against the stored checksum.
    pub fn load(&self, req: &SeriesRequest) -> Result<Option<(String, Provenance)>> {
        let (body_path, meta_path) = self.paths(req);
        if !body_path.exists() || !meta_path.exists() {
            return Ok(None);
        }
        let body = fs::read_to_string(&body_path)?;
        let meta: Provenance = serde_json::from_str(&fs::read_to_string(&meta_path)?)
            .map_err(|e| Error::Invalid(format!("{}: {e}", meta_path.display())))?;
        let actual = sha256_hex(body.as_bytes());
        if actual != meta.sha256 {
            return Err(Error::Integrity {
                path: body_path,
                expected: meta.sha256,
                actual,
            });
        }
        Ok(Some((body, meta)))
    }

    pub fn store(&self, req: &SeriesRequest, body: &str, provenance: &Provenance) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let (body_path, meta_path) = self.paths(req);
        fs::write(&body_path, body)?;
        let meta = serde_json::to_string_pretty(provenance).expect("provenance serialises");
        fs::write(meta_path, meta)?;
        Ok(())
    }
}

fn parse(req: &SeriesRequest, body: &str, interpolate: bool) -> Result<Series> {
    let obs = match req.provider {
        Provider::LocalCsv => parse_local_csv(body, &req.code)?,
        Provider::EcbSdmx | Provider::Eurostat => parse_sdmx_csv(body, &req.code)?,
    };
    let series = Series::from_observations(req.code.clone(), &obs, interpolate)?;
    match (req.start, req.end) {
        (Some(s), Some(e)) => series
            .window(s, e)
            .ok_or_else(|| Error::MissingData {
                series: req.code.clone(),
                months: vec![s, e],
            }),
        _ => Ok(series),
    }
}

/// Retrieves one series. Remote series are served from `cache` when present
/// and otherwise downloaded through `transport` and cached; local files are
/// read directly and fingerprinted.
pub fn fetch_series(
    req: &SeriesRequest,
    transport: &dyn Transport,
    cache: &SeriesCache,
    interpolate: bool,
) -> Result<Fetched> {
    req.validate()?;
    if req.provider == Provider::LocalCsv {
        let body = fs::read_to_string(&req.code).map_err(|e| Error::Fetch {
            code: req.code.clone(),
            reason: e.to_string(),
        })?;
        let provenance = Provenance {
            provider: req.provider,
            code: req.code.clone(),
            country: req.country.clone(),
            source: req.code.clone(),
            retrieved: modified(Path::new(&req.code)),
            sha256: sha256_hex(body.as_bytes()),
        };
        return Ok(Fetched {
            series: parse(req, &body, interpolate)?,
            provenance,
            from_cache: false,
        });
    }
    if let Some((body, provenance)) = cache.load(req)? {
        return Ok(Fetched {
            series: parse(req, &body, interpolate)?,
            provenance,
            from_cache: true,
        });
    }
    let url = req.url().ok_or_else(|| Error::Invalid(format!("malformed series code {}", req.code)))?;
    let body = transport.get(&url).map_err(|e| match e {
        TransportError::Disabled => Error::Offline { code: req.code.clone() },
        TransportError::Failed(reason) => Error::Fetch {
            code: req.code.clone(),
            reason,
        },
    })?;
    let series = parse(req, &body, interpolate)?;
    let provenance = Provenance {
        provider: req.provider,
        code: req.code.clone(),
        country: req.country.clone(),
        source: url,
        retrieved: now(),
        sha256: sha256_hex(body.as_bytes()),
    };
    cache.store(req, &body, &provenance)?;
    Ok(Fetched {
        series,
        provenance,
        from_cache: false,
    })
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Modification time of a local file, so rereading an unchanged file yields
/// identical provenance.
fn modified(path: &Path) -> u64 {
    fs::metadata(path)
        .and_then(|m| m.modified())
        .ok()
        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
        .map_or(0, |d| d.as_secs())
}
