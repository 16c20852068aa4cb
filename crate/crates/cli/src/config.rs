//! Run configuration: a TOML file with top-level run settings and `[data]`,
//! `[model]`, `[identification]` and `[output]` sections.

use std::fs;
use std::path::{Path, PathBuf};

use panelvar::identify::RestrictionSet;
use panelvar::{ModelSpec, Month, Pooling};
use panelvar_ingest::catalog::{Variant, COUNTRIES};
use panelvar_ingest::fetch::sha256_hex;
use panelvar_ingest::sample_window;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the raw data come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataProvider {
    /// ECB and Eurostat SDMX endpoints, through the series cache.
    #[default]
    Remote,
    /// `<raw_dir>/<COUNTRY>/<series>.csv` files.
    Local,
    /// Already assembled `<panel_dir>/<COUNTRY>.csv` files.
    Panel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub provider: DataProvider,
    pub variant: Variant,
    pub countries: Vec<String>,
    pub raw_dir: Option<PathBuf>,
    /// Holds `swap_rate.csv` and `shadow_rate.csv`.
    pub shared_dir: Option<PathBuf>,
    pub panel_dir: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub start: Month,
    pub end: Month,
    /// Fill interior gaps linearly instead of failing.
    pub interpolate: bool,
    /// Never touch the network; only the cache and local files are used.
    pub offline: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        let (start, end) = sample_window();
        DataConfig {
            provider: DataProvider::Remote,
            variant: Variant::Baseline,
            countries: COUNTRIES.iter().map(|c| c.to_string()).collect(),
            raw_dir: None,
            shared_dir: None,
            panel_dir: None,
            cache_dir: PathBuf::from("cache"),
            start,
            end,
            interpolate: false,
            offline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentificationConfig {
    /// Restriction file; `{variant}` is replaced by the variant name. The
    /// built-in set for the variant is used when absent.
    pub restrictions: Option<String>,
    pub max_tries_per_draw: usize,
    pub acceptance_floor: f64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        IdentificationConfig {
            restrictions: None,
            max_tries_per_draw: 1000,
            acceptance_floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// `{variant}` is replaced by the variant name.
    pub dir: PathBuf,
    /// Forecast horizons in months; 1 is impact only.
    pub fevd_horizons: Vec<usize>,
    /// Evenly spaced retained draws per country used for historical
    /// decompositions; 0 uses every draw.
    pub hd_draws: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("output"),
            fevd_horizons: vec![1, 6, 12, 24],
            hd_draws: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub chains: usize,
    pub thinning: usize,
    /// Worker threads. Results do not depend on it.
    pub workers: usize,
    pub data: DataConfig,
    pub model: ModelSpec,
    pub identification: IdentificationConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            chains: 1,
            thinning: 1,
            workers: 1,
            data: DataConfig::default(),
            model: ModelSpec::default(),
            identification: IdentificationConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub variant: Option<Variant>,
    pub pooling: Option<Pooling>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(v) = o.variant {
            self.data.variant = v;
        }
        if let Some(p) = o.pooling {
            self.model.pooling = p;
        }
    }

    /// Digest of everything that can change results. The worker count,
    /// network switch and output location are excluded, so runs that must
    /// agree byte for byte carry the same digest.
    pub fn checksum(&self) -> String {
        let mut c = self.clone();
        c.workers = 0;
        c.data.offline = false;
        c.output.dir = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Baseline => "baseline",
        Variant::Unemployment => "unemployment",
    }
}

fn provider_name(p: DataProvider) -> &'static str {
    match p {
        DataProvider::Remote => "remote",
        DataProvider::Local => "local",
        DataProvider::Panel => "panel",
    }
}

/// A validated configuration with paths resolved against the config file's
/// directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: RunConfig,
    pub checksum: String,
    restrictions: RestrictionSet,
}

impl Run {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Run> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = RunConfig::parse(&text)?;
        config.apply(overrides);
        let base = path.parent().unwrap_or(Path::new("."));
        Run::new(config, base)
    }

    pub fn new(mut config: RunConfig, base: &Path) -> Result<Run> {
        let checksum = config.checksum();
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut config.data;
        for p in [&mut d.raw_dir, &mut d.shared_dir, &mut d.panel_dir].into_iter().flatten() {
            resolve(p);
        }
        resolve(&mut d.cache_dir);
        let variant = variant_name(config.data.variant);
        if let Some(dir) = config.output.dir.to_str() {
            config.output.dir = PathBuf::from(dir.replace("{variant}", variant));
        }
        resolve(&mut config.output.dir);
        let restrictions = match &config.identification.restrictions {
            Some(p) => {
                let mut path = PathBuf::from(p.replace("{variant}", variant));
                resolve(&mut path);
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("restriction file {}: {e}", path.display())))?;
                RestrictionSet::from_toml(&text)?
            }
            None => RestrictionSet::baseline(config.data.variant == Variant::Unemployment),
        };
        let run = Run {
            config,
            checksum,
            restrictions,
        };
        run.validate()?;
        Ok(run)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let fail = |m: String| Err(Error::Config(m));
        if c.chains < 1 || c.thinning < 1 || c.workers < 1 {
            return fail("chains, thinning and workers must be at least 1".into());
        }
        c.model.validate()?;
        let d = &c.data;
        if d.countries.is_empty() {
            return fail("no countries configured".into());
        }
        let mut sorted = d.countries.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != d.countries.len() {
            return fail("duplicate country codes".into());
        }
        if d.start > d.end {
            return fail(format!("sample start {} is after end {}", d.start, d.end));
        }
        let need_dir = |name: &str, p: &Option<PathBuf>| match p {
            Some(p) if p.is_dir() => Ok(()),
            Some(p) => fail(format!("data.{name} {} is not a directory", p.display())),
            None => fail(format!("data.{name} is required for the {} provider", provider_name(d.provider))),
        };
        match d.provider {
            DataProvider::Remote => need_dir("shared_dir", &d.shared_dir)?,
            DataProvider::Local => {
                need_dir("raw_dir", &d.raw_dir)?;
                need_dir("shared_dir", &d.shared_dir)?;
            }
            DataProvider::Panel => need_dir("panel_dir", &d.panel_dir)?,
        }
        self.restrictions.check_variables(&d.variant.variables())?;
        if c.identification.max_tries_per_draw < 1 {
            return fail("identification.max_tries_per_draw must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&c.identification.acceptance_floor) {
            return fail("identification.acceptance_floor must lie in [0, 1]".into());
        }
        if self.restrictions.max_horizon() > c.model.horizon {
            return fail(format!(
                "model.horizon {} is shorter than the longest restricted horizon {}",
                c.model.horizon,
                self.restrictions.max_horizon()
            ));
        }
        let o = &c.output;
        if o.fevd_horizons.is_empty() || o.fevd_horizons.iter().any(|&h| h == 0 || h > c.model.horizon + 1) {
            return fail(format!(
                "output.fevd_horizons must lie in 1..={}",
                c.model.horizon + 1
            ));
        }
        fs::create_dir_all(&o.dir)
            .and_then(|_| write_probe(&o.dir))
            .map_err(|e| Error::Config(format!("output dir {} is not writable: {e}", o.dir.display())))?;
        Ok(())
    }

    pub fn restrictions(&self) -> &RestrictionSet {
        &self.restrictions
    }

    pub fn variables(&self) -> Vec<String> {
        self.config.data.variant.variables()
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts {
            root: self.config.output.dir.clone(),
        }
    }

    /// Comment lines that head every output file.
    pub fn preamble(&self) -> Vec<String> {
        vec![
            format!("panelvar {}", env!("CARGO_PKG_VERSION")),
            format!("config sha256 {}", self.checksum),
        ]
    }
}

fn write_probe(dir: &Path) -> std::io::Result<()> {
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)
}

/// File layout of one output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn panel_dir(&self) -> PathBuf {
        self.root.join("panel")
    }

    pub fn manifest(&self) -> PathBuf {
        self.panel_dir().join("manifest.json")
    }

    pub fn posterior(&self) -> PathBuf {
        self.root.join("posterior.bin")
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.root.join("diagnostics.json")
    }

    pub fn rotations(&self) -> PathBuf {
        self.root.join("rotations.bin")
    }

    pub fn acceptance(&self) -> PathBuf {
        self.root.join("acceptance.csv")
    }

    pub fn irf(&self) -> PathBuf {
        self.root.join("irf.csv")
    }

    pub fn fevd(&self) -> PathBuf {
        self.root.join("fevd.csv")
    }

    pub fn hd(&self) -> PathBuf {
        self.root.join("hd.csv")
    }

    pub fn counterfactual(&self) -> PathBuf {
        self.root.join("counterfactual.csv")
    }

    pub fn plotdata(&self) -> PathBuf {
        self.root.join("plotdata")
    }
}
