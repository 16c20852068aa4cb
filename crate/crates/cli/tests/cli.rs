mod common;

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use common::*;
use panelvar::checkpoint::{read_rotations, DrawReader};
use panelvar::{run_gibbs, ChainConfig, Deterministic, ModelSpec};
use panelvar_cli::config::Overrides;
use panelvar_cli::error::{EXIT_CONFIG, EXIT_DATA, EXIT_INFEASIBLE};
use panelvar_cli::{stages, Run};
use panelvar_ingest::catalog::Variant;
use panelvar_ingest::fetch::{Transport, TransportError};
use panelvar_ingest::read_panel_dir;
use rand::Rng;

fn parse(v: &str) -> f64 {
    v.parse().unwrap_or_else(|_| panic!("not a number: {v}"))
}

#[test]
fn full_pipeline_writes_consistent_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = panel_project(dir.path(), 1, 180, SMALL_MODEL, "");
    ok(&panelvar(&config, &["all"]));
    let out = dir.path().join("out");

    for name in [
        "irf.csv",
        "fevd.csv",
        "hd.csv",
        "counterfactual.csv",
        "acceptance.csv",
        "panel/ES.csv",
        "plotdata/irf_sovereign_risk.csv",
        "plotdata/lambda1_trace.csv",
    ] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with("# panelvar "), "{name}");
        assert!(text.lines().nth(1).unwrap().starts_with("# config sha256 "), "{name}");
    }
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["retained"], 400);
    assert_eq!(diag["meta"]["config_sha256"].as_str().unwrap().len(), 64);

    for name in ["irf.csv", "fevd.csv", "hd.csv", "counterfactual.csv"] {
        let (h, rows) = read_table(&out.join(name));
        assert!(!rows.is_empty(), "{name}");
        let (lo, mid, hi) = (column(&h, "q16"), column(&h, "q50"), column(&h, "q84"));
        for r in &rows {
            let (a, b, c) = (parse(&r[lo]), parse(&r[mid]), parse(&r[hi]));
            assert!(a <= b && b <= c, "{name}: {r:?}");
        }
    }

    let (h, rows) = read_table(&out.join("irf.csv"));
    let shocks: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[column(&h, "shock")].as_str()).collect();
    assert!(shocks.contains("sovereign_risk") && shocks.contains("unidentified_4"));
    // normalized sovereign shock: median spread impact equals the target
    let spread0 = rows
        .iter()
        .find(|r| r[0] == "ES" && r[1] == "sovereign_risk" && r[2] == "spread" && r[3] == "0")
        .unwrap();
    assert!((parse(&spread0[column(&h, "q50")]) - 0.1).abs() < 1e-12);

    let (h, rows) = read_table(&out.join("fevd.csv"));
    let mut sums: BTreeMap<(String, String, String), (f64, f64)> = BTreeMap::new();
    for r in &rows {
        let e = sums.entry((r[0].clone(), r[2].clone(), r[3].clone())).or_default();
        e.0 += parse(&r[column(&h, "mean")]);
        e.1 += parse(&r[column(&h, "median_irf")]);
    }
    assert_eq!(sums.len(), 2 * 7 * 3);
    for (k, (mean, median)) in sums {
        assert!((mean - 1.0).abs() < 1e-8 && (median - 1.0).abs() < 1e-8, "{k:?}");
    }

    let (h, rows) = read_table(&out.join("hd.csv"));
    let add = column(&h, "additivity");
    assert!(rows.iter().all(|r| parse(&r[add]) < 1e-6));
    assert!(rows.iter().any(|r| r[1] == "baseline"));
}

#[test]
fn checkpoint_matches_in_memory_sampler_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = panel_project(dir.path(), 2, 150, SMALL_MODEL, "");
    ok(&panelvar(&config, &["fetch"]));
    ok(&panelvar(&config, &["estimate"]));
    let out = dir.path().join("out");
    let posterior = fs::read(out.join("posterior.bin")).unwrap();
    let diagnostics = fs::read(out.join("diagnostics.json")).unwrap();

    let panel = read_panel_dir(
        &out.join("panel"),
        &["ES".into(), "IT".into()],
        &Variant::Baseline.variables(),
        Deterministic::Intercept,
    )
    .unwrap();
    let spec = ModelSpec {
        lags: 1,
        n_draws: 300,
        n_burn: 100,
        horizon: 12,
        ..ModelSpec::default()
    };
    let memory = run_gibbs(&panel, &spec, &ChainConfig { seed: 11, n_chains: 2, thinning: 1, workers: 1 }).unwrap();
    let mut reader = DrawReader::new(BufReader::new(fs::File::open(out.join("posterior.bin")).unwrap())).unwrap();
    let stored: Vec<_> = reader.by_ref().collect::<panelvar::Result<_>>().unwrap();
    reader.finish().unwrap();
    assert_eq!(stored, memory.draws);

    ok(&panelvar(&config, &["identify"]));
    let rotations = fs::read(out.join("rotations.bin")).unwrap();
    let (k, records) = read_rotations(&mut rotations.as_slice()).unwrap();
    assert_eq!(k, 7);
    for rec in &records {
        let err = (&rec.q * rec.q.transpose() - nalgebra::DMatrix::<f64>::identity(7, 7)).amax();
        assert!(err < 1e-10);
    }

    ok(&panelvar(&config, &["estimate"]));
    ok(&panelvar(&config, &["identify"]));
    assert_eq!(fs::read(out.join("posterior.bin")).unwrap(), posterior);
    assert_eq!(fs::read(out.join("diagnostics.json")).unwrap(), diagnostics);
    assert_eq!(fs::read(out.join("rotations.bin")).unwrap(), rotations);
}

#[test]
fn configuration_errors_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = panel_project(dir.path(), 3, 120, "lags = 1\nn_draws = 100\nn_burn = 100", "");
    let out = panelvar(&config, &["fetch"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let config = panel_project(dir.path(), 3, 120, "lags = 1\nbogus = 3", "");
    assert_eq!(panelvar(&config, &["fetch"]).status.code(), Some(EXIT_CONFIG));

    let config = panel_project(dir.path(), 3, 120, SMALL_MODEL, "");
    let out = panelvar(&config, &["fetch", "--pooling", "sideways"]);
    assert!(!out.status.success());
}

#[test]
fn stages_require_and_check_their_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = panel_project(dir.path(), 4, 120, SMALL_MODEL, "");
    let out = panelvar(&config, &["identify"]);
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("estimate"));

    ok(&panelvar(&config, &["fetch"]));
    ok(&panelvar(&config, &["estimate"]));
    let out = panelvar(&config, &["identify", "--pooling", "full"]);
    assert_eq!(out.status.code(), Some(EXIT_DATA));

    // an edited panel file no longer matches the manifest
    let file = dir.path().join("out/panel/IT.csv");
    let text = fs::read_to_string(&file).unwrap().replacen(",0.", ",1.", 1);
    fs::write(&file, text).unwrap();
    assert_eq!(panelvar(&config, &["estimate"]).status.code(), Some(EXIT_DATA));
}

const CONTRADICTORY: &str = r#"variables = ["output", "prices", "loans", "lending_rate", "home_bias", "spread", "short_rate"]

[[shock]]
name = "impossible"
restrictions = [
    { variable = "output", sign = "+", horizons = [0, 0] },
    { variable = "output", sign = "-", horizons = [1, 4] },
    { variable = "loans", sign = "+", horizons = [0, 0] },
    { variable = "loans", sign = "-", horizons = [1, 4] },
]
"#;

#[test]
fn unattainable_restrictions_exit_with_infeasible_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("impossible.toml"), CONTRADICTORY).unwrap();
    let config = panel_project(
        dir.path(),
        5,
        150,
        SMALL_MODEL,
        "\n[identification]\nrestrictions = \"impossible.toml\"\nmax_tries_per_draw = 5\nacceptance_floor = 0.5\n",
    );
    let out = panelvar(&config, &["all"]);
    assert_eq!(out.status.code(), Some(EXIT_INFEASIBLE), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    assert!(root.join("acceptance.csv").exists());
    assert!(!root.join("rotations.bin").exists());
    assert!(!root.join("rotations.bin.part").exists());
}

fn write_series(path: &Path, start: panelvar::Month, values: &[f64]) {
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    let mut text = String::from("date,value\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{},{v}\n", start.offset(i as i64)));
    }
    fs::write(path, text).unwrap();
}

/// Positive random walks, long enough to cover the default sample window.
fn random_walk(len: usize, level: f64, r: &mut impl Rng) -> Vec<f64> {
    let mut v = level;
    (0..len)
        .map(|_| {
            v *= 1.0 + 0.01 * r.sample::<f64, _>(rand_distr::StandardNormal);
            v
        })
        .collect()
}

fn shared_series(root: &Path, len: usize) {
    let mut r = rng(21);
    for series in ["swap_rate", "shadow_rate"] {
        write_series(&root.join("shared").join(format!("{series}.csv")), start(), &random_walk(len, 3.0, &mut r));
    }
}

fn raw_project(root: &Path, provider: &str, extra: &str) -> std::path::PathBuf {
    let config = format!(
        r#"seed = 3
[data]
provider = "{provider}"
raw_dir = "raw"
shared_dir = "shared"
cache_dir = "cache"
countries = ["ES", "IT"]
{extra}
[model]
{SMALL_MODEL}
[output]
dir = "out"
hd_draws = 10
fevd_horizons = [1, 6, 12]
"#
    );
    let path = root.join("run.toml");
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn local_files_feed_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let len = 192;
    let mut r = rng(22);
    for code in ["ES", "IT"] {
        for series in Variant::Baseline.country_series() {
            let path = dir.path().join("raw").join(code).join(format!("{series}.csv"));
            write_series(&path, start(), &random_walk(len, 50.0, &mut r));
        }
    }
    shared_series(dir.path(), len);
    let config = raw_project(dir.path(), "local", "offline = true");
    ok(&panelvar(&config, &["fetch"]));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/panel/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["countries"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["countries"][0]["rows"], 192);
    assert_eq!(manifest["sources"].as_array().unwrap().len(), 2 * 7 + 2);
    let first = fs::read(dir.path().join("out/panel/manifest.json")).unwrap();
    ok(&panelvar(&config, &["fetch"]));
    assert_eq!(fs::read(dir.path().join("out/panel/manifest.json")).unwrap(), first);
}

/// Serves SDMX-CSV with a random walk for any series.
struct Synthetic;

impl Transport for Synthetic {
    fn get(&self, url: &str) -> std::result::Result<String, TransportError> {
        let seed = url.bytes().fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
        let mut r = rng(seed);
        let mut body = String::from("KEY,TIME_PERIOD,OBS_VALUE\n");
        for (i, v) in random_walk(216, 40.0, &mut r).iter().enumerate() {
            body.push_str(&format!("K,{},{v}\n", start().offset(i as i64 - 12)));
        }
        Ok(body)
    }
}

#[test]
fn remote_series_are_cached_and_verified() {
    let dir = tempfile::tempdir().unwrap();
    shared_series(dir.path(), 192);
    let config = raw_project(dir.path(), "remote", "");
    let run = Run::load(&config, &Overrides::default()).unwrap();
    let first = stages::fetch(&run, &Synthetic).unwrap();
    assert_eq!(first.cache_hits, 0);
    assert_eq!(first.rows, vec![192, 192]);
    let panel = fs::read(dir.path().join("out/panel/ES.csv")).unwrap();

    // warm cache: the binary runs without any network access
    fs::write(&config, fs::read_to_string(&config).unwrap().replace("[model]", "offline = true\n[model]")).unwrap();
    let out = panelvar(&config, &["fetch"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("14 cached series"));
    assert_eq!(fs::read(dir.path().join("out/panel/ES.csv")).unwrap(), panel);

    let cached = fs::read_dir(dir.path().join("cache"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    let mut body = fs::read_to_string(&cached).unwrap();
    body.push_str("K,2030-01,1\n");
    fs::write(&cached, body).unwrap();
    let out = panelvar(&config, &["fetch"]);
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum mismatch"));
}

#[test]
fn shipped_configuration_describes_the_full_study() {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../config/baseline.toml")).unwrap();
    let c = panelvar_cli::RunConfig::parse(&text).unwrap();
    assert_eq!(c.data.countries, ["ES", "IE", "IT", "PT"]);
    assert_eq!((c.model.lags, c.model.n_draws, c.model.n_burn), (4, 110_000, 10_000));
    assert_eq!(c.model.pooling, panelvar::Pooling::Partial);
    c.model.validate().unwrap();
}
