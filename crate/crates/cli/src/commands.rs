//! The six subcommands. Each returns the paths it wrote.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shrinkport_core::backtest::{
    run_grid, select_and_compare, DatasetMetrics, GridSpec, SelectionReport,
};
use shrinkport_core::cov_shrinkage::{applicable_kinds, CovKind};
use shrinkport_core::dea::Group;
use shrinkport_core::market_data::{
    compute_returns, load_prices, plan_windows, read_returns, write_prices, write_returns,
    IngestConfig, ReturnsMatrix,
};
use shrinkport_core::mean_shrinkage::MeanKind;
use shrinkport_core::report::{self, Provenance};
use shrinkport_core::synth::generate_prices;
use shrinkport_core::Error;

use crate::config::{hash_json, DatasetSpec, RunConfig};
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const METRICS_FULL: &str = "metrics_full.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingInfo {
    pub outsample_len: usize,
    /// `None` when the series is too short for a single window.
    pub windows: Option<usize>,
    pub concentration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub source: String,
    pub returns_file: String,
    pub returns_sha256: String,
    pub n_assets: usize,
    pub n_days: usize,
    pub n_returns: usize,
    /// p / insample_len ≥ 1: LIS, GIS and AS are dropped from the grid.
    pub high_dimensional: bool,
    pub settings: Vec<SettingInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub insample_len: usize,
    pub datasets: Vec<ManifestEntry>,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<PathBuf, CliError> {
    let file = std::fs::File::create(path).map_err(io(path))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(io(path))?;
    Ok(path.to_path_buf())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Expands directories into their `*.csv` files and checks every path exists.
fn resolve_datasets(specs: &[DatasetSpec]) -> Result<Vec<DatasetSpec>, CliError> {
    if specs.is_empty() {
        return Err(CliError::Invalid(
            "no datasets configured: pass --dataset NAME=PATH or add [[datasets]] to the config"
                .into(),
        ));
    }
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for spec in specs {
        if spec.path.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(&spec.path)
                .map_err(io(&spec.path))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                .collect();
            files.sort();
            if files.is_empty() {
                missing.push(format!("{}/*.csv", spec.path.display()));
            }
            for path in files {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                out.push(DatasetSpec { name, path });
            }
        } else if spec.path.is_file() {
            out.push(spec.clone());
        } else {
            missing.push(spec.path.display().to_string());
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Invalid(format!(
            "missing input files: {}",
            missing.join(", ")
        )));
    }
    let mut seen = BTreeSet::new();
    for d in &out {
        if !valid_name(&d.name) {
            return Err(CliError::Invalid(format!(
                "dataset name '{}' may only contain letters, digits, '_', '-' and '.'",
                d.name
            )));
        }
        if !seen.insert(d.name.clone()) {
            return Err(CliError::Invalid(format!(
                "duplicate dataset name '{}'",
                d.name
            )));
        }
    }
    Ok(out)
}

fn settings_info(cfg: &RunConfig, n_returns: usize, p: usize) -> Vec<SettingInfo> {
    cfg.outsample
        .iter()
        .map(|&o| SettingInfo {
            outsample_len: o,
            windows: plan_windows(n_returns, cfg.insample_len, o)
                .ok()
                .map(|plan| plan.count()),
            concentration: p as f64 / cfg.insample_len as f64,
        })
        .collect()
}

/// Validates price files, writes `returns_<name>.csv` plus the manifest.
pub fn ingest(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let specs = resolve_datasets(&cfg.datasets)?;
    std::fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
    let ingest_cfg = IngestConfig {
        drop_incomplete_rows: cfg.drop_incomplete_rows,
    };
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for spec in specs {
        let prices = load_prices(&spec.path, ingest_cfg)?;
        let returns = compute_returns(&prices)?;
        let mut bytes = Vec::new();
        write_returns(&returns, &mut bytes)?;
        let file = format!("returns_{}.csv", spec.name);
        let path = cfg.out.join(&file);
        std::fs::write(&path, &bytes).map_err(io(&path))?;
        written.push(path);
        let (n, p) = (returns.n_obs(), returns.n_assets());
        let settings = settings_info(cfg, n, p);
        for s in settings.iter().filter(|s| s.windows.is_none()) {
            warn!(
                "{}: {n} returns cannot fit insample {} + outsample {}",
                spec.name, cfg.insample_len, s.outsample_len
            );
        }
        entries.push(ManifestEntry {
            name: spec.name.clone(),
            source: spec.path.display().to_string(),
            returns_file: file,
            returns_sha256: sha256_hex(&bytes),
            n_assets: p,
            n_days: prices.dates.len(),
            n_returns: n,
            high_dimensional: p as f64 / cfg.insample_len as f64 >= 1.0,
            settings,
        });
    }
    let manifest = Manifest {
        insample_len: cfg.insample_len,
        datasets: entries,
    };
    let path = cfg.out.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(&path, json + "\n").map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

/// Writes a synthetic price CSV; returns its path and SHA-256.
pub fn synth(cfg: &RunConfig, name: &str) -> Result<(PathBuf, String), CliError> {
    if !valid_name(name) {
        return Err(CliError::Invalid(format!("invalid dataset name '{name}'")));
    }
    let prices = generate_prices(&cfg.synth)?;
    let mut bytes = Vec::new();
    write_prices(&prices, &mut bytes)?;
    std::fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
    let path = cfg.out.join(format!("{name}.csv"));
    std::fs::write(&path, &bytes).map_err(io(&path))?;
    Ok((path, sha256_hex(&bytes)))
}

pub fn read_manifest(out: &Path) -> Result<Manifest, CliError> {
    let path = out.join(MANIFEST);
    if !path.is_file() {
        return Err(CliError::Invalid(format!(
            "no ingested data in {}: run `shrinkport ingest` first or pass --dataset",
            out.display()
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn load_ingested(
    out: &Path,
    manifest: &Manifest,
) -> Result<Vec<(ManifestEntry, ReturnsMatrix)>, CliError> {
    manifest
        .datasets
        .iter()
        .map(|entry| {
            let path = out.join(&entry.returns_file);
            let bytes = std::fs::read(&path).map_err(io(&path))?;
            if sha256_hex(&bytes) != entry.returns_sha256 {
                return Err(CliError::Invalid(format!(
                    "{} changed since ingest; rerun ingest",
                    path.display()
                )));
            }
            let returns = read_returns(bytes.as_slice(), &path.display().to_string())?;
            Ok((entry.clone(), returns))
        })
        .collect()
}

/// Everything that changes the metrics. Paths and thread counts are left
/// out so the same data gives the same hash wherever it lives.
#[derive(Serialize)]
struct DataHashInput<'a> {
    datasets: Vec<(&'a str, &'a str)>,
    insample_len: usize,
    outsample: &'a [usize],
    gamma: f64,
    alpha_cvar: f64,
    bop_epsilon: f64,
}

#[derive(Serialize)]
struct SelectionHashInput<'a> {
    metrics_hash: &'a str,
    groups: &'a [Group],
    top_k: usize,
}

fn selection_provenance(metrics: &Provenance, cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: hash_json(&SelectionHashInput {
            metrics_hash: &metrics.config_hash,
            groups: &cfg.groups,
            top_k: cfg.top_k,
        }),
        estimators: metrics.estimators.clone(),
    }
}

fn estimator_list(cov: &BTreeSet<CovKind>) -> Vec<String> {
    MeanKind::ALL
        .iter()
        .map(|k| k.to_string())
        .chain(
            CovKind::ALL
                .iter()
                .filter(|k| cov.contains(k))
                .map(|k| k.to_string()),
        )
        .collect()
}

/// Runs the grid on every ingested dataset and writes the full bundle.
pub fn backtest(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    if !cfg.datasets.is_empty() {
        ingest(cfg)?;
    }
    let manifest = read_manifest(&cfg.out)?;
    if manifest.insample_len != cfg.insample_len {
        return Err(CliError::Invalid(format!(
            "data was ingested with insample_len {}, but {} is configured; rerun ingest",
            manifest.insample_len, cfg.insample_len
        )));
    }
    let ingested = load_ingested(&cfg.out, &manifest)?;
    let params = cfg.params();
    let eps = cfg.epsilon()?;

    let mut data = Vec::new();
    let mut failures = Vec::new();
    let mut cov_used = BTreeSet::new();
    for (entry, returns) in &ingested {
        let plans = cfg
            .outsample
            .iter()
            .map(|&o| plan_windows(returns.n_obs(), cfg.insample_len, o))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Invalid(format!("{}: {e}", entry.name)))?;
        let spec = GridSpec::full(
            returns.n_assets() as f64 / cfg.insample_len as f64,
            params,
            eps,
        );
        cov_used.extend(applicable_kinds(
            returns.n_assets() as f64 / cfg.insample_len as f64,
        ));
        info!(
            "{}: {} models over {} settings",
            entry.name,
            spec.models().len(),
            plans.len()
        );
        let grid = run_grid(&entry.name, returns, &plans, &spec)?;
        for s in &grid.settings {
            for (tag, reason) in &s.failures {
                failures.push((
                    entry.name.clone(),
                    s.plan.outsample_len,
                    tag.clone(),
                    reason.clone(),
                ));
            }
            let solved = grid
                .grid_tags()
                .iter()
                .filter(|t| s.series.contains_key(*t))
                .count();
            if solved < 2 {
                return Err(Error::Degenerate(format!(
                    "{}: only {solved} grid models solved for out-of-sample length {}",
                    entry.name, s.plan.outsample_len
                ))
                .into());
            }
        }
        data.push(DatasetMetrics::from_grid(&grid)?);
    }

    let metrics_prov = Provenance {
        config_hash: hash_json(&DataHashInput {
            datasets: manifest
                .datasets
                .iter()
                .map(|d| (d.name.as_str(), d.returns_sha256.as_str()))
                .collect(),
            insample_len: cfg.insample_len,
            outsample: &cfg.outsample,
            gamma: cfg.gamma,
            alpha_cvar: cfg.alpha_cvar,
            bop_epsilon: cfg.bop_epsilon,
        }),
        estimators: estimator_list(&cov_used),
    };
    let prov = selection_provenance(&metrics_prov, cfg);
    let report = select_and_compare(&data, &cfg.groups, cfg.top_k)?;
    let mut paths =
        report::write_bundle(&cfg.out, &metrics_prov, &prov, &data, &report, cfg.top_k)?;
    paths.push(write_file(&cfg.out.join("failures.csv"), |w| {
        Ok(report::write_failures(w, &metrics_prov, &failures)?)
    })?);
    Ok(paths)
}

/// Metrics and provenance from a previous backtest.
fn load_metrics(out: &Path) -> Result<(Provenance, Vec<DatasetMetrics>), CliError> {
    let path = out.join(METRICS_FULL);
    if !path.is_file() {
        return Err(CliError::Invalid(format!(
            "{} not found: run `shrinkport backtest` first",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    let prov = text
        .lines()
        .next()
        .and_then(Provenance::parse)
        .ok_or_else(|| {
            CliError::Invalid(format!("{}: missing provenance header", path.display()))
        })?;
    let data = report::read_metrics(text.as_bytes(), &path.display().to_string())?;
    Ok((prov, data))
}

fn reselect(
    cfg: &RunConfig,
) -> Result<(Provenance, Vec<DatasetMetrics>, SelectionReport), CliError> {
    let (metrics_prov, data) = load_metrics(&cfg.out)?;
    let report = select_and_compare(&data, &cfg.groups, cfg.top_k)?;
    Ok((selection_provenance(&metrics_prov, cfg), data, report))
}

/// Re-ranks stored metrics: rankings, top lists, selections, box-plot data.
pub fn rank(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (prov, data, report) = reselect(cfg)?;
    let mut paths = Vec::new();
    for d in &data {
        let r = report::dataset_rankings(&report, &d.dataset);
        paths.push(write_file(
            &cfg.out.join(format!("rankings_{}.csv", d.dataset)),
            |w| Ok(report::write_rankings(w, &prov, &r)?),
        )?);
    }
    paths.push(write_file(&cfg.out.join("top10.csv"), |w| {
        Ok(report::write_top(w, &prov, &report, cfg.top_k)?)
    })?);
    paths.push(write_file(&cfg.out.join("selection.csv"), |w| {
        Ok(report::write_selection(w, &prov, &report)?)
    })?);
    paths.push(write_file(&cfg.out.join("boxplot.csv"), |w| {
        Ok(report::write_boxplot(w, &prov, &report)?)
    })?);
    Ok(paths)
}

pub fn compare(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (prov, _, report) = reselect(cfg)?;
    Ok(vec![write_file(&cfg.out.join("comparison.csv"), |w| {
        Ok(report::write_comparison(w, &prov, &report)?)
    })?])
}

/// Writes `report.md` and returns its text.
pub fn report(cfg: &RunConfig) -> Result<(PathBuf, String), CliError> {
    let (prov, _, report) = reselect(cfg)?;
    let text = report::render_markdown(&prov, &report, cfg.top_k);
    let path = cfg.out.join("report.md");
    std::fs::write(&path, &text).map_err(io(&path))?;
    Ok((path, text))
}
