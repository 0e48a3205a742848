//! CSV and Markdown writers for backtest results, plus readers for the
//! files that feed re-ranking.
//!
//! Every CSV starts with one `#` comment line carrying the config hash and
//! the estimator kinds used. Display tables use 5 decimals; `metrics_full.csv`
//! keeps shortest round-trip precision so ranking can be rerun from disk.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::backtest::{top_k, DatasetMetrics, GridSpec, SelectionReport};
use crate::dea::{EfficiencyScore, Group, ScoreStatus};
use crate::mean_shrinkage::BopEpsilon;
use crate::metrics::{MetricVector, METRIC_NAMES};
use crate::portfolio_opt::{ModelParams, ModelSpec};
use crate::{Error, Result};

/// Identifies the run that produced a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub estimators: Vec<String>,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!(
            "# config_hash={}; estimators={}",
            self.config_hash,
            self.estimators.join("|")
        )
    }

    /// Inverse of [`Provenance::header`].
    pub fn parse(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# config_hash=")?;
        let (hash, estimators) = rest.trim_end().split_once("; estimators=")?;
        Some(Self {
            config_hash: hash.to_string(),
            estimators: estimators
                .split('|')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        })
    }
}

/// Fixed 5-decimal rendering. Negative zero prints as zero.
pub fn fmt5(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.5}");
    if s == "-0.00000" {
        "0.00000".into()
    } else {
        s
    }
}

fn csv_err(origin: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::MalformedCsv {
        path: origin.to_string(),
        message: e.to_string(),
    }
}

fn io_err(origin: &str) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: origin.to_string(),
        source,
    }
}

fn table<W: Write>(
    mut out: W,
    prov: &Provenance,
    extra: &[String],
    header: &[String],
    rows: &[Vec<String>],
) -> Result<()> {
    let io = io_err("<report>");
    writeln!(out, "{}", prov.header()).map_err(&io)?;
    for line in extra {
        writeln!(out, "# {line}").map_err(&io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let e = csv_err("<report>");
    w.write_record(header).map_err(&e)?;
    for row in rows {
        w.write_record(row).map_err(&e)?;
    }
    w.flush().map_err(&io)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
}

fn role(tag: &str) -> &'static str {
    match ModelSpec::from_tag(tag) {
        Ok(spec) if spec.is_benchmark() => "benchmark",
        _ => "grid",
    }
}

/// Grid tags first (in grid order), then benchmarks in key order.
fn ordered_tags<'a>(
    data: &'a DatasetMetrics,
    metrics: &'a BTreeMap<String, MetricVector>,
) -> Vec<&'a String> {
    let mut tags: Vec<&String> = data
        .grid_tags
        .iter()
        .filter(|t| metrics.contains_key(*t))
        .collect();
    tags.extend(metrics.keys().filter(|t| !data.grid_tags.contains(t)));
    tags
}

/// Metrics for every dataset, setting and model. `full` switches from
/// 5-decimal display to round-trip precision.
pub fn write_metrics<W: Write>(
    out: W,
    prov: &Provenance,
    data: &[DatasetMetrics],
    full: bool,
) -> Result<()> {
    let mut header = strings(&["dataset", "oos_period", "tag", "role"]);
    header.extend(strings(&METRIC_NAMES));
    let mut rows = Vec::new();
    for d in data {
        for (metrics, oos) in d.metrics.iter().zip(&d.outsample_lens) {
            for tag in ordered_tags(d, metrics) {
                let mut row = vec![
                    d.dataset.clone(),
                    oos.to_string(),
                    tag.clone(),
                    role(tag).into(),
                ];
                row.extend(metrics[tag].values().iter().map(|&v| {
                    if full {
                        v.to_string()
                    } else {
                        fmt5(v)
                    }
                }));
                rows.push(row);
            }
        }
    }
    table(out, prov, &[], &header, &rows)
}

/// Parses a file written by [`write_metrics`] with `full = true`.
pub fn read_metrics<R: Read>(input: R, origin: &str) -> Result<Vec<DatasetMetrics>> {
    let e = csv_err(origin);
    let bad = |message: String| Error::MalformedCsv {
        path: origin.to_string(),
        message,
    };
    let mut rdr = reader(input);
    let header = rdr.headers().map_err(&e)?.clone();
    let expected: Vec<&str> = ["dataset", "oos_period", "tag", "role"]
        .into_iter()
        .chain(METRIC_NAMES)
        .collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(bad(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out: Vec<DatasetMetrics> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(&e)?;
        let line = i + 2;
        let dataset = &record[0];
        let oos: usize = record[1]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad oos_period '{}'", &record[1])))?;
        let tag = record[2].to_string();
        let mut v = [0.0; 10];
        for (k, cell) in record.iter().skip(4).enumerate() {
            v[k] = cell
                .parse()
                .map_err(|_| bad(format!("line {line}: cannot parse '{cell}'")))?;
        }
        let metrics = MetricVector {
            mean_return: v[0],
            sd: v[1],
            var_05: v[2],
            cvar_05: v[3],
            dd: v[4],
            mean_cvar_ratio: v[5],
            sharpe: v[6],
            sortino: v[7],
            mean_var_ratio: v[8],
            turnover: v[9],
            degenerate_ratios: v[5..9].iter().any(|x| x.is_nan()),
            single_rebalance: false,
        };

        if out.last().is_none_or(|d| d.dataset != dataset) {
            if out.iter().any(|d| d.dataset == dataset) {
                return Err(bad(format!(
                    "line {line}: rows of dataset '{dataset}' are not contiguous"
                )));
            }
            out.push(DatasetMetrics {
                dataset: dataset.to_string(),
                outsample_lens: Vec::new(),
                grid_tags: Vec::new(),
                metrics: Vec::new(),
            });
        }
        let d = out.last_mut().expect("pushed above");
        if d.outsample_lens.last() != Some(&oos) {
            if d.outsample_lens.contains(&oos) {
                return Err(bad(format!(
                    "line {line}: rows of setting {oos} are not contiguous"
                )));
            }
            d.outsample_lens.push(oos);
            d.metrics.push(BTreeMap::new());
        }
        if &record[3] == "grid" && !d.grid_tags.contains(&tag) {
            d.grid_tags.push(tag.clone());
        }
        if d.metrics
            .last_mut()
            .expect("pushed above")
            .insert(tag.clone(), metrics)
            .is_some()
        {
            return Err(bad(format!("line {line}: duplicate tag '{tag}'")));
        }
    }
    if out.is_empty() {
        return Err(bad("no rows".into()));
    }
    // a model that failed in some settings is first seen late; restore grid order
    let canonical: Vec<String> = GridSpec::full(0.0, ModelParams::default(), BopEpsilon::default())
        .grid_models()
        .iter()
        .map(ModelSpec::tag)
        .collect();
    for d in &mut out {
        d.grid_tags.sort_by_key(|t| {
            (
                canonical.iter().position(|c| c == t).unwrap_or(usize::MAX),
                t.clone(),
            )
        });
    }
    Ok(out)
}

/// Ranked scores keyed by group and out-of-sample length.
pub type Rankings = BTreeMap<(Group, usize), Vec<EfficiencyScore>>;

/// Flattens one dataset's rankings from a [`SelectionReport`].
pub fn dataset_rankings(report: &SelectionReport, dataset: &str) -> Rankings {
    let mut out = Rankings::new();
    for d in report.datasets.iter().filter(|d| d.dataset == dataset) {
        for (group, settings) in &d.rankings {
            for (ranking, &oos) in settings.iter().zip(&d.outsample_lens) {
                out.insert((*group, oos), ranking.clone());
            }
        }
    }
    out
}

/// Columns `tag, group, oos_period, score, rank`.
pub fn write_rankings<W: Write>(out: W, prov: &Provenance, rankings: &Rankings) -> Result<()> {
    let mut rows = Vec::new();
    for ((group, oos), ranking) in rankings {
        for (i, s) in ranking.iter().enumerate() {
            rows.push(vec![
                s.dmu_tag.clone(),
                group.to_string(),
                oos.to_string(),
                fmt5(s.score),
                (i + 1).to_string(),
            ]);
        }
    }
    table(
        out,
        prov,
        &[],
        &strings(&["tag", "group", "oos_period", "score", "rank"]),
        &rows,
    )
}

pub fn read_rankings<R: Read>(input: R, origin: &str) -> Result<Rankings> {
    let e = csv_err(origin);
    let bad = |message: String| Error::MalformedCsv {
        path: origin.to_string(),
        message,
    };
    let mut rdr = reader(input);
    let mut out = Rankings::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(&e)?;
        let line = i + 2;
        if record.len() != 5 {
            return Err(bad(format!("line {line}: expected 5 fields")));
        }
        let group: Group = record[1].parse()?;
        let oos: usize = record[2]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad oos_period")))?;
        let score: f64 = record[3]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad score")))?;
        let rank: usize = record[4]
            .parse()
            .map_err(|_| bad(format!("line {line}: bad rank")))?;
        let list = out.entry((group, oos)).or_default();
        if rank != list.len() + 1 {
            return Err(bad(format!("line {line}: rank {rank} out of sequence")));
        }
        list.push(EfficiencyScore {
            dmu_tag: record[0].to_string(),
            score,
            status: if score.is_infinite() {
                ScoreStatus::Unbounded
            } else {
                ScoreStatus::Optimal
            },
        });
    }
    Ok(out)
}

/// Rankings with every score rounded as [`write_rankings`] prints it; the
/// reader reproduces exactly this.
pub fn rounded(rankings: &Rankings) -> Rankings {
    rankings
        .iter()
        .map(|(k, list)| {
            let list = list
                .iter()
                .map(|s| EfficiencyScore {
                    score: fmt5(s.score).parse().expect("formatted float"),
                    ..s.clone()
                })
                .collect();
            (*k, list)
        })
        .collect()
}

/// Top-k lists per group, dataset and setting.
pub fn write_top<W: Write>(
    out: W,
    prov: &Provenance,
    report: &SelectionReport,
    k: usize,
) -> Result<()> {
    let mut rows = Vec::new();
    for &group in &report.groups {
        for d in &report.datasets {
            let Some(settings) = d.rankings.get(&group) else {
                continue;
            };
            for (ranking, oos) in settings.iter().zip(&d.outsample_lens) {
                for (i, s) in ranking.iter().take(k).enumerate() {
                    rows.push(vec![
                        group.to_string(),
                        d.dataset.clone(),
                        oos.to_string(),
                        (i + 1).to_string(),
                        s.dmu_tag.clone(),
                        fmt5(s.score),
                    ]);
                }
            }
        }
    }
    table(
        out,
        prov,
        &[],
        &strings(&["group", "dataset", "oos_period", "rank", "tag", "score"]),
        &rows,
    )
}

/// Market-best per dataset and the universal best per group.
pub fn write_selection<W: Write>(
    out: W,
    prov: &Provenance,
    report: &SelectionReport,
) -> Result<()> {
    let mut rows = Vec::new();
    for &group in &report.groups {
        for d in &report.datasets {
            if let Some(b) = d.market_best.get(&group) {
                rows.push(vec![
                    group.to_string(),
                    d.dataset.clone(),
                    b.tag.clone(),
                    fmt5(b.gm),
                    "1".into(),
                    b.fallback.to_string(),
                ]);
            }
        }
        if let Some(u) = report.universal.get(&group) {
            rows.push(vec![
                group.to_string(),
                "universal".into(),
                u.tag.clone(),
                fmt5(u.mean_gm),
                u.markets.to_string(),
                "false".into(),
            ]);
        }
    }
    table(
        out,
        prov,
        &[],
        &strings(&["group", "scope", "tag", "gm", "markets", "fallback"]),
        &rows,
    )
}

const POOL_NOTE: &str =
    "pool=5 benchmarks plus distinct selected portfolios (inferred scoring pool)";

/// Efficiency rows of the benchmark comparison for every dataset and setting.
pub fn write_comparison<W: Write>(
    out: W,
    prov: &Provenance,
    report: &SelectionReport,
) -> Result<()> {
    let mut header = strings(&["dataset", "oos_period", "efficiency"]);
    if let Some(t) = report.comparisons.values().next() {
        header.extend(t.columns.iter().cloned());
    }
    let mut rows = Vec::new();
    for ((dataset, oos), t) in &report.comparisons {
        for (group, values) in &t.rows {
            let mut row = vec![
                dataset.clone(),
                oos.to_string(),
                format!("Efficiency-{group}"),
            ];
            row.extend(values.iter().map(|&v| fmt5(v)));
            rows.push(row);
        }
    }
    table(out, prov, &[POOL_NOTE.into()], &header, &rows)
}

/// One score per (group, model, dataset, setting): box-plot input.
pub fn write_boxplot<W: Write>(out: W, prov: &Provenance, report: &SelectionReport) -> Result<()> {
    let mut rows = Vec::new();
    for &group in &report.groups {
        let mut by_tag: BTreeMap<&str, Vec<Vec<String>>> = BTreeMap::new();
        for d in &report.datasets {
            let Some(settings) = d.rankings.get(&group) else {
                continue;
            };
            for (ranking, oos) in settings.iter().zip(&d.outsample_lens) {
                for s in ranking {
                    by_tag.entry(&s.dmu_tag).or_default().push(vec![
                        group.to_string(),
                        s.dmu_tag.clone(),
                        d.dataset.clone(),
                        oos.to_string(),
                        fmt5(s.score),
                    ]);
                }
            }
        }
        rows.extend(by_tag.into_values().flatten());
    }
    table(
        out,
        prov,
        &[],
        &strings(&["group", "tag", "dataset", "oos_period", "score"]),
        &rows,
    )
}

/// Models that failed on some window, one row each.
pub fn write_failures<W: Write>(
    out: W,
    prov: &Provenance,
    failures: &[(String, usize, String, String)],
) -> Result<()> {
    let rows: Vec<Vec<String>> = failures
        .iter()
        .map(|(d, oos, tag, reason)| vec![d.clone(), oos.to_string(), tag.clone(), reason.clone()])
        .collect();
    table(
        out,
        prov,
        &[],
        &strings(&["dataset", "oos_period", "tag", "reason"]),
        &rows,
    )
}

/// Human-readable summary of a selection run.
pub fn render_markdown(prov: &Provenance, report: &SelectionReport, k: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Backtest report\n");
    let _ = writeln!(s, "- config hash: `{}`", prov.config_hash);
    let _ = writeln!(s, "- estimators: {}", prov.estimators.join(", "));
    let _ = writeln!(
        s,
        "- groups: {}\n",
        report
            .groups
            .iter()
            .map(|g| g.name())
            .collect::<Vec<_>>()
            .join(", ")
    );

    for &group in &report.groups {
        let _ = writeln!(s, "## Efficiency-{group}\n");
        for d in &report.datasets {
            let Some(settings) = d.rankings.get(&group) else {
                continue;
            };
            let _ = writeln!(s, "### {}\n", d.dataset);
            let _ = write!(s, "| rank |");
            for oos in &d.outsample_lens {
                let _ = write!(s, " oos {oos} | score |");
            }
            let _ = write!(s, "\n|---|");
            for _ in &d.outsample_lens {
                let _ = write!(s, "---|---|");
            }
            s.push('\n');
            let tops: Vec<Vec<String>> = settings.iter().map(|r| top_k(r, k)).collect();
            for i in 0..k {
                let _ = write!(s, "| {} |", i + 1);
                for (ranking, top) in settings.iter().zip(&tops) {
                    match top.get(i) {
                        Some(tag) => {
                            let _ = write!(s, " {tag} | {} |", fmt5(ranking[i].score));
                        }
                        None => s.push_str(" | |"),
                    }
                }
                s.push('\n');
            }
            match d.market_best.get(&group) {
                Some(b) => {
                    let flag = if b.fallback {
                        " (no model in every top list; highest GM overall)"
                    } else {
                        ""
                    };
                    let _ = writeln!(s, "\nMarket best: {} (GM {}){flag}\n", b.tag, fmt5(b.gm));
                }
                None => {
                    let _ = writeln!(s, "\nMarket best: none\n");
                }
            }
        }
        if let Some(u) = report.universal.get(&group) {
            let _ = writeln!(
                s,
                "Universal best: {} ({} markets, mean GM {})\n",
                u.tag,
                u.markets,
                fmt5(u.mean_gm)
            );
        }
    }

    if !report.comparisons.is_empty() {
        let _ = writeln!(s, "## Benchmark comparison\n");
        let _ = writeln!(s, "Scored on a pool of the 5 benchmarks plus the distinct selected portfolios (inferred).\n");
        for ((dataset, oos), t) in &report.comparisons {
            let _ = writeln!(s, "### {dataset}, oos {oos}\n");
            let _ = writeln!(s, "| | {} |", t.columns.join(" | "));
            let _ = writeln!(s, "|---|{}", "---|".repeat(t.columns.len()));
            for (group, values) in &t.rows {
                let cells: Vec<String> = values.iter().map(|&v| fmt5(v)).collect();
                let _ = writeln!(s, "| Efficiency-{group} | {} |", cells.join(" | "));
            }
            s.push('\n');
        }
    }
    s
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Writes the full result bundle into `dir` and returns the file paths.
/// The metrics files carry `metrics_prov`, everything downstream of the
/// ranking carries `prov`.
pub fn write_bundle(
    dir: &Path,
    metrics_prov: &Provenance,
    prov: &Provenance,
    data: &[DatasetMetrics],
    report: &SelectionReport,
    k: usize,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(&dir.display().to_string()))?;
    let mut paths = Vec::new();
    let mut emit = |name: String, f: &dyn Fn(&mut dyn Write) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut w = create(&path)?;
        f(&mut w)?;
        w.flush().map_err(io_err(&path.display().to_string()))?;
        paths.push(path);
        Ok(())
    };
    emit("metrics.csv".into(), &|w| {
        write_metrics(w, metrics_prov, data, false)
    })?;
    emit("metrics_full.csv".into(), &|w| {
        write_metrics(w, metrics_prov, data, true)
    })?;
    for d in data {
        let r = dataset_rankings(report, &d.dataset);
        emit(format!("rankings_{}.csv", d.dataset), &|w| {
            write_rankings(w, prov, &r)
        })?;
    }
    emit("top10.csv".into(), &|w| write_top(w, prov, report, k))?;
    emit("selection.csv".into(), &|w| {
        write_selection(w, prov, report)
    })?;
    emit("comparison.csv".into(), &|w| {
        write_comparison(w, prov, report)
    })?;
    emit("boxplot.csv".into(), &|w| write_boxplot(w, prov, report))?;
    let md = render_markdown(prov, report, k);
    emit("report.md".into(), &|w| {
        w.write_all(md.as_bytes()).map_err(io_err("report.md"))
    })?;
    Ok(paths)
}
