use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn shrinkport(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shrinkport"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = shrinkport(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_synth(dir: &Path) {
    ok(
        dir,
        &[
            "synth",
            "--out",
            "data",
            "--assets",
            "8",
            "--obs",
            "160",
            "--factors",
            "2",
            "--seed",
            "3",
        ],
    );
}

const BACKTEST: &[&str] = &[
    "backtest",
    "--dataset",
    "syn=data/synthetic.csv",
    "--insample",
    "60",
    "--oos",
    "20,40",
];

fn backtest(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = BACKTEST.to_vec();
    args.extend(["--out", out]);
    args.extend(extra);
    ok(dir, &args)
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_flat_prices(path: &Path, assets: usize, days: usize) {
    let mut s = String::from("date");
    for j in 0..assets {
        s.push_str(&format!(",X{j}"));
    }
    s.push('\n');
    for t in 0..days {
        s.push_str(&format!("D{t:04}"));
        for j in 0..assets {
            s.push_str(&format!(",{}", 100.0 + ((t * 7 + j * 3) % 11) as f64));
        }
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

#[test]
fn default_backtest_writes_full_grid_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let first = ok(dir, &["synth", "--out", "data", "--seed", "7"]);
    ok(
        dir,
        &[
            "backtest",
            "--dataset",
            "syn=data/synthetic.csv",
            "--out",
            "a",
            "--threads",
            "4",
        ],
    );
    let second = ok(dir, &["synth", "--out", "data", "--seed", "7"]);
    assert_eq!(first.stdout, second.stdout);
    ok(
        dir,
        &[
            "backtest",
            "--dataset",
            "syn=data/synthetic.csv",
            "--out",
            "b",
            "--threads",
            "1",
        ],
    );

    let header = fs::read_to_string(dir.join("data/synthetic.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap().split(',').count(), 1 + 6);
    let rows = data_rows(&dir.join("a/rankings_syn.csv"));
    assert_eq!(rows.len(), 66 * 3 * 3);
    let metrics = data_rows(&dir.join("a/metrics.csv"));
    assert_eq!(metrics.len(), (66 + 5) * 3);

    let mut names: Vec<_> = fs::read_dir(dir.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "boxplot.csv",
            "comparison.csv",
            "failures.csv",
            "manifest.json",
            "metrics.csv",
            "metrics_full.csv",
            "rankings_syn.csv",
            "report.md",
            "returns_syn.csv",
            "selection.csv",
            "top10.csv",
        ]
    );
    for name in &names {
        assert_eq!(
            fs::read(dir.join("a").join(name)).unwrap(),
            fs::read(dir.join("b").join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
    for name in names
        .iter()
        .filter(|n| n.ends_with(".csv") && !n.starts_with("returns"))
    {
        let first = fs::read_to_string(dir.join("a").join(name)).unwrap();
        assert!(first.starts_with("# config_hash="), "{name}");
    }
}

#[test]
fn stage_commands_reproduce_backtest_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_synth(dir);
    backtest(dir, "res", &[]);
    let files = [
        "rankings_syn.csv",
        "top10.csv",
        "selection.csv",
        "boxplot.csv",
        "comparison.csv",
        "report.md",
    ];
    let before: Vec<_> = files
        .iter()
        .map(|f| fs::read(dir.join("res").join(f)).unwrap())
        .collect();
    for f in files {
        fs::remove_file(dir.join("res").join(f)).unwrap();
    }
    ok(dir, &["rank", "--out", "res"]);
    ok(dir, &["compare", "--out", "res"]);
    let out = ok(dir, &["report", "--out", "res"]);
    for (f, b) in files.iter().zip(&before) {
        assert_eq!(&fs::read(dir.join("res").join(f)).unwrap(), b, "{f}");
    }
    let md = String::from_utf8(out.stdout).unwrap();
    assert!(md.starts_with("# Backtest report"));
    assert_eq!(md.as_bytes(), &before[5][..]);
}

#[test]
fn group_filter_limits_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    small_synth(dir);
    backtest(dir, "res", &["--groups", "A"]);
    let rankings = data_rows(&dir.join("res/rankings_syn.csv"));
    assert_eq!(rankings.len(), 66 * 2);
    assert!(rankings.iter().all(|r| r[1] == "A"));
    assert!(data_rows(&dir.join("res/top10.csv"))
        .iter()
        .all(|r| r[0] == "A"));
    assert!(data_rows(&dir.join("res/selection.csv"))
        .iter()
        .all(|r| r[0] == "A"));
    let header = fs::read_to_string(dir.join("res/comparison.csv")).unwrap();
    let columns = header.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(columns.contains("A Market") && !columns.contains("B Market"));

    // re-ranking under other groups changes selection provenance, not metrics
    ok(dir, &["rank", "--out", "res", "--groups", "C,B"]);
    let groups: std::collections::BTreeSet<_> = data_rows(&dir.join("res/rankings_syn.csv"))
        .into_iter()
        .map(|r| r[1].clone())
        .collect();
    assert_eq!(groups.into_iter().collect::<Vec<_>>(), ["B", "C"]);
}

#[test]
fn ingest_reports_dimensions() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_flat_prices(&dir.join("thirty.csv"), 30, 80);
    ok(
        dir,
        &[
            "ingest",
            "--dataset",
            "thirty.csv",
            "--out",
            "res",
            "--insample",
            "40",
            "--oos",
            "10,20",
        ],
    );
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("res/manifest.json")).unwrap()).unwrap();
    let d = &m["datasets"][0];
    assert_eq!(d["name"], "thirty");
    assert_eq!(d["n_assets"], 30);
    assert_eq!(d["n_returns"], 79);
    assert_eq!(d["high_dimensional"], false);
    assert_eq!(d["settings"][0]["windows"], 3);
    assert_eq!(d["settings"][1]["windows"], 1);

    write_flat_prices(&dir.join("wide.csv"), 1451, 12);
    ok(
        dir,
        &[
            "ingest",
            "--dataset",
            "wide=wide.csv",
            "--out",
            "wide",
            "--insample",
            "8",
            "--oos",
            "2,50",
        ],
    );
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("wide/manifest.json")).unwrap()).unwrap();
    let d = &m["datasets"][0];
    assert_eq!(d["n_assets"], 1451);
    assert_eq!(d["high_dimensional"], true);
    assert_eq!(d["settings"][1]["windows"], serde_json::Value::Null);
}

#[test]
fn dataset_directory_is_expanded() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::create_dir(dir.join("prices")).unwrap();
    write_flat_prices(&dir.join("prices/one.csv"), 3, 30);
    write_flat_prices(&dir.join("prices/two.csv"), 4, 30);
    ok(
        dir,
        &[
            "ingest",
            "--dataset",
            "prices",
            "--out",
            "res",
            "--insample",
            "10",
            "--oos",
            "5",
        ],
    );
    assert!(dir.join("res/returns_one.csv").is_file());
    assert!(dir.join("res/returns_two.csv").is_file());
}

#[test]
fn validation_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::create_dir(dir.join("empty")).unwrap();

    let out = shrinkport(
        dir,
        &[
            "ingest",
            "--dataset",
            "empty",
            "--dataset",
            "gone=nowhere.csv",
            "--out",
            "res",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing input files"), "{err}");
    assert!(
        err.contains("empty/*.csv") && err.contains("nowhere.csv"),
        "{err}"
    );

    let out = shrinkport(dir, &["synth", "--assets", "0", "--out", "data"]);
    assert_eq!(out.status.code(), Some(1));

    let out = shrinkport(dir, &["rank", "--groups", "D"]);
    assert_eq!(out.status.code(), Some(1));

    let out = shrinkport(dir, &["rank", "--out", "nothing-here"]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(dir.join("bad.toml"), "insample = 5\n").unwrap();
    let out = shrinkport(dir, &["backtest", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn toml_config_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    write_flat_prices(&dir.join("p.csv"), 5, 60);
    fs::write(
        dir.join("run.toml"),
        "insample_len = 30\noutsample = [10]\nout = \"fromtoml\"\n[[datasets]]\nname = \"p\"\npath = \"p.csv\"\n",
    )
    .unwrap();
    ok(dir, &["ingest", "--config", "run.toml"]);
    ok(
        dir,
        &[
            "ingest",
            "--config",
            "run.toml",
            "--out",
            "fromflag",
            "--insample",
            "20",
        ],
    );
    let read = |d: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(dir.join(d).join("manifest.json")).unwrap())
            .unwrap()
    };
    assert_eq!(read("fromtoml")["insample_len"], 30);
    assert_eq!(read("fromflag")["insample_len"], 20);
}
