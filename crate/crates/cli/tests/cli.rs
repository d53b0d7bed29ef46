use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde::Deserialize;

const BIN: &str = env!("CARGO_BIN_EXE_entroute");
const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn bren_args(extra: &[&str]) -> Vec<String> {
    let mut v = vec![
        "--topology".to_string(),
        format!("{DATA}/bren.json"),
        "--demands".to_string(),
        format!("{DATA}/bren_demands.json"),
    ];
    v.extend(extra.iter().map(ToString::to_string));
    v
}

fn run_owned(args: &[String], out: &Path) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&refs, out)
}

#[derive(Debug, Deserialize, PartialEq)]
struct Row {
    k: usize,
    mode: String,
    stat: String,
    value: f64,
    seed: Option<u64>,
    wall_ms: Option<u64>,
}

fn rows(dir: &Path) -> Vec<Row> {
    csv::Reader::from_path(dir.join("results.csv"))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn value(rows: &[Row], k: usize, mode: &str, stat: &str) -> f64 {
    rows.iter()
        .find(|r| r.k == k && r.mode == mode && r.stat == stat)
        .unwrap_or_else(|| panic!("missing {k} {mode} {stat}"))
        .value
}

#[test]
fn envelope_report_gaps_stay_within_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--mode", "envelope-report"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(dir.path());
    for (stat, max) in [
        ("skf.hat_minus_f", 0.0165),
        ("skf.f_minus_breve", 0.0258),
        ("de.hat_minus_f", 0.0135),
        ("de.f_minus_breve", 0.0212),
    ] {
        let v = value(&r, 0, "envelope-report", stat);
        assert!(v > 1e-3 && v <= max, "{stat} = {v}");
    }
    let curve = fs::read_to_string(dir.path().join("envelope.csv")).unwrap();
    assert!(curve.starts_with("measure,z,f,f_hat,f_breve\n"));
    // the stand-ins bracket F at every grid point
    let mut reader = csv::Reader::from_reader(curve.as_bytes());
    for rec in reader.records() {
        let rec = rec.unwrap();
        let f: f64 = rec[2].parse().unwrap();
        let hat: f64 = rec[3].parse().unwrap();
        let breve: f64 = rec[4].parse().unwrap();
        assert!(breve <= f + 1e-12 && f <= hat + 1e-12, "{rec:?}");
    }
    assert!(dir.path().join("gaps.csv").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = bren_args(&[
        "--mode",
        "sweep",
        "--k",
        "1,2",
        "--seed",
        "5",
        "--samples",
        "15",
    ]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run_owned(&args, dir.path());
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["results.csv", "summary.json", "chart.svg"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn results_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_owned(
        &bren_args(&["--mode", "exact", "--k", "2", "--bracket"]),
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(text.starts_with("k,mode,stat,value,seed,wall_ms\n"));
    let r = rows(dir.path());
    assert!(r.iter().all(|row| row.k == 2
        && row.mode == "exact"
        && row.seed.is_none()
        && row.wall_ms.is_none()));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "mode", "stat", "value", "seed", "wall_ms"])
        .unwrap();
    for row in &r {
        let cell = |o: Option<u64>| o.map_or_else(String::new, |v| v.to_string());
        w.write_record([
            row.k.to_string(),
            row.mode.clone(),
            row.stat.clone(),
            format!("{:?}", row.value),
            cell(row.seed),
            cell(row.wall_ms),
        ])
        .unwrap();
    }
    let again = String::from_utf8(w.into_inner().unwrap()).unwrap();
    let reparsed: Vec<Row> = csv::Reader::from_reader(again.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(reparsed, r);
    // the bracket is non-negative and the optimum lies under its own bound
    assert!(value(&r, 2, "exact", "bracket") >= 0.0);
    assert!(value(&r, 2, "exact", "log_utility") <= value(&r, 2, "exact", "bound") + 1e-9);
}

#[test]
fn sweep_on_bren_orders_bounds_and_heuristics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_owned(
        &bren_args(&[
            "--mode",
            "sweep",
            "--k",
            "2,4,6",
            "--seed",
            "1",
            "--samples",
            "30",
        ]),
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let svg = fs::read_to_string(dir.path().join("chart.svg")).unwrap();
    assert_eq!(svg.matches(r#"<g class="series""#).count(), 5);
    let r = rows(dir.path());
    for k in [2, 4, 6] {
        let exact = value(&r, k, "exact", "log_utility");
        let upper = value(&r, k, "relax-ub", "bound").min(value(&r, k, "mc-ub", "bound"));
        assert!(
            exact <= upper + 1e-6,
            "k={k}: exact {exact} above bound {upper}"
        );
        for h in ["rr-heur", "mc-heur"] {
            let best = value(&r, k, h, "best");
            assert!(value(&r, k, h, "mean") <= best);
            assert!(
                best <= exact + 1e-6 * exact.abs().max(1.0),
                "k={k}: {h} {best} above exact {exact}"
            );
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    for p in summary["points"].as_array().unwrap() {
        assert_eq!(p["ordering_holds"], serde_json::Value::Bool(true));
    }
    assert_eq!(
        summary["placeholder_lengths"],
        serde_json::Value::Bool(true)
    );
}

#[test]
fn failures_produce_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let missing = PathBuf::from(DATA).join("no-such-file.json");
    let out = run(
        &[
            "--mode",
            "exact",
            "--topology",
            missing.to_str().unwrap(),
            "--demands",
            "x.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["error"]["kind"], "topology");
    assert!(dir.path().join("error.json").exists());

    // randomized modes need a seed
    let out = run_owned(&bren_args(&["--mode", "rr-heur"]), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["error"]["kind"], "cli");
}
