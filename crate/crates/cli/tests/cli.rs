mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Stdio};

use serde_json::Value;

use mslr_eval::MetricId;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mslr-eval"))
}

fn run(config: &Path, args: &[&str]) -> std::process::Output {
    let out = bin().arg("--config").arg(config).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_csv(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            headers
                .iter()
                .map(str::to_string)
                .zip(r.iter().map(str::to_string))
                .collect()
        })
        .collect()
}

#[test]
fn score_writes_one_row_per_instance_or_an_undefined_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    run(&fx.config, &["score"]);
    let metrics = fx.dir.join("out/metrics");
    let undefined = read_csv(&metrics.join("undefined.csv"));
    let total = common::SYSTEMS.len() * common::N_REVIEWS;
    for m in MetricId::ALL {
        let rows = read_csv(&metrics.join(format!("{m}.csv")));
        let undef = undefined.iter().filter(|r| r["metric_id"] == m.as_str()).count();
        assert_eq!(rows.len() + undef, total, "{m}");
        let keys: Vec<(String, String)> = rows
            .iter()
            .map(|r| (r["system_id"].clone(), r["review_id"].clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted, "{m} rows are sorted");
    }
    // The holes planted in the sidecars.
    let reasons: BTreeSet<(String, String, String)> = undefined
        .iter()
        .map(|r| (r["metric_id"].clone(), r["system_id"].clone(), r["review_id"].clone()))
        .collect();
    for s in common::SYSTEMS {
        assert!(reasons.contains(&("PIOOverlap".into(), s.into(), "r01".into())));
        assert!(reasons.contains(&("DeltaEI".into(), s.into(), "r02".into())) == (s == "sysB"));
    }
    assert!(reasons.contains(&("STS".into(), "sysC".into(), "r03".into())));
    assert_eq!(reasons.len(), 3 + 1 + 1);
}

#[test]
fn disabled_metric_has_no_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    run(&fx.config, &["score"]);
    assert!(fx.dir.join("out/metrics/NLI.csv").exists());
    let text = fs::read_to_string(&fx.config).unwrap() + "\n[metrics]\nenabled = [\"ROUGE1F\", \"DeltaEI\"]\n";
    fs::write(&fx.config, text).unwrap();
    run(&fx.config, &["score"]);
    assert!(fx.dir.join("out/metrics/ROUGE1F.csv").exists());
    assert!(!fx.dir.join("out/metrics/NLI.csv").exists());
    assert!(!fx.dir.join("out/metrics/PIOOverlap.csv").exists());
}

#[test]
fn missing_sidecar_for_enabled_metric_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    let text = fs::read_to_string(&fx.config)
        .unwrap()
        .replace("pio = \"pio.jsonl\"\n", "");
    fs::write(&fx.config, text).unwrap();
    let out = bin().arg("--config").arg(&fx.config).arg("score").output().unwrap();
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["level"], "error");
    assert_eq!(err["command"], "score");
    assert!(err["message"].as_str().unwrap().contains("PIOOverlap"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    run(&fx.config, &["score"]);
    run(&fx.config, &["report"]);
    run(&fx.config, &["plan"]);
    let first = common::snapshot(&fx.dir);
    run(&fx.config, &["score"]);
    run(&fx.config, &["report"]);
    run(&fx.config, &["plan"]);
    let second = common::snapshot(&fx.dir);
    assert_eq!(first.len(), second.len());
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.0, b.0);
        assert!(a.1 == b.1, "{} differs between runs", a.0);
    }
    for f in [
        "rankings.csv",
        "rank_scores.csv",
        "agreement.csv",
        "copying.csv",
        "metric_facet_correlations.csv",
        "metric_correlations.csv",
        "ranking_correlations.csv",
        "ecdf.csv",
        "bootstrap.json",
        "self_repetition.csv",
        "train_overlap.csv",
        "top_ngrams.csv",
        "plan.jsonl",
    ] {
        assert!(fx.dir.join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn seed_flag_changes_the_plan_and_the_bootstrap() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    run(&fx.config, &["plan"]);
    let a = fs::read(fx.dir.join("out/plan.jsonl")).unwrap();
    run(&fx.config, &["--seed", "8", "plan"]);
    let b = fs::read(fx.dir.join("out/plan.jsonl")).unwrap();
    assert_ne!(a, b);
    run(&fx.config, &["--seed", "7", "plan"]);
    assert_eq!(a, fs::read(fx.dir.join("out/plan.jsonl")).unwrap());
}

/// Rankings recomputed from the metric CSVs and the annotation export.
#[test]
fn rankings_match_a_brute_force_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    run(&fx.config, &["score"]);
    run(&fx.config, &["rank"]);
    let table = read_csv(&fx.dir.join("out/rankings.csv"));
    let rank_of = |col: &str| -> BTreeMap<String, usize> {
        table
            .iter()
            .map(|r| (r["system_id"].clone(), r[col].parse().unwrap()))
            .collect()
    };

    let log: Vec<Value> = fs::read_to_string(fx.dir.join("annotations.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let subset: BTreeSet<(String, String)> = log
        .iter()
        .filter(|e| e["kind"] == "facet")
        .map(|e| {
            (
                e["system_id"].as_str().unwrap().to_string(),
                e["review_id"].as_str().unwrap().to_string(),
            )
        })
        .collect();

    let competition = |scores: &BTreeMap<String, f64>, higher: bool| -> BTreeMap<String, usize> {
        scores
            .iter()
            .map(|(s, v)| {
                let better = scores.values().filter(|o| if higher { *o > v } else { *o < v }).count();
                (s.clone(), better + 1)
            })
            .collect()
    };

    for m in [MetricId::AvgRougeF, MetricId::DeltaEi, MetricId::PioOverlap] {
        let rows = read_csv(&fx.dir.join(format!("out/metrics/{m}.csv")));
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in rows {
            if subset.contains(&(r["system_id"].clone(), r["review_id"].clone())) {
                let e = acc.entry(r["system_id"].clone()).or_default();
                e.0 += r["value"].parse::<f64>().unwrap();
                e.1 += 1;
            }
        }
        let means: BTreeMap<String, f64> = acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
        assert_eq!(rank_of(m.as_str()), competition(&means, m != MetricId::DeltaEi), "{m}");
    }

    // Combined pairwise ranking: per-annotator points, then Borda.
    let mut per: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for e in log.iter().filter(|e| e["kind"] == "pairwise") {
        let points = per.entry(e["annotator_id"].as_str().unwrap().to_string()).or_default();
        for s in common::SYSTEMS {
            points.entry(s.to_string()).or_insert(0.0);
        }
        let winner = match e["preference"].as_str().unwrap() {
            "A" => Some(&e["system_a"]),
            "B" => Some(&e["system_b"]),
            _ => None,
        };
        if let Some(w) = winner {
            *points.get_mut(w.as_str().unwrap()).unwrap() += 1.0;
        }
    }
    let mut borda: BTreeMap<String, f64> = BTreeMap::new();
    for points in per.values() {
        let ranks = competition(points, true);
        for (s, r) in &ranks {
            *borda.entry(s.clone()).or_default() += ranks.values().filter(|o| *o > r).count() as f64;
        }
    }
    assert_eq!(rank_of("PW-Comb"), competition(&borda, true));
}

#[test]
fn empty_annotations_omit_human_columns_with_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), common::Options { annotations: false });
    run(&fx.config, &["score"]);
    let out = run(&fx.config, &["report"]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let warnings: Vec<Value> = stderr.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(warnings.iter().all(|w| w["level"] == "warning"));
    assert!(stderr.contains("human columns are omitted"));
    let header = fs::read_to_string(fx.dir.join("out/rankings.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.contains("AvgROUGEF"));
    for human in ["Fluency", "PIO,", "Direction", "Strength", "PW-Comb", "annotator:"] {
        assert!(!header.contains(human), "{header}");
    }
    assert!(!fx.dir.join("out/bootstrap.json").exists());
    assert!(!fx.dir.join("out/agreement.csv").exists());
}

#[test]
fn missing_config_is_a_structured_error() {
    let out = bin()
        .args(["--config", "/nonexistent/x.toml", "rank"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["command"], "rank");
    assert!(err["message"].as_str().unwrap().contains("reading config"));
}

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start(config: &Path) -> Server {
    let mut child = bin()
        .arg("--config")
        .arg(config)
        .arg("serve")
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_string();
    Server { child, addr }
}

fn http(addr: &str, method: &str, path: &str, body: Option<&Value>) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    let body = body.map(|b| b.to_string()).unwrap_or_default();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let status: u16 = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
    let (head, rest) = raw.split_once("\r\n\r\n").unwrap();
    let body = if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        dechunk(rest)
    } else {
        rest.to_string()
    };
    (status, body)
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    loop {
        let (size, rest) = s.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
}

#[test]
fn serve_without_plan_fails_at_startup() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    let out = bin().arg("--config").arg(&fx.config).arg("serve").output().unwrap();
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["command"], "serve");
    assert!(err["message"].as_str().unwrap().contains("plan"));
}

#[test]
fn serve_end_to_end_and_restart() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = common::write(tmp.path(), Default::default());
    run(&fx.config, &["plan"]);

    let server = start(&fx.config);
    let (status, body) = http(&server.addr, "GET", "/tasks/next?annotator=a1", None);
    assert_eq!(status, 200, "{body}");
    let next: Value = serde_json::from_str(&body).unwrap();
    let task = &next["task"];
    assert_eq!(task["kind"], "facet");
    for s in common::SYSTEMS {
        assert!(!body.contains(s), "system id leaked: {body}");
    }
    let submission = serde_json::json!({
        "annotation_id": "e2e-1",
        "annotator_id": "a1",
        "task_id": task["task_id"],
        "answers": {
            "fluency": "2", "population": "1", "intervention": "2", "outcome": "0",
            "effect_target": "+1", "effect_generated": "+1",
            "strength_target": "2", "strength_generated": "1"
        }
    });
    let (status, body) = http(&server.addr, "POST", "/annotations", Some(&submission));
    assert_eq!(status, 201, "{body}");
    let (status, _) = http(&server.addr, "POST", "/annotations", Some(&submission));
    assert_eq!(status, 200);

    let (_, export) = http(&server.addr, "GET", "/export", None);
    let lines: Vec<Value> = export.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["annotation_id"], "e2e-1");
    assert_eq!(lines[0]["seq"], 1);
    let (_, progress) = http(&server.addr, "GET", "/progress", None);
    let (_, after) = http(&server.addr, "GET", "/tasks/next?annotator=a1", None);
    drop(server);

    let server = start(&fx.config);
    let (_, progress2) = http(&server.addr, "GET", "/progress", None);
    let (_, after2) = http(&server.addr, "GET", "/tasks/next?annotator=a1", None);
    assert_eq!(progress, progress2);
    assert_eq!(after, after2);
    let p: Value = serde_json::from_str(&progress2).unwrap();
    assert_eq!(p["logged"]["facet"], 1);
}
