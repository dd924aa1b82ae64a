use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rankshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankshift")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let out_dir = dir.to_str().unwrap();
    let mut args = vec![
        "synth", "--models", "6", "--classes", "4", "--samples", "400", "--seed", "3", "--out-dir", out_dir,
    ];
    args.extend_from_slice(extra);
    let out = rankshift(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_then_correlate() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("pool"), &[]);
    assert!(manifest.ends_with("manifest.json"));
    let report = dir.path().join("out/report.json");
    let out = rankshift(&["correlate", "--manifest", &manifest, "--measures", "all", "--metric", "accuracy", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let reports = json(&report);
    let names: Vec<&str> = reports.as_array().unwrap().iter().map(|r| r["measure"].as_str().unwrap()).collect();
    // the synthetic manifest has a class distribution and an ID split but no reference predictions
    assert_eq!(names, ["softmaxcorr", "maxpred", "softgap", "atc_mc", "aol", "certainty", "diversity"]);
    for r in reports.as_array().unwrap() {
        assert_eq!(r["scores"].as_object().unwrap().len(), 6);
        assert_eq!(r["ranking"].as_array().unwrap().len(), 6);
        assert!(r["spearman"].is_f64());
        assert!(r["weighted_kendall"].is_f64());
        assert!(r["pearson"].is_f64());
        assert!(r["fit"]["slope"].is_f64() && r["fit"]["intercept"].is_f64());
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let manifest = synth(&dir.path().join(run), &["--reference", "best", "--bias", "0.5"]);
        let mut bytes = Vec::new();
        for (cmd, ext) in [("rank", "json"), ("correlate", "csv")] {
            let out = dir.path().join(format!("{run}-{cmd}.{ext}"));
            let status = rankshift(&[cmd, "--manifest", &manifest, "--probit", "--format", ext, "--out", out.to_str().unwrap()]);
            assert_eq!(code(&status), 0, "{}", String::from_utf8_lossy(&status.stderr));
            bytes.push(fs::read(&out).unwrap());
        }
        let sens = dir.path().join(format!("{run}-sens.json"));
        let status = rankshift(&[
            "sensitivity", "--manifest", &manifest, "--measure", "softmaxcorr", "--fractions", "0.1,0.5,1.0",
            "--runs", "3", "--seed", "7", "--out", sens.to_str().unwrap(),
        ]);
        assert_eq!(code(&status), 0, "{}", String::from_utf8_lossy(&status.stderr));
        bytes.push(fs::read(&sens).unwrap());
        bytes.push(fs::read(dir.path().join(run).join("manifest.json")).unwrap());
        outputs.push(bytes);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn rank_probit_keeps_ranking() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("pool"), &[]);
    let raw = dir.path().join("raw.json");
    let scaled = dir.path().join("scaled.json");
    for (out, flag) in [(&raw, None), (&scaled, Some("--probit"))] {
        let mut args = vec!["rank", "--manifest", &manifest, "--measures", "softmaxcorr,maxpred", "--out", out.to_str().unwrap()];
        args.extend(flag);
        assert_eq!(code(&rankshift(&args)), 0);
    }
    let (raw, scaled) = (json(&raw), json(&scaled));
    for (a, b) in raw.as_array().unwrap().iter().zip(scaled.as_array().unwrap()) {
        assert_eq!(a["ranking"], b["ranking"]);
        assert_ne!(a["scores"], b["scores"]);
        assert!(a.get("spearman").is_none());
    }
}

#[test]
fn correlate_probit_keeps_rank_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("pool"), &[]);
    let raw = dir.path().join("raw.json");
    let scaled = dir.path().join("scaled.json");
    for (out, flag) in [(&raw, None), (&scaled, Some("--probit"))] {
        let mut args = vec!["correlate", "--manifest", &manifest, "--out", out.to_str().unwrap()];
        args.extend(flag);
        assert_eq!(code(&rankshift(&args)), 0);
    }
    let (raw, scaled) = (json(&raw), json(&scaled));
    for (a, b) in raw.as_array().unwrap().iter().zip(scaled.as_array().unwrap()) {
        for key in ["spearman", "weighted_kendall"] {
            let (x, y) = (a[key].as_f64().unwrap(), b[key].as_f64().unwrap());
            assert!((x - y).abs() < 1e-12, "{key}: {x} vs {y}");
        }
    }
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let out = out.to_str().unwrap();

    let missing = rankshift(&["rank", "--manifest", "/nonexistent/manifest.json", "--out", out]);
    assert_eq!(code(&missing), 2);

    let manifest = synth(&dir.path().join("pool"), &["--id-samples", "0"]);
    let side = rankshift(&["correlate", "--manifest", &manifest, "--measures", "atc_mc", "--out", out]);
    assert_eq!(code(&side), 2);
    assert!(String::from_utf8_lossy(&side.stderr).contains("atc_mc"));

    let unknown = rankshift(&["rank", "--manifest", &manifest, "--measures", "nope", "--out", out]);
    assert_eq!(code(&unknown), 2);

    let infeasible = rankshift(&["synth", "--models", "3", "--classes", "1", "--samples", "10", "--out-dir", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&infeasible), 2);
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("class"));

    let bad_format = rankshift(&["rank", "--manifest", &manifest, "--format", "xml", "--out", out]);
    assert_eq!(code(&bad_format), 2);

    fs::write(dir.path().join("bad.csv"), "0.5,0.9\n").unwrap();
    fs::write(dir.path().join("ok.csv"), "0.5,0.5\n").unwrap();
    fs::write(
        dir.path().join("m.json"),
        r#"{"models":[{"id":"a","path":"bad.csv","format":"csv"},{"id":"b","path":"ok.csv","format":"csv"}]}"#,
    )
    .unwrap();
    let invalid = rankshift(&["rank", "--manifest", dir.path().join("m.json").to_str().unwrap(), "--measures", "maxpred", "--out", out]);
    assert_eq!(code(&invalid), 2);
    assert!(String::from_utf8_lossy(&invalid.stderr).contains("bad.csv"));
}

#[test]
fn numeric_degeneracy_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "0.5,0.5\n0.5,0.5\n").unwrap();
    fs::write(dir.path().join("b.csv"), "1,0\n1,0\n").unwrap();
    fs::write(dir.path().join("y.txt"), "0\n1\n").unwrap();
    let manifest = dir.path().join("m.json");
    fs::write(
        &manifest,
        r#"{"models":[{"id":"a","path":"a.csv","format":"csv"},{"id":"b","path":"b.csv","format":"csv"}],"labels":"y.txt"}"#,
    )
    .unwrap();
    // both models are equally accurate on these labels, so the sensitivity
    // ground truth is constant
    let out = dir.path().join("s.json");
    let status = rankshift(&[
        "sensitivity", "--manifest", manifest.to_str().unwrap(), "--measure", "maxpred", "--fractions", "1.0",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&status), 3, "{}", String::from_utf8_lossy(&status.stderr));
}

#[test]
fn csv_report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(&dir.path().join("pool"), &[]);
    let out = dir.path().join("r.csv");
    let status = rankshift(&["correlate", "--manifest", &manifest, "--measures", "softmaxcorr", "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&status), 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("measure,model_id,score,rank,ground_truth,spearman,weighted_kendall,pearson,slope,intercept,error")
    );
    assert_eq!(lines.count(), 6);
}
