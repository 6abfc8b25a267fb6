use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rllim(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rllim"));
    cmd.args(args).env_remove("RLLIM_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_config(dir: &Path, kind: &str, n: usize) -> PathBuf {
    let text = format!(
        r#"{{
  "dataset": {{"source": "synthetic", "kind": "{kind}", "train_size": {n}, "probe_size": 100, "test_size": 40}},
  "pipeline": {{"train": {{"iterations": 20, "train_batch": 64, "probe_batch": 8,
                          "arch": {{"hidden_layers": 1, "hidden_units": 8, "pair_difference": true}}}}}},
  "lime": {{"perturbations": 300}},
  "lambda_grid": [0.5],
  "runs": 1,
  "seed": 4
}}"#
    );
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_bench_smoke_emits_all_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "syn1", 500);
    let out = dir.path().join("bench");
    let stdout = ok(&rllim(&["synth-bench", "--config", s(&cfg), "--out", s(&out)], &[]));
    assert!(stdout.contains("deciles"));
    let csv = std::fs::read_to_string(out.join("deciles.csv")).unwrap();
    assert!(csv.starts_with("decile,mean_awd,ci_low,ci_high,method\n"));
    for m in ["rl-lim", "lime", "silo", "maple"] {
        assert!(csv.lines().filter(|l| l.ends_with(&format!(",{m}"))).count() == 10, "{m}");
    }
    assert!(out.join("summary.json").is_file());
    assert!(out.join("curves/run_0.csv").is_file());
    assert!(out.join("config.json").is_file());
}

#[test]
fn explain_requires_checkpoint_and_preserves_row_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "syn2", 200);
    let missing = dir.path().join("nothing");
    let out = rllim(
        &["explain", "--config", s(&cfg), "--model", s(&missing), "--out", s(&dir.path().join("e"))],
        &[],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("estimator.json"));

    let model = dir.path().join("model");
    ok(&rllim(&["train", "--config", s(&cfg), "--out", s(&model)], &[]));
    for f in ["config.json", "estimator.json", "blackbox.json", "learning_curve.csv", "stage_log.json"] {
        assert!(model.join(f).is_file(), "{f}");
    }

    let names: Vec<String> = (1..=11).map(|k| format!("X{k}")).collect();
    let mut rows = names.join(",") + "\n";
    for i in 0..100 {
        let v: Vec<String> = (0..11).map(|k| (((i * 7 + k * 3) % 11) as f64 / 5.0 - 1.0).to_string()).collect();
        rows += &(v.join(",") + "\n");
    }
    let input = dir.path().join("rows.csv");
    std::fs::write(&input, rows).unwrap();
    let e = dir.path().join("explained");
    ok(&rllim(
        &["explain", "--config", s(&cfg), "--model", s(&model), "--input", s(&input), "--out", s(&e)],
        &[],
    ));
    let text = std::fs::read_to_string(e.join("explanations.csv")).unwrap();
    let ids: Vec<usize> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ids, (0..100).collect::<Vec<_>>());
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"runs": 0, "lambda_grid": [], "methods": []}"#).unwrap();
    let out = rllim(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for needle in ["runs", "lambda_grid", "methods"] {
        assert!(err.contains(needle), "{err}");
    }
    assert!(!dir.path().join("o").exists());
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "syn1", 150);
    let root = dir.path().join("root");
    ok(&rllim(&["train", "--config", s(&cfg)], &[("RLLIM_OUTPUT_ROOT", &root)]));
    assert!(root.join("train/estimator.json").is_file());
    let leftovers: Vec<_> = std::fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(leftovers, vec!["train".to_string()]);
}

#[test]
fn evaluate_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "syn3", 150);
    let ev = dir.path().join("ev");
    ok(&rllim(
        &["evaluate", "--config", s(&cfg), "--methods", "rl-lim,silo", "--out", s(&ev)],
        &[],
    ));
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ev.join("metrics.json")).unwrap()).unwrap();
    let methods: Vec<&str> = reports.as_array().unwrap().iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["rl-lim", "silo"]);
    assert_eq!(reports[0]["awd_norm"], "l1");
    assert_eq!(reports[0]["awd_deciles"]["rows"].as_array().unwrap().len(), 10);
    let saved = std::fs::read_to_string(ev.join("config.json")).unwrap();
    assert!(saved.contains("\"silo\""));

    let sw = dir.path().join("sw");
    ok(&rllim(&["sweep", "--config", s(&cfg), "--out", s(&sw)], &[]));
    let csv = std::fs::read_to_string(sw.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0.5,") && lines[1].ends_with(",true"));
}

#[test]
fn subgroup_report_from_hand_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    std::fs::write(
        &csv,
        "instance_id,method,local_prediction,blackbox_prediction,intercept,coef:a,coef:b,x:a,x:b\n\
         0,rl-lim,0,0,0,1,2,0,0\n1,rl-lim,0,0,0,-3,0,1,0\n",
    )
    .unwrap();
    let groups = dir.path().join("g.json");
    std::fs::write(
        &groups,
        r#"{"groups": [{"label": "all"}, {"label": "nobody", "when": [{"feature": "a", "op": "gt", "value": 5}]}]}"#,
    )
    .unwrap();
    let out = dir.path().join("sg");
    ok(&rllim(
        &["subgroup-report", "--explanations", s(&csv), "--groups", s(&groups), "--out", s(&out)],
        &[],
    ));
    assert_eq!(
        std::fs::read_to_string(out.join("subgroups.csv")).unwrap(),
        "group,rows,empty,a,b\nall,2,false,2,1\nnobody,0,true,,\n"
    );
}
