use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "sim": {
    "n_events": 300,
    "n_users": 6,
    "n_communities": 2,
    "n_categories": 4,
    "venues": { "kind": "uniform", "count": 30 },
    "region": { "t_end": 10000.0, "x_min": 0.0, "x_max": 1.0, "y_min": 0.0, "y_max": 1.0 }
  },
  "model": { "n_communities": 2, "optim": { "learning_rate": 1.0, "epochs": 12 } },
  "ks": [1, 5],
  "k_cats": [2],
  "thresholds": [0.0, 0.5]
}"#;

fn geocomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geocomm")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let mut config: serde_json::Value = serde_json::from_str(SMALL).unwrap();
    let extra: serde_json::Value = serde_json::from_str(extra).unwrap();
    for (k, v) in extra.as_object().unwrap() {
        config[k] = v.clone();
    }
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stdout: {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_recover_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{}");
    let mut reports = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "2")] {
        let out_dir = dir.path().join(name);
        let out = geocomm(&["synth-recover", "--config", &config, "--deterministic", "--threads", threads, "--output-dir", out_dir.to_str().unwrap()]);
        assert_ok(&out);
        assert!(String::from_utf8_lossy(&out.stdout).contains("RelErr(A)"));
        reports.push(out_dir);
    }
    for file in ["report.json", "recovery.json", "topk.csv", "trace.csv", "true_params.json", "fitted_params.json"] {
        let a = std::fs::read(reports[0].join(file)).unwrap();
        let b = std::fs::read(reports[1].join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn real_data_commands_chain_on_a_simulated_trace() {
    let dir = tempfile::tempdir().unwrap();
    let sim_dir = dir.path().join("sim");
    let config = write_config(dir.path(), "{}");
    assert_ok(&geocomm(&["simulate", "--config", &config, "--output-dir", sim_dir.to_str().unwrap()]));

    let trace = std::fs::read_to_string(sim_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    let column = lines.next().unwrap().split(',').position(|c| c == "category").unwrap();
    let mut labels: Vec<String> = lines.map(|l| l.split(',').nth(column).unwrap().to_string()).collect();
    labels.sort();
    labels.dedup();
    let embeddings: String = std::iter::once(format!("{} 2\n", labels.len()))
        .chain(labels.iter().enumerate().map(|(k, l)| format!("{l} {} {}\n", k + 1, (k * k) % 3)))
        .collect();
    std::fs::write(dir.path().join("emb.txt"), embeddings).unwrap();

    let config = write_config(dir.path(), r#"{"trace": "sim/trace.csv", "embeddings": "emb.txt", "output_dir": "run"}"#);
    for command in ["fit", "predict", "eval-communities", "export-network"] {
        assert_ok(&geocomm(&[command, "--config", &config, "--deterministic"]));
    }
    let run = dir.path().join("run");
    for file in ["model_full.json", "fit_summary.csv", "predictions.csv", "communities.csv", "influence_edges.csv", "forest_t0.50.graphml", "forest_t0.00.csv"] {
        assert!(run.join(file).exists(), "{file} missing");
    }
    let predictions = std::fs::read_to_string(run.join("predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 1 + 4 * 2);
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write_config(dir.path(), r#"{"trace": "nope.csv"}"#);
    let out = geocomm(&["fit", "--config", &missing]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let no_trace = write_config(dir.path(), "{}");
    let out = geocomm(&["fit", "--config", &no_trace, "--output-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(dir.path().join("bad.json"), "{\"ks\": [0]}").unwrap();
    let out = geocomm(&["simulate", "--config", dir.path().join("bad.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(geocomm(&["no-such-command"]).status.code(), Some(2));
}
