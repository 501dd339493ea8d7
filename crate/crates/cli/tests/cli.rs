use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sfqsim");
const GOLDEN_TABLE: &str = include_str!("golden/table1.csv");

fn sfqsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("SFQSIM_OUT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn budget_matches_golden_table() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&sfqsim(tmp.path(), &["budget", "--out", "o"]));
    assert_eq!(read(tmp.path().join("o/budget.csv")), GOLDEN_TABLE);
}

#[test]
fn limits_reproduce_device_table() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&sfqsim(tmp.path(), &["limits", "--out", "o"]));
    let csv = read(tmp.path().join("o/limits.csv"));
    let got: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let want = [99.72, 99.72, 99.78, 99.70, 99.86];
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 0.01, "{g} vs {w}");
    }
}

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "prb.json",
        r#"{"params": {"k": 8, "lengths": [1, 20, 60, 150], "bootstrap": 50, "shots": 200}}"#,
    );
    for dir in ["a", "b"] {
        ok(&sfqsim(tmp.path(), &["prb", "--config", &cfg, "--seed", "11", "--out", dir]));
        ok(&sfqsim(tmp.path(), &["rb", "--seed", "11", "--out", dir]));
    }
    for f in ["prb.csv", "prb_purity.csv", "prb.json", "rb.csv", "rb.json"] {
        assert_eq!(read(tmp.path().join("a").join(f)), read(tmp.path().join("b").join(f)), "{f}");
    }
    ok(&sfqsim(tmp.path(), &["rb", "--seed", "12", "--out", "c"]));
    assert_ne!(read(tmp.path().join("a/rb.csv")), read(tmp.path().join("c/rb.csv")));
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&sfqsim(tmp.path(), &["rb", "--seed", "3", "--threads", "1", "--out", "one"]));
    ok(&sfqsim(tmp.path(), &["rb", "--seed", "3", "--threads", "4", "--out", "four"]));
    assert_eq!(read(tmp.path().join("one/rb.json")), read(tmp.path().join("four/rb.json")));
}

#[test]
fn malformed_config_exits_1_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{ \"params\": ");
    let out = sfqsim(tmp.path(), &["rb", "--config", &cfg, "--seed", "1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("o").exists());

    let cfg = write_config(tmp.path(), "unknown.json", r#"{"params": {"nonsense": 3}}"#);
    let out = sfqsim(tmp.path(), &["rb", "--config", &cfg, "--seed", "1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("o/rb.csv").exists());
}

#[test]
fn config_for_other_command_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"command": "prb"}"#);
    let out = sfqsim(tmp.path(), &["rb", "--config", &cfg, "--seed", "1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sfqsim(tmp.path(), &["rb", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!tmp.path().join("o/rb.csv").exists());
}

#[test]
fn existing_outputs_need_force() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&sfqsim(tmp.path(), &["limits", "--out", "o"]));
    let out = sfqsim(tmp.path(), &["limits", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    ok(&sfqsim(tmp.path(), &["limits", "--out", "o", "--force"]));
    // A different command may share the directory.
    ok(&sfqsim(tmp.path(), &["budget", "--out", "o"]));
    assert!(tmp.path().join("o/limits_manifest.json").exists());
    assert!(tmp.path().join("o/budget_manifest.json").exists());
}

#[test]
fn missing_device_file_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sfqsim(tmp.path(), &["limits", "--device", "nope.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("blocker"), "").unwrap();
    let out = sfqsim(tmp.path(), &["limits", "--out", "blocker/o"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"out": "from_config"}"#);
    let run = |args: &[&str], env: Option<&str>| {
        let mut c = Command::new(BIN);
        c.args(args).current_dir(tmp.path()).env_remove("SFQSIM_OUT");
        if let Some(v) = env {
            c.env("SFQSIM_OUT", v);
        }
        ok(&c.output().unwrap());
    };
    run(&["limits"], None);
    assert!(tmp.path().join("sfqsim-out/limits.csv").exists());
    run(&["limits"], Some("from_env"));
    assert!(tmp.path().join("from_env/limits.csv").exists());
    run(&["limits", "--config", &cfg], Some("from_env2"));
    assert!(tmp.path().join("from_config/limits.csv").exists());
    assert!(!tmp.path().join("from_env2").exists());
    run(&["limits", "--config", &cfg, "--out", "from_flag"], Some("from_env2"));
    assert!(tmp.path().join("from_flag/limits.csv").exists());
}

#[test]
fn manifest_records_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&sfqsim(tmp.path(), &["rb", "--seed", "5", "--out", "o"]));
    let m: serde_json::Value = serde_json::from_str(&read(tmp.path().join("o/rb_manifest.json"))).unwrap();
    assert_eq!(m["command"], "rb");
    assert_eq!(m["seed"], 5);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.iter().any(|o| o.ends_with("rb.csv")));
    assert!(m["params"]["k"].as_u64().is_some());
}

#[test]
fn qpfit_recovers_synthetic_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&sfqsim(tmp.path(), &["qpfit", "--out", "o"]));
    let v: serde_json::Value = serde_json::from_str(&read(tmp.path().join("o/qpfit.json"))).unwrap();
    assert_eq!(v["selected_model"], "double");
    let f = &v["fit"];
    assert!((f["n_qp"].as_f64().unwrap() / 1.5 - 1.0).abs() < 0.01);
    assert!((f["t_qp"].as_f64().unwrap() / 20.0 - 1.0).abs() < 0.01);
    assert!((f["t_r"].as_f64().unwrap() / 60.0 - 1.0).abs() < 0.01);
}

#[test]
fn qpfit_reads_a_data_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("t_us,population\n");
    for i in 0..80 {
        let t = i as f64 * 2.5;
        csv += &format!("{t},{}\n", (-t / 35.0).exp());
    }
    std::fs::write(tmp.path().join("decay.csv"), csv).unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"params": {"data": "decay.csv"}}"#);
    ok(&sfqsim(tmp.path(), &["qpfit", "--config", &cfg, "--out", "o"]));
    let v: serde_json::Value = serde_json::from_str(&read(tmp.path().join("o/qpfit.json"))).unwrap();
    assert_eq!(v["selected_model"], "single");
}

#[test]
fn xtalk_reports_selected_channel_and_margin() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "x.json",
        r#"{"params": {"rates_mhz": [[2.0, 0.0356], [0.0356, 2.0]],
            "windows": [[0.9, 1.1], [0.8, 1.2]], "select_bits": ["-"]}}"#,
    );
    ok(&sfqsim(tmp.path(), &["xtalk", "--config", &cfg, "--out", "o"]));
    let v: serde_json::Value = serde_json::from_str(&read(tmp.path().join("o/xtalk.json"))).unwrap();
    assert_eq!(v["selected_channel"], 1);
    let csv = read(tmp.path().join("o/xtalk.csv"));
    let off: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((off - 20.0 * (0.0356f64 / 2.0).log10()).abs() < 1e-9);
}
