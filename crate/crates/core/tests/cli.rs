use std::path::Path;
use std::process::{Command, Output};

use paircd::benchmark::{gen_standalone, StandaloneFamily, StandaloneSpec};
use paircd::data::{save_csv, IncompleteDataset};

fn paircd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paircd"))
        .args(args)
        .env_remove("PAIRCD_SEED")
        .output()
        .unwrap()
}

fn write_data(dir: &Path) -> String {
    let spec = StandaloneSpec {
        family: StandaloneFamily::LinearGaussian,
        signal: 0.5,
        n: 200,
        d: 2,
        seed: 3,
    };
    let g = gen_standalone(&spec).unwrap();
    let n = g.values.rows();
    let p = g.values.cols();
    let mut mask = vec![true; n * p];
    for i in (0..n).step_by(4) {
        mask[2 * n + i] = false;
    }
    let ds = IncompleteDataset::new(g.values, mask, g.names).unwrap();
    let path = dir.join("data.csv");
    save_csv(&ds, &path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn ci_test_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let args = |o: &str| {
        vec![
            "ci-test", "--data", &data, "--z", "Z", "--y", "Y", "--variant", "fast", "--n-trees", "10", "--m", "2",
            "--seed", "5", "--out", o,
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    let (a, b) = (out("a.json"), out("b.json"));
    for o in [&a, &b] {
        let r = paircd(&args(o).iter().map(String::as_str).collect::<Vec<_>>());
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    let p = v["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(v["reject"].as_bool().unwrap(), p < 0.05);
}

#[test]
fn seed_env_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let common = ["ci-test", "--data", &data, "--z", "0", "--y", "1", "--variant", "fast", "--n-trees", "5", "--m", "2"];
    let mut with_flag: Vec<&str> = common.to_vec();
    with_flag.extend(["--seed", "42"]);
    let a = paircd(&with_flag);
    let b = Command::new(env!("CARGO_BIN_EXE_paircd"))
        .args(common)
        .env("PAIRCD_SEED", "42")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(paircd(&["--help"]).status.code(), Some(0));
    assert_eq!(paircd(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(paircd(&["ci-test", "--z", "0", "--y", "1"]).status.code(), Some(1));
    let missing = paircd(&["ci-test", "--data", "/nonexistent/x.csv", "--z", "0", "--y", "1"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let bad_alpha = paircd(&["ci-test", "--data", &data, "--z", "0", "--y", "1", "--alpha", "1.5"]);
    assert_eq!(bad_alpha.status.code(), Some(1));
    let bad_col = paircd(&["ci-test", "--data", &data, "--z", "nope", "--y", "1"]);
    assert_ne!(bad_col.status.code(), Some(0));
}

#[test]
fn discover_writes_graph_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let r = paircd(&["discover", "--data", &data, "--method", "fz_rubin", "--seed", "1"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["method"], "fz_rubin");
    assert!(v["n_tests"].as_u64().unwrap() > 0);
}

#[test]
fn benchmark_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{"kind": "graph", "methods": ["fz_rubin", "testwise"], "dgps": ["linear"],
            "mechanisms": ["mar"], "sizes": [200], "dims": [5], "replicates": 2, "seed": 3}"#,
    )
    .unwrap();
    let plan = plan.to_str().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let r = paircd(&["benchmark", "--plan", plan, "--out", out.to_str().unwrap(), "--deterministic"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 1 + 4);

    // resuming a finished run adds nothing
    let r = paircd(&["benchmark", "--plan", plan, "--out", a.to_str().unwrap(), "--deterministic"]);
    assert!(r.status.success());
    assert_eq!(std::fs::read_to_string(&a).unwrap(), text);

    let s = paircd(&["summarize", "--results", a.to_str().unwrap()]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let table = String::from_utf8(s.stdout).unwrap();
    assert!(table.contains("fz_rubin") && table.contains("testwise"), "{table}");
}

#[test]
fn bad_plan_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(&plan, r#"{"kind": "graph", "methods": [], "dgps": ["linear"]}"#).unwrap();
    let out = dir.path().join("o.csv");
    let r = paircd(&["benchmark", "--plan", plan.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
}
