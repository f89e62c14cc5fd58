use std::path::Path;
use std::process::{Command, Output};

fn nahm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nahm")).args(args).env_remove("NAHM_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_documents_exit_codes() {
    let o = nahm(&["--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for line in ["0  ok", "2  configuration error", "10  input is not IT1", "11  singular", "12  theorem-violation", "13  eigensolver"] {
        assert!(text.contains(line), "{line}");
    }
    for sub in ["field", "index", "transform", "verify-asd", "invert", "irred", "coh", "k3", "oracle", "report"] {
        assert!(text.contains(sub), "{sub}");
    }
}

#[test]
fn report_writes_identical_outputs_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("run");
    let names = ["report.json", "eigenvalues.csv", "residuals.csv", "invariants.csv", "wilson.csv"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = nahm(&["report", "--flux", "1", "--lattice", "4", "--grid", "3", "--out", a.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(names.map(|n| std::fs::read(a.join(n)).unwrap()));
    }
    for (i, name) in names.iter().enumerate() {
        assert_eq!(runs[0][i], runs[1][i], "{name}");
    }
    assert!(a.join("timings.json").exists());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["spectral"]["solver"]["seed"], 7);
    assert!(report["tolerances"]["tau_ker"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_kernel_threshold_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "schema = 1\nlattice = 8\ngrid = 6\n[input]\nkind = \"constant_flux\"\nk = 1\n[spectral]\ntau_ker = 0.0\n",
    );
    let o = nahm(&["report", "--config", &cfg]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema = 1\nlattice = 4\ngrid = 3\nspeed = 9\n[input]\nkind = \"constant_flux\"\nk = 1\n");
    assert_eq!(code(&nahm(&["index", "--config", &cfg])), 2);
}

#[test]
fn flat_trivial_input_exits_not_it1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schema = 1\nlattice = 4\ngrid = 3\n[input]\nkind = \"trivial\"\nrank = 1\n");
    let o = nahm(&["index", "--config", &cfg]);
    assert_eq!(code(&o), 10);
    let v = stdout_json(&o);
    assert!(v["failures"].as_array().unwrap().iter().any(|f| f == &serde_json::json!([0, 0, 0, 0])));
    assert_eq!(code(&nahm(&["report", "--config", &cfg])), 10);
}

#[test]
fn thread_budget_zero_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_nahm"))
        .args(["index", "--flux", "1", "--lattice", "4", "--grid", "2"])
        .env("NAHM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_nahm"))
        .args(["index", "--flux", "1", "--lattice", "4", "--grid", "2", "--threads", "1"])
        .env("NAHM_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn coh_and_k3_are_exact() {
    let v = stdout_json(&nahm(&["coh", "--flux", "2"]));
    assert_eq!(v["transform"]["rank"], 4);
    assert_eq!(v["transform"]["ch2"], -1);
    assert_eq!(v["euler_characteristic"], -4);

    let mut h = vec!["0"; 22];
    h[0] = "1";
    h[1] = "1";
    let mut l = vec!["0"; 22];
    l[2] = "2";
    l[3] = "-3";
    let (h, l) = (h.join(","), l.join(","));
    let v = stdout_json(&nahm(&["k3", "--h", &h, "--l", &l, "--c2", "-1"]));
    assert_eq!(v["conditions"]["all_hold"], true);
    assert_eq!(v["moduli_dimension"], 2);
    assert_eq!(v["l_square"], -12);
}

#[test]
fn field_and_transform_save_binaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&nahm(&["field", "--flux", "1", "--lattice", "4", "--out", out])), 0);
    let o = nahm(&["transform", "--flux", "1", "--lattice", "4", "--grid", "3", "--out", out]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["rank"], 1);
    assert!(dir.path().join("field.bin").exists() && dir.path().join("bundle.bin").exists());
}
