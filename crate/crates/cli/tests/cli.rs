use std::process::{Command, Output};

fn windtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windtree"))
        .args(args)
        .env_remove("WINDTREE_WORKERS")
        .output()
        .expect("run windtree")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn corridors_lists_four_open_corridors() {
    let o = windtree(&["corridors", "--theta-tan", "1/1", "--a", "0.35355339", "--r", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 4, "{out}");
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    let types: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(types.iter().filter(|t| **t == "II").count(), 2);
}

#[test]
fn corridors_json_counts_match() {
    let o = windtree(&["corridors", "--preset", "tail", "--json", "--max-denom", "200"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["open_corridors"], 4);
    assert_eq!(v["regime"], "InfiniteWithTypeII");
}

#[test]
fn trapping_configuration_exits_2() {
    let o = windtree(&["validate", "--theta-tan", "1/1", "--a", "0.8", "--r", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("TrappingConfiguration"));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--allow-overlap"), "{err}");

    let o = windtree(&["validate", "--theta-tan", "1/1", "--a", "0.8", "--r", "0.1", "--allow-overlap"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn valid_config_passes_validation() {
    let o = windtree(&["validate", "--theta-tan", "1/1", "--a", "0.4", "--r", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn config_errors_exit_2() {
    // Missing seed on a statistics command.
    assert_eq!(windtree(&["tail", "--preset", "tail", "--n", "10"]).status.code(), Some(2));
    // Unknown preset, malformed tangent, missing dimensions.
    assert_eq!(windtree(&["tail", "--preset", "nope", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(windtree(&["validate", "--theta-tan", "x/2", "--a", "0.4", "--r", "0.1"]).status.code(), Some(2));
    assert_eq!(windtree(&["validate", "--theta-tan", "1/1", "--r", "0.1"]).status.code(), Some(2));
    assert_eq!(windtree(&["msd", "--preset", "tail", "--seed", "1", "--k", "0"]).status.code(), Some(2));
    assert_eq!(windtree(&["report", "--seed", "1", "--criteria", "14"]).status.code(), Some(2));
}

#[test]
fn insufficient_data_exits_3() {
    let o = windtree(&["corr", "--preset", "tail", "--seed", "1", "--m", "10", "--jmax", "100"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn trace_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let o = windtree(&["trace", "--preset", "canonical", "--seed", "7", "--n", "20", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,cell_x,cell_y,x,y,t,s,phi,end_kind,corridor_class");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 21);
    let mut last_t = -1.0;
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 10);
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
        let t: f64 = r[5].parse().unwrap();
        assert!(t > last_t);
        last_t = t;
        assert!(r[8] == "flat" || r[8] == "dispersing");
    }
}

#[test]
fn trace_from_explicit_state() {
    let o = windtree(&["trace", "--preset", "tail", "--s", "0.1", "--phi", "-0.3", "--n", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 7);
    assert_eq!(windtree(&["trace", "--preset", "tail", "--n", "5"]).status.code(), Some(2));
}

fn run_with_workers(args: &[&str], workers: &str) -> (Vec<u8>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let mut full: Vec<&str> = args.to_vec();
    let csv_s = csv.to_str().unwrap().to_owned();
    full.extend(["--json", "--out", &csv_s, "--workers", workers]);
    let o = windtree(&full);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    (o.stdout, std::fs::read(&csv).unwrap())
}

#[test]
fn outputs_identical_across_worker_counts() {
    let cases: [&[&str]; 4] = [
        &["tail", "--preset", "tail", "--n", "40000", "--seed", "42", "--max-len", "1000"],
        &["moment", "--preset", "tail", "--n", "30000", "--seed", "5", "--max-len", "1000"],
        &["msd", "--preset", "lorentz", "--k", "30", "--n", "200", "--seed", "9"],
        &["ctime", "--preset", "canonical", "--k", "20", "--t-max", "300", "--seed", "3"],
    ];
    for args in cases {
        let a = run_with_workers(args, "1");
        let b = run_with_workers(args, "4");
        assert_eq!(a, b, "{args:?}");
        assert!(!a.0.is_empty() && !a.1.is_empty());
    }
}

#[test]
fn workers_env_fallback() {
    let o = Command::new(env!("CARGO_BIN_EXE_windtree"))
        .args(["msd", "--preset", "canonical", "--k", "5", "--n", "50", "--seed", "1"])
        .env("WINDTREE_WORKERS", "3")
        .output()
        .unwrap();
    let p = windtree(&["msd", "--preset", "canonical", "--k", "5", "--n", "50", "--seed", "1", "--workers", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(o.stdout, p.stdout);
}

#[test]
fn tail_json_reports_beta_per_class() {
    let o = windtree(&["tail", "--preset", "tail", "--n", "100000", "--seed", "42", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 42);
    for class in ["horizontal", "vertical", "oblique_plus", "oblique_minus"] {
        assert!(v["fits"][class].get("beta").is_some(), "{class}");
    }
    let beta = v["fits"]["axis"]["beta"].as_f64().unwrap();
    assert!(beta > 1.0 && beta < 3.0, "{beta}");
}

#[test]
fn csv_floats_round_trip() {
    let o = windtree(&["msd", "--preset", "canonical", "--k", "4", "--n", "30", "--seed", "2"]);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "n,msd,stderr,k_samples");
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        let x: f64 = f[1].parse().unwrap();
        assert_eq!(format!("{x:.16e}"), f[1]);
    }
}

#[test]
fn report_emits_one_document() {
    let o = windtree(&["report", "--seed", "11", "--quick", "--criteria", "1,2,3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let crit = v["criteria"].as_array().unwrap();
    assert_eq!(crit.len(), 3);
    assert_eq!(v["passed"], 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().filter(|l| l.starts_with("criterion")).count(), 3);
}
