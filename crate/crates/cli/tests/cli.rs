use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const HYDROGEN: &str = "\
# small hydrogen run
z = 1
kappa = -1
n_intervals = 200
domain_end = 60
levels = 3
residual_samples = 2
";

fn hpcloud(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("run.cfg");
    if !config.exists() {
        fs::write(&config, HYDROGEN).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_hpcloud"))
        .arg("--config")
        .arg(&config)
        .args(args)
        .env("HPCLOUD_OUTPUT_DIR", dir.join("out"))
        .output()
        .unwrap()
}

fn table_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn solve_writes_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcloud(dir.path(), &["solve"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/solve.csv")).unwrap();
    assert!(csv.contains("# z = 1\n"));
    assert!(csv.contains("# method = cpg\n"));
    let rows = table_rows(&csv);
    assert_eq!(rows[0], "level,computed_shifted,exact_shifted,relative_error,flag");
    let first: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[4], "genuine");
    let computed: f64 = first[1].parse().unwrap();
    assert!((computed + 0.50000665659).abs() < 1e-3);
    // 13 significant digits: "-0." followed by 13 digits
    assert_eq!(first[1].len(), 16, "{}", first[1]);

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/solve.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["system"]["kappa"], -1);
    assert_eq!(json["dofs"], 398);
    assert_eq!(json["report"]["matches"].as_array().unwrap().len(), 3);
}

#[test]
fn solve_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();
    assert!(hpcloud(dir.path(), &["solve"]).status.success());
    let first = (read("solve.csv"), read("solve.json"));
    assert!(hpcloud(dir.path(), &["solve"]).status.success());
    assert!(first.0 == read("solve.csv"), "solve.csv differs between runs");
    assert!(first.1 == read("solve.json"), "solve.json differs between runs");
}

#[test]
fn zero_levels_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcloud(dir.path(), &["solve", "levels=0"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("out/solve.csv")).unwrap();
    assert_eq!(table_rows(&csv), vec!["level,computed_shifted,exact_shifted,relative_error,flag"]);
    assert!(csv.contains("# levels = 0\n"));
}

#[test]
fn overrides_beat_environment() {
    let dir = tempfile::tempdir().unwrap();
    let elsewhere = dir.path().join("elsewhere");
    let arg = format!("output_path={}", elsewhere.display());
    assert!(hpcloud(dir.path(), &["solve", "levels=1", &arg]).status.success());
    assert!(elsewhere.join("solve.csv").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["solve", "nu=abc"],
        vec!["solve", "unknown_key=1"],
        vec!["solve", "quadrature_factor=3"],
        vec!["solve", "nucleus=extended", "atomic_weight=0"],
        vec!["sweep", "--vary", "z", "--values", "1,2"],
        vec!["convergence", "--n-values", "200,400"],
    ] {
        let out = hpcloud(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = hpcloud(dir.path(), &["solve", "nu=abc"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`nu`"));
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcloud(dir.path(), &["solve", "nu=1.1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("singular moment"));
}

#[test]
fn sweep_is_long_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcloud(dir.path(), &["sweep", "--vary", "method", "--values", "galerkin,cpg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/sweep_method.csv")).unwrap();
    assert!(csv.contains("# sweep = method\n"));
    let rows = table_rows(&csv);
    assert_eq!(rows[0], "param_value,level,computed,exact,rel_error");
    let keys: Vec<(String, String)> = rows[1..]
        .iter()
        .map(|r| {
            let f: Vec<&str> = r.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    let expected: Vec<(String, String)> = ["galerkin", "cpg"]
        .iter()
        .flat_map(|m| (1..=3).map(move |l| (m.to_string(), l.to_string())))
        .collect();
    assert_eq!(keys, expected);
}

#[test]
fn convergence_writes_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcloud(dir.path(), &["convergence", "--n-values", "200,240,280", "levels=2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap();
    let rows = table_rows(&csv);
    assert_eq!(rows[0], "level,rate");
    assert_eq!(rows.len(), 3);
    for row in &rows[1..] {
        let rate: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(rate.is_finite() && rate > 0.0, "{row}");
    }
}

#[test]
fn dump_matrices_writes_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpcloud(dir.path(), &["dump-matrices", "method=galerkin"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mdir = dir.path().join("out/matrices");
    for name in ["M000", "M010", "M001", "M100", "M110", "M101", "M000V", "M100V", "A", "B", "script_A", "script_B"] {
        let text = fs::read_to_string(mdir.join(format!("{name}.txt"))).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with(&format!("# {name} ")), "{header}");
    }
    let m000 = fs::read_to_string(mdir.join("M000.txt")).unwrap();
    assert!(m000.starts_with("# M000 199 199\n"));
    let tau = fs::read_to_string(mdir.join("tau.csv")).unwrap();
    assert_eq!(table_rows(&tau).len(), 1 + 199);
}
