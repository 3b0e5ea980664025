//! Commands behind the `hpcloud` binary.
//!
//! Every table starts with `#`-prefixed lines echoing the effective
//! configuration, so outputs are self-describing. Numbers carry 13
//! significant digits.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hpcloud_core::assembly::write_triplets;
use hpcloud_core::config::discretize;
use hpcloud_core::{convergence_rate, run_solve, Error, RunConfig, SolveOutcome};

/// Environment variable overriding the output directory of the config file.
pub const OUTPUT_DIR_ENV: &str = "HPCLOUD_OUTPUT_DIR";

/// Parameters accepted by `sweep`.
pub const SWEEP_PARAMS: &[&str] = &["nu", "eps", "n_intervals", "quadrature_factor", "method"];

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Builds the effective configuration: defaults, then the config file, then
/// the output-directory variable, then `key=value` overrides.
pub fn load_config(file: Option<&Path>, env_output: Option<&str>, overrides: &[String]) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    if let Some(dir) = env_output.filter(|d| !d.is_empty()) {
        cfg.output_path = PathBuf::from(dir);
    }
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Formats `v` with 13 significant digits, positionally where that stays
/// readable.
pub fn fmt13(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.12e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..15).contains(&exp) {
        format!("{:.*}", (12 - exp).max(0) as usize, v)
    } else {
        sci
    }
}

fn config_header(cfg: &RunConfig) -> String {
    cfg.to_text().lines().map(|l| format!("# {l}\n")).collect()
}

/// Solve table: positive-branch values up to the last matched level.
pub fn solve_csv(out: &SolveOutcome) -> CliResult<String> {
    let report = &out.report;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "computed_shifted", "exact_shifted", "relative_error", "flag"])?;
    if let Some(last) = report.matches.last() {
        for (idx, (&v, &flag)) in report.positive_shifted.iter().zip(&report.flags).enumerate().take(last.index + 1) {
            match report.matches.iter().find(|m| m.index == idx) {
                Some(m) => w.write_record([
                    m.level.to_string(),
                    fmt13(v),
                    fmt13(m.exact),
                    fmt13(m.relative_error),
                    flag.name().to_string(),
                ])?,
                None => w.write_record([String::new(), fmt13(v), String::new(), String::new(), flag.name().into()])?,
            }
        }
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).unwrap();
    Ok(config_header(&out.config) + &body)
}

pub fn solve_json(out: &SolveOutcome) -> CliResult<String> {
    serde_json::to_string_pretty(out).map_err(|e| CliError::Io(e.to_string()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let out = run_solve(cfg)?;
    let dir = &cfg.output_path;
    Ok(vec![
        write_file(dir, "solve.csv", &solve_csv(&out)?)?,
        write_file(dir, "solve.json", &solve_json(&out)?)?,
    ])
}

/// One solve per value of `param`; rows ordered by value then level.
pub fn sweep_csv(cfg: &RunConfig, param: &str, values: &[String]) -> CliResult<String> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(CliError::Config(format!(
            "unknown sweep parameter `{param}` (expected one of {})",
            SWEEP_PARAMS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["param_value", "level", "computed", "exact", "rel_error"])?;
    for value in values {
        let mut run = cfg.clone();
        run.set(param, value)?;
        run.validate()?;
        let out = run_solve(&run)?;
        for m in &out.report.matches {
            w.write_record([
                value.clone(),
                m.level.to_string(),
                fmt13(m.computed),
                fmt13(m.exact),
                fmt13(m.relative_error),
            ])?;
        }
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).unwrap();
    Ok(format!("{}# sweep = {param}\n{body}", config_header(cfg)))
}

pub fn cmd_sweep(cfg: &RunConfig, param: &str, values: &[String]) -> CliResult<Vec<PathBuf>> {
    let table = sweep_csv(cfg, param, values)?;
    Ok(vec![write_file(&cfg.output_path, &format!("sweep_{param}.csv"), &table)?])
}

/// Per-level rates from `(h, relative_error)` samples of each run, for
/// levels present in every run.
pub fn rates_from_samples(runs: &[Vec<(f64, f64)>]) -> CliResult<Vec<(usize, f64)>> {
    let levels = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..levels)
        .map(|k| {
            let samples: Vec<(f64, f64)> = runs.iter().map(|r| r[k]).collect();
            Ok((k + 1, convergence_rate(&samples)?))
        })
        .collect()
}

pub fn convergence_csv(cfg: &RunConfig, n_values: &[usize]) -> CliResult<String> {
    if n_values.len() < 3 {
        return Err(CliError::Config(format!(
            "convergence needs at least 3 n values, got {}",
            n_values.len()
        )));
    }
    let mut runs = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut run = cfg.clone();
        run.grid.n_intervals = n;
        run.validate()?;
        let out = run_solve(&run)?;
        runs.push(
            out.report
                .matches
                .iter()
                .map(|m| (out.max_spacing, m.relative_error))
                .collect::<Vec<_>>(),
        );
    }
    let rates = rates_from_samples(&runs)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "rate"])?;
    for (level, rate) in rates {
        w.write_record([level.to_string(), fmt13(rate)])?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).unwrap();
    let ns: Vec<String> = n_values.iter().map(usize::to_string).collect();
    Ok(format!("{}# n_values = {}\n{body}", config_header(cfg), ns.join(",")))
}

pub fn cmd_convergence(cfg: &RunConfig, n_values: &[usize]) -> CliResult<Vec<PathBuf>> {
    let table = convergence_csv(cfg, n_values)?;
    Ok(vec![write_file(&cfg.output_path, "convergence.csv", &table)?])
}

/// Writes every weak-form matrix, the assembled blocks and tau as sparse
/// triplet text files under `<output>/matrices`.
pub fn cmd_dump_matrices(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let disc = discretize(cfg)?;
    let dir = cfg.output_path.join("matrices");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let sys = &disc.system;
    let blocks = [("A", &sys.a), ("B", &sys.b), ("script_A", &sys.script_a), ("script_B", &sys.script_b)];
    for (name, mat) in disc.weak_form.named().into_iter().chain(blocks) {
        let path = dir.join(format!("{name}.txt"));
        let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
        write_triplets(&mut file, name, mat)?;
        file.flush()?;
        written.push(path);
    }
    let mut tau = config_header(cfg);
    tau.push_str("row,node,tau\n");
    for (row, (t, node)) in sys.tau.iter().zip(&disc.weak_form.retained).enumerate() {
        tau.push_str(&format!("{row},{node},{}\n", fmt13(*t)));
    }
    written.push(write_file(&dir, "tau.csv", &tau)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirteen_significant_digits() {
        assert_eq!(fmt13(-1829.630746123456), "-1829.630746123");
        assert_eq!(fmt13(0.5), "0.5000000000000");
        assert_eq!(fmt13(-27.8072742), "-27.80727420000");
        assert_eq!(fmt13(2.6e-9), "2.600000000000e-9");
        assert_eq!(fmt13(0.0), "0");
        assert_eq!(fmt13(9.9999999999999), "10.00000000000");
    }

    #[test]
    fn env_then_overrides() {
        let cfg = load_config(None, Some("/tmp/a"), &[]).unwrap();
        assert_eq!(cfg.output_path, PathBuf::from("/tmp/a"));
        let cfg = load_config(None, Some("/tmp/a"), &["output_path=/tmp/b".into(), "nu=2.5".into()]).unwrap();
        assert_eq!(cfg.output_path, PathBuf::from("/tmp/b"));
        assert_eq!(cfg.grid.nu, 2.5);
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        for bad in ["nu", "nu=x", "bogus=1", "n_intervals=2", "quadrature_factor=3"] {
            let err = load_config(None, None, &[bad.into()]).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn unknown_sweep_parameter() {
        let err = sweep_csv(&RunConfig::default(), "z", &["1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn too_few_convergence_points() {
        let err = convergence_csv(&RunConfig::default(), &[200, 400]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn injected_quadratic_errors_give_rate_two() {
        let hs = [0.4, 0.2, 0.1, 0.05];
        let runs: Vec<Vec<(f64, f64)>> = hs.iter().map(|&h| vec![(h, 3.0 * h * h), (h, 0.5 * h * h)]).collect();
        let rates = rates_from_samples(&runs).unwrap();
        assert_eq!(rates.len(), 2);
        for (_, r) in rates {
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn numerical_errors_map_to_three() {
        assert_eq!(CliError::from(Error::SingularB).exit_code(), 3);
        assert_eq!(CliError::from(Error::EmptySpectrum).exit_code(), 3);
    }
}
