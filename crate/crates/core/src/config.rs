//! Run configuration and the end-to-end solve pipeline.
//!
//! Configurations are flat `key = value` text; `#` starts a comment.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_system, assemble_weak_form_with, build_quadrature, tau_for_method, AssembledSystem, DerivativeMode,
    Method, WeakFormMatrices,
};
use crate::cloud::CloudBasis;
use crate::eigen::{classify_spectrum, eigen_residual, solve_generalized, ClassifyTolerances, SpectrumReport};
use crate::enrichment::EnrichmentBasis;
use crate::error::{Error, Result};
use crate::grid::{generate_grid, Grid, GridConfig};
use crate::physics::{NucleusModel, PhysicalSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub system: PhysicalSystem,
    pub method: Method,
    pub enrichment: String,
    pub quadrature_factor: usize,
    pub levels: usize,
    pub derivative_mode: DerivativeMode,
    pub tolerances: ClassifyTolerances,
    /// Eigenpairs checked by inverse iteration after each solve.
    pub residual_samples: usize,
    pub output_path: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            system: PhysicalSystem::default(),
            method: Method::Cpg,
            enrichment: "sto".into(),
            quadrature_factor: 10,
            levels: 15,
            derivative_mode: DerivativeMode::Analytic,
            tolerances: ClassifyTolerances::default(),
            residual_samples: 20,
            output_path: PathBuf::from("out"),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "n_intervals",
    "domain_start",
    "domain_end",
    "eps",
    "nu",
    "z",
    "atomic_weight",
    "kappa",
    "c",
    "mass",
    "nucleus",
    "r0_fm",
    "method",
    "enrichment",
    "quadrature_factor",
    "levels",
    "derivative_mode",
    "imag_tol",
    "match_tol",
    "coincidence_tol",
    "residual_samples",
    "output_path",
];

fn parse_num<T: std::str::FromStr>(field: &'static str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(field, format!("cannot parse `{}`", value.trim())))
}

fn static_key(key: &str) -> Option<&'static str> {
    CONFIG_KEYS.iter().copied().find(|k| *k == key)
}

impl RunConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let field = static_key(key).ok_or_else(|| Error::invalid("key", format!("unknown configuration key `{key}`")))?;
        let v = value.trim();
        match field {
            "n_intervals" => self.grid.n_intervals = parse_num(field, v)?,
            "domain_start" => self.grid.domain_start = parse_num(field, v)?,
            "domain_end" => self.grid.domain_end = parse_num(field, v)?,
            "eps" => self.grid.eps = parse_num(field, v)?,
            "nu" => self.grid.nu = parse_num(field, v)?,
            "z" => self.system.z = parse_num(field, v)?,
            "atomic_weight" => self.system.atomic_weight = parse_num(field, v)?,
            "kappa" => self.system.kappa = parse_num(field, v)?,
            "c" => self.system.c = parse_num(field, v)?,
            "mass" => self.system.mass = parse_num(field, v)?,
            "nucleus" => {
                self.system.nucleus = match v {
                    "point" => NucleusModel::Point,
                    "extended" | "extended_uniform" => NucleusModel::ExtendedUniform,
                    _ => return Err(Error::invalid(field, format!("unknown nucleus model `{v}`"))),
                }
            }
            "r0_fm" => self.system.r0_fm = parse_num(field, v)?,
            "method" => self.method = v.parse()?,
            "enrichment" => self.enrichment = v.to_string(),
            "quadrature_factor" => self.quadrature_factor = parse_num(field, v)?,
            "levels" => self.levels = parse_num(field, v)?,
            "derivative_mode" => {
                self.derivative_mode = match v {
                    "analytic" => DerivativeMode::Analytic,
                    "smoothed" => DerivativeMode::Smoothed,
                    _ => return Err(Error::invalid(field, format!("unknown derivative mode `{v}`"))),
                }
            }
            "imag_tol" => self.tolerances.imag_tol = parse_num(field, v)?,
            "match_tol" => self.tolerances.match_tol = parse_num(field, v)?,
            "coincidence_tol" => self.tolerances.coincidence_tol = parse_num(field, v)?,
            "residual_samples" => self.residual_samples = parse_num(field, v)?,
            "output_path" => self.output_path = PathBuf::from(v),
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Textual value of one field, in the form accepted by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Result<String> {
        let field = static_key(key.trim()).ok_or_else(|| Error::invalid("key", format!("unknown configuration key `{key}`")))?;
        Ok(match field {
            "n_intervals" => self.grid.n_intervals.to_string(),
            "domain_start" => self.grid.domain_start.to_string(),
            "domain_end" => self.grid.domain_end.to_string(),
            "eps" => self.grid.eps.to_string(),
            "nu" => self.grid.nu.to_string(),
            "z" => self.system.z.to_string(),
            "atomic_weight" => self.system.atomic_weight.to_string(),
            "kappa" => self.system.kappa.to_string(),
            "c" => self.system.c.to_string(),
            "mass" => self.system.mass.to_string(),
            "nucleus" => match self.system.nucleus {
                NucleusModel::Point => "point".into(),
                NucleusModel::ExtendedUniform => "extended".into(),
            },
            "r0_fm" => self.system.r0_fm.to_string(),
            "method" => self.method.name().into(),
            "enrichment" => self.enrichment.clone(),
            "quadrature_factor" => self.quadrature_factor.to_string(),
            "levels" => self.levels.to_string(),
            "derivative_mode" => match self.derivative_mode {
                DerivativeMode::Analytic => "analytic".into(),
                DerivativeMode::Smoothed => "smoothed".into(),
            },
            "imag_tol" => self.tolerances.imag_tol.to_string(),
            "match_tol" => self.tolerances.match_tol.to_string(),
            "coincidence_tol" => self.tolerances.coincidence_tol.to_string(),
            "residual_samples" => self.residual_samples.to_string(),
            "output_path" => self.output_path.display().to_string(),
            _ => unreachable!(),
        })
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::invalid("config", format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every field, one `key = value` per line, in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).unwrap());
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.system.validate()?;
        if self.grid.n_intervals < 4 {
            return Err(Error::invalid("n_intervals", "coupled basis needs at least 4 subintervals"));
        }
        if self.grid.domain_start != 0.0 && self.system.nucleus == NucleusModel::Point {
            // the Coulomb term is integrable only because the origin is a Dirichlet end
            return Err(Error::invalid("domain_start", "point-nucleus runs start at the origin"));
        }
        if self.quadrature_factor < 2 || self.quadrature_factor % 2 != 0 {
            return Err(Error::invalid("quadrature_factor", "must be an even integer >= 2"));
        }
        EnrichmentBasis::from_name(&self.enrichment, self.system.z)?;
        let t = &self.tolerances;
        for (field, v) in [("imag_tol", t.imag_tol), ("match_tol", t.match_tol), ("coincidence_tol", t.coincidence_tol)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, "tolerance must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Intermediate products of one discretization, before the eigensolve.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub basis: CloudBasis,
    pub weak_form: WeakFormMatrices,
    pub system: AssembledSystem,
}

pub fn discretize(cfg: &RunConfig) -> Result<Discretization> {
    cfg.validate()?;
    let grid = generate_grid(&cfg.grid)?;
    let enrichment = EnrichmentBasis::from_name(&cfg.enrichment, cfg.system.z)?;
    let basis = CloudBasis::coupled(grid.clone(), enrichment)?;
    let mut quad = build_quadrature(&grid, cfg.quadrature_factor)?;
    if cfg.system.nucleus == NucleusModel::ExtendedUniform {
        quad = quad.with_breakpoint(cfg.system.nuclear_radius());
    }
    let weak_form = assemble_weak_form_with(&basis, &cfg.system, &quad, cfg.derivative_mode)?;
    let tau = tau_for_method(cfg.method, &weak_form, &grid)?;
    let system = assemble_system(&weak_form, &cfg.system, cfg.method, &tau)?;
    Ok(Discretization {
        grid,
        basis,
        weak_form,
        system,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualCheck {
    pub lambda: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub config: RunConfig,
    pub dofs: usize,
    pub max_spacing: f64,
    pub report: SpectrumReport,
    pub residuals: Vec<ResidualCheck>,
}

impl SolveOutcome {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

/// Picks up to `count` real eigenvalues: matched levels first, then evenly
/// spread over the rest of the real spectrum.
fn residual_targets(report: &SpectrumReport, mc2: f64, count: usize) -> Vec<f64> {
    let mut out: Vec<f64> = report.matches.iter().map(|m| m.computed + mc2).take(count).collect();
    let rest: Vec<f64> = report.real_spectrum.iter().copied().filter(|v| !out.contains(v)).collect();
    let left = count.saturating_sub(out.len()).min(rest.len());
    for k in 0..left {
        out.push(rest[k * rest.len() / left]);
    }
    out
}

pub fn run_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    let disc = discretize(cfg)?;
    let (a, b) = disc.system.pencil();
    let eigs = solve_generalized(a.as_ref(), b.as_ref())?;
    let report = classify_spectrum(&eigs, &cfg.system, cfg.levels, &cfg.tolerances)?;
    let residuals = residual_targets(&report, cfg.system.rest_energy(), cfg.residual_samples)
        .into_iter()
        .map(|lambda| {
            eigen_residual(a.as_ref(), b.as_ref(), lambda).map(|residual| ResidualCheck { lambda, residual })
        })
        .collect::<Result<_>>()?;
    Ok(SolveOutcome {
        config: cfg.clone(),
        dofs: disc.system.dim(),
        max_spacing: disc.grid.max_spacing(),
        report,
        residuals,
    })
}
