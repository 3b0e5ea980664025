//! Quadrature, weak-form matrices and the (stabilized) block eigenproblem.
//!
//! Matrix naming follows the weak-form integrals
//!
//! ```text
//! (M_rst^q)_ij = int psi_j^(s) psi_i^(r) x^(-t) q(x) dx
//! ```
//!
//! so `M_100` carries the test-function derivative and `M_010` the trial
//! derivative; `M_010 = M_100^T`.

use std::io::{self, Write};

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{CloudBasis, ShapeEval};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::physics::PhysicalSystem;

/// Two-point Gauss-Legendre abscissa on `[-1, 1]`.
const GAUSS_2: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub cells: Vec<(f64, f64)>,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Index of the nodal interval each point belongs to.
    pub interval_of: Vec<usize>,
}

impl QuadratureRule {
    pub const POINTS_PER_CELL: usize = 2;

    pub fn total_points(&self) -> usize {
        self.points.len()
    }

    fn push_cell(&mut self, a: f64, b: f64, interval: usize) {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.cells.push((a, b));
        for s in [-GAUSS_2, GAUSS_2] {
            self.points.push(mid + half * s);
            self.weights.push(half);
            self.interval_of.push(interval);
        }
    }

    /// Splits the cell containing `x` so that `x` becomes a cell boundary.
    /// Used to respect the kink of the extended-nucleus potential.
    pub fn with_breakpoint(self, x: f64) -> Self {
        let Some(k) = self.cells.iter().position(|&(a, b)| a < x && x < b) else {
            return self;
        };
        let mut out = QuadratureRule {
            cells: Vec::with_capacity(self.cells.len() + 1),
            points: Vec::with_capacity(self.points.len() + 2),
            weights: Vec::with_capacity(self.points.len() + 2),
            interval_of: Vec::with_capacity(self.points.len() + 2),
        };
        for (idx, &(a, b)) in self.cells.iter().enumerate() {
            let interval = self.interval_of[2 * idx];
            if idx == k {
                out.push_cell(a, x, interval);
                out.push_cell(x, b, interval);
            } else {
                out.push_cell(a, b, interval);
            }
        }
        out
    }

    /// Integrates `f` with the rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Splits each nodal interval into `factor / 2` equal cells with two Gauss
/// points each, for `factor * n` points in total.
pub fn build_quadrature(grid: &Grid, factor: usize) -> Result<QuadratureRule> {
    if factor < 2 || factor % 2 != 0 {
        return Err(Error::invalid(
            "quadrature_factor",
            format!("{factor} must be an even integer >= 2"),
        ));
    }
    let per_interval = factor / 2;
    let mut rule = QuadratureRule {
        cells: Vec::with_capacity(per_interval * grid.n_intervals()),
        points: Vec::with_capacity(factor * grid.n_intervals()),
        weights: Vec::with_capacity(factor * grid.n_intervals()),
        interval_of: Vec::with_capacity(factor * grid.n_intervals()),
    };
    for (j, w) in grid.nodes().windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = (b - a) / per_interval as f64;
        for c in 0..per_interval {
            let lo = a + len * c as f64;
            let hi = if c + 1 == per_interval { b } else { a + len * (c + 1) as f64 };
            rule.push_cell(lo, hi, j);
        }
    }
    Ok(rule)
}

/// How shape-function derivatives enter the weak form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    /// Pointwise analytic derivatives.
    #[default]
    Analytic,
    /// Nodal-interval averages `(psi(x_{j+1}) - psi(x_j)) / h`.
    Smoothed,
}

/// Weak-form matrices on the Dirichlet-retained index set.
#[derive(Debug, Clone)]
pub struct WeakFormMatrices {
    /// Global node index of each retained degree of freedom.
    pub retained: Vec<usize>,
    pub m000: Mat<f64>,
    pub m010: Mat<f64>,
    pub m001: Mat<f64>,
    pub m100: Mat<f64>,
    pub m110: Mat<f64>,
    pub m101: Mat<f64>,
    pub m000_v: Mat<f64>,
    pub m100_v: Mat<f64>,
}

impl WeakFormMatrices {
    pub fn dim(&self) -> usize {
        self.retained.len()
    }

    /// All matrices with their conventional names.
    pub fn named(&self) -> [(&'static str, &Mat<f64>); 8] {
        [
            ("M000", &self.m000),
            ("M010", &self.m010),
            ("M001", &self.m001),
            ("M100", &self.m100),
            ("M110", &self.m110),
            ("M101", &self.m101),
            ("M000V", &self.m000_v),
            ("M100V", &self.m100_v),
        ]
    }
}

/// Averaged derivative of every shape function active on the nodal interval
/// `[x_cell, x_{cell+1}]`, as `(node, value)` pairs.
pub fn smoothed_derivative(basis: &CloudBasis, cell: usize) -> Result<Vec<(usize, f64)>> {
    let nodes = basis.grid().nodes();
    if cell + 1 >= nodes.len() {
        return Err(Error::invalid("cell", format!("interval {cell} outside the grid")));
    }
    smoothed_between(basis, nodes[cell], nodes[cell + 1])
}

fn smoothed_between(basis: &CloudBasis, a: f64, b: f64) -> Result<Vec<(usize, f64)>> {
    let h = b - a;
    if !(h > 0.0) {
        return Err(Error::invalid("cell", "zero-length interval"));
    }
    let left = basis.evaluate_coupled(a)?;
    let right = basis.evaluate_coupled(b)?;
    let mut active: Vec<usize> = left.active_indices.iter().chain(&right.active_indices).copied().collect();
    active.sort_unstable();
    active.dedup();
    Ok(active
        .into_iter()
        .map(|i| (i, (right.value_of(i) - left.value_of(i)) / h))
        .collect())
}

fn shape_evaluations(basis: &CloudBasis, quad: &QuadratureRule, mode: DerivativeMode) -> Result<Vec<ShapeEval>> {
    let mut evals: Vec<ShapeEval> = quad
        .points
        .par_iter()
        .map(|&x| basis.evaluate_coupled(x))
        .collect::<Result<_>>()?;
    if mode == DerivativeMode::Smoothed {
        let n = basis.grid().n_intervals();
        let smoothed: Vec<Vec<(usize, f64)>> =
            (0..n).into_par_iter().map(|j| smoothed_derivative(basis, j)).collect::<Result<_>>()?;
        for (eval, &j) in evals.iter_mut().zip(&quad.interval_of) {
            let table = &smoothed[j];
            let mut indices = Vec::with_capacity(table.len());
            let mut values = Vec::with_capacity(table.len());
            let mut derivs = Vec::with_capacity(table.len());
            for &(node, d) in table {
                indices.push(node);
                values.push(eval.value_of(node));
                derivs.push(d);
            }
            // nodes active at the point but not at the interval ends
            for (k, &node) in eval.active_indices.iter().enumerate() {
                if !indices.contains(&node) {
                    indices.push(node);
                    values.push(eval.values[k]);
                    derivs.push(0.0);
                }
            }
            *eval = ShapeEval {
                point: eval.point,
                active_indices: indices,
                values,
                derivs,
            };
        }
    }
    Ok(evals)
}

pub fn assemble_weak_form(basis: &CloudBasis, sys: &PhysicalSystem, quad: &QuadratureRule) -> Result<WeakFormMatrices> {
    assemble_weak_form_with(basis, sys, quad, DerivativeMode::Analytic)
}

pub fn assemble_weak_form_with(
    basis: &CloudBasis,
    sys: &PhysicalSystem,
    quad: &QuadratureRule,
    mode: DerivativeMode,
) -> Result<WeakFormMatrices> {
    let retained = basis.apply_dirichlet();
    let n_nodes = basis.grid().nodes().len();
    let mut dof_of = vec![usize::MAX; n_nodes];
    for (d, &node) in retained.iter().enumerate() {
        dof_of[node] = d;
    }
    let dim = retained.len();
    let evals = shape_evaluations(basis, quad, mode)?;
    let potentials: Vec<f64> = quad.points.iter().map(|&x| sys.potential(x)).collect::<Result<_>>()?;

    let zeros = || Mat::<f64>::zeros(dim, dim);
    let mut out = WeakFormMatrices {
        retained,
        m000: zeros(),
        m010: zeros(),
        m001: zeros(),
        m100: zeros(),
        m110: zeros(),
        m101: zeros(),
        m000_v: zeros(),
        m100_v: zeros(),
    };

    // fixed summation order over points keeps the result reproducible
    for ((eval, &w), &v) in evals.iter().zip(&quad.weights).zip(&potentials) {
        let x = eval.point;
        let inv_x = 1.0 / x;
        let local: Vec<(usize, f64, f64)> = eval
            .active_indices
            .iter()
            .zip(eval.values.iter().zip(&eval.derivs))
            .filter(|(&node, _)| dof_of[node] != usize::MAX)
            .map(|(&node, (&val, &der))| (dof_of[node], val, der))
            .collect();
        for &(i, vi, di) in &local {
            for &(j, vj, dj) in &local {
                let vv = w * vi * vj;
                let dv = w * di * vj;
                out.m000[(i, j)] += vv;
                out.m010[(i, j)] += w * vi * dj;
                out.m100[(i, j)] += dv;
                out.m110[(i, j)] += w * di * dj;
                out.m001[(i, j)] += vv * inv_x;
                out.m101[(i, j)] += dv * inv_x;
                out.m000_v[(i, j)] += vv * v;
                out.m100_v[(i, j)] += dv * v;
            }
        }
    }
    Ok(out)
}

/// `theta_ji = x_i - x_j` over the retained nodes, for retained row `row`.
pub fn theta_weights(grid: &Grid, retained: &[usize], row: usize) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    let &j = retained
        .get(row)
        .ok_or_else(|| Error::invalid("row", format!("row {row} outside 0..{}", retained.len())))?;
    Ok(retained.iter().map(|&i| signed_distance(grid, j, i)).collect::<Vec<_>>())
        .map(|v| {
            debug_assert!(v.iter().zip(retained).all(|(t, &i)| (t - (nodes[i] - nodes[j])).abs()
                <= 1e-12 * nodes[nodes.len() - 1]));
            v
        })
}

/// Sum of spacings between nodes `j` and `i`, negative when `i < j`.
fn signed_distance(grid: &Grid, j: usize, i: usize) -> f64 {
    use std::cmp::Ordering;
    match i.cmp(&j) {
        Ordering::Less => -(i + 1..=j).map(|k| grid.h(k)).sum::<f64>(),
        Ordering::Equal => 0.0,
        Ordering::Greater => (j + 1..=i).map(|k| grid.h(k)).sum::<f64>(),
    }
}

/// Ratio `|sum_i sigma_ji theta_ji / sum_i eta_ji theta_ji|` for one row.
pub fn tau_from_rows(sigma: &[f64], eta: &[f64], theta: &[f64]) -> Option<f64> {
    let num: f64 = sigma.iter().zip(theta).map(|(s, t)| s * t).sum();
    let den: f64 = eta.iter().zip(theta).map(|(e, t)| e * t).sum();
    let scale: f64 = eta.iter().zip(theta).map(|(e, t)| (e * t).abs()).sum();
    if !(scale > 0.0) || den.abs() <= 1e-14 * scale {
        return None;
    }
    Some((num / den).abs())
}

/// Row-wise stability parameter from the assembled mass and convection rows.
pub fn stability_tau(wfm: &WeakFormMatrices, grid: &Grid) -> Result<Vec<f64>> {
    let dim = wfm.dim();
    let nodes = grid.nodes();
    (0..dim)
        .into_par_iter()
        .map(|row| {
            let j = wfm.retained[row];
            let theta: Vec<f64> = wfm.retained.iter().map(|&i| nodes[i] - nodes[j]).collect();
            let sigma: Vec<f64> = (0..dim).map(|c| wfm.m000[(row, c)]).collect();
            let eta: Vec<f64> = (0..dim).map(|c| wfm.m100[(row, c)]).collect();
            tau_from_rows(&sigma, &eta, &theta).ok_or(Error::DegenerateTau { row })
        })
        .collect()
}

/// Closed-form finite element value `(3/17) h_{j+1} |h_{j+1} - h_j| / (h_{j+1} + h_j)`.
pub fn stability_tau_fem(grid: &Grid, j: usize) -> Result<f64> {
    let n = grid.n_intervals();
    if j < 1 || j >= n {
        return Err(Error::invalid("row", format!("node {j} outside 1..{}", n - 1)));
    }
    let (hj, hj1) = (grid.h(j), grid.h(j + 1));
    Ok((3.0 / 17.0 * hj1 * (hj1 - hj) / (hj1 + hj)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Symmetric Galerkin: test functions equal trial functions.
    Galerkin,
    /// Petrov-Galerkin with the row-wise matrix-based stability parameter.
    #[default]
    Cpg,
    /// Petrov-Galerkin with the closed-form finite element parameter.
    CpgFemTau,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Galerkin => "galerkin",
            Method::Cpg => "cpg",
            Method::CpgFemTau => "cpg_fem_tau",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "galerkin" => Ok(Method::Galerkin),
            "cpg" => Ok(Method::Cpg),
            "cpg_fem_tau" | "cpg-fem-tau" => Ok(Method::CpgFemTau),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Block matrices of the discrete problem. The generalized eigenproblem is
/// `(A + T script_A) X = lambda (B + T script_B) X` with `T = diag(tau, tau)`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub method: Method,
    pub a: Mat<f64>,
    pub b: Mat<f64>,
    pub script_a: Mat<f64>,
    pub script_b: Mat<f64>,
    pub tau: Vec<f64>,
}

fn place_block(dst: &mut Mat<f64>, row0: usize, col0: usize, n: usize, f: impl Fn(usize, usize) -> f64) {
    for j in 0..n {
        for i in 0..n {
            dst[(row0 + i, col0 + j)] = f(i, j);
        }
    }
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The perturbed pair actually handed to the eigensolver.
    pub fn pencil(&self) -> (Mat<f64>, Mat<f64>) {
        let n = self.tau.len();
        if self.tau.iter().all(|t| *t == 0.0) {
            return (self.a.clone(), self.b.clone());
        }
        let dim = 2 * n;
        let a = Mat::from_fn(dim, dim, |i, j| self.a[(i, j)] + self.tau[i % n] * self.script_a[(i, j)]);
        let b = Mat::from_fn(dim, dim, |i, j| self.b[(i, j)] + self.tau[i % n] * self.script_b[(i, j)]);
        (a, b)
    }
}

/// Builds `A`, `B` and the perturbation blocks. `tau` must have one entry per
/// retained row; it is ignored (treated as zero) for the Galerkin method.
pub fn assemble_system(wfm: &WeakFormMatrices, sys: &PhysicalSystem, method: Method, tau: &[f64]) -> Result<AssembledSystem> {
    let n = wfm.dim();
    for (name, m) in wfm.named() {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    if method != Method::Galerkin && tau.len() != n {
        return Err(Error::DimensionMismatch(format!("tau has {} rows, expected {n}", tau.len())));
    }
    let c = sys.c;
    let mc2 = sys.rest_energy();
    let ck = c * sys.kappa as f64;
    let w = wfm;
    let dim = 2 * n;

    let mut a = Mat::<f64>::zeros(dim, dim);
    place_block(&mut a, 0, 0, n, |i, j| mc2 * w.m000[(i, j)] + w.m000_v[(i, j)]);
    place_block(&mut a, 0, n, n, |i, j| -c * w.m010[(i, j)] + ck * w.m001[(i, j)]);
    place_block(&mut a, n, 0, n, |i, j| c * w.m010[(i, j)] + ck * w.m001[(i, j)]);
    place_block(&mut a, n, n, n, |i, j| -mc2 * w.m000[(i, j)] + w.m000_v[(i, j)]);

    let mut b = Mat::<f64>::zeros(dim, dim);
    place_block(&mut b, 0, 0, n, |i, j| w.m000[(i, j)]);
    place_block(&mut b, n, n, n, |i, j| w.m000[(i, j)]);

    let mut script_a = Mat::<f64>::zeros(dim, dim);
    let mut script_b = Mat::<f64>::zeros(dim, dim);
    let tau = if method == Method::Galerkin {
        vec![0.0; n]
    } else {
        place_block(&mut script_a, 0, 0, n, |i, j| c * w.m110[(i, j)] + ck * w.m101[(i, j)]);
        place_block(&mut script_a, 0, n, n, |i, j| -mc2 * w.m100[(i, j)] + w.m100_v[(i, j)]);
        place_block(&mut script_a, n, 0, n, |i, j| mc2 * w.m100[(i, j)] + w.m100_v[(i, j)]);
        place_block(&mut script_a, n, n, n, |i, j| -c * w.m110[(i, j)] + ck * w.m101[(i, j)]);
        place_block(&mut script_b, 0, n, n, |i, j| w.m100[(i, j)]);
        place_block(&mut script_b, n, 0, n, |i, j| w.m100[(i, j)]);
        tau.to_vec()
    };
    Ok(AssembledSystem {
        method,
        a,
        b,
        script_a,
        script_b,
        tau,
    })
}

/// Stability parameters for `method` on the retained rows.
pub fn tau_for_method(method: Method, wfm: &WeakFormMatrices, grid: &Grid) -> Result<Vec<f64>> {
    match method {
        Method::Galerkin => Ok(vec![0.0; wfm.dim()]),
        Method::Cpg => stability_tau(wfm, grid),
        Method::CpgFemTau => wfm.retained.iter().map(|&j| stability_tau_fem(grid, j)).collect(),
    }
}

/// Writes `mat` as a text triplet list: a `# name rows cols` header, then one
/// `row col value` line per nonzero entry (0-based indices, column-major order).
pub fn write_triplets(out: &mut impl Write, name: &str, mat: &Mat<f64>) -> io::Result<()> {
    writeln!(out, "# {name} {} {}", mat.nrows(), mat.ncols())?;
    for j in 0..mat.ncols() {
        for i in 0..mat.nrows() {
            let v = mat[(i, j)];
            if v != 0.0 {
                writeln!(out, "{i} {j} {v:.17e}")?;
            }
        }
    }
    Ok(())
}
