//! Moving-least-squares hp-cloud shape functions with linear finite element
//! hats at both ends of the domain.
//!
//! All cloud evaluations shift the origin of the enrichment basis to the
//! evaluation point, so the moment matrix at `x` is
//!
//! ```text
//! M(x) = sum_i phi((x - x_i) / rho_i) P(x_i - x) P(x_i - x)^T
//! ```
//!
//! and `psi_i(x) = P(0)^T M(x)^{-1} phi_i P(x_i - x)`. Derivatives are the
//! exact derivatives of these functions (the moving origin contributes through
//! `P'(x_i - x)`), so they agree with finite differences of the values.

use serde::Serialize;

use crate::enrichment::{EnrichmentBasis, WeightFunction};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Shape function values and first derivatives at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeEval {
    pub point: f64,
    /// Global node indices with nonzero support at `point`.
    pub active_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl ShapeEval {
    pub fn value_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn deriv_sum(&self) -> f64 {
        self.derivs.iter().sum()
    }

    /// Value of node `i`'s shape function, zero when inactive.
    pub fn value_of(&self, node: usize) -> f64 {
        self.active_indices
            .iter()
            .position(|&k| k == node)
            .map_or(0.0, |p| self.values[p])
    }

    pub fn deriv_of(&self, node: usize) -> f64 {
        self.active_indices
            .iter()
            .position(|&k| k == node)
            .map_or(0.0, |p| self.derivs[p])
    }
}

/// Dense LU with partial pivoting for the small moment matrix.
struct SmallLu {
    m: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl SmallLu {
    fn factor(mut a: Vec<f64>, m: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let (piv, max) = (k..m)
                .map(|r| (r, a[r * m + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(max > 0.0) || !max.is_finite() {
                return None;
            }
            if piv != k {
                for c in 0..m {
                    a.swap(k * m + c, piv * m + c);
                }
                perm.swap(k, piv);
            }
            let d = a[k * m + k];
            for r in k + 1..m {
                let l = a[r * m + k] / d;
                a[r * m + k] = l;
                for c in k + 1..m {
                    a[r * m + c] -= l * a[k * m + c];
                }
            }
        }
        Some(Self { m, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..m {
            for c in 0..r {
                y[r] -= self.lu[r * m + c] * y[c];
            }
        }
        for r in (0..m).rev() {
            for c in r + 1..m {
                y[r] -= self.lu[r * m + c] * y[c];
            }
            y[r] /= self.lu[r * m + r];
        }
        y
    }

    /// `||A||_1 ||A^{-1}||_1`, with the inverse norm obtained column by column
    /// from the factorization.
    fn condition_1(&self, a: &[f64]) -> f64 {
        let m = self.m;
        let norm_a = (0..m)
            .map(|c| (0..m).map(|r| a[r * m + c].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut norm_inv: f64 = 0.0;
        let mut e = vec![0.0; m];
        for c in 0..m {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            norm_inv = norm_inv.max(col.iter().map(|v| v.abs()).sum());
        }
        norm_a * norm_inv
    }
}

/// Symmetric positive semidefinite moment matrix, equilibrated by its diagonal
/// before factorization so the condition estimate reflects geometry rather
/// than the scale of the enrichment functions.
struct MomentSolver {
    scale: Vec<f64>,
    lu: SmallLu,
}

impl MomentSolver {
    fn new(moment: &[f64], m: usize, x: f64, cap: f64) -> Result<Self> {
        let scale: Vec<f64> = (0..m).map(|k| moment[k * m + k].sqrt()).collect();
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::SingularMoment {
                x,
                condition: f64::INFINITY,
            });
        }
        let scaled: Vec<f64> = (0..m * m)
            .map(|idx| moment[idx] / (scale[idx / m] * scale[idx % m]))
            .collect();
        let lu = SmallLu::factor(scaled.clone(), m).ok_or(Error::SingularMoment {
            x,
            condition: f64::INFINITY,
        })?;
        let condition = lu.condition_1(&scaled);
        if !(condition <= cap) {
            return Err(Error::SingularMoment { x, condition });
        }
        Ok(Self { scale, lu })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v / s).collect();
        let mut y = self.lu.solve(&scaled);
        y.iter_mut().zip(&self.scale).for_each(|(v, s)| *v /= s);
        y
    }
}

/// A linear hat at the domain boundary, tied to one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Hat {
    node: usize,
    /// Support `[left, right]` with peak at the node.
    left: f64,
    peak: f64,
    right: f64,
}

impl Hat {
    /// Value and slope; at a kink the right-sided slope is used, except at the
    /// right end of the support.
    fn eval(&self, x: f64) -> (f64, f64) {
        if x < self.left || x > self.right {
            return (0.0, 0.0);
        }
        let rising = self.peak > self.left && (x < self.peak || (x == self.peak && self.peak == self.right));
        if rising {
            let h = self.peak - self.left;
            ((x - self.left) / h, 1.0 / h)
        } else if self.right > self.peak {
            let h = self.right - self.peak;
            ((self.right - x) / h, -1.0 / h)
        } else {
            (0.0, 0.0)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudBasis {
    grid: Grid,
    basis: EnrichmentBasis,
    weight: WeightFunction,
    /// Nodes carrying FEM hats: the first two and last two when coupled.
    fem_nodes: Vec<usize>,
    condition_cap: f64,
    #[serde(skip)]
    hats: Vec<Hat>,
    /// Node range whose shape functions are clouds, inclusive.
    #[serde(skip)]
    cloud_range: (usize, usize),
    #[serde(skip)]
    max_radius: f64,
}

impl CloudBasis {
    /// Cloud basis with FEM hats on the first two and last two nodes.
    pub fn coupled(grid: Grid, basis: EnrichmentBasis) -> Result<Self> {
        let n = grid.n_intervals();
        if n < 4 {
            return Err(Error::invalid(
                "n_intervals",
                "boundary coupling needs at least 4 subintervals",
            ));
        }
        let x = grid.nodes();
        let hats = vec![
            Hat { node: 0, left: x[0], peak: x[0], right: x[1] },
            Hat { node: 1, left: x[0], peak: x[1], right: x[2] },
            Hat { node: n - 1, left: x[n - 2], peak: x[n - 1], right: x[n] },
            Hat { node: n, left: x[n - 1], peak: x[n], right: x[n] },
        ];
        Ok(Self::build(grid, basis, hats, (2, n - 2)))
    }

    /// Pure cloud basis: every node carries an MLS shape function.
    pub fn clouds_only(grid: Grid, basis: EnrichmentBasis) -> Self {
        let n = grid.n_intervals();
        Self::build(grid, basis, Vec::new(), (0, n))
    }

    fn build(grid: Grid, basis: EnrichmentBasis, hats: Vec<Hat>, cloud_range: (usize, usize)) -> Self {
        let max_radius = grid.dilations()[cloud_range.0..=cloud_range.1]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        Self {
            fem_nodes: hats.iter().map(|h| h.node).collect(),
            grid,
            basis,
            weight: WeightFunction::QuarticSpline,
            condition_cap: DEFAULT_CONDITION_CAP,
            hats,
            cloud_range,
            max_radius,
        }
    }

    pub fn with_condition_cap(mut self, cap: f64) -> Self {
        self.condition_cap = cap;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn basis(&self) -> &EnrichmentBasis {
        &self.basis
    }

    pub fn weight(&self) -> WeightFunction {
        self.weight
    }

    pub fn fem_nodes(&self) -> &[usize] {
        &self.fem_nodes
    }

    pub fn is_coupled(&self) -> bool {
        !self.hats.is_empty()
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (start, end) = (self.grid.start(), self.grid.end());
        if !(x >= start && x <= end) {
            return Err(Error::OutOfDomain { x, start, end });
        }
        Ok(())
    }

    /// Cloud nodes in `range` whose support contains `x`.
    fn covering(&self, x: f64, range: (usize, usize)) -> impl Iterator<Item = usize> + '_ {
        let nodes = self.grid.nodes();
        let lo = nodes.partition_point(|&xi| xi <= x - self.max_radius).max(range.0);
        let hi = nodes.partition_point(|&xi| xi < x + self.max_radius).min(range.1 + 1);
        let rho = self.grid.dilations();
        (lo..hi.max(lo)).filter(move |&i| (x - nodes[i]).abs() < rho[i])
    }

    /// MLS evaluation over the nodes in `range`, corrected by the hat
    /// contributions `hats` (pairs of hat index and its value/slope at `x`).
    fn mls(&self, x: f64, range: (usize, usize), hats: &[(usize, f64, f64)]) -> Result<ShapeEval> {
        let m = self.basis.size();
        let nodes = self.grid.nodes();
        let rho = self.grid.dilations();

        let active: Vec<usize> = self.covering(x, range).collect();
        let mut weights = Vec::with_capacity(active.len());
        let mut p_all = Vec::with_capacity(active.len() * m);
        let mut dp_all = Vec::with_capacity(active.len() * m);
        let mut moment = vec![0.0; m * m];
        let mut moment_x = vec![0.0; m * m];
        let mut p = vec![0.0; m];
        let mut dp = vec![0.0; m];

        for &i in &active {
            let offset = x - nodes[i];
            let (w, dw_dr) = self.weight.eval(offset.abs() / rho[i]);
            let dw = dw_dr * offset.signum() / rho[i];
            self.basis.eval(nodes[i] - x, &mut p, &mut dp);
            for a in 0..m {
                for b in 0..m {
                    moment[a * m + b] += w * p[a] * p[b];
                    // d/dx P(x_i - x) = -P'(x_i - x)
                    moment_x[a * m + b] += dw * p[a] * p[b] - w * (dp[a] * p[b] + p[a] * dp[b]);
                }
            }
            weights.push((w, dw));
            p_all.extend_from_slice(&p);
            dp_all.extend_from_slice(&dp);
        }

        let mut target = vec![0.0; m];
        let mut target_x = vec![0.0; m];
        self.basis.eval(0.0, &mut target, &mut dp);
        for &(h, g, dg) in hats {
            self.basis.eval(nodes[self.hats[h].node] - x, &mut p, &mut dp);
            for a in 0..m {
                target[a] -= g * p[a];
                target_x[a] += -dg * p[a] + g * dp[a];
            }
        }

        let solver = MomentSolver::new(&moment, m, x, self.condition_cap)?;
        let gamma = solver.solve(&target);
        let rhs: Vec<f64> = (0..m)
            .map(|a| target_x[a] - (0..m).map(|b| moment_x[a * m + b] * gamma[b]).sum::<f64>())
            .collect();
        let gamma_x = solver.solve(&rhs);

        let mut values = Vec::with_capacity(active.len() + hats.len());
        let mut derivs = Vec::with_capacity(active.len() + hats.len());
        for (k, &(w, dw)) in weights.iter().enumerate() {
            let pk = &p_all[k * m..(k + 1) * m];
            let dpk = &dp_all[k * m..(k + 1) * m];
            let mut v = 0.0;
            let mut d = 0.0;
            for a in 0..m {
                v += gamma[a] * pk[a];
                d += gamma_x[a] * w * pk[a] + gamma[a] * (dw * pk[a] - w * dpk[a]);
            }
            values.push(w * v);
            derivs.push(d);
        }
        let mut active_indices = active;
        for &(h, g, dg) in hats {
            active_indices.push(self.hats[h].node);
            values.push(g);
            derivs.push(dg);
        }
        Ok(ShapeEval {
            point: x,
            active_indices,
            values,
            derivs,
        })
    }

    /// Plain MLS clouds over every node of the grid, ignoring the hats.
    pub fn evaluate_clouds(&self, x: f64) -> Result<ShapeEval> {
        self.check_domain(x)?;
        self.mls(x, (0, self.grid.n_intervals()), &[])
    }

    /// The basis actually used for assembly: hats near the boundary, clouds
    /// elsewhere, with the reproducing-condition correction in between.
    pub fn evaluate_coupled(&self, x: f64) -> Result<ShapeEval> {
        self.check_domain(x)?;
        if !self.is_coupled() {
            return self.mls(x, self.cloud_range, &[]);
        }
        let nodes = self.grid.nodes();
        let n = self.grid.n_intervals();
        let hat_values: Vec<(usize, f64, f64)> = self
            .hats
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let (g, dg) = h.eval(x);
                (k, g, dg)
            })
            .filter(|(_, g, dg)| *g != 0.0 || *dg != 0.0)
            .collect();

        // complete FEM regions: only the two hats live there
        let in_fem = x < nodes[1] || x >= nodes[n - 1] || (x == nodes[1]);
        if in_fem {
            let mut active_indices = Vec::new();
            let mut values = Vec::new();
            let mut derivs = Vec::new();
            for (k, g, dg) in hat_values {
                active_indices.push(self.hats[k].node);
                values.push(g);
                derivs.push(dg);
            }
            return Ok(ShapeEval {
                point: x,
                active_indices,
                values,
                derivs,
            });
        }
        self.mls(x, self.cloud_range, &hat_values)
    }

    /// Global node indices kept after imposing homogeneous Dirichlet
    /// conditions: every node except the two end hats.
    pub fn apply_dirichlet(&self) -> Vec<usize> {
        (1..self.grid.n_intervals()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrichment::sto_default_basis;
    use crate::grid::{generate_grid, GridConfig};

    fn uniform(n: usize, nu: f64) -> Grid {
        Grid::from_nodes((0..=n).map(|i| i as f64).collect(), nu).unwrap()
    }

    fn exp_grid(n: usize) -> Grid {
        generate_grid(&GridConfig {
            n_intervals: n,
            domain_start: 0.0,
            domain_end: 100.0,
            eps: 1e-5,
            nu: 2.2,
        })
        .unwrap()
    }

    #[test]
    fn small_lu_solves() {
        let a = vec![0.0, 2.0, 1.0, 3.0, 1.0, 0.0, 1.0, 1.0, 1.0];
        let lu = SmallLu::factor(a.clone(), 3).unwrap();
        let x = lu.solve(&[3.0, 4.0, 3.0]);
        for r in 0..3 {
            let ax: f64 = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
            assert!((ax - [3.0, 4.0, 3.0][r]).abs() < 1e-14);
        }
        assert!(SmallLu::factor(vec![1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn shepard_midpoint_is_half() {
        let basis = CloudBasis::clouds_only(uniform(6, 1.5), EnrichmentBasis::constant());
        let eval = basis.evaluate_clouds(2.5).unwrap();
        assert_eq!(eval.active_indices, vec![2, 3]);
        assert!((eval.values[0] - 0.5).abs() < 1e-15);
        assert!((eval.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn partition_of_unity_and_nullity() {
        let basis = CloudBasis::clouds_only(exp_grid(200), sto_default_basis());
        for i in 0..500 {
            let x = 100.0 * (i as f64 + 0.5) / 500.0;
            let e = basis.evaluate_clouds(x).unwrap();
            let scale = e.derivs.iter().fold(0.0f64, |a, d| a.max(d.abs()));
            assert!((e.value_sum() - 1.0).abs() < 1e-10);
            assert!(e.deriv_sum().abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn monomial_reproduction_without_shift_effect() {
        // polynomial bases are shift invariant, so p(x) is reproduced exactly
        let basis = CloudBasis::clouds_only(exp_grid(40), EnrichmentBasis::monomial(2));
        let nodes = basis.grid().nodes().to_vec();
        for i in 1..200 {
            let x = 30.0 * i as f64 / 200.0;
            let e = basis.evaluate_clouds(x).unwrap();
            for k in 0..3 {
                let got: f64 = e.active_indices.iter().zip(&e.values).map(|(&j, v)| v * nodes[j].powi(k)).sum();
                let want = x.powi(k);
                assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn boundary_node_sees_single_hat() {
        let basis = CloudBasis::coupled(exp_grid(40), sto_default_basis()).unwrap();
        let e = basis.evaluate_coupled(0.0).unwrap();
        assert_eq!(e.value_of(0), 1.0);
        assert_eq!(e.value_sum(), 1.0);
        assert!(e.values.iter().zip(&e.active_indices).all(|(v, &k)| k == 0 || *v == 0.0));
    }

    #[test]
    fn coupled_matches_clouds_in_interior() {
        let basis = CloudBasis::coupled(exp_grid(200), sto_default_basis()).unwrap();
        let plain = CloudBasis::clouds_only(exp_grid(200), sto_default_basis());
        let x = 1.0;
        let a = basis.evaluate_coupled(x).unwrap();
        let b = plain.evaluate_clouds(x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transition_region_keeps_unity() {
        let grid = exp_grid(200);
        let (x1, x2) = (grid.nodes()[1], grid.nodes()[2]);
        let (y1, y2) = (grid.nodes()[198], grid.nodes()[199]);
        let basis = CloudBasis::coupled(grid, sto_default_basis()).unwrap();
        for t in [0.1, 0.3, 0.5, 0.9] {
            for x in [x1 + t * (x2 - x1), y1 + t * (y2 - y1)] {
                let e = basis.evaluate_coupled(x).unwrap();
                assert!((e.value_sum() - 1.0).abs() < 1e-12, "x={x}");
                let scale = e.derivs.iter().fold(0.0f64, |a, d| a.max(d.abs()));
                assert!(e.deriv_sum().abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn too_small_influence_factor_is_singular() {
        // nu = 1.05 on a uniform grid leaves points near the middle of an
        // interval covered by two clouds only; with a quadratic basis (m = 3)
        // the moment matrix has rank two
        let basis = CloudBasis::clouds_only(uniform(8, 1.05), EnrichmentBasis::monomial(2));
        match basis.evaluate_clouds(3.5) {
            Err(Error::SingularMoment { .. }) => {}
            other => panic!("expected SingularMoment, got {other:?}"),
        }
    }

    #[test]
    fn outside_domain_rejected() {
        let basis = CloudBasis::clouds_only(uniform(6, 2.0), EnrichmentBasis::constant());
        assert!(matches!(basis.evaluate_clouds(-0.1), Err(Error::OutOfDomain { .. })));
        assert!(matches!(basis.evaluate_clouds(6.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn dirichlet_retains_interior_nodes() {
        let basis = CloudBasis::coupled(uniform(10, 2.2), sto_default_basis()).unwrap();
        assert_eq!(basis.apply_dirichlet(), (1..=9).collect::<Vec<_>>());
        let big = CloudBasis::coupled(exp_grid(600), sto_default_basis()).unwrap();
        assert_eq!(2 * big.apply_dirichlet().len(), 1198);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let basis = CloudBasis::coupled(exp_grid(200), sto_default_basis()).unwrap();
        let rho = basis.grid().dilations().to_vec();
        for i in 0..300 {
            let x = 0.001 + 99.0 * (i as f64 / 300.0).powi(3);
            let e = basis.evaluate_coupled(x).unwrap();
            let scale = e.derivs.iter().fold(0.0f64, |a, d| a.max(d.abs()));
            for (&node, &d) in e.active_indices.iter().zip(&e.derivs) {
                let h = 1e-6 * rho[node];
                let plus = basis.evaluate_coupled(x + h).unwrap().value_of(node);
                let minus = basis.evaluate_coupled(x - h).unwrap().value_of(node);
                let fd = (plus - minus) / (2.0 * h);
                assert!((fd - d).abs() <= 1e-4 * scale, "node {node} x={x}: fd={fd} analytic={d}");
            }
        }
    }
}
