//! Exponentially graded nodal mesh on `[I_a, I_b]` and per-node cloud radii.
//!
//! Node positions follow
//!
//! ```text
//! x_i = exp(ln(I_a + eps) + i (ln(I_b + eps) - ln(I_a + eps)) / n) - eps,   i = 0..n
//! ```
//!
//! so small `eps` drags nodes toward the origin where the radial Dirac
//! components vary fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Number of subintervals; nodes are `x_0..x_n`.
    pub n_intervals: usize,
    pub domain_start: f64,
    pub domain_end: f64,
    /// Node intensity parameter, in `(0, 1]`.
    pub eps: f64,
    /// Dimensionless influence factor; cloud radius is `nu * max(h_j, h_{j+1})`.
    pub nu: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_intervals: 600,
            domain_start: 0.0,
            domain_end: 100.0,
            eps: 1e-5,
            nu: 2.2,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_intervals < 2 {
            return Err(Error::invalid("n_intervals", "need at least 2 subintervals"));
        }
        if !(self.domain_start.is_finite() && self.domain_end.is_finite()) {
            return Err(Error::invalid("domain_end", "domain endpoints must be finite"));
        }
        if self.domain_start >= self.domain_end {
            return Err(Error::invalid(
                "domain_start",
                format!(
                    "domain_start {} must be below domain_end {}",
                    self.domain_start, self.domain_end
                ),
            ));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid("eps", format!("{} not in (0, 1]", self.eps)));
        }
        if self.domain_start + self.eps <= 0.0 {
            return Err(Error::invalid("domain_start", "domain_start + eps must be positive"));
        }
        if !(self.nu > 1.0) {
            return Err(Error::invalid("nu", format!("{} must exceed 1", self.nu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    nodes: Vec<f64>,
    spacings: Vec<f64>,
    dilations: Vec<f64>,
    nu: f64,
}

impl Grid {
    /// Number of subintervals `n` (there are `n + 1` nodes).
    pub fn n_intervals(&self) -> usize {
        self.spacings.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `h_k = x_k - x_{k-1}`, stored at index `k - 1`.
    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Spacing `h_k` with the 1-based index used in the formulas.
    pub fn h(&self, k: usize) -> f64 {
        self.spacings[k - 1]
    }

    pub fn dilations(&self) -> &[f64] {
        &self.dilations
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Largest spacing; for an exponential mesh this is `h_n`.
    pub fn max_spacing(&self) -> f64 {
        self.spacings.iter().copied().fold(0.0, f64::max)
    }

    /// Builds a grid from explicit node positions. Useful for uniform or
    /// hand-made meshes in tests.
    pub fn from_nodes(nodes: Vec<f64>, nu: f64) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::invalid("n_intervals", "need at least 3 nodes"));
        }
        if !(nu > 1.0) {
            return Err(Error::invalid("nu", format!("{nu} must exceed 1")));
        }
        let spacings: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if spacings.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("nodes", "nodes must be strictly increasing"));
        }
        let n = spacings.len();
        let dilations = (0..=n)
            .map(|j| {
                let left = if j > 0 { spacings[j - 1] } else { 0.0 };
                let right = if j < n { spacings[j] } else { 0.0 };
                nu * left.max(right)
            })
            .collect();
        Ok(Self {
            nodes,
            spacings,
            dilations,
            nu,
        })
    }
}

pub fn generate_grid(cfg: &GridConfig) -> Result<Grid> {
    cfg.validate()?;
    let n = cfg.n_intervals;
    let lo = (cfg.domain_start + cfg.eps).ln();
    let hi = (cfg.domain_end + cfg.eps).ln();
    let step = (hi - lo) / n as f64;
    let mut nodes: Vec<f64> = (0..=n)
        .map(|i| (lo + step * i as f64).exp() - cfg.eps)
        .collect();
    // exp/ln round trip is not exact; pin the endpoints
    nodes[0] = cfg.domain_start;
    nodes[n] = cfg.domain_end;
    Grid::from_nodes(nodes, cfg.nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(n: usize, a: f64, b: f64, eps: f64) -> GridConfig {
        GridConfig {
            n_intervals: n,
            domain_start: a,
            domain_end: b,
            eps,
            nu: 2.2,
        }
    }

    #[test]
    fn two_interval_unit_grid() {
        let g = generate_grid(&cfg(2, 0.0, 1.0, 1.0)).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert!((g.nodes()[1] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(g.nodes()[2], 1.0);
    }

    #[test]
    fn endpoints_exact() {
        let g = generate_grid(&cfg(600, 0.0, 100.0, 1e-5)).unwrap();
        assert_eq!(g.start(), 0.0);
        assert_eq!(g.end(), 100.0);
        assert_eq!(g.nodes().len(), 601);
    }

    #[test]
    fn smaller_eps_pulls_first_node_in() {
        let fine = generate_grid(&cfg(600, 0.0, 100.0, 1e-5)).unwrap();
        let coarse = generate_grid(&cfg(600, 0.0, 100.0, 1e-4)).unwrap();
        // x_1 = eps * ((1 + I_b/eps)^(1/n) - 1)
        let direct = |eps: f64| eps * ((1.0 + 100.0 / eps).powf(1.0 / 600.0) - 1.0);
        assert!((fine.nodes()[1] - direct(1e-5)).abs() < 1e-18);
        assert!((coarse.nodes()[1] - direct(1e-4)).abs() < 1e-17);
        assert!(fine.nodes()[1] < coarse.nodes()[1]);
    }

    #[test]
    fn dilations_use_larger_neighbour_spacing() {
        let g = Grid::from_nodes(vec![0.0, 1.0, 3.0, 4.0], 2.0).unwrap();
        assert_eq!(g.dilations(), &[2.0, 4.0, 4.0, 2.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate_grid(&cfg(1, 0.0, 1.0, 0.1)).is_err());
        assert!(generate_grid(&cfg(10, 1.0, 1.0, 0.1)).is_err());
        assert!(generate_grid(&cfg(10, 0.0, 1.0, 0.0)).is_err());
        assert!(generate_grid(&cfg(10, 0.0, 1.0, -1e-3)).is_err());
        let mut c = cfg(10, 0.0, 1.0, 0.1);
        c.nu = 1.0;
        assert!(generate_grid(&c).is_err());
    }

    proptest! {
        #[test]
        fn nodes_strictly_increasing(n in 2usize..400, a in 0.0f64..5.0, len in 0.1f64..200.0, leps in -7.0f64..0.0) {
            let g = generate_grid(&cfg(n, a, a + len, 10f64.powf(leps))).unwrap();
            prop_assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            prop_assert!(g.spacings().iter().all(|h| *h > 0.0));
        }

        #[test]
        fn eps_intensity(n in 2usize..400, leps in -7.0f64..-0.5, factor in 1.5f64..10.0) {
            let e_small = 10f64.powf(leps);
            let small = generate_grid(&cfg(n, 0.0, 100.0, e_small)).unwrap();
            let large = generate_grid(&cfg(n, 0.0, 100.0, (e_small * factor).min(1.0))).unwrap();
            prop_assert!(small.nodes()[1] < large.nodes()[1]);
        }

        #[test]
        fn double_cloud_coverage(n in 4usize..200, leps in -6.0f64..0.0, nu in 1.1f64..3.0, t in 0.0f64..1.0) {
            let mut c = cfg(n, 0.0, 50.0, 10f64.powf(leps));
            c.nu = nu;
            let g = generate_grid(&c).unwrap();
            // sample one point per interval at relative offset t
            for (k, w) in g.nodes().windows(2).enumerate() {
                let x = w[0] + t.clamp(1e-9, 1.0 - 1e-9) * (w[1] - w[0]);
                let covering = g
                    .nodes()
                    .iter()
                    .zip(g.dilations())
                    .filter(|(xi, rho)| (x - **xi).abs() < **rho)
                    .count();
                prop_assert!(covering >= 2, "interval {k} covered by {covering}");
            }
        }
    }
}
