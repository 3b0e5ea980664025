//! Radial Coulomb-Dirac operator data: potentials, the closed-form bound
//! spectrum and convection/reaction diagnostics of the decoupled
//! second-order equations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Speed of light in atomic units.
pub const SPEED_OF_LIGHT: f64 = 137.035999084;
/// Bohr radius in femtometres.
pub const BOHR_IN_FM: f64 = 5.29177210903e4;
/// Nuclear radius constant `r_0` in `R = r_0 A^{1/3}`, femtometres.
pub const NUCLEAR_R0_FM: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NucleusModel {
    #[default]
    Point,
    /// Uniformly charged sphere of radius `R = r_0 A^{1/3}`.
    ExtendedUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSystem {
    pub z: f64,
    pub atomic_weight: f64,
    pub kappa: i32,
    pub c: f64,
    pub mass: f64,
    pub nucleus: NucleusModel,
    /// Nuclear radius constant in femtometres.
    pub r0_fm: f64,
}

impl Default for PhysicalSystem {
    fn default() -> Self {
        Self {
            z: 118.0,
            atomic_weight: 294.0,
            kappa: -2,
            c: SPEED_OF_LIGHT,
            mass: 1.0,
            nucleus: NucleusModel::Point,
            r0_fm: NUCLEAR_R0_FM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// Second-order coefficients of the decoupled `F` and `G` equations,
/// `F'' + gamma1 F' + gamma2 F = 0` and `G'' + theta1 G' + theta2 G = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondOrderCoefficients {
    pub gamma1: f64,
    pub gamma2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Which decoupled equation the diagnostics are computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Large,
    Small,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvectionDiagnostics {
    pub peclet: Vec<f64>,
    /// `f64::INFINITY` marks intervals where the convection coefficient vanishes.
    pub damkohler: Vec<f64>,
    pub product_2_pe_da: Vec<f64>,
}

impl PhysicalSystem {
    pub fn hydrogen_like(z: f64, kappa: i32) -> Self {
        Self {
            z,
            kappa,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa == 0 {
            return Err(Error::invalid("kappa", "kappa must be nonzero"));
        }
        if !(self.z >= 0.0) {
            return Err(Error::invalid("z", "nuclear charge must be >= 0"));
        }
        if !(self.c > 0.0) {
            return Err(Error::invalid("c", "speed of light must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::invalid("mass", "mass must be positive"));
        }
        if self.nucleus == NucleusModel::ExtendedUniform && !(self.atomic_weight > 0.0) {
            return Err(Error::invalid("atomic_weight", "extended nucleus needs A > 0"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        1.0 / self.c
    }

    pub fn rest_energy(&self) -> f64 {
        self.mass * self.c * self.c
    }

    /// Nuclear radius in bohr.
    pub fn nuclear_radius(&self) -> f64 {
        self.r0_fm * self.atomic_weight.cbrt() / BOHR_IN_FM
    }

    /// Same system in the non-relativistic limit (speed of light times 100).
    pub fn non_relativistic_limit(&self) -> Self {
        Self {
            c: self.c * 100.0,
            ..*self
        }
    }

    /// `V(x)` and `V'(x)`.
    pub fn potential_and_slope(&self, x: f64) -> Result<(f64, f64)> {
        let z = self.z;
        match self.nucleus {
            NucleusModel::Point => {
                if !(x > 0.0) {
                    return Err(Error::PotentialDomain { x });
                }
                Ok((-z / x, z / (x * x)))
            }
            NucleusModel::ExtendedUniform => {
                if !(x >= 0.0) {
                    return Err(Error::PotentialDomain { x });
                }
                let r = self.nuclear_radius();
                if x <= r {
                    Ok((-(z / (2.0 * r)) * (3.0 - x * x / (r * r)), z * x / (r * r * r)))
                } else {
                    Ok((-z / x, z / (x * x)))
                }
            }
        }
    }

    pub fn potential(&self, x: f64) -> Result<f64> {
        self.potential_and_slope(x).map(|(v, _)| v)
    }

    /// `w^{+/-}(x) = +/- m c^2 + V(x)`.
    pub fn w_pm(&self, x: f64, sign: Sign) -> Result<f64> {
        let v = self.potential(x)?;
        Ok(match sign {
            Sign::Plus => self.rest_energy() + v,
            Sign::Minus => -self.rest_energy() + v,
        })
    }

    /// First admissible orbital level number: `nr = 1` for `kappa < 0`,
    /// `nr = 2` for `kappa > 0` (no nodeless state exists there).
    pub fn first_level(&self) -> u32 {
        if self.kappa < 0 {
            1
        } else {
            2
        }
    }

    /// Closed-form point-nucleus bound state, shifted by `-m c^2`.
    pub fn exact_eigenvalue(&self, nr: u32) -> Result<f64> {
        if nr < 1 {
            return Err(Error::invalid("nr", "orbital level number must be >= 1"));
        }
        let za2 = (self.z * self.alpha()).powi(2);
        let kappa2 = (self.kappa as f64).powi(2);
        if za2 >= kappa2 {
            return Err(Error::Supercritical {
                z2a2: za2,
                kappa2,
            });
        }
        let mc2 = self.rest_energy();
        let denom = nr as f64 - 1.0 + (kappa2 - za2).sqrt();
        let ratio = za2 / (denom * denom);
        // mc^2 (1/sqrt(1 + r) - 1) without cancellation
        let s = (1.0 + ratio).sqrt();
        Ok(-mc2 * ratio / (s * (1.0 + s)))
    }

    /// Exact shifted levels for `kappa`, starting at the first admissible level.
    pub fn exact_levels(&self, count: usize) -> Result<Vec<f64>> {
        let first = self.first_level();
        (0..count as u32).map(|k| self.exact_eigenvalue(first + k)).collect()
    }

    pub fn second_order_coefficients(&self, lambda: f64, x: f64) -> Result<SecondOrderCoefficients> {
        let (v, dv) = self.potential_and_slope(x)?;
        let mc2 = self.rest_energy();
        let wp = mc2 + v - lambda;
        let wm = -mc2 + v - lambda;
        if wm == 0.0 {
            return Err(Error::CoefficientPole { x, branch: '-' });
        }
        if wp == 0.0 {
            return Err(Error::CoefficientPole { x, branch: '+' });
        }
        let k = self.kappa as f64;
        let c2 = self.c * self.c;
        let common = wp * wm / c2;
        Ok(SecondOrderCoefficients {
            gamma1: -dv / wm,
            theta1: -dv / wp,
            gamma2: common - (k * k + k) / (x * x) - k * dv / (x * wm),
            theta2: common - (k * k - k) / (x * x) + k * dv / (x * wp),
        })
    }

    /// Grid Peclet and Damkohler numbers with unit diffusivity, sampling the
    /// convection (`gamma1`/`theta1`) and reaction (`gamma2`/`theta2`)
    /// coefficients at each interval midpoint.
    pub fn convection_diagnostics(&self, lambda: f64, grid: &Grid, component: Component) -> Result<ConvectionDiagnostics> {
        const DIFFUSIVITY: f64 = 1.0;
        let mut out = ConvectionDiagnostics {
            peclet: Vec::with_capacity(grid.n_intervals()),
            damkohler: Vec::with_capacity(grid.n_intervals()),
            product_2_pe_da: Vec::with_capacity(grid.n_intervals()),
        };
        for (w, &h) in grid.nodes().windows(2).zip(grid.spacings()) {
            let mid = 0.5 * (w[0] + w[1]);
            let coeffs = self.second_order_coefficients(lambda, mid)?;
            let (u, s) = match component {
                Component::Large => (coeffs.gamma1, coeffs.gamma2),
                Component::Small => (coeffs.theta1, coeffs.theta2),
            };
            out.peclet.push(u.abs() * h / (2.0 * DIFFUSIVITY));
            out.damkohler.push(if u == 0.0 { f64::INFINITY } else { s * h / u.abs() });
            out.product_2_pe_da.push(s * h * h / DIFFUSIVITY);
        }
        Ok(out)
    }
}
