//! Weight functions and intrinsic enrichment bases `P(x) = [1, p_2(x), ...]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFunction {
    /// `1 - 6r^2 + 8r^3 - 3r^4` on `r <= 1`, zero outside. C^2 inside, C^1 at the cutoff.
    #[default]
    QuarticSpline,
}

impl WeightFunction {
    /// Value and derivative with respect to `r`, for `r >= 0`.
    #[inline]
    pub fn eval(self, r: f64) -> (f64, f64) {
        match self {
            WeightFunction::QuarticSpline => {
                if r >= 1.0 {
                    (0.0, 0.0)
                } else {
                    let r2 = r * r;
                    (
                        1.0 - 6.0 * r2 + 8.0 * r2 * r - 3.0 * r2 * r2,
                        -12.0 * r + 24.0 * r2 - 12.0 * r2 * r,
                    )
                }
            }
        }
    }
}

pub fn quartic_spline(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid("r", format!("weight argument {r} must be >= 0")));
    }
    Ok(WeightFunction::QuarticSpline.eval(r).0)
}

pub fn quartic_spline_deriv(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid("r", format!("weight argument {r} must be >= 0")));
    }
    Ok(WeightFunction::QuarticSpline.eval(r).1)
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_quantum_numbers(nr: u32, ell: u32) -> Result<()> {
    if nr < 1 {
        return Err(Error::invalid("nr", "orbital level number must be >= 1"));
    }
    if ell > 32 || nr > 64 {
        return Err(Error::invalid("ell", format!("unsupported quantum numbers nr={nr}, ell={ell}")));
    }
    Ok(())
}

/// Coefficients `c_k` of `L_{nr+ell}^{2 ell + 1}(x) = sum_k c_k x^k`.
fn laguerre_coefficients(nr: u32, ell: u32) -> Vec<f64> {
    let degree = nr + ell;
    let top = nr + 3 * ell + 1;
    let mut factorial = 1.0;
    (0..=degree)
        .map(|k| {
            if k > 0 {
                factorial *= k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / factorial * binomial(top, degree - k)
        })
        .collect()
}

fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut deriv = 0.0;
    for c in coeffs.iter().rev() {
        deriv = deriv * x + value;
        value = value * x + c;
    }
    (value, deriv)
}

/// Generalized Laguerre polynomial `L_{nr+ell}^{2 ell+1}(x)`.
pub fn laguerre(nr: u32, ell: u32, x: f64) -> Result<f64> {
    check_quantum_numbers(nr, ell)?;
    Ok(horner(&laguerre_coefficients(nr, ell), x).0)
}

/// Intrinsic enrichment functions available for the cloud basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnrichmentKind {
    /// `[1]`: Shepard functions.
    Constant,
    /// `[1, x, ..., x^degree]`.
    Monomial { degree: u32 },
    /// `[1, x (1 - x/2) exp(-x/2)]`.
    Sto,
    /// `[1, R_{nr,ell}(x)]` with the non-relativistic hydrogenic radial shape.
    Hydrogenic { z: f64, nr: u32, ell: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnrichmentBasis {
    kind: EnrichmentKind,
    #[serde(skip)]
    laguerre: Vec<f64>,
}

impl EnrichmentBasis {
    pub fn constant() -> Self {
        Self {
            kind: EnrichmentKind::Constant,
            laguerre: Vec::new(),
        }
    }

    pub fn monomial(degree: u32) -> Self {
        Self {
            kind: EnrichmentKind::Monomial { degree },
            laguerre: Vec::new(),
        }
    }

    pub fn kind(&self) -> &EnrichmentKind {
        &self.kind
    }

    /// Number of basis members `m` (including the constant).
    pub fn size(&self) -> usize {
        match self.kind {
            EnrichmentKind::Constant => 1,
            EnrichmentKind::Monomial { degree } => degree as usize + 1,
            EnrichmentKind::Sto | EnrichmentKind::Hydrogenic { .. } => 2,
        }
    }

    /// Fills `p[k]` and `dp[k]` with `p_k(x)` and `p_k'(x)`.
    #[inline]
    pub fn eval(&self, x: f64, p: &mut [f64], dp: &mut [f64]) {
        p[0] = 1.0;
        dp[0] = 0.0;
        match self.kind {
            EnrichmentKind::Constant => {}
            EnrichmentKind::Monomial { degree } => {
                let mut pow = 1.0;
                for k in 1..=degree as usize {
                    dp[k] = k as f64 * pow;
                    pow *= x;
                    p[k] = pow;
                }
            }
            EnrichmentKind::Sto => {
                let e = (-0.5 * x).exp();
                let poly = x * (1.0 - 0.5 * x);
                p[1] = poly * e;
                dp[1] = ((1.0 - x) - 0.5 * poly) * e;
            }
            EnrichmentKind::Hydrogenic { z, nr, ell } => {
                let scale = 2.0 * z / nr as f64;
                let s = scale * x;
                let (l, dl) = horner(&self.laguerre, s);
                let e = (-0.5 * s).exp();
                let ell = ell as i32;
                let s_ell = s.powi(ell);
                let ds_ell = if ell == 0 {
                    0.0
                } else {
                    ell as f64 * s.powi(ell - 1)
                };
                p[1] = s_ell * l * e;
                dp[1] = scale * (ds_ell * l + s_ell * dl - 0.5 * s_ell * l) * e;
            }
        }
    }

    /// Convenience evaluation returning owned vectors.
    pub fn values(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.size();
        let mut p = vec![0.0; m];
        let mut dp = vec![0.0; m];
        self.eval(x, &mut p, &mut dp);
        (p, dp)
    }

    /// Parses `sto`, `hydrogenic:nr,ell`, `monomial:k` or `constant`. The
    /// nuclear charge feeds the hydrogenic length scale.
    pub fn from_name(name: &str, z: f64) -> Result<Self> {
        let name = name.trim();
        let (head, args) = match name.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (name, None),
        };
        let bad = || Error::invalid("enrichment", format!("unrecognized enrichment `{name}`"));
        match (head.to_ascii_lowercase().as_str(), args) {
            ("sto", None) => Ok(sto_default_basis()),
            ("constant" | "shepard", None) => Ok(Self::constant()),
            ("monomial", Some(a)) => {
                let degree: u32 = a.parse().map_err(|_| bad())?;
                Ok(Self::monomial(degree))
            }
            ("hydrogenic", Some(a)) => {
                let (nr, ell) = a.split_once(',').ok_or_else(bad)?;
                let nr: u32 = nr.trim().parse().map_err(|_| bad())?;
                let ell: u32 = ell.trim().parse().map_err(|_| bad())?;
                hydrogenic_basis(z, nr, ell)
            }
            _ => Err(bad()),
        }
    }

    /// Name accepted by [`EnrichmentBasis::from_name`].
    pub fn name(&self) -> String {
        match self.kind {
            EnrichmentKind::Constant => "constant".into(),
            EnrichmentKind::Monomial { degree } => format!("monomial:{degree}"),
            EnrichmentKind::Sto => "sto".into(),
            EnrichmentKind::Hydrogenic { nr, ell, .. } => format!("hydrogenic:{nr},{ell}"),
        }
    }
}

pub fn sto_default_basis() -> EnrichmentBasis {
    EnrichmentBasis {
        kind: EnrichmentKind::Sto,
        laguerre: Vec::new(),
    }
}

/// `[1, (2Zx/nr)^ell L(2Zx/nr) exp(-Zx/nr)]` in atomic units, unnormalized.
pub fn hydrogenic_basis(z: f64, nr: u32, ell: u32) -> Result<EnrichmentBasis> {
    check_quantum_numbers(nr, ell)?;
    if !(z > 0.0) {
        return Err(Error::invalid("z", "hydrogenic enrichment needs Z > 0"));
    }
    Ok(EnrichmentBasis {
        kind: EnrichmentKind::Hydrogenic { z, nr, ell },
        laguerre: laguerre_coefficients(nr, ell),
    })
}
