//! Dense generalized eigensolver and classification of the computed spectrum
//! against the closed-form levels.

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::prelude::*;
use faer::{Mat, MatRef, Par, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::PhysicalSystem;

/// All generalized eigenvalues of `A x = lambda B x`.
///
/// The pencil is reduced to a standard problem and handed to a dense
/// Hessenberg-QR eigensolver: `L^-1 A L^-T` when `B = L L^T` is symmetric
/// positive definite, `B^-1 A` through a pivoted LU otherwise.
pub fn solve_generalized(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !a.is_all_finite() || !b.is_all_finite() {
        return Err(Error::invalid("matrix", "non-finite entries in the pencil"));
    }
    let standard = match symmetric_reduction(a, b) {
        Some(c) => c,
        None => lu_reduction(a, b)?,
    };
    let eigs = standard.eigenvalues().map_err(|_| Error::NoConvergence)?;
    Ok(eigs.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

fn is_symmetric(m: MatRef<'_, f64>) -> bool {
    let n = m.nrows();
    (0..n).all(|j| (0..j).all(|i| m[(i, j)] == m[(j, i)]))
}

/// `L^-1 A L^-T` for symmetric positive definite `B`; `None` when `B` is
/// not symmetric or the Cholesky factorization fails.
fn symmetric_reduction(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Option<Mat<f64>> {
    if !is_symmetric(b) {
        return None;
    }
    let llt = b.llt(Side::Lower).ok()?;
    let l = llt.L();
    let mut c = a.to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut ct = c.transpose().to_owned();
    solve_lower_triangular_in_place(l, ct.as_mut(), Par::Seq);
    Some(ct.transpose().to_owned())
}

fn lu_reduction(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let lu = b.partial_piv_lu();
    let u = lu.U();
    let diag: Vec<f64> = (0..u.nrows()).map(|k| u[(k, k)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= max * f64::EPSILON * b.nrows() as f64 {
        return Err(Error::SingularB);
    }
    Ok(lu.solve(a))
}

fn frobenius(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}

/// Relative residual `||A x - lambda B x|| / ((||A|| + |lambda| ||B||) ||x||)`
/// of the eigenvector obtained by inverse iteration at the real shift
/// `lambda`. Matrix norms are Frobenius, vector norms Euclidean.
pub fn eigen_residual(a: MatRef<'_, f64>, b: MatRef<'_, f64>, lambda: f64) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch("pencil is not square".into()));
    }
    let shifted = Mat::from_fn(n, n, |i, j| a[(i, j)] - lambda * b[(i, j)]);
    let lu = shifted.partial_piv_lu();
    // deterministic start vector with no special structure
    let mut x = Mat::from_fn(n, 1, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    for _ in 0..3 {
        let rhs = b * &x;
        let mut y = lu.solve(&rhs);
        let norm = y.norm_l2();
        if !(norm.is_finite() && norm > 0.0) {
            // exactly singular shift: the pivot structure already exposes x
            break;
        }
        y /= faer::Scale(norm);
        x = y;
    }
    let r = a * &x - faer::Scale(lambda) * (b * &x);
    let scale = (frobenius(a) + lambda.abs() * frobenius(b)) * x.norm_l2();
    Ok(r.norm_l2() / scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    /// Eigenvalues with `|im| <= imag_tol |re|` count as real.
    pub imag_tol: f64,
    /// Relative distance beyond which an unmatched value is spurious.
    pub match_tol: f64,
    /// Relative agreement with the opposite-kappa ground level.
    pub coincidence_tol: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        Self {
            imag_tol: 1e-8,
            match_tol: 1e-3,
            coincidence_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumFlag {
    Genuine,
    InstilledSpurious,
    CoincidenceSuspect,
    UnmatchedTail,
}

impl SpectrumFlag {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumFlag::Genuine => "genuine",
            SpectrumFlag::InstilledSpurious => "instilled_spurious",
            SpectrumFlag::CoincidenceSuspect => "coincidence_suspect",
            SpectrumFlag::UnmatchedTail => "unmatched_tail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMatch {
    /// 1-based position in the requested level list.
    pub level: usize,
    /// Index into `positive_shifted`.
    pub index: usize,
    pub computed: f64,
    pub exact: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Raw eigenvalues as `(re, im)` pairs in solver order.
    pub raw: Vec<(f64, f64)>,
    pub real_spectrum: Vec<f64>,
    /// `lambda - m c^2` for the positive real eigenvalues, ascending.
    pub positive_shifted: Vec<f64>,
    /// `lambda + m c^2` for the negative real eigenvalues, ascending.
    pub negative_shifted: Vec<f64>,
    pub matches: Vec<LevelMatch>,
    /// One flag per entry of `positive_shifted`.
    pub flags: Vec<SpectrumFlag>,
}

impl SpectrumReport {
    pub fn count(&self, flag: SpectrumFlag) -> usize {
        self.flags.iter().filter(|f| **f == flag).count()
    }

    /// `(value, flag)` pairs for entries carrying `flag`.
    pub fn flagged(&self, flag: SpectrumFlag) -> Vec<f64> {
        self.positive_shifted
            .iter()
            .zip(&self.flags)
            .filter(|(_, f)| **f == flag)
            .map(|(v, _)| *v)
            .collect()
    }

    /// Number of bound values (shifted into `(-m c^2, 0)`).
    pub fn bound_count(&self) -> usize {
        self.positive_shifted.iter().filter(|v| **v < 0.0).count()
    }
}

/// Index of the value in `sorted[start..]` closest to `target`; ties go to
/// the lower value.
fn nearest_from(sorted: &[f64], start: usize, target: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in sorted.iter().enumerate().skip(start) {
        if best.map_or(true, |b| (v - target).abs() < (sorted[b] - target).abs()) {
            best = Some(i);
        }
    }
    best
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Pairs exact levels with computed values and flags the rest.
///
/// Matching walks the exact levels upward; each takes the nearest computed
/// value above the previous match (ties go to the lower value).
pub fn classify_spectrum(
    eigs: &[Complex64],
    sys: &PhysicalSystem,
    levels: usize,
    tol: &ClassifyTolerances,
) -> Result<SpectrumReport> {
    let exact = sys.exact_levels(levels)?;
    let mc2 = sys.rest_energy();

    let mut real_spectrum: Vec<f64> = eigs
        .iter()
        .filter(|z| z.re.is_finite() && z.im.is_finite() && z.im.abs() <= tol.imag_tol * z.re.abs())
        .map(|z| z.re)
        .collect();
    real_spectrum.sort_by(f64::total_cmp);
    let positive_shifted: Vec<f64> = real_spectrum.iter().filter(|v| **v > 0.0).map(|v| v - mc2).collect();
    let negative_shifted: Vec<f64> = real_spectrum.iter().filter(|v| **v < 0.0).map(|v| v + mc2).collect();
    if !positive_shifted.iter().any(|v| *v < 0.0 && *v > -mc2) {
        return Err(Error::EmptySpectrum);
    }

    let mut matches = Vec::with_capacity(exact.len());
    let mut next = 0usize;
    for (k, &e) in exact.iter().enumerate() {
        let Some(i) = nearest_from(&positive_shifted, next, e) else { break };
        matches.push(LevelMatch {
            level: k + 1,
            index: i,
            computed: positive_shifted[i],
            exact: e,
            relative_error: rel(positive_shifted[i], e),
        });
        next = i + 1;
    }

    let mut flags = vec![SpectrumFlag::UnmatchedTail; positive_shifted.len()];
    for m in &matches {
        flags[m.index] = SpectrumFlag::Genuine;
    }
    if let (Some(first), Some(_)) = (matches.first(), matches.last()) {
        // below the first match: only the opposite-kappa coincidence is recognised
        if sys.kappa > 0 {
            let partner = PhysicalSystem { kappa: -sys.kappa, ..*sys };
            let ground = partner.exact_eigenvalue(1)?;
            for i in 0..first.index {
                if rel(positive_shifted[i], ground) <= tol.coincidence_tol {
                    flags[i] = SpectrumFlag::CoincidenceSuspect;
                }
            }
        }
        for pair in matches.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            for i in lo.index + 1..hi.index {
                let v = positive_shifted[i];
                flags[i] = if rel(v, lo.exact) > tol.match_tol && rel(v, hi.exact) > tol.match_tol {
                    SpectrumFlag::InstilledSpurious
                } else {
                    // a second value sitting on a genuine level
                    SpectrumFlag::CoincidenceSuspect
                };
            }
        }
    }

    Ok(SpectrumReport {
        raw: eigs.iter().map(|z| (z.re, z.im)).collect(),
        real_spectrum,
        positive_shifted,
        negative_shifted,
        matches,
        flags,
    })
}

/// Least-squares slope of `ln(error)` against `ln(h)`.
pub fn convergence_rate(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::invalid("samples", format!("need >= 3 samples, got {}", samples.len())));
    }
    if samples.iter().any(|(h, e)| !(*h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())) {
        return Err(Error::invalid("samples", "h and errors must be positive and finite"));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(h, e)| (h.ln(), e.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-24 * m) {
        return Err(Error::invalid("samples", "all samples share one spacing"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut v: Vec<Complex64>) -> Vec<f64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re));
        v.into_iter().map(|z| z.re).collect()
    }

    #[test]
    fn diagonal_pencil() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { [2.0, 3.0][i] } else { 0.0 });
        let b = Mat::<f64>::identity(2, 2);
        assert_eq!(sorted_re(solve_generalized(a.as_ref(), b.as_ref()).unwrap()), vec![2.0, 3.0]);
    }

    #[test]
    fn swap_pencil() {
        let a = Mat::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 });
        let b = Mat::<f64>::identity(2, 2);
        let ev = sorted_re(solve_generalized(a.as_ref(), b.as_ref()).unwrap());
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_pair_survives() {
        // rotation generator: eigenvalues +-i
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => -1.0,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        let ev = solve_generalized(a.as_ref(), Mat::<f64>::identity(2, 2).as_ref()).unwrap();
        assert!(ev.iter().all(|z| (z.im.abs() - 1.0).abs() < 1e-14 && z.re.abs() < 1e-14));
    }

    #[test]
    fn nonsymmetric_b_uses_lu() {
        let a = Mat::from_fn(2, 2, |i, j| [[2.0, 1.0], [0.0, 3.0]][i][j]);
        let b = Mat::from_fn(2, 2, |i, j| [[1.0, 0.5], [0.0, 1.0]][i][j]);
        // det(A - lambda B) = (2 - lambda)(3 - lambda)
        let ev = sorted_re(solve_generalized(a.as_ref(), b.as_ref()).unwrap());
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_b_rejected() {
        let a = Mat::<f64>::identity(2, 2);
        let b = Mat::from_fn(2, 2, |i, j| [[1.0, 2.0], [0.5, 1.0]][i][j]);
        assert_eq!(solve_generalized(a.as_ref(), b.as_ref()), Err(Error::SingularB));
    }

    #[test]
    fn mismatched_dimensions() {
        let a = Mat::<f64>::zeros(2, 2);
        let b = Mat::<f64>::zeros(3, 3);
        assert!(matches!(solve_generalized(a.as_ref(), b.as_ref()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn residual_small_for_true_eigenvalue() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { (i + 1) as f64 } else { 0.1 });
        let b = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.0 });
        for z in solve_generalized(a.as_ref(), b.as_ref()).unwrap() {
            assert!(eigen_residual(a.as_ref(), b.as_ref(), z.re).unwrap() < 1e-13);
        }
        assert!(eigen_residual(a.as_ref(), b.as_ref(), 0.9).unwrap() > 1e-3);
    }

    fn shifted_to_raw(values: &[f64], sys: &PhysicalSystem) -> Vec<Complex64> {
        values.iter().map(|v| Complex64::new(v + sys.rest_energy(), 0.0)).collect()
    }

    #[test]
    fn perfect_input_is_all_genuine() {
        let sys = PhysicalSystem::hydrogen_like(1.0, -1);
        let exact = sys.exact_levels(5).unwrap();
        let r = classify_spectrum(&shifted_to_raw(&exact, &sys), &sys, 5, &Default::default()).unwrap();
        assert_eq!(r.matches.len(), 5);
        assert!(r.flags.iter().all(|f| *f == SpectrumFlag::Genuine));
        // the round trip through lambda = value + m c^2 costs a few ulps of m c^2
        assert!(r.matches.iter().all(|m| m.relative_error < 1e-10));
    }

    #[test]
    fn hydrogen_spurious_and_coincidence() {
        // Z = 1, kappa = 1 computed column of the unstabilized hydrogen run
        let sys = PhysicalSystem::hydrogen_like(1.0, 1);
        let computed = [
            -0.50000665661,
            -0.12500208839,
            -0.05555631532,
            -0.03141172060,
            -0.03118772524,
            -0.01974434508,
        ];
        let r = classify_spectrum(&shifted_to_raw(&computed, &sys), &sys, 4, &Default::default()).unwrap();
        assert_eq!(r.flags[0], SpectrumFlag::CoincidenceSuspect);
        let spurious = r.flagged(SpectrumFlag::InstilledSpurious);
        assert_eq!(spurious.len(), 1);
        assert!((spurious[0] + 0.03141172060).abs() < 1e-10);
        assert_eq!(r.count(SpectrumFlag::Genuine), 4);
    }

    #[test]
    fn negative_branch_is_split_off() {
        let sys = PhysicalSystem::hydrogen_like(1.0, -1);
        let mut raw = shifted_to_raw(&sys.exact_levels(2).unwrap(), &sys);
        raw.push(Complex64::new(-sys.rest_energy() - 3.0, 0.0));
        raw.push(Complex64::new(1.0, 0.5));
        let r = classify_spectrum(&raw, &sys, 2, &Default::default()).unwrap();
        assert_eq!(r.negative_shifted, vec![-3.0]);
        assert_eq!(r.real_spectrum.len(), 3);
        assert_eq!(r.raw.len(), 4);
    }

    #[test]
    fn ties_go_to_the_lower_value() {
        assert_eq!(nearest_from(&[1.0, 3.0], 0, 2.0), Some(0));
        assert_eq!(nearest_from(&[1.0, 3.0], 1, 2.0), Some(1));
        assert_eq!(nearest_from(&[1.0, 3.0], 2, 2.0), None);
        assert_eq!(nearest_from(&[-4.0, -1.0, 0.5, 2.0], 0, 1.25), Some(2));
    }

    #[test]
    fn values_past_the_last_match_are_tail() {
        let sys = PhysicalSystem::hydrogen_like(1.0, -1);
        let e = sys.exact_levels(1).unwrap()[0];
        let raw = shifted_to_raw(&[e, -0.1, -0.01], &sys);
        let r = classify_spectrum(&raw, &sys, 1, &Default::default()).unwrap();
        assert_eq!(r.matches[0].index, 0);
        assert_eq!(r.flags, vec![SpectrumFlag::Genuine, SpectrumFlag::UnmatchedTail, SpectrumFlag::UnmatchedTail]);
    }

    #[test]
    fn zero_levels_and_empty_gap() {
        let sys = PhysicalSystem::hydrogen_like(1.0, -1);
        let raw = shifted_to_raw(&[-0.5], &sys);
        let r = classify_spectrum(&raw, &sys, 0, &Default::default()).unwrap();
        assert!(r.matches.is_empty());
        let none = shifted_to_raw(&[0.3], &sys);
        assert_eq!(classify_spectrum(&none, &sys, 3, &Default::default()), Err(Error::EmptySpectrum));
    }

    #[test]
    fn rates_on_power_laws() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let lin: Vec<_> = h.iter().map(|h| (*h, 3.0 * h)).collect();
        let quad: Vec<_> = h.iter().map(|h| (*h, 0.5 * h * h)).collect();
        assert!((convergence_rate(&lin).unwrap() - 1.0).abs() < 1e-8);
        assert!((convergence_rate(&quad).unwrap() - 2.0).abs() < 1e-8);
        assert!(convergence_rate(&lin[..2]).is_err());
        assert!(convergence_rate(&[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)]).is_err());
        assert!(convergence_rate(&[(0.1, 1.0), (0.2, 0.0), (0.3, 3.0)]).is_err());
    }
}
