//! Order-parameter branch `l(σ)`, critical diffusion `σ0` and phase diagrams.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{EquilibriumGrid, EquilibriumSpec, QuadratureRule};
use crate::potential::{r0, speed_map_inverse, RadialPotential};

/// Points of the verification grid for `Z(σ, ·)`.
pub const SCAN_POINTS: usize = 200;

/// Relative spread of `Z` below which a stretch of the scan counts as flat.
pub const PLATEAU_TOL: f64 = 1e-10;

/// Minimal length of a flat stretch.
pub const PLATEAU_LEN: f64 = 1e-2;

/// Relative gap below which two separated maxima are reported as ties.
pub const TIE_TOL: f64 = 1e-8;

/// `log Z(σ, l)` on the verification grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScan {
    pub l: Vec<f64>,
    pub log_z: Vec<f64>,
}

/// Upper end of the scan interval, `3(r0 + 1)` or 3 without a critical point.
pub fn scan_limit(pot: &RadialPotential) -> f64 {
    match r0(pot) {
        Ok(r) => 3.0 * (r + 1.0),
        Err(_) => 3.0,
    }
}

fn spec(d: usize, sigma: f64, l: f64, pot: &RadialPotential) -> Result<EquilibriumSpec> {
    EquilibriumSpec::new(d, sigma, l, pot.clone())
}

pub fn scan_z(d: usize, sigma: f64, pot: &RadialPotential, rule: &QuadratureRule) -> Result<ZScan> {
    let top = scan_limit(pot);
    let l: Vec<f64> = (0..SCAN_POINTS)
        .map(|k| top * k as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let log_z = l
        .iter()
        .map(|&x| Ok(EquilibriumGrid::new(&spec(d, sigma, x, pot)?, rule)?.log_z()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ZScan { l, log_z })
}

/// First stretch of at least three consecutive scan points spanning more
/// than [`PLATEAU_LEN`] over which `Z` varies by less than [`PLATEAU_TOL`].
pub fn detect_plateau(scan: &ZScan) -> Option<(f64, f64)> {
    let n = scan.l.len();
    let mut start = 0;
    while start + 2 < n {
        let mut end = start;
        let (mut lo, mut hi) = (scan.log_z[start], scan.log_z[start]);
        while end + 1 < n {
            let v = scan.log_z[end + 1];
            let (nlo, nhi) = (lo.min(v), hi.max(v));
            if nhi - nlo >= PLATEAU_TOL {
                break;
            }
            lo = nlo;
            hi = nhi;
            end += 1;
        }
        if end >= start + 2 && scan.l[end] - scan.l[start] > PLATEAU_LEN {
            return Some((scan.l[start], scan.l[end]));
        }
        start = end.max(start + 1);
    }
    None
}

fn local_maxima(scan: &ZScan) -> Vec<usize> {
    let z = &scan.log_z;
    let n = z.len();
    (0..n)
        .filter(|&i| (i == 0 || z[i] >= z[i - 1]) && (i + 1 == n || z[i] >= z[i + 1]))
        .collect()
}

/// Index of the global maximum of the scan; ties between separated local
/// maxima are reported rather than resolved.
pub fn select_maximum(scan: &ZScan) -> Result<usize> {
    let maxima = local_maxima(scan);
    let best = *maxima
        .iter()
        .max_by(|&&a, &&b| scan.log_z[a].total_cmp(&scan.log_z[b]))
        .ok_or_else(|| Error::InvalidInput("empty scan".into()))?;
    for &m in &maxima {
        if m.abs_diff(best) > 1 && (scan.log_z[best] - scan.log_z[m]) <= TIE_TOL {
            let (a, b) = if m < best { (m, best) } else { (best, m) };
            return Err(Error::MultipleMaxima { first: scan.l[a], second: scan.l[b] });
        }
    }
    Ok(best)
}

fn h_and_slope(d: usize, sigma: f64, l: f64, pot: &RadialPotential, rule: &QuadratureRule) -> Result<(f64, f64)> {
    let g = EquilibriumGrid::new(&spec(d, sigma, l, pot)?, rule)?;
    Ok((g.h(), g.dh_dl()))
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok((a, b))
}

/// Root of the decreasing-through-zero function `H(σ, ·)` on a bracket
/// `H(lo) > 0 > H(hi)`, by Newton safeguarded with bisection.
fn newton_on_h(
    d: usize,
    sigma: f64,
    pot: &RadialPotential,
    rule: &QuadratureRule,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (h, dh) = h_and_slope(d, sigma, x, pot, rule)?;
        if h.abs() <= 1e-14 {
            return Ok(x);
        }
        if h > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(x);
        }
        let mut next = x - h / dh;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            return Ok(x);
        }
        x = next;
    }
    Ok(x)
}

/// Maximiser of `Z(σ, ·)`: `l(σ)` in the ordered phase, 0 in the disordered one.
pub fn find_l_star(d: usize, sigma: f64, pot: &RadialPotential, rule: &QuadratureRule) -> Result<f64> {
    spec(d, sigma, 0.0, pot)?;
    let scan = scan_z(d, sigma, pot, rule)?;
    if let Some((start, end)) = detect_plateau(&scan) {
        return Err(Error::Plateau { start, end });
    }
    let best = select_maximum(&scan)?;

    let step = scan.l[1];
    let (a, b) = if best == 0 {
        // l = 0 wins the scan; an ordered state can only hide inside the first cell
        let g0 = EquilibriumGrid::new(&spec(d, sigma, 0.0, pot)?, rule)?;
        if g0.d2z_dll() <= 0.0 {
            return Ok(0.0);
        }
        (0.0, step)
    } else {
        (scan.l[best - 1], scan.l[(best + 1).min(scan.l.len() - 1)])
    };
    let log_z_at = |l: f64| -> Result<f64> { Ok(EquilibriumGrid::new(&spec(d, sigma, l, pot)?, rule)?.log_z()) };
    let (ga, gb) = golden_max(log_z_at, a, b, 1e-3 * step)?;

    let h_at = |l: f64| -> Result<f64> { Ok(h_and_slope(d, sigma, l, pot, rule)?.0) };
    let mut lo = if ga > 0.0 { ga } else { 0.5 * gb };
    let mut hi = gb;
    let mut guard = 0;
    while h_at(lo)? <= 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 60 {
            return Ok(0.0);
        }
    }
    guard = 0;
    while h_at(hi)? >= 0.0 {
        hi += hi - lo;
        guard += 1;
        if guard > 60 {
            return Err(Error::NoSignChange { lo, hi });
        }
    }
    newton_on_h(d, sigma, pot, rule, lo, hi)
}

/// `σ² ∂²_ll Z(σ, 0) / Z = λ∥(σ, 0) - σ`.
fn curvature_at_origin(d: usize, sigma: f64, pot: &RadialPotential, rule: &QuadratureRule) -> Result<f64> {
    let g = EquilibriumGrid::new(&spec(d, sigma, 0.0, pot)?, rule)?;
    Ok(g.pressure_tensor().0 - sigma)
}

/// Default bracket `(1e-3, 10 r0²)`, or `(1e-3, 10)` without a critical point.
pub fn default_sigma_bracket(pot: &RadialPotential) -> (f64, f64) {
    match r0(pot) {
        Ok(r) => (1e-3, 10.0 * r * r),
        Err(_) => (1e-3, 10.0),
    }
}

/// Critical diffusion: the root of `∂²_ll Z(σ, 0)`.
pub fn find_sigma0(
    d: usize,
    pot: &RadialPotential,
    rule: &QuadratureRule,
    bracket: Option<(f64, f64)>,
) -> Result<f64> {
    let (mut a, mut b) = bracket.unwrap_or_else(|| default_sigma_bracket(pot));
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidInput(format!("invalid sigma bracket ({a}, {b})")));
    }
    let f = |s: f64| curvature_at_origin(d, s, pot, rule);
    let zero = |v: f64, s: f64| v.abs() <= 1e-12 * s;
    let (lo0, hi0) = (a, b);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if zero(fa, a) || zero(fb, b) || fa.signum() == fb.signum() {
        return Err(Error::NoSignChange { lo: lo0, hi: hi0 });
    }
    // Illinois variant of regula falsi
    let mut side = 0i32;
    for _ in 0..300 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let fc = f(c)?;
        if fc.abs() <= 1e-14 * c || (b - a) <= 4.0 * f64::EPSILON * b {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Order parameter across a σ-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub sigmas: Vec<f64>,
    pub l_values: Vec<f64>,
    pub z_at_l_star: Vec<f64>,
    pub d2z_at_l_star: Vec<f64>,
    /// Implicit slope `dl/dσ = -∂_σH / ∂_lH` at each ordered point, 0 elsewhere.
    pub slopes: Vec<f64>,
    pub sigma0: f64,
    pub pot_label: String,
    pub d: usize,
    /// Indices `i` where `|l_{i+1} - l_i|` exceeds five times the predicted jump.
    pub continuity_violations: Vec<usize>,
}

/// Computes `σ0` and `l(σ)` on an increasing grid of positive diffusions.
pub fn sweep(d: usize, pot: &RadialPotential, sigma_grid: &[f64], rule: &QuadratureRule) -> Result<PhaseDiagram> {
    if sigma_grid.is_empty() {
        return Err(Error::InvalidInput("empty sigma grid".into()));
    }
    if sigma_grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) || sigma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("sigma grid must be positive and strictly increasing".into()));
    }
    let sigma0 = find_sigma0(d, pot, rule, None)?;
    let rows: Vec<(f64, f64, f64, f64)> = sigma_grid
        .par_iter()
        .map(|&s| {
            let l = find_l_star(d, s, pot, rule)?;
            let g = EquilibriumGrid::new(&spec(d, s, l, pot)?, rule)?;
            let slope = if l > 0.0 { -g.dh_dsigma() / g.dh_dl() } else { 0.0 };
            Ok((l, g.z(), g.d2z_dll(), slope))
        })
        .collect::<Result<Vec<_>>>()?;
    let l_values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let slopes: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let continuity_violations = (0..l_values.len().saturating_sub(1))
        .filter(|&i| {
            let jump = (l_values[i + 1] - l_values[i]).abs();
            let predicted = slopes[i].abs().max(slopes[i + 1].abs()) * (sigma_grid[i + 1] - sigma_grid[i]);
            jump > 5.0 * predicted && jump > 1e-9
        })
        .collect();
    Ok(PhaseDiagram {
        sigmas: sigma_grid.to_vec(),
        l_values,
        z_at_l_star: rows.iter().map(|r| r.1).collect(),
        d2z_at_l_star: rows.iter().map(|r| r.2).collect(),
        slopes,
        sigma0,
        pot_label: pot.label().to_string(),
        d,
        continuity_violations,
    })
}

/// `lim_{σ→0} (l(σ) - r0)/σ` from the Gaussian moments of the Hessian of
/// `Φ0 = |v|²/2 + V(|v|)` at `r0 Ω`.
pub fn small_sigma_slope(d: usize, pot: &RadialPotential) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension must be >= 2, got {d}")));
    }
    if !pot.has_third_derivative() {
        return Err(Error::MissingThirdDerivative(pot.label().to_string()));
    }
    let r = match r0(pot) {
        Ok(r) => r,
        Err(_) => return Err(Error::FlatSecondDerivative { value: pot.d2(0.0) }),
    };
    let v2 = pot.d2(r);
    if v2.abs() < 1e-12 {
        return Err(Error::FlatSecondDerivative { value: v2 });
    }
    let a = 1.0 + v2;
    let b = 1.0 + pot.d1(r) / r;
    if a <= 0.0 || b <= 0.0 {
        return Err(Error::DegenerateHessian { a, b });
    }
    let v3 = pot.d3(r).ok_or_else(|| Error::MissingThirdDerivative(pot.label().to_string()))?;
    // ⟨w∥ D³Φ0(w,w,w)⟩ for w ~ N(0, diag(1/a, 1/b, …))
    let moment = v3 * 3.0 / (a * a) + 3.0 * (a - b) / r * (d - 1) as f64 / (a * b);
    Ok(-a / 6.0 * moment / v2)
}

/// Small-noise sign of `∂_l Z(σ, l)`: the sign of `-V'(r̄)` with `r̄ + V'(r̄) = l`.
pub fn laplace_sign_probe(d: usize, l: f64, pot: &RadialPotential) -> Result<i32> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension must be >= 2, got {d}")));
    }
    let rb = speed_map_inverse(l, pot)?;
    let v = -pot.d1(rb);
    let tol = 1e-9 * rb.max(1.0);
    Ok(if v.abs() <= tol { 0 } else if v > 0.0 { 1 } else { -1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn quartic() -> RadialPotential {
        RadialPotential::quartic(1.0, 1.0).unwrap()
    }

    #[test]
    fn sigma0_in_two_dimensions() {
        let s0 = find_sigma0(2, &quartic(), &QuadratureRule::default(), None).unwrap();
        assert!((s0 - 1.0 / PI).abs() < 1e-6, "{s0}");
    }

    #[test]
    fn sigma0_requires_sign_change() {
        assert!(matches!(
            find_sigma0(2, &RadialPotential::zero(), &QuadratureRule::default(), None),
            Err(Error::NoSignChange { .. })
        ));
        assert!(matches!(
            find_sigma0(2, &quartic(), &QuadratureRule::default(), Some((0.5, 2.0))),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn disordered_above_sigma0() {
        let l = find_l_star(2, 0.35, &quartic(), &QuadratureRule::default()).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn ordered_branch_is_a_critical_point() {
        let rule = QuadratureRule::default();
        let l = find_l_star(2, 0.2, &quartic(), &rule).unwrap();
        assert!(l > 0.0 && l < 1.0, "{l}");
        let g = EquilibriumGrid::new(&EquilibriumSpec::new(2, 0.2, l, quartic()).unwrap(), &rule).unwrap();
        assert!(g.h().abs() < 1e-10);
        assert!(g.d2z_dll() < 0.0);
    }

    #[test]
    fn zero_potential_is_flat() {
        assert!(matches!(
            find_l_star(3, 0.4, &RadialPotential::zero(), &QuadratureRule::default()),
            Err(Error::Plateau { .. })
        ));
    }

    #[test]
    fn small_sigma_slope_examples() {
        for d in 2..=5 {
            let s = small_sigma_slope(d, &quartic()).unwrap();
            assert!((s + d as f64 / 2.0).abs() < 1e-12, "d={d}: {s}");
        }
        assert!(matches!(
            small_sigma_slope(2, &RadialPotential::zero()),
            Err(Error::FlatSecondDerivative { .. })
        ));
        let no_d3 = RadialPotential::custom(
            "no-d3",
            std::sync::Arc::new(|r: f64| 0.25 * r.powi(4) - 0.5 * r * r),
            std::sync::Arc::new(|r: f64| r * (r * r - 1.0)),
            std::sync::Arc::new(|r: f64| 3.0 * r * r - 1.0),
            None,
        );
        assert!(matches!(small_sigma_slope(2, &no_d3), Err(Error::MissingThirdDerivative(_))));
    }

    #[test]
    fn sign_probe_examples() {
        let q = quartic();
        assert_eq!(laplace_sign_probe(2, 0.5, &q).unwrap(), 1);
        assert_eq!(laplace_sign_probe(2, 1.0, &q).unwrap(), 0);
        assert_eq!(laplace_sign_probe(2, 2.0, &q).unwrap(), -1);
        assert_eq!(laplace_sign_probe(2, 0.0, &q).unwrap(), 0);
    }

    #[test]
    fn plateau_and_tie_detection_on_synthetic_scans() {
        let l: Vec<f64> = (0..10).map(|k| 0.03 * k as f64).collect();
        let flat = ZScan { l: l.clone(), log_z: vec![1.0; 10] };
        assert!(detect_plateau(&flat).is_some());
        let bump = ZScan { l: l.clone(), log_z: l.iter().map(|x| -(x - 0.12) * (x - 0.12)).collect() };
        assert!(detect_plateau(&bump).is_none());
        let two = ZScan { l, log_z: vec![0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, -2.0, -3.0] };
        assert_eq!(local_maxima(&two), vec![1, 5]);
        assert!(matches!(select_maximum(&two), Err(Error::MultipleMaxima { .. })));
    }
}
