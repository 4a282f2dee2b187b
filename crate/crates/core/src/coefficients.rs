//! Hydrodynamic closure constants from the invariants `χ`, `χ_Ω`.
//!
//! With `⟨·⟩` the mean against the equilibrium and `c = cos θ`:
//!
//! ```text
//! c⊥,1 = ⟨χ r sinθ⟩/(d-1)    c⊥,2 = ⟨rc · χ r sinθ⟩/(d-1)    c⊥  = c⊥,2 / (l c⊥,1)
//! c∥,1 = ⟨rc χ_Ω⟩            c∥,2 = ⟨(rc)²/2 · χ_Ω⟩          c∥  = c∥,2 / (l c∥,1)
//! c∥,3 = ⟨r² sin²θ χ_Ω⟩/(d-1)                                 c′∥ = c∥,3 / (l c∥,1)
//! ```
//!
//! The moments use the assembly quadrature, so `c⊥,1` and `c∥,1` coincide
//! with the discrete energies `χᵀAχ / ((d-1) ∫ω)` and `χ_Ωᵀ A χ_Ω / ∫ω`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gci::{GciSolution, Mesh2D, DEFAULT_CELLS};
use crate::partition::{EquilibriumSpec, QuadratureRule};

/// Closure constants with their intermediate integrals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HydroCoefficients {
    pub d: usize,
    pub sigma: f64,
    pub l: f64,
    pub potential: String,
    pub c_perp: f64,
    pub c_par: f64,
    pub c_par_prime: f64,
    pub c_perp1: f64,
    pub c_perp2: f64,
    pub c_par1: f64,
    pub c_par2: f64,
    pub c_par3: f64,
    /// `σ × Dirichlet energy` of `χ`, normalized like `c_perp1`.
    pub energy_perp1: f64,
    /// `σ × Dirichlet energy` of `χ_Ω`, normalized like `c_par1`.
    pub energy_par1: f64,
    pub mesh_id: String,
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if !(den.abs() > 1e-300) || !den.is_finite() {
        return Err(Error::ZeroDenominator(den));
    }
    Ok(num / den)
}

/// `(c⊥, c⊥,1, c⊥,2)`.
pub fn c_perp(gci: &GciSolution) -> Result<(f64, f64, f64)> {
    let dm1 = (gci.spec.d - 1) as f64;
    let q = gci.quadrature();
    let chi = &gci.chi.values;
    let c1 = q.mean_with_field(chi, |c, r| r * (1.0 - c * c).max(0.0).sqrt()) / dm1;
    let c2 = q.mean_with_field(chi, |c, r| r * c * r * (1.0 - c * c).max(0.0).sqrt()) / dm1;
    Ok((ratio(c2, gci.spec.l * c1)?, c1, c2))
}

/// `(c∥, c′∥, c∥,1, c∥,2, c∥,3)`.
pub fn c_par_and_prime(gci: &GciSolution) -> Result<(f64, f64, f64, f64, f64)> {
    let dm1 = (gci.spec.d - 1) as f64;
    let q = gci.quadrature();
    let w = &gci.chi_omega.values;
    let c1 = q.mean_with_field(w, |c, r| r * c);
    let c2 = q.mean_with_field(w, |c, r| 0.5 * (r * c) * (r * c));
    let c3 = q.mean_with_field(w, |c, r| r * r * (1.0 - c * c)) / dm1;
    let den = gci.spec.l * c1;
    Ok((ratio(c2, den)?, ratio(c3, den)?, c1, c2, c3))
}

impl HydroCoefficients {
    pub fn from_solution(gci: &GciSolution) -> Result<Self> {
        let (c_perp, c_perp1, c_perp2) = c_perp(gci)?;
        let (c_par, c_par_prime, c_par1, c_par2, c_par3) = c_par_and_prime(gci)?;
        let dm1 = (gci.spec.d - 1) as f64;
        Ok(HydroCoefficients {
            d: gci.spec.d,
            sigma: gci.spec.sigma,
            l: gci.spec.l,
            potential: gci.spec.pot.label().to_string(),
            c_perp,
            c_par,
            c_par_prime,
            c_perp1,
            c_perp2,
            c_par1,
            c_par2,
            c_par3,
            energy_perp1: gci.chi.energy / (dm1 * gci.chi.total_weight),
            energy_par1: gci.chi_omega.energy / gci.chi_omega.total_weight,
            mesh_id: gci.mesh.id(),
        })
    }

    /// Solves both invariants on `mesh` and evaluates the constants.
    pub fn compute(spec: &EquilibriumSpec, mesh: &Mesh2D, rule: &QuadratureRule) -> Result<Self> {
        Self::from_solution(&GciSolution::solve(spec, mesh, rule)?)
    }

    /// The five intermediates in the order `c⊥,1, c⊥,2, c∥,1, c∥,2, c∥,3`.
    pub fn intermediates(&self) -> [f64; 5] {
        [self.c_perp1, self.c_perp2, self.c_par1, self.c_par2, self.c_par3]
    }
}

/// Intermediates for a Maxwellian equilibrium against `(σ, σl, σ, σl, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxwellianReport {
    pub computed: [f64; 5],
    pub expected: [f64; 5],
    /// Relative errors; absolute for the vanishing `c∥,3`.
    pub errors: [f64; 5],
    pub max_error: f64,
    pub mesh_id: String,
}

pub fn maxwellian_intermediates_check(spec: &EquilibriumSpec) -> Result<MaxwellianReport> {
    let mesh = Mesh2D::new(spec, DEFAULT_CELLS, DEFAULT_CELLS)?;
    maxwellian_intermediates_on(spec, &mesh)
}

pub fn maxwellian_intermediates_on(spec: &EquilibriumSpec, mesh: &Mesh2D) -> Result<MaxwellianReport> {
    if !spec.pot.is_zero() {
        return Err(Error::InvalidInput(format!("expected the zero potential, got {}", spec.pot.label())));
    }
    let h = HydroCoefficients::compute(spec, mesh, &QuadratureRule::default())?;
    let (s, l) = (spec.sigma, spec.l);
    let expected = [s, s * l, s, s * l, 0.0];
    let computed = h.intermediates();
    let mut errors = [0.0; 5];
    for k in 0..5 {
        let scale = if expected[k] == 0.0 { 1.0 } else { expected[k].abs() };
        errors[k] = (computed[k] - expected[k]).abs() / scale;
    }
    Ok(MaxwellianReport {
        computed,
        expected,
        max_error: errors.iter().cloned().fold(0.0, f64::max),
        errors,
        mesh_id: h.mesh_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::find_l_star;
    use crate::potential::RadialPotential;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn maxwellian_identity_case() {
        let spec = EquilibriumSpec::new(2, 0.5, 1.0, RadialPotential::zero()).unwrap();
        let rep = maxwellian_intermediates_check(&spec).unwrap();
        assert_eq!(rep.expected, [0.5, 0.5, 0.5, 0.5, 0.0]);
        assert!(rep.max_error < 1e-3, "{rep:?}");
    }

    #[test]
    fn maxwellian_error_falls_under_refinement() {
        let spec = EquilibriumSpec::new(3, 0.3, 0.5, RadialPotential::zero()).unwrap();
        let m = Mesh2D::new(&spec, 16, 16).unwrap();
        let coarse = maxwellian_intermediates_on(&spec, &m).unwrap();
        let fine = maxwellian_intermediates_on(&spec, &m.refine()).unwrap();
        assert!(fine.max_error < 0.5 * coarse.max_error, "{} -> {}", coarse.max_error, fine.max_error);
    }

    #[test]
    fn maxwellian_coefficients() {
        let spec = EquilibriumSpec::new(3, 0.5, 1.0, RadialPotential::zero()).unwrap();
        let mesh = Mesh2D::new(&spec, 64, 64).unwrap();
        let h = HydroCoefficients::compute(&spec, &mesh, &QuadratureRule::default()).unwrap();
        assert!((h.c_perp - 1.0).abs() < 1e-3, "{h:?}");
        assert!((h.c_par - 1.0).abs() < 1e-3);
        assert!(h.c_par_prime.abs() < 1e-3);
    }

    fn quartic_solution(cells: usize) -> GciSolution {
        let pot = RadialPotential::quartic(1.0, 1.0).unwrap();
        let rule = QuadratureRule::default();
        let l = find_l_star(2, 0.2, &pot, &rule).unwrap();
        let spec = EquilibriumSpec::new(2, 0.2, l, pot).unwrap();
        let mesh = Mesh2D::new(&spec, cells, cells).unwrap();
        GciSolution::solve(&spec, &mesh, &rule).unwrap()
    }

    #[test]
    fn energy_identities_and_consistency() {
        let gci = quartic_solution(48);
        let h = HydroCoefficients::from_solution(&gci).unwrap();
        assert!(h.c_perp1 > 0.0 && h.c_par1 > 0.0);
        assert!(rel(h.c_perp1, h.energy_perp1) < 1e-10, "{h:?}");
        assert!(rel(h.c_par1, h.energy_par1) < 1e-10, "{h:?}");
        assert!(rel(h.c_perp, h.c_perp2 / (h.l * h.c_perp1)) < 1e-12);
        assert!(rel(h.c_par, h.c_par2 / (h.l * h.c_par1)) < 1e-12);
        assert!(rel(h.c_par_prime, h.c_par3 / (h.l * h.c_par1)) < 1e-12);
    }

    #[test]
    fn ratios_ignore_field_scaling() {
        let gci = quartic_solution(24);
        let a = HydroCoefficients::from_solution(&gci).unwrap();
        let b = HydroCoefficients::from_solution(&gci.scaled(7.3)).unwrap();
        assert!(rel(a.c_perp, b.c_perp) < 1e-13);
        assert!(rel(a.c_par, b.c_par) < 1e-13);
        assert!(rel(a.c_par_prime, b.c_par_prime) < 1e-13);
        assert!(rel(b.c_perp1, 7.3 * a.c_perp1) < 1e-13);
    }

    #[test]
    fn quartic_constants_settle_under_refinement() {
        let a = HydroCoefficients::from_solution(&quartic_solution(128)).unwrap();
        let b = HydroCoefficients::from_solution(&quartic_solution(256)).unwrap();
        assert!((a.c_perp - b.c_perp).abs() < 1e-4, "{} {}", a.c_perp, b.c_perp);
        assert!((a.c_par - b.c_par).abs() < 1e-4, "{} {}", a.c_par, b.c_par);
        assert!((a.c_par_prime - b.c_par_prime).abs() < 1e-4, "{} {}", a.c_par_prime, b.c_par_prime);
    }

    #[test]
    fn truncation_radius_is_immaterial() {
        let gci = quartic_solution(48);
        let wider = gci.mesh.extend_r(1.25);
        let ext = GciSolution::solve(&gci.spec, &wider, &QuadratureRule::default()).unwrap();
        let (_, a, _) = c_perp(&gci).unwrap();
        let (_, b, _) = c_perp(&ext).unwrap();
        assert!(rel(a, b) < 1e-6, "{a} {b}");
    }

    #[test]
    fn zero_mean_velocity_has_no_ratio() {
        assert!(matches!(ratio(1.0, 0.0), Err(Error::ZeroDenominator(_))));
    }
}
