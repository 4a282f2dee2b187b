//! Generalized collision invariants: Galerkin solutions of the transverse
//! problem for `χ` and the longitudinal problem for `χ_Ω` on `(θ, r)` meshes.
//!
//! With `ω = r^{d-1} sin^{d-2}θ e(cos θ, r, l)` both problems read
//!
//! ```text
//! σ ∫∫ ω [∂θχ ∂θh / r² + ∂rχ ∂rh + k χ h / (r² sin²θ)] = ∫∫ ω f h
//! ```
//!
//! with `k = d - 2, f = r sin θ` for `χ` and `k = 0, f = r cos θ - l` for `χ_Ω`.

pub mod mesh;
pub mod sparse;

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::{EquilibriumSpec, QuadratureRule};
use crate::potential::phi;

pub use mesh::{Mesh2D, RadialMap};
use sparse::{norm, pcg, Csr};

/// Relative residual demanded from the linear solver.
pub const SOLVER_TOL: f64 = 1e-12;

/// Largest `|H|` for which `l` is accepted as an equilibrium modulus.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Cells per direction of the default mesh.
pub const DEFAULT_CELLS: usize = 128;

/// Largest accepted true residual of a solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

const MAX_CG_ITERATIONS: usize = 200_000;

/// Which of the two elliptic problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Problem {
    /// Transverse invariant `χ`, Dirichlet at the poles and at `r = 0`.
    Chi,
    /// Longitudinal invariant `χ_Ω`, natural conditions, mean zero.
    ChiOmega,
}

fn gauss_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        2 => {
            let a = 0.5 / 3f64.sqrt();
            (vec![0.5 - a, 0.5 + a], vec![0.5, 0.5])
        }
        3 => {
            let a = 0.5 * (0.6f64).sqrt();
            (vec![0.5 - a, 0.5, 0.5 + a], vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
        }
        _ => unreachable!("only 2- and 3-point rules are used"),
    }
}

/// One quadrature point with the four bilinear shape functions of its cell.
#[derive(Debug, Clone, Copy)]
struct QPoint {
    theta: f64,
    r: f64,
    /// Gauss weight × cell area × shifted `ω`.
    w: f64,
    nodes: [usize; 4],
    phi: [f64; 4],
    dth: [f64; 4],
    dr: [f64; 4],
}

/// Quadrature points of a mesh with the equilibrium weight attached.
#[derive(Debug, Clone)]
pub struct WeightedQuadrature {
    points: Vec<QPoint>,
    total: f64,
}

impl WeightedQuadrature {
    /// `n × n` Gauss points per cell.
    pub fn new(spec: &EquilibriumSpec, mesh: &Mesh2D, n: usize) -> Self {
        let (gx, gw) = gauss_01(n);
        let th = mesh.theta_nodes();
        let rr = mesh.r_nodes();
        let d = spec.d;
        let mut raw = Vec::with_capacity(mesh.n_theta_cells() * mesh.n_r_cells() * n * n);
        let mut log_max = f64::NEG_INFINITY;
        for i in 0..mesh.n_theta_cells() {
            let (ta, ht) = (th[i], th[i + 1] - th[i]);
            for j in 0..mesh.n_r_cells() {
                let (ra, hr) = (rr[j], rr[j + 1] - rr[j]);
                let nodes = [mesh.node(i, j), mesh.node(i + 1, j), mesh.node(i, j + 1), mesh.node(i + 1, j + 1)];
                for (a, &xi) in gx.iter().enumerate() {
                    for (b, &eta) in gx.iter().enumerate() {
                        let theta = ta + xi * ht;
                        let r = ra + eta * hr;
                        let log_w = (d - 1) as f64 * r.ln() + (d - 2) as f64 * theta.sin().ln()
                            - (phi(theta.cos(), r, spec.l, &spec.pot) - 0.5 * spec.l * spec.l) / spec.sigma;
                        log_max = log_max.max(log_w);
                        let phi_v = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), (1.0 - xi) * eta, xi * eta];
                        let dth = [-(1.0 - eta) / ht, (1.0 - eta) / ht, -eta / ht, eta / ht];
                        let dr = [-(1.0 - xi) / hr, -xi / hr, (1.0 - xi) / hr, xi / hr];
                        raw.push((
                            log_w,
                            QPoint { theta, r, w: gw[a] * gw[b] * ht * hr, nodes, phi: phi_v, dth, dr },
                        ));
                    }
                }
            }
        }
        let points: Vec<QPoint> = raw
            .into_iter()
            .map(|(lw, mut p)| {
                p.w *= (lw - log_max).exp();
                p
            })
            .collect();
        let total = points.iter().map(|p| p.w).sum();
        WeightedQuadrature { points, total }
    }

    /// `Σ w` over the mesh.
    pub fn total_weight(&self) -> f64 {
        self.total
    }

    fn field_at(p: &QPoint, values: &[f64]) -> f64 {
        (0..4).map(|a| p.phi[a] * values[p.nodes[a]]).sum()
    }

    /// `∫ g(c, r) u_h ω / ∫ ω` for a nodal field `u_h`.
    pub fn mean_with_field(&self, values: &[f64], g: impl Fn(f64, f64) -> f64) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .map(|p| p.w * g(p.theta.cos(), p.r) * Self::field_at(p, values))
            .sum();
        s / self.total
    }

    /// `∫ g(c, r) ω / ∫ ω`.
    pub fn mean(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.points.iter().map(|p| p.w * g(p.theta.cos(), p.r)).sum::<f64>() / self.total
    }

    /// Weighted L² norm of `u_h - exact`, relative to the norm of `exact`.
    pub fn relative_error(&self, values: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for p in &self.points {
            let e = exact(p.theta, p.r);
            let diff = Self::field_at(p, values) - e;
            num += p.w * diff * diff;
            den += p.w * e * e;
        }
        (num / den).sqrt()
    }
}

/// Degree-of-freedom numbering over mesh nodes; `None` marks a node held at zero.
fn dof_map(mesh: &Mesh2D, problem: Problem) -> (Vec<Option<usize>>, usize) {
    let (nt, nr) = (mesh.theta_nodes().len(), mesh.r_nodes().len());
    let mut map = vec![None; nt * nr];
    let mut next = 0;
    match problem {
        Problem::Chi => {
            for i in 1..nt - 1 {
                for j in 1..nr {
                    map[mesh.node(i, j)] = Some(next);
                    next += 1;
                }
            }
        }
        Problem::ChiOmega => {
            // the segment r = 0 is the single point v = 0
            next = 1;
            for i in 0..nt {
                map[mesh.node(i, 0)] = Some(0);
                for j in 1..nr {
                    map[mesh.node(i, j)] = Some(next);
                    next += 1;
                }
            }
        }
    }
    (map, next)
}

struct System {
    a: Csr,
    f: Vec<f64>,
    mass: Vec<f64>,
    dofs: Vec<Option<usize>>,
}

fn assemble(spec: &EquilibriumSpec, quad: &WeightedQuadrature, mesh: &Mesh2D, problem: Problem) -> System {
    let (dofs, n) = dof_map(mesh, problem);
    let k = match problem {
        Problem::Chi => (spec.d - 2) as f64,
        Problem::ChiOmega => 0.0,
    };
    let l = spec.l;
    let mut triplets = Vec::with_capacity(quad.points.len() * 16);
    let mut f = vec![0.0; n];
    let mut mass = vec![0.0; n];
    for p in &quad.points {
        let (s, c) = p.theta.sin_cos();
        let r2 = p.r * p.r;
        let load = match problem {
            Problem::Chi => p.r * s,
            Problem::ChiOmega => p.r * c - l,
        };
        let pot = if k != 0.0 { k / (r2 * s * s) } else { 0.0 };
        let sw = spec.sigma * p.w;
        for a in 0..4 {
            let Some(ia) = dofs[p.nodes[a]] else { continue };
            f[ia] += p.w * load * p.phi[a];
            mass[ia] += p.w * p.phi[a];
            for b in 0..4 {
                let Some(ib) = dofs[p.nodes[b]] else { continue };
                let v = sw * (p.dth[a] * p.dth[b] / r2 + p.dr[a] * p.dr[b] + pot * p.phi[a] * p.phi[b]);
                triplets.push((ia, ib, v));
            }
        }
    }
    System { a: Csr::from_triplets(n, triplets), f, mass, dofs }
}

/// Restriction of `a` to the rows/columns with `keep[i]`.
fn restrict(a: &Csr, keep: &[bool]) -> (Csr, Vec<usize>) {
    let mut new_index = vec![usize::MAX; a.n];
    let mut kept = Vec::new();
    for i in 0..a.n {
        if keep[i] {
            new_index[i] = kept.len();
            kept.push(i);
        }
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..a.n {
        if !keep[i] {
            continue;
        }
        for q in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.cols[q];
            if keep[j] {
                triplets.push((new_index[i], new_index[j], a.vals[q]));
            }
        }
    }
    (Csr::from_triplets(kept.len(), triplets), kept)
}

/// Discrete solution of one problem with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FieldSolve {
    pub problem: Problem,
    /// Nodal values, indexed by [`Mesh2D::node`].
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `‖F - A x‖ / ‖F‖` over all degrees of freedom.
    pub residual: f64,
    /// `xᵀ A x` (the form includes the factor σ).
    pub energy: f64,
    /// `Fᵀ x`.
    pub load: f64,
    /// Weighted mean `∫ u_h ω / ∫ ω`.
    pub weighted_mean: f64,
    /// `∫ ω` on the mesh (shifted units, shared with the moments).
    pub total_weight: f64,
}

fn solve_problem(
    spec: &EquilibriumSpec,
    mesh: &Mesh2D,
    quad: &WeightedQuadrature,
    problem: Problem,
) -> Result<FieldSolve> {
    let sys = assemble(spec, quad, mesh, problem);
    let n = sys.a.n;
    let diag = sys.a.diagonal();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    // unknowns carrying no weight at all are held at zero
    let mut keep: Vec<bool> = diag.iter().map(|&d| d > 1e-280 * dmax).collect();
    let mut rhs = sys.f.clone();
    if problem == Problem::ChiOmega {
        let total_mass: f64 = sys.mass.iter().sum();
        let total_load: f64 = sys.f.iter().sum();
        for (r, m) in rhs.iter_mut().zip(&sys.mass) {
            *r -= total_load / total_mass * m;
        }
        let pin = (0..n).max_by(|&a, &b| diag[a].total_cmp(&diag[b])).unwrap_or(0);
        keep[pin] = false;
    }
    let (reduced, kept) = restrict(&sys.a, &keep);
    let b: Vec<f64> = kept.iter().map(|&i| rhs[i]).collect();
    let (y, stats) = pcg(&reduced, &b, SOLVER_TOL, RESIDUAL_TOL, MAX_CG_ITERATIONS)?;
    let mut x = vec![0.0; n];
    for (k, &i) in kept.iter().enumerate() {
        x[i] = y[k];
    }
    if problem == Problem::ChiOmega {
        let total_mass: f64 = sys.mass.iter().sum();
        let mean = sys.mass.iter().zip(&x).map(|(m, v)| m * v).sum::<f64>() / total_mass;
        for v in &mut x {
            *v -= mean;
        }
    }
    let ax = sys.a.mul(&x);
    // the pinned row of χ_Ω is included: the projected load makes it consistent
    let res: Vec<f64> = rhs
        .iter()
        .zip(&ax)
        .zip(&keep)
        .map(|((f, y), k)| if *k || problem == Problem::ChiOmega { f - y } else { 0.0 })
        .collect();
    let residual = norm(&res) / norm(&rhs).max(f64::MIN_POSITIVE);
    let energy = sparse::dot(&x, &ax);
    let load = sparse::dot(&sys.f, &x);

    let mut values = vec![0.0; mesh.n_nodes()];
    for (node, dof) in sys.dofs.iter().enumerate() {
        if let Some(k) = dof {
            values[node] = x[*k];
        }
    }
    let weighted_mean = quad.mean_with_field(&values, |_, _| 1.0);
    Ok(FieldSolve {
        problem,
        values,
        iterations: stats.iterations,
        residual,
        energy,
        load,
        weighted_mean,
        total_weight: quad.total_weight(),
    })
}

fn check_mesh(spec: &EquilibriumSpec, mesh: &Mesh2D) -> Result<()> {
    spec.validate()?;
    let needed = crate::partition::radial_extent(spec)?.r_max;
    if mesh.r_max() < needed * (1.0 - 1e-9) {
        return Err(Error::InvalidInput(format!(
            "mesh truncation radius {} is below the envelope radius {needed}",
            mesh.r_max()
        )));
    }
    Ok(())
}

/// Transverse invariant `χ`; requires `l > 0`.
pub fn solve_chi(spec: &EquilibriumSpec, mesh: &Mesh2D) -> Result<FieldSolve> {
    if spec.is_isotropic() {
        return Err(Error::InvalidInput("the transverse problem needs l > 0".into()));
    }
    check_mesh(spec, mesh)?;
    solve_chi_any(spec, mesh)
}

/// As [`solve_chi`] without the `l > 0` requirement.
pub(crate) fn solve_chi_any(spec: &EquilibriumSpec, mesh: &Mesh2D) -> Result<FieldSolve> {
    let quad = WeightedQuadrature::new(spec, mesh, 2);
    solve_problem(spec, mesh, &quad, Problem::Chi)
}

/// Rejects `l` unless `|H(σ, l)| ≤` [`COMPATIBILITY_TOL`].
pub fn compatibility_gate(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<f64> {
    let h = crate::partition::h(spec, rule)?;
    if h.abs() > COMPATIBILITY_TOL {
        return Err(Error::Incompatible { l: spec.l, h, tol: COMPATIBILITY_TOL });
    }
    Ok(h)
}

/// Longitudinal invariant `χ_Ω` with zero weighted mean; `l` must be a
/// critical point of `Z(σ, ·)`.
pub fn solve_chi_omega(spec: &EquilibriumSpec, mesh: &Mesh2D) -> Result<FieldSolve> {
    solve_chi_omega_with(spec, mesh, &QuadratureRule::default())
}

pub fn solve_chi_omega_with(spec: &EquilibriumSpec, mesh: &Mesh2D, rule: &QuadratureRule) -> Result<FieldSolve> {
    check_mesh(spec, mesh)?;
    compatibility_gate(spec, rule)?;
    let quad = WeightedQuadrature::new(spec, mesh, 2);
    solve_problem(spec, mesh, &quad, Problem::ChiOmega)
}

/// Both invariants on one mesh, sharing the quadrature used for assembly.
#[derive(Debug, Clone)]
pub struct GciSolution {
    pub spec: EquilibriumSpec,
    pub mesh: Mesh2D,
    pub chi: FieldSolve,
    pub chi_omega: FieldSolve,
    /// `H(σ, l)` from the partition quadrature.
    pub compat_h: f64,
    quad: Arc<WeightedQuadrature>,
}

impl GciSolution {
    pub fn solve(spec: &EquilibriumSpec, mesh: &Mesh2D, rule: &QuadratureRule) -> Result<Self> {
        if spec.is_isotropic() {
            return Err(Error::InvalidInput("the invariants need an equilibrium with l > 0".into()));
        }
        check_mesh(spec, mesh)?;
        let compat_h = compatibility_gate(spec, rule)?;
        let quad = Arc::new(WeightedQuadrature::new(spec, mesh, 2));
        let chi = solve_problem(spec, mesh, &quad, Problem::Chi)?;
        let chi_omega = solve_problem(spec, mesh, &quad, Problem::ChiOmega)?;
        Ok(GciSolution { spec: spec.clone(), mesh: mesh.clone(), chi, chi_omega, compat_h, quad })
    }

    /// Moments on the assembly quadrature.
    pub fn quadrature(&self) -> &WeightedQuadrature {
        &self.quad
    }

    /// Copy with both nodal fields multiplied by `factor` (diagnostics only;
    /// the stored energies are not rescaled).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.chi.values.iter_mut().for_each(|v| *v *= factor);
        out.chi_omega.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Bilinear interpolation of a nodal field at `(θ, r)`, clamped to the mesh.
pub fn interpolate(mesh: &Mesh2D, values: &[f64], theta: f64, r: f64) -> f64 {
    let th = mesh.theta_nodes();
    let rr = mesh.r_nodes();
    let locate = |v: &[f64], x: f64| -> (usize, f64) {
        let k = v.partition_point(|&y| y <= x).clamp(1, v.len() - 1) - 1;
        let t = ((x - v[k]) / (v[k + 1] - v[k])).clamp(0.0, 1.0);
        (k, t)
    };
    let (i, xi) = locate(th, theta);
    let (j, eta) = locate(rr, r);
    let v = |a: usize, b: usize| values[mesh.node(a, b)];
    (1.0 - xi) * (1.0 - eta) * v(i, j) + xi * (1.0 - eta) * v(i + 1, j) + (1.0 - xi) * eta * v(i, j + 1)
        + xi * eta * v(i + 1, j + 1)
}

/// Error norms and observed orders along a refinement ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub problem: Problem,
    /// θ-cell counts of the levels.
    pub cells: Vec<usize>,
    /// Relative weighted-L² errors: against the exact solution, or between
    /// consecutive levels when no exact solution is supplied.
    pub errors: Vec<f64>,
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub fitted_order: f64,
}

fn fitted_slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|x| x.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn solve_on(spec: &EquilibriumSpec, mesh: &Mesh2D, problem: Problem) -> Result<(FieldSolve, WeightedQuadrature)> {
    let quad = WeightedQuadrature::new(spec, mesh, 2);
    let sol = solve_problem(spec, mesh, &quad, problem)?;
    Ok((sol, quad))
}

/// Solves on `levels` successive refinements of `base`.
///
/// With `exact`, errors are measured against it (3×3 Gauss per cell);
/// otherwise consecutive levels are compared on the finer mesh.
pub fn convergence_study(
    spec: &EquilibriumSpec,
    base: &Mesh2D,
    levels: usize,
    problem: Problem,
    exact: Option<&dyn Fn(f64, f64) -> f64>,
) -> Result<ConvergenceReport> {
    if levels < 2 {
        return Err(Error::InvalidInput("a convergence study needs at least two levels".into()));
    }
    check_mesh(spec, base)?;
    if problem == Problem::ChiOmega {
        compatibility_gate(spec, &QuadratureRule::default())?;
    }
    let mut meshes = vec![base.clone()];
    for _ in 1..levels {
        let next = meshes.last().expect("non-empty").refine();
        meshes.push(next);
    }
    let mut sols = Vec::with_capacity(levels);
    for m in &meshes {
        sols.push(solve_on(spec, m, problem)?.0);
    }
    let mut errors = Vec::new();
    let mut hs = Vec::new();
    match exact {
        Some(f) => {
            for (m, s) in meshes.iter().zip(&sols) {
                let q = WeightedQuadrature::new(spec, m, 3);
                errors.push(q.relative_error(&s.values, f));
                hs.push(1.0 / m.n_theta_cells() as f64);
            }
        }
        None => {
            for k in 0..levels - 1 {
                let (coarse, fine) = (&meshes[k], &meshes[k + 1]);
                let q = WeightedQuadrature::new(spec, fine, 3);
                let cv = &sols[k].values;
                let fv = &sols[k + 1].values;
                let (mut num, mut den) = (0.0, 0.0);
                for p in &q.points {
                    let uf = WeightedQuadrature::field_at(p, fv);
                    let uc = interpolate(coarse, cv, p.theta, p.r);
                    num += p.w * (uf - uc) * (uf - uc);
                    den += p.w * uf * uf;
                }
                errors.push((num / den).sqrt());
                hs.push(1.0 / coarse.n_theta_cells() as f64);
            }
        }
    }
    let pairwise_orders = errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    Ok(ConvergenceReport {
        problem,
        cells: meshes.iter().map(|m| m.n_theta_cells()).collect(),
        fitted_order: fitted_slope(&hs, &errors),
        errors,
        pairwise_orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::find_l_star;
    use crate::potential::RadialPotential;
    use std::f64::consts::PI;

    fn zero_spec(d: usize, sigma: f64, l: f64) -> EquilibriumSpec {
        EquilibriumSpec::new(d, sigma, l, RadialPotential::zero()).unwrap()
    }

    #[test]
    fn maxwellian_invariants_are_recovered() {
        for d in [2, 3] {
            let spec = zero_spec(d, 0.5, 1.0);
            let mesh = Mesh2D::new(&spec, 64, 64).unwrap();
            let sol = GciSolution::solve(&spec, &mesh, &QuadratureRule::default()).unwrap();
            let q = WeightedQuadrature::new(&spec, &mesh, 3);
            let e_chi = q.relative_error(&sol.chi.values, |t, r| r * t.sin());
            let e_om = q.relative_error(&sol.chi_omega.values, |t, r| r * t.cos() - 1.0);
            assert!(e_chi < 1e-3, "d={d}: {e_chi}");
            assert!(e_om < 1e-3, "d={d}: {e_om}");
            assert!(sol.chi.residual < 1e-10 && sol.chi_omega.residual < 1e-10);
            assert!(sol.chi_omega.weighted_mean.abs() < 1e-12);
        }
    }

    #[test]
    fn galerkin_energy_identity() {
        let spec = zero_spec(3, 0.7, 0.6);
        let mesh = Mesh2D::new(&spec, 32, 32).unwrap();
        let sol = GciSolution::solve(&spec, &mesh, &QuadratureRule::default()).unwrap();
        for f in [&sol.chi, &sol.chi_omega] {
            assert!(f.energy > 0.0);
            assert!((f.energy - f.load).abs() <= 1e-12 * f.energy.abs() * 10.0, "{:?}", (f.energy, f.load));
        }
        let sys = assemble(&spec, &WeightedQuadrature::new(&spec, &mesh, 2), &mesh, Problem::ChiOmega);
        assert!(sys.a.asymmetry() < 1e-14);
    }

    #[test]
    fn pole_values_vanish() {
        let spec = zero_spec(2, 0.5, 1.0);
        let mesh = Mesh2D::new(&spec, 16, 16).unwrap();
        let chi = solve_chi(&spec, &mesh).unwrap();
        let nr = mesh.r_nodes().len();
        for j in 0..nr {
            assert_eq!(chi.values[mesh.node(0, j)], 0.0);
            assert_eq!(chi.values[mesh.node(16, j)], 0.0);
        }
    }

    #[test]
    fn incompatible_order_parameter_is_rejected() {
        let pot = RadialPotential::quartic(1.0, 1.0).unwrap();
        let rule = QuadratureRule::default();
        let l = find_l_star(2, 0.2, &pot, &rule).unwrap();
        let spec = EquilibriumSpec::new(2, 0.2, l + 0.3, pot).unwrap();
        let mesh = Mesh2D::new(&spec, 16, 16).unwrap();
        assert!(matches!(solve_chi_omega(&spec, &mesh), Err(Error::Incompatible { .. })));
        assert!(solve_chi(&spec, &mesh).is_ok());
    }

    #[test]
    fn transverse_problem_needs_mean_velocity() {
        let spec = zero_spec(2, 0.5, 0.0);
        let mesh = Mesh2D::new(&spec, 8, 8).unwrap();
        assert!(matches!(solve_chi(&spec, &mesh), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn reflection_invariance_for_isotropic_weight() {
        let pot = RadialPotential::quartic(1.0, 1.0).unwrap();
        let spec = EquilibriumSpec::new(3, 0.4, 0.0, pot).unwrap();
        let base = Mesh2D::new(&spec, 12, 16).unwrap();
        // a θ-grid without mirror symmetry
        let theta: Vec<f64> = (0..=12).map(|i| PI * (i as f64 / 12.0).powf(1.3)).collect();
        let mesh = Mesh2D::with_nodes(theta, base.r_nodes().to_vec()).unwrap();
        let mirror = mesh.reflect_theta();
        let a = solve_chi_any(&spec, &mesh).unwrap();
        let b = solve_chi_any(&spec, &mirror).unwrap();
        let nt = mesh.theta_nodes().len();
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..nt {
            for j in 0..mesh.r_nodes().len() {
                let u = a.values[mesh.node(i, j)];
                let v = b.values[mirror.node(nt - 1 - i, j)];
                assert!((u - v).abs() <= 1e-10 * scale, "({i},{j}): {u} vs {v}");
            }
        }
    }

    #[test]
    fn maxwellian_ladder_is_second_order() {
        let spec = zero_spec(2, 0.5, 1.0);
        let base = Mesh2D::new(&spec, 8, 8).unwrap();
        let exact = |t: f64, r: f64| r * t.sin();
        let rep = convergence_study(&spec, &base, 4, Problem::Chi, Some(&exact)).unwrap();
        assert!(rep.fitted_order > 1.7 && rep.fitted_order < 2.3, "{rep:?}");
    }

    #[test]
    fn interpolation_reproduces_bilinear_fields() {
        let mesh = Mesh2D::with_nodes(vec![0.0, 1.0, 2.0, PI], vec![0.0, 0.5, 2.0]).unwrap();
        let f = |t: f64, r: f64| 1.0 + 2.0 * t - r + 0.5 * t * r;
        let mut vals = vec![0.0; mesh.n_nodes()];
        for (i, &t) in mesh.theta_nodes().iter().enumerate() {
            for (j, &r) in mesh.r_nodes().iter().enumerate() {
                vals[mesh.node(i, j)] = f(t, r);
            }
        }
        for &(t, r) in &[(0.3, 0.2), (1.5, 1.9), (3.0, 0.7)] {
            assert!((interpolate(&mesh, &vals, t, r) - f(t, r)).abs() < 1e-13);
        }
    }
}
