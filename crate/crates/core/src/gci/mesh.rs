//! Tensor meshes on `(θ, r) ∈ [0, π] × [0, R_max]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{radial_extent, EquilibriumSpec};
use crate::potential::speed_map_inverse;

/// Default clustering strength of the radial map.
pub const DEFAULT_GRADING: f64 = 2.5;

/// `r(s) = r̄ + A sinh(β (s - s_c))`, mapping `[0, 1]` onto `[0, R_max]` with
/// nodes concentrated around `r̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialMap {
    pub r_bar: f64,
    pub beta: f64,
    pub s_c: f64,
    pub amp: f64,
    pub r_max: f64,
}

impl RadialMap {
    pub fn new(r_bar: f64, r_max: f64, beta: f64) -> Self {
        if !(r_bar > 1e-12 && r_bar < r_max && beta > 0.0) {
            // degenerate: uniform map
            return RadialMap { r_bar: 0.0, beta: 0.0, s_c: 0.0, amp: r_max, r_max };
        }
        // r(0) = 0 fixes A = r̄ / sinh(β s_c); r(1) = R_max fixes s_c
        let g = |sc: f64| r_bar * (1.0 + (beta * (1.0 - sc)).sinh() / (beta * sc).sinh()) - r_max;
        let (mut lo, mut hi) = (1e-12, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s_c = 0.5 * (lo + hi);
        RadialMap { r_bar, beta, s_c, amp: r_bar / (beta * s_c).sinh(), r_max }
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return self.r_max;
        }
        if self.beta == 0.0 {
            return self.r_max * s;
        }
        self.r_bar + self.amp * (self.beta * (s - self.s_c)).sinh()
    }
}

/// Strictly increasing node arrays in `θ` (from 0 to π) and `r` (from 0 to `R_max`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh2D {
    theta: Vec<f64>,
    r: Vec<f64>,
    map: Option<RadialMap>,
}

impl Mesh2D {
    /// Uniform θ-cells and `n_r` radial cells graded around the peak speed
    /// `r̄ = speed_map_inverse(l)`, truncated at the envelope radius of `spec`.
    pub fn new(spec: &EquilibriumSpec, n_theta: usize, n_r: usize) -> Result<Self> {
        Self::graded(spec, n_theta, n_r, DEFAULT_GRADING)
    }

    pub fn graded(spec: &EquilibriumSpec, n_theta: usize, n_r: usize, beta: f64) -> Result<Self> {
        if n_theta < 2 || n_r < 2 {
            return Err(Error::InvalidInput(format!("mesh needs at least 2x2 cells, got {n_theta}x{n_r}")));
        }
        let r_max = radial_extent(spec)?.r_max;
        let r_bar = speed_map_inverse(spec.l, &spec.pot)?;
        let map = RadialMap::new(r_bar, r_max, beta);
        let theta = (0..=n_theta).map(|i| PI * i as f64 / n_theta as f64).collect();
        let r = (0..=n_r).map(|j| map.eval(j as f64 / n_r as f64)).collect();
        Self::checked(theta, r, Some(map))
    }

    /// Mesh with explicit node arrays; `θ` must run from 0 to π and `r` start at 0.
    pub fn with_nodes(theta: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        Self::checked(theta, r, None)
    }

    fn checked(theta: Vec<f64>, r: Vec<f64>, map: Option<RadialMap>) -> Result<Self> {
        let increasing = |v: &[f64]| v.len() >= 3 && v.windows(2).all(|w| w[1] > w[0]) && v.iter().all(|x| x.is_finite());
        if !increasing(&theta) || !increasing(&r) {
            return Err(Error::InvalidInput("mesh nodes must be finite and strictly increasing".into()));
        }
        if theta[0] != 0.0 || (theta[theta.len() - 1] - PI).abs() > 1e-12 || r[0] != 0.0 {
            return Err(Error::InvalidInput("mesh must span [0, π] in θ and start at r = 0".into()));
        }
        Ok(Mesh2D { theta, r, map })
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn n_theta_cells(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn n_r_cells(&self) -> usize {
        self.r.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.theta.len() * self.r.len()
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn radial_map(&self) -> Option<&RadialMap> {
        self.map.as_ref()
    }

    /// Global index of node `(i, j)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.r.len() + j
    }

    /// Short identifier `"<nθ>x<nr>:R<r_max>"`.
    pub fn id(&self) -> String {
        format!("{}x{}:R{:.6}", self.n_theta_cells(), self.n_r_cells(), self.r_max())
    }

    /// Halves every cell: θ-midpoints, and r-midpoints in the map parameter
    /// when the mesh is graded. Coarse nodes are kept.
    pub fn refine(&self) -> Self {
        let mid = |v: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(2 * v.len() - 1);
            for w in v.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(v[v.len() - 1]);
            out
        };
        let theta = mid(&self.theta);
        let r = match &self.map {
            Some(map) => {
                let n = 2 * self.n_r_cells();
                let mut r: Vec<f64> = (0..=n).map(|j| map.eval(j as f64 / n as f64)).collect();
                // keep coarse nodes bit-identical
                for (j, &x) in self.r.iter().enumerate() {
                    r[2 * j] = x;
                }
                r
            }
            None => mid(&self.r),
        };
        Mesh2D { theta, r, map: self.map }
    }

    /// Appends radial nodes with the last spacing until `R_max` has grown by `factor`.
    pub fn extend_r(&self, factor: f64) -> Self {
        let mut r = self.r.clone();
        let h = r[r.len() - 1] - r[r.len() - 2];
        let target = self.r_max() * factor;
        while r[r.len() - 1] < target - 1e-12 * target {
            let next = (r[r.len() - 1] + h).min(target);
            r.push(next);
        }
        Mesh2D { theta: self.theta.clone(), r, map: None }
    }

    /// The mirror image under `θ ↦ π - θ`.
    pub fn reflect_theta(&self) -> Self {
        let mut theta: Vec<f64> = self.theta.iter().rev().map(|t| PI - t).collect();
        theta[0] = 0.0;
        let n = theta.len() - 1;
        theta[n] = PI;
        Mesh2D { theta, r: self.r.clone(), map: self.map }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::RadialPotential;

    #[test]
    fn graded_map_hits_both_ends_and_clusters() {
        let m = RadialMap::new(1.0, 6.0, 2.5);
        assert!(m.eval(0.0).abs() < 1e-12);
        assert!((m.eval(1.0) - 6.0).abs() < 1e-12);
        let m_inner = m.amp * m.beta * (m.beta * 0.0).cosh();
        let m_outer = m.amp * m.beta * (m.beta * (1.0 - m.s_c)).cosh();
        assert!(m_outer > m_inner);
        assert!((m.r_bar + m.amp * (m.beta * (0.0 - m.s_c)).sinh()).abs() < 1e-9);
    }

    #[test]
    fn refinement_is_nested() {
        let spec = EquilibriumSpec::new(2, 0.2, 0.9, RadialPotential::quartic(1.0, 1.0).unwrap()).unwrap();
        let m = Mesh2D::new(&spec, 8, 8).unwrap();
        let f = m.refine();
        assert_eq!(f.n_theta_cells(), 16);
        assert_eq!(f.n_r_cells(), 16);
        for j in 0..=8 {
            assert_eq!(f.r_nodes()[2 * j], m.r_nodes()[j]);
        }
        for i in 0..=8 {
            assert!((f.theta_nodes()[2 * i] - m.theta_nodes()[i]).abs() < 1e-15);
        }
        assert_eq!(f.r_max(), m.r_max());
    }

    #[test]
    fn extension_and_reflection() {
        let m = Mesh2D::with_nodes(vec![0.0, 0.5, 2.0, PI], vec![0.0, 1.0, 2.0]).unwrap();
        let e = m.extend_r(1.25);
        assert!((e.r_max() - 2.5).abs() < 1e-12);
        assert_eq!(&e.r_nodes()[..3], m.r_nodes());
        let r = m.reflect_theta();
        assert!((r.theta_nodes()[1] - (PI - 2.0)).abs() < 1e-15);
        assert!((r.reflect_theta().theta_nodes()[1] - 0.5).abs() < 1e-15);
        assert!(Mesh2D::with_nodes(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(Mesh2D::with_nodes(vec![0.0, 2.0, 1.0, PI], vec![0.0, 1.0, 2.0]).is_err());
    }
}
