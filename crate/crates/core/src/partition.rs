//! Partition function, its l-derivatives and moments of the equilibrium `M_u`.
//!
//! Every integral over `R^d` is reduced to the half-plane `(θ, r) ∈ (0, π) × (0, ∞)`
//! with measure `|S^{d-2}| r^{d-1} sin^{d-2}θ dθ dr`, where `θ` is the angle
//! between `v` and the canonical direction `Ω = e1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{phi, r0, RadialPotential};
use crate::quadrature::{composite, uniform_panels};

/// Below this modulus the state is treated as isotropic.
pub const ISOTROPIC_L: f64 = 1e-12;

/// Ratio `envelope(R_max) / max envelope` demanded at the truncation radius.
pub const TRUNCATION_RATIO: f64 = 1e-16;

/// Dimension, diffusion, order parameter and potential of an equilibrium `M_u`, `u = l e1`.
#[derive(Debug, Clone)]
pub struct EquilibriumSpec {
    pub d: usize,
    pub sigma: f64,
    pub l: f64,
    pub pot: RadialPotential,
}

impl EquilibriumSpec {
    pub fn new(d: usize, sigma: f64, l: f64, pot: RadialPotential) -> Result<Self> {
        let spec = EquilibriumSpec { d, sigma, l, pot };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidInput(format!("dimension must be >= 2, got {}", self.d)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidInput(format!("l must be >= 0, got {}", self.l)));
        }
        Ok(())
    }

    pub fn with_l(&self, l: f64) -> Self {
        EquilibriumSpec { l, ..self.clone() }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        EquilibriumSpec { sigma, ..self.clone() }
    }

    pub fn is_isotropic(&self) -> bool {
        self.l < ISOTROPIC_L
    }
}

/// Settings for the tensor Gauss rule in `(θ, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureRule {
    /// Gauss nodes per θ-panel.
    pub theta_order: usize,
    /// Gauss nodes per r-panel.
    pub r_order: usize,
    /// Equal panels covering the radial support of the integrand.
    pub support_panels: usize,
    /// Target relative error, checked by [`z_with_error`].
    pub rel_tol: f64,
    /// Overrides the automatic truncation radius.
    pub r_max: Option<f64>,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule {
            theta_order: 32,
            r_order: 32,
            support_panels: 16,
            rel_tol: 1e-10,
            r_max: None,
        }
    }
}

impl QuadratureRule {
    /// Same panels, twice the nodes per panel.
    pub fn refined(&self) -> Self {
        QuadratureRule {
            theta_order: 2 * self.theta_order,
            r_order: 2 * self.r_order,
            ..*self
        }
    }

    /// Half the nodes and half the support panels, for cheap scans.
    pub fn coarse(&self) -> Self {
        QuadratureRule {
            theta_order: (self.theta_order / 2).max(8),
            r_order: (self.r_order / 2).max(8),
            support_panels: (self.support_panels / 2).max(4),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_order == 0 || self.r_order == 0 || self.support_panels == 0 {
            return Err(Error::InvalidInput("quadrature orders and panel count must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidInput(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("r_max must be > 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// `|S^{d-2}|`, the measure of the unit sphere orthogonal to `Ω`.
pub fn sphere_factor(d: usize) -> f64 {
    // |S^k| = |S^{k-2}| 2π/(k-1)
    let k = d - 2;
    let mut area = if k % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut j = if k % 2 == 0 { 2 } else { 3 };
    while j <= k {
        area *= 2.0 * PI / (j - 1) as f64;
        j += 2;
    }
    area
}

/// `e(c, r, l) = exp(-(Φ(c, r, l) - l^2/2)/σ)`.
pub fn weight_e(c: f64, r: f64, spec: &EquilibriumSpec) -> f64 {
    (-(phi(c, r, spec.l, &spec.pot) - 0.5 * spec.l * spec.l) / spec.sigma).exp()
}

/// Radial geometry of the integrand: truncation radius, radial support and
/// the peak of the `c = 1` envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialExtent {
    pub r_max: f64,
    pub support: (f64, f64),
    pub peak: f64,
}

/// Log of `r^k exp(-Φ(1, r, l)/σ)`.
fn log_env(r: f64, k: f64, spec: &EquilibriumSpec) -> f64 {
    let pw = if r > 0.0 { k * r.ln() } else if k == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    pw - phi(1.0, r, spec.l, &spec.pot) / spec.sigma
}

/// Truncation radius and radial support of the equilibrium integrand.
pub fn radial_extent(spec: &EquilibriumSpec) -> Result<RadialExtent> {
    spec.validate()?;
    let scale = r0(&spec.pot).unwrap_or(0.0);
    let r_start = scale + 5.0;
    let h = (0.05 * spec.sigma.sqrt()).clamp(1e-4, 0.05);
    let hard_limit = 1e4 * (1.0 + scale.max(spec.l) + spec.sigma.sqrt());
    let kd = (spec.d + 1) as f64;
    let km = (spec.d - 1) as f64;
    let cut = TRUNCATION_RATIO.ln();

    // walk outwards, tracking the running maxima of both envelopes
    let mut max_env = f64::NEG_INFINITY;
    let mut max_mass = f64::NEG_INFINITY;
    let mut peak = 0.0;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut r = 0.0;
    let r_max = loop {
        let e = log_env(r, kd, spec);
        let m = log_env(r, km, spec).max(e);
        if !e.is_finite() && r > 0.0 && e.is_nan() {
            return Err(Error::Truncation { r_max: r });
        }
        if e > max_env {
            max_env = e;
        }
        if m > max_mass {
            max_mass = m;
            peak = r;
        }
        samples.push((r, m));
        if r >= r_start && e - max_env <= cut {
            break r;
        }
        r += h;
        if r > hard_limit {
            return Err(Error::Truncation { r_max: hard_limit });
        }
    };
    let r_max = r_max.max(r_start);

    let keep = max_mass - 40.0;
    let lo = samples.iter().find(|s| s.1 >= keep).map_or(0.0, |s| (s.0 - h).max(0.0));
    let hi = samples.iter().rev().find(|s| s.1 >= keep).map_or(r_max, |s| (s.0 + h).min(r_max));
    let lo = if lo < 0.05 * (hi - lo) { 0.0 } else { lo };
    Ok(RadialExtent { r_max, support: (lo, hi), peak })
}

/// θ-panels graded geometrically towards the pole `θ = 0` when the
/// equilibrium is concentrated around `Ω`.
pub fn theta_panels(kappa: f64) -> Vec<(f64, f64)> {
    let levels = if kappa > 1.0 {
        ((2.0 * PI * kappa.sqrt()).log2().ceil() as i32).clamp(1, 40)
    } else {
        1
    };
    let mut panels = Vec::new();
    panels.push((0.0, PI / 2f64.powi(levels)));
    for k in (1..levels).rev() {
        panels.push((PI / 2f64.powi(k + 1), PI / 2f64.powi(k)));
    }
    panels.push((0.5 * PI, PI));
    panels
}

/// Radial panels: equal panels on the support plus coarse panels outside it.
pub fn r_panels(extent: &RadialExtent, support_panels: usize) -> Vec<(f64, f64)> {
    let (a, b) = extent.support;
    let mut panels = Vec::new();
    if a > 0.0 {
        panels.extend(uniform_panels(0.0, a, 2));
    }
    panels.extend(uniform_panels(a, b, support_panels));
    if extent.r_max > b {
        panels.extend(uniform_panels(b, extent.r_max, 2));
    }
    panels
}

/// Neumaier-compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Tabulated tensor rule for one equilibrium, with shifted weights
/// `W_θ W_r r^{d-1} sin^{d-2}θ exp(-Φ/σ - shift)`.
#[derive(Debug, Clone)]
pub struct EquilibriumGrid {
    spec: EquilibriumSpec,
    extent: RadialExtent,
    theta_panels: Vec<(f64, f64)>,
    r_panels: Vec<(f64, f64)>,
    cos: Vec<f64>,
    r: Vec<f64>,
    phi: Vec<f64>,
    w: Vec<f64>,
    w_sum: f64,
    shift: f64,
}

impl EquilibriumGrid {
    pub fn new(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<Self> {
        spec.validate()?;
        rule.validate()?;
        let mut extent = radial_extent(spec)?;
        if let Some(r_max) = rule.r_max {
            extent.r_max = r_max;
            extent.support = (extent.support.0.min(r_max), extent.support.1.min(r_max));
        }
        let l = if spec.is_isotropic() { 0.0 } else { spec.l };
        let kappa = extent.support.1 * l / spec.sigma;
        let tp = theta_panels(kappa);
        let rp = r_panels(&extent, rule.support_panels);
        let (th, wth) = composite(&tp, rule.theta_order);
        let (rr, wr) = composite(&rp, rule.r_order);

        let n = th.len() * rr.len();
        let mut cos = Vec::with_capacity(n);
        let mut r = Vec::with_capacity(n);
        let mut phis = Vec::with_capacity(n);
        let mut logs = Vec::with_capacity(n);
        let pd = (spec.d - 1) as i32;
        let sd = (spec.d - 2) as i32;
        let vr: Vec<f64> = rr.iter().map(|&x| spec.pot.value(x)).collect();
        for (&t, &wt) in th.iter().zip(&wth) {
            let (s, c) = t.sin_cos();
            let ang = wt * s.powi(sd);
            for (j, (&x, &wx)) in rr.iter().zip(&wr).enumerate() {
                let p = 0.5 * x * x - x * c * l + 0.5 * l * l + vr[j];
                cos.push(c);
                r.push(x);
                phis.push(p);
                logs.push((ang * wx * x.powi(pd), -p / spec.sigma));
            }
        }
        let shift = logs.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|&(m, e)| m * (e - shift).exp()).collect();
        let mut acc = CompensatedSum::default();
        for &x in &w {
            acc.add(x);
        }
        let w_sum = acc.value();
        if !(w_sum > 0.0 && w_sum.is_finite()) {
            return Err(Error::Truncation { r_max: extent.r_max });
        }
        Ok(EquilibriumGrid {
            spec: spec.clone(),
            extent,
            theta_panels: tp,
            r_panels: rp,
            cos,
            r,
            phi: phis,
            w,
            w_sum,
            shift,
        })
    }

    pub fn spec(&self) -> &EquilibriumSpec {
        &self.spec
    }

    pub fn extent(&self) -> &RadialExtent {
        &self.extent
    }

    pub fn r_max(&self) -> f64 {
        self.extent.r_max
    }

    pub fn theta_panels(&self) -> &[(f64, f64)] {
        &self.theta_panels
    }

    pub fn r_panels(&self) -> &[(f64, f64)] {
        &self.r_panels
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    fn l(&self) -> f64 {
        if self.spec.is_isotropic() {
            0.0
        } else {
            self.spec.l
        }
    }

    /// `∫ g(c, r) M_u dv`.
    pub fn mean(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for ((&w, &c), &r) in self.w.iter().zip(&self.cos).zip(&self.r) {
            acc.add(w * g(c, r));
        }
        acc.value() / self.w_sum
    }

    /// `∫ g(c, r, Φ) M_u dv`, with the total potential at the node exposed.
    fn mean_with_phi(&self, g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for i in 0..self.w.len() {
            acc.add(self.w[i] * g(self.cos[i], self.r[i], self.phi[i]));
        }
        acc.value() / self.w_sum
    }

    pub fn log_z(&self) -> f64 {
        sphere_factor(self.spec.d).ln() + self.shift + self.w_sum.ln()
    }

    pub fn z(&self) -> f64 {
        self.log_z().exp()
    }

    /// `H = ∫ (v·Ω - l) M_u dv`.
    pub fn h(&self) -> f64 {
        let l = self.l();
        self.mean(|c, r| r * c - l)
    }

    /// `∂_l Z = ∫ exp(-Φ/σ) (v - u)·Ω dv / σ`.
    pub fn dz_dl(&self) -> f64 {
        let l = self.l();
        let mut acc = CompensatedSum::default();
        for ((&w, &c), &r) in self.w.iter().zip(&self.cos).zip(&self.r) {
            acc.add(w * (r * c - l));
        }
        let scale = (sphere_factor(self.spec.d).ln() + self.shift).exp();
        scale * acc.value() / self.spec.sigma
    }

    /// `∂²_ll Z = ∫ exp(-Φ/σ) ([(v - u)·Ω]² - σ) dv / σ²`.
    pub fn d2z_dll(&self) -> f64 {
        let l = self.l();
        let s = self.spec.sigma;
        let mut acc = CompensatedSum::default();
        for ((&w, &c), &r) in self.w.iter().zip(&self.cos).zip(&self.r) {
            let x = r * c - l;
            acc.add(w * (x * x - s));
        }
        let scale = (sphere_factor(self.spec.d).ln() + self.shift).exp();
        scale * acc.value() / (s * s)
    }

    /// `∂_l H = (λ∥ - σ)/σ - H²/σ`.
    pub fn dh_dl(&self) -> f64 {
        let (lpar, _) = self.pressure_tensor();
        let h = self.h();
        (lpar - self.spec.sigma) / self.spec.sigma - h * h / self.spec.sigma
    }

    /// `∂_σ H = Cov(v·Ω - l, Φ) / σ²`.
    pub fn dh_dsigma(&self) -> f64 {
        let l = self.l();
        let mean_phi = self.mean_with_phi(|_, _, p| p);
        let h = self.h();
        let cov = self.mean_with_phi(|c, r, p| (r * c - l - h) * (p - mean_phi));
        cov / (self.spec.sigma * self.spec.sigma)
    }

    /// `(λ∥, λ⊥)`: eigenvalues of the centred second moment along and across `Ω`.
    pub fn pressure_tensor(&self) -> (f64, f64) {
        let l = self.l();
        let dm1 = (self.spec.d - 1) as f64;
        let par = self.mean(|c, r| {
            let x = r * c - l;
            x * x
        });
        let perp = self.mean(|c, r| r * r * (1.0 - c * c) / dm1);
        (par, perp)
    }
}

pub fn z(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<f64> {
    Ok(EquilibriumGrid::new(spec, rule)?.z())
}

pub fn log_z(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<f64> {
    Ok(EquilibriumGrid::new(spec, rule)?.log_z())
}

/// `Z` and an error estimate from doubling the node counts.
pub fn z_with_error(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<(f64, f64)> {
    let z0 = z(spec, rule)?;
    let z1 = z(spec, &rule.refined())?;
    Ok((z1, (z1 - z0).abs()))
}

pub fn dz_dl(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<f64> {
    Ok(EquilibriumGrid::new(spec, rule)?.dz_dl())
}

pub fn d2z_dll(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<f64> {
    Ok(EquilibriumGrid::new(spec, rule)?.d2z_dll())
}

pub fn h(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<f64> {
    Ok(EquilibriumGrid::new(spec, rule)?.h())
}

pub fn weighted_moment(
    g: impl Fn(f64, f64) -> f64,
    spec: &EquilibriumSpec,
    rule: &QuadratureRule,
) -> Result<f64> {
    Ok(EquilibriumGrid::new(spec, rule)?.mean(g))
}

pub fn pressure_tensor(spec: &EquilibriumSpec, rule: &QuadratureRule) -> Result<(f64, f64)> {
    Ok(EquilibriumGrid::new(spec, rule)?.pressure_tensor())
}

/// Monte Carlo estimate of `∫ g(v) M_u dv` from rejection samples, with its
/// standard error. `g` receives the full velocity vector, `u = l e1`.
pub fn mc_moment(
    g: impl Fn(&[f64]) -> f64,
    spec: &EquilibriumSpec,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let samples = crate::particles::sample_equilibrium(spec, n_samples, seed)?;
    let d = spec.d;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, v) in samples.velocities.chunks_exact(d).enumerate() {
        let x = g(v);
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = n_samples as f64;
    let var = if n_samples > 1 { m2 / (n - 1.0) } else { 0.0 };
    Ok((mean, (var / n).sqrt()))
}
