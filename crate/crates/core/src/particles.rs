//! Mean-field particle simulator and exact rejection sampler for `M_u`.
//!
//! Each particle relaxes towards the empirical mean velocity, feels the radial
//! force `-V'(|v|) v/|v|` and white noise of strength `√(2σ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{radial_extent, sphere_factor, EquilibriumGrid, EquilibriumSpec, QuadratureRule};
use crate::potential::{phi, speed_scale, RadialPotential};

/// Samples drawn per independent RNG stream in [`sample_equilibrium`].
pub const SAMPLE_CHUNK: usize = 1024;

/// Panels of the piecewise-constant radial majorant.
pub const ENVELOPE_PANELS: usize = 256;

/// Proposal family used by the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposal {
    /// `N(u, σI)` thinned by `exp(-(V - min V)/σ)`.
    GaussianTilt,
    /// Piecewise-constant radial majorant times a uniform direction.
    RadialEnvelope,
}

/// Rejection samples from `M_u`, stored row-major as `n × d`.
#[derive(Debug, Clone)]
pub struct EquilibriumSamples {
    pub d: usize,
    pub velocities: Vec<f64>,
    pub proposals: u64,
    pub acceptance_rate: f64,
    /// Proposals at which the majorant was found to be exceeded.
    pub bound_violations: u64,
    pub proposal: Proposal,
}

impl EquilibriumSamples {
    pub fn len(&self) -> usize {
        self.velocities.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.d..(i + 1) * self.d]
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Sampler {
    d: usize,
    l: f64,
    sigma: f64,
    pot: RadialPotential,
    kind: Proposal,
    // GaussianTilt
    v_min: f64,
    // RadialEnvelope
    phi_min: f64,
    edges: Vec<f64>,
    bounds: Vec<f64>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(spec: &EquilibriumSpec) -> Result<Self> {
        let ext = radial_extent(spec)?;
        let (d, l, sigma) = (spec.d, spec.l, spec.sigma);
        let pot = spec.pot.clone();
        let grid = EquilibriumGrid::new(spec, &QuadratureRule::default().coarse())?;
        let log_z = grid.log_z();

        // minimum of V on the truncated range, refined by a local fine scan
        let m = 8192;
        let (mut best_r, mut v_min) = (0.0, pot.value(0.0));
        for k in 1..=m {
            let r = ext.r_max * k as f64 / m as f64;
            let v = pot.value(r);
            if v < v_min {
                v_min = v;
                best_r = r;
            }
        }
        let h = ext.r_max / m as f64;
        for k in 0..=200 {
            let r = (best_r - h + 2.0 * h * k as f64 / 200.0).max(0.0);
            v_min = v_min.min(pot.value(r));
        }
        let log_acc_gauss = log_z + v_min / sigma - 0.5 * d as f64 * (2.0 * std::f64::consts::PI * sigma).ln();

        // radial majorant of log(r^{d-1} exp(-(Φ(1,r,l) - Φmin)/σ)) on equal panels
        let env = |r: f64| -> f64 {
            let pw = if r > 0.0 { (d - 1) as f64 * r.ln() } else if d == 1 { 0.0 } else { f64::NEG_INFINITY };
            pw - phi(1.0, r, l, &pot) / sigma
        };
        let sub = 16;
        let fine: Vec<f64> = (0..=ENVELOPE_PANELS * sub)
            .map(|k| env(ext.r_max * k as f64 / (ENVELOPE_PANELS * sub) as f64))
            .collect();
        let raw_max = fine.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let phi_min = -raw_max * sigma;
        let edges: Vec<f64> = (0..=ENVELOPE_PANELS)
            .map(|k| ext.r_max * k as f64 / ENVELOPE_PANELS as f64)
            .collect();
        let bounds: Vec<f64> = (0..ENVELOPE_PANELS)
            .map(|k| {
                let seg = &fine[k * sub..=(k + 1) * sub];
                let top = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let jump = seg
                    .windows(2)
                    .map(|w| {
                        let diff = (w[1] - w[0]).abs();
                        if diff.is_finite() {
                            diff
                        } else {
                            0.0
                        }
                    })
                    .fold(0.0, f64::max);
                top - raw_max + jump
            })
            .collect();
        let dr = ext.r_max / ENVELOPE_PANELS as f64;
        let log_mass: Vec<f64> = bounds.iter().map(|b| b + dr.ln()).collect();
        let total = log_sum_exp(log_mass.iter().cloned());
        let mut cdf = Vec::with_capacity(ENVELOPE_PANELS);
        let mut acc = 0.0;
        for lm in &log_mass {
            acc += (lm - total).exp();
            cdf.push(acc);
        }
        let log_acc_env = log_z + phi_min / sigma - sphere_factor(d + 1).ln() - total;

        let kind = if log_acc_gauss >= log_acc_env {
            Proposal::GaussianTilt
        } else {
            Proposal::RadialEnvelope
        };
        Ok(Sampler { d, l, sigma, pot, kind, v_min, phi_min, edges, bounds, cdf })
    }

    /// One proposal; returns whether it was accepted and whether the bound was violated.
    fn propose(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) -> (bool, bool) {
        match self.kind {
            Proposal::GaussianTilt => {
                let s = self.sigma.sqrt();
                for (k, x) in out.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = s * z + if k == 0 { self.l } else { 0.0 };
                }
                let r = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                let log_a = -(self.pot.value(r) - self.v_min) / self.sigma;
                let u: f64 = rng.gen();
                (u.ln() < log_a, log_a > 1e-12)
            }
            Proposal::RadialEnvelope => {
                let u: f64 = rng.gen();
                let k = self.cdf.partition_point(|&c| c < u).min(self.bounds.len() - 1);
                let t: f64 = rng.gen();
                let r = self.edges[k] + t * (self.edges[k + 1] - self.edges[k]);
                let mut norm = 0.0;
                for x in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = z;
                    norm += z * z;
                }
                let norm = norm.sqrt();
                for x in out.iter_mut() {
                    *x *= r / norm;
                }
                let c = out[0] / r.max(f64::MIN_POSITIVE);
                let log_h = if r > 0.0 { (self.d - 1) as f64 * r.ln() } else { f64::NEG_INFINITY }
                    - (phi(c, r, self.l, &self.pot) - self.phi_min) / self.sigma;
                let log_a = log_h - self.bounds[k];
                let v: f64 = rng.gen();
                (v.ln() < log_a, log_a > 1e-12)
            }
        }
    }
}

/// Draws `n` i.i.d. samples of `M_u`, `u = l e1`, by rejection.
///
/// Deterministic for a given seed: chunk `j` of [`SAMPLE_CHUNK`] samples uses
/// stream `j` of a ChaCha8 generator keyed by `seed`.
pub fn sample_equilibrium(spec: &EquilibriumSpec, n: usize, seed: u64) -> Result<EquilibriumSamples> {
    spec.validate()?;
    let sampler = Sampler::new(spec)?;
    let d = spec.d;
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    let max_proposals_per_chunk = (SAMPLE_CHUNK as u64) * 1000 + 10_000;
    let results: Vec<(Vec<f64>, u64, u64, bool)> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let want = SAMPLE_CHUNK.min(n - j * SAMPLE_CHUNK);
            let mut rng = stream_rng(seed, j as u64);
            let mut buf = vec![0.0; d];
            let mut out = Vec::with_capacity(want * d);
            let (mut tries, mut viol) = (0u64, 0u64);
            while out.len() < want * d {
                if tries >= max_proposals_per_chunk {
                    return (out, tries, viol, false);
                }
                tries += 1;
                let (acc, bad) = sampler.propose(&mut rng, &mut buf);
                if bad {
                    viol += 1;
                }
                if acc {
                    out.extend_from_slice(&buf);
                }
            }
            (out, tries, viol, true)
        })
        .collect();
    let mut velocities = Vec::with_capacity(n * d);
    let (mut proposals, mut violations, mut complete) = (0u64, 0u64, true);
    for (v, t, b, ok) in results {
        velocities.extend(v);
        proposals += t;
        violations += b;
        complete &= ok;
    }
    let accepted = velocities.len() / d;
    let rate = if proposals == 0 { 1.0 } else { accepted as f64 / proposals as f64 };
    if !complete || rate < 1e-3 {
        return Err(Error::LowAcceptance { rate });
    }
    Ok(EquilibriumSamples {
        d,
        velocities,
        proposals,
        acceptance_rate: rate,
        bound_violations: violations,
        proposal: sampler.kind,
    })
}

/// Sum in a fixed binary-tree order.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Starting configuration of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Rejection samples of `M_u` with `|u| = l` along `e1`.
    Equilibrium { l: f64 },
    /// Rejection samples of the isotropic equilibrium.
    Disordered,
    /// Explicit velocities, row-major `n × d`.
    Custom(Vec<f64>),
}

/// `N` velocities in `R^d` under the mean-field SDE.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    d: usize,
    velocities: Vec<f64>,
    t: f64,
    sigma: f64,
    dt: f64,
    pot: RadialPotential,
    rngs: Vec<ChaCha8Rng>,
    blowup_bound: f64,
    buf: Vec<f64>,
}

impl ParticleEnsemble {
    /// Ensemble with explicit initial velocities; particle `i` draws its noise
    /// from stream `i` of a ChaCha8 generator keyed by `seed`.
    pub fn new(
        d: usize,
        velocities: Vec<f64>,
        sigma: f64,
        dt: f64,
        pot: RadialPotential,
        seed: u64,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("dimension must be >= 2, got {d}")));
        }
        if velocities.len() % d != 0 {
            return Err(Error::InvalidInput("velocity array length is not a multiple of d".into()));
        }
        let n = velocities.len() / d;
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 particles, got {n}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        if velocities.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("initial velocities must be finite".into()));
        }
        let blowup_bound = 10.0 * (speed_scale(&pot) + 20.0 * sigma.sqrt());
        let rngs = (0..n).map(|i| stream_rng(seed, i as u64)).collect();
        Ok(ParticleEnsemble {
            d,
            velocities,
            t: 0.0,
            sigma,
            dt,
            pot,
            rngs,
            blowup_bound,
            buf: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.velocities.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn blowup_bound(&self) -> f64 {
        self.blowup_bound
    }

    /// Empirical mean velocity `ū`, summed in a fixed pairwise order.
    pub fn mean_velocity(&mut self) -> Vec<f64> {
        let n = self.len();
        let d = self.d;
        (0..d)
            .map(|k| {
                for i in 0..n {
                    self.buf[i] = self.velocities[i * d + k];
                }
                pairwise_sum(&self.buf) / n as f64
            })
            .collect()
    }

    /// Largest admissible step for the current speeds.
    pub fn stability_bound(&self) -> f64 {
        let s_max = self
            .velocities
            .chunks_exact(self.d)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let sup = (0..=64)
            .map(|k| self.pot.d2(s_max * k as f64 / 64.0).abs())
            .fold(0.0, f64::max);
        0.1 * (1.0f64).min(1.0 / (1.0 + sup))
    }

    /// One Euler–Maruyama step.
    pub fn step(&mut self) -> Result<()> {
        let bound = self.stability_bound();
        if self.dt > bound {
            return Err(Error::StepTooLarge { dt: self.dt, bound });
        }
        let ubar = self.mean_velocity();
        let (d, dt, pot) = (self.d, self.dt, &self.pot);
        let noise = (2.0 * self.sigma * dt).sqrt();
        let stochastic = self.sigma > 0.0;
        self.velocities
            .par_chunks_mut(d)
            .zip(self.rngs.par_iter_mut())
            .with_min_len(256)
            .for_each(|(v, rng)| {
                let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let k = pot.d1_over_r(r);
                for (x, &m) in v.iter_mut().zip(&ubar) {
                    let drift = -(*x - m) - k * *x;
                    let xi: f64 = if stochastic { rng.sample(StandardNormal) } else { 0.0 };
                    *x += dt * drift + noise * xi;
                }
            });
        self.t += dt;
        let limit = self.blowup_bound;
        for v in self.velocities.chunks_exact(d) {
            let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(s <= limit) {
                return Err(Error::NumericalBlowup { t: self.t, speed: s, bound: limit });
            }
        }
        Ok(())
    }
}

/// Parameters of a simulation run.
#[derive(Debug, Clone)]
pub struct SimParams {
    pub d: usize,
    pub sigma: f64,
    pub pot: RadialPotential,
    pub n: usize,
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub record_every: usize,
    pub init: InitialCondition,
}

impl SimParams {
    /// Ordered start at `l = r0` (or 1 without an interior critical point),
    /// `dt = 1e-3`, recording every 100 steps.
    pub fn new(d: usize, sigma: f64, pot: RadialPotential, n: usize, t_final: f64, seed: u64) -> Self {
        let l = speed_scale(&pot);
        SimParams {
            d,
            sigma,
            pot,
            n,
            t_final,
            dt: 1e-3,
            seed,
            record_every: 100,
            init: InitialCondition::Equilibrium { l },
        }
    }
}

/// `|ū(t)|` and `ū/|ū|` sampled along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterSeries {
    pub times: Vec<f64>,
    pub u_mod: Vec<f64>,
    pub u_dir: Vec<Vec<f64>>,
}

impl OrderParameterSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, u: &[f64]) {
        let m = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dir = if m > 1e-12 {
            u.iter().map(|x| x / m).collect()
        } else {
            let mut e = vec![0.0; u.len()];
            e[0] = 1.0;
            e
        };
        self.times.push(t);
        self.u_mod.push(m);
        self.u_dir.push(dir);
    }

    /// Mean of `|ū|` over records with `t ≥ from_fraction · t_end`, and its
    /// batch-means standard error (20 batches).
    pub fn time_average(&self, from_fraction: f64) -> (f64, f64) {
        let t_end = *self.times.last().unwrap_or(&0.0);
        let tail: Vec<f64> = self
            .times
            .iter()
            .zip(&self.u_mod)
            .filter(|(t, _)| **t >= from_fraction * t_end - 1e-12)
            .map(|(_, m)| *m)
            .collect();
        if tail.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let batches = 20.min(tail.len());
        if batches < 2 {
            return (mean, f64::NAN);
        }
        let size = tail.len() / batches;
        let bm: Vec<f64> = (0..batches)
            .map(|b| tail[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
            .collect();
        let bmean = bm.iter().sum::<f64>() / batches as f64;
        let var = bm.iter().map(|x| (x - bmean) * (x - bmean)).sum::<f64>() / (batches - 1) as f64;
        (mean, (var / batches as f64).sqrt())
    }
}

/// Initial velocities for `params`.
pub fn initial_velocities(params: &SimParams) -> Result<Vec<f64>> {
    let need_sigma = || {
        if params.sigma > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput("equilibrium initial data needs sigma > 0".into()))
        }
    };
    match &params.init {
        InitialCondition::Custom(v) => {
            if v.len() != params.n * params.d {
                return Err(Error::InvalidInput(format!(
                    "custom initial data has {} entries, expected {}",
                    v.len(),
                    params.n * params.d
                )));
            }
            Ok(v.clone())
        }
        InitialCondition::Equilibrium { l } => {
            need_sigma()?;
            let spec = EquilibriumSpec::new(params.d, params.sigma, *l, params.pot.clone())?;
            Ok(sample_equilibrium(&spec, params.n, params.seed ^ 0x005e_ed0f_1417)?.velocities)
        }
        InitialCondition::Disordered => {
            need_sigma()?;
            let spec = EquilibriumSpec::new(params.d, params.sigma, 0.0, params.pot.clone())?;
            Ok(sample_equilibrium(&spec, params.n, params.seed ^ 0x005e_ed0f_1417)?.velocities)
        }
    }
}

/// Integrates the particle system to `t_final`, recording the order parameter.
///
/// The series has `⌊t_final/(dt·record_every)⌋ + 1` entries.
pub fn run(params: &SimParams) -> Result<OrderParameterSeries> {
    if params.record_every == 0 {
        return Err(Error::InvalidInput("record_every must be >= 1".into()));
    }
    if !(params.t_final >= 0.0 && params.t_final.is_finite()) {
        return Err(Error::InvalidInput(format!("t_final must be >= 0, got {}", params.t_final)));
    }
    let v0 = initial_velocities(params)?;
    let mut ens = ParticleEnsemble::new(params.d, v0, params.sigma, params.dt, params.pot.clone(), params.seed)?;
    let records = (params.t_final / (params.dt * params.record_every as f64) + 1e-9).floor() as usize;
    let mut series = OrderParameterSeries { times: vec![], u_mod: vec![], u_dir: vec![] };
    let u = ens.mean_velocity();
    series.push(0.0, &u);
    for k in 1..=records {
        for _ in 0..params.record_every {
            ens.step()?;
        }
        let u = ens.mean_velocity();
        series.push((k * params.record_every) as f64 * params.dt, &u);
    }
    Ok(series)
}
