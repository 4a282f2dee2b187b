//! TOML run configuration. Every key is optional; unknown keys are rejected.
//!
//! ```toml
//! [potential]
//! kind = "quartic"
//! alpha = 1.0
//! beta = 1.0
//!
//! [phase]
//! d = 2
//! sigma = "0.05:0.5:0.025"
//!
//! [mesh]
//! n_theta = 128
//! n_r = 128
//!
//! [particles]
//! n = 10000
//! t_final = 50.0
//! seed = 1
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gci::{mesh::DEFAULT_GRADING, DEFAULT_CELLS};
use crate::partition::QuadratureRule;
use crate::potential::RadialPotential;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: Option<PotentialSection>,
    pub quadrature: Option<QuadratureRule>,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub phase: PhaseSection,
    #[serde(default)]
    pub particles: ParticlesSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    /// `zero` or `quartic`.
    pub kind: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl PotentialSection {
    pub fn to_potential(&self) -> Result<RadialPotential> {
        let mut s = self.kind.clone();
        let params: Vec<String> = [("alpha", self.alpha), ("beta", self.beta)]
            .iter()
            .filter_map(|(k, v)| v.map(|v| format!("{k}={v}")))
            .collect();
        if !params.is_empty() {
            s.push(':');
            s.push_str(&params.join(","));
        }
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub n_theta: usize,
    pub n_r: usize,
    /// Clustering strength of the radial map; 0 gives a uniform mesh.
    pub grading: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { n_theta: DEFAULT_CELLS, n_r: DEFAULT_CELLS, grading: DEFAULT_GRADING }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub d: Option<usize>,
    pub sigma: Option<SigmaSpec>,
    pub l: Option<f64>,
    /// Bracket for the critical diffusion search.
    pub sigma_lo: Option<f64>,
    pub sigma_hi: Option<f64>,
}

/// A single diffusion or a `start:stop:step` range, as number or string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Value(f64),
    Text(String),
}

impl SigmaSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match self {
            SigmaSpec::Value(v) => parse_sigma_grid(&v.to_string()),
            SigmaSpec::Text(s) => parse_sigma_grid(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticlesSection {
    pub n: usize,
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
    /// `equilibrium` (ordered start) or `disordered`.
    pub init: String,
    /// Order parameter of an ordered start; defaults to the speed scale.
    pub l: Option<f64>,
    pub seed: u64,
    /// Fraction of the run discarded before time-averaging.
    pub average_from: f64,
    /// Monte Carlo samples for `moments`; 0 disables the comparison.
    pub samples: usize,
}

impl Default for ParticlesSection {
    fn default() -> Self {
        ParticlesSection {
            n: 10_000,
            t_final: 50.0,
            dt: 1e-3,
            record_every: 100,
            init: "equilibrium".into(),
            l: None,
            seed: 1,
            average_from: 0.6,
            samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub out_dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { out_dir: PathBuf::from(".") }
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }
}

/// Parses `x` or `start:stop:step` (stop included when hit within rounding).
pub fn parse_sigma_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("invalid sigma `{s}`: expected a value or start:stop:step"));
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let grid = match parts[..] {
        [v] => vec![v],
        [start, stop, step] => {
            if !(step > 0.0) || !(stop >= start) {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(Error::Config(format!("sigma range `{s}` has too many points")));
            }
            (0..=n).map(|k| start + k as f64 * step).collect()
        }
        _ => return Err(bad()),
    };
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!("sigma values must be positive: `{s}`")));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_ranges() {
        let g = parse_sigma_grid("0.05:0.5:0.025").unwrap();
        assert_eq!(g.len(), 19);
        assert!((g[18] - 0.5).abs() < 1e-12);
        assert_eq!(parse_sigma_grid("0.3").unwrap(), vec![0.3]);
        assert_eq!(parse_sigma_grid("0.1:0.35:0.1").unwrap().len(), 3);
        for bad in ["", "a", "0.1:0.2", "0.2:0.1:0.1", "0.1:0.2:0", "-1", "0:1:0.5"] {
            assert!(matches!(parse_sigma_grid(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn full_document() {
        let cfg: RunConfig = r#"
            [potential]
            kind = "quartic"
            alpha = 1.0
            beta = 2.0
            [quadrature]
            theta_order = 16
            [mesh]
            n_theta = 32
            [phase]
            d = 3
            sigma = "0.1:0.3:0.1"
            [particles]
            n = 500
            seed = 9
            [output]
            out_dir = "out"
        "#
        .parse()
        .unwrap();
        let pot = cfg.potential.as_ref().unwrap().to_potential().unwrap();
        assert!((pot.d2(1.0) - 5.0).abs() < 1e-15);
        assert_eq!(cfg.quadrature.unwrap().theta_order, 16);
        assert_eq!(cfg.quadrature.unwrap().r_order, 32);
        assert_eq!((cfg.mesh.n_theta, cfg.mesh.n_r), (32, DEFAULT_CELLS));
        assert_eq!(cfg.phase.sigma.unwrap().grid().unwrap().len(), 3);
        assert_eq!((cfg.particles.n, cfg.particles.seed, cfg.particles.dt), (500, 9, 1e-3));
        assert_eq!(cfg.output.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn numeric_sigma_and_empty_document() {
        let cfg: RunConfig = "[phase]\nsigma = 0.25\n".parse().unwrap();
        assert_eq!(cfg.phase.sigma.unwrap().grid().unwrap(), vec![0.25]);
        assert_eq!("".parse::<RunConfig>().unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for doc in ["[phase]\ndd = 2\n", "[nonsense]\n", "[mesh]\nn_theta = 8\ncells = 3\n", "[quadrature]\norder = 3\n"] {
            assert!(matches!(doc.parse::<RunConfig>(), Err(Error::Config(_))), "{doc}");
        }
    }

    #[test]
    fn bad_potential_section() {
        let s = PotentialSection { kind: "quartic".into(), alpha: Some(1.0), beta: None };
        assert!(matches!(s.to_potential(), Err(Error::Config(_))));
        let s = PotentialSection { kind: "zero".into(), alpha: None, beta: None };
        assert!(s.to_potential().unwrap().is_zero());
    }
}
