//! Command-line front end. Flags override values from `--config FILE`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
//! Failures print a one-line JSON object `{"error", "message", "exit_code"}`
//! on standard error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::coefficients::HydroCoefficients;
use crate::config::{parse_sigma_grid, RunConfig};
use crate::error::{Error, Result};
use crate::gci::{GciSolution, Mesh2D, WeightedQuadrature};
use crate::io::{num, write_csv, write_fields_csv, write_gnuplot_matrix, write_json, Header};
use crate::partition::{mc_moment, EquilibriumGrid, EquilibriumSpec, QuadratureRule};
use crate::particles::{run, InitialCondition, SimParams};
use crate::phase::{find_l_star, find_sigma0, small_sigma_slope, sweep};
use crate::potential::{speed_scale, RadialPotential};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_POTENTIAL: &str = "quartic:alpha=1,beta=1";
const DEFAULT_SWEEP: &str = "0.05:0.5:0.025";

#[derive(Debug, Parser)]
#[command(name = "swarm-hydro", version, about = "Equilibria, phase transition and hydrodynamic coefficients of a kinetic swarming model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// `zero` or `quartic:alpha=A,beta=B` [default: quartic:alpha=1,beta=1]
    #[arg(long)]
    pub pot: Option<String>,
    /// Velocity dimension [default: 2]
    #[arg(long)]
    pub d: Option<usize>,
    /// Diffusion: a value or `start:stop:step`
    #[arg(long)]
    pub sigma: Option<String>,
    /// Order parameter; defaults to the equilibrium `l(σ)`
    #[arg(long)]
    pub l: Option<f64>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed of stochastic commands [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MeshArgs {
    /// θ-cells of the GCI mesh [default: 128]
    #[arg(long)]
    pub n_theta: Option<usize>,
    /// r-cells of the GCI mesh [default: 128]
    #[arg(long)]
    pub n_r: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Order parameter l(σ) over a diffusion grid, with σ0
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
    },
    /// Critical diffusion σ0
    SigmaCritical {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sigma_lo: Option<f64>,
        #[arg(long)]
        sigma_hi: Option<f64>,
    },
    /// Generalized collision invariants χ and χ_Ω on a mesh
    GciSolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
    },
    /// Hydrodynamic coefficients c⊥, c∥, c′∥
    Coefficients {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mesh: MeshArgs,
    },
    /// Mean-field particle simulation of the order parameter
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        record_every: Option<usize>,
        /// `equilibrium` or `disordered`
        #[arg(long)]
        init: Option<String>,
    },
    /// Equilibrium moments by quadrature, optionally against Monte Carlo
    Moments {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo samples (0 skips the comparison)
        #[arg(long)]
        samples: Option<usize>,
    },
}

/// Configuration after merging file values and flags.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    #[serde(skip)]
    pot: RadialPotential,
    potential: String,
    d: usize,
    sigma: Option<Vec<f64>>,
    l: Option<f64>,
    quadrature: QuadratureRule,
    #[serde(skip)]
    out_dir: PathBuf,
    #[serde(skip)]
    cfg: RunConfig,
    seed: u64,
}

fn resolve(common: &Common) -> Result<Resolved> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let pot = match (&common.pot, &cfg.potential) {
        (Some(s), _) => s.parse()?,
        (None, Some(sec)) => sec.to_potential()?,
        (None, None) => DEFAULT_POTENTIAL.parse()?,
    };
    let d = common.d.or(cfg.phase.d).unwrap_or(2);
    if d < 2 {
        return Err(Error::Config(format!("dimension must be at least 2, got {d}")));
    }
    let sigma = match (&common.sigma, &cfg.phase.sigma) {
        (Some(s), _) => Some(parse_sigma_grid(s)?),
        (None, Some(spec)) => Some(spec.grid()?),
        (None, None) => None,
    };
    let l = common.l.or(cfg.phase.l);
    if let Some(l) = l {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Config(format!("l must be >= 0, got {l}")));
        }
    }
    let quadrature = cfg.quadrature.unwrap_or_default();
    quadrature.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(Resolved {
        potential: pot.label().to_string(),
        pot,
        d,
        sigma,
        l,
        quadrature,
        out_dir: common.out_dir.clone().unwrap_or_else(|| cfg.output.out_dir.clone()),
        seed: common.seed.unwrap_or(cfg.particles.seed),
        cfg,
    })
}

impl Resolved {
    fn single_sigma(&self) -> Result<f64> {
        match self.sigma.as_deref() {
            Some([s]) => Ok(*s),
            Some(_) => Err(Error::Config("this command takes a single --sigma value".into())),
            None => Err(Error::Config("--sigma is required".into())),
        }
    }

    fn sigma_grid(&self) -> Result<Vec<f64>> {
        self.sigma.clone().ok_or_else(|| Error::Config("--sigma is required".into()))
    }

    /// `l` from the flags, or the equilibrium order parameter at `sigma`.
    fn order_parameter(&self, sigma: f64) -> Result<f64> {
        match self.l {
            Some(l) => Ok(l),
            None => find_l_star(self.d, sigma, &self.pot, &self.quadrature),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[derive(Serialize)]
struct MeshSettings {
    n_theta: usize,
    n_r: usize,
    grading: f64,
}

fn mesh_settings(r: &Resolved, args: &MeshArgs) -> Result<MeshSettings> {
    let m = MeshSettings {
        n_theta: args.n_theta.unwrap_or(r.cfg.mesh.n_theta),
        n_r: args.n_r.unwrap_or(r.cfg.mesh.n_r),
        grading: r.cfg.mesh.grading,
    };
    if m.n_theta < 2 || m.n_r < 2 || !(m.grading >= 0.0) {
        return Err(Error::Config("mesh needs at least 2x2 cells and a non-negative grading".into()));
    }
    Ok(m)
}

fn build_mesh(spec: &EquilibriumSpec, m: &MeshSettings) -> Result<Mesh2D> {
    Mesh2D::graded(spec, m.n_theta, m.n_r, m.grading)
}

pub fn cmd_phase_diagram(common: &Common) -> Result<Vec<PathBuf>> {
    let mut r = resolve(common)?;
    if r.sigma.is_none() {
        r.sigma = Some(parse_sigma_grid(DEFAULT_SWEEP)?);
    }
    let grid = r.sigma_grid()?;
    let header = Header::new("phase-diagram", &r, None)?;
    let pd = sweep(r.d, &r.pot, &grid, &r.quadrature)?;
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            vec![num(pd.sigmas[i]), num(pd.l_values[i]), num(pd.z_at_l_star[i]), num(pd.d2z_at_l_star[i]), num(pd.slopes[i])]
        })
        .collect();
    let csv = r.path("phase_diagram.csv");
    write_csv(&csv, &header, &["sigma", "l_star", "z", "d2z_dll", "dl_dsigma"], &rows)?;
    let js = r.path("phase_diagram.json");
    let body = json!({
        "d": r.d,
        "potential": r.potential,
        "sigma0": pd.sigma0,
        "points": grid.len(),
        "continuity_violations": pd.continuity_violations,
        "small_sigma_slope": small_sigma_slope(r.d, &r.pot).ok(),
    });
    write_json(&js, &header, &body)?;
    Ok(vec![csv, js])
}

pub fn cmd_sigma_critical(common: &Common, lo: Option<f64>, hi: Option<f64>) -> Result<Vec<PathBuf>> {
    let r = resolve(common)?;
    let lo = lo.or(r.cfg.phase.sigma_lo);
    let hi = hi.or(r.cfg.phase.sigma_hi);
    let bracket = match (lo, hi) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(Error::Config("give both ends of the sigma bracket".into())),
    };
    let header = Header::new("sigma-critical", &(&r, bracket), None)?;
    let sigma0 = find_sigma0(r.d, &r.pot, &r.quadrature, bracket)?;
    let js = r.path("sigma_critical.json");
    write_json(&js, &header, &json!({ "d": r.d, "potential": r.potential, "sigma0": sigma0, "bracket": bracket }))?;
    Ok(vec![js])
}

pub fn cmd_gci_solve(common: &Common, mesh_args: &MeshArgs) -> Result<Vec<PathBuf>> {
    let r = resolve(common)?;
    let ms = mesh_settings(&r, mesh_args)?;
    let sigma = r.single_sigma()?;
    let l = r.order_parameter(sigma)?;
    let header = Header::new("gci-solve", &(&r, &ms), None)?;
    let spec = EquilibriumSpec::new(r.d, sigma, l, r.pot.clone())?;
    let mesh = build_mesh(&spec, &ms)?;
    let gci = GciSolution::solve(&spec, &mesh, &r.quadrature)?;
    let fields = r.path("gci_fields.csv");
    write_fields_csv(&fields, &header, &gci)?;
    let chi = r.path("gci_chi.dat");
    write_gnuplot_matrix(&chi, &header, &mesh, &gci.chi.values)?;
    let chi_omega = r.path("gci_chi_omega.dat");
    write_gnuplot_matrix(&chi_omega, &header, &mesh, &gci.chi_omega.values)?;
    // Maxwellian equilibria have closed-form invariants
    let maxwellian = r.pot.is_zero().then(|| {
        let q = WeightedQuadrature::new(&spec, &mesh, 3);
        json!({
            "chi_rel_l2": q.relative_error(&gci.chi.values, |t, rr| rr * t.sin()),
            "chi_omega_rel_l2": q.relative_error(&gci.chi_omega.values, |t, rr| rr * t.cos() - l),
        })
    });
    let summary = |f: &crate::gci::FieldSolve| {
        json!({ "iterations": f.iterations, "residual": f.residual, "energy": f.energy, "weighted_mean": f.weighted_mean })
    };
    let js = r.path("gci_solve.json");
    let body = json!({
        "d": r.d, "sigma": sigma, "l": l, "potential": r.potential,
        "mesh_id": mesh.id(), "compat_h": gci.compat_h,
        "chi": summary(&gci.chi), "chi_omega": summary(&gci.chi_omega),
        "maxwellian_error": maxwellian,
    });
    write_json(&js, &header, &body)?;
    Ok(vec![fields, chi, chi_omega, js])
}

pub fn cmd_coefficients(common: &Common, mesh_args: &MeshArgs) -> Result<Vec<PathBuf>> {
    let r = resolve(common)?;
    let ms = mesh_settings(&r, mesh_args)?;
    let grid = r.sigma_grid()?;
    let header = Header::new("coefficients", &(&r, &ms), None)?;
    let table: Vec<HydroCoefficients> = grid
        .par_iter()
        .map(|&s| {
            let l = r.order_parameter(s)?;
            let spec = EquilibriumSpec::new(r.d, s, l, r.pot.clone())?;
            HydroCoefficients::compute(&spec, &build_mesh(&spec, &ms)?, &r.quadrature)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|h| {
            let mut row = vec![h.d.to_string(), num(h.sigma), num(h.l), num(h.c_perp), num(h.c_par), num(h.c_par_prime)];
            row.extend(h.intermediates().iter().map(|&x| num(x)));
            row.push(h.mesh_id.clone());
            row
        })
        .collect();
    let csv = r.path("coefficients.csv");
    let cols = [
        "d", "sigma", "l", "c_perp", "c_par", "c_par_prime", "c_perp1", "c_perp2", "c_par1", "c_par2", "c_par3",
        "mesh_id",
    ];
    write_csv(&csv, &header, &cols, &rows)?;
    let js = r.path("coefficients.json");
    write_json(&js, &header, &json!({ "potential": r.potential, "rows": table }))?;
    Ok(vec![csv, js])
}

#[derive(Serialize)]
struct SimSettings {
    n: usize,
    t_final: f64,
    dt: f64,
    record_every: usize,
    init: InitialCondition,
    average_from: f64,
}

pub fn cmd_simulate(
    common: &Common,
    n: Option<usize>,
    t_final: Option<f64>,
    dt: Option<f64>,
    record_every: Option<usize>,
    init: Option<&str>,
) -> Result<Vec<PathBuf>> {
    let r = resolve(common)?;
    let sigma = r.single_sigma()?;
    let p = &r.cfg.particles;
    let init = match init.unwrap_or(&p.init) {
        "equilibrium" => InitialCondition::Equilibrium { l: r.l.or(p.l).unwrap_or_else(|| speed_scale(&r.pot)) },
        "disordered" => InitialCondition::Disordered,
        other => return Err(Error::Config(format!("unknown initial condition `{other}`"))),
    };
    let s = SimSettings {
        n: n.unwrap_or(p.n),
        t_final: t_final.unwrap_or(p.t_final),
        dt: dt.unwrap_or(p.dt),
        record_every: record_every.unwrap_or(p.record_every),
        init,
        average_from: p.average_from,
    };
    if s.n < 2 || !(s.t_final > 0.0) || !(s.dt > 0.0) || s.record_every == 0 || !(0.0..1.0).contains(&s.average_from) {
        return Err(Error::Config("invalid particle settings".into()));
    }
    let header = Header::new("simulate", &(&r, &s), Some(r.seed))?;
    let mut params = SimParams::new(r.d, sigma, r.pot.clone(), s.n, s.t_final, r.seed);
    params.dt = s.dt;
    params.record_every = s.record_every;
    params.init = s.init.clone();
    let series = run(&params)?;
    let mut cols: Vec<String> = vec!["t".into(), "u_mod".into()];
    cols.extend((1..=r.d).map(|k| format!("u_dir_{k}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..series.len())
        .map(|i| {
            let mut row = vec![num(series.times[i]), num(series.u_mod[i])];
            row.extend(series.u_dir[i].iter().map(|&x| num(x)));
            row
        })
        .collect();
    let csv = r.path("order_parameter.csv");
    write_csv(&csv, &header, &col_refs, &rows)?;
    let (mean, stderr) = series.time_average(s.average_from);
    let js = r.path("simulate.json");
    let body = json!({
        "d": r.d, "sigma": sigma, "potential": r.potential, "seed": r.seed, "settings": s,
        "time_average_u_mod": mean, "time_average_stderr": stderr,
        "l_star": find_l_star(r.d, sigma, &r.pot, &r.quadrature).ok(),
    });
    write_json(&js, &header, &body)?;
    Ok(vec![csv, js])
}

/// Name, integrand in `(c, r, l)` and the same quantity as a function of `(v, l)`.
type SampledMoment = (&'static str, fn(f64, f64, f64) -> f64, fn(&[f64], f64) -> f64);

/// Moments with a Monte Carlo counterpart.
fn sampled_moments() -> Vec<SampledMoment> {
    vec![
        ("mean_parallel", |c, r, _| r * c, |v, _| v[0]),
        ("mean_speed", |_, r, _| r, |v, _| v.iter().map(|x| x * x).sum::<f64>().sqrt()),
        ("mean_speed_sq", |_, r, _| r * r, |v, _| v.iter().map(|x| x * x).sum()),
        ("lambda_par", |c, r, l| (r * c - l).powi(2), |v, l| (v[0] - l).powi(2)),
        ("lambda_perp", |c, r, _| r * r * (1.0 - c * c), |v, _| v[1..].iter().map(|x| x * x).sum()),
    ]
}

pub fn cmd_moments(common: &Common, samples: Option<usize>) -> Result<Vec<PathBuf>> {
    let r = resolve(common)?;
    let sigma = r.single_sigma()?;
    let l = r.order_parameter(sigma)?;
    let samples = samples.unwrap_or(r.cfg.particles.samples);
    let header = Header::new("moments", &(&r, samples), (samples > 0).then_some(r.seed))?;
    let spec = EquilibriumSpec::new(r.d, sigma, l, r.pot.clone())?;
    let g = EquilibriumGrid::new(&spec, &r.quadrature)?;
    let dm1 = (r.d - 1) as f64;
    // (name, quadrature value, Monte Carlo mean and standard error)
    type Row = (String, f64, Option<(f64, f64)>);
    let mut rows: Vec<Row> = vec![
        ("z".into(), g.z(), None),
        ("log_z".into(), g.log_z(), None),
        ("h".into(), g.h(), None),
        ("dz_dl".into(), g.dz_dl(), None),
        ("d2z_dll".into(), g.d2z_dll(), None),
        ("dh_dl".into(), g.dh_dl(), None),
        ("dh_dsigma".into(), g.dh_dsigma(), None),
    ];
    for (name, quad, mc) in sampled_moments() {
        let scale = if name == "lambda_perp" { 1.0 / dm1 } else { 1.0 };
        let q = g.mean(|c, rr| quad(c, rr, l)) * scale;
        let m = if samples > 0 {
            let (mean, se) = mc_moment(|v| mc(v, l), &spec, samples, r.seed)?;
            Some((mean * scale, se * scale))
        } else {
            None
        };
        rows.push((name.into(), q, m));
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, q, m)| {
            let (a, b) = m.map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
            vec![name.clone(), num(*q), a, b]
        })
        .collect();
    let csv = r.path("moments.csv");
    write_csv(&csv, &header, &["quantity", "quadrature", "mc_mean", "mc_stderr"], &csv_rows)?;
    let js = r.path("moments.json");
    let table: serde_json::Map<String, serde_json::Value> = rows
        .iter()
        .map(|(name, q, m)| {
            let v = json!({ "quadrature": q, "mc_mean": m.map(|x| x.0), "mc_stderr": m.map(|x| x.1) });
            (name.clone(), v)
        })
        .collect();
    write_json(&js, &header, &json!({ "d": r.d, "sigma": sigma, "l": l, "potential": r.potential, "samples": samples, "moments": table }))?;
    Ok(vec![csv, js])
}

/// Runs a parsed command.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::PhaseDiagram { common } => cmd_phase_diagram(common),
        Command::SigmaCritical { common, sigma_lo, sigma_hi } => cmd_sigma_critical(common, *sigma_lo, *sigma_hi),
        Command::GciSolve { common, mesh } => cmd_gci_solve(common, mesh),
        Command::Coefficients { common, mesh } => cmd_coefficients(common, mesh),
        Command::Simulate { common, n, t_final, dt, record_every, init } => {
            cmd_simulate(common, *n, *t_final, *dt, *record_every, init.as_deref())
        }
        Command::Moments { common, samples } => cmd_moments(common, *samples),
    }
}

/// Exit code of a failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_NUMERICAL
    }
}

/// Machine-readable error line.
pub fn error_json(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string(), "exit_code": exit_code(e) }).to_string()
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            if code != EXIT_OK {
                eprintln!("{}", error_json(&Error::Config(e.kind().to_string())));
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "[phase]\nd = 3\nsigma = 0.4\n[potential]\nkind = \"zero\"\n[output]\nout_dir = \"o\"\n").unwrap();
        let common = Common { config: Some(cfg.clone()), ..Default::default() };
        let r = resolve(&common).unwrap();
        assert_eq!((r.d, r.sigma.clone().unwrap()), (3, vec![0.4]));
        assert!(r.pot.is_zero());
        assert_eq!(r.out_dir, PathBuf::from("o"));
        let common = Common { config: Some(cfg), d: Some(2), sigma: Some("0.1:0.3:0.1".into()), ..Default::default() };
        let r = resolve(&common).unwrap();
        assert_eq!(r.d, 2);
        assert_eq!(r.sigma.unwrap().len(), 3);
    }

    #[test]
    fn usage_errors_map_to_exit_two() {
        assert_eq!(main_with_args(["swarm-hydro", "no-such-command"]), EXIT_USAGE);
        assert_eq!(main_with_args(["swarm-hydro", "moments", "--pot", "cubic"]), EXIT_USAGE);
        assert_eq!(main_with_args(["swarm-hydro", "moments", "--sigma", "0.1:0.2"]), EXIT_USAGE);
        assert_eq!(exit_code(&Error::NoSignChange { lo: 0.1, hi: 1.0 }), EXIT_NUMERICAL);
        let v: serde_json::Value = serde_json::from_str(&error_json(&Error::Plateau { start: 0.0, end: 1.0 })).unwrap();
        assert_eq!(v["error"], "Plateau");
        assert_eq!(v["exit_code"], 3);
    }

    #[test]
    fn commands_needing_one_sigma_reject_ranges() {
        let r = resolve(&Common { sigma: Some("0.1:0.3:0.1".into()), ..Default::default() }).unwrap();
        assert!(matches!(r.single_sigma(), Err(Error::Config(_))));
        let r = resolve(&Common::default()).unwrap();
        assert!(matches!(r.single_sigma(), Err(Error::Config(_))));
    }
}
