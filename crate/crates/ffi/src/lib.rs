//! C ABI for `swarm-hydro`.
//!
//! Conventions:
//! - every fallible function returns an [`ShStatus`] and writes results
//!   through out-pointers, which are left untouched on failure;
//! - the message of the last failure on the calling thread is available from
//!   [`sh_last_error_message`];
//! - handles (`ShPotential`, `ShSeries`) are released with the matching
//!   `*_free`; freeing `NULL` is a no-op;
//! - panics never cross the boundary and are reported as `SH_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use swarm_hydro::coefficients::HydroCoefficients;
use swarm_hydro::gci::Mesh2D;
use swarm_hydro::partition::EquilibriumGrid;
use swarm_hydro::particles::{run, OrderParameterSeries, SimParams};
use swarm_hydro::phase::{find_l_star, find_sigma0, small_sigma_slope, sweep};
use swarm_hydro::potential::{r0, speed_map_inverse};
use swarm_hydro::{EquilibriumSpec, Error, QuadratureRule, RadialPotential};

/// Result codes. Values are stable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Io = 4,
    NonMonotone = 10,
    NoInteriorCriticalPoint = 11,
    MissingThirdDerivative = 12,
    Truncation = 13,
    MultipleMaxima = 14,
    Plateau = 15,
    NoSignChange = 16,
    DegenerateHessian = 17,
    FlatSecondDerivative = 18,
    SingularSystem = 19,
    Incompatible = 20,
    ZeroDenominator = 21,
    LowAcceptance = 22,
    NumericalBlowup = 23,
    StepTooLarge = 24,
    Panic = 99,
}

impl From<&Error> for ShStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) => ShStatus::InvalidInput,
            Error::Config(_) => ShStatus::Config,
            Error::Io(_) => ShStatus::Io,
            Error::NonMonotone { .. } => ShStatus::NonMonotone,
            Error::NoInteriorCriticalPoint { .. } => ShStatus::NoInteriorCriticalPoint,
            Error::MissingThirdDerivative(_) => ShStatus::MissingThirdDerivative,
            Error::Truncation { .. } => ShStatus::Truncation,
            Error::MultipleMaxima { .. } => ShStatus::MultipleMaxima,
            Error::Plateau { .. } => ShStatus::Plateau,
            Error::NoSignChange { .. } => ShStatus::NoSignChange,
            Error::DegenerateHessian { .. } => ShStatus::DegenerateHessian,
            Error::FlatSecondDerivative { .. } => ShStatus::FlatSecondDerivative,
            Error::SingularSystem { .. } => ShStatus::SingularSystem,
            Error::Incompatible { .. } => ShStatus::Incompatible,
            Error::ZeroDenominator(_) => ShStatus::ZeroDenominator,
            Error::LowAcceptance { .. } => ShStatus::LowAcceptance,
            Error::NumericalBlowup { .. } => ShStatus::NumericalBlowup,
            Error::StepTooLarge { .. } => ShStatus::StepTooLarge,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f` with panics caught and failures recorded.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ShStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            ShStatus::Ok
        }
        Ok(Err(Failure::Null)) => {
            set_last_error("null pointer argument");
            ShStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(&format!("{}: {e}", e.kind()));
            ShStatus::from(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            set_last_error(&format!("panic: {msg}"));
            ShStatus::Panic
        }
    }
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null);
    }
    out.write(value);
    Ok(())
}

fn need<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null);
    }
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null)
}

/// Opaque radial potential.
pub struct ShPotential {
    inner: RadialPotential,
}

/// Opaque order-parameter time series.
pub struct ShSeries {
    inner: OrderParameterSeries,
    dim: usize,
}

/// A scalar callback `f(r, user_data)`.
pub type ShRadialCallback = Option<unsafe extern "C" fn(r: f64, user_data: *mut c_void) -> f64>;

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sh_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn boxed(p: RadialPotential) -> *mut ShPotential {
    Box::into_raw(Box::new(ShPotential { inner: p }))
}

/// `V = 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_potential_zero(out: *mut *mut ShPotential) -> ShStatus {
    guard(|| put(out, boxed(RadialPotential::zero())))
}

/// `V(r) = beta r^4/4 - alpha r^2/2` with `alpha, beta > 0`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_potential_quartic(alpha: f64, beta: f64, out: *mut *mut ShPotential) -> ShStatus {
    guard(|| {
        need(out)?;
        let p = RadialPotential::quartic(alpha, beta)?;
        put(out, boxed(p))
    })
}

/// Parses `zero` or `quartic:alpha=A,beta=B`.
///
/// # Safety
/// `spec` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sh_potential_parse(spec: *const c_char, out: *mut *mut ShPotential) -> ShStatus {
    guard(|| {
        if spec.is_null() {
            return Err(Failure::Null);
        }
        need(out)?;
        let s = CStr::from_ptr(spec).to_str().map_err(|e| Error::InvalidInput(e.to_string()))?;
        put(out, boxed(s.parse()?))
    })
}

#[derive(Clone, Copy)]
struct Callback {
    f: unsafe extern "C" fn(f64, *mut c_void) -> f64,
    data: *mut c_void,
}

// The caller promises the callbacks are thread-safe (see sh_potential_custom).
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn call(&self, r: f64) -> f64 {
        unsafe { (self.f)(r, self.data) }
    }
}

/// Potential given by callbacks for `V, V', V''` and optionally `V'''` (may be NULL).
///
/// The callbacks may be invoked concurrently from several threads and must
/// stay valid, together with `user_data`, until the handle is freed.
///
/// # Safety
/// `label` must be NUL-terminated; the callbacks must be sound to call with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn sh_potential_custom(
    label: *const c_char,
    value: ShRadialCallback,
    d1: ShRadialCallback,
    d2: ShRadialCallback,
    d3: ShRadialCallback,
    user_data: *mut c_void,
    out: *mut *mut ShPotential,
) -> ShStatus {
    guard(|| {
        need(out)?;
        let (Some(v), Some(a), Some(b)) = (value, d1, d2) else {
            return Err(Failure::Null);
        };
        if label.is_null() {
            return Err(Failure::Null);
        }
        let label = CStr::from_ptr(label).to_string_lossy().into_owned();
        let wrap = |f| {
            let cb = Callback { f, data: user_data };
            Arc::new(move |r: f64| cb.call(r)) as Arc<dyn Fn(f64) -> f64 + Send + Sync>
        };
        let p = RadialPotential::custom(label, wrap(v), wrap(a), wrap(b), d3.map(wrap));
        put(out, boxed(p))
    })
}

/// # Safety
/// `pot` must come from an `sh_potential_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sh_potential_free(pot: *mut ShPotential) {
    if !pot.is_null() {
        drop(Box::from_raw(pot));
    }
}

/// The unique `r` with `r + V'(r) = l`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_speed_map_inverse(pot: *const ShPotential, l: f64, out: *mut f64) -> ShStatus {
    guard(|| {
        need(out)?;
        put(out, speed_map_inverse(l, &borrow(pot)?.inner)?)
    })
}

/// Interior critical point `r0` of `V`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_r0(pot: *const ShPotential, out: *mut f64) -> ShStatus {
    guard(|| {
        need(out)?;
        put(out, r0(&borrow(pot)?.inner)?)
    })
}

/// Partition function and moments at `(d, sigma, l)` with the default quadrature.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShPartition {
    pub z: f64,
    pub log_z: f64,
    /// `<v.Omega - l>`.
    pub h: f64,
    pub dz_dl: f64,
    pub d2z_dll: f64,
    pub lambda_par: f64,
    pub lambda_perp: f64,
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_partition(
    pot: *const ShPotential,
    d: usize,
    sigma: f64,
    l: f64,
    out: *mut ShPartition,
) -> ShStatus {
    guard(|| {
        need(out)?;
        let spec = EquilibriumSpec::new(d, sigma, l, borrow(pot)?.inner.clone())?;
        let g = EquilibriumGrid::new(&spec, &QuadratureRule::default())?;
        let (lambda_par, lambda_perp) = g.pressure_tensor();
        put(
            out,
            ShPartition { z: g.z(), log_z: g.log_z(), h: g.h(), dz_dl: g.dz_dl(), d2z_dll: g.d2z_dll(), lambda_par, lambda_perp },
        )
    })
}

/// Equilibrium order parameter `l(sigma)` (0 in the disordered phase).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_find_l_star(pot: *const ShPotential, d: usize, sigma: f64, out: *mut f64) -> ShStatus {
    guard(|| {
        need(out)?;
        put(out, find_l_star(d, sigma, &borrow(pot)?.inner, &QuadratureRule::default())?)
    })
}

/// Critical diffusion over the default bracket.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_find_sigma0(pot: *const ShPotential, d: usize, out: *mut f64) -> ShStatus {
    guard(|| {
        need(out)?;
        put(out, find_sigma0(d, &borrow(pot)?.inner, &QuadratureRule::default(), None)?)
    })
}

/// `lim (l(sigma) - r0)/sigma` as `sigma -> 0`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_small_sigma_slope(pot: *const ShPotential, d: usize, out: *mut f64) -> ShStatus {
    guard(|| {
        need(out)?;
        put(out, small_sigma_slope(d, &borrow(pot)?.inner)?)
    })
}

/// Fills `l_out[0..n]` with `l(sigmas[i])` and `*sigma0` with the critical diffusion.
///
/// # Safety
/// `sigmas` and `l_out` must hold `n` values; pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_phase_sweep(
    pot: *const ShPotential,
    d: usize,
    sigmas: *const f64,
    n: usize,
    l_out: *mut f64,
    sigma0: *mut f64,
) -> ShStatus {
    guard(|| {
        if sigmas.is_null() || l_out.is_null() || sigma0.is_null() {
            return Err(Failure::Null);
        }
        let grid = std::slice::from_raw_parts(sigmas, n);
        let pd = sweep(d, &borrow(pot)?.inner, grid, &QuadratureRule::default())?;
        std::slice::from_raw_parts_mut(l_out, n).copy_from_slice(&pd.l_values);
        put(sigma0, pd.sigma0)
    })
}

/// Hydrodynamic constants and intermediate integrals.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShCoefficients {
    pub c_perp: f64,
    pub c_par: f64,
    pub c_par_prime: f64,
    pub c_perp1: f64,
    pub c_perp2: f64,
    pub c_par1: f64,
    pub c_par2: f64,
    pub c_par3: f64,
}

/// Solves both invariants on an `n_theta x n_r` mesh at `(d, sigma, l)`.
/// A negative `l` selects the equilibrium order parameter `l(sigma)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_coefficients(
    pot: *const ShPotential,
    d: usize,
    sigma: f64,
    l: f64,
    n_theta: usize,
    n_r: usize,
    out: *mut ShCoefficients,
) -> ShStatus {
    guard(|| {
        need(out)?;
        let pot = borrow(pot)?.inner.clone();
        let rule = QuadratureRule::default();
        let l = if l < 0.0 { find_l_star(d, sigma, &pot, &rule)? } else { l };
        let spec = EquilibriumSpec::new(d, sigma, l, pot)?;
        let mesh = Mesh2D::new(&spec, n_theta, n_r)?;
        let h = HydroCoefficients::compute(&spec, &mesh, &rule)?;
        put(
            out,
            ShCoefficients {
                c_perp: h.c_perp,
                c_par: h.c_par,
                c_par_prime: h.c_par_prime,
                c_perp1: h.c_perp1,
                c_perp2: h.c_perp2,
                c_par1: h.c_par1,
                c_par2: h.c_par2,
                c_par3: h.c_par3,
            },
        )
    })
}

/// Mean-field particle run from an ordered equilibrium start.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_simulate(
    pot: *const ShPotential,
    d: usize,
    sigma: f64,
    n: usize,
    t_final: f64,
    dt: f64,
    record_every: usize,
    seed: u64,
    out: *mut *mut ShSeries,
) -> ShStatus {
    guard(|| {
        need(out)?;
        let mut params = SimParams::new(d, sigma, borrow(pot)?.inner.clone(), n, t_final, seed);
        params.dt = dt;
        params.record_every = record_every;
        let series = run(&params)?;
        put(out, Box::into_raw(Box::new(ShSeries { inner: series, dim: d })))
    })
}

/// Number of records.
///
/// # Safety
/// `series` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sh_series_len(series: *const ShSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// Copies `min(len, cap)` times and `|u|` values; `dirs` (may be NULL) receives
/// `min(len, cap) x d` direction components row by row.
///
/// # Safety
/// Buffers must hold `cap` values (`cap * d` for `dirs`).
#[no_mangle]
pub unsafe extern "C" fn sh_series_copy(
    series: *const ShSeries,
    times: *mut f64,
    u_mod: *mut f64,
    dirs: *mut f64,
    cap: usize,
    written: *mut usize,
) -> ShStatus {
    guard(|| {
        let s = borrow(series)?;
        if times.is_null() || u_mod.is_null() || written.is_null() {
            return Err(Failure::Null);
        }
        let k = s.inner.len().min(cap);
        std::slice::from_raw_parts_mut(times, k).copy_from_slice(&s.inner.times[..k]);
        std::slice::from_raw_parts_mut(u_mod, k).copy_from_slice(&s.inner.u_mod[..k]);
        if !dirs.is_null() {
            let out = std::slice::from_raw_parts_mut(dirs, k * s.dim);
            for (row, dir) in out.chunks_exact_mut(s.dim).zip(&s.inner.u_dir) {
                row.copy_from_slice(dir);
            }
        }
        put(written, k)
    })
}

/// Time average of `|u|` after `from_fraction` of the run, with its
/// batch-means standard error.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sh_series_time_average(
    series: *const ShSeries,
    from_fraction: f64,
    mean: *mut f64,
    stderr: *mut f64,
) -> ShStatus {
    guard(|| {
        need(mean)?;
        need(stderr)?;
        let (m, e) = borrow(series)?.inner.time_average(from_fraction);
        put(mean, m)?;
        put(stderr, e)
    })
}

/// # Safety
/// `series` must come from [`sh_simulate`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sh_series_free(series: *mut ShSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}
