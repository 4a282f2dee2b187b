//! Radial confining potentials `v -> V(|v|)` and the scalar maps built on them.
//!
//! All evaluations use the reduced coordinates of an axially symmetric problem:
//! a speed `r = |v|`, the cosine `c` between `v` and the mean-velocity direction,
//! and the order parameter `l = |u|`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar function of the speed.
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Potentials with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BuiltinPotential {
    /// `V = 0`; the equilibria are Maxwellians.
    Zero,
    /// `V(r) = beta r^4 / 4 - alpha r^2 / 2`.
    Quartic { alpha: f64, beta: f64 },
}

impl BuiltinPotential {
    fn value(&self, r: f64) -> f64 {
        match *self {
            BuiltinPotential::Zero => 0.0,
            BuiltinPotential::Quartic { alpha, beta } => {
                let r2 = r * r;
                0.25 * beta * r2 * r2 - 0.5 * alpha * r2
            }
        }
    }

    fn d1(&self, r: f64) -> f64 {
        match *self {
            BuiltinPotential::Zero => 0.0,
            BuiltinPotential::Quartic { alpha, beta } => r * (beta * r * r - alpha),
        }
    }

    fn d2(&self, r: f64) -> f64 {
        match *self {
            BuiltinPotential::Zero => 0.0,
            BuiltinPotential::Quartic { alpha, beta } => 3.0 * beta * r * r - alpha,
        }
    }

    fn d3(&self, r: f64) -> f64 {
        match *self {
            BuiltinPotential::Zero => 0.0,
            BuiltinPotential::Quartic { beta, .. } => 6.0 * beta * r,
        }
    }
}

#[derive(Clone)]
enum Repr {
    Builtin(BuiltinPotential),
    Custom {
        value: RadialFn,
        d1: RadialFn,
        d2: RadialFn,
        d3: Option<RadialFn>,
    },
}

/// A radial potential together with its first three derivatives.
///
/// Immutable after construction and cheap to clone.
#[derive(Clone)]
pub struct RadialPotential {
    repr: Repr,
    label: String,
}

impl fmt::Debug for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialPotential").field("label", &self.label).finish()
    }
}

impl fmt::Display for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl RadialPotential {
    pub fn zero() -> Self {
        RadialPotential {
            repr: Repr::Builtin(BuiltinPotential::Zero),
            label: "zero".to_string(),
        }
    }

    pub fn quartic(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "quartic potential needs alpha > 0 and beta > 0, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(RadialPotential {
            repr: Repr::Builtin(BuiltinPotential::Quartic { alpha, beta }),
            label: format!("quartic:alpha={alpha},beta={beta}"),
        })
    }

    pub fn from_builtin(builtin: BuiltinPotential) -> Result<Self> {
        match builtin {
            BuiltinPotential::Zero => Ok(Self::zero()),
            BuiltinPotential::Quartic { alpha, beta } => Self::quartic(alpha, beta),
        }
    }

    /// A user-supplied potential. Without `d3` the small-noise slope is unavailable.
    pub fn custom(
        label: impl Into<String>,
        value: RadialFn,
        d1: RadialFn,
        d2: RadialFn,
        d3: Option<RadialFn>,
    ) -> Self {
        RadialPotential {
            repr: Repr::Custom { value, d1, d2, d3 },
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn builtin(&self) -> Option<BuiltinPotential> {
        match &self.repr {
            Repr::Builtin(b) => Some(*b),
            Repr::Custom { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Builtin(BuiltinPotential::Zero))
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Builtin(b) => b.value(r),
            Repr::Custom { value, .. } => value(r),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Builtin(b) => b.d1(r),
            Repr::Custom { d1, .. } => d1(r),
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Builtin(b) => b.d2(r),
            Repr::Custom { d2, .. } => d2(r),
        }
    }

    /// Third derivative, if the potential provides one.
    pub fn d3(&self, r: f64) -> Option<f64> {
        match &self.repr {
            Repr::Builtin(b) => Some(b.d3(r)),
            Repr::Custom { d3, .. } => d3.as_ref().map(|f| f(r)),
        }
    }

    pub fn has_third_derivative(&self) -> bool {
        match &self.repr {
            Repr::Builtin(_) => true,
            Repr::Custom { d3, .. } => d3.is_some(),
        }
    }

    /// `V'(r) / r`, continued by `V''(0)` at the origin.
    pub fn d1_over_r(&self, r: f64) -> f64 {
        if r < 1e-12 {
            self.d2(0.0)
        } else {
            self.d1(r) / r
        }
    }

    /// Heuristic confinement probe: `(r^2/2 + V(r)) / r` must at least double
    /// per decade on `r in {10, 1e2, 1e3, 1e4}`. Not a proof of confinement.
    pub fn confinement_probe(&self) -> bool {
        let g = |r: f64| (0.5 * r * r + self.value(r)) / r;
        let ladder = [10.0, 1e2, 1e3, 1e4];
        ladder.windows(2).all(|w| {
            let (a, b) = (g(w[0]), g(w[1]));
            a.is_finite() && b.is_finite() && b >= 2.0 * a && b > 0.0
        })
    }
}

impl FromStr for RadialPotential {
    type Err = Error;

    /// Parses `zero` or `quartic:alpha=..,beta=..`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s, None),
        };
        match name.to_ascii_lowercase().as_str() {
            "zero" => {
                if args.is_some_and(|a| !a.trim().is_empty()) {
                    return Err(Error::Config(format!("potential `zero` takes no parameters: `{s}`")));
                }
                Ok(RadialPotential::zero())
            }
            "quartic" => {
                let mut alpha = None;
                let mut beta = None;
                for kv in args.unwrap_or("").split(',').filter(|t| !t.trim().is_empty()) {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))?;
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("`{v}` is not a number")))?;
                    match k.trim() {
                        "alpha" => alpha = Some(v),
                        "beta" => beta = Some(v),
                        other => return Err(Error::Config(format!("unknown quartic parameter `{other}`"))),
                    }
                }
                let alpha = alpha.ok_or_else(|| Error::Config("quartic potential needs alpha".into()))?;
                let beta = beta.ok_or_else(|| Error::Config("quartic potential needs beta".into()))?;
                RadialPotential::quartic(alpha, beta).map_err(|e| Error::Config(e.to_string()))
            }
            other => Err(Error::Config(format!("unknown potential `{other}`"))),
        }
    }
}

/// Total potential `|v - u|^2/2 + V(|v|)` at a velocity of speed `r` making
/// cosine `c` with `u`, where `|u| = l`.
pub fn phi(c: f64, r: f64, l: f64, pot: &RadialPotential) -> f64 {
    0.5 * r * r - r * c * l + 0.5 * l * l + pot.value(r)
}

/// Bisect `f` (negative at `lo`, positive at `hi`) down to width `width`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> (f64, f64) {
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Safeguarded Newton polish inside `[lo, hi]` where `f(lo) <= 0 < f(hi)`.
fn polish(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= tol {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dfx = df(x);
        let mut next = x - fx / dfx;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= f64::EPSILON * x.abs().max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// The unique `r` with `r + V'(r) = l`: the speed of the minimiser of the
/// total potential for a mean velocity of modulus `l`.
pub fn speed_map_inverse(l: f64, pot: &RadialPotential) -> Result<f64> {
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::InvalidInput(format!("order parameter must be >= 0, got {l}")));
    }
    if l == 0.0 {
        return Ok(0.0);
    }
    let g = |r: f64| r + pot.d1(r) - l;
    let mut hi = l.max(1.0);
    let mut guard = 0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NonMonotone { at: hi });
        }
    }
    // strict convexity of r^2/2 + V on the bracket
    let samples = 256;
    for k in 0..=samples {
        let r = hi * k as f64 / samples as f64;
        if 1.0 + pot.d2(r) < 0.0 {
            return Err(Error::NonMonotone { at: r });
        }
    }
    let (lo, hi) = bisect(g, 0.0, hi, 1e-3);
    let tol = 4.0 * f64::EPSILON * l.max(1.0);
    Ok(polish(g, |r| 1.0 + pot.d2(r), lo, hi, tol))
}

/// Upper end of the scan used to locate the interior critical point of `V`.
pub const R0_SCAN_MAX: f64 = 100.0;

/// Positive root of `V'`: the speed preferred by the self-propulsion/friction balance.
pub fn r0(pot: &RadialPotential) -> Result<f64> {
    // geometric ladder from 1e-6 to the scan maximum
    let n = 4000;
    let (a, b) = (1e-6f64.ln(), R0_SCAN_MAX.ln());
    let mut prev_r = (a).exp();
    let mut prev = pot.d1(prev_r);
    for k in 1..=n {
        let r = (a + (b - a) * k as f64 / n as f64).exp();
        let cur = pot.d1(r);
        if prev < 0.0 && cur >= 0.0 {
            if cur == 0.0 {
                return Ok(r);
            }
            let f = |x: f64| pot.d1(x);
            let (lo, hi) = bisect(f, prev_r, r, 1e-3 * r);
            return Ok(polish(f, |x| pot.d2(x), lo, hi, 1e-13));
        }
        prev_r = r;
        prev = cur;
    }
    Err(Error::NoInteriorCriticalPoint { scanned: R0_SCAN_MAX })
}

/// A characteristic speed for scaling brackets and bounds: `r0` when the
/// potential has one, otherwise 1.
pub fn speed_scale(pot: &RadialPotential) -> f64 {
    r0(pot).unwrap_or(1.0)
}
