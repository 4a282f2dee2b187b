//! Composite Gauss–Legendre rules on panel partitions.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;

/// Nodes and weights of an n-point Gauss–Legendre rule on `[-1, 1]`, sorted by node.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Cached rule of the given order (order ≥ 1).
pub fn gauss_legendre(order: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|p| p.into_inner());
    guard
        .entry(order)
        .or_insert_with(|| {
            let n = NonZeroUsize::new(order.max(1)).expect("order is at least one");
            let rule = GaussLegendre::new(n);
            let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(GaussRule {
                nodes: pairs.iter().map(|p| p.0).collect(),
                weights: pairs.iter().map(|p| p.1).collect(),
            })
        })
        .clone()
}

/// Tabulates the composite rule of `order` points per panel.
///
/// Returns `(x, w)` with nodes increasing across panels.
pub fn composite(panels: &[(f64, f64)], order: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(order);
    let mut x = Vec::with_capacity(panels.len() * order);
    let mut w = Vec::with_capacity(panels.len() * order);
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
            x.push(mid + half * t);
            w.push(half * wt);
        }
    }
    (x, w)
}

/// Splits `[a, b]` into `n` equal panels.
pub fn uniform_panels(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let n = n.max(1);
    (0..n)
        .map(|k| {
            let lo = a + (b - a) * k as f64 / n as f64;
            let hi = if k + 1 == n { b } else { a + (b - a) * (k + 1) as f64 / n as f64 };
            (lo, hi)
        })
        .collect()
}

/// Integrates `f` over `[a, b]` with `panels` equal panels of `order` points.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = composite(&uniform_panels(a, b, panels), order);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = gauss_legendre(8);
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        let m14: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn composite_integrates_smooth_functions() {
        let v = integrate(|x| (-x * x).exp(), 0.0, 6.0, 6, 20);
        assert!((v - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-14);
        let s = integrate(f64::sin, 0.0, std::f64::consts::PI, 3, 16);
        assert!((s - 2.0).abs() < 1e-14);
    }
}
