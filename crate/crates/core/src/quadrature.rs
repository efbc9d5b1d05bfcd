//! Gauss–Legendre rules and small quadrature helpers.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on P_n started from the Chebyshev-like guess.
    fn compute(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Cached rule of order `n`.
    pub fn get(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
            .clone()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre over consecutive breakpoints.
pub fn composite(breaks: &[f64], order: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::get(order);
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| rule.integrate(w[0], w[1], &f))
        .sum()
}

/// Panel breakpoints for [0, r]: uniform panels, geometric refinement towards
/// 0 (log singularities at the centre) and any extra interior kinks.
pub fn radial_breaks(r: f64, uniform_panels: usize, extra: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=uniform_panels)
        .map(|k| r * k as f64 / uniform_panels as f64)
        .collect();
    let first = r / uniform_panels as f64;
    let mut t = first * 0.5;
    while t > r * 1e-14 {
        b.push(t);
        t *= 0.5;
    }
    b.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < r));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * r.max(1.0));
    b
}

/// Angles of an `n`-point trapezoid rule on the circle, optionally shifted by
/// half a step.
pub fn circle_angles(n: usize, half_step: bool) -> impl Iterator<Item = f64> {
    let step = 2.0 * PI / n as f64;
    let off = if half_step { 0.5 * step } else { 0.0 };
    (0..n).map(move |j| off + step * j as f64)
}
