//! Circle averages `f^{⊙r}`, disk (area) averages `f^{•r}` and smoothing
//! averages `f^{⊛r̂}` against a radial approximate identity.

use std::cell::Cell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::{Domain, RadiusFunction};
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::measures::Charge;
use crate::potentials::bump;
use crate::quadrature::{circle_angles, composite, radial_breaks, GaussLegendre};

/// Node budgets and the doubling rule shared by all averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub angular: usize,
    /// Radial nodes across the uniform panels.
    pub radial: usize,
    pub radial_order: usize,
    /// Geometric panels towards the centre (log singularities there).
    pub geometric_levels: usize,
    #[serde(with = "crate::report::real")]
    pub tol: f64,
    pub max_doublings: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            angular: 256,
            radial: 64,
            radial_order: 8,
            geometric_levels: 24,
            tol: 1e-8,
            max_doublings: 4,
        }
    }
}

impl QuadratureConfig {
    fn doubled(&self, k: usize) -> QuadratureConfig {
        QuadratureConfig {
            angular: self.angular << k,
            radial: self.radial << k,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageResult {
    #[serde(with = "crate::report::real")]
    pub value: f64,
    /// Angular nodes of the accepted rule.
    pub nodes: usize,
    pub converged: bool,
    /// Some node hit a −∞ value and was dropped (principal-value fallback).
    pub singular: bool,
}

/// Trapezoid mean of f on the circle |w − z| = r with `n` nodes. Nodes that
/// evaluate to −∞ trigger the half-step rule; if that also hits one, the
/// offending nodes are dropped.
fn trapezoid_circle(f: &dyn ScalarField, z: Complex64, r: f64, n: usize) -> (f64, bool) {
    let eval = |half: bool| -> (f64, usize, usize) {
        let mut s = 0.0;
        let mut bad = 0;
        for t in circle_angles(n, half) {
            let v = f.eval(z + Complex64::from_polar(r, t));
            if v.is_finite() {
                s += v;
            } else {
                bad += 1;
            }
        }
        (s, bad, n - bad)
    };
    let (s, bad, good) = eval(false);
    if bad == 0 {
        return (s / n as f64, false);
    }
    let (s2, bad2, good2) = eval(true);
    if bad2 == 0 {
        return (s2 / n as f64, false);
    }
    let (s, good) = if good2 >= good { (s2, good2) } else { (s, good) };
    if good == 0 {
        return (f64::NEG_INFINITY, true);
    }
    (s / good as f64, true)
}

/// Planar circle mean with the doubling rule.
pub fn circle_mean(f: &dyn ScalarField, z: Complex64, r: f64, cfg: &QuadratureConfig) -> AverageResult {
    if r == 0.0 {
        return AverageResult {
            value: f.eval(z),
            nodes: 1,
            converged: true,
            singular: false,
        };
    }
    let (mut prev, mut singular) = trapezoid_circle(f, z, r, cfg.angular);
    let mut n = cfg.angular;
    for _ in 0..cfg.max_doublings {
        let (next, s) = trapezoid_circle(f, z, r, 2 * n);
        singular |= s;
        n *= 2;
        let diff = (next - prev).abs();
        prev = next;
        if diff < cfg.tol || (next.is_infinite() && next == prev) {
            return AverageResult {
                value: next,
                nodes: n,
                converged: true,
                singular,
            };
        }
    }
    // near-singular circle: global adaptive Gauss–Legendre in θ
    let g = |t: f64| f.eval(z + Complex64::from_polar(r, t));
    match adaptive_gl(&g, 0.0, 2.0 * PI, cfg.tol * 2.0 * PI) {
        Some((v, evals)) => AverageResult {
            value: v / (2.0 * PI),
            nodes: n + evals,
            converged: true,
            singular,
        },
        None => AverageResult {
            value: prev,
            nodes: n,
            converged: false,
            singular,
        },
    }
}

const ADAPTIVE_ORDER: usize = 10;
const ADAPTIVE_START: usize = 16;
const ADAPTIVE_SPLITS: usize = 2000;

/// Global adaptive Gauss–Legendre: keep bisecting the panel with the largest
/// error estimate until the summed estimate drops below `tol`. Returns the
/// integral and the number of evaluations, or `None` on a non-finite value or
/// an exhausted budget.
fn adaptive_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Option<(f64, usize)> {
    let rule = GaussLegendre::get(ADAPTIVE_ORDER);
    let mut evals = 0;
    let mut panel = |lo: f64, hi: f64, whole: f64| -> (f64, f64, f64, f64, f64) {
        let m = 0.5 * (lo + hi);
        let l = rule.integrate(lo, m, f);
        let r = rule.integrate(m, hi, f);
        evals += 2 * ADAPTIVE_ORDER;
        (lo, m, l, r, (l + r - whole).abs())
    };
    // (lo, hi, value, error)
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let h = (b - a) / ADAPTIVE_START as f64;
    for k in 0..ADAPTIVE_START {
        let (lo, hi) = (a + h * k as f64, a + h * (k + 1) as f64);
        let whole = rule.integrate(lo, hi, f);
        let (lo, m, l, r, err) = panel(lo, hi, whole);
        panels.push((lo, m, l, 0.5 * err));
        panels.push((m, hi, r, 0.5 * err));
    }
    for _ in 0..ADAPTIVE_SPLITS {
        if panels.iter().any(|p| !p.2.is_finite()) {
            return None;
        }
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            let vals: Vec<f64> = panels.iter().map(|p| p.2).collect();
            return Some((crate::measures::pairwise_sum(&vals), evals));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(k, _)| k)
            .expect("non-empty");
        let (lo, hi, whole, _) = panels.swap_remove(worst);
        let (lo, m, l, r, err) = panel(lo, hi, whole);
        panels.push((lo, m, l, 0.5 * err));
        panels.push((m, hi, r, 0.5 * err));
    }
    None
}

fn check_nodes(nodes: usize) -> Result<()> {
    if nodes < 16 || !nodes.is_power_of_two() {
        return Err(invalid(
            "nodes",
            format!("need a power of two ≥ 16, got {nodes}"),
        ));
    }
    Ok(())
}

fn check_disk(domain: &Domain, z: Complex64, r: f64) -> Result<()> {
    if !(r > 0.0) || !domain.contains_closed_disk(z, r) {
        return Err(Error::NotContained { center: z, radius: r });
    }
    Ok(())
}

/// f^{⊙r}(z) = (1/2π)∫ f(z + r e^{iθ}) dθ; the closed disk must lie in D.
pub fn circle_average(f: &dyn ScalarField, domain: &Domain, z: Complex64, r: f64, nodes: usize) -> Result<AverageResult> {
    check_nodes(nodes)?;
    check_disk(domain, z, r)?;
    let cfg = QuadratureConfig {
        angular: nodes,
        ..QuadratureConfig::default()
    };
    Ok(circle_mean(f, z, r, &cfg))
}

/// ∫₀^r g(t) dt with the radial panel layout of `cfg`.
fn radial_integral(r: f64, cfg: &QuadratureConfig, breakpoints: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    let panels = (cfg.radial / cfg.radial_order).max(1);
    let mut breaks = radial_breaks(r, panels, breakpoints);
    let floor = r * 0.5f64.powi(cfg.geometric_levels as i32 + 1);
    breaks.retain(|&b| b == 0.0 || b >= floor);
    composite(&breaks, cfg.radial_order, g)
}

fn disk_mean_once(
    f: &dyn ScalarField,
    z: Complex64,
    r: f64,
    cfg: &QuadratureConfig,
    breakpoints: &[f64],
) -> (f64, bool) {
    let singular = Cell::new(false);
    let v = radial_integral(r, cfg, breakpoints, |t| {
        let (c, s) = trapezoid_circle(f, z, t, cfg.angular);
        singular.set(singular.get() | s);
        c * 2.0 * t
    }) / (r * r);
    (v, singular.get())
}

/// Planar area mean (1/πr²)∫_{D̄(z,r)} f with doubling. `breakpoints` are
/// radii where the circle means have kinks (e.g. distances to atoms).
pub fn disk_mean(
    f: &dyn ScalarField,
    z: Complex64,
    r: f64,
    cfg: &QuadratureConfig,
    breakpoints: &[f64],
) -> AverageResult {
    let (mut prev, mut singular) = disk_mean_once(f, z, r, cfg, breakpoints);
    for k in 1..=cfg.max_doublings {
        let c = cfg.doubled(k);
        let (next, s) = disk_mean_once(f, z, r, &c, breakpoints);
        singular |= s;
        let diff = (next - prev).abs();
        prev = next;
        if diff < cfg.tol {
            return AverageResult {
                value: next,
                nodes: c.angular,
                converged: true,
                singular,
            };
        }
    }
    AverageResult {
        value: prev,
        nodes: cfg.doubled(cfg.max_doublings).angular,
        converged: false,
        singular,
    }
}

/// f^{•r}(z); the closed disk must lie in D.
pub fn disk_average(f: &dyn ScalarField, domain: &Domain, z: Complex64, r: f64) -> Result<AverageResult> {
    check_disk(domain, z, r)?;
    Ok(disk_mean(f, z, r, &QuadratureConfig::default(), &[]))
}

/// Radial approximate identity: a(|w|) supported in the closed unit disk,
/// ∫ a(|w|) dA(w) = 1.
#[derive(Clone)]
pub struct Kernel {
    profile: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    norm: f64,
    /// Support radius of the profile inside [0, 1].
    pub support: f64,
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kernel")
            .field("norm", &self.norm)
            .field("support", &self.support)
            .finish()
    }
}

const KERNEL_PANELS: usize = 8;
const KERNEL_ORDER: usize = 12;
/// Geometric panels inside the first one (log singularities at the centre).
const KERNEL_GRADING: usize = 12;

impl Kernel {
    /// a(t) = c·exp(−1/(1 − t²)).
    pub fn bump() -> Kernel {
        Kernel::scaled_bump(1.0).expect("unit support is valid")
    }

    /// a(t) = c·exp(−1/(1 − (t/w)²)), support [0, w].
    pub fn scaled_bump(width: f64) -> Result<Kernel> {
        if !(width > 0.0 && width <= 1.0) {
            return Err(invalid("width", format!("need 0 < w ≤ 1, got {width}")));
        }
        Kernel::from_profile(width, move |t| bump(t / width))
    }

    /// Normalises an arbitrary nonnegative profile vanishing beyond `support`.
    pub fn from_profile(support: f64, profile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Kernel> {
        let mut k = Kernel {
            profile: std::sync::Arc::new(profile),
            norm: 1.0,
            support,
        };
        let mass = k.radial(|_| 1.0);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("profile", "kernel profile has no mass"));
        }
        k.norm = 1.0 / mass;
        Ok(k)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        self.norm * (self.profile)(t)
    }

    /// ∫₀^support g(t) a(t) 2πt dt.
    fn radial(&self, g: impl Fn(f64) -> f64) -> f64 {
        let first = self.support / KERNEL_PANELS as f64;
        let mut breaks: Vec<f64> = vec![0.0];
        breaks.extend((1..=KERNEL_GRADING).rev().map(|k| first * 0.5f64.powi(k as i32)));
        breaks.extend((1..=KERNEL_PANELS).map(|k| self.support * k as f64 / KERNEL_PANELS as f64));
        composite(&breaks, KERNEL_ORDER, |t| {
            g(t) * self.norm * (self.profile)(t) * 2.0 * PI * t
        })
    }

    /// ∫₀¹ a(t) 2πt dt (should be 1).
    pub fn mass(&self) -> f64 {
        self.radial(|_| 1.0)
    }
}

/// ∫ f(z + ρ w) a(|w|) dA(w), planar.
pub fn smooth_mean(f: &dyn ScalarField, z: Complex64, rho: f64, kernel: &Kernel, cfg: &QuadratureConfig) -> AverageResult {
    let once = |n: usize| -> (f64, bool) {
        let singular = Cell::new(false);
        let v = kernel.radial(|t| {
            let (c, s) = trapezoid_circle(f, z, rho * t, n);
            singular.set(singular.get() | s);
            c
        });
        (v, singular.get())
    };
    let (mut prev, mut singular) = once(cfg.angular);
    let mut n = cfg.angular;
    for _ in 0..cfg.max_doublings {
        n *= 2;
        let (next, s) = once(n);
        singular |= s;
        let diff = (next - prev).abs();
        prev = next;
        if diff < cfg.tol {
            return AverageResult {
                value: next,
                nodes: n,
                converged: true,
                singular,
            };
        }
    }
    AverageResult {
        value: prev,
        nodes: n,
        converged: false,
        singular,
    }
}

/// f^{⊛r̂}(z) with r̂ evaluated at z; D̄(z, r̂(z)) must lie in D.
pub fn smooth_average(f: &dyn ScalarField, z: Complex64, rhat: &RadiusFunction, kernel: &Kernel) -> Result<AverageResult> {
    let rho = rhat.eval(z);
    check_disk(&rhat.domain, z, rho)?;
    Ok(smooth_mean(f, z, rho, kernel, &QuadratureConfig::default()))
}

/// Result of [`disk_average_lower_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    #[serde(with = "crate::report::real")]
    pub value: f64,
    #[serde(with = "crate::report::real")]
    pub bound: f64,
    pub pass: bool,
}

/// p_μ^{•r}(z) against μ(ℂ)·ln(r/√e) for a probability μ.
pub fn disk_average_lower_bound_check(mu: &Charge, z: Complex64, r: f64) -> Result<LowerBoundCheck> {
    mu.require_probability(1e-9)?;
    if !(r > 0.0) {
        return Err(invalid("r", "radius must be positive"));
    }
    check_lower_bound(mu, z, r)
}

const LENS_ORDER: usize = 16;
const LENS_LEVELS: usize = 30;

/// Breaks on [a, b] refined geometrically towards `a` and/or `b`.
fn graded_breaks(a: f64, b: f64, at_a: bool, at_b: bool) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut v = vec![a, mid, b];
    for k in 1..=LENS_LEVELS {
        let e = half * 0.5f64.powi(k as i32);
        if at_a {
            v.push(a + e);
        }
        if at_b {
            v.push(b - e);
        }
    }
    v.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    v.dedup();
    v
}

/// (1/πr²)∫_{D̄(z,r)} ln|w − a| dA(w), integrated in polar coordinates about
/// `a`: ∫ ln ρ · ℓ(ρ) ρ dρ with ℓ(ρ) the angle of the circle |w − a| = ρ
/// inside the disk.
fn atom_disk_log_mean(a: Complex64, z: Complex64, r: f64) -> f64 {
    let d = (a - z).norm();
    let mut total = 0.0;
    if d < r {
        let full = r - d;
        total += composite(&graded_breaks(0.0, full, true, false), LENS_ORDER, |rho| {
            if rho == 0.0 {
                0.0
            } else {
                2.0 * PI * rho * rho.ln()
            }
        });
    }
    let (lo, hi) = ((r - d).abs(), r + d);
    if d > 0.0 && hi > lo {
        total += composite(&graded_breaks(lo, hi, true, true), LENS_ORDER, |rho| {
            let c = ((rho * rho + d * d - r * r) / (2.0 * rho * d)).clamp(-1.0, 1.0);
            2.0 * c.acos() * rho * rho.ln()
        });
    }
    total / (PI * r * r)
}

fn check_lower_bound(mu: &Charge, z: Complex64, r: f64) -> Result<LowerBoundCheck> {
    let terms: Vec<f64> = mu
        .point_masses()
        .filter(|&(_, w)| w != 0.0)
        .map(|(p, w)| w * atom_disk_log_mean(p, z, r))
        .collect();
    let value = crate::measures::pairwise_sum(&terms);
    let bound = mu.mass() * (r / std::f64::consts::E.sqrt()).ln();
    Ok(LowerBoundCheck {
        value,
        bound,
        pass: value >= bound - 1e-6,
    })
}

/// One row of an averaging sweep (CSV columns re, im, r, op, value, nodes).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(with = "crate::report::real")]
    pub re: f64,
    #[serde(with = "crate::report::real")]
    pub im: f64,
    #[serde(with = "crate::report::real")]
    pub r: f64,
    pub op: &'static str,
    #[serde(with = "crate::report::real")]
    pub value: f64,
    pub nodes: usize,
}

/// The chain f^{⊛r̂} ≤ f^{⊙r̂} ≤ f^{⊙r} at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSample {
    #[serde(with = "crate::report::real")]
    pub smooth: f64,
    #[serde(with = "crate::report::real")]
    pub circle_rhat: f64,
    #[serde(with = "crate::report::real")]
    pub circle_r: f64,
}

impl ChainSample {
    pub fn holds(&self, tol: f64) -> bool {
        self.smooth <= self.circle_rhat + tol && self.circle_rhat <= self.circle_r + tol
    }
}

pub fn averaging_chain(f: &dyn ScalarField, z: Complex64, r: &RadiusFunction, kernel: &Kernel, cfg: &QuadratureConfig) -> ChainSample {
    let rhat = r.smoothed();
    let (rh, rr) = (rhat.eval(z), r.eval(z));
    ChainSample {
        smooth: smooth_mean(f, z, rh, kernel, cfg).value,
        circle_rhat: circle_mean(f, z, rh, cfg).value,
        circle_r: circle_mean(f, z, rr, cfg).value,
    }
}

/// Rows for circle, disk and smooth averages at each node.
pub fn averaging_sweep(f: &dyn ScalarField, nodes: &[Complex64], r: &RadiusFunction, kernel: &Kernel, cfg: &QuadratureConfig) -> Vec<SweepRow> {
    let rhat = r.smoothed();
    let mut rows = Vec::with_capacity(3 * nodes.len());
    for &z in nodes {
        let rr = r.eval(z);
        let rh = rhat.eval(z);
        let c = circle_mean(f, z, rr, cfg);
        let d = disk_mean(f, z, rr, cfg, &[]);
        let s = smooth_mean(f, z, rh, kernel, cfg);
        for (op, radius, res) in [("circle", rr, c), ("disk", rr, d), ("smooth", rh, s)] {
            rows.push(SweepRow {
                re: z.re,
                im: z.im,
                r: radius,
                op,
                value: res.value,
                nodes: res.nodes,
            });
        }
    }
    rows
}

/// 1-D Gauss–Legendre helper re-exported for callers that integrate
/// profiles directly.
pub fn integrate_1d(a: f64, b: f64, order: usize, f: impl Fn(f64) -> f64) -> f64 {
    GaussLegendre::get(order).integrate(a, b, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::admissible_radius_function;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// ⨍_{|w−z|≤r} ln|w − a| dA, closed form.
    fn log_disk_mean(d: f64, r: f64) -> f64 {
        if d >= r {
            d.ln()
        } else {
            r.ln() - 0.5 + d * d / (2.0 * r * r)
        }
    }

    #[test]
    fn circle_average_examples() {
        let d = Domain::unit_disk();
        let f = |w: Complex64| (w - c(0.5, 0.0)).norm().ln();
        let v = circle_average(&f, &d, c(0.0, 0.0), 0.9, 256).unwrap();
        assert!((v.value - 0.9f64.ln()).abs() < 1e-12);
        let v = circle_average(&f, &d, c(0.0, 0.0), 0.3, 256).unwrap();
        assert!((v.value - 0.5f64.ln()).abs() < 1e-12);
        let h = |w: Complex64| w.re;
        let v = circle_average(&h, &d, c(0.2, -0.3), 0.5, 64).unwrap();
        assert!((v.value - 0.2).abs() < 1e-12);
        assert!(circle_average(&h, &d, c(0.5, 0.0), 0.6, 64).is_err());
        assert!(circle_average(&h, &d, c(0.0, 0.0), 0.5, 100).is_err());
    }

    #[test]
    fn circle_through_singularity() {
        // log singularity exactly on an on-grid node: half-step rule kicks in
        let f = |w: Complex64| (w - c(0.5, 0.0)).norm().ln();
        let v = circle_mean(&f, c(0.0, 0.0), 0.5, &QuadratureConfig::default());
        assert!(v.value.is_finite());
        assert!((v.value - 0.5f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn disk_average_examples() {
        let d = Domain::disk(c(0.0, 0.0), 2.0).unwrap();
        let f = |w: Complex64| w.norm().ln();
        let v = disk_average(&f, &d, c(0.0, 0.0), 1.0).unwrap();
        assert!((v.value + 0.5).abs() < 1e-9, "{}", v.value);
        let q = |w: Complex64| w.norm_sqr();
        let v = disk_average(&q, &d, c(0.0, 0.0), 1.0).unwrap();
        assert!((v.value - 0.5).abs() < 1e-12);
        let h = |w: Complex64| 3.0 * w.re - w.im + 1.0;
        let v = disk_average(&h, &d, c(0.1, 0.2), 0.7).unwrap();
        assert!((v.value - (0.3 - 0.2 + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn disk_mean_matches_closed_form_off_centre() {
        let a = c(0.3, 0.2);
        let f = |w: Complex64| (w - a).norm().ln();
        for (z, r) in [(c(0.0, 0.0), 1.0), (c(0.1, -0.1), 0.2), (c(-0.2, 0.0), 0.6)] {
            let d = (a - z).norm();
            let v = disk_mean(&f, z, r, &QuadratureConfig::default(), &[d]);
            // the trapezoid error near the kink radius decays like 1/n²
            assert!((v.value - log_disk_mean(d, r)).abs() < 1e-6, "{} vs {}", v.value, log_disk_mean(d, r));
        }
    }

    #[test]
    fn lens_integral_matches_closed_form() {
        let z = c(0.1, -0.2);
        for (d, r) in [(0.0, 1.0), (0.3, 1.0), (1.0, 1.0), (1.7, 1.0), (0.05, 0.06), (2.0, 0.1)] {
            let a = z + Complex64::from_polar(d, 0.4);
            let v = atom_disk_log_mean(a, z, r);
            assert!((v - log_disk_mean(d, r)).abs() < 1e-11, "d={d} r={r}: {v}");
        }
    }

    #[test]
    fn kernel_normalisation() {
        for k in [Kernel::bump(), Kernel::scaled_bump(0.5).unwrap()] {
            assert!((k.mass() - 1.0).abs() < 1e-10);
            assert_eq!(k.eval(1.0), 0.0);
            assert!(k.eval(0.999999) < 1e-100);
        }
        let k = Kernel::from_profile(1.0, |t| 7.0 * bump(t)).unwrap();
        assert!((k.mass() - 1.0).abs() < 1e-10);
        assert!((k.eval(0.3) - Kernel::bump().eval(0.3)).abs() < 1e-12);
        assert!(Kernel::scaled_bump(0.0).is_err());
    }

    #[test]
    fn smooth_average_examples() {
        let k = Kernel::bump();
        let cfg = QuadratureConfig::default();
        let h = |w: Complex64| 2.0 * w.re + w.im;
        let v = smooth_mean(&h, c(0.1, 0.1), 0.4, &k, &cfg);
        assert!((v.value - 0.3).abs() < 1e-10);
        let three = |_: Complex64| 3.0;
        assert!((smooth_mean(&three, c(0.0, 0.0), 0.4, &k, &cfg).value - 3.0).abs() < 1e-12);

        // f = ln|w|, z = 0, r̂ = 1: compare with a composite Simpson oracle
        let f = |w: Complex64| w.norm().ln();
        let v = smooth_mean(&f, c(0.0, 0.0), 1.0, &k, &cfg).value;
        let n = 200_000;
        let hh = 1.0 / n as f64;
        let g = |t: f64| if t == 0.0 { 0.0 } else { t.ln() * k.eval(t) * 2.0 * PI * t };
        let mut simpson = g(0.0) + g(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            simpson += w * g(i as f64 * hh);
        }
        simpson *= hh / 3.0;
        assert!(v < 0.0);
        assert!((v - simpson).abs() < 1e-8, "{v} vs {simpson}");
    }

    #[test]
    fn lower_bound_examples() {
        let o = c(0.0, 0.0);
        let chk = disk_average_lower_bound_check(&Charge::dirac(o), o, 1.0).unwrap();
        assert!((chk.value + 0.5).abs() < 1e-9 && (chk.bound + 0.5).abs() < 1e-15 && chk.pass);
        let e = std::f64::consts::E;
        let chk = disk_average_lower_bound_check(&Charge::dirac(o), o, e).unwrap();
        assert!((chk.value - 0.5).abs() < 1e-9 && (chk.bound - 0.5).abs() < 1e-12 && chk.pass);
        let far = c(0.8, 0.6);
        let chk = disk_average_lower_bound_check(&Charge::dirac(far), c(0.1, 0.0), 0.5).unwrap();
        assert!((chk.value - (far - c(0.1, 0.0)).norm().ln()).abs() < 1e-10);
        assert!(chk.pass);
        let half = Charge::dirac(o).scaled(0.5);
        assert!(disk_average_lower_bound_check(&half, o, 1.0).is_err());
    }

    #[test]
    fn chain_on_quadratic() {
        let d = Domain::unit_disk();
        let r = admissible_radius_function(&d, 0.5).unwrap();
        let k = Kernel::bump();
        let f = |w: Complex64| w.norm_sqr();
        for z in [c(0.0, 0.0), c(0.5, 0.2), c(-0.9, 0.0)] {
            let s = averaging_chain(&f, z, &r, &k, &QuadratureConfig::default());
            assert!(s.holds(1e-8), "{s:?}");
        }
    }
}
