//! Green functions, logarithmic potentials, Jensen potentials and the
//! validator for the test-function classes used by the balayage audit.
//!
//! Jensen potentials are generated from their measures: a smooth radial
//! probability density `μ` on a shell `s_lo ≤ |z − z₀| ≤ s_hi` gives
//!
//! ```text
//! V(z) = p_μ(z) − ln|z − z₀| = ∫_{s > |z−z₀|} ln(s / |z − z₀|) dF(s),
//! ```
//!
//! which vanishes outside the shell, is harmonic inside `|z − z₀| < s_lo`
//! except at `z₀`, and behaves like `−ln|z − z₀| + O(1)` at the base point.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, PolarGrid, SetSystem};
use crate::error::{invalid, Result};
use crate::field::{FieldRef, ScalarField};
use crate::measures::{sum_extended, Charge, DensityBlock};
use crate::quadrature::{circle_angles, GaussLegendre};

/// g_D(z, pole): +∞ at the pole.
pub fn green_function(domain: &Domain, z: Complex64, pole: Complex64) -> Result<f64> {
    domain.check_contains(z)?;
    domain.check_contains(pole)?;
    if z == pole {
        return Ok(f64::INFINITY);
    }
    let c = domain.center();
    let r_out = domain.outer_radius();
    if domain.is_disk() {
        let zeta = z - c;
        let w = pole - c;
        let num = Complex64::new(r_out * r_out, 0.0) - w.conj() * zeta;
        return Ok((num.norm() / (r_out * (zeta - w).norm())).ln());
    }
    let q = domain.inner_radius() / r_out;
    Ok(annulus_green(q, (z - c) / r_out, (pole - c) / r_out))
}

/// Green function of q < |ζ| < 1: the log kernel plus its harmonic
/// correction as a Laurent series, truncated when a term drops below 1e-12.
fn annulus_green(q: f64, zeta: Complex64, omega: Complex64) -> f64 {
    let r = zeta.norm();
    let rho = omega.norm();
    let psi = zeta.arg() - omega.arg();
    let mut g = -(zeta - omega).norm().ln() + (rho.ln() / q.ln()) * r.ln();
    let q2 = q * q;
    let (a1, a2) = (q2 / (rho * r), q2 * rho / r);
    let (b1, b2) = (q2 * r / rho, q2 * rho * r);
    let pr = rho * r;
    for n in 1..100_000 {
        let nf = n as f64;
        let denom = nf * (1.0 - q2.powi(n));
        let d_neg = (a2.powi(n) - a1.powi(n)) / denom; // D_n r^{-n}
        let d_pos = (b2.powi(n) - b1.powi(n)) / denom; // D_n r^{n}
        let c_pos = -pr.powi(n) / nf - d_pos; // C_n r^{n}
        let term = c_pos + d_neg;
        g += term * (nf * psi).cos();
        let bound = pr.powi(n).max(a1.powi(n)).max(b1.powi(n)) / nf;
        if bound < 1e-12 {
            break;
        }
    }
    g
}

/// p_μ(z) = ∫ ln|z − ζ| dμ(ζ); ±∞ at atoms of nonzero weight.
pub fn log_potential(charge: &Charge, z: Complex64) -> f64 {
    let terms: Vec<f64> = charge
        .point_masses()
        .filter(|&(_, m)| m != 0.0)
        .map(|(p, m)| m * (z - p).norm().ln())
        .collect();
    sum_extended(&terms).unwrap_or(f64::NAN)
}

/// Smooth radial bump on (−1, 1).
#[inline]
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Gauss–Legendre order used for exact-potential evaluation (per panel).
const SHELL_ORDER: usize = 48;
const SHELL_PANELS: usize = 4;

/// A mollified radial shell measure: planar density `c·bump(t)` where
/// `t = (s − mid)/half`, `s = |ζ − center|`, normalised to total mass 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    pub center: Complex64,
    pub s_lo: f64,
    pub s_hi: f64,
    norm: f64,
    mean_log: f64,
}

impl Shell {
    pub fn new(center: Complex64, s_lo: f64, s_hi: f64) -> Result<Shell> {
        if !(s_lo > 0.0 && s_hi > s_lo && s_hi.is_finite()) {
            return Err(invalid(
                "shell",
                format!("need 0 < s_lo < s_hi, got [{s_lo}, {s_hi}]"),
            ));
        }
        let mut sh = Shell {
            center,
            s_lo,
            s_hi,
            norm: 1.0,
            mean_log: 0.0,
        };
        let mass = sh.radial_integral(s_lo, |_| 1.0);
        sh.norm = 1.0 / mass;
        sh.mean_log = sh.radial_integral(s_lo, |s| s.ln());
        Ok(sh)
    }

    /// Planar density at radius `s`.
    pub fn density(&self, s: f64) -> f64 {
        let mid = 0.5 * (self.s_lo + self.s_hi);
        let half = 0.5 * (self.s_hi - self.s_lo);
        self.norm * bump((s - mid) / half)
    }

    /// ∫_{from}^{s_hi} f(s) dF(s) with dF = density(s)·2πs ds.
    fn radial_integral(&self, from: f64, f: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussLegendre::get(SHELL_ORDER);
        let a = from.max(self.s_lo);
        let w = (self.s_hi - a) / SHELL_PANELS as f64;
        (0..SHELL_PANELS)
            .map(|k| {
                let lo = a + w * k as f64;
                rule.integrate(lo, lo + w, |s| f(s) * self.density(s) * 2.0 * PI * s)
            })
            .sum()
    }

    /// ∫ ln s dF(s) = p_μ(center).
    pub fn mean_log(&self) -> f64 {
        self.mean_log
    }

    /// V(z) = p_μ(z) − ln|z − center|.
    pub fn potential(&self, z: Complex64) -> f64 {
        let d = (z - self.center).norm();
        if d >= self.s_hi {
            0.0
        } else if d <= self.s_lo {
            self.mean_log - d.ln()
        } else {
            self.radial_integral(d, |s| (s / d).ln())
        }
    }

    /// p_μ(z) = V(z) + ln|z − center| (the log potential of the shell).
    pub fn log_potential(&self, z: Complex64) -> f64 {
        let d = (z - self.center).norm();
        if d >= self.s_hi {
            d.ln()
        } else {
            self.potential(z) + d.ln()
        }
    }

    /// Discretisation of μ on a Gauss × trapezoid polar grid, renormalised to
    /// an exact probability.
    pub fn measure(&self, n_r: usize, n_theta: usize) -> Charge {
        let grid = PolarGrid::gauss(self.center, self.s_lo, self.s_hi, n_r, n_theta);
        let mut nodes = Vec::with_capacity(grid.len());
        let mut values = Vec::with_capacity(grid.len());
        let mut areas = Vec::with_capacity(grid.len());
        for (z, area) in grid.nodes() {
            nodes.push(z);
            values.push(self.density((z - self.center).norm()));
            areas.push(area);
        }
        let mass: f64 = values.iter().zip(&areas).map(|(v, a)| v * a).sum();
        for v in &mut values {
            *v /= mass;
        }
        Charge::zero(format!("shell[{}, {}]", self.s_lo, self.s_hi)).with_density(DensityBlock {
            nodes,
            values,
            areas,
        })
    }

    pub fn rotated(&self, about: Complex64, angle: f64) -> Shell {
        let rot = Complex64::from_polar(1.0, angle);
        Shell {
            center: about + rot * (self.center - about),
            ..*self
        }
    }
}

/// Class metadata of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMeta {
    pub compactly_supported: bool,
    pub smooth: bool,
    pub support_radius: Option<f64>,
}

/// Reproducible description of a generated test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum TestDescriptor {
    Shell {
        center: crate::domain::Point,
        s_lo: f64,
        s_hi: f64,
        scale: f64,
    },
    Green {
        pole: crate::domain::Point,
        scale: f64,
    },
    Custom,
}

/// An evaluable test function v on D ∖ S.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub id: String,
    pub field: FieldRef,
    pub meta: ClassMeta,
    pub descriptor: TestDescriptor,
}

impl TestFunction {
    pub fn custom(id: impl Into<String>, field: FieldRef, meta: ClassMeta) -> TestFunction {
        TestFunction {
            id: id.into(),
            field,
            meta,
            descriptor: TestDescriptor::Custom,
        }
    }

    /// `scale · g_D(·, pole)`: superharmonic-free (harmonic off the pole),
    /// not compactly supported.
    pub fn green(domain: &Domain, pole: Complex64, scale: f64) -> TestFunction {
        let d = *domain;
        TestFunction {
            id: format!("green(scale={scale})"),
            field: FieldRef::new(move |z: Complex64| {
                scale * green_function(&d, z, pole).unwrap_or(0.0)
            }),
            meta: ClassMeta {
                compactly_supported: false,
                smooth: true,
                support_radius: None,
            },
            descriptor: TestDescriptor::Green {
                pole: pole.into(),
                scale,
            },
        }
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        self.field.eval(z)
    }

    /// (factor · v) with the descriptor updated.
    pub fn scaled(&self, factor: f64) -> TestFunction {
        let descriptor = match &self.descriptor {
            TestDescriptor::Shell {
                center,
                s_lo,
                s_hi,
                scale,
            } => TestDescriptor::Shell {
                center: *center,
                s_lo: *s_lo,
                s_hi: *s_hi,
                scale: scale * factor,
            },
            TestDescriptor::Green { pole, scale } => TestDescriptor::Green {
                pole: *pole,
                scale: scale * factor,
            },
            TestDescriptor::Custom => TestDescriptor::Custom,
        };
        TestFunction {
            id: format!("{factor}·{}", self.id),
            field: self.field.scale(factor),
            meta: self.meta,
            descriptor,
        }
    }
}

impl ScalarField for TestFunction {
    fn eval(&self, z: Complex64) -> f64 {
        self.field.eval(z)
    }
}

/// A Jensen potential together with its measure.
#[derive(Debug, Clone)]
pub struct JensenPotential {
    pub test: TestFunction,
    pub shell: Shell,
    /// Radius of U₀ (V is harmonic on U₀ ∖ {z₀}).
    pub harmonic_radius: f64,
}

impl JensenPotential {
    pub fn from_shell(shell: Shell) -> JensenPotential {
        let sh = Arc::new(shell);
        let f = sh.clone();
        JensenPotential {
            test: TestFunction {
                id: format!("jensen[{:.6}, {:.6}]", shell.s_lo, shell.s_hi),
                field: FieldRef::new(move |z: Complex64| f.potential(z)),
                meta: ClassMeta {
                    compactly_supported: true,
                    smooth: true,
                    support_radius: Some(shell.s_hi),
                },
                descriptor: TestDescriptor::Shell {
                    center: shell.center.into(),
                    s_lo: shell.s_lo,
                    s_hi: shell.s_hi,
                    scale: 1.0,
                },
            },
            shell,
            harmonic_radius: shell.s_lo,
        }
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        self.shell.potential(z)
    }

    /// μ_V at the default discretisation.
    pub fn measure(&self) -> Charge {
        self.shell.measure(64, 256)
    }
}

/// Room available for shells: (U₀ radius, dist(z₀, ∂D)).
fn shell_room(domain: &Domain, center: Complex64, u0_radius: f64) -> Result<f64> {
    let avail = domain.dist_to_boundary(center);
    if !(u0_radius > 0.0 && u0_radius < avail) {
        return Err(invalid(
            "u0_radius",
            format!("no room for a support shell: U₀ radius {u0_radius}, boundary at {avail}"),
        ));
    }
    Ok(avail)
}

/// `count` random shells in U₀ᶜ, deterministic in `seed`.
pub fn jensen_potential_family(
    domain: &Domain,
    system: &SetSystem,
    u0_radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<JensenPotential>> {
    if count == 0 {
        return Err(invalid("count", "family needs at least one member"));
    }
    if !(u0_radius > system.s0_radius) {
        return Err(invalid(
            "u0_radius",
            format!("S₀ (radius {}) must lie strictly inside U₀", system.s0_radius),
        ));
    }
    let avail = shell_room(domain, system.center, u0_radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lo = u0_radius + (avail - u0_radius) * rng.gen_range(0.0..0.9);
            let hi = lo + (avail - lo) * rng.gen_range(0.05..0.95);
            Shell::new(system.center, lo, hi).map(JensenPotential::from_shell)
        })
        .collect()
}

/// Shells [R − 2η_j, R − η_j] with η_j = (R − u₀)/2 · 2^{-j}, j = 0..=depth,
/// reaching towards the boundary.
pub fn boundary_ladder_family(
    domain: &Domain,
    system: &SetSystem,
    u0_radius: f64,
    depth: usize,
) -> Result<Vec<JensenPotential>> {
    let avail = shell_room(domain, system.center, u0_radius)?;
    (0..=depth)
        .map(|j| {
            let eta = 0.5 * (avail - u0_radius) * 0.5f64.powi(j as i32);
            Shell::new(system.center, avail - 2.0 * eta, avail - eta).map(JensenPotential::from_shell)
        })
        .collect()
}

/// Ladder depth whose innermost gap is below `gap` (relative to the room).
pub fn ladder_depth_for_gap(domain: &Domain, system: &SetSystem, u0_radius: f64, gap: f64) -> usize {
    let avail = domain.dist_to_boundary(system.center);
    let span = 0.5 * (avail - u0_radius);
    if gap <= 0.0 || span <= 0.0 {
        return 0;
    }
    let mut j = 0usize;
    while span * 0.5f64.powi(j as i32) > gap && j < 60 {
        j += 1;
    }
    j
}

/// Outcome of [`validate_test_function`].
#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub id: String,
    /// Condition 1: v → 0 at ∂D.
    pub boundary_limit_zero: bool,
    /// max |v| over the collar at distance ≤ ε_k, k = 1..
    #[serde(with = "crate::report::real_vec")]
    pub collar_max: Vec<f64>,
    /// Condition 2: v ≥ 0 outside a compact subset of D.
    pub nonnegative_outside_compact: bool,
    /// Smallest boundary distance among nodes where v < 0.
    #[serde(with = "crate::report::real_opt")]
    pub negative_outer_distance: Option<f64>,
    /// Condition 3: sup over S₀ ∖ S of |v| ≤ b.
    #[serde(with = "crate::report::real")]
    pub sup_ring: f64,
    #[serde(with = "crate::report::real")]
    pub b: f64,
    pub sup_bound_ok: bool,
    pub compactly_supported: bool,
    pub smooth: bool,
    /// Always true: validation runs on a finite node set.
    pub finite_sample: bool,
}

impl ClassReport {
    pub fn passes(&self) -> bool {
        self.boundary_limit_zero && self.nonnegative_outside_compact && self.sup_bound_ok
    }
}

/// Collar levels ε_k = 2^{-k} · dist(S₀, ∂D).
pub const COLLAR_LEVELS: usize = 16;
/// Threshold m_K < tol for the boundary-limit surrogate.
pub const COLLAR_TOL: f64 = 1e-3;
const NEG_TOL: f64 = 1e-12;

pub fn validate_test_function(v: &TestFunction, system: &SetSystem, domain: &Domain) -> ClassReport {
    let margin = system.margins.1;
    let mut collar_max = Vec::with_capacity(COLLAR_LEVELS);
    let mut collar_negative = false;
    let mut neg_dist: Option<f64> = None;
    let note_negative = |z: Complex64, val: f64, nd: &mut Option<f64>| {
        if val < -NEG_TOL {
            let d = domain.dist_to_boundary(z);
            *nd = Some(nd.map_or(d, |x: f64| x.min(d)));
        }
    };
    for k in 1..=COLLAR_LEVELS {
        let eps = margin * 0.5f64.powi(k as i32);
        let mut m: f64 = 0.0;
        for (c, r) in domain.boundary_circles() {
            let inward = if r == domain.outer_radius() { -1.0 } else { 1.0 };
            for t in [1.0, 0.5, 0.1] {
                let rr = r + inward * eps * t;
                for a in circle_angles(64, true) {
                    let z = c + Complex64::from_polar(rr, a);
                    if !domain.contains(z) || system.in_s(z) {
                        continue;
                    }
                    let val = v.eval(z);
                    m = m.max(val.abs());
                    if val < -NEG_TOL {
                        collar_negative = true;
                    }
                    note_negative(z, val, &mut neg_dist);
                }
            }
        }
        collar_max.push(m);
    }
    let monotone = collar_max.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let boundary_limit_zero = monotone && collar_max.last().is_some_and(|&m| m < COLLAR_TOL);

    // interior validation grid over D ∖ S
    let c = domain.center();
    let (lo, hi) = (domain.inner_radius(), domain.outer_radius());
    for i in 0..48 {
        let r = lo + (hi - lo) * (i as f64 + 0.5) / 48.0;
        for a in circle_angles(96, false) {
            let z = c + Complex64::from_polar(r, a);
            if !domain.contains(z) || system.in_s(z) {
                continue;
            }
            note_negative(z, v.eval(z), &mut neg_dist);
        }
    }
    let nonnegative_outside_compact =
        !collar_negative && neg_dist.is_none_or(|d| d >= 0.5 * margin);

    let mut sup_ring: f64 = 0.0;
    for i in 0..=32 {
        // t = 0 is the inner circle, approached from outside S
        let r = system.s_radius + (system.s0_radius - system.s_radius) * i as f64 / 32.0;
        let r = if i == 0 { r * (1.0 + 1e-15) } else { r };
        for a in circle_angles(128, false) {
            let z = system.center + Complex64::from_polar(r, a);
            if domain.contains(z) {
                sup_ring = sup_ring.max(v.eval(z).abs());
            }
        }
    }
    let sup_bound_ok = sup_ring <= system.b * (1.0 + 1e-9) + 1e-12;

    ClassReport {
        id: v.id.clone(),
        boundary_limit_zero,
        collar_max,
        nonnegative_outside_compact,
        negative_outer_distance: neg_dist,
        sup_ring,
        b: system.b,
        sup_bound_ok,
        compactly_supported: v.meta.compactly_supported,
        smooth: v.meta.smooth,
        finite_sample: true,
    }
}

/// Maximum of `f` over the closed ring S₀ ∖ S sampled on its two circles.
pub(crate) fn ring_boundary_max(system: &SetSystem, f: impl Fn(Complex64) -> f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for r in [system.s_radius, system.s0_radius] {
        for a in circle_angles(512, false) {
            m = m.max(f(system.center + Complex64::from_polar(r, a)));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::nested_set_system;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn green_disk_closed_forms() {
        let d = Domain::unit_disk();
        let o = c(0.0, 0.0);
        assert!((green_function(&d, c(0.5, 0.0), o).unwrap() - 2f64.ln()).abs() < 1e-15);
        let g = green_function(&d, c(1.0 - 1e-6, 0.0), o).unwrap();
        assert!((g - 1e-6).abs() < 1e-11);
        assert_eq!(green_function(&d, o, o).unwrap(), f64::INFINITY);
        assert!(green_function(&d, c(1.5, 0.0), o).is_err());
        let d2 = Domain::disk(o, 2.0).unwrap();
        assert!((green_function(&d2, c(1.0, 0.0), o).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn green_disk_rotation_invariant() {
        let d = Domain::unit_disk();
        let z = c(0.3, 0.4);
        for k in 0..16 {
            let rot = Complex64::from_polar(1.0, k as f64 * 0.7);
            let a = green_function(&d, z, c(0.0, 0.0)).unwrap();
            let b = green_function(&d, rot * z, c(0.0, 0.0)).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn green_disk_general_pole_symmetric() {
        let d = Domain::disk(c(0.2, -0.1), 1.5).unwrap();
        let (z, w) = (c(0.7, 0.3), c(-0.4, 0.5));
        let a = green_function(&d, z, w).unwrap();
        let b = green_function(&d, w, z).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn annulus_green_boundary_symmetry_harmonicity() {
        let d = Domain::annulus(c(0.0, 0.0), 0.2, 1.0).unwrap();
        let w = c(0.6, 0.0);
        for a in circle_angles(32, true) {
            for r in [0.2 * (1.0 + 1e-12), 1.0 - 1e-12] {
                let g = green_function(&d, Complex64::from_polar(r, a), w).unwrap();
                assert!(g.abs() < 1e-9, "boundary value {g} at r={r}");
            }
        }
        let (z1, z2) = (c(-0.3, 0.4), c(0.5, -0.5));
        let g12 = green_function(&d, z1, z2).unwrap();
        let g21 = green_function(&d, z2, z1).unwrap();
        assert!((g12 - g21).abs() < 1e-10);
        assert!(g12 > 0.0);
        let h = 1e-3;
        let z = c(-0.5, 0.2);
        let f = |z: Complex64| green_function(&d, z, w).unwrap();
        let lap = f(z + h) + f(z - h) + f(z + c(0.0, h)) + f(z - c(0.0, h)) - 4.0 * f(z);
        assert!((lap / (h * h)).abs() < 1e-4);
    }

    #[test]
    fn log_potential_examples() {
        let o = c(0.0, 0.0);
        let d0 = Charge::dirac(o);
        assert!((log_potential(&d0, c(std::f64::consts::E, 0.0)) - 1.0).abs() < 1e-15);
        assert_eq!(log_potential(&d0, o), f64::NEG_INFINITY);
        let circ = Charge::uniform_circle(o, 0.5, 256);
        assert!((log_potential(&circ, o) - 0.5f64.ln()).abs() < 1e-14);
        // circle-mean identity ln max(|z|, 0.5)
        for z in [c(0.2, 0.1), c(0.9, 0.0), c(-0.3, 1.2)] {
            let oracle = z.norm().max(0.5).ln();
            assert!((log_potential(&circ, z) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn shell_values() {
        let sh = Shell::new(c(0.0, 0.0), 0.899, 0.901).unwrap();
        assert!((sh.measure(64, 64).mass() - 1.0).abs() < 1e-14);
        let v = sh.potential(c(0.5, 0.0));
        assert!((v - (0.9f64 / 0.5).ln()).abs() < 1e-6, "{v}");
        assert_eq!(sh.potential(c(0.95, 0.0)), 0.0);
        let z = c(1e-6, 0.0);
        assert!((sh.potential(z) + z.norm().ln() - 0.9f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn shell_potential_continuous_across_support() {
        let sh = Shell::new(c(0.0, 0.0), 0.6, 0.9).unwrap();
        for s in [0.6, 0.9] {
            let a = sh.potential(c(s * (1.0 - 1e-9), 0.0));
            let b = sh.potential(c(s * (1.0 + 1e-9), 0.0));
            assert!((a - b).abs() < 1e-8);
        }
        // p_μ agrees with the discretised measure away from the support
        let mu = sh.measure(64, 256);
        for z in [c(0.1, 0.2), c(0.95, 0.1)] {
            assert!((sh.log_potential(z) - log_potential(&mu, z)).abs() < 1e-10);
        }
    }

    #[test]
    fn validator_examples() {
        let d = Domain::unit_disk();
        let sys = nested_set_system(&d, 0.25, 0.5, 4f64.ln()).unwrap();
        let g = TestFunction::green(&d, c(0.0, 0.0), 1.0);
        let rep = validate_test_function(&g, &sys, &d);
        assert!(rep.boundary_limit_zero, "{:?}", rep.collar_max);
        assert!(rep.nonnegative_outside_compact);
        assert!(rep.sup_bound_ok, "sup {}", rep.sup_ring);
        assert!((rep.sup_ring - 4f64.ln()).abs() < 1e-9);

        let one = TestFunction::custom(
            "one",
            FieldRef::constant(1.0),
            ClassMeta {
                compactly_supported: false,
                smooth: true,
                support_radius: None,
            },
        );
        assert!(!validate_test_function(&one, &sys, &d).boundary_limit_zero);

        let neg = g.scaled(-1.0);
        let rep = validate_test_function(&neg, &sys, &d);
        assert!(!rep.nonnegative_outside_compact);
    }

    #[test]
    fn family_is_deterministic_and_valid() {
        let d = Domain::unit_disk();
        let sys = nested_set_system(&d, 0.25, 0.5, 4f64.ln()).unwrap();
        let a = jensen_potential_family(&d, &sys, 0.75, 8, 11).unwrap();
        let b = jensen_potential_family(&d, &sys, 0.75, 8, 11).unwrap();
        assert_eq!(
            a.iter().map(|j| j.test.descriptor.clone()).collect::<Vec<_>>(),
            b.iter().map(|j| j.test.descriptor.clone()).collect::<Vec<_>>()
        );
        for j in &a {
            assert!(j.shell.s_lo >= 0.75 && j.shell.s_hi < 1.0);
            assert!(validate_test_function(&j.test, &sys, &d).passes());
        }
        assert!(jensen_potential_family(&d, &sys, 0.4, 3, 0).is_err());
        assert!(jensen_potential_family(&d, &sys, 1.0, 3, 0).is_err());
    }
}
