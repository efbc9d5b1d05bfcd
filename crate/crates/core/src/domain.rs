//! Admissible domains (disks and annuli), nested set systems, radius
//! functions and grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{circle_angles, GaussLegendre};

/// A point in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub re: f64,
    pub im: f64,
}

impl From<Point> for Complex64 {
    fn from(p: Point) -> Self {
        Complex64::new(p.re, p.im)
    }
}

impl From<Complex64> for Point {
    fn from(z: Complex64) -> Self {
        Point { re: z.re, im: z.im }
    }
}

impl Default for Point {
    fn default() -> Self {
        Point { re: 0.0, im: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    UnitDisk,
    Disk {
        #[serde(default)]
        center: Point,
        radius: f64,
    },
    Annulus {
        #[serde(default)]
        center: Point,
        r_in: f64,
        r_out: f64,
    },
}

/// A disk or an annulus. Both have non-polar boundary, so a Green function
/// exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainKind", into = "DomainKind")]
pub struct Domain {
    kind: DomainKind,
    center: Complex64,
    inner: f64,
    outer: f64,
}

impl TryFrom<DomainKind> for Domain {
    type Error = Error;
    fn try_from(kind: DomainKind) -> Result<Self> {
        make_domain(kind)
    }
}

impl From<Domain> for DomainKind {
    fn from(d: Domain) -> Self {
        d.kind
    }
}

pub fn make_domain(kind: DomainKind) -> Result<Domain> {
    let finite = |x: f64| x.is_finite();
    match kind {
        DomainKind::UnitDisk => Ok(Domain {
            kind,
            center: Complex64::new(0.0, 0.0),
            inner: 0.0,
            outer: 1.0,
        }),
        DomainKind::Disk { center, radius } => {
            if !(finite(radius) && radius > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "disk radius must be positive, got {radius}"
                )));
            }
            Ok(Domain {
                kind,
                center: center.into(),
                inner: 0.0,
                outer: radius,
            })
        }
        DomainKind::Annulus {
            center,
            r_in,
            r_out,
        } => {
            if !(finite(r_in) && finite(r_out) && r_in > 0.0 && r_in < r_out) {
                return Err(Error::InvalidDomain(format!(
                    "annulus needs 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}"
                )));
            }
            Ok(Domain {
                kind,
                center: center.into(),
                inner: r_in,
                outer: r_out,
            })
        }
    }
}

impl Domain {
    pub fn unit_disk() -> Self {
        make_domain(DomainKind::UnitDisk).expect("unit disk is valid")
    }

    pub fn disk(center: Complex64, radius: f64) -> Result<Self> {
        make_domain(DomainKind::Disk {
            center: center.into(),
            radius,
        })
    }

    pub fn annulus(center: Complex64, r_in: f64, r_out: f64) -> Result<Self> {
        make_domain(DomainKind::Annulus {
            center: center.into(),
            r_in,
            r_out,
        })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn is_disk(&self) -> bool {
        self.inner == 0.0
    }

    pub fn is_unit_disk(&self) -> bool {
        self.is_disk() && self.outer == 1.0 && self.center == Complex64::new(0.0, 0.0)
    }

    /// Number of boundary components.
    pub fn connectivity(&self) -> usize {
        if self.is_disk() {
            1
        } else {
            2
        }
    }

    /// Always false for disks and annuli.
    pub fn boundary_polar(&self) -> bool {
        false
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    /// Default base point: the centre of a disk, the point on the positive
    /// real ray halfway between the circles of an annulus.
    pub fn base_point(&self) -> Complex64 {
        if self.is_disk() {
            self.center
        } else {
            self.center + Complex64::new(0.5 * (self.inner + self.outer), 0.0)
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn dist_to_boundary(&self, z: Complex64) -> f64 {
        let rho = (z - self.center).norm();
        if self.is_disk() {
            self.outer - rho
        } else {
            (rho - self.inner).min(self.outer - rho)
        }
    }

    /// A smooth minorant of the boundary distance, positive inside.
    pub fn smooth_dist(&self, z: Complex64) -> f64 {
        let rho = (z - self.center).norm();
        if self.is_disk() {
            (self.outer * self.outer - rho * rho) / (2.0 * self.outer)
        } else {
            (rho - self.inner) * (self.outer - rho) / (self.outer - self.inner)
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re.is_finite() && z.im.is_finite() && self.dist_to_boundary(z) > 0.0
    }

    /// Closed disk D̄(c, r) ⊂ D.
    pub fn contains_closed_disk(&self, c: Complex64, r: f64) -> bool {
        self.contains(c) && self.dist_to_boundary(c) > r
    }

    /// Boundary circles as (centre, radius).
    pub fn boundary_circles(&self) -> Vec<(Complex64, f64)> {
        if self.is_disk() {
            vec![(self.center, self.outer)]
        } else {
            vec![(self.center, self.inner), (self.center, self.outer)]
        }
    }

    pub fn check_contains(&self, z: Complex64) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { z })
        }
    }
}

/// S = D̄(c, s_radius) ⊂ Int S₀, S₀ = D̄(c, s0_radius) ⊂ D, with bound b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetSystem {
    pub center: Complex64,
    pub s_radius: f64,
    pub s0_radius: f64,
    pub b: f64,
    /// (s0_radius − s_radius, dist(S₀, ∂D)).
    pub margins: (f64, f64),
}

/// Concentric system around the domain's base point.
pub fn nested_set_system(domain: &Domain, s_radius: f64, s0_radius: f64, b: f64) -> Result<SetSystem> {
    SetSystem::centered(domain, domain.base_point(), s_radius, s0_radius, b)
}

impl SetSystem {
    pub fn centered(
        domain: &Domain,
        center: Complex64,
        s_radius: f64,
        s0_radius: f64,
        b: f64,
    ) -> Result<SetSystem> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Nesting(format!("b must be positive, got {b}")));
        }
        if !(s_radius.is_finite() && s_radius > 0.0) {
            return Err(Error::Nesting(format!(
                "S must have nonempty interior, got radius {s_radius}"
            )));
        }
        if !(s0_radius > s_radius) {
            return Err(Error::Nesting(format!(
                "clos S ⊄ Int S₀: s_radius={s_radius} ≥ s0_radius={s0_radius}"
            )));
        }
        if !domain.contains(center) {
            return Err(Error::Nesting(format!("centre {center} outside the domain")));
        }
        let outer_margin = domain.dist_to_boundary(center) - s0_radius;
        if !(outer_margin > 0.0) {
            return Err(Error::Nesting(format!(
                "clos S₀ ⊄ D: s0_radius={s0_radius} leaves margin {outer_margin}"
            )));
        }
        Ok(SetSystem {
            center,
            s_radius,
            s0_radius,
            b,
            margins: (s0_radius - s_radius, outer_margin),
        })
    }

    /// z ∈ S (closed).
    pub fn in_s(&self, z: Complex64) -> bool {
        (z - self.center).norm() <= self.s_radius
    }

    /// z ∈ S₀ ∖ S.
    pub fn in_ring(&self, z: Complex64) -> bool {
        let d = (z - self.center).norm();
        d > self.s_radius && d <= self.s0_radius
    }

    pub fn with_b(&self, b: f64) -> SetSystem {
        SetSystem { b, ..*self }
    }
}

/// r(z) = factor · dist(z, ∂D), or the smooth variant
/// r̂(z) = factor · (1 − damping) · smooth_dist(z) ≤ r(z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusFunction {
    pub domain: Domain,
    pub factor: f64,
    pub smooth: bool,
    pub damping: f64,
}

pub fn admissible_radius_function(domain: &Domain, shrink_factor: f64) -> Result<RadiusFunction> {
    if !(shrink_factor > 0.0 && shrink_factor < 1.0) {
        return Err(invalid(
            "shrink_factor",
            format!("must lie in (0, 1), got {shrink_factor}"),
        ));
    }
    Ok(RadiusFunction {
        domain: *domain,
        factor: shrink_factor,
        smooth: false,
        damping: 0.0,
    })
}

/// Relative damping applied to the smooth minorant r̂.
pub const SMOOTH_RADIUS_DAMPING: f64 = 1e-3;

impl RadiusFunction {
    pub fn eval(&self, z: Complex64) -> f64 {
        if self.smooth {
            self.factor * (1.0 - self.damping) * self.domain.smooth_dist(z)
        } else {
            self.factor * self.domain.dist_to_boundary(z)
        }
    }

    /// Smooth pointwise minorant r̂ ≤ r.
    pub fn smoothed(&self) -> RadiusFunction {
        RadiusFunction {
            smooth: true,
            damping: SMOOTH_RADIUS_DAMPING,
            ..*self
        }
    }

    pub fn shrunk(&self, by: f64) -> RadiusFunction {
        RadiusFunction {
            factor: self.factor * by,
            ..*self
        }
    }
}

/// Uniform Cartesian lattice restricted to the domain.
#[derive(Debug, Clone)]
pub struct Grid {
    pub domain: Domain,
    pub h: f64,
    origin: Complex64,
    nx: usize,
    ny: usize,
    /// lattice index → node index
    index: Vec<Option<usize>>,
    nodes: Vec<GridNode>,
    pub exclusions: Vec<(Complex64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct GridNode {
    pub z: Complex64,
    pub i: usize,
    pub j: usize,
}

impl Grid {
    /// `n × n` lattice over the bounding square of the outer circle.
    pub fn square(domain: &Domain, n: usize) -> Result<Grid> {
        if n < 3 {
            return Err(Error::GridTooCoarse(format!(
                "need at least 3 nodes per direction, got {n}"
            )));
        }
        let r = domain.outer_radius();
        let h = 2.0 * r / (n - 1) as f64;
        Self::build(domain, h, n, n)
    }

    /// Lattice with spacing `h`.
    pub fn with_spacing(domain: &Domain, h: f64) -> Result<Grid> {
        if !(h > 0.0) {
            return Err(invalid("h", "grid spacing must be positive"));
        }
        let r = domain.outer_radius();
        let n = (2.0 * r / h).floor() as usize + 1;
        if n < 3 {
            return Err(Error::GridTooCoarse(format!(
                "spacing {h} gives {n} nodes per direction"
            )));
        }
        Self::build(domain, h, n, n)
    }

    fn build(domain: &Domain, h: f64, nx: usize, ny: usize) -> Result<Grid> {
        let r = domain.outer_radius();
        let extent = h * (nx - 1) as f64;
        let origin = domain.center() - Complex64::new(0.5 * extent, 0.5 * extent);
        debug_assert!(extent <= 2.0 * r + 1e-12);
        let mut index = vec![None; nx * ny];
        let mut nodes = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let z = origin + Complex64::new(i as f64 * h, j as f64 * h);
                if domain.contains(z) {
                    index[j * nx + i] = Some(nodes.len());
                    nodes.push(GridNode { z, i, j });
                }
            }
        }
        Ok(Grid {
            domain: *domain,
            h,
            origin,
            nx,
            ny,
            index,
            nodes,
            exclusions: Vec::new(),
        })
    }

    /// Drops nodes within `radius` of any of `points`.
    pub fn excluding(mut self, points: &[Complex64], radius: f64) -> Grid {
        self.exclusions
            .extend(points.iter().map(|&p| (p, radius)));
        self
    }

    pub fn is_excluded(&self, z: Complex64) -> bool {
        self.exclusions.iter().any(|&(p, r)| (z - p).norm() < r)
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn origin(&self) -> Complex64 {
        self.origin
    }

    /// Position in [`Grid::nodes`] of lattice node (i, j), if it lies in D.
    pub fn index_of(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        self.index[j as usize * self.nx + i as usize]
    }

    pub fn node_at(&self, i: isize, j: isize) -> Option<&GridNode> {
        self.index_of(i, j).map(|k| &self.nodes[k])
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }
}

/// A tensor polar grid used for radial densities and sweeps: Gauss–Legendre
/// (or prescribed) radii × trapezoid angles.
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub center: Complex64,
    pub radii: Vec<f64>,
    /// Radial quadrature weight per ring (the `dr` part, in units of r).
    pub radial_weights: Vec<f64>,
    pub n_theta: usize,
    pub half_step: bool,
}

impl PolarGrid {
    pub fn gauss(center: Complex64, r_lo: f64, r_hi: f64, n_r: usize, n_theta: usize) -> PolarGrid {
        let rule = GaussLegendre::get(n_r);
        let (radii, radial_weights) = rule.mapped(r_lo, r_hi).unzip();
        PolarGrid {
            center,
            radii,
            radial_weights,
            n_theta,
            half_step: false,
        }
    }

    /// Iterates (node, area) where area = r · dr · dθ.
    pub fn nodes(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        let dtheta = 2.0 * PI / self.n_theta as f64;
        self.radii
            .iter()
            .zip(&self.radial_weights)
            .flat_map(move |(&r, &w)| {
                circle_angles(self.n_theta, self.half_step)
                    .map(move |t| (self.center + Complex64::from_polar(r, t), r * w * dtheta))
            })
    }

    pub fn len(&self) -> usize {
        self.radii.len() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Sweep nodes approaching every boundary component: interior rings plus
/// rings at distance `margin · 2^-j`, j = 1..=depth, from each boundary circle.
pub fn boundary_sweep(domain: &Domain, interior_rings: usize, depth: usize, n_theta: usize) -> Vec<Complex64> {
    let c = domain.center();
    let (lo, hi) = (domain.inner_radius(), domain.outer_radius());
    let mut radii = Vec::new();
    for k in 0..interior_rings {
        let t = (k as f64 + 0.5) / interior_rings as f64;
        radii.push(lo + (hi - lo) * t);
    }
    let span = hi - lo;
    for j in 1..=depth {
        let eps = span * 0.5f64.powi(j as i32 + 1);
        radii.push(hi - eps);
        if !domain.is_disk() {
            radii.push(lo + eps);
        }
    }
    if domain.is_disk() {
        radii.push(0.0);
    }
    radii.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    radii.dedup();
    let mut out = Vec::new();
    for r in radii {
        if r == 0.0 {
            out.push(c);
            continue;
        }
        out.extend(circle_angles(n_theta, true).map(|t| c + Complex64::from_polar(r, t)));
    }
    out.retain(|&z| domain.contains(z));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn domain_kinds_and_connectivity() {
        let d = make_domain(DomainKind::Disk {
            center: Point::default(),
            radius: 1.0,
        })
        .unwrap();
        assert_eq!(d.connectivity(), 1);
        assert!(d.is_unit_disk());
        let a = Domain::annulus(c(0.0, 0.0), 0.2, 1.0).unwrap();
        assert_eq!(a.connectivity(), 2);
        assert_eq!(a.boundary_circles().len(), a.connectivity());
        assert!(!a.boundary_polar());
        assert!(Domain::annulus(c(0.0, 0.0), 1.0, 0.2).is_err());
        assert!(Domain::disk(c(0.0, 0.0), 0.0).is_err());
        assert!(Domain::disk(c(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn set_system_nesting() {
        let d = Domain::unit_disk();
        let s = nested_set_system(&d, 0.25, 0.5, 1.0).unwrap();
        assert!((s.margins.0 - 0.25).abs() < 1e-15);
        assert!((s.margins.1 - 0.5).abs() < 1e-15);
        assert!(nested_set_system(&d, 0.5, 0.25, 1.0).is_err());
        assert!(nested_set_system(&d, 0.25, 0.5, 0.0).is_err());
        assert!(nested_set_system(&d, 0.25, 1.0, 1.0).is_err());

        let a = Domain::annulus(c(0.0, 0.0), 0.2, 1.0).unwrap();
        assert_eq!(a.base_point(), c(0.6, 0.0));
        let s = SetSystem::centered(&a, c(0.6, 0.0), 0.05, 0.1, 2.0).unwrap();
        // S₀ = D̄(0.6, 0.1) sits inside 0.2 < |z| < 1 with margin 0.3
        assert!((s.margins.1 - 0.3).abs() < 1e-12);
        for t in circle_angles(64, false) {
            let z = c(0.6, 0.0) + Complex64::from_polar(0.1, t);
            assert!(a.contains(z));
        }
    }

    #[test]
    fn radius_function_values() {
        let d = Domain::unit_disk();
        let r = admissible_radius_function(&d, 0.5).unwrap();
        assert!((r.eval(c(0.0, 0.0)) - 0.5).abs() < 1e-15);
        assert!((r.eval(c(0.8, 0.0)) - 0.1).abs() < 1e-15);
        let a = Domain::annulus(c(0.0, 0.0), 0.2, 1.0).unwrap();
        let ra = admissible_radius_function(&a, 0.5).unwrap();
        assert!((ra.eval(c(0.6, 0.0)) - 0.2).abs() < 1e-15);
        assert!(admissible_radius_function(&d, 1.0).is_err());
        assert!(admissible_radius_function(&d, 0.0).is_err());
    }

    #[test]
    fn smoothed_radius_is_minorant() {
        for d in [Domain::unit_disk(), Domain::annulus(c(0.0, 0.0), 0.2, 1.0).unwrap()] {
            let r = admissible_radius_function(&d, 0.7).unwrap();
            let rh = r.smoothed();
            for z in boundary_sweep(&d, 8, 10, 32) {
                assert!(rh.eval(z) <= r.eval(z));
                assert!(rh.eval(z) > 0.0);
            }
        }
    }

    #[test]
    fn grid_nodes_inside() {
        let d = Domain::unit_disk();
        let g = Grid::with_spacing(&d, 0.05).unwrap();
        assert!(g.nodes().iter().all(|n| d.contains(n.z)));
        assert!(Grid::square(&d, 2).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let a = Domain::annulus(c(0.1, -0.2), 0.2, 1.0).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let back: Domain = serde_json::from_str(&s).unwrap();
        assert_eq!(a, back);
        let bad = r#"{"kind":"annulus","r_in":1.0,"r_out":0.2}"#;
        assert!(serde_json::from_str::<Domain>(bad).is_err());
        let u: Domain = serde_json::from_str(r#"{"kind":"unit_disk"}"#).unwrap();
        assert!(u.is_unit_disk());
    }
}
