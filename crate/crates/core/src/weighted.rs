//! Weights M = M₊ − M₋, Blaschke-type products, membership in Hol(D, M),
//! the dominated subharmonic construction and the end-to-end classifier.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{circle_mean, QuadratureConfig};
use crate::balayage::{
    balayage_audit_adaptive, rescale_class_bound, BalayageReport, ClassBound, Nu, Verdict, VerdictRule,
};
use crate::domain::{admissible_radius_function, nested_set_system, Domain, Grid, Point, RadiusFunction, SetSystem};
use crate::error::{invalid, Error, Result};
use crate::field::{FieldRef, ScalarField};
use crate::measures::{pairwise_sum, riesz_measure_numeric, Atom, Charge, DensityBlock, ZeroSequence};
use crate::potentials::{
    boundary_ladder_family, green_function, jensen_potential_family, ladder_depth_for_gap, validate_test_function,
    JensenPotential, TestFunction,
};
use crate::quadrature::{circle_angles, GaussLegendre};

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Riesz charge of one subharmonic part.
#[derive(Clone)]
pub enum RieszPart {
    Zero,
    Atoms(Charge),
    /// Radial density ρ(|z − center|) per unit area on r_lo < |z − c| < r_hi.
    Radial {
        center: Complex64,
        r_lo: f64,
        r_hi: f64,
        density: Profile,
    },
    Numeric(Charge),
}

impl std::fmt::Debug for RieszPart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RieszPart::Zero => write!(f, "Zero"),
            RieszPart::Atoms(c) => write!(f, "Atoms({})", c.atoms().len()),
            RieszPart::Radial { r_lo, r_hi, .. } => write!(f, "Radial[{r_lo}, {r_hi}]"),
            RieszPart::Numeric(_) => write!(f, "Numeric"),
        }
    }
}

/// Angular nodes used when a radial density is discretised.
const RADIAL_CHARGE_THETA: usize = 64;
/// Geometric levels towards each end of a radial density's support.
const RADIAL_CHARGE_LEVELS: i32 = 30;

impl RieszPart {
    pub fn to_charge(&self, label: &str) -> Charge {
        match self {
            RieszPart::Zero => Charge::zero(label),
            RieszPart::Atoms(c) | RieszPart::Numeric(c) => c.clone(),
            RieszPart::Radial {
                center,
                r_lo,
                r_hi,
                density,
            } => {
                let (lo, hi) = (*r_lo, *r_hi);
                let span = hi - lo;
                let mut breaks = vec![lo, hi];
                for k in 1..=RADIAL_CHARGE_LEVELS {
                    let t = span * 0.5f64.powi(k);
                    breaks.push(hi - t);
                    if lo > 0.0 {
                        breaks.push(lo + t);
                    }
                }
                for k in 1..8 {
                    breaks.push(lo + span * k as f64 / 8.0);
                }
                breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                breaks.dedup();
                let gl = GaussLegendre::get(8);
                let dt = 2.0 * PI / RADIAL_CHARGE_THETA as f64;
                let (mut nodes, mut values, mut areas) = (Vec::new(), Vec::new(), Vec::new());
                for w in breaks.windows(2) {
                    // the outermost panel touches ∂D, where the density may blow up
                    if w[1] >= hi && span * 0.5f64.powi(RADIAL_CHARGE_LEVELS) >= w[1] - w[0] {
                        continue;
                    }
                    for (r, wr) in gl.mapped(w[0], w[1]) {
                        let rho = density(r);
                        for t in circle_angles(RADIAL_CHARGE_THETA, true) {
                            nodes.push(center + Complex64::from_polar(r, t));
                            values.push(rho);
                            areas.push(r * wr * dt);
                        }
                    }
                }
                Charge::zero(label).with_density(DensityBlock { nodes, values, areas })
            }
        }
    }
}

/// One subharmonic part of a weight.
#[derive(Debug, Clone)]
pub struct WeightPart {
    pub label: String,
    pub field: FieldRef,
    pub riesz: RieszPart,
    pub continuous: bool,
}

impl WeightPart {
    pub fn zero() -> WeightPart {
        WeightPart {
            label: "0".into(),
            field: FieldRef::constant(0.0),
            riesz: RieszPart::Zero,
            continuous: true,
        }
    }
}

/// Named weight presets (scenario wire format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// α·ln(R / (R − |z − c|)) on a disk; on an annulus the inner circle
    /// contributes α·ln(|z − c| / (|z − c| − r_in)) as well.
    BergmanAlpha {
        alpha: f64,
    },
    /// |z − c|².
    Quadratic,
    /// ln(1/(1 − |z|)) on the unit disk, evaluated with the distance clipped
    /// away from 0 so it stays finite in floating point.
    LogBoundary,
    /// ln|B_W(z)| + shift.
    Blaschke {
        zeros: Vec<Point>,
        #[serde(default)]
        shift: f64,
    },
    /// ln|B_W(z̄)|: the Blaschke log with zeros reflected in the real axis.
    BlaschkeReflected {
        zeros: Vec<Point>,
    },
    /// Samples on an n × n lattice over the bounding square of D (row-major,
    /// rows along Im), bilinearly interpolated.
    CustomGrid {
        n: usize,
        values: Vec<f64>,
    },
    Difference {
        plus: Box<WeightSpec>,
        minus: Box<WeightSpec>,
    },
}

/// M = M₊ − M₋.
#[derive(Debug, Clone)]
pub struct Weight {
    pub plus: WeightPart,
    pub minus: WeightPart,
    pub spec: WeightSpec,
}

fn unit_disk_only(domain: &Domain, what: &str) -> Result<()> {
    if !domain.is_disk() {
        return Err(Error::Unsupported(format!("{what} needs a disk domain")));
    }
    Ok(())
}

fn disk_points(domain: &Domain, zeros: &[Point]) -> Result<Vec<(Complex64, f64)>> {
    zeros
        .iter()
        .map(|p| {
            let z: Complex64 = (*p).into();
            domain.check_contains(z)?;
            Ok((z, 1.0))
        })
        .collect()
}

fn part_from_spec(spec: &WeightSpec, domain: &Domain) -> Result<WeightPart> {
    let c = domain.center();
    let big_r = domain.outer_radius();
    let r_in = domain.inner_radius();
    let label = format!("{spec:?}");
    Ok(match spec {
        WeightSpec::Zero => WeightPart::zero(),
        WeightSpec::Constant { value } => {
            if !value.is_finite() {
                return Err(invalid("value", "constant weight must be finite"));
            }
            WeightPart {
                label,
                field: FieldRef::constant(*value),
                riesz: RieszPart::Zero,
                continuous: true,
            }
        }
        WeightSpec::BergmanAlpha { alpha } => {
            if !(alpha.is_finite() && *alpha >= 0.0) {
                return Err(invalid("alpha", "need α ≥ 0"));
            }
            let a = *alpha;
            let annulus = !domain.is_disk();
            WeightPart {
                label,
                field: FieldRef::new(move |z: Complex64| {
                    let r = (z - c).norm();
                    let mut v = a * (big_r / (big_r - r).max(f64::MIN_POSITIVE)).ln();
                    if annulus {
                        v += a * (r / (r - r_in).max(f64::MIN_POSITIVE)).ln();
                    }
                    v
                }),
                riesz: RieszPart::Radial {
                    center: c,
                    r_lo: r_in,
                    r_hi: big_r,
                    density: Arc::new(move |r: f64| {
                        let mut lap = 1.0 / ((big_r - r) * (big_r - r)) + 1.0 / (r * (big_r - r));
                        if annulus {
                            lap += r_in / (r * (r - r_in) * (r - r_in));
                        }
                        a * lap / (2.0 * PI)
                    }),
                },
                continuous: true,
            }
        }
        WeightSpec::Quadratic => WeightPart {
            label,
            field: FieldRef::new(move |z: Complex64| (z - c).norm_sqr()),
            riesz: RieszPart::Radial {
                center: c,
                r_lo: r_in,
                r_hi: big_r,
                density: Arc::new(|_| 2.0 / PI),
            },
            continuous: true,
        },
        WeightSpec::LogBoundary => {
            if !domain.is_unit_disk() {
                return Err(Error::Unsupported("log_boundary needs the unit disk".into()));
            }
            let mut p = part_from_spec(&WeightSpec::BergmanAlpha { alpha: 1.0 }, domain)?;
            p.label = label;
            p
        }
        WeightSpec::Blaschke { zeros, shift } => {
            unit_disk_only(domain, "blaschke weight")?;
            let pts = disk_points(domain, zeros)?;
            let riesz = Charge::from_atoms("n_W", pts.iter().map(|&(z, w)| Atom { z, w }));
            let prod = ProductFunction::disk(domain, pts)?;
            let s = *shift;
            WeightPart {
                label,
                field: FieldRef::new(move |z: Complex64| prod.ln_abs(z) + s),
                riesz: RieszPart::Atoms(riesz),
                continuous: false,
            }
        }
        WeightSpec::BlaschkeReflected { zeros } => {
            unit_disk_only(domain, "reflected blaschke weight")?;
            let refl: Vec<Point> = zeros
                .iter()
                .map(|p| {
                    let z: Complex64 = (*p).into();
                    (c + (z - c).conj()).into()
                })
                .collect();
            let pts = disk_points(domain, &refl)?;
            let riesz = Charge::from_atoms("n_W*", pts.iter().map(|&(z, w)| Atom { z, w }));
            let prod = ProductFunction::disk(domain, pts)?;
            WeightPart {
                label,
                field: FieldRef::new(move |z: Complex64| prod.ln_abs(z)),
                riesz: RieszPart::Atoms(riesz),
                continuous: false,
            }
        }
        WeightSpec::CustomGrid { n, values } => {
            let n = *n;
            if n < 3 || values.len() != n * n || values.iter().any(|v| !v.is_finite()) {
                return Err(invalid("custom_grid", format!("need n ≥ 3 and n² finite values, got n={n}, {} values", values.len())));
            }
            let vals = Arc::new(values.clone());
            let h = 2.0 * big_r / (n - 1) as f64;
            let origin = c - Complex64::new(big_r, big_r);
            let f = move |z: Complex64| {
                let x = ((z.re - origin.re) / h).clamp(0.0, (n - 1) as f64);
                let y = ((z.im - origin.im) / h).clamp(0.0, (n - 1) as f64);
                let (i, j) = ((x.floor() as usize).min(n - 2), (y.floor() as usize).min(n - 2));
                let (tx, ty) = (x - i as f64, y - j as f64);
                let v = |i: usize, j: usize| vals[j * n + i];
                (1.0 - tx) * (1.0 - ty) * v(i, j) + tx * (1.0 - ty) * v(i + 1, j) + (1.0 - tx) * ty * v(i, j + 1) + tx * ty * v(i + 1, j + 1)
            };
            let field = FieldRef::new(f);
            let grid = Grid::with_spacing(domain, h)?;
            let est = riesz_measure_numeric(&field, &grid)?;
            WeightPart {
                label,
                field,
                riesz: RieszPart::Numeric(est.charge),
                continuous: true,
            }
        }
        WeightSpec::Difference { .. } => {
            return Err(invalid("weight", "nested differences are not supported"));
        }
    })
}

impl Weight {
    pub fn zero() -> Weight {
        Weight {
            plus: WeightPart::zero(),
            minus: WeightPart::zero(),
            spec: WeightSpec::Zero,
        }
    }

    pub fn new(spec: &WeightSpec, domain: &Domain) -> Result<Weight> {
        let (plus, minus) = match spec {
            WeightSpec::Difference { plus, minus } => (part_from_spec(plus, domain)?, part_from_spec(minus, domain)?),
            other => (part_from_spec(other, domain)?, WeightPart::zero()),
        };
        let z0 = domain.base_point();
        for (name, p) in [("M₊", &plus), ("M₋", &minus)] {
            if !p.field.eval(z0).is_finite() {
                return Err(invalid("weight", format!("{name} must be finite at the base point")));
            }
        }
        Ok(Weight {
            plus,
            minus,
            spec: spec.clone(),
        })
    }

    pub fn from_parts(plus: WeightPart, minus: WeightPart, spec: WeightSpec) -> Weight {
        Weight { plus, minus, spec }
    }

    pub fn eval(&self, z: Complex64) -> f64 {
        let m = self.minus.field.eval(z);
        if m == 0.0 {
            return self.plus.field.eval(z);
        }
        self.plus.field.eval(z) - m
    }

    pub fn is_zero(&self) -> bool {
        self.spec == WeightSpec::Zero
    }

    /// ν_M = ν₊ − ν₋ (radial densities discretised, truncated near ∂D).
    pub fn riesz_charge(&self) -> Charge {
        let p = self.plus.riesz.to_charge("nu_M+");
        match self.minus.riesz {
            RieszPart::Zero => p,
            ref m => p.plus(&m.to_charge("nu_M-").scaled(-1.0)),
        }
    }
}

impl ScalarField for Weight {
    fn eval(&self, z: Complex64) -> f64 {
        Weight::eval(self, z)
    }
}

/// Harmonic polynomial c₀ + Σ_k (a_k Re ζ^k + b_k Im ζ^k), ζ = (z − c)/R.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicCorrection {
    #[serde(with = "crate::report::real")]
    pub constant: f64,
    #[serde(with = "crate::report::real_vec")]
    pub re: Vec<f64>,
    #[serde(with = "crate::report::real_vec")]
    pub im: Vec<f64>,
}

impl HarmonicCorrection {
    pub fn constant(c: f64) -> HarmonicCorrection {
        HarmonicCorrection {
            constant: c,
            re: vec![],
            im: vec![],
        }
    }

    pub fn degree(&self) -> usize {
        self.re.len()
    }

    pub fn eval(&self, zeta: Complex64) -> f64 {
        let mut p = Complex64::new(1.0, 0.0);
        let mut s = self.constant;
        for (a, b) in self.re.iter().zip(&self.im) {
            p *= zeta;
            s += a * p.re + b * p.im;
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    /// Blaschke factors on a disk.
    Disk,
    /// Green potentials on an annulus with a winding factor.
    Annulus,
}

/// ln|f| for f = (product over zeros) · z^m · e^{h + i h̃}.
#[derive(Debug, Clone)]
pub struct ProductFunction {
    pub kind: ProductKind,
    pub domain: Domain,
    /// Zeros with (possibly non-integer) weights.
    pub zeros: Vec<(Complex64, f64)>,
    pub correction: HarmonicCorrection,
    /// Integer winding m of the factor ((z − c)/r_out)^m (annulus only).
    pub winding: i64,
    normalized: Vec<(Complex64, f64)>,
}

/// 32 factors are multiplied before taking a logarithm.
const CHUNK: usize = 32;

impl ProductFunction {
    pub fn disk(domain: &Domain, zeros: Vec<(Complex64, f64)>) -> Result<ProductFunction> {
        if !domain.is_disk() {
            return Err(Error::Unsupported(
                "Blaschke products need a disk; use the dominated construction on annuli".into(),
            ));
        }
        for &(z, _) in &zeros {
            domain.check_contains(z)?;
        }
        let (c, r) = (domain.center(), domain.outer_radius());
        Ok(ProductFunction {
            kind: ProductKind::Disk,
            domain: *domain,
            normalized: zeros.iter().map(|&(z, w)| ((z - c) / r, w)).collect(),
            zeros,
            correction: HarmonicCorrection::constant(0.0),
            winding: 0,
        })
    }

    pub fn annulus(domain: &Domain, zeros: Vec<(Complex64, f64)>) -> Result<ProductFunction> {
        if domain.is_disk() {
            return Err(invalid("domain", "annulus product on a disk"));
        }
        for &(z, _) in &zeros {
            domain.check_contains(z)?;
        }
        Ok(ProductFunction {
            kind: ProductKind::Annulus,
            domain: *domain,
            normalized: zeros.clone(),
            zeros,
            correction: HarmonicCorrection::constant(0.0),
            winding: 0,
        })
    }

    fn zeta(&self, z: Complex64) -> Complex64 {
        (z - self.domain.center()) / self.domain.outer_radius()
    }

    /// ln|product| without the harmonic correction.
    pub fn raw(&self, z: Complex64) -> f64 {
        match self.kind {
            ProductKind::Disk => blaschke_log_sum(self.zeta(z), &self.normalized),
            ProductKind::Annulus => {
                let mut terms = Vec::with_capacity(self.zeros.len() + 1);
                for &(a, w) in &self.normalized {
                    if a == z {
                        return f64::NEG_INFINITY;
                    }
                    terms.push(-w * green_function(&self.domain, z, a).unwrap_or(f64::NAN));
                }
                terms.push(self.winding as f64 * self.zeta(z).norm().ln());
                pairwise_sum(&terms)
            }
        }
    }

    pub fn ln_abs(&self, z: Complex64) -> f64 {
        let r = self.raw(z);
        if r == f64::NEG_INFINITY {
            return r;
        }
        r + self.correction.eval(self.zeta(z))
    }

    /// Σ w (1 − |a|/R) on a disk: the Blaschke-condition partial sum.
    pub fn partial_mass(&self) -> f64 {
        pairwise_sum(&self.normalized.iter().map(|&(a, w)| w * (1.0 - a.norm())).collect::<Vec<_>>())
    }

    /// All weights are positive integers.
    pub fn integer_weights(&self) -> bool {
        self.zeros.iter().all(|&(_, w)| w > 0.0 && w.fract() == 0.0)
    }

    /// Flux (1/2π)∮ ∂ln|f|/∂n around the inner circle, excluding the winding
    /// factor: −Σ w_k ln(|a_k − c|/r_out) / ln(r_in/r_out).
    pub fn inner_period(&self) -> f64 {
        if self.kind == ProductKind::Disk {
            return 0.0;
        }
        let c = self.domain.center();
        let (ri, ro) = (self.domain.inner_radius(), self.domain.outer_radius());
        let ln_q = (ri / ro).ln();
        -pairwise_sum(
            &self
                .zeros
                .iter()
                .map(|&(a, w)| w * ((a - c).norm() / ro).ln() / ln_q)
                .collect::<Vec<_>>(),
        )
    }
}

impl ScalarField for ProductFunction {
    fn eval(&self, z: Complex64) -> f64 {
        self.ln_abs(z)
    }
}

/// Σ w ln|(ζ − a)/(1 − āζ)| with chunked products and a pairwise reduction.
fn blaschke_log_sum(zeta: Complex64, zeros: &[(Complex64, f64)]) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let mut logs = Vec::with_capacity(zeros.len() / CHUNK + 2);
    let mut prod = 1.0f64;
    let mut in_chunk = 0;
    for &(a, w) in zeros {
        let num = (zeta - a).norm_sqr();
        if num == 0.0 {
            return f64::NEG_INFINITY;
        }
        let ratio = num / (one - a.conj() * zeta).norm_sqr();
        if w == 1.0 {
            prod *= ratio;
            in_chunk += 1;
            if in_chunk == CHUNK || prod < 1e-200 {
                logs.push(0.5 * prod.ln());
                prod = 1.0;
                in_chunk = 0;
            }
        } else {
            logs.push(0.5 * w * ratio.ln());
        }
    }
    if in_chunk > 0 {
        logs.push(0.5 * prod.ln());
    }
    pairwise_sum(&logs)
}

/// (ln|B_N(z)|, Σ_{k≤N}(1 − |a_k|)) on a disk domain.
pub fn blaschke_product(zeros: &ZeroSequence, z: Complex64, truncation: usize) -> Result<(f64, f64)> {
    // the domain is implied: zeros must sit in the unit disk
    let d = Domain::unit_disk();
    let pts: Vec<(Complex64, f64)> = zeros.points()[..truncation.min(zeros.len())]
        .iter()
        .map(|&a| (a, 1.0))
        .collect();
    let f = ProductFunction::disk(&d, pts)?;
    Ok((f.ln_abs(z), f.partial_mass()))
}

/// Ring layout of a boundary sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub interior_rings: usize,
    /// Rings at distance span·2^{-j-1} from each boundary circle, j = 1..=depth.
    pub depth: usize,
    pub n_theta: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            interior_rings: 8,
            depth: 20,
            n_theta: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub radius: f64,
    /// Distance to the nearest boundary circle.
    pub dist: f64,
    pub points: Vec<Complex64>,
}

impl SweepSpec {
    pub fn rings(&self, domain: &Domain) -> Vec<Ring> {
        let c = domain.center();
        let (lo, hi) = (domain.inner_radius(), domain.outer_radius());
        let span = hi - lo;
        let mut radii: Vec<f64> = (0..self.interior_rings)
            .map(|k| lo + span * (k as f64 + 0.5) / self.interior_rings as f64)
            .collect();
        for j in 1..=self.depth {
            let eps = span * 0.5f64.powi(j as i32 + 1);
            radii.push(hi - eps);
            if !domain.is_disk() {
                radii.push(lo + eps);
            }
        }
        radii.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        radii.dedup();
        let mut rings = Vec::with_capacity(radii.len() + 1);
        if domain.is_disk() {
            rings.push(Ring {
                radius: 0.0,
                dist: hi,
                points: vec![c],
            });
        }
        for r in radii {
            let points: Vec<Complex64> = circle_angles(self.n_theta, true)
                .map(|t| c + Complex64::from_polar(r, t))
                .filter(|&z| domain.contains(z))
                .collect();
            if points.is_empty() {
                continue;
            }
            rings.push(Ring {
                radius: r,
                dist: (r - lo).min(hi - r).min(hi - r.max(0.0)),
                points,
            });
        }
        rings
    }

    pub fn nodes(&self, domain: &Domain) -> Vec<Complex64> {
        self.rings(domain).into_iter().flat_map(|r| r.points).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingSup {
    #[serde(with = "crate::report::real")]
    pub radius: f64,
    #[serde(with = "crate::report::real")]
    pub dist: f64,
    #[serde(with = "crate::report::real")]
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    #[serde(with = "crate::report::real")]
    pub sup: f64,
    pub witness: Point,
    /// Per-ring sup, ordered by decreasing distance to ∂D.
    pub trend: Vec<RingSup>,
    /// Largest increase between consecutive boundary rings at the end of the
    /// trend.
    #[serde(with = "crate::report::real")]
    pub tail_growth: f64,
    pub bounded: bool,
}

/// Increase tolerated between consecutive boundary rings.
pub const TREND_TOL: f64 = 0.05;
const TREND_RINGS: usize = 3;

/// sup over the sweep of ln|f| − M, with per-ring sups toward ∂D.
pub fn membership_test(ln_f: &dyn ScalarField, m: &Weight, domain: &Domain, sweep: &SweepSpec) -> Result<MembershipReport> {
    let mut rings = sweep.rings(domain);
    rings.sort_by(|a, b| b.dist.partial_cmp(&a.dist).expect("finite"));
    let mut trend = Vec::with_capacity(rings.len());
    let mut sup = f64::NEG_INFINITY;
    let mut witness: Point = domain.base_point().into();
    for ring in &rings {
        let vals: Vec<(f64, f64)> = ring.points.par_iter().map(|&z| (ln_f.eval(z), m.eval(z))).collect();
        if vals.iter().all(|v| v.1 == f64::NEG_INFINITY) {
            return Err(invalid("weight", format!("M = −∞ on the whole ring r = {}", ring.radius)));
        }
        let mut rs = f64::NEG_INFINITY;
        for (k, &(f, mm)) in vals.iter().enumerate() {
            let d = if f == f64::NEG_INFINITY { f64::NEG_INFINITY } else { f - mm };
            let d = if d.is_nan() { f64::INFINITY } else { d };
            if d > rs {
                rs = d;
            }
            if d > sup {
                sup = d;
                witness = ring.points[k].into();
            }
        }
        trend.push(RingSup {
            radius: ring.radius,
            dist: ring.dist,
            sup: rs,
        });
    }
    let tail: Vec<f64> = trend.iter().rev().take(TREND_RINGS + 1).map(|r| r.sup).collect();
    let tail_growth = tail
        .windows(2)
        .map(|w| if w[0] == w[1] { 0.0 } else { w[0] - w[1] })
        .fold(f64::NEG_INFINITY, f64::max);
    let bounded = sup.is_finite() && tail_growth <= TREND_TOL;
    Ok(MembershipReport {
        sup,
        witness,
        trend,
        tail_growth,
        bounded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    /// h = min over the sweep of (M^{⊙r} − u_raw).
    #[default]
    Constant,
    /// Least-squares harmonic polynomial on the boundary collar, shifted down
    /// to restore u ≤ M^{⊙r} on the sweep.
    Harmonic { degree: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominatedOptions {
    /// Request u ≤ M + ε (needs M₊ continuous).
    #[serde(default)]
    pub plus_epsilon: Option<f64>,
    #[serde(default)]
    pub correction: CorrectionMode,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default = "default_shrink_iterations")]
    pub max_shrink_iterations: usize,
}

fn default_shrink_iterations() -> usize {
    40
}

impl Default for DominatedOptions {
    fn default() -> Self {
        DominatedOptions {
            plus_epsilon: None,
            correction: CorrectionMode::Constant,
            sweep: SweepSpec::default(),
            max_shrink_iterations: default_shrink_iterations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlusSlack {
    #[serde(with = "crate::report::real")]
    pub epsilon: f64,
    /// max over sweep of sup_{|w−z|≤r(z)} |M₊(w) − M₊(z)|.
    #[serde(with = "crate::report::real")]
    pub modulus: f64,
    pub shrink_iterations: usize,
    #[serde(with = "crate::report::real")]
    pub final_factor: f64,
    /// max over sweep of u − M.
    #[serde(with = "crate::report::real")]
    pub max_excess: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub nodes: usize,
    /// max over the sweep of u − M^{⊙r}.
    #[serde(with = "crate::report::real")]
    pub max_violation: f64,
    /// u ≤ M^{⊙r} + 1e-9 at every node.
    pub pass: bool,
    /// M^{⊙r} ≤ M₊^{⊙r} − M₋ at every node (within 1e-9).
    pub chain_ok: bool,
    pub plus_slack: Option<PlusSlack>,
    /// Weights are integers and (annulus) the period vanishes.
    pub holomorphic: bool,
    #[serde(with = "crate::report::real")]
    pub residual_period: f64,
    pub winding: i64,
    pub kind: ProductKind,
    pub correction: HarmonicCorrection,
    /// How h was chosen; one admissible choice among many.
    pub correction_note: &'static str,
}

pub struct Dominated {
    pub u: ProductFunction,
    pub certificate: Certificate,
    pub radius: RadiusFunction,
}

const CERT_TOL: f64 = 1e-9;

fn modulus_of(m_plus: &FieldRef, nodes: &[Complex64], r: &RadiusFunction) -> f64 {
    nodes
        .par_iter()
        .map(|&z| {
            let f0 = m_plus.eval(z);
            let rz = r.eval(z);
            let mut m: f64 = 0.0;
            for s in [0.25, 0.5, 1.0] {
                for t in circle_angles(32, false) {
                    m = m.max((m_plus.eval(z + Complex64::from_polar(s * rz, t)) - f0).abs());
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max)
}

fn circle_means(f: &FieldRef, nodes: &[Complex64], r: &RadiusFunction, cfg: &QuadratureConfig) -> Vec<f64> {
    nodes.par_iter().map(|&z| circle_mean(f, z, r.eval(z), cfg).value).collect()
}

/// Least squares for a harmonic polynomial in ζ fitted to `target` at `pts`.
fn fit_harmonic(pts: &[Complex64], target: &[f64], degree: usize) -> Option<HarmonicCorrection> {
    let cols = 1 + 2 * degree;
    if pts.len() < cols {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(pts.len(), cols);
    for (i, &z) in pts.iter().enumerate() {
        a[(i, 0)] = 1.0;
        let mut p = Complex64::new(1.0, 0.0);
        for k in 0..degree {
            p *= z;
            a[(i, 1 + 2 * k)] = p.re;
            a[(i, 2 + 2 * k)] = p.im;
        }
    }
    let b = DVector::from_column_slice(target);
    let x = a.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(HarmonicCorrection {
        constant: x[0],
        re: (0..degree).map(|k| x[1 + 2 * k]).collect(),
        im: (0..degree).map(|k| x[2 + 2 * k]).collect(),
    })
}

pub const MAX_CORRECTION_DEGREE: usize = 8;

/// u = (product over the atoms of ν) + h with u ≤ M^{⊙r} on the sweep.
pub fn construct_dominated_subharmonic(
    nu: &Charge,
    m: &Weight,
    r: &RadiusFunction,
    domain: &Domain,
    opts: &DominatedOptions,
) -> Result<Dominated> {
    let zeros: Vec<(Complex64, f64)> = nu.point_masses().filter(|&(_, w)| w != 0.0).collect();
    if zeros.iter().any(|&(_, w)| w < 0.0) {
        return Err(invalid("nu", "ν must be nonnegative"));
    }
    let mut u = if domain.is_disk() {
        ProductFunction::disk(domain, zeros)?
    } else {
        ProductFunction::annulus(domain, zeros)?
    };
    let period = u.inner_period();
    u.winding = (-period).round() as i64;
    let residual_period = period + u.winding as f64;

    let nodes = opts.sweep.nodes(domain);
    let mut radius = *r;
    let mut plus_slack = None;
    if let Some(eps) = opts.plus_epsilon {
        if !(eps > 0.0) {
            return Err(invalid("plus_epsilon", "slack must be positive"));
        }
        if !m.plus.continuous {
            return Err(invalid("weight", "the u ≤ M + ε refinement needs M₊ continuous"));
        }
        let mut it = 0;
        let mut modulus = modulus_of(&m.plus.field, &nodes, &radius);
        while modulus >= eps {
            if it == opts.max_shrink_iterations {
                return Err(Error::ShrinkFailed {
                    target: eps,
                    iterations: it,
                });
            }
            radius = radius.shrunk(0.5);
            modulus = modulus_of(&m.plus.field, &nodes, &radius);
            it += 1;
        }
        plus_slack = Some(PlusSlack {
            epsilon: eps,
            modulus,
            shrink_iterations: it,
            final_factor: radius.factor,
            max_excess: f64::NAN,
            pass: false,
        });
    }

    let cfg = QuadratureConfig {
        angular: 64,
        max_doublings: 3,
        ..QuadratureConfig::default()
    };
    let m_field = FieldRef::new(m.clone());
    let m_avg = circle_means(&m_field, &nodes, &radius, &cfg);
    let mp_avg = circle_means(&m.plus.field, &nodes, &radius, &cfg);
    let chain_ok = nodes
        .iter()
        .zip(m_avg.iter().zip(&mp_avg))
        .all(|(&z, (&a, &p))| a <= p - m.minus.field.eval(z) + CERT_TOL * (1.0 + a.abs()));

    let raw: Vec<f64> = nodes.par_iter().map(|&z| u.raw(z)).collect();
    let gap: Vec<f64> = m_avg.iter().zip(&raw).map(|(a, u)| a - u).collect();
    let min_gap = |h: &HarmonicCorrection| -> f64 {
        nodes
            .iter()
            .zip(&gap)
            .filter(|(_, g)| g.is_finite())
            .map(|(&z, g)| g - h.eval(u.zeta(z)))
            .fold(f64::INFINITY, f64::min)
    };
    let (mut correction, note) = match opts.correction {
        CorrectionMode::Constant => (HarmonicCorrection::constant(0.0), "constant: min over the sweep of M^{⊙r} − u_raw"),
        CorrectionMode::Harmonic { degree } => {
            if degree > MAX_CORRECTION_DEGREE {
                return Err(invalid("degree", format!("harmonic correction degree ≤ {MAX_CORRECTION_DEGREE}")));
            }
            let collar = 0.25 * (domain.outer_radius() - domain.inner_radius());
            let (pts, tg): (Vec<Complex64>, Vec<f64>) = nodes
                .iter()
                .zip(&gap)
                .filter(|(&z, g)| g.is_finite() && domain.dist_to_boundary(z) < collar)
                .map(|(&z, &g)| (u.zeta(z), g))
                .unzip();
            let fit = fit_harmonic(&pts, &tg, degree).unwrap_or_else(|| HarmonicCorrection::constant(0.0));
            (fit, "least-squares harmonic polynomial on the boundary collar, shifted to restore u ≤ M^{⊙r}")
        }
    };
    let shift = min_gap(&correction);
    if !shift.is_finite() {
        return Err(invalid("weight", "M^{⊙r} − u is not finite anywhere on the sweep"));
    }
    correction.constant += shift;
    u.correction = correction.clone();

    let uvals: Vec<f64> = nodes.par_iter().map(|&z| u.ln_abs(z)).collect();
    let max_violation = uvals
        .iter()
        .zip(&m_avg)
        .map(|(u, a)| u - a)
        .filter(|d| !d.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(ps) = plus_slack.as_mut() {
        let ex = nodes
            .iter()
            .zip(&uvals)
            .map(|(&z, u)| u - m.eval(z))
            .filter(|d| !d.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        ps.max_excess = ex;
        ps.pass = ex <= ps.epsilon + CERT_TOL;
    }
    let holomorphic = u.integer_weights() && residual_period.abs() < 1e-9;
    Ok(Dominated {
        certificate: Certificate {
            nodes: nodes.len(),
            max_violation,
            pass: max_violation <= CERT_TOL,
            chain_ok,
            plus_slack,
            holomorphic,
            residual_period,
            winding: u.winding,
            kind: u.kind,
            correction,
            correction_note: note,
        },
        u,
        radius,
    })
}

/// Configuration of [`classify_zero_sequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub s_radius: f64,
    pub s0_radius: f64,
    pub u0_radius: f64,
    /// Random Jensen shells in the family (the boundary ladder is added on top).
    pub family_size: usize,
    pub seed: u64,
    pub truncation_ladder: Vec<usize>,
    #[serde(default = "default_slope")]
    pub slope_threshold: f64,
    #[serde(default = "default_doublings")]
    pub doublings: usize,
    #[serde(default = "default_radius_factor")]
    pub radius_factor: f64,
    #[serde(default)]
    pub dominated: DominatedOptions,
}

fn default_slope() -> f64 {
    0.5
}
fn default_doublings() -> usize {
    3
}
fn default_radius_factor() -> f64 {
    0.5
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            s_radius: 0.25,
            s0_radius: 0.5,
            u0_radius: 0.75,
            family_size: 16,
            seed: 1,
            truncation_ladder: vec![1250, 2500, 5000, 10_000],
            slope_threshold: default_slope(),
            doublings: default_doublings(),
            radius_factor: default_radius_factor(),
            dominated: DominatedOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductPoint {
    pub truncation: usize,
    /// Σ_{k≤N} g_D(z_k, z₀) = −ln|B_N(z₀)| on the disk.
    #[serde(with = "crate::report::real")]
    pub green_sum: f64,
    /// Σ_{k≤N} (1 − |z_k − c|/R), disks only.
    #[serde(with = "crate::report::real_opt")]
    pub blaschke_mass: Option<f64>,
    /// u_N(z₀) of the dominated construction (without correction).
    #[serde(with = "crate::report::real")]
    pub u_base: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Z1Verdict {
    Member,
    NonConvergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Z1Attempt {
    pub trace: Vec<ProductPoint>,
    #[serde(with = "crate::report::real_vec")]
    pub slopes: Vec<f64>,
    pub product_converges: bool,
    pub certificate: Certificate,
    pub membership: MembershipReport,
    pub verdict: Z1Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Consistency {
    AgreePositive,
    AgreeNegative,
    Disagree,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyBundle {
    pub system: SetSystem,
    pub class_bound: ClassBound,
    pub z3: BalayageReport,
    pub z1: Z1Attempt,
    pub consistency: Consistency,
    pub explanation: String,
    /// Family members rejected by the class validator (should be empty).
    pub rejected_tests: Vec<String>,
    pub dropped_tail: usize,
    #[serde(with = "crate::report::real")]
    pub tail_mass: f64,
}

/// Random Jensen shells plus a boundary ladder whose depth follows the
/// truncation: at level N the ladder reaches the N-th zero's distance to ∂D.
/// Members failing the class validator are dropped and listed.
pub struct AdaptiveFamily {
    pub random: Vec<TestFunction>,
    ladder: Vec<Option<TestFunction>>,
    depths: Vec<(usize, usize)>,
    pub rejected: Vec<String>,
}

impl AdaptiveFamily {
    pub fn new(
        domain: &Domain,
        system: &SetSystem,
        u0_radius: f64,
        size: usize,
        seed: u64,
        zeros: &ZeroSequence,
        truncations: &[usize],
    ) -> Result<AdaptiveFamily> {
        let random = jensen_potential_family(domain, system, u0_radius, size, seed)?;
        let avail = domain.dist_to_boundary(system.center);
        let depth_at = |n: usize| -> usize {
            let gap = zeros.points()[..n.min(zeros.len())]
                .iter()
                .map(|&z| avail - (z - system.center).norm())
                .fold(avail, f64::min);
            ladder_depth_for_gap(domain, system, u0_radius, gap.max(1e-300))
        };
        let depths: Vec<(usize, usize)> = truncations.iter().map(|&n| (n, depth_at(n))).collect();
        let max_depth = depths.iter().map(|d| d.1).max().unwrap_or(0);
        let ladder = boundary_ladder_family(domain, system, u0_radius, max_depth)?;
        let mut rejected = Vec::new();
        let mut check = |fam: &[JensenPotential]| -> Vec<Option<TestFunction>> {
            let ok: Vec<bool> = fam
                .par_iter()
                .map(|j| validate_test_function(&j.test, system, domain).passes())
                .collect();
            fam.iter()
                .zip(ok)
                .map(|(j, ok)| {
                    if !ok {
                        rejected.push(j.test.id.clone());
                    }
                    ok.then(|| j.test.clone())
                })
                .collect()
        };
        let random = check(&random).into_iter().flatten().collect();
        let ladder = check(&ladder);
        Ok(AdaptiveFamily {
            random,
            ladder,
            depths,
            rejected,
        })
    }

    pub fn for_truncation(&self, n: usize) -> Vec<TestFunction> {
        let depth = self
            .depths
            .iter()
            .find(|d| d.0 == n)
            .map_or(self.ladder.len().saturating_sub(1), |d| d.1);
        let mut fam = self.random.clone();
        fam.extend(self.ladder[..=depth.min(self.ladder.len() - 1)].iter().flatten().cloned());
        fam
    }
}

fn last_doublings_exceed(slopes: &[f64], rule: &VerdictRule) -> bool {
    slopes.len() >= rule.doublings && slopes[slopes.len() - rule.doublings..].iter().all(|&s| s > rule.slope)
}

/// z3 audit over smooth compactly supported Jensen potentials against the
/// z1 construction, with a consistency verdict.
pub fn classify_zero_sequence(zeros: &ZeroSequence, m: &Weight, domain: &Domain, cfg: &ClassifyConfig) -> Result<ClassifyBundle> {
    let z0 = domain.base_point();
    if zeros.points().contains(&z0) {
        return Err(invalid("zeros", "the base point may not be a zero"));
    }
    if cfg.truncation_ladder.is_empty() {
        return Err(invalid("truncation_ladder", "need at least one level"));
    }
    let rule = VerdictRule {
        slope: cfg.slope_threshold,
        doublings: cfg.doublings,
    };
    let provisional = nested_set_system(domain, cfg.s_radius, cfg.s0_radius, 1.0)?;
    let class_bound = rescale_class_bound(&provisional, cfg.u0_radius, domain)?;
    let system = provisional.with_b(class_bound.bound);

    let family = AdaptiveFamily::new(domain, &system, cfg.u0_radius, cfg.family_size, cfg.seed, zeros, &cfg.truncation_ladder)?;
    let nu_m = m.riesz_charge();
    let z3 = balayage_audit_adaptive(
        Nu::Zeros {
            zeros,
            ladder: &cfg.truncation_ladder,
        },
        &nu_m,
        |n| Ok(family.for_truncation(n)),
        &system,
        rule,
    )?;

    // z1 side
    let mut ladder_n = cfg.truncation_ladder.clone();
    ladder_n.sort_unstable();
    ladder_n.dedup();
    let mut trace = Vec::with_capacity(ladder_n.len());
    for &n in &ladder_n {
        let pts = &zeros.points()[..n.min(zeros.len())];
        let greens: Vec<f64> = pts.par_iter().map(|&a| green_function(domain, a, z0)).collect::<Result<_>>()?;
        let green_sum = pairwise_sum(&greens);
        let blaschke_mass = domain.is_disk().then(|| {
            let (c, r) = (domain.center(), domain.outer_radius());
            pairwise_sum(&pts.iter().map(|&a| 1.0 - (a - c).norm() / r).collect::<Vec<_>>())
        });
        trace.push(ProductPoint {
            truncation: n,
            green_sum,
            blaschke_mass,
            u_base: -green_sum,
        });
    }
    let slopes: Vec<f64> = trace
        .windows(2)
        .map(|w| (w[1].green_sum - w[0].green_sum) / (w[1].truncation as f64 / w[0].truncation as f64).log2())
        .collect();
    let diverges = last_doublings_exceed(&slopes, &rule);
    let settled = slopes.len() < rule.doublings || slopes[slopes.len() - rule.doublings..].iter().all(|&s| s <= rule.slope);
    let product_converges = !diverges && settled;

    let max_n = *cfg.truncation_ladder.iter().max().expect("non-empty");
    let nu = Charge::from_atoms(
        "n_Z",
        zeros.points()[..max_n.min(zeros.len())].iter().map(|&z| Atom { z, w: 1.0 }),
    );
    let r = admissible_radius_function(domain, cfg.radius_factor)?;
    let dom = construct_dominated_subharmonic(&nu, m, &r, domain, &cfg.dominated)?;
    let membership = membership_test(&dom.u, m, domain, &cfg.dominated.sweep)?;
    let z1_verdict = if diverges {
        Z1Verdict::NonConvergent
    } else if product_converges && membership.bounded && dom.certificate.pass {
        Z1Verdict::Member
    } else {
        Z1Verdict::Inconclusive
    };
    let z1 = Z1Attempt {
        trace,
        slopes,
        product_converges,
        certificate: dom.certificate,
        membership,
        verdict: z1_verdict,
    };
    let (consistency, explanation) = match (z3.verdict, z1.verdict) {
        (Verdict::Consistent, Z1Verdict::Member) => (Consistency::AgreePositive, "balayage gaps stay bounded and the product is dominated".to_string()),
        (Verdict::Diverging, Z1Verdict::NonConvergent) => (Consistency::AgreeNegative, "balayage constant and product mass both grow past the slope threshold".to_string()),
        (a, b) => (
            Consistency::Disagree,
            format!(
                "z3 {a:?} vs z1 {b:?}; truncation ladder {:?}, dropped tail {} points (mass {:e})",
                cfg.truncation_ladder, zeros.dropped_tail, zeros.tail_mass
            ),
        ),
    };
    Ok(ClassifyBundle {
        system,
        class_bound,
        z3,
        z1,
        consistency,
        explanation,
        rejected_tests: family.rejected.clone(),
        dropped_tail: zeros.dropped_tail,
        tail_mass: zeros.tail_mass,
    })
}
