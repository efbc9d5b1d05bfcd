//! Signed measures (charges) on a domain: finite atom lists plus optional
//! node densities. Counting measures of zero sequences, Riesz charges by a
//! discrete Laplacian, and integration of test functions against charges.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Grid, SetSystem};
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::quadrature::circle_angles;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub z: Complex64,
    pub w: f64,
}

/// Per-node density: `values[i]` is the density per unit area at `nodes[i]`,
/// `areas[i]` its cell area.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DensityBlock {
    pub nodes: Vec<Complex64>,
    pub values: Vec<f64>,
    pub areas: Vec<f64>,
}

impl DensityBlock {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn masses(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(self.values.iter().zip(&self.areas))
            .map(|(&z, (&v, &a))| (z, v * a))
    }
}

/// A finite signed measure: atoms plus an optional node density.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Charge {
    atoms: Vec<Atom>,
    density: Option<DensityBlock>,
    pub label: String,
}

impl Charge {
    pub fn zero(label: impl Into<String>) -> Charge {
        Charge {
            atoms: Vec::new(),
            density: None,
            label: label.into(),
        }
    }

    /// Atoms at identical locations are merged; the first-seen order is kept.
    pub fn from_atoms(label: impl Into<String>, atoms: impl IntoIterator<Item = Atom>) -> Charge {
        let mut merged: Vec<Atom> = Vec::new();
        let mut seen: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        for a in atoms {
            let key = (a.z.re.to_bits(), a.z.im.to_bits());
            match seen.get(&key) {
                Some(&k) => merged[k].w += a.w,
                None => {
                    seen.insert(key, merged.len());
                    merged.push(a);
                }
            }
        }
        Charge {
            atoms: merged,
            density: None,
            label: label.into(),
        }
    }

    pub fn dirac(z: Complex64) -> Charge {
        Charge::from_atoms(format!("delta({z})"), [Atom { z, w: 1.0 }])
    }

    /// Uniform probability on the circle |z − c| = r, as `n` equal atoms.
    pub fn uniform_circle(center: Complex64, r: f64, n: usize) -> Charge {
        let w = 1.0 / n as f64;
        Charge::from_atoms(
            format!("circle({center}, {r})"),
            circle_angles(n, false).map(|t| Atom {
                z: center + Complex64::from_polar(r, t),
                w,
            }),
        )
    }

    pub fn with_density(mut self, density: DensityBlock) -> Charge {
        self.density = Some(density);
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&DensityBlock> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.w == 0.0)
            && self
                .density
                .as_ref()
                .is_none_or(|d| d.masses().all(|(_, m)| m == 0.0))
    }

    /// Every weighted point of the charge: atoms first, then density nodes.
    pub fn point_masses(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        self.atoms
            .iter()
            .map(|a| (a.z, a.w))
            .chain(self.density.iter().flat_map(|d| d.masses()))
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.point_masses().map(|(_, m)| m).collect::<Vec<_>>())
    }

    pub fn total_variation(&self) -> f64 {
        pairwise_sum(&self.point_masses().map(|(_, m)| m.abs()).collect::<Vec<_>>())
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.mass() - 1.0).abs() <= tol && self.point_masses().all(|(_, m)| m >= 0.0)
    }

    pub fn require_probability(&self, tol: f64) -> Result<()> {
        let mass = self.mass();
        if (mass - 1.0).abs() > tol || self.point_masses().any(|(_, m)| m < 0.0) {
            return Err(Error::NotProbability {
                label: self.label.clone(),
                mass,
            });
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Charge {
        Charge {
            atoms: self.atoms.iter().map(|a| Atom { z: a.z, w: s * a.w }).collect(),
            density: self.density.as_ref().map(|d| DensityBlock {
                nodes: d.nodes.clone(),
                values: d.values.iter().map(|v| s * v).collect(),
                areas: d.areas.clone(),
            }),
            label: format!("{s}·{}", self.label),
        }
    }

    /// Sum of two charges; densities are concatenated node lists.
    pub fn plus(&self, other: &Charge) -> Charge {
        let mut out = Charge::from_atoms(
            format!("{}+{}", self.label, other.label),
            self.atoms.iter().chain(&other.atoms).copied(),
        );
        out.density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(a), Some(b)) => {
                let mut d = a.clone();
                d.nodes.extend_from_slice(&b.nodes);
                d.values.extend_from_slice(&b.values);
                d.areas.extend_from_slice(&b.areas);
                Some(d)
            }
        };
        out
    }

    /// Image under the rotation z ↦ c + e^{iα}(z − c).
    pub fn rotated(&self, center: Complex64, angle: f64) -> Charge {
        let rot = Complex64::from_polar(1.0, angle);
        let map = |z: Complex64| center + rot * (z - center);
        Charge {
            atoms: self.atoms.iter().map(|a| Atom { z: map(a.z), w: a.w }).collect(),
            density: self.density.as_ref().map(|d| DensityBlock {
                nodes: d.nodes.iter().map(|&z| map(z)).collect(),
                values: d.values.clone(),
                areas: d.areas.clone(),
            }),
            label: format!("rot({angle})·{}", self.label),
        }
    }

    /// All atoms and density nodes strictly inside `domain`.
    pub fn check_inside(&self, domain: &Domain) -> Result<()> {
        for (z, _) in self.point_masses() {
            domain.check_contains(z)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct AtomWire {
    re: f64,
    im: f64,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct DensityWire {
    re: Vec<f64>,
    im: Vec<f64>,
    values: Vec<f64>,
    areas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ChargeWire {
    #[serde(default)]
    label: String,
    atoms: Vec<AtomWire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density: Option<DensityWire>,
}

impl Serialize for Charge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChargeWire {
            label: self.label.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomWire {
                    re: a.z.re,
                    im: a.z.im,
                    w: a.w,
                })
                .collect(),
            density: self.density.as_ref().map(|d| DensityWire {
                re: d.nodes.iter().map(|z| z.re).collect(),
                im: d.nodes.iter().map(|z| z.im).collect(),
                values: d.values.clone(),
                areas: d.areas.clone(),
            }),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Charge {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = ChargeWire::deserialize(d)?;
        let mut c = Charge::from_atoms(
            w.label,
            w.atoms.into_iter().map(|a| Atom {
                z: Complex64::new(a.re, a.im),
                w: a.w,
            }),
        );
        if let Some(dw) = w.density {
            let n = dw.re.len();
            if dw.im.len() != n || dw.values.len() != n || dw.areas.len() != n {
                return Err(serde::de::Error::custom("density arrays differ in length"));
            }
            c.density = Some(DensityBlock {
                nodes: dw.re.iter().zip(&dw.im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
                values: dw.values,
                areas: dw.areas,
            });
        }
        Ok(c)
    }
}

/// A (finite truncation of a) zero sequence, in sequence order; repeated
/// points encode multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroSequence {
    points: Vec<Complex64>,
    /// Points dropped by the generator because they are numerically on ∂D.
    pub dropped_tail: usize,
    /// Σ (1 − |z_k|)/R over dropped points (upper bound when analytic).
    pub tail_mass: f64,
}

/// Generators stop once the normalised boundary distance falls below this.
pub const TAIL_EPS: f64 = 1e-15;

/// Default truncation length for infinite sequences.
pub const DEFAULT_TRUNCATION: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialRule {
    /// 1 − 2^{-k}, k = 1, 2, ...
    #[serde(rename = "1-2^-k")]
    Geometric,
    /// 1 − 1/k, k = 2, 3, ...
    #[serde(rename = "1-1/k")]
    Harmonic,
}

impl RadialRule {
    /// Normalised boundary distance of the `i`-th point (i from 0).
    pub fn gap(self, i: usize) -> f64 {
        match self {
            RadialRule::Geometric => 0.5f64.powi(i as i32 + 1),
            RadialRule::Harmonic => 1.0 / (i as f64 + 2.0),
        }
    }

    /// Σ_{i ≥ from} gap(i), or ∞.
    pub fn tail_sum(self, from: usize) -> f64 {
        match self {
            RadialRule::Geometric => 0.5f64.powi(from as i32),
            RadialRule::Harmonic => f64::INFINITY,
        }
    }
}

impl ZeroSequence {
    pub fn new(domain: &Domain, points: Vec<Complex64>) -> Result<ZeroSequence> {
        for &z in &points {
            domain.check_contains(z)?;
        }
        Ok(ZeroSequence {
            points,
            dropped_tail: 0,
            tail_mass: 0.0,
        })
    }

    pub fn with_multiplicities(domain: &Domain, points: &[(Complex64, u32)]) -> Result<ZeroSequence> {
        let flat = points
            .iter()
            .flat_map(|&(z, m)| std::iter::repeat_n(z, m as usize))
            .collect();
        ZeroSequence::new(domain, flat)
    }

    /// Points `base + (1 − gap_k)(p − base)` where `p` is the outer boundary
    /// point on the positive real ray from the base point. Points closer to
    /// ∂D than [`TAIL_EPS`] (relative) are dropped and accounted in the tail.
    pub fn radial(domain: &Domain, rule: RadialRule, count: usize) -> Result<ZeroSequence> {
        let base = domain.base_point();
        let target = domain.center() + Complex64::new(domain.outer_radius(), 0.0);
        let span = target - base;
        let mut points = Vec::with_capacity(count.min(1 << 16));
        let mut dropped = 0usize;
        let mut first_drop = None;
        for i in 0..count {
            let gap = rule.gap(i);
            let z = base + span * (1.0 - gap);
            if gap < TAIL_EPS || !domain.contains(z) {
                dropped += 1;
                first_drop.get_or_insert(i);
                continue;
            }
            points.push(z);
        }
        let tail_mass = match first_drop {
            None => 0.0,
            Some(i) => match rule {
                RadialRule::Geometric => rule.tail_sum(i) - rule.tail_sum(count),
                RadialRule::Harmonic => (i..count).map(|k| rule.gap(k)).sum(),
            },
        };
        Ok(ZeroSequence {
            points,
            dropped_tail: dropped,
            tail_mass,
        })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// First `n` points.
    pub fn truncated(&self, n: usize) -> ZeroSequence {
        ZeroSequence {
            points: self.points[..n.min(self.points.len())].to_vec(),
            dropped_tail: 0,
            tail_mass: 0.0,
        }
    }

    pub fn rotated(&self, center: Complex64, angle: f64) -> ZeroSequence {
        let rot = Complex64::from_polar(1.0, angle);
        ZeroSequence {
            points: self.points.iter().map(|&z| center + rot * (z - center)).collect(),
            ..self.clone()
        }
    }
}

/// n_Z: one atom per distinct point with weight = multiplicity.
pub fn counting_measure(zeros: &ZeroSequence) -> Charge {
    Charge::from_atoms(
        format!("n_Z(N={})", zeros.len()),
        zeros.points.iter().map(|&z| Atom { z, w: 1.0 }),
    )
}

/// Output of [`riesz_measure_numeric`].
#[derive(Debug, Clone)]
pub struct RieszEstimate {
    pub charge: Charge,
    /// Smallest density value (negativity diagnostic for subharmonic input).
    pub min_density: f64,
    /// Nodes skipped because u or a stencil neighbour is not finite.
    pub flagged: Vec<Complex64>,
    /// Nodes skipped by the grid's exclusion zones.
    pub excluded: usize,
}

/// (1/2π)·(5-point Laplacian of u) at every lattice node whose four
/// neighbours lie in the domain.
pub fn riesz_measure_numeric(u: &dyn ScalarField, grid: &Grid) -> Result<RieszEstimate> {
    let (nx, ny) = grid.dims();
    if nx < 3 || ny < 3 {
        return Err(Error::GridTooCoarse(format!("{nx}×{ny} lattice")));
    }
    let nodes = grid.nodes();
    let values: Vec<f64> = nodes.par_iter().map(|n| u.eval(n.z)).collect();
    let h2 = grid.cell_area();
    let at = |i: isize, j: isize| grid.index_of(i, j).map(|k| values[k]);
    let mut out_nodes = Vec::new();
    let mut out_values = Vec::new();
    let mut flagged = Vec::new();
    let mut excluded = 0usize;
    for (k, n) in nodes.iter().enumerate() {
        if grid.is_excluded(n.z) {
            excluded += 1;
            continue;
        }
        let (i, j) = (n.i as isize, n.j as isize);
        let nb = [at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1)];
        if nb.iter().any(|v| v.is_none()) {
            continue;
        }
        let c = values[k];
        let sum: f64 = nb.iter().map(|v| v.unwrap()).sum::<f64>();
        if !c.is_finite() || !sum.is_finite() {
            flagged.push(n.z);
            continue;
        }
        let lap = (sum - 4.0 * c) / h2;
        out_nodes.push(n.z);
        out_values.push(lap / (2.0 * PI));
    }
    let min_density = out_values.iter().copied().fold(f64::INFINITY, f64::min);
    let areas = vec![h2; out_nodes.len()];
    Ok(RieszEstimate {
        charge: Charge::zero("riesz(numeric)").with_density(DensityBlock {
            nodes: out_nodes,
            values: out_values,
            areas,
        }),
        min_density,
        flagged,
        excluded,
    })
}

/// Riesz mass inside the circle |z − c| = ρ by the circulation
/// (1/2π)∮ ∂u/∂n ds, with a fourth-order radial difference.
pub fn flux_mass(u: &dyn ScalarField, center: Complex64, radius: f64, n_theta: usize) -> f64 {
    let d = 1e-3 * radius;
    let mut total = 0.0;
    for t in circle_angles(n_theta, true) {
        let e = Complex64::from_polar(1.0, t);
        let f = |s: f64| u.eval(center + e * (radius + s));
        let du = (f(-2.0 * d) - 8.0 * f(-d) + 8.0 * f(d) - f(2.0 * d)) / (12.0 * d);
        total += du * radius;
    }
    total / n_theta as f64
}

/// A point mass located from a numeric Riesz density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredAtom {
    pub z: Complex64,
    /// Stencil mass collected around the cluster.
    pub mass: f64,
}

/// Groups nodes with |mass| ≥ `threshold` into lattice-connected clusters and
/// returns their positive-mass centroids with the mass collected in a box
/// dilated by two cells.
pub fn recover_atoms(estimate: &RieszEstimate, grid: &Grid, threshold: f64) -> Vec<RecoveredAtom> {
    let Some(d) = estimate.charge.density() else {
        return Vec::new();
    };
    let h = grid.h;
    let origin = grid.origin();
    let key = |z: Complex64| -> (i64, i64) {
        (
            ((z.re - origin.re) / h).round() as i64,
            ((z.im - origin.im) / h).round() as i64,
        )
    };
    let mut cell: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for (z, m) in d.masses() {
        cell.insert(key(z), m);
    }
    let heavy: Vec<(i64, i64)> = cell
        .iter()
        .filter(|(_, m)| m.abs() >= threshold)
        .map(|(k, _)| *k)
        .collect();
    let mut label: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut clusters: Vec<Vec<(i64, i64)>> = Vec::new();
    for &start in &heavy {
        if label.contains_key(&start) {
            continue;
        }
        let id = clusters.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        label.insert(start, id);
        while let Some(p) = stack.pop() {
            members.push(p);
            for di in -1..=1 {
                for dj in -1..=1 {
                    let q = (p.0 + di, p.1 + dj);
                    if !label.contains_key(&q) && cell.get(&q).is_some_and(|m| m.abs() >= threshold) {
                        label.insert(q, id);
                        stack.push(q);
                    }
                }
            }
        }
        clusters.push(members);
    }
    clusters
        .into_iter()
        .map(|members| {
            let (mut i0, mut i1, mut j0, mut j1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
            for &(i, j) in &members {
                i0 = i0.min(i);
                i1 = i1.max(i);
                j0 = j0.min(j);
                j1 = j1.max(j);
            }
            let mut mass = 0.0;
            let mut wsum = 0.0;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in i0 - 2..=i1 + 2 {
                for j in j0 - 2..=j1 + 2 {
                    if let Some(&m) = cell.get(&(i, j)) {
                        mass += m;
                        if m > 0.0 {
                            wsum += m;
                            acc += Complex64::new(i as f64 * h, j as f64 * h) * m;
                        }
                    }
                }
            }
            RecoveredAtom {
                z: origin + acc / wsum.max(f64::MIN_POSITIVE),
                mass,
            }
        })
        .collect()
}

/// ∫_{region} v dν, where region is D ∖ S when `system` is given and the whole
/// charge otherwise. Returns ±∞ when v is −∞ at a point of nonzero mass.
pub fn integrate_against(v: &dyn ScalarField, charge: &Charge, system: Option<&SetSystem>) -> Result<f64> {
    let pts: Vec<(Complex64, f64)> = charge
        .point_masses()
        .filter(|&(z, m)| m != 0.0 && system.is_none_or(|s| !s.in_s(z)))
        .collect();
    let terms: Vec<f64> = pts.par_iter().map(|&(z, m)| v.eval(z) * m).collect();
    sum_extended(&terms)
}

/// Sum allowing one-signed infinities; +∞ with −∞ (or NaN) is indeterminate.
pub(crate) fn sum_extended(terms: &[f64]) -> Result<f64> {
    let pos = terms.contains(&f64::INFINITY);
    let neg = terms.contains(&f64::NEG_INFINITY);
    if terms.iter().any(|t| t.is_nan()) || (pos && neg) {
        return Err(Error::Indeterminate);
    }
    if pos {
        return Ok(f64::INFINITY);
    }
    if neg {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(pairwise_sum(terms))
}

/// Deterministic pairwise (tree) summation.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 32 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// JSON wire format for zero sequences: a plain list of points or a radial
/// generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZeroSpec {
    Radial { radial: RadialSpec },
    Points { points: Vec<ZeroPoint> },
    List(Vec<ZeroPoint>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSpec {
    pub rule: RadialRule,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_count() -> usize {
    DEFAULT_TRUNCATION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroPoint {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default = "one")]
    pub mult: u32,
}

fn one() -> u32 {
    1
}

impl ZeroSpec {
    pub fn resolve(&self, domain: &Domain) -> Result<ZeroSequence> {
        let pts = |v: &[ZeroPoint]| -> Vec<(Complex64, u32)> {
            v.iter().map(|p| (Complex64::new(p.re, p.im), p.mult)).collect()
        };
        match self {
            ZeroSpec::Radial { radial } => {
                if radial.count == 0 {
                    return Err(invalid("count", "radial generator needs count ≥ 1"));
                }
                ZeroSequence::radial(domain, radial.rule, radial.count)
            }
            ZeroSpec::Points { points } | ZeroSpec::List(points) => {
                ZeroSequence::with_multiplicities(domain, &pts(points))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn counting_measure_merges_multiplicity() {
        let d = Domain::unit_disk();
        let z = ZeroSequence::new(&d, vec![c(0.5, 0.0)]).unwrap();
        let n = counting_measure(&z);
        assert_eq!(n.atoms().len(), 1);
        assert_eq!(n.mass(), 1.0);

        let z = ZeroSequence::new(&d, vec![c(0.5, 0.0), c(0.5, 0.0), c(-0.3, 0.0)]).unwrap();
        let n = counting_measure(&z);
        assert_eq!(n.atoms().len(), 2);
        assert_eq!(n.atoms()[0], Atom { z: c(0.5, 0.0), w: 2.0 });
        assert_eq!(n.atoms()[1], Atom { z: c(-0.3, 0.0), w: 1.0 });
        assert_eq!(n.mass(), 3.0);

        assert!(matches!(
            ZeroSequence::new(&d, vec![c(1.5, 0.0)]),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn radial_generator_drops_boundary_tail() {
        let d = Domain::unit_disk();
        let z = ZeroSequence::radial(&d, RadialRule::Geometric, 10_000).unwrap();
        assert!(z.len() < 60);
        assert_eq!(z.len() + z.dropped_tail, 10_000);
        assert!(z.tail_mass < 1e-14);
        assert!(z.points().iter().all(|&p| d.contains(p)));
        let h = ZeroSequence::radial(&d, RadialRule::Harmonic, 1000).unwrap();
        assert_eq!(h.len(), 1000);
        assert!((h.points()[0].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn riesz_of_quadratic() {
        let d = Domain::unit_disk();
        let g = Grid::with_spacing(&d, 0.01).unwrap();
        let est = riesz_measure_numeric(&|z: Complex64| z.norm_sqr(), &g).unwrap();
        let dens = est.charge.density().unwrap();
        for &v in &dens.values {
            assert!((v - 4.0 / (2.0 * PI)).abs() < 1e-8);
        }
        let inner: f64 = dens
            .masses()
            .filter(|(z, _)| z.norm() < 0.5)
            .map(|(_, m)| m)
            .sum();
        assert!((inner - 0.5).abs() < 0.01, "{inner}");
    }

    #[test]
    fn riesz_of_harmonic_vanishes() {
        let d = Domain::unit_disk();
        let g = Grid::with_spacing(&d, 0.01).unwrap();
        let est = riesz_measure_numeric(&|z: Complex64| z.re, &g).unwrap();
        assert!(est.charge.total_variation() < 1e-8, "{}", est.charge.total_variation());
    }

    #[test]
    fn riesz_of_log_with_exclusion_and_flux() {
        let d = Domain::unit_disk();
        let h = 0.01;
        let g = Grid::with_spacing(&d, h)
            .unwrap()
            .excluding(&[c(0.0, 0.0)], 10.0 * h);
        let u = |z: Complex64| z.norm().ln();
        let est = riesz_measure_numeric(&u, &g).unwrap();
        // five-point truncation error ~ h²/r² summed outside the excluded disk
        assert!(est.charge.mass().abs() < 2e-3, "{}", est.charge.mass());
        assert!(est.excluded > 0);
        let m = flux_mass(&u, c(0.0, 0.0), 0.5, 256);
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn riesz_flags_infinite_nodes() {
        let d = Domain::unit_disk();
        let g = Grid::square(&d, 21).unwrap();
        // the centre is a lattice node
        let est = riesz_measure_numeric(&|z: Complex64| z.norm().ln(), &g).unwrap();
        assert!(!est.flagged.is_empty());
    }

    #[test]
    fn integrate_examples() {
        let d = Domain::unit_disk();
        let sys = crate::domain::nested_set_system(&d, 0.25, 0.5, 1.0).unwrap();
        let z = ZeroSequence::new(&d, vec![c(0.3, 0.0), c(0.6, 0.0), c(0.0, -0.7)]).unwrap();
        let n = counting_measure(&z);
        let one = |_: Complex64| 1.0;
        assert_eq!(integrate_against(&one, &n, Some(&sys)).unwrap(), 3.0);

        let v = |z: Complex64| -z.norm().ln();
        let val = integrate_against(&v, &Charge::dirac(c(0.5, 0.0)), Some(&sys)).unwrap();
        assert!((val - 2f64.ln()).abs() < 1e-15);

        let v = |z: Complex64| (-z.norm().ln() + 0.9f64.ln()).max(0.0);
        let z = ZeroSequence::radial(&d, RadialRule::Geometric, 20).unwrap();
        let val = integrate_against(&v, &counting_measure(&z), None).unwrap();
        let oracle: f64 = (1..=20)
            .map(|k| (0.9f64 / (1.0 - 0.5f64.powi(k))).ln().max(0.0))
            .sum();
        assert!((val - oracle).abs() < 1e-14);
        assert!(val.is_finite());
    }

    #[test]
    fn integrate_reports_signed_infinity() {
        let v = |z: Complex64| z.norm().ln();
        let val = integrate_against(&v, &Charge::dirac(c(0.0, 0.0)), None).unwrap();
        assert_eq!(val, f64::NEG_INFINITY);
        let val = integrate_against(&v, &Charge::dirac(c(0.0, 0.0)).scaled(-1.0), None).unwrap();
        assert_eq!(val, f64::INFINITY);
        let both = Charge::dirac(c(0.0, 0.0)).plus(&Charge::dirac(c(0.0, 0.0)).scaled(-2.0));
        // merged atom has weight −1
        assert_eq!(integrate_against(&v, &both, None).unwrap(), f64::INFINITY);
    }

    #[test]
    fn charge_json_roundtrip() {
        let ch = Charge::from_atoms("x", [Atom { z: c(0.1, 0.2), w: 2.0 }]).with_density(DensityBlock {
            nodes: vec![c(0.0, 0.3)],
            values: vec![1.5],
            areas: vec![0.01],
        });
        let s = serde_json::to_string(&ch).unwrap();
        assert!(s.contains(r#""atoms":[{"re":0.1,"im":0.2,"w":2.0}]"#));
        let back: Charge = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ch);
    }

    #[test]
    fn zero_spec_parsing() {
        let d = Domain::unit_disk();
        let s: ZeroSpec = serde_json::from_str(r#"{"radial":{"rule":"1-1/k","count":5}}"#).unwrap();
        assert_eq!(s.resolve(&d).unwrap().len(), 5);
        let s: ZeroSpec = serde_json::from_str(r#"[{"re":0.5},{"re":0.1,"im":0.2,"mult":2}]"#).unwrap();
        assert_eq!(s.resolve(&d).unwrap().len(), 3);
    }
}
