//! Extended Poisson–Jensen identity u(z₀) + ∫V dν_u = ∫u dμ_V and the
//! Arens–Singer reproducing property h(z₀) = ∫h dμ.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::FieldRef;
use crate::measures::{self, Atom, Charge};
use crate::potentials::{JensenPotential, Shell};

/// Radial × angular node counts per refinement level.
pub const PJ_LEVELS: [(usize, usize); 4] = [(16, 64), (32, 128), (64, 256), (128, 512)];
/// Residuals below this are treated as converged when judging monotonicity.
pub const PJ_FLOOR: f64 = 1e-12;

/// A subharmonic u together with its Riesz charge ν_u = atoms + smooth shells,
/// and a Jensen potential V.
#[derive(Debug, Clone)]
pub struct PJInstance {
    pub label: String,
    pub u: FieldRef,
    /// Point part of ν_u.
    pub nu_atoms: Charge,
    /// Absolutely continuous part of ν_u as weighted shell measures.
    pub nu_shells: Vec<(Shell, f64)>,
    pub v: JensenPotential,
}

impl PJInstance {
    pub fn base_point(&self) -> Complex64 {
        self.v.shell.center
    }

    pub fn rotated(&self, angle: f64) -> PJInstance {
        let c = self.base_point();
        let rot = Complex64::from_polar(1.0, -angle);
        let u = self.u.clone();
        PJInstance {
            label: format!("{}@rot{angle}", self.label),
            u: FieldRef::new(move |z: Complex64| u.eval(c + (z - c) * rot)),
            nu_atoms: self.nu_atoms.rotated(c, angle),
            nu_shells: self
                .nu_shells
                .iter()
                .map(|(s, w)| (s.rotated(c, angle), *w))
                .collect(),
            v: JensenPotential::from_shell(self.v.shell.rotated(c, angle)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementStep {
    pub n_radial: usize,
    pub n_angular: usize,
    #[serde(with = "crate::report::real")]
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PJReport {
    pub label: String,
    #[serde(with = "crate::report::real")]
    pub u_base: f64,
    #[serde(with = "crate::report::real")]
    pub v_against_nu: f64,
    #[serde(with = "crate::report::real")]
    pub u_against_mu: f64,
    /// Residual at the finest level.
    #[serde(with = "crate::report::real")]
    pub residual: f64,
    pub trace: Vec<RefinementStep>,
    /// Residuals never increase along the trace (above [`PJ_FLOOR`]).
    pub monotone: bool,
    #[serde(with = "crate::report::real")]
    pub shell_lo: f64,
    #[serde(with = "crate::report::real")]
    pub shell_hi: f64,
}

fn monotone_trace(res: &[f64]) -> bool {
    res.windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) || w[1] < PJ_FLOOR)
}

/// |u(z₀) + ∫V dν_u − ∫u dμ_V| over the refinement levels in [`PJ_LEVELS`].
pub fn extended_pj_residual(instance: &PJInstance) -> Result<PJReport> {
    let z0 = instance.base_point();
    let u0 = instance.u.eval(z0);
    if !u0.is_finite() {
        return Err(invalid("u", "u(z₀) must be finite"));
    }
    let vfield = &instance.v.test;
    for a in instance.nu_atoms.atoms() {
        if a.z == z0 {
            return Err(invalid("nu", "ν_u may not charge the base point"));
        }
    }
    let atoms_part = measures::integrate_against(vfield, &instance.nu_atoms, None)?;
    let mut trace = Vec::new();
    let mut last = (0.0, 0.0);
    for &(n_r, n_t) in &PJ_LEVELS {
        let mu = instance.v.shell.measure(n_r, n_t);
        mu.require_probability(1e-9)?;
        let mut v_nu = atoms_part;
        for (sh, w) in &instance.nu_shells {
            v_nu += w * measures::integrate_against(vfield, &sh.measure(n_r, n_t), None)?;
        }
        let u_mu = measures::integrate_against(&instance.u, &mu, None)?;
        let residual = (u0 + v_nu - u_mu).abs();
        trace.push(RefinementStep {
            n_radial: n_r,
            n_angular: n_t,
            residual,
        });
        last = (v_nu, u_mu);
    }
    let res: Vec<f64> = trace.iter().map(|s| s.residual).collect();
    Ok(PJReport {
        label: instance.label.clone(),
        u_base: u0,
        v_against_nu: last.0,
        u_against_mu: last.1,
        residual: *res.last().expect("levels"),
        monotone: monotone_trace(&res),
        trace,
        shell_lo: instance.v.shell.s_lo,
        shell_hi: instance.v.shell.s_hi,
    })
}

/// Harmonic test functions about the base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HarmonicSample {
    One,
    ReZ,
    ImZ,
    ReZ2,
    ImZ2,
    ReZ3,
}

impl HarmonicSample {
    pub const STANDARD: [HarmonicSample; 6] = [
        HarmonicSample::One,
        HarmonicSample::ReZ,
        HarmonicSample::ImZ,
        HarmonicSample::ReZ2,
        HarmonicSample::ImZ2,
        HarmonicSample::ReZ3,
    ];

    pub fn eval(self, w: Complex64) -> f64 {
        match self {
            HarmonicSample::One => 1.0,
            HarmonicSample::ReZ => w.re,
            HarmonicSample::ImZ => w.im,
            HarmonicSample::ReZ2 => (w * w).re,
            HarmonicSample::ImZ2 => (w * w).im,
            HarmonicSample::ReZ3 => (w * w * w).re,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HarmonicSample::One => "1",
            HarmonicSample::ReZ => "Re z",
            HarmonicSample::ImZ => "Im z",
            HarmonicSample::ReZ2 => "Re z^2",
            HarmonicSample::ImZ2 => "Im z^2",
            HarmonicSample::ReZ3 => "Re z^3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproducingRow {
    pub sample: &'static str,
    #[serde(with = "crate::report::real")]
    pub at_base: f64,
    #[serde(with = "crate::report::real")]
    pub integral: f64,
    #[serde(with = "crate::report::real")]
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproducingReport {
    pub rows: Vec<ReproducingRow>,
    pub pass: bool,
}

pub const REPRODUCING_TOL: f64 = 1e-7;

/// Checks h(z₀) = ∫h dμ for each sample, h taken about z₀.
pub fn arens_singer_reproducing_check(
    mu: &Charge,
    base: Complex64,
    samples: &[HarmonicSample],
) -> Result<ReproducingReport> {
    mu.require_probability(1e-9)?;
    let rows: Vec<ReproducingRow> = samples
        .iter()
        .map(|&h| {
            let f = move |w: Complex64| h.eval(w - base);
            let at_base = h.eval(Complex64::new(0.0, 0.0));
            let integral = measures::integrate_against(&f, mu, None).unwrap_or(f64::NAN);
            let deviation = (at_base - integral).abs();
            ReproducingRow {
                sample: h.name(),
                at_base,
                integral,
                deviation,
                pass: deviation < REPRODUCING_TOL,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(ReproducingReport { rows, pass })
}

/// ln|(z − a)/(1 − āz)| on the unit disk.
pub fn blaschke_factor_log(a: Complex64, z: Complex64) -> f64 {
    let num = (z - a).norm_sqr();
    if num == 0.0 {
        return f64::NEG_INFINITY;
    }
    0.5 * (num / (Complex64::new(1.0, 0.0) - a.conj() * z).norm_sqr()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Blaschke,
    Harmonic,
    ShellLog,
    Mixed,
}

/// A reproducible battery of instances on the unit disk centred at 0:
/// Blaschke logs, harmonic polynomials, log potentials of off-centre shells
/// and mixtures, each paired with a random shell V away from the charges.
pub fn pj_battery(count: usize, seed: u64) -> Result<Vec<PJInstance>> {
    if count == 0 {
        return Err(Error::EmptyFamily);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = Complex64::new(0.0, 0.0);
    let kinds = [Kind::Blaschke, Kind::Harmonic, Kind::ShellLog, Kind::Mixed];
    (0..count)
        .map(|i| {
            let kind = kinds[i % kinds.len()];
            // V lives in [lo, hi] ⊂ (0.55, 0.98); charges stay in |z| < 0.45.
            let lo = rng.gen_range(0.55..0.75);
            let hi = rng.gen_range(lo + 0.05..0.98);
            let v = JensenPotential::from_shell(Shell::new(o, lo, hi)?);
            let mut parts: Vec<FieldRef> = Vec::new();
            let mut atoms = Vec::new();
            let mut shells = Vec::new();
            let mut add_blaschke = |rng: &mut ChaCha8Rng, parts: &mut Vec<FieldRef>| {
                let n = rng.gen_range(1..=3);
                for _ in 0..n {
                    let a = Complex64::from_polar(rng.gen_range(0.05..0.45), rng.gen_range(0.0..std::f64::consts::TAU));
                    atoms.push(Atom { z: a, w: 1.0 });
                    parts.push(FieldRef::new(move |z: Complex64| blaschke_factor_log(a, z)));
                }
            };
            let add_harmonic = |rng: &mut ChaCha8Rng, parts: &mut Vec<FieldRef>| {
                let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                parts.push(FieldRef::new(move |z: Complex64| {
                    c.iter()
                        .zip(HarmonicSample::STANDARD)
                        .map(|(ci, h)| ci * h.eval(z))
                        .sum::<f64>()
                        + 2.0
                }));
            };
            let mut add_shell = |rng: &mut ChaCha8Rng, parts: &mut Vec<FieldRef>| -> Result<()> {
                let c = Complex64::from_polar(rng.gen_range(0.0..0.2), rng.gen_range(0.0..std::f64::consts::TAU));
                // the base point stays inside the inner hole of the shell
                let s_lo = rng.gen_range(0.05..0.15f64).max(c.norm() + 0.03);
                let s_hi = s_lo + rng.gen_range(0.05..0.15);
                let sh = Shell::new(c, s_lo, s_hi)?;
                let w = rng.gen_range(0.5..2.0);
                shells.push((sh, w));
                parts.push(FieldRef::new(move |z: Complex64| w * sh.log_potential(z)));
                Ok(())
            };
            match kind {
                Kind::Blaschke => add_blaschke(&mut rng, &mut parts),
                Kind::Harmonic => add_harmonic(&mut rng, &mut parts),
                Kind::ShellLog => add_shell(&mut rng, &mut parts)?,
                Kind::Mixed => {
                    add_blaschke(&mut rng, &mut parts);
                    add_harmonic(&mut rng, &mut parts);
                    add_shell(&mut rng, &mut parts)?;
                }
            }
            let u = FieldRef::new(move |z: Complex64| parts.iter().map(|p| p.eval(z)).sum::<f64>());
            Ok(PJInstance {
                label: format!("{kind:?}-{i}").to_lowercase(),
                u,
                nu_atoms: Charge::from_atoms("nu_u", atoms),
                nu_shells: shells,
                v,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn instance(u: FieldRef, atoms: Vec<Atom>, lo: f64, hi: f64) -> PJInstance {
        PJInstance {
            label: "t".into(),
            u,
            nu_atoms: Charge::from_atoms("nu", atoms),
            nu_shells: vec![],
            v: JensenPotential::from_shell(Shell::new(o(), lo, hi).unwrap()),
        }
    }

    #[test]
    fn classical_jensen_near_boundary() {
        let a = Complex64::new(0.5, 0.0);
        let u = FieldRef::new(move |z: Complex64| (z - a).norm().ln());
        let r = extended_pj_residual(&instance(u, vec![Atom { z: a, w: 1.0 }], 0.99, 0.999)).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        assert!((r.u_base - 0.5f64.ln()).abs() < 1e-15);
        // ∫u dμ_V = p_μ(0.5) ≈ ln(shell radius) → 0
        assert!(r.u_against_mu.abs() < 0.02);
    }

    #[test]
    fn harmonic_reduces_to_reproducing() {
        let u = FieldRef::new(|z: Complex64| z.re + 2.0);
        let inst = instance(u, vec![], 0.6, 0.9);
        let r = extended_pj_residual(&inst).unwrap();
        assert!(r.residual < 1e-8);
        let rep = arens_singer_reproducing_check(&inst.v.measure(), o(), &HarmonicSample::STANDARD).unwrap();
        assert!(rep.pass);
        let via_rep = (2.0 - measures::integrate_against(&inst.u, &inst.v.measure(), None).unwrap()).abs();
        assert!((via_rep - r.trace[2].residual).abs() < 1e-9);
    }

    #[test]
    fn single_blaschke_factor() {
        let a = Complex64::new(0.3, 0.0);
        let u = FieldRef::new(move |z: Complex64| blaschke_factor_log(a, z));
        let r = extended_pj_residual(&instance(u, vec![Atom { z: a, w: 1.0 }], 0.995, 0.9995)).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
        assert!((r.v_against_nu - (1.0f64 / 0.3).ln()).abs() < 0.01);
    }

    #[test]
    fn reproducing_examples() {
        let sh = Shell::new(o(), 0.85, 0.95).unwrap().measure(64, 256);
        assert!(arens_singer_reproducing_check(&sh, o(), &HarmonicSample::STANDARD).unwrap().pass);

        let d = Charge::dirac(Complex64::new(0.5, 0.0));
        let rep = arens_singer_reproducing_check(&d, o(), &HarmonicSample::STANDARD).unwrap();
        assert!(!rep.pass);
        assert!(rep.rows[0].pass && !rep.rows[1].pass);
        assert!((rep.rows[1].deviation - 0.5).abs() < 1e-15);

        let pair = Charge::from_atoms(
            "pair",
            [
                Atom { z: Complex64::new(0.5, 0.0), w: 0.5 },
                Atom { z: Complex64::new(-0.5, 0.0), w: 0.5 },
            ],
        );
        let rep = arens_singer_reproducing_check(&pair, o(), &HarmonicSample::STANDARD).unwrap();
        assert!(rep.rows[1].pass && !rep.rows[3].pass);
        assert!((rep.rows[3].deviation - 0.25).abs() < 1e-15);

        assert!(arens_singer_reproducing_check(&pair.scaled(2.0), o(), &HarmonicSample::STANDARD).is_err());
    }

    #[test]
    fn battery_converges_monotonically() {
        for inst in pj_battery(8, 7).unwrap() {
            let r = extended_pj_residual(&inst).unwrap();
            assert!(r.residual < 1e-6, "{r:?}");
            assert!(r.monotone, "{r:?}");
        }
    }

    #[test]
    fn rotation_equivariance() {
        let inst = pj_battery(4, 3).unwrap().pop().unwrap();
        let a = extended_pj_residual(&inst).unwrap().residual;
        let b = extended_pj_residual(&inst.rotated(0.7)).unwrap().residual;
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn atom_at_base_point_is_rejected() {
        let inst = instance(FieldRef::constant(1.0), vec![Atom { z: o(), w: 1.0 }], 0.6, 0.9);
        assert!(extended_pj_residual(&inst).is_err());
    }
}
