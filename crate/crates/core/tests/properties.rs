use std::f64::consts::PI;

use balayage_lab::averaging::{circle_mean, QuadratureConfig};
use balayage_lab::domain::{admissible_radius_function, Domain, Grid};
use balayage_lab::measures::{integrate_against, riesz_measure_numeric, Atom, Charge};
use balayage_lab::poisson_jensen::{extended_pj_residual, pj_battery};
use balayage_lab::potentials::{green_function, JensenPotential, Shell};
use balayage_lab::report::{fmt12, round12};
use balayage_lab::weighted::ProductFunction;
use balayage_lab::Complex64;
use proptest::prelude::*;

fn polar(r: f64, t: f64) -> Complex64 {
    Complex64::from_polar(r, t)
}

fn domains() -> impl Strategy<Value = Domain> {
    prop_oneof![
        Just(Domain::unit_disk()),
        (-1.0..1.0f64, -1.0..1.0f64, 0.5..3.0f64).prop_map(|(x, y, r)| Domain::disk(Complex64::new(x, y), r).unwrap()),
        (0.05..0.5f64, 0.6..2.0f64).prop_map(|(a, b)| Domain::annulus(Complex64::new(0.3, -0.2), a, b).unwrap()),
    ]
}

/// A point of `d` from polar coordinates u, t ∈ [0, 1).
fn point_in(d: &Domain, u: f64, t: f64) -> Complex64 {
    let (lo, hi) = (d.inner_radius(), d.outer_radius());
    let r = lo + (hi - lo) * (0.02 + 0.96 * u);
    d.center() + polar(r, 2.0 * PI * t)
}

fn atoms(n: usize) -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::vec((0.0..0.9f64, 0.0..1.0f64, -2.0..2.0f64), 1..n).prop_map(|v| {
        v.into_iter()
            .map(|(r, t, w)| Atom {
                z: polar(r, 2.0 * PI * t),
                w,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn admissible_disks_stay_inside(d in domains(), u in 0.0..1.0f64, t in 0.0..1.0f64, f in 0.05..0.95f64) {
        let z = point_in(&d, u, t);
        let r = admissible_radius_function(&d, f).unwrap();
        prop_assert!(d.contains_closed_disk(z, r.eval(z)));
        let rh = r.smoothed().eval(z);
        prop_assert!(rh > 0.0 && rh <= r.eval(z));
    }

    #[test]
    fn green_is_symmetric_and_positive(d in domains(), u1 in 0.0..1.0f64, t1 in 0.0..1.0f64, u2 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
        let (z, w) = (point_in(&d, u1, t1), point_in(&d, u2, t2));
        prop_assume!((z - w).norm() > 1e-6);
        let a = green_function(&d, z, w).unwrap();
        let b = green_function(&d, w, z).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn integration_is_linear(a in atoms(8), b in atoms(8), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let (mu, nu) = (Charge::from_atoms("a", a), Charge::from_atoms("b", b));
        let v1 = |z: Complex64| z.re * z.im + 1.0;
        let v2 = |z: Complex64| (z.norm_sqr() + 0.5).ln();
        let combo = |z: Complex64| s * v1(z) + t * v2(z);
        let lhs = integrate_against(&combo, &mu, None).unwrap();
        let rhs = s * integrate_against(&v1, &mu, None).unwrap() + t * integrate_against(&v2, &mu, None).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        let joint = integrate_against(&v1, &mu.plus(&nu.scaled(s)), None).unwrap();
        let split = integrate_against(&v1, &mu, None).unwrap() + s * integrate_against(&v1, &nu, None).unwrap();
        prop_assert!((joint - split).abs() < 1e-12 * (1.0 + joint.abs()));
    }

    #[test]
    fn circle_means_of_log_potentials_increase(a in atoms(5), x in -0.3..0.3f64, y in -0.3..0.3f64) {
        // positive weights make p_μ subharmonic
        let mu = Charge::from_atoms("pos", a.into_iter().map(|at| Atom { z: at.z, w: at.w.abs() + 0.1 }));
        let z = Complex64::new(x, y);
        let p = |w: Complex64| mu.point_masses().map(|(q, m)| m * (w - q).norm().ln()).sum::<f64>();
        let cfg = QuadratureConfig::default();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=8 {
            let v = circle_mean(&p, z, 0.2 * k as f64, &cfg).value;
            prop_assert!(v >= prev - 1e-7, "r = {}: {} < {}", 0.2 * k as f64, v, prev);
            prev = v;
        }
    }

    #[test]
    fn riesz_estimate_is_linear(s in -2.0..2.0f64, x in -0.5..0.5f64, y in -0.5..0.5f64) {
        let d = Domain::unit_disk();
        let g = Grid::square(&d, 40).unwrap();
        let u1 = |z: Complex64| z.norm_sqr() * z.re;
        let u2 = move |z: Complex64| ((z - Complex64::new(x, y)).norm_sqr() + 0.3).ln();
        let both = move |z: Complex64| u1(z) + s * u2(z);
        let m1 = riesz_measure_numeric(&u1, &g).unwrap().charge.mass();
        let m2 = riesz_measure_numeric(&u2, &g).unwrap().charge.mass();
        let m = riesz_measure_numeric(&both, &g).unwrap().charge.mass();
        prop_assert!((m - (m1 + s * m2)).abs() < 1e-9 * (1.0 + m.abs()));
    }

    #[test]
    fn blaschke_logs_are_nonpositive(zs in prop::collection::vec((0.0..0.99f64, 0.0..1.0f64), 1..12), u in 0.0..1.0f64, t in 0.0..1.0f64) {
        let d = Domain::unit_disk();
        let zeros: Vec<(Complex64, f64)> = zs.iter().map(|&(r, a)| (polar(r, 2.0 * PI * a), 1.0)).collect();
        let b = ProductFunction::disk(&d, zeros).unwrap();
        let z = polar(0.999 * u, 2.0 * PI * t);
        prop_assert!(b.ln_abs(z) <= 1e-12);
    }

    #[test]
    fn jensen_potentials_vanish_outside_and_are_nonnegative(lo in 0.2..0.8f64, w in 0.02..0.19f64, u in 0.0..0.999f64, t in 0.0..1.0f64) {
        let j = JensenPotential::from_shell(Shell::new(Complex64::new(0.0, 0.0), lo, lo + w).unwrap());
        let z = polar(u, 2.0 * PI * t);
        let v = j.eval(z);
        prop_assert!(v >= -1e-12);
        if u >= lo + w {
            prop_assert!(v.abs() < 1e-12);
        }
        if u > 1e-3 && u < lo {
            prop_assert!((v - (j.shell.mean_log() - u.ln())).abs() < 1e-10);
        }
    }

    #[test]
    fn rounding_is_idempotent(x in -1e12..1e12f64, e in -40i32..40) {
        let y = x * 10f64.powi(e);
        let r = round12(y);
        prop_assert_eq!(round12(r), r);
        let back: f64 = fmt12(y).parse().unwrap();
        prop_assert_eq!(back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pj_residual_is_rotation_covariant(seed in 0u64..1000, angle in 0.0..(2.0 * PI)) {
        let inst = pj_battery(1, seed).unwrap().remove(0);
        let a = extended_pj_residual(&inst).unwrap();
        let b = extended_pj_residual(&inst.rotated(angle)).unwrap();
        prop_assert!((a.u_base - b.u_base).abs() < 1e-9);
        prop_assert!(b.residual < 1e-6);
    }
}
