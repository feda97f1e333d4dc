//! Property tests for the invariants each module promises.

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use liesphere::algebra::{cd_conj, cd_mul, Algebra};
use liesphere::classify::{classify, cpc_check, dupin_check, unipotent_check, Verdict};
use liesphere::immersion::{
    builtin_chart, conformal_to_sphere, fundamental_forms, mobius_deform, radius_cluster, BuiltinChart, EnvelopeSpec,
    FdConfig, ImmersionChart,
};
use liesphere::legendre::{apply_lie_to_lift, curvature_spheres, legendre_lift, tube_chart, PrincipalValue};
use liesphere::lie::{
    mobius_extend, oriented_contact, parallel_transformation, quadric_to_sphere, random_mobius, sphere_to_quadric,
    LieTransformation, OrientedSphere, ParallelKind,
};
use liesphere::minkowski::{projective_equal, projective_residual, ProjectivePoint, Signature, SignedVector};
use liesphere::plan::{PlanConfig, SamplePlan};

fn chart(spec: &str) -> ImmersionChart {
    builtin_chart(&spec.parse::<BuiltinChart>().unwrap()).unwrap()
}

fn unit(v: &[f64]) -> Option<DVector<f64>> {
    let v = DVector::from_column_slice(v);
    let n = v.norm();
    (n > 1e-3).then(|| v / n)
}

fn random_lie(seed: u64, d: usize) -> LieTransformation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = mobius_extend(&random_mobius(d, 0.7, &mut rng), 1.0).unwrap();
    let b = mobius_extend(&random_mobius(d, 0.5, &mut rng), -1.0).unwrap();
    let kind = [ParallelKind::Spherical, ParallelKind::Euclidean, ParallelKind::Hyperbolic][(seed % 3) as usize];
    a.compose(&parallel_transformation(kind, 0.3 + (seed % 7) as f64 * 0.2, d)).unwrap().compose(&b).unwrap()
}

fn sphere_from(x: &[f64], r: f64) -> Option<OrientedSphere> {
    OrientedSphere::new(unit(x)?, r).ok()
}

fn coords(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lie_inner_is_bilinear_and_symmetric(u in coords(6), v in coords(6), w in coords(6), a in -3.0f64..3.0) {
        let sig = Signature::Lie(3);
        let (u, v, w) = (DVector::from_vec(u), DVector::from_vec(v), DVector::from_vec(w));
        let lhs = sig.inner(&(&u * a + &v), &w);
        let rhs = a * sig.inner(&u, &w) + sig.inner(&v, &w);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert_eq!(sig.inner(&u, &v), sig.inner(&v, &u));
    }

    #[test]
    fn validated_maps_preserve_the_inner_product(seed in any::<u64>(), u in coords(6), v in coords(6)) {
        let g = random_lie(seed, 3);
        let sig = Signature::Lie(3);
        let (u, v) = (DVector::from_vec(u).normalize(), DVector::from_vec(v).normalize());
        let before = sig.inner(&u, &v);
        let after = sig.inner(&(g.matrix() * &u), &(g.matrix() * &v));
        prop_assert!((after - before).abs() <= 1e-9 * g.matrix().amax().powi(2));
    }

    #[test]
    fn projective_equality_is_an_equivalence(x in coords(4), r in -3.0f64..3.0, a in 0.1f64..5.0, b in -5.0f64..-0.1) {
        let Some(s) = sphere_from(&x, r) else { return Ok(()) };
        let p = sphere_to_quadric(&s);
        let sig = p.signature();
        let scaled = |k: f64| ProjectivePoint::new(SignedVector::new(sig, p.representative().coords() * k).unwrap()).unwrap();
        let (q, w) = (scaled(a), scaled(b));
        let tol = 1e-10;
        prop_assert!(projective_equal(&p, &p, tol).unwrap());
        prop_assert_eq!(projective_equal(&p, &q, tol).unwrap(), projective_equal(&q, &p, tol).unwrap());
        prop_assert!(projective_equal(&p, &q, tol).unwrap() && projective_equal(&q, &w, tol).unwrap());
        prop_assert!(projective_equal(&p, &w, tol).unwrap());
    }

    #[test]
    fn octonions_are_alternative(a in coords(8), b in coords(8)) {
        let aa_b = cd_mul(&cd_mul(&a, &a), &b);
        let a_ab = cd_mul(&a, &cd_mul(&a, &b));
        let ab_b = cd_mul(&cd_mul(&a, &b), &b);
        let a_bb = cd_mul(&a, &cd_mul(&b, &b));
        for i in 0..8 {
            prop_assert!((aa_b[i] - a_ab[i]).abs() <= 1e-12 * 64.0);
            prop_assert!((ab_b[i] - a_bb[i]).abs() <= 1e-12 * 64.0);
        }
    }

    #[test]
    fn conjugation_reverses_products(a in coords(8), b in coords(8), k in 0usize..4) {
        let dim = Algebra::all()[k].dim();
        let (a, b) = (&a[..dim], &b[..dim]);
        let lhs = cd_conj(&cd_mul(a, b));
        let rhs = cd_mul(&cd_conj(b), &cd_conj(a));
        for (x, y) in lhs.iter().zip(&rhs) {
            prop_assert!((x - y).abs() <= 1e-12 * 16.0);
        }
    }

    #[test]
    fn quadric_is_preserved(seed in any::<u64>(), x in coords(4), r in -3.0f64..3.0) {
        let Some(s) = sphere_from(&x, r) else { return Ok(()) };
        let g = random_lie(seed, 3);
        let img = g.apply(&sphere_to_quadric(&s)).unwrap();
        let v = img.normalized();
        prop_assert!(Signature::Lie(3).inner(&v, &v).abs() <= 1e-9);
        prop_assert!(quadric_to_sphere(&img).is_ok());
    }

    #[test]
    fn contact_is_preserved(seed in any::<u64>(), x in coords(4), r in -3.0f64..3.0, y in coords(4), tangent in any::<bool>()) {
        let (Some(x), Some(y)) = (unit(&x), unit(&y)) else { return Ok(()) };
        let dist = x.dot(&y).clamp(-1.0, 1.0).acos();
        if dist < 1e-2 || PI - dist < 1e-2 {
            return Ok(());
        }
        let r2 = if tangent { r - dist } else { r - dist + 0.3 };
        let s1 = OrientedSphere::new(x, r).unwrap();
        let s2 = OrientedSphere::new(y, r2).unwrap();
        let g = random_lie(seed, 3);
        let before = oriented_contact(&s1, &s2).unwrap();
        prop_assert_eq!(before, tangent);
        prop_assert_eq!(oriented_contact(&g.apply_sphere(&s1).unwrap(), &g.apply_sphere(&s2).unwrap()).unwrap(), before);
    }

    #[test]
    fn parallel_maps_are_additive(s in -2.0f64..2.0, t in -2.0f64..2.0, k in 0usize..3, d in 1usize..6) {
        let kind = [ParallelKind::Spherical, ParallelKind::Euclidean, ParallelKind::Hyperbolic][k];
        let ps = parallel_transformation(kind, s, d);
        let pt = parallel_transformation(kind, t, d);
        let sum = parallel_transformation(kind, s + t, d);
        let diff = (ps.matrix() * pt.matrix() - sum.matrix()).amax();
        prop_assert!(diff <= 1e-10 * sum.matrix().amax().max(1.0), "{diff}");
    }

    #[test]
    fn mobius_iff_point_spheres_stay_points(seed in any::<u64>(), x in coords(4), mobius in any::<bool>()) {
        let Some(x) = unit(&x) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mobius_extend(&random_mobius(3, 0.8, &mut rng), 1.0).unwrap();
        let g = if mobius { m } else { m.compose(&parallel_transformation(ParallelKind::Spherical, 0.7, 3)).unwrap() };
        let point = OrientedSphere::point(x).unwrap();
        let (r, _) = g.apply_sphere(&point).unwrap().reduced_radius();
        let stays_point = r.abs() <= 1e-9 || (PI - r.abs()).abs() <= 1e-9;
        prop_assert_eq!(g.is_mobius(1e-9), mobius);
        prop_assert_eq!(stays_point, mobius);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn finite_differences_match_jets(u in coords(4), xi in coords(3), k in 0usize..3) {
        let spec = ["veronese-C", "sphere-product:2,3,2.5,1.6666666666666667", "ellipsoid:3,2,1.5"][k];
        let exact = chart(spec);
        let n = exact.intrinsic_dim();
        let u: Vec<f64> = u.iter().take(n).map(|x| x * 0.2).collect();
        let fd = exact.clone().finite_differences();
        let a = fundamental_forms(&exact, &u).unwrap();
        let b = fundamental_forms(&fd, &u).unwrap();
        let Some(coords) = unit(&xi[..exact.codim()]) else { return Ok(()) };
        let normal = a.normal_from_frame(coords.as_slice());
        let sa = a.shape_operator_ambient(&normal);
        let sb = b.shape_operator_ambient(&b.project_normal(&normal));
        prop_assert!((sa - sb).amax() <= 1e-5);
    }

    #[test]
    fn second_form_is_symmetric_and_shape_operator_linear(u in coords(4), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let c = chart("veronese-H");
        let u: Vec<f64> = (0..8).map(|i| 0.1 * u[i % 4] + 0.01 * i as f64).collect();
        let forms = fundamental_forms(&c, &u).unwrap();
        for bm in &forms.second_form {
            prop_assert!((bm - bm.transpose()).amax() <= 1e-10);
        }
        let (x, y) = (&forms.normal_frame[0], &forms.normal_frame[3]);
        let lhs = forms.shape_operator_ambient(&(x * a + y * b));
        let rhs = forms.shape_operator_ambient(x) * a + forms.shape_operator_ambient(y) * b;
        prop_assert!((lhs - rhs).amax() <= 1e-9);
    }

    #[test]
    fn gauss_equation_with_finite_differences(u in coords(2)) {
        let c = chart("veronese-R").finite_differences();
        let u: Vec<f64> = u.iter().map(|x| x * 0.3).collect();
        let forms = fundamental_forms(&c, &u).unwrap();
        let dets: f64 = forms.normal_frame.iter().map(|nu| forms.shape_operator_ambient(nu).determinant()).sum();
        // The real Veronese surface is a round projective plane of curvature 1/3.
        prop_assert!((1.0 + dets - 1.0 / 3.0).abs() <= 1e-5, "{}", 1.0 + dets);
    }

    #[test]
    fn lift_lines_are_lightlike(u in coords(4), xi in coords(3), k in 0usize..3) {
        let spec = ["veronese-C", "clifford-torus", "geodesic-sphere:2,0.9"][k];
        let c = chart(spec);
        let lift = legendre_lift(&c).unwrap();
        let u: Vec<f64> = u.iter().take(c.intrinsic_dim()).map(|x| x * 0.2).collect();
        let Some(xi) = unit(&xi[..c.codim()]) else { return Ok(()) };
        let p = lift.point(&u, xi.as_slice()).unwrap();
        let sig = lift.signature();
        for s in [0.0, 0.4, 1.3, 2.9] {
            let v = p.y1.coords() * f64::cos(s) + p.yend.coords() * f64::sin(s);
            prop_assert!(sig.inner(&v, &v).abs() <= 1e-10);
        }
    }

    #[test]
    fn transformed_lift_spheres_are_images(seed in any::<u64>(), u in coords(2), angle in 0.0f64..TAU) {
        let c = chart("veronese-R");
        let lift = legendre_lift(&c).unwrap();
        let g = random_lie(seed, 4);
        let tl = apply_lie_to_lift(&g, &lift).unwrap();
        let u: Vec<f64> = u.iter().map(|x| x * 0.3).collect();
        let xi = [angle.cos(), angle.sin()];
        let before = curvature_spheres(&lift, &u, &xi).unwrap();
        let after = tl.curvature_spheres(&u, &xi).unwrap();
        prop_assert_eq!(after.len(), before.len());
        for s in &before {
            let img = g.matrix() * s.representative.representative().coords();
            let best = after
                .iter()
                .map(|a| projective_residual(&img, &DVector::from_column_slice(&a.representative)))
                .fold(f64::INFINITY, f64::min);
            prop_assert!(best <= 1e-8, "{best}");
        }
    }

    #[test]
    fn tube_spectra_are_cot_shifts(t in 0.1f64..1.4, u in coords(2), angle in 0.0f64..TAU) {
        let c = chart("veronese-R");
        let u: Vec<f64> = u.iter().map(|x| x * 0.3).collect();
        let tube = liesphere::legendre::tube_chart_around(&c, t, &[angle.cos(), angle.sin()]).unwrap();
        let mut p = u.clone();
        p.push(0.0);
        let forms = fundamental_forms(&c, &u).unwrap();
        // Recover ξ from the tube point f_t = cos t f + sin t ξ.
        let xi = (tube.eval(&p).unwrap() - forms.position() * t.cos()) / t.sin();
        let base = forms.spectrum_ambient(&xi, 1e-6).eigenvalues;
        let mut want: Vec<f64> = base.iter().map(|k| 1.0 / ((1.0 / k).atan().rem_euclid(PI) - t).tan()).collect();
        want.push(-1.0 / t.tan());
        if want.iter().any(|w| w.abs() > 50.0) {
            return Ok(());
        }
        want.sort_by(f64::total_cmp);
        let tf = fundamental_forms(&tube, &p).unwrap();
        let xi_t = forms.position() * (-t.sin()) + &xi * t.cos();
        let got = tf.spectrum_ambient(&xi_t, 1e-4).raw;
        prop_assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-4 * (1.0 + b.abs()), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn envelopes_carry_the_radius_curvature(seed in 0u64..1000, s in -0.8f64..0.8, a in -3.0f64..3.0) {
        let mut env = EnvelopeSpec::Generic { seed }.build().unwrap();
        env.chart = env.chart.clone().with_fd(FdConfig { richardson: true, ..env.chart.fd_config() });
        let rc = radius_cluster(&env, &[s, a], 1e-6).unwrap();
        prop_assert!(rc.error() <= 1e-6, "{rc:?}");
        prop_assert_eq!(rc.multiplicity, rc.expected_multiplicity);
    }
}

const SPHERE_CHARTS: &[&str] = &[
    "veronese-R",
    "veronese-C",
    "clifford-torus",
    "sphere-product:1,3,1.5,3",
    "geodesic-sphere:3,0.8",
    "spherical-circle:0.6",
];

const EUCLIDEAN_CHARTS: &[&str] = &["torus:2,0.7", "cyclide:3,2,0.5", "sphere:2,1.5", "ellipsoid:3,2,1"];

fn small_plan(c: &ImmersionChart, seed: u64) -> SamplePlan {
    let cfg = PlanConfig { grid: 3, max_points: 6, curve_points: 2, curve_count: 2, seed, ..Default::default() };
    SamplePlan::generate(c, &cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn verdicts_nest(k in 0usize..10, seed in 0u64..1000, deform in any::<bool>()) {
        let all: Vec<&str> = SPHERE_CHARTS.iter().chain(EUCLIDEAN_CHARTS).copied().collect();
        let mut c = chart(all[k]);
        if deform {
            if !c.ambient().is_unit_sphere() {
                c = conformal_to_sphere(&c).unwrap();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            c = mobius_deform(&c, &random_mobius(c.ambient().dim, 0.5, &mut rng)).unwrap();
        }
        let report = classify(&c, &small_plan(&c, seed)).unwrap();
        prop_assert!(report.nesting_violation().is_none(), "{}: {:?}", c.name(), report.nesting_violation());
    }

    #[test]
    fn shared_curvature_forces_opposite_pair(k in 0usize..4, seed in 0u64..1000) {
        let c = builtin_chart(&BuiltinChart::veronese(Algebra::all()[k])).unwrap();
        let report = unipotent_check(&c, &small_plan(&c, seed)).unwrap();
        if let Some(sc) = report.shared_curvature {
            if sc.points_detected > 0 {
                prop_assert!(sc.check.passed() && sc.check.residual <= 1e-6, "{sc:?}");
            }
        }
    }

    #[test]
    fn dupin_is_stable_under_half_step(k in 0usize..3, seed in 0u64..1000) {
        let spec = ["torus:2,0.7", "veronese-R", "clifford-torus"][k];
        let mut c = chart(spec);
        if !c.ambient().is_unit_sphere() {
            c = conformal_to_sphere(&c).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        c = mobius_deform(&c, &random_mobius(c.ambient().dim, 0.4, &mut rng)).unwrap();
        let plan = SamplePlan { tol: Some(1e-4), ..small_plan(&c, seed) };
        let half = SamplePlan { curve_step: plan.curve_step / 2.0, ..plan.clone() };
        let a = dupin_check(&c, &plan).unwrap().verdicts.dupin.unwrap();
        let b = dupin_check(&c, &half).unwrap().verdicts.dupin.unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        let floor = 1e-12;
        prop_assert!(b.residual.max(floor) / a.residual.max(floor) <= 4.0, "{} vs {}", a.residual, b.residual);
    }

    #[test]
    fn hypersurface_cpc_equals_unipotent(k in 0usize..6, seed in 0u64..1000) {
        let spec = ["torus:2,0.7", "sphere:2,1.5", "ellipsoid:3,2,1", "clifford-torus", "geodesic-sphere:3,0.8", "cyclide:3,2,0.5"][k];
        let c = chart(spec);
        let plan = small_plan(&c, seed);
        let cpc = cpc_check(&c, &plan).unwrap().verdicts.cpc.unwrap();
        let uni = unipotent_check(&c, &plan).unwrap().verdicts.unipotent.unwrap();
        prop_assert_eq!(cpc.verdict == Verdict::Pass, uni.verdict == Verdict::Pass, "{}: cpc {:?} unipotent {:?}", spec, cpc, uni);
    }
}

#[test]
fn curvature_sphere_count_matches_cluster_count() {
    for spec in SPHERE_CHARTS.iter().chain(EUCLIDEAN_CHARTS) {
        let mut c = chart(spec);
        if !c.ambient().is_unit_sphere() {
            c = conformal_to_sphere(&c).unwrap();
        }
        let lift = legendre_lift(&c).unwrap();
        let plan = small_plan(&c, 3);
        let p = c.codim();
        for (u, normals) in plan.points.iter().zip(&plan.normals) {
            let forms = fundamental_forms(&c, u).unwrap();
            for xi in normals {
                let finite = forms.spectrum(xi, lift.cluster_tol()).unwrap().cluster_count();
                let spheres = curvature_spheres(&lift, u, xi).unwrap();
                assert_eq!(spheres.len(), finite + usize::from(p >= 2), "{spec} at {u:?}");
                let infinite = spheres.iter().filter(|s| s.principal_value == PrincipalValue::Infinite).count();
                assert_eq!(infinite, usize::from(p >= 2));
                assert_eq!(spheres.iter().map(|s| s.multiplicity).sum::<usize>(), c.intrinsic_dim() + p - 1);
            }
        }
    }
}

#[test]
fn tube_at_zero_is_the_base() {
    let c = chart("veronese-R");
    let tube = tube_chart(&c, 0.0).unwrap();
    let x = tube.eval(&[0.1, 0.2, 0.3]).unwrap();
    let y = c.eval(&[0.1, 0.2]).unwrap();
    assert!((x - y).amax() < 1e-12);
}
