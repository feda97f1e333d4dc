//! Acceptance criteria, one test each. Every test prints a single line
//!
//!     [criterion N] PASS|FAIL  summary
//!
//! Run with `cargo test --release --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use liesphere::algebra::Algebra;
use liesphere::classify::{
    antipodal_symmetry_check, cpc_check, dupin_check, sweep_spectra, unipotent_check, KObserved, Verdict,
};
use liesphere::immersion::{
    builtin_chart, envelope_residuals, gauss_curvature, mobius_deform, radius_cluster, BuiltinChart, EnvelopeSpec,
    FdConfig, ImmersionChart,
};
use liesphere::legendre::{focal_detect, legendre_lift, plan_samples, reducibility_rank, PrincipalValue};
use liesphere::lie::{
    cecil_chern_decompose, mobius_extend, oriented_contact, parallel_transformation, random_mobius, sphere_to_quadric,
    LieTransformation, OrientedSphere, ParallelKind,
};
use liesphere::minkowski::{projective_residual, Signature};
use liesphere::plan::{PlanConfig, SamplePlan};

fn line(id: &str, pass: bool, summary: impl AsRef<str>) -> bool {
    println!("[criterion {id}] {}  {}", if pass { "PASS" } else { "FAIL" }, summary.as_ref());
    pass
}

fn veronese(algebra: Algebra) -> ImmersionChart {
    builtin_chart(&BuiltinChart::veronese(algebra)).unwrap()
}

/// At least `want` (u, ξ) samples: points × normals, normals ≥ 2p².
fn dense_plan(chart: &ImmersionChart, want: usize, seed: u64) -> SamplePlan {
    let p = chart.codim();
    let normals = (2 * p * p).max(8);
    let points = want.div_ceil(normals).max(1);
    let cfg = PlanConfig { grid: 64, max_points: points, normals, seed, ..Default::default() };
    let plan = SamplePlan::generate(chart, &cfg).unwrap();
    assert!(plan.sample_count() >= want);
    plan
}

fn runtime_target(algebra: Algebra) -> Duration {
    Duration::from_secs(match algebra {
        Algebra::R | Algebra::C => 5,
        Algebra::H => 30,
        Algebra::O => 120,
    })
}

#[test]
fn criterion_01_veronese_dimensions() {
    // n = 2^μ, p = 2^{μ−1} + 1 in the sphere of dimension n + p.
    let mut pass = true;
    let mut seen = Vec::new();
    for a in Algebra::all() {
        let c = veronese(a);
        let mu = a.mu();
        let (n, p) = (1usize << mu, (1usize << (mu - 1)) + 1);
        let got = (c.intrinsic_dim(), c.codim(), c.ambient().dim);
        pass &= got == (n, p, n + p) && c.ambient().is_unit_sphere();
        seen.push(format!("{}: {got:?}", a.symbol()));
    }
    let ambient_ok = Algebra::all().map(|a| veronese(a).ambient().dim) == [4, 7, 13, 25];
    pass &= ambient_ok;
    assert!(line("1", pass, format!("(n, p, sphere dim) {}", seen.join(", "))));
}

/// The literal (n, p) table (2,3), (4,5), (8,9), (16,17). It cannot hold
/// together with n = 2^μ, p = 2^{μ−1}+1 and sphere dimension n + p = 4, 7,
/// 13, 25, so it is kept as a record of the discrepancy.
#[test]
#[ignore = "literal codimensions 3, 5, 9, 17 contradict p = 2^(μ-1)+1 and the listed sphere dimensions"]
fn criterion_01_literal_codimension_table() {
    let got: Vec<(usize, usize)> = Algebra::all()
        .iter()
        .map(|&a| {
            let c = veronese(a);
            (c.intrinsic_dim(), c.codim())
        })
        .collect();
    let want = vec![(2, 3), (4, 5), (8, 9), (16, 17)];
    let pass = got == want;
    line("1-literal", pass, format!("(n, p) got {got:?}, literal table {want:?}"));
    assert!(pass);
}

#[test]
fn criterion_02_two_unipotency() {
    let mut pass = true;
    let mut parts = Vec::new();
    for a in Algebra::all() {
        let start = Instant::now();
        let chart = veronese(a);
        let plan = dense_plan(&chart, 200, 21);
        let report = unipotent_check(&chart, &plan).unwrap();
        let elapsed = start.elapsed();
        let m = chart.intrinsic_dim() / 2;
        let values = &report.cluster_values;
        let symmetric = values.len() == 2 && (values[0] + values[1]).abs() <= 1e-6;
        let variation = report.constancy_residual.unwrap_or(f64::INFINITY);
        let ok = report.k_observed == Some(KObserved::Exact(2))
            && report.multiplicities == vec![vec![m, m]]
            && symmetric
            && variation <= 1e-6
            && report.verdicts.unipotent.as_ref().is_some_and(|c| c.passed())
            && elapsed <= runtime_target(a);
        pass &= ok;
        parts.push(format!(
            "{}: {} samples, c = {:.9}, mult {:?}, var {:.1e}, {:.2}s",
            a.symbol(),
            plan.sample_count(),
            values.last().copied().unwrap_or(f64::NAN),
            report.multiplicities,
            variation,
            elapsed.as_secs_f64()
        ));
        if a == Algebra::R {
            // Gauss: K = 1 + det A_ξ₁ + det A_ξ₂ = 1 − 2c², and ψ_ℝ is the
            // round projective plane of curvature 1/3, so c = 1/√3.
            let oracle = ((1.0 - 1.0 / 3.0) / 2.0f64).sqrt();
            let c = values[1];
            let k = gauss_curvature(&liesphere::immersion::fundamental_forms(&chart, &[0.2, -0.3]).unwrap());
            let ok_r = (c - oracle).abs() <= 1e-6 && (k - 1.0 / 3.0).abs() <= 1e-9;
            pass &= ok_r;
            parts.push(format!("|c - 1/sqrt3| = {:.1e}, K = {k:.12}", (c - oracle).abs()));
        }
    }
    assert!(line("2", pass, parts.join("; ")));
}

#[test]
fn criterion_03_cpc_converse() {
    let mut pass = true;
    let mut parts = Vec::new();
    for a in Algebra::all() {
        let chart = veronese(a);
        let cfg = PlanConfig {
            max_points: 4,
            grid: 64,
            curve_points: 4,
            curve_count: 5,
            tol: Some(1e-5),
            seed: 5,
            ..Default::default()
        };
        let plan = SamplePlan::generate(&chart, &cfg).unwrap();
        let report = cpc_check(&chart, &plan).unwrap();
        let check = report.verdicts.cpc.clone().unwrap();
        let ok = check.passed() && check.residual <= 1e-5 && report.curves.cpc_curves >= 20;
        pass &= ok;
        parts.push(format!("{}: {} curves, residual {:.1e}", a.symbol(), report.curves.cpc_curves, check.residual));
    }
    assert!(line("3", pass, parts.join("; ")));
}

#[test]
fn criterion_04_dupin_survives_mobius_unipotency_does_not() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, a) in Algebra::all().into_iter().enumerate() {
        let base = veronese(a);
        let mut rng = ChaCha8Rng::seed_from_u64(7 + i as u64);
        let chart = mobius_deform(&base, &random_mobius(base.ambient().dim, 0.6, &mut rng)).unwrap();
        let cfg =
            PlanConfig { grid: 64, max_points: 4, curve_points: 2, tol: Some(1e-4), seed: 9, ..Default::default() };
        let plan = SamplePlan::generate(&chart, &cfg).unwrap();
        let dupin = dupin_check(&chart, &plan).unwrap();
        let uni = unipotent_check(&chart, &plan).unwrap();
        let d = dupin.verdicts.dupin.clone().unwrap();
        let variation = uni.constancy_residual.unwrap_or(0.0);
        let u = uni.verdicts.unipotent.clone().unwrap();
        let ok = d.passed() && d.residual <= 1e-4 && u.verdict == Verdict::Fail && variation >= 1e-2;
        pass &= ok;
        parts.push(format!(
            "{}: dupin {:.1e} ({} lines), unipotent variation {:.2e}",
            a.symbol(),
            d.residual,
            dupin.curves.dupin_curves,
            variation
        ));
    }
    assert!(line("4", pass, parts.join("; ")));
}

#[test]
fn criterion_05_antipodal_symmetry() {
    let mut pass = true;
    let mut parts = Vec::new();
    for a in Algebra::all() {
        let chart = veronese(a);
        let plan = dense_plan(&chart, 100, 13);
        let r = antipodal_symmetry_check(&chart, &plan).unwrap();
        let ok = r.max_residual <= 1e-6 && r.multiplicities_equal && r.n_even && r.pairs > 0 && r.check.passed();
        pass &= ok;
        parts.push(format!("{}: {} pairs, residual {:.1e}", a.symbol(), r.pairs, r.max_residual));
    }
    assert!(line("5", pass, parts.join("; ")));
}

fn random_unit(rng: &mut impl Rng, k: usize) -> DVector<f64> {
    let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    v.normalize()
}

/// (cos r, x, sin r) written out directly.
fn quadric_oracle(x: &DVector<f64>, r: f64) -> DVector<f64> {
    let mut v = DVector::zeros(x.len() + 2);
    v[0] = r.cos();
    v.rows_mut(1, x.len()).copy_from(x);
    v[x.len() + 1] = r.sin();
    v
}

#[test]
fn criterion_06_parallel_transform_adds_to_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(1..7);
        let x = random_unit(&mut rng, d + 1);
        let r = rng.random_range(-3.0..3.0);
        let t = rng.random_range(-3.0..3.0);
        let s = OrientedSphere::new(x.clone(), r).unwrap();
        let image = parallel_transformation(ParallelKind::Spherical, t, d).apply(&sphere_to_quadric(&s)).unwrap();
        worst = worst.max(projective_residual(&image.normalized(), &quadric_oracle(&x, r + t)));
    }
    assert!(line("6", worst <= 1e-12, format!("1000 samples, max projective residual {worst:.1e}")));
}

fn random_lie(rng: &mut ChaCha8Rng, d: usize) -> LieTransformation {
    let phi1 = mobius_extend(&random_mobius(d, 0.7, rng), 1.0).unwrap();
    let phi2 = mobius_extend(&random_mobius(d, 0.7, rng), if rng.random_bool(0.5) { 1.0 } else { -1.0 }).unwrap();
    let kind = [ParallelKind::Spherical, ParallelKind::Euclidean, ParallelKind::Hyperbolic][rng.random_range(0..3)];
    let t = rng.random_range(-2.5..2.5);
    phi1.compose(&parallel_transformation(kind, t, d)).unwrap().compose(&phi2).unwrap()
}

#[test]
fn criterion_07_cecil_chern_factorization() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut count = 0;
    for d in [3, 7] {
        for _ in 0..100 {
            let g = random_lie(&mut rng, d);
            count += 1;
            match cecil_chern_decompose(&g) {
                Ok(dec) => {
                    let rebuilt = dec.phi1.matrix() * parallel_matrix(&dec) * dec.phi2.matrix();
                    let plus = (g.matrix() - &rebuilt).amax();
                    let minus = (g.matrix() + &rebuilt).amax();
                    worst = worst.max(plus.min(minus));
                }
                Err(_) => failures += 1,
            }
        }
    }
    let pass = worst <= 1e-8 && failures == 0;
    assert!(line("7", pass, format!("{count} products (d = 3, 7), max residual {worst:.1e}, {failures} failures")));
}

fn parallel_matrix(dec: &liesphere::lie::Decomposition) -> DMatrix<f64> {
    let d = dec.phi1.base_dim();
    match dec.kind {
        Some(k) => parallel_transformation(k, dec.t, d).matrix().clone(),
        None => DMatrix::identity(d + 3, d + 3),
    }
}

/// Oriented tangency by construction: the two candidate contact points on
/// the great circle through the centers, with matching oriented normals.
fn tangent_geometrically(x1: &DVector<f64>, r1: f64, x2: &DVector<f64>, r2: f64) -> bool {
    let along = x2 - x1 * x1.dot(x2);
    let u = along.normalize();
    for sign in [1.0, -1.0] {
        let v1 = &u * sign;
        let p = x1 * r1.cos() + &v1 * r1.sin();
        if (p.dot(x2) - r2.cos()).abs() > 1e-9 {
            continue;
        }
        let v2 = (&p - x2 * r2.cos()) / r2.sin();
        let n1 = x1 * -r1.sin() + &v1 * r1.cos();
        let n2 = x2 * -r2.sin() + v2 * r2.cos();
        if (n1 - n2).amax() < 1e-7 {
            return true;
        }
    }
    false
}

#[test]
fn criterion_08_oriented_contact() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = 3;
    let mut pairs = Vec::new();
    let away_from_poles = |rng: &mut ChaCha8Rng| {
        let r: f64 = rng.random_range(0.2..PI - 0.2);
        if rng.random_bool(0.5) {
            r
        } else {
            -r
        }
    };
    while pairs.len() < 1000 {
        let x1 = random_unit(&mut rng, d + 1);
        let w = random_unit(&mut rng, d + 1);
        let w = (&w - &x1 * x1.dot(&w)).normalize();
        let r1 = away_from_poles(&mut rng);
        let dist: f64 = rng.random_range(0.2..PI - 0.2);
        let x2 = &x1 * dist.cos() + &w * dist.sin();
        let tangent = pairs.len() < 500;
        let r2 = if tangent {
            if rng.random_bool(0.5) {
                r1 - dist
            } else {
                r1 + dist
            }
        } else {
            r1 - dist + rng.random_range(0.05..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
        };
        // Skip radii at which the sphere degenerates to a point.
        if (r2.sin()).abs() < 0.05 {
            continue;
        }
        pairs.push((x1, r1, x2, r2, tangent));
    }
    let mut agree = 0;
    let mut by_construction = 0;
    let spheres: Vec<(OrientedSphere, OrientedSphere, bool)> = pairs
        .iter()
        .map(|(x1, r1, x2, r2, tangent)| {
            let geometric = tangent_geometrically(x1, *r1, x2, *r2);
            by_construction += usize::from(geometric == *tangent);
            let s1 = OrientedSphere::new(x1.clone(), *r1).unwrap();
            let s2 = OrientedSphere::new(x2.clone(), *r2).unwrap();
            let algebraic = oriented_contact(&s1, &s2).unwrap();
            agree += usize::from(algebraic == geometric);
            (s1, s2, algebraic)
        })
        .collect();
    let mut invariant = 0;
    for _ in 0..20 {
        let g = random_lie(&mut rng, d);
        let sig = Signature::Lie(d);
        let ok = spheres.iter().all(|(s1, s2, verdict)| {
            let a = g.apply(&sphere_to_quadric(s1)).unwrap().normalized();
            let b = g.apply(&sphere_to_quadric(s2)).unwrap().normalized();
            (sig.inner(&a, &b).abs() <= 1e-9) == *verdict
        });
        invariant += usize::from(ok);
    }
    let pass = agree == 1000 && by_construction == 1000 && invariant == 20;
    assert!(line(
        "8",
        pass,
        format!("algebraic = geometric on {agree}/1000 (500 tangent), invariant under {invariant}/20 transformations")
    ));
}

#[test]
fn criterion_09_focal_tube() {
    let chart = veronese(Algebra::R);
    let plan = dense_plan(&chart, 200, 19);
    let c = 1.0 / 3f64.sqrt();
    let focal = focal_detect(&chart, (1.0 / c).atan(), &plan).unwrap();
    let generic = focal_detect(&chart, 0.4, &plan).unwrap();
    let ones = focal.samples.iter().filter(|s| s.drop() == 1).count();
    let full = generic.samples.iter().filter(|s| s.drop() == 0).count();
    let pass = focal.samples.len() >= 200 && ones == focal.samples.len() && full == generic.samples.len();
    assert!(line(
        "9",
        pass,
        format!(
            "cot t = c: drop 1 at {ones}/{}; t = 0.4: full rank at {full}/{}",
            focal.samples.len(),
            generic.samples.len()
        )
    ));
}

#[test]
fn criterion_10_irreducibility_rank() {
    let chart = veronese(Algebra::R);
    let lift = legendre_lift(&chart).unwrap();
    let plan = dense_plan(&chart, 64, 10);
    let samples = plan_samples(&plan);
    let ranks: Vec<usize> = (0..3).map(|f| reducibility_rank(&lift, f, &samples).unwrap().rank).collect();
    let sphere = builtin_chart(&"geodesic-sphere:2,0.7".parse().unwrap()).unwrap();
    let sphere_lift = legendre_lift(&sphere).unwrap();
    let cfg = PlanConfig { grid: 8, max_points: 64, ..Default::default() };
    let sphere_plan = SamplePlan::generate(&sphere, &cfg).unwrap();
    let one_side: Vec<(Vec<f64>, Vec<f64>)> = sphere_plan.points.iter().map(|u| (u.clone(), vec![1.0])).collect();
    let hyper = reducibility_rank(&sphere_lift, 0, &one_side).unwrap();
    let pass = samples.len() >= 50 && ranks.iter().all(|&r| r >= 6) && hyper.rank == 1;
    assert!(line(
        "10",
        pass,
        format!(
            "veronese-R family ranks {ranks:?} from {} samples in R^7; hypersphere family rank {}",
            samples.len(),
            hyper.rank
        )
    ));
}

#[test]
fn criterion_11_envelopes() {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["cylinder:0.6", "torus:2,0.5", "generic:11"] {
        let mut env = name.parse::<EnvelopeSpec>().unwrap().build().unwrap();
        env.chart = env.chart.clone().with_fd(FdConfig { richardson: true, ..env.chart.fd_config() });
        let res = envelope_residuals(&env, 6).unwrap();
        let dom = env.chart.domain().shrunk(0.8);
        let mut worst = 0.0f64;
        let mut mult_ok = true;
        for i in 0..5 {
            let s = i as f64 / 4.0;
            let p: Vec<f64> = dom.lo.iter().zip(&dom.hi).map(|(lo, hi)| lo + (hi - lo) * (0.1 + 0.8 * s)).collect();
            let rc = radius_cluster(&env, &p, 1e-6).unwrap();
            worst = worst.max(rc.error());
            mult_ok &= rc.multiplicity == rc.expected_multiplicity;
        }
        let ok = res.position <= 1e-9 && res.tangency <= 1e-9 && worst <= 1e-6 && mult_ok;
        pass &= ok;
        parts.push(format!("{name}: residuals {:.1e}/{:.1e}, |kappa - 1/r| {worst:.1e}", res.position, res.tangency));
    }
    assert!(line("11", pass, parts.join("; ")));
}

#[test]
fn criterion_12_curvature_sphere_formula() {
    let chart = veronese(Algebra::C);
    let lift = legendre_lift(&chart).unwrap();
    let plan = dense_plan(&chart, 100, 12);
    let samples = plan_samples(&plan);
    let mut worst = 0.0f64;
    let mut worst_pencil = 0.0f64;
    let mut infinite_ok = true;
    for (u, xi) in samples.iter().take(100) {
        let p = lift.point(u, xi).unwrap();
        // Y₁ = (1, f, 0) and Y_end = (0, ξ, 1) assembled here from the chart.
        let f = chart.eval(u).unwrap();
        let m = f.len();
        let mut y1 = DVector::zeros(m + 2);
        y1[0] = 1.0;
        y1.rows_mut(1, m).copy_from(&f);
        let mut yend = DVector::zeros(m + 2);
        yend.rows_mut(1, m).copy_from(&p.xi);
        yend[m + 1] = 1.0;
        let spheres = lift.curvature_spheres_at(&p).unwrap();
        let pencil = lift.pencil_spheres_at(&p).unwrap();
        for s in &spheres {
            let expected = match s.principal_value {
                PrincipalValue::Finite(k) => &y1 * k + &yend,
                PrincipalValue::Infinite => {
                    infinite_ok &= s.multiplicity == 2;
                    y1.clone()
                }
            };
            worst = worst.max(projective_residual(&s.representative.normalized(), &expected));
            let nearest = pencil
                .iter()
                .map(|q| projective_residual(&DVector::from_column_slice(&q.representative), &expected))
                .fold(f64::INFINITY, f64::min);
            worst_pencil = worst_pencil.max(nearest);
        }
        infinite_ok &= spheres.iter().filter(|s| s.principal_value == PrincipalValue::Infinite).count() == 1;
        infinite_ok &= spheres.iter().map(|s| s.multiplicity).sum::<usize>() == 4 + 3 - 1;
    }
    let pass = worst <= 1e-8 && worst_pencil <= 1e-8 && infinite_ok;
    assert!(line(
        "12",
        pass,
        format!("100 samples: [kY1 + Yend] residual {worst:.1e}, pencil residual {worst_pencil:.1e}, point sphere multiplicity 2: {infinite_ok}")
    ));
}

#[test]
fn sweep_covers_two_hundred_samples_per_algebra() {
    for a in [Algebra::R, Algebra::C] {
        let chart = veronese(a);
        assert!(sweep_spectra(&chart, &dense_plan(&chart, 200, 1)).unwrap().len() >= 200);
    }
}
