//! Curvature spheres of Legendre lifts, and focal tubes.

use liesphere::algebra::Algebra;
use liesphere::immersion::{builtin_chart, BuiltinChart};
use liesphere::legendre::{curvature_spheres, focal_detect, legendre_lift};
use liesphere::plan::{PlanConfig, SamplePlan};

fn main() -> liesphere::Result<()> {
    let chart = builtin_chart(&BuiltinChart::veronese(Algebra::R))?;
    let lift = legendre_lift(&chart)?;
    let normal = [0.6, 0.8];
    for s in curvature_spheres(&lift, &[0.2, -0.1], &normal)? {
        println!(
            "value {:>10}  multiplicity {}  degeneracy {:.1e}  sphere {:.4?}",
            s.principal_value.to_string(),
            s.multiplicity,
            s.degeneracy,
            s.representative.normalized().as_slice()
        );
    }

    // The tube at distance t is focal exactly when cot t is a principal curvature.
    let plan = SamplePlan::generate(&chart, &PlanConfig { max_points: 4, ..Default::default() })?;
    let focal_t = 3f64.sqrt().atan();
    for t in [focal_t, 0.4] {
        let report = focal_detect(&chart, t, &plan)?;
        let drops: Vec<usize> = report.samples.iter().map(|s| s.drop()).collect();
        println!("t = {t:.4}: rank drops {drops:?}");
    }
    Ok(())
}
