//! A Möbius motion keeps the real Veronese surface Dupin but destroys the
//! constancy of its principal curvatures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use liesphere::algebra::Algebra;
use liesphere::classify::classify;
use liesphere::immersion::{builtin_chart, mobius_deform, BuiltinChart};
use liesphere::lie::random_mobius;
use liesphere::plan::{PlanConfig, SamplePlan};

fn main() -> liesphere::Result<()> {
    let base = builtin_chart(&BuiltinChart::veronese(Algebra::R))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let moved = mobius_deform(&base, &random_mobius(4, 0.6, &mut rng))?;
    let cfg = PlanConfig { max_points: 8, curve_points: 2, ..Default::default() };
    for chart in [&base, &moved] {
        let report = classify(chart, &SamplePlan::generate(chart, &cfg)?)?;
        let v = &report.verdicts;
        let show = |c: &Option<liesphere::classify::Check>| {
            c.as_ref().map(|c| format!("{:?} ({:.1e})", c.verdict, c.residual)).unwrap_or_default()
        };
        println!("{}", report.chart);
        println!("  unipotent {}", show(&v.unipotent));
        println!("  cpc       {}", show(&v.cpc));
        println!("  dupin     {}", show(&v.dupin));
    }
    Ok(())
}
