//! Envelopes of sphere families and generalized cylinders.

use nalgebra::DVector;

use liesphere::immersion::{
    builtin_chart, envelope_residuals, fundamental_forms, generalized_cylinder_chart, radius_cluster, BuiltinChart,
    CircleHost, EnvelopeSpec, FdConfig, NormalSubbundle,
};

fn main() -> liesphere::Result<()> {
    for name in ["cylinder:0.6", "torus:2,0.5", "generic:11"] {
        let spec: EnvelopeSpec = name.parse()?;
        let mut env = spec.build()?;
        env.chart = env.chart.clone().with_fd(FdConfig { richardson: true, ..env.chart.fd_config() });
        let res = envelope_residuals(&env, 5)?;
        let rc = radius_cluster(&env, &[0.1, 0.7], 1e-6)?;
        println!(
            "{name}: |f-g|^2-r^2 {:.1e}, tangency {:.1e}, curvature {:.8} vs 1/r {:.8} (multiplicity {})",
            res.position, res.tangency, rc.found, rc.expected, rc.multiplicity
        );
    }

    // A circle in R^3 pushed along the binormal: a right circular cylinder.
    let circle = builtin_chart(&BuiltinChart::Circle { radius: 1.5, host: CircleHost::Euclidean })?;
    let up = NormalSubbundle { base_point: vec![0.0], frame: vec![DVector::from_vec(vec![0.0, 0.0, 1.0])] };
    let cyl = generalized_cylinder_chart(&circle, &up, 1.0)?;
    let u = [0.8, 0.3];
    let inward = DVector::from_vec(vec![-0.8f64.cos(), -0.8f64.sin(), 0.0]);
    let spec = fundamental_forms(&cyl.chart, &u)?.spectrum_ambient(&inward, 1e-4);
    println!(
        "cylinder over circle: curvatures {:.6?}, holonomy residual {:.1e}",
        spec.eigenvalues, cyl.holonomy_residual
    );
    Ok(())
}
