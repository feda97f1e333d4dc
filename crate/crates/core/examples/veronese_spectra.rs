//! Principal curvatures of the four standard projective-plane embeddings.
//!
//! Every unit normal at every point sees the same two curvatures ±c with
//! equal multiplicities.

use liesphere::algebra::Algebra;
use liesphere::immersion::{builtin_chart, fundamental_forms, BuiltinChart};
use liesphere::plan::normal_grid;

fn main() -> liesphere::Result<()> {
    for algebra in Algebra::all() {
        let chart = builtin_chart(&BuiltinChart::veronese(algebra))?;
        let (n, p) = (chart.intrinsic_dim(), chart.codim());
        println!("veronese-{}: n = {n}, p = {p}, sphere dim = {}", algebra.symbol(), chart.ambient().dim);
        let u: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 + 1.0).sin()).collect();
        let forms = fundamental_forms(&chart, &u)?;
        for xi in normal_grid(p, 4, 1).iter().take(3) {
            let spec = forms.spectrum(xi, chart.default_cluster_tol())?;
            println!("  values {:>9.6?}  multiplicities {:?}", spec.eigenvalues, spec.multiplicities);
        }
    }
    println!("1/sqrt(3) = {:.6}", 1.0 / 3f64.sqrt());
    Ok(())
}
