//! Factor a Lie transformation as Φ₁ P_t Φ₂ with Möbius Φ's and a parallel map.
//!
//! Spherical and hyperbolic t are invariants of γ. A Euclidean P_t is
//! conjugate to P_{λt} by a dilation, so only the branch is recovered there.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use liesphere::lie::{cecil_chern_decompose, mobius_extend, parallel_transformation, random_mobius, ParallelKind};

fn main() -> liesphere::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (kind, t) in [(ParallelKind::Spherical, 0.7), (ParallelKind::Euclidean, 1.3), (ParallelKind::Hyperbolic, 0.5)] {
        let phi1 = mobius_extend(&random_mobius(3, 0.5, &mut rng), 1.0)?;
        let phi2 = mobius_extend(&random_mobius(3, 0.5, &mut rng), 1.0)?;
        let g = phi1.compose(&parallel_transformation(kind, t, 3))?.compose(&phi2)?;
        let dec = cecil_chern_decompose(&g)?;
        println!("built {kind:?} t = {t}: found {:?} t = {:.6}, residual {:.1e}", dec.kind, dec.t, dec.residual);
    }
    let p = parallel_transformation(ParallelKind::Spherical, 0.3, 3);
    println!("matrix file for `liesphere decompose`:\n{}", p.to_json()?);
    Ok(())
}
