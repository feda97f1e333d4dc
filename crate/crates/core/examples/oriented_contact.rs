//! Oriented spheres of the 2-sphere as points on the Lie quadric, and the
//! contact relation before and after Lie transformations.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use liesphere::lie::{
    contact_inner, mobius_extend, oriented_contact, parallel_transformation, random_mobius, sphere_to_quadric,
    OrientedSphere, ParallelKind,
};

fn main() -> liesphere::Result<()> {
    let north = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let a = OrientedSphere::new(north.clone(), 0.4)?;
    // Centers 0.7 apart along a great circle; radii 0.4 and 0.3 touch from inside-out.
    let c = DVector::from_vec(vec![0.7f64.sin(), 0.0, 0.7f64.cos()]);
    let touching = OrientedSphere::new(c.clone(), 0.4 - 0.7)?;
    let apart = OrientedSphere::new(c, 0.1)?;
    println!("quadric point of a: {:?}", sphere_to_quadric(&a).normalized().as_slice());
    println!("contact(a, touching) = {} ({:.2e})", oriented_contact(&a, &touching)?, contact_inner(&a, &touching)?);
    println!("contact(a, apart)    = {} ({:.2e})", oriented_contact(&a, &apart)?, contact_inner(&a, &apart)?);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = mobius_extend(&random_mobius(2, 0.8, &mut rng), 1.0)?.compose(&parallel_transformation(
        ParallelKind::Spherical,
        0.9,
        2,
    ))?;
    let (ga, gt, gp) = (g.apply_sphere(&a)?, g.apply_sphere(&touching)?, g.apply_sphere(&apart)?);
    println!("after g: radius of a = {:.4}", ga.radius());
    println!("contact(ga, g touching) = {}", oriented_contact(&ga, &gt)?);
    println!("contact(ga, g apart)    = {}", oriented_contact(&ga, &gp)?);
    Ok(())
}
