//! Cayley–Dickson arithmetic: the octonions lose associativity but keep a
//! multiplicative norm, which is what the octonionic projective plane needs.

use liesphere::algebra::{hermitian_projector, multiply, Algebra, AlgebraElement};

fn main() -> liesphere::Result<()> {
    let o = Algebra::O;
    let e = |i| AlgebraElement::unit(o, i);
    let (a, b, c) = (e(1), e(2), e(4));
    let left = multiply(&multiply(&a, &b)?, &c)?;
    let right = multiply(&a, &multiply(&b, &c)?)?;
    println!("(e1 e2) e4 = {:?}", left.coords());
    println!("e1 (e2 e4) = {:?}", right.coords());
    println!("associator size: {:.3}", left.max_abs_diff(&right));

    let x = AlgebraElement::new(o, vec![0.3, -1.0, 0.5, 0.2, 0.0, 0.7, -0.4, 0.1])?;
    let y = AlgebraElement::new(o, vec![1.1, 0.2, -0.6, 0.0, 0.9, 0.3, 0.5, -0.8])?;
    let xy = multiply(&x, &y)?;
    println!("|xy| - |x||y| = {:.2e}", xy.norm() - x.norm() * y.norm());

    // A point of OP² as the projector v v* with v in an affine chart.
    let s = (1.0 + x.norm().powi(2) + y.norm().powi(2)).sqrt();
    let v = [AlgebraElement::real(o, 1.0 / s), x.scale(1.0 / s), y.scale(1.0 / s)];
    let m = hermitian_projector(&v)?;
    println!("trace = {:.12}, Jordan idempotent residual = {:.2e}", m.trace(), m.jordan_idempotent_residual()?);
    Ok(())
}
