//! The normed division algebras ℝ, ℂ, ℍ, 𝕆 by Cayley–Dickson doubling, and
//! 3×3 Hermitian projectors over them.
//!
//! Doubling convention: `(a, b)(c, d) = (ac − d̄b, da + bc̄)` with
//! conjugate `(a, b)* = (a*, −b)`. With this convention the quaternion units
//! (coordinates 1, 2, 3 of ℍ) satisfy i·j = k.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::jet::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algebra {
    R,
    C,
    H,
    O,
}

impl Algebra {
    /// Real dimension 2^{μ−1}.
    pub fn dim(self) -> usize {
        match self {
            Algebra::R => 1,
            Algebra::C => 2,
            Algebra::H => 4,
            Algebra::O => 8,
        }
    }

    /// μ with dim = 2^{μ−1}.
    pub fn mu(self) -> u32 {
        self.dim().trailing_zeros() + 1
    }

    pub fn all() -> [Algebra; 4] {
        [Algebra::R, Algebra::C, Algebra::H, Algebra::O]
    }

    pub fn is_associative(self) -> bool {
        self != Algebra::O
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Algebra::R => "R",
            Algebra::C => "C",
            Algebra::H => "H",
            Algebra::O => "O",
        }
    }

    pub fn from_name(s: &str) -> Option<Algebra> {
        match s.to_ascii_uppercase().as_str() {
            "R" => Some(Algebra::R),
            "C" => Some(Algebra::C),
            "H" => Some(Algebra::H),
            "O" => Some(Algebra::O),
            _ => None,
        }
    }
}

/// Cayley–Dickson product of two coordinate slices of equal power-of-two length.
pub fn cd_mul<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    if n == 1 {
        return vec![x[0].clone() * y[0].clone()];
    }
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let (c, d) = y.split_at(h);
    let ac = cd_mul(a, c);
    let dbar_b = cd_mul(&cd_conj(d), b);
    let da = cd_mul(d, a);
    let b_cbar = cd_mul(b, &cd_conj(c));
    let mut out = Vec::with_capacity(n);
    out.extend(ac.into_iter().zip(dbar_b).map(|(p, q)| p - q));
    out.extend(da.into_iter().zip(b_cbar).map(|(p, q)| p + q));
    out
}

pub fn cd_conj<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().enumerate().map(|(i, v)| if i == 0 { v.clone() } else { -v.clone() }).collect()
}

pub fn cd_norm_sq<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::cst(0.0), |acc, v| acc + v.sq())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraElement {
    algebra: Algebra,
    coords: Vec<f64>,
}

impl AlgebraElement {
    pub fn new(algebra: Algebra, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != algebra.dim() {
            return Err(GeomError::Contract(format!(
                "{:?} elements have {} coordinates, got {}",
                algebra,
                algebra.dim(),
                coords.len()
            )));
        }
        Ok(AlgebraElement { algebra, coords })
    }

    pub fn real(algebra: Algebra, x: f64) -> Self {
        let mut c = vec![0.0; algebra.dim()];
        c[0] = x;
        AlgebraElement { algebra, coords: c }
    }

    pub fn zero(algebra: Algebra) -> Self {
        Self::real(algebra, 0.0)
    }

    /// Basis unit e_i, 0-based (e_0 = 1).
    pub fn unit(algebra: Algebra, i: usize) -> Self {
        let mut c = vec![0.0; algebra.dim()];
        c[i] = 1.0;
        AlgebraElement { algebra, coords: c }
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn conj(&self) -> Self {
        AlgebraElement { algebra: self.algebra, coords: cd_conj(&self.coords) }
    }

    pub fn norm(&self) -> f64 {
        norm(self)
    }

    pub fn scale(&self, t: f64) -> Self {
        AlgebraElement { algebra: self.algebra, coords: self.coords.iter().map(|x| x * t).collect() }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(AlgebraElement {
            algebra: self.algebra,
            coords: self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(-1.0))
    }

    /// Real part.
    pub fn re(&self) -> f64 {
        self.coords[0]
    }

    /// True when the element is a real multiple of 1.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coords[1..].iter().all(|x| x.abs() <= tol)
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.algebra != o.algebra {
            return Err(GeomError::Contract(format!("algebra mismatch: {:?} vs {:?}", self.algebra, o.algebra)));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.coords.iter().zip(&o.coords).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub fn multiply(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    a.check(b)?;
    Ok(AlgebraElement { algebra: a.algebra, coords: cd_mul(&a.coords, &b.coords) })
}

pub fn norm(a: &AlgebraElement) -> f64 {
    cd_norm_sq(&a.coords).sqrt()
}

/// 3×3 Hermitian matrix over a division algebra. Off-diagonal storage is the
/// upper triangle (1,2), (1,3), (2,3); the lower triangle is its conjugate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix3 {
    pub algebra: Algebra,
    pub diagonal: [f64; 3],
    pub off_diagonal: [AlgebraElement; 3],
}

impl HermitianMatrix3 {
    /// Entry (i, j), 0-based.
    pub fn entry(&self, i: usize, j: usize) -> AlgebraElement {
        if i == j {
            return AlgebraElement::real(self.algebra, self.diagonal[i]);
        }
        let (a, b, flip) = if i < j { (i, j, false) } else { (j, i, true) };
        let k = match (a, b) {
            (0, 1) => 0,
            (0, 2) => 1,
            _ => 2,
        };
        let e = &self.off_diagonal[k];
        if flip {
            e.conj()
        } else {
            e.clone()
        }
    }

    pub fn trace(&self) -> f64 {
        self.diagonal.iter().sum()
    }

    /// The ordinary matrix product MN with entries Σ_j M_ij N_jk.
    pub fn product(&self, other: &HermitianMatrix3) -> Result<[[AlgebraElement; 3]; 3]> {
        if self.algebra != other.algebra {
            return Err(GeomError::Contract("algebra mismatch".into()));
        }
        let mut out: [[AlgebraElement; 3]; 3] =
            std::array::from_fn(|_| std::array::from_fn(|_| AlgebraElement::zero(self.algebra)));
        for (i, row) in out.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                let mut acc = AlgebraElement::zero(self.algebra);
                for j in 0..3 {
                    acc = acc.add(&multiply(&self.entry(i, j), &other.entry(j, k))?)?;
                }
                *cell = acc;
            }
        }
        Ok(out)
    }

    /// max |½(MM + MM) − M| over all entries and coordinates.
    pub fn jordan_idempotent_residual(&self) -> Result<f64> {
        let sq = self.product(self)?;
        let mut worst = 0.0f64;
        for (i, row) in sq.iter().enumerate() {
            for (k, cell) in row.iter().enumerate() {
                worst = worst.max(cell.max_abs_diff(&self.entry(i, k)));
            }
        }
        Ok(worst)
    }

    /// Hermiticity residual: entry(j,i) vs conj(entry(i,j)) is exact by storage,
    /// so only the diagonal realness is meaningful; always 0 for this layout.
    pub fn coordinates(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 + 3 * self.algebra.dim());
        out.extend_from_slice(&self.diagonal);
        for e in &self.off_diagonal {
            out.extend_from_slice(e.coords());
        }
        out
    }
}

/// M = v v*, M_ij = v_i · conj(v_j).
///
/// For 𝕆 the vector must be in one of the affine charts: one entry a positive
/// real multiple of 1. Any two octonions generate an associative subalgebra,
/// so each entry of M is unambiguous.
pub fn hermitian_projector(v: &[AlgebraElement; 3]) -> Result<HermitianMatrix3> {
    let alg = v[0].algebra();
    for e in &v[1..] {
        v[0].check(e)?;
    }
    let total: f64 = v.iter().map(|e| cd_norm_sq(e.coords())).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(GeomError::InvalidInput(format!("|v|² = {total}, expected 1")));
    }
    if alg == Algebra::O && !v.iter().any(|e| e.is_real(1e-14) && e.re() > 0.0) {
        return Err(GeomError::UnsupportedChart("octonionic vectors must have one positive real entry".into()));
    }
    let diagonal = std::array::from_fn(|i| cd_norm_sq(v[i].coords()));
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let mut off = Vec::with_capacity(3);
    for (i, j) in pairs {
        off.push(multiply(&v[i], &v[j].conj())?);
    }
    let off_diagonal: [AlgebraElement; 3] = off.try_into().expect("three entries");
    Ok(HermitianMatrix3 { algebra: alg, diagonal, off_diagonal })
}

/// The standard embedding of 𝔽P² through the affine chart v = (1, x, y)/s:
/// coordinates of √(3/2)·(vv* − I/3) in an orthonormal basis of the
/// traceless Hermitian matrices for ⟨A, B⟩ = Re tr(A∘B). The image lies on
/// the unit sphere of dimension 3·dim𝔽 + 1.
///
/// `x` and `y` each hold `dim𝔽` coordinates.
pub fn projective_plane_point<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    let k = x.len();
    let nx = cd_norm_sq(x);
    let ny = cd_norm_sq(y);
    let inv = (nx.clone() + ny.clone() + 1.0).recip();
    let scale = (1.5f64).sqrt();
    let r2 = std::f64::consts::SQRT_2;
    let m11 = inv.clone();
    let m22 = nx * inv.clone();
    let m33 = ny * inv.clone();
    let mut out = Vec::with_capacity(3 * k + 2);
    out.push((m11.clone() - m22.clone()) * (scale / r2));
    out.push((m11 + m22 - m33 * 2.0) * (scale / 6f64.sqrt()));
    // M12 = conj(x)/s², M13 = conj(y)/s², M23 = x·conj(y)/s²
    let yc = cd_conj(y);
    let m23 = cd_mul(x, &yc);
    for c in cd_conj(x).into_iter().chain(yc).chain(m23) {
        out.push(c * inv.clone() * (scale * r2));
    }
    out
}
