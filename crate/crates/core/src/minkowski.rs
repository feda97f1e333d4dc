//! Indefinite inner products on ℝ^{d+3}_2 (Lie) and ℝ^{d+2}_1 (Möbius).
//!
//! Documentation indexes coordinates from 1 to match the usual e_1, …, e_{d+3}
//! notation; storage is 0-based. The Lie weights are (−1, +1, …, +1, −1) and
//! the Möbius weights are (−1, +1, …, +1).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Orthogonality residual (max-norm) above which a matrix is rejected.
pub const ORTHOGONALITY_THRESHOLD: f64 = 1e-8;

/// Pivots with |⟨v,v⟩| below this are rejected during indefinite Gram–Schmidt.
pub const PIVOT_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "d", rename_all = "lowercase")]
pub enum Signature {
    /// ℝ^{d+3}_2, the ambient space of the Lie quadric over 𝕊^d.
    Lie(usize),
    /// ℝ^{d+2}_1, the ambient space of the Möbius quadric 𝕊^d.
    Mobius(usize),
}

impl Signature {
    pub fn dim(&self) -> usize {
        match *self {
            Signature::Lie(d) => d + 3,
            Signature::Mobius(d) => d + 2,
        }
    }

    /// The base sphere dimension d.
    pub fn base_dim(&self) -> usize {
        match *self {
            Signature::Lie(d) | Signature::Mobius(d) => d,
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        let n = self.dim();
        match self {
            Signature::Lie(_) if i == 0 || i == n - 1 => -1.0,
            Signature::Mobius(_) if i == 0 => -1.0,
            _ => 1.0,
        }
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.weight(i))
    }

    /// The Gram matrix J = diag(weights).
    pub fn gram(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.weights())
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.iter().zip(v.iter()).enumerate().map(|(i, (a, b))| self.weight(i) * a * b).sum()
    }
}

/// A coordinate vector tagged with the metric it lives under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedVector {
    coords: DVector<f64>,
    signature: Signature,
}

impl SignedVector {
    pub fn new(signature: Signature, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != signature.dim() {
            return Err(GeomError::Contract(format!(
                "{:?} needs {} coordinates, got {}",
                signature,
                signature.dim(),
                coords.len()
            )));
        }
        Ok(SignedVector { coords, signature })
    }

    pub fn from_slice(signature: Signature, coords: &[f64]) -> Result<Self> {
        Self::new(signature, DVector::from_column_slice(coords))
    }

    /// Standard basis vector e_i with 1-based `i`.
    pub fn basis(signature: Signature, i: usize) -> Self {
        let mut c = DVector::zeros(signature.dim());
        c[i - 1] = 1.0;
        SignedVector { coords: c, signature }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn self_inner(&self) -> f64 {
        self.signature.inner(&self.coords, &self.coords)
    }

    pub fn scaled(&self, t: f64) -> Self {
        SignedVector { coords: &self.coords * t, signature: self.signature }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|x| *x == 0.0)
    }
}

/// Σ w_i u_i v_i, the signed inner product.
pub fn signed_inner(u: &SignedVector, v: &SignedVector) -> Result<f64> {
    if u.signature != v.signature {
        return Err(GeomError::Contract(format!("signature mismatch: {:?} vs {:?}", u.signature, v.signature)));
    }
    Ok(u.signature.inner(&u.coords, &v.coords))
}

/// A point of projective space ℙ(ℝ^{d+3}_2) or ℙ(ℝ^{d+2}_1), kept through a representative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectivePoint {
    representative: SignedVector,
}

impl ProjectivePoint {
    pub fn new(representative: SignedVector) -> Result<Self> {
        if representative.is_zero() {
            return Err(GeomError::InvalidInput("zero representative".into()));
        }
        Ok(ProjectivePoint { representative })
    }

    pub fn representative(&self) -> &SignedVector {
        &self.representative
    }

    pub fn signature(&self) -> Signature {
        self.representative.signature
    }

    /// Representative scaled to unit Euclidean norm (sign kept).
    pub fn normalized(&self) -> DVector<f64> {
        let c = self.representative.coords();
        c / c.norm()
    }
}

/// [p] = [q] iff the normalized representatives are parallel: the smaller
/// singular value of the 2×N matrix they form is at most `tol`.
pub fn projective_equal(p: &ProjectivePoint, q: &ProjectivePoint, tol: f64) -> Result<bool> {
    if p.signature() != q.signature() {
        return Err(GeomError::Contract("projective points of different signature".into()));
    }
    if p.representative.is_zero() || q.representative.is_zero() {
        return Err(GeomError::InvalidInput("zero representative".into()));
    }
    Ok(projective_residual(p.representative.coords(), q.representative.coords()) <= tol)
}

/// Smallest singular value of the 2×N matrix of unit representatives.
pub fn projective_residual(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let a = a / a.norm();
    let b = b / b.norm();
    // For unit rows the Gram matrix is [[1, c], [c, 1]], eigenvalues 1 ± |c|.
    let c = a.dot(&b).abs().min(1.0);
    // sqrt(1 - c) loses accuracy near c = 1; use the distance to ±b instead.
    let d = (&a - &b).norm().min((&a + &b).norm());
    let via_gram = (1.0 - c).max(0.0).sqrt();
    if via_gram < 1e-4 {
        // 1 - c = d²/2 exactly for unit vectors
        d / std::f64::consts::SQRT_2
    } else {
        via_gram
    }
}

/// A matrix validated to preserve the signed inner product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalMap {
    matrix: DMatrix<f64>,
    signature: Signature,
}

impl OrthogonalMap {
    /// Validates `Mᵀ J M = J` with max-norm residual at most [`ORTHOGONALITY_THRESHOLD`].
    pub fn new(signature: Signature, matrix: DMatrix<f64>) -> Result<Self> {
        let n = signature.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(GeomError::Contract(format!(
                "{:?} needs a {n}×{n} matrix, got {}×{}",
                signature,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let residual = orthogonality_residual(signature, &matrix);
        if !(residual <= ORTHOGONALITY_THRESHOLD) {
            return Err(GeomError::InvalidMap { residual, threshold: ORTHOGONALITY_THRESHOLD });
        }
        Ok(OrthogonalMap { matrix, signature })
    }

    pub fn identity(signature: Signature) -> Self {
        OrthogonalMap { matrix: DMatrix::identity(signature.dim(), signature.dim()), signature }
    }

    /// Skips validation; callers guarantee orthogonality by construction.
    pub(crate) fn new_unchecked(signature: Signature, matrix: DMatrix<f64>) -> Self {
        OrthogonalMap { matrix, signature }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn residual(&self) -> f64 {
        orthogonality_residual(self.signature, &self.matrix)
    }

    /// J Lᵀ J.
    pub fn inverse(&self) -> OrthogonalMap {
        let j = self.signature.gram();
        OrthogonalMap { matrix: &j * self.matrix.transpose() * &j, signature: self.signature }
    }

    pub fn compose(&self, other: &OrthogonalMap) -> Result<OrthogonalMap> {
        if self.signature != other.signature {
            return Err(GeomError::Contract("composing maps of different signature".into()));
        }
        Ok(OrthogonalMap { matrix: &self.matrix * &other.matrix, signature: self.signature })
    }

    pub fn apply_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

/// max |Mᵀ J M − J|.
pub fn orthogonality_residual(signature: Signature, m: &DMatrix<f64>) -> f64 {
    let j = signature.gram();
    (m.transpose() * &j * m - &j).amax()
}

pub fn apply_map(map: &OrthogonalMap, v: &SignedVector) -> Result<SignedVector> {
    if map.signature != v.signature {
        return Err(GeomError::Contract("map and vector signatures differ".into()));
    }
    let residual = map.residual();
    if residual > ORTHOGONALITY_THRESHOLD {
        return Err(GeomError::InvalidMap { residual, threshold: ORTHOGONALITY_THRESHOLD });
    }
    Ok(SignedVector { coords: &map.matrix * &v.coords, signature: v.signature })
}

/// Gram–Schmidt under a diagonal metric.
///
/// Each entry of `targets` is the wanted sign of the next basis vector. The
/// candidates are consumed in order; a candidate is rejected when its
/// orthogonalized pivot is near null or has the wrong sign. Returns the
/// accepted vectors normalized to ⟨b,b⟩ = ±1.
pub fn indefinite_gram_schmidt(
    weights: &DVector<f64>,
    fixed: &[DVector<f64>],
    candidates: impl IntoIterator<Item = DVector<f64>>,
    targets: &[f64],
) -> Option<Vec<DVector<f64>>> {
    let inner = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        a.iter().zip(b.iter()).zip(weights.iter()).map(|((x, y), w)| w * x * y).sum()
    };
    let mut basis: Vec<DVector<f64>> = fixed.to_vec();
    let mut out = Vec::with_capacity(targets.len());
    let mut cands = candidates.into_iter();
    for &sign in targets {
        loop {
            let mut v = cands.next()?;
            // two passes for numerical orthogonality
            for _ in 0..2 {
                for b in &basis {
                    let bb = inner(b, b);
                    v -= b * (inner(&v, b) / bb);
                }
            }
            let vv = inner(&v, &v);
            if vv.abs() < PIVOT_FLOOR * v.norm_squared().max(1.0) || vv.signum() != sign.signum() {
                continue;
            }
            v /= vv.abs().sqrt();
            basis.push(v.clone());
            out.push(v);
            break;
        }
    }
    Some(out)
}

/// Completes the columns in `fixed` (already orthonormal for the signature)
/// to a full orthonormal frame, placing the fixed columns at their 0-based
/// positions. Free slots are filled timelike first; each takes the coordinate
/// vector with the largest orthogonalized pivot of the right sign.
pub fn complete_frame(signature: Signature, fixed: &[(usize, DVector<f64>)]) -> Result<DMatrix<f64>> {
    let n = signature.dim();
    let weights = signature.weights();
    let free: Vec<usize> = (0..n).filter(|i| !fixed.iter().any(|(p, _)| p == i)).collect();
    let mut order: Vec<usize> = free.iter().copied().filter(|&i| weights[i] < 0.0).collect();
    order.extend(free.iter().copied().filter(|&i| weights[i] > 0.0));
    let mut m = DMatrix::zeros(n, n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    for (p, v) in fixed {
        m.set_column(*p, v);
        basis.push(v.clone());
    }
    for &slot in &order {
        let target = weights[slot];
        let mut best: Option<(f64, DVector<f64>)> = None;
        for k in 0..n {
            let mut v = DVector::zeros(n);
            v[k] = 1.0;
            for _ in 0..2 {
                for b in &basis {
                    let bb = signature.inner(b, b);
                    v -= b * (signature.inner(&v, b) / bb);
                }
            }
            let vv = signature.inner(&v, &v);
            if vv.signum() != target || vv.abs() < PIVOT_FLOOR {
                continue;
            }
            if best.as_ref().is_none_or(|(s, _)| vv.abs() > *s) {
                best = Some((vv.abs(), v));
            }
        }
        let (vv, v) = best.ok_or_else(|| GeomError::InvalidInput("could not complete an orthonormal frame".into()))?;
        let v = v / vv.sqrt();
        m.set_column(slot, &v);
        basis.push(v);
    }
    Ok(m)
}

/// A random element of O(signature) near the identity.
///
/// Column j starts from e_j plus Gaussian noise of size `spread`, and is
/// orthogonalized against the previous columns (timelike columns first).
/// Pivots that come out near-null or of the wrong sign are resampled.
pub fn random_orthogonal<R: Rng + ?Sized>(signature: Signature, spread: f64, rng: &mut R) -> OrthogonalMap {
    let n = signature.dim();
    let weights = signature.weights();
    let mut order: Vec<usize> = (0..n).filter(|&i| weights[i] < 0.0).collect();
    order.extend((0..n).filter(|&i| weights[i] > 0.0));
    let mut m = DMatrix::zeros(n, n);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for &j in &order {
        let cands = std::iter::repeat_with(|| {
            let mut v = DVector::from_fn(n, |_, _| spread * rng.sample::<f64, _>(StandardNormal));
            v[j] += 1.0;
            v
        });
        let v = indefinite_gram_schmidt(&weights, &basis, cands, &[weights[j]])
            .expect("infinite candidate stream")
            .remove(0);
        m.set_column(j, &v);
        basis.push(v);
    }
    OrthogonalMap::new_unchecked(signature, m)
}
