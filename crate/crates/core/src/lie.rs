//! Oriented spheres as points of the Lie quadric, Lie sphere transformations
//! and their factorization into Möbius and parallel pieces.
//!
//! Coordinates of ℝ^{d+3}_2 are stored 0-based; the doc comments use the
//! 1-based names e_1, …, e_{d+3}.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::minkowski::{complete_frame, projective_residual, OrthogonalMap, ProjectivePoint, Signature, SignedVector};

/// Lie inner products below this (unit-scale representatives) count as zero.
pub const CONTACT_TOL: f64 = 1e-9;
/// Self-inner-product allowed for a representative to count as on the quadric.
pub const QUADRIC_TOL: f64 = 1e-9;
/// Reconstruction threshold for the Möbius–parallel factorization.
pub const DECOMPOSITION_TOL: f64 = 1e-8;
const UNIT_CENTER_TOL: f64 = 1e-12;

/// The sphere S(x, r) in 𝕊^d with center x and signed radius r.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedSphere {
    center: DVector<f64>,
    radius: f64,
}

impl OrientedSphere {
    pub fn new(center: DVector<f64>, radius: f64) -> Result<Self> {
        let norm = center.norm();
        if (norm - 1.0).abs() > UNIT_CENTER_TOL || !radius.is_finite() {
            return Err(GeomError::InvalidInput(format!(
                "sphere center must be a unit vector (|x| = {norm}) and the radius finite"
            )));
        }
        Ok(OrientedSphere { center, radius })
    }

    pub fn point(center: DVector<f64>) -> Result<Self> {
        Self::new(center, 0.0)
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Dimension d of the base sphere 𝕊^d.
    pub fn base_dim(&self) -> usize {
        self.center.len() - 1
    }

    /// Radius reduced to (−π, π] with the number of full turns removed.
    pub fn reduced_radius(&self) -> (f64, i64) {
        reduce_angle(self.radius)
    }
}

/// r = r₀ + 2πw with r₀ ∈ (−π, π].
pub fn reduce_angle(r: f64) -> (f64, i64) {
    let w = ((r - PI) / (2.0 * PI)).ceil();
    (r - 2.0 * PI * w, w as i64)
}

/// (cos r, x, sin r).
pub fn sphere_coords(s: &OrientedSphere) -> DVector<f64> {
    let d = s.base_dim();
    let mut v = DVector::zeros(d + 3);
    v[0] = s.radius.cos();
    v.rows_mut(1, d + 1).copy_from(&s.center);
    v[d + 2] = s.radius.sin();
    v
}

pub fn sphere_to_quadric(s: &OrientedSphere) -> ProjectivePoint {
    let sig = Signature::Lie(s.base_dim());
    ProjectivePoint::new(SignedVector::new(sig, sphere_coords(s)).expect("length matches"))
        .expect("nonzero representative")
}

/// Recovers S(x, r) with r ∈ (−π, π]. The representative is divided by the
/// (positive) norm of its middle block, so [z] and [−z] give the same
/// oriented sphere written as S(x, r) and S(−x, r ± π).
pub fn quadric_to_sphere(p: &ProjectivePoint) -> Result<OrientedSphere> {
    let Signature::Lie(d) = p.signature() else {
        return Err(GeomError::Contract("quadric points live in Lie signature".into()));
    };
    let z = p.normalized();
    let self_inner = p.signature().inner(&z, &z);
    if self_inner.abs() > QUADRIC_TOL {
        return Err(GeomError::InvalidInput(format!(
            "representative is off the Lie quadric (⟨z,z⟩ = {self_inner:.3e})"
        )));
    }
    let mid = z.rows(1, d + 1).into_owned();
    let m = mid.norm();
    if m < 1e-12 {
        return Err(GeomError::InvalidInput("representative has no sphere (zero middle block)".into()));
    }
    let center = mid / m;
    let radius = (z[d + 2] / m).atan2(z[0] / m);
    Ok(OrientedSphere { center, radius })
}

/// ⟨k₁, k₂⟩ for the representatives (cos r, x, sin r): x₁·x₂ − cos(r₁ − r₂).
pub fn contact_inner(s1: &OrientedSphere, s2: &OrientedSphere) -> Result<f64> {
    if s1.base_dim() != s2.base_dim() {
        return Err(GeomError::Contract("spheres live in different dimensions".into()));
    }
    let sig = Signature::Lie(s1.base_dim());
    Ok(sig.inner(&sphere_coords(s1), &sphere_coords(s2)))
}

/// Two oriented spheres are in oriented contact iff their quadric points are
/// Lie-orthogonal.
pub fn oriented_contact(s1: &OrientedSphere, s2: &OrientedSphere) -> Result<bool> {
    Ok(contact_inner(s1, s2)?.abs() <= CONTACT_TOL)
}

/// How a Lie transformation was built, when known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "t", rename_all = "kebab-case")]
pub enum KindHint {
    Mobius,
    ParallelSpherical(f64),
    ParallelEuclidean(f64),
    ParallelHyperbolic(f64),
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParallelKind {
    Spherical,
    Euclidean,
    Hyperbolic,
}

impl ParallelKind {
    pub fn hint(self, t: f64) -> KindHint {
        match self {
            ParallelKind::Spherical => KindHint::ParallelSpherical(t),
            ParallelKind::Euclidean => KindHint::ParallelEuclidean(t),
            ParallelKind::Hyperbolic => KindHint::ParallelHyperbolic(t),
        }
    }
}

/// An element of O(d+1, 2) acting on the Lie quadric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LieTransformation {
    map: OrthogonalMap,
    kind_hint: KindHint,
}

/// On-disk form: row-major matrix with the signature and kind hint.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct MatrixFile {
    signature: Signature,
    rows: Vec<Vec<f64>>,
    #[serde(default = "general_hint")]
    kind_hint: KindHint,
}

fn general_hint() -> KindHint {
    KindHint::General
}

impl LieTransformation {
    pub fn new(map: OrthogonalMap, kind_hint: KindHint) -> Result<Self> {
        match map.signature() {
            Signature::Lie(_) => Ok(LieTransformation { map, kind_hint }),
            s => Err(GeomError::Contract(format!("Lie transformations need Lie signature, got {s:?}"))),
        }
    }

    pub fn from_matrix(d: usize, matrix: DMatrix<f64>, kind_hint: KindHint) -> Result<Self> {
        Self::new(OrthogonalMap::new(Signature::Lie(d), matrix)?, kind_hint)
    }

    pub fn identity(d: usize) -> Self {
        LieTransformation { map: OrthogonalMap::identity(Signature::Lie(d)), kind_hint: KindHint::Mobius }
    }

    pub fn base_dim(&self) -> usize {
        self.map.signature().base_dim()
    }

    pub fn map(&self) -> &OrthogonalMap {
        &self.map
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.map.matrix()
    }

    pub fn kind_hint(&self) -> KindHint {
        self.kind_hint
    }

    pub fn compose(&self, other: &LieTransformation) -> Result<LieTransformation> {
        let kind_hint = match (self.kind_hint, other.kind_hint) {
            (KindHint::Mobius, KindHint::Mobius) => KindHint::Mobius,
            _ => KindHint::General,
        };
        Ok(LieTransformation { map: self.map.compose(&other.map)?, kind_hint })
    }

    pub fn inverse(&self) -> LieTransformation {
        let kind_hint = match self.kind_hint {
            KindHint::ParallelSpherical(t) => KindHint::ParallelSpherical(-t),
            KindHint::ParallelEuclidean(t) => KindHint::ParallelEuclidean(-t),
            KindHint::ParallelHyperbolic(t) => KindHint::ParallelHyperbolic(-t),
            k => k,
        };
        LieTransformation { map: self.map.inverse(), kind_hint }
    }

    pub fn apply(&self, p: &ProjectivePoint) -> Result<ProjectivePoint> {
        if p.signature() != self.map.signature() {
            return Err(GeomError::Contract("point and transformation signatures differ".into()));
        }
        let v = self.map.apply_coords(p.representative().coords());
        ProjectivePoint::new(SignedVector::new(p.signature(), v)?)
    }

    pub fn apply_sphere(&self, s: &OrientedSphere) -> Result<OrientedSphere> {
        quadric_to_sphere(&self.apply(&sphere_to_quadric(s))?)
    }

    /// Projective distance between [γ e_{d+3}] and [e_{d+3}].
    pub fn point_sphere_residual(&self) -> f64 {
        let n = self.map.signature().dim();
        let col = self.matrix().column(n - 1).into_owned();
        let mut e = DVector::zeros(n);
        e[n - 1] = 1.0;
        projective_residual(&col, &e)
    }

    /// True iff [e_{d+3}] is fixed, i.e. point spheres go to point spheres.
    pub fn is_mobius(&self, tol: f64) -> bool {
        self.point_sphere_residual() <= tol
    }

    pub fn to_json(&self) -> Result<String> {
        let m = self.matrix();
        let file = MatrixFile {
            signature: self.map.signature(),
            rows: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
            kind_hint: self.kind_hint,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text)?;
        let n = file.rows.len();
        if file.rows.iter().any(|r| r.len() != n) {
            return Err(GeomError::Parse("matrix rows must all have the same length as the row count".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| file.rows[i][j]);
        Self::new(OrthogonalMap::new(file.signature, m)?, file.kind_hint)
    }
}

/// L̄ = L on ℝ^{d+2}_1 and L̄ e_{d+3} = ±e_{d+3}.
pub fn mobius_extend(l: &OrthogonalMap, sign: f64) -> Result<LieTransformation> {
    let Signature::Mobius(d) = l.signature() else {
        return Err(GeomError::Contract("Möbius extension needs a Möbius-signature map".into()));
    };
    let residual = l.residual();
    if residual > crate::minkowski::ORTHOGONALITY_THRESHOLD {
        return Err(GeomError::InvalidMap { residual, threshold: crate::minkowski::ORTHOGONALITY_THRESHOLD });
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(GeomError::InvalidInput(format!("orientation sign must be ±1, got {sign}")));
    }
    let mut m = DMatrix::zeros(d + 3, d + 3);
    m.view_mut((0, 0), (d + 2, d + 2)).copy_from(l.matrix());
    m[(d + 2, d + 2)] = sign;
    Ok(LieTransformation { map: OrthogonalMap::new_unchecked(Signature::Lie(d), m), kind_hint: KindHint::Mobius })
}

/// Random element of O(m+1, 1): a rotation of ℝ^{m+1} followed by a boost of
/// the given rapidity along a random direction.
pub fn random_mobius<R: Rng + ?Sized>(m: usize, rapidity: f64, rng: &mut R) -> OrthogonalMap {
    let k = m + 1;
    let gauss = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gauss.qr().q();
    let dir = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
    let (ch, sh) = (rapidity.cosh(), rapidity.sinh());
    let mut boost = DMatrix::identity(k + 1, k + 1);
    boost[(0, 0)] = ch;
    for i in 0..k {
        boost[(0, i + 1)] = sh * dir[i];
        boost[(i + 1, 0)] = sh * dir[i];
        for j in 0..k {
            boost[(i + 1, j + 1)] += (ch - 1.0) * dir[i] * dir[j];
        }
    }
    let mut rot = DMatrix::identity(k + 1, k + 1);
    rot.view_mut((1, 1), (k, k)).copy_from(&q);
    OrthogonalMap::new_unchecked(Signature::Mobius(m), boost * rot)
}

/// Parallel transformation P_t of the given kind on ℝ^{d+3}_2.
pub fn parallel_transformation(kind: ParallelKind, t: f64, d: usize) -> LieTransformation {
    let n = d + 3;
    let e = n - 1;
    let mut m = DMatrix::identity(n, n);
    match kind {
        ParallelKind::Spherical => {
            let (c, s) = (t.cos(), t.sin());
            m[(0, 0)] = c;
            m[(e, 0)] = s;
            m[(0, e)] = -s;
            m[(e, e)] = c;
        }
        ParallelKind::Euclidean => {
            let h = 0.5 * t * t;
            m[(0, 0)] = 1.0 - h;
            m[(0, 1)] = -h;
            m[(0, e)] = -t;
            m[(1, 0)] = h;
            m[(1, 1)] = 1.0 + h;
            m[(1, e)] = t;
            m[(e, 0)] = t;
            m[(e, 1)] = t;
            m[(e, e)] = 1.0;
        }
        ParallelKind::Hyperbolic => {
            let (c, s) = (t.cosh(), t.sinh());
            m[(1, 1)] = c;
            m[(e, 1)] = s;
            m[(1, e)] = s;
            m[(e, e)] = c;
        }
    }
    LieTransformation { map: OrthogonalMap::new_unchecked(Signature::Lie(d), m), kind_hint: kind.hint(t) }
}

/// γ = Φ₁ P_t Φ₂ (up to overall sign) with Φ₁, Φ₂ fixing [e_{d+3}].
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub phi1: LieTransformation,
    /// `None` when γ already fixes [e_{d+3}] (t = 0).
    pub kind: Option<ParallelKind>,
    pub t: f64,
    pub phi2: LieTransformation,
    /// max |σγ − Φ₁P_tΦ₂| for the better sign σ.
    pub residual: f64,
}

impl Decomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let p = match self.kind {
            Some(k) => parallel_transformation(k, self.t, self.phi1.base_dim()),
            None => LieTransformation::identity(self.phi1.base_dim()),
        };
        self.phi1.matrix() * p.matrix() * self.phi2.matrix()
    }
}

fn sign_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax().min((a + b).amax())
}

/// Builds Φ₁ and t for one branch; Φ₂ is derived by the caller.
fn branch_phi1(kind: Option<ParallelKind>, d: usize, a: f64, u: &DVector<f64>) -> Result<(DMatrix<f64>, f64, f64)> {
    let sig = Signature::Lie(d);
    let n = d + 3;
    let e = n - 1;
    let mut e_end = DVector::zeros(n);
    e_end[e] = 1.0;
    let sign = if a < 0.0 { -1.0 } else { 1.0 };
    match kind {
        None => Ok((DMatrix::identity(n, n), 0.0, 1.0)),
        Some(ParallelKind::Spherical) => {
            let t = a.clamp(-1.0, 1.0).acos();
            let s = t.sin();
            if s.abs() < 1e-12 {
                return Err(GeomError::DecompositionFailed { best_residual: f64::INFINITY });
            }
            let col0 = -u / s;
            Ok((complete_frame(sig, &[(0, col0), (e, e_end)])?, t, 1.0))
        }
        Some(ParallelKind::Hyperbolic) => {
            let t = a.abs().max(1.0).acosh();
            let s = t.sinh();
            if s.abs() < 1e-12 {
                return Err(GeomError::DecompositionFailed { best_residual: f64::INFINITY });
            }
            let col1 = u * (sign / s);
            Ok((complete_frame(sig, &[(1, col1), (e, e_end)])?, t, sign))
        }
        Some(ParallelKind::Euclidean) => {
            // P_t e_{d+3} = t(−e₁ + e₂) + e_{d+3}; Φ₁ sends the null vector −e₁ + e₂ to m = σu/t.
            let t = u.norm() / std::f64::consts::SQRT_2;
            if t < 1e-12 {
                return Err(GeomError::DecompositionFailed { best_residual: f64::INFINITY });
            }
            let m = u * (sign / t);
            let mut flipped = m.clone();
            flipped[0] = -flipped[0];
            let pairing = sig.inner(&m, &flipped);
            let m_dual = flipped * (2.0 / pairing);
            let col0 = (&m_dual - &m) * 0.5;
            let col1 = (&m + &m_dual) * 0.5;
            Ok((complete_frame(sig, &[(0, col0), (1, col1), (e, e_end)])?, t, sign))
        }
    }
}

/// Constructive factorization γ = Φ₁ P_t Φ₂.
///
/// With w = γ e_{d+3} = a e_{d+3} + u the branch follows from a:
/// |a| < 1 spherical, |a| > 1 hyperbolic, |a| = 1 with u ≠ 0 Euclidean and
/// u = 0 Möbius. Neighbouring branches are tried when the first one fails to
/// reconstruct γ within [`DECOMPOSITION_TOL`].
pub fn cecil_chern_decompose(g: &LieTransformation) -> Result<Decomposition> {
    let residual = g.map().residual();
    if residual > crate::minkowski::ORTHOGONALITY_THRESHOLD {
        return Err(GeomError::InvalidMap { residual, threshold: crate::minkowski::ORTHOGONALITY_THRESHOLD });
    }
    let d = g.base_dim();
    let n = d + 3;
    let e = n - 1;
    let w = g.matrix().column(e).into_owned();
    let a = w[e];
    let mut u = w.clone();
    u[e] = 0.0;
    let u_small = u.amax() <= 1e-9;
    let near_one = (a.abs() - 1.0).abs() <= 1e-9;

    let mut order: Vec<Option<ParallelKind>> = Vec::new();
    if u_small {
        order.push(None);
    }
    if near_one {
        order.push(Some(ParallelKind::Euclidean));
    }
    if a.abs() < 1.0 {
        order.push(Some(ParallelKind::Spherical));
    } else {
        order.push(Some(ParallelKind::Hyperbolic));
    }
    for k in [None, Some(ParallelKind::Euclidean), Some(ParallelKind::Spherical), Some(ParallelKind::Hyperbolic)] {
        if !order.contains(&k) {
            order.push(k);
        }
    }

    let sig = Signature::Lie(d);
    let mut best = f64::INFINITY;
    for kind in order {
        let Ok((phi1, t, sign)) = branch_phi1(kind, d, a, &u) else {
            continue;
        };
        let phi1 = OrthogonalMap::new_unchecked(sig, phi1);
        let p = match kind {
            Some(k) => parallel_transformation(k, t, d),
            None => LieTransformation::identity(d),
        };
        let phi2_m = p.map().inverse().matrix() * phi1.inverse().matrix() * (g.matrix() * sign);
        let phi2 = OrthogonalMap::new_unchecked(sig, phi2_m);
        let phi1 = LieTransformation { map: phi1, kind_hint: KindHint::Mobius };
        let phi2 = LieTransformation { map: phi2, kind_hint: KindHint::Mobius };
        if phi1.point_sphere_residual() > 1e-8 || phi2.point_sphere_residual() > 1e-8 {
            best = best.min(phi2.point_sphere_residual().max(phi1.point_sphere_residual()));
            continue;
        }
        if phi1.map().residual() > 1e-8 || phi2.map().residual() > 1e-8 {
            best = best.min(phi1.map().residual().max(phi2.map().residual()));
            continue;
        }
        let dec = Decomposition { phi1, kind, t, phi2, residual: 0.0 };
        let residual = sign_residual(&dec.reconstruct(), g.matrix());
        if residual <= DECOMPOSITION_TOL {
            return Ok(Decomposition { residual, ..dec });
        }
        best = best.min(residual);
    }
    Err(GeomError::DecompositionFailed { best_residual: best })
}

/// π₀: ℝ^m → 𝕊^m, x ↦ ((1 − x·x)/(1 + x·x), 2x/(1 + x·x)).
pub fn stereo_euclidean(x: &[f64]) -> Vec<f64> {
    crate::immersion::stereo_point(x)
}

/// π₀⁻¹; fails at the pole (−1, 0, …, 0).
pub fn stereo_euclidean_inverse(y: &[f64]) -> Result<Vec<f64>> {
    check_unit(y)?;
    let denom = 1.0 + y[0];
    if denom.abs() < 1e-14 {
        return Err(GeomError::InvalidInput("the pole has no preimage".into()));
    }
    Ok(y[1..].iter().map(|v| v / denom).collect())
}

fn check_unit(y: &[f64]) -> Result<()> {
    let r = (y.iter().map(|v| v * v).sum::<f64>() - 1.0).abs();
    if r > 1e-10 {
        return Err(GeomError::InvalidInput(format!("point is off the unit sphere by {r:.3e}")));
    }
    Ok(())
}

/// π_c: ℍ^m_c → 𝕊^m for x in 𝕃^{m+1} with ⟨x,x⟩ = 1/c, c < 0, x₁ > 0:
/// π₀ of y = (x₂, …, x_{m+1})/(x₁ + |c|^{−1/2}).
pub fn stereo_hyperbolic(c: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(c < 0.0) {
        return Err(GeomError::InvalidInput(format!("hyperbolic curvature must be negative, got {c}")));
    }
    let lorentz = -x[0] * x[0] + x[1..].iter().map(|v| v * v).sum::<f64>();
    let off = (lorentz - 1.0 / c).abs();
    if off > 1e-8 || x[0] <= 0.0 {
        return Err(GeomError::InvalidInput(format!("point is off the hyperboloid sheet (residual {off:.3e})")));
    }
    let big_r = (-c).sqrt().recip();
    let y: Vec<f64> = x[1..].iter().map(|v| v / (x[0] + big_r)).collect();
    Ok(stereo_euclidean(&y))
}

pub fn stereo_hyperbolic_inverse(c: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(c < 0.0) {
        return Err(GeomError::InvalidInput(format!("hyperbolic curvature must be negative, got {c}")));
    }
    let y = stereo_euclidean_inverse(z)?;
    let yy: f64 = y.iter().map(|v| v * v).sum();
    if yy >= 1.0 {
        return Err(GeomError::InvalidInput("point is outside the image of the hyperbolic space".into()));
    }
    let big_r = (-c).sqrt().recip();
    let mut x = Vec::with_capacity(y.len() + 1);
    x.push(big_r * (1.0 + yy) / (1.0 - yy));
    x.extend(y.iter().map(|v| 2.0 * big_r * v / (1.0 - yy)));
    Ok(x)
}

/// θ_c(x) = √c·x from 𝕊^m_c to the unit sphere.
pub fn similarity(c: f64, x: &[f64]) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(GeomError::InvalidInput(format!("curvature must be positive, got {c}")));
    }
    let off = (x.iter().map(|v| v * v).sum::<f64>() - 1.0 / c).abs();
    if off > 1e-10 {
        return Err(GeomError::InvalidInput(format!("point is off the sphere of curvature {c} by {off:.3e}")));
    }
    Ok(x.iter().map(|v| v * c.sqrt()).collect())
}

pub fn similarity_inverse(c: f64, y: &[f64]) -> Result<Vec<f64>> {
    if !(c > 0.0) {
        return Err(GeomError::InvalidInput(format!("curvature must be positive, got {c}")));
    }
    check_unit(y)?;
    Ok(y.iter().map(|v| v / c.sqrt()).collect())
}
