//! Legendre lifts of immersions into the unit sphere, their curvature spheres,
//! tubes and focal points, Lie-transformed lifts and a span-rank test for
//! curvature-sphere families.
//!
//! For an immersion f: M → 𝕊^d with unit normal ξ the lift is the line
//! [Y₁, Y_end] with Y₁ = (1, f, 0) and Y_end = (0, ξ, 1) in ℝ^{d+3}_2. The
//! point [κY₁ + Y_end] is the oriented sphere centered at the focal point
//! cos t f + sin t ξ with radius t = arccot κ.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::{fundamental_forms, Ambient, Domain, FundamentalForms, ImmersionChart};
use crate::lie::LieTransformation;
use crate::minkowski::{ProjectivePoint, Signature, SignedVector};
use crate::plan::SamplePlan;

/// Lightlike and orthogonality residual allowed for lift lines.
pub const LIFT_TOL: f64 = 1e-10;
pub const RANK_TOL_ANALYTIC: f64 = 1e-8;
pub const RANK_TOL_FD: f64 = 1e-5;
/// Largest singular value still counted as a rank drop of the lifted differential.
pub const DEGENERACY_TOL: f64 = 1e-6;
const GAUGE_FLOOR: f64 = 1e-12;
const TUBE_FIBER_HALF_WIDTH: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum PrincipalValue {
    Finite(f64),
    Infinite,
}

impl std::fmt::Display for PrincipalValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrincipalValue::Finite(k) => write!(f, "{k}"),
            PrincipalValue::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureSphere {
    pub representative: ProjectivePoint,
    pub principal_value: PrincipalValue,
    pub multiplicity: usize,
    /// Ambient tangent vectors f_*X for finite values, normal vectors η ⊥ ξ for the infinite one.
    pub principal_space_basis: Vec<DVector<f64>>,
    /// The multiplicity-th smallest singular value of the lifted differential of
    /// the sphere modulo the lift line; zero for a genuine curvature sphere.
    pub degeneracy: f64,
    /// Set when the cluster's eigenvalues spread over more than a tenth of the
    /// cluster tolerance, i.e. distinct curvatures were merged.
    pub flagged: bool,
}

/// Legendre lift of a chart into the unit sphere 𝕊^d.
#[derive(Clone, Debug)]
pub struct LegendreLift {
    base: ImmersionChart,
    cluster_tol: f64,
}

/// The lift at one (x, ξ), with the data needed to differentiate it.
#[derive(Clone, Debug)]
pub struct LiftPoint {
    pub u: Vec<f64>,
    /// ξ in normal-frame coordinates.
    pub normal: Vec<f64>,
    pub y1: SignedVector,
    pub yend: SignedVector,
    pub forms: FundamentalForms,
    pub xi: DVector<f64>,
}

pub fn legendre_lift(chart: &ImmersionChart) -> Result<LegendreLift> {
    if !chart.ambient().is_unit_sphere() {
        return Err(GeomError::InvalidInput(format!(
            "{} does not lie in a unit sphere; compose with a conformal map (stereographic projection) first",
            chart.name()
        )));
    }
    Ok(LegendreLift { cluster_tol: chart.default_cluster_tol(), base: chart.clone() })
}

fn embed_middle(v: &DVector<f64>, total: usize) -> DVector<f64> {
    let mut out = DVector::zeros(total);
    out.rows_mut(1, v.len()).copy_from(v);
    out
}

/// Euclidean projector onto the orthogonal complement of span(z1, z2).
fn line_complement(z1: &DVector<f64>, z2: &DVector<f64>) -> DMatrix<f64> {
    let n = z1.len();
    let q = DMatrix::from_columns(&[z1.clone(), z2.clone()]).qr().q();
    DMatrix::identity(n, n) - &q * q.transpose()
}

fn singular_values_ascending(m: &DMatrix<f64>) -> Vec<f64> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    s
}

impl LegendreLift {
    pub fn base(&self) -> &ImmersionChart {
        &self.base
    }

    pub fn codim(&self) -> usize {
        self.base.codim()
    }

    /// Dimension d of the sphere 𝕊^d the base lives in.
    pub fn sphere_dim(&self) -> usize {
        self.base.ambient().dim
    }

    pub fn signature(&self) -> Signature {
        Signature::Lie(self.sphere_dim())
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn with_cluster_tol(mut self, tol: f64) -> Self {
        self.cluster_tol = tol;
        self
    }

    pub fn rank_tol(&self) -> f64 {
        if self.base.uses_jet() {
            RANK_TOL_ANALYTIC
        } else {
            RANK_TOL_FD
        }
    }

    /// Y₁ = (1, f, 0) and Y_end = (0, ξ, 1) at chart point `u` and unit normal
    /// `normal` (normal-frame coordinates).
    pub fn point(&self, u: &[f64], normal: &[f64]) -> Result<LiftPoint> {
        let forms = fundamental_forms(&self.base, u)?;
        self.point_from_forms(forms, normal)
    }

    pub fn point_from_forms(&self, forms: FundamentalForms, normal: &[f64]) -> Result<LiftPoint> {
        if normal.len() != forms.codim() {
            return Err(GeomError::Contract(format!(
                "normal has {} frame coordinates, codimension is {}",
                normal.len(),
                forms.codim()
            )));
        }
        let len = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (len - 1.0).abs() > crate::immersion::UNIT_TOL {
            return Err(GeomError::InvalidInput(format!("normal has length {len}")));
        }
        let sig = self.signature();
        let total = sig.dim();
        let xi = forms.normal_from_frame(normal);
        let mut y1 = embed_middle(forms.position(), total);
        y1[0] = 1.0;
        let mut yend = embed_middle(&xi, total);
        yend[total - 1] = 1.0;
        Ok(LiftPoint {
            u: forms.u.clone(),
            normal: normal.to_vec(),
            y1: SignedVector::new(sig, y1)?,
            yend: SignedVector::new(sig, yend)?,
            forms,
            xi,
        })
    }

    /// Largest of |⟨Y₁,Y₁⟩|, |⟨Y_end,Y_end⟩|, |⟨Y₁,Y_end⟩| and the norm of
    /// cos s Y₁ + sin s Y_end over a few s: zero when the line lies on the quadric.
    pub fn line_residual(&self, p: &LiftPoint) -> f64 {
        let sig = self.signature();
        let (a, b) = (p.y1.coords(), p.yend.coords());
        let mut r = sig.inner(a, a).abs().max(sig.inner(b, b).abs()).max(sig.inner(a, b).abs());
        for k in 0..8 {
            let s = PI * k as f64 / 8.0;
            let v = a * s.cos() + b * s.sin();
            r = r.max(sig.inner(&v, &v).abs());
        }
        r
    }

    /// Orthonormal basis of {η ⊥ ξ} inside the normal space.
    fn normal_complement(p: &LiftPoint) -> Vec<DVector<f64>> {
        let codim = p.forms.codim();
        if codim < 2 {
            return Vec::new();
        }
        let cols: Vec<DVector<f64>> = p.forms.normal_frame.iter().map(|nu| nu - &p.xi * nu.dot(&p.xi)).collect();
        let svd = DMatrix::from_columns(&cols).svd(true, false);
        let u = svd.u.expect("left singular vectors");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        idx.into_iter().take(codim - 1).map(|i| u.column(i).into_owned()).collect()
    }

    /// Derivatives of Y₁ and Y_end along a basis of the unit normal bundle:
    /// horizontal lifts of the orthonormal tangent frame, then η ⊥ ξ.
    pub fn differential(&self, p: &LiftPoint) -> (DMatrix<f64>, DMatrix<f64>) {
        let total = self.signature().dim();
        let f_star = p.forms.orthonormal_tangent_ambient();
        let s = p.forms.shape_operator_ambient(&p.xi);
        let shape_image = -(&f_star * &s);
        let etas = Self::normal_complement(p);
        let n = f_star.ncols();
        let m = n + etas.len();
        let mut d1 = DMatrix::zeros(total, m);
        let mut d2 = DMatrix::zeros(total, m);
        for j in 0..n {
            d1.set_column(j, &embed_middle(&f_star.column(j).into_owned(), total));
            d2.set_column(j, &embed_middle(&shape_image.column(j).into_owned(), total));
        }
        for (a, eta) in etas.iter().enumerate() {
            d2.set_column(n + a, &embed_middle(eta, total));
        }
        (d1, d2)
    }

    /// Curvature spheres [κY₁ + Y_end] per principal-curvature cluster, then
    /// the point sphere [Y₁] with multiplicity p − 1 when p ≥ 2.
    pub fn curvature_spheres_at(&self, p: &LiftPoint) -> Result<Vec<CurvatureSphere>> {
        let sig = self.signature();
        let spec = p.forms.spectrum(&p.normal, self.cluster_tol)?;
        let (d1, d2) = self.differential(p);
        let proj = line_complement(p.y1.coords(), p.yend.coords());
        let f_star = p.forms.orthonormal_tangent_ambient();
        let mut out = Vec::with_capacity(spec.cluster_count() + 1);
        let mut offset = 0;
        for (i, &kappa) in spec.eigenvalues.iter().enumerate() {
            let m = spec.multiplicities[i];
            let spread = spec.raw[offset + m - 1] - spec.raw[offset];
            offset += m;
            let rep = p.y1.coords() * kappa + p.yend.coords();
            let sv = singular_values_ascending(&(&proj * (&d1 * kappa + &d2)));
            let basis = &f_star * &spec.frame_eigenbasis[i];
            out.push(CurvatureSphere {
                representative: ProjectivePoint::new(SignedVector::new(sig, rep)?)?,
                principal_value: PrincipalValue::Finite(kappa),
                multiplicity: m,
                principal_space_basis: basis.column_iter().map(|c| c.into_owned()).collect(),
                degeneracy: sv.get(m - 1).copied().unwrap_or(0.0),
                flagged: spread > 0.1 * self.cluster_tol,
            });
        }
        let p_minus = p.forms.codim().saturating_sub(1);
        if p_minus > 0 {
            let sv = singular_values_ascending(&(&proj * &d1));
            out.push(CurvatureSphere {
                representative: ProjectivePoint::new(p.y1.clone())?,
                principal_value: PrincipalValue::Infinite,
                multiplicity: p_minus,
                principal_space_basis: Self::normal_complement(p),
                degeneracy: sv.get(p_minus - 1).copied().unwrap_or(0.0),
                flagged: false,
            });
        }
        Ok(out)
    }

    /// Curvature spheres found directly from the lifted differential: the
    /// points of the lift line at which it drops rank.
    pub fn pencil_spheres_at(&self, p: &LiftPoint) -> Result<Vec<PencilSphere>> {
        let (d1, d2) = self.differential(p);
        pencil_curvature_spheres(p.y1.coords(), p.yend.coords(), &d1, &d2, self.cluster_tol)
    }
}

pub fn curvature_spheres(lift: &LegendreLift, u: &[f64], normal: &[f64]) -> Result<Vec<CurvatureSphere>> {
    lift.curvature_spheres_at(&lift.point(u, normal)?)
}

/// A point K = cos φ z₁ + sin φ z₂ of a Legendre line at which the lifted
/// differential drops rank by `multiplicity`.
#[derive(Clone, Debug, Serialize)]
pub struct PencilSphere {
    pub representative: Vec<f64>,
    /// φ ∈ [0, π); in the gauge (Y₁, Y_end) the principal value is cot φ.
    pub angle: f64,
    pub multiplicity: usize,
}

impl PencilSphere {
    pub fn principal_value(&self, angle_tol: f64) -> PrincipalValue {
        if self.angle <= angle_tol || PI - self.angle <= angle_tol {
            PrincipalValue::Infinite
        } else {
            PrincipalValue::Finite(1.0 / self.angle.tan())
        }
    }
}

/// Solves the pencil (α dz₁ + β dz₂) X ≡ 0 modulo span(z₁, z₂): the columns of
/// `dz1`, `dz2` are derivatives of z₁, z₂ along a basis of the parameter space.
pub fn pencil_curvature_spheres(
    z1: &DVector<f64>,
    z2: &DVector<f64>,
    dz1: &DMatrix<f64>,
    dz2: &DMatrix<f64>,
    angle_tol: f64,
) -> Result<Vec<PencilSphere>> {
    let m = dz1.ncols();
    let proj = line_complement(z1, z2);
    let b1 = &proj * dz1;
    let b2 = &proj * dz2;
    let mut stacked = DMatrix::zeros(b1.nrows(), 2 * m);
    stacked.columns_mut(0, m).copy_from(&b1);
    stacked.columns_mut(m, m).copy_from(&b2);
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if svd.singular_values[idx[m - 1]] < 1e-10 {
        return Err(GeomError::InvalidInput("Legendre map is not immersive at this sample".into()));
    }
    let q = DMatrix::from_columns(&idx[..m].iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    let c1 = q.transpose() * &b1;
    let c2 = q.transpose() * &b2;

    let mut best: Option<(f64, f64)> = None;
    for s0 in [0.37, 1.13, 2.29, 0.0, 0.5 * PI, 2.71] {
        let c0 = &c1 * f64::cos(s0) + &c2 * f64::sin(s0);
        let smin = singular_values_ascending(&c0)[0];
        if best.is_none_or(|(_, b)| smin > b) {
            best = Some((s0, smin));
        }
    }
    let (s0, _) = best.expect("candidate angles");
    let (c, s) = (s0.cos(), s0.sin());
    let c0 = &c1 * c + &c2 * s;
    let bp = &c2 * c - &c1 * s;
    let mm = c0.lu().solve(&bp).ok_or_else(|| GeomError::InvalidInput("singular pencil".into()))?;
    let eig = mm.complex_eigenvalues();
    let mut angles = Vec::with_capacity(m);
    for z in eig.iter() {
        if z.im.abs() > 1e-6 * (1.0 + z.re.abs()) {
            return Err(GeomError::NotApplicable(format!("complex pencil eigenvalue {z}")));
        }
        // singular where a/b = −μ with (α, β) = a(c, s) + b(−s, c)
        let (a, b) = (-z.re, 1.0);
        let (alpha, beta) = (a * c - b * s, a * s + b * c);
        angles.push(beta.atan2(alpha).rem_euclid(PI));
    }
    angles.sort_by(f64::total_cmp);
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for phi in angles {
        match groups.last_mut() {
            Some(g) if phi - g[g.len() - 1] <= angle_tol => g.push(phi),
            _ => groups.push(vec![phi]),
        }
    }
    if groups.len() > 1 {
        let last = groups.last().expect("nonempty")[groups.last().expect("nonempty").len() - 1];
        if groups[0][0] + PI - last <= angle_tol {
            let tail = groups.pop().expect("nonempty");
            groups[0].extend(tail.into_iter().map(|x| x - PI));
        }
    }
    Ok(groups
        .into_iter()
        .map(|g| {
            let phi = (g.iter().sum::<f64>() / g.len() as f64).rem_euclid(PI);
            let rep = z1 * phi.cos() + z2 * phi.sin();
            PencilSphere { representative: rep.as_slice().to_vec(), angle: phi, multiplicity: g.len() }
        })
        .collect())
}

fn tube_coefficients(ambient: Ambient, t: f64) -> (f64, f64) {
    let c = ambient.curvature;
    if c > 0.0 {
        let r = c.sqrt();
        ((r * t).cos(), (r * t).sin() / r)
    } else if c < 0.0 {
        let r = (-c).sqrt();
        ((r * t).cosh(), (r * t).sinh() / r)
    } else {
        (1.0, t)
    }
}

/// Orthonormal basis of ℝ^p starting with the unit vector `v`.
fn complete_basis(v: &[f64]) -> Vec<DVector<f64>> {
    let p = v.len();
    let mut out = vec![DVector::from_column_slice(v)];
    for k in 0..p {
        if out.len() == p {
            break;
        }
        let mut e = DVector::zeros(p);
        e[k] = 1.0;
        for q in &out {
            e -= q * q.dot(&e);
        }
        if e.norm() > 1e-6 {
            let e = e.normalize();
            out.push(e);
        }
    }
    out
}

/// The tube f_t(x, ξ) = cos t f(x) + sin t ξ (f + tξ for c = 0, cosh/sinh for
/// c < 0), as a chart over the unit normal bundle. For codimension p ≥ 2 the
/// fiber coordinates s ∈ ℝ^{p−1} give ξ = exp_{ξ₀}(s) in a normal frame seeded
/// at the domain center, with ξ₀ the first frame vector.
pub fn tube_chart(chart: &ImmersionChart, t: f64) -> Result<ImmersionChart> {
    let p = chart.codim();
    let mut xi0 = vec![0.0; p];
    xi0[0] = 1.0;
    tube_chart_around(chart, t, &xi0)
}

pub fn tube_chart_around(chart: &ImmersionChart, t: f64, xi0: &[f64]) -> Result<ImmersionChart> {
    let ambient = chart.ambient();
    let n = chart.intrinsic_dim();
    let p = chart.codim();
    if xi0.len() != p {
        return Err(GeomError::Contract(format!("ξ₀ has {} coordinates, codimension is {p}", xi0.len())));
    }
    let (co, si) = tube_coefficients(ambient, t);
    let base = chart.clone();
    let name = format!("tube({}, t={t})", chart.name());
    if p == 1 {
        let sign = xi0[0].signum();
        let f = move |u: &[f64]| -> Vec<f64> {
            match fundamental_forms(&base, u) {
                Ok(forms) => {
                    let v = forms.position() * co + &forms.normal_frame[0] * (si * sign);
                    v.as_slice().to_vec()
                }
                Err(_) => vec![f64::NAN; ambient.coord_len()],
            }
        };
        return Ok(ImmersionChart::plain(name, n, ambient, chart.domain().clone(), f));
    }
    let center = chart.domain().center();
    let seeds = fundamental_forms(chart, &center)?.normal_frame;
    let fiber = complete_basis(xi0);
    let mut lo = chart.domain().lo.clone();
    let mut hi = chart.domain().hi.clone();
    lo.extend(std::iter::repeat_n(-TUBE_FIBER_HALF_WIDTH, p - 1));
    hi.extend(std::iter::repeat_n(TUBE_FIBER_HALF_WIDTH, p - 1));
    let f = move |v: &[f64]| -> Vec<f64> {
        let (u, s) = v.split_at(n);
        let eval = || -> Result<DVector<f64>> {
            let forms = fundamental_forms(&base, u)?;
            let frame = forms.seeded_normal_frame(&seeds)?;
            let mut w = DVector::zeros(p);
            for (k, sk) in s.iter().enumerate() {
                w += &fiber[k + 1] * *sk;
            }
            let r = w.norm();
            let coeffs = &fiber[0] * r.cos() + &w * if r > 1e-12 { r.sin() / r } else { 1.0 };
            let mut xi = DVector::zeros(forms.position().len());
            for (a, nu) in frame.iter().enumerate() {
                xi += nu * coeffs[a];
            }
            Ok(forms.position() * co + xi * si)
        };
        match eval() {
            Ok(x) => x.as_slice().to_vec(),
            Err(_) => vec![f64::NAN; ambient.coord_len()],
        }
    };
    Ok(ImmersionChart::plain(name, n + p - 1, ambient, Domain { lo, hi }, f))
}

#[derive(Clone, Debug, Serialize)]
pub struct FocalSample {
    pub u: Vec<f64>,
    pub normal: Vec<f64>,
    /// Singular values of the tube differential, ascending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub full_rank: usize,
    /// Multiplicity of the cluster at the focal value, plus p − 1 where sin t vanishes.
    pub expected_drop: usize,
}

impl FocalSample {
    pub fn drop(&self) -> usize {
        self.full_rank - self.rank
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FocalReport {
    pub t: f64,
    pub rank_tol: f64,
    pub samples: Vec<FocalSample>,
}

impl FocalReport {
    pub fn drops_match(&self) -> bool {
        self.samples.iter().all(|s| s.drop() == s.expected_drop)
    }
}

/// Rank of the tube differential f_t*(X, −f_*A_ξX + η) = f_*(cos t X − sin t A_ξX) + sin t η
/// at every (u, ξ) of the plan.
pub fn focal_detect(chart: &ImmersionChart, t: f64, plan: &SamplePlan) -> Result<FocalReport> {
    plan.validate()?;
    let ambient = chart.ambient();
    let (co, si) = tube_coefficients(ambient, t);
    let rank_tol = if chart.uses_jet() { RANK_TOL_ANALYTIC } else { RANK_TOL_FD };
    let cluster_tol = plan.cluster_tol_for(chart);
    let per_point: Vec<Result<Vec<FocalSample>>> = plan
        .points
        .par_iter()
        .zip(plan.normals.par_iter())
        .map(|(u, normals)| {
            let forms = fundamental_forms(chart, u)?;
            let f_star = forms.orthonormal_tangent_ambient();
            normals
                .iter()
                .map(|normal| {
                    let xi = forms.normal_from_frame(normal);
                    let s = forms.shape_operator(normal)?;
                    let n = forms.n();
                    let p = forms.codim();
                    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n + p - 1);
                    let moved = &f_star * (DMatrix::identity(n, n) * co - &s * si);
                    cols.extend(moved.column_iter().map(|c| c.into_owned()));
                    let others: Vec<DVector<f64>> =
                        forms.normal_frame.iter().map(|nu| nu - &xi * ambient.inner(nu, &xi)).collect();
                    let svd = DMatrix::from_columns(&others).svd(true, false);
                    let uu = svd.u.expect("left singular vectors");
                    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
                    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
                    cols.extend(idx.iter().take(p - 1).map(|&i| uu.column(i) * si));
                    let sv = singular_values_ascending(&DMatrix::from_columns(&cols));
                    let full_rank = n + p - 1;
                    let rank = sv.iter().filter(|&&x| x > rank_tol).count();
                    let spec = forms.spectrum(normal, cluster_tol)?;
                    let mut expected: usize = spec
                        .eigenvalues
                        .iter()
                        .zip(&spec.multiplicities)
                        .filter(|(k, _)| (co - si * **k).abs() <= cluster_tol * (co.abs() + si.abs()))
                        .map(|(_, m)| *m)
                        .sum();
                    if si.abs() <= rank_tol {
                        expected += p - 1;
                    }
                    Ok(FocalSample {
                        u: u.clone(),
                        normal: normal.clone(),
                        singular_values: sv,
                        rank,
                        full_rank,
                        expected_drop: expected,
                    })
                })
                .collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(plan.sample_count());
    for r in per_point {
        samples.extend(r?);
    }
    Ok(FocalReport { t, rank_tol, samples })
}

/// A lift with a Lie transformation applied pointwise.
#[derive(Clone, Debug)]
pub struct TransformedLift {
    pub transformation: LieTransformation,
    pub lift: LegendreLift,
}

#[derive(Clone, Debug)]
pub struct TransformedPoint {
    /// g Y₁ and g Y_end.
    pub z1: DVector<f64>,
    pub z2: DVector<f64>,
    /// Re-extracted representatives of the form (1, f', 0) and (0, ξ', 1).
    pub w1: Option<DVector<f64>>,
    pub w2: Option<DVector<f64>>,
    pub flag: Option<String>,
}

impl TransformedPoint {
    /// The point-sphere map f' of the transformed lift.
    pub fn projection(&self) -> Option<DVector<f64>> {
        self.w1.as_ref().map(|w| w.rows(1, w.len() - 2).into_owned())
    }

    /// The unit normal ξ' of the transformed lift.
    pub fn normal(&self) -> Option<DVector<f64>> {
        self.w2.as_ref().map(|w| w.rows(1, w.len() - 2).into_owned())
    }
}

pub fn apply_lie_to_lift(g: &LieTransformation, lift: &LegendreLift) -> Result<TransformedLift> {
    if g.base_dim() != lift.sphere_dim() {
        return Err(GeomError::Contract(format!(
            "transformation acts on 𝕊^{}, lift lives in 𝕊^{}",
            g.base_dim(),
            lift.sphere_dim()
        )));
    }
    Ok(TransformedLift { transformation: g.clone(), lift: lift.clone() })
}

impl TransformedLift {
    fn gauge(z1: &DVector<f64>, z2: &DVector<f64>) -> (Option<DVector<f64>>, Option<DVector<f64>>, Option<String>) {
        let e = z1.len() - 1;
        let scale = z1.norm() * z2.norm();
        let w1 = z1 * z2[e] - z2 * z1[e];
        let w2 = z2 * z1[0] - z1 * z2[0];
        let mut flags = Vec::new();
        let w1 = if w1[0].abs() > GAUGE_FLOOR * scale {
            Some(&w1 / w1[0])
        } else {
            flags.push("no point sphere with first coordinate 1");
            None
        };
        let w2 = if w2[e].abs() > GAUGE_FLOOR * scale {
            Some(&w2 / w2[e])
        } else {
            flags.push("no great sphere with last coordinate 1");
            None
        };
        let flag = (!flags.is_empty()).then(|| flags.join("; "));
        (w1, w2, flag)
    }

    pub fn point(&self, u: &[f64], normal: &[f64]) -> Result<TransformedPoint> {
        let p = self.lift.point(u, normal)?;
        Ok(self.point_from_lift(&p))
    }

    pub fn point_from_lift(&self, p: &LiftPoint) -> TransformedPoint {
        let g = self.transformation.matrix();
        let z1 = g * p.y1.coords();
        let z2 = g * p.yend.coords();
        let (w1, w2, flag) = Self::gauge(&z1, &z2);
        TransformedPoint { z1, z2, w1, w2, flag }
    }

    /// Curvature spheres of the transformed lift from its own differential,
    /// expressed in the re-extracted gauge when available.
    pub fn curvature_spheres(&self, u: &[f64], normal: &[f64]) -> Result<Vec<PencilSphere>> {
        let p = self.lift.point(u, normal)?;
        let tp = self.point_from_lift(&p);
        let (d1, d2) = self.lift.differential(&p);
        let g = self.transformation.matrix();
        let (dz1, dz2) = (g * d1, g * d2);
        let tol = self.lift.cluster_tol();
        match (&tp.w1, &tp.w2) {
            (Some(w1), Some(w2)) => {
                // w = M z with M constant at this point; derivatives modulo the line follow M
                let m = Self::gauge_matrix(&tp.z1, &tp.z2);
                let e1 = &dz1 * m[(0, 0)] + &dz2 * m[(0, 1)];
                let e2 = &dz1 * m[(1, 0)] + &dz2 * m[(1, 1)];
                pencil_curvature_spheres(w1, w2, &e1, &e2, tol)
            }
            _ => pencil_curvature_spheres(&tp.z1, &tp.z2, &dz1, &dz2, tol),
        }
    }

    /// Rows give w₁, w₂ as combinations of z₁, z₂.
    fn gauge_matrix(z1: &DVector<f64>, z2: &DVector<f64>) -> DMatrix<f64> {
        let e = z1.len() - 1;
        let a = z2[e];
        let b = -z1[e];
        let first = a * z1[0] + b * z2[0];
        let c = -z2[0];
        let d = z1[0];
        let last = c * z1[e] + d * z2[e];
        DMatrix::from_row_slice(2, 2, &[a / first, b / first, c / last, d / last])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    pub family: usize,
    pub samples: usize,
    /// Dimension of ℝ^{d+3}.
    pub ambient_dim: usize,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub rank_tol: f64,
    pub multiplicity_constant: bool,
    /// Span of codimension at least two.
    pub reducible_candidate: bool,
}

/// Span dimension of the curvature-sphere family `family` (finite clusters in
/// ascending order, then the point sphere) over the given (u, ξ) samples.
pub fn reducibility_rank(lift: &LegendreLift, family: usize, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<RankReport> {
    let dim = lift.signature().dim();
    if samples.len() < dim {
        return Err(GeomError::InsufficientSamples { got: samples.len(), need: dim });
    }
    let rows: Vec<Result<(DVector<f64>, usize)>> = samples
        .par_iter()
        .map(|(u, xi)| {
            let spheres = curvature_spheres(lift, u, xi)?;
            let s = spheres.get(family).ok_or_else(|| {
                GeomError::InvalidInput(format!(
                    "sample has {} curvature spheres, asked for family {family}",
                    spheres.len()
                ))
            })?;
            Ok((s.representative.normalized(), s.multiplicity))
        })
        .collect();
    let mut mat = DMatrix::zeros(samples.len(), dim);
    let mut mults = Vec::with_capacity(samples.len());
    for (i, r) in rows.into_iter().enumerate() {
        let (v, m) = r?;
        mat.set_row(i, &v.transpose());
        mults.push(m);
    }
    let mut sv: Vec<f64> = mat.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let rank_tol = lift.rank_tol();
    let rank = sv.iter().filter(|&&x| x > rank_tol).count();
    Ok(RankReport {
        family,
        samples: samples.len(),
        ambient_dim: dim,
        rank,
        singular_values: sv,
        rank_tol,
        multiplicity_constant: mults.windows(2).all(|w| w[0] == w[1]),
        reducible_candidate: rank + 2 <= dim,
    })
}

/// All (u, ξ) of a plan, in plan order.
pub fn plan_samples(plan: &SamplePlan) -> Vec<(Vec<f64>, Vec<f64>)> {
    plan.points.iter().zip(&plan.normals).flat_map(|(u, ns)| ns.iter().map(move |xi| (u.clone(), xi.clone()))).collect()
}

/// One curvature sphere at one sample, flattened for export.
#[derive(Clone, Debug, Serialize)]
pub struct SphereRow {
    pub sample: usize,
    pub u: Vec<f64>,
    pub normal: Vec<f64>,
    pub family: usize,
    pub value: PrincipalValue,
    pub multiplicity: usize,
    pub representative: Vec<f64>,
    pub degeneracy: f64,
    pub flagged: bool,
}

pub fn sphere_sweep(lift: &LegendreLift, plan: &SamplePlan) -> Result<Vec<SphereRow>> {
    let samples = plan_samples(plan);
    let per: Vec<Result<Vec<SphereRow>>> = samples
        .par_iter()
        .enumerate()
        .map(|(k, (u, xi))| {
            let spheres = curvature_spheres(lift, u, xi)?;
            Ok(spheres
                .into_iter()
                .enumerate()
                .map(|(family, s)| SphereRow {
                    sample: k,
                    u: u.clone(),
                    normal: xi.clone(),
                    family,
                    value: s.principal_value,
                    multiplicity: s.multiplicity,
                    representative: s.representative.normalized().as_slice().to_vec(),
                    degeneracy: s.degeneracy,
                    flagged: s.flagged,
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

/// Columns: sample, u, normal, family, value, multiplicity, representative,
/// degeneracy, flagged. Vectors are `;`-separated; the infinite value is `inf`.
pub fn spheres_to_csv(rows: &[SphereRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| GeomError::Io(e.to_string());
    w.write_record([
        "sample",
        "u",
        "normal",
        "family",
        "value",
        "multiplicity",
        "representative",
        "degeneracy",
        "flagged",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            r.sample.to_string(),
            join(&r.u),
            join(&r.normal),
            r.family.to_string(),
            r.value.to_string(),
            r.multiplicity.to_string(),
            join(&r.representative),
            format!("{:e}", r.degeneracy),
            r.flagged.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| GeomError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| GeomError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Algebra;
    use crate::immersion::{builtin_chart, BuiltinChart};
    use crate::lie::{mobius_extend, parallel_transformation, ParallelKind};
    use crate::minkowski::{projective_residual, OrthogonalMap};
    use crate::plan::{PlanConfig, SamplePlan};

    fn chart(spec: &str) -> ImmersionChart {
        builtin_chart(&spec.parse::<BuiltinChart>().unwrap()).unwrap()
    }

    fn veronese(a: Algebra) -> ImmersionChart {
        builtin_chart(&BuiltinChart::veronese(a)).unwrap()
    }

    #[test]
    fn lift_lines_lie_on_the_quadric() {
        let lift = legendre_lift(&veronese(Algebra::C)).unwrap();
        let plan = SamplePlan::generate(lift.base(), &PlanConfig { max_points: 4, ..Default::default() }).unwrap();
        for (u, xi) in plan_samples(&plan) {
            let p = lift.point(&u, &xi).unwrap();
            assert!(lift.line_residual(&p) <= LIFT_TOL);
        }
    }

    #[test]
    fn euclidean_charts_are_rejected() {
        assert!(matches!(legendre_lift(&chart("torus:2,0.5")), Err(GeomError::InvalidInput(_))));
    }

    #[test]
    fn umbilical_hypersurface_has_one_sphere_which_is_itself() {
        let rho = 0.7;
        let lift = legendre_lift(&chart(&format!("geodesic-sphere:2,{rho}"))).unwrap();
        let mut first: Option<DVector<f64>> = None;
        for u in [[0.1, 0.2], [-0.3, 0.4], [0.5, -0.1]] {
            let s = curvature_spheres(&lift, &u, &[1.0]).unwrap();
            assert_eq!(s.len(), 1);
            assert_eq!(s[0].multiplicity, 2);
            assert!(s[0].degeneracy < DEGENERACY_TOL);
            let rep = s[0].representative.normalized();
            if let Some(f) = &first {
                assert!(projective_residual(f, &rep) < 1e-10);
            }
            first = Some(rep);
        }
    }

    #[test]
    fn clifford_torus_has_two_finite_spheres() {
        let lift = legendre_lift(&chart("clifford-torus")).unwrap();
        let s = curvature_spheres(&lift, &[0.3, 0.9], &[1.0]).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|c| c.multiplicity == 1 && c.degeneracy < DEGENERACY_TOL));
    }

    #[test]
    fn real_veronese_sphere_pattern_and_pencil_agree() {
        let lift = legendre_lift(&veronese(Algebra::R)).unwrap();
        let c = 1.0 / 3f64.sqrt();
        let p = lift.point(&[0.2, -0.4], &[0.6, 0.8]).unwrap();
        let s = lift.curvature_spheres_at(&p).unwrap();
        let pattern: Vec<(PrincipalValue, usize)> = s.iter().map(|x| (x.principal_value, x.multiplicity)).collect();
        assert_eq!(pattern.len(), 3);
        match (pattern[0].0, pattern[1].0, pattern[2].0) {
            (PrincipalValue::Finite(a), PrincipalValue::Finite(b), PrincipalValue::Infinite) => {
                assert!((a + c).abs() < 1e-9 && (b - c).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        let pencil = lift.pencil_spheres_at(&p).unwrap();
        assert_eq!(pencil.len(), 3);
        for ps in &pencil {
            let rep = DVector::from_column_slice(&ps.representative);
            let best = s
                .iter()
                .map(|x| projective_residual(&x.representative.normalized(), &rep))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9, "{best}");
        }
    }

    #[test]
    fn focal_rank_drops_on_veronese_and_umbilical_sphere() {
        let v = veronese(Algebra::R);
        let plan = SamplePlan::generate(&v, &PlanConfig { max_points: 4, ..Default::default() }).unwrap();
        let t = (3f64.sqrt()).atan(); // cot t = 1/√3
        let r = focal_detect(&v, t, &plan).unwrap();
        assert!(r.samples.iter().all(|s| s.drop() == 1 && s.expected_drop == 1));
        let generic = focal_detect(&v, 0.3, &plan).unwrap();
        assert!(generic.samples.iter().all(|s| s.drop() == 0));
        let rho = 0.6;
        let sph = chart(&format!("geodesic-sphere:2,{rho}"));
        let plan = SamplePlan::generate(&sph, &PlanConfig::default()).unwrap();
        let r = focal_detect(&sph, rho, &plan).unwrap();
        assert!(r.drops_match());
        let collapsed = r.samples.iter().filter(|s| s.drop() == 2).count();
        assert_eq!(collapsed, r.samples.len() / 2);
    }

    #[test]
    fn tube_at_zero_and_pi() {
        let c = chart("clifford-torus");
        let u = [0.2, 0.3];
        let f = c.eval(&u).unwrap();
        let t0 = tube_chart(&c, 0.0).unwrap().eval(&u).unwrap();
        assert!((t0 - &f).amax() < 1e-14);
        let tpi = tube_chart(&c, PI).unwrap().eval(&u).unwrap();
        assert!((tpi + &f).amax() < 1e-14);
    }

    #[test]
    fn tube_spectrum_is_cot_shift() {
        let v = veronese(Algebra::R);
        let t = 0.3;
        let tube = tube_chart(&v, t).unwrap();
        let u = [0.1, 0.2];
        let forms = fundamental_forms(&v, &u).unwrap();
        let xi = forms.normal_from_frame(&[1.0, 0.0]);
        let base: Vec<f64> = forms.spectrum(&[1.0, 0.0], 1e-6).unwrap().eigenvalues;
        let tf = fundamental_forms(&tube, &[0.1, 0.2, 0.0]).unwrap();
        let xi_t = forms.position() * (-t.sin()) + &xi * t.cos();
        let got = tf.spectrum_ambient(&xi_t, 1e-4).raw;
        let mut want: Vec<f64> = base
            .iter()
            .map(|k| {
                let theta = (1.0 / k).atan().rem_euclid(PI);
                1.0 / (theta - t).tan()
            })
            .collect();
        want.push(-1.0 / t.tan());
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-4, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn parallel_transform_projects_to_parallel_hypersurface() {
        let c = chart("clifford-torus");
        let lift = legendre_lift(&c).unwrap();
        let t = 0.4;
        let g = parallel_transformation(ParallelKind::Spherical, t, 3);
        let tl = apply_lie_to_lift(&g, &lift).unwrap();
        let u = [0.3, -0.5];
        let p = lift.point(&u, &[1.0]).unwrap();
        let tp = tl.point_from_lift(&p);
        let want = p.forms.position() * t.cos() - &p.xi * t.sin();
        assert!((tp.projection().unwrap() - want).amax() < 1e-10);
        let id = apply_lie_to_lift(&LieTransformation::identity(3), &lift).unwrap();
        assert!((id.point_from_lift(&p).projection().unwrap() - p.forms.position()).amax() < 1e-14);
    }

    #[test]
    fn rotation_acts_on_the_middle_block() {
        let c = veronese(Algebra::R);
        let lift = legendre_lift(&c).unwrap();
        let mut m = DMatrix::identity(6, 6);
        let (a, b) = (0.7f64.cos(), 0.7f64.sin());
        m[(1, 1)] = a;
        m[(1, 3)] = -b;
        m[(3, 1)] = b;
        m[(3, 3)] = a;
        let g = mobius_extend(&OrthogonalMap::new(Signature::Mobius(4), m.clone()).unwrap(), 1.0).unwrap();
        let tl = apply_lie_to_lift(&g, &lift).unwrap();
        let u = [0.1, 0.3];
        let tp = tl.point(&u, &[1.0, 0.0]).unwrap();
        let rot = m.view((1, 1), (5, 5)).into_owned();
        let want = rot * c.eval(&u).unwrap();
        assert!((tp.projection().unwrap() - want).amax() < 1e-12);
    }

    #[test]
    fn transformed_spheres_are_images_of_spheres() {
        let c = veronese(Algebra::R);
        let lift = legendre_lift(&c).unwrap();
        let g = parallel_transformation(ParallelKind::Spherical, 0.5, 4);
        let tl = apply_lie_to_lift(&g, &lift).unwrap();
        let (u, xi) = ([0.2, 0.1], [0.0, 1.0]);
        let before = curvature_spheres(&lift, &u, &xi).unwrap();
        let after = tl.curvature_spheres(&u, &xi).unwrap();
        assert_eq!(after.len(), before.len());
        for s in &before {
            let img = g.matrix() * s.representative.representative().coords();
            let best = after
                .iter()
                .map(|a| projective_residual(&img, &DVector::from_column_slice(&a.representative)))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "{best}");
        }
    }

    #[test]
    fn hypersphere_family_has_rank_one_and_few_samples_error() {
        let lift = legendre_lift(&chart("geodesic-sphere:2,0.8")).unwrap();
        let samples: Vec<(Vec<f64>, Vec<f64>)> =
            (0..8).map(|k| (vec![0.1 * k as f64 - 0.3, 0.05 * k as f64], vec![1.0])).collect();
        let r = reducibility_rank(&lift, 0, &samples).unwrap();
        assert_eq!(r.rank, 1);
        assert!(r.reducible_candidate);
        assert!(matches!(
            reducibility_rank(&lift, 0, &samples[..3]),
            Err(GeomError::InsufficientSamples { got: 3, need: 6 })
        ));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let lift = legendre_lift(&veronese(Algebra::R)).unwrap();
        let plan =
            SamplePlan::generate(lift.base(), &PlanConfig { max_points: 2, grid: 1, ..Default::default() }).unwrap();
        let rows = sphere_sweep(&lift, &plan).unwrap();
        let text = spheres_to_csv(&rows).unwrap();
        assert!(text.starts_with("sample,u,normal,family,value"));
        assert_eq!(text.lines().count(), rows.len() + 1);
        assert!(text.contains(",inf,"));
    }
}
