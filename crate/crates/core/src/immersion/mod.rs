//! Parametrized immersions into space forms and their extrinsic curvature.
//!
//! A chart is a map from a box in ℝⁿ into ambient coordinates:
//! ℝ^{m+1} for the sphere 𝕊^m_c (c > 0), ℝ^m for Euclidean space, and the
//! Lorentzian ℝ^{m+1} with weights (−1, +1, …, +1) for ℍ^m_c (c < 0).
//!
//! Sign conventions follow the Weingarten formula dξ = −f_*A_ξ + ∇^⊥ξ, so
//! ⟨A_ξX, Y⟩ = ⟨α(X,Y), ξ⟩ and a round sphere of radius r has A_ξ = I/r
//! for the inward unit normal ξ. With this choice the tube f_t(x,ξ) is
//! singular exactly when cot t is a principal curvature at (x,ξ).

mod builtin;
mod cylinder;
mod envelope;

pub use builtin::{builtin_chart, conformal_to_sphere, mobius_deform, BuiltinChart, CircleHost};
pub use cylinder::{
    generalized_cylinder_chart, point_chart, space_form_exp, CylinderChart, NormalSubbundle, HOLONOMY_TOL,
};
pub use envelope::{
    constant_radius, envelope_chart, envelope_residuals, radius_cluster, EnvelopeChart, EnvelopeResiduals,
    EnvelopeSpec, RadiusCluster, RadiusFn,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::jet::Jet;

/// Inverse stereographic projection π₀: ℝᵏ → 𝕊ᵏ.
pub fn stereo_point(x: &[f64]) -> Vec<f64> {
    builtin::stereo(x)
}

/// Residual allowed in |f|² = 1/c for charts into curved space forms.
pub const POSITION_TOL: f64 = 1e-10;
/// Smallest admissible singular value of the differential.
pub const RANK_FLOOR: f64 = 1e-8;
/// Unit-normal tolerance for shape-operator inputs.
pub const UNIT_TOL: f64 = 1e-8;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_FD_SECOND_STEP: f64 = 1e-4;
pub const CLUSTER_TOL_ANALYTIC: f64 = 1e-6;
pub const CLUSTER_TOL_FD: f64 = 1e-4;

/// The space form a chart maps into.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ambient {
    /// Dimension m of the space form.
    pub dim: usize,
    /// Sectional curvature c.
    pub curvature: f64,
}

impl Ambient {
    pub fn sphere(dim: usize) -> Self {
        Ambient { dim, curvature: 1.0 }
    }

    pub fn euclidean(dim: usize) -> Self {
        Ambient { dim, curvature: 0.0 }
    }

    pub fn hyperbolic(dim: usize, c: f64) -> Self {
        Ambient { dim, curvature: c }
    }

    pub fn is_unit_sphere(&self) -> bool {
        self.curvature == 1.0
    }

    /// Number of ambient coordinates.
    pub fn coord_len(&self) -> usize {
        if self.curvature == 0.0 {
            self.dim
        } else {
            self.dim + 1
        }
    }

    pub fn weight(&self, i: usize) -> f64 {
        if self.curvature < 0.0 && i == 0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let mut s = a.dot(b);
        if self.curvature < 0.0 {
            s -= 2.0 * a[0] * b[0];
        }
        s
    }
}

pub type AnalyticFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;
pub type PlainFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// The map behind a chart: jet-capable (exact derivatives) or value-only.
#[derive(Clone)]
pub enum ChartMap {
    Analytic(AnalyticFn),
    Plain(PlainFn),
}

/// Axis-aligned parameter box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn cube(n: usize, half_width: f64) -> Self {
        Domain { lo: vec![-half_width; n], hi: vec![half_width; n] }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// The box shrunk about its center by `fraction`.
    pub fn shrunk(&self, fraction: f64) -> Domain {
        let c = self.center();
        Domain {
            lo: self.lo.iter().zip(&c).map(|(a, m)| m + fraction * (a - m)).collect(),
            hi: self.hi.iter().zip(&c).map(|(b, m)| m + fraction * (b - m)).collect(),
        }
    }
}

/// Finite-difference settings used when no jet is available.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub step: f64,
    pub second_step: f64,
    pub richardson: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { step: DEFAULT_FD_STEP, second_step: DEFAULT_FD_SECOND_STEP, richardson: false }
    }
}

/// A parametrized immersion f: box ⊂ ℝⁿ → space form.
#[derive(Clone)]
pub struct ImmersionChart {
    name: String,
    n: usize,
    ambient: Ambient,
    map: ChartMap,
    domain: Domain,
    fd: FdConfig,
    force_fd: bool,
}

impl std::fmt::Debug for ImmersionChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImmersionChart")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("ambient", &self.ambient)
            .field("analytic", &self.has_jet())
            .finish()
    }
}

/// Value and first two derivatives of a chart at a point.
#[derive(Clone, Debug)]
pub struct ChartJet {
    pub value: DVector<f64>,
    /// N×n, column i is ∂f/∂u_i.
    pub first: DMatrix<f64>,
    /// `second[i*n + j]` is ∂²f/∂u_i∂u_j.
    pub second: Vec<DVector<f64>>,
}

impl ChartJet {
    pub fn n(&self) -> usize {
        self.first.ncols()
    }

    pub fn d2(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.second[i * self.n() + j]
    }
}

impl ImmersionChart {
    pub fn analytic(
        name: impl Into<String>,
        n: usize,
        ambient: Ambient,
        domain: Domain,
        f: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Self {
        ImmersionChart {
            name: name.into(),
            n,
            ambient,
            map: ChartMap::Analytic(Arc::new(f)),
            domain,
            fd: FdConfig::default(),
            force_fd: false,
        }
    }

    pub fn plain(
        name: impl Into<String>,
        n: usize,
        ambient: Ambient,
        domain: Domain,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ImmersionChart {
            name: name.into(),
            n,
            ambient,
            map: ChartMap::Plain(Arc::new(f)),
            domain,
            fd: FdConfig::default(),
            force_fd: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.n
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    /// Codimension p = m − n.
    pub fn codim(&self) -> usize {
        self.ambient.dim - self.n
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn map(&self) -> &ChartMap {
        &self.map
    }

    pub fn fd_config(&self) -> FdConfig {
        self.fd
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        self
    }

    /// Forces finite differences even when exact jets are available.
    pub fn finite_differences(mut self) -> Self {
        self.force_fd = true;
        self
    }

    pub fn has_jet(&self) -> bool {
        matches!(self.map, ChartMap::Analytic(_))
    }

    /// True when curvature computations use exact jets.
    pub fn uses_jet(&self) -> bool {
        self.has_jet() && !self.force_fd
    }

    pub fn default_cluster_tol(&self) -> f64 {
        if self.uses_jet() {
            CLUSTER_TOL_ANALYTIC
        } else {
            CLUSTER_TOL_FD
        }
    }

    fn raw_eval(&self, u: &[f64]) -> Vec<f64> {
        match &self.map {
            ChartMap::Analytic(f) => {
                let x: Vec<Jet> = u.iter().map(|&v| Jet::constant(v)).collect();
                f(&x).into_iter().map(|j| j.v).collect()
            }
            ChartMap::Plain(f) => f(u),
        }
    }

    pub fn eval(&self, u: &[f64]) -> Result<DVector<f64>> {
        if u.len() != self.n {
            return Err(GeomError::Contract(format!(
                "chart {} takes {} parameters, got {}",
                self.name,
                self.n,
                u.len()
            )));
        }
        let v = self.raw_eval(u);
        if v.len() != self.ambient.coord_len() {
            return Err(GeomError::Contract(format!(
                "chart {} produced {} coordinates, expected {}",
                self.name,
                v.len(),
                self.ambient.coord_len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(GeomError::NonFinite(u.to_vec()));
        }
        Ok(DVector::from_vec(v))
    }

    /// |⟨f,f⟩ − 1/c| for curved ambients, 0 for Euclidean.
    pub fn position_residual(&self, u: &[f64]) -> Result<f64> {
        if self.ambient.curvature == 0.0 {
            return Ok(0.0);
        }
        let f = self.eval(u)?;
        Ok((self.ambient.inner(&f, &f) - 1.0 / self.ambient.curvature).abs())
    }

    /// Exact jet when available and not overridden, otherwise finite differences.
    pub fn jet(&self, u: &[f64]) -> Result<ChartJet> {
        if self.uses_jet() {
            self.jet_analytic(u).expect("analytic map")
        } else {
            self.jet_fd(u)
        }
    }

    pub fn jet_analytic(&self, u: &[f64]) -> Option<Result<ChartJet>> {
        let ChartMap::Analytic(f) = &self.map else {
            return None;
        };
        Some((|| {
            let n = self.n;
            if u.len() != n {
                return Err(GeomError::Contract("parameter count".into()));
            }
            let out = f(&Jet::variables(u));
            let big_n = out.len();
            if big_n != self.ambient.coord_len() {
                return Err(GeomError::Contract("coordinate count".into()));
            }
            let value = DVector::from_fn(big_n, |k, _| out[k].v);
            let first = DMatrix::from_fn(big_n, n, |k, i| out[k].grad(i));
            let mut second = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    second.push(DVector::from_fn(big_n, |k, _| out[k].hess(i, j)));
                }
            }
            let jet = ChartJet { value, first, second };
            check_finite(&jet, u)?;
            Ok(jet)
        })())
    }

    pub fn jet_fd(&self, u: &[f64]) -> Result<ChartJet> {
        let n = self.n;
        let value = self.eval(u)?;
        let big_n = value.len();
        let h = self.fd.step;
        let at = |shifts: &[(usize, f64)]| -> Result<DVector<f64>> {
            let mut p = u.to_vec();
            for &(i, s) in shifts {
                p[i] += s;
            }
            self.eval(&p)
        };
        let mut first = DMatrix::zeros(big_n, n);
        for i in 0..n {
            let d = (at(&[(i, h)])? - at(&[(i, -h)])?) / (2.0 * h);
            first.set_column(i, &d);
        }
        let second_at = |h2: f64| -> Result<Vec<DVector<f64>>> {
            let mut out = vec![DVector::zeros(big_n); n * n];
            for i in 0..n {
                let d = (at(&[(i, h2)])? - &value * 2.0 + at(&[(i, -h2)])?) / (h2 * h2);
                out[i * n + i] = d;
                for j in (i + 1)..n {
                    let d = (at(&[(i, h2), (j, h2)])? - at(&[(i, h2), (j, -h2)])? - at(&[(i, -h2), (j, h2)])?
                        + at(&[(i, -h2), (j, -h2)])?)
                        / (4.0 * h2 * h2);
                    out[j * n + i] = d.clone();
                    out[i * n + j] = d;
                }
            }
            Ok(out)
        };
        let h2 = self.fd.second_step;
        let mut second = second_at(h2)?;
        if self.fd.richardson {
            let fine = second_at(0.5 * h2)?;
            for (c, f) in second.iter_mut().zip(fine) {
                *c = (f * 4.0 - &*c) / 3.0;
            }
        }
        let jet = ChartJet { value, first, second };
        check_finite(&jet, u)?;
        Ok(jet)
    }
}

fn check_finite(jet: &ChartJet, u: &[f64]) -> Result<()> {
    let ok = jet.value.iter().all(|x| x.is_finite())
        && jet.first.iter().all(|x| x.is_finite())
        && jet.second.iter().all(|v| v.iter().all(|x| x.is_finite()));
    if ok {
        Ok(())
    } else {
        Err(GeomError::NonFinite(u.to_vec()))
    }
}

/// First and second fundamental forms at one chart point.
#[derive(Clone, Debug)]
pub struct FundamentalForms {
    pub u: Vec<f64>,
    pub ambient: Ambient,
    pub jet: ChartJet,
    /// g_ij = ⟨f_i, f_j⟩.
    pub metric: DMatrix<f64>,
    /// Orthonormal basis of the normal space (⊥ tangents and, for c ≠ 0, ⊥ f).
    pub normal_frame: Vec<DVector<f64>>,
    /// ⟨α(∂_i, ∂_j), ν_a⟩ for each frame vector ν_a.
    pub second_form: Vec<DMatrix<f64>>,
    /// Frame coordinates of the mean curvature vector ℋ.
    pub mean_curvature: DVector<f64>,
    /// Orthonormalized span of the tangents (and position when c ≠ 0).
    occupied: Vec<DVector<f64>>,
    /// Columns are g-orthonormal tangent vectors in parameter coordinates.
    orthonormal_tangent: DMatrix<f64>,
}

pub fn fundamental_forms(chart: &ImmersionChart, u: &[f64]) -> Result<FundamentalForms> {
    let jet = chart.jet(u)?;
    FundamentalForms::from_jet(chart.ambient(), u, jet)
}

impl FundamentalForms {
    pub fn from_jet(ambient: Ambient, u: &[f64], jet: ChartJet) -> Result<Self> {
        let n = jet.n();
        let big_n = jet.value.len();
        let t = &jet.first;
        let metric = DMatrix::from_fn(n, n, |i, j| ambient.inner(&t.column(i).into_owned(), &t.column(j).into_owned()));
        let eig = SymmetricEigen::new(metric.clone());
        let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let sigma_min = if n == 0 { f64::INFINITY } else { min_eig.max(0.0).sqrt() };
        if !(sigma_min > RANK_FLOOR) {
            return Err(GeomError::DegenerateChart { at: u.to_vec(), sigma_min });
        }
        // g = L Lᵀ; columns of L^{-T} are g-orthonormal
        let orthonormal_tangent = if n == 0 {
            DMatrix::zeros(0, 0)
        } else {
            let chol =
                metric.clone().cholesky().ok_or_else(|| GeomError::DegenerateChart { at: u.to_vec(), sigma_min })?;
            let l = chol.l();
            l.transpose().try_inverse().expect("triangular factor is invertible")
        };

        let mut occupied: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
        let push = |v: DVector<f64>, occ: &mut Vec<DVector<f64>>| {
            let mut v = v;
            for _ in 0..2 {
                for q in occ.iter() {
                    let qq = ambient.inner(q, q);
                    v -= q * (ambient.inner(&v, q) / qq);
                }
            }
            let vv = ambient.inner(&v, &v);
            v /= vv.abs().sqrt();
            occ.push(v);
        };
        if ambient.curvature != 0.0 {
            push(jet.value.clone(), &mut occupied);
        }
        for i in 0..n {
            push(t.column(i).into_owned(), &mut occupied);
        }

        let p = ambient.dim - n;
        let mut frame: Vec<DVector<f64>> = Vec::with_capacity(p);
        let project = |v: &DVector<f64>, basis: &[DVector<f64>]| {
            let mut v = v.clone();
            for _ in 0..2 {
                for q in basis {
                    let qq = ambient.inner(q, q);
                    v -= q * (ambient.inner(&v, q) / qq);
                }
            }
            v
        };
        for _ in 0..p {
            let mut all = occupied.clone();
            all.extend(frame.iter().cloned());
            let mut best: Option<(f64, DVector<f64>)> = None;
            for k in 0..big_n {
                let mut e = DVector::zeros(big_n);
                e[k] = 1.0;
                let r = project(&e, &all);
                let rr = ambient.inner(&r, &r);
                if best.as_ref().is_none_or(|(s, _)| rr > *s + 1e-12) {
                    best = Some((rr, r));
                }
            }
            let (rr, r) = best.expect("nonempty basis");
            frame.push(r / rr.sqrt());
        }

        if p == 1 {
            // orient so that (position, tangents, normal) is a positive basis
            let mut cols: Vec<DVector<f64>> = Vec::with_capacity(big_n);
            if ambient.curvature != 0.0 {
                cols.push(jet.value.clone());
            }
            cols.extend((0..n).map(|i| t.column(i).into_owned()));
            cols.push(frame[0].clone());
            if DMatrix::from_columns(&cols).determinant() < 0.0 {
                frame[0] = -frame[0].clone();
            }
        }

        let second_form: Vec<DMatrix<f64>> =
            frame.iter().map(|nu| DMatrix::from_fn(n, n, |i, j| ambient.inner(jet.d2(i, j), nu))).collect();
        let ginv = if n == 0 { DMatrix::zeros(0, 0) } else { metric.clone().try_inverse().expect("metric invertible") };
        let mean_curvature = DVector::from_iterator(
            p,
            second_form.iter().map(|b| if n == 0 { 0.0 } else { (&ginv * b).trace() / n as f64 }),
        );
        Ok(FundamentalForms {
            u: u.to_vec(),
            ambient,
            jet,
            metric,
            normal_frame: frame,
            second_form,
            mean_curvature,
            occupied,
            orthonormal_tangent,
        })
    }

    pub fn n(&self) -> usize {
        self.metric.nrows()
    }

    pub fn codim(&self) -> usize {
        self.normal_frame.len()
    }

    pub fn position(&self) -> &DVector<f64> {
        &self.jet.value
    }

    pub fn tangents(&self) -> &DMatrix<f64> {
        &self.jet.first
    }

    /// Columns are g-orthonormal tangent vectors in parameter coordinates.
    pub fn orthonormal_tangent(&self) -> &DMatrix<f64> {
        &self.orthonormal_tangent
    }

    /// Ambient images f_*E_i of the orthonormal tangent frame.
    pub fn orthonormal_tangent_ambient(&self) -> DMatrix<f64> {
        &self.jet.first * &self.orthonormal_tangent
    }

    /// Ambient normal vector with the given frame coordinates.
    pub fn normal_from_frame(&self, coords: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(self.jet.value.len());
        for (c, nu) in coords.iter().zip(&self.normal_frame) {
            v += nu * *c;
        }
        v
    }

    pub fn frame_coords(&self, xi: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.codim(), self.normal_frame.iter().map(|nu| self.ambient.inner(xi, nu)))
    }

    /// Removes tangent (and position) components.
    pub fn project_normal(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut v = v.clone();
        for _ in 0..2 {
            for q in &self.occupied {
                let qq = self.ambient.inner(q, q);
                v -= q * (self.ambient.inner(&v, q) / qq);
            }
        }
        v
    }

    /// B_ξ(∂_i, ∂_j) = ⟨f_ij, ξ⟩ for an ambient normal ξ.
    pub fn second_form_along(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.ambient.inner(self.jet.d2(i, j), xi))
    }

    /// A_ξ in the g-orthonormal tangent frame (a symmetric matrix).
    pub fn shape_operator_ambient(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let b = self.second_form_along(xi);
        let e = &self.orthonormal_tangent;
        let s = e.transpose() * b * e;
        (&s + s.transpose()) * 0.5
    }

    /// A_ξ for ξ given by unit frame coordinates.
    pub fn shape_operator(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        if xi.len() != self.codim() {
            return Err(GeomError::Contract(format!(
                "normal has {} frame coordinates, codimension is {}",
                xi.len(),
                self.codim()
            )));
        }
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(GeomError::InvalidInput(format!("normal has length {norm}")));
        }
        Ok(self.shape_operator_ambient(&self.normal_from_frame(xi)))
    }

    /// A_ξ as a matrix acting on parameter coordinates: g⁻¹B_ξ.
    pub fn shape_operator_coords(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let e = &self.orthonormal_tangent;
        let s = self.shape_operator_ambient(xi);
        let einv = e.clone().try_inverse().expect("frame invertible");
        e * s * einv
    }

    pub fn spectrum_ambient(&self, xi: &DVector<f64>, cluster_tol: f64) -> ShapeSpectrum {
        ShapeSpectrum::from_symmetric(&self.shape_operator_ambient(xi), &self.orthonormal_tangent, cluster_tol)
    }

    pub fn spectrum(&self, xi: &[f64], cluster_tol: f64) -> Result<ShapeSpectrum> {
        let a = self.shape_operator(xi)?;
        Ok(ShapeSpectrum::from_symmetric(&a, &self.orthonormal_tangent, cluster_tol))
    }

    /// dξ/ds along a curve with velocity `u_dot` for a parallel normal field:
    /// ξ' = −f_*A_ξ u'.
    pub fn parallel_normal_derivative(&self, xi: &DVector<f64>, u_dot: &[f64]) -> DVector<f64> {
        let n = self.n();
        let b = self.second_form_along(xi);
        let ud = DVector::from_column_slice(u_dot);
        let rhs = &b * &ud;
        let ginv = self.metric.clone().try_inverse().expect("metric invertible");
        let a = ginv * rhs;
        let mut out = DVector::zeros(self.jet.value.len());
        for i in 0..n {
            out -= self.jet.first.column(i) * a[i];
        }
        out
    }

    /// Metric length of a parameter-space vector.
    pub fn metric_norm(&self, v: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        (v.transpose() * &self.metric * &v)[(0, 0)].max(0.0).sqrt()
    }

    /// Normal frame built from `seeds` projected onto the normal space, in order.
    /// Smooth in u as long as the projected seeds stay independent.
    pub fn seeded_normal_frame(&self, seeds: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(seeds.len());
        for s in seeds {
            let mut v = self.project_normal(s);
            for _ in 0..2 {
                for q in &out {
                    v -= q * self.ambient.inner(&v, q);
                }
            }
            let vv = self.ambient.inner(&v, &v);
            if vv < 1e-12 {
                return Err(GeomError::InvalidInput("seed vectors degenerate in the normal space".into()));
            }
            out.push(v / vv.sqrt());
        }
        Ok(out)
    }
}

/// A_ξ at chart point u for a unit normal given in normal-frame coordinates.
pub fn shape_operator(chart: &ImmersionChart, u: &[f64], xi: &[f64]) -> Result<DMatrix<f64>> {
    fundamental_forms(chart, u)?.shape_operator(xi)
}

pub fn principal_spectrum(chart: &ImmersionChart, u: &[f64], xi: &[f64], cluster_tol: f64) -> Result<ShapeSpectrum> {
    fundamental_forms(chart, u)?.spectrum(xi, cluster_tol)
}

/// Frobenius norm of the normal curvature tensor from the Ricci equation:
/// ⟨R^⊥(E_i,E_j)ν_a, ν_b⟩ = ⟨[A_a, A_b]E_i, E_j⟩, summed over a < b and i < j.
pub fn normal_curvature_norm(chart: &ImmersionChart, u: &[f64]) -> Result<f64> {
    let forms = fundamental_forms(chart, u)?;
    Ok(normal_curvature_from_forms(&forms))
}

pub fn normal_curvature_from_forms(forms: &FundamentalForms) -> f64 {
    let shapes: Vec<DMatrix<f64>> = forms.normal_frame.iter().map(|nu| forms.shape_operator_ambient(nu)).collect();
    let n = forms.n();
    let mut total = 0.0;
    for a in 0..shapes.len() {
        for b in (a + 1)..shapes.len() {
            let c = &shapes[a] * &shapes[b] - &shapes[b] * &shapes[a];
            for i in 0..n {
                for j in (i + 1)..n {
                    total += c[(i, j)] * c[(i, j)];
                }
            }
        }
    }
    total.sqrt()
}

/// Gaussian curvature of a surface from the Gauss equation: K = c + Σ_a det A_a.
pub fn gauss_curvature(forms: &FundamentalForms) -> f64 {
    forms.ambient.curvature
        + forms.normal_frame.iter().map(|nu| forms.shape_operator_ambient(nu).determinant()).sum::<f64>()
}

/// Allowed drift of the transported frame's Gram matrix before the step is refined.
pub const TRANSPORT_DRIFT_TOL: f64 = 1e-6;
const TRANSPORT_REFINEMENTS: usize = 10;

/// ξ' = −f_*(g⁻¹ b) with b_i = ⟨ξ, f_ij⟩ u'_j: the ambient derivative of a
/// ∇^⊥-parallel normal field along a curve with velocity u'.
pub fn parallel_transport_rhs(
    ambient: Ambient,
    jet: &ChartJet,
    xi: &DVector<f64>,
    u_dot: &[f64],
) -> Result<DVector<f64>> {
    let n = jet.n();
    let t = &jet.first;
    let metric = DMatrix::from_fn(n, n, |i, j| ambient.inner(&t.column(i).into_owned(), &t.column(j).into_owned()));
    let b = DVector::from_fn(n, |i, _| (0..n).map(|j| ambient.inner(jet.d2(i, j), xi) * u_dot[j]).sum::<f64>());
    let a = metric.lu().solve(&b).ok_or_else(|| GeomError::DegenerateChart { at: Vec::new(), sigma_min: 0.0 })?;
    Ok(-(t * a))
}

/// Transports a normal frame along the parameter path `path(τ) = (u, u')`,
/// τ ∈ [0, 1], with classical RK4. The step count doubles (up to ten times)
/// while the frame's Gram matrix drifts by more than [`TRANSPORT_DRIFT_TOL`].
pub fn transport_normals_along(
    chart: &ImmersionChart,
    path: &dyn Fn(f64) -> (Vec<f64>, Vec<f64>),
    frame: &[DVector<f64>],
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    let ambient = chart.ambient();
    let gram = |fr: &[DVector<f64>]| DMatrix::from_fn(fr.len(), fr.len(), |a, b| ambient.inner(&fr[a], &fr[b]));
    let start_gram = gram(frame);
    let mut steps = steps.max(1);
    let mut last_drift = f64::INFINITY;
    for _ in 0..=TRANSPORT_REFINEMENTS {
        let h = 1.0 / steps as f64;
        let mut cur: Vec<DVector<f64>> = frame.to_vec();
        let rhs = |tau: f64, state: &[DVector<f64>]| -> Result<Vec<DVector<f64>>> {
            let (u, ud) = path(tau);
            let jet = chart.jet(&u)?;
            state.iter().map(|xi| parallel_transport_rhs(ambient, &jet, xi, &ud)).collect()
        };
        let axpy = |base: &[DVector<f64>], k: &[DVector<f64>], s: f64| -> Vec<DVector<f64>> {
            base.iter().zip(k).map(|(b, d)| b + d * s).collect()
        };
        for step in 0..steps {
            let tau = step as f64 * h;
            let k1 = rhs(tau, &cur)?;
            let k2 = rhs(tau + 0.5 * h, &axpy(&cur, &k1, 0.5 * h))?;
            let k3 = rhs(tau + 0.5 * h, &axpy(&cur, &k2, 0.5 * h))?;
            let k4 = rhs(tau + h, &axpy(&cur, &k3, h))?;
            for (a, xi) in cur.iter_mut().enumerate() {
                *xi += (&k1[a] + &k2[a] * 2.0 + &k3[a] * 2.0 + &k4[a]) * (h / 6.0);
            }
        }
        last_drift = (gram(&cur) - &start_gram).amax();
        if last_drift <= TRANSPORT_DRIFT_TOL {
            return Ok(cur);
        }
        steps *= 2;
    }
    Err(GeomError::Integrator(format!(
        "normal transport drift {last_drift:.3e} after {TRANSPORT_REFINEMENTS} refinements"
    )))
}

/// Transport along the straight parameter segment from `from` to `to`.
pub fn transport_normals(
    chart: &ImmersionChart,
    from: &[f64],
    to: &[f64],
    frame: &[DVector<f64>],
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    let from = from.to_vec();
    let delta: Vec<f64> = to.iter().zip(&from).map(|(b, a)| b - a).collect();
    let path = move |tau: f64| {
        let u: Vec<f64> = from.iter().zip(&delta).map(|(a, d)| a + tau * d).collect();
        (u, delta.clone())
    };
    transport_normals_along(chart, &path, frame, steps)
}

/// Eigen-decomposition of a shape operator with clustered eigenvalues.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeSpectrum {
    /// Mean value of each cluster, ascending.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Per cluster, g-orthonormal eigenvectors in parameter coordinates (n×m).
    #[serde(skip)]
    pub eigenbasis: Vec<DMatrix<f64>>,
    /// Per cluster, the same eigenvectors in the orthonormal tangent frame.
    #[serde(skip)]
    pub frame_eigenbasis: Vec<DMatrix<f64>>,
    /// All eigenvalues ascending.
    pub raw: Vec<f64>,
    pub cluster_tol: f64,
}

impl ShapeSpectrum {
    /// `sym` is A in the orthonormal frame whose parameter coordinates are the
    /// columns of `frame`.
    pub fn from_symmetric(sym: &DMatrix<f64>, frame: &DMatrix<f64>, cluster_tol: f64) -> Self {
        let n = sym.nrows();
        let eig = SymmetricEigen::new(sym.clone());
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let raw: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (pos, &i) in idx.iter().enumerate() {
            if pos > 0 && raw[pos] - raw[pos - 1] <= cluster_tol {
                groups.last_mut().expect("open group").push(i);
            } else {
                groups.push(vec![i]);
            }
        }
        let mut eigenvalues = Vec::with_capacity(groups.len());
        let mut multiplicities = Vec::with_capacity(groups.len());
        let mut eigenbasis = Vec::with_capacity(groups.len());
        let mut frame_eigenbasis = Vec::with_capacity(groups.len());
        for g in &groups {
            let mean = g.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / g.len() as f64;
            eigenvalues.push(mean);
            multiplicities.push(g.len());
            let w = DMatrix::from_fn(n, g.len(), |r, c| eig.eigenvectors[(r, g[c])]);
            eigenbasis.push(frame * &w);
            frame_eigenbasis.push(w);
        }
        ShapeSpectrum { eigenvalues, multiplicities, eigenbasis, frame_eigenbasis, raw, cluster_tol }
    }

    pub fn cluster_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest gap between consecutive clusters (∞ for one cluster).
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Index of the cluster whose value is closest to `kappa`.
    pub fn nearest_cluster(&self, kappa: f64) -> usize {
        self.eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - kappa).abs().total_cmp(&(b.1 - kappa).abs()))
            .map(|(i, _)| i)
            .expect("nonempty spectrum")
    }
}
