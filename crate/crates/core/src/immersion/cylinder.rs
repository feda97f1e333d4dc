use nalgebra::{DMatrix, DVector};

use super::{fundamental_forms, transport_normals, Ambient, Domain, ImmersionChart};
use crate::error::{GeomError, Result};
use crate::jet::{cos_sqrt, sinc_sqrt};

/// RK4 steps for transporting the fiber frame out from the base point. Fixed
/// so that the chart is a smooth function of its parameters.
const FIBER_TRANSPORT_STEPS: usize = 400;
/// Tolerance on parallelism and flatness of the fiber subbundle.
pub const HOLONOMY_TOL: f64 = 1e-6;
const LOOP_SIDE: f64 = 0.25;

/// A normal subbundle given by an orthonormal frame at one base point and
/// extended by normal parallel transport.
#[derive(Clone, Debug)]
pub struct NormalSubbundle {
    pub base_point: Vec<f64>,
    pub frame: Vec<DVector<f64>>,
}

#[derive(Clone, Debug)]
pub struct CylinderChart {
    pub chart: ImmersionChart,
    pub base: ImmersionChart,
    pub subbundle: NormalSubbundle,
    /// Largest frame discrepancy after transport around the coordinate loops.
    pub holonomy_residual: f64,
}

/// exp_x(w) in the space form of curvature c (coordinates of its standard model).
pub fn space_form_exp(ambient: Ambient, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let c = ambient.curvature;
    if c == 0.0 {
        x + w
    } else {
        let z = c * ambient.inner(w, w);
        x * cos_sqrt(&z) + w * sinc_sqrt(&z)
    }
}

fn check_frame(base: &ImmersionChart, v: &NormalSubbundle) -> Result<()> {
    let ambient = base.ambient();
    let jet = base.jet_fd_or_exact(&v.base_point)?;
    let k = base.intrinsic_dim();
    for (a, xi) in v.frame.iter().enumerate() {
        if xi.len() != ambient.coord_len() {
            return Err(GeomError::Contract(format!(
                "fiber vector {a} has {} coordinates, ambient needs {}",
                xi.len(),
                ambient.coord_len()
            )));
        }
        for i in 0..k {
            let t = jet.first.column(i).into_owned();
            let dot = ambient.inner(xi, &t) / ambient.inner(&t, &t).sqrt();
            if dot.abs() > 1e-8 {
                return Err(GeomError::InvalidInput(format!(
                    "fiber vector {a} is not normal (tangent component {dot:.3e})"
                )));
            }
        }
        if ambient.curvature != 0.0 && ambient.inner(xi, &jet.value).abs() > 1e-8 {
            return Err(GeomError::InvalidInput(format!("fiber vector {a} is not tangent to the space form")));
        }
    }
    let r = v.frame.len();
    let gram = DMatrix::from_fn(r, r, |a, b| ambient.inner(&v.frame[a], &v.frame[b]));
    let off = (gram - DMatrix::identity(r, r)).amax();
    if off > 1e-8 {
        return Err(GeomError::InvalidInput(format!("fiber frame is not orthonormal (residual {off:.3e})")));
    }
    Ok(())
}

/// Transports the frame around a small square in every coordinate plane at the
/// base point; returns the largest mismatch on return.
fn holonomy(base: &ImmersionChart, v: &NormalSubbundle) -> Result<f64> {
    let k = base.intrinsic_dim();
    let dom = base.domain();
    let u0 = &v.base_point;
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in (i + 1)..k {
            let side = |idx: usize| {
                let room = (dom.hi[idx] - u0[idx]).max(u0[idx] - dom.lo[idx]);
                LOOP_SIDE.min(0.5 * room)
            };
            let (si, sj) = (side(i), side(j));
            let corner = |a: f64, b: f64| {
                let mut u = u0.clone();
                u[i] += a;
                u[j] += b;
                u
            };
            let corners = [corner(0.0, 0.0), corner(si, 0.0), corner(si, sj), corner(0.0, sj), corner(0.0, 0.0)];
            let mut frame = v.frame.clone();
            for w in corners.windows(2) {
                frame = transport_normals(base, &w[0], &w[1], &frame, FIBER_TRANSPORT_STEPS / 4)?;
            }
            for (a, b) in frame.iter().zip(&v.frame) {
                worst = worst.max((a - b).amax());
            }
        }
    }
    Ok(worst)
}

/// γ ∈ V ↦ exp_{g(π(γ))}(γ) in parameters (u, t): the point reached from g(u)
/// along the geodesic with initial velocity Σ t_a ξ_a(u).
///
/// `fiber_half_width` bounds the fiber parameters.
pub fn generalized_cylinder_chart(
    base: &ImmersionChart,
    subbundle: &NormalSubbundle,
    fiber_half_width: f64,
) -> Result<CylinderChart> {
    let k = base.intrinsic_dim();
    if subbundle.base_point.len() != k {
        return Err(GeomError::Contract("base point has the wrong number of parameters".into()));
    }
    if subbundle.frame.is_empty() {
        return Err(GeomError::InvalidInput("fiber frame is empty".into()));
    }
    check_frame(base, subbundle)?;
    let holonomy_residual = holonomy(base, subbundle)?;
    if holonomy_residual > HOLONOMY_TOL {
        return Err(GeomError::InvalidInput(format!(
            "normal subbundle is not parallel and flat: holonomy residual {holonomy_residual:.3e}"
        )));
    }
    let rank = subbundle.frame.len();
    let n = k + rank;
    let ambient = Ambient { dim: base.ambient().dim, curvature: base.ambient().curvature };
    if n > ambient.dim {
        return Err(GeomError::InvalidInput("fiber rank exceeds the codimension".into()));
    }
    let mut domain = base.domain().clone();
    domain.lo.extend(std::iter::repeat_n(-fiber_half_width, rank));
    domain.hi.extend(std::iter::repeat_n(fiber_half_width, rank));

    let g = base.clone();
    let sb = subbundle.clone();
    let eval = move |p: &[f64]| -> Vec<f64> {
        let (u, t) = p.split_at(k);
        let point = match g.eval(u) {
            Ok(x) => x,
            Err(_) => return vec![f64::NAN; ambient.coord_len()],
        };
        let frame = if k == 0 || u == sb.base_point.as_slice() {
            Ok(sb.frame.clone())
        } else {
            transport_normals(&g, &sb.base_point, u, &sb.frame, FIBER_TRANSPORT_STEPS)
        };
        let Ok(frame) = frame else {
            return vec![f64::NAN; ambient.coord_len()];
        };
        let mut w = DVector::zeros(point.len());
        for (ta, xi) in t.iter().zip(&frame) {
            w += xi * *ta;
        }
        space_form_exp(ambient, &point, &w).as_slice().to_vec()
    };
    let chart = ImmersionChart::plain(format!("cylinder({})", base.name()), n, ambient, domain, eval);
    Ok(CylinderChart { chart, base: base.clone(), subbundle: subbundle.clone(), holonomy_residual })
}

impl CylinderChart {
    pub fn base_dim(&self) -> usize {
        self.base.intrinsic_dim()
    }

    /// Largest |⟨α(∂_t_a, ∂_j), ν⟩| over fiber directions ∂_t_a, all chart
    /// directions ∂_j and an orthonormal normal frame ν, with ∂'s normalized.
    pub fn fiber_nullity_residual(&self, u: &[f64]) -> Result<f64> {
        let forms = fundamental_forms(&self.chart, u)?;
        let n = forms.n();
        let k = self.base_dim();
        let mut worst = 0.0f64;
        for b in &forms.second_form {
            for a in k..n {
                for j in 0..n {
                    let s = (forms.metric[(a, a)] * forms.metric[(j, j)]).sqrt();
                    worst = worst.max(b[(a, j)].abs() / s);
                }
            }
        }
        Ok(worst)
    }
}

impl ImmersionChart {
    /// Exact jet when the chart has one, finite differences otherwise.
    pub(crate) fn jet_fd_or_exact(&self, u: &[f64]) -> Result<super::ChartJet> {
        match self.jet_analytic(u) {
            Some(j) => j,
            None => self.jet_fd(u),
        }
    }
}

/// Domain helper for fiber-only charts over a point.
pub fn point_chart(name: &str, ambient: Ambient, point: Vec<f64>) -> ImmersionChart {
    ImmersionChart::analytic(name, 0, ambient, Domain { lo: vec![], hi: vec![] }, move |_| {
        point.iter().map(|&x| crate::jet::Jet::constant(x)).collect()
    })
}
