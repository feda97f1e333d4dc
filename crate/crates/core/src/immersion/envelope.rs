use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::builtin::{builtin_chart, stereo, BuiltinChart, CircleHost};
use super::{fundamental_forms, transport_normals, Ambient, Domain, ImmersionChart};
use crate::error::{GeomError, Result};
use crate::jet::{Jet, Real};

const FRAME_TRANSPORT_STEPS: usize = 400;

/// Radius of the sphere family with its gradient in chart coordinates.
pub type RadiusFn = Arc<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>;

pub fn constant_radius(r: f64) -> RadiusFn {
    Arc::new(move |u: &[f64]| (r, vec![0.0; u.len()]))
}

/// The hypersurface enveloping the spheres of radius r(u) centered at g(u).
#[derive(Clone)]
pub struct EnvelopeChart {
    pub chart: ImmersionChart,
    pub center: ImmersionChart,
    radius: RadiusFn,
    base_point: Vec<f64>,
    base_frame: Vec<DVector<f64>>,
}

impl std::fmt::Debug for EnvelopeChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnvelopeChart").field("chart", &self.chart).field("center", &self.center).finish()
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EnvelopeResiduals {
    /// max |‖f − g‖² − r²|.
    pub position: f64,
    /// max |⟨f − g, ∂_i g⟩ + r ∂_i r|.
    pub tangency: f64,
    pub samples: usize,
    /// Sample points where the envelope differential drops rank.
    pub singular_points: Vec<Vec<f64>>,
}

struct Pieces {
    center: DVector<f64>,
    tangents: DMatrix<f64>,
    r: f64,
    dr: Vec<f64>,
    point: DVector<f64>,
}

fn fiber_domain(dim: usize) -> (Vec<f64>, Vec<f64>) {
    if dim == 1 {
        (vec![-PI], vec![PI])
    } else {
        (vec![-1.5; dim], vec![1.5; dim])
    }
}

fn fiber_direction(t: &[f64]) -> Vec<f64> {
    if t.len() == 1 {
        vec![t[0].cos(), t[0].sin()]
    } else {
        stereo(t)
    }
}

/// Removes tangential drift left by the integrator and re-orthonormalizes.
fn renormalize(tangents: &DMatrix<f64>, frame: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let q = tangents.clone().qr().q();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(frame.len());
    for v in frame {
        let mut v = &v - &q * (q.transpose() * &v);
        for w in &out {
            v -= w * w.dot(&v);
        }
        out.push(v.normalize());
    }
    out
}

fn grad_norm_sq(metric: &DMatrix<f64>, dr: &[f64]) -> Option<f64> {
    let d = DVector::from_column_slice(dr);
    let ginv_d = metric.clone().lu().solve(&d)?;
    Some(d.dot(&ginv_d))
}

/// f = g − r∇r − r√(1 − |∇r|²)φ in parameters (u, t), where φ(u, t) sweeps the
/// unit sphere of the normal space of g at u. The normal frame is carried by
/// parallel transport from the center of the domain.
pub fn envelope_chart(center: &ImmersionChart, radius: RadiusFn) -> Result<EnvelopeChart> {
    let ambient = center.ambient();
    if ambient.curvature != 0.0 {
        return Err(GeomError::NotApplicable("envelopes are only constructed in Euclidean space".into()));
    }
    let k = center.intrinsic_dim();
    let m = ambient.dim;
    if k + 2 > m {
        return Err(GeomError::InvalidInput(format!("a {k}-parameter family in R^{m} has no fiber sphere to sweep")));
    }
    let n = m - 1;
    let fiber = n - k;
    let base_point = center.domain().center();
    let base_frame = fundamental_forms(center, &base_point)?.normal_frame;

    // |∇r| < 1 on a sample grid of the domain
    let per_axis = 5usize;
    let dom = center.domain().clone();
    for idx in 0..per_axis.pow(k as u32) {
        let mut rem = idx;
        let u: Vec<f64> = (0..k)
            .map(|i| {
                let s = rem % per_axis;
                rem /= per_axis;
                dom.lo[i] + (dom.hi[i] - dom.lo[i]) * (s as f64 + 0.5) / per_axis as f64
            })
            .collect();
        let (r, dr) = radius(&u);
        if !(r > 0.0) {
            return Err(GeomError::InvalidInput(format!("radius {r} is not positive at u = {u:?}")));
        }
        let jet = center.jet_fd_or_exact(&u)?;
        let metric = jet.first.transpose() * &jet.first;
        let gn = grad_norm_sq(&metric, &dr).unwrap_or(f64::INFINITY).sqrt();
        if gn >= 1.0 {
            return Err(GeomError::EnvelopeDegenerate { at: u, grad_norm: gn });
        }
    }

    let (mut lo, mut hi) = (dom.lo.clone(), dom.hi.clone());
    let (flo, fhi) = fiber_domain(fiber);
    lo.extend(flo);
    hi.extend(fhi);

    let mut env = EnvelopeChart {
        chart: ImmersionChart::plain("pending", n, ambient, Domain { lo: lo.clone(), hi: hi.clone() }, |_| vec![]),
        center: center.clone(),
        radius,
        base_point,
        base_frame,
    };
    let inner = env.clone();
    env.chart =
        ImmersionChart::plain(format!("envelope({})", center.name()), n, ambient, Domain { lo, hi }, move |p| {
            match inner.pieces(p) {
                Ok(pc) => pc.point.as_slice().to_vec(),
                Err(_) => vec![f64::NAN; m],
            }
        });
    Ok(env)
}

impl EnvelopeChart {
    pub fn family_dim(&self) -> usize {
        self.center.intrinsic_dim()
    }

    pub fn radius_at(&self, u: &[f64]) -> (f64, Vec<f64>) {
        (self.radius)(u)
    }

    fn pieces(&self, p: &[f64]) -> Result<Pieces> {
        let k = self.family_dim();
        let (u, t) = p.split_at(k);
        let jet = self.center.jet_fd_or_exact(u)?;
        let frame = if u == self.base_point.as_slice() {
            self.base_frame.clone()
        } else {
            transport_normals(&self.center, &self.base_point, u, &self.base_frame, FRAME_TRANSPORT_STEPS)?
        };
        let frame = renormalize(&jet.first, frame);
        let coef = fiber_direction(t);
        let mut phi = DVector::zeros(jet.value.len());
        for (c, nu) in coef.iter().zip(&frame) {
            phi += nu * *c;
        }
        let (r, dr) = (self.radius)(u);
        let metric = jet.first.transpose() * &jet.first;
        let d = DVector::from_column_slice(&dr);
        let ginv_d =
            metric.lu().solve(&d).ok_or_else(|| GeomError::DegenerateChart { at: u.to_vec(), sigma_min: 0.0 })?;
        let grad = &jet.first * &ginv_d;
        let gn2 = d.dot(&ginv_d);
        if gn2 >= 1.0 {
            return Err(GeomError::EnvelopeDegenerate { at: u.to_vec(), grad_norm: gn2.sqrt() });
        }
        let point = &jet.value - &grad * r - phi * (r * (1.0 - gn2).sqrt());
        Ok(Pieces { center: jet.value, tangents: jet.first, r, dr, point })
    }

    /// (|‖f−g‖² − r²|, max_i |⟨f−g, ∂_i g⟩ + r ∂_i r|) at one chart point.
    pub fn point_residuals(&self, p: &[f64]) -> Result<(f64, f64)> {
        let pc = self.pieces(p)?;
        let diff = &pc.point - &pc.center;
        let res_a = (diff.norm_squared() - pc.r * pc.r).abs();
        let res_b =
            (0..pc.dr.len()).map(|i| (diff.dot(&pc.tangents.column(i)) + pc.r * pc.dr[i]).abs()).fold(0.0, f64::max);
        Ok((res_a, res_b))
    }

    /// The unit normal (g − f)/r pointing to the sphere center.
    pub fn center_normal(&self, p: &[f64]) -> Result<DVector<f64>> {
        let pc = self.pieces(p)?;
        Ok((pc.center - pc.point) / pc.r)
    }
}

/// The principal curvature 1/r carried by the enveloped sphere at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusCluster {
    pub u: Vec<f64>,
    pub expected: f64,
    /// Nearest cluster value of the shape operator along the center normal.
    pub found: f64,
    pub multiplicity: usize,
    /// n − k: chart dimension minus family dimension.
    pub expected_multiplicity: usize,
}

impl RadiusCluster {
    pub fn error(&self) -> f64 {
        (self.found - self.expected).abs()
    }
}

pub fn radius_cluster(env: &EnvelopeChart, p: &[f64], cluster_tol: f64) -> Result<RadiusCluster> {
    let xi = env.center_normal(p)?;
    let forms = fundamental_forms(&env.chart, p)?;
    let spec = forms.spectrum_ambient(&xi, cluster_tol);
    let (r, _) = env.radius_at(&p[..env.family_dim()]);
    let idx = spec.nearest_cluster(1.0 / r);
    Ok(RadiusCluster {
        u: p.to_vec(),
        expected: 1.0 / r,
        found: spec.eigenvalues[idx],
        multiplicity: spec.multiplicities[idx],
        expected_multiplicity: env.chart.intrinsic_dim() - env.family_dim(),
    })
}

/// Residuals of the envelope system over an interior grid with `per_axis`
/// samples along each chart coordinate.
pub fn envelope_residuals(env: &EnvelopeChart, per_axis: usize) -> Result<EnvelopeResiduals> {
    let dom = env.chart.domain().shrunk(0.9);
    let n = env.chart.intrinsic_dim();
    let per_axis = per_axis.max(1);
    let mut out = EnvelopeResiduals::default();
    for idx in 0..per_axis.pow(n as u32) {
        let mut rem = idx;
        let p: Vec<f64> = (0..n)
            .map(|i| {
                let s = rem % per_axis;
                rem /= per_axis;
                dom.lo[i] + (dom.hi[i] - dom.lo[i]) * (s as f64 + 0.5) / per_axis as f64
            })
            .collect();
        let (a, b) = env.point_residuals(&p)?;
        out.position = out.position.max(a);
        out.tangency = out.tangency.max(b);
        out.samples += 1;
        if let Err(GeomError::DegenerateChart { .. }) = fundamental_forms(&env.chart, &p) {
            out.singular_points.push(p);
        }
    }
    Ok(out)
}

/// Named sphere families for the command line and the examples.
#[derive(Clone, Debug, PartialEq)]
pub enum EnvelopeSpec {
    /// Constant radius about the x-axis of ℝ³.
    Cylinder { radius: f64 },
    /// Constant radius about a circle of radius `major` in the xy-plane.
    Torus { major: f64, radius: f64 },
    /// Seeded space curve s ↦ (s, a s², b s³) with radius r₀ + ε sin s.
    Generic { seed: u64 },
}

impl FromStr for EnvelopeSpec {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = args
                .split(',')
                .filter(|t| !t.is_empty())
                .map(|t| t.trim().parse::<f64>().map_err(|_| GeomError::Parse(format!("bad number {t:?} in {s:?}"))))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(GeomError::Parse(format!("{head} takes {n} parameters, got {}", v.len())));
            }
            Ok(v)
        };
        match head {
            "cylinder" => Ok(EnvelopeSpec::Cylinder { radius: nums(1)?[0] }),
            "torus" => {
                let v = nums(2)?;
                Ok(EnvelopeSpec::Torus { major: v[0], radius: v[1] })
            }
            "generic" => args
                .trim()
                .parse::<u64>()
                .map(|seed| EnvelopeSpec::Generic { seed })
                .map_err(|_| GeomError::Parse(format!("generic takes an integer seed, got {args:?}"))),
            _ => Err(GeomError::Unknown(format!("envelope family {s:?}; try cylinder:r, torus:R,r or generic:seed"))),
        }
    }
}

impl std::fmt::Display for EnvelopeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvelopeSpec::Cylinder { radius } => write!(f, "cylinder:{radius}"),
            EnvelopeSpec::Torus { major, radius } => write!(f, "torus:{major},{radius}"),
            EnvelopeSpec::Generic { seed } => write!(f, "generic:{seed}"),
        }
    }
}

impl EnvelopeSpec {
    pub fn build(&self) -> Result<EnvelopeChart> {
        match *self {
            EnvelopeSpec::Cylinder { radius } => {
                let line = builtin_chart(&BuiltinChart::FlatPlane { n: 1, m: 3 })?;
                envelope_chart(&line, constant_radius(radius))
            }
            EnvelopeSpec::Torus { major, radius } => {
                let circle = builtin_chart(&BuiltinChart::Circle { radius: major, host: CircleHost::Euclidean })?;
                envelope_chart(&circle, constant_radius(radius))
            }
            EnvelopeSpec::Generic { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = rng.random_range(-0.25..0.25);
                let b = rng.random_range(-0.1..0.1);
                let r0 = rng.random_range(0.3..0.5);
                let eps = rng.random_range(-0.1..0.1);
                let curve = ImmersionChart::analytic(
                    format!("cubic(a={a:.4},b={b:.4})"),
                    1,
                    Ambient::euclidean(3),
                    Domain::cube(1, 1.0),
                    move |u: &[Jet]| vec![u[0].clone(), u[0].sq() * a, u[0].powi(3) * b],
                );
                let r: RadiusFn = Arc::new(move |u: &[f64]| (r0 + eps * u[0].sin(), vec![eps * u[0].cos()]));
                envelope_chart(&curve, r)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_families_parse_and_satisfy_the_system() {
        for name in ["cylinder:0.6", "torus:2,0.5", "generic:11"] {
            let spec: EnvelopeSpec = name.parse().unwrap();
            assert_eq!(spec.to_string(), name);
            let env = spec.build().unwrap();
            let res = envelope_residuals(&env, 4).unwrap();
            assert!(res.position < 1e-9 && res.tangency < 1e-9, "{name}: {res:?}");
        }
        assert!(matches!("blob:1".parse::<EnvelopeSpec>(), Err(GeomError::Unknown(_))));
    }

    fn line() -> ImmersionChart {
        builtin_chart(&BuiltinChart::FlatPlane { n: 1, m: 3 }).unwrap()
    }

    #[test]
    fn constant_radius_about_a_line_is_a_round_cylinder() {
        let env = envelope_chart(&line(), constant_radius(0.7)).unwrap();
        let x = env.chart.eval(&[0.3, 1.1]).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-12);
        assert!(((x[1] * x[1] + x[2] * x[2]).sqrt() - 0.7).abs() < 1e-12);
        let res = envelope_residuals(&env, 6).unwrap();
        assert!(res.position < 1e-12 && res.tangency < 1e-12);
        assert!(res.singular_points.is_empty());
    }

    #[test]
    fn constant_radius_about_a_circle_is_a_torus() {
        let g = builtin_chart(&BuiltinChart::Circle { radius: 2.0, host: CircleHost::Euclidean }).unwrap();
        let env = envelope_chart(&g, constant_radius(0.5)).unwrap();
        let res = envelope_residuals(&env, 6).unwrap();
        assert!(res.position < 1e-12 && res.tangency < 1e-12);
        let x = env.chart.eval(&[1.0, 2.0]).unwrap();
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!(((rho - 2.0).powi(2) + x[2] * x[2] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn varying_radius_satisfies_envelope_system() {
        let g = ImmersionChart::analytic("parabola", 1, Ambient::euclidean(3), Domain::cube(1, 1.0), |u| {
            vec![u[0].clone(), u[0].sq() * 0.3, crate::jet::Jet::constant(0.0)]
        });
        let r: RadiusFn = Arc::new(|u: &[f64]| (0.6 + 0.2 * u[0].sin(), vec![0.2 * u[0].cos()]));
        let env = envelope_chart(&g, r).unwrap();
        let res = envelope_residuals(&env, 7).unwrap();
        assert!(res.position < 1e-9 && res.tangency < 1e-9, "{res:?}");
        let rc = radius_cluster(&env, &[0.2, 0.9], 1e-4).unwrap();
        assert!(rc.error() < 1e-5, "{rc:?}");
        assert_eq!(rc.multiplicity, rc.expected_multiplicity);
    }

    #[test]
    fn steep_radius_is_degenerate() {
        let r: RadiusFn = Arc::new(|u: &[f64]| (5.0 + 1.5 * u[0], vec![1.5]));
        assert!(matches!(envelope_chart(&line(), r), Err(GeomError::EnvelopeDegenerate { .. })));
    }

    #[test]
    fn curved_ambient_is_not_supported() {
        let g = builtin_chart(&BuiltinChart::Circle { radius: 0.5, host: CircleHost::Sphere }).unwrap();
        assert!(matches!(envelope_chart(&g, constant_radius(0.1)), Err(GeomError::NotApplicable(_))));
    }
}
