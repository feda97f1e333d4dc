use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Ambient, ChartMap, Domain, ImmersionChart};
use crate::algebra::{projective_plane_point, Algebra};
use crate::error::{GeomError, Result};
use crate::jet::Real;
use crate::minkowski::{OrthogonalMap, Signature};

/// Where a one-parameter circle lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircleHost {
    /// Circle of given radius in the xy-plane of ℝ³.
    Euclidean,
    /// Circle of given spherical radius about e₀ in 𝕊³.
    Sphere,
}

/// Named charts with closed-form parametrizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BuiltinChart {
    /// Standard embedding of the projective plane over 𝔽 in 𝕊^{3·dim𝔽+1}.
    Veronese {
        algebra: Algebra,
    },
    /// 𝕊^d_{c1} × 𝕊^{n−d}_{c2} ⊂ 𝕊^{n+1} with 1/c1 + 1/c2 = 1.
    SphereProduct {
        d: usize,
        n: usize,
        c1: f64,
        c2: f64,
    },
    /// Torus of revolution in ℝ³.
    Torus {
        major: f64,
        minor: f64,
    },
    /// Tube of radius `minor` about a round (n−1)-sphere of radius `major` in ℝⁿ ⊂ ℝ^{n+1}.
    Cyclide {
        n: usize,
        major: f64,
        minor: f64,
    },
    /// Round n-sphere of radius r in ℝ^{n+1}.
    RoundSphere {
        n: usize,
        radius: f64,
    },
    /// Geodesic n-sphere of spherical radius ρ in 𝕊^{n+1}.
    GeodesicSphere {
        n: usize,
        radius: f64,
    },
    /// Geodesic n-sphere of radius ρ in ℍ^{n+1}.
    HyperbolicSphere {
        n: usize,
        radius: f64,
    },
    /// ℝⁿ ⊂ ℝᵐ.
    FlatPlane {
        n: usize,
        m: usize,
    },
    /// Triaxial ellipsoid with semi-axes a, b, c.
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    Circle {
        radius: f64,
        host: CircleHost,
    },
}

impl BuiltinChart {
    pub fn clifford_torus() -> Self {
        BuiltinChart::SphereProduct { d: 1, n: 2, c1: 2.0, c2: 2.0 }
    }

    pub fn veronese(algebra: Algebra) -> Self {
        BuiltinChart::Veronese { algebra }
    }

    /// Chart names accepted by [`FromStr`], for help output.
    pub fn name_forms() -> &'static [&'static str] {
        &[
            "veronese-R | veronese-C | veronese-H | veronese-O",
            "clifford-torus",
            "sphere-product:d,n,c1,c2",
            "torus:R,a",
            "cyclide:n,R,a",
            "sphere:n,r",
            "geodesic-sphere:n,rho",
            "hyperbolic-sphere:n,rho",
            "plane:n,m",
            "ellipsoid:a,b,c",
            "circle:r",
            "spherical-circle:rho",
        ]
    }
}

impl fmt::Display for BuiltinChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use BuiltinChart::*;
        match self {
            Veronese { algebra } => write!(f, "veronese-{}", algebra.symbol()),
            SphereProduct { d: 1, n: 2, c1, c2 } if *c1 == 2.0 && *c2 == 2.0 => write!(f, "clifford-torus"),
            SphereProduct { d, n, c1, c2 } => write!(f, "sphere-product:{d},{n},{c1},{c2}"),
            Torus { major, minor } => write!(f, "torus:{major},{minor}"),
            Cyclide { n, major, minor } => write!(f, "cyclide:{n},{major},{minor}"),
            RoundSphere { n, radius } => write!(f, "sphere:{n},{radius}"),
            GeodesicSphere { n, radius } => write!(f, "geodesic-sphere:{n},{radius}"),
            HyperbolicSphere { n, radius } => write!(f, "hyperbolic-sphere:{n},{radius}"),
            FlatPlane { n, m } => write!(f, "plane:{n},{m}"),
            Ellipsoid { a, b, c } => write!(f, "ellipsoid:{a},{b},{c}"),
            Circle { radius, host: CircleHost::Euclidean } => write!(f, "circle:{radius}"),
            Circle { radius, host: CircleHost::Sphere } => write!(f, "spherical-circle:{radius}"),
        }
    }
}

impl FromStr for BuiltinChart {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h, a),
            None => (s, ""),
        };
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| GeomError::Parse(format!("bad number {t:?} in {s:?}"))))
                .collect::<Result<_>>()?
        };
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(GeomError::Parse(format!("{head} expects {k} parameters, got {}", nums.len())))
            }
        };
        let int = |x: f64| -> Result<usize> {
            if x >= 0.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(GeomError::Parse(format!("expected a whole number, got {x}")))
            }
        };
        if let Some(sym) = head.strip_prefix("veronese-") {
            want(0)?;
            let algebra = Algebra::from_name(sym).ok_or_else(|| GeomError::Unknown(s.to_string()))?;
            return Ok(BuiltinChart::Veronese { algebra });
        }
        let chart = match head {
            "clifford-torus" => {
                want(0)?;
                BuiltinChart::clifford_torus()
            }
            "sphere-product" => {
                want(4)?;
                BuiltinChart::SphereProduct { d: int(nums[0])?, n: int(nums[1])?, c1: nums[2], c2: nums[3] }
            }
            "torus" => {
                want(2)?;
                BuiltinChart::Torus { major: nums[0], minor: nums[1] }
            }
            "cyclide" => {
                want(3)?;
                BuiltinChart::Cyclide { n: int(nums[0])?, major: nums[1], minor: nums[2] }
            }
            "sphere" => {
                want(2)?;
                BuiltinChart::RoundSphere { n: int(nums[0])?, radius: nums[1] }
            }
            "geodesic-sphere" => {
                want(2)?;
                BuiltinChart::GeodesicSphere { n: int(nums[0])?, radius: nums[1] }
            }
            "hyperbolic-sphere" => {
                want(2)?;
                BuiltinChart::HyperbolicSphere { n: int(nums[0])?, radius: nums[1] }
            }
            "plane" => {
                want(2)?;
                BuiltinChart::FlatPlane { n: int(nums[0])?, m: int(nums[1])? }
            }
            "ellipsoid" => {
                want(3)?;
                BuiltinChart::Ellipsoid { a: nums[0], b: nums[1], c: nums[2] }
            }
            "circle" => {
                want(1)?;
                BuiltinChart::Circle { radius: nums[0], host: CircleHost::Euclidean }
            }
            "spherical-circle" => {
                want(1)?;
                BuiltinChart::Circle { radius: nums[0], host: CircleHost::Sphere }
            }
            _ => return Err(GeomError::Unknown(s.to_string())),
        };
        Ok(chart)
    }
}

/// Inverse stereographic projection ℝᵏ → 𝕊ᵏ from the south pole.
pub(crate) fn stereo<T: Real>(x: &[T]) -> Vec<T> {
    let s = x.iter().fold(T::cst(0.0), |acc, v| acc + v.sq());
    let inv = (s.clone() + 1.0).recip();
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push((T::cst(1.0) - s) * inv.clone());
    out.extend(x.iter().map(|v| v.clone() * inv.clone() * 2.0));
    out
}

/// Unit k-sphere: an angle for k = 1, stereographic coordinates otherwise.
fn unit_sphere<T: Real>(x: &[T]) -> Vec<T> {
    if x.len() == 1 {
        vec![x[0].cos(), x[0].sin()]
    } else {
        stereo(x)
    }
}

fn sphere_domain(k: usize) -> (Vec<f64>, Vec<f64>) {
    if k == 1 {
        (vec![-PI], vec![PI])
    } else {
        (vec![-1.5; k], vec![1.5; k])
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(GeomError::InvalidInput(format!("{name} must be positive, got {x}")))
    }
}

fn at_least(name: &str, x: usize, min: usize) -> Result<()> {
    if x >= min {
        Ok(())
    } else {
        Err(GeomError::InvalidInput(format!("{name} must be at least {min}, got {x}")))
    }
}

/// Builds the chart for a named immersion.
pub fn builtin_chart(spec: &BuiltinChart) -> Result<ImmersionChart> {
    use BuiltinChart::*;
    let name = spec.to_string();
    let chart = match *spec {
        Veronese { algebra } => {
            let k = algebra.dim();
            ImmersionChart::analytic(name, 2 * k, Ambient::sphere(3 * k + 1), Domain::cube(2 * k, 1.5), move |u| {
                projective_plane_point(&u[..k], &u[k..])
            })
        }
        SphereProduct { d, n, c1, c2 } => {
            at_least("d", d, 1)?;
            at_least("n - d", n.saturating_sub(d), 1)?;
            positive("c1", c1)?;
            positive("c2", c2)?;
            let closure = (1.0 / c1 + 1.0 / c2 - 1.0).abs();
            if closure > 1e-12 {
                return Err(GeomError::InvalidInput(format!("1/c1 + 1/c2 must equal 1 (off by {closure:.3e})")));
            }
            let (r1, r2) = (1.0 / c1.sqrt(), 1.0 / c2.sqrt());
            let (mut lo, mut hi) = sphere_domain(d);
            let (lo2, hi2) = sphere_domain(n - d);
            lo.extend(lo2);
            hi.extend(hi2);
            ImmersionChart::analytic(name, n, Ambient::sphere(n + 1), Domain { lo, hi }, move |u| {
                let mut out: Vec<_> = unit_sphere(&u[..d]).into_iter().map(|v| v * r1).collect();
                out.extend(unit_sphere(&u[d..]).into_iter().map(|v| v * r2));
                out
            })
        }
        Torus { major, minor } => cyclide(name, 2, major, minor)?,
        Cyclide { n, major, minor } => {
            at_least("n", n, 2)?;
            cyclide(name, n, major, minor)?
        }
        RoundSphere { n, radius } => {
            at_least("n", n, 1)?;
            positive("radius", radius)?;
            let (lo, hi) = sphere_domain(n);
            ImmersionChart::analytic(name, n, Ambient::euclidean(n + 1), Domain { lo, hi }, move |u| {
                unit_sphere(u).into_iter().map(|v| v * radius).collect()
            })
        }
        GeodesicSphere { n, radius } => {
            at_least("n", n, 1)?;
            if !(radius > 0.0 && radius < PI) {
                return Err(GeomError::InvalidInput(format!("spherical radius must lie in (0, π), got {radius}")));
            }
            let (lo, hi) = sphere_domain(n);
            ImmersionChart::analytic(name, n, Ambient::sphere(n + 1), Domain { lo, hi }, move |u| {
                let mut out = vec![crate::jet::Jet::constant(radius.cos())];
                out.extend(unit_sphere(u).into_iter().map(|v| v * radius.sin()));
                out
            })
        }
        HyperbolicSphere { n, radius } => {
            at_least("n", n, 1)?;
            positive("radius", radius)?;
            let (lo, hi) = sphere_domain(n);
            ImmersionChart::analytic(name, n, Ambient::hyperbolic(n + 1, -1.0), Domain { lo, hi }, move |u| {
                let mut out = vec![crate::jet::Jet::constant(radius.cosh())];
                out.extend(unit_sphere(u).into_iter().map(|v| v * radius.sinh()));
                out
            })
        }
        FlatPlane { n, m } => {
            at_least("n", n, 1)?;
            at_least("m", m, n + 1)?;
            ImmersionChart::analytic(name, n, Ambient::euclidean(m), Domain::cube(n, 2.0), move |u| {
                let mut out = u.to_vec();
                out.resize(m, crate::jet::Jet::constant(0.0));
                out
            })
        }
        Ellipsoid { a, b, c } => {
            positive("a", a)?;
            positive("b", b)?;
            positive("c", c)?;
            let domain = Domain { lo: vec![-PI, -1.4], hi: vec![PI, 1.4] };
            ImmersionChart::analytic(name, 2, Ambient::euclidean(3), domain, move |u| {
                let (cu, su, cv, sv) = (u[0].cos(), u[0].sin(), u[1].cos(), u[1].sin());
                vec![cu * cv.clone() * a, su * cv * b, sv * c]
            })
        }
        Circle { radius, host } => {
            positive("radius", radius)?;
            let domain = Domain { lo: vec![-PI], hi: vec![PI] };
            match host {
                CircleHost::Euclidean => ImmersionChart::analytic(name, 1, Ambient::euclidean(3), domain, move |u| {
                    vec![u[0].cos() * radius, u[0].sin() * radius, crate::jet::Jet::constant(0.0)]
                }),
                CircleHost::Sphere => ImmersionChart::analytic(name, 1, Ambient::sphere(3), domain, move |u| {
                    vec![
                        crate::jet::Jet::constant(radius.cos()),
                        u[0].cos() * radius.sin(),
                        u[0].sin() * radius.sin(),
                        crate::jet::Jet::constant(0.0),
                    ]
                }),
            }
        }
    };
    Ok(chart)
}

fn cyclide(name: String, n: usize, major: f64, minor: f64) -> Result<ImmersionChart> {
    positive("major radius", major)?;
    positive("minor radius", minor)?;
    if minor >= major {
        return Err(GeomError::InvalidInput(format!("minor radius {minor} must be smaller than major radius {major}")));
    }
    let (mut lo, mut hi) = sphere_domain(n - 1);
    lo.push(-PI);
    hi.push(PI);
    Ok(ImmersionChart::analytic(name, n, Ambient::euclidean(n + 1), Domain { lo, hi }, move |u| {
        let theta = &u[n - 1];
        let radial = theta.cos() * minor + major;
        let mut out: Vec<_> = unit_sphere(&u[..n - 1]).into_iter().map(|w| w * radial.clone()).collect();
        out.push(theta.sin() * minor);
        out
    }))
}

/// y/a where (a, y) = L(1, f): the Möbius action of L on the unit sphere.
fn mobius_point<T: Real>(m: &DMatrix<f64>, f: &[T]) -> Vec<T> {
    let dim = m.nrows();
    let lifted: Vec<T> = (0..dim)
        .map(|i| f.iter().enumerate().fold(T::cst(m[(i, 0)]), |acc, (j, v)| acc + v.clone() * m[(i, j + 1)]))
        .collect();
    let inv = lifted[0].recip();
    lifted[1..].iter().map(|y| y.clone() * inv.clone()).collect()
}

/// Puts a chart into the unit sphere: Euclidean charts are composed with the
/// inverse stereographic projection x ↦ ((1 − |x|²), 2x)/(1 + |x|²); sphere
/// charts are returned unchanged.
pub fn conformal_to_sphere(chart: &ImmersionChart) -> Result<ImmersionChart> {
    let ambient = chart.ambient();
    if ambient.is_unit_sphere() {
        return Ok(chart.clone());
    }
    if ambient.curvature != 0.0 {
        return Err(GeomError::NotApplicable(format!(
            "{} lives in curvature {}; only Euclidean charts are sent to the sphere",
            chart.name(),
            ambient.curvature
        )));
    }
    let name = format!("stereo({})", chart.name());
    let target = Ambient::sphere(ambient.dim);
    let out = match chart.map().clone() {
        ChartMap::Analytic(f) => {
            ImmersionChart::analytic(name, chart.intrinsic_dim(), target, chart.domain().clone(), move |u| {
                stereo(&f(u))
            })
        }
        ChartMap::Plain(f) => {
            ImmersionChart::plain(name, chart.intrinsic_dim(), target, chart.domain().clone(), move |u| stereo(&f(u)))
        }
    };
    Ok(out.with_fd(chart.fd_config()))
}

/// Composes a chart into the unit sphere with the Möbius transformation
/// induced by `map` ∈ O(m+1, 1).
pub fn mobius_deform(chart: &ImmersionChart, map: &OrthogonalMap) -> Result<ImmersionChart> {
    let ambient = chart.ambient();
    if !ambient.is_unit_sphere() {
        return Err(GeomError::NotApplicable(format!(
            "Möbius deformation needs a chart into the unit sphere, {} maps into curvature {}",
            chart.name(),
            ambient.curvature
        )));
    }
    if map.signature() != Signature::Mobius(ambient.dim) {
        return Err(GeomError::Contract(format!(
            "Möbius map has signature {:?}, chart needs Mobius({})",
            map.signature(),
            ambient.dim
        )));
    }
    let m = map.matrix().clone();
    let name = format!("{}+mobius", chart.name());
    let out = match chart.map().clone() {
        ChartMap::Analytic(f) => {
            ImmersionChart::analytic(name, chart.intrinsic_dim(), ambient, chart.domain().clone(), move |u| {
                mobius_point(&m, &f(u))
            })
        }
        ChartMap::Plain(f) => {
            ImmersionChart::plain(name, chart.intrinsic_dim(), ambient, chart.domain().clone(), move |u| {
                mobius_point(&m, &f(u))
            })
        }
    };
    Ok(out.with_fd(chart.fd_config()))
}
