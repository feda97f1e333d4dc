//! Sampling plans: which chart points, unit normals and curves a sweep visits.
//!
//! Plans are generated deterministically from a [`PlanConfig`], which can be
//! read from a TOML file:
//!
//! ```toml
//! grid = 3             # points per axis for tensor grids
//! max_points = 16      # above this many grid points, sample points at random
//! domain_fraction = 0.8
//! normals = 0          # unit normals per point; 0 picks max(2p², 2)
//! curve_count = 2      # transport curves per hosted point
//! curve_points = 4     # points that host curves
//! curve_length = 0.5
//! curve_step = 1e-3
//! seed = 7
//! # optional: tol, cluster_tol, target_k, fd_step, fd_second_step, richardson
//! ```

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::immersion::{FdConfig, ImmersionChart};

const NORMAL_UNIT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub grid: usize,
    pub max_points: usize,
    pub domain_fraction: f64,
    pub normals: usize,
    pub curve_count: usize,
    pub curve_points: usize,
    pub curve_length: f64,
    pub curve_step: f64,
    pub seed: u64,
    pub tol: Option<f64>,
    pub cluster_tol: Option<f64>,
    pub target_k: Option<usize>,
    pub fd_step: Option<f64>,
    pub fd_second_step: Option<f64>,
    pub richardson: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            grid: 3,
            max_points: 16,
            domain_fraction: 0.8,
            normals: 0,
            curve_count: 2,
            curve_points: 4,
            curve_length: 0.5,
            curve_step: 1e-3,
            seed: 7,
            tol: None,
            cluster_tol: None,
            target_k: None,
            fd_step: None,
            fd_second_step: None,
            richardson: false,
        }
    }
}

impl PlanConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PlanConfig = toml::from_str(text).map_err(|e| GeomError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GeomError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(GeomError::InvalidInput(format!("{name} must be positive, got {x}")))
            }
            _ => Ok(()),
        };
        positive("tol", self.tol)?;
        positive("cluster_tol", self.cluster_tol)?;
        positive("fd_step", self.fd_step)?;
        positive("fd_second_step", self.fd_second_step)?;
        positive("curve_length", Some(self.curve_length))?;
        positive("curve_step", Some(self.curve_step))?;
        if self.grid == 0 || self.max_points == 0 {
            return Err(GeomError::InvalidInput("grid and max_points must be at least 1".into()));
        }
        if !(self.domain_fraction > 0.0 && self.domain_fraction <= 1.0) {
            return Err(GeomError::InvalidInput("domain_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Applies the finite-difference settings to a chart.
    pub fn configure_chart(&self, chart: ImmersionChart) -> ImmersionChart {
        let mut fd = chart.fd_config();
        if let Some(h) = self.fd_step {
            fd.step = h;
        }
        if let Some(h) = self.fd_second_step {
            fd.second_step = h;
        }
        fd.richardson |= self.richardson;
        chart.with_fd(FdConfig { ..fd })
    }
}

/// Points, normals and curve settings for one sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SamplePlan {
    pub points: Vec<Vec<f64>>,
    /// Per point, unit normals in coordinates of that point's normal frame.
    pub normals: Vec<Vec<Vec<f64>>>,
    pub curve_count: usize,
    pub curve_points: usize,
    pub curve_length: f64,
    pub curve_step: f64,
    pub tol: Option<f64>,
    pub cluster_tol: Option<f64>,
    pub target_k: Option<usize>,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(points: Vec<Vec<f64>>, normals: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let cfg = PlanConfig::default();
        let plan = SamplePlan {
            points,
            normals,
            curve_count: cfg.curve_count,
            curve_points: cfg.curve_points,
            curve_length: cfg.curve_length,
            curve_step: cfg.curve_step,
            tol: None,
            cluster_tol: None,
            target_k: None,
            seed: cfg.seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(GeomError::InvalidInput("plan has no points".into()));
        }
        if self.normals.len() != self.points.len() {
            return Err(GeomError::InvalidInput("plan needs one normal list per point".into()));
        }
        for (i, list) in self.normals.iter().enumerate() {
            if list.is_empty() {
                return Err(GeomError::InvalidInput(format!("point {i} has no normals")));
            }
            for xi in list {
                let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > NORMAL_UNIT_TOL {
                    return Err(GeomError::InvalidInput(format!("normal {xi:?} at point {i} has length {norm}")));
                }
            }
        }
        Ok(())
    }

    /// Deterministic plan for `chart` from `cfg`.
    pub fn generate(chart: &ImmersionChart, cfg: &PlanConfig) -> Result<Self> {
        cfg.validate()?;
        let n = chart.intrinsic_dim();
        let dom = chart.domain().shrunk(cfg.domain_fraction);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let tensor = (cfg.grid as f64).powi(n as i32) <= cfg.max_points as f64;
        let points: Vec<Vec<f64>> = if tensor {
            let total = cfg.grid.pow(n as u32);
            (0..total)
                .map(|idx| {
                    let mut rem = idx;
                    (0..n)
                        .map(|i| {
                            let s = rem % cfg.grid;
                            rem /= cfg.grid;
                            if cfg.grid == 1 {
                                0.5 * (dom.lo[i] + dom.hi[i])
                            } else {
                                dom.lo[i] + (dom.hi[i] - dom.lo[i]) * s as f64 / (cfg.grid - 1) as f64
                            }
                        })
                        .collect()
                })
                .collect()
        } else {
            let mut pts = vec![dom.center()];
            while pts.len() < cfg.max_points {
                pts.push((0..n).map(|i| rng.random_range(dom.lo[i]..=dom.hi[i])).collect());
            }
            pts
        };
        let p = chart.codim();
        let per_point = normal_count(p, cfg.normals);
        let normals =
            (0..points.len()).map(|i| normal_grid(p, per_point, cfg.seed.wrapping_add(1 + i as u64))).collect();
        let plan = SamplePlan {
            points,
            normals,
            curve_count: cfg.curve_count,
            curve_points: cfg.curve_points,
            curve_length: cfg.curve_length,
            curve_step: cfg.curve_step,
            tol: cfg.tol,
            cluster_tol: cfg.cluster_tol,
            target_k: cfg.target_k,
            seed: cfg.seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Adds a point (with the normal list of the first point).
    pub fn with_point(mut self, u: Vec<f64>) -> Self {
        let normals = self.normals[0].clone();
        self.points.push(u);
        self.normals.push(normals);
        self
    }

    pub fn sample_count(&self) -> usize {
        self.normals.iter().map(Vec::len).sum()
    }

    pub fn tol_for(&self, chart: &ImmersionChart) -> f64 {
        self.tol.unwrap_or_else(|| chart.default_cluster_tol())
    }

    pub fn cluster_tol_for(&self, chart: &ImmersionChart) -> f64 {
        self.cluster_tol.unwrap_or_else(|| chart.default_cluster_tol())
    }
}

/// Normals per point: at least 2p², even, and at least 2 so antipodes fit.
pub fn normal_count(p: usize, requested: usize) -> usize {
    let min = (2 * p * p).max(2);
    let n = requested.max(min);
    n + n % 2
}

/// Unit vectors in ℝ^p closed under ξ ↦ −ξ: ±1 for p = 1, equally spaced
/// angles for p = 2, seeded Gaussian directions with their antipodes otherwise.
pub fn normal_grid(p: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let count = count.max(2);
    let count = count + count % 2;
    match p {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let a = 2.0 * PI * j as f64 / count as f64 + 0.1;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let v: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-6 {
                    continue;
                }
                let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
                out.push(v.iter().map(|x| -x).collect());
                out.push(v);
            }
            out
        }
    }
}
