//! Sweeps that test umbilicity, unipotency, constancy along parallel normal
//! fields (CPC) and constancy along lines of curvature (Dupin) on a chart.
//!
//! Every sweep is a pure function of `(chart, plan)`. Work is spread over
//! points and curves with rayon and collected in plan order, so reports are
//! reproducible byte for byte.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{GeomError, Result};
use crate::immersion::{
    fundamental_forms, parallel_transport_rhs, transport_normals, FundamentalForms, ImmersionChart, ShapeSpectrum,
};
use crate::plan::SamplePlan;

pub const SCHEMA_VERSION: u32 = 1;
/// A residual within this factor of its tolerance is reported as inconclusive.
pub const INCONCLUSIVE_FACTOR: f64 = 10.0;
const CPC_SEGMENTS: usize = 2;
const CPC_CHECKPOINTS: usize = 10;
const CURVE_RETRIES: usize = 24;
const ANTIPODE_TOL: f64 = 1e-12;
const DIRECTION_FLOOR: f64 = 1e-8;

fn at(u: &[f64], e: GeomError) -> GeomError {
    match e {
        GeomError::AtSample { .. } => e,
        other => GeomError::AtSample { u: u.to_vec(), source: Box::new(other) },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Inconclusive,
    Fail,
}

impl Verdict {
    pub fn from_residual(residual: f64, tol: f64) -> Self {
        if residual <= tol {
            Verdict::Pass
        } else if residual <= INCONCLUSIVE_FACTOR * tol {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// The (u, ξ) at which a check was worst; ξ in normal-frame coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub u: Vec<f64>,
    pub normal: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub verdict: Verdict,
    pub residual: f64,
    pub tol: f64,
    pub witness: Option<Witness>,
    pub note: Option<String>,
}

impl Check {
    pub fn from_residual(residual: f64, tol: f64, witness: Option<Witness>) -> Self {
        Check { verdict: Verdict::from_residual(residual, tol), residual, tol, witness, note: None }
    }

    pub fn vacuous(tol: f64, note: impl Into<String>) -> Self {
        Check { verdict: Verdict::Fail, residual: f64::INFINITY, tol, witness: None, note: Some(note.into()) }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Worst of two checks of the same condition.
    pub fn merge(self, other: Check) -> Check {
        let (mut worse, better) =
            if (other.verdict, other.residual) > (self.verdict, self.residual) { (other, self) } else { (self, other) };
        worse.tol = worse.tol.max(better.tol);
        worse.note = match (worse.note.take(), better.note) {
            (Some(a), Some(b)) if a != b => Some(format!("{a}; {b}")),
            (a, b) => a.or(b),
        };
        worse
    }
}

fn merge_opt(a: Option<Check>, b: Option<Check>) -> Option<Check> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.merge(b)),
        (a, b) => a.or(b),
    }
}

/// Cluster count: a number when constant over the sweep, otherwise "varies".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KObserved {
    Exact(usize),
    Varies,
}

impl Serialize for KObserved {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KObserved::Exact(k) => s.serialize_u64(*k as u64),
            KObserved::Varies => s.serialize_str("varies"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Verdicts {
    pub k_umbilical: Option<Check>,
    pub weakly_k_umbilical: Option<Check>,
    pub unipotent: Option<Check>,
    pub cpc: Option<Check>,
    pub dupin: Option<Check>,
}

/// Outcome of the shared-curvature implication: a curvature κ common to all
/// normals at a point forces the spectrum {κ, −κ}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharedCurvature {
    pub points_detected: usize,
    pub points_checked: usize,
    pub kappa: Option<f64>,
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AntipodalReport {
    /// max |κ₁(−ξ) + κ₂(ξ)|, |κ₂(−ξ) + κ₁(ξ)| over the sweep.
    pub max_residual: f64,
    pub pairs: usize,
    /// Samples with an umbilical or non-2-cluster direction.
    pub skipped: usize,
    pub multiplicities_equal: bool,
    pub n_even: bool,
    pub check: Check,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CurveStats {
    pub cpc_curves: usize,
    pub dupin_curves: usize,
    pub dupin_truncated: usize,
    pub flags: Vec<String>,
}

impl CurveStats {
    fn merge(mut self, other: CurveStats) -> CurveStats {
        self.cpc_curves += other.cpc_curves;
        self.dupin_curves += other.dupin_curves;
        self.dupin_truncated += other.dupin_truncated;
        self.flags.extend(other.flags);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanEcho {
    pub seed: u64,
    pub points: usize,
    pub samples: usize,
    pub curve_count: usize,
    pub curve_points: usize,
    pub curve_length: f64,
    pub curve_step: f64,
    pub tol: f64,
    pub cluster_tol: f64,
    pub target_k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub schema_version: u32,
    pub chart: String,
    pub n: usize,
    pub ambient_dim: usize,
    pub ambient_curvature: f64,
    pub codim: usize,
    pub analytic: bool,
    pub k_observed: Option<KObserved>,
    pub max_cluster_count: Option<usize>,
    /// Distinct multiplicity patterns seen, in order of first appearance.
    pub multiplicities: Vec<Vec<usize>>,
    /// Cluster values at the first sample.
    pub cluster_values: Vec<f64>,
    /// Largest variation of any sorted eigenvalue over the sweep.
    pub constancy_residual: Option<f64>,
    pub verdicts: Verdicts,
    pub shared_curvature: Option<SharedCurvature>,
    pub antipodal: Option<AntipodalReport>,
    pub curves: CurveStats,
    pub plan: PlanEcho,
}

impl ClassificationReport {
    fn empty(chart: &ImmersionChart, plan: &SamplePlan) -> Self {
        let ambient = chart.ambient();
        ClassificationReport {
            schema_version: SCHEMA_VERSION,
            chart: chart.name().to_string(),
            n: chart.intrinsic_dim(),
            ambient_dim: ambient.dim,
            ambient_curvature: ambient.curvature,
            codim: chart.codim(),
            analytic: chart.uses_jet(),
            k_observed: None,
            max_cluster_count: None,
            multiplicities: Vec::new(),
            cluster_values: Vec::new(),
            constancy_residual: None,
            verdicts: Verdicts::default(),
            shared_curvature: None,
            antipodal: None,
            curves: CurveStats::default(),
            plan: PlanEcho {
                seed: plan.seed,
                points: plan.points.len(),
                samples: plan.sample_count(),
                curve_count: plan.curve_count,
                curve_points: plan.curve_points,
                curve_length: plan.curve_length,
                curve_step: plan.curve_step,
                tol: plan.tol_for(chart),
                cluster_tol: plan.cluster_tol_for(chart),
                target_k: plan.target_k,
            },
        }
    }

    /// Combines reports on the same chart and plan produced by separate checks.
    pub fn merge(self, other: ClassificationReport) -> ClassificationReport {
        let mut multiplicities = self.multiplicities;
        for m in other.multiplicities {
            if !multiplicities.contains(&m) {
                multiplicities.push(m);
            }
        }
        ClassificationReport {
            k_observed: self.k_observed.or(other.k_observed),
            max_cluster_count: self.max_cluster_count.max(other.max_cluster_count),
            multiplicities,
            cluster_values: if self.cluster_values.is_empty() { other.cluster_values } else { self.cluster_values },
            constancy_residual: match (self.constancy_residual, other.constancy_residual) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
            verdicts: Verdicts {
                k_umbilical: merge_opt(self.verdicts.k_umbilical, other.verdicts.k_umbilical),
                weakly_k_umbilical: merge_opt(self.verdicts.weakly_k_umbilical, other.verdicts.weakly_k_umbilical),
                unipotent: merge_opt(self.verdicts.unipotent, other.verdicts.unipotent),
                cpc: merge_opt(self.verdicts.cpc, other.verdicts.cpc),
                dupin: merge_opt(self.verdicts.dupin, other.verdicts.dupin),
            },
            shared_curvature: self.shared_curvature.or(other.shared_curvature),
            antipodal: self.antipodal.or(other.antipodal),
            curves: self.curves.merge(other.curves),
            ..self
        }
    }

    fn checks(&self) -> impl Iterator<Item = &Check> {
        let v = &self.verdicts;
        [&v.k_umbilical, &v.weakly_k_umbilical, &v.unipotent, &v.cpc, &v.dupin]
            .into_iter()
            .flatten()
            .chain(self.shared_curvature.as_ref().map(|s| &s.check))
            .chain(self.antipodal.as_ref().map(|a| &a.check))
    }

    /// True iff every verdict present in the report passed.
    pub fn all_passed(&self) -> bool {
        self.checks().all(Check::passed)
    }

    /// Describes a violation of unipotent ⇒ CPC ⇒ Dupin among present verdicts.
    pub fn nesting_violation(&self) -> Option<String> {
        let v = &self.verdicts;
        let pass = |c: &Option<Check>| c.as_ref().map(Check::passed);
        let fail = |c: &Option<Check>| c.as_ref().map(|c| c.verdict == Verdict::Fail);
        if pass(&v.unipotent) == Some(true) && fail(&v.cpc) == Some(true) {
            return Some("unipotent passed but CPC failed".into());
        }
        if pass(&v.cpc) == Some(true) && fail(&v.dupin) == Some(true) {
            return Some("CPC passed but Dupin failed".into());
        }
        if pass(&v.unipotent) == Some(true) && fail(&v.dupin) == Some(true) {
            return Some("unipotent passed but Dupin failed".into());
        }
        None
    }
}

/// One evaluated (u, ξ).
#[derive(Clone, Debug)]
pub struct Sample {
    pub point: usize,
    pub u: Vec<f64>,
    pub normal: Vec<f64>,
    pub spectrum: ShapeSpectrum,
}

impl Sample {
    fn witness(&self) -> Witness {
        Witness { u: self.u.clone(), normal: self.normal.clone() }
    }
}

/// Spectra of A_ξ at every (u, ξ) of the plan, in plan order.
pub fn sweep_spectra(chart: &ImmersionChart, plan: &SamplePlan) -> Result<Vec<Sample>> {
    plan.validate()?;
    let cluster_tol = plan.cluster_tol_for(chart);
    let per_point: Vec<Result<Vec<Sample>>> = plan
        .points
        .par_iter()
        .zip(plan.normals.par_iter())
        .enumerate()
        .map(|(point, (u, normals))| {
            let forms = fundamental_forms(chart, u).map_err(|e| at(u, e))?;
            normals
                .iter()
                .map(|xi| {
                    let spectrum = forms.spectrum(xi, cluster_tol).map_err(|e| at(u, e))?;
                    Ok(Sample { point, u: u.clone(), normal: xi.clone(), spectrum })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(plan.sample_count());
    for r in per_point {
        out.extend(r?);
    }
    Ok(out)
}

fn umbilicity_from_samples(chart: &ImmersionChart, plan: &SamplePlan, samples: &[Sample]) -> ClassificationReport {
    let mut report = ClassificationReport::empty(chart, plan);
    let cluster_tol = plan.cluster_tol_for(chart);
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for s in samples {
        *histogram.entry(s.spectrum.cluster_count()).or_default() += 1;
        if !report.multiplicities.contains(&s.spectrum.multiplicities) {
            report.multiplicities.push(s.spectrum.multiplicities.clone());
        }
    }
    let max_count = histogram.keys().next_back().copied().unwrap_or(0);
    let modal = histogram.iter().max_by_key(|(k, c)| (**c, **k)).map(|(k, _)| *k).unwrap_or(0);
    report.max_cluster_count = Some(max_count);
    report.k_observed = Some(if histogram.len() == 1 { KObserved::Exact(max_count) } else { KObserved::Varies });
    report.cluster_values = samples.first().map(|s| s.spectrum.eigenvalues.clone()).unwrap_or_default();

    let near_collision = samples.iter().find(|s| s.spectrum.min_gap() <= INCONCLUSIVE_FACTOR * cluster_tol);
    let target = plan.target_k;

    let k_ok = histogram.len() == 1 && target.is_none_or(|k| k == max_count);
    let odd = samples.iter().find(|s| {
        let c = s.spectrum.cluster_count();
        c != modal || target.is_some_and(|k| k != c)
    });
    let mut k_check = Check {
        verdict: if k_ok { Verdict::Pass } else { Verdict::Fail },
        residual: if k_ok { 0.0 } else { (histogram.len() - 1).max(1) as f64 },
        tol: 0.0,
        witness: odd.or(near_collision).map(Sample::witness),
        note: Some(format!("cluster counts {histogram:?}")),
    };
    if let Some(s) = near_collision {
        if k_check.verdict == Verdict::Pass {
            k_check.verdict = Verdict::Inconclusive;
            k_check.witness = Some(s.witness());
        }
        k_check = k_check.with_note(format!(
            "cluster counts {histogram:?}; gap {:.3e} within {INCONCLUSIVE_FACTOR}x of cluster tolerance",
            s.spectrum.min_gap()
        ));
    }
    report.verdicts.k_umbilical = Some(k_check);

    let weak_k = target.unwrap_or(max_count);
    let weak_ok = max_count <= weak_k;
    report.verdicts.weakly_k_umbilical = Some(Check {
        verdict: if weak_ok { Verdict::Pass } else { Verdict::Fail },
        residual: max_count.saturating_sub(weak_k) as f64,
        tol: 0.0,
        witness: samples.iter().find(|s| s.spectrum.cluster_count() > weak_k).map(Sample::witness),
        note: Some(format!("at most {weak_k} clusters")),
    });
    report
}

/// Counts eigenvalue clusters over the sweep; k-umbilical iff the count is
/// constant (and equals `plan.target_k` when given).
pub fn umbilicity_class(chart: &ImmersionChart, plan: &SamplePlan) -> Result<ClassificationReport> {
    let samples = sweep_spectra(chart, plan)?;
    Ok(umbilicity_from_samples(chart, plan, &samples))
}

/// Connected components of the unit normal bundle: the two sides of a
/// hypersurface, a single one otherwise.
fn component(sample: &Sample) -> usize {
    if sample.normal.len() == 1 && sample.normal[0] < 0.0 {
        1
    } else {
        0
    }
}

fn unipotent_from_samples(
    chart: &ImmersionChart,
    plan: &SamplePlan,
    samples: &[Sample],
    mut report: ClassificationReport,
) -> ClassificationReport {
    let tol = plan.tol_for(chart);
    if !report.verdicts.k_umbilical.as_ref().is_some_and(Check::passed) {
        report.verdicts.unipotent = Some(Check::vacuous(tol, "not k-umbilical on the sweep"));
        return report;
    }
    let mut refs: BTreeMap<usize, &Sample> = BTreeMap::new();
    let mut lo: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut hi: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut worst: Option<(f64, &Sample)> = None;
    for s in samples {
        let c = component(s);
        let r = *refs.entry(c).or_insert(s);
        let low = lo.entry(c).or_insert_with(|| s.spectrum.raw.clone());
        let high = hi.entry(c).or_insert_with(|| s.spectrum.raw.clone());
        for (j, &x) in s.spectrum.raw.iter().enumerate() {
            low[j] = low[j].min(x);
            high[j] = high[j].max(x);
        }
        let dev = s.spectrum.raw.iter().zip(&r.spectrum.raw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if worst.is_none_or(|(w, _)| dev > w) {
            worst = Some((dev, s));
        }
    }
    let variation = lo.iter().flat_map(|(c, l)| l.iter().zip(&hi[c]).map(|(a, b)| b - a)).fold(0.0, f64::max);
    report.constancy_residual = Some(variation);
    report.verdicts.unipotent = Some(Check::from_residual(variation, tol, worst.map(|(_, s)| s.witness())));
    report.shared_curvature = shared_curvature(chart, plan, samples);
    report
}

/// For codimension ≥ 2 and two clusters everywhere: at each point, looks for
/// a curvature shared by every sampled normal and checks the spectrum is {κ, −κ}.
fn shared_curvature(chart: &ImmersionChart, plan: &SamplePlan, samples: &[Sample]) -> Option<SharedCurvature> {
    if chart.codim() < 2 || samples.iter().any(|s| s.spectrum.cluster_count() != 2) {
        return None;
    }
    let tol = plan.tol_for(chart);
    let mut detected = 0;
    let mut checked = 0;
    let mut kappa_seen = None;
    let mut residual: f64 = 0.0;
    let mut witness = None;
    for point in 0..plan.points.len() {
        let at_point: Vec<&Sample> = samples.iter().filter(|s| s.point == point).collect();
        let Some(first) = at_point.first() else { continue };
        checked += 1;
        let shared = first
            .spectrum
            .eigenvalues
            .iter()
            .copied()
            .find(|&k| at_point.iter().all(|s| s.spectrum.eigenvalues.iter().any(|v| (v - k).abs() <= tol)));
        let Some(k) = shared else { continue };
        detected += 1;
        kappa_seen.get_or_insert(k.abs());
        for s in &at_point {
            let r = s.spectrum.eigenvalues.iter().map(|v| (v - k).abs().min((v + k).abs())).fold(0.0, f64::max);
            if r > residual || witness.is_none() {
                residual = residual.max(r);
                witness = Some(s.witness());
            }
        }
    }
    let check = if detected == 0 {
        Check {
            verdict: Verdict::Pass,
            residual: 0.0,
            tol,
            witness: None,
            note: Some("no shared curvature detected".into()),
        }
    } else {
        Check::from_residual(residual, tol, witness)
    };
    Some(SharedCurvature { points_detected: detected, points_checked: checked, kappa: kappa_seen, check })
}

/// Variation of each principal curvature over the whole unit normal bundle
/// (per side for hypersurfaces). Vacuously fails when not k-umbilical.
pub fn unipotent_check(chart: &ImmersionChart, plan: &SamplePlan) -> Result<ClassificationReport> {
    let samples = sweep_spectra(chart, plan)?;
    let report = umbilicity_from_samples(chart, plan, &samples);
    Ok(unipotent_from_samples(chart, plan, &samples, report))
}

fn antipodal_from_samples(chart: &ImmersionChart, plan: &SamplePlan, samples: &[Sample]) -> AntipodalReport {
    let tol = plan.tol_for(chart);
    let n_even = chart.intrinsic_dim().is_multiple_of(2);
    let mut max_residual: f64 = 0.0;
    let mut pairs = 0;
    let mut skipped = 0;
    let mut multiplicities_equal = true;
    let mut witness = None;
    let mut mult_witness = None;
    for s in samples {
        if s.spectrum.cluster_count() != 2 {
            skipped += 1;
            continue;
        }
        if s.spectrum.multiplicities[0] != s.spectrum.multiplicities[1] {
            multiplicities_equal = false;
            mult_witness.get_or_insert_with(|| s.witness());
        }
        let anti = samples
            .iter()
            .find(|t| t.point == s.point && t.normal.iter().zip(&s.normal).all(|(a, b)| (a + b).abs() <= ANTIPODE_TOL));
        let Some(t) = anti.filter(|t| t.spectrum.cluster_count() == 2) else {
            skipped += 1;
            continue;
        };
        pairs += 1;
        let (k1, k2) = (s.spectrum.eigenvalues[0], s.spectrum.eigenvalues[1]);
        let (m1, m2) = (t.spectrum.eigenvalues[0], t.spectrum.eigenvalues[1]);
        // clusters are sorted, so κ₁(−ξ) pairs with −κ₂(ξ)
        let r = (m1 + k2).abs().max((m2 + k1).abs());
        if r > max_residual || witness.is_none() {
            max_residual = max_residual.max(r);
            witness = Some(s.witness());
        }
    }
    let mut check = Check::from_residual(max_residual, tol, witness);
    if pairs == 0 {
        check = Check::vacuous(tol, "no antipodal pair with two clusters");
    }
    if !multiplicities_equal {
        check.verdict = Verdict::Fail;
        check.witness = mult_witness;
        check = check.with_note("unequal multiplicities");
    } else if !n_even {
        check.verdict = Verdict::Fail;
        check = check.with_note("odd dimension");
    }
    AntipodalReport { max_residual, pairs, skipped, multiplicities_equal, n_even, check }
}

/// Compares the spectra at ξ and −ξ; requires codimension ≥ 2.
pub fn antipodal_symmetry_check(chart: &ImmersionChart, plan: &SamplePlan) -> Result<AntipodalReport> {
    if chart.codim() < 2 {
        return Err(GeomError::NotApplicable("antipodal symmetry needs codimension at least 2".into()));
    }
    let samples = sweep_spectra(chart, plan)?;
    Ok(antipodal_from_samples(chart, plan, &samples))
}

fn curve_seed(plan: &SamplePlan, point: usize, curve: usize) -> u64 {
    plan.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add((point as u64) << 20).wrapping_add(curve as u64 + 1)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn unit_spectrum(forms: &FundamentalForms, xi: &DVector<f64>, cluster_tol: f64) -> ShapeSpectrum {
    let v = forms.project_normal(xi);
    let norm = forms.ambient.inner(&v, &v).max(0.0).sqrt();
    forms.spectrum_ambient(&(v / norm), cluster_tol)
}

struct CurveOutcome {
    residual: f64,
    witness: Witness,
    flag: Option<String>,
}

/// Random piecewise-linear parameter curve of roughly the requested metric length.
fn random_segments(
    chart: &ImmersionChart,
    start: &[f64],
    length: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let n = chart.intrinsic_dim();
    let seg_len = length / CPC_SEGMENTS as f64;
    let mut out = Vec::with_capacity(CPC_SEGMENTS);
    let mut cur = start.to_vec();
    for _ in 0..CPC_SEGMENTS {
        let forms = fundamental_forms(chart, &cur)?;
        let mut chosen = None;
        let mut scale = 1.0;
        for attempt in 0..CURVE_RETRIES {
            if attempt > 0 && attempt % 8 == 0 {
                scale *= 0.5;
            }
            let d: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let m = forms.metric_norm(&d);
            if m < 1e-12 {
                continue;
            }
            let end: Vec<f64> = cur.iter().zip(&d).map(|(a, b)| a + b * scale * seg_len / m).collect();
            if chart.domain().contains(&end) {
                chosen = Some(end);
                break;
            }
        }
        let Some(end) = chosen else { break };
        out.push((cur.clone(), end.clone()));
        cur = end;
    }
    Ok(out)
}

fn cpc_curve(chart: &ImmersionChart, plan: &SamplePlan, point: usize, curve: usize) -> Result<CurveOutcome> {
    let cluster_tol = plan.cluster_tol_for(chart);
    let u0 = &plan.points[point];
    let mut rng = ChaCha8Rng::seed_from_u64(curve_seed(plan, point, curve));
    let normals = &plan.normals[point];
    let xi_frame = normals[rng.random_range(0..normals.len())].clone();
    let forms0 = fundamental_forms(chart, u0)?;
    let mut xi = forms0.normal_from_frame(&xi_frame);
    let raw0 = unit_spectrum(&forms0, &xi, cluster_tol).raw;
    let segments = random_segments(chart, u0, plan.curve_length, &mut rng)?;
    let witness = Witness { u: u0.clone(), normal: xi_frame };
    let mut residual: f64 = 0.0;
    for (a, b) in &segments {
        let seg_len = {
            let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
            fundamental_forms(chart, a)?.metric_norm(&d)
        };
        let steps = ((seg_len / CPC_CHECKPOINTS as f64) / plan.curve_step).ceil().max(1.0) as usize;
        for k in 0..CPC_CHECKPOINTS {
            let lerp = |s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect() };
            let from = lerp(k as f64 / CPC_CHECKPOINTS as f64);
            let to = lerp((k + 1) as f64 / CPC_CHECKPOINTS as f64);
            xi = transport_normals(chart, &from, &to, std::slice::from_ref(&xi), steps)
                .map_err(|e| at(&from, e))?
                .remove(0);
            let forms = fundamental_forms(chart, &to).map_err(|e| at(&to, e))?;
            residual = residual.max(max_abs_diff(&unit_spectrum(&forms, &xi, cluster_tol).raw, &raw0));
        }
    }
    let flag = (segments.len() < CPC_SEGMENTS)
        .then(|| format!("cpc curve {point}/{curve} shortened to {} segments", segments.len()));
    Ok(CurveOutcome { residual, witness, flag })
}

fn cpc_from_curves(
    chart: &ImmersionChart,
    plan: &SamplePlan,
    mut report: ClassificationReport,
) -> Result<ClassificationReport> {
    let tol = plan.tol_for(chart);
    if !report.verdicts.k_umbilical.as_ref().is_some_and(Check::passed) {
        report.verdicts.cpc = Some(Check::vacuous(tol, "not k-umbilical on the sweep"));
        return Ok(report);
    }
    let jobs: Vec<(usize, usize)> = (0..plan.curve_points.min(plan.points.len()))
        .flat_map(|p| (0..plan.curve_count).map(move |c| (p, c)))
        .collect();
    let outcomes: Vec<Result<CurveOutcome>> = jobs.par_iter().map(|&(p, c)| cpc_curve(chart, plan, p, c)).collect();
    let mut worst: Option<CurveOutcome> = None;
    for o in outcomes {
        let o = o?;
        if let Some(f) = &o.flag {
            report.curves.flags.push(f.clone());
        }
        report.curves.cpc_curves += 1;
        if worst.as_ref().is_none_or(|w| o.residual > w.residual) {
            worst = Some(o);
        }
    }
    report.verdicts.cpc = Some(match worst {
        Some(w) => Check::from_residual(w.residual, tol, Some(w.witness)),
        None => Check::vacuous(tol, "no transport curves in the plan"),
    });
    Ok(report)
}

/// Transports random unit normals along random curves and measures how far
/// the principal curvatures drift. Vacuously fails when not k-umbilical.
pub fn cpc_check(chart: &ImmersionChart, plan: &SamplePlan) -> Result<ClassificationReport> {
    let report = umbilicity_class(chart, plan)?;
    cpc_from_curves(chart, plan, report)
}

struct LineField {
    u_dot: Vec<f64>,
    xi_dot: DVector<f64>,
    kappa: f64,
    clusters: usize,
}

/// Curvature-line vector field: the eigen-direction of cluster `kappa_prev`
/// closest to `prev_dir`, coupled with parallel transport of ξ.
fn line_field(
    chart: &ImmersionChart,
    u: &[f64],
    xi: &DVector<f64>,
    prev_dir: &DVector<f64>,
    kappa_prev: f64,
    cluster_tol: f64,
) -> Result<LineField> {
    let ambient = chart.ambient();
    let forms = FundamentalForms::from_jet(ambient, u, chart.jet(u)?)?;
    let spec = unit_spectrum(&forms, xi, cluster_tol);
    let i = spec.nearest_cluster(kappa_prev);
    let e = &spec.eigenbasis[i];
    let mut d = e * (e.transpose() * &forms.metric * prev_dir);
    let len = forms.metric_norm(d.as_slice());
    if len < DIRECTION_FLOOR {
        return Err(GeomError::Integrator("curvature direction lost".into()));
    }
    d /= len;
    let xi_dot = parallel_transport_rhs(ambient, &forms.jet, xi, d.as_slice())?;
    Ok(LineField { u_dot: d.as_slice().to_vec(), xi_dot, kappa: spec.eigenvalues[i], clusters: spec.cluster_count() })
}

struct LineOutcome {
    residual: f64,
    flag: Option<String>,
}

/// Follows the line of curvature of cluster `cluster` from (u0, ξ0) with RK4
/// and records the largest deviation of its principal curvature.
pub fn follow_curvature_line(
    chart: &ImmersionChart,
    u0: &[f64],
    xi0: &DVector<f64>,
    cluster: usize,
    length: f64,
    step: f64,
    cluster_tol: f64,
) -> Result<(f64, Option<String>)> {
    let o = follow_line(chart, u0, xi0, cluster, length, step, cluster_tol)?;
    Ok((o.residual, o.flag))
}

fn follow_line(
    chart: &ImmersionChart,
    u0: &[f64],
    xi0: &DVector<f64>,
    cluster: usize,
    length: f64,
    step: f64,
    cluster_tol: f64,
) -> Result<LineOutcome> {
    let forms0 = fundamental_forms(chart, u0)?;
    let spec0 = unit_spectrum(&forms0, xi0, cluster_tol);
    let kappa0 = spec0.eigenvalues[cluster];
    let clusters0 = spec0.cluster_count();
    let mut dir = spec0.eigenbasis[cluster].column(0).into_owned();
    if let Some(lead) = dir.iter().copied().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            dir = -dir;
        }
    }
    let steps = (length / step).ceil() as usize;
    let h = length / steps as f64;
    let mut u = u0.to_vec();
    let mut xi = xi0.clone();
    let mut kappa = kappa0;
    let mut residual: f64 = 0.0;
    let shift = |u: &[f64], xi: &DVector<f64>, k: &LineField, s: f64| {
        let un: Vec<f64> = u.iter().zip(&k.u_dot).map(|(a, b)| a + s * b).collect();
        (un, xi + &k.xi_dot * s)
    };
    for s in 0..=steps {
        let kappa_prev = kappa;
        let stage = |uu: &[f64], xx: &DVector<f64>, d: &DVector<f64>| -> Result<Option<LineField>> {
            if !chart.domain().contains(uu) {
                return Ok(None);
            }
            match line_field(chart, uu, xx, d, kappa_prev, cluster_tol) {
                Ok(f) if f.clusters == clusters0 => Ok(Some(f)),
                Ok(_) => Ok(None),
                Err(GeomError::Integrator(_)) | Err(GeomError::DegenerateChart { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let truncated = |why: &str, residual: f64| LineOutcome {
            residual,
            flag: Some(format!("line from {u0:?} truncated after {s} of {steps} steps: {why}")),
        };
        let Some(k1) = stage(&u, &xi, &dir)? else {
            return Ok(truncated("left the domain or clusters collided", residual));
        };
        kappa = k1.kappa;
        residual = residual.max((kappa - kappa0).abs());
        if s == steps {
            break;
        }
        let d1 = DVector::from_column_slice(&k1.u_dot);
        let (ua, xa) = shift(&u, &xi, &k1, 0.5 * h);
        let Some(k2) = stage(&ua, &xa, &d1)? else { return Ok(truncated("stage left the domain", residual)) };
        let (ub, xb) = shift(&u, &xi, &k2, 0.5 * h);
        let Some(k3) = stage(&ub, &xb, &d1)? else { return Ok(truncated("stage left the domain", residual)) };
        let (uc, xc) = shift(&u, &xi, &k3, h);
        let Some(k4) = stage(&uc, &xc, &d1)? else { return Ok(truncated("stage left the domain", residual)) };
        for (j, uj) in u.iter_mut().enumerate() {
            *uj += h / 6.0 * (k1.u_dot[j] + 2.0 * k2.u_dot[j] + 2.0 * k3.u_dot[j] + k4.u_dot[j]);
        }
        xi += (&k1.xi_dot + &k2.xi_dot * 2.0 + &k3.xi_dot * 2.0 + &k4.xi_dot) * (h / 6.0);
        dir = d1;
    }
    Ok(LineOutcome { residual, flag: None })
}

/// (point index, normal index, u, ξ) where a curvature line starts.
type LineStart = (usize, usize, Vec<f64>, DVector<f64>);

fn dupin_from_lines(
    chart: &ImmersionChart,
    plan: &SamplePlan,
    mut report: ClassificationReport,
) -> Result<ClassificationReport> {
    let tol = plan.tol_for(chart);
    if !report.verdicts.k_umbilical.as_ref().is_some_and(Check::passed) {
        report.verdicts.dupin = Some(Check::vacuous(tol, "not k-umbilical on the sweep"));
        return Ok(report);
    }
    let cluster_tol = plan.cluster_tol_for(chart);
    let mut starts: Vec<(usize, Vec<f64>)> = Vec::new();
    for p in 0..plan.curve_points.min(plan.points.len()) {
        let normals = &plan.normals[p];
        let count = plan.curve_count.min(normals.len());
        for c in 0..count {
            starts.push((p, normals[c * normals.len() / count].clone()));
        }
    }
    let jobs: Vec<Result<Vec<LineStart>>> = starts
        .iter()
        .map(|(p, xi)| {
            let u = &plan.points[*p];
            let forms = fundamental_forms(chart, u).map_err(|e| at(u, e))?;
            let xi_amb = forms.normal_from_frame(xi);
            let k = forms.spectrum(xi, cluster_tol).map_err(|e| at(u, e))?.cluster_count();
            Ok((0..k).map(|i| (*p, i, xi.clone(), xi_amb.clone())).collect())
        })
        .collect();
    let mut lines = Vec::new();
    for j in jobs {
        lines.extend(j?);
    }
    let outcomes: Vec<Result<LineOutcome>> = lines
        .par_iter()
        .map(|(p, i, _, xi)| {
            let u = &plan.points[*p];
            follow_line(chart, u, xi, *i, plan.curve_length, plan.curve_step, cluster_tol).map_err(|e| at(u, e))
        })
        .collect();
    let mut worst: Option<(f64, Witness)> = None;
    for ((p, _, xi, _), o) in lines.iter().zip(outcomes) {
        let o = o?;
        report.curves.dupin_curves += 1;
        if let Some(f) = o.flag {
            report.curves.dupin_truncated += 1;
            report.curves.flags.push(f);
        }
        if worst.as_ref().is_none_or(|(r, _)| o.residual > *r) {
            worst = Some((o.residual, Witness { u: plan.points[*p].clone(), normal: xi.clone() }));
        }
    }
    report.verdicts.dupin = Some(match worst {
        Some((r, w)) => Check::from_residual(r, tol, Some(w)),
        None => Check::vacuous(tol, "no curvature lines in the plan"),
    });
    Ok(report)
}

/// Integrates lines of curvature with parallel normals from sampled (u, ξ)
/// and measures the drift of each principal curvature along its own line.
pub fn dupin_check(chart: &ImmersionChart, plan: &SamplePlan) -> Result<ClassificationReport> {
    let report = umbilicity_class(chart, plan)?;
    dupin_from_lines(chart, plan, report)
}

/// Every check in one report; the antipodal check runs for codimension ≥ 2.
pub fn classify(chart: &ImmersionChart, plan: &SamplePlan) -> Result<ClassificationReport> {
    let samples = sweep_spectra(chart, plan)?;
    let report = umbilicity_from_samples(chart, plan, &samples);
    let mut report = unipotent_from_samples(chart, plan, &samples, report);
    if chart.codim() >= 2 {
        report.antipodal = Some(antipodal_from_samples(chart, plan, &samples));
    }
    let report = cpc_from_curves(chart, plan, report)?;
    dupin_from_lines(chart, plan, report)
}
