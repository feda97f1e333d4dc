//! Command-line driver behind the `liesphere` binary.
//!
//! Exit codes: 0 when every requested verdict passes, 1 when one fails,
//! 2 for usage and input errors, 3 for numerical failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::classify::{classify, sweep_spectra, Check, ClassificationReport};
use crate::error::GeomError;
use crate::immersion::{
    builtin_chart, conformal_to_sphere, envelope_residuals, mobius_deform, radius_cluster, BuiltinChart, EnvelopeSpec,
    ImmersionChart,
};
use crate::legendre::{legendre_lift, plan_samples, reducibility_rank, sphere_sweep, spheres_to_csv, RankReport};
use crate::lie::{cecil_chern_decompose, random_mobius, LieTransformation};
use crate::plan::{PlanConfig, SamplePlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const SCHEMA_VERSION: u32 = 1;
const DEFAULT_MOBIUS_RAPIDITY: f64 = 0.6;
const DECOMPOSE_TOL: f64 = 1e-8;
const ENVELOPE_TOL: f64 = 1e-9;

pub const FORMATS_HELP: &str = "\
Output formats (--format json|csv). Every JSON document carries
`schema_version` (currently 1) and the `seed` that produced it.

verify, json: the classification report
  chart, n, ambient_dim, ambient_curvature, codim, analytic
  k_observed            cluster count, or \"varies\"
  max_cluster_count, multiplicities, cluster_values, constancy_residual
  verdicts.{k_umbilical, weakly_k_umbilical, unipotent, cpc, dupin}
                        {verdict: pass|inconclusive|fail, residual, tol,
                         witness: {u, normal} | null, note}
  shared_curvature, antipodal, curves, plan
  requested, passed     the verdicts that decide the exit status
verify, csv: check,verdict,residual,tol,witness_u,witness_normal,note

sweep, csv: sample,point,u,normal,eigenvalues,multiplicities,raw
sweep, json: {schema_version, seed, chart, samples: [same fields]}

lift, csv: sample,u,normal,family,value,multiplicity,representative,degeneracy,flagged
  family   index of the curvature sphere: finite values ascending, then the
           point sphere
  value    principal curvature, or inf for the point sphere
lift, json: {schema_version, seed, chart, spheres: [rows], ranks: [
  {family, samples, ambient_dim, rank, singular_values, rank_tol,
   multiplicity_constant, reducible_candidate}]}

decompose, json: {kind, t, residual, phi1, phi2} with matrices as row lists
decompose, csv: kind,t,residual

envelope, json: {spec, n, k, residuals: {position, tangency, samples,
  singular_points}, radius_clusters: [{u, expected, found, multiplicity,
  expected_multiplicity}]}
envelope, csv: u,expected,found,multiplicity,expected_multiplicity

Vectors inside CSV cells are `;`-separated.
Input matrices for decompose:
  {\"signature\": {\"Lie\": d}, \"rows\": [[...], ...], \"kind_hint\": {\"kind\": \"general\"}}
";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Requirement {
    Umbilical,
    WeaklyUmbilical,
    Unipotent,
    Cpc,
    Dupin,
    Antipodal,
    SharedCurvature,
}

impl Requirement {
    fn name(self) -> &'static str {
        match self {
            Requirement::Umbilical => "k_umbilical",
            Requirement::WeaklyUmbilical => "weakly_k_umbilical",
            Requirement::Unipotent => "unipotent",
            Requirement::Cpc => "cpc",
            Requirement::Dupin => "dupin",
            Requirement::Antipodal => "antipodal",
            Requirement::SharedCurvature => "shared_curvature",
        }
    }

    fn check(self, report: &ClassificationReport) -> Option<&Check> {
        let v = &report.verdicts;
        match self {
            Requirement::Umbilical => v.k_umbilical.as_ref(),
            Requirement::WeaklyUmbilical => v.weakly_k_umbilical.as_ref(),
            Requirement::Unipotent => v.unipotent.as_ref(),
            Requirement::Cpc => v.cpc.as_ref(),
            Requirement::Dupin => v.dupin.as_ref(),
            Requirement::Antipodal => report.antipodal.as_ref().map(|a| &a.check),
            Requirement::SharedCurvature => report.shared_curvature.as_ref().map(|s| &s.check),
        }
    }
}

/// A seeded random Möbius map applied after the chart: `seed=N[,rapidity=R]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusDeform {
    pub seed: u64,
    pub rapidity: f64,
}

impl std::str::FromStr for MobiusDeform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = MobiusDeform { seed: 0, rapidity: DEFAULT_MOBIUS_RAPIDITY };
        let mut have_seed = false;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').unwrap_or(("seed", part));
            match key {
                "seed" => {
                    out.seed = value.parse().map_err(|_| format!("seed must be an integer, got {value:?}"))?;
                    have_seed = true;
                }
                "rapidity" => {
                    out.rapidity = value.parse().map_err(|_| format!("rapidity must be a number, got {value:?}"))?;
                }
                _ => return Err(format!("unknown key {key:?}; expected seed=N[,rapidity=R]")),
            }
        }
        if !have_seed {
            return Err("expected seed=N[,rapidity=R]".into());
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct PlanArgs {
    /// Points per axis for tensor grids.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Above this many grid points, sample this many points at random.
    #[arg(long)]
    pub max_points: Option<usize>,
    /// Unit normals per point (raised to at least 2p²).
    #[arg(long)]
    pub normals: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub cluster_tol: Option<f64>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Transport curves per hosted point.
    #[arg(long)]
    pub curves: Option<usize>,
    /// Points that host transport curves and curvature lines.
    #[arg(long)]
    pub curve_points: Option<usize>,
    /// Expected cluster count.
    #[arg(long = "k")]
    pub target_k: Option<usize>,
    /// TOML plan file; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Compose the chart with a seeded random Möbius map: seed=N[,rapidity=R].
    #[arg(long)]
    pub mobius_deform: Option<MobiusDeform>,
    /// Use finite differences even when exact jets exist.
    #[arg(long)]
    pub finite_differences: bool,
    /// Richardson-extrapolated finite differences.
    #[arg(long)]
    pub richardson: bool,
}

impl PlanArgs {
    fn plan_config(&self, seed: Option<u64>) -> Result<PlanConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                PlanConfig::from_file(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => PlanConfig::default(),
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    cfg.$field = v;
                }
            };
        }
        set!(grid, self.grid);
        set!(max_points, self.max_points);
        set!(normals, self.normals);
        set!(curve_count, self.curves);
        set!(curve_points, self.curve_points);
        set!(seed, seed);
        cfg.tol = self.tol.or(cfg.tol);
        cfg.cluster_tol = self.cluster_tol.or(cfg.cluster_tol);
        cfg.fd_step = self.fd_step.or(cfg.fd_step);
        cfg.target_k = self.target_k.or(cfg.target_k);
        cfg.richardson |= self.richardson;
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Classification report: umbilicity, unipotent, CPC, Dupin, antipodal symmetry.
    Verify {
        /// Builtin chart name (see --help-formats) or a JSON/TOML chart file.
        chart: String,
        #[command(flatten)]
        plan: PlanArgs,
        /// Verdicts that decide the exit status; all present verdicts by default.
        #[arg(long, value_delimiter = ',')]
        require: Vec<Requirement>,
    },
    /// Principal-curvature spectra over the (u, ξ) grid.
    Sweep {
        chart: String,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Curvature spheres of the Legendre lift and the span rank of each family.
    Lift {
        chart: String,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Factor a Lie transformation as Φ₁ P_t Φ₂.
    Decompose { matrix: PathBuf },
    /// Envelope of a sphere family: cylinder:r, torus:R,r or generic:seed.
    Envelope {
        spec: String,
        #[command(flatten)]
        plan: PlanArgs,
    },
}

#[derive(Clone, Debug, Parser)]
#[command(
    name = "liesphere",
    version,
    about = "Lie sphere geometry and curvature verifiers for submanifolds of space forms"
)]
pub struct Cli {
    /// Seed for every random choice; echoed in the output.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Describe the JSON and CSV layouts and exit.
    #[arg(long)]
    pub help_formats: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// One invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Geom(e) => match e {
                GeomError::Unknown(_)
                | GeomError::Parse(_)
                | GeomError::Io(_)
                | GeomError::InvalidInput(_)
                | GeomError::NotApplicable(_)
                | GeomError::UnsupportedChart(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            },
        }
    }
}

/// Rendered report and the exit status it implies.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub status: i32,
    pub output: String,
}

pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let outcome = match &config.command {
        Command::Verify { chart, plan, require } => verify(config, chart, plan, require)?,
        Command::Sweep { chart, plan } => sweep(config, chart, plan)?,
        Command::Lift { chart, plan } => lift(config, chart, plan)?,
        Command::Decompose { matrix } => decompose(config, matrix)?,
        Command::Envelope { spec, plan } => envelope(config, spec, plan)?,
    };
    if let Some(path) = &config.out {
        std::fs::write(path, &outcome.output).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(outcome)
}

/// Parses `args` (program name first), runs, prints, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if cli.help_formats {
        print!("{FORMATS_HELP}");
        return EXIT_OK;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (verify, sweep, lift, decompose, envelope); see --help");
        return EXIT_USAGE;
    };
    let config = RunConfig { command, seed: cli.seed, out: cli.out, format: cli.format };
    match run(&config) {
        Ok(outcome) => {
            if config.out.is_none() {
                print!("{}", outcome.output);
            }
            outcome.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main_entry() -> i32 {
    main_with_args(std::env::args_os())
}

fn parse_chart(spec: &str) -> Result<BuiltinChart, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{spec}: {e}")))?;
        let parsed = if spec.ends_with(".toml") {
            toml::from_str(&text).map_err(|e| e.to_string())
        } else {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        };
        return parsed.map_err(|e| CliError::Usage(format!("{spec}: {e}")));
    }
    spec.parse::<BuiltinChart>()
        .map_err(|e| CliError::Usage(format!("{e}\nknown charts: {}", BuiltinChart::name_forms().join(", "))))
}

fn build_chart(spec: &str, args: &PlanArgs, cfg: &PlanConfig) -> Result<ImmersionChart, CliError> {
    let mut chart = builtin_chart(&parse_chart(spec)?)?;
    if args.finite_differences {
        chart = chart.finite_differences();
    }
    if let Some(m) = args.mobius_deform {
        if !chart.ambient().is_unit_sphere() {
            chart = conformal_to_sphere(&chart)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
        let map = random_mobius(chart.ambient().dim, m.rapidity, &mut rng);
        chart = mobius_deform(&chart, &map)?;
    }
    Ok(cfg.configure_chart(chart))
}

fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(GeomError::from)?;
    s.push('\n');
    Ok(s)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let io = |e: csv::Error| CliError::Geom(GeomError::Io(e.to_string()));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Geom(GeomError::Io(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| CliError::Geom(GeomError::Io(e.to_string())))
}

fn verify(config: &RunConfig, chart: &str, args: &PlanArgs, require: &[Requirement]) -> Result<RunOutcome, CliError> {
    let cfg = args.plan_config(config.seed)?;
    let chart = build_chart(chart, args, &cfg)?;
    let plan = SamplePlan::generate(&chart, &cfg)?;
    let report = classify(&chart, &plan)?;
    let requested: Vec<Requirement> = if require.is_empty() {
        [
            Requirement::Umbilical,
            Requirement::Unipotent,
            Requirement::Cpc,
            Requirement::Dupin,
            Requirement::Antipodal,
            Requirement::SharedCurvature,
        ]
        .into_iter()
        .filter(|r| r.check(&report).is_some())
        .collect()
    } else {
        require.to_vec()
    };
    let passed = requested.iter().all(|r| r.check(&report).is_some_and(Check::passed));
    let output = match config.format {
        Format::Json => {
            let mut value = serde_json::to_value(&report).map_err(GeomError::from)?;
            value["seed"] = json!(cfg.seed);
            value["requested"] = json!(requested.iter().map(|r| r.name()).collect::<Vec<_>>());
            value["passed"] = json!(passed);
            pretty(&value)?
        }
        Format::Csv => {
            let all = [
                Requirement::Umbilical,
                Requirement::WeaklyUmbilical,
                Requirement::Unipotent,
                Requirement::Cpc,
                Requirement::Dupin,
                Requirement::Antipodal,
                Requirement::SharedCurvature,
            ];
            let rows = all.into_iter().filter_map(|r| {
                r.check(&report).map(|c| {
                    let (u, normal) = c.witness.as_ref().map(|w| (join(&w.u), join(&w.normal))).unwrap_or_default();
                    vec![
                        r.name().to_string(),
                        format!("{:?}", c.verdict).to_lowercase(),
                        format!("{:e}", c.residual),
                        format!("{:e}", c.tol),
                        u,
                        normal,
                        c.note.clone().unwrap_or_default(),
                    ]
                })
            });
            csv_string(&["check", "verdict", "residual", "tol", "witness_u", "witness_normal", "note"], rows)?
        }
    };
    Ok(RunOutcome { status: if passed { EXIT_OK } else { EXIT_VERDICT }, output })
}

#[derive(Serialize)]
struct SpectrumRow {
    sample: usize,
    point: usize,
    u: Vec<f64>,
    normal: Vec<f64>,
    eigenvalues: Vec<f64>,
    multiplicities: Vec<usize>,
    raw: Vec<f64>,
}

fn sweep(config: &RunConfig, chart: &str, args: &PlanArgs) -> Result<RunOutcome, CliError> {
    let cfg = args.plan_config(config.seed)?;
    let chart = build_chart(chart, args, &cfg)?;
    let plan = SamplePlan::generate(&chart, &cfg)?;
    let rows: Vec<SpectrumRow> = sweep_spectra(&chart, &plan)?
        .into_iter()
        .enumerate()
        .map(|(k, s)| SpectrumRow {
            sample: k,
            point: s.point,
            u: s.u,
            normal: s.normal,
            eigenvalues: s.spectrum.eigenvalues,
            multiplicities: s.spectrum.multiplicities,
            raw: s.spectrum.raw,
        })
        .collect();
    let output = match config.format {
        Format::Json => pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "chart": chart.name(),
            "samples": rows,
        }))?,
        Format::Csv => csv_string(
            &["sample", "point", "u", "normal", "eigenvalues", "multiplicities", "raw"],
            rows.iter().map(|r| {
                vec![
                    r.sample.to_string(),
                    r.point.to_string(),
                    join(&r.u),
                    join(&r.normal),
                    join(&r.eigenvalues),
                    r.multiplicities.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
                    join(&r.raw),
                ]
            }),
        )?,
    };
    Ok(RunOutcome { status: EXIT_OK, output })
}

fn lift(config: &RunConfig, chart: &str, args: &PlanArgs) -> Result<RunOutcome, CliError> {
    let cfg = args.plan_config(config.seed)?;
    let mut chart = build_chart(chart, args, &cfg)?;
    if chart.ambient().curvature == 0.0 {
        chart = conformal_to_sphere(&chart)?;
    }
    let plan = SamplePlan::generate(&chart, &cfg)?;
    let lift = legendre_lift(&chart)?.with_cluster_tol(plan.cluster_tol_for(&chart));
    let rows = sphere_sweep(&lift, &plan)?;
    // For hypersurfaces ξ and −ξ give the two oppositely oriented lifts, so
    // only the first normal of each point enters the span computation.
    let samples: Vec<(Vec<f64>, Vec<f64>)> = if chart.codim() == 1 {
        plan.points.iter().zip(&plan.normals).map(|(u, ns)| (u.clone(), ns[0].clone())).collect()
    } else {
        plan_samples(&plan)
    };
    let families = rows.iter().filter(|r| r.sample == 0).count();
    let mut ranks: Vec<RankReport> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    for family in 0..families {
        match reducibility_rank(&lift, family, &samples) {
            Ok(r) => ranks.push(r),
            Err(e) => notes.push(format!("family {family}: {e}")),
        }
    }
    let output = match config.format {
        Format::Json => pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "chart": chart.name(),
            "spheres": rows,
            "ranks": ranks,
            "notes": notes,
        }))?,
        Format::Csv => spheres_to_csv(&rows)?,
    };
    Ok(RunOutcome { status: EXIT_OK, output })
}

fn matrix_rows(g: &LieTransformation) -> Vec<Vec<f64>> {
    let m = g.matrix();
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn decompose(config: &RunConfig, path: &Path) -> Result<RunOutcome, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let g = LieTransformation::from_json(&text)?;
    let (status, value, csv_row) = match cecil_chern_decompose(&g) {
        Ok(dec) => {
            let kind = dec.kind.map(|k| format!("{k:?}").to_lowercase()).unwrap_or_else(|| "mobius".into());
            let status = if dec.residual <= DECOMPOSE_TOL { EXIT_OK } else { EXIT_VERDICT };
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "seed": config.seed,
                "d": g.base_dim(),
                "kind": kind,
                "t": dec.t,
                "residual": dec.residual,
                "tol": DECOMPOSE_TOL,
                "phi1": matrix_rows(&dec.phi1),
                "phi2": matrix_rows(&dec.phi2),
            });
            (status, value, vec![kind, format!("{:e}", dec.t), format!("{:e}", dec.residual)])
        }
        Err(e @ GeomError::DecompositionFailed { .. }) => {
            let value = json!({
                "schema_version": SCHEMA_VERSION,
                "seed": config.seed,
                "d": g.base_dim(),
                "error": e.to_string(),
            });
            (EXIT_VERDICT, value, vec!["failed".into(), String::new(), String::new()])
        }
        Err(e) => return Err(e.into()),
    };
    let output = match config.format {
        Format::Json => pretty(&value)?,
        Format::Csv => csv_string(&["kind", "t", "residual"], [csv_row])?,
    };
    Ok(RunOutcome { status, output })
}

fn envelope(config: &RunConfig, spec: &str, args: &PlanArgs) -> Result<RunOutcome, CliError> {
    let cfg = args.plan_config(config.seed)?;
    let spec: EnvelopeSpec = spec.parse().map_err(|e: GeomError| CliError::Usage(e.to_string()))?;
    let mut env = spec.build()?;
    env.chart = cfg.configure_chart(env.chart.clone());
    let residuals = envelope_residuals(&env, cfg.grid.max(2))?;
    let cluster_tol = cfg.cluster_tol.unwrap_or_else(|| env.chart.default_cluster_tol());
    let plan = SamplePlan::generate(&env.chart, &cfg)?;
    let clusters = plan.points.iter().map(|p| radius_cluster(&env, p, cluster_tol)).collect::<Result<Vec<_>, _>>()?;
    let tol = cfg.tol.unwrap_or(ENVELOPE_TOL);
    let passed = residuals.position <= tol
        && residuals.tangency <= tol
        && clusters.iter().all(|c| c.error() <= cluster_tol && c.multiplicity >= c.expected_multiplicity);
    let output = match config.format {
        Format::Json => pretty(&json!({
            "schema_version": SCHEMA_VERSION,
            "seed": cfg.seed,
            "spec": spec.to_string(),
            "chart": env.chart.name(),
            "n": env.chart.intrinsic_dim(),
            "k": env.family_dim(),
            "tol": tol,
            "cluster_tol": cluster_tol,
            "residuals": residuals,
            "radius_clusters": clusters,
            "passed": passed,
        }))?,
        Format::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# position={:e} tangency={:e}", residuals.position, residuals.tangency);
            out + &csv_string(
                &["u", "expected", "found", "multiplicity", "expected_multiplicity"],
                clusters.iter().map(|c| {
                    vec![
                        join(&c.u),
                        format!("{:e}", c.expected),
                        format!("{:e}", c.found),
                        c.multiplicity.to_string(),
                        c.expected_multiplicity.to_string(),
                    ]
                }),
            )?
        }
    };
    Ok(RunOutcome { status: if passed { EXIT_OK } else { EXIT_VERDICT }, output })
}
