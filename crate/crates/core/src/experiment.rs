//! Reproducible experiment runs: recipes in, append-only run directories out.
//!
//! A run directory holds `manifest.json`, the result artifacts and
//! `summary.txt`. Every CSV artifact starts with a `# manifest <hash>` line and
//! every JSON artifact carries a `manifest` field. The hash covers the tool
//! version, recipe kind, parameters and spec hash, so re-running a stored
//! manifest into a fresh directory reproduces the artifacts byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::curve::{geometric_checkpoints, Measure, TailCurve, DEFAULT_RATIO};
use crate::envmodel::specfile::{parse_spec, read_spec};
use crate::envmodel::{sample_environment, validate_spec, SampledField, SiteField, SiteLawSpec, Window};
use crate::exponents::{exponent_table, ExponentTable};
use crate::fit::{double_log_exponent, loglog_slope, Bootstrap, EstimatorKind, ExponentFit, FitWindow, VerdictStatus};
use crate::montecarlo::{annealed_tail, mixed_tail_omega, mixed_tail_theta, quenched_tail, trap_event_frequency};
use crate::oracle::{annealed_survival, exact_survival, BoundaryPolicy};
use crate::potential::{find_traps, potential_on, traps_to_csv};
use crate::{Error, Result};

pub const TOOL: &str = "rwre-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable naming the environment-sample cache directory.
pub const CACHE_ENV: &str = "RWRE_LAB_CACHE";

pub mod exit {
    pub const OK: i32 = 0;
    pub const FAIL: i32 = 2;
    pub const INCONCLUSIVE: i32 = 3;
    pub const PARSE: i32 = 64;
    pub const VALIDATION: i32 = 65;
    pub const RESOURCE: i32 = 69;
    pub const REFUSED: i32 = 73;
    pub const IO: i32 = 74;
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } => exit::PARSE,
        Error::Resource(_) => exit::RESOURCE,
        Error::Refused(_) => exit::REFUSED,
        Error::Io(_) => exit::IO,
        _ => exit::VALIDATION,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecipeKind {
    Validate,
    Exponents,
    GenEnv,
    TrapScan,
    ExactTail,
    McTail,
    TrapFrequency,
    Fit,
    Report,
}

/// Parameter block; unused fields stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub seed: u64,
    pub n_max: Option<u64>,
    pub walkers: Option<u64>,
    pub n_envs: Option<u64>,
    /// Ratio of consecutive checkpoints.
    pub ratio: Option<f64>,
    pub measure: Option<Measure>,
    pub gap_tol: Option<f64>,
    /// Half-width of the sampled window (gen-env, trap-scan).
    pub radius: Option<u64>,
    /// Minimal trap depth (trap-scan) or depth per `ln n` (trap-frequency).
    pub depth: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub estimator: Option<EstimatorKind>,
    pub window: Option<FitWindow>,
    pub theory: Option<f64>,
    pub tolerance: Option<f64>,
    pub replicas: Option<usize>,
    /// Run directory holding the curve to fit.
    pub input: Option<PathBuf>,
    /// Run directories merged by `report`.
    pub runs: Vec<PathBuf>,
    pub cross_spec: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecipe {
    pub kind: RecipeKind,
    pub spec: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: RecipeKind,
    pub params: Params,
    pub spec_hash: Option<String>,
    pub spec_text: Option<String>,
    pub hash: String,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct HashInput<'a> {
    tool: &'a str,
    version: &'a str,
    kind: RecipeKind,
    params: &'a Params,
    spec_hash: Option<&'a str>,
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    /// Hash over everything that determines the artifacts; wall time and the
    /// output location are excluded.
    pub fn compute_hash(&self) -> String {
        let input = HashInput {
            tool: &self.tool,
            version: &self.version,
            kind: self.kind,
            params: &self.params,
            spec_hash: self.spec_hash.as_deref(),
        };
        sha_hex(&serde_json::to_vec(&input).expect("params serialize"))
    }

    pub fn spec(&self) -> Result<Option<SiteLawSpec>> {
        self.spec_text.as_deref().map(parse_spec).transpose()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub exit_code: i32,
    pub summary: String,
}

enum Artifact {
    Csv(String),
    Json(Value),
}

struct Products {
    files: Vec<(String, Artifact)>,
    summary: String,
    exit_code: i32,
    /// Spec hash inherited from an input run.
    spec_hash: Option<String>,
}

impl Products {
    fn new(summary: String) -> Self {
        Self { files: Vec::new(), summary, exit_code: exit::OK, spec_hash: None }
    }

    fn csv(&mut self, name: &str, body: String) {
        self.files.push((name.into(), Artifact::Csv(body)));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.files.push((name.into(), Artifact::Json(serde_json::to_value(value)?)));
        Ok(())
    }
}

/// Runs a recipe and writes its run directory.
pub fn run(recipe: &ExperimentRecipe) -> Result<RunOutcome> {
    let spec = recipe.spec.as_deref().map(read_spec).transpose()?;
    run_spec(recipe.kind, spec, &recipe.params, &recipe.out, recipe.workers)
}

/// Re-runs the manifest stored in `run_dir` into the new directory `out`.
pub fn rerun(run_dir: &Path, out: &Path, workers: Option<usize>) -> Result<RunOutcome> {
    let manifest = read_manifest(run_dir)?;
    run_spec(manifest.kind, manifest.spec()?, &manifest.params, out, workers)
}

/// Runs with an in-memory spec.
pub fn run_spec(
    kind: RecipeKind,
    spec: Option<SiteLawSpec>,
    params: &Params,
    out: &Path,
    workers: Option<usize>,
) -> Result<RunOutcome> {
    if out.exists() {
        return Err(Error::Refused(format!("run directory {} already exists", out.display())));
    }
    let started = Instant::now();
    let products = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Resource(e.to_string()))?
            .install(|| produce(kind, spec.as_ref(), params)),
        None => produce(kind, spec.as_ref(), params),
    }?;
    let mut manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        kind,
        params: params.clone(),
        spec_hash: spec.as_ref().map(|s| s.hash_hex()).or(products.spec_hash.clone()),
        spec_text: spec.as_ref().map(crate::envmodel::specfile::format_spec),
        hash: String::new(),
        wall_time_seconds: 0.0,
        files: products.files.iter().map(|(n, _)| n.clone()).collect(),
        exit_code: products.exit_code,
    };
    manifest.hash = manifest.compute_hash();
    manifest.wall_time_seconds = started.elapsed().as_secs_f64();
    if out.exists() {
        return Err(Error::Refused(format!("run directory {} already exists", out.display())));
    }
    std::fs::create_dir_all(out)?;
    for (name, artifact) in &products.files {
        let body = match artifact {
            Artifact::Csv(text) => format!("# manifest {}\n{text}", manifest.hash),
            Artifact::Json(value) => {
                let mut value = value.clone();
                if let Value::Object(map) = &mut value {
                    map.insert("manifest".into(), Value::String(manifest.hash.clone()));
                } else {
                    value = serde_json::json!({ "manifest": manifest.hash, "value": value });
                }
                serde_json::to_string_pretty(&value)? + "\n"
            }
        };
        std::fs::write(out.join(name), body)?;
    }
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    let summary = format!(
        "{TOOL} {VERSION} {:?}\nmanifest {}\nwall time {:.3} s\n{}",
        kind, manifest.hash, manifest.wall_time_seconds, products.summary
    );
    std::fs::write(out.join("summary.txt"), &summary)?;
    Ok(RunOutcome { dir: out.to_path_buf(), exit_code: manifest.exit_code, manifest, summary })
}

fn require_spec(spec: Option<&SiteLawSpec>) -> Result<&SiteLawSpec> {
    spec.ok_or_else(|| Error::Domain("this recipe needs a spec file".into()))
}

fn usable_spec(spec: Option<&SiteLawSpec>) -> Result<&SiteLawSpec> {
    let spec = require_spec(spec)?;
    let report = validate_spec(spec)?;
    if !report.passes() {
        return Err(Error::Domain(format!("spec fails its standing assumptions: {}", report.messages.join("; "))));
    }
    Ok(spec)
}

fn need<T: Copy>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::Domain(format!("parameter {name} is required")))
}

fn checkpoints(params: &Params, default_n: u64) -> Result<Vec<u64>> {
    geometric_checkpoints(params.n_max.unwrap_or(default_n), params.ratio.unwrap_or(DEFAULT_RATIO))
}

fn policy(params: &Params) -> BoundaryPolicy {
    params.gap_tol.map(BoundaryPolicy::with_gap_tol).unwrap_or_default()
}

fn produce(kind: RecipeKind, spec: Option<&SiteLawSpec>, params: &Params) -> Result<Products> {
    match kind {
        RecipeKind::Validate => {
            let report = validate_spec(require_spec(spec)?)?;
            let mut p = Products::new(if report.passes() {
                "spec satisfies ellipticity and nestling\n".to_string()
            } else {
                format!("spec rejected: {}\n", report.messages.join("; "))
            });
            if !report.passes() {
                p.exit_code = exit::VALIDATION;
            }
            p.json("validation.json", &report)?;
            Ok(p)
        }
        RecipeKind::Exponents => {
            let spec = usable_spec(spec)?;
            let table = exponent_table(spec, spec.p)?;
            let mut p = Products::new(format!(
                "kappa_left {} kappa_right {}\nannealed {} quenched {}\n",
                table.kappa_left, table.kappa_right, table.exponent_annealed, table.exponent_quenched
            ));
            p.json("exponents.json", &table)?;
            p.csv("exponents.csv", table.to_csv());
            Ok(p)
        }
        RecipeKind::GenEnv => gen_env(usable_spec(spec)?, params),
        RecipeKind::TrapScan => {
            let spec = usable_spec(spec)?;
            let radius = params.radius.unwrap_or(1000) as i64;
            let field = SampledField::new(Arc::new(spec.clone()), params.seed);
            let profile = potential_on(&field, -radius, radius)?;
            let traps = find_traps(&profile, params.depth.unwrap_or(1.0), (-radius, radius), false)?;
            let free = traps.iter().filter(|t| t.obstacle_free).count();
            let mut p = Products::new(format!("{} traps, {free} obstacle-free, on [-{radius}, {radius}]\n", traps.len()));
            p.csv("traps.csv", traps_to_csv(&traps));
            Ok(p)
        }
        RecipeKind::ExactTail => exact_tail(usable_spec(spec)?, params),
        RecipeKind::McTail => mc_tail(usable_spec(spec)?, params),
        RecipeKind::TrapFrequency => {
            let spec = usable_spec(spec)?;
            let f = trap_event_frequency(
                spec,
                spec.p,
                need(params.depth, "depth")?,
                need(params.b1, "b1")?,
                need(params.b2, "b2")?,
                need(params.n_max, "n_max")?,
                need(params.n_envs, "n_envs")?,
                params.seed,
            )?;
            let mut p = Products::new(format!("{f:?}\n"));
            p.json("trap_frequency.json", &f)?;
            Ok(p)
        }
        RecipeKind::Fit => fit_run(spec, params),
        RecipeKind::Report => report_run(params),
    }
}

fn cache_path(spec: &SiteLawSpec, seed: u64, radius: u64) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV)?;
    Some(Path::new(&dir).join(format!("{}-{seed}-{radius}.csv", &spec.hash_hex()[..16])))
}

fn gen_env(spec: &SiteLawSpec, params: &Params) -> Result<Products> {
    let radius = params.radius.unwrap_or(if spec.dim == 1 { 1000 } else { 20 });
    let cached = cache_path(spec, params.seed, radius);
    let body = match cached.as_ref().and_then(|p| std::fs::read_to_string(p).ok()) {
        Some(body) => body,
        None => {
            let window = Window::cube(spec.dim, radius as i64);
            let env = sample_environment(spec, &window, params.seed)?;
            let mut body = String::new();
            let axes = ["x", "y", "z", "w"];
            let coords: Vec<&str> = axes.iter().take(spec.dim).copied().collect();
            let moves: Vec<String> =
                (0..spec.dim).flat_map(|k| [format!("up_{}", axes[k]), format!("down_{}", axes[k])]).collect();
            let mut header = [coords.join(","), moves.join(","), "obstacle".into()].join(",");
            let potential = if spec.dim == 1 {
                header.push_str(",potential");
                Some(potential_on(&env, -(radius as i64), radius as i64)?)
            } else {
                None
            };
            body.push_str(&header);
            body.push('\n');
            for idx in 0..window.volume() as usize {
                let x = window.point(idx);
                let row: Vec<String> = x
                    .iter()
                    .map(|c| c.to_string())
                    .chain(env.moves(&x).iter().map(|m| m.to_string()))
                    .chain([u8::from(env.obstacle(&x)).to_string()])
                    .chain(potential.as_ref().map(|v| v.value(x[0]).to_string()))
                    .collect();
                body.push_str(&row.join(","));
                body.push('\n');
            }
            if let Some(path) = &cached {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(path, &body)?;
            }
            body
        }
    };
    let mut p = Products::new(format!("environment on the cube of half-width {radius}, seed {}\n", params.seed));
    p.csv("environment.csv", body);
    Ok(p)
}

fn exact_tail(spec: &SiteLawSpec, params: &Params) -> Result<Products> {
    let cps = checkpoints(params, 1000)?;
    let policy = policy(params);
    let measure = params.measure.unwrap_or(Measure::Quenched);
    let (curve, mut p) = match measure {
        Measure::Quenched => {
            let field = SampledField::new(Arc::new(spec.clone()), params.seed);
            let bracket = exact_survival(&field, spec.r, &cps, &policy)?;
            let mut p = Products::new(format!(
                "quenched bracket to n = {}: [{:e}, {:e}]{}\n",
                cps.last().unwrap(),
                bracket.ln_lower.last().unwrap().exp(),
                bracket.ln_upper.last().unwrap().exp(),
                if bracket.widened { " (widened beyond gap tolerance)" } else { "" }
            ));
            p.csv("bracket.csv", bracket.to_csv(Some(params.seed)));
            p.json("bracket.json", &bracket)?;
            (bracket.to_curve(params.seed), p)
        }
        Measure::Annealed => {
            let n_envs = params.n_envs.unwrap_or(100);
            let curve = annealed_survival(spec, spec.p, spec.r, &cps, n_envs, params.seed, &policy)?;
            let p = Products::new(format!(
                "annealed average over {n_envs} environments to n = {}: {:e}\n",
                cps.last().unwrap(),
                curve.estimate.last().unwrap()
            ));
            (curve, p)
        }
        m => return Err(Error::NotApplicable(format!("exact tails cover quenched and annealed, not {}", m.label()))),
    };
    p.csv("curve.csv", curve.to_csv());
    p.json("curve.json", &curve)?;
    Ok(p)
}

fn mc_tail(spec: &SiteLawSpec, params: &Params) -> Result<Products> {
    let cps = checkpoints(params, 1000)?;
    let walkers = params.walkers.unwrap_or(10_000);
    let seed = params.seed;
    let fixed = SampledField::new(Arc::new(spec.clone()), seed);
    let measure = params.measure.unwrap_or(Measure::Quenched);
    let curve = match measure {
        Measure::Quenched => quenched_tail(&fixed, spec.r, &cps, walkers, seed)?,
        Measure::Annealed => annealed_tail(spec, spec.p, spec.r, &cps, walkers, seed)?,
        Measure::MixedTheta => mixed_tail_theta(&fixed, spec, spec.r, &cps, walkers, seed)?,
        Measure::MixedOmega => mixed_tail_omega(&fixed, spec, spec.p, spec.r, &cps, walkers, seed)?,
    };
    let mut p = Products::new(format!(
        "{} Monte Carlo, {walkers} walkers to n = {}: {:e} ± {:e}, {} censored\n",
        measure.label(),
        cps.last().unwrap(),
        curve.estimate.last().unwrap(),
        curve.stderr.last().unwrap(),
        curve.censored
    ));
    p.csv("curve.csv", curve.to_csv());
    p.json("curve.json", &curve)?;
    Ok(p)
}

/// Theory value for the default estimator of a measure.
pub fn theory_for(table: &ExponentTable, measure: Measure, estimator: EstimatorKind) -> Option<f64> {
    match (measure, estimator) {
        (Measure::Annealed, EstimatorKind::LoglogSlope) => Some(-table.exponent_annealed),
        (Measure::Quenched, EstimatorKind::DoubleLogRatio) => Some(table.exponent_quenched),
        (Measure::MixedTheta, EstimatorKind::DoubleLogRatio) => Some(table.exponent_mixed_theta),
        (Measure::MixedOmega, EstimatorKind::DoubleLogRatio) => table.exponent_mixed_omega,
        _ => None,
    }
}

pub fn default_estimator(measure: Measure) -> EstimatorKind {
    match measure {
        Measure::Annealed => EstimatorKind::LoglogSlope,
        _ => EstimatorKind::DoubleLogRatio,
    }
}

pub fn default_tolerance(measure: Measure) -> f64 {
    match measure {
        Measure::Annealed => 0.4,
        _ => 0.15,
    }
}

/// The last two decades of the curve.
pub fn default_window(curve: &TailCurve) -> FitWindow {
    let n_hi = curve.checkpoints.last().copied().unwrap_or(1);
    FitWindow::new((n_hi / 100).max(1), n_hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub measure: Measure,
    pub fit: ExponentFit,
    pub theory: Option<f64>,
    pub tolerance: f64,
}

/// Fits a curve with the recipe's (or default) estimator, window and theory.
pub fn fit_curve(curve: &TailCurve, spec: Option<&SiteLawSpec>, params: &Params) -> Result<FitReport> {
    let estimator = params.estimator.unwrap_or_else(|| default_estimator(curve.measure));
    let window = params.window.unwrap_or_else(|| default_window(curve));
    let boot = Bootstrap { replicas: params.replicas.unwrap_or(200), seed: params.seed };
    let mut fit = match estimator {
        EstimatorKind::LoglogSlope => loglog_slope(curve, window, &boot),
        EstimatorKind::DoubleLogRatio => double_log_exponent(curve, window, &boot),
    };
    let theory = match (params.theory, spec) {
        (Some(t), _) => Some(t),
        (None, Some(spec)) => theory_for(&exponent_table(spec, spec.p)?, curve.measure, estimator),
        (None, None) => None,
    };
    let tolerance = params.tolerance.unwrap_or_else(|| default_tolerance(curve.measure));
    if let Some(t) = theory {
        fit.judge(t, tolerance);
    }
    Ok(FitReport { measure: curve.measure, fit, theory, tolerance })
}

fn status_code(status: Option<VerdictStatus>) -> i32 {
    status.map(VerdictStatus::exit_code).unwrap_or(exit::OK)
}

fn fit_run(spec: Option<&SiteLawSpec>, params: &Params) -> Result<Products> {
    let input = params.input.as_deref().ok_or_else(|| Error::Domain("fit needs an input run directory".into()))?;
    let manifest = verify_run(input)?;
    let curve: TailCurve = read_artifact(input, "curve.json")?;
    let input_spec = manifest.spec()?;
    let report = fit_curve(&curve, spec.or(input_spec.as_ref()), params)?;
    let status = report.fit.verdict.as_ref().map(|v| v.status);
    let mut p = Products::new(format!(
        "{} {:?} on [{}, {}]: estimate {:?}, CI {:?}, theory {:?}, verdict {:?}{}\n",
        curve.measure.label(),
        report.fit.kind,
        report.fit.window.n_lo,
        report.fit.window.n_hi,
        report.fit.estimate,
        report.fit.ci,
        report.theory,
        status,
        report.fit.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
    ));
    p.exit_code = status_code(status);
    p.spec_hash = manifest.spec_hash;
    p.csv("fit.csv", report.fit.to_csv());
    p.json("fit.json", &report)?;
    Ok(p)
}

pub fn read_manifest(run_dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json"))?)?)
}

fn read_artifact<T: serde::de::DeserializeOwned>(run_dir: &Path, name: &str) -> Result<T> {
    let mut value: Value = serde_json::from_str(&std::fs::read_to_string(run_dir.join(name))?)?;
    if let Value::Object(map) = &mut value {
        map.remove("manifest");
    }
    Ok(serde_json::from_value(value)?)
}

/// Checks the manifest hash and that every listed artifact carries it.
pub fn verify_run(run_dir: &Path) -> Result<Manifest> {
    let manifest = read_manifest(run_dir)?;
    let bad = |why: String| Error::Refused(format!("{}: {why}", run_dir.display()));
    if manifest.compute_hash() != manifest.hash {
        return Err(bad("manifest hash does not match its contents".into()));
    }
    if let (Some(text), Some(hash)) = (&manifest.spec_text, &manifest.spec_hash) {
        if parse_spec(text)?.hash_hex() != *hash {
            return Err(bad("stored spec does not match its hash".into()));
        }
    }
    for name in &manifest.files {
        let body = std::fs::read_to_string(run_dir.join(name))?;
        let carried = if name.ends_with(".csv") {
            body.lines().next().and_then(|l| l.strip_prefix("# manifest ")).map(str::to_string)
        } else {
            serde_json::from_str::<Value>(&body)?.get("manifest").and_then(Value::as_str).map(str::to_string)
        };
        if carried.as_deref() != Some(manifest.hash.as_str()) {
            return Err(bad(format!("artifact {name} does not carry the manifest hash")));
        }
    }
    Ok(manifest)
}

/// One theory-vs-empirical row of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub measure: Measure,
    pub spec_hash: Option<String>,
    pub run: String,
    pub estimator: EstimatorKind,
    pub theory: Option<f64>,
    pub estimate: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub pointwise_ratio: Option<f64>,
    pub status: Option<VerdictStatus>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub dir: String,
    pub kind: RecipeKind,
    pub hash: String,
    pub spec_hash: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunEntry>,
    pub rows: Vec<ReportRow>,
    pub cross_spec: bool,
}

/// Merges verified runs into one table keyed by `(measure, spec hash)`.
pub fn report(run_dirs: &[PathBuf], cross_spec: bool) -> Result<(Report, String)> {
    if run_dirs.is_empty() {
        return Err(Error::Domain("report needs at least one run".into()));
    }
    let manifests = run_dirs.iter().map(|d| verify_run(d)).collect::<Result<Vec<_>>>()?;
    let hashes: Vec<&str> = manifests.iter().filter_map(|m| m.spec_hash.as_deref()).collect();
    if !cross_spec && hashes.windows(2).any(|w| w[0] != w[1]) {
        let listing: Vec<String> = run_dirs
            .iter()
            .zip(&manifests)
            .map(|(d, m)| format!("{} -> {}", d.display(), m.spec_hash.as_deref().unwrap_or("none")))
            .collect();
        return Err(Error::Refused(format!("runs have different spec hashes: {}", listing.join(", "))));
    }
    let mut rows = Vec::new();
    let mut curves = String::from("measure,spec_hash,run,n,estimate,stderr,lower,upper\n");
    for (dir, m) in run_dirs.iter().zip(&manifests) {
        let run = dir.display().to_string();
        let fitted: Option<FitReport> = match m.kind {
            RecipeKind::Fit => Some(read_artifact(dir, "fit.json")?),
            RecipeKind::ExactTail | RecipeKind::McTail => {
                let curve: TailCurve = read_artifact(dir, "curve.json")?;
                for j in 0..curve.checkpoints.len() {
                    let bound = |b: &Option<Vec<f64>>| b.as_ref().map(|v| v[j].to_string()).unwrap_or_default();
                    let _ = writeln!(
                        curves,
                        "{},{},{run},{},{},{},{},{}",
                        curve.measure.label(),
                        m.spec_hash.as_deref().unwrap_or(""),
                        curve.checkpoints[j],
                        curve.estimate[j],
                        curve.stderr[j],
                        bound(&curve.lower),
                        bound(&curve.upper)
                    );
                }
                Some(fit_curve(&curve, m.spec()?.as_ref(), &Params::default())?)
            }
            _ => None,
        };
        if let Some(f) = fitted {
            rows.push(ReportRow {
                measure: f.measure,
                spec_hash: m.spec_hash.clone(),
                run: run.clone(),
                estimator: f.fit.kind,
                theory: f.theory,
                estimate: f.fit.estimate,
                ci: f.fit.ci,
                pointwise_ratio: f.fit.pointwise_ratio,
                status: f.fit.verdict.map(|v| v.status),
            });
        }
    }
    rows.sort_by(|a, b| (a.measure as u8, &a.spec_hash).cmp(&(b.measure as u8, &b.spec_hash)));
    let runs = run_dirs
        .iter()
        .zip(&manifests)
        .map(|(d, m)| RunEntry { dir: d.display().to_string(), kind: m.kind, hash: m.hash.clone(), spec_hash: m.spec_hash.clone() })
        .collect();
    Ok((Report { runs, rows, cross_spec }, curves))
}

fn report_csv(report: &Report) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("measure,spec_hash,estimator,theory,estimate,ci_lower,ci_upper,pointwise_ratio,status,run\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.measure.label(),
            r.spec_hash.as_deref().unwrap_or(""),
            match r.estimator {
                EstimatorKind::LoglogSlope => "loglog-slope",
                EstimatorKind::DoubleLogRatio => "double-log-ratio",
            },
            opt(r.theory),
            opt(r.estimate),
            opt(r.ci.map(|c| c.0)),
            opt(r.ci.map(|c| c.1)),
            opt(r.pointwise_ratio),
            r.status.map(|s| format!("{s:?}").to_lowercase()).unwrap_or_default(),
            r.run
        );
    }
    out
}

fn report_run(params: &Params) -> Result<Products> {
    let (report, curves) = report(&params.runs, params.cross_spec)?;
    let mut p = Products::new(format!("{} runs, {} table rows\n", report.runs.len(), report.rows.len()));
    let hashes: Vec<&str> = report.runs.iter().filter_map(|r| r.spec_hash.as_deref()).collect();
    if !report.cross_spec && !hashes.is_empty() {
        p.spec_hash = Some(hashes[0].to_string());
    }
    let worst = report.rows.iter().filter_map(|r| r.status).max_by_key(|s| match s {
        VerdictStatus::Pass => 0,
        VerdictStatus::Inconclusive => 1,
        VerdictStatus::Fail => 2,
    });
    p.exit_code = status_code(worst);
    p.csv("report.csv", report_csv(&report));
    p.csv("curves.csv", curves);
    p.json("report.json", &report)?;
    Ok(p)
}
