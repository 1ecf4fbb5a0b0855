//! Job configs, workflow dispatch and result records.
//!
//! A config is plain text with one `key = value` per line (`#` starts a
//! comment). Several pairs may share a line when every comma-separated piece
//! is itself a pair, e.g. `p=2,n=2,alpha=1`.
//!
//! Every run writes `summary.txt` (`key=value`) plus workflow CSVs into the
//! output directory. The summary starts with the version, the workflow and a
//! SHA-256 hash of the canonical config echo, followed by the echo itself
//! (`config.<key>=<value>`), so a summary can always be re-parsed into the
//! config that produced it.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::chart::NormalChart;
use crate::diagnostics::{build_measures, check_atom_inequality, compactness_split_check, detect_atoms, MeasurePair};
use crate::error::{HlsError, Result};
use crate::extremal::{alternating_maximize, euclidean_baseline, random_positive_field, Baseline, SolverConfig};
use crate::grid::{build_grid, QuadratureGrid};
use crate::manifold::{ManifoldKind, ManifoldSpec, Point};
use crate::riesz::{assemble_kernel, critical_exponent, Exponents, RieszKernel};
use crate::transplant::{
    catalog_supremum, default_chart_radius, geometric_lambdas, scaled_pair, sweep_with_baseline, transplant,
    truncate_pair, write_reports_csv, SweepSettings,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workflow {
    Solve,
    Baseline,
    Transplant,
    CcDiagnose,
    SplitCheck,
}

impl Workflow {
    pub const ALL: [Workflow; 5] =
        [Workflow::Solve, Workflow::Baseline, Workflow::Transplant, Workflow::CcDiagnose, Workflow::SplitCheck];

    pub fn name(self) -> &'static str {
        match self {
            Workflow::Solve => "solve",
            Workflow::Baseline => "baseline",
            Workflow::Transplant => "transplant",
            Workflow::CcDiagnose => "cc-diagnose",
            Workflow::SplitCheck => "split-check",
        }
    }
}

impl FromStr for Workflow {
    type Err = HlsError;

    fn from_str(s: &str) -> Result<Self> {
        Workflow::ALL.into_iter().find(|w| w.name() == s.trim()).ok_or_else(|| {
            HlsError::Config(format!(
                "unknown workflow '{s}' (expected solve, baseline, transplant, cc-diagnose or split-check)"
            ))
        })
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Constant,
    Random,
}

const REQUIRED: [&str; 5] = ["manifold", "alpha", "p", "resolution", "workflow"];

const OPTIONAL: [&str; 22] = [
    "radius",
    "periods",
    "n",
    "max_iter",
    "tol",
    "seed",
    "init",
    "out",
    "deterministic",
    "grid",
    "center",
    "delta",
    "lambdas",
    "ball_radius",
    "ball_resolution",
    "solve_manifold",
    "theta",
    "radii",
    "rho",
    "r",
    "levels",
    "threads",
];

/// Keys that say where results go rather than what is computed; they are not
/// part of the echo or the hash.
const NOT_ECHOED: [&str; 2] = ["out", "threads"];

/// A validated job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub manifold: ManifoldSpec,
    pub exponents: Exponents,
    pub resolution: usize,
    pub workflow: Workflow,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub init: Init,
    pub out: Option<PathBuf>,
    pub deterministic: bool,
    /// Node/weight CSV replacing the catalog grid (`solve` only).
    pub grid: Option<PathBuf>,
    pub center: Option<Point>,
    pub delta: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub ball_radius: f64,
    pub ball_resolution: usize,
    pub solve_manifold: bool,
    pub theta: f64,
    pub radii: Option<Vec<f64>>,
    pub rho: Vec<f64>,
    pub r: Option<f64>,
    pub levels: Vec<f64>,
    /// Raw values as given, keyed by name.
    entries: BTreeMap<String, String>,
}

fn split_pairs(line: &str) -> Vec<&str> {
    let pieces: Vec<&str> = line.split(',').collect();
    if pieces.len() > 1 && pieces.iter().all(|p| p.contains('=')) {
        pieces
    } else {
        vec![line]
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| s.trim().parse::<f64>().map_err(|e| format!("'{s}': {e}"))).collect()
}

struct Collector<'a> {
    entries: &'a BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Collector<'_> {
    fn get<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.entries.get(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{key}: cannot parse '{raw}': {e}"));
                None
            }
        }
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let raw = self.entries.get(key)?;
        match parse_list(raw) {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{key}: {e}"));
                None
            }
        }
    }
}

impl JobConfig {
    /// Parses and validates a config, reporting every problem at once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            for piece in split_pairs(line) {
                let Some((key, value)) = piece.split_once('=') else {
                    return Err(HlsError::Parse {
                        line: idx + 1,
                        message: format!("expected key = value, got '{piece}'"),
                    });
                };
                let (key, value) = (key.trim(), value.trim());
                if key.is_empty() {
                    return Err(HlsError::Parse { line: idx + 1, message: "empty key".into() });
                }
                if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
                    errors.push(format!("line {}: unknown key '{key}'", idx + 1));
                    continue;
                }
                if entries.insert(key.to_string(), value.to_string()).is_some() {
                    errors.push(format!("line {}: duplicate key '{key}'", idx + 1));
                }
            }
        }
        for key in REQUIRED {
            if !entries.contains_key(key) {
                errors.push(format!("missing required key '{key}'"));
            }
        }
        let mut c = Collector { entries: &entries, errors };

        let kind: Option<ManifoldKind> = c.get("manifold");
        let alpha: Option<f64> = c.get("alpha");
        let p: Option<f64> = c.get("p");
        let resolution: Option<usize> = c.get("resolution");
        let workflow: Option<Workflow> = c.get("workflow");
        let n_given: Option<usize> = c.get("n");
        let radius: Option<f64> = c.get("radius");
        let periods = c.list("periods");
        let max_iter = c.get("max_iter").unwrap_or(20_000);
        let tol = c.get("tol").unwrap_or(1e-10);
        let seed = c.get("seed").unwrap_or(0);
        let init = match c.entries.get("init").map(String::as_str) {
            None | Some("constant") => Init::Constant,
            Some("random") => Init::Random,
            Some(other) => {
                c.errors.push(format!("init: expected 'constant' or 'random', got '{other}'"));
                Init::Constant
            }
        };
        let out = c.entries.get("out").map(PathBuf::from);
        let deterministic = c.get("deterministic").unwrap_or(false);
        let grid = c.entries.get("grid").map(PathBuf::from);
        let center_list = c.list("center");
        let delta: Option<f64> = c.get("delta");
        let lambdas = c.list("lambdas");
        let ball_radius = c.get("ball_radius").unwrap_or(1.0);
        let ball_resolution = c.get("ball_resolution").unwrap_or(16);
        let solve_manifold = c.get("solve_manifold").unwrap_or(true);
        let theta = c.get("theta").unwrap_or(0.1);
        let radii = c.list("radii");
        let rho = c.list("rho").unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
        let r: Option<f64> = c.get("r");
        let levels = c.list("levels").unwrap_or_else(|| vec![2.0, 4.0, 8.0, 16.0]);
        let _: Option<usize> = c.get("threads");
        let mut errors = c.errors;

        let manifold = kind.and_then(|kind| {
            let scales = if kind.is_flat() && !kind.is_euclidean_ball() && kind != ManifoldKind::Circle {
                if radius.is_some() {
                    errors.push(format!("{kind} takes 'periods', not 'radius'"));
                }
                periods.clone().unwrap_or_else(|| vec![1.0; kind.dimension()])
            } else {
                if periods.is_some() {
                    errors.push(format!("{kind} takes 'radius', not 'periods'"));
                }
                vec![radius.unwrap_or(1.0)]
            };
            match ManifoldSpec::from_kind(kind, &scales) {
                Ok(s) => Some(s),
                Err(e) => {
                    errors.push(e.to_string());
                    None
                }
            }
        });
        let dim = manifold.map(|m| m.dimension()).or(n_given);
        if let (Some(m), Some(n)) = (manifold, n_given) {
            if m.dimension() != n {
                errors.push(format!("n = {n} does not match the dimension {} of {m}", m.dimension()));
            }
        }
        let exponents = match (dim, alpha, p) {
            (Some(n), Some(alpha), Some(p)) => match critical_exponent(n, alpha, p) {
                Ok(e) => Some(e),
                Err(e) => {
                    errors.push(format!("{e} (admissible range: 0 < alpha < n and 1 < p < n/alpha)"));
                    None
                }
            },
            _ => None,
        };
        if let Some(r) = resolution {
            if r < 2 {
                errors.push(format!("resolution must be >= 2, got {r}"));
            }
        }
        if !(tol > 0.0) {
            errors.push(format!("tol must be > 0, got {tol}"));
        }
        if max_iter == 0 {
            errors.push("max_iter must be >= 1".into());
        }
        if !(theta > 0.0 && theta < 1.0) {
            errors.push(format!("theta must lie in (0, 1), got {theta}"));
        }
        let center = center_list.and_then(|v| {
            let m = manifold?;
            if v.len() != m.coord_len() {
                errors.push(format!("center needs {} coordinates for {m}, got {}", m.coord_len(), v.len()));
                return None;
            }
            let mut x = [0.0; 3];
            x[..v.len()].copy_from_slice(&v);
            match m.check_point(&x) {
                Ok(()) => Some(x),
                Err(e) => {
                    errors.push(format!("center: {e}"));
                    None
                }
            }
        });
        if let Some(l) = &lambdas {
            if l.is_empty() || l.iter().any(|v| !(*v > 0.0)) || l.windows(2).any(|w| w[1] >= w[0]) {
                errors.push("lambdas must be positive and strictly decreasing".into());
            }
        }
        if grid.is_some() && workflow != Some(Workflow::Solve) {
            errors.push("'grid' is only supported by the solve workflow".into());
        }
        if workflow == Some(Workflow::Baseline) && !kind.is_some_and(|k| k.is_euclidean_ball()) {
            errors.push("baseline needs a Euclidean ball manifold (ball1, ball2 or ball3)".into());
        }
        if matches!(workflow, Some(Workflow::Transplant | Workflow::CcDiagnose))
            && kind.is_some_and(|k| k.is_euclidean_ball())
        {
            errors.push("transplant and cc-diagnose need a closed manifold (circle, sphere2, torus1 or torus2)".into());
        }

        if !errors.is_empty() {
            return Err(HlsError::Validation(errors));
        }
        Ok(Self {
            manifold: manifold.unwrap(),
            exponents: exponents.unwrap(),
            resolution: resolution.unwrap(),
            workflow: workflow.unwrap(),
            max_iter,
            tol,
            seed,
            init,
            out,
            deterministic,
            grid,
            center,
            delta,
            lambdas,
            ball_radius,
            ball_resolution,
            solve_manifold,
            theta,
            radii,
            rho,
            r,
            levels,
            entries,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HlsError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets (or overrides) a raw key, then re-validates.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut entries = self.entries.clone();
        entries.insert(key.to_string(), value.to_string());
        Self::parse(&entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect::<String>())
    }

    /// `key=value` lines in sorted key order, without output-location keys.
    pub fn canonical_text(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| !NOT_ECHOED.contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn solver(&self) -> Result<SolverConfig> {
        SolverConfig::new(self.exponents, self.max_iter, self.tol, self.seed)
    }

    fn default_center(&self) -> Point {
        let m = &self.manifold;
        match m.kind() {
            ManifoldKind::Sphere2 => [0.0, 0.0, m.radius().unwrap()],
            ManifoldKind::Torus1 | ManifoldKind::Torus2 => {
                let mut x = [0.0; 3];
                for (c, p) in x.iter_mut().zip(m.periods().unwrap()) {
                    *c = 0.5 * p;
                }
                x
            }
            _ => [0.0; 3],
        }
    }

    fn chart_radius(&self) -> f64 {
        self.delta.unwrap_or_else(|| default_chart_radius(&self.manifold))
    }

    fn lambda_grid(&self) -> Vec<f64> {
        self.lambdas.clone().unwrap_or_else(|| geometric_lambdas(2.0 * self.chart_radius() / self.ball_radius, 4))
    }
}

/// Sizes the global thread pool from `HLS_THREADS` (default 1). Results do
/// not depend on the thread count: every reduction runs in a fixed order.
pub fn configure_threads() -> Result<usize> {
    let threads = match std::env::var("HLS_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| HlsError::Config(format!("HLS_THREADS must be a positive integer, got '{v}'")))?,
        Err(_) => 1,
    };
    // A second call keeps the existing pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(threads)
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub version: String,
    pub workflow: Workflow,
    pub config_hash: String,
    pub echo: String,
    pub outputs: Vec<(String, String)>,
    pub files: Vec<PathBuf>,
    pub success: bool,
    pub wall_clock_seconds: Option<f64>,
}

impl ResultRecord {
    pub fn output(&self, key: &str) -> Option<&str> {
        self.outputs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn summary_text(&self) -> String {
        let mut s = format!("version={}\nworkflow={}\nconfig_hash={}\n", self.version, self.workflow, self.config_hash);
        for line in self.echo.lines() {
            s.push_str(&format!("config.{line}\n"));
        }
        for (k, v) in &self.outputs {
            s.push_str(&format!("{k}={v}\n"));
        }
        let names: Vec<String> =
            self.files.iter().map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect();
        s.push_str(&format!("files={}\n", names.join(",")));
        s.push_str(&format!("status={}\n", if self.success { "ok" } else { "failed" }));
        if let Some(t) = self.wall_clock_seconds {
            s.push_str(&format!("wall_clock_seconds={t:.3}\n"));
        }
        s
    }
}

/// Rebuilds the config echoed in a `summary.txt`.
pub fn config_from_summary(summary: &str) -> Result<JobConfig> {
    let text: String = summary.lines().filter_map(|l| l.strip_prefix("config.")).map(|l| format!("{l}\n")).collect();
    JobConfig::parse(&text)
}

/// Reads one `key=value` from a summary.
pub fn summary_value<'a>(summary: &'a str, key: &str) -> Option<&'a str> {
    summary.lines().find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

struct Outputs {
    dir: PathBuf,
    values: Vec<(String, String)>,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn put(&mut self, key: &str, value: impl fmt::Display) {
        self.values.push((key.to_string(), value.to_string()));
    }

    fn file(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        let mut out =
            BufWriter::new(File::create(&path).map_err(|e| HlsError::Io(format!("{}: {e}", path.display())))?);
        write(&mut out)?;
        out.flush()?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs the configured workflow, writing outputs under `out_dir` (falls back
/// to the config's `out`, then `hls-out`).
pub fn run(config: &JobConfig, out_dir: Option<&Path>) -> Result<ResultRecord> {
    let start = Instant::now();
    let dir = out_dir.map(Path::to_path_buf).or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("hls-out"));
    fs::create_dir_all(&dir).map_err(|e| HlsError::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Outputs { dir: dir.clone(), values: Vec::new(), files: Vec::new() };
    let e = config.exponents;
    out.put("q", e.q);
    out.put("t", e.t);
    let success = match config.workflow {
        Workflow::Solve => run_solve(config, &mut out)?,
        Workflow::Baseline => run_baseline(config, &mut out)?,
        Workflow::Transplant => run_transplant(config, &mut out)?,
        Workflow::CcDiagnose => run_cc(config, &mut out)?,
        Workflow::SplitCheck => run_split(config, &mut out)?,
    };
    let record = ResultRecord {
        version: VERSION.to_string(),
        workflow: config.workflow,
        config_hash: config.hash(),
        echo: config.canonical_text(),
        outputs: out.values,
        files: out.files,
        success,
        wall_clock_seconds: if config.deterministic { None } else { Some(start.elapsed().as_secs_f64()) },
    };
    fs::write(dir.join("summary.txt"), record.summary_text())?;
    Ok(record)
}

fn catalog_or_file_grid(config: &JobConfig, out: &mut Outputs) -> Result<QuadratureGrid> {
    match &config.grid {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| HlsError::Io(format!("{}: {e}", path.display())))?;
            out.put("grid_sha256", hex::encode(Sha256::digest(&bytes)));
            QuadratureGrid::read_csv(config.manifold, BufReader::new(&bytes[..]))
        }
        None => build_grid(&config.manifold, config.resolution),
    }
}

fn put_result(out: &mut Outputs, r: &crate::extremal::ExtremalResult) {
    out.put("n_estimate", r.n_estimate);
    out.put("iterations", r.iterations);
    out.put("converged", r.converged);
    out.put("monotone", r.monotone);
    out.put("residual_f", r.residuals.0);
    out.put("residual_g", r.residuals.1);
}

fn write_pair(out: &mut Outputs, grid: &QuadratureGrid, f: &[f64], g: &[f64]) -> Result<()> {
    out.file("extremal.csv", |w| {
        writeln!(w, "node,weight,f,g")?;
        for i in 0..grid.len() {
            writeln!(w, "{i},{},{},{}", grid.weights()[i], f[i], g[i])?;
        }
        Ok(())
    })
}

fn run_solve(config: &JobConfig, out: &mut Outputs) -> Result<bool> {
    let grid = catalog_or_file_grid(config, out)?;
    let kernel = assemble_kernel(&RieszKernel::new(&config.manifold, config.exponents.alpha)?, &grid, None)?;
    let init = match config.init {
        Init::Constant => vec![1.0; grid.len()],
        Init::Random => random_positive_field(grid.len(), config.seed),
    };
    let result = alternating_maximize(&kernel, &grid, &config.solver()?, &init)?;
    out.put("nodes", grid.len());
    out.put("mesh_size", grid.mesh_size());
    put_result(out, &result);
    out.file("history.csv", |w| result.write_history_csv(w))?;
    write_pair(out, &grid, result.f.values(), result.g.values())?;
    Ok(result.converged && result.monotone)
}

fn baseline_of(config: &JobConfig, n: usize, radius: f64, resolution: usize) -> Result<Baseline> {
    euclidean_baseline(n, config.exponents.alpha, config.exponents.p, radius, resolution, config.max_iter, config.tol)
}

fn run_baseline(config: &JobConfig, out: &mut Outputs) -> Result<bool> {
    let m = &config.manifold;
    let b = baseline_of(config, m.dimension(), m.radius().unwrap(), config.resolution)?;
    out.put("nodes", b.grid.len());
    put_result(out, &b.result);
    out.file("history.csv", |w| b.result.write_history_csv(w))?;
    write_pair(out, &b.grid, b.result.f.values(), b.result.g.values())?;
    Ok(b.result.converged && b.result.monotone)
}

fn transplant_baseline(config: &JobConfig, out: &mut Outputs) -> Result<Baseline> {
    let b = baseline_of(config, config.manifold.dimension(), config.ball_radius, config.ball_resolution)?;
    out.put("n_proxy", b.result.n_estimate);
    out.put("baseline_converged", b.result.converged);
    Ok(b)
}

fn run_transplant(config: &JobConfig, out: &mut Outputs) -> Result<bool> {
    let baseline = transplant_baseline(config, out)?;
    let global = build_grid(&config.manifold, config.resolution)?;
    let settings = SweepSettings {
        center: config.center.unwrap_or_else(|| config.default_center()),
        delta: config.chart_radius(),
        lambdas: config.lambda_grid(),
        manifold_solver: config.solve_manifold.then_some((config.max_iter, config.tol)),
    };
    let reports = sweep_with_baseline(&global, &baseline, &settings)?;
    let last = reports.last().expect("nonempty lambda grid");
    out.put("delta", settings.delta);
    out.put("epsilon", last.distortion);
    out.put("rows", reports.len());
    out.put("final_certificate", last.certificate);
    out.put("final_quotient", last.quotient);
    if let Some(sup) = last.manifold_sup {
        out.put("final_manifold_sup", sup);
    }
    out.file("transplant.csv", |w| write_reports_csv(&reports, w))?;
    Ok(baseline.result.converged)
}

fn run_cc(config: &JobConfig, out: &mut Outputs) -> Result<bool> {
    let baseline = transplant_baseline(config, out)?;
    let e = baseline.exponents;
    let spec = config.manifold;
    let global = build_grid(&spec, config.resolution)?;
    let delta = config.chart_radius();
    let chart = NormalChart::new(&spec, config.center.unwrap_or_else(|| config.default_center()), delta)?;
    let riesz = RieszKernel::new(&spec, e.alpha)?;
    let radii = config.radii.clone().unwrap_or_else(|| vec![delta, 0.5 * delta]);

    let mut members: Vec<(QuadratureGrid, MeasurePair)> = Vec::new();
    for &lambda in &config.lambda_grid() {
        let pair = truncate_pair(&scaled_pair(&baseline, lambda)?, delta, &e)?;
        let moved = transplant(&global, &chart, &pair)?;
        let kernel = assemble_kernel(&riesz, &moved.grid, None)?;
        let m = build_measures(&moved.grid, &kernel, moved.u.values(), e.p, e.q)?;
        members.push((moved.grid, m));
    }
    let seq: Vec<(&QuadratureGrid, &MeasurePair)> = members.iter().map(|(g, m)| (g, m)).collect();
    let n_proxy = baseline.result.n_estimate;
    let atoms = detect_atoms(&seq, &radii, config.theta, n_proxy, e.p, e.q)?;
    let (last_grid, last_m) = members.last().expect("nonempty lambda grid");

    let n_manifold = if config.solve_manifold {
        let sup = catalog_supremum(&global, &riesz, &e, chart.center(), delta, config.max_iter, config.tol)?;
        out.put("n_manifold", sup);
        Some(sup)
    } else {
        None
    };
    out.put("atoms", atoms.len());
    out.file("atoms.csv", |w| {
        writeln!(
            w,
            "atom,node,x0,x1,x2,mu,nu,slack_proxy,relative_slack_proxy,slack_manifold,relative_slack_manifold"
        )?;
        for (j, a) in atoms.iter().enumerate() {
            let sp = check_atom_inequality(a, n_proxy, e.p, e.q)?;
            let sm = match n_manifold {
                Some(nm) => {
                    let s = check_atom_inequality(a, nm, e.p, e.q)?;
                    (s.slack.to_string(), s.relative.to_string())
                }
                None => (String::new(), String::new()),
            };
            let x = a.location;
            writeln!(
                w,
                "{j},{},{},{},{},{},{},{},{},{},{}",
                a.node, x[0], x[1], x[2], a.mu, a.nu, sp.slack, sp.relative, sm.0, sm.1
            )?;
        }
        Ok(())
    })?;
    out.file("measures.csv", |w| {
        writeln!(w, "node,mu,nu")?;
        for i in 0..last_grid.len() {
            writeln!(w, "{i},{},{}", last_m.mu[i], last_m.nu[i])?;
        }
        Ok(())
    })?;
    Ok(baseline.result.converged)
}

fn run_split(config: &JobConfig, out: &mut Outputs) -> Result<bool> {
    let spec = config.manifold;
    let e = config.exponents;
    let grid = build_grid(&spec, config.resolution)?;
    let kernel = assemble_kernel(&RieszKernel::new(&spec, e.alpha)?, &grid, None)?;
    // Oscillating surrogate sequence around f ≡ 1 along the first coordinate.
    let extent = match spec.kind() {
        ManifoldKind::Circle => 1.0,
        ManifoldKind::Torus1 | ManifoldKind::Torus2 => spec.periods().unwrap()[0] / (2.0 * std::f64::consts::PI),
        _ => spec.radius().unwrap(),
    };
    let f = vec![1.0; grid.len()];
    let sequence: Vec<Vec<f64>> =
        config.levels.iter().map(|k| grid.nodes().iter().map(|x| 1.0 + (k * x[0] / extent).cos()).collect()).collect();
    let table = compactness_split_check(&kernel, &grid, &sequence, &f, &config.rho, e.p, config.r.unwrap_or(e.p))?;
    out.put("s", table.s);
    out.put("slope", table.slope);
    out.put("expected_slope", table.expected_slope);
    out.file("split.csv", |w| table.write_csv(w))?;
    out.file("tails.csv", |w| {
        writeln!(w, "rho,tail_norm")?;
        for (r, t) in &table.tails {
            writeln!(w, "{r},{t}")?;
        }
        Ok(())
    })?;
    Ok(true)
}
