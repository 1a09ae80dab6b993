//! Command-line surface: configuration files, the Ξ sample cache, command
//! dispatch and CSV/JSON output. Field names and column orders are frozen in
//! `docs/output-schema.md`.

use crate::digest::digest;
use crate::energy::{build_frequency_grid, energy_from_curve, relative_energy_on, EnergyResult, FrequencyQuadrature};
use crate::error::CasimirError;
use crate::exact1d::{boundary_kernel_exact_1d, energy_exact_1d, force_exact_1d, xi_exact_1d, Interval1DConfig};
use crate::geometry::{apply_motion, min_gap, Configuration, Obstacle, Point, RigidMotion};
use crate::oracle_pw::{energy_pw, xi_pw, TwoDiscSpec, DEFAULT_MODES};
use crate::spectral::{config_hash, xi, XiCurve};
use crate::stressforce::{
    default_offsets, force_boundary_hadamard, force_fd_with, force_surface, proximity_threshold, t_rel_many, BoundaryLimit, ForceResult,
    DEFAULT_N_SIGMA,
};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;
/// Overrides the cache directory.
pub const CACHE_ENV: &str = "CASIMIR_CACHE_DIR";
pub const DEFAULT_N: usize = 128;
pub const DEFAULT_TOL: f64 = 1e-10;
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Numerical(#[from] CasimirError),
    #[error("{0}")]
    Io(String),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    /// 2 input/schema, 3 geometry, 4 numerical, 5 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Io(_) => 2,
            CliError::Validation(_) => 5,
            CliError::Numerical(e) => match e.root() {
                CasimirError::Geometry(_)
                | CasimirError::Overlap { .. }
                | CasimirError::DegenerateCurve { .. }
                | CasimirError::DimensionMismatch { .. }
                | CasimirError::Proximity { .. } => 3,
                CasimirError::InvalidParameter(_) => 2,
                _ => 4,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub n_per_obstacle: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema_version: u32,
    dimension: usize,
    #[serde(default)]
    mass: f64,
    obstacles: Vec<Obstacle>,
    #[serde(default)]
    numerics: Numerics,
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Configuration,
    pub numerics: Numerics,
}

/// Read a TOML (default) or JSON (`.json`) configuration file.
pub fn parse_config(path: &Path) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_config_str(&text, json).map_err(|e| match e {
        CliError::Schema(m) => CliError::Schema(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn parse_config_str(text: &str, json: bool) -> CliResult<LoadedConfig> {
    let version = if json {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        v.get("schema_version").cloned().map(|x| x.as_u64())
    } else {
        let v: toml::Table = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        v.get("schema_version").map(|x| x.as_integer().and_then(|i| u64::try_from(i).ok()))
    };
    match version {
        None => return Err(CliError::Schema("missing field `schema_version`".into())),
        Some(Some(v)) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(CliError::Schema(format!(
                "unsupported schema_version {}; this build reads version {SCHEMA_VERSION}",
                v.map_or("(not an integer)".to_string(), |x| x.to_string())
            )))
        }
    }
    let file: ConfigFile = if json {
        serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?
    } else {
        toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?
    };
    let config = Configuration::new(file.dimension, file.mass, file.obstacles)?;
    Ok(LoadedConfig {
        config,
        numerics: file.numerics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCacheEntry {
    pub digest: String,
    pub kappa: f64,
    /// Bit pattern of κ; lookups compare this, not the decimal form.
    pub kappa_bits: u64,
    pub xi: f64,
    pub n_per_obstacle: usize,
    pub version: String,
}

/// Append-only Ξ cache, one JSON-lines file per configuration digest.
pub struct XiCache {
    dir: Option<PathBuf>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl XiCache {
    pub fn disabled() -> Self {
        XiCache {
            dir: None,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn at(dir: PathBuf) -> Self {
        XiCache {
            dir: Some(dir),
            ..XiCache::disabled()
        }
    }

    /// `$CASIMIR_CACHE_DIR`, else `$XDG_CACHE_HOME/casimir`, else `~/.cache/casimir`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("XDG_CACHE_HOME").map(|d| PathBuf::from(d).join("casimir")))
            .or_else(|| std::env::var_os("HOME").map(|d| PathBuf::from(d).join(".cache").join("casimir")));
        match dir {
            Some(d) => XiCache::at(d),
            None => XiCache::disabled(),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn file(&self, digest: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{digest}.jsonl")))
    }

    /// Entries for `digest` and `n`, keyed by κ bits. A file with unreadable
    /// lines is rewritten from its valid entries.
    fn load(&self, digest: &str, n: usize) -> HashMap<u64, f64> {
        let mut out = HashMap::new();
        let Some(path) = self.file(digest) else { return out };
        let Ok(text) = std::fs::read_to_string(&path) else { return out };
        let mut good = Vec::new();
        let mut corrupt = 0;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<XiCacheEntry>(line) {
                Ok(e) if e.digest == digest && f64::from_bits(e.kappa_bits).to_bits() == e.kappa_bits => {
                    if e.n_per_obstacle == n && e.version == VERSION {
                        out.insert(e.kappa_bits, e.xi);
                    }
                    good.push(line.to_string());
                }
                _ => corrupt += 1,
            }
        }
        if corrupt > 0 {
            log::warn!("Ξ cache {} had {corrupt} corrupt entries; rebuilding it", path.display());
            let body: String = good.iter().map(|l| format!("{l}\n")).collect();
            if let Err(e) = std::fs::write(&path, body) {
                log::warn!("could not rebuild {}: {e}", path.display());
            }
        }
        out
    }

    fn append(&self, entries: &[XiCacheEntry]) {
        let Some(first) = entries.first() else { return };
        let Some(path) = self.file(&first.digest) else { return };
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(path.parent().unwrap())?;
            let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path)?;
            let mut buf = String::new();
            for e in entries {
                buf.push_str(&serde_json::to_string(e).expect("cache entry serializes"));
                buf.push('\n');
            }
            f.write_all(buf.as_bytes())
        };
        if let Err(e) = write() {
            log::warn!("could not write Ξ cache {}: {e}", path.display());
        }
    }

    /// Ξ at each κ, reading the cache first and appending what was computed.
    pub fn xi_curve(&self, config: &Configuration, kappas: &[f64], n: usize) -> crate::Result<XiCurve> {
        let hash = config_hash(config, n);
        let known = self.load(&hash, n);
        let values = kappas
            .par_iter()
            .map(|&k| match known.get(&k.to_bits()) {
                Some(v) => Ok((*v, false)),
                None => xi(config, k, n).map(|v| (v, true)).map_err(|e| e.at_kappa(k)),
            })
            .collect::<crate::Result<Vec<_>>>()?;
        // single writer, fixed κ order
        let fresh: Vec<XiCacheEntry> = kappas
            .iter()
            .zip(&values)
            .filter(|(_, (_, f))| *f)
            .map(|(&k, &(v, _))| XiCacheEntry {
                digest: hash.clone(),
                kappa: k,
                kappa_bits: k.to_bits(),
                xi: v,
                n_per_obstacle: n,
                version: VERSION.to_string(),
            })
            .collect();
        self.misses.fetch_add(fresh.len(), Ordering::Relaxed);
        self.hits.fetch_add(kappas.len() - fresh.len(), Ordering::Relaxed);
        self.append(&fresh);
        Ok(XiCurve {
            kappa_nodes: kappas.to_vec(),
            xi_values: values.into_iter().map(|v| v.0).collect(),
            config_hash: hash,
            n_per_obstacle: n,
        })
    }

    pub fn energy_on(&self, config: &Configuration, n: usize, grid: &FrequencyQuadrature, tol: f64) -> crate::Result<EnergyResult> {
        if config.len() < 2 {
            return relative_energy_on(config, n, grid, tol);
        }
        let curve = self.xi_curve(config, &grid.kappa_nodes(), n)?;
        energy_from_curve(grid, curve, tol)
    }

    pub fn energy(&self, config: &Configuration, n: usize, tol: f64) -> crate::Result<EnergyResult> {
        config.validate()?;
        let grid = build_frequency_grid(config.mass, min_gap(config), config.dimension, tol)?;
        self.energy_on(config, n, &grid, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub elapsed_seconds: f64,
    pub threads: usize,
    pub cache_hits: usize,
    pub cache_misses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub digest: String,
    pub command: String,
    pub overrides: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub runtime: Runtime,
}

#[derive(Debug, Parser)]
#[command(name = "casimir", version, about = "Relative Casimir energies, stress tensors and forces between obstacles")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Skip the Ξ cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Configuration file (TOML, or JSON with a .json extension).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Nodes per obstacle (d = 2); overrides the file.
    #[arg(long)]
    pub n: Option<usize>,
    /// Absolute tolerance of the frequency integral; overrides the file.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the result here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Fd,
    Surface,
    Hadamard,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    #[value(name = "1d")]
    OneD,
    Pw,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ξ(iκ) as CSV (kappa,xi); κ defaults to the energy quadrature nodes.
    Xi {
        #[command(flatten)]
        common: Common,
        /// Comma list or a:b:count (linear, inclusive).
        #[arg(long)]
        kappa: Option<String>,
    },
    /// Relative energy as JSON.
    Energy {
        #[command(flatten)]
        common: Common,
    },
    /// Force on one obstacle as JSON.
    Force {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        obstacle: usize,
        #[arg(long, value_enum, default_value_t = RouteArg::All)]
        route: RouteArg,
        /// Finite-difference step (default 1e-3 of the smallest gap).
        #[arg(long)]
        step: Option<f64>,
        /// Quadrature points on the circle Σ (d = 2).
        #[arg(long, default_value_t = DEFAULT_N_SIGMA)]
        n_sigma: usize,
        /// Boundary limit through outward offsets instead of the jump relation.
        #[arg(long)]
        offsets: bool,
    },
    /// Energy with one obstacle translated along a direction, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        obstacle: usize,
        /// dx,dy
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
        /// Displacements: comma list or a:b:count.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Relative stress tensor on a grid of points, as CSV.
    TensorField {
        #[command(flatten)]
        common: Common,
        /// a:b:count or comma list.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// a:b:count or comma list (d = 2; defaults to 0).
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
    },
    /// Check the pipeline against the exact 1D results and the partial-wave oracle.
    Validate {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Same as --suite pw.
        #[arg(long)]
        oracle: Option<String>,
        /// Optional fixture: two intervals for 1d, two circles for pw.
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
    },
}

/// Values from `a:b:count` (inclusive) or `v1,v2,...`.
pub fn parse_values(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Schema(format!("cannot parse value list `{s}`; expected a:b:count or a comma list"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return match n {
            0 => Err(bad()),
            1 => Ok(vec![a]),
            _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
        };
    }
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
}

fn parse_direction(s: &str) -> CliResult<Point> {
    let v = parse_values(s)?;
    match v.as_slice() {
        [x] => Ok([*x, 0.0]),
        [x, y] => Ok([*x, *y]),
        _ => Err(CliError::Schema(format!("direction `{s}` must be dx or dx,dy"))),
    }
}

struct Ctx {
    cache: XiCache,
    start: Instant,
}

impl Ctx {
    fn runtime(&self) -> Runtime {
        Runtime {
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            cache_hits: self.cache.hits(),
            cache_misses: self.cache.misses(),
        }
    }
}

struct Resolved {
    config: Configuration,
    n: usize,
    tol: f64,
    overrides: BTreeMap<String, String>,
}

fn resolve(common: &Common) -> CliResult<Resolved> {
    let loaded = parse_config(&common.config)?;
    let mut overrides = BTreeMap::new();
    if let Some(n) = common.n {
        overrides.insert("n".into(), n.to_string());
    }
    if let Some(t) = common.tol {
        overrides.insert("tol".into(), format!("{t:e}"));
    }
    let n = common.n.or(loaded.numerics.n_per_obstacle).unwrap_or(DEFAULT_N);
    let tol = common.tol.or(loaded.numerics.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(CliError::Schema(format!("tol must be positive, got {tol}")));
    }
    Ok(Resolved {
        config: loaded.config,
        n,
        tol,
        overrides,
    })
}

fn run_digest(r: &Resolved, extra: serde_json::Value) -> String {
    digest(&serde_json::json!({
        "config": r.config,
        "n_per_obstacle": r.n,
        "tol": r.tol,
        "extra": extra,
    }))
}

fn emit(output: &Option<PathBuf>, body: &str, manifest: &RunManifest) -> CliResult<String> {
    match output {
        Some(p) => {
            std::fs::write(p, body).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let mpath = PathBuf::from(format!("{}.manifest.json", p.display()));
            let mut m = manifest.clone();
            m.outputs = vec![p.display().to_string(), mpath.display().to_string()];
            let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
            std::fs::write(&mpath, &text).map_err(|e| CliError::Io(format!("{}: {e}", mpath.display())))?;
            Ok(text)
        }
        None => Ok(body.to_string()),
    }
}

fn json_doc(command: &str, r: &Resolved, digest: &str, result: serde_json::Value, ctx: &Ctx, outputs: Vec<String>) -> (serde_json::Value, RunManifest) {
    let manifest = RunManifest {
        digest: digest.to_string(),
        command: command.to_string(),
        overrides: r.overrides.clone(),
        outputs,
        runtime: ctx.runtime(),
    };
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "digest": digest,
        "config": r.config,
        "params": { "n_per_obstacle": r.n, "tol": r.tol },
        "result": result,
        "overrides": manifest.overrides,
        "runtime": manifest.runtime,
    });
    (doc, manifest)
}

fn energy_json(e: &EnergyResult) -> serde_json::Value {
    serde_json::json!({
        "value": e.value,
        "abs_error_estimate": e.abs_error_estimate,
        "quadrature_error": e.quadrature_error,
        "endpoint_contribution": e.endpoint_contribution,
        "endpoint_error": e.endpoint_error,
        "tail_bound": e.tail_bound,
        "xi_config_hash": e.xi_curve.config_hash,
        "params": e.params,
    })
}

/// Relative discrepancy |a - b| / max(|a|, |b|) of two force vectors.
pub fn force_discrepancy(a: Point, b: Point) -> f64 {
    let d = (a[0] - b[0]).hypot(a[1] - b[1]);
    let s = a[0].hypot(a[1]).max(b[0].hypot(b[1]));
    if s == 0.0 {
        d
    } else {
        d / s
    }
}

/// Agreement thresholds of `force --route all`.
pub const FD_SURFACE_TOL: f64 = 1e-4;
pub const HADAMARD_SURFACE_TOL: f64 = 1e-3;

fn fd_vector(ctx: &Ctx, r: &Resolved, j: usize, step: Option<f64>) -> crate::Result<ForceResult> {
    let energy = |c: &Configuration, g: &FrequencyQuadrature| ctx.cache.energy_on(c, r.n, g, r.tol).map(|e| e.value);
    let mut res = force_fd_with(&r.config, j, [1.0, 0.0], step, r.n, r.tol, energy)?;
    if r.config.dimension == 2 {
        let y = force_fd_with(&r.config, j, [0.0, 1.0], step, r.n, r.tol, energy)?;
        res.force[1] = y.force[1];
        res.error_estimate = res.error_estimate.hypot(y.error_estimate);
    }
    Ok(res)
}

/// Run one parsed invocation; returns what goes to stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Schema("--threads must be at least 1".into()));
        }
        // only the first call in a process can size the global pool
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::debug!("worker pool already initialised: {e}");
        }
    }
    let ctx = Ctx {
        cache: if cli.no_cache { XiCache::disabled() } else { XiCache::from_env() },
        start: Instant::now(),
    };
    match cli.command {
        Command::Xi { common, kappa } => {
            let r = resolve(&common)?;
            let kappas = match kappa {
                Some(s) => parse_values(&s)?,
                None => build_frequency_grid(r.config.mass, min_gap(&r.config), r.config.dimension, r.tol)?.kappa_nodes(),
            };
            let curve = ctx.cache.xi_curve(&r.config, &kappas, r.n)?;
            let d = run_digest(&r, serde_json::json!({ "kappa": kappas }));
            let (_, m) = json_doc("xi", &r, &d, serde_json::Value::Null, &ctx, vec![]);
            emit(&common.output, &curve.to_csv(), &m)
        }
        Command::Energy { common } => {
            let r = resolve(&common)?;
            let e = ctx.cache.energy(&r.config, r.n, r.tol)?;
            let d = run_digest(&r, serde_json::Value::Null);
            let (doc, m) = json_doc("energy", &r, &d, energy_json(&e), &ctx, vec![]);
            emit(&common.output, &serde_json::to_string_pretty(&doc).unwrap(), &m)
        }
        Command::Force {
            common,
            obstacle,
            route,
            step,
            n_sigma,
            offsets,
        } => {
            let r = resolve(&common)?;
            let limit = if offsets {
                BoundaryLimit::Offsets(default_offsets(&r.config))
            } else {
                BoundaryLimit::Jump
            };
            let want = |x: RouteArg| route == x || route == RouteArg::All;
            let mut results = Vec::new();
            if want(RouteArg::Fd) {
                results.push(fd_vector(&ctx, &r, obstacle, step)?);
            }
            if want(RouteArg::Surface) {
                let ns = if r.config.dimension == 1 { 2 } else { n_sigma };
                results.push(force_surface(&r.config, obstacle, None, ns, r.n, r.tol)?);
            }
            if want(RouteArg::Hadamard) {
                results.push(force_boundary_hadamard(&r.config, obstacle, limit.clone(), r.n, r.tol)?);
            }
            let mut result = serde_json::json!({ "obstacle_index": obstacle, "routes": results });
            if route == RouteArg::All {
                let fd_s = force_discrepancy(results[0].force, results[1].force);
                let h_s = force_discrepancy(results[2].force, results[1].force);
                result["agreement"] = serde_json::json!({
                    "fd_vs_surface": fd_s,
                    "fd_vs_surface_tol": FD_SURFACE_TOL,
                    "hadamard_vs_surface": h_s,
                    "hadamard_vs_surface_tol": HADAMARD_SURFACE_TOL,
                    "pass": fd_s <= FD_SURFACE_TOL && h_s <= HADAMARD_SURFACE_TOL,
                });
            }
            let d = run_digest(&r, serde_json::json!({ "obstacle": obstacle, "step": step, "n_sigma": n_sigma, "offsets": offsets }));
            let (doc, m) = json_doc("force", &r, &d, result, &ctx, vec![]);
            emit(&common.output, &serde_json::to_string_pretty(&doc).unwrap(), &m)
        }
        Command::Sweep {
            common,
            obstacle,
            direction,
            grid,
        } => {
            let r = resolve(&common)?;
            let dir = parse_direction(&direction)?;
            let shifts = parse_values(&grid)?;
            if obstacle >= r.config.len() {
                return Err(CasimirError::InvalidParameter(format!("no obstacle {obstacle}")).into());
            }
            let mut csv = String::from("s,energy,abs_error_estimate\n");
            for &s in &shifts {
                let c = apply_motion(
                    &r.config,
                    RigidMotion {
                        obstacle_index: obstacle,
                        translation: [s * dir[0], s * dir[1]],
                    },
                )?;
                let e = ctx.cache.energy(&c, r.n, r.tol)?;
                writeln!(csv, "{s:.17e},{:.17e},{:.17e}", e.value, e.abs_error_estimate).unwrap();
            }
            let d = run_digest(&r, serde_json::json!({ "obstacle": obstacle, "direction": dir, "grid": shifts }));
            let (_, m) = json_doc("sweep", &r, &d, serde_json::Value::Null, &ctx, vec![]);
            emit(&common.output, &csv, &m)
        }
        Command::TensorField { common, x, y } => {
            let r = resolve(&common)?;
            let xs = parse_values(&x)?;
            let ys = match (&y, r.config.dimension) {
                (Some(s), 2) => parse_values(s)?,
                (Some(_), _) => return Err(CliError::Schema("--y applies to d = 2 only".into())),
                (None, _) => vec![0.0],
            };
            let pts: Vec<Point> = ys.iter().flat_map(|&yv| xs.iter().map(move |&xv| [xv, yv])).collect();
            let thr = proximity_threshold(&r.config, r.n)?;
            let ok: Vec<bool> = pts.iter().map(|&p| r.config.boundary_distance(p) > thr).collect();
            let good: Vec<Point> = pts.iter().zip(&ok).filter(|(_, k)| **k).map(|(p, _)| *p).collect();
            let tens = t_rel_many(&r.config, &good, r.n, r.tol)?;
            let mut it = tens.iter();
            let mut csv = String::from("x,y,t00,t11,t12,t22,half_h_rel\n");
            for (p, k) in pts.iter().zip(&ok) {
                if *k {
                    let t = it.next().unwrap();
                    writeln!(
                        csv,
                        "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                        p[0], p[1], t.t00, t.tij[0][0], t.tij[0][1], t.tij[1][1], t.half_h_rel
                    )
                    .unwrap();
                } else {
                    writeln!(csv, "{:.17e},{:.17e},nan,nan,nan,nan,nan", p[0], p[1]).unwrap();
                }
            }
            let d = run_digest(&r, serde_json::json!({ "x": xs, "y": ys }));
            let (_, m) = json_doc("tensor-field", &r, &d, serde_json::Value::Null, &ctx, vec![]);
            emit(&common.output, &csv, &m)
        }
        Command::Validate { suite, oracle, config, n } => {
            let suite = match oracle.as_deref() {
                None => suite,
                Some("pw") => Suite::Pw,
                Some(o) => return Err(CliError::Schema(format!("unknown oracle `{o}`; available: pw"))),
            };
            let fixture = config.as_deref().map(parse_config).transpose()?;
            let mut rows = Vec::new();
            if matches!(suite, Suite::OneD | Suite::All) {
                rows.extend(validate_1d(&ctx, fixture.as_ref())?);
            }
            if matches!(suite, Suite::Pw | Suite::All) {
                rows.extend(validate_pw(&ctx, fixture.as_ref(), n.unwrap_or(DEFAULT_N))?);
            }
            let table = format_table(&rows);
            let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
            if failed.is_empty() {
                Ok(table)
            } else {
                print!("{table}");
                Err(CliError::Validation(failed.join(", ")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    /// "abs" or "rel".
    pub kind: &'static str,
    pub pass: bool,
}

fn row(check: impl Into<String>, expected: f64, actual: f64, tolerance: f64, relative: bool) -> CheckRow {
    let err = if relative {
        (actual - expected).abs() / expected.abs()
    } else {
        (actual - expected).abs()
    };
    CheckRow {
        check: check.into(),
        expected,
        actual,
        tolerance,
        kind: if relative { "rel" } else { "abs" },
        pass: err <= tolerance,
    }
}

pub fn format_table(rows: &[CheckRow]) -> String {
    let mut s = format!("{:<28} {:>24} {:>24} {:>9} {:>4}  status\n", "check", "expected", "actual", "tolerance", "kind");
    for r in rows {
        writeln!(
            s,
            "{:<28} {:>24.15e} {:>24.15e} {:>9.0e} {:>4}  {}",
            r.check,
            r.expected,
            r.actual,
            r.tolerance,
            r.kind,
            if r.pass { "PASS" } else { "FAIL" }
        )
        .unwrap();
    }
    s
}

fn validate_1d(ctx: &Ctx, fixture: Option<&LoadedConfig>) -> CliResult<Vec<CheckRow>> {
    let config = match fixture {
        Some(l) if l.config.dimension == 1 && l.config.len() == 2 => l.config.clone(),
        _ => Configuration::two_intervals(0.0, 1.0, 2.0, 3.0)?,
    };
    let ic = Interval1DConfig::from_configuration(&config)?;
    let mut rows = Vec::new();
    for k in [0.1, 1.0, 5.0] {
        rows.push(row(format!("1d xi(kappa={k})"), xi_exact_1d(&ic, k), xi(&config, k, 0)?, 1e-13, false));
    }
    let e = ctx.cache.energy(&config, 0, DEFAULT_TOL)?;
    rows.push(row("1d energy", energy_exact_1d(&ic), e.value, 1e-8, false));
    let r = Resolved {
        config: config.clone(),
        n: 0,
        tol: DEFAULT_TOL,
        overrides: BTreeMap::new(),
    };
    let f = fd_vector(ctx, &r, 1, None)?;
    rows.push(row("1d force fd", force_exact_1d(&ic), f.force[0], 1e-6, true));
    let h = force_boundary_hadamard(&config, 1, BoundaryLimit::Jump, 0, DEFAULT_TOL)?;
    let bv = h.boundary_values.as_ref().map_or(f64::NAN, |v| v[0].1);
    rows.push(row("1d boundary kernel", boundary_kernel_exact_1d(&ic), bv, 1e-4, true));
    rows.push(row("1d force hadamard", force_exact_1d(&ic), h.force[0], 1e-6, true));
    Ok(rows)
}

fn validate_pw(ctx: &Ctx, fixture: Option<&LoadedConfig>, n: usize) -> CliResult<Vec<CheckRow>> {
    let (config, spec) = match fixture.map(|l| (&l.config, l.config.obstacles.as_slice())) {
        Some((c, [Obstacle::Circle { center: c1, radius: r1 }, Obstacle::Circle { center: c2, radius: r2 }])) => {
            let d = (c2[0] - c1[0]).hypot(c2[1] - c1[1]);
            (c.clone(), TwoDiscSpec::new(*r1, *r2, d, DEFAULT_MODES)?)
        }
        _ => (Configuration::two_discs(1.0, 1.0, 3.0)?, TwoDiscSpec::new(1.0, 1.0, 3.0, DEFAULT_MODES)?),
    };
    let mut rows = Vec::new();
    for k in [0.5, 1.0, 2.0, 5.0] {
        let p = xi_pw(&spec, k)?;
        rows.push(row(format!("pw xi(kappa={k})"), p.value, xi(&config, k, n)?, 1e-8, false));
    }
    let ep = energy_pw(&spec, config.mass, DEFAULT_TOL)?;
    let en = ctx.cache.energy(&config, n, DEFAULT_TOL)?;
    rows.push(row("pw energy", ep.value, en.value, 1e-6, true));
    Ok(rows)
}
