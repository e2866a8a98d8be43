use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_rational::Ratio;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use probe_tomo::family::{LatticeSpec, ParamVector, PARAM_NAMES};
use probe_tomo::learn::{probe_learn, sweep, sweep_instance, CenterSpec, LearnConfig, SweepPlan, SweepRow, SCHEMA_VERSION};
use probe_tomo::pauli::Rational;
use probe_tomo::polysys::{canonical_lattice, canonical_system, PolynomialSystem, SYSTEM_NAMES};
use probe_tomo::sim::{ExperimentSpec, ProbeInterface, SimulatedProbe};
use probe_tomo::solve::{certify_fiber, find_root_system, CertifyConfig, SearchConfig, Strategy};

#[derive(Parser)]
#[command(name = "probe-tomo", version, about = "Hamiltonian learning from single-site thermal probes")]
struct Cli {
    /// Progress messages on stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the canonical polynomial system and write it as text.
    Derive {
        #[arg(long)]
        dimension: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run experiments on the dense simulator.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count the complex fiber of a system through a rational point.
    Certify {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve P(x) = c for a 13-value right-hand side.
    Findroot {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn parameters from a simulated probe.
    Learn {
        #[arg(long)]
        lattice: PathBuf,
        /// `file:<path>`, `<path>`, or `smoothed:<center>,<sigma>,<seed>` where
        /// `<center>` is a half-width for a uniform random center or a path.
        #[arg(long = "lambda-source")]
        lambda_source: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a learning sweep; rows already present in `--out` are kept.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
struct CliError {
    kind: String,
    message: String,
    pointer: Option<String>,
    file: Option<PathBuf>,
}

impl CliError {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            kind: kind.to_string(),
            message: message.into(),
            pointer: None,
            file: None,
        }
    }

    fn in_file(mut self, file: &Path) -> Self {
        self.file = Some(file.to_path_buf());
        self
    }

    fn to_json(&self) -> Value {
        json!({
            "error": self.kind,
            "message": self.message,
            "pointer": self.pointer,
            "file": self.file.as_ref().map(|p| p.display().to_string()),
        })
    }
}

impl From<probe_tomo::Error> for CliError {
    fn from(e: probe_tomo::Error) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    config_digest: String,
    seed: Option<u64>,
    versions: Value,
    wall_clock_seconds: f64,
    outputs: Vec<String>,
}

/// Inputs hashed into the manifest digest.
struct Run {
    name: &'static str,
    hasher: Sha256,
    seed: Option<u64>,
    outputs: Vec<String>,
    verbose: bool,
}

impl Run {
    fn new(name: &'static str, verbose: bool) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(name.as_bytes());
        Run {
            name,
            hasher,
            seed: None,
            outputs: Vec::new(),
            verbose,
        }
    }

    fn note(&mut self, key: &str, value: &str) {
        self.hasher.update([0u8]);
        self.hasher.update(key.as_bytes());
        self.hasher.update([0u8]);
        self.hasher.update(value.as_bytes());
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        let text = fs::read_to_string(path).map_err(|e| CliError::new("io", e.to_string()).in_file(path))?;
        self.note(&path.display().to_string(), &text);
        Ok(text)
    }

    fn json<T: DeserializeOwned>(&mut self, path: &Path) -> CliResult<T> {
        let text = self.read(path)?;
        parse_json(&text).map_err(|e| e.in_file(path))
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("[{}] {msg}", self.name);
        }
    }

    fn emit(&mut self, out: Option<&Path>, body: &str) -> CliResult<()> {
        match out {
            Some(p) => {
                fs::write(p, body).map_err(|e| CliError::new("io", e.to_string()).in_file(p))?;
                self.outputs.push(p.display().to_string());
            }
            None => print!("{body}"),
        }
        Ok(())
    }

    fn finish(self, start: Instant, manifest_at: Option<&Path>) -> CliResult<()> {
        let m = RunManifest {
            subcommand: self.name.to_string(),
            config_digest: hex::encode(self.hasher.finalize()),
            seed: self.seed,
            versions: json!({
                "probe_tomo": env!("CARGO_PKG_VERSION"),
                "report_schema": SCHEMA_VERSION,
            }),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        match manifest_at {
            Some(p) => {
                let path = manifest_path(p);
                fs::write(&path, text + "\n").map_err(|e| CliError::new("io", e.to_string()).in_file(&path))
            }
            None => {
                eprintln!("{text}");
                Ok(())
            }
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Deserialize with the failing location reported as a JSON pointer.
fn parse_json<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = json_pointer(e.path());
        let mut err = CliError::new("config", e.inner().to_string());
        err.pointer = Some(pointer);
        err
    })
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn parse_rational(v: &Value) -> Option<Rational> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                return Some(Rational::from_integer(i as i128));
            }
            let f = n.as_f64()?;
            Ratio::<i128>::approximate_float(f).filter(|r| *r.numer() as f64 / *r.denom() as f64 == f)
        }
        Value::String(s) => {
            let (n, d) = s.split_once('/').unwrap_or((s.as_str(), "1"));
            let (n, d): (i128, i128) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
            (d != 0).then(|| Rational::new(n, d))
        }
        _ => None,
    }
}

/// Point as `{"h1": .., .., "J33": ..}` with numbers or `"p/q"` strings.
fn parse_point(v: &Value) -> CliResult<Vec<Rational>> {
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::new("config", "point must be a JSON object keyed h1..J33"))?;
    for key in obj.keys() {
        if !PARAM_NAMES.contains(&key.as_str()) {
            let mut e = CliError::new("config", format!("unknown parameter `{key}`"));
            e.pointer = Some(format!("/{key}"));
            return Err(e);
        }
    }
    PARAM_NAMES
        .iter()
        .map(|&name| {
            let mut e = CliError::new("config", format!("`{name}` must be a number or a \"p/q\" string"));
            e.pointer = Some(format!("/{name}"));
            obj.get(name).and_then(parse_rational).ok_or(e)
        })
        .collect()
}

/// Right-hand side as a 13-array or an object keyed q, p1..p12.
fn parse_rhs(v: &Value) -> CliResult<Vec<f64>> {
    let bad = |ptr: String, msg: &str| {
        let mut e = CliError::new("config", msg);
        e.pointer = Some(ptr);
        e
    };
    match v {
        Value::Array(a) => {
            if a.len() != SYSTEM_NAMES.len() {
                return Err(bad(String::new(), "right-hand side needs 13 values"));
            }
            a.iter()
                .enumerate()
                .map(|(i, x)| x.as_f64().ok_or_else(|| bad(format!("/{i}"), "expected a number")))
                .collect()
        }
        Value::Object(o) => SYSTEM_NAMES
            .iter()
            .map(|&n| o.get(n).and_then(Value::as_f64).ok_or_else(|| bad(format!("/{n}"), "missing or non-numeric value")))
            .collect(),
        _ => Err(bad(String::new(), "right-hand side must be an array or object")),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    lattice: LatticeSpec,
    lambda: ParamVector,
    experiments: Vec<ExperimentSpec>,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct SimulateRow {
    spec: ExperimentSpec,
    estimate: f64,
    shots_used: u64,
}

fn cmd_derive(run: &mut Run, dimension: usize, out: Option<&Path>) -> CliResult<()> {
    run.note("dimension", &dimension.to_string());
    let lattice = canonical_lattice(dimension)?;
    run.log(&format!("deriving on radius {} ({} sites)", lattice.radius, lattice.num_sites()));
    let sys = canonical_system(dimension)?;
    run.emit(out, &sys.to_text())
}

fn cmd_simulate(run: &mut Run, config: &Path, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let cfg: SimulateConfig = run.json(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    run.seed = Some(seed);
    let probe = SimulatedProbe::from_params(&cfg.lattice, &cfg.lambda, seed)?.without_log();
    let mut rows = Vec::with_capacity(cfg.experiments.len());
    for (i, spec) in cfg.experiments.iter().enumerate() {
        let before = probe.shots_used();
        let estimate = probe.measure(spec).map_err(|e| {
            let mut err = CliError::from(e).in_file(config);
            err.pointer = Some(format!("/experiments/{i}"));
            err
        })?;
        rows.push(SimulateRow {
            spec: *spec,
            estimate,
            shots_used: probe.shots_used() - before,
        });
    }
    run.log(&format!("{} experiments", rows.len()));
    run.emit(out, &to_json(&rows))
}

fn read_system(run: &mut Run, path: &Path) -> CliResult<PolynomialSystem> {
    let text = run.read(path)?;
    PolynomialSystem::from_text(&text).map_err(|e| CliError::from(e).in_file(path))
}

fn cmd_certify(run: &mut Run, system: &Path, point: &Path, seed: u64, config: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let sys = read_system(run, system)?;
    let pt: Value = run.json(point)?;
    let x0 = parse_point(&pt).map_err(|e| e.in_file(point))?;
    let mut cfg: CertifyConfig = match config {
        Some(p) => run.json(p)?,
        None => CertifyConfig::default(),
    };
    cfg.seed = seed;
    run.seed = Some(seed);
    run.note("seed", &seed.to_string());
    run.log(&format!("{} starts x {} seeds", cfg.starts, cfg.reseeds));
    let report = certify_fiber(&sys, &x0, &cfg)?;
    run.emit(out, &to_json(&report))
}

fn cmd_findroot(run: &mut Run, system: &Path, rhs: &Path, seed: Option<u64>, config: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let sys = read_system(run, system)?;
    let c: Value = run.json(rhs)?;
    let c = parse_rhs(&c).map_err(|e| e.in_file(rhs))?;
    let mut cfg: SearchConfig = match config {
        Some(p) => run.json(p)?,
        None => SearchConfig::default(),
    };
    if let (Some(s), Strategy::Multistart { seed: slot, .. }) = (seed, &mut cfg.strategy) {
        *slot = s;
    }
    if let Strategy::Multistart { seed, .. } = cfg.strategy {
        run.seed = Some(seed);
        run.note("seed", &seed.to_string());
    }
    let report = find_root_system(&sys, &c, &cfg)?;
    run.log(&format!("accepted candidate {} of {}", report.candidate_index, report.candidates_tried));
    let x = ParamVector::from_slice(&report.x);
    run.emit(out, &to_json(&json!({ "lambda": x, "report": report })))
}

fn lambda_from_source(run: &mut Run, src: &str) -> CliResult<ParamVector> {
    if let Some(rest) = src.strip_prefix("smoothed:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        let [center, sigma, seed] = parts[..] else {
            return Err(CliError::new("config", "expected smoothed:<center>,<sigma>,<seed>"));
        };
        let center = match center.parse::<f64>() {
            Ok(half_width) => CenterSpec::Uniform { half_width },
            Err(_) => CenterSpec::Fixed {
                lambda: run.json(Path::new(center))?,
            },
        };
        let sigma: f64 = sigma.parse().map_err(|_| CliError::new("config", format!("bad sigma `{sigma}`")))?;
        let seed: u64 = seed.parse().map_err(|_| CliError::new("config", format!("bad seed `{seed}`")))?;
        run.note("lambda_source", src);
        return Ok(sweep_instance(&center, sigma, seed)?);
    }
    let path = src.strip_prefix("file:").unwrap_or(src);
    run.json(Path::new(path))
}

fn cmd_learn(run: &mut Run, lattice: &Path, source: &str, config: Option<&Path>, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let lattice: LatticeSpec = run.json(lattice)?;
    let truth = lambda_from_source(run, source)?;
    let mut cfg: LearnConfig = match config {
        Some(p) => run.json(p)?,
        None => LearnConfig::default(),
    };
    if let Strategy::Multistart { seed: slot, .. } = &mut cfg.solver.strategy {
        *slot = seed;
    }
    run.seed = Some(seed);
    run.note("seed", &seed.to_string());
    let probe = SimulatedProbe::from_params(&lattice, &truth, seed)?.without_log();
    let report = probe_learn(&probe, &lattice, &cfg, Some(&truth))?;
    if let Some(d) = report.orbit_distance {
        run.log(&format!("orbit distance {d:.3e}, {} queries", report.queries));
    }
    run.emit(out, &to_json(&report))
}

fn read_rows(path: &Path) -> CliResult<Vec<SweepRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::new("io", e.to_string()).in_file(path))?;
    rdr.deserialize()
        .collect::<Result<Vec<SweepRow>, _>>()
        .map_err(|e| CliError::new("parse", e.to_string()).in_file(path))
}

fn cmd_sweep(run: &mut Run, plan: &Path, out: &Path) -> CliResult<()> {
    let plan: SweepPlan = run.json(plan)?;
    let existing = read_rows(out)?;
    run.log(&format!("{} rows already present", existing.len()));
    let table = sweep(&plan, &existing);
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    if table.rows.is_empty() {
        wtr.write_record(SWEEP_HEADER).expect("in-memory write");
    }
    for r in &table.rows {
        wtr.serialize(r).expect("in-memory write");
    }
    let bytes = wtr.into_inner().expect("in-memory flush");
    run.emit(Some(out), &String::from_utf8(bytes).expect("csv is utf-8"))?;
    let mut summary = out.as_os_str().to_owned();
    summary.push(".summary.json");
    run.emit(Some(Path::new(&summary)), &to_json(&table.aggregates))
}

const SWEEP_HEADER: [&str; 11] = [
    "sigma",
    "beta",
    "shots",
    "seed",
    "ok",
    "orbit_distance",
    "stage2_orbit_distance",
    "queries",
    "shots_used",
    "evolution_time",
    "error",
];

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("PROBE_TOMO_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::new("config", format!("PROBE_TOMO_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new("config", e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let start = Instant::now();
    let v = cli.verbose;
    let (mut run, out) = match &cli.command {
        Command::Derive { out, .. } => (Run::new("derive", v), out.clone()),
        Command::Simulate { out, .. } => (Run::new("simulate", v), out.clone()),
        Command::Certify { out, .. } => (Run::new("certify", v), out.clone()),
        Command::Findroot { out, .. } => (Run::new("findroot", v), out.clone()),
        Command::Learn { out, .. } => (Run::new("learn", v), out.clone()),
        Command::Sweep { out, .. } => (Run::new("sweep", v), Some(out.clone())),
    };
    match &cli.command {
        Command::Derive { dimension, out } => cmd_derive(&mut run, *dimension, out.as_deref()),
        Command::Simulate { config, seed, out } => cmd_simulate(&mut run, config, *seed, out.as_deref()),
        Command::Certify {
            system,
            point,
            seed,
            config,
            out,
        } => cmd_certify(&mut run, system, point, *seed, config.as_deref(), out.as_deref()),
        Command::Findroot {
            system,
            rhs,
            seed,
            config,
            out,
        } => cmd_findroot(&mut run, system, rhs, *seed, config.as_deref(), out.as_deref()),
        Command::Learn {
            lattice,
            lambda_source,
            config,
            seed,
            out,
        } => cmd_learn(&mut run, lattice, lambda_source, config.as_deref(), *seed, out.as_deref()),
        Command::Sweep { plan, out } => cmd_sweep(&mut run, plan, out),
    }?;
    run.finish(start, out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
