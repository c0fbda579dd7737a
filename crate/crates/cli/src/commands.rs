use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use randnet_core::analysis::cross_validate;
use randnet_core::config::parse_matrix;
use randnet_core::dynamics::{DEFAULT_EPS, DEFAULT_HORIZON, DEFAULT_P, DEFAULT_PATHS};
use randnet_core::report::{write_aggregate_csv, write_aggregate_json, write_paths_csv, write_paths_json};
use randnet_core::selfcheck::{run_selfcheck, Fault, SelfcheckOptions};
use randnet_core::{
    aggregate, eigen_spectrum, lift_second_order, parse_config, random_verdict, second_eigenvalue_modulus,
    simulate_paths, Config, ConsensusVerdict, Decision, DistributionKind, Error, InitialState, ModeParams, ModeReport,
    RngPolicy, SimulationDefaults, StochasticMatrix,
};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{
    Cli, Command, DeterministicArgs, Format, InjectedFault, LiftArgs, ModesArgs, SelfcheckArgs, SimArgs, VerdictArgs,
};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_OUTPUT: u8 = 4;
pub const EXIT_PROPERTY: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical(_) => EXIT_NUMERICAL,
            Error::Io(_) => EXIT_OUTPUT,
            _ => EXIT_CONFIG,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

pub fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Verdict(args) => verdict(cli, args),
        Command::Simulate(args) => simulate(cli, args),
        Command::Modes(args) => modes(cli, args),
        Command::Deterministic(args) => deterministic(cli, args),
        Command::Lift(args) => lift(cli, args),
        Command::Selfcheck(args) => selfcheck(cli, args),
    }
}

struct LoadedConfig {
    path: PathBuf,
    bytes: Vec<u8>,
    config: Config,
}

fn load(path: &Path) -> Result<LoadedConfig, Failure> {
    let bytes =
        fs::read(path).map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot read config {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("config {} is not UTF-8: {e}", path.display())))?;
    let config = parse_config(text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        bytes,
        config,
    })
}

fn require_config(cli: &Cli) -> Result<LoadedConfig, Failure> {
    match &cli.config {
        Some(path) => load(path),
        None => Err(Failure::new(EXIT_CONFIG, "--config is required for this command")),
    }
}

fn manifest_for(command: &'static str, loaded: &[&LoadedConfig]) -> RunManifest {
    let inputs: Vec<(&Path, &[u8])> = loaded.iter().map(|l| (l.path.as_path(), l.bytes.as_slice())).collect();
    RunManifest::new(command).with_inputs(&inputs)
}

fn parse_x0(text: &str) -> Result<InitialState, Failure> {
    let trimmed = text.trim();
    let parsed = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed)
    } else {
        serde_json::from_value(serde_json::Value::String(trimmed.to_string()))
    };
    parsed.map_err(|_| {
        Failure::new(
            EXIT_CONFIG,
            format!("--x0 must be `uniform01` or a JSON array of numbers, got `{text}`"),
        )
    })
}

/// Simulation settings after applying flags over config over defaults.
struct Resolved {
    seed: u64,
    paths: usize,
    horizon: usize,
    eps: f64,
    x0: InitialState,
}

fn resolve(cli: &Cli, args: &SimArgs, defaults: &SimulationDefaults) -> Result<Resolved, Failure> {
    let x0 = match &args.x0 {
        Some(text) => parse_x0(text)?,
        None => defaults.x0.clone().unwrap_or_default(),
    };
    Ok(Resolved {
        seed: cli.seed.or(defaults.seed).unwrap_or(0),
        paths: args.paths.or(defaults.paths).unwrap_or(DEFAULT_PATHS),
        horizon: args.horizon.or(defaults.horizon).unwrap_or(DEFAULT_HORIZON),
        eps: args.eps.or(defaults.eps).unwrap_or(DEFAULT_EPS),
        x0,
    })
}

fn output_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| {
        Failure::new(
            EXIT_OUTPUT,
            format!("cannot create output directory {}: {e}", dir.display()),
        )
    })?;
    Ok(dir)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>) -> CmdResult {
    let unwritable =
        |e: &dyn std::fmt::Display| Failure::new(EXIT_OUTPUT, format!("cannot write {}: {e}", path.display()));
    let file = File::create(path).map_err(|e| unwritable(&e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| unwritable(&e))?;
    w.flush().map_err(|e| unwritable(&e))
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

/// Writes a line to stdout; a closed pipe is not an error.
fn print_line(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json(value: &impl Serialize) {
    print_line(&serde_json::to_string_pretty(value).expect("reports serialize"));
}

/// Prints the report and, when `--out` is given, stores it with its manifest.
fn emit(cli: &Cli, name: &str, value: &impl Serialize, manifest: &RunManifest) -> CmdResult {
    print_json(value);
    if cli.out.is_some() {
        let dir = output_dir(cli)?;
        write_json(&dir.join(name), value)?;
        write_json(&dir.join("manifest.json"), manifest)?;
    }
    Ok(())
}

fn verdict(cli: &Cli, args: &VerdictArgs) -> CmdResult {
    let loaded = require_config(cli)?;
    let seed = cli.seed.or(loaded.config.simulation.seed).unwrap_or(0);
    let report = random_verdict(&loaded.config.distribution, args.mc_samples, &RngPolicy::new(seed))?;
    let manifest = manifest_for("verdict", &[&loaded])
        .param("seed", seed)
        .param("mc_samples", args.mc_samples);
    emit(cli, "verdict.json", &report, &manifest)
}

fn simulate(cli: &Cli, args: &SimArgs) -> CmdResult {
    let loaded = require_config(cli)?;
    let r = resolve(cli, args, &loaded.config.simulation)?;
    let params = ModeParams {
        paths: r.paths,
        horizon: r.horizon,
        eps: r.eps,
        ..ModeParams::default()
    };
    params.validate()?;
    let dist = &loaded.config.distribution;
    let policy = RngPolicy::new(r.seed);
    let x0 = r.x0.resolve(dist.dim(), &policy)?;
    let records = simulate_paths(dist, &x0, r.paths, r.horizon, &policy)?;
    let agg = aggregate(&records, r.eps, DEFAULT_P);

    let dir = output_dir(cli)?;
    match cli.format {
        Format::Csv => {
            write_file(&dir.join("paths.csv"), |w| write_paths_csv(w, &records))?;
            write_file(&dir.join("aggregate.csv"), |w| write_aggregate_csv(w, &agg))?;
        }
        Format::Json => {
            write_file(&dir.join("paths.json"), |w| write_paths_json(w, &records))?;
            write_file(&dir.join("aggregate.json"), |w| write_aggregate_json(w, &agg))?;
        }
    }
    let manifest = manifest_for("simulate", &[&loaded])
        .param("seed", r.seed)
        .param("paths", r.paths)
        .param("horizon", r.horizon)
        .param("eps", r.eps)
        .param("p", DEFAULT_P)
        .param("x0", &r.x0)
        .param("format", format_name(cli.format));
    write_json(&dir.join("manifest.json"), &manifest)
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

#[derive(Serialize)]
struct ModesOutput {
    #[serde(flatten)]
    modes: ModeReport,
    verdict: ConsensusVerdict,
    discrepancy: Option<String>,
}

fn modes(cli: &Cli, args: &ModesArgs) -> CmdResult {
    let loaded = require_config(cli)?;
    let r = resolve(cli, &args.sim, &loaded.config.simulation)?;
    let p = args.p.unwrap_or(DEFAULT_P);
    let params = ModeParams {
        paths: r.paths,
        horizon: r.horizon,
        eps: r.eps,
        p,
        ..ModeParams::default()
    };
    params.validate()?;
    let dist = &loaded.config.distribution;
    let policy = RngPolicy::new(r.seed);
    let x0 = r.x0.resolve(dist.dim(), &policy)?;
    let cv = cross_validate(dist, &x0, &params, args.mc_samples, &policy)?;
    let output = ModesOutput {
        discrepancy: cv.verdict.discrepancy.clone(),
        modes: cv.modes,
        verdict: cv.verdict,
    };
    let manifest = manifest_for("modes", &[&loaded])
        .param("seed", r.seed)
        .param("paths", r.paths)
        .param("horizon", r.horizon)
        .param("eps", r.eps)
        .param("p", p)
        .param("mc_samples", args.mc_samples)
        .param("x0", &r.x0);
    emit(cli, "modes.json", &output, &manifest)
}

#[derive(Serialize)]
struct DeterministicOutput {
    lambda2_modulus: f64,
    decision: Decision,
    positive_diagonal: bool,
    /// `[re, im]` pairs sorted by decreasing modulus.
    eigenvalues: Vec<[f64; 2]>,
    residual: f64,
}

fn deterministic(cli: &Cli, args: &DeterministicArgs) -> CmdResult {
    let (matrix, loaded) = match (&args.matrix, &cli.config) {
        (Some(text), _) => {
            let raw = parse_matrix(text)?;
            let a = StochasticMatrix::new(raw).map_err(|e| Failure::new(EXIT_CONFIG, format!("--matrix: {e}")))?;
            (a, None)
        }
        (None, Some(path)) => {
            let loaded = load(path)?;
            let DistributionKind::Dirac(a) = loaded.config.distribution.kind() else {
                return Err(Failure::new(
                    EXIT_CONFIG,
                    format!("{}: deterministic needs a dirac distribution", path.display()),
                ));
            };
            (a.clone(), Some(loaded))
        }
        (None, None) => return Err(Failure::new(EXIT_CONFIG, "deterministic needs --matrix or --config")),
    };
    if !(args.tol >= 0.0 && args.tol.is_finite()) {
        return Err(Failure::new(
            EXIT_CONFIG,
            format!("--tol must be nonnegative, got {}", args.tol),
        ));
    }
    let lambda2 = second_eigenvalue_modulus(&matrix)?;
    let spectrum = eigen_spectrum(matrix.matrix())?;
    let output = DeterministicOutput {
        lambda2_modulus: lambda2,
        decision: Decision::from_modulus(lambda2, args.tol),
        positive_diagonal: matrix.has_positive_diagonal(),
        eigenvalues: spectrum.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        residual: spectrum.residual,
    };
    let inputs: Vec<&LoadedConfig> = loaded.iter().collect();
    let mut manifest = manifest_for("deterministic", &inputs).param("tol", args.tol);
    if let Some(text) = &args.matrix {
        manifest = manifest.param("matrix", text.trim());
    }
    emit(cli, "deterministic.json", &output, &manifest)
}

fn lift(cli: &Cli, args: &LiftArgs) -> CmdResult {
    let (path_a, path_b) = match (&args.config_a, &args.config_b) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => (args.inputs[0].clone(), args.inputs[1].clone()),
    };
    let a = load(&path_a)?;
    let b = load(&path_b)?;
    let alpha = args.alpha;
    let lifted = lift_second_order(alpha, 1.0 - alpha, &a.config.distribution, &b.config.distribution)?;
    let config = Config {
        distribution: lifted,
        simulation: SimulationDefaults::default(),
    };
    let json = config.to_json()?;
    let manifest = manifest_for("lift", &[&a, &b])
        .param("alpha", alpha)
        .param("beta", 1.0 - alpha);
    if cli.out.is_some() {
        let dir = output_dir(cli)?;
        write_file(&dir.join("lifted.json"), |w| {
            w.write_all(json.as_bytes())?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
        write_json(&dir.join("manifest.json"), &manifest)?;
    } else {
        print_line(&json);
    }
    Ok(())
}

fn selfcheck(cli: &Cli, args: &SelfcheckArgs) -> CmdResult {
    let opts = SelfcheckOptions {
        n_max: args.n_max,
        trials: args.trials,
        seed: cli.seed.unwrap_or(0),
        inject: args.inject_fault.map(|f| match f {
            InjectedFault::RowSum => Fault::RowSum,
        }),
    };
    let report = run_selfcheck(&opts)?;
    for p in &report.properties {
        let status = if p.passed() { "ok" } else { "FAILED" };
        print_line(&format!(
            "{:<24} {:>7} checks {:>5} failures  {status}",
            p.name, p.checks, p.failures
        ));
    }
    if report.passed() {
        print_line(&format!("selfcheck passed (seed {})", report.seed));
        return Ok(());
    }
    let details: Vec<String> = report
        .failed()
        .map(|p| {
            format!(
                "property {} failed (seed {}): {}",
                p.name,
                report.seed,
                p.first_failure.as_deref().unwrap_or("no detail")
            )
        })
        .collect();
    Err(Failure::new(EXIT_PROPERTY, details.join("\n")))
}
