use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mosco_core::elliptic::{excess_field, poisson_dirichlet};
use mosco_core::numfmt::parse_real;
use mosco_core::presets::{preset_ids, run_preset, PRESETS};
use mosco_core::report::{rounded_json, ExperimentSpec, ParamValue};
use mosco_core::{build_mesh, dirichlet_spectrum, BallSpec, Convention, Error, SpaceDescriptor, Weight};

#[derive(Parser)]
#[command(name = "mosco", version, about = "Dirichlet spectra and convergence experiments on weighted 1D spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the preset experiments.
    ListPresets,
    /// Run a preset experiment and write its report.
    Run(RunArgs),
    /// Dirichlet eigenvalues of one ball.
    Spectrum(ProblemArgs),
    /// Poisson problem with Dirichlet data on one ball.
    Poisson(ProblemArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = real)]
    mesh_h: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; without it results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct RunArgs {
    preset: String,
    #[command(flatten)]
    common: Common,
    /// Exit with status 1 when a check fails.
    #[arg(long)]
    strict: bool,
    /// Extra preset parameter, `key=value` (lists as `a,b,c`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Leave the run-dependent metadata out of the JSON report.
    #[arg(long)]
    no_metadata: bool,
}

#[derive(Args)]
struct ProblemArgs {
    #[command(flatten)]
    common: Common,
    /// half_line:a | interval:a:b | line | circle:L | cone:N, or key=value text.
    #[arg(long)]
    space: Option<String>,
    /// const:c | power:p:o
    #[arg(long)]
    weight: Option<String>,
    #[arg(long, value_parser = real, allow_hyphen_values = true)]
    center: Option<f64>,
    #[arg(long, value_parser = real)]
    radius: Option<f64>,
    #[arg(long)]
    convention: Option<String>,
    /// Boundary data: zero | const:c | affine:a:b | square | excess:far:base
    #[arg(long)]
    boundary: Option<String>,
    /// Constant source term.
    #[arg(long, value_parser = real, allow_hyphen_values = true)]
    source: Option<f64>,
    /// Also emit eigenvectors.
    #[arg(long)]
    vectors: bool,
}

fn real(s: &str) -> Result<f64, String> {
    parse_real(s).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownPreset(_)
            | Error::ParameterOutOfRange { .. }
            | Error::Parse(_)
            | Error::InvalidSpace(_)
            | Error::InvalidBall(_)
            | Error::InvalidArgument(_)
            | Error::OutsideDomain(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListPresets => {
            for (id, about) in PRESETS {
                println!("{id:<28} {about}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => run(args),
        Command::Spectrum(args) => spectrum(args),
        Command::Poisson(args) => poisson(args),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn run(args: RunArgs) -> Result<ExitCode, Failure> {
    if !preset_ids().any(|id| id == args.preset) {
        return Err(Error::UnknownPreset(args.preset).into());
    }
    let mut spec = ExperimentSpec::new(args.preset.clone());
    if let Some(path) = &args.common.config {
        spec = ExperimentSpec::parse_config(&read_config(path)?, spec)?;
        spec.preset = args.preset.clone();
    }
    for item in &args.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects key=value, got '{item}'")))?;
        spec.parameters
            .insert(key.trim().replace('-', "_"), ParamValue::parse(value.trim())?);
    }
    if let Some(h) = args.common.mesh_h {
        spec.parameters.insert("mesh_h".into(), ParamValue::Scalar(h));
    }
    if let Some(k) = args.common.k {
        spec.parameters.insert("k".into(), ParamValue::Scalar(k as f64));
    }
    if let Some(seed) = args.common.seed {
        spec.seed = seed;
    }
    let report = run_preset(&spec)?;
    let json = report.to_json(!args.no_metadata);
    let format = args.common.format.unwrap_or(Format::Both);
    match &args.common.out {
        Some(dir) => {
            if format != Format::Csv {
                write_file(dir, &format!("{}.json", report.preset), &json)?;
            }
            if format != Format::Json {
                for t in &report.tables {
                    write_file(dir, &format!("{}-{}.csv", report.preset, t.name), &t.to_csv())?;
                }
                write_file(dir, &format!("{}-checks.csv", report.preset), &report.checks_csv())?;
            }
            for c in &report.checks {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
        }
        None => {
            if format == Format::Csv {
                for t in &report.tables {
                    println!("# {}", t.name);
                    print!("{}", t.to_csv());
                }
                print!("{}", report.checks_csv());
            } else {
                println!("{json}");
            }
            for c in &report.checks {
                eprintln!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
            }
        }
    }
    if args.strict && !report.all_pass() {
        eprintln!("{} check(s) failed", report.failed().len());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

/// Flag values over config values over defaults.
struct Settings {
    config: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&PathBuf>) -> Result<Self, Failure> {
        let mut config = BTreeMap::new();
        if let Some(p) = path {
            for (n, raw) in read_config(p)?.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("config line {}: expected key=value", n + 1)))?;
                config.insert(k.trim().replace('-', "_"), v.trim().to_string());
            }
        }
        Ok(Self { config })
    }

    fn text(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.config.get(key).cloned())
    }

    fn real(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>, Failure> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.config.get(key).map(|s| parse_real(s)).transpose().map_err(Failure::from),
        }
    }
}

fn parse_space(text: &str) -> Result<SpaceDescriptor, Failure> {
    if text.contains('=') {
        return Ok(text.parse::<SpaceDescriptor>()?);
    }
    let parts: Vec<&str> = text.split(':').collect();
    let num = |i: usize| -> Result<f64, Failure> {
        let s = parts
            .get(i)
            .ok_or_else(|| Failure::Usage(format!("space '{text}' is missing a parameter")))?;
        Ok(parse_real(s)?)
    };
    let space = match parts[0] {
        "half_line" => SpaceDescriptor::half_line(num(1)?)?,
        "interval" => SpaceDescriptor::interval(num(1)?, num(2)?)?,
        "line" => SpaceDescriptor::line(),
        "circle" => SpaceDescriptor::circle(num(1)?)?,
        "cone" => SpaceDescriptor::cone(num(1)?)?,
        other => return Err(Failure::Usage(format!("unknown space kind '{other}'"))),
    };
    Ok(space)
}

fn parse_weight(text: &str) -> Result<Weight, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |i: usize| -> Result<f64, Failure> {
        let s = parts
            .get(i)
            .ok_or_else(|| Failure::Usage(format!("weight '{text}' is missing a parameter")))?;
        Ok(parse_real(s)?)
    };
    match parts[0] {
        "const" | "constant" => Ok(Weight::Constant { density: num(1)? }),
        "power" => Ok(Weight::Power {
            exponent: num(1)?,
            origin: if parts.len() > 2 { num(2)? } else { 0.0 },
        }),
        other => Err(Failure::Usage(format!("unknown weight kind '{other}'"))),
    }
}

struct Problem {
    space: SpaceDescriptor,
    ball: BallSpec,
    convention: Convention,
    h: f64,
    k: usize,
    format: Format,
    out: Option<PathBuf>,
    settings: Settings,
}

fn problem(args: &ProblemArgs, default_convention: Convention) -> Result<Problem, Failure> {
    let settings = Settings::load(args.common.config.as_ref())?;
    let space_text = settings
        .text(args.space.clone(), "space")
        .ok_or_else(|| Failure::Usage("--space is required".into()))?;
    let mut space = parse_space(&space_text)?;
    if let Some(w) = settings.text(args.weight.clone(), "weight") {
        space = space.with_weight(parse_weight(&w)?)?;
    }
    let center = settings
        .real(args.center, "center")?
        .ok_or_else(|| Failure::Usage("--center is required".into()))?;
    let radius = settings
        .real(args.radius, "radius")?
        .ok_or_else(|| Failure::Usage("--radius is required".into()))?;
    let convention = match settings.text(args.convention.clone(), "convention") {
        Some(c) => c.parse::<Convention>()?,
        None => default_convention,
    };
    let h = settings.real(args.common.mesh_h, "mesh_h")?.unwrap_or(1e-3);
    if !(h > 0.0) {
        return Err(Failure::Usage(format!("--mesh-h must be > 0, got {h}")));
    }
    let k = match args.common.k {
        Some(k) => k,
        None => settings
            .config
            .get("k")
            .map(|s| s.parse::<usize>())
            .transpose()
            .map_err(|_| Failure::Usage("config k must be a positive integer".into()))?
            .unwrap_or(3),
    };
    if k == 0 {
        return Err(Failure::Usage("--k must be >= 1".into()));
    }
    let ball = BallSpec::new(center, radius);
    space.validate_ball(&ball)?;
    let format = args.common.format.unwrap_or(Format::Csv);
    Ok(Problem {
        space,
        ball,
        convention,
        h,
        k,
        format,
        out: args.common.out.clone(),
        settings,
    })
}

fn emit(p: &Problem, name: &str, csv: &str, json: &str) -> Result<(), Failure> {
    match &p.out {
        Some(dir) => {
            if p.format != Format::Json {
                write_file(dir, &format!("{name}.csv"), csv)?;
            }
            if p.format != Format::Csv {
                write_file(dir, &format!("{name}.json"), json)?;
            }
        }
        None => {
            if p.format == Format::Json {
                println!("{json}");
            } else {
                print!("{csv}");
            }
        }
    }
    Ok(())
}

fn spectrum(args: ProblemArgs) -> Result<ExitCode, Failure> {
    let p = problem(&args, Convention::H0)?;
    let region = p.space.ball_region(&p.ball)?;
    let span = region.span();
    eprintln!(
        "ball B_{}({}) = [{}, {}] tags {:?}/{:?}, convention {}",
        p.ball.radius, p.ball.center, span.lo, span.hi, span.lo_tag, span.hi_tag, p.convention
    );
    let mesh = build_mesh(&p.space, &p.ball, p.h)?;
    let sp = dirichlet_spectrum(&p.space, &mesh, &p.ball, p.convention, p.k)?;
    let json = rounded_json(json!({
        "space": p.space.to_string(),
        "center": p.ball.center,
        "radius": p.ball.radius,
        "convention": p.convention.to_string(),
        "mesh_h": p.h,
        "free_dimension": sp.sets.free.len(),
        "eigenvalues": sp.eigenvalues,
        "residuals": sp.residuals,
    }));
    emit(&p, "spectrum", &sp.to_csv(), &json)?;
    if args.vectors {
        match &p.out {
            Some(dir) => write_file(dir, "spectrum-vectors.csv", &sp.vectors_csv())?,
            None => print!("{}", sp.vectors_csv()),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn boundary_field(spec: &str, p: &Problem, mesh: &mosco_core::Mesh) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |i: usize| -> Result<f64, Failure> {
        let s = parts
            .get(i)
            .ok_or_else(|| Failure::Usage(format!("boundary '{spec}' is missing a parameter")))?;
        Ok(parse_real(s)?)
    };
    Ok(match parts[0] {
        "zero" => vec![0.0; mesh.len()],
        "const" => {
            let c = num(1)?;
            vec![c; mesh.len()]
        }
        "affine" => {
            let (a, b) = (num(1)?, num(2)?);
            mesh.sample(|t| a + b * t)
        }
        "square" => {
            let o = p.space.pole().unwrap_or(0.0);
            mesh.sample(|t| (t - o) * (t - o))
        }
        "excess" => excess_field(&p.space, mesh, num(1)?, num(2)?)?,
        other => return Err(Failure::Usage(format!("unknown boundary data '{other}'"))),
    })
}

fn poisson(args: ProblemArgs) -> Result<ExitCode, Failure> {
    let p = problem(&args, Convention::H0)?;
    let mesh = build_mesh(&p.space, &p.ball, p.h)?;
    let boundary = p
        .settings
        .text(args.boundary.clone(), "boundary")
        .unwrap_or_else(|| "zero".to_string());
    let f = boundary_field(&boundary, &p, &mesh)?;
    let source = p.settings.real(args.source, "source")?.unwrap_or(0.0);
    let g = vec![source; mesh.len()];
    let sol = poisson_dirichlet(&p.space, &mesh, &p.ball, p.convention, &f, &g)?;
    eprintln!(
        "lambda_1 = {}, galerkin residual = {:e}, energy = {}",
        sol.lambda1, sol.diagnostics.galerkin_residual, sol.diagnostics.energy_value
    );
    let json = rounded_json(json!({
        "space": p.space.to_string(),
        "center": p.ball.center,
        "radius": p.ball.radius,
        "convention": p.convention.to_string(),
        "mesh_h": p.h,
        "lambda1": sol.lambda1,
        "diagnostics": sol.diagnostics,
        "coordinates": sol.coordinates,
        "values": sol.solution,
    }));
    emit(&p, "poisson", &sol.to_csv(), &json)?;
    Ok(ExitCode::SUCCESS)
}
