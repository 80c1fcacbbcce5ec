//! `pseudoshift`: dynamics of weighted pseudo-shifts from the command line.

mod config;
mod emit;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use pseudoshift::criteria::{check_chaotic, check_hypercyclic, CriterionReport, SampleSpec, Structural};
use pseudoshift::orbits::{generator_set, orbit_dot, partition};
use pseudoshift::periodic::{approximate_by_periodic, build_periodic_point};
use pseudoshift::primes::PRIME_CACHE_ENV;
use pseudoshift::seqspace::{apply_operator, FinSeq, JsonScalar};
use pseudoshift::verdict::VerdictKind;
use serde_json::{json, Value};

use config::{load_vector, Mode, SessionConfig};

/// Exit status for problems other than a graded verdict.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    NoInput(String),
    CantCreate(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 64,
            Failure::Data(_) => 65,
            Failure::NoInput(_) => 66,
            Failure::CantCreate(_) => 73,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::NoInput(m) | Failure::CantCreate(m) => m,
        }
    }
}

impl From<pseudoshift::Error> for Failure {
    fn from(e: pseudoshift::Error) -> Self {
        match e {
            pseudoshift::Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "pseudoshift", version, about = "Hypercyclicity and chaos of weighted pseudo-shifts")]
struct Cli {
    /// Session configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    horizon_orbit: Option<u64>,
    #[arg(long, global = true)]
    series_terms: Option<usize>,
    #[arg(long, global = true)]
    preimage_scan: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structural checks, orbit partitions and generator sets for n = 1, 2, 3.
    AnalyzeMap {
        /// Emit a Graphviz chain of the first generators instead of a report.
        #[arg(long)]
        dot: bool,
    },
    /// Grade the hypercyclicity conditions.
    CheckHypercyclic {
        /// `generators:<cover>` or a comma-separated list of indices.
        #[arg(long)]
        samples: Option<SampleSpec>,
    },
    /// Grade the chaoticity conditions on the configured space.
    CheckChaotic {
        #[arg(long)]
        samples: Option<SampleSpec>,
    },
    /// Build the periodic point `x_{N,k}`.
    Periodic {
        #[arg(long)]
        k: u64,
        #[arg(long = "period", short = 'n')]
        period: u64,
        /// Coefficients below this magnitude are dropped.
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
    },
    /// Approximate a finitely supported target by a periodic point.
    Approx {
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// Iterate the operator on a vector, reporting norms and top entries.
    Simulate {
        #[arg(long)]
        vector: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
}

struct Report {
    value: Value,
    csv: (Vec<&'static str>, Vec<Vec<String>>),
    exit: u8,
}

impl Report {
    fn plain(value: Value, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        Report {
            value,
            csv: (header, rows),
            exit: 0,
        }
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Data(format!("cannot serialize report: {e}")))
}

fn session(cli: &Cli) -> Result<SessionConfig, Failure> {
    if let Ok(v) = std::env::var(PRIME_CACHE_ENV) {
        match v.trim().parse::<u64>() {
            Ok(b) if b >= 16 => {}
            _ => return Err(Failure::Usage(format!("{PRIME_CACHE_ENV} must be an integer >= 16, got {v:?}"))),
        }
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage("--config PATH is required".into()))?;
    let mut cfg = SessionConfig::load(path)?;
    let h = &mut cfg.horizons;
    for (flag, value) in [("--horizon-orbit", cli.horizon_orbit), ("--preimage-scan", cli.preimage_scan)] {
        if value == Some(0) {
            return Err(Failure::Usage(format!("{flag} must be >= 1")));
        }
    }
    if cli.series_terms == Some(0) {
        return Err(Failure::Usage("--series-terms must be >= 1".into()));
    }
    h.orbit = cli.horizon_orbit.unwrap_or(h.orbit);
    h.series_terms = cli.series_terms.unwrap_or(h.series_terms);
    h.preimage_scan = cli.preimage_scan.unwrap_or(h.preimage_scan);
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn analyze_map(cfg: &SessionConfig, dot: bool) -> Result<Report, Failure> {
    let h = &cfg.horizons;
    let structural = Structural::check(&cfg.map, h)?;
    let cover = h.orbit;
    let refuted = structural.kind() == VerdictKind::Refuted;
    if dot {
        let starts: Vec<u64> = if refuted {
            vec![1]
        } else {
            generator_set(&cfg.map, 1, cover, h.preimage_scan)?.values().into_iter().take(8).collect()
        };
        let text = orbit_dot(&cfg.map, &starts, 12)?;
        return Ok(Report::plain(Value::String(text), vec![], vec![]));
    }
    let mut partitions = Vec::new();
    let mut generators = serde_json::Map::new();
    let mut rows = Vec::new();
    if !refuted {
        for n in 1..=3u64 {
            let groups = partition(&cfg.map, n, cover, h.preimage_scan)?;
            for g in &groups {
                for &m in &g.members {
                    rows.push(vec![n.to_string(), m.to_string(), g.generator.to_string(), g.exact.to_string()]);
                }
            }
            let gens = generator_set(&cfg.map, n, cover, h.preimage_scan)?;
            generators.insert(n.to_string(), to_value(&gens.generators)?);
            partitions.push(json!({"n": n, "groups": to_value(&groups)?}));
        }
    }
    let value = json!({
        "cover": cover,
        "structural": to_value(&structural)?,
        "partitions": if refuted { Value::Null } else { Value::Array(partitions) },
        "generators": if refuted { Value::Null } else { Value::Object(generators) },
    });
    Ok(Report::plain(value, vec!["n", "index", "generator", "exact"], rows))
}

fn check(cfg: &SessionConfig, chaotic: bool, samples: Option<SampleSpec>) -> Result<Report, Failure> {
    let samples = samples.unwrap_or_else(|| cfg.samples.clone());
    let report: CriterionReport = if chaotic {
        check_chaotic(&cfg.map, &cfg.weights, cfg.space, &samples, &cfg.horizons)?
    } else {
        check_hypercyclic(&cfg.map, &cfg.weights, cfg.space, &samples, &cfg.horizons)?
    };
    let kind = |k: VerdictKind| to_value(&k).map(|v| emit::cell(&v));
    let mut rows = Vec::new();
    for s in &report.samples {
        rows.push(vec![
            s.k.to_string(),
            kind(s.kind())?,
            kind(s.forward.verdict().kind)?,
            match &s.backward {
                Some(b) => kind(b.verdict().kind)?,
                None => String::new(),
            },
            s.sufficiency_error.map(emit::float).unwrap_or_default(),
        ]);
    }
    rows.push(vec!["overall".into(), kind(report.overall.kind)?, String::new(), String::new(), String::new()]);
    let exit = report.overall.kind.exit_code() as u8;
    Ok(Report {
        value: to_value(&report)?,
        csv: (vec!["k", "kind", "forward", "backward", "sufficiency_error"], rows),
        exit,
    })
}

fn entry_rows<S: JsonScalar>(x: &FinSeq<S>) -> Vec<Vec<String>> {
    x.iter()
        .map(|(i, v)| vec![i.to_string(), emit::cell(&v.to_json())])
        .collect()
}

fn periodic<S: JsonScalar>(cfg: &SessionConfig, k: u64, n: u64, eps: f64) -> Result<Report, Failure> {
    let r = build_periodic_point::<S>(&cfg.map, &cfg.weights, k, n, cfg.space, eps, &cfg.horizons)?;
    let rows = entry_rows(&r.vector);
    Ok(Report::plain(to_value(&r)?, vec!["index", "value"], rows))
}

fn approx<S: JsonScalar>(cfg: &SessionConfig, target: &Path, eps: f64) -> Result<Report, Failure> {
    let y: FinSeq<S> = load_vector(target)?;
    let a = approximate_by_periodic(&cfg.map, &cfg.weights, &y, eps, cfg.space, &cfg.horizons)?;
    let rows = entry_rows(&a.x);
    Ok(Report::plain(to_value(&a)?, vec!["index", "value"], rows))
}

fn simulate<S: JsonScalar>(cfg: &SessionConfig, vector: &Path, steps: u64, top: usize) -> Result<Report, Failure> {
    let mut x: FinSeq<S> = load_vector(vector)?;
    let mut trace = Vec::new();
    let mut rows = Vec::new();
    for j in 0..=steps {
        let norm = x.norm(cfg.space);
        let mut entries: Vec<(u64, &S)> = x.iter().collect();
        entries.sort_by(|a, b| b.1.to_f64().abs().total_cmp(&a.1.to_f64().abs()).then(a.0.cmp(&b.0)));
        entries.truncate(top);
        let top_entries: Vec<Value> = entries.iter().map(|(i, v)| json!([i, v.to_json()])).collect();
        for (i, v) in &entries {
            rows.push(vec![j.to_string(), emit::float(norm), i.to_string(), emit::cell(&v.to_json())]);
        }
        if entries.is_empty() {
            rows.push(vec![j.to_string(), emit::float(norm), String::new(), String::new()]);
        }
        trace.push(json!({"j": j, "norm": norm, "top": top_entries}));
        if j < steps {
            x = apply_operator(&cfg.map, &cfg.weights, &x, 1, cfg.horizons.preimage_scan)?;
        }
    }
    let value = json!({"space": to_value(&cfg.space)?, "steps": trace});
    Ok(Report::plain(value, vec!["j", "norm", "index", "value"], rows))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let cfg = session(cli)?;
    let report = match &cli.command {
        Command::AnalyzeMap { dot } => analyze_map(&cfg, *dot)?,
        Command::CheckHypercyclic { samples } => check(&cfg, false, samples.clone())?,
        Command::CheckChaotic { samples } => check(&cfg, true, samples.clone())?,
        Command::Periodic { k, period, eps } => match cfg.mode {
            Mode::Exact => periodic::<BigRational>(&cfg, *k, *period, *eps)?,
            Mode::Float => periodic::<f64>(&cfg, *k, *period, *eps)?,
        },
        Command::Approx { target, eps } => match cfg.mode {
            Mode::Exact => approx::<BigRational>(&cfg, target, *eps)?,
            Mode::Float => approx::<f64>(&cfg, target, *eps)?,
        },
        Command::Simulate { vector, steps, top } => match cfg.mode {
            Mode::Exact => simulate::<BigRational>(&cfg, vector, *steps, *top)?,
            Mode::Float => simulate::<f64>(&cfg, vector, *steps, *top)?,
        },
    };
    let text = match (&report.value, cli.format) {
        (Value::String(dot), _) => dot.clone(),
        (v, Format::Json) => emit::json(v),
        (_, Format::Csv) => {
            let (header, rows) = &report.csv;
            emit::csv(header, rows).map_err(|e| Failure::Data(e.to_string()))?
        }
    };
    match &cli.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::CantCreate(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(report.exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 64 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("pseudoshift: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
