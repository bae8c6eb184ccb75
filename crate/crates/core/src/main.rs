use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heleshaw::config::ExperimentConfig;
use heleshaw::error::{Error, Result};
use heleshaw::experiment::{self, Outcome};
use heleshaw::report::{Entry, VerificationReport};
use heleshaw::{baiocchi, io, obstacle};

#[derive(Parser)]
#[command(name = "heleshaw", version, about = "Hele-Shaw tumor growth laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to HELESHAW_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only run these checks.
    #[arg(long, global = true, value_delimiter = ',')]
    check: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline with every enabled check.
    Run,
    /// Simulation and the per-run checks.
    Simulate,
    /// One run directory per γ.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
    },
    Hopflax,
    Barrier,
    /// Free-boundary classification of a stored field.
    Classify {
        #[arg(long)]
        input: PathBuf,
        /// `boundary` or `x,y;x,y;...`
        #[arg(long, default_value = "boundary")]
        points: String,
        /// Lower bound for the source on the sampled region.
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Union of report.csv files.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        merge: Vec<PathBuf>,
    },
}

fn threads(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("HELESHAW_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("HELESHAW_THREADS is not a thread count: `{s}`")),
        Err(_) => Ok(None),
    }
}

fn load_config(common: &Common, command: &str) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let owned = experiment::checks_for(command);
    cfg.checks.retain(|c| owned.contains(&c.as_str()));
    if !common.check.is_empty() {
        for c in &common.check {
            if !heleshaw::config::CHECKS.contains(&c.as_str()) {
                return Err(Error::Config {
                    line: 0,
                    key: c.clone(),
                    message: "unknown check name in --check".into(),
                });
            }
        }
        cfg.checks.retain(|c| common.check.contains(c));
    }
    Ok(cfg)
}

fn print(outcome: &Outcome, dir: &Path) -> bool {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for e in &outcome.report.entries {
        println!(
            "{:<22} {:>5}  measured {:<12.6} tolerance {}",
            e.check,
            if e.passed { "pass" } else { "FAIL" },
            e.measured,
            e.tolerance
        );
    }
    println!("artifacts in {}", dir.display());
    outcome.report.all_passed()
}

fn parse_points(s: &str) -> Result<Vec<[f64; 2]>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let xs: Vec<f64> = p.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| Error::InvalidInput(format!("bad point `{p}`")))?;
            match xs.as_slice() {
                [x] => Ok([*x, 0.0]),
                [x, y] => Ok([*x, *y]),
                _ => Err(Error::InvalidInput(format!("bad point `{p}`"))),
            }
        })
        .collect()
}

fn classify(common: &Common, input: &Path, points: &str, lambda: f64) -> Result<bool> {
    let cfg = load_config(common, "classify")?;
    let w = io::read_field(input)?;
    std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    let report = if points == "boundary" {
        let (normal, nd) = experiment::classify_field(&cfg, &w, None, lambda, Some(&common.out))?;
        let mut r = VerificationReport::new();
        for e in [normal, nd] {
            if cfg.enabled(&e.check) {
                r.push(e);
            }
        }
        r
    } else {
        let pts = parse_points(points)?;
        let zero_tol = baiocchi::default_w_min(&w);
        for p in &pts {
            if !obstacle::is_free_boundary_cell(&w, w.grid().locate(*p), zero_tol) {
                return Err(Error::NotFreeBoundary(format!("{p:?}")));
            }
        }
        let (res, _) = experiment::classify_points(&cfg, &w, &pts, lambda)?;
        experiment::write_classification(&common.out.join("classification.csv"), &res)?;
        let mut r = VerificationReport::new();
        if cfg.enabled("nondegeneracy") {
            let worst = res.iter().filter_map(|p| p.nondegeneracy).fold(f64::INFINITY, f64::min);
            let tol = cfg.tolerance("nondegeneracy");
            r.push(Entry::at_least("nondegeneracy", worst, 1.0 - tol, "sup_{B_r} w ≥ (1 − ε)(λ/2d) r²"));
        }
        r
    };
    report.write_csv(&common.out.join("report.csv"))?;
    let outcome = Outcome {
        report,
        warnings: Vec::new(),
    };
    Ok(print(&outcome, &common.out))
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let common = &cli.common;
    match &cli.command {
        Command::Run => run(common, "run"),
        Command::Simulate => run(common, "simulate"),
        Command::Hopflax => run(common, "hopflax"),
        Command::Barrier => run(common, "barrier"),
        Command::Sweep { gammas } => {
            let mut cfg = load_config(common, "sweep")?;
            if !gammas.is_empty() {
                cfg.gammas = gammas.clone();
                cfg.validate()?;
            }
            let outcome = experiment::execute(&cfg, Some(&common.out))?;
            Ok(print(&outcome, &common.out))
        }
        Command::Classify { input, points, lambda } => classify(common, input, points, *lambda),
        Command::Report { merge } => {
            let report = experiment::merge_reports(merge)?;
            std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
                path: common.out.clone(),
                source: e,
            })?;
            report.write_csv(&common.out.join("report.csv"))?;
            let outcome = Outcome {
                report,
                warnings: Vec::new(),
            };
            Ok(print(&outcome, &common.out))
        }
    }
}

fn run(common: &Common, command: &str) -> Result<bool> {
    let cfg = load_config(common, command)?;
    let outcome = experiment::execute(&cfg, Some(&common.out))?;
    Ok(print(&outcome, &common.out))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) | Error::Io { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let n = match threads(cli.common.threads) {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
