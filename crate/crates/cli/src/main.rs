//! `impuritylab <kind> --config file.json [--seed N] [--workers N] [--out dir]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 resource or I/O error,
//! 4 numerical-contract violation. Failures are reported as JSON on stderr.

mod experiments;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{Map, Value};

use experiments::{Experiment, Failure, Kind};
use output::{write_output, RunManifest, MANIFEST_FILE};

#[derive(Parser, Debug)]
#[command(name = "impuritylab", version, about = "Impurity dynamics experiments on free-fermion chains")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// Flat JSON object of parameters.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, a positive integer or "auto"; overrides the file.
    #[arg(long)]
    workers: Option<String>,
    /// Output directory; overrides the file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(cli: &Cli) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Failure::Config(vec![format!("config {}: {e}", cli.config.display())]))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(vec![format!("config {}: {e}", cli.config.display())]))?;
    let Value::Object(mut map) = value else {
        return Err(Failure::Config(vec!["config: expected a JSON object".into()]));
    };
    if let Some(seed) = cli.seed {
        map.insert("seed".into(), seed.into());
    }
    if let Some(w) = &cli.workers {
        let v = w.parse::<u64>().map_or_else(|_| Value::String(w.clone()), Value::from);
        map.insert("workers".into(), v);
    }
    if let Some(out) = &cli.out {
        map.insert("out".into(), out.to_string_lossy().into_owned().into());
    }
    Ok(map)
}

fn execute(exp: &Experiment) -> Result<Value, Failure> {
    let started = chrono::Utc::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.workers)
        .build()
        .map_err(|e| Failure::Resource { message: format!("worker pool: {e}"), required_bytes: None })?;
    let products = pool.install(|| experiments::run(exp))?;
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", exp.out.display()));
    std::fs::create_dir_all(&exp.out).map_err(io)?;
    let outputs = products
        .files
        .iter()
        .map(|(name, bytes)| write_output(&exp.out, name, bytes))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(io)?;
    let manifest = RunManifest {
        kind: exp.kind.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: exp.seed,
        workers: pool.current_num_threads(),
        config: exp.echo.clone(),
        started,
        finished: chrono::Utc::now(),
        outputs,
        summary: products.summary.clone(),
    };
    let mut text = serde_json::to_vec_pretty(&manifest).expect("JSON serialisation");
    text.push(b'\n');
    std::fs::write(exp.out.join(MANIFEST_FILE), text).map_err(io)?;
    if exp.kind == Kind::FcsCheck {
        println!(
            "max deviation between determinant and brute-force P(n): {:e} (tolerance {:e})",
            products.summary["max_deviation"].as_f64().unwrap_or(f64::NAN),
            experiments::FCS_TOLERANCE
        );
    }
    match products.violation {
        Some(v) => Err(Failure::Numerical(v)),
        None => Ok(products.summary),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::Config(vec![e.kind().to_string(), e.to_string().trim().to_string()]);
            eprintln!("{}", f.to_json());
            return ExitCode::from(f.exit_code() as u8);
        }
    };
    let result = load(&cli).and_then(|map| experiments::parse(cli.kind, map)).and_then(|exp| execute(&exp));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
