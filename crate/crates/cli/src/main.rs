use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cli::{execute, load_config, validate_config, CliError, ExperimentKind, Overrides, RunConfig};

const AFTER_HELP: &str = "Configuration is a TOML file; every key is optional. \
Run `evarkit defaults` to print all defaults. EVARKIT_THREADS caps the worker count.";

#[derive(Parser)]
#[command(name = "evarkit", version, about = "E-power experiments for composite-null e-variables", after_help = AFTER_HELP)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo replicates [default: 2000]
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Artifact directory [default: out]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Largest sample size; explicit grids are truncated [default: 100]
    #[arg(long, global = true)]
    n_max: Option<usize>,
    /// Two-sample base family: bernoulli, exponential, poisson, gaussian [default: bernoulli]
    #[arg(long, global = true)]
    base: Option<String>,
    /// Effect size of the alternative (replaces the anchor)
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Only check the configuration and print diagnostics
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo e-power curves; writes CSV, summary JSON and a gnuplot script
    Simulate,
    /// Numerical reverse information projection with certificates
    Ripr,
    /// Simple / anti-simple classification of the setting
    Classify,
    /// Exact E[S] under null members by enumeration
    Validate,
    /// Closed-form e-power prediction
    Predict(PredictArgs),
    /// Cross-expectation check of the e-process property
    Eprocess(EProcessArgs),
    /// Print the default configuration
    Defaults,
}

#[derive(Args)]
struct PredictArgs {
    /// Case tag, e.g. thm2-cond
    #[arg(long)]
    case: Option<String>,
    /// Sample size
    #[arg(long)]
    n: Option<usize>,
    /// KL rate D of the alternative against its closest null member
    #[arg(long = "D", alias = "kl")]
    d: Option<f64>,
    /// List the cases and their formulas
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct EProcessArgs {
    /// Sample size [default: 2]
    #[arg(long)]
    n: Option<usize>,
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("EVARKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "EVARKIT_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    threads()?;
    let kind = match &cli.command {
        Command::Defaults => {
            print!("{}", RunConfig::default().to_toml());
            return Ok(());
        }
        Command::Predict(a) if a.list => {
            for c in epower_lab::predict::ALL_CASES {
                println!("{:<24} {}", c.tag(), c.formula());
            }
            return Ok(());
        }
        Command::Simulate => ExperimentKind::Simulate,
        Command::Ripr => ExperimentKind::Ripr,
        Command::Classify => ExperimentKind::Classify,
        Command::Validate => ExperimentKind::Validate,
        Command::Predict(_) => ExperimentKind::Predict,
        Command::Eprocess(_) => ExperimentKind::Eprocess,
    };
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    match cfg.experiment {
        Some(k) if k != kind => {
            return Err(CliError::Usage(format!(
                "configuration is for '{}', not '{}'",
                k.name(),
                kind.name()
            )));
        }
        _ => cfg.experiment = Some(kind),
    }
    cfg.apply(&Overrides {
        seed: c.seed,
        reps: c.reps,
        out_dir: c.out_dir.clone(),
        n_max: c.n_max,
        base: c.base.clone(),
        delta: c.delta,
    });
    match &cli.command {
        Command::Predict(a) => {
            if a.case.is_some() {
                cfg.predict.case = a.case.clone();
            }
            if a.n.is_some() {
                cfg.predict.n = a.n;
            }
            if a.d.is_some() {
                cfg.predict.params.kl = a.d;
            }
        }
        Command::Eprocess(a) => {
            if let Some(n) = a.n {
                cfg.eprocess.n = n;
            }
        }
        _ => {}
    }
    if c.check {
        let diags = validate_config(&cfg);
        for d in &diags {
            println!("{d}");
        }
        if diags.iter().any(|d| d.is_error()) {
            return Err(CliError::Invalid(diags));
        }
        println!("configuration ok");
        return Ok(());
    }
    let out = execute(&cfg)?;
    for w in &out.warnings {
        eprintln!("{w}");
    }
    print!("{}", out.stdout);
    for f in &out.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
