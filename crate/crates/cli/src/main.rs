use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gar_cli::commands::execute;
use gar_cli::{CliError, Command, RunConfig};

/// Infer a weighted graph from multivariate data with the graphical autoregressive model.
#[derive(Parser)]
#[command(name = "gar", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// `key = value` settings file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the outputs.
    #[arg(long, global = true, default_value = "gar-out")]
    out_dir: PathBuf,
    /// Worker threads; 0 uses every logical core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Override any setting, e.g. `--set p=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV, with or without a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Scale each column to mean 0 and variance 1 first.
    #[arg(long)]
    standardize: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Draw a random graph and a GAR sample from it.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the model over the tuning grid and select by eBIC.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Sparsity penalty (comma-separated for several).
        #[arg(long)]
        lambda: Option<String>,
        /// Edge threshold (comma-separated for several).
        #[arg(long)]
        eps_thre: Option<String>,
        /// eBIC edge-prior weight in [0, 1], or `auto`.
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Parametric-bootstrap goodness of fit.
    Gof {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        bootstrap_b: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a fit against a simulated truth.
    Eval {
        /// Output directory of `gar fit`.
        #[arg(long)]
        fit_dir: Option<PathBuf>,
        /// Output directory of `gar simulate`.
        #[arg(long)]
        truth_dir: Option<PathBuf>,
    },
}

fn resolve(sub: &Sub, common: &Common) -> Result<RunConfig, CliError> {
    let command = match sub {
        Sub::Simulate { .. } => Command::Simulate,
        Sub::Fit { .. } => Command::Fit,
        Sub::Gof { .. } => Command::Gof,
        Sub::Eval { .. } => Command::Eval,
    };
    let mut config = RunConfig::defaults(command);
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v)?;
    }
    let mut flags: Vec<(&str, String)> = vec![];
    let data_flags = |d: &DataArgs, flags: &mut Vec<(&str, String)>| {
        if let Some(p) = &d.data {
            flags.push(("data", p.display().to_string()));
        }
        if d.standardize {
            flags.push(("standardize", "true".into()));
        }
    };
    match sub {
        Sub::Simulate { seed } => flags.extend(seed.map(|s| ("seed", s.to_string()))),
        Sub::Fit { data, lambda, eps_thre, gamma } => {
            data_flags(data, &mut flags);
            flags.extend(lambda.clone().map(|v| ("lambda", v)));
            flags.extend(eps_thre.clone().map(|v| ("eps_thre", v)));
            flags.extend(gamma.clone().map(|v| ("gamma", v)));
        }
        Sub::Gof { data, lambda, bootstrap_b, seed } => {
            data_flags(data, &mut flags);
            flags.extend(lambda.clone().map(|v| ("lambda", v)));
            flags.extend(bootstrap_b.map(|b| ("bootstrap_b", b.to_string())));
            flags.extend(seed.map(|s| ("seed", s.to_string())));
        }
        Sub::Eval { fit_dir, truth_dir } => {
            flags.extend(fit_dir.as_ref().map(|p| ("fit_dir", p.display().to_string())));
            flags.extend(truth_dir.as_ref().map(|p| ("truth_dir", p.display().to_string())));
        }
    }
    for (k, v) in flags {
        config.set(k, &v)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let Cli { common, command } = cli;
    let config = resolve(&command, &common)?;
    if common.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(common.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", common.threads)))?;
    }
    let threads = rayon::current_num_threads();
    let outcome = execute(&config, &common.out_dir, threads)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", outcome.summary);
    println!("outputs in {}", common.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
