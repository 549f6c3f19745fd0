use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbcert::{config, eval, run_convergence, run_sobol, train, Artifact, CliError, ExperimentConfig};

/// Certified reduced-basis experiments. Config keys may also be given as
/// `--key=value` (e.g. `--basis_sizes=4,8 --sobol.M=2000`).
#[derive(Parser, Debug)]
#[command(name = "rbcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout if absent; required for `train`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed_snapshot: Option<u64>,
    #[arg(long, global = true)]
    seed_train: Option<u64>,
    #[arg(long, global = true)]
    seed_eval: Option<u64>,
    /// Bound the adjoint-corrected output (`train`).
    #[arg(long, global = true, action = clap::ArgAction::Set)]
    corrected: Option<bool>,
    /// Risk `alpha`.
    #[arg(long, global = true)]
    risk: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean errors and bounds over the configured basis sizes.
    Convergence,
    /// Certified first-order Sobol indices.
    Sobol,
    /// Train a goal-oriented bound and save it to `--out`.
    Train,
    /// Bound the reduced output at one parameter.
    Eval {
        #[arg(long)]
        artifact: PathBuf,
        /// Comma-separated parameter coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        mu: Vec<f64>,
    },
}

/// Pulls `--key=value` config overrides out of the argument list.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for a in args {
        match a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            Some((k, v)) if config::KEYS.contains(&k) => overrides.push((k.to_string(), v.to_string())),
            _ => rest.push(a),
        }
    }
    (rest, overrides)
}

fn load_config(cli: &Cli, overrides: Vec<(String, String)>) -> Result<ExperimentConfig, CliError> {
    let mut pairs = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            config::parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    pairs.extend(overrides);
    let seeds = [("seed.snapshot", cli.seed_snapshot), ("seed.train", cli.seed_train), ("seed.eval", cli.seed_eval)];
    for (k, v) in seeds {
        if let Some(v) = v {
            pairs.push((k.into(), v.to_string()));
        }
    }
    if let Some(r) = cli.risk {
        pairs.push(("alpha".into(), r.to_string()));
    }
    ExperimentConfig::from_pairs(pairs)
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<(), CliError> {
    match &cli.command {
        Command::Convergence => {
            let cfg = load_config(&cli, overrides)?;
            emit(&cli.out, run_convergence(&cfg)?.to_csv().as_bytes())
        }
        Command::Sobol => {
            let cfg = load_config(&cli, overrides)?;
            emit(&cli.out, run_sobol(&cfg)?.to_csv().as_bytes())
        }
        Command::Train => {
            let out = cli.out.as_ref().ok_or_else(|| CliError::Config("train needs --out".into()))?;
            let cfg = load_config(&cli, overrides)?;
            let art = train(&cfg, cli.corrected.unwrap_or(false))?;
            let mut bytes = Vec::new();
            art.write(&mut bytes)?;
            fs::write(out, bytes)?;
            Ok(())
        }
        Command::Eval { artifact, mu } => {
            let art = Artifact::read(io::BufReader::new(fs::File::open(artifact)?))?;
            let cfg = ExperimentConfig::from_pairs(art.config.clone())?;
            let res = eval(&art, mu, cli.risk.unwrap_or(cfg.alpha))?;
            emit(&cli.out, res.to_csv(&cfg.header_comment("eval")).as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rbcert: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
