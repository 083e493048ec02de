use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use finsler_cli::error::EXIT_VERIFICATION;
use finsler_cli::{cmd_classify, cmd_curvatures, cmd_geodesic, cmd_verify, config_hash, CliError, Report, RunConfig};

#[derive(Parser)]
#[command(name = "finsler", version, about = "Curvature computations for (alpha, beta)-Finsler metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Overrides the configured sampling seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-sample scalars: F, S, K and the norms of B, D, J, I.
    Curvatures(Common),
    /// Class flags, isotropy fits and the lemma branch.
    Classify(Common),
    /// Exact certificates and closed-form versus definitional checks.
    Verify(Common),
    /// Geodesic trajectory as CSV.
    Geodesic(Common),
}

fn load(c: &Common) -> Result<(RunConfig, String), CliError> {
    let (mut cfg, bytes) = RunConfig::load(&c.config)?;
    if let Some(t) = c.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Config {
                path: "tol".into(),
                message: format!("--tol must be positive, got {t}"),
            });
        }
        cfg.tol = t;
    }
    if let Some(s) = c.seed {
        cfg = cfg.with_seed(s);
    }
    Ok((cfg, config_hash(&bytes)))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Curvatures(c) => {
            let (cfg, hash) = load(&c)?;
            let r = cmd_curvatures(&cfg)?;
            emit(&c.out, &Report::new("curvatures", &cfg, &hash, r).to_json())?;
        }
        Command::Classify(c) => {
            let (cfg, hash) = load(&c)?;
            let r = cmd_classify(&cfg)?;
            emit(&c.out, &Report::new("classify", &cfg, &hash, r).to_json())?;
        }
        Command::Verify(c) => {
            let (cfg, hash) = load(&c)?;
            let r = cmd_verify(&cfg)?;
            let passed = r.passed;
            emit(&c.out, &Report::new("verify", &cfg, &hash, r).to_json())?;
            if !passed {
                let e = CliError::Verification("one or more checks failed".into());
                eprintln!("{}", e.to_json());
                return Ok(EXIT_VERIFICATION);
            }
        }
        Command::Geodesic(c) => {
            let (cfg, _) = load(&c)?;
            emit(&c.out, &cmd_geodesic(&cfg)?)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
