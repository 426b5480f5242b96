use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use greentorus_cli::{
    format_report, load_config, load_report, run_config, run_suite, validate_config, CliError,
};

#[derive(Parser)]
#[command(name = "greentorus", version, about = "Experiment runner for torus automorphism dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and persist its report.
    Run {
        config: PathBuf,
        /// Output root (overridden by the config's own `output` field).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every config listed in a manifest and print a summary table.
    Suite {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against the schema without running it.
    Validate { config: PathBuf },
    /// Print the stored report of a finished run.
    Show { run_dir: PathBuf },
    /// Dynamical degrees of an integer matrix on the Gaussian-lattice torus,
    /// rows separated by `;`, entries by `,` (e.g. "2,1;1,1").
    Degrees { matrix: String },
}

fn exit_for(err: &CliError) -> ExitCode {
    match err {
        CliError::Usage(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            exit_for(&e)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let (dir, report) = run_config(&cfg, out.as_deref())?;
            println!("{}", format_report(&report));
            println!("run dir: {}", dir.display());
            Ok(if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Suite { manifest, out } => {
            let summary = run_suite(&manifest, out.as_deref())?;
            println!("{:<40} {:>10} {:>8} {:>8}", "config", "kind", "pass", "fail");
            for e in &summary.entries {
                println!(
                    "{:<40} {:>10} {:>8} {:>8}",
                    e.config,
                    format!("{:?}", e.kind).to_lowercase(),
                    e.passed,
                    e.failed
                );
            }
            println!(
                "{} configs, overall: {}",
                summary.entries.len(),
                if summary.all_pass { "pass" } else { "FAIL" }
            );
            Ok(if summary.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            validate_config(&cfg)?;
            println!("ok: {}", config.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Show { run_dir } => {
            let report = load_report(&run_dir)?;
            print!("{}", format_report(&report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Degrees { matrix } => {
            let rows: Vec<Vec<i64>> = matrix
                .split(';')
                .map(|row| {
                    row.split(',')
                        .map(|v| {
                            v.trim()
                                .parse::<i64>()
                                .map_err(|_| CliError::Usage(format!("bad matrix entry `{v}`")))
                        })
                        .collect()
                })
                .collect::<Result<_, _>>()?;
            let k = rows.len();
            if rows.iter().any(|r| r.len() != k) {
                return Err(CliError::Usage("matrix must be square".into()));
            }
            let torus = greentorus::torus::Torus::gaussian(k)?;
            let map = greentorus::torus::MapSpec::from_integer(&rows).build(&torus)?;
            let model = greentorus::cohomology::build_torus_cohomology(&torus, &map)?;
            let profile = greentorus::cohomology::dynamical_degrees(&model)?;
            for (q, d) in profile.degrees.iter().enumerate() {
                println!("d_{q} = {d:.12}");
            }
            println!("entropy = {:.12}", profile.entropy);
            Ok(ExitCode::SUCCESS)
        }
    }
}
