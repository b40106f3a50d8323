use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tvflow::commands::{self, DenoiseOptions};
use tvflow::CliResult;
use tvflow_core::analysis::StudyAxis;

#[derive(Parser)]
#[command(name = "tvflow", version, about = "Pseudo-parabolic weighted total-variation flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Tau,
    Eps,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured flow and write the trajectory and reports.
    Solve { config: PathBuf },
    /// Run the flow and assert the energy, stability and trace inequalities.
    Verify { config: PathBuf },
    /// Smooth a PGM image with the unforced flow on a unit-pixel grid.
    Denoise {
        image: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Dissipation ledger CSV; defaults to the output path with `.csv`.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// A constant weight or `edge-stop:<sigma>`.
        #[arg(long, default_value = "1")]
        alpha: String,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
    },
    /// Solve once per value of one configuration key.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Self-convergence study in tau or eps.
    Study {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { config } => {
            let o = commands::solve(&config)?;
            println!(
                "solved {} steps to T = {} (eps = {:e}); energy {:e} -> {:e}",
                o.result.n_steps(),
                o.result.horizon(),
                o.result.eps.value(),
                o.energies[0],
                o.energies[o.energies.len() - 1]
            );
        }
        Command::Verify { config } => {
            commands::verify(&config)?;
            println!("all asserted invariants hold");
        }
        Command::Denoise { image, output, report, eps, tau, steps, alpha, beta } => {
            let report = report.unwrap_or_else(|| output.with_extension("csv"));
            let opts = DenoiseOptions { eps, tau, steps, alpha, beta, ..DenoiseOptions::default() };
            let o = commands::denoise(&image, &output, &report, &opts)?;
            println!(
                "variance {:e} -> {:e}; energy {:e} -> {:e}",
                o.input.mean_and_variance().1,
                o.output.mean_and_variance().1,
                o.energies[0],
                o.energies[o.energies.len() - 1]
            );
        }
        Command::Sweep { config, key, values, jobs } => {
            let runs = commands::sweep(&config, &key, &values, jobs)?;
            let mut first_err = None;
            for r in runs {
                match r.outcome {
                    Ok(_) => println!("{key}={}: ok ({})", r.value, r.output_dir.display()),
                    Err(e) => {
                        eprintln!("{key}={}: {e}", r.value);
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Command::Study { config, axis, levels, jobs } => {
            let axis = match axis {
                Axis::Tau => StudyAxis::Tau,
                Axis::Eps => StudyAxis::Eps,
            };
            let s = commands::study(&config, axis, &levels, jobs)?;
            for (k, g) in s.gaps.iter().enumerate() {
                let rate = s.rates.get(k).map_or_else(String::new, |r| format!(" rate {r:.3}"));
                println!("{} {:e}: gap {g:e}{rate}", axis.name(), s.levels[k]);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tvflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
