use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use curiosity_core::harness::{run_experiment, run_suite, RunConfig, TOTAL_STEPS};
use curiosity_core::rewards::MethodSpec;
use curiosity_core::theory::{verify_all, VerifyConfig};

mod output;
mod svg;

use output::CliError;

/// Noisy-TV curiosity experiments: single runs, seed suites, identity
/// checks and figures.
#[derive(Parser)]
#[command(name = "curiosity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one seed and write its JSON log and eval CSV.
    Run {
        /// random, v1, v2, cc-neural, cc-tabular, cc-oracle, rnd-state, rnd-obs or visit-count.
        #[arg(long)]
        method: MethodSpec,
        #[arg(long)]
        seed: u64,
        /// Main-loop steps; must be a multiple of 100.
        #[arg(long, default_value_t = TOTAL_STEPS)]
        steps: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run every (method, seed) pair and write table1.csv plus merged curves.
    Suite {
        /// Inclusive range `a..b` or a comma-separated list.
        #[arg(long, default_value = "1..5", value_parser = output::parse_seeds)]
        seeds: output::Seeds,
        /// `all` or a comma-separated list of method names.
        #[arg(long, default_value = "all", value_parser = output::parse_methods)]
        methods: output::Methods,
        #[arg(long, default_value_t = TOTAL_STEPS)]
        steps: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads [default: number of hardware threads].
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check the cumulative-improvement identities and the Jensen bound.
    VerifyTheory {
        /// Random matrices (and sample sets) per check.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Largest horizon T for random matrices.
        #[arg(long, default_value_t = 32)]
        tmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw a seed-averaged line chart from run logs in a directory.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        fig: Figure,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw seed-averaged visitation heatmaps, one panel per method.
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        window: Window,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    /// Mean deterministic-cell error, plus a 25k-35k zoom.
    Error,
    /// Fraction of steps spent in the deterministic half.
    Fraction,
    /// Mean critic estimate on each half.
    Critic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Window {
    Early,
    Mid,
    Late,
    Last5k,
}

impl Window {
    fn name(self) -> &'static str {
        match self {
            Window::Early => "early",
            Window::Mid => "mid",
            Window::Late => "late",
            Window::Last5k => "last5k",
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { method, seed, steps, out } => {
            let cfg = RunConfig::new(method, seed).with_steps(steps);
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let result = run_experiment(&cfg).map_err(CliError::from_run)?;
            output::write_run(&out, &result)?;
            println!("{method} seed {seed}: final error {:.4}", result.final_error);
            Ok(())
        }
        Command::Suite { seeds, methods, steps, out, jobs } => {
            let template = RunConfig::new(MethodSpec::Random, 0).with_steps(steps);
            let (methods, seeds) = (methods.0, seeds.0);
            let suite = run_suite(&methods, &seeds, &template, jobs).map_err(|e| CliError::Usage(e.to_string()))?;
            output::write_suite(&out, &suite, &seeds)?;
            print!("{}", output::suite_table(&suite));
            match suite.failures() {
                0 => Ok(()),
                n => Err(CliError::Partial(format!("{n} of {} runs failed", suite.runs.len()))),
            }
        }
        Command::VerifyTheory { trials, tmax, seed, report } => {
            let result = verify_all(VerifyConfig { trials, tmax, seed });
            for c in &result.checks {
                println!(
                    "{:<40} {:>6} cases  max dev {:<12.3e} tol {:<8.1e} {}",
                    c.name,
                    c.cases,
                    c.max_deviation,
                    c.tolerance,
                    if c.passed { "PASS" } else { "FAIL" }
                );
            }
            if let Some(path) = report {
                output::write_json(&path, &result)?;
            }
            if result.passed() {
                return Ok(());
            }
            for c in result.checks.iter().filter(|c| !c.passed) {
                let json = serde_json::to_string_pretty(&c.violation).expect("report serializes");
                eprintln!("violation in {}:\n{json}", c.name);
            }
            Err(CliError::Theory)
        }
        Command::Plot { input, fig, out } => {
            let runs = output::load_runs(&input)?;
            match fig {
                Figure::Error => {
                    svg::write(&out, &svg::error_chart(&runs, None))?;
                    let zoom = output::sibling(&out, "_zoom");
                    svg::write(&zoom, &svg::error_chart(&runs, Some((25_000, 35_000))))?;
                    println!("wrote {} and {}", out.display(), zoom.display());
                }
                Figure::Fraction => {
                    svg::write(&out, &svg::fraction_chart(&runs))?;
                    println!("wrote {}", out.display());
                }
                Figure::Critic => {
                    let chart = svg::critic_chart(&runs)
                        .ok_or_else(|| CliError::Usage("no runs with critic curves in input".into()))?;
                    svg::write(&out, &chart)?;
                    println!("wrote {}", out.display());
                }
            }
            Ok(())
        }
        Command::Heatmap { input, window, out } => {
            let runs = output::load_runs(&input)?;
            let panels = svg::heatmap_panels(&runs, window.name())?;
            svg::write(&out, &svg::heatmap(&panels, window.name()))?;
            for p in &panels {
                println!("{:<12} deterministic mass {:.3} ({} seeds)", p.method.name(), p.deterministic_mass, p.seeds);
            }
            Ok(())
        }
    }
}
