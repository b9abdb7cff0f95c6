use clap::{Args, Parser, Subcommand};
use gdsde::experiments::{registry, run_experiment, ExperimentReport};
use gdsde::oracles::evaluate_named;
use gdsde::table::format_f64;
use gdsde_cli::config::{FileConfig, Flags, Override, Threads};
use gdsde_cli::emit::emit_artifacts;
use gdsde_cli::{exit, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gdsde", version, about = "Gradient-descent limit theory: experiments and oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered experiments with their default parameters.
    List,
    /// Run one experiment and write its artifacts.
    Run {
        experiment: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run every registered experiment.
    All {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Evaluate closed-form oracles.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Print an oracle value with its error estimate.
    Eval {
        name: String,
        #[arg(allow_hyphen_values = true)]
        args: Vec<f64>,
    },
}

#[derive(Args)]
struct RunFlags {
    /// Master seed [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, a positive integer or "auto".
    #[arg(long)]
    threads: Option<Threads>,
    /// Parameter override `key=value`, or `experiment.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<Override>,
    /// TOML file with one section per experiment.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunFlags {
    fn resolve(self) -> Result<Flags, CliError> {
        let config = self.config.as_deref().map(FileConfig::load).transpose()?;
        Ok(Flags { seed: self.seed, out: self.out, threads: self.threads, overrides: self.overrides, config })
    }
}

fn init_threads(threads: Threads) {
    if let Threads::Fixed(n) = threads {
        // fails only if a pool already exists, which does not change results
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn print_report(report: &ExperimentReport) {
    for r in &report.results {
        println!(
            "  {} {:<40} statistic={} threshold={} n={}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            format_f64(r.statistic),
            format_f64(r.threshold),
            r.n_samples
        );
    }
    let failed = report.results.iter().filter(|r| !r.passed).count();
    println!("{}: {} checks, {failed} failed, {:.1}s", report.spec.name, report.results.len(), report.wall_time);
}

fn run_one(flags: &Flags, name: &str, single: bool) -> Result<bool, CliError> {
    let cfg = flags.resolve(name, single)?;
    let mut report = run_experiment(&cfg.spec, cfg.master_seed)?;
    let dir = emit_artifacts(&mut report, &cfg.out_dir)?;
    print_report(&report);
    println!("  artifacts in {}", dir.display());
    Ok(report.passed)
}

fn list() {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    for def in registry() {
        let defaults: Vec<String> = def.params.iter().map(|p| format!("{}={}", p.name, p.default)).collect();
        // a closed pipe (`gdsde list | head`) is not an error
        let _ = writeln!(out, "{}\n  {}\n  anchor: {}\n  defaults: {}", def.name, def.description, def.anchor, defaults.join(" "));
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::List => {
            list();
            Ok(true)
        }
        Command::Oracle { command: OracleCommand::Eval { name, args } } => {
            let r = evaluate_named(&name, &args)?;
            let values: Vec<String> = r.value.iter().map(|v| format_f64(*v)).collect();
            println!("value={} est_error={} method={:?}", values.join(","), format_f64(r.est_error), r.method);
            Ok(true)
        }
        Command::Run { experiment, flags } => {
            let flags = flags.resolve()?;
            flags.check_overrides(Some(&experiment))?;
            if let Some(bad) = flags.overrides.iter().find(|o| o.experiment.as_deref().is_some_and(|e| e != experiment)) {
                return Err(CliError::Usage(format!(
                    "--set {}.{}: not the experiment being run",
                    bad.experiment.as_deref().unwrap_or(""),
                    bad.key
                )));
            }
            init_threads(flags.threads());
            run_one(&flags, &experiment, true)
        }
        Command::All { flags } => {
            let flags = flags.resolve()?;
            flags.check_overrides(None)?;
            // resolve every configuration before spending time on any run
            for def in registry() {
                flags.resolve(def.name, false)?;
            }
            init_threads(flags.threads());
            let mut all_passed = true;
            for def in registry() {
                all_passed &= run_one(&flags, def.name, false)?;
            }
            println!("{}", if all_passed { "all experiments passed" } else { "some checks failed" });
            Ok(all_passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::from(exit::PASS as u8),
        Ok(false) => ExitCode::from(exit::FAIL as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
