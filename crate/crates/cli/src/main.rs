use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tisim_core::experiments::{
    build_scenario, parse_basis, run_exact, run_mc, verify_reference, ExperimentError, Scenario, SCENARIOS,
};
use tisim_core::network::{from_json, to_json};
use tisim_core::path::{amplitude, evaluate, parse, sum_amplitudes};
use tisim_core::{builtin, Complex, Network};

const USAGE: u8 = 2;
const VERIFY_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "tisim", version, about = "Offer/confirmation wave simulator for interferometer gedanken experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the builtin scenarios.
    List,
    /// Run a scenario exactly or by Monte Carlo sampling.
    Run(RunArgs),
    /// Recompute the reference values and print one line per check.
    Verify,
    /// Evaluate a path-notation expression on a network.
    Path {
        expr: String,
        /// Network JSON file; the two-atom builtin network by default.
        #[arg(long)]
        network: Option<String>,
        /// Arm alias such as A=u; repeatable.
        #[arg(long = "alias", value_name = "NAME=SYMBOL")]
        aliases: Vec<String>,
    },
    /// Print a scenario's network as JSON, in the format `--network` reads.
    Network { scenario: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct RunArgs {
    scenario: String,
    #[arg(long, conflicts_with_all = ["trials", "seed", "workers"])]
    exact: bool,
    /// Monte Carlo trial count; exact mode when absent.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// z, y or bloch:THETA,PHI in degrees.
    #[arg(long)]
    atom_basis: Option<String>,
    /// Detector to condition the derived statistics on, or none.
    #[arg(long)]
    post_select: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    out: Format,
    #[arg(long)]
    network: Option<String>,
    /// Scenario parameter; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

fn pairs(items: &[String], what: &str) -> Result<BTreeMap<String, String>, ExperimentError> {
    items
        .iter()
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
            _ => Err(ExperimentError::Usage(format!("{what} must look like KEY=VALUE, not `{kv}`"))),
        })
        .collect()
}

fn load_network(path: &str) -> Result<Network, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::Usage(format!("cannot read {path}: {e}")))?;
    Ok(from_json(&text)?)
}

fn scenario(args: &RunArgs) -> Result<Scenario, ExperimentError> {
    let mut s = build_scenario(&args.scenario, &pairs(&args.params, "--param")?)?;
    if let Some(file) = &args.network {
        s = s.with_network(load_network(file)?)?;
    }
    if let Some(b) = &args.atom_basis {
        s = s.with_basis(parse_basis(b)?);
    }
    match args.post_select.as_deref() {
        None => Ok(s),
        Some("none") => s.with_post_selection(None),
        Some(d) => {
            let id = s.network.detectors().map(|(id, _)| id).find(|id| id.eq_ignore_ascii_case(d)).unwrap_or(d).to_string();
            s.with_post_selection(Some(&id))
        }
    }
}

fn run(args: RunArgs) -> Result<(), ExperimentError> {
    let s = scenario(&args)?;
    let report = match args.trials {
        None => run_exact(&s)?,
        Some(trials) => {
            let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            run_mc(&s, trials, args.seed, workers)?
        }
    };
    match args.out {
        Format::Json => emit(&format!("{}\n", report.to_json())),
        Format::Csv => emit(&report.to_csv()),
    }
    Ok(())
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn show(z: Complex) -> String {
    format!("{:.12}{:+.12}i (modulus {:.12})", z.re, z.im, z.norm())
}

fn path(expr: &str, network: Option<&str>, aliases: &[String]) -> Result<(), ExperimentError> {
    let mut n = match network {
        Some(file) => load_network(file)?,
        None => builtin::liar(),
    };
    let mut merged = n.aliases().clone();
    merged.extend(pairs(aliases, "--alias")?);
    n = n.with_aliases(merged);
    let e = parse(expr)?;
    println!("{e}");
    for t in &e.terms {
        println!("  {t}: {}", show(amplitude(t, &n)?));
    }
    println!("sum: {}", show(sum_amplitudes(&e, &n)?));
    match evaluate(&e, &n) {
        Ok(z) => println!("in context: {}", show(z)),
        Err(err) => println!("in context: {err}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            for (name, about) in SCENARIOS {
                println!("{name:<14} {about}");
            }
            Ok(())
        }
        Command::Run(args) => run(args),
        Command::Verify => match verify_reference() {
            Ok(checks) => {
                for c in &checks {
                    println!("{c}");
                }
                let failed = checks.iter().filter(|c| !c.pass).count();
                println!("{} checks, {failed} failed", checks.len());
                if failed > 0 {
                    return ExitCode::from(VERIFY_FAILED);
                }
                Ok(())
            }
            Err(e) => Err(e),
        },
        Command::Path { expr, network, aliases } => path(&expr, network.as_deref(), &aliases),
        Command::Network { scenario } => {
            build_scenario(&scenario, &BTreeMap::new()).map(|s| emit(&format!("{}\n", to_json(&s.network))))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tisim: {e}");
            ExitCode::from(USAGE)
        }
    }
}
