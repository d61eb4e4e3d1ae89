use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pct_harness::{load_config_text, render_sweep, run_scenario, scenarios, sweep, write_run, HarnessError, ScenarioConfig, SeedRange};

#[derive(Parser)]
#[command(name = "pct", version, about = "Run perceptual control scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace and summary.
    Run {
        /// Config file, or the name of a bundled scenario.
        config: String,
        /// Run a single seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Half-open seed range, `START..END`.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: Option<SeedRange>,
        #[arg(long, env = "PCT_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario once per value of one parameter and print a CSV table.
    Sweep {
        config: String,
        /// Dotted path into the config, such as `world.substitution_prob`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// List the bundled scenarios.
    List,
}

fn parse_seed_range(s: &str) -> Result<SeedRange, String> {
    let (a, b) = s.split_once("..").ok_or("expected START..END")?;
    let start: u64 = a.parse().map_err(|e| format!("{a}: {e}"))?;
    let end: u64 = b.parse().map_err(|e| format!("{b}: {e}"))?;
    if end <= start {
        return Err(format!("empty seed range {s}"));
    }
    Ok(SeedRange { start, count: end - start })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(pass)` where `pass` is whether every expectation held.
fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Run { config, seed, seeds, out } => {
            let text = load_config_text(&config)?;
            let mut cfg = ScenarioConfig::parse(&text)?;
            if let Some(s) = seed {
                cfg.seeds = SeedRange { start: s, count: 1 };
            }
            if let Some(r) = seeds {
                cfg.seeds = r;
            }
            let result = run_scenario(&cfg)?;
            let (trace, summary) = write_run(&out, &cfg.name, &result)?;
            for e in &result.summary.expectations {
                let actual = e.actual.map_or("missing".to_string(), pct_harness::trace::format_value);
                println!(
                    "{} {} {:?} {:?} {} (actual {actual})",
                    if e.pass { "PASS" } else { "FAIL" },
                    e.metric,
                    e.stat,
                    e.op,
                    e.value
                );
            }
            println!("trace: {}", trace.display());
            println!("summary: {}", summary.display());
            Ok(result.summary.pass)
        }
        Command::Sweep { config, param, values } => {
            let text = load_config_text(&config)?;
            let results = sweep(&text, &param, &values)?;
            print!("{}", render_sweep(&param, &results));
            Ok(results.iter().all(|(_, s)| s.pass))
        }
        Command::List => {
            for (name, description) in scenarios::list() {
                println!("{name:32} {description}");
            }
            Ok(true)
        }
    }
}
