use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use femto_share::harness::{cmd_equilibria, cmd_simulate, cmd_sweep, Overrides};
use femto_share::scenario::DEFAULT_MAX_SRCS;
use femto_share::{load_scenario, Error, Execution, Scenario};

const OUT_ENV: &str = "FEMTO_SHARE_OUT";
const DEFAULT_OUT: &str = "femto-share-out";

#[derive(Parser)]
#[command(name = "femto-share", version, about = "Femto-access sharing game simulator")]
struct Cli {
    /// Run every loop sequentially even when built with the `parallel` feature.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (default: $FEMTO_SHARE_OUT or ./femto-share-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raise the limit on the number of requesting customers.
    #[arg(long)]
    max_srcs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learning loop and certify the profile it settles on.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        p_threshold: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Build the full payoff matrix and list its pure equilibria.
    Equilibria {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Convergence iterations over a range of customer counts.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Customer counts, `a..b` (inclusive) or a single number.
        #[arg(long, default_value = "2..8", value_parser = parse_range)]
        n: RangeInclusive<usize>,
        /// Number of seeds, counted up from the scenario's first seed.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

fn parse_range(text: &str) -> Result<RangeInclusive<usize>, String> {
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    match text.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(format!("empty range {text}"));
            }
            Ok(a..=b)
        }
        None => {
            let a = parse(text)?;
            Ok(a..=a)
        }
    }
}

impl Common {
    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    fn load(&self) -> femto_share::Result<Scenario> {
        let mut scenario = load_scenario(&self.scenario)?;
        if let Some(max) = self.max_srcs {
            scenario.max_srcs = max;
            scenario.validate()?;
        }
        Ok(scenario)
    }
}

fn run(cli: Cli) -> femto_share::Result<()> {
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::Simulate {
            common,
            seed,
            b,
            max_iters,
            p_threshold,
            q,
            grid_step,
        } => {
            let scenario = common.load()?;
            let overrides = Overrides {
                seed,
                b,
                max_iters,
                p_threshold,
                q,
                grid_step,
            };
            let out = common.out_dir();
            for a in cmd_simulate(&scenario, &overrides, &out, execution)? {
                let m = &a.manifest;
                let verdict = match m.ne_certified {
                    Some(true) => "pure NE",
                    Some(false) => "NOT a pure NE",
                    None => "not converged",
                };
                println!(
                    "seed {}: {} after {} iterations ({} connections), profile {:?}: {verdict} -> {}",
                    m.seed,
                    if m.converged { "converged" } else { "stopped" },
                    m.iterations,
                    m.connections,
                    m.profile,
                    a.dir.display()
                );
            }
        }
        Command::Equilibria { common, grid_step } => {
            let scenario = common.load()?;
            let out = common.out_dir();
            let (_, summary) = cmd_equilibria(&scenario, grid_step, &out, execution)?;
            println!(
                "{}: {} profiles, {} pure equilibria -> {}",
                summary.scenario,
                summary.profiles,
                summary.pure_ne.len(),
                out.display()
            );
            for p in &summary.pure_ne {
                println!("  {p:?}");
            }
        }
        Command::Sweep { common, n, seeds } => {
            let scenario = common.load()?;
            let limit = common.max_srcs.unwrap_or(DEFAULT_MAX_SRCS);
            if *n.start() < 1 || *n.end() > limit {
                return Err(Error::Validation {
                    field: "--n".into(),
                    reason: format!("{}..{} is outside 1..{limit}", n.start(), n.end()),
                });
            }
            let mut base = scenario;
            base.max_srcs = base.max_srcs.max(*n.end());
            let first = base.seeds[0];
            let seed_list: Vec<u64> = (0..seeds).map(|k| first + k).collect();
            let ns: Vec<usize> = n.collect();
            let out = common.out_dir();
            let result = cmd_sweep(&base, &ns, &seed_list, Some(&out), execution)?;
            println!("n  converged  median_iterations  ne_certified  pure_ne");
            for r in &result.rows {
                println!(
                    "{:<2} {:>4}/{:<4} {:>18} {:>13} {:>8}",
                    r.n,
                    r.converged,
                    r.seeds,
                    r.median_iterations.map(|m| m.to_string()).unwrap_or("-".into()),
                    r.ne_certified,
                    r.pure_ne_count
                );
            }
            println!("median iterations nondecreasing in n: {}", result.nondecreasing);
        }
    }
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
