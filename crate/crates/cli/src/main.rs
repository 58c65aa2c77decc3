//! `cardauct`: run mechanisms, dump sigma tables, cross-check against brute
//! force, explore equilibria, generate instances and time the range engine.
//!
//! Exit codes: 0 ok, 1 input error, 2 budget exceeded, 3 verification failed.

mod bench;
mod verify;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cardauct_core::equilibrium::{self, BidGrid, BidderMode, LabConfig};
use cardauct_core::instances::{self, NamedInstance, RandomSpec};
use cardauct_core::io::{self as cio, Format};
use cardauct_core::mechanisms::{self, MechanismConfig};
use cardauct_core::oracle::OracleBudget;
use cardauct_core::{Bid, BidderId, Error, MechanismKind, Money, TieK};
use clap::{Args, Parser, Subcommand};
use num_rational::Ratio;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "cardauct", version, about = "Auctions with cardinality-constrained bidders")]
struct Cli {
    /// Tie rule between equally good numbers of copies.
    #[arg(long, global = true, default_value = "largest", value_name = "smallest|largest")]
    tie_k: TieK,

    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one mechanism on a bid file.
    Run {
        #[arg(long, short)]
        mechanism: MechanismKind,
        #[arg(long, short)]
        input: PathBuf,
        /// Number of ordered copies (prefix mechanisms only).
        #[arg(long)]
        items: Option<usize>,
    },
    /// Dump Sigma_k, i*_k and k* for a bid file.
    Sigma {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Cross-check the fast engine against brute-force oracles.
    Verify {
        #[arg(long, short)]
        input: PathBuf,
        /// Copies for the prefix checks; defaults to the number of bidders.
        #[arg(long)]
        items: Option<usize>,
    },
    /// List all pure equilibria on a bid grid.
    Equilibria(LabArgs),
    /// Price of anarchy on a bid grid, with the worst equilibrium as witness.
    Poa(LabArgs),
    /// Worst equilibrium revenue against truthful VCG revenue.
    Revcmp(LabArgs),
    /// Write a named or seeded random instance as a bid file.
    Gen {
        #[arg(long, conflicts_with = "random", required_unless_present = "random")]
        name: Option<NamedInstance>,
        /// e.g. `n=12,seed=7,step=5`; also `levels=`, `values=uniform|exp`, `caps=uniform|geom`.
        #[arg(long)]
        random: Option<RandomSpec>,
        /// Write true valuations instead of the submitted bids (they differ only for
        /// deviated examples).
        #[arg(long)]
        valuations: bool,
    },
    /// Time range-structure build plus sigma table over growing sizes.
    Bench {
        /// Comma-separated, ascending.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Largest size also timed with the quadratic reference table.
        #[arg(long, default_value_t = 4000)]
        naive_max: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct LabArgs {
    #[arg(long)]
    valuations: PathBuf,
    #[arg(long, short)]
    mechanism: MechanismKind,
    #[arg(long, default_value = "conservative")]
    mode: BidderMode,
    /// Grid spacing for bids.
    #[arg(long)]
    step: Money,
    /// Highest grid bid as a multiple of the largest value, e.g. `2` or `3/2`.
    #[arg(long, default_value = "2")]
    max_mult: Ratio<i64>,
    /// Reject valuations that are off the grid instead of flooring them.
    #[arg(long)]
    strict_grid: bool,
    /// Also let bidders misreport their caps.
    #[arg(long)]
    caps: bool,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

/// A failed run, mapped onto an exit code.
enum Failure {
    Core(Error),
    Io(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(3),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Budget { .. }) { 2 } else { 1 })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let out = cli.output.as_deref();
    let tie = cli.tie_k;
    match cli.command {
        Command::Run { mechanism, input, items } => {
            let bids = cio::read_bids_path(&input)?;
            let cfg = MechanismConfig { tie, items };
            let outcome = mechanisms::run(mechanism, &bids, &cfg)?;
            let winners = outcome
                .allocation
                .winners
                .iter()
                .map(|&id| WinnerRow {
                    id,
                    bid: bids.bid_of(id).expect("winner submitted a bid").amount,
                    price: outcome.prices[&id],
                    position: outcome.positions.as_ref().and(outcome.position_of(id)),
                })
                .collect();
            let report = RunReport {
                mechanism: mechanism.as_str(),
                k: outcome.allocation.k,
                winners,
                efficiency: outcome.efficiency,
                revenue: outcome.revenue,
            };
            emit(out, &report)
        }
        Command::Sigma { input } => {
            let bids = cio::read_bids_path(&input)?;
            emit(out, &cardauct_core::sigma_table(&bids, tie)?)
        }
        Command::Verify { input, items } => {
            let bids = cio::read_bids_path(&input)?;
            let budget = OracleBudget::from_env()?;
            let report = verify::verify(&bids, tie, items, budget)?;
            emit(out, &report)?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
        Command::Equilibria(args) => {
            let (vals, cfg) = lab(&args, tie)?;
            let eqs = equilibrium::enumerate_equilibria(&vals, &cfg)?;
            let report = EquilibriaReport {
                mechanism: cfg.mechanism.as_str(),
                mode: cfg.mode,
                grid: cfg.grid,
                enumerate_caps: cfg.enumerate_caps,
                count: eqs.len(),
                equilibria: eqs,
            };
            emit(out, &report)
        }
        Command::Poa(args) => {
            let (vals, cfg) = lab(&args, tie)?;
            emit(out, &equilibrium::poa(&vals, &cfg)?)
        }
        Command::Revcmp(args) => {
            let (vals, cfg) = lab(&args, tie)?;
            emit(out, &equilibrium::revenue_comparison(&vals, &cfg)?)
        }
        Command::Gen { name, random, valuations } => {
            let (vals, bids): (Vec<_>, Vec<Bid>) = match (name, random) {
                (Some(name), _) => {
                    let named = instances::generate(name);
                    (named.valuations, named.bids.bids().to_vec())
                }
                (None, Some(spec)) => {
                    let vals = instances::random_valuations(&spec)?;
                    let bids = vals.iter().map(|v| v.truthful_bid()).collect();
                    (vals, bids)
                }
                (None, None) => unreachable!("clap requires one of --name, --random"),
            };
            let rows = if valuations { vals.iter().map(|v| v.truthful_bid()).collect() } else { bids };
            let format = out.map(Format::from_path).unwrap_or(Format::Csv);
            let mut buf = Vec::new();
            cio::write_bids(&mut buf, &rows, format)?;
            write_out(out, &buf)
        }
        Command::Bench { sizes, seed, reps, naive_max, threads } => {
            let report = bench::bench(&sizes, seed, reps, naive_max, threads, tie)?;
            emit(out, &report)
        }
    }
}

fn lab(args: &LabArgs, tie: TieK) -> Result<(Vec<cardauct_core::Valuation>, LabConfig), Failure> {
    let vals = cio::read_valuations_path(&args.valuations)?;
    let mut grid = BidGrid::new(args.step, args.max_mult)?;
    if args.strict_grid {
        grid = grid.require_values();
    }
    let mut cfg = LabConfig::new(args.mechanism, grid, args.mode);
    cfg.mech = MechanismConfig { tie, items: args.items };
    cfg.enumerate_caps = args.caps;
    cfg.threads = args.threads;
    Ok((vals, cfg))
}

#[derive(Serialize)]
struct WinnerRow {
    id: BidderId,
    bid: Money,
    price: Money,
    #[serde(skip_serializing_if = "Option::is_none")]
    position: Option<usize>,
}

#[derive(Serialize)]
struct RunReport {
    mechanism: &'static str,
    k: usize,
    winners: Vec<WinnerRow>,
    efficiency: Money,
    revenue: Money,
}

#[derive(Serialize)]
struct EquilibriaReport {
    mechanism: &'static str,
    mode: BidderMode,
    grid: BidGrid,
    enumerate_caps: bool,
    count: usize,
    equilibria: Vec<equilibrium::EquilibriumReport>,
}

fn emit<T: Serialize>(out: Option<&Path>, report: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    write_out(out, text.as_bytes())
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
