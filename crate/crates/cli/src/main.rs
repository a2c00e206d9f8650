use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use smi_core::bench::{generate, run_bench, BenchRow, BenchSpec, Family};
use smi_core::engine::{check_search_bound, dump_pieces, probability, solve, EngineError, SearchStats, SolveOptions, SEARCH_BOUND_CONSTANT};
use smi_core::exact::{format_exact, format_significant, parse_rational, to_f64, Rational};
use smi_core::oracle::mc_wmi;
use smi_core::reduce::WeightStrategy;
use smi_core::theory::{parse_problem, parse_query, Problem, PseudoTreeStrategy};

/// Exact weighted model integration for SMT(LRA) problems with tree primal graphs.
#[derive(Parser)]
#[command(name = "smi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the weighted model integral of a problem file.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Print search counters and the search-space bound.
        #[arg(long)]
        stats: bool,
        /// Print the piece set of every primal-tree node.
        #[arg(long)]
        dump_pieces: bool,
    },
    /// Conditional probability of a query given the problem.
    Prob {
        file: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Write a benchmark instance.
    Gen {
        family: Family,
        #[arg(long)]
        n: usize,
        /// Square-footage slack between neighbouring houses.
        #[arg(long, value_parser = rational_arg)]
        offset: Option<Rational>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Monte-Carlo estimate of the weighted model integral.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Time a benchmark family over several sizes and write CSV rows.
    Bench {
        family: Family,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        n_list: Vec<usize>,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeArg {
    Rooted,
    Balanced,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Expand,
    Selector,
}

#[derive(clap::Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "rooted")]
    pseudo_tree: TreeArg,
    #[arg(long, value_enum, default_value = "on")]
    cache: Switch,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
    /// How polynomial weights are reduced to unweighted integration.
    #[arg(long, value_enum, default_value = "expand")]
    strategy: StrategyArg,
}

impl EngineArgs {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            pseudo_tree: match self.pseudo_tree {
                TreeArg::Rooted => PseudoTreeStrategy::Rooted,
                TreeArg::Balanced => PseudoTreeStrategy::Balanced,
            },
            cache: matches!(self.cache, Switch::On),
            threads: self.threads as usize,
            strategy: match self.strategy {
                StrategyArg::Expand => WeightStrategy::Expand,
                StrategyArg::Selector => WeightStrategy::Selector,
            },
            ..SolveOptions::default()
        }
    }
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Display) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = if matches!(e, EngineError::NotATree { .. }) { 3 } else { 2 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Problem, Failure> {
    parse_problem(&read(path)?).map_err(|e| Failure::input(format!("{}:{e}", path.display())))
}

fn print_value(value: &Rational) {
    println!("exact: {}", format_exact(value));
    println!("approx: {}", format_significant(to_f64(value), 12));
}

fn print_stats(stats: &SearchStats) {
    println!("nodes_expanded: {}", stats.nodes_expanded);
    println!("instantiations: {}", stats.instantiations);
    println!("cache_hits: {}", stats.cache_hits);
    println!("cache_misses: {}", stats.cache_misses);
    println!("summands: {}", stats.summands);
    println!("n: {} m: {} h_p: {} h_t: {} leaves: {}", stats.n, stats.m, stats.h_p, stats.h_t, stats.leaves);
    println!(
        "search_bound: {} ({})",
        stats.search_bound(SEARCH_BOUND_CONSTANT),
        if check_search_bound(stats, SEARCH_BOUND_CONSTANT) { "within" } else { "exceeded" }
    );
}

fn write_csv(path: &Path, rows: &[BenchRow]) -> Result<(), Box<dyn std::error::Error>> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(BenchRow::HEADER)?;
    for row in rows {
        writer.write_record(row.record())?;
    }
    writer.flush()?;
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve {
            file,
            engine,
            stats,
            dump_pieces: dump,
        } => {
            let problem = load(&file)?;
            let options = engine.options();
            if dump {
                print!("{}", dump_pieces(&problem, &options)?);
            }
            let solution = solve(&problem, &options)?;
            print_value(&solution.value);
            if stats {
                print_stats(&solution.stats);
            }
        }
        Command::Prob { file, query, engine } => {
            let problem = load(&file)?;
            let clauses = parse_query(&read(&query)?, &problem).map_err(|e| Failure::input(format!("{}:{e}", query.display())))?;
            let result = probability(&problem, &clauses, &engine.options())?;
            print_value(&result.value);
        }
        Command::Gen {
            family,
            n,
            offset,
            output,
        } => {
            let mut spec = BenchSpec::new(family, n);
            if let Some(offset) = offset {
                spec.offset = offset;
            }
            let text = generate(&spec).map_err(Failure::input)?;
            std::fs::write(&output, text).map_err(|e| Failure::input(format!("{}: {e}", output.display())))?;
        }
        Command::Oracle { file, samples, seed } => {
            let problem = load(&file)?;
            let estimate = mc_wmi(&problem, samples, seed).map_err(Failure::input)?;
            println!("estimate: {}", format_significant(estimate.mean, 12));
            println!("std_error: {}", format_significant(estimate.std_error, 6));
            println!("samples: {}", estimate.samples);
            println!("seed: {}", estimate.seed);
        }
        Command::Bench {
            family,
            n_list,
            csv,
            repeats,
            engine,
        } => {
            if let Some(bad) = n_list.iter().find(|n| **n == 0) {
                return Err(Failure::input(format!("invalid size {bad}: n must be at least 1")));
            }
            let rows = run_bench(family, &n_list, repeats, &engine.options())?;
            write_csv(&csv, &rows).map_err(|e| Failure::input(format!("{}: {e}", csv.display())))?;
            for row in &rows {
                println!("{}", row.record().join(","));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
