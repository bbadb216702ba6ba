use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fractiso::blowup::{blowup, BlowupPlan};
use fractiso::io::{self, DEFAULT_MAX_CLASSES};
use fractiso::quotient::quotient_kernel;
use fractiso::refinement::{refinement_fixpoint_with, RefineOptions};
use fractiso::report::{run_fiso, FisoOptions, Oracle, TraceJson, DEFAULT_WITNESS_BOUND};
use fractiso::trees::{enumerate_free_trees, tree_density};
use fractiso::{graph_to_graphon, RootedTree, StepKernel};

/// Exact fractional isomorphism of step graphons and finite graphs.
///
/// Kernel inputs are JSON kernel files; a file whose first non-blank
/// character is not `{` is read as an edge list and converted on the fly.
/// FRACTISO_MAX_CLASSES caps the number of classes accepted (default 512).
#[derive(Parser)]
#[command(name = "fractiso", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an edge list (header "n <count>", then 0-based "u v" lines)
    /// to a kernel file.
    Convert {
        input: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Decide fractional isomorphism. Exit 0 if equivalent, 1 if not, 2 on
    /// error or when a cross-check contradicts the verdict.
    Fiso {
        first: PathBuf,
        second: PathBuf,
        /// Largest tree (in vertices) tried by the witness search.
        #[arg(long, default_value_t = DEFAULT_WITNESS_BOUND)]
        witness_bound: usize,
        /// Cross-checks to skip: quotient, intertwiner, witness.
        #[arg(long, value_delimiter = ',')]
        skip: Vec<String>,
        /// Run the cross-checks concurrently.
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Print the color refinement trace of a kernel.
    Refine {
        input: PathBuf,
        /// Also split on in-degrees (only matters for asymmetric kernels).
        #[arg(long)]
        in_degrees: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Write the quotient of a kernel by its refinement fixpoint.
    Quotient {
        input: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Print exact tree densities.
    Treedensity {
        input: PathBuf,
        /// A tree in parentheses form, e.g. "(()())".
        #[arg(long, conflicts_with = "all_up_to", required_unless_present = "all_up_to")]
        tree: Option<String>,
        /// Every free tree with at most this many vertices, one per line.
        #[arg(long)]
        all_up_to: Option<usize>,
    },
    /// Build a biregular blowup, from a plan file or from a kernel file with
    /// --splits and --seed.
    Blowup {
        input: PathBuf,
        /// Comma-separated split counts; treats the input as the base kernel.
        #[arg(long, value_delimiter = ',', requires = "seed")]
        splits: Vec<usize>,
        /// Master seed for the block seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of random permutations mixed into each block.
        #[arg(long)]
        permutations: Option<usize>,
        /// Also write the plan used.
        #[arg(long)]
        plan_out: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn max_classes() -> Result<usize> {
    match std::env::var("FRACTISO_MAX_CLASSES") {
        Ok(value) => value
            .trim()
            .parse()
            .with_context(|| format!("FRACTISO_MAX_CLASSES={value:?} is not a count")),
        Err(_) => Ok(DEFAULT_MAX_CLASSES),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_kernel(path: &Path) -> Result<StepKernel> {
    let text = read(path)?;
    let limit = max_classes()?;
    let kernel = if text.trim_start().starts_with('{') {
        io::parse_kernel_with_limit(&text, limit)
    } else {
        io::parse_edge_list(&text).and_then(|g| {
            if g.vertex_count() > limit {
                return Err(fractiso::Error::TooLarge(format!(
                    "{} vertices exceeds the limit of {limit}",
                    g.vertex_count()
                )));
            }
            graph_to_graphon(&g)
        })
    };
    kernel.with_context(|| format!("loading {}", path.display()))
}

#[derive(Serialize)]
struct RefineReport {
    trace: TraceJson,
    fixpoint: Vec<usize>,
    asymmetric: bool,
    in_degrees: bool,
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Convert { input, out } => {
            let graph = io::parse_edge_list(&read(&input)?)
                .with_context(|| format!("loading {}", input.display()))?;
            out.emit(&io::kernel_to_json(&graph_to_graphon(&graph)?))?;
        }
        Command::Fiso {
            first,
            second,
            witness_bound,
            skip,
            parallel,
            out,
        } => {
            let skip = skip
                .iter()
                .map(|s| s.trim().parse::<Oracle>())
                .collect::<fractiso::Result<Vec<_>>>()?;
            let (w, u) = (load_kernel(&first)?, load_kernel(&second)?);
            let options = FisoOptions {
                witness_bound,
                skip,
                parallel,
            };
            let report = run_fiso(&w, &u, &options)?;
            out.emit(&report.to_json())?;
            return Ok(if report.fractionally_isomorphic {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
        Command::Refine { input, in_degrees, out } => {
            let kernel = load_kernel(&input)?;
            let trace = refinement_fixpoint_with(&kernel, RefineOptions { in_degrees });
            let report = RefineReport {
                fixpoint: trace.fixpoint().as_slice().to_vec(),
                trace: TraceJson::from_trace(&trace),
                asymmetric: trace.asymmetric,
                in_degrees,
            };
            out.emit(&(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Command::Quotient { input, out } => {
            let kernel = load_kernel(&input)?;
            let trace = fractiso::refinement_fixpoint(&kernel);
            out.emit(&io::quotient_to_json(&quotient_kernel(&kernel, trace.fixpoint())?))?;
        }
        Command::Treedensity { input, tree, all_up_to } => {
            let kernel = load_kernel(&input)?;
            if let Some(text) = tree {
                let tree: RootedTree = text.parse()?;
                println!("{}", io::format_ratio(&tree_density(&kernel, &tree)?));
            } else if let Some(n) = all_up_to {
                for tree in enumerate_free_trees(n)? {
                    println!("{} {}", tree, io::format_ratio(&tree_density(&kernel, &tree)?));
                }
            }
        }
        Command::Blowup {
            input,
            splits,
            seed,
            permutations,
            plan_out,
            out,
        } => {
            let mut plan = if splits.is_empty() {
                if seed.is_some() {
                    bail!("--seed needs --splits; plan files carry their own seeds");
                }
                io::parse_plan_with_limit(&read(&input)?, max_classes()?)
                    .with_context(|| format!("loading {}", input.display()))?
            } else {
                let total: usize = splits.iter().sum();
                if total > max_classes()? {
                    bail!("blowup would have {total} classes, above FRACTISO_MAX_CLASSES");
                }
                BlowupPlan::seeded(load_kernel(&input)?, splits, seed.expect("clap requires seed"))?
            };
            if let Some(p) = permutations {
                plan.permutations = p;
            }
            if let Some(path) = plan_out {
                fs::write(&path, io::plan_to_json(&plan))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            out.emit(&io::kernel_to_json(&blowup(&plan)?))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
