use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use treegraft_core::harness::{self, BenchConfig, VerifyConfig, CSV_HEADER};
use treegraft_core::{
    generate, parse_newick_lines, refine, rf_distance, rf_distance_symmetric, serialize_newick,
    serialize_newick_canonical, EngineKind, GenSpec, Shape, Tree, TreeError,
};

#[derive(Parser, Debug)]
#[command(name = "treegraft", version, about = "Refine a rooted tree with the compatible clusters of another")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Insert every cluster of SOURCE that is compatible with T; prints the refined tree.
    Refine {
        t: PathBuf,
        source: PathBuf,
        #[arg(long, default_value = "fast")]
        engine: EngineKind,
        /// Write key=value instrumentation to stderr.
        #[arg(long)]
        report: bool,
        /// Order children by their smallest leaf label.
        #[arg(long)]
        canonical: bool,
    },
    /// Robinson-Foulds distance |C(A) \ C(B)|.
    Rf {
        a: PathBuf,
        b: PathBuf,
        /// Report |C(A) Δ C(B)| instead.
        #[arg(long)]
        symmetric: bool,
    },
    /// Print a seeded random tree over t1..tN.
    Gen {
        #[arg(long)]
        leaves: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "yule")]
        shape: Shape,
        /// Per-edge contraction probability.
        #[arg(long = "contract", default_value_t = 0.0)]
        contract: f64,
        #[arg(long)]
        canonical: bool,
    },
    /// Cross-check all engines against the closed-form result on random instances.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long = "max-n", default_value_t = 64)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Instrumented scaling runs as CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1024,4096,16384,65536")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "fast,basic")]
        engines: Vec<EngineKind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shape of the source trees.
        #[arg(long, default_value = "yule")]
        shape: Shape,
    },
}

/// Exit codes: 1 for unreadable or malformed input, 2 for leaf-set mismatch.
fn failure(err: &anyhow::Error) -> ExitCode {
    eprintln!("treegraft: {err:#}");
    match err.downcast_ref::<TreeError>() {
        Some(TreeError::LeafSetMismatch(_)) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn read_tree(path: &Path) -> anyhow::Result<Tree> {
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut trees = parse_newick_lines(&text)?;
    match trees.len() {
        1 => Ok(trees.pop().expect("one tree")),
        0 => Err(TreeError::EmptyTree.into()),
        k => Err(TreeError::MalformedInput {
            position: 0,
            message: format!("{}: expected one tree, found {k}", path.display()),
        }
        .into()),
    }
}

fn write_tree(tree: &Tree, canonical: bool) -> String {
    if canonical {
        serialize_newick_canonical(tree)
    } else {
        serialize_newick(tree)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Refine {
            t,
            source,
            engine,
            report,
            canonical,
        } => {
            let t = read_tree(&t)?;
            let source = read_tree(&source)?;
            let (refined, stats) = refine(&t, &source, engine)?;
            writeln!(out, "{}", write_tree(&refined, canonical))?;
            if report {
                eprint!("{}", stats.to_key_values());
            }
        }
        Command::Rf { a, b, symmetric } => {
            let a = read_tree(&a)?;
            let b = read_tree(&b)?;
            let d = if symmetric {
                rf_distance_symmetric(&a, &b)?
            } else {
                rf_distance(&a, &b)?
            };
            writeln!(out, "{d}")?;
        }
        Command::Gen {
            leaves,
            seed,
            shape,
            contract,
            canonical,
        } => {
            let tree = generate(&GenSpec::new(leaves, seed, shape).with_contraction(contract))?;
            writeln!(out, "{}", write_tree(&tree, canonical))?;
        }
        Command::Verify { trials, max_n, seed } => {
            let summary = harness::verify(VerifyConfig { trials, max_n, seed })?;
            match summary.failure {
                None => writeln!(out, "ok: {} trials, all engines agree", summary.trials)?,
                Some(cex) => {
                    writeln!(out, "FAIL after {} trials", summary.trials)?;
                    writeln!(out, "{cex}")?;
                    return Ok(ExitCode::from(1));
                }
            }
        }
        Command::Bench {
            sizes,
            engines,
            seed,
            shape,
        } => {
            let rows = harness::bench(&BenchConfig {
                sizes,
                engines,
                seed,
                shape,
            })?;
            writeln!(out, "{CSV_HEADER}")?;
            for row in rows {
                writeln!(out, "{}", row.to_csv())?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => failure(&err),
    }
}
