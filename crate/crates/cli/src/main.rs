use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use permtest::branching::{build_branching, BranchingLimits, BranchingTree};
use permtest::decomposition::{grid, walk, WalkOutcome};
use permtest::experiment::{generate_far, run_experiment, ExperimentSpec, PermutationSource};
use permtest::pattern::KPattern;
use permtest::perm::{kendall_tau, Permutation};
use permtest::property::{Basis, Metric, PropertyOracle};
use permtest::rational::{format_rational, parse_rational, Rational};
use permtest::tester::{rejection_rate, repair_with_oracle, theoretical_constants};

#[derive(Parser)]
#[command(name = "permtest", version, about = "Hereditary permutation property lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct PropertyArgs {
    /// Basis file, one pattern per line
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Built-in property: `all` or `av:PATTERN,PATTERN`
    #[arg(long)]
    property: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two permutation files
    Distance {
        #[arg(long, default_value = "kendall")]
        metric: Metric,
        a: PathBuf,
        b: PathBuf,
    },
    /// Dump the K x k density grid as CSV, optionally walking a tree
    Decompose {
        perm: PathBuf,
        #[arg(long = "K")]
        columns: Option<usize>,
        #[arg(long)]
        kk: Option<usize>,
        /// Walk this branching instead; K comes from the tree
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, value_parser = rational)]
        epsilon: Option<Rational>,
        #[arg(long, value_parser = rational)]
        epsprime: Option<Rational>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the k-branching of a property as JSON
    Branching {
        #[command(flatten)]
        property: PropertyArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        mmax: usize,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[arg(long, default_value_t = 100_000)]
        node_cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theoretical constants for a given epsilon0
    Constants {
        #[arg(long, value_parser = rational)]
        epsilon0: Rational,
        /// Branching JSON built at k = ceil(10/epsilon0)
        #[arg(long)]
        tree: PathBuf,
    },
    /// Run the subpermutation tester
    Test {
        perm: PathBuf,
        #[command(flatten)]
        property: PropertyArgs,
        #[arg(long)]
        sample: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-trial CSV report
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map a permutation to a nearby member through an approximate pattern
    Repair {
        perm: PathBuf,
        #[command(flatten)]
        property: PropertyArgs,
        /// k-pattern JSON, e.g. {"k":2,"sets":[[1],[2]]}
        #[arg(long)]
        pattern: String,
        /// K-pattern JSON of column blocks
        #[arg(long)]
        blocks: String,
        #[arg(long = "K")]
        columns: usize,
        #[arg(long)]
        kk: usize,
        #[arg(long, value_parser = rational)]
        epsprime: Rational,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
    },
    /// Generate a permutation certified far from a property
    Generate {
        #[command(flatten)]
        property: PropertyArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = rational)]
        epsilon: Rational,
        #[arg(long, default_value = "kendall")]
        metric: Metric,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        attempts: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rejection rates over permutations and sample sizes, as CSV
    Experiment {
        #[command(flatten)]
        property: PropertyArgs,
        /// Permutation files
        perms: Vec<PathBuf>,
        /// identity:N, reverse:N, shifted:N:S, random:N:SEED or far:N:EPS:METRIC:SEED
        #[arg(long)]
        family: Vec<String>,
        #[arg(long, required = true)]
        sample: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn rational(s: &str) -> std::result::Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn read_perm(path: &Path) -> Result<Permutation> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.trim()
        .parse()
        .with_context(|| format!("parsing {}", path.display()))
}

fn read_tree(path: &Path) -> Result<BranchingTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

impl PropertyArgs {
    fn oracle(&self) -> Result<PropertyOracle> {
        match (&self.basis, &self.property) {
            (Some(_), Some(_)) => Err(usage("--basis and --property are mutually exclusive")),
            (Some(path), None) => {
                let text =
                    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(PropertyOracle::avoiding(Basis::parse(&text)?))
            }
            (None, Some(spec)) => Ok(spec.parse()?),
            (None, None) => Err(usage("one of --basis or --property is required")),
        }
    }
}

fn parse_pattern(flag: &str, text: &str) -> Result<KPattern> {
    serde_json::from_str(text).map_err(|e| usage(format!("{flag}: {e}")))
}

fn parse_family(spec: &str) -> Result<PermutationSource> {
    let bad = || usage(format!("--family: cannot parse {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |i: usize| -> Result<u64> { parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(bad) };
    let size = |i: usize| -> Result<usize> { num(i).map(|v| v as usize) };
    let source = match (parts[0], parts.len()) {
        ("identity", 2) => PermutationSource::Identity(size(1)?),
        ("reverse", 2) => PermutationSource::Reverse(size(1)?),
        ("shifted", 3) => PermutationSource::Shifted { n: size(1)?, shift: size(2)? },
        ("random", 3) => PermutationSource::Random { n: size(1)?, seed: num(2)? },
        ("far", 5) => PermutationSource::Far {
            n: size(1)?,
            epsilon: parse_rational(parts[2]).map_err(|_| bad())?,
            metric: parts[3].parse().map_err(|_| bad())?,
            seed: num(4)?,
            attempt_cap: 10_000,
        },
        _ => return Err(bad()),
    };
    Ok(source)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Distance { metric, a, b } => {
            let d = metric.distance(&read_perm(&a)?, &read_perm(&b)?)?;
            println!("{}", format_rational(&d));
        }
        Command::Decompose { perm, columns, kk, tree, epsilon, epsprime, out } => {
            let pi = read_perm(&perm)?;
            match tree {
                Some(path) => {
                    let tree = read_tree(&path)?;
                    let epsilon = epsilon.ok_or_else(|| usage("--epsilon is required with --tree"))?;
                    let threshold = epsprime.ok_or_else(|| usage("--epsprime is required with --tree"))?;
                    let w = walk(&pi, &tree, &epsilon, &threshold)?;
                    let mut text = String::new();
                    match &w.outcome {
                        WalkOutcome::Witnessing { pattern, blocks, order, indices } => {
                            text += &format!("witnessing {pattern} order {order}\nblocks {blocks}\n");
                            let cols: Vec<String> = indices.iter().map(usize::to_string).collect();
                            text += &format!("columns {}\n", cols.join(" "));
                        }
                        WalkOutcome::Approximate { pattern, blocks, slack } => {
                            text += &format!("approximate {pattern} slack {slack}\nblocks {blocks}\n");
                        }
                    }
                    emit(out.as_deref(), &text)?;
                }
                None => {
                    let columns = columns.ok_or_else(|| usage("--K is required"))?;
                    let kk = kk.ok_or_else(|| usage("--kk is required"))?;
                    emit(out.as_deref(), &grid(&pi, columns, kk)?.to_csv())?;
                }
            }
        }
        Command::Branching { property, k, mmax, budget, node_cap, out } => {
            let oracle = property.oracle()?;
            let limits = BranchingLimits { m_max: mmax, node_budget: budget, node_cap };
            let tree = build_branching(&oracle, k, limits)?;
            let json = serde_json::to_string_pretty(&tree)? + "\n";
            if out.is_some() {
                println!(
                    "nodes {} depth {} root_weight {}",
                    tree.node_count(),
                    tree.depth,
                    tree.root_weight
                );
            }
            emit(out.as_deref(), &json)?;
        }
        Command::Constants { epsilon0, tree } => {
            let tree = read_tree(&tree)?;
            println!("{}", theoretical_constants(&epsilon0, &tree)?);
        }
        Command::Test { perm, property, sample, trials, seed, out } => {
            let pi = read_perm(&perm)?;
            let report = rejection_rate(&pi, &property.oracle()?, sample, trials, seed)?;
            if let Some(path) = &out {
                emit(Some(path), &report.to_csv())?;
            }
            if trials == 1 {
                println!("{}", report.verdicts[0]);
            } else {
                println!(
                    "rejections {}/{} rate {}",
                    report.rejections,
                    report.trials,
                    format_rational(&report.rate)
                );
            }
        }
        Command::Repair { perm, property, pattern, blocks, columns, kk, epsprime, budget } => {
            let pi = read_perm(&perm)?;
            let a = parse_pattern("--pattern", &pattern)?;
            let b = parse_pattern("--blocks", &blocks)?;
            let oracle = property.oracle()?;
            let r = repair_with_oracle(&pi, &a, &b, &oracle, columns, kk, &epsprime, budget)?;
            let z: Vec<String> = r.z.iter().map(usize::to_string).collect();
            println!("z {}", z.join(" "));
            println!("repaired {}", r.repaired);
            println!("kendall {}", format_rational(&kendall_tau(&pi, &r.repaired)?));
        }
        Command::Generate { property, n, epsilon, metric, seed, attempts, out } => {
            let pi = generate_far(n, &epsilon, &property.oracle()?, metric, seed, attempts)?;
            emit(out.as_deref(), &format!("{pi}\n"))?;
        }
        Command::Experiment { property, perms, family, sample, trials, seed, out } => {
            let mut sources: Vec<PermutationSource> =
                perms.into_iter().map(PermutationSource::File).collect();
            for f in &family {
                sources.push(parse_family(f)?);
            }
            if sources.is_empty() {
                return Err(usage("give permutation files or at least one --family"));
            }
            let spec = ExperimentSpec {
                oracle: property.oracle()?,
                sources,
                sample_sizes: sample,
                trials,
                seed,
                out: None,
            };
            emit(out.as_deref(), &run_experiment(&spec)?.to_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

