use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use general_caching::format::{parse_instance_with_rest, parse_service, write_service};
use general_caching::harness::{self, corpus_graph, max_independent_set, round_trip, run_corpus};
use general_caching::model::{savings, validate_service, Instance, Policy};
use general_caching::properties::{check_properties, construct_service_from_is, crossing_audit, diagnostics, extract_is};
use general_caching::reductions::{default_h, reduce, Model, ReductionOutput};
use general_caching::solver::{export_interval_packing, solve_brute_force, solve_exact_with, SolveOptions, DEFAULT_BUDGET};
use general_caching::Graph;

#[derive(Parser)]
#[command(name = "gcache", version, about = "Offline general caching solver and reduction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ReductionArgs {
    /// Graph file (`n m` then `u v` lines) or a built-in name such as K3 or cherry.
    #[arg(long)]
    graph: String,
    #[arg(long, default_value = "fault")]
    model: Model,
    /// Groups per edge; defaults to 6mn + 3n + 1. Ignored by the simple model.
    #[arg(long = "H")]
    h: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reduction instance (followed by its roles section).
    Gen {
        #[command(flatten)]
        reduction: ReductionArgs,
        #[arg(long, default_value = "optional")]
        policy: Policy,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance file exactly.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Use exhaustive enumeration instead of the sweep.
        #[arg(long)]
        brute_force: bool,
        /// Also write the equivalent interval-packing instance here.
        #[arg(long)]
        packing: Option<PathBuf>,
        /// Where to write the optimal service.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the six structural properties of a generated instance.
    VerifyProperties {
        #[command(flatten)]
        reduction: ReductionArgs,
    },
    /// Build the service encoding an independent set.
    Construct {
        #[command(flatten)]
        reduction: ReductionArgs,
        /// Comma-separated vertices; defaults to a maximum independent set.
        #[arg(long, value_delimiter = ',')]
        set: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read the vertex set encoded by a service.
    Extract {
        #[command(flatten)]
        reduction: ReductionArgs,
        #[arg(long)]
        service: PathBuf,
    },
    /// Per-block diagnostics of a service as CSV.
    Diagnose {
        #[command(flatten)]
        reduction: ReductionArgs,
        #[arg(long)]
        service: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum independent set of a graph.
    OracleIs {
        #[arg(long)]
        graph: String,
    },
    /// Reduce, solve and compare with the independent-set oracle.
    Roundtrip {
        #[command(flatten)]
        reduction: ReductionArgs,
        #[arg(long, default_value = "optional")]
        policy: Policy,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Round trips over the built-in corpus; CSV to --out or stdout, table to stderr.
    Corpus {
        /// Restrict to these corpus graphs.
        #[arg(long = "graph")]
        graphs: Vec<String>,
        #[arg(long = "model", default_values = ["simple"])]
        models: Vec<Model>,
        #[arg(long, default_value = "optional")]
        policy: Policy,
        #[arg(long = "H")]
        h: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Write `-` in the seconds column for reproducible output.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_graph(spec: &str) -> Result<Graph> {
    if let Some(g) = corpus_graph(spec) {
        return Ok(g);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading graph `{spec}`"))?;
    Ok(Graph::parse(&text)?)
}

fn load_reduction(args: &ReductionArgs) -> Result<ReductionOutput> {
    let graph = load_graph(&args.graph)?;
    let h = args.h.unwrap_or_else(|| default_h(&graph));
    Ok(reduce(&graph, args.model, h)?)
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (instance, _) = parse_instance_with_rest(&text)?;
    Ok(instance)
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

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen { reduction, policy, out } => {
            let output = load_reduction(&reduction)?;
            let text = match policy {
                Policy::Optional => output.to_text(),
                Policy::Forced => general_caching::format::write_instance(&output.to_forced()?),
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Solve {
            instance,
            budget,
            brute_force,
            packing,
            out,
        } => {
            let instance = load_instance(&instance)?;
            if let Some(path) = packing {
                fs::write(&path, export_interval_packing(&instance)?.to_text())?;
            }
            let result = if brute_force {
                solve_brute_force(&instance)?
            } else {
                solve_exact_with(&instance, SolveOptions { budget })?
            };
            eprintln!(
                "optimal savings {} ({} states, {} transitions)",
                result.optimal_savings, result.explored.states, result.explored.transitions
            );
            emit(out.as_deref(), &write_service(&instance, &result.witness))?;
        }
        Command::VerifyProperties { reduction } => {
            let report = check_properties(&load_reduction(&reduction)?)?;
            print!("{}", report.to_text());
            return Ok(report.all_pass());
        }
        Command::Construct { reduction, set, out } => {
            let output = load_reduction(&reduction)?;
            let set = match set {
                Some(s) => s,
                None => max_independent_set(&output.graph)?.1,
            };
            let service = construct_service_from_is(&output, &set)?;
            let report = validate_service(&output.instance, &service)?;
            if !report.is_valid() {
                bail!("constructed service is invalid at positions {:?}", report.violating_positions());
            }
            eprintln!("savings {}", savings(&output.instance, &service)?);
            emit(out.as_deref(), &write_service(&output.instance, &service))?;
        }
        Command::Extract { reduction, service } => {
            let output = load_reduction(&reduction)?;
            let service = parse_service(&output.instance, &fs::read_to_string(&service)?)?;
            let set = extract_is(&output, &service);
            let list: Vec<String> = set.iter().map(usize::to_string).collect();
            println!("{}", list.join(","));
        }
        Command::Diagnose { reduction, service, out } => {
            let output = load_reduction(&reduction)?;
            let service = parse_service(&output.instance, &fs::read_to_string(&service)?)?;
            let diag = diagnostics(&output, &service)?;
            let crossings = crossing_audit(&output, &service);
            eprintln!(
                "sum delta (B != I) {}, max epsilon {}, {} boundary crossings",
                diag.delta_sum(),
                diag.max_epsilon(),
                crossings.len()
            );
            emit(out.as_deref(), &diag.to_csv())?;
        }
        Command::OracleIs { graph } => {
            let (k, set) = max_independent_set(&load_graph(&graph)?)?;
            let list: Vec<String> = set.iter().map(usize::to_string).collect();
            println!("{k} {}", list.join(","));
        }
        Command::Roundtrip {
            reduction,
            policy,
            budget,
        } => {
            let graph = load_graph(&reduction.graph)?;
            let report = round_trip(&reduction.graph, &graph, reduction.model, policy, reduction.h, budget)?;
            print!("{}", harness::to_table(std::slice::from_ref(&report)));
            return Ok(report.verdict != harness::Verdict::Fail);
        }
        Command::Corpus {
            graphs,
            models,
            policy,
            h,
            budget,
            no_timing,
            out,
        } => {
            let selected: Vec<(String, Graph)> = if graphs.is_empty() {
                harness::corpus()
            } else {
                graphs
                    .iter()
                    .map(|g| Ok((g.clone(), load_graph(g)?)))
                    .collect::<Result<_>>()?
            };
            let reports = run_corpus(&selected, &models, policy, h, budget);
            eprint!("{}", harness::to_table(&reports));
            emit(out.as_deref(), &harness::to_csv(&reports, !no_timing))?;
            return Ok(!harness::any_failure(&reports));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
