//! Graph corpus, exhaustive independent-set oracle and the end-to-end round
//! trip from graph to caching instance to exact optimum and back.

use std::fmt;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::model::{savings, validate_service, Policy, ServiceError};
use crate::properties::{check_properties, construct_service_from_is, extract_is, PropertyError};
use crate::reductions::{default_h, reduce, Model, ReductionError};
use crate::solver::{solve_exact_with, SolveError, SolveOptions};

/// Largest vertex count accepted by [`max_independent_set`].
pub const IS_VERTEX_LIMIT: usize = 24;

/// Names of the built-in corpus graphs, in report order.
pub const CORPUS: [&str; 8] = ["K2", "P3", "K3", "P4", "K1,3", "C4", "C5", "K4"];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("independent-set oracle refuses {n} vertices (limit {IS_VERTEX_LIMIT})")]
    TooManyVertices { n: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

/// A built-in graph by name: the corpus plus `cherry`, the path `0 - 2 - 1`
/// whose centre comes last in vertex order.
pub fn corpus_graph(name: &str) -> Option<Graph> {
    let edges: Vec<(usize, usize)> = match name {
        "K2" => vec![(0, 1)],
        "P3" => vec![(0, 1), (1, 2)],
        "K3" => vec![(0, 1), (0, 2), (1, 2)],
        "P4" => vec![(0, 1), (1, 2), (2, 3)],
        "K1,3" => vec![(0, 1), (0, 2), (0, 3)],
        "C4" => vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        "C5" => vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)],
        "K4" => vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        "cherry" => vec![(0, 2), (1, 2)],
        _ => return None,
    };
    let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    Some(Graph::new(n, edges).expect("built-in graphs are simple"))
}

pub fn corpus() -> Vec<(String, Graph)> {
    CORPUS
        .iter()
        .map(|name| (name.to_string(), corpus_graph(name).expect("listed")))
        .collect()
}

/// Maximum independent set by include-first branching; among maximum sets
/// the lexicographically smallest sorted vertex list is returned.
pub fn max_independent_set(graph: &Graph) -> Result<(usize, Vec<usize>), HarnessError> {
    let n = graph.vertex_count();
    if n > IS_VERTEX_LIMIT {
        return Err(HarnessError::TooManyVertices { n });
    }
    let mut adjacent = vec![0u32; n];
    for &(u, v) in graph.edges() {
        adjacent[u] |= 1 << v;
        adjacent[v] |= 1 << u;
    }

    fn search(v: usize, n: usize, adjacent: &[u32], chosen: u32, size: usize, best: &mut (usize, u32)) {
        if v == n {
            if size > best.0 {
                *best = (size, chosen);
            }
            return;
        }
        if size + (n - v) <= best.0 {
            return;
        }
        if adjacent[v] & chosen == 0 {
            search(v + 1, n, adjacent, chosen | 1 << v, size + 1, best);
        }
        search(v + 1, n, adjacent, chosen, size, best);
    }

    let mut best = (0, 0u32);
    search(0, n, &adjacent, 0, 0, &mut best);
    let set = (0..n).filter(|&v| best.1 >> v & 1 == 1).collect();
    Ok((best.0, set))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The exact solve exceeded its budget; only the constructed service
    /// was checked.
    EasyDirectionOnly,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::EasyDirectionOnly => "easy-direction-only",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripReport {
    pub graph: String,
    pub model: Model,
    pub policy: Policy,
    pub h: u64,
    pub capacity: u64,
    pub d: usize,
    pub optimal: Option<u64>,
    pub k_caching: Option<u64>,
    pub k_oracle: u64,
    pub verdict: Verdict,
    pub seconds: f64,
    /// Why the verdict is not `pass`.
    pub detail: Option<String>,
}

/// Generates the reduction of `graph`, checks its structure, solves it
/// exactly and compares the recovered independence number with the oracle.
///
/// Equality is required for the simple model (under either policy). The
/// fault and bit models only have to satisfy
/// `threshold(K_oracle) <= optimal <= threshold(n)`.
pub fn round_trip(
    name: &str,
    graph: &Graph,
    model: Model,
    policy: Policy,
    h: Option<u64>,
    budget: u64,
) -> Result<RoundTripReport, HarnessError> {
    let started = Instant::now();
    let h = match model {
        Model::Simple => 1,
        _ => h.unwrap_or_else(|| default_h(graph)),
    };
    let out = reduce(graph, model, h)?;
    let (k_oracle, oracle_set) = max_independent_set(graph)?;
    let k_oracle = k_oracle as u64;
    let instance = match policy {
        Policy::Optional => out.instance.clone(),
        Policy::Forced => out.to_forced()?,
    };
    let mut report = RoundTripReport {
        graph: name.to_string(),
        model,
        policy,
        h,
        capacity: instance.capacity(),
        d: out.d,
        optimal: None,
        k_caching: None,
        k_oracle,
        verdict: Verdict::Fail,
        seconds: 0.0,
        detail: None,
    };

    let properties = check_properties(&out)?;
    if !properties.all_pass() {
        report.detail = Some(format!("properties {:?} fail", properties.failed()));
        report.seconds = started.elapsed().as_secs_f64();
        return Ok(report);
    }

    match solve_exact_with(&instance, SolveOptions { budget }) {
        Ok(result) => {
            let optimal = result.optimal_savings;
            report.optimal = Some(optimal);
            report.k_caching = optimal.checked_sub(out.base_threshold());
            let n = graph.vertex_count() as u64;
            report.detail = match (model, report.k_caching) {
                (_, None) => Some("optimum below threshold(0)".into()),
                (Model::Simple, Some(k)) if k != k_oracle => Some(format!("K_caching {k} != K_oracle {k_oracle}")),
                (Model::Simple, Some(k)) => {
                    let extracted = extract_is(&out, &result.witness);
                    if extracted.len() as u64 != k || !graph.is_independent(&extracted)? {
                        Some(format!("witness encodes {extracted:?}, not an independent set of size {k}"))
                    } else {
                        None
                    }
                }
                (_, Some(k)) if k < k_oracle || k > n => {
                    Some(format!("K_caching {k} outside [{k_oracle}, {n}]"))
                }
                _ => None,
            };
        }
        Err(SolveError::TooLarge { .. } | SolveError::TooManyLivePages { .. }) => {
            let service = construct_service_from_is(&out, &oracle_set)?;
            let valid = validate_service(&out.instance, &service)?.is_valid();
            let value = savings(&out.instance, &service).ok();
            report.detail = if !valid {
                Some("constructed service is invalid".into())
            } else if value != Some(out.threshold(k_oracle)) {
                Some(format!("constructed savings {value:?} != threshold(K_oracle)"))
            } else {
                report.verdict = Verdict::EasyDirectionOnly;
                None
            };
            report.seconds = started.elapsed().as_secs_f64();
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    }
    if report.detail.is_none() {
        report.verdict = Verdict::Pass;
    }
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Round trips over `graphs x models`, in parallel, reported in input order.
/// A row whose round trip errors becomes a failed row carrying the error.
pub fn run_corpus(
    graphs: &[(String, Graph)],
    models: &[Model],
    policy: Policy,
    h: Option<u64>,
    budget: u64,
) -> Vec<RoundTripReport> {
    let jobs: Vec<(&str, &Graph, Model)> = graphs
        .iter()
        .flat_map(|(name, g)| models.iter().map(move |&m| (name.as_str(), g, m)))
        .collect();
    jobs.into_par_iter()
        .map(|(name, graph, model)| {
            round_trip(name, graph, model, policy, h, budget).unwrap_or_else(|e| RoundTripReport {
                graph: name.to_string(),
                model,
                policy,
                h: h.unwrap_or(0),
                capacity: 0,
                d: 0,
                optimal: None,
                k_caching: None,
                k_oracle: 0,
                verdict: Verdict::Fail,
                seconds: 0.0,
                detail: Some(e.to_string()),
            })
        })
        .collect()
}

pub fn any_failure(reports: &[RoundTripReport]) -> bool {
    reports.iter().any(|r| r.verdict == Verdict::Fail)
}

fn opt(value: Option<u64>) -> String {
    value.map_or("-".to_string(), |v| v.to_string())
}

/// CSV report; with `timing` off the `seconds` column holds `-` so that the
/// output is reproducible byte for byte.
pub fn to_csv(reports: &[RoundTripReport], timing: bool) -> String {
    let mut out = String::from("graph,model,H,C,d,optimal,K_caching,K_oracle,verdict,seconds\n");
    for r in reports {
        let seconds = if timing { format!("{:.3}", r.seconds) } else { "-".into() };
        let _ = writeln!(
            out,
            "\"{}\",{},{},{},{},{},{},{},{},{seconds}",
            r.graph,
            r.model,
            r.h,
            r.capacity,
            r.d,
            opt(r.optimal),
            opt(r.k_caching),
            r.k_oracle,
            r.verdict
        );
    }
    out
}

/// Aligned human-readable table with failure details underneath.
pub fn to_table(reports: &[RoundTripReport]) -> String {
    let header = ["graph", "model", "H", "C", "d", "optimal", "K_caching", "K_oracle", "verdict"];
    let rows: Vec<[String; 9]> = reports
        .iter()
        .map(|r| {
            [
                r.graph.clone(),
                r.model.to_string(),
                r.h.to_string(),
                r.capacity.to_string(),
                r.d.to_string(),
                opt(r.optimal),
                opt(r.k_caching),
                r.k_oracle.to_string(),
                r.verdict.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let joined: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", joined.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in &rows {
        line(row.iter().map(String::as_str).collect());
    }
    for r in reports.iter().filter(|r| r.detail.is_some()) {
        let _ = writeln!(out, "{} {}: {}", r.graph, r.model, r.detail.as_deref().unwrap_or_default());
    }
    out
}
