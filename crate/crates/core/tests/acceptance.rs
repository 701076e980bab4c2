//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use general_caching::format::write_instance;
use general_caching::harness::{self, corpus, corpus_graph, max_independent_set, run_corpus};
use general_caching::model::{savings, validate_service, Instance, Policy, Request, Service};
use general_caching::properties::{check_properties, construct_service_from_is, crossing_audit, diagnostics, PropertyReport};
use general_caching::reductions::{
    default_h, optional_to_forced, reduce_bit_optional, reduce_fault_optional, reduce_simple, EdgeRole, Model,
    ReductionOutput, Role,
};
use general_caching::solver::{solve_brute_force, solve_exact, BRUTE_FORCE_GAP_LIMIT, DEFAULT_BUDGET};
use general_caching::Graph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (u8, &'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const SIMPLE_GRAPHS: [&str; 6] = ["K2", "P3", "K3", "P4", "K1,3", "C4"];
const SEED: u64 = 0x5eed_cafe;

fn graph(name: &str) -> Graph {
    corpus_graph(name).expect("built-in graph")
}

fn k_oracle(g: &Graph) -> (u64, Vec<usize>) {
    let (k, set) = max_independent_set(g).expect("small graph");
    (k as u64, set)
}

/// Every (graph, H) pair of the easy-direction grid.
fn easy_grid() -> Vec<(String, Graph, u64)> {
    let mut grid = Vec::new();
    for (name, g) in corpus() {
        if g.vertex_count() <= 3 {
            grid.push((name.clone(), g.clone(), default_h(&g)));
        }
        for h in 1..=3 {
            grid.push((name.clone(), g.clone(), h));
        }
    }
    grid
}

/// Free-slot, occupancy-change and size-3 bounds on a service with savings
/// at least `threshold(0)`.
fn diagnostic_bounds(out: &ReductionOutput, service: &Service, label: &str) -> Result<bool, String> {
    let value = savings(&out.instance, service).map_err(|e| e.to_string())?;
    if value < out.base_threshold() {
        return Ok(false);
    }
    let diag = diagnostics(out, service).map_err(|e| e.to_string())?;
    let n = out.graph.vertex_count() as i64;
    ensure!(diag.delta_sum() <= n, "{label}: sum delta {} > n = {n}", diag.delta_sum());
    for e in 0..out.graph.edge_count() {
        ensure!(diag.gamma_sum(e) <= 6 * n as u64, "{label}: edge {e} sum gamma {} > 6n", diag.gamma_sum(e));
    }
    ensure!(diag.max_epsilon() <= 1, "{label}: epsilon {}", diag.max_epsilon());
    Ok(true)
}

fn criterion_1() -> Outcome {
    let k2 = reduce_simple(&graph("K2"));
    let brute = solve_brute_force(&k2.instance).map_err(|e| e.to_string())?;
    ensure!(brute.optimal_savings == 16, "K2 brute force gives {}", brute.optimal_savings);

    let k3 = reduce_simple(&graph("K3"));
    let k3_exact = solve_exact(&k3.instance).map_err(|e| e.to_string())?;
    ensure!(k3_exact.optimal_savings == 157, "K3 exact gives {}", k3_exact.optimal_savings);
    ensure!(
        solve_brute_force(&k3.instance).is_err(),
        "K3 expected to exceed the brute-force gap guard"
    );
    let mut prefixes = 0;
    for len in 1..=k3.instance.len() {
        let prefix = k3.instance.truncated(len);
        match solve_brute_force(&prefix) {
            Ok(b) => {
                let e = solve_exact(&prefix).map_err(|e| e.to_string())?;
                ensure!(e.optimal_savings == b.optimal_savings, "K3 prefix {len}: dp {} vs brute {}", e.optimal_savings, b.optimal_savings);
                prefixes += 1;
            }
            Err(_) => break,
        }
    }
    ensure!(prefixes > 0, "no K3 prefix within {BRUTE_FORCE_GAP_LIMIT} gaps");

    let mut witnesses = 0;
    for name in SIMPLE_GRAPHS {
        let g = graph(name);
        let out = reduce_simple(&g);
        let (k, _) = k_oracle(&g);
        let n = g.vertex_count() as u64;
        let m = g.edge_count() as u64;
        let expected = (out.d as u64 - 1) * m * (n + 1) + k;
        let result = solve_exact(&out.instance).map_err(|e| e.to_string())?;
        ensure!(result.optimal_savings == expected, "{name}: optimum {} != {expected}", result.optimal_savings);
        if diagnostic_bounds(&out, &result.witness, name)? {
            witnesses += 1;
        }
    }
    Ok(format!("K2 16 by brute force, K3 157 with {prefixes} prefixes cross-checked, 6 graphs exact; {witnesses} witnesses diagnosed"))
}

fn random_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut all = Vec::new();
    for policy in [Policy::Optional, Policy::Forced] {
        for _ in 0..150 {
            all.push(common::random_tiny(&mut rng, policy));
        }
    }
    all
}

fn criterion_2() -> Outcome {
    let (mut solved, mut infeasible) = (0, 0);
    for (i, instance) in random_instances().iter().enumerate() {
        match (solve_exact(instance), solve_brute_force(instance)) {
            (Ok(a), Ok(b)) => {
                ensure!(a.optimal_savings == b.optimal_savings, "instance {i}: dp {} vs brute {}", a.optimal_savings, b.optimal_savings);
                solved += 1;
            }
            (Err(a), Err(b)) if a == b => infeasible += 1,
            (a, b) => return Err(format!("instance {i}: dp {:?} vs brute {:?}", a.map(|r| r.optimal_savings), b.map(|r| r.optimal_savings))),
        }
    }
    ensure!(solved >= 200, "only {solved} solvable instances");
    Ok(format!("{solved} agreeing optima, {infeasible} agreeing infeasible"))
}

fn easy_direction(model: Model) -> Outcome {
    let mut checked = 0;
    let mut crossings = 0;
    for (name, g, h) in easy_grid() {
        let out = match model {
            Model::Bit => reduce_bit_optional(&g, h),
            _ => reduce_fault_optional(&g, h),
        }
        .map_err(|e| e.to_string())?;
        let (k, set) = k_oracle(&g);
        let service = construct_service_from_is(&out, &set).map_err(|e| e.to_string())?;
        let report = validate_service(&out.instance, &service).map_err(|e| e.to_string())?;
        ensure!(report.is_valid(), "{name} H={h}: invalid at {:?}", report.violating_positions());
        let value = savings(&out.instance, &service).map_err(|e| e.to_string())?;
        let m = g.edge_count() as u64;
        ensure!(value == (out.d as u64 - 1) * m * h + k, "{name} H={h}: savings {value}");
        if model == Model::Bit {
            for c in crossing_audit(&out, &service) {
                let size = out.instance.page(c.page).size;
                let expected = if size == 2 { vec![2, 2, 2] } else { vec![3, 3] };
                ensure!(c.gap_savings == expected, "{name} H={h}: page {} crossing {:?}", c.page, c.gap_savings);
                crossings += 1;
            }
        }
        diagnostic_bounds(&out, &service, &format!("{name} H={h}"))?;
        checked += 1;
    }
    Ok(match model {
        Model::Bit => format!("{checked} bit instances, {crossings} audited crossings"),
        _ => format!("{checked} fault instances"),
    })
}

fn rebuild(out: &ReductionOutput, requests: Vec<Request>) -> ReductionOutput {
    let i = &out.instance;
    let instance = Instance::new(
        i.capacity(),
        i.pages().to_vec(),
        requests,
        i.blocks().iter().map(|b| b.kind).collect(),
        i.policy(),
        i.cost_scale(),
    )
    .expect("mutation keeps the block structure");
    out.with_instance(instance)
}

fn edge_of(out: &ReductionOutput, page: usize) -> Option<(EdgeRole, usize, usize)> {
    match out.roles[page] {
        Role::Edge { role, edge, group } => Some((role, edge, group)),
        Role::Vertex(_) => None,
    }
}

/// Each mutation of a valid instance must break exactly one property.
fn mutations() -> Vec<(char, ReductionOutput)> {
    let base = reduce_fault_optional(&graph("P3"), 2).expect("valid");
    let reqs = base.instance.requests().to_vec();
    let mut list = Vec::new();

    // (a) a third request to p0 right after its second one.
    let mut r = reqs.clone();
    let second = base.instance.occurrences(0)[1];
    r.insert(second + 1, Request { page: 0, block: None });
    list.push(('a', rebuild(&base, r)));

    // (b) drop a middle request of a.0.0, leaving a two-block stride.
    let mut r = reqs.clone();
    let page = base.edge_page(EdgeRole::A, 0, 0);
    let occ = base.instance.occurrences(page);
    r.remove(occ[occ.len() / 2]);
    list.push(('b', rebuild(&base, r)));

    // (c) drop abar.0.0 from the initial block.
    let mut r = reqs.clone();
    let page = base.edge_page(EdgeRole::ABar, 0, 0);
    r.remove(base.instance.occurrences(page)[0]);
    list.push(('c', rebuild(&base, r)));

    // (d) in block 1 move the first edge-1 request in front of the block.
    let mut r = reqs.clone();
    let span = base.instance.blocks()[1].span.clone();
    let t = span.clone().find(|&t| matches!(edge_of(&base, reqs[t].page), Some((_, 1, _)))).expect("edge 1 in block 1");
    let moved = r.remove(t);
    r.insert(span.start, moved);
    list.push(('d', rebuild(&base, r)));

    // (e) move a `b` request in front of an `a` request of the same edge.
    let mut r = reqs.clone();
    let (ta, tb) = base
        .instance
        .blocks()
        .iter()
        .find_map(|b| {
            let span = b.span.clone();
            let ta = span.clone().find(|&t| matches!(edge_of(&base, reqs[t].page), Some((EdgeRole::A, 0, _))))?;
            let tb = span.clone().find(|&t| t > ta && matches!(edge_of(&base, reqs[t].page), Some((EdgeRole::B, 0, _))))?;
            Some((ta, tb))
        })
        .expect("a block with a before b");
    let moved = r.remove(tb);
    r.insert(ta, moved);
    list.push(('e', rebuild(&base, r)));

    // (f) extend alpha.0.0 one block further, into the blocks of alpha.0.1.
    let mut r = reqs.clone();
    let page = base.edge_page(EdgeRole::Alpha, 0, 0);
    let last = *base.instance.occurrences(page).last().expect("requested");
    let next = reqs[last].block.expect("inside a block") + 1;
    let span = base.instance.blocks()[next].span.clone();
    let anchor = span.clone().find(|&t| matches!(edge_of(&base, reqs[t].page), Some((_, 0, _)))).expect("edge 0 in next block");
    r.insert(anchor + 1, Request { page, block: Some(next) });
    list.push(('f', rebuild(&base, r)));
    list
}

fn criterion_5() -> Outcome {
    let mut instances = 0;
    for (name, g, h) in easy_grid() {
        for out in [reduce_fault_optional(&g, h), reduce_bit_optional(&g, h)] {
            let out = out.map_err(|e| e.to_string())?;
            let report = check_properties(&out).map_err(|e| e.to_string())?;
            ensure!(report.all_pass(), "{name} H={h} {}: {}", out.model, report.to_text());
            instances += 1;
        }
    }
    for (property, mutated) in mutations() {
        let report: PropertyReport = check_properties(&mutated).map_err(|e| e.to_string())?;
        ensure!(report.failed() == vec![property], "mutation ({property}) fails {:?}", report.failed());
    }
    Ok(format!("{instances} generated instances pass, 6 mutations fail exactly their property"))
}

fn criterion_6() -> Outcome {
    let mut checked = 0;
    let mut inputs: Vec<(String, Instance)> = random_instances()
        .into_iter()
        .filter(|i| i.policy() == Policy::Optional)
        .enumerate()
        .map(|(i, inst)| (format!("random {i}"), inst))
        .collect();
    inputs.push(("K2 simple".into(), reduce_simple(&graph("K2")).instance));
    inputs.push(("K3 simple".into(), reduce_simple(&graph("K3")).instance));
    for (label, instance) in inputs {
        let forced = optional_to_forced(&instance, 1).map_err(|e| e.to_string())?;
        let m = instance.max_page_size();
        ensure!(forced.capacity() == instance.capacity() + m, "{label}: C' = {}", forced.capacity());
        ensure!(forced.len() == 2 * instance.len(), "{label}: {} requests", forced.len());
        let fresh_ok = forced.requests().iter().skip(1).step_by(2).all(|r| {
            let p = forced.page(r.page);
            r.page >= instance.pages().len() && p.size == m && forced.occurrences(r.page).len() == 1
        });
        ensure!(fresh_ok, "{label}: fresh pages malformed");
        let a = solve_exact(&instance).map_err(|e| e.to_string())?.optimal_savings;
        let b = solve_exact(&forced).map_err(|e| format!("{label}: {e}"))?.optimal_savings;
        ensure!(a == b, "{label}: optional {a} vs forced {b}");
        checked += 1;
    }
    Ok(format!("{checked} instances keep their optimum under C' = C + M"))
}

fn criterion_7() -> Outcome {
    for (name, g) in corpus() {
        let out = reduce_fault_optional(&g, 1).map_err(|e| e.to_string())?;
        let (k, _) = k_oracle(&g);
        let opt = solve_exact(&out.instance).map_err(|e| e.to_string())?.optimal_savings;
        let upper = (out.d as u64 - 1) * g.edge_count() as u64 + g.vertex_count() as u64;
        ensure!(out.threshold(k) <= opt && opt <= upper, "{name}: {} <= {opt} <= {upper} violated", out.threshold(k));
    }
    Ok("threshold(K) <= optimum <= (d-1)m + n on 8 graphs".into())
}

fn criterion_8() -> Outcome {
    // Witnesses of criterion 1 and constructed services of criteria 3 and 4
    // are checked where they arise; this reruns them as one block.
    let mut count = 0;
    for name in SIMPLE_GRAPHS {
        let out = reduce_simple(&graph(name));
        let witness = solve_exact(&out.instance).map_err(|e| e.to_string())?.witness;
        count += diagnostic_bounds(&out, &witness, name)? as usize;
    }
    for (name, g, h) in easy_grid() {
        let (_, set) = k_oracle(&g);
        for out in [reduce_fault_optional(&g, h), reduce_bit_optional(&g, h)] {
            let out = out.map_err(|e| e.to_string())?;
            let service = construct_service_from_is(&out, &set).map_err(|e| e.to_string())?;
            count += diagnostic_bounds(&out, &service, &format!("{name} H={h} {}", out.model))? as usize;
        }
    }
    Ok(format!("{count} services satisfy sum delta <= n, sum gamma <= 6n, epsilon <= 1"))
}

fn criterion_9() -> Outcome {
    let render = || -> String {
        let mut text = String::new();
        for name in ["cherry", "K3", "C5"] {
            let g = graph(name);
            for out in [reduce_fault_optional(&g, 2).unwrap(), reduce_bit_optional(&g, 1).unwrap(), reduce_simple(&g)] {
                text.push_str(&out.to_text());
                text.push_str(&write_instance(&out.to_forced().unwrap()));
            }
        }
        let reports = run_corpus(&corpus(), &[Model::Simple], Policy::Optional, None, DEFAULT_BUDGET);
        text.push_str(&harness::to_csv(&reports, false));
        let k3 = reduce_simple(&graph("K3"));
        text.push_str(&general_caching::format::write_service(&k3.instance, &solve_exact(&k3.instance).unwrap().witness));
        text
    };
    let first = render();
    ensure!(first == render(), "two renders differ");
    let golden = include_str!("golden/corpus_simple.csv");
    ensure!(first.contains(golden), "corpus CSV differs from the golden file");
    Ok(format!("{} bytes identical across runs and equal to the golden CSV", first.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "simple reduction equivalence", Duration::from_secs(300), criterion_1),
        (2, "solver oracle agreement", Duration::from_secs(120), criterion_2),
        (3, "easy direction, fault model", Duration::from_secs(180), || easy_direction(Model::Fault)),
        (4, "easy direction, bit model", Duration::from_secs(180), || easy_direction(Model::Bit)),
        (5, "structural properties", Duration::from_secs(300), criterion_5),
        (6, "forced transform", Duration::from_secs(300), criterion_6),
        (7, "fault-model sandwich at H = 1", Duration::from_secs(300), criterion_7),
        (8, "per-block diagnostics", Duration::from_secs(300), criterion_8),
        (9, "determinism", Duration::from_secs(300), criterion_9),
    ];
    let mut failed = 0;
    for (id, title, limit, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        let elapsed = started.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}, but took {elapsed:.1?} (limit {limit:?})")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {id} PASS {title}: {msg} ({elapsed:.2?})"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id} FAIL {title}: {msg} ({elapsed:.2?})");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
