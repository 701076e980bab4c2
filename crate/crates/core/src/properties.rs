//! Structural checks on generated instances, the independent-set service
//! constructor and extractor, and per-block diagnostics.
//!
//! `S_B` is the set of edge pages cached when the first request of block `B`
//! arrives: pages with a chosen gap `[t_k, t_{k+1}]` such that
//! `t_k < start(B) <= t_{k+1}`. Empty blocks start where the previous block
//! ended.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::{BlockId, BlockKind, Gap, PageId, Service, ServiceError};
use crate::reductions::{EdgeRole, ReductionOutput, Role};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PropertyError {
    #[error("reduction output has {roles} roles for {pages} pages")]
    MissingRoles { roles: usize, pages: usize },
    #[error("vertex set {0:?} is not independent")]
    NotIndependent(Vec<usize>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counterexample {
    pub page: Option<PageId>,
    pub block: Option<BlockId>,
    pub position: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.page {
            write!(f, "page {p} ")?;
        }
        if let Some(b) = self.block {
            write!(f, "block {b} ")?;
        }
        if let Some(t) = self.position {
            write!(f, "position {t} ")?;
        }
        f.write_str(&self.detail)
    }
}

/// Outcome of the six structural properties (a) through (f).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyReport {
    pub results: [Option<Counterexample>; 6],
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(Option::is_none)
    }

    pub fn failed(&self) -> Vec<char> {
        self.results
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_some())
            .map(|(i, _)| (b'a' + i as u8) as char)
            .collect()
    }

    pub fn get(&self, property: char) -> Option<&Counterexample> {
        self.results[(property as u8 - b'a') as usize].as_ref()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, result) in self.results.iter().enumerate() {
            let id = (b'a' + i as u8) as char;
            let _ = match result {
                None => writeln!(out, "({id}) pass"),
                Some(c) => writeln!(out, "({id}) FAIL {c}"),
            };
        }
        out
    }
}

fn fail(page: Option<PageId>, block: Option<BlockId>, position: Option<usize>, detail: impl Into<String>) -> Option<Counterexample> {
    Some(Counterexample {
        page,
        block,
        position,
        detail: detail.into(),
    })
}

fn ensure_roles(output: &ReductionOutput) -> Result<(), PropertyError> {
    let pages = output.instance.pages().len();
    if output.roles.len() != pages {
        return Err(PropertyError::MissingRoles {
            roles: output.roles.len(),
            pages,
        });
    }
    Ok(())
}

fn edge_of(role: &Role) -> Option<(EdgeRole, usize, usize)> {
    match *role {
        Role::Edge { role, edge, group } => Some((role, edge, group)),
        Role::Vertex(_) => None,
    }
}

/// (a) each vertex page is requested exactly twice, right before and right
/// after its phase.
fn check_vertex_requests(output: &ReductionOutput) -> Option<Counterexample> {
    let instance = &output.instance;
    for v in 0..output.graph.vertex_count() {
        let pages: Vec<PageId> = (0..output.roles.len())
            .filter(|&p| output.roles[p] == Role::Vertex(v))
            .collect();
        let [page] = pages[..] else {
            return fail(None, None, None, format!("vertex {v} has {} vertex pages", pages.len()));
        };
        let occ = instance.occurrences(page);
        if occ.len() != 2 {
            return fail(Some(page), None, None, format!("requested {} times", occ.len()));
        }
        if let Some(&t) = occ.iter().find(|&&t| instance.requests()[t].block.is_some()) {
            return fail(Some(page), None, Some(t), "request inside a block");
        }
        let phase: Vec<BlockId> = (0..instance.blocks().len())
            .filter(|&b| instance.blocks()[b].kind.vertex() == Some(v))
            .collect();
        if phase.windows(2).any(|w| w[1] != w[0] + 1) {
            return fail(Some(page), Some(phase[0]), None, "phase blocks are not contiguous");
        }
        let (start, end) = match (phase.first(), phase.last()) {
            (Some(&f), Some(&l)) => (instance.blocks()[f].span.start, instance.blocks()[l].span.end),
            _ => (occ[0] + 1, occ[0] + 1),
        };
        if occ[0] + 1 != start {
            return fail(Some(page), None, Some(occ[0]), "first request is not right before the phase");
        }
        if occ[1] != end {
            return fail(Some(page), None, Some(occ[1]), "second request is not right after the phase");
        }
    }
    None
}

/// (b) edge-page savings equal `sum s_B`: each edge page is requested inside
/// blocks, at most once per block, and consecutive requests lie exactly
/// `cost / unit` blocks apart.
fn check_savings_structure(output: &ReductionOutput) -> Option<Counterexample> {
    let instance = &output.instance;
    let unit = instance.cost_scale();
    for (page, role) in output.roles.iter().enumerate() {
        if edge_of(role).is_none() {
            continue;
        }
        let cost = instance.page(page).cost;
        if !cost.is_multiple_of(unit) {
            return fail(Some(page), None, None, "cost is not a multiple of the edge unit");
        }
        let stride = cost / unit;
        let mut previous: Option<BlockId> = None;
        for &t in instance.occurrences(page) {
            let Some(block) = instance.requests()[t].block else {
                return fail(Some(page), None, Some(t), "edge-page request outside blocks");
            };
            if let Some(prev) = previous {
                if block as u64 != prev as u64 + stride {
                    return fail(
                        Some(page),
                        Some(block),
                        Some(t),
                        format!("requested in block {prev} then block {block}, expected stride {stride}"),
                    );
                }
            }
            previous = Some(block);
        }
    }
    None
}

/// (c) the initial block requests exactly the `abar` pages of every edge and
/// the final block exactly the `bbar` pages.
fn check_initial_final(output: &ReductionOutput) -> Option<Counterexample> {
    let instance = &output.instance;
    for (block_id, block) in instance.blocks().iter().enumerate() {
        let expected = match block.kind {
            BlockKind::Initial => EdgeRole::ABar,
            BlockKind::Final => EdgeRole::BBar,
            _ => continue,
        };
        for edge in 0..output.graph.edge_count() {
            let mut seen: Vec<PageId> = instance.requests()[block.span.clone()]
                .iter()
                .map(|r| r.page)
                .filter(|&p| matches!(edge_of(&output.roles[p]), Some((_, e, _)) if e == edge))
                .collect();
            seen.sort_unstable();
            seen.dedup();
            let mut want: Vec<PageId> = (0..output.h as usize)
                .map(|g| output.edge_page(expected, edge, g))
                .collect();
            want.sort_unstable();
            if seen != want {
                return fail(
                    None,
                    Some(block_id),
                    None,
                    format!("edge {edge}: {} pages requested, expected the {} {} pages", seen.len(), want.len(), expected.token()),
                );
            }
        }
    }
    None
}

/// (d) inside each block, edges are served in edge order.
fn check_edge_order(output: &ReductionOutput) -> Option<Counterexample> {
    let instance = &output.instance;
    for (block_id, block) in instance.blocks().iter().enumerate() {
        let mut last_edge = 0usize;
        for t in block.span.clone() {
            if let Some((_, edge, _)) = edge_of(&output.roles[instance.requests()[t].page]) {
                if edge < last_edge {
                    return fail(None, Some(block_id), Some(t), format!("edge {edge} after edge {last_edge}"));
                }
                last_edge = edge;
            }
        }
    }
    None
}

/// (e) per block and edge, `a` and `bbar` requests precede `abar` and `b` requests.
fn check_good_ordering(output: &ReductionOutput) -> Option<Counterexample> {
    let instance = &output.instance;
    let m = output.graph.edge_count();
    for (block_id, block) in instance.blocks().iter().enumerate() {
        let mut opened = vec![false; m];
        for t in block.span.clone() {
            let page = instance.requests()[t].page;
            match edge_of(&output.roles[page]) {
                Some((EdgeRole::ABar | EdgeRole::B, edge, _)) => opened[edge] = true,
                Some((EdgeRole::A | EdgeRole::BBar, edge, _)) if opened[edge] => {
                    return fail(Some(page), Some(block_id), Some(t), "a/bbar request after an abar/b request");
                }
                _ => {}
            }
        }
    }
    None
}

/// (f) each size-3 page lives inside one endpoint's phase, alone among the
/// size-3 pages of its edge.
fn check_alpha_beta(output: &ReductionOutput) -> Option<Counterexample> {
    let instance = &output.instance;
    let blocks = instance.blocks();
    for (page, role) in output.roles.iter().enumerate() {
        let Some((EdgeRole::Alpha | EdgeRole::Beta, edge, _)) = edge_of(role) else {
            continue;
        };
        let occ = instance.occurrences(page);
        let block_at = |t: usize| instance.requests()[t].block;
        let (Some(&f), Some(&l)) = (occ.first(), occ.last()) else {
            continue;
        };
        let (Some(first), Some(last)) = (block_at(f), block_at(l)) else {
            return fail(Some(page), None, Some(f), "size-3 request outside blocks");
        };
        let (u, v) = output.graph.endpoints(edge);
        let (pf, pl) = (blocks[first].kind.vertex(), blocks[last].kind.vertex());
        if pf != pl || !(pf == Some(u) || pf == Some(v)) {
            return fail(Some(page), Some(first), None, format!("first and last blocks lie in phases {pf:?} and {pl:?}"));
        }
        for (block_id, block) in blocks.iter().enumerate().take(last + 1).skip(first) {
            let other = instance.requests()[block.span.clone()].iter().find(|r| {
                r.page != page
                    && matches!(edge_of(&output.roles[r.page]), Some((EdgeRole::Alpha | EdgeRole::Beta, e, _)) if e == edge)
            });
            if let Some(r) = other {
                return fail(Some(page), Some(block_id), None, format!("shares its blocks with size-3 page {}", r.page));
            }
        }
    }
    None
}

/// Runs the six structural checks on a generated instance.
pub fn check_properties(output: &ReductionOutput) -> Result<PropertyReport, PropertyError> {
    ensure_roles(output)?;
    Ok(PropertyReport {
        results: [
            check_vertex_requests(output),
            check_savings_structure(output),
            check_initial_final(output),
            check_edge_order(output),
            check_good_ordering(output),
            check_alpha_beta(output),
        ],
    })
}

/// The service encoding independent set `w`: for every edge `{u, v}` with `u`
/// first in phase order, keep all `abar`, `b`, `beta`, `bbar` pages when `u`
/// is in `w`, otherwise all `abar`, `alpha`, `a`, `bbar` pages; keep the vertex
/// page of every member of `w`.
pub fn construct_service_from_is(output: &ReductionOutput, w: &[usize]) -> Result<Service, PropertyError> {
    ensure_roles(output)?;
    if !output.graph.is_independent(w)? {
        return Err(PropertyError::NotIndependent(w.to_vec()));
    }
    let mut rank = vec![0usize; output.graph.vertex_count()];
    for (i, &v) in output.phase_order.iter().enumerate() {
        rank[v] = i;
    }
    let member = |v: usize| w.contains(&v);
    let instance = &output.instance;
    let mut service = Service::new();
    for (edge, &(x, y)) in output.graph.edges().iter().enumerate() {
        let first = if rank[x] < rank[y] { x } else { y };
        let family = if member(first) {
            [EdgeRole::ABar, EdgeRole::B, EdgeRole::Beta, EdgeRole::BBar]
        } else {
            [EdgeRole::ABar, EdgeRole::Alpha, EdgeRole::A, EdgeRole::BBar]
        };
        for group in 0..output.h as usize {
            for role in family {
                service.keep_page(instance, output.edge_page(role, edge, group));
            }
        }
    }
    for &v in w {
        service.keep_page(instance, output.vertex_page(v));
    }
    Ok(service)
}

/// Vertices whose vertex page keeps its single gap, ascending.
pub fn extract_is(output: &ReductionOutput, service: &Service) -> Vec<usize> {
    (0..output.graph.vertex_count())
        .filter(|&v| service.contains(&Gap::new(output.vertex_page(v), 0)))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeDiagnostics {
    /// `s_B^e`: cached pages of this edge at block start.
    pub s: u64,
    /// `gamma_B^e = |s_{B'}^e - s_B^e|`; `None` for the last block.
    pub gamma: Option<u64>,
    /// Cached `alpha`/`beta` pages of this edge.
    pub epsilon: u64,
    /// Cached `a`/`bbar` pages of this edge.
    pub phi: u64,
    /// Which size-3 role is cached, when `epsilon` is one.
    pub size3: Option<EdgeRole>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockRow {
    pub s: u64,
    /// Free slots `mH - s_B`.
    pub delta: i64,
    pub epsilon: u64,
    pub phi: u64,
    pub edges: Vec<EdgeDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDiagnostics {
    pub slots: u64,
    pub rows: Vec<BlockRow>,
    initial: Option<BlockId>,
    last: Option<BlockId>,
}

impl BlockDiagnostics {
    fn inner_blocks(&self) -> impl Iterator<Item = (BlockId, &BlockRow)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(move |(b, _)| Some(*b) != self.initial && Some(*b) != self.last)
    }

    /// Sum of `delta_B` over all blocks except the initial one.
    pub fn delta_sum(&self) -> i64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(b, _)| Some(*b) != self.initial)
            .map(|(_, r)| r.delta)
            .sum()
    }

    /// Sum of `gamma_B^e` over all blocks except the initial and final ones.
    pub fn gamma_sum(&self, edge: usize) -> u64 {
        self.inner_blocks()
            .map(|(_, r)| r.edges[edge].gamma.unwrap_or(0))
            .sum()
    }

    pub fn max_epsilon(&self) -> u64 {
        self.rows.iter().map(|r| r.epsilon).max().unwrap_or(0)
    }

    /// Sum of `s_B` over all blocks.
    pub fn s_sum(&self) -> u64 {
        self.rows.iter().map(|r| r.s).sum()
    }

    /// A block with no free slot whose start holds a size-3 page of `edge`,
    /// with the role of that page.
    pub fn full_block_with_size3(&self, edge: usize) -> Option<(BlockId, EdgeRole)> {
        self.rows.iter().enumerate().find_map(|(b, r)| {
            let e = &r.edges[edge];
            (r.delta == 0 && e.epsilon == 1).then(|| (b, e.size3.expect("epsilon one has a role")))
        })
    }

    /// `block,edge,s,delta,gamma,epsilon,phi`, one row per block and edge.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,edge,s,delta,gamma,epsilon,phi\n");
        for (b, row) in self.rows.iter().enumerate() {
            if row.edges.is_empty() {
                let _ = writeln!(out, "{b},-,{},{},-,{},{}", row.s, row.delta, row.epsilon, row.phi);
            }
            for (e, edge) in row.edges.iter().enumerate() {
                let gamma = edge.gamma.map_or("-".to_string(), |g| g.to_string());
                let _ = writeln!(out, "{b},{e},{},{},{gamma},{},{}", edge.s, row.delta, edge.epsilon, edge.phi);
            }
        }
        out
    }
}

/// Per-block proof quantities of a service on a generated instance.
pub fn diagnostics(output: &ReductionOutput, service: &Service) -> Result<BlockDiagnostics, PropertyError> {
    ensure_roles(output)?;
    let instance = &output.instance;
    let m = output.graph.edge_count();
    let blocks = instance.blocks();
    let starts: Vec<usize> = blocks.iter().map(|b| b.span.start).collect();
    let mut rows: Vec<BlockRow> = (0..blocks.len())
        .map(|_| BlockRow {
            edges: vec![EdgeDiagnostics::default(); m],
            ..BlockRow::default()
        })
        .collect();

    for gap in service.gaps() {
        let (t0, t1) = instance.gap_span(*gap).ok_or(ServiceError::UnknownGap {
            page: gap.page,
            ordinal: gap.ordinal,
        })?;
        let Some((role, edge, _)) = edge_of(&output.roles[gap.page]) else {
            continue;
        };
        let lo = starts.partition_point(|&s| s <= t0);
        let hi = starts.partition_point(|&s| s <= t1);
        for row in &mut rows[lo..hi] {
            let e = &mut row.edges[edge];
            e.s += 1;
            match role {
                EdgeRole::Alpha | EdgeRole::Beta => {
                    e.epsilon += 1;
                    e.size3 = Some(role);
                }
                EdgeRole::A | EdgeRole::BBar => e.phi += 1,
                EdgeRole::ABar | EdgeRole::B => {}
            }
        }
    }

    let slots = m as u64 * output.h;
    for b in 0..rows.len() {
        let next: Option<Vec<u64>> = rows.get(b + 1).map(|r| r.edges.iter().map(|e| e.s).collect());
        let row = &mut rows[b];
        row.s = row.edges.iter().map(|e| e.s).sum();
        row.delta = slots as i64 - row.s as i64;
        row.epsilon = row.edges.iter().map(|e| e.epsilon).sum();
        row.phi = row.edges.iter().map(|e| e.phi).sum();
        if let Some(next) = next {
            for (e, edge) in row.edges.iter_mut().enumerate() {
                edge.gamma = Some(edge.s.abs_diff(next[e]));
            }
        }
    }

    Ok(BlockDiagnostics {
        slots,
        rows,
        initial: blocks.iter().position(|b| b.kind == BlockKind::Initial),
        last: blocks.iter().position(|b| b.kind == BlockKind::Final),
    })
}

/// One edge page kept across the boundary between two consecutive original
/// (non-inserted) blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crossing {
    pub page: PageId,
    pub from: BlockId,
    pub to: BlockId,
    /// Cost of each chosen gap between the two requests, in order.
    pub gap_savings: Vec<u64>,
}

/// Lists every boundary crossing of the service together with the savings of
/// the gaps realizing it.
pub fn crossing_audit(output: &ReductionOutput, service: &Service) -> Vec<Crossing> {
    let instance = &output.instance;
    let blocks = instance.blocks();
    let mut rank = vec![None; blocks.len()];
    let mut r = 0usize;
    for (b, block) in blocks.iter().enumerate() {
        if !block.kind.is_inserted() {
            rank[b] = Some(r);
            r += 1;
        }
    }
    let mut crossings = Vec::new();
    for (page, role) in output.roles.iter().enumerate() {
        if edge_of(role).is_none() {
            continue;
        }
        let occ = instance.occurrences(page);
        let original: Vec<(usize, BlockId)> = occ
            .iter()
            .enumerate()
            .filter_map(|(k, &t)| {
                let b = instance.requests()[t].block?;
                rank[b].map(|_| (k, b))
            })
            .collect();
        for pair in original.windows(2) {
            let ((k0, b0), (k1, b1)) = (pair[0], pair[1]);
            if rank[b1] != rank[b0].map(|x| x + 1) {
                continue;
            }
            if (k0..k1).all(|k| service.contains(&Gap::new(page, k))) {
                crossings.push(Crossing {
                    page,
                    from: b0,
                    to: b1,
                    gap_savings: vec![instance.page(page).cost; k1 - k0],
                });
            }
        }
    }
    crossings
}
