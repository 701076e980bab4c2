//! Generators turning a graph into general caching instances whose optimal
//! savings encode the graph's maximum independent set.
//!
//! Every vertex `v` owns a size-1 page requested right before and right after
//! the `v`-phase. Every edge owns `H` groups of six pages (`abar`, `alpha`,
//! `a`, `b`, `beta`, `bbar`) with sizes 2, 3, 2, 2, 3, 2. Phases follow vertex
//! order; inside a phase the incident edges follow edge order, each
//! contributing `2H` blocks. Every block requests pages of every edge, edge by
//! edge, in two rounds over the groups.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::format::{FormatError, Lines};
use crate::graph::Graph;
use crate::model::{BlockKind, Instance, ModelError, Page, PageId, Policy, Request};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    /// Unit fault costs.
    Fault,
    /// Fault cost equals page size; five blocks inserted between neighbours.
    Bit,
    /// `H = 1`, vertex pages cost 1 and edge pages `n + 1` (scaled by `n + 1`).
    Simple,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Fault => "fault",
            Model::Bit => "bit",
            Model::Simple => "simple",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fault" => Ok(Model::Fault),
            "bit" => Ok(Model::Bit),
            "simple" => Ok(Model::Simple),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeRole {
    ABar,
    Alpha,
    A,
    B,
    Beta,
    BBar,
}

impl EdgeRole {
    pub const ALL: [EdgeRole; 6] = [
        EdgeRole::ABar,
        EdgeRole::Alpha,
        EdgeRole::A,
        EdgeRole::B,
        EdgeRole::Beta,
        EdgeRole::BBar,
    ];

    pub fn size(self) -> u64 {
        match self {
            EdgeRole::Alpha | EdgeRole::Beta => 3,
            _ => 2,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            EdgeRole::ABar => "abar",
            EdgeRole::Alpha => "alpha",
            EdgeRole::A => "a",
            EdgeRole::B => "b",
            EdgeRole::Beta => "beta",
            EdgeRole::BBar => "bbar",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Vertex(usize),
    Edge {
        role: EdgeRole,
        edge: usize,
        group: usize,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("H must be at least 1")]
    ZeroH,
    #[error("the optional-to-forced transform needs an optional instance")]
    NotOptional,
    #[error("roles section: {0}")]
    Roles(#[from] FormatError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A generated instance together with the gadget structure that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionOutput {
    pub instance: Instance,
    pub graph: Graph,
    pub model: Model,
    /// Groups per edge.
    pub h: u64,
    /// Number of blocks.
    pub d: usize,
    /// Role of every page, indexed by page id.
    pub roles: Vec<Role>,
    pub phase_order: Vec<usize>,
}

impl ReductionOutput {
    /// Savings that certify an independent set of size `k`:
    /// `(d - 1) m H` edge units plus `k`.
    pub fn threshold(&self, k: u64) -> u64 {
        self.base_threshold() + k
    }

    /// `threshold(0)`: the largest possible savings on edge pages.
    pub fn base_threshold(&self) -> u64 {
        (self.d as u64 - 1) * self.graph.edge_count() as u64 * self.h * self.edge_unit()
    }

    /// Savings one edge page earns per block boundary it is kept across.
    pub fn edge_unit(&self) -> u64 {
        self.instance.cost_scale()
    }

    pub fn vertex_page(&self, v: usize) -> PageId {
        v
    }

    pub fn edge_page(&self, role: EdgeRole, edge: usize, group: usize) -> PageId {
        edge_page_id(self.graph.vertex_count(), self.h as usize, role, edge, group)
    }

    /// Replaces the instance, keeping the metadata. Used to build mutated variants.
    pub fn with_instance(&self, instance: Instance) -> ReductionOutput {
        ReductionOutput {
            instance,
            ..self.clone()
        }
    }

    pub fn roles_text(&self) -> String {
        let mut out = format!("roles {}\n", self.roles.len());
        for (page, role) in self.roles.iter().enumerate() {
            let name = &self.instance.page(page).name;
            let _ = match *role {
                Role::Vertex(v) => writeln!(out, "{name} vertex - - {v}"),
                Role::Edge { role, edge, group } => {
                    writeln!(out, "{name} {} {edge} {group} -", role.token())
                }
            };
        }
        out
    }

    /// Instance text followed by the roles section.
    pub fn to_text(&self) -> String {
        let mut out = crate::format::write_instance(&self.instance);
        out.push_str(&self.roles_text());
        out
    }

    /// Forced-policy version of the instance with the model's cost for the
    /// fresh pages (1 for fault and simple, the largest page size for bit).
    pub fn to_forced(&self) -> Result<Instance, ReductionError> {
        let cost = match self.model {
            Model::Bit => self.instance.max_page_size(),
            Model::Fault | Model::Simple => 1,
        };
        optional_to_forced(&self.instance, cost)
    }
}

/// Parses a `roles` section against an instance's page table.
pub fn parse_roles(instance: &Instance, text: &str) -> Result<Vec<Role>, ReductionError> {
    let mut lines = Lines::new(text);
    let count: usize = {
        let v = lines.keyed("roles")?;
        lines.number(v)?
    };
    let mut roles = vec![None; instance.pages().len()];
    for _ in 0..count {
        let tokens = lines.next_tokens("role line")?;
        let [name, role, edge, group, vertex] = tokens.as_slice() else {
            return Err(lines.err("expected `<page-id> <role> <edge|-> <group|-> <vertex|->`").into());
        };
        let page = instance
            .page_by_name(name)
            .ok_or_else(|| lines.err(format!("unknown page `{name}`")))?;
        let parsed = match (*role, *edge, *group, *vertex) {
            ("vertex", "-", "-", v) => Role::Vertex(lines.number(v)?),
            (r, e, g, "-") => {
                let role = EdgeRole::ALL
                    .into_iter()
                    .find(|x| x.token() == r)
                    .ok_or_else(|| lines.err(format!("unknown role `{r}`")))?;
                Role::Edge {
                    role,
                    edge: lines.number(e)?,
                    group: lines.number(g)?,
                }
            }
            _ => return Err(lines.err("malformed role line").into()),
        };
        roles[page] = Some(parsed);
    }
    roles
        .into_iter()
        .enumerate()
        .map(|(page, r)| {
            r.ok_or_else(|| {
                FormatError::Syntax {
                    line: lines.line,
                    message: format!("no role for page `{}`", instance.page(page).name),
                }
                .into()
            })
        })
        .collect()
}

fn edge_page_id(n: usize, h: usize, role: EdgeRole, edge: usize, group: usize) -> PageId {
    n + (edge * h + group) * 6 + role.index()
}

/// `6mn + 3n + 1`.
pub fn default_h(graph: &Graph) -> u64 {
    let n = graph.vertex_count() as u64;
    let m = graph.edge_count() as u64;
    6 * m * n + 3 * n + 1
}

#[derive(Debug, Clone)]
enum Segment {
    Block(BlockKind, Vec<PageId>),
    VertexStart(usize),
    VertexEnd(usize),
}

/// Where a block lies relative to the four blocks of one group of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Before,
    First,
    Second,
    Between,
    Third,
    Fourth,
    After,
}

/// Blocks and vertex-page requests of the unit-cost construction, in order.
fn skeleton(graph: &Graph, h: usize) -> Vec<Segment> {
    let n = graph.vertex_count();
    let m = graph.edge_count();

    let mut kinds = vec![BlockKind::Initial];
    enum Item {
        Block(usize),
        Start(usize),
        End(usize),
    }
    let mut layout = vec![Item::Block(0)];
    for v in 0..n {
        layout.push(Item::Start(v));
        for e in graph.incident(v) {
            let (u, _) = graph.endpoints(e);
            let steps: [u8; 2] = if v == u { [1, 2] } else { [3, 4] };
            for group in 0..h {
                for step in steps {
                    layout.push(Item::Block(kinds.len()));
                    kinds.push(BlockKind::Phase {
                        vertex: v,
                        edge: e,
                        group,
                        step,
                    });
                }
            }
        }
        layout.push(Item::End(v));
    }
    layout.push(Item::Block(kinds.len()));
    kinds.push(BlockKind::Final);

    // position[e][g][step - 1] = block index
    let mut position = vec![vec![[0usize; 4]; h]; m];
    for (idx, kind) in kinds.iter().enumerate() {
        if let BlockKind::Phase {
            edge, group, step, ..
        } = *kind
        {
            position[edge][group][step as usize - 1] = idx;
        }
    }

    let stage = |e: usize, g: usize, x: usize| -> Stage {
        let p = &position[e][g];
        if x < p[0] {
            Stage::Before
        } else if x == p[0] {
            Stage::First
        } else if x == p[1] {
            Stage::Second
        } else if x < p[2] {
            Stage::Between
        } else if x == p[2] {
            Stage::Third
        } else if x == p[3] {
            Stage::Fourth
        } else {
            Stage::After
        }
    };

    let contents = |x: usize| -> Vec<PageId> {
        let mut pages = Vec::new();
        for e in 0..m {
            let id = |role, g| edge_page_id(n, h, role, e, g);
            for g in 0..h {
                match stage(e, g, x) {
                    Stage::Before => pages.push(id(EdgeRole::ABar, g)),
                    Stage::First => pages.extend([id(EdgeRole::ABar, g), id(EdgeRole::Alpha, g)]),
                    Stage::Second => pages.extend([id(EdgeRole::Alpha, g), id(EdgeRole::A, g)]),
                    Stage::Between | Stage::Third | Stage::Fourth => pages.push(id(EdgeRole::A, g)),
                    Stage::After => {}
                }
            }
            for g in 0..h {
                match stage(e, g, x) {
                    Stage::Before => {}
                    Stage::First | Stage::Second | Stage::Between => pages.push(id(EdgeRole::B, g)),
                    Stage::Third => pages.extend([id(EdgeRole::B, g), id(EdgeRole::Beta, g)]),
                    Stage::Fourth => pages.extend([id(EdgeRole::Beta, g), id(EdgeRole::BBar, g)]),
                    Stage::After => pages.push(id(EdgeRole::BBar, g)),
                }
            }
        }
        pages
    };

    layout
        .into_iter()
        .map(|item| match item {
            Item::Block(x) => Segment::Block(kinds[x], contents(x)),
            Item::Start(v) => Segment::VertexStart(v),
            Item::End(v) => Segment::VertexEnd(v),
        })
        .collect()
}

/// Inserts five blocks between every two consecutive blocks: an empty one,
/// the shared size-2 pages, the shared size-3 page, the shared size-2 pages
/// again and another empty one. They follow the end request of a phase that
/// closes at the first of the two blocks.
fn insert_bit_blocks(segments: Vec<Segment>, sizes: &[u64]) -> Vec<Segment> {
    let block_positions: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, Segment::Block(..)))
        .map(|(i, _)| i)
        .collect();

    let mut out = Vec::with_capacity(segments.len() * 3);
    let mut pending: Option<Vec<Segment>> = None;
    let mut next_block = 0usize;
    for (i, segment) in segments.iter().enumerate() {
        if !matches!(segment, Segment::VertexEnd(_)) {
            if let Some(inserted) = pending.take() {
                out.extend(inserted);
            }
        }
        out.push(segment.clone());
        if let Segment::Block(kind, pages) = segment {
            debug_assert_eq!(block_positions[next_block], i);
            next_block += 1;
            if let Some(&j) = block_positions.get(next_block) {
                let Segment::Block(next_kind, next_pages) = &segments[j] else {
                    unreachable!()
                };
                let shared: Vec<PageId> = pages
                    .iter()
                    .copied()
                    .filter(|p| next_pages.contains(p))
                    .collect();
                let of_size = |s: u64| -> Vec<PageId> {
                    shared.iter().copied().filter(|&p| sizes[p] == s).collect()
                };
                let vertex = match (kind.vertex(), next_kind.vertex()) {
                    (Some(a), Some(b)) if a == b => Some(a),
                    _ => None,
                };
                let block = |slot: u8, pages: Vec<PageId>| {
                    Segment::Block(BlockKind::Inserted { slot, vertex }, pages)
                };
                pending = Some(vec![
                    block(1, Vec::new()),
                    block(2, of_size(2)),
                    block(3, of_size(3)),
                    block(4, of_size(2)),
                    block(5, Vec::new()),
                ]);
            }
        }
    }
    if let Some(inserted) = pending {
        out.extend(inserted);
    }
    out
}

fn build(graph: &Graph, h: u64, model: Model) -> Result<ReductionOutput, ReductionError> {
    if h == 0 {
        return Err(ReductionError::ZeroH);
    }
    let n = graph.vertex_count();
    let m = graph.edge_count();
    let hh = h as usize;
    let scale = match model {
        Model::Simple => n as u64 + 1,
        Model::Fault | Model::Bit => 1,
    };

    let mut pages = Vec::with_capacity(n + 6 * m * hh);
    let mut roles = Vec::with_capacity(pages.capacity());
    for v in 0..n {
        pages.push(Page::new(format!("p{v}"), 1, 1));
        roles.push(Role::Vertex(v));
    }
    for edge in 0..m {
        for group in 0..hh {
            for role in EdgeRole::ALL {
                let size = role.size();
                let cost = match model {
                    Model::Fault => 1,
                    Model::Bit => size,
                    Model::Simple => scale,
                };
                pages.push(Page::new(format!("{}.{edge}.{group}", role.token()), size, cost));
                roles.push(Role::Edge { role, edge, group });
            }
        }
    }

    let mut segments = skeleton(graph, hh);
    if model == Model::Bit {
        let sizes: Vec<u64> = pages.iter().map(|p| p.size).collect();
        segments = insert_bit_blocks(segments, &sizes);
    }

    let mut kinds = Vec::new();
    let mut requests = Vec::new();
    for segment in segments {
        match segment {
            Segment::Block(kind, block_pages) => {
                let id = kinds.len();
                kinds.push(kind);
                requests.extend(block_pages.into_iter().map(|page| Request {
                    page,
                    block: Some(id),
                }));
            }
            Segment::VertexStart(v) | Segment::VertexEnd(v) => requests.push(Request {
                page: v,
                block: None,
            }),
        }
    }
    let d = kinds.len();
    let capacity = 2 * m as u64 * h + 1;
    let instance = Instance::new(capacity, pages, requests, kinds, Policy::Optional, scale)?;
    Ok(ReductionOutput {
        instance,
        graph: graph.clone(),
        model,
        h,
        d,
        roles,
        phase_order: (0..n).collect(),
    })
}

/// Unit-cost construction with `C = 2mH + 1` and `d = 4mH + 2` blocks.
pub fn reduce_fault_optional(graph: &Graph, h: u64) -> Result<ReductionOutput, ReductionError> {
    build(graph, h, Model::Fault)
}

/// Cost equals size, with `6d - 5` blocks after the insertions.
pub fn reduce_bit_optional(graph: &Graph, h: u64) -> Result<ReductionOutput, ReductionError> {
    build(graph, h, Model::Bit)
}

/// Two-cost construction: `C = 2m + 1`, `d = 4m + 2`, costs scaled by `n + 1`.
pub fn reduce_simple(graph: &Graph) -> ReductionOutput {
    build(graph, 1, Model::Simple).expect("H = 1 is valid")
}

pub fn reduce(graph: &Graph, model: Model, h: u64) -> Result<ReductionOutput, ReductionError> {
    match model {
        Model::Simple => Ok(reduce_simple(graph)),
        _ => build(graph, h, model),
    }
}

/// Optional-policy instance to forced-policy instance with equal optimum.
///
/// The cache grows by the largest page size `M` and every request is followed
/// by a request to a fresh page of size `M` costing `new_page_cost`. Fresh
/// pages inherit the block of the request they follow.
pub fn optional_to_forced(instance: &Instance, new_page_cost: u64) -> Result<Instance, ReductionError> {
    if instance.policy() != Policy::Optional {
        return Err(ReductionError::NotOptional);
    }
    let max_size = instance.max_page_size().max(1);
    let mut prefix = String::from("~q");
    while instance.pages().iter().any(|p| p.name.starts_with(&prefix)) {
        prefix.insert(0, '~');
    }

    let mut pages = instance.pages().to_vec();
    let mut requests = Vec::with_capacity(2 * instance.len());
    for (i, request) in instance.requests().iter().enumerate() {
        requests.push(*request);
        requests.push(Request {
            page: pages.len(),
            block: request.block,
        });
        pages.push(Page::new(format!("{prefix}{i}"), max_size, new_page_cost));
    }
    Ok(Instance::new(
        instance.capacity() + max_size,
        pages,
        requests,
        instance.blocks().iter().map(|b| b.kind).collect(),
        Policy::Forced,
        instance.cost_scale(),
    )?)
}
