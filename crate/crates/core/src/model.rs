//! Instances, gaps and normalized services.
//!
//! Time is discrete: position `t` is the index of the `t`-th request. A page
//! that keeps a gap cached occupies every position of the closed span between
//! the two requests delimiting that gap, endpoints included.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

/// Index into an instance's page table.
pub type PageId = usize;
/// Index into an instance's block list.
pub type BlockId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Page {
    pub name: String,
    pub size: u64,
    pub cost: u64,
}

impl Page {
    pub fn new(name: impl Into<String>, size: u64, cost: u64) -> Self {
        Self {
            name: name.into(),
            size,
            cost,
        }
    }
}

/// One entry of the request sequence. Its position is its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Request {
    pub page: PageId,
    /// `None` for requests that lie outside every block (vertex-page requests).
    pub block: Option<BlockId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Initial,
    Final,
    /// A block of the `vertex`-phase, associated with group `group` of edge
    /// `edge`; `step` is 1..=4 following the edge gadget's block order.
    Phase {
        vertex: usize,
        edge: usize,
        group: usize,
        step: u8,
    },
    /// One of the five blocks inserted between two consecutive blocks of the
    /// bit-model construction. `vertex` is set when both neighbours lie in the
    /// same phase.
    Inserted { slot: u8, vertex: Option<usize> },
}

impl BlockKind {
    /// Phase the block belongs to, if any.
    pub fn vertex(&self) -> Option<usize> {
        match *self {
            BlockKind::Phase { vertex, .. } => Some(vertex),
            BlockKind::Inserted { vertex, .. } => vertex,
            BlockKind::Initial | BlockKind::Final => None,
        }
    }

    pub fn is_inserted(&self) -> bool {
        matches!(self, BlockKind::Inserted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub kind: BlockKind,
    /// Half-open range of request positions. Empty blocks start where the
    /// previous block ended.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Optional,
    Forced,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Optional => "optional",
            Policy::Forced => "forced",
        })
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optional" => Ok(Policy::Optional),
            "forced" => Ok(Policy::Forced),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("capacity must be positive")]
    ZeroCapacity,
    #[error("cost scale must be positive")]
    ZeroScale,
    #[error("page `{0}` has zero size")]
    ZeroSize(String),
    #[error("page `{0}` has zero cost")]
    ZeroCost(String),
    #[error("duplicate page id `{0}`")]
    DuplicatePage(String),
    #[error("request {position} references unknown page {page}")]
    UnknownPage { position: usize, page: PageId },
    #[error("request {position} references unknown block {block}")]
    UnknownBlock { position: usize, block: BlockId },
    #[error("requests of block {block} are not contiguous or out of block order (position {position})")]
    BlockOrder { block: BlockId, position: usize },
    #[error("instance needs exactly one initial and one final block")]
    InitialFinal,
}

/// A general caching instance: capacity, page table, annotated request
/// sequence and policy. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    capacity: u64,
    pages: Vec<Page>,
    requests: Vec<Request>,
    blocks: Vec<Block>,
    policy: Policy,
    cost_scale: u64,
    /// Request positions of each page, ascending.
    occurrences: Vec<Vec<usize>>,
    /// For each position, the index of that request among the requests to its page.
    ordinal_at: Vec<usize>,
}

impl Instance {
    /// Builds an instance, deriving block spans from the request annotations.
    ///
    /// Block structure is optional: an instance may have no blocks at all.
    /// When blocks are present there must be exactly one `Initial` and one
    /// `Final` block, and each block's requests must be contiguous and appear
    /// in block order.
    pub fn new(
        capacity: u64,
        pages: Vec<Page>,
        requests: Vec<Request>,
        block_kinds: Vec<BlockKind>,
        policy: Policy,
        cost_scale: u64,
    ) -> Result<Self, ModelError> {
        if capacity == 0 {
            return Err(ModelError::ZeroCapacity);
        }
        if cost_scale == 0 {
            return Err(ModelError::ZeroScale);
        }
        let mut names = std::collections::HashSet::new();
        for page in &pages {
            if page.size == 0 {
                return Err(ModelError::ZeroSize(page.name.clone()));
            }
            if page.cost == 0 {
                return Err(ModelError::ZeroCost(page.name.clone()));
            }
            if !names.insert(page.name.as_str()) {
                return Err(ModelError::DuplicatePage(page.name.clone()));
            }
        }
        if !block_kinds.is_empty() {
            let initial = block_kinds
                .iter()
                .filter(|k| matches!(k, BlockKind::Initial))
                .count();
            let fin = block_kinds
                .iter()
                .filter(|k| matches!(k, BlockKind::Final))
                .count();
            if initial != 1 || fin != 1 {
                return Err(ModelError::InitialFinal);
            }
        }

        let mut occurrences = vec![Vec::new(); pages.len()];
        let mut ordinal_at = Vec::with_capacity(requests.len());
        let mut first = vec![None::<usize>; block_kinds.len()];
        let mut last = vec![None::<usize>; block_kinds.len()];
        let mut highest_block: Option<BlockId> = None;
        for (position, request) in requests.iter().enumerate() {
            let occ = occurrences
                .get_mut(request.page)
                .ok_or(ModelError::UnknownPage {
                    position,
                    page: request.page,
                })?;
            ordinal_at.push(occ.len());
            occ.push(position);
            if let Some(block) = request.block {
                if block >= block_kinds.len() {
                    return Err(ModelError::UnknownBlock { position, block });
                }
                if highest_block.is_some_and(|h| block < h) {
                    return Err(ModelError::BlockOrder { block, position });
                }
                // Contiguity: nothing else, not even an out-of-block request,
                // between two requests of one block.
                if let Some(prev) = last[block] {
                    if requests[prev + 1..position].iter().any(|r| r.block != Some(block)) {
                        return Err(ModelError::BlockOrder { block, position });
                    }
                }
                highest_block = Some(block);
                first[block].get_or_insert(position);
                last[block] = Some(position);
            }
        }

        let mut blocks = Vec::with_capacity(block_kinds.len());
        let mut cursor = 0usize;
        for (id, kind) in block_kinds.into_iter().enumerate() {
            let span = match (first[id], last[id]) {
                (Some(f), Some(l)) => f..l + 1,
                _ => cursor..cursor,
            };
            cursor = span.end;
            blocks.push(Block { kind, span });
        }

        Ok(Self {
            capacity,
            pages,
            requests,
            blocks,
            policy,
            cost_scale,
            occurrences,
            ordinal_at,
        })
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn page(&self, id: PageId) -> &Page {
        &self.pages[id]
    }

    pub fn page_by_name(&self, name: &str) -> Option<PageId> {
        self.pages.iter().position(|p| p.name == name)
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn cost_scale(&self) -> u64 {
        self.cost_scale
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Positions at which `page` is requested.
    pub fn occurrences(&self, page: PageId) -> &[usize] {
        &self.occurrences[page]
    }

    /// Index of the request at `position` among all requests to its page.
    pub fn ordinal_at(&self, position: usize) -> usize {
        self.ordinal_at[position]
    }

    pub fn gap_count(&self, page: PageId) -> usize {
        self.occurrences[page].len().saturating_sub(1)
    }

    /// Closed span `[t_k, t_{k+1}]` of a gap, or `None` if it does not exist.
    pub fn gap_span(&self, gap: Gap) -> Option<(usize, usize)> {
        let occ = self.occurrences.get(gap.page)?;
        if gap.ordinal + 1 < occ.len() {
            Some((occ[gap.ordinal], occ[gap.ordinal + 1]))
        } else {
            None
        }
    }

    pub fn max_page_size(&self) -> u64 {
        self.pages.iter().map(|p| p.size).max().unwrap_or(0)
    }

    /// Same instance with a different policy.
    pub fn with_policy(&self, policy: Policy) -> Instance {
        Instance {
            policy,
            ..self.clone()
        }
    }

    /// Same instance with a different cache size.
    pub fn with_capacity(&self, capacity: u64) -> Result<Instance, ModelError> {
        if capacity == 0 {
            return Err(ModelError::ZeroCapacity);
        }
        Ok(Instance {
            capacity,
            ..self.clone()
        })
    }

    /// The instance restricted to its first `len` requests.
    pub fn truncated(&self, len: usize) -> Instance {
        let len = len.min(self.requests.len());
        Instance::new(
            self.capacity,
            self.pages.clone(),
            self.requests[..len].to_vec(),
            self.blocks.iter().map(|b| b.kind).collect(),
            self.policy,
            self.cost_scale,
        )
        .expect("a prefix of a well-formed instance is well-formed")
    }

    /// Upper bound on savings: every gap of every page kept.
    pub fn total_gap_value(&self) -> u64 {
        (0..self.pages.len())
            .map(|p| self.pages[p].cost * self.gap_count(p) as u64)
            .sum()
    }
}

/// The interval between the `ordinal`-th and the next request to `page`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gap {
    pub page: PageId,
    pub ordinal: usize,
}

impl Gap {
    pub fn new(page: PageId, ordinal: usize) -> Self {
        Self { page, ordinal }
    }
}

/// A gap together with its closed span of request positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GapInterval {
    pub gap: Gap,
    pub start: usize,
    pub end: usize,
}

/// Every gap of every page, ordered by (page, ordinal).
pub fn enumerate_gaps(instance: &Instance) -> Vec<GapInterval> {
    let mut gaps = Vec::new();
    for page in 0..instance.pages().len() {
        for (ordinal, pair) in instance.occurrences(page).windows(2).enumerate() {
            gaps.push(GapInterval {
                gap: Gap::new(page, ordinal),
                start: pair[0],
                end: pair[1],
            });
        }
    }
    gaps
}

/// A normalized service: the set of gaps during which pages stay cached.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Service {
    chosen: BTreeSet<Gap>,
}

impl Service {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, gap: Gap) -> bool {
        self.chosen.insert(gap)
    }

    pub fn remove(&mut self, gap: &Gap) -> bool {
        self.chosen.remove(gap)
    }

    pub fn contains(&self, gap: &Gap) -> bool {
        self.chosen.contains(gap)
    }

    pub fn gaps(&self) -> impl Iterator<Item = &Gap> + '_ {
        self.chosen.iter()
    }

    pub fn len(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }

    /// Every gap of `page` is chosen.
    pub fn keep_page(&mut self, instance: &Instance, page: PageId) {
        for ordinal in 0..instance.gap_count(page) {
            self.chosen.insert(Gap::new(page, ordinal));
        }
    }
}

impl FromIterator<Gap> for Service {
    fn from_iter<I: IntoIterator<Item = Gap>>(iter: I) -> Self {
        Self {
            chosen: iter.into_iter().collect(),
        }
    }
}

impl Extend<Gap> for Service {
    fn extend<I: IntoIterator<Item = Gap>>(&mut self, iter: I) {
        self.chosen.extend(iter)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ServiceError {
    #[error("service references gap {ordinal} of page {page}, which does not exist")]
    UnknownGap { page: PageId, ordinal: usize },
    #[error("service is not valid: {0} violating position(s), first at {1}")]
    Invalid(usize, usize),
}

fn check_references(instance: &Instance, service: &Service) -> Result<(), ServiceError> {
    for gap in service.gaps() {
        if instance.gap_span(*gap).is_none() {
            return Err(ServiceError::UnknownGap {
                page: gap.page,
                ordinal: gap.ordinal,
            });
        }
    }
    Ok(())
}

/// Total size of cached pages at every position.
pub fn occupancy_profile(instance: &Instance, service: &Service) -> Result<Vec<u64>, ServiceError> {
    check_references(instance, service)?;
    let mut diff = vec![0i128; instance.len() + 1];
    // Gaps arrive ordered by (page, ordinal); runs of consecutive ordinals of
    // one page merge into a single interval so shared endpoints count once.
    let mut run: Option<(PageId, usize, usize, usize)> = None; // page, last ordinal, start, end
    let flush = |run: (PageId, usize, usize, usize), diff: &mut Vec<i128>| {
        let size = instance.page(run.0).size as i128;
        diff[run.2] += size;
        diff[run.3 + 1] -= size;
    };
    for gap in service.gaps() {
        let (start, end) = instance.gap_span(*gap).expect("checked above");
        run = match run {
            Some((page, ord, s, _)) if page == gap.page && ord + 1 == gap.ordinal => {
                Some((page, gap.ordinal, s, end))
            }
            Some(done) => {
                flush(done, &mut diff);
                Some((gap.page, gap.ordinal, start, end))
            }
            None => Some((gap.page, gap.ordinal, start, end)),
        };
    }
    if let Some(done) = run {
        flush(done, &mut diff);
    }
    let mut level = 0i128;
    Ok(diff[..instance.len()]
        .iter()
        .map(|d| {
            level += d;
            level as u64
        })
        .collect())
}

/// Whether the page requested at `position` is in the cache at that instant.
pub fn occupies_request(instance: &Instance, service: &Service, position: usize) -> bool {
    let page = instance.requests()[position].page;
    let k = instance.ordinal_at(position);
    (k > 0 && service.contains(&Gap::new(page, k - 1))) || service.contains(&Gap::new(page, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Cached pages exceed the capacity.
    Capacity { load: u64 },
    /// Forced policy: the requested page cannot be loaded momentarily.
    MomentaryFit { page: PageId, load: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub position: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violating_positions(&self) -> Vec<usize> {
        let mut positions: Vec<usize> = self.violations.iter().map(|v| v.position).collect();
        positions.dedup();
        positions
    }
}

/// Checks a service against the instance's capacity and policy.
///
/// Unknown gap references are reported as an error rather than as a
/// violation.
pub fn validate_service(
    instance: &Instance,
    service: &Service,
) -> Result<ValidationReport, ServiceError> {
    let profile = occupancy_profile(instance, service)?;
    let capacity = instance.capacity();
    let mut violations = Vec::new();
    for (position, &load) in profile.iter().enumerate() {
        if load > capacity {
            violations.push(Violation {
                position,
                kind: ViolationKind::Capacity { load },
            });
        }
        if instance.policy() == Policy::Forced && !occupies_request(instance, service, position) {
            let page = instance.requests()[position].page;
            if instance.page(page).size + load > capacity {
                violations.push(Violation {
                    position,
                    kind: ViolationKind::MomentaryFit { page, load },
                });
            }
        }
    }
    Ok(ValidationReport { violations })
}

/// Cost avoided by the service: each chosen gap saves one fault on its page.
pub fn savings(instance: &Instance, service: &Service) -> Result<u64, ServiceError> {
    let report = validate_service(instance, service)?;
    if let Some(first) = report.violations.first() {
        return Err(ServiceError::Invalid(
            report.violating_positions().len(),
            first.position,
        ));
    }
    Ok(service.gaps().map(|g| instance.page(g.page).cost).sum())
}
