//! Exact optimal-savings computation.
//!
//! [`solve_exact`] sweeps the request sequence once. Its state at a position
//! boundary is the set of pages whose chosen gap crosses that boundary; the
//! only decision at a request is whether the requested page keeps its next
//! gap. [`solve_brute_force`] enumerates every gap subset and is used as an
//! independent oracle.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt::Write as _;
use std::hash::BuildHasherDefault;

use thiserror::Error;

use crate::model::{enumerate_gaps, validate_service, Gap, Instance, Policy, Service};

/// Default cap on DP states per layer.
pub const DEFAULT_BUDGET: u64 = 5_000_000;
/// Largest gap count accepted by the brute-force oracle.
pub const BRUTE_FORCE_GAP_LIMIT: usize = 24;

type FixedState = BuildHasherDefault<DefaultHasher>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("instance too large for exact solve: {states} states at position {position} exceed the budget of {budget}")]
    TooLarge {
        position: usize,
        states: u64,
        budget: u64,
    },
    #[error("instance too large for exact solve: {live} simultaneously live pages (limit 128)")]
    TooManyLivePages { live: usize },
    #[error("brute force refuses {gaps} gaps (limit {limit})")]
    TooManyGaps { gaps: usize, limit: usize },
    #[error("no valid service exists: the request at position {position} cannot be served")]
    Infeasible { position: usize },
    #[error("interval packing export needs the optional policy")]
    ForcedPolicy,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Explored {
    pub states: u64,
    pub transitions: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub optimal_savings: u64,
    pub witness: Service,
    pub explored: Explored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Maximum number of DP states allowed at any position boundary.
    pub budget: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Assigns a bit to every page that can ever be cached, reusing bits of pages
/// whose last request has passed.
fn assign_slots(instance: &Instance) -> Result<Vec<Option<u32>>, SolveError> {
    let capacity = instance.capacity();
    let mut order: Vec<usize> = (0..instance.pages().len())
        .filter(|&p| instance.gap_count(p) > 0 && instance.page(p).size <= capacity)
        .collect();
    order.sort_by_key(|&p| instance.occurrences(p)[0]);

    let mut slots = vec![None; instance.pages().len()];
    let mut free: BinaryHeap<Reverse<u32>> = BinaryHeap::new();
    let mut active: BinaryHeap<Reverse<(usize, u32)>> = BinaryHeap::new();
    let mut next_slot = 0u32;
    for page in order {
        let occ = instance.occurrences(page);
        let (first, last) = (occ[0], occ[occ.len() - 1]);
        while let Some(&Reverse((end, slot))) = active.peek() {
            if end > first {
                break;
            }
            active.pop();
            free.push(Reverse(slot));
        }
        let slot = match free.pop() {
            Some(Reverse(s)) => s,
            None => {
                next_slot += 1;
                next_slot - 1
            }
        };
        if slot >= 128 {
            return Err(SolveError::TooManyLivePages {
                live: active.len() + 1,
            });
        }
        slots[page] = Some(slot);
        active.push(Reverse((last, slot)));
    }
    Ok(slots)
}

/// Number of subsets of `sizes` with total at most `capacity`, saturating.
fn feasible_subsets(sizes: &[u64], capacity: u64) -> Option<u64> {
    let total: u64 = sizes.iter().sum();
    if total <= capacity {
        return Some(if sizes.len() >= 64 { u64::MAX } else { 1u64 << sizes.len() });
    }
    let dim = capacity as usize;
    if dim > 1 << 20 {
        return None;
    }
    let mut count = vec![0u64; dim + 1];
    count[0] = 1;
    for &s in sizes {
        let s = s as usize;
        if s > dim {
            continue;
        }
        for w in (s..=dim).rev() {
            count[w] = count[w].saturating_add(count[w - s]);
        }
    }
    Some(count.iter().fold(0u64, |acc, &c| acc.saturating_add(c)))
}

/// Refuses instances whose live pages at some boundary admit more feasible
/// subsets than the budget allows.
fn check_budget(instance: &Instance, slots: &[Option<u32>], budget: u64) -> Result<(), SolveError> {
    let mut starts: Vec<Vec<usize>> = vec![Vec::new(); instance.len()];
    let mut ends: Vec<Vec<usize>> = vec![Vec::new(); instance.len()];
    for (page, slot) in slots.iter().enumerate() {
        if slot.is_some() {
            let occ = instance.occurrences(page);
            starts[occ[0]].push(page);
            ends[occ[occ.len() - 1]].push(page);
        }
    }
    let mut live: Vec<usize> = Vec::new();
    for position in 0..instance.len() {
        live.retain(|p| !ends[position].contains(p));
        live.extend(&starts[position]);
        let n = live.len();
        if n < 64 && (1u64 << n) <= budget {
            continue;
        }
        let sizes: Vec<u64> = live.iter().map(|&p| instance.page(p).size).collect();
        if let Some(count) = feasible_subsets(&sizes, instance.capacity()) {
            if count > budget {
                return Err(SolveError::TooLarge {
                    position,
                    states: count,
                    budget,
                });
            }
        }
    }
    Ok(())
}

struct Layer {
    states: Vec<u128>,
    loads: Vec<u64>,
    values: Vec<u64>,
    index: HashMap<u128, u32, FixedState>,
    /// Predecessor entry and whether the requested page opened its next gap.
    back: Vec<(u32, bool)>,
}

impl Layer {
    fn new() -> Self {
        Self {
            states: Vec::new(),
            loads: Vec::new(),
            values: Vec::new(),
            index: HashMap::default(),
            back: Vec::new(),
        }
    }

    fn offer(&mut self, state: u128, load: u64, value: u64, parent: u32, opened: bool) {
        match self.index.get(&state) {
            Some(&i) => {
                let i = i as usize;
                if value > self.values[i] {
                    self.values[i] = value;
                    self.back[i] = (parent, opened);
                }
            }
            None => {
                self.index.insert(state, self.states.len() as u32);
                self.states.push(state);
                self.loads.push(load);
                self.values.push(value);
                self.back.push((parent, opened));
            }
        }
    }
}

/// Maximum-savings valid service, computed exactly.
pub fn solve_exact(instance: &Instance) -> Result<SolveResult, SolveError> {
    solve_exact_with(instance, SolveOptions::default())
}

pub fn solve_exact_with(instance: &Instance, options: SolveOptions) -> Result<SolveResult, SolveError> {
    let slots = assign_slots(instance)?;
    check_budget(instance, &slots, options.budget)?;

    let capacity = instance.capacity();
    let forced = instance.policy() == Policy::Forced;
    let mut explored = Explored::default();
    let mut history: Vec<Vec<(u32, bool)>> = Vec::with_capacity(instance.len());

    let mut current = Layer::new();
    current.offer(0, 0, 0, 0, false);

    for (position, request) in instance.requests().iter().enumerate() {
        let page = instance.page(request.page);
        let ordinal = instance.ordinal_at(position);
        let bit = slots[request.page].map(|s| 1u128 << s);
        let can_open = bit.is_some() && ordinal < instance.gap_count(request.page);

        let mut next = Layer::new();
        for i in 0..current.states.len() {
            let state = current.states[i];
            let held = bit.is_some_and(|b| state & b != 0);
            let rest = bit.map_or(state, |b| state & !b);
            let rest_load = current.loads[i] - if held { page.size } else { 0 };
            for open in [false, true] {
                if open && !can_open {
                    continue;
                }
                explored.transitions += 1;
                let occupies = held || open;
                let load = rest_load + if occupies { page.size } else { 0 };
                if load > capacity {
                    continue;
                }
                if forced && !occupies && rest_load + page.size > capacity {
                    continue;
                }
                let (state, value, kept_load) = if open {
                    (rest | bit.unwrap(), current.values[i] + page.cost, rest_load + page.size)
                } else {
                    (rest, current.values[i], rest_load)
                };
                next.offer(state, kept_load, value, i as u32, open);
            }
        }
        if next.states.is_empty() {
            return Err(SolveError::Infeasible { position });
        }
        if next.states.len() as u64 > options.budget {
            return Err(SolveError::TooLarge {
                position,
                states: next.states.len() as u64,
                budget: options.budget,
            });
        }
        explored.states += next.states.len() as u64;
        history.push(std::mem::take(&mut next.back));
        current = next;
    }

    // Every gap closes at its second request, so only the empty state remains.
    let mut idx = current
        .states
        .iter()
        .position(|&s| s == 0)
        .expect("all gaps end by the last request");
    let optimal_savings = current.values[idx];
    let mut witness = Service::new();
    for position in (0..instance.len()).rev() {
        let (parent, opened) = history[position][idx];
        if opened {
            let page = instance.requests()[position].page;
            witness.insert(Gap::new(page, instance.ordinal_at(position)));
        }
        idx = parent as usize;
    }

    Ok(SolveResult {
        optimal_savings,
        witness,
        explored,
    })
}

/// True when sorted set `a` precedes sorted set `b` lexicographically.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    if diff == 0 {
        return false;
    }
    let i = diff.trailing_zeros();
    if a & (1 << i) != 0 {
        // `a` continues with element i; `b` continues with something larger or ends.
        (b >> i) != 0
    } else {
        (a >> i) == 0
    }
}

/// Exhaustive search over all gap subsets. Ties go to the lexicographically
/// smallest set of gaps in (page, ordinal) order.
pub fn solve_brute_force(instance: &Instance) -> Result<SolveResult, SolveError> {
    let gaps = enumerate_gaps(instance);
    if gaps.len() > BRUTE_FORCE_GAP_LIMIT {
        return Err(SolveError::TooManyGaps {
            gaps: gaps.len(),
            limit: BRUTE_FORCE_GAP_LIMIT,
        });
    }
    let costs: Vec<u64> = gaps.iter().map(|g| instance.page(g.gap.page).cost).collect();
    let service_of = |mask: u32| -> Service {
        (0..gaps.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| gaps[i].gap)
            .collect()
    };

    let mut best: Option<(u64, u32)> = None;
    let mut explored = Explored::default();
    for mask in 0..(1u32 << gaps.len()) {
        explored.states += 1;
        let value: u64 = (0..gaps.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| costs[i])
            .sum();
        if let Some((best_value, best_mask)) = best {
            if value < best_value || (value == best_value && !lex_less(mask, best_mask)) {
                continue;
            }
        }
        explored.transitions += 1;
        let report = validate_service(instance, &service_of(mask))
            .expect("enumerated gaps exist");
        if report.is_valid() {
            best = Some((value, mask));
        }
    }

    match best {
        Some((value, mask)) => Ok(SolveResult {
            optimal_savings: value,
            witness: service_of(mask),
            explored,
        }),
        None => {
            // Only the forced policy can reject the empty service.
            let report = validate_service(instance, &Service::new()).expect("empty service");
            Err(SolveError::Infeasible {
                position: report.violations.first().map_or(0, |v| v.position),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackedInterval {
    pub start: usize,
    pub end: usize,
    pub weight: u64,
    pub value: u64,
}

/// Closed integer intervals with weights and values; a subset is feasible when
/// the weight covering every point stays within `limit`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalPackingInstance {
    pub limit: u64,
    pub intervals: Vec<PackedInterval>,
}

impl IntervalPackingInstance {
    pub fn to_text(&self) -> String {
        let mut out = format!("interval-packing 1\nlimit {}\n", self.limit);
        for iv in &self.intervals {
            let _ = writeln!(out, "{} {} {} {}", iv.start, iv.end, iv.weight, iv.value);
        }
        out
    }
}

/// One interval per gap, weighted by page size and valued by page cost, under
/// limit `C`. Point `t` stands for the stretch between requests `t` and
/// `t + 1`, so the gap `[t_k, t_{k+1}]` becomes `[t_k, t_{k+1} - 1]` and
/// consecutive gaps of one page do not meet. The peak load over these points
/// equals the peak occupancy over request positions, which makes the packing
/// optimum equal the optimal savings.
pub fn export_interval_packing(instance: &Instance) -> Result<IntervalPackingInstance, SolveError> {
    if instance.policy() == Policy::Forced {
        return Err(SolveError::ForcedPolicy);
    }
    let intervals = enumerate_gaps(instance)
        .into_iter()
        .map(|g| {
            let page = instance.page(g.gap.page);
            PackedInterval {
                start: g.start,
                end: g.end - 1,
                weight: page.size,
                value: page.cost,
            }
        })
        .collect();
    Ok(IntervalPackingInstance {
        limit: instance.capacity(),
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{savings, Page, Request};

    fn inst(capacity: u64, pages: &[(u64, u64)], seq: &[usize], policy: Policy) -> Instance {
        let pages = pages
            .iter()
            .enumerate()
            .map(|(i, &(s, c))| Page::new(format!("p{i}"), s, c))
            .collect();
        let requests = seq.iter().map(|&page| Request { page, block: None }).collect();
        Instance::new(capacity, pages, requests, vec![], policy, 1).unwrap()
    }

    #[test]
    fn lex_order_on_masks() {
        // {0} < {0,1} < {1}
        assert!(lex_less(0b01, 0b11));
        assert!(lex_less(0b11, 0b10));
        assert!(lex_less(0b01, 0b10));
        assert!(!lex_less(0b10, 0b01));
        assert!(lex_less(0b00, 0b01));
        assert!(!lex_less(0b101, 0b101));
    }

    #[test]
    fn no_gaps() {
        let i = inst(3, &[(1, 1), (1, 1)], &[0, 1], Policy::Optional);
        for r in [solve_exact(&i).unwrap(), solve_brute_force(&i).unwrap()] {
            assert_eq!(r.optimal_savings, 0);
            assert!(r.witness.is_empty());
        }
        let empty = inst(3, &[], &[], Policy::Optional);
        assert_eq!(solve_exact(&empty).unwrap().optimal_savings, 0);
    }

    #[test]
    fn one_page_twice() {
        let i = inst(2, &[(2, 5)], &[0, 0], Policy::Optional);
        assert_eq!(solve_exact(&i).unwrap().optimal_savings, 5);
        assert_eq!(solve_brute_force(&i).unwrap().optimal_savings, 5);
    }

    #[test]
    fn pqpq_capacity_two_and_four() {
        // Hand enumeration: {} valid, {p} valid, {q} valid, {p,q} overlaps on [1,2] with load 4.
        let i = inst(2, &[(2, 1), (2, 1)], &[0, 1, 0, 1], Policy::Optional);
        let brute = solve_brute_force(&i).unwrap();
        assert_eq!(brute.optimal_savings, 1);
        assert_eq!(brute.witness, [Gap::new(0, 0)].into_iter().collect());
        assert_eq!(solve_exact(&i).unwrap().optimal_savings, 1);

        let wide = i.with_capacity(4).unwrap();
        assert_eq!(solve_brute_force(&wide).unwrap().optimal_savings, 2);
        assert_eq!(solve_exact(&wide).unwrap().optimal_savings, 2);
    }

    #[test]
    fn witness_is_valid_and_optimal() {
        let i = inst(
            4,
            &[(2, 3), (1, 1), (3, 4), (1, 2)],
            &[0, 1, 2, 0, 3, 1, 2, 3, 0, 2],
            Policy::Optional,
        );
        let r = solve_exact(&i).unwrap();
        assert_eq!(savings(&i, &r.witness).unwrap(), r.optimal_savings);
        assert_eq!(r.optimal_savings, solve_brute_force(&i).unwrap().optimal_savings);
    }

    #[test]
    fn forced_unservable() {
        let i = inst(1, &[(2, 1)], &[0, 0], Policy::Forced);
        assert_eq!(solve_exact(&i), Err(SolveError::Infeasible { position: 0 }));
        assert_eq!(solve_brute_force(&i), Err(SolveError::Infeasible { position: 0 }));
    }

    #[test]
    fn forced_is_at_most_optional() {
        // Keeping p (size 2) over q's request leaves no room to load q under C = 3.
        let i = inst(3, &[(2, 5), (2, 1)], &[0, 1, 0], Policy::Forced);
        assert_eq!(solve_exact(&i).unwrap().optimal_savings, 0);
        assert_eq!(solve_brute_force(&i).unwrap().optimal_savings, 0);
        let optional = i.with_policy(Policy::Optional);
        assert_eq!(solve_exact(&optional).unwrap().optimal_savings, 5);
    }

    #[test]
    fn budget_refusal() {
        // Ten size-1 pages all live at once: 1024 feasible subsets.
        let seq: Vec<usize> = (0..10).chain(0..10).collect();
        let pages = vec![(1, 1); 10];
        let i = inst(10, &pages, &seq, Policy::Optional);
        let err = solve_exact_with(&i, SolveOptions { budget: 100 }).unwrap_err();
        assert!(matches!(err, SolveError::TooLarge { .. }));
        assert_eq!(
            solve_exact_with(&i, SolveOptions { budget: 2000 }).unwrap().optimal_savings,
            10
        );
    }

    #[test]
    fn brute_force_gap_guard() {
        let seq: Vec<usize> = vec![0; 26];
        let i = inst(1, &[(1, 1)], &seq, Policy::Optional);
        assert_eq!(
            solve_brute_force(&i),
            Err(SolveError::TooManyGaps { gaps: 25, limit: 24 })
        );
        assert_eq!(solve_exact(&i).unwrap().optimal_savings, 25);
    }

    #[test]
    fn feasible_subset_count() {
        assert_eq!(feasible_subsets(&[1, 1, 1], 3), Some(8));
        assert_eq!(feasible_subsets(&[2, 2, 2], 4), Some(7));
        assert_eq!(feasible_subsets(&[3, 2], 2), Some(2));
    }

    #[test]
    fn packing_export() {
        let i = inst(3, &[(2, 2), (1, 1)], &[0, 1, 0, 1, 0], Policy::Optional);
        let packing = export_interval_packing(&i).unwrap();
        assert_eq!(packing.intervals.len(), enumerate_gaps(&i).len());
        assert_eq!(
            packing.to_text(),
            "interval-packing 1\nlimit 3\n0 1 2 2\n2 3 2 2\n1 2 1 1\n"
        );
        assert_eq!(
            export_interval_packing(&i.with_policy(Policy::Forced)),
            Err(SolveError::ForcedPolicy)
        );
    }
}
