#![allow(dead_code)]

use general_caching::model::{Instance, Page, Policy, Request};
use rand::Rng;

/// Up to 8 pages of size 1..=3 and cost 1..=4, up to 14 requests, `C <= 7`.
pub fn random_tiny(rng: &mut impl Rng, policy: Policy) -> Instance {
    let page_count = rng.gen_range(1..=8);
    let pages: Vec<Page> = (0..page_count)
        .map(|i| Page::new(format!("p{i}"), rng.gen_range(1..=3), rng.gen_range(1..=4)))
        .collect();
    let len = rng.gen_range(1..=14);
    let requests = (0..len)
        .map(|_| Request {
            page: rng.gen_range(0..page_count),
            block: None,
        })
        .collect();
    Instance::new(rng.gen_range(1..=7), pages, requests, vec![], policy, 1).expect("well-formed")
}

pub fn plain(capacity: u64, pages: &[(u64, u64)], seq: &[usize], policy: Policy) -> Instance {
    let pages = pages
        .iter()
        .enumerate()
        .map(|(i, &(s, c))| Page::new(format!("p{i}"), s, c))
        .collect();
    let requests = seq.iter().map(|&page| Request { page, block: None }).collect();
    Instance::new(capacity, pages, requests, vec![], policy, 1).expect("well-formed")
}
