//! Line-based text formats for instances and services.
//!
//! ```text
//! caching-instance 1
//! cache <C>
//! policy optional|forced
//! scale <cost_scale>
//! pages <P>
//! <id> <size> <cost>            (P lines)
//! blocks <d>
//! <id> <kind> [<vertex>]        (d lines)
//! requests <R>
//! <page-id> <block-id|->        (R lines)
//! ```
//!
//! Block kinds are `initial`, `final`, `phase/<edge>/<group>/<step>` followed
//! by the phase vertex, and `inserted/<slot>` optionally followed by a vertex.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{BlockKind, Gap, Instance, ModelError, Page, Policy, Request, Service};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unexpected end of input, expected {0}")]
    Eof(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Cursor over non-empty lines, tracking 1-based line numbers.
pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    pub(crate) line: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    pub(crate) fn next_tokens(&mut self, what: &'static str) -> Result<Vec<&'a str>, FormatError> {
        self.try_next_tokens()?.ok_or(FormatError::Eof(what))
    }

    pub(crate) fn try_next_tokens(&mut self) -> Result<Option<Vec<&'a str>>, FormatError> {
        for (idx, raw) in self.inner.by_ref() {
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            self.line = idx + 1;
            return Ok(Some(trimmed.split_whitespace().collect()));
        }
        Ok(None)
    }

    pub(crate) fn err(&self, message: impl Into<String>) -> FormatError {
        FormatError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    /// Reads a `<keyword> <value>` line.
    pub(crate) fn keyed(&mut self, keyword: &'static str) -> Result<&'a str, FormatError> {
        let tokens = self.next_tokens(keyword)?;
        match tokens.as_slice() {
            [k, v] if *k == keyword => Ok(v),
            _ => Err(self.err(format!("expected `{keyword} <value>`"))),
        }
    }

    pub(crate) fn number<T: std::str::FromStr>(&self, token: &str) -> Result<T, FormatError> {
        token
            .parse()
            .map_err(|_| self.err(format!("invalid number `{token}`")))
    }
}

fn block_kind_text(kind: &BlockKind) -> String {
    match *kind {
        BlockKind::Initial => "initial".to_string(),
        BlockKind::Final => "final".to_string(),
        BlockKind::Phase {
            vertex,
            edge,
            group,
            step,
        } => format!("phase/{edge}/{group}/{step} {vertex}"),
        BlockKind::Inserted { slot, vertex } => match vertex {
            Some(v) => format!("inserted/{slot} {v}"),
            None => format!("inserted/{slot}"),
        },
    }
}

pub fn write_instance(instance: &Instance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "caching-instance 1");
    let _ = writeln!(out, "cache {}", instance.capacity());
    let _ = writeln!(out, "policy {}", instance.policy());
    let _ = writeln!(out, "scale {}", instance.cost_scale());
    let _ = writeln!(out, "pages {}", instance.pages().len());
    for page in instance.pages() {
        let _ = writeln!(out, "{} {} {}", page.name, page.size, page.cost);
    }
    let _ = writeln!(out, "blocks {}", instance.blocks().len());
    for (id, block) in instance.blocks().iter().enumerate() {
        let _ = writeln!(out, "{id} {}", block_kind_text(&block.kind));
    }
    let _ = writeln!(out, "requests {}", instance.len());
    for request in instance.requests() {
        let page = &instance.page(request.page).name;
        match request.block {
            Some(b) => {
                let _ = writeln!(out, "{page} {b}");
            }
            None => {
                let _ = writeln!(out, "{page} -");
            }
        }
    }
    out
}

fn parse_block_kind(lines: &Lines<'_>, tokens: &[&str]) -> Result<BlockKind, FormatError> {
    let vertex = match tokens.get(2) {
        Some(v) => Some(lines.number::<usize>(v)?),
        None => None,
    };
    if tokens.len() > 3 {
        return Err(lines.err("trailing tokens in block line"));
    }
    let mut parts = tokens[1].split('/');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let kind = match (head, rest.as_slice(), vertex) {
        ("initial", [], None) => BlockKind::Initial,
        ("final", [], None) => BlockKind::Final,
        ("phase", [e, g, s], Some(vertex)) => BlockKind::Phase {
            vertex,
            edge: lines.number(e)?,
            group: lines.number(g)?,
            step: lines.number(s)?,
        },
        ("inserted", [slot], vertex) => BlockKind::Inserted {
            slot: lines.number(slot)?,
            vertex,
        },
        _ => return Err(lines.err(format!("invalid block kind `{}`", tokens[1..].join(" ")))),
    };
    Ok(kind)
}

fn parse_instance_prefix(text: &str) -> Result<(Instance, Lines<'_>), FormatError> {
    let mut lines = Lines::new(text);
    let header = lines.next_tokens("header")?;
    if header != ["caching-instance", "1"] {
        return Err(lines.err("expected `caching-instance 1`"));
    }
    let capacity: u64 = {
        let v = lines.keyed("cache")?;
        lines.number(v)?
    };
    let policy_token = lines.keyed("policy")?;
    let policy: Policy = policy_token.parse().map_err(|e: String| lines.err(e))?;
    let scale: u64 = {
        let v = lines.keyed("scale")?;
        lines.number(v)?
    };

    let page_count: usize = {
        let v = lines.keyed("pages")?;
        lines.number(v)?
    };
    let mut pages = Vec::with_capacity(page_count);
    let mut by_name = std::collections::HashMap::new();
    for _ in 0..page_count {
        let tokens = lines.next_tokens("page line")?;
        let [name, size, cost] = tokens.as_slice() else {
            return Err(lines.err("expected `<id> <size> <cost>`"));
        };
        if by_name.insert(name.to_string(), pages.len()).is_some() {
            return Err(lines.err(format!("duplicate page id `{name}`")));
        }
        pages.push(Page::new(*name, lines.number(size)?, lines.number(cost)?));
    }

    let block_count: usize = {
        let v = lines.keyed("blocks")?;
        lines.number(v)?
    };
    let mut kinds = Vec::with_capacity(block_count);
    for expected in 0..block_count {
        let tokens = lines.next_tokens("block line")?;
        if tokens.len() < 2 {
            return Err(lines.err("expected `<id> <kind> [<vertex>]`"));
        }
        let id: usize = lines.number(tokens[0])?;
        if id != expected {
            return Err(lines.err(format!("block id {id} out of order, expected {expected}")));
        }
        kinds.push(parse_block_kind(&lines, &tokens)?);
    }

    let request_count: usize = {
        let v = lines.keyed("requests")?;
        lines.number(v)?
    };
    let mut requests = Vec::with_capacity(request_count);
    for _ in 0..request_count {
        let tokens = lines.next_tokens("request line")?;
        let [name, block] = tokens.as_slice() else {
            return Err(lines.err("expected `<page-id> <block-id|->`"));
        };
        let page = *by_name
            .get(*name)
            .ok_or_else(|| lines.err(format!("unknown page `{name}`")))?;
        let block = match *block {
            "-" => None,
            b => Some(lines.number(b)?),
        };
        requests.push(Request { page, block });
    }
    let instance = Instance::new(capacity, pages, requests, kinds, policy, scale)?;
    Ok((instance, lines))
}

pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let (instance, mut lines) = parse_instance_prefix(text)?;
    if lines.try_next_tokens()?.is_some() {
        return Err(lines.err("trailing content after request list"));
    }
    Ok(instance)
}

/// Parses an instance followed by arbitrary trailing sections, returning the
/// remaining text starting at the first unparsed line.
pub fn parse_instance_with_rest(text: &str) -> Result<(Instance, &str), FormatError> {
    let (instance, lines) = parse_instance_prefix(text)?;
    let consumed = lines.line;
    let offset = text
        .split_inclusive('\n')
        .take(consumed)
        .map(str::len)
        .sum::<usize>();
    Ok((instance, &text[offset..]))
}

pub fn write_service(instance: &Instance, service: &Service) -> String {
    let mut out = String::from("service 1\n");
    for gap in service.gaps() {
        let _ = writeln!(out, "{} {}", instance.page(gap.page).name, gap.ordinal);
    }
    out
}

/// Parses a service against an instance's page table. Gap existence is not
/// checked here; `validate_service` reports unknown gaps.
pub fn parse_service(instance: &Instance, text: &str) -> Result<Service, FormatError> {
    let mut lines = Lines::new(text);
    let header = lines.next_tokens("header")?;
    if header != ["service", "1"] {
        return Err(lines.err("expected `service 1`"));
    }
    let mut service = Service::new();
    while let Some(tokens) = lines.try_next_tokens()? {
        let [name, ordinal] = tokens.as_slice() else {
            return Err(lines.err("expected `<page-id> <ordinal>`"));
        };
        let page = instance
            .page_by_name(name)
            .ok_or_else(|| lines.err(format!("unknown page `{name}`")))?;
        service.insert(Gap::new(page, lines.number(ordinal)?));
    }
    Ok(service)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "caching-instance 1
cache 3
policy forced
scale 2
pages 2
x 2 2
p0 1 1
blocks 4
0 initial
1 phase/0/0/1 0
2 inserted/3
3 final
requests 5
x 0
p0 -
x 1
p0 -
x 3
";

    #[test]
    fn sample_round_trips_bit_exact() {
        let instance = parse_instance(SAMPLE).unwrap();
        assert_eq!(instance.capacity(), 3);
        assert_eq!(instance.policy(), Policy::Forced);
        assert_eq!(instance.cost_scale(), 2);
        assert_eq!(instance.blocks()[2].span, 3..3);
        assert_eq!(write_instance(&instance), SAMPLE);
    }

    #[test]
    fn service_round_trip() {
        let instance = parse_instance(SAMPLE).unwrap();
        let text = "service 1\nx 1\nx 0\n";
        let service = parse_service(&instance, text).unwrap();
        assert_eq!(service.len(), 2);
        assert_eq!(write_service(&instance, &service), "service 1\nx 0\nx 1\n");
    }

    #[test]
    fn reports_line_numbers() {
        let broken = SAMPLE.replace("x 2 2", "x two 2");
        assert!(matches!(
            parse_instance(&broken),
            Err(FormatError::Syntax { line: 6, .. })
        ));
        let unknown = SAMPLE.replace("p0 -\nx 1", "q -\nx 1");
        assert!(parse_instance(&unknown).is_err());
        assert!(matches!(parse_instance("caching-instance 2\n"), Err(FormatError::Syntax { .. })));
        assert!(matches!(parse_instance("caching-instance 1\n"), Err(FormatError::Eof(_))));
    }

    #[test]
    fn trailing_sections() {
        let text = format!("{SAMPLE}roles 0\n");
        assert!(parse_instance(&text).is_err());
        let (_, rest) = parse_instance_with_rest(&text).unwrap();
        assert_eq!(rest, "roles 0\n");
    }
}
