use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::context::CompletionRequest;
use crate::graph::{ChunkId, TripleKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub citations: BTreeSet<ChunkId>,
}

impl ProposedTriple {
    pub fn key(&self) -> TripleKey {
        TripleKey::new(&self.subject, &self.relation, &self.object)
    }
}

impl fmt::Display for ProposedTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} | {} | {})", self.subject, self.relation, self.object)?;
        if !self.citations.is_empty() {
            let ids: Vec<&str> = self.citations.iter().map(ChunkId::as_str).collect();
            write!(f, " [cites: {}]", ids.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub triples: Vec<ProposedTriple>,
    /// Lines that opened a triple record but could not be read.
    pub malformed: usize,
}

const CITES: &str = "[cites:";

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    if let Some(rest) = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")) {
        return rest.trim_start();
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        if let Some(rest) = line[digits..].strip_prefix(". ").or_else(|| line[digits..].strip_prefix(") ")) {
            return rest.trim_start();
        }
    }
    line
}

fn parse_record(line: &str) -> Option<ProposedTriple> {
    let (body, cites) = match line.find(CITES) {
        Some(i) => (line[..i].trim_end(), Some(&line[i..])),
        None => (line.trim_end(), None),
    };
    let inner = body.strip_prefix('(')?.strip_suffix(')')?;
    let parts: Vec<&str> = inner.split('|').map(str::trim).collect();
    let [subject, relation, object] = parts.as_slice() else {
        return None;
    };
    if subject.is_empty() || relation.is_empty() || object.is_empty() {
        return None;
    }
    let citations = match cites {
        None => BTreeSet::new(),
        Some(c) => {
            let list = c.strip_prefix(CITES)?.trim_end().strip_suffix(']')?;
            if list.contains('[') || list.contains(']') {
                return None;
            }
            list.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(ChunkId::from)
                .collect()
        }
    };
    Some(ProposedTriple {
        subject: subject.to_string(),
        relation: relation.to_string(),
        object: object.to_string(),
        citations,
    })
}

/// Reads `(subject | relation | object) [cites: id, id]` records, one per
/// line. Lines that do not open with `(` are treated as commentary and
/// ignored; records that open but do not parse are counted as malformed.
pub fn parse_response(text: &str) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    for line in text.lines() {
        let line = strip_list_marker(line);
        if !line.starts_with('(') {
            continue;
        }
        match parse_record(line) {
            Some(t) => out.triples.push(t),
            None => out.malformed += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoCitation,
    UnknownChunk,
    Duplicate,
    Malformed,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Validation {
    pub validated: Vec<ProposedTriple>,
    pub rejected: Vec<(ProposedTriple, RejectReason)>,
}

/// Keeps proposals whose citations are nonempty, drawn from the request's
/// evidence, and not repeating an earlier validated key.
pub fn validate(proposals: Vec<ProposedTriple>, req: &CompletionRequest) -> Validation {
    let evidence = req.evidence_ids();
    let mut seen: HashSet<TripleKey> = HashSet::new();
    let mut out = Validation::default();
    for p in proposals {
        let reason = if p.citations.is_empty() {
            Some(RejectReason::NoCitation)
        } else if !p.citations.is_subset(&evidence) {
            Some(RejectReason::UnknownChunk)
        } else if !seen.insert(p.key()) {
            Some(RejectReason::Duplicate)
        } else {
            None
        };
        match reason {
            Some(r) => out.rejected.push((p, r)),
            None => out.validated.push(p),
        }
    }
    out
}
