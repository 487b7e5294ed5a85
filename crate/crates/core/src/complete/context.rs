use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ChunkId, GraphIndex, NodeId};
use crate::sampler::SubgraphView;

pub const DEFAULT_MAX_EVIDENCE: usize = 12;

/// A fact the graph already holds, with the chunks that support it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub provenance: Vec<ChunkId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub id: ChunkId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub root: String,
    /// Entity labels of the view, sorted.
    pub entities: Vec<String>,
    pub known_triples: Vec<KnownTriple>,
    pub evidence: Vec<Evidence>,
}

impl CompletionRequest {
    pub fn evidence_ids(&self) -> BTreeSet<ChunkId> {
        self.evidence.iter().map(|e| e.id.clone()).collect()
    }
}

/// Builds the completion request for a view.
///
/// Evidence is the provenance of the view's fact edges in first-seen order.
/// When more than `max_evidence` chunks are cited, the chunks cited by the
/// most fact edges are kept (earlier first on ties) and the known triples'
/// provenance is narrowed to the kept ids.
pub fn assemble_context(g: &GraphIndex, view: &SubgraphView, max_evidence: usize) -> Result<CompletionRequest> {
    let label = |id: &NodeId| {
        g.node(id)
            .map(|n| n.label.clone())
            .ok_or_else(|| Error::integrity(format!("view node {id} is not in the graph")))
    };
    let mut facts = Vec::new();
    for ve in view.fact_edges() {
        let edge = g
            .edge(&ve.id)
            .ok_or_else(|| Error::integrity(format!("view edge {} is not in the graph", ve.id)))?;
        facts.push(edge);
    }
    if facts.is_empty() {
        return Err(Error::NoFactEdges(view.root.to_string()));
    }

    let mut first_seen: Vec<&ChunkId> = Vec::new();
    let mut citations: HashMap<&ChunkId, usize> = HashMap::new();
    for edge in &facts {
        for c in &edge.provenance {
            let n = citations.entry(c).or_insert(0);
            if *n == 0 {
                first_seen.push(c);
            }
            *n += 1;
        }
    }
    let kept: BTreeSet<&ChunkId> = if first_seen.len() > max_evidence {
        let mut ranked: Vec<(usize, &ChunkId)> = first_seen.iter().copied().enumerate().collect();
        ranked.sort_by(|(i, a), (j, b)| citations[b].cmp(&citations[a]).then(i.cmp(j)));
        ranked.into_iter().take(max_evidence).map(|(_, c)| c).collect()
    } else {
        first_seen.iter().copied().collect()
    };

    let mut evidence = Vec::with_capacity(kept.len());
    for id in first_seen.into_iter().filter(|c| kept.contains(c)) {
        let text = g
            .chunk_text(id)
            .ok_or_else(|| Error::integrity(format!("evidence chunk {id} is missing from the chunk table")))?;
        evidence.push(Evidence {
            id: id.clone(),
            text: text.to_owned(),
        });
    }

    let mut known_triples = Vec::with_capacity(facts.len());
    for edge in facts {
        known_triples.push(KnownTriple {
            subject: label(&edge.u)?,
            relation: edge.relation.clone().unwrap_or_default(),
            object: label(&edge.v)?,
            provenance: edge.provenance.iter().filter(|c| kept.contains(c)).cloned().collect(),
        });
    }

    let mut entities = view.nodes.iter().map(label).collect::<Result<Vec<_>>>()?;
    entities.sort();
    Ok(CompletionRequest {
        root: label(&view.root)?,
        entities,
        known_triples,
        evidence,
    })
}

pub const CHUNK_MARKER: &str = "[chunk: ";

/// Renders the request as prompt text. Chunk ids appear only in the
/// evidence markers, once each.
pub fn render_prompt(req: &CompletionRequest) -> String {
    let mut out = String::new();
    out.push_str("You are completing a knowledge graph built from the passages below.\n\n");
    let _ = writeln!(out, "## Root entity\n{}\n", req.root);
    out.push_str("## Entities in this region\n");
    for e in &req.entities {
        let _ = writeln!(out, "- {e}");
    }
    out.push_str("\n## Known triples\n");
    for t in &req.known_triples {
        let _ = writeln!(out, "- ({} | {} | {})", t.subject, t.relation, t.object);
    }
    out.push_str("\n## Evidence\n");
    for e in &req.evidence {
        let _ = writeln!(out, "{CHUNK_MARKER}{}]\n{}\n", e.id, e.text.trim_end());
    }
    out.push_str(
        "## Instructions\n\
         List triples that are missing from the known triples and are stated or directly implied by the evidence.\n\
         You may name new entities only when the evidence mentions them.\n\
         Every triple must cite the identifiers of the evidence chunks that support it. Uncited triples are discarded.\n\
         Write one triple per line and nothing else, in this form:\n\
         (subject | relation | object) [cites: <chunk id>, <chunk id>]\n",
    );
    out
}

/// Chunk ids named by evidence markers in a rendered prompt, in order.
pub fn extract_evidence_ids(prompt: &str) -> Vec<ChunkId> {
    prompt
        .lines()
        .filter_map(|l| l.strip_prefix(CHUNK_MARKER)?.strip_suffix(']'))
        .map(|id| ChunkId::from(id.trim()))
        .filter(|id| !id.as_str().is_empty())
        .collect()
}
