use serde::{Deserialize, Serialize};

use super::parse::{ProposedTriple, RejectReason};
use crate::graph::{EdgeOrigin, EmbeddingProvider, GraphIndex};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectCounts {
    pub no_citation: usize,
    pub unknown_chunk: usize,
    pub duplicate: usize,
    pub malformed: usize,
}

impl RejectCounts {
    pub fn add(&mut self, reason: RejectReason, n: usize) {
        match reason {
            RejectReason::NoCitation => self.no_citation += n,
            RejectReason::UnknownChunk => self.unknown_chunk += n,
            RejectReason::Duplicate => self.duplicate += n,
            RejectReason::Malformed => self.malformed += n,
        }
    }

    pub fn total(&self) -> usize {
        self.no_citation + self.unknown_chunk + self.duplicate + self.malformed
    }
}

/// Accounting for one completion round.
///
/// `received = validated + rejected.total()` and
/// `validated = triples_added + merged_duplicates + deferred`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub views: usize,
    pub backend_errors: usize,
    pub received: usize,
    pub validated: usize,
    pub rejected: RejectCounts,
    /// Validated triples already in the graph; their weight was incremented.
    pub merged_duplicates: usize,
    /// Validated triples skipped because a feature could not be computed.
    pub deferred: usize,
    pub nodes_added: usize,
    pub edges_added: usize,
    pub triples_added: usize,
}

impl MergeReport {
    pub fn absorb(&mut self, other: &MergeReport) {
        self.views += other.views;
        self.backend_errors += other.backend_errors;
        self.received += other.received;
        self.validated += other.validated;
        self.rejected.no_citation += other.rejected.no_citation;
        self.rejected.unknown_chunk += other.rejected.unknown_chunk;
        self.rejected.duplicate += other.rejected.duplicate;
        self.rejected.malformed += other.rejected.malformed;
        self.merged_duplicates += other.merged_duplicates;
        self.deferred += other.deferred;
        self.nodes_added += other.nodes_added;
        self.edges_added += other.edges_added;
        self.triples_added += other.triples_added;
    }
}

/// Applies validated triples in order. Each triple's citations become its
/// provenance. A triple whose new entities cannot be embedded is deferred
/// and leaves the graph untouched.
pub fn merge(g: &mut GraphIndex, validated: &[ProposedTriple], provider: &dyn EmbeddingProvider) -> MergeReport {
    let mut report = MergeReport {
        received: validated.len(),
        validated: validated.len(),
        ..MergeReport::default()
    };
    for t in validated {
        match g.upsert_triple(
            &t.subject,
            &t.relation,
            &t.object,
            &t.citations,
            EdgeOrigin::Completion,
            provider,
        ) {
            Ok(up) => {
                report.nodes_added += up.created_nodes.len();
                if up.created_edge {
                    report.edges_added += 1;
                    report.triples_added += 1;
                } else {
                    report.merged_duplicates += 1;
                }
            }
            Err(e) => {
                log::warn!("deferring {t}: {e}");
                report.deferred += 1;
            }
        }
    }
    report
}
