//! Synthetic graphs with planted cross-chunk relations.
//!
//! Entities sit on a line and each chunk mentions a contiguous window of
//! them, so neighbouring chunks share a few entities. A planted relation
//! `(s, r, o)` is stated only through a two-step chain `s -> b -> o` whose
//! halves live in adjacent chunks, with the bridge `b` mentioned in both.
//! The planted triple itself is left out of the index.
//!
//! Extraction failure is emulated in a few contiguous passages of chunks:
//! planted relations sit inside them, and part of those chunks' own facts
//! are missing from the index even though their sentences are in the text.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complete::ProposedTriple;
use crate::error::{Error, Result};
use crate::graph::{
    normalize_label, ChunkId, Edge, GraphIndex, MockEmbedder, Node, NodeId, TripleKey,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub entities: usize,
    pub chunks: usize,
    /// Entities mentioned by each chunk.
    pub entities_per_chunk: usize,
    pub triples_per_chunk: usize,
    pub planted: usize,
    /// Share of planted relations left out of the index.
    pub hide_fraction: f64,
    /// Share of hidden relations whose outer endpoint is also missing.
    pub entity_deletion_share: f64,
    /// Contiguous runs of chunks where extraction failed. With 0, relations
    /// are planted across all adjacent chunk pairs and no facts are dropped.
    pub failure_passages: usize,
    /// Share of all chunks that lie in a failure passage.
    pub failure_chunk_share: f64,
    /// Share of a failure chunk's own facts left out of the index. Facts
    /// needed to keep the entity graph connected are always kept.
    pub failure_drop_share: f64,
    /// Relative weights of the alias, causal-chain and locative templates.
    pub pattern_mix: [f64; 3],
    pub synonym_edges: usize,
    /// Share of entities given purely numeric labels.
    pub numeric_label_share: f64,
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            entities: 500,
            chunks: 120,
            entities_per_chunk: 12,
            triples_per_chunk: 12,
            planted: 100,
            hide_fraction: 1.0,
            entity_deletion_share: 0.1,
            failure_passages: 4,
            failure_chunk_share: 0.4,
            failure_drop_share: 0.6,
            pattern_mix: [1.0, 1.0, 1.0],
            synonym_edges: 20,
            numeric_label_share: 0.02,
            feature_dim: 64,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn stride(&self) -> f64 {
        (self.entities - self.entities_per_chunk) as f64 / (self.chunks - 1) as f64
    }

    fn passage_len(&self) -> usize {
        let per = self.failure_chunk_share * self.chunks as f64 / self.failure_passages.max(1) as f64;
        (per.round() as usize).max(2)
    }

    /// Adjacent chunk pairs that can carry a planted relation.
    fn plantable_pairs(&self) -> usize {
        if self.failure_passages == 0 {
            self.chunks - 1
        } else {
            self.failure_passages * (self.passage_len() - 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.entities == 0 || self.chunks < 2 || self.planted == 0 || self.feature_dim == 0 {
            return bad("synth needs entities, planted and feature_dim >= 1 and chunks >= 2".into());
        }
        if self.entities_per_chunk < 3 || self.entities_per_chunk > self.entities {
            return bad(format!(
                "synth.entities_per_chunk must lie in [3, entities], got {}",
                self.entities_per_chunk
            ));
        }
        if self.triples_per_chunk + 1 < self.entities_per_chunk {
            return bad("synth.triples_per_chunk must be at least entities_per_chunk - 1".into());
        }
        if !(self.hide_fraction > 0.0 && self.hide_fraction <= 1.0) {
            return bad(format!("synth.hide_fraction must lie in (0, 1], got {}", self.hide_fraction));
        }
        if !(0.0..=1.0).contains(&self.entity_deletion_share) || !(0.0..1.0).contains(&self.numeric_label_share) {
            return bad("synth shares must lie in [0, 1]".into());
        }
        if self.pattern_mix.iter().any(|w| w.is_nan() || *w < 0.0) || self.pattern_mix.iter().sum::<f64>() <= 0.0 {
            return bad("synth.pattern_mix needs non-negative weights with a positive sum".into());
        }
        let stride = self.stride();
        if stride < 1.0 || stride.ceil() as usize + 1 > self.entities_per_chunk {
            return bad(format!(
                "{} chunks of {} entities over {} entities leave no room for cross-chunk relations",
                self.chunks, self.entities_per_chunk, self.entities
            ));
        }
        for (name, v) in [
            ("failure_chunk_share", self.failure_chunk_share),
            ("failure_drop_share", self.failure_drop_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("synth.{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.failure_passages > 0 && self.passage_len() > self.chunks / self.failure_passages {
            return bad(format!(
                "{} failure passages of {} chunks do not fit in {} chunks",
                self.failure_passages,
                self.passage_len(),
                self.chunks
            ));
        }
        if self.planted > 3 * self.plantable_pairs() {
            return bad(format!(
                "cannot plant {} relations across {} adjacent chunk pairs",
                self.planted,
                self.plantable_pairs()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Alias,
    CausalChain,
    Locative,
}

const TEMPLATES: [Template; 3] = [Template::Alias, Template::CausalChain, Template::Locative];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedRelation {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub evidence: Vec<ChunkId>,
    pub template: Template,
    /// Whether the triple was left out of the index.
    pub hidden: bool,
    /// Label of an endpoint that was also left out, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deleted_entity: Option<String>,
}

impl PlantedRelation {
    pub fn key(&self) -> TripleKey {
        TripleKey::new(&self.subject, &self.relation, &self.object)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlantedTruth {
    pub relations: Vec<PlantedRelation>,
}

impl PlantedTruth {
    pub fn hidden(&self) -> impl Iterator<Item = &PlantedRelation> {
        self.relations.iter().filter(|r| r.hidden)
    }

    pub fn deleted_entities(&self) -> Vec<&str> {
        self.relations.iter().filter_map(|r| r.deleted_entity.as_deref()).collect()
    }

    /// The table a ground-truth mock backend answers from.
    pub fn mock_table(&self) -> Vec<ProposedTriple> {
        self.relations
            .iter()
            .map(|r| ProposedTriple {
                subject: r.subject.clone(),
                relation: r.relation.clone(),
                object: r.object.clone(),
                citations: r.evidence.iter().cloned().collect(),
            })
            .collect()
    }

    pub fn write<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        for r in &self.relations {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut relations = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let perr = |message: String| Error::Parse { line: i + 1, message };
            let line = line.map_err(|e| perr(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            relations.push(serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?);
        }
        Ok(PlantedTruth { relations })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(file).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(file)
    }

    /// Writes the mock table in the response layout.
    pub fn save_mock_table(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text: String = self.mock_table().iter().map(|t| format!("{t}\n")).collect();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

const RELATIONS: [&str; 12] = [
    "works with",
    "trades with",
    "writes to",
    "serves",
    "visits",
    "funds",
    "mentors",
    "rivals",
    "admires",
    "hosts",
    "advises",
    "supplies",
];

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn name<R: Rng + ?Sized>(rng: &mut R) -> String {
    let syllables = rng.random_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        s.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    if rng.random_bool(0.5) {
        s.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
    }
    let mut c = s.chars();
    let first = c.next().expect("nonempty").to_ascii_uppercase();
    std::iter::once(first).chain(c).collect()
}

struct Labels {
    used: HashSet<String>,
}

impl Labels {
    fn fresh<R: Rng + ?Sized>(&mut self, rng: &mut R) -> String {
        loop {
            let n = name(rng);
            if self.used.insert(normalize_label(&n)) {
                return n;
            }
        }
    }

    fn fresh_year<R: Rng + ?Sized>(&mut self, rng: &mut R) -> String {
        loop {
            let n = rng.random_range(1000..2100).to_string();
            if self.used.insert(n.clone()) {
                return n;
            }
        }
    }
}

struct Builder {
    g: GraphIndex,
    labels: Vec<String>,
    texts: BTreeMap<usize, Vec<String>>,
    facts: usize,
}

impl Builder {
    fn sentence(&mut self, chunk: usize, s: &str, r: &str, o: &str) {
        self.texts.entry(chunk).or_default().push(format!("{s} {r} {o}."));
    }

    /// Adds a fact between entity indices, or extends the provenance of an
    /// existing one with the same key.
    fn fact(&mut self, s: usize, r: &str, o: usize, chunk: &BTreeSet<ChunkId>) -> Result<()> {
        let (sl, ol) = (self.labels[s].clone(), self.labels[o].clone());
        if let Some(id) = self.g.find_triple(&sl, r, &ol).map(|e| e.id.clone()) {
            return self.g.extend_provenance(&id, chunk);
        }
        self.facts += 1;
        let edge = Edge::fact(
            format!("f{:05}", self.facts),
            entity_id(s),
            r,
            entity_id(o),
            chunk.iter().cloned(),
        );
        self.g.add_edge(edge)
    }
}

fn entity_id(i: usize) -> NodeId {
    NodeId(format!("e{i:04}"))
}

fn chunk_id(i: usize) -> ChunkId {
    ChunkId(format!("c{i:03}"))
}

/// First chunk of every plantable pair, and the set of failure chunks.
fn failure_layout<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> (Vec<usize>, BTreeSet<usize>) {
    if cfg.failure_passages == 0 {
        return ((0..cfg.chunks - 1).collect(), BTreeSet::new());
    }
    let len = cfg.passage_len();
    let segment = cfg.chunks / cfg.failure_passages;
    let mut pairs = Vec::new();
    let mut chunks = BTreeSet::new();
    for k in 0..cfg.failure_passages {
        let start = k * segment + rng.random_range(0..=segment - len);
        chunks.extend(start..start + len);
        pairs.extend(start..start + len - 1);
    }
    (pairs, chunks)
}

struct Components {
    parent: Vec<usize>,
}

impl Components {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the components of `a` and `b`; false if they were already one.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[ra] = rb;
        ra != rb
    }
}

fn pick<R: Rng + ?Sized>(range: std::ops::Range<usize>, rng: &mut R) -> usize {
    rng.random_range(range)
}

fn template_relations(t: Template, alias_relation: &'static str) -> (&'static str, &'static str, &'static str) {
    match t {
        Template::Alias => ("is also known as", alias_relation, alias_relation),
        Template::CausalChain => ("caused", "led to", "ultimately caused"),
        Template::Locative => ("is located in", "is part of", "lies within"),
    }
}

/// A generated fixture: the base graph (with features) and what was planted.
#[derive(Debug, Clone)]
pub struct SynthFixture {
    pub graph: GraphIndex,
    pub truth: PlantedTruth,
}

pub fn generate<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<SynthFixture> {
    cfg.validate()?;
    let n = cfg.entities;
    let w = cfg.entities_per_chunk;
    let stride = cfg.stride();
    let starts: Vec<usize> = (0..cfg.chunks).map(|i| (i as f64 * stride).round() as usize).collect();
    let window = |c: usize| starts[c]..starts[c] + w;

    let mut names = Labels { used: HashSet::new() };
    let numeric = (cfg.numeric_label_share * n as f64).round() as usize;
    let numeric_at: BTreeSet<usize> = sample_indices(rng, n, numeric).into_iter().collect();
    let labels: Vec<String> = (0..n)
        .map(|i| {
            if numeric_at.contains(&i) {
                names.fresh_year(rng)
            } else {
                names.fresh(rng)
            }
        })
        .collect();

    let mut b = Builder {
        g: GraphIndex::new(),
        labels,
        texts: BTreeMap::new(),
        facts: 0,
    };
    for c in 0..cfg.chunks {
        // Text is filled in at the end; register ids now so facts can cite them.
        b.g.add_chunk(chunk_id(c), "")?;
    }
    for i in 0..n {
        b.g.add_node(Node::entity(entity_id(i), b.labels[i].clone()))?;
    }

    let (plantable, failing) = failure_layout(cfg, rng);

    // Chunk-local facts: a random spanning tree over the window plus extras.
    // In failure chunks some are only written into the text.
    let mut missed = Vec::new();
    let mut components = Components { parent: (0..n).collect() };
    for c in 0..cfg.chunks {
        let prov: BTreeSet<ChunkId> = [chunk_id(c)].into();
        let mut members: Vec<usize> = window(c).collect();
        members.shuffle(rng);
        let mut pairs = Vec::with_capacity(cfg.triples_per_chunk);
        for k in 1..members.len() {
            let parent = members[rng.random_range(0..k)];
            pairs.push((members[k], parent));
        }
        while pairs.len() < cfg.triples_per_chunk {
            let a = members[rng.random_range(0..w)];
            let z = members[rng.random_range(0..w)];
            if a != z {
                pairs.push((a, z));
            }
        }
        for (s, o) in pairs {
            let r = RELATIONS[rng.random_range(0..RELATIONS.len())];
            let (sl, ol) = (b.labels[s].clone(), b.labels[o].clone());
            b.sentence(c, &sl, r, &ol);
            if failing.contains(&c) && rng.random_bool(cfg.failure_drop_share) {
                missed.push((s, r, o, c));
            } else {
                b.fact(s, r, o, &prov)?;
                components.union(s, o);
            }
        }
    }
    for (s, r, o, c) in missed {
        if components.union(s, o) {
            b.fact(s, r, o, &[chunk_id(c)].into())?;
        }
    }

    // Planted chains across adjacent chunks.
    let pairs: Vec<usize> = (0..cfg.planted).map(|k| k % plantable.len()).collect();
    let mut order = plantable;
    order.shuffle(rng);
    let mix_total: f64 = cfg.pattern_mix.iter().sum();
    let mut planted_keys: HashSet<TripleKey> = HashSet::new();
    let mut specs = Vec::with_capacity(cfg.planted);
    for k in pairs {
        let c1 = order[k];
        let c2 = c1 + 1;
        let (w1, w2) = (window(c1), window(c2));
        let template = {
            let mut x = rng.random_range(0.0..mix_total);
            let mut t = TEMPLATES[2];
            for (tpl, wt) in TEMPLATES.iter().zip(cfg.pattern_mix) {
                if x < wt {
                    t = *tpl;
                    break;
                }
                x -= wt;
            }
            t
        };
        let alias_relation = RELATIONS[rng.random_range(0..RELATIONS.len())];
        let (r1, r2, r) = template_relations(template, alias_relation);
        let mut found = None;
        for _ in 0..64 {
            let s = pick(w1.start..w2.start, rng);
            let bridge = pick(w2.start..w1.end, rng);
            let o = pick(w1.end..w2.end, rng);
            let key = TripleKey::new(&b.labels[s], r, &b.labels[o]);
            if !planted_keys.contains(&key) {
                planted_keys.insert(key);
                found = Some((s, bridge, o));
                break;
            }
        }
        let (s, bridge, o) =
            found.ok_or_else(|| Error::Config(format!("no room for another relation across chunks {c1} and {c2}")))?;
        specs.push((template, c1, c2, s, bridge, o, r1, r2, r));
    }

    let hidden_count = ((cfg.hide_fraction * cfg.planted as f64).round() as usize).clamp(1, cfg.planted);
    let hidden: BTreeSet<usize> = sample_indices(rng, cfg.planted, hidden_count).into_iter().collect();
    let deletions = (cfg.entity_deletion_share * hidden_count as f64).round() as usize;
    let hidden_list: Vec<usize> = hidden.iter().copied().collect();
    let deleted: BTreeSet<usize> = sample_indices(rng, hidden_count, deletions)
        .into_iter()
        .map(|i| hidden_list[i])
        .collect();

    let mut relations = Vec::with_capacity(cfg.planted);
    for (k, (template, c1, c2, s, bridge, o, r1, r2, r)) in specs.into_iter().enumerate() {
        let p1: BTreeSet<ChunkId> = [chunk_id(c1)].into();
        let p2: BTreeSet<ChunkId> = [chunk_id(c2)].into();
        let mut subject = b.labels[s].clone();
        let mut object = b.labels[o].clone();
        let mut deleted_entity = None;
        if deleted.contains(&k) {
            // Replace one outer endpoint with an entity the index never saw.
            let ghost = names.fresh(rng);
            if rng.random_bool(0.5) {
                subject = ghost.clone();
                b.sentence(c1, &subject, r1, &b.labels[bridge].clone());
                b.fact(bridge, r2, o, &p2)?;
                b.sentence(c2, &b.labels[bridge].clone(), r2, &object);
            } else {
                object = ghost.clone();
                b.fact(s, r1, bridge, &p1)?;
                b.sentence(c1, &subject, r1, &b.labels[bridge].clone());
                b.sentence(c2, &b.labels[bridge].clone(), r2, &object);
            }
            deleted_entity = Some(ghost);
        } else {
            b.fact(s, r1, bridge, &p1)?;
            b.fact(bridge, r2, o, &p2)?;
            let bl = b.labels[bridge].clone();
            b.sentence(c1, &subject, r1, &bl);
            b.sentence(c2, &bl, r2, &object);
        }
        let is_hidden = hidden.contains(&k);
        if !is_hidden {
            let both: BTreeSet<ChunkId> = [chunk_id(c1), chunk_id(c2)].into();
            b.fact(s, r, o, &both)?;
        }
        relations.push(PlantedRelation {
            subject,
            relation: r.to_string(),
            object,
            evidence: vec![chunk_id(c1), chunk_id(c2)],
            template,
            hidden: is_hidden,
            deleted_entity,
        });
    }

    // Synonym edges between window-mates that share no fact.
    let mut synonyms = 0;
    let mut attempts = 0;
    while synonyms < cfg.synonym_edges && attempts < 100 * cfg.synonym_edges.max(1) {
        attempts += 1;
        let c = rng.random_range(0..cfg.chunks);
        let (a, z) = (pick(window(c), rng), pick(window(c), rng));
        if a == z {
            continue;
        }
        let (ia, iz) = (entity_id(a), entity_id(z));
        let linked = b
            .g
            .neighbors(&ia, crate::graph::EdgeType::Fact)
            .chain(b.g.neighbors(&ia, crate::graph::EdgeType::Synonym))
            .any(|(_, other)| *other == iz);
        if linked {
            continue;
        }
        synonyms += 1;
        b.g.add_edge(Edge::synonym(format!("s{synonyms:04}"), ia, iz, 1.0))?;
    }

    // Final chunk texts, chunk nodes and mention edges.
    let Builder { g, texts, .. } = b;
    let mut out = GraphIndex::new();
    for c in 0..cfg.chunks {
        let mut sentences = texts.get(&c).cloned().unwrap_or_default();
        sentences.shuffle(rng);
        out.add_chunk(chunk_id(c), sentences.join(" "))?;
    }
    for node in g.nodes() {
        out.add_node(node.clone())?;
    }
    for e in g.edges() {
        out.add_edge(e.clone())?;
    }
    let mut mentions = 0;
    for c in 0..cfg.chunks {
        let cid = chunk_id(c);
        out.add_node(Node::chunk(cid.0.clone(), cid.0.clone()))?;
        for i in window(c) {
            mentions += 1;
            out.add_edge(Edge::entity_chunk(format!("m{mentions:05}"), entity_id(i), cid.0.clone()))?;
        }
    }
    out.fill_missing_features(&MockEmbedder::new(cfg.feature_dim, cfg.seed))?;
    out.check_invariants()?;
    Ok(SynthFixture {
        graph: out,
        truth: PlantedTruth { relations },
    })
}

/// [`generate`] with a generator seeded from `cfg.seed`.
pub fn generate_seeded(cfg: &SynthConfig) -> Result<SynthFixture> {
    generate(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{write_graph, EdgeType, NodeType};
    use std::collections::HashSet;

    fn small() -> SynthConfig {
        SynthConfig {
            entities: 80,
            chunks: 20,
            planted: 15,
            synonym_edges: 4,
            feature_dim: 8,
            failure_passages: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn hidden_relations_are_absent_and_evidence_exists() {
        let fx = generate_seeded(&small()).unwrap();
        assert_eq!(fx.truth.relations.len(), 15);
        for r in &fx.truth.relations {
            assert!(r.hidden);
            assert!(fx.graph.find_triple(&r.subject, &r.relation, &r.object).is_none());
            assert_eq!(r.evidence.len(), 2);
            assert!(r.evidence.iter().all(|c| fx.graph.chunk_text(c).is_some()));
        }
        for label in fx.truth.deleted_entities() {
            assert!(fx.graph.entity_by_label(label).is_none());
        }
    }

    #[test]
    fn visible_share_is_in_the_index() {
        let cfg = SynthConfig {
            hide_fraction: 0.6,
            ..small()
        };
        let fx = generate_seeded(&cfg).unwrap();
        let visible: Vec<_> = fx.truth.relations.iter().filter(|r| !r.hidden).collect();
        assert_eq!(visible.len(), 6);
        for r in visible {
            let e = fx.graph.find_triple(&r.subject, &r.relation, &r.object).unwrap();
            assert_eq!(e.provenance.iter().cloned().collect::<Vec<_>>(), r.evidence);
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate_seeded(&small()).unwrap();
        let b = generate_seeded(&small()).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.truth, b.truth);
        let mut x = Vec::new();
        let mut y = Vec::new();
        write_graph(&a.graph, &mut x).unwrap();
        write_graph(&b.graph, &mut y).unwrap();
        assert_eq!(x, y);
        let c = generate_seeded(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn default_fixture_shape() {
        let fx = generate_seeded(&SynthConfig::default()).unwrap();
        let s = fx.graph.stats();
        assert_eq!(s.chunks, 120);
        assert_eq!(s.entity_nodes, 500);
        assert!((1250..=1700).contains(&s.triples), "{} triples", s.triples);
        let numeric = fx
            .graph
            .nodes()
            .filter(|n| n.node_type == NodeType::Entity && n.label.parse::<u32>().is_ok())
            .count();
        assert_eq!(numeric, 10);
        let synonyms = fx.graph.edges().filter(|e| e.edge_type == EdgeType::Synonym).count();
        assert_eq!(synonyms, 20);
        assert_eq!(fx.truth.deleted_entities().len(), 10);
        assert!(fx.graph.nodes().all(|n| n.feature.as_ref().is_some_and(|f| f.len() == 64)));
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        let too_many = SynthConfig {
            planted: 1000,
            ..small()
        };
        assert!(matches!(generate_seeded(&too_many), Err(Error::Config(_))));
        let no_overlap = SynthConfig {
            entities: 1000,
            chunks: 10,
            ..small()
        };
        assert!(matches!(generate_seeded(&no_overlap), Err(Error::Config(_))));
    }

    #[test]
    fn truth_file_round_trip() {
        let fx = generate_seeded(&small()).unwrap();
        let mut buf = Vec::new();
        fx.truth.write(&mut buf).unwrap();
        assert_eq!(PlantedTruth::read(buf.as_slice()).unwrap(), fx.truth);
        assert!(matches!(PlantedTruth::read(&b"{\n"[..]), Err(Error::Parse { line: 1, .. })));
    }

    fn fact_edges(g: &GraphIndex) -> usize {
        g.edges().filter(|e| e.edge_type == EdgeType::Fact).count()
    }

    fn entity_components(g: &GraphIndex) -> usize {
        let ids: Vec<&NodeId> = g.nodes().filter(|n| n.node_type == NodeType::Entity).map(|n| &n.id).collect();
        let mut seen: HashSet<&NodeId> = HashSet::new();
        let mut count = 0;
        for start in ids {
            if !seen.insert(start) {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for (_, v) in g.neighbors(u, EdgeType::Fact) {
                    if seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn failure_passages_hold_every_planted_relation() {
        let cfg = SynthConfig::default();
        let fx = generate_seeded(&cfg).unwrap();
        let cited: BTreeSet<&ChunkId> = fx.truth.relations.iter().flat_map(|r| &r.evidence).collect();
        // 4 passages of round(0.4 * 120 / 4) = 12 chunks.
        assert!(cited.len() <= 48, "{} chunks cited", cited.len());
        for r in &fx.truth.relations {
            let a: usize = r.evidence[0].as_str()[1..].parse().unwrap();
            let b: usize = r.evidence[1].as_str()[1..].parse().unwrap();
            assert_eq!(b, a + 1);
        }
    }

    #[test]
    fn dropped_facts_leave_the_graph_connected() {
        let fx = generate_seeded(&SynthConfig::default()).unwrap();
        assert_eq!(entity_components(&fx.graph), 1);
        let intact = generate_seeded(&SynthConfig {
            failure_drop_share: 0.0,
            ..SynthConfig::default()
        })
        .unwrap();
        assert!(fact_edges(&fx.graph) < fact_edges(&intact.graph));
    }

    #[test]
    fn zero_passages_spread_relations_over_all_pairs() {
        let cfg = SynthConfig {
            failure_passages: 0,
            ..SynthConfig::default()
        };
        let fx = generate_seeded(&cfg).unwrap();
        let cited: BTreeSet<&ChunkId> = fx.truth.relations.iter().flat_map(|r| &r.evidence).collect();
        assert!(cited.len() > 48, "{} chunks cited", cited.len());
    }

    #[test]
    fn passages_must_fit() {
        let cfg = SynthConfig {
            failure_passages: 100,
            ..SynthConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
