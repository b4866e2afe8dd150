//! Parsers for the three input formats and the linkers that turn gloss
//! records into a [`DictGraph`].
//!
//! Gloss corpus (one record per line, `#` starts a comment line):
//!
//! ```text
//! synset_id<TAB>lemma[,lemma...]<TAB>pos<TAB>token[ token...]
//! ```
//!
//! A gloss token is either a bare `surface` or `surface%synset_id` when the
//! surface has been disambiguated to a target synset. Lemmas and surfaces are
//! case-folded to lowercase; multiword units use underscores.
//!
//! Word lists are one word per line. Date files are
//! `word<TAB>year[<TAB>flag,flag...]` where the year `OE` means attested in
//! Old English and is normalized to 1150, the conventional end of the period.
//!
//! A graph can also be loaded directly from a JSON-lines node table plus a
//! `src_id<TAB>dst_id` edge list; the same pair of files is what the pipeline
//! writes as its graph artifact.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::{build_graph, BuiltGraph, DictGraph, NodeId, PartOfSpeech, SenseNode};
use crate::{Error, Result};

/// Year that `OE` (attested in Old English) normalizes to.
pub const OLD_ENGLISH_YEAR: i32 = 1150;

/// Earliest plausible attestation year accepted by the date parser.
pub const MIN_YEAR: i32 = 600;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlossToken {
    pub surface: String,
    /// Synset id this surface was disambiguated to, if any.
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlossRecord {
    pub synset_id: String,
    /// Case-folded, non-empty. The first lemma is the canonical word.
    pub lemmas: Vec<String>,
    pub pos: PartOfSpeech,
    pub gloss_tokens: Vec<GlossToken>,
}

impl GlossRecord {
    pub fn word(&self) -> &str {
        &self.lemmas[0]
    }

    pub fn gloss_text(&self) -> String {
        let surfaces: Vec<&str> = self.gloss_tokens.iter().map(|t| t.surface.as_str()).collect();
        surfaces.join(" ")
    }
}

/// A reference to a synset id that no record defines. Reported, not fatal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnresolvedRef {
    pub line: usize,
    pub target: String,
}

#[derive(Debug, Clone)]
pub struct ParsedGlosses {
    pub records: Vec<GlossRecord>,
    pub unresolved: Vec<UnresolvedRef>,
}

pub fn parse_gloss_file(path: impl AsRef<Path>) -> Result<ParsedGlosses> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gloss_str(&text, path)
}

pub fn parse_gloss_str(text: &str, path: impl AsRef<Path>) -> Result<ParsedGlosses> {
    let path = path.as_ref();
    let mut records = Vec::new();
    let mut first_line_of: HashMap<String, usize> = HashMap::new();
    let mut token_lines: Vec<usize> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let synset_id = fields[0].trim().to_string();
        if synset_id.is_empty() {
            return Err(Error::parse(path, lineno, "empty synset id"));
        }
        if let Some(&first) = first_line_of.get(&synset_id) {
            return Err(Error::DuplicateSynset {
                path: path.to_path_buf(),
                line: lineno,
                first_line: first,
                id: synset_id,
            });
        }
        first_line_of.insert(synset_id.clone(), lineno);

        let mut lemmas = Vec::new();
        for lemma in fields[1].split(',') {
            let lemma = lemma.trim().to_lowercase();
            if lemma.is_empty() {
                return Err(Error::parse(path, lineno, "empty lemma in lemma list"));
            }
            lemmas.push(lemma);
        }
        if lemmas.is_empty() {
            return Err(Error::parse(path, lineno, "empty lemma list"));
        }

        let pos = PartOfSpeech::parse(fields[2].trim());

        let mut gloss_tokens = Vec::new();
        for token in fields[3].split_whitespace() {
            match token.split_once('%') {
                Some((surface, target)) => {
                    if surface.is_empty() || target.is_empty() {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("malformed token {token:?}"),
                        ));
                    }
                    gloss_tokens.push(GlossToken {
                        surface: surface.to_lowercase(),
                        target: Some(target.to_string()),
                    });
                }
                None => gloss_tokens.push(GlossToken {
                    surface: token.to_lowercase(),
                    target: None,
                }),
            }
        }

        token_lines.push(lineno);
        records.push(GlossRecord {
            synset_id,
            lemmas,
            pos,
            gloss_tokens,
        });
    }

    let mut unresolved = Vec::new();
    for (record, &lineno) in records.iter().zip(&token_lines) {
        for token in &record.gloss_tokens {
            if let Some(target) = &token.target {
                if !first_line_of.contains_key(target) {
                    unresolved.push(UnresolvedRef {
                        line: lineno,
                        target: target.clone(),
                    });
                }
            }
        }
    }

    Ok(ParsedGlosses {
        records,
        unresolved,
    })
}

/// Inverse of [`parse_gloss_str`], used to write synthetic corpora.
pub fn render_gloss_file(records: &[GlossRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let lemmas = r.lemmas.join(",");
        let pos = match r.pos {
            PartOfSpeech::Noun => "n",
            PartOfSpeech::Verb => "v",
            PartOfSpeech::Adj => "a",
            PartOfSpeech::Adv => "r",
            PartOfSpeech::Other => "x",
        };
        let tokens: Vec<String> = r
            .gloss_tokens
            .iter()
            .map(|t| match &t.target {
                Some(target) => format!("{}%{}", t.surface, target),
                None => t.surface.clone(),
            })
            .collect();
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.synset_id, lemmas, pos, tokens.join(" "));
    }
    out
}

/// How many raw references each linking step discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinkReport {
    /// Token targets no record defines.
    pub unresolved_dropped: usize,
    /// Token targets whose record was excluded by the pos filter.
    pub cross_pos_dropped: usize,
    pub duplicate_edges_dropped: usize,
    pub self_loops_dropped: usize,
}

#[derive(Debug, Clone)]
pub struct LinkedGraph {
    pub graph: DictGraph,
    pub report: LinkReport,
}

fn sense_ranks(records: &[&GlossRecord]) -> Vec<u32> {
    let mut counter: HashMap<(String, PartOfSpeech), u32> = HashMap::new();
    records
        .iter()
        .map(|r| {
            let rank = counter
                .entry((r.word().to_string(), r.pos))
                .or_insert(0);
            *rank += 1;
            *rank
        })
        .collect()
}

/// Builds the sense-level graph: one node per record passing `pos_filter`, an
/// edge u -> v whenever u's gloss has a token disambiguated to v. References
/// to unknown or filtered-out synsets are dropped and counted.
pub fn link_graph(
    records: &[GlossRecord],
    pos_filter: Option<PartOfSpeech>,
) -> Result<LinkedGraph> {
    let kept: Vec<&GlossRecord> = records
        .iter()
        .filter(|r| pos_filter.is_none_or(|p| r.pos == p))
        .collect();
    let index: HashMap<&str, u32> = kept
        .iter()
        .enumerate()
        .map(|(i, r)| (r.synset_id.as_str(), i as u32))
        .collect();
    let all_ids: BTreeSet<&str> = records.iter().map(|r| r.synset_id.as_str()).collect();

    let ranks = sense_ranks(&kept);
    let nodes: Vec<SenseNode> = kept
        .iter()
        .zip(&ranks)
        .map(|(r, &rank)| SenseNode {
            key: r.synset_id.clone(),
            lemmas: r.lemmas.clone(),
            pos: r.pos,
            sense_rank: rank,
            gloss: r.gloss_text(),
        })
        .collect();

    let mut report = LinkReport::default();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (u, r) in kept.iter().enumerate() {
        for token in &r.gloss_tokens {
            let Some(target) = &token.target else {
                continue;
            };
            match index.get(target.as_str()) {
                Some(&v) => edges.push((NodeId(u as u32), NodeId(v))),
                None if all_ids.contains(target.as_str()) => report.cross_pos_dropped += 1,
                None => report.unresolved_dropped += 1,
            }
        }
    }

    let built = build_graph(nodes, &edges)?;
    report.duplicate_edges_dropped = built.duplicate_edges_dropped;
    report.self_loops_dropped = built.self_loops_dropped;
    Ok(LinkedGraph {
        graph: built.graph,
        report,
    })
}

/// Builds the word-level graph: one node per distinct first lemma, carrying
/// that word's first-sense record. Edges follow the gloss surfaces of the
/// first sense only, so a surface links to the word it spells regardless of
/// which synset it was disambiguated to. Surfaces that are not a known word
/// are dropped and counted.
pub fn reduce_first_sense(
    records: &[GlossRecord],
    pos_filter: Option<PartOfSpeech>,
) -> Result<LinkedGraph> {
    let kept: Vec<&GlossRecord> = records
        .iter()
        .filter(|r| pos_filter.is_none_or(|p| r.pos == p))
        .collect();

    let mut index: HashMap<&str, u32> = HashMap::new();
    let mut firsts: Vec<&GlossRecord> = Vec::new();
    for r in &kept {
        if !index.contains_key(r.word()) {
            index.insert(r.word(), firsts.len() as u32);
            firsts.push(r);
        }
    }

    let nodes: Vec<SenseNode> = firsts
        .iter()
        .map(|r| SenseNode {
            key: r.word().to_string(),
            lemmas: vec![r.word().to_string()],
            pos: r.pos,
            sense_rank: 1,
            gloss: r.gloss_text(),
        })
        .collect();

    let mut report = LinkReport::default();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (u, r) in firsts.iter().enumerate() {
        for token in &r.gloss_tokens {
            match index.get(token.surface.as_str()) {
                Some(&v) => edges.push((NodeId(u as u32), NodeId(v))),
                None => report.unresolved_dropped += 1,
            }
        }
    }

    let built = build_graph(nodes, &edges)?;
    report.duplicate_edges_dropped = built.duplicate_edges_dropped;
    report.self_loops_dropped = built.self_loops_dropped;
    Ok(LinkedGraph {
        graph: built.graph,
        report,
    })
}

/// A named, case-folded, deduplicated set of words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    pub name: String,
    pub words: BTreeSet<String>,
}

impl WordList {
    pub fn new(name: impl Into<String>, words: impl IntoIterator<Item = String>) -> Result<Self> {
        let name = name.into();
        let words: BTreeSet<String> = words.into_iter().map(|w| w.to_lowercase()).collect();
        if words.is_empty() {
            return Err(Error::EmptyWordList { name });
        }
        Ok(WordList { name, words })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

pub fn parse_word_list(path: impl AsRef<Path>, name: &str) -> Result<WordList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_list_str(&text, name)
}

pub fn parse_word_list_str(text: &str, name: &str) -> Result<WordList> {
    let words = text
        .lines()
        .map(|l| l.trim_end_matches('\r').trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_string());
    WordList::new(name, words)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateFlags {
    pub proper_noun: bool,
    pub compound: bool,
    pub polysemous: bool,
}

impl DateFlags {
    pub fn any(self) -> bool {
        self.proper_noun || self.compound || self.polysemous
    }
}

/// First attestation of a word. `year` is already normalized: `OE` in the
/// input becomes [`OLD_ENGLISH_YEAR`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateRecord {
    pub word: String,
    pub year: i32,
    pub flags: DateFlags,
}

fn current_year() -> i32 {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    // Average Gregorian year; exact calendars don't matter at this precision.
    1970 + (secs / 31_556_952) as i32
}

pub fn parse_dates(path: impl AsRef<Path>) -> Result<Vec<DateRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dates_str(&text, path)
}

pub fn parse_dates_str(text: &str, path: impl AsRef<Path>) -> Result<Vec<DateRecord>> {
    let path = path.as_ref();
    let max_year = current_year();
    let mut records = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let word = fields[0].trim().to_lowercase();
        if word.is_empty() {
            return Err(Error::parse(path, lineno, "empty word"));
        }
        let year_field = fields[1].trim();
        let year = if year_field == "OE" {
            OLD_ENGLISH_YEAR
        } else {
            year_field.parse::<i32>().map_err(|_| {
                Error::parse(
                    path,
                    lineno,
                    format!("year must be an integer or OE, found {year_field:?}"),
                )
            })?
        };
        if !(MIN_YEAR..=max_year).contains(&year) {
            return Err(Error::parse(
                path,
                lineno,
                format!("year {year} outside {MIN_YEAR}..={max_year}"),
            ));
        }
        let mut flags = DateFlags::default();
        if fields.len() == 3 {
            for flag in fields[2].split(',') {
                let flag = flag.trim();
                if flag.is_empty() {
                    continue;
                }
                match flag {
                    "proper_noun" => flags.proper_noun = true,
                    "compound" => flags.compound = true,
                    "polysemous" => flags.polysemous = true,
                    other => {
                        return Err(Error::parse(
                            path,
                            lineno,
                            format!("unknown flag {other:?}"),
                        ))
                    }
                }
            }
        }
        records.push(DateRecord { word, year, flags });
    }
    Ok(records)
}

pub fn render_dates(records: &[DateRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let year = if r.year == OLD_ENGLISH_YEAR {
            "OE".to_string()
        } else {
            r.year.to_string()
        };
        let mut flags = Vec::new();
        if r.flags.proper_noun {
            flags.push("proper_noun");
        }
        if r.flags.compound {
            flags.push("compound");
        }
        if r.flags.polysemous {
            flags.push("polysemous");
        }
        if flags.is_empty() {
            let _ = writeln!(out, "{}\t{}", r.word, year);
        } else {
            let _ = writeln!(out, "{}\t{}\t{}", r.word, year, flags.join(","));
        }
    }
    out
}

/// One line of the JSON-lines node table.
#[derive(Debug, Serialize, Deserialize)]
struct NodeMeta {
    id: String,
    lemmas: Vec<String>,
    pos: String,
    #[serde(default = "default_rank")]
    sense_rank: u32,
    #[serde(default)]
    gloss: String,
}

fn default_rank() -> u32 {
    1
}

pub fn render_nodes_jsonl(nodes: &[SenseNode]) -> String {
    let mut out = String::new();
    for node in nodes {
        let meta = NodeMeta {
            id: node.key.clone(),
            lemmas: node.lemmas.clone(),
            pos: node.pos.as_str().to_string(),
            sense_rank: node.sense_rank,
            gloss: node.gloss.clone(),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&meta).expect("node meta"));
    }
    out
}

pub fn render_edges_tsv(g: &DictGraph) -> String {
    let mut out = String::new();
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{}\t{}", g.node(u).key, g.node(v).key);
    }
    out
}

/// Loads a graph from a node table and edge list written by
/// [`render_nodes_jsonl`] and [`render_edges_tsv`] or assembled externally.
/// Edge endpoints must name ids from the node table.
pub fn load_edge_list_graph(
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
) -> Result<BuiltGraph> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();
    let nodes_text = std::fs::read_to_string(nodes_path).map_err(|e| Error::io(nodes_path, e))?;
    let edges_text = std::fs::read_to_string(edges_path).map_err(|e| Error::io(edges_path, e))?;
    load_edge_list_graph_str(&nodes_text, nodes_path, &edges_text, edges_path)
}

pub fn load_edge_list_graph_str(
    nodes_text: &str,
    nodes_path: impl AsRef<Path>,
    edges_text: &str,
    edges_path: impl AsRef<Path>,
) -> Result<BuiltGraph> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();

    let mut nodes = Vec::new();
    let mut index: BTreeMap<String, u32> = BTreeMap::new();
    for (lineno, raw) in nodes_text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let meta: NodeMeta = serde_json::from_str(line)
            .map_err(|e| Error::parse(nodes_path, lineno, format!("bad node json: {e}")))?;
        if meta.lemmas.is_empty() {
            return Err(Error::parse(nodes_path, lineno, "empty lemma list"));
        }
        match index.entry(meta.id.clone()) {
            Entry::Occupied(_) => {
                return Err(Error::parse(
                    nodes_path,
                    lineno,
                    format!("duplicate node id {:?}", meta.id),
                ));
            }
            Entry::Vacant(slot) => {
                slot.insert(nodes.len() as u32);
            }
        }
        nodes.push(SenseNode {
            key: meta.id,
            lemmas: meta.lemmas.iter().map(|l| l.to_lowercase()).collect(),
            pos: PartOfSpeech::parse(&meta.pos),
            sense_rank: meta.sense_rank,
            gloss: meta.gloss,
        });
    }

    let mut edges = Vec::new();
    for (lineno, raw) in edges_text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let Some((src, dst)) = line.split_once('\t') else {
            return Err(Error::parse(
                edges_path,
                lineno,
                "expected src_id<TAB>dst_id",
            ));
        };
        let src = src.trim();
        let dst = dst.trim();
        let &u = index
            .get(src)
            .ok_or_else(|| Error::parse(edges_path, lineno, format!("unknown node id {src:?}")))?;
        let &v = index
            .get(dst)
            .ok_or_else(|| Error::parse(edges_path, lineno, format!("unknown node id {dst:?}")))?;
        edges.push((NodeId(u), NodeId(v)));
    }

    build_graph(nodes, &edges)
}
