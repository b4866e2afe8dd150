//! Synthetic dictionary with planted structure and an exact answer key.
//!
//! The generated corpus has a known attractor (a ring of short-loop word
//! clusters), layered feeder words that all drain into it, a few isolated
//! loops too small to matter, off-part-of-speech records, and attestation
//! dates drawn from two separated eras. Every derived quantity the analyses
//! should find is recorded in the truth manifest at generation time.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::graph::PartOfSpeech;
use crate::ingest::{DateFlags, DateRecord, GlossRecord, GlossToken, WordList};

#[derive(Debug, Clone, Copy)]
pub struct FixtureParams {
    pub seed: u64,
    pub clusters: usize,
    pub min_cluster: usize,
    pub max_cluster: usize,
    pub feeders: usize,
    pub isolated_loops: usize,
    pub other_pos: usize,
    pub second_senses: usize,
}

impl FixtureParams {
    /// Full-size corpus, about two thousand records.
    pub fn standard(seed: u64) -> Self {
        FixtureParams {
            seed,
            clusters: 40,
            min_cluster: 4,
            max_cluster: 12,
            feeders: 1640,
            isolated_loops: 4,
            other_pos: 150,
            second_senses: 40,
        }
    }

    /// Scaled-down corpus for fast tests.
    pub fn small(seed: u64) -> Self {
        FixtureParams {
            seed,
            clusters: 6,
            min_cluster: 4,
            max_cluster: 9,
            feeders: 120,
            isolated_loops: 2,
            other_pos: 12,
            second_senses: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixtureTruth {
    /// Synset ids per planted cluster.
    pub clusters: Vec<BTreeSet<String>>,
    /// Union of the clusters: the attractor every word drains into.
    pub core_synsets: BTreeSet<String>,
    pub core_words: BTreeSet<String>,
    /// Noun records emitted, which is the node count after noun linking.
    pub noun_nodes: usize,
    /// Distinct noun-to-noun references, the edge count after linking.
    pub noun_edges: usize,
    /// Gloss tokens in noun records pointing at non-noun synsets.
    pub cross_pos_targets: usize,
    /// Era center per cluster, parallel to `clusters`.
    pub eras: Vec<i32>,
    pub isolated: Vec<BTreeSet<String>>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub records: Vec<GlossRecord>,
    pub dates: Vec<DateRecord>,
    pub word_lists: Vec<WordList>,
    pub truth: FixtureTruth,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr",
    "pl", "st", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou"];
const CODAS: &[&str] = &["", "", "n", "r", "s", "l", "m"];
const FILLERS: &[&str] = &[
    "the", "a", "an", "of", "to", "in", "that", "which", "with", "made", "used", "for", "its",
    "or", "and",
];

fn make_word(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    for salt in 0.. {
        let mut w = String::new();
        for _ in 0..rng.random_range(2..=3) {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
        if salt > 0 {
            w.push_str(&salt.to_string());
        }
        if FILLERS.contains(&w.as_str()) {
            continue;
        }
        if used.insert(w.clone()) {
            return w;
        }
    }
    unreachable!()
}

fn pos_tag(pos: PartOfSpeech) -> &'static str {
    match pos {
        PartOfSpeech::Noun => "n",
        PartOfSpeech::Verb => "v",
        PartOfSpeech::Adj => "a",
        PartOfSpeech::Adv => "r",
        PartOfSpeech::Other => "x",
    }
}

fn synset_id(word: &str, pos: PartOfSpeech, rank: u32) -> String {
    format!("{word}.{}.{rank:02}", pos_tag(pos))
}

/// Tokens for one gloss: each target surfaced by its word, filler words
/// sprinkled around them.
fn gloss(rng: &mut ChaCha8Rng, targets: &[(String, String)]) -> Vec<GlossToken> {
    let mut tokens = Vec::new();
    let filler = |rng: &mut ChaCha8Rng| GlossToken {
        surface: FILLERS[rng.random_range(0..FILLERS.len())].to_string(),
        target: None,
    };
    tokens.push(filler(rng));
    for (surface, id) in targets {
        tokens.push(GlossToken {
            surface: surface.clone(),
            target: Some(id.clone()),
        });
        for _ in 0..rng.random_range(0..=2) {
            tokens.push(filler(rng));
        }
    }
    tokens
}

/// Generates the corpus. Same parameters, same output.
pub fn generate(params: &FixtureParams) -> Fixture {
    assert!(params.clusters >= 2, "the cluster ring needs at least 2 clusters");
    assert!(params.min_cluster >= 4 && params.max_cluster >= params.min_cluster);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut used = BTreeSet::new();
    let mut records: Vec<GlossRecord> = Vec::new();
    let mut noun_edges = 0usize;
    let mut cross_pos_targets = 0usize;

    // Planted clusters: a chain of 2-cycles plus chords at girths 3, 4, 5.
    // Cluster k's last node points one way at cluster k+1, closing a ring
    // whose cycles are far longer than any filter.
    let mut cluster_words: Vec<Vec<String>> = Vec::new();
    let mut cluster_ids: Vec<Vec<String>> = Vec::new();
    for _ in 0..params.clusters {
        let size = rng.random_range(params.min_cluster..=params.max_cluster);
        let words: Vec<String> = (0..size).map(|_| make_word(&mut rng, &mut used)).collect();
        let ids: Vec<String> = words
            .iter()
            .map(|w| synset_id(w, PartOfSpeech::Noun, 1))
            .collect();
        cluster_words.push(words);
        cluster_ids.push(ids);
    }

    for k in 0..params.clusters {
        let size = cluster_ids[k].len();
        for j in 0..size {
            let mut targets: Vec<usize> = Vec::new();
            if j > 0 {
                targets.push(j - 1);
            }
            if j + 1 < size {
                targets.push(j + 1);
            }
            if j == 0 {
                targets.extend([2, 3, 4].iter().filter(|&&c| c < size));
            }
            let mut refs: Vec<(String, String)> = targets
                .into_iter()
                .map(|t| (cluster_words[k][t].clone(), cluster_ids[k][t].clone()))
                .collect();
            if j == size - 1 {
                let next = (k + 1) % params.clusters;
                refs.push((cluster_words[next][0].clone(), cluster_ids[next][0].clone()));
            }
            noun_edges += refs.len();
            let mut lemmas = vec![cluster_words[k][j].clone()];
            if rng.random_bool(0.15) {
                lemmas.push(make_word(&mut rng, &mut used));
            }
            let tokens = gloss(&mut rng, &refs);
            records.push(GlossRecord {
                synset_id: cluster_ids[k][j].clone(),
                lemmas,
                pos: PartOfSpeech::Noun,
                gloss_tokens: tokens,
            });
        }
    }

    // Isolated loops, self-contained and tiny.
    let mut isolated: Vec<BTreeSet<String>> = Vec::new();
    let mut isolated_words: Vec<String> = Vec::new();
    for i in 0..params.isolated_loops {
        let size = 2 + i % 2;
        let words: Vec<String> = (0..size).map(|_| make_word(&mut rng, &mut used)).collect();
        let ids: Vec<String> = words
            .iter()
            .map(|w| synset_id(w, PartOfSpeech::Noun, 1))
            .collect();
        for j in 0..size {
            let next = (j + 1) % size;
            let refs = vec![(words[next].clone(), ids[next].clone())];
            noun_edges += refs.len();
            records.push(GlossRecord {
                synset_id: ids[j].clone(),
                lemmas: vec![words[j].clone()],
                pos: PartOfSpeech::Noun,
                gloss_tokens: gloss(&mut rng, &refs),
            });
        }
        isolated.push(ids.into_iter().collect());
        isolated_words.extend(words);
    }

    // Off-pos records define valid synsets that the noun graph must ignore.
    let mut verb_ids: Vec<String> = Vec::new();
    let mut other_words: Vec<String> = Vec::new();
    for i in 0..params.other_pos {
        let pos = [PartOfSpeech::Verb, PartOfSpeech::Adj, PartOfSpeech::Adv][i % 3];
        let word = make_word(&mut rng, &mut used);
        let id = synset_id(&word, pos, 1);
        let k = rng.random_range(0..params.clusters);
        let j = rng.random_range(0..cluster_ids[k].len());
        let refs = vec![(cluster_words[k][j].clone(), cluster_ids[k][j].clone())];
        records.push(GlossRecord {
            synset_id: id.clone(),
            lemmas: vec![word.clone()],
            pos,
            gloss_tokens: gloss(&mut rng, &refs),
        });
        if pos == PartOfSpeech::Verb {
            verb_ids.push(id);
        }
        other_words.push(word);
    }

    // Feeders reference only nodes built before them, so they form a DAG
    // that drains into the cluster ring from every chain.
    let mut pool: Vec<(String, String)> = cluster_words
        .iter()
        .flatten()
        .cloned()
        .zip(cluster_ids.iter().flatten().cloned())
        .collect();
    let mut feeder_words: Vec<String> = Vec::new();
    for _ in 0..params.feeders {
        let word = make_word(&mut rng, &mut used);
        let id = synset_id(&word, PartOfSpeech::Noun, 1);
        let want = rng.random_range(1..=3.min(pool.len()));
        let picks = rand::seq::index::sample(&mut rng, pool.len(), want);
        let mut refs: Vec<(String, String)> = picks.iter().map(|i| pool[i].clone()).collect();
        noun_edges += refs.len();
        if !verb_ids.is_empty() && rng.random_bool(0.08) {
            let v = &verb_ids[rng.random_range(0..verb_ids.len())];
            let verb_word = v.split('.').next().unwrap().to_string();
            refs.push((verb_word, v.clone()));
            cross_pos_targets += 1;
        }
        records.push(GlossRecord {
            synset_id: id.clone(),
            lemmas: vec![word.clone()],
            pos: PartOfSpeech::Noun,
            gloss_tokens: gloss(&mut rng, &refs),
        });
        pool.push((word.clone(), id));
        feeder_words.push(word);
    }

    records.shuffle(&mut rng);

    // Second senses of existing words, appended after the shuffle so their
    // first senses keep rank 1.
    let sense_sources = rand::seq::index::sample(
        &mut rng,
        feeder_words.len(),
        params.second_senses.min(feeder_words.len()),
    );
    for i in sense_sources.iter() {
        let word = feeder_words[i].clone();
        let id = synset_id(&word, PartOfSpeech::Noun, 2);
        let k = rng.random_range(0..params.clusters);
        let refs = vec![(cluster_words[k][0].clone(), cluster_ids[k][0].clone())];
        noun_edges += refs.len();
        records.push(GlossRecord {
            synset_id: id,
            lemmas: vec![word],
            pos: PartOfSpeech::Noun,
            gloss_tokens: gloss(&mut rng, &refs),
        });
    }

    // Dates: clusters sit in alternating eras with small jitter; a sprinkle
    // of flagged and missing rows exercises the exclusion tallies.
    let mut dates: Vec<DateRecord> = Vec::new();
    let mut eras: Vec<i32> = Vec::new();
    const CLEAN: DateFlags = DateFlags {
        proper_noun: false,
        compound: false,
        polysemous: false,
    };
    for (k, words) in cluster_words.iter().enumerate() {
        let era = if k % 2 == 0 { 1300 } else { 1850 };
        eras.push(era);
        for (j, word) in words.iter().enumerate() {
            if k % 5 == 0 && j == 2 {
                continue;
            }
            let flags = if k % 3 == 0 && j == 1 {
                DateFlags {
                    polysemous: true,
                    ..CLEAN
                }
            } else {
                CLEAN
            };
            dates.push(DateRecord {
                word: word.clone(),
                year: era + rng.random_range(-30..=30),
                flags,
            });
        }
    }
    for (i, word) in feeder_words.iter().enumerate() {
        match i % 10 {
            0 => {}
            1 => dates.push(DateRecord {
                word: word.clone(),
                year: crate::ingest::OLD_ENGLISH_YEAR,
                flags: CLEAN,
            }),
            2 => dates.push(DateRecord {
                word: word.clone(),
                year: rng.random_range(1200..=1950),
                flags: DateFlags {
                    proper_noun: i % 3 == 0,
                    compound: i % 3 == 1,
                    polysemous: i % 3 == 2,
                },
            }),
            _ => dates.push(DateRecord {
                word: word.clone(),
                year: rng.random_range(1200..=1950),
                flags: CLEAN,
            }),
        }
    }
    for word in isolated_words.iter().chain(other_words.iter().step_by(2)) {
        dates.push(DateRecord {
            word: word.clone(),
            year: rng.random_range(1200..=1950),
            flags: CLEAN,
        });
    }

    let core_words: BTreeSet<String> = cluster_words.iter().flatten().cloned().collect();
    let starter: Vec<String> = cluster_words
        .iter()
        .step_by(2)
        .flatten()
        .cloned()
        .collect();
    let survey: Vec<String> = cluster_words
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .flat_map(|(_, w)| w.clone())
        .chain(feeder_words.iter().step_by(10).cloned())
        .collect();
    let fringe: Vec<String> = feeder_words
        .iter()
        .step_by(7)
        .cloned()
        .chain(isolated_words.iter().cloned())
        .collect();
    let word_lists = vec![
        WordList::new("starter", starter).unwrap(),
        WordList::new("survey", survey).unwrap(),
        WordList::new("fringe", fringe).unwrap(),
    ];

    let clusters: Vec<BTreeSet<String>> = cluster_ids
        .iter()
        .map(|ids| ids.iter().cloned().collect())
        .collect();
    let core_synsets: BTreeSet<String> = clusters.iter().flatten().cloned().collect();
    let noun_nodes = records
        .iter()
        .filter(|r| r.pos == PartOfSpeech::Noun)
        .count();

    Fixture {
        records,
        dates,
        word_lists,
        truth: FixtureTruth {
            clusters,
            core_synsets,
            core_words,
            noun_nodes,
            noun_edges,
            cross_pos_targets,
            eras,
            isolated,
        },
    }
}

/// Rand index between two partitions over the union of their elements. An
/// element missing from one partition counts as its own singleton there.
pub fn rand_index(a: &[BTreeSet<String>], b: &[BTreeSet<String>]) -> f64 {
    use std::collections::BTreeMap;
    let mut universe: BTreeSet<&str> = BTreeSet::new();
    let mut in_a: BTreeMap<&str, usize> = BTreeMap::new();
    let mut in_b: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, set) in a.iter().enumerate() {
        for x in set {
            universe.insert(x);
            in_a.insert(x, i);
        }
    }
    for (i, set) in b.iter().enumerate() {
        for x in set {
            universe.insert(x);
            in_b.insert(x, i);
        }
    }
    let elems: Vec<&str> = universe.into_iter().collect();
    let n = elems.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let same_a = matches!((in_a.get(elems[i]), in_a.get(elems[j])), (Some(x), Some(y)) if x == y);
            let same_b = matches!((in_b.get(elems[i]), in_b.get(elems[j])), (Some(x), Some(y)) if x == y);
            if same_a == same_b {
                agree += 1;
            }
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coreset::{sampled_core, SampledCoreParams};
    use crate::decompose::{decompose_core, DecomposeParams};
    use crate::etymology::{
        attach_dates, median_pairwise_distance, random_baseline, sign_test_below,
    };
    use crate::graph::NodeId;
    use crate::ingest::{link_graph, parse_gloss_str, render_dates, render_gloss_file};

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&FixtureParams::small(7));
        let b = generate(&FixtureParams::small(7));
        assert_eq!(render_gloss_file(&a.records), render_gloss_file(&b.records));
        assert_eq!(render_dates(&a.dates), render_dates(&b.dates));
        assert_eq!(a.truth, b.truth);

        let c = generate(&FixtureParams::small(8));
        assert_ne!(render_gloss_file(&a.records), render_gloss_file(&c.records));
    }

    #[test]
    fn truth_counts_match_linking() {
        let fx = generate(&FixtureParams::small(3));
        let linked = link_graph(&fx.records, Some(PartOfSpeech::Noun)).unwrap();
        assert_eq!(linked.graph.node_count(), fx.truth.noun_nodes);
        assert_eq!(linked.graph.edge_count(), fx.truth.noun_edges);
        assert_eq!(linked.report.cross_pos_dropped, fx.truth.cross_pos_targets);
        assert_eq!(linked.report.unresolved_dropped, 0);
        assert_eq!(linked.report.duplicate_edges_dropped, 0);
        assert_eq!(linked.report.self_loops_dropped, 0);
    }

    #[test]
    fn sampled_core_recovers_the_planted_attractor() {
        let fx = generate(&FixtureParams::small(11));
        let linked = link_graph(&fx.records, Some(PartOfSpeech::Noun)).unwrap();
        let mut params = SampledCoreParams::new(5);
        // The small corpus is below the default degeneracy cutoff scale.
        params.degeneracy_fraction = 0.05;
        let core = sampled_core(&linked.graph, &params).unwrap();
        let got: BTreeSet<String> = core
            .members
            .iter()
            .map(|&m| linked.graph.node(m).key.clone())
            .collect();
        assert_eq!(got, fx.truth.core_synsets);
        let words: BTreeSet<String> = core
            .members
            .iter()
            .map(|&m| linked.graph.node(m).word().to_string())
            .collect();
        assert_eq!(words, fx.truth.core_words);
    }

    #[test]
    fn decomposition_recovers_the_planted_clusters() {
        let fx = generate(&FixtureParams::small(13));
        let linked = link_graph(&fx.records, Some(PartOfSpeech::Noun)).unwrap();
        let core: Vec<NodeId> = linked
            .graph
            .node_ids()
            .filter(|&n| fx.truth.core_synsets.contains(&linked.graph.node(n).key))
            .collect();
        let cs = decompose_core(&linked.graph, &core, &DecomposeParams::default()).unwrap();
        let got: Vec<BTreeSet<String>> = cs
            .components
            .iter()
            .map(|c| {
                c.members
                    .iter()
                    .map(|&m| linked.graph.node(m).key.clone())
                    .collect()
            })
            .collect();
        assert_eq!(got.len(), fx.truth.clusters.len());
        assert_eq!(rand_index(&got, &fx.truth.clusters), 1.0);
    }

    #[test]
    fn planted_eras_beat_the_shuffled_baseline() {
        let fx = generate(&FixtureParams::small(17));
        let linked = link_graph(&fx.records, Some(PartOfSpeech::Noun)).unwrap();
        let core: Vec<NodeId> = linked
            .graph
            .node_ids()
            .filter(|&n| fx.truth.core_synsets.contains(&linked.graph.node(n).key))
            .collect();
        let cs = decompose_core(&linked.graph, &core, &DecomposeParams::default()).unwrap();
        let dated = attach_dates(&linked.graph, &cs, &fx.dates);

        let pool: Vec<i32> = dated.iter().flat_map(|d| d.years.iter().copied()).collect();
        let sizes: Vec<usize> = dated.iter().map(|d| d.years.len()).collect();
        let base = random_baseline(&pool, &sizes, 99, 30).unwrap();
        let reference = base.mean_medians();

        let pairs: Vec<(f64, f64)> = dated
            .iter()
            .zip(&reference)
            .filter_map(|(d, r)| Some((median_pairwise_distance(&d.years)?, (*r)?)))
            .collect();
        assert!(pairs.len() >= 4);
        let t = sign_test_below(&pairs);
        assert_eq!(t.above, 0, "no cluster should be wider than baseline");
        assert!(t.p_value < 0.05, "p = {}", t.p_value);
    }

    #[test]
    fn corpus_round_trips_through_the_renderers() {
        let fx = generate(&FixtureParams::small(19));
        let text = render_gloss_file(&fx.records);
        let parsed = parse_gloss_str(&text, "fixture.tsv").unwrap();
        assert!(parsed.unresolved.is_empty());
        assert_eq!(parsed.records, fx.records);

        let dates_text = render_dates(&fx.dates);
        let parsed_dates =
            crate::ingest::parse_dates_str(&dates_text, "dates.tsv").unwrap();
        assert_eq!(parsed_dates, fx.dates);
    }

    #[test]
    fn starter_list_is_inside_the_core() {
        let fx = generate(&FixtureParams::small(23));
        assert_eq!(fx.word_lists.len(), 3);
        let starter = &fx.word_lists[0];
        assert_eq!(starter.name, "starter");
        assert!(starter.words.is_subset(&fx.truth.core_words));
        assert!(!fx.word_lists[2].words.is_empty());
    }

    #[test]
    fn rand_index_scores_partition_agreement() {
        let a = vec![set(&["x"]), set(&["y"]), set(&["z"])];
        let b = vec![set(&["x", "y", "z"])];
        assert_eq!(rand_index(&a, &a), 1.0);
        assert_eq!(rand_index(&a, &b), 0.0);

        let c = vec![set(&["x", "y"]), set(&["z"])];
        let score = rand_index(&a, &c);
        assert!(score > 0.0 && score < 1.0);
        assert_eq!(rand_index(&c, &c), 1.0);
    }
}
