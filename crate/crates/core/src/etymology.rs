//! Attestation dates over components: how tightly the words of a component
//! cluster in time, against a shuffled baseline of the same shape.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decompose::ComponentSet;
use crate::graph::DictGraph;
use crate::ingest::DateRecord;
use crate::{Error, Result};

/// Why members dropped out of the dated sample. Each member lands in exactly
/// one bucket, so the counts plus `included` always sum to the component
/// size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DateTally {
    pub included: usize,
    pub proper_noun: usize,
    pub compound: usize,
    pub polysemous: usize,
    pub missing: usize,
}

impl DateTally {
    pub fn total(&self) -> usize {
        self.included + self.proper_noun + self.compound + self.polysemous + self.missing
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentDates {
    pub component_id: usize,
    /// Attestation years of included members, component order.
    pub years: Vec<i32>,
    pub tally: DateTally,
}

/// Looks up each component member's headword in the date table. Flagged
/// words are excluded, classified by the first flag in the order
/// proper noun, compound, polysemous. Duplicate table rows for a word keep
/// the first.
pub fn attach_dates(
    g: &DictGraph,
    cs: &ComponentSet,
    records: &[DateRecord],
) -> Vec<ComponentDates> {
    let mut table: BTreeMap<&str, &DateRecord> = BTreeMap::new();
    for rec in records {
        table.entry(rec.word.as_str()).or_insert(rec);
    }

    cs.components
        .iter()
        .map(|comp| {
            let mut years = Vec::new();
            let mut tally = DateTally::default();
            for &m in &comp.members {
                match table.get(g.node(m).word()) {
                    None => tally.missing += 1,
                    Some(rec) if rec.flags.proper_noun => tally.proper_noun += 1,
                    Some(rec) if rec.flags.compound => tally.compound += 1,
                    Some(rec) if rec.flags.polysemous => tally.polysemous += 1,
                    Some(rec) => {
                        tally.included += 1;
                        years.push(rec.year);
                    }
                }
            }
            debug_assert_eq!(tally.total(), comp.len());
            ComponentDates {
                component_id: comp.id,
                years,
                tally,
            }
        })
        .collect()
}

/// Median of |year_i - year_j| over all unordered pairs. None below two
/// years. Even pair counts average the middle two.
pub fn median_pairwise_distance(years: &[i32]) -> Option<f64> {
    if years.len() < 2 {
        return None;
    }
    let mut dists = Vec::with_capacity(years.len() * (years.len() - 1) / 2);
    for (i, &a) in years.iter().enumerate() {
        for &b in &years[i + 1..] {
            dists.push((a - b).abs());
        }
    }
    dists.sort_unstable();
    let mid = dists.len() / 2;
    Some(if dists.len() % 2 == 1 {
        dists[mid] as f64
    } else {
        (dists[mid - 1] + dists[mid]) as f64 / 2.0
    })
}

pub fn mean_year(years: &[i32]) -> Option<f64> {
    if years.is_empty() {
        return None;
    }
    Some(years.iter().map(|&y| y as f64).sum::<f64>() / years.len() as f64)
}

/// Histogram of component mean years, binned to `bin_width`-year bins keyed
/// by their lower edge.
pub fn mean_year_histogram(means: &[f64], bin_width: u32) -> Result<BTreeMap<i32, usize>> {
    if bin_width == 0 {
        return Err(Error::InvalidParameter("bin width must be positive".into()));
    }
    let mut hist = BTreeMap::new();
    for &m in means {
        let bin = (m / bin_width as f64).floor() as i32 * bin_width as i32;
        *hist.entry(bin).or_insert(0usize) += 1;
    }
    Ok(hist)
}

#[derive(Debug, Clone, Serialize)]
pub struct Baseline {
    /// Group size profile the pseudo-components follow.
    pub sizes: Vec<usize>,
    /// Per trial, per pseudo-component: median pairwise distance.
    pub trials: Vec<Vec<Option<f64>>>,
    pub seed: u64,
}

impl Baseline {
    /// Per pseudo-component mean of its defined medians across trials.
    pub fn mean_medians(&self) -> Vec<Option<f64>> {
        (0..self.sizes.len())
            .map(|i| {
                let vals: Vec<f64> = self.trials.iter().filter_map(|t| t[i]).collect();
                if vals.is_empty() {
                    None
                } else {
                    Some(vals.iter().sum::<f64>() / vals.len() as f64)
                }
            })
            .collect()
    }
}

/// Shuffles the pooled years and regroups them into pseudo-components with
/// the given size profile, once per trial. Trial t uses its own generator
/// seeded `seed + t`, so any prefix of trials is reproducible.
pub fn random_baseline(
    pool: &[i32],
    sizes: &[usize],
    seed: u64,
    trials: usize,
) -> Result<Baseline> {
    let needed: usize = sizes.iter().sum();
    if needed > pool.len() {
        return Err(Error::InvalidParameter(format!(
            "size profile needs {needed} years but the pool has {}",
            pool.len()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trial count must be positive".into()));
    }

    let mut all = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let mut shuffled = pool.to_vec();
        shuffled.shuffle(&mut rng);
        let mut medians = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for &size in sizes {
            medians.push(median_pairwise_distance(&shuffled[at..at + size]));
            at += size;
        }
        all.push(medians);
    }

    Ok(Baseline {
        sizes: sizes.to_vec(),
        trials: all,
        seed,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignTest {
    pub below: usize,
    pub above: usize,
    pub ties: usize,
    /// Exact binomial tail P[X >= below] with X ~ Bin(below + above, 1/2).
    pub p_value: f64,
}

/// One-sided sign test that the first element of each pair tends to fall
/// below the second. Ties drop out of the sample.
pub fn sign_test_below(pairs: &[(f64, f64)]) -> SignTest {
    let mut below = 0usize;
    let mut above = 0usize;
    let mut ties = 0usize;
    for &(a, b) in pairs {
        if a < b {
            below += 1;
        } else if a > b {
            above += 1;
        } else {
            ties += 1;
        }
    }
    SignTest {
        below,
        above,
        ties,
        p_value: binomial_upper_tail(below + above, below),
    }
}

/// P[Bin(n, 1/2) >= k], exact, by iterating the probability mass.
fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut mass = 0.5f64.powi(n as i32);
    let mut tail = 0.0;
    for j in 1..=n {
        mass *= (n - j + 1) as f64 / j as f64;
        if j >= k {
            tail += mass;
        }
    }
    tail.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{Component, Lineage};
    use crate::graph::{build_graph, NodeId, PartOfSpeech, SenseNode};
    use crate::ingest::{DateFlags, OLD_ENGLISH_YEAR};

    fn word_graph(words: &[&str]) -> DictGraph {
        let nodes: Vec<SenseNode> = words
            .iter()
            .map(|w| SenseNode {
                key: format!("{w}.n.01"),
                lemmas: vec![w.to_string()],
                pos: PartOfSpeech::Noun,
                sense_rank: 1,
                gloss: String::new(),
            })
            .collect();
        build_graph(nodes, &[]).unwrap().graph
    }

    fn one_component(n: u32) -> ComponentSet {
        ComponentSet {
            components: vec![Component {
                id: 0,
                members: (0..n).map(NodeId).collect(),
                edges: Vec::new(),
                lineage: Lineage::Root,
            }],
            filter_length: 5,
            refine_threshold: 20,
            refine_length: 4,
        }
    }

    fn rec(word: &str, year: i32, flags: DateFlags) -> DateRecord {
        DateRecord {
            word: word.into(),
            year,
            flags,
        }
    }

    const CLEAN: DateFlags = DateFlags {
        proper_noun: false,
        compound: false,
        polysemous: false,
    };

    #[test]
    fn two_year_median_is_their_gap() {
        assert_eq!(median_pairwise_distance(&[1150, 1895]), Some(745.0));
    }

    #[test]
    fn three_year_median_picks_the_middle_pair() {
        assert_eq!(median_pairwise_distance(&[1200, 1300, 1500]), Some(200.0));
    }

    #[test]
    fn even_pair_count_averages_the_middle() {
        // Pairs of [0,10,20,30]: 10,20,30,10,20,10 -> sorted 10,10,10,20,20,30.
        assert_eq!(median_pairwise_distance(&[0, 10, 20, 30]), Some(15.0));
    }

    #[test]
    fn fewer_than_two_years_has_no_median() {
        assert_eq!(median_pairwise_distance(&[]), None);
        assert_eq!(median_pairwise_distance(&[1500]), None);
    }

    #[test]
    fn tally_buckets_are_exclusive_and_cover_the_component() {
        let g = word_graph(&["alpha", "beta", "gamma", "delta", "epsilon"]);
        let cs = one_component(5);
        let records = vec![
            rec("alpha", 1300, CLEAN),
            rec(
                "beta",
                1400,
                DateFlags {
                    proper_noun: true,
                    compound: false,
                    polysemous: true,
                },
            ),
            rec(
                "gamma",
                1500,
                DateFlags {
                    proper_noun: false,
                    compound: true,
                    polysemous: false,
                },
            ),
            rec(
                "delta",
                1600,
                DateFlags {
                    proper_noun: false,
                    compound: false,
                    polysemous: true,
                },
            ),
        ];
        let attached = attach_dates(&g, &cs, &records);
        assert_eq!(attached.len(), 1);
        let t = attached[0].tally;
        assert_eq!(t.included, 1);
        assert_eq!(t.proper_noun, 1);
        assert_eq!(t.compound, 1);
        assert_eq!(t.polysemous, 1);
        assert_eq!(t.missing, 1);
        assert_eq!(t.total(), 5);
        assert_eq!(attached[0].years, vec![1300]);
    }

    #[test]
    fn duplicate_date_rows_keep_the_first() {
        let g = word_graph(&["alpha"]);
        let cs = one_component(1);
        let records = vec![rec("alpha", 1300, CLEAN), rec("alpha", 1900, CLEAN)];
        let attached = attach_dates(&g, &cs, &records);
        assert_eq!(attached[0].years, vec![1300]);
    }

    #[test]
    fn old_english_words_average_to_the_cutoff() {
        let years = vec![OLD_ENGLISH_YEAR; 4];
        assert_eq!(mean_year(&years), Some(1150.0));
        assert_eq!(median_pairwise_distance(&years), Some(0.0));
    }

    #[test]
    fn mean_year_bins_to_lower_edge() {
        let hist = mean_year_histogram(&[1450.0, 1499.9, 1500.0], 100).unwrap();
        assert_eq!(hist.get(&1400), Some(&2));
        assert_eq!(hist.get(&1500), Some(&1));
        let fine = mean_year_histogram(&[1450.0], 50).unwrap();
        assert_eq!(fine.get(&1450), Some(&1));
        assert!(mean_year_histogram(&[], 0).is_err());
    }

    #[test]
    fn baseline_is_reproducible_and_seed_sensitive() {
        let pool: Vec<i32> = (0..40).map(|i| 1200 + i * 17).collect();
        let sizes = vec![5, 3, 8];
        let a = random_baseline(&pool, &sizes, 9, 6).unwrap();
        let b = random_baseline(&pool, &sizes, 9, 6).unwrap();
        assert_eq!(a.trials, b.trials);
        let c = random_baseline(&pool, &sizes, 10, 6).unwrap();
        assert_ne!(a.trials, c.trials);

        // A prefix of trials is stable regardless of the total count.
        let longer = random_baseline(&pool, &sizes, 9, 12).unwrap();
        assert_eq!(&longer.trials[..6], &a.trials[..]);
    }

    #[test]
    fn baseline_respects_the_size_profile() {
        let pool: Vec<i32> = (0..30).collect();
        let sizes = vec![2, 1, 4];
        let base = random_baseline(&pool, &sizes, 3, 5).unwrap();
        for trial in &base.trials {
            assert_eq!(trial.len(), 3);
            assert!(trial[0].is_some());
            assert!(trial[1].is_none(), "size-1 group has no pairs");
            assert!(trial[2].is_some());
        }
    }

    #[test]
    fn oversized_profile_is_rejected() {
        let err = random_baseline(&[1200, 1300], &[3], 0, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        assert!(random_baseline(&[1200, 1300], &[2], 0, 0).is_err());
    }

    #[test]
    fn sign_test_matches_hand_computed_tails() {
        // All ten planted below: p = 2^-10.
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64 + 1.0)).collect();
        let t = sign_test_below(&pairs);
        assert_eq!(t.below, 10);
        assert!((t.p_value - 1.0 / 1024.0).abs() < 1e-12);

        // Two of three below: C(3,2)+C(3,3) over 8.
        let t = sign_test_below(&[(1.0, 2.0), (1.0, 2.0), (3.0, 2.0)]);
        assert_eq!((t.below, t.above), (2, 1));
        assert!((t.p_value - 0.5).abs() < 1e-12);

        // Ties drop out.
        let t = sign_test_below(&[(1.0, 1.0), (1.0, 2.0)]);
        assert_eq!(t.ties, 1);
        assert!((t.p_value - 0.5).abs() < 1e-12);

        let t = sign_test_below(&[]);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn sign_test_is_monotone_in_evidence() {
        let strong: Vec<(f64, f64)> = (0..20).map(|_| (1.0, 2.0)).collect();
        let mut weak = strong.clone();
        for pair in weak.iter_mut().take(8) {
            *pair = (2.0, 1.0);
        }
        assert!(sign_test_below(&strong).p_value < sign_test_below(&weak).p_value);
    }

    #[test]
    fn era_clustered_components_beat_their_baseline() {
        // Twenty components of five words each, drawn from two well
        // separated eras. Pooled shuffles mix the eras, so real medians sit
        // far below baseline medians.
        let mut real_years: Vec<Vec<i32>> = Vec::new();
        for i in 0..20 {
            let era = if i % 2 == 0 { 1300 } else { 1850 };
            real_years.push((0..5).map(|j| era + j * 7).collect());
        }
        let pool: Vec<i32> = real_years.iter().flatten().copied().collect();
        let sizes: Vec<usize> = real_years.iter().map(Vec::len).collect();
        let base = random_baseline(&pool, &sizes, 42, 50).unwrap();
        let reference = base.mean_medians();

        let pairs: Vec<(f64, f64)> = real_years
            .iter()
            .zip(&reference)
            .map(|(years, reference)| {
                (
                    median_pairwise_distance(years).unwrap(),
                    reference.unwrap(),
                )
            })
            .collect();
        let t = sign_test_below(&pairs);
        assert_eq!(t.below, 20);
        assert!(t.p_value < 0.01, "p = {}", t.p_value);
    }
}
