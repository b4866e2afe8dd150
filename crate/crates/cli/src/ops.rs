//! The pipeline stages. Every stage reads its inputs from the working
//! directory (or explicit file flags), writes its artifacts atomically, and
//! records parameters plus input/output digests in the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use glossgraph::coreset::{
    convergence_profile, exact_core, sampled_core, wordlist_overlap, ExactCoreParams,
    SampledCoreParams, DEFAULT_MAX_DEPTH,
};
use glossgraph::decompose::{
    component_report, components_dot, decompose_core, Component, ComponentSet, DecomposeParams,
    Lineage,
};
use glossgraph::etymology::{
    attach_dates, mean_year, mean_year_histogram, median_pairwise_distance, random_baseline,
    sign_test_below,
};
use glossgraph::fixture::{generate, FixtureParams};
use glossgraph::graph::{DictGraph, NodeId, PartOfSpeech};
use glossgraph::ingest::{
    link_graph, load_edge_list_graph_str, parse_dates_str, parse_gloss_str, parse_word_list_str,
    reduce_first_sense, render_dates, render_edges_tsv, render_gloss_file, render_nodes_jsonl,
    WordList,
};
use glossgraph::loops::{
    edge_girth, loop_histogram, nodes_in_loops, randomize_degree_preserving, Girth,
    RandomizeParams,
};
use glossgraph::walks::{prune_ubiquitous, svd_topk, theme_report, walk_counts, WalkMatrix};
use serde::{Deserialize, Serialize};

use crate::support::{
    bad_param, digest, lift, read_input, Config, Format, Manifest, StageWriter, Summary,
};

pub struct Ctx {
    pub dir: PathBuf,
    pub cfg: Config,
    pub format: Format,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

const NODES_FILE: &str = "nodes.jsonl";
const EDGES_FILE: &str = "edges.tsv";
const CORE_FILE: &str = "core.json";
const COMPONENTS_FILE: &str = "components.json";
const WALKS_FILE: &str = "walks.csv";

/// Loads the graph artifact, returning its digests for manifest bookkeeping.
fn load_graph(ctx: &Ctx) -> Result<(DictGraph, BTreeMap<String, String>)> {
    let nodes_path = ctx.path(NODES_FILE);
    let edges_path = ctx.path(EDGES_FILE);
    let nodes_text = read_input(&nodes_path)?;
    let edges_text = read_input(&edges_path)?;
    let built = load_edge_list_graph_str(&nodes_text, &nodes_path, &edges_text, &edges_path)
        .map_err(lift)?;
    let inputs = BTreeMap::from([
        (NODES_FILE.to_string(), digest(nodes_text.as_bytes())),
        (EDGES_FILE.to_string(), digest(edges_text.as_bytes())),
    ]);
    Ok((built.graph, inputs))
}

fn key_index(g: &DictGraph) -> BTreeMap<&str, NodeId> {
    g.node_ids().map(|n| (g.node(n).key.as_str(), n)).collect()
}

#[derive(Serialize, Deserialize)]
struct CoreMember {
    key: String,
    word: String,
    membership: f64,
}

#[derive(Serialize, Deserialize)]
struct CoreFile {
    method: String,
    params: serde_json::Value,
    size: usize,
    members: Vec<CoreMember>,
    degenerate_starts: Vec<String>,
    sample_count: usize,
}

fn load_core(ctx: &Ctx, g: &DictGraph) -> Result<(Vec<NodeId>, String)> {
    let path = ctx.path(CORE_FILE);
    let text = read_input(&path)?;
    let file: CoreFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let index = key_index(g);
    let mut ids = Vec::with_capacity(file.members.len());
    for member in &file.members {
        let id = index.get(member.key.as_str()).ok_or_else(|| {
            anyhow::anyhow!(
                "core member {} is not in the current graph; re-run ingest and core together",
                member.key
            )
        })?;
        ids.push(*id);
    }
    ids.sort_unstable();
    Ok((ids, digest(text.as_bytes())))
}

#[derive(Serialize, Deserialize)]
struct ComponentEntry {
    id: usize,
    lineage: String,
    members: Vec<String>,
    words: Vec<String>,
    edges: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct ComponentsFile {
    filter_length: u32,
    refine_threshold: usize,
    refine_length: u32,
    components: Vec<ComponentEntry>,
}

fn render_components(g: &DictGraph, cs: &ComponentSet) -> String {
    let components = cs
        .components
        .iter()
        .map(|c| ComponentEntry {
            id: c.id,
            lineage: c.lineage.to_string(),
            members: c.members.iter().map(|&m| g.node(m).key.clone()).collect(),
            words: c
                .members
                .iter()
                .map(|&m| g.node(m).word().to_string())
                .collect(),
            edges: c
                .edges
                .iter()
                .map(|&(u, v)| (g.node(u).key.clone(), g.node(v).key.clone()))
                .collect(),
        })
        .collect();
    let file = ComponentsFile {
        filter_length: cs.filter_length,
        refine_threshold: cs.refine_threshold,
        refine_length: cs.refine_length,
        components,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("components json");
    text.push('\n');
    text
}

fn parse_lineage(s: &str) -> Result<Lineage> {
    if s == "root" {
        return Ok(Lineage::Root);
    }
    if let Some(id) = s.strip_prefix("refined-from:") {
        return Ok(Lineage::RefinedFrom(id.parse()?));
    }
    anyhow::bail!("unknown lineage {s:?}")
}

fn load_components(ctx: &Ctx, g: &DictGraph) -> Result<(ComponentSet, String)> {
    let path = ctx.path(COMPONENTS_FILE);
    let text = read_input(&path)?;
    let file: ComponentsFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let index = key_index(g);
    let lookup = |key: &str| {
        index.get(key).copied().ok_or_else(|| {
            anyhow::anyhow!("component member {key} is not in the current graph")
        })
    };
    let mut components = Vec::with_capacity(file.components.len());
    for entry in &file.components {
        let members = entry
            .members
            .iter()
            .map(|k| lookup(k))
            .collect::<Result<Vec<_>>>()?;
        let edges = entry
            .edges
            .iter()
            .map(|(u, v)| Ok((lookup(u)?, lookup(v)?)))
            .collect::<Result<Vec<_>>>()?;
        components.push(Component {
            id: entry.id,
            members,
            edges,
            lineage: parse_lineage(&entry.lineage)?,
        });
    }
    Ok((
        ComponentSet {
            components,
            filter_length: file.filter_length,
            refine_threshold: file.refine_threshold,
            refine_length: file.refine_length,
        },
        digest(text.as_bytes()),
    ))
}

#[derive(Serialize, Deserialize)]
struct WalksHeader {
    rows: usize,
    component_ids: Vec<usize>,
    max_walk_length: u32,
    pruned_components: Vec<usize>,
    saturation_events: u64,
}

fn render_walks_csv(m: &WalkMatrix) -> String {
    let header = WalksHeader {
        rows: m.rows,
        component_ids: m.component_ids.clone(),
        max_walk_length: m.max_walk_length,
        pruned_components: m.pruned_components.clone(),
        saturation_events: m.saturation_events,
    };
    let mut out = format!(
        "# {}\nrow,component_id,count\n",
        serde_json::to_string(&header).expect("walks header")
    );
    for (ci, col) in m.columns.iter().enumerate() {
        let id = m.component_ids[ci];
        for &(row, count) in col {
            let _ = writeln!(out, "{row},{id},{count}");
        }
    }
    out
}

fn parse_walks_csv(text: &str) -> Result<WalkMatrix> {
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| anyhow::anyhow!("walks.csv: missing parameter header"))?;
    let header: WalksHeader = serde_json::from_str(header_line)?;
    anyhow::ensure!(
        lines.next() == Some("row,component_id,count"),
        "walks.csv: unexpected column header"
    );

    let col_of: BTreeMap<usize, usize> = header
        .component_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let mut columns = vec![Vec::new(); header.component_ids.len()];
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (Some(row), Some(id), Some(count)) = (parts.next(), parts.next(), parts.next())
        else {
            anyhow::bail!("walks.csv line {}: expected row,component_id,count", lineno + 3);
        };
        let row: u32 = row.parse()?;
        let id: usize = id.parse()?;
        let count: u64 = count.parse()?;
        let col = col_of
            .get(&id)
            .ok_or_else(|| anyhow::anyhow!("walks.csv: unknown component id {id}"))?;
        columns[*col].push((row, count));
    }
    for col in &mut columns {
        col.sort_unstable_by_key(|&(r, _)| r);
    }
    Ok(WalkMatrix {
        rows: header.rows,
        component_ids: header.component_ids,
        columns,
        max_walk_length: header.max_walk_length,
        pruned_components: header.pruned_components,
        saturation_events: header.saturation_events,
    })
}

fn girth_str(girth: Girth) -> String {
    match girth {
        Girth::Finite(l) => l.to_string(),
        Girth::Unbounded => "inf".to_string(),
    }
}

fn opt_str<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct FixtureArgs {
    /// Generator seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Full-size corpus (about 2000 records) instead of the small one
    #[arg(long)]
    pub full: bool,
}

pub fn cmd_fixture(ctx: &Ctx, args: &FixtureArgs) -> Result<Summary> {
    let seed = ctx.cfg.resolve("seed", args.seed)?.unwrap_or(0);
    let full = ctx.cfg.resolve_flag("full", args.full)?;
    let params = if full {
        FixtureParams::standard(seed)
    } else {
        FixtureParams::small(seed)
    };
    let fx = generate(&params);

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write("glosses.tsv", &render_gloss_file(&fx.records))?;
    writer.write("dates.tsv", &render_dates(&fx.dates))?;
    for list in &fx.word_lists {
        let mut text = String::new();
        for word in &list.words {
            let _ = writeln!(text, "{word}");
        }
        writer.write(&format!("lists/{}.txt", list.name), &text)?;
    }
    let mut truth = serde_json::to_string_pretty(&fx.truth)?;
    truth.push('\n');
    writer.write("truth.json", &truth)?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "fixture",
        serde_json::json!({"seed": seed, "full": full}),
        BTreeMap::new(),
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("records", fx.records.len());
    summary.push("date_rows", fx.dates.len());
    summary.push("word_lists", fx.word_lists.len());
    summary.push("planted_clusters", fx.truth.clusters.len());
    summary.push("core_size", fx.truth.core_synsets.len());
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct IngestArgs {
    /// Gloss corpus file (tab-separated synset records)
    #[arg(long)]
    pub glosses: Option<PathBuf>,
    /// Part of speech to keep: n, v, a, r, x, or any
    #[arg(long)]
    pub pos: Option<String>,
    /// Build the word-level graph from first senses instead of the synset graph
    #[arg(long)]
    pub words: bool,
}

fn parse_pos_filter(s: &str) -> Result<Option<PartOfSpeech>> {
    match s {
        "any" | "all" => Ok(None),
        "n" | "noun" | "v" | "verb" | "a" | "adj" | "adjective" | "r" | "adv" | "adverb" => {
            Ok(Some(PartOfSpeech::parse(s)))
        }
        "x" | "other" => Ok(Some(PartOfSpeech::Other)),
        other => Err(bad_param(format!(
            "pos must be one of n/v/a/r/x/any, got {other:?}"
        ))),
    }
}

pub fn cmd_ingest(ctx: &Ctx, args: &IngestArgs) -> Result<Summary> {
    let glosses = ctx
        .cfg
        .resolve("glosses", args.glosses.clone())?
        .ok_or_else(|| bad_param("--glosses is required"))?;
    let pos = ctx
        .cfg
        .resolve("pos", args.pos.clone())?
        .unwrap_or_else(|| "n".to_string());
    let words = ctx.cfg.resolve_flag("words", args.words)?;
    let pos_filter = parse_pos_filter(&pos)?;

    let text = read_input(&glosses)?;
    let parsed = parse_gloss_str(&text, &glosses).map_err(lift)?;
    let linked = if words {
        reduce_first_sense(&parsed.records, pos_filter).map_err(lift)?
    } else {
        link_graph(&parsed.records, pos_filter).map_err(lift)?
    };

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write(NODES_FILE, &render_nodes_jsonl(linked.graph.nodes()))?;
    writer.write(EDGES_FILE, &render_edges_tsv(&linked.graph))?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "ingest",
        serde_json::json!({"pos": pos, "words": words}),
        BTreeMap::from([("glosses".to_string(), digest(text.as_bytes()))]),
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("nodes", linked.graph.node_count());
    summary.push("edges", linked.graph.edge_count());
    summary.push("dangling_gloss_refs", parsed.unresolved.len());
    summary.push("unresolved_dropped", linked.report.unresolved_dropped);
    summary.push("cross_pos_dropped", linked.report.cross_pos_dropped);
    summary.push("duplicate_edges_dropped", linked.report.duplicate_edges_dropped);
    summary.push("self_loops_dropped", linked.report.self_loops_dropped);
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct CoreArgs {
    /// Number of sampled start nodes
    #[arg(long)]
    pub sample: Option<usize>,
    /// Sampling seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of live samples a core node must appear in
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Samples reaching under this fraction of the graph are degenerate
    #[arg(long)]
    pub degeneracy: Option<f64>,
    /// Use the exact all-ancestors computation instead of sampling
    #[arg(long)]
    pub exact: bool,
    /// Exact mode: fraction of the graph that must reach a core node
    #[arg(long)]
    pub coverage: Option<f64>,
    /// Exact mode: bitset memory limit in bytes
    #[arg(long)]
    pub memory_cap: Option<usize>,
    /// BFS depth limit for convergence profiles
    #[arg(long)]
    pub max_depth: Option<u32>,
    /// How many starts to profile into convergence.csv
    #[arg(long)]
    pub profile_starts: Option<usize>,
}

pub fn cmd_core(ctx: &Ctx, args: &CoreArgs) -> Result<Summary> {
    let (g, inputs) = load_graph(ctx)?;
    let seed = ctx.cfg.resolve("seed", args.seed)?.unwrap_or(0);
    let exact = ctx.cfg.resolve_flag("exact", args.exact)?;
    let max_depth = ctx
        .cfg
        .resolve("max-depth", args.max_depth)?
        .unwrap_or(DEFAULT_MAX_DEPTH);
    let profile_starts = ctx
        .cfg
        .resolve("profile-starts", args.profile_starts)?
        .unwrap_or(12);

    let (core, method, params_json) = if exact {
        let mut params = ExactCoreParams::default();
        if let Some(c) = ctx.cfg.resolve("coverage", args.coverage)? {
            params.coverage_fraction = c;
        }
        if let Some(m) = ctx.cfg.resolve("memory-cap", args.memory_cap)? {
            params.memory_cap_bytes = m;
        }
        let core = exact_core(&g, &params).map_err(lift)?;
        (core, "exact", serde_json::to_value(&params)?)
    } else {
        let mut params = SampledCoreParams::new(seed);
        if let Some(s) = ctx.cfg.resolve("sample", args.sample)? {
            params.sample_size = s;
        }
        if let Some(t) = ctx.cfg.resolve("threshold", args.threshold)? {
            params.membership_threshold = t;
        }
        if let Some(d) = ctx.cfg.resolve("degeneracy", args.degeneracy)? {
            params.degeneracy_fraction = d;
        }
        let core = sampled_core(&g, &params).map_err(lift)?;
        (core, "sampled", serde_json::to_value(&params)?)
    };

    let members: Vec<CoreMember> = core
        .members
        .iter()
        .map(|&m| CoreMember {
            key: g.node(m).key.clone(),
            word: g.node(m).word().to_string(),
            membership: core.membership_fraction[m.index()],
        })
        .collect();
    let file = CoreFile {
        method: method.to_string(),
        params: params_json.clone(),
        size: members.len(),
        members,
        degenerate_starts: core
            .degenerate_samples()
            .iter()
            .map(|&s| g.node(s).key.clone())
            .collect(),
        sample_count: core.samples.len(),
    };
    let mut core_text = serde_json::to_string_pretty(&file)?;
    core_text.push('\n');

    // Convergence profiles from the sampled starts themselves, or a seeded
    // draw in exact mode.
    let starts: Vec<NodeId> = if core.samples.is_empty() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, g.node_count(), profile_starts.min(g.node_count()))
            .iter()
            .map(|i| NodeId(i as u32))
            .collect()
    } else {
        core.samples
            .iter()
            .take(profile_starts)
            .map(|s| s.start)
            .collect()
    };
    let mut convergence = format!(
        "# {}\nstart,distance,cumulative\n",
        serde_json::json!({
            "max_depth": max_depth,
            "method": method,
            "seed": seed,
            "starts": starts.len(),
        })
    );
    let mut half_heights = Vec::new();
    let mut saturated = 0usize;
    for &start in &starts {
        let profile = convergence_profile(&g, start, max_depth).map_err(lift)?;
        for (i, cum) in profile.cumulative.iter().enumerate() {
            let _ = writeln!(convergence, "{},{},{}", g.node(start).key, i + 1, cum);
        }
        if let Some(h) = profile.half_height_distance {
            half_heights.push(h);
        }
        saturated += profile.saturated as usize;
    }
    half_heights.sort_unstable();

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write(CORE_FILE, &core_text)?;
    writer.write("convergence.csv", &convergence)?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "core",
        serde_json::json!({
            "method": method,
            "params": params_json,
            "max_depth": max_depth,
            "profile_starts": profile_starts,
        }),
        inputs,
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("method", method);
    summary.push("core_size", file.size);
    summary.push("samples", file.sample_count);
    summary.push("degenerate_samples", file.degenerate_starts.len());
    summary.push(
        "median_half_height",
        opt_str(half_heights.get(half_heights.len() / 2).copied()),
    );
    summary.push("profiles_saturated", format!("{saturated}/{}", starts.len()));
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct LoopsArgs {
    /// Node scope: "all" or "core" (reads core.json)
    #[arg(long)]
    pub scope: Option<String>,
    /// Stop girth probes at this cycle length
    #[arg(long)]
    pub probe_cap: Option<u32>,
    /// Comma-separated seeds; each adds a degree-preserving shuffle to the histogram
    #[arg(long)]
    pub randomized_seeds: Option<String>,
    /// Successful swaps per edge for the shuffles
    #[arg(long)]
    pub swap_factor: Option<u32>,
    /// Attempt budget multiplier for the shuffles
    #[arg(long)]
    pub attempts_factor: Option<u32>,
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| bad_param(format!("randomized-seeds entry {p:?}: {e}")))
        })
        .collect()
}

pub fn cmd_loops(ctx: &Ctx, args: &LoopsArgs) -> Result<Summary> {
    let (g, mut inputs) = load_graph(ctx)?;
    let scope_name = ctx
        .cfg
        .resolve("scope", args.scope.clone())?
        .unwrap_or_else(|| "all".to_string());
    let probe_cap = ctx.cfg.resolve("probe-cap", args.probe_cap)?;
    let seeds = match ctx
        .cfg
        .resolve("randomized-seeds", args.randomized_seeds.clone())?
    {
        Some(s) => parse_seed_list(&s)?,
        None => Vec::new(),
    };
    let swap_factor = ctx.cfg.resolve("swap-factor", args.swap_factor)?.unwrap_or(10);
    let attempts_factor = ctx
        .cfg
        .resolve("attempts-factor", args.attempts_factor)?
        .unwrap_or(100);

    let scope: Option<Vec<NodeId>> = match scope_name.as_str() {
        "all" => None,
        "core" => {
            let (ids, core_digest) = load_core(ctx, &g)?;
            inputs.insert(CORE_FILE.to_string(), core_digest);
            Some(ids)
        }
        other => return Err(bad_param(format!("scope must be all or core, got {other:?}"))),
    };

    let girths = edge_girth(&g, scope.as_deref(), probe_cap).map_err(lift)?;
    let params_header = serde_json::json!({
        "attempts_factor": attempts_factor,
        "probe_cap": probe_cap,
        "randomized_seeds": seeds,
        "scope": scope_name,
        "swap_factor": swap_factor,
    });

    let mut girths_csv = format!("# {params_header}\nsrc,dst,girth\n");
    for (&(u, v), &girth) in &girths.girths {
        let _ = writeln!(
            girths_csv,
            "{},{},{}",
            g.node(u).key,
            g.node(v).key,
            girth_str(girth)
        );
    }

    let real_hist = loop_histogram(&girths);
    let mut hist_csv = format!("# {params_header}\nloop_length,edge_count,source\n");
    let mut short_counts: Vec<(String, usize)> = Vec::new();
    let write_hist = |csv: &mut String,
                          hist: &glossgraph::loops::LoopHistogram,
                          source: &str|
     -> usize {
        let mut short = 0;
        for (&len, &count) in &hist.counts {
            let _ = writeln!(csv, "{len},{count},{source}");
            if len <= 5 {
                short += count;
            }
        }
        if hist.unbounded_edges > 0 {
            let _ = writeln!(csv, "inf,{},{source}", hist.unbounded_edges);
        }
        short
    };
    let real_short = write_hist(&mut hist_csv, &real_hist, "real");
    short_counts.push(("real".to_string(), real_short));

    // Shuffles operate on the scoped subgraph so degree preservation is
    // judged against the edges actually under study.
    let scoped_graph = match &scope {
        None => g.clone(),
        Some(nodes) => {
            let mut mask = vec![false; g.node_count()];
            for n in nodes {
                mask[n.index()] = true;
            }
            let edges: Vec<(NodeId, NodeId)> = g
                .edges()
                .filter(|&(u, v)| mask[u.index()] && mask[v.index()])
                .collect();
            g.with_edges(&edges).map_err(lift)?.graph
        }
    };
    let mut incomplete_shuffles = 0usize;
    for &seed in &seeds {
        let params = RandomizeParams {
            swap_factor,
            seed,
            max_attempts_factor: attempts_factor,
        };
        let shuffled = randomize_degree_preserving(&scoped_graph, &params).map_err(lift)?;
        if let Some(warning) = shuffled.report.warning() {
            eprintln!("seed {seed}: {warning}");
            incomplete_shuffles += 1;
        }
        let rand_girths = edge_girth(&shuffled.graph, None, probe_cap).map_err(lift)?;
        let hist = loop_histogram(&rand_girths);
        let source = format!("randomized:{seed}");
        let short = write_hist(&mut hist_csv, &hist, &source);
        short_counts.push((source, short));
    }

    let loop_nodes = nodes_in_loops(&scoped_graph).len();

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write("girths.csv", &girths_csv)?;
    writer.write("loop_histogram.csv", &hist_csv)?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage("loops", params_header, inputs, writer.into_outputs());
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("edges_examined", girths.girths.len());
    summary.push(
        "edges_on_loops",
        girths.girths.len() - real_hist.unbounded_edges,
    );
    summary.push("nodes_in_loops", loop_nodes);
    for (source, short) in &short_counts {
        summary.push(&format!("short_loop_edges[{source}]"), short);
    }
    if incomplete_shuffles > 0 {
        summary.push("incomplete_shuffles", incomplete_shuffles);
    }
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct RandomizeArgs {
    /// Shuffle seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Successful swaps per edge
    #[arg(long)]
    pub swap_factor: Option<u32>,
    /// Attempt budget multiplier
    #[arg(long)]
    pub attempts_factor: Option<u32>,
}

pub fn cmd_randomize(ctx: &Ctx, args: &RandomizeArgs) -> Result<Summary> {
    let (g, inputs) = load_graph(ctx)?;
    let seed = ctx.cfg.resolve("seed", args.seed)?.unwrap_or(0);
    let params = RandomizeParams {
        swap_factor: ctx.cfg.resolve("swap-factor", args.swap_factor)?.unwrap_or(10),
        seed,
        max_attempts_factor: ctx
            .cfg
            .resolve("attempts-factor", args.attempts_factor)?
            .unwrap_or(100),
    };
    let shuffled = randomize_degree_preserving(&g, &params).map_err(lift)?;
    if let Some(warning) = shuffled.report.warning() {
        eprintln!("{warning}");
    }

    let name = format!("rand_edges_{seed}.tsv");
    let mut writer = StageWriter::new(&ctx.dir);
    writer.write(&name, &render_edges_tsv(&shuffled.graph))?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        &format!("randomize:{seed}"),
        serde_json::to_value(&params)?,
        inputs,
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("target_swaps", shuffled.report.target_swaps);
    summary.push("achieved_swaps", shuffled.report.achieved_swaps);
    summary.push("attempts", shuffled.report.attempts);
    summary.push("completed", shuffled.report.completed());
    summary.push("edges", name);
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct DecomposeArgs {
    /// Keep edges on loops no longer than this
    #[arg(long)]
    pub filter_length: Option<u32>,
    /// Refine components larger than this
    #[arg(long)]
    pub refine_threshold: Option<usize>,
    /// Loop length for the refinement pass
    #[arg(long)]
    pub refine_length: Option<u32>,
    /// Node scope: "core" (reads core.json) or "all"
    #[arg(long)]
    pub scope: Option<String>,
}

pub fn cmd_decompose(ctx: &Ctx, args: &DecomposeArgs) -> Result<Summary> {
    let (g, mut inputs) = load_graph(ctx)?;
    let params = DecomposeParams {
        filter_length: ctx
            .cfg
            .resolve("filter-length", args.filter_length)?
            .unwrap_or(5),
        refine_threshold: ctx
            .cfg
            .resolve("refine-threshold", args.refine_threshold)?
            .unwrap_or(20),
        refine_length: ctx
            .cfg
            .resolve("refine-length", args.refine_length)?
            .unwrap_or(4),
    };
    let scope_name = ctx
        .cfg
        .resolve("scope", args.scope.clone())?
        .unwrap_or_else(|| "core".to_string());
    let scope: Vec<NodeId> = match scope_name.as_str() {
        "all" => g.node_ids().collect(),
        "core" => {
            let (ids, core_digest) = load_core(ctx, &g)?;
            inputs.insert(CORE_FILE.to_string(), core_digest);
            ids
        }
        other => return Err(bad_param(format!("scope must be all or core, got {other:?}"))),
    };

    let cs = decompose_core(&g, &scope, &params).map_err(lift)?;
    let report = component_report(&g, &cs).map_err(lift)?;
    let dot = components_dot(&g, &cs).map_err(lift)?;

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write(COMPONENTS_FILE, &render_components(&g, &cs))?;
    writer.write("components.txt", &report)?;
    writer.write("components.dot", &dot)?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "decompose",
        serde_json::json!({
            "filter_length": params.filter_length,
            "refine_length": params.refine_length,
            "refine_threshold": params.refine_threshold,
            "scope": scope_name,
        }),
        inputs,
        writer.into_outputs(),
    );
    manifest.save()?;

    let sizes: Vec<usize> = cs.components.iter().map(Component::len).collect();
    let refined = cs
        .components
        .iter()
        .filter(|c| c.lineage != Lineage::Root)
        .count();
    let mut summary = Summary::default();
    summary.push("components", cs.components.len());
    summary.push("covered_nodes", cs.covered_nodes().len());
    summary.push("smallest", opt_str(sizes.iter().min()));
    summary.push("largest", opt_str(sizes.iter().max()));
    summary.push("refined_components", refined);
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct PathsArgs {
    /// Count walks up to this length
    #[arg(long)]
    pub max_walk_length: Option<u32>,
    /// Drop components whose support exceeds this fraction of all nodes
    #[arg(long)]
    pub prune: Option<f64>,
}

pub fn cmd_paths(ctx: &Ctx, args: &PathsArgs) -> Result<Summary> {
    let (g, mut inputs) = load_graph(ctx)?;
    let (cs, comp_digest) = load_components(ctx, &g)?;
    inputs.insert(COMPONENTS_FILE.to_string(), comp_digest);
    let max_walk_length = ctx
        .cfg
        .resolve("max-walk-length", args.max_walk_length)?
        .unwrap_or(5);
    let prune = ctx.cfg.resolve("prune", args.prune)?;

    let mut matrix = walk_counts(&g, &cs, max_walk_length).map_err(lift)?;
    if let Some(fraction) = prune {
        matrix = prune_ubiquitous(&matrix, fraction).map_err(lift)?;
    }

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write(WALKS_FILE, &render_walks_csv(&matrix))?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "paths",
        serde_json::json!({"max_walk_length": max_walk_length, "prune": prune}),
        inputs,
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("rows", matrix.rows);
    summary.push("columns", matrix.col_count());
    summary.push("nonzeros", matrix.nonzeros());
    summary.push("pruned_components", matrix.pruned_components.len());
    summary.push("saturation_events", matrix.saturation_events);
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct SvdArgs {
    /// Singular triplets to keep
    #[arg(long)]
    pub k: Option<usize>,
    /// Components listed per theme
    #[arg(long)]
    pub top: Option<usize>,
}

pub fn cmd_svd(ctx: &Ctx, args: &SvdArgs) -> Result<Summary> {
    let (g, mut inputs) = load_graph(ctx)?;
    let (cs, comp_digest) = load_components(ctx, &g)?;
    inputs.insert(COMPONENTS_FILE.to_string(), comp_digest);
    let walks_path = ctx.path(WALKS_FILE);
    let walks_text = read_input(&walks_path)?;
    inputs.insert(WALKS_FILE.to_string(), digest(walks_text.as_bytes()));
    let matrix = parse_walks_csv(&walks_text)?;
    anyhow::ensure!(
        matrix.rows == g.node_count(),
        "walks.csv was built for a {}-node graph, current graph has {}",
        matrix.rows,
        g.node_count()
    );

    let k = ctx.cfg.resolve("k", args.k)?.unwrap_or(12);
    let top = ctx.cfg.resolve("top", args.top)?.unwrap_or(8);
    let svd = svd_topk(&matrix, k).map_err(lift)?;

    let header = serde_json::json!({
        "k": k,
        "returned": svd.singular_values.len(),
        "truncated_rank": svd.truncated_rank,
    });
    let mut sigma_csv = format!("# {header}\nindex,sigma\n");
    for (i, sigma) in svd.singular_values.iter().enumerate() {
        let _ = writeln!(sigma_csv, "{i},{sigma}");
    }
    let mut vectors_csv = format!("# {header}\nvector,component_id,coefficient\n");
    for (vi, right) in svd.right_vectors.iter().enumerate() {
        for (ci, coeff) in right.iter().enumerate() {
            let _ = writeln!(vectors_csv, "{vi},{},{coeff}", svd.component_ids[ci]);
        }
    }
    let themes = theme_report(&g, &cs, &svd, top);

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write("singular_values.csv", &sigma_csv)?;
    writer.write("right_vectors.csv", &vectors_csv)?;
    writer.write("themes.txt", &themes)?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "svd",
        serde_json::json!({"k": k, "top": top}),
        inputs,
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("k_requested", k);
    summary.push("k_returned", svd.singular_values.len());
    summary.push("truncated_rank", opt_str(svd.truncated_rank));
    summary.push("sigma_1", opt_str(svd.singular_values.first()));
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct EtymArgs {
    /// Attestation date table (word, year, flags)
    #[arg(long)]
    pub dates: Option<PathBuf>,
    /// Shuffled baseline trials
    #[arg(long)]
    pub trials: Option<usize>,
    /// Baseline seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mean-year histogram bin width
    #[arg(long)]
    pub bin_width: Option<u32>,
}

pub fn cmd_etym(ctx: &Ctx, args: &EtymArgs) -> Result<Summary> {
    let (g, mut inputs) = load_graph(ctx)?;
    let (cs, comp_digest) = load_components(ctx, &g)?;
    inputs.insert(COMPONENTS_FILE.to_string(), comp_digest);
    let dates_path = ctx
        .cfg
        .resolve("dates", args.dates.clone())?
        .ok_or_else(|| bad_param("--dates is required"))?;
    let trials = ctx.cfg.resolve("trials", args.trials)?.unwrap_or(1000);
    let seed = ctx.cfg.resolve("seed", args.seed)?.unwrap_or(0);
    let bin_width = ctx.cfg.resolve("bin-width", args.bin_width)?.unwrap_or(50);

    let dates_text = read_input(&dates_path)?;
    inputs.insert("dates".to_string(), digest(dates_text.as_bytes()));
    let records = parse_dates_str(&dates_text, &dates_path).map_err(lift)?;

    let dated = attach_dates(&g, &cs, &records);
    let pool: Vec<i32> = dated.iter().flat_map(|d| d.years.iter().copied()).collect();
    let sizes: Vec<usize> = dated.iter().map(|d| d.years.len()).collect();
    let baseline = random_baseline(&pool, &sizes, seed, trials).map_err(lift)?;
    let reference = baseline.mean_medians();

    let pairs: Vec<(f64, f64)> = dated
        .iter()
        .zip(&reference)
        .filter_map(|(d, r)| Some((median_pairwise_distance(&d.years)?, (*r)?)))
        .collect();
    let test = sign_test_below(&pairs);

    let header = serde_json::json!({
        "bin_width": bin_width,
        "seed": seed,
        "sign_above": test.above,
        "sign_below": test.below,
        "sign_p": test.p_value,
        "sign_ties": test.ties,
        "trials": trials,
    });
    let mut etym_csv = format!(
        "# {header}\ncomponent_id,size,included,proper_noun,compound,polysemous,missing,median_pairwise,mean_year\n"
    );
    let mut means = Vec::new();
    for d in &dated {
        let median = median_pairwise_distance(&d.years);
        let mean = mean_year(&d.years);
        if let Some(m) = mean {
            means.push(m);
        }
        let _ = writeln!(
            etym_csv,
            "{},{},{},{},{},{},{},{},{}",
            d.component_id,
            d.tally.total(),
            d.tally.included,
            d.tally.proper_noun,
            d.tally.compound,
            d.tally.polysemous,
            d.tally.missing,
            opt_str(median),
            opt_str(mean)
        );
    }

    let mut baseline_csv = format!(
        "# {}\ntrial,pseudo_component,median\n",
        serde_json::json!({"seed": seed, "sizes": sizes, "trials": trials})
    );
    for (t, medians) in baseline.trials.iter().enumerate() {
        for (i, median) in medians.iter().enumerate() {
            let _ = writeln!(baseline_csv, "{t},{i},{}", opt_str(*median));
        }
    }

    let hist = mean_year_histogram(&means, bin_width).map_err(lift)?;
    let mut hist_csv = format!(
        "# {}\nbin,count\n",
        serde_json::json!({"bin_width": bin_width})
    );
    for (bin, count) in &hist {
        let _ = writeln!(hist_csv, "{bin},{count}");
    }

    let mut writer = StageWriter::new(&ctx.dir);
    writer.write("etymology.csv", &etym_csv)?;
    writer.write("baseline.csv", &baseline_csv)?;
    writer.write("mean_years.csv", &hist_csv)?;

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "etym",
        serde_json::json!({"bin_width": bin_width, "seed": seed, "trials": trials}),
        inputs,
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("components", dated.len());
    summary.push("dated_components", pairs.len());
    summary.push("included_words", pool.len());
    summary.push("sign_below", test.below);
    summary.push("sign_above", test.above);
    summary.push("sign_ties", test.ties);
    summary.push("sign_p", test.p_value);
    Ok(summary)
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// Comma-separated word list files for the overlap table
    #[arg(long)]
    pub word_lists: Option<String>,
}

pub fn cmd_report(ctx: &Ctx, args: &ReportArgs) -> Result<Summary> {
    let (g, mut inputs) = load_graph(ctx)?;
    let (core_ids, core_digest) = load_core(ctx, &g)?;
    inputs.insert(CORE_FILE.to_string(), core_digest);

    let mut writer = StageWriter::new(&ctx.dir);
    let bundled = [
        "convergence.csv",
        "loop_histogram.csv",
        "components.txt",
        "themes.txt",
        "mean_years.csv",
    ];
    for name in bundled {
        let text = read_input(&ctx.path(name))?;
        inputs.insert(name.to_string(), digest(text.as_bytes()));
        writer.write(&format!("report/{name}"), &text)?;
    }

    let lists_arg = ctx.cfg.resolve("word-lists", args.word_lists.clone())?;
    let mut overlap_note = "skipped: no word lists given".to_string();
    if let Some(lists_arg) = lists_arg {
        let mut lists = Vec::new();
        for path in lists_arg.split(',').filter(|p| !p.trim().is_empty()) {
            let path = PathBuf::from(path.trim());
            let text = read_input(&path)?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "list".to_string());
            inputs.insert(format!("word-list:{name}"), digest(text.as_bytes()));
            lists.push(parse_word_list_str(&text, &name).map_err(lift)?);
        }
        let core_words = WordList::new(
            "core",
            core_ids.iter().map(|&m| g.node(m).word().to_string()),
        )
        .map_err(lift)?;
        let table = wordlist_overlap(&core_words, &lists).map_err(lift)?;
        let mut overlap_csv = String::from("row,col,intersection,percent_of_col\n");
        for cell in &table.cells {
            let _ = writeln!(
                overlap_csv,
                "{},{},{},{}",
                table.names[cell.row], table.names[cell.col], cell.intersection, cell.percent_of_col
            );
        }
        writer.write("report/overlap.csv", &overlap_csv)?;
        writer.write("report/overlap.txt", &table.render_text())?;
        overlap_note = format!("{} lists", lists.len());
    }

    let mut manifest = Manifest::load(&ctx.dir)?;
    manifest.record_stage(
        "report",
        serde_json::json!({"word_lists": overlap_note}),
        inputs,
        writer.into_outputs(),
    );
    manifest.save()?;

    let mut summary = Summary::default();
    summary.push("bundled_files", bundled.len());
    summary.push("overlap", overlap_note);
    summary.push("output_dir", ctx.path("report").display());
    Ok(summary)
}
