//! Sparse heatmap graph construction.
//!
//! The instance is partitioned into grid cells, candidate sets (all vertex
//! pairs among a center's p nearest neighbors) are sampled to cover every
//! edge of the K_cov-nearest-neighbor universe, each candidate set is scored
//! by a pluggable heatmap provider, and the per-edge scores are averaged and
//! reduced to the k highest-heat edges per vertex.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::instance::Instance;
use crate::tour::edge_key;
use crate::{Error, Result};

pub type Edge = (usize, usize);

/// All vertex pairs among a center's p nearest neighbors (center included).
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub center: usize,
    /// Sorted ascending; contains the center; |members| = min(p, n).
    pub members: Vec<usize>,
}

impl CandidateSet {
    pub fn around(instance: &Instance, center: usize, p: usize) -> Self {
        let mut members = instance.knn(center, p.saturating_sub(1));
        members.push(center);
        members.sort_unstable();
        CandidateSet { center, members }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn covers(&self, e: Edge) -> bool {
        self.contains(e.0) && self.contains(e.1)
    }

    pub fn edge_count(&self) -> usize {
        self.members.len() * (self.members.len() - 1) / 2
    }

    /// All unordered member pairs.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let m = &self.members;
        (0..m.len()).flat_map(move |i| (i + 1..m.len()).map(move |j| (m[i], m[j])))
    }
}

/// Axis-aligned cells from recursive median splits, each holding at most
/// `capacity` vertices.
#[derive(Debug, Clone)]
pub struct GridPartition {
    pub cells: Vec<Vec<usize>>,
    pub capacity: usize,
}

/// Recursively bisect along the wider axis at the coordinate median until
/// every cell holds at most `gamma` vertices. Deterministic.
pub fn grid_partition(instance: &Instance, gamma: usize) -> GridPartition {
    let gamma = gamma.max(1);
    let mut cells = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![(0..instance.n()).collect()];
    while let Some(mut ids) = stack.pop() {
        if ids.len() <= gamma {
            cells.push(ids);
            continue;
        }
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &ids {
            let p = instance.point(v);
            min_x = min_x.min(p.x);
            max_x = max_x.max(p.x);
            min_y = min_y.min(p.y);
            max_y = max_y.max(p.y);
        }
        let split_x = (max_x - min_x) >= (max_y - min_y);
        if split_x {
            ids.sort_unstable_by(|&a, &b| {
                let (pa, pb) = (instance.point(a).x, instance.point(b).x);
                pa.partial_cmp(&pb).unwrap().then(a.cmp(&b))
            });
        } else {
            ids.sort_unstable_by(|&a, &b| {
                let (pa, pb) = (instance.point(a).y, instance.point(b).y);
                pa.partial_cmp(&pb).unwrap().then(a.cmp(&b))
            });
        }
        let mid = ids.len() / 2;
        let right = ids.split_off(mid);
        stack.push(right);
        stack.push(ids);
    }
    GridPartition { cells, capacity: gamma }
}

/// Edges of the symmetric K_cov-nearest-neighbor graph: the universe the
/// candidate-set cover must reach. Sorted, deduplicated.
pub fn knn_universe(instance: &Instance, k_cov: usize) -> Vec<Edge> {
    let mut set = BTreeSet::new();
    for v in 0..instance.n() {
        for u in instance.knn(v, k_cov) {
            set.insert(edge_key(v, u));
        }
    }
    set.into_iter().collect()
}

/// Sample candidate sets until every universe edge is covered.
///
/// Phase 1 seeds one set per grid cell (random member per cell); phase 2
/// greedily adds the set covering the most still-uncovered universe edges,
/// centered at a vertex incident to an uncovered edge. K_cov is clamped to
/// p-1 so that any uncovered edge can always be reached from one of its
/// endpoints.
pub fn cover_edges(
    instance: &Instance,
    p: usize,
    gamma: usize,
    k_cov: usize,
    seed: u64,
) -> Vec<CandidateSet> {
    let k_cov = effective_k_cov(p, k_cov);
    let universe = knn_universe(instance, k_cov);
    cover_edges_with_universe(instance, p, gamma, seed, &universe)
}

pub(crate) fn effective_k_cov(p: usize, k_cov: usize) -> usize {
    k_cov.min(p.saturating_sub(1)).max(1)
}

pub(crate) fn cover_edges_with_universe(
    instance: &Instance,
    p: usize,
    gamma: usize,
    seed: u64,
    universe: &[Edge],
) -> Vec<CandidateSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = grid_partition(instance, gamma);
    let mut sets: Vec<CandidateSet> = Vec::with_capacity(grid.cells.len());
    for cell in &grid.cells {
        let pick = cell[rng.random_range(0..cell.len())];
        sets.push(CandidateSet::around(instance, pick, p));
    }

    let mut uncovered: BTreeSet<Edge> = universe.iter().copied().collect();
    for set in &sets {
        uncovered.retain(|&e| !set.covers(e));
    }
    greedy_cover_additions(instance, p, &mut uncovered, &mut sets);
    sets
}

/// Phase 2: repeatedly add the candidate set covering the most uncovered
/// edges, centered at a vertex incident to one, ties to the lower center id.
pub(crate) fn greedy_cover_additions(
    instance: &Instance,
    p: usize,
    uncovered: &mut BTreeSet<Edge>,
    sets: &mut Vec<CandidateSet>,
) {
    let mut member_cache: HashMap<usize, CandidateSet> = HashMap::new();
    while !uncovered.is_empty() {
        let centers: BTreeSet<usize> = uncovered.iter().flat_map(|&(u, v)| [u, v]).collect();
        let mut best: Option<(usize, usize)> = None; // (count, center)
        for &c in &centers {
            let set = member_cache
                .entry(c)
                .or_insert_with(|| CandidateSet::around(instance, c, p));
            let count = uncovered.iter().filter(|&&e| set.covers(e)).count();
            let better = match best {
                None => true,
                Some((bc, _)) => count > bc,
            };
            if better {
                best = Some((count, c));
            }
        }
        let (count, center) = best.expect("uncovered edge with no incident vertex");
        debug_assert!(count > 0, "greedy cover stalled");
        let set = member_cache.remove(&center).unwrap();
        uncovered.retain(|&e| !set.covers(e));
        sets.push(set);
    }
}

/// Scores every edge of a candidate set with a heat in [0, 1].
pub trait HeatmapProvider {
    fn score(&self, subgraph: &CandidateSet, instance: &Instance) -> Vec<(Edge, f64)>;
}

/// Deterministic distance-derived heats: exp(-d / (tau * mean 1-NN distance
/// within the subgraph)).
#[derive(Debug, Clone)]
pub struct DistanceHeatProvider {
    pub tau: f64,
}

impl HeatmapProvider for DistanceHeatProvider {
    fn score(&self, subgraph: &CandidateSet, instance: &Instance) -> Vec<(Edge, f64)> {
        distance_heat(subgraph, instance, self.tau)
    }
}

/// heat(i,j) = exp(-d_ij / (tau * d̄)) where d̄ is the mean nearest-neighbor
/// distance within the subgraph, clipped to [0, 1].
pub fn distance_heat(subgraph: &CandidateSet, instance: &Instance, tau: f64) -> Vec<(Edge, f64)> {
    let m = &subgraph.members;
    if m.len() < 2 {
        return Vec::new();
    }
    let mut nn_sum = 0.0;
    for (i, &v) in m.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, &u) in m.iter().enumerate() {
            if i != j {
                best = best.min(instance.point(v).dist(&instance.point(u)));
            }
        }
        nn_sum += best;
    }
    let dbar = nn_sum / m.len() as f64;
    let scale = tau * dbar;
    subgraph
        .edges()
        .map(|(u, v)| {
            let d = instance.point(u).dist(&instance.point(v));
            let heat = if scale > 0.0 {
                (-d / scale).exp().clamp(0.0, 1.0)
            } else {
                1.0
            };
            (edge_key(u, v), heat)
        })
        .collect()
}

/// Per-vertex top-k candidate edges with merged heat values.
#[derive(Debug, Clone)]
pub struct SparseHeatmapGraph {
    n: usize,
    k: usize,
    topk: Vec<Vec<(usize, f64)>>,
}

impl SparseHeatmapGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The k (or fewer) selected entries for one vertex.
    pub fn vertex_entries(&self, v: usize) -> &[(usize, f64)] {
        &self.topk[v]
    }

    /// Undirected union of the per-vertex selections, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut map: HashMap<Edge, f64> = HashMap::new();
        for (v, entries) in self.topk.iter().enumerate() {
            for &(u, h) in entries {
                map.insert(edge_key(v, u), h);
            }
        }
        let mut out: Vec<(usize, usize, f64)> =
            map.into_iter().map(|((a, b), h)| (a, b, h)).collect();
        out.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        out
    }

    pub fn edge_count(&self) -> usize {
        self.undirected_edges().len()
    }

    /// Adjacency lists of the undirected union graph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (a, b, _) in self.undirected_edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    fn from_means(n: usize, k: usize, means: &HashMap<Edge, f64>) -> Self {
        let mut incident: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(a, b), &h) in means {
            incident[a].push((b, h));
            incident[b].push((a, h));
        }
        for list in &mut incident {
            // highest heat first, ties to the lower neighbor id
            list.sort_unstable_by(|x, y| {
                y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0))
            });
            list.truncate(k);
        }
        SparseHeatmapGraph { n, k, topk: incident }
    }
}

/// Average each edge over the sub-heatmaps containing it, then keep the k
/// highest-heat incident edges per vertex.
pub fn merge_topk(
    subheatmaps: &[Vec<(Edge, f64)>],
    instance: &Instance,
    k: usize,
) -> SparseHeatmapGraph {
    let mut acc: HashMap<Edge, (f64, u32)> = HashMap::new();
    for sub in subheatmaps {
        for &(e, h) in sub {
            let entry = acc.entry(e).or_insert((0.0, 0));
            entry.0 += h;
            entry.1 += 1;
        }
    }
    let means: HashMap<Edge, f64> = acc
        .into_iter()
        .map(|(e, (sum, cnt))| (e, sum / cnt as f64))
        .collect();
    SparseHeatmapGraph::from_means(instance.n(), k, &means)
}

/// Ingest an externally computed heatmap: one `i j heat` triplet per line,
/// 0-based ids, heat in [0, 1]. Duplicate edges are averaged before top-k.
pub fn load_heatmap_file(
    path: impl AsRef<Path>,
    instance: &Instance,
    k: usize,
) -> Result<SparseHeatmapGraph> {
    let file = std::fs::File::open(path.as_ref())?;
    load_heatmap(BufReader::new(file), instance, k)
}

pub fn load_heatmap(
    reader: impl BufRead,
    instance: &Instance,
    k: usize,
) -> Result<SparseHeatmapGraph> {
    let n = instance.n();
    let mut triplets: Vec<(Edge, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::HeatmapParse {
                line: lineno,
                msg: format!("expected 'i j heat', got {} fields", toks.len()),
            });
        }
        let parse_id = |s: &str| -> Result<usize> {
            s.parse().map_err(|e| Error::HeatmapParse {
                line: lineno,
                msg: format!("bad vertex id {s:?}: {e}"),
            })
        };
        let i = parse_id(toks[0])?;
        let j = parse_id(toks[1])?;
        let heat: f64 = toks[2].parse().map_err(|e| Error::HeatmapParse {
            line: lineno,
            msg: format!("bad heat {:?}: {e}", toks[2]),
        })?;
        if i >= n || j >= n {
            return Err(Error::VertexOutOfRange { id: i.max(j), n });
        }
        if i == j {
            return Err(Error::HeatmapParse {
                line: lineno,
                msg: format!("self-loop on vertex {i}"),
            });
        }
        if !(0.0..=1.0).contains(&heat) {
            return Err(Error::HeatmapParse {
                line: lineno,
                msg: format!("heat {heat} outside [0, 1]"),
            });
        }
        triplets.push((edge_key(i, j), heat));
    }
    if triplets.is_empty() {
        return Err(Error::EmptyHeatmap);
    }
    Ok(merge_topk(&[triplets], instance, k))
}

/// Tracks concurrently live edge-heat entries through the build.
#[derive(Debug, Clone, Default)]
pub struct HeatmapMeter {
    live: usize,
    pub peak: usize,
}

impl HeatmapMeter {
    fn alloc(&mut self, entries: usize) {
        self.live += entries;
        self.peak = self.peak.max(self.live);
    }

    fn free(&mut self, entries: usize) {
        self.live -= entries;
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub p: usize,
    pub gamma: usize,
    pub k: usize,
    pub k_cov: usize,
    pub seed: u64,
    /// Uniform noise magnitude injected into merged heats before top-k,
    /// with its own seed.
    pub noise: Option<(f64, u64)>,
}

#[derive(Debug, Clone)]
pub struct HeatmapStats {
    pub candidate_sets: usize,
    pub universe_edges: usize,
    pub peak_live_entries: usize,
}

/// Full heatmap stage: cover, score one candidate set at a time, fold into a
/// universe-bounded accumulator, then top-k.
///
/// Sub-heatmaps are folded one at a time and the accumulator only holds
/// universe edges, keeping concurrently live entries within
/// O(K_cov·n + p² + k·n).
pub fn build_sparse_heatmap(
    instance: &Instance,
    provider: &dyn HeatmapProvider,
    opts: &BuildOptions,
) -> (SparseHeatmapGraph, HeatmapStats) {
    let k_cov = effective_k_cov(opts.p, opts.k_cov);
    let universe = knn_universe(instance, k_cov);
    let sets = cover_edges_with_universe(instance, opts.p, opts.gamma, opts.seed, &universe);

    let mut meter = HeatmapMeter::default();
    let mut acc: HashMap<Edge, (f64, u32)> = HashMap::with_capacity(universe.len());
    for &e in &universe {
        acc.insert(e, (0.0, 0));
    }
    meter.alloc(acc.len());

    for set in &sets {
        let sub = provider.score(set, instance);
        meter.alloc(sub.len());
        for (e, h) in &sub {
            if let Some(entry) = acc.get_mut(e) {
                entry.0 += h;
                entry.1 += 1;
            }
        }
        meter.free(sub.len());
    }

    let mut means: HashMap<Edge, f64> = acc
        .iter()
        .filter(|(_, &(_, cnt))| cnt > 0)
        .map(|(&e, &(sum, cnt))| (e, sum / cnt as f64))
        .collect();

    if let Some((level, noise_seed)) = opts.noise {
        if level > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let mut keys: Vec<Edge> = means.keys().copied().collect();
            keys.sort_unstable();
            for e in keys {
                let delta = rng.random_range(-level..=level);
                let h = means.get_mut(&e).unwrap();
                *h = (*h + delta).clamp(0.0, 1.0);
            }
        }
    }

    let graph = SparseHeatmapGraph::from_means(instance.n(), opts.k, &means);
    let out_entries: usize = graph.topk.iter().map(Vec::len).sum();
    meter.alloc(out_entries);
    meter.free(acc.len());

    let stats = HeatmapStats {
        candidate_sets: sets.len(),
        universe_edges: universe.len(),
        peak_live_entries: meter.peak,
    };
    (graph, stats)
}
