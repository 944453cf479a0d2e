//! Clustering by iterative bridge deletion and hyper-tour generation.
//!
//! Bridges of the sparse heatmap graph are deleted until every remaining
//! component is bridge-free; components become supernodes at their member
//! centroids, and a small TSP over the supernodes yields the hyper tour that
//! guides initialization and search.

use std::collections::BTreeSet;

use crate::heatmap::SparseHeatmapGraph;
use crate::instance::{Instance, Point};
use crate::lk::{self, LkProblem};
use crate::tour::edge_key;
use crate::Result;

/// A partition of the vertices into 2-edge-connected groups (or singletons).
#[derive(Debug, Clone)]
pub struct Clustering {
    /// Vertex ids per cluster, each sorted ascending.
    pub clusters: Vec<Vec<usize>>,
    /// Arithmetic-mean coordinate of each cluster's members.
    pub supernode_coords: Vec<Point>,
    pub vertex_to_cluster: Vec<usize>,
    /// Bridge-deletion passes until the component count stabilized (I_1).
    pub iterations: usize,
}

impl Clustering {
    pub fn from_clusters(instance: &Instance, clusters: Vec<Vec<usize>>, iterations: usize) -> Self {
        let mut vertex_to_cluster = vec![usize::MAX; instance.n()];
        let mut coords = Vec::with_capacity(clusters.len());
        for (ci, cluster) in clusters.iter().enumerate() {
            let mut sx = 0.0;
            let mut sy = 0.0;
            for &v in cluster {
                vertex_to_cluster[v] = ci;
                sx += instance.point(v).x;
                sy += instance.point(v).y;
            }
            coords.push(Point::new(
                sx / cluster.len() as f64,
                sy / cluster.len() as f64,
            ));
        }
        Clustering {
            clusters,
            supernode_coords: coords,
            vertex_to_cluster,
            iterations,
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Cyclic visiting order over cluster indices.
#[derive(Debug, Clone)]
pub struct HyperTour {
    pub order: Vec<usize>,
}

/// Edges whose removal disconnects their component, via iterative low-link
/// DFS. The input adjacency must have no self-loops.
pub fn find_bridges(adj: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let n = adj.len();
    // Edge-indexed incidence so parallel edges are handled correctly.
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut inc: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (neighbor, edge id)
    for u in 0..n {
        for &v in &adj[u] {
            debug_assert_ne!(u, v, "self-loop");
            if u < v {
                let id = edges.len();
                edges.push((u, v));
                inc[u].push((v, id));
                inc[v].push((u, id));
            }
        }
    }

    let mut visit = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut clock = 0usize;
    let mut bridges = Vec::new();
    // stack frame: (vertex, incoming edge id, next incidence index)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();

    for root in 0..n {
        if visit[root] != usize::MAX {
            continue;
        }
        visit[root] = clock;
        low[root] = clock;
        clock += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(&mut (u, in_edge, ref mut idx)) = stack.last_mut() {
            if *idx < inc[u].len() {
                let (v, eid) = inc[u][*idx];
                *idx += 1;
                if eid == in_edge {
                    continue;
                }
                if visit[v] == usize::MAX {
                    visit[v] = clock;
                    low[v] = clock;
                    clock += 1;
                    stack.push((v, eid, 0));
                } else {
                    low[u] = low[u].min(visit[v]);
                }
            } else {
                stack.pop();
                if let Some(&mut (p, _, _)) = stack.last_mut() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > visit[p] {
                        bridges.push(edge_key(p, u));
                    }
                }
            }
        }
    }
    bridges.sort_unstable();
    bridges
}

fn connected_components(adj: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            comp.push(u);
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Iteratively delete bridges until the component count stabilizes; the
/// final components are the clusters.
pub fn cluster_by_bridge_deletion(graph: &SparseHeatmapGraph, instance: &Instance) -> Clustering {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); graph.n()];
    for (a, b, _) in graph.undirected_edges() {
        adj[a].insert(b);
        adj[b].insert(a);
    }

    let mut prev_count = None;
    let mut iterations = 0usize;
    let clusters = loop {
        let comps = connected_components(&adj);
        if prev_count == Some(comps.len()) {
            break comps;
        }
        prev_count = Some(comps.len());
        iterations += 1;
        let lists: Vec<Vec<usize>> = adj.iter().map(|s| s.iter().copied().collect()).collect();
        for (u, v) in find_bridges(&lists) {
            adj[u].remove(&v);
            adj[v].remove(&u);
        }
    };
    Clustering::from_clusters(instance, clusters, iterations)
}

/// One point per cluster at the member centroid.
pub fn build_reduced_instance(clustering: &Clustering) -> Result<Instance> {
    Instance::new_unchecked("reduced", clustering.supernode_coords.clone())
}

/// Solve the reduced instance: the unique order for up to 3 supernodes,
/// nearest-neighbor construction plus the LK kernel otherwise.
pub fn solve_hyper_tour(reduced: &Instance, seed: u64) -> Result<HyperTour> {
    let n = reduced.n();
    if n <= 3 {
        return Ok(HyperTour {
            order: (0..n).collect(),
        });
    }
    let problem = LkProblem::new(reduced.points().to_vec());
    let result = lk::lk_solve(&problem, lk::default_budget(n), seed)?;
    Ok(HyperTour { order: result.tour })
}

/// Degenerate-case guidance: when bridge deletion yields a single cluster
/// there is no meaningful hyper tour, so grid cells in Hilbert order of
/// their centroids stand in for the supernode ring.
pub fn hilbert_fallback(instance: &Instance, gamma: usize) -> (Clustering, HyperTour) {
    let grid = crate::heatmap::grid_partition(instance, gamma);
    let clustering = Clustering::from_clusters(instance, grid.cells, 0);

    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &clustering.supernode_coords {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    let span_x = (max_x - min_x).max(f64::MIN_POSITIVE);
    let span_y = (max_y - min_y).max(f64::MIN_POSITIVE);
    const SIDE: u32 = 1 << 15;
    let mut keyed: Vec<(u64, usize)> = clustering
        .supernode_coords
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let gx = (((p.x - min_x) / span_x) * (SIDE - 1) as f64) as u32;
            let gy = (((p.y - min_y) / span_y) * (SIDE - 1) as f64) as u32;
            (hilbert_index(SIDE, gx, gy), i)
        })
        .collect();
    keyed.sort_unstable();
    let order = keyed.into_iter().map(|(_, i)| i).collect();
    (clustering, HyperTour { order })
}

/// Map grid coordinates to the Hilbert-curve index for a `side`×`side` grid
/// (`side` a power of two).
fn hilbert_index(side: u32, mut x: u32, mut y: u32) -> u64 {
    let mut d: u64 = 0;
    let mut s = side / 2;
    while s > 0 {
        let rx = u32::from((x & s) > 0);
        let ry = u32::from((y & s) > 0);
        d += (s as u64) * (s as u64) * ((3 * rx) ^ ry) as u64;
        // rotate quadrant
        if ry == 0 {
            if rx == 1 {
                x = s.wrapping_sub(1).wrapping_sub(x) & (side - 1);
                y = s.wrapping_sub(1).wrapping_sub(y) & (side - 1);
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}
