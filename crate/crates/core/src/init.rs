//! Hyper-tour-guided tour initialization.
//!
//! The supernode ring is traversed in chunks of at least l_s vertices,
//! consecutive chunks sharing their boundary supernode. Each chunk is solved
//! as a fixed-endpoint path whose entry is the previous chunk's exit;
//! concatenating the chunk paths closes the cycle. Tour edges joining
//! different supernodes are recorded as worth-deletion edges.

use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::hypertour::{Clustering, HyperTour};
use crate::instance::{Instance, Point};
use crate::lk::{self, LkParams};
use crate::tour::Tour;
use crate::Result;

#[derive(Debug, Clone)]
pub struct InitResult {
    pub tour: Tour,
    /// Tour edges whose endpoints lie in different clusters.
    pub worth_deletion: HashSet<(usize, usize)>,
}

/// Walk the supernode ring from `start`, accumulating consecutive supernodes
/// until the member count exceeds `l_s`; the last supernode of a chunk is
/// shared as the first supernode of the next. Every chunk spans at least two
/// supernodes unless the walk runs out of ring.
pub fn chunk_supernodes(
    ht: &HyperTour,
    c: &Clustering,
    l_s: usize,
    start: usize,
) -> Vec<Vec<usize>> {
    let len = ht.order.len();
    let start_pos = ht
        .order
        .iter()
        .position(|&cl| cl == start)
        .expect("start cluster not in hyper tour");
    let ring: Vec<usize> = (0..len).map(|i| ht.order[(start_pos + i) % len]).collect();
    let size = |cl: usize| c.clusters[cl].len();

    let mut chunks = Vec::new();
    let mut i = 0usize;
    loop {
        let mut chunk = vec![ring[i]];
        let mut cum = size(ring[i]);
        let mut j = i + 1;
        while j < len && (cum <= l_s || chunk.len() < 2) {
            chunk.push(ring[j]);
            cum += size(ring[j]);
            j += 1;
        }
        chunks.push(chunk);
        if j >= len {
            break;
        }
        // the last traversed supernode becomes the next starting supernode
        i = j - 1;
    }
    chunks
}

/// Greedy nearest-neighbor cycle construction from `start`, using the
/// spatial index with an expanding query radius.
pub fn nearest_neighbor_tour(instance: &Instance, start: usize) -> Vec<usize> {
    let n = instance.n();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    order.push(start);
    visited[start] = true;
    let mut cur = start;
    for _ in 1..n {
        let mut m = 8;
        let next = loop {
            let mut found = None;
            for v in instance.knn(cur, m) {
                if !visited[v] {
                    found = Some(v);
                    break;
                }
            }
            if let Some(v) = found {
                break v;
            }
            if m >= n - 1 {
                // all neighbors visited (cannot happen while unvisited remain)
                break (0..n).find(|&v| !visited[v]).unwrap();
            }
            m *= 4;
        };
        order.push(next);
        visited[next] = true;
        cur = next;
    }
    order
}

/// Seeded random permutation (the `--init random` ablation).
pub fn random_order(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Tour edges crossing cluster boundaries.
pub fn worth_deletion_edges(tour: &Tour, c: &Clustering) -> HashSet<(usize, usize)> {
    tour.edges()
        .filter(|&(a, b)| c.vertex_to_cluster[a] != c.vertex_to_cluster[b])
        .collect()
}

/// Member of `members` nearest to `target` (ties to the lower id), skipping
/// `exclude` when another choice exists.
fn nearest_member(
    instance: &Instance,
    members: &[usize],
    target: Point,
    exclude: Option<usize>,
) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for &v in members {
        if Some(v) == exclude {
            continue;
        }
        let d = instance.point(v).dist(&target);
        let better = match best {
            None => true,
            Some((bd, bv)) => d < bd || (d == bd && v < bv),
        };
        if better {
            best = Some((d, v));
        }
    }
    match best {
        Some((_, v)) => v,
        None => exclude.expect("empty member list"),
    }
}

/// Build the initial tour along the hyper tour and collect worth-deletion
/// edges.
pub fn initialize_tour(
    instance: &Instance,
    ht: &HyperTour,
    c: &Clustering,
    l_s: usize,
    lk_params: &LkParams,
    seed: u64,
) -> Result<InitResult> {
    let n = instance.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chunks = chunk_supernodes(ht, c, l_s, ht.order[0]);

    // Shared boundary supernodes contribute their members to the earlier
    // chunk only; chunks left without any vertices of their own are skipped.
    let mut assigned = vec![false; n];
    let mut chunk_vertices: Vec<Vec<usize>> = Vec::new();
    let mut chunk_clusters: Vec<Vec<usize>> = Vec::new();
    for chunk in &chunks {
        let mut verts = Vec::new();
        for &cl in chunk {
            for &v in &c.clusters[cl] {
                if !assigned[v] {
                    assigned[v] = true;
                    verts.push(v);
                }
            }
        }
        if !verts.is_empty() {
            chunk_vertices.push(verts);
            chunk_clusters.push(chunk.clone());
        }
    }

    let start_cluster = ht.order[0];
    let start_centroid = c.supernode_coords[start_cluster];
    let entry0 = nearest_member(
        instance,
        &c.clusters[start_cluster],
        start_centroid,
        None,
    );

    let num = chunk_vertices.len();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut entry = entry0;
    for i in 0..num {
        let verts = &chunk_vertices[i];
        let clusters = &chunk_clusters[i];

        // exit target: the next chunk's second supernode centroid, or the
        // start supernode centroid when the ring wraps
        let target = if i + 1 < num {
            let next = &chunk_clusters[i + 1];
            let idx = if next.len() >= 2 { next[1] } else { next[0] };
            c.supernode_coords[idx]
        } else {
            start_centroid
        };
        let last_cluster = *clusters.last().unwrap();
        let exit_members: Vec<usize> = c.clusters[last_cluster]
            .iter()
            .copied()
            .filter(|&v| verts.contains(&v))
            .collect();
        let exit_pool: &[usize] = if exit_members.is_empty() {
            verts
        } else {
            &exit_members
        };
        let exit = nearest_member(instance, exit_pool, target, Some(entry));

        // assemble the chunk's point set: the entry vertex plus this chunk's
        // own vertices (for the first chunk the entry is already one of them)
        let mut ids: Vec<usize> = Vec::with_capacity(verts.len() + 1);
        ids.push(entry);
        for &v in verts {
            if v != entry {
                ids.push(v);
            }
        }

        if ids.len() == 1 {
            order.push(ids[0]);
            entry = ids[0];
            continue;
        }
        let points: Vec<Point> = ids.iter().map(|&v| instance.point(v)).collect();
        let local_exit = ids.iter().position(|&v| v == exit).unwrap();
        let path = lk::lk_path_solve(
            &points,
            0,
            local_exit,
            None,
            instance.tsplib_rounding(),
            lk_params,
            lk::default_budget(ids.len()),
            rng.random(),
        )?;
        // the entry vertex was emitted by the previous chunk (except for the
        // very first chunk, which owns it)
        let skip = usize::from(i > 0);
        for &local in &path[skip..] {
            order.push(ids[local]);
        }
        entry = exit;
    }

    let tour = Tour::new(order, instance)?;
    let worth_deletion = worth_deletion_edges(&tour, c);
    Ok(InitResult {
        tour,
        worth_deletion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::{build_sparse_heatmap, BuildOptions, DistanceHeatProvider};
    use crate::tour::edge_key;
    use crate::hypertour::{
        build_reduced_instance, cluster_by_bridge_deletion, solve_hyper_tour,
    };

    fn uniform_instance(n: usize, seed: u64) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        Instance::new(format!("u{n}"), pts).unwrap()
    }

    fn synthetic_clustering(inst: &Instance, sizes: &[usize]) -> Clustering {
        let mut clusters = Vec::new();
        let mut next = 0;
        for &s in sizes {
            clusters.push((next..next + s).collect());
            next += s;
        }
        assert_eq!(next, inst.n());
        Clustering::from_clusters(inst, clusters, 1)
    }

    #[test]
    fn chunk_threshold_arithmetic() {
        let inst = uniform_instance(140, 1);
        let c = synthetic_clustering(&inst, &[40, 50, 30, 20]);
        let ht = HyperTour { order: vec![0, 1, 2, 3] };
        let chunks = chunk_supernodes(&ht, &c, 100, 0);
        assert_eq!(chunks, vec![vec![0, 1, 2], vec![2, 3]]);
    }

    #[test]
    fn chunk_whole_ring_when_it_fits() {
        let inst = uniform_instance(120, 2);
        let c = synthetic_clustering(&inst, &[40, 50, 30]);
        let ht = HyperTour { order: vec![0, 1, 2] };
        let chunks = chunk_supernodes(&ht, &c, 100, 0);
        assert_eq!(chunks, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn chunk_single_cluster_degenerate() {
        let inst = uniform_instance(50, 3);
        let c = synthetic_clustering(&inst, &[50]);
        let ht = HyperTour { order: vec![0] };
        let chunks = chunk_supernodes(&ht, &c, 10, 0);
        assert_eq!(chunks, vec![vec![0]]);
    }

    #[test]
    fn chunk_singleton_ring_shares_boundaries() {
        let inst = uniform_instance(10, 4);
        let c = synthetic_clustering(&inst, &[1; 10]);
        let ht = HyperTour { order: (0..10).collect() };
        let chunks = chunk_supernodes(&ht, &c, 3, 0);
        assert_eq!(
            chunks,
            vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6], vec![6, 7, 8, 9]]
        );
        // every supernode appears in at least one chunk
        let mut seen = [false; 10];
        for ch in &chunks {
            for &s in ch {
                seen[s] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn two_separated_blobs_cross_exactly_twice() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = Vec::new();
        for _ in 0..10 {
            pts.push(Point::new(rng.random::<f64>(), rng.random::<f64>()));
        }
        for _ in 0..10 {
            pts.push(Point::new(50.0 + rng.random::<f64>(), rng.random::<f64>()));
        }
        let inst = Instance::new("blobs", pts).unwrap();
        let c = synthetic_clustering(&inst, &[10, 10]);
        let ht = HyperTour { order: vec![0, 1] };
        let r = initialize_tour(&inst, &ht, &c, 5, &LkParams::default(), 0).unwrap();
        r.tour.check_valid(20).unwrap();
        let crossings: Vec<_> = r
            .tour
            .edges()
            .filter(|&(a, b)| c.vertex_to_cluster[a] != c.vertex_to_cluster[b])
            .collect();
        assert_eq!(crossings.len(), 2);
        assert_eq!(r.worth_deletion.len(), 2);
        for e in crossings {
            assert!(r.worth_deletion.contains(&e));
        }
    }

    #[test]
    fn all_singletons_make_every_edge_worth_deletion() {
        let inst = uniform_instance(12, 6);
        let c = synthetic_clustering(&inst, &[1; 12]);
        let reduced = build_reduced_instance(&c).unwrap();
        let ht = solve_hyper_tour(&reduced, 0).unwrap();
        let r = initialize_tour(&inst, &ht, &c, 4, &LkParams::default(), 0).unwrap();
        r.tour.check_valid(12).unwrap();
        assert_eq!(r.worth_deletion.len(), 12);
    }

    #[test]
    fn worth_deletion_edges_match_cluster_crossings() {
        let inst = uniform_instance(60, 7);
        let c = synthetic_clustering(&inst, &[20, 25, 15]);
        let reduced = build_reduced_instance(&c).unwrap();
        let ht = solve_hyper_tour(&reduced, 1).unwrap();
        let r = initialize_tour(&inst, &ht, &c, 18, &LkParams::default(), 3).unwrap();
        r.tour.check_valid(60).unwrap();
        for (a, b) in r.tour.edges() {
            let crosses = c.vertex_to_cluster[a] != c.vertex_to_cluster[b];
            assert_eq!(r.worth_deletion.contains(&edge_key(a, b)), crosses);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let inst = uniform_instance(80, 8);
        let c = synthetic_clustering(&inst, &[30, 30, 20]);
        let reduced = build_reduced_instance(&c).unwrap();
        let ht = solve_hyper_tour(&reduced, 2).unwrap();
        let a = initialize_tour(&inst, &ht, &c, 25, &LkParams::default(), 9).unwrap();
        let b = initialize_tour(&inst, &ht, &c, 25, &LkParams::default(), 9).unwrap();
        assert_eq!(a.tour.order(), b.tour.order());
        assert_eq!(a.tour.length(), b.tour.length());
    }

    #[test]
    fn hyper_init_beats_nearest_neighbor_usually() {
        let mut wins = 0;
        let total = 20;
        for seed in 0..total {
            let inst = uniform_instance(200, 1000 + seed);
            let provider = DistanceHeatProvider { tau: 1.0 };
            let opts = BuildOptions {
                p: 30,
                gamma: 15,
                k: 2,
                k_cov: 10,
                seed,
                noise: None,
            };
            let (g, _) = build_sparse_heatmap(&inst, &provider, &opts);
            let c = cluster_by_bridge_deletion(&g, &inst);
            let (c, ht) = if c.len() == 1 {
                crate::hypertour::hilbert_fallback(&inst, 15)
            } else {
                let reduced = build_reduced_instance(&c).unwrap();
                let ht = solve_hyper_tour(&reduced, seed).unwrap();
                (c, ht)
            };
            let r = initialize_tour(&inst, &ht, &c, 100, &LkParams::default(), seed).unwrap();
            r.tour.check_valid(200).unwrap();
            let nn = nearest_neighbor_tour(&inst, 0);
            let nn_len = inst.cycle_length(&nn);
            if r.tour.length() <= nn_len {
                wins += 1;
            }
        }
        assert!(wins >= 18, "hyper init beat NN on only {wins}/{total} seeds");
    }

    #[test]
    fn nearest_neighbor_tour_is_permutation() {
        let inst = uniform_instance(150, 9);
        let order = nearest_neighbor_tour(&inst, 3);
        let t = Tour::new(order, &inst).unwrap();
        t.check_valid(150).unwrap();
    }
}
