//! Lin–Kernighan local-search kernel over small point sets.
//!
//! The engine runs variable-depth sequential edge exchanges restricted to
//! nearest-neighbor candidate lists, augmented with Or-opt segment moves and
//! plain 2-opt, with don't-look bits. Edges marked fixed are never removed,
//! which lets one engine serve cycle problems, fixed-endpoint path problems
//! (via a zero-length virtual edge) and segment-compressed subproblems.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::instance::Point;
use crate::{Error, Result};

/// Maximum size accepted by [`held_karp_exact`].
pub const HELD_KARP_MAX: usize = 15;

/// Tuning knobs for the search.
#[derive(Debug, Clone)]
pub struct LkParams {
    /// Candidate list size per vertex.
    pub cand_size: usize,
    /// Maximum number of removed edges in one sequential move.
    pub depth_max: usize,
    /// Minimum accepted gain; below this a move is treated as noise.
    pub gain_eps: f64,
}

impl Default for LkParams {
    fn default() -> Self {
        LkParams {
            cand_size: 8,
            depth_max: 5,
            gain_eps: 1e-12,
        }
    }
}

/// Default move budget for a problem of `n` points.
pub fn default_budget(n: usize) -> usize {
    50 * n.max(1)
}

/// A local search problem over its own point set.
///
/// `global_ids` carries the caller's vertex ids positionally; the engine
/// itself works purely in local ids `0..points.len()`.
#[derive(Debug, Clone)]
pub struct LkProblem {
    pub points: Vec<Point>,
    pub global_ids: Vec<usize>,
    /// Edges that must appear in every solution and may never be removed.
    /// Must form vertex-disjoint simple paths (never a full cycle).
    pub fixed_edges: Vec<(usize, usize)>,
    /// Optional initial cycle; must contain every fixed edge.
    pub start_tour: Option<Vec<usize>>,
    /// Pair priced at distance zero (the path-mode virtual edge).
    pub zero_edge: Option<(usize, usize)>,
    /// Price distances with TSPLIB integer rounding.
    pub rounded: bool,
    pub params: LkParams,
}

impl LkProblem {
    pub fn new(points: Vec<Point>) -> Self {
        let global_ids = (0..points.len()).collect();
        LkProblem {
            points,
            global_ids,
            fixed_edges: Vec::new(),
            start_tour: None,
            zero_edge: None,
            rounded: false,
            params: LkParams::default(),
        }
    }

    pub fn with_global_ids(mut self, ids: Vec<usize>) -> Self {
        debug_assert_eq!(ids.len(), self.points.len());
        self.global_ids = ids;
        self
    }
}

#[derive(Debug, Clone)]
pub struct LkResult {
    /// Cycle over local ids.
    pub tour: Vec<usize>,
    /// Cycle length under the problem's metric (virtual edge counts as 0).
    pub length: f64,
    pub moves_applied: usize,
}

/// Run the search to a local optimum or until `budget` accepted moves.
pub fn lk_solve(problem: &LkProblem, budget: usize, seed: u64) -> Result<LkResult> {
    let n = problem.points.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n, 3));
    }
    let mut engine = Engine::new(problem)?;
    if n == 3 {
        return Ok(LkResult {
            tour: engine.order.clone(),
            length: engine.length,
            moves_applied: 0,
        });
    }
    engine.run(budget, seed);
    Ok(LkResult {
        tour: engine.order.clone(),
        length: engine.length,
        moves_applied: engine.moves,
    })
}

/// Solve a fixed-endpoint Hamiltonian path by closing it with a fixed
/// zero-length virtual edge `(exit, entry)` and running the cycle engine.
///
/// Returns a permutation of `0..points.len()` starting at `entry` and ending
/// at `exit`. When `start` is given it is used as the initial path (and the
/// result is never longer); otherwise a nearest-neighbor path seeds the
/// search.
pub fn lk_path_solve(
    points: &[Point],
    entry: usize,
    exit: usize,
    start: Option<&[usize]>,
    rounded: bool,
    params: &LkParams,
    budget: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n, 2));
    }
    if entry == exit {
        return Err(Error::InvalidTour("path entry equals exit".to_string()));
    }
    if n == 2 {
        return Ok(vec![entry, exit]);
    }

    let start_cycle: Vec<usize> = match start {
        Some(path) => {
            debug_assert_eq!(path[0], entry);
            debug_assert_eq!(path[n - 1], exit);
            path.to_vec()
        }
        None => nn_path(points, entry, exit, rounded),
    };

    let mut p = LkProblem::new(points.to_vec());
    p.fixed_edges = vec![(exit, entry)];
    p.zero_edge = Some((exit, entry));
    p.start_tour = Some(start_cycle);
    p.rounded = rounded;
    p.params = params.clone();

    let result = lk_solve(&p, budget, seed)?;

    // Rotate/flip the cycle so it reads entry..exit with the virtual edge
    // as the closing edge.
    let pos_entry = result.tour.iter().position(|&v| v == entry).unwrap();
    let mut path: Vec<usize> = (0..n).map(|i| result.tour[(pos_entry + i) % n]).collect();
    if path[n - 1] != exit {
        debug_assert_eq!(path[1], exit);
        path[1..].reverse();
    }
    debug_assert_eq!(path[n - 1], exit);
    Ok(path)
}

/// Nearest-neighbor path from `entry`, saving `exit` for last.
fn nn_path(points: &[Point], entry: usize, exit: usize, rounded: bool) -> Vec<usize> {
    let n = points.len();
    let d = |a: usize, b: usize| price(points[a].dist(&points[b]), rounded);
    let mut visited = vec![false; n];
    let mut path = Vec::with_capacity(n);
    path.push(entry);
    visited[entry] = true;
    visited[exit] = true;
    let mut cur = entry;
    for _ in 0..n.saturating_sub(2) {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for v in 0..n {
            if !visited[v] {
                let dv = d(cur, v);
                if dv < best_d {
                    best_d = dv;
                    best = v;
                }
            }
        }
        path.push(best);
        visited[best] = true;
        cur = best;
    }
    path.push(exit);
    path
}

#[inline]
fn price(d: f64, rounded: bool) -> f64 {
    if rounded {
        (d + 0.5).floor()
    } else {
        d
    }
}

/// Exact optimum by bitmask dynamic programming. Test-oracle grade; limited
/// to [`HELD_KARP_MAX`] points.
pub fn held_karp_exact(points: &[Point]) -> Result<(Vec<usize>, f64)> {
    let n = points.len();
    if n > HELD_KARP_MAX {
        return Err(Error::ExactSolverTooLarge {
            n,
            max: HELD_KARP_MAX,
        });
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if n == 1 {
        return Ok((vec![0], 0.0));
    }
    let d = |a: usize, b: usize| points[a].dist(&points[b]);
    if n == 2 {
        return Ok((vec![0, 1], 2.0 * d(0, 1)));
    }

    // Paths start at vertex 0; dp[mask][j] = shortest path over {0} ∪ mask
    // ending at vertex j+1, with mask over vertices 1..n.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut dp = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![usize::MAX; (full + 1) * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = d(0, j + 1);
    }
    for mask in 1..=full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * m + j];
            if !cur.is_finite() {
                continue;
            }
            let rest = full & !mask;
            let mut bits = rest;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let next_mask = mask | (1 << k);
                let cand = cur + d(j + 1, k + 1);
                if cand < dp[next_mask * m + k] {
                    dp[next_mask * m + k] = cand;
                    parent[next_mask * m + k] = j;
                }
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut best_j = 0;
    for j in 0..m {
        let total = dp[full * m + j] + d(j + 1, 0);
        if total < best {
            best = total;
            best_j = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    let mut j = best_j;
    while j != usize::MAX {
        order.push(j + 1);
        let pj = parent[mask * m + j];
        mask &= !(1 << j);
        j = pj;
    }
    order.push(0);
    order.reverse();
    Ok((order, best))
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

const NO_VERTEX: usize = usize::MAX;
// Breadth schedule per chain level; level 0 is unused.
const CHAIN_BREADTH: [usize; 6] = [0, 8, 5, 4, 3, 3];

struct Engine<'a> {
    problem: &'a LkProblem,
    n: usize,
    order: Vec<usize>,
    pos: Vec<usize>,
    length: f64,
    cand: Vec<Vec<usize>>,
    fixed_nb: Vec<[usize; 2]>,
    moves: usize,
}

impl<'a> Engine<'a> {
    fn new(problem: &'a LkProblem) -> Result<Self> {
        let n = problem.points.len();
        let fixed_nb = validate_fixed(n, &problem.fixed_edges)?;

        let order = match &problem.start_tour {
            Some(t) => {
                validate_start(n, t, &fixed_nb)?;
                t.clone()
            }
            None => construct_start(problem, &fixed_nb),
        };
        let mut pos = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }

        let mut engine = Engine {
            problem,
            n,
            order,
            pos,
            length: 0.0,
            cand: Vec::new(),
            fixed_nb,
            moves: 0,
        };
        engine.length = (0..n)
            .map(|i| engine.dist(engine.order[i], engine.order[(i + 1) % n]))
            .sum();
        engine.cand = engine.build_candidates();
        Ok(engine)
    }

    #[inline]
    fn dist(&self, a: usize, b: usize) -> f64 {
        if let Some((x, y)) = self.problem.zero_edge {
            if (a == x && b == y) || (a == y && b == x) {
                return 0.0;
            }
        }
        price(
            self.problem.points[a].dist(&self.problem.points[b]),
            self.problem.rounded,
        )
    }

    #[inline]
    fn is_fixed(&self, a: usize, b: usize) -> bool {
        self.fixed_nb[a][0] == b || self.fixed_nb[a][1] == b
    }

    #[inline]
    fn succ(&self, v: usize) -> usize {
        let i = self.pos[v];
        self.order[if i + 1 == self.n { 0 } else { i + 1 }]
    }

    #[inline]
    fn pred(&self, v: usize) -> usize {
        let i = self.pos[v];
        self.order[if i == 0 { self.n - 1 } else { i - 1 }]
    }

    fn build_candidates(&self) -> Vec<Vec<usize>> {
        let c = self.problem.params.cand_size.min(self.n - 1);
        let mut lists = Vec::with_capacity(self.n);
        let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(self.n - 1);
        for v in 0..self.n {
            scratch.clear();
            for u in 0..self.n {
                if u != v {
                    scratch.push((self.dist(v, u), u));
                }
            }
            scratch.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            lists.push(scratch.iter().take(c).map(|&(_, u)| u).collect());
        }
        lists
    }

    fn run(&mut self, budget: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut initial: Vec<usize> = (0..self.n).collect();
        initial.shuffle(&mut rng);

        let mut queue: std::collections::VecDeque<usize> = initial.into();
        let mut queued = vec![true; self.n];

        while let Some(t1) = queue.pop_front() {
            queued[t1] = false;
            if self.moves >= budget {
                break;
            }
            if let Some(touched) = self.improve_from(t1) {
                self.moves += 1;
                for v in touched {
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
                if !queued[t1] {
                    queued[t1] = true;
                    queue.push_back(t1);
                }
            }
        }
    }

    /// Try move generators in order, applying the first improvement found.
    /// Returns the vertices touched by the applied move.
    fn improve_from(&mut self, t1: usize) -> Option<Vec<usize>> {
        if let Some(t) = self.two_opt_from(t1) {
            return Some(t);
        }
        if let Some(t) = self.or_opt_from(t1) {
            return Some(t);
        }
        if let Some(t) = self.chain_from(t1) {
            return Some(t);
        }
        None
    }

    fn two_opt_from(&mut self, t1: usize) -> Option<Vec<usize>> {
        let eps = self.problem.params.gain_eps;
        for forward in [true, false] {
            let t2 = if forward { self.succ(t1) } else { self.pred(t1) };
            if self.is_fixed(t1, t2) {
                continue;
            }
            let d12 = self.dist(t1, t2);
            for c in 0..self.cand[t1].len() {
                let t3 = self.cand[t1][c];
                let d13 = self.dist(t1, t3);
                if d13 >= d12 {
                    break;
                }
                if t3 == t2 {
                    continue;
                }
                let t4 = if forward { self.succ(t3) } else { self.pred(t3) };
                if t4 == t1 || self.is_fixed(t3, t4) {
                    continue;
                }
                let gain = d12 + self.dist(t3, t4) - d13 - self.dist(t2, t4);
                if gain > eps {
                    let removed = [(t1, t2), (t3, t4)];
                    let added = [(t1, t3), (t2, t4)];
                    if self.try_apply(&removed, &added, gain) {
                        return Some(vec![t1, t2, t3, t4]);
                    }
                }
            }
        }
        None
    }

    fn or_opt_from(&mut self, t1: usize) -> Option<Vec<usize>> {
        let eps = self.problem.params.gain_eps;
        let mut seg = Vec::with_capacity(3);
        seg.push(t1);
        for seg_len in 1..=3usize {
            if seg_len > 1 {
                let last = *seg.last().unwrap();
                seg.push(self.succ(last));
            }
            if self.n < seg_len + 3 {
                break;
            }
            let first = seg[0];
            let last = *seg.last().unwrap();
            let prev_v = self.pred(first);
            let next_v = self.succ(last);
            if seg.contains(&prev_v) || seg.contains(&next_v) || prev_v == next_v {
                break;
            }
            if self.is_fixed(prev_v, first) || self.is_fixed(last, next_v) {
                continue;
            }
            let gap_gain =
                self.dist(prev_v, first) + self.dist(last, next_v) - self.dist(prev_v, next_v);
            if gap_gain <= eps {
                continue;
            }
            for side in 0..2 {
                let anchor = if side == 0 { first } else { last };
                for c in 0..self.cand[anchor].len() {
                    let ins = self.cand[anchor][c];
                    if seg.contains(&ins) || ins == prev_v {
                        continue;
                    }
                    let ins2 = self.succ(ins);
                    if seg.contains(&ins2) || self.is_fixed(ins, ins2) {
                        continue;
                    }
                    let d_open = self.dist(ins, ins2);
                    // forward: ins -> first .. last -> ins2
                    let g_fwd =
                        gap_gain + d_open - self.dist(ins, first) - self.dist(last, ins2);
                    // backward: ins -> last .. first -> ins2
                    let g_bwd =
                        gap_gain + d_open - self.dist(ins, last) - self.dist(first, ins2);
                    for (gain, a1, a2) in [(g_fwd, first, last), (g_bwd, last, first)] {
                        if gain > eps {
                            let removed = [(prev_v, first), (last, next_v), (ins, ins2)];
                            let added = [(prev_v, next_v), (ins, a1), (a2, ins2)];
                            if self.try_apply(&removed, &added, gain) {
                                return Some(vec![prev_v, first, last, next_v, ins, ins2]);
                            }
                        }
                    }
                }
            }
        }
        None
    }

    fn chain_from(&mut self, t1: usize) -> Option<Vec<usize>> {
        for forward in [true, false] {
            let t2 = if forward { self.succ(t1) } else { self.pred(t1) };
            if self.is_fixed(t1, t2) {
                continue;
            }
            let mut removed = vec![(t1, t2)];
            let mut added = Vec::with_capacity(self.problem.params.depth_max + 1);
            let g0 = self.dist(t1, t2);
            if let Some(touched) = self.chain_step(t1, t2, g0, &mut removed, &mut added, 1) {
                return Some(touched);
            }
        }
        None
    }

    /// One level of the sequential move: from `last`, add an edge to a
    /// candidate `t3`, remove one of `t3`'s tour edges, then either close
    /// back to `t1` or deepen.
    fn chain_step(
        &mut self,
        t1: usize,
        last: usize,
        partial_gain: f64,
        removed: &mut Vec<(usize, usize)>,
        added: &mut Vec<(usize, usize)>,
        level: usize,
    ) -> Option<Vec<usize>> {
        let eps = self.problem.params.gain_eps;
        let depth_max = self.problem.params.depth_max;
        let breadth = CHAIN_BREADTH[level.min(CHAIN_BREADTH.len() - 1)];
        let mut tried = 0usize;

        for c in 0..self.cand[last].len() {
            if tried >= breadth {
                break;
            }
            let t3 = self.cand[last][c];
            let g1 = partial_gain - self.dist(last, t3);
            if g1 <= eps {
                break; // candidates sorted by distance: no later one helps
            }
            if t3 == t1 || t3 == self.succ(last) || t3 == self.pred(last) {
                continue;
            }
            let y = (last, t3);
            if edge_in(&y, removed) || edge_in(&y, added) {
                continue;
            }
            tried += 1;
            for t4 in [self.succ(t3), self.pred(t3)] {
                let x = (t3, t4);
                if t4 == t1 || self.is_fixed(t3, t4) || edge_in(&x, removed) || edge_in(&x, added)
                {
                    continue;
                }
                let after_remove = g1 + self.dist(t3, t4);

                // attempt to close the chain: add (t4, t1)
                let close_gain = after_remove - self.dist(t4, t1);
                if close_gain > eps && removed.len() + 1 <= depth_max {
                    let close = (t4, t1);
                    let closes_tour_edge = self.succ(t4) == t1 || self.pred(t4) == t1;
                    if !closes_tour_edge && !edge_in(&close, removed) && !edge_in(&close, added) {
                        removed.push(x);
                        added.push(y);
                        added.push(close);
                        let ok = self.try_apply(removed, added, close_gain);
                        if ok {
                            let mut touched: Vec<usize> = Vec::new();
                            for &(a, b) in removed.iter().chain(added.iter()) {
                                touched.push(a);
                                touched.push(b);
                            }
                            return Some(touched);
                        }
                        added.pop();
                        added.pop();
                        removed.pop();
                    }
                }

                if removed.len() + 1 < depth_max {
                    removed.push(x);
                    added.push(y);
                    if let Some(t) =
                        self.chain_step(t1, t4, after_remove, removed, added, level + 1)
                    {
                        return Some(t);
                    }
                    added.pop();
                    removed.pop();
                }
            }
        }
        None
    }

    /// Validate that replacing `removed` with `added` yields one Hamiltonian
    /// cycle; if so apply it and book the gain. Returns false when the
    /// reconnection is not a single cycle.
    fn try_apply(&mut self, removed: &[(usize, usize)], added: &[(usize, usize)], gain: f64) -> bool {
        let Some((bounds, plan)) = self.reconnection_plan(removed, added) else {
            return false;
        };
        let mut new_order = Vec::with_capacity(self.n);
        for &(seg, fwd) in &plan {
            let (start, end) = (bounds[seg].0, bounds[seg].1);
            if fwd {
                let mut p = start;
                loop {
                    new_order.push(self.order[p]);
                    if p == end {
                        break;
                    }
                    p = (p + 1) % self.n;
                }
            } else {
                let mut p = end;
                loop {
                    new_order.push(self.order[p]);
                    if p == start {
                        break;
                    }
                    p = (p + self.n - 1) % self.n;
                }
            }
        }
        debug_assert_eq!(new_order.len(), self.n);
        for (i, &v) in new_order.iter().enumerate() {
            self.pos[v] = i;
        }
        self.order = new_order;
        self.length -= gain;
        true
    }

    /// Compute the segment traversal plan for an edge exchange, or None if
    /// the exchange does not reconnect into a single cycle.
    #[allow(clippy::type_complexity)]
    fn reconnection_plan(
        &self,
        removed: &[(usize, usize)],
        added: &[(usize, usize)],
    ) -> Option<(Vec<(usize, usize)>, Vec<(usize, bool)>)> {
        let h = removed.len();
        if added.len() != h {
            return None;
        }

        // Map removed edges to cut positions: cut b severs order[b]..order[b+1].
        let mut cuts: Vec<usize> = Vec::with_capacity(h);
        for &(u, v) in removed {
            let pu = self.pos[u];
            let pv = self.pos[v];
            let b = if (pu + 1) % self.n == pv {
                pu
            } else if (pv + 1) % self.n == pu {
                pv
            } else {
                return None; // not a current tour edge
            };
            if cuts.contains(&b) {
                return None;
            }
            cuts.push(b);
        }
        cuts.sort_unstable();

        // Added edges must be new and distinct.
        for (i, &(u, v)) in added.iter().enumerate() {
            if u == v {
                return None;
            }
            for &(x, y) in &added[i + 1..] {
                if (u == x && v == y) || (u == y && v == x) {
                    return None;
                }
            }
        }

        // Segment i spans positions (cuts[i]+1 ..= cuts[(i+1)%h]).
        let mut bounds = Vec::with_capacity(h);
        let mut heads = Vec::with_capacity(h);
        let mut tails = Vec::with_capacity(h);
        for i in 0..h {
            let start = (cuts[i] + 1) % self.n;
            let end = cuts[(i + 1) % h];
            bounds.push((start, end));
            heads.push(self.order[start]);
            tails.push(self.order[end]);
        }

        let mut plan = Vec::with_capacity(h);
        plan.push((0usize, true));
        let mut seg_used = vec![false; h];
        seg_used[0] = true;
        let mut edge_used = vec![false; h];
        if self.walk_segments(
            tails[0],
            &heads,
            &tails,
            added,
            &mut seg_used,
            &mut edge_used,
            &mut plan,
        ) {
            Some((bounds, plan))
        } else {
            None
        }
    }

    /// Depth-first traversal of the segment graph. Branching only occurs at
    /// single-vertex segments (a vertex carrying two added-edge slots).
    #[allow(clippy::too_many_arguments)]
    fn walk_segments(
        &self,
        cur: usize,
        heads: &[usize],
        tails: &[usize],
        added: &[(usize, usize)],
        seg_used: &mut [bool],
        edge_used: &mut [bool],
        plan: &mut Vec<(usize, bool)>,
    ) -> bool {
        let h = heads.len();
        if plan.len() == h {
            // The one remaining edge must close back to the start segment head.
            for (e, &(u, v)) in added.iter().enumerate() {
                if !edge_used[e] && ((u == cur && v == heads[0]) || (v == cur && u == heads[0])) {
                    return true;
                }
            }
            return false;
        }
        for e in 0..h {
            if edge_used[e] {
                continue;
            }
            let (u, v) = added[e];
            let w = if u == cur {
                v
            } else if v == cur {
                u
            } else {
                continue;
            };
            for s in 0..h {
                if seg_used[s] {
                    continue;
                }
                let (entered_fwd, next_cur) = if heads[s] == w {
                    (true, tails[s])
                } else if tails[s] == w {
                    (false, heads[s])
                } else {
                    continue;
                };
                edge_used[e] = true;
                seg_used[s] = true;
                plan.push((s, entered_fwd));
                if self.walk_segments(next_cur, heads, tails, added, seg_used, edge_used, plan) {
                    return true;
                }
                plan.pop();
                seg_used[s] = false;
                edge_used[e] = false;
            }
        }
        false
    }
}

#[inline]
fn edge_in(e: &(usize, usize), list: &[(usize, usize)]) -> bool {
    list.iter()
        .any(|&(a, b)| (a == e.0 && b == e.1) || (a == e.1 && b == e.0))
}

/// Check degrees and acyclicity of the fixed-edge set; returns per-vertex
/// fixed neighbors.
fn validate_fixed(n: usize, fixed: &[(usize, usize)]) -> Result<Vec<[usize; 2]>> {
    let mut nb = vec![[NO_VERTEX; 2]; n];
    let mut uf: Vec<usize> = (0..n).collect();
    fn find(uf: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        let mut c = x;
        while uf[c] != r {
            let nxt = uf[c];
            uf[c] = r;
            c = nxt;
        }
        r
    }
    for &(a, b) in fixed {
        if a == b || a >= n || b >= n {
            return Err(Error::InfeasibleFixedEdges(format!(
                "bad edge ({a}, {b}) for n={n}"
            )));
        }
        if nb[a].contains(&b) {
            return Err(Error::InfeasibleFixedEdges(format!(
                "duplicate edge ({a}, {b})"
            )));
        }
        for v in [a, b] {
            if nb[v][0] != NO_VERTEX && nb[v][1] != NO_VERTEX {
                return Err(Error::InfeasibleFixedEdges(format!(
                    "vertex {v} has fixed degree > 2"
                )));
            }
        }
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra == rb {
            return Err(Error::InfeasibleFixedEdges(format!(
                "edge ({a}, {b}) closes a fixed cycle"
            )));
        }
        uf[ra] = rb;
        let slot_a = if nb[a][0] == NO_VERTEX { 0 } else { 1 };
        nb[a][slot_a] = b;
        let slot_b = if nb[b][0] == NO_VERTEX { 0 } else { 1 };
        nb[b][slot_b] = a;
    }
    Ok(nb)
}

fn validate_start(n: usize, tour: &[usize], fixed_nb: &[[usize; 2]]) -> Result<()> {
    if tour.len() != n {
        return Err(Error::InvalidTour(format!(
            "start tour has {} of {n} vertices",
            tour.len()
        )));
    }
    let mut pos = vec![NO_VERTEX; n];
    for (i, &v) in tour.iter().enumerate() {
        if v >= n || pos[v] != NO_VERTEX {
            return Err(Error::InvalidTour(format!(
                "start tour repeats or exceeds range at {v}"
            )));
        }
        pos[v] = i;
    }
    for v in 0..n {
        for &nbv in &fixed_nb[v] {
            if nbv == NO_VERTEX {
                continue;
            }
            let i = pos[v];
            let s = tour[(i + 1) % n];
            let p = tour[(i + n - 1) % n];
            if s != nbv && p != nbv {
                return Err(Error::InvalidTour(format!(
                    "start tour missing fixed edge ({v}, {nbv})"
                )));
            }
        }
    }
    Ok(())
}

/// Nearest-neighbor start respecting fixed paths: each fixed chain moves as
/// a block; free vertices are blocks of one.
fn construct_start(problem: &LkProblem, fixed_nb: &[[usize; 2]]) -> Vec<usize> {
    let n = problem.points.len();
    let deg = |v: usize| fixed_nb[v].iter().filter(|&&x| x != NO_VERTEX).count();
    let mut unit_of = vec![NO_VERTEX; n];
    let mut units: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        if unit_of[v] != NO_VERTEX || deg(v) == 2 {
            continue;
        }
        // walk the chain starting at an endpoint (or a free vertex)
        let mut chain = vec![v];
        unit_of[v] = units.len();
        let mut prev = NO_VERTEX;
        let mut cur = v;
        loop {
            let next = fixed_nb[cur]
                .iter()
                .copied()
                .find(|&x| x != NO_VERTEX && x != prev);
            match next {
                Some(x) => {
                    chain.push(x);
                    unit_of[x] = units.len();
                    prev = cur;
                    cur = x;
                }
                None => break,
            }
        }
        units.push(chain);
    }

    let d = |a: usize, b: usize| {
        price(
            problem.points[a].dist(&problem.points[b]),
            problem.rounded,
        )
    };
    let mut used = vec![false; units.len()];
    let start_unit = unit_of[0];
    let mut tour: Vec<usize> = units[start_unit].clone();
    used[start_unit] = true;
    let mut cur_end = *tour.last().unwrap();
    for _ in 1..units.len() {
        let mut best = (f64::INFINITY, usize::MAX, false);
        for (u, unit) in units.iter().enumerate() {
            if used[u] {
                continue;
            }
            let front = unit[0];
            let back = *unit.last().unwrap();
            let df = d(cur_end, front);
            if df < best.0 {
                best = (df, u, false);
            }
            let db = d(cur_end, back);
            if db < best.0 {
                best = (db, u, true);
            }
        }
        let (_, u, reversed) = best;
        used[u] = true;
        if reversed {
            tour.extend(units[u].iter().rev());
        } else {
            tour.extend(units[u].iter());
        }
        cur_end = *tour.last().unwrap();
    }
    tour
}

#[cfg(test)]
mod tests {
    use super::*;
    
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        (0..n)
            .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
            .collect()
    }

    fn cycle_len(points: &[Point], order: &[usize]) -> f64 {
        (0..order.len())
            .map(|i| points[order[i]].dist(&points[order[(i + 1) % order.len()]]))
            .sum()
    }

    /// Exact fixed-endpoint Hamiltonian path by bitmask DP. Oracle only.
    fn path_dp(points: &[Point], entry: usize, exit: usize) -> f64 {
        let n = points.len();
        let d = |a: usize, b: usize| points[a].dist(&points[b]);
        let full = (1usize << n) - 1;
        let mut dp = vec![vec![f64::INFINITY; n]; full + 1];
        dp[1 << entry][entry] = 0.0;
        for mask in 0..=full {
            for j in 0..n {
                if mask & (1 << j) == 0 || !dp[mask][j].is_finite() {
                    continue;
                }
                for k in 0..n {
                    if mask & (1 << k) != 0 {
                        continue;
                    }
                    let nm = mask | (1 << k);
                    let cand = dp[mask][j] + d(j, k);
                    if cand < dp[nm][k] {
                        dp[nm][k] = cand;
                    }
                }
            }
        }
        dp[full][exit]
    }

    #[test]
    fn crossing_quadrilateral_gets_uncrossed() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let mut p = LkProblem::new(pts.clone());
        p.start_tour = Some(vec![0, 2, 1, 3]); // crossed
        let r = lk_solve(&p, default_budget(4), 0).unwrap();
        assert!((r.length - 4.0).abs() < 1e-9);
        assert!(r.moves_applied >= 1);
    }

    #[test]
    fn optimal_start_is_fixed_point() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let mut p = LkProblem::new(pts);
        p.start_tour = Some(vec![0, 1, 2, 3]);
        let r = lk_solve(&p, 100, 1).unwrap();
        assert_eq!(r.length, 4.0);
        assert_eq!(r.tour, vec![0, 1, 2, 3]);
    }

    #[test]
    fn small_instances_reach_held_karp_often() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut optimal = 0;
        let total = 50;
        for _ in 0..total {
            let n = rng.random_range(6..=12);
            let pts = random_points(n, &mut rng);
            let (_, opt) = held_karp_exact(&pts).unwrap();
            let p = LkProblem::new(pts.clone());
            let r = lk_solve(&p, default_budget(n), rng.random()).unwrap();
            let recomputed = cycle_len(&pts, &r.tour);
            assert!((recomputed - r.length).abs() < 1e-9);
            assert!(
                r.length <= opt * 1.05 + 1e-9,
                "lk {} vs opt {opt} on n={n}",
                r.length
            );
            if r.length <= opt * (1.0 + 1e-9) {
                optimal += 1;
            }
        }
        assert!(optimal * 10 >= total * 8, "only {optimal}/{total} optimal");
    }

    #[test]
    fn held_karp_square_and_triangle() {
        let square = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let (_, len) = held_karp_exact(&square).unwrap();
        assert!((len - 4.0).abs() < 1e-12);

        let h = (3.0f64).sqrt() / 2.0;
        let tri = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.5, h),
        ];
        let (_, len) = held_karp_exact(&tri).unwrap();
        assert!((len - 3.0).abs() < 1e-12);
    }

    #[test]
    fn held_karp_matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 4..=8usize {
            let pts = random_points(n, &mut rng);
            let (order, len) = held_karp_exact(&pts).unwrap();
            assert_eq!(order.len(), n);
            // enumerate all permutations fixing vertex 0
            let mut rest: Vec<usize> = (1..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut rest, 0, &mut |perm| {
                let mut order = vec![0];
                order.extend_from_slice(perm);
                best = best.min(cycle_len(&pts, &order));
            });
            assert!((len - best).abs() < 1e-9, "n={n}: dp {len} vs brute {best}");
            assert!(cycle_len(&pts, &order) <= best + 1e-9);
        }
    }

    fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, f);
            items.swap(k, i);
        }
    }

    #[test]
    fn held_karp_rejects_oversized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(16, &mut rng);
        assert!(matches!(
            held_karp_exact(&pts),
            Err(Error::ExactSolverTooLarge { n: 16, max: 15 })
        ));
    }

    #[test]
    fn path_two_points_forced() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0)];
        let path = lk_path_solve(&pts, 1, 0, None, false, &LkParams::default(), 10, 0).unwrap();
        assert_eq!(path, vec![1, 0]);
    }

    #[test]
    fn path_three_collinear_forced() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
        ];
        let path =
            lk_path_solve(&pts, 0, 2, None, false, &LkParams::default(), 100, 0).unwrap();
        assert_eq!(path, vec![0, 1, 2]);
    }

    #[test]
    fn path_matches_dp_oracle_often() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut hits = 0;
        let total = 40;
        for _ in 0..total {
            let n = rng.random_range(5..=11);
            let pts = random_points(n, &mut rng);
            let entry = 0;
            let exit = n - 1;
            let best = path_dp(&pts, entry, exit);
            let path = lk_path_solve(
                &pts,
                entry,
                exit,
                None,
                false,
                &LkParams::default(),
                default_budget(n),
                rng.random(),
            )
            .unwrap();
            assert_eq!(path[0], entry);
            assert_eq!(path[n - 1], exit);
            let mut seen = vec![false; n];
            for &v in &path {
                assert!(!seen[v]);
                seen[v] = true;
            }
            let len: f64 = path.windows(2).map(|w| pts[w[0]].dist(&pts[w[1]])).sum();
            assert!(len >= best - 1e-9);
            if len <= best * (1.0 + 1e-9) {
                hits += 1;
            }
        }
        assert!(hits * 10 >= total * 8, "only {hits}/{total} optimal paths");
    }

    #[test]
    fn fixed_edges_always_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..30 {
            let n = rng.random_range(8..=20);
            let pts = random_points(n, &mut rng);
            // a random fixed path of 2-4 vertices
            let len = rng.random_range(2..=4usize.min(n - 2));
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(&mut rng);
            let fixed: Vec<(usize, usize)> =
                ids[..len].windows(2).map(|w| (w[0], w[1])).collect();
            let mut p = LkProblem::new(pts.clone());
            p.fixed_edges = fixed.clone();
            let r = lk_solve(&p, default_budget(n), rng.random()).unwrap();

            let mut pos = vec![0; n];
            for (i, &v) in r.tour.iter().enumerate() {
                pos[v] = i;
            }
            for &(a, b) in &fixed {
                let ia = pos[a];
                let nb1 = r.tour[(ia + 1) % n];
                let nb2 = r.tour[(ia + n - 1) % n];
                assert!(
                    nb1 == b || nb2 == b,
                    "fixed edge ({a},{b}) lost in {:?}",
                    r.tour
                );
            }
        }
    }

    #[test]
    fn fixed_cycle_and_high_degree_rejected() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(0.5, 0.5),
        ];
        let mut p = LkProblem::new(pts.clone());
        p.fixed_edges = vec![(0, 1), (1, 2), (2, 0)];
        assert!(matches!(
            lk_solve(&p, 10, 0),
            Err(Error::InfeasibleFixedEdges(_))
        ));

        let mut p = LkProblem::new(pts);
        p.fixed_edges = vec![(0, 1), (0, 2), (0, 3)];
        assert!(matches!(
            lk_solve(&p, 10, 0),
            Err(Error::InfeasibleFixedEdges(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts = random_points(40, &mut rng);
        let p = LkProblem::new(pts);
        let a = lk_solve(&p, default_budget(40), 42).unwrap();
        let b = lk_solve(&p, default_budget(40), 42).unwrap();
        assert_eq!(a.tour, b.tour);
        assert_eq!(a.length, b.length);
        assert_eq!(a.moves_applied, b.moves_applied);
    }

    #[test]
    fn monotone_improvement_from_any_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let n = rng.random_range(10..=40);
            let pts = random_points(n, &mut rng);
            let mut start: Vec<usize> = (0..n).collect();
            start.shuffle(&mut rng);
            let start_len = cycle_len(&pts, &start);
            let mut p = LkProblem::new(pts.clone());
            p.start_tour = Some(start);
            let r = lk_solve(&p, default_budget(n), rng.random()).unwrap();
            assert!(r.length <= start_len + 1e-9);
            assert!((cycle_len(&pts, &r.tour) - r.length).abs() < 1e-6);
        }
    }
}
