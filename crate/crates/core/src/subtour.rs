//! Sub-tour optimization: re-solve consecutive fixed-length slices of the
//! tour as fixed-endpoint paths, in I_3 passes from staggered start offsets.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::instance::{Instance, Point};
use crate::lk::{self, LkParams};
use crate::tour::Tour;
use crate::Result;

/// Run `i3` passes over the tour. Each pass splits the cycle at positions
/// `offset + j·l_s` and re-optimizes every closed slice (l_s+1 vertices,
/// boundary vertices shared with the neighboring slices and kept fixed).
/// Slices with fewer than 3 vertices are skipped. Returns the tour length
/// after each pass.
pub fn optimize_subtours(
    tour: &mut Tour,
    instance: &Instance,
    l_s: usize,
    i3: usize,
    random_starts: bool,
    lk_params: &LkParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = tour.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pass_lengths = Vec::with_capacity(i3);
    if n < 4 || l_s < 3 {
        for _ in 0..i3 {
            pass_lengths.push(tour.length());
        }
        return Ok(pass_lengths);
    }

    for pass in 1..=i3 {
        let offset = if random_starts {
            rng.random_range(0..n)
        } else {
            (pass * l_s / (i3 + 1)) % n
        };
        let k_segs = n.div_ceil(l_s);
        for s in 0..k_segs {
            let seg_start = (offset + s * l_s) % n;
            let span = if s + 1 < k_segs {
                l_s + 1
            } else {
                n - (k_segs - 1) * l_s + 1
            };
            let span = span.min(n);
            if span < 3 {
                continue;
            }
            let vertices = tour.segment(seg_start, span);
            let points: Vec<Point> = vertices.iter().map(|&v| instance.point(v)).collect();
            let current: Vec<usize> = (0..span).collect();
            let path = lk::lk_path_solve(
                &points,
                0,
                span - 1,
                Some(&current),
                instance.tsplib_rounding(),
                lk_params,
                lk::default_budget(span),
                rng.random(),
            )?;
            if path == current {
                continue;
            }
            let new_vertices: Vec<usize> = path.iter().map(|&i| vertices[i]).collect();
            let old_len = instance.path_length(&vertices);
            let new_len = instance.path_length(&new_vertices);
            debug_assert!(new_len <= old_len + 1e-9);
            tour.splice(seg_start, &new_vertices, new_len - old_len);
        }
        pass_lengths.push(tour.length());
    }
    Ok(pass_lengths)
}
