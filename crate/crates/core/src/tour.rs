//! Hamiltonian cycle with O(1) successor/predecessor queries and cached
//! length.

use std::io::{BufRead, Write};

use crate::instance::Instance;
use crate::{Error, Result};

/// Normalize an undirected edge to `(min, max)` key form.
#[inline]
pub fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct Tour {
    order: Vec<usize>,
    position: Vec<usize>,
    length: f64,
}

impl Tour {
    /// Validate `order` as a permutation of `0..n` and cache its length.
    pub fn new(order: Vec<usize>, instance: &Instance) -> Result<Self> {
        let n = instance.n();
        if order.len() != n {
            return Err(Error::InvalidTour(format!(
                "order has {} entries, instance has {n}",
                order.len()
            )));
        }
        let mut position = vec![usize::MAX; n];
        for (i, &v) in order.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidTour(format!("vertex {v} out of range")));
            }
            if position[v] != usize::MAX {
                return Err(Error::InvalidTour(format!("vertex {v} visited twice")));
            }
            position[v] = i;
        }
        let length = instance.cycle_length(&order);
        Ok(Tour {
            order,
            position,
            length,
        })
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    pub fn vertex_at(&self, pos: usize) -> usize {
        self.order[pos]
    }

    pub fn next(&self, v: usize) -> usize {
        let i = self.position[v];
        self.order[if i + 1 == self.order.len() { 0 } else { i + 1 }]
    }

    pub fn prev(&self, v: usize) -> usize {
        let i = self.position[v];
        self.order[if i == 0 { self.order.len() - 1 } else { i - 1 }]
    }

    /// Tour edges as consecutive (unordered) vertex pairs, including the
    /// closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.order.len();
        (0..n).map(move |i| {
            let j = if i + 1 == n { 0 } else { i + 1 };
            edge_key(self.order[i], self.order[j])
        })
    }

    pub fn contains_edge(&self, a: usize, b: usize) -> bool {
        self.next(a) == b || self.prev(a) == b
    }

    /// Extract `len` vertices starting at position `start`, wrapping around.
    pub fn segment(&self, start: usize, len: usize) -> Vec<usize> {
        let n = self.order.len();
        (0..len).map(|i| self.order[(start + i) % n]).collect()
    }

    /// Replace the `new_vertices.len()` positions starting at `start`
    /// (wrapping) and adjust the cached length by `delta`.
    pub(crate) fn splice(&mut self, start: usize, new_vertices: &[usize], delta: f64) {
        let n = self.order.len();
        for (i, &v) in new_vertices.iter().enumerate() {
            let p = (start + i) % n;
            self.order[p] = v;
            self.position[v] = p;
        }
        self.length += delta;
    }

    /// Replace the whole order (same vertex set) and adjust cached length.
    pub(crate) fn replace_order(&mut self, order: Vec<usize>, new_length: f64) {
        debug_assert_eq!(order.len(), self.order.len());
        for (i, &v) in order.iter().enumerate() {
            self.position[v] = i;
        }
        self.order = order;
        self.length = new_length;
    }

    /// Full recomputation of the cycle length; the cached value should agree
    /// to ~1e-9 relative.
    pub fn recompute_length(&self, instance: &Instance) -> f64 {
        instance.cycle_length(&self.order)
    }

    /// Check that the tour is a bijection on 0..n.
    pub fn check_valid(&self, n: usize) -> Result<()> {
        if self.order.len() != n {
            return Err(Error::InvalidTour(format!(
                "tour covers {} of {n} vertices",
                self.order.len()
            )));
        }
        let mut seen = vec![false; n];
        for &v in &self.order {
            if v >= n || seen[v] {
                return Err(Error::InvalidTour(format!("vertex {v} repeated or out of range")));
            }
            seen[v] = true;
        }
        for (i, &v) in self.order.iter().enumerate() {
            if self.position[v] != i {
                return Err(Error::InvalidTour(format!("position map stale at {v}")));
            }
        }
        Ok(())
    }

    /// Write TSPLIB `.tour` format: 1-based ids, terminated by -1.
    pub fn write_tour_file(&self, name: &str, mut w: impl Write) -> Result<()> {
        writeln!(w, "NAME : {name}")?;
        writeln!(w, "TYPE : TOUR")?;
        writeln!(w, "DIMENSION : {}", self.order.len())?;
        writeln!(w, "TOUR_SECTION")?;
        for &v in &self.order {
            writeln!(w, "{}", v + 1)?;
        }
        writeln!(w, "-1")?;
        writeln!(w, "EOF")?;
        Ok(())
    }

    /// Read a TSPLIB `.tour` file back into an order vector (0-based).
    pub fn read_tour_file(reader: impl BufRead) -> Result<Vec<usize>> {
        let mut order = Vec::new();
        let mut in_section = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if in_section {
                if t == "-1" || t.eq_ignore_ascii_case("EOF") {
                    break;
                }
                for tok in t.split_whitespace() {
                    if tok == "-1" {
                        return Ok(order);
                    }
                    let id: usize = tok.parse().map_err(|e| Error::TsplibParse {
                        line: idx + 1,
                        msg: format!("bad tour id: {e}"),
                    })?;
                    if id == 0 {
                        return Err(Error::TsplibParse {
                            line: idx + 1,
                            msg: "tour ids are 1-based".to_string(),
                        });
                    }
                    order.push(id - 1);
                }
            } else if t.eq_ignore_ascii_case("TOUR_SECTION") {
                in_section = true;
            }
        }
        Ok(order)
    }
}
