//! TSP instance geometry: points, distance evaluation, k-NN queries and
//! TSPLIB ingestion.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Immutable TSP instance: the point set plus a spatial index for k-NN
/// queries. Safe to share across threads once built.
#[derive(Debug, Clone)]
pub struct Instance {
    name: String,
    points: Vec<Point>,
    index: SpatialIndex,
    tsplib_rounding: bool,
}

impl Instance {
    /// Build an instance, rejecting duplicate points and non-finite
    /// coordinates.
    pub fn new(name: impl Into<String>, points: Vec<Point>) -> Result<Self> {
        check_finite(&points)?;
        if let Some((first, second)) = find_duplicate(&points) {
            return Err(Error::DuplicatePoint { first, second });
        }
        Ok(Self::assemble(name.into(), points))
    }

    /// Build an instance, silently dropping duplicate coordinates.
    pub fn new_deduplicated(name: impl Into<String>, points: Vec<Point>) -> Result<Self> {
        check_finite(&points)?;
        let mut seen = HashMap::new();
        let mut kept = Vec::with_capacity(points.len());
        for p in points {
            if seen.insert((p.x.to_bits(), p.y.to_bits()), ()).is_none() {
                kept.push(p);
            }
        }
        Ok(Self::assemble(name.into(), kept))
    }

    /// Build without the duplicate check. Used for internally derived point
    /// sets (e.g. cluster centroids) where coincident points are tolerable.
    pub(crate) fn new_unchecked(name: impl Into<String>, points: Vec<Point>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self::assemble(name.into(), points))
    }

    fn assemble(name: String, points: Vec<Point>) -> Self {
        let index = SpatialIndex::build(&points);
        Instance {
            name,
            points,
            index,
            tsplib_rounding: false,
        }
    }

    /// Switch distance evaluation to TSPLIB EUC_2D integer rounding.
    /// k-NN ordering stays true-Euclidean either way.
    pub fn with_tsplib_rounding(mut self, on: bool) -> Self {
        self.tsplib_rounding = on;
        self
    }

    pub fn tsplib_rounding(&self) -> bool {
        self.tsplib_rounding
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn point(&self, v: usize) -> Point {
        self.points[v]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Euclidean distance between two vertices (TSPLIB-rounded when the
    /// instance was configured that way).
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let d = self.points[a].dist(&self.points[b]);
        if self.tsplib_rounding {
            (d + 0.5).floor()
        } else {
            d
        }
    }

    /// The `min(m, n-1)` nearest neighbors of `v`, sorted by non-decreasing
    /// true-Euclidean distance, ties broken by lower vertex id. `v` itself is
    /// never returned.
    pub fn knn(&self, v: usize, m: usize) -> Vec<usize> {
        self.index.knn(&self.points, v, m)
    }

    /// Length of the cycle visiting `order`, closing back to the start.
    pub fn cycle_length(&self, order: &[usize]) -> f64 {
        if order.len() < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..order.len() {
            let j = (i + 1) % order.len();
            total += self.distance(order[i], order[j]);
        }
        total
    }

    /// Length of the open path visiting `order` in sequence.
    pub fn path_length(&self, order: &[usize]) -> f64 {
        order.windows(2).map(|w| self.distance(w[0], w[1])).sum()
    }

    /// Parse a TSPLIB `.tsp` file with `EDGE_WEIGHT_TYPE: EUC_2D`.
    /// A missing EOF sentinel is tolerated as long as the coordinate
    /// section is complete.
    pub fn load_tsplib(path: impl AsRef<Path>) -> Result<Instance> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::parse_tsplib(BufReader::new(file))
    }

    pub fn parse_tsplib(reader: impl BufRead) -> Result<Instance> {
        let mut name = String::from("unnamed");
        let mut dimension: Option<usize> = None;
        let mut edge_weight_type: Option<String> = None;
        let mut points: Vec<Point> = Vec::new();
        let mut in_coords = false;

        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if in_coords {
                if trimmed.eq_ignore_ascii_case("EOF") {
                    break;
                }
                let mut it = trimmed.split_whitespace();
                let parse = |tok: Option<&str>, what: &str| -> Result<f64> {
                    tok.ok_or_else(|| Error::TsplibParse {
                        line: lineno,
                        msg: format!("missing {what}"),
                    })?
                    .parse::<f64>()
                    .map_err(|e| Error::TsplibParse {
                        line: lineno,
                        msg: format!("bad {what}: {e}"),
                    })
                };
                // Node id is 1-based in the file; coordinates are kept in
                // file order.
                parse(it.next(), "node id")?;
                let x = parse(it.next(), "x coordinate")?;
                let y = parse(it.next(), "y coordinate")?;
                points.push(Point::new(x, y));
                if let Some(dim) = dimension {
                    if points.len() == dim {
                        in_coords = false;
                    }
                }
                continue;
            }
            if trimmed.eq_ignore_ascii_case("NODE_COORD_SECTION") {
                in_coords = true;
                continue;
            }
            if trimmed.eq_ignore_ascii_case("EOF") {
                break;
            }
            if let Some((key, value)) = split_header(trimmed) {
                match key.to_ascii_uppercase().as_str() {
                    "NAME" => name = value.to_string(),
                    "DIMENSION" => {
                        dimension = Some(value.parse().map_err(|e| Error::TsplibParse {
                            line: lineno,
                            msg: format!("bad DIMENSION: {e}"),
                        })?)
                    }
                    "EDGE_WEIGHT_TYPE" => edge_weight_type = Some(value.to_string()),
                    // TYPE, COMMENT and anything else are informational.
                    _ => {}
                }
            }
        }

        match edge_weight_type.as_deref() {
            Some("EUC_2D") => {}
            Some(other) => return Err(Error::UnsupportedEdgeWeightType(other.to_string())),
            None => return Err(Error::UnsupportedEdgeWeightType("<missing>".to_string())),
        }
        if let Some(dim) = dimension {
            if points.len() != dim {
                return Err(Error::TsplibParse {
                    line: 0,
                    msg: format!("DIMENSION is {dim} but {} coordinates read", points.len()),
                });
            }
        }
        if points.is_empty() {
            return Err(Error::TsplibParse {
                line: 0,
                msg: "no NODE_COORD_SECTION found".to_string(),
            });
        }
        Instance::new(name, points)
    }

    /// Write the instance as a TSPLIB EUC_2D file.
    pub fn write_tsplib(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "NAME : {}", self.name)?;
        writeln!(w, "TYPE : TSP")?;
        writeln!(w, "DIMENSION : {}", self.n())?;
        writeln!(w, "EDGE_WEIGHT_TYPE : EUC_2D")?;
        writeln!(w, "NODE_COORD_SECTION")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(w, "{} {} {}", i + 1, p.x, p.y)?;
        }
        writeln!(w, "EOF")?;
        Ok(())
    }
}

fn split_header(line: &str) -> Option<(&str, &str)> {
    let (key, value) = line.split_once(':')?;
    Some((key.trim(), value.trim()))
}

fn check_finite(points: &[Point]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::NonFiniteCoordinate(i));
        }
    }
    Ok(())
}

fn find_duplicate(points: &[Point]) -> Option<(usize, usize)> {
    let mut seen: HashMap<(u64, u64), usize> = HashMap::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if let Some(&first) = seen.get(&(p.x.to_bits(), p.y.to_bits())) {
            return Some((first, i));
        }
        seen.insert((p.x.to_bits(), p.y.to_bits()), i);
    }
    None
}

/// Uniform-grid acceleration structure for exact k-NN queries.
#[derive(Debug, Clone)]
struct SpatialIndex {
    min_x: f64,
    min_y: f64,
    cell_w: f64,
    cell_h: f64,
    cols: usize,
    rows: usize,
    // cell -> vertex ids, CSR layout
    cell_start: Vec<usize>,
    cell_items: Vec<usize>,
}

impl SpatialIndex {
    fn build(points: &[Point]) -> Self {
        let n = points.len().max(1);
        let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
        let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        if points.is_empty() {
            min_x = 0.0;
            min_y = 0.0;
            max_x = 1.0;
            max_y = 1.0;
        }
        let side = (n as f64).sqrt().ceil() as usize;
        let cols = side.max(1);
        let rows = side.max(1);
        let span_x = (max_x - min_x).max(f64::MIN_POSITIVE);
        let span_y = (max_y - min_y).max(f64::MIN_POSITIVE);
        let cell_w = span_x / cols as f64;
        let cell_h = span_y / rows as f64;

        let mut counts = vec![0usize; cols * rows];
        let cell_of = |p: &Point| -> usize {
            let cx = (((p.x - min_x) / cell_w) as usize).min(cols - 1);
            let cy = (((p.y - min_y) / cell_h) as usize).min(rows - 1);
            cy * cols + cx
        };
        for p in points {
            counts[cell_of(p)] += 1;
        }
        let mut cell_start = vec![0usize; cols * rows + 1];
        for i in 0..cols * rows {
            cell_start[i + 1] = cell_start[i] + counts[i];
        }
        let mut fill = cell_start.clone();
        let mut cell_items = vec![0usize; points.len()];
        for (id, p) in points.iter().enumerate() {
            let c = cell_of(p);
            cell_items[fill[c]] = id;
            fill[c] += 1;
        }
        SpatialIndex {
            min_x,
            min_y,
            cell_w,
            cell_h,
            cols,
            rows,
            cell_start,
            cell_items,
        }
    }

    fn knn(&self, points: &[Point], v: usize, m: usize) -> Vec<usize> {
        let n = points.len();
        let want = m.min(n.saturating_sub(1));
        if want == 0 {
            return Vec::new();
        }
        let p = points[v];
        let cx = (((p.x - self.min_x) / self.cell_w) as usize).min(self.cols - 1);
        let cy = (((p.y - self.min_y) / self.cell_h) as usize).min(self.rows - 1);
        let min_cell = self.cell_w.min(self.cell_h);

        let mut cands: Vec<(f64, usize)> = Vec::with_capacity(want * 2);
        let max_ring = self.cols.max(self.rows);
        for ring in 0..=max_ring {
            self.collect_ring(points, &p, v, cx, cy, ring, &mut cands);
            if cands.len() >= want {
                // A point in ring r+1 or beyond is at least r * min_cell away,
                // so once the current k-th best is within that bound the
                // result is exact.
                cands.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                let kth = cands[want - 1].0;
                if kth <= ring as f64 * min_cell {
                    break;
                }
            }
        }
        cands.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        cands.truncate(want);
        cands.into_iter().map(|(_, id)| id).collect()
    }

    fn collect_ring(
        &self,
        points: &[Point],
        p: &Point,
        v: usize,
        cx: usize,
        cy: usize,
        ring: usize,
        out: &mut Vec<(f64, usize)>,
    ) {
        let r = ring as isize;
        let (cx, cy) = (cx as isize, cy as isize);
        let mut visit = |x: isize, y: isize| {
            if x < 0 || y < 0 || x >= self.cols as isize || y >= self.rows as isize {
                return;
            }
            let c = y as usize * self.cols + x as usize;
            for &id in &self.cell_items[self.cell_start[c]..self.cell_start[c + 1]] {
                if id != v {
                    out.push((p.dist(&points[id]), id));
                }
            }
        };
        if ring == 0 {
            visit(cx, cy);
            return;
        }
        for x in (cx - r)..=(cx + r) {
            visit(x, cy - r);
            visit(x, cy + r);
        }
        for y in (cy - r + 1)..=(cy + r - 1) {
            visit(cx - r, y);
            visit(cx + r, y);
        }
    }
}
