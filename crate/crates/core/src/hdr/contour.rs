//! Marching squares on the lon-lat grid.
//!
//! Cell (r, c) has corners (r, c), (r, c+1), (r+1, c+1), (r+1, c) with the
//! column index wrapping in longitude. Crossing points are linearly
//! interpolated on the density along grid edges and projected back onto the
//! sphere. Pole rows hold one repeated point, so their horizontal edges never
//! cross and contours close around the poles through the vertical edges.

use std::collections::{BTreeMap, HashMap};

use crate::sphere::{Dim, EvalGrid, UnitVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<UnitVector>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LonLatShape {
    pub n_lon: usize,
    pub n_lat: usize,
}

impl LonLatShape {
    #[inline]
    fn node(&self, r: usize, c: usize) -> usize {
        r * self.n_lon + c % self.n_lon
    }

    /// Corner node indices of cell (r, c), counter-clockwise from (r, c).
    #[inline]
    pub fn corners(&self, r: usize, c: usize) -> [usize; 4] {
        [self.node(r, c), self.node(r, c + 1), self.node(r + 1, c + 1), self.node(r + 1, c)]
    }

    /// Edge ids of cell (r, c): bottom, right, top, left.
    #[inline]
    fn edges(&self, r: usize, c: usize) -> [u64; 4] {
        let h = |r: usize, c: usize| 2 * self.node(r, c) as u64;
        let v = |r: usize, c: usize| 2 * self.node(r, c) as u64 + 1;
        [h(r, c), v(r, c + 1), h(r + 1, c), v(r, c)]
    }

    /// Endpoint node indices of an edge id.
    #[inline]
    fn edge_nodes(&self, e: u64) -> (usize, usize) {
        let k = (e / 2) as usize;
        let (r, c) = (k / self.n_lon, k % self.n_lon);
        if e % 2 == 0 {
            (k, self.node(r, c + 1))
        } else {
            (k, self.node(r + 1, c))
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_lat - 1).flat_map(move |r| (0..self.n_lon).map(move |c| (r, c)))
    }
}

/// Cells whose corners are not all on the same side of the level.
pub(crate) fn mixed_cells<'a>(shape: &'a LonLatShape, mask: &'a [bool]) -> impl Iterator<Item = (usize, usize)> + 'a {
    shape.cells().filter(move |&(r, c)| {
        let k = shape.corners(r, c);
        let first = mask[k[0]];
        k[1..].iter().any(|&i| mask[i] != first)
    })
}

/// Crossing point of `level` on the segment between two grid nodes.
fn crossing(grid: &EvalGrid, values: &[f64], level: f64, a: usize, b: usize) -> UnitVector {
    let (va, vb) = (values[a], values[b]);
    let s = if vb != va { ((level - va) / (vb - va)).clamp(0.0, 1.0) } else { 0.5 };
    let pa = grid.points()[a].xyz();
    let pb = grid.points()[b].xyz();
    let p = [(1.0 - s) * pa[0] + s * pb[0], (1.0 - s) * pa[1] + s * pb[1], (1.0 - s) * pa[2] + s * pb[2]];
    UnitVector::normalized(p, Dim::Sphere)
}

/// Segments of one cell as pairs of edge ids.
fn cell_segments(
    shape: &LonLatShape,
    values: &[f64],
    mask: &[bool],
    level: f64,
    r: usize,
    c: usize,
    out: &mut Vec<(u64, u64)>,
) {
    let k = shape.corners(r, c);
    let e = shape.edges(r, c);
    let inside = [mask[k[0]], mask[k[1]], mask[k[2]], mask[k[3]]];
    // edge j joins corner j and corner (j + 1) % 4
    let cut: Vec<usize> = (0..4).filter(|&j| inside[j] != inside[(j + 1) % 4]).collect();
    match cut.len() {
        0 => {}
        2 => out.push((e[cut[0]], e[cut[1]])),
        4 => {
            let centre = 0.25 * (values[k[0]] + values[k[1]] + values[k[2]] + values[k[3]]);
            let centre_inside = centre >= level;
            // isolate each corner whose side differs from the centre; corner
            // j touches edges j − 1 and j
            for j in 0..4 {
                if inside[j] != centre_inside {
                    out.push((e[(j + 3) % 4], e[j]));
                }
            }
        }
        _ => unreachable!("a cycle of four corners changes side an even number of times"),
    }
}

/// All crossing points, keyed by edge id (deterministic order).
pub(crate) fn crossings(
    grid: &EvalGrid,
    shape: &LonLatShape,
    values: &[f64],
    mask: &[bool],
    level: f64,
) -> BTreeMap<u64, UnitVector> {
    let mut pts = BTreeMap::new();
    let mut segs = Vec::new();
    for (r, c) in mixed_cells(shape, mask) {
        segs.clear();
        cell_segments(shape, values, mask, level, r, c, &mut segs);
        for &(a, b) in &segs {
            for e in [a, b] {
                pts.entry(e).or_insert_with(|| {
                    let (na, nb) = shape.edge_nodes(e);
                    crossing(grid, values, level, na, nb)
                });
            }
        }
    }
    pts
}

/// Chains cell segments into polylines.
pub(crate) fn trace(grid: &EvalGrid, shape: &LonLatShape, values: &[f64], mask: &[bool], level: f64) -> Vec<Polyline> {
    let mut segs = Vec::new();
    for (r, c) in mixed_cells(shape, mask) {
        cell_segments(shape, values, mask, level, r, c, &mut segs);
    }
    let pts = crossings(grid, shape, values, mask, level);
    let mut at_edge: HashMap<u64, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segs.iter().enumerate() {
        at_edge.entry(a).or_default().push(s);
        at_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();

    let walk = |start_seg: usize, start_edge: u64, used: &mut Vec<bool>| {
        let mut edges = vec![start_edge];
        let mut seg = start_seg;
        let mut cur = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segs[seg];
            cur = if a == cur { b } else { a };
            edges.push(cur);
            match at_edge[&cur].iter().copied().find(|&s| !used[s]) {
                Some(next) => seg = next,
                None => break,
            }
        }
        let closed = edges.len() > 2 && edges.first() == edges.last();
        if closed {
            edges.pop();
        }
        Polyline { points: edges.iter().map(|e| pts[e]).collect(), closed }
    };

    // open chains first (only possible on grids that do not wrap fully)
    let mut ends: Vec<u64> = at_edge.iter().filter(|(_, v)| v.len() == 1).map(|(e, _)| *e).collect();
    ends.sort_unstable();
    for e in ends {
        let s = at_edge[&e][0];
        if !used[s] {
            lines.push(walk(s, e, &mut used));
        }
    }
    for s in 0..segs.len() {
        if !used[s] {
            lines.push(walk(s, segs[s].0, &mut used));
        }
    }
    lines
}
