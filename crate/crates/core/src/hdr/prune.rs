//! Exact super-level masks of a KDE without evaluating every grid node.
//!
//! Grid nodes are grouped into small blocks, each enclosed in a spherical
//! cap. Kernel terms are bounded over the cap from the nearest and farthest
//! possible angles, so a block whose upper bound is below the level lies
//! entirely outside the set and a block whose lower bound is above it lies
//! entirely inside. Only the remaining nodes are evaluated exactly. The mask
//! is therefore identical to the one from full evaluation.

use rayon::prelude::*;

use crate::density::Density;
use crate::kde::KdeEstimate;
use crate::sphere::{EvalGrid, GridLayout};

/// Relative safety margin (in log space) on the bound comparisons.
const MARGIN: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Block {
    nodes: Vec<usize>,
    centre: [f64; 3],
    cos_r: f64,
    sin_r: f64,
}

#[derive(Debug, Clone)]
pub struct BlockIndex {
    blocks: Vec<Block>,
    n_nodes: usize,
}

fn make_block(grid: &EvalGrid, nodes: Vec<usize>) -> Block {
    let mut s = [0.0; 3];
    for &k in &nodes {
        let p = grid.points()[k].xyz();
        for d in 0..3 {
            s[d] += p[d];
        }
    }
    let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let centre = if norm > 1e-12 { [s[0] / norm, s[1] / norm, s[2] / norm] } else { grid.points()[nodes[0]].xyz() };
    let mut rho: f64 = 0.0;
    for &k in &nodes {
        let p = grid.points()[k].xyz();
        let d = (centre[0] * p[0] + centre[1] * p[1] + centre[2] * p[2]).clamp(-1.0, 1.0);
        rho = rho.max(d.acos());
    }
    let rho = (rho + 1e-9).min(std::f64::consts::PI);
    Block { nodes, centre, cos_r: rho.cos(), sin_r: rho.sin() }
}

impl BlockIndex {
    pub fn new(grid: &EvalGrid) -> Self {
        let mut blocks = Vec::new();
        match grid.layout() {
            GridLayout::Circle { n } => {
                for lo in (0..n).step_by(16) {
                    blocks.push(make_block(grid, (lo..(lo + 16).min(n)).collect()));
                }
            }
            GridLayout::LonLat { n_lon, n_lat } => {
                for r0 in (0..n_lat).step_by(8) {
                    for c0 in (0..n_lon).step_by(8) {
                        let nodes = (r0..(r0 + 8).min(n_lat))
                            .flat_map(|r| (c0..(c0 + 8).min(n_lon)).map(move |c| r * n_lon + c))
                            .collect();
                        blocks.push(make_block(grid, nodes));
                    }
                }
            }
            GridLayout::Scattered => {
                for lo in (0..grid.len()).step_by(64) {
                    blocks.push(make_block(grid, (lo..(lo + 64).min(grid.len())).collect()));
                }
            }
        }
        Self { blocks, n_nodes: grid.len() }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Mask {f_n ≥ level} plus exact values where they were computed (NaN
    /// elsewhere).
    pub fn classify(&self, est: &KdeEstimate, grid: &EvalGrid, level: f64) -> (Vec<bool>, Vec<f64>) {
        debug_assert_eq!(grid.len(), self.n_nodes);
        let ln_t = level.ln();
        let per_block: Vec<(Option<bool>, Vec<f64>)> = self
            .blocks
            .par_iter()
            .map(|b| {
                let (up, lo) = est.log_bounds_on_cap(b.centre, b.cos_r, b.sin_r);
                if up < ln_t - MARGIN {
                    (Some(false), Vec::new())
                } else if lo > ln_t + MARGIN {
                    (Some(true), Vec::new())
                } else {
                    (None, b.nodes.iter().map(|&k| est.eval(&grid.points()[k])).collect())
                }
            })
            .collect();
        let mut mask = vec![false; self.n_nodes];
        let mut values = vec![f64::NAN; self.n_nodes];
        for (b, (status, vals)) in self.blocks.iter().zip(per_block) {
            match status {
                Some(inside) => {
                    for &k in &b.nodes {
                        mask[k] = inside;
                    }
                }
                None => {
                    for (&k, v) in b.nodes.iter().zip(vals) {
                        mask[k] = v >= level;
                        values[k] = v;
                    }
                }
            }
        }
        (mask, values)
    }
}
