//! Regular simplex lattice with piecewise-linear interpolation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// All preferences of dimension `dim` whose coordinates are multiples of
/// `1 / divisions`, with a triangulation for interpolating node values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "LatticeShape", into = "LatticeShape")]
pub struct SimplexLattice {
    dim: usize,
    divisions: usize,
    nodes: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

#[derive(Clone, Serialize, Deserialize)]
struct LatticeShape {
    dim: usize,
    divisions: usize,
}

impl From<LatticeShape> for SimplexLattice {
    fn from(s: LatticeShape) -> Self {
        SimplexLattice::build(s.dim, s.divisions)
    }
}

impl From<SimplexLattice> for LatticeShape {
    fn from(l: SimplexLattice) -> Self {
        LatticeShape {
            dim: l.dim,
            divisions: l.divisions,
        }
    }
}

impl SimplexLattice {
    pub fn new(dim: usize, divisions: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("lattice needs at least two objectives"));
        }
        if divisions < 1 {
            return Err(Error::invalid("lattice needs at least one division"));
        }
        Ok(Self::build(dim, divisions))
    }

    fn build(dim: usize, divisions: usize) -> Self {
        let nodes: Vec<Vec<usize>> = crate::env::simplex_grid(dim, divisions)
            .into_iter()
            .map(|p| p.iter().map(|x| (x * divisions as f64).round() as usize).collect())
            .collect();
        let index = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        SimplexLattice {
            dim,
            divisions,
            nodes,
            index,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Preference at node `i`.
    pub fn node(&self, i: usize) -> Vec<f64> {
        let n = self.divisions as f64;
        self.nodes[i].iter().map(|k| *k as f64 / n).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    /// Convex weights over at most `dim` nodes whose combination reproduces `w`.
    ///
    /// Works in cumulative coordinates `z_i = n·(w_1 + … + w_i)`, where the
    /// lattice is the integer grid and each unit cube is split into simplices
    /// by the ordering of the fractional parts. Zero-weight vertices are
    /// dropped, so a node query returns that node alone.
    pub fn weights(&self, w: &[f64]) -> Vec<(usize, f64)> {
        let d = self.dim;
        let n = self.divisions as f64;
        let mut z = Vec::with_capacity(d - 1);
        let mut acc = 0.0;
        for x in &w[..d - 1] {
            acc += x.max(0.0);
            let zi = (acc * n).clamp(0.0, n);
            // snap rounding noise so node queries hit the node exactly
            z.push(if (zi - zi.round()).abs() < 1e-9 { zi.round() } else { zi });
        }
        // enforce monotone cumulative coordinates against rounding
        for i in 1..z.len() {
            if z[i] < z[i - 1] {
                z[i] = z[i - 1];
            }
        }
        let base: Vec<f64> = z.iter().map(|x| x.floor().min(n - 1.0).max(0.0)).collect();
        let frac: Vec<f64> = z.iter().zip(&base).map(|(x, b)| (x - b).clamp(0.0, 1.0)).collect();
        let mut order: Vec<usize> = (0..d - 1).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(b.cmp(&a)));

        let mut out = Vec::with_capacity(d);
        let mut vertex: Vec<i64> = base.iter().map(|b| *b as i64).collect();
        let mut prev = 1.0;
        for step in 0..=order.len() {
            let next = if step < order.len() { frac[order[step]] } else { 0.0 };
            let weight = prev - next;
            if weight > 0.0 {
                out.push((self.node_of_cumulative(&vertex), weight));
            }
            if step < order.len() {
                vertex[order[step]] += 1;
                prev = next;
            }
        }
        out
    }

    fn node_of_cumulative(&self, z: &[i64]) -> usize {
        let n = self.divisions as i64;
        let mut counts = Vec::with_capacity(self.dim);
        let mut last = 0;
        for &zi in z {
            counts.push((zi - last).max(0) as usize);
            last = zi.max(last);
        }
        counts.push((n - last).max(0) as usize);
        *self
            .index
            .get(&counts)
            .unwrap_or_else(|| panic!("cumulative vertex {z:?} off the lattice"))
    }

    /// Interpolates a slice of length `out.len()` found at `offset` within each
    /// node's block of `stride` values in `table`.
    pub fn interpolate_into(weights: &[(usize, f64)], table: &[f64], stride: usize, offset: usize, out: &mut [f64]) {
        out.fill(0.0);
        let len = out.len();
        for &(node, wt) in weights {
            let base = node * stride + offset;
            for (o, v) in out.iter_mut().zip(&table[base..base + len]) {
                *o += wt * v;
            }
        }
    }
}
