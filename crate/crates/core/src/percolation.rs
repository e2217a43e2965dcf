//! Spanning detection for charged plaquettes and the Monte Carlo samples
//! built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsu::DisjointSet;
use crate::hdrg::RegionParams;
use crate::init::init_step;
use crate::lattice::{compute_syndrome, sample_errors, CodeParams, NoiseParams, SyndromeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpanAxis {
    /// A cluster touches every column.
    Columns,
    /// A cluster touches every row.
    Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PercolationSample {
    pub spans: bool,
    pub largest_cluster: usize,
    pub axis: Option<SpanAxis>,
}

/// Clusters of an `l x l` occupancy grid under orthogonal adjacency with wrap.
pub fn analyze_grid(occupied: &[bool], l: usize) -> PercolationSample {
    assert_eq!(occupied.len(), l * l);
    let mut ds = DisjointSet::new(l * l);
    for r in 0..l {
        for c in 0..l {
            let i = r * l + c;
            if !occupied[i] {
                continue;
            }
            let right = r * l + (c + 1) % l;
            let up = ((r + 1) % l) * l + c;
            if occupied[right] {
                ds.union(i, right);
            }
            if occupied[up] {
                ds.union(i, up);
            }
        }
    }
    let mut size = vec![0usize; l * l];
    let mut cols: Vec<Vec<bool>> = vec![Vec::new(); l * l];
    let mut rows: Vec<Vec<bool>> = vec![Vec::new(); l * l];
    let mut col_count = vec![0usize; l * l];
    let mut row_count = vec![0usize; l * l];
    for r in 0..l {
        for c in 0..l {
            let i = r * l + c;
            if !occupied[i] {
                continue;
            }
            let root = ds.find(i);
            size[root] += 1;
            if cols[root].is_empty() {
                cols[root] = vec![false; l];
                rows[root] = vec![false; l];
            }
            if !cols[root][c] {
                cols[root][c] = true;
                col_count[root] += 1;
            }
            if !rows[root][r] {
                rows[root][r] = true;
                row_count[root] += 1;
            }
        }
    }
    let mut axis = None;
    for root in 0..l * l {
        if col_count[root] == l {
            axis = Some(SpanAxis::Columns);
            break;
        }
        if row_count[root] == l {
            axis = Some(SpanAxis::Rows);
            break;
        }
    }
    PercolationSample { spans: axis.is_some(), largest_cluster: size.into_iter().max().unwrap_or(0), axis }
}

/// Whether some orthogonally connected cluster of charges touches every
/// column or every row of the torus.
pub fn spans(w: &SyndromeSet) -> bool {
    let l = w.params().l();
    let occupied: Vec<bool> = w.to_dense().into_iter().map(|c| c != 0).collect();
    analyze_grid(&occupied, l).spans
}

/// Samples errors, optionally thins the syndrome with the initialization
/// pass up to `depth`, and checks for spanning.
pub fn percolation_sample(params: CodeParams, noise: NoiseParams, seed: u64, depth: Option<RegionParams>) -> PercolationSample {
    let mut w = compute_syndrome(&sample_errors(params, noise, seed));
    if let Some(depth) = depth {
        w = init_step(&w, depth).0;
    }
    let occupied: Vec<bool> = w.to_dense().into_iter().map(|c| c != 0).collect();
    analyze_grid(&occupied, params.l())
}

/// Classic site percolation: each plaquette is occupied with probability `p`.
pub fn site_percolation_sample(l: usize, p: f64, seed: u64) -> PercolationSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let occupied: Vec<bool> = (0..l * l).map(|_| rng.gen::<f64>() < p).collect();
    analyze_grid(&occupied, l)
}
