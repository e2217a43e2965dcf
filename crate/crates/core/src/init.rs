//! Initialization pass that breaks up percolating syndrome clusters before
//! HDRG runs.
//!
//! Level `(r, s)` visits every plaquette `u` and, for each offset `q` on the
//! outer layer of `R(r, s)`, tries every monotone path inside the rectangle
//! spanned by `u` and `u + q`. The first path whose charges sum to zero is
//! annihilated along the path and the scan moves on to the next `u`.

use crate::error::DecodeError;
use crate::hdrg::{hdrg_decode, outer_layer, RegionParams};
use crate::lattice::{CodeParams, ErrorConfig, Plaquette, SyndromeSet};

/// Outer layer of a region: the offsets `u -> q` searched at one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QSet {
    pub rp: RegionParams,
    pub offsets: Vec<(i64, i64)>,
}

pub fn q_set(rp: RegionParams) -> QSet {
    QSet { rp, offsets: outer_layer(rp) }
}

/// Rectangle with corners `u` and `u + (dr, dc)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchRectangle {
    pub corner: Plaquette,
    pub dr: i64,
    pub dc: i64,
}

impl SearchRectangle {
    /// Builds the rectangle on the minimum-image displacement from `u` to `q`.
    pub fn spanning(params: CodeParams, u: Plaquette, q: Plaquette) -> Self {
        let (dr, dc) = params.displacement(u, q);
        Self { corner: u, dr, dc }
    }

    /// Number of plaquettes on every monotone path between the corners.
    pub fn path_len(&self) -> usize {
        (self.dr.unsigned_abs() + self.dc.unsigned_abs()) as usize + 1
    }

    pub fn path_count(&self) -> u64 {
        binomial(self.dr.unsigned_abs() + self.dc.unsigned_abs(), self.dr.unsigned_abs())
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Yields the monotone paths of a rectangle, with row steps ordered before
/// column steps, so the first path goes along the rows first.
pub struct PathIter {
    params: CodeParams,
    rect: SearchRectangle,
    // true = row step
    steps: Vec<bool>,
    done: bool,
}

impl PathIter {
    fn current(&self) -> Vec<Plaquette> {
        let (rs, cs) = (self.rect.dr.signum(), self.rect.dc.signum());
        let mut cur = self.rect.corner;
        let mut path = Vec::with_capacity(self.steps.len() + 1);
        path.push(cur);
        for &row in &self.steps {
            cur = if row { self.params.offset(cur, rs, 0) } else { self.params.offset(cur, 0, cs) };
            path.push(cur);
        }
        path
    }

    /// Advances `steps` to the next arrangement in lexicographic order with
    /// row < column; returns false after the last one.
    fn advance(&mut self) -> bool {
        // Encode row as 0 and column as 1; standard next permutation.
        let s = &mut self.steps;
        let n = s.len();
        if n < 2 {
            return false;
        }
        let key = |b: bool| if b { 0u8 } else { 1u8 };
        let mut i = n - 1;
        while i > 0 && key(s[i - 1]) >= key(s[i]) {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while key(s[j]) <= key(s[i - 1]) {
            j -= 1;
        }
        s.swap(i - 1, j);
        s[i..].reverse();
        true
    }
}

impl Iterator for PathIter {
    type Item = Vec<Plaquette>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let path = self.current();
        self.done = !self.advance();
        Some(path)
    }
}

pub fn enumerate_paths(params: CodeParams, rect: SearchRectangle) -> PathIter {
    let mut steps = vec![true; rect.dr.unsigned_abs() as usize];
    steps.extend(std::iter::repeat_n(false, rect.dc.unsigned_abs() as usize));
    PathIter { params, rect, steps, done: false }
}

/// Runs levels `(1,0)` through `depth` over the syndrome and returns the
/// residual syndrome together with the correction applied so far.
pub fn init_step(w: &SyndromeSet, depth: RegionParams) -> (SyndromeSet, ErrorConfig) {
    let params = w.params();
    let d = params.d() as u64;
    let mut grid = w.to_dense();
    let mut acc = ErrorConfig::zeros(params);
    let mut rp = RegionParams::new(1, 0).expect("valid region");
    let mut path_charges: Vec<(Plaquette, u32)> = Vec::new();
    while rp <= depth {
        let layer = outer_layer(rp);
        for idx in 0..params.num_plaquettes() {
            let u = params.plaquette_at(idx);
            'offsets: for &(dr, dc) in &layer {
                let rect = SearchRectangle { corner: u, dr, dc };
                for path in enumerate_paths(params, rect) {
                    path_charges.clear();
                    path_charges.extend(path.iter().map(|&x| (x, grid[params.plaquette_index(x)])));
                    let sum = path_charges.iter().map(|&(_, c)| c as u64).sum::<u64>() % d;
                    if sum != 0 || path_charges.iter().all(|&(_, c)| c == 0) {
                        continue;
                    }
                    let mut carried = 0u64;
                    for pair in path_charges.windows(2) {
                        carried = (carried + pair[0].1 as u64) % d;
                        acc.transport_residual(pair[0].0, pair[1].0, carried as u32);
                    }
                    for &(x, _) in &path_charges {
                        grid[params.plaquette_index(x)] = 0;
                    }
                    break 'offsets;
                }
            }
        }
        rp = rp.next();
    }
    (SyndromeSet::from_dense(params, &grid), acc)
}

/// Initialization to `depth` followed by HDRG on what is left. `None` skips
/// the initialization and is plain HDRG.
pub fn enhanced_hdrg_decode(w: &SyndromeSet, depth: Option<RegionParams>) -> Result<ErrorConfig, DecodeError> {
    let Some(depth) = depth else {
        return hdrg_decode(w);
    };
    let (residual, mut acc) = init_step(w, depth);
    let rest = hdrg_decode(&residual)?;
    acc.add_assign(&rest)?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{adjacent_step, compute_syndrome, sample_errors, NoiseParams};

    fn params(d: u32, l: usize) -> CodeParams {
        CodeParams::new(d, l).unwrap()
    }

    fn rp(r: usize, s: usize) -> RegionParams {
        RegionParams::new(r, s).unwrap()
    }

    #[test]
    fn q_set_examples() {
        assert_eq!(q_set(rp(1, 0)).offsets, vec![(-1, 0), (0, -1), (0, 1), (1, 0)]);
        assert_eq!(q_set(rp(1, 1)).offsets, vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]);
        let mut q = q_set(rp(2, 1)).offsets;
        q.sort();
        assert_eq!(q, vec![(-2, -1), (-2, 1), (-1, -2), (-1, 2), (1, -2), (1, 2), (2, -1), (2, 1)]);
    }

    #[test]
    fn path_examples() {
        let p = params(3, 8);
        let u = Plaquette::new(3, 3);
        let paths: Vec<_> = enumerate_paths(p, SearchRectangle { corner: u, dr: 1, dc: 0 }).collect();
        assert_eq!(paths, vec![vec![u, Plaquette::new(4, 3)]]);
        assert_eq!(enumerate_paths(p, SearchRectangle { corner: u, dr: 1, dc: 1 }).count(), 2);
        let paths: Vec<_> = enumerate_paths(p, SearchRectangle { corner: u, dr: 2, dc: -1 }).collect();
        assert_eq!(paths.len(), 3);
        assert!(paths.iter().all(|x| x.len() == 4));
        // Row steps first.
        assert_eq!(paths[0], vec![u, Plaquette::new(4, 3), Plaquette::new(5, 3), Plaquette::new(5, 2)]);
        assert_eq!(paths[2], vec![u, Plaquette::new(3, 2), Plaquette::new(4, 2), Plaquette::new(5, 2)]);
    }

    #[test]
    fn path_counts_and_shapes() {
        let p = params(5, 20);
        let u = Plaquette::new(18, 1);
        for a in -8i64..=8 {
            for b in -8i64..=8 {
                if a.abs() + b.abs() > 8 {
                    continue;
                }
                let rect = SearchRectangle { corner: u, dr: a, dc: b };
                let paths: Vec<_> = enumerate_paths(p, rect).collect();
                assert_eq!(paths.len() as u64, rect.path_count(), "({a},{b})");
                let mut unique = paths.clone();
                unique.sort();
                unique.dedup();
                assert_eq!(unique.len(), paths.len());
                let end = p.offset(u, a, b);
                for path in &paths {
                    assert_eq!(path.len(), rect.path_len());
                    assert_eq!((path[0], *path.last().unwrap()), (u, end));
                    assert!(path.windows(2).all(|w| adjacent_step(p, w[0], w[1]).is_some()));
                }
            }
        }
    }

    #[test]
    fn init_examples() {
        let p = params(5, 8);
        let w = SyndromeSet::from_entries(p, [(Plaquette::new(2, 2), 2), (Plaquette::new(2, 3), 3)]).unwrap();
        let (rest, acc) = init_step(&w, rp(1, 0));
        assert!(rest.is_empty());
        assert_eq!(compute_syndrome(&acc), w);

        let w = SyndromeSet::from_entries(p, [(Plaquette::new(2, 2), 2)]).unwrap();
        let (rest, acc) = init_step(&w, rp(2, 1));
        assert_eq!(rest, w);
        assert!(acc.is_zero());
    }

    #[test]
    fn init_thins_dense_qubit_syndromes() {
        let p = params(2, 32);
        let noise = NoiseParams::new(0.5).unwrap();
        for seed in 0..100 {
            let w = compute_syndrome(&sample_errors(p, noise, seed));
            let (rest, _) = init_step(&w, rp(1, 0));
            assert!(rest.len() < w.len());
        }
    }

    #[test]
    fn init_keeps_charge_and_residual_consistent() {
        for (d, seed) in [(3u32, 1u64), (5, 2), (7, 3), (101, 4)] {
            let p = params(d, 16);
            for k in 0..30 {
                let w = compute_syndrome(&sample_errors(p, NoiseParams::new(0.2).unwrap(), seed * 100 + k));
                let (rest, acc) = init_step(&w, rp(2, 1));
                assert!(rest.len() <= w.len());
                assert_eq!(rest.total_charge(), w.total_charge());
                // What the correction explains plus what is left is the input.
                let explained = compute_syndrome(&acc).to_dense();
                let sum: Vec<u32> = explained.iter().zip(rest.to_dense()).map(|(a, b)| (a + b) % d).collect();
                assert_eq!(sum, w.to_dense());
            }
        }
    }

    #[test]
    fn no_depth_is_plain_hdrg() {
        let p = params(3, 16);
        for seed in 0..20 {
            let w = compute_syndrome(&sample_errors(p, NoiseParams::new(0.1).unwrap(), seed));
            assert_eq!(enhanced_hdrg_decode(&w, None).unwrap(), hdrg_decode(&w).unwrap());
        }
        assert!(enhanced_hdrg_decode(&SyndromeSet::empty(p), Some(rp(2, 1))).unwrap().is_zero());
    }
}
