//! Hard-decisions renormalization-group decoder.
//!
//! Level `l` connects two charges when their minimum-image offset lies in the
//! region `R(r, s)`: taxi-cab distance at most `r + s` and max distance at most
//! `r`. Each level clusters the surviving charges, annihilates the neutral
//! clusters locally and hands the charged ones to the next, larger, level.

use serde::Serialize;

use crate::dsu::DisjointSet;
use crate::error::DecodeError;
use crate::lattice::{CodeParams, ErrorConfig, Plaquette, SyndromeSet};

/// Region radii with `r >= 1` and `s <= r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RegionParams {
    r: usize,
    s: usize,
}

impl RegionParams {
    pub fn new(r: usize, s: usize) -> Result<Self, DecodeError> {
        if r == 0 || s > r {
            return Err(DecodeError::InvalidRegion { r, s });
        }
        Ok(Self { r, s })
    }

    #[inline]
    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn s(&self) -> usize {
        self.s
    }

    /// Position of this region in the level schedule, starting at 1.
    #[inline]
    pub fn level(&self) -> usize {
        self.r * (self.r + 1) / 2 + self.s
    }

    /// Whether offset `(dr, dc)` lies in the region.
    #[inline]
    pub fn contains(&self, dr: i64, dc: i64) -> bool {
        let (a, b) = (dr.unsigned_abs() as usize, dc.unsigned_abs() as usize);
        a.max(b) <= self.r && a + b <= self.r + self.s
    }

    /// The region at the next level: grow `s`, or grow `r` and reset `s`.
    pub fn next(&self) -> Self {
        if self.s < self.r {
            Self { r: self.r, s: self.s + 1 }
        } else {
            Self { r: self.r + 1, s: 0 }
        }
    }
}

/// All nonzero offsets of `R(r, s)`, sorted lexicographically.
pub fn region_offsets(rp: RegionParams) -> Vec<(i64, i64)> {
    let r = rp.r as i64;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if (dr, dc) != (0, 0) && rp.contains(dr, dc) {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// The `l`-th region of the schedule `(1,0), (1,1), (2,0), (2,1), (2,2), ...`.
pub fn level_params(l: usize) -> Result<RegionParams, DecodeError> {
    if l == 0 {
        return Err(DecodeError::InvalidRegion { r: 0, s: 0 });
    }
    let mut rp = RegionParams { r: 1, s: 0 };
    for _ in 1..l {
        rp = rp.next();
    }
    Ok(rp)
}

/// The smallest region containing a nonzero offset. For `(dr, dc)` that is
/// `(max(|dr|,|dc|), min(|dr|,|dc|))`.
#[inline]
pub fn first_region(dr: i64, dc: i64) -> RegionParams {
    let (a, b) = (dr.unsigned_abs() as usize, dc.unsigned_abs() as usize);
    RegionParams { r: a.max(b), s: a.min(b) }
}

/// Offsets that belong to `R(r, s)` but not to the previous region of the
/// schedule. They have 4 or 8 elements, sorted lexicographically.
pub fn outer_layer(rp: RegionParams) -> Vec<(i64, i64)> {
    region_offsets(rp)
        .into_iter()
        .filter(|&(dr, dc)| first_region(dr, dc) == rp)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    pub members: Vec<(Plaquette, u32)>,
    pub total_charge: u32,
}

impl Cluster {
    pub fn new(d: u32, mut members: Vec<(Plaquette, u32)>) -> Self {
        members.sort_unstable();
        let total_charge = (members.iter().map(|&(_, c)| c as u64).sum::<u64>() % d as u64) as u32;
        Self { members, total_charge }
    }

    pub fn is_neutral(&self) -> bool {
        self.total_charge == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub clusters: Vec<Cluster>,
    pub level: RegionParams,
}

/// Connected components of the charges under `(r, s)`-connectivity with
/// toroidal wrap. Clusters are ordered by their first member.
pub fn partition(w: &SyndromeSet, rp: RegionParams) -> Partition {
    let params = w.params();
    let entries = w.entries();
    let n = entries.len();
    let mut ds = DisjointSet::new(n);
    let offsets = region_offsets(rp);
    if offsets.len() < n {
        let mut grid = vec![u32::MAX; params.num_plaquettes()];
        for (i, &(pos, _)) in entries.iter().enumerate() {
            grid[params.plaquette_index(pos)] = i as u32;
        }
        for (i, &(pos, _)) in entries.iter().enumerate() {
            for &(dr, dc) in &offsets {
                let j = grid[params.plaquette_index(params.offset(pos, dr, dc))];
                if j != u32::MAX {
                    ds.union(i, j as usize);
                }
            }
        }
    } else {
        for i in 0..n {
            for j in (i + 1)..n {
                let (dr, dc) = params.displacement(entries[i].0, entries[j].0);
                if rp.contains(dr, dc) {
                    ds.union(i, j);
                }
            }
        }
    }
    let mut by_root: Vec<Vec<(Plaquette, u32)>> = vec![Vec::new(); n];
    for (i, &entry) in entries.iter().enumerate() {
        by_root[ds.find(i)].push(entry);
    }
    let mut clusters: Vec<Cluster> = by_root
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| Cluster::new(params.d(), m))
        .collect();
    clusters.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    Partition { clusters, level: rp }
}

/// Fuses the charges of a neutral cluster: members in row-major order, each
/// accumulated charge carried to the next member along a row-first staircase.
pub fn annihilate_neutral(cluster: &Cluster, acc: &mut ErrorConfig) -> Result<(), DecodeError> {
    if !cluster.is_neutral() {
        return Err(DecodeError::ChargedCluster(cluster.total_charge));
    }
    let mut members = cluster.members.clone();
    members.sort_unstable();
    fuse_along(&members, acc);
    Ok(())
}

/// Carries the running charge sum from each element to the next.
pub(crate) fn fuse_along(members: &[(Plaquette, u32)], acc: &mut ErrorConfig) {
    let d = acc.params().d() as u64;
    let mut carried = 0u64;
    for pair in members.windows(2) {
        carried = (carried + pair[0].1 as u64) % d;
        acc.transport_residual(pair[0].0, pair[1].0, carried as u32);
    }
}

/// One level of a decode trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceLevel {
    pub level: usize,
    pub region: RegionParams,
    pub clusters: Vec<Cluster>,
    pub annihilated: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct HdrgTrace {
    pub levels: Vec<TraceLevel>,
}

/// Below this many surviving charges the decoder jumps straight to the next
/// level at which two clusters touch instead of scanning every level.
const PAIRWISE_LIMIT: usize = 192;

/// Surviving charges with the clusters they have been merged into so far.
/// Charged clusters are carried to the next level intact, so connectivity at
/// a level is the union of all regions up to it.
struct LevelState {
    params: CodeParams,
    entries: Vec<(Plaquette, u32)>,
    alive: Vec<bool>,
    alive_count: usize,
    grid: Vec<u32>,
    ds: DisjointSet,
    members: Vec<Vec<u32>>,
    charge: Vec<u64>,
}

impl LevelState {
    fn new(w: &SyndromeSet) -> Self {
        let params = w.params();
        let entries = w.entries().to_vec();
        let n = entries.len();
        let mut grid = vec![u32::MAX; params.num_plaquettes()];
        for (i, &(pos, _)) in entries.iter().enumerate() {
            grid[params.plaquette_index(pos)] = i as u32;
        }
        Self {
            params,
            charge: entries.iter().map(|&(_, c)| c as u64).collect(),
            members: (0..n as u32).map(|i| vec![i]).collect(),
            alive: vec![true; n],
            alive_count: n,
            grid,
            ds: DisjointSet::new(n),
            entries,
        }
    }

    fn union(&mut self, a: usize, b: usize, touched: &mut Vec<usize>) {
        let (ra, rb) = (self.ds.find(a), self.ds.find(b));
        if let Some(root) = self.ds.union(ra, rb) {
            let other = if root == ra { rb } else { ra };
            let moved = std::mem::take(&mut self.members[other]);
            self.members[root].extend(moved);
            self.charge[root] = (self.charge[root] + self.charge[other]) % self.params.d() as u64;
            touched.push(root);
        }
    }

    fn alive_ids(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.alive[i]).collect()
    }

    fn snapshot(&mut self) -> Vec<Cluster> {
        let mut roots: Vec<usize> = self.alive_ids().into_iter().map(|i| self.ds.find(i)).collect();
        roots.sort_unstable();
        roots.dedup();
        let mut clusters: Vec<Cluster> = roots
            .into_iter()
            .map(|r| {
                let m = self.members[r].iter().map(|&i| self.entries[i as usize]).collect();
                Cluster::new(self.params.d(), m)
            })
            .collect();
        clusters.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
        clusters
    }

    /// Annihilates every neutral cluster among `touched`; returns how many.
    fn annihilate(&mut self, touched: &mut Vec<usize>, acc: &mut ErrorConfig) -> usize {
        let mut count = 0;
        touched.sort_unstable();
        touched.dedup();
        for &t in touched.iter() {
            let root = self.ds.find(t);
            if root != t || self.charge[root] != 0 || !self.alive[root] {
                continue;
            }
            let mut ids = std::mem::take(&mut self.members[root]);
            ids.sort_unstable_by_key(|&i| self.entries[i as usize].0);
            let cluster: Vec<(Plaquette, u32)> = ids.iter().map(|&i| self.entries[i as usize]).collect();
            fuse_along(&cluster, acc);
            for &i in &ids {
                let i = i as usize;
                self.alive[i] = false;
                self.grid[self.params.plaquette_index(self.entries[i].0)] = u32::MAX;
            }
            self.alive_count -= ids.len();
            count += 1;
        }
        touched.clear();
        count
    }
}

/// Decodes a neutral syndrome set.
pub fn hdrg_decode(w: &SyndromeSet) -> Result<ErrorConfig, DecodeError> {
    decode_impl(w, None)
}

/// Like [`hdrg_decode`] but also records the clusters of every level at which
/// two clusters merged.
pub fn hdrg_decode_traced(w: &SyndromeSet) -> Result<(ErrorConfig, HdrgTrace), DecodeError> {
    let mut trace = HdrgTrace::default();
    let correction = decode_impl(w, Some(&mut trace))?;
    Ok((correction, trace))
}

fn decode_impl(w: &SyndromeSet, mut trace: Option<&mut HdrgTrace>) -> Result<ErrorConfig, DecodeError> {
    let params = w.params();
    let mut acc = ErrorConfig::zeros(params);
    let total = w.total_charge();
    if total != 0 {
        return Err(DecodeError::ChargedCluster(total));
    }
    let mut st = LevelState::new(w);
    let mut touched: Vec<usize> = Vec::new();
    let mut rp = RegionParams { r: 1, s: 0 };

    while st.alive_count > 0 {
        if st.alive_count <= PAIRWISE_LIMIT && rp.level() > 1 {
            // Nothing changes until two distinct clusters first connect.
            let ids = st.alive_ids();
            let roots: Vec<usize> = ids.iter().map(|&i| st.ds.find(i)).collect();
            let mut best: Option<RegionParams> = None;
            for (k, &i) in ids.iter().enumerate() {
                for (&j, &rj) in ids[k + 1..].iter().zip(&roots[k + 1..]) {
                    if rj == roots[k] {
                        continue;
                    }
                    let (dr, dc) = params.displacement(st.entries[i].0, st.entries[j].0);
                    let f = first_region(dr, dc);
                    if best.is_none_or(|b| f.level() < b.level()) {
                        best = Some(f);
                    }
                }
            }
            let target = best.expect("a single surviving cluster is neutral");
            rp = rp.max(target);
            for (k, &i) in ids.iter().enumerate() {
                for &j in &ids[k + 1..] {
                    let (dr, dc) = params.displacement(st.entries[i].0, st.entries[j].0);
                    if first_region(dr, dc) == rp {
                        st.union(i, j, &mut touched);
                    }
                }
            }
        } else {
            let layer = outer_layer(rp);
            for i in st.alive_ids() {
                let pos = st.entries[i].0;
                for &(dr, dc) in &layer {
                    let j = st.grid[params.plaquette_index(params.offset(pos, dr, dc))];
                    if j != u32::MAX {
                        st.union(i, j as usize, &mut touched);
                    }
                }
            }
        }
        let snapshot = match trace {
            Some(_) if !touched.is_empty() => Some(st.snapshot()),
            _ => None,
        };
        let annihilated = st.annihilate(&mut touched, &mut acc);
        if let (Some(t), Some(clusters)) = (trace.as_deref_mut(), snapshot) {
            t.levels.push(TraceLevel { level: rp.level(), region: rp, clusters, annihilated });
        }
        rp = rp.next();
    }
    Ok(acc)
}
