//! Soft-decisions renormalization-group decoder with five-edge cells.
//!
//! Every level pairs neighbouring faces into cells. A cell moves the charge of
//! one face (`a`) onto its partner (`b`), sums the class probabilities of the
//! configurations consistent with `a`, and passes the marginals on as priors
//! of the two coarse edges. Even levels pair faces along rows, odd levels
//! along columns; an odd level is handled as an even one on the transposed
//! grid.
//!
//! Cell slots, for the cell whose faces are `b = (r, 2k)` and `a = (r, 2k+1)`:
//!
//! | slot | edge            | role                                  |
//! |------|-----------------|---------------------------------------|
//! | 1    | `v(r, 2k+2)`    | from `a` to the next cell's `b`       |
//! | 2    | `h(r+1, 2k+1)`  | above `a`, shared with the cell above |
//! | 3    | `h(r, 2k+1)`    | below `a`, shared with the cell below |
//! | 4    | `v(r, 2k+1)`    | from `b` to `a`                       |
//! | 5    | `h(r+1, 2k)`    | from `b` to the cell above's `b`      |

use serde::Serialize;

use crate::error::DecodeError;
use crate::lattice::{ErrorConfig, NoiseParams, SyndromeSet};

const NORM_TOL: f64 = 1e-9;

/// A probability distribution over `Z_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dist(Vec<f64>);

impl Dist {
    pub fn new(values: Vec<f64>) -> Result<Self, DecodeError> {
        let sum: f64 = values.iter().sum();
        if values.is_empty() || values.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > NORM_TOL {
            return Err(DecodeError::Unnormalized { sum });
        }
        Ok(Self(values))
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn point(d: usize, k: usize) -> Self {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        Self(v)
    }

    /// Level-0 prior of the independent noise model.
    pub fn noise_prior(d: usize, noise: NoiseParams) -> Self {
        let p = noise.p();
        let mut v = vec![p / (d - 1) as f64; d];
        v[0] = 1.0 - p;
        Self(v)
    }

    /// Normalizes non-negative weights; an all-zero vector becomes uniform.
    pub fn from_weights(mut v: Vec<f64>) -> Self {
        let sum: f64 = v.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            v.iter_mut().for_each(|x| *x /= sum);
            Self(v)
        } else {
            Self::uniform(v.len())
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most likely value; ties go to the smallest.
    pub fn argmax(&self) -> u32 {
        let mut best = 0;
        for (k, &x) in self.0.iter().enumerate() {
            if x > self.0[best] {
                best = k;
            }
        }
        best as u32
    }

    #[cfg(test)]
    fn l1_distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// `c(x) = sum_y f(y) g(x - y)` over `Z_d`.
fn cyclic_conv(f: &[f64], g: &[f64]) -> Vec<f64> {
    let d = f.len();
    let mut out = vec![0.0; d];
    for (y, &fy) in f.iter().enumerate() {
        if fy == 0.0 {
            continue;
        }
        for (x, o) in out.iter_mut().enumerate() {
            *o += fy * g[(x + d - y) % d];
        }
    }
    out
}

fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// The coarse-graining move `t`, the crossings `l1`, `l2` and the gauge
/// stabilizers `s1`, `s2` of a cell, as vectors over the five slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellBasis {
    d: u32,
    rows: [[u32; 5]; 5],
    inverse: [[u32; 5]; 5],
}

impl CellBasis {
    pub fn new(d: u32) -> Result<Self, DecodeError> {
        let m = d - 1;
        let rows = [
            [0, 0, 0, 1, 0],
            [1, 0, 0, 1, 0],
            [0, 0, 0, 0, 1],
            [0, 1, 0, 1, m],
            [0, 0, 1, m, 0],
        ];
        let inverse = invert_mod(rows, d).ok_or(DecodeError::Lattice(crate::LatticeError::NotPrime(d as u64)))?;
        Ok(Self { d, rows, inverse })
    }

    pub fn t(&self) -> [u32; 5] {
        self.rows[0]
    }
    pub fn l1(&self) -> [u32; 5] {
        self.rows[1]
    }
    pub fn l2(&self) -> [u32; 5] {
        self.rows[2]
    }
    pub fn s1(&self) -> [u32; 5] {
        self.rows[3]
    }
    pub fn s2(&self) -> [u32; 5] {
        self.rows[4]
    }

    /// `coef[0] t + coef[1] l1 + coef[2] l2 + coef[3] s1 + coef[4] s2`.
    pub fn combine(&self, coef: [u32; 5]) -> [u32; 5] {
        let d = self.d as u64;
        let mut out = [0u32; 5];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..5).map(|i| coef[i] as u64 * self.rows[i][j] as u64).sum::<u64>().rem_euclid(d) as u32;
        }
        out
    }

    /// Coefficients `(a, h1, h2, mu, nu)` of a configuration in the basis.
    pub fn coordinates(&self, e: [u32; 5]) -> [u32; 5] {
        let d = self.d as u64;
        let mut out = [0u32; 5];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..5).map(|i| e[i] as u64 * self.inverse[i][j] as u64).sum::<u64>().rem_euclid(d) as u32;
        }
        out
    }
}

/// Inverse of a 5x5 matrix over `Z_d` by Gauss-Jordan elimination, or `None`
/// if it is singular (or `d` is not prime).
fn invert_mod(m: [[u32; 5]; 5], d: u32) -> Option<[[u32; 5]; 5]> {
    let p = d as u64;
    let mut a: Vec<Vec<u64>> = (0..5)
        .map(|i| {
            let mut row: Vec<u64> = m[i].iter().map(|&x| x as u64 % p).collect();
            row.extend((0..5).map(|j| u64::from(i == j)));
            row
        })
        .collect();
    for col in 0..5 {
        let pivot = (col..5).find(|&r| a[r][col] != 0)?;
        a.swap(col, pivot);
        let inv = mod_pow(a[col][col], p - 2, p);
        if a[col][col] * inv % p != 1 {
            return None;
        }
        for x in a[col].iter_mut() {
            *x = *x * inv % p;
        }
        for r in 0..5 {
            if r != col && a[r][col] != 0 {
                let f = a[r][col];
                for c in 0..10 {
                    a[r][c] = (a[r][c] + p * p - f * a[col][c] % p) % p;
                }
            }
        }
    }
    let mut out = [[0u32; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            out[i][j] = a[i][5 + j] as u32;
        }
    }
    Some(out)
}

/// Probabilities of the `d x d` cell classes `(h1, h2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassTable {
    d: usize,
    probs: Vec<f64>,
}

impl ClassTable {
    pub fn new(d: usize, probs: Vec<f64>) -> Result<Self, DecodeError> {
        if probs.len() != d * d {
            return Err(DecodeError::WrongDistLength { expected: d * d, found: probs.len() });
        }
        Dist::new(probs.clone())?;
        Ok(Self { d, probs })
    }

    pub fn from_weights(d: usize, weights: Vec<f64>) -> Self {
        Self { d, probs: Dist::from_weights(weights).0 }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, h1: usize, h2: usize) -> f64 {
        self.probs[h1 * self.d + h2]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Priors of a cell's five slots, incoming messages on slots 2 and 3, and
/// the charge `a` of the face being moved.
#[derive(Debug, Clone, Copy)]
pub struct CellInputs<'a> {
    pub p1: &'a Dist,
    pub p2: &'a Dist,
    pub p3: &'a Dist,
    pub p4: &'a Dist,
    pub p5: &'a Dist,
    pub q_l: &'a Dist,
    pub q_r: &'a Dist,
    pub a: u32,
}

impl CellInputs<'_> {
    fn check(&self) -> Result<usize, DecodeError> {
        let d = self.p1.len();
        for x in [self.p2, self.p3, self.p4, self.p5, self.q_l, self.q_r] {
            if x.len() != d {
                return Err(DecodeError::WrongDistLength { expected: d, found: x.len() });
            }
        }
        Ok(d)
    }
}

/// Class probabilities of a cell. With the configuration
/// `a t + h1 l1 + h2 l2 + mu s1 + nu s2` the slot values are
/// `(h1, mu, nu, a + h1 + mu - nu, h2 - mu)`, so summing over `nu` first
/// leaves a convolution of `q_r` with `p4`.
pub fn cell_class_probs(c: &CellInputs) -> Result<ClassTable, DecodeError> {
    let d = c.check()?;
    let a = c.a as usize % d;
    let (p1, p4, p5, ql) = (c.p1.values(), c.p4.values(), c.p5.values(), c.q_l.values());
    let conv = cyclic_conv(c.q_r.values(), p4);
    let mut w = vec![0.0; d * d];
    for h1 in 0..d {
        if p1[h1] == 0.0 {
            continue;
        }
        for mu in 0..d {
            let f = p1[h1] * ql[mu] * conv[(a + h1 + mu) % d];
            if f == 0.0 {
                continue;
            }
            for h2 in 0..d {
                w[h1 * d + h2] += f * p5[(h2 + d - mu) % d];
            }
        }
    }
    Ok(ClassTable::from_weights(d, w))
}

/// Marginals of a class table: the priors of the two coarse edges.
pub fn cell_marginals(ct: &ClassTable) -> (Dist, Dist) {
    let d = ct.d;
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for h1 in 0..d {
        for h2 in 0..d {
            let x = ct.get(h1, h2);
            m1[h1] += x;
            m2[h2] += x;
        }
    }
    (Dist::from_weights(m1), Dist::from_weights(m2))
}

/// Messages `(L, R)` sent over slots 2 and 3. `L` never sees `q_l` and `R`
/// never sees `q_r`, so a cell does not echo what it was told.
pub fn compute_messages(c: &CellInputs) -> Result<(Dist, Dist), DecodeError> {
    let d = c.check()?;
    let a = c.a as usize % d;
    let (p1, p2, p3, p4) = (c.p1.values(), c.p2.values(), c.p3.values(), c.p4.values());
    // The h2 sum only touches p5 and gives 1.
    let conv_r = cyclic_conv(c.q_r.values(), p4);
    let mut left = vec![0.0; d];
    for (e2, l) in left.iter_mut().enumerate() {
        *l = p2[e2] * (0..d).map(|h1| p1[h1] * conv_r[(a + h1 + e2) % d]).sum::<f64>();
    }
    let pair = cyclic_conv(p1, c.q_l.values());
    let mut right = vec![0.0; d];
    for (e3, r) in right.iter_mut().enumerate() {
        *r = p3[e3] * (0..d).map(|y| pair[y] * p4[(a + y + d - e3) % d]).sum::<f64>();
    }
    Ok((Dist::from_weights(left), Dist::from_weights(right)))
}

/// Class table of the last cell, where slots 2 and 3 are one edge that loops
/// back to `a`. Its value `x` and slot 5 together carry `h2`, and slot 4
/// carries `a + h1`.
fn final_cell_class_probs(p1: &Dist, p4: &Dist, p_loop: &Dist, p5: &Dist, a: u32) -> ClassTable {
    let d = p1.len();
    let a = a as usize % d;
    let loops = cyclic_conv(p_loop.values(), p5.values());
    let mut w = vec![0.0; d * d];
    for h1 in 0..d {
        let f = p1.values()[h1] * p4.values()[(a + h1) % d];
        for h2 in 0..d {
            w[h1 * d + h2] = f * loops[h2];
        }
    }
    ClassTable::from_weights(d, w)
}

/// Sparse chain over physical edges.
pub type Chain = Vec<(u32, u32)>;

/// One level of the hierarchy. Edges are stored like physical ones: `h`
/// edges first, then `v` edges, each row-major.
#[derive(Debug, Clone)]
pub struct RGLevel {
    lambda: usize,
    rows: usize,
    cols: usize,
    d: usize,
    priors: Vec<Dist>,
    syndromes: Vec<u32>,
    edge_chain_map: Vec<Chain>,
}

/// Incoming messages per cell, in cell order of the level's merge frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    pub q_l: Vec<Dist>,
    pub q_r: Vec<Dist>,
}

/// Index arithmetic for a level seen with rows merged into columns (the
/// transposed view) or as stored. Cells always pair faces `(r, 2k)` and
/// `(r, 2k+1)` of the view.
#[derive(Clone, Copy)]
struct View {
    transposed: bool,
    rows: usize,
    cols: usize,
    stored_cols: usize,
    stored_faces: usize,
}

impl View {
    fn of(rows: usize, cols: usize, transposed: bool) -> Self {
        let (vr, vc) = if transposed { (cols, rows) } else { (rows, cols) };
        Self { transposed, rows: vr, cols: vc, stored_cols: cols, stored_faces: rows * cols }
    }

    #[inline]
    fn face(&self, r: usize, c: usize) -> usize {
        let (r, c) = (r % self.rows, c % self.cols);
        if self.transposed {
            c * self.stored_cols + r
        } else {
            r * self.stored_cols + c
        }
    }

    #[inline]
    fn h(&self, r: usize, c: usize) -> usize {
        let f = self.face(r, c);
        if self.transposed {
            self.stored_faces + f
        } else {
            f
        }
    }

    #[inline]
    fn v(&self, r: usize, c: usize) -> usize {
        let f = self.face(r, c);
        if self.transposed {
            f
        } else {
            self.stored_faces + f
        }
    }

    fn cells(&self) -> usize {
        self.rows * self.cols / 2
    }

    /// Edges of slots 1..=5 of cell `(r, k)`.
    fn slots(&self, r: usize, k: usize) -> [usize; 5] {
        [
            self.v(r, 2 * k + 2),
            self.h(r + 1, 2 * k + 1),
            self.h(r, 2 * k + 1),
            self.v(r, 2 * k + 1),
            self.h(r + 1, 2 * k),
        ]
    }
}

/// Largest scratch the per-cell class enumeration may claim, in bytes of a
/// `d^4` table of doubles.
const MAX_CELL_TABLE_BYTES: u128 = 1 << 33;

impl RGLevel {
    /// Level 0: the measured syndrome, noise-model priors and identity chains.
    pub fn initial(w: &SyndromeSet, noise: NoiseParams) -> Result<Self, DecodeError> {
        let params = w.params();
        let l = params.l();
        if !l.is_power_of_two() {
            return Err(DecodeError::NotPowerOfTwo(l));
        }
        let d = params.d() as usize;
        let bytes = (d as u128).pow(4) * 8;
        if bytes > MAX_CELL_TABLE_BYTES {
            return Err(DecodeError::TooLarge { d: d as u32, bytes, limit: MAX_CELL_TABLE_BYTES });
        }
        let prior = Dist::noise_prior(d, noise);
        Ok(Self {
            lambda: 0,
            rows: l,
            cols: l,
            d,
            priors: vec![prior; params.num_edges()],
            syndromes: w.to_dense(),
            edge_chain_map: (0..params.num_edges() as u32).map(|e| vec![(e, 1)]).collect(),
        })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn priors(&self) -> &[Dist] {
        &self.priors
    }

    pub fn syndromes(&self) -> &[u32] {
        &self.syndromes
    }

    pub fn edge_chain_map(&self) -> &[Chain] {
        &self.edge_chain_map
    }

    pub fn is_final(&self) -> bool {
        self.rows * self.cols == 1
    }

    fn view(&self) -> View {
        View::of(self.rows, self.cols, self.lambda % 2 == 1)
    }

    fn cell_coords(&self, view: &View, idx: usize) -> (usize, usize) {
        let half = view.cols / 2;
        (idx / half, idx % half)
    }

    /// Whether slots 2 and 3 of every cell are the same edge.
    fn degenerate(&self) -> bool {
        self.view().rows == 1
    }

    fn inputs<'a>(&'a self, slots: &[usize; 5], msgs: &'a Messages, idx: usize, a: u32) -> CellInputs<'a> {
        CellInputs {
            p1: &self.priors[slots[0]],
            p2: &self.priors[slots[1]],
            p3: &self.priors[slots[2]],
            p4: &self.priors[slots[3]],
            p5: &self.priors[slots[4]],
            q_l: &msgs.q_l[idx],
            q_r: &msgs.q_r[idx],
            a,
        }
    }

    pub fn uniform_messages(&self) -> Messages {
        let n = self.view().cells();
        Messages { q_l: vec![Dist::uniform(self.d); n], q_r: vec![Dist::uniform(self.d); n] }
    }

    /// One synchronous round: every cell computes its outgoing pair from the
    /// current messages, then all cells take their new inputs at once.
    pub fn bp_round(&self, msgs: &Messages) -> Result<Messages, DecodeError> {
        let view = self.view();
        let n = view.cells();
        let half = view.cols / 2;
        let mut outgoing = Vec::with_capacity(n);
        for idx in 0..n {
            let (r, k) = self.cell_coords(&view, idx);
            let slots = view.slots(r, k);
            let a = self.syndromes[view.face(r, 2 * k + 1)];
            outgoing.push(compute_messages(&self.inputs(&slots, msgs, idx, a))?);
        }
        let mut next = msgs.clone();
        for idx in 0..n {
            let (r, k) = self.cell_coords(&view, idx);
            let above = ((r + 1) % view.rows) * half + k;
            let below = ((r + view.rows - 1) % view.rows) * half + k;
            next.q_l[idx] = outgoing[above].1.clone();
            next.q_r[idx] = outgoing[below].0.clone();
        }
        Ok(next)
    }

    /// Runs `rounds` rounds from uniform messages. The last level has a
    /// single cell whose two shared slots coincide, so it exchanges nothing.
    pub fn bp_rounds(&self, rounds: usize) -> Result<Messages, DecodeError> {
        let mut msgs = self.uniform_messages();
        if self.degenerate() {
            return Ok(msgs);
        }
        for _ in 0..rounds {
            msgs = self.bp_round(&msgs)?;
        }
        Ok(msgs)
    }

    /// Merges every cell, adding the transport of each moved charge to `acc`.
    /// Returns the next level and the class table of every cell.
    pub fn coarse_grain(&self, msgs: &Messages, acc: &mut ErrorConfig) -> Result<(RGLevel, Vec<ClassTable>), DecodeError> {
        let view = self.view();
        let d = self.d;
        let (rows, cols) = if view.transposed { (self.rows / 2, self.cols) } else { (self.rows, self.cols / 2) };
        let faces = rows * cols;
        let mut next = RGLevel {
            lambda: self.lambda + 1,
            rows,
            cols,
            d,
            priors: vec![Dist::uniform(d); 2 * faces],
            syndromes: vec![0; faces],
            edge_chain_map: vec![Vec::new(); 2 * faces],
        };
        let coarse = View::of(rows, cols, view.transposed);
        let degenerate = self.degenerate();
        let mut tables = Vec::with_capacity(view.cells());
        for idx in 0..view.cells() {
            let (r, k) = self.cell_coords(&view, idx);
            let slots = view.slots(r, k);
            let a = self.syndromes[view.face(r, 2 * k + 1)];
            let b = self.syndromes[view.face(r, 2 * k)];
            let table = if degenerate {
                let p = &self.priors;
                final_cell_class_probs(&p[slots[0]], &p[slots[3]], &p[slots[1]], &p[slots[4]], a)
            } else {
                cell_class_probs(&self.inputs(&slots, msgs, idx, a))?
            };
            let (m1, m2) = cell_marginals(&table);
            tables.push(table);

            if a != 0 {
                for &(e, coef) in &self.edge_chain_map[slots[3]] {
                    acc.add_to_edge(e as usize, ((coef as u64 * a as u64) % d as u64) as u32);
                }
            }
            next.syndromes[coarse.face(r, k)] = ((a as u64 + b as u64) % d as u64) as u32;
            let e1 = coarse.v(r, k + 1);
            let e2 = coarse.h(r + 1, k);
            next.priors[e1] = m1;
            next.priors[e2] = m2;
            let mut chain1 = self.edge_chain_map[slots[0]].clone();
            chain1.extend_from_slice(&self.edge_chain_map[slots[3]]);
            next.edge_chain_map[e1] = chain1;
            next.edge_chain_map[e2] = self.edge_chain_map[slots[4]].clone();
        }
        Ok((next, tables))
    }
}

/// Per-level class tables of one decode.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SdrgTrace {
    pub levels: Vec<SdrgTraceLevel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SdrgTraceLevel {
    pub lambda: usize,
    pub rows: usize,
    pub cols: usize,
    pub tables: Vec<ClassTable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SdrgConfig {
    pub bp_rounds: usize,
}

impl Default for SdrgConfig {
    fn default() -> Self {
        Self { bp_rounds: 5 }
    }
}

pub fn sdrg_decode(w: &SyndromeSet, noise: NoiseParams) -> Result<ErrorConfig, DecodeError> {
    sdrg_decode_with(w, noise, SdrgConfig::default())
}

pub fn sdrg_decode_with(w: &SyndromeSet, noise: NoiseParams, cfg: SdrgConfig) -> Result<ErrorConfig, DecodeError> {
    decode_impl(w, noise, cfg, None)
}

pub fn sdrg_decode_traced(
    w: &SyndromeSet,
    noise: NoiseParams,
    cfg: SdrgConfig,
) -> Result<(ErrorConfig, SdrgTrace), DecodeError> {
    let mut trace = SdrgTrace::default();
    let correction = decode_impl(w, noise, cfg, Some(&mut trace))?;
    Ok((correction, trace))
}

fn decode_impl(
    w: &SyndromeSet,
    noise: NoiseParams,
    cfg: SdrgConfig,
    mut trace: Option<&mut SdrgTrace>,
) -> Result<ErrorConfig, DecodeError> {
    let total = w.total_charge();
    if total != 0 {
        return Err(DecodeError::ChargedCluster(total));
    }
    let params = w.params();
    let d = params.d() as u64;
    let mut acc = ErrorConfig::zeros(params);
    let mut level = RGLevel::initial(w, noise)?;
    while !level.is_final() {
        let msgs = level.bp_rounds(cfg.bp_rounds)?;
        let (next, tables) = level.coarse_grain(&msgs, &mut acc)?;
        if let Some(t) = trace.as_deref_mut() {
            t.levels.push(SdrgTraceLevel { lambda: level.lambda, rows: level.rows, cols: level.cols, tables });
        }
        level = next;
    }
    debug_assert_eq!(level.syndromes[0], 0);
    // Two self-loops remain: the most likely multiple of each.
    for (prior, chain) in level.priors.iter().zip(&level.edge_chain_map) {
        let k = prior.argmax() as u64;
        if k != 0 {
            for &(e, coef) in chain {
                acc.add_to_edge(e as usize, ((coef as u64 * k) % d) as u32);
            }
        }
    }
    Ok(acc)
}
