//! The periodic L×L qudit toric lattice.
//!
//! Qudits live on the 2L² edges, X-type errors are Z_d-valued 1-chains on the
//! dual lattice and their boundaries are the plaquette charges. Edge `h(r, c)`
//! is the horizontal edge on vertex row `r` between columns `c` and `c + 1`; it
//! adds its value to the plaquette above it, `(r, c)`, and subtracts it from
//! the plaquette below, `(r - 1, c)`. Edge `v(r, c)` is the vertical edge on
//! vertex column `c` between rows `r` and `r + 1`; it adds to the plaquette on
//! its right, `(r, c)`, and subtracts from the one on its left, `(r, c - 1)`.
//!
//! Edges are indexed horizontal block first (row-major), then the vertical
//! block (row-major). That order is also the serialization order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::LatticeError;

/// Deterministic primality test by trial division. Inputs here are small.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 || n % 3 == 0 {
        return false;
    }
    let mut k = 5u64;
    while k * k <= n {
        if n % k == 0 || n % (k + 2) == 0 {
            return false;
        }
        k += 6;
    }
    true
}

/// Signed minimum-image displacement from `a` to `b` on a cycle of length `n`,
/// in the half-open range `(-n/2, n/2]`.
pub fn wrap_delta(a: usize, b: usize, n: usize) -> i64 {
    let n_i = n as i64;
    let mut delta = (b as i64 - a as i64).rem_euclid(n_i);
    if 2 * delta > n_i {
        delta -= n_i;
    }
    delta
}

/// Qudit dimension and lattice size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    d: u32,
    l: usize,
}

impl CodeParams {
    pub fn new(d: u32, l: usize) -> Result<Self, LatticeError> {
        if !is_prime(d as u64) {
            return Err(LatticeError::NotPrime(d as u64));
        }
        if l < 2 {
            return Err(LatticeError::LatticeTooSmall(l));
        }
        Ok(Self { d, l })
    }

    #[inline]
    pub fn d(&self) -> u32 {
        self.d
    }

    #[inline]
    pub fn l(&self) -> usize {
        self.l
    }

    #[inline]
    pub fn num_plaquettes(&self) -> usize {
        self.l * self.l
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.l * self.l
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        2 * self.l * self.l
    }

    #[inline]
    pub fn h_edge(&self, row: usize, col: usize) -> usize {
        (row % self.l) * self.l + col % self.l
    }

    #[inline]
    pub fn v_edge(&self, row: usize, col: usize) -> usize {
        self.l * self.l + (row % self.l) * self.l + col % self.l
    }

    #[inline]
    pub fn plaquette_index(&self, p: Plaquette) -> usize {
        p.row * self.l + p.col
    }

    #[inline]
    pub fn plaquette_at(&self, index: usize) -> Plaquette {
        Plaquette::new(index / self.l, index % self.l)
    }

    /// Plaquette at `p` shifted by `(dr, dc)` with toroidal wrap.
    #[inline]
    pub fn offset(&self, p: Plaquette, dr: i64, dc: i64) -> Plaquette {
        let l = self.l as i64;
        Plaquette::new(
            (p.row as i64 + dr).rem_euclid(l) as usize,
            (p.col as i64 + dc).rem_euclid(l) as usize,
        )
    }

    /// Minimum-image displacement `(dr, dc)` from `a` to `b`.
    #[inline]
    pub fn displacement(&self, a: Plaquette, b: Plaquette) -> (i64, i64) {
        (wrap_delta(a.row, b.row, self.l), wrap_delta(a.col, b.col, self.l))
    }

    #[inline]
    pub fn neg(&self, c: u32) -> u32 {
        (self.d - c % self.d) % self.d
    }
}

/// A plaquette (face) coordinate; also the position of a charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Plaquette {
    pub row: usize,
    pub col: usize,
}

impl Plaquette {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// One of the four lattice directions between orthogonally adjacent plaquettes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Up,
    Down,
    Left,
    Right,
}

/// Physical error probability per qudit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    p: f64,
}

impl NoiseParams {
    pub fn new(p: f64) -> Result<Self, LatticeError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(LatticeError::InvalidProbability(p));
        }
        Ok(Self { p })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Exponents of X on every edge, values in `0..d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorConfig {
    params: CodeParams,
    values: Vec<u32>,
}

impl Serialize for ErrorConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

impl ErrorConfig {
    pub fn zeros(params: CodeParams) -> Self {
        Self {
            params,
            values: vec![0; params.num_edges()],
        }
    }

    pub fn from_values(params: CodeParams, values: Vec<u32>) -> Result<Self, LatticeError> {
        if values.len() != params.num_edges() {
            return Err(LatticeError::WrongLength {
                expected: params.num_edges(),
                found: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|&&v| v >= params.d) {
            return Err(LatticeError::ValueOutOfRange { value: bad, d: params.d });
        }
        Ok(Self { params, values })
    }

    #[inline]
    pub fn params(&self) -> CodeParams {
        self.params
    }

    #[inline]
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, edge: usize) -> u32 {
        self.values[edge]
    }

    /// Adds `c` (mod d) to one edge.
    #[inline]
    pub fn add_to_edge(&mut self, edge: usize, c: u32) {
        let d = self.params.d as u64;
        self.values[edge] = ((self.values[edge] as u64 + c as u64) % d) as u32;
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Number of edges carrying a non-identity error.
    pub fn weight(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    fn check_same(&self, other: &Self) -> Result<(), LatticeError> {
        if self.params != other.params {
            return Err(LatticeError::ParamsMismatch);
        }
        Ok(())
    }

    /// Componentwise `self ⊕ other`.
    pub fn add(&self, other: &Self) -> Result<Self, LatticeError> {
        self.check_same(other)?;
        let d = self.params.d as u64;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| ((a as u64 + b as u64) % d) as u32)
            .collect();
        Ok(Self { params: self.params, values })
    }

    /// Componentwise `self ⊖ other`.
    pub fn sub(&self, other: &Self) -> Result<Self, LatticeError> {
        self.check_same(other)?;
        let d = self.params.d as u64;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| ((a as u64 + d - b as u64) % d) as u32)
            .collect();
        Ok(Self { params: self.params, values })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), LatticeError> {
        self.check_same(other)?;
        let d = self.params.d as u64;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = ((*a as u64 + b as u64) % d) as u32;
        }
        Ok(())
    }

    /// Truncation-free vertex operator at vertex `(row, col)` raised to `k`.
    /// It has trivial syndrome and trivial winding.
    pub fn vertex_stabilizer(params: CodeParams, row: usize, col: usize, k: u32) -> Self {
        let mut e = Self::zeros(params);
        let l = params.l;
        let neg = params.neg(k);
        e.add_to_edge(params.h_edge(row, col), neg);
        e.add_to_edge(params.h_edge(row, (col + l - 1) % l), k);
        e.add_to_edge(params.v_edge(row, col), k);
        e.add_to_edge(params.v_edge((row + l - 1) % l, col), neg);
        e
    }

    /// Non-contractible dual loop of value `k` through the plaquettes of column
    /// `col`: it crosses every horizontal edge `h(·, col)` and has class `(k, 0)`.
    pub fn vertical_dual_loop(params: CodeParams, col: usize, k: u32) -> Self {
        let mut e = Self::zeros(params);
        for r in 0..params.l {
            e.add_to_edge(params.h_edge(r, col), k);
        }
        e
    }

    /// Non-contractible dual loop of value `k` through the plaquettes of row
    /// `row`: it crosses every vertical edge `v(row, ·)` and has class `(0, k)`.
    pub fn horizontal_dual_loop(params: CodeParams, row: usize, k: u32) -> Self {
        let mut e = Self::zeros(params);
        for c in 0..params.l {
            e.add_to_edge(params.v_edge(row, c), k);
        }
        e
    }

    /// Moves charge `c` one step from plaquette `from` in direction `step`:
    /// the syndrome of `self` drops by `c` at `from` and rises by `c` at the
    /// neighbour.
    pub fn push_step(&mut self, from: Plaquette, step: Step, c: u32) {
        let p = self.params;
        let l = p.l;
        let c = c % p.d;
        if c == 0 {
            return;
        }
        let (edge, value) = match step {
            Step::Up => (p.h_edge((from.row + 1) % l, from.col), c),
            Step::Down => (p.h_edge(from.row, from.col), p.neg(c)),
            Step::Right => (p.v_edge(from.row, (from.col + 1) % l), c),
            Step::Left => (p.v_edge(from.row, from.col), p.neg(c)),
        };
        self.add_to_edge(edge, value);
    }

    /// Transports residual charge `c` from `from` to `to` along the monotone
    /// staircase that changes the row first. Here the residual is
    /// `W − syndrome(self)`, so `self` is a correction being built up.
    pub fn transport_residual(&mut self, from: Plaquette, to: Plaquette, c: u32) {
        let p = self.params;
        let c = c % p.d;
        if c == 0 {
            return;
        }
        // Moving residual charge is the opposite of moving syndrome charge.
        let carried = p.neg(c);
        let (dr, dc) = p.displacement(from, to);
        let mut cur = from;
        let (vstep, vdir) = if dr >= 0 { (Step::Up, 1) } else { (Step::Down, -1) };
        for _ in 0..dr.unsigned_abs() {
            self.push_step(cur, vstep, carried);
            cur = p.offset(cur, vdir, 0);
        }
        let (hstep, hdir) = if dc >= 0 { (Step::Right, 1) } else { (Step::Left, -1) };
        for _ in 0..dc.unsigned_abs() {
            self.push_step(cur, hstep, carried);
            cur = p.offset(cur, 0, hdir);
        }
    }
}

/// Direction of the single step from `from` to `to`, if they share an edge.
pub fn adjacent_step(params: CodeParams, from: Plaquette, to: Plaquette) -> Option<Step> {
    let l = params.l;
    if from.col == to.col {
        if (from.row + 1) % l == to.row {
            return Some(Step::Up);
        }
        if (to.row + 1) % l == from.row {
            return Some(Step::Down);
        }
    }
    if from.row == to.row {
        if (from.col + 1) % l == to.col {
            return Some(Step::Right);
        }
        if (to.col + 1) % l == from.col {
            return Some(Step::Left);
        }
    }
    None
}

/// Adds `±c` to the edge shared by `from` and `to` so that the syndrome of
/// `acc` decreases by `c` at `from` and increases by `c` at `to`.
pub fn move_charge(
    from: Plaquette,
    to: Plaquette,
    c: u32,
    acc: &mut ErrorConfig,
) -> Result<(), LatticeError> {
    let step = adjacent_step(acc.params, from, to).ok_or(LatticeError::NotAdjacent { from, to })?;
    acc.push_step(from, step, c);
    Ok(())
}

/// Independent X-error channel: each edge carries 0 with probability `1 − p`
/// and each `j ∈ 1..d` with probability `p/(d − 1)`.
pub fn sample_errors(params: CodeParams, noise: NoiseParams, seed: u64) -> ErrorConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = noise.p;
    let spread = (params.d - 1) as f64;
    let top = params.d - 1;
    let values = (0..params.num_edges())
        .map(|_| {
            let u: f64 = rng.gen();
            if u < p {
                // u/p is uniform on [0, 1) given u < p.
                (1 + ((u / p) * spread) as u32).min(top)
            } else {
                0
            }
        })
        .collect();
    ErrorConfig { params, values }
}

/// Dense plaquette charges, indexed by `row * L + col`.
pub fn syndrome_grid(e: &ErrorConfig) -> Vec<u32> {
    let p = e.params;
    let l = p.l;
    let d = p.d as u64;
    let mut grid = vec![0u64; l * l];
    for r in 0..l {
        for c in 0..l {
            let h = e.values[p.h_edge(r, c)] as u64;
            let v = e.values[p.v_edge(r, c)] as u64;
            if h != 0 {
                let below = ((r + l - 1) % l) * l + c;
                grid[r * l + c] += h;
                grid[below] += d - h;
            }
            if v != 0 {
                let left = r * l + (c + l - 1) % l;
                grid[r * l + c] += v;
                grid[left] += d - v;
            }
        }
    }
    grid.into_iter().map(|x| (x % d) as u32).collect()
}

/// Sparse list of charged plaquettes, kept in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyndromeSet {
    #[serde(skip)]
    params: CodeParams,
    entries: Vec<(Plaquette, u32)>,
}

impl SyndromeSet {
    pub fn empty(params: CodeParams) -> Self {
        Self { params, entries: Vec::new() }
    }

    pub fn from_dense(params: CodeParams, grid: &[u32]) -> Self {
        let entries = grid
            .iter()
            .enumerate()
            .filter(|(_, &c)| c % params.d != 0)
            .map(|(i, &c)| (params.plaquette_at(i), c % params.d))
            .collect();
        Self { params, entries }
    }

    /// Builds a set from explicit entries. Rejects duplicates, zero charges
    /// and out-of-range coordinates.
    pub fn from_entries(
        params: CodeParams,
        entries: impl IntoIterator<Item = (Plaquette, u32)>,
    ) -> Result<Self, LatticeError> {
        let mut grid = vec![0u32; params.num_plaquettes()];
        let mut seen = vec![false; params.num_plaquettes()];
        for (pos, charge) in entries {
            if pos.row >= params.l || pos.col >= params.l {
                return Err(LatticeError::OutOfLattice(pos));
            }
            let charge = charge % params.d;
            if charge == 0 {
                return Err(LatticeError::ZeroCharge(pos));
            }
            let i = params.plaquette_index(pos);
            if seen[i] {
                return Err(LatticeError::DuplicatePosition(pos));
            }
            seen[i] = true;
            grid[i] = charge;
        }
        Ok(Self::from_dense(params, &grid))
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut grid = vec![0u32; self.params.num_plaquettes()];
        for &(pos, c) in &self.entries {
            grid[self.params.plaquette_index(pos)] = c;
        }
        grid
    }

    #[inline]
    pub fn params(&self) -> CodeParams {
        self.params
    }

    #[inline]
    pub fn entries(&self) -> &[(Plaquette, u32)] {
        &self.entries
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_charge(&self) -> u32 {
        let d = self.params.d as u64;
        (self.entries.iter().map(|&(_, c)| c as u64).sum::<u64>() % d) as u32
    }

    pub fn charge_at(&self, pos: Plaquette) -> u32 {
        self.entries
            .binary_search_by(|(p, _)| p.cmp(&pos))
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }
}

pub fn compute_syndrome(e: &ErrorConfig) -> SyndromeSet {
    SyndromeSet::from_dense(e.params, &syndrome_grid(e))
}

/// Winding numbers of a trivial-syndrome configuration across the two cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogicalClass {
    pub w1: u32,
    pub w2: u32,
}

impl LogicalClass {
    pub const TRIVIAL: Self = Self { w1: 0, w2: 0 };

    pub fn is_trivial(&self) -> bool {
        *self == Self::TRIVIAL
    }
}

/// Windings without the syndrome check: `w1` sums the horizontal edges of
/// vertex row 0, `w2` the vertical edges of vertex column 0.
pub(crate) fn windings_unchecked(e: &ErrorConfig, row: usize, col: usize) -> LogicalClass {
    let p = e.params;
    let d = p.d as u64;
    let w1 = (0..p.l).map(|c| e.values[p.h_edge(row, c)] as u64).sum::<u64>() % d;
    let w2 = (0..p.l).map(|r| e.values[p.v_edge(r, col)] as u64).sum::<u64>() % d;
    LogicalClass { w1: w1 as u32, w2: w2 as u32 }
}

pub fn logical_class(e: &ErrorConfig) -> Result<LogicalClass, LatticeError> {
    if syndrome_grid(e).iter().any(|&c| c != 0) {
        return Err(LatticeError::NonTrivialSyndrome);
    }
    Ok(windings_unchecked(e, 0, 0))
}

/// True iff `error ⊖ correction` is homologically trivial. The correction
/// must reproduce the syndrome of the error.
pub fn is_success(error: &ErrorConfig, correction: &ErrorConfig) -> Result<bool, LatticeError> {
    error.check_same(correction)?;
    let residual = error.sub(correction)?;
    match logical_class(&residual) {
        Ok(class) => Ok(class.is_trivial()),
        Err(LatticeError::NonTrivialSyndrome) => Err(LatticeError::SyndromeMismatch),
        Err(e) => Err(e),
    }
}
