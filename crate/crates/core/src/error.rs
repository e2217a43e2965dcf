use thiserror::Error;

use crate::lattice::Plaquette;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("qudit dimension {0} is not prime")]
    NotPrime(u64),
    #[error("lattice size {0} is too small (need L >= 2)")]
    LatticeTooSmall(usize),
    #[error("error probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("expected {expected} edge values, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("edge value {value} is not in Z_{d}")]
    ValueOutOfRange { value: u32, d: u32 },
    #[error("configurations belong to different lattices")]
    ParamsMismatch,
    #[error("logical class is undefined for a configuration with non-trivial syndrome")]
    NonTrivialSyndrome,
    #[error("correction does not reproduce the measured syndrome")]
    SyndromeMismatch,
    #[error("plaquettes {from:?} and {to:?} do not share an edge")]
    NotAdjacent { from: Plaquette, to: Plaquette },
    #[error("plaquette {0:?} lies outside the lattice")]
    OutOfLattice(Plaquette),
    #[error("zero charge stored at {0:?}")]
    ZeroCharge(Plaquette),
    #[error("duplicate syndrome position {0:?}")]
    DuplicatePosition(Plaquette),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("region parameters (r={r}, s={s}) need r >= 1 and s <= r")]
    InvalidRegion { r: usize, s: usize },
    #[error("cannot annihilate a cluster with total charge {0}")]
    ChargedCluster(u32),
    #[error("the soft-decisions decoder needs L to be a power of two, got {0}")]
    NotPowerOfTwo(usize),
    #[error("cell tables for d={d} need {bytes} bytes, above the {limit}-byte limit")]
    TooLarge { d: u32, bytes: u128, limit: u128 },
    #[error("distribution has {found} entries, expected {expected}")]
    WrongDistLength { expected: usize, found: usize },
    #[error("distribution is not normalized (sum {sum}) or has invalid entries")]
    Unnormalized { sum: f64 },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} distinct lattice sizes, found {found}")]
    TooFewSizes { needed: usize, found: usize },
    #[error("need at least {needed} distinct error rates, found {found}")]
    TooFewRates { needed: usize, found: usize },
    #[error("invalid curve point: {0}")]
    InvalidPoint(String),
    #[error("design matrix is degenerate")]
    DegenerateDesign,
    #[error("success curves do not depend on L (chi2 without L dependence = {chi2_null:.3} over {dof} dof); p_th is unconstrained")]
    NoCrossing { chi2_null: f64, dof: usize },
    #[error("no hashing threshold root in (0, {upper})")]
    NoRoot { upper: f64 },
    #[error("depolarizing hashing threshold is defined for d = 2 only, got {0}")]
    DepolarizingNeedsQubit(u32),
    #[error("need at least one trial")]
    NoTrials,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
