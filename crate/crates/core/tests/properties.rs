use proptest::prelude::*;
use qtc_core::hdrg::{hdrg_decode, partition, RegionParams};
use qtc_core::init::{enhanced_hdrg_decode, init_step};
use qtc_core::lattice::{
    compute_syndrome, is_success, logical_class, sample_errors, CodeParams, ErrorConfig, NoiseParams, SyndromeSet,
};
use qtc_core::sdrg::sdrg_decode;
use qtc_core::stats::{hashing_threshold, HashingModel};

const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 101];

fn params() -> impl Strategy<Value = CodeParams> {
    (prop::sample::select(PRIMES.to_vec()), 2usize..12).prop_map(|(d, l)| CodeParams::new(d, l).unwrap())
}

fn config(params: CodeParams) -> impl Strategy<Value = ErrorConfig> {
    prop::collection::vec(0..params.d(), params.num_edges())
        .prop_map(move |v| ErrorConfig::from_values(params, v).unwrap())
}

fn pair() -> impl Strategy<Value = (ErrorConfig, ErrorConfig)> {
    params().prop_flat_map(|p| (config(p), config(p)))
}

fn add_mod(a: &[u32], b: &[u32], d: u32) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| (x + y) % d).collect()
}

proptest! {
    #[test]
    fn syndrome_is_linear((a, b) in pair()) {
        let d = a.params().d();
        let sum = compute_syndrome(&a.add(&b).unwrap()).to_dense();
        prop_assert_eq!(sum, add_mod(&compute_syndrome(&a).to_dense(), &compute_syndrome(&b).to_dense(), d));
    }

    #[test]
    fn total_charge_vanishes(e in params().prop_flat_map(config)) {
        prop_assert_eq!(compute_syndrome(&e).total_charge(), 0);
    }

    #[test]
    fn stabilizers_keep_class(
        (e, moves) in params().prop_flat_map(|p| {
            let l = p.l();
            (config(p), prop::collection::vec((0..l, 0..l, 1..p.d()), 0..8))
        })
    ) {
        let p = e.params();
        let w = compute_syndrome(&e);
        let mut f = e.clone();
        for &(r, c, k) in &moves {
            f.add_assign(&ErrorConfig::vertex_stabilizer(p, r, c, k)).unwrap();
        }
        prop_assert_eq!(compute_syndrome(&f), w.clone());
        let correction = hdrg_decode(&w).unwrap();
        prop_assert_eq!(is_success(&e, &correction).unwrap(), is_success(&f, &correction).unwrap());
        let loop_ = ErrorConfig::vertical_dual_loop(p, 0, 1);
        prop_assert!(!logical_class(&loop_).unwrap().is_trivial());
        f.add_assign(&loop_).unwrap();
        let before = logical_class(&e.sub(&correction).unwrap()).unwrap();
        let after = logical_class(&f.sub(&correction).unwrap()).unwrap();
        prop_assert_ne!(before, after);
    }

    #[test]
    fn decoders_reproduce_syndrome(
        (d, l, p, seed) in (prop::sample::select(vec![2u32, 3, 5, 7]), prop::sample::select(vec![4usize, 8, 16]), 0.0f64..0.3, any::<u64>())
    ) {
        let params = CodeParams::new(d, l).unwrap();
        let noise = NoiseParams::new(p).unwrap();
        let w = compute_syndrome(&sample_errors(params, noise, seed));
        prop_assert_eq!(compute_syndrome(&hdrg_decode(&w).unwrap()), w.clone());
        let depth = RegionParams::new(2, 1).unwrap();
        prop_assert_eq!(compute_syndrome(&enhanced_hdrg_decode(&w, Some(depth)).unwrap()), w.clone());
        prop_assert_eq!(compute_syndrome(&sdrg_decode(&w, noise).unwrap()), w.clone());
    }

    #[test]
    fn init_never_adds_charges(
        (d, p, seed) in (prop::sample::select(PRIMES.to_vec()), 0.0f64..0.6, any::<u64>())
    ) {
        let params = CodeParams::new(d, 12).unwrap();
        let w = compute_syndrome(&sample_errors(params, NoiseParams::new(p).unwrap(), seed));
        let (rest, acc) = init_step(&w, RegionParams::new(2, 1).unwrap());
        prop_assert!(rest.len() <= w.len());
        let explained = compute_syndrome(&acc).to_dense();
        prop_assert_eq!(add_mod(&explained, &rest.to_dense(), d), w.to_dense());
    }

    #[test]
    fn partition_clusters_cover_syndrome(
        (d, p, seed, r, s) in (prop::sample::select(PRIMES.to_vec()), 0.0f64..0.4, any::<u64>(), 1usize..4, 0usize..4)
    ) {
        prop_assume!(s <= r);
        let params = CodeParams::new(d, 10).unwrap();
        let w = compute_syndrome(&sample_errors(params, NoiseParams::new(p).unwrap(), seed));
        let part = partition(&w, RegionParams::new(r, s).unwrap());
        let mut members: Vec<_> = part.clusters.iter().flat_map(|c| c.members.iter().copied()).collect();
        members.sort();
        let mut expected = w.entries().to_vec();
        expected.sort();
        prop_assert_eq!(members, expected);
    }
}

/// A plaquette on `d = 2` is charged when an odd number of its four edges
/// are flipped.
#[test]
fn qubit_charge_probability() {
    let params = CodeParams::new(2, 32).unwrap();
    for p in [0.1f64, 0.3, 0.5] {
        let expected = 4.0 * p * (1.0 - p).powi(3) + 4.0 * p.powi(3) * (1.0 - p);
        let samples = 400u64;
        let charged: usize = (0..samples)
            .map(|s| compute_syndrome(&sample_errors(params, NoiseParams::new(p).unwrap(), s)).len())
            .sum();
        let n = (samples * 1024) as f64;
        let rate = charged as f64 / n;
        // Neighbouring plaquettes share edges, so allow a few independent sigmas of slack.
        let sigma = (expected * (1.0 - expected) / n).sqrt();
        assert!((rate - expected).abs() < 6.0 * sigma, "p={p}: {rate} vs {expected}");
    }
}

#[test]
fn hashing_is_monotone_in_d() {
    let primes: Vec<u32> = (2u32..=200).filter(|&d| qtc_core::lattice::is_prime(d as u64)).collect();
    let th: Vec<f64> = primes.iter().map(|&d| hashing_threshold(d, HashingModel::Independent).unwrap()).collect();
    assert!(th.windows(2).all(|w| w[0] < w[1]));
    assert!(th.iter().all(|&t| t > 0.0 && t < 0.5));
}

#[test]
fn empty_syndrome_decodes_to_nothing() {
    let p = CodeParams::new(5, 8).unwrap();
    let w = SyndromeSet::empty(p);
    assert!(hdrg_decode(&w).unwrap().is_zero());
    assert!(sdrg_decode(&w, NoiseParams::new(0.1).unwrap()).unwrap().is_zero());
}
