//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 6 8`.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::ThreadPoolBuilder;

use qtc_core::decoder::Decoder;
use qtc_core::hdrg::RegionParams;
use qtc_core::lattice::{compute_syndrome, is_prime, sample_errors, CodeParams, NoiseParams};
use qtc_core::rng::derive_seed;
use qtc_core::sdrg::{cell_class_probs, compute_messages, sdrg_decode, CellInputs, Dist};
use qtc_core::stats::{
    curve_crossing, estimate_spanning, estimate_success, fit_threshold, hashing_threshold, scaling_model, CurvePoint,
    HashingModel, PercolationMode,
};

type Outcome = Result<String, String>;

const SEED: u64 = 20_160_815;

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| ((lo + step * i as f64) * 1e6).round() / 1e6).collect()
}

fn campaign(decoder: Decoder, d: u32, sizes: &[usize], ps: &[f64], n: u64) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for &l in sizes {
        let params = CodeParams::new(d, l).unwrap();
        for &p in ps {
            out.push(estimate_success(decoder, params, NoiseParams::new(p).unwrap(), n, SEED).unwrap());
        }
    }
    out
}

fn spanning_campaign(mode: PercolationMode, d: u32, sizes: &[usize], ps: &[f64], n: u64) -> Vec<CurvePoint> {
    let mut out = Vec::new();
    for &l in sizes {
        let params = CodeParams::new(d, l).unwrap();
        for &p in ps {
            out.push(estimate_spanning(mode, params, p, n, SEED).unwrap());
        }
    }
    out
}

fn at_size(points: &[CurvePoint], l: usize) -> Vec<CurvePoint> {
    points.iter().filter(|x| x.l == l).copied().collect()
}

fn fitted(decoder: Decoder, d: u32, ps: &[f64], n: u64) -> Result<f64, String> {
    let points = campaign(decoder, d, &[16, 32, 64], ps, n);
    let fit = fit_threshold(&points).map_err(|e| format!("d={d}: {e}"))?;
    Ok(fit.p_th)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// The criterion 1 campaign, shared with the dimension trend.
fn qubit_threshold() -> Result<f64, String> {
    static CELL: OnceLock<Result<f64, String>> = OnceLock::new();
    CELL.get_or_init(|| fitted(Decoder::Hdrg, 2, &grid(0.06, 0.10, 0.005), 10_000)).clone()
}

fn qubit_hdrg_threshold() -> Outcome {
    let p_th = qubit_threshold()?;
    check((0.075..=0.095).contains(&p_th), format!("p_th(d=2) = {p_th:.4}, want [0.075, 0.095]"))
}

fn dimension_trend() -> Outcome {
    let t2 = qubit_threshold()?;
    let t3 = fitted(Decoder::Hdrg, 3, &grid(0.09, 0.15, 0.005), 5_000)?;
    let t5 = fitted(Decoder::Hdrg, 5, &grid(0.11, 0.17, 0.005), 5_000)?;
    check(t3 > t2 && t5 > t3, format!("p_th(2) = {t2:.4}, p_th(3) = {t3:.4}, p_th(5) = {t5:.4}"))
}

fn high_d_saturation() -> Outcome {
    let ps = grid(0.13, 0.20, 0.01);
    let a = fitted(Decoder::Hdrg, 101, &ps, 3_000)?;
    let b = fitted(Decoder::Hdrg, 1009, &ps, 3_000)?;
    let inside = |x: f64| (0.15..=0.21).contains(&x);
    check(
        inside(a) && inside(b) && (a - b).abs() < 0.02,
        format!("p_th(101) = {a:.4}, p_th(1009) = {b:.4}, want both in [0.15, 0.21] within 0.02"),
    )
}

fn syndrome_percolation() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // (a) qubit symmetry about p = 1/2.
    let params = CodeParams::new(2, 64).unwrap();
    let mode = PercolationMode::Syndrome { depth: None };
    let mut worst: f64 = 0.0;
    for p in [0.1, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45] {
        let lo = estimate_spanning(mode, params, p, 10_000, SEED).unwrap();
        let hi = estimate_spanning(mode, params, 1.0 - p, 10_000, SEED ^ 1).unwrap();
        let sigma = (lo.sigma().powi(2) + hi.sigma().powi(2)).sqrt().max(1e-4);
        worst = worst.max((lo.p_succ() - hi.p_succ()).abs() / sigma);
    }
    ok &= worst <= 3.0;
    notes.push(format!("(a) max |P(p) - P(1-p)| = {worst:.2} sigma"));

    // (b) high-d spanning threshold, crossing of the two largest sizes.
    let pts = spanning_campaign(mode, 101, &[32, 64, 128], &grid(0.15, 0.22, 0.005), 2_000);
    let x = curve_crossing(&at_size(&pts, 64), &at_size(&pts, 128)).map_err(|e| format!("(b) {e}"))?;
    ok &= (x - 0.18).abs() <= 0.02;
    notes.push(format!("(b) d=101 crossing {x:.4}, want 0.18 +- 0.02"));

    // (c) site percolation calibration.
    let pts = spanning_campaign(PercolationMode::Site, 2, &[64, 128], &grid(0.58, 0.61, 0.0025), 4_000);
    let x = curve_crossing(&at_size(&pts, 64), &at_size(&pts, 128)).map_err(|e| format!("(c) {e}"))?;
    ok &= (x - 0.5927).abs() <= 0.005;
    notes.push(format!("(c) site crossing {x:.4}, want 0.5927 +- 0.005"));
    check(ok, notes.join("; "))
}

fn crossing_16_32(decoder: Decoder, d: u32, ps: &[f64]) -> Result<f64, String> {
    let pts = campaign(decoder, d, &[16, 32], ps, 1_000);
    curve_crossing(&at_size(&pts, 16), &at_size(&pts, 32)).map_err(|e| format!("{} d={d}: {e}", decoder.name()))
}

fn enhanced_directions() -> Outcome {
    let i10 = Decoder::EnhancedHdrg { depth: RegionParams::new(1, 0).unwrap() };
    let i21 = Decoder::EnhancedHdrg { depth: RegionParams::new(2, 1).unwrap() };
    let mut notes = Vec::new();

    let qubit = grid(0.05, 0.11, 0.005);
    let plain = crossing_16_32(Decoder::Hdrg, 2, &qubit)?;
    let init = crossing_16_32(i10, 2, &qubit)?;
    let mut ok = init < plain;
    notes.push(format!("d=2 {init:.4} with I(1,0) vs {plain:.4} without"));

    for l in [16, 32] {
        let params = CodeParams::new(7, l).unwrap();
        let noise = NoiseParams::new(0.2).unwrap();
        let a = estimate_success(Decoder::Hdrg, params, noise, 1_000, SEED).unwrap();
        let b = estimate_success(i21, params, noise, 1_000, SEED).unwrap();
        ok &= b.n_success > a.n_success;
        notes.push(format!("d=7 L={l} p=0.2 {} vs {} of 1000", b.n_success, a.n_success));
    }

    let x = crossing_16_32(i21, 101, &grid(0.18, 0.27, 0.01))?;
    ok &= x > 0.21;
    notes.push(format!("d=101 with I(2,1) {x:.4}, want > 0.21"));
    check(ok, notes.join("; "))
}

fn random_dist(d: usize, state: &mut u64) -> Dist {
    let v = (0..d)
        .map(|_| {
            *state = qtc_core::rng::splitmix64(*state);
            ((*state >> 11) as f64 / (1u64 << 53) as f64) + 1e-3
        })
        .collect();
    Dist::from_weights(v)
}

/// Brute force over all `d^5` slot values. A value `e` decomposes as
/// `a t + h1 l1 + h2 l2 + mu s1 + nu s2`, i.e.
/// `e = (h1, mu, nu, a + h1 + mu - nu, h2 - mu)`.
fn enumerate(d: usize, a: usize, weights: [&[f64]; 5], bins: usize, key: impl Fn(usize, usize, usize, usize) -> usize) -> Vec<f64> {
    let mut out = vec![0.0; bins];
    for idx in 0..d.pow(5) {
        let mut e = [0usize; 5];
        let mut k = idx;
        for x in e.iter_mut() {
            *x = k % d;
            k /= d;
        }
        let (h1, mu, nu) = (e[0], e[1], e[2]);
        let coeff_t = (e[3] + 2 * d - h1 - mu + nu) % d;
        if coeff_t != a {
            continue;
        }
        let h2 = (e[4] + mu) % d;
        let w: f64 = (0..5).map(|j| weights[j][e[j]]).product();
        out[key(h1, h2, mu, nu)] += w;
    }
    let s: f64 = out.iter().sum();
    out.iter().map(|x| x / s).collect()
}

fn sdrg_oracle() -> Outcome {
    let mut state = 99u64;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in [2usize, 3, 5] {
        for case in 0..100 {
            let ps: Vec<Dist> = (0..7).map(|_| random_dist(d, &mut state)).collect();
            let a = case % d;
            let v: Vec<&[f64]> = ps.iter().map(|x| x.values()).collect();
            let (p1, p2, p3, p4, p5, ql, qr) = (v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
            let inputs = CellInputs {
                p1: &ps[0],
                p2: &ps[1],
                p3: &ps[2],
                p4: &ps[3],
                p5: &ps[4],
                q_l: &ps[5],
                q_r: &ps[6],
                a: a as u32,
            };
            let table = cell_class_probs(&inputs).map_err(|e| e.to_string())?;
            let (left, right) = compute_messages(&inputs).map_err(|e| e.to_string())?;
            let want = enumerate(d, a, [p1, ql, qr, p4, p5], d * d, |h1, h2, _, _| h1 * d + h2);
            let want_l = enumerate(d, a, [p1, p2, qr, p4, p5], d, |_, _, mu, _| mu);
            let want_r = enumerate(d, a, [p1, ql, p3, p4, p5], d, |_, _, _, nu| nu);
            for (got, want) in [(table.probs(), &want), (left.values(), &want_l), (right.values(), &want_r)] {
                for (x, y) in got.iter().zip(want.iter()) {
                    worst = worst.max((x - y).abs());
                }
            }
            cases += 1;
        }
    }
    check(worst <= 1e-12, format!("{cases} cases, max deviation {worst:.2e}"))
}

fn sdrg_contract() -> Outcome {
    let mut bad = 0;
    let mut total = 0;
    for (k, (d, l)) in [(2u32, 8usize), (2, 16), (3, 8), (3, 16), (5, 8), (5, 16)].into_iter().enumerate() {
        let params = CodeParams::new(d, l).unwrap();
        let count = if k < 4 { 1_667 } else { 1_666 };
        for i in 0..count {
            let p = 0.3 * (i % 31) as f64 / 30.0;
            let noise = NoiseParams::new(p).unwrap();
            let w = compute_syndrome(&sample_errors(params, noise, derive_seed(SEED, &[d as u64, l as u64, i])));
            let correction = sdrg_decode(&w, noise).map_err(|e| e.to_string())?;
            bad += usize::from(compute_syndrome(&correction) != w);
            total += 1;
        }
    }
    let x = crossing_16_32(Decoder::Sdrg { bp_rounds: 5 }, 3, &grid(0.04, 0.16, 0.01))?;
    check(
        bad == 0 && (0.04..=0.14).contains(&x),
        format!("{bad} of {total} corrections miss the syndrome; d=3 crossing {x:.4}, want [0.04, 0.14]"),
    )
}

fn hashing_bounds() -> Outcome {
    let mut ok = true;
    let ind = hashing_threshold(2, HashingModel::Independent).map_err(|e| e.to_string())?;
    let dep = hashing_threshold(2, HashingModel::Depolarizing).map_err(|e| e.to_string())?;
    ok &= (ind - 0.110028).abs() <= 1e-6 && (dep - 0.1893).abs() <= 5e-4;
    let primes: Vec<u32> = (2..=97).filter(|&x| is_prime(x as u64)).collect();
    let th: Vec<f64> = primes.iter().map(|&d| hashing_threshold(d, HashingModel::Independent).unwrap()).collect();
    let monotone = th.windows(2).all(|w| w[1] > w[0]);
    ok &= monotone;
    let big = 15_485_863;
    let limit = hashing_threshold(big, HashingModel::Independent).map_err(|e| e.to_string())?;
    ok &= (limit - 0.5).abs() <= 1e-3;
    check(
        ok,
        format!("d=2 independent {ind:.7}, depolarizing {dep:.5}, monotone over primes to 97: {monotone}, d={big}: {limit:.4} (want 0.5 +- 1e-3)"),
    )
}

fn fit_roundtrip() -> Outcome {
    let (lin, p_th, nu, mu) = ([0.9, -2.0, -10.0, 0.05], 0.084, 1.85, 0.46);
    let ps = grid(0.074, 0.094, 0.002);
    let n = 10_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut hits = 0;
    let mut errs = Vec::new();
    for _ in 0..100 {
        let mut pts = Vec::new();
        for l in [16, 32, 64, 128] {
            for &p in &ps {
                let q = scaling_model(lin, p_th, nu, mu, l, p).clamp(0.0, 1.0);
                let k = Binomial::new(n, q).unwrap().sample(&mut rng);
                pts.push(CurvePoint::new(2, l, p, k, n).unwrap());
            }
        }
        match fit_threshold(&pts) {
            Ok(fit) => {
                let e = (fit.p_th - p_th).abs();
                hits += usize::from(e <= 1e-3);
                errs.push(e);
            }
            Err(e) => return Err(format!("fit failed: {e}")),
        }
    }
    errs.sort_by(f64::total_cmp);
    check(hits >= 95, format!("{hits}/100 within 1e-3, median error {:.2e}", errs[50]))
}

fn determinism() -> Outcome {
    let run = |threads: usize| -> Vec<CurvePoint> {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut out = campaign(Decoder::Hdrg, 3, &[16], &[0.1, 0.14], 300);
            out.extend(campaign(Decoder::EnhancedHdrg { depth: RegionParams::new(2, 1).unwrap() }, 5, &[16], &[0.15], 200));
            out.extend(campaign(Decoder::Sdrg { bp_rounds: 5 }, 3, &[16], &[0.1], 200));
            out.extend(spanning_campaign(PercolationMode::Syndrome { depth: None }, 101, &[32], &[0.18], 300));
            out
        })
    };
    let reference = run(1);
    let same = [2, 3, 8].iter().all(|&t| run(t) == reference);
    check(same, format!("{} points identical across 1, 2, 3 and 8 threads: {same}", reference.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("qubit HDRG threshold", qubit_hdrg_threshold),
        ("HDRG dimension trend", dimension_trend),
        ("high-d HDRG saturation", high_d_saturation),
        ("syndrome percolation", syndrome_percolation),
        ("enhanced HDRG directions", enhanced_directions),
        ("SDRG oracle equivalence", sdrg_oracle),
        ("SDRG decode contract", sdrg_contract),
        ("hashing bounds", hashing_bounds),
        ("fit roundtrip", fit_roundtrip),
        ("determinism", determinism),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
