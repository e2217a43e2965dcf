//! Success-rate estimation, finite-size-scaling threshold fits and hashing
//! bounds.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::Decoder;
use crate::error::StatsError;
use crate::hdrg::RegionParams;
use crate::lattice::{compute_syndrome, is_success, sample_errors, CodeParams, NoiseParams};
use crate::percolation::{percolation_sample, site_percolation_sample};
use crate::rng::trial_seed;

/// Aggregate of `n_total` trials at one `(d, L, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: u32,
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub n_success: u64,
    pub n_total: u64,
}

impl CurvePoint {
    pub fn new(d: u32, l: usize, p: f64, n_success: u64, n_total: u64) -> Result<Self, StatsError> {
        if n_total == 0 {
            return Err(StatsError::NoTrials);
        }
        if n_success > n_total || !(0.0..=1.0).contains(&p) {
            return Err(StatsError::InvalidPoint(format!("d={d} L={l} p={p} {n_success}/{n_total}")));
        }
        Ok(Self { d, l, p, n_success, n_total })
    }

    pub fn p_succ(&self) -> f64 {
        self.n_success as f64 / self.n_total as f64
    }

    pub fn sigma(&self) -> f64 {
        let q = self.p_succ();
        (q * (1.0 - q) / self.n_total as f64).sqrt()
    }

    /// Variance used as a fit weight. Adding one pseudo-count keeps points at
    /// 0 or 1 from getting infinite weight.
    fn fit_variance(&self) -> f64 {
        let q = self.p_succ();
        let n = self.n_total as f64;
        (q * (1.0 - q) + 1.0 / n) / n
    }
}

fn count_parallel(n: u64, trial: impl Fn(u64) -> Result<bool, StatsError> + Sync) -> Result<u64, StatsError> {
    (0..n)
        .into_par_iter()
        .map(|i| trial(i).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Runs `n` decode trials in the current rayon pool. Trial `i` draws its
/// errors from a seed derived from `(master_seed, d, L, p, i)`, so the result
/// does not depend on the number of workers.
pub fn estimate_success(decoder: Decoder, params: CodeParams, noise: NoiseParams, n: u64, master_seed: u64) -> Result<CurvePoint, StatsError> {
    if n == 0 {
        return Err(StatsError::NoTrials);
    }
    let successes = count_parallel(n, |i| {
        let seed = trial_seed(master_seed, params.d(), params.l(), noise.p(), i);
        let e = sample_errors(params, noise, seed);
        let correction = decoder.decode(&compute_syndrome(&e), noise)?;
        Ok(is_success(&e, &correction)?)
    })?;
    CurvePoint::new(params.d(), params.l(), noise.p(), successes, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PercolationMode {
    /// Charged plaquettes of sampled errors, optionally thinned first.
    Syndrome { depth: Option<RegionParams> },
    /// Each plaquette occupied independently with probability `p`.
    Site,
}

/// Counts spanning samples; `n_success` holds the number that spanned.
pub fn estimate_spanning(mode: PercolationMode, params: CodeParams, p: f64, n: u64, master_seed: u64) -> Result<CurvePoint, StatsError> {
    if n == 0 {
        return Err(StatsError::NoTrials);
    }
    let noise = NoiseParams::new(p)?;
    let spans = count_parallel(n, |i| {
        let seed = trial_seed(master_seed, params.d(), params.l(), p, i);
        Ok(match mode {
            PercolationMode::Syndrome { depth } => percolation_sample(params, noise, seed, depth).spans,
            PercolationMode::Site => site_percolation_sample(params.l(), p, seed).spans,
        })
    })?;
    CurvePoint::new(params.d(), params.l(), p, spans, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub p_th: (f64, f64),
    pub nu: (f64, f64),
    pub mu: (f64, f64),
}

/// Parameters of `A + B x + C x^2 + D L^(-1/mu)` with `x = (p - p_th) L^(1/nu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(rename = "d")]
    pub d_coef: f64,
    pub p_th: f64,
    pub nu: f64,
    pub mu: f64,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub dof: usize,
    pub bounds: Bounds,
    /// The best `p_th` sits on the edge of the sampled range.
    pub extrapolation: bool,
}

impl FitResult {
    pub fn model(&self, l: usize, p: f64) -> f64 {
        scaling_model([self.a, self.b, self.c, self.d_coef], self.p_th, self.nu, self.mu, l, p)
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.rss / self.dof.max(1) as f64
    }
}

pub fn scaling_model(lin: [f64; 4], p_th: f64, nu: f64, mu: f64, l: usize, p: f64) -> f64 {
    let lf = l as f64;
    let x = (p - p_th) * lf.powf(1.0 / nu);
    lin[0] + lin[1] * x + lin[2] * x * x + lin[3] * lf.powf(-1.0 / mu)
}

const NU_RANGE: (f64, f64) = (0.5, 5.0);
const MU_RANGE: (f64, f64) = (0.1, 5.0);

struct Profile<'a> {
    points: &'a [CurvePoint],
    bounds: Bounds,
}

impl Profile<'_> {
    /// Best linear coefficients and weighted RSS for fixed `(p_th, nu, mu)`.
    fn solve(&self, p_th: f64, nu: f64, mu: f64) -> Option<([f64; 4], f64)> {
        let n = self.points.len();
        let mut m = DMatrix::<f64>::zeros(n, 4);
        let mut y = DVector::<f64>::zeros(n);
        for (i, pt) in self.points.iter().enumerate() {
            let w = 1.0 / pt.fit_variance().sqrt();
            let lf = pt.l as f64;
            let x = (pt.p - p_th) * lf.powf(1.0 / nu);
            m[(i, 0)] = w;
            m[(i, 1)] = w * x;
            m[(i, 2)] = w * x * x;
            m[(i, 3)] = w * lf.powf(-1.0 / mu);
            y[i] = w * pt.p_succ();
        }
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) || svd.singular_values.min() <= smax * 1e-12 {
            return None;
        }
        let sol = svd.solve(&y, smax * 1e-14).ok()?;
        let rss = (&m * &sol - &y).norm_squared();
        Some(([sol[0], sol[1], sol[2], sol[3]], rss))
    }

    fn clamp(&self, x: &[f64]) -> (f64, f64, f64, f64) {
        let b = &self.bounds;
        let c = [x[0].clamp(b.p_th.0, b.p_th.1), x[1].clamp(b.nu.0, b.nu.1), x[2].clamp(b.mu.0, b.mu.1)];
        // Distance outside the box, scaled per axis.
        let out = ((x[0] - c[0]) / (b.p_th.1 - b.p_th.0)).abs() + ((x[1] - c[1]) / (b.nu.1 - b.nu.0)).abs() + ((x[2] - c[2]) / (b.mu.1 - b.mu.0)).abs();
        (c[0], c[1], c[2], out)
    }
}

impl CostFunction for Profile<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> Result<f64, argmin::core::Error> {
        let (p_th, nu, mu, outside) = self.clamp(x);
        let rss = self.solve(p_th, nu, mu).map_or(f64::MAX / 4.0, |r| r.1);
        Ok(rss * (1.0 + outside) + outside * 1e3)
    }
}

fn distinct(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    xs
}

/// Sizes-independence test: if one value per `p`, shared by all `L`, already
/// explains the data, the curves do not cross and `p_th` is undetermined.
fn check_l_dependence(points: &[CurvePoint]) -> Result<(), StatsError> {
    let ps = distinct(points.iter().map(|x| x.p).collect());
    let mut chi2 = 0.0;
    for &p in &ps {
        let group: Vec<&CurvePoint> = points.iter().filter(|x| (x.p - p).abs() < 1e-12).collect();
        let wsum: f64 = group.iter().map(|x| 1.0 / x.fit_variance()).sum();
        let mean = group.iter().map(|x| x.p_succ() / x.fit_variance()).sum::<f64>() / wsum;
        chi2 += group.iter().map(|x| (x.p_succ() - mean).powi(2) / x.fit_variance()).sum::<f64>();
    }
    let dof = points.len() - ps.len();
    // Within three standard deviations of a chi-square with `dof` degrees.
    if dof == 0 || chi2 <= dof as f64 + 3.0 * (2.0 * dof as f64).sqrt() {
        return Err(StatsError::NoCrossing { chi2_null: chi2, dof });
    }
    Ok(())
}

/// Fits the finite-size-scaling form to success curves of at least three
/// sizes and four rates.
pub fn fit_threshold(points: &[CurvePoint]) -> Result<FitResult, StatsError> {
    let sizes = distinct(points.iter().map(|x| x.l as f64).collect());
    if sizes.len() < 3 {
        return Err(StatsError::TooFewSizes { needed: 3, found: sizes.len() });
    }
    let ps = distinct(points.iter().map(|x| x.p).collect());
    if ps.len() < 4 {
        return Err(StatsError::TooFewRates { needed: 4, found: ps.len() });
    }
    check_l_dependence(points)?;
    let bounds = Bounds { p_th: (ps[0], ps[ps.len() - 1]), nu: NU_RANGE, mu: MU_RANGE };
    let profile = Profile { points, bounds };

    // Coarse grid for starting points.
    let mut seeds: Vec<(f64, [f64; 3])> = Vec::new();
    for i in 0..=24 {
        let p_th = bounds.p_th.0 + (bounds.p_th.1 - bounds.p_th.0) * i as f64 / 24.0;
        for &nu in &[0.6, 0.9, 1.3, 1.8, 2.5, 3.5, 4.8] {
            for &mu in &[0.15, 0.3, 0.6, 1.2, 2.5, 4.8] {
                if let Some((_, rss)) = profile.solve(p_th, nu, mu) {
                    seeds.push((rss, [p_th, nu, mu]));
                }
            }
        }
    }
    if seeds.is_empty() {
        return Err(StatsError::DegenerateDesign);
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

    let span = bounds.p_th.1 - bounds.p_th.0;
    let mut best: Option<(f64, [f64; 3])> = None;
    for &(seed_rss, x0) in seeds.iter().take(6) {
        let simplex = vec![
            x0.to_vec(),
            vec![x0[0] + 0.05 * span, x0[1], x0[2]],
            vec![x0[0], x0[1] * 1.2, x0[2]],
            vec![x0[0], x0[1], x0[2] * 1.3],
        ];
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-12).map_err(|_| StatsError::DegenerateDesign)?;
        let run = Executor::new(Profile { points, bounds }, solver).configure(|s| s.max_iters(2000)).run();
        let candidate = match run {
            Ok(res) => {
                let state = res.state();
                let x = state.best_param.clone().unwrap_or_else(|| x0.to_vec());
                let (p_th, nu, mu, _) = profile.clamp(&x);
                profile.solve(p_th, nu, mu).map(|(_, rss)| (rss, [p_th, nu, mu]))
            }
            Err(_) => Some((seed_rss, x0)),
        };
        if let Some(c) = candidate {
            if best.is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
    }
    let (rss, [p_th, nu, mu]) = best.ok_or(StatsError::DegenerateDesign)?;
    let (lin, _) = profile.solve(p_th, nu, mu).ok_or(StatsError::DegenerateDesign)?;
    let edge = 1e-6 * span.max(1e-12);
    Ok(FitResult {
        a: lin[0],
        b: lin[1],
        c: lin[2],
        d_coef: lin[3],
        p_th,
        nu,
        mu,
        rss,
        dof: points.len().saturating_sub(7),
        bounds,
        extrapolation: p_th <= bounds.p_th.0 + edge || p_th >= bounds.p_th.1 - edge,
    })
}

/// Crossing of two curves measured on the same rates: the root of a
/// weighted straight-line fit to their difference over the rates where the
/// difference changes sign. Works for falling (success) and rising
/// (spanning) curves alike.
pub fn curve_crossing(small: &[CurvePoint], large: &[CurvePoint]) -> Result<f64, StatsError> {
    let saturated = |a: &CurvePoint, b: &CurvePoint| {
        (a.n_success == 0 && b.n_success == 0) || (a.n_success == a.n_total && b.n_success == b.n_total)
    };
    let mut diffs: Vec<(f64, f64, f64)> = Vec::new();
    for a in small {
        if let Some(b) = large.iter().find(|b| (b.p - a.p).abs() < 1e-12) {
            if !saturated(a, b) {
                diffs.push((a.p, b.p_succ() - a.p_succ(), a.fit_variance() + b.fit_variance()));
            }
        }
    }
    diffs.sort_by(|x, y| x.0.total_cmp(&y.0));
    if diffs.len() < 2 {
        return Err(StatsError::TooFewRates { needed: 2, found: diffs.len() });
    }
    // Orient so the difference runs from positive to negative.
    let orient = (diffs[0].1 - diffs[diffs.len() - 1].1).signum();
    if orient == 0.0 {
        return Err(StatsError::NoCrossing { chi2_null: f64::NAN, dof: diffs.len() });
    }
    for x in diffs.iter_mut() {
        x.1 *= orient;
    }
    // The bracket runs from the last rate where the difference is
    // significantly positive to the first after it where it is negative.
    let lo = diffs.iter().rposition(|x| x.1 > 2.0 * x.2.sqrt()).unwrap_or(0);
    let hi = (lo + 1..diffs.len())
        .find(|&i| diffs[i].1 < -2.0 * diffs[i].2.sqrt())
        .or_else(|| (lo + 1..diffs.len()).find(|&i| diffs[i].1 <= 0.0))
        .unwrap_or(diffs.len() - 1);
    let window = &diffs[lo..=hi.max(lo + 1).min(diffs.len() - 1)];
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, v) in window {
        let w = 1.0 / v;
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(StatsError::DegenerateDesign);
    }
    let slope = (sw * sxy - sx * sy) / det;
    let icpt = (sy - slope * sx) / sw;
    if slope >= 0.0 {
        return Err(StatsError::NoCrossing { chi2_null: f64::NAN, dof: window.len() });
    }
    Ok(-icpt / slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashingModel {
    Independent,
    Depolarizing,
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Entropy of the single-channel distribution `{1 - p, p/(d-1), ...}`.
pub fn channel_entropy(d: u32, p: f64) -> f64 {
    let k = (d - 1) as f64;
    -xlog2x(1.0 - p) - k * xlog2x(p / k)
}

/// Error rate at which the hashing rate reaches zero.
pub fn hashing_threshold(d: u32, model: HashingModel) -> Result<f64, StatsError> {
    if !crate::lattice::is_prime(d as u64) {
        return Err(crate::LatticeError::NotPrime(d as u64).into());
    }
    let (f, upper): (Box<dyn Fn(f64) -> f64>, f64) = match model {
        // X and Z errors independent: the joint entropy doubles.
        HashingModel::Independent => {
            let target = (d as f64).log2();
            (Box::new(move |p| 2.0 * channel_entropy(d, p) - target), (d - 1) as f64 / d as f64)
        }
        HashingModel::Depolarizing => {
            if d != 2 {
                return Err(StatsError::DepolarizingNeedsQubit(d));
            }
            // X, Y and Z each with probability p/3.
            (Box::new(|p| channel_entropy(4, p) - 1.0), 0.75)
        }
    };
    let (mut lo, mut hi) = (0.0f64, upper);
    if f(hi) <= 0.0 {
        return Err(StatsError::NoRoot { upper });
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
