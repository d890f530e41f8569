use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EcosystemError;

/// Largest number of non-zero differences for which the p-value is exact.
pub const EXACT_LIMIT: usize = 12;

/// Generator used by [`resampled_group_test`]: ChaCha8 seeded with the
/// user seed, one stream per iteration.
pub const PRNG_NAME: &str = "chacha8:seed_from_u64+stream(iteration)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Doubled mid-ranks of `|d|`, so tied ranks stay integral.
fn doubled_ranks(d: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Paired signed-rank test of `x` against `y`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, EcosystemError> {
    if x.len() != y.len() {
        return Err(EcosystemError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.is_empty() {
        return Err(EcosystemError::EmptySample);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EcosystemError::NonFinite);
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|&v| v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(EcosystemError::AllZeroDifferences);
    }
    let (ranks, ties) = doubled_ranks(&d);
    let total2 = (n * (n + 1)) as u64;
    let wp2: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w2 = wp2.min(total2 - wp2);
    let w_plus = wp2 as f64 / 2.0;
    let w_minus = (total2 - wp2) as f64 / 2.0;
    let statistic = w2 as f64 / 2.0;

    let (p_value, method) = if n <= EXACT_LIMIT {
        // distribution of the doubled positive-rank sum over all sign patterns
        let mut counts = vec![0u64; total2 as usize + 1];
        counts[0] = 1;
        for &r in &ranks {
            for s in (r as usize..counts.len()).rev() {
                counts[s] += counts[s - r as usize];
            }
        }
        let extreme: u64 = counts
            .iter()
            .enumerate()
            .filter(|&(s, _)| s as u64 <= w2 || s as u64 >= total2 - w2)
            .map(|(_, c)| c)
            .sum();
        (extreme as f64 / (1u64 << n) as f64, PValueMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let z = (statistic - mean) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        ((2.0 * normal.cdf(-z.abs())).min(1.0), PValueMethod::NormalApproximation)
    };
    Ok(WilcoxonResult { n, w_plus, w_minus, statistic, p_value, method })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleResult {
    pub min_p: f64,
    pub iterations: u64,
    /// Iterations whose paired differences were not all zero.
    pub valid_iterations: u64,
    pub sample_size: usize,
    pub seed: u64,
    pub prng: String,
}

/// Draws `|n2|` values from `n1` without replacement, tests them against
/// `n2`, and keeps the smallest p-value over all iterations.
pub fn resampled_group_test(n1: &[f64], n2: &[f64], iterations: u64, seed: u64) -> Result<ResampleResult, EcosystemError> {
    if n2.is_empty() {
        return Err(EcosystemError::EmptySample);
    }
    if n2.len() > n1.len() {
        return Err(EcosystemError::SampleTooLarge { sample: n2.len(), population: n1.len() });
    }
    if iterations == 0 {
        return Err(EcosystemError::ZeroIterations);
    }
    let one = |i: u64| -> Result<Option<f64>, EcosystemError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        let picked: Vec<f64> = rand::seq::index::sample(&mut rng, n1.len(), n2.len()).into_iter().map(|k| n1[k]).collect();
        match wilcoxon_signed_rank(&picked, n2) {
            Ok(r) => Ok(Some(r.p_value)),
            Err(EcosystemError::AllZeroDifferences) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let (min_p, valid) = (0..iterations)
        .into_par_iter()
        .map(|i| one(i).map(|p| p.map_or((f64::INFINITY, 0u64), |p| (p, 1))))
        .try_reduce(|| (f64::INFINITY, 0), |a, b| Ok((a.0.min(b.0), a.1 + b.1)))?;
    if valid == 0 {
        return Err(EcosystemError::AllZeroDifferences);
    }
    Ok(ResampleResult {
        min_p,
        iterations,
        valid_iterations: valid,
        sample_size: n2.len(),
        seed,
        prng: PRNG_NAME.to_string(),
    })
}
