//! Standard Cauchy sampling and Monte-Carlo counterparts of the fractional
//! moment, moment-generating-function and lower-tail bounds for sums of
//! `|X|^{1/2}`.
//!
//! All estimators split their samples into fixed-size blocks, each drawn from
//! its own substream (`block#i`). The result therefore does not depend on how
//! the blocks are scheduled, and a block-parallel caller reproduces the
//! sequential answer bit for bit.

use std::f64::consts::{PI, SQRT_2};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{open_unit, RandomSeed, StreamRng};
use crate::stats::{proportion, Estimate, MeanAccumulator};

/// E[|X|^{1/2}] for a standard Cauchy X.
pub const ABS_SQRT_MOMENT: f64 = SQRT_2;

const BLOCK: u64 = 1 << 16;

/// Quantile function of the standard Cauchy distribution.
pub fn cauchy_inverse_cdf(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("Cauchy quantile needs u in (0, 1), got {u}")));
    }
    Ok(quantile_unchecked(u))
}

#[inline]
fn quantile_unchecked(u: f64) -> f64 {
    (PI * (u - 0.5)).tan()
}

#[inline]
pub fn sample_cauchy<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    quantile_unchecked(open_unit(rng))
}

/// Fills `out` with i.i.d. standard Cauchy samples.
pub fn fill_cauchy<R: RngCore + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for x in out {
        *x = sample_cauchy(rng);
    }
}

/// Runs `per_block` over `total` units split into blocks with independent
/// substreams and merges the block accumulators in block order.
fn blocked(
    total: u64,
    seed: &RandomSeed,
    mut per_block: impl FnMut(&mut StreamRng, u64, &mut MeanAccumulator),
) -> MeanAccumulator {
    let mut acc = MeanAccumulator::default();
    let mut done = 0u64;
    let mut block = 0u64;
    while done < total {
        let count = BLOCK.min(total - done);
        let mut rng = seed.derive_indexed("block", block).rng();
        let mut local = MeanAccumulator::default();
        per_block(&mut rng, count, &mut local);
        acc.merge(&local);
        done += count;
        block += 1;
    }
    acc
}

/// Sample mean of |X|^{1/2} over `n` draws.
pub fn estimate_abs_sqrt_moment(n: u64, seed: &RandomSeed) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let acc = blocked(n, seed, |rng, count, acc| {
        for _ in 0..count {
            acc.push(sample_cauchy(rng).abs().sqrt());
        }
    });
    Ok(acc.estimate())
}

/// The bound 2/β on E[exp(−β|X|^{1/2})], valid for β > 1.
pub fn mgf_analytic_bound(beta: f64) -> Result<f64> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::domain(format!(
            "the MGF bound holds only for beta > 1, got {beta}"
        )));
    }
    Ok(2.0 / beta)
}

/// Sample mean of exp(−β|X|^{1/2}).
pub fn estimate_mgf(beta: f64, n: u64, seed: &RandomSeed) -> Result<Estimate> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let acc = blocked(n, seed, |rng, count, acc| {
        for _ in 0..count {
            acc.push((-beta * sample_cauchy(rng).abs().sqrt()).exp());
        }
    });
    Ok(acc.estimate())
}

fn check_tail_args(d: f64, k: usize) -> Result<()> {
    if !(d > 1.0) {
        return Err(Error::domain(format!("tail bound needs D > 1, got {d}")));
    }
    if k == 0 {
        return Err(Error::domain("tail bound needs k >= 1"));
    }
    Ok(())
}

/// min(1, (10/D)^k): bound on Pr[S̃ ≤ E[S̃]/D].
pub fn tail_analytic_bound(d: f64, k: usize) -> Result<f64> {
    check_tail_args(d, k)?;
    Ok((10.0 / d).powf(k as f64).min(1.0))
}

/// The sharper value (2·e^{√2/D}/D)^k the Chernoff argument yields at β = D,
/// clamped to 1. Reported next to the stated bound, never asserted.
pub fn tail_proof_bound(d: f64, k: usize) -> Result<f64> {
    check_tail_args(d, k)?;
    Ok((2.0 * (SQRT_2 / d).exp() / d).powf(k as f64).min(1.0))
}

/// Fraction of trials in which Σ_{j≤k} |X_j|^{1/2} ≤ √2·k/D.
pub fn estimate_tail_probability(d: f64, k: usize, trials: u64, seed: &RandomSeed) -> Result<Estimate> {
    check_tail_args(d, k)?;
    if trials == 0 {
        return Err(Error::domain("trial count must be at least 1"));
    }
    let threshold = ABS_SQRT_MOMENT * k as f64 / d;
    let mut hits = 0u64;
    blocked(trials, seed, |rng, count, _| {
        for _ in 0..count {
            let s_tilde: f64 = (0..k).map(|_| sample_cauchy(rng).abs().sqrt()).sum();
            if s_tilde <= threshold {
                hits += 1;
            }
        }
    });
    Ok(proportion(hits, trials))
}

/// S = Σ|v_j| and S̃ = Σ|v_j|^{1/2} of a vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumStats {
    pub s: f64,
    pub s_tilde: f64,
    pub k: usize,
}

impl SumStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("sum statistics need a nonempty vector"));
        }
        Ok(Self {
            s: values.iter().map(|v| v.abs()).sum(),
            s_tilde: values.iter().map(|v| v.abs().sqrt()).sum(),
            k: values.len(),
        })
    }

    /// S ≤ S̃² ≤ k·S, allowing a few ulps of rounding on each side.
    pub fn sandwich_holds(&self) -> bool {
        const SLACK: f64 = 1e-12;
        let sq = self.s_tilde * self.s_tilde;
        self.s <= sq * (1.0 + SLACK) && sq <= self.k as f64 * self.s * (1.0 + SLACK)
    }
}

pub fn check_norm_sandwich(values: &[f64]) -> Result<bool> {
    Ok(SumStats::from_values(values)?.sandwich_holds())
}
