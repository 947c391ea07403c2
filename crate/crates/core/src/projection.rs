//! The linear map f(u) = A·u / T with an i.i.d. standard Cauchy matrix A.
//!
//! By 1-stability every coordinate of A·u is distributed as ‖u‖₁ times a
//! standard Cauchy variable, so ‖f(u)‖₁ = ‖u‖₁ · S / T where S is a sum of k
//! absolute Cauchy variables. T normalises S: it is the expectation of that
//! sum with every term truncated at k/2, i.e. (k/π)·ln(1 + (k/2)²).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cauchy_stats::fill_cauchy;
use crate::error::{check_dim, Error, Result};
use crate::points::l1_norm;
use crate::rng::RandomSeed;
use crate::stats::proportion_se;

pub const MATRIX_MAGIC: &[u8; 4] = b"L1FD";
pub const MATRIX_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 + 8;

/// Truncation level of each |X_j| inside the scaling factor.
pub fn truncation_level(k: usize) -> f64 {
    k as f64 / 2.0
}

/// T = Σ_{j≤k} E[|X_j|·1{|X_j| ≤ k/2}] = (k/π)·ln(1 + (k/2)²).
pub fn scaling_factor(k: usize) -> f64 {
    let m = truncation_level(k);
    k as f64 / PI * (m * m).ln_1p()
}

/// A k×d Cauchy matrix with its scaling factor, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyMatrix {
    k: usize,
    d: usize,
    entries: Vec<f64>,
    scale: f64,
    seed: RandomSeed,
}

pub fn make_projection(d: usize, k: usize, epsilon: f64, seed: &RandomSeed) -> Result<CauchyMatrix> {
    if d == 0 || k == 0 {
        return Err(Error::domain(format!(
            "projection dimensions must be positive (d = {d}, k = {k})"
        )));
    }
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::domain(format!(
            "projection epsilon must lie in (0, 1/2], got {epsilon}"
        )));
    }
    let mut entries = vec![0.0; k * d];
    fill_cauchy(&mut seed.rng(), &mut entries);
    Ok(CauchyMatrix {
        k,
        d,
        entries,
        scale: scaling_factor(k),
        seed: seed.clone(),
    })
}

impl CauchyMatrix {
    pub fn target_dim(&self) -> usize {
        self.k
    }

    pub fn source_dim(&self) -> usize {
        self.d
    }

    /// The scaling factor T.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> &RandomSeed {
        &self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, x.len())?;
        let mut out = vec![0.0; self.k];
        self.project_into(x, &mut out);
        Ok(out)
    }

    /// `out = A·x / T`; lengths must already match.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.d);
        debug_assert_eq!(out.len(), self.k);
        let inv = 1.0 / self.scale;
        for (row, o) in self.entries.chunks_exact(self.d).zip(out.iter_mut()) {
            *o = dot(row, x) * inv;
        }
    }

    /// ‖A·x‖₁ without the 1/T normalisation.
    pub fn raw_image_norm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        Ok(self.entries.chunks_exact(self.d).map(|row| dot(row, x).abs()).sum())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.entries.len());
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&self.scale.to_le_bytes());
        out.extend_from_slice(&self.seed.value().to_le_bytes());
        for x in &self.entries {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Parses the binary artifact. Only the numeric seed value is stored, so
    /// the returned matrix carries a seed without a stream label.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "matrix artifact",
            detail,
        };
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[0..4] != MATRIX_MAGIC {
            return Err(bad("bad magic bytes".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MATRIX_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let k = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let scale = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[22..30].try_into().unwrap());
        if k == 0 || d == 0 {
            return Err(bad(format!("zero dimension (k = {k}, d = {d})")));
        }
        let body = &bytes[HEADER_LEN..];
        if body.len() != 8 * k * d {
            return Err(bad(format!("expected {} entry bytes, found {}", 8 * k * d, body.len())));
        }
        if !(scale > 0.0) {
            return Err(bad(format!("non-positive scaling factor {scale}")));
        }
        let entries = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            k,
            d,
            entries,
            scale,
            seed: RandomSeed::new(seed),
        })
    }

    /// Reattaches the full seed (with its stream label) after loading.
    pub fn set_seed(&mut self, seed: RandomSeed) -> Result<()> {
        if seed.value() != self.seed.value() {
            return Err(Error::Format {
                what: "matrix artifact",
                detail: format!("seed {} does not match stored value {}", seed, self.seed.value()),
            });
        }
        self.seed = seed;
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler keep several FMAs in flight
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// k = ζ⁻¹ · (ln(1/δ))^{1/(ε−γ)}, the target dimension of the asymmetric
/// distortion guarantee, with ζ(γ) replaced by a calibration multiplier.
pub fn distortion_dimension(epsilon: f64, gamma: f64, delta: f64, zeta_multiplier: f64) -> Result<usize> {
    check_probe_args(epsilon, gamma)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(zeta_multiplier > 0.0) {
        return Err(Error::domain("zeta multiplier must be positive"));
    }
    let k = zeta_multiplier * (1.0 / delta).ln().powf(1.0 / (epsilon - gamma));
    if !k.is_finite() || k > u32::MAX as f64 {
        return Err(Error::Infeasible(format!(
            "distortion dimension {k:.3e} for epsilon {epsilon}, gamma {gamma}"
        )));
    }
    Ok((k.ceil() as usize).max(1))
}

fn check_probe_args(epsilon: f64, gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < epsilon && epsilon <= 0.5) {
        return Err(Error::domain(format!(
            "need 0 < gamma < epsilon <= 1/2, got gamma = {gamma}, epsilon = {epsilon}"
        )));
    }
    Ok(())
}

/// Empirical contraction / expansion rates of fresh projections on a fixed
/// unit-distance pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub contraction_rate: f64,
    pub expansion_rate: f64,
    pub pairs_tested: u64,
    pub epsilon: f64,
    pub gamma: f64,
    pub k: usize,
    pub d: usize,
}

impl DistortionReport {
    /// (1+γ)/(1+ε), the bound on the expansion rate.
    pub fn expansion_bound(&self) -> f64 {
        (1.0 + self.gamma) / (1.0 + self.epsilon)
    }

    pub fn contraction_sigma(&self, delta: f64) -> f64 {
        proportion_se(delta, self.pairs_tested)
    }

    pub fn expansion_sigma(&self) -> f64 {
        proportion_se(self.expansion_bound(), self.pairs_tested)
    }
}

pub fn distortion_probe(
    d: usize,
    k: usize,
    epsilon: f64,
    gamma: f64,
    pairs: u64,
    seed: &RandomSeed,
) -> Result<DistortionReport> {
    check_probe_args(epsilon, gamma)?;
    if pairs == 0 {
        return Err(Error::domain("pair count must be at least 1"));
    }
    if d == 0 || k == 0 {
        return Err(Error::domain("dimensions must be positive"));
    }
    // p = 0 and q spread evenly so that ‖p − q‖₁ = 1
    let diff = vec![1.0 / d as f64; d];
    let dist = l1_norm(&diff);
    let mut contracted = 0u64;
    let mut expanded = 0u64;
    for pair in 0..pairs {
        let m = make_projection(d, k, epsilon, &seed.derive_indexed("pair", pair))?;
        let image = m.raw_image_norm(&diff)? / m.scale();
        if image <= (1.0 - epsilon) * dist {
            contracted += 1;
        }
        if image >= (1.0 + epsilon) * dist {
            expanded += 1;
        }
    }
    Ok(DistortionReport {
        contraction_rate: contracted as f64 / pairs as f64,
        expansion_rate: expanded as f64 / pairs as f64,
        pairs_tested: pairs,
        epsilon,
        gamma,
        k,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed() -> RandomSeed {
        RandomSeed::with_stream(42, "projection-test")
    }

    #[test]
    fn scaling_factor_closed_form() {
        // (100/π)·ln(1 + 50²)
        let t = scaling_factor(100);
        assert!((t - 249.059_849_370_9).abs() < 1e-9, "{t}");
        for k in 1..200 {
            assert!(scaling_factor(k + 1) > scaling_factor(k));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_projection(0, 3, 0.1, &seed()).is_err());
        assert!(make_projection(3, 0, 0.1, &seed()).is_err());
        assert!(make_projection(3, 3, 0.0, &seed()).is_err());
        assert!(make_projection(3, 3, 0.6, &seed()).is_err());
        let m = make_projection(3, 2, 0.5, &seed()).unwrap();
        assert!(matches!(
            m.project(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn deterministic_from_seed() {
        let a = make_projection(5, 4, 0.1, &seed()).unwrap();
        let b = make_projection(5, 4, 0.1, &seed()).unwrap();
        assert_eq!(a, b);
        let c = make_projection(5, 4, 0.1, &seed().derive("other")).unwrap();
        assert_ne!(a.entries(), c.entries());
    }

    #[test]
    fn zero_maps_to_zero() {
        let m = make_projection(6, 3, 0.2, &seed()).unwrap();
        assert_eq!(m.project(&[0.0; 6]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn artifact_round_trip_is_bit_exact() {
        let m = make_projection(7, 3, 0.25, &seed()).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], b"L1FD");
        assert_eq!(bytes.len(), 30 + 8 * 21);
        let back = CauchyMatrix::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.entries(), m.entries());
        assert_eq!(back.scale().to_bits(), m.scale().to_bits());
        assert_eq!(back.seed().value(), 42);

        let mut broken = bytes.clone();
        broken[0] = b'X';
        assert!(CauchyMatrix::from_bytes(&broken).is_err());
        assert!(CauchyMatrix::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn distortion_dimension_formula() {
        // ε = 0.5, γ = 0.05, δ = 0.1: (ln 10)^{1/0.45} ≈ 6.38
        assert_eq!(distortion_dimension(0.5, 0.05, 0.1, 1.0).unwrap(), 7);
        assert!(distortion_dimension(0.5, 0.5, 0.1, 1.0).is_err());
        assert!(distortion_dimension(0.5, 0.05, 1.0, 1.0).is_err());
    }

    #[test]
    fn probe_rates_are_probabilities() {
        let r = distortion_probe(4, 1, 0.5, 0.05, 2000, &seed()).unwrap();
        assert!((0.0..=1.0).contains(&r.contraction_rate));
        assert!((0.0..=1.0).contains(&r.expansion_rate));
        assert_eq!(r.pairs_tested, 2000);
        assert!((r.expansion_bound() - 0.7).abs() < 1e-12);
        assert!(distortion_probe(4, 1, 0.5, 0.6, 10, &seed()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn projection_is_linear(
            x in proptest::collection::vec(-100.0f64..100.0, 8),
            y in proptest::collection::vec(-100.0f64..100.0, 8),
            alpha in -10.0f64..10.0,
            s in 0u64..1000,
        ) {
            let m = make_projection(8, 5, 0.3, &RandomSeed::new(s)).unwrap();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let scaled: Vec<f64> = x.iter().map(|a| alpha * a).collect();
            let (fx, fy) = (m.project(&x).unwrap(), m.project(&y).unwrap());
            let fsum = m.project(&sum).unwrap();
            let fscaled = m.project(&scaled).unwrap();
            for i in 0..5 {
                // round-off relative to the magnitude of the terms involved
                let mag: f64 = m.row(i).iter().zip(x.iter().zip(&y))
                    .map(|(a, (u, v))| a.abs() * (u.abs() + v.abs())).sum::<f64>() / m.scale();
                proptest::prop_assert!((fsum[i] - fx[i] - fy[i]).abs() <= 1e-9 * mag.max(1e-300));
                proptest::prop_assert!((fscaled[i] - alpha * fx[i]).abs() <= 1e-9 * (alpha.abs() * mag).max(1e-300));
            }
        }
    }
}
