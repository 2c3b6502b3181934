//! Seeded random streams and the small set of statistical tools the
//! scenarios need: Pearson χ², binomial errors and least-squares fringe fits.
//!
//! Streams are ChaCha8 keystreams. The 256-bit key is the SHA-256 digest of
//! `(master seed, label)`, and the 64-bit ChaCha stream id is the integer
//! index, so independence comes from the label and index rather than from
//! arithmetic on the seed. A stream can be split further into disjoint
//! keystream regions with [`SeededStream::substream`].

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const KEY_DOMAIN: &[u8] = b"reduxim/stream/v1";

/// Each substream owns a window of 2^32 keystream words.
const REGION_SHIFT: u32 = 32;
const REGION_MASK: u64 = (1 << 36) - 1;

/// A reproducible random stream identified by `(master, label, index)`.
#[derive(Debug, Clone)]
pub struct SeededStream {
    master: u64,
    label: String,
    index: u64,
    rng: ChaCha8Rng,
}

pub fn derive_stream(master: u64, label: &str, index: u64) -> SeededStream {
    let mut hasher = Sha256::new();
    hasher.update(KEY_DOMAIN);
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    SeededStream {
        master,
        label: label.to_owned(),
        index,
        rng,
    }
}

impl SeededStream {
    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// A stream over a disjoint keystream region of this one, selected by `key`.
    ///
    /// The same `(stream, key)` always yields the same draws, independent of
    /// how many values were consumed from the parent.
    pub fn substream(&self, key: u64) -> SeededStream {
        let region = (splitmix64(key) & REGION_MASK) + 1;
        let mut rng = self.rng.clone();
        rng.set_word_pos(u128::from(region) << REGION_SHIFT);
        SeededStream {
            master: self.master,
            label: self.label.clone(),
            index: self.index,
            rng,
        }
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform angle in `[0, 2π)`.
    pub fn angle(&mut self) -> f64 {
        let a = self.uniform() * TAU;
        if a >= TAU {
            0.0
        } else {
            a
        }
    }

    /// Exponential variate with the given rate (mean `1/rate`).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate.is_infinite() {
            return 0.0;
        }
        // 1 - U lies in (0, 1], so the log is finite.
        -(1.0 - self.uniform()).ln() / rate
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer; used to spread structured keys over substream regions.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn binomial_stderr(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Upper-tail probability of the χ² distribution: Q(k/2, x/2).
pub fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(dof as f64 / 2.0, statistic / 2.0)
}

/// Pearson goodness-of-fit test with `K - 1` degrees of freedom.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    if observed.len() != expected.len() {
        return Err(Error::InvalidConfig(format!(
            "{} observed bins but {} expected probabilities",
            observed.len(),
            expected.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::InvalidConfig("chi-square needs at least two bins".into()));
    }
    if expected.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidConfig("expected probabilities must be positive".into()));
    }
    let total_p: f64 = expected.iter().sum();
    if (total_p - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "expected probabilities sum to {total_p}, not 1"
        )));
    }
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut statistic = 0.0;
    for (bin, (&o, &p)) in observed.iter().zip(expected).enumerate() {
        let e = p * n;
        if e < 5.0 {
            return Err(Error::DegenerateBin { bin, expected: e });
        }
        let d = o as f64 - e;
        statistic += d * d / e;
    }
    let dof = observed.len() - 1;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

/// Least-squares fit of `offset + amplitude·cos(φ + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl FringeFit {
    /// Maximum of the fitted curve.
    pub fn max(&self) -> f64 {
        self.offset + self.amplitude
    }

    /// Minimum of the fitted curve, floored at zero intensity.
    pub fn min(&self) -> f64 {
        (self.offset - self.amplitude).max(0.0)
    }

    /// Fringe contrast `(I_max - I_min) / (I_max + I_min)`.
    pub fn visibility(&self) -> f64 {
        let (hi, lo) = (self.max(), self.min());
        if hi + lo <= 0.0 {
            0.0
        } else {
            (hi - lo) / (hi + lo)
        }
    }
}

pub fn fit_fringe(phi: &[f64], values: &[f64]) -> Result<FringeFit> {
    if phi.len() != values.len() {
        return Err(Error::RankDeficient(format!(
            "{} phases but {} values",
            phi.len(),
            values.len()
        )));
    }
    if phi.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "need at least 3 grid points, got {}",
            phi.len()
        )));
    }
    let design = DMatrix::from_fn(phi.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => phi[r].cos(),
        _ => phi[r].sin(),
    });
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(Error::RankDeficient(
            "grid has fewer than three distinct phases".into(),
        ));
    }
    let rhs = DVector::from_column_slice(values);
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let (c0, ca, cb) = (coef[0], coef[1], coef[2]);
    // ca·cos φ + cb·sin φ = c1·cos(φ + φ0) with c1 cos φ0 = ca, c1 sin φ0 = -cb
    let amplitude = ca.hypot(cb);
    let phase = if amplitude > 0.0 { (-cb).atan2(ca) } else { 0.0 };
    Ok(FringeFit {
        offset: c0,
        amplitude,
        phase,
    })
}

/// `n` equally spaced phases over `[0, 2π)`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}
