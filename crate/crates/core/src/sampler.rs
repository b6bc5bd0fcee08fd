//! Seeded generation of the two data models: equicorrelated normal vectors
//! under a fixed truth assignment, and the two-point normal mixture with
//! random truth.
//!
//! Equicorrelation uses the one-factor representation
//! `X_i = sqrt(rho) Z_0 + sqrt(1 - rho) Z_i + mu_i`, which is exact for this
//! covariance and costs O(n) per draw.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dist::Probability;
use crate::error::{Error, Result};

/// Which hypotheses are true nulls, and the mean shift of every component.
///
/// Indices are zero-based. `n0 = 0` is accepted; the FDP of such a
/// configuration is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthAssignment {
    is_null: Vec<bool>,
    shifts: Vec<f64>,
}

impl TruthAssignment {
    /// Nulls at `null_indices` get shift 0, every other index gets `delta`.
    pub fn new(n: usize, null_indices: &[usize], delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let mut is_null = vec![false; n];
        for &i in null_indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            is_null[i] = true;
        }
        let shifts = is_null.iter().map(|&h| if h { 0.0 } else { delta }).collect();
        Ok(Self { is_null, shifts })
    }

    /// The first `n0` indices are nulls and the last `n - n0` carry `delta`.
    pub fn last_alternatives(n: usize, n0: usize, delta: f64) -> Result<Self> {
        if n0 > n {
            return Err(Error::InvalidCount(format!("n0 = {n0} exceeds n = {n}")));
        }
        Self::new(n, &(0..n0).collect::<Vec<_>>(), delta)
    }

    /// Arbitrary per-component shifts (used for monotonicity sweeps and the
    /// FNR reference point).
    pub fn with_shifts(is_null: Vec<bool>, shifts: Vec<f64>) -> Result<Self> {
        if is_null.len() != shifts.len() {
            return Err(Error::InvalidCount(format!(
                "{} null flags but {} shifts",
                is_null.len(),
                shifts.len()
            )));
        }
        if let Some(&bad) = shifts.iter().find(|s| !s.is_finite()) {
            return Err(Error::OutOfRange {
                name: "shift",
                value: bad,
                expected: "a finite real",
            });
        }
        Ok(Self { is_null, shifts })
    }

    /// Same null/alternative labels with every component moved to `shift`.
    pub fn with_all_shifts(&self, shift: f64) -> Result<Self> {
        Self::with_shifts(self.is_null.clone(), vec![shift; self.n()])
    }

    pub fn n(&self) -> usize {
        self.is_null.len()
    }

    pub fn n0(&self) -> usize {
        self.is_null.iter().filter(|&&h| h).count()
    }

    pub fn n1(&self) -> usize {
        self.n() - self.n0()
    }

    pub fn is_null(&self, i: usize) -> bool {
        self.is_null[i]
    }

    pub fn null_mask(&self) -> &[bool] {
        &self.is_null
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn null_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.is_null[i]).collect()
    }

    pub fn alt_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.is_null[i]).collect()
    }

    /// The common alternative shift, if all false nulls share one.
    pub fn delta(&self) -> Option<f64> {
        let mut alts = self.alt_indices().into_iter().map(|i| self.shifts[i]);
        let first = alts.next()?;
        alts.all(|s| s == first).then_some(first)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            expected: "(0, inf)",
        })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "rho",
            value: rho,
            expected: "[0, 1)",
        })
    }
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl Seed {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// A ChaCha8 generator keyed by `master_seed` on stream `stream_id`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer, used to derive per-scenario master seeds.
pub fn mix_seed(master_seed: u64, salt: u64) -> u64 {
    let mut z = master_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One-factor sampler for unit-variance normals with common correlation.
#[derive(Debug, Clone, Copy)]
pub struct EquicorrelatedSampler {
    common: f64,
    idiosyncratic: f64,
}

impl EquicorrelatedSampler {
    pub fn new(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self {
            common: rho.sqrt(),
            idiosyncratic: (1.0 - rho).sqrt(),
        })
    }

    /// Writes `sqrt(rho) Z_0 + sqrt(1 - rho) Z_i + means[i]` into `out`.
    /// Draw order is `Z_0, Z_1, ..., Z_n`.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, means: &[f64], out: &mut [f64]) {
        debug_assert_eq!(means.len(), out.len());
        let z0: f64 = rng.sample(StandardNormal);
        let shared = self.common * z0;
        for (x, &mu) in out.iter_mut().zip(means) {
            let z: f64 = rng.sample(StandardNormal);
            *x = shared + self.idiosyncratic * z + mu;
        }
    }
}

/// One draw of `X` under `truth` with common correlation `rho`.
pub fn sample_equicorrelated(truth: &TruthAssignment, rho: f64, seed: Seed) -> Result<Vec<f64>> {
    let sampler = EquicorrelatedSampler::new(rho)?;
    let mut out = vec![0.0; truth.n()];
    sampler.fill(&mut seed.rng(), truth.shifts(), &mut out);
    Ok(out)
}

/// Statistics and hidden labels from the two-point mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDraw {
    pub x: Vec<f64>,
    /// `false` = true null (`H_i = 0`), `true` = false null (`H_i = 1`).
    pub h: Vec<bool>,
}

/// Reusable sampler for the mixture model with independent Bernoulli labels.
#[derive(Debug, Clone, Copy)]
pub struct MixtureSampler {
    pi0: f64,
    delta: f64,
    inner: EquicorrelatedSampler,
}

impl MixtureSampler {
    pub fn new(pi0: Probability, delta: f64, rho: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            pi0: pi0.value(),
            delta,
            inner: EquicorrelatedSampler::new(rho)?,
        })
    }

    /// Labels are drawn first, then the normals; `means` is scratch space.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, h: &mut [bool], means: &mut [f64], x: &mut [f64]) {
        for (hi, mu) in h.iter_mut().zip(means.iter_mut()) {
            // P{H_i = 0} = pi0; random() is in [0, 1) so pi0 = 1 gives all nulls.
            *hi = rng.random::<f64>() >= self.pi0;
            *mu = if *hi { self.delta } else { 0.0 };
        }
        self.inner.fill(rng, means, x);
    }
}

pub fn sample_mixture(n: usize, pi0: Probability, delta: f64, rho: f64, seed: Seed) -> Result<MixtureDraw> {
    let sampler = MixtureSampler::new(pi0, delta, rho)?;
    let mut h = vec![false; n];
    let mut means = vec![0.0; n];
    let mut x = vec![0.0; n];
    sampler.fill(&mut seed.rng(), &mut h, &mut means, &mut x);
    Ok(MixtureDraw { x, h })
}
