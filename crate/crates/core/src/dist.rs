//! Scalar distribution kernels: the standard normal, its location family, and
//! the Poisson-binomial distribution that backs every exact evaluator.
//!
//! Thresholds are plain `f64` values where `+inf` and `-inf` are meaningful:
//! `x >= f64::INFINITY` is false for every finite `x`, and `x >= f64::NEG_INFINITY`
//! is always true. Upper-tail probabilities are computed directly from `erfc`
//! so that levels such as `1e-20` keep full relative precision.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value known to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::OutOfRange {
                name: "probability",
                value,
                expected: "[0, 1]",
            })
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Standard normal CDF `F0(x)`. Saturates to 0 and 1 in the far tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - F0(x)`, accurate in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `ln(1 - F0(x))`, finite for every finite `x`.
pub fn std_normal_log_sf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x < 35.0 {
        return std_normal_sf(x).ln();
    }
    // Mills-ratio asymptotic series; truncation error below 1e-12 relative here.
    let z = 1.0 / (x * x);
    let series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
    -0.5 * x * x - x.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

/// `ln F0(x)`.
pub fn std_normal_log_cdf(x: f64) -> f64 {
    std_normal_log_sf(-x)
}

/// Why a quantile could not be returned as a finite number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfiniteQuantile {
    /// `p == 0`: the quantile is `-inf`.
    Negative,
    /// `p == 1`: the quantile is `+inf`.
    Positive,
}

impl InfiniteQuantile {
    pub fn as_threshold(self) -> f64 {
        match self {
            Self::Negative => f64::NEG_INFINITY,
            Self::Positive => f64::INFINITY,
        }
    }
}

/// Inverse of [`std_normal_cdf`].
///
/// `p == 0` and `p == 1` are reported through [`Error::InfiniteQuantile`] so
/// callers can map them to explicit infinite thresholds.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            expected: "[0, 1]",
        });
    }
    if p == 0.0 {
        return Err(Error::InfiniteQuantile(InfiniteQuantile::Negative));
    }
    if p == 1.0 {
        return Err(Error::InfiniteQuantile(InfiniteQuantile::Positive));
    }
    if p > 0.5 {
        // 1 - p is exact for p in (0.5, 1).
        Ok(-lower_tail_quantile(1.0 - p))
    } else {
        Ok(lower_tail_quantile(p))
    }
}

/// `x` with `1 - F0(x) = q`, computed without forming `1 - q`.
pub fn std_normal_upper_quantile(q: f64) -> Result<f64> {
    match std_normal_quantile(q) {
        Ok(x) => Ok(-x),
        Err(Error::InfiniteQuantile(side)) => Err(Error::InfiniteQuantile(match side {
            InfiniteQuantile::Negative => InfiniteQuantile::Positive,
            InfiniteQuantile::Positive => InfiniteQuantile::Negative,
        })),
        Err(e) => Err(e),
    }
}

/// Threshold `t` with `F0(t) = p`, mapping the endpoints to `-inf`/`+inf`.
pub fn threshold_at_lower_level(p: f64) -> Result<f64> {
    match std_normal_quantile(p) {
        Err(Error::InfiniteQuantile(side)) => Ok(side.as_threshold()),
        other => other,
    }
}

/// Threshold `t` with `1 - F0(t) = q`, mapping the endpoints to `+inf`/`-inf`.
pub fn threshold_at_upper_level(q: f64) -> Result<f64> {
    match std_normal_upper_quantile(q) {
        Err(Error::InfiniteQuantile(side)) => Ok(side.as_threshold()),
        other => other,
    }
}

/// Quantile for `0 < p <= 0.5` (Wichura's AS 241 with one Halley step).
#[allow(clippy::inconsistent_digit_grouping, clippy::excessive_precision)]
fn lower_tail_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    let mut x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_13) * r + 67265.770_927_008_7) * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_546 + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0)
    } else {
        let mut r = (-p.ln()).sqrt();
        let val = if r <= 5.0 {
            r -= 1.6;
            (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6) * r
                + 1.270_458_252_452_368_4)
                * r
                + 3.647_848_324_763_204_5)
                * r
                + 5.769_497_221_460_691)
                * r
                + 4.630_337_846_156_545)
                * r
                + 1.423_437_110_749_683_5)
                / (((((((r * 1.050_750_071_644_416_8e-9 + 5.475_938_084_995_345e-4) * r
                    + 0.015_198_666_563_616_457)
                    * r
                    + 0.148_103_976_427_480_08)
                    * r
                    + 0.689_767_334_985_1)
                    * r
                    + 1.676_384_830_183_803_8)
                    * r
                    + 2.053_191_626_637_759)
                    * r
                    + 1.0)
        } else {
            r -= 5.0;
            (((((((r * 2.010_334_399_292_288e-7 + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4)
                * r
                + 0.026_532_189_526_576_124)
                * r
                + 0.296_560_571_828_504_9)
                * r
                + 1.784_826_539_917_291_3)
                * r
                + 5.463_784_911_164_114)
                * r
                + 6.657_904_643_501_103)
                / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                    + 1.846_318_317_510_054_8e-5)
                    * r
                    + 7.868_691_311_456_133e-4)
                    * r
                    + 0.014_875_361_290_850_615)
                    * r
                    + 0.136_929_880_922_735_8)
                    * r
                    + 0.599_832_206_555_887_9)
                    * r
                    + 1.0)
        };
        -val
    };
    // Halley refinement against the erfc-based CDF; x <= 0 here so the
    // residual is computed without cancellation.
    let err = std_normal_cdf(x) - p;
    let pdf = std_normal_pdf(x);
    if pdf > 0.0 && err.is_finite() {
        let u = err / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// The normal location family `F_mu(x) = F0(x - mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationModel {
    pub shift: f64,
}

impl LocationModel {
    pub const STANDARD: Self = Self { shift: 0.0 };

    pub fn new(shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::OutOfRange {
                name: "shift",
                value: shift,
                expected: "a finite real",
            });
        }
        Ok(Self { shift })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf(x - self.shift)
    }

    pub fn sf(&self, x: f64) -> f64 {
        std_normal_sf(x - self.shift)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        threshold_at_lower_level(p).map(|z| z + self.shift)
    }

    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        threshold_at_upper_level(q).map(|z| z + self.shift)
    }
}

/// `P{X >= t}` for `X ~ N(shift, 1)`. Infinite `t` gives exactly 0 or 1.
pub fn location_exceedance(t: f64, shift: f64) -> f64 {
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    std_normal_sf(t - shift)
}

/// `P{X < t}` for `X ~ N(shift, 1)`.
pub fn location_below(t: f64, shift: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    std_normal_cdf(t - shift)
}

/// Distribution of the number of successes among independent, non-identical
/// Bernoulli trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonBinomialPmf {
    probs: Vec<f64>,
    pmf: Vec<f64>,
}

impl PoissonBinomialPmf {
    /// Builds the pmf by the O(m^2) convolution recurrence.
    pub fn new(probs: &[f64]) -> Result<Self> {
        if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::OutOfRange {
                name: "success probability",
                value: bad,
                expected: "[0, 1]",
            });
        }
        Ok(Self::from_valid(probs.iter().copied()))
    }

    pub(crate) fn from_valid(probs: impl IntoIterator<Item = f64>) -> Self {
        let probs: Vec<f64> = probs.into_iter().collect();
        let mut pmf = Vec::with_capacity(probs.len() + 1);
        pmf.push(1.0);
        for &p in &probs {
            let q = 1.0 - p;
            pmf.push(0.0);
            for k in (1..pmf.len()).rev() {
                pmf[k] = pmf[k] * q + pmf[k - 1] * p;
            }
            pmf[0] *= q;
        }
        Self { probs, pmf }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Number of trials.
    pub fn trials(&self) -> usize {
        self.probs.len()
    }

    /// `P{exactly k successes}`; zero outside `0..=m`.
    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    /// `P{at least k successes}`.
    pub fn at_least(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let tail: f64 = self.pmf.iter().skip(k).sum();
        tail.clamp(0.0, 1.0)
    }

    /// Tail sums `P{at least k}` for every `k` in `0..=m+1`.
    pub fn survival(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pmf.len() + 1];
        for k in (0..self.pmf.len()).rev() {
            out[k] = out[k + 1] + self.pmf[k];
        }
        out[0] = 1.0;
        for v in &mut out {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }
}

/// Convenience wrapper over [`PoissonBinomialPmf::new`].
pub fn poisson_binomial_pmf(probs: &[f64]) -> Result<PoissonBinomialPmf> {
    PoissonBinomialPmf::new(probs)
}
