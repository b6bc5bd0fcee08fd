//! Independent reference implementations used only by tests.
//!
//! Nothing here calls into the library's numerical kernels: the normal CDF is
//! a power series / continued fraction, quantiles are found by bisection, and
//! error rates come from brute-force enumeration of all `2^n` outcomes.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

/// `erf(x)` by its Maclaurin series; used for `|x| <= 2` where cancellation is mild.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for k in 1..200 {
        term *= -x2 / k as f64;
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

/// `erfc(x)` for `x > 2` by the Laplace continued fraction, evaluated
/// bottom-up.
fn erfc_continued_fraction(x: f64) -> f64 {
    let mut f = 0.0;
    for k in (1..=4000).rev() {
        f = (k as f64 / 2.0) / (x + f);
    }
    (-x * x).exp() / PI.sqrt() / (x + f)
}

/// Reference standard normal CDF.
pub fn oracle_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    if x.abs() <= 2.0 {
        0.5 * (1.0 + erf_series(x))
    } else if x > 0.0 {
        1.0 - 0.5 * erfc_continued_fraction(x)
    } else {
        0.5 * erfc_continued_fraction(-x)
    }
}

/// Reference normal survival function `1 - Phi(z)`.
pub fn oracle_sf(z: f64) -> f64 {
    oracle_cdf(-z)
}

/// Reference quantile: bisection on `oracle_cdf`.
pub fn oracle_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if oracle_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Exact `(FDR, FNR, P{R > 0}, P{A > 0})` of "reject where the event
/// happens", with independent events of probability `exceed[i]`, by summing
/// over all `2^n` rejection patterns.
pub fn enumerate_rates(exceed: &[f64], null_mask: &[bool]) -> (f64, f64, f64, f64) {
    let n = exceed.len();
    assert!(n <= 20);
    let (mut fdr, mut fnr, mut any_r, mut any_a) = (0.0, 0.0, 0.0, 0.0);
    for pattern in 0u32..(1 << n) {
        let mut prob = 1.0;
        let (mut v, mut r, mut t, mut a) = (0, 0, 0, 0);
        for i in 0..n {
            let rejected = pattern >> i & 1 == 1;
            if rejected {
                prob *= exceed[i];
                r += 1;
                if null_mask[i] {
                    v += 1;
                }
            } else {
                prob *= 1.0 - exceed[i];
                a += 1;
                if !null_mask[i] {
                    t += 1;
                }
            }
        }
        if r > 0 {
            fdr += prob * v as f64 / r as f64;
            any_r += prob;
        }
        if a > 0 {
            fnr += prob * t as f64 / a as f64;
            any_a += prob;
        }
    }
    (fdr, fnr, any_r, any_a)
}

/// `P{X >= t}` for `X ~ N(mu, 1)` using the reference CDF.
pub fn oracle_exceed(t: f64, mu: f64) -> f64 {
    if t == f64::INFINITY {
        0.0
    } else if t == f64::NEG_INFINITY {
        1.0
    } else {
        oracle_sf(t - mu)
    }
}

/// Exact FDR and FNR of a two-step rule under independence, by enumeration.
///
/// Each component is either below `tau` or not (`2^n` patterns), which fixes
/// `k` and hence `t(k)`. Given the pattern, a component at or above `tau` is
/// in `[t(k), inf)` with conditional probability, and one below `tau` is in
/// `[t(k), tau)` with conditional probability (non-zero only for FNR rules
/// where `t(k) < tau`). The rejection subset is then enumerated as well.
pub fn enumerate_two_step(
    thresholds: &dyn Fn(usize) -> f64,
    tau: f64,
    shifts: &[f64],
    null_mask: &[bool],
) -> (f64, f64) {
    let n = shifts.len();
    assert!(n <= 10);
    let mut fdr = 0.0;
    let mut fnr = 0.0;
    for below in 0u32..(1 << n) {
        let mut p_pattern = 1.0;
        let mut k = 0;
        for i in 0..n {
            let p_below = 1.0 - oracle_exceed(tau, shifts[i]);
            if below >> i & 1 == 1 {
                p_pattern *= p_below;
                k += 1;
            } else {
                p_pattern *= 1.0 - p_below;
            }
        }
        if p_pattern == 0.0 {
            continue;
        }
        let t = thresholds(k);
        // Conditional rejection probabilities given the region.
        let reject: Vec<f64> = (0..n)
            .map(|i| {
                let mu = shifts[i];
                let above_tau = oracle_exceed(tau, mu);
                if below >> i & 1 == 1 {
                    // X < tau; rejected iff t <= X < tau.
                    if t >= tau {
                        0.0
                    } else {
                        (oracle_exceed(t, mu) - above_tau) / (1.0 - above_tau)
                    }
                } else if t <= tau {
                    1.0
                } else {
                    oracle_exceed(t, mu) / above_tau
                }
            })
            .collect();
        let (f, g, _, _) = enumerate_rates(&reject, null_mask);
        fdr += p_pattern * f;
        fnr += p_pattern * g;
    }
    (fdr, fnr)
}

/// Tiny deterministic generator for test configurations (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, m: usize) -> usize {
        (self.next_u64() % m as u64) as usize
    }
}
