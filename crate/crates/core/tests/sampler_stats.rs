use fdrstep_core::sampler::{sample_equicorrelated, sample_mixture, Seed};
use fdrstep_core::{Probability, TruthAssignment};

const DRAWS: u64 = 20_000;

#[test]
fn equicorrelated_moments() {
    let n = 6;
    let truth = TruthAssignment::last_alternatives(n, 3, 2.0).unwrap();
    let rho = 0.5;
    let draws: Vec<Vec<f64>> = (0..DRAWS)
        .map(|i| sample_equicorrelated(&truth, rho, Seed::new(11, i)).unwrap())
        .collect();
    let m = DRAWS as f64;
    let mean: Vec<f64> = (0..n).map(|j| draws.iter().map(|x| x[j]).sum::<f64>() / m).collect();
    for (j, &mu) in truth.shifts().iter().enumerate() {
        // SE of a sample mean is 1 / sqrt(20000) ~ 0.007.
        assert!((mean[j] - mu).abs() < 0.03, "mean {j}: {}", mean[j]);
    }
    let cov = |a: usize, b: usize| draws.iter().map(|x| (x[a] - mean[a]) * (x[b] - mean[b])).sum::<f64>() / (m - 1.0);
    for a in 0..n {
        assert!((cov(a, a) - 1.0).abs() < 0.04, "var {a}: {}", cov(a, a));
        for b in (a + 1)..n {
            assert!((cov(a, b) - rho).abs() < 0.04, "cov {a},{b}: {}", cov(a, b));
        }
    }
}

#[test]
fn independent_draws_are_uncorrelated() {
    let truth = TruthAssignment::last_alternatives(2, 2, 1.0).unwrap();
    let draws: Vec<Vec<f64>> = (0..DRAWS)
        .map(|i| sample_equicorrelated(&truth, 0.0, Seed::new(5, i)).unwrap())
        .collect();
    let r = draws.iter().map(|x| x[0] * x[1]).sum::<f64>() / DRAWS as f64;
    assert!(r.abs() < 0.03, "{r}");
}

/// Two-sample Kolmogorov-Smirnov distance.
fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn null_components_are_exchangeable() {
    let truth = TruthAssignment::last_alternatives(5, 5, 1.0).unwrap();
    let draws: Vec<Vec<f64>> = (0..DRAWS)
        .map(|i| sample_equicorrelated(&truth, 0.5, Seed::new(3, i)).unwrap())
        .collect();
    let first: Vec<f64> = draws.iter().map(|x| x[0]).collect();
    let last: Vec<f64> = draws.iter().map(|x| x[4]).collect();
    // 1% critical value for equal samples of 20000: 1.63 * sqrt(2 / 20000) ~ 0.016.
    assert!(ks_distance(first, last) < 0.016);
}

#[test]
fn mixture_null_fraction_matches_prior() {
    let pi0 = 0.3;
    let n = 50;
    let total: usize = (0..2000)
        .map(|i| {
            let d = sample_mixture(n, Probability::new(pi0).unwrap(), 1.0, 0.0, Seed::new(17, i)).unwrap();
            d.h.iter().filter(|&&alt| !alt).count()
        })
        .sum();
    let frac = total as f64 / (2000 * n) as f64;
    // SE = sqrt(0.21 / 100000) ~ 0.0015.
    assert!((frac - pi0).abs() < 0.006, "{frac}");
}

#[test]
fn mixture_alternative_draws_are_shifted() {
    let d = sample_mixture(20_000, Probability::new(0.5).unwrap(), 2.0, 0.0, Seed::new(23, 0)).unwrap();
    let (mut s0, mut c0, mut s1, mut c1) = (0.0, 0, 0.0, 0);
    for (x, alt) in d.x.iter().zip(&d.h) {
        if *alt {
            s1 += x;
            c1 += 1;
        } else {
            s0 += x;
            c0 += 1;
        }
    }
    assert!((s0 / c0 as f64).abs() < 0.05);
    assert!((s1 / c1 as f64 - 2.0).abs() < 0.05);
}
