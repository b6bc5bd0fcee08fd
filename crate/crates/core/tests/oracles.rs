#![allow(clippy::excessive_precision)]

mod common;

use common::{enumerate_rates, enumerate_two_step, oracle_cdf, oracle_exceed, oracle_quantile, TestRng};
use fdrstep_core::dist::{
    location_below, location_exceedance, poisson_binomial_pmf, std_normal_cdf, std_normal_log_sf, std_normal_quantile,
    std_normal_sf,
};
use fdrstep_core::metrics::{
    exact_error_rates, fdr_direct_form, fdr_order_statistic_form, fnr_direct_form, fnr_order_statistic_form,
    two_step_fdr_bound, two_step_fnr_bound,
};
use fdrstep_core::procedure::{
    modified_bonferroni_fdr_threshold, modified_bonferroni_fnr_threshold, modified_sidak_fdr_threshold,
    modified_sidak_fnr_threshold, sidak_fdr_threshold,
};
use fdrstep_core::{ReferenceCdf, TruthAssignment};

/// Values computed with 50-digit arithmetic (mpmath) and frozen here.
const FROZEN_CDF: [(f64, f64); 6] = [
    (1.6449, 0.950_004_782_531_653_7),
    (-5.0, 2.866_515_718_791_939e-7),
    (-10.0, 7.619_853_024_160_526e-24),
    (-30.0, 4.906_713_927_148_187e-198),
    (2.5, 0.993_790_334_674_223_9),
    (-0.3, 0.382_088_577_811_047_4),
];

const FROZEN_QUANTILE: [(f64, f64); 4] = [
    (0.9995, 3.290_526_731_491_894_8),
    (0.95, 1.644_853_626_951_472_7),
    (0.975, 1.959_963_984_540_054_2),
    (0.9, 1.281_551_565_544_600_5),
];

#[test]
fn normal_cdf_matches_high_precision_values() {
    for (x, want) in FROZEN_CDF {
        let got = std_normal_cdf(x);
        assert!(((got - want) / want).abs() < 1e-13, "Phi({x}) = {got:e}, want {want:e}");
    }
}

#[test]
fn normal_quantile_matches_high_precision_values() {
    for (p, want) in FROZEN_QUANTILE {
        let got = std_normal_quantile(p).unwrap();
        assert!((got - want).abs() < 1e-12, "quantile({p}) = {got}, want {want}");
    }
    // Sidak single-step threshold for alpha = 0.05, n = 100.
    let t = sidak_fdr_threshold(0.05, 100).unwrap();
    assert!((t - 3.283_407_535_273_904_9).abs() < 1e-10, "{t}");
}

#[test]
fn series_oracle_itself_matches_high_precision_values() {
    for (x, want) in FROZEN_CDF.into_iter().filter(|(x, _)| x.abs() < 20.0) {
        let got = oracle_cdf(x);
        assert!(((got - want) / want).abs() < 1e-12, "oracle Phi({x}) = {got:e}");
    }
}

#[test]
fn normal_cdf_matches_series_oracle() {
    let mut x = -8.0;
    while x <= 8.0 {
        let got = std_normal_cdf(x);
        let want = oracle_cdf(x);
        assert!((got - want).abs() < 1e-14, "x = {x}: {got} vs {want}");
        assert!((std_normal_sf(x) - oracle_cdf(-x)).abs() < 1e-14);
        x += 0.05;
    }
}

#[test]
fn quantile_matches_bisection_oracle() {
    for &p in &[1e-8, 1e-5, 0.001, 0.025, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999_99] {
        let got = std_normal_quantile(p).unwrap();
        let want = oracle_quantile(p);
        assert!((got - want).abs() < 1e-9, "p = {p}: {got} vs {want}");
    }
}

#[test]
fn log_sf_far_tail_matches_frozen_value() {
    // ln Phi(-30) from the frozen value.
    let want = 4.906_713_927_148_187e-198_f64.ln();
    assert!((std_normal_log_sf(30.0) - want).abs() < 1e-10);
    // Continues smoothly beyond underflow.
    assert!(std_normal_log_sf(60.0).is_finite());
    assert!(std_normal_log_sf(60.0) < std_normal_log_sf(40.0));
}

fn random_truth(rng: &mut TestRng, n: usize) -> (TruthAssignment, f64) {
    let is_null: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.5).collect();
    let shifts: Vec<f64> = is_null
        .iter()
        .map(|&null| if null { 0.0 } else { 0.1 + 2.9 * rng.uniform() })
        .collect();
    let t = -1.0 + 5.0 * rng.uniform();
    (TruthAssignment::with_shifts(is_null, shifts).unwrap(), t)
}

#[test]
fn exact_rates_match_enumeration_for_small_n() {
    let mut rng = TestRng::new(0x5eed);
    let mut worst: f64 = 0.0;
    for n in 2..=12 {
        for _ in 0..50 {
            let (truth, t) = random_truth(&mut rng, n);
            let exact = exact_error_rates(t, &truth).unwrap();
            let exceed: Vec<f64> = truth.shifts().iter().map(|&mu| oracle_exceed(t, mu)).collect();
            let (fdr, fnr, any_r, any_a) = enumerate_rates(&exceed, truth.null_mask());
            for (got, want) in [
                (exact.fdr, fdr),
                (exact.fnr, fnr),
                (exact.p_any_rejection, any_r),
                (exact.p_any_acceptance, any_a),
            ] {
                worst = worst.max((got - want).abs());
                assert!((got - want).abs() < 1e-12, "n = {n}, t = {t}: {got} vs {want}");
            }
        }
    }
    assert!(worst < 1e-12);
}

#[test]
fn two_computation_paths_agree_up_to_n_50() {
    let mut rng = TestRng::new(77);
    for n in (1..=50).step_by(7).chain([50]) {
        for _ in 0..10 {
            let (truth, t) = random_truth(&mut rng, n);
            let exceed: Vec<f64> = truth.shifts().iter().map(|&mu| location_exceedance(t, mu)).collect();
            let mask = truth.null_mask();
            let a = fdr_order_statistic_form(&exceed, mask).unwrap();
            let b = fdr_direct_form(&exceed, mask).unwrap();
            assert!((a - b).abs() < 1e-10, "FDR paths at n = {n}: {a} vs {b}");
            let a = fnr_order_statistic_form(&exceed, mask).unwrap();
            let b = fnr_direct_form(&exceed, mask).unwrap();
            assert!((a - b).abs() < 1e-10, "FNR paths at n = {n}: {a} vs {b}");
        }
    }
}

#[test]
fn poisson_binomial_matches_enumeration() {
    let probs = [0.1, 0.7, 0.35, 0.9, 0.02, 0.5];
    let pmf = poisson_binomial_pmf(&probs).unwrap();
    let mut want = [0.0; 7];
    for pattern in 0u32..64 {
        let mut p = 1.0;
        for (i, q) in probs.iter().enumerate() {
            p *= if pattern >> i & 1 == 1 { *q } else { 1.0 - q };
        }
        want[pattern.count_ones() as usize] += p;
    }
    for (k, w) in want.iter().enumerate() {
        assert!((pmf.prob(k) - w).abs() < 1e-15);
    }
}

/// Two-step FDR or FNR bound recomputed from its definition, with the count of
/// other components below `tau` enumerated explicitly.
fn bound_by_enumeration(
    thresholds: &dyn Fn(usize) -> f64,
    tau: f64,
    truth: &TruthAssignment,
    fdr_side: bool,
    reference_shift: f64,
) -> f64 {
    let n = truth.n();
    let shifts = truth.shifts();
    let below: Vec<f64> = shifts.iter().map(|&mu| 1.0 - oracle_exceed(tau, mu)).collect();
    let mut total = 0.0;
    for i in 0..n {
        if truth.is_null(i) != fdr_side {
            continue;
        }
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let mut count_pmf = vec![0.0; n];
        for pattern in 0u32..(1 << others.len()) {
            let mut p = 1.0;
            for (b, &j) in others.iter().enumerate() {
                p *= if pattern >> b & 1 == 1 {
                    below[j]
                } else {
                    1.0 - below[j]
                };
            }
            count_pmf[pattern.count_ones() as usize] += p;
        }
        if fdr_side {
            let up_tau = oracle_exceed(tau, 0.0);
            for (k, pk) in count_pmf.iter().enumerate() {
                let m = (n - k) as f64;
                let r = oracle_exceed(thresholds(k), 0.0) / up_tau;
                total += up_tau * (1.0 - (1.0 - r).powf(m)) / m * pk;
            }
        } else {
            let lo_tau = 1.0 - oracle_exceed(tau, reference_shift);
            for k in 1..=n {
                let r = (1.0 - oracle_exceed(thresholds(k), reference_shift)) / lo_tau;
                total += lo_tau * (1.0 - (1.0 - r).powi(k as i32)) / k as f64 * count_pmf[k - 1];
            }
        }
    }
    total
}

#[test]
fn two_step_bounds_match_enumeration_and_dominate_exact_rates() {
    let tau = 0.0;
    let alpha = 0.2;
    let beta = 0.2;
    for &(n, n0, delta) in &[(4, 2, 1.0), (5, 3, 0.5), (6, 1, 2.0), (4, 4, 1.0), (5, 0, 1.5)] {
        let truth = TruthAssignment::last_alternatives(n, n0, delta).unwrap();
        for sidak in [false, true] {
            let t_fdr = |k: usize| {
                if sidak {
                    modified_sidak_fdr_threshold(k, n, alpha, tau).unwrap()
                } else {
                    modified_bonferroni_fdr_threshold(k, alpha, tau).unwrap()
                }
            };
            let bound = two_step_fdr_bound(t_fdr, tau, &truth).unwrap();
            let oracle = bound_by_enumeration(&t_fdr, tau, &truth, true, 0.0);
            assert!((bound - oracle).abs() < 1e-12, "FDR bound {bound} vs {oracle}");
            let (exact_fdr, _) = enumerate_two_step(&t_fdr, tau, truth.shifts(), truth.null_mask());
            assert!(
                exact_fdr <= bound + 1e-12,
                "exact two-step FDR {exact_fdr} above bound {bound}"
            );
            assert!(bound <= alpha + 1e-12);

            for reference in [ReferenceCdf::F0, ReferenceCdf::F1 { delta }] {
                let shift = match reference {
                    ReferenceCdf::F0 => 0.0,
                    ReferenceCdf::F1 { delta } => delta,
                };
                let t_fnr = |k: usize| {
                    if sidak {
                        modified_sidak_fnr_threshold(k, n, beta, tau, reference).unwrap()
                    } else {
                        modified_bonferroni_fnr_threshold(k, n, beta, tau, reference).unwrap()
                    }
                };
                let bound = two_step_fnr_bound(t_fnr, tau, &truth, reference).unwrap();
                let oracle = bound_by_enumeration(&t_fnr, tau, &truth, false, shift);
                assert!((bound - oracle).abs() < 1e-12, "FNR bound {bound} vs {oracle}");
                let (_, exact_fnr) = enumerate_two_step(&t_fnr, tau, truth.shifts(), truth.null_mask());
                if reference == ReferenceCdf::F0 {
                    // F0 dominates F1, so the F0 calibration is conservative for
                    // every shifted alternative.
                    assert!(
                        exact_fnr <= bound + 1e-12,
                        "exact two-step FNR {exact_fnr} above bound {bound}"
                    );
                }
            }
        }
    }
}

#[test]
fn f1_calibrated_fnr_bound_holds_when_alternatives_are_at_the_reference() {
    let (n, n0, delta, beta, tau) = (5, 2, 1.0, 0.2, 0.3);
    let truth = TruthAssignment::last_alternatives(n, n0, delta).unwrap();
    let reference = ReferenceCdf::F1 { delta };
    let t = |k: usize| modified_sidak_fnr_threshold(k, n, beta, tau, reference).unwrap();
    let bound = two_step_fnr_bound(t, tau, &truth, reference).unwrap();
    let (_, exact) = enumerate_two_step(&t, tau, truth.shifts(), truth.null_mask());
    assert!(exact <= bound + 1e-12, "{exact} vs {bound}");
}

#[test]
fn exceedance_helpers_match_oracle() {
    for &t in &[-3.0, -0.5, 0.0, 1.2, 4.0] {
        for &mu in &[0.0, 0.5, 2.5] {
            assert!((location_exceedance(t, mu) - oracle_exceed(t, mu)).abs() < 1e-14);
            assert!((location_below(t, mu) - (1.0 - oracle_exceed(t, mu))).abs() < 1e-14);
        }
    }
}
