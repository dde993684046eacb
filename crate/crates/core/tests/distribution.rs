mod common;

use common::*;
use overbook::pbin::{binomial_dist, dist_of, DistributionCache};
use overbook::{AcceptanceVector, CountDistribution};
use proptest::prelude::*;

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn law_matches_outcome_enumeration((inst, x) in ctx_strategy(4, 1, 12)) {
        let x: Vec<usize> = x.into_iter().collect();
        prop_assume!(x.iter().sum::<usize>() <= 12);
        let want = enum_pmf(&trials_of(&inst, &x));
        let got = dist_of(&inst, &x);
        prop_assert!(max_err(&got.pmf_dense(), &want) <= 1e-12);
        for b in 0..=13 {
            prop_assert!((got.expected_overage(b) - overage(&want, b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn weighted_law_matches_enumeration((inst, x) in ctx_strategy(3, 3, 10)) {
        let want = enum_pmf(&trials_of(&inst, &x));
        let got = dist_of(&inst, &x);
        prop_assert_eq!(got.s_max(), want.len() - 1);
        prop_assert!(max_err(&got.pmf_dense(), &want) <= 1e-12);
    }

    #[test]
    fn tail_sum_identity((inst, x) in ctx_strategy(4, 1, 40), b in 0usize..30) {
        let dist = dist_of(&inst, &x);
        let pmf = dist.pmf_dense();
        let mut cdf = 0.0;
        let mut tail_sum = 0.0;
        for (s, &m) in pmf.iter().enumerate() {
            cdf += m;
            if s >= b {
                tail_sum += 1.0 - cdf;
            }
        }
        prop_assert!((dist.expected_overage(b) - tail_sum).abs() <= 1e-10);
    }

    #[test]
    fn adding_a_trial_raises_every_tail((inst, x) in ctx_strategy(3, 2, 20), j in 0usize..3) {
        let j = j % inst.k();
        let before = dist_of(&inst, &x);
        let mut more = x.clone();
        more[j] += 1;
        let after = dist_of(&inst, &more);
        for m in -1..=(after.s_max() as i64 + 1) {
            prop_assert!(after.tail_prob(m) >= before.tail_prob(m) - 1e-15);
        }
    }

    #[test]
    fn overage_monotone((inst, x) in ctx_strategy(3, 2, 20), j in 0usize..3, b in 0usize..15) {
        let j = j % inst.k();
        let dist = dist_of(&inst, &x);
        let mut more = x.clone();
        more[j] += 1;
        prop_assert!(dist_of(&inst, &more).expected_overage(b) >= dist.expected_overage(b) - 1e-15);
        prop_assert!(dist.expected_overage(b + 1) <= dist.expected_overage(b) + 1e-15);
    }

    #[test]
    fn tails_are_bounded_and_monotone((inst, x) in ctx_strategy(4, 2, 30)) {
        let dist = dist_of(&inst, &x);
        prop_assert_eq!(dist.tail_prob(0), 1.0);
        prop_assert_eq!(dist.tail_prob(dist.s_max() as i64 + 1), 0.0);
        let mut prev = 1.0;
        for m in 0..=(dist.s_max() as i64) {
            let t = dist.tail_prob(m);
            prop_assert!(t <= prev + 1e-15 && t >= 0.0);
            prev = t;
        }
        prop_assert!(dist.check_mass().is_ok());
    }

    #[test]
    fn cache_tracks_direct_construction((inst, x) in ctx_strategy(4, 3, 24), removals in prop::collection::vec(0usize..4, 0..6)) {
        let mut cache = DistributionCache::new(&inst);
        for (j, &n) in x.iter().enumerate() {
            for _ in 0..n {
                cache.add(j);
            }
        }
        let mut target = x.clone();
        for r in removals {
            let j = r % inst.k();
            if target[j] > 0 {
                cache.update(j, -1).unwrap();
                target[j] -= 1;
            } else {
                prop_assert!(cache.update(j, -1).is_err());
            }
        }
        prop_assert_eq!(cache.counts(), &target[..]);
        let direct = dist_of(&inst, &target);
        prop_assert!(max_err(&cache.combined().pmf_dense(), &direct.pmf_dense()) <= 1e-10);
        let rebuilt = DistributionCache::from_counts(&inst, &AcceptanceVector(target.clone()));
        prop_assert!(max_err(&rebuilt.combined().pmf_dense(), &direct.pmf_dense()) <= 1e-12);
    }
}

#[test]
fn long_binomials_agree_with_dense_recursion() {
    for &(n, p, d) in &[(400usize, 0.05, 1usize), (300, 0.5, 2), (250, 0.93, 1), (120, 0.3, 3)] {
        let want = dense_pmf(&vec![(p, d); n]);
        let got = binomial_dist(n, p, d);
        assert!(max_err(&got.pmf_dense(), &want) <= 1e-12, "n={n} p={p} d={d}");
        for b in [0, n / 4, n / 2, n] {
            assert!((got.expected_overage(b) - overage(&want, b)).abs() <= 1e-9);
        }
    }
}

#[test]
fn convolving_long_laws_agrees_with_dense_recursion() {
    let a = binomial_dist(200, 0.2, 1);
    let b = binomial_dist(150, 0.7, 2);
    let mut trials = vec![(0.2, 1); 200];
    trials.extend(vec![(0.7, 2); 150]);
    let want = dense_pmf(&trials);
    let got = a.convolve(&b);
    assert!(max_err(&got.pmf_dense(), &want) <= 1e-12);
    let point = CountDistribution::point(0);
    assert_eq!(point.convolve(&a), a);
}
