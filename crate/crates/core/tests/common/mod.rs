#![allow(dead_code)]

use overbook::{Instance, InstanceSpec};
use proptest::prelude::*;

/// `(p, d)` for every accepted customer in `x`.
pub fn trials_of(inst: &Instance, x: &[usize]) -> Vec<(f64, usize)> {
    x.iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat((inst.show_probs()[j], inst.demands()[j])).take(n))
        .collect()
}

/// pmf of the consumption by summing over all 2^n show/no-show outcomes.
pub fn enum_pmf(trials: &[(f64, usize)]) -> Vec<f64> {
    let top: usize = trials.iter().map(|t| t.1).sum();
    let mut pmf = vec![0.0; top + 1];
    for mask in 0u64..(1u64 << trials.len()) {
        let mut w = 1.0;
        let mut s = 0;
        for (i, &(p, d)) in trials.iter().enumerate() {
            if mask >> i & 1 == 1 {
                w *= p;
                s += d;
            } else {
                w *= 1.0 - p;
            }
        }
        pmf[s] += w;
    }
    pmf
}

/// pmf by a dense one-trial-at-a-time recursion over the full support.
pub fn dense_pmf(trials: &[(f64, usize)]) -> Vec<f64> {
    let top: usize = trials.iter().map(|t| t.1).sum();
    let mut pmf = vec![0.0; top + 1];
    pmf[0] = 1.0;
    for &(p, d) in trials {
        let prev = pmf.clone();
        for s in 0..=top {
            pmf[s] = prev[s] * (1.0 - p) + if s >= d { prev[s - d] * p } else { 0.0 };
        }
    }
    pmf
}

pub fn overage(pmf: &[f64], b: usize) -> f64 {
    pmf.iter().enumerate().map(|(s, &m)| s.saturating_sub(b) as f64 * m).sum()
}

pub fn tail(pmf: &[f64], m: i64) -> f64 {
    if m <= 0 {
        return 1.0;
    }
    pmf.iter().skip(m as usize).sum()
}

/// Objective of a total acceptance vector, computed from the dense pmf.
pub fn naive_objective(inst: &Instance, total: &[usize]) -> f64 {
    let revenue: f64 = total.iter().zip(inst.eff_values()).map(|(&n, &v)| n as f64 * v).sum();
    revenue - overage(&dense_pmf(&trials_of(inst, total)), inst.capacity())
}

/// Every vector `x` with `0 <= x_j <= nf_j`.
pub fn full_box(nf: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &n in nf {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=n).map(move |m| {
                    let mut v = prefix.clone();
                    v.push(m);
                    v
                })
            })
            .collect();
    }
    out
}

pub fn add(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn spec_strategy(max_k: usize, max_d: u32) -> impl Strategy<Value = InstanceSpec> {
    (1..=max_k)
        .prop_flat_map(move |k| {
            (
                prop::collection::vec(1u32..10, k),
                prop::collection::vec(0.0..0.95f64, k),
                prop::collection::vec(prop_oneof![1 => Just(0.0), 1 => Just(1.0), 6 => 0.05..1.0f64], k),
                prop::collection::vec(1..=max_d, k),
                0i64..12,
            )
        })
        .prop_map(|(w, v, p, d, b)| {
            let total: f64 = w.iter().map(|&x| x as f64).sum();
            let lambda = w.iter().map(|&x| x as f64 / total).collect();
            InstanceSpec::new(lambda, v, p, b, 20).with_demands(d)
        })
}

/// Random valid instance; `max_d = 1` keeps unit demands.
pub fn instance_strategy(max_k: usize, max_d: u32) -> impl Strategy<Value = Instance> {
    spec_strategy(max_k, max_d).prop_map(|s| s.normalize().expect("generated spec is valid"))
}

/// Random instance with a future-arrival vector of bounded total.
pub fn ctx_strategy(max_k: usize, max_d: u32, max_total: usize) -> impl Strategy<Value = (Instance, Vec<usize>)> {
    instance_strategy(max_k, max_d).prop_flat_map(move |inst| {
        let k = inst.k();
        let per = (max_total / k).max(1);
        (Just(inst), prop::collection::vec(0..=per, k))
    })
}
