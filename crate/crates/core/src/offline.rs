//! Clairvoyant solvers for the deterministic acceptance problem.
//!
//! Given decisions already made (`x_past`) and the number of future arrivals
//! of each type (`nf`), choose how many future arrivals `x_j <= nf_j` to
//! accept so as to maximize
//!
//! ```text
//! Σ_j v̄_j (x_past_j + x_j) - E[(Σ_j d_j Bin(x_past_j + x_j, p_j) - B)^+]
//! ```
//!
//! The index solvers restrict to solutions that accept every future arrival
//! of the types ranked above a threshold and none below it; the general
//! solvers search the whole box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{AcceptanceVector, Instance};
use crate::num::Scalar;
use crate::pbin::{dist_of, CountDistribution, Survival};

/// Default cap on objective evaluations for the enumerating solvers.
pub const DEFAULT_BUDGET: u128 = 20_000_000;

/// Default number of coordinate-ascent starts.
pub const DEFAULT_RESTARTS: usize = 5;

/// Objective ties closer than this are broken by total acceptances.
const TIE_TOL: f64 = 1e-12;

/// Slack used when pruning the brute-force box.
const PRUNE_SLACK: f64 = 1e-9;

/// One offline problem: an instance, past decisions and future arrivals.
#[derive(Debug, Clone)]
pub struct SolveContext<'a, T> {
    instance: &'a Instance<T>,
    x_past: AcceptanceVector,
    nf: Vec<usize>,
    past_dist: CountDistribution<T>,
}

impl<'a, T: Scalar> SolveContext<'a, T> {
    pub fn new(instance: &'a Instance<T>, x_past: AcceptanceVector, nf: Vec<usize>) -> Result<Self> {
        let past_dist = dist_of(instance, &x_past);
        Self::with_past_dist(instance, x_past, nf, past_dist)
    }

    /// Like [`SolveContext::new`] when the law of the past consumption is
    /// already at hand.
    pub fn with_past_dist(
        instance: &'a Instance<T>,
        x_past: AcceptanceVector,
        nf: Vec<usize>,
        past_dist: CountDistribution<T>,
    ) -> Result<Self> {
        let k = instance.k();
        if x_past.len() != k || nf.len() != k {
            return Err(Error::Infeasible(format!(
                "expected {k} entries, got x_past {} and nf {}",
                x_past.len(),
                nf.len()
            )));
        }
        Ok(Self { instance, x_past, nf, past_dist })
    }

    /// No past decisions.
    pub fn fresh(instance: &'a Instance<T>, nf: Vec<usize>) -> Result<Self> {
        Self::new(instance, AcceptanceVector::zeros(instance.k()), nf)
    }

    pub fn instance(&self) -> &'a Instance<T> {
        self.instance
    }
    pub fn x_past(&self) -> &AcceptanceVector {
        &self.x_past
    }
    pub fn nf(&self) -> &[usize] {
        &self.nf
    }
    pub fn past_dist(&self) -> &CountDistribution<T> {
        &self.past_dist
    }

    fn check_feasible(&self, x: &[usize]) -> Result<()> {
        if x.len() != self.nf.len() {
            return Err(Error::Infeasible(format!("expected {} entries, got {}", self.nf.len(), x.len())));
        }
        if let Some(j) = (0..x.len()).find(|&j| x[j] > self.nf[j]) {
            return Err(Error::Infeasible(format!(
                "type {j} accepts {} but only {} arrive",
                x[j], self.nf[j]
            )));
        }
        Ok(())
    }

    /// Law of total consumption when `x` future customers are accepted.
    fn dist_with(&self, x: &[usize]) -> CountDistribution<T> {
        self.past_dist.convolve(&dist_of(self.instance, x))
    }

    fn revenue(&self, x: &[usize]) -> T {
        let vbar = self.instance.eff_values();
        (0..x.len())
            .map(|j| vbar[j] * T::from_count(self.x_past[j] + x[j]))
            .sum()
    }

    fn score(&self, x: &[usize], dist: &CountDistribution<T>) -> T {
        self.revenue(x) - dist.expected_overage(self.instance.capacity())
    }
}

/// An index solution: all future arrivals of the types before `threshold`,
/// none after it, and a chosen count at it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSolution {
    pub x: AcceptanceVector,
    /// Zero-based type index; the smallest one consistent with `x`.
    pub threshold: usize,
}

/// Which clairvoyant-general solver produced a benchmark value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralSolver {
    /// Exhaustive enumeration: the true optimum.
    Exact,
    /// Coordinate ascent: a lower bound on the optimum.
    Ascent,
}

/// Expected objective of the future decision `x` in context.
pub fn objective<T: Scalar>(ctx: &SolveContext<'_, T>, x: &[usize]) -> Result<T> {
    ctx.check_feasible(x)?;
    Ok(ctx.score(x, &ctx.dist_with(x)))
}

fn tail_threshold(capacity: usize, d: usize) -> i64 {
    capacity as i64 - d as i64 + 1
}

/// Per-type local optimality of `x`: holding the other counts fixed, `x_j`
/// is the largest best response. Multi-unit types test the tail at
/// `B - d_j + 1`.
pub fn local_opt_check<T: Scalar>(ctx: &SolveContext<'_, T>, x: &[usize]) -> Result<Vec<bool>> {
    ctx.check_feasible(x)?;
    let inst = ctx.instance;
    let full = ctx.dist_with(x);
    Ok((0..x.len())
        .map(|j| {
            let threshold = tail_threshold(inst.capacity(), inst.demands()[j]);
            let q = inst.critical_ratios()[j];
            let keep_going = x[j] == ctx.nf[j] || full.tail_prob(threshold) > q;
            let last_ok = x[j] == 0 || {
                let mut fewer = x.to_vec();
                fewer[j] -= 1;
                ctx.dist_with(&fewer).tail_prob(threshold) <= q
            };
            keep_going && last_ok
        })
        .collect())
}

/// Unit-demand local optimality, testing `P[consumption >= B]` against `q_j`.
pub fn local_opt_check_unit<T: Scalar>(ctx: &SolveContext<'_, T>, x: &[usize]) -> Result<Vec<bool>> {
    if !ctx.instance.has_unit_demands() {
        return Err(Error::InvalidInstance("unit-demand check needs d_j = 1 for every type".into()));
    }
    ctx.check_feasible(x)?;
    let b = ctx.instance.capacity() as i64;
    let q = ctx.instance.critical_ratios();
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut others = x.to_vec();
        others[j] = 0;
        let rest = ctx.dist_with(&others).survival();
        let p = ctx.instance.show_probs()[j];
        let at = |n: usize| rest.tail_of_sum(&CountDistribution::binomial(n, p, 1), b);
        let cond_i = x[j] == ctx.nf[j] || at(x[j]) > q[j];
        let cond_ii = x[j] == 0 || at(x[j] - 1) <= q[j];
        out.push(cond_i && cond_ii);
    }
    Ok(out)
}

/// Largest `m` in `[0, upper]` with `ok(m)`, for a predicate true at 0 that
/// switches from true to false at most once.
fn largest_ok(upper: usize, mut ok: impl FnMut(usize) -> bool) -> usize {
    let mut lo = 0usize;
    let mut step = 1usize;
    let hi = loop {
        let probe = lo.saturating_add(step).min(upper);
        if probe == lo {
            return lo;
        }
        if !ok(probe) {
            break probe;
        }
        lo = probe;
        step = step.saturating_mul(2);
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest `m <= upper` such that the `m`-th customer of a type still passes
/// the acceptance test: `m = 0`, or the consumption of `base` plus `m - 1`
/// such customers reaches `B - d + 1` with probability at most `q`.
pub fn max_accept_count<T: Scalar>(
    base: &CountDistribution<T>,
    q: T,
    p: T,
    d: usize,
    upper: usize,
    capacity: usize,
) -> usize {
    max_accept_count_sf(&base.survival(), q, p, d, upper, capacity)
}

fn max_accept_count_sf<T: Scalar>(
    base: &Survival<T>,
    q: T,
    p: T,
    d: usize,
    upper: usize,
    capacity: usize,
) -> usize {
    if q >= T::one() || p <= T::zero() {
        return upper;
    }
    let threshold = tail_threshold(capacity, d);
    largest_ok(upper, |m| {
        m == 0 || base.tail_of_sum(&CountDistribution::binomial(m - 1, p, d), threshold) <= q
    })
}

/// Smallest threshold consistent with an index-shaped `x`.
fn canonical_threshold(x: &[usize]) -> usize {
    x.iter().rposition(|&n| n > 0).unwrap_or(0)
}

/// Greedy index solution: fill types in critical-ratio order while the
/// acceptance test admits every future arrival, stop at the first type it
/// cuts short.
pub fn solve_index<T: Scalar>(ctx: &SolveContext<'_, T>) -> IndexSolution {
    let inst = ctx.instance;
    let k = inst.k();
    let p = inst.show_probs();
    let d = inst.demands();
    let q = inst.critical_ratios();
    let mut x = vec![0; k];
    let mut base = ctx.past_dist.clone();

    for j in (0..k).filter(|&j| inst.always_accept()[j]) {
        x[j] = ctx.nf[j];
        if x[j] > 0 {
            base = base.convolve(&CountDistribution::binomial(x[j], p[j], d[j]));
        }
    }
    for j in (0..k).filter(|&j| !inst.always_accept()[j]) {
        if ctx.nf[j] == 0 {
            continue;
        }
        let m = max_accept_count(&base, q[j], p[j], d[j], ctx.nf[j], inst.capacity());
        x[j] = m;
        if m < ctx.nf[j] {
            break;
        }
        base = base.convolve(&CountDistribution::binomial(m, p[j], d[j]));
    }
    let threshold = canonical_threshold(&x);
    IndexSolution { x: AcceptanceVector(x), threshold }
}

fn better<T: Scalar>(obj: T, total: usize, best: Option<(T, usize)>) -> bool {
    match best {
        None => true,
        Some((b, bt)) => {
            let tol = T::lit(TIE_TOL);
            obj > b + tol || (obj >= b - tol && total > bt)
        }
    }
}

/// Best index solution by enumerating every threshold and threshold count.
pub fn solve_index_exhaustive<T: Scalar>(ctx: &SolveContext<'_, T>, budget: u128) -> Result<IndexSolution> {
    let needed: u128 = ctx.nf.iter().map(|&n| n as u128 + 1).sum();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let inst = ctx.instance;
    let k = inst.k();
    let (p, d) = (inst.show_probs(), inst.demands());
    let mut best: Option<(T, usize)> = None;
    let mut best_x = vec![0; k];
    let mut prefix = ctx.past_dist.clone();
    let mut x = vec![0; k];

    for t in 0..k {
        let mut dist = prefix.clone();
        for m in 0..=ctx.nf[t] {
            if m > 0 {
                dist.add_trial(p[t], d[t]);
            }
            x[t] = m;
            let obj = ctx.score(&x, &dist);
            if better(obj, x.iter().sum(), best) {
                best = Some((obj, x.iter().sum()));
                best_x.clone_from(&x);
            }
        }
        x[t] = ctx.nf[t];
        prefix = dist;
    }
    let threshold = canonical_threshold(&best_x);
    Ok(IndexSolution { x: AcceptanceVector(best_x), threshold })
}

/// Per-type caps that no max-Σ maximizer exceeds: past the cap, one more
/// customer loses money even when no other future customer is accepted.
fn prune_caps<T: Scalar>(ctx: &SolveContext<'_, T>) -> Vec<usize> {
    let inst = ctx.instance;
    let sf = ctx.past_dist.survival();
    let capacity = inst.capacity() as i64;
    (0..inst.k())
        .map(|j| {
            let (p, d, vbar) = (inst.show_probs()[j], inst.demands()[j], inst.eff_values()[j]);
            if inst.always_accept()[j] {
                return ctx.nf[j];
            }
            largest_ok(ctx.nf[j], |m| {
                if m == 0 {
                    return true;
                }
                let others = CountDistribution::binomial(m - 1, p, d);
                let cost: T = (1..=d)
                    .map(|u| sf.tail_of_sum(&others, capacity - u as i64 + 1))
                    .sum::<T>()
                    * p;
                vbar - cost >= -T::lit(PRUNE_SLACK)
            })
        })
        .collect()
}

/// Number of objective evaluations brute force would need.
pub fn bruteforce_size<T: Scalar>(ctx: &SolveContext<'_, T>) -> u128 {
    prune_caps(ctx)
        .iter()
        .fold(1u128, |acc, &u| acc.saturating_mul(u as u128 + 1))
}

/// Exact maximizer over the whole box; among near-ties the one accepting
/// the most customers.
pub fn solve_global_bruteforce<T: Scalar>(ctx: &SolveContext<'_, T>, budget: u128) -> Result<AcceptanceVector> {
    let caps = prune_caps(ctx);
    let needed = caps.iter().fold(1u128, |acc, &u| acc.saturating_mul(u as u128 + 1));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut search = BoxSearch {
        ctx,
        caps,
        x: vec![0; ctx.instance.k()],
        best: None,
        best_x: vec![0; ctx.instance.k()],
    };
    search.descend(0, ctx.past_dist.clone());
    Ok(AcceptanceVector(search.best_x))
}

struct BoxSearch<'c, 'a, T> {
    ctx: &'c SolveContext<'a, T>,
    caps: Vec<usize>,
    x: Vec<usize>,
    best: Option<(T, usize)>,
    best_x: Vec<usize>,
}

impl<T: Scalar> BoxSearch<'_, '_, T> {
    fn descend(&mut self, j: usize, mut dist: CountDistribution<T>) {
        let inst = self.ctx.instance;
        if j == self.x.len() {
            let obj = self.ctx.score(&self.x, &dist);
            let total = self.x.iter().sum();
            if better(obj, total, self.best) {
                self.best = Some((obj, total));
                self.best_x.clone_from(&self.x);
            }
            return;
        }
        for m in 0..=self.caps[j] {
            if m > 0 {
                dist.add_trial(inst.show_probs()[j], inst.demands()[j]);
            }
            self.x[j] = m;
            self.descend(j + 1, dist.clone());
        }
        self.x[j] = 0;
    }
}

/// Cyclic coordinate ascent from several starts; each coordinate is reset
/// to its largest best response until a full pass changes nothing.
///
/// The starts are the zero vector, the greedy index solution and
/// `restarts - 2` uniform random points. The result is locally optimal at
/// every type but only a lower bound on the true optimum.
pub fn solve_global_ascent<T: Scalar>(ctx: &SolveContext<'_, T>, restarts: usize, seed: u64) -> AcceptanceVector {
    let k = ctx.instance.k();
    let mut starts = vec![vec![0; k], solve_index(ctx).x.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 2..restarts.max(2) {
        starts.push(ctx.nf.iter().map(|&n| rng.random_range(0..=n)).collect());
    }
    starts.truncate(restarts.max(1));

    let mut best: Option<(T, usize)> = None;
    let mut best_x = vec![0; k];
    for start in starts {
        let x = ascend(ctx, start);
        let dist = ctx.dist_with(&x);
        let obj = ctx.score(&x, &dist);
        let total = x.iter().sum();
        if better(obj, total, best) {
            best = Some((obj, total));
            best_x = x;
        }
    }
    AcceptanceVector(best_x)
}

fn ascend<T: Scalar>(ctx: &SolveContext<'_, T>, mut x: Vec<usize>) -> Vec<usize> {
    let inst = ctx.instance;
    let k = inst.k();
    let (p, d, q) = (inst.show_probs(), inst.demands(), inst.critical_ratios());
    let mut per_type: Vec<CountDistribution<T>> =
        (0..k).map(|j| CountDistribution::binomial(x[j], p[j], d[j])).collect();
    let max_passes = ctx.nf.iter().sum::<usize>() + k;
    for _ in 0..max_passes {
        let mut changed = false;
        for j in 0..k {
            let others = per_type
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .fold(ctx.past_dist.clone(), |acc, (_, dist)| acc.convolve(dist));
            let m = max_accept_count(&others, q[j], p[j], d[j], ctx.nf[j], inst.capacity());
            if m != x[j] {
                x[j] = m;
                per_type[j] = CountDistribution::binomial(m, p[j], d[j]);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    x
}

/// Brute force when the pruned box fits in `budget`, coordinate ascent
/// otherwise.
pub fn solve_clairvoyant_general<T: Scalar>(
    ctx: &SolveContext<'_, T>,
    budget: u128,
    restarts: usize,
    seed: u64,
) -> (AcceptanceVector, GeneralSolver) {
    match solve_global_bruteforce(ctx, budget) {
        Ok(x) => (x, GeneralSolver::Exact),
        Err(_) => (solve_global_ascent(ctx, restarts, seed), GeneralSolver::Ascent),
    }
}

/// How many type-`j` acceptances must be given back so that `x` stays
/// locally optimal at `j` after one more type-`i` customer is accepted.
pub fn sensitivity_shift<T: Scalar>(ctx: &SolveContext<'_, T>, x: &[usize], j: usize, i: usize) -> Result<usize> {
    if !local_opt_check(ctx, x)?[j] {
        return Err(Error::NotLocallyOptimal(j));
    }
    let mut bumped = x.to_vec();
    bumped[i] += 1;
    ctx.check_feasible(&bumped)?;
    let inst = ctx.instance;
    let mut others = bumped.clone();
    others[j] = 0;
    let m = max_accept_count(
        &ctx.dist_with(&others),
        inst.critical_ratios()[j],
        inst.show_probs()[j],
        inst.demands()[j],
        ctx.nf[j],
        inst.capacity(),
    );
    bumped[j].checked_sub(m).ok_or(Error::NotLocallyOptimal(j))
}
