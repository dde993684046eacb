//! Online accept/reject policies.
//!
//! Each policy sees one arrival per period and decides on the spot. The
//! online index policy re-solves the offline problem every period against a
//! simulated future; the LP bid-price (DLP) and dynamic-programming
//! decomposition (DPD) policies are the classical baselines, and the
//! expected-consumption greedy rule is a naive floor.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{AcceptanceVector, ArrivalSequence, Instance};
use crate::num::Scalar;
use crate::offline::{solve_index, SolveContext};
use crate::pbin::{CountDistribution, DistributionCache};
use crate::sim::stream_seed;

/// Default number of sample paths used to estimate DPD acceptance fractions.
pub const DEFAULT_ALPHA_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    OnlineIndex,
    Dlp,
    Dpd,
    ExpectedGreedy,
    /// Knows the whole arrival sequence; follows the index solution
    /// re-solved on the true remaining arrivals every period.
    HindsightIndex,
    /// Accept first-come up to fixed per-type targets.
    Replay,
}

impl PolicyKind {
    pub const ONLINE: [PolicyKind; 4] =
        [PolicyKind::OnlineIndex, PolicyKind::Dlp, PolicyKind::Dpd, PolicyKind::ExpectedGreedy];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OnlineIndex => "online_index",
            PolicyKind::Dlp => "dlp",
            PolicyKind::Dpd => "dpd",
            PolicyKind::ExpectedGreedy => "expected_greedy",
            PolicyKind::HindsightIndex => "hindsight_index",
            PolicyKind::Replay => "replay",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Self::OnlineIndex, Self::Dlp, Self::Dpd, Self::ExpectedGreedy, Self::HindsightIndex, Self::Replay]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    /// 1-based period.
    pub period: usize,
    pub arrival: usize,
    pub accepted: bool,
}

/// What a policy did on one arrival sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    pub policy: PolicyKind,
    pub decisions: Vec<Decision>,
    /// `x_series[t]` is the acceptance vector after period `t`; entry 0 is
    /// the zero vector.
    pub x_series: Vec<AcceptanceVector>,
}

impl PolicyTrace {
    fn record(policy: PolicyKind, k: usize, arrivals: &ArrivalSequence, mut decide: impl FnMut(usize, usize, &[usize]) -> bool) -> Self {
        let mut x = AcceptanceVector::zeros(k);
        let mut decisions = Vec::with_capacity(arrivals.horizon());
        let mut x_series = Vec::with_capacity(arrivals.horizon() + 1);
        x_series.push(x.clone());
        for (i, &j) in arrivals.entries().iter().enumerate() {
            let accepted = decide(i + 1, j, &x);
            if accepted {
                x.0[j] += 1;
            }
            decisions.push(Decision { period: i + 1, arrival: j, accepted });
            x_series.push(x.clone());
        }
        Self { policy, decisions, x_series }
    }

    pub fn final_x(&self) -> &AcceptanceVector {
        self.x_series.last().expect("trace always holds x[0]")
    }

    pub fn accepted_total(&self) -> usize {
        self.final_x().total()
    }

    /// Checks the state updates against the arrival sequence.
    pub fn validate(&self, arrivals: &ArrivalSequence) -> Result<()> {
        let horizon = arrivals.horizon();
        if self.decisions.len() != horizon || self.x_series.len() != horizon + 1 {
            return Err(Error::InconsistentTrace(format!(
                "trace covers {} periods, arrivals cover {horizon}",
                self.decisions.len()
            )));
        }
        if self.x_series[0].total() != 0 {
            return Err(Error::InconsistentTrace("x[0] is not zero".into()));
        }
        for (i, dec) in self.decisions.iter().enumerate() {
            let t = i + 1;
            if dec.period != t || dec.arrival != arrivals.at(t) {
                return Err(Error::InconsistentTrace(format!("period {t} does not match the arrivals")));
            }
            let mut expect = self.x_series[i].clone();
            if dec.accepted {
                expect.0[dec.arrival] += 1;
            }
            if expect != self.x_series[t] {
                return Err(Error::InconsistentTrace(format!("state update broken at period {t}")));
            }
        }
        if !self.final_x().within(&arrivals.counts()) {
            return Err(Error::InconsistentTrace("accepted more than arrived".into()));
        }
        Ok(())
    }
}

/// The online index policy.
///
/// One surrogate future `A'` is drawn from `seed` before the first period.
/// In period `t` with an arrival of type `j`, the surrogate future counts are
/// those of `A'[t+1..=T]` plus the current arrival; the index solution for
/// those counts (given the decisions so far) is computed, and the arrival is
/// accepted when that solution takes at least half of the type-`j` count.
pub fn run_online_index<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence, seed: u64) -> PolicyTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let surrogate = ArrivalSequence::sample_len(instance, arrivals.horizon(), &mut rng);
    let mut future = surrogate.counts();
    let mut cache = DistributionCache::new(instance);
    let always = instance.always_accept();

    PolicyTrace::record(PolicyKind::OnlineIndex, instance.k(), arrivals, |t, j, x| {
        future[surrogate.at(t)] -= 1;
        let accept = always[j] || {
            let mut nf = future.clone();
            nf[j] += 1;
            let ctx = SolveContext::with_past_dist(instance, AcceptanceVector(x.to_vec()), nf, cache.combined().clone())
                .expect("lengths match the instance");
            let sol = solve_index(&ctx);
            2 * sol.x[j] >= ctx.nf()[j]
        };
        if accept {
            cache.add(j);
        }
        accept
    })
}

/// Bid price of capacity in the fluid relaxation.
///
/// Types are filled in critical-ratio order with their expected consumption
/// `T λ_j d_j p_j`; the price is the critical ratio (capped at the unit
/// compensation) of the first type that exhausts capacity, or zero when
/// capacity never runs out.
pub fn dlp_dual<T: Scalar>(instance: &Instance<T>) -> T {
    let horizon = T::from_count(instance.horizon());
    let capacity = T::from_count(instance.capacity());
    let mut used = T::zero();
    for j in 0..instance.k() {
        let p = instance.show_probs()[j];
        if p == T::zero() {
            continue;
        }
        used = used + horizon * instance.arrival_probs()[j] * p * T::from_count(instance.demands()[j]);
        if used >= capacity {
            return instance.critical_ratios()[j].min(T::one());
        }
    }
    T::zero()
}

/// Types the bid-price rule accepts: `v̄_j >= d_j p_j Π`, tested as
/// `q_j >= Π` so the marginal type is never lost to rounding.
pub fn dlp_accepts<T: Scalar>(instance: &Instance<T>, price: T) -> Vec<bool> {
    instance.critical_ratios().iter().map(|&q| q >= price).collect()
}

pub fn run_dlp<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence) -> PolicyTrace {
    run_dlp_with_price(instance, arrivals, dlp_dual(instance))
}

pub fn run_dlp_with_price<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence, price: T) -> PolicyTrace {
    let accepts = dlp_accepts(instance, price);
    PolicyTrace::record(PolicyKind::Dlp, instance.k(), arrivals, |_, j, _| accepts[j])
}

/// Fraction of each type among everything DLP accepts over `samples`
/// simulated horizons.
pub fn estimate_alpha<T: Scalar>(instance: &Instance<T>, samples: usize, seed: u64) -> Result<Vec<T>> {
    if samples == 0 {
        return Err(Error::DegeneratePolicy("alpha estimation needs at least one sample path".into()));
    }
    let price = dlp_dual(instance);
    let mut totals = vec![0usize; instance.k()];
    for m in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, m as u64, 0));
        let arrivals = ArrivalSequence::sample(instance, &mut rng);
        let trace = run_dlp_with_price(instance, &arrivals, price);
        for (t, &x) in totals.iter_mut().zip(trace.final_x().iter()) {
            *t += x;
        }
    }
    let all: usize = totals.iter().sum();
    if all == 0 {
        return Err(Error::DegeneratePolicy("DLP accepted no customer on any sample path".into()));
    }
    let all = T::from_count(all);
    Ok(totals.into_iter().map(|n| T::from_count(n) / all).collect())
}

/// Value table of the aggregated dynamic program: `value(t, n)` is the
/// expected future reward at the start of period `t` with `n` customers
/// accepted so far. Row `T + 1` is the terminal row, minus the expected
/// overage of `n` customers split across types by the fractions `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpdTable<T> {
    alpha: Vec<T>,
    /// `rows[t - 1][n]` for `t = 1..=T+1`, `n = 0..t`.
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> DpdTable<T> {
    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }
    pub fn horizon(&self) -> usize {
        self.rows.len() - 1
    }
    pub fn value(&self, t: usize, n: usize) -> T {
        self.rows[t - 1][n]
    }
    pub fn terminal(&self) -> &[T] {
        self.rows.last().expect("table has a terminal row")
    }
    pub fn row(&self, t: usize) -> &[T] {
        &self.rows[t - 1]
    }
}

/// Law of the consumption of `n` customers split by `alpha`: type `j`
/// contributes `Bin(⌊n α_j⌋, p_j)` or `Bin(⌊n α_j⌋ + 1, p_j)`, mixed so the
/// mean count is `n α_j`.
pub fn aggregate_dist<T: Scalar>(instance: &Instance<T>, alpha: &[T], n: usize) -> CountDistribution<T> {
    let nf = T::from_count(n);
    let mut acc = CountDistribution::zero();
    for j in 0..instance.k() {
        let share = nf * alpha[j];
        let lo = share.floor();
        let frac = share - lo;
        let (p, d) = (instance.show_probs()[j], instance.demands()[j]);
        let mut dist = CountDistribution::binomial(lo.to_usize().unwrap_or(0), p, d);
        if frac > T::zero() {
            dist.add_trial(p * frac, d);
        }
        acc = acc.convolve(&dist);
    }
    acc
}

pub fn dpd_table<T: Scalar>(instance: &Instance<T>, alpha: &[T]) -> Result<DpdTable<T>> {
    if alpha.len() != instance.k() {
        return Err(Error::InvalidInstance(format!("alpha has {} entries for {} types", alpha.len(), instance.k())));
    }
    let total: T = alpha.iter().copied().sum();
    if alpha.iter().any(|&a| a < T::zero()) || (total - T::one()).abs().to_f64_lossy() > 1e-10 {
        return Err(Error::InvalidInstance(format!("alpha must be a probability vector, sums to {total}")));
    }
    let horizon = instance.horizon();
    let capacity = instance.capacity();
    let terminal: Vec<T> = (0..=horizon)
        .map(|n| -aggregate_dist(instance, alpha, n).expected_overage(capacity))
        .collect();
    let mut rows = vec![terminal];
    let lambda = instance.arrival_probs();
    let vbar = instance.eff_values();
    for t in (1..=horizon).rev() {
        let next = rows.last().expect("nonempty");
        let row = (0..t)
            .map(|n| {
                (0..instance.k())
                    .map(|j| lambda[j] * (vbar[j] + next[n + 1]).max(next[n]))
                    .sum()
            })
            .collect();
        rows.push(row);
    }
    rows.reverse();
    Ok(DpdTable { alpha: alpha.to_vec(), rows })
}

/// Accepts when the revenue covers the drop in future value.
pub fn run_dpd<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence, table: &DpdTable<T>) -> Result<PolicyTrace> {
    if table.horizon() != arrivals.horizon() {
        return Err(Error::InconsistentTrace(format!(
            "table covers {} periods, arrivals cover {}",
            table.horizon(),
            arrivals.horizon()
        )));
    }
    let vbar = instance.eff_values();
    Ok(PolicyTrace::record(PolicyKind::Dpd, instance.k(), arrivals, |t, j, x| {
        let n: usize = x.iter().sum();
        let next = table.row(t + 1);
        vbar[j] >= next[n] - next[n + 1]
    }))
}

/// Accepts while the expected consumption stays within capacity.
pub fn run_expected_greedy<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence) -> PolicyTrace {
    let capacity = T::from_count(instance.capacity());
    let slack = T::PROB_TOL * capacity.max(T::one());
    let weight: Vec<T> = (0..instance.k())
        .map(|j| T::from_count(instance.demands()[j]) * instance.show_probs()[j])
        .collect();
    PolicyTrace::record(PolicyKind::ExpectedGreedy, instance.k(), arrivals, |_, j, x| {
        let load: T = x.iter().zip(&weight).map(|(&n, &w)| T::from_count(n) * w).sum();
        load + weight[j] <= capacity + slack
    })
}

/// Clairvoyant index decisions taken online: in every period the index
/// solution for the decisions so far and the true remaining arrivals is
/// computed, and the arrival is accepted when that solution takes at least
/// one customer of its type.
pub fn run_hindsight_index<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence) -> PolicyTrace {
    let mut remaining = arrivals.counts();
    let mut cache = DistributionCache::new(instance);
    PolicyTrace::record(PolicyKind::HindsightIndex, instance.k(), arrivals, |_, j, x| {
        let ctx = SolveContext::with_past_dist(instance, AcceptanceVector(x.to_vec()), remaining.clone(), cache.combined().clone())
            .expect("lengths match the instance");
        let accept = solve_index(&ctx).x[j] >= 1;
        remaining[j] -= 1;
        if accept {
            cache.add(j);
        }
        accept
    })
}

/// Accepts each type first-come until its target count is reached.
pub fn run_replay<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence, target: &[usize]) -> PolicyTrace {
    PolicyTrace::record(PolicyKind::Replay, instance.k(), arrivals, |_, j, x| x[j] < target[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceSpec;

    fn exp_b(horizon: i64) -> Instance<f64> {
        InstanceSpec::new(vec![0.2, 0.3, 0.5], vec![0.6, 0.4, 0.3], vec![0.8, 0.8, 0.8], horizon / 3, horizon)
            .normalize()
            .unwrap()
    }

    fn seq(entries: &[usize], k: usize) -> ArrivalSequence {
        ArrivalSequence::new(entries.to_vec(), k).unwrap()
    }

    #[test]
    fn online_index_zero_capacity_rejects() {
        let inst = exp_b(12).with_capacity_horizon(0, 12);
        let a = seq(&[0, 1, 2, 0, 0, 1, 2, 2, 1, 0, 2, 1], 3);
        let trace = run_online_index(&inst, &a, 7);
        assert!(trace.decisions.iter().all(|d| !d.accepted));
        trace.validate(&a).unwrap();
    }

    #[test]
    fn online_index_single_period() {
        let inst = exp_b(3).with_capacity_horizon(1, 1);
        let a = seq(&[2], 3);
        let trace = run_online_index(&inst, &a, 0);
        assert!(trace.decisions[0].accepted);
    }

    #[test]
    fn online_index_accepts_everything_with_room() {
        let inst = exp_b(30).with_capacity_horizon(30, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = ArrivalSequence::sample(&inst, &mut rng);
        let trace = run_online_index(&inst, &a, 11);
        assert_eq!(trace.accepted_total(), 30);
    }

    #[test]
    fn dlp_price_on_exp_b() {
        let inst = exp_b(150);
        assert_eq!(dlp_dual(&inst), 0.5);
        assert_eq!(dlp_accepts(&inst, 0.5), vec![true, true, false]);
        let roomy = inst.with_capacity_horizon(150, 150);
        assert_eq!(dlp_dual(&roomy), 0.0);
        let a = seq(&[0, 1, 2, 2], 3);
        assert_eq!(run_dlp(&roomy, &a).accepted_total(), 4);
        assert_eq!(run_dlp_with_price(&inst, &a, 0.5).final_x().as_slice(), &[1, 1, 0]);
    }

    #[test]
    fn dlp_counterexample_price() {
        let inst = InstanceSpec::new(vec![0.8, 0.2], vec![0.5, 0.1], vec![1.0, 0.0], 50, 100)
            .normalize()
            .unwrap();
        // sorted: the zero-show type comes first
        assert_eq!(inst.input_index(), &[1, 0]);
        assert_eq!(dlp_dual(&inst), 0.5);
        assert_eq!(dlp_accepts(&inst, 0.5), vec![true, true]);
    }

    #[test]
    fn alpha_for_single_accepted_type() {
        let inst = exp_b(60).with_capacity_horizon(5, 60);
        // price is q of the first type, which then still passes (tie)
        assert_eq!(dlp_accepts(&inst, dlp_dual(&inst)), vec![true, false, false]);
        assert_eq!(estimate_alpha(&inst, 10, 1).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(estimate_alpha(&inst, 0, 1), Err(Error::DegeneratePolicy(_))));
    }

    #[test]
    fn alpha_degenerate_when_nothing_accepted() {
        // only the vanishingly rare type passes the bid price
        let inst = InstanceSpec::new(vec![1e-9, 1.0 - 1e-9], vec![0.5, 0.1], vec![0.5, 0.5], 0, 5)
            .normalize()
            .unwrap();
        assert_eq!(dlp_dual(&inst), 1.0);
        assert_eq!(dlp_accepts(&inst, 1.0), vec![true, false]);
        assert!(matches!(estimate_alpha(&inst, 3, 2), Err(Error::DegeneratePolicy(_))));
    }

    #[test]
    fn dpd_with_room_is_accept_everything() {
        let inst = exp_b(20).with_capacity_horizon(20, 20);
        let table = dpd_table(&inst, &[0.2, 0.3, 0.5]).unwrap();
        assert!(table.terminal().iter().all(|&u| u == 0.0));
        let mean_v = 0.2 * 0.6 + 0.3 * 0.4 + 0.5 * 0.3;
        for t in 1..=20 {
            for n in 0..t {
                assert!((table.value(t, n) - mean_v * (21 - t) as f64).abs() < 1e-12);
            }
        }
        let a = seq(&[0, 1, 2, 2, 1], 3);
        let short = dpd_table(&inst.with_capacity_horizon(20, 5), &[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(run_dpd(&inst, &a, &short).unwrap().accepted_total(), 5);
        assert!(run_dpd(&inst, &a, &table).is_err());
    }

    #[test]
    fn dpd_deterministic_terminal_row() {
        let inst = InstanceSpec::new(vec![0.5, 0.5], vec![0.5, 0.2], vec![1.0, 0.5], 3, 8)
            .normalize()
            .unwrap();
        let table = dpd_table(&inst, &[1.0, 0.0]).unwrap();
        for (n, &u) in table.terminal().iter().enumerate() {
            assert_eq!(u, -(n.saturating_sub(3) as f64));
        }
        assert!(dpd_table(&inst, &[0.7, 0.7]).is_err());
    }

    #[test]
    fn expected_greedy_limits() {
        let inst = exp_b(10).with_capacity_horizon(0, 10);
        let a = seq(&[0, 1, 2, 0, 1, 2, 0, 1, 2, 0], 3);
        assert_eq!(run_expected_greedy(&inst, &a).accepted_total(), 0);
        let roomy = inst.with_capacity_horizon(8, 10);
        assert_eq!(run_expected_greedy(&roomy, &a).accepted_total(), 10);
        let tight = inst.with_capacity_horizon(2, 10);
        // 0.8 per customer: two fit, the third would need 2.4
        assert_eq!(run_expected_greedy(&tight, &a).accepted_total(), 2);
    }

    #[test]
    fn replay_hits_targets() {
        let inst = exp_b(6);
        let a = seq(&[0, 1, 0, 2, 0, 1], 3);
        let trace = run_replay(&inst, &a, &[2, 0, 1]);
        assert_eq!(trace.final_x().as_slice(), &[2, 0, 1]);
        trace.validate(&a).unwrap();
        let mut broken = trace.clone();
        broken.decisions[1].accepted = true;
        assert!(broken.validate(&a).is_err());
    }
}
