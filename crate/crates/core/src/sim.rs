//! Sampling, scoring, coupling diagnostics and replication statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::instance::{AcceptanceVector, ArrivalSequence, Instance};
use crate::num::Scalar;
use crate::offline::{self, GeneralSolver, SolveContext};
use crate::pbin::{dist_of, DistributionCache};
use crate::policies::{self, DpdTable, PolicyKind, PolicyTrace};

/// Per-period hybrid losses at or below this are treated as zero.
pub const LOSS_EVENT_TOL: f64 = 1e-9;

/// Derives an independent seed for replication `rep` and random stream
/// `stream` from a base seed (splitmix64 finalizer over the mixed words).
pub fn stream_seed(base: u64, rep: u64, stream: u64) -> u64 {
    let mut z = base
        ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_arrivals<T: Scalar>(instance: &Instance<T>, seed: u64) -> ArrivalSequence {
    ArrivalSequence::sample(instance, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Expected revenue net of refunds minus expected compensation.
pub fn eval_expected<T: Scalar>(instance: &Instance<T>, x: &[usize]) -> T {
    let revenue: T = x
        .iter()
        .zip(instance.eff_values())
        .map(|(&n, &v)| v * T::from_count(n))
        .sum();
    revenue - dist_of(instance, x).expected_overage(instance.capacity())
}

/// One draw of the show-ups: revenue, minus refunds paid to no-shows,
/// minus one unit per unit of demand beyond capacity.
pub fn eval_realized<T: Scalar>(instance: &Instance<T>, x: &[usize], seed: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut value = T::zero();
    let mut consumed = 0usize;
    for (j, &n) in x.iter().enumerate() {
        let p = instance.show_probs()[j].to_f64_lossy();
        let shows = Binomial::new(n as u64, p).expect("validated probability").sample(&mut rng) as usize;
        value = value + instance.values()[j] * T::from_count(n)
            - instance.refunds()[j] * T::from_count(n - shows);
        consumed += shows * instance.demands()[j];
    }
    value - T::from_count(consumed.saturating_sub(instance.capacity()))
}

/// Runs one online policy on one arrival sequence.
pub fn run_policy<T: Scalar>(
    kind: PolicyKind,
    instance: &Instance<T>,
    arrivals: &ArrivalSequence,
    seed: u64,
    dpd: Option<&DpdTable<T>>,
) -> Result<PolicyTrace> {
    match kind {
        PolicyKind::OnlineIndex => Ok(policies::run_online_index(instance, arrivals, seed)),
        PolicyKind::Dlp => Ok(policies::run_dlp(instance, arrivals)),
        PolicyKind::Dpd => {
            let table = dpd.ok_or_else(|| Error::DegeneratePolicy("DPD needs a value table".into()))?;
            policies::run_dpd(instance, arrivals, table)
        }
        PolicyKind::ExpectedGreedy => Ok(policies::run_expected_greedy(instance, arrivals)),
        PolicyKind::HindsightIndex => Ok(policies::run_hindsight_index(instance, arrivals)),
        PolicyKind::Replay => {
            let target = offline::solve_index(&SolveContext::fresh(instance, arrivals.counts())?).x;
            Ok(policies::run_replay(instance, arrivals, &target))
        }
    }
}

/// Hybrid clairvoyant objectives along a policy trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrace {
    /// `h[t - 1]` is the best index objective available at the start of
    /// period `t`, given the policy's decisions before `t` and the true
    /// arrivals from `t` on.
    pub h: Vec<f64>,
    /// `per_period_loss[t - 2] = h[t - 2] - h[t - 1]` for `t = 2..=T`.
    pub per_period_loss: Vec<f64>,
    pub loss_event_count: usize,
    /// Expected objective of the policy's final acceptances.
    pub policy_objective: f64,
}

impl CouplingTrace {
    pub fn total_loss(&self) -> f64 {
        self.h[0] - self.policy_objective
    }

    /// `h[T] - objective`: zero for the online index policy, which makes the
    /// same last-period decision as the hybrid clairvoyant.
    pub fn terminal_gap(&self) -> f64 {
        self.h[self.h.len() - 1] - self.policy_objective
    }

    pub fn terminal_matches(&self) -> bool {
        self.terminal_gap().abs() <= LOSS_EVENT_TOL
    }

    /// Checks `h[1] - h[T] = Σ per-period losses`.
    pub fn telescopes(&self) -> bool {
        let sum: f64 = self.per_period_loss.iter().sum();
        let span = self.h[0] - self.h[self.h.len() - 1];
        (span - sum).abs() <= LOSS_EVENT_TOL * (1.0 + span.abs())
    }

    /// Total loss is at most one objective step per loss event, on top of
    /// the terminal gap.
    pub fn within_step_bound(&self, step: f64) -> bool {
        let bound = self.loss_event_count as f64 * step + self.terminal_gap();
        self.total_loss() <= bound + LOSS_EVENT_TOL
    }
}

/// Largest change in the objective caused by one more or one fewer accepted
/// customer of any type.
pub fn max_step<T: Scalar>(instance: &Instance<T>) -> f64 {
    (0..instance.k())
        .map(|j| instance.eff_values()[j].to_f64_lossy().max(instance.demands()[j] as f64))
        .fold(0.0, f64::max)
}

pub fn coupling_trace<T: Scalar>(
    instance: &Instance<T>,
    arrivals: &ArrivalSequence,
    trace: &PolicyTrace,
) -> Result<CouplingTrace> {
    trace.validate(arrivals)?;
    let horizon = arrivals.horizon();
    let mut remaining = arrivals.counts();
    let mut cache = DistributionCache::new(instance);
    let mut h = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let x_past = &trace.x_series[t - 1];
        if t > 1 && trace.decisions[t - 2].accepted {
            cache.add(trace.decisions[t - 2].arrival);
        }
        let ctx = SolveContext::with_past_dist(instance, x_past.clone(), remaining.clone(), cache.combined().clone())?;
        let sol = offline::solve_index(&ctx);
        h.push(offline::objective(&ctx, &sol.x)?.to_f64_lossy());
        remaining[arrivals.at(t)] -= 1;
    }
    let per_period_loss: Vec<f64> = h.windows(2).map(|w| w[0] - w[1]).collect();
    let loss_event_count = per_period_loss.iter().filter(|&&l| l > LOSS_EVENT_TOL).count();
    let coupling = CouplingTrace {
        policy_objective: eval_expected(instance, trace.final_x()).to_f64_lossy(),
        h,
        per_period_loss,
        loss_event_count,
    };
    if !coupling.telescopes() {
        return Err(Error::InconsistentTrace("hybrid objectives do not telescope".into()));
    }
    if trace.policy == PolicyKind::OnlineIndex && !coupling.terminal_matches() {
        return Err(Error::InconsistentTrace(format!(
            "last hybrid objective differs from the policy objective by {}",
            coupling.terminal_gap()
        )));
    }
    Ok(coupling)
}

/// Reference objective losses are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    ClairvoyantIndex,
    ClairvoyantGeneral,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::ClairvoyantIndex => "clairvoyant_index",
            Benchmark::ClairvoyantGeneral => "clairvoyant_general",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig<T> {
    pub instance: Instance<T>,
    pub policies: Vec<PolicyKind>,
    pub benchmark: Benchmark,
    pub reps: usize,
    pub seed: u64,
    /// Evaluation budget for exact clairvoyant-general solves.
    pub budget: u128,
    pub restarts: usize,
    pub alpha_samples: usize,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(instance: Instance<T>, policies: Vec<PolicyKind>, benchmark: Benchmark, reps: usize, seed: u64) -> Self {
        Self {
            instance,
            policies,
            benchmark,
            reps,
            seed,
            budget: offline::DEFAULT_BUDGET,
            restarts: offline::DEFAULT_RESTARTS,
            alpha_samples: policies::DEFAULT_ALPHA_SAMPLES,
        }
    }
}

/// Objectives on one sampled path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub seed: u64,
    pub arrivals: Vec<usize>,
    pub clairvoyant_index: f64,
    pub clairvoyant_general: Option<f64>,
    pub general_solver: Option<GeneralSolver>,
    /// Same order as the configured policies.
    pub policies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub name: String,
    pub mean_obj: f64,
    pub stderr: f64,
    /// Mean of the per-path gap to the benchmark.
    pub abs_loss: f64,
    pub abs_loss_stderr: f64,
    /// `1 - mean(policy) / mean(benchmark)`.
    pub rel_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub benchmark: Benchmark,
    pub reps: usize,
    pub seed: u64,
    pub horizon: usize,
    pub capacity: usize,
    /// Benchmarks first, then policies in configured order.
    pub stats: Vec<PolicyStats>,
    pub exact_solves: usize,
    pub ascent_solves: usize,
    pub alpha: Option<Vec<f64>>,
    pub replications: Vec<ReplicationRecord>,
}

impl LossReport {
    pub fn stat(&self, name: &str) -> Option<&PolicyStats> {
        self.stats.iter().find(|s| s.name == name)
    }
}

/// Samples `reps` paths and scores every policy and benchmark on each,
/// all on the same arrivals.
pub fn run_replications<T: Scalar>(config: &ExperimentConfig<T>) -> Result<LossReport> {
    let instance = &config.instance;
    let (dpd, alpha) = if config.policies.contains(&PolicyKind::Dpd) {
        let alpha = policies::estimate_alpha(instance, config.alpha_samples, stream_seed(config.seed, u64::MAX, 3))?;
        (Some(policies::dpd_table(instance, &alpha)?), Some(alpha.iter().map(|a| a.to_f64_lossy()).collect()))
    } else {
        (None, None)
    };

    let records = (0..config.reps)
        .into_par_iter()
        .map(|rep| replicate(config, dpd.as_ref(), rep))
        .collect::<Result<Vec<_>>>()?;

    let general = config.benchmark == Benchmark::ClairvoyantGeneral;
    let bench: Vec<f64> = records
        .iter()
        .map(|r| if general { r.clairvoyant_general.unwrap_or(f64::NAN) } else { r.clairvoyant_index })
        .collect();
    let mut stats = vec![summarize(Benchmark::ClairvoyantIndex.name(), records.iter().map(|r| r.clairvoyant_index).collect(), &bench)];
    if general {
        stats.push(summarize(Benchmark::ClairvoyantGeneral.name(), bench.clone(), &bench));
    }
    for (i, kind) in config.policies.iter().enumerate() {
        stats.push(summarize(kind.name(), records.iter().map(|r| r.policies[i]).collect(), &bench));
    }
    let count = |s| records.iter().filter(|r| r.general_solver == Some(s)).count();
    Ok(LossReport {
        benchmark: config.benchmark,
        reps: config.reps,
        seed: config.seed,
        horizon: instance.horizon(),
        capacity: instance.capacity(),
        stats,
        exact_solves: count(GeneralSolver::Exact),
        ascent_solves: count(GeneralSolver::Ascent),
        alpha,
        replications: records,
    })
}

fn replicate<T: Scalar>(config: &ExperimentConfig<T>, dpd: Option<&DpdTable<T>>, rep: usize) -> Result<ReplicationRecord> {
    let instance = &config.instance;
    let seed = stream_seed(config.seed, rep as u64, 0);
    let arrivals = sample_arrivals(instance, seed);
    let ctx = SolveContext::fresh(instance, arrivals.counts())?;
    let index_x = offline::solve_index(&ctx).x;
    let (general, solver) = if config.benchmark == Benchmark::ClairvoyantGeneral {
        let (x, solver) = offline::solve_clairvoyant_general(
            &ctx,
            config.budget,
            config.restarts,
            stream_seed(config.seed, rep as u64, 2),
        );
        (Some(eval_expected(instance, &x).to_f64_lossy()), Some(solver))
    } else {
        (None, None)
    };
    let policies = config
        .policies
        .iter()
        .map(|&kind| {
            let trace = run_policy(kind, instance, &arrivals, stream_seed(config.seed, rep as u64, 1), dpd)?;
            Ok(eval_expected(instance, trace.final_x()).to_f64_lossy())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicationRecord {
        rep,
        seed,
        arrivals: arrivals.entries().to_vec(),
        clairvoyant_index: eval_expected(instance, &index_x).to_f64_lossy(),
        clairvoyant_general: general,
        general_solver: solver,
        policies,
    })
}

fn summarize(name: &str, values: Vec<f64>, bench: &[f64]) -> PolicyStats {
    let (mean_obj, stderr) = mean_stderr(&values);
    let gaps: Vec<f64> = bench.iter().zip(&values).map(|(b, v)| b - v).collect();
    let (abs_loss, abs_loss_stderr) = mean_stderr(&gaps);
    let (bench_mean, _) = mean_stderr(bench);
    PolicyStats {
        name: name.to_string(),
        mean_obj,
        stderr,
        abs_loss,
        abs_loss_stderr,
        rel_loss: relative_loss(mean_obj, bench_mean),
    }
}

/// `1 - policy / benchmark`, zero when both vanish.
pub fn relative_loss(policy: f64, benchmark: f64) -> f64 {
    if benchmark == 0.0 {
        if policy == 0.0 { 0.0 } else { f64::NAN }
    } else {
        1.0 - policy / benchmark
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval for the slope.
    pub slope_ci: (f64, f64),
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if n == 2 {
        return Some(LinearFit { slope, intercept, slope_stderr: 0.0, slope_ci: (slope, slope) });
    }
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = (rss / (nf - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0).ok()?.inverse_cdf(0.975);
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
        slope_ci: (slope - t * slope_stderr, slope + t * slope_stderr),
    })
}

/// Fit of `ln y` on `ln x`; `None` unless every value is positive.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Acceptance vector of the clairvoyant index solution on a whole path.
pub fn clairvoyant_index<T: Scalar>(instance: &Instance<T>, arrivals: &ArrivalSequence) -> Result<AcceptanceVector> {
    Ok(offline::solve_index(&SolveContext::fresh(instance, arrivals.counts())?).x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceSpec;

    fn single(v: f64, p: f64, b: i64, t: i64) -> Instance<f64> {
        InstanceSpec::new(vec![1.0], vec![v], vec![p], b, t).normalize().unwrap()
    }

    #[test]
    fn expected_objective_vectors() {
        assert_eq!(eval_expected(&single(0.5, 1.0, 1, 5), &[0]), 0.0);
        assert_eq!(eval_expected(&single(0.5, 1.0, 1, 5), &[2]), 0.0);
        assert!((eval_expected(&single(0.4, 0.5, 1, 5), &[2]) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn realized_is_exact_for_certain_shows() {
        let inst = InstanceSpec::new(vec![0.5, 0.5], vec![0.5, 0.3], vec![1.0, 0.0], 2, 10)
            .normalize()
            .unwrap();
        for seed in 0..5 {
            assert_eq!(eval_realized(&inst, &[3, 4], seed), eval_expected(&inst, &[3, 4]));
        }
        assert_eq!(eval_realized(&inst, &[0, 0], 1), 0.0);
    }

    #[test]
    fn arrivals_are_reproducible() {
        let inst = InstanceSpec::new(vec![0.3, 0.7], vec![0.1, 0.2], vec![0.5, 0.5], 3, 40)
            .normalize()
            .unwrap();
        assert_eq!(sample_arrivals(&inst, 9), sample_arrivals(&inst, 9));
        assert_ne!(sample_arrivals(&inst, 9), sample_arrivals(&inst, 10));
        assert_eq!(sample_arrivals(&single(0.1, 0.5, 1, 20), 3).entries(), &[0; 20]);
    }

    #[test]
    fn stream_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..100).flat_map(|r| (0..4).map(move |s| stream_seed(42, r, s))).collect();
        assert_eq!(seeds.len(), 400);
    }

    #[test]
    fn deterministic_single_type_report() {
        let inst = single(0.5, 1.0, 3, 8);
        let cfg = ExperimentConfig::new(inst, vec![PolicyKind::OnlineIndex], Benchmark::ClairvoyantGeneral, 1, 5);
        let report = run_replications(&cfg).unwrap();
        // 8 arrivals, 3 seats, no no-shows: accept exactly min(N, B)
        let bench = report.stat("clairvoyant_general").unwrap();
        assert!((bench.mean_obj - 1.5).abs() < 1e-12);
        assert_eq!(report.exact_solves, 1);
        assert!(report.stat("online_index").unwrap().abs_loss.abs() < 1e-12);
    }

    #[test]
    fn replication_is_bit_reproducible() {
        let inst = InstanceSpec::new(vec![0.2, 0.3, 0.5], vec![0.6, 0.4, 0.3], vec![0.8, 0.8, 0.8], 5, 15)
            .normalize()
            .unwrap();
        let policies = PolicyKind::ONLINE.to_vec();
        let cfg = ExperimentConfig::new(inst, policies, Benchmark::ClairvoyantGeneral, 8, 77);
        assert_eq!(run_replications(&cfg).unwrap(), run_replications(&cfg).unwrap());
    }

    #[test]
    fn hindsight_index_has_no_hybrid_loss() {
        let inst = InstanceSpec::new(vec![0.2, 0.3, 0.5], vec![0.6, 0.4, 0.3], vec![0.8, 0.8, 0.8], 10, 30)
            .normalize()
            .unwrap();
        let a = sample_arrivals(&inst, 4);
        let trace = run_policy(PolicyKind::HindsightIndex, &inst, &a, 0, None).unwrap();
        let c = coupling_trace(&inst, &a, &trace).unwrap();
        assert_eq!(c.loss_event_count, 0);
        assert!(c.terminal_matches());
        let best = eval_expected(&inst, &clairvoyant_index(&inst, &a).unwrap());
        assert!(c.policy_objective >= best - 1e-9);
    }

    #[test]
    fn fits() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let fit = linear_fit(&xs, &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
        let ll = loglog_fit(&xs, &xs.map(|x: f64| 5.0 * x.sqrt())).unwrap();
        assert!((ll.slope - 0.5).abs() < 1e-12);
        assert!(loglog_fit(&xs, &[1.0, 0.0, 2.0, 3.0]).is_none());
        let noisy = linear_fit(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.5, 2.9, 4.2, 5.1]).unwrap();
        assert!(noisy.slope_ci.0 < noisy.slope && noisy.slope < noisy.slope_ci.1);
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        assert_eq!(relative_loss(0.0, 0.0), 0.0);
        assert!((relative_loss(0.9, 1.0) - 0.1).abs() < 1e-15);
    }
}
