//! Exact law of the resources consumed by a set of accepted customers.
//!
//! A customer of type `j` consumes `d_j` units with probability `p_j`,
//! independently of everyone else, so consumption is a weighted sum of
//! independent Bernoulli trials. Distributions are stored as a window of the
//! pmf: entries below [`Scalar::NEGLIGIBLE_MASS`] at either end are dropped,
//! which keeps long horizons affordable without affecting any comparison the
//! solvers make.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::num::Scalar;

/// Probability mass table of a nonnegative integer random variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution<T> {
    /// Smallest support value held in `mass`.
    offset: usize,
    mass: Vec<T>,
    /// Largest value the variable can take (before trimming).
    s_max: usize,
}

impl<T: Scalar> CountDistribution<T> {
    /// Point mass at `s`.
    pub fn point(s: usize) -> Self {
        Self { offset: s, mass: vec![T::one()], s_max: s }
    }

    /// Point mass at zero: the law of an empty set of trials.
    pub fn zero() -> Self {
        Self::point(0)
    }

    /// Law of `d * Bin(n, p)`.
    pub fn binomial(n: usize, p: T, d: usize) -> Self {
        assert!(d >= 1, "demand must be at least one unit");
        let s_max = n * d;
        if n == 0 || p <= T::zero() {
            return Self { offset: 0, mass: vec![T::one()], s_max };
        }
        if p >= T::one() {
            return Self { offset: s_max, mass: vec![T::one()], s_max };
        }

        // Unnormalized weights relative to the mode, walked outwards until
        // they become negligible. The mode carries at least 1/(n+1) of the
        // mass, so a weight below the cutoff stays below it once normalized.
        let cutoff = T::NEGLIGIBLE_MASS;
        let q = T::one() - p;
        let odds = p / q;
        let nf = T::from_count(n);
        let mode = ((T::from_count(n + 1) * p).floor().to_usize().unwrap_or(0)).min(n);

        let mut upper = vec![T::one()];
        let mut w = T::one();
        for y in mode..n {
            let yf = T::from_count(y);
            w = w * (nf - yf) / (yf + T::one()) * odds;
            if w < cutoff {
                break;
            }
            upper.push(w);
        }
        let mut lower = Vec::new();
        w = T::one();
        for y in (1..=mode).rev() {
            let yf = T::from_count(y);
            w = w * yf / (nf - yf + T::one()) / odds;
            if w < cutoff {
                break;
            }
            lower.push(w);
        }
        let lo = mode - lower.len();
        lower.reverse();
        lower.extend(upper);
        let total: T = lower.iter().copied().sum();
        let weights = lower.into_iter().map(|w| w / total);

        let mass = if d == 1 {
            weights.collect()
        } else {
            let count = weights.len();
            let mut spread = vec![T::zero(); d * (count - 1) + 1];
            for (i, w) in weights.enumerate() {
                spread[i * d] = w;
            }
            spread
        };
        Self { offset: lo * d, mass, s_max }
    }

    /// Builds from a dense pmf over `0..pmf.len()`.
    pub fn from_pmf(pmf: Vec<T>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::MassDrift(0.0));
        }
        let s_max = pmf.len() - 1;
        let mut dist = Self { offset: 0, mass: pmf, s_max };
        for m in dist.mass.iter_mut() {
            if *m < T::zero() {
                *m = T::zero();
            }
        }
        dist.check_mass()?;
        dist.trim();
        Ok(dist)
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }
    /// Smallest support value with non-negligible mass.
    pub fn offset(&self) -> usize {
        self.offset
    }
    /// Stored pmf entries for `offset()..offset() + window().len()`.
    pub fn window(&self) -> &[T] {
        &self.mass
    }

    pub fn pmf(&self, s: usize) -> T {
        s.checked_sub(self.offset)
            .and_then(|i| self.mass.get(i).copied())
            .unwrap_or_else(T::zero)
    }

    /// The full table indexed by `0..=s_max`.
    pub fn pmf_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.s_max + 1];
        out[self.offset..self.offset + self.mass.len()].copy_from_slice(&self.mass);
        out
    }

    pub fn total_mass(&self) -> T {
        self.mass.iter().copied().sum()
    }

    pub fn check_mass(&self) -> Result<()> {
        let total = self.total_mass().to_f64_lossy();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::MassDrift(total));
        }
        Ok(())
    }

    pub fn mean(&self) -> T {
        self.mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * T::from_count(self.offset + i))
            .sum()
    }

    /// Law of the independent sum.
    pub fn convolve(&self, other: &Self) -> Self {
        if other.mass.len() == 1 {
            return self.shifted(other.offset, other.s_max, other.mass[0]);
        }
        if self.mass.len() == 1 {
            return other.shifted(self.offset, self.s_max, self.mass[0]);
        }
        let (a, b) = (&self.mass, &other.mass);
        let mut out = vec![T::zero(); a.len() + b.len() - 1];
        for (i, &ai) in a.iter().enumerate() {
            if ai == T::zero() {
                continue;
            }
            for (o, &bj) in out[i..].iter_mut().zip(b) {
                *o = *o + ai * bj;
            }
        }
        let mut dist = Self {
            offset: self.offset + other.offset,
            mass: out,
            s_max: self.s_max + other.s_max,
        };
        dist.trim();
        dist
    }

    fn shifted(&self, by: usize, extra_max: usize, scale: T) -> Self {
        Self {
            offset: self.offset + by,
            mass: self.mass.iter().map(|&m| m * scale).collect(),
            s_max: self.s_max + extra_max,
        }
    }

    /// Adds one independent trial worth `d` units with success probability `p`.
    pub fn add_trial(&mut self, p: T, d: usize) {
        self.s_max += d;
        if p <= T::zero() {
            return;
        }
        if p >= T::one() {
            self.offset += d;
            return;
        }
        let q = T::one() - p;
        let len = self.mass.len();
        self.mass.resize(len + d, T::zero());
        for s in (0..len + d).rev() {
            let stay = if s < len { self.mass[s] * q } else { T::zero() };
            let moved = if s >= d { self.mass[s - d] * p } else { T::zero() };
            self.mass[s] = stay + moved;
        }
        self.trim();
    }

    /// `P[X >= m]`; 1 for `m <= 0`, 0 beyond `s_max`.
    pub fn tail_prob(&self, m: i64) -> T {
        if m <= self.offset as i64 {
            return T::one();
        }
        let start = (m as usize) - self.offset;
        if start >= self.mass.len() {
            return T::zero();
        }
        let tail: T = self.mass[start..].iter().rev().copied().sum();
        tail.min(T::one())
    }

    /// `E[(X - b)^+]`.
    pub fn expected_overage(&self, b: usize) -> T {
        let top = self.offset + self.mass.len();
        if b + 1 >= top {
            return T::zero();
        }
        let first = (b + 1).max(self.offset);
        (first..top)
            .rev()
            .map(|s| T::from_count(s - b) * self.mass[s - self.offset])
            .sum()
    }

    /// Suffix sums for repeated tail queries.
    pub fn survival(&self) -> Survival<T> {
        let mut sf = vec![T::zero(); self.mass.len()];
        let mut acc = T::zero();
        for i in (0..self.mass.len()).rev() {
            acc = acc + self.mass[i];
            sf[i] = acc.min(T::one());
        }
        Survival { offset: self.offset, sf }
    }

    fn trim(&mut self) {
        let cutoff = T::NEGLIGIBLE_MASS;
        let end = self.mass.iter().rposition(|&m| m >= cutoff).map_or(0, |i| i + 1);
        if end == 0 {
            // nothing survives the cutoff; keep the heaviest entry
            let (i, _) = self
                .mass
                .iter()
                .enumerate()
                .fold((0, T::zero()), |best, (i, &m)| if m > best.1 { (i, m) } else { best });
            self.offset += i;
            self.mass = vec![T::one()];
            return;
        }
        self.mass.truncate(end);
        let start = self.mass.iter().position(|&m| m >= cutoff).unwrap_or(0);
        if start > 0 {
            self.mass.drain(..start);
            self.offset += start;
        }
    }
}

/// `P[X >= c]` for every `c`, precomputed.
#[derive(Debug, Clone)]
pub struct Survival<T> {
    offset: usize,
    sf: Vec<T>,
}

impl<T: Scalar> Survival<T> {
    pub fn at(&self, c: i64) -> T {
        if c <= self.offset as i64 {
            return T::one();
        }
        self.sf.get(c as usize - self.offset).copied().unwrap_or_else(T::zero)
    }

    /// `P[X + Y >= c]` for `Y` independent of `X` with law `other`.
    pub fn tail_of_sum(&self, other: &CountDistribution<T>, c: i64) -> T {
        let mut acc = T::zero();
        for (i, &w) in other.mass.iter().enumerate().rev() {
            if w == T::zero() {
                continue;
            }
            acc = acc + w * self.at(c - (other.offset + i) as i64);
        }
        acc.min(T::one())
    }
}

pub fn binomial_dist<T: Scalar>(n: usize, p: T, d: usize) -> CountDistribution<T> {
    CountDistribution::binomial(n, p, d)
}

pub fn convolve<T: Scalar>(a: &CountDistribution<T>, b: &CountDistribution<T>) -> CountDistribution<T> {
    a.convolve(b)
}

/// Law of `Σ_j d_j Bin(x_j, p_j)` over the instance's types.
pub fn dist_of<T: Scalar>(instance: &Instance<T>, x: &[usize]) -> CountDistribution<T> {
    let p = instance.show_probs();
    let d = instance.demands();
    x.iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .fold(CountDistribution::zero(), |acc, (j, &n)| {
            acc.convolve(&CountDistribution::binomial(n, p[j], d[j]))
        })
}

pub fn tail_prob<T: Scalar>(dist: &CountDistribution<T>, m: i64) -> T {
    dist.tail_prob(m)
}

pub fn expected_overage<T: Scalar>(dist: &CountDistribution<T>, b: usize) -> T {
    dist.expected_overage(b)
}

/// Per-type binomials plus their convolution, kept in step with a count vector.
#[derive(Debug, Clone)]
pub struct DistributionCache<T> {
    probs: Vec<T>,
    demands: Vec<usize>,
    per_type: Vec<CountDistribution<T>>,
    combined: CountDistribution<T>,
    counts: Vec<usize>,
}

impl<T: Scalar> DistributionCache<T> {
    pub fn new(instance: &Instance<T>) -> Self {
        let k = instance.k();
        Self {
            probs: instance.show_probs().to_vec(),
            demands: instance.demands().to_vec(),
            per_type: vec![CountDistribution::zero(); k],
            combined: CountDistribution::zero(),
            counts: vec![0; k],
        }
    }

    pub fn from_counts(instance: &Instance<T>, x: &[usize]) -> Self {
        let mut cache = Self::new(instance);
        for (j, &n) in x.iter().enumerate() {
            cache.per_type[j] = CountDistribution::binomial(n, cache.probs[j], cache.demands[j]);
            cache.counts[j] = n;
        }
        cache.refold();
        cache
    }

    pub fn combined(&self) -> &CountDistribution<T> {
        &self.combined
    }
    pub fn per_type(&self, j: usize) -> &CountDistribution<T> {
        &self.per_type[j]
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Adds one trial of type `j`.
    pub fn add(&mut self, j: usize) {
        self.counts[j] += 1;
        self.per_type[j].add_trial(self.probs[j], self.demands[j]);
        self.combined.add_trial(self.probs[j], self.demands[j]);
    }

    /// Removes one trial of type `j`, rebuilding the combined law from the
    /// per-type tables.
    pub fn remove(&mut self, j: usize) -> Result<()> {
        if self.counts[j] == 0 {
            return Err(Error::CountUnderflow(j));
        }
        self.set(j, self.counts[j] - 1);
        Ok(())
    }

    /// Moves the count of type `j` by `delta`.
    pub fn update(&mut self, j: usize, delta: i64) -> Result<()> {
        let target = self.counts[j] as i64 + delta;
        if target < 0 {
            return Err(Error::CountUnderflow(j));
        }
        if delta == 1 {
            self.add(j);
        } else if delta != 0 {
            self.set(j, target as usize);
        }
        Ok(())
    }

    /// Sets the count of type `j` directly.
    pub fn set(&mut self, j: usize, count: usize) {
        if count == self.counts[j] {
            return;
        }
        self.counts[j] = count;
        self.per_type[j] = CountDistribution::binomial(count, self.probs[j], self.demands[j]);
        self.refold();
    }

    fn refold(&mut self) {
        self.combined = self
            .per_type
            .iter()
            .fold(CountDistribution::zero(), |acc, d| acc.convolve(d));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceSpec;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn binomial_small_cases() {
        assert_eq!(CountDistribution::<f64>::binomial(0, 0.3, 1).pmf_dense(), vec![1.0]);
        assert!(close(&binomial_dist(2, 0.5, 1).pmf_dense(), &[0.25, 0.5, 0.25], 1e-15));
        assert!(close(&binomial_dist(1, 0.3, 2).pmf_dense(), &[0.7, 0.0, 0.3], 1e-15));
        let d = binomial_dist(3, 1.0, 2);
        assert_eq!(d.pmf_dense(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(binomial_dist(4, 0.0, 1).pmf_dense(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn convolution_identity_and_pairs() {
        let b = binomial_dist(3, 0.4, 1);
        assert_eq!(CountDistribution::zero().convolve(&b), b);
        let half = binomial_dist(1, 0.5, 1);
        assert!(close(&half.convolve(&half).pmf_dense(), &[0.25, 0.5, 0.25], 1e-15));
    }

    #[test]
    fn mixed_convolution_matches_enumeration() {
        let got = binomial_dist(2, 0.2, 1).convolve(&binomial_dist(3, 0.7, 1)).pmf_dense();
        let probs = [0.2, 0.2, 0.7, 0.7, 0.7];
        let mut want = vec![0.0; 6];
        for mask in 0u32..32 {
            let mut w = 1.0;
            for (i, &p) in probs.iter().enumerate() {
                w *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
            }
            want[mask.count_ones() as usize] += w;
        }
        assert!(close(&got, &want, 1e-12));
    }

    #[test]
    fn tails_and_overage() {
        let b = binomial_dist(2, 0.5, 1);
        assert_eq!(b.tail_prob(1), 0.75);
        assert_eq!(b.tail_prob(0), 1.0);
        assert_eq!(b.tail_prob(-3), 1.0);
        assert_eq!(b.tail_prob(3), 0.0);
        assert_eq!(b.expected_overage(1), 0.25);
        assert_eq!(b.expected_overage(2), 0.0);
        assert_eq!(binomial_dist(3, 1.0, 1).expected_overage(1), 2.0);
    }

    #[test]
    fn add_trial_matches_binomial() {
        let mut acc = CountDistribution::zero();
        for _ in 0..40 {
            acc.add_trial(0.37, 3);
        }
        let direct = binomial_dist(40, 0.37, 3);
        assert_eq!(acc.s_max(), direct.s_max());
        assert!(close(&acc.pmf_dense(), &direct.pmf_dense(), 1e-13));
    }

    #[test]
    fn long_binomial_is_trimmed_and_normalized() {
        let b = binomial_dist(5000, 0.5f64, 1);
        assert!(b.window().len() < 1000);
        assert!((b.total_mass() - 1.0).abs() < 1e-12);
        assert!((b.mean() - 2500.0).abs() < 1e-8);
        assert!((b.tail_prob(2501) - 0.5 + b.pmf(2500) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn survival_queries_agree_with_convolution() {
        let a = binomial_dist(7, 0.3f64, 1).convolve(&binomial_dist(4, 0.6, 2));
        let b = binomial_dist(5, 0.45, 2);
        let sum = a.convolve(&b);
        let sf = a.survival();
        for c in -2..30 {
            assert!((sf.tail_of_sum(&b, c) - sum.tail_prob(c)).abs() < 1e-13, "c = {c}");
            assert!((sf.at(c) - a.tail_prob(c)).abs() < 1e-15);
        }
    }

    #[test]
    fn single_precision_engine() {
        let b = CountDistribution::<f32>::binomial(2, 0.5, 1);
        assert_eq!(b.tail_prob(1), 0.75f32);
        assert!((b.expected_overage(1) - 0.25).abs() < 1e-7);
    }

    #[test]
    fn cache_round_trip() {
        let inst = InstanceSpec::new(vec![0.5, 0.5], vec![0.3, 0.2], vec![0.4, 0.9], 3, 10)
            .with_demands(vec![1, 2])
            .normalize()
            .unwrap();
        let mut cache = DistributionCache::new(&inst);
        cache.add(1);
        let single = binomial_dist(1, inst.show_probs()[1], inst.demands()[1]);
        assert!(close(&cache.combined().pmf_dense(), &single.pmf_dense(), 1e-15));
        cache.update(0, 1).unwrap();
        cache.update(0, 1).unwrap();
        let before = cache.combined().clone();
        cache.add(1);
        cache.remove(1).unwrap();
        assert!(close(&cache.combined().pmf_dense(), &before.pmf_dense(), 1e-12));
        assert!(close(&cache.combined().pmf_dense(), &dist_of(&inst, &[2, 1]).pmf_dense(), 1e-12));
        assert_eq!(cache.remove(1), Ok(()));
        assert_eq!(cache.remove(1), Err(Error::CountUnderflow(1)));
        assert_eq!(cache.update(0, -3), Err(Error::CountUnderflow(0)));
    }

    #[test]
    fn from_pmf_rejects_drift() {
        assert!(CountDistribution::from_pmf(vec![0.5, 0.4]).is_err());
        let d = CountDistribution::from_pmf(vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        assert_eq!(d.offset(), 1);
        assert_eq!(d.s_max(), 3);
        assert_eq!(d.tail_prob(2), 0.5);
    }
}
