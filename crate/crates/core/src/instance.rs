//! Problem instances, canonical type ordering, arrival sequences and
//! acceptance vectors.
//!
//! Types are always held in *critical-ratio order*: `q_j = v̄_j / (d_j p_j)`
//! descending, ties broken by larger effective value, then larger show
//! probability, then input position. A permutation record maps each sorted
//! position back to its input position so results can be reported in the
//! caller's order.

use std::cmp::Ordering;
use std::ops::{Deref, Index};

use rand::Rng;
use rand_distr::{Distribution, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Instance as read from disk: arrays in input order, nothing derived.
///
/// Field names follow the on-disk JSON layout
/// `{lambda, v, p, r?, d?, B, T}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec<T> {
    pub lambda: Vec<T>,
    pub v: Vec<T>,
    pub p: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<u32>>,
    #[serde(rename = "B")]
    pub capacity: i64,
    #[serde(rename = "T")]
    pub horizon: i64,
}

impl<T: Scalar> InstanceSpec<T> {
    pub fn new(lambda: Vec<T>, v: Vec<T>, p: Vec<T>, capacity: i64, horizon: i64) -> Self {
        Self { lambda, v, p, r: None, d: None, capacity, horizon }
    }

    pub fn with_refunds(mut self, r: Vec<T>) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_demands(mut self, d: Vec<u32>) -> Self {
        self.d = Some(d);
        self
    }

    /// Validates and sorts into critical-ratio order.
    pub fn normalize(&self) -> Result<Instance<T>> {
        normalize(self)
    }
}

/// A validated instance in critical-ratio order.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    arrival_probs: Vec<T>,
    values: Vec<T>,
    show_probs: Vec<T>,
    refunds: Vec<T>,
    demands: Vec<usize>,
    capacity: usize,
    horizon: usize,
    eff_values: Vec<T>,
    critical_ratios: Vec<T>,
    always_accept: Vec<bool>,
    /// `input_index[j]` is the input position of sorted type `j`.
    input_index: Vec<usize>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInstance(msg.into())
}

/// Validates `raw` and returns it sorted by critical ratio.
pub fn normalize<T: Scalar>(raw: &InstanceSpec<T>) -> Result<Instance<T>> {
    let k = raw.lambda.len();
    if k == 0 {
        return Err(invalid("at least one customer type is required"));
    }
    if raw.v.len() != k || raw.p.len() != k {
        return Err(invalid(format!(
            "length mismatch: lambda has {k}, v has {}, p has {}",
            raw.v.len(),
            raw.p.len()
        )));
    }
    let refunds = match &raw.r {
        Some(r) if r.len() != k => return Err(invalid("refund vector length mismatch")),
        Some(r) => r.clone(),
        None => vec![T::zero(); k],
    };
    let demands: Vec<usize> = match &raw.d {
        Some(d) if d.len() != k => return Err(invalid("demand vector length mismatch")),
        Some(d) => d.iter().map(|&x| x as usize).collect(),
        None => vec![1; k],
    };
    if raw.horizon < 1 {
        return Err(invalid(format!("horizon T must be positive, got {}", raw.horizon)));
    }
    if raw.capacity < 0 {
        return Err(invalid(format!("capacity B must be nonnegative, got {}", raw.capacity)));
    }

    let zero = T::zero();
    let one = T::one();
    let mut total = zero;
    for j in 0..k {
        let (lam, v, p, r, d) = (raw.lambda[j], raw.v[j], raw.p[j], refunds[j], demands[j]);
        if !(lam.is_finite() && lam > zero) {
            return Err(invalid(format!("lambda[{j}] = {lam} must be positive")));
        }
        if !(p >= zero && p <= one) {
            return Err(invalid(format!("p[{j}] = {p} outside [0, 1]")));
        }
        if !(v >= zero && v < one) {
            return Err(invalid(format!("v[{j}] = {v} outside [0, 1)")));
        }
        if !(r == zero || (r > zero && r < v)) {
            return Err(invalid(format!("r[{j}] = {r} must be 0 or in [0, v[{j}])")));
        }
        if d == 0 {
            return Err(invalid(format!("d[{j}] must be at least 1")));
        }
        total = total + lam;
    }
    if (total - one).abs() > T::PROB_TOL {
        return Err(invalid(format!("lambda sums to {total}, expected 1")));
    }

    let eff: Vec<T> = (0..k).map(|j| raw.v[j] - refunds[j] * (one - raw.p[j])).collect();
    let ratio: Vec<T> = (0..k)
        .map(|j| {
            if raw.p[j] == zero {
                T::infinity()
            } else {
                eff[j] / (T::from_count(demands[j]) * raw.p[j])
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        desc(ratio[a], ratio[b])
            .then(desc(eff[a], eff[b]))
            .then(desc(raw.p[a], raw.p[b]))
            .then(a.cmp(&b))
    });

    let pick = |src: &[T]| order.iter().map(|&i| src[i]).collect::<Vec<T>>();
    let critical_ratios = pick(&ratio);
    Ok(Instance {
        arrival_probs: pick(&raw.lambda),
        values: pick(&raw.v),
        show_probs: pick(&raw.p),
        refunds: pick(&refunds),
        demands: order.iter().map(|&i| demands[i]).collect(),
        capacity: raw.capacity as usize,
        horizon: raw.horizon as usize,
        eff_values: pick(&eff),
        always_accept: critical_ratios.iter().map(|&q| q >= one).collect(),
        critical_ratios,
        input_index: order,
    })
}

fn desc<T: Scalar>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

impl<T: Scalar> Instance<T> {
    pub fn k(&self) -> usize {
        self.arrival_probs.len()
    }
    pub fn arrival_probs(&self) -> &[T] {
        &self.arrival_probs
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn show_probs(&self) -> &[T] {
        &self.show_probs
    }
    pub fn refunds(&self) -> &[T] {
        &self.refunds
    }
    pub fn demands(&self) -> &[usize] {
        &self.demands
    }
    pub fn capacity(&self) -> usize {
        self.capacity
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    /// `v̄_j = v_j - r_j (1 - p_j)`.
    pub fn eff_values(&self) -> &[T] {
        &self.eff_values
    }
    /// `q_j = v̄_j / (d_j p_j)`, `+inf` when `p_j = 0`.
    pub fn critical_ratios(&self) -> &[T] {
        &self.critical_ratios
    }
    /// Types with `q_j >= 1`; accepting them never loses money.
    pub fn always_accept(&self) -> &[bool] {
        &self.always_accept
    }
    /// Input position of each sorted type.
    pub fn input_index(&self) -> &[usize] {
        &self.input_index
    }
    pub fn max_demand(&self) -> usize {
        self.demands.iter().copied().max().unwrap_or(1)
    }
    pub fn has_unit_demands(&self) -> bool {
        self.demands.iter().all(|&d| d == 1)
    }

    /// Same instance with a different capacity and horizon.
    pub fn with_capacity_horizon(&self, capacity: usize, horizon: usize) -> Self {
        Self { capacity, horizon: horizon.max(1), ..self.clone() }
    }

    /// Reconstructs the raw input (input order) from the sorted instance.
    pub fn to_spec(&self) -> InstanceSpec<T> {
        let k = self.k();
        let mut spec = InstanceSpec {
            lambda: vec![T::zero(); k],
            v: vec![T::zero(); k],
            p: vec![T::zero(); k],
            r: None,
            d: None,
            capacity: self.capacity as i64,
            horizon: self.horizon as i64,
        };
        let mut r = vec![T::zero(); k];
        let mut d = vec![1u32; k];
        for (j, &src) in self.input_index.iter().enumerate() {
            spec.lambda[src] = self.arrival_probs[j];
            spec.v[src] = self.values[j];
            spec.p[src] = self.show_probs[j];
            r[src] = self.refunds[j];
            d[src] = self.demands[j] as u32;
        }
        if r.iter().any(|&x| x != T::zero()) {
            spec.r = Some(r);
        }
        if d.iter().any(|&x| x != 1) {
            spec.d = Some(d);
        }
        spec
    }

    /// The instance as a raw spec already in sorted order.
    pub fn sorted_spec(&self) -> InstanceSpec<T> {
        InstanceSpec {
            lambda: self.arrival_probs.clone(),
            v: self.values.clone(),
            p: self.show_probs.clone(),
            r: self.refunds.iter().any(|&x| x != T::zero()).then(|| self.refunds.clone()),
            d: self
                .demands
                .iter()
                .any(|&x| x != 1)
                .then(|| self.demands.iter().map(|&x| x as u32).collect()),
            capacity: self.capacity as i64,
            horizon: self.horizon as i64,
        }
    }

    /// Reorders a per-type vector from sorted order back to input order.
    pub fn to_input_order<V: Clone>(&self, sorted: &[V]) -> Vec<V> {
        let mut out = sorted.to_vec();
        for (j, &src) in self.input_index.iter().enumerate() {
            out[src] = sorted[j].clone();
        }
        out
    }

    /// Expected number of arrivals of each type over the horizon, rounded.
    pub fn expected_counts(&self) -> AcceptanceVector {
        let t = T::from_count(self.horizon);
        AcceptanceVector(
            self.arrival_probs
                .iter()
                .map(|&l| (l * t).round().to_usize().unwrap_or(0))
                .collect(),
        )
    }
}

/// Arrival types for periods `1..=T`, stored as zero-based sorted type indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalSequence {
    entries: Vec<usize>,
    k: usize,
}

impl ArrivalSequence {
    pub fn new(entries: Vec<usize>, k: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("arrival sequence must cover at least one period"));
        }
        if let Some(bad) = entries.iter().find(|&&j| j >= k) {
            return Err(invalid(format!("arrival type {bad} outside 0..{k}")));
        }
        Ok(Self { entries, k })
    }

    /// iid categorical draws over the instance's (sorted) types.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(instance: &Instance<T>, rng: &mut R) -> Self {
        Self::sample_len(instance, instance.horizon(), rng)
    }

    /// iid draws for `len` periods instead of the instance horizon.
    pub fn sample_len<T: Scalar, R: Rng + ?Sized>(instance: &Instance<T>, len: usize, rng: &mut R) -> Self {
        let weights: Vec<f64> = instance.arrival_probs().iter().map(|l| l.to_f64_lossy()).collect();
        let dist = WeightedIndex::new(&weights).expect("validated arrival probabilities");
        let entries = (0..len).map(|_| dist.sample(rng)).collect();
        Self { entries, k: instance.k() }
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }
    pub fn horizon(&self) -> usize {
        self.entries.len()
    }
    pub fn k(&self) -> usize {
        self.k
    }
    /// Arrival type of 1-based period `t`.
    pub fn at(&self, t: usize) -> usize {
        self.entries[t - 1]
    }

    /// Per-type arrival counts over the 1-based inclusive window `[t1, t2]`.
    pub fn count_window(&self, t1: usize, t2: usize) -> Result<Vec<usize>> {
        let horizon = self.horizon();
        if t1 < 1 || t1 > t2 || t2 > horizon {
            return Err(Error::WindowOutOfRange { t1, t2, horizon });
        }
        let mut counts = vec![0; self.k];
        for &j in &self.entries[t1 - 1..t2] {
            counts[j] += 1;
        }
        Ok(counts)
    }

    /// Counts over the whole horizon.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &j in &self.entries {
            counts[j] += 1;
        }
        counts
    }
}

/// Per-type accepted counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AcceptanceVector(pub Vec<usize>);

impl AcceptanceVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0; k])
    }
    pub fn unit(k: usize, j: usize) -> Self {
        let mut v = vec![0; k];
        v[j] = 1;
        Self(v)
    }
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
    pub fn plus(&self, other: &[usize]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }
    pub fn with(&self, j: usize, count: usize) -> Self {
        let mut v = self.0.clone();
        v[j] = count;
        Self(v)
    }
    /// True when every entry is at most the matching bound.
    pub fn within(&self, bound: &[usize]) -> bool {
        self.0.iter().zip(bound).all(|(a, b)| a <= b)
    }
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl Deref for AcceptanceVector {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl Index<usize> for AcceptanceVector {
    type Output = usize;
    fn index(&self, j: usize) -> &usize {
        &self.0[j]
    }
}

impl From<Vec<usize>> for AcceptanceVector {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(lambda: &[f64], v: &[f64], p: &[f64]) -> InstanceSpec<f64> {
        InstanceSpec::new(lambda.to_vec(), v.to_vec(), p.to_vec(), 5, 10)
    }

    #[test]
    fn sorts_by_critical_ratio() {
        let inst = spec(&[0.5, 0.5], &[0.1, 0.5], &[0.2, 0.5]).normalize().unwrap();
        assert_eq!(inst.input_index(), &[1, 0]);
        assert_eq!(inst.critical_ratios(), &[1.0, 0.5]);
        assert_eq!(inst.always_accept(), &[true, false]);
    }

    #[test]
    fn ratio_ties_break_on_value() {
        let inst = spec(&[0.3, 0.2, 0.5], &[0.044, 0.1, 0.06], &[0.2, 0.5, 0.3])
            .normalize()
            .unwrap();
        assert_eq!(inst.input_index(), &[0, 1, 2]);
        let q = inst.critical_ratios();
        assert!((q[0] - 0.22).abs() < 1e-12);
        assert!((q[1] - 0.2).abs() < 1e-12 && (q[2] - 0.2).abs() < 1e-12);

        // same pair presented in the wrong order is re-sorted
        let flipped = spec(&[0.5, 0.5], &[0.06, 0.1], &[0.3, 0.5]).normalize().unwrap();
        assert_eq!(flipped.input_index(), &[1, 0]);
    }

    #[test]
    fn refunds_lower_effective_value() {
        let inst = spec(&[1.0], &[0.3], &[0.5]).with_refunds(vec![0.1]).normalize().unwrap();
        assert!((inst.eff_values()[0] - 0.25).abs() < 1e-15);
        assert!((inst.critical_ratios()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_show_probability_is_always_accepted() {
        let inst = spec(&[0.8, 0.2], &[0.5, 0.1], &[1.0, 0.0]).normalize().unwrap();
        assert_eq!(inst.input_index(), &[1, 0]);
        assert!(inst.critical_ratios()[0].is_infinite());
        assert_eq!(inst.always_accept(), &[true, false]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(spec(&[0.5, 0.4], &[0.1, 0.1], &[0.5, 0.5]).normalize().is_err());
        assert!(spec(&[0.5, 0.5], &[0.1, 0.1], &[1.5, 0.5]).normalize().is_err());
        assert!(spec(&[0.5, 0.5], &[1.0, 0.1], &[0.5, 0.5]).normalize().is_err());
        assert!(spec(&[1.0, 0.0], &[0.1, 0.1], &[0.5, 0.5]).normalize().is_err());
        let mut s = spec(&[1.0], &[0.1], &[0.5]);
        s.horizon = 0;
        assert!(s.normalize().is_err());
        s.horizon = 3;
        s.capacity = -1;
        assert!(s.normalize().is_err());
        let r = spec(&[1.0], &[0.1], &[0.5]).with_refunds(vec![0.2]);
        assert!(r.normalize().is_err());
        let d = spec(&[1.0], &[0.1], &[0.5]).with_demands(vec![0]);
        assert!(d.normalize().is_err());
    }

    #[test]
    fn instance_file_layout() {
        let json = r#"{"lambda":[0.5,0.5],"v":[0.1,0.2],"p":[0.5,0.5],"d":[1,2],"B":3,"T":7}"#;
        let s: InstanceSpec<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(s.capacity, 3);
        assert_eq!(s.horizon, 7);
        assert_eq!(s.d, Some(vec![1, 2]));
        assert!(s.r.is_none());
        let back = serde_json::to_string(&s).unwrap();
        assert!(back.contains("\"B\":3") && back.contains("\"T\":7") && !back.contains("\"r\""));
    }

    #[test]
    fn count_windows() {
        let a = ArrivalSequence::new(vec![0, 1, 0], 2).unwrap();
        assert_eq!(a.count_window(1, 3).unwrap(), vec![2, 1]);
        assert_eq!(a.count_window(2, 2).unwrap(), vec![0, 1]);
        assert!(a.count_window(0, 2).is_err());
        assert!(a.count_window(3, 2).is_err());
        assert!(a.count_window(1, 4).is_err());
        assert!(ArrivalSequence::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn degenerate_arrival_distribution() {
        let inst = InstanceSpec::new(vec![1.0], vec![0.1], vec![0.5], 1, 50).normalize().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = ArrivalSequence::sample(&inst, &mut rng);
        assert!(a.entries().iter().all(|&j| j == 0));
        assert_eq!(a.horizon(), 50);
    }
}
