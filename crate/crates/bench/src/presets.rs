//! Experiment catalogue.
//!
//! Every preset is a family of instances indexed by one grid parameter
//! (the horizon for scaling studies, the capacity for switching studies,
//! a value or show probability for sweeps) plus the study to run on it.

use overbook::policies::PolicyKind;
use overbook::sim::Benchmark;
use overbook::{Instance, InstanceSpec};
use serde::Serialize;

use crate::BenchError;

/// Horizon used when demand should never bind.
pub const UNCONSTRAINED_HORIZON: usize = 400;

/// Low-value type's value in the DPD counterexample.
pub const DPD_COUNTER_EPS: f64 = 0.1;

/// What a preset measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Policies against a clairvoyant benchmark over sampled paths.
    Replications,
    /// Clairvoyant general and index acceptances on one fixed path.
    Switching,
    /// Expected objective gap between a fixed alternative and the index
    /// solution on the expected arrival counts.
    IndexGap,
}

/// How the instance depends on the grid parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Parameter is `T`, `B = T/5`.
    ExpA,
    /// Parameter is `B`, `T` fixed and large.
    ExpAUnconstrained,
    /// Parameter is `B`, `T = 5B`.
    ExpAConstrained,
    /// Parameter is `T`, `B = T/3`.
    ExpB,
    /// Parameter is the common show probability.
    SweepP,
    /// Parameter is the common value.
    SweepV,
    LbGeneral,
    LbIndex,
    DpdCounter { eps: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub family: Family,
    /// Name of the grid parameter, used as the x column in plot data.
    pub param: &'static str,
    pub grid: Vec<f64>,
    pub study: Study,
    pub policies: Vec<PolicyKind>,
    pub benchmark: Benchmark,
    pub reps: usize,
    pub seed: u64,
    /// Qualitative outcome expected from this family.
    pub expected: &'static str,
    /// Free-form remark copied into the run manifest.
    pub note: Option<&'static str>,
}

pub const NAMES: [&str; 11] = [
    "exp_a",
    "exp_a_index",
    "exp_a_unconstrained",
    "exp_a_constrained",
    "exp_b",
    "exp_b_index",
    "sweep_p",
    "sweep_v",
    "lb_general",
    "lb_index",
    "dpd_counter",
];

fn steps(start: usize, end: usize, step: usize) -> Vec<f64> {
    (start..=end).step_by(step).map(|v| v as f64).collect()
}

fn tenths(lo: usize, hi: usize) -> Vec<f64> {
    (lo..=hi).map(|i| i as f64 / 10.0).collect()
}

pub fn preset(name: &str) -> Result<Preset, BenchError> {
    let online = vec![PolicyKind::OnlineIndex];
    let p = match name {
        "exp_a" => Preset {
            name: "exp_a",
            description: "three types with switching; relative loss against the clairvoyant general policy",
            family: Family::ExpA,
            param: "T",
            grid: steps(25, 250, 25),
            study: Study::Replications,
            policies: online,
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 100,
            seed: 0xA001,
            expected: "uniform loss: relative loss decays like 1/T",
            note: None,
        },
        "exp_a_index" => Preset {
            name: "exp_a_index",
            description: "online index policy against the clairvoyant index benchmark up to T = 750",
            family: Family::ExpA,
            param: "T",
            grid: steps(50, 750, 50),
            study: Study::Replications,
            policies: online,
            benchmark: Benchmark::ClairvoyantIndex,
            reps: 300,
            seed: 0xA002,
            expected: "absolute loss bounded in T",
            note: None,
        },
        "exp_a_unconstrained" => Preset {
            name: "exp_a_unconstrained",
            description: "clairvoyant acceptances per type on one long path, B = 1..15",
            family: Family::ExpAUnconstrained,
            param: "B",
            grid: steps(1, 15, 1),
            study: Study::Switching,
            policies: vec![],
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 1,
            seed: 0xA003,
            expected: "general policy switches from type 2 to type 1 as B grows; index policy takes type 1 only",
            note: None,
        },
        "exp_a_constrained" => Preset {
            name: "exp_a_constrained",
            description: "clairvoyant acceptances per type on prefixes of one path, T = 5B",
            family: Family::ExpAConstrained,
            param: "B",
            grid: steps(1, 15, 1),
            study: Study::Switching,
            policies: vec![],
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 1,
            seed: 0xA004,
            expected: "switching under binding demand",
            note: None,
        },
        "exp_b" => Preset {
            name: "exp_b",
            description: "three types without switching; relative loss against the clairvoyant general policy",
            family: Family::ExpB,
            param: "T",
            grid: steps(15, 150, 15),
            study: Study::Replications,
            policies: online,
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 100,
            seed: 0xB001,
            expected: "clairvoyant index loss is zero; online loss uniform",
            note: Some("horizon grid printed as {15,10,15,...,150}; read as {15,30,...,150}"),
        },
        "exp_b_index" => Preset {
            name: "exp_b_index",
            description: "online index policy against the clairvoyant index benchmark up to T = 900",
            family: Family::ExpB,
            param: "T",
            grid: steps(60, 900, 60),
            study: Study::Replications,
            policies: online,
            benchmark: Benchmark::ClairvoyantIndex,
            reps: 300,
            seed: 0xB002,
            expected: "absolute loss bounded in T",
            note: None,
        },
        "sweep_p" => Preset {
            name: "sweep_p",
            description: "show probability sweep with v_j = p - 0.1 j, B = 10, T = 20",
            family: Family::SweepP,
            param: "p",
            grid: tenths(4, 9),
            study: Study::Replications,
            policies: PolicyKind::ONLINE.to_vec(),
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 200,
            seed: 0xC001,
            expected: "online index close to the clairvoyant general policy across p",
            note: None,
        },
        "sweep_v" => Preset {
            name: "sweep_v",
            description: "value sweep with p_j = v + 0.1 j, B = 10, T = 20",
            family: Family::SweepV,
            param: "v",
            grid: tenths(1, 6),
            study: Study::Replications,
            policies: PolicyKind::ONLINE.to_vec(),
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 200,
            seed: 0xC002,
            expected: "online index close to the clairvoyant general policy across v",
            note: None,
        },
        "lb_general" => Preset {
            name: "lb_general",
            description: "vanishing show probability instance, B = floor(T/6), perfect-square T",
            family: Family::LbGeneral,
            param: "T",
            grid: vec![400.0, 900.0, 1600.0, 2500.0, 3600.0],
            study: Study::Replications,
            policies: online,
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 200,
            seed: 0xD001,
            expected: "online loss grows like sqrt(T)",
            note: Some("benchmark falls back to coordinate ascent beyond the brute-force budget"),
        },
        "lb_index" => Preset {
            name: "lb_index",
            description: "critical ratios 1/T apart, B = T/6; index solution vs accepting T/6 certain shows",
            family: Family::LbIndex,
            param: "T",
            grid: vec![600.0, 1200.0, 2400.0, 4800.0],
            study: Study::IndexGap,
            policies: vec![],
            benchmark: Benchmark::ClairvoyantIndex,
            reps: 1,
            seed: 0xD002,
            expected: "clairvoyant index gap grows like sqrt(T)",
            note: Some("gap evaluated on the expected arrival counts"),
        },
        "dpd_counter" => Preset {
            name: "dpd_counter",
            description: "certain-show and no-show types, B = T/2; DPD state aggregation fails",
            family: Family::DpdCounter { eps: DPD_COUNTER_EPS },
            param: "T",
            grid: vec![200.0, 400.0, 800.0, 1600.0],
            study: Study::Replications,
            policies: vec![PolicyKind::Dpd, PolicyKind::OnlineIndex],
            benchmark: Benchmark::ClairvoyantGeneral,
            reps: 200,
            seed: 0xD003,
            expected: "DPD loss linear in T; online index loss bounded",
            note: None,
        },
        other => return Err(BenchError::Config(format!("unknown preset {other:?}"))),
    };
    Ok(p)
}

impl Family {
    /// Raw instance (input order) at grid value `x`.
    pub fn spec(&self, x: f64) -> Result<InstanceSpec, BenchError> {
        let count = |what: &str| -> Result<i64, BenchError> {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as i64)
            } else {
                Err(BenchError::Config(format!("{what} must be a positive integer, got {x}")))
            }
        };
        let divisible = |t: i64, by: i64| -> Result<i64, BenchError> {
            if t % by == 0 {
                Ok(t / by)
            } else {
                Err(BenchError::Config(format!("T = {t} must be a multiple of {by}")))
            }
        };
        let spec = match *self {
            Family::ExpA => {
                let t = count("T")?;
                exp_a(divisible(t, 5)?, t)
            }
            Family::ExpAUnconstrained => exp_a(count("B")?, UNCONSTRAINED_HORIZON as i64),
            Family::ExpAConstrained => {
                let b = count("B")?;
                exp_a(b, 5 * b)
            }
            Family::ExpB => {
                let t = count("T")?;
                InstanceSpec::new(vec![0.2, 0.3, 0.5], vec![0.6, 0.4, 0.3], vec![0.8; 3], divisible(t, 3)?, t)
            }
            Family::SweepP => {
                if !(0.3..=1.0).contains(&x) {
                    return Err(BenchError::Config(format!("sweep_p needs p in [0.3, 1], got {x}")));
                }
                InstanceSpec::new(vec![0.2, 0.3, 0.5], vec![x - 0.1, x - 0.2, x - 0.3], vec![x; 3], 10, 20)
            }
            Family::SweepV => {
                if !(0.0..=0.7).contains(&x) || x <= 0.0 {
                    return Err(BenchError::Config(format!("sweep_v needs v in (0, 0.7], got {x}")));
                }
                InstanceSpec::new(vec![0.2, 0.3, 0.5], vec![x; 3], vec![x + 0.1, x + 0.2, x + 0.3], 10, 20)
            }
            Family::LbGeneral => {
                let t = count("T")?;
                let root = (t as f64).sqrt().round() as i64;
                if root * root != t || t < 16 {
                    return Err(BenchError::Config(format!("lb_general needs a perfect square T >= 16, got {t}")));
                }
                let r = root as f64;
                InstanceSpec::new(
                    vec![1.0 / 6.0, 1.0 / 3.0, 0.5],
                    vec![0.5, 1.0 / r, 0.0],
                    vec![1.0, 3.0 / r, 1.0],
                    t / 6,
                    t,
                )
            }
            Family::LbIndex => {
                let t = count("T")?;
                InstanceSpec::new(vec![0.5, 0.5], vec![0.25, 0.5 - 1.0 / t as f64], vec![0.5, 1.0], divisible(t, 6)?, t)
            }
            Family::DpdCounter { eps } => {
                if !(eps > 0.0 && eps < 0.5) {
                    return Err(BenchError::Config(format!("dpd_counter needs eps in (0, 1/2), got {eps}")));
                }
                let t = count("T")?;
                InstanceSpec::new(vec![0.8, 0.2], vec![0.5, eps], vec![1.0, 0.0], divisible(t, 2)?, t)
            }
        };
        Ok(spec)
    }

    pub fn instance(&self, x: f64) -> Result<Instance, BenchError> {
        Ok(self.spec(x)?.normalize()?)
    }
}

fn exp_a(capacity: i64, horizon: i64) -> InstanceSpec {
    InstanceSpec::new(vec![0.3, 0.2, 0.5], vec![0.044, 0.1, 0.06], vec![0.2, 0.5, 0.3], capacity, horizon)
}

impl Preset {
    pub fn instance(&self, x: f64) -> Result<Instance, BenchError> {
        self.family.instance(x)
    }

    /// Replaces the grid, e.g. from `--grid` on the command line.
    pub fn with_grid(mut self, grid: Vec<f64>) -> Result<Self, BenchError> {
        if grid.is_empty() {
            return Err(BenchError::Config("empty grid".into()));
        }
        for &x in &grid {
            self.family.spec(x)?;
        }
        self.grid = grid;
        Ok(self)
    }
}
