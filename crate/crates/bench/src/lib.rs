//! Experiment presets, study runners and file emission for the `bench` CLI.

use std::path::PathBuf;

use overbook::offline::{self, GeneralSolver};
use overbook::policies::{self, PolicyKind};
use overbook::sim::{self, Benchmark, ExperimentConfig, LossReport};
use overbook::{ArrivalSequence, Instance, SolveContext};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub mod emit;
pub mod presets;

pub use presets::{preset, Family, Preset, Study};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] overbook::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Io { .. } => 1,
            BenchError::Config(_) => 2,
            BenchError::Core(e) => match e {
                overbook::Error::BudgetExceeded { .. } => 3,
                overbook::Error::DegeneratePolicy(_) => 4,
                overbook::Error::InvalidInstance(_)
                | overbook::Error::Infeasible(_)
                | overbook::Error::WindowOutOfRange { .. }
                | overbook::Error::CountUnderflow(_) => 2,
                _ => 5,
            },
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

/// Overrides applied on top of a preset's defaults.
#[derive(Debug, Clone, Serialize)]
pub struct RunOptions {
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub budget: u128,
    pub restarts: usize,
    pub alpha_samples: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            reps: None,
            seed: None,
            budget: offline::DEFAULT_BUDGET,
            restarts: offline::DEFAULT_RESTARTS,
            alpha_samples: policies::DEFAULT_ALPHA_SAMPLES,
        }
    }
}

/// Seed of the `i`-th grid point of a run seeded with `base`.
pub fn point_seed(base: u64, i: usize) -> u64 {
    sim::stream_seed(base, i as u64, 7)
}

#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub param: f64,
    pub report: LossReport,
}

/// Clairvoyant acceptances on one path at one grid point, in input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchingPoint {
    pub param: f64,
    pub horizon: usize,
    pub capacity: usize,
    pub general: Vec<usize>,
    pub general_solver: GeneralSolver,
    pub general_objective: f64,
    pub index: Vec<usize>,
    pub index_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexGapPoint {
    pub param: f64,
    pub horizon: usize,
    pub capacity: usize,
    /// Index solution on the expected counts, input order.
    pub index: Vec<usize>,
    pub index_objective: f64,
    pub alternative: Vec<usize>,
    pub alternative_objective: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingPoint {
    pub param: f64,
    pub horizon: usize,
    pub capacity: usize,
    pub paths: usize,
    pub mean_loss_events: f64,
    pub loss_events_stderr: f64,
    pub mean_total_loss: f64,
    pub total_loss_stderr: f64,
    pub mean_terminal_gap: f64,
    pub max_step: f64,
    /// Every path's loss is within one step per loss event.
    pub within_bound: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "study", content = "points", rename_all = "snake_case")]
pub enum StudyOutput {
    Replications(Vec<PointReport>),
    Switching(Vec<SwitchingPoint>),
    IndexGap(Vec<IndexGapPoint>),
}

pub fn run_preset(preset: &Preset, opts: &RunOptions) -> Result<StudyOutput> {
    let seed = opts.seed.unwrap_or(preset.seed);
    match preset.study {
        Study::Replications => {
            let reps = opts.reps.unwrap_or(preset.reps);
            let mut points = Vec::with_capacity(preset.grid.len());
            for (i, &x) in preset.grid.iter().enumerate() {
                let mut config = ExperimentConfig::new(
                    preset.instance(x)?,
                    preset.policies.clone(),
                    preset.benchmark,
                    reps,
                    point_seed(seed, i),
                );
                config.budget = opts.budget;
                config.restarts = opts.restarts;
                config.alpha_samples = opts.alpha_samples;
                points.push(PointReport { param: x, report: sim::run_replications(&config)? });
            }
            Ok(StudyOutput::Replications(points))
        }
        Study::Switching => Ok(StudyOutput::Switching(switching_study(preset, seed, opts)?)),
        Study::IndexGap => Ok(StudyOutput::IndexGap(
            preset.grid.iter().map(|&x| index_gap(&preset.instance(x)?, x)).collect::<Result<_>>()?,
        )),
    }
}

/// Solves every grid point on one path. The path is sampled once at the
/// longest horizon in the grid; shorter horizons use its prefix.
pub fn switching_study(preset: &Preset, seed: u64, opts: &RunOptions) -> Result<Vec<SwitchingPoint>> {
    let instances = preset.grid.iter().map(|&x| preset.instance(x)).collect::<Result<Vec<_>>>()?;
    let longest = instances
        .iter()
        .max_by_key(|i| i.horizon())
        .ok_or_else(|| BenchError::Config("empty grid".into()))?;
    let path = sim::sample_arrivals(longest, seed);
    preset
        .grid
        .iter()
        .zip(&instances)
        .map(|(&x, inst)| {
            let arrivals = ArrivalSequence::new(path.entries()[..inst.horizon()].to_vec(), inst.k())?;
            let ctx = SolveContext::fresh(inst, arrivals.counts())?;
            let (general, solver) = offline::solve_clairvoyant_general(&ctx, opts.budget, opts.restarts, seed);
            let index = offline::solve_index(&ctx).x;
            Ok(SwitchingPoint {
                param: x,
                horizon: inst.horizon(),
                capacity: inst.capacity(),
                general_objective: sim::eval_expected(inst, &general),
                general: inst.to_input_order(&general),
                general_solver: solver,
                index_objective: sim::eval_expected(inst, &index),
                index: inst.to_input_order(&index),
            })
        })
        .collect()
}

/// Gap between accepting `B` customers of the last input type and the
/// index solution, both on the expected arrival counts.
pub fn index_gap(inst: &Instance, param: f64) -> Result<IndexGapPoint> {
    let counts = inst.expected_counts();
    let ctx = SolveContext::fresh(inst, counts.0.clone())?;
    let index = offline::solve_index(&ctx).x;
    let last = inst.input_index().iter().position(|&src| src == inst.k() - 1).unwrap_or(0);
    let mut alt = vec![0; inst.k()];
    alt[last] = inst.capacity().min(counts[last]);
    let index_objective = sim::eval_expected(inst, &index);
    let alternative_objective = sim::eval_expected(inst, &alt);
    Ok(IndexGapPoint {
        param,
        horizon: inst.horizon(),
        capacity: inst.capacity(),
        index: inst.to_input_order(&index),
        index_objective,
        alternative: inst.to_input_order(&alt),
        alternative_objective,
        gap: alternative_objective - index_objective,
    })
}

/// Hybrid-clairvoyant diagnostic for `policy` over `paths` sampled paths.
pub fn coupling_point(inst: &Instance, policy: PolicyKind, paths: usize, seed: u64, param: f64) -> Result<CouplingPoint> {
    if paths == 0 {
        return Err(BenchError::Config("coupling needs at least one path".into()));
    }
    let step = sim::max_step(inst);
    let traces = (0..paths)
        .into_par_iter()
        .map(|rep| {
            let arrivals = sim::sample_arrivals(inst, sim::stream_seed(seed, rep as u64, 0));
            let trace = sim::run_policy(policy, inst, &arrivals, sim::stream_seed(seed, rep as u64, 1), None)?;
            Ok(sim::coupling_trace(inst, &arrivals, &trace)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let events: Vec<f64> = traces.iter().map(|c| c.loss_event_count as f64).collect();
    let losses: Vec<f64> = traces.iter().map(|c| c.total_loss()).collect();
    let (mean_loss_events, loss_events_stderr) = sim::mean_stderr(&events);
    let (mean_total_loss, total_loss_stderr) = sim::mean_stderr(&losses);
    Ok(CouplingPoint {
        param,
        horizon: inst.horizon(),
        capacity: inst.capacity(),
        paths,
        mean_loss_events,
        loss_events_stderr,
        mean_total_loss,
        total_loss_stderr,
        mean_terminal_gap: traces.iter().map(|c| c.terminal_gap()).sum::<f64>() / paths as f64,
        max_step: step,
        within_bound: traces.iter().all(|c| c.within_step_bound(step)),
    })
}

/// Coupling diagnostic of the online index policy over a preset's grid.
pub fn coupling_study(preset: &Preset, opts: &RunOptions) -> Result<Vec<CouplingPoint>> {
    let seed = opts.seed.unwrap_or(preset.seed);
    let paths = opts.reps.unwrap_or(preset.reps);
    preset
        .grid
        .iter()
        .enumerate()
        .map(|(i, &x)| coupling_point(&preset.instance(x)?, PolicyKind::OnlineIndex, paths, point_seed(seed, i), x))
        .collect()
}

/// Converts per-type counts given in input order to sorted order.
pub fn to_sorted_order(inst: &Instance, input: &[usize]) -> Result<Vec<usize>> {
    if input.len() != inst.k() {
        return Err(BenchError::Config(format!("expected {} counts, got {}", inst.k(), input.len())));
    }
    Ok(inst.input_index().iter().map(|&src| input[src]).collect())
}

/// Benchmark from its command-line spelling.
pub fn parse_benchmark(name: &str) -> Result<Benchmark> {
    match name {
        "index" | "clairvoyant_index" => Ok(Benchmark::ClairvoyantIndex),
        "general" | "clairvoyant_general" => Ok(Benchmark::ClairvoyantGeneral),
        other => Err(BenchError::Config(format!("unknown benchmark {other:?}"))),
    }
}

pub fn parse_policy(name: &str) -> Result<PolicyKind> {
    PolicyKind::parse(name).ok_or_else(|| BenchError::Config(format!("unknown policy {name:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let io = BenchError::io("x", std::io::Error::other("boom"));
        let cfg = BenchError::Config("bad".into());
        let budget = BenchError::from(overbook::Error::BudgetExceeded { needed: 10, budget: 1 });
        let degen = BenchError::from(overbook::Error::DegeneratePolicy("no samples".into()));
        let codes = [io.exit_code(), cfg.exit_code(), budget.exit_code(), degen.exit_code()];
        assert_eq!(codes, [1, 2, 3, 4]);
    }

    #[test]
    fn sorted_order_round_trip() {
        let inst = preset("dpd_counter").unwrap().instance(100.0).unwrap();
        let input = vec![7, 3];
        let sorted = to_sorted_order(&inst, &input).unwrap();
        assert_eq!(inst.to_input_order(&sorted), input);
        assert!(to_sorted_order(&inst, &[1]).is_err());
    }

    #[test]
    fn lb_index_gap_is_positive() {
        let inst = preset("lb_index").unwrap().instance(600.0).unwrap();
        let g = index_gap(&inst, 600.0).unwrap();
        assert_eq!(g.index, vec![200, 0]);
        assert_eq!(g.alternative, vec![0, 100]);
        assert!(g.gap > 0.0);
    }
}
