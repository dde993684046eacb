use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use overbook::offline::{self, GeneralSolver};
use overbook::sim::{self, ExperimentConfig};
use overbook::{AcceptanceVector, Instance, InstanceSpec, SolveContext};
use overbook_bench::emit::{self, Format, Manifest};
use overbook_bench::{
    coupling_study, parse_benchmark, parse_policy, preset, presets, run_preset, to_sorted_order, BenchError,
    PointReport, Result, RunOptions, StudyOutput,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "bench", version, about = "Overbooking experiments: solvers, policy simulation and experiment presets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the offline problem once for an instance file.
    Solve(SolveArgs),
    /// Simulate policies on an instance file.
    Simulate(SimulateArgs),
    /// Run a preset experiment.
    Run(PresetArgs),
    /// Hybrid-clairvoyant loss diagnostic of the online index policy on a preset.
    Coupling(PresetArgs),
    /// List preset names.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Index,
    ExhaustiveIndex,
    Brute,
    Ascent,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Base random seed (defaults to the preset's seed, or 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation budget for exhaustive solvers.
    #[arg(long, default_value_t = offline::DEFAULT_BUDGET)]
    budget: u128,
    /// Coordinate-ascent restarts.
    #[arg(long, default_value_t = offline::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Index)]
    mode: Mode,
    /// Future arrival counts per type in input order, comma separated
    /// (default: rounded expected counts).
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    /// Already accepted customers per type in input order.
    #[arg(long, value_delimiter = ',')]
    past: Option<Vec<usize>>,
    /// Also write solve.csv or solve.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Policy to simulate; repeat for several.
    #[arg(long = "policy", default_value = "online_index")]
    policies: Vec<String>,
    /// index or general.
    #[arg(long, default_value = "index")]
    benchmark: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Sample paths used to estimate DPD acceptance fractions.
    #[arg(long, default_value_t = overbook::policies::DEFAULT_ALPHA_SAMPLES)]
    alpha_samples: usize,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name (see `bench list`).
    preset: String,
    /// Replications per grid point (defaults to the preset's).
    #[arg(long)]
    reps: Option<usize>,
    /// Replace the preset's grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = overbook::policies::DEFAULT_ALPHA_SAMPLES)]
    alpha_samples: usize,
    /// Output directory (default: bench-out/<preset>).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Simulate(args) => simulate(args, command_line),
        Command::Run(args) => run(args, command_line),
        Command::Coupling(args) => coupling(args, command_line),
        Command::List => {
            for name in presets::NAMES {
                if let Ok(p) = preset(name) {
                    println!("{name:22} {}", p.description);
                }
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let spec: InstanceSpec = serde_json::from_str(&text)
        .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    Ok(spec.normalize()?)
}

#[derive(Serialize)]
struct SolveRow {
    mode: &'static str,
    #[serde(rename = "type")]
    type_id: usize,
    available: usize,
    past: usize,
    accepted: usize,
    objective: f64,
    /// 1-based input type at the index threshold.
    threshold_type: Option<usize>,
}

#[derive(Serialize)]
struct SolveOutput {
    mode: &'static str,
    objective: f64,
    threshold_type: Option<usize>,
    solver: Option<GeneralSolver>,
    available: Vec<usize>,
    past: Vec<usize>,
    accepted: Vec<usize>,
}

fn solve(args: SolveArgs) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let nf = match &args.counts {
        Some(c) => to_sorted_order(&inst, c)?,
        None => inst.expected_counts().0,
    };
    let past = match &args.past {
        Some(c) => to_sorted_order(&inst, c)?,
        None => vec![0; inst.k()],
    };
    let ctx = SolveContext::new(&inst, AcceptanceVector(past.clone()), nf.clone())?;
    let seed = args.common.seed.unwrap_or(0);
    let (mode, x, threshold, solver) = match args.mode {
        Mode::Index => {
            let s = offline::solve_index(&ctx);
            ("index", s.x, Some(s.threshold), None)
        }
        Mode::ExhaustiveIndex => {
            let s = offline::solve_index_exhaustive(&ctx, args.common.budget)?;
            ("exhaustive-index", s.x, Some(s.threshold), None)
        }
        Mode::Brute => ("brute", offline::solve_global_bruteforce(&ctx, args.common.budget)?, None, Some(GeneralSolver::Exact)),
        Mode::Ascent => (
            "ascent",
            offline::solve_global_ascent(&ctx, args.common.restarts, seed),
            None,
            Some(GeneralSolver::Ascent),
        ),
    };
    let objective = offline::objective(&ctx, &x)?;
    let threshold_type = threshold.map(|t| inst.input_index()[t] + 1);
    let out = SolveOutput {
        mode,
        objective,
        threshold_type,
        solver,
        available: inst.to_input_order(&nf),
        past: inst.to_input_order(&past),
        accepted: inst.to_input_order(&x),
    };
    let format = Format::from(args.common.format);
    let rows: Vec<SolveRow> = (0..inst.k())
        .map(|j| SolveRow {
            mode,
            type_id: j + 1,
            available: out.available[j],
            past: out.past[j],
            accepted: out.accepted[j],
            objective,
            threshold_type,
        })
        .collect();
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&out).map_err(|e| BenchError::Config(e.to_string()))?;
            println!("{text}");
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &rows {
                w.serialize(r).map_err(|e| BenchError::io("<stdout>", std::io::Error::other(e)))?;
            }
            w.flush().map_err(|e| BenchError::io("<stdout>", e))?;
        }
    }
    if let Some(dir) = &args.out_dir {
        emit::ensure_dir(dir)?;
        match format {
            Format::Json => emit::write_json(&dir.join("solve.json"), &out)?,
            Format::Csv => emit::write_csv(
                &dir.join("solve.csv"),
                &["mode", "type", "available", "past", "accepted", "objective", "threshold_type"],
                &rows,
            )?,
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs, command_line: String) -> Result<()> {
    let inst = load_instance(&args.instance)?;
    let policies = args.policies.iter().map(|p| parse_policy(p)).collect::<Result<Vec<_>>>()?;
    let benchmark = parse_benchmark(&args.benchmark)?;
    let seed = args.common.seed.unwrap_or(0);
    let mut config = ExperimentConfig::new(inst.clone(), policies, benchmark, args.reps, seed);
    config.budget = args.common.budget;
    config.restarts = args.common.restarts;
    config.alpha_samples = args.alpha_samples;
    let report = sim::run_replications(&config)?;
    let format = Format::from(args.common.format);
    let points = vec![PointReport { param: inst.horizon() as f64, report }];
    let files = emit::emit_study(&args.out_dir, "simulate", &StudyOutput::Replications(points.clone()), format)?;

    let options = RunOptions {
        reps: Some(args.reps),
        seed: Some(seed),
        budget: args.common.budget,
        restarts: args.common.restarts,
        alpha_samples: args.alpha_samples,
    };
    let mut manifest = Manifest::new(command_line, seed, args.reps, options, format);
    manifest.instance = Some(inst.to_spec());
    manifest.record_reports(&points);
    manifest.record_files(&args.out_dir, &files);
    manifest.write(&args.out_dir)?;
    report_summary(&points);
    Ok(())
}

fn preset_setup(args: &PresetArgs) -> Result<(overbook_bench::Preset, RunOptions, PathBuf)> {
    let mut p = preset(&args.preset)?;
    if let Some(grid) = &args.grid {
        p = p.with_grid(grid.clone())?;
    }
    if args.reps == Some(0) {
        return Err(BenchError::Config("--reps must be positive".into()));
    }
    let opts = RunOptions {
        reps: args.reps,
        seed: args.common.seed,
        budget: args.common.budget,
        restarts: args.common.restarts,
        alpha_samples: args.alpha_samples,
    };
    let dir = args.out_dir.clone().unwrap_or_else(|| Path::new("bench-out").join(p.name));
    Ok((p, opts, dir))
}

fn run(args: PresetArgs, command_line: String) -> Result<()> {
    let (p, opts, dir) = preset_setup(&args)?;
    let format = Format::from(args.common.format);
    let output = run_preset(&p, &opts)?;
    let files = emit::emit_study(&dir, p.name, &output, format)?;

    let seed = opts.seed.unwrap_or(p.seed);
    let mut manifest = Manifest::new(command_line, seed, opts.reps.unwrap_or(p.reps), opts, format);
    if let Some(note) = p.note {
        manifest.notes.push(note.to_string());
    }
    if let StudyOutput::Replications(points) = &output {
        manifest.record_reports(points);
        report_summary(points);
    }
    manifest.preset = Some(p);
    manifest.record_files(&dir, &files);
    manifest.write(&dir)?;
    eprintln!("wrote {} files to {}", files.len() + 1, dir.display());
    Ok(())
}

fn coupling(args: PresetArgs, command_line: String) -> Result<()> {
    let (p, opts, dir) = preset_setup(&args)?;
    if p.study != overbook_bench::Study::Replications {
        return Err(BenchError::Config(format!("preset {} has no sampled paths to couple", p.name)));
    }
    let format = Format::from(args.common.format);
    let points = coupling_study(&p, &opts)?;
    let files = emit::emit_coupling(&dir, p.name, &points, format)?;
    for c in &points {
        eprintln!(
            "T={:<6} B={:<5} loss events {:.3} ± {:.3}  total loss {:.4}",
            c.horizon, c.capacity, c.mean_loss_events, c.loss_events_stderr, c.mean_total_loss
        );
    }
    let seed = opts.seed.unwrap_or(p.seed);
    let mut manifest = Manifest::new(command_line, seed, opts.reps.unwrap_or(p.reps), opts, format);
    manifest.preset = Some(p);
    manifest.record_files(&dir, &files);
    manifest.write(&dir)?;
    Ok(())
}

fn report_summary(points: &[PointReport]) {
    for pt in points {
        for s in &pt.report.stats {
            eprintln!(
                "x={:<8} T={:<6} B={:<5} {:<22} obj {:.4}  loss {:.4} ± {:.4}",
                pt.param, pt.report.horizon, pt.report.capacity, s.name, s.mean_obj, s.abs_loss, s.abs_loss_stderr
            );
        }
    }
}
