use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wzmap::config::PipelineConfig;
use wzmap::pipeline;
use wzmap::Error;

#[derive(Parser)]
#[command(name = "wzmap", version, about = "Work-zone map inference from crowdsourced trajectories")]
struct Cli {
    /// TOML config file, or `default` for the built-in configuration.
    #[arg(long, global = true, default_value = "default")]
    config: PathBuf,
    /// Artifact directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the per-stage summary lines.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Build the work-zone layout.
    GenWorkzone,
    /// Synthesize crowd trajectories through the layout.
    SynthTraj,
    /// Fit the Gaussian mixture and select K.
    FitGmm,
    /// Draw gated samples from the mixture.
    Sample,
    /// Rasterize the samples into the inverse occupancy grid.
    BuildMap,
    /// Rasterize cones and road edges into the benchmark grid.
    BuildBenchmarkMap,
    /// Plan paths over both inflated grids.
    Plan,
    /// Track the crowd-map path with the vehicle model.
    Simulate,
    /// Score precision, clearance and rule violations.
    Evaluate,
    /// Run every stage in order.
    RunAll,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

const STAGES: [Command; 9] = [
    Command::GenWorkzone,
    Command::SynthTraj,
    Command::FitGmm,
    Command::Sample,
    Command::BuildMap,
    Command::BuildBenchmarkMap,
    Command::Plan,
    Command::Simulate,
    Command::Evaluate,
];

fn stage_name(c: Command) -> &'static str {
    match c {
        Command::GenWorkzone => "gen-workzone",
        Command::SynthTraj => "synth-traj",
        Command::FitGmm => "fit-gmm",
        Command::Sample => "sample",
        Command::BuildMap => "build-map",
        Command::BuildBenchmarkMap => "build-benchmark-map",
        Command::Plan => "plan",
        Command::Simulate => "simulate",
        Command::Evaluate => "evaluate",
        Command::RunAll => "run-all",
        Command::ShowConfig => "show-config",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |d| format!("{d:.3} m"))
}

fn run_stage(c: Command, cfg: &PipelineConfig, dir: &Path) -> Result<String, Error> {
    Ok(match c {
        Command::GenWorkzone => {
            let l = pipeline::gen_workzone(cfg, dir)?;
            format!(
                "layout: merging {:.3} m, shifting {:.3} m, shoulder {:.3} m, {} cones",
                l.merging_taper,
                l.shifting_taper,
                l.shoulder_taper,
                l.cones.len()
            )
        }
        Command::SynthTraj => {
            let t = pipeline::synth_traj(cfg, dir)?;
            let n: usize = t.iter().map(|t| t.len()).sum();
            format!("{} trajectories, {n} points", t.len())
        }
        Command::FitGmm => {
            let s = pipeline::fit_gmm(cfg, dir)?;
            format!(
                "K = {} from {} trajectories ({} points), BIC {:.1}, {} iterations",
                s.k_best, s.n_trajectories, s.fit.n_points, s.fit.bic, s.fit.iterations
            )
        }
        Command::Sample => {
            let (p, stats) = pipeline::sample(cfg, dir)?;
            format!("{} samples, acceptance {:.3}", p.len(), stats.acceptance_rate())
        }
        Command::BuildMap => {
            let g = pipeline::build_map(cfg, dir)?;
            format!("crowd map {}x{}, {} free cells", g.width, g.height, g.free_count())
        }
        Command::BuildBenchmarkMap => {
            let g = pipeline::build_benchmark_map(cfg, dir)?;
            format!("benchmark map {}x{}, {} occupied cells", g.width, g.height, g.occupied_count())
        }
        Command::Plan => {
            let p = pipeline::plan(cfg, dir)?;
            format!(
                "crowd path {:.1} m ({} poses), benchmark path {:.1} m ({} poses)",
                p.crowd.length(),
                p.crowd.len(),
                p.benchmark.length(),
                p.benchmark.len()
            )
        }
        Command::Simulate => {
            let t = pipeline::simulate(cfg, dir)?;
            let end = t.entries.last().map_or(0.0, |e| e.t);
            format!("{} steps, {:.2} s, completed: {}", t.entries.len(), end, t.completed)
        }
        Command::Evaluate => {
            let r = pipeline::evaluate(cfg, dir)?;
            format!(
                "precision {:.4}, min cone {}, min boundary {}, benchmark violates: {}, crowd violates: {}",
                r.precision,
                fmt_opt(r.clearance.min_cone_distance),
                fmt_opt(r.clearance.min_boundary_distance),
                r.benchmark_violates,
                r.crowdsourced_violates
            )
        }
        Command::RunAll | Command::ShowConfig => unreachable!("not a single stage"),
    })
}

fn category(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config(_) | Error::InvalidSpec(_) | Error::InvalidParam(_) => ("config", 2),
        Error::MissingArtifact(_) => ("missing-artifact", 3),
        _ => ("stage-failure", 1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match PipelineConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error [config]: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if cli.command == Command::ShowConfig {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = pipeline::ensure_dir(&dir) {
        eprintln!("error [io]: {e}");
        return ExitCode::from(1);
    }
    let stages: Vec<Command> = if cli.command == Command::RunAll {
        STAGES.to_vec()
    } else {
        vec![cli.command]
    };
    for stage in stages {
        match run_stage(stage, &cfg, &dir) {
            Ok(summary) => {
                if !cli.quiet {
                    println!("{}: {summary}", stage_name(stage));
                }
            }
            Err(e) => {
                let (cat, code) = category(&e);
                eprintln!("error [{cat}] in stage {}: {e}", stage_name(stage));
                return ExitCode::from(code);
            }
        }
    }
    ExitCode::SUCCESS
}
