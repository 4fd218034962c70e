//! Scenario-driven front end: parses a TOML scenario, runs the task, writes
//! CSV tables and SVG figures.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifacts;
pub mod scenario;
pub mod svg;
pub mod tasks;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::artifacts::{write_atomic, Artifacts};
use crate::scenario::{load_scenario, Prepared, TaskKind};

#[derive(Debug, Parser)]
#[command(name = "cgrasp", version, about = "Continuum arm grasp optimization, quality maps and feedback runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (TOML, spec_version = 1).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the scenario's `output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for quality-map cells.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for multi-start searches; overrides the scenario's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the summary line.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Optimal grasp for a fixed base (task `optimal_grasp`).
    Solve,
    /// Grasp quality over a placement grid (task `quality_map`).
    QualityMap,
    /// Best base placement per metric (task `maximize_quality`).
    Maximize,
    /// Closed-loop feedback run (task `feedback_run`).
    Feedback,
    /// Redraw the SVG figures from the CSV tables in the output directory.
    Render,
    /// Check a scenario without running it.
    Validate,
}

impl Command {
    fn task(self) -> Option<TaskKind> {
        match self {
            Command::Solve => Some(TaskKind::OptimalGrasp),
            Command::QualityMap => Some(TaskKind::QualityMap),
            Command::Maximize => Some(TaskKind::MaximizeQuality),
            Command::Feedback => Some(TaskKind::FeedbackRun),
            Command::Render | Command::Validate => None,
        }
    }
}

fn prepare(cli: &Cli) -> Result<Prepared> {
    let path = cli.config.as_deref().context("--config <path> is required")?;
    let scenario = load_scenario(path).with_context(|| format!("scenario {}", path.display()))?;
    let mut p = scenario.prepare().with_context(|| format!("scenario {}", path.display()))?;
    if let Some(seed) = cli.seed {
        p.seed = seed;
        if let scenario::PreparedTask::Maximize { search, .. } = &mut p.task {
            search.seed = seed;
        }
    }
    if let Some(out) = &cli.out {
        p.output = out.clone();
    }
    Ok(p)
}

/// Writes the figures for `artifacts` into `dir`; returns the file names.
pub fn render_into(dir: &Path, artifacts: &Artifacts) -> Result<Vec<String>> {
    let figures = svg::render(artifacts)?;
    let mut names = Vec::new();
    for (name, text) in figures {
        let path = dir.join(&name);
        write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
        names.push(name);
    }
    Ok(names)
}

/// Runs one command; returns its summary line.
pub fn run(cli: &Cli) -> Result<String> {
    match cli.command {
        Command::Validate => {
            let p = prepare(cli)?;
            Ok(format!("valid: {} ({}, output {})", p.name, p.task.kind().as_str(), p.output.display()))
        }
        Command::Render => {
            let dir = match (&cli.out, &cli.config) {
                (Some(out), _) => out.clone(),
                (None, Some(_)) => prepare(cli)?.output,
                (None, None) => bail!("render needs --out <dir> or --config <path>"),
            };
            let artifacts = Artifacts::load(&dir)?;
            let names = render_into(&dir, &artifacts)?;
            Ok(format!("render: wrote {} to {}", names.join(", "), dir.display()))
        }
        cmd => {
            let p = prepare(cli)?;
            let want = cmd.task().expect("task command");
            if p.task.kind() != want {
                bail!("scenario task is `{}`; run it with `cgrasp {}`", p.task.kind().as_str(), p.task.kind().subcommand());
            }
            let threads = cli.threads.unwrap_or(0);
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
            let outcome = pool.install(|| tasks::run(&p))?;
            outcome.artifacts.save(&p.output)?;
            render_into(&p.output, &outcome.artifacts)?;
            Ok(outcome.summary)
        }
    }
}
