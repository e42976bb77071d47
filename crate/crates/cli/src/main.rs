//! Command-line front end: generate the initial shape, evaluate a mesh
//! against a scene, or run the full optimization loop.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sonoshape::acoustics::shade_partial_loss;
use sonoshape::mesh::{export_mesh, generate_sphere_mesh, import_mesh};
use sonoshape::optimizer::optimize;
use sonoshape::solver::Backend;

use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "sonoshape", version, about = "Shape optimization against ray-traced sound pressure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the initial sphere mesh and export it.
    Generate(CommonArgs),
    /// Evaluate the total loss and per-simplex shading of a mesh file.
    Evaluate {
        /// Wavefront mesh file to evaluate.
        mesh: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the iterative optimization loop.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Solver backend override.
    #[arg(long, value_parser = ["exhaustive", "annealer", "remote"])]
    backend: Option<String>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Single machine-parsable line; details stay on the chain.
            let line = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(common) => {
            let (config, out_dir) = load_config(&common)?;
            cmd_generate(&config, &out_dir)
        }
        Command::Evaluate { mesh, common } => {
            let (config, out_dir) = load_config(&common)?;
            cmd_evaluate(&config, &out_dir, &mesh)
        }
        Command::Optimize { common, iterations, beta, mu } => {
            let (mut config, out_dir) = load_config(&common)?;
            if let Some(iterations) = iterations {
                config.optimizer.iterations = iterations;
            }
            if let Some(beta) = beta {
                config.optimizer.beta = beta;
            }
            if let Some(mu) = mu {
                config.optimizer.mu = mu;
            }
            cmd_optimize(&config, &out_dir)
        }
    }
}

/// Reads the config file (or defaults), applies flag overrides, and
/// resolves the output directory.
fn load_config(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config: ExperimentConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.optimizer.seed = seed;
    }
    if let Some(backend) = &common.backend {
        config.solver.backend = match backend.as_str() {
            "exhaustive" => Backend::Exhaustive,
            "annealer" => Backend::Annealer,
            "remote" => Backend::Remote,
            other => bail!("unknown backend {other:?}"),
        };
    }
    if let Some(out) = &common.out {
        config.output_dir = Some(out.clone());
    }
    let out_dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("run"));
    Ok((config, out_dir))
}

/// The effective configuration is written next to every run's outputs so
/// the run can be reproduced exactly.
fn write_resolved_config(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let path = out_dir.join("resolved_config.json");
    let mut resolved = config.clone();
    resolved.output_dir = Some(out_dir.to_path_buf());
    let text = serde_json::to_string_pretty(&resolved)?;
    std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_generate(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    // Validate before any filesystem effects.
    let mesh = generate_sphere_mesh(config.mesh.n_theta, config.mesh.n_phi)?;
    let euler_ok = mesh.validate_closed().is_ok();

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_resolved_config(config, out_dir)?;
    let mesh_path = out_dir.join("initial.obj");
    export_mesh(&mesh, &mesh_path)?;

    println!(
        "V={} E={} S={} euler={}",
        mesh.vertex_count(),
        mesh.edge_count(),
        mesh.simplex_count(),
        if euler_ok { "PASS" } else { "FAIL" },
    );
    println!("wrote {}", mesh_path.display());
    if !euler_ok {
        bail!("generated mesh failed the Euler check");
    }
    Ok(())
}

fn cmd_evaluate(config: &ExperimentConfig, out_dir: &Path, mesh_path: &Path) -> Result<()> {
    let mesh = import_mesh(mesh_path)?;
    let scene = config.scene();
    scene.microphone.validate()?;

    let shades = shade_partial_loss(&mesh, &scene, config.optimizer.rays_per_simplex, config.optimizer.seed);
    let total: f64 = shades.iter().map(|(loss, _)| loss).sum();

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_resolved_config(config, out_dir)?;
    let csv_path = out_dir.join("shading.csv");
    let mut csv = BufWriter::new(File::create(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?);
    writeln!(csv, "simplex_id,loss,normalized_loss")?;
    for (s, (loss, normalized)) in shades.iter().enumerate() {
        writeln!(csv, "{s},{loss},{normalized}")?;
    }
    csv.flush()?;

    println!("total_loss={total}");
    println!("wrote {}", csv_path.display());
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    initial_loss: f64,
    final_loss: f64,
    iterations_run: usize,
    seed: u64,
    backend: String,
}

fn cmd_optimize(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    // Validate everything before any filesystem effects.
    let params = config.optimizer_params();
    params.validate()?;
    let scene = config.scene();
    scene.microphone.validate()?;
    let mesh = generate_sphere_mesh(config.mesh.n_theta, config.mesh.n_phi)?;

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_resolved_config(config, out_dir)?;

    let history = optimize(&mesh, &params, &scene, Some(out_dir))?;

    let final_path = out_dir.join("final.obj");
    export_mesh(&history.final_mesh, &final_path)?;

    let summary = RunSummary {
        initial_loss: history.initial_loss,
        final_loss: history.final_loss(),
        iterations_run: history.iterations_run(),
        seed: params.seed,
        backend: params.solver.backend.to_string(),
    };
    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;

    println!(
        "loss {} -> {} in {} iterations ({})",
        summary.initial_loss,
        summary.final_loss,
        summary.iterations_run,
        if history.converged { "converged" } else { "budget exhausted" },
    );
    println!("wrote {}", summary_path.display());
    Ok(())
}
