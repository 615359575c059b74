//! Command-line front end for `cascade-scope`.
//!
//! Exit codes: `0` on success, `1` for usage and configuration errors, `2`
//! when a valid configuration fails at run time.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use cascade_scope::config::{ExperimentConfig, ExperimentKind};
use cascade_scope::experiments::{figure3_default_graph, run_experiment, GRAPH_FILE, REPORT_FILE};
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cascade-scope",
    version,
    about = "SI cascade simulation and super-spreader estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the configured graph and write it as an edge list.
    GenGraph(Common),
    /// Simulate cascades and write one trace file per cascade.
    Simulate(Common),
    /// Estimate high-degree vertices from trace files.
    Estimate(Common),
    /// Derivative series of the infection curve on the planted tree.
    Figure3(Common),
    /// Exact-recovery rate of the threshold estimator over seeded runs.
    RecoverySweep(Common),
    /// Chi-square and total-variation diagnostics on the hard ensemble.
    HardnessSweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `grid_step` of the derivative series.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Overrides `runs`.
    #[arg(long)]
    runs: Option<usize>,
}

impl Command {
    fn parts(&self) -> (Option<ExperimentKind>, &Common) {
        match self {
            Command::GenGraph(c) => (None, c),
            Command::Simulate(c) => (Some(ExperimentKind::Simulate), c),
            Command::Estimate(c) => (Some(ExperimentKind::Estimate), c),
            Command::Figure3(c) => (Some(ExperimentKind::Figure3), c),
            Command::RecoverySweep(c) => (Some(ExperimentKind::RecoverySweep), c),
            Command::HardnessSweep(c) => (Some(ExperimentKind::HardnessSweep), c),
        }
    }
}

fn load_config(
    common: &Common,
    expected: Option<ExperimentKind>,
) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(&common.config)
        .map_err(|e| format!("cannot load config {}: {e}", common.config.display()))?;
    if let Some(kind) = expected {
        if cfg.experiment != kind {
            return Err(format!(
                "config describes a {} experiment, not {}",
                cfg.experiment.name(),
                kind.name()
            ));
        }
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(step) = common.grid_step {
        cfg.grid_step = Some(step);
    }
    if let Some(runs) = common.runs {
        cfg.runs = runs;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn gen_graph(cfg: &ExperimentConfig) -> Result<String, String> {
    let spec = match (&cfg.graph, cfg.experiment) {
        (Some(spec), _) => spec.clone(),
        (None, ExperimentKind::Figure3) => figure3_default_graph(),
        (None, _) => return Err("config has no graph".into()),
    };
    let generated = spec.generate().map_err(|e| e.to_string())?;
    let g = &generated.graph;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| e.to_string())?;
    let path = cfg.output_dir.join(GRAPH_FILE);
    g.save(&path).map_err(|e| e.to_string())?;
    let meta = serde_json::json!({
        "graph": spec,
        "vertices": g.vertex_count(),
        "edges": g.edge_count(),
        "max_degree": g.max_degree(),
        "planted": generated.planted,
    });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| e.to_string())? + "\n";
    fs::write(cfg.output_dir.join("graph.json"), text).map_err(|e| e.to_string())?;
    Ok(format!(
        "wrote {} ({} vertices, {} edges)",
        path.display(),
        g.vertex_count(),
        g.edge_count()
    ))
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_entry<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (expected, common) = cli.command.parts();
    let cfg = match load_config(common, expected) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return EXIT_CONFIG;
        }
    };

    if let Command::GenGraph(_) = cli.command {
        return match gen_graph(&cfg) {
            Ok(msg) => {
                println!("{msg}");
                EXIT_OK
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                EXIT_RUNTIME
            }
        };
    }

    match run_experiment(&cfg) {
        Ok(outcome) => {
            let mut line = format!(
                "{}: wrote {}",
                cfg.experiment.name(),
                cfg.output_dir.join(REPORT_FILE).display()
            );
            if let Some(rate) = outcome.report.success_rate {
                line.push_str(&format!(", success rate {rate:.3}"));
            }
            println!("{line}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
