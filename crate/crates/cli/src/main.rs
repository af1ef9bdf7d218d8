use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fracbloch::model::dimension_cap_from_env;
use fracbloch::observables::{excitation_site, DEFAULT_REFOCUS_THRESHOLD, DEFAULT_TRUNCATION_TOLERANCE};
use fracbloch::output::read_trajectory_csv;
use fracbloch::render::{render_heatmap, HeatmapAxis, Normalization};
use fracbloch::scenario::{
    analyze_populations, list_presets, preset, presets, run_presets, run_scenario, ScenarioConfig,
};
use fracbloch::Error;

/// Bloch oscillations of single particles and bound boson pairs in tilted lattices.
#[derive(Parser)]
#[command(name = "fracbloch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in preset, or `all` of them.
    Preset {
        name: String,
        /// Output directory (default `out/<name>`, or `out` for `all`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets.
    Presets {
        #[arg(long)]
        json: bool,
    },
    /// Render a trajectory CSV as a 16-bit PGM heatmap.
    Render {
        trajectory: PathBuf,
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        /// Propagation distance of a `full-slice` frame, cm.
        #[arg(long, default_value_t = 0.0)]
        z: f64,
        #[arg(long, value_enum, default_value_t = Norm::PerColumn)]
        norm: Norm,
        /// Output file (default: the CSV path with a `.pgm` extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print diagnostics of a trajectory CSV as JSON.
    Analyze {
        trajectory: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REFOCUS_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_TOLERANCE)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    FullSlice,
    Diagonal,
    Linear,
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Global,
    PerColumn,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        Error::DimensionCap { .. } => 3,
        Error::Io { .. } | Error::Format { .. } => 4,
        _ => 1,
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cap() -> Result<usize, Error> {
    dimension_cap_from_env().map_err(|e| Error::Config {
        line: 0,
        message: e.to_string(),
    })
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, out } => {
            let cfg = ScenarioConfig::load(&config).map_err(|e| match e {
                Error::Config { line, message } => Error::Config {
                    line,
                    message: format!("{}: {message}", config.display()),
                },
                other => other,
            })?;
            let dir = out
                .or_else(|| cfg.scenario.output_dir.clone())
                .unwrap_or_else(|| Path::new("out").join(&cfg.scenario.name));
            let summary = run_scenario(&cfg, &dir, cap()?)?;
            eprintln!("wrote {} files to {}", summary.files.len(), dir.display());
            print_json(&summary.diagnostics);
        }
        Command::Preset { name, out } if name == "all" => {
            let dir = out.unwrap_or_else(|| PathBuf::from("out"));
            let names: Vec<&str> = presets().iter().map(|p| p.name).collect();
            let batch = run_presets(&names, &dir, cap()?)?;
            eprintln!("wrote {} runs and batch.json to {}", batch.runs.len(), dir.display());
            println!(
                "frequency_ratio: {:?} ({})",
                batch.frequency_ratio, batch.frequency_ratio_note
            );
        }
        Command::Preset { name, out } => {
            let p = preset(&name).ok_or_else(|| Error::Config {
                line: 0,
                message: format!(
                    "unknown preset {name:?}; known: {}",
                    presets().iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
                ),
            })?;
            let dir = out.unwrap_or_else(|| Path::new("out").join(p.name));
            let summary = run_scenario(&p.config, &dir, cap()?)?;
            eprintln!("wrote {} files to {}", summary.files.len(), dir.display());
            print_json(&summary.diagnostics);
        }
        Command::Presets { json } => {
            let table = list_presets();
            if json {
                print_json(&table);
            } else {
                for info in table {
                    println!("{}  [{:?}]  {}", info.name, info.model, info.description);
                    println!(
                        "    κ = {}, κ₁ = {}, ρ = {}, U₀ = {}, Fd = {:.6}, N = {}, L = {} cm",
                        info.params.kappa,
                        info.params.kappa1,
                        info.params.rho,
                        info.params.u0,
                        info.params.fd,
                        info.params.n_sites,
                        info.z_max_cm
                    );
                    for (key, source) in &info.provenance {
                        println!("    {key}: {source}");
                    }
                }
            }
        }
        Command::Render {
            trajectory,
            axis,
            z,
            norm,
            out,
        } => {
            let (trace, geometry) = read_trajectory_csv(&trajectory)?;
            let axis = match (axis, geometry) {
                (Some(Axis::FullSlice), _) => HeatmapAxis::FullSlice { z_cm: z },
                (Some(Axis::Diagonal), _) => HeatmapAxis::DiagonalVsZ,
                (Some(Axis::Linear), _) => HeatmapAxis::LinearVsZ,
                (None, fracbloch::observables::Geometry::Linear) => HeatmapAxis::LinearVsZ,
                (None, _) => HeatmapAxis::DiagonalVsZ,
            };
            let normalization = match norm {
                Norm::Global => Normalization::Global,
                Norm::PerColumn => Normalization::PerColumn,
            };
            let image = render_heatmap(&trace, geometry, axis, normalization)?;
            let path = out.unwrap_or_else(|| trajectory.with_extension("pgm"));
            image.write_pgm(&path)?;
            eprintln!("wrote {}×{} heatmap to {}", image.width, image.height, path.display());
        }
        Command::Analyze {
            trajectory,
            threshold,
            tolerance,
        } => {
            let (trace, geometry) = read_trajectory_csv(&trajectory)?;
            let site = excitation_site(&trace);
            let (diagnostics, _) = analyze_populations(&trace, geometry, site, threshold, tolerance)?;
            print_json(&diagnostics);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
