use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smetric_lab::harness::{load_experiment_with, render_text, run, select_family, to_json, Family, LoadOptions};
use smetric_lab::Point;

/// Fixed-point, contraction and fixed-circle checks on S-metric spaces.
#[derive(Debug, Parser)]
#[command(name = "smetric-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// S-metric axioms, the induced triangle inequality and the generation test.
    Axioms(Common),
    /// Contractive conditions and the contraction factor.
    Verify(Common),
    /// Picard iteration and fixed-point search.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Starting point (label or number); defaults to every point of a finite space.
        #[arg(long)]
        x0: Option<String>,
    },
    /// Fixed-circle and fixed-disc checks about a center.
    Circle {
        #[command(flatten)]
        common: Common,
        /// Center of the circle; required unless the file declares circle checks.
        #[arg(long)]
        x0: Option<String>,
    },
    /// Every check declared in the experiment file.
    Run(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment file (JSON).
    #[arg(long, short)]
    input: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Comparison tolerance; overrides the file and the environment.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn parse_point(s: &str) -> Point {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Point::Real(v),
        _ => Point::label(s),
    }
}

fn execute(common: &Common, family: Option<Family>, x0: Option<Point>) -> Result<i32, String> {
    let mut opts = LoadOptions::from_env().map_err(|e| e.to_string())?;
    opts.tolerance = common.tolerance;
    let mut exp = load_experiment_with(&common.input, opts).map_err(|e| format!("{}: {e}", common.input.display()))?;
    if let Some(f) = family {
        select_family(&mut exp, f, x0).map_err(|e| e.to_string())?;
    }
    let report = run(&exp);
    let body = match common.format {
        Format::Json => to_json(&report),
        Format::Text => render_text(&report),
    };
    match &common.output {
        Some(path) => std::fs::write(path, body).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{body}"),
    }
    Ok(report.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Axioms(c) => execute(c, Some(Family::Axioms), None),
        Command::Verify(c) => execute(c, Some(Family::Verify), None),
        Command::Solve { common, x0 } => execute(common, Some(Family::Solve), x0.as_deref().map(parse_point)),
        Command::Circle { common, x0 } => execute(common, Some(Family::Circle), x0.as_deref().map(parse_point)),
        Command::Run(c) => execute(c, None, None),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
