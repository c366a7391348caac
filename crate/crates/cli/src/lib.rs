//! Batch driver: configuration, run modes and output files.

pub mod config;
pub mod modes;

use config::{parse_config, validate, Mode, RunConfig};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thermocontact::io::series_csv;

/// Exit status for a configuration that cannot be run.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for a numerical failure or an unwritable output.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(thermocontact::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Output(_) => EXIT_NUMERICAL,
        }
    }
}

/// What a finished run wrote.
#[derive(Debug)]
pub struct Outcome {
    pub directory: PathBuf,
    pub report: serde_json::Value,
    pub files: Vec<String>,
}

/// Reads the configuration file, applying environment overrides.
pub fn load_config<I, K, V>(path: Option<&Path>, vars: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let (text, source) = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?;
            (text, p.display().to_string())
        }
        None => ("{}".to_string(), "<defaults>".to_string()),
    };
    parse_config(&text, &source, vars).map_err(|e| CliError::Config(vec![e.0]))
}

/// Checks the configuration without running anything.
pub fn check(cfg: &RunConfig) -> Result<(), CliError> {
    let problems = validate(cfg);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(problems))
    }
}

fn write(dir: &Path, name: &str, contents: &str, files: &mut Vec<String>) -> Result<(), CliError> {
    fs::write(dir.join(name), contents).map_err(|e| CliError::Output(format!("{}: {e}", dir.join(name).display())))?;
    files.push(name.to_string());
    Ok(())
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialise");
    s.push('\n');
    s
}

/// Validates, runs the configured mode and writes its outputs.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check(cfg)?;
    let dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let start = Instant::now();
    let result = match cfg.mode {
        Mode::Equilibrium => modes::equilibrium(cfg),
        Mode::Heat => modes::heat(cfg),
        Mode::Coupled => modes::coupled(cfg),
        Mode::Decay => modes::decay(cfg),
        Mode::CornerProbe => modes::corner_probe(cfg),
        Mode::EpsilonSweep => modes::epsilon_sweep(cfg),
    };
    let wall = start.elapsed().as_secs_f64();
    let mut files = Vec::new();
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "wall_seconds": wall,
    });
    write(&dir, "meta.json", &pretty(&meta), &mut files)?;
    match result {
        Ok(out) => {
            write(&dir, "report.json", &pretty(&out.report), &mut files)?;
            write(&dir, "series.csv", &series_csv(&out.rows), &mut files)?;
            for (name, text) in &out.files {
                write(&dir, name, text, &mut files)?;
            }
            if cfg.output.plots {
                for (name, svg) in &out.plots {
                    write(&dir, name, svg, &mut files)?;
                }
            }
            Ok(Outcome { directory: dir, report: out.report, files })
        }
        Err(fail) => {
            let failure = json!({ "error": fail.error.to_string(), "variant": format!("{:?}", fail.error) });
            write(&dir, "failure.json", &pretty(&failure), &mut files)?;
            if let Some(cp) = fail.dump.get("checkpoint") {
                write(&dir, "checkpoint.json", &pretty(cp), &mut files)?;
            }
            if !fail.dump.is_null() {
                let mut state = fail.dump.clone();
                if let Some(o) = state.as_object_mut() {
                    o.remove("checkpoint");
                }
                write(&dir, "failure_state.json", &pretty(&state), &mut files)?;
            }
            Err(CliError::Numerical(fail.error))
        }
    }
}
