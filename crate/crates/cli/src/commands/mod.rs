mod analyze;
mod eval;
mod infer;
mod modal;
mod simulate;
mod synth;

use std::path::Path;

use serde::de::DeserializeOwned;

pub use analyze::{AnalyzeReport, NodeAnalysis};
pub use simulate::SimulateConfig;
pub use synth::GroundTruth;

use crate::error::CliError;
use crate::{Command, Outcome};

pub fn dispatch(command: Command, args: &[String]) -> Result<Outcome, CliError> {
    match command {
        Command::Simulate(a) => simulate::run(&a, args),
        Command::Modal(a) => modal::run(&a, args),
        Command::Analyze(a) => analyze::run(&a, args),
        Command::Infer(a) => infer::run(&a, args),
        Command::Eval(a) => eval::run(&a, args),
        Command::Synth(a) => synth::run(&a, args),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::parse(path, e))
}

/// Frequency of every bin of a spectrum.
pub(crate) fn bin_frequencies(bins: usize, bin_hz: f64) -> Vec<f64> {
    (0..bins).map(|k| k as f64 * bin_hz).collect()
}

/// `freq_hz,<name0>,<name1>,...` with one row per bin.
pub(crate) fn columns_csv(freqs: &[f64], names: &[String], columns: &[Vec<f64>]) -> String {
    let mut out = String::from("freq_hz");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (k, f) in freqs.iter().enumerate() {
        out.push_str(&f.to_string());
        for c in columns {
            out.push(',');
            out.push_str(&c[k].to_string());
        }
        out.push('\n');
    }
    out
}
