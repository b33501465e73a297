use serde::Serialize;
use vibratree_core::{linearize, modal_analysis, Mode};

use super::simulate::modal_model;
use crate::error::CliError;
use crate::manifest::Recorder;
use crate::svg::mode_shapes;
use crate::{ModalArgs, Outcome};

#[derive(Serialize)]
struct ModesFile<'a> {
    node_count: usize,
    modes: &'a [Mode],
}

pub fn run(a: &ModalArgs, args: &[String]) -> Result<Outcome, CliError> {
    let mut rec = Recorder::new("modal", args, &a.out)?;
    let model = modal_model(a, &mut rec)?;
    let modes = modal_analysis(&linearize(&model)?)?;
    rec.write_json("modes.json", &ModesFile { node_count: model.len(), modes: &modes })?;
    rec.write("modes.svg", mode_shapes(&model, &modes).as_bytes())?;
    rec.config(&serde_json::json!({ "model": serde_json::from_str::<serde_json::Value>(&model.to_json_string()).expect("model json") }));
    let manifest = rec.finish()?;
    let stdout = modes.iter().map(|m| format!("{:.6} Hz\n", m.frequency_hz)).collect();
    Ok(Outcome { manifest, stdout })
}
