use vibratree_core::evaluate;
use vibratree_core::metrics::parse_parents;

use super::read_text;
use crate::error::CliError;
use crate::manifest::Recorder;
use crate::{EvalArgs, Outcome};

pub fn run(a: &EvalArgs, args: &[String]) -> Result<Outcome, CliError> {
    let mut rec = Recorder::new("eval", args, &a.out)?;
    rec.input(&a.pred)?;
    rec.input(&a.gt)?;
    let pred = parse_parents(&read_text(&a.pred)?)?;
    let gt = parse_parents(&read_text(&a.gt)?)?;
    let report = evaluate(&pred, &gt)?;
    rec.write_json("report.json", &report)?;
    rec.config(&serde_json::json!({}));
    let manifest = rec.finish()?;
    let summary = serde_json::json!({ "accuracy": report.accuracy, "edit_distance": report.edit_distance });
    Ok(Outcome { stdout: format!("{summary}\n"), manifest })
}
