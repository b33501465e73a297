use serde::{Deserialize, Serialize};
use vibratree_core::inference::{level_features, InferenceError};
use vibratree_core::spectral::{frequency_response, spectral_envelope, trajectory_spectra};
use vibratree_core::{InferenceParams, SpectralFeatures, Spectrum, Trajectory, Window};

use super::{bin_frequencies, columns_csv};
use crate::error::CliError;
use crate::manifest::Recorder;
use crate::svg::line_plot;
use crate::{AnalyzeArgs, Outcome, SpectraFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAnalysis {
    pub node: usize,
    pub zero_motion: bool,
    /// Peaks of the response envelope.
    pub response_mode_bins: Vec<usize>,
    /// Features at the shared mode bins; absent for the root.
    pub features: Option<SpectralFeatures>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub root: usize,
    pub epsilon: f64,
    pub window: Window,
    pub bin_hz: f64,
    pub fft_size: usize,
    /// The root has no motion; responses are the raw spectra.
    pub root_zero_motion: bool,
    /// Mode bins shared by every non-root node.
    pub mode_bins: Vec<usize>,
    /// Nodes whose motion is below the detection floor.
    pub zero_motion: Vec<usize>,
    pub nodes: Vec<NodeAnalysis>,
}

pub fn run(a: &AnalyzeArgs, args: &[String]) -> Result<Outcome, CliError> {
    let mut rec = Recorder::new("analyze", args, &a.out)?;
    rec.input(&a.traj)?;
    let meta = Trajectory::meta_path(&a.traj);
    rec.input(&meta)?;
    let traj = Trajectory::read_csv(&a.traj)?;
    let n = traj.node_count();
    if n < 2 {
        return Err(CliError::Usage(format!("trajectory has {n} node(s), analysis needs at least 2")));
    }
    if a.root >= n {
        return Err(InferenceError::InvalidRoot { root: a.root, n }.into());
    }
    let window: Window = a.window.into();
    let (spectra, flags): (Vec<Spectrum>, Vec<bool>) = trajectory_spectra(&traj, window)?.into_iter().unzip();

    let yr = &spectra[a.root];
    let peak = yr.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let eps = a.epsilon.unwrap_or(a.epsilon_relative * peak);
    let params = InferenceParams {
        epsilon: Some(eps),
        envelope_order: a.envelope_order,
        ..Default::default()
    };
    params.validate()?;
    let others: Vec<usize> = (0..n).filter(|&i| i != a.root).collect();
    let (features, mode_bins) = level_features(&spectra, &others, a.root, &params)?;
    let root_moves = peak > 0.0;

    let mut responses = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    let mut feats = features.into_iter();
    for (i, y) in spectra.iter().enumerate() {
        let r = if root_moves { frequency_response(y, yr, eps)? } else { y.clone() };
        let response_mode_bins = spectral_envelope(&r, a.envelope_order).map(|e| e.mode_bins()).unwrap_or_default();
        nodes.push(NodeAnalysis {
            node: i,
            zero_motion: flags[i],
            response_mode_bins,
            features: if i == a.root { None } else { feats.next() },
        });
        responses.push(r);
    }

    let freqs = bin_frequencies(yr.len(), yr.bin_hz);
    let names: Vec<String> = (0..n).map(|i| format!("node{i}")).collect();
    let amps: Vec<Vec<f64>> = spectra.iter().map(Spectrum::amplitudes).collect();
    let resp: Vec<Vec<f64>> = responses.iter().map(Spectrum::amplitudes).collect();
    rec.write("spectra.csv", columns_csv(&freqs, &names, &amps).as_bytes())?;
    rec.write("responses.csv", columns_csv(&freqs, &names, &resp).as_bytes())?;
    let series = |cols: &[Vec<f64>]| names.iter().cloned().zip(cols.iter().cloned()).collect::<Vec<_>>();
    rec.write("spectra.svg", line_plot("Amplitude spectra", "frequency (Hz)", &freqs, &series(&amps), true).as_bytes())?;
    let title = format!("Responses relative to node {}", a.root);
    rec.write("responses.svg", line_plot(&title, "frequency (Hz)", &freqs, &series(&resp), true).as_bytes())?;

    let zero_motion: Vec<usize> = (0..n).filter(|&i| flags[i]).collect();
    let report = AnalyzeReport {
        root: a.root,
        epsilon: eps,
        window,
        bin_hz: yr.bin_hz,
        fft_size: yr.fft_size,
        root_zero_motion: !root_moves,
        mode_bins,
        zero_motion: zero_motion.clone(),
        nodes,
    };
    rec.write_json("features.json", &report)?;
    rec.write_json(
        "spectra.json",
        &SpectraFile {
            sample_rate_hz: traj.sample_rate_hz,
            window,
            spectra,
            zero_motion: flags,
            positions: traj.rest_positions.clone(),
        },
    )?;
    rec.config(&serde_json::json!({
        "root": a.root,
        "epsilon": eps,
        "window": window,
        "envelope_order": a.envelope_order,
    }));
    let manifest = rec.finish()?;
    let stdout = if zero_motion.is_empty() { String::new() } else { format!("zero motion: {zero_motion:?}\n") };
    Ok(Outcome { manifest, stdout })
}
