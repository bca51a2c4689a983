use anyhow::Context;
use ctcx::frontend::{feature_normalize, load_wav, mfcc, resample, FeatureConfig};
use ctcx::text_labels::{decode, LabelSeq};
use ctcx::transfer::read_checkpoint;
use ctcx::trainer::transcribe;
use serde_json::json;

use super::{read_feature_config, trainer_error};
use crate::args::DecodeArgs;
use crate::outcome::{Classify, CliError, CmdResult, Outcome};

pub fn run(args: &DecodeArgs) -> CmdResult {
    let ck = read_checkpoint(&args.checkpoint)
        .with_context(|| format!("reading {}", args.checkpoint.display()))
        .data()?;
    let params = ck.params().data()?;
    let alphabet = ck.alphabet().data()?;
    let cfg = match &args.config {
        Some(p) => read_feature_config(p)?,
        None => FeatureConfig::default(),
    };
    if cfg.n_mfcc != ck.config.feature_dim {
        return Err(CliError::data(format!(
            "feature config gives {} coefficients, the model expects {}",
            cfg.n_mfcc, ck.config.feature_dim
        )));
    }
    let mut clip = load_wav(&args.wav)
        .with_context(|| format!("reading {}", args.wav.display()))
        .data()?;
    let mut notices = Vec::new();
    if clip.sample_rate_hz() != cfg.sample_rate_hz {
        let n = format!("resampled from {} Hz to {} Hz", clip.sample_rate_hz(), cfg.sample_rate_hz);
        eprintln!("note: {n}");
        notices.push(n);
        clip = resample(&clip, cfg.sample_rate_hz).data()?;
    }
    let raw = mfcc(&clip, &cfg).data()?;
    let features = feature_normalize(&raw).values.cast::<f32>();
    let labels = transcribe(&params, &ck.config, &features, args.decoder.decoder()).map_err(trainer_error)?;
    let text = decode(&LabelSeq(labels.clone()), &alphabet).runtime()?;
    Ok(Outcome {
        summary: text.clone(),
        json: json!({
            "text": text,
            "labels": labels,
            "frames": features.rows(),
            "notices": notices,
        }),
    })
}
