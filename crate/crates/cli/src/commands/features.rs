use std::path::Path;

use anyhow::Context;
use ctcx::frontend::{load_wav, mfcc, read_manifest, resample, write_feature_cache, FeatureConfig};
use ctcx::trainer::feature_cache_path;
use serde::Serialize;
use serde_json::json;

use super::{create_dir, read_feature_config, resolve_audio, write_json, FEATURE_CONFIG_FILE};
use crate::args::FeaturesArgs;
use crate::outcome::{Classify, CliError, CmdResult, Outcome};

#[derive(Serialize)]
struct Failure {
    audio: String,
    error: String,
}

/// A cache is current when it is at least as new as its audio, or when the
/// audio no longer exists.
fn is_current(cache: &Path, audio: &Path) -> bool {
    let Ok(cache_meta) = std::fs::metadata(cache) else {
        return false;
    };
    match std::fs::metadata(audio) {
        Err(_) => true,
        Ok(audio_meta) => match (cache_meta.modified(), audio_meta.modified()) {
            (Ok(c), Ok(a)) => c >= a,
            _ => false,
        },
    }
}

fn compute(audio: &Path, cache: &Path, cfg: &FeatureConfig) -> anyhow::Result<()> {
    let mut clip = load_wav(audio)?;
    if clip.sample_rate_hz() != cfg.sample_rate_hz {
        log::info!(
            "resampling {} from {} Hz to {} Hz",
            audio.display(),
            clip.sample_rate_hz(),
            cfg.sample_rate_hz
        );
        clip = resample(&clip, cfg.sample_rate_hz)?;
    }
    let fm = mfcc(&clip, cfg)?;
    write_feature_cache(cache, &fm)?;
    Ok(())
}

pub fn run(args: &FeaturesArgs) -> CmdResult {
    let cfg = match &args.config {
        Some(p) => read_feature_config(p)?,
        None => FeatureConfig::default(),
    };
    let rows = read_manifest(&args.manifest)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))
        .data()?;
    create_dir(&args.out_dir)?;
    let config_path = args.out_dir.join(FEATURE_CONFIG_FILE);
    if config_path.exists() {
        let existing = read_feature_config(&config_path)?;
        if existing != cfg {
            return Err(CliError::data(format!(
                "{} holds caches built with a different feature config",
                args.out_dir.display()
            )));
        }
    } else {
        write_json(&config_path, &cfg)?;
    }

    let (mut computed, mut skipped) = (0usize, 0usize);
    let mut failures = Vec::new();
    for row in &rows {
        let audio = resolve_audio(&args.manifest, &row.audio);
        let cache = feature_cache_path(&args.out_dir, &row.audio);
        if is_current(&cache, &audio) {
            skipped += 1;
            continue;
        }
        match compute(&audio, &cache, &cfg) {
            Ok(()) => computed += 1,
            Err(e) => failures.push(Failure {
                audio: row.audio.clone(),
                error: format!("{e:#}"),
            }),
        }
    }

    let mut summary = format!("computed {computed}, skipped {skipped} cached, failed {}", failures.len());
    for f in &failures {
        summary.push_str(&format!("\n  {}: {}", f.audio, f.error));
    }
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("failed {}: {}", f.audio, f.error);
        }
        return Err(CliError::data(format!(
            "{} of {} feature files failed",
            failures.len(),
            rows.len()
        )));
    }
    Ok(Outcome {
        summary,
        json: json!({
            "computed": computed,
            "skipped": skipped,
            "failed": failures,
            "out_dir": args.out_dir,
        }),
    })
}
