use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use ctcx::frontend::{
    frame_count, load_wav, read_manifest, resampled_len, write_feature_cache, write_manifest,
    FeatureConfig, FeatureMatrix, ManifestRow, MAX_DURATION_S,
};
use ctcx::text_labels::{encode, normalize_transcript, Alphabet};
use ctcx::trainer::{feature_cache_path, synthetic_items, SyntheticSpec};
use serde::Serialize;
use serde_json::json;

use super::{create_dir, manifest_dir, resolve_alphabet, resolve_audio, write_json, FEATURE_CONFIG_FILE};
use crate::args::PrepareArgs;
use crate::outcome::{Classify, CliError, CmdResult, Outcome};

#[derive(Serialize)]
struct Dropped {
    audio: String,
    reason: &'static str,
    detail: String,
}

pub fn run(args: &PrepareArgs) -> CmdResult {
    let alphabet = resolve_alphabet(&args.alphabet)?;
    match (args.synthetic, &args.manifest) {
        (Some(n), _) => synthetic(args, &alphabet, n),
        (None, Some(manifest)) => clean(manifest, &args.out, &alphabet),
        (None, None) => Err(CliError::usage("either --manifest or --synthetic is required")),
    }
}

/// Audio paths in the output must still resolve from the output's directory.
fn relocate(input: &Path, output: &Path, audio: &str) -> String {
    if manifest_dir(input) == manifest_dir(output) || Path::new(audio).is_absolute() {
        return audio.to_string();
    }
    let joined = resolve_audio(input, audio);
    std::fs::canonicalize(&joined)
        .unwrap_or(joined)
        .to_string_lossy()
        .into_owned()
}

fn clean(manifest: &Path, out: &Path, alphabet: &Alphabet) -> CmdResult {
    let rows = read_manifest(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))
        .data()?;
    if rows.is_empty() {
        return Err(CliError::data(format!("manifest {} is empty", manifest.display())));
    }
    let fc = FeatureConfig::default();
    let total = rows.len();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for row in rows {
        let text = normalize_transcript(&row.text, alphabet);
        let drop = |reason: &'static str, detail: String| Dropped {
            audio: row.audio.clone(),
            reason,
            detail,
        };
        if text.is_empty() {
            dropped.push(drop("empty_transcript", format!("{:?}", row.text)));
            continue;
        }
        if let Some(d) = row.duration_s.filter(|&d| d > MAX_DURATION_S) {
            dropped.push(drop("duration", format!("{d} s > {MAX_DURATION_S} s")));
            continue;
        }
        let clip = match load_wav(resolve_audio(manifest, &row.audio)) {
            Ok(c) => c,
            Err(e) => {
                dropped.push(drop("audio", e.to_string()));
                continue;
            }
        };
        let duration = row.duration_s.unwrap_or_else(|| clip.duration_s());
        if duration > MAX_DURATION_S {
            dropped.push(drop("duration", format!("{duration} s > {MAX_DURATION_S} s")));
            continue;
        }
        let n = resampled_len(clip.samples().len(), clip.sample_rate_hz(), fc.sample_rate_hz);
        let frames = frame_count(n, fc.window_samples(), fc.hop_samples());
        let needed = encode(&text, alphabet).data()?.min_frames();
        if needed > frames {
            dropped.push(drop("ctc_infeasible", format!("{needed} frames needed, {frames} available")));
            continue;
        }
        kept.push(ManifestRow {
            audio: relocate(manifest, out, &row.audio),
            text,
            duration_s: Some(duration),
        });
    }
    for d in &dropped {
        log::warn!("dropped {}: {} ({})", d.audio, d.reason, d.detail);
    }
    if kept.is_empty() {
        for d in &dropped {
            eprintln!("dropped {}: {} ({})", d.audio, d.reason, d.detail);
        }
        return Err(CliError::data(format!("all {total} rows were dropped")));
    }
    write_manifest(out, &kept)
        .with_context(|| format!("writing {}", out.display()))
        .runtime()?;

    let mut by_reason: BTreeMap<&str, usize> = BTreeMap::new();
    for d in &dropped {
        *by_reason.entry(d.reason).or_default() += 1;
    }
    let mut summary = format!("kept {} of {total} rows, dropped {}", kept.len(), dropped.len());
    for (reason, count) in &by_reason {
        let _ = write!(summary, "\n  {reason}: {count}");
    }
    Ok(Outcome {
        summary,
        json: json!({
            "manifest": out,
            "kept": kept.len(),
            "dropped": dropped.len(),
            "dropped_by_reason": by_reason,
            "dropped_rows": dropped,
        }),
    })
}

/// Writes raw synthetic feature caches under `features/` next to the output
/// manifest, plus manifest rows pointing at (nonexistent) audio files.
fn synthetic(args: &PrepareArgs, alphabet: &Alphabet, count: usize) -> CmdResult {
    if count == 0 {
        return Err(CliError::usage("--synthetic needs a positive count"));
    }
    let spec: SyntheticSpec = match &args.synthetic_spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .data()?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .data()?
        }
        None => SyntheticSpec::default(),
    };
    let items = synthetic_items(alphabet, &spec, count, args.synthetic_seed).data()?;
    let fc = FeatureConfig {
        n_mfcc: spec.feature_dim,
        ..FeatureConfig::default()
    };
    let features = manifest_dir(&args.out).join("features");
    create_dir(&features)?;
    write_json(&features.join(FEATURE_CONFIG_FILE), &fc)?;
    let hop_s = fc.hop_ms / 1000.0;
    let mut rows = Vec::with_capacity(items.len());
    for item in items {
        let audio = format!("{}.wav", item.id);
        let path = feature_cache_path(&features, &audio);
        let duration = item.features.rows() as f64 * hop_s;
        write_feature_cache(
            &path,
            &FeatureMatrix {
                values: item.features,
                config: fc.clone(),
            },
        )
        .with_context(|| format!("writing {}", path.display()))
        .runtime()?;
        rows.push(ManifestRow::new(audio, item.text, duration));
    }
    write_manifest(&args.out, &rows)
        .with_context(|| format!("writing {}", args.out.display()))
        .runtime()?;
    Ok(Outcome {
        summary: format!(
            "generated {} synthetic utterances over alphabet {} in {}",
            rows.len(),
            alphabet.name(),
            features.display()
        ),
        json: json!({
            "manifest": args.out,
            "features": features,
            "kept": rows.len(),
            "dropped": 0,
            "synthetic": true,
        }),
    })
}
