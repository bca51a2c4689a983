use anyhow::Context;
use ctcx::transfer::read_checkpoint;
use ctcx::trainer::{render_table, run_experiment_matrix, write_metrics_csv, ExperimentConfig};
use serde_json::json;

use super::{create_dir, load_data, resolve_alphabet, trainer_error, write_json};
use crate::args::ExperimentArgs;
use crate::outcome::{Classify, CliError, CmdResult, Outcome};

/// `"BiLSTM with Russian model"` becomes `bilstm_with_russian_model`.
fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

pub fn run(args: &ExperimentArgs) -> CmdResult {
    let train = args.flags.train_config(args.seed);
    train.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let alphabet = resolve_alphabet(&args.alphabet)?;
    let mut warnings = Vec::new();
    let mut sources = Vec::new();
    for path in &args.source_checkpoint {
        if !path.exists() {
            let w = format!("source checkpoint {} does not exist", path.display());
            log::warn!("{w}");
            warnings.push(w);
            continue;
        }
        sources.push(
            read_checkpoint(path)
                .with_context(|| format!("reading {}", path.display()))
                .data()?,
        );
    }
    let loaded = load_data(&args.manifest, args.features.as_deref(), &alphabet)?;
    let cfg = ExperimentConfig {
        hidden: args.flags.hidden,
        num_layers: args.flags.layers,
        feature_dim: loaded.feature_config.n_mfcc,
        train,
    };

    create_dir(&args.out)?;
    let mut write_error = None;
    let mut report = run_experiment_matrix(&loaded.dataset.utterances, &alphabet, &sources, &cfg, |s| {
        let path = args.out.join(format!("{}.csv", slug(&s.label)));
        if let Err(e) = write_metrics_csv(&path, &s.history) {
            write_error.get_or_insert(e);
        }
    })
    .map_err(trainer_error)?;
    if let Some(e) = write_error {
        return Err(e).context("writing metrics").runtime();
    }
    warnings.append(&mut report.warnings);
    report.warnings = warnings;

    let body = json!({
        "config": cfg,
        "alphabet": alphabet.name(),
        "excluded": loaded.dataset.dropped,
        "report": report,
    });
    write_json(&args.out.join("summary.json"), &body)?;
    let mut summary = render_table(&report);
    for w in &report.warnings {
        summary.push_str(&format!("warning: {w}\n"));
    }
    Ok(Outcome {
        summary: summary.trim_end().to_string(),
        json: body,
    })
}
