use anyhow::Context;
use ctcx::network::{init_params, ModelConfig};
use ctcx::transfer::{read_checkpoint, save_checkpoint, transfer_weights};
use ctcx::trainer::{evaluate, split_dataset, train, write_metrics_csv};
use serde_json::json;

use super::{create_dir, load_data, resolve_alphabet, trainer_error, write_json};
use crate::args::{Arch, Init, TrainArgs};
use crate::outcome::{Classify, CliError, CmdResult, Outcome};

pub fn run(args: &TrainArgs) -> CmdResult {
    if args.init == Init::Transfer && args.source_checkpoint.is_none() {
        return Err(CliError::usage("--init transfer requires --source-checkpoint"));
    }
    let cfg = args.flags.train_config(args.seed);
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let alphabet = resolve_alphabet(&args.alphabet)?;
    let loaded = load_data(&args.manifest, args.features.as_deref(), &alphabet)?;
    let (train_set, val_set, test_set) =
        split_dataset(&loaded.dataset.utterances, cfg.split, cfg.seed).map_err(trainer_error)?;
    if train_set.is_empty() {
        return Err(CliError::data("the training split is empty"));
    }

    let model_cfg = ModelConfig {
        hidden: args.flags.hidden,
        num_layers: args.flags.layers,
        bidirectional: args.arch == Arch::Bilstm,
        dropout_keep: cfg.dropout_keep,
        feature_dim: loaded.feature_config.n_mfcc,
        num_classes: alphabet.num_classes(),
        seed: cfg.seed,
    };
    model_cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;

    let (init, transfer_report) = match (&args.init, &args.source_checkpoint) {
        (Init::Transfer, Some(path)) => {
            let source = read_checkpoint(path)
                .with_context(|| format!("reading {}", path.display()))
                .data()?;
            let (params, report) = transfer_weights(&source, &model_cfg, &alphabet, cfg.seed)
                .with_context(|| format!("transferring from {}", path.display()))
                .data()?;
            (params, Some(report))
        }
        _ => (init_params(&model_cfg).runtime()?, None),
    };

    create_dir(&args.out)?;
    let metrics_path = args.out.join("metrics.csv");
    let mut rows = Vec::new();
    let mut write_error = None;
    let outcome = train(init, &model_cfg, &train_set, &val_set, &cfg, |row| {
        rows.push(row.clone());
        match write_metrics_csv(&metrics_path, &rows) {
            Ok(()) => true,
            Err(e) => {
                write_error = Some(e);
                false
            }
        }
    })
    .map_err(trainer_error)?;
    if let Some(e) = write_error {
        return Err(e).context("writing metrics").runtime();
    }

    let ckpt = args.out.join("model.ckpt");
    save_checkpoint(&outcome.params, &model_cfg, &alphabet, &ckpt)
        .with_context(|| format!("writing {}", ckpt.display()))
        .runtime()?;
    let test = if test_set.is_empty() {
        None
    } else {
        Some(evaluate(&outcome.params, &model_cfg, &test_set, cfg.eval_decoder).map_err(trainer_error)?)
    };
    let last = outcome.history.last().cloned();
    let summary_json = json!({
        "checkpoint": ckpt,
        "metrics": metrics_path,
        "model": model_cfg,
        "train": cfg,
        "alphabet": alphabet.name(),
        "rows": loaded.rows,
        "dropped": loaded.dataset.dropped,
        "split_sizes": [train_set.len(), val_set.len(), test_set.len()],
        "epochs_run": outcome.history.len(),
        "last": last,
        "batch_sum_cost": outcome.batch_sum_costs.last(),
        "skipped_steps": outcome.skipped_steps,
        "test": test,
        "transfer": transfer_report,
    });
    write_json(&args.out.join("summary.json"), &summary_json)?;

    let mut summary = format!(
        "trained {} epochs on {} utterances ({} val, {} test); checkpoint {}",
        outcome.history.len(),
        train_set.len(),
        val_set.len(),
        test_set.len(),
        ckpt.display()
    );
    if let Some(l) = &last {
        summary.push_str(&format!("\nfinal train cost {:.4}, train LER {:.4}", l.train_cost, l.train_ler));
        if let (Some(c), Some(r)) = (l.val_cost, l.val_ler) {
            summary.push_str(&format!(", val cost {c:.4}, val LER {r:.4}"));
        }
    }
    if let Some(t) = &test {
        summary.push_str(&format!("\ntest cost {:.4}, test LER {:.4}", t.mean_cost, t.ler));
    }
    if !loaded.dataset.dropped.is_empty() {
        summary.push_str(&format!("\nexcluded {} rows", loaded.dataset.dropped.len()));
    }
    Ok(Outcome {
        summary,
        json: summary_json,
    })
}
