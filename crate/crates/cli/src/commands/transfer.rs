use std::path::PathBuf;

use anyhow::Context;
use ctcx::network::ModelConfig;
use ctcx::transfer::{read_checkpoint, save_checkpoint, transfer_weights, verify_transfer, VerifyMode};
use ctcx::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{resolve_alphabet, write_json};
use crate::args::{Arch, TransferArgs};
use crate::outcome::{Classify, CliError, CmdResult, Outcome};

const PROBES: usize = 4;
const PROBE_FRAMES: usize = 50;

fn require<T: PartialEq + std::fmt::Display>(field: &str, source: T, requested: Option<T>) -> Result<(), CliError> {
    match requested {
        Some(r) if r != source => Err(CliError::data(format!(
            "source checkpoint has {field} {source}, {r} requested; only the output layer can change"
        ))),
        _ => Ok(()),
    }
}

pub fn run(args: &TransferArgs) -> CmdResult {
    let alphabet = resolve_alphabet(&args.target_alphabet)?;
    let source = read_checkpoint(&args.source)
        .with_context(|| format!("reading {}", args.source.display()))
        .data()?;
    let source_params = source.params().data()?;
    require("hidden size", source.config.hidden, args.hidden)?;
    require("layer count", source.config.num_layers, args.layers)?;
    require(
        "bidirectional",
        source.config.bidirectional,
        args.arch.map(|a| a == Arch::Bilstm),
    )?;

    let target_cfg = ModelConfig {
        num_classes: alphabet.num_classes(),
        seed: args.seed,
        ..source.config.clone()
    };
    let (params, report) = transfer_weights(&source, &target_cfg, &alphabet, args.seed).data()?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let probes: Vec<Matrix<f32>> = (0..PROBES)
        .map(|_| {
            Matrix::from_fn(PROBE_FRAMES, target_cfg.feature_dim, |_, _| {
                rng.random_range(-1.0f32..1.0)
            })
        })
        .collect();
    let verify = verify_transfer(
        &source_params,
        &source.config,
        &params,
        &target_cfg,
        &probes,
        VerifyMode::Strict,
    )
    .runtime()?;

    save_checkpoint(&params, &target_cfg, &alphabet, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))
        .runtime()?;
    let mut report_path = args.out.clone().into_os_string();
    report_path.push(".report.json");
    let report_path = PathBuf::from(report_path);
    let body = json!({
        "source": args.source,
        "source_alphabet": source.alphabet_name,
        "target_alphabet": alphabet.name(),
        "checkpoint": args.out,
        "copied": report.copied,
        "reinitialized": report.reinitialized,
        "skipped_reason": report.skipped_reason,
        "verification": verify,
    });
    write_json(&report_path, &body)?;

    let mut summary = format!(
        "copied {} tensors from {} ({}), reinitialized {}",
        report.copied.len(),
        args.source.display(),
        source.alphabet_name,
        report.reinitialized.join(", ")
    );
    for (name, reason) in &report.skipped_reason {
        summary.push_str(&format!("\n  {name}: {reason}"));
    }
    summary.push_str(&format!(
        "\nverified on {} probes, max deviation {:e}\nwrote {}",
        verify.probes,
        verify.max_abs_deviation,
        args.out.display()
    ));
    Ok(Outcome { summary, json: body })
}
