use anyhow::Context;
use ctcx::transfer::read_checkpoint;
use ctcx::trainer::evaluate;
use serde_json::json;

use super::{load_data, trainer_error};
use crate::args::EvaluateArgs;
use crate::outcome::{Classify, CliError, CmdResult, Outcome};

pub fn run(args: &EvaluateArgs) -> CmdResult {
    let ck = read_checkpoint(&args.checkpoint)
        .with_context(|| format!("reading {}", args.checkpoint.display()))
        .data()?;
    let params = ck.params().data()?;
    let alphabet = ck.alphabet().data()?;
    let loaded = load_data(&args.manifest, args.features.as_deref(), &alphabet)?;
    if loaded.feature_config.n_mfcc != ck.config.feature_dim {
        return Err(CliError::data(format!(
            "features have {} coefficients, the model expects {}",
            loaded.feature_config.n_mfcc, ck.config.feature_dim
        )));
    }
    let stats = evaluate(&params, &ck.config, &loaded.dataset.utterances, args.decoder.decoder())
        .map_err(trainer_error)?;
    Ok(Outcome {
        summary: format!(
            "{} utterances: mean cost {:.4}, LER {:.4}{}",
            loaded.dataset.utterances.len(),
            stats.mean_cost,
            stats.ler,
            if loaded.dataset.dropped.is_empty() {
                String::new()
            } else {
                format!(" ({} rows excluded)", loaded.dataset.dropped.len())
            }
        ),
        json: json!({
            "utterances": loaded.dataset.utterances.len(),
            "excluded": loaded.dataset.dropped,
            "mean_cost": stats.mean_cost,
            "ler": stats.ler,
        }),
    })
}
