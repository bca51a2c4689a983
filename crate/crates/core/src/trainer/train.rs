use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{momentum_step, Decoder, OptimizerState, TrainConfig, TrainerError, Utterance};
use crate::ctc::{ctc_forward_backward, LerAccumulator};
use crate::network::{backward, forward, log_softmax, ModelConfig, ModelParams};
use crate::tensor::Matrix;

/// Header of the per-epoch metrics log.
pub const METRICS_HEADER: &str = "epoch,train_cost,train_ler,val_cost,val_ler";

const DROPOUT_SALT: u64 = 0xD80F_0C7A_5EED_0001;

/// One line of the metrics log. Validation fields are `None` when there is
/// no validation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_cost: f64,
    pub train_ler: f64,
    pub val_cost: Option<f64>,
    pub val_ler: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochStats {
    /// Mean CTC loss per utterance.
    pub mean_cost: f64,
    /// Mean over batches of the summed batch loss.
    pub batch_sum_cost: f64,
    pub ler: f64,
    pub steps: usize,
    pub skipped_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalStats {
    pub mean_cost: f64,
    pub ler: f64,
}

struct Pass {
    cost: f64,
    ler: LerAccumulator,
    grads: Option<ModelParams<f32>>,
}

fn run_utterance(
    params: &ModelParams<f32>,
    cfg: &ModelConfig,
    utt: &Utterance,
    train_mode: bool,
    dropout_seed: u64,
    decoder: Decoder,
) -> Result<Pass, TrainerError> {
    let (logits, cache) = forward(params, cfg, &utt.features, train_mode, dropout_seed)?;
    let log_probs = log_softmax(&logits.cast::<f64>());
    let ctc = ctc_forward_backward(&log_probs, utt.labels.ids())?;
    if !ctc.feasible {
        return Err(TrainerError::Infeasible(utt.id.clone()));
    }
    let mut ler = LerAccumulator::default();
    ler.add(utt.labels.ids(), &decoder.decode(&log_probs));
    let grads = if train_mode {
        Some(backward(params, cfg, &cache, &ctc.dlogits.cast())?)
    } else {
        None
    };
    Ok(Pass {
        cost: ctc.neg_log_likelihood,
        ler,
        grads,
    })
}

/// The model config with the training keep probability applied.
fn effective(model_cfg: &ModelConfig, cfg: &TrainConfig) -> ModelConfig {
    ModelConfig {
        dropout_keep: cfg.dropout_keep,
        ..model_cfg.clone()
    }
}

/// One pass over `data` in a seeded random order, one optimizer step per
/// batch. Per-utterance work runs in parallel; reductions follow batch order
/// so results do not depend on the thread count.
pub fn train_epoch(
    params: &mut ModelParams<f32>,
    model_cfg: &ModelConfig,
    state: &mut OptimizerState<f32>,
    data: &[Utterance],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats, TrainerError> {
    if data.is_empty() {
        return Err(TrainerError::EmptyData("training set"));
    }
    let mcfg = effective(model_cfg, cfg);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(epoch as u64);
    order.shuffle(&mut shuffle_rng);

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_SALT);
    dropout_rng.set_stream(if cfg.fixed_dropout_seed { 0 } else { epoch as u64 + 1 });
    let dropout_seeds: Vec<u64> = (0..data.len()).map(|_| dropout_rng.next_u64()).collect();

    let mut costs = vec![0.0; data.len()];
    let mut ler = LerAccumulator::default();
    let mut batch_sums = Vec::new();
    let steps_before = (state.steps, state.skipped);
    for batch in order.chunks(cfg.batch_size) {
        let passes: Vec<Result<Pass, TrainerError>> = batch
            .par_iter()
            .map(|&i| run_utterance(params, &mcfg, &data[i], true, dropout_seeds[i], Decoder::Greedy))
            .collect();
        let mut grads = ModelParams::zeros(&mcfg);
        let mut batch_sum = 0.0;
        for (&i, pass) in batch.iter().zip(passes) {
            let pass = pass?;
            grads.add_scaled(pass.grads.as_ref().expect("train mode"), 1.0);
            costs[i] = pass.cost;
            batch_sum += pass.cost;
            ler.merge(pass.ler);
        }
        batch_sums.push(batch_sum);
        grads.scale(1.0 / batch.len() as f32);
        momentum_step(params, &mut grads, state, cfg.learning_rate, cfg.momentum, cfg.grad_clip_norm);
    }
    Ok(EpochStats {
        mean_cost: costs.iter().sum::<f64>() / data.len() as f64,
        batch_sum_cost: batch_sums.iter().sum::<f64>() / batch_sums.len() as f64,
        ler: ler.rate()?,
        steps: state.steps - steps_before.0,
        skipped_steps: state.skipped - steps_before.1,
    })
}

/// Eval-mode mean cost and corpus LER.
pub fn evaluate(
    params: &ModelParams<f32>,
    model_cfg: &ModelConfig,
    data: &[Utterance],
    decoder: Decoder,
) -> Result<EvalStats, TrainerError> {
    if data.is_empty() {
        return Err(TrainerError::EmptyData("evaluation set"));
    }
    let passes: Vec<Result<Pass, TrainerError>> = data
        .par_iter()
        .map(|u| run_utterance(params, model_cfg, u, false, 0, decoder))
        .collect();
    let mut cost = 0.0;
    let mut ler = LerAccumulator::default();
    for p in passes {
        let p = p?;
        cost += p.cost;
        ler.merge(p.ler);
    }
    Ok(EvalStats {
        mean_cost: cost / data.len() as f64,
        ler: ler.rate()?,
    })
}

/// Eval-mode transcription of one feature matrix, as label ids.
pub fn transcribe(
    params: &ModelParams<f32>,
    model_cfg: &ModelConfig,
    features: &Matrix<f32>,
    decoder: Decoder,
) -> Result<Vec<usize>, TrainerError> {
    let (logits, _) = forward(params, model_cfg, features, false, 0)?;
    Ok(decoder.decode(&log_softmax(&logits.cast::<f64>())))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub history: Vec<MetricsRow>,
    /// Per-epoch mean summed batch loss, alongside `history`.
    pub batch_sum_costs: Vec<f64>,
    pub skipped_steps: usize,
}

/// Trains for `cfg.epochs` epochs, evaluating on `val` after each one.
/// `observer` sees every row and may stop training early by returning `false`.
pub fn train(
    params: ModelParams<f32>,
    model_cfg: &ModelConfig,
    train_set: &[Utterance],
    val_set: &[Utterance],
    cfg: &TrainConfig,
    mut observer: impl FnMut(&MetricsRow) -> bool,
) -> Result<TrainOutcome, TrainerError> {
    cfg.validate()?;
    model_cfg.validate()?;
    params.check_shapes(model_cfg)?;
    let mut params = params;
    let mut state = OptimizerState::new(model_cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_sum_costs = Vec::with_capacity(cfg.epochs);
    let mut skipped_steps = 0;
    for epoch in 1..=cfg.epochs {
        let stats = train_epoch(&mut params, model_cfg, &mut state, train_set, cfg, epoch)?;
        skipped_steps += stats.skipped_steps;
        let val = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&params, model_cfg, val_set, cfg.eval_decoder)?)
        };
        let row = MetricsRow {
            epoch,
            train_cost: stats.mean_cost,
            train_ler: stats.ler,
            val_cost: val.map(|v| v.mean_cost),
            val_ler: val.map(|v| v.ler),
        };
        log::info!(
            "epoch {epoch}: train cost {:.4} (batch-sum {:.4}) ler {:.4}{}",
            stats.mean_cost,
            stats.batch_sum_cost,
            stats.ler,
            val.map_or(String::new(), |v| format!(", val cost {:.4} ler {:.4}", v.mean_cost, v.ler))
        );
        batch_sum_costs.push(stats.batch_sum_cost);
        let keep_going = observer(&row);
        history.push(row);
        if !keep_going {
            break;
        }
    }
    Ok(TrainOutcome {
        params,
        history,
        batch_sum_costs,
        skipped_steps,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Metrics log contents. Floats use shortest round-trip formatting, so equal
/// runs give byte-identical files.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            r.train_cost,
            r.train_ler,
            fmt_opt(r.val_cost),
            fmt_opt(r.val_ler)
        );
    }
    out
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<(), TrainerError> {
    std::fs::write(path, metrics_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_params;
    use crate::text_labels::Alphabet;
    use crate::trainer::{synthetic_corpus, SyntheticSpec};

    fn setup(n: usize) -> (Vec<Utterance>, ModelConfig, Alphabet) {
        let a = Alphabet::from_letters("toy", "абв").unwrap();
        let spec = SyntheticSpec {
            max_words: 1,
            max_word_len: 3,
            ..SyntheticSpec::default()
        };
        let data = synthetic_corpus(&a, &spec, n, 1).unwrap();
        let mut cfg = ModelConfig::new(13, a.num_classes());
        cfg.hidden = 6;
        cfg.bidirectional = true;
        (data, cfg, a)
    }

    #[test]
    fn zero_learning_rate_keeps_cost() {
        let (data, mc, _) = setup(5);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            fixed_dropout_seed: true,
            ..TrainConfig::default()
        };
        let p = init_params(&mc).unwrap();
        let out = train(p.clone(), &mc, &data, &[], &cfg, |_| true).unwrap();
        assert_eq!(out.params, p);
        let costs: Vec<f64> = out.history.iter().map(|r| r.train_cost).collect();
        assert!(costs.iter().all(|&c| c == costs[0]), "{costs:?}");
    }

    #[test]
    fn single_utterance_single_batch() {
        let (data, mc, _) = setup(1);
        let mut p = init_params(&mc).unwrap();
        let mut state = OptimizerState::new(&mc);
        let cfg = TrainConfig::default();
        let stats = train_epoch(&mut p, &mc, &mut state, &data, &cfg, 1).unwrap();
        assert_eq!(stats.steps, 1);
        assert_eq!(stats.mean_cost, stats.batch_sum_cost);
    }

    #[test]
    fn runs_are_reproducible_and_thread_independent() {
        let (data, mc, _) = setup(6);
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let out = train(init_params(&mc).unwrap(), &mc, &data[..4], &data[4..], &cfg, |_| true).unwrap();
                (metrics_csv(&out.history), out.params)
            })
        };
        let (a, pa) = run(1);
        let (b, pb) = run(4);
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert!(a.starts_with("epoch,train_cost,train_ler,val_cost,val_ler\n1,"));
    }

    #[test]
    fn evaluation_is_deterministic_and_untrained_models_fail() {
        let kk = Alphabet::builtin("kk").unwrap();
        let data = synthetic_corpus(&kk, &SyntheticSpec::default(), 8, 2).unwrap();
        let mut mc = ModelConfig::new(13, kk.num_classes());
        mc.hidden = 8;
        let p = init_params(&mc).unwrap();
        let a = evaluate(&p, &mc, &data, Decoder::Greedy).unwrap();
        let b = evaluate(&p, &mc, &data, Decoder::Greedy).unwrap();
        assert_eq!(a, b);
        assert!(a.ler >= 0.9, "untrained LER {}", a.ler);
    }

    #[test]
    fn observer_can_stop() {
        let (data, mc, _) = setup(4);
        let cfg = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        let out = train(init_params(&mc).unwrap(), &mc, &data, &[], &cfg, |r| r.epoch < 2).unwrap();
        assert_eq!(out.history.len(), 2);
        assert!(metrics_csv(&out.history).lines().nth(1).unwrap().ends_with(",,"));
    }
}
