use std::fmt::Write as _;

use serde::Serialize;

use super::{split_dataset, train, MetricsRow, TrainConfig, TrainerError, Utterance};
use crate::network::{init_params, ModelConfig};
use crate::transfer::{transfer_weights, Checkpoint};
use crate::text_labels::Alphabet;

/// Column titles of the results table.
pub const TABLE_COLUMNS: [&str; 6] = [
    "RNN type",
    "Training cost",
    "Training LER",
    "Validation cost",
    "Validation LER",
    "Epochs",
];

/// Architecture shared by every scenario of the matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub hidden: usize,
    pub num_layers: usize,
    pub feature_dim: usize,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub label: String,
    pub bidirectional: bool,
    pub transfer: bool,
    /// Last metrics row.
    pub last: MetricsRow,
    pub epochs: usize,
    #[serde(skip)]
    pub history: Vec<MetricsRow>,
}

/// Relative gains of the transfer scenario over its baseline, in percent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Improvement {
    pub architecture: String,
    pub train_cost_pct: Option<f64>,
    pub train_ler_pct: Option<f64>,
    pub val_cost_pct: Option<f64>,
    pub val_ler_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub columns: Vec<String>,
    pub rows: Vec<ScenarioResult>,
    pub improvements: Vec<Improvement>,
    pub warnings: Vec<String>,
    pub split_sizes: [usize; 3],
}

/// `(baseline − transfer) / baseline` in percent; `None` for a zero baseline.
pub fn relative_improvement(baseline: f64, transfer: f64) -> Option<f64> {
    (baseline != 0.0 && baseline.is_finite() && transfer.is_finite())
        .then(|| 100.0 * (baseline - transfer) / baseline)
}

fn language_label(alphabet_name: &str) -> String {
    match alphabet_name {
        "ru" => "Russian".to_string(),
        "kk" => "Kazakh".to_string(),
        other => other.to_string(),
    }
}

fn arch_label(bidirectional: bool) -> &'static str {
    if bidirectional {
        "BiLSTM"
    } else {
        "LSTM"
    }
}

/// Trains {LSTM, BiLSTM} × {random, transfer} on one split of `data`.
///
/// Each source checkpoint is matched to the architecture with the same
/// directionality. Without a matching source, only the baseline row for that
/// architecture is produced and a warning is recorded. `on_scenario` receives
/// every finished scenario, e.g. to write its metrics log.
pub fn run_experiment_matrix(
    data: &[Utterance],
    alphabet: &Alphabet,
    sources: &[Checkpoint],
    cfg: &ExperimentConfig,
    mut on_scenario: impl FnMut(&ScenarioResult),
) -> Result<ExperimentReport, TrainerError> {
    cfg.train.validate()?;
    let (train_set, val_set, test_set) = split_dataset(data, cfg.train.split, cfg.train.seed)?;
    let mut rows = Vec::new();
    let mut improvements = Vec::new();
    let mut warnings = Vec::new();

    for bidirectional in [false, true] {
        let arch = arch_label(bidirectional);
        let model_cfg = ModelConfig {
            hidden: cfg.hidden,
            num_layers: cfg.num_layers,
            bidirectional,
            dropout_keep: cfg.train.dropout_keep,
            feature_dim: cfg.feature_dim,
            num_classes: alphabet.num_classes(),
            seed: cfg.train.seed,
        };
        let run = |init, label: String, transfer: bool| -> Result<ScenarioResult, TrainerError> {
            log::info!("training scenario {label}");
            let out = train(init, &model_cfg, &train_set, &val_set, &cfg.train, |_| true)?;
            let last = out.history.last().cloned().ok_or(TrainerError::EmptyData("epochs"))?;
            Ok(ScenarioResult {
                label,
                bidirectional,
                transfer,
                epochs: last.epoch,
                last,
                history: out.history,
            })
        };

        let baseline = run(init_params(&model_cfg)?, arch.to_string(), false)?;
        on_scenario(&baseline);

        let source = sources.iter().find(|s| s.config.bidirectional == bidirectional);
        let transferred = match source {
            Some(src) => {
                let (init, report) = transfer_weights(src, &model_cfg, alphabet, cfg.train.seed)?;
                log::info!("{arch}: copied {} tensors from {}", report.copied.len(), src.alphabet_name);
                let label = format!("{arch} with {} model", language_label(&src.alphabet_name));
                let r = run(init, label, true)?;
                on_scenario(&r);
                Some(r)
            }
            None => {
                let w = format!("no {arch} source checkpoint; skipping the {arch} transfer scenario");
                log::warn!("{w}");
                warnings.push(w);
                None
            }
        };

        if let Some(t) = &transferred {
            let b = &baseline.last;
            let t = &t.last;
            let opt = |x: Option<f64>, y: Option<f64>| x.zip(y).and_then(|(x, y)| relative_improvement(x, y));
            improvements.push(Improvement {
                architecture: arch.to_string(),
                train_cost_pct: relative_improvement(b.train_cost, t.train_cost),
                train_ler_pct: relative_improvement(b.train_ler, t.train_ler),
                val_cost_pct: opt(b.val_cost, t.val_cost),
                val_ler_pct: opt(b.val_ler, t.val_ler),
            });
        }
        rows.push(baseline);
        rows.extend(transferred);
    }

    Ok(ExperimentReport {
        columns: TABLE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        improvements,
        warnings,
        split_sizes: [train_set.len(), val_set.len(), test_set.len()],
    })
}

/// Tab-separated results table followed by the improvement lines.
pub fn render_table(report: &ExperimentReport) -> String {
    let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    let mut out = TABLE_COLUMNS.join("\t");
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{}",
            r.label,
            r.last.train_cost,
            r.last.train_ler,
            cell(r.last.val_cost),
            cell(r.last.val_ler),
            r.epochs
        );
    }
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.1}%"));
    for imp in &report.improvements {
        let _ = writeln!(
            out,
            "{} improvement: training cost {}, training LER {}, validation cost {}, validation LER {}",
            imp.architecture,
            pct(imp.train_cost_pct),
            pct(imp.train_ler_pct),
            pct(imp.val_cost_pct),
            pct(imp.val_ler_pct)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{synthetic_corpus, SyntheticSpec};

    #[test]
    fn improvement_from_reported_costs() {
        let pct = relative_improvement(18.366533, 13.924501).unwrap();
        assert!((pct - 24.185468210031804).abs() < 1e-9, "{pct}");
        assert_eq!(format!("{pct:.1}"), "24.2");
        assert_eq!(relative_improvement(0.0, 1.0), None);
    }

    fn small_setup() -> (Vec<Utterance>, Alphabet, ExperimentConfig) {
        let a = Alphabet::from_letters("toy", "абв").unwrap();
        let spec = SyntheticSpec {
            max_words: 1,
            max_word_len: 3,
            ..SyntheticSpec::default()
        };
        let data = synthetic_corpus(&a, &spec, 10, 5).unwrap();
        let cfg = ExperimentConfig {
            hidden: 4,
            num_layers: 2,
            feature_dim: 13,
            train: TrainConfig {
                epochs: 2,
                learning_rate: 0.01,
                ..TrainConfig::default()
            },
        };
        (data, a, cfg)
    }

    #[test]
    fn baselines_only_without_sources() {
        let (data, a, cfg) = small_setup();
        let report = run_experiment_matrix(&data, &a, &[], &cfg, |_| {}).unwrap();
        let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["LSTM", "BiLSTM"]);
        assert_eq!(report.warnings.len(), 2);
        assert!(report.improvements.is_empty());
        assert_eq!(report.split_sizes, [8, 1, 1]);
        let table = render_table(&report);
        assert!(table.starts_with("RNN type\tTraining cost\tTraining LER\tValidation cost\tValidation LER\tEpochs\n"));
    }

    #[test]
    fn four_scenarios_in_table_order() {
        let (data, a, cfg) = small_setup();
        let sources: Vec<Checkpoint> = [false, true]
            .into_iter()
            .map(|bidirectional| {
                let ru = Alphabet::builtin("ru").unwrap();
                let mc = ModelConfig {
                    hidden: 4,
                    num_layers: 2,
                    bidirectional,
                    dropout_keep: 0.5,
                    feature_dim: 13,
                    num_classes: ru.num_classes(),
                    seed: 3,
                };
                Checkpoint::from_params(&init_params(&mc).unwrap(), &mc, &ru).unwrap()
            })
            .collect();
        let mut seen = Vec::new();
        let report = run_experiment_matrix(&data, &a, &sources, &cfg, |s| seen.push(s.label.clone())).unwrap();
        let labels: Vec<&str> = report.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            ["LSTM", "LSTM with Russian model", "BiLSTM", "BiLSTM with Russian model"]
        );
        assert_eq!(seen, labels);
        assert_eq!(report.improvements.len(), 2);
        assert!(report.rows.iter().all(|r| r.epochs == 2 && r.history.len() == 2));
        let again = run_experiment_matrix(&data, &a, &sources, &cfg, |_| {}).unwrap();
        assert_eq!(report, again);
    }
}
