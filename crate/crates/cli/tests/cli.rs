use std::path::Path;
use std::process::{Command, Output};

use ctcx::frontend::{read_manifest, write_wav, AudioClip};
use ctcx::network::{init_params, ModelConfig};
use ctcx::text_labels::Alphabet;
use ctcx::transfer::{read_checkpoint, save_checkpoint};
use serde_json::Value;

fn ctcx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctcx"))
        .args(args)
        .env("CTCX_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn tone(seconds: f64, rate: u32) -> AudioClip {
    let n = (seconds * rate as f64) as usize;
    let samples = (0..n)
        .map(|i| 0.3 * (2.0 * std::f64::consts::PI * 300.0 * i as f64 / rate as f64).sin() as f32)
        .collect();
    AudioClip::new(samples, rate).unwrap()
}

fn synthetic(dir: &Path, alphabet: &str, count: &str) -> String {
    let manifest = dir.join("manifest.jsonl");
    let out = ctcx(&["prepare", "--alphabet", alphabet, "--synthetic", count, "--out", &p(&manifest)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    p(&manifest)
}

#[test]
fn help_succeeds_and_bad_flags_are_usage_errors() {
    assert_eq!(code(&ctcx(&["--help"])), 0);
    assert_eq!(code(&ctcx(&["train", "--help"])), 0);
    assert_eq!(code(&ctcx(&["--bogus"])), 1);
    assert_eq!(code(&ctcx(&["train", "--manifest", "m"])), 1);
    assert_eq!(code(&ctcx(&["decode", "--checkpoint", "c", "--wav", "w", "--beam-width", "0"])), 1);
}

#[test]
fn prepare_drops_unusable_rows_with_reasons() {
    let dir = tempfile::tempdir().unwrap();
    write_wav(dir.path().join("ok.wav"), &tone(1.0, 16_000)).unwrap();
    write_wav(dir.path().join("short.wav"), &tone(0.05, 16_000)).unwrap();
    write_wav(dir.path().join("slow.wav"), &tone(0.5, 8_000)).unwrap();
    let rows = [
        r#"{"audio":"ok.wav","text":"Кот, сидит!"}"#,
        r#"{"audio":"short.wav","text":"очень длинная фраза"}"#,
        r#"{"audio":"slow.wav","text":"да"}"#,
        r#"{"audio":"missing.wav","text":"нет"}"#,
        r#"{"audio":"ok.wav","text":"123"}"#,
        r#"{"audio":"ok.wav","text":"кот","duration_s":16.0}"#,
    ];
    let manifest = dir.path().join("raw.jsonl");
    std::fs::write(&manifest, rows.join("\n") + "\n").unwrap();
    let clean = dir.path().join("clean.jsonl");

    let out = ctcx(&["--json", "prepare", "--manifest", &p(&manifest), "--alphabet", "ru", "--out", &p(&clean)]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["kept"], 2);
    let reasons = &report["dropped_by_reason"];
    assert_eq!(reasons["ctc_infeasible"], 1);
    assert_eq!(reasons["audio"], 1);
    assert_eq!(reasons["empty_transcript"], 1);
    assert_eq!(reasons["duration"], 1);

    let kept = read_manifest(&clean).unwrap();
    assert_eq!(kept[0].text, "кот сидит");
    assert_eq!(kept[1].duration_s, Some(0.5));
}

#[test]
fn prepare_rejects_empty_and_fully_dropped_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = ctcx(&["prepare", "--manifest", &p(&empty), "--alphabet", "kk", "--out", &p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, r#"{"audio":"none.wav","text":"сәлем"}"#).unwrap();
    let out = ctcx(&["prepare", "--manifest", &p(&bad), "--alphabet", "kk", "--out", &p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("audio"));
}

#[test]
fn features_skip_current_caches() {
    let dir = tempfile::tempdir().unwrap();
    write_wav(dir.path().join("a.wav"), &tone(0.5, 16_000)).unwrap();
    write_wav(dir.path().join("b.wav"), &tone(0.5, 22_050)).unwrap();
    let manifest = dir.path().join("m.jsonl");
    std::fs::write(&manifest, "{\"audio\":\"a.wav\",\"text\":\"а\"}\n{\"audio\":\"b.wav\",\"text\":\"б\"}\n").unwrap();
    let features = dir.path().join("features");
    let args = ["--json", "features", "--manifest", &p(&manifest), "--out-dir", &p(&features)];

    let first: Value = serde_json::from_str(&stdout(&ctcx(&args))).unwrap();
    assert_eq!((first["computed"].as_u64(), first["skipped"].as_u64()), (Some(2), Some(0)));
    assert!(features.join("a.mfcc").exists() && features.join("feature_config.json").exists());
    let second: Value = serde_json::from_str(&stdout(&ctcx(&args))).unwrap();
    assert_eq!((second["computed"].as_u64(), second["skipped"].as_u64()), (Some(0), Some(2)));

    std::fs::write(&manifest, "{\"audio\":\"nope.wav\",\"text\":\"а\"}\n").unwrap();
    assert_eq!(code(&ctcx(&args)), 2);
}

#[test]
fn train_writes_outputs_and_evaluate_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), "kk", "12");
    let run = dir.path().join("run");
    let out = ctcx(&[
        "train", "--manifest", &manifest, "--alphabet", "kk", "--hidden", "8", "--layers", "1",
        "--epochs", "2", "--learning-rate", "0.01", "--out", &p(&run),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,train_cost,train_ler,val_cost,val_ler");
    assert_eq!(lines.len(), 3);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["split_sizes"], serde_json::json!([10, 1, 1]));

    let eval = ctcx(&["--json", "evaluate", "--checkpoint", &p(&run.join("model.ckpt")), "--manifest", &manifest]);
    assert_eq!(code(&eval), 0);
    let stats: Value = serde_json::from_str(&stdout(&eval)).unwrap();
    assert_eq!(stats["utterances"], 12);
    assert!(stats["ler"].as_f64().unwrap() >= 0.0);
}

#[test]
fn transfer_init_needs_a_compatible_source() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), "kk", "10");
    let base = ["train", "--manifest", &manifest, "--alphabet", "kk", "--epochs", "1", "--hidden", "16"];

    let mut args = base.to_vec();
    args.extend(["--init", "transfer", "--out", "x"]);
    assert_eq!(code(&ctcx(&args)), 1);

    let ru = Alphabet::builtin("ru").unwrap();
    let cfg = ModelConfig { hidden: 8, ..ModelConfig::new(13, ru.num_classes()) };
    let source = dir.path().join("ru.ckpt");
    save_checkpoint(&init_params(&cfg).unwrap(), &cfg, &ru, &source).unwrap();
    let src = p(&source);
    let mut args = base.to_vec();
    args.extend(["--init", "transfer", "--source-checkpoint", &src, "--out", "x"]);
    let out = ctcx(&args);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("hidden"));
}

#[test]
fn transfer_command_reports_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let ru = Alphabet::builtin("ru").unwrap();
    let cfg = ModelConfig { hidden: 8, bidirectional: true, ..ModelConfig::new(13, ru.num_classes()) };
    let source = dir.path().join("ru.ckpt");
    save_checkpoint(&init_params(&cfg).unwrap(), &cfg, &ru, &source).unwrap();
    let target = dir.path().join("kk.ckpt");

    let out = ctcx(&["transfer", "--source", &p(&source), "--target-alphabet", "kk", "--out", &p(&target)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ck = read_checkpoint(&target).unwrap();
    assert_eq!(ck.alphabet_name, "kk");
    assert_eq!(ck.tensor("dense.w").unwrap().shape, vec![44, 16]);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("kk.ckpt.report.json")).unwrap()).unwrap();
    assert_eq!(report["copied"].as_array().unwrap().len(), 12);
    assert_eq!(report["verification"]["max_abs_deviation"], 0.0);
    assert!(report["skipped_reason"]["dense.w"].as_str().unwrap().contains("35"));

    let out = ctcx(&["transfer", "--source", &p(&source), "--target-alphabet", "kk", "--hidden", "16", "--out", &p(&target)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn blank_biased_model_decodes_silence_to_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let kk = Alphabet::builtin("kk").unwrap();
    let cfg = ModelConfig { hidden: 4, num_layers: 1, ..ModelConfig::new(13, kk.num_classes()) };
    let mut params = init_params::<f32>(&cfg).unwrap();
    params.tensor_mut("dense.b").unwrap()[kk.blank_index()] = 50.0;
    let ckpt = dir.path().join("m.ckpt");
    save_checkpoint(&params, &cfg, &kk, &ckpt).unwrap();
    let wav = dir.path().join("silence.wav");
    write_wav(&wav, &AudioClip::new(vec![0.0; 8_000], 8_000).unwrap()).unwrap();

    for decoder in ["greedy", "beam"] {
        let out = ctcx(&["--json", "decode", "--checkpoint", &p(&ckpt), "--wav", &p(&wav), "--decoder", decoder]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let body: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(body["text"], "");
        assert_eq!(body["frames"], 98);
        assert!(String::from_utf8_lossy(&out.stderr).contains("resampled from 8000 Hz"));
    }

    let missing = ctcx(&["decode", "--checkpoint", &p(&ckpt), "--wav", &p(&dir.path().join("none.wav"))]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn experiment_without_sources_runs_baselines_only() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic(dir.path(), "kk", "10");
    let out_dir = dir.path().join("exp");
    let missing = dir.path().join("missing.ckpt");
    let out = ctcx(&[
        "experiment", "--manifest", &manifest, "--alphabet", "kk", "--hidden", "4", "--layers", "1",
        "--epochs", "1", "--source-checkpoint", &p(&missing), "--out", &p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    assert!(table.starts_with("RNN type\tTraining cost\tTraining LER\tValidation cost\tValidation LER\tEpochs"));
    assert!(table.contains("warning: no BiLSTM source checkpoint"));
    assert!(out_dir.join("lstm.csv").exists() && out_dir.join("bilstm.csv").exists());
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["report"]["rows"].as_array().unwrap().len(), 2);
}
