mod decode;
mod evaluate;
mod experiment;
mod features;
mod prepare;
mod train;
mod transfer;

use std::path::{Path, PathBuf};

use anyhow::Context;
use ctcx::frontend::{read_manifest, FeatureConfig};
use ctcx::text_labels::Alphabet;
use ctcx::trainer::{load_dataset, Dataset, TrainerError};
use serde::Serialize;

pub use decode::run as decode;
pub use evaluate::run as evaluate;
pub use experiment::run as experiment;
pub use features::run as features;
pub use prepare::run as prepare;
pub use train::run as train;
pub use transfer::run as transfer;

use crate::outcome::{Classify, CliError};

/// Written next to the feature caches so later commands read them with the
/// settings they were built with.
pub const FEATURE_CONFIG_FILE: &str = "feature_config.json";

/// A built-in alphabet name, or a path to an alphabet file.
pub fn resolve_alphabet(name: &str) -> Result<Alphabet, CliError> {
    let path = Path::new(name);
    if path.is_file() {
        return Alphabet::load(path)
            .with_context(|| format!("reading alphabet {name}"))
            .data();
    }
    Alphabet::builtin(name).map_err(|e| CliError::usage(format!("{e} (not a file either)")))
}

pub fn manifest_dir(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Manifest audio paths are relative to the manifest's directory.
pub fn resolve_audio(manifest: &Path, audio: &str) -> PathBuf {
    let p = Path::new(audio);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_dir(manifest).join(p)
    }
}

pub fn features_dir(manifest: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| manifest_dir(manifest).join("features"))
}

pub fn read_feature_config(path: &Path) -> Result<FeatureConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading feature config {}", path.display()))
        .data()?;
    let cfg: FeatureConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing feature config {}", path.display()))
        .data()?;
    cfg.validate().data()?;
    Ok(cfg)
}

/// The config stored in a feature directory, or the default when absent.
pub fn feature_config_in(dir: &Path) -> Result<FeatureConfig, CliError> {
    let path = dir.join(FEATURE_CONFIG_FILE);
    if path.exists() {
        read_feature_config(&path)
    } else {
        Ok(FeatureConfig::default())
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).runtime()?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .runtime()
}

/// Bad inputs exit with the data code; everything else is a runtime failure.
pub fn trainer_error(e: TrainerError) -> CliError {
    let data = matches!(
        e,
        TrainerError::TooFewRows { .. }
            | TrainerError::EmptyData(_)
            | TrainerError::Infeasible(_)
            | TrainerError::Frontend(_)
            | TrainerError::Text(_)
            | TrainerError::Transfer(_)
    );
    let err = anyhow::Error::new(e);
    if data {
        CliError { code: crate::outcome::EXIT_DATA, error: err }
    } else {
        CliError { code: crate::outcome::EXIT_RUNTIME, error: err }
    }
}

/// Manifest rows with their cached features, ready for training.
pub struct LoadedData {
    pub dataset: Dataset,
    pub feature_config: FeatureConfig,
    pub rows: usize,
}

pub fn load_data(
    manifest: &Path,
    features: Option<&Path>,
    alphabet: &Alphabet,
) -> Result<LoadedData, CliError> {
    let dir = features_dir(manifest, features);
    let feature_config = feature_config_in(&dir)?;
    let rows = read_manifest(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))
        .data()?;
    if rows.is_empty() {
        return Err(CliError::data(format!("manifest {} is empty", manifest.display())));
    }
    let dataset = load_dataset(&rows, &dir, alphabet, &feature_config).map_err(trainer_error)?;
    if dataset.utterances.is_empty() {
        return Err(CliError::data(format!(
            "none of the {} manifest rows could be loaded from {}",
            rows.len(),
            dir.display()
        )));
    }
    Ok(LoadedData {
        dataset,
        feature_config,
        rows: rows.len(),
    })
}
