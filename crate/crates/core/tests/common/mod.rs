#![allow(dead_code)]

use std::path::{Path, PathBuf};

use densify::config::PipelineConfig;
use densify::corpus::write_csv;
use densify::synth::{generate, SynthConfig};

/// Overrides that keep a full run to a second or two.
pub const SMALL: &[&str] = &[
    "tfidf.max_features=300",
    "boost.stages=4",
    "boost.max_depth=2",
    "models.random_forest.trees=8",
    "models.random_forest.max_depth=6",
    "models.mlp2.hidden=16",
    "models.mlp2.epochs=3",
];

pub fn synth_csv(dir: &Path, rows: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("synth_{rows}_{seed}.csv"));
    let ds = generate(&SynthConfig {
        n_docs: rows,
        seed,
        ..Default::default()
    })
    .unwrap();
    write_csv(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

pub fn config_text(dataset: &Path, out: &Path, scenario: &str) -> String {
    format!(
        "[dataset]\npath = {:?}\n[split]\nseed = 7\n[run]\nscenario = {scenario:?}\noutput_dir = {:?}\n",
        dataset.display().to_string(),
        out.display().to_string()
    )
}

pub fn small_config(dataset: &Path, out: &Path, scenario: &str, extra: &[&str]) -> PipelineConfig {
    let overrides: Vec<String> = SMALL.iter().chain(extra).map(|s| s.to_string()).collect();
    PipelineConfig::from_toml_str(&config_text(dataset, out, scenario), &overrides).unwrap()
}
