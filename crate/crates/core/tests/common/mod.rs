#![allow(dead_code)]

use std::path::{Path, PathBuf};

use stabflow::dataset::{self, Dataset, QcRow, Schema};

pub const FEATURES: [&str; 4] = ["f1", "f2", "f3", "f4"];

pub fn schema() -> Schema {
    Schema {
        features: FEATURES.iter().map(|s| s.to_string()).collect(),
        ..Schema::default()
    }
}

/// Three planted blobs with varied QC metadata, partial tags and a few
/// masked cells.
pub fn smoke_catalog(seed: u64) -> (Dataset, Vec<usize>) {
    let (ds, truth) = dataset::synth_planted(3, 40, 4, 8.0, 1.0, seed).unwrap();
    let n = ds.len();
    let meta: Vec<QcRow> = (0..n)
        .map(|i| QcRow {
            snr: 60.0 + ((i * 37) % 140) as f64,
            teff: 4400.0 + ((i * 11) % 200) as f64,
            logg: 1.0 + ((i * 13) % 25) as f64 / 10.0,
            vb: 1.0,
            starflag: Some(0),
        })
        .collect();
    let tags: Vec<Option<String>> = (0..n).map(|i| (i % 2 == 0).then(|| format!("G{}", truth[i]))).collect();
    let missing: Vec<bool> = (0..n * 4).map(|c| c % 17 == 5).collect();
    let ds = Dataset::new(
        ds.ids().to_vec(),
        tags,
        meta,
        ds.feature_names().to_vec(),
        ds.features().clone(),
        missing,
    )
    .unwrap();
    (ds, truth)
}

pub fn smoke_config() -> serde_json::Value {
    let cols: Vec<&str> = FEATURES.to_vec();
    serde_json::json!({
        "data": "catalog.csv",
        "schema": { "features": cols },
        "features": [
            { "name": "all4", "columns": cols },
            { "name": "first3", "columns": ["f1", "f2", "f3"] }
        ],
        "imputers": ["mean", "forest"],
        "forest_imputer": { "trees": 10, "max_iters": 3, "min_node_size": 5 },
        "clusterers": ["kmeans", "hc-ward", "spectral-10"],
        "ks": [2, 3, 4, 5],
        "B": 10,
        "classifier_trees": 20,
        "explore": {
            "perplexities": [10, 30],
            "retention_ks": [5, 10, 30],
            "plot_perplexity": 30,
            "plot_features": { "name": "all4", "columns": cols }
        },
        "sweep": { "snr_min": [50, 90], "logg_max": [3.0, 3.6] },
        "plot_cap": 60,
        "out": "run"
    })
}

/// Write the catalog and config into `dir`; returns the config path.
pub fn write_smoke(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let (ds, _) = smoke_catalog(3);
    dataset::write_catalog(&ds, &dir.join("catalog.csv"), &schema()).unwrap();
    let mut cfg = smoke_config();
    edit(&mut cfg);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stabflow")
}

/// Run the CLI; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}
