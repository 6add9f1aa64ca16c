#![allow(dead_code)]

use std::path::{Path, PathBuf};

use alpp_core::dataset::FeatureSpec;
use alpp_core::{ExperimentConfig, FeatureSchema, TrainConfig};

pub const FEATURES: [&str; 8] = ["age", "hours", "score", "x3", "x4", "x5", "color", "size"];

pub fn schema() -> FeatureSchema {
    let mut features: Vec<FeatureSpec> = FEATURES[..6].iter().map(|n| FeatureSpec::numeric(*n)).collect();
    features.push(FeatureSpec::categorical("color", ["red", "green", "blue"]));
    features.push(FeatureSpec::categorical("size", ["s", "m", "l"]));
    FeatureSchema {
        features,
        label: "y".into(),
        positive_label: "yes".into(),
        negative_label: "no".into(),
    }
}

/// Integer-valued synthetic rows with a noisy linear label. `age` only takes
/// 20, 45 and 70.
pub fn write_csv(dir: &Path, rows: usize) -> PathBuf {
    let mut state: u64 = 0x2545_F491_4F6C_DD1D;
    let mut next = move |m: u64| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state % m
    };
    let mut text = String::from("age,hours,score,x3,x4,x5,color,size,y,ignored\n");
    for _ in 0..rows {
        let age = [20, 45, 70][next(3) as usize];
        let hours = 10 + next(50);
        let score = next(100);
        let x3 = next(10);
        let x4 = next(10);
        let x5 = next(10);
        let color = next(3);
        let size = next(3);
        let z = (age as f64 - 45.0) / 25.0 * 1.5 + (hours as f64 - 35.0) / 25.0 + (score as f64 - 50.0) / 50.0 * 2.0
            - 0.3 * color as f64
            + (next(1000) as f64 / 1000.0 - 0.5) * 1.5;
        let y = if z > 0.4 { "yes" } else { "no" };
        text.push_str(&format!(
            "{age},{hours},{score},{x3},{x4},{x5},{},{},{y},junk\n",
            ["red", "green", "blue"][color as usize],
            ["s", "m", "l"][size as usize]
        ));
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn config(csv: &Path, queries: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(csv, schema());
    cfg.queries = queries;
    cfg.repetitions = 1;
    cfg.seeds = Some(vec![7]);
    let fast = TrainConfig {
        learning_rate: 1.0,
        epochs: 150,
        l2_penalty: 1e-4,
        init_seed: 0,
    };
    cfg.learner = fast;
    cfg.committee.epochs = 150;
    cfg.committee.learning_rate = 1.0;
    cfg.oracle = TrainConfig { epochs: 800, ..fast };
    cfg
}
