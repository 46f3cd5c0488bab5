use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::metrics::{chance_accuracy, chance_hits, chance_map, ClassMetrics, CANDIDATES, HITS_KS};

/// Result of one evaluation run, serialized as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `genre`, `style`, `melody`, or `zeroshot-genre` / `zeroshot-style`.
    pub task: String,
    pub metrics: BTreeMap<String, f64>,
    pub per_class: Vec<ClassMetrics>,
    pub sample_count: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// SHA-256 of a model's serialized configuration.
pub fn config_hash(config_json: &str) -> String {
    hex::encode(Sha256::digest(config_json.as_bytes()))
}

pub fn hits_key(k: usize) -> String {
    format!("hits@{k}")
}

impl EvalReport {
    pub fn new(
        task: impl Into<String>,
        sample_count: usize,
        seed: u64,
        config_hash: String,
    ) -> Self {
        Self {
            task: task.into(),
            metrics: BTreeMap::new(),
            per_class: Vec::new(),
            sample_count,
            seed,
            config_hash,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Plain-text results table with the model row above the chance row.
    pub fn summary_table(&self, model_name: &str) -> String {
        let mut out = format!("task: {} ({} samples)\n", self.task, self.sample_count);
        let m = |k: &str| self.metrics.get(k).copied().unwrap_or(f64::NAN);
        if self.metrics.contains_key("map") {
            let header: Vec<String> = HITS_KS
                .iter()
                .map(|&k| format!("{:>8}", format!("HITS@{k}")))
                .collect();
            let _ = writeln!(out, "{:<14}{:>8}{}", "Model", "MAP", header.concat());
            let model: Vec<String> = HITS_KS
                .iter()
                .map(|&k| format!("{:>8.3}", m(&hits_key(k))))
                .collect();
            let _ = writeln!(out, "{:<14}{:>8.3}{}", model_name, m("map"), model.concat());
            let chance: Vec<String> = HITS_KS
                .iter()
                .map(|&k| format!("{:>8.3}", chance_hits(k, CANDIDATES)))
                .collect();
            let _ = writeln!(
                out,
                "{:<14}{:>8.3}{}",
                "Chance",
                chance_map(CANDIDATES),
                chance.concat()
            );
        } else {
            let _ = writeln!(out, "{:<14}{:>12}", "Model", "Weighted F1");
            let _ = writeln!(out, "{:<14}{:>12.3}", model_name, m("weighted_f1"));
            if !self.per_class.is_empty() {
                let _ = writeln!(
                    out,
                    "{:<14}{:>12.3}",
                    "Chance",
                    chance_accuracy(self.per_class.len())
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn melody_table_has_chance_row() {
        let mut r = EvalReport::new("melody", 3, 0, config_hash("{}"));
        r.metrics.insert("map".into(), 0.5);
        for k in HITS_KS {
            r.metrics.insert(hits_key(k), 1.0);
        }
        let t = r.summary_table("Transformer");
        assert!(
            t.contains("Chance           0.090   0.020   0.100   0.200   0.500"),
            "{t}"
        );
        assert_eq!(r.config_hash.len(), 64);
    }
}
