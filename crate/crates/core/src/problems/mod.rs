//! Search-space construction: generators, a dataset loader, and class
//! subsampling.

pub mod hardness;
mod loader;
mod synthetic;

pub use hardness::{gen_hardness, HardnessAnnotation, HardnessParams, ScriptedOracle};
pub use loader::{load_dataset, subsample_classes, LoadSpec, PriorSpec};
pub use synthetic::{gen_disks, gen_unit_square};

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NeighborGraph;
use crate::model::PriorVector;
use crate::observed::LabelId;

/// Provenance of a generated or loaded instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceMetadata {
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// An immutable search space: points, hidden true labels, the neighbor
/// graph, and class pseudocounts. True labels act as the oracle and must
/// never be read by policies; the harness reveals them one query at a time.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    num_classes: usize,
    true_labels: Vec<LabelId>,
    pub graph: Arc<NeighborGraph>,
    pub prior: PriorVector,
    /// Dense feature rows when the instance came from coordinates; needed to
    /// rebuild the graph after subsampling.
    pub features: Option<Vec<Vec<f64>>>,
    pub metadata: InstanceMetadata,
}

impl ProblemInstance {
    pub fn new(
        num_classes: usize,
        true_labels: Vec<LabelId>,
        graph: NeighborGraph,
        prior: PriorVector,
        features: Option<Vec<Vec<f64>>>,
        metadata: InstanceMetadata,
    ) -> Result<Self> {
        if graph.num_points() != true_labels.len() {
            return Err(Error::InvalidInstance(format!(
                "graph has {} points but {} labels",
                graph.num_points(),
                true_labels.len()
            )));
        }
        if prior.num_classes() != num_classes {
            return Err(Error::InvalidInstance(format!(
                "prior has {} classes, expected {num_classes}",
                prior.num_classes()
            )));
        }
        if true_labels
            .iter()
            .any(|l| l.value() as usize > num_classes)
        {
            return Err(Error::InvalidInstance("label out of range".into()));
        }
        if !true_labels.iter().any(|l| l.is_target()) {
            return Err(Error::InvalidInstance(
                "instance contains no target points".into(),
            ));
        }
        if let Some(f) = &features {
            if f.len() != true_labels.len() {
                return Err(Error::InvalidInstance("feature row count mismatch".into()));
            }
        }
        Ok(Self {
            num_classes,
            true_labels,
            graph: Arc::new(graph),
            prior,
            features,
            metadata,
        })
    }

    pub fn num_points(&self) -> usize {
        self.true_labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// The oracle: reveals the true label of a point. Policies must only see
    /// this through the harness.
    pub fn oracle_label(&self, x: usize) -> LabelId {
        self.true_labels[x]
    }

    pub fn true_labels(&self) -> &[LabelId] {
        &self.true_labels
    }

    pub fn target_points(&self) -> Vec<usize> {
        (0..self.num_points())
            .filter(|&x| self.true_labels[x].is_target())
            .collect()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_classes];
        for l in &self.true_labels {
            sizes[l.index0()] += 1;
        }
        sizes
    }

    /// Copy of the instance with all edge weights replaced by 1 (indicator
    /// neighbor votes instead of similarity-weighted ones).
    pub fn with_unit_weights(&self) -> Result<Self> {
        let n = self.graph.num_points();
        let lists = (0..n)
            .map(|x| {
                self.graph
                    .neighbors(x)
                    .iter()
                    .map(|&(dst, _)| (dst as usize, 1.0))
                    .collect()
            })
            .collect();
        let graph = NeighborGraph::new(lists, self.graph.k())?;
        let mut metadata = self.metadata.clone();
        metadata.notes.push("unit weights".into());
        Ok(Self {
            num_classes: self.num_classes,
            true_labels: self.true_labels.clone(),
            graph: Arc::new(graph),
            prior: self.prior.clone(),
            features: self.features.clone(),
            metadata,
        })
    }

    /// Writes `labels.txt`, `graph.txt`, `meta.json`, and `features.csv`
    /// (when present) into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut labels = String::new();
        for l in &self.true_labels {
            labels.push_str(&l.value().to_string());
            labels.push('\n');
        }
        std::fs::write(dir.join("labels.txt"), labels)?;
        self.graph.save(&dir.join("graph.txt"))?;
        if let Some(f) = &self.features {
            let mut csv = String::new();
            for row in f {
                let line: Vec<String> = row.iter().map(|v| crate::fmt_f64(*v)).collect();
                csv.push_str(&line.join(","));
                csv.push('\n');
            }
            std::fs::write(dir.join("features.csv"), csv)?;
        }
        let meta = serde_json::json!({
            "generator": self.metadata.generator,
            "params": self.metadata.params,
            "seed": self.metadata.seed,
            "notes": self.metadata.notes,
            "n": self.num_points(),
            "num_classes": self.num_classes,
            "gamma": self.prior.gamma(),
        });
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

/// Clamps empirical class prevalences into valid pseudocounts: rounded to 3
/// decimals, floored at 0.001 so every class keeps positive prior mass, with
/// the negative class absorbing the remainder.
pub(crate) fn empirical_prior(class_sizes: &[usize], n: usize) -> Result<PriorVector> {
    let targets: Vec<f64> = class_sizes[1..]
        .iter()
        .map(|&s| {
            let g = (s as f64 / n as f64 * 1000.0).round() / 1000.0;
            g.max(0.001)
        })
        .collect();
    PriorVector::from_target_gammas(&targets)
}
