//! Generic dataset loading and class subsampling.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{knn_from_features, NeighborGraph};
use crate::model::PriorVector;
use crate::observed::LabelId;

use super::{empirical_prior, InstanceMetadata, ProblemInstance};

/// Class pseudocounts for loaded datasets.
#[derive(Clone, Debug)]
pub enum PriorSpec {
    /// One shared pseudocount for every target class.
    UniformTarget(f64),
    /// Explicit per-target-class pseudocounts (classes 2..=C).
    Targets(Vec<f64>),
    /// Rounded empirical class prevalences.
    Empirical,
}

/// What to load: a labels file plus either dense features (the k-NN graph is
/// built exactly, similarity `exp(-d^2)`) or a precomputed graph file.
#[derive(Clone, Debug)]
pub struct LoadSpec {
    pub labels: PathBuf,
    pub features: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub k: usize,
    pub prior: PriorSpec,
    /// Replace similarity weights with unit votes.
    pub unit_weights: bool,
}

fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let file = std::fs::File::open(path).map_err(|e| Error::MalformedFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut labels = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: u32 = t.parse().map_err(|_| Error::MalformedFile {
            path: path.display().to_string(),
            reason: format!("line {}: not an integer label: {t:?}", lineno + 1),
        })?;
        labels.push(v);
    }
    if labels.is_empty() {
        return Err(Error::MalformedFile {
            path: path.display().to_string(),
            reason: "no labels".into(),
        });
    }
    Ok(labels)
}

fn read_features_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::MalformedFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::MalformedFile {
                path: path.display().to_string(),
                reason: format!("line {}: non-numeric field", lineno + 1),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Loads a search problem from files. Labels are 1-based, one per line; the
/// number of classes is the maximum label.
pub fn load_dataset(spec: &LoadSpec) -> Result<ProblemInstance> {
    let raw = read_labels(&spec.labels)?;
    let num_classes = *raw.iter().max().expect("nonempty") as usize;
    if num_classes < 2 {
        return Err(Error::InvalidInstance(
            "labels define fewer than 2 classes".into(),
        ));
    }
    let labels: Vec<LabelId> = raw
        .iter()
        .map(|&v| LabelId::new(v, num_classes))
        .collect::<Result<_>>()?;
    let n = labels.len();

    let (graph, features) = match (&spec.features, &spec.graph) {
        (Some(fpath), None) => {
            let features = read_features_csv(fpath)?;
            if features.len() != n {
                return Err(Error::MalformedFile {
                    path: fpath.display().to_string(),
                    reason: format!("{} feature rows but {n} labels", features.len()),
                });
            }
            (knn_from_features(&features, spec.k)?, Some(features))
        }
        (None, Some(gpath)) => {
            let graph = NeighborGraph::load(gpath)?;
            if graph.num_points() != n {
                return Err(Error::MalformedFile {
                    path: gpath.display().to_string(),
                    reason: format!("graph has {} points but {n} labels", graph.num_points()),
                });
            }
            (graph, None)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "provide exactly one of a features file or a graph file".into(),
            ))
        }
    };

    let mut sizes = vec![0usize; num_classes];
    for l in &labels {
        sizes[l.index0()] += 1;
    }
    let prior = match &spec.prior {
        PriorSpec::UniformTarget(g) => PriorVector::uniform_targets(num_classes, *g)?,
        PriorSpec::Targets(ts) => {
            if ts.len() != num_classes - 1 {
                return Err(Error::InvalidConfig(format!(
                    "{} target pseudocounts for {} target classes",
                    ts.len(),
                    num_classes - 1
                )));
            }
            PriorVector::from_target_gammas(ts)?
        }
        PriorSpec::Empirical => empirical_prior(&sizes, n)?,
    };

    let metadata = InstanceMetadata {
        generator: "loaded".into(),
        params: serde_json::json!({
            "labels": spec.labels.display().to_string(),
            "features": spec.features.as_ref().map(|p| p.display().to_string()),
            "graph": spec.graph.as_ref().map(|p| p.display().to_string()),
            "k": spec.k,
            "unit_weights": spec.unit_weights,
        }),
        seed: 0,
        notes: vec![],
    };
    let instance = ProblemInstance::new(num_classes, labels, graph, prior, features, metadata)?;
    if spec.unit_weights {
        instance.with_unit_weights()
    } else {
        Ok(instance)
    }
}

/// Removes an exact uniformly chosen fraction of the named classes and
/// rebuilds the k-NN graph over the survivors. `fractions` maps a class to
/// the fraction kept; unnamed classes keep every point. The kept count is
/// `floor(fraction * class_size)`, so re-runs with one seed are exactly
/// reproducible.
pub fn subsample_classes(
    instance: &ProblemInstance,
    fractions: &[(LabelId, f64)],
    seed: u64,
) -> Result<ProblemInstance> {
    for &(_, f) in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "keep fraction must lie in (0, 1], got {f}"
            )));
        }
    }
    let features = instance.features.as_ref().ok_or_else(|| {
        Error::InvalidParams(
            "subsampling rebuilds the graph and needs an instance with features".into(),
        )
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = instance.num_points();
    let mut keep = vec![true; n];
    for &(class, fraction) in fractions {
        let members: Vec<usize> = (0..n)
            .filter(|&x| instance.oracle_label(x) == class)
            .collect();
        let target = (fraction * members.len() as f64).floor() as usize;
        if target == 0 {
            return Err(Error::InvalidParams(format!(
                "class {} would be emptied entirely",
                class.value()
            )));
        }
        let mut shuffled = members;
        shuffled.shuffle(&mut rng);
        for &x in &shuffled[target..] {
            keep[x] = false;
        }
    }
    let survivors: Vec<usize> = (0..n).filter(|&x| keep[x]).collect();
    let new_features: Vec<Vec<f64>> = survivors.iter().map(|&x| features[x].clone()).collect();
    let new_labels: Vec<LabelId> = survivors
        .iter()
        .map(|&x| instance.oracle_label(x))
        .collect();
    let k = instance.graph.k().min(new_features.len().saturating_sub(1));
    let graph = knn_from_features(&new_features, k)?;
    let mut metadata = instance.metadata.clone();
    metadata.notes.push(format!(
        "subsampled with seed {seed}: {:?}",
        fractions
            .iter()
            .map(|(c, f)| (c.value(), *f))
            .collect::<Vec<_>>()
    ));
    ProblemInstance::new(
        instance.num_classes(),
        new_labels,
        graph,
        instance.prior.clone(),
        Some(new_features),
        metadata,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::gen_unit_square;

    #[test]
    fn load_from_feature_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("labels.txt"), "1\n2\n1\n3\n").unwrap();
        std::fs::write(
            dir.path().join("features.csv"),
            "0.0,0.0\n1.0,0.0\n0.0,1.0\n1.0,1.0\n",
        )
        .unwrap();
        let spec = LoadSpec {
            labels: dir.path().join("labels.txt"),
            features: Some(dir.path().join("features.csv")),
            graph: None,
            k: 2,
            prior: PriorSpec::UniformTarget(0.05),
            unit_weights: false,
        };
        let inst = load_dataset(&spec).unwrap();
        assert_eq!(inst.num_points(), 4);
        assert_eq!(inst.num_classes(), 3);
        assert_eq!(inst.oracle_label(1).value(), 2);
        assert_eq!(inst.prior.gamma(), &[0.9, 0.05, 0.05]);

        // Write the graph and reload through the graph path.
        let gpath = dir.path().join("graph.txt");
        inst.graph.save(&gpath).unwrap();
        let spec2 = LoadSpec {
            labels: dir.path().join("labels.txt"),
            features: None,
            graph: Some(gpath),
            k: 2,
            prior: PriorSpec::UniformTarget(0.05),
            unit_weights: false,
        };
        let inst2 = load_dataset(&spec2).unwrap();
        assert_eq!(inst2.graph.num_edges(), inst.graph.num_edges());
        for x in 0..4 {
            assert_eq!(inst2.graph.neighbors(x), inst.graph.neighbors(x));
        }
    }

    #[test]
    fn load_rejects_malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("labels.txt"), "1\nfoo\n").unwrap();
        std::fs::write(dir.path().join("features.csv"), "0.0\n1.0\n").unwrap();
        let spec = LoadSpec {
            labels: dir.path().join("labels.txt"),
            features: Some(dir.path().join("features.csv")),
            graph: None,
            k: 1,
            prior: PriorSpec::Empirical,
            unit_weights: false,
        };
        assert!(load_dataset(&spec).is_err());

        // Row count mismatch.
        std::fs::write(dir.path().join("labels.txt"), "1\n2\n1\n").unwrap();
        assert!(load_dataset(&spec).is_err());

        // k >= n.
        std::fs::write(dir.path().join("labels.txt"), "1\n2\n").unwrap();
        let spec = LoadSpec {
            k: 2,
            ..spec
        };
        assert!(load_dataset(&spec).is_err());
    }

    #[test]
    fn subsample_identity_at_full_fraction() {
        let inst = gen_unit_square(300, 0.15, 0.1, 5, 1).unwrap();
        let out = subsample_classes(&inst, &[(LabelId::new(2, 6).unwrap(), 1.0)], 7).unwrap();
        assert_eq!(out.num_points(), inst.num_points());
        assert_eq!(out.true_labels(), inst.true_labels());
    }

    #[test]
    fn subsample_keeps_exact_floor_count() {
        let inst = gen_unit_square(2000, 0.15, 0.1, 5, 2).unwrap();
        let sizes = inst.class_sizes();
        let class2 = LabelId::new(2, 6).unwrap();
        let out = subsample_classes(&inst, &[(class2, 0.5)], 3).unwrap();
        let new_sizes = out.class_sizes();
        assert_eq!(new_sizes[1], sizes[1] / 2);
        // Other classes untouched.
        for c in [0usize, 2, 3, 4, 5] {
            assert_eq!(new_sizes[c], sizes[c], "class {}", c + 1);
        }
        // Reproducible for one seed, different for another.
        let again = subsample_classes(&inst, &[(class2, 0.5)], 3).unwrap();
        assert_eq!(out.true_labels(), again.true_labels());
    }

    #[test]
    fn subsample_rejects_emptying_and_bad_fractions() {
        let inst = gen_unit_square(300, 0.15, 0.1, 5, 1).unwrap();
        let class2 = LabelId::new(2, 6).unwrap();
        assert!(subsample_classes(&inst, &[(class2, 0.0)], 1).is_err());
        assert!(subsample_classes(&inst, &[(class2, 1.5)], 1).is_err());
        // A fraction small enough to floor to zero empties the class.
        assert!(subsample_classes(&inst, &[(class2, 1e-9)], 1).is_err());
    }
}
