//! Synthetic planar search problems.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::knn_from_features;
use crate::observed::LabelId;

use super::{empirical_prior, InstanceMetadata, ProblemInstance};

/// Unit-square toy: points uniform in [0,1]^2 with one common target region
/// around the center (class 2) and four rare quarter-disk regions at the
/// corners (classes 3..=6, ordered (0,0), (1,0), (0,1), (1,1)); everything
/// else is the negative class. The k-NN graph uses Euclidean distance with
/// similarity `exp(-d^2)`, and pseudocounts default to rounded empirical
/// prevalences.
pub fn gen_unit_square(
    n: usize,
    r_center: f64,
    r_corner: f64,
    k: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    if !(r_center > 0.0 && r_center < 0.5) || !(r_corner > 0.0 && r_corner < 0.5) {
        return Err(Error::InvalidParams(format!(
            "radii must lie in (0, 0.5): r_center = {r_center}, r_corner = {r_corner}"
        )));
    }
    // The center disk and a corner quarter-disk must not intersect.
    let center_to_corner = (0.5f64 * 0.5 + 0.5 * 0.5).sqrt();
    if r_center + r_corner >= center_to_corner {
        return Err(Error::InvalidParams(format!(
            "regions overlap: r_center + r_corner = {} >= {center_to_corner}",
            r_center + r_corner
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let num_classes = 6;
    let labels: Vec<LabelId> = features
        .iter()
        .map(|p| LabelId::new(unit_square_label(p[0], p[1], r_center, r_corner), num_classes))
        .collect::<Result<_>>()?;
    if !labels.iter().any(|l| l.is_target()) {
        return Err(Error::InvalidInstance(
            "no target points drawn; increase n or radii".into(),
        ));
    }
    let graph = knn_from_features(&features, k)?;
    let mut sizes = vec![0usize; num_classes];
    for l in &labels {
        sizes[l.index0()] += 1;
    }
    let prior = empirical_prior(&sizes, n)?;
    let metadata = InstanceMetadata {
        generator: "unit_square".into(),
        params: serde_json::json!({
            "n": n, "r_center": r_center, "r_corner": r_corner, "k": k,
        }),
        seed,
        notes: vec![
            "region radii and n are defaults chosen for a common center class and rare corners"
                .into(),
        ],
    };
    ProblemInstance::new(num_classes, labels, graph, prior, Some(features), metadata)
}

pub(crate) fn unit_square_label(x: f64, y: f64, r_center: f64, r_corner: f64) -> u32 {
    let d2 = |cx: f64, cy: f64| (x - cx) * (x - cx) + (y - cy) * (y - cy);
    if d2(0.5, 0.5) <= r_center * r_center {
        return 2;
    }
    let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
    for (i, &(cx, cy)) in corners.iter().enumerate() {
        if d2(cx, cy) <= r_corner * r_corner {
            return 3 + i as u32;
        }
    }
    1
}

/// Generic planar multi-class instance: `num_classes - 1` disk-shaped target
/// regions at random centers, sized so each covers roughly an equal share of
/// the square. Used by the approximation-quality benchmark, which only needs
/// a realistic posterior landscape for an arbitrary class count.
pub fn gen_disks(n: usize, num_classes: usize, k: usize, seed: u64) -> Result<ProblemInstance> {
    if num_classes < 2 {
        return Err(Error::InvalidParams("need at least 2 classes".into()));
    }
    let targets = num_classes - 1;
    // Half the square split among target disks.
    let radius = (0.5 / (targets as f64) / std::f64::consts::PI).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<(f64, f64)> = (0..targets)
        .map(|_| (rng.gen_range(0.15..0.85), rng.gen_range(0.15..0.85)))
        .collect();
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let labels: Vec<LabelId> = features
        .iter()
        .map(|p| {
            let mut lab = 1;
            for (i, &(cx, cy)) in centers.iter().enumerate() {
                let d2 = (p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy);
                if d2 <= radius * radius {
                    lab = 2 + i as u32;
                    break;
                }
            }
            LabelId::new(lab, num_classes)
        })
        .collect::<Result<_>>()?;
    let graph = knn_from_features(&features, k)?;
    let mut sizes = vec![0usize; num_classes];
    for l in &labels {
        sizes[l.index0()] += 1;
    }
    let prior = empirical_prior(&sizes, n)?;
    let metadata = InstanceMetadata {
        generator: "disks".into(),
        params: serde_json::json!({ "n": n, "num_classes": num_classes, "k": k }),
        seed,
        notes: vec![],
    };
    ProblemInstance::new(num_classes, labels, graph, prior, Some(features), metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_labels_at_landmarks() {
        assert_eq!(unit_square_label(0.5, 0.5, 0.15, 0.1), 2);
        assert_eq!(unit_square_label(0.0, 0.0, 0.15, 0.1), 3);
        assert_eq!(unit_square_label(1.0, 0.0, 0.15, 0.1), 4);
        assert_eq!(unit_square_label(0.0, 1.0, 0.15, 0.1), 5);
        assert_eq!(unit_square_label(1.0, 1.0, 0.15, 0.1), 6);
        assert_eq!(unit_square_label(0.25, 0.75, 0.15, 0.1), 1);
    }

    #[test]
    fn rejects_bad_radii() {
        assert!(gen_unit_square(100, 0.6, 0.1, 5, 0).is_err());
        assert!(gen_unit_square(100, 0.4, 0.4, 5, 0).is_err()); // overlap
    }

    #[test]
    fn deterministic_given_seed() {
        let a = gen_unit_square(200, 0.15, 0.1, 5, 42).unwrap();
        let b = gen_unit_square(200, 0.15, 0.1, 5, 42).unwrap();
        assert_eq!(a.true_labels(), b.true_labels());
        assert_eq!(a.features, b.features);
        let c = gen_unit_square(200, 0.15, 0.1, 5, 43).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn prevalences_approach_region_areas() {
        let n = 20000;
        let inst = gen_unit_square(n, 0.15, 0.10, 5, 7).unwrap();
        let sizes = inst.class_sizes();
        let center_area = std::f64::consts::PI * 0.15 * 0.15;
        let corner_area = std::f64::consts::PI * 0.10 * 0.10 / 4.0;
        let center_prev = sizes[1] as f64 / n as f64;
        assert!(
            (center_prev - center_area).abs() < 0.01,
            "center prevalence {center_prev} vs area {center_area}"
        );
        for c in 2..6 {
            let prev = sizes[c] as f64 / n as f64;
            assert!(
                (prev - corner_area).abs() < 0.005,
                "corner {c} prevalence {prev} vs area {corner_area}"
            );
        }
        // The center class is roughly an order of magnitude more common.
        assert!(sizes[1] > 5 * sizes[2]);
    }

    #[test]
    fn disks_cover_all_classes_at_scale() {
        let inst = gen_disks(1500, 5, 10, 3).unwrap();
        let sizes = inst.class_sizes();
        assert_eq!(sizes.len(), 5);
        for (c, &s) in sizes.iter().enumerate() {
            assert!(s > 0, "class {} empty", c + 1);
        }
    }
}
