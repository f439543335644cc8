//! Plot-data emission: per-class discovery shares relative to uniform,
//! least-common-class counts, and cumulative-reward difference traces.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt_f64;

use super::RunRecord;

/// Per-target-class discovery share relative to a uniform target
/// distribution, in percentage points: `(share_c - 1/(C-1)) * 100`. Shares
/// are computed over all discoveries pooled across the records.
pub fn class_share_rows(records: &[RunRecord], num_classes: usize) -> Vec<(u32, f64)> {
    let mut totals = vec![0u64; num_classes];
    for r in records {
        for (cls, &count) in r.final_counts.iter().enumerate() {
            totals[cls] += count as u64;
        }
    }
    let discoveries: u64 = totals[1..].iter().sum();
    let uniform = 1.0 / (num_classes - 1) as f64;
    (2..=num_classes as u32)
        .map(|cls| {
            let share = if discoveries == 0 {
                uniform
            } else {
                totals[cls as usize - 1] as f64 / discoveries as f64
            };
            (cls, (share - uniform) * 100.0)
        })
        .collect()
}

/// Mean over records of the smallest per-target-class final count.
pub fn min_class_count(records: &[RunRecord]) -> f64 {
    let total: f64 = records
        .iter()
        .map(|r| *r.final_counts[1..].iter().min().expect("targets exist") as f64)
        .sum();
    total / records.len() as f64
}

/// Mean per-iteration difference between two policies' utility traces
/// (`a - b`), paired by repeat index.
pub fn reward_diff_trace(a: &[RunRecord], b: &[RunRecord]) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Stats(format!(
            "need matching nonempty record sets, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let len = a[0].trace.len();
    if a.iter().chain(b).any(|r| r.trace.len() != len) {
        return Err(Error::Stats("trace lengths differ".into()));
    }
    let mut diff = vec![0.0; len];
    for (ra, rb) in a.iter().zip(b) {
        for (i, d) in diff.iter_mut().enumerate() {
            *d += ra.trace[i] - rb.trace[i];
        }
    }
    diff.iter_mut().for_each(|d| *d /= a.len() as f64);
    Ok(diff)
}

/// Writes the three plot CSVs for grouped records:
/// `plot_class_shares.csv`, `plot_min_class.csv`, and (for the named policy
/// pair) `plot_reward_diff.csv`.
pub fn emit_plot_data(
    groups: &[(String, Vec<RunRecord>)],
    num_classes: usize,
    pair: Option<(&str, &str)>,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut shares = String::from("policy,class,relative_share_pct\n");
    for (id, records) in groups {
        for (cls, rel) in class_share_rows(records, num_classes) {
            shares.push_str(&format!("{id},{cls},{}\n", fmt_f64(rel)));
        }
    }
    std::fs::write(dir.join("plot_class_shares.csv"), shares)?;

    let mut mins = String::from("policy,mean_min_class_count\n");
    for (id, records) in groups {
        mins.push_str(&format!("{id},{}\n", fmt_f64(min_class_count(records))));
    }
    std::fs::write(dir.join("plot_min_class.csv"), mins)?;

    if let Some((a_id, b_id)) = pair {
        let find = |id: &str| {
            groups
                .iter()
                .find(|(g, _)| g == id)
                .map(|(_, rs)| rs.as_slice())
                .ok_or_else(|| Error::InvalidConfig(format!("no records for policy {id:?}")))
        };
        let diff = reward_diff_trace(find(a_id)?, find(b_id)?)?;
        let mut csv = String::from("iteration,mean_reward_diff\n");
        for (i, d) in diff.iter().enumerate() {
            csv.push_str(&format!("{i},{}\n", fmt_f64(*d)));
        }
        std::fs::write(dir.join("plot_reward_diff.csv"), csv)?;
    }
    Ok(())
}
