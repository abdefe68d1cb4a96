//! Post-solve interpretation: which sources were selected, and which
//! representative serves each target.
//!
//! * [`extract_representatives`] — rows of the solution whose ℓ∞ norm
//!   clears a relative threshold.
//! * [`hard_assign`] — each target goes to its nearest representative.
//! * [`soft_assign`] — the solution restricted to representative rows and
//!   renormalized per column, read as assignment probabilities.
//! * [`clustering_error`] — mislabel percentage under the best bijection
//!   between predicted and true label alphabets.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, DissimilarityMatrix, NormP};
use crate::solver::row_norm;

/// Default relative row-norm threshold for [`extract_representatives`]:
/// far below any real per-group mass, comfortably above solver noise at the
/// default convergence threshold.
pub const DEFAULT_REP_THRESHOLD: f64 = 0.01;

/// Sources selected by a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeSet {
    /// Selected source rows, ascending.
    pub indices: Vec<usize>,
    /// ℓ∞ norm of every source row of the solution (not just the selected
    /// ones), for inspection and re-thresholding.
    pub row_norms: Vec<f64>,
}

/// Hard and soft target-to-representative assignments.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// For each target, the representative source index chosen by nearest
    /// dissimilarity.
    pub hard: Vec<usize>,
    /// Column-stochastic matrix supported on representative rows.
    pub soft: DenseMatrix,
}

/// Rows of `z` whose ℓ∞ norm exceeds `threshold_fraction` times the largest
/// row norm.
pub fn extract_representatives(
    z: &DenseMatrix,
    threshold_fraction: f64,
) -> Result<RepresentativeSet> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "extraction threshold must lie strictly between 0 and 1, got {threshold_fraction}"
        )));
    }
    let row_norms: Vec<f64> = (0..z.rows()).map(|i| row_norm(NormP::PInf, z.row(i))).collect();
    let max_norm = row_norms.iter().fold(0.0f64, |a, &b| a.max(b));
    if max_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot extract representatives from an all-zero solution".into(),
        ));
    }
    let cutoff = threshold_fraction * max_norm;
    let indices = (0..z.rows()).filter(|&i| row_norms[i] > cutoff).collect();
    Ok(RepresentativeSet { indices, row_norms })
}

fn validate_reps(reps: &[usize], rows: usize) -> Result<()> {
    if reps.is_empty() {
        return Err(Error::InvalidArgument(
            "assignment needs at least one representative".into(),
        ));
    }
    for &i in reps {
        if i >= rows {
            return Err(Error::InvalidArgument(format!(
                "representative index {i} out of range for {rows} rows"
            )));
        }
    }
    Ok(())
}

fn nearest_rep(d: &DissimilarityMatrix, reps: &[usize], j: usize) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &i in reps {
        if !d.is_observed(i, j) {
            continue;
        }
        let v = d.value(i, j);
        best = match best {
            None => Some((v, i)),
            Some((bv, bi)) if v < bv || (v == bv && i < bi) => Some((v, i)),
            keep => keep,
        };
    }
    best.map(|(_, i)| i).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "target {j} has no observed dissimilarity to any representative"
        ))
    })
}

/// Maps every target to its nearest representative (lowest index on ties),
/// considering only observed dissimilarities.
pub fn hard_assign(d: &DissimilarityMatrix, reps: &[usize]) -> Result<Vec<usize>> {
    validate_reps(reps, d.rows())?;
    (0..d.cols()).map(|j| nearest_rep(d, reps, j)).collect()
}

/// Restricts `z` to the representative rows and renormalizes each column to
/// sum to 1. A column with no mass on any representative falls back to a
/// one-hot at its nearest representative, which is why the dissimilarities
/// are needed.
pub fn soft_assign(
    z: &DenseMatrix,
    d: &DissimilarityMatrix,
    reps: &[usize],
) -> Result<DenseMatrix> {
    assert_eq!(
        (d.rows(), d.cols()),
        (z.rows(), z.cols()),
        "dissimilarity and coefficient shapes must agree"
    );
    validate_reps(reps, z.rows())?;
    let (m, n) = (z.rows(), z.cols());
    let mut out = DenseMatrix::zeros(m, n)?;
    for j in 0..n {
        let mass: f64 = reps.iter().map(|&i| z.get(i, j)).sum();
        if mass > 0.0 {
            for &i in reps {
                out.set(i, j, z.get(i, j) / mass);
            }
        } else {
            out.set(nearest_rep(d, reps, j)?, j, 1.0);
        }
    }
    Ok(out)
}

/// Convenience bundle of [`hard_assign`] and [`soft_assign`].
pub fn assign(z: &DenseMatrix, d: &DissimilarityMatrix, reps: &[usize]) -> Result<Assignment> {
    Ok(Assignment { hard: hard_assign(d, reps)?, soft: soft_assign(z, d, reps)? })
}

/// Percentage of positions left mismatched by the best one-to-one matching
/// between the two label alphabets. Exact (assignment solved by subset
/// dynamic programming), so alphabets are capped at 20 labels.
pub fn clustering_error(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "label sequences differ in length: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("cannot score empty labelings".into()));
    }
    let index_of = |labels: &[usize]| -> HashMap<usize, usize> {
        let mut map = HashMap::new();
        for &l in labels {
            let next = map.len();
            map.entry(l).or_insert(next);
        }
        map
    };
    let pred_ids = index_of(predicted);
    let truth_ids = index_of(truth);
    let (kp, kt) = (pred_ids.len(), truth_ids.len());
    let cap = 20;
    if kp > cap || kt > cap {
        return Err(Error::TooLarge(format!(
            "optimal label matching supports at most {cap} labels per side, got {kp} and {kt}"
        )));
    }

    // Agreement counts, with the smaller alphabet on the first axis so the
    // subset DP runs over the larger one.
    let swap = kp > kt;
    let (small, large) = if swap { (kt, kp) } else { (kp, kt) };
    let mut counts = vec![0u32; small * large];
    for (&p, &t) in predicted.iter().zip(truth) {
        let (a, b) = (pred_ids[&p], truth_ids[&t]);
        let (s, l) = if swap { (b, a) } else { (a, b) };
        counts[s * large + l] += 1;
    }

    // dp[mask]: best agreement after assigning the first popcount(mask)
    // small labels to the distinct large labels in `mask`.
    let full = 1usize << large;
    let mut dp = vec![0u32; full];
    let mut best = 0u32;
    for mask in 1..full {
        let k = mask.count_ones() as usize;
        if k > small {
            continue;
        }
        let row = &counts[(k - 1) * large..k * large];
        let mut value = 0u32;
        let mut bits = mask;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            value = value.max(dp[mask & !(1 << b)] + row[b]);
        }
        dp[mask] = value;
        if k == small {
            best = best.max(value);
        }
    }
    let n = predicted.len() as f64;
    Ok(100.0 * (n - f64::from(best)) / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regpath::{lambda_g, PartitionSpec};
    use crate::solver::{solve, SolverSettings};

    fn dm(rows: usize, cols: usize, data: Vec<f64>) -> DissimilarityMatrix {
        DissimilarityMatrix::new(DenseMatrix::from_vec(rows, cols, data).unwrap())
    }

    fn zm(rows: usize, cols: usize, data: Vec<f64>) -> DenseMatrix {
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn extraction_keeps_rows_above_the_relative_cutoff() {
        let single = zm(2, 2, vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(extract_representatives(&single, 0.01).unwrap().indices, vec![0]);

        let eye = zm(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(extract_representatives(&eye, 0.01).unwrap().indices, vec![0, 1, 2]);

        let z = zm(3, 2, vec![1.0, 0.5, 0.004, 0.001, 0.7, 0.2]);
        let reps = extract_representatives(&z, 0.01).unwrap();
        assert_eq!(reps.indices, vec![0, 2], "0.004 falls below 0.01 x max norm 1");
        assert_eq!(reps.row_norms, vec![1.0, 0.004, 0.7]);
    }

    #[test]
    fn extraction_guards_all_zero_and_bad_thresholds() {
        let zero = zm(2, 2, vec![0.0; 4]);
        assert!(matches!(extract_representatives(&zero, 0.01), Err(Error::InvalidArgument(_))));
        let z = zm(1, 1, vec![1.0]);
        for bad in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(
                matches!(extract_representatives(&z, bad), Err(Error::InvalidArgument(_))),
                "threshold {bad} must be rejected"
            );
        }
    }

    #[test]
    fn hard_assignment_picks_nearest_with_low_index_ties() {
        let d = dm(2, 2, vec![0.0, 5.0, 5.0, 0.0]);
        assert_eq!(hard_assign(&d, &[0, 1]).unwrap(), vec![0, 1], "diagonal minima");
        assert_eq!(hard_assign(&d, &[1]).unwrap(), vec![1, 1], "single representative takes all");

        // Targets equidistant to representatives 1 and 3.
        let d = dm(4, 2, vec![9.0, 9.0, 2.0, 2.0, 9.0, 9.0, 2.0, 2.0]);
        assert_eq!(hard_assign(&d, &[3, 1]).unwrap(), vec![1, 1], "ties break to the lowest index");
    }

    #[test]
    fn hard_assignment_respects_the_observation_mask() {
        let dense = zm(2, 2, vec![0.1, 0.9, 0.5, 0.2]);
        let d = DissimilarityMatrix::with_mask(dense, vec![false, true, true, true]).unwrap();
        assert_eq!(
            hard_assign(&d, &[0, 1]).unwrap(),
            vec![1, 1],
            "unobserved (0,0) leaves row 1 as target 0's only candidate"
        );
        let err = hard_assign(&d, &[0]).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "target 0 unreachable from rep 0 alone");
    }

    #[test]
    fn hard_assignment_ignores_dissimilarity_scale() {
        let data = vec![0.3, 0.8, 0.6, 0.9, 0.1, 0.7];
        let base = hard_assign(&dm(3, 2, data.clone()), &[0, 2]).unwrap();
        let scaled = hard_assign(&dm(3, 2, data.iter().map(|v| v * 37.0).collect()), &[0, 2]).unwrap();
        assert_eq!(base, scaled);
    }

    #[test]
    fn soft_assignment_renormalizes_over_representatives() {
        let d = dm(3, 1, vec![0.1, 0.2, 0.3]);
        let z = zm(3, 1, vec![0.6, 0.39, 0.01]);
        let soft = soft_assign(&z, &d, &[0, 1]).unwrap();
        assert_eq!(soft.get(0, 0), 0.6 / 0.99);
        assert_eq!(soft.get(1, 0), 0.39 / 0.99);
        assert_eq!(soft.get(2, 0), 0.0, "non-representative rows are cleared");
        let sum: f64 = (0..3).map(|i| soft.get(i, 0)).sum();
        assert!((sum - 1.0).abs() < 1e-9);

        let supported = zm(2, 2, vec![0.75, 0.25, 0.25, 0.75]);
        let d2 = dm(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let out = soft_assign(&supported, &d2, &[0, 1]).unwrap();
        assert_eq!(out.as_slice(), supported.as_slice(), "already-normalized columns pass through");
    }

    #[test]
    fn soft_assignment_falls_back_to_one_hot_on_empty_columns() {
        let d = dm(2, 2, vec![0.4, 0.9, 0.6, 0.2]);
        let z = zm(2, 2, vec![1.0, 0.0, 0.0, 0.0]); // column 1 has no mass anywhere
        let soft = soft_assign(&z, &d, &[0, 1]).unwrap();
        assert_eq!(soft.get(0, 1), 0.0);
        assert_eq!(soft.get(1, 1), 1.0, "nearest representative (0.2 < 0.9) gets the whole column");
    }

    #[test]
    fn solved_separated_blocks_recover_their_partition_exactly() {
        // Within each block the first row strictly dominates (radius 1 vs 2),
        // so the solve concentrates each group on a single representative.
        let d = dm(
            4,
            4,
            vec![
                0.0, 1.0, 10.0, 10.0,
                2.0, 0.0, 10.0, 10.0,
                10.0, 10.0, 0.0, 1.0,
                10.0, 10.0, 2.0, 0.0,
            ],
        );
        let spec = PartitionSpec {
            groups_x: vec![vec![0, 1], vec![2, 3]],
            groups_y: vec![vec![0, 1], vec![2, 3]],
        };
        let lg = lambda_g(&d, &spec).unwrap();
        let sol = solve(&d, 0.9 * lg, &SolverSettings::default()).unwrap();
        let reps = extract_representatives(&sol.z, DEFAULT_REP_THRESHOLD).unwrap();
        let hard = hard_assign(&d, &reps.indices).unwrap();
        let truth = vec![0usize, 0, 1, 1];
        assert_eq!(clustering_error(&hard, &truth).unwrap(), 0.0, "hard labels {:?}", hard);

        let soft = soft_assign(&sol.z, &d, &reps.indices).unwrap();
        for j in 0..4 {
            let sum: f64 = (0..4).map(|i| soft.get(i, j)).sum();
            assert!((sum - 1.0).abs() <= 1e-9, "soft column {j} sums to 1, got {sum}");
        }
    }

    #[test]
    fn label_matching_absorbs_permutations_and_counts_leftovers() {
        assert_eq!(clustering_error(&[3, 3, 7, 7], &[3, 3, 7, 7]).unwrap(), 0.0);
        assert_eq!(clustering_error(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(clustering_error(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap(), 25.0);
        // Different alphabet sizes: best match still leaves one position out.
        assert_eq!(clustering_error(&[0, 0, 1, 2], &[5, 5, 9, 9]).unwrap(), 25.0);
    }

    #[test]
    fn label_matching_guards_inputs() {
        assert!(matches!(clustering_error(&[0, 1], &[0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(clustering_error(&[], &[]), Err(Error::InvalidArgument(_))));
        let wide: Vec<usize> = (0..21).collect();
        assert!(matches!(clustering_error(&wide, &wide), Err(Error::TooLarge(_))));
    }

    #[test]
    fn assignment_bundle_agrees_with_its_parts() {
        let d = dm(2, 3, vec![0.1, 0.9, 0.5, 0.8, 0.2, 0.5]);
        let z = zm(2, 3, vec![0.9, 0.1, 0.5, 0.1, 0.9, 0.5]);
        let reps = [0usize, 1];
        let bundle = assign(&z, &d, &reps).unwrap();
        assert_eq!(bundle.hard, hard_assign(&d, &reps).unwrap());
        assert_eq!(bundle.soft.as_slice(), soft_assign(&z, &d, &reps).unwrap().as_slice());
        assert_eq!(bundle.hard, vec![0, 1, 0], "tie on target 2 breaks to row 0");
    }
}
