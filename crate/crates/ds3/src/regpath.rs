//! Closed-form regularization thresholds and weight-sweep utilities.
//!
//! * [`lambda_max`] — the weight beyond which a single source row takes every
//!   target column.
//! * [`lambda_min`] — for square matrices whose diagonal dominates its
//!   column (every element is its own best encoder), the weight at or below
//!   which the solution is the identity.
//! * [`medoid`], [`check_joint_partition`], [`lambda_g`] — group machinery:
//!   when sources/targets split into well-separated groups, weights below
//!   `lambda_g` keep every target encoded strictly within its own group.
//! * [`sweep`] — solve along a grid of fractions of `lambda_max`, warm-
//!   starting each solve from the previous one.
//!
//! All threshold formulas need every entry, so these operations reject
//! matrices with unobserved entries.

use crate::error::{Error, Result};
use crate::matrix::{DissimilarityMatrix, NormP};
use crate::solver::{solve_rows, Solution, SolverSettings, WarmStart};

/// Output of [`lambda_max`].
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMaxResult {
    /// Weight above which the whole target set collapses onto one source.
    /// Zero when `degenerate` is set.
    pub lambda_max: f64,
    /// The surviving source: the row with the smallest sum (lowest index on
    /// ties).
    pub l_star: usize,
    /// Set when no competitor row distinguishes itself (single row,
    /// all rows identical, or — for p = 2 — no row with a positive
    /// row-sum gap), leaving the threshold undefined.
    pub degenerate: bool,
}

/// A joint grouping of source and target indices: `groups_x[k]` are the
/// sources allowed to encode the targets `groups_y[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    /// Pairwise-disjoint, nonempty source index sets (need not cover all
    /// sources).
    pub groups_x: Vec<Vec<usize>>,
    /// Disjoint, nonempty target index sets that together cover every
    /// target.
    pub groups_y: Vec<Vec<usize>>,
}

impl PartitionSpec {
    /// Checks structural validity against an M-source, N-target matrix.
    pub fn validate(&self, sources: usize, targets: usize) -> Result<()> {
        if self.groups_x.len() != self.groups_y.len() {
            return Err(Error::InvalidPartition(format!(
                "{} source groups but {} target groups",
                self.groups_x.len(),
                self.groups_y.len()
            )));
        }
        if self.groups_x.is_empty() {
            return Err(Error::InvalidPartition("at least one group is required".into()));
        }
        let mut seen_x = vec![false; sources];
        for (k, gx) in self.groups_x.iter().enumerate() {
            if gx.is_empty() {
                return Err(Error::InvalidPartition(format!("source group {k} is empty")));
            }
            for &i in gx {
                if i >= sources {
                    return Err(Error::InvalidPartition(format!(
                        "source group {k} references row {i}, but there are only {sources} rows"
                    )));
                }
                if seen_x[i] {
                    return Err(Error::InvalidPartition(format!(
                        "source {i} appears in more than one group"
                    )));
                }
                seen_x[i] = true;
            }
        }
        let mut seen_y = vec![false; targets];
        for (k, gy) in self.groups_y.iter().enumerate() {
            if gy.is_empty() {
                return Err(Error::InvalidPartition(format!("target group {k} is empty")));
            }
            for &j in gy {
                if j >= targets {
                    return Err(Error::InvalidPartition(format!(
                        "target group {k} references column {j}, but there are only {targets} columns"
                    )));
                }
                if seen_y[j] {
                    return Err(Error::InvalidPartition(format!(
                        "target {j} appears in more than one group"
                    )));
                }
                seen_y[j] = true;
            }
        }
        if let Some(j) = seen_y.iter().position(|&s| !s) {
            return Err(Error::InvalidPartition(format!(
                "target {j} is not covered by any group"
            )));
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.groups_x.len()
    }
}

/// The minimax center of a group: the source whose worst dissimilarity to
/// the group's targets is smallest.
#[derive(Debug, Clone, PartialEq)]
pub struct MedoidResult {
    /// Chosen source row (lowest index on ties).
    pub index: usize,
    /// Its worst dissimilarity over the group's targets.
    pub radius: f64,
}

/// One failed strict-separation inequality found by
/// [`check_joint_partition`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionViolation {
    /// Group whose medoid lost.
    pub group: usize,
    /// Target column where separation fails.
    pub target: usize,
    /// Dissimilarity from the group's medoid to that target.
    pub medoid_cost: f64,
    /// Smallest dissimilarity from any source *outside* the group to that
    /// target; must strictly exceed `medoid_cost` for separation.
    pub closest_cross: f64,
}

/// Outcome of [`check_joint_partition`].
#[derive(Debug, Clone)]
pub struct PartitionCheck {
    /// True when every in-group medoid beats every out-of-group source on
    /// every in-group target, strictly.
    pub ok: bool,
    /// Medoid of each group, in group order.
    pub medoids: Vec<MedoidResult>,
    /// Every failed inequality (empty when `ok`).
    pub violations: Vec<PartitionViolation>,
}

fn require_fully_observed(d: &DissimilarityMatrix, what: &str) -> Result<()> {
    if d.mask().is_some() {
        return Err(Error::InvalidArgument(format!(
            "{what} requires a fully observed dissimilarity matrix"
        )));
    }
    Ok(())
}

/// Smallest weight at which the solution can collapse onto a single source
/// row.
///
/// The candidate row `l_star` minimizes the row sum. For `p = ∞` the
/// threshold is `max_{i≠l*} ‖d_i − d_{l*}‖₁ / 2`; for `p = 2` it is
/// `max (√N/2)·‖d_i − d_{l*}‖₂² / Σ(d_i − d_{l*})` over competitors with a
/// strictly positive row-sum gap.
///
/// Below this weight no single-row solution is optimal, so it anchors
/// regularization sweeps as the scale on which all selection happens. It is a
/// lower bound only: each competitor row's optimality condition is checked
/// with its own subgradient, but at the collapsed point all rows must share
/// one, so matrices without a clearly cheapest row can keep several active
/// rows well above this weight. When some row is pointwise cheapest by a
/// margin `t`, the shared condition holds for any weight up to `t·N` (for
/// `p = ∞`) or `t·√N` (for `p = 2`), and weights in that window do collapse
/// the solution.
pub fn lambda_max(d: &DissimilarityMatrix, p: NormP) -> Result<LambdaMaxResult> {
    require_fully_observed(d, "the collapse threshold")?;
    let (m, n) = (d.rows(), d.cols());

    let mut l_star = 0usize;
    let mut best_sum = f64::INFINITY;
    for i in 0..m {
        let s: f64 = d.values().row(i).iter().sum();
        if s < best_sum {
            best_sum = s;
            l_star = i;
        }
    }
    let base = d.values().row(l_star).to_vec();

    let mut lambda = 0.0f64;
    let mut any_competitor = false;
    for i in 0..m {
        if i == l_star {
            continue;
        }
        let row = d.values().row(i);
        match p {
            NormP::PInf => {
                let gap_l1: f64 = row.iter().zip(&base).map(|(a, b)| (a - b).abs()).sum();
                if gap_l1 > 0.0 {
                    any_competitor = true;
                    lambda = lambda.max(gap_l1 / 2.0);
                }
            }
            NormP::P2 => {
                let sum_gap: f64 = row.iter().zip(&base).map(|(a, b)| a - b).sum();
                if sum_gap > 0.0 {
                    any_competitor = true;
                    let sq_gap: f64 = row.iter().zip(&base).map(|(a, b)| (a - b) * (a - b)).sum();
                    lambda = lambda.max((n as f64).sqrt() / 2.0 * sq_gap / sum_gap);
                }
            }
        }
    }
    if !any_competitor {
        return Ok(LambdaMaxResult { lambda_max: 0.0, l_star, degenerate: true });
    }
    Ok(LambdaMaxResult { lambda_max: lambda, l_star, degenerate: false })
}

/// Largest weight at or below which the solution of the square
/// source-equals-target program is the identity.
///
/// Requires every element to be its own strictly best encoder
/// (`d_jj < d_ij` for all `i ≠ j`) and returns `min_j (min_{i≠j} d_ij −
/// d_jj)`.
pub fn lambda_min(d: &DissimilarityMatrix) -> Result<f64> {
    require_fully_observed(d, "the identity threshold")?;
    let (m, n) = (d.rows(), d.cols());
    if m != n {
        return Err(Error::NotSquare { rows: m, cols: n });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "the identity threshold needs at least two elements".into(),
        ));
    }
    let mut lambda = f64::INFINITY;
    for j in 0..n {
        let djj = d.value(j, j);
        let mut closest = f64::INFINITY;
        for i in 0..m {
            if i == j {
                continue;
            }
            let dij = d.value(i, j);
            if dij <= djj {
                return Err(Error::SelfDissimilarityViolated { i, j, dij, djj });
            }
            closest = closest.min(dij);
        }
        lambda = lambda.min(closest - djj);
    }
    Ok(lambda)
}

/// Minimax center of the group `gx` with respect to the targets `gy`:
/// `argmin_{i∈gx} max_{j∈gy} d_ij`, lowest index on ties.
pub fn medoid(d: &DissimilarityMatrix, gx: &[usize], gy: &[usize]) -> Result<MedoidResult> {
    require_fully_observed(d, "medoid search")?;
    if gx.is_empty() || gy.is_empty() {
        return Err(Error::InvalidPartition(
            "medoid search needs nonempty source and target groups".into(),
        ));
    }
    for &i in gx {
        if i >= d.rows() {
            return Err(Error::InvalidPartition(format!(
                "source index {i} out of range for {} rows",
                d.rows()
            )));
        }
    }
    for &j in gy {
        if j >= d.cols() {
            return Err(Error::InvalidPartition(format!(
                "target index {j} out of range for {} columns",
                d.cols()
            )));
        }
    }
    let mut best_index = usize::MAX;
    let mut best_radius = f64::INFINITY;
    for &i in gx {
        let radius = gy.iter().map(|&j| d.value(i, j)).fold(f64::NEG_INFINITY, f64::max);
        if radius < best_radius || (radius == best_radius && i < best_index) {
            best_radius = radius;
            best_index = i;
        }
    }
    Ok(MedoidResult { index: best_index, radius: best_radius })
}

fn evaluate_partition(d: &DissimilarityMatrix, spec: &PartitionSpec) -> Result<(PartitionCheck, f64)> {
    require_fully_observed(d, "joint-partition analysis")?;
    spec.validate(d.rows(), d.cols())?;
    let medoids: Vec<MedoidResult> = spec
        .groups_x
        .iter()
        .zip(&spec.groups_y)
        .map(|(gx, gy)| medoid(d, gx, gy))
        .collect::<Result<_>>()?;

    let mut violations = Vec::new();
    let mut margin = f64::INFINITY;
    for k in 0..spec.len() {
        let ck = medoids[k].index;
        for &j in &spec.groups_y[k] {
            let own = d.value(ck, j);
            let mut cross = f64::INFINITY;
            for (k2, gx2) in spec.groups_x.iter().enumerate() {
                if k2 == k {
                    continue;
                }
                for &i in gx2 {
                    cross = cross.min(d.value(i, j));
                }
            }
            if !(own < cross) {
                violations.push(PartitionViolation {
                    group: k,
                    target: j,
                    medoid_cost: own,
                    closest_cross: cross,
                });
            }
            margin = margin.min(cross - own);
        }
    }
    let ok = violations.is_empty();
    Ok((PartitionCheck { ok, medoids, violations }, margin))
}

/// Tests the strict separation condition: each group's medoid must beat
/// every out-of-group source on every one of the group's targets.
pub fn check_joint_partition(d: &DissimilarityMatrix, spec: &PartitionSpec) -> Result<PartitionCheck> {
    Ok(evaluate_partition(d, spec)?.0)
}

/// The group-preservation threshold: for weights strictly below it, every
/// target is encoded only by sources from its own group. Infinite for a
/// single group (nothing to cross into).
pub fn lambda_g(d: &DissimilarityMatrix, spec: &PartitionSpec) -> Result<f64> {
    let (check, margin) = evaluate_partition(d, spec)?;
    if !check.ok {
        return Err(Error::PartitionCheckFailed { violations: check.violations.len() });
    }
    Ok(margin)
}

/// Solves once per `alpha·lambda_max(d, p)`, in the order given, feeding
/// each solve the previous one's iterates as a warm start. Each solve is
/// independently correct (the problem is convex); warm starts only speed
/// up convergence along the path.
pub fn sweep(
    d: &DissimilarityMatrix,
    p: NormP,
    alphas: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<Solution>> {
    for &a in alphas {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sweep fractions must be positive reals, got {a}"
            )));
        }
    }
    let top = lambda_max(d, p)?;
    let settings = SolverSettings { p, ..settings.clone() };
    let row_count = d.rows();
    let mut out: Vec<Solution> = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let lambda = a * top.lambda_max;
        let warm = out
            .last()
            .map(|prev| WarmStart { z: &prev.z_prox, c: &prev.z, dual: &prev.dual });
        let sol = solve_rows(d, &vec![lambda; row_count], &settings, warm)?;
        out.push(sol);
    }
    Ok(out)
}
