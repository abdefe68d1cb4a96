//! Projection and proximal primitives for the alternating solver.
//!
//! Three families of operations, all in place on row/column slices:
//!
//! * block soft-thresholding (`prox_row_l2`) — the proximal map of `t·‖·‖₂`;
//! * max-norm shrinkage (`prox_row_linf`) — the proximal map of `t·‖·‖_∞`,
//!   computed through its Moreau pair `project_l1_ball`;
//! * probability-simplex projection (`project_simplex`, plus a masked
//!   variant that pins unobserved coordinates to zero).
//!
//! All functions are pure with respect to everything but their `v` argument
//! and a caller-provided [`Workspace`], so they can run concurrently on
//! disjoint rows or columns.

use crate::error::{Error, Result};
use crate::matrix::NormP;

/// Reusable scratch buffers so the hot per-row/per-column loops never
/// allocate. Each worker thread owns one.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    sorted: Vec<f64>,
    gathered: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// In-place proximal map of `t·‖·‖₂`: scales `v` toward the origin by
/// `1 − t/‖v‖₂`, or zeroes it when `‖v‖₂ ≤ t`.
pub fn prox_row_l2(v: &mut [f64], t: f64) {
    assert!(t >= 0.0, "threshold must be nonnegative, got {t}");
    if t == 0.0 {
        return;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= t {
        v.fill(0.0);
    } else {
        let scale = 1.0 - t / norm;
        for x in v.iter_mut() {
            *x *= scale;
        }
    }
}

/// In-place proximal map of `t·‖·‖_∞` via the Moreau decomposition
/// `v = prox(v) + project_l1_ball(v, t)`. Zeroes the row when `‖v‖₁ ≤ t`.
pub fn prox_row_linf(v: &mut [f64], t: f64, ws: &mut Workspace) {
    assert!(t >= 0.0, "threshold must be nonnegative, got {t}");
    if t == 0.0 {
        return;
    }
    let sum_abs: f64 = v.iter().map(|x| x.abs()).sum();
    if sum_abs <= t {
        v.fill(0.0);
        return;
    }
    let Workspace { sorted, gathered } = ws;
    gathered.clear();
    gathered.extend_from_slice(v);
    l1_ball_inner(v, t, sorted);
    for (x, &orig) in v.iter_mut().zip(gathered.iter()) {
        *x = orig - *x;
    }
}

/// Dispatches to the row prox for the requested norm.
pub fn prox_row(p: NormP, v: &mut [f64], t: f64, ws: &mut Workspace) {
    match p {
        NormP::P2 => prox_row_l2(v, t),
        NormP::PInf => prox_row_linf(v, t, ws),
    }
}

/// In-place Euclidean projection onto the ℓ1 ball of the given radius.
/// Leaves `v` untouched (bit-exact) when it is already inside the ball.
pub fn project_l1_ball(v: &mut [f64], radius: f64, ws: &mut Workspace) {
    assert!(radius >= 0.0, "ball radius must be nonnegative, got {radius}");
    if radius == 0.0 {
        v.fill(0.0);
        return;
    }
    let sum_abs: f64 = v.iter().map(|x| x.abs()).sum();
    if sum_abs <= radius {
        return;
    }
    l1_ball_inner(v, radius, &mut ws.sorted);
}

/// In-place Euclidean projection onto the probability simplex
/// `{x : x ≥ 0, Σx = 1}` by the deterministic sort-and-threshold method.
pub fn project_simplex(v: &mut [f64], ws: &mut Workspace) {
    assert!(!v.is_empty(), "cannot project an empty vector onto the simplex");
    simplex_inner(v, 1.0, &mut ws.sorted);
}

/// Simplex projection restricted to the observed coordinates: unobserved
/// entries are forced to exactly 0 and the observed sub-vector is projected
/// onto the simplex of its own dimension.
pub fn project_simplex_masked(v: &mut [f64], observed: &[bool], ws: &mut Workspace) -> Result<()> {
    assert_eq!(v.len(), observed.len(), "mask length must match vector length");
    let n_obs = observed.iter().filter(|&&o| o).count();
    if n_obs == 0 {
        return Err(Error::InvalidArgument(
            "cannot project a fully unobserved column onto the simplex".into(),
        ));
    }
    if n_obs == v.len() {
        simplex_inner(v, 1.0, &mut ws.sorted);
        return Ok(());
    }
    let Workspace { sorted, gathered } = ws;
    gathered.clear();
    gathered.extend(v.iter().zip(observed).filter(|(_, &o)| o).map(|(x, _)| *x));
    simplex_inner(gathered, 1.0, sorted);
    let mut kept = gathered.iter();
    for (x, &o) in v.iter_mut().zip(observed) {
        *x = if o { *kept.next().expect("gathered length matches mask") } else { 0.0 };
    }
    Ok(())
}

/// Shared core: clamp-at-threshold projection onto `{x ≥ 0, Σx = radius}`.
/// `radius` must be positive and `v` nonempty.
fn simplex_inner(v: &mut [f64], radius: f64, sorted: &mut Vec<f64>) {
    if poison_if_non_finite(v) {
        return;
    }
    sorted.clear();
    sorted.extend_from_slice(v);
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let theta = clamp_threshold(sorted, radius);
    for x in v.iter_mut() {
        // Branch instead of `max` so clamped entries are exactly +0.0.
        *x = if *x > theta { *x - theta } else { 0.0 };
    }
}

/// ℓ1-ball projection core for `‖v‖₁ > radius`: project magnitudes onto the
/// scaled simplex and restore signs, mapping vanished entries to +0.0.
fn l1_ball_inner(v: &mut [f64], radius: f64, sorted: &mut Vec<f64>) {
    if poison_if_non_finite(v) {
        return;
    }
    sorted.clear();
    sorted.extend(v.iter().map(|x| x.abs()));
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let theta = clamp_threshold(sorted, radius);
    for x in v.iter_mut() {
        let mag = x.abs();
        *x = if mag > theta { (mag - theta) * x.signum() } else { 0.0 };
    }
}

/// A projection of a vector with an overflowed or undefined coordinate has no
/// meaningful answer; fills `v` with NaN (returning true) so callers see an
/// explicitly poisoned result instead of a silently wrong one. The solver's
/// residual check turns that poison into a numeric-failure error.
fn poison_if_non_finite(v: &mut [f64]) -> bool {
    if v.iter().all(|x| x.is_finite()) {
        return false;
    }
    v.fill(f64::NAN);
    true
}

/// Given magnitudes sorted in descending order, returns the threshold θ such
/// that `x_i = max(v_i − θ, 0)` lands on `{x ≥ 0, Σx = radius}`. Feasibility
/// of prefix length k is monotone, so the scan stops at the first failure.
fn clamp_threshold(sorted_desc: &[f64], radius: f64) -> f64 {
    debug_assert!(radius > 0.0);
    let mut cum = 0.0;
    let mut theta = f64::NEG_INFINITY;
    for (k, &u) in sorted_desc.iter().enumerate() {
        cum += u;
        let candidate = (cum - radius) / (k + 1) as f64;
        if u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    debug_assert!(theta.is_finite(), "prefix of length 1 is always feasible for radius > 0");
    theta
}
