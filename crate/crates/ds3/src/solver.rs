//! Alternating-direction solver for the row-sparse encoding program.
//!
//! Minimizes `λ·Σ_i ‖z_i‖_p + Σ_{(i,j) observed} d_ij z_ij` over matrices
//! whose columns lie on the probability simplex (restricted to observed
//! entries). Each iteration alternates three phases:
//!
//! 1. a proximal step on every row of the sparsity-carrying iterate `Z`,
//! 2. a simplex projection on every column of the feasible iterate `C`,
//! 3. a dual ascent step `Λ += μ(Z − C)` enforcing `Z = C`.
//!
//! Rows and columns are independent subproblems, so phases 1 and 2 are
//! parallel maps; the sup-norm residuals are commutative max-reductions.
//! Iterates are therefore bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, DissimilarityMatrix, NormP};
use crate::prox::{project_simplex, project_simplex_masked, prox_row, Workspace};

/// Starting point for the iterates.
#[derive(Debug, Clone, Default)]
pub enum Init {
    /// Every observed entry of a column starts at 1/(number observed in that
    /// column) — feasible from the first iterate. The default.
    #[default]
    UniformColumns,
    /// Ones on the leading diagonal of length min(M, N), zero elsewhere.
    /// Infeasible for M ≠ N column sums, which is fine: the first
    /// column projection restores feasibility.
    IdentityLike,
    /// Caller-provided M×N starting matrix; unobserved entries are zeroed.
    Custom(DenseMatrix),
}

/// Tuning knobs for [`solve`].
#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Augmented-Lagrangian penalty weight; must be positive.
    pub mu: f64,
    /// Convergence threshold on both sup-norm residuals; must be positive.
    pub eps: f64,
    /// Iteration cap; must be at least 1.
    pub max_iter: usize,
    /// Row-sparsity norm: `P2` lets a representative split attention across
    /// targets, `PInf` pushes selected rows toward flat profiles.
    pub p: NormP,
    pub init: Init,
    /// Worker threads for the parallel phases; 0 uses all available cores.
    pub workers: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            mu: 0.1,
            eps: 1e-7,
            max_iter: 100_000,
            p: NormP::PInf,
            init: Init::UniformColumns,
            workers: 0,
        }
    }
}

impl SolverSettings {
    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "penalty weight mu must be a positive real, got {}",
                self.mu
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "convergence threshold eps must be a positive real, got {}",
                self.eps
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Full iterate triple plus residuals, for stepping the solver manually.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Sparsity-carrying iterate (output of the row prox).
    pub z: DenseMatrix,
    /// Feasible iterate (output of the column simplex projection).
    pub c: DenseMatrix,
    /// Lagrange multiplier for the coupling `Z = C`.
    pub dual: DenseMatrix,
    /// Completed iterations.
    pub iter: usize,
    /// `‖Z − C‖_∞` after the most recent iteration.
    pub error1: f64,
    /// `‖Z_{k+1} − Z_k‖_∞` after the most recent iteration.
    pub error2: f64,
}

impl SolverState {
    /// Builds the pre-iteration state for `d` under `settings`. Both
    /// residuals start at `2·eps` so at least one iteration always runs.
    pub fn init(d: &DissimilarityMatrix, settings: &SolverSettings) -> Result<Self> {
        settings.validate()?;
        let start = initial_matrix(d, &settings.init)?;
        let (m, n) = (d.rows(), d.cols());
        Ok(SolverState {
            z: DenseMatrix::from_vec(m, n, start.clone())?,
            c: DenseMatrix::from_vec(m, n, start)?,
            dual: DenseMatrix::zeros(m, n)?,
            iter: 0,
            error1: 2.0 * settings.eps,
            error2: 2.0 * settings.eps,
        })
    }
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct Solution {
    /// The reported optimum: the feasible iterate, whose columns sit exactly
    /// on the (masked) probability simplex.
    pub z: DenseMatrix,
    /// The final row-prox iterate — differs from `z` by at most the residual
    /// `error1`. Exposed for optimality certificates and warm starts.
    pub z_prox: DenseMatrix,
    /// The final multiplier. Exposed for optimality certificates and warm
    /// starts.
    pub dual: DenseMatrix,
    /// `λ·Σ_i ‖z_i‖_p + Σ_observed d_ij z_ij` evaluated at [`Solution::z`].
    pub objective: f64,
    /// Iterations performed.
    pub iterations: usize,
    /// Whether both residuals fell to `eps` or below before the cap.
    pub converged: bool,
    /// `(error1, error2)` for every iteration, in order.
    pub residual_history: Vec<(f64, f64)>,
    /// Per-target outlier weights when solved with an outlier budget.
    pub outliers: Option<Vec<f64>>,
}

/// Minimizes `λ‖Z‖₁,p + ⟨D, Z⟩` over column-stochastic matrices and returns
/// the feasible iterate at termination.
pub fn solve(d: &DissimilarityMatrix, lambda: f64, settings: &SolverSettings) -> Result<Solution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization weight lambda must be a nonnegative real, got {lambda}"
        )));
    }
    let row_lambda = vec![lambda; d.rows()];
    solve_rows(d, &row_lambda, settings, None)
}

/// Warm-start triple taken from a previous [`Solution`] on the same matrix.
#[derive(Debug, Clone)]
pub(crate) struct WarmStart<'a> {
    pub z: &'a DenseMatrix,
    pub c: &'a DenseMatrix,
    pub dual: &'a DenseMatrix,
}

/// Core entry point: one regularization weight per row (the outlier variant
/// runs its appended row with weight 0).
pub(crate) fn solve_rows(
    d: &DissimilarityMatrix,
    row_lambda: &[f64],
    settings: &SolverSettings,
    warm: Option<WarmStart<'_>>,
) -> Result<Solution> {
    settings.validate()?;
    let engine = Engine::new(d, row_lambda, settings)?;
    let (m, n) = (d.rows(), d.cols());

    let (mut z, mut c, mut dual) = match warm {
        Some(w) => {
            for mat in [w.z, w.c, w.dual] {
                if (mat.rows(), mat.cols()) != (m, n) {
                    return Err(Error::ShapeMismatch {
                        rows: m,
                        cols: n,
                        got: mat.rows() * mat.cols(),
                    });
                }
            }
            let mut z = w.z.as_slice().to_vec();
            let mut c = w.c.as_slice().to_vec();
            let mut dual = w.dual.as_slice().to_vec();
            for buf in [&mut z, &mut c, &mut dual] {
                zero_unobserved(buf, d);
            }
            (z, c, dual)
        }
        None => {
            let start = initial_matrix(d, &settings.init)?;
            let c = start.clone();
            (start, c, vec![0.0; m * n])
        }
    };

    let run = move || -> Result<RunOutput> {
        let mut z_next = vec![0.0; m * n];
        let mut cols = vec![0.0; m * n];
        let mut history: Vec<(f64, f64)> = Vec::new();
        let mut error1 = 2.0 * settings.eps;
        let mut error2 = 2.0 * settings.eps;
        let mut iter = 0usize;
        while (error1 > settings.eps || error2 > settings.eps) && iter < settings.max_iter {
            let (e1, e2) = engine.iterate(&z, &mut z_next, &mut c, &mut dual, &mut cols);
            std::mem::swap(&mut z, &mut z_next);
            iter += 1;
            if !e1.is_finite() || !e2.is_finite() {
                return Err(Error::NumericFailure { iter });
            }
            history.push((e1, e2));
            error1 = e1;
            error2 = e2;
        }
        Ok(RunOutput {
            z,
            c,
            dual,
            iterations: iter,
            converged: error1 <= settings.eps && error2 <= settings.eps,
            history,
        })
    };
    let out = match settings.workers {
        0 => run()?,
        w => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build a {w}-thread pool: {e}")))?
            .install(run)?,
    };

    let iter = out.iterations;
    let numeric = |_| Error::NumericFailure { iter };
    let c_mat = DenseMatrix::from_vec(m, n, out.c).map_err(numeric)?;
    let z_mat = DenseMatrix::from_vec(m, n, out.z).map_err(numeric)?;
    let dual_mat = DenseMatrix::from_vec(m, n, out.dual).map_err(numeric)?;
    let objective = objective_per_row(d, &c_mat, row_lambda, settings.p);
    Ok(Solution {
        z: c_mat,
        z_prox: z_mat,
        dual: dual_mat,
        objective,
        iterations: out.iterations,
        converged: out.converged,
        residual_history: out.history,
        outliers: None,
    })
}

/// Advances `state` by one full iteration (row prox, column projection, dual
/// ascent, residuals). Deterministic for any worker count.
pub fn step(
    state: &mut SolverState,
    d: &DissimilarityMatrix,
    lambda: f64,
    settings: &SolverSettings,
) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization weight lambda must be a nonnegative real, got {lambda}"
        )));
    }
    let row_lambda = vec![lambda; d.rows()];
    step_rows(state, d, &row_lambda, settings)
}

pub(crate) fn step_rows(
    state: &mut SolverState,
    d: &DissimilarityMatrix,
    row_lambda: &[f64],
    settings: &SolverSettings,
) -> Result<()> {
    settings.validate()?;
    let engine = Engine::new(d, row_lambda, settings)?;
    let (m, n) = (d.rows(), d.cols());
    for mat in [&state.z, &state.c, &state.dual] {
        if (mat.rows(), mat.cols()) != (m, n) {
            return Err(Error::ShapeMismatch {
                rows: m,
                cols: n,
                got: mat.rows() * mat.cols(),
            });
        }
    }
    let mut z_next = vec![0.0; m * n];
    let mut cols = vec![0.0; m * n];
    let (e1, e2) = engine.iterate(
        state.z.as_slice(),
        &mut z_next,
        state.c.as_mut_slice(),
        state.dual.as_mut_slice(),
        &mut cols,
    );
    state.z.as_mut_slice().copy_from_slice(&z_next);
    state.iter += 1;
    if !e1.is_finite() || !e2.is_finite() {
        return Err(Error::NumericFailure { iter: state.iter });
    }
    state.error1 = e1;
    state.error2 = e2;
    Ok(())
}

/// Encoding cost `λ·Σ_i ‖z_i‖_p + Σ_{(i,j) observed} d_ij z_ij`.
pub fn objective(d: &DissimilarityMatrix, z: &DenseMatrix, lambda: f64, p: NormP) -> f64 {
    objective_impl(d, z, p, |_| lambda)
}

/// Per-row weighted variant used by the outlier-augmented program.
pub(crate) fn objective_per_row(
    d: &DissimilarityMatrix,
    z: &DenseMatrix,
    row_lambda: &[f64],
    p: NormP,
) -> f64 {
    assert_eq!(row_lambda.len(), z.rows(), "one weight per row");
    objective_impl(d, z, p, |i| row_lambda[i])
}

fn objective_impl(
    d: &DissimilarityMatrix,
    z: &DenseMatrix,
    p: NormP,
    lambda_at: impl Fn(usize) -> f64,
) -> f64 {
    assert_eq!(
        (d.rows(), d.cols()),
        (z.rows(), z.cols()),
        "dissimilarity and coefficient shapes must agree"
    );
    let mut total = 0.0;
    for i in 0..z.rows() {
        total += lambda_at(i) * row_norm(p, z.row(i));
    }
    let dv = d.values().as_slice();
    let zv = z.as_slice();
    match d.mask() {
        None => total += dv.iter().zip(zv).map(|(a, b)| a * b).sum::<f64>(),
        Some(mask) => {
            total += dv
                .iter()
                .zip(zv)
                .zip(mask)
                .filter(|(_, &obs)| obs)
                .map(|((a, b), _)| a * b)
                .sum::<f64>()
        }
    }
    total
}

/// ℓp norm of a row for p ∈ {2, ∞}.
pub(crate) fn row_norm(p: NormP, row: &[f64]) -> f64 {
    match p {
        NormP::P2 => row.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormP::PInf => row.iter().fold(0.0f64, |acc, x| acc.max(x.abs())),
    }
}

struct RunOutput {
    z: Vec<f64>,
    c: Vec<f64>,
    dual: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<(f64, f64)>,
}

/// Precomputed per-solve constants plus the three-phase iteration body.
struct Engine<'a> {
    m: usize,
    n: usize,
    mu: f64,
    inv_mu: f64,
    p: NormP,
    dv: &'a [f64],
    /// Per-row prox thresholds `λ_i/μ`.
    thresh: Vec<f64>,
    /// Column-major copy of the observation mask, if any.
    mask_cols: Option<Vec<bool>>,
}

impl<'a> Engine<'a> {
    fn new(d: &'a DissimilarityMatrix, row_lambda: &[f64], settings: &SolverSettings) -> Result<Self> {
        let (m, n) = (d.rows(), d.cols());
        if row_lambda.len() != m {
            return Err(Error::InvalidArgument(format!(
                "need one regularization weight per row: got {} for {m} rows",
                row_lambda.len()
            )));
        }
        for (i, &l) in row_lambda.iter().enumerate() {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "regularization weight for row {i} must be a nonnegative real, got {l}"
                )));
            }
        }
        let mask_cols = d.mask().map(|mask| {
            let mut mc = vec![false; m * n];
            for i in 0..m {
                for j in 0..n {
                    mc[j * m + i] = mask[i * n + j];
                }
            }
            mc
        });
        Ok(Engine {
            m,
            n,
            mu: settings.mu,
            inv_mu: 1.0 / settings.mu,
            p: settings.p,
            dv: d.values().as_slice(),
            thresh: row_lambda.iter().map(|l| l / settings.mu).collect(),
            mask_cols,
        })
    }

    /// One full iteration. Reads the previous prox iterate from `z`, writes
    /// the new one to `z_next`, updates `c` and `dual` in place, and returns
    /// `(‖Z−C‖_∞, ‖Z_next−Z‖_∞)`. Non-finite arithmetic surfaces as infinite
    /// residuals so the caller can abort with the iteration number.
    fn iterate(
        &self,
        z: &[f64],
        z_next: &mut [f64],
        c: &mut [f64],
        dual: &mut [f64],
        cols: &mut [f64],
    ) -> (f64, f64) {
        let (m, n) = (self.m, self.n);
        let (p, inv_mu, mu) = (self.p, self.inv_mu, self.mu);

        // Phase 1 — row prox of C − Λ/μ. Unobserved coordinates of C and Λ
        // are exactly 0 and both prox maps send 0 to 0, so no masking is
        // needed here.
        let error2 = z_next
            .par_chunks_mut(n)
            .zip_eq(z.par_chunks(n))
            .zip_eq(c.par_chunks(n))
            .zip_eq(dual.par_chunks(n))
            .enumerate()
            .map_init(Workspace::new, |ws, (i, (((zn, zp), cr), dr))| {
                for j in 0..n {
                    zn[j] = cr[j] - dr[j] * inv_mu;
                }
                prox_row(p, zn, self.thresh[i], ws);
                let mut e = 0.0f64;
                let mut bad = false;
                for j in 0..n {
                    let diff = zn[j] - zp[j];
                    if diff.is_finite() {
                        e = e.max(diff.abs());
                    } else {
                        bad = true;
                    }
                }
                if bad {
                    f64::INFINITY
                } else {
                    e
                }
            })
            .reduce(|| 0.0, f64::max);

        // Phase 2 — transpose-gather Z + (Λ − D)/μ into contiguous columns
        // and project each onto the (masked) simplex. The minus sign is what
        // makes the column step descend the data term: the C-subproblem is
        // min ⟨D,C⟩ + ⟨Λ, Z−C⟩ + μ/2‖Z−C‖², whose gradient vanishes at
        // C = Z + (Λ − D)/μ before projection.
        let zn: &[f64] = z_next;
        let du: &[f64] = dual;
        cols.par_chunks_mut(m)
            .enumerate()
            .for_each_init(Workspace::new, |ws, (j, col)| {
                for (i, slot) in col.iter_mut().enumerate() {
                    let idx = i * n + j;
                    *slot = zn[idx] + (du[idx] - self.dv[idx]) * inv_mu;
                }
                match &self.mask_cols {
                    Some(mc) => project_simplex_masked(col, &mc[j * m..(j + 1) * m], ws)
                        .expect("every column has an observed entry by construction"),
                    None => project_simplex(col, ws),
                }
            });

        // Phase 3 — scatter the projected columns back, ascend the dual, and
        // measure the coupling residual, all in one elementwise pass.
        let cols_ro: &[f64] = cols;
        let error1 = c
            .par_chunks_mut(n)
            .zip_eq(dual.par_chunks_mut(n))
            .zip_eq(zn.par_chunks(n))
            .enumerate()
            .map(|(i, ((crow, drow), zrow))| {
                let mut e = 0.0f64;
                let mut bad = false;
                for j in 0..n {
                    let cv = cols_ro[j * m + i];
                    crow[j] = cv;
                    let r = zrow[j] - cv;
                    drow[j] += mu * r;
                    if r.is_finite() {
                        e = e.max(r.abs());
                    } else {
                        bad = true;
                    }
                }
                if bad {
                    f64::INFINITY
                } else {
                    e
                }
            })
            .reduce(|| 0.0, f64::max);

        (error1, error2)
    }
}

/// Builds the starting matrix for `init`, with unobserved entries exactly 0.
fn initial_matrix(d: &DissimilarityMatrix, init: &Init) -> Result<Vec<f64>> {
    let (m, n) = (d.rows(), d.cols());
    match init {
        Init::UniformColumns => {
            let mut data = vec![0.0; m * n];
            for j in 0..n {
                let observed = (0..m).filter(|&i| d.is_observed(i, j)).count();
                let v = 1.0 / observed as f64;
                for i in 0..m {
                    if d.is_observed(i, j) {
                        data[i * n + j] = v;
                    }
                }
            }
            Ok(data)
        }
        Init::IdentityLike => {
            let mut data = vec![0.0; m * n];
            for k in 0..m.min(n) {
                if d.is_observed(k, k) {
                    data[k * n + k] = 1.0;
                }
            }
            Ok(data)
        }
        Init::Custom(mat) => {
            if (mat.rows(), mat.cols()) != (m, n) {
                return Err(Error::ShapeMismatch {
                    rows: m,
                    cols: n,
                    got: mat.rows() * mat.cols(),
                });
            }
            let mut data = mat.as_slice().to_vec();
            zero_unobserved(&mut data, d);
            Ok(data)
        }
    }
}

fn zero_unobserved(data: &mut [f64], d: &DissimilarityMatrix) {
    if let Some(mask) = d.mask() {
        for (x, &obs) in data.iter_mut().zip(mask) {
            if !obs {
                *x = 0.0;
            }
        }
    }
}
