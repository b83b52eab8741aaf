//! Stationary distribution of the tandem chain.
//!
//! Two routes are provided:
//!
//! * **direct** — solve `x (P − I) = 0`, `x e = 1` exactly by dense LU on
//!   the assembled matrix. This is the default and serves as the numerical
//!   oracle: the geometric level recursion below is exact for infinite
//!   quasi-birth-death chains but only approximate near the upper boundary
//!   of a finite one, so the artifact quantifies the gap instead of
//!   assuming it away.
//! * **matrix-geometric** — the classic construction: find the minimal
//!   nonnegative solution of `R = U + R·H + R²·D`, solve the level-(0,1)
//!   boundary system by Jacobi iteration, expand the interior levels as
//!   `x_i = x_{i−1} R`, close the top level through `(I − H')^{-1}`, and
//!   normalize.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::kernel::LevelKernel;
use crate::layout::PhaseLayout;
use crate::linalg;

/// How a stationary distribution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
    MatrixGeometric,
}

/// Solver knobs; the defaults are tight because the systems are small.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub method: SolveMethod,
    /// Entrywise change threshold for the R iteration.
    pub r_tol: f64,
    pub r_max_iter: usize,
    /// Residual threshold `‖x(B − I)‖∞` for the boundary Jacobi sweep.
    pub jacobi_tol: f64,
    pub jacobi_max_iter: usize,
    /// Relaxation weight of the boundary sweep. The undamped sweep (weight 1)
    /// cycles whenever the Jacobi iteration matrix has further eigenvalues on
    /// the unit circle, which these nearly periodic slot chains do have; any
    /// weight in (0, 1) contracts those modes and leaves the fixed point
    /// untouched.
    pub jacobi_damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolveMethod::Direct,
            r_tol: 1e-13,
            r_max_iter: 100_000,
            jacobi_tol: 1e-12,
            jacobi_max_iter: 100_000,
            jacobi_damping: 0.5,
        }
    }
}

/// Minimal nonnegative solution of `R = U + R·H + R²·D`.
#[derive(Debug, Clone)]
pub struct RMatrix {
    pub mat: Array2<f64>,
    pub iterations: usize,
    /// `‖U + R H + R² D − R‖` (max entry) at the returned iterate.
    pub residual: f64,
}

/// Stationary distribution with solver provenance.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    pub probs: Array1<f64>,
    /// `‖x P − x‖∞`.
    pub residual: f64,
    pub method: SolveMethod,
    /// Fallback and convergence notices, in order of occurrence.
    pub notes: Vec<String>,
    pub r_iterations: Option<usize>,
    pub r_residual: Option<f64>,
    pub jacobi_iterations: Option<usize>,
    pub jacobi_residual: Option<f64>,
}

impl StationaryDistribution {
    /// Probability mass of the `(i1, i2)` block.
    pub fn block_mass(&self, layout: &PhaseLayout, i1: usize, i2: usize) -> f64 {
        let off = layout.block_offset(i1, i2);
        self.probs.slice(s![off..off + layout.block_dim(i1, i2)]).sum()
    }
}

/// Successive substitution for the rate matrix, starting from zero. The
/// iterates are entrywise nondecreasing, so convergence of the entrywise
/// change implies convergence to the minimal solution.
pub fn compute_r(
    hold: &Array2<f64>,
    up: &Array2<f64>,
    down: &Array2<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<RMatrix> {
    if tol <= 0.0 {
        return Err(Error::Argument("r iteration tolerance must be positive".into()));
    }
    let n = hold.nrows();
    let mut r = Array2::<f64>::zeros((n, n));
    let mut delta = f64::INFINITY;
    for it in 1..=max_iter {
        let next = up + &r.dot(hold) + &r.dot(&r).dot(down);
        delta = linalg::max_abs_diff(&next, &r);
        r = next;
        if delta < tol {
            let residual = linalg::max_abs_diff(&(up + &r.dot(hold) + &r.dot(&r).dot(down)), &r);
            return Ok(RMatrix {
                mat: r,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::Solver(format!(
        "rate-matrix iteration did not converge in {max_iter} steps (last change {delta:.3e})"
    )))
}

/// Jacobi sweep for the boundary fixed point
/// `(x0, x1) [[E, U0], [C, H + R·D]] = (x0, x1)`, returned up to scale.
///
/// The Jacobi update for `A y = 0` with `A = Bᵀ − I` has nonnegative
/// iteration matrix, so iterates started positive stay positive; each sweep
/// is renormalized to total mass 1 to keep the scale fixed.
pub fn solve_boundary_jacobi(
    empty_hold: &Array2<f64>,
    empty_up: &Array2<f64>,
    drain: &Array2<f64>,
    hold: &Array2<f64>,
    down: &Array2<f64>,
    r: &RMatrix,
    tol: f64,
    max_iter: usize,
    damping: f64,
) -> Result<(Array1<f64>, Array1<f64>, usize, f64)> {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::Argument(format!(
            "jacobi damping must lie in (0, 1], got {damping}"
        )));
    }
    let d0 = empty_hold.nrows();
    let d1 = hold.nrows();
    let n = d0 + d1;
    let hold_eff = hold + &r.mat.dot(down);
    // B, assembled once
    let mut b = Array2::<f64>::zeros((n, n));
    b.slice_mut(s![..d0, ..d0]).assign(empty_hold);
    b.slice_mut(s![..d0, d0..]).assign(empty_up);
    b.slice_mut(s![d0.., ..d0]).assign(drain);
    b.slice_mut(s![d0.., d0..]).assign(&hold_eff);

    let diag: Vec<f64> = (0..n).map(|i| b[[i, i]] - 1.0).collect();
    if let Some(i) = diag.iter().position(|&d| d.abs() < 1e-14) {
        return Err(Error::Solver(format!(
            "boundary Jacobi: zero diagonal at state {i}; use the direct method"
        )));
    }

    let mut y = Array1::from_elem(n, 1.0 / n as f64);
    let bt = b.t().to_owned();
    let mut best_residual = f64::INFINITY;
    let mut stalled = 0usize;
    for it in 1..=max_iter {
        // ay = (Bᵀ − I) y; residual is its max magnitude
        let mut ay = bt.dot(&y);
        ay -= &y;
        let residual = ay.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if residual < tol {
            let x0 = y.slice(s![..d0]).to_owned();
            let x1 = y.slice(s![d0..]).to_owned();
            return Ok((x0, x1, it, residual));
        }
        let mut next = y.clone();
        for i in 0..n {
            next[i] -= damping * ay[i] / diag[i];
        }
        let total = next.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Solver(
                "boundary Jacobi lost all mass; use the direct method".into(),
            ));
        }
        next.mapv_inplace(|v| v / total);
        y = next;
        if residual < best_residual - 1e-16 {
            best_residual = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 1000 {
                return Err(Error::Solver(format!(
                    "boundary Jacobi stalled for {stalled} sweeps at residual {residual:.3e}; \
                     use the direct method"
                )));
            }
        }
    }
    Err(Error::Solver(format!(
        "boundary Jacobi did not converge in {max_iter} sweeps; use the direct method"
    )))
}

/// Expand the boundary solution to all levels and normalize:
/// `x_i = x_{i−1} R` for `2 ≤ i ≤ cap1−1`, then
/// `x_cap1 = x_{cap1−1} · U · (I − H')^{-1}`.
pub fn expand_levels(
    x0: &Array1<f64>,
    x1: &Array1<f64>,
    r: &RMatrix,
    up: &Array2<f64>,
    hold_full: &Array2<f64>,
    layout: &PhaseLayout,
) -> Result<Array1<f64>> {
    let cap1 = layout.cap1;
    if cap1 < 2 {
        return Err(Error::Argument(
            "level expansion needs at least two occupied levels".into(),
        ));
    }
    let mut levels: Vec<Array1<f64>> = Vec::with_capacity(cap1 + 1);
    levels.push(x0.clone());
    levels.push(x1.clone());
    for _ in 2..cap1 {
        let prev = levels.last().unwrap();
        levels.push(prev.dot(&r.mat));
    }
    // top level through (I − H')⁻¹, i.e. solve x (I − H') = x_{cap1−1} U
    let rhs = levels.last().unwrap().dot(up);
    let n = hold_full.nrows();
    let mut a = -hold_full.t().to_owned();
    for i in 0..n {
        a[[i, i]] += 1.0;
    }
    let top = linalg::solve(&a, &rhs)
        .map_err(|e| Error::Solver(format!("top level closure failed: {e}")))?;
    levels.push(top);

    let mut x = Array1::zeros(layout.total_dim);
    let mut off = 0;
    for (i1, lvl) in levels.iter().enumerate() {
        let d = layout.level_dim(i1);
        debug_assert_eq!(lvl.len(), d);
        x.slice_mut(s![off..off + d]).assign(lvl);
        off += d;
    }
    clamp_and_normalize(&mut x)?;
    Ok(x)
}

/// Exact solve of `x (P − I) = 0` with the normalization equation replacing
/// the last (redundant) balance equation.
pub fn solve_direct(p: &Array2<f64>) -> Result<(Array1<f64>, f64)> {
    let n = p.nrows();
    let mut a = p.t().to_owned();
    for i in 0..n {
        a[[i, i]] -= 1.0;
    }
    for j in 0..n {
        a[[n - 1, j]] = 1.0;
    }
    let mut b = Array1::zeros(n);
    b[n - 1] = 1.0;
    let mut x = linalg::solve(&a, &b)?;
    clamp_and_normalize(&mut x)?;
    let residual = linalg::fixed_point_residual(&x, p);
    Ok((x, residual))
}

/// Zero out roundoff negatives (magnitude below 1e-12), reject anything
/// larger, and rescale to total mass 1.
fn clamp_and_normalize(x: &mut Array1<f64>) -> Result<()> {
    for v in x.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-12 {
                return Err(Error::Solver(format!(
                    "stationary solve produced a negative component {v:.3e}"
                )));
            }
            *v = 0.0;
        }
    }
    let total = x.sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Solver("stationary solve produced zero mass".into()));
    }
    x.mapv_inplace(|v| v / total);
    Ok(())
}

/// Solve for the stationary distribution of the assembled chain.
///
/// The matrix-geometric route needs at least three occupied levels for the
/// geometric interior to exist; below that, and on any of its failures, the
/// solver falls back to the direct method and records why.
pub fn stationary(
    kernel: &LevelKernel,
    layout: &PhaseLayout,
    options: &SolverOptions,
) -> Result<StationaryDistribution> {
    let p = kernel.assemble(layout);
    match options.method {
        SolveMethod::Direct => direct_result(&p, Vec::new()),
        SolveMethod::MatrixGeometric => {
            let mut notes = Vec::new();
            if layout.cap1 < 3 {
                notes.push(format!(
                    "matrix-geometric method needs cap1 >= 3, got {}; fell back to direct",
                    layout.cap1
                ));
                return direct_result(&p, notes);
            }
            match matrix_geometric(kernel, layout, options, &p) {
                Ok(sd) => Ok(sd),
                Err(e) => {
                    notes.push(format!("matrix-geometric solve failed ({e}); fell back to direct"));
                    direct_result(&p, notes)
                }
            }
        }
    }
}

fn direct_result(p: &Array2<f64>, notes: Vec<String>) -> Result<StationaryDistribution> {
    let (probs, residual) = solve_direct(p)?;
    if residual > 1e-10 {
        return Err(Error::Solver(format!(
            "direct stationary residual {residual:.3e} exceeds 1e-10"
        )));
    }
    Ok(StationaryDistribution {
        probs,
        residual,
        method: SolveMethod::Direct,
        notes,
        r_iterations: None,
        r_residual: None,
        jacobi_iterations: None,
        jacobi_residual: None,
    })
}

fn matrix_geometric(
    kernel: &LevelKernel,
    layout: &PhaseLayout,
    options: &SolverOptions,
    p: &Array2<f64>,
) -> Result<StationaryDistribution> {
    let r = compute_r(
        &kernel.hold,
        &kernel.up,
        &kernel.down,
        options.r_tol,
        options.r_max_iter,
    )?;
    let (x0, x1, jacobi_iterations, jacobi_residual) = solve_boundary_jacobi(
        &kernel.empty_hold,
        &kernel.empty_up,
        &kernel.drain,
        &kernel.hold,
        &kernel.down,
        &r,
        options.jacobi_tol,
        options.jacobi_max_iter,
        options.jacobi_damping,
    )?;
    let probs = expand_levels(&x0, &x1, &r, &kernel.up, &kernel.hold_full, layout)?;
    let residual = linalg::fixed_point_residual(&probs, p);
    Ok(StationaryDistribution {
        probs,
        residual,
        method: SolveMethod::MatrixGeometric,
        notes: Vec::new(),
        r_iterations: Some(r.iterations),
        r_residual: Some(r.residual),
        jacobi_iterations: Some(jacobi_iterations),
        jacobi_residual: Some(jacobi_residual),
    })
}
