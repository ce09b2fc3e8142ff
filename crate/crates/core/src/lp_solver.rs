//! Best approximation from a finite-dimensional span in a weighted `ℓ_p` norm.
//!
//! For `p = 2` the answer is a (minimum-norm) weighted least-squares fit.
//! For `2 < p < ∞` the smooth convex objective `Σ w_ν |r_ν|^p` is minimized
//! by damped Newton over the real and imaginary parts of the coefficients,
//! with IRLS as a fallback. `1 ≤ p < 2` goes through ε-smoothed IRLS.
//! `p = ∞` is handled by Lawson's reweighting scheme, which also yields a
//! dual lower bound certifying the minimax value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{powered_sum, uniform_weights, weighted_norm, Exponent, C64};
use crate::error::{Error, Result};
use crate::linalg::{combine, gram, solve_hermitian, solve_symmetric_real, weighted_least_squares};

/// `min_c ‖target − Σ_j c_j basis_j‖_{p,w}` over a finite point set.
#[derive(Debug, Clone)]
pub struct ProjectionProblem<'a> {
    pub target: &'a [C64],
    pub basis: Vec<&'a [C64]>,
    pub p: Exponent,
    pub weights: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Auto,
    LeastSquares,
    Newton,
    Irls,
    Lawson,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub method: Method,
    /// ε added under `|r|^{p−2}` for `p < 2`.
    pub smoothing: f64,
    /// Start iterative methods from the least-squares fit (otherwise from
    /// the warm start, or zero).
    pub least_squares_start: bool,
    /// Minimax only: stop once the certified lower bound exceeds this value.
    pub abandon_above: Option<f64>,
}

impl SolverOptions {
    pub const DEFAULT_TOL_P2: f64 = 1e-10;
    pub const DEFAULT_TOL: f64 = 1e-8;
    pub const DEFAULT_TOL_SUP: f64 = 1e-4;

    /// Defaults for the given exponent.
    pub fn for_exponent(p: Exponent) -> Self {
        let (tol, max_iterations) = match p {
            Exponent::Finite(2.0) => (Self::DEFAULT_TOL_P2, 1),
            Exponent::Finite(_) => (Self::DEFAULT_TOL, 200),
            Exponent::Infinite => (Self::DEFAULT_TOL_SUP, 20_000),
        };
        SolverOptions {
            tol,
            max_iterations,
            method: Method::Auto,
            smoothing: 1e-10,
            least_squares_start: true,
            abandon_above: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub coeffs: Vec<C64>,
    /// `‖target − Σ c_j basis_j‖_{p,w}`.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// First-order residual for finite `p`; relative duality gap for `p = ∞`.
    pub kkt_residual: f64,
    /// Basis was rank deficient; the minimum-norm minimizer is reported.
    pub degenerate: bool,
    pub method: Method,
    /// Certified lower bound on the optimal value (`p = ∞` only).
    pub lower_bound: Option<f64>,
}

fn validate(prob: &ProjectionProblem<'_>) -> Result<()> {
    let m = prob.target.len();
    if m == 0 {
        return Err(Error::Empty("projection target"));
    }
    if prob.weights.len() != m {
        return Err(Error::Dimension {
            expected: m,
            found: prob.weights.len(),
        });
    }
    if let Some(col) = prob.basis.iter().find(|c| c.len() != m) {
        return Err(Error::Dimension {
            expected: m,
            found: col.len(),
        });
    }
    if prob.weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || prob.weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Domain(
            "projection weights must be nonnegative and not all zero".into(),
        ));
    }
    if !prob.basis.is_empty() && prob.basis.iter().all(|c| c.iter().all(|v| v.norm() == 0.0)) {
        return Err(Error::Degenerate("all basis columns vanish".into()));
    }
    Ok(())
}

fn residual(prob: &ProjectionProblem<'_>, coeffs: &[C64]) -> Vec<C64> {
    let fit = combine(&prob.basis, coeffs, prob.target.len());
    prob.target.iter().zip(&fit).map(|(y, f)| y - f).collect()
}

/// Weight applied to `conj(r)` in the first-order condition.
fn dual_weight(r: C64, p: f64, smoothing: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if p > 2.0 {
        r.norm().powf(p - 2.0)
    } else {
        (r.norm_sqr() + smoothing).powf((p - 2.0) / 2.0)
    }
}

/// `max_j |Σ w |r|^{p−2} conj(r) b_j| / (scale^{p−1} ‖b_j‖_{p,w})`.
fn first_order_residual(prob: &ProjectionProblem<'_>, r: &[C64], p: f64, smoothing: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let density: Vec<C64> = r
        .iter()
        .zip(prob.weights)
        .map(|(rv, w)| rv.conj() * (w * dual_weight(*rv, p, smoothing)))
        .collect();
    prob.basis
        .iter()
        .map(|b| {
            let bn = weighted_norm(b, prob.weights, Exponent::Finite(p));
            if bn == 0.0 {
                return 0.0;
            }
            let g: C64 = density.iter().zip(b.iter()).map(|(d, bv)| d * bv).sum();
            g.norm() / (scale.powf(p - 1.0) * bn)
        })
        .fold(0.0, f64::max)
}

/// Solve with default options for `p` and the given tolerance.
pub fn project(prob: &ProjectionProblem<'_>, tol: f64) -> Result<ProjectionResult> {
    project_with(prob, &SolverOptions::for_exponent(prob.p).with_tol(tol), None)
}

/// Solve with explicit options and an optional warm start.
pub fn project_with(
    prob: &ProjectionProblem<'_>,
    opts: &SolverOptions,
    initial: Option<&[C64]>,
) -> Result<ProjectionResult> {
    validate(prob)?;
    if let Some(init) = initial {
        if init.len() != prob.basis.len() {
            return Err(Error::Dimension {
                expected: prob.basis.len(),
                found: init.len(),
            });
        }
    }
    if prob.basis.is_empty() {
        return Ok(ProjectionResult {
            coeffs: Vec::new(),
            residual_norm: weighted_norm(prob.target, prob.weights, prob.p),
            iterations: 0,
            converged: true,
            kkt_residual: 0.0,
            degenerate: false,
            method: opts.method,
            lower_bound: matches!(prob.p, Exponent::Infinite).then(|| weighted_norm(prob.target, prob.weights, prob.p)),
        });
    }
    let p = match prob.p {
        Exponent::Infinite => return Ok(lawson(prob, opts)),
        Exponent::Finite(p) => p,
    };
    let method = match opts.method {
        Method::Auto if p == 2.0 => Method::LeastSquares,
        Method::Auto if p > 2.0 => Method::Newton,
        Method::Auto => Method::Irls,
        Method::Lawson => return Err(Error::Domain("Lawson iteration applies to p = ∞ only".into())),
        other => other,
    };
    if method == Method::Newton && p < 2.0 {
        return Err(Error::Domain("Newton path requires p ≥ 2; use IRLS".into()));
    }
    if method == Method::LeastSquares && p != 2.0 {
        return Err(Error::Domain("least-squares path requires p = 2".into()));
    }

    let ls = weighted_least_squares(&prob.basis, prob.target, prob.weights);
    let degenerate = ls.degenerate();
    let scale = weighted_norm(prob.target, prob.weights, Exponent::Finite(p));

    let finish = |coeffs: Vec<C64>, iterations: usize, method: Method| {
        let r = residual(prob, &coeffs);
        let kkt = first_order_residual(prob, &r, p, opts.smoothing, scale);
        ProjectionResult {
            residual_norm: weighted_norm(&r, prob.weights, Exponent::Finite(p)),
            coeffs,
            iterations,
            converged: kkt <= opts.tol,
            kkt_residual: kkt,
            degenerate,
            method,
            lower_bound: None,
        }
    };

    if method == Method::LeastSquares {
        return Ok(finish(ls.coeffs, 1, Method::LeastSquares));
    }

    // Start from the better of the least-squares fit and the warm start.
    let objective = |c: &[C64]| powered_sum(&residual(prob, c), prob.weights, p);
    let mut start = if opts.least_squares_start {
        ls.coeffs
    } else {
        vec![C64::new(0.0, 0.0); prob.basis.len()]
    };
    if let Some(init) = initial {
        if !opts.least_squares_start || objective(init) < objective(&start) {
            start = init.to_vec();
        }
    }

    match method {
        Method::Newton => {
            let (coeffs, iters, stalled) = newton(prob, p, opts, start, scale);
            if stalled {
                let (coeffs, more) = irls(prob, p, opts, coeffs, scale);
                Ok(finish(coeffs, iters + more, Method::Irls))
            } else {
                Ok(finish(coeffs, iters, Method::Newton))
            }
        }
        Method::Irls => {
            let (coeffs, iters) = irls(prob, p, opts, start, scale);
            Ok(finish(coeffs, iters, Method::Irls))
        }
        _ => unreachable!("method resolved above"),
    }
}

fn split(c: &[C64], d: &DVector<f64>, step: f64) -> Vec<C64> {
    let n = c.len();
    c.iter()
        .enumerate()
        .map(|(j, v)| v + C64::new(d[j], d[n + j]) * step)
        .collect()
}

/// Damped Newton on `Φ(c) = Σ w |r|^p` in `ℝ^{2n}`. Returns `(coeffs, iterations, stalled)`.
fn newton(
    prob: &ProjectionProblem<'_>,
    p: f64,
    opts: &SolverOptions,
    mut coeffs: Vec<C64>,
    scale: f64,
) -> (Vec<C64>, usize, bool) {
    let n = prob.basis.len();
    let m = prob.target.len();
    let dim = 2 * n;
    let i = C64::new(0.0, 1.0);
    let mut r = residual(prob, &coeffs);
    let mut phi = powered_sum(&r, prob.weights, p);
    let mut a = vec![C64::new(0.0, 0.0); dim];
    let mut t = vec![0.0; dim];

    for iter in 0..opts.max_iterations {
        let rnorm = phi.powf(1.0 / p);
        if rnorm <= 1e-14 * scale || phi == 0.0 {
            return (coeffs, iter, false);
        }
        if first_order_residual(prob, &r, p, opts.smoothing, rnorm) <= opts.tol {
            return (coeffs, iter, false);
        }

        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for nu in 0..m {
            let w = prob.weights[nu];
            let rv = r[nu];
            let rabs = rv.norm();
            if w == 0.0 || rabs == 0.0 {
                continue;
            }
            let s = w * p * rabs.powf(p - 2.0);
            let rhat = rv / rabs;
            for j in 0..n {
                a[j] = prob.basis[j][nu];
                a[n + j] = i * prob.basis[j][nu];
            }
            for k in 0..dim {
                grad[k] -= s * (a[k].conj() * rv).re;
                t[k] = (rhat.conj() * a[k]).re;
            }
            for k in 0..dim {
                for l in k..dim {
                    let h = s * ((a[k].conj() * a[l]).re + (p - 2.0) * t[k] * t[l]);
                    hess[(k, l)] += h;
                }
            }
        }
        for k in 0..dim {
            for l in 0..k {
                hess[(k, l)] = hess[(l, k)];
            }
        }
        let diag_max = (0..dim).map(|k| hess[(k, k)]).fold(0.0, f64::max);
        if diag_max == 0.0 {
            return (coeffs, iter, true);
        }
        for k in 0..dim {
            hess[(k, k)] += 1e-12 * diag_max;
        }
        let dir = -solve_symmetric_real(&hess, &grad);
        let slope = grad.dot(&dir);
        if !(slope < 0.0) {
            return (coeffs, iter, true);
        }

        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let trial = split(&coeffs, &dir, step);
            let tr = residual(prob, &trial);
            let tphi = powered_sum(&tr, prob.weights, p);
            if tphi <= phi + 1e-4 * step * slope {
                let progress = phi - tphi;
                coeffs = trial;
                r = tr;
                phi = tphi;
                accepted = true;
                if progress <= 1e-15 * phi {
                    return (coeffs, iter + 1, false);
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No descent at machine precision: optimal if the first-order
            // condition is already small, otherwise hand over to IRLS.
            let stalled = first_order_residual(prob, &r, p, opts.smoothing, scale) > opts.tol;
            return (coeffs, iter + 1, stalled);
        }
    }
    (coeffs, opts.max_iterations, false)
}

/// Iteratively reweighted least squares with an Armijo-safeguarded step on
/// the true objective. Returns `(coeffs, iterations)`.
fn irls(
    prob: &ProjectionProblem<'_>,
    p: f64,
    opts: &SolverOptions,
    mut coeffs: Vec<C64>,
    scale: f64,
) -> (Vec<C64>, usize) {
    let mut r = residual(prob, &coeffs);
    let mut phi = powered_sum(&r, prob.weights, p);
    let eps = opts.smoothing * scale.max(f64::MIN_POSITIVE).powi(2);
    for iter in 0..opts.max_iterations {
        let omega: Vec<f64> = r
            .iter()
            .zip(prob.weights)
            .map(|(rv, w)| w * (rv.norm_sqr() + eps).powf((p - 2.0) / 2.0))
            .collect();
        let next = weighted_least_squares(&prob.basis, prob.target, &omega).coeffs;
        let delta: Vec<C64> = next.iter().zip(&coeffs).map(|(a, b)| a - b).collect();
        let dnorm = delta.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
        let cnorm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let trial: Vec<C64> = coeffs.iter().zip(&delta).map(|(c, d)| c + d * step).collect();
            let tr = residual(prob, &trial);
            let tphi = powered_sum(&tr, prob.weights, p);
            if tphi <= phi {
                coeffs = trial;
                r = tr;
                phi = tphi;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved || dnorm * step <= opts.tol * (cnorm + f64::MIN_POSITIVE) {
            return (coeffs, iter + 1);
        }
    }
    (coeffs, opts.max_iterations)
}

/// Lawson's algorithm for `min_c max_ν |y_ν − (Bc)_ν|`.
///
/// Each iterate solves a weighted least-squares problem with weights `λ`,
/// so `B^H Λ r = 0` and `Σλ|r|² / Σλ|r|` is a valid lower bound on the
/// minimax value; `max|r|` of the iterate is an upper bound.
struct LawsonFit {
    coeffs: Vec<C64>,
    /// `max |r|` over the points of the subproblem.
    upper: f64,
    /// Lower bound on the minimax value of the subproblem.
    lower: f64,
    iterations: usize,
}

/// Lawson's reweighted least squares on one point set, from weights `lambda`.
/// Stops once the gap is at most `tol · upper` or `upper ≤ floor`.
fn lawson_on(
    target: &[C64],
    cols: &[&[C64]],
    lambda: &mut [f64],
    tol: f64,
    floor: f64,
    max_iterations: usize,
    abandon: f64,
) -> LawsonFit {
    let m = target.len();
    let mut best = LawsonFit {
        coeffs: vec![C64::new(0.0, 0.0); cols.len()],
        upper: target.iter().map(|v| v.norm()).fold(0.0, f64::max),
        lower: 0.0,
        iterations: 0,
    };
    if best.upper <= floor {
        return best;
    }
    for iter in 0..max_iterations.max(1) {
        best.iterations = iter + 1;
        let g = gram(cols, lambda);
        let rhs: Vec<C64> = cols
            .iter()
            .map(|b| {
                b.iter()
                    .zip(target)
                    .zip(lambda.iter())
                    .map(|((bv, y), l)| bv.conj() * y * *l)
                    .sum()
            })
            .collect();
        let coeffs = solve_hermitian(&g, &rhs);
        let fit = combine(cols, &coeffs, m);
        let abs_r: Vec<f64> = target.iter().zip(&fit).map(|(y, f)| (y - f).norm()).collect();
        let upper = abs_r.iter().cloned().fold(0.0, f64::max);
        let num: f64 = lambda.iter().zip(&abs_r).map(|(l, a)| l * a * a).sum();
        let den: f64 = lambda.iter().zip(&abs_r).map(|(l, a)| l * a).sum();
        let lower = if den > 0.0 { num / den } else { 0.0 };
        if upper < best.upper {
            best.upper = upper;
            best.coeffs = coeffs;
        }
        best.lower = best.lower.max(lower.min(best.upper));
        if best.upper - best.lower <= tol * best.upper || best.upper <= floor || best.lower > abandon || den == 0.0 {
            break;
        }
        for (l, a) in lambda.iter_mut().zip(&abs_r) {
            *l = *l * a / den;
        }
    }
    best
}

/// Minimax fit by exchange: Lawson on a small active set, enlarged by the
/// worst points until the certified gap closes. A lower bound for a subset
/// of points is also one for the full set.
fn lawson(prob: &ProjectionProblem<'_>, opts: &SolverOptions) -> ProjectionResult {
    let points: Vec<usize> = (0..prob.target.len()).filter(|&k| prob.weights[k] > 0.0).collect();
    let target: Vec<C64> = points.iter().map(|&k| prob.target[k]).collect();
    let cols: Vec<Vec<C64>> = prob
        .basis
        .iter()
        .map(|b| points.iter().map(|&k| b[k]).collect())
        .collect();
    let col_refs: Vec<&[C64]> = cols.iter().map(|c| c.as_slice()).collect();
    let m = target.len();
    let n = cols.len();

    let ls = weighted_least_squares(&col_refs, &target, &uniform_weights(m));
    let degenerate = ls.degenerate();
    let scale = target.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = 1e-13 * scale;
    let abs_residual = |coeffs: &[C64]| -> Vec<f64> {
        let fit = combine(&col_refs, coeffs, m);
        target.iter().zip(&fit).map(|(y, f)| (y - f).norm()).collect()
    };
    // Points sorted by decreasing residual, ties by index.
    let worst_first = |r: &[f64]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
        order
    };

    let abandon = opts.abandon_above.unwrap_or(f64::INFINITY);
    let mut best_coeffs = vec![C64::new(0.0, 0.0); n];
    let mut best_upper = scale;
    let mut best_lower = 0.0f64;
    let mut iterations = 0;
    let batch = n + 2;
    let mut active: Vec<usize> = worst_first(&abs_residual(&ls.coeffs))
        .into_iter()
        .take(batch.max(2 * n + 2))
        .collect();
    let mut lambda = uniform_weights(active.len());

    if scale > 0.0 {
        while iterations < opts.max_iterations.max(1) {
            let sub_target: Vec<C64> = active.iter().map(|&k| target[k]).collect();
            let sub_cols: Vec<Vec<C64>> = cols.iter().map(|c| active.iter().map(|&k| c[k]).collect()).collect();
            let sub_refs: Vec<&[C64]> = sub_cols.iter().map(|c| c.as_slice()).collect();
            let fit = lawson_on(
                &sub_target,
                &sub_refs,
                &mut lambda,
                0.25 * opts.tol,
                floor,
                opts.max_iterations - iterations,
                abandon,
            );
            iterations += fit.iterations;
            best_lower = best_lower.max(fit.lower);
            let r = abs_residual(&fit.coeffs);
            let upper = r.iter().cloned().fold(0.0, f64::max);
            if upper < best_upper {
                best_upper = upper;
                best_coeffs = fit.coeffs;
            }
            best_lower = best_lower.min(best_upper);
            if best_upper - best_lower <= opts.tol * best_upper || best_upper <= floor || best_lower > abandon {
                break;
            }
            let added: Vec<usize> = worst_first(&r)
                .into_iter()
                .filter(|k| !active.contains(k) && r[*k] > fit.upper)
                .take(batch)
                .collect();
            if added.is_empty() {
                if active.len() == m || fit.iterations == 0 {
                    break;
                }
                continue;
            }
            let mean = 1.0 / active.len() as f64;
            lambda.extend(std::iter::repeat_n(mean, added.len()));
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            active.extend(added);
        }
    }
    let gap = if best_upper > floor {
        (best_upper - best_lower) / best_upper
    } else {
        0.0
    };
    ProjectionResult {
        coeffs: best_coeffs,
        residual_norm: best_upper,
        iterations,
        converged: gap <= opts.tol,
        kkt_residual: gap,
        degenerate,
        method: Method::Lawson,
        lower_bound: Some(best_lower),
    }
}

/// Uniform-norm best approximation on the point set of `prob`.
pub fn project_sup(prob: &ProjectionProblem<'_>) -> Result<ProjectionResult> {
    if prob.p != Exponent::Infinite {
        return Err(Error::Domain("project_sup requires p = ∞".into()));
    }
    project_with(prob, &SolverOptions::for_exponent(Exponent::Infinite), None)
}

/// The recovery operator `ℓp𝐰(ξ, X_N)`: fit from sample values only.
/// `weights = None` means `𝐰_m = (1/m, …, 1/m)`.
pub fn lpw_recover(
    f_samples: &[C64],
    basis_at_samples: &[&[C64]],
    p: Exponent,
    weights: Option<&[f64]>,
    tol: f64,
) -> Result<ProjectionResult> {
    let uniform;
    let weights = match weights {
        Some(w) => {
            if w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Domain("recovery weights must be positive".into()));
            }
            w
        }
        None => {
            uniform = uniform_weights(f_samples.len());
            &uniform
        }
    };
    let prob = ProjectionProblem {
        target: f_samples,
        basis: basis_at_samples.to_vec(),
        p,
        weights,
    };
    project(&prob, tol)
}
