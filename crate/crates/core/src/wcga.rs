//! Weak Chebyshev Greedy Algorithm in the discrete space `L_p(ξ, μ_m)`, `2 ≤ p < ∞`.
//!
//! Each step picks a dictionary element on which the norming functional of
//! the current residual is within factor `t` of its maximum, then refits
//! `f_0` on the span of everything selected so far (Chebyshev projection).

use serde::{Deserialize, Serialize};

use crate::domain::{uniform_weights, weighted_norm, Exponent, SampleSet, C64};
use crate::error::{Error, Result};
use crate::linalg::combine;
use crate::lp_solver::{project_with, ProjectionProblem, SolverOptions};
use crate::systems::{FunctionSystem, SparseElement};

/// Relative slack when comparing functional values against the threshold,
/// so that mathematically tied candidates resolve to the smallest index.
const TIE_SLACK: f64 = 1e-12;

/// Below this the norming functional is treated as identically zero.
const STALL_LEVEL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcgaConfig {
    /// Weakness parameter `t ∈ (0, 1]`.
    pub t: f64,
    pub p: f64,
    pub max_iterations: usize,
    /// Stop once `‖f_m‖ ≤ residual_tol · ‖f_0‖` (relative, so runs are
    /// scale equivariant).
    pub residual_tol: f64,
    /// Constant `c` in the iteration budget `⌈c V² ln(max(Vv, e)) v⌉`.
    pub budget_constant_c: f64,
}

impl Default for WcgaConfig {
    fn default() -> Self {
        WcgaConfig {
            t: 1.0,
            p: 2.0,
            max_iterations: usize::MAX,
            residual_tol: 1e-12,
            budget_constant_c: 1.0,
        }
    }
}

impl WcgaConfig {
    pub fn new(t: f64, p: f64) -> Result<Self> {
        let cfg = WcgaConfig {
            t,
            p,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::Domain(format!("weakness t = {} must lie in (0, 1]", self.t)));
        }
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(Error::Domain(format!("WCGA needs 2 ≤ p < ∞, got {}", self.p)));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::Domain("residual tolerance must be nonnegative".into()));
        }
        if !(self.budget_constant_c >= 0.0) {
            return Err(Error::Domain("budget constant must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tol,
    Budget,
    Stall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcgaTrace {
    /// `ψ_1, ψ_2, …` as dictionary indices.
    pub selected_indices: Vec<usize>,
    /// `‖f_0‖_{L_p(ξ)}`.
    pub initial_norm: f64,
    /// `‖f_m‖_{L_p(ξ)}` after each iteration.
    pub residual_norms: Vec<f64>,
    /// Coefficients of `G_m` on `selected_indices`, in the original (unscaled) system.
    pub coeffs: Vec<C64>,
    pub stopped_reason: StopReason,
    /// Factors the columns were divided by to reach sample norm ≤ 1.
    pub column_scales: Vec<f64>,
}

impl WcgaTrace {
    pub fn iterations(&self) -> usize {
        self.selected_indices.len()
    }

    pub fn final_residual_norm(&self) -> f64 {
        self.residual_norms.last().copied().unwrap_or(self.initial_norm)
    }

    /// `G_m` as a sparse element of the original system.
    pub fn approximant(&self) -> SparseElement {
        SparseElement::new(self.selected_indices.clone(), self.coeffs.clone()).expect("selected indices are distinct")
    }
}

/// Norming functional of `f` in `L_p(w)` applied to `g`:
/// `‖f‖^{1−p} Σ w_ν |f_ν|^{p−2} conj(f_ν) g_ν`.
pub fn norming_functional(f: &[C64], g: &[C64], p: f64, weights: &[f64]) -> Result<C64> {
    if f.len() != g.len() || f.len() != weights.len() {
        return Err(Error::Dimension {
            expected: f.len(),
            found: if g.len() != f.len() { g.len() } else { weights.len() },
        });
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("norming functional needs 2 ≤ p < ∞, got {p}")));
    }
    let density = functional_density(f, p, weights)?;
    Ok(apply(&density, g))
}

/// The vector `d` with `F_f(g) = Σ d_ν g_ν`.
fn functional_density(f: &[C64], p: f64, weights: &[f64]) -> Result<Vec<C64>> {
    let norm = weighted_norm(f, weights, Exponent::Finite(p));
    if norm == 0.0 {
        return Err(Error::UndefinedFunctional);
    }
    let scale = norm.powf(1.0 - p);
    Ok(f.iter()
        .zip(weights)
        .map(|(v, w)| {
            let a = v.norm();
            if a == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                v.conj() * (w * a.powf(p - 2.0) * scale)
            }
        })
        .collect())
}

fn apply(density: &[C64], g: &[C64]) -> C64 {
    density.iter().zip(g).map(|(d, x)| d * x).sum()
}

fn select(residual: &[C64], columns: &[&[C64]], t: f64, p: f64, weights: &[f64], excluded: &[usize]) -> Result<usize> {
    let density = functional_density(residual, p, weights)?;
    let values: Vec<f64> = columns.iter().map(|g| apply(&density, g).norm()).collect();
    let best = values.iter().cloned().fold(0.0, f64::max);
    if best <= STALL_LEVEL {
        return Err(Error::OrthogonalityStall);
    }
    let threshold = t * best * (1.0 - TIE_SLACK);
    values
        .iter()
        .enumerate()
        .find(|(j, &v)| v >= threshold && !excluded.contains(j))
        .map(|(j, _)| j)
        .ok_or(Error::OrthogonalityStall)
}

/// Smallest index `j` with `|F_r(φ_j)| ≥ t · max_k |F_r(φ_k)|`.
pub fn greedy_select(residual: &[C64], columns: &[&[C64]], t: f64, p: f64, weights: &[f64]) -> Result<usize> {
    if let Some(c) = columns.iter().find(|c| c.len() != residual.len()) {
        return Err(Error::Dimension {
            expected: residual.len(),
            found: c.len(),
        });
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("weakness t = {t} must lie in (0, 1]")));
    }
    select(residual, columns, t, p, weights, &[])
}

/// WCGA on a system restricted to the sample points.
pub fn wcga_run(f0_samples: &[C64], sys: &FunctionSystem, xi: &SampleSet, cfg: &WcgaConfig) -> Result<WcgaTrace> {
    let columns = sys.sample_matrix(xi)?;
    let refs: Vec<&[C64]> = columns.iter().map(|c| c.as_slice()).collect();
    wcga_on_columns(f0_samples, &refs, cfg)
}

/// WCGA in `L_p(μ_m)` for an explicit dictionary given by its sample columns.
pub fn wcga_on_columns(f0: &[C64], columns: &[&[C64]], cfg: &WcgaConfig) -> Result<WcgaTrace> {
    cfg.validate()?;
    let m = f0.len();
    if m == 0 {
        return Err(Error::Empty("sample vector"));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != m) {
        return Err(Error::Dimension {
            expected: m,
            found: c.len(),
        });
    }
    let p = cfg.p;
    let weights = uniform_weights(m);
    let exponent = Exponent::Finite(p);

    // The dictionary must satisfy ‖g‖ ≤ 1.
    let column_scales: Vec<f64> = columns
        .iter()
        .map(|c| weighted_norm(c, &weights, exponent).max(1.0))
        .collect();
    let scaled: Vec<Vec<C64>> = columns
        .iter()
        .zip(&column_scales)
        .map(|(c, &s)| c.iter().map(|v| v / s).collect())
        .collect();
    let scaled_refs: Vec<&[C64]> = scaled.iter().map(|c| c.as_slice()).collect();

    let initial_norm = weighted_norm(f0, &weights, exponent);
    let mut trace = WcgaTrace {
        selected_indices: Vec::new(),
        initial_norm,
        residual_norms: Vec::new(),
        coeffs: Vec::new(),
        stopped_reason: StopReason::Tol,
        column_scales,
    };
    if initial_norm == 0.0 {
        return Ok(trace);
    }

    let opts = SolverOptions::for_exponent(exponent);
    let stop_level = cfg.residual_tol * initial_norm;
    let mut residual = f0.to_vec();
    let mut coeffs: Vec<C64> = Vec::new();
    let mut reason = StopReason::Budget;

    while trace.selected_indices.len() < cfg.max_iterations.min(columns.len()) {
        let j = match select(&residual, &scaled_refs, cfg.t, p, &weights, &trace.selected_indices) {
            Ok(j) => j,
            Err(Error::OrthogonalityStall) => {
                reason = StopReason::Stall;
                break;
            }
            Err(e) => return Err(e),
        };
        trace.selected_indices.push(j);
        let basis: Vec<&[C64]> = trace.selected_indices.iter().map(|&k| scaled_refs[k]).collect();
        let prob = ProjectionProblem {
            target: f0,
            basis,
            p: exponent,
            weights: &weights,
        };
        let mut warm = coeffs.clone();
        warm.push(C64::new(0.0, 0.0));
        let fit = project_with(&prob, &opts, Some(&warm))?;
        coeffs = fit.coeffs;
        let approx = combine(&prob.basis, &coeffs, m);
        residual = f0.iter().zip(&approx).map(|(a, b)| a - b).collect();
        let norm = weighted_norm(&residual, &weights, exponent);
        trace.residual_norms.push(norm);
        if norm <= stop_level {
            reason = StopReason::Tol;
            break;
        }
    }
    if reason == StopReason::Budget && trace.selected_indices.len() < cfg.max_iterations {
        // Dictionary exhausted before the budget.
        reason = StopReason::Stall;
    }
    trace.stopped_reason = reason;
    trace.coeffs = coeffs
        .iter()
        .zip(&trace.selected_indices)
        .map(|(c, &j)| c / trace.column_scales[j])
        .collect();
    Ok(trace)
}

/// `⌈c · V² · ln(max(V v, e)) · v⌉` with `V = D √K`; `c = 0` gives 0.
pub fn iteration_budget(v: usize, d: f64, k: f64, cfg: &WcgaConfig) -> usize {
    let c = cfg.budget_constant_c;
    if c == 0.0 || v == 0 {
        return 0;
    }
    let big_v = d * k.sqrt();
    let log = (big_v * v as f64).max(std::f64::consts::E).ln();
    let raw = c * big_v * big_v * log * v as f64;
    // Guard against 34.000000000000004-style rounding above an integer.
    let rounded = raw.round();
    if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}
