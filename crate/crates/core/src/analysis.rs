//! System diagnostics: Bessel and Riesz constants, incoherence, the modulus
//! of smoothness bound and stability of recovery maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorial::SubsetEnumerator;
use crate::domain::{uniform_weights, weighted_norm, Exponent, GridDomain, C64};
use crate::error::{Error, Result};
use crate::linalg::{gram, hermitian_eigen};
use crate::serde_ext::extended_f64;
use crate::systems::FunctionSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConstants {
    /// Bessel constant `K = 1/λ_min(Gram)`; infinite for a singular Gram matrix.
    #[serde(with = "extended_f64")]
    pub k: f64,
    /// Riesz constants `√λ_min`, `√λ_max`.
    pub r1: f64,
    pub r2: f64,
    /// `max_j sup |φ_j|` on the grid.
    pub uniform_bound: f64,
    /// Incoherence constant `V = D √K` (with `D = 1` unless set).
    #[serde(with = "extended_f64")]
    pub v: f64,
    /// Incoherence exponent.
    pub r: f64,
}

impl SystemConstants {
    /// Set `V = D √K` for a discretization constant `D`.
    pub fn with_discretization(mut self, d: f64) -> Self {
        self.v = incoherence_fast(self.k, d);
        self
    }
}

/// Bessel and Riesz constants from the continuous `L_2` Gram matrix.
pub fn bessel_riesz_constants(sys: &FunctionSystem) -> SystemConstants {
    let cols: Vec<&[C64]> = sys.grid_columns().iter().map(|c| c.as_slice()).collect();
    let mut sc = bessel_riesz_from_columns(&cols, sys.domain().weights());
    sc.uniform_bound = sys.uniform_bound();
    sc
}

/// As [`bessel_riesz_constants`] for explicit grid columns.
pub fn bessel_riesz_from_columns(cols: &[&[C64]], weights: &[f64]) -> SystemConstants {
    let (vals, _) = hermitian_eigen(&gram(cols, weights));
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let lmin = vals.first().copied().unwrap_or(0.0);
    let singular = lmin <= 1e-12 * lmax || lmin <= 0.0;
    let k = if singular { f64::INFINITY } else { 1.0 / lmin };
    let uniform_bound = cols.iter().flat_map(|c| c.iter().map(|v| v.norm())).fold(0.0, f64::max);
    SystemConstants {
        k,
        r1: if singular { 0.0 } else { lmin.sqrt() },
        r2: lmax.sqrt(),
        uniform_bound,
        v: incoherence_fast(k, 1.0),
        r: 0.5,
    }
}

/// `V = D √K`, the constant of the incoherence property with `r = 1/2`
/// obtained from the Bessel inequality and discretization.
pub fn incoherence_fast(k: f64, d: f64) -> f64 {
    d * k.sqrt()
}

/// Parameters of the brute-force incoherence search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceSearch {
    /// Largest `|A|`.
    pub v: usize,
    /// Largest `|B|`.
    pub s: usize,
    /// Random coefficient vectors per `B`.
    pub draws: usize,
    pub seed: u64,
    pub subset_budget: u64,
}

/// Empirical lower bound on the incoherence constant with `r = 1/2`:
/// the largest `Σ_{i∈A}|c_i| / (|A|^{1/2} ‖Σ_{i∈B} c_i g_i‖_p)` over every
/// `B` with `|B| ≤ s`, every `A ⊂ B` with `|A| ≤ v`, and `draws` random `c` per `B`.
pub fn incoherence_brute(cols: &[&[C64]], weights: &[f64], p: Exponent, search: &IncoherenceSearch) -> Result<f64> {
    let IncoherenceSearch {
        v,
        s,
        draws,
        seed,
        subset_budget,
    } = *search;
    if s > cols.len() || v == 0 || s == 0 {
        return Err(Error::Domain(format!("need 1 ≤ v, 1 ≤ S ≤ N; got v = {v}, S = {s}")));
    }
    let total: u128 = (1..=s).map(|b| crate::combinatorial::binomial(cols.len(), b)).sum();
    if total > subset_budget as u128 {
        return Err(Error::BudgetExceeded {
            subsets: total,
            budget: subset_budget,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = weights.len();
    let mut best: f64 = 0.0;
    let mut values = vec![C64::new(0.0, 0.0); m];
    for size in 1..=s {
        for b in SubsetEnumerator::new(cols.len(), size)? {
            for _ in 0..draws {
                let c: Vec<C64> = (0..size)
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                values.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                for (&j, cj) in b.iter().zip(&c) {
                    for (x, g) in values.iter_mut().zip(cols[j]) {
                        *x += cj * g;
                    }
                }
                let norm = weighted_norm(&values, weights, p);
                if norm == 0.0 {
                    return Ok(f64::INFINITY);
                }
                // For fixed c the best A of size a takes the a largest |c_i|.
                let mut mags: Vec<f64> = c.iter().map(|x| x.norm()).collect();
                mags.sort_by(|x, y| y.total_cmp(x));
                let mut acc = 0.0;
                for (a, mag) in mags.iter().take(v).enumerate() {
                    acc += mag;
                    best = best.max(acc / (((a + 1) as f64).sqrt() * norm));
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub p: f64,
    pub samples: usize,
    pub violations: usize,
    /// Largest `(‖x+uy‖+‖x−uy‖)/2 − 1 − (p−1)u²/2` seen.
    pub max_excess: f64,
}

/// Monte Carlo check of `ρ(L_p, u) ≤ (p−1)u²/2` on random unit pairs in a
/// `dim`-point discrete `L_p` space.
pub fn smoothness_modulus_check(p: f64, num_samples: usize, dim: usize, seed: u64) -> Result<SmoothnessReport> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("smoothness bound needs 2 ≤ p < ∞, got {p}")));
    }
    if dim == 0 {
        return Err(Error::Empty("discrete space"));
    }
    let exp = Exponent::Finite(p);
    let w = uniform_weights(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| -> Vec<C64> {
        loop {
            let x: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let n = weighted_norm(&x, &w, exp);
            if n > 0.0 {
                return x.iter().map(|v| v / n).collect();
            }
        }
    };
    let mut report = SmoothnessReport {
        p,
        samples: num_samples,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for _ in 0..num_samples {
        let x = unit(&mut rng);
        let y = unit(&mut rng);
        // u ∈ (0, 1]
        let u = 1.0 - rng.random_range(0.0..1.0);
        let excess = smoothness_excess(&x, &y, u, p, &w);
        report.max_excess = report.max_excess.max(excess);
        if excess > 1e-12 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// `(‖x+uy‖+‖x−uy‖)/2 − 1 − (p−1)u²/2` for unit `x`, `y`.
pub fn smoothness_excess(x: &[C64], y: &[C64], u: f64, p: f64, weights: &[f64]) -> f64 {
    let exp = Exponent::Finite(p);
    let plus: Vec<C64> = x.iter().zip(y).map(|(a, b)| a + b * u).collect();
    let minus: Vec<C64> = x.iter().zip(y).map(|(a, b)| a - b * u).collect();
    let lhs = 0.5 * (weighted_norm(&plus, weights, exp) + weighted_norm(&minus, weights, exp)) - 1.0;
    lhs - (p - 1.0) * u * u / 2.0
}

/// A test function for a stability audit: grid values and samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub grid: Vec<C64>,
    pub samples: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `max ‖Ψ(S(f,ξ))‖_{L_p(μ)} / ‖S(f,ξ)‖_p`.
    pub a_measured: f64,
    pub homogeneity_ok: bool,
    pub max_homogeneity_error: f64,
    /// Bound the map was audited against (e.g. `2D`), if any.
    pub bound: Option<f64>,
    pub violations: Vec<String>,
    /// Inputs skipped because their sample vector vanishes.
    pub excluded: Vec<usize>,
    /// Largest relative recovery error `‖f − Ψ(S f)‖ / ‖f‖`.
    pub max_relative_error: f64,
    /// Whether the relative errors were all at most 1/2, so that
    /// `‖f‖ ≤ 2A ‖S(f,ξ)‖` must hold on the inputs.
    pub lower_bound_applicable: bool,
    pub lower_bound_violations: usize,
}

/// Stability audit of a recovery map `Ψ: ℂ^m → L_p(μ)` (sample vector to grid values).
pub fn stability_audit(
    map: &dyn Fn(&[C64]) -> Result<Vec<C64>>,
    dom: &GridDomain,
    p: f64,
    inputs: &[TestFunction],
    bound: Option<f64>,
    seed: u64,
) -> Result<StabilityReport> {
    let exp = Exponent::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = StabilityReport {
        a_measured: 0.0,
        homogeneity_ok: true,
        max_homogeneity_error: 0.0,
        bound,
        violations: Vec::new(),
        excluded: Vec::new(),
        max_relative_error: 0.0,
        lower_bound_applicable: false,
        lower_bound_violations: 0,
    };
    let mut kept = Vec::new();
    for (k, f) in inputs.iter().enumerate() {
        if f.grid.len() != dom.len() {
            return Err(Error::Dimension {
                expected: dom.len(),
                found: f.grid.len(),
            });
        }
        let s_norm = weighted_norm(&f.samples, &uniform_weights(f.samples.len()), exp);
        let f_norm = weighted_norm(&f.grid, dom.weights(), exp);
        if s_norm == 0.0 || f_norm == 0.0 {
            report.excluded.push(k);
            continue;
        }
        // Work with f normalized in L_p(μ).
        let y: Vec<C64> = f.samples.iter().map(|v| v / f_norm).collect();
        let s_norm = s_norm / f_norm;
        let out = map(&y)?;
        let out_norm = weighted_norm(&out, dom.weights(), exp);
        let a = out_norm / s_norm;
        report.a_measured = report.a_measured.max(a);
        if let Some(b) = bound {
            if a > b * (1.0 + 1e-9) {
                report
                    .violations
                    .push(format!("input {k}: ratio {a:.6} exceeds bound {b:.6}"));
            }
        }

        let scale = C64::from_polar(
            rng.random_range(0.1..10.0),
            rng.random_range(0.0..std::f64::consts::TAU),
        );
        let scaled: Vec<C64> = y.iter().map(|v| v * scale).collect();
        let scaled_norm = weighted_norm(&map(&scaled)?, dom.weights(), exp);
        let expected = scale.norm() * out_norm;
        let herr = (scaled_norm - expected).abs() / expected.max(f64::MIN_POSITIVE);
        report.max_homogeneity_error = report.max_homogeneity_error.max(herr);
        if herr > 1e-8 && expected > 0.0 {
            report.homogeneity_ok = false;
            report
                .violations
                .push(format!("input {k}: homogeneity error {herr:.3e}"));
        }

        let diff: Vec<C64> = f.grid.iter().zip(&out).map(|(g, o)| g / f_norm - o).collect();
        let rel = weighted_norm(&diff, dom.weights(), exp);
        report.max_relative_error = report.max_relative_error.max(rel);
        kept.push(s_norm);
    }
    report.lower_bound_applicable = !kept.is_empty() && report.max_relative_error <= 0.5;
    if report.lower_bound_applicable {
        let a = report.a_measured;
        report.lower_bound_violations = kept.iter().filter(|&&s| 1.0 > 2.0 * a * s * (1.0 + 1e-12)).count();
        if report.lower_bound_violations > 0 {
            report.violations.push(format!(
                "{} inputs violate ‖f‖ ≤ 2A‖S(f,ξ)‖",
                report.lower_bound_violations
            ));
        }
    }
    Ok(report)
}
