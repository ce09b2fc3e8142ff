//! Exhaustive subset search: Algorithms 1 and 2, the discrete best `v`-term
//! operator and brute-force `σ_v` oracles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{uniform_weights, weighted_mixed_measure_weights, weighted_norm, Exponent, SampleSet, C64};
use crate::error::{Error, Result};
use crate::linalg::{combine, weighted_least_squares};
use crate::lp_solver::{lpw_recover, project_with, ProjectionProblem, SolverOptions};
use crate::serde_ext::extended_f64;
use crate::systems::{sample_grid_values, FunctionSystem};

/// Default cap on the number of subsets any exhaustive search may visit.
pub const DEFAULT_SUBSET_BUDGET: u64 = 100_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(x) => x / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `v`-subsets of `{0, …, N−1}` in lexicographic order.
#[derive(Debug, Clone)]
pub struct SubsetEnumerator {
    n: usize,
    v: usize,
    current: Option<Vec<usize>>,
}

impl SubsetEnumerator {
    pub fn new(n: usize, v: usize) -> Result<Self> {
        if v > n {
            return Err(Error::Domain(format!("subset size {v} exceeds N = {n}")));
        }
        Ok(SubsetEnumerator {
            n,
            v,
            current: Some((0..v).collect()),
        })
    }

    /// Like [`SubsetEnumerator::new`] but refuses when `C(N, v)` exceeds `budget`.
    pub fn with_budget(n: usize, v: usize, budget: u64) -> Result<Self> {
        let e = Self::new(n, v)?;
        let total = e.total();
        if total > budget as u128 {
            return Err(Error::BudgetExceeded { subsets: total, budget });
        }
        Ok(e)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn v(&self) -> usize {
        self.v
    }

    /// `C(N, v)`.
    pub fn total(&self) -> u128 {
        binomial(self.n, self.v)
    }
}

impl Iterator for SubsetEnumerator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let (n, v) = (self.n, self.v);
        let mut next = out.clone();
        let mut i = v;
        while i > 0 {
            i -= 1;
            if next[i] < n - v + i {
                next[i] += 1;
                for k in i + 1..v {
                    next[k] = next[k - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Subsets handled per parallel batch by the pruned oracle.
const BATCH: usize = 64;

/// Consecutive ranges of sizes 1, 1, 2, 4, …, capped at `BATCH`. The schedule
/// is fixed so results do not depend on the thread count.
fn growing_batches(len: usize) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let (mut start, mut size) = (0, 1);
    while start < len {
        let end = (start + size).min(len);
        out.push(start..end);
        if start > 0 {
            size = (2 * size).min(BATCH);
        }
        start = end;
    }
    out
}

fn score_key(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

/// All subsets, their scored results, and the index of the best one.
type Exhaustive<T> = (Vec<Vec<usize>>, Vec<(f64, T)>, usize);

/// Evaluate `eval` on every subset; the best index has the smallest score
/// (first in lexicographic order on ties).
fn exhaustive_min<T, F>(n: usize, v: usize, budget: u64, eval: F) -> Result<Exhaustive<T>>
where
    T: Send,
    F: Fn(&[usize]) -> Result<(f64, T)> + Sync,
{
    let subsets: Vec<Vec<usize>> = SubsetEnumerator::with_budget(n, v, budget)?.collect();
    let results: Vec<(f64, T)> = subsets.par_iter().map(|s| eval(s)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, (score, _)) in results.iter().enumerate() {
        if score_key(*score) < score_key(results[best].0) {
            best = k;
        }
    }
    Ok((subsets, results, best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub subset_budget: u64,
    /// Solver tolerance for each subset fit.
    pub tol: f64,
}

impl RecoveryOptions {
    pub fn for_exponent(p: Exponent) -> Self {
        RecoveryOptions {
            subset_budget: DEFAULT_SUBSET_BUDGET,
            tol: SolverOptions::for_exponent(p).tol,
        }
    }
}

/// Output of Algorithm 1 or 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutcome {
    pub chosen_support: Vec<usize>,
    pub approximant_coeffs: Vec<C64>,
    /// `‖f − A(f)‖_{L_p(μ)}`, when grid values of `f` are known.
    pub error_continuous: Option<f64>,
    /// `‖S(f − A(f), ξ)‖_{p,w}`.
    pub error_sample: f64,
    pub subsets_examined: u64,
}

impl RecoveryOutcome {
    /// Grid values of the recovered element.
    pub fn approximant_on_grid(&self, sys: &FunctionSystem) -> Vec<C64> {
        combine(
            &sys.grid_columns_of(&self.chosen_support),
            &self.approximant_coeffs,
            sys.domain().len(),
        )
    }

    /// Fill in the continuous error from grid values of `f`.
    pub fn with_continuous_error(mut self, f_grid: &[C64], sys: &FunctionSystem, p: Exponent) -> Result<Self> {
        self.error_continuous = Some(continuous_error(f_grid, &self.approximant_on_grid(sys), sys, p)?);
        Ok(self)
    }
}

fn continuous_error(f_grid: &[C64], approx: &[C64], sys: &FunctionSystem, p: Exponent) -> Result<f64> {
    if f_grid.len() != approx.len() {
        return Err(Error::Dimension {
            expected: approx.len(),
            found: f_grid.len(),
        });
    }
    let diff: Vec<C64> = f_grid.iter().zip(approx).map(|(a, b)| a - b).collect();
    Ok(weighted_norm(&diff, sys.domain().weights(), p))
}

struct SampleFit {
    coeffs: Vec<C64>,
    error_sample: f64,
}

fn fit_on_samples(
    f_samples: &[C64],
    cols: &[Vec<C64>],
    support: &[usize],
    p: Exponent,
    weights: Option<&[f64]>,
    tol: f64,
) -> Result<SampleFit> {
    let basis: Vec<&[C64]> = support.iter().map(|&j| cols[j].as_slice()).collect();
    let fit = lpw_recover(f_samples, &basis, p, weights, tol)?;
    Ok(SampleFit {
        coeffs: fit.coeffs,
        error_sample: fit.residual_norm,
    })
}

fn check_samples(f_samples: &[C64], xi: &SampleSet) -> Result<()> {
    if f_samples.len() != xi.len() {
        return Err(Error::Dimension {
            expected: xi.len(),
            found: f_samples.len(),
        });
    }
    Ok(())
}

/// Algorithm 1: fit every `v`-subset from samples, keep the one with the
/// smallest continuous error (uses grid values of `f`).
pub fn algorithm1(
    f_grid: &[C64],
    f_samples: &[C64],
    sys: &FunctionSystem,
    xi: &SampleSet,
    v: usize,
    p: Exponent,
    opts: &RecoveryOptions,
) -> Result<RecoveryOutcome> {
    check_samples(f_samples, xi)?;
    if f_grid.len() != sys.domain().len() {
        return Err(Error::Dimension {
            expected: sys.domain().len(),
            found: f_grid.len(),
        });
    }
    let cols = sys.sample_matrix(xi)?;
    let (subsets, results, best) = exhaustive_min(sys.len(), v, opts.subset_budget, |support| {
        let fit = fit_on_samples(f_samples, &cols, support, p, xi.weights(), opts.tol)?;
        let approx = combine(&sys.grid_columns_of(support), &fit.coeffs, sys.domain().len());
        let err = continuous_error(f_grid, &approx, sys, p)?;
        Ok((err, fit))
    })?;
    let (err, fit) = &results[best];
    Ok(RecoveryOutcome {
        chosen_support: subsets[best].clone(),
        approximant_coeffs: fit.coeffs.clone(),
        error_continuous: Some(*err),
        error_sample: fit.error_sample,
        subsets_examined: subsets.len() as u64,
    })
}

/// Algorithm 2: the discrete best `v`-term approximation in `L_p(ξ)`.
pub fn algorithm2(
    f_samples: &[C64],
    sys: &FunctionSystem,
    xi: &SampleSet,
    v: usize,
    p: Exponent,
    opts: &RecoveryOptions,
) -> Result<RecoveryOutcome> {
    check_samples(f_samples, xi)?;
    let cols = sys.sample_matrix(xi)?;
    let (subsets, results, best) = exhaustive_min(sys.len(), v, opts.subset_budget, |support| {
        let fit = fit_on_samples(f_samples, &cols, support, p, xi.weights(), opts.tol)?;
        Ok((fit.error_sample, fit))
    })?;
    let (_, fit) = &results[best];
    Ok(RecoveryOutcome {
        chosen_support: subsets[best].clone(),
        approximant_coeffs: fit.coeffs.clone(),
        error_continuous: None,
        error_sample: fit.error_sample,
        subsets_examined: subsets.len() as u64,
    })
}

/// Norm in which `σ_v` is measured.
#[derive(Debug, Clone, Copy)]
pub enum NormSpec<'a> {
    /// `L_p(μ)` on the grid.
    Continuous(f64),
    /// `‖S(·, ξ)‖_{p,w}` (normalized counting measure unless `ξ` carries weights).
    Sample { xi: &'a SampleSet, p: f64 },
    /// Uniform norm on the grid.
    Sup,
    /// `L_p(μ_{w,ξ})`, the average of `μ` and the sample measure.
    Mixed { xi: &'a SampleSet, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaV {
    /// Best error found; an upper bound on `σ_v` (exact up to solver tolerance for finite `p`).
    #[serde(with = "extended_f64")]
    pub value: f64,
    /// Certified lower bound on `σ_v` for the uniform norm; equals `value` otherwise.
    #[serde(with = "extended_f64")]
    pub lower_bound: f64,
    pub support: Vec<usize>,
    pub coeffs: Vec<C64>,
    pub subsets_evaluated: u64,
    /// Subsets skipped because their `L_2` distance already exceeded the best value.
    pub subsets_pruned: u64,
}

/// `σ_v(f, 𝒟_N)` by exhaustive search over supports, from grid values of `f`.
pub fn sigma_v_oracle(
    f_grid: &[C64],
    sys: &FunctionSystem,
    v: usize,
    spec: NormSpec<'_>,
    subset_budget: u64,
) -> Result<SigmaV> {
    let dom = sys.domain();
    if f_grid.len() != dom.len() {
        return Err(Error::Dimension {
            expected: dom.len(),
            found: f_grid.len(),
        });
    }
    match spec {
        NormSpec::Continuous(p) => {
            let cols: Vec<&[C64]> = sys.grid_columns().iter().map(|c| c.as_slice()).collect();
            sigma_v_on_columns(f_grid, &cols, dom.weights(), Exponent::new(p)?, v, subset_budget)
        }
        NormSpec::Sup => {
            let cols: Vec<&[C64]> = sys.grid_columns().iter().map(|c| c.as_slice()).collect();
            sigma_v_on_columns(
                f_grid,
                &cols,
                &uniform_weights(dom.len()),
                Exponent::Infinite,
                v,
                subset_budget,
            )
        }
        NormSpec::Sample { xi, p } => {
            let target = sample_grid_values(f_grid, dom, xi)?;
            let cols = sys.sample_matrix(xi)?;
            let refs: Vec<&[C64]> = cols.iter().map(|c| c.as_slice()).collect();
            sigma_v_on_columns(
                &target,
                &refs,
                &xi.effective_weights(),
                Exponent::new(p)?,
                v,
                subset_budget,
            )
        }
        NormSpec::Mixed { xi, p } => {
            let mut target = f_grid.to_vec();
            target.extend(sample_grid_values(f_grid, dom, xi)?);
            let samples = sys.sample_matrix(xi)?;
            let cols: Vec<Vec<C64>> = sys
                .grid_columns()
                .iter()
                .zip(&samples)
                .map(|(g, s)| g.iter().chain(s).copied().collect())
                .collect();
            let refs: Vec<&[C64]> = cols.iter().map(|c| c.as_slice()).collect();
            let weights = weighted_mixed_measure_weights(dom, &xi.effective_weights());
            sigma_v_on_columns(&target, &refs, &weights, Exponent::new(p)?, v, subset_budget)
        }
    }
}

/// `min_{|S| = v} min_c ‖target − Σ_{j∈S} c_j col_j‖_{p,w}` over explicit columns.
///
/// For `p ≥ 2` and probability weights `‖·‖_p ≥ ‖·‖_2`, so the least-squares
/// distance of a subset bounds its `L_p` distance from below. Subsets are
/// visited by increasing `L_2` distance and skipped once that distance
/// exceeds the best value found; the result equals the unpruned search.
pub fn sigma_v_on_columns(
    target: &[C64],
    cols: &[&[C64]],
    weights: &[f64],
    p: Exponent,
    v: usize,
    subset_budget: u64,
) -> Result<SigmaV> {
    if target.len() != weights.len() {
        return Err(Error::Dimension {
            expected: weights.len(),
            found: target.len(),
        });
    }
    let subsets: Vec<Vec<usize>> = SubsetEnumerator::with_budget(cols.len(), v, subset_budget)?.collect();
    let total: f64 = weights.iter().sum();
    let probability = (total - 1.0).abs() <= 1e-9;
    let prunable = probability && p.as_f64() >= 2.0;
    let tol = SolverOptions::for_exponent(p).tol;

    // A subset whose certified lower bound exceeds `cutoff` cannot be the minimizer.
    let solve = |support: &[usize], cutoff: f64| -> Result<(f64, f64, Vec<C64>)> {
        let prob = ProjectionProblem {
            target,
            basis: support.iter().map(|&j| cols[j]).collect(),
            p,
            weights,
        };
        let mut opts = SolverOptions::for_exponent(p).with_tol(tol);
        opts.abandon_above = cutoff.is_finite().then_some(cutoff);
        let res = project_with(&prob, &opts, None)?;
        let lower = res.lower_bound.unwrap_or(res.residual_norm);
        Ok((res.residual_norm, lower, res.coeffs))
    };

    let mut order: Vec<usize> = (0..subsets.len()).collect();
    let mut l2 = vec![0.0; subsets.len()];
    if prunable {
        l2 = subsets
            .par_iter()
            .map(|support| {
                let basis: Vec<&[C64]> = support.iter().map(|&j| cols[j]).collect();
                let ls = weighted_least_squares(&basis, target, weights);
                let fit = combine(&basis, &ls.coeffs, target.len());
                let r: Vec<C64> = target.iter().zip(&fit).map(|(a, b)| a - b).collect();
                weighted_norm(&r, weights, Exponent::Finite(2.0))
            })
            .collect();
        order.sort_by(|&a, &b| l2[a].total_cmp(&l2[b]).then(a.cmp(&b)));
    }

    let mut best: Option<(f64, usize, Vec<C64>)> = None;
    let mut lower = f64::INFINITY;
    let mut evaluated = 0u64;
    let mut pruned = 0u64;
    for range in growing_batches(order.len()) {
        let batch = &order[range];
        let cutoff = best.as_ref().map_or(f64::INFINITY, |b| b.0 * (1.0 + 1e-9) + 1e-300);
        let (todo, skipped): (Vec<usize>, Vec<usize>) = batch.iter().partition(|&&k| !(prunable && l2[k] > cutoff));
        let results = todo
            .par_iter()
            .map(|&k| solve(&subsets[k], cutoff))
            .collect::<Result<Vec<_>>>()?;
        for (&k, (value, lo, coeffs)) in todo.iter().zip(results) {
            evaluated += 1;
            lower = lower.min(lo);
            let better = match &best {
                None => true,
                Some((bv, bk, _)) => {
                    score_key(value) < score_key(*bv) || (score_key(value) == score_key(*bv) && k < *bk)
                }
            };
            if better {
                best = Some((value, k, coeffs));
            }
        }
        for &k in &skipped {
            lower = lower.min(l2[k]);
        }
        pruned += skipped.len() as u64;
        if !skipped.is_empty() {
            // Sorted by L2 distance: everything after is pruned too.
            let seen = (evaluated + pruned) as usize;
            if let Some(&k) = order.get(seen) {
                lower = lower.min(l2[k]);
            }
            pruned += (order.len() - seen) as u64;
            break;
        }
    }
    let (value, k, coeffs) = best.ok_or(Error::Empty("subset collection"))?;
    Ok(SigmaV {
        value,
        lower_bound: lower.min(value),
        support: subsets[k].clone(),
        coeffs,
        subsets_evaluated: evaluated,
        subsets_pruned: pruned,
    })
}

/// One recovery error paired with the matching best `v`-term error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LebesgueRun {
    pub error: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LebesgueReport {
    /// `error / σ_v` per run; exact recoveries count as 1.
    #[serde(with = "extended_vec")]
    pub ratios: Vec<f64>,
    #[serde(with = "extended_f64")]
    pub max: f64,
    #[serde(with = "extended_f64")]
    pub median: f64,
    /// Runs with `σ_v = 0` but a nonzero error.
    pub exact_recovery_failures: Vec<usize>,
}

mod extended_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::serde_ext::extended_f64")] f64);

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&x| Wrap(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

/// Empirical Lebesgue constants `max / median of error / σ_v`. Values at or
/// below `zero_tol` count as zero.
pub fn empirical_lebesgue_constants(runs: &[LebesgueRun], zero_tol: f64) -> LebesgueReport {
    let mut failures = Vec::new();
    let ratios: Vec<f64> = runs
        .iter()
        .enumerate()
        .map(|(k, r)| {
            if r.sigma <= zero_tol {
                if r.error <= zero_tol {
                    1.0
                } else {
                    failures.push(k);
                    f64::INFINITY
                }
            } else {
                r.error / r.sigma
            }
        })
        .collect();
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = match sorted.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    };
    LebesgueReport {
        max: sorted.last().copied().unwrap_or(f64::NAN),
        median,
        ratios,
        exact_recovery_failures: failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    use crate::domain::GridDomain;
    use crate::systems::{EvalSite, SparseElement};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn trig(n: usize, g: usize) -> FunctionSystem {
        let dom = GridDomain::uniform_torus(g, 1).unwrap();
        FunctionSystem::trig(n, &dom).unwrap()
    }

    fn uniform_points(sys: &FunctionSystem, m: usize) -> SampleSet {
        let g = sys.domain().len();
        SampleSet::on_grid(sys.domain(), (0..m).map(|k| k * g / m).collect()).unwrap()
    }

    fn element(sys: &FunctionSystem, support: Vec<usize>, coeffs: Vec<f64>) -> Vec<C64> {
        let e = SparseElement::new(support, coeffs.into_iter().map(c).collect()).unwrap();
        sys.evaluate_sparse(&e, EvalSite::Grid).unwrap()
    }

    #[test]
    fn oracle_on_orthonormal_samples() {
        let sys = trig(4, 32);
        let xi = uniform_points(&sys, 8);
        let f = element(&sys, vec![1, 2], vec![1.0, 0.1]);
        let s = sigma_v_oracle(&f, &sys, 1, NormSpec::Sample { xi: &xi, p: 2.0 }, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!((s.value - 0.1).abs() < 1e-12);
        assert_eq!(s.support, vec![1]);
        let s2 = sigma_v_oracle(&f, &sys, 2, NormSpec::Sample { xi: &xi, p: 2.0 }, DEFAULT_SUBSET_BUDGET).unwrap();
        assert!(s2.value < 1e-12);
        assert_eq!(s2.support, vec![1, 2]);
        for spec in [
            NormSpec::Continuous(3.0),
            NormSpec::Sup,
            NormSpec::Mixed { xi: &xi, p: 4.0 },
        ] {
            let s = sigma_v_oracle(&f, &sys, 2, spec, DEFAULT_SUBSET_BUDGET).unwrap();
            assert!(s.value < 1e-6, "{spec:?}: {}", s.value);
        }
    }

    /// Coordinate pattern search over the four real coefficients of a
    /// 2-support, refined from step 1 down to 1e-6.
    fn sweep_two_support(f: &[C64], a: &[C64], b: &[C64], w: &[f64], p: f64) -> f64 {
        let eval = |x: &[f64; 4]| {
            let r: Vec<C64> = (0..f.len())
                .map(|i| f[i] - a[i] * C64::new(x[0], x[1]) - b[i] * C64::new(x[2], x[3]))
                .collect();
            weighted_norm(&r, w, Exponent::Finite(p))
        };
        // Coarse grid first.
        let mut best = ([0.0; 4], f64::INFINITY);
        let ticks: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.25).collect();
        for &x0 in &ticks {
            for &x1 in &ticks {
                for &x2 in &ticks {
                    for &x3 in &ticks {
                        let x = [x0, x1, x2, x3];
                        let v = eval(&x);
                        if v < best.1 {
                            best = (x, v);
                        }
                    }
                }
            }
        }
        let mut h = 0.125;
        while h > 1e-7 {
            let mut moved = false;
            for k in 0..4 {
                for s in [-1.0, 1.0] {
                    let mut x = best.0;
                    x[k] += s * h;
                    let v = eval(&x);
                    if v < best.1 {
                        best = (x, v);
                        moved = true;
                    }
                }
            }
            if !moved {
                h *= 0.5;
            }
        }
        best.1
    }

    #[test]
    fn oracle_matches_coefficient_sweep_at_p4() {
        let sys = trig(4, 64);
        let f = element(&sys, vec![0, 1, 2], vec![1.0, 1.0, 1.0]);
        let s = sigma_v_oracle(&f, &sys, 2, NormSpec::Continuous(4.0), DEFAULT_SUBSET_BUDGET).unwrap();
        let w = sys.domain().weights();
        let swept = SubsetEnumerator::new(4, 2)
            .unwrap()
            .map(|pair| sweep_two_support(&f, sys.grid_column(pair[0]), sys.grid_column(pair[1]), w, 4.0))
            .fold(f64::INFINITY, f64::min);
        assert!((s.value - swept).abs() < 1e-4, "{} vs {swept}", s.value);
    }

    /// The pruned search agrees with evaluating every subset.
    #[test]
    fn pruning_preserves_the_minimizer() {
        let sys = trig(8, 64);
        let f: Vec<C64> = (0..64)
            .map(|k| C64::new(((k * 37) % 11) as f64 / 11.0 - 0.5, ((k * 13) % 7) as f64 / 7.0))
            .collect();
        let cols: Vec<&[C64]> = sys.grid_columns().iter().map(|c| c.as_slice()).collect();
        let w = sys.domain().weights();
        for p in [Exponent::Finite(4.0), Exponent::Infinite] {
            let pruned = sigma_v_on_columns(&f, &cols, w, p, 2, DEFAULT_SUBSET_BUDGET).unwrap();
            let mut best = (f64::INFINITY, vec![]);
            for support in SubsetEnumerator::new(8, 2).unwrap() {
                let prob = ProjectionProblem {
                    target: &f,
                    basis: support.iter().map(|&j| cols[j]).collect(),
                    p,
                    weights: w,
                };
                let r = crate::lp_solver::project(&prob, SolverOptions::for_exponent(p).tol).unwrap();
                if r.residual_norm < best.0 {
                    best = (r.residual_norm, support);
                }
            }
            assert_eq!(pruned.value, best.0);
            assert_eq!(pruned.support, best.1);
            assert!(pruned.lower_bound <= pruned.value);
        }
    }

    #[test]
    fn algorithm1_picks_the_dominant_term() {
        let sys = trig(6, 64);
        let xi = uniform_points(&sys, 12);
        let f = element(&sys, vec![2, 4], vec![1.0, 0.05]);
        let fs = sample_grid_values(&f, sys.domain(), &xi).unwrap();
        let p = Exponent::Finite(2.0);
        let out = algorithm1(&f, &fs, &sys, &xi, 1, p, &RecoveryOptions::for_exponent(p)).unwrap();
        assert_eq!(out.chosen_support, vec![2]);
        assert_eq!(out.subsets_examined, 6);
        assert!((out.error_continuous.unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn full_support_equals_full_projection() {
        let sys = trig(5, 64);
        let xi = uniform_points(&sys, 16);
        let f: Vec<C64> = sys.domain().points().iter().map(|x| c((7.0 * x[0]).cos())).collect();
        let fs = sample_grid_values(&f, sys.domain(), &xi).unwrap();
        let p = Exponent::Finite(3.0);
        let opts = RecoveryOptions::for_exponent(p);
        let out = algorithm2(&fs, &sys, &xi, 5, p, &opts).unwrap();
        let cols = sys.sample_matrix(&xi).unwrap();
        let refs: Vec<&[C64]> = cols.iter().map(|c| c.as_slice()).collect();
        let full = lpw_recover(&fs, &refs, p, None, opts.tol).unwrap();
        assert_eq!(out.error_sample, full.residual_norm);
        let a1 = algorithm1(&f, &fs, &sys, &xi, 5, p, &opts).unwrap();
        assert_eq!(a1.chosen_support, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn algorithm2_matches_reverse_exhaustive_search() {
        let sys = trig(6, 64);
        let xi = uniform_points(&sys, 12);
        let f = element(&sys, vec![2, 4], vec![1.0, 0.05]);
        let fs = sample_grid_values(&f, sys.domain(), &xi).unwrap();
        let cols = sys.sample_matrix(&xi).unwrap();
        for p in [Exponent::Finite(2.0), Exponent::Finite(4.0)] {
            let opts = RecoveryOptions::for_exponent(p);
            let out = algorithm2(&fs, &sys, &xi, 1, p, &opts).unwrap();
            let mut best = (f64::INFINITY, 0);
            for j in (0..6).rev() {
                let r = lpw_recover(&fs, &[&cols[j]], p, None, opts.tol).unwrap();
                if r.residual_norm <= best.0 {
                    best = (r.residual_norm, j);
                }
            }
            assert_eq!(out.chosen_support, vec![best.1]);
            assert_eq!(out.error_sample, best.0);
            let oracle = sigma_v_oracle(
                &f,
                &sys,
                1,
                NormSpec::Sample { xi: &xi, p: p.as_f64() },
                DEFAULT_SUBSET_BUDGET,
            )
            .unwrap();
            assert_eq!(oracle.value, out.error_sample);
        }
    }

    #[test]
    fn lebesgue_report_conventions() {
        let runs = [
            LebesgueRun { error: 0.0, sigma: 0.0 },
            LebesgueRun { error: 0.2, sigma: 0.1 },
            LebesgueRun { error: 0.3, sigma: 0.1 },
        ];
        let rep = empirical_lebesgue_constants(&runs, 1e-12);
        assert_eq!(rep.ratios[0], 1.0);
        assert!((rep.ratios[1] - 2.0).abs() < 1e-12);
        assert!((rep.max - 3.0).abs() < 1e-12);
        assert!((rep.median - 2.0).abs() < 1e-12);
        let bad = empirical_lebesgue_constants(&[LebesgueRun { error: 0.5, sigma: 0.0 }], 1e-12);
        assert_eq!(bad.exact_recovery_failures, vec![0]);
        assert!(bad.max.is_infinite());
        let json = serde_json::to_string(&bad).unwrap();
        assert!(json.contains("inf"));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(16, 5), 4368);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let all: Vec<Vec<usize>> = SubsetEnumerator::new(6, 3).unwrap().collect();
        assert_eq!(all.len(), 20);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[1], vec![0, 1, 3]);
        assert_eq!(all[19], vec![3, 4, 5]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let distinct: HashSet<_> = all.iter().cloned().collect();
        assert_eq!(distinct.len(), 20);
        assert_eq!(SubsetEnumerator::new(4, 0).unwrap().count(), 1);
        assert_eq!(SubsetEnumerator::new(4, 4).unwrap().count(), 1);
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            SubsetEnumerator::with_budget(30, 10, DEFAULT_SUBSET_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(SubsetEnumerator::new(3, 4).is_err());
    }

    #[test]
    fn batch_schedule_grows_and_covers() {
        let ranges = growing_batches(200);
        let sizes: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
        assert_eq!(&sizes[..8], &[1, 1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(ranges.last().unwrap().end, 200);
        assert!(ranges.windows(2).all(|w| w[0].end == w[1].start));
        assert!(growing_batches(0).is_empty());
    }
}
