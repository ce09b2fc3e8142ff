//! Sampling discretization of `L_p` norms on subspaces.
//!
//! For a subspace `X` and points `ξ` the one-sided constant is
//! `D = sup_{f∈X} ‖f‖_{L_p(μ)} / ‖S(f,ξ)‖_{p,w}`; the two-sided form reports
//! the smallest `ε` with `(1−ε)‖f‖_p^p ≤ ‖S(f,ξ)‖_p^p ≤ (1+ε)‖f‖_p^p`.
//! At `p = 2` both come from a generalized eigenproblem and are exact; for
//! other `p` they are found by multi-start ascent and are lower bounds on the
//! true worst case.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorial::{SubsetEnumerator, DEFAULT_SUBSET_BUDGET};
use crate::domain::{SampleSet, C64};
use crate::error::{Error, Result};
use crate::linalg::{generalized_extremes, gram, hermitian_eigen};
use crate::serde_ext::extended_f64;
use crate::systems::FunctionSystem;

pub const DEFAULT_RESTARTS: usize = 32;

/// Sample/continuous Gram ratios below this count as a vanishing sample norm.
const NULL_LEVEL: f64 = 1e-12;

/// Subsets evaluated per parallel batch before checking the abort threshold.
const BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// `‖f‖ ≤ D ‖S(f,ξ)‖`, constant `D ≥ 1` (or infinite).
    OneSided,
    /// `(1−ε)‖f‖^p ≤ ‖S(f,ξ)‖^p ≤ (1+ε)‖f‖^p`, constant `ε`.
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    /// Random starting points in addition to the `p = 2` extremal vector.
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            restarts: DEFAULT_RESTARTS,
            max_iterations: 200,
            seed: 0,
        }
    }
}

/// Extremes of `‖S(f,ξ)‖_{p,w} / ‖f‖_{L_p(μ)}` over one subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceExtremes {
    /// Smallest ratio found; `D = 1 / min_ratio`.
    pub min_ratio: f64,
    pub min_witness: Vec<C64>,
    /// Largest ratio found (only searched when requested).
    pub max_ratio: Option<f64>,
    pub max_witness: Option<Vec<C64>>,
    pub exact: bool,
}

impl SubspaceExtremes {
    /// One-sided constant `D`.
    pub fn constant(&self) -> f64 {
        if self.min_ratio <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.min_ratio
        }
    }

    /// Two-sided `ε` in the `p`-th power form.
    pub fn epsilon(&self, p: f64) -> f64 {
        let lo = 1.0 - self.min_ratio.powf(p);
        let hi = self.max_ratio.map_or(0.0, |r| r.powf(p) - 1.0);
        lo.max(hi)
    }
}

/// One-sided constant of a single subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceConstant {
    pub constant: f64,
    pub witness: Vec<C64>,
    pub exact: bool,
}

/// A subspace given by its columns on the grid and at the sample points.
#[derive(Debug, Clone, Copy)]
pub struct Subspace<'a> {
    pub grid_cols: &'a [&'a [C64]],
    pub grid_weights: &'a [f64],
    pub sample_cols: &'a [&'a [C64]],
    pub sample_weights: &'a [f64],
}

impl Subspace<'_> {
    fn validate(&self) -> Result<()> {
        if self.grid_cols.is_empty() {
            return Err(Error::Empty("subspace basis"));
        }
        if self.grid_cols.len() != self.sample_cols.len() {
            return Err(Error::Dimension {
                expected: self.grid_cols.len(),
                found: self.sample_cols.len(),
            });
        }
        for (cols, w) in [
            (self.grid_cols, self.grid_weights),
            (self.sample_cols, self.sample_weights),
        ] {
            if let Some(c) = cols.iter().find(|c| c.len() != w.len()) {
                return Err(Error::Dimension {
                    expected: w.len(),
                    found: c.len(),
                });
            }
        }
        Ok(())
    }
}

/// `D` for one subspace (exact at `p = 2`).
pub fn subspace_constant(sub: &Subspace<'_>, p: f64, opts: &AscentOptions) -> Result<SubspaceConstant> {
    let ex = subspace_extremes(sub, p, false, opts)?;
    Ok(SubspaceConstant {
        constant: ex.constant(),
        witness: ex.min_witness,
        exact: ex.exact,
    })
}

/// Extreme sample-to-continuous norm ratios over one subspace.
pub fn subspace_extremes(sub: &Subspace<'_>, p: f64, want_max: bool, opts: &AscentOptions) -> Result<SubspaceExtremes> {
    sub.validate()?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("discretization needs 1 ≤ p < ∞, got {p}")));
    }
    let gc = gram(sub.grid_cols, sub.grid_weights);
    let gs = gram(sub.sample_cols, sub.sample_weights);
    let (cvals, _) = hermitian_eigen(&gc);
    let cmax = cvals.last().copied().unwrap_or(0.0);
    if cmax <= 0.0 || cvals[0] <= 1e-12 * cmax {
        return Err(Error::Degenerate("basis is dependent on the grid".into()));
    }
    let (lo, vlo, hi, vhi) =
        generalized_extremes(&gc, &gs).ok_or_else(|| Error::Degenerate("continuous Gram".into()))?;

    if lo <= NULL_LEVEL {
        // A nonzero element vanishes at every sample point, for every p.
        return Ok(SubspaceExtremes {
            min_ratio: 0.0,
            min_witness: vlo,
            max_ratio: want_max.then(|| hi.max(0.0).sqrt()),
            max_witness: want_max.then_some(vhi),
            exact: true,
        });
    }
    if p == 2.0 {
        return Ok(SubspaceExtremes {
            min_ratio: lo.sqrt(),
            min_witness: vlo,
            max_ratio: want_max.then(|| hi.sqrt()),
            max_witness: want_max.then_some(vhi),
            exact: true,
        });
    }

    let pencil = Pencil::new(sub, p);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<Vec<C64>> = (0..opts.restarts)
        .map(|_| {
            (0..pencil.n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();

    let (min_obj, min_witness) = pencil.best_of(Direction::Min, &vlo, &starts, opts.max_iterations);
    let (max_ratio, max_witness) = if want_max {
        let (obj, w) = pencil.best_of(Direction::Max, &vhi, &starts, opts.max_iterations);
        (Some(obj.exp()), Some(w))
    } else {
        (None, None)
    };
    Ok(SubspaceExtremes {
        // `min_obj` is ln(‖f‖ / ‖S f‖).
        min_ratio: (-min_obj).exp(),
        min_witness,
        max_ratio,
        max_witness,
        exact: false,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    /// Maximize ln‖f‖ − ln‖S f‖.
    Min,
    /// Maximize ln‖S f‖ − ln‖f‖.
    Max,
}

/// Dense column-major copies of both sides of a subspace.
struct Pencil {
    n: usize,
    p: f64,
    grid: Side,
    samples: Side,
}

struct Side {
    rows: usize,
    data: Vec<C64>,
    weights: Vec<f64>,
}

impl Side {
    fn new(cols: &[&[C64]], weights: &[f64]) -> Side {
        Side {
            rows: weights.len(),
            data: cols.iter().flat_map(|c| c.iter().copied()).collect(),
            weights: weights.to_vec(),
        }
    }

    /// `ln ‖A c‖_{p,w}`, adding its gradient (complex form) times `scale` to `grad`.
    fn log_norm(&self, c: &[C64], p: f64, grad: Option<(&mut [C64], f64)>, y: &mut Vec<C64>) -> f64 {
        y.clear();
        y.resize(self.rows, C64::new(0.0, 0.0));
        for (j, &cj) in c.iter().enumerate() {
            let col = &self.data[j * self.rows..(j + 1) * self.rows];
            for (yi, a) in y.iter_mut().zip(col) {
                *yi += cj * a;
            }
        }
        let half = 0.5 * (p - 2.0);
        let even = half.fract() == 0.0;
        let mut phi = 0.0;
        for (yi, &w) in y.iter_mut().zip(&self.weights) {
            let sq = yi.norm_sqr();
            let factor = if half == 0.0 {
                1.0
            } else if sq == 0.0 {
                0.0
            } else if even {
                sq.powi(half as i32)
            } else {
                sq.powf(half)
            };
            phi += w * factor * sq;
            // y now holds w |y|^{p−2} y for the gradient pass.
            *yi *= w * factor;
        }
        if phi <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if let Some((g, scale)) = grad {
            let s = scale / phi;
            for (j, gj) in g.iter_mut().enumerate() {
                let col = &self.data[j * self.rows..(j + 1) * self.rows];
                let dot: C64 = col.iter().zip(y.iter()).map(|(a, z)| a.conj() * z).sum();
                *gj += dot * s;
            }
        }
        phi.ln() / p
    }
}

impl Pencil {
    fn new(sub: &Subspace<'_>, p: f64) -> Pencil {
        Pencil {
            n: sub.grid_cols.len(),
            p,
            grid: Side::new(sub.grid_cols, sub.grid_weights),
            samples: Side::new(sub.sample_cols, sub.sample_weights),
        }
    }

    fn objective(&self, dir: Direction, c: &[C64], grad: Option<&mut [C64]>, buf: &mut Vec<C64>) -> f64 {
        let sign = if dir == Direction::Min { 1.0 } else { -1.0 };
        match grad {
            Some(g) => {
                g.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                let a = self.grid.log_norm(c, self.p, Some((&mut *g, sign)), buf);
                let b = self.samples.log_norm(c, self.p, Some((g, -sign)), buf);
                sign * (a - b)
            }
            None => {
                let a = self.grid.log_norm(c, self.p, None, buf);
                let b = self.samples.log_norm(c, self.p, None, buf);
                sign * (a - b)
            }
        }
    }

    fn best_of(&self, dir: Direction, first: &[C64], starts: &[Vec<C64>], max_iterations: usize) -> (f64, Vec<C64>) {
        let mut best = self.ascend(dir, first, max_iterations);
        for s in starts {
            let cand = self.ascend(dir, s, max_iterations);
            if cand.0 > best.0 {
                best = cand;
            }
            if best.0.is_infinite() {
                break;
            }
        }
        best
    }

    /// Normalized gradient ascent on the unit sphere with backtracking.
    fn ascend(&self, dir: Direction, start: &[C64], max_iterations: usize) -> (f64, Vec<C64>) {
        let mut buf = Vec::new();
        let mut c = normalized(start);
        let mut grad = vec![C64::new(0.0, 0.0); self.n];
        let mut val = self.objective(dir, &c, Some(&mut grad), &mut buf);
        let mut step = 0.5;
        let mut trial = vec![C64::new(0.0, 0.0); self.n];
        for _ in 0..max_iterations {
            if !val.is_finite() {
                break;
            }
            let gnorm = l2(&grad);
            if gnorm < 1e-10 {
                break;
            }
            let mut accepted = None;
            while step > 1e-10 {
                for k in 0..self.n {
                    trial[k] = c[k] + grad[k] * (step / gnorm);
                }
                let t = normalized(&trial);
                let tv = self.objective(dir, &t, None, &mut buf);
                if tv >= val + 1e-4 * step * gnorm {
                    accepted = Some((t, tv));
                    break;
                }
                step *= 0.5;
            }
            let Some((t, tv)) = accepted else { break };
            let gain = tv - val;
            c = t;
            val = self.objective(dir, &c, Some(&mut grad), &mut buf);
            step = (step * 2.0).min(1.0);
            if gain <= 1e-13 * (1.0 + val.abs()) {
                break;
            }
        }
        (val, c)
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalized(v: &[C64]) -> Vec<C64> {
    let n = l2(v);
    if n == 0.0 {
        let mut e = vec![C64::new(0.0, 0.0); v.len()];
        e[0] = C64::new(1.0, 0.0);
        return e;
    }
    v.iter().map(|x| x / n).collect()
}

/// Result of checking every subspace of a collection `𝒳_u(𝒟_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationCertificate {
    pub xi: SampleSet,
    pub p: f64,
    /// Subset size `u` (or `v`) of the collection.
    pub v_or_u: usize,
    pub sided: Sidedness,
    /// `D` (one-sided) or `ε` (two-sided); infinite when some element vanishes on `ξ`.
    #[serde(with = "extended_f64")]
    pub constant: f64,
    /// True iff every subspace constant was computed exactly (`p = 2`).
    pub exact: bool,
    pub subsets_checked: u64,
    /// False when the check stopped early at an abort threshold.
    pub complete: bool,
    pub restarts: usize,
    /// Support attaining the worst constant, and the element realizing it.
    pub worst_support: Vec<usize>,
    pub witness: Vec<C64>,
}

impl DiscretizationCertificate {
    /// True when the check ran to completion and the constant meets `target`
    /// (`D ≤ target` or `ε ≤ target`).
    pub fn meets(&self, target: f64) -> bool {
        self.complete && self.constant.is_finite() && self.constant <= target
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub ascent: AscentOptions,
    pub subset_budget: u64,
    /// Stop as soon as some subspace exceeds this constant.
    pub abort_above: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            ascent: AscentOptions::default(),
            subset_budget: DEFAULT_SUBSET_BUDGET,
            abort_above: None,
        }
    }
}

fn subset_seed(seed: u64, rank: u64) -> u64 {
    seed ^ rank.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Worst constant over every `v_or_u`-subset of `sys` for the points `ξ`.
pub fn certify_universal(
    xi: &SampleSet,
    sys: &FunctionSystem,
    v_or_u: usize,
    p: f64,
    sided: Sidedness,
    opts: &CertifyOptions,
) -> Result<DiscretizationCertificate> {
    if v_or_u == 0 {
        return Err(Error::Domain("subspace dimension must be at least 1".into()));
    }
    let subsets = SubsetEnumerator::with_budget(sys.len(), v_or_u, opts.subset_budget)?;
    let sample_cols = sys.sample_matrix(xi)?;
    let sample_weights = xi.effective_weights();
    let grid_weights = sys.domain().weights();

    let mut cert = DiscretizationCertificate {
        xi: xi.clone(),
        p,
        v_or_u,
        sided,
        constant: match sided {
            Sidedness::OneSided => 1.0,
            Sidedness::TwoSided => 0.0,
        },
        exact: true,
        subsets_checked: 0,
        complete: true,
        restarts: if p == 2.0 { 0 } else { opts.ascent.restarts },
        worst_support: Vec::new(),
        witness: Vec::new(),
    };
    let mut worst_rank = usize::MAX;

    let all: Vec<Vec<usize>> = subsets.collect();
    let subspace = |support: &[usize]| -> (Vec<&[C64]>, Vec<&[C64]>) {
        (
            sys.grid_columns_of(support),
            support.iter().map(|&j| sample_cols[j].as_slice()).collect(),
        )
    };
    let mut order: Vec<usize> = (0..all.len()).collect();
    if p != 2.0 && opts.abort_above.is_some() {
        // Visit likely violators first: the exact p = 2 constants are cheap.
        let keys: Vec<f64> = all
            .par_iter()
            .map(|support| {
                let (g, s) = subspace(support);
                let sub = Subspace {
                    grid_cols: &g,
                    grid_weights,
                    sample_cols: &s,
                    sample_weights: &sample_weights,
                };
                subspace_extremes(&sub, 2.0, false, &opts.ascent).map_or(f64::INFINITY, |e| e.constant())
            })
            .collect();
        order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
    }

    for batch in order.chunks(BATCH) {
        let results: Vec<Result<(f64, Vec<C64>, bool)>> = batch
            .par_iter()
            .map(|&rank| {
                let (gcols, scols) = subspace(&all[rank]);
                let sub = Subspace {
                    grid_cols: &gcols,
                    grid_weights,
                    sample_cols: &scols,
                    sample_weights: &sample_weights,
                };
                let ascent = AscentOptions {
                    seed: subset_seed(opts.ascent.seed, rank as u64),
                    ..opts.ascent.clone()
                };
                let ex = subspace_extremes(&sub, p, sided == Sidedness::TwoSided, &ascent)?;
                Ok(match sided {
                    Sidedness::OneSided => (ex.constant(), ex.min_witness, ex.exact),
                    Sidedness::TwoSided => {
                        let eps = ex.epsilon(p);
                        let lo_side = 1.0 - ex.min_ratio.powf(p);
                        let w = if lo_side >= eps {
                            ex.min_witness
                        } else {
                            ex.max_witness.unwrap_or(ex.min_witness)
                        };
                        (eps, w, ex.exact)
                    }
                })
            })
            .collect();
        for (&rank, r) in batch.iter().zip(results) {
            let (value, witness, exact) = r?;
            cert.subsets_checked += 1;
            cert.exact &= exact;
            // Worst value wins; ties go to the lexicographically first support.
            let worse = value > cert.constant || (value == cert.constant && rank < worst_rank);
            if worst_rank == usize::MAX || worse {
                if worse {
                    cert.constant = value;
                }
                worst_rank = rank;
                cert.worst_support = all[rank].clone();
                cert.witness = witness;
            }
            if let Some(limit) = opts.abort_above {
                if !(value <= limit) {
                    cert.complete = false;
                    return Ok(cert);
                }
            }
        }
    }
    Ok(cert)
}

/// Parameters of a random point search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    /// Target `ε` for two-sided searches.
    pub epsilon: f64,
    /// Target `D` for one-sided searches.
    pub target_d: f64,
    pub sided: Sidedness,
    pub restarts: usize,
    pub subset_budget: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            m: 16,
            trials: 20,
            seed: 0,
            epsilon: 0.5,
            target_d: 2.0,
            sided: Sidedness::OneSided,
            restarts: DEFAULT_RESTARTS,
            subset_budget: DEFAULT_SUBSET_BUDGET,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("at least one trial is required".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Domain(format!("ε = {} must lie in (0, 1)", self.epsilon)));
        }
        if !(self.target_d >= 1.0) {
            return Err(Error::Domain(format!(
                "target D = {} must be at least 1",
                self.target_d
            )));
        }
        if self.m == 0 {
            return Err(Error::Empty("sample set"));
        }
        Ok(())
    }

    fn target(&self) -> f64 {
        match self.sided {
            Sidedness::OneSided => self.target_d,
            Sidedness::TwoSided => self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStat {
    pub trial: usize,
    /// Constant of the first violating subspace, or the full worst case on success.
    #[serde(with = "extended_f64")]
    pub constant: f64,
    pub success: bool,
    pub subsets_checked: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// First certificate that met the target, if any.
    pub certificate: Option<DiscretizationCertificate>,
    /// Attempt with the smallest constant (the certificate on success).
    pub best: DiscretizationCertificate,
    pub trials: Vec<TrialStat>,
    pub success_rate: f64,
}

/// `m` i.i.d. uniform grid points for the given trial.
pub fn draw_points(sys: &FunctionSystem, m: usize, seed: u64, trial: usize) -> Result<SampleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let g = sys.domain().len();
    let idx = (0..m).map(|_| rng.random_range(0..g)).collect();
    SampleSet::on_grid(sys.domain(), idx)
}

fn run_trials(
    sys: &FunctionSystem,
    v: usize,
    p: f64,
    cfg: &SearchConfig,
    stop_at_success: bool,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let target = cfg.target();
    let opts = CertifyOptions {
        ascent: AscentOptions {
            restarts: cfg.restarts,
            seed: cfg.seed,
            ..AscentOptions::default()
        },
        subset_budget: cfg.subset_budget,
        abort_above: Some(target),
    };
    let mut stats = Vec::new();
    let mut best: Option<DiscretizationCertificate> = None;
    let mut found = None;
    for trial in 0..cfg.trials {
        let xi = draw_points(sys, cfg.m, cfg.seed, trial)?;
        let cert = certify_universal(&xi, sys, v, p, cfg.sided, &opts)?;
        let success = cert.meets(target);
        stats.push(TrialStat {
            trial,
            constant: cert.constant,
            success,
            subsets_checked: cert.subsets_checked,
        });
        let better = match &best {
            None => true,
            Some(b) => (success, -cert.constant) > (b.meets(target), -b.constant),
        };
        if better {
            best = Some(cert.clone());
        }
        if success && found.is_none() {
            found = Some(cert);
            if stop_at_success {
                break;
            }
        }
    }
    let successes = stats.iter().filter(|s| s.success).count();
    Ok(SearchOutcome {
        certificate: found,
        best: best.expect("at least one trial"),
        success_rate: successes as f64 / stats.len() as f64,
        trials: stats,
    })
}

/// Draw point sets until one is certified at the target; stops at the first success.
pub fn random_point_search(sys: &FunctionSystem, v: usize, p: f64, cfg: &SearchConfig) -> Result<SearchOutcome> {
    run_trials(sys, v, p, cfg, true)
}

/// Like [`random_point_search`] but runs every trial, for success-rate curves.
pub fn search_success_rate(sys: &FunctionSystem, v: usize, p: f64, cfg: &SearchConfig) -> Result<SearchOutcome> {
    run_trials(sys, v, p, cfg, false)
}

/// Smallest `m ∈ [1, m_max]` at which at least half of the trials succeed,
/// by bisection (assumes the success rate grows with `m`).
pub fn minimal_m_estimate(sys: &FunctionSystem, v: usize, p: f64, cfg: &SearchConfig, m_max: usize) -> Result<usize> {
    let passes = |m: usize| -> Result<bool> {
        let c = SearchConfig { m, ..cfg.clone() };
        Ok(search_success_rate(sys, v, p, &c)?.success_rate >= 0.5)
    };
    if m_max == 0 || !passes(m_max)? {
        return Err(Error::RangeExhausted(m_max));
    }
    let (mut lo, mut hi) = (0usize, m_max);
    // Invariant: hi passes, lo fails (m = 0 fails vacuously).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
