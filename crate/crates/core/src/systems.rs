//! Dictionaries `𝒟_N = {φ_j}` on the torus and sparse elements over them.
//!
//! Every column is a finite trigonometric sum `Σ a_k e^{2πikx}`, so a system
//! can be evaluated exactly at arbitrary points as well as read from its
//! cached grid matrix.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, SampleSet, C64};
use crate::error::{Error, Result};

/// JSON descriptor of a system: `{"kind": "trig" | "lacunary" | "perturbed", "N": .., ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemDescriptor {
    /// `φ_k = e^{2πikx}`, `k = 0..N-1`.
    Trig {
        #[serde(rename = "N")]
        n: usize,
    },
    /// Frequencies `k_1 = 1`, `k_{j+1} = ⌈b·k_j⌉`.
    Lacunary {
        #[serde(rename = "N")]
        n: usize,
        b: f64,
    },
    /// Trig system with each column mixed with a randomly chosen other
    /// frequency at relative size `perturbation`, rescaled to sup-norm 1.
    Perturbed {
        #[serde(rename = "N")]
        n: usize,
        seed: u64,
        perturbation: f64,
    },
}

impl SystemDescriptor {
    pub fn len(&self) -> usize {
        match *self {
            SystemDescriptor::Trig { n }
            | SystemDescriptor::Lacunary { n, .. }
            | SystemDescriptor::Perturbed { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Support `J` and coefficients `c_j`: the element `Σ_{j∈J} c_j φ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseElement {
    support: Vec<usize>,
    coeffs: Vec<C64>,
}

impl SparseElement {
    pub fn new(support: Vec<usize>, coeffs: Vec<C64>) -> Result<Self> {
        if support.len() != coeffs.len() {
            return Err(Error::Dimension {
                expected: support.len(),
                found: coeffs.len(),
            });
        }
        let mut seen = support.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateIndex(w[0]));
        }
        Ok(SparseElement { support, coeffs })
    }

    pub fn zero() -> Self {
        SparseElement {
            support: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Coefficient of `φ_j` (zero when `j ∉ J`).
    pub fn coeff(&self, j: usize) -> C64 {
        self.support
            .iter()
            .position(|&k| k == j)
            .map_or(C64::new(0.0, 0.0), |pos| self.coeffs[pos])
    }

    /// `α·self + β·other` on the merged support (sorted).
    pub fn linear_combination(&self, alpha: C64, other: &SparseElement, beta: C64) -> SparseElement {
        let mut support: Vec<usize> = self.support.iter().chain(&other.support).copied().collect();
        support.sort_unstable();
        support.dedup();
        let coeffs = support
            .iter()
            .map(|&j| alpha * self.coeff(j) + beta * other.coeff(j))
            .collect();
        SparseElement { support, coeffs }
    }
}

/// Where to evaluate a sparse element.
#[derive(Debug, Clone, Copy)]
pub enum EvalSite<'a> {
    /// The system's reference grid.
    Grid,
    Samples(&'a SampleSet),
}

/// A function given either by its grid values or as a sparse element.
#[derive(Debug, Clone, Copy)]
pub enum Signal<'a> {
    Grid(&'a [C64]),
    Sparse(&'a SparseElement),
}

#[derive(Debug, Clone)]
pub struct FunctionSystem {
    descriptor: SystemDescriptor,
    domain: GridDomain,
    /// Column `j` is `Σ_{(k, a)} a·e^{2πikx}`.
    terms: Vec<Vec<(i64, C64)>>,
    grid_columns: Vec<Vec<C64>>,
    uniform_bound: f64,
}

fn exp_2pi_i(k: i64, x: f64) -> C64 {
    let phase = (k as f64 * x).rem_euclid(1.0);
    C64::from_polar(1.0, TAU * phase)
}

fn check_nyquist(freq: i64, dom: &GridDomain) -> Result<()> {
    if 2 * freq.unsigned_abs() as usize > dom.grid_size() {
        return Err(Error::Aliasing {
            frequency: freq,
            grid_size: dom.grid_size(),
        });
    }
    Ok(())
}

/// Lacunary frequencies `k_1 = 1`, `k_{j+1} = ⌈b·k_j⌉`.
pub fn lacunary_frequencies(n: usize, b: f64) -> Result<Vec<i64>> {
    if !(b > 1.0) || !b.is_finite() {
        return Err(Error::Domain(format!("lacunarity ratio b = {b} must exceed 1")));
    }
    let mut freqs = Vec::with_capacity(n);
    let mut k: i64 = 1;
    for _ in 0..n {
        freqs.push(k);
        let next = (b * k as f64).ceil();
        if next > i64::MAX as f64 / 4.0 {
            return Err(Error::Domain("lacunary frequency overflow".into()));
        }
        k = (next as i64).max(k + 1);
    }
    Ok(freqs)
}

impl FunctionSystem {
    pub fn new(descriptor: SystemDescriptor, dom: &GridDomain) -> Result<Self> {
        if dom.dim() != 1 {
            return Err(Error::Domain(
                "built-in systems are univariate; use a one-dimensional grid".into(),
            ));
        }
        let one = C64::new(1.0, 0.0);
        let terms: Vec<Vec<(i64, C64)>> = match descriptor {
            SystemDescriptor::Trig { n } => {
                if n > 0 {
                    check_nyquist(n as i64 - 1, dom)?;
                    if 2 * n > dom.grid_size() {
                        return Err(Error::Aliasing {
                            frequency: n as i64 - 1,
                            grid_size: dom.grid_size(),
                        });
                    }
                }
                (0..n as i64).map(|k| vec![(k, one)]).collect()
            }
            SystemDescriptor::Lacunary { n, b } => {
                let freqs = lacunary_frequencies(n, b)?;
                for &k in &freqs {
                    check_nyquist(k, dom)?;
                }
                freqs.into_iter().map(|k| vec![(k, one)]).collect()
            }
            SystemDescriptor::Perturbed { n, seed, perturbation } => {
                if !(perturbation >= 0.0) || perturbation >= 1.0 {
                    return Err(Error::Domain(format!("perturbation {perturbation} must lie in [0, 1)")));
                }
                if n > 0 && 2 * n > dom.grid_size() {
                    return Err(Error::Aliasing {
                        frequency: n as i64 - 1,
                        grid_size: dom.grid_size(),
                    });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut partner: Vec<i64> = (0..n as i64).collect();
                partner.shuffle(&mut rng);
                (0..n as i64)
                    .map(|k| {
                        let phase = C64::from_polar(perturbation, TAU * rng.random::<f64>());
                        let q = partner[k as usize];
                        if q == k {
                            let a = one + phase;
                            vec![(k, a / a.norm())]
                        } else {
                            let s = 1.0 + perturbation;
                            vec![(k, one / s), (q, phase / s)]
                        }
                    })
                    .collect()
            }
        };

        let grid_columns: Vec<Vec<C64>> = terms
            .iter()
            .map(|col| dom.points().iter().map(|x| Self::eval_terms(col, x[0])).collect())
            .collect();
        if let Some(j) = grid_columns.iter().position(|c| c.iter().all(|v| v.norm() == 0.0)) {
            return Err(Error::Degenerate(format!("column {j} vanishes on the grid")));
        }
        let uniform_bound = grid_columns
            .iter()
            .flat_map(|c| c.iter().map(|v| v.norm()))
            .fold(0.0, f64::max);
        Ok(FunctionSystem {
            descriptor,
            domain: dom.clone(),
            terms,
            grid_columns,
            uniform_bound,
        })
    }

    pub fn trig(n: usize, dom: &GridDomain) -> Result<Self> {
        Self::new(SystemDescriptor::Trig { n }, dom)
    }

    pub fn lacunary(n: usize, b: f64, dom: &GridDomain) -> Result<Self> {
        Self::new(SystemDescriptor::Lacunary { n, b }, dom)
    }

    fn eval_terms(terms: &[(i64, C64)], x: f64) -> C64 {
        terms.iter().map(|&(k, a)| a * exp_2pi_i(k, x)).sum()
    }

    pub fn descriptor(&self) -> &SystemDescriptor {
        &self.descriptor
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    /// Number of elements `N`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `sup_j max_x |φ_j(x)|` over the reference grid.
    pub fn uniform_bound(&self) -> f64 {
        self.uniform_bound
    }

    /// Frequencies of the leading term of each column.
    pub fn frequencies(&self) -> Vec<i64> {
        self.terms.iter().map(|t| t[0].0).collect()
    }

    /// `φ_j(x)` for a point of `[0,1)`.
    pub fn evaluate(&self, j: usize, x: f64) -> Result<C64> {
        let col = self.terms.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.len(),
        })?;
        if !(0.0..1.0).contains(&x) {
            return Err(Error::PointOutsideDomain(x));
        }
        Ok(Self::eval_terms(col, x))
    }

    pub fn grid_column(&self, j: usize) -> &[C64] {
        &self.grid_columns[j]
    }

    pub fn grid_columns(&self) -> &[Vec<C64>] {
        &self.grid_columns
    }

    /// Grid columns of a subset, in the given order.
    pub fn grid_columns_of(&self, subset: &[usize]) -> Vec<&[C64]> {
        subset.iter().map(|&j| self.grid_columns[j].as_slice()).collect()
    }

    /// Columns of the system restricted to `ξ` (the system `𝒟_N(Ω_m)`).
    pub fn sample_matrix(&self, xi: &SampleSet) -> Result<Vec<Vec<C64>>> {
        if let Ok(idx) = xi.resolve(&self.domain) {
            return Ok(self
                .grid_columns
                .iter()
                .map(|col| idx.iter().map(|&i| col[i]).collect())
                .collect());
        }
        if xi.dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                found: xi.dim(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|col| xi.coords().iter().map(|x| Self::eval_terms(col, x[0])).collect())
            .collect())
    }

    fn check_support(&self, e: &SparseElement) -> Result<()> {
        if let Some(&j) = e.support().iter().find(|&&j| j >= self.len()) {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Pointwise `Σ_{j∈J} c_j φ_j` on the grid or at sample points.
    pub fn evaluate_sparse(&self, e: &SparseElement, site: EvalSite<'_>) -> Result<Vec<C64>> {
        self.check_support(e)?;
        match site {
            EvalSite::Grid => {
                let mut out = vec![C64::new(0.0, 0.0); self.domain.len()];
                for (&j, &c) in e.support().iter().zip(e.coeffs()) {
                    for (o, v) in out.iter_mut().zip(&self.grid_columns[j]) {
                        *o += c * v;
                    }
                }
                Ok(out)
            }
            EvalSite::Samples(xi) => {
                if let Ok(idx) = xi.resolve(&self.domain) {
                    let grid = self.evaluate_sparse(e, EvalSite::Grid)?;
                    return Ok(idx.iter().map(|&i| grid[i]).collect());
                }
                xi.coords()
                    .iter()
                    .map(|x| {
                        let mut acc = C64::new(0.0, 0.0);
                        for (&j, &c) in e.support().iter().zip(e.coeffs()) {
                            acc += c * Self::eval_terms(&self.terms[j], x[0]);
                        }
                        Ok(acc)
                    })
                    .collect()
            }
        }
    }

    /// Sample vector `S(f, ξ) = (f(ξ^1), …, f(ξ^m))`.
    pub fn sample_vector(&self, f: Signal<'_>, xi: &SampleSet) -> Result<Vec<C64>> {
        match f {
            Signal::Sparse(e) => self.evaluate_sparse(e, EvalSite::Samples(xi)),
            Signal::Grid(values) => sample_grid_values(values, &self.domain, xi),
        }
    }
}

/// Read grid values of `f` at the sample points (which must lie on the grid).
pub fn sample_grid_values(values: &[C64], dom: &GridDomain, xi: &SampleSet) -> Result<Vec<C64>> {
    if values.len() != dom.len() {
        return Err(Error::Dimension {
            expected: dom.len(),
            found: values.len(),
        });
    }
    let idx = xi.resolve(dom)?;
    Ok(idx.iter().map(|&i| values[i]).collect())
}
