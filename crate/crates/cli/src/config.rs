use std::path::Path;

use serde::{Deserialize, Serialize};

use samprec_core::combinatorial::DEFAULT_SUBSET_BUDGET;
use samprec_core::{Error, Exponent, FunctionSystem, GridDomain, Result, SystemDescriptor};

/// Recovery algorithm run on each test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Weak Chebyshev greedy algorithm on the sample points.
    Wcga,
    /// Best subset fit chosen by continuous error.
    Alg1,
    /// Discrete best `v`-term approximation on the sample points.
    Alg2,
    /// `ℓp` fit on the span of the whole dictionary.
    Lpw,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Wcga => "wcga",
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Lpw => "lpw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Trig,
    Lacunary,
    Perturbed,
}

/// Flat experiment configuration; every key is optional in the TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    #[serde(rename = "N")]
    pub n: usize,
    /// Lacunary ratio.
    pub b: f64,
    /// Relative size of the perturbation for the perturbed system.
    pub perturbation: f64,
    pub system_seed: u64,
    #[serde(rename = "G")]
    pub grid_size: usize,
    pub p: f64,
    pub v: usize,
    pub m: usize,
    pub seed: u64,
    pub runs: usize,
    /// `δ` in `f0 = sparse + δ·h`, `‖h‖_∞ = 1`.
    pub noise: f64,
    pub algorithm: Algorithm,
    /// WCGA weakness parameter.
    pub t: f64,
    /// Target one-sided constant for the point search.
    #[serde(rename = "target_D")]
    pub target_d: f64,
    pub search_trials: usize,
    pub restarts: usize,
    /// Size of the certified collection; derived from the algorithm when absent.
    pub u: Option<usize>,
    /// Largest acceptable Lebesgue ratio.
    pub max_ratio: f64,
    /// Errors and `σ_v` at or below this count as zero.
    pub exact_tol: f64,
    /// Additive slack when checking explicit bounds.
    pub bound_slack: f64,
    /// Relative WCGA stopping tolerance.
    pub residual_tol: f64,
    pub budget_constant_c: f64,
    pub subset_budget: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            system: SystemKind::Trig,
            n: 16,
            b: 2.0,
            perturbation: 0.1,
            system_seed: 0,
            grid_size: 1024,
            p: 4.0,
            v: 2,
            m: 240,
            seed: 0,
            runs: 100,
            noise: 0.0,
            algorithm: Algorithm::Wcga,
            t: 1.0,
            target_d: 1.22,
            search_trials: 10,
            restarts: 1,
            u: None,
            max_ratio: 50.0,
            exact_tol: 1e-6,
            bound_slack: 1e-8,
            residual_tol: 1e-12,
            budget_constant_c: 1.0,
            subset_budget: DEFAULT_SUBSET_BUDGET,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Domain(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Domain(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn exponent(&self) -> Result<Exponent> {
        Exponent::new(self.p)
    }

    pub fn descriptor(&self) -> SystemDescriptor {
        match self.system {
            SystemKind::Trig => SystemDescriptor::Trig { n: self.n },
            SystemKind::Lacunary => SystemDescriptor::Lacunary { n: self.n, b: self.b },
            SystemKind::Perturbed => SystemDescriptor::Perturbed {
                n: self.n,
                seed: self.system_seed,
                perturbation: self.perturbation,
            },
        }
    }

    pub fn build_system(&self) -> Result<FunctionSystem> {
        let dom = GridDomain::uniform_torus(self.grid_size, 1)?;
        FunctionSystem::new(self.descriptor(), &dom)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return bad(format!("p = {} must be finite and at least 1", self.p));
        }
        if self.algorithm == Algorithm::Wcga && self.p < 2.0 {
            return bad(format!("WCGA needs p ≥ 2, got {}", self.p));
        }
        if self.n == 0 || self.v == 0 || self.v > self.n {
            return bad(format!("need 1 ≤ v ≤ N, got v = {}, N = {}", self.v, self.n));
        }
        if self.algorithm == Algorithm::Alg2 && 2 * self.v > self.n {
            return bad(format!("Algorithm 2 needs 2v ≤ N, got v = {}, N = {}", self.v, self.n));
        }
        if let Some(u) = self.u {
            if u == 0 || u > self.n {
                return bad(format!("need 1 ≤ u ≤ N, got u = {u}"));
            }
        }
        if self.m == 0 || self.runs == 0 || self.search_trials == 0 {
            return bad("m, runs and search_trials must be positive".into());
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return bad(format!("noise = {} must be nonnegative", self.noise));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return bad(format!("t = {} must lie in (0, 1]", self.t));
        }
        if !(self.target_d >= 1.0) {
            return bad(format!("target_D = {} must be at least 1", self.target_d));
        }
        for (name, x) in [
            ("max_ratio", self.max_ratio),
            ("exact_tol", self.exact_tol),
            ("bound_slack", self.bound_slack),
            ("residual_tol", self.residual_tol),
            ("budget_constant_c", self.budget_constant_c),
        ] {
            if !(x >= 0.0) {
                return bad(format!("{name} = {x} must be nonnegative"));
            }
        }
        Ok(())
    }
}
