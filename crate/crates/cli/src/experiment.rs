use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use samprec_core::analysis::{bessel_riesz_constants, SystemConstants};
use samprec_core::combinatorial::{
    algorithm1, algorithm2, empirical_lebesgue_constants, sigma_v_oracle, LebesgueRun, NormSpec, RecoveryOptions,
};
use samprec_core::discretization::{
    random_point_search, DiscretizationCertificate, SearchConfig, SearchOutcome, Sidedness,
};
use samprec_core::domain::{lp_norm_continuous, weighted_mixed_measure_weights};
use samprec_core::lp_solver::{lpw_recover, project, project_sup, ProjectionProblem, SolverOptions};
use samprec_core::serde_ext::extended_f64;
use samprec_core::systems::{sample_grid_values, EvalSite};
use samprec_core::wcga::{iteration_budget, wcga_run, WcgaConfig};
use samprec_core::{Exponent, FunctionSystem, Result, SparseElement, C64};

use crate::config::{Algorithm, ExperimentConfig};

pub const SCHEMA: &str = "samprec.experiment.v1";
pub const SURROGATE_LABEL: &str = "finite-family surrogate";

const RUN_SALT: u64 = 0x7e57_f00d_5eed_0001;

/// System, constants and certified points shared by every run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub sys: FunctionSystem,
    pub constants: SystemConstants,
    /// Size of the certified collection `𝒳_u`.
    pub u: usize,
    pub search: SearchOutcome,
}

impl Setup {
    /// The certificate in use: the first that met the target, else the best attempt.
    pub fn certificate(&self) -> &DiscretizationCertificate {
        self.search.certificate.as_ref().unwrap_or(&self.search.best)
    }

    pub fn certified(&self) -> bool {
        self.search.certificate.is_some()
    }
}

fn wcga_config(cfg: &ExperimentConfig, max_iterations: usize) -> WcgaConfig {
    WcgaConfig {
        t: cfg.t,
        p: cfg.p,
        max_iterations,
        residual_tol: cfg.residual_tol,
        budget_constant_c: cfg.budget_constant_c,
    }
}

/// Collection size certified for the configured algorithm.
pub fn collection_size(cfg: &ExperimentConfig, k: f64) -> usize {
    cfg.u.unwrap_or_else(|| match cfg.algorithm {
        Algorithm::Wcga => (iteration_budget(cfg.v, cfg.target_d, k, &wcga_config(cfg, usize::MAX)) + cfg.v).min(cfg.n),
        Algorithm::Alg1 => cfg.v,
        Algorithm::Alg2 => 2 * cfg.v,
        Algorithm::Lpw => cfg.n,
    })
}

pub fn search_config(cfg: &ExperimentConfig) -> SearchConfig {
    SearchConfig {
        m: cfg.m,
        trials: cfg.search_trials,
        seed: cfg.seed,
        target_d: cfg.target_d,
        sided: Sidedness::OneSided,
        restarts: cfg.restarts,
        subset_budget: cfg.subset_budget,
        ..SearchConfig::default()
    }
}

/// Build the system and search for certified points.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let constants = bessel_riesz_constants(&sys);
    let u = collection_size(cfg, constants.k);
    let search = random_point_search(&sys, u, cfg.p, &search_config(cfg))?;
    Ok(Setup {
        sys,
        constants,
        u,
        search,
    })
}

/// A `v`-sparse element with unit-scale coefficients plus `δ·h`, `‖h‖_∞ = 1`.
pub fn test_function(sys: &FunctionSystem, cfg: &ExperimentConfig, run: usize) -> Result<(SparseElement, Vec<C64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ RUN_SALT);
    rng.set_stream(run as u64);
    let mut support = rand::seq::index::sample(&mut rng, sys.len(), cfg.v).into_vec();
    support.sort_unstable();
    let coeffs = support
        .iter()
        .map(|_| C64::from_polar(rng.random_range(0.5..1.5), rng.random_range(0.0..TAU)))
        .collect();
    let truth = SparseElement::new(support, coeffs)?;
    let mut grid = sys.evaluate_sparse(&truth, EvalSite::Grid)?;
    if cfg.noise > 0.0 {
        let h: Vec<C64> = (0..grid.len())
            .map(|_| C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..TAU)))
            .collect();
        let peak = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (g, z) in grid.iter_mut().zip(&h) {
            *g += z * (cfg.noise / peak);
        }
    }
    Ok((truth, grid))
}

/// First 16 hex digits of the SHA-256 of the grid values.
pub fn input_hash(values: &[C64]) -> String {
    let mut hasher = Sha256::new();
    for z in values {
        hasher.update(z.re.to_le_bytes());
        hasher.update(z.im.to_le_bytes());
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// One measured inequality for one test function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub run: usize,
    pub input_hash: String,
    pub algorithm: String,
    pub inequality: String,
    pub error_norm: String,
    pub error: f64,
    pub sigma_norm: String,
    /// Best approximation error on the right-hand side.
    pub sigma: f64,
    /// Explicit right-hand side, for inequalities with known constants.
    pub bound: Option<f64>,
    /// `error / sigma`, with exact recoveries counted as 1.
    pub ratio: f64,
    pub holds: bool,
    pub iterations: Option<usize>,
    pub stop_reason: Option<String>,
    pub exact_recovery: Option<bool>,
    pub coeff_error: Option<f64>,
    pub support: String,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "C1")]
    pub c1: Option<f64>,
    #[serde(rename = "C2")]
    pub c2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub certified: bool,
    pub collection_size: usize,
    pub m: usize,
    pub p: f64,
    #[serde(with = "extended_f64")]
    pub constant: f64,
    #[serde(with = "extended_f64")]
    pub target: f64,
    pub exact: bool,
    pub complete: bool,
    pub subsets_checked: u64,
    pub trials_run: usize,
    pub success_rate: f64,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub inequality: String,
    /// `lebesgue` rows compare the ratio to the threshold; `bound` rows check an explicit bound.
    pub kind: String,
    pub rows: usize,
    #[serde(with = "extended_f64")]
    pub max_ratio: f64,
    #[serde(with = "extended_f64")]
    pub median_ratio: f64,
    pub violations: usize,
    pub exact_recovery_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactRecovery {
    pub runs: usize,
    pub recovered: usize,
    #[serde(with = "extended_f64")]
    pub max_residual: f64,
    #[serde(with = "extended_f64")]
    pub max_coeff_error: f64,
}

/// Class-level quantities over the generated family only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Surrogate {
    pub label: String,
    pub family_size: usize,
    #[serde(with = "extended_f64")]
    pub sigma_sup: f64,
    #[serde(with = "extended_f64")]
    pub error_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Environment {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub certificate: CertificateSummary,
    pub constants: SystemConstants,
    pub iteration_budget: Option<usize>,
    pub aggregates: Vec<Aggregate>,
    pub exact_recovery: Option<ExactRecovery>,
    pub surrogate: Surrogate,
    pub failures: Vec<RunFailure>,
    pub nonconverged: usize,
    pub passed: bool,
    pub environment: Environment,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub failures: Vec<RunFailure>,
    pub nonconverged: usize,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    pub fn to_csv(&self) -> String {
        rows_to_csv(&self.rows)
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

/// Serialize rows as CSV with a header line.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("row serializes");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn is_lebesgue(inequality: &str) -> bool {
    matches!(inequality, "mp" | "mp2" | "mp3")
}

struct RunOutput {
    rows: Vec<Row>,
    nonconverged: bool,
    residual: Option<f64>,
}

struct Shared<'a> {
    setup: &'a Setup,
    cfg: &'a ExperimentConfig,
    cert: &'a DiscretizationCertificate,
    exponent: Exponent,
    budget: usize,
}

impl Shared<'_> {
    fn row(&self, run: usize, hash: &str, inequality: &str, error_norm: &str, error: f64) -> Row {
        let d = self.cert.constant;
        let with_c = self.cfg.algorithm != Algorithm::Wcga;
        Row {
            run,
            input_hash: hash.to_string(),
            algorithm: self.cfg.algorithm.name().into(),
            inequality: inequality.into(),
            error_norm: error_norm.into(),
            error,
            sigma_norm: String::new(),
            sigma: f64::NAN,
            bound: None,
            ratio: f64::NAN,
            holds: false,
            iterations: None,
            stop_reason: None,
            exact_recovery: None,
            coeff_error: None,
            support: String::new(),
            d,
            k: self.setup.constants.k,
            v: d * self.setup.constants.k.sqrt(),
            c1: with_c.then_some(1.0 / d),
            c2: with_c.then_some(1.0),
        }
    }

    fn sigma(&self, f_grid: &[C64], spec: NormSpec<'_>) -> Result<f64> {
        let s = sigma_v_oracle(f_grid, &self.setup.sys, self.cfg.v, spec, self.cfg.subset_budget)?;
        Ok(match spec {
            NormSpec::Sup => s.lower_bound,
            _ => s.value,
        })
    }

    fn run(&self, run: usize) -> Result<RunOutput> {
        let sys = &self.setup.sys;
        let cfg = self.cfg;
        let xi = &self.cert.xi;
        let p = cfg.p;
        let (truth, f_grid) = test_function(sys, cfg, run)?;
        let f_samples = sample_grid_values(&f_grid, sys.domain(), xi)?;
        let hash = input_hash(&f_grid);
        let d = self.cert.constant;
        let lp_mu = format!("L_{p}(mu)");
        let lp_xi = format!("L_{p}(xi)");
        let lp_mixed = format!("L_{p}(mu_xi)");
        let support_str = |s: &[usize]| s.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";");
        let continuous_error = |approx: &[C64]| -> Result<f64> {
            let diff: Vec<C64> = f_grid.iter().zip(approx).map(|(a, b)| a - b).collect();
            lp_norm_continuous(&diff, sys.domain(), self.exponent)
        };
        let factor = 2f64.powf(1.0 / p);

        match cfg.algorithm {
            Algorithm::Wcga => {
                let trace = wcga_run(&f_samples, sys, xi, &wcga_config(cfg, self.budget))?;
                let approx_el = trace.approximant();
                let approx = sys.evaluate_sparse(&approx_el, EvalSite::Grid)?;
                let err_mu = continuous_error(&approx)?;
                let residual = trace.final_residual_norm();
                let (exact, coeff_error) = if cfg.noise == 0.0 {
                    let diff = truth.linear_combination(C64::new(1.0, 0.0), &approx_el, C64::new(-1.0, 0.0));
                    let ce = diff.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
                    (Some(residual <= cfg.exact_tol && ce <= cfg.exact_tol), Some(ce))
                } else {
                    (None, None)
                };
                let specs = [
                    ("mp", lp_xi.clone(), residual, lp_xi.clone(), NormSpec::Sample { xi, p }),
                    ("mp2", lp_mu.clone(), err_mu, "L_inf".to_string(), NormSpec::Sup),
                    (
                        "mp3",
                        lp_mu.clone(),
                        err_mu,
                        lp_mixed.clone(),
                        NormSpec::Mixed { xi, p },
                    ),
                ];
                let mut rows = Vec::new();
                for (name, err_norm, err, sig_norm, spec) in specs {
                    let mut r = self.row(run, &hash, name, &err_norm, err);
                    r.sigma_norm = sig_norm;
                    r.sigma = self.sigma(&f_grid, spec)?;
                    r.iterations = Some(trace.iterations());
                    r.stop_reason = Some(format!("{:?}", trace.stopped_reason).to_lowercase());
                    r.exact_recovery = exact;
                    r.coeff_error = coeff_error;
                    r.support = support_str(&trace.selected_indices);
                    rows.push(r);
                }
                Ok(RunOutput {
                    rows,
                    nonconverged: false,
                    residual: Some(residual),
                })
            }
            Algorithm::Alg1 | Algorithm::Alg2 => {
                let opts = RecoveryOptions {
                    subset_budget: cfg.subset_budget,
                    tol: SolverOptions::for_exponent(self.exponent).tol,
                };
                let (out, names) = if cfg.algorithm == Algorithm::Alg1 {
                    (
                        algorithm1(&f_grid, &f_samples, sys, xi, cfg.v, self.exponent, &opts)?,
                        ["I5", "I6"],
                    )
                } else {
                    let o = algorithm2(&f_samples, sys, xi, cfg.v, self.exponent, &opts)?.with_continuous_error(
                        &f_grid,
                        sys,
                        self.exponent,
                    )?;
                    (o, ["ub16", "ub17"])
                };
                let err = out.error_continuous.expect("continuous error is filled in");
                let sig_mixed = self.sigma(&f_grid, NormSpec::Mixed { xi, p })?;
                let sig_inf = self.sigma(&f_grid, NormSpec::Sup)?;
                let mut rows = Vec::new();
                for (name, sig_norm, sigma, bound) in [
                    (
                        names[0],
                        lp_mixed.clone(),
                        sig_mixed,
                        factor * (2.0 * d + 1.0) * sig_mixed,
                    ),
                    (names[1], "L_inf".to_string(), sig_inf, (2.0 * d + 1.0) * sig_inf),
                ] {
                    let mut r = self.row(run, &hash, name, &lp_mu, err);
                    r.sigma_norm = sig_norm;
                    r.sigma = sigma;
                    r.bound = Some(bound);
                    r.support = support_str(&out.chosen_support);
                    rows.push(r);
                }
                Ok(RunOutput {
                    rows,
                    nonconverged: false,
                    residual: None,
                })
            }
            Algorithm::Lpw => {
                let sample_cols = sys.sample_matrix(xi)?;
                let basis: Vec<&[C64]> = sample_cols.iter().map(|c| c.as_slice()).collect();
                let tol = SolverOptions::for_exponent(self.exponent).tol;
                let fit = lpw_recover(&f_samples, &basis, self.exponent, None, tol)?;
                let all: Vec<usize> = (0..sys.len()).collect();
                let approx =
                    sys.evaluate_sparse(&SparseElement::new(all.clone(), fit.coeffs.clone())?, EvalSite::Grid)?;
                let err = continuous_error(&approx)?;

                // d(f, X_N) in L_p(μ_{w,ξ}) on the concatenation [grid; samples].
                let w = vec![1.0 / xi.len() as f64; xi.len()];
                let mixed_w = weighted_mixed_measure_weights(sys.domain(), &w);
                let target: Vec<C64> = f_grid.iter().chain(&f_samples).copied().collect();
                let cols: Vec<Vec<C64>> = sys
                    .grid_columns()
                    .iter()
                    .zip(&sample_cols)
                    .map(|(g, s)| g.iter().chain(s).copied().collect())
                    .collect();
                let mixed = project(
                    &ProjectionProblem {
                        target: &target,
                        basis: cols.iter().map(|c| c.as_slice()).collect(),
                        p: self.exponent,
                        weights: &mixed_w,
                    },
                    tol,
                )?;
                let sup = project_sup(&ProjectionProblem {
                    target: &f_grid,
                    basis: sys.grid_columns().iter().map(|c| c.as_slice()).collect(),
                    p: Exponent::Infinite,
                    weights: sys.domain().weights(),
                })?;
                let d_inf = sup.lower_bound.unwrap_or(sup.residual_norm);
                let (c1, c2) = (1.0 / d, 1.0f64);
                let k = 2.0 / c1 * c2.powf(1.0 / p) + 1.0;
                let mut rows = Vec::new();
                for (name, sig_norm, sigma, bound) in [
                    (
                        "A1",
                        "L_p(mu_w_xi)".to_string(),
                        mixed.residual_norm,
                        factor * k * mixed.residual_norm,
                    ),
                    ("A2", "L_inf".to_string(), d_inf, k * d_inf),
                ] {
                    let mut r = self.row(run, &hash, name, &lp_mu, err);
                    r.sigma_norm = sig_norm;
                    r.sigma = sigma;
                    r.bound = Some(bound);
                    r.support = support_str(&all);
                    rows.push(r);
                }
                Ok(RunOutput {
                    rows,
                    nonconverged: !(fit.converged && mixed.converged),
                    residual: None,
                })
            }
        }
    }
}

/// Run every test function against prepared points.
pub fn run_on(setup: &Setup, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cert = setup.certificate();
    let exponent = cfg.exponent()?;
    let budget = if cfg.algorithm == Algorithm::Wcga {
        iteration_budget(cfg.v, cert.constant, setup.constants.k, &wcga_config(cfg, usize::MAX))
    } else {
        0
    };
    let shared = Shared {
        setup,
        cfg,
        cert,
        exponent,
        budget,
    };
    let outputs: Vec<Result<RunOutput>> = (0..cfg.runs).into_par_iter().map(|run| shared.run(run)).collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut nonconverged = 0;
    let mut residuals = Vec::new();
    for (run, out) in outputs.into_iter().enumerate() {
        match out {
            Ok(o) => {
                rows.extend(o.rows);
                nonconverged += o.nonconverged as usize;
                residuals.extend(o.residual);
            }
            Err(e) => failures.push(RunFailure {
                run,
                error: e.to_string(),
            }),
        }
    }

    // Ratios and verdicts, one inequality at a time.
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        if !names.contains(&r.inequality) {
            names.push(r.inequality.clone());
        }
    }
    let mut aggregates = Vec::new();
    for name in &names {
        let idx: Vec<usize> = (0..rows.len()).filter(|&i| &rows[i].inequality == name).collect();
        let runs: Vec<LebesgueRun> = idx
            .iter()
            .map(|&i| LebesgueRun {
                error: rows[i].error,
                sigma: rows[i].sigma,
            })
            .collect();
        let rep = empirical_lebesgue_constants(&runs, cfg.exact_tol);
        let lebesgue = is_lebesgue(name);
        let mut violations = 0;
        for (&i, &ratio) in idx.iter().zip(&rep.ratios) {
            let r = &mut rows[i];
            r.ratio = ratio;
            r.holds = if lebesgue {
                ratio.is_finite() && ratio <= cfg.max_ratio
            } else {
                r.error <= r.bound.unwrap_or(f64::INFINITY) + cfg.bound_slack
            };
            violations += !r.holds as usize;
        }
        aggregates.push(Aggregate {
            inequality: name.clone(),
            kind: if lebesgue { "lebesgue" } else { "bound" }.into(),
            rows: idx.len(),
            max_ratio: rep.max,
            median_ratio: rep.median,
            violations,
            exact_recovery_failures: rep.exact_recovery_failures.len(),
        });
    }

    let exact_recovery = (cfg.algorithm == Algorithm::Wcga && cfg.noise == 0.0).then(|| {
        let per_run: Vec<&Row> = rows.iter().filter(|r| r.inequality == "mp").collect();
        ExactRecovery {
            runs: per_run.len(),
            recovered: per_run.iter().filter(|r| r.exact_recovery == Some(true)).count(),
            max_residual: residuals.iter().cloned().fold(0.0, f64::max),
            max_coeff_error: per_run.iter().filter_map(|r| r.coeff_error).fold(0.0, f64::max),
        }
    });
    let sup_rows = rows.iter().filter(|r| r.sigma_norm == "L_inf");
    let surrogate = Surrogate {
        label: SURROGATE_LABEL.into(),
        family_size: cfg.runs - failures.len(),
        sigma_sup: sup_rows.clone().map(|r| r.sigma).fold(0.0, f64::max),
        error_sup: sup_rows.map(|r| r.error).fold(0.0, f64::max),
    };
    let passed = setup.certified()
        && failures.is_empty()
        && nonconverged == 0
        && rows.iter().all(|r| r.holds)
        && exact_recovery.as_ref().is_none_or(|e| e.recovered == e.runs);

    let summary = Summary {
        schema: SCHEMA.into(),
        seed: cfg.seed,
        config: cfg.clone(),
        certificate: CertificateSummary {
            certified: setup.certified(),
            collection_size: setup.u,
            m: cert.xi.len(),
            p: cert.p,
            constant: cert.constant,
            target: cfg.target_d,
            exact: cert.exact,
            complete: cert.complete,
            subsets_checked: cert.subsets_checked,
            trials_run: setup.search.trials.len(),
            success_rate: setup.search.success_rate,
            restarts: cert.restarts,
        },
        constants: setup.constants.clone().with_discretization(cert.constant),
        iteration_budget: (cfg.algorithm == Algorithm::Wcga).then_some(budget),
        aggregates,
        exact_recovery,
        surrogate,
        failures: failures.clone(),
        nonconverged,
        passed,
        environment: Environment::current(),
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        failures,
        nonconverged,
        summary,
    })
}

/// Prepare points and run every test function.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let setup = prepare(cfg)?;
    run_on(&setup, cfg)
}
