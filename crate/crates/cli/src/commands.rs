use serde::Serialize;

use samprec_core::analysis::{
    bessel_riesz_constants, incoherence_brute, smoothness_modulus_check, IncoherenceSearch, SmoothnessReport,
};
use samprec_core::discretization::{
    certify_universal, draw_points, random_point_search, AscentOptions, CertifyOptions, Sidedness,
};
use samprec_core::serde_ext::extended_f64;
use samprec_core::{Error, Exponent, Result, C64};

use crate::config::ExperimentConfig;
use crate::experiment::{collection_size, rows_to_csv, run_experiment, search_config, Environment};

/// Outcome class of a command, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ThresholdFailure,
    NonConvergence,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ThresholdFailure => 1,
            Status::NonConvergence => 3,
        }
    }
}

/// Exit code for an error raised while running a command.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::RangeExhausted(_) | Error::OrthogonalityStall | Error::UndefinedFunctional => 3,
        _ => 2,
    }
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    /// Base name of the report files.
    pub name: &'static str,
    pub csv: String,
    pub json: String,
    pub status: Status,
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Round to `digits` significant digits for display.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

#[derive(Debug, Serialize)]
struct CertifyRow {
    m: usize,
    u: usize,
    p: f64,
    sided: String,
    constant: f64,
    exact: bool,
    complete: bool,
    subsets_checked: u64,
    worst_support: String,
    target: Option<f64>,
    meets: bool,
}

#[derive(Debug, Serialize)]
struct CertifyReport<'a> {
    schema: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    certificate: &'a samprec_core::discretization::DiscretizationCertificate,
    target: Option<f64>,
    meets: bool,
    environment: Environment,
}

/// Certify `m` random grid points for `𝒳_u`.
pub fn certify(cfg: &ExperimentConfig, sided: Sidedness, target: Option<f64>) -> Result<CommandOutput> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let u = collection_size(cfg, bessel_riesz_constants(&sys).k);
    let xi = draw_points(&sys, cfg.m, cfg.seed, 0)?;
    let opts = CertifyOptions {
        ascent: AscentOptions {
            restarts: cfg.restarts,
            seed: cfg.seed,
            ..AscentOptions::default()
        },
        subset_budget: cfg.subset_budget,
        abort_above: None,
    };
    let cert = certify_universal(&xi, &sys, u, cfg.p, sided, &opts)?;
    let meets = cert.constant.is_finite() && target.is_none_or(|t| cert.meets(t));
    let row = CertifyRow {
        m: cfg.m,
        u,
        p: cfg.p,
        sided: sided_name(sided).into(),
        constant: cert.constant,
        exact: cert.exact,
        complete: cert.complete,
        subsets_checked: cert.subsets_checked,
        worst_support: join(&cert.worst_support),
        target,
        meets,
    };
    Ok(CommandOutput {
        name: "certify",
        csv: rows_to_csv(&[row]),
        json: json(&CertifyReport {
            schema: "samprec.certificate.v1",
            seed: cfg.seed,
            config: cfg,
            certificate: &cert,
            target,
            meets,
            environment: Environment::current(),
        }),
        status: if meets { Status::Ok } else { Status::ThresholdFailure },
    })
}

fn sided_name(s: Sidedness) -> &'static str {
    match s {
        Sidedness::OneSided => "one",
        Sidedness::TwoSided => "two",
    }
}

fn join(idx: &[usize]) -> String {
    idx.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Serialize)]
struct TrialRow {
    trial: usize,
    m: usize,
    u: usize,
    constant: f64,
    success: bool,
    subsets_checked: u64,
}

#[derive(Debug, Serialize)]
struct SearchReport<'a> {
    schema: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    collection_size: usize,
    found: bool,
    success_rate: f64,
    #[serde(with = "extended_f64")]
    best_constant: f64,
    outcome: &'a samprec_core::discretization::SearchOutcome,
    environment: Environment,
}

/// Draw point sets until one is certified at `target_D`.
pub fn search_points(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let u = collection_size(cfg, bessel_riesz_constants(&sys).k);
    let out = random_point_search(&sys, u, cfg.p, &search_config(cfg))?;
    let rows: Vec<TrialRow> = out
        .trials
        .iter()
        .map(|t| TrialRow {
            trial: t.trial,
            m: cfg.m,
            u,
            constant: t.constant,
            success: t.success,
            subsets_checked: t.subsets_checked,
        })
        .collect();
    let found = out.certificate.is_some();
    Ok(CommandOutput {
        name: "search_points",
        csv: rows_to_csv(&rows),
        json: json(&SearchReport {
            schema: "samprec.search.v1",
            seed: cfg.seed,
            config: cfg,
            collection_size: u,
            found,
            success_rate: out.success_rate,
            best_constant: out.best.constant,
            outcome: &out,
            environment: Environment::current(),
        }),
        status: if found { Status::Ok } else { Status::ThresholdFailure },
    })
}

/// Recovery experiment over `cfg.runs` test functions (`recover` uses one).
pub fn experiment(cfg: &ExperimentConfig, name: &'static str) -> Result<CommandOutput> {
    let report = run_experiment(cfg)?;
    let status = if report.nonconverged > 0 {
        Status::NonConvergence
    } else if report.passed() {
        Status::Ok
    } else {
        Status::ThresholdFailure
    };
    Ok(CommandOutput {
        name,
        csv: report.to_csv(),
        json: report.summary_json(),
        status,
    })
}

#[derive(Debug, Serialize)]
struct AnalyzeRow {
    system: String,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "G")]
    g: usize,
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "R1")]
    r1: f64,
    #[serde(rename = "R2")]
    r2: f64,
    uniform_bound: f64,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "V")]
    v: f64,
    r: f64,
    incoherence_lower_bound: Option<f64>,
}

/// Bessel, Riesz and incoherence constants of the configured system.
pub fn analyze(cfg: &ExperimentConfig, d: f64, brute: bool) -> Result<CommandOutput> {
    cfg.validate()?;
    let sys = cfg.build_system()?;
    let sc = bessel_riesz_constants(&sys).with_discretization(d);
    let brute_v = if brute {
        let cols: Vec<&[C64]> = sys.grid_columns().iter().map(|c| c.as_slice()).collect();
        let search = IncoherenceSearch {
            v: cfg.v,
            s: (2 * cfg.v).min(cfg.n),
            draws: 1000,
            seed: cfg.seed,
            subset_budget: cfg.subset_budget,
        };
        Some(incoherence_brute(
            &cols,
            sys.domain().weights(),
            Exponent::new(cfg.p)?,
            &search,
        )?)
    } else {
        None
    };
    let row = AnalyzeRow {
        system: format!("{:?}", cfg.system).to_lowercase(),
        n: cfg.n,
        g: cfg.grid_size,
        k: round_sig(sc.k, 12),
        r1: round_sig(sc.r1, 12),
        r2: round_sig(sc.r2, 12),
        uniform_bound: round_sig(sc.uniform_bound, 12),
        d,
        v: round_sig(sc.v, 12),
        r: sc.r,
        incoherence_lower_bound: brute_v,
    };
    #[derive(Serialize)]
    struct Report<'a> {
        schema: &'static str,
        config: &'a ExperimentConfig,
        constants: samprec_core::analysis::SystemConstants,
        incoherence_lower_bound: Option<f64>,
        environment: Environment,
    }
    Ok(CommandOutput {
        name: "analyze",
        csv: rows_to_csv(&[row]),
        json: json(&Report {
            schema: "samprec.analysis.v1",
            config: cfg,
            constants: sc,
            incoherence_lower_bound: brute_v,
            environment: Environment::current(),
        }),
        status: Status::Ok,
    })
}

/// Modulus-of-smoothness check for each `p`.
pub fn smoothness(ps: &[f64], samples: usize, dim: usize, seed: u64) -> Result<CommandOutput> {
    let reports: Vec<SmoothnessReport> = ps
        .iter()
        .map(|&p| smoothness_modulus_check(p, samples, dim, seed))
        .collect::<Result<_>>()?;
    let ok = reports.iter().all(|r| r.violations == 0);
    #[derive(Serialize)]
    struct Report<'a> {
        schema: &'static str,
        seed: u64,
        dim: usize,
        reports: &'a [SmoothnessReport],
        passed: bool,
        environment: Environment,
    }
    Ok(CommandOutput {
        name: "smoothness",
        csv: rows_to_csv(&reports),
        json: json(&Report {
            schema: "samprec.smoothness.v1",
            seed,
            dim,
            reports: &reports,
            passed: ok,
            environment: Environment::current(),
        }),
        status: if ok { Status::Ok } else { Status::ThresholdFailure },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_to_significant_digits() {
        assert_eq!(round_sig(1.0000000000000004, 12), 1.0);
        assert_eq!(round_sig(0.123456789012345, 3), 0.123);
        assert_eq!(round_sig(0.0, 5), 0.0);
        assert!(round_sig(f64::INFINITY, 5).is_infinite());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Ok.exit_code(), 0);
        assert_eq!(Status::ThresholdFailure.exit_code(), 1);
        assert_eq!(Status::NonConvergence.exit_code(), 3);
        assert_eq!(error_exit_code(&Error::RangeExhausted(4)), 3);
        assert_eq!(error_exit_code(&Error::Domain("x".into())), 2);
    }
}
