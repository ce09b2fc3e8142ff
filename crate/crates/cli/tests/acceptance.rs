//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use samprec_cli::experiment::test_function;
use samprec_cli::{prepare, run_on, Algorithm, ExperimentConfig, ExperimentReport, Setup, SystemKind};
use samprec_core::analysis::{smoothness_modulus_check, stability_audit, TestFunction};
use samprec_core::combinatorial::{algorithm2, RecoveryOptions};
use samprec_core::discretization::{
    certify_universal, draw_points, minimal_m_estimate, subspace_constant, AscentOptions, CertifyOptions, SearchConfig,
    Sidedness, Subspace,
};
use samprec_core::domain::{lp_norm_continuous, weighted_mixed_measure_weights};
use samprec_core::lp_solver::{lpw_recover, project, project_sup, ProjectionProblem, SolverOptions};
use samprec_core::systems::{sample_grid_values, EvalSite};
use samprec_core::wcga::{iteration_budget, wcga_run, WcgaConfig};
use samprec_core::{Exponent, FunctionSystem, GridDomain, SampleSet, C64};

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn random_c64(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random linear combinations of trigonometric columns.
fn random_columns(dom: &GridDomain, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<C64>> {
    let trig = FunctionSystem::trig(13, dom).unwrap();
    (0..count)
        .map(|_| {
            let mut col = vec![C64::new(0.0, 0.0); dom.len()];
            for basis in trig.grid_columns() {
                let a = random_c64(rng);
                for (c, b) in col.iter_mut().zip(basis) {
                    *c += a * b;
                }
            }
            col
        })
        .collect()
}

fn at(col: &[C64], idx: &[usize]) -> Vec<C64> {
    idx.iter().map(|&i| col[i]).collect()
}

fn random_grid_function(len: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..len)
        .map(|_| C64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..TAU)))
        .collect()
}

struct Exact {
    setup: Setup,
    cfg: ExperimentConfig,
    report: ExperimentReport,
    secs: f64,
}

fn exact_recovery() -> Result<Exact, String> {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default();
    let setup = prepare(&cfg).map_err(|e| e.to_string())?;
    let report = run_on(&setup, &cfg).map_err(|e| e.to_string())?;
    Ok(Exact {
        setup,
        cfg,
        report,
        secs: t0.elapsed().as_secs_f64(),
    })
}

fn criterion_1(ex: &Exact) -> Verdict {
    let s = &ex.report.summary;
    let cert = ex.setup.certificate();
    let budget = s.iteration_budget.unwrap_or(0);
    let er = s.exact_recovery.as_ref().ok_or("no exact-recovery summary")?;
    let mp: Vec<_> = ex.report.rows.iter().filter(|r| r.inequality == "mp").collect();
    let within_budget = mp.iter().all(|r| r.iterations.is_some_and(|i| i <= budget));
    let expected_u = budget + ex.cfg.v;
    let ok = ex.setup.certified()
        && ex.setup.u >= expected_u.min(ex.cfg.n)
        && ex.report.failures.is_empty()
        && er.runs == ex.cfg.runs
        && er.recovered == er.runs
        && er.max_residual < 1e-6
        && er.max_coeff_error < 1e-6
        && within_budget;
    check(
        ok,
        format!(
            "trig N=16 G=1024 p=4: D={:.4} on m={} (u={}), budget {budget}, {}/{} recovered, \
             max residual {:.1e}, max coeff error {:.1e}, search and runs {:.1}s",
            cert.constant,
            cert.xi.len(),
            ex.setup.u,
            er.recovered,
            er.runs,
            er.max_residual,
            er.max_coeff_error,
            ex.secs
        ),
    )
}

fn criterion_2(ex: &Exact) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for delta in [0.01, 0.1] {
        let cfg = ExperimentConfig {
            noise: delta,
            ..ex.cfg.clone()
        };
        let report = run_on(&ex.setup, &cfg).map_err(|e| e.to_string())?;
        ok &= report.failures.is_empty();
        for name in ["mp", "mp2", "mp3"] {
            let ratios: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.inequality == name)
                .map(|r| r.ratio)
                .collect();
            let finite = ratios.iter().all(|r| r.is_finite());
            let max = ratios.iter().cloned().fold(0.0, f64::max);
            ok &= finite && max <= cfg.max_ratio && ratios.len() == cfg.runs;
            parts.push(format!("δ={delta} {name} median {:.3} max {:.3}", median(ratios), max));
        }
    }
    check(ok, format!("threshold 50; {}", parts.join(", ")))
}

fn criterion_3() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2.0, 4.0] {
        let base = ExperimentConfig {
            n: 8,
            v: 1,
            p,
            grid_size: 512,
            m: 40,
            runs: 50,
            noise: 0.5,
            algorithm: Algorithm::Alg2,
            target_d: 2.0,
            restarts: 8,
            seed: 11,
            ..ExperimentConfig::default()
        };
        let setup = prepare(&base).map_err(|e| e.to_string())?;
        ok &= setup.certified() && setup.u == 2;
        for algorithm in [Algorithm::Alg1, Algorithm::Alg2] {
            let cfg = ExperimentConfig {
                algorithm,
                ..base.clone()
            };
            let report = run_on(&setup, &cfg).map_err(|e| e.to_string())?;
            ok &= report.failures.is_empty();
            for agg in &report.summary.aggregates {
                let asserted = matches!(agg.inequality.as_str(), "I6" | "ub17");
                if asserted {
                    ok &= agg.violations == 0 && agg.rows == cfg.runs;
                }
                parts.push(format!(
                    "p={p} {}{} {} violations, max ratio {:.3}",
                    agg.inequality,
                    if asserted { "" } else { " (info)" },
                    agg.violations,
                    agg.max_ratio
                ));
            }
        }
        parts.push(format!("p={p} D={:.4}", setup.certificate().constant));
    }
    check(ok, parts.join(", "))
}

fn criterion_4() -> Verdict {
    let dom = GridDomain::uniform_torus(256, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid_cols = random_columns(&dom, 4, &mut rng);
    let m = 40;
    let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..dom.len())).collect();
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5) / m as f64).collect();
    let c2: f64 = w.iter().sum();
    let sample_cols: Vec<Vec<C64>> = grid_cols.iter().map(|c| at(c, &idx)).collect();
    let g: Vec<&[C64]> = grid_cols.iter().map(|c| c.as_slice()).collect();
    let s: Vec<&[C64]> = sample_cols.iter().map(|c| c.as_slice()).collect();
    let sub = Subspace {
        grid_cols: &g,
        grid_weights: dom.weights(),
        sample_cols: &s,
        sample_weights: &w,
    };
    let mixed_w = weighted_mixed_measure_weights(&dom, &w);
    let concat: Vec<Vec<C64>> = grid_cols
        .iter()
        .zip(&sample_cols)
        .map(|(a, b)| [a.clone(), b.clone()].concat())
        .collect();

    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2.0, 4.0] {
        let exp = Exponent::new(p).unwrap();
        let tol = SolverOptions::for_exponent(exp).tol;
        let opts = AscentOptions {
            restarts: 64,
            ..AscentOptions::default()
        };
        let d = subspace_constant(&sub, p, &opts).map_err(|e| e.to_string())?.constant;
        let c1 = 1.0 / d;
        let k = 2.0 / c1 * c2.powf(1.0 / p) + 1.0;
        let (mut v1, mut v2, mut worst1, mut worst2) = (0, 0, 0.0f64, 0.0f64);
        for _ in 0..50 {
            let coef: Vec<C64> = (0..4).map(|_| random_c64(&mut rng)).collect();
            let noise = random_grid_function(dom.len(), &mut rng);
            let f: Vec<C64> = (0..dom.len())
                .map(|i| (0..4).map(|j| coef[j] * grid_cols[j][i]).sum::<C64>() + 0.3 * noise[i])
                .collect();
            let fs = at(&f, &idx);
            let fit = lpw_recover(&fs, &s, exp, Some(&w), tol).map_err(|e| e.to_string())?;
            let approx: Vec<C64> = (0..dom.len())
                .map(|i| (0..4).map(|j| fit.coeffs[j] * grid_cols[j][i]).sum())
                .collect();
            let diff: Vec<C64> = f.iter().zip(&approx).map(|(a, b)| a - b).collect();
            let err = lp_norm_continuous(&diff, &dom, exp).map_err(|e| e.to_string())?;
            let target = [f.clone(), fs].concat();
            let d_mixed = project(
                &ProjectionProblem {
                    target: &target,
                    basis: concat.iter().map(|c| c.as_slice()).collect(),
                    p: exp,
                    weights: &mixed_w,
                },
                tol,
            )
            .map_err(|e| e.to_string())?
            .residual_norm;
            let sup = project_sup(&ProjectionProblem {
                target: &f,
                basis: g.clone(),
                p: Exponent::Infinite,
                weights: dom.weights(),
            })
            .map_err(|e| e.to_string())?;
            let d_inf = sup.lower_bound.unwrap_or(sup.residual_norm);
            let b1 = 2f64.powf(1.0 / p) * k * d_mixed;
            let b2 = k * d_inf;
            v1 += (err > b1 + 1e-8) as usize;
            v2 += (err > b2 + 1e-8) as usize;
            worst1 = worst1.max(err / b1);
            worst2 = worst2.max(err / b2);
        }
        ok &= v1 == 0 && v2 == 0;
        parts.push(format!(
            "p={p} C1={c1:.4} C2={c2:.4}: A1 {v1} violations (max error/bound {worst1:.3}), \
             A2 {v2} violations (max {worst2:.3})"
        ));
    }
    check(ok, parts.join(", "))
}

/// Largest `‖f‖_2 / ‖S f‖_2` over a dense set of directions in a 2-dimensional subspace.
fn sampled_p2_constant(
    grid_cols: &[Vec<C64>],
    sample_cols: &[Vec<C64>],
    dom: &GridDomain,
    rng: &mut ChaCha8Rng,
) -> f64 {
    // Hermitian forms ‖a c0 + b c1‖² from explicit sums.
    let form = |cols: &[Vec<C64>], w: &dyn Fn(usize) -> f64| {
        let mut q = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, (&a, &b)) in cols[0].iter().zip(&cols[1]).enumerate() {
            let x = [a, b];
            for (r, row) in q.iter_mut().enumerate() {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell += x[r].conj() * x[c] * w(i);
                }
            }
        }
        q
    };
    let m = sample_cols[0].len() as f64;
    let qg = form(grid_cols, &|i| dom.weights()[i]);
    let qs = form(sample_cols, &|_| 1.0 / m);
    let eval = |q: &[[C64; 2]; 2], a: C64, b: C64| {
        (a.conj() * (q[0][0] * a + q[0][1] * b) + b.conj() * (q[1][0] * a + q[1][1] * b)).re
    };
    let ratio = |a: C64, b: C64| (eval(&qg, a, b) / eval(&qs, a, b)).sqrt();
    let mut best: f64 = 0.0;
    let steps = 600;
    for i in 0..=steps {
        let theta = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
        for j in 0..2 * steps {
            let phi = TAU * j as f64 / (2 * steps) as f64;
            best = best.max(ratio(C64::new(theta.cos(), 0.0), C64::from_polar(theta.sin(), phi)));
        }
    }
    for _ in 0..100_000 {
        best = best.max(ratio(random_c64(rng), random_c64(rng)));
    }
    best
}

fn criterion_5() -> Verdict {
    let dom = GridDomain::uniform_torus(256, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    let (mut max_above, mut max_gap) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..20 {
        let grid_cols = random_columns(&dom, 2, &mut rng);
        let idx: Vec<usize> = (0..12).map(|_| rng.random_range(0..dom.len())).collect();
        let sample_cols: Vec<Vec<C64>> = grid_cols.iter().map(|c| at(c, &idx)).collect();
        let g: Vec<&[C64]> = grid_cols.iter().map(|c| c.as_slice()).collect();
        let s: Vec<&[C64]> = sample_cols.iter().map(|c| c.as_slice()).collect();
        let w = vec![1.0 / idx.len() as f64; idx.len()];
        let sub = Subspace {
            grid_cols: &g,
            grid_weights: dom.weights(),
            sample_cols: &s,
            sample_weights: &w,
        };
        let exact = subspace_constant(&sub, 2.0, &AscentOptions::default()).map_err(|e| e.to_string())?;
        let sampled = sampled_p2_constant(&grid_cols, &sample_cols, &dom, &mut rng);
        let above = (sampled - exact.constant) / exact.constant;
        max_above = max_above.max(above);
        max_gap = max_gap.max(-above);
        ok &= exact.exact && above <= 1e-8 && -above <= 1e-3;
    }

    let sys = FunctionSystem::trig(8, &GridDomain::uniform_torus(256, 1).unwrap()).map_err(|e| e.to_string())?;
    let xi = SampleSet::on_grid(sys.domain(), (0..16).map(|k| k * 16).collect()).map_err(|e| e.to_string())?;
    let mut uniform = Vec::new();
    for u in [2, 8] {
        let cert = certify_universal(&xi, &sys, u, 2.0, Sidedness::OneSided, &CertifyOptions::default())
            .map_err(|e| e.to_string())?;
        ok &= cert.complete && cert.exact && (cert.constant - 1.0).abs() <= 1e-10;
        uniform.push(format!("u={u} D-1={:.1e}", cert.constant - 1.0));
    }
    check(
        ok,
        format!(
            "20 subspaces: sampled never above exact (max relative excess {max_above:.1e}), \
             max relative gap {max_gap:.1e}; uniform 16-point grid, trig N=8: {}",
            uniform.join(", ")
        ),
    )
}

/// All `v`-subsets of `0..n` in reverse lexicographic order.
fn reverse_subsets(n: usize, v: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, v: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == v {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, v, &mut Vec::new(), &mut out);
    out.reverse();
    out
}

fn criterion_6() -> Verdict {
    let cfg = ExperimentConfig {
        system: SystemKind::Perturbed,
        n: 10,
        grid_size: 256,
        ..ExperimentConfig::default()
    };
    let sys = cfg.build_system().map_err(|e| e.to_string())?;
    let xi = draw_points(&sys, 24, 6, 0).map_err(|e| e.to_string())?;
    let cols = sys.sample_matrix(&xi).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for p in [2.0, 3.0] {
        let exp = Exponent::new(p).unwrap();
        let opts = RecoveryOptions::for_exponent(exp);
        for v in [1, 2] {
            for k in 0..20 {
                let f = random_grid_function(sys.domain().len(), &mut rng);
                let fs = sample_grid_values(&f, sys.domain(), &xi).map_err(|e| e.to_string())?;
                let alg = algorithm2(&fs, &sys, &xi, v, exp, &opts).map_err(|e| e.to_string())?;
                let mut best: Option<(f64, Vec<usize>)> = None;
                for support in reverse_subsets(sys.len(), v) {
                    let basis: Vec<&[C64]> = support.iter().map(|&j| cols[j].as_slice()).collect();
                    let err = lpw_recover(&fs, &basis, exp, None, opts.tol)
                        .map_err(|e| e.to_string())?
                        .residual_norm;
                    let better = match &best {
                        None => true,
                        Some((b, s)) => err < *b || (err == *b && support < *s),
                    };
                    if better {
                        best = Some((err, support));
                    }
                }
                let (err, support) = best.expect("nonempty search");
                cases += 1;
                if support != alg.chosen_support || err.to_bits() != alg.error_sample.to_bits() {
                    mismatches.push(format!("p={p} v={v} f{k}"));
                }
            }
        }
    }
    check(
        mismatches.is_empty(),
        format!(
            "perturbed N=10, v∈{{1,2}}, p∈{{2,3}}: {} of {cases} cases identical{}",
            cases - mismatches.len(),
            if mismatches.is_empty() {
                String::new()
            } else {
                format!("; mismatches {}", mismatches.join(" "))
            }
        ),
    )
}

fn criterion_7(ex: &Exact) -> Verdict {
    let sys = &ex.setup.sys;
    let cert = ex.setup.certificate();
    let d = cert.constant;
    let wcfg = WcgaConfig {
        t: ex.cfg.t,
        p: ex.cfg.p,
        max_iterations: usize::MAX,
        residual_tol: ex.cfg.residual_tol,
        budget_constant_c: ex.cfg.budget_constant_c,
    };
    let budget = iteration_budget(ex.cfg.v, d, ex.setup.constants.k, &wcfg);
    let wcfg = WcgaConfig {
        max_iterations: budget,
        ..wcfg
    };
    let map = |y: &[C64]| -> samprec_core::Result<Vec<C64>> {
        let trace = wcga_run(y, sys, &cert.xi, &wcfg)?;
        sys.evaluate_sparse(&trace.approximant(), EvalSite::Grid)
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for noise in [0.0, 0.1] {
        let cfg = ExperimentConfig {
            noise,
            ..ex.cfg.clone()
        };
        let inputs = (0..cfg.runs)
            .map(|run| {
                let (_, grid) = test_function(sys, &cfg, run)?;
                let samples = sample_grid_values(&grid, sys.domain(), &cert.xi)?;
                Ok(TestFunction { grid, samples })
            })
            .collect::<samprec_core::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let rep = stability_audit(&map, sys.domain(), cfg.p, &inputs, Some(2.0 * d), 7).map_err(|e| e.to_string())?;
        ok &= rep.violations.is_empty() && rep.homogeneity_ok && rep.excluded.is_empty();
        parts.push(format!(
            "δ={noise}: A={:.4} ≤ 2D={:.4}, homogeneity error {:.1e}, {} violations",
            rep.a_measured,
            2.0 * d,
            rep.max_homogeneity_error,
            rep.violations.len()
        ));
    }
    check(ok, format!("{} WCGA runs each, {}", ex.cfg.runs, parts.join("; ")))
}

fn criterion_8() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2.0, 3.0, 4.0, 6.0] {
        let rep = smoothness_modulus_check(p, 10_000, 32, 8).map_err(|e| e.to_string())?;
        ok &= rep.violations == 0 && rep.samples == 10_000;
        parts.push(format!(
            "p={p}: {} violations, max excess {:.2e}",
            rep.violations, rep.max_excess
        ));
    }
    check(ok, parts.join(", "))
}

fn criterion_9() -> Verdict {
    let sys = FunctionSystem::trig(8, &GridDomain::uniform_torus(256, 1).unwrap()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2.0, 4.0] {
        let mut medians = Vec::new();
        for v in [1, 2] {
            let estimates = (0..5u64)
                .map(|rep| {
                    let cfg = SearchConfig {
                        trials: 8,
                        seed: 900 + rep,
                        target_d: 2.0,
                        restarts: 4,
                        ..SearchConfig::default()
                    };
                    minimal_m_estimate(&sys, v, p, &cfg, 256).map(|m| m as f64)
                })
                .collect::<samprec_core::Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            medians.push(median(estimates));
        }
        ok &= medians.windows(2).all(|w| w[0] <= w[1]);
        parts.push(format!(
            "p={p}: median m(1)={} m(2)={} (ratio {:.2}; v^(p/2) curve 1, {:.2})",
            medians[0],
            medians[1],
            medians[1] / medians[0],
            2f64.powf(p / 2.0)
        ));
    }
    check(ok, parts.join(", "))
}

fn criterion_10() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_samprec");
    let small = ["--N", "8", "--G", "256", "--p", "4", "--seed", "3"];
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "certify",
            [&small[..], &["--m", "40", "--v", "1", "--algorithm", "alg2"]].concat(),
        ),
        (
            "search_points",
            [&small[..], &["--m", "40", "--trials", "3", "--target-D", "2"]].concat(),
        ),
        (
            "recover",
            [&small[..], &["--m", "60", "--target-D", "2", "--noise", "0.05"]].concat(),
        ),
        ("lebesgue", vec!["--p", "4", "--v", "2", "--runs", "100", "--seed", "7"]),
        (
            "lebesgue",
            [
                &small[..],
                &[
                    "--algorithm",
                    "alg1",
                    "--v",
                    "1",
                    "--m",
                    "40",
                    "--target-D",
                    "3",
                    "--runs",
                    "10",
                    "--noise",
                    "0.2",
                ],
            ]
            .concat(),
        ),
        (
            "lebesgue",
            [
                &small[..],
                &[
                    "--algorithm",
                    "alg2",
                    "--v",
                    "1",
                    "--m",
                    "40",
                    "--target-D",
                    "3",
                    "--runs",
                    "10",
                    "--noise",
                    "0.2",
                ],
            ]
            .concat(),
        ),
        (
            "lebesgue",
            [
                &small[..],
                &[
                    "--algorithm",
                    "lpw",
                    "--m",
                    "60",
                    "--target-D",
                    "3",
                    "--runs",
                    "10",
                    "--noise",
                    "0.2",
                ],
            ]
            .concat(),
        ),
        (
            "analyze",
            vec!["--system", "perturbed", "--N", "8", "--G", "256", "--brute"],
        ),
        ("smoothness", vec!["--samples", "2000", "--seed", "5"]),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, args) in &runs {
        let sub = name.replace('_', "-");
        let outputs: Vec<(Vec<u8>, Option<i32>)> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().expect("temp dir");
                let status = Command::new(bin)
                    .arg(&sub)
                    .args(args)
                    .arg("--out")
                    .arg(dir.path())
                    .arg("--format")
                    .arg("json")
                    .output()
                    .expect("run samprec")
                    .status;
                let csv = std::fs::read(dir.path().join(format!("{name}.csv"))).unwrap_or_default();
                (csv, status.code())
            })
            .collect();
        let same = !outputs[0].0.is_empty() && outputs[0] == outputs[1];
        let code = outputs[0].1;
        let sound = matches!(code, Some(0) | Some(1) | Some(3));
        ok &= same && sound;
        parts.push(format!(
            "{sub}{} {} ({} bytes, exit {})",
            if *name == "lebesgue" {
                format!(
                    "[{}]",
                    args.iter()
                        .position(|a| *a == "--algorithm")
                        .map_or("wcga", |i| args[i + 1])
                )
            } else {
                String::new()
            },
            if same { "identical" } else { "DIFFERS" },
            outputs[0].0.len(),
            code.map_or("signal".to_string(), |c| c.to_string())
        ));
    }
    check(ok, parts.join(", "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let exact = catch_unwind(exact_recovery).unwrap_or_else(|_| Err("panic while preparing the setup".into()));
    let shared = |f: fn(&Exact) -> Verdict| -> Box<dyn Fn() -> Verdict + '_> {
        let exact = &exact;
        Box::new(move || match exact {
            Ok(ex) => f(ex),
            Err(e) => Err(format!("setup failed: {e}")),
        })
    };
    let criteria: Vec<Criterion<'_>> = vec![
        ("exact recovery by WCGA", shared(criterion_1)),
        ("Lebesgue inequalities mp/mp2/mp3", shared(criterion_2)),
        ("Algorithm 1 and 2 bounds with sup-norm σ_v", Box::new(criterion_3)),
        ("lp recovery with measured C1, C2", Box::new(criterion_4)),
        ("p=2 discretization exactness", Box::new(criterion_5)),
        ("Algorithm 2 equals reverse exhaustive search", Box::new(criterion_6)),
        ("stability of the WCGA recovery map", shared(criterion_7)),
        ("modulus of smoothness of discrete L_p", Box::new(criterion_8)),
        ("minimal m non-decreasing in v", Box::new(criterion_9)),
        ("CLI determinism", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {:>2} {title}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {title}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
