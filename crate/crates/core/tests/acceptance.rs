//! Acceptance suite. Every criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.

use std::time::Instant;

use jointsparse::certificate::certify;
use jointsparse::harness::{
    crossing_curve, lemma3_exhaustive_dft, lemma3_suite, lemma5_suite, lemma7_suite,
    records_to_csv, run_phase_experiment, CrossingCurve, Lemma5Config, PhaseConfig, PhaseGrid,
};
use jointsparse::jbpm::{extract_signal, phase_aligned_error, random_instance, solve_jbpm, svt};
use jointsparse::numeric::{max_abs_diff, CMat, Rng, C64};
use jointsparse::sensing::make_ensemble;
use jointsparse::signal::{dirac_comb, random_comb_mixture, Signal};
use jointsparse::solver::{
    oracle_solve, relative_error, soft_threshold, solve, JbpProblem, Mode, SolverConfig,
};
use jointsparse::{Error, Result};

const PHASE_K: [usize; 4] = [4, 8, 12, 16];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn report<E: std::fmt::Display>(
    id: usize,
    name: &str,
    outcome: std::result::Result<Verdict, E>,
    seconds: f64,
) -> bool {
    let v = outcome.unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
    println!(
        "[{}] criterion {id:>2} {name}: {} ({seconds:.1} s)",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail
    );
    v.pass
}

fn phase_config(methods: Vec<Mode>) -> PhaseConfig {
    PhaseConfig {
        k_values: PHASE_K.to_vec(),
        methods,
        ..PhaseConfig::default()
    }
}

fn m50_list(curve: &CrossingCurve) -> Vec<Option<f64>> {
    PHASE_K.iter().map(|&k| curve.m50(k).ok()).collect()
}

fn fmt_m50(values: &[Option<f64>]) -> String {
    let parts: Vec<String> = PHASE_K
        .iter()
        .zip(values)
        .map(|(k, v)| match v {
            Some(v) => format!("k={k}: {v:.2}"),
            None => format!("k={k}: unbracketed"),
        })
        .collect();
    parts.join(", ")
}

fn criterion_jbp_crossing(curve: &CrossingCurve) -> Result<Verdict> {
    let m50 = m50_list(curve);
    let inside = PHASE_K.iter().zip(&m50).all(|(&k, v)| {
        let (lo, hi) = (k as f64 / 2.0 - 1.0, 3.0 * k as f64 / 5.0 + 1.0);
        v.is_some_and(|v| (lo..=hi).contains(&v))
    });
    let windows: Vec<String> = PHASE_K
        .iter()
        .map(|&k| format!("[{:.1}, {:.1}]", k as f64 / 2.0 - 1.0, 3.0 * k as f64 / 5.0 + 1.0))
        .collect();
    Ok(Verdict::new(
        inside,
        format!("m50 {} against windows {}", fmt_m50(&m50), windows.join(" ")),
    ))
}

fn criterion_bp_comparison(jbp: &CrossingCurve, bp: &CrossingCurve) -> Result<Verdict> {
    let j = m50_list(jbp);
    let b = m50_list(bp);
    let ratios: Option<Vec<f64>> = PHASE_K
        .iter()
        .zip(&b)
        .map(|(&k, v)| v.map(|v| v / k as f64))
        .collect();
    let Some(ratios) = ratios else {
        return Ok(Verdict::new(false, format!("BP m50 {}", fmt_m50(&b))));
    };
    let increasing = ratios.windows(2).all(|w| w[1] >= w[0]);
    let in_band = ratios.iter().all(|r| (0.9..=2.6).contains(r));
    let below = j.iter().zip(&b).all(|(j, b)| match (j, b) {
        (Some(j), Some(b)) => j <= b,
        _ => false,
    });
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok(Verdict::new(
        increasing && in_band && below,
        format!(
            "BP m50/k [{}], non-decreasing {increasing}, within [0.9, 2.6] {in_band}, JBP <= BP {below}",
            shown.join(", ")
        ),
    ))
}

fn criterion_determinism(first: &PhaseGrid, second: &PhaseGrid) -> Result<Verdict> {
    let a = records_to_csv(&first.records)?;
    let b = records_to_csv(&second.records)?;
    Ok(Verdict::new(
        a == b,
        format!("{} bytes vs {} bytes, identical {}", a.len(), b.len(), a == b),
    ))
}

fn criterion_lemma7() -> Result<Verdict> {
    let report = lemma7_suite(&[4, 8, 9, 12, 16, 36, 64], &mut Rng::new(7))?;
    let pairs: usize = report.entries.iter().map(|e| e.pairs).sum();
    let failures: usize = report.entries.iter().flat_map(|e| e.failures).sum();
    let worst = report
        .entries
        .iter()
        .flat_map(|e| e.max_deviation)
        .fold(0.0, f64::max);
    let sampled: Vec<String> = report
        .entries
        .iter()
        .filter(|e| !e.exhaustive)
        .map(|e| e.n.to_string())
        .collect();
    Ok(Verdict::new(
        report.pass,
        format!(
            "{pairs} support pairs, {failures} failures, max deviation {worst:.1e}, \
             enumeration exhaustive except n in {{{}}} (structured sample)",
            sampled.join(", ")
        ),
    ))
}

fn criterion_lemma3() -> Result<Verdict> {
    let random = lemma3_suite(&mut Rng::new(3), &[4, 8, 16], 100)?;
    let exhaustive = lemma3_exhaustive_dft(5)?;
    let counts: Vec<String> = random
        .random
        .iter()
        .map(|e| format!("n={}: {}/{}", e.n, e.full_rank, e.trials))
        .collect();
    Ok(Verdict::new(
        random.pass && exhaustive.pass,
        format!(
            "{}; identity/DFT at n=5: {}/{} pairs",
            counts.join(", "),
            exhaustive.full_rank,
            exhaustive.pairs
        ),
    ))
}

fn recover(problem: &JbpProblem) -> Result<jointsparse::solver::SolverResult> {
    match solve(problem, &SolverConfig::default()) {
        Err(Error::MaxItersExceeded { result }) => Ok(*result),
        other => other,
    }
}

fn criterion_certificate_implies_recovery() -> Result<Verdict> {
    // (n, period, m as a multiple of max(|S1|, |S2|), lambda)
    let families: [(usize, usize, usize, f64); 10] = [
        (16, 4, 3, 1.0),
        (16, 4, 4, 1.0),
        (36, 6, 6, 1.0),
        (64, 4, 3, 2.0),
        (64, 4, 6, 2.0),
        (64, 16, 3, 0.5),
        (64, 16, 6, 1.0),
        (64, 8, 6, 1.0),
        (100, 10, 6, 1.0),
        (100, 10, 6, 2.0),
    ];
    let target = 200;
    let mut rng = Rng::new(5);
    let (mut attempts, mut certified, mut recovered) = (0, 0, 0);
    let mut worst = 0.0f64;
    while certified < target && attempts < 20 * target {
        let (n, period, factor, lambda) = families[attempts % families.len()];
        let x: Signal = if attempts % 2 == 0 {
            dirac_comb(n, period, rng.below(period), rng.below(n))?
        } else {
            random_comb_mixture(&mut rng, n, period, 2)?
        };
        attempts += 1;
        let width = x.support_time().len().max(x.support_freq().len());
        let m = (factor * width).min(n);
        let ens = make_ensemble(&mut rng, m, n)?;
        let (_, cert) = certify(&ens, &x, lambda)?;
        if !cert.pass {
            continue;
        }
        certified += 1;
        let problem = JbpProblem::from_signal(ens, x.x(), lambda, Mode::Jbp);
        let err = relative_error(&recover(&problem)?.x_hat, x.x());
        worst = worst.max(err);
        recovered += (err <= 1e-4) as usize;
    }
    Ok(Verdict::new(
        certified >= target && recovered == certified,
        format!(
            "{recovered}/{certified} certified instances recovered to 1e-4 \
             ({attempts} drawn, worst rel_err {worst:.1e})"
        ),
    ))
}

fn criterion_oracle_agreement() -> Result<Verdict> {
    let mut rng = Rng::new(2024);
    let modes = [Mode::Jbp, Mode::BpTime, Mode::BpFreq];
    let (mut agree, mut feasible, mut converged) = (0, 0, 0);
    let mut worst_gap = 0.0f64;
    let mut worst_residual = 0.0f64;
    let total = 20;
    for i in 0..total {
        let n = [8, 16, 32][i % 3];
        let period = if n == 8 { 2 } else { 4 };
        let x = random_comb_mixture(&mut rng, n, period, 1 + i % 2)?;
        let ens = make_ensemble(&mut rng, n / 2, n)?;
        let problem = JbpProblem::from_signal(ens, x.x(), 1.0, modes[i % 3]);
        let admm = recover(&problem)?;
        let oracle = oracle_solve(&problem, 20_000, i as u64)?;
        let gap = (admm.objective - oracle.objective).abs() / (1.0 + admm.objective);
        worst_gap = worst_gap.max(gap);
        agree += (gap <= 1e-3) as usize;
        if admm.converged {
            converged += 1;
            let residual = problem.relative_residual(&admm.x_hat);
            worst_residual = worst_residual.max(residual);
            feasible += (residual <= 1e-6) as usize;
        }
    }
    Ok(Verdict::new(
        agree == total && feasible == converged,
        format!(
            "objective agreement {agree}/{total} (worst scaled gap {worst_gap:.1e}), \
             feasible {feasible}/{converged} converged (worst residual {worst_residual:.1e})"
        ),
    ))
}

fn criterion_lemma5() -> Result<Verdict> {
    let report = lemma5_suite(&mut Rng::new(11), &Lemma5Config::default())?;
    Ok(Verdict::new(
        report.pass,
        format!(
            "zero fraction {:.5} over {} entries, bound {:.5} less 3 sigma",
            report.fraction, report.entries, report.bound
        ),
    ))
}

fn criterion_proximal_values() -> Result<Verdict> {
    let z = soft_threshold(C64::new(3.0, 4.0), 1.0);
    let soft = (z - C64::new(2.4, 3.2)).norm();
    let zero = C64::new(0.0, 0.0);
    let diag = |a: f64, b: f64| {
        CMat::from_row_slice(2, 2, &[C64::new(a, 0.0), zero, zero, C64::new(b, 0.0)])
    };
    let shrunk = max_abs_diff(&svt(&diag(3.0, 0.5), 1.0)?, &diag(2.0, 0.0));
    Ok(Verdict::new(
        soft <= 1e-12 && shrunk <= 1e-12,
        format!("soft-threshold error {soft:.1e}, svt error {shrunk:.1e}"),
    ))
}

fn criterion_jbpm() -> Result<Verdict> {
    let (x, problem) = random_instance(&mut Rng::new(9), 8, 2, 64, 0.1)?;
    let result = match solve_jbpm(&problem, &SolverConfig::default(), true) {
        Err(Error::MatrixMaxItersExceeded { result }) => *result,
        other => other?,
    };
    let xx = &x * x.adjoint();
    let matrix_err = (&result.x_hat - &xx).norm() / xx.norm();
    let (x_hat, _) = extract_signal(&result.x_hat)?;
    let signal_err = phase_aligned_error(&x_hat, &x);
    Ok(Verdict::new(
        matrix_err <= 1e-6 && signal_err <= 1e-3,
        format!("matrix rel_err {matrix_err:.1e}, phase-aligned signal error {signal_err:.1e}"),
    ))
}

fn timed(id: usize, name: &str, f: impl FnOnce() -> Result<Verdict>) -> bool {
    let start = Instant::now();
    let outcome = f();
    report(id, name, outcome, start.elapsed().as_secs_f64())
}

#[test]
fn acceptance_criteria() {
    let mut verdicts = Vec::new();

    let start = Instant::now();
    let jbp_run = run_phase_experiment(&phase_config(vec![Mode::Jbp]));
    let jbp_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let bp_run = run_phase_experiment(&phase_config(vec![Mode::BpTime]));
    let bp_seconds = start.elapsed().as_secs_f64();

    let curves = match (&jbp_run, &bp_run) {
        (Ok(jbp), Ok(bp)) => {
            let jbp_curve = crossing_curve(jbp, Mode::Jbp, 1.0);
            let bp_curve = crossing_curve(bp, Mode::BpTime, 0.0);
            print!("{}{}", jbp_curve.to_text(), bp_curve.to_text());
            Some((jbp_curve, bp_curve))
        }
        _ => None,
    };
    let missing = || {
        match (&jbp_run, &bp_run) {
            (Err(e), _) | (_, Err(e)) => format!("phase experiment failed: {e}"),
            _ => String::from("no crossing curves"),
        }
    };

    verdicts.push(report(
        1,
        "JBP 50% crossing",
        curves
            .as_ref()
            .ok_or_else(missing)
            .and_then(|(j, _)| criterion_jbp_crossing(j).map_err(|e| e.to_string())),
        jbp_seconds,
    ));
    verdicts.push(report(
        2,
        "BP comparison",
        curves
            .as_ref()
            .ok_or_else(missing)
            .and_then(|(j, b)| criterion_bp_comparison(j, b).map_err(|e| e.to_string())),
        bp_seconds,
    ));
    verdicts.push(timed(3, "DFT leakage identities", criterion_lemma7));
    verdicts.push(timed(4, "stacked-basis rank", criterion_lemma3));
    verdicts.push(timed(
        5,
        "certificate implies recovery",
        criterion_certificate_implies_recovery,
    ));
    verdicts.push(timed(6, "solver vs oracle", criterion_oracle_agreement));
    verdicts.push(timed(7, "shrinkage zero fraction", criterion_lemma5));
    verdicts.push(timed(8, "proximal unit values", criterion_proximal_values));
    verdicts.push(timed(9, "lifted recovery", criterion_jbpm));
    let start = Instant::now();
    let determinism = match &jbp_run {
        Ok(first) => run_phase_experiment(&phase_config(vec![Mode::Jbp]))
            .and_then(|second| criterion_determinism(first, &second))
            .map_err(|e| e.to_string()),
        Err(e) => Err(format!("phase experiment failed: {e}")),
    };
    verdicts.push(report(
        10,
        "determinism",
        determinism,
        start.elapsed().as_secs_f64(),
    ));

    let failed: Vec<usize> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, &ok)| !ok)
        .map(|(i, _)| i + 1)
        .collect();
    println!(
        "{} of {} criteria pass",
        verdicts.len() - failed.len(),
        verdicts.len()
    );
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
