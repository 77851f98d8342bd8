use std::process::ExitCode;
use std::time::{Duration, Instant};

use qdiv::aep::{self, Smoothed, SweepRow};
use qdiv::oracle::Distribution;
use qdiv::splitting::SolverConfig;
use qdiv_cli::suites::{self, reference_qubit_pair, Suite, SuiteParams, SuiteReport};

const SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn suite(s: Suite) -> SuiteReport {
    suites::run(s, &SuiteParams::new(s, SEED))
}

fn summary(r: &SuiteReport) -> String {
    format!("{} trials={} failed={} max_violation={:.3e}", r.suite.name(), r.trials, r.failed_trials, r.max_violation)
}

fn from_suite(s: Suite) -> Outcome {
    let r = suite(s);
    Outcome { pass: r.pass, detail: summary(&r) }
}

/// Worst violation of one named check across a report, with the number of trials breaking it.
fn check_stats(r: &SuiteReport, name: &str) -> (f64, usize) {
    let checks = r.records.iter().flat_map(|t| t.checks.iter().filter(|c| c.name == name));
    checks.fold((f64::NEG_INFINITY, 0), |(v, k), c| (v.max(c.violation), k + usize::from(!c.pass)))
}

fn moment_bounds() -> Outcome {
    let r = suite(Suite::MomentBounds);
    let errors = r.records.iter().filter(|t| t.error.is_some()).count();
    let mut pass = errors == 0;
    let mut parts = vec![summary(&r)];
    for name in ["variance", "third_moment"] {
        let (v, k) = check_stats(&r, name);
        pass &= k == 0;
        parts.push(format!("{name}: worst={v:.3e} failing={k}"));
    }
    let (v, k) = check_stats(&r, "third_moment_ratio_form");
    parts.push(format!("third_moment against (log2(2^Dmax + 2*2^(Dmax/2) + 6))^3 [informational]: worst={v:.3e} failing={k}"));
    Outcome { pass, detail: parts.join("; ") }
}

fn pinching() -> Outcome {
    let a = suite(Suite::Pinching);
    let b = suite(Suite::PinchedBound);
    Outcome { pass: a.pass && b.pass, detail: format!("{}; {}", summary(&a), summary(&b)) }
}

fn classical_trend() -> Outcome {
    let run = || -> anyhow::Result<Outcome> {
        let p = Distribution::new(vec![0.11, 0.89])?;
        let q = Distribution::new(vec![0.5, 0.5])?;
        let ns: Vec<usize> = (10..=2000).collect();
        let rows = aep::classical_aep_sweep(&p, &q, 0.25, &ns)?;
        let scaled: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.normalized_residual.abs())).collect();
        let bound = scaled.iter().map(|&(_, z)| z).fold(0.0, f64::max);
        let tail: Vec<(f64, f64)> = scaled.iter().filter(|&&(n, _)| n >= 200.0).map(|&(n, z)| (n.log10(), z)).collect();
        let slope = aep::slope(&tail);
        Ok(Outcome {
            pass: bound.is_finite() && slope <= 0.0,
            detail: format!("max |residual|*n/log2(n)={bound:.4} slope over n=200..2000 (per decade)={slope:.4e}"),
        })
    };
    run().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e:#}") })
}

fn nonincreasing_from_three(rows: &[SweepRow]) -> (bool, Vec<String>) {
    let tail: Vec<&SweepRow> = rows.iter().filter(|r| r.n >= 3).collect();
    let ok = tail.windows(2).all(|w| w[1].residual.abs() <= w[0].residual.abs());
    (ok, tail.iter().map(|r| format!("{:.4}", r.residual.abs())).collect())
}

fn quantum_trend() -> Outcome {
    let run = || -> anyhow::Result<Outcome> {
        let (rho, sigma) = reference_qubit_pair();
        let ns: Vec<usize> = (1..=8).collect();
        let config = SolverConfig::default();
        let mut pass = true;
        let mut parts = Vec::new();
        for which in [Smoothed::HypothesisTesting, Smoothed::MaxRelative] {
            let rows = aep::aep_sweep(&rho, &sigma, 0.25, &ns, which, &config)?;
            let (ok, values) = nonincreasing_from_three(&rows);
            pass &= ok && rows.len() == ns.len();
            parts.push(format!("{which:?} |residual| n=3..8: [{}]", values.join(", ")));
        }
        Ok(Outcome { pass, detail: parts.join("; ") })
    };
    run().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e:#}") })
}

fn main() -> ExitCode {
    let minute = Duration::from_secs(60);
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Outcome>)> = vec![
        ("oracle equivalence", Duration::from_secs(30), Box::new(|| from_suite(Suite::OracleEquivalence))),
        ("data processing", 2 * minute, Box::new(|| from_suite(Suite::DataProcessing))),
        ("smoothing bridge", 5 * minute, Box::new(|| from_suite(Suite::SmoothingBridge))),
        ("moment bounds", Duration::from_secs(10), Box::new(moment_bounds)),
        ("smoothing constructions", 10 * minute, Box::new(|| from_suite(Suite::SmoothingConstructions))),
        ("pinching and pinched bound", minute, Box::new(pinching)),
        ("measured Renyi regularization", 2 * minute, Box::new(|| from_suite(Suite::MeasuredRegularization))),
        ("geometric preparation", minute, Box::new(|| from_suite(Suite::GeometricPreparation))),
        ("replacer additivity", 3 * minute, Box::new(|| from_suite(Suite::ReplacerAdditivity))),
        ("chain rule", 3 * minute, Box::new(|| from_suite(Suite::ChainRule))),
        ("entropy accumulation", 3 * minute, Box::new(|| from_suite(Suite::EntropyAccumulation))),
        ("classical AEP trend", minute, Box::new(classical_trend)),
        ("quantum AEP trend", 15 * minute, Box::new(quantum_trend)),
        ("finite-n bound", 10 * minute, Box::new(|| from_suite(Suite::FiniteN))),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = outcome.pass && in_time;
        println!(
            "criterion {:2} {name}: {} ({}; time={:.1}s limit={}s{})",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { " exceeded" },
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 14 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
