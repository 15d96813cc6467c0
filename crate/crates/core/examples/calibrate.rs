//! Rate calibration: runs a config at several initial rates (and optionally
//! several pf values) and prints per-cell medians.
//!
//! cargo run --release -p born-psa --example calibrate -- <config.toml> \
//!     [--gammas g1,g2,..] [--pf p1,p2,..] [--repeats r] [--iterations n]
//!
//! With `--scan` the rate is raised by 25% steps from the config value until
//! some repeat diverges or ends with max|I - WᵀW| > 0.5; 85% of that rate is
//! reported as the calibrated value.

use std::env;
use std::process::ExitCode;

use born_psa::harness::{median, run_experiment, ExperimentConfig, ExperimentResult, Metric};

fn list(v: &str) -> Vec<f64> {
    v.split(',').map(|s| s.trim().parse().expect("number")).collect()
}

fn unstable(r: &ExperimentResult) -> bool {
    r.summaries().any(|s| s.diverged() || !(s.final_max_defect < 0.5))
}

fn report(label: &str, r: &ExperimentResult) {
    let s: Vec<_> = r.summaries().collect();
    let med = |f: &dyn Fn(&born_psa::harness::RepeatSummary) -> Option<f64>| {
        median(s.iter().filter_map(|x| f(x)))
            .map(|v| format!("{v:.4e}"))
            .unwrap_or_else(|| "-".into())
    };
    let converged = s.iter().filter(|x| x.convergence_iteration.is_some()).count();
    let aligned = s.iter().filter(|x| x.alignment_iteration.is_some()).count();
    let final_aligned = s
        .iter()
        .filter(|x| x.final_metrics.get(&Metric::Alignment).is_some_and(|a| *a > r.config.alignment_threshold))
        .count();
    let final_converged = s
        .iter()
        .filter(|x| x.final_metrics.get(&Metric::PrincipalAngle).is_some_and(|a| *a < r.config.convergence_threshold))
        .count();
    println!(
        "{label:<24} diverged {}/{} defect {} angle {} align {} conv_it {} ({converged}) align_it {} ({aligned}) ortho_it {} final_conv {final_converged} final_aligned {final_aligned}",
        s.iter().filter(|x| x.diverged()).count(),
        s.len(),
        med(&|x| Some(x.final_max_defect)),
        med(&|x| x.final_metrics.get(&Metric::PrincipalAngle).copied()),
        med(&|x| x.final_metrics.get(&Metric::Alignment).copied()),
        med(&|x| x.convergence_iteration.map(|i| i as f64)),
        med(&|x| x.alignment_iteration.map(|i| i as f64)),
        med(&|x| x.orthonormal_iteration.map(|i| i as f64)),
    );
}

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    let Some(path) = args.first() else {
        eprintln!("usage: calibrate <config.toml> [--gammas ..] [--pf ..] [--repeats r] [--iterations n] [--scan]");
        return ExitCode::from(1);
    };
    let mut base = match ExperimentConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    base.sweep = None;
    let mut gammas = vec![base.learner.gamma0];
    let mut pfs = vec![base.generator.pf];
    let mut scan = false;
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--gammas" => gammas = list(&args[i + 1]),
            "--pf" => pfs = list(&args[i + 1]),
            "--repeats" => base.repeats = args[i + 1].parse().expect("repeats"),
            "--iterations" => {
                base.iterations = args[i + 1].parse().expect("iterations");
                base.record_every = base.record_every.min(base.iterations);
            }
            "--scan" => {
                scan = true;
                i += 1;
                continue;
            }
            other => panic!("unknown flag {other}"),
        }
        i += 2;
    }

    if scan {
        let mut g = base.learner.gamma0;
        for _ in 0..40 {
            let mut c = base.clone();
            c.learner.gamma0 = g;
            let r = run_experiment(&c).expect("run");
            report(&format!("gamma={g:.5}"), &r);
            if unstable(&r) {
                println!("unstable at {g:.5}; calibrated rate {:.5}", 0.85 * g);
                return ExitCode::SUCCESS;
            }
            g *= 1.25;
        }
        println!("no instability found up to {g:.5}");
        return ExitCode::SUCCESS;
    }

    for &pf in &pfs {
        for &g in &gammas {
            let mut c = base.clone();
            c.learner.gamma0 = g;
            c.generator.pf = pf;
            match run_experiment(&c) {
                Ok(r) => report(&format!("pf={pf} gamma={g}"), &r),
                Err(e) => println!("pf={pf} gamma={g}: {e}"),
            }
        }
    }
    ExitCode::SUCCESS
}
