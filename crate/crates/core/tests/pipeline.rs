use born_psa::harness::{
    compare_with_oracle, figures, median, output, run_experiment, run_sweep, ExperimentConfig,
    Metric, SweepParam,
};
use born_psa::{Generator, WeightMatrix};

fn bundled(id: &str) -> ExperimentConfig {
    let mut c = figures::figure_configs(id, false).unwrap().remove(0);
    c.sweep = None;
    c
}

fn median_conv(cell: &born_psa::harness::ExperimentResult) -> f64 {
    let mut v: Vec<f64> = cell
        .summaries()
        .map(|s| s.convergence_iteration.map_or(f64::INFINITY, |i| i as f64))
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

#[test]
fn a1_precision_improves_with_pf() {
    let c = bundled("fig4");
    let sweep = run_sweep(&c, SweepParam::Pf, &[1.0, 3.0, 5.0]).unwrap();
    let defects: Vec<f64> = sweep
        .cells
        .iter()
        .map(|cell| median(cell.result.summaries().map(|s| s.final_max_defect)).unwrap())
        .collect();
    assert!(defects.windows(2).all(|w| w[1] < w[0]), "{defects:?}");
}

#[test]
fn mho_orthonormality_decreases_in_block_medians() {
    let mut c = bundled("fig5");
    c.repeats = 3;
    let r = run_experiment(&c).unwrap();
    for rep in &r.repeats {
        let series: Vec<f64> = rep
            .trajectory
            .iter()
            .filter_map(|t| t.values.iter().find(|(m, _)| *m == Metric::Orthonormality))
            .map(|(_, v)| *v)
            .collect();
        let blocks: Vec<f64> = series.chunks(10).map(|b| median(b.iter().copied()).unwrap()).collect();
        let first = blocks[0];
        let last = *blocks.last().unwrap();
        assert!(last < first - 10.0, "{first} -> {last}");
        assert!(rep.summary.final_max_defect < 0.05);
    }
}

#[test]
#[ignore = "not reproduced: A2 slows ~10x over lf 1..1/16 while SLA slows ~2x (see CALIBRATION.md)"]
fn sla_is_more_rate_sensitive_than_a2() {
    let lfs = [1.0, 0.25, 0.0625];
    let growth = |id: &str| {
        let mut c = bundled(id);
        c.repeats = 9;
        let s = run_sweep(&c, SweepParam::Lf, &lfs).unwrap();
        let its: Vec<f64> = s.cells.iter().map(|cell| median_conv(&cell.result)).collect();
        assert!(its.windows(2).all(|w| w[1] >= w[0]), "{id}: {its:?}");
        its[2] / its[0]
    };
    let sla = growth("fig15");
    let a2 = growth("fig11");
    assert!(sla > a2, "SLA x{sla} vs A2 x{a2}");
}

#[test]
fn converged_a2_matches_the_oracle_subspace() {
    let mut c = bundled("fig11");
    c.repeats = 1;
    let r = run_experiment(&c).unwrap();
    let w = WeightMatrix::new(r.repeats[0].final_weights.clone()).unwrap();
    let mut g = c.generator.clone();
    g.seed = 77;
    let batch = Generator::new(g).unwrap().batch(20_000);
    let report = compare_with_oracle(&w, &batch).unwrap();
    assert!(report.principal_angle < c.convergence_threshold, "{}", report.principal_angle);
    assert_eq!(report.alignments.shape(), (2, 2));
    assert!(report.eigenvalues[0] >= report.eigenvalues[1]);
}

#[test]
fn csv_files_follow_the_naming_scheme() {
    let mut c = bundled("fig16");
    c.repeats = 2;
    c.iterations = 500;
    c.record_every = 100;
    let sweep = run_sweep(&c, SweepParam::Pf, &[1.0, 5.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = output::write_sweep(dir.path(), &sweep).unwrap();
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "fig16_bach_pf-1_1.csv",
            "fig16_bach_pf-1_3.csv",
            "fig16_bach_pf-5_1.csv",
            "fig16_bach_pf-5_3.csv",
            "fig16_bach_summary.csv"
        ]
    );
    let summary = std::fs::read_to_string(&paths[4]).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.starts_with(output::SUMMARY_HEADER));
    let traj = std::fs::read_to_string(&paths[0]).unwrap();
    // iterations 0..=500 every 100
    assert_eq!(traj.lines().count(), 1 + 6 * c.metrics.len());
}

#[test]
fn every_figure_runs_at_reduced_length() {
    for id in figures::figure_ids() {
        for mut c in figures::figure_configs(id, true).unwrap() {
            c.iterations = 300;
            c.record_every = 100;
            c.repeats = 1;
            c.oracle_samples = c.oracle_samples.min(2000);
            let r = match c.sweep.take() {
                Some(s) => run_experiment(&c.with_param(s.param, s.values[0]).unwrap()),
                None => run_experiment(&c),
            };
            let r = r.unwrap_or_else(|e| panic!("{}: {e}", c.name));
            assert_eq!(r.repeats[0].summary.iterations_run, 300, "{}", c.name);
        }
    }
}
