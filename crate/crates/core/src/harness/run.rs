use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::born::{subspace_entropy_raw, SampleVector, WeightMatrix};
use crate::datagen::{init_weights, Generator};
use crate::error::{Error, Result};
use crate::learners::{js1m_term, Learner};
use crate::oracle::{
    eig_sym, max_orthonormality_defect, orthonormality_error, principal_angle, sample_covariance,
    DEFAULT_EIG_TOL,
};

use super::config::{ExperimentConfig, Metric, SweepParam};

/// Metric values recorded at one iteration of one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub iteration: u64,
    pub seed: u64,
    pub values: Vec<(Metric, f64)>,
}

/// Outcome of one seeded repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatSummary {
    pub seed: u64,
    pub iterations_run: u64,
    pub diverged_at: Option<u64>,
    pub skipped: u64,
    /// First recorded iteration with principal angle below the threshold.
    pub convergence_iteration: Option<u64>,
    /// First recorded iteration with alignment above the threshold.
    pub alignment_iteration: Option<u64>,
    /// First recorded iteration with max `|I - WᵀW|` below the threshold.
    pub orthonormal_iteration: Option<u64>,
    pub final_max_defect: f64,
    pub final_metrics: BTreeMap<Metric, f64>,
}

impl RepeatSummary {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub trajectory: Vec<TrajectoryRecord>,
    pub summary: RepeatSummary,
    pub final_weights: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub oracle: Option<OracleSubspace>,
    pub repeats: Vec<RepeatResult>,
}

impl ExperimentResult {
    pub fn any_diverged(&self) -> bool {
        self.repeats.iter().any(|r| r.summary.diverged())
    }

    pub fn summaries(&self) -> impl Iterator<Item = &RepeatSummary> {
        self.repeats.iter().map(|r| &r.summary)
    }
}

/// Top-N eigenpairs of the oracle batch covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSubspace {
    pub eigenvalues: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl OracleSubspace {
    pub fn from_samples(samples: &[SampleVector], n: usize) -> Result<Self> {
        let eig = eig_sym(&sample_covariance(samples)?, DEFAULT_EIG_TOL)?;
        Ok(Self {
            basis: eig.top(n),
            eigenvalues: eig.eigenvalues,
        })
    }
}

/// Ground-truth comparison of a weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub principal_angle: f64,
    pub orthonormality: f64,
    /// `|wₙᵀuₘ|` with `n` over columns of `W` and `m` over the top-N eigenvectors.
    pub alignments: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
}

/// Compares `W` against the top-N eigenvectors of the batch covariance.
pub fn compare_with_oracle(w: &WeightMatrix, samples: &[SampleVector]) -> Result<OracleReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("oracle batch is empty".into()));
    }
    let oracle = OracleSubspace::from_samples(samples, w.n())?;
    Ok(OracleReport {
        principal_angle: principal_angle(w.matrix(), &oracle.basis)?,
        orthonormality: orthonormality_error(w.matrix()),
        alignments: w.matrix().tr_mul(&oracle.basis).abs(),
        eigenvalues: oracle.eigenvalues,
    })
}

/// Worst cosine between a column of `W` and its partner eigenvector, maximized over
/// one-to-one matchings. Columns are normalized; a zero column scores 0.
pub fn matched_alignment(w: &DMatrix<f64>, basis: &DMatrix<f64>) -> f64 {
    let n = w.ncols();
    let mut a = DMatrix::zeros(n, basis.ncols());
    for (i, col) in w.column_iter().enumerate() {
        let norm = col.norm();
        if norm > 0.0 {
            for (j, u) in basis.column_iter().enumerate() {
                a[(i, j)] = (col.dot(&u) / norm).abs();
            }
        }
    }
    if n <= 8 {
        let mut perm: Vec<usize> = (0..basis.ncols()).collect();
        let mut best = 0.0f64;
        permute(&mut perm, 0, n, &mut |p| {
            let worst = (0..n).map(|i| a[(i, p[i])]).fold(f64::INFINITY, f64::min);
            best = best.max(worst);
        });
        best
    } else {
        let mut used = vec![false; basis.ncols()];
        let mut worst = f64::INFINITY;
        for i in 0..n {
            let (j, v) = (0..basis.ncols())
                .filter(|&j| !used[j])
                .map(|j| (j, a[(i, j)]))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            used[j] = true;
            worst = worst.min(v);
        }
        worst
    }
}

// visits every ordered choice of `k` distinct entries in the prefix of `p`
fn permute(p: &mut [usize], i: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    if i == k {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, k, f);
        p.swap(i, j);
    }
}

struct Evaluator<'a> {
    metrics: &'a [Metric],
    oracle: Option<&'a OracleSubspace>,
    eval: &'a [SampleVector],
}

impl Evaluator<'_> {
    fn evaluate(&self, w: &DMatrix<f64>) -> Vec<(Metric, f64)> {
        self.metrics.iter().map(|&m| (m, self.metric(m, w))).collect()
    }

    fn metric(&self, m: Metric, w: &DMatrix<f64>) -> f64 {
        match m {
            Metric::Orthonormality => orthonormality_error(w),
            Metric::PrincipalAngle => self
                .oracle
                .and_then(|o| principal_angle(w, &o.basis).ok())
                .unwrap_or(f64::NAN),
            Metric::Alignment => self
                .oracle
                .map(|o| matched_alignment(w, &o.basis))
                .unwrap_or(f64::NAN),
            Metric::Js1mCost => {
                self.eval.iter().map(|x| js1m_term(w, x)).sum::<f64>() / self.eval.len() as f64
            }
            Metric::SubspaceEntropy => {
                let mut wn = w.clone();
                for mut c in wn.column_iter_mut() {
                    let norm = c.norm();
                    if norm > 0.0 {
                        c /= norm;
                    }
                }
                let live: Vec<_> = self.eval.iter().filter(|x| x.energy() > 0.0).collect();
                live.iter()
                    .map(|x| subspace_entropy_raw(&wn, x, 1.0 / x.energy()))
                    .sum::<f64>()
                    / live.len().max(1) as f64
            }
        }
    }
}

fn first_hit(
    trajectory: &[TrajectoryRecord],
    metric: Metric,
    hit: impl Fn(f64) -> bool,
) -> Option<u64> {
    trajectory.iter().find_map(|r| {
        r.values
            .iter()
            .find(|(m, v)| *m == metric && hit(*v))
            .map(|_| r.iteration)
    })
}

fn run_repeat(
    config: &ExperimentConfig,
    repeat: usize,
    evaluator: &Evaluator<'_>,
) -> Result<RepeatResult> {
    let seed = config.repeat_seed(repeat);
    let mut gen_cfg = config.generator.clone();
    gen_cfg.seed = seed;
    let mut source = Generator::new(gen_cfg)?;
    let learner_cfg = config.effective_learner();
    let w0 = init_weights(learner_cfg.k, learner_cfg.n, seed.wrapping_add(1))?;
    let mut learner = Learner::new(learner_cfg, w0)?;

    let mut trajectory = Vec::new();
    let mut record = |it: u64, w: &DMatrix<f64>| {
        trajectory.push(TrajectoryRecord {
            iteration: it,
            seed,
            values: evaluator.evaluate(w),
        })
    };
    record(0, learner.weights());

    let mut diverged_at = None;
    for it in 1..=config.iterations {
        let x = source.next_sample();
        match learner.step(&x) {
            Ok(_) => {}
            Err(Error::LearnerDiverged { iteration }) => {
                diverged_at = Some(iteration);
                break;
            }
            Err(e) => return Err(e),
        }
        if it % config.record_every == 0 || it == config.iterations {
            record(it, learner.weights());
        }
    }

    let w = learner.weights().clone();
    let final_metrics = trajectory
        .last()
        .map(|r| r.values.iter().cloned().collect())
        .unwrap_or_default();
    let summary = RepeatSummary {
        seed,
        iterations_run: learner.state().iteration(),
        diverged_at,
        skipped: learner.state().skipped(),
        convergence_iteration: first_hit(&trajectory, Metric::PrincipalAngle, |v| {
            v < config.convergence_threshold
        }),
        alignment_iteration: first_hit(&trajectory, Metric::Alignment, |v| {
            v > config.alignment_threshold
        }),
        orthonormal_iteration: first_hit(&trajectory, Metric::Orthonormality, |v| {
            v.exp() < config.defect_threshold
        }),
        final_max_defect: max_orthonormality_defect(&w),
        final_metrics,
    };
    Ok(RepeatResult {
        trajectory,
        summary,
        final_weights: w,
    })
}

/// The shared oracle subspace and evaluation batch for a config.
pub fn oracle_batches(config: &ExperimentConfig) -> Result<(Option<OracleSubspace>, Vec<SampleVector>)> {
    let mut gen_cfg = config.generator.clone();
    gen_cfg.seed = config.oracle_seed();
    let mut source = Generator::new(gen_cfg)?;
    let need_eval = config
        .metrics
        .iter()
        .any(|m| matches!(m, Metric::Js1mCost | Metric::SubspaceEntropy));
    let eval_len = if need_eval { config.eval_samples } else { 0 };
    if config.needs_oracle() {
        let batch = source.batch(config.oracle_samples.max(eval_len));
        let oracle = OracleSubspace::from_samples(&batch[..config.oracle_samples], config.learner.n)?;
        Ok((Some(oracle), batch[..eval_len].to_vec()))
    } else {
        Ok((None, source.batch(eval_len)))
    }
}

/// Runs every repeat of `config` (in parallel on the current rayon pool).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (oracle, eval) = oracle_batches(config)?;
    let evaluator = Evaluator {
        metrics: &config.metrics,
        oracle: oracle.as_ref(),
        eval: &eval,
    };
    let repeats = (0..config.repeats)
        .into_par_iter()
        .map(|r| run_repeat(config, r, &evaluator))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: config.clone(),
        oracle,
        repeats,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub name: String,
    pub param: SweepParam,
    pub cells: Vec<SweepCell>,
}

/// Name used for the files of one sweep cell.
pub fn cell_name(base: &str, param: SweepParam, value: f64) -> String {
    format!("{base}_{param}-{value}")
}

/// Runs `base` once per value of `param`; cells run in parallel, results keep value order.
pub fn run_sweep(base: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<SweepResult> {
    let configs = values
        .iter()
        .map(|&v| {
            let mut c = base.with_param(param, v)?;
            c.name = cell_name(&base.name, param, v);
            Ok((v, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let cells = configs
        .into_par_iter()
        .map(|(value, c)| run_experiment(&c).map(|result| SweepCell { value, result }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        name: base.name.clone(),
        param,
        cells,
    })
}

/// Median of the finite values, `None` if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
