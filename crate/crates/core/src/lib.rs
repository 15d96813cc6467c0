//! Born-rule probability model, divergence-modulated Hebbian subspace learners,
//! an eigendecomposition oracle, synthetic sources and an experiment harness.

pub mod born;
pub mod datagen;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod learners;
pub mod oracle;

pub use born::{DensityMatrix, ProbabilityValue, SampleVector, WeightMatrix};
pub use datagen::{Generator, GeneratorConfig, SourceKind};
pub use divergence::DivergenceKind;
pub use error::{Error, Result};
pub use learners::{Algorithm, Learner, LearnerConfig, LearnerState, Schedule, StepOutcome};
pub use harness::{run_experiment, run_sweep, ExperimentConfig, Metric, SweepParam};
