//! Experiment harness: the phase-transition Monte Carlo on Dirac combs, the
//! structural lemma suites, configuration, and CSV/SVG output.

pub mod config;
pub mod emit;
pub mod lemmas;
pub mod phase;

pub use config::PhaseConfig;
pub use emit::{heatmap_svg, parse_csv, read_grid_csv, records_to_csv, write_grid_csv};
pub use lemmas::{
    lemma3_exhaustive_dft, lemma3_suite, lemma5_suite, lemma7_suite, Lemma3Report, Lemma5Config,
    Lemma5Report, Lemma7Report,
};
pub use phase::{
    crossing_curve, run_phase_experiment, trial_seed, CrossingCurve, CrossingPoint, PhaseGrid,
    TrialRecord,
};
