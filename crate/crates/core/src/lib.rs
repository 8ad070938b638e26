//! Estimation of causal effects for a single group in which every subject's
//! outcome may depend on the proportion of subjects exposed (a shared
//! resource, a crowded clinic, a rationed program).
//!
//! Under that kind of complete interference, only parameters that hold the
//! realized proportion exposed fixed are estimable from one group. This
//! crate estimates them with a targeted maximum likelihood estimator (and an
//! augmented-IPW companion), supports direct effects and overall effects of
//! exposure reallocation schemes, projects per-group effects across groups
//! onto a working marginal structural model, and ships the Monte Carlo
//! harness used to validate frequentist coverage.
//!
//! Modules:
//! - [`data`]: observed-data model, outcome scaling, CSV ingestion.
//! - [`glm`]: dependency-free IRLS fits for the two nuisance functions.
//! - [`interventions`]: hypothetical intervention rules and their marginal
//!   exposure probabilities.
//! - [`estimators`]: TMLE / A-IPW, influence-curve variances, contrasts.
//! - [`msm`]: cross-group weighted-least-squares projection.
//! - [`sim`]: the simulation study harness.

pub mod data;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod interventions;
pub mod linalg;
pub mod math;
pub mod msm;
pub mod rng;
pub mod sim;

pub use data::{
    determine_scale, exposure_summary, load_sample, load_sample_str, scale_outcome,
    write_sample_csv, CsvSchema, ExposureSummary, KnSpec, OutcomeScale, Sample,
};
pub use error::{Error, Result};
pub use estimators::{
    aipw, clever_covariate, direct_effect, fluctuate, overall_effect_contrast, plug_in_mean,
    tmle, variance_conditional, variance_population, wald_ci, ContrastResult, EstimateResult,
    EstimatorOptions, Prepared, WeightDiagnostics,
};
pub use glm::{fit_glm, predict, predict_at_exposure, GlmFit, Link, ModelSpec, Role, Term};
pub use interventions::{
    check_aers, check_ers, marginalize, Direction, InterventionSpec, MarginalIntervention,
};
pub use msm::{
    build_design, coefficient_table, fit_msm, load_group_effects_str, parse_msm_formula,
    CoefficientSummary, GroupEffect, MsmFit, MsmTerm, Weighting,
};
pub use sim::{
    cell_seed, generate_sample, regime_specs, run_cell, run_cells, true_complete_rand_overall,
    true_direct_effect, true_oers_overall, Estimand, Regime, SimCellResult, SimConfig,
};
