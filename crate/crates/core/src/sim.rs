//! Monte Carlo harness: data-generating process, per-replicate data-adaptive
//! truths, model-specification regimes, and bias/MSE/coverage aggregation.
//!
//! The generating mechanism draws, for each subject, a standard-normal
//! covariate W, an exposure A ~ Bernoulli(expit W), and a latent
//! Y0 ~ N(0,1); the observed outcome is Y = A * W * (1 - beta * A-bar) + Y0,
//! so the interference enters linearly through the realized proportion
//! exposed and `beta` sets its strength. Targets are data adaptive: each
//! replicate's truth is a function of its own realized A-bar.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{KnSpec, Sample};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorOptions, Prepared};
use crate::glm::{DesignVar, Link, ModelSpec, Role, Term};
use crate::interventions::{Direction, InterventionSpec};
use crate::linalg::Matrix;
use crate::math::expit;
use crate::rng::Stream;

/// Nuisance-model specification regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Outcome regression and propensity both correctly specified.
    CorrectBoth,
    /// Outcome regression drops the W:A interaction; propensity correct.
    MisQ,
    /// Outcome regression correct; propensity uses a probit link.
    MisG,
}

impl Regime {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "correct_both" => Ok(Regime::CorrectBoth),
            "mis_q" => Ok(Regime::MisQ),
            "mis_g" => Ok(Regime::MisG),
            other => Err(Error::InvalidSpec {
                message: format!("unknown regime '{other}'"),
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::CorrectBoth => "correct_both",
            Regime::MisQ => "mis_q",
            Regime::MisG => "mis_g",
        }
    }
}

/// Which data-adaptive parameter a cell targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Estimand {
    /// All-treat minus all-control at the observed proportion exposed.
    DirectEffect,
    /// Overall effect of assigning the S_n highest-W subjects to exposure.
    OersOverall,
    /// Overall effect of complete randomization at the observed proportion.
    CompleteRandOverall,
}

impl Estimand {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "direct" | "direct_effect" => Ok(Estimand::DirectEffect),
            "oers" | "oers_overall" => Ok(Estimand::OersOverall),
            "complete_rand" | "complete_rand_overall" => Ok(Estimand::CompleteRandOverall),
            other => Err(Error::InvalidSpec {
                message: format!("unknown estimand '{other}'"),
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Estimand::DirectEffect => "direct_effect",
            Estimand::OersOverall => "oers_overall",
            Estimand::CompleteRandOverall => "complete_rand_overall",
        }
    }
}

/// One simulation cell.
#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub beta: f64,
    pub regime: Regime,
    pub estimand: Estimand,
    pub replicates: usize,
    pub seed: u64,
    pub ci_level: f64,
}

/// Monte Carlo summary of one cell.
#[derive(Debug, Clone, Serialize)]
pub struct SimCellResult {
    pub bias: f64,
    pub mse: f64,
    pub coverage: f64,
    pub mc_se_of_coverage: f64,
    pub truth_mean: f64,
    pub truth_sd: f64,
    pub replicate_failures: usize,
    pub degenerate_redraws: usize,
}

/// One draw from the generating mechanism. Returns the sample (single
/// covariate named `w`) and the latent Y0 disturbances. A draw in which all
/// or none are exposed is an error; callers redraw on a fresh substream.
pub fn generate_sample(n: usize, beta: f64, stream: &mut Stream) -> Result<(Sample, Vec<f64>)> {
    let w: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
    let a: Vec<f64> = w
        .iter()
        .map(|&wi| if stream.bernoulli(expit(wi)) { 1.0 } else { 0.0 })
        .collect();
    let y0: Vec<f64> = (0..n).map(|_| stream.normal()).collect();

    let s_n = a.iter().filter(|&&ai| ai == 1.0).count();
    if s_n == 0 || s_n == n {
        return Err(Error::DegenerateExposure {
            all_exposed: s_n == n,
        });
    }
    let a_bar = s_n as f64 / n as f64;
    let effect = 1.0 - beta * a_bar;
    let y: Vec<f64> = (0..n).map(|i| a[i] * w[i] * effect + y0[i]).collect();

    let cov = Matrix::from_rows(w.into_iter().map(|v| vec![v]).collect());
    let sample = Sample::new(cov, vec!["w".to_string()], a, y)?;
    Ok((sample, y0))
}

fn a_bar_of(sample: &Sample) -> f64 {
    let s_n = sample.exposure().iter().filter(|&&a| a == 1.0).count();
    s_n as f64 / sample.n() as f64
}

/// Analytic data-adaptive truth of the direct effect:
/// (1 - beta * A-bar) * W-bar, from Y(1) - Y(0) = W (1 - beta * A-bar).
pub fn true_direct_effect(sample: &Sample, beta: f64) -> f64 {
    let w_bar = sample.covariate_column(0).iter().sum::<f64>() / sample.n() as f64;
    (1.0 - beta * a_bar_of(sample)) * w_bar
}

/// Analytic truth of the overall effect under the scheme exposing the S_n
/// highest-W subjects: (1 - beta * A-bar) * n^-1 * (sum of the top-S_n W).
pub fn true_oers_overall(sample: &Sample, beta: f64) -> f64 {
    let n = sample.n();
    let s_n = sample.exposure().iter().filter(|&&a| a == 1.0).count();
    let w = sample.covariate_column(0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j].partial_cmp(&w[i]).unwrap().then(i.cmp(&j)));
    let top: f64 = order.iter().take(s_n).map(|&i| w[i]).sum();
    (1.0 - beta * a_bar_of(sample)) * top / n as f64
}

/// Analytic truth of the overall effect under complete randomization:
/// A-bar * (1 - beta * A-bar) * W-bar.
pub fn true_complete_rand_overall(sample: &Sample, beta: f64) -> f64 {
    let a_bar = a_bar_of(sample);
    let w_bar = sample.covariate_column(0).iter().sum::<f64>() / sample.n() as f64;
    a_bar * (1.0 - beta * a_bar) * w_bar
}

/// Nuisance-model specifications per regime. The outcome regression is the
/// linear model on the `[0,1]`-rescaled outcome (the rescaling is affine, so
/// the correct form stays exactly correct); the correct form carries the
/// W:A interaction and the mis-specified one drops it. The correct
/// propensity is logistic in W; the mis-specified one swaps in a probit
/// link.
pub fn regime_specs(regime: Regime) -> (ModelSpec, ModelSpec) {
    let w = || DesignVar::Covariate("w".to_string());
    let mut q_terms = vec![
        Term::Intercept,
        Term::Main(w()),
        Term::Main(DesignVar::Exposure),
    ];
    if regime != Regime::MisQ {
        q_terms.push(Term::Interaction(w(), DesignVar::Exposure));
    }
    let q = ModelSpec::new(q_terms, Link::Identity, Role::Outcome).expect("valid q spec");
    let g_link = if regime == Regime::MisG {
        Link::Probit
    } else {
        Link::Logit
    };
    let g = ModelSpec::new(
        vec![Term::Intercept, Term::Main(w())],
        g_link,
        Role::Propensity,
    )
    .expect("valid g spec");
    (q, g)
}

const MAX_REDRAWS: u64 = 1000;

struct ReplicateRow {
    outcomes: Vec<Result<(f64, bool, f64)>>, // (error, covered, truth) per estimand
    redraws: usize,
}

fn run_replicate(
    n: usize,
    beta: f64,
    regime: Regime,
    estimands: &[Estimand],
    seed: u64,
    replicate: u64,
    ci_level: f64,
) -> ReplicateRow {
    let mut redraws = 0usize;
    let mut drawn = None;
    for attempt in 0..MAX_REDRAWS {
        let mut stream = Stream::for_replicate(seed, replicate, attempt);
        match generate_sample(n, beta, &mut stream) {
            Ok(pair) => {
                drawn = Some(pair);
                break;
            }
            Err(_) => redraws += 1,
        }
    }
    let Some((sample, _latents)) = drawn else {
        let err = || -> Result<(f64, bool, f64)> {
            Err(Error::DegenerateExposure { all_exposed: false })
        };
        return ReplicateRow {
            outcomes: estimands.iter().map(|_| err()).collect(),
            redraws,
        };
    };

    let (q_spec, g_spec) = regime_specs(regime);
    let options = EstimatorOptions {
        ci_level,
        ..EstimatorOptions::default()
    };
    let prepared = match Prepared::new(&sample, &KnSpec::Identity, &q_spec, &g_spec, &options) {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return ReplicateRow {
                outcomes: estimands
                    .iter()
                    .map(|_| {
                        Err(Error::InvalidSpec {
                            message: msg.clone(),
                        })
                    })
                    .collect(),
                redraws,
            };
        }
    };

    let outcomes = estimands
        .iter()
        .map(|estimand| -> Result<(f64, bool, f64)> {
            let (estimate, ci, truth) = match estimand {
                Estimand::DirectEffect => {
                    let c = prepared.contrast(
                        &InterventionSpec::AllTreat,
                        &InterventionSpec::AllControl,
                        &options,
                    )?;
                    (c.estimate, c.ci, true_direct_effect(&sample, beta))
                }
                Estimand::OersOverall => {
                    let spec = InterventionSpec::RankTopS {
                        score: "w".to_string(),
                        direction: Direction::Descending,
                    };
                    let r = prepared.tmle(&spec, &options)?;
                    (r.psi, r.ci, true_oers_overall(&sample, beta))
                }
                Estimand::CompleteRandOverall => {
                    let r = prepared.tmle(&InterventionSpec::CompleteRandomization, &options)?;
                    (r.psi, r.ci, true_complete_rand_overall(&sample, beta))
                }
            };
            let covered = ci.0 <= truth && truth <= ci.1;
            Ok((estimate - truth, covered, truth))
        })
        .collect();
    ReplicateRow { outcomes, redraws }
}

/// Runs one (regime, n, beta) cell for several estimands at once, sharing
/// the generated samples and nuisance fits across estimands. Replicates run
/// on the rayon pool; aggregation is a fixed-order reduction over the
/// replicate index, so results are bit-identical at any parallelism degree.
pub fn run_cells(
    n: usize,
    beta: f64,
    regime: Regime,
    estimands: &[Estimand],
    replicates: usize,
    seed: u64,
    ci_level: f64,
) -> Result<Vec<SimCellResult>> {
    if replicates < 1 {
        return Err(Error::InvalidSpec {
            message: "replicates must be at least 1".into(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewRows { n });
    }
    let rows: Vec<ReplicateRow> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| run_replicate(n, beta, regime, estimands, seed, rep, ci_level))
        .collect();

    let cap = ((replicates as f64) * 0.01).ceil() as usize;
    let redraws: usize = rows.iter().map(|r| r.redraws).sum();

    estimands
        .iter()
        .enumerate()
        .map(|(idx, _)| {
            let mut failures = 0usize;
            let mut kept = 0usize;
            let mut sum_err = 0.0;
            let mut sum_sq_err = 0.0;
            let mut covered = 0usize;
            let mut sum_truth = 0.0;
            let mut sum_sq_truth = 0.0;
            for row in &rows {
                match &row.outcomes[idx] {
                    Ok((err, cov, truth)) => {
                        kept += 1;
                        sum_err += err;
                        sum_sq_err += err * err;
                        if *cov {
                            covered += 1;
                        }
                        sum_truth += truth;
                        sum_sq_truth += truth * truth;
                    }
                    Err(_) => failures += 1,
                }
            }
            if failures > cap {
                return Err(Error::TooManyFailures {
                    failures,
                    cap,
                    replicates,
                });
            }
            let r = kept as f64;
            let bias = sum_err / r;
            let mse = sum_sq_err / r;
            let coverage = covered as f64 / r;
            let truth_mean = sum_truth / r;
            let truth_var = if kept > 1 {
                (sum_sq_truth - r * truth_mean * truth_mean) / (r - 1.0)
            } else {
                0.0
            };
            Ok(SimCellResult {
                bias,
                mse,
                coverage,
                mc_se_of_coverage: (coverage * (1.0 - coverage) / r).sqrt(),
                truth_mean,
                truth_sd: truth_var.max(0.0).sqrt(),
                replicate_failures: failures,
                degenerate_redraws: redraws,
            })
        })
        .collect()
}

/// Per-replicate rows (error, covered, truth) for one cell, failures
/// dropped. Mainly for aggregator checks and diagnostics; `run_cell` is the
/// aggregated interface.
pub fn replicate_rows(config: &SimConfig) -> Vec<(f64, bool, f64)> {
    (0..config.replicates as u64)
        .into_par_iter()
        .map(|rep| {
            run_replicate(
                config.n,
                config.beta,
                config.regime,
                &[config.estimand],
                config.seed,
                rep,
                config.ci_level,
            )
            .outcomes
            .remove(0)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Runs a single configured cell.
pub fn run_cell(config: &SimConfig) -> Result<SimCellResult> {
    let mut results = run_cells(
        config.n,
        config.beta,
        config.regime,
        &[config.estimand],
        config.replicates,
        config.seed,
        config.ci_level,
    )?;
    Ok(results.remove(0))
}

/// Derives a per-cell seed so grid cells draw independent streams from one
/// base seed.
pub fn cell_seed(base: u64, regime: Regime, n: usize, beta: f64) -> u64 {
    let r = match regime {
        Regime::CorrectBoth => 1u64,
        Regime::MisQ => 2,
        Regime::MisG => 3,
    };
    let mut s = Stream::for_replicate(base ^ r.wrapping_mul(0x51_7c_c1_b7_27_22_0a_95), n as u64, beta.to_bits());
    s.next_u64()
}
