//! Targeted maximum likelihood and augmented-IPW estimators of the mean
//! counterfactual outcome under a hypothetical intervention, with
//! influence-curve standard errors and Wald intervals.
//!
//! The estimation pipeline: rescale the outcome to `[0,1]`, fit the outcome
//! regression and propensity score, derive the intervention's marginal
//! treatment probabilities, form the clever covariate
//! H(W,A) = g*(A|W) / g_n(A|W), fluctuate the outcome regression once along
//! the logistic submodel logit Q(eps) = logit Q + eps * H, and plug the
//! updated regression into the identifying sum
//! psi = n^-1 sum_i sum_a Q*(W_i, a) g*(a|W_i), mapped back to the original
//! outcome scale. A-IPW solves the same influence-curve equation directly in
//! the parameter space and therefore skips the fluctuation (and may leave
//! the outcome's range).

use serde::Serialize;

use crate::data::{
    determine_scale, exposure_summary, ExposureSummary, KnSpec, OutcomeScale, Sample,
};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, predict, predict_at_exposure, GlmFit, ModelSpec, Role};
use crate::interventions::{marginalize, InterventionSpec, MarginalIntervention};
use crate::math::{expit, logit, normal_quantile};

/// Knobs shared by every estimator run.
#[derive(Debug, Clone)]
pub struct EstimatorOptions {
    /// Propensity truncation bounds applied to g_n before forming H.
    pub truncation: (f64, f64),
    /// Confidence level for Wald intervals.
    pub ci_level: f64,
    /// Explicit outcome bounds; `None` auto-scales (binary outcomes keep the
    /// unit scale, continuous ones use the observed min/max).
    pub outcome_scale: Option<OutcomeScale>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            truncation: (0.005, 0.995),
            ci_level: 0.95,
            outcome_scale: None,
        }
    }
}

/// Min/max/mean of the clever covariate plus the number of rows whose
/// observed-arm propensity hit the truncation bounds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightDiagnostics {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub truncated_rows: usize,
}

/// A point estimate with influence-curve inference.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    /// Point estimate on the original outcome scale.
    pub psi: f64,
    /// Standard error from the conditional variance sigma^2_Y (squared
    /// influence contributions given the realized covariates and
    /// exposures); this is what the reported interval uses.
    pub se_conditional: f64,
    /// Standard error adding the covariate-sampling component sigma^2_W;
    /// only defined for individual-level interventions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_population: Option<f64>,
    pub ci: (f64, f64),
    /// Fluctuation coefficient (zero for A-IPW).
    pub epsilon: f64,
    pub weights: WeightDiagnostics,
    pub n: usize,
    pub a_bar: f64,
    pub k_value: f64,
    pub intervention: String,
    pub is_ers: bool,
    pub is_aers: bool,
    pub estimator: &'static str,
    /// |n^-1 sum H (y - q*)| on the scaled scale after fluctuation.
    #[serde(skip)]
    pub eic_residual: f64,
    /// False when an A-IPW estimate left the outcome's range.
    #[serde(skip)]
    pub within_bounds: bool,
}

/// A difference of two estimates sharing the same data and nuisance fits.
#[derive(Debug, Clone, Serialize)]
pub struct ContrastResult {
    pub estimate: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub components: (EstimateResult, EstimateResult),
}

/// Wald interval `psi -+ z * se` at the given confidence level.
pub fn wald_ci(psi: f64, se: f64, level: f64) -> Result<(f64, f64)> {
    if !(se >= 0.0) {
        return Err(Error::InvalidSpec {
            message: format!("standard error must be nonnegative, got {se}"),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidSpec {
            message: format!("confidence level must be in (0,1), got {level}"),
        });
    }
    let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    Ok((psi - z * se, psi + z * se))
}

/// Clever covariate at the observed exposures:
/// H_i = g*(A_i|W_i) / clamp(g_n(A_i|W_i), lo, hi).
pub fn clever_covariate(
    marginals: &MarginalIntervention,
    g_fit: &GlmFit,
    sample: &Sample,
    truncation: (f64, f64),
) -> Result<Vec<f64>> {
    if g_fit.spec.role != Role::Propensity {
        return Err(Error::InvalidSpec {
            message: "clever covariate needs a propensity-role fit".into(),
        });
    }
    let g1 = predict(g_fit, sample, None)?;
    let clever = CleverCovariate::build(marginals, &g1, sample.exposure(), truncation);
    Ok(clever.h_obs)
}

/// Clever covariate evaluated at both exposure arms and at the observed one.
struct CleverCovariate {
    h_obs: Vec<f64>,
    h0: Vec<f64>,
    h1: Vec<f64>,
    truncated_rows: usize,
}

impl CleverCovariate {
    fn build(
        marginals: &MarginalIntervention,
        g1: &[f64],
        exposure: &[f64],
        (lo, hi): (f64, f64),
    ) -> Self {
        let n = g1.len();
        let mut h_obs = Vec::with_capacity(n);
        let mut h0 = Vec::with_capacity(n);
        let mut h1 = Vec::with_capacity(n);
        let mut truncated_rows = 0;
        for i in 0..n {
            let g1c = g1[i].clamp(lo, hi);
            let g0c = (1.0 - g1[i]).clamp(lo, hi);
            let p = marginals.probs_treat[i];
            h1.push(p / g1c);
            h0.push((1.0 - p) / g0c);
            if exposure[i] == 1.0 {
                h_obs.push(p / g1c);
                if g1c != g1[i] {
                    truncated_rows += 1;
                }
            } else {
                h_obs.push((1.0 - p) / g0c);
                if g0c != 1.0 - g1[i] {
                    truncated_rows += 1;
                }
            }
        }
        CleverCovariate {
            h_obs,
            h0,
            h1,
            truncated_rows,
        }
    }
}

const Q_CLAMP: f64 = 1e-6;
const FLUCT_MAX_ITER: usize = 100;

#[inline]
fn clamp_unit(q: f64) -> f64 {
    q.clamp(Q_CLAMP, 1.0 - Q_CLAMP)
}

/// One-dimensional logistic fluctuation: minimizes the Bernoulli loss of
/// `y_scaled` against expit(logit q_init + eps * clever) over eps.
///
/// Returns the fitted coefficient and the updated predictions at the
/// observed data. By the first-order condition, sum H (y - q*) = 0 at the
/// optimum.
pub fn fluctuate(
    q_init: &[f64],
    clever: &[f64],
    y_scaled: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = q_init.len();
    if clever.len() != n || y_scaled.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!(
                "fluctuation inputs: q {n}, clever {}, y {}",
                clever.len(),
                y_scaled.len()
            ),
        });
    }
    let offset: Vec<f64> = q_init.iter().map(|&q| logit(clamp_unit(q))).collect();
    let h_norm: f64 = clever.iter().map(|h| h * h).sum();
    if h_norm == 0.0 {
        // Flat loss in eps; take eps = 0.
        let q_star: Vec<f64> = offset.iter().map(|&o| expit(o)).collect();
        return Ok((0.0, q_star));
    }

    let score_tol = 1e-11 * n as f64;
    let loss = |mu: &[f64]| -> f64 {
        mu.iter()
            .zip(y_scaled)
            .map(|(&m, &y)| {
                let m = m.clamp(1e-12, 1.0 - 1e-12);
                -(y * m.ln() + (1.0 - y) * (1.0 - m).ln())
            })
            .sum()
    };

    let mut eps = 0.0f64;
    let mut mu: Vec<f64> = offset.iter().map(|&o| expit(o)).collect();
    let mut cur_loss = loss(&mu);
    let mut trace = String::new();
    for _ in 0..FLUCT_MAX_ITER {
        let score: f64 = clever
            .iter()
            .zip(y_scaled.iter().zip(&mu))
            .map(|(&h, (&y, &m))| h * (y - m))
            .sum();
        if score.abs() <= score_tol {
            return Ok((eps, mu));
        }
        let info: f64 = clever
            .iter()
            .zip(&mu)
            .map(|(&h, &m)| h * h * m * (1.0 - m))
            .sum();
        if info <= 0.0 {
            return Err(Error::NonConvergence {
                what: "fluctuation".into(),
                iterations: FLUCT_MAX_ITER,
                detail: format!(" (flat curvature at eps={eps}, score={score})"),
            });
        }
        let mut step = score / info;
        let mut halved = 0;
        loop {
            let cand_eps = eps + step;
            let cand_mu: Vec<f64> = offset
                .iter()
                .zip(clever)
                .map(|(&o, &h)| expit(o + cand_eps * h))
                .collect();
            let cand_loss = loss(&cand_mu);
            if cand_loss <= cur_loss + 1e-12 || halved >= 40 {
                eps = cand_eps;
                mu = cand_mu;
                cur_loss = cand_loss;
                break;
            }
            step *= 0.5;
            halved += 1;
        }
        trace = format!(" (last eps={eps}, score={score}, step={step})");
        if step.abs() < 1e-13 {
            return Ok((eps, mu));
        }
    }
    Err(Error::NonConvergence {
        what: "fluctuation".into(),
        iterations: FLUCT_MAX_ITER,
        detail: trace,
    })
}

/// Identifying plug-in sum on the scaled scale:
/// n^-1 sum_i [ q1_i p_i + q0_i (1 - p_i) ].
pub fn plug_in_mean(q0: &[f64], q1: &[f64], probs_treat: &[f64]) -> f64 {
    let n = q0.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += q1[i] * probs_treat[i] + q0[i] * (1.0 - probs_treat[i]);
    }
    acc / n as f64
}

/// A-IPW estimating-equation value on whatever scale `y` and the q's share:
/// n^-1 sum_i [ H_i (y_i - q_obs_i) + q1_i p_i + q0_i (1 - p_i) ].
pub fn aipw_value(
    h_obs: &[f64],
    y: &[f64],
    q_obs: &[f64],
    q0: &[f64],
    q1: &[f64],
    probs_treat: &[f64],
) -> f64 {
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += h_obs[i] * (y[i] - q_obs[i])
            + q1[i] * probs_treat[i]
            + q0[i] * (1.0 - probs_treat[i]);
    }
    acc / n as f64
}

/// Conditional (sigma^2_Y) variance: n^-1 sum [H (y - q*)]^2 on the scaled
/// scale, rescaled by the squared outcome width.
pub fn variance_conditional(
    q_star_observed: &[f64],
    clever: &[f64],
    y_scaled: &[f64],
    scale: &OutcomeScale,
) -> f64 {
    let n = y_scaled.len() as f64;
    let ss: f64 = (0..y_scaled.len())
        .map(|i| {
            let d = clever[i] * (y_scaled[i] - q_star_observed[i]);
            d * d
        })
        .sum();
    ss / n * scale.width() * scale.width()
}

/// Covariate-sampling (sigma^2_W) variance:
/// n^-1 sum_i [ sum_a Q*(W_i,a) g*(a|W_i) - psi ]^2, rescaled to the
/// original outcome units. Refused when the intervention's individual-level
/// probabilities depend on other subjects (rank-based schemes and complete
/// randomization), where the population-average theory does not apply.
pub fn variance_population(
    q_star0: &[f64],
    q_star1: &[f64],
    marginals: &MarginalIntervention,
    spec: &InterventionSpec,
    psi_scaled: f64,
    scale: &OutcomeScale,
) -> Result<f64> {
    if !spec.is_individual_level() {
        return Err(Error::PopulationVarianceUnavailable {
            intervention: spec.to_string(),
        });
    }
    let n = q_star0.len() as f64;
    let ss: f64 = (0..q_star0.len())
        .map(|i| {
            let p = marginals.probs_treat[i];
            let m = q_star1[i] * p + q_star0[i] * (1.0 - p);
            let d = m - psi_scaled;
            d * d
        })
        .sum();
    Ok(ss / n * scale.width() * scale.width())
}

/// Nuisance fits and scaled data shared by every estimate on one sample.
pub struct Prepared {
    pub sample: Sample,
    pub scale: OutcomeScale,
    pub summary: ExposureSummary,
    pub q_fit: GlmFit,
    pub g_fit: GlmFit,
    /// Outcome-regression predictions at the observed exposure and at the
    /// two counterfactual arms, on the scaled scale.
    pub q_obs: Vec<f64>,
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    /// Propensity predictions g_n(1|W_i), untruncated.
    pub g1: Vec<f64>,
}

impl Prepared {
    /// Scales the outcome and fits both nuisance models once.
    pub fn new(
        sample: &Sample,
        kn: &KnSpec,
        q_spec: &ModelSpec,
        g_spec: &ModelSpec,
        options: &EstimatorOptions,
    ) -> Result<Prepared> {
        if q_spec.role != Role::Outcome {
            return Err(Error::InvalidSpec {
                message: "q_spec must have the outcome role".into(),
            });
        }
        if g_spec.role != Role::Propensity {
            return Err(Error::InvalidSpec {
                message: "g_spec must have the propensity role".into(),
            });
        }
        let summary = exposure_summary(sample, kn)?;
        let scale = determine_scale(sample.outcome(), options.outcome_scale)?;
        let scaled: Vec<f64> = sample.outcome().iter().map(|&y| scale.scale(y)).collect();
        let sample = sample.with_outcome(scaled);

        let q_fit = fit_glm(&sample, q_spec)?;
        if !q_fit.converged {
            return Err(Error::NonConvergence {
                what: "outcome regression".into(),
                iterations: q_fit.iterations,
                detail: String::new(),
            });
        }
        let g_fit = fit_glm(&sample, g_spec)?;
        if !g_fit.converged {
            return Err(Error::NonConvergence {
                what: "propensity fit".into(),
                iterations: g_fit.iterations,
                detail: String::new(),
            });
        }
        let q_obs = predict(&q_fit, &sample, None)?;
        let q0 = predict_at_exposure(&q_fit, &sample, 0.0)?;
        let q1 = predict_at_exposure(&q_fit, &sample, 1.0)?;
        let g1 = predict(&g_fit, &sample, None)?;
        Ok(Prepared {
            sample,
            scale,
            summary,
            q_fit,
            g_fit,
            q_obs,
            q0,
            q1,
            g1,
        })
    }

    fn marginals(&self, spec: &InterventionSpec) -> Result<MarginalIntervention> {
        marginalize(spec, &self.sample, &self.summary)
    }

    /// Full TMLE for one intervention: fluctuation, plug-in, and variances.
    fn tmle_arm(&self, spec: &InterventionSpec, options: &EstimatorOptions) -> Result<Arm> {
        let marginals = self.marginals(spec)?;
        let clever = CleverCovariate::build(
            &marginals,
            &self.g1,
            self.sample.exposure(),
            options.truncation,
        );
        let y = self.sample.outcome();
        let (epsilon, q_star_obs) = fluctuate(&self.q_obs, &clever.h_obs, y)?;
        let update = |q: &[f64], h: &[f64]| -> Vec<f64> {
            q.iter()
                .zip(h)
                .map(|(&qi, &hi)| expit(logit(clamp_unit(qi)) + epsilon * hi))
                .collect()
        };
        let q_star0 = update(&self.q0, &clever.h0);
        let q_star1 = update(&self.q1, &clever.h1);
        let psi_scaled = plug_in_mean(&q_star0, &q_star1, &marginals.probs_treat);
        let eic_residual = clever
            .h_obs
            .iter()
            .zip(y.iter().zip(&q_star_obs))
            .map(|(&h, (&yi, &qi))| h * (yi - qi))
            .sum::<f64>()
            .abs()
            / self.sample.n() as f64;
        Ok(Arm {
            marginals,
            clever,
            epsilon,
            q_star_obs,
            q_star0,
            q_star1,
            psi_scaled,
            eic_residual,
        })
    }

    /// TMLE estimate with inference attached.
    pub fn tmle(
        &self,
        spec: &InterventionSpec,
        options: &EstimatorOptions,
    ) -> Result<EstimateResult> {
        let arm = self.tmle_arm(spec, options)?;
        let y = self.sample.outcome();
        let var_y = variance_conditional(&arm.q_star_obs, &arm.clever.h_obs, y, &self.scale);
        let se_conditional = (var_y / self.sample.n() as f64).sqrt();
        let se_population = if spec.is_individual_level() {
            let var_w = variance_population(
                &arm.q_star0,
                &arm.q_star1,
                &arm.marginals,
                spec,
                arm.psi_scaled,
                &self.scale,
            )?;
            Some(((var_y + var_w) / self.sample.n() as f64).sqrt())
        } else {
            None
        };
        let psi = self.scale.unscale(arm.psi_scaled);
        let ci = wald_ci(psi, se_conditional, options.ci_level)?;
        Ok(EstimateResult {
            psi,
            se_conditional,
            se_population,
            ci,
            epsilon: arm.epsilon,
            weights: arm.weight_diag(),
            n: self.sample.n(),
            a_bar: self.summary.a_bar,
            k_value: self.summary.k_value,
            intervention: spec.to_string(),
            is_ers: arm.marginals.is_ers,
            is_aers: arm.marginals.is_aers,
            estimator: "tmle",
            eic_residual: arm.eic_residual,
            within_bounds: true,
        })
    }

    /// A-IPW estimate: the estimating-equation value with the initial
    /// (unfluctuated) outcome regression.
    pub fn aipw(
        &self,
        spec: &InterventionSpec,
        options: &EstimatorOptions,
    ) -> Result<EstimateResult> {
        let marginals = self.marginals(spec)?;
        let clever = CleverCovariate::build(
            &marginals,
            &self.g1,
            self.sample.exposure(),
            options.truncation,
        );
        let y = self.sample.outcome();
        let psi_scaled = aipw_value(
            &clever.h_obs,
            y,
            &self.q_obs,
            &self.q0,
            &self.q1,
            &marginals.probs_treat,
        );
        let var_y = variance_conditional(&self.q_obs, &clever.h_obs, y, &self.scale);
        let se_conditional = (var_y / self.sample.n() as f64).sqrt();
        let se_population = if spec.is_individual_level() {
            let var_w = variance_population(
                &self.q0,
                &self.q1,
                &marginals,
                spec,
                plug_in_mean(&self.q0, &self.q1, &marginals.probs_treat),
                &self.scale,
            )?;
            Some(((var_y + var_w) / self.sample.n() as f64).sqrt())
        } else {
            None
        };
        let psi = self.scale.unscale(psi_scaled);
        let ci = wald_ci(psi, se_conditional, options.ci_level)?;
        let eic_residual = clever
            .h_obs
            .iter()
            .zip(y.iter().zip(&self.q_obs))
            .map(|(&h, (&yi, &qi))| h * (yi - qi))
            .sum::<f64>()
            .abs()
            / self.sample.n() as f64;
        let weights = WeightDiagnostics {
            min: clever.h_obs.iter().cloned().fold(f64::INFINITY, f64::min),
            max: clever.h_obs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: clever.h_obs.iter().sum::<f64>() / self.sample.n() as f64,
            truncated_rows: clever.truncated_rows,
        };
        Ok(EstimateResult {
            psi,
            se_conditional,
            se_population,
            ci,
            epsilon: 0.0,
            weights,
            n: self.sample.n(),
            a_bar: self.summary.a_bar,
            k_value: self.summary.k_value,
            intervention: spec.to_string(),
            is_ers: marginals.is_ers,
            is_aers: marginals.is_aers,
            estimator: "aipw",
            eic_residual,
            within_bounds: psi >= self.scale.lower && psi <= self.scale.upper,
        })
    }

    /// Difference of two TMLE runs sharing these nuisance fits; each arm is
    /// fluctuated separately and the contrast variance comes from the
    /// per-subject difference of influence contributions.
    pub fn contrast(
        &self,
        spec_a: &InterventionSpec,
        spec_b: &InterventionSpec,
        options: &EstimatorOptions,
    ) -> Result<ContrastResult> {
        let arm_a = self.tmle_arm(spec_a, options)?;
        let arm_b = self.tmle_arm(spec_b, options)?;
        let y = self.sample.outcome();
        let n = self.sample.n();
        let mut ss = 0.0;
        for i in 0..n {
            let da = arm_a.clever.h_obs[i] * (y[i] - arm_a.q_star_obs[i]);
            let db = arm_b.clever.h_obs[i] * (y[i] - arm_b.q_star_obs[i]);
            let d = da - db;
            ss += d * d;
        }
        let var = ss / n as f64 * self.scale.width() * self.scale.width();
        let se = (var / n as f64).sqrt();

        let res_a = self.finish_arm(arm_a, spec_a, options)?;
        let res_b = self.finish_arm(arm_b, spec_b, options)?;
        let estimate = res_a.psi - res_b.psi;
        let ci = wald_ci(estimate, se, options.ci_level)?;
        Ok(ContrastResult {
            estimate,
            se,
            ci,
            components: (res_a, res_b),
        })
    }

    fn finish_arm(
        &self,
        arm: Arm,
        spec: &InterventionSpec,
        options: &EstimatorOptions,
    ) -> Result<EstimateResult> {
        let y = self.sample.outcome();
        let var_y = variance_conditional(&arm.q_star_obs, &arm.clever.h_obs, y, &self.scale);
        let se_conditional = (var_y / self.sample.n() as f64).sqrt();
        let se_population = if spec.is_individual_level() {
            let var_w = variance_population(
                &arm.q_star0,
                &arm.q_star1,
                &arm.marginals,
                spec,
                arm.psi_scaled,
                &self.scale,
            )?;
            Some(((var_y + var_w) / self.sample.n() as f64).sqrt())
        } else {
            None
        };
        let psi = self.scale.unscale(arm.psi_scaled);
        let ci = wald_ci(psi, se_conditional, options.ci_level)?;
        Ok(EstimateResult {
            psi,
            se_conditional,
            se_population,
            ci,
            epsilon: arm.epsilon,
            weights: arm.weight_diag(),
            n: self.sample.n(),
            a_bar: self.summary.a_bar,
            k_value: self.summary.k_value,
            intervention: spec.to_string(),
            is_ers: arm.marginals.is_ers,
            is_aers: arm.marginals.is_aers,
            estimator: "tmle",
            eic_residual: arm.eic_residual,
            within_bounds: true,
        })
    }
}

struct Arm {
    marginals: MarginalIntervention,
    clever: CleverCovariate,
    epsilon: f64,
    q_star_obs: Vec<f64>,
    q_star0: Vec<f64>,
    q_star1: Vec<f64>,
    psi_scaled: f64,
    eic_residual: f64,
}

impl Arm {
    fn weight_diag(&self) -> WeightDiagnostics {
        let h = &self.clever.h_obs;
        WeightDiagnostics {
            min: h.iter().cloned().fold(f64::INFINITY, f64::min),
            max: h.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: h.iter().sum::<f64>() / h.len() as f64,
            truncated_rows: self.clever.truncated_rows,
        }
    }
}

/// Targeted maximum likelihood estimate of psi under `spec`.
pub fn tmle(
    sample: &Sample,
    kn: &KnSpec,
    spec: &InterventionSpec,
    q_spec: &ModelSpec,
    g_spec: &ModelSpec,
    options: &EstimatorOptions,
) -> Result<EstimateResult> {
    Prepared::new(sample, kn, q_spec, g_spec, options)?.tmle(spec, options)
}

/// Augmented-IPW estimate of psi under `spec`.
pub fn aipw(
    sample: &Sample,
    kn: &KnSpec,
    spec: &InterventionSpec,
    q_spec: &ModelSpec,
    g_spec: &ModelSpec,
    options: &EstimatorOptions,
) -> Result<EstimateResult> {
    Prepared::new(sample, kn, q_spec, g_spec, options)?.aipw(spec, options)
}

/// Direct effect: TMLE contrast of all-treat versus all-control at the
/// observed proportion exposed, sharing one set of nuisance fits.
pub fn direct_effect(
    sample: &Sample,
    kn: &KnSpec,
    q_spec: &ModelSpec,
    g_spec: &ModelSpec,
    options: &EstimatorOptions,
) -> Result<ContrastResult> {
    Prepared::new(sample, kn, q_spec, g_spec, options)?.contrast(
        &InterventionSpec::AllTreat,
        &InterventionSpec::AllControl,
        options,
    )
}

/// Overall-effect contrast of two interventions. Callers should heed the
/// `is_aers` flags on the components: when an intervention is not even an
/// approximate exposure reallocation scheme the overall-effect reading does
/// not attach, though the data-adaptive parameter is still estimated.
pub fn overall_effect_contrast(
    sample: &Sample,
    kn: &KnSpec,
    spec_a: &InterventionSpec,
    spec_b: &InterventionSpec,
    q_spec: &ModelSpec,
    g_spec: &ModelSpec,
    options: &EstimatorOptions,
) -> Result<ContrastResult> {
    Prepared::new(sample, kn, q_spec, g_spec, options)?.contrast(spec_a, spec_b, options)
}
