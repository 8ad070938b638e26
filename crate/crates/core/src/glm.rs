//! From-scratch generalized linear models for the two nuisance functions:
//! the outcome regression and the propensity score.
//!
//! Fitting is iteratively reweighted least squares started at zero
//! coefficients with step-halving on deviance increases. Logit and identity
//! are canonical; probit runs the same loop with Fisher-scoring weights
//! built from the exact Bernoulli likelihood (phi/Phi terms). Fractional
//! responses in `[0,1]` are accepted for the Bernoulli links, which is what
//! the rescaled-outcome regression needs.

use serde::Serialize;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::linalg::{qr_least_squares, Matrix};
use crate::math::{expit, normal_cdf, normal_pdf};

/// Mean-model link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Link {
    Logit,
    Probit,
    Identity,
}

/// Which nuisance function a model estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    /// Outcome regression; the response is the (scaled) outcome.
    Outcome,
    /// Exposure-assignment mechanism; the response is the exposure and the
    /// design may not reference the exposure.
    Propensity,
}

/// A variable a design term may reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum DesignVar {
    Covariate(String),
    Exposure,
}

/// One column of the design matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Term {
    Intercept,
    Main(DesignVar),
    Interaction(DesignVar, DesignVar),
}

impl Term {
    /// Human-readable label, used in rank-deficiency errors.
    pub fn label(&self, exposure_name: &str) -> String {
        let var = |v: &DesignVar| match v {
            DesignVar::Covariate(c) => c.clone(),
            DesignVar::Exposure => exposure_name.to_string(),
        };
        match self {
            Term::Intercept => "1".to_string(),
            Term::Main(v) => var(v),
            Term::Interaction(a, b) => format!("{}:{}", var(a), var(b)),
        }
    }
}

/// Parsed model specification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub terms: Vec<Term>,
    pub link: Link,
    pub role: Role,
}

impl ModelSpec {
    pub fn new(terms: Vec<Term>, link: Link, role: Role) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidSpec {
                message: "model needs at least one design term".into(),
            });
        }
        if role == Role::Propensity {
            let uses_exposure = terms.iter().any(|t| match t {
                Term::Intercept => false,
                Term::Main(v) => *v == DesignVar::Exposure,
                Term::Interaction(a, b) => {
                    *a == DesignVar::Exposure || *b == DesignVar::Exposure
                }
            });
            if uses_exposure {
                return Err(Error::InvalidSpec {
                    message: "propensity model may not reference the exposure as a regressor"
                        .into(),
                });
            }
        }
        Ok(ModelSpec { terms, link, role })
    }

    /// Parses a formula such as `"y ~ 1 + w1 + a + w1:a"` or
    /// `"a ~ 1 + w1 [probit]"`. The response name decides the role:
    /// `outcome_name` gives an outcome regression, `exposure_name` a
    /// propensity model. The default link is logit.
    pub fn parse(formula: &str, exposure_name: &str, outcome_name: &str) -> Result<Self> {
        let bad = |message: String| Error::InvalidSpec { message };
        let (lhs, rhs) = formula
            .split_once('~')
            .ok_or_else(|| bad(format!("formula '{formula}' is missing '~'")))?;
        let lhs = lhs.trim();
        let role = if lhs == outcome_name {
            Role::Outcome
        } else if lhs == exposure_name {
            Role::Propensity
        } else {
            return Err(bad(format!(
                "formula response '{lhs}' is neither the outcome '{outcome_name}' nor the exposure '{exposure_name}'"
            )));
        };

        let mut rhs = rhs.trim().to_string();
        let mut link = Link::Logit;
        if let Some(open) = rhs.find('[') {
            let close = rhs
                .rfind(']')
                .ok_or_else(|| bad(format!("unterminated link tag in '{formula}'")))?;
            let tag = rhs[open + 1..close].trim().to_lowercase();
            link = match tag.as_str() {
                "logit" => Link::Logit,
                "probit" => Link::Probit,
                "identity" => Link::Identity,
                other => return Err(bad(format!("unknown link '{other}'"))),
            };
            rhs.truncate(open);
        }

        let mut terms = Vec::new();
        for raw in rhs.split('+') {
            let t = raw.trim();
            if t.is_empty() {
                return Err(bad(format!("empty term in formula '{formula}'")));
            }
            let var = |name: &str| -> Result<DesignVar> {
                if name == exposure_name {
                    Ok(DesignVar::Exposure)
                } else if name == outcome_name {
                    Err(bad(format!("outcome '{name}' cannot appear as a regressor")))
                } else {
                    Ok(DesignVar::Covariate(name.to_string()))
                }
            };
            if t == "1" {
                terms.push(Term::Intercept);
            } else if let Some((a, b)) = t.split_once(':') {
                terms.push(Term::Interaction(var(a.trim())?, var(b.trim())?));
            } else {
                terms.push(Term::Main(var(t)?));
            }
        }
        ModelSpec::new(terms, link, role)
    }

    /// Renders the spec back into formula notation.
    pub fn formula(&self, exposure_name: &str, outcome_name: &str) -> String {
        let lhs = match self.role {
            Role::Outcome => outcome_name,
            Role::Propensity => exposure_name,
        };
        let rhs: Vec<String> = self.terms.iter().map(|t| t.label(exposure_name)).collect();
        let tag = match self.link {
            Link::Logit => "",
            Link::Probit => " [probit]",
            Link::Identity => " [identity]",
        };
        format!("{lhs} ~ {}{tag}", rhs.join(" + "))
    }
}

/// A fitted GLM.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub spec: ModelSpec,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Minus twice the Bernoulli log-likelihood (logit/probit) or the
    /// residual sum of squares (identity).
    pub deviance: f64,
}

const MAX_ITER: usize = 100;
const COEF_TOL: f64 = 1e-10;
const SCORE_TOL: f64 = 1e-10;
const WEIGHT_FLOOR: f64 = 1e-10;
const MU_GUARD: f64 = 1e-12;

/// Builds the design matrix for `spec.terms` over a sample, with the
/// exposure column taken from `exposure` (usually the observed vector, or a
/// counterfactual all-0/all-1 vector for outcome predictions).
fn build_design(sample: &Sample, terms: &[Term], exposure: &[f64]) -> Result<Matrix> {
    let n = sample.n();
    if exposure.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!("exposure has {} entries for {n} rows", exposure.len()),
        });
    }
    let col_of = |v: &DesignVar| -> Result<Option<usize>> {
        match v {
            DesignVar::Exposure => Ok(None),
            DesignVar::Covariate(name) => sample
                .covariate_index(name)
                .map(Some)
                .ok_or_else(|| Error::MissingColumn { name: name.clone() }),
        }
    };
    let mut design = Matrix::zeros(n, terms.len());
    for (j, term) in terms.iter().enumerate() {
        match term {
            Term::Intercept => {
                for i in 0..n {
                    design.set(i, j, 1.0);
                }
            }
            Term::Main(v) => {
                let idx = col_of(v)?;
                for i in 0..n {
                    let val = match idx {
                        Some(c) => sample.covariates().get(i, c),
                        None => exposure[i],
                    };
                    design.set(i, j, val);
                }
            }
            Term::Interaction(a, b) => {
                let ia = col_of(a)?;
                let ib = col_of(b)?;
                for i in 0..n {
                    let va = match ia {
                        Some(c) => sample.covariates().get(i, c),
                        None => exposure[i],
                    };
                    let vb = match ib {
                        Some(c) => sample.covariates().get(i, c),
                        None => exposure[i],
                    };
                    design.set(i, j, va * vb);
                }
            }
        }
    }
    Ok(design)
}

fn link_inverse(link: Link, eta: f64) -> f64 {
    match link {
        Link::Logit => expit(eta),
        Link::Probit => normal_cdf(eta),
        Link::Identity => eta,
    }
}

fn bernoulli_deviance(y: &[f64], mu: &[f64]) -> f64 {
    let mut dev = 0.0;
    for (&yi, &mui) in y.iter().zip(mu) {
        let m = mui.clamp(1e-15, 1.0 - 1e-15);
        dev -= 2.0 * (yi * m.ln() + (1.0 - yi) * (1.0 - m).ln());
    }
    dev
}

/// Maximum-likelihood fit of `spec` on `sample`.
///
/// The response is the (scaled) outcome for [`Role::Outcome`] and the
/// exposure for [`Role::Propensity`]. Logit/probit responses must lie in
/// `[0,1]`. Rank-deficient designs and complete separation are errors; hitting
/// the iteration cap returns the fit with `converged = false`.
pub fn fit_glm(sample: &Sample, spec: &ModelSpec) -> Result<GlmFit> {
    let response: Vec<f64> = match spec.role {
        Role::Outcome => sample.outcome().to_vec(),
        Role::Propensity => sample.exposure().to_vec(),
    };
    if matches!(spec.link, Link::Logit | Link::Probit) {
        if let Some((i, &v)) = response
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidSpec {
                message: format!(
                    "response value {v} at row {} is outside [0,1]; {:?}-link fits need a scaled outcome",
                    i + 1,
                    spec.link
                ),
            });
        }
    }
    let design = build_design(sample, &spec.terms, sample.exposure())?;
    fit_design(spec, &design, &response, sample.exposure_name())
}

fn map_rank_error(err: Error, spec: &ModelSpec, exposure_name: &str) -> Error {
    match err {
        Error::RankDeficient { column } => {
            let idx: usize = column.parse().unwrap_or(0);
            Error::RankDeficient {
                column: spec
                    .terms
                    .get(idx)
                    .map(|t| t.label(exposure_name))
                    .unwrap_or(column),
            }
        }
        other => other,
    }
}

fn fit_design(
    spec: &ModelSpec,
    design: &Matrix,
    y: &[f64],
    exposure_name: &str,
) -> Result<GlmFit> {
    let n = design.rows();
    let p = design.cols();

    if spec.link == Link::Identity {
        let sol = qr_least_squares(design, y)
            .map_err(|e| map_rank_error(e, spec, exposure_name))?;
        let fitted = design.mat_vec(&sol.coef);
        let rss: f64 = y
            .iter()
            .zip(&fitted)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        return Ok(GlmFit {
            spec: spec.clone(),
            coefficients: sol.coef,
            converged: true,
            iterations: 1,
            deviance: rss,
        });
    }

    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; n];
    let mut mu: Vec<f64> = eta.iter().map(|&e| link_inverse(spec.link, e)).collect();
    let mut deviance = bernoulli_deviance(y, &mu);

    let mut wx = Matrix::zeros(n, p);
    let mut wz = vec![0.0; n];

    for iter in 1..=MAX_ITER {
        // Working weights and response for this link.
        for i in 0..n {
            let m = mu[i].clamp(MU_GUARD, 1.0 - MU_GUARD);
            let variance = m * (1.0 - m);
            let dmu = match spec.link {
                Link::Logit => variance,
                Link::Probit => normal_pdf(eta[i]).max(WEIGHT_FLOOR),
                Link::Identity => unreachable!(),
            };
            let w = (dmu * dmu / variance).max(WEIGHT_FLOOR);
            let z = eta[i] + (y[i] - mu[i]) / dmu;
            let sw = w.sqrt();
            for j in 0..p {
                wx.set(i, j, sw * design.get(i, j));
            }
            wz[i] = sw * z;
        }
        let sol =
            qr_least_squares(&wx, &wz).map_err(|e| map_rank_error(e, spec, exposure_name))?;

        // Step-halving keeps the deviance monotone.
        let mut step: Vec<f64> = sol.coef.iter().zip(&beta).map(|(n, o)| n - o).collect();
        let mut candidate;
        let mut cand_eta;
        let mut cand_mu;
        let mut cand_dev;
        let mut halvings = 0;
        loop {
            candidate = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + s)
                .collect::<Vec<f64>>();
            cand_eta = design.mat_vec(&candidate);
            cand_mu = cand_eta
                .iter()
                .map(|&e| link_inverse(spec.link, e))
                .collect::<Vec<f64>>();
            cand_dev = bernoulli_deviance(y, &cand_mu);
            if cand_dev <= deviance + 1e-12 || halvings >= 30 {
                break;
            }
            for s in &mut step {
                *s *= 0.5;
            }
            halvings += 1;
        }

        let improving = cand_dev < deviance - 1e-12;
        let max_change = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        beta = candidate;
        eta = cand_eta;
        mu = cand_mu;
        deviance = cand_dev;

        // Likelihood score of the exact Bernoulli log-likelihood.
        let score_vec: Vec<f64> = match spec.link {
            Link::Logit => y.iter().zip(&mu).map(|(yi, mi)| yi - mi).collect(),
            Link::Probit => (0..n)
                .map(|i| {
                    let m = mu[i].clamp(MU_GUARD, 1.0 - MU_GUARD);
                    normal_pdf(eta[i]) * (y[i] - mu[i]) / (m * (1.0 - m))
                })
                .collect(),
            Link::Identity => unreachable!(),
        };
        let score = design.t_mat_vec(&score_vec);
        let score_norm = score.iter().fold(0.0f64, |m, s| m.max(s.abs()));

        // Every linear predictor past +-30 with the fit still moving means
        // the likelihood is running off to a boundary. A binary response
        // fitted perfectly is the same condition reached from the other
        // side: the score converges while the MLE sits at infinity.
        if eta.iter().all(|e| e.abs() > 30.0) && (improving || max_change > 0.1) {
            return Err(Error::Separation);
        }
        if max_change < COEF_TOL || score_norm < SCORE_TOL {
            let binary = y.iter().all(|&v| v == 0.0 || v == 1.0);
            if binary && y.iter().zip(&mu).all(|(yi, mi)| (yi - mi).abs() < 1e-8) {
                return Err(Error::Separation);
            }
            return Ok(GlmFit {
                spec: spec.clone(),
                coefficients: beta,
                converged: true,
                iterations: iter,
                deviance,
            });
        }
    }

    Ok(GlmFit {
        spec: spec.clone(),
        coefficients: beta,
        converged: false,
        iterations: MAX_ITER,
        deviance,
    })
}

/// Mean-scale predictions on a sample, optionally overriding the exposure
/// column (counterfactual prediction at a = 0 or a = 1).
pub fn predict(fit: &GlmFit, sample: &Sample, exposure: Option<&[f64]>) -> Result<Vec<f64>> {
    let exposure = exposure.unwrap_or_else(|| sample.exposure());
    let design = build_design(sample, &fit.spec.terms, exposure)?;
    Ok(design
        .mat_vec(&fit.coefficients)
        .into_iter()
        .map(|e| link_inverse(fit.spec.link, e))
        .collect())
}

/// Predictions with the exposure column set to the constant `a` for every
/// subject.
pub fn predict_at_exposure(fit: &GlmFit, sample: &Sample, a: f64) -> Result<Vec<f64>> {
    let forced = vec![a; sample.n()];
    predict(fit, sample, Some(&forced))
}
