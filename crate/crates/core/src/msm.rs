//! Working marginal-structural-model projection of per-group effect
//! estimates onto group-level summaries, by closed-form weighted least
//! squares with Wald inference.
//!
//! With a linear model m(V_j; beta) = x_j' beta and weights w_j, the
//! projection is beta = (X' W X)^{-1} X' W psi. Under inverse-variance
//! weights (the default), (X' W X)^{-1} estimates the covariance of beta;
//! under uniform weights the sandwich form with the supplied per-group
//! variances is used instead.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{normal_matrix_inverse, qr_least_squares, Matrix};
use crate::math::{normal_cdf, normal_quantile};

/// One group's estimated effect and its effect-modifier values.
#[derive(Debug, Clone)]
pub struct GroupEffect {
    pub group_id: String,
    pub psi_hat: f64,
    /// Squared standard error of `psi_hat`.
    pub variance: f64,
    /// Named modifier values: k_n(A-bar), covariate summaries, group-level
    /// data.
    pub modifiers: Vec<(String, f64)>,
}

impl GroupEffect {
    fn modifier(&self, name: &str) -> Option<f64> {
        self.modifiers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Design term over modifier names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum MsmTerm {
    Intercept,
    Main(String),
    Interaction(String, String),
}

impl MsmTerm {
    pub fn label(&self) -> String {
        match self {
            MsmTerm::Intercept => "1".to_string(),
            MsmTerm::Main(v) => v.clone(),
            MsmTerm::Interaction(a, b) => format!("{a}:{b}"),
        }
    }
}

/// Parses a right-hand-side formula over modifiers, e.g. `"1 + G + k + G:k"`.
/// The intercept column, when present, is placed first.
pub fn parse_msm_formula(formula: &str) -> Result<Vec<MsmTerm>> {
    let mut terms = Vec::new();
    for raw in formula.split('+') {
        let t = raw.trim();
        if t.is_empty() {
            return Err(Error::InvalidSpec {
                message: format!("empty term in MSM formula '{formula}'"),
            });
        }
        if t == "1" {
            terms.push(MsmTerm::Intercept);
        } else if let Some((a, b)) = t.split_once(':') {
            terms.push(MsmTerm::Interaction(
                a.trim().to_string(),
                b.trim().to_string(),
            ));
        } else {
            terms.push(MsmTerm::Main(t.to_string()));
        }
    }
    terms.sort_by_key(|t| !matches!(t, MsmTerm::Intercept));
    Ok(terms)
}

/// J x p design matrix over the groups' modifiers.
pub fn build_design(effects: &[GroupEffect], terms: &[MsmTerm]) -> Result<Matrix> {
    let j = effects.len();
    let mut design = Matrix::zeros(j, terms.len());
    for (row, eff) in effects.iter().enumerate() {
        let val = |name: &str| -> Result<f64> {
            eff.modifier(name).ok_or_else(|| Error::MissingModifier {
                group: eff.group_id.clone(),
                modifier: name.to_string(),
            })
        };
        for (col, term) in terms.iter().enumerate() {
            let v = match term {
                MsmTerm::Intercept => 1.0,
                MsmTerm::Main(name) => val(name)?,
                MsmTerm::Interaction(a, b) => val(a)? * val(b)?,
            };
            design.set(row, col, v);
        }
    }
    Ok(design)
}

/// Weighting for the projection loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Weighting {
    /// w_j = 1 / variance_j (the default).
    InverseVariance,
    /// w_j = 1.
    Uniform,
}

/// A fitted working MSM.
#[derive(Debug, Clone)]
pub struct MsmFit {
    pub beta: Vec<f64>,
    pub covariance: Matrix,
    pub terms: Vec<MsmTerm>,
    pub weights_used: Vec<f64>,
    /// The projection is interpretable causally in k_n(A-bar) only under an
    /// unverifiable no-confounding condition across groups; carried on every
    /// fit rather than checked.
    pub caveat: &'static str,
}

pub const MSM_CAVEAT: &str = "MSM coefficients describe association of group effects with \
modifiers; a causal reading in k_n requires group-level exchangeability that the data cannot \
verify";

/// Closed-form WLS projection of the group effects onto the working model.
pub fn fit_msm(
    effects: &[GroupEffect],
    terms: &[MsmTerm],
    weighting: Weighting,
) -> Result<MsmFit> {
    let j = effects.len();
    let p = terms.len();
    if j < p {
        return Err(Error::SingularSystem);
    }
    let weights: Vec<f64> = match weighting {
        Weighting::InverseVariance => {
            for e in effects {
                if !(e.variance > 0.0) {
                    return Err(Error::InvalidSpec {
                        message: format!(
                            "group '{}' has variance {}; inverse-variance weights need positive variances",
                            e.group_id, e.variance
                        ),
                    });
                }
            }
            effects.iter().map(|e| 1.0 / e.variance).collect()
        }
        Weighting::Uniform => vec![1.0; j],
    };

    let x = build_design(effects, terms)?;
    let mut xw = Matrix::zeros(j, p);
    let mut yw = vec![0.0; j];
    for i in 0..j {
        let sw = weights[i].sqrt();
        for c in 0..p {
            xw.set(i, c, sw * x.get(i, c));
        }
        yw[i] = sw * effects[i].psi_hat;
    }
    let sol = qr_least_squares(&xw, &yw).map_err(|e| match e {
        Error::RankDeficient { column } => {
            let idx: usize = column.parse().unwrap_or(0);
            Error::InvalidSpec {
                message: format!(
                    "singular weighted design: column '{}' is collinear",
                    terms.get(idx).map(MsmTerm::label).unwrap_or(column)
                ),
            }
        }
        other => other,
    })?;

    // (X' W X)^{-1}, from the R factor of the weighted design.
    let xtwx_inv = normal_matrix_inverse(&sol.r);
    let covariance = match weighting {
        Weighting::InverseVariance => xtwx_inv,
        Weighting::Uniform => {
            // Sandwich: (X'X)^{-1} X' Sigma X (X'X)^{-1} with the supplied
            // per-group variances in Sigma.
            let mut meat = Matrix::zeros(p, p);
            for i in 0..j {
                for r in 0..p {
                    for c in 0..p {
                        let v = meat.get(r, c) + effects[i].variance * x.get(i, r) * x.get(i, c);
                        meat.set(r, c, v);
                    }
                }
            }
            let mut left = Matrix::zeros(p, p);
            for r in 0..p {
                for c in 0..p {
                    let mut s = 0.0;
                    for k in 0..p {
                        s += xtwx_inv.get(r, k) * meat.get(k, c);
                    }
                    left.set(r, c, s);
                }
            }
            let mut out = Matrix::zeros(p, p);
            for r in 0..p {
                for c in 0..p {
                    let mut s = 0.0;
                    for k in 0..p {
                        s += left.get(r, k) * xtwx_inv.get(k, c);
                    }
                    out.set(r, c, s);
                }
            }
            out
        }
    };

    Ok(MsmFit {
        beta: sol.coef,
        covariance,
        terms: terms.to_vec(),
        weights_used: weights,
        caveat: MSM_CAVEAT,
    })
}

/// One row of the Wald coefficient table.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSummary {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci: (f64, f64),
}

/// Wald z statistics, p-values, and intervals for every coefficient.
pub fn coefficient_table(fit: &MsmFit, level: f64) -> Vec<CoefficientSummary> {
    let zq = normal_quantile(1.0 - (1.0 - level) / 2.0);
    fit.terms
        .iter()
        .enumerate()
        .map(|(i, term)| {
            let est = fit.beta[i];
            let se = fit.covariance.get(i, i).max(0.0).sqrt();
            let z = if se > 0.0 { est / se } else { f64::INFINITY };
            let p_value = 2.0 * (1.0 - normal_cdf(z.abs()));
            CoefficientSummary {
                term: term.label(),
                estimate: est,
                se,
                z,
                p_value,
                ci: (est - zq * se, est + zq * se),
            }
        })
        .collect()
}

/// Loads group effects from CSV text with columns
/// `group_id,psi_hat,variance` plus one column per modifier.
pub fn load_group_effects_str(text: &str) -> Result<Vec<GroupEffect>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or(Error::TooFewRows { n: 0 })?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    for required in ["group_id", "psi_hat", "variance"] {
        if !header.iter().any(|h| h == required) {
            return Err(Error::MissingColumn {
                name: required.to_string(),
            });
        }
    }
    let mut effects = Vec::new();
    for (row_idx, line) in lines.enumerate() {
        let row = row_idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != header.len() {
            return Err(Error::InvalidSpec {
                message: format!(
                    "row {row} has {} fields, header has {}",
                    fields.len(),
                    header.len()
                ),
            });
        }
        let mut group_id = String::new();
        let mut psi_hat = f64::NAN;
        let mut variance = f64::NAN;
        let mut modifiers = Vec::new();
        for (name, value) in header.iter().zip(&fields) {
            match name.as_str() {
                "group_id" => group_id = value.to_string(),
                _ => {
                    let v: f64 = value.parse().map_err(|_| Error::NonNumeric {
                        row,
                        column: name.clone(),
                        value: value.to_string(),
                    })?;
                    match name.as_str() {
                        "psi_hat" => psi_hat = v,
                        "variance" => variance = v,
                        _ => modifiers.push((name.clone(), v)),
                    }
                }
            }
        }
        effects.push(GroupEffect {
            group_id,
            psi_hat,
            variance,
            modifiers,
        });
    }
    if effects.is_empty() {
        return Err(Error::TooFewRows { n: 0 });
    }
    Ok(effects)
}
