//! Observed-data model: samples, exposure summaries, outcome scaling, and
//! CSV ingestion.
//!
//! A [`Sample`] is one causally-connected group: a covariate matrix, a binary
//! exposure vector, and an outcome vector of equal length. All types are
//! immutable after construction.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One group's observed data.
#[derive(Debug, Clone)]
pub struct Sample {
    covariates: Matrix,
    covariate_names: Vec<String>,
    exposure: Vec<f64>,
    outcome: Vec<f64>,
    group_id: Option<String>,
    exposure_name: String,
    outcome_name: String,
}

impl Sample {
    /// Builds and validates a sample. Exposure entries must be exactly 0 or
    /// 1 and outcomes finite; dimensions must agree.
    pub fn new(
        covariates: Matrix,
        covariate_names: Vec<String>,
        exposure: Vec<f64>,
        outcome: Vec<f64>,
    ) -> Result<Self> {
        let n = covariates.rows();
        if covariate_names.len() != covariates.cols() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} covariate names for {} columns",
                    covariate_names.len(),
                    covariates.cols()
                ),
            });
        }
        if exposure.len() != n || outcome.len() != n {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "covariates {n} rows, exposure {} entries, outcome {} entries",
                    exposure.len(),
                    outcome.len()
                ),
            });
        }
        if n == 0 {
            return Err(Error::TooFewRows { n: 0 });
        }
        for (i, &a) in exposure.iter().enumerate() {
            if a != 0.0 && a != 1.0 {
                return Err(Error::NonBinaryExposure { row: i + 1 });
            }
        }
        for (i, &y) in outcome.iter().enumerate() {
            if !y.is_finite() {
                return Err(Error::NonFiniteOutcome { row: i + 1 });
            }
        }
        Ok(Sample {
            covariates,
            covariate_names,
            exposure,
            outcome,
            group_id: None,
            exposure_name: "a".to_string(),
            outcome_name: "y".to_string(),
        })
    }

    pub fn with_group_id(mut self, id: impl Into<String>) -> Self {
        self.group_id = Some(id.into());
        self
    }

    pub fn with_column_names(
        mut self,
        exposure_name: impl Into<String>,
        outcome_name: impl Into<String>,
    ) -> Self {
        self.exposure_name = exposure_name.into();
        self.outcome_name = outcome_name.into();
        self
    }

    pub fn n(&self) -> usize {
        self.covariates.rows()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Column index of a covariate by name.
    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn covariate_column(&self, idx: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.covariates.get(i, idx)).collect()
    }

    /// Exposure vector; entries are exactly 0.0 or 1.0.
    pub fn exposure(&self) -> &[f64] {
        &self.exposure
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn group_id(&self) -> Option<&str> {
        self.group_id.as_deref()
    }

    pub fn exposure_name(&self) -> &str {
        &self.exposure_name
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    /// Copy of this sample with the given outcome vector (used by scaling).
    pub(crate) fn with_outcome(&self, outcome: Vec<f64>) -> Sample {
        Sample {
            outcome,
            ..self.clone()
        }
    }

    /// Row-permuted copy; `perm[i]` is the source row for new row `i`.
    /// Mostly useful for invariance checks.
    pub fn permute_rows(&self, perm: &[usize]) -> Sample {
        assert_eq!(perm.len(), self.n());
        let d = self.covariates.cols();
        let mut cov = Matrix::zeros(self.n(), d);
        for (i, &src) in perm.iter().enumerate() {
            for j in 0..d {
                cov.set(i, j, self.covariates.get(src, j));
            }
        }
        Sample {
            covariates: cov,
            covariate_names: self.covariate_names.clone(),
            exposure: perm.iter().map(|&s| self.exposure[s]).collect(),
            outcome: perm.iter().map(|&s| self.outcome[s]).collect(),
            group_id: self.group_id.clone(),
            exposure_name: self.exposure_name.clone(),
            outcome_name: self.outcome_name.clone(),
        }
    }
}

/// Summary function k_n applied to the exposure proportion.
#[derive(Debug, Clone, PartialEq)]
pub enum KnSpec {
    /// k_n(a) = a.
    Identity,
    /// k_n(a) = n * a, the count of exposed subjects.
    Count,
    /// k_n(a) = slope * a + intercept, e.g. mapping a cohort proportion to a
    /// clinic-wide proportion. The result must stay in `[0,1]`.
    Affine { slope: f64, intercept: f64 },
}

/// Observed exposure proportion and its k_n summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSummary {
    /// Proportion exposed.
    pub a_bar: f64,
    /// Count of exposed subjects.
    pub s_n: usize,
    /// Sample size.
    pub n: usize,
    /// k_n(a_bar) under the configured summary function.
    pub k_value: f64,
}

/// Computes the exposure summary, rejecting groups where the proportion
/// exposed is 0 or 1 (no identifiable estimand exists there).
pub fn exposure_summary(sample: &Sample, kn: &KnSpec) -> Result<ExposureSummary> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::TooFewRows { n });
    }
    let s_n = sample.exposure().iter().filter(|&&a| a == 1.0).count();
    if s_n == 0 || s_n == n {
        return Err(Error::DegenerateExposure {
            all_exposed: s_n == n,
        });
    }
    let a_bar = s_n as f64 / n as f64;
    let k_value = match kn {
        KnSpec::Identity => a_bar,
        KnSpec::Count => s_n as f64,
        KnSpec::Affine { slope, intercept } => {
            let k = slope * a_bar + intercept;
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::KnOutOfRange { value: k });
            }
            k
        }
    };
    Ok(ExposureSummary {
        a_bar,
        s_n,
        n,
        k_value,
    })
}

/// Affine map taking the outcome onto `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OutcomeScale {
    pub lower: f64,
    pub upper: f64,
}

impl OutcomeScale {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
            return Err(Error::InvalidSpec {
                message: format!("outcome scale requires lower < upper, got [{lower}, {upper}]"),
            });
        }
        Ok(OutcomeScale { lower, upper })
    }

    /// The identity scale for outcomes already in `[0,1]`.
    pub fn unit() -> Self {
        OutcomeScale {
            lower: 0.0,
            upper: 1.0,
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    #[inline]
    pub fn scale(&self, y: f64) -> f64 {
        (y - self.lower) / self.width()
    }

    #[inline]
    pub fn unscale(&self, s: f64) -> f64 {
        self.lower + self.width() * s
    }
}

/// Determines the scale for an outcome vector: an explicit scale is checked
/// against every observation; `None` auto-scales, treating {0,1}-valued
/// outcomes as already on the unit interval and otherwise using min/max.
pub fn determine_scale(outcome: &[f64], explicit: Option<OutcomeScale>) -> Result<OutcomeScale> {
    match explicit {
        Some(scale) => {
            for (i, &y) in outcome.iter().enumerate() {
                if y < scale.lower || y > scale.upper {
                    return Err(Error::OutcomeOutOfBounds {
                        row: i + 1,
                        value: y,
                        lower: scale.lower,
                        upper: scale.upper,
                    });
                }
            }
            Ok(scale)
        }
        None => {
            if outcome.iter().all(|&y| y == 0.0 || y == 1.0) {
                return Ok(OutcomeScale::unit());
            }
            let lower = outcome.iter().cloned().fold(f64::INFINITY, f64::min);
            let upper = outcome.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lower == upper {
                return Err(Error::ConstantOutcome);
            }
            OutcomeScale::new(lower, upper)
        }
    }
}

/// Rescales the outcome to `[0,1]`, returning the scaled sample and the scale
/// that inverts it exactly via `y = lower + (upper - lower) * y'`.
pub fn scale_outcome(
    sample: &Sample,
    explicit: Option<OutcomeScale>,
) -> Result<(Sample, OutcomeScale)> {
    let scale = determine_scale(sample.outcome(), explicit)?;
    let scaled: Vec<f64> = sample.outcome().iter().map(|&y| scale.scale(y)).collect();
    Ok((sample.with_outcome(scaled), scale))
}

/// Column-name mapping for CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub covariates: Vec<String>,
    pub exposure: String,
    pub outcome: String,
    pub group: Option<String>,
}

/// Loads one sample per distinct group value (in first-appearance order), or
/// a single sample when no group column is configured. Rows keep file order.
///
/// The format is plain comma-separated UTF-8 with a header row; fields are
/// trimmed, decimal point is `.`, and quoting is not supported.
pub fn load_sample(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<Sample>> {
    let text = std::fs::read_to_string(path)?;
    load_sample_str(&text, schema)
}

/// As [`load_sample`], from an in-memory string.
pub fn load_sample_str(text: &str, schema: &CsvSchema) -> Result<Vec<Sample>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::TooFewRows { n: 0 })?;
    let header: Vec<&str> = header.split(',').map(str::trim).collect();

    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::MissingColumn {
                name: name.to_string(),
            })
    };
    let cov_idx: Vec<usize> = schema
        .covariates
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let exp_idx = col(&schema.exposure)?;
    let out_idx = col(&schema.outcome)?;
    let grp_idx = match &schema.group {
        Some(g) => Some(col(g)?),
        None => None,
    };

    struct GroupRows {
        key: Option<String>,
        cov: Vec<Vec<f64>>,
        exposure: Vec<f64>,
        outcome: Vec<f64>,
    }
    let mut groups: Vec<GroupRows> = Vec::new();

    for (row_idx, line) in lines.enumerate() {
        let row = row_idx + 1; // 1-based data row for messages
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
        let numeric = |idx: usize, name: &str| -> Result<f64> {
            fields[idx].parse::<f64>().map_err(|_| Error::NonNumeric {
                row,
                column: name.to_string(),
                value: fields[idx].to_string(),
            })
        };

        let a = numeric(exp_idx, &schema.exposure)?;
        if a != 0.0 && a != 1.0 {
            return Err(Error::NonBinaryExposure { row });
        }
        let y = numeric(out_idx, &schema.outcome)?;
        if !y.is_finite() {
            return Err(Error::NonFiniteOutcome { row });
        }
        let mut covs = Vec::with_capacity(cov_idx.len());
        for (ci, name) in cov_idx.iter().zip(&schema.covariates) {
            let v = numeric(*ci, name)?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    row,
                    column: name.clone(),
                    value: fields[*ci].to_string(),
                });
            }
            covs.push(v);
        }
        let key = grp_idx.map(|gi| fields[gi].to_string());

        let slot = match groups.iter_mut().find(|g| g.key == key) {
            Some(g) => g,
            None => {
                groups.push(GroupRows {
                    key,
                    cov: Vec::new(),
                    exposure: Vec::new(),
                    outcome: Vec::new(),
                });
                groups.last_mut().unwrap()
            }
        };
        slot.cov.push(covs);
        slot.exposure.push(a);
        slot.outcome.push(y);
    }

    if groups.is_empty() {
        return Err(Error::TooFewRows { n: 0 });
    }
    if schema.group.is_none() {
        let n = groups[0].outcome.len();
        if n < 2 {
            return Err(Error::TooFewRows { n });
        }
    }

    groups
        .into_iter()
        .map(|g| {
            let mat = Matrix::from_rows(g.cov);
            let mut s = Sample::new(mat, schema.covariates.clone(), g.exposure, g.outcome)?
                .with_column_names(schema.exposure.clone(), schema.outcome.clone());
            if let Some(k) = g.key {
                s = s.with_group_id(k);
            }
            Ok(s)
        })
        .collect()
}

/// Serializes a sample back to CSV (covariates, exposure, outcome). Floats
/// use Rust's shortest round-trip formatting, so `load_sample_str` recovers
/// the values bit-exactly.
pub fn write_sample_csv(sample: &Sample) -> String {
    let mut out = String::new();
    for name in sample.covariate_names() {
        let _ = write!(out, "{name},");
    }
    let _ = writeln!(out, "{},{}", sample.exposure_name(), sample.outcome_name());
    for i in 0..sample.n() {
        for j in 0..sample.covariate_names().len() {
            let _ = write!(out, "{},", sample.covariates().get(i, j));
        }
        let _ = writeln!(out, "{},{}", sample.exposure()[i] as i64, sample.outcome()[i]);
    }
    out
}
