//! Hypothetical interventions g* and their individual-level marginal
//! exposure probabilities.
//!
//! All estimands in this crate need only the marginal probabilities
//! g*(1|W_i), never draws from the joint law, so [`marginalize`] is the
//! whole story: it derives the length-n vector of treatment probabilities
//! and classifies the intervention as an exposure reallocation scheme (ERS:
//! reallocates exactly the observed number of exposures) and/or an
//! approximate one (AERS: marginal probabilities average to the observed
//! proportion exposed).

use std::fmt;

use serde::Serialize;

use crate::data::{ExposureSummary, Sample};
use crate::error::{Error, Result};

/// Default tolerance for the AERS mean check; exact constructions satisfy it
/// to rounding error.
pub const AERS_TOL: f64 = 1e-12;

/// Sort direction for rank-based reallocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Ascending,
    Descending,
}

/// A user-specified hypothetical intervention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InterventionSpec {
    /// Everyone exposed.
    AllTreat,
    /// No one exposed.
    AllControl,
    /// Complete randomization at the observed proportion: every assignment
    /// vector with the observed number of exposures is equally likely.
    CompleteRandomization,
    /// Expose the S_n subjects ranking highest (or lowest) on a named
    /// covariate; ties break toward the lower row index.
    RankTopS { score: String, direction: Direction },
    /// Independent Bernoulli(p) exposure for every subject.
    Bernoulli { p: f64 },
    /// Escape hatch: caller-supplied marginal treatment probabilities.
    ExplicitMarginals { probabilities: Vec<f64> },
}

impl InterventionSpec {
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidSpec {
                message: format!("bernoulli probability must be in (0,1), got {p}"),
            });
        }
        Ok(InterventionSpec::Bernoulli { p })
    }

    pub fn explicit(probabilities: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidSpec {
                message: format!("explicit marginal {bad} is outside [0,1]"),
            });
        }
        Ok(InterventionSpec::ExplicitMarginals { probabilities })
    }

    /// Parses the config-string form: `all_treat`, `all_control`,
    /// `complete_randomization`, `rank_top_s:score=<column>[,direction=asc|desc]`,
    /// `bernoulli:p=<x>`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |message: String| Error::InvalidSpec { message };
        let text = text.trim();
        match text {
            "all_treat" => return Ok(InterventionSpec::AllTreat),
            "all_control" => return Ok(InterventionSpec::AllControl),
            "complete_randomization" => return Ok(InterventionSpec::CompleteRandomization),
            _ => {}
        }
        if let Some(args) = text.strip_prefix("rank_top_s:") {
            let mut score = None;
            let mut direction = Direction::Descending;
            for kv in args.split(',') {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value in '{kv}'")))?;
                match k.trim() {
                    "score" => score = Some(v.trim().to_string()),
                    "direction" => {
                        direction = match v.trim() {
                            "asc" | "ascending" => Direction::Ascending,
                            "desc" | "descending" => Direction::Descending,
                            other => return Err(bad(format!("unknown direction '{other}'"))),
                        }
                    }
                    other => return Err(bad(format!("unknown rank_top_s key '{other}'"))),
                }
            }
            let score = score.ok_or_else(|| bad("rank_top_s needs score=<column>".into()))?;
            return Ok(InterventionSpec::RankTopS { score, direction });
        }
        if let Some(args) = text.strip_prefix("bernoulli:") {
            let (k, v) = args
                .split_once('=')
                .ok_or_else(|| bad(format!("expected p=<x> in '{args}'")))?;
            if k.trim() != "p" {
                return Err(bad(format!("unknown bernoulli key '{k}'")));
            }
            let p: f64 = v
                .trim()
                .parse()
                .map_err(|_| bad(format!("bernoulli p '{v}' is not a number")))?;
            return Self::bernoulli(p);
        }
        Err(bad(format!("unknown intervention '{text}'")))
    }

    /// True when each subject's marginal probability depends only on that
    /// subject's own covariates (the restriction under which the
    /// population-average variance applies). Rank-based and
    /// complete-randomization schemes depend on the whole group.
    pub fn is_individual_level(&self) -> bool {
        match self {
            InterventionSpec::AllTreat
            | InterventionSpec::AllControl
            | InterventionSpec::Bernoulli { .. }
            | InterventionSpec::ExplicitMarginals { .. } => true,
            InterventionSpec::CompleteRandomization | InterventionSpec::RankTopS { .. } => false,
        }
    }
}

impl fmt::Display for InterventionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterventionSpec::AllTreat => write!(f, "all_treat"),
            InterventionSpec::AllControl => write!(f, "all_control"),
            InterventionSpec::CompleteRandomization => write!(f, "complete_randomization"),
            InterventionSpec::RankTopS { score, direction } => write!(
                f,
                "rank_top_s:score={score},direction={}",
                match direction {
                    Direction::Ascending => "asc",
                    Direction::Descending => "desc",
                }
            ),
            InterventionSpec::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            InterventionSpec::ExplicitMarginals { .. } => write!(f, "explicit_marginals"),
        }
    }
}

/// Individual-level marginal treatment probabilities with ERS/AERS flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalIntervention {
    pub probs_treat: Vec<f64>,
    pub is_ers: bool,
    pub is_aers: bool,
}

/// Derives g*(1|W_i) for every subject.
pub fn marginalize(
    spec: &InterventionSpec,
    sample: &Sample,
    summary: &ExposureSummary,
) -> Result<MarginalIntervention> {
    let n = sample.n();
    let probs_treat = match spec {
        InterventionSpec::AllTreat => vec![1.0; n],
        InterventionSpec::AllControl => vec![0.0; n],
        // Exact by the symmetry of complete randomization; the brute-force
        // enumeration lives in the test oracle.
        InterventionSpec::CompleteRandomization => vec![summary.a_bar; n],
        InterventionSpec::RankTopS { score, direction } => {
            let col = sample
                .covariate_index(score)
                .ok_or_else(|| Error::MissingColumn {
                    name: score.clone(),
                })?;
            let scores = sample.covariate_column(col);
            rank_top_s(&scores, *direction, summary.s_n)
        }
        InterventionSpec::Bernoulli { p } => {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::InvalidSpec {
                    message: format!("bernoulli probability must be in (0,1), got {p}"),
                });
            }
            vec![*p; n]
        }
        InterventionSpec::ExplicitMarginals { probabilities } => {
            if probabilities.len() != n {
                return Err(Error::MarginalLengthMismatch {
                    got: probabilities.len(),
                    expected: n,
                });
            }
            if let Some(&bad) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidSpec {
                    message: format!("explicit marginal {bad} is outside [0,1]"),
                });
            }
            probabilities.clone()
        }
    };
    let is_ers = check_ers(spec, summary);
    let marginals = MarginalIntervention {
        probs_treat,
        is_ers,
        is_aers: false,
    };
    // An ERS satisfies the AERS mean criterion by construction.
    let is_aers = is_ers || check_aers(&marginals, summary, AERS_TOL);
    Ok(MarginalIntervention { is_aers, ..marginals })
}

/// 0/1 marginals assigning exposure to the `s_n` best-ranked subjects; ties
/// in score break toward the lower row index.
fn rank_top_s(scores: &[f64], direction: Direction, s_n: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        let cmp = scores[i].partial_cmp(&scores[j]).expect("finite scores");
        let cmp = match direction {
            Direction::Descending => cmp.reverse(),
            Direction::Ascending => cmp,
        };
        cmp.then(i.cmp(&j))
    });
    let mut probs = vec![0.0; scores.len()];
    for &i in order.iter().take(s_n) {
        probs[i] = 1.0;
    }
    probs
}

/// AERS criterion: the marginal treatment probabilities average to the
/// observed proportion exposed within `tol`.
pub fn check_aers(
    marginals: &MarginalIntervention,
    summary: &ExposureSummary,
    tol: f64,
) -> bool {
    let n = marginals.probs_treat.len();
    if n == 0 {
        return false;
    }
    let mean = marginals.probs_treat.iter().sum::<f64>() / n as f64;
    (mean - summary.a_bar).abs() <= tol
}

/// ERS check: does the joint intervention reallocate exactly the observed
/// number of exposures? True for complete randomization and rank-based
/// schemes; true for explicit marginals only when they form a 0/1 vector
/// with exactly S_n ones.
pub fn check_ers(spec: &InterventionSpec, summary: &ExposureSummary) -> bool {
    match spec {
        InterventionSpec::CompleteRandomization | InterventionSpec::RankTopS { .. } => true,
        InterventionSpec::AllTreat
        | InterventionSpec::AllControl
        | InterventionSpec::Bernoulli { .. } => false,
        InterventionSpec::ExplicitMarginals { probabilities } => {
            probabilities.iter().all(|&p| p == 0.0 || p == 1.0)
                && probabilities.iter().filter(|&&p| p == 1.0).count() == summary.s_n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{exposure_summary, KnSpec};
    use crate::linalg::Matrix;

    fn sample(w: &[f64], a: &[f64]) -> (Sample, ExposureSummary) {
        let cov = Matrix::from_rows(w.iter().map(|&v| vec![v]).collect());
        let y: Vec<f64> = w.iter().map(|v| v * 0.5).collect();
        let s = Sample::new(cov, vec!["w".into()], a.to_vec(), y).unwrap();
        let summary = exposure_summary(&s, &KnSpec::Identity).unwrap();
        (s, summary)
    }

    #[test]
    fn complete_randomization_marginals_are_a_bar() {
        let (s, sum) = sample(&[0.1, 0.9, 0.5, 0.3], &[0.0, 1.0, 1.0, 0.0]);
        let m = marginalize(&InterventionSpec::CompleteRandomization, &s, &sum).unwrap();
        assert_eq!(m.probs_treat, vec![0.5; 4]);
        assert!(m.is_ers);
        assert!(m.is_aers);
    }

    /// Enumeration oracle: averages subject-level assignment over every
    /// exposure vector with mean a_bar (all equally likely), and checks the
    /// analytic marginals match.
    #[test]
    fn complete_randomization_matches_enumeration_oracle() {
        let (s, sum) = sample(&[0.4, -1.0, 2.2, 0.0, 1.3, -0.7], &[0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let n = s.n();
        let mut counts = vec![0u64; n];
        let mut total = 0u64;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != sum.s_n {
                continue;
            }
            total += 1;
            for (i, c) in counts.iter_mut().enumerate() {
                if mask & (1 << i) != 0 {
                    *c += 1;
                }
            }
        }
        let m = marginalize(&InterventionSpec::CompleteRandomization, &s, &sum).unwrap();
        for i in 0..n {
            let oracle = counts[i] as f64 / total as f64;
            assert!((m.probs_treat[i] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_top_s_descending_picks_highest() {
        let (s, sum) = sample(&[0.1, 0.9, 0.5, 0.3], &[0.0, 1.0, 1.0, 0.0]);
        let spec = InterventionSpec::RankTopS {
            score: "w".into(),
            direction: Direction::Descending,
        };
        let m = marginalize(&spec, &s, &sum).unwrap();
        assert_eq!(m.probs_treat, vec![0.0, 1.0, 1.0, 0.0]);
        assert!(m.is_ers && m.is_aers);
        let total: f64 = m.probs_treat.iter().sum();
        assert_eq!(total, sum.s_n as f64);
    }

    #[test]
    fn rank_top_s_ties_break_by_row_index() {
        let (s, sum) = sample(&[0.5, 0.5, 0.5, 0.1], &[1.0, 1.0, 0.0, 0.0]);
        let spec = InterventionSpec::RankTopS {
            score: "w".into(),
            direction: Direction::Descending,
        };
        let m = marginalize(&spec, &s, &sum).unwrap();
        assert_eq!(m.probs_treat, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn rank_top_s_invariant_to_monotone_transform() {
        let w = [0.4, -1.0, 2.2, 0.0, 1.3, -0.7];
        let a = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let (s1, sum1) = sample(&w, &a);
        let transformed: Vec<f64> = w.iter().map(|&v| (v * 0.8).exp() + 3.0).collect();
        let (s2, sum2) = sample(&transformed, &a);
        let spec = InterventionSpec::RankTopS {
            score: "w".into(),
            direction: Direction::Descending,
        };
        let m1 = marginalize(&spec, &s1, &sum1).unwrap();
        let m2 = marginalize(&spec, &s2, &sum2).unwrap();
        assert_eq!(m1.probs_treat, m2.probs_treat);
    }

    #[test]
    fn marginalize_is_permutation_equivariant() {
        let w = [0.4, -1.0, 2.2, 0.0, 1.3, -0.7];
        let a = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let (s, sum) = sample(&w, &a);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let sp = s.permute_rows(&perm);
        let sump = exposure_summary(&sp, &KnSpec::Identity).unwrap();
        for spec in [
            InterventionSpec::AllTreat,
            InterventionSpec::CompleteRandomization,
            InterventionSpec::RankTopS {
                score: "w".into(),
                direction: Direction::Descending,
            },
        ] {
            let m = marginalize(&spec, &s, &sum).unwrap();
            let mp = marginalize(&spec, &sp, &sump).unwrap();
            for (i, &src) in perm.iter().enumerate() {
                assert_eq!(mp.probs_treat[i], m.probs_treat[src]);
            }
        }
    }

    #[test]
    fn all_treat_and_control() {
        let (s, sum) = sample(&[0.1, 0.9, 0.5, 0.3], &[0.0, 1.0, 1.0, 0.0]);
        let t = marginalize(&InterventionSpec::AllTreat, &s, &sum).unwrap();
        assert_eq!(t.probs_treat, vec![1.0; 4]);
        assert!(!t.is_ers && !t.is_aers);
        let c = marginalize(&InterventionSpec::AllControl, &s, &sum).unwrap();
        assert_eq!(c.probs_treat, vec![0.0; 4]);
        assert!(!c.is_ers && !c.is_aers);
    }

    #[test]
    fn bernoulli_at_a_bar_is_aers_not_ers() {
        let (s, sum) = sample(&[0.1, 0.9, 0.5, 0.3], &[0.0, 1.0, 1.0, 0.0]);
        let m = marginalize(&InterventionSpec::bernoulli(0.5).unwrap(), &s, &sum).unwrap();
        assert!(m.is_aers);
        assert!(!m.is_ers);
        let off = marginalize(&InterventionSpec::bernoulli(0.3).unwrap(), &s, &sum).unwrap();
        assert!(!off.is_aers);
    }

    #[test]
    fn aers_check_examples() {
        let (s, sum) = sample(&[0.1, 0.9, 0.5, 0.3], &[0.0, 1.0, 1.0, 0.0]);
        let explicit = InterventionSpec::explicit(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let m = marginalize(&explicit, &s, &sum).unwrap();
        assert!(check_aers(&m, &sum, AERS_TOL));
        assert!(m.is_ers, "deterministic reallocation of S_n exposures");
        let lopsided = InterventionSpec::explicit(vec![0.3, 0.3, 0.3, 0.3]).unwrap();
        let m2 = marginalize(&lopsided, &s, &sum).unwrap();
        assert!(!m2.is_aers && !m2.is_ers);
    }

    #[test]
    fn explicit_marginals_length_mismatch() {
        let (s, sum) = sample(&[0.1, 0.9, 0.5, 0.3], &[0.0, 1.0, 1.0, 0.0]);
        let spec = InterventionSpec::explicit(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            marginalize(&spec, &s, &sum),
            Err(Error::MarginalLengthMismatch { got: 2, expected: 4 })
        ));
    }

    #[test]
    fn parse_config_strings() {
        assert_eq!(
            InterventionSpec::parse("all_treat").unwrap(),
            InterventionSpec::AllTreat
        );
        assert_eq!(
            InterventionSpec::parse("rank_top_s:score=cd4,direction=desc").unwrap(),
            InterventionSpec::RankTopS {
                score: "cd4".into(),
                direction: Direction::Descending
            }
        );
        assert_eq!(
            InterventionSpec::parse("bernoulli:p=0.25").unwrap(),
            InterventionSpec::Bernoulli { p: 0.25 }
        );
        assert!(InterventionSpec::parse("bernoulli:p=1.5").is_err());
        assert!(InterventionSpec::parse("nonsense").is_err());
    }

    #[test]
    fn display_roundtrips_through_parse() {
        for text in [
            "all_treat",
            "all_control",
            "complete_randomization",
            "rank_top_s:score=w,direction=asc",
            "bernoulli:p=0.25",
        ] {
            let spec = InterventionSpec::parse(text).unwrap();
            assert_eq!(spec.to_string(), text);
        }
    }
}
