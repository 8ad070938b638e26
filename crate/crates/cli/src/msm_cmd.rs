//! The `msm` subcommand: weighted-least-squares projection of per-group
//! effects onto a working MSM, reported as JSON with Wald inference.

use serde_json::json;

use reallocate_core::msm::{
    coefficient_table, fit_msm, load_group_effects_str, parse_msm_formula, Weighting,
};

use crate::config::ConfigFile;
use crate::{write_output, CliError, MsmArgs};

const SECTION: &str = "msm";

pub fn run(args: MsmArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path).map_err(CliError::Config)?,
        None => ConfigFile::default(),
    };
    let formula = args
        .formula
        .clone()
        .or_else(|| file.get(SECTION, "formula").map(str::to_string))
        .ok_or_else(|| CliError::Config("formula is required (flag or config)".into()))?;
    let weights_text = args
        .weights
        .clone()
        .or_else(|| file.get(SECTION, "weights").map(str::to_string))
        .unwrap_or_else(|| "invvar".to_string());
    let weighting = match weights_text.as_str() {
        "invvar" | "inverse_variance" => Weighting::InverseVariance,
        "uniform" => Weighting::Uniform,
        other => {
            return Err(CliError::Config(format!(
                "weights must be invvar or uniform, got '{other}'"
            )))
        }
    };
    let ci_level = match args.ci_level {
        Some(l) => l,
        None => file
            .get(SECTION, "ci_level")
            .map(|v| v.parse().map_err(|_| CliError::Config(format!("bad ci_level '{v}'"))))
            .transpose()?
            .unwrap_or(0.95),
    };

    let terms =
        parse_msm_formula(&formula).map_err(|e| CliError::Config(format!("{e}: '{formula}'")))?;
    let text = std::fs::read_to_string(&args.effects)
        .map_err(|e| CliError::Config(format!("cannot read '{}': {e}", args.effects.display())))?;
    let effects = load_group_effects_str(&text).map_err(|e| CliError::Config(e.to_string()))?;

    let fit = fit_msm(&effects, &terms, weighting)
        .map_err(|e| CliError::Config(format!("MSM fit failed: {e}")))?;
    let table = coefficient_table(&fit, ci_level);

    let p = fit.beta.len();
    let covariance: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| fit.covariance.get(i, j)).collect())
        .collect();

    let report = json!({
        "config": {
            "command": "msm",
            "effects": args.effects.display().to_string(),
            "formula": formula,
            "weights": weights_text,
            "ci_level": ci_level,
        },
        "groups": effects.len(),
        "coefficients": table,
        "covariance": covariance,
        "weights_used": fit.weights_used,
        "caveat": fit.caveat,
    });
    let text = serde_json::to_string_pretty(&report).expect("serializable report") + "\n";
    write_output(args.output.as_ref(), &text)
}
