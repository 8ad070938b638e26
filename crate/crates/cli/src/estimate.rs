//! The `estimate` subcommand: per-group direct effects plus requested
//! intervention records and contrasts, emitted as one JSON report.

use serde_json::{json, Value};

use reallocate_core::{
    exposure_summary, load_sample, ContrastResult, CsvSchema, EstimateResult, EstimatorOptions,
    InterventionSpec, KnSpec, ModelSpec, OutcomeScale, Prepared, Sample,
};

use crate::config::{csv_list, ConfigFile};
use crate::{write_output, CliError, EstimateArgs};

const SECTION: &str = "estimate";

/// An intervention request; `observed` resolves to the fitted assignment
/// probabilities once the propensity model is available.
#[derive(Debug, Clone)]
enum Request {
    Spec(InterventionSpec),
    Observed,
}

impl Request {
    fn parse(text: &str) -> Result<Request, CliError> {
        let text = text.trim();
        if text == "observed" {
            return Ok(Request::Observed);
        }
        if let Some(path) = text.strip_prefix("explicit_marginals:file=") {
            // One probability per line; blank lines and # comments allowed.
            let contents = std::fs::read_to_string(path.trim())
                .map_err(|e| CliError::Config(format!("cannot read marginals '{path}': {e}")))?;
            let mut probabilities = Vec::new();
            for (lineno, line) in contents.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                probabilities.push(line.parse::<f64>().map_err(|_| {
                    CliError::Config(format!(
                        "marginals file '{path}' line {}: '{line}' is not a number",
                        lineno + 1
                    ))
                })?);
            }
            return InterventionSpec::explicit(probabilities)
                .map(Request::Spec)
                .map_err(|e| CliError::Config(e.to_string()));
        }
        InterventionSpec::parse(text)
            .map(Request::Spec)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    fn resolve(&self, prepared: &Prepared) -> InterventionSpec {
        match self {
            Request::Spec(s) => s.clone(),
            Request::Observed => InterventionSpec::ExplicitMarginals {
                probabilities: prepared.g1.clone(),
            },
        }
    }

    fn label(&self) -> String {
        match self {
            Request::Spec(s) => s.to_string(),
            Request::Observed => "observed".to_string(),
        }
    }
}

struct Resolved {
    schema: CsvSchema,
    q_spec: ModelSpec,
    g_spec: ModelSpec,
    kn: KnSpec,
    kn_text: String,
    options: EstimatorOptions,
    scale_text: String,
    contrasts: Vec<(Request, Request, String)>,
    interventions: Vec<Request>,
    estimator: String,
    effects_output: Option<std::path::PathBuf>,
}

pub fn parse_kn(text: &str) -> Result<KnSpec, CliError> {
    match text {
        "identity" => Ok(KnSpec::Identity),
        "count" => Ok(KnSpec::Count),
        other => {
            if let Some(args) = other.strip_prefix("affine:") {
                let mut slope = None;
                let mut intercept = None;
                for kv in args.split(',') {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| CliError::Config(format!("bad kn argument '{kv}'")))?;
                    let num: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("bad kn number '{v}'")))?;
                    match k.trim() {
                        "slope" => slope = Some(num),
                        "intercept" => intercept = Some(num),
                        unknown => {
                            return Err(CliError::Config(format!("unknown kn key '{unknown}'")))
                        }
                    }
                }
                Ok(KnSpec::Affine {
                    slope: slope
                        .ok_or_else(|| CliError::Config("affine kn needs slope=<s>".into()))?,
                    intercept: intercept
                        .ok_or_else(|| CliError::Config("affine kn needs intercept=<i>".into()))?,
                })
            } else {
                Err(CliError::Config(format!("unknown kn spec '{other}'")))
            }
        }
    }
}

pub fn parse_pair(text: &str, what: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!("{what} needs 'lo,hi', got '{text}'")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Config(format!("bad {what} bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Config(format!("bad {what} bound '{}'", parts[1])))?;
    Ok((lo, hi))
}

fn resolve(args: &EstimateArgs) -> Result<(Resolved, ConfigFile), CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path).map_err(CliError::Config)?,
        None => ConfigFile::default(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone()
            .or_else(|| file.get(SECTION, key).map(str::to_string))
    };

    let covariates = pick(&args.covariates, "covariates")
        .ok_or_else(|| CliError::Config("covariates are required (flag or config)".into()))?;
    let exposure = pick(&args.exposure, "exposure").unwrap_or_else(|| "a".to_string());
    let outcome = pick(&args.outcome, "outcome").unwrap_or_else(|| "y".to_string());
    let group = pick(&args.group, "group");
    let q_formula = pick(&args.q_formula, "q_formula")
        .ok_or_else(|| CliError::Config("q_formula is required".into()))?;
    let g_formula = pick(&args.g_formula, "g_formula")
        .ok_or_else(|| CliError::Config("g_formula is required".into()))?;
    let kn_text = pick(&args.kn, "kn").unwrap_or_else(|| "identity".to_string());
    let kn = parse_kn(&kn_text)?;
    let trunc_text = pick(&args.truncation, "truncation").unwrap_or_else(|| "0.005,0.995".into());
    let truncation = parse_pair(&trunc_text, "truncation")?;
    let ci_level = match args.ci_level {
        Some(l) => l,
        None => file
            .get(SECTION, "ci_level")
            .map(|v| v.parse().map_err(|_| CliError::Config(format!("bad ci_level '{v}'"))))
            .transpose()?
            .unwrap_or(0.95),
    };
    let scale_text = pick(&args.scale, "scale").unwrap_or_else(|| "auto".to_string());
    let outcome_scale = if scale_text == "auto" {
        None
    } else {
        let (lo, hi) = parse_pair(&scale_text, "scale")?;
        Some(OutcomeScale::new(lo, hi).map_err(|e| CliError::Config(e.to_string()))?)
    };

    let mut contrast_texts = file.get_all(SECTION, "contrast");
    contrast_texts.extend(args.contrasts.iter().cloned());
    let mut contrasts = Vec::new();
    for text in &contrast_texts {
        let (a, b) = text.split_once(" vs ").ok_or_else(|| {
            CliError::Config(format!("contrast '{text}' must be 'SPEC vs SPEC'"))
        })?;
        contrasts.push((Request::parse(a)?, Request::parse(b)?, text.clone()));
    }
    let mut intervention_texts = file.get_all(SECTION, "intervention");
    intervention_texts.extend(args.interventions.iter().cloned());
    let interventions = intervention_texts
        .iter()
        .map(|t| Request::parse(t))
        .collect::<Result<Vec<_>, _>>()?;

    let estimator = pick(&args.estimator, "estimator").unwrap_or_else(|| "tmle".to_string());
    if estimator != "tmle" && estimator != "aipw" {
        return Err(CliError::Config(format!(
            "estimator must be tmle or aipw, got '{estimator}'"
        )));
    }
    let effects_output = args
        .effects_output
        .clone()
        .or_else(|| file.get(SECTION, "effects_output").map(std::path::PathBuf::from));

    let schema = CsvSchema {
        covariates: csv_list(&covariates),
        exposure,
        outcome,
        group,
    };
    let q_spec = ModelSpec::parse(&q_formula, &schema.exposure, &schema.outcome)
        .map_err(|e| CliError::Config(format!("{e} (formula '{q_formula}')")))?;
    let g_spec = ModelSpec::parse(&g_formula, &schema.exposure, &schema.outcome)
        .map_err(|e| CliError::Config(format!("{e} (formula '{g_formula}')")))?;

    // Resolved config, embedded in the output.
    let mut resolved_file = ConfigFile::default();
    resolved_file.set(SECTION, "covariates", schema.covariates.join(","));
    resolved_file.set(SECTION, "exposure", &schema.exposure);
    resolved_file.set(SECTION, "outcome", &schema.outcome);
    if let Some(g) = &schema.group {
        resolved_file.set(SECTION, "group", g);
    }
    resolved_file.set(SECTION, "q_formula", &q_formula);
    resolved_file.set(SECTION, "g_formula", &g_formula);
    resolved_file.set(SECTION, "kn", &kn_text);
    resolved_file.set(SECTION, "truncation", format!("{},{}", truncation.0, truncation.1));
    resolved_file.set(SECTION, "ci_level", ci_level.to_string());
    resolved_file.set(SECTION, "scale", &scale_text);
    resolved_file.set(SECTION, "estimator", &estimator);
    for (_, _, text) in &contrasts {
        resolved_file.push(SECTION, "contrast", text);
    }
    for text in &intervention_texts {
        resolved_file.push(SECTION, "intervention", text);
    }
    if let Some(p) = &effects_output {
        resolved_file.set(SECTION, "effects_output", p.display().to_string());
    }

    Ok((
        Resolved {
            schema,
            q_spec,
            g_spec,
            kn,
            kn_text,
            options: EstimatorOptions {
                truncation,
                ci_level,
                outcome_scale,
            },
            scale_text,
            contrasts,
            interventions,
            estimator,
            effects_output,
        },
        resolved_file,
    ))
}

fn contrast_json(label: &str, c: &ContrastResult) -> Value {
    json!({
        "contrast": label,
        "estimate": c.estimate,
        "se": c.se,
        "ci": [c.ci.0, c.ci.1],
        "components": [
            serde_json::to_value(&c.components.0).unwrap(),
            serde_json::to_value(&c.components.1).unwrap(),
        ],
    })
}

/// One row of the chained effects CSV consumed by the `msm` subcommand.
struct EffectRow {
    group_id: String,
    psi_hat: f64,
    variance: f64,
    k: f64,
    a_bar: f64,
}

fn estimate_group(sample: &Sample, cfg: &Resolved) -> Result<(Value, EffectRow), String> {
    let err = |e: reallocate_core::Error| e.to_string();
    let summary = exposure_summary(sample, &cfg.kn).map_err(err)?;
    let prepared =
        Prepared::new(sample, &cfg.kn, &cfg.q_spec, &cfg.g_spec, &cfg.options).map_err(err)?;

    let direct = prepared
        .contrast(
            &InterventionSpec::AllTreat,
            &InterventionSpec::AllControl,
            &cfg.options,
        )
        .map_err(err)?;

    let mut intervention_records = Vec::new();
    for request in &cfg.interventions {
        let spec = request.resolve(&prepared);
        let record: EstimateResult = if cfg.estimator == "aipw" {
            prepared.aipw(&spec, &cfg.options).map_err(err)?
        } else {
            prepared.tmle(&spec, &cfg.options).map_err(err)?
        };
        let mut value = serde_json::to_value(&record).map_err(|e| e.to_string())?;
        value["requested"] = json!(request.label());
        if !record.is_aers {
            value["note"] = json!(
                "not an (approximate) exposure reallocation scheme; the overall-effect reading does not attach"
            );
        }
        intervention_records.push(value);
    }

    let mut contrast_records = Vec::new();
    for (a, b, label) in &cfg.contrasts {
        let spec_a = a.resolve(&prepared);
        let spec_b = b.resolve(&prepared);
        let c = prepared.contrast(&spec_a, &spec_b, &cfg.options).map_err(err)?;
        let mut value = contrast_json(label, &c);
        if !c.components.0.is_aers || !c.components.1.is_aers {
            value["note"] = json!(
                "at least one side is not an (approximate) exposure reallocation scheme; interpret as a data-adaptive contrast"
            );
        }
        contrast_records.push(value);
    }

    let report = json!({
        "group_id": sample.group_id().unwrap_or("all"),
        "n": sample.n(),
        "a_bar": summary.a_bar,
        "s_n": summary.s_n,
        "k_value": summary.k_value,
        "direct_effect": contrast_json("all_treat vs all_control", &direct),
        "interventions": intervention_records,
        "contrasts": contrast_records,
    });
    let effect = EffectRow {
        group_id: sample.group_id().unwrap_or("all").to_string(),
        psi_hat: direct.estimate,
        variance: direct.se * direct.se,
        k: summary.k_value,
        a_bar: summary.a_bar,
    };
    Ok((report, effect))
}

pub fn run(args: EstimateArgs) -> Result<(), CliError> {
    let (cfg, resolved_file) = resolve(&args)?;
    let samples = load_sample(&args.data, &cfg.schema)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.data.display())))?;

    let mut groups = Vec::new();
    let mut effects = Vec::new();
    let mut errors = Vec::new();
    for sample in &samples {
        let id = sample.group_id().unwrap_or("all").to_string();
        match estimate_group(sample, &cfg) {
            Ok((value, effect)) => {
                groups.push(value);
                effects.push(effect);
            }
            Err(message) => {
                eprintln!("group '{id}': {message}");
                errors.push(json!({ "group_id": id, "error": message }));
            }
        }
    }

    if let Some(path) = &cfg.effects_output {
        let mut csv = String::from("group_id,psi_hat,variance,k,a_bar\n");
        for row in &effects {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                row.group_id, row.psi_hat, row.variance, row.k, row.a_bar
            ));
        }
        std::fs::write(path, csv)
            .map_err(|e| CliError::Estimation(format!("cannot write '{}': {e}", path.display())))?;
    }

    let report = json!({
        "config": {
            "command": "estimate",
            "data": args.data.display().to_string(),
            "resolved": resolved_file.to_ini(),
            "kn": cfg.kn_text,
            "scale": cfg.scale_text,
        },
        "groups": groups,
        "errors": errors,
    });
    let text = serde_json::to_string_pretty(&report).expect("serializable report") + "\n";
    write_output(args.output.as_ref(), &text)?;

    if !errors.is_empty() {
        return Err(CliError::Estimation(format!(
            "{} of {} group(s) failed",
            errors.len(),
            samples.len()
        )));
    }
    Ok(())
}
