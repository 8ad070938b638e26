//! The `simulate` subcommand: runs a grid of simulation cells and emits one
//! CSV row per cell, with the resolved configuration embedded as comment
//! lines.

use std::fmt::Write as _;

use reallocate_core::sim::{cell_seed, run_cells, Estimand, Regime};

use crate::config::{csv_list, ConfigFile};
use crate::{write_output, CliError, SimulateArgs};

const SECTION: &str = "simulate";

struct Grid {
    ns: Vec<usize>,
    betas: Vec<f64>,
    regimes: Vec<Regime>,
    estimands: Vec<Estimand>,
    replicates: usize,
    seed: u64,
    ci_level: f64,
    parallelism: usize,
}

fn resolve(args: &SimulateArgs) -> Result<Grid, CliError> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path).map_err(CliError::Config)?,
        None => ConfigFile::default(),
    };
    let pick = |flag: &Option<String>, key: &str| -> Option<String> {
        flag.clone()
            .or_else(|| file.get(SECTION, key).map(str::to_string))
    };
    let bad = |what: &str, v: &str| CliError::Config(format!("bad {what} '{v}'"));

    let (ns, betas, regimes, estimands) = if args.table1 {
        (
            vec![50usize, 500, 5000],
            vec![0.0, 1.0, 10.0],
            vec![Regime::CorrectBoth, Regime::MisQ, Regime::MisG],
            vec![Estimand::DirectEffect, Estimand::OersOverall],
        )
    } else {
        let ns = pick(&args.ns, "ns").unwrap_or_else(|| "500".into());
        let ns = csv_list(&ns)
            .iter()
            .map(|v| v.parse::<usize>().map_err(|_| bad("n", v)))
            .collect::<Result<Vec<_>, _>>()?;
        let betas = pick(&args.betas, "betas").unwrap_or_else(|| "1".into());
        let betas = csv_list(&betas)
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| bad("beta", v)))
            .collect::<Result<Vec<_>, _>>()?;
        let regimes = pick(&args.regimes, "regimes").unwrap_or_else(|| "correct_both".into());
        let regimes = csv_list(&regimes)
            .iter()
            .map(|v| Regime::parse(v).map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let estimands = pick(&args.estimands, "estimands").unwrap_or_else(|| "direct".into());
        let estimands = csv_list(&estimands)
            .iter()
            .map(|v| Estimand::parse(v).map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        (ns, betas, regimes, estimands)
    };

    let replicates = match args.replicates {
        Some(r) => r,
        None => file
            .get(SECTION, "replicates")
            .map(|v| v.parse().map_err(|_| bad("replicates", v)))
            .transpose()?
            .unwrap_or(1000),
    };
    let seed = match args.seed {
        Some(s) => s,
        None => file
            .get(SECTION, "seed")
            .map(|v| v.parse().map_err(|_| bad("seed", v)))
            .transpose()?
            .unwrap_or(1),
    };
    let ci_level = match args.ci_level {
        Some(l) => l,
        None => file
            .get(SECTION, "ci_level")
            .map(|v| v.parse().map_err(|_| bad("ci_level", v)))
            .transpose()?
            .unwrap_or(0.95),
    };
    let parallelism = match args.parallelism {
        Some(p) => p,
        None => match file.get(SECTION, "parallelism") {
            Some(v) => v.parse().map_err(|_| bad("parallelism", v))?,
            None => std::env::var("REALLOCATE_PARALLELISM")
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(0),
        },
    };
    if replicates == 0 {
        return Err(CliError::Config("replicates must be at least 1".into()));
    }
    Ok(Grid {
        ns,
        betas,
        regimes,
        estimands,
        replicates,
        seed,
        ci_level,
        parallelism,
    })
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let grid = resolve(&args)?;
    if grid.parallelism > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(grid.parallelism)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))?;
    }

    let mut out = String::new();
    let _ = writeln!(out, "# reallocate simulate");
    let _ = writeln!(out, "# seed = {}", grid.seed);
    let _ = writeln!(out, "# replicates = {}", grid.replicates);
    let _ = writeln!(out, "# ci_level = {}", grid.ci_level);
    let _ = writeln!(
        out,
        "# regimes = {}",
        grid.regimes.iter().map(|r| r.label()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "# ns = {}",
        grid.ns.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "# betas = {}",
        grid.betas.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "# estimands = {}",
        grid.estimands.iter().map(|e| e.label()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        out,
        "regime,n,beta,estimand,replicates,bias,mse,coverage,mc_se,truth_mean,truth_sd,failures"
    );

    // Deterministic cell order: regime, n, beta, estimand.
    for &regime in &grid.regimes {
        for &n in &grid.ns {
            for &beta in &grid.betas {
                let seed = cell_seed(grid.seed, regime, n, beta);
                let results = run_cells(
                    n,
                    beta,
                    regime,
                    &grid.estimands,
                    grid.replicates,
                    seed,
                    grid.ci_level,
                )
                .map_err(|e| {
                    CliError::Estimation(format!(
                        "cell {} n={n} beta={beta}: {e}",
                        regime.label()
                    ))
                })?;
                for (estimand, cell) in grid.estimands.iter().zip(&results) {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{:.6e},{:.6e},{:.4},{:.6e},{:.6e},{:.6e},{}",
                        regime.label(),
                        n,
                        beta,
                        estimand.label(),
                        grid.replicates,
                        cell.bias,
                        cell.mse,
                        cell.coverage,
                        cell.mc_se_of_coverage,
                        cell.truth_mean,
                        cell.truth_sd,
                        cell.replicate_failures,
                    );
                }
            }
        }
    }
    write_output(args.output.as_ref(), &out)
}
