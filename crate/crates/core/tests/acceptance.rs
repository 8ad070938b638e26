//! Acceptance suite: Monte Carlo reproduction of the published simulation
//! tables plus the structural property battery.
//!
//! One test per criterion; each prints a `criterion N ... PASS/FAIL` line
//! with per-cell detail (visible with `--nocapture` or on failure). The
//! heavy Monte Carlo cells are computed once and shared across criteria;
//! with parallel replicates the whole suite runs in tens of minutes.
//!
//! Published targets are asserted at their stated tolerances, plus the
//! half-ulp of the printed value where the source table's rounding is
//! coarser than the tolerance itself (a value printed as "0.20" only
//! constrains the truth to ±0.005).

use std::sync::OnceLock;

use reallocate_core::linalg::Matrix;
use reallocate_core::rng::Stream;
use reallocate_core::sim::{
    cell_seed, generate_sample, run_cells, Estimand, Regime, SimCellResult,
};
use reallocate_core::*;

const SEED: u64 = 20260808;
const R_MAIN: usize = 5000;
const CP_TOL: f64 = 0.012;
const MSE_REL_TOL: f64 = 0.15;

// ---------------------------------------------------------------------------
// Published table constants. Layout: (n, beta) rows in grid order.
// Per estimand: (bias, mse, cp). `rounding` helpers carry the printed
// half-ulp where needed.

const GRID_NS: [usize; 3] = [50, 500, 5000];
const GRID_BETAS: [f64; 3] = [0.0, 1.0, 10.0];

// CorrectBoth rows, (n, beta) in [n][beta] order: direct effect then OERS.
const TABLE1_CORRECT_DE: [[(f64, f64, f64); 3]; 3] = [
    [(0.010, 0.10, 0.916), (4.6e-3, 0.10, 0.917), (-0.17, 0.16, 0.837)],
    [(2.0e-3, 9.7e-3, 0.955), (-1.8e-3, 9.6e-3, 0.958), (-0.026, 0.011, 0.942)],
    [(1.1e-4, 9.7e-4, 0.958), (8.6e-5, 9.6e-4, 0.961), (-3.0e-3, 9.8e-4, 0.961)],
];
const TABLE1_CORRECT_OERS: [[(f64, f64, f64); 3]; 3] = [
    [(2.2e-4, 0.027, 0.948), (8.4e-5, 0.027, 0.951), (0.026, 0.028, 0.942)],
    [(3.0e-4, 2.7e-3, 0.960), (1.4e-3, 2.7e-3, 0.962), (5.7e-3, 2.7e-3, 0.960)],
    [(-1.5e-4, 2.6e-4, 0.964), (6.9e-5, 2.6e-4, 0.965), (6.3e-4, 2.7e-4, 0.960)],
];

// Mis-specification cells named by the criteria.
const MISQ_DE_500_1_CP: f64 = 0.924;
const MISG_DE_5000_10_CP: f64 = 0.916;
const MIS_CP_TOL: f64 = 0.015;

// Complete-randomization overall effect, CorrectBoth n=500 beta=1.
const CR_500_1: (f64, f64, f64) = (5.1e-4, 2.7e-3, 0.946);

// Target-parameter summary statistics: (mean, mean_rounding, sd) per cell.
const TRUTH_DE: [[(f64, f64, f64); 3]; 3] = [
    [(-1.1e-3, 5e-5, 0.14), (-3.0e-3, 5e-5, 0.071), (-0.032, 5e-4, 0.58)],
    [(1.1e-3, 5e-5, 0.045), (-2.4e-4, 5e-6, 0.023), (-4.9e-3, 5e-5, 0.18)],
    [(-8.8e-5, 5e-7, 0.014), (-6.9e-5, 5e-7, 7.2e-3), (-6.7e-4, 5e-6, 0.057)],
];
const TRUTH_OERS: [[(f64, f64, f64); 3]; 3] = [
    [(0.39, 5e-3, 0.083), (0.19, 5e-3, 0.040), (-1.6, 5e-2, 0.50)],
    [(0.40, 5e-3, 0.026), (0.20, 5e-3, 0.013), (-1.6, 5e-2, 0.16)],
    [(0.40, 5e-3, 8.3e-3), (0.20, 5e-3, 4.1e-3), (-1.6, 5e-2, 0.051)],
];

// ---------------------------------------------------------------------------
// Shared Monte Carlo state.

struct Shared {
    /// CorrectBoth grid: [n][beta] -> [direct, oers, complete_rand].
    correct: Vec<Vec<Vec<SimCellResult>>>,
    misq_de_500_1: SimCellResult,
    misg_de_5000_10: SimCellResult,
    /// Per mis-specified regime: (sum over beta of |bias| at n=50,
    /// same at n=5000) for the OERS estimand.
    trend: Vec<(Regime, f64, f64)>,
}

fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let all = [
            Estimand::DirectEffect,
            Estimand::OersOverall,
            Estimand::CompleteRandOverall,
        ];
        let correct = GRID_NS
            .iter()
            .map(|&n| {
                GRID_BETAS
                    .iter()
                    .map(|&beta| {
                        run_cells(
                            n,
                            beta,
                            Regime::CorrectBoth,
                            &all,
                            R_MAIN,
                            cell_seed(SEED, Regime::CorrectBoth, n, beta),
                            0.95,
                        )
                        .expect("cell runs")
                    })
                    .collect()
            })
            .collect();

        let misq_de_500_1 = run_cells(
            500,
            1.0,
            Regime::MisQ,
            &[Estimand::DirectEffect],
            R_MAIN,
            cell_seed(SEED, Regime::MisQ, 500, 1.0),
            0.95,
        )
        .expect("misq cell")
        .remove(0);
        let misg_de_5000_10 = run_cells(
            5000,
            10.0,
            Regime::MisG,
            &[Estimand::DirectEffect],
            R_MAIN,
            cell_seed(SEED, Regime::MisG, 5000, 10.0),
            0.95,
        )
        .expect("misg cell")
        .remove(0);

        // Double-robustness trend cells: |bias| of the OERS estimand must
        // shrink from n=50 to n=5000 in each mis-specified regime. Small-n
        // cells are cheap, so they run at a larger R; the criterion asks
        // for R >= 1000.
        let trend = [Regime::MisQ, Regime::MisG]
            .into_iter()
            .map(|regime| {
                let sum_abs_bias = |n: usize, r: usize| -> f64 {
                    GRID_BETAS
                        .iter()
                        .map(|&beta| {
                            run_cells(
                                n,
                                beta,
                                regime,
                                &[Estimand::OersOverall],
                                r,
                                cell_seed(SEED ^ 0xABCD, regime, n, beta),
                                0.95,
                            )
                            .expect("trend cell")[0]
                                .bias
                                .abs()
                        })
                        .sum()
                };
                (regime, sum_abs_bias(50, 10_000), sum_abs_bias(5000, 1000))
            })
            .collect();

        Shared {
            correct,
            misq_de_500_1,
            misg_de_5000_10,
            trend,
        }
    })
}

/// Accumulates named checks for one criterion and prints the summary line.
struct Criterion {
    name: &'static str,
    total: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            total: 0,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.total += 1;
        self.notes.push(format!("  [{}] {detail}", if ok { "ok" } else { "FAIL" }));
        if !ok {
            self.failures.push(detail);
        }
    }

    fn finish(self) {
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "criterion {}: {status} ({}/{} checks)",
            self.name,
            self.total - self.failures.len(),
            self.total
        );
        for note in &self.notes {
            println!("{note}");
        }
        assert!(
            self.failures.is_empty(),
            "criterion {} failed {}/{} checks:\n{}",
            self.name,
            self.failures.len(),
            self.total,
            self.failures.join("\n")
        );
    }
}

#[test]
fn criterion_1_table1_correct_both() {
    let shared = shared();
    let mut c = Criterion::new("1 (Table 1 reproduction, CorrectBoth, R=5000)");
    for (i, &n) in GRID_NS.iter().enumerate() {
        for (j, &beta) in GRID_BETAS.iter().enumerate() {
            for (estimand, table, idx) in [
                ("direct", &TABLE1_CORRECT_DE, 0usize),
                ("oers", &TABLE1_CORRECT_OERS, 1),
            ] {
                let (_, mse_t, cp_t) = table[i][j];
                let cell = &shared.correct[i][j][idx];
                c.check(
                    (cell.coverage - cp_t).abs() <= CP_TOL,
                    format!(
                        "{estimand} n={n} beta={beta}: CP {:.4} vs {cp_t} (tol {CP_TOL})",
                        cell.coverage
                    ),
                );
                c.check(
                    (cell.mse / mse_t - 1.0).abs() <= MSE_REL_TOL,
                    format!(
                        "{estimand} n={n} beta={beta}: MSE {:.3e} vs {mse_t:.3e} (rel {:+.1}%)",
                        cell.mse,
                        (cell.mse / mse_t - 1.0) * 100.0
                    ),
                );
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_2_misspecification_regimes() {
    let shared = shared();
    let mut c = Criterion::new("2 (mis-specification regimes)");
    let misq = &shared.misq_de_500_1;
    c.check(
        (misq.coverage - MISQ_DE_500_1_CP).abs() <= MIS_CP_TOL,
        format!(
            "MisQ n=500 beta=1 direct: CP {:.4} vs {MISQ_DE_500_1_CP} (tol {MIS_CP_TOL})",
            misq.coverage
        ),
    );
    let misg = &shared.misg_de_5000_10;
    c.check(
        (misg.coverage - MISG_DE_5000_10_CP).abs() <= MIS_CP_TOL,
        format!(
            "MisG n=5000 beta=10 direct: CP {:.4} vs {MISG_DE_5000_10_CP} (tol {MIS_CP_TOL})",
            misg.coverage
        ),
    );
    for (regime, small, large) in &shared.trend {
        c.check(
            large < small,
            format!(
                "double-robustness trend {:?}: sum |bias| OERS n=5000 {:.2e} < n=50 {:.2e}",
                regime, large, small
            ),
        );
    }
    c.finish();
}

#[test]
fn criterion_3_complete_randomization_cell() {
    let shared = shared();
    let cell = &shared.correct[1][1][2]; // n=500, beta=1, complete_rand
    let (bias_t, mse_t, cp_t) = CR_500_1;
    let mut c = Criterion::new("3 (complete-randomization overall effect, n=500 beta=1)");
    // Bias targets carry Monte Carlo noise on both sides plus the table's
    // printed rounding.
    let bias_tol = 4.0 * (2.0 * cell.mse / R_MAIN as f64).sqrt() + 5e-5;
    c.check(
        (cell.bias - bias_t).abs() <= bias_tol,
        format!("bias {:+.2e} vs {bias_t:+.2e} (tol {bias_tol:.2e})", cell.bias),
    );
    c.check(
        (cell.mse / mse_t - 1.0).abs() <= MSE_REL_TOL,
        format!(
            "MSE {:.3e} vs {mse_t:.3e} (rel {:+.1}%)",
            cell.mse,
            (cell.mse / mse_t - 1.0) * 100.0
        ),
    );
    c.check(
        (cell.coverage - cp_t).abs() <= CP_TOL,
        format!("CP {:.4} vs {cp_t} (tol {CP_TOL})", cell.coverage),
    );
    c.finish();
}

#[test]
fn criterion_4_target_parameter_distribution() {
    let shared = shared();
    let mut c = Criterion::new("4 (target-parameter summary statistics)");
    let r = R_MAIN as f64;
    for (i, &n) in GRID_NS.iter().enumerate() {
        for (j, &beta) in GRID_BETAS.iter().enumerate() {
            for (estimand, table, idx) in [
                ("direct", &TRUTH_DE, 0usize),
                ("oers", &TRUTH_OERS, 1),
            ] {
                let (mean_t, mean_round, sd_t) = table[i][j];
                // Both estimand cells share the same replicate truths per
                // estimand definition; take them from the matching cell.
                let cell = &shared.correct[i][j][idx];
                let mean_tol = 3.0 * cell.truth_sd / r.sqrt() + mean_round;
                c.check(
                    (cell.truth_mean - mean_t).abs() <= mean_tol,
                    format!(
                        "{estimand} n={n} beta={beta}: truth mean {:+.4e} vs {mean_t:+.2e} (tol {mean_tol:.2e})",
                        cell.truth_mean
                    ),
                );
                c.check(
                    (cell.truth_sd / sd_t - 1.0).abs() <= 0.10,
                    format!(
                        "{estimand} n={n} beta={beta}: truth sd {:.3e} vs {sd_t:.3e} (rel {:+.1}%)",
                        cell.truth_sd,
                        (cell.truth_sd / sd_t - 1.0) * 100.0
                    ),
                );
            }
        }
    }
    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 5: structural property suite (runs in seconds).

fn fuzz_sample(stream: &mut Stream) -> Sample {
    loop {
        let n = 4 + (stream.next_u64() % 37) as usize;
        let scale = 10f64.powf(stream.uniform() * 3.0 - 1.0);
        let shift = (stream.uniform() - 0.5) * 20.0;
        let w: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
        let a: Vec<f64> = (0..n)
            .map(|_| if stream.bernoulli(0.5) { 1.0 } else { 0.0 })
            .collect();
        let y: Vec<f64> = (0..n).map(|_| stream.normal() * scale + shift).collect();
        let exposed = a.iter().filter(|&&v| v == 1.0).count();
        if exposed == 0 || exposed == n {
            continue;
        }
        let cov = Matrix::from_rows(w.into_iter().map(|v| vec![v]).collect());
        return Sample::new(cov, vec!["w".into()], a, y).unwrap();
    }
}

fn fuzz_intervention(stream: &mut Stream) -> InterventionSpec {
    match stream.next_u64() % 5 {
        0 => InterventionSpec::AllTreat,
        1 => InterventionSpec::AllControl,
        2 => InterventionSpec::CompleteRandomization,
        3 => InterventionSpec::RankTopS {
            score: "w".into(),
            direction: Direction::Descending,
        },
        _ => InterventionSpec::bernoulli(0.2 + 0.6 * stream.uniform()).unwrap(),
    }
}

#[test]
fn criterion_5_property_suite() {
    let mut c = Criterion::new("5 (property suite)");
    let kn = KnSpec::Identity;
    let options = EstimatorOptions::default();

    // (a) + (b): EIC solved to 1e-8 and the substitution estimate inside the
    // outcome bounds on 1000 randomized fuzz inputs.
    let q_specs = [
        ModelSpec::parse("y ~ 1", "a", "y").unwrap(),
        ModelSpec::parse("y ~ 1 + w", "a", "y").unwrap(),
        ModelSpec::parse("y ~ 1 + w + a", "a", "y").unwrap(),
        ModelSpec::parse("y ~ 1 + w + a + w:a", "a", "y").unwrap(),
    ];
    let g_specs = [
        ModelSpec::parse("a ~ 1", "a", "y").unwrap(),
        ModelSpec::parse("a ~ 1 + w", "a", "y").unwrap(),
        ModelSpec::parse("a ~ 1 + w [probit]", "a", "y").unwrap(),
    ];
    let mut stream = Stream::new(SEED ^ 0xF0F0);
    let mut ran = 0usize;
    let mut bounds_ok = true;
    let mut eic_ok = true;
    let mut attempts = 0usize;
    while ran < 1000 && attempts < 4000 {
        attempts += 1;
        let sample = fuzz_sample(&mut stream);
        let q = &q_specs[(stream.next_u64() % 4) as usize];
        let g = &g_specs[(stream.next_u64() % 3) as usize];
        let spec = fuzz_intervention(&mut stream);
        let res = match tmle(&sample, &kn, &spec, q, g, &options) {
            Ok(r) => r,
            Err(_) => continue, // rejected draws (separation etc.) are fine
        };
        ran += 1;
        let lo = sample.outcome().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sample.outcome().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(res.psi >= lo - 1e-9 && res.psi <= hi + 1e-9) {
            bounds_ok = false;
        }
        if res.eic_residual > 1e-8 {
            eic_ok = false;
        }
    }
    c.check(
        ran >= 1000,
        format!("fuzz corpus: {ran} successful TMLE runs (>= 1000)"),
    );
    c.check(eic_ok, "EIC score |n^-1 sum H (y - q*)| <= 1e-8 on every fuzz run".into());
    c.check(bounds_ok, "TMLE psi within [min Y, max Y] on every fuzz run".into());

    // A-IPW may leave the bounds; the pair of behaviors is itself the test.
    // Forced mismatch: outcome regression predicts 0.5 everywhere, huge
    // weights on one exposed outlier.
    {
        let h = [40.0, 0.0, 0.0, 0.0];
        let y = [1.0, 0.0, 0.0, 0.0];
        let q = [0.5; 4];
        let probs = [1.0; 4];
        let psi = estimators::aipw_value(&h, &y, &q, &q, &q, &probs);
        c.check(
            psi > 1.0,
            format!("A-IPW can exit the outcome bounds (forced case: {psi:.2})"),
        );
    }

    // (c) Brute-force plug-in oracle: all n <= 6 discrete-W instances.
    let mut plug_ok = true;
    let mut instances = 0usize;
    for n in 2..=6usize {
        for mask in 0u32..(1 << n) {
            let mut s = Stream::for_replicate(SEED, u64::from(mask), n as u64);
            let q0: Vec<f64> = (0..n).map(|_| s.uniform()).collect();
            let q1: Vec<f64> = (0..n).map(|_| s.uniform()).collect();
            let probs: Vec<f64> = (0..n)
                .map(|i| {
                    // Mix of degenerate and interior marginals keyed by the
                    // discrete W pattern in `mask`.
                    if mask & (1 << i) != 0 {
                        1.0
                    } else {
                        s.uniform()
                    }
                })
                .collect();
            let mut oracle = 0.0;
            for i in 0..n {
                for a in 0..2 {
                    let qv = if a == 1 { q1[i] } else { q0[i] };
                    let gv = if a == 1 { probs[i] } else { 1.0 - probs[i] };
                    oracle += qv * gv;
                }
            }
            oracle /= n as f64;
            if (plug_in_mean(&q0, &q1, &probs) - oracle).abs() > 1e-12 {
                plug_ok = false;
            }
            instances += 1;
        }
    }
    c.check(
        plug_ok,
        format!("plug-in sum equals explicit double loop on {instances} discrete instances (1e-12)"),
    );

    // (d) A-IPW reduces to the IPW mean when the outcome regression is
    // forced to zero.
    {
        let mut s = Stream::new(77);
        let sample = fuzz_sample(&mut s);
        let n = sample.n();
        let summary = exposure_summary(&sample, &kn).unwrap();
        let g = fit_glm(&sample, &g_specs[1]).unwrap();
        let m = marginalize(&InterventionSpec::AllTreat, &sample, &summary).unwrap();
        let h = clever_covariate(&m, &g, &sample, options.truncation).unwrap();
        let zeros = vec![0.0; n];
        let psi = estimators::aipw_value(&h, sample.outcome(), &zeros, &zeros, &zeros, &m.probs_treat);
        let ipw: f64 = h
            .iter()
            .zip(sample.outcome())
            .map(|(hi, yi)| hi * yi)
            .sum::<f64>()
            / n as f64;
        c.check(
            (psi - ipw).abs() <= 1e-12,
            format!("A-IPW with Q == 0 equals the IPW mean ({psi:.6} vs {ipw:.6})"),
        );
    }

    // (e) MSM closed form vs iterative minimization (1e-8) and vs an
    // explicit normal-equations oracle (1e-10).
    {
        let effects: Vec<GroupEffect> = (0..6)
            .map(|i| GroupEffect {
                group_id: format!("g{i}"),
                psi_hat: 0.05 + 0.04 * (i as f64) - 0.01 * (i as f64).powi(2) / 3.0,
                variance: 0.01 + 0.003 * i as f64,
                modifiers: vec![
                    ("k".into(), 0.15 + 0.08 * i as f64),
                    ("G".into(), f64::from(i % 2 == 0)),
                ],
            })
            .collect();
        let terms = parse_msm_formula("1 + G + k").unwrap();
        let fit = fit_msm(&effects, &terms, Weighting::InverseVariance).unwrap();
        let weights: Vec<f64> = effects.iter().map(|e| 1.0 / e.variance).collect();
        let x = build_design(&effects, &terms).unwrap();

        // Normal equations by explicit loops + Gauss-Jordan.
        let p = terms.len();
        let mut aug = vec![vec![0.0; p + 1]; p];
        for i in 0..effects.len() {
            for r in 0..p {
                for col in 0..p {
                    aug[r][col] += weights[i] * x.get(i, r) * x.get(i, col);
                }
                aug[r][p] += weights[i] * x.get(i, r) * effects[i].psi_hat;
            }
        }
        for col in 0..p {
            let pivot = (col..p)
                .max_by(|&u, &v| aug[u][col].abs().total_cmp(&aug[v][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            let pv = aug[col][col];
            for cc in col..=p {
                aug[col][cc] /= pv;
            }
            for rr in 0..p {
                if rr != col {
                    let f = aug[rr][col];
                    for cc in col..=p {
                        aug[rr][cc] -= f * aug[col][cc];
                    }
                }
            }
        }
        let max_ne_diff = (0..p)
            .map(|r| (fit.beta[r] - aug[r][p]).abs())
            .fold(0.0f64, f64::max);
        c.check(
            max_ne_diff <= 1e-10,
            format!("MSM closed form vs normal-equations oracle: max diff {max_ne_diff:.2e}"),
        );

        // Steepest descent with exact line search on the quadratic loss.
        let mut beta = vec![0.0; p];
        for _ in 0..300_000 {
            let mut grad = vec![0.0; p];
            for i in 0..effects.len() {
                let pred: f64 = (0..p).map(|k| x.get(i, k) * beta[k]).sum();
                let resid = effects[i].psi_hat - pred;
                for k in 0..p {
                    grad[k] -= weights[i] * x.get(i, k) * resid;
                }
            }
            let gnorm: f64 = grad.iter().map(|g| g * g).sum();
            if gnorm < 1e-28 {
                break;
            }
            let mut curvature = 0.0;
            for i in 0..effects.len() {
                let xg: f64 = (0..p).map(|k| x.get(i, k) * grad[k]).sum();
                curvature += weights[i] * xg * xg;
            }
            let step = gnorm / curvature;
            for k in 0..p {
                beta[k] -= step * grad[k];
            }
        }
        let max_it_diff = (0..p)
            .map(|r| (fit.beta[r] - beta[r]).abs())
            .fold(0.0f64, f64::max);
        c.check(
            max_it_diff <= 1e-8,
            format!("MSM closed form vs iterative loss minimization: max diff {max_it_diff:.2e}"),
        );
    }

    // (f) Permutation invariance of the estimators at 1e-10.
    {
        let mut s = Stream::new(31);
        let sample = loop {
            let cand = fuzz_sample(&mut s);
            if cand.n() >= 12 {
                break cand;
            }
        };
        let mut perm: Vec<usize> = (0..sample.n()).collect();
        for i in (1..perm.len()).rev() {
            let j = (s.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let permuted = sample.permute_rows(&perm);
        let q = &q_specs[3];
        let g = &g_specs[1];
        let mut max_diff = 0.0f64;
        for spec in [
            InterventionSpec::AllTreat,
            InterventionSpec::CompleteRandomization,
            InterventionSpec::RankTopS {
                score: "w".into(),
                direction: Direction::Descending,
            },
        ] {
            let t1 = tmle(&sample, &kn, &spec, q, g, &options).unwrap();
            let t2 = tmle(&permuted, &kn, &spec, q, g, &options).unwrap();
            max_diff = max_diff
                .max((t1.psi - t2.psi).abs())
                .max((t1.se_conditional - t2.se_conditional).abs());
            let a1 = aipw(&sample, &kn, &spec, q, g, &options).unwrap();
            let a2 = aipw(&permuted, &kn, &spec, q, g, &options).unwrap();
            max_diff = max_diff.max((a1.psi - a2.psi).abs());
        }
        let d1 = direct_effect(&sample, &kn, q, g, &options).unwrap();
        let d2 = direct_effect(&permuted, &kn, q, g, &options).unwrap();
        max_diff = max_diff.max((d1.estimate - d2.estimate).abs());
        c.check(
            max_diff <= 1e-10,
            format!("row-permutation invariance of tmle/aipw/direct effect: max diff {max_diff:.2e}"),
        );
    }

    // Clever-covariate mean under the correct g and an ERS drifts to 1.
    {
        let mut s = Stream::new(123);
        let (sample, _) = generate_sample(50_000, 1.0, &mut s).unwrap();
        let summary = exposure_summary(&sample, &kn).unwrap();
        let g = fit_glm(&sample, &g_specs[1]).unwrap();
        let m = marginalize(&InterventionSpec::CompleteRandomization, &sample, &summary).unwrap();
        let h = clever_covariate(&m, &g, &sample, options.truncation).unwrap();
        let n = h.len() as f64;
        let mean = h.iter().sum::<f64>() / n;
        let sd = (h.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let tol = 3.0 * sd / n.sqrt();
        c.check(
            (mean - 1.0).abs() <= tol,
            format!("mean clever covariate under correct g + ERS: {mean:.5} (tol {tol:.1e})"),
        );
    }

    // (g) Determinism of a simulation cell across thread-pool sizes.
    {
        let run_with = |threads: usize| -> SimCellResult {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    run_cells(
                        80,
                        1.0,
                        Regime::CorrectBoth,
                        &[Estimand::OersOverall],
                        64,
                        SEED ^ 0x7777,
                        0.95,
                    )
                    .unwrap()
                    .remove(0)
                })
        };
        let serial = run_with(1);
        let parallel = run_with(4);
        let identical = serial.bias.to_bits() == parallel.bias.to_bits()
            && serial.mse.to_bits() == parallel.mse.to_bits()
            && serial.coverage.to_bits() == parallel.coverage.to_bits()
            && serial.truth_mean.to_bits() == parallel.truth_mean.to_bits()
            && serial.truth_sd.to_bits() == parallel.truth_sd.to_bits();
        c.check(identical, "simulation cell bit-identical at 1 and 4 threads".into());
    }

    c.finish();
}

// ---------------------------------------------------------------------------
// Criterion 6: GLM correctness against independent oracles.

/// Newton-Raphson on the exact Bernoulli log-likelihood with loop-built
/// gradient/information and Gaussian elimination; shares no code with the
/// IRLS implementation.
fn newton_oracle(x: &[Vec<f64>], y: &[f64], probit: bool, steps: usize) -> Vec<f64> {
    let n = x.len();
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..steps {
        let mut grad = vec![0.0; p];
        let mut info = vec![vec![0.0; p]; p];
        for i in 0..n {
            let eta: f64 = (0..p).map(|j| x[i][j] * beta[j]).sum();
            let (gi, hi) = if probit {
                let m = math::normal_cdf(eta).clamp(1e-12, 1.0 - 1e-12);
                let d = math::normal_pdf(eta);
                (d * (y[i] - m) / (m * (1.0 - m)), d * d / (m * (1.0 - m)))
            } else {
                let m = math::expit(eta);
                (y[i] - m, m * (1.0 - m))
            };
            for j in 0..p {
                grad[j] += x[i][j] * gi;
                for k in 0..p {
                    info[j][k] += x[i][j] * x[i][k] * hi;
                }
            }
        }
        let mut aug = info;
        for j in 0..p {
            aug[j].push(grad[j]);
        }
        for col in 0..p {
            let pivot = (col..p)
                .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            for r in (col + 1)..p {
                let f = aug[r][col] / aug[col][col];
                for cc in col..=p {
                    aug[r][cc] -= f * aug[col][cc];
                }
            }
        }
        let mut delta = vec![0.0; p];
        for r in (0..p).rev() {
            let mut s = aug[r][p];
            for cc in (r + 1)..p {
                s -= aug[r][cc] * delta[cc];
            }
            delta[r] = s / aug[r][r];
        }
        for j in 0..p {
            beta[j] += delta[j];
        }
    }
    beta
}

#[test]
fn criterion_6_glm_oracles() {
    let mut c = Criterion::new("6 (GLM correctness)");
    let w = [
        -1.32, 0.47, 0.91, -0.08, 1.66, -2.10, 0.33, 0.05, -0.77, 1.12, 0.58, -0.41, 1.95, -1.03,
        0.22, 0.69, -0.15, -0.88, 1.41, 0.02,
    ];
    let a = [
        0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0,
        1.0, 0.0,
    ];
    let y = [
        0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0,
        1.0, 0.0,
    ];
    let cov = Matrix::from_rows(w.iter().map(|&v| vec![v]).collect());
    let sample = Sample::new(cov, vec!["w".into()], a.to_vec(), y.to_vec()).unwrap();
    let design: Vec<Vec<f64>> = w.iter().map(|&v| vec![1.0, v]).collect();

    for (formula, probit, response) in [
        ("a ~ 1 + w", false, &a),
        ("a ~ 1 + w [probit]", true, &a),
        ("y ~ 1 + w", false, &y),
        ("y ~ 1 + w [probit]", true, &y),
    ] {
        let spec = ModelSpec::parse(formula, "a", "y").unwrap();
        let fit = fit_glm(&sample, &spec).unwrap();
        let oracle = newton_oracle(&design, response.as_slice(), probit, 30);
        let max_diff = fit
            .coefficients
            .iter()
            .zip(&oracle)
            .map(|(b, o)| (b - o).abs())
            .fold(0.0f64, f64::max);
        c.check(
            fit.converged && max_diff <= 1e-8,
            format!("'{formula}' vs independent Newton oracle: max diff {max_diff:.2e}"),
        );
    }

    // Intercept-only fits return link(mean) of the response.
    let mean_y: f64 = y.iter().sum::<f64>() / 20.0;
    let logit_fit = fit_glm(&sample, &ModelSpec::parse("y ~ 1", "a", "y").unwrap()).unwrap();
    c.check(
        (logit_fit.coefficients[0] - math::logit(mean_y)).abs() <= 1e-9,
        format!(
            "intercept-only logit coefficient {:.10} = logit(mean) {:.10}",
            logit_fit.coefficients[0],
            math::logit(mean_y)
        ),
    );
    let ident_fit =
        fit_glm(&sample, &ModelSpec::parse("y ~ 1 [identity]", "a", "y").unwrap()).unwrap();
    c.check(
        (ident_fit.coefficients[0] - mean_y).abs() <= 1e-12,
        format!(
            "intercept-only identity coefficient {:.12} = mean {mean_y:.12}",
            ident_fit.coefficients[0]
        ),
    );
    c.finish();
}
