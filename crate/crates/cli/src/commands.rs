//! The four subcommands.

use divkde::confidence::{count_inversions, run_coverage, CoveragePlan};
use divkde::divergence::{dalpha_quadrature, kl_plugin, DivergenceEstimate, EstimateSet, McDraws};
use divkde::kernel::{KernelFamily, KernelSpec, ValidationReport};
use divkde::rng::derive_seed;
use divkde::sweep::{fit_rate_for, run_sweep, ErrorMeasure, SweepPlan};
use divkde::{true_divergences, AlphaParam, Kde, TrueDivergences};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{num, write_json, Csv};
use crate::{CliError, Outcome, EXIT_OK, EXIT_VALIDATION};

/// Stream tag for Monte Carlo draws, kept apart from sample seeds.
const MC_TAG: u64 = 0x4d43;

#[derive(Debug, Serialize)]
struct MethodReport {
    #[serde(flatten)]
    values: EstimateSet,
    mass_below_threshold: f64,
    mc_std_error: Option<f64>,
    kl_std_error: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EstimateEntry {
    alpha: f64,
    n: usize,
    h: f64,
    gamma: f64,
    sample_seed: u64,
    quadrature: MethodReport,
    monte_carlo: MethodReport,
}

#[derive(Debug, Serialize)]
struct EstimateReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    truth: Vec<TrueDivergences>,
    estimates: Vec<EstimateEntry>,
}

fn truths(exp: &Experiment) -> Result<Vec<TrueDivergences>, CliError> {
    exp.config
        .alpha
        .iter()
        .map(|a| true_divergences(&exp.f, &exp.g, a.get()).map_err(CliError::from))
        .collect()
}

/// One sample per `n` (replication 0 of the sweep seeds), every `α`, both
/// integration methods.
pub fn cmd_estimate(exp: &Experiment) -> Result<Outcome, CliError> {
    let cfg = &exp.config;
    let mut estimates = Vec::new();
    for &n in &cfg.n_schedule {
        let sample_seed = derive_seed(cfg.seed, &[0, n as u64]);
        let sample = exp.f.draw_sample(n, sample_seed)?;
        let h = cfg.estimate_h(n);
        let kde = Kde::new(&sample, cfg.kernel, h)?;
        let gamma = cfg.threshold.gamma(n)?;
        let mc_seed = derive_seed(cfg.seed, &[MC_TAG, n as u64]);
        let m = cfg.mc_samples;

        let half_q = dalpha_quadrature(&kde, &exp.g, AlphaParam::HALF, gamma, &exp.grid)?;
        let draws = McDraws::new(&kde, &exp.g, m, mc_seed)?;
        let half_mc = draws.dalpha(AlphaParam::HALF, gamma)?;
        let kl_q = kl_plugin(&kde, &exp.g, gamma, &exp.grid)?;
        let kl_mc = draws.kl(gamma)?;
        for &alpha in &cfg.alpha {
            let (q, mc): (DivergenceEstimate, DivergenceEstimate) = if alpha == AlphaParam::HALF {
                (half_q, half_mc)
            } else {
                (
                    dalpha_quadrature(&kde, &exp.g, alpha, gamma, &exp.grid)?,
                    draws.dalpha(alpha, gamma)?,
                )
            };
            estimates.push(EstimateEntry {
                alpha: alpha.get(),
                n,
                h,
                gamma,
                sample_seed,
                quadrature: MethodReport {
                    values: EstimateSet::assemble(&q, &half_q, kl_q)?,
                    mass_below_threshold: q.mass_below_threshold,
                    mc_std_error: None,
                    kl_std_error: None,
                },
                monte_carlo: MethodReport {
                    values: EstimateSet::assemble(&mc, &half_mc, kl_mc.value)?,
                    mass_below_threshold: mc.mass_below_threshold,
                    mc_std_error: mc.mc_std_error,
                    kl_std_error: Some(kl_mc.std_error),
                },
            });
        }
    }
    let report = EstimateReport {
        command: "estimate",
        config: cfg,
        truth: truths(exp)?,
        estimates,
    };
    let path = write_json(&cfg.output("estimate.json"), &report)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        stdout: format!("wrote {}\n", path.display()),
        files: vec![path],
    })
}

pub const SWEEP_HEADER: [&str; 11] = [
    "replication",
    "n",
    "h",
    "d_alpha",
    "err_dalpha",
    "err_renyi",
    "err_tsallis",
    "delta1",
    "delta2",
    "delta3",
    "rate_bound",
];

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum FitEntry {
    Fit(divkde::sweep::RateFit),
    Undefined {
        measure: ErrorMeasure,
        fit_undefined: String,
    },
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    n: usize,
    h_lower: f64,
    h_upper: f64,
    gamma: f64,
    rate_bound: f64,
    mean_sup_dalpha: f64,
    mean_sup_renyi: f64,
    mean_sup_tsallis: f64,
}

#[derive(Debug, Serialize)]
struct RateReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    alpha: f64,
    truth: TrueDivergences,
    per_n: Vec<SummaryRow>,
    fits: Vec<FitEntry>,
    bound_violations: usize,
    max_additivity_residual: f64,
    note: &'static str,
}

/// Sweep for the first configured `α`.
pub fn cmd_sweep(exp: &Experiment) -> Result<Outcome, CliError> {
    let cfg = &exp.config;
    let alpha = cfg.alpha[0];
    let plan = SweepPlan {
        alpha,
        kernel: cfg.kernel,
        range: cfg.bandwidth_range,
        thresholds: cfg.threshold,
        n_schedule: cfg.n_schedule.clone(),
        replications: cfg.replications,
        seed: cfg.seed,
    };
    let result = run_sweep(&exp.f, &exp.g, &plan, &exp.grid)?;

    let mut csv = Csv::new(&SWEEP_HEADER);
    for c in &result.cells {
        csv.row(&[
            c.replication.to_string(),
            c.n.to_string(),
            num(c.h),
            num(c.d_alpha),
            num(c.err_dalpha),
            num(c.err_renyi),
            num(c.err_tsallis),
            num(c.decomposition.delta1),
            num(c.decomposition.delta2),
            num(c.decomposition.delta3),
            num(c.rate_bound),
        ]);
    }
    let csv_path = crate::output::write_text(&cfg.output("sweep.csv"), &csv.into_string())?;

    let fits = [ErrorMeasure::DAlpha, ErrorMeasure::Renyi, ErrorMeasure::Tsallis]
        .into_iter()
        .map(|m| match fit_rate_for(&result, m) {
            Ok(fit) => Ok(FitEntry::Fit(fit)),
            Err(divkde::Error::FitUndefined(why)) => Ok(FitEntry::Undefined {
                measure: m,
                fit_undefined: why,
            }),
            Err(e) => Err(CliError::from(e)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let violations = result.bound_violations();
    let report = RateReport {
        command: "sweep",
        config: cfg,
        alpha: alpha.get(),
        truth: result.truth,
        per_n: result
            .per_n
            .iter()
            .map(|s| SummaryRow {
                n: s.n,
                h_lower: s.h_lower,
                h_upper: s.h_upper,
                gamma: s.gamma,
                rate_bound: s.rate_bound,
                mean_sup_dalpha: s.mean_sup_dalpha,
                mean_sup_renyi: s.mean_sup_renyi,
                mean_sup_tsallis: s.mean_sup_tsallis,
            })
            .collect(),
        fits,
        bound_violations: violations,
        max_additivity_residual: result.max_additivity_residual(),
        note: "theoretical_exponent drops log factors of the envelope",
    };
    let json_path = write_json(&cfg.output("rate_fit.json"), &report)?;
    let mut stdout = format!("wrote {}\nwrote {}\n", csv_path.display(), json_path.display());
    if violations > 0 {
        stdout.push_str(&format!("{violations} decomposition bound violations\n"));
    }
    Ok(Outcome {
        exit_code: if violations == 0 { EXIT_OK } else { EXIT_VALIDATION },
        stdout,
        files: vec![csv_path, json_path],
    })
}

pub const INTERVAL_HEADER: [&str; 10] = [
    "kind",
    "n",
    "h",
    "alpha",
    "estimate",
    "half_width",
    "lower",
    "upper",
    "true_value",
    "covered",
];

#[derive(Debug, Serialize)]
struct CoverageRow {
    n: usize,
    h: f64,
    gamma: f64,
    replications: usize,
    tsallis_covered: usize,
    renyi_covered: usize,
    tsallis_fraction: f64,
    renyi_fraction: f64,
    mean_zeta: f64,
    mean_zeta_error: f64,
}

#[derive(Debug, Serialize)]
struct CiReport<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    alpha: f64,
    truth: TrueDivergences,
    zeta_oracle: f64,
    g_integral: f64,
    gamma_floor: f64,
    per_n: Vec<CoverageRow>,
    zeta_error_inversions: usize,
}

/// Intervals and coverage for the first configured `α`. Summary rows use
/// kind `<kind>_coverage`, mean estimate and width, and the covered
/// fraction in the `covered` column.
pub fn cmd_ci(exp: &Experiment) -> Result<Outcome, CliError> {
    let cfg = &exp.config;
    let alpha = cfg.alpha[0];
    let plan = CoveragePlan {
        alpha,
        kernel: cfg.kernel,
        thresholds: cfg.threshold,
        range: cfg.bandwidth_range,
        bandwidth: cfg.interval_bandwidth,
        n_schedule: cfg.n_schedule.clone(),
        replications: cfg.replications,
        seed: cfg.seed,
        gamma_floor: cfg.gamma_floor,
        inflation: cfg.inflation,
    };
    let res = run_coverage(&exp.f, &exp.g, &plan, &exp.grid)?;

    let mut csv = Csv::new(&INTERVAL_HEADER);
    for s in &res.per_n {
        for r in &s.records {
            for (iv, truth, covered) in [
                (&r.tsallis, res.truth.tsallis, r.tsallis_covered),
                (&r.renyi, res.truth.renyi, r.renyi_covered),
            ] {
                csv.row(&[
                    iv.kind.name().to_string(),
                    iv.n.to_string(),
                    num(iv.h),
                    num(iv.alpha),
                    num(iv.center),
                    num(iv.half_width),
                    num(iv.lower()),
                    num(iv.upper()),
                    num(truth),
                    covered.to_string(),
                ]);
            }
        }
    }
    for s in &res.per_n {
        let k = s.records.len() as f64;
        for (name, pick, truth, fraction) in [
            ("tsallis_coverage", 0usize, res.truth.tsallis, s.tsallis_fraction()),
            ("renyi_coverage", 1, res.truth.renyi, s.renyi_fraction()),
        ] {
            let ivs: Vec<_> = s
                .records
                .iter()
                .map(|r| if pick == 0 { r.tsallis } else { r.renyi })
                .collect();
            let mean = |f: fn(&divkde::confidence::CertaintyInterval) -> f64| ivs.iter().map(f).sum::<f64>() / k;
            csv.row(&[
                name.to_string(),
                s.n.to_string(),
                num(s.h),
                num(alpha.get()),
                num(mean(|i| i.center)),
                num(mean(|i| i.half_width)),
                num(mean(|i| i.lower())),
                num(mean(|i| i.upper())),
                num(truth),
                num(fraction),
            ]);
        }
    }
    let csv_path = crate::output::write_text(&cfg.output("intervals.csv"), &csv.into_string())?;

    let zeta_errors: Vec<f64> = res.per_n.iter().map(|s| s.mean_zeta_error).collect();
    let report = CiReport {
        command: "ci",
        config: cfg,
        alpha: alpha.get(),
        truth: res.truth,
        zeta_oracle: res.zeta_oracle,
        g_integral: res.g_integral,
        gamma_floor: res.gamma_floor,
        per_n: res
            .per_n
            .iter()
            .map(|s| CoverageRow {
                n: s.n,
                h: s.h,
                gamma: s.gamma,
                replications: s.replications,
                tsallis_covered: s.tsallis_covered,
                renyi_covered: s.renyi_covered,
                tsallis_fraction: s.tsallis_fraction(),
                renyi_fraction: s.renyi_fraction(),
                mean_zeta: s.mean_zeta,
                mean_zeta_error: s.mean_zeta_error,
            })
            .collect(),
        zeta_error_inversions: count_inversions(&zeta_errors),
    };
    let json_path = write_json(&cfg.output("ci_summary.json"), &report)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        stdout: format!("wrote {}\nwrote {}\n", csv_path.display(), json_path.display()),
        files: vec![csv_path, json_path],
    })
}

#[derive(Debug, Serialize)]
struct KernelReport {
    passed: bool,
    #[serde(flatten)]
    report: ValidationReport,
}

/// Prints the validation report as JSON; exit 1 when a condition fails.
pub fn cmd_validate_kernel(family: &str, order: u32, dimension: usize, tolerance: f64) -> Result<Outcome, CliError> {
    let family: KernelFamily = family.parse()?;
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(CliError::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    let spec = KernelSpec::new(family, dimension, order)?;
    let report = spec.validate(tolerance)?;
    let passed = report.passed();
    let mut stdout =
        serde_json::to_string_pretty(&KernelReport { passed, report }).map_err(|e| CliError::Numeric(e.to_string()))?;
    stdout.push('\n');
    Ok(Outcome {
        exit_code: if passed { EXIT_OK } else { EXIT_VALIDATION },
        stdout,
        files: Vec::new(),
    })
}
