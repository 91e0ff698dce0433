//! Bandwidth sweeps: the estimator over a geometric grid of bandwidths in
//! `[h′_n, h″_n]`, the stochastic/bias split of its error, and log-log fits
//! of the sup-over-bandwidth error against `n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{true_divergences, AnalyticDensity, TrueDivergences};
use crate::divergence::{thresholded_sum, AlphaParam, ThresholdSchedule};
use crate::error::{Error, Result};
use crate::kde::{smoothed_density_grid, sup_deviation, DensityEvaluator, EvaluationGrid, Kde, SampleMatrix};
use crate::kernel::KernelSpec;
use crate::rng::derive_seed;

/// Slack allowed on the `Δ` bound checks.
pub const BOUND_SLACK: f64 = 1e-6;

/// `h′_n = c_lower (log n / n)^{exponent_lower}`,
/// `h″_n = min(1, c_upper n^{−exponent_upper})`, with `grid_size` bandwidths
/// spaced geometrically between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRange {
    pub c_lower: f64,
    pub exponent_lower: f64,
    pub c_upper: f64,
    pub exponent_upper: f64,
    pub grid_size: usize,
}

impl BandwidthRange {
    /// `h′_n = 0.15 (log n/n)^{1/(d+2)}`, `h″_n = 2 n^{−1/(d+4)}`, 12 bandwidths.
    pub fn default_for(d: usize) -> Self {
        Self {
            c_lower: 0.15,
            exponent_lower: 1.0 / (d as f64 + 2.0),
            c_upper: 2.0,
            exponent_upper: 1.0 / (d as f64 + 4.0),
            grid_size: 12,
        }
    }

    fn check_constants(&self) -> Result<()> {
        for (name, v) in [("c_lower", self.c_lower), ("c_upper", self.c_upper)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("bandwidth {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("exponent_lower", self.exponent_lower),
            ("exponent_upper", self.exponent_upper),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("bandwidth {name} must lie in (0, 1), got {v}")));
            }
        }
        if self.grid_size == 0 {
            return Err(Error::Config("bandwidth grid_size must be positive".into()));
        }
        Ok(())
    }

    pub fn lower(&self, n: usize) -> f64 {
        let n = n as f64;
        self.c_lower * (n.ln() / n).powf(self.exponent_lower)
    }

    pub fn upper(&self, n: usize) -> f64 {
        (self.c_upper * (n as f64).powf(-self.exponent_upper)).min(1.0)
    }

    /// Checks `h′_n < h″_n ≤ 1` at every `n ≥ 3` of the schedule and that
    /// `n h′_n / log n` grows along the sorted schedule.
    pub fn validate(&self, n_schedule: &[usize]) -> Result<()> {
        self.check_constants()?;
        if n_schedule.is_empty() {
            return Err(Error::Config("n_schedule is empty".into()));
        }
        let mut sorted = n_schedule.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut last = f64::NEG_INFINITY;
        for &n in &sorted {
            if n < 3 {
                return Err(Error::Config(format!(
                    "n = {n} is too small: log log n must be positive (need n >= 3)"
                )));
            }
            let (lo, hi) = (self.lower(n), self.upper(n));
            if !(lo < hi) {
                return Err(Error::Config(format!(
                    "infeasible bandwidth range at n = {n}: h' = {lo} is not below h'' = {hi}"
                )));
            }
            let growth = n as f64 * lo / (n as f64).ln();
            if !(growth > last) {
                return Err(Error::Config(format!(
                    "n h'_n / log n does not grow along the schedule (at n = {n})"
                )));
            }
            last = growth;
        }
        Ok(())
    }

    /// Geometric grid from `h′_n` to `h″_n`; a single bandwidth is `h″_n`.
    pub fn bandwidths(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = (self.lower(n), self.upper(n));
        if self.grid_size == 1 {
            return vec![hi];
        }
        let steps = (self.grid_size - 1) as f64;
        let ratio = (hi / lo).ln();
        (0..self.grid_size)
            .map(|i| {
                if i + 1 == self.grid_size {
                    hi
                } else {
                    lo * (ratio * i as f64 / steps).exp()
                }
            })
            .collect()
    }

    /// `((log(1/h′) ∨ log log n)/(n h′))^{α/2} ∨ γ^α ∨ h″^{α/d}`.
    pub fn rate_bound(&self, n: usize, alpha: f64, gamma: f64, d: usize) -> f64 {
        let lo = self.lower(n);
        let nf = n as f64;
        let log_term = (1.0 / lo).ln().max(nf.ln().ln());
        let stochastic = (log_term / (nf * lo)).powf(alpha / 2.0);
        stochastic
            .max(gamma.powf(alpha))
            .max(self.upper(n).powf(alpha / d as f64))
    }

    /// n-exponent of the stochastic envelope term with log factors dropped.
    pub fn theoretical_exponent(&self, alpha: f64) -> f64 {
        -alpha / 2.0 * (1.0 - self.exponent_lower)
    }
}

/// Everything a sweep needs besides the two densities and the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub alpha: AlphaParam,
    pub kernel: KernelSpec,
    pub range: BandwidthRange,
    pub thresholds: ThresholdSchedule,
    pub n_schedule: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

/// The stochastic and bias terms of one cell, plus the grid bounds they are
/// checked against.
///
/// `delta1 + delta2 + delta3 = d_hat − d_grid`, where `d_grid` is the grid
/// sum of `f^α g^{1−α}`. `delta3` carries the sign that makes this sum
/// exact, i.e. it is minus the mass of `f^α g^{1−α}` over `A^c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub d_hat: f64,
    pub centered: f64,
    pub d_grid: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// `max |f̂ − E f̂|` over the grid nodes.
    pub sup_stochastic: f64,
    /// `max |E f̂ − f|` over the grid nodes.
    pub sup_bias: f64,
    /// Grid sum of `g^{1−α}`.
    pub g_integral: f64,
    pub delta1_bound: f64,
    pub delta2_bound: f64,
    pub delta3_bound: f64,
    pub mass_below_threshold: f64,
}

impl Decomposition {
    pub fn additivity_residual(&self) -> f64 {
        (self.delta1 + self.delta2 + self.delta3 - (self.d_hat - self.d_grid)).abs()
    }

    /// Names of the `Δ` bounds this cell violates.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.delta1.abs() > self.delta1_bound + BOUND_SLACK {
            out.push("delta1");
        }
        if self.delta2.abs() > self.delta2_bound + BOUND_SLACK {
            out.push("delta2");
        }
        if self.delta3.abs() > self.delta3_bound + BOUND_SLACK {
            out.push("delta3");
        }
        out
    }
}

/// Grid arrays shared by every cell with the same `(f, g, α)`.
struct GridFields {
    weights: Vec<f64>,
    f_values: Vec<f64>,
    g_values: Vec<f64>,
    g_pow: Vec<f64>,
    f_pow: Vec<f64>,
    d_grid: f64,
    g_integral: f64,
}

impl GridFields {
    fn new(f: &AnalyticDensity, g: &AnalyticDensity, alpha: f64, grid: &EvaluationGrid) -> Result<Self> {
        let weights = grid.weights();
        let f_values = f.evaluate_grid(grid);
        let g_values = g.evaluate_grid(grid);
        let g_pow: Vec<f64> = g_values.iter().map(|v| v.powf(1.0 - alpha)).collect();
        let f_pow: Vec<f64> = f_values.iter().map(|v| v.powf(alpha)).collect();
        let d_grid = weights
            .iter()
            .zip(&f_pow)
            .zip(&g_pow)
            .map(|((w, a), b)| w * a * b)
            .sum();
        let g_integral: f64 = weights.iter().zip(&g_pow).map(|(w, b)| w * b).sum();
        if !g_integral.is_finite() {
            return Err(Error::Numeric("grid integral of g^(1-alpha) is not finite".into()));
        }
        Ok(Self {
            weights,
            f_values,
            g_values,
            g_pow,
            f_pow,
            d_grid,
            g_integral,
        })
    }

    fn decompose(&self, fhat: &[f64], ef: &[f64], alpha: f64, gamma: f64) -> Result<Decomposition> {
        let (d_hat, mass) = thresholded_sum(fhat, &self.g_values, &self.weights, alpha, gamma)?;
        let mut centered = 0.0;
        let mut delta2 = 0.0;
        let mut delta3 = 0.0;
        for i in 0..self.weights.len() {
            let wg = self.weights[i] * self.g_pow[i];
            if fhat[i] >= gamma {
                let e = ef[i].powf(alpha);
                centered += wg * e;
                delta2 += wg * (e - self.f_pow[i]);
            } else {
                delta3 -= wg * self.f_pow[i];
            }
        }
        let sup_stochastic = sup_deviation(fhat, ef)?;
        let sup_bias = sup_deviation(ef, &self.f_values)?;
        let out = Decomposition {
            d_hat,
            centered,
            d_grid: self.d_grid,
            delta1: d_hat - centered,
            delta2,
            delta3,
            sup_stochastic,
            sup_bias,
            g_integral: self.g_integral,
            delta1_bound: sup_stochastic.powf(alpha) * self.g_integral,
            delta2_bound: sup_bias.powf(alpha) * self.g_integral,
            delta3_bound: (sup_bias.powf(alpha) + gamma.powf(alpha)) * self.g_integral,
            mass_below_threshold: mass,
        };
        if [out.centered, out.delta1, out.delta2, out.delta3]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::Numeric("non-finite decomposition term".into()));
        }
        Ok(out)
    }
}

/// `Δ₁`, `Δ₂`, `Δ₃` for one realized sample and bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn decompose_error(
    f: &AnalyticDensity,
    g: &AnalyticDensity,
    alpha: AlphaParam,
    kernel: &KernelSpec,
    sample: &SampleMatrix,
    h: f64,
    gamma: f64,
    grid: &EvaluationGrid,
) -> Result<Decomposition> {
    if !(gamma >= 0.0) {
        return Err(Error::Parameter(format!("threshold must be nonnegative, got {gamma}")));
    }
    let fields = GridFields::new(f, g, alpha.get(), grid)?;
    let kde = Kde::new(sample, *kernel, h)?;
    let fhat = kde.evaluate_grid(grid);
    let ef = smoothed_density_grid(f, kernel, h, grid)?;
    fields.decompose(&fhat, &ef, alpha.get(), gamma)
}

/// One `(replication, n, h)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub replication: usize,
    pub n: usize,
    pub h: f64,
    pub gamma: f64,
    pub d_alpha: f64,
    pub err_dalpha: f64,
    pub err_renyi: f64,
    pub err_tsallis: f64,
    pub rate_bound: f64,
    pub decomposition: Decomposition,
}

/// Sup-over-bandwidth errors for one `n`, per replication and averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n: usize,
    pub h_lower: f64,
    pub h_upper: f64,
    pub gamma: f64,
    pub rate_bound: f64,
    pub sup_dalpha: Vec<f64>,
    pub sup_renyi: Vec<f64>,
    pub sup_tsallis: Vec<f64>,
    pub mean_sup_dalpha: f64,
    pub mean_sup_renyi: f64,
    pub mean_sup_tsallis: f64,
}

/// Which divergence error a rate fit or summary refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMeasure {
    DAlpha,
    Renyi,
    Tsallis,
}

impl SweepSummary {
    pub fn mean_sup(&self, measure: ErrorMeasure) -> f64 {
        match measure {
            ErrorMeasure::DAlpha => self.mean_sup_dalpha,
            ErrorMeasure::Renyi => self.mean_sup_renyi,
            ErrorMeasure::Tsallis => self.mean_sup_tsallis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub alpha: f64,
    pub dimension: usize,
    pub range: BandwidthRange,
    pub truth: TrueDivergences,
    /// Cells ordered by replication, then `n` (schedule order), then `h`.
    pub cells: Vec<SweepCell>,
    /// One summary per schedule entry, in schedule order.
    pub per_n: Vec<SweepSummary>,
}

impl SweepResult {
    pub fn bound_violations(&self) -> usize {
        self.cells.iter().map(|c| c.decomposition.violations().len()).sum()
    }

    pub fn max_additivity_residual(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.decomposition.additivity_residual())
            .fold(0.0, f64::max)
    }
}

fn abs_err(estimate: f64, truth: f64) -> f64 {
    if estimate == truth {
        0.0
    } else {
        (estimate - truth).abs()
    }
}

/// Runs every `(replication, n, h)` cell. The sample for `(r, n)` is drawn
/// from seed `derive_seed(seed, [r, n])`, so the result does not depend on
/// scheduling.
pub fn run_sweep(
    f: &AnalyticDensity,
    g: &AnalyticDensity,
    plan: &SweepPlan,
    grid: &EvaluationGrid,
) -> Result<SweepResult> {
    let d = f.dimension();
    if g.dimension() != d || plan.kernel.dimension != d || grid.dimension() != d {
        return Err(Error::Config("f, g, kernel and grid dimensions must agree".into()));
    }
    plan.range.validate(&plan.n_schedule)?;
    if plan.replications == 0 {
        return Err(Error::Config("replications must be positive".into()));
    }
    for (name, h) in plan
        .n_schedule
        .iter()
        .flat_map(|&n| [("h'", plan.range.lower(n)), ("h''", plan.range.upper(n))])
    {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Config(format!("{name} = {h} is outside (0, 1]")));
        }
    }
    let alpha = plan.alpha.get();
    let truth = true_divergences(f, g, alpha)?;
    let fields = GridFields::new(f, g, alpha, grid)?;

    // E f̂ per (n, h): shared by all replications.
    let bandwidths: Vec<Vec<f64>> = plan.n_schedule.iter().map(|&n| plan.range.bandwidths(n)).collect();
    let smoothed: Vec<Vec<Vec<f64>>> = bandwidths
        .iter()
        .map(|hs| {
            hs.iter()
                .map(|&h| smoothed_density_grid(f, &plan.kernel, h, grid))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for r in 0..plan.replications {
        for (ni, &n) in plan.n_schedule.iter().enumerate() {
            tasks.push((r, ni, n));
        }
    }
    let rows: Vec<Vec<SweepCell>> = tasks
        .par_iter()
        .map(|&(r, ni, n)| -> Result<Vec<SweepCell>> {
            let sample = f.draw_sample(n, derive_seed(plan.seed, &[r as u64, n as u64]))?;
            let gamma = plan.thresholds.gamma(n)?;
            let rate_bound = plan.range.rate_bound(n, alpha, gamma, d);
            bandwidths[ni]
                .iter()
                .zip(&smoothed[ni])
                .map(|(&h, ef)| {
                    let kde = Kde::new(&sample, plan.kernel, h)?;
                    let fhat = kde.evaluate_grid(grid);
                    let dec = fields.decompose(&fhat, ef, alpha, gamma)?;
                    let renyi = dec.d_hat.ln() / (alpha - 1.0);
                    let tsallis = (dec.d_hat - 1.0) / (alpha - 1.0);
                    Ok(SweepCell {
                        replication: r,
                        n,
                        h,
                        gamma,
                        d_alpha: dec.d_hat,
                        err_dalpha: abs_err(dec.d_hat, truth.d_alpha),
                        err_renyi: abs_err(renyi, truth.renyi),
                        err_tsallis: abs_err(tsallis, truth.tsallis),
                        rate_bound,
                        decomposition: dec,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let per_n = plan
        .n_schedule
        .iter()
        .enumerate()
        .map(|(ni, &n)| -> Result<SweepSummary> {
            let mut sup = [Vec::new(), Vec::new(), Vec::new()];
            for r in 0..plan.replications {
                let cells = &rows[r * plan.n_schedule.len() + ni];
                let max = |pick: fn(&SweepCell) -> f64| cells.iter().map(pick).fold(0.0, f64::max);
                sup[0].push(max(|c| c.err_dalpha));
                sup[1].push(max(|c| c.err_renyi));
                sup[2].push(max(|c| c.err_tsallis));
            }
            let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            let gamma = plan.thresholds.gamma(n)?;
            let [sup_dalpha, sup_renyi, sup_tsallis] = sup;
            Ok(SweepSummary {
                n,
                h_lower: plan.range.lower(n),
                h_upper: plan.range.upper(n),
                gamma,
                rate_bound: plan.range.rate_bound(n, alpha, gamma, d),
                mean_sup_dalpha: mean(&sup_dalpha),
                mean_sup_renyi: mean(&sup_renyi),
                mean_sup_tsallis: mean(&sup_tsallis),
                sup_dalpha,
                sup_renyi,
                sup_tsallis,
            })
        })
        .collect::<Result<_>>()?;

    Ok(SweepResult {
        alpha,
        dimension: d,
        range: plan.range,
        truth,
        cells: rows.into_iter().flatten().collect(),
        per_n,
    })
}

/// Least-squares line through `(log n, log err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_log_log(ns: &[usize], errors: &[f64]) -> Result<LogLogFit> {
    if ns.len() != errors.len() {
        return Err(Error::Parameter("n and error lists differ in length".into()));
    }
    let mut distinct = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::FitUndefined(format!(
            "need at least 3 distinct n values, got {}",
            distinct.len()
        )));
    }
    if let Some(bad) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::FitUndefined(format!(
            "errors must be positive and finite, got {bad}"
        )));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub measure: ErrorMeasure,
    pub fitted_exponent: f64,
    pub theoretical_exponent: f64,
    pub r_squared: f64,
    pub intercept: f64,
    /// Slope of the full envelope `rate_bound_n` against `n` on the same schedule.
    pub envelope_exponent: f64,
    pub log_factors_ignored: bool,
}

/// Fit of the mean sup-over-bandwidth `d_alpha` error.
pub fn fit_rate(result: &SweepResult) -> Result<RateFit> {
    fit_rate_for(result, ErrorMeasure::DAlpha)
}

pub fn fit_rate_for(result: &SweepResult, measure: ErrorMeasure) -> Result<RateFit> {
    let ns: Vec<usize> = result.per_n.iter().map(|s| s.n).collect();
    let errs: Vec<f64> = result.per_n.iter().map(|s| s.mean_sup(measure)).collect();
    let fit = fit_log_log(&ns, &errs)?;
    let bounds: Vec<f64> = result.per_n.iter().map(|s| s.rate_bound).collect();
    let envelope = fit_log_log(&ns, &bounds)?;
    Ok(RateFit {
        measure,
        fitted_exponent: fit.slope,
        theoretical_exponent: result.range.theoretical_exponent(result.alpha),
        r_squared: fit.r_squared,
        intercept: fit.intercept,
        envelope_exponent: envelope.slope,
        log_factors_ignored: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DensitySpec;
    use crate::kernel::KernelFamily;

    fn normal(mean: f64) -> AnalyticDensity {
        AnalyticDensity::new(DensitySpec::Gaussian {
            mean: vec![mean],
            std: vec![1.0],
        })
        .unwrap()
    }

    fn plan(ns: Vec<usize>, reps: usize, grid_size: usize) -> SweepPlan {
        SweepPlan {
            alpha: AlphaParam::HALF,
            kernel: KernelSpec::second_order(KernelFamily::Gaussian, 1),
            range: BandwidthRange {
                grid_size,
                ..BandwidthRange::default_for(1)
            },
            thresholds: ThresholdSchedule::default(),
            n_schedule: ns,
            replications: reps,
            seed: 3,
        }
    }

    fn grid() -> EvaluationGrid {
        EvaluationGrid::new(vec![-8.0], vec![9.0], 681).unwrap()
    }

    #[test]
    fn default_range_is_feasible() {
        let r = BandwidthRange::default_for(1);
        r.validate(&[100, 500, 2000, 8000, 100_000]).unwrap();
        let hs = r.bandwidths(500);
        assert_eq!(hs.len(), 12);
        assert!((hs[0] - r.lower(500)).abs() < 1e-15);
        assert_eq!(hs[11], r.upper(500));
        assert!(hs.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(r.bandwidths(1).len(), 12);
        assert!((r.theoretical_exponent(0.5) + 0.5 / 2.0 * (2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn infeasible_range_is_a_config_error() {
        let r = BandwidthRange {
            c_lower: 5.0,
            ..BandwidthRange::default_for(1)
        };
        assert!(matches!(r.validate(&[500]), Err(Error::Config(_))));
        assert!(matches!(
            BandwidthRange::default_for(1).validate(&[2]),
            Err(Error::Config(_))
        ));
        let f = normal(0.0);
        let mut p = plan(vec![500], 1, 3);
        p.range = r;
        assert!(matches!(run_sweep(&f, &f, &p, &grid()), Err(Error::Config(_))));
    }

    #[test]
    fn identity_sweep() {
        let f = normal(0.0);
        let res = run_sweep(&f, &f, &plan(vec![500], 1, 12), &grid()).unwrap();
        assert_eq!(res.cells.len(), 12);
        let s = &res.per_n[0];
        assert!(s.mean_sup_dalpha < 0.05, "{}", s.mean_sup_dalpha);
        for c in &res.cells {
            assert!(c.err_dalpha >= 0.0 && c.err_renyi >= 0.0 && c.err_tsallis >= 0.0);
            assert!(c.err_dalpha <= s.sup_dalpha[0]);
            assert!(c.decomposition.additivity_residual() < 1e-10);
        }
        assert_eq!(res.bound_violations(), 0);
    }

    #[test]
    fn single_bandwidth_sweep() {
        let f = normal(0.0);
        let g = normal(1.0);
        let res = run_sweep(&f, &g, &plan(vec![300, 600], 2, 1), &grid()).unwrap();
        assert_eq!(res.cells.len(), 4);
        for (i, s) in res.per_n.iter().enumerate() {
            for r in 0..2 {
                let cell = &res.cells[r * 2 + i];
                assert_eq!(cell.n, s.n);
                assert_eq!(s.sup_dalpha[r], cell.err_dalpha);
                assert_eq!(cell.h, s.h_upper);
            }
        }
    }

    #[test]
    fn sweep_is_reproducible() {
        let f = normal(0.0);
        let g = normal(1.0);
        let p = plan(vec![200, 400], 2, 3);
        assert_eq!(
            run_sweep(&f, &g, &p, &grid()).unwrap(),
            run_sweep(&f, &g, &p, &grid()).unwrap()
        );
    }

    #[test]
    fn decomposition_cases() {
        let f = normal(0.0);
        let g = normal(1.0);
        let k = KernelSpec::second_order(KernelFamily::Gaussian, 1);
        let sample = f.draw_sample(20_000, 11).unwrap();
        let dec = decompose_error(&f, &g, AlphaParam::HALF, &k, &sample, 0.3, 0.0, &grid()).unwrap();
        assert!(dec.delta3.abs() < 1e-12);
        assert!(dec.additivity_residual() < 1e-10);
        assert!(dec.violations().is_empty());
        let tiny = decompose_error(&f, &g, AlphaParam::HALF, &k, &sample, 1e-3, 0.0, &grid()).unwrap();
        assert!(tiny.delta2.abs() < 1e-3, "{}", tiny.delta2);
        let thr = decompose_error(&f, &g, AlphaParam::HALF, &k, &sample, 0.3, 0.05, &grid()).unwrap();
        assert!(thr.delta3 < 0.0);
        assert!(thr.additivity_residual() < 1e-10);
        assert!(thr.violations().is_empty());
    }

    #[test]
    fn fit_on_synthetic_power_law() {
        let ns = [500, 2000, 8000];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.25)).collect();
        let fit = fit_log_log(&ns, &errs).unwrap();
        assert!((fit.slope + 0.25).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(matches!(fit_log_log(&[500], &[0.1]), Err(Error::FitUndefined(_))));
        assert!(matches!(
            fit_log_log(&[500, 500, 500], &[0.1, 0.2, 0.3]),
            Err(Error::FitUndefined(_))
        ));
        assert!(matches!(
            fit_log_log(&ns, &[0.1, 0.0, 0.05]),
            Err(Error::FitUndefined(_))
        ));
    }

    #[test]
    fn fit_rate_reads_summaries() {
        let f = normal(0.0);
        let g = normal(1.0);
        let mut res = run_sweep(&f, &g, &plan(vec![100, 200, 400], 1, 2), &grid()).unwrap();
        for s in res.per_n.iter_mut() {
            s.mean_sup_dalpha = (s.n as f64).powf(-0.25);
        }
        let fit = fit_rate(&res).unwrap();
        assert!((fit.fitted_exponent + 0.25).abs() < 1e-12);
        assert!((fit.theoretical_exponent + 0.25 * 2.0 / 3.0).abs() < 1e-12);
        assert!(fit.envelope_exponent < 0.0);
    }
}
