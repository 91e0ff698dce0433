//! Plug-in estimate of `ζ(I)`, the half-widths `B^T_n`, `B^R_n`, the
//! resulting certainty intervals, and seeded coverage experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{power_integral, true_divergences, AnalyticDensity, TrueDivergences};
use crate::divergence::{dalpha_quadrature, AlphaParam, ThresholdSchedule};
use crate::error::{Error, Result};
use crate::kde::{DensityEvaluator, EvaluationGrid, Kde};
use crate::kernel::KernelSpec;
use crate::rng::derive_seed;
use crate::sweep::BandwidthRange;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaEstimate {
    pub value: f64,
    pub region_nodes: usize,
    pub k_square_integral: f64,
    pub alpha: f64,
}

/// `max_i (f̂_i ∫K²)^{α/2}` over the supplied region values.
pub fn estimate_zeta(fhat_values: &[f64], k_square_integral: f64, alpha: AlphaParam) -> Result<ZetaEstimate> {
    if fhat_values.is_empty() {
        return Err(Error::Parameter("zeta needs a nonempty region".into()));
    }
    if !(k_square_integral > 0.0 && k_square_integral.is_finite()) {
        return Err(Error::Parameter(format!(
            "kernel square integral must be positive, got {k_square_integral}"
        )));
    }
    if let Some(bad) = fhat_values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!(
            "density values must be finite and nonnegative, got {bad}"
        )));
    }
    let peak = fhat_values.iter().copied().fold(0.0, f64::max);
    Ok(ZetaEstimate {
        value: (peak * k_square_integral).powf(alpha.get() / 2.0),
        region_nodes: fhat_values.len(),
        k_square_integral,
        alpha: alpha.get(),
    })
}

/// `B^T_n` and `B^R_n` with the inputs that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfWidths {
    pub b_tsallis: f64,
    pub b_renyi: f64,
    /// `((log(1/h) ∨ log log n)/(n h))^{α/2}`.
    pub rate: f64,
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub gamma_floor: f64,
}

impl HalfWidths {
    /// Both widths scaled by `1 + epsilon`.
    pub fn inflated(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "inflation must be nonnegative, got {epsilon}"
            )));
        }
        self.b_tsallis *= 1.0 + epsilon;
        self.b_renyi *= 1.0 + epsilon;
        Ok(self)
    }
}

pub fn compute_half_widths(
    zeta: &ZetaEstimate,
    n: usize,
    h: f64,
    alpha: AlphaParam,
    g_integral: f64,
    gamma_floor: f64,
) -> Result<HalfWidths> {
    if n < 3 {
        return Err(Error::Parameter(format!("half-widths need n >= 3, got {n}")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Parameter(format!("bandwidth must lie in (0, 1), got {h}")));
    }
    if !(gamma_floor > 0.0 && gamma_floor.is_finite()) {
        return Err(Error::Parameter(format!(
            "gamma_floor must be positive, got {gamma_floor}"
        )));
    }
    if !(g_integral > 0.0 && g_integral.is_finite()) {
        return Err(Error::Parameter(format!(
            "integral of g^(1-alpha) must be positive, got {g_integral}"
        )));
    }
    let a = alpha.get();
    let nf = n as f64;
    let rate = ((1.0 / h).ln().max(nf.ln().ln()) / (nf * h)).powf(a / 2.0);
    Ok(HalfWidths {
        b_tsallis: zeta.value * g_integral * rate / (1.0 - a),
        b_renyi: zeta.value * rate / ((1.0 - a) * gamma_floor.powf(a)),
        rate,
        n,
        h,
        alpha: a,
        gamma_floor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Tsallis,
    Renyi,
}

impl IntervalKind {
    pub fn name(self) -> &'static str {
        match self {
            IntervalKind::Tsallis => "tsallis",
            IntervalKind::Renyi => "renyi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertaintyInterval {
    pub kind: IntervalKind,
    pub center: f64,
    pub half_width: f64,
    pub n: usize,
    pub h: f64,
    pub alpha: f64,
    pub gamma_floor: f64,
}

impl CertaintyInterval {
    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower() <= value && value <= self.upper()
    }
}

/// `[D̂^T ± B^T]` and `[D̂^R ± B^R]`.
pub fn build_intervals(
    tsallis_est: f64,
    renyi_est: f64,
    widths: &HalfWidths,
) -> Result<(CertaintyInterval, CertaintyInterval)> {
    for b in [widths.b_tsallis, widths.b_renyi] {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::Parameter(format!(
                "half-width must be finite and nonnegative, got {b}"
            )));
        }
    }
    let make = |kind, center, half_width| CertaintyInterval {
        kind,
        center,
        half_width,
        n: widths.n,
        h: widths.h,
        alpha: widths.alpha,
        gamma_floor: widths.gamma_floor,
    };
    Ok((
        make(IntervalKind::Tsallis, tsallis_est, widths.b_tsallis),
        make(IntervalKind::Renyi, renyi_est, widths.b_renyi),
    ))
}

/// Settings of a coverage experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePlan {
    pub alpha: AlphaParam,
    pub kernel: KernelSpec,
    pub thresholds: ThresholdSchedule,
    pub range: BandwidthRange,
    /// Fixed bandwidth; `None` uses `h″_n` from `range`.
    pub bandwidth: Option<f64>,
    pub n_schedule: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// Density floor on the support of `f`; `None` requires `f` to record one.
    pub gamma_floor: Option<f64>,
    pub inflation: f64,
}

impl CoveragePlan {
    pub fn bandwidth_for(&self, n: usize) -> f64 {
        self.bandwidth.unwrap_or_else(|| self.range.upper(n))
    }

    pub fn resolve_gamma_floor(&self, f: &AnalyticDensity) -> Result<f64> {
        match (self.gamma_floor, f.support_floor()) {
            (Some(v), _) => Ok(v),
            (None, Some(v)) => Ok(v),
            (None, None) => Err(Error::Config(
                "gamma_floor is required: f has no recorded positive density floor".into(),
            )),
        }
    }
}

/// One replication at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub replication: usize,
    pub zeta: ZetaEstimate,
    pub tsallis: CertaintyInterval,
    pub renyi: CertaintyInterval,
    pub tsallis_covered: bool,
    pub renyi_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub n: usize,
    pub h: f64,
    pub gamma: f64,
    pub replications: usize,
    pub tsallis_covered: usize,
    pub renyi_covered: usize,
    pub mean_zeta: f64,
    /// Mean of `|ζ_n(I_n) − ζ(I)|` over replications.
    pub mean_zeta_error: f64,
    pub records: Vec<CoverageRecord>,
}

impl CoverageSummary {
    pub fn tsallis_fraction(&self) -> f64 {
        self.tsallis_covered as f64 / self.replications as f64
    }

    pub fn renyi_fraction(&self) -> f64 {
        self.renyi_covered as f64 / self.replications as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub truth: TrueDivergences,
    /// `(sup f ∫K²)^{α/2}` taken over the grid nodes.
    pub zeta_oracle: f64,
    pub g_integral: f64,
    pub gamma_floor: f64,
    pub per_n: Vec<CoverageSummary>,
}

/// Number of strict increases in a sequence that should be nonincreasing.
pub fn count_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

/// Seeded coverage replications. The sample for `(r, n)` comes from
/// `derive_seed(seed, [r, n])`; `I_n` is the set of nodes with `f̂ ≥ γ_n`.
pub fn run_coverage(
    f: &AnalyticDensity,
    g: &AnalyticDensity,
    plan: &CoveragePlan,
    grid: &EvaluationGrid,
) -> Result<CoverageResult> {
    let d = f.dimension();
    if g.dimension() != d || plan.kernel.dimension != d || grid.dimension() != d {
        return Err(Error::Config("f, g, kernel and grid dimensions must agree".into()));
    }
    if plan.replications == 0 || plan.n_schedule.is_empty() {
        return Err(Error::Config(
            "coverage needs replications and a nonempty n_schedule".into(),
        ));
    }
    for &n in &plan.n_schedule {
        if n < 3 {
            return Err(Error::Config(format!("n = {n} is below 3: log log n is undefined")));
        }
        let h = plan.bandwidth_for(n);
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::Config(format!(
                "interval bandwidth {h} at n = {n} is outside (0, 1)"
            )));
        }
    }
    let gamma_floor = plan.resolve_gamma_floor(f)?;
    let alpha = plan.alpha;
    let truth = true_divergences(f, g, alpha.get())?;
    let g_integral = power_integral(g, 1.0 - alpha.get())?;
    let k2 = plan.kernel.square_integral();
    let f_peak = f.evaluate_grid(grid).into_iter().fold(0.0, f64::max);
    let zeta_oracle = (f_peak * k2).powf(alpha.get() / 2.0);

    let mut tasks = Vec::new();
    for &n in &plan.n_schedule {
        for r in 0..plan.replications {
            tasks.push((n, r));
        }
    }
    let records: Vec<CoverageRecord> = tasks
        .par_iter()
        .map(|&(n, r)| -> Result<CoverageRecord> {
            let sample = f.draw_sample(n, derive_seed(plan.seed, &[r as u64, n as u64]))?;
            let h = plan.bandwidth_for(n);
            let gamma = plan.thresholds.gamma(n)?;
            let kde = Kde::new(&sample, plan.kernel, h)?;
            let fhat = kde.evaluate_grid(grid);
            let region: Vec<f64> = fhat.iter().copied().filter(|&v| v >= gamma).collect();
            let zeta = estimate_zeta(&region, k2, alpha)?;
            let est = dalpha_quadrature(&kde, g, alpha, gamma, grid)?;
            let widths = compute_half_widths(&zeta, n, h, alpha, g_integral, gamma_floor)?.inflated(plan.inflation)?;
            let (tsallis, renyi) = build_intervals(est.tsallis, est.renyi, &widths)?;
            Ok(CoverageRecord {
                replication: r,
                zeta,
                tsallis,
                renyi,
                tsallis_covered: tsallis.contains(truth.tsallis),
                renyi_covered: renyi.contains(truth.renyi),
            })
        })
        .collect::<Result<_>>()?;

    let per_n = plan
        .n_schedule
        .iter()
        .zip(records.chunks(plan.replications))
        .map(|(&n, recs)| -> Result<CoverageSummary> {
            let k = recs.len() as f64;
            Ok(CoverageSummary {
                n,
                h: plan.bandwidth_for(n),
                gamma: plan.thresholds.gamma(n)?,
                replications: recs.len(),
                tsallis_covered: recs.iter().filter(|r| r.tsallis_covered).count(),
                renyi_covered: recs.iter().filter(|r| r.renyi_covered).count(),
                mean_zeta: recs.iter().map(|r| r.zeta.value).sum::<f64>() / k,
                mean_zeta_error: recs.iter().map(|r| (r.zeta.value - zeta_oracle).abs()).sum::<f64>() / k,
                records: recs.to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(CoverageResult {
        truth,
        zeta_oracle,
        g_integral,
        gamma_floor,
        per_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DensitySpec;
    use crate::kernel::KernelFamily;

    const E: f64 = std::f64::consts::E;

    fn zeta(value: f64) -> ZetaEstimate {
        ZetaEstimate {
            value,
            region_nodes: 1,
            k_square_integral: 1.0,
            alpha: 0.5,
        }
    }

    #[test]
    fn zeta_examples() {
        let z = estimate_zeta(&[1.0; 7], 0.282095, AlphaParam::HALF).unwrap();
        assert!((z.value - 0.282095f64.powf(0.25)).abs() < 1e-15);
        assert!((z.value - 0.728_78).abs() < 1e-5);
        assert_eq!(z.region_nodes, 7);
        assert_eq!(estimate_zeta(&[0.0, 0.0], 0.28, AlphaParam::HALF).unwrap().value, 0.0);
        assert!(estimate_zeta(&[], 0.28, AlphaParam::HALF).is_err());
        assert!(estimate_zeta(&[-1.0], 0.28, AlphaParam::HALF).is_err());

        let f = AnalyticDensity::new(DensitySpec::standard_normal(1)).unwrap();
        let grid = EvaluationGrid::new(vec![-5.0], vec![5.0], 1001).unwrap();
        let values = f.evaluate_grid(&grid);
        let k2 = KernelSpec::second_order(KernelFamily::Gaussian, 1).square_integral();
        let z = estimate_zeta(&values, k2, AlphaParam::HALF).unwrap();
        let brute = values.iter().map(|v| (v * k2).powf(0.25)).fold(0.0, f64::max);
        assert_eq!(z.value, brute);
        assert!((z.value - 0.579).abs() < 1e-3, "{}", z.value);
    }

    #[test]
    fn unit_half_widths() {
        // n = e^e is not an integer; n = 15 keeps log log n ≈ 1 and h = 1/e gives log(1/h) = 1
        let w = compute_half_widths(&zeta(1.0), 15, 1.0 / E, AlphaParam::HALF, 1.0, 1.0).unwrap();
        let ll = 15f64.ln().ln();
        let r = (ll.max(1.0) * E / 15.0).powf(0.25);
        assert!((w.rate - r).abs() < 1e-15);
        assert!((w.b_tsallis - 2.0 * r).abs() < 1e-15);
        assert!((w.b_renyi - 2.0 * r).abs() < 1e-15);
    }

    #[test]
    fn half_width_monotonicity_and_errors() {
        let z = zeta(0.6);
        let a = AlphaParam::HALF;
        let mut prev = compute_half_widths(&z, 100, 0.2, a, 2.0, 0.1).unwrap();
        for n in [200, 400, 800, 1600, 100_000] {
            let w = compute_half_widths(&z, n, 0.2, a, 2.0, 0.1).unwrap();
            assert!(w.b_tsallis < prev.b_tsallis && w.b_renyi < prev.b_renyi);
            prev = w;
        }
        let mut prev = compute_half_widths(&z, 4000, 0.01, a, 2.0, 0.1).unwrap();
        for h in [0.05, 0.1, 0.2, 1.0 / E] {
            let w = compute_half_widths(&z, 4000, h, a, 2.0, 0.1).unwrap();
            assert!(w.b_tsallis < prev.b_tsallis, "h = {h}");
            prev = w;
        }
        assert!(compute_half_widths(&z, 2, 0.2, a, 2.0, 0.1).is_err());
        assert!(compute_half_widths(&z, 100, 1.0, a, 2.0, 0.1).is_err());
        assert!(compute_half_widths(&z, 100, 0.2, a, 2.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_pair_half_widths() {
        // independent recomputation of the pinned n = 4000, h = 0.2 case
        let k2 = 1.0 / (2.0 * std::f64::consts::PI.sqrt());
        let peak = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let zeta_value = (peak * k2).powf(0.25);
        let g_int = (8.0 * std::f64::consts::PI).powf(0.25);
        let z = estimate_zeta(&[peak], k2, AlphaParam::HALF).unwrap();
        let w = compute_half_widths(&z, 4000, 0.2, AlphaParam::HALF, g_int, 0.05).unwrap();
        let r = (4000f64.ln().ln().max(5f64.ln()) / 800.0).powf(0.25);
        assert!((w.b_tsallis - zeta_value * g_int * r / 0.5).abs() < 1e-14);
        assert!((w.b_tsallis - 0.588_165).abs() < 1e-6, "{}", w.b_tsallis);
        assert!((w.b_renyi - 1.174_773).abs() < 1e-6, "{}", w.b_renyi);
    }

    #[test]
    fn interval_arithmetic() {
        let mut w = compute_half_widths(&zeta(1.0), 100, 0.2, AlphaParam::HALF, 1.0, 1.0).unwrap();
        w.b_tsallis = 0.1;
        let (t, r) = build_intervals(0.235006, 0.25, &w).unwrap();
        assert!((t.lower() - 0.135006).abs() < 1e-15 && (t.upper() - 0.335006).abs() < 1e-15);
        assert_eq!(t.kind, IntervalKind::Tsallis);
        assert_eq!(r.kind, IntervalKind::Renyi);
        assert!(((t.upper() - t.lower()) - 2.0 * t.half_width).abs() <= 4.0 * f64::EPSILON);
        w.b_tsallis = 0.0;
        let (t, _) = build_intervals(0.235006, 0.25, &w).unwrap();
        assert_eq!(t.lower(), t.upper());
        assert!(t.contains(0.235006));
        w.b_renyi = f64::NAN;
        assert!(build_intervals(0.2, 0.2, &w).is_err());
        let inflated = compute_half_widths(&zeta(1.0), 100, 0.2, AlphaParam::HALF, 1.0, 1.0)
            .unwrap()
            .inflated(0.5)
            .unwrap();
        let base = compute_half_widths(&zeta(1.0), 100, 0.2, AlphaParam::HALF, 1.0, 1.0).unwrap();
        assert_eq!(inflated.b_tsallis, base.b_tsallis * 1.5);
    }

    #[test]
    fn small_coverage_run() {
        let f = AnalyticDensity::new(DensitySpec::standard_normal(1)).unwrap();
        let g = AnalyticDensity::new(DensitySpec::Gaussian {
            mean: vec![1.0],
            std: vec![1.0],
        })
        .unwrap();
        let plan = CoveragePlan {
            alpha: AlphaParam::HALF,
            kernel: KernelSpec::second_order(KernelFamily::Gaussian, 1),
            thresholds: ThresholdSchedule::default(),
            range: BandwidthRange::default_for(1),
            bandwidth: None,
            n_schedule: vec![300, 600],
            replications: 4,
            seed: 1,
            gamma_floor: None,
            inflation: 0.0,
        };
        let grid = EvaluationGrid::new(vec![-8.0], vec![9.0], 341).unwrap();
        assert!(matches!(run_coverage(&f, &g, &plan, &grid), Err(Error::Config(_))));
        let plan = CoveragePlan {
            gamma_floor: Some(0.05),
            ..plan
        };
        let res = run_coverage(&f, &g, &plan, &grid).unwrap();
        assert_eq!(res.per_n.len(), 2);
        assert_eq!(res.per_n[0].records.len(), 4);
        assert_eq!(res, run_coverage(&f, &g, &plan, &grid).unwrap());
        assert_eq!(count_inversions(&[3.0, 2.0, 2.5, 1.0]), 1);
    }
}
