//! Thresholded plug-in estimators of `D_α(f, g) = ∫ f^α g^{1−α}` and the
//! divergences derived from it.
//!
//! The estimator integrates `f̂^α g^{1−α}` over `A = {x : f̂(x) ≥ γ}` only.
//! Two integration routes are provided: a tensor-trapezoid sum over an
//! [`EvaluationGrid`] and a Monte Carlo average of `(f̂/g)^α 1{f̂ ≥ γ}` under
//! draws from `g`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::AnalyticDensity;
use crate::error::{Error, Result};
use crate::kde::{smoothed_density_grid, DensityEvaluator, EvaluationGrid};
use crate::kernel::KernelSpec;
use crate::rng;

/// Draws per Monte Carlo block. Block `b` uses random stream `b`, so the
/// estimate depends only on `(inputs, seed, m)`.
pub const MC_BLOCK: usize = 4096;

/// Excess of `d_alpha` over one tolerated before a warning is raised.
pub const D_ALPHA_WARNING_SLACK: f64 = 1e-6;

/// Order `α ∈ (0, 1)` of the divergence.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AlphaParam(f64);

impl AlphaParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::Parameter(format!(
                "alpha must lie strictly inside (0, 1), got {alpha}"
            )))
        }
    }

    pub const HALF: AlphaParam = AlphaParam(0.5);

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AlphaParam {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AlphaParam> for f64 {
    fn from(a: AlphaParam) -> f64 {
        a.0
    }
}

/// Vanishing threshold `γ_n = β (log n)^{−δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub beta: f64,
    pub delta: f64,
}

impl Default for ThresholdSchedule {
    fn default() -> Self {
        Self { beta: 0.01, delta: 1.0 }
    }
}

impl ThresholdSchedule {
    pub fn new(beta: f64, delta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!("threshold beta must be positive, got {beta}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "threshold delta must be nonnegative, got {delta}"
            )));
        }
        Ok(Self { beta, delta })
    }

    /// `γ_n`; defined for `n ≥ 2`.
    pub fn gamma(&self, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::Parameter(format!("threshold needs n >= 2, got {n}")));
        }
        Ok(self.beta * (n as f64).ln().powf(-self.delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

/// Result of one evaluation of the plug-in functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub alpha: f64,
    pub d_alpha: f64,
    /// `log(d_alpha)/(α − 1)`; `+∞` when `d_alpha = 0`.
    pub renyi: f64,
    pub tsallis: f64,
    pub method: Method,
    pub mc_std_error: Option<f64>,
    pub threshold_used: f64,
    /// `g`-mass of the excluded region `{f̂ < γ}` (grid-normalized for
    /// quadrature, fraction of draws for Monte Carlo).
    pub mass_below_threshold: f64,
    /// Set when `d_alpha` exceeds one by more than [`D_ALPHA_WARNING_SLACK`].
    pub warning: bool,
}

impl DivergenceEstimate {
    pub fn new(
        alpha: AlphaParam,
        d_alpha: f64,
        method: Method,
        mc_std_error: Option<f64>,
        threshold_used: f64,
        mass_below_threshold: f64,
    ) -> Self {
        let a = alpha.get();
        Self {
            alpha: a,
            d_alpha,
            renyi: d_alpha.ln() / (a - 1.0),
            tsallis: (d_alpha - 1.0) / (a - 1.0),
            method,
            mc_std_error,
            threshold_used,
            mass_below_threshold,
            warning: !(0.0..=1.0 + D_ALPHA_WARNING_SLACK).contains(&d_alpha),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("threshold must be nonnegative, got {gamma}")));
    }
    Ok(())
}

fn check_dims(fhat: &dyn DensityEvaluator, g: &AnalyticDensity) -> Result<()> {
    if fhat.dimension() != g.dimension() {
        return Err(Error::Parameter(format!(
            "estimator dimension {} differs from g dimension {}",
            fhat.dimension(),
            g.dimension()
        )));
    }
    Ok(())
}

/// `Σ_i w_i f̂_i^α g_i^{1−α} 1{f̂_i ≥ γ}` together with the g-weighted excluded
/// fraction; the grid form of the plug-in functional.
pub(crate) fn thresholded_sum(fhat: &[f64], g: &[f64], weights: &[f64], alpha: f64, gamma: f64) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut g_in = 0.0;
    let mut g_out = 0.0;
    for ((&fv, &gv), &w) in fhat.iter().zip(g).zip(weights) {
        if !(gv >= 0.0) || !gv.is_finite() {
            return Err(Error::Domain(format!("g is not a finite nonnegative value: {gv}")));
        }
        if fv >= gamma {
            let term = w * fv.powf(alpha) * gv.powf(1.0 - alpha);
            if !term.is_finite() {
                return Err(Error::Numeric(format!("non-finite integrand (f̂ = {fv}, g = {gv})")));
            }
            total += term;
            g_in += w * gv;
        } else {
            g_out += w * gv;
        }
    }
    let mass = if g_in + g_out > 0.0 {
        g_out / (g_in + g_out)
    } else {
        0.0
    };
    Ok((total, mass))
}

/// Quadrature form of the thresholded plug-in functional on a grid.
pub fn dalpha_quadrature(
    fhat: &dyn DensityEvaluator,
    g: &AnalyticDensity,
    alpha: AlphaParam,
    gamma: f64,
    grid: &EvaluationGrid,
) -> Result<DivergenceEstimate> {
    check_gamma(gamma)?;
    check_dims(fhat, g)?;
    let fv = fhat.evaluate_grid(grid);
    let gv = g.evaluate_grid(grid);
    let (d, mass) = thresholded_sum(&fv, &gv, &grid.weights(), alpha.get(), gamma)?;
    Ok(DivergenceEstimate::new(alpha, d, Method::Quadrature, None, gamma, mass))
}

/// Running mean and sum of squared deviations, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0.0 {
            return other;
        }
        if other.count == 0.0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }

    fn std_error(&self) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.count - 1.0)).max(0.0).sqrt() / self.count.sqrt()
    }
}

/// Monte Carlo average of `summand(f̂(Y), g(Y))` for `Y ~ g`, plus the
/// fraction of draws with `f̂(Y) < γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub mass_below_threshold: f64,
}

/// Draws `Y_1..Y_m ~ g` with `f̂(Y_j)` and `g(Y_j)`, kept per block so
/// several functionals can share one set of draws.
pub struct McDraws {
    /// `(f̂(Y), g(Y))` per draw, grouped in blocks of [`MC_BLOCK`].
    blocks: Vec<Vec<(f64, f64)>>,
    m: usize,
}

impl McDraws {
    /// Block `b` draws from random stream `b` of `seed`.
    pub fn new(fhat: &dyn DensityEvaluator, g: &AnalyticDensity, m: usize, seed: u64) -> Result<Self> {
        check_dims(fhat, g)?;
        if m < 2 {
            return Err(Error::Parameter(format!("Monte Carlo needs at least 2 draws, got {m}")));
        }
        let d = g.dimension();
        let blocks = (0..m.div_ceil(MC_BLOCK))
            .into_par_iter()
            .map(|b| {
                let size = MC_BLOCK.min(m - b * MC_BLOCK);
                let mut rng = rng::stream(seed, b as u64);
                let mut points = Vec::with_capacity(size * d);
                for _ in 0..size {
                    g.draw_into(&mut rng, &mut points);
                }
                let fv = fhat.evaluate_many(&points, d);
                points
                    .chunks_exact(d)
                    .zip(fv)
                    .map(|(y, f)| {
                        let gy = g.density(y);
                        if gy > 0.0 {
                            Ok((f, gy))
                        } else {
                            Err(Error::Internal(format!(
                                "sampler produced a point with g = {gy}: {y:?}"
                            )))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks, m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Mean of `summand(f̂, g) 1{f̂ ≥ γ}`; blocks merge in index order.
    pub fn average(&self, gamma: f64, summand: impl Fn(f64, f64) -> f64) -> Result<McEstimate> {
        check_gamma(gamma)?;
        let mut total = Moments::default();
        let mut below = 0usize;
        for block in &self.blocks {
            let mut acc = Moments::default();
            for &(f, gy) in block {
                if f >= gamma {
                    let s = summand(f, gy);
                    if !s.is_finite() {
                        return Err(Error::Numeric(format!("non-finite summand (f̂ = {f}, g = {gy})")));
                    }
                    acc.push(s);
                } else {
                    below += 1;
                    acc.push(0.0);
                }
            }
            total = total.merge(acc);
        }
        Ok(McEstimate {
            value: total.mean,
            std_error: total.std_error(),
            mass_below_threshold: below as f64 / self.m as f64,
        })
    }

    pub fn dalpha(&self, alpha: AlphaParam, gamma: f64) -> Result<DivergenceEstimate> {
        let a = alpha.get();
        let mc = self.average(gamma, |f, gy| (f / gy).powf(a))?;
        Ok(DivergenceEstimate::new(
            alpha,
            mc.value,
            Method::MonteCarlo,
            Some(mc.std_error),
            gamma,
            mc.mass_below_threshold,
        ))
    }

    /// Mean of `r log r · 1{f̂ ≥ γ}` with `r = f̂/g`.
    pub fn kl(&self, gamma: f64) -> Result<McEstimate> {
        self.average(gamma, |f, gy| {
            if f == 0.0 {
                0.0
            } else {
                let r = f / gy;
                r * r.ln()
            }
        })
    }
}

/// Monte Carlo form of the plug-in functional under draws from `g`.
pub fn dalpha_monte_carlo(
    fhat: &dyn DensityEvaluator,
    g: &AnalyticDensity,
    alpha: AlphaParam,
    gamma: f64,
    m: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    check_gamma(gamma)?;
    McDraws::new(fhat, g, m, seed)?.dalpha(alpha, gamma)
}

/// `D̂^R = log D̂ / (α − 1)`; [`Error::InfiniteDivergence`] when `D̂ = 0`.
pub fn renyi_estimate(est: &DivergenceEstimate, alpha: AlphaParam) -> Result<f64> {
    if est.d_alpha == 0.0 {
        return Err(Error::InfiniteDivergence);
    }
    if !(est.d_alpha > 0.0) {
        return Err(Error::Domain(format!("d_alpha = {} has no logarithm", est.d_alpha)));
    }
    Ok(est.d_alpha.ln() / (alpha.get() - 1.0))
}

/// `D̂^T = (D̂ − 1)/(α − 1)`.
pub fn tsallis_estimate(est: &DivergenceEstimate, alpha: AlphaParam) -> f64 {
    (est.d_alpha - 1.0) / (alpha.get() - 1.0)
}

/// A value with a flag raised when estimator noise pushed it outside its
/// theoretical range. The value is never clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    pub warning: bool,
}

fn require_half(est: &DivergenceEstimate) -> Result<()> {
    if est.alpha != 0.5 {
        return Err(Error::Parameter(format!(
            "Hellinger and Bhattacharyya need the alpha = 1/2 functional, got alpha = {}",
            est.alpha
        )));
    }
    Ok(())
}

/// `1 − D̂_{1/2}`.
pub fn hellinger_estimate(d_half: &DivergenceEstimate) -> Result<Flagged> {
    require_half(d_half)?;
    let value = 1.0 - d_half.d_alpha;
    Ok(Flagged {
        value,
        warning: d_half.d_alpha > 1.0 + D_ALPHA_WARNING_SLACK || value > 1.0,
    })
}

/// `−log D̂_{1/2}`; [`Error::InfiniteDivergence`] when `D̂_{1/2} = 0`.
pub fn bhattacharyya_estimate(d_half: &DivergenceEstimate) -> Result<f64> {
    require_half(d_half)?;
    if d_half.d_alpha == 0.0 {
        return Err(Error::InfiniteDivergence);
    }
    if !(d_half.d_alpha > 0.0) {
        return Err(Error::Domain(format!("d_alpha = {} has no logarithm", d_half.d_alpha)));
    }
    Ok(-d_half.d_alpha.ln())
}

/// Direct plug-in `∫_A f̂ log(f̂/g)` on the grid.
pub fn kl_plugin(fhat: &dyn DensityEvaluator, g: &AnalyticDensity, gamma: f64, grid: &EvaluationGrid) -> Result<f64> {
    check_gamma(gamma)?;
    check_dims(fhat, g)?;
    let fv = fhat.evaluate_grid(grid);
    let points = grid.points();
    let d = grid.dimension();
    let mut total = 0.0;
    for ((&f, &w), x) in fv.iter().zip(&grid.weights()).zip(points.chunks_exact(d)) {
        if f < gamma || f == 0.0 {
            continue;
        }
        let lg = g.log_density(x);
        if lg == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("f̂ > 0 where g = 0 at {x:?}: KL is infinite")));
        }
        let term = w * f * (f.ln() - lg);
        if !term.is_finite() {
            return Err(Error::Numeric(format!("non-finite KL integrand at {x:?}")));
        }
        total += term;
    }
    Ok(total)
}

/// Monte Carlo plug-in KL: mean of `r log r · 1{f̂ ≥ γ}` with `r = f̂(Y)/g(Y)`.
pub fn kl_monte_carlo(
    fhat: &dyn DensityEvaluator,
    g: &AnalyticDensity,
    gamma: f64,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_gamma(gamma)?;
    McDraws::new(fhat, g, m, seed)?.kl(gamma)
}

/// Centering factor `∫_A (E f̂)^α g^{1−α}` over the nodes flagged in
/// `region` (the realized set `{f̂ ≥ γ}` of an actual estimate).
pub fn centered_expectation_dalpha(
    f: &AnalyticDensity,
    g: &AnalyticDensity,
    kernel: &KernelSpec,
    h: f64,
    alpha: AlphaParam,
    region: &[bool],
    grid: &EvaluationGrid,
) -> Result<f64> {
    if region.len() != grid.node_count() {
        return Err(Error::Parameter(format!(
            "region has {} entries for {} grid nodes",
            region.len(),
            grid.node_count()
        )));
    }
    if f.dimension() != g.dimension() {
        return Err(Error::Parameter("f and g dimensions differ".into()));
    }
    let ef = smoothed_density_grid(f, kernel, h, grid)?;
    let gv = g.evaluate_grid(grid);
    let a = alpha.get();
    let total = ef
        .iter()
        .zip(&gv)
        .zip(grid.weights())
        .zip(region)
        .filter(|(_, &inside)| inside)
        .map(|(((&e, &gx), w), _)| w * e.powf(a) * gx.powf(1.0 - a))
        .sum::<f64>();
    if !total.is_finite() {
        return Err(Error::Numeric("non-finite centering integral".into()));
    }
    Ok(total)
}

/// All six estimated divergences from one `α` functional, the `α = 1/2`
/// functional and a KL plug-in value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub d_alpha: f64,
    pub renyi: f64,
    pub tsallis: f64,
    pub kl: f64,
    pub hellinger: f64,
    pub bhattacharyya: f64,
    pub warning: bool,
}

impl EstimateSet {
    pub fn assemble(est: &DivergenceEstimate, half: &DivergenceEstimate, kl: f64) -> Result<Self> {
        let alpha = AlphaParam::new(est.alpha)?;
        let hel = hellinger_estimate(half)?;
        let renyi = match renyi_estimate(est, alpha) {
            Err(Error::InfiniteDivergence) => f64::INFINITY,
            other => other?,
        };
        let bhattacharyya = match bhattacharyya_estimate(half) {
            Err(Error::InfiniteDivergence) => f64::INFINITY,
            other => other?,
        };
        Ok(Self {
            d_alpha: est.d_alpha,
            renyi,
            tsallis: tsallis_estimate(est, alpha),
            kl,
            hellinger: hel.value,
            bhattacharyya,
            warning: est.warning || half.warning || hel.warning,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DensitySpec;

    fn normal(mean: f64) -> AnalyticDensity {
        AnalyticDensity::new(DensitySpec::Gaussian {
            mean: vec![mean],
            std: vec![1.0],
        })
        .unwrap()
    }

    fn grid() -> EvaluationGrid {
        EvaluationGrid::new(vec![-10.0], vec![11.0], 2101).unwrap()
    }

    fn est(d: f64, alpha: f64) -> DivergenceEstimate {
        DivergenceEstimate::new(AlphaParam::new(alpha).unwrap(), d, Method::Quadrature, None, 0.0, 0.0)
    }

    #[test]
    fn alpha_bounds() {
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(AlphaParam::new(bad).is_err());
        }
        assert_eq!(AlphaParam::new(0.25).unwrap().get(), 0.25);
        let parsed: std::result::Result<AlphaParam, _> = serde_json_like(1.0);
        assert!(parsed.is_err());
    }

    fn serde_json_like(v: f64) -> std::result::Result<AlphaParam, Error> {
        AlphaParam::try_from(v)
    }

    #[test]
    fn threshold_schedule() {
        let t = ThresholdSchedule::default();
        assert!(t.gamma(1).is_err());
        let g2 = t.gamma(2).unwrap();
        let g100 = t.gamma(100).unwrap();
        assert!(g2 > g100 && g100 > 0.0);
        assert!((g100 - 0.01 / 100f64.ln()).abs() < 1e-15);
        let flat = ThresholdSchedule::new(0.5, 0.0).unwrap();
        assert_eq!(flat.gamma(10).unwrap(), 0.5);
        assert!(ThresholdSchedule::new(0.0, 1.0).is_err());
        assert!(ThresholdSchedule::new(1.0, -1.0).is_err());
    }

    #[test]
    fn identity_quadrature() {
        let f = normal(0.0);
        for a in [0.25, 0.5, 0.75] {
            let e = dalpha_quadrature(&f, &f, AlphaParam::new(a).unwrap(), 0.0, &grid()).unwrap();
            assert!((e.d_alpha - 1.0).abs() < 1e-4);
            assert!(e.renyi.abs() < 1e-4 && e.tsallis.abs() < 1e-4);
            assert_eq!(e.mass_below_threshold, 0.0);
        }
    }

    #[test]
    fn gaussian_pair_quadrature() {
        let e = dalpha_quadrature(&normal(0.0), &normal(1.0), AlphaParam::HALF, 0.0, &grid()).unwrap();
        assert!((e.d_alpha - (-0.125f64).exp()).abs() < 1e-8);
        assert!((e.renyi - 0.25).abs() < 1e-7);
        let none = dalpha_quadrature(&normal(0.0), &normal(1.0), AlphaParam::HALF, 10.0, &grid()).unwrap();
        assert_eq!(none.d_alpha, 0.0);
        assert_eq!(none.mass_below_threshold, 1.0);
        assert_eq!(none.renyi, f64::INFINITY);
    }

    #[test]
    fn identity_monte_carlo_is_exact() {
        let f = normal(0.0);
        for seed in [0, 1, 99] {
            let e = dalpha_monte_carlo(&f, &f, AlphaParam::new(0.3).unwrap(), 0.0, 5000, seed).unwrap();
            assert_eq!(e.d_alpha, 1.0);
            assert_eq!(e.mc_std_error, Some(0.0));
        }
    }

    #[test]
    fn gaussian_pair_monte_carlo() {
        let e = dalpha_monte_carlo(&normal(0.0), &normal(1.0), AlphaParam::HALF, 0.0, 100_000, 7).unwrap();
        let se = e.mc_std_error.unwrap();
        assert!((e.d_alpha - 0.882_496_902_584_595).abs() < 3.0 * se, "{e:?}");
    }

    #[test]
    fn tiny_monte_carlo_run_is_reproducible() {
        let a = dalpha_monte_carlo(&normal(0.0), &normal(1.0), AlphaParam::HALF, 0.0, 2, 5).unwrap();
        let b = dalpha_monte_carlo(&normal(0.0), &normal(1.0), AlphaParam::HALF, 0.0, 2, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.d_alpha.is_finite());
        assert!(a.mc_std_error.unwrap() > 0.0);
        assert!(dalpha_monte_carlo(&normal(0.0), &normal(1.0), AlphaParam::HALF, 0.0, 1, 5).is_err());
    }

    #[test]
    fn derived_measures() {
        let half = AlphaParam::HALF;
        assert_eq!(renyi_estimate(&est(1.0, 0.5), half).unwrap(), 0.0);
        assert!((renyi_estimate(&est(0.882_497, 0.5), half).unwrap() - 0.25).abs() < 1e-5);
        assert_eq!(renyi_estimate(&est(0.0, 0.5), half), Err(Error::InfiniteDivergence));
        assert_eq!(tsallis_estimate(&est(1.0, 0.5), half), 0.0);
        assert!((tsallis_estimate(&est(0.882_497, 0.5), half) - 0.235_006).abs() < 1e-12);
        assert_eq!(tsallis_estimate(&est(0.0, 0.5), half), 2.0);
        assert_eq!(hellinger_estimate(&est(1.0, 0.5)).unwrap().value, 0.0);
        assert!((hellinger_estimate(&est(0.882_497, 0.5)).unwrap().value - 0.117_503).abs() < 1e-12);
        assert_eq!(hellinger_estimate(&est(0.0, 0.5)).unwrap().value, 1.0);
        assert!(hellinger_estimate(&est(1.01, 0.5)).unwrap().warning);
        assert_eq!(bhattacharyya_estimate(&est(1.0, 0.5)).unwrap(), 0.0);
        assert!((bhattacharyya_estimate(&est(0.882_496_902_584_595, 0.5)).unwrap() - 0.125).abs() < 1e-12);
        assert_eq!(bhattacharyya_estimate(&est(0.0, 0.5)), Err(Error::InfiniteDivergence));
        assert!(hellinger_estimate(&est(0.9, 0.3)).is_err());
    }

    #[test]
    fn kl_plugin_cases() {
        assert!(kl_plugin(&normal(0.0), &normal(0.0), 0.0, &grid()).unwrap().abs() < 1e-10);
        assert!((kl_plugin(&normal(0.0), &normal(1.0), 0.0, &grid()).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn renyi_tends_to_kl() {
        let mut last = f64::INFINITY;
        for a in [0.9, 0.99, 0.999] {
            let e = dalpha_quadrature(&normal(0.0), &normal(1.0), AlphaParam::new(a).unwrap(), 0.0, &grid()).unwrap();
            let err = (e.renyi - 0.5).abs();
            assert!(err < last, "alpha {a}: {err}");
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn centering_factor() {
        let f = normal(0.0);
        let g = grid();
        let all = vec![true; g.node_count()];
        let k = KernelSpec::second_order(crate::kernel::KernelFamily::Gaussian, 1);
        let v = centered_expectation_dalpha(&f, &f, &k, 1e-3, AlphaParam::HALF, &all, &g).unwrap();
        assert!((v - 1.0).abs() < 1e-3);
        let none = vec![false; g.node_count()];
        assert_eq!(
            centered_expectation_dalpha(&f, &f, &k, 0.3, AlphaParam::HALF, &none, &g).unwrap(),
            0.0
        );
        // E f̂ = N(0, 1 + h²) against N(1, 1)
        let h: f64 = 0.25;
        let v = centered_expectation_dalpha(&f, &normal(1.0), &k, h, AlphaParam::HALF, &all, &g).unwrap();
        let s1 = (1.0 + h * h).sqrt();
        let mixed = 0.5 + 0.5 * s1 * s1;
        let oracle = s1.sqrt() / mixed.sqrt() * (-0.25 / (2.0 * mixed)).exp();
        assert!(
            (v - oracle).abs() < 0.01 && (v - oracle).abs() < 1e-7,
            "{v} vs {oracle}"
        );
    }
}
