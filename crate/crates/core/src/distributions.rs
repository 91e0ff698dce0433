//! Analytic densities with seeded samplers, and the quadrature oracle that
//! supplies the true divergences every experiment is scored against.
//!
//! All shipped families are finite mixtures of coordinate products of
//! univariate factors. The smoothing operator in [`crate::kde`] relies on
//! that structure to reduce `E f̂` to one-dimensional integrals.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::kde::SampleMatrix;
use crate::quadrature::{self, AdaptiveOptions};
use crate::rng;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Number of standard deviations covered by the effective box of a
/// Gaussian factor.
pub const GAUSSIAN_EFFECTIVE_SIGMAS: f64 = 12.0;

/// Truncated Gaussians must keep at least this much of the untruncated mass,
/// so rejection sampling terminates quickly.
pub const MIN_TRUNCATED_MASS: f64 = 1e-3;

/// One mixture component of a [`DensitySpec::GaussianMixture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Serializable description of a density: family name plus parameters.
/// Gaussians are axis-aligned (diagonal covariance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Gaussian {
        mean: Vec<f64>,
        std: Vec<f64>,
    },
    GaussianMixture {
        weights: Vec<f64>,
        components: Vec<GaussianComponent>,
    },
    UniformBoxDensity {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    TruncatedGaussian {
        mean: Vec<f64>,
        std: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFamily {
    Gaussian,
    GaussianMixture,
    UniformBoxDensity,
    TruncatedGaussian,
}

impl DensitySpec {
    pub fn family(&self) -> DensityFamily {
        match self {
            Self::Gaussian { .. } => DensityFamily::Gaussian,
            Self::GaussianMixture { .. } => DensityFamily::GaussianMixture,
            Self::UniformBoxDensity { .. } => DensityFamily::UniformBoxDensity,
            Self::TruncatedGaussian { .. } => DensityFamily::TruncatedGaussian,
        }
    }

    /// Standard normal in `d` dimensions.
    pub fn standard_normal(d: usize) -> Self {
        Self::Gaussian {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }
}

/// Where a density is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Whole,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// Univariate factor of a product component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Factor {
    Normal {
        mean: f64,
        std: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
    TruncatedNormal {
        mean: f64,
        std: f64,
        lower: f64,
        upper: f64,
        mass: f64,
    },
}

impl Factor {
    pub(crate) fn density(&self, x: f64) -> f64 {
        match *self {
            Factor::Normal { mean, std } => normal_pdf(x, mean, std),
            Factor::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            Factor::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
                mass,
            } => {
                if (lower..=upper).contains(&x) {
                    normal_pdf(x, mean, std) / mass
                } else {
                    0.0
                }
            }
        }
    }

    fn log_density(&self, x: f64) -> f64 {
        match *self {
            Factor::Normal { mean, std } => normal_log_pdf(x, mean, std),
            Factor::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Factor::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
                mass,
            } => {
                if (lower..=upper).contains(&x) {
                    normal_log_pdf(x, mean, std) - mass.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Points where the factor is discontinuous.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Factor::Normal { .. } => Vec::new(),
            Factor::Uniform { lower, upper } | Factor::TruncatedNormal { lower, upper, .. } => {
                vec![lower, upper]
            }
        }
    }

    fn effective_interval(&self) -> (f64, f64) {
        match *self {
            Factor::Normal { mean, std } => (
                mean - GAUSSIAN_EFFECTIVE_SIGMAS * std,
                mean + GAUSSIAN_EFFECTIVE_SIGMAS * std,
            ),
            Factor::Uniform { lower, upper } | Factor::TruncatedNormal { lower, upper, .. } => (lower, upper),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Factor::Normal { mean, std } => mean + std * rng.sample::<f64, _>(StandardNormal),
            Factor::Uniform { lower, upper } => lower + (upper - lower) * rng.random::<f64>(),
            Factor::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
                ..
            } => loop {
                let x = mean + std * rng.sample::<f64, _>(StandardNormal);
                if (lower..=upper).contains(&x) {
                    break x;
                }
            },
        }
    }

    /// Maximum of |f'| over the line (only for the continuous factor).
    fn slope_bound(&self) -> Option<f64> {
        match *self {
            Factor::Normal { std, .. } => Some(normal_pdf(1.0, 0.0, 1.0) / (std * std)),
            _ => None,
        }
    }

    fn sup(&self) -> f64 {
        match *self {
            Factor::Normal { std, .. } => normal_pdf(0.0, 0.0, std),
            Factor::Uniform { lower, upper } => 1.0 / (upper - lower),
            Factor::TruncatedNormal {
                mean,
                std,
                lower,
                upper,
                mass,
            } => normal_pdf(mean.clamp(lower, upper), mean, std) / mass,
        }
    }

    fn inf_on_support(&self) -> Option<f64> {
        match *self {
            Factor::Normal { .. } => None,
            Factor::Uniform { lower, upper } => Some(1.0 / (upper - lower)),
            Factor::TruncatedNormal { lower, upper, .. } => Some(self.density(lower).min(self.density(upper))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Component {
    pub weight: f64,
    pub factors: Vec<Factor>,
}

fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z - LN_SQRT_2PI).exp() / std
}

fn normal_log_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - LN_SQRT_2PI - std.ln()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// An evaluatable, sampleable density with known support.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDensity {
    spec: DensitySpec,
    dimension: usize,
    components: Vec<Component>,
    support: Support,
    lipschitz_bound: Option<f64>,
    /// Continuous derivatives on the support interior; `None` means every
    /// order (all shipped families are smooth inside their support).
    smoothness_order: Option<u32>,
    support_floor: Option<f64>,
}

fn check_vector(name: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::Parameter(format!("{name} has length {}, expected {d}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter(format!("{name} contains non-finite values")));
    }
    Ok(())
}

fn check_positive(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Parameter(format!("{name} must be strictly positive")));
    }
    Ok(())
}

fn check_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(Error::Parameter("box requires lower < upper on every axis".into()));
    }
    Ok(())
}

impl AnalyticDensity {
    /// Builds and oracle-checks a density. Fails when parameters are invalid
    /// or a factor does not integrate to one within 1e-8.
    pub fn new(spec: DensitySpec) -> Result<Self> {
        let (dimension, components, support) = match &spec {
            DensitySpec::Gaussian { mean, std } => {
                let d = mean.len();
                if d == 0 {
                    return Err(Error::Parameter("density dimension must be positive".into()));
                }
                check_vector("std", std, d)?;
                check_vector("mean", mean, d)?;
                check_positive("std", std)?;
                let factors = mean
                    .iter()
                    .zip(std)
                    .map(|(&mean, &std)| Factor::Normal { mean, std })
                    .collect();
                (d, vec![Component { weight: 1.0, factors }], Support::Whole)
            }
            DensitySpec::GaussianMixture { weights, components } => {
                if components.is_empty() || weights.len() != components.len() {
                    return Err(Error::Parameter(
                        "mixture needs one weight per component and at least one component".into(),
                    ));
                }
                if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                    return Err(Error::Parameter("mixture weights must be positive".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Parameter(format!("mixture weights sum to {total}, expected 1")));
                }
                let d = components[0].mean.len();
                if d == 0 {
                    return Err(Error::Parameter("density dimension must be positive".into()));
                }
                let mut comps = Vec::with_capacity(components.len());
                for (c, &weight) in components.iter().zip(weights) {
                    check_vector("component mean", &c.mean, d)?;
                    check_vector("component std", &c.std, d)?;
                    check_positive("component std", &c.std)?;
                    comps.push(Component {
                        weight,
                        factors: c
                            .mean
                            .iter()
                            .zip(&c.std)
                            .map(|(&mean, &std)| Factor::Normal { mean, std })
                            .collect(),
                    });
                }
                (d, comps, Support::Whole)
            }
            DensitySpec::UniformBoxDensity { lower, upper } => {
                let d = lower.len();
                if d == 0 {
                    return Err(Error::Parameter("density dimension must be positive".into()));
                }
                check_vector("lower", lower, d)?;
                check_vector("upper", upper, d)?;
                check_box(lower, upper)?;
                let factors = lower
                    .iter()
                    .zip(upper)
                    .map(|(&lower, &upper)| Factor::Uniform { lower, upper })
                    .collect();
                let support = Support::Box {
                    lower: lower.clone(),
                    upper: upper.clone(),
                };
                (d, vec![Component { weight: 1.0, factors }], support)
            }
            DensitySpec::TruncatedGaussian {
                mean,
                std,
                lower,
                upper,
            } => {
                let d = mean.len();
                if d == 0 {
                    return Err(Error::Parameter("density dimension must be positive".into()));
                }
                check_vector("mean", mean, d)?;
                check_vector("std", std, d)?;
                check_vector("lower", lower, d)?;
                check_vector("upper", upper, d)?;
                check_positive("std", std)?;
                check_box(lower, upper)?;
                let mut factors = Vec::with_capacity(d);
                for i in 0..d {
                    let a = (lower[i] - mean[i]) / std[i];
                    let b = (upper[i] - mean[i]) / std[i];
                    // difference of upper tails is accurate on both sides of the mean
                    let mass = if a > 0.0 {
                        normal_cdf(-a) - normal_cdf(-b)
                    } else {
                        normal_cdf(b) - normal_cdf(a)
                    };
                    if mass < MIN_TRUNCATED_MASS {
                        return Err(Error::Parameter(format!(
                            "truncation box keeps only {mass:e} of the Gaussian mass on axis {i}"
                        )));
                    }
                    factors.push(Factor::TruncatedNormal {
                        mean: mean[i],
                        std: std[i],
                        lower: lower[i],
                        upper: upper[i],
                        mass,
                    });
                }
                let support = Support::Box {
                    lower: lower.clone(),
                    upper: upper.clone(),
                };
                (d, vec![Component { weight: 1.0, factors }], support)
            }
        };

        for (c, comp) in components.iter().enumerate() {
            for (axis, factor) in comp.factors.iter().enumerate() {
                let (a, b) = factor.effective_interval();
                let mut cuts = vec![a];
                if let Factor::Normal { mean, .. } = factor {
                    cuts.push(*mean);
                }
                cuts.push(b);
                let mut mass = 0.0;
                for w in cuts.windows(2) {
                    mass += quadrature::adaptive(|x| factor.density(x), w[0], w[1], AdaptiveOptions::default())?;
                }
                if (mass - 1.0).abs() > 1e-8 {
                    return Err(Error::Numeric(format!(
                        "component {c} axis {axis} integrates to {mass}, not 1"
                    )));
                }
            }
        }

        let lipschitz_bound = lipschitz_bound(&components);
        let support_floor = match support {
            Support::Whole => None,
            Support::Box { .. } => components[0]
                .factors
                .iter()
                .map(Factor::inf_on_support)
                .product::<Option<f64>>(),
        };

        Ok(Self {
            spec,
            dimension,
            components,
            support,
            lipschitz_bound,
            smoothness_order: None,
            support_floor,
        })
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn family(&self) -> DensityFamily {
        self.spec.family()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }

    pub fn smoothness_order(&self) -> Option<u32> {
        self.smoothness_order
    }

    /// Positive lower bound of the density on a compact support.
    pub fn support_floor(&self) -> Option<f64> {
        self.support_floor
    }

    pub(crate) fn components(&self) -> &[Component] {
        &self.components
    }

    /// Largest value of the density.
    pub fn sup(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.factors.iter().map(Factor::sup).product::<f64>())
            .sum()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        self.components
            .iter()
            .map(|c| {
                let mut v = c.weight;
                for (f, &xi) in c.factors.iter().zip(x) {
                    v *= f.density(xi);
                    if v == 0.0 {
                        break;
                    }
                }
                v
            })
            .sum()
    }

    /// Natural log of the density, accurate far in the tails.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.factors.iter().zip(x).map(|(f, &xi)| f.log_density(xi)).sum::<f64>())
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return top;
        }
        top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
    }

    /// `true` when `x` lies in the support.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.support {
            Support::Whole => true,
            Support::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| (l..=u).contains(&v)),
        }
    }

    /// Box carrying all but a negligible part of the mass: the support when
    /// compact, otherwise ±12 standard deviations around every component.
    pub fn effective_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lower = vec![f64::INFINITY; self.dimension];
        let mut upper = vec![f64::NEG_INFINITY; self.dimension];
        for c in &self.components {
            for (axis, f) in c.factors.iter().enumerate() {
                let (a, b) = f.effective_interval();
                lower[axis] = lower[axis].min(a);
                upper[axis] = upper[axis].max(b);
            }
        }
        (lower, upper)
    }

    /// Draws `n` i.i.d. points; identical `(n, seed)` gives identical output.
    pub fn draw_sample(&self, n: usize, seed: u64) -> Result<SampleMatrix> {
        if n == 0 {
            return Err(Error::Parameter("sample size must be positive".into()));
        }
        let mut rng = rng::stream(seed, 0);
        let mut data = Vec::with_capacity(n * self.dimension);
        for _ in 0..n {
            self.draw_into(&mut rng, &mut data);
        }
        SampleMatrix::new(data, self.dimension, seed)
    }

    /// Appends one draw to `out`.
    pub(crate) fn draw_into(&self, rng: &mut impl Rng, out: &mut Vec<f64>) {
        let comp = if self.components.len() == 1 {
            &self.components[0]
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.components.last().expect("non-empty mixture");
            for c in &self.components {
                acc += c.weight;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            chosen
        };
        for f in &comp.factors {
            out.push(f.draw(rng));
        }
    }
}

fn lipschitz_bound(components: &[Component]) -> Option<f64> {
    let mut total = 0.0;
    for c in components {
        let sups: Vec<f64> = c.factors.iter().map(Factor::sup).collect();
        let mut sq = 0.0;
        for (i, f) in c.factors.iter().enumerate() {
            let others: f64 = sups
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, s)| s)
                .product();
            let partial = f.slope_bound()? * others;
            sq += partial * partial;
        }
        total += c.weight * sq.sqrt();
    }
    Some(total)
}

/// Ground-truth values of every divergence between two analytic densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueDivergences {
    pub alpha: f64,
    /// `∫ f^α g^{1−α}`.
    pub d_alpha: f64,
    pub renyi: f64,
    pub tsallis: f64,
    pub kl: f64,
    pub hellinger: f64,
    pub bhattacharyya: f64,
    /// `∫ f^{1/2} g^{1/2}`, the integral behind Hellinger and Bhattacharyya.
    pub d_half: f64,
}

impl TrueDivergences {
    fn assemble(alpha: f64, d_alpha: f64, d_half: f64, kl: f64) -> Self {
        Self {
            alpha,
            d_alpha,
            renyi: d_alpha.ln() / (alpha - 1.0),
            tsallis: (d_alpha - 1.0) / (alpha - 1.0),
            kl,
            hellinger: 1.0 - d_half,
            bhattacharyya: -d_half.ln(),
            d_half,
        }
    }
}

/// Agreement required between a closed form and the quadrature oracle.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-6;

/// Oracle for all six divergences. Gaussian pairs use closed forms,
/// cross-checked against quadrature; other pairs use adaptive quadrature.
pub fn true_divergences(f: &AnalyticDensity, g: &AnalyticDensity, alpha: f64) -> Result<TrueDivergences> {
    check_pair(f, g)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let d_alpha = dalpha_oracle(f, g, alpha)?;
    let d_half = if alpha == 0.5 {
        d_alpha
    } else {
        dalpha_oracle(f, g, 0.5)?
    };
    let kl = kl_oracle(f, g)?;

    if let Some((cf_alpha, cf_half, cf_kl)) = gaussian_closed_forms(f, g, alpha) {
        for (name, closed, quad) in [
            ("d_alpha", cf_alpha, d_alpha),
            ("d_half", cf_half, d_half),
            ("kl", cf_kl, kl),
        ] {
            if (closed - quad).abs() > CLOSED_FORM_TOLERANCE {
                return Err(Error::Numeric(format!(
                    "{name}: closed form {closed} disagrees with quadrature {quad}"
                )));
            }
        }
        return Ok(TrueDivergences::assemble(alpha, cf_alpha, cf_half, cf_kl));
    }
    Ok(TrueDivergences::assemble(alpha, d_alpha, d_half, kl))
}

fn check_pair(f: &AnalyticDensity, g: &AnalyticDensity) -> Result<()> {
    if f.dimension() != g.dimension() {
        return Err(Error::Parameter(format!(
            "densities have dimensions {} and {}",
            f.dimension(),
            g.dimension()
        )));
    }
    Ok(())
}

/// Closed forms `(∫f^α g^{1−α}, ∫f^{1/2} g^{1/2}, KL)` for two axis-aligned
/// Gaussians; `None` for any other pair.
pub fn gaussian_closed_forms(f: &AnalyticDensity, g: &AnalyticDensity, alpha: f64) -> Option<(f64, f64, f64)> {
    let (DensitySpec::Gaussian { mean: m1, std: s1 }, DensitySpec::Gaussian { mean: m2, std: s2 }) =
        (f.spec(), g.spec())
    else {
        return None;
    };
    let dalpha = |a: f64| -> f64 {
        m1.iter()
            .zip(s1)
            .zip(m2.iter().zip(s2))
            .map(|((&mu1, &sd1), (&mu2, &sd2))| {
                let mixed = a * sd2 * sd2 + (1.0 - a) * sd1 * sd1;
                let diff = mu1 - mu2;
                sd1.powf(1.0 - a) * sd2.powf(a) / mixed.sqrt() * (-a * (1.0 - a) * diff * diff / (2.0 * mixed)).exp()
            })
            .product()
    };
    let kl: f64 = m1
        .iter()
        .zip(s1)
        .zip(m2.iter().zip(s2))
        .map(|((&mu1, &sd1), (&mu2, &sd2))| {
            let diff = mu1 - mu2;
            (sd2 / sd1).ln() + (sd1 * sd1 + diff * diff) / (2.0 * sd2 * sd2) - 0.5
        })
        .sum();
    Some((dalpha(alpha), dalpha(0.5), kl))
}

fn oracle_options(d: usize) -> AdaptiveOptions {
    match d {
        1 => AdaptiveOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_panels: 20_000,
        },
        _ => AdaptiveOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_panels: 4_000,
        },
    }
}

/// Integration domain for an integrand supported where both densities are
/// positive: the hull of both effective boxes, cut to any compact support.
/// The flag reports whether the integrand can have mass outside the box.
fn pair_domain(densities: &[&AnalyticDensity]) -> (Vec<f64>, Vec<f64>, bool) {
    let d = densities[0].dimension();
    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    for den in densities {
        let (l, u) = den.effective_box();
        for i in 0..d {
            lower[i] = lower[i].min(l[i]);
            upper[i] = upper[i].max(u[i]);
        }
    }
    let mut unbounded = true;
    for den in densities {
        if let Support::Box { lower: l, upper: u } = den.support() {
            unbounded = false;
            for i in 0..d {
                lower[i] = lower[i].max(l[i]);
                upper[i] = upper[i].min(u[i]);
            }
        }
    }
    (lower, upper, unbounded)
}

/// Integrates `integrand` over the domain and, when the domain truncates an
/// unbounded integrand, verifies that each tail slab is negligible.
fn integrate_with_tails(
    integrand: &dyn Fn(&[f64]) -> f64,
    lower: &[f64],
    upper: &[f64],
    unbounded: bool,
    what: &str,
) -> Result<f64> {
    let d = lower.len();
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        // disjoint supports
        return Ok(0.0);
    }
    let opts = oracle_options(d);
    let total = quadrature::adaptive_box(integrand, lower, upper, opts)?;
    if !total.is_finite() {
        return Err(Error::Domain(format!("{what}: integral is not finite")));
    }
    if unbounded {
        for axis in 0..d {
            let width = upper[axis] - lower[axis];
            for (side, lo, hi) in [
                ("lower", lower[axis] - width, lower[axis]),
                ("upper", upper[axis], upper[axis] + width),
            ] {
                let mut l = lower.to_vec();
                let mut u = upper.to_vec();
                l[axis] = lo;
                u[axis] = hi;
                let slab = quadrature::adaptive_box(integrand, &l, &u, opts)
                    .map_err(|e| Error::Domain(format!("{what}: {side} tail of axis {axis} failed: {e}")))?;
                if !slab.is_finite() || slab.abs() > 1e-9 * total.abs().max(1.0) {
                    return Err(Error::Domain(format!(
                        "{what}: {side} tail of axis {axis} carries {slab:e}; integral is not \
                         meaningful over the truncated domain"
                    )));
                }
            }
        }
    }
    Ok(total)
}

/// `∫ f^α g^{1−α}` by adaptive quadrature.
pub fn dalpha_oracle(f: &AnalyticDensity, g: &AnalyticDensity, alpha: f64) -> Result<f64> {
    check_pair(f, g)?;
    let (lower, upper, unbounded) = pair_domain(&[f, g]);
    let integrand = |x: &[f64]| {
        let lf = f.log_density(x);
        let lg = g.log_density(x);
        if lf == f64::NEG_INFINITY || lg == f64::NEG_INFINITY {
            0.0
        } else {
            (alpha * lf + (1.0 - alpha) * lg).exp()
        }
    };
    integrate_with_tails(&integrand, &lower, &upper, unbounded, "∫f^α g^(1-α)")
}

/// `∫ f log(f/g)` by adaptive quadrature. Infinite when `f` puts mass where
/// `g` vanishes.
pub fn kl_oracle(f: &AnalyticDensity, g: &AnalyticDensity) -> Result<f64> {
    check_pair(f, g)?;
    if let (Support::Box { lower: fl, upper: fu }, support_g) = (f.support(), g.support()) {
        if let Support::Box { lower: gl, upper: gu } = support_g {
            let inside = (0..f.dimension()).all(|i| gl[i] <= fl[i] && fu[i] <= gu[i]);
            if !inside {
                return Err(Error::Domain(
                    "KL is infinite: support of f exceeds support of g".into(),
                ));
            }
        }
    } else if matches!(g.support(), Support::Box { .. }) {
        return Err(Error::Domain(
            "KL is infinite: f has unbounded support, g is compact".into(),
        ));
    }
    let (lower, upper) = match f.support() {
        Support::Box { lower, upper } => (lower.clone(), upper.clone()),
        Support::Whole => {
            let (l, u, _) = pair_domain(&[f]);
            (l, u)
        }
    };
    let unbounded = matches!(f.support(), Support::Whole);
    let integrand = |x: &[f64]| {
        let lf = f.log_density(x);
        if lf == f64::NEG_INFINITY {
            return 0.0;
        }
        lf.exp() * (lf - g.log_density(x))
    };
    integrate_with_tails(&integrand, &lower, &upper, unbounded, "∫f log(f/g)")
}

/// `∫ g^p` over the whole space (`p > 0`). Closed form for Gaussians,
/// quadrature with a tail check otherwise.
pub fn power_integral(g: &AnalyticDensity, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Parameter(format!("exponent must be positive, got {p}")));
    }
    if let DensitySpec::Gaussian { std, .. } = g.spec() {
        return Ok(std
            .iter()
            .map(|&s| (2.0 * std::f64::consts::PI * s * s).powf(0.5 * (1.0 - p)) / p.sqrt())
            .product());
    }
    let (lower, upper, unbounded) = pair_domain(&[g]);
    let integrand = |x: &[f64]| {
        let l = g.log_density(x);
        if l == f64::NEG_INFINITY {
            0.0
        } else {
            (p * l).exp()
        }
    };
    integrate_with_tails(&integrand, &lower, &upper, unbounded, "∫g^p")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(mean: f64, std: f64) -> AnalyticDensity {
        AnalyticDensity::new(DensitySpec::Gaussian {
            mean: vec![mean],
            std: vec![std],
        })
        .unwrap()
    }

    fn bimodal() -> AnalyticDensity {
        AnalyticDensity::new(DensitySpec::GaussianMixture {
            weights: vec![0.5, 0.5],
            components: vec![
                GaussianComponent {
                    mean: vec![-1.0],
                    std: vec![1.0],
                },
                GaussianComponent {
                    mean: vec![1.0],
                    std: vec![1.0],
                },
            ],
        })
        .unwrap()
    }

    #[test]
    fn density_values() {
        assert!((normal(0.0, 1.0).density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
        let u = AnalyticDensity::new(DensitySpec::UniformBoxDensity {
            lower: vec![0.0],
            upper: vec![1.0],
        })
        .unwrap();
        assert_eq!(u.density(&[2.0]), 0.0);
        assert_eq!(u.support_floor(), Some(1.0));
        let phi1 = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((bimodal().density(&[0.0]) - phi1).abs() < 1e-15);
        assert!((phi1 - 0.241_970_724_519_143_37).abs() < 1e-15);
    }

    #[test]
    fn log_density_matches_density() {
        let m = bimodal();
        for x in [-3.0, -0.2, 0.0, 1.7, 5.0] {
            assert!((m.log_density(&[x]).exp() - m.density(&[x])).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(AnalyticDensity::new(DensitySpec::Gaussian {
            mean: vec![0.0],
            std: vec![0.0]
        })
        .is_err());
        assert!(AnalyticDensity::new(DensitySpec::UniformBoxDensity {
            lower: vec![1.0],
            upper: vec![0.0]
        })
        .is_err());
        assert!(AnalyticDensity::new(DensitySpec::GaussianMixture {
            weights: vec![0.3, 0.3],
            components: vec![
                GaussianComponent {
                    mean: vec![0.0],
                    std: vec![1.0]
                },
                GaussianComponent {
                    mean: vec![1.0],
                    std: vec![1.0]
                },
            ],
        })
        .is_err());
        assert!(AnalyticDensity::new(DensitySpec::TruncatedGaussian {
            mean: vec![0.0],
            std: vec![1.0],
            lower: vec![10.0],
            upper: vec![11.0],
        })
        .is_err());
    }

    #[test]
    fn truncated_gaussian_floor_and_samples() {
        let t = AnalyticDensity::new(DensitySpec::TruncatedGaussian {
            mean: vec![0.0],
            std: vec![1.0],
            lower: vec![-1.0],
            upper: vec![2.0],
        })
        .unwrap();
        let mass = normal_cdf(2.0) - normal_cdf(-1.0);
        let floor = normal(0.0, 1.0).density(&[2.0]) / mass;
        assert!((t.support_floor().unwrap() - floor).abs() < 1e-14);
        let s = t.draw_sample(2000, 3).unwrap();
        assert!(s.rows().all(|r| (-1.0..=2.0).contains(&r[0])));
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = bimodal();
        let a = m.draw_sample(1, 99).unwrap();
        let b = m.draw_sample(1, 99).unwrap();
        assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
        assert_eq!(a.n(), 1);
        assert_eq!(a.seed(), 99);
    }

    #[test]
    fn standard_normal_sample_mean() {
        let n = 10_000;
        let s = normal(0.0, 1.0).draw_sample(n, 11).unwrap();
        let mean = s.data().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn gaussian_pair_truth() {
        let t = true_divergences(&normal(0.0, 1.0), &normal(1.0, 1.0), 0.5).unwrap();
        let d = (-0.125f64).exp();
        assert!((t.d_alpha - d).abs() < 1e-12);
        assert!((t.renyi - 0.25).abs() < 1e-12);
        assert!((t.tsallis - 2.0 * (1.0 - d)).abs() < 1e-12);
        assert!((t.kl - 0.5).abs() < 1e-12);
        assert!((t.hellinger - (1.0 - d)).abs() < 1e-12);
        assert!((t.bhattacharyya - 0.125).abs() < 1e-12);
        // quadrature route alone
        assert!((dalpha_oracle(&normal(0.0, 1.0), &normal(1.0, 1.0), 0.5).unwrap() - d).abs() < 1e-8);
    }

    #[test]
    fn identical_densities_have_zero_divergence() {
        for f in [normal(0.3, 0.7), bimodal()] {
            let t = true_divergences(&f, &f, 0.3).unwrap();
            assert!((t.d_alpha - 1.0).abs() < 1e-8);
            for v in [t.renyi, t.tsallis, t.kl, t.hellinger, t.bhattacharyya] {
                assert!(v.abs() < 1e-8, "{v}");
            }
        }
    }

    #[test]
    fn unequal_scales_pinned() {
        let t = true_divergences(&normal(0.0, 1.0), &normal(0.0, 2.0), 0.5).unwrap();
        assert!((t.d_alpha - (0.8f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn power_integral_closed_form_vs_quadrature() {
        let g = normal(1.0, 1.5);
        let closed = power_integral(&g, 0.5).unwrap();
        let (l, u, _) = pair_domain(&[&g]);
        let quad = quadrature::adaptive(|x| g.density(&[x]).sqrt(), l[0], u[0], AdaptiveOptions::default()).unwrap();
        assert!((closed - quad).abs() < 1e-9);
        // mixture goes through quadrature
        let m = power_integral(&bimodal(), 1.0).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kl_infinite_when_support_escapes() {
        let u = AnalyticDensity::new(DensitySpec::UniformBoxDensity {
            lower: vec![0.0],
            upper: vec![1.0],
        })
        .unwrap();
        assert!(matches!(kl_oracle(&normal(0.0, 1.0), &u), Err(Error::Domain(_))));
        let v = kl_oracle(&u, &normal(0.0, 1.0)).unwrap();
        // ∫_0^1 −log φ(x) dx = log√(2π) + 1/6
        assert!((v - (LN_SQRT_2PI + 1.0 / 6.0)).abs() < 1e-10);
    }

    #[test]
    fn lipschitz_bound_of_standard_normal() {
        let l = normal(0.0, 1.0).lipschitz_bound().unwrap();
        assert!((l - 0.241_970_724_519_143_37).abs() < 1e-15);
    }
}
