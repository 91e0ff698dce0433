//! Smoothing kernels for the density estimator and their numerical checks.
//!
//! Every multivariate kernel is the coordinate product of a univariate base
//! kernel, so boundedness, unit mass and symmetry follow from the base. The
//! bounded-variation and right-continuity requirements hold by construction
//! for the three shipped families and are not checked numerically.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::CompositeRule;

/// Gaussian truncation radius used when a kernel integral is computed by
/// quadrature. The mass beyond it is below 1e-14 per axis.
pub const GAUSSIAN_RADIUS: f64 = 8.0;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Univariate base kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// Standard normal density.
    Gaussian,
    /// `3/4 (1 − u²)` on `[-1, 1]`.
    #[serde(alias = "epanechnikov_product")]
    Epanechnikov,
    /// `1/2` on `[-1, 1]`.
    #[serde(alias = "box")]
    UniformBox,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [Self::Gaussian, Self::Epanechnikov, Self::UniformBox];

    #[inline]
    pub fn base(self, u: f64) -> f64 {
        match self {
            Self::Gaussian => FRAC_1_SQRT_2PI * (-0.5 * u * u).exp(),
            Self::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Self::UniformBox => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Half-width of the region carrying the kernel mass.
    pub fn radius(self) -> f64 {
        match self {
            Self::Gaussian => GAUSSIAN_RADIUS,
            Self::Epanechnikov | Self::UniformBox => 1.0,
        }
    }

    pub fn is_compact(self) -> bool {
        !matches!(self, Self::Gaussian)
    }

    fn base_sup(self) -> f64 {
        match self {
            Self::Gaussian => FRAC_1_SQRT_2PI,
            Self::Epanechnikov => 0.75,
            Self::UniformBox => 0.5,
        }
    }

    fn base_square_integral(self) -> f64 {
        match self {
            Self::Gaussian => 0.5 / PI.sqrt(),
            Self::Epanechnikov => 0.6,
            Self::UniformBox => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Epanechnikov => "epanechnikov",
            Self::UniformBox => "box",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "epanechnikov" | "epanechnikov_product" => Ok(Self::Epanechnikov),
            "box" | "uniform_box" => Ok(Self::UniformBox),
            other => Err(Error::Parameter(format!(
                "unknown kernel family '{other}' (expected gaussian, epanechnikov or box)"
            ))),
        }
    }
}

/// A product kernel on `R^d` with a claimed order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub dimension: usize,
    pub order: u32,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dimension: usize, order: u32) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Parameter("kernel dimension must be positive".into()));
        }
        if order < 2 {
            return Err(Error::Parameter(format!(
                "kernel order must be at least 2, got {order}"
            )));
        }
        Ok(Self {
            family,
            dimension,
            order,
        })
    }

    /// Second-order kernel of the given family.
    pub fn second_order(family: KernelFamily, dimension: usize) -> Self {
        Self {
            family,
            dimension,
            order: 2,
        }
    }

    /// `K(u)`; rejects non-finite input and dimension mismatches.
    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dimension {
            return Err(Error::Parameter(format!(
                "point has dimension {}, kernel has dimension {}",
                u.len(),
                self.dimension
            )));
        }
        if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("kernel argument is not finite: {bad}")));
        }
        Ok(self.eval_unchecked(u))
    }

    /// Product kernel value without argument validation (hot path).
    #[inline]
    pub(crate) fn eval_unchecked(&self, u: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = u.iter().map(|v| v * v).sum();
                FRAC_1_SQRT_2PI.powi(self.dimension as i32) * (-0.5 * sq).exp()
            }
            family => {
                let mut k = 1.0;
                for &v in u {
                    k *= family.base(v);
                    if k == 0.0 {
                        break;
                    }
                }
                k
            }
        }
    }

    /// `∫ K²(u) du`, closed form (product of the univariate values).
    pub fn square_integral(&self) -> f64 {
        self.family.base_square_integral().powi(self.dimension as i32)
    }

    /// `∫ K²(u) du` by tensor quadrature; the independent check of
    /// [`KernelSpec::square_integral`].
    pub fn square_integral_quadrature(&self) -> f64 {
        let rule = self.rule();
        tensor_sum(&rule, self.dimension, |u, w| {
            let k = self.eval_unchecked(u);
            w * k * k
        })
    }

    /// `sup |K|` (attained at the origin for all shipped families).
    pub fn sup_norm(&self) -> f64 {
        self.family.base_sup().powi(self.dimension as i32)
    }

    fn rule(&self) -> CompositeRule {
        let r = self.family.radius();
        let panels = if self.family.is_compact() { 4 } else { 16 };
        CompositeRule::new(-r, r, panels, 8)
    }

    /// Numerically checks boundedness, unit mass, symmetry, nonnegativity and
    /// the claimed order.
    pub fn validate(&self, tolerance: f64) -> Result<ValidationReport> {
        if !(tolerance > 0.0) {
            return Err(Error::Parameter(format!("tolerance must be positive, got {tolerance}")));
        }
        let d = self.dimension;
        let s = self.order as usize;

        // Probe grid slightly wider than the support.
        let probe_axis = match d {
            1 => 401,
            2 => 81,
            _ => 21,
        };
        let r = self.family.radius() + 0.5;
        let probe = crate::quadrature::linspace(probe_axis, -r, r);
        let mut sup: f64 = 0.0;
        let mut min: f64 = f64::INFINITY;
        let mut asym: f64 = 0.0;
        let mut u = vec![0.0; d];
        let mut neg = vec![0.0; d];
        for_each_index(probe_axis, d, |idx| {
            for (a, &i) in idx.iter().enumerate() {
                u[a] = probe[i];
                neg[a] = -probe[i];
            }
            let k = self.eval_unchecked(&u);
            sup = sup.max(k.abs());
            min = min.min(k);
            asym = asym.max((k - self.eval_unchecked(&neg)).abs());
        });
        sup = sup.max(self.eval_unchecked(&vec![0.0; d]).abs());

        let exponents = multi_indices(d, s);
        let rule = self.rule();
        let powers: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&x| (0..=s).map(|p| x.powi(p as i32)).collect())
            .collect();
        let mut signed = vec![0.0; exponents.len()];
        let mut absolute = vec![0.0; exponents.len()];
        let m = rule.nodes.len();
        let mut point = vec![0.0; d];
        for_each_index(m, d, |idx| {
            let mut w = 1.0;
            for (a, &i) in idx.iter().enumerate() {
                point[a] = rule.nodes[i];
                w *= rule.weights[i];
            }
            let k = self.eval_unchecked(&point) * w;
            if k == 0.0 {
                return;
            }
            for (e, exps) in exponents.iter().enumerate() {
                let mut mono = 1.0;
                for (a, &p) in exps.iter().enumerate() {
                    mono *= powers[idx[a]][p as usize];
                }
                signed[e] += mono * k;
                absolute[e] += mono.abs() * k;
            }
        });

        let moments: Vec<Moment> = exponents
            .into_iter()
            .zip(signed.iter().zip(&absolute))
            .map(|(exponents, (&value, &absolute))| Moment {
                exponents,
                value,
                absolute,
            })
            .collect();

        let integral = moments[0].value;
        let worst_low = moments
            .iter()
            .filter(|m| (1..s).contains(&m.degree()))
            .map(|m| m.value.abs())
            .fold(0.0, f64::max);
        let top: Vec<&Moment> = moments.iter().filter(|m| m.degree() == s).collect();
        let weakest_top = top.iter().map(|m| m.absolute).fold(f64::INFINITY, f64::min);
        let rho = top
            .iter()
            .find(|m| m.exponents[0] as usize == s)
            .map(|m| m.absolute)
            .unwrap_or(f64::NAN);

        let bound = self.sup_norm();
        let checks = vec![
            ConditionCheck {
                condition: Condition::Bounded,
                passed: sup.is_finite() && sup <= bound * (1.0 + 1e-12),
                measured: sup,
            },
            ConditionCheck {
                condition: Condition::UnitMass,
                passed: (integral - 1.0).abs() < tolerance,
                measured: integral,
            },
            ConditionCheck {
                condition: Condition::Symmetric,
                passed: asym <= tolerance,
                measured: asym,
            },
            ConditionCheck {
                condition: Condition::Nonnegative,
                passed: min >= 0.0,
                measured: min,
            },
            ConditionCheck {
                condition: Condition::Order,
                passed: worst_low < tolerance && weakest_top > tolerance,
                measured: worst_low,
            },
        ];

        Ok(ValidationReport {
            kernel: *self,
            tolerance,
            integral,
            sup_probe: sup,
            rho,
            moments,
            checks,
        })
    }
}

/// Visits every multi-index in `{0..len}^d` in row-major order.
pub(crate) fn for_each_index(len: usize, d: usize, mut f: impl FnMut(&[usize])) {
    if len == 0 {
        return;
    }
    let mut idx = vec![0usize; d];
    loop {
        f(&idx);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < len {
                break;
            }
            idx[axis] = 0;
        }
    }
}

fn tensor_sum(rule: &CompositeRule, d: usize, f: impl Fn(&[f64], f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut point = vec![0.0; d];
    for_each_index(rule.nodes.len(), d, |idx| {
        let mut w = 1.0;
        for (a, &i) in idx.iter().enumerate() {
            point[a] = rule.nodes[i];
            w *= rule.weights[i];
        }
        total += f(&point, w);
    });
    total
}

/// All exponent vectors of length `d` with total degree ≤ `max_degree`,
/// ordered by degree.
fn multi_indices(d: usize, max_degree: usize) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, d: usize, remaining: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == d {
            prefix.push(remaining as u32);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for p in (0..=remaining).rev() {
            prefix.push(p as u32);
            fill(prefix, d, remaining - p, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        fill(&mut Vec::with_capacity(d), d, degree, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `sup |K| < ∞`.
    Bounded,
    /// `∫ K = 1`.
    UnitMass,
    /// `K(u) = K(−u)`.
    Symmetric,
    /// `K ≥ 0`.
    Nonnegative,
    /// Moments of degree `1..s−1` vanish and degree-`s` absolute moments do not.
    Order,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    pub measured: f64,
}

/// `∫ u^j K(u) du` and `∫ |u^j| K(u) du` for one exponent vector `j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Moment {
    pub exponents: Vec<u32>,
    pub value: f64,
    pub absolute: f64,
}

impl Moment {
    pub fn degree(&self) -> usize {
        self.exponents.iter().map(|&e| e as usize).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kernel: KernelSpec,
    pub tolerance: f64,
    pub integral: f64,
    pub sup_probe: f64,
    /// Absolute moment of degree `s` along the first axis.
    pub rho: f64,
    pub moments: Vec<Moment>,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, condition: Condition) -> &ConditionCheck {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .expect("every condition is checked")
    }

    pub fn moment(&self, exponents: &[u32]) -> Option<&Moment> {
        self.moments.iter().find(|m| m.exponents == exponents)
    }
}
