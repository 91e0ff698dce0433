//! Numerical integration rules shared by the kernel checks, the smoothing
//! operator and the ground-truth oracle.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss–Legendre rule on `[a, b]`, flattened to nodes/weights.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + width * p as f64;
            let mid = lo + 0.5 * width;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Trapezoid weights for `points` equispaced nodes spanning `[a, b]`.
///
/// A single point gets the whole interval length (midpoint rule).
pub fn trapezoid_weights(points: usize, a: f64, b: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![b - a],
        _ => {
            let step = (b - a) / (points - 1) as f64;
            let mut w = vec![step; points];
            w[0] *= 0.5;
            w[points - 1] *= 0.5;
            w
        }
    }
}

/// Equispaced nodes; one point sits at the interval midpoint.
pub fn linspace(points: usize, a: f64, b: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => {
            let step = (b - a) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

// Kronrod 15-point extension of the 7-point Gauss rule (QUADPACK constants).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss–Kronrod 15 panel: (Kronrod value, |Kronrod − Gauss|).
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Tolerances and budget for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_panels: 4000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod integration: the panel with the largest
/// error estimate is bisected until the total estimate meets the tolerance.
pub fn adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: AdaptiveOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let initial = 8usize;
    let width = (b - a) / initial as f64;
    let mut panels: Vec<(f64, f64, f64, f64)> = (0..initial)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == initial { b } else { lo + width };
            let (v, e) = gk15(&f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Numeric(format!(
                "adaptive quadrature on [{a}, {b}] exceeded {} panels (error estimate {err:e})",
                opts.max_panels
            )));
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("panel list is never empty");
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
}

/// Iterated adaptive integration over an axis-aligned box (d ≤ 3 in practice).
pub fn adaptive_box(f: &dyn Fn(&[f64]) -> f64, lower: &[f64], upper: &[f64], opts: AdaptiveOptions) -> Result<f64> {
    assert_eq!(lower.len(), upper.len());
    let mut prefix = Vec::with_capacity(lower.len());
    iterate_axis(f, lower, upper, &mut prefix, opts)
}

#[allow(clippy::ptr_arg)] // pushes and pops one coordinate per axis
fn iterate_axis(
    f: &dyn Fn(&[f64]) -> f64,
    lower: &[f64],
    upper: &[f64],
    prefix: &mut Vec<f64>,
    opts: AdaptiveOptions,
) -> Result<f64> {
    let axis = prefix.len();
    if axis + 1 == lower.len() {
        let mut point = prefix.clone();
        point.push(0.0);
        let cell = std::cell::RefCell::new(point);
        return adaptive(
            |x| {
                let mut p = cell.borrow_mut();
                p[axis] = x;
                f(&p)
            },
            lower[axis],
            upper[axis],
            opts,
        );
    }
    let failure = std::cell::RefCell::new(None);
    let inner_opts = AdaptiveOptions {
        abs_tol: opts.abs_tol * 0.1,
        rel_tol: opts.rel_tol * 0.1,
        ..opts
    };
    let outer = adaptive(
        |x| {
            let mut p = prefix.clone();
            p.push(x);
            match iterate_axis(f, lower, upper, &mut p, inner_opts) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        lower[axis],
        upper[axis],
        opts,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    outer
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for order in [1, 2, 5, 8, 20] {
            let (_, w) = gauss_legendre(order);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "order {order}: {s}");
        }
    }

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre(6);
        // exact up to degree 11: ∫ x^10 = 2/11
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_constants_integrate_degree_22() {
        let (k, _) = gk15(&|x: f64| x.powi(22), -1.0, 1.0);
        assert!((k - 2.0 / 23.0).abs() < 1e-14, "{k}");
        // the embedded Gauss rule is exact to degree 13 so the error estimate vanishes
        let (_, e) = gk15(&|x: f64| x.powi(12), -1.0, 1.0);
        assert!(e < 1e-14, "{e}");
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = adaptive(|x| (-x * x / 2.0).exp(), -12.0, 12.0, AdaptiveOptions::default()).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn adaptive_box_two_dimensions() {
        let v = adaptive_box(
            &|p| (p[0] * p[1]).cos() * p[0],
            &[0.0, 0.0],
            &[1.0, 2.0],
            AdaptiveOptions::default(),
        )
        .unwrap();
        // ∫0^1 ∫0^2 x cos(xy) dy dx = ∫0^1 sin(2x) dx = (1 − cos 2)/2
        assert!((v - (1.0 - 2f64.cos()) / 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let x = linspace(11, 0.0, 2.0);
        let w = trapezoid_weights(11, 0.0, 2.0);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * (3.0 * x + 1.0)).sum();
        assert!((v - 8.0).abs() < 1e-13);
        assert_eq!(linspace(1, 0.0, 2.0), vec![1.0]);
        assert_eq!(trapezoid_weights(1, 0.0, 2.0), vec![2.0]);
    }
}
