//! Kernel density estimator, its deterministic smoothing `E f̂`, evaluation
//! grids and grid sup-norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{AnalyticDensity, Factor};
use crate::error::{Error, Result};
use crate::kernel::{for_each_index, KernelSpec};
use crate::quadrature::{linspace, trapezoid_weights};

/// Largest supported dimension.
pub const MAX_DIMENSION: usize = 8;

/// Nodes per parallel task in batch evaluation.
const NODE_BLOCK: usize = 64;

/// Intervals per axis for the smoothing quadrature before refinement.
pub const SMOOTHING_INTERVALS: usize = 800;
/// Relative agreement required between the coarse and refined smoothing
/// quadratures.
pub const SMOOTHING_TOLERANCE: f64 = 1e-5;

/// `n` observations in `R^d`, row-major, with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
    seed: u64,
}

impl SampleMatrix {
    pub fn new(data: Vec<f64>, d: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > MAX_DIMENSION {
            return Err(Error::Parameter(format!(
                "sample dimension must be in 1..={MAX_DIMENSION}, got {d}"
            )));
        }
        if data.is_empty() || !data.len().is_multiple_of(d) {
            return Err(Error::Parameter(format!(
                "{} values do not form a non-empty matrix with {d} columns",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("sample contains non-finite values".into()));
        }
        Ok(Self {
            n: data.len() / d,
            data,
            d,
            seed,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Parameter("rows have different lengths".into()));
        }
        Self::new(rows.concat(), d, seed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Coordinate-wise minimum and maximum.
    pub fn range(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.d];
        let mut hi = vec![f64::NEG_INFINITY; self.d];
        for r in self.rows() {
            for a in 0..self.d {
                lo[a] = lo[a].min(r[a]);
                hi[a] = hi[a].max(r[a]);
            }
        }
        (lo, hi)
    }
}

/// Tensor grid over a box. Nodes are equispaced and include both ends of each
/// axis (a single node per axis sits at the midpoint); quadrature weights
/// are the tensor trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    points_per_axis: usize,
}

impl EvaluationGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::Parameter(
                "grid bounds must be non-empty and of equal length".into(),
            ));
        }
        if lower.len() > MAX_DIMENSION {
            return Err(Error::Parameter(format!("grid dimension above {MAX_DIMENSION}")));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::Parameter(
                "grid requires finite lower < upper on every axis".into(),
            ));
        }
        if points_per_axis == 0 {
            return Err(Error::Parameter("grid needs at least one point per axis".into()));
        }
        let total = (points_per_axis as u128).checked_pow(lower.len() as u32);
        if total.is_none_or(|t| t > 50_000_000) {
            return Err(Error::Parameter("grid has too many nodes".into()));
        }
        Ok(Self {
            lower,
            upper,
            points_per_axis,
        })
    }

    /// Grid spanning the sample range padded by `pad_bandwidths · h`.
    pub fn covering(sample: &SampleMatrix, h: f64, pad_bandwidths: f64, points_per_axis: usize) -> Result<Self> {
        let (mut lo, mut hi) = sample.range();
        for a in 0..lo.len() {
            lo[a] -= pad_bandwidths * h;
            hi[a] += pad_bandwidths * h;
        }
        Self::new(lo, hi, points_per_axis)
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dimension() as u32)
    }

    /// Coordinates along one axis.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        linspace(self.points_per_axis, self.lower[axis], self.upper[axis])
    }

    /// All node coordinates, row-major (last axis fastest), flattened.
    pub fn points(&self) -> Vec<f64> {
        let d = self.dimension();
        let axes: Vec<Vec<f64>> = (0..d).map(|a| self.axis(a)).collect();
        let mut out = Vec::with_capacity(self.node_count() * d);
        for_each_index(self.points_per_axis, d, |idx| {
            for (a, &i) in idx.iter().enumerate() {
                out.push(axes[a][i]);
            }
        });
        out
    }

    /// Tensor trapezoid weights, in node order.
    pub fn weights(&self) -> Vec<f64> {
        let d = self.dimension();
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|a| trapezoid_weights(self.points_per_axis, self.lower[a], self.upper[a]))
            .collect();
        let mut out = Vec::with_capacity(self.node_count());
        for_each_index(self.points_per_axis, d, |idx| {
            out.push(idx.iter().enumerate().map(|(a, &i)| axes[a][i]).product());
        });
        out
    }

    /// Per-axis index of every node, in node order.
    pub(crate) fn indices(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.node_count());
        for_each_index(self.points_per_axis, self.dimension(), |idx| out.push(idx.to_vec()));
        out
    }
}

/// Anything that can be evaluated as a density on `R^d`.
pub trait DensityEvaluator: Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> f64;

    /// Values at every grid node, in node order.
    fn evaluate_grid(&self, grid: &EvaluationGrid) -> Vec<f64> {
        let d = grid.dimension();
        self.evaluate_many(&grid.points(), d)
    }

    /// Values at flattened row-major points.
    fn evaluate_many(&self, points: &[f64], d: usize) -> Vec<f64> {
        points.par_chunks(d).map(|x| self.evaluate(x)).collect()
    }
}

impl DensityEvaluator for AnalyticDensity {
    fn dimension(&self) -> usize {
        AnalyticDensity::dimension(self)
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.density(x)
    }
}

/// The kernel estimator `f̂(x) = (1/(n h^d)) Σ K((x − X_i)/h)` for one sample,
/// kernel and bandwidth.
///
/// Rows are kept sorted along the first axis so each evaluation only visits
/// rows within `radius · h` of the point. The Gaussian kernel is cut at
/// [`GAUSSIAN_RADIUS`](crate::kernel::GAUSSIAN_RADIUS) per axis, where its
/// value is below `6e-15`; `E f̂` uses the same cut.
#[derive(Debug, Clone)]
pub struct Kde<'a> {
    sample: &'a SampleMatrix,
    kernel: KernelSpec,
    bandwidth: f64,
    inv_h: f64,
    scale: f64,
    radius: f64,
    sorted: Vec<f64>,
    keys: Vec<f64>,
}

impl<'a> Kde<'a> {
    pub fn new(sample: &'a SampleMatrix, kernel: KernelSpec, bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        if kernel.dimension != sample.dimension() {
            return Err(Error::Parameter(format!(
                "kernel dimension {} does not match sample dimension {}",
                kernel.dimension,
                sample.dimension()
            )));
        }
        let d = sample.dimension();
        let mut order: Vec<usize> = (0..sample.n()).collect();
        order.sort_by(|&i, &j| sample.row(i)[0].total_cmp(&sample.row(j)[0]).then(i.cmp(&j)));
        let mut sorted = Vec::with_capacity(sample.n() * d);
        for &i in &order {
            sorted.extend_from_slice(sample.row(i));
        }
        let keys = order.iter().map(|&i| sample.row(i)[0]).collect();
        Ok(Self {
            sample,
            kernel,
            bandwidth,
            inv_h: 1.0 / bandwidth,
            scale: 1.0 / (sample.n() as f64 * bandwidth.powi(d as i32)),
            radius: kernel.family.radius(),
            sorted,
            keys,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn sample(&self) -> &SampleMatrix {
        self.sample
    }

    #[inline]
    fn kernel_at(&self, x: &[f64], row: &[f64]) -> f64 {
        let mut u = [0.0; MAX_DIMENSION];
        let d = x.len();
        for a in 0..d {
            u[a] = (x[a] - row[a]) * self.inv_h;
            if u[a].abs() > self.radius {
                return 0.0;
            }
        }
        self.kernel.eval_unchecked(&u[..d])
    }

    /// Values at arbitrary points (flattened row-major).
    pub fn evaluate_points(&self, points: &[f64]) -> Vec<f64> {
        let d = self.sample.dimension();
        let mut out = vec![0.0; points.len() / d];
        out.par_chunks_mut(NODE_BLOCK)
            .zip(points.par_chunks(NODE_BLOCK * d))
            .for_each(|(o, p)| {
                for (v, x) in o.iter_mut().zip(p.chunks_exact(d)) {
                    *v = self.evaluate(x);
                }
            });
        out
    }
}

impl DensityEvaluator for Kde<'_> {
    fn dimension(&self) -> usize {
        self.sample.dimension()
    }

    /// Sums the rows in first-axis order; batch evaluation calls this same
    /// routine, so both paths agree bit for bit.
    fn evaluate(&self, x: &[f64]) -> f64 {
        let d = self.sample.dimension();
        // window slightly wider than the support; kernel_at makes the exact cut
        let reach = self.radius * self.bandwidth * (1.0 + 1e-9);
        let lo = self.keys.partition_point(|&k| k < x[0] - reach);
        let hi = self.keys.partition_point(|&k| k <= x[0] + reach);
        let mut s = 0.0;
        for row in self.sorted[lo * d..hi * d].chunks_exact(d) {
            s += self.kernel_at(x, row);
        }
        s * self.scale
    }

    fn evaluate_many(&self, points: &[f64], _d: usize) -> Vec<f64> {
        self.evaluate_points(points)
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Parameter(format!("bandwidth must lie in (0, 1], got {h}")));
    }
    Ok(())
}

fn check_point(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::Parameter(format!(
            "point has dimension {}, expected {d}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("evaluation point is not finite".into()));
    }
    Ok(())
}

/// `f̂_{n,h}(x)`.
pub fn kde_evaluate(sample: &SampleMatrix, kernel: &KernelSpec, h: f64, x: &[f64]) -> Result<f64> {
    let kde = Kde::new(sample, *kernel, h)?;
    check_point(x, sample.dimension())?;
    Ok(kde.evaluate(x))
}

/// `f̂_{n,h}` at every grid node (row-major node order).
pub fn kde_evaluate_batch(
    sample: &SampleMatrix,
    kernel: &KernelSpec,
    h: f64,
    grid: &EvaluationGrid,
) -> Result<Vec<f64>> {
    let kde = Kde::new(sample, *kernel, h)?;
    if grid.dimension() != sample.dimension() {
        return Err(Error::Parameter("grid and sample dimensions differ".into()));
    }
    Ok(kde.evaluate_grid(grid))
}

/// `∫ K(u) φ(x − h u) du` for one univariate factor φ by trapezoid
/// quadrature over the part of the kernel support where φ can be positive.
/// The rule is refined once; the refined pair is Richardson-extrapolated.
fn smooth_factor(factor: &Factor, family: crate::kernel::KernelFamily, h: f64, x: f64) -> Result<f64> {
    let r = family.radius();
    let (a, b) = match factor {
        Factor::Normal { mean, std } => {
            let w = crate::distributions::GAUSSIAN_EFFECTIVE_SIGMAS * std;
            (mean - w, mean + w)
        }
        _ => {
            let bp = factor.breakpoints();
            (bp[0], bp[1])
        }
    };
    // x − h u ∈ [a, b]  ⇔  u ∈ [(x − b)/h, (x − a)/h]
    let lo = ((x - b) / h).max(-r);
    let hi = ((x - a) / h).min(r);
    if !(lo < hi) {
        return Ok(0.0);
    }
    let rule = |intervals: usize| -> f64 {
        let step = (hi - lo) / intervals as f64;
        let mut s = 0.5 * (family.base(lo) * factor.density(x - h * lo) + family.base(hi) * factor.density(x - h * hi));
        for i in 1..intervals {
            let u = lo + step * i as f64;
            s += family.base(u) * factor.density(x - h * u);
        }
        s * step
    };
    let coarse = rule(SMOOTHING_INTERVALS);
    let fine = rule(2 * SMOOTHING_INTERVALS);
    if !fine.is_finite() || (fine - coarse).abs() > SMOOTHING_TOLERANCE * fine.abs() + 1e-14 {
        return Err(Error::Numeric(format!(
            "smoothing quadrature did not converge at x = {x} (coarse {coarse}, refined {fine})"
        )));
    }
    Ok((4.0 * fine - coarse) / 3.0)
}

fn check_smoothing_inputs(f: &AnalyticDensity, kernel: &KernelSpec, h: f64) -> Result<()> {
    check_bandwidth(h)?;
    if kernel.dimension != f.dimension() {
        return Err(Error::Parameter("kernel and density dimensions differ".into()));
    }
    Ok(())
}

/// `E f̂_{n,h}(x) = ∫ K(u) f(x − h u) du`, independent of any sample.
///
/// The product kernel against a mixture of product densities factorizes,
/// so the tensor trapezoid rule reduces to one-dimensional rules per axis.
pub fn smoothed_density(f: &AnalyticDensity, kernel: &KernelSpec, h: f64, x: &[f64]) -> Result<f64> {
    check_smoothing_inputs(f, kernel, h)?;
    check_point(x, f.dimension())?;
    let mut total = 0.0;
    for c in f.components() {
        let mut v = c.weight;
        for (factor, &xi) in c.factors.iter().zip(x) {
            v *= smooth_factor(factor, kernel.family, h, xi)?;
        }
        total += v;
    }
    Ok(total)
}

/// [`smoothed_density`] at every grid node. Per-axis factors are computed
/// once per axis coordinate and combined in the same order as the pointwise
/// routine.
pub fn smoothed_density_grid(
    f: &AnalyticDensity,
    kernel: &KernelSpec,
    h: f64,
    grid: &EvaluationGrid,
) -> Result<Vec<f64>> {
    check_smoothing_inputs(f, kernel, h)?;
    if grid.dimension() != f.dimension() {
        return Err(Error::Parameter("grid and density dimensions differ".into()));
    }
    let d = grid.dimension();
    let axes: Vec<Vec<f64>> = (0..d).map(|a| grid.axis(a)).collect();
    // tables[c][a][i] = smoothed factor a of component c at axis coordinate i
    let tables: Vec<Vec<Vec<f64>>> = f
        .components()
        .iter()
        .map(|c| {
            c.factors
                .iter()
                .zip(&axes)
                .map(|(factor, coords)| {
                    coords
                        .par_iter()
                        .map(|&xi| smooth_factor(factor, kernel.family, h, xi))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(grid
        .indices()
        .into_iter()
        .map(|idx| {
            let mut total = 0.0;
            for (c, comp) in f.components().iter().enumerate() {
                let mut v = comp.weight;
                for (a, &i) in idx.iter().enumerate() {
                    v *= tables[c][a][i];
                }
                total += v;
            }
            total
        })
        .collect())
}

/// `max_i |a_i − b_i|`, the grid proxy for a sup-norm.
pub fn sup_deviation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Parameter(format!(
            "vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DensitySpec;
    use crate::kernel::KernelFamily;

    fn gaussian_kernel() -> KernelSpec {
        KernelSpec::second_order(KernelFamily::Gaussian, 1)
    }

    #[test]
    fn single_point_at_query() {
        let s = SampleMatrix::new(vec![0.0], 1, 0).unwrap();
        let v = kde_evaluate(&s, &gaussian_kernel(), 1.0, &[0.0]).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn box_kernel_misses_distant_points() {
        let s = SampleMatrix::new(vec![-1.0, 1.0], 1, 0).unwrap();
        let k = KernelSpec::second_order(KernelFamily::UniformBox, 1);
        assert_eq!(kde_evaluate(&s, &k, 0.5, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn bandwidth_bounds() {
        let s = SampleMatrix::new(vec![0.0], 1, 0).unwrap();
        for h in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                kde_evaluate(&s, &gaussian_kernel(), h, &[0.0]),
                Err(Error::Parameter(_))
            ));
        }
        assert!(kde_evaluate(&s, &gaussian_kernel(), 1.0, &[0.0]).is_ok());
    }

    #[test]
    fn sample_matrix_validation() {
        assert!(SampleMatrix::new(vec![], 1, 0).is_err());
        assert!(SampleMatrix::new(vec![1.0, 2.0, 3.0], 2, 0).is_err());
        assert!(SampleMatrix::new(vec![f64::INFINITY], 1, 0).is_err());
        let s = SampleMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], 5).unwrap();
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert_eq!(s.range(), (vec![1.0, 2.0], vec![3.0, 4.0]));
    }

    #[test]
    fn grid_layout() {
        let g = EvaluationGrid::new(vec![0.0, 10.0], vec![1.0, 12.0], 3).unwrap();
        assert_eq!(g.node_count(), 9);
        let p = g.points();
        assert_eq!(&p[0..2], &[0.0, 10.0]);
        assert_eq!(&p[2..4], &[0.0, 11.0]);
        assert_eq!(&p[16..18], &[1.0, 12.0]);
        let w: f64 = g.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        assert!(EvaluationGrid::new(vec![1.0], vec![0.0], 3).is_err());
        assert!(EvaluationGrid::new(vec![0.0], vec![1.0], 0).is_err());
    }

    #[test]
    fn singleton_grid_matches_pointwise() {
        let s = SampleMatrix::new(vec![0.3, -0.2, 1.1], 1, 0).unwrap();
        let g = EvaluationGrid::new(vec![-1.0], vec![1.0], 1).unwrap();
        let batch = kde_evaluate_batch(&s, &gaussian_kernel(), 0.4, &g).unwrap();
        let point = kde_evaluate(&s, &gaussian_kernel(), 0.4, &[0.0]).unwrap();
        assert_eq!(batch, vec![point]);
    }

    #[test]
    fn compact_kernel_far_from_sample_is_zero() {
        let s = SampleMatrix::new(vec![100.0, 101.0], 1, 0).unwrap();
        let g = EvaluationGrid::new(vec![-1.0], vec![1.0], 11).unwrap();
        let k = KernelSpec::second_order(KernelFamily::Epanechnikov, 1);
        assert!(kde_evaluate_batch(&s, &k, 0.5, &g).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn smoothing_matches_gaussian_convolution() {
        let f = AnalyticDensity::new(DensitySpec::standard_normal(1)).unwrap();
        for h in [0.5, 0.1, 1.0] {
            let v = smoothed_density(&f, &gaussian_kernel(), h, &[0.0]).unwrap();
            let exact = 1.0 / (2.0 * std::f64::consts::PI * (1.0 + h * h)).sqrt();
            assert!((v - exact).abs() < 1e-10, "h={h}: {v} vs {exact}");
        }
        let v = smoothed_density(&f, &gaussian_kernel(), 0.5, &[0.0]).unwrap();
        assert!((v - 0.356_824_823_230_554_1).abs() < 1e-9);
    }

    #[test]
    fn smoothing_uniform_interior() {
        let f = AnalyticDensity::new(DensitySpec::UniformBoxDensity {
            lower: vec![0.0],
            upper: vec![1.0],
        })
        .unwrap();
        let k = KernelSpec::second_order(KernelFamily::UniformBox, 1);
        let v = smoothed_density(&f, &k, 0.1, &[0.5]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // at the edge half of the kernel mass falls outside the support
        let edge = smoothed_density(&f, &k, 0.1, &[0.0]).unwrap();
        assert!((edge - 0.5).abs() < 1e-12);
    }

    #[test]
    fn smoothing_vanishes_with_bandwidth() {
        let f = AnalyticDensity::new(DensitySpec::standard_normal(1)).unwrap();
        let v = smoothed_density(&f, &gaussian_kernel(), 1e-3, &[0.0]).unwrap();
        assert!((v - f.density(&[0.0])).abs() < 1e-4);
    }

    #[test]
    fn smoothed_grid_equals_pointwise() {
        let f = AnalyticDensity::new(DensitySpec::Gaussian {
            mean: vec![0.0, 1.0],
            std: vec![1.0, 0.5],
        })
        .unwrap();
        let k = KernelSpec::second_order(KernelFamily::Epanechnikov, 2);
        let g = EvaluationGrid::new(vec![-2.0, -1.0], vec![2.0, 3.0], 7).unwrap();
        let batch = smoothed_density_grid(&f, &k, 0.3, &g).unwrap();
        for (x, v) in g.points().chunks(2).zip(&batch) {
            assert_eq!(smoothed_density(&f, &k, 0.3, x).unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn sup_deviation_cases() {
        assert_eq!(sup_deviation(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sup_deviation(&[1.0, 2.0], &[0.0, 4.0]).unwrap(), 2.0);
        assert!(sup_deviation(&[1.0], &[1.0, 2.0]).is_err());
    }
}
