//! Experiment configuration: a single JSON document, parsed strictly,
//! completed with defaults and checked before anything runs.

use std::path::{Path, PathBuf};

use divkde::distributions::power_integral;
use divkde::kde::EvaluationGrid;
use divkde::kernel::{KernelFamily, KernelSpec};
use divkde::sweep::BandwidthRange;
use divkde::{true_divergences, AlphaParam, AnalyticDensity, DensityEvaluator, DensitySpec, ThresholdSchedule};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Default grid nodes per axis, by dimension.
pub fn default_points_per_axis(d: usize) -> usize {
    match d {
        1 => 2001,
        2 => 201,
        3 => 41,
        _ => 15,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    #[serde(default = "two")]
    pub order: u32,
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub c_lower: Option<f64>,
    pub exponent_lower: Option<f64>,
    pub c_upper: Option<f64>,
    pub exponent_upper: Option<f64>,
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub points_per_axis: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    /// Interval bandwidth; defaults to `h''_n`.
    pub bandwidth: Option<f64>,
    pub gamma_floor: Option<f64>,
    pub inflation: Option<f64>,
}

/// The document as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub f: DensitySpec,
    pub g: DensitySpec,
    pub kernel: Option<KernelConfig>,
    pub alpha: Vec<f64>,
    pub n_schedule: Vec<usize>,
    pub bandwidth_range: Option<RangeConfig>,
    pub threshold: Option<ThresholdSchedule>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<GridConfig>,
    pub mc_samples: Option<usize>,
    /// Bandwidth used by `estimate`; defaults to `h''_n`.
    pub estimate_bandwidth: Option<f64>,
    pub intervals: Option<IntervalConfig>,
    pub output_dir: Option<PathBuf>,
}

/// Every setting made explicit; written into each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub f: DensitySpec,
    pub g: DensitySpec,
    pub kernel: KernelSpec,
    pub alpha: Vec<AlphaParam>,
    pub n_schedule: Vec<usize>,
    pub bandwidth_range: BandwidthRange,
    pub threshold: ThresholdSchedule,
    pub replications: usize,
    pub seed: u64,
    pub grid_lower: Vec<f64>,
    pub grid_upper: Vec<f64>,
    pub points_per_axis: usize,
    pub mc_samples: usize,
    pub estimate_bandwidth: Option<f64>,
    pub interval_bandwidth: Option<f64>,
    pub gamma_floor: Option<f64>,
    pub inflation: f64,
    /// Not serialized, so reports do not depend on where they are written.
    #[serde(skip)]
    pub output_dir: PathBuf,
}

/// Configuration together with the objects built from it.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub f: AnalyticDensity,
    pub g: AnalyticDensity,
    pub grid: EvaluationGrid,
}

/// 1-based line of the first occurrence of `"key"` in the source, if any.
fn line_of(source: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    source.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn invalid(source: &str, key: &str, message: impl Into<String>) -> CliError {
    let message = message.into();
    match line_of(source, key) {
        Some(line) => CliError::Config(format!("line {line}: {key}: {message}")),
        None => CliError::Config(format!("{key}: {message}")),
    }
}

/// Parses the JSON; syntax and schema errors carry line and column.
pub fn parse_config(source: &str) -> Result<RawConfig, CliError> {
    serde_json::from_str(source).map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
}

/// Reads, completes and validates a config file.
pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Experiment, CliError> {
    let source = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    resolve(&source, seed, out)
}

/// Completes defaults and runs the semantic checks on config text.
pub fn resolve(source: &str, seed: Option<u64>, out: Option<&Path>) -> Result<Experiment, CliError> {
    let raw = parse_config(source)?;
    let f = AnalyticDensity::new(raw.f.clone()).map_err(|e| invalid(source, "f", e.to_string()))?;
    let g = AnalyticDensity::new(raw.g.clone()).map_err(|e| invalid(source, "g", e.to_string()))?;
    let d = f.dimension();
    if g.dimension() != d {
        return Err(invalid(
            source,
            "g",
            format!("dimension {} differs from f's {d}", g.dimension()),
        ));
    }

    let kcfg = raw.kernel.clone().unwrap_or(KernelConfig {
        family: KernelFamily::Gaussian,
        order: 2,
    });
    let kernel = KernelSpec::new(kcfg.family, d, kcfg.order).map_err(|e| invalid(source, "kernel", e.to_string()))?;

    if raw.alpha.is_empty() {
        return Err(invalid(source, "alpha", "at least one value is required"));
    }
    let alpha = raw
        .alpha
        .iter()
        .map(|&a| AlphaParam::new(a))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| invalid(source, "alpha", e.to_string()))?;

    if raw.n_schedule.is_empty() {
        return Err(invalid(source, "n_schedule", "at least one sample size is required"));
    }
    if let Some(&n) = raw.n_schedule.iter().find(|&&n| n < 3) {
        return Err(invalid(
            source,
            "n_schedule",
            format!("n = {n} is below 3, where log log n is undefined"),
        ));
    }

    let rc = raw.bandwidth_range.clone().unwrap_or_default();
    let base = BandwidthRange::default_for(d);
    let range = BandwidthRange {
        c_lower: rc.c_lower.unwrap_or(base.c_lower),
        exponent_lower: rc.exponent_lower.unwrap_or(base.exponent_lower),
        c_upper: rc.c_upper.unwrap_or(base.c_upper),
        exponent_upper: rc.exponent_upper.unwrap_or(base.exponent_upper),
        grid_size: rc.grid_size.unwrap_or(base.grid_size),
    };
    range
        .validate(&raw.n_schedule)
        .map_err(|e| invalid(source, "bandwidth_range", e.to_string()))?;

    let threshold = raw.threshold.unwrap_or_default();
    ThresholdSchedule::new(threshold.beta, threshold.delta).map_err(|e| invalid(source, "threshold", e.to_string()))?;

    let replications = raw.replications.unwrap_or(10);
    if replications == 0 {
        return Err(invalid(source, "replications", "must be positive"));
    }
    let mc_samples = raw.mc_samples.unwrap_or(100_000);
    if mc_samples < 2 {
        return Err(invalid(source, "mc_samples", "Monte Carlo needs at least 2 draws"));
    }

    let gcfg = raw.grid.clone().unwrap_or(GridConfig {
        lower: None,
        upper: None,
        points_per_axis: None,
    });
    let (lower, upper) = match (gcfg.lower, gcfg.upper) {
        (Some(l), Some(u)) => (l, u),
        (None, None) => hull(&f, &g),
        _ => return Err(invalid(source, "grid", "give both lower and upper, or neither")),
    };
    let points = gcfg.points_per_axis.unwrap_or_else(|| default_points_per_axis(d));
    if lower.len() != d || upper.len() != d {
        return Err(invalid(source, "grid", format!("box must have dimension {d}")));
    }
    let grid = EvaluationGrid::new(lower.clone(), upper.clone(), points)
        .map_err(|e| invalid(source, "grid", e.to_string()))?;
    let g_values = g.evaluate_grid(&grid);
    if let Some(i) = g_values.iter().position(|&v| v.is_nan() || v <= 0.0) {
        let d = grid.dimension();
        let node = &grid.points()[i * d..(i + 1) * d];
        return Err(invalid(
            source,
            "grid",
            format!("g is not positive at grid node {node:?}"),
        ));
    }

    for a in &alpha {
        power_integral(&g, 1.0 - a.get())
            .map_err(|e| invalid(source, "g", format!("integral of g^(1-alpha) fails: {e}")))?;
        true_divergences(&f, &g, a.get())
            .map_err(|e| invalid(source, "f", format!("ground truth unavailable: {e}")))?;
    }

    for (key, h) in [("estimate_bandwidth", raw.estimate_bandwidth)] {
        if let Some(h) = h {
            if !(h > 0.0 && h < 1.0) {
                return Err(invalid(source, key, format!("bandwidth must lie in (0, 1), got {h}")));
            }
        }
    }
    let icfg = raw.intervals.clone().unwrap_or_default();
    if let Some(h) = icfg.bandwidth {
        if !(h > 0.0 && h < 1.0) {
            return Err(invalid(
                source,
                "intervals",
                format!("bandwidth must lie in (0, 1), got {h}"),
            ));
        }
    }
    if let Some(floor) = icfg.gamma_floor {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(invalid(source, "gamma_floor", format!("must be positive, got {floor}")));
        }
    }
    let inflation = icfg.inflation.unwrap_or(0.0);
    if !(inflation >= 0.0 && inflation.is_finite()) {
        return Err(invalid(
            source,
            "inflation",
            format!("must be nonnegative, got {inflation}"),
        ));
    }

    let output_dir = out
        .map(Path::to_path_buf)
        .or(raw.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(Experiment {
        config: ExperimentConfig {
            f: raw.f,
            g: raw.g,
            kernel,
            alpha,
            n_schedule: raw.n_schedule,
            bandwidth_range: range,
            threshold,
            replications,
            seed: seed.or(raw.seed).unwrap_or(0),
            grid_lower: lower,
            grid_upper: upper,
            points_per_axis: points,
            mc_samples,
            estimate_bandwidth: raw.estimate_bandwidth,
            interval_bandwidth: icfg.bandwidth,
            gamma_floor: icfg.gamma_floor,
            inflation,
            output_dir,
        },
        f,
        g,
        grid,
    })
}

/// Smallest box holding the effective boxes of both densities.
fn hull(f: &AnalyticDensity, g: &AnalyticDensity) -> (Vec<f64>, Vec<f64>) {
    let (fl, fu) = f.effective_box();
    let (gl, gu) = g.effective_box();
    (
        fl.iter().zip(&gl).map(|(a, b)| a.min(*b)).collect(),
        fu.iter().zip(&gu).map(|(a, b)| a.max(*b)).collect(),
    )
}

impl ExperimentConfig {
    /// Bandwidth for single-`h` commands at sample size `n`.
    pub fn estimate_h(&self, n: usize) -> f64 {
        self.estimate_bandwidth.unwrap_or_else(|| self.bandwidth_range.upper(n))
    }

    /// Output path inside the configured directory.
    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"{
  "f": {"family": "gaussian", "mean": [0.0], "std": [1.0]},
  "g": {"family": "gaussian", "mean": [1.0], "std": [1.0]},
  "alpha": [0.5],
  "n_schedule": [500, 2000]
}"#;

    #[test]
    fn defaults_are_materialized() {
        let e = resolve(PAIR, None, None).unwrap();
        let c = &e.config;
        assert_eq!(c.kernel.family, KernelFamily::Gaussian);
        assert_eq!(c.kernel.order, 2);
        assert_eq!(c.bandwidth_range, BandwidthRange::default_for(1));
        assert_eq!(c.threshold, ThresholdSchedule::default());
        assert_eq!(c.replications, 10);
        assert_eq!(c.points_per_axis, 2001);
        assert_eq!(c.grid_lower, vec![-12.0]);
        assert_eq!(c.grid_upper, vec![13.0]);
        assert_eq!(c.seed, 0);
        assert_eq!(resolve(PAIR, Some(9), None).unwrap().config.seed, 9);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let broken = "{\n  \"f\": {\"family\": \"gaussian\", \"mean\": [0.0], \"std\": [1.0]},\n  \"g\": oops\n}";
        let CliError::Config(msg) = resolve(broken, None, None).err().unwrap() else {
            panic!()
        };
        assert!(msg.starts_with("line 3"), "{msg}");
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let bad = PAIR.replace("[0.5]", "[1.5]");
        let CliError::Config(msg) = resolve(&bad, None, None).err().unwrap() else {
            panic!()
        };
        assert!(msg.starts_with("line 4: alpha"), "{msg}");
        let small = PAIR.replace("[500, 2000]", "[2, 500]");
        let CliError::Config(msg) = resolve(&small, None, None).err().unwrap() else {
            panic!()
        };
        assert!(msg.contains("n_schedule") && msg.contains("below 3"), "{msg}");
        let unknown = PAIR.replace("\"alpha\"", "\"alpah\"");
        assert!(matches!(resolve(&unknown, None, None), Err(CliError::Config(_))));
    }

    #[test]
    fn infeasible_range_and_grid() {
        let bad = PAIR.replace("\"alpha\"", "\"bandwidth_range\": {\"c_lower\": 9.0},\n  \"alpha\"");
        let CliError::Config(msg) = resolve(&bad, None, None).err().unwrap() else {
            panic!()
        };
        assert!(msg.contains("bandwidth_range") && msg.contains("infeasible"), "{msg}");
        let boxed = r#"{
  "f": {"family": "gaussian", "mean": [0.0], "std": [1.0]},
  "g": {"family": "uniform_box_density", "lower": [-1.0], "upper": [1.0]},
  "alpha": [0.5],
  "n_schedule": [500],
  "grid": {"lower": [-2.0], "upper": [2.0], "points_per_axis": 101}
}"#;
        let CliError::Config(msg) = resolve(boxed, None, None).err().unwrap() else {
            panic!()
        };
        assert!(msg.contains("not positive"), "{msg}");
    }
}
