//! Stochastic homogenization campaigns.
//!
//! A campaign visits a list of sweep points, generates
//! `n_samples_per_point` independent samples at each, homogenizes them and
//! aggregates the tensors. Sample `j` of point `i` is generated from seed
//! `split_seed(master, i, j)`, so results depend only on the configuration,
//! never on scheduling. Failed generations shrink `n` for their point
//! instead of aborting the campaign.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{generate_seeded, puff_up, GenerationSpec, PuffOptions};
use crate::graph::CalibrationConstants;
use crate::solver::{
    conductivity_tensor_with, ConductivityTensor, HomogenizationOptions, TENSOR_COMPONENTS,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign: {0}")]
    Config(String),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// Share of the solid volume carried by cylinders, in `[0, 1]`; radii
    /// and aspect stay fixed and counts follow.
    #[default]
    CylinderShare,
    /// Total solid fraction at the base cylinder share.
    VolumeFraction,
    PuffFactor,
}

impl std::str::FromStr for SweepVariable {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cylinder-share" => Ok(SweepVariable::CylinderShare),
            "volume-fraction" => Ok(SweepVariable::VolumeFraction),
            "puff-factor" => Ok(SweepVariable::PuffFactor),
            _ => Err(format!(
                "unknown sweep variable `{s}` (cylinder-share, volume-fraction, puff-factor)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Sweep {
    /// `n` evenly spaced values from `lo` to `hi` inclusive.
    pub fn linspace(variable: SweepVariable, lo: f64, hi: f64, n: usize) -> Self {
        let values = match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self { variable, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    /// Radii, aspect, method and puff settings shared by every point. Its
    /// fraction and cylinder share are the defaults for unswept quantities.
    pub base: GenerationSpec,
    /// `None` runs the base spec as a single point.
    pub sweep: Option<Sweep>,
    pub n_samples_per_point: usize,
    pub calibration: CalibrationConstants,
    pub homogenization: HomogenizationOptions,
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Probes for the post-puff fraction estimate.
    pub fraction_probes: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            base: GenerationSpec::default(),
            sweep: Some(Sweep::linspace(SweepVariable::CylinderShare, 0.0, 1.0, 8)),
            n_samples_per_point: 30,
            calibration: CalibrationConstants::default(),
            homogenization: HomogenizationOptions::default(),
            master_seed: 1,
            workers: 0,
            fraction_probes: 20_000,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// `splitmix64(splitmix64(splitmix64(master) ^ point) ^ sample)`
pub fn split_seed(master: u64, point: usize, sample: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ point as u64) ^ sample as u64)
}

fn sphere_volume(r: f64) -> f64 {
    4.0 / 3.0 * std::f64::consts::PI * r.powi(3)
}

fn capsule_volume(r: f64, aspect: f64) -> f64 {
    std::f64::consts::PI * r.powi(3) * (aspect + 4.0 / 3.0)
}

/// Cylinder share of the solid volume of `spec`.
pub fn cylinder_share(spec: &GenerationSpec) -> f64 {
    let vc = spec.n_cylinders as f64 * capsule_volume(spec.cylinder_radius, spec.cylinder_aspect);
    let total = spec.analytic_fraction();
    if total > 0.0 {
        vc / total
    } else {
        0.0
    }
}

/// Spec with counts chosen for `fraction` and `share` at the base radii.
pub fn spec_for_fraction(
    base: &GenerationSpec,
    fraction: f64,
    share: f64,
) -> Result<GenerationSpec, CampaignError> {
    if !(0.0..=1.0).contains(&share) {
        return Err(CampaignError::Config(format!(
            "cylinder share {share} outside [0, 1]"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CampaignError::Config(format!(
            "volume fraction {fraction} outside (0, 1)"
        )));
    }
    let count = |part: f64, v: f64| -> Result<usize, CampaignError> {
        if part == 0.0 {
            Ok(0)
        } else if v > 0.0 {
            Ok((part / v).round() as usize)
        } else {
            Err(CampaignError::Config(
                "a swept inclusion type needs a positive radius".into(),
            ))
        }
    };
    let spec = GenerationSpec {
        n_cylinders: count(
            share * fraction,
            capsule_volume(base.cylinder_radius, base.cylinder_aspect),
        )?,
        n_spheres: count((1.0 - share) * fraction, sphere_volume(base.sphere_radius))?,
        ..base.clone()
    };
    if spec.n_spheres + spec.n_cylinders == 0 {
        return Err(CampaignError::Config(format!(
            "fraction {fraction} at share {share} rounds to zero inclusions"
        )));
    }
    Ok(spec.with_consistent_fraction())
}

impl CampaignConfig {
    /// Generation spec of every point, validated.
    pub fn point_specs(&self) -> Result<Vec<(f64, GenerationSpec)>, CampaignError> {
        if self.n_samples_per_point == 0 {
            return Err(CampaignError::Config(
                "n_samples_per_point must be >= 1".into(),
            ));
        }
        self.homogenization
            .solver
            .validate()
            .map_err(|e| CampaignError::Config(e.to_string()))?;
        self.calibration.validate().map_err(CampaignError::Config)?;
        let base_share = cylinder_share(&self.base);
        let points = match &self.sweep {
            None => vec![(base_share, self.base.clone())],
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&v| {
                    let spec = match sweep.variable {
                        SweepVariable::CylinderShare => {
                            spec_for_fraction(&self.base, self.base.target_volume_fraction, v)?
                        }
                        SweepVariable::VolumeFraction => {
                            spec_for_fraction(&self.base, v, base_share)?
                        }
                        SweepVariable::PuffFactor => GenerationSpec {
                            puff_factor: v,
                            ..self.base.clone()
                        },
                    };
                    Ok((v, spec))
                })
                .collect::<Result<_, CampaignError>>()?,
        };
        for (v, spec) in &points {
            spec.validate()
                .map_err(|e| CampaignError::Config(format!("sweep value {v}: {e}")))?;
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub tensor: ConductivityTensor,
    /// Fraction after puff-up.
    pub achieved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub point: usize,
    pub sample: usize,
    pub seed: u64,
    /// Error message for failed generations or solves.
    pub outcome: Result<SampleOutcome, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub sweep_value: f64,
    pub spec: GenerationSpec,
    /// Per entry in [`TENSOR_COMPONENTS`] order; NaN when `n == 0`.
    pub mean: [f64; 6],
    /// Sample standard deviation (`n - 1` denominator); 0 when `n == 1`.
    pub std: [f64; 6],
    /// Share of (sample, axis) pairs with a nonzero diagonal entry.
    pub percolation_rate: f64,
    /// Per-axis share of percolating samples.
    pub axis_percolation: [f64; 3],
    pub n: usize,
    pub n_failed: usize,
}

impl PointSummary {
    /// Fewer than half of the requested samples succeeded.
    pub fn flagged(&self) -> bool {
        2 * self.n < self.n + self.n_failed
    }

    /// Mean of the diagonal entries.
    pub fn mean_diagonal(&self) -> f64 {
        (self.mean[0] + self.mean[1] + self.mean[2]) / 3.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CampaignResult {
    pub points: Vec<PointSummary>,
    /// Point-major, sample-minor.
    pub records: Vec<SampleRecord>,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn run_sample(
    cfg: &CampaignConfig,
    spec: &GenerationSpec,
    point: usize,
    sample: usize,
) -> SampleRecord {
    let seed = split_seed(cfg.master_seed, point, sample);
    let spec = GenerationSpec {
        seed,
        ..spec.clone()
    };
    let outcome = generate_seeded(&spec)
        .map_err(|e| e.to_string())
        .and_then(|s| {
            let opts = PuffOptions {
                fraction_probes: cfg.fraction_probes,
                ..PuffOptions::from_spec(&spec)
            };
            let puffed = puff_up(&s, &opts);
            let tensor = conductivity_tensor_with(&puffed, &cfg.calibration, &cfg.homogenization)
                .map_err(|e| e.to_string())?;
            Ok(SampleOutcome {
                tensor,
                achieved_fraction: puffed.achieved_fraction,
            })
        });
    SampleRecord {
        point,
        sample,
        seed,
        outcome,
    }
}

fn summarize(sweep_value: f64, spec: GenerationSpec, records: &[SampleRecord]) -> PointSummary {
    let ok: Vec<&SampleOutcome> = records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let mut mean = [0.0; 6];
    let mut std = [0.0; 6];
    for c in 0..6 {
        let xs: Vec<f64> = ok.iter().map(|o| o.tensor.components()[c]).collect();
        (mean[c], std[c]) = mean_std(&xs);
    }
    let mut axis_percolation = [0.0; 3];
    for (a, rate) in axis_percolation.iter_mut().enumerate() {
        let hits = ok.iter().filter(|o| o.tensor.l[a][a] > 0.0).count();
        *rate = if ok.is_empty() {
            0.0
        } else {
            hits as f64 / ok.len() as f64
        };
    }
    PointSummary {
        sweep_value,
        spec,
        mean,
        std,
        percolation_rate: axis_percolation.iter().sum::<f64>() / 3.0,
        axis_percolation,
        n: ok.len(),
        n_failed: records.len() - ok.len(),
    }
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult, CampaignError> {
    let points = cfg.point_specs()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    let n = cfg.n_samples_per_point;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..n).map(move |s| (p, s)))
        .collect();
    let records: Vec<SampleRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, s)| run_sample(cfg, &points[p].1, p, s))
            .collect()
    });
    let summaries: Vec<PointSummary> = points
        .into_iter()
        .enumerate()
        .map(|(p, (v, spec))| {
            let summary = summarize(v, spec, &records[p * n..(p + 1) * n]);
            log::info!(
                "point {p} (value {v}): n = {}, failed = {}, mean diagonal = {:.6e}, percolation = {:.3}",
                summary.n,
                summary.n_failed,
                summary.mean_diagonal(),
                summary.percolation_rate
            );
            if summary.flagged() {
                log::warn!("point {p} (value {v}): fewer than half of the samples were generated");
            }
            summary
        })
        .collect();
    Ok(CampaignResult {
        points: summaries,
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RveRow {
    pub multiplier: f64,
    pub n_inclusions: usize,
    /// Mean and sample standard deviation of the mean diagonal entry.
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Runs the base point with inclusion counts multiplied by each multiplier
/// and radii divided by its cube root, so the solid fraction is kept.
pub fn rve_convergence_scan(
    cfg: &CampaignConfig,
    multipliers: &[f64],
) -> Result<Vec<RveRow>, CampaignError> {
    let mut rows: Vec<RveRow> = Vec::with_capacity(multipliers.len());
    for &m in multipliers {
        if !(m.is_finite() && m >= 1.0) {
            return Err(CampaignError::Config(format!(
                "size multiplier {m} must be >= 1"
            )));
        }
        let shrink = m.powf(-1.0 / 3.0);
        let b = &cfg.base;
        let base = GenerationSpec {
            n_spheres: (b.n_spheres as f64 * m).round() as usize,
            n_cylinders: (b.n_cylinders as f64 * m).round() as usize,
            sphere_radius: b.sphere_radius * shrink,
            cylinder_radius: b.cylinder_radius * shrink,
            ..b.clone()
        };
        let base = if m == 1.0 {
            base
        } else {
            base.with_consistent_fraction()
        };
        let run = CampaignConfig {
            base,
            sweep: None,
            ..cfg.clone()
        };
        let result = run_campaign(&run)?;
        let diag: Vec<f64> = result
            .records
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .map(|o| o.tensor.mean_diagonal())
            .collect();
        let (mean, std) = mean_std(&diag);
        if let Some(prev) = rows.last() {
            if std > prev.std {
                log::warn!(
                    "std rose from {:.3e} to {std:.3e} between multipliers {} and {m}",
                    prev.std,
                    prev.multiplier
                );
            }
        }
        rows.push(RveRow {
            multiplier: m,
            n_inclusions: run.base.n_spheres + run.base.n_cylinders,
            mean,
            std,
            n: diag.len(),
        });
    }
    Ok(rows)
}

fn sci(x: f64) -> String {
    format!("{x:.9e}")
}

pub fn csv_header() -> Vec<String> {
    let mut h = vec!["sweep_value".to_string()];
    for c in TENSOR_COMPONENTS {
        h.push(format!("L_{c}_mean"));
        h.push(format!("L_{c}_std"));
    }
    h.extend(["percolation_rate", "n", "n_failed"].map(String::from));
    h
}

/// One row per sweep point; reals carry ten significant digits.
pub fn write_csv<W: Write>(result: &CampaignResult, out: W) -> Result<(), CampaignError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header())?;
    for p in &result.points {
        let mut row = vec![sci(p.sweep_value)];
        for c in 0..6 {
            row.push(sci(p.mean[c]));
            row.push(sci(p.std[c]));
        }
        row.push(sci(p.percolation_rate));
        row.push(p.n.to_string());
        row.push(p.n_failed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-sample dump: tensor entries and post-puff fraction, or the error.
pub fn write_records_csv<W: Write>(result: &CampaignResult, out: W) -> Result<(), CampaignError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["point", "sample", "seed", "status"]
        .map(String::from)
        .to_vec();
    header.extend(TENSOR_COMPONENTS.map(|c| format!("L_{c}")));
    header.push("achieved_fraction".into());
    w.write_record(&header)?;
    for r in &result.records {
        let mut row = vec![
            r.point.to_string(),
            r.sample.to_string(),
            r.seed.to_string(),
        ];
        match &r.outcome {
            Ok(o) => {
                row.push("ok".into());
                row.extend(o.tensor.components().map(sci));
                row.push(sci(o.achieved_fraction));
            }
            Err(e) => {
                row.push(format!("failed: {e}"));
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rve_csv<W: Write>(rows: &[RveRow], out: W) -> Result<(), CampaignError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["multiplier", "n_inclusions", "mean", "std", "n"])?;
    for r in rows {
        w.write_record([
            sci(r.multiplier),
            r.n_inclusions.to_string(),
            sci(r.mean),
            sci(r.std),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the summary CSV to `path` atomically.
pub fn export_csv(result: &CampaignResult, path: &Path) -> Result<(), CampaignError> {
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    crate::io::write_atomic(path, &buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CampaignConfig {
        CampaignConfig {
            base: GenerationSpec::from_fraction(0.15, 0.5, 20, 6, 5.0),
            sweep: None,
            n_samples_per_point: 2,
            fraction_probes: 2_000,
            ..Default::default()
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(split_seed(1, 0, 0), split_seed(1, 0, 0));
        let mut seen = std::collections::HashSet::new();
        for p in 0..20 {
            for s in 0..20 {
                assert!(seen.insert(split_seed(7, p, s)));
            }
        }
    }

    #[test]
    fn mean_std_small_cases() {
        assert!(mean_std(&[]).0.is_nan());
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn share_sweep_counts() {
        let base = GenerationSpec::from_fraction(0.2, 0.5, 40, 20, 3.0);
        let all_spheres = spec_for_fraction(&base, 0.2, 0.0).unwrap();
        assert_eq!(all_spheres.n_cylinders, 0);
        assert_eq!(all_spheres.n_spheres, 80);
        let all_cyl = spec_for_fraction(&base, 0.2, 1.0).unwrap();
        assert_eq!((all_cyl.n_spheres, all_cyl.n_cylinders), (0, 40));
        assert!(spec_for_fraction(&base, 0.2, 1.5).is_err());
    }

    #[test]
    fn single_sample_point_is_that_sample() {
        let cfg = CampaignConfig {
            n_samples_per_point: 1,
            ..small()
        };
        let r = run_campaign(&cfg).unwrap();
        assert_eq!(r.points.len(), 1);
        let t = r.records[0].outcome.as_ref().unwrap().tensor;
        assert_eq!(r.points[0].mean, t.components());
        assert_eq!(r.points[0].std, [0.0; 6]);
    }

    #[test]
    fn identical_points_identical_results() {
        let cfg = CampaignConfig {
            sweep: Some(Sweep {
                variable: SweepVariable::PuffFactor,
                values: vec![1.1, 1.1],
            }),
            master_seed: 5,
            ..small()
        };
        let a = run_campaign(&cfg).unwrap();
        let b = run_campaign(&CampaignConfig { workers: 1, ..cfg }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_campaign(&CampaignConfig {
            n_samples_per_point: 0,
            ..small()
        })
        .is_err());
        assert!(run_campaign(&CampaignConfig {
            sweep: Some(Sweep {
                variable: SweepVariable::VolumeFraction,
                values: vec![1.2],
            }),
            ..small()
        })
        .is_err());
    }

    #[test]
    fn csv_shapes() {
        let mut buf = Vec::new();
        write_csv(&CampaignResult::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
        let r = run_campaign(&small()).unwrap();
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 16);
    }

    #[test]
    fn empty_multiplier_list() {
        assert!(rve_convergence_scan(&small(), &[]).unwrap().is_empty());
        assert!(rve_convergence_scan(&small(), &[0.5]).is_err());
    }
}
