use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    add_noise, apply_scale, generate_motion_with, generate_random_acs, score_joint_pair, score_relpose,
    score_scaled, AcsConfig, ErrorReport, MotionKind, MotionRanges, NoiseSpec,
};
use crate::error::{CalibError, Result};
use crate::joint::{estimate_joint_fixed, estimate_joint_overlapping};
use crate::lm::LmSettings;
use crate::relpose::{calibrate_relative_pose, LmDiagnostics};
use crate::scale::calibrate_scaled;

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_090_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// World-referenced poses, joint from the stacked overlapping system.
    OverlappingWorld,
    /// Fixed-joint ego motions, both joints estimated.
    FixedJoint,
    /// Joints from fixed-joint motions, then relative pose from general motions.
    General,
    /// As `General`, with per-camera scale factors on all translations.
    ScaledGeneral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridLayout {
    /// Each axis swept with the other held at the grid value nearest the
    /// middle of its range.
    #[default]
    Cross,
    /// Full cartesian product.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseGrid {
    pub sigma_rot_deg: Vec<f64>,
    pub sigma_trans_m: Vec<f64>,
    pub layout: GridLayout,
}

impl Default for NoiseGrid {
    fn default() -> Self {
        NoiseGrid {
            sigma_rot_deg: (0..=6).map(|i| i as f64 * 0.4).collect(),
            sigma_trans_m: (0..=5).map(|i| i as f64 * 0.02).collect(),
            layout: GridLayout::Cross,
        }
    }
}

/// Grid value closest to the middle of the range.
fn midpoint(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = (lo + hi) / 2.0;
    v.iter()
        .copied()
        .min_by(|a, b| (a - mid).abs().total_cmp(&(b - mid).abs()))
        .unwrap_or(mid)
}

impl NoiseGrid {
    pub fn single(sigma_rot_deg: f64, sigma_trans_m: f64) -> Self {
        NoiseGrid {
            sigma_rot_deg: vec![sigma_rot_deg],
            sigma_trans_m: vec![sigma_trans_m],
            layout: GridLayout::Full,
        }
    }

    /// Grid points in evaluation order, without duplicates.
    pub fn points(&self) -> Vec<NoiseSpec> {
        let mut pts: Vec<NoiseSpec> = Vec::new();
        let mut push = |p: NoiseSpec| {
            if !pts.contains(&p) {
                pts.push(p);
            }
        };
        match self.layout {
            GridLayout::Full => {
                for &r in &self.sigma_rot_deg {
                    for &t in &self.sigma_trans_m {
                        push(NoiseSpec::new(r, t));
                    }
                }
            }
            GridLayout::Cross => {
                let mid_t = midpoint(&self.sigma_trans_m);
                let mid_r = midpoint(&self.sigma_rot_deg);
                for &r in &self.sigma_rot_deg {
                    push(NoiseSpec::new(r, mid_t));
                }
                for &t in &self.sigma_trans_m {
                    push(NoiseSpec::new(mid_r, t));
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub trials: usize,
    pub motions: usize,
    pub grid: NoiseGrid,
    /// Range of the per-camera scale factors in scaled mode.
    pub scale_range: (f64, f64),
    pub joint_norm_range: (f64, f64),
    pub motion_ranges: MotionRanges,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            mode: SweepMode::General,
            trials: 100,
            motions: 30,
            grid: NoiseGrid::default(),
            scale_range: (0.5, 5.0),
            joint_norm_range: (1.0, 2.0),
            motion_ranges: MotionRanges::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = &self.grid;
        if self.trials == 0 {
            return Err(CalibError::InvalidInput("trials must be at least 1".into()));
        }
        if grid.sigma_rot_deg.is_empty() || grid.sigma_trans_m.is_empty() {
            return Err(CalibError::InvalidInput("noise grid is empty".into()));
        }
        for p in grid.points() {
            p.validate()?;
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(CalibError::InvalidInput(format!("bad scale range {:?}", self.scale_range)));
        }
        let (lo, hi) = self.joint_norm_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(CalibError::InvalidInput(format!("bad joint range {:?}", self.joint_norm_range)));
        }
        if !(self.motion_ranges.max_angle_deg > 0.0 && self.motion_ranges.max_angle_deg < 85.0) {
            return Err(CalibError::InvalidInput("motion angle must be in (0, 85) degrees".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial, a pure function of its coordinates in the sweep.
pub fn trial_seed(master: u64, grid_index: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ grid_index as u64) ^ trial as u64)
}

fn stream(seed: u64, k: u64) -> u64 {
    splitmix64(seed.wrapping_add(k.wrapping_mul(0x632b_e59b_d9b4_e019)))
}

/// Result of one generate-corrupt-calibrate-score cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub report: ErrorReport,
    pub lm: Option<LmDiagnostics>,
    /// Error category when the trial failed.
    pub failure: Option<&'static str>,
}

/// Runs a single trial at noise level `noise`.
pub fn run_trial(config: &SweepConfig, noise: &NoiseSpec, seed: u64) -> TrialOutcome {
    let mut lm = None;
    match trial_inner(config, noise, seed, &mut lm) {
        Ok(report) => TrialOutcome {
            report,
            lm,
            failure: None,
        },
        Err(e) => TrialOutcome {
            report: ErrorReport::default(),
            lm,
            failure: Some(e.category()),
        },
    }
}

fn trial_inner(config: &SweepConfig, noise: &NoiseSpec, seed: u64, lm: &mut Option<LmDiagnostics>) -> Result<ErrorReport> {
    let scaled = config.mode == SweepMode::ScaledGeneral;
    let acs = AcsConfig {
        joint_norm_range: config.joint_norm_range,
        scale_range: scaled.then_some(config.scale_range),
    };
    let gt = generate_random_acs(stream(seed, 0), &acs);
    let n = config.motions;
    let ranges = &config.motion_ranges;
    let settings = LmSettings::default();

    if config.mode == SweepMode::OverlappingWorld {
        let (a, b) = generate_motion_with(&gt, n, MotionKind::OverlappingWorld, stream(seed, 1), ranges);
        let a = add_noise(&a, noise, stream(seed, 2))?;
        let b = add_noise(&b, noise, stream(seed, 3))?;
        let est = estimate_joint_overlapping(&a, &b)?;
        let o_b = est.o_b.expect("overlapping estimate has both joints");
        return Ok(score_joint_pair(&est.o_a, &o_b, &gt, false));
    }

    // noise is injected on metric data, scale factors applied afterwards
    let corrupt = |seq, k: u64, mu: f64| -> Result<_> {
        let noisy = add_noise(&seq, noise, stream(seed, k))?;
        if scaled {
            apply_scale(&noisy, mu)
        } else {
            Ok(noisy)
        }
    };
    let (fa, fb) = generate_motion_with(&gt, n, MotionKind::FixedJoint, stream(seed, 1), ranges);
    let fa = corrupt(fa, 2, gt.mu_a)?;
    let fb = corrupt(fb, 3, gt.mu_b)?;
    let o_a = estimate_joint_fixed(&fa)?.o_a;
    let o_b = estimate_joint_fixed(&fb)?.o_a;
    let joint_report = score_joint_pair(&o_a, &o_b, &gt, scaled);
    if config.mode == SweepMode::FixedJoint {
        return Ok(joint_report);
    }

    let (ga, gb) = generate_motion_with(&gt, n, MotionKind::General, stream(seed, 4), ranges);
    let ga = corrupt(ga, 5, gt.mu_a)?;
    let gb = corrupt(gb, 6, gt.mu_b)?;
    if scaled {
        let est = calibrate_scaled(&ga, &gb, &o_a, &settings)?;
        *lm = Some(est.lm);
        if !est.converged {
            return Err(CalibError::NoConvergence { iterations: est.iterations });
        }
        let mut r = score_scaled(&est, &gt);
        r.err_joint = None;
        Ok(r.merge(joint_report))
    } else {
        let est = calibrate_relative_pose(&ga, &gb, &o_a, &settings)?;
        *lm = Some(est.lm);
        if !est.converged {
            return Err(CalibError::NoConvergence { iterations: est.iterations });
        }
        Ok(joint_report.merge(score_relpose(&est, &gt)))
    }
}

/// Mean and sample standard deviation of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            std,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise: NoiseSpec,
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub degenerate: usize,
    pub err_joint: Option<Stat>,
    pub err_rot: Option<Stat>,
    pub err_trans: Option<Stat>,
    pub eps_phi: Option<Stat>,
    /// Trials that ran the LM refinement.
    pub lm_runs: usize,
    /// LM runs with an accepted cost increase or a final cost above the
    /// initial one.
    pub lm_violations: usize,
}

impl SweepRow {
    fn aggregate(noise: NoiseSpec, outcomes: &[TrialOutcome]) -> Self {
        let ok: Vec<&ErrorReport> = outcomes.iter().filter(|o| o.failure.is_none()).map(|o| &o.report).collect();
        let collect = |f: fn(&ErrorReport) -> Option<f64>| -> Option<Stat> {
            Stat::of(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        let lm: Vec<&LmDiagnostics> = outcomes.iter().filter_map(|o| o.lm.as_ref()).collect();
        SweepRow {
            noise,
            trials: outcomes.len(),
            successes: ok.len(),
            failures: outcomes.len() - ok.len(),
            degenerate: outcomes.iter().filter(|o| o.failure == Some("degenerate")).count(),
            err_joint: collect(|r| r.err_joint),
            err_rot: collect(|r| r.err_rot),
            err_trans: collect(|r| r.err_trans),
            eps_phi: collect(|r| r.eps_phi),
            lm_runs: lm.len(),
            lm_violations: lm
                .iter()
                .filter(|d| d.cost_increases > 0 || d.final_cost > d.initial_cost)
                .count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub mode: SweepMode,
    pub rows: Vec<SweepRow>,
}

#[derive(Serialize)]
struct CsvRow {
    sigma_rot_deg: f64,
    sigma_trans_m: f64,
    trials: usize,
    successes: usize,
    failures: usize,
    degenerate: usize,
    err_joint_mean: Option<f64>,
    err_joint_std: Option<f64>,
    err_rot_deg_mean: Option<f64>,
    err_rot_deg_std: Option<f64>,
    err_trans_mean: Option<f64>,
    err_trans_std: Option<f64>,
    eps_phi_mean: Option<f64>,
    eps_phi_std: Option<f64>,
    lm_runs: usize,
    lm_violations: usize,
}

impl SweepReport {
    /// One CSV row per grid point.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            let m = |s: &Option<Stat>| s.map(|s| s.mean);
            let d = |s: &Option<Stat>| s.map(|s| s.std);
            w.serialize(CsvRow {
                sigma_rot_deg: r.noise.sigma_rot_deg,
                sigma_trans_m: r.noise.sigma_trans_m,
                trials: r.trials,
                successes: r.successes,
                failures: r.failures,
                degenerate: r.degenerate,
                err_joint_mean: m(&r.err_joint),
                err_joint_std: d(&r.err_joint),
                err_rot_deg_mean: m(&r.err_rot),
                err_rot_deg_std: d(&r.err_rot),
                err_trans_mean: m(&r.err_trans),
                err_trans_std: d(&r.err_trans),
                eps_phi_mean: m(&r.eps_phi),
                eps_phi_std: d(&r.eps_phi),
                lm_runs: r.lm_runs,
                lm_violations: r.lm_violations,
            })
            .map_err(std::io::Error::other)?;
        }
        w.flush()
    }
}

/// Runs every trial of every grid point. Trials run on the current rayon
/// pool; results do not depend on the number of threads.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let points = config.grid.points();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..config.trials).map(move |t| (g, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(g, t)| run_trial(config, &points[g], trial_seed(config.seed, g, t)))
        .collect();
    let rows = points
        .iter()
        .zip(outcomes.chunks(config.trials))
        .map(|(p, chunk)| SweepRow::aggregate(*p, chunk))
        .collect();
    Ok(SweepReport {
        mode: config.mode,
        rows,
    })
}
