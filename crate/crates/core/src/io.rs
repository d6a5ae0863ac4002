//! File formats: line-delimited JSON pose records and result documents, CSV
//! trajectories and run manifests.
//!
//! Angles in files are degrees, lengths are meters, rotation matrices are
//! nine numbers in row-major order.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::CalibError;
use crate::joint::{DegeneracyReport, JointEstimate};
use crate::relpose::{RelativePoseEstimate, TrajectoryPoint};
use crate::scale::ScaledCalibration;
use crate::se3::{
    from_row_major, orthonormalize_and_scale, rotation_to_euler, transform_point, EulerAngles, Frame, Point3, Pose,
    Rotation,
};
use crate::sequence::MotionSequence;
use crate::sim::{AcsGroundTruth, ErrorReport};

/// Loaded rotations must have all singular values within this distance of 1.
pub const ROTATION_LOAD_TOLERANCE: f64 = 1e-3;

/// Environment variable redirecting relative output paths.
pub const OUT_DIR_ENV: &str = "ACS_OUT_DIR";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("camera {camera}, t = {t}: {reason}")]
    InvalidRotation { camera: String, t: u32, reason: String },

    #[error("camera {camera} has records in more than one frame")]
    MixedFrames { camera: String },

    #[error("camera {camera} has more than one record at t = {t}")]
    DuplicateStep { camera: String, t: u32 },

    #[error(transparent)]
    Calib(#[from] CalibError),
}

impl IoError {
    pub fn category(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "io",
            IoError::Parse { .. } => "parse_error",
            IoError::InvalidRotation { .. } => "invalid_rotation",
            IoError::MixedFrames { .. } => "mixed_frames",
            IoError::DuplicateStep { .. } => "duplicate_step",
            IoError::Calib(e) => e.category(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn vec3(p: &Point3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

fn point(v: &[f64; 3]) -> Point3 {
    Point3::new(v[0], v[1], v[2])
}

/// One camera pose at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub t: u32,
    pub camera: String,
    pub frame: Frame,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    #[serde(rename = "T")]
    pub t_vec: [f64; 3],
}

impl PoseRecord {
    pub fn from_pose(t: u32, camera: &str, pose: &Pose) -> Self {
        PoseRecord {
            t,
            camera: camera.to_string(),
            frame: pose.frame,
            r: pose.rotation.to_row_major(),
            t_vec: vec3(&pose.translation),
        }
    }

    /// Validates the rotation and snaps it onto SO(3).
    pub fn to_pose(&self) -> IoResult<Pose> {
        let invalid = |reason: String| IoError::InvalidRotation {
            camera: self.camera.clone(),
            t: self.t,
            reason,
        };
        if !self.r.iter().chain(&self.t_vec).all(|v| v.is_finite()) {
            return Err(invalid("non-finite entry".into()));
        }
        let m = from_row_major(&self.r);
        let split = orthonormalize_and_scale(&m).map_err(|e| invalid(e.to_string()))?;
        let off = split
            .singular_values
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max);
        if off > ROTATION_LOAD_TOLERANCE {
            return Err(invalid(format!("singular values {:?} are not all close to 1", split.singular_values)));
        }
        Ok(Pose::new(split.rotation, point(&self.t_vec), self.frame))
    }
}

fn read_lines(path: &Path) -> IoResult<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Parses pose records, one JSON object per line. Blank lines are skipped.
pub fn parse_records(path: &Path) -> IoResult<Vec<PoseRecord>> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| IoError::Parse {
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Builds sequences from records, grouped by camera in order of first
/// appearance and sorted by step.
///
/// In an ego sequence the reference step is the first step whose pose is the
/// identity, and step 0 when there is none.
pub fn sequences_from_records(records: &[PoseRecord]) -> IoResult<Vec<MotionSequence>> {
    let mut groups: Vec<(String, Frame, Vec<(u32, Pose)>)> = Vec::new();
    for rec in records {
        let pose = rec.to_pose()?;
        match groups.iter_mut().find(|g| g.0 == rec.camera) {
            Some(g) => {
                if g.1 != rec.frame {
                    return Err(IoError::MixedFrames {
                        camera: rec.camera.clone(),
                    });
                }
                g.2.push((rec.t, pose));
            }
            None => groups.push((rec.camera.clone(), rec.frame, vec![(rec.t, pose)])),
        }
    }
    groups
        .into_iter()
        .map(|(camera, frame, mut poses)| {
            poses.sort_by_key(|(t, _)| *t);
            if let Some(w) = poses.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(IoError::DuplicateStep { camera, t: w[0].0 });
            }
            let reference = match poses.iter().find(|(_, p)| is_identity(p)) {
                Some((t, _)) if frame == Frame::EgoInit => *t,
                _ => 0,
            };
            Ok(MotionSequence::with_reference(camera, frame, reference, poses)?)
        })
        .collect()
}

fn is_identity(p: &Pose) -> bool {
    (p.rotation.matrix() - nalgebra::Matrix3::identity()).amax() <= 1e-9 && p.translation.amax() <= 1e-9
}

pub fn load_sequences(path: &Path) -> IoResult<Vec<MotionSequence>> {
    sequences_from_records(&parse_records(path)?)
}

/// Records of a sequence; ego sequences start with their identity reference.
pub fn sequence_records(seq: &MotionSequence) -> Vec<PoseRecord> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    if seq.frame() == Frame::EgoInit {
        out.push(PoseRecord::from_pose(seq.reference(), seq.camera_id(), &Pose::identity(Frame::EgoInit)));
    }
    out.extend(seq.poses().iter().map(|(t, p)| PoseRecord::from_pose(*t, seq.camera_id(), p)));
    out.sort_by_key(|r| r.t);
    out
}

pub fn save_sequences(path: &Path, seqs: &[MotionSequence]) -> IoResult<()> {
    let mut text = String::new();
    for seq in seqs {
        for rec in sequence_records(seq) {
            text.push_str(&serde_json::to_string(&rec).expect("pose records serialize"));
            text.push('\n');
        }
    }
    write_file(path, text.as_bytes())
}

/// Finds a sequence by camera label.
pub fn find_camera<'a>(seqs: &'a [MotionSequence], camera: &str) -> IoResult<&'a MotionSequence> {
    seqs.iter().find(|s| s.camera_id() == camera).ok_or_else(|| {
        let known: Vec<&str> = seqs.iter().map(|s| s.camera_id()).collect();
        IoError::Calib(CalibError::InvalidInput(format!("no camera {camera:?} in input (have {known:?})")))
    })
}

/// Roll, pitch, yaw in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerDeg {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl From<&EulerAngles> for EulerDeg {
    fn from(e: &EulerAngles) -> Self {
        let [roll, pitch, yaw] = e.to_degrees();
        EulerDeg { roll, pitch, yaw }
    }
}

/// `serde_json` cannot represent infinities; they are written as `null`.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmSummary {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub cost_increases: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDoc {
    /// Camera whose body frame holds `O_A`.
    pub camera: String,
    /// Second camera, for overlapping estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<u32>,
    #[serde(rename = "O_A")]
    pub o_a: [f64; 3],
    #[serde(rename = "O_B", default, skip_serializing_if = "Option::is_none")]
    pub o_b: Option<[f64; 3]>,
    pub residual_rms: f64,
    pub min_singular_value: f64,
    pub condition_number: Option<f64>,
}

impl JointDoc {
    pub fn new(est: &JointEstimate, camera: &str, camera_b: Option<&str>, reference: Option<u32>) -> Self {
        JointDoc {
            camera: camera.to_string(),
            camera_b: camera_b.map(str::to_string),
            reference,
            o_a: vec3(&est.o_a),
            o_b: est.o_b.as_ref().map(vec3),
            residual_rms: est.residual_rms,
            min_singular_value: est.min_singular_value,
            condition_number: finite(est.condition_number),
        }
    }

    pub fn joint(&self) -> Point3 {
        point(&self.o_a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelposeDoc {
    pub camera_a: String,
    pub camera_b: String,
    #[serde(rename = "R_BA")]
    pub r_ba: [f64; 9],
    #[serde(rename = "T_BA")]
    pub t_ba: [f64; 3],
    pub euler_deg: EulerDeg,
    #[serde(rename = "R_AB")]
    pub r_ab: [f64; 9],
    #[serde(rename = "T_AB")]
    pub t_ab: [f64; 3],
    #[serde(rename = "O_A")]
    pub o_a: [f64; 3],
    #[serde(rename = "O_B")]
    pub o_b: [f64; 3],
    pub residual_rms: f64,
    pub initial_residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub joint_drift_flag: bool,
    pub lm: LmSummary,
}

impl RelposeDoc {
    pub fn new(est: &RelativePoseEstimate, camera_a: &str, camera_b: &str) -> Self {
        let (r_ab, t_ab) = &est.relative_pose_inv;
        RelposeDoc {
            camera_a: camera_a.to_string(),
            camera_b: camera_b.to_string(),
            r_ba: est.r_ba.to_row_major(),
            t_ba: vec3(&est.t_ba),
            euler_deg: EulerDeg::from(&est.euler),
            r_ab: r_ab.to_row_major(),
            t_ab: vec3(t_ab),
            o_a: vec3(&est.o_a),
            o_b: vec3(&transform_point(&est.h_ba(), &est.o_a)),
            residual_rms: est.residual_rms,
            initial_residual_rms: est.initial_residual_rms,
            iterations: est.iterations,
            converged: est.converged,
            joint_drift_flag: est.joint_drift_flag,
            lm: LmSummary {
                initial_cost: est.lm.initial_cost,
                final_cost: est.lm.final_cost,
                cost_increases: est.lm.cost_increases,
            },
        }
    }

    pub fn rotation(&self) -> IoResult<Rotation> {
        load_rotation(&self.r_ba, &self.camera_b, 0)
    }

    /// Rebuilds the estimate for trajectory recovery.
    pub fn to_estimate(&self) -> IoResult<RelativePoseEstimate> {
        Ok(RelativePoseEstimate::from_known(self.rotation()?, point(&self.t_ba), point(&self.o_a))?)
    }
}

fn load_rotation(r: &[f64; 9], camera: &str, t: u32) -> IoResult<Rotation> {
    let rec = PoseRecord {
        t,
        camera: camera.to_string(),
        frame: Frame::EgoInit,
        r: *r,
        t_vec: [0.0; 3],
    };
    Ok(rec.to_pose()?.rotation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledDoc {
    pub camera_a: String,
    pub camera_b: String,
    #[serde(rename = "R_BA")]
    pub r_ba: [f64; 9],
    pub euler_deg: EulerDeg,
    #[serde(rename = "phi_BA")]
    pub phi_ba: f64,
    #[serde(rename = "phi_BA_linear")]
    pub phi_ba_linear: f64,
    /// `mu_B T_BA`.
    #[serde(rename = "T_BA_hat")]
    pub t_ba_hat: [f64; 3],
    /// `mu_A O_A`.
    #[serde(rename = "O_A_hat")]
    pub o_a_hat: [f64; 3],
    #[serde(rename = "mu_A", default, skip_serializing_if = "Option::is_none")]
    pub mu_a: Option<f64>,
    #[serde(rename = "mu_B", default, skip_serializing_if = "Option::is_none")]
    pub mu_b: Option<f64>,
    #[serde(rename = "T_BA", default, skip_serializing_if = "Option::is_none")]
    pub t_ba: Option<[f64; 3]>,
    pub residual_rms: f64,
    pub initial_residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lm: LmSummary,
}

impl ScaledDoc {
    pub fn new(est: &ScaledCalibration, camera_a: &str, camera_b: &str) -> Self {
        ScaledDoc {
            camera_a: camera_a.to_string(),
            camera_b: camera_b.to_string(),
            r_ba: est.r_ba.to_row_major(),
            euler_deg: EulerDeg::from(&est.euler),
            phi_ba: est.phi_ba,
            phi_ba_linear: est.phi_ba_linear,
            t_ba_hat: vec3(&est.t_ba_hat),
            o_a_hat: vec3(&est.o_a_hat),
            mu_a: est.mu_a,
            mu_b: est.mu_b,
            t_ba: est.t_ba.as_ref().map(vec3),
            residual_rms: est.residual_rms,
            initial_residual_rms: est.initial_residual_rms,
            iterations: est.iterations,
            converged: est.converged,
            lm: LmSummary {
                initial_cost: est.lm.initial_cost,
                final_cost: est.lm.final_cost,
                cost_increases: est.lm.cost_increases,
            },
        }
    }

    pub fn rotation(&self) -> IoResult<Rotation> {
        load_rotation(&self.r_ba, &self.camera_b, 0)
    }
}

/// Ground truth of a simulated rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub camera_a: String,
    pub camera_b: String,
    #[serde(rename = "O_A")]
    pub o_a: [f64; 3],
    #[serde(rename = "O_B")]
    pub o_b: [f64; 3],
    #[serde(rename = "R_BA")]
    pub r_ba: [f64; 9],
    #[serde(rename = "T_BA")]
    pub t_ba: [f64; 3],
    pub euler_deg: Option<EulerDeg>,
    #[serde(rename = "mu_A")]
    pub mu_a: f64,
    #[serde(rename = "mu_B")]
    pub mu_b: f64,
    #[serde(rename = "phi_BA")]
    pub phi_ba: f64,
}

impl TruthDoc {
    pub fn new(gt: &AcsGroundTruth, camera_a: &str, camera_b: &str) -> Self {
        TruthDoc {
            camera_a: camera_a.to_string(),
            camera_b: camera_b.to_string(),
            o_a: vec3(&gt.o_a),
            o_b: vec3(&gt.o_b),
            r_ba: gt.h_ba.rotation.to_row_major(),
            t_ba: vec3(&gt.h_ba.translation),
            euler_deg: rotation_to_euler(&gt.h_ba.rotation).ok().map(|e| EulerDeg::from(&e)),
            mu_a: gt.mu_a,
            mu_b: gt.mu_b,
            phi_ba: gt.phi_ba(),
        }
    }

    pub fn to_truth(&self) -> IoResult<AcsGroundTruth> {
        Ok(AcsGroundTruth {
            o_a: point(&self.o_a),
            o_b: point(&self.o_b),
            h_ba: Pose::new(load_rotation(&self.r_ba, &self.camera_b, 0)?, point(&self.t_ba), Frame::EgoInit),
            mu_a: self.mu_a,
            mu_b: self.mu_b,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDoc {
    /// Kind of the evaluated estimate.
    pub estimate: String,
    #[serde(flatten)]
    pub report: ErrorReport,
}

/// Degeneracy analysis of a rank-deficient joint system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyDoc {
    pub camera: String,
    pub verdict: String,
    pub rank: usize,
    pub full_rank: usize,
    pub null_space: Vec<Vec<f64>>,
}

impl DegeneracyDoc {
    pub fn new(report: &DegeneracyReport, camera: &str) -> Self {
        DegeneracyDoc {
            camera: camera.to_string(),
            verdict: report.verdict.as_str().to_string(),
            rank: report.rank_estimate,
            full_rank: report.full_rank,
            null_space: report.null_space_basis.iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }
}

/// Any result file, tagged by its `kind` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Document {
    Joint(JointDoc),
    Relpose(RelposeDoc),
    Scaled(ScaledDoc),
    Truth(TruthDoc),
    ErrorReport(ErrorDoc),
    Degeneracy(DegeneracyDoc),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Joint(_) => "joint",
            Document::Relpose(_) => "relpose",
            Document::Scaled(_) => "scaled",
            Document::Truth(_) => "truth",
            Document::ErrorReport(_) => "error-report",
            Document::Degeneracy(_) => "degeneracy",
        }
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("documents serialize");
        s.push('\n');
        s
    }
}

pub fn write_document(path: &Path, doc: &Document) -> IoResult<()> {
    write_file(path, doc.to_json_line().as_bytes())
}

/// Reads a single-document file.
pub fn read_document(path: &Path) -> IoResult<Document> {
    let lines = read_lines(path)?;
    let (line, text) = lines.first().ok_or(IoError::Parse {
        line: 1,
        message: "empty document".into(),
    })?;
    if lines.len() > 1 {
        return Err(IoError::Parse {
            line: lines[1].0,
            message: "expected a single JSON document".into(),
        });
    }
    serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: *line,
        message: e.to_string(),
    })
}

#[derive(Serialize)]
struct TrajectoryRow {
    step: u32,
    a_x: f64,
    a_y: f64,
    a_z: f64,
    a_roll_deg: Option<f64>,
    a_pitch_deg: Option<f64>,
    a_yaw_deg: Option<f64>,
    b_x: f64,
    b_y: f64,
    b_z: f64,
    b_roll_deg: Option<f64>,
    b_pitch_deg: Option<f64>,
    b_yaw_deg: Option<f64>,
    joint_x: f64,
    joint_y: f64,
    joint_z: f64,
    joint_gap: f64,
}

/// Camera positions and orientations in camera A's reference frame, one row
/// per step. Orientation cells are empty at the Euler singularity.
pub fn write_trajectory_csv<W: Write>(out: W, points: &[TrajectoryPoint]) -> IoResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let angles = |p: &Pose| match rotation_to_euler(&p.rotation) {
        Ok(e) => {
            let [r, p, y] = e.to_degrees();
            (Some(r), Some(p), Some(y))
        }
        Err(_) => (None, None, None),
    };
    for pt in points {
        let (ar, ap, ay) = angles(&pt.pose_a);
        let (br, bp, by) = angles(&pt.pose_b);
        let a = pt.pose_a.translation;
        let b = pt.pose_b.translation;
        let j = pt.joint_from_a;
        w.serialize(TrajectoryRow {
            step: pt.step,
            a_x: a.x,
            a_y: a.y,
            a_z: a.z,
            a_roll_deg: ar,
            a_pitch_deg: ap,
            a_yaw_deg: ay,
            b_x: b.x,
            b_y: b.y,
            b_z: b.z,
            b_roll_deg: br,
            b_pitch_deg: bp,
            b_yaw_deg: by,
            joint_x: j.x,
            joint_y: j.y,
            joint_z: j.z,
            joint_gap: pt.joint_gap(),
        })
        .map_err(|e| IoError::Io {
            path: "trajectory".into(),
            source: std::io::Error::other(e),
        })?;
    }
    w.flush().map_err(|e| IoError::Io {
        path: "trajectory".into(),
        source: e,
    })
}

/// Resolves an output path, honoring [`OUT_DIR_ENV`] for relative paths.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() && !dir.is_empty() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> IoResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce an output. Contains no timestamps, so
/// identical runs write identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON of the effective options.
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn new(command: &str, config: &serde_json::Value, seed: u64) -> Self {
        let canonical = serde_json::to_vec(config).expect("json values serialize");
        RunManifest {
            command: command.to_string(),
            config_hash: sha256_hex(&canonical),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> IoResult<()> {
        let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// `<output>.manifest.json`
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_for(&self, output: &Path) -> IoResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_file(&Self::path_for(output), text.as_bytes())
    }
}
