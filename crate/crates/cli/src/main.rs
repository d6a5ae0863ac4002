//! `acs-calib`: calibrate articulated camera rigs from pose files, simulate
//! rigs and run noise sweeps.
//!
//! Exit codes are listed in [`exit_code`]. On failure a single JSON line
//! `{"error": <category>, "code": <exit code>, "message": ...}` is written to
//! stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acs_core::io::{
    find_camera, load_sequences, read_document, resolve_output, save_sequences, write_document, write_file,
    write_trajectory_csv, DegeneracyDoc, Document, ErrorDoc, IoError, IoResult, JointDoc, RelposeDoc, RunManifest,
    ScaledDoc, TruthDoc,
};
use acs_core::sim::{
    add_noise, apply_scale, eps_phi, err_joint, err_rot, err_trans, generate_motion, generate_random_acs,
    run_sweep, AcsConfig, AcsGroundTruth, ErrorReport, MotionKind, NoiseSpec, SweepConfig, DEFAULT_SEED,
};
use acs_core::{
    calibrate_relative_pose, calibrate_scaled, check_degeneracy_fixed, estimate_joint_fixed,
    estimate_joint_overlapping, recover_absolute_scales, recover_trajectory, CalibError, LmSettings,
    MotionSequence, Point3,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "acs-calib", version, about = "Articulated camera system calibration")]
struct Cli {
    /// Master seed, recorded in every manifest and used by the simulation
    /// commands [default: 20090601; for sweeps, the config's seed].
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate joints or relative poses from pose files.
    #[command(subcommand)]
    Calibrate(Calibrate),
    /// Generate synthetic data or run noise sweeps.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Express both camera trajectories in camera A's reference frame.
    Trajectory {
        #[arg(long)]
        poses: PathBuf,
        /// Relative pose result.
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an estimate against simulated ground truth.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// The estimate came from scaled data; compare against scaled truth.
        #[arg(long)]
        scaled: bool,
    },
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    poses: PathBuf,
    /// Defaults to the first camera in the file.
    #[arg(long)]
    camera_a: Option<String>,
    /// Defaults to the second camera in the file.
    #[arg(long)]
    camera_b: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Calibrate {
    /// Joint in both cameras from world-referenced poses.
    JointOverlap(PairArgs),
    /// Joint in one camera from its ego-motion about a fixed joint.
    JointFixed {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        camera: String,
        /// Re-express the motions relative to the image at this step first.
        #[arg(long)]
        reference: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relative pose from ego-motions and the joint in camera A.
    Relpose {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        joint: PathBuf,
    },
    /// Relative pose and relative scale from scaled ego-motions.
    Scaled {
        #[command(flatten)]
        pair: PairArgs,
        /// Joint in camera A estimated from the same scaled data.
        #[arg(long)]
        joint: PathBuf,
        /// Metric joint in camera A; enables absolute scale recovery.
        #[arg(long)]
        metric_joint: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    OverlappingWorld,
    FixedJoint,
    General,
}

impl From<Kind> for MotionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::OverlappingWorld => MotionKind::OverlappingWorld,
            Kind::FixedJoint => MotionKind::FixedJoint,
            Kind::General => MotionKind::General,
        }
    }
}

#[derive(Subcommand)]
enum Simulate {
    /// Monte-Carlo sweep over a noise grid, one CSV row per grid point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses all cores. Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Pose file and ground truth of one random rig. The rig depends only on
    /// the seed, so runs with the same seed and different kinds share it.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 30)]
        motions: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma_rot_deg: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_trans_m: f64,
        /// Translation scale of camera A (ego kinds only).
        #[arg(long, default_value_t = 1.0)]
        mu_a: f64,
        /// Translation scale of camera B (ego kinds only).
        #[arg(long, default_value_t = 1.0)]
        mu_b: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

/// Process exit code for an error category.
fn exit_code(category: &str) -> u8 {
    match category {
        "usage" => 2,
        "io" => 3,
        "parse_error" => 4,
        "invalid_rotation" => 5,
        "mixed_frames" => 6,
        "duplicate_step" => 7,
        "gimbal_lock" => 10,
        "degenerate_matrix" => 11,
        "negative_determinant" => 12,
        "degenerate" => 13,
        "length_mismatch" => 14,
        "too_few_motions" => 15,
        "invalid_sequence" => 16,
        "wrong_frame" => 17,
        "no_convergence" => 18,
        "non_positive_scale" => 19,
        "not_collinear" => 20,
        "invalid_input" => 21,
        _ => 1,
    }
}

fn fail(category: &str, message: &str) -> ExitCode {
    let code = exit_code(category);
    eprintln!("{}", json!({"error": category, "code": code, "message": message}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version; a closed pipe is not an error
            let _ = write!(std::io::stdout(), "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim()),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.category(), &e.to_string()),
    }
}

fn run(cli: &Cli) -> IoResult<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Calibrate(c) => calibrate(c, seed),
        Command::Simulate(Simulate::Sweep { config, out, threads }) => sweep(config, out, *threads, cli.seed),
        Command::Simulate(Simulate::Generate {
            kind,
            motions,
            sigma_rot_deg,
            sigma_trans_m,
            mu_a,
            mu_b,
            out,
            truth,
        }) => {
            let noise = NoiseSpec::new(*sigma_rot_deg, *sigma_trans_m);
            generate(seed, *kind, *motions, noise, (*mu_a, *mu_b), out, truth)
        }
        Command::Trajectory { poses, calib, out } => trajectory(poses, calib, out, seed),
        Command::Eval {
            estimate,
            truth,
            out,
            scaled,
        } => eval(estimate, truth, out, *scaled, seed),
    }
}

fn finish(out: &Path, command: &str, options: serde_json::Value, seed: u64, inputs: &[&Path]) -> IoResult<()> {
    let mut manifest = RunManifest::new(command, &options, seed);
    for p in inputs {
        manifest.add_input(p)?;
    }
    manifest.write_for(out)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn pair<'a>(seqs: &'a [MotionSequence], args: &PairArgs) -> IoResult<(&'a MotionSequence, &'a MotionSequence)> {
    let pick = |name: &Option<String>, index: usize| -> IoResult<&'a MotionSequence> {
        match name {
            Some(n) => find_camera(seqs, n),
            None => seqs.get(index).ok_or_else(|| {
                IoError::Calib(CalibError::InvalidInput(format!(
                    "input holds {} camera(s), need two",
                    seqs.len()
                )))
            }),
        }
    };
    let a = pick(&args.camera_a, 0)?;
    let b = pick(&args.camera_b, 1)?;
    if a.camera_id() == b.camera_id() {
        return Err(CalibError::InvalidInput("camera A and camera B are the same".into()).into());
    }
    Ok((a, b))
}

/// Joint of camera `camera` from a joint document.
fn joint_for(doc_path: &Path, camera: &str) -> IoResult<Point3> {
    let doc = match read_document(doc_path)? {
        Document::Joint(j) => j,
        other => {
            return Err(CalibError::InvalidInput(format!(
                "{}: expected a joint document, found {}",
                doc_path.display(),
                other.kind()
            ))
            .into())
        }
    };
    if doc.camera == camera {
        return Ok(doc.joint());
    }
    match (&doc.camera_b, doc.o_b) {
        (Some(b), Some(o)) if b == camera => Ok(Point3::new(o[0], o[1], o[2])),
        _ => Err(CalibError::InvalidInput(format!(
            "{}: no joint for camera {camera:?} (document is for {:?})",
            doc_path.display(),
            doc.camera
        ))
        .into()),
    }
}

fn calibrate(c: &Calibrate, seed: u64) -> IoResult<()> {
    match c {
        Calibrate::JointOverlap(args) => {
            let seqs = load_sequences(&args.poses)?;
            let (a, b) = pair(&seqs, args)?;
            let est = estimate_joint_overlapping(a, b)?;
            let out = resolve_output(&args.out);
            write_document(&out, &Document::Joint(JointDoc::new(&est, a.camera_id(), Some(b.camera_id()), None)))?;
            let opts = json!({"camera_a": a.camera_id(), "camera_b": b.camera_id()});
            finish(&out, "calibrate joint-overlap", opts, seed, &[&args.poses])
        }
        Calibrate::JointFixed {
            poses,
            camera,
            reference,
            out,
        } => {
            let seqs = load_sequences(poses)?;
            let mut seq = find_camera(&seqs, camera)?.clone();
            if let Some(k) = reference {
                seq = seq.rebase(*k)?;
            }
            let out = resolve_output(out);
            let opts = json!({"camera": camera, "reference": reference});
            match estimate_joint_fixed(&seq) {
                Ok(est) => {
                    let doc = JointDoc::new(&est, camera, None, Some(seq.reference()));
                    write_document(&out, &Document::Joint(doc))?;
                    finish(&out, "calibrate joint-fixed", opts, seed, &[poses])
                }
                Err(e @ CalibError::Degenerate { .. }) => {
                    // the null space tells the user which axis the data rotate about
                    let report = check_degeneracy_fixed(&seq)?;
                    write_document(&out, &Document::Degeneracy(DegeneracyDoc::new(&report, camera)))?;
                    finish(&out, "calibrate joint-fixed", opts, seed, &[poses])?;
                    Err(e.into())
                }
                Err(e) => Err(e.into()),
            }
        }
        Calibrate::Relpose { pair: args, joint } => {
            let seqs = load_sequences(&args.poses)?;
            let (a, b) = pair(&seqs, args)?;
            let o_a = joint_for(joint, a.camera_id())?;
            let est = calibrate_relative_pose(a, b, &o_a, &LmSettings::default())?;
            let out = resolve_output(&args.out);
            write_document(&out, &Document::Relpose(RelposeDoc::new(&est, a.camera_id(), b.camera_id())))?;
            let opts = json!({"camera_a": a.camera_id(), "camera_b": b.camera_id()});
            finish(&out, "calibrate relpose", opts, seed, &[&args.poses, joint])?;
            if !est.converged {
                return Err(CalibError::NoConvergence { iterations: est.iterations }.into());
            }
            Ok(())
        }
        Calibrate::Scaled {
            pair: args,
            joint,
            metric_joint,
        } => {
            let seqs = load_sequences(&args.poses)?;
            let (a, b) = pair(&seqs, args)?;
            let o_hat = joint_for(joint, a.camera_id())?;
            let mut est = calibrate_scaled(a, b, &o_hat, &LmSettings::default())?;
            let mut inputs: Vec<&Path> = vec![&args.poses, joint];
            if let Some(m) = metric_joint {
                est = recover_absolute_scales(&est, &joint_for(m, a.camera_id())?)?;
                inputs.push(m);
            }
            let out = resolve_output(&args.out);
            write_document(&out, &Document::Scaled(ScaledDoc::new(&est, a.camera_id(), b.camera_id())))?;
            let opts = json!({
                "camera_a": a.camera_id(),
                "camera_b": b.camera_id(),
                "metric_joint": metric_joint.as_deref().map(path_str),
            });
            finish(&out, "calibrate scaled", opts, seed, &inputs)?;
            if !est.converged {
                return Err(CalibError::NoConvergence { iterations: est.iterations }.into());
            }
            Ok(())
        }
    }
}

fn sweep(config_path: &Path, out: &Path, threads: usize, seed: Option<u64>) -> IoResult<()> {
    let text = std::fs::read_to_string(config_path).map_err(|e| IoError::Io {
        path: path_str(config_path),
        source: e,
    })?;
    let mut config: SweepConfig = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CalibError::InvalidInput(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_sweep(&config))?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| IoError::Io {
        path: path_str(out),
        source: e,
    })?;
    let out = resolve_output(out);
    write_file(&out, &csv)?;
    let opts = serde_json::to_value(&config).expect("config serializes");
    finish(&out, "simulate sweep", opts, config.seed, &[config_path])
}

fn generate(
    seed: u64,
    kind: Kind,
    motions: usize,
    noise: NoiseSpec,
    (mu_a, mu_b): (f64, f64),
    out: &Path,
    truth_out: &Path,
) -> IoResult<()> {
    noise.validate()?;
    for mu in [mu_a, mu_b] {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(CalibError::NonPositiveScale(mu).into());
        }
    }
    let kind = MotionKind::from(kind);
    if motions == 0 {
        return Err(CalibError::InvalidInput("need at least one motion".into()).into());
    }
    if kind == MotionKind::OverlappingWorld && (mu_a != 1.0 || mu_b != 1.0) {
        return Err(CalibError::InvalidInput("scale factors apply to ego-motion kinds only".into()).into());
    }
    let mut gt = generate_random_acs(seed, &AcsConfig::default());
    gt.mu_a = mu_a;
    gt.mu_b = mu_b;
    // per-kind streams keep the rig shared and the motions independent
    let salt = match kind {
        MotionKind::OverlappingWorld => 1,
        MotionKind::FixedJoint => 2,
        MotionKind::General => 3,
    };
    let sub = |k: u64| seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt * 16 + k);
    let (a, b) = generate_motion(&gt, motions, kind, sub(0));
    let mut a = add_noise(&a, &noise, sub(1))?;
    let mut b = add_noise(&b, &noise, sub(2))?;
    if kind != MotionKind::OverlappingWorld {
        a = apply_scale(&a, mu_a)?;
        b = apply_scale(&b, mu_b)?;
    }
    let out = resolve_output(out);
    let truth_out = resolve_output(truth_out);
    save_sequences(&out, &[a.clone(), b.clone()])?;
    write_document(&truth_out, &Document::Truth(TruthDoc::new(&gt, a.camera_id(), b.camera_id())))?;
    let opts = json!({
        "kind": kind,
        "motions": motions,
        "noise": {"sigma_rot_deg": noise.sigma_rot_deg, "sigma_trans_m": noise.sigma_trans_m},
        "mu_a": mu_a,
        "mu_b": mu_b,
    });
    finish(&out, "simulate generate", opts.clone(), seed, &[])?;
    finish(&truth_out, "simulate generate", opts, seed, &[])
}

fn trajectory(poses: &Path, calib: &Path, out: &Path, seed: u64) -> IoResult<()> {
    let doc = match read_document(calib)? {
        Document::Relpose(d) => d,
        other => {
            return Err(CalibError::InvalidInput(format!(
                "{}: expected a relpose document, found {}",
                calib.display(),
                other.kind()
            ))
            .into())
        }
    };
    let seqs = load_sequences(poses)?;
    let a = find_camera(&seqs, &doc.camera_a)?;
    let b = find_camera(&seqs, &doc.camera_b)?;
    let points = recover_trajectory(&doc.to_estimate()?, a, b)?;
    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &points)?;
    let out = resolve_output(out);
    write_file(&out, &csv)?;
    let opts = json!({"camera_a": doc.camera_a, "camera_b": doc.camera_b});
    finish(&out, "trajectory", opts, seed, &[poses, calib])
}

fn arr(v: &[f64; 3]) -> Point3 {
    Point3::new(v[0], v[1], v[2])
}

/// Truth joint of the named camera, scaled if requested.
fn truth_joint(gt: &AcsGroundTruth, truth: &TruthDoc, camera: &str, scaled: bool) -> IoResult<Point3> {
    let (o, mu) = if camera == truth.camera_a {
        (gt.o_a, gt.mu_a)
    } else if camera == truth.camera_b {
        (gt.o_b, gt.mu_b)
    } else {
        return Err(CalibError::InvalidInput(format!("camera {camera:?} is not part of the ground truth")).into());
    };
    Ok(if scaled { o * mu } else { o })
}

fn eval(estimate: &Path, truth: &Path, out: &Path, scaled: bool, seed: u64) -> IoResult<()> {
    let truth_doc = match read_document(truth)? {
        Document::Truth(t) => t,
        other => {
            return Err(CalibError::InvalidInput(format!(
                "{}: expected a truth document, found {}",
                truth.display(),
                other.kind()
            ))
            .into())
        }
    };
    let gt = truth_doc.to_truth()?;
    let doc = read_document(estimate)?;
    let report = match &doc {
        Document::Joint(j) => {
            let ta = truth_joint(&gt, &truth_doc, &j.camera, scaled)?;
            let b = match (&j.camera_b, &j.o_b) {
                (Some(cb), Some(ob)) => Some((truth_joint(&gt, &truth_doc, cb, scaled)?, arr(ob))),
                _ => None,
            };
            ErrorReport {
                err_joint: Some(err_joint(&ta, &j.joint(), b.as_ref().map(|(t, e)| (t, e)))),
                ..ErrorReport::default()
            }
        }
        Document::Relpose(r) => {
            let (sa, sb) = if scaled { (gt.mu_a, gt.mu_b) } else { (1.0, 1.0) };
            ErrorReport {
                err_joint: Some(err_joint(&(gt.o_a * sa), &arr(&r.o_a), Some((&(gt.o_b * sb), &arr(&r.o_b))))),
                err_rot: Some(err_rot(&gt.h_ba.rotation, &r.rotation()?)),
                err_trans: Some(err_trans(&(gt.h_ba.translation * sb), &arr(&r.t_ba))),
                eps_phi: None,
            }
        }
        Document::Scaled(s) => {
            // metric translation when the absolute scales are known
            let err_t = match s.t_ba {
                Some(t) => err_trans(&gt.h_ba.translation, &arr(&t)),
                None => err_trans(&(gt.h_ba.translation * gt.mu_b), &arr(&s.t_ba_hat)),
            };
            ErrorReport {
                err_joint: Some(err_joint(&(gt.o_a * gt.mu_a), &arr(&s.o_a_hat), None)),
                err_rot: Some(err_rot(&gt.h_ba.rotation, &s.rotation()?)),
                err_trans: Some(err_t),
                eps_phi: Some(eps_phi(gt.phi_ba(), s.phi_ba)),
            }
        }
        other => {
            return Err(CalibError::InvalidInput(format!(
                "{}: cannot evaluate a {} document",
                estimate.display(),
                other.kind()
            ))
            .into())
        }
    };
    let out = resolve_output(out);
    write_document(
        &out,
        &Document::ErrorReport(ErrorDoc {
            estimate: doc.kind().to_string(),
            report,
        }),
    )?;
    finish(&out, "eval", json!({"scaled": scaled}), seed, &[estimate, truth])
}
