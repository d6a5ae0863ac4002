//! Synthetic rigs, motion generation, corruption, scoring and Monte-Carlo
//! sweeps over noise levels.

mod corrupt;
mod generate;
mod score;
mod sweep;

pub use corrupt::{add_noise, apply_scale, NoiseSpec};
pub use generate::{
    generate_motion, generate_motion_with, generate_random_acs, uniform_rotation, AcsConfig, AcsGroundTruth,
    MotionKind, MotionRanges,
};
pub use score::{
    eps_phi, err_joint, err_rot, err_rot_euler, err_trans, score_joint, score_joint_pair, score_relpose,
    score_scaled, ErrorReport,
};
pub use sweep::{
    run_sweep, run_trial, trial_seed, GridLayout, NoiseGrid, Stat, SweepConfig, SweepMode, SweepReport, SweepRow,
    TrialOutcome, DEFAULT_SEED,
};
