//! Evaluation: SSIM curves, KLT tracking and the physical displacement model.

mod curve;
mod klt;
mod physical;

pub use curve::{
    magnifier_method, request_for_sample, run_curve, run_curve_on_samples, write_curve_csv, write_curve_svg,
    CurvePoint, CurveReport,
};
pub use klt::{
    compare_amplified_trajectories, good_features, klt_track, track_pair, write_tracks_csv, KltParams, Track,
    TrajectoryReport,
};
pub use physical::{physical_displacement, second_derivative_spectral, PhysicalSetup, PhysicalWave};
