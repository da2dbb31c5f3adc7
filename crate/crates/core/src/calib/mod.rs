//! Calibration solvers: homographies, Zhang's closed form with bundle
//! refinement, board poses, laser-plane fitting, checkerboard corner
//! detection, and the shared Levenberg–Marquardt engine.

mod corners;
mod homography;
mod laser_plane;
mod lm;
mod pose;
mod zhang;

pub use corners::{detect_corners, refine_corner, CornerDetectorOptions};
pub use homography::{
    estimate_homography_dlt, refine_homography, transfer_problem, Correspondence2D3D, Homography,
};
pub use laser_plane::{fit_laser_plane, plane_fit_problem, PlaneFit, PlaneFitOptions};
pub use lm::{
    finite_difference_jacobian, lm_solve, max_jacobian_discrepancy, Jacobian, LmOptions,
    LmReport, LmSolution, Termination,
};
pub use pose::{
    backproject_laser_pixels, homography_from_pose, pose_from_homography, refine_board_pose, BackprojectedPoint,
    CalibView,
};
pub use zhang::{
    project_board_point, zhang_closed_form, zhang_intrinsics, CameraCalibration, ZhangOptions,
};

use thiserror::Error;

use crate::camera::CameraError;
use crate::geom::GeomError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("degenerate motion: {0}")]
    DegenerateMotion(String),
    #[error("need at least {needed} views, got {got}")]
    InsufficientViews { needed: usize, got: usize },
    #[error("board is behind the camera for both homography signs")]
    Cheirality,
    #[error("view has no laser pixels")]
    MissingLaserPixels,
    #[error("view has no recovered homography or pose")]
    MissingPose,
    #[error("points are collinear")]
    CollinearPoints,
    #[error("residual is not finite at the starting point")]
    NonFiniteStart,
    #[error("corner detection failed: {0}")]
    CornerDetection(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Camera(#[from] CameraError),
}
