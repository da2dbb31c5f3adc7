use nalgebra::{DVector, Matrix3, Vector2, Vector3};

use super::{lm_solve, project_board_point, CalibError, Correspondence2D3D, Homography, Jacobian, LmOptions};
use crate::camera::{Distortion, Intrinsics};
use crate::geom::{nearest_rotation, Pose, Vec3};

/// Board pose (board to camera) from a homography and the intrinsics.
///
/// With `K^-1 H = [h1' h2' h3']`, the scale is `1 / |h1'|`, `r1 = s h1'`,
/// `r2 = s h2'`, `r3 = r1 x r2` and `t = s h3'`. The sign is chosen so the
/// board lies in front of the camera, and the rotation estimate is projected
/// onto the nearest proper rotation.
pub fn pose_from_homography(h: &Homography, k: &Intrinsics) -> Result<Pose, CalibError> {
    let m = k.inverse_matrix() * h.matrix();
    let (h1, h2, h3) = (m.column(0), m.column(1), m.column(2));
    let n1 = h1.norm();
    if !(n1 > 0.0) {
        return Err(CalibError::DegenerateConfiguration("zero first column".into()));
    }
    let mut s = 1.0 / n1;
    if (h3 * s).z <= 0.0 {
        s = -s;
    }
    let t: Vector3<f64> = h3 * s;
    if !(t.z > 0.0) {
        return Err(CalibError::Cheirality);
    }
    let r1: Vector3<f64> = h1 * s;
    let r2: Vector3<f64> = h2 * s;
    let r3 = r1.cross(&r2);
    let r = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r3]))?;
    Ok(Pose {
        rotation: r,
        translation: t,
    })
}

/// `H = K [r1 r2 t]` for a board pose.
pub fn homography_from_pose(k: &Intrinsics, pose: &Pose) -> Result<Homography, CalibError> {
    let r = &pose.rotation;
    let m = Matrix3::from_columns(&[
        r.column(0).into_owned(),
        r.column(1).into_owned(),
        pose.translation,
    ]);
    Homography::from_matrix(&(k.matrix() * m))
}

/// One calibration image: corner correspondences, optional laser stripe
/// pixels on the board, and what was recovered from them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibView {
    pub correspondences: Vec<Correspondence2D3D>,
    pub laser_pixels: Vec<Vector2<f64>>,
    pub homography: Option<Homography>,
    /// Board to camera.
    pub pose: Option<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackprojectedPoint {
    /// Camera frame.
    pub point: Vec3,
    /// Board coordinates.
    pub board: Vector2<f64>,
    /// Whether the board point lies within the span of the view's corners.
    pub inside: bool,
}

/// Maps the view's laser pixels onto its board plane and into the camera
/// frame. The board mapping uses the homography induced by the recovered
/// pose, so every point lies exactly on that pose's board plane. Pixels are
/// undistorted first when `distortion` is nonzero.
pub fn backproject_laser_pixels(
    view: &CalibView,
    k: &Intrinsics,
    distortion: &Distortion,
) -> Result<Vec<BackprojectedPoint>, CalibError> {
    if view.laser_pixels.is_empty() {
        return Err(CalibError::MissingLaserPixels);
    }
    let pose = view.pose.as_ref().ok_or(CalibError::MissingPose)?;
    let h = homography_from_pose(k, pose)?;
    let (mut lo, mut hi) = (Vector2::repeat(f64::INFINITY), Vector2::repeat(f64::NEG_INFINITY));
    for c in &view.correspondences {
        lo = lo.inf(&c.world);
        hi = hi.sup(&c.world);
    }
    view.laser_pixels
        .iter()
        .map(|px| {
            let px = if distortion.is_zero() {
                *px
            } else {
                let d = distortion.undistort(&k.to_normalized(px))?;
                k.to_pixel(&d)
            };
            let b = h.apply_inverse(&px);
            let inside = b.x >= lo.x && b.x <= hi.x && b.y >= lo.y && b.y <= hi.y;
            Ok(BackprojectedPoint {
                point: pose.transform_point(&Vec3::new(b.x, b.y, 0.0)),
                board: b,
                inside,
            })
        })
        .collect()
}

/// Board pose minimising the reprojection error of `corrs` with fixed
/// intrinsics, started from `initial`. Returns the pose and the RMS
/// reprojection distance in pixels.
pub fn refine_board_pose(
    k: &Intrinsics,
    distortion: &Distortion,
    initial: &Pose,
    corrs: &[Correspondence2D3D],
    opts: &LmOptions,
) -> Result<(Pose, f64), CalibError> {
    if corrs.len() < 3 {
        return Err(CalibError::DegenerateConfiguration("need at least 3 corners".into()));
    }
    let unpack = |x: &DVector<f64>| {
        Pose::from_rotation_vector(&Vec3::new(x[0], x[1], x[2]), Vec3::new(x[3], x[4], x[5]))
    };
    let f = |x: &DVector<f64>| {
        let pose = unpack(x);
        let mut r = DVector::zeros(2 * corrs.len());
        for (i, c) in corrs.iter().enumerate() {
            let p = project_board_point(k, distortion, &pose, &c.world) - c.image;
            r[2 * i] = p.x;
            r[2 * i + 1] = p.y;
        }
        r
    };
    let rv = initial.rotation_vector();
    let t = initial.translation;
    let x0 = DVector::from_column_slice(&[rv.x, rv.y, rv.z, t.x, t.y, t.z]);
    let sol = lm_solve(&f, Jacobian::FiniteDifference, x0, opts)?;
    let rms = (sol.residuals.norm_squared() / corrs.len() as f64).sqrt();
    Ok((unpack(&sol.x), rms))
}
