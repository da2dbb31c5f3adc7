//! Line-laser emitter model.
//!
//! The laser frame emits along its local `-z` axis and fans out along local
//! `y`, so the light sheet is the local `y-z` plane and its normal is local
//! `x`. Directions are projected onto the `|z| = 1` plane; the cross-section
//! is a unit-amplitude Gaussian in the projected `x` and the fan is clipped to
//! `|y| <= tan(cone / 2)`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geom::{Mat3, PlaneParams, Pose, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaserError {
    #[error("{0}")]
    Domain(String),
    #[error("direction is outside the emission hemisphere (z = {0})")]
    OutsideHemisphere(f64),
}

/// Gaussian width on the projection plane for a full divergence angle
/// measured at the 1/e² intensity level.
pub fn sigma_from_divergence(theta_l: f64) -> Result<f64, LaserError> {
    if !(theta_l > 0.0 && theta_l < PI) {
        return Err(LaserError::Domain(format!(
            "divergence angle {theta_l} outside (0, pi)"
        )));
    }
    // 1/e² level: exp(-x² / 2σ²) = e⁻² at x = tan(θ/2).
    let level = (-2.0f64).exp();
    Ok((theta_l / 2.0).tan() / (-2.0 * level.ln()).sqrt())
}

/// Scale that makes the fan's integrated intensity equal that of a
/// unit-intensity point source, `4π`.
pub fn power_correction(sigma: f64, theta_c: f64) -> Result<f64, LaserError> {
    if !(sigma > 0.0) {
        return Err(LaserError::Domain(format!("sigma {sigma} must be positive")));
    }
    if !(theta_c > 0.0 && theta_c < PI) {
        return Err(LaserError::Domain(format!(
            "cone angle {theta_c} outside (0, pi)"
        )));
    }
    Ok(4.0 * PI / (2.0 * (theta_c / 2.0).tan() * sigma * (2.0 * PI).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserModel {
    /// Laser frame to world.
    pub pose: Pose,
    pub color: [f64; 3],
    pub power_mw: f64,
    /// Full divergence (thickness) angle at 1/e², radians.
    pub divergence: f64,
    /// Full fan angle, radians.
    pub cone_angle: f64,
    sigma: f64,
    scale: f64,
}

pub const DEFAULT_LASER_COLOR: [f64; 3] = [0.0, 0.2, 1.0];

impl LaserModel {
    pub fn new(
        pose: Pose,
        color: [f64; 3],
        power_mw: f64,
        divergence: f64,
        cone_angle: f64,
    ) -> Result<Self, LaserError> {
        if !(divergence > 0.0 && divergence < cone_angle && cone_angle < PI) {
            return Err(LaserError::Domain(format!(
                "need 0 < divergence ({divergence}) < cone angle ({cone_angle}) < pi"
            )));
        }
        if !(power_mw >= 0.0 && power_mw.is_finite()) {
            return Err(LaserError::Domain(format!("invalid power {power_mw} mW")));
        }
        if color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(LaserError::Domain(format!("color {color:?} outside [0, 1]")));
        }
        let sigma = sigma_from_divergence(divergence)?;
        let scale = power_correction(sigma, cone_angle)?;
        Ok(Self {
            pose,
            color,
            power_mw,
            divergence,
            cone_angle,
            sigma,
            scale,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Half-length of the fan on the projection plane, `tan(cone / 2)`.
    pub fn gamma(&self) -> f64 {
        (self.cone_angle / 2.0).tan()
    }

    pub fn power_scale(&self) -> f64 {
        self.scale
    }

    pub fn origin(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn with_pose(&self, pose: Pose) -> Self {
        Self {
            pose,
            ..self.clone()
        }
    }

    pub fn to_local(&self, world_dir: &Vec3) -> Vec3 {
        self.pose.rotation.transpose() * world_dir
    }

    /// Scaled intensity for a direction in the laser frame; zero outside the fan.
    pub fn intensity_mask(&self, dir_local: &Vec3) -> Result<f64, LaserError> {
        Ok(self.gaussian(dir_local)? * self.scale)
    }

    /// Unit-amplitude cross-section value, before power correction.
    pub fn gaussian(&self, dir_local: &Vec3) -> Result<f64, LaserError> {
        if !(dir_local.z < 0.0) {
            return Err(LaserError::OutsideHemisphere(dir_local.z));
        }
        let iz = 1.0 / dir_local.z.abs();
        let (xp, yp) = (dir_local.x * iz, dir_local.y * iz);
        if yp.abs() > self.gamma() {
            return Ok(0.0);
        }
        Ok((-xp * xp / (2.0 * self.sigma * self.sigma)).exp())
    }

    /// Plane of the light sheet in the world frame, unit normal along the
    /// laser's local x axis.
    pub fn laser_plane(&self) -> PlaneParams {
        let n = self.pose.rotation.column(0).normalize();
        PlaneParams::from_point_normal(&self.origin(), &n)
    }
}

pub fn laser_plane(model: &LaserModel) -> PlaneParams {
    model.laser_plane()
}

/// Orientation with the beam along `beam` and the fan along `fan`
/// (orthogonalized against the beam).
pub fn orientation_from_beam(beam: &Vec3, fan: &Vec3) -> Mat3 {
    let z = -beam.normalize();
    let y = (fan - z * fan.dot(&z)).normalize();
    let x = y.cross(&z);
    Mat3::from_columns(&[x, y, z])
}

/// Laser mounted beside the camera at `(baseline, 0, 0)` in the camera frame,
/// beam toed in toward the optical axis by `toe_in` radians (rotation about
/// the camera y axis) and fan along the camera y axis.
pub fn side_mounted_pose(baseline: f64, toe_in: f64) -> Pose {
    let s = baseline.signum();
    let beam = Vec3::new(-s * toe_in.sin(), 0.0, toe_in.cos());
    let fan = Vec3::new(0.0, -s, 0.0);
    Pose {
        rotation: orientation_from_beam(&beam, &fan),
        translation: Vec3::new(baseline, 0.0, 0.0),
    }
}
