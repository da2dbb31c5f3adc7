//! Pinhole camera with optional Brown–Conrady lens distortion.
//!
//! Pixel centres sit at integer coordinates with the origin at the centre of
//! the top-left pixel; `u` grows to the right and `v` downwards.

use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Line3, Pose, Vec3};

pub type Pixel = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("undistortion did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    #[serde(default)]
    pub skew: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        skew: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let k = Self {
            fx,
            fy,
            skew,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if ![self.skew, self.cx, self.cy].iter().all(|v| v.is_finite()) {
            return Err(CameraError::InvalidIntrinsics(
                "non-finite skew or principal point".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::InvalidIntrinsics("zero image size".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0,
        )
    }

    /// Closed-form inverse of the upper-triangular camera matrix.
    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let (fx, fy, s, cx, cy) = (self.fx, self.fy, self.skew, self.cx, self.cy);
        Matrix3::new(
            1.0 / fx,
            -s / (fx * fy),
            cy * s / (fx * fy) - cx / fx,
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn from_matrix(k: &Matrix3<f64>, width: u32, height: u32) -> Result<Self, CameraError> {
        Self::new(
            k[(0, 0)],
            k[(1, 1)],
            k[(0, 1)],
            k[(0, 2)],
            k[(1, 2)],
            width,
            height,
        )
    }

    /// Same camera at a different sensor resolution (pixel pitch scaled by
    /// `1 / factor`).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            fx: self.fx * factor,
            fy: self.fy * factor,
            skew: self.skew * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            width: (self.width as f64 * factor).round() as u32,
            height: (self.height as f64 * factor).round() as u32,
        }
    }

    /// Normalized image point to pixel.
    pub fn to_pixel(&self, xn: &Vector2<f64>) -> Pixel {
        Pixel::new(
            self.fx * xn.x + self.skew * xn.y + self.cx,
            self.fy * xn.y + self.cy,
        )
    }

    /// Pixel to normalized image point.
    pub fn to_normalized(&self, px: &Pixel) -> Vector2<f64> {
        let y = (px.y - self.cy) / self.fy;
        let x = (px.x - self.cx - self.skew * y) / self.fx;
        Vector2::new(x, y)
    }

    /// Projects a point given in the camera frame (no distortion).
    pub fn project_camera_point(&self, p: &Vec3) -> Result<Pixel, CameraError> {
        if !(p.z > 0.0) {
            return Err(CameraError::BehindCamera(p.z));
        }
        Ok(self.to_pixel(&Vector2::new(p.x / p.z, p.y / p.z)))
    }

    pub fn contains(&self, px: &Pixel) -> bool {
        px.x >= -0.5
            && px.y >= -0.5
            && px.x <= self.width as f64 - 0.5
            && px.y <= self.height as f64 - 0.5
    }
}

/// Back-projection ray through `pixel`: origin at the camera centre,
/// direction `K⁻¹ (u, v, 1)` (so the direction has unit z).
pub fn unproject_to_ray(intr: &Intrinsics, pixel: &Pixel) -> Line3 {
    let dir = intr.inverse_matrix() * Vec3::new(pixel.x, pixel.y, 1.0);
    Line3 {
        origin: Vec3::zeros(),
        dir,
    }
}

/// Brown–Conrady coefficients: radial `k1..k3`, tangential `p1, p2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distortion {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub p1: f64,
    pub p2: f64,
}

const UNDISTORT_MAX_ITER: usize = 50;

impl Distortion {
    pub fn is_zero(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.k3 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        if self.is_zero() {
            return *p;
        }
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        Vector2::new(
            x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x),
            y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y,
        )
    }

    /// Jacobian of [`Distortion::apply`] with respect to the input point.
    pub fn jacobian(&self, p: &Vector2<f64>) -> Matrix2<f64> {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let radial = 1.0 + r2 * (self.k1 + r2 * (self.k2 + r2 * self.k3));
        // d(radial)/d(r2)
        let dr = self.k1 + r2 * (2.0 * self.k2 + 3.0 * self.k3 * r2);
        let dxdx = radial + x * dr * 2.0 * x + 2.0 * self.p1 * y + self.p2 * 6.0 * x;
        let dxdy = x * dr * 2.0 * y + 2.0 * self.p1 * x + self.p2 * 2.0 * y;
        let dydx = y * dr * 2.0 * x + self.p1 * 2.0 * x + 2.0 * self.p2 * y;
        let dydy = radial + y * dr * 2.0 * y + self.p1 * 6.0 * y + 2.0 * self.p2 * x;
        Matrix2::new(dxdx, dxdy, dydx, dydy)
    }

    /// Inverts [`Distortion::apply`] by Newton iteration.
    pub fn undistort(&self, p: &Vector2<f64>) -> Result<Vector2<f64>, CameraError> {
        if self.is_zero() {
            return Ok(*p);
        }
        let mut x = *p;
        for _ in 0..UNDISTORT_MAX_ITER {
            let r = self.apply(&x) - p;
            if r.norm() < 1e-14 {
                return Ok(x);
            }
            let Some(j_inv) = self.jacobian(&x).try_inverse() else {
                break;
            };
            let step = j_inv * r;
            x -= step;
            if !x.iter().all(|v| v.is_finite()) {
                break;
            }
            if step.norm() < 1e-15 {
                return Ok(x);
            }
        }
        if (self.apply(&x) - p).norm() < 1e-10 {
            return Ok(x);
        }
        Err(CameraError::NoConvergence(UNDISTORT_MAX_ITER))
    }
}

pub fn apply_distortion(d: &Distortion, p_norm: &Vector2<f64>) -> Vector2<f64> {
    d.apply(p_norm)
}

pub fn undistort(d: &Distortion, p_dist: &Vector2<f64>) -> Result<Vector2<f64>, CameraError> {
    d.undistort(p_dist)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub intrinsics: Intrinsics,
    pub distortion: Distortion,
    /// World to camera.
    pub pose_cw: Pose,
}

impl CameraRig {
    pub fn new(intrinsics: Intrinsics, pose_cw: Pose) -> Self {
        Self {
            intrinsics,
            distortion: Distortion::default(),
            pose_cw,
        }
    }

    /// Camera placed at `eye` looking at `target`; `up` picks the roll so that
    /// the image `-v` direction is as close to `up` as possible.
    pub fn look_at(intrinsics: Intrinsics, eye: &Vec3, target: &Vec3, up: &Vec3) -> Self {
        let z = (target - eye).normalize();
        let x = z.cross(up).normalize();
        let y = z.cross(&x);
        // Rows of R_cw are the camera axes expressed in the world frame.
        let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let t = -(r * eye);
        Self::new(
            intrinsics,
            Pose {
                rotation: r,
                translation: t,
            },
        )
    }

    pub fn center(&self) -> Vec3 {
        self.pose_cw.inverse().translation
    }

    pub fn project(&self, p_w: &Vec3) -> Result<Pixel, CameraError> {
        let pc = self.pose_cw.transform_point(p_w);
        if !(pc.z > 0.0) {
            return Err(CameraError::BehindCamera(pc.z));
        }
        let xn = Vector2::new(pc.x / pc.z, pc.y / pc.z);
        Ok(self.intrinsics.to_pixel(&self.distortion.apply(&xn)))
    }
}
