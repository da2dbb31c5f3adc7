//! Rendered calibration datasets: checkerboard views for the camera and
//! checkerboard views with the laser stripe for the laser plane.

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lasersim::calib::{
    backproject_laser_pixels, detect_corners, estimate_homography_dlt, fit_laser_plane, pose_from_homography,
    refine_board_pose, refine_homography, zhang_intrinsics, CalibView, CameraCalibration, CornerDetectorOptions,
    Correspondence2D3D, LmOptions, PlaneFit, PlaneFitOptions, ZhangOptions,
};
use lasersim::camera::{CameraRig, Distortion, Intrinsics};
use lasersim::extract::{extract_profile, ExtractParams, LaserColor};
use lasersim::geom::{PlaneParams, Pose, Vec3};
use lasersim::image::ImageBuffer;
use lasersim::laser::LaserModel;
use lasersim::render::{render, Passes, RenderSettings, DEFAULT_EXPOSURE};
use lasersim::scene::{checkerboard_scene, CheckerboardSpec, Scene};

use crate::config::{BoardConfig, CameraConfig, LaserConfig};
use crate::poses::{generate_poses, PoseConstraints};
use crate::{CliError, Result};

/// Everything needed to render a calibration dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibSetup {
    pub camera: CameraConfig,
    pub laser: LaserConfig,
    pub board: BoardConfig,
    pub camera_views: usize,
    pub laser_views: usize,
    pub seed: u64,
    pub spp: u32,
    /// Ambient light level for the board views.
    pub ambient: f64,
    pub exposure: f64,
    pub camera_poses: PoseConstraints,
    pub laser_poses: PoseConstraints,
}

impl Default for CalibSetup {
    fn default() -> Self {
        Self {
            camera: CameraConfig::default(),
            laser: LaserConfig::default(),
            board: BoardConfig::default(),
            camera_views: 38,
            laser_views: 20,
            seed: 0,
            spp: 16,
            ambient: 1.0,
            exposure: DEFAULT_EXPOSURE,
            camera_poses: PoseConstraints::default(),
            laser_poses: PoseConstraints {
                min_distance: 0.65,
                max_distance: 1.05,
                max_tilt: 40f64.to_radians(),
                ..PoseConstraints::default()
            },
        }
    }
}

/// Detected corners of one view, paired with the board coordinates.
pub type ViewCorners = Vec<Correspondence2D3D>;

impl CalibSetup {
    pub fn intrinsics(&self) -> Result<Intrinsics> {
        self.camera.intrinsics()
    }

    pub fn board_spec(&self) -> Result<CheckerboardSpec> {
        self.board.spec()
    }

    /// Ground-truth laser plane in the camera frame.
    pub fn laser_plane(&self) -> Result<PlaneParams> {
        self.laser
            .model()?
            .laser_plane()
            .normalized()
            .map_err(|e| CliError::Numerical(e.to_string()))
    }

    pub fn camera_view_poses(&self) -> Result<Vec<Pose>> {
        generate_poses(
            self.seed,
            self.camera_views,
            &self.intrinsics()?,
            &self.board_spec()?,
            &self.camera_poses,
        )
        .map_err(CliError::Config)
    }

    pub fn laser_view_poses(&self) -> Result<Vec<Pose>> {
        let phi = self.laser_plane()?;
        let c = PoseConstraints {
            laser_plane: Some([phi.a, phi.b, phi.c, phi.d]),
            ..self.laser_poses
        };
        generate_poses(
            self.seed.wrapping_add(1),
            self.laser_views,
            &self.intrinsics()?,
            &self.board_spec()?,
            &c,
        )
        .map_err(CliError::Config)
    }

    /// Board seen from a camera at the world origin; the laser is switched
    /// off when `laser_on` is false.
    pub fn board_scene(&self, board_pose: &Pose, laser_on: bool) -> Result<Scene> {
        let (mesh, _) =
            checkerboard_scene(&self.board_spec()?, board_pose).map_err(|e| CliError::Config(e.to_string()))?;
        let mut laser: LaserModel = self.laser.model()?;
        if !laser_on {
            laser.power_mw = 0.0;
        }
        let mut scene = Scene::new(CameraRig::new(self.intrinsics()?, Pose::identity()), laser);
        scene.meshes.push(mesh);
        scene.ambient = self.ambient;
        Ok(scene)
    }

    pub fn render_view(&self, board_pose: &Pose, laser_on: bool, view: usize) -> Result<ImageBuffer> {
        let scene = self.board_scene(board_pose, laser_on)?;
        let settings = RenderSettings {
            passes: Passes {
                rgb: true,
                depth: false,
                normals: false,
                mask: false,
            },
            spp: self.spp,
            seed: self.seed.wrapping_mul(1000).wrapping_add(view as u64),
            exposure: self.exposure,
            specular_bounce: false,
        };
        Ok(render(&scene, &settings)?.rgb.expect("rgb requested"))
    }

    pub fn correspondences(&self, image: &ImageBuffer) -> Result<ViewCorners> {
        let b = self.board_spec()?;
        let corners = detect_corners(image, b.inner_cols, b.inner_rows, &CornerDetectorOptions::default())?;
        Ok(corners
            .iter()
            .zip(b.corners_local())
            .map(|(px, w)| Correspondence2D3D {
                image: *px,
                world: Vector2::from(w),
            })
            .collect())
    }
}

/// Renders the camera views and detects their corners.
pub fn render_camera_dataset(setup: &CalibSetup) -> Result<Vec<ViewCorners>> {
    let poses = setup.camera_view_poses()?;
    poses
        .par_iter()
        .enumerate()
        .map(|(i, p)| setup.correspondences(&setup.render_view(p, false, i)?))
        .collect()
}

pub fn calibrate_camera(views: &[ViewCorners], k: &Intrinsics, estimate_distortion: bool) -> Result<CameraCalibration> {
    let opts = ZhangOptions {
        estimate_distortion,
        lm: LmOptions {
            max_iter: 200,
            ..LmOptions::default()
        },
        ..ZhangOptions::default()
    };
    Ok(zhang_intrinsics(views, k.width, k.height, &opts)?)
}

/// A laser calibration view: corners from the laser-off image and stripe
/// pixels from the laser-on image.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserView {
    pub corners: ViewCorners,
    pub laser_pixels: Vec<Vector2<f64>>,
}

pub fn stripe_pixels(rgb: &ImageBuffer, color: [f64; 3]) -> Vec<Vector2<f64>> {
    let profile = extract_profile(rgb, LaserColor::dominant(color), &ExtractParams::default());
    profile
        .valid_rows()
        .filter(|r| !r.multi_peak)
        .map(|r| {
            let (u, v) = profile.pixel(r);
            Vector2::new(u, v)
        })
        .collect()
}

pub fn render_laser_dataset(setup: &CalibSetup) -> Result<Vec<LaserView>> {
    let poses = setup.laser_view_poses()?;
    let offset = setup.camera_views;
    poses
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let off = setup.render_view(p, false, offset + i)?;
            let on = setup.render_view(p, true, offset + i)?;
            Ok(LaserView {
                corners: setup.correspondences(&off)?,
                laser_pixels: stripe_pixels(&on, setup.laser.color),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserCalibration {
    pub fit: PlaneFit,
    pub points: Vec<Vec3>,
    pub per_view_rms: Vec<f64>,
}

/// Board poses from the corners with the calibrated camera, stripe pixels
/// mapped onto the boards, and the plane fitted through all of them.
pub fn calibrate_laser(views: &[LaserView], k: &Intrinsics, distortion: &Distortion) -> Result<LaserCalibration> {
    let lm = LmOptions::default();
    let mut points = Vec::new();
    let mut per_view_rms = Vec::new();
    for v in views {
        let undistorted: Vec<Correspondence2D3D> = v
            .corners
            .iter()
            .map(|c| {
                let d = distortion.undistort(&k.to_normalized(&c.image))?;
                Ok(Correspondence2D3D {
                    image: k.to_pixel(&d),
                    world: c.world,
                })
            })
            .collect::<std::result::Result<_, lasersim::camera::CameraError>>()
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let h0 = estimate_homography_dlt(&undistorted)?;
        let (h, _) = refine_homography(&h0, &undistorted, &lm)?;
        let p0 = pose_from_homography(&h, k)?;
        let (pose, rms) = refine_board_pose(k, distortion, &p0, &v.corners, &lm)?;
        per_view_rms.push(rms);
        let view = CalibView {
            correspondences: v.corners.clone(),
            laser_pixels: v.laser_pixels.clone(),
            homography: Some(h),
            pose: Some(pose),
        };
        if view.laser_pixels.is_empty() {
            continue;
        }
        points.extend(
            backproject_laser_pixels(&view, k, distortion)?
                .into_iter()
                .filter(|p| p.inside)
                .map(|p| p.point),
        );
    }
    let fit = fit_laser_plane(&points, &PlaneFitOptions::default())?;
    Ok(LaserCalibration {
        fit,
        points,
        per_view_rms,
    })
}

/// Angle between two plane normals, milliradians.
pub fn normal_error_mrad(a: &PlaneParams, b: &PlaneParams) -> f64 {
    a.normal_angle_to(b) * 1e3
}
