//! Triangulation, scan assembly and evaluation.
//!
//! A stripe pixel `(u, v)` defines the ray `lambda K⁻¹ (u, v, 1)`; its
//! intersection with the laser plane is the measured point. Depth is the
//! camera-frame z coordinate throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{unproject_to_ray, Distortion, Intrinsics, Pixel};
use crate::extract::{GroundTruthProfile, LaserProfile};
use crate::geom::{line_plane_parameter, GeomError, PlaneParams, Pose, Vec3};

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("point clouds are in different coordinate frames")]
    FrameTagMismatch,
    #[error("no (frame, row) pairs are valid in both clouds")]
    NoOverlap,
    #[error("invalid laser plane: {0}")]
    Plane(#[from] GeomError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordFrame {
    Camera,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    InvalidProfile,
    ParallelRay,
    BehindCamera,
    NoDepth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub point: Vec3,
    pub frame: usize,
    pub row: usize,
    pub flag: Option<PointFlag>,
}

impl CloudPoint {
    pub fn is_valid(&self) -> bool {
        self.flag.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub frame: CoordFrame,
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn valid_points(&self) -> impl Iterator<Item = &CloudPoint> {
        self.points.iter().filter(|p| p.is_valid())
    }

    pub fn valid_count(&self) -> usize {
        self.valid_points().count()
    }

    /// ASCII PLY with the valid points, coordinates to 9 significant digits.
    pub fn write_ply(&self, w: &mut impl Write) -> std::io::Result<()> {
        let n = self.valid_count();
        writeln!(w, "ply\nformat ascii 1.0\nelement vertex {n}")?;
        writeln!(w, "property double x\nproperty double y\nproperty double z\nend_header")?;
        for p in self.valid_points() {
            writeln!(w, "{:.8e} {:.8e} {:.8e}", p.point.x, p.point.y, p.point.z)?;
        }
        Ok(())
    }
}

fn intersect(k: &Intrinsics, plane: &PlaneParams, px: &Pixel) -> Result<Vec3, PointFlag> {
    let ray = unproject_to_ray(k, px);
    match line_plane_parameter(&ray, plane) {
        Ok(l) if l > 0.0 => Ok(ray.at(l)),
        Ok(_) => Err(PointFlag::BehindCamera),
        Err(_) => Err(PointFlag::ParallelRay),
    }
}

/// Camera-frame points for every profile row; failures are flagged per
/// point. With `distortion`, stripe pixels are undistorted first.
pub fn triangulate_frame(
    profile: &LaserProfile,
    k: &Intrinsics,
    distortion: Option<&Distortion>,
    plane: &PlaneParams,
    frame: usize,
) -> Result<PointCloud, ReconError> {
    plane.normalized()?;
    let points = profile
        .rows
        .par_iter()
        .map(|r| {
            let (u, v) = profile.pixel(r);
            let res = if !r.valid {
                Err(PointFlag::InvalidProfile)
            } else {
                let mut px = Pixel::new(u, v);
                if let Some(d) = distortion.filter(|d| !d.is_zero()) {
                    match d.undistort(&k.to_normalized(&px)) {
                        Ok(xn) => px = k.to_pixel(&xn),
                        Err(_) => return flagged(frame, r.row, PointFlag::InvalidProfile),
                    }
                }
                intersect(k, plane, &px)
            };
            match res {
                Ok(p) => CloudPoint {
                    point: p,
                    frame,
                    row: r.row,
                    flag: None,
                },
                Err(f) => flagged(frame, r.row, f),
            }
        })
        .collect();
    Ok(PointCloud {
        frame: CoordFrame::Camera,
        points,
    })
}

fn flagged(frame: usize, row: usize, flag: PointFlag) -> CloudPoint {
    CloudPoint {
        point: Vec3::from_element(f64::NAN),
        frame,
        row,
        flag: Some(flag),
    }
}

pub fn triangulate(profile: &LaserProfile, k: &Intrinsics, plane: &PlaneParams) -> Result<PointCloud, ReconError> {
    triangulate_frame(profile, k, None, plane, 0)
}

/// Points on the camera rays through the ground-truth stripe positions at
/// the rendered depth.
pub fn ground_truth_cloud(gt: &GroundTruthProfile, k: &Intrinsics, frame: usize) -> PointCloud {
    let kinv = k.inverse_matrix();
    let points = gt
        .profile
        .rows
        .iter()
        .zip(&gt.depth)
        .map(|(r, d)| {
            if !r.valid {
                return flagged(frame, r.row, PointFlag::InvalidProfile);
            }
            match d {
                Some(z) if z.is_finite() => {
                    let (u, v) = gt.profile.pixel(r);
                    CloudPoint {
                        point: kinv * Vec3::new(u, v, 1.0) * *z,
                        frame,
                        row: r.row,
                        flag: None,
                    }
                }
                _ => flagged(frame, r.row, PointFlag::NoDepth),
            }
        })
        .collect();
    PointCloud {
        frame: CoordFrame::Camera,
        points,
    }
}

/// Transforms each camera-frame cloud by its camera-to-world pose and
/// concatenates. Output is ordered by (frame, row).
pub fn assemble_scan(frames: &[(PointCloud, Pose)]) -> Result<PointCloud, ReconError> {
    if frames.iter().any(|(c, _)| c.frame != CoordFrame::Camera) {
        return Err(ReconError::FrameTagMismatch);
    }
    let mut points: Vec<CloudPoint> = frames
        .iter()
        .flat_map(|(c, pose)| {
            c.points.iter().map(move |p| CloudPoint {
                point: if p.is_valid() {
                    pose.transform_point(&p.point)
                } else {
                    p.point
                },
                ..*p
            })
        })
        .collect();
    points.sort_by_key(|p| (p.frame, p.row));
    Ok(PointCloud {
        frame: CoordFrame::World,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub frame: usize,
    pub row: usize,
    /// Measured minus true camera-frame z.
    pub z_error: f64,
    pub difference: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub mean: f64,
    pub rms: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
    /// Mean of the unit difference vectors, renormalized; `None` when every
    /// difference is zero.
    pub mean_direction: Option<[f64; 3]>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn fraction_within(&self, tol: f64) -> f64 {
        self.rows.iter().filter(|r| r.z_error.abs() < tol).count() as f64 / self.count as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,row,z_error,dx,dy,dz\n");
        for r in &self.rows {
            let d = r.difference;
            let _ = writeln!(s, "{},{},{:.9e},{:.9e},{:.9e},{:.9e}", r.frame, r.row, r.z_error, d[0], d[1], d[2]);
        }
        s
    }
}

/// Compares two clouds in the same frame, matching points by (frame, row).
pub fn evaluate(cloud: &PointCloud, truth: &PointCloud) -> Result<EvalReport, ReconError> {
    if cloud.frame != truth.frame {
        return Err(ReconError::FrameTagMismatch);
    }
    let truth_map: BTreeMap<(usize, usize), Vec3> = truth.valid_points().map(|p| ((p.frame, p.row), p.point)).collect();
    let mut rows = Vec::new();
    let mut dir_sum = Vec3::zeros();
    let mut dir_n = 0usize;
    for p in cloud.valid_points() {
        let Some(t) = truth_map.get(&(p.frame, p.row)) else {
            continue;
        };
        let d = p.point - t;
        if let Some(u) = d.try_normalize(0.0) {
            dir_sum += u;
            dir_n += 1;
        }
        rows.push(EvalRow {
            frame: p.frame,
            row: p.row,
            z_error: d.z,
            difference: [d.x, d.y, d.z],
        });
    }
    if rows.is_empty() {
        return Err(ReconError::NoOverlap);
    }
    rows.sort_by_key(|r| (r.frame, r.row));
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.z_error).sum::<f64>() / n;
    let rms = (rows.iter().map(|r| r.z_error * r.z_error).sum::<f64>() / n).sqrt();
    let mean_abs = rows.iter().map(|r| r.z_error.abs()).sum::<f64>() / n;
    let max_abs = rows.iter().map(|r| r.z_error.abs()).fold(0.0, f64::max);
    let mean_direction = (dir_n > 0)
        .then(|| dir_sum.try_normalize(0.0))
        .flatten()
        .map(|v| [v.x, v.y, v.z]);
    Ok(EvalReport {
        count: rows.len(),
        mean,
        rms,
        mean_abs,
        max_abs,
        mean_direction,
        rows,
    })
}
