//! Per-frame pass files and the JSON sidecar holding the ground truth.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use lasersim::camera::{Distortion, Intrinsics};
use lasersim::geom::{PlaneParams, Pose, Vec3};
use lasersim::image::ImageBuffer;
use lasersim::render::RenderOutput;
use lasersim::scene::Scene;

use crate::{CliError, Result};

pub const RGB_FILE: &str = "rgb.pfm";
pub const RGB_PREVIEW: &str = "rgb.png";
pub const DEPTH_FILE: &str = "depth.pfm";
pub const NORMALS_FILE: &str = "normals.pfm";
pub const MASK_FILE: &str = "mask.pfm";
pub const SIDECAR_FILE: &str = "sidecar.json";

pub fn frame_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("frame_{index:04}"))
}

pub fn mat3_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

pub fn mat4_rows(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    [0, 1, 2, 3].map(|i| [0, 1, 2, 3].map(|j| m[(i, j)]))
}

pub fn pose_from_rows(m: &[[f64; 4]; 4]) -> Result<Pose> {
    let r = Matrix3::from_fn(|i, j| m[i][j]);
    Pose::new(r, Vec3::new(m[0][3], m[1][3], m[2][3])).map_err(|e| CliError::Format(format!("pose: {e}")))
}

pub fn plane_array(p: &PlaneParams) -> [f64; 4] {
    [p.a, p.b, p.c, p.d]
}

pub fn plane_from_array(a: &[f64; 4]) -> PlaneParams {
    PlaneParams::new(a[0], a[1], a[2], a[3])
}

/// Ground truth written next to every rendered frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub frame: usize,
    pub intrinsics: Intrinsics,
    /// Camera matrix, row-major.
    pub k: [[f64; 3]; 3],
    /// Non-zero only when the RGB pass was warped after rendering.
    pub distortion: Distortion,
    /// World to camera.
    pub t_cw: [[f64; 4]; 4],
    /// Camera to world.
    pub t_wc: [[f64; 4]; 4],
    /// Laser frame to world.
    pub laser_pose: [[f64; 4]; 4],
    pub laser_color: [f64; 3],
    /// Laser plane in the camera frame, unit normal and `d <= 0`.
    pub phi_gt: [f64; 4],
    pub seed: u64,
    pub spp: u32,
    pub exposure: f64,
    pub files: Vec<String>,
}

impl Sidecar {
    pub fn new(frame: usize, scene: &Scene, seed: u64, spp: u32, exposure: f64, files: Vec<String>) -> Result<Self> {
        let cam = &scene.camera;
        let plane_cam = scene
            .laser
            .laser_plane()
            .transformed(&cam.pose_cw)
            .normalized()
            .map_err(|e| CliError::Numerical(format!("laser plane: {e}")))?;
        Ok(Self {
            frame,
            intrinsics: cam.intrinsics,
            k: mat3_rows(&cam.intrinsics.matrix()),
            distortion: Distortion::default(),
            t_cw: mat4_rows(&cam.pose_cw.to_matrix()),
            t_wc: mat4_rows(&cam.pose_cw.inverse().to_matrix()),
            laser_pose: mat4_rows(&scene.laser.pose.to_matrix()),
            laser_color: scene.laser.color,
            phi_gt: plane_array(&plane_cam),
            seed,
            spp,
            exposure,
            files,
        })
    }

    pub fn pose_wc(&self) -> Result<Pose> {
        pose_from_rows(&self.t_wc)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SIDECAR_FILE);
        let text = crate::read_text(&path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
    }
}

pub fn write_pfm(path: &Path, img: &ImageBuffer) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    img.write_pfm(&mut w).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<ImageBuffer> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    ImageBuffer::read_pfm(&mut BufReader::new(f)).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

pub fn write_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    img.write_png_preview(&mut w)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes the requested passes and returns the file names written.
pub fn write_passes(dir: &Path, out: &RenderOutput, png: bool) -> Result<Vec<String>> {
    crate::create_dir(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, img: &Option<ImageBuffer>| -> Result<()> {
        if let Some(img) = img {
            write_pfm(&dir.join(name), img)?;
            files.push(name.to_string());
        }
        Ok(())
    };
    put(RGB_FILE, &out.rgb)?;
    put(DEPTH_FILE, &out.depth)?;
    put(NORMALS_FILE, &out.normals)?;
    put(MASK_FILE, &out.laser_mask)?;
    if png {
        if let Some(rgb) = &out.rgb {
            write_png(&dir.join(RGB_PREVIEW), rgb)?;
            files.push(RGB_PREVIEW.to_string());
        }
    }
    Ok(files)
}

/// A frame directory loaded back from disk; missing passes are `None`.
#[derive(Debug, Clone)]
pub struct LoadedFrame {
    pub dir: PathBuf,
    pub sidecar: Sidecar,
    pub rgb: Option<ImageBuffer>,
    pub depth: Option<ImageBuffer>,
    pub mask: Option<ImageBuffer>,
}

impl LoadedFrame {
    pub fn load(dir: &Path) -> Result<Self> {
        let sidecar = Sidecar::load(dir)?;
        let opt = |name: &str| -> Result<Option<ImageBuffer>> {
            let p = dir.join(name);
            if p.exists() {
                read_pfm(&p).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            rgb: opt(RGB_FILE)?,
            depth: opt(DEPTH_FILE)?,
            mask: opt(MASK_FILE)?,
            sidecar,
        })
    }

    pub fn require<'a>(&self, img: &'a Option<ImageBuffer>, name: &str) -> Result<&'a ImageBuffer> {
        img.as_ref()
            .ok_or_else(|| CliError::Format(format!("{}: missing {name}", self.dir.display())))
    }
}

/// Frame directories under `root`, in frame order. A directory holding a
/// sidecar is itself returned as the only frame.
pub fn list_frames(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(SIDECAR_FILE).exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
    let mut dirs = Vec::new();
    for e in entries {
        let e = e.map_err(|e| CliError::io(root, e))?;
        let name = e.file_name().to_string_lossy().to_string();
        if name.starts_with("frame_") && e.path().join(SIDECAR_FILE).exists() {
            dirs.push(e.path());
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Format(format!("{}: no frame directories", root.display())));
    }
    Ok(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::write_json;
    use lasersim::camera::CameraRig;
    use lasersim::laser::{side_mounted_pose, LaserModel, DEFAULT_LASER_COLOR};

    #[test]
    fn sidecar_round_trip() {
        let k = Intrinsics::new(100.0, 100.0, 0.0, 32.0, 24.0, 64, 48).unwrap();
        let pose_cw = Pose::from_axis_angle(&Vec3::y(), 0.1, Vec3::new(0.1, 0.0, 0.0));
        let laser_cam = side_mounted_pose(0.2, 13f64.to_radians());
        let laser = LaserModel::new(
            pose_cw.inverse().compose(&laser_cam),
            DEFAULT_LASER_COLOR,
            20.0,
            0.004,
            1.0,
        )
        .unwrap();
        let scene = Scene::new(CameraRig::new(k, pose_cw), laser);
        let sc = Sidecar::new(3, &scene, 9, 4, 1e-5, vec![]).unwrap();
        let want = [0.9744, 0.0, 0.2250, -0.1949];
        for (a, b) in sc.phi_gt.iter().zip(want) {
            assert!((a - b).abs() < 1e-4, "{:?}", sc.phi_gt);
        }
        let dir = tempfile::tempdir().unwrap();
        write_json(&dir.path().join(SIDECAR_FILE), &sc).unwrap();
        let back = Sidecar::load(dir.path()).unwrap();
        assert_eq!(back, sc);
        assert!(back.pose_wc().unwrap().compose(&pose_cw).translation.norm() < 1e-12);
    }
}
