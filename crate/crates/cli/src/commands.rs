//! Command implementations behind the `lasersim` binary. Each returns the
//! paths it wrote so callers and tests can inspect them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lasersim::calib::Correspondence2D3D;
use lasersim::camera::{Distortion, Intrinsics};
use lasersim::extract::{extract_profile, ground_truth_profile, ExtractParams, LaserColor, LaserProfile};
use lasersim::geom::{PlaneParams, Pose};
use lasersim::image::ImageBuffer;
use lasersim::recon::{assemble_scan, evaluate, ground_truth_cloud, triangulate_frame, EvalReport, PointCloud};
use lasersim::render::render;

use crate::config::{PassName, PoseConfig, ScanConfig};
use crate::dataset::{calibrate_camera, calibrate_laser, normal_error_mrad, stripe_pixels, CalibSetup, LaserView};
use crate::frames::{
    frame_dir, list_frames, plane_array, plane_from_array, read_pfm, write_passes, write_pfm, LoadedFrame, Sidecar,
    SIDECAR_FILE,
};
use crate::poses::generate_poses;
use crate::{create_dir, read_text, write_bytes, write_json, CliError, Result};

/// Overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct RenderOverrides {
    pub seed: Option<u64>,
    pub passes: Option<Vec<PassName>>,
    /// Warp the RGB pass with these lens coefficients after rendering.
    pub distort: Option<Distortion>,
}

impl RenderOverrides {
    pub fn apply(&self, cfg: &mut ScanConfig) {
        if let Some(s) = self.seed {
            cfg.render.seed = s;
        }
        if let Some(p) = &self.passes {
            cfg.render.passes = p.clone();
        }
    }
}

/// Resamples an ideal pinhole image as seen through a lens with
/// distortion `d`: each output pixel looks up the undistorted position by
/// bilinear interpolation. Pixels whose source falls outside stay 0.
pub fn distort_image(img: &ImageBuffer, k: &Intrinsics, d: &Distortion) -> ImageBuffer {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0.0; w * c];
            for x in 0..w {
                let xn = k.to_normalized(&Vector2::new(x as f64, y as f64));
                let Ok(u) = d.undistort(&xn) else { continue };
                let src = k.to_pixel(&u);
                if src.x < 0.0 || src.y < 0.0 || src.x > (w - 1) as f64 || src.y > (h - 1) as f64 {
                    continue;
                }
                for ch in 0..c {
                    row[x * c + ch] = sample_channel(img, ch, src.x, src.y);
                }
            }
            row
        })
        .collect();
    ImageBuffer::from_vec(w, h, c, rows.concat())
}

fn sample_channel(img: &ImageBuffer, ch: usize, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let g = |xx: usize, yy: usize| img.pixel(xx, yy)[ch];
    let top = g(x0, y0) * (1.0 - fx) + g(x1, y0) * fx;
    let bottom = g(x0, y1) * (1.0 - fx) + g(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Renders every frame of the sweep into `out/frame_NNNN`.
pub fn cmd_render(cfg: &ScanConfig, out: &Path, ov: &RenderOverrides) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.clone();
    ov.apply(&mut cfg);
    cfg.validate()?;
    let settings = cfg.render.settings()?;
    let meshes = cfg.meshes()?;
    create_dir(out)?;
    let mut dirs = Vec::with_capacity(cfg.sweep.count);
    for i in 0..cfg.sweep.count {
        let scene = cfg.scene_for_frame(&meshes, i)?;
        let mut result = render(&scene, &settings)?;
        let mut sidecar = Sidecar::new(i, &scene, settings.seed, settings.spp, settings.exposure, Vec::new())?;
        if let (Some(d), Some(rgb)) = (&ov.distort, result.rgb.as_mut()) {
            *rgb = distort_image(rgb, &scene.camera.intrinsics, d);
            sidecar.distortion = *d;
        }
        let dir = frame_dir(out, i);
        sidecar.files = write_passes(&dir, &result, cfg.output.png)?;
        write_json(&dir.join(SIDECAR_FILE), &sidecar)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Ground truth of a calibration dataset, written beside its images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetTruth {
    pub setup: CalibSetup,
    pub intrinsics: Intrinsics,
    pub phi_gt: [f64; 4],
    pub camera_poses: Vec<PoseConfig>,
    pub laser_poses: Vec<PoseConfig>,
}

pub const DATASET_FILE: &str = "dataset.json";

fn camera_view_file(dir: &Path, i: usize) -> PathBuf {
    dir.join("camera").join(format!("view_{i:04}.pfm"))
}

fn laser_view_files(dir: &Path, i: usize) -> (PathBuf, PathBuf) {
    let l = dir.join("laser");
    (l.join(format!("view_{i:04}_off.pfm")), l.join(format!("view_{i:04}_on.pfm")))
}

/// Renders the camera and laser calibration images.
pub fn cmd_calib_dataset(setup: &CalibSetup, out: &Path) -> Result<PathBuf> {
    let cam_poses = setup.camera_view_poses()?;
    let laser_poses = setup.laser_view_poses()?;
    create_dir(&out.join("camera"))?;
    create_dir(&out.join("laser"))?;
    cam_poses
        .par_iter()
        .enumerate()
        .try_for_each(|(i, p)| write_pfm(&camera_view_file(out, i), &setup.render_view(p, false, i)?))?;
    laser_poses.par_iter().enumerate().try_for_each(|(i, p)| {
        let (off, on) = laser_view_files(out, i);
        let view = setup.camera_views + i;
        write_pfm(&off, &setup.render_view(p, false, view)?)?;
        write_pfm(&on, &setup.render_view(p, true, view)?)
    })?;
    let truth = DatasetTruth {
        setup: setup.clone(),
        intrinsics: setup.intrinsics()?,
        phi_gt: plane_array(&setup.laser_plane()?),
        camera_poses: cam_poses.iter().map(PoseConfig::from_pose).collect(),
        laser_poses: laser_poses.iter().map(PoseConfig::from_pose).collect(),
    };
    let path = out.join(DATASET_FILE);
    write_json(&path, &truth)?;
    Ok(path)
}

fn load_truth(dir: &Path) -> Result<DatasetTruth> {
    let path = dir.join(DATASET_FILE);
    let text = read_text(&path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// Camera calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub intrinsics: Intrinsics,
    pub k: [[f64; 3]; 3],
    pub distortion: Distortion,
    pub rms: f64,
    pub per_view_rms: Vec<f64>,
    /// Board to camera for each view.
    pub poses: Vec<PoseConfig>,
    /// Present when the dataset's ground truth was available.
    pub ground_truth: Option<Intrinsics>,
}

impl CalibrationFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
    }
}

fn sorted_files(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    files.sort();
    Ok(files)
}

/// Detects corners in `dataset/camera/*.pfm` and calibrates the camera.
pub fn cmd_calibrate_camera(dataset: &Path, out: &Path, estimate_distortion: bool) -> Result<CalibrationFile> {
    let truth = load_truth(dataset)?;
    let setup = &truth.setup;
    let files = sorted_files(&dataset.join("camera"), ".pfm")?;
    let views: Vec<Vec<Correspondence2D3D>> = files
        .par_iter()
        .map(|f| setup.correspondences(&read_pfm(f)?))
        .collect::<Result<_>>()?;
    let k0 = setup.intrinsics()?;
    let cal = calibrate_camera(&views, &k0, estimate_distortion)?;
    let file = CalibrationFile {
        intrinsics: cal.intrinsics,
        k: crate::frames::mat3_rows(&cal.intrinsics.matrix()),
        distortion: cal.distortion,
        rms: cal.rms,
        per_view_rms: cal.per_view_rms.clone(),
        poses: cal.poses.iter().map(PoseConfig::from_pose).collect(),
        ground_truth: Some(truth.intrinsics),
    };
    write_json(out, &file)?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneFile {
    /// Laser plane in the camera frame, unit normal.
    pub phi: [f64; 4],
    pub point_count: usize,
    pub mean_abs_distance: f64,
    pub rms_distance: f64,
    pub max_abs_distance: f64,
    pub phi_gt: Option<[f64; 4]>,
    pub angle_error_mrad: Option<f64>,
}

impl PlaneFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
    }
}

/// Fits the laser plane from `dataset/laser/*` using a camera calibration.
pub fn cmd_calibrate_laser(dataset: &Path, calibration: &Path, out: &Path) -> Result<PlaneFile> {
    let truth = load_truth(dataset)?;
    let cal = CalibrationFile::load(calibration)?;
    let setup = &truth.setup;
    let n = sorted_files(&dataset.join("laser"), "_on.pfm")?.len();
    let views: Vec<LaserView> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (off, on) = laser_view_files(dataset, i);
            Ok(LaserView {
                corners: setup.correspondences(&read_pfm(&off)?)?,
                laser_pixels: stripe_pixels(&read_pfm(&on)?, setup.laser.color),
            })
        })
        .collect::<Result<_>>()?;
    let lc = calibrate_laser(&views, &cal.intrinsics, &cal.distortion)?;
    let gt = plane_from_array(&truth.phi_gt);
    let file = PlaneFile {
        phi: plane_array(&lc.fit.plane),
        point_count: lc.points.len(),
        mean_abs_distance: lc.fit.mean_abs_distance,
        rms_distance: lc.fit.rms_distance,
        max_abs_distance: lc.fit.max_abs_distance,
        phi_gt: Some(truth.phi_gt),
        angle_error_mrad: Some(normal_error_mrad(&lc.fit.plane, &gt)),
    };
    write_json(out, &file)?;
    Ok(file)
}

/// Stripe extraction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Channel difference of the rendered RGB pass.
    Rgb,
    /// Gaussian fit to the laser mask pass.
    Mask,
    /// Mask positions with depth read from the depth pass.
    Gt,
}

impl Method {
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',')
            .filter(|m| !m.trim().is_empty())
            .map(|m| match m.trim() {
                "rgb" => Ok(Method::Rgb),
                "mask" => Ok(Method::Mask),
                "gt" => Ok(Method::Gt),
                other => Err(CliError::Config(format!("unknown method '{other}'"))),
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Rgb => "rgb",
            Method::Mask => "mask",
            Method::Gt => "gt",
        }
    }
}

fn profile_for(frame: &LoadedFrame, method: Method, params: &ExtractParams) -> Result<LaserProfile> {
    Ok(match method {
        Method::Rgb => extract_profile(
            frame.require(&frame.rgb, "rgb.pfm")?,
            LaserColor::dominant(frame.sidecar.laser_color),
            params,
        ),
        Method::Mask | Method::Gt => {
            ground_truth_profile(
                frame.require(&frame.mask, "mask.pfm")?,
                frame.require(&frame.depth, "depth.pfm")?,
                params,
            )
            .profile
        }
    })
}

/// Writes one CSV of stripe positions per frame and returns the profiles.
pub fn cmd_extract(input: &Path, out: &Path, method: Method, params: &ExtractParams) -> Result<Vec<LaserProfile>> {
    let dirs = list_frames(input)?;
    create_dir(out)?;
    dirs.iter()
        .enumerate()
        .map(|(i, d)| {
            let frame = LoadedFrame::load(d)?;
            let profile = profile_for(&frame, method, params)?;
            write_bytes(
                &out.join(format!("profile_{i:04}_{}.csv", method.name())),
                profile.to_csv().as_bytes(),
            )?;
            Ok(profile)
        })
        .collect()
}

/// Camera-frame cloud of one frame for a method. `Gt` uses depth directly;
/// the others triangulate with `plane` (or the sidecar's ground truth).
pub fn frame_cloud(
    frame: &LoadedFrame,
    index: usize,
    method: Method,
    plane: Option<&PlaneParams>,
    params: &ExtractParams,
) -> Result<PointCloud> {
    let sc = &frame.sidecar;
    if method == Method::Gt {
        let gt = ground_truth_profile(
            frame.require(&frame.mask, "mask.pfm")?,
            frame.require(&frame.depth, "depth.pfm")?,
            params,
        );
        return Ok(ground_truth_cloud(&gt, &sc.intrinsics, index));
    }
    let profile = profile_for(frame, method, params)?;
    let gt_plane = plane_from_array(&sc.phi_gt);
    let plane = plane.unwrap_or(&gt_plane);
    let dist = (!sc.distortion.is_zero() && method == Method::Rgb).then_some(&sc.distortion);
    Ok(triangulate_frame(&profile, &sc.intrinsics, dist, plane, index)?)
}

fn load_plane(path: Option<&Path>) -> Result<Option<PlaneParams>> {
    path.map(|p| PlaneFile::load(p).map(|f| plane_from_array(&f.phi)))
        .transpose()
}

fn write_ply(path: &Path, cloud: &PointCloud) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    cloud.write_ply(&mut w).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Triangulates every frame and writes the assembled world-frame cloud.
pub fn cmd_reconstruct(
    input: &Path,
    plane: Option<&Path>,
    method: Method,
    out: &Path,
    params: &ExtractParams,
) -> Result<PointCloud> {
    let plane = load_plane(plane)?;
    let dirs = list_frames(input)?;
    let frames: Vec<(PointCloud, Pose)> = dirs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let frame = LoadedFrame::load(d)?;
            let cloud = frame_cloud(&frame, i, method, plane.as_ref(), params)?;
            Ok((cloud, frame.sidecar.pose_wc()?))
        })
        .collect::<Result<_>>()?;
    let cloud = assemble_scan(&frames)?;
    write_ply(out, &cloud)?;
    Ok(cloud)
}

/// Compares each method against the ground-truth depth; writes
/// `report_<method>.json` and `report_<method>.csv` into `out`.
pub fn cmd_evaluate(
    input: &Path,
    plane: Option<&Path>,
    methods: &[Method],
    out: &Path,
    params: &ExtractParams,
) -> Result<Vec<(Method, EvalReport)>> {
    let plane = load_plane(plane)?;
    let dirs = list_frames(input)?;
    let frames: Vec<LoadedFrame> = dirs.iter().map(|d| LoadedFrame::load(d)).collect::<Result<_>>()?;
    let truth = merge(
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| frame_cloud(f, i, Method::Gt, None, params))
            .collect::<Result<Vec<_>>>()?,
    );
    create_dir(out)?;
    let mut reports = Vec::new();
    for &m in methods {
        let cloud = merge(
            frames
                .iter()
                .enumerate()
                .map(|(i, f)| frame_cloud(f, i, m, plane.as_ref(), params))
                .collect::<Result<Vec<_>>>()?,
        );
        let report = evaluate(&cloud, &truth)?;
        write_json(&out.join(format!("report_{}.json", m.name())), &report)?;
        write_bytes(&out.join(format!("report_{}.csv", m.name())), report.to_csv().as_bytes())?;
        reports.push((m, report));
    }
    Ok(reports)
}

fn merge(clouds: Vec<PointCloud>) -> PointCloud {
    let mut it = clouds.into_iter();
    let mut first = it.next().expect("at least one frame");
    for c in it {
        first.points.extend(c.points);
    }
    first
}

/// Renders the sweep and writes the assembled RGB reconstruction.
pub fn cmd_scan(cfg: &ScanConfig, out: &Path, ov: &RenderOverrides, plane: Option<&Path>) -> Result<PointCloud> {
    let mut ov = ov.clone();
    if ov.passes.is_none() {
        ov.passes = Some(vec![PassName::Rgb, PassName::Depth, PassName::Mask]);
    }
    cmd_render(cfg, out, &ov)?;
    cmd_reconstruct(out, plane, Method::Rgb, &out.join("scan.ply"), &ExtractParams::default())
}

/// Writes `count` board poses for the default board and camera.
pub fn cmd_poses(setup: &CalibSetup, seed: u64, count: usize, out: &Path) -> Result<Vec<PoseConfig>> {
    let poses = generate_poses(
        seed,
        count,
        &setup.intrinsics()?,
        &setup.board_spec()?,
        &setup.camera_poses,
    )
    .map_err(CliError::Config)?;
    let list: Vec<PoseConfig> = poses.iter().map(PoseConfig::from_pose).collect();
    write_json(out, &list)?;
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distortion_warp_is_identity() {
        let k = Intrinsics::new(50.0, 50.0, 0.0, 10.0, 8.0, 20, 16).unwrap();
        let data = (0..20 * 16 * 3).map(|i| (i % 97) as f64).collect();
        let img = ImageBuffer::from_vec(20, 16, 3, data);
        let out = distort_image(&img, &k, &Distortion::default());
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn barrel_warp_moves_content_inward() {
        let k = Intrinsics::new(50.0, 50.0, 0.0, 20.0, 20.0, 41, 41).unwrap();
        // A bright column at x = 35 in the ideal image.
        let img = ImageBuffer::from_fn(41, 41, |x, _| if x == 35 { 1.0 } else { 0.0 });
        let d = Distortion {
            k1: -0.2,
            ..Default::default()
        };
        let out = distort_image(&img, &k, &d);
        let row = out.row(20);
        let mass: f64 = row.iter().sum();
        let centroid = row.iter().enumerate().map(|(x, v)| x as f64 * v).sum::<f64>() / mass;
        // 15 px off-axis: 15 * (1 - 0.2 * 0.3^2) = 14.73 px.
        assert!((centroid - 34.73).abs() < 0.1, "centroid {centroid}");
    }

    #[test]
    fn methods_parse() {
        assert_eq!(Method::parse_list("rgb,mask,gt").unwrap(), vec![Method::Rgb, Method::Mask, Method::Gt]);
        assert_eq!(Method::parse_list("depth").unwrap_err().exit_code(), 2);
    }
}
