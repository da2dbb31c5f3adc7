//! JSON configuration schema. Matrices are row-major nested arrays, angles
//! are radians and lengths metres. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use lasersim::camera::{CameraRig, Distortion, Intrinsics};
use lasersim::geom::{Pose, Vec3};
use lasersim::laser::{side_mounted_pose, LaserModel, DEFAULT_LASER_COLOR};
use lasersim::render::{Passes, RenderSettings, DEFAULT_EXPOSURE};
use lasersim::scene::{
    checkerboard_scene, icosphere, plane_quad, read_off, v_groove, Albedo, CheckerboardSpec, Material, PointLight,
    Scene, Shading, TriMesh, VGrooveSpec,
};

use crate::{read_text, CliError, Result};

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Rigid transform given as a rotation vector (axis times angle) and a
/// translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    #[serde(default)]
    pub rotation_vector: [f64; 3],
    #[serde(default)]
    pub translation: [f64; 3],
}

impl PoseConfig {
    pub fn to_pose(&self) -> Pose {
        Pose::from_rotation_vector(&v3(self.rotation_vector), v3(self.translation))
    }

    pub fn from_pose(p: &Pose) -> Self {
        let r = p.rotation_vector();
        let t = p.translation;
        Self {
            rotation_vector: [r.x, r.y, r.z],
            translation: [t.x, t.y, t.z],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CameraPoseConfig {
    /// Camera frame equals the world frame.
    #[default]
    Identity,
    LookAt {
        eye: [f64; 3],
        target: [f64; 3],
        #[serde(default = "default_up")]
        up: [f64; 3],
    },
    /// World-to-camera rotation (row-major) and translation.
    Matrix {
        rotation: [[f64; 3]; 3],
        translation: [f64; 3],
    },
}

fn default_up() -> [f64; 3] {
    [0.0, -1.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
    pub width: u32,
    pub height: u32,
    pub distortion: Distortion,
    pub pose: CameraPoseConfig,
}

impl Default for CameraConfig {
    /// Half-resolution version of a 2448 x 2048 sensor with fx = 3478.3.
    fn default() -> Self {
        Self {
            fx: 1739.15,
            fy: 1739.15,
            cx: 612.0,
            cy: 512.0,
            skew: 0.0,
            width: 1224,
            height: 1024,
            distortion: Distortion::default(),
            pose: CameraPoseConfig::Identity,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<Intrinsics> {
        Intrinsics::new(self.fx, self.fy, self.skew, self.cx, self.cy, self.width, self.height)
            .map_err(|e| CliError::Config(format!("camera: {e}")))
    }

    pub fn pose_cw(&self) -> Result<Pose> {
        Ok(match self.pose {
            CameraPoseConfig::Identity => Pose::identity(),
            CameraPoseConfig::LookAt { eye, target, up } => {
                let k = self.intrinsics()?;
                CameraRig::look_at(k, &v3(eye), &v3(target), &v3(up)).pose_cw
            }
            CameraPoseConfig::Matrix { rotation, translation } => {
                let r = Matrix3::from_fn(|i, j| rotation[i][j]);
                Pose::new(r, v3(translation)).map_err(|e| CliError::Config(format!("camera.pose: {e}")))?
            }
        })
    }

    pub fn rig(&self) -> Result<CameraRig> {
        let mut rig = CameraRig::new(self.intrinsics()?, self.pose_cw()?);
        rig.distortion = self.distortion;
        Ok(rig)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaserConfig {
    /// Offset of the laser along the camera x axis.
    pub baseline: f64,
    /// Inward rotation about the camera y axis.
    pub toe_in: f64,
    /// Laser-to-camera pose; overrides `baseline` and `toe_in`.
    pub pose: Option<PoseConfig>,
    pub color: [f64; 3],
    pub power_mw: f64,
    pub divergence: f64,
    pub cone_angle: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self {
            baseline: 0.2,
            toe_in: 13f64.to_radians(),
            pose: None,
            color: DEFAULT_LASER_COLOR,
            power_mw: 20.0,
            divergence: 0.004,
            cone_angle: 60f64.to_radians(),
        }
    }
}

impl LaserConfig {
    /// Laser frame to camera frame.
    pub fn pose_in_camera(&self) -> Pose {
        match &self.pose {
            Some(p) => p.to_pose(),
            None => side_mounted_pose(self.baseline, self.toe_in),
        }
    }

    /// Model with its pose in the camera frame.
    pub fn model(&self) -> Result<LaserModel> {
        LaserModel::new(self.pose_in_camera(), self.color, self.power_mw, self.divergence, self.cone_angle)
            .map_err(|e| CliError::Config(format!("laser: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub albedo: [f64; 3],
    pub specular_weight: f64,
    pub roughness: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            albedo: [0.8, 0.8, 0.8],
            specular_weight: 0.0,
            roughness: 1.0,
        }
    }
}

impl MaterialConfig {
    pub fn material(&self) -> Result<Material> {
        let m = Material {
            albedo: Albedo::Constant(self.albedo),
            specular_weight: self.specular_weight,
            roughness: self.roughness,
        };
        m.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoardConfig {
    pub inner_cols: usize,
    pub inner_rows: usize,
    pub square_size: f64,
    pub sheet_w: f64,
    pub sheet_h: f64,
    pub saturation: f64,
}

impl Default for BoardConfig {
    fn default() -> Self {
        let s = CheckerboardSpec::default();
        Self {
            inner_cols: s.inner_cols,
            inner_rows: s.inner_rows,
            square_size: s.square_size,
            sheet_w: s.sheet_w,
            sheet_h: s.sheet_h,
            saturation: s.saturation,
        }
    }
}

impl BoardConfig {
    pub fn spec(&self) -> Result<CheckerboardSpec> {
        let s = CheckerboardSpec {
            inner_cols: self.inner_cols,
            inner_rows: self.inner_rows,
            square_size: self.square_size,
            sheet_w: self.sheet_w,
            sheet_h: self.sheet_h,
            saturation: self.saturation,
        };
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectConfig {
    Plane {
        center: [f64; 3],
        /// Face normal; should point toward the camera.
        normal: [f64; 3],
        #[serde(default = "default_u_axis")]
        u_axis: [f64; 3],
        width: f64,
        height: f64,
        #[serde(default)]
        material: MaterialConfig,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        #[serde(default = "default_subdivisions")]
        subdivisions: usize,
        #[serde(default = "default_true")]
        smooth: bool,
        #[serde(default)]
        material: MaterialConfig,
    },
    VGroove {
        #[serde(default = "default_groove_length")]
        length: f64,
        #[serde(default = "default_groove_half_width")]
        half_width: f64,
        #[serde(default = "default_groove_angle")]
        wall_angle: f64,
        #[serde(default = "default_groove_flange")]
        flange_width: f64,
        #[serde(default = "default_groove_material")]
        material: MaterialConfig,
        #[serde(default)]
        pose: PoseConfig,
    },
    Checkerboard {
        #[serde(flatten)]
        board: BoardConfig,
        #[serde(default)]
        pose: PoseConfig,
    },
    /// Triangle mesh in OFF format, path relative to the config file.
    Mesh {
        path: PathBuf,
        #[serde(default)]
        smooth: bool,
        #[serde(default)]
        material: MaterialConfig,
        #[serde(default)]
        pose: PoseConfig,
    },
}

fn default_u_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn default_subdivisions() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_groove_length() -> f64 {
    VGrooveSpec::default().length
}
fn default_groove_half_width() -> f64 {
    VGrooveSpec::default().half_width
}
fn default_groove_angle() -> f64 {
    VGrooveSpec::default().wall_angle
}
fn default_groove_flange() -> f64 {
    VGrooveSpec::default().flange_width
}
fn default_groove_material() -> MaterialConfig {
    MaterialConfig {
        albedo: [0.6, 0.6, 0.6],
        specular_weight: 0.8,
        roughness: 0.1,
    }
}

impl ObjectConfig {
    pub fn mesh(&self, base_dir: &Path) -> Result<TriMesh> {
        Ok(match self {
            ObjectConfig::Plane {
                center,
                normal,
                u_axis,
                width,
                height,
                material,
            } => {
                if !(*width > 0.0 && *height > 0.0) || v3(*normal).norm() == 0.0 {
                    return Err(CliError::Config("plane needs positive size and a normal".into()));
                }
                plane_quad(&v3(*center), &v3(*normal), &v3(*u_axis), *width, *height, material.material()?)
            }
            ObjectConfig::Sphere {
                center,
                radius,
                subdivisions,
                smooth,
                material,
            } => {
                if !(*radius > 0.0) || *subdivisions > 6 {
                    return Err(CliError::Config("sphere needs radius > 0 and at most 6 subdivisions".into()));
                }
                let shading = if *smooth { Shading::Smooth } else { Shading::Flat };
                icosphere(&v3(*center), *radius, *subdivisions, shading, material.material()?)
            }
            ObjectConfig::VGroove {
                length,
                half_width,
                wall_angle,
                flange_width,
                material,
                pose,
            } => {
                if !(*length > 0.0 && *half_width > 0.0 && *flange_width >= 0.0)
                    || !(*wall_angle > 0.0 && *wall_angle < std::f64::consts::FRAC_PI_2)
                {
                    return Err(CliError::Config("v_groove dimensions out of range".into()));
                }
                v_groove(&VGrooveSpec {
                    length: *length,
                    half_width: *half_width,
                    wall_angle: *wall_angle,
                    flange_width: *flange_width,
                    material: material.material()?,
                    pose: pose.to_pose(),
                })
            }
            ObjectConfig::Checkerboard { board, pose } => {
                checkerboard_scene(&board.spec()?, &pose.to_pose())
                    .map_err(|e| CliError::Config(e.to_string()))?
                    .0
            }
            ObjectConfig::Mesh {
                path,
                smooth,
                material,
                pose,
            } => {
                let full = base_dir.join(path);
                let text = read_text(&full)?;
                let shading = if *smooth { Shading::Smooth } else { Shading::Flat };
                read_off(&text, material.material()?, shading)
                    .map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?
                    .transformed(&pose.to_pose())
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightConfig {
    pub position: [f64; 3],
    pub intensity: f64,
    #[serde(default = "white")]
    pub color: [f64; 3],
}

fn white() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub ambient: f64,
    pub background: [f64; 3],
    pub lights: Vec<LightConfig>,
    pub objects: Vec<ObjectConfig>,
}

impl Default for SceneConfig {
    /// A grey Lambertian wall 1 m in front of the camera.
    fn default() -> Self {
        Self {
            ambient: 0.2,
            background: [0.0; 3],
            lights: Vec::new(),
            objects: vec![ObjectConfig::Plane {
                center: [0.0, 0.0, 1.0],
                normal: [0.0, 0.0, -1.0],
                u_axis: default_u_axis(),
                width: 2.0,
                height: 2.0,
                material: MaterialConfig::default(),
            }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassName {
    Rgb,
    Depth,
    Normals,
    Mask,
}

impl PassName {
    pub fn parse_list(s: &str) -> Result<Vec<PassName>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| match p.trim() {
                "rgb" => Ok(PassName::Rgb),
                "depth" => Ok(PassName::Depth),
                "normals" => Ok(PassName::Normals),
                "mask" => Ok(PassName::Mask),
                other => Err(CliError::Config(format!("unknown pass '{other}'"))),
            })
            .collect()
    }

    pub fn to_passes(list: &[PassName]) -> Passes {
        Passes {
            rgb: list.contains(&PassName::Rgb),
            depth: list.contains(&PassName::Depth),
            normals: list.contains(&PassName::Normals),
            mask: list.contains(&PassName::Mask),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub spp: u32,
    pub seed: u64,
    pub exposure: f64,
    pub specular_bounce: bool,
    pub passes: Vec<PassName>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            spp: 16,
            seed: 0,
            exposure: DEFAULT_EXPOSURE,
            specular_bounce: true,
            passes: vec![PassName::Rgb, PassName::Depth, PassName::Normals, PassName::Mask],
        }
    }
}

impl RenderConfig {
    pub fn settings(&self) -> Result<RenderSettings> {
        if self.spp == 0 {
            return Err(CliError::Config("render.spp must be at least 1".into()));
        }
        if !(self.exposure > 0.0 && self.exposure.is_finite()) {
            return Err(CliError::Config("render.exposure must be positive".into()));
        }
        Ok(RenderSettings {
            passes: PassName::to_passes(&self.passes),
            spp: self.spp,
            seed: self.seed,
            exposure: self.exposure,
            specular_bounce: self.specular_bounce,
        })
    }
}

/// Rig motion between frames: frame `i` is displaced by `i * step` along
/// `axis` (world frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: [f64; 3],
    pub step: f64,
    pub count: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: [1.0, 0.0, 0.0],
            step: 0.005,
            count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub png: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, png: true }
    }
}

/// Complete description of a scan: scene, rig, rendering and sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    /// Free text, ignored.
    pub notes: Option<String>,
    pub camera: CameraConfig,
    pub laser: LaserConfig,
    pub scene: SceneConfig,
    pub render: RenderConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScanConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: ScanConfig = crate::parse_json(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.intrinsics()?;
        self.camera.pose_cw()?;
        self.laser.model()?;
        self.render.settings()?;
        if self.sweep.count == 0 {
            return Err(CliError::Config("sweep.count must be at least 1".into()));
        }
        if v3(self.sweep.axis).norm() == 0.0 && self.sweep.count > 1 {
            return Err(CliError::Config("sweep.axis must be non-zero".into()));
        }
        Ok(())
    }

    /// Camera-to-world pose of the rig at `frame`.
    pub fn rig_pose_wc(&self, frame: usize) -> Result<Pose> {
        let wc0 = self.camera.pose_cw()?.inverse();
        let axis = v3(self.sweep.axis);
        let shift = if axis.norm() > 0.0 {
            axis.normalize() * (self.sweep.step * frame as f64)
        } else {
            Vec3::zeros()
        };
        Ok(Pose::from_translation(shift).compose(&wc0))
    }

    pub fn meshes(&self) -> Result<Vec<TriMesh>> {
        self.scene.objects.iter().map(|o| o.mesh(&self.base_dir)).collect()
    }

    /// Scene for one frame of the sweep, reusing already built meshes.
    pub fn scene_for_frame(&self, meshes: &[TriMesh], frame: usize) -> Result<Scene> {
        let wc = self.rig_pose_wc(frame)?;
        let mut rig = self.camera.rig()?;
        rig.pose_cw = wc.inverse();
        let laser_cam = self.laser.model()?;
        let laser = laser_cam.with_pose(wc.compose(&self.laser.pose_in_camera()));
        let mut scene = Scene::new(rig, laser);
        scene.meshes = meshes.to_vec();
        scene.ambient = self.scene.ambient;
        scene.background = self.scene.background;
        scene.point_lights = self
            .scene
            .lights
            .iter()
            .map(|l| PointLight {
                position: v3(l.position),
                intensity: l.intensity,
                color: l.color,
            })
            .collect();
        Ok(scene)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ScanConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ScanConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_reports_location() {
        let text = "{\n  \"camera\": {\n    \"fx\": 1000.0,\n    \"focal\": 3\n  }\n}";
        let err = crate::parse_json::<ScanConfig>(text, "cfg").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("focal") && msg.contains("line 4"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn sweep_moves_rig() {
        let mut cfg = ScanConfig::default();
        cfg.sweep = SweepConfig {
            axis: [2.0, 0.0, 0.0],
            step: 0.005,
            count: 3,
        };
        let p = cfg.rig_pose_wc(2).unwrap();
        assert!((p.translation - Vec3::new(0.01, 0.0, 0.0)).norm() < 1e-15);
        let meshes = cfg.meshes().unwrap();
        let scene = cfg.scene_for_frame(&meshes, 2).unwrap();
        assert!((scene.laser.origin() - Vec3::new(0.21, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn objects_parse() {
        let text = r#"{"scene": {"objects": [
            {"type": "sphere", "center": [0, 0, 1], "radius": 0.1},
            {"type": "v_groove", "pose": {"translation": [0, 0, 0.9]}},
            {"type": "checkerboard", "inner_cols": 4, "inner_rows": 3, "square_size": 0.02,
             "sheet_w": 0.2, "sheet_h": 0.2, "saturation": 1.0}
        ]}}"#;
        let cfg: ScanConfig = crate::parse_json(text, "cfg").unwrap();
        assert_eq!(cfg.meshes().unwrap().len(), 3);
    }
}
