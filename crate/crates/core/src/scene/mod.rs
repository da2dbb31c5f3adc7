//! Scene description: triangle meshes, materials, lights, the laser and the
//! camera, plus ray queries through a bounding volume hierarchy.

mod bvh;
mod checkerboard;
mod objects;
mod off;

pub use bvh::{build_accel, intersect_brute_force, Accel, Hit};
pub use checkerboard::{checkerboard_scene, CheckerTexture, CheckerboardSpec};
pub use objects::{icosphere, plane_quad, v_groove, VGrooveSpec};
pub use off::{read_off, write_off};

use thiserror::Error;

use crate::camera::CameraRig;
use crate::geom::{Pose, Vec3};
use crate::laser::LaserModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("triangle {tri} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        tri: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("triangle {tri} uses material {id} but only {count} are defined")]
    MaterialOutOfRange { tri: usize, id: usize, count: usize },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid checkerboard: {0}")]
    InvalidCheckerboard(String),
    #[error("mesh parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Albedo {
    Constant([f64; 3]),
    /// Procedural checkerboard evaluated at the mesh's texture coordinates.
    Checker(CheckerTexture),
}

impl Albedo {
    pub fn eval(&self, uv: Option<[f64; 2]>) -> [f64; 3] {
        match self {
            Albedo::Constant(c) => *c,
            Albedo::Checker(tex) => {
                let v = uv.map_or(tex.white, |uv| tex.eval(uv[0], uv[1]));
                [v, v, v]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub albedo: Albedo,
    pub specular_weight: f64,
    pub roughness: f64,
}

impl Material {
    pub fn diffuse(rgb: [f64; 3]) -> Self {
        Self {
            albedo: Albedo::Constant(rgb),
            specular_weight: 0.0,
            roughness: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.specular_weight) || !unit(self.roughness) {
            return Err(SceneError::InvalidMaterial(format!(
                "specular weight {} and roughness {} must lie in [0, 1]",
                self.specular_weight, self.roughness
            )));
        }
        if let Albedo::Constant(c) = &self.albedo {
            if !c.iter().all(|v| unit(*v)) {
                return Err(SceneError::InvalidMaterial(format!(
                    "albedo {c:?} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

impl Default for Material {
    fn default() -> Self {
        Self::diffuse([0.8, 0.8, 0.8])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shading {
    Flat,
    /// Shading normals interpolated from per-vertex normals.
    Smooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub material_ids: Vec<usize>,
    pub materials: Vec<Material>,
    pub uvs: Option<Vec<[f64; 2]>>,
    pub shading: Shading,
    vertex_normals: Vec<Vec3>,
}

const MIN_TRIANGLE_AREA: f64 = 1e-12;

impl TriMesh {
    /// Single-material mesh.
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        material: Material,
        shading: Shading,
    ) -> Result<Self, SceneError> {
        let ids = vec![0; triangles.len()];
        Self::with_materials(vertices, triangles, ids, vec![material], None, shading)
    }

    pub fn with_materials(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
        material_ids: Vec<usize>,
        materials: Vec<Material>,
        uvs: Option<Vec<[f64; 2]>>,
        shading: Shading,
    ) -> Result<Self, SceneError> {
        if material_ids.len() != triangles.len() {
            return Err(SceneError::Invalid(format!(
                "{} material ids for {} triangles",
                material_ids.len(),
                triangles.len()
            )));
        }
        if let Some(uvs) = &uvs {
            if uvs.len() != vertices.len() {
                return Err(SceneError::Invalid(format!(
                    "{} texture coordinates for {} vertices",
                    uvs.len(),
                    vertices.len()
                )));
            }
        }
        for m in &materials {
            m.validate()?;
        }
        for (tri, (idx, &mat)) in triangles.iter().zip(&material_ids).enumerate() {
            for &index in idx {
                if index >= vertices.len() {
                    return Err(SceneError::IndexOutOfRange {
                        tri,
                        index,
                        count: vertices.len(),
                    });
                }
            }
            if mat >= materials.len() {
                return Err(SceneError::MaterialOutOfRange {
                    tri,
                    id: mat,
                    count: materials.len(),
                });
            }
            let [a, b, c] = idx.map(|i| vertices[i]);
            if !(0.5 * (b - a).cross(&(c - a)).norm() > MIN_TRIANGLE_AREA) {
                return Err(SceneError::DegenerateTriangle(tri));
            }
        }
        let mut mesh = Self {
            vertices,
            triangles,
            material_ids,
            materials,
            uvs,
            shading,
            vertex_normals: Vec::new(),
        };
        mesh.compute_vertex_normals();
        Ok(mesh)
    }

    fn compute_vertex_normals(&mut self) {
        let mut normals = vec![Vec3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            // Area weighted.
            let n = (b - a).cross(&(c - a));
            for &i in t {
                normals[i] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        self.vertex_normals = normals;
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.triangles[tri].map(|i| self.vertices[i]);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v = pose.transform_point(v);
        }
        for n in &mut out.vertex_normals {
            *n = pose.transform_vector(n);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLight {
    pub position: Vec3,
    pub intensity: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub meshes: Vec<TriMesh>,
    pub ambient: f64,
    pub point_lights: Vec<PointLight>,
    /// Laser in the world frame.
    pub laser: LaserModel,
    pub camera: CameraRig,
    pub background: [f64; 3],
}

impl Scene {
    pub fn new(camera: CameraRig, laser: LaserModel) -> Self {
        Self {
            meshes: Vec::new(),
            ambient: 0.0,
            point_lights: Vec::new(),
            laser,
            camera,
            background: [0.0; 3],
        }
    }

    pub fn with_mesh(mut self, mesh: TriMesh) -> Self {
        self.meshes.push(mesh);
        self
    }
}
