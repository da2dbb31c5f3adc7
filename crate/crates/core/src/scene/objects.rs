//! Procedural test objects.

use std::collections::HashMap;

use crate::geom::{Pose, Vec3};

use super::{Material, Shading, TriMesh};

/// Rectangle centred at `center` whose face normal is `normal`; `u_axis`
/// fixes the in-plane orientation of the `width` side.
pub fn plane_quad(
    center: &Vec3,
    normal: &Vec3,
    u_axis: &Vec3,
    width: f64,
    height: f64,
    material: Material,
) -> TriMesh {
    let n = normal.normalize();
    let u = (u_axis - n * u_axis.dot(&n)).normalize();
    let v = n.cross(&u);
    let (hu, hv) = (u * (width / 2.0), v * (height / 2.0));
    let vertices = vec![
        center - hu - hv,
        center + hu - hv,
        center + hu + hv,
        center - hu + hv,
    ];
    let uvs = vec![
        [-width / 2.0, -height / 2.0],
        [width / 2.0, -height / 2.0],
        [width / 2.0, height / 2.0],
        [-width / 2.0, height / 2.0],
    ];
    TriMesh::with_materials(
        vertices,
        vec![[0, 1, 2], [0, 2, 3]],
        vec![0, 0],
        vec![material],
        Some(uvs),
        Shading::Flat,
    )
    .expect("quad with positive extent is valid")
}

/// Geodesic sphere from a subdivided icosahedron, outward winding.
pub fn icosphere(
    center: &Vec3,
    radius: f64,
    subdivisions: usize,
    shading: Shading,
    material: Material,
) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.iter().map(|v| center + v * radius).collect();
    TriMesh::new(vertices, faces, material, shading).expect("icosphere is well formed")
}

/// Open V-shaped groove with flat flanges on both sides, a stand-in for a
/// single-bevel weld joint. In the local frame the groove runs along x, the
/// flanges lie in `z = 0` and the groove bottom is at `y = 0`, `z = depth`,
/// so the opening faces `-z`.
#[derive(Debug, Clone, PartialEq)]
pub struct VGrooveSpec {
    pub length: f64,
    /// Half of the opening width at the flange level.
    pub half_width: f64,
    /// Wall inclination from the flange plane, radians.
    pub wall_angle: f64,
    pub flange_width: f64,
    pub material: Material,
    pub pose: Pose,
}

impl Default for VGrooveSpec {
    fn default() -> Self {
        Self {
            length: 0.2,
            half_width: 0.02,
            wall_angle: 60f64.to_radians(),
            flange_width: 0.04,
            material: Material {
                albedo: super::Albedo::Constant([0.6, 0.6, 0.6]),
                specular_weight: 0.8,
                roughness: 0.1,
            },
            pose: Pose::identity(),
        }
    }
}

impl VGrooveSpec {
    pub fn depth(&self) -> f64 {
        self.half_width * self.wall_angle.tan()
    }
}

pub fn v_groove(spec: &VGrooveSpec) -> TriMesh {
    let hl = spec.length / 2.0;
    let w = spec.half_width;
    let f = spec.flange_width;
    let profile = [
        (-w - f, 0.0),
        (-w, 0.0),
        (0.0, spec.depth()),
        (w, 0.0),
        (w + f, 0.0),
    ];
    let mut vertices = Vec::new();
    for &(y, z) in &profile {
        vertices.push(spec.pose.transform_point(&Vec3::new(-hl, y, z)));
        vertices.push(spec.pose.transform_point(&Vec3::new(hl, y, z)));
    }
    let mut tris = Vec::new();
    for k in 0..profile.len() - 1 {
        let (a0, a1, b0, b1) = (2 * k, 2 * k + 1, 2 * k + 2, 2 * k + 3);
        // Winding chosen so the face normals point out of the opening (-z).
        tris.push([a0, b1, a1]);
        tris.push([a0, b0, b1]);
    }
    TriMesh::new(vertices, tris, spec.material.clone(), Shading::Flat)
        .expect("groove with positive dimensions is valid")
}
