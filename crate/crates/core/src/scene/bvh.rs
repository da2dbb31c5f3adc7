use crate::geom::{Line3, Vec3};

use super::{Material, Shading, TriMesh};

/// Hits closer than this along the ray (in units of the ray direction) are
/// ignored, so secondary rays do not re-hit their own surface.
pub const T_MIN: f64 = 1e-6;

const LEAF_SIZE: usize = 4;
const BINS: usize = 12;

#[derive(Debug, Clone)]
struct Triangle {
    v: [Vec3; 3],
    mesh: usize,
    local: usize,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    fn area(&self) -> f64 {
        let d = self.max - self.min;
        if d.x < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    fn padded(mut self) -> Self {
        let pad = (self.max - self.min).amax() * 1e-7 + 1e-9;
        self.min.add_scalar_mut(-pad);
        self.max.add_scalar_mut(pad);
        self
    }

    /// Entry distance of the ray into the box, if it enters before `t_max`.
    fn hit(&self, org: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - org[k]) * inv_dir[k];
            let b = (self.max[k] - org[k]) * inv_dir[k];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // NaN (0 * inf) means the ray is parallel and on the slab plane;
            // treat it as inside.
            if !lo.is_nan() {
                t0 = t0.max(lo);
            }
            if !hi.is_nan() {
                t1 = t1.min(hi);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        bounds: Aabb,
        start: usize,
        count: usize,
    },
    Inner {
        bounds: Aabb,
        left: usize,
        right: usize,
    },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Bounding volume hierarchy over every triangle of a mesh set. Triangles
/// are numbered globally in mesh order; that number breaks exact ties.
#[derive(Debug, Clone)]
pub struct Accel {
    meshes: Vec<TriMesh>,
    tris: Vec<Triangle>,
    /// Triangle ids in leaf order.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub struct Hit<'a> {
    pub t: f64,
    pub point: Vec3,
    /// Winding-order face normal, unit length.
    pub geometric_normal: Vec3,
    pub shading_normal: Vec3,
    pub uv: Option<[f64; 2]>,
    pub material: &'a Material,
    pub mesh: usize,
    /// Global triangle index.
    pub triangle: usize,
}

impl<'a> Hit<'a> {
    /// Geometric normal flipped to face against `dir`.
    pub fn facing_normal(&self, dir: &Vec3) -> Vec3 {
        if self.geometric_normal.dot(dir) > 0.0 {
            -self.geometric_normal
        } else {
            self.geometric_normal
        }
    }

    /// Shading normal on the same side as [`Hit::facing_normal`].
    pub fn facing_shading_normal(&self, dir: &Vec3) -> Vec3 {
        if self.geometric_normal.dot(dir) > 0.0 {
            -self.shading_normal
        } else {
            self.shading_normal
        }
    }
}

/// Fixed-capacity traversal stack; avoids a heap allocation per ray.
struct NodeStack {
    items: [usize; 128],
    len: usize,
}

impl NodeStack {
    fn new() -> Self {
        Self {
            items: [0; 128],
            len: 0,
        }
    }

    fn push(&mut self, v: usize) {
        self.items[self.len] = v;
        self.len += 1;
    }

    fn pop(&mut self) -> Option<usize> {
        if self.len == 0 {
            return None;
        }
        self.len -= 1;
        Some(self.items[self.len])
    }
}

/// Precomputed ray data for the watertight ray/triangle test.
struct RayPrep {
    org: Vec3,
    inv_dir: Vec3,
    k: [usize; 3],
    shear: Vec3,
}

impl RayPrep {
    fn new(ray: &Line3) -> Self {
        let d = ray.dir;
        let kz = d.iamax();
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if d[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self {
            org: ray.origin,
            inv_dir: Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z),
            k: [kx, ky, kz],
            shear: Vec3::new(d[kx] / d[kz], d[ky] / d[kz], 1.0 / d[kz]),
        }
    }

    /// Returns `(t, barycentrics)` for a hit with `T_MIN < t < t_max`.
    /// Edges and vertices count as inside, so adjacent triangles leave no gaps.
    fn intersect(&self, tri: &Triangle, t_max: f64) -> Option<(f64, [f64; 3])> {
        let [kx, ky, kz] = self.k;
        let s = &self.shear;
        let a = tri.v[0] - self.org;
        let b = tri.v[1] - self.org;
        let c = tri.v[2] - self.org;
        let ax = a[kx] - s.x * a[kz];
        let ay = a[ky] - s.y * a[kz];
        let bx = b[kx] - s.x * b[kz];
        let by = b[ky] - s.y * b[kz];
        let cx = c[kx] - s.x * c[kz];
        let cy = c[ky] - s.y * c[kz];
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let az = s.z * a[kz];
        let bz = s.z * b[kz];
        let cz = s.z * c[kz];
        let t = (u * az + v * bz + w * cz) / det;
        if !(t > T_MIN && t < t_max) {
            return None;
        }
        Some((t, [u / det, v / det, w / det]))
    }
}

pub fn build_accel(meshes: &[TriMesh]) -> Accel {
    let mut tris = Vec::new();
    for (mi, mesh) in meshes.iter().enumerate() {
        for (ti, t) in mesh.triangles.iter().enumerate() {
            tris.push(Triangle {
                v: t.map(|i| mesh.vertices[i]),
                mesh: mi,
                local: ti,
            });
        }
    }
    let mut accel = Accel {
        meshes: meshes.to_vec(),
        order: (0..tris.len()).collect(),
        tris,
        nodes: Vec::new(),
    };
    if !accel.tris.is_empty() {
        let centroids: Vec<Vec3> = accel
            .tris
            .iter()
            .map(|t| (t.v[0] + t.v[1] + t.v[2]) / 3.0)
            .collect();
        let n = accel.tris.len();
        accel.build_node(&centroids, 0, n);
    }
    accel
}

impl Accel {
    fn build_node(&mut self, centroids: &[Vec3], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &i in &self.order[start..end] {
            for v in &self.tris[i].v {
                bounds.grow(v);
            }
            cbounds.grow(&centroids[i]);
        }
        let bounds = bounds.padded();
        let idx = self.nodes.len();
        let count = end - start;
        let extent = cbounds.max - cbounds.min;
        let axis = extent.imax();
        if count <= LEAF_SIZE || extent[axis] <= 0.0 {
            self.nodes.push(Node::Leaf {
                bounds,
                start,
                count,
            });
            return idx;
        }
        let mid = self.partition(centroids, start, end, &bounds, &cbounds);
        // Placeholder, patched once the children exist.
        self.nodes.push(Node::Leaf {
            bounds,
            start: 0,
            count: 0,
        });
        let left = self.build_node(centroids, start, mid);
        let right = self.build_node(centroids, mid, end);
        self.nodes[idx] = Node::Inner {
            bounds,
            left,
            right,
        };
        idx
    }

    /// Binned surface-area split; falls back to the median along the widest
    /// centroid axis when no bin boundary separates the triangles.
    fn partition(&mut self, centroids: &[Vec3], start: usize, end: usize, bounds: &Aabb, cbounds: &Aabb) -> usize {
        let count = end - start;
        let mut best: Option<(f64, usize, f64)> = None;
        for axis in 0..3 {
            let lo = cbounds.min[axis];
            let ext = cbounds.max[axis] - lo;
            if ext <= 0.0 {
                continue;
            }
            let bin_of = |c: f64| (((c - lo) / ext * BINS as f64) as usize).min(BINS - 1);
            let mut boxes = [Aabb::empty(); BINS];
            let mut counts = [0usize; BINS];
            for &i in &self.order[start..end] {
                let b = bin_of(centroids[i][axis]);
                counts[b] += 1;
                for v in &self.tris[i].v {
                    boxes[b].grow(v);
                }
            }
            let mut right_area = [0.0; BINS];
            let mut acc = Aabb::empty();
            for b in (1..BINS).rev() {
                acc = acc.union(&boxes[b]);
                right_area[b] = acc.area();
            }
            let (mut left, mut n_left) = (Aabb::empty(), 0);
            for b in 1..BINS {
                left = left.union(&boxes[b - 1]);
                n_left += counts[b - 1];
                let n_right = count - n_left;
                if n_left == 0 || n_right == 0 {
                    continue;
                }
                let cost = left.area() * n_left as f64 + right_area[b] * n_right as f64;
                if best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, axis, lo + ext * b as f64 / BINS as f64));
                }
            }
        }
        let leaf_cost = bounds.area() * count as f64;
        match best {
            Some((cost, axis, split)) if cost < leaf_cost => {
                let slice = &mut self.order[start..end];
                slice.sort_unstable();
                let mut k = 0;
                for j in 0..slice.len() {
                    if centroids[slice[j]][axis] < split {
                        slice.swap(j, k);
                        k += 1;
                    }
                }
                if k > 0 && k < count {
                    return start + k;
                }
                self.median(centroids, start, end, cbounds)
            }
            _ => self.median(centroids, start, end, cbounds),
        }
    }

    fn median(&mut self, centroids: &[Vec3], start: usize, end: usize, cbounds: &Aabb) -> usize {
        let axis = (cbounds.max - cbounds.min).imax();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis]
                .total_cmp(&centroids[b][axis])
                .then(a.cmp(&b))
        });
        mid
    }

    pub fn meshes(&self) -> &[TriMesh] {
        &self.meshes
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Nearest hit with `t > T_MIN`; exact ties go to the lowest triangle index.
    pub fn intersect(&self, ray: &Line3) -> Option<Hit<'_>> {
        self.intersect_within(ray, f64::INFINITY)
    }

    pub fn intersect_within(&self, ray: &Line3, t_max: f64) -> Option<Hit<'_>> {
        if self.nodes.is_empty() {
            return None;
        }
        let prep = RayPrep::new(ray);
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        let mut best_t = t_max;
        let mut stack = NodeStack::new();
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            match node.bounds().hit(&prep.org, &prep.inv_dir, best_t) {
                Some(_) => {}
                None => continue,
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for &ti in &self.order[start..start + count] {
                        // Admit t == best_t so that ties can be resolved by index.
                        let limit = if best.is_some() {
                            best_t * (1.0 + f64::EPSILON) + f64::MIN_POSITIVE
                        } else {
                            best_t
                        };
                        if let Some((t, bary)) = prep.intersect(&self.tris[ti], limit) {
                            let better = match best {
                                None => true,
                                Some((bt, bi, _)) => t < bt || (t == bt && ti < bi),
                            };
                            if better {
                                best = Some((t, ti, bary));
                                best_t = t;
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let tl = self.nodes[left].bounds().hit(&prep.org, &prep.inv_dir, best_t);
                    let tr = self.nodes[right].bounds().hit(&prep.org, &prep.inv_dir, best_t);
                    match (tl, tr) {
                        (Some(a), Some(b)) => {
                            if a <= b {
                                stack.push(right);
                                stack.push(left);
                            } else {
                                stack.push(left);
                                stack.push(right);
                            }
                        }
                        (Some(_), None) => stack.push(left),
                        (None, Some(_)) => stack.push(right),
                        (None, None) => {}
                    }
                }
            }
        }
        best.map(|(t, ti, bary)| self.make_hit(ray, t, ti, bary))
    }

    /// True when anything blocks the segment `origin + t dir`, `t` in
    /// `(T_MIN, t_max)`.
    pub fn occluded(&self, ray: &Line3, t_max: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let prep = RayPrep::new(ray);
        let mut stack = NodeStack::new();
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds().hit(&prep.org, &prep.inv_dir, t_max).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    if self.order[start..start + count]
                        .iter()
                        .any(|&ti| prep.intersect(&self.tris[ti], t_max).is_some())
                    {
                        return true;
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        false
    }

    /// Intersects a single triangle by global index.
    pub fn intersect_triangle(&self, ray: &Line3, triangle: usize, t_max: f64) -> Option<Hit<'_>> {
        let prep = RayPrep::new(ray);
        prep.intersect(&self.tris[triangle], t_max)
            .map(|(t, bary)| self.make_hit(ray, t, triangle, bary))
    }

    /// Global triangle indices whose material has a nonzero specular weight.
    pub fn specular_triangles(&self) -> Vec<usize> {
        (0..self.tris.len())
            .filter(|&i| self.material_of(i).specular_weight > 0.0)
            .collect()
    }

    pub fn triangle_vertices(&self, triangle: usize) -> [Vec3; 3] {
        self.tris[triangle].v
    }

    pub fn material_of(&self, triangle: usize) -> &Material {
        let t = &self.tris[triangle];
        let mesh = &self.meshes[t.mesh];
        &mesh.materials[mesh.material_ids[t.local]]
    }

    fn make_hit(&self, ray: &Line3, t: f64, ti: usize, bary: [f64; 3]) -> Hit<'_> {
        let tri = &self.tris[ti];
        let mesh = &self.meshes[tri.mesh];
        let idx = mesh.triangles[tri.local];
        let gn = (tri.v[1] - tri.v[0]).cross(&(tri.v[2] - tri.v[0])).normalize();
        let sn = match mesh.shading {
            Shading::Flat => gn,
            Shading::Smooth => {
                let vn = mesh.vertex_normals();
                let n = vn[idx[0]] * bary[0] + vn[idx[1]] * bary[1] + vn[idx[2]] * bary[2];
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    gn
                }
            }
        };
        let uv = mesh.uvs.as_ref().map(|uvs| {
            let [a, b, c] = idx.map(|i| uvs[i]);
            [
                a[0] * bary[0] + b[0] * bary[1] + c[0] * bary[2],
                a[1] * bary[0] + b[1] * bary[1] + c[1] * bary[2],
            ]
        });
        Hit {
            t,
            point: ray.at(t),
            geometric_normal: gn,
            shading_normal: sn,
            uv,
            material: &mesh.materials[mesh.material_ids[tri.local]],
            mesh: tri.mesh,
            triangle: ti,
        }
    }
}

/// Reference query that tests every triangle; same tie-break as [`Accel`].
pub fn intersect_brute_force<'a>(accel: &'a Accel, ray: &Line3) -> Option<Hit<'a>> {
    let prep = RayPrep::new(ray);
    let mut best: Option<(f64, usize, [f64; 3])> = None;
    for (ti, tri) in accel.tris.iter().enumerate() {
        if let Some((t, bary)) = prep.intersect(tri, f64::INFINITY) {
            if best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, ti, bary));
            }
        }
    }
    best.map(|(t, ti, bary)| accel.make_hit(ray, t, ti, bary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use crate::scene::{icosphere, plane_quad, Material, Shading, TriMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ray(o: Vec3, d: Vec3) -> Line3 {
        Line3::new(o, d).unwrap()
    }

    #[test]
    fn unit_quad_ahead() {
        let quad = plane_quad(
            &Vec3::new(0.0, 0.0, 2.0),
            &Vec3::new(0.0, 0.0, -1.0),
            &Vec3::x(),
            1.0,
            1.0,
            Material::default(),
        );
        let accel = build_accel(&[quad]);
        let hit = accel.intersect(&ray(Vec3::zeros(), Vec3::z())).unwrap();
        assert_eq!(hit.t, 2.0);
        assert_eq!(hit.geometric_normal, Vec3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn empty_scene_misses() {
        let accel = build_accel(&[]);
        assert!(accel.intersect(&ray(Vec3::zeros(), Vec3::z())).is_none());
        assert!(!accel.occluded(&ray(Vec3::zeros(), Vec3::z()), 10.0));
    }

    #[test]
    fn single_triangle_matches_direct_test() {
        let mesh = TriMesh::new(
            vec![
                Vec3::new(-1.0, -1.0, 3.0),
                Vec3::new(1.0, -1.0, 3.0),
                Vec3::new(0.0, 1.0, 3.0),
            ],
            vec![[0, 1, 2]],
            Material::default(),
            Shading::Flat,
        )
        .unwrap();
        let accel = build_accel(&[mesh]);
        let r = ray(Vec3::new(0.1, 0.2, 0.0), Vec3::new(0.01, -0.02, 1.0));
        let a = accel.intersect(&r).unwrap();
        let b = accel.intersect_triangle(&r, 0, f64::INFINITY).unwrap();
        assert_eq!(a.t, b.t);
    }

    #[test]
    fn shared_edge_has_exactly_one_hit() {
        // Two triangles sharing the diagonal x == y of a unit square at z = 1.
        let mesh = TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 1.0),
                Vec3::new(1.0, 0.0, 1.0),
                Vec3::new(1.0, 1.0, 1.0),
                Vec3::new(0.0, 1.0, 1.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
            Material::default(),
            Shading::Flat,
        )
        .unwrap();
        let accel = build_accel(&[mesh]);
        for &p in &[0.25, 0.5, 0.8125] {
            let r = ray(Vec3::new(p, p, 0.0), Vec3::z());
            let hit = accel.intersect(&r).expect("edge ray must hit");
            assert_eq!(hit.triangle, 0);
            let prep = RayPrep::new(&r);
            let n = accel
                .tris
                .iter()
                .filter(|t| prep.intersect(t, f64::INFINITY).is_some())
                .count();
            assert!(n >= 1);
        }
    }

    #[test]
    fn bvh_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for i in 0..500 {
            let c = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            for _ in 0..3 {
                verts.push(
                    c + Vec3::new(
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                    ),
                );
            }
            tris.push([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        let mesh = TriMesh::new(verts, tris, Material::default(), Shading::Flat).unwrap();
        let accel = build_accel(&[mesh]);
        let mut hits = 0;
        for _ in 0..10_000 {
            let o = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let target = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = ray(o, target - o);
            let a = accel.intersect(&r);
            let b = intersect_brute_force(&accel, &r);
            match (a, b) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(a.t, b.t);
                    assert_eq!(a.triangle, b.triangle);
                    hits += 1;
                }
                (a, b) => panic!("mismatch {:?} vs {:?}", a.map(|h| h.t), b.map(|h| h.t)),
            }
        }
        assert!(hits > 1000);
    }

    #[test]
    fn rigid_motion_preserves_t() {
        let sphere = icosphere(&Vec3::new(0.1, -0.2, 2.0), 0.5, 2, Shading::Flat, Material::default());
        let pose = Pose::from_rotation_vector(&Vec3::new(0.3, -0.5, 0.9), Vec3::new(1.0, 2.0, -3.0));
        let a = build_accel(std::slice::from_ref(&sphere));
        let b = build_accel(&[sphere.transformed(&pose)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let o = Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 0.0);
            let d = Vec3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), 1.0);
            let ha = a.intersect(&ray(o, d)).map(|h| h.t);
            let hb = b
                .intersect(&ray(pose.transform_point(&o), pose.transform_vector(&d)))
                .map(|h| h.t);
            match (ha, hb) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
                (None, None) => {}
                _ => panic!("hit/miss mismatch"),
            }
        }
    }

    #[test]
    fn rays_from_inside_icosphere_always_hit() {
        for shading in [Shading::Flat, Shading::Smooth] {
            let sphere = icosphere(&Vec3::zeros(), 1.0, 3, shading, Material::default());
            let accel = build_accel(&[sphere]);
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            for _ in 0..10_000 {
                let o = Vec3::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                );
                let d = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                if d.norm() < 1e-6 {
                    continue;
                }
                assert!(accel.intersect(&ray(o, d)).is_some());
            }
        }
    }

    #[test]
    fn smooth_normals_differ_from_face_normals() {
        let sphere = icosphere(&Vec3::zeros(), 1.0, 1, Shading::Smooth, Material::default());
        let accel = build_accel(&[sphere]);
        let hit = accel
            .intersect(&ray(Vec3::new(0.0, 0.0, -3.0), Vec3::new(0.11, 0.07, 1.0)))
            .unwrap();
        assert!((hit.shading_normal.norm() - 1.0).abs() < 1e-12);
        assert!((hit.shading_normal - hit.geometric_normal).norm() > 1e-4);
    }
}
