//! Geometric primitives shared by the rest of the crate: points, rigid
//! transforms, lines, planes and the nearest-rotation projection.

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Homogeneous point `(x, y, z, w)`.
pub type HomPoint = Vector4<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("line is parallel to the plane")]
    ParallelLinePlane,
    #[error("line lies inside the plane")]
    LineInPlane,
    #[error("plane normal has zero length")]
    DegeneratePlane,
    #[error("matrix is rank deficient (smallest singular value {0:e})")]
    RankDeficient(f64),
    #[error("not a proper rotation: orthogonality error {orth:e}, det {det}")]
    InvalidRotation { orth: f64, det: f64 },
    #[error("line direction has zero length")]
    DegenerateLine,
}

pub fn homogenize(p: &Vec3) -> HomPoint {
    HomPoint::new(p.x, p.y, p.z, 1.0)
}

/// Returns `None` when `w == 0` (point at infinity).
pub fn dehomogenize(h: &HomPoint) -> Option<Vec3> {
    if h.w == 0.0 {
        return None;
    }
    Some(Vec3::new(h.x / h.w, h.y / h.w, h.z / h.w))
}

/// Rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

const ROTATION_TOL: f64 = 1e-9;

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Checked constructor; rejects anything that is not a proper rotation.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeomError> {
        let orth = (rotation.transpose() * rotation - Mat3::identity()).norm();
        let det = rotation.determinant();
        if !(orth <= ROTATION_TOL && (det - 1.0).abs() <= ROTATION_TOL) {
            return Err(GeomError::InvalidRotation { orth, det });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    /// Rotation about `axis` by `angle` radians, followed by translation `t`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64, t: Vec3) -> Self {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self {
            rotation: *r.matrix(),
            translation: t,
        }
    }

    /// Rotation given as a scaled axis (rotation vector).
    pub fn from_rotation_vector(rv: &Vec3, t: Vec3) -> Self {
        Self {
            rotation: *Rotation3::new(*rv).matrix(),
            translation: t,
        }
    }

    pub fn rotation_vector(&self) -> Vec3 {
        Rotation3::from_matrix_unchecked(self.rotation).scaled_axis()
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Geodesic angle between the two rotations, radians.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let s = Vec3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        )
        .norm()
            / 2.0;
        s.atan2((rel.trace() - 1.0) / 2.0)
    }
}

/// Parametric line `origin + λ dir`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3 {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Line3 {
    pub fn new(origin: Vec3, dir: Vec3) -> Result<Self, GeomError> {
        if !(dir.norm() > 0.0) {
            return Err(GeomError::DegenerateLine);
        }
        Ok(Self { origin, dir })
    }

    pub fn at(&self, lambda: f64) -> Vec3 {
        self.origin + self.dir * lambda
    }
}

/// Plane `a x + b y + c z + d = 0`, stored as the four-vector `(a, b, c, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PlaneParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn from_point_normal(point: &Vec3, normal: &Vec3) -> Self {
        Self::new(normal.x, normal.y, normal.z, -normal.dot(point))
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.a, self.b, self.c, self.d)
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::new(self.a, self.b, self.c)
    }

    /// `a x + b y + c z + d`; a true distance only when the normal is unit.
    pub fn evaluate(&self, p: &Vec3) -> f64 {
        self.a * p.x + self.b * p.y + self.c * p.z + self.d
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.evaluate(p) / self.normal().norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    /// Unit normal, with the sign chosen so that `d <= 0`.
    pub fn normalized(&self) -> Result<Self, GeomError> {
        let n = self.normal().norm();
        if !(n > 0.0) {
            return Err(GeomError::DegeneratePlane);
        }
        let s = if self.d > 0.0 { -1.0 / n } else { 1.0 / n };
        Ok(self.scaled(s))
    }

    /// Point of the plane closest to the origin, `-d n / |n|²`.
    pub fn point_on_plane(&self) -> Result<Vec3, GeomError> {
        let n = self.normal();
        let nn = n.norm_squared();
        if !(nn > 0.0) {
            return Err(GeomError::DegeneratePlane);
        }
        Ok(-self.d * n / nn)
    }

    /// Angle between the two normals, ignoring orientation.
    pub fn normal_angle_to(&self, other: &PlaneParams) -> f64 {
        let a = self.normal().normalize();
        let b = other.normal().normalize();
        let c = a.dot(&b).abs().min(1.0);
        // acos is badly conditioned near 1; use the cross product instead.
        a.cross(&b).norm().atan2(c)
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        let n = pose.transform_vector(&self.normal());
        let p = pose.transform_point(&self.point_on_plane().unwrap_or_else(|_| Vec3::zeros()));
        Self::from_point_normal(&p, &n)
    }
}

/// Line parameter λ of the intersection with `plane`.
pub fn line_plane_parameter(line: &Line3, plane: &PlaneParams) -> Result<f64, GeomError> {
    let n = plane.normal();
    let nn = n.norm();
    if !(nn > 0.0) {
        return Err(GeomError::DegeneratePlane);
    }
    let vn = line.dir.dot(&n);
    if vn.abs() <= 1e-9 * line.dir.norm() * nn {
        let residual = plane.evaluate(&line.origin) / nn;
        if residual.abs() <= 1e-12 {
            return Err(GeomError::LineInPlane);
        }
        return Err(GeomError::ParallelLinePlane);
    }
    let p0 = plane.point_on_plane()?;
    Ok((p0 - line.origin).dot(&n) / vn)
}

pub fn line_plane_intersect(line: &Line3, plane: &PlaneParams) -> Result<Vec3, GeomError> {
    line_plane_parameter(line, plane).map(|lambda| line.at(lambda))
}

pub fn plane_point_from_four_vector(plane: &PlaneParams) -> Result<Vec3, GeomError> {
    plane.point_on_plane()
}

/// Closest proper rotation in Frobenius norm (orthogonal Procrustes).
pub fn nearest_rotation(m: &Mat3) -> Result<Mat3, GeomError> {
    let svd = m.svd(true, true);
    let smin = svd.singular_values.min();
    if !(smin > 1e-12) {
        return Err(GeomError::RankDeficient(smin));
    }
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(GeomError::RankDeficient(smin));
    };
    // nalgebra sorts singular values in decreasing order, so the last
    // column corresponds to the smallest one.
    let det = (u * v_t).determinant();
    let mut d = Mat3::identity();
    if det < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Ok(u * d * v_t)
}

/// Skew-symmetric cross-product matrix.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PHI_GT: [f64; 4] = [0.9744, 0.0, 0.2249, -0.1949];

    fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        *Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).matrix()
    }

    fn random_pose(rng: &mut impl Rng) -> Pose {
        Pose::new(
            random_rotation(rng),
            Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ),
        )
        .unwrap()
    }

    #[test]
    fn dehomogenize_inverts_homogenize() {
        let p = Vec3::new(0.1, -3.5, 7.25);
        assert_eq!(dehomogenize(&homogenize(&p)).unwrap(), p);
        assert!(dehomogenize(&HomPoint::new(1.0, 2.0, 3.0, 0.0)).is_none());
        let h = HomPoint::new(2.0, 4.0, 6.0, 2.0);
        assert_eq!(dehomogenize(&h).unwrap(), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn pose_rejects_reflection() {
        let m = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            Pose::new(m, Vec3::zeros()),
            Err(GeomError::InvalidRotation { .. })
        ));
    }

    #[test]
    fn pose_inverse_and_associativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (a, b, c) = (
                random_pose(&mut rng),
                random_pose(&mut rng),
                random_pose(&mut rng),
            );
            let id = a.compose(&a.inverse());
            assert!((id.rotation - Mat3::identity()).norm() < 1e-9);
            assert!(id.translation.norm() < 1e-9);
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            assert!((left.to_matrix() - right.to_matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn intersect_axis_aligned() {
        let line = Line3::new(Vec3::zeros(), Vec3::z()).unwrap();
        let plane = PlaneParams::new(0.0, 0.0, 1.0, -1.0);
        assert_eq!(
            line_plane_intersect(&line, &plane).unwrap(),
            Vec3::new(0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn intersect_parallel_and_contained() {
        let plane = PlaneParams::new(0.0, 0.0, 1.0, -1.0);
        let line = Line3::new(Vec3::zeros(), Vec3::x()).unwrap();
        assert_eq!(
            line_plane_intersect(&line, &plane),
            Err(GeomError::ParallelLinePlane)
        );
        let inside = Line3::new(Vec3::new(0.0, 0.0, 1.0), Vec3::x()).unwrap();
        assert_eq!(
            line_plane_intersect(&inside, &plane),
            Err(GeomError::LineInPlane)
        );
    }

    #[test]
    fn intersect_matches_linear_solve() {
        // Oracle: solve {plane equation, two line constraints} as a 3x3 system.
        let plane = PlaneParams::new(PHI_GT[0], PHI_GT[1], PHI_GT[2], PHI_GT[3]);
        let k_inv = Matrix3::new(
            1.0 / 3478.3,
            0.0,
            -1224.0 / 3478.3,
            0.0,
            1.0 / 3478.3,
            -1024.0 / 3478.3,
            0.0,
            0.0,
            1.0,
        );
        for &(u, v) in &[(100.0, 1700.0), (1224.0, 1024.0), (2000.5, 13.25)] {
            let dir = (k_inv * Vec3::new(u, v, 1.0)).normalize();
            // For a line through the origin with direction dir, the two
            // constraints are cross(dir, p) components that are independent.
            let (i, j) = if dir.z.abs() > 0.1 { (0, 1) } else { (1, 2) };
            let c = skew(&dir);
            let a = Matrix3::from_rows(&[
                Vec3::new(PHI_GT[0], PHI_GT[1], PHI_GT[2]).transpose(),
                c.row(i).into_owned(),
                c.row(j).into_owned(),
            ]);
            let rhs = Vec3::new(-PHI_GT[3], 0.0, 0.0);
            let expected = a.lu().solve(&rhs).unwrap();
            let line = Line3::new(Vec3::zeros(), dir).unwrap();
            let got = line_plane_intersect(&line, &plane).unwrap();
            assert!((got - expected).norm() < 1e-12, "{got} vs {expected}");
            assert!(plane.evaluate(&got).abs() < 1e-9);
        }
    }

    #[test]
    fn plane_point_examples() {
        let p = PlaneParams::new(0.0, 0.0, 1.0, -1.0);
        assert_eq!(p.point_on_plane().unwrap(), Vec3::new(0.0, 0.0, 1.0));
        let p2 = PlaneParams::new(0.0, 0.0, 2.0, -2.0);
        assert_eq!(p2.point_on_plane().unwrap(), Vec3::new(0.0, 0.0, 1.0));
        let gt = PlaneParams::new(PHI_GT[0], PHI_GT[1], PHI_GT[2], PHI_GT[3]);
        let p0 = gt.point_on_plane().unwrap();
        assert!(gt.evaluate(&p0).abs() < 1e-12);
        assert!(p0.cross(&gt.normal()).norm() < 1e-15);
        assert_eq!(
            PlaneParams::new(0.0, 0.0, 0.0, 1.0).point_on_plane(),
            Err(GeomError::DegeneratePlane)
        );
    }

    #[test]
    fn nearest_rotation_identity_and_reflection() {
        let r = nearest_rotation(&Mat3::identity()).unwrap();
        assert!((r - Mat3::identity()).norm() < 1e-15);
        let r = nearest_rotation(&Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).unwrap();
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!((r.transpose() * r - Mat3::identity()).norm() < 1e-12);
        assert!(matches!(
            nearest_rotation(&Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0))),
            Err(GeomError::RankDeficient(_))
        ));
    }

    #[test]
    fn nearest_rotation_beats_random_rotations() {
        let base = *Rotation3::from_axis_angle(&Vec3::z_axis(), 30f64.to_radians()).matrix();
        let m = base.add_scalar(0.01);
        let r = nearest_rotation(&m).unwrap();
        let best = (r - m).norm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let q = random_rotation(&mut rng);
            assert!(best <= (q - m).norm());
        }
    }

    #[test]
    fn normalized_plane_sign_convention() {
        let p = PlaneParams::new(0.0, 0.0, -2.0, 2.0).normalized().unwrap();
        assert_eq!(p, PlaneParams::new(0.0, 0.0, 1.0, -1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
            (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
        }

        proptest! {
            #[test]
            fn intersection_lies_on_plane(
                o in vec3(2.0), v in vec3(1.0), n in vec3(1.0), d in -2.0..2.0f64,
                sv in 0.1..10.0f64, sp in 0.1..10.0f64,
            ) {
                prop_assume!(v.norm() > 1e-3 && n.norm() > 1e-3);
                prop_assume!(v.normalize().dot(&n.normalize()).abs() > 1e-3);
                let plane = PlaneParams::new(n.x, n.y, n.z, d);
                let line = Line3::new(o, v).unwrap();
                let p = line_plane_intersect(&line, &plane).unwrap();
                prop_assert!(plane.signed_distance(&p).abs() < 1e-9 * (1.0 + p.norm()));
                let q = line_plane_intersect(&Line3::new(o, v * sv).unwrap(), &plane.scaled(sp)).unwrap();
                prop_assert!((p - q).norm() < 1e-9 * (1.0 + p.norm()));
            }

            #[test]
            fn nearest_rotation_idempotent(entries in proptest::collection::vec(-1.0..1.0f64, 9)) {
                let m = Mat3::from_row_slice(&entries);
                prop_assume!(m.svd(false, false).singular_values.min() > 1e-3);
                let r = nearest_rotation(&m).unwrap();
                let rr = nearest_rotation(&r).unwrap();
                prop_assert!((r - rr).norm() < 1e-12);
                prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            }
        }
    }
}
