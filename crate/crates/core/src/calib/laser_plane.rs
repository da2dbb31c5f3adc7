//! Laser plane from triangulated stripe points.
//!
//! Initial estimate: the right singular vector for the smallest singular
//! value of the stacked `[x y z 1]` rows. Refinement: Levenberg–Marquardt on
//! the four plane coefficients with per-point residual
//! `|p . phi| / |n| + w (|n| - 1)^2`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector4};

use super::lm::{lm_solve, Jacobian, LmOptions, LmReport};
use super::CalibError;
use crate::geom::{PlaneParams, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFitOptions {
    /// Weight of the unit-normal penalty term.
    pub penalty_weight: f64,
    pub refine: bool,
    pub lm: LmOptions,
}

impl Default for PlaneFitOptions {
    fn default() -> Self {
        Self {
            penalty_weight: 1.0,
            refine: true,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    /// Unit normal, `d <= 0`.
    pub plane: PlaneParams,
    /// Linear estimate before refinement, same normalization.
    pub initial: PlaneParams,
    pub mean_abs_distance: f64,
    pub rms_distance: f64,
    pub max_abs_distance: f64,
    /// Total cost `0.5 * sum eps_i^2` of the linear and the refined estimate.
    pub initial_cost: f64,
    pub final_cost: f64,
    pub report: Option<LmReport>,
}

fn residuals(phi: &DVector<f64>, pts: &[Vec3], w: f64) -> DVector<f64> {
    let n = Vec3::new(phi[0], phi[1], phi[2]).norm();
    let pen = w * (n - 1.0).powi(2);
    DVector::from_iterator(
        pts.len(),
        pts.iter()
            .map(|p| (p.x * phi[0] + p.y * phi[1] + p.z * phi[2] + phi[3]).abs() / n + pen),
    )
}

fn jacobian(phi: &DVector<f64>, pts: &[Vec3], w: f64) -> DMatrix<f64> {
    let nv = Vec3::new(phi[0], phi[1], phi[2]);
    let n = nv.norm();
    let dpen = nv * (2.0 * w * (n - 1.0) / n);
    let mut j = DMatrix::zeros(pts.len(), 4);
    for (i, p) in pts.iter().enumerate() {
        let a = p.dot(&nv) + phi[3];
        let s = if a >= 0.0 { 1.0 } else { -1.0 };
        // d(|a| / n) = s (da / n) - |a| nv / n^3
        let g = p * (s / n) - nv * (a.abs() / (n * n * n)) + dpen;
        j[(i, 0)] = g.x;
        j[(i, 1)] = g.y;
        j[(i, 2)] = g.z;
        j[(i, 3)] = s / n;
    }
    j
}

/// Residual and analytic Jacobian of the refinement, in the four plane
/// coefficients.
pub fn plane_fit_problem(
    pts: &[Vec3],
    w: f64,
) -> (
    impl Fn(&DVector<f64>) -> DVector<f64> + '_,
    impl Fn(&DVector<f64>) -> DMatrix<f64> + '_,
) {
    (
        move |phi: &DVector<f64>| residuals(phi, pts, w),
        move |phi: &DVector<f64>| jacobian(phi, pts, w),
    )
}

fn cost(phi: &PlaneParams, pts: &[Vec3], w: f64) -> f64 {
    0.5 * residuals(&DVector::from_column_slice(phi.as_vector().as_slice()), pts, w).norm_squared()
}

pub fn fit_laser_plane(points: &[Vec3], opts: &PlaneFitOptions) -> Result<PlaneFit, CalibError> {
    if points.len() < 3 {
        return Err(CalibError::CollinearPoints);
    }
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vec3>() / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let ev = eig.eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    let mid = ev.sum() - lo - hi;
    if !(mid > 1e-18 * hi.max(f64::MIN_POSITIVE)) || hi <= 0.0 {
        return Err(CalibError::CollinearPoints);
    }

    let rows = points.len().max(4);
    let mut a = DMatrix::zeros(rows, 4);
    for (i, p) in points.iter().enumerate() {
        a.row_mut(i).copy_from_slice(&[p.x, p.y, p.z, 1.0]);
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.imin();
    let v = vt.row(k);
    let initial = PlaneParams::new(v[0], v[1], v[2], v[3]).normalized()?;
    let w = opts.penalty_weight;
    let initial_cost = cost(&initial, points, w);

    let (refined, report) = if opts.refine {
        let (f, jac) = plane_fit_problem(points, w);
        let x0 = DVector::from_column_slice(initial.as_vector().as_slice());
        let sol = lm_solve(&f, Jacobian::Analytic(&jac), x0, &opts.lm)?;
        let phi = PlaneParams::from_vector(&Vector4::new(sol.x[0], sol.x[1], sol.x[2], sol.x[3]));
        let lm_plane = phi.normalized()?;
        // The cost is bounded below by the orthogonal-regression plane (unit
        // normal, zero penalty). LM approaches it only linearly along the
        // scale-degenerate direction, so finish on it when it is lower.
        let tls = PlaneParams::from_point_normal(&centroid, &eig.eigenvectors.column(ev.imin()).into_owned())
            .normalized()?;
        if cost(&tls, points, w) <= cost(&lm_plane, points, w) {
            (tls, Some(sol.report))
        } else {
            (lm_plane, Some(sol.report))
        }
    } else {
        (initial, None)
    };
    let final_cost = cost(&refined, points, w);
    let dists: Vec<f64> = points.iter().map(|p| refined.signed_distance(p).abs()).collect();
    Ok(PlaneFit {
        plane: refined,
        initial,
        mean_abs_distance: dists.iter().sum::<f64>() / n,
        rms_distance: (dists.iter().map(|d| d * d).sum::<f64>() / n).sqrt(),
        max_abs_distance: dists.iter().copied().fold(0.0, f64::max),
        initial_cost,
        final_cost,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::lm::max_jacobian_discrepancy;
    use crate::geom::Pose;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gt() -> PlaneParams {
        PlaneParams::new(0.9744, 0.0, 0.2250, -0.1949).normalized().unwrap()
    }

    /// Points on `plane` spread along several lines, as from board views.
    fn stripe_points(plane: &PlaneParams, lines: usize, per_line: usize, noise: f64, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let n = plane.normal();
        let p0 = plane.point_on_plane().unwrap();
        let u = n.cross(&Vec3::y()).normalize();
        let v = n.cross(&u);
        let mut pts = Vec::new();
        for _ in 0..lines {
            let depth = rng.gen_range(-0.3..0.3);
            let tilt = rng.gen_range(-0.2..0.2);
            for k in 0..per_line {
                let s = -0.15 + 0.3 * k as f64 / per_line as f64;
                let mut p = p0 + u * (0.8 + depth + tilt * s) + v * s;
                if noise > 0.0 {
                    p += Vec3::new(nd.sample(&mut rng), nd.sample(&mut rng), nd.sample(&mut rng));
                }
                pts.push(p);
            }
        }
        pts
    }

    #[test]
    fn exact_plane_z_one() {
        let pts: Vec<Vec3> = (0..20)
            .map(|i| Vec3::new((i % 5) as f64 * 0.1, (i / 5) as f64 * 0.1, 1.0))
            .collect();
        let fit = fit_laser_plane(&pts, &PlaneFitOptions::default()).unwrap();
        let v = fit.plane.as_vector();
        assert!((v - Vector4::new(0.0, 0.0, 1.0, -1.0)).amax() < 1e-12);
        assert!(fit.max_abs_distance < 1e-12);
    }

    #[test]
    fn three_points_define_plane() {
        let pts = [
            Vec3::new(0.1, 0.2, 1.0),
            Vec3::new(-0.3, 0.1, 1.2),
            Vec3::new(0.2, -0.4, 0.9),
        ];
        let n = (pts[1] - pts[0]).cross(&(pts[2] - pts[0])).normalize();
        let oracle = PlaneParams::from_point_normal(&pts[0], &n).normalized().unwrap();
        let fit = fit_laser_plane(&pts, &PlaneFitOptions::default()).unwrap();
        assert!((fit.plane.as_vector() - oracle.as_vector()).amax() < 1e-10);
    }

    #[test]
    fn noisy_stripes_recover_normal() {
        let pts = stripe_points(&gt(), 30, 100, 1e-4, 7);
        let fit = fit_laser_plane(&pts, &PlaneFitOptions::default()).unwrap();
        assert!(fit.plane.normal_angle_to(&gt()) < 1e-3);
        assert!((fit.plane.normal().norm() - 1.0).abs() < 1e-6);
        assert!(fit.final_cost <= fit.initial_cost);
        assert!(fit.plane.d <= 0.0);
    }

    #[test]
    fn collinear_rejected() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        assert_eq!(
            fit_laser_plane(&pts, &PlaneFitOptions::default()),
            Err(CalibError::CollinearPoints)
        );
        assert_eq!(
            fit_laser_plane(&pts[..2], &PlaneFitOptions::default()),
            Err(CalibError::CollinearPoints)
        );
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let pts = stripe_points(&gt(), 3, 5, 1e-3, 2);
        let (f, j) = plane_fit_problem(&pts, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            assert!(max_jacobian_discrepancy(&f, &j, &x) < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn permutation_and_rigid_motion_covariance(seed in 0u64..1000, ax in -1.0f64..1.0, ay in -1.0f64..1.0, angle in 0.0f64..1.0) {
            let pts = stripe_points(&gt(), 5, 20, 1e-4, seed);
            let fit = fit_laser_plane(&pts, &PlaneFitOptions::default()).unwrap();
            let mut shuffled = pts.clone();
            shuffled.reverse();
            shuffled.swap(0, 7);
            let fit2 = fit_laser_plane(&shuffled, &PlaneFitOptions::default()).unwrap();
            prop_assert!((fit.plane.as_vector() - fit2.plane.as_vector()).amax() < 1e-9);

            let pose = Pose::from_axis_angle(&Vec3::new(ax, ay, 0.5), angle, Vec3::new(0.05, -0.02, 0.1));
            let moved: Vec<Vec3> = pts.iter().map(|p| pose.transform_point(p)).collect();
            let fit3 = fit_laser_plane(&moved, &PlaneFitOptions::default()).unwrap();
            let expect = fit.plane.transformed(&pose).normalized().unwrap();
            prop_assert!((fit3.plane.as_vector() - expect.as_vector()).amax() < 1e-9);
        }
    }
}
