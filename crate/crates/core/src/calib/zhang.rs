//! Planar camera calibration: closed-form intrinsics from the image of the
//! absolute conic, then joint refinement of intrinsics and board poses.

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector6};

use super::lm::{lm_solve, Jacobian, LmOptions, LmReport};
use super::pose::pose_from_homography;
use super::{estimate_homography_dlt, refine_homography, CalibError, Correspondence2D3D, Homography};
use crate::camera::{Distortion, Intrinsics};
use crate::geom::{Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZhangOptions {
    /// Pin the skew to zero in both the closed form and the refinement.
    pub zero_skew: bool,
    /// Estimate `k1, k2, p1, p2, k3` during refinement; otherwise they stay 0.
    pub estimate_distortion: bool,
    /// Run the joint refinement after the closed form.
    pub refine: bool,
    pub lm: LmOptions,
}

impl Default for ZhangOptions {
    fn default() -> Self {
        Self {
            zero_skew: true,
            estimate_distortion: false,
            refine: true,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraCalibration {
    pub intrinsics: Intrinsics,
    pub distortion: Distortion,
    /// Board to camera, one per view in input order.
    pub poses: Vec<Pose>,
    /// Root mean square of the per-corner reprojection distance, pixels.
    pub rms: f64,
    pub per_view_rms: Vec<f64>,
    pub closed_form: Intrinsics,
    pub homographies: Vec<Homography>,
    pub report: Option<LmReport>,
}

fn v_ij(h: &Matrix3<f64>, i: usize, j: usize) -> Vector6<f64> {
    let (a, b) = (h.column(i), h.column(j));
    Vector6::new(
        a[0] * b[0],
        a[0] * b[1] + a[1] * b[0],
        a[1] * b[1],
        a[2] * b[0] + a[0] * b[2],
        a[2] * b[1] + a[1] * b[2],
        a[2] * b[2],
    )
}

/// Closed-form intrinsics from at least three board homographies. Pixel
/// coordinates are conditioned by an isotropic shift and scale derived from
/// the image size before the conic is solved.
pub fn zhang_closed_form(
    homographies: &[Homography],
    width: u32,
    height: u32,
    zero_skew: bool,
) -> Result<Intrinsics, CalibError> {
    if homographies.len() < 3 {
        return Err(CalibError::InsufficientViews {
            needed: 3,
            got: homographies.len(),
        });
    }
    let s = 2.0 / f64::from(width.max(height).max(1));
    let n = Matrix3::new(
        s,
        0.0,
        -s * f64::from(width) / 2.0,
        0.0,
        s,
        -s * f64::from(height) / 2.0,
        0.0,
        0.0,
        1.0,
    );
    let extra = usize::from(zero_skew);
    let mut v = DMatrix::zeros(2 * homographies.len() + extra, 6);
    for (k, h) in homographies.iter().enumerate() {
        let hn = n * h.matrix();
        let hn = hn / hn.norm();
        let a = v_ij(&hn, 0, 1);
        let b = v_ij(&hn, 0, 0) - v_ij(&hn, 1, 1);
        v.row_mut(2 * k).copy_from(&(a / a.norm()).transpose());
        v.row_mut(2 * k + 1).copy_from(&(b / b.norm()).transpose());
    }
    if zero_skew {
        let last = v.nrows() - 1;
        v[(last, 1)] = 10.0;
    }
    let svd = v.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    if sv[idx[4]] <= 1e-8 * sv[idx[0]] {
        return Err(CalibError::DegenerateMotion(
            "board orientations do not constrain the intrinsics".into(),
        ));
    }
    let mut b: Vec<f64> = vt.row(idx[5]).iter().copied().collect();
    if b[0] < 0.0 {
        b.iter_mut().for_each(|x| *x = -*x);
    }
    let (b11, b12, b22, b13, b23, b33) = (b[0], b[1], b[2], b[3], b[4], b[5]);
    let den = b11 * b22 - b12 * b12;
    let bad = || CalibError::DegenerateMotion("conic is not positive definite".into());
    if !(den > 0.0) {
        return Err(bad());
    }
    let v0 = (b12 * b13 - b11 * b23) / den;
    let lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    if !(lambda / b11 > 0.0) {
        return Err(bad());
    }
    let alpha = (lambda / b11).sqrt();
    let beta = (lambda * b11 / den).sqrt();
    let gamma = if zero_skew {
        0.0
    } else {
        -b12 * alpha * alpha * beta / lambda
    };
    let u0 = gamma * v0 / beta - b13 * alpha * alpha / lambda;
    let kn = Matrix3::new(alpha, gamma, u0, 0.0, beta, v0, 0.0, 0.0, 1.0);
    let k = n.try_inverse().expect("conditioning is invertible") * kn;
    let k = k / k[(2, 2)];
    Ok(Intrinsics::from_matrix(&k, width, height)?)
}

/// Pixel position of board point `(x, y, 0)` seen from `pose`.
pub fn project_board_point(
    k: &Intrinsics,
    dist: &Distortion,
    pose: &Pose,
    world: &Vector2<f64>,
) -> Vector2<f64> {
    let p = pose.transform_point(&Vec3::new(world.x, world.y, 0.0));
    let xn = Vector2::new(p.x / p.z, p.y / p.z);
    k.to_pixel(&dist.apply(&xn))
}

/// Parameter layout for the joint refinement.
struct Layout {
    zero_skew: bool,
    distortion: bool,
    width: u32,
    height: u32,
}

impl Layout {
    fn n_global(&self) -> usize {
        4 + usize::from(!self.zero_skew) + if self.distortion { 5 } else { 0 }
    }

    fn pack(&self, k: &Intrinsics, d: &Distortion, poses: &[Pose]) -> DVector<f64> {
        let mut x = vec![k.fx, k.fy, k.cx, k.cy];
        if !self.zero_skew {
            x.push(k.skew);
        }
        if self.distortion {
            x.extend_from_slice(&[d.k1, d.k2, d.p1, d.p2, d.k3]);
        }
        for p in poses {
            x.extend(p.rotation_vector().iter());
            x.extend(p.translation.iter());
        }
        DVector::from_vec(x)
    }

    fn globals(&self, x: &[f64]) -> (Intrinsics, Distortion) {
        let skew = if self.zero_skew { 0.0 } else { x[4] };
        let k = Intrinsics {
            fx: x[0],
            fy: x[1],
            skew,
            cx: x[2],
            cy: x[3],
            width: self.width,
            height: self.height,
        };
        let d = if self.distortion {
            let o = 4 + usize::from(!self.zero_skew);
            Distortion {
                k1: x[o],
                k2: x[o + 1],
                p1: x[o + 2],
                p2: x[o + 3],
                k3: x[o + 4],
            }
        } else {
            Distortion::default()
        };
        (k, d)
    }

    fn pose(&self, x: &[f64], view: usize) -> Pose {
        let o = self.n_global() + 6 * view;
        Pose::from_rotation_vector(
            &Vec3::new(x[o], x[o + 1], x[o + 2]),
            Vec3::new(x[o + 3], x[o + 4], x[o + 5]),
        )
    }
}

fn view_residuals(
    k: &Intrinsics,
    d: &Distortion,
    pose: &Pose,
    corrs: &[Correspondence2D3D],
    out: &mut [f64],
) {
    for (c, r) in corrs.iter().zip(out.chunks_mut(2)) {
        let p = project_board_point(k, d, pose, &c.world);
        r[0] = p.x - c.image.x;
        r[1] = p.y - c.image.y;
    }
}

fn all_residuals(layout: &Layout, views: &[Vec<Correspondence2D3D>], x: &DVector<f64>) -> DVector<f64> {
    let total: usize = views.iter().map(|v| 2 * v.len()).sum();
    let mut r = DVector::zeros(total);
    let (k, d) = layout.globals(x.as_slice());
    let mut off = 0;
    for (i, v) in views.iter().enumerate() {
        let pose = layout.pose(x.as_slice(), i);
        view_residuals(&k, &d, &pose, v, &mut r.as_mut_slice()[off..off + 2 * v.len()]);
        off += 2 * v.len();
    }
    r
}

/// Central differences exploiting that each pose only moves its own view's
/// residuals.
fn block_jacobian(layout: &Layout, views: &[Vec<Correspondence2D3D>], x: &DVector<f64>) -> DMatrix<f64> {
    let total: usize = views.iter().map(|v| 2 * v.len()).sum();
    let mut jac = DMatrix::zeros(total, x.len());
    let step = |v: f64| f64::EPSILON.cbrt() * v.abs().max(1.0);
    let mut xp = x.clone();
    for j in 0..layout.n_global() {
        let h = step(x[j]);
        xp[j] = x[j] + h;
        let fp = all_residuals(layout, views, &xp);
        xp[j] = x[j] - h;
        let fm = all_residuals(layout, views, &xp);
        xp[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    let (k, d) = layout.globals(x.as_slice());
    let mut off = 0;
    for (i, v) in views.iter().enumerate() {
        let m = 2 * v.len();
        let mut rp = vec![0.0; m];
        let mut rm = vec![0.0; m];
        for q in 0..6 {
            let j = layout.n_global() + 6 * i + q;
            let h = step(x[j]);
            xp[j] = x[j] + h;
            view_residuals(&k, &d, &layout.pose(xp.as_slice(), i), v, &mut rp);
            xp[j] = x[j] - h;
            view_residuals(&k, &d, &layout.pose(xp.as_slice(), i), v, &mut rm);
            xp[j] = x[j];
            for r in 0..m {
                jac[(off + r, j)] = (rp[r] - rm[r]) / (2.0 * h);
            }
        }
        off += m;
    }
    jac
}

fn reprojection_stats(
    k: &Intrinsics,
    d: &Distortion,
    poses: &[Pose],
    views: &[Vec<Correspondence2D3D>],
) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let mut count = 0usize;
    let per_view = views
        .iter()
        .zip(poses)
        .map(|(v, p)| {
            let s: f64 = v
                .iter()
                .map(|c| (project_board_point(k, d, p, &c.world) - c.image).norm_squared())
                .sum();
            total += s;
            count += v.len();
            (s / v.len() as f64).sqrt()
        })
        .collect();
    ((total / count as f64).sqrt(), per_view)
}

/// Full planar calibration from per-view board/image correspondences: a
/// refined homography per view, the closed form, poses from the
/// homographies, then joint refinement of everything by reprojection error.
pub fn zhang_intrinsics(
    views: &[Vec<Correspondence2D3D>],
    width: u32,
    height: u32,
    opts: &ZhangOptions,
) -> Result<CameraCalibration, CalibError> {
    if views.len() < 3 {
        return Err(CalibError::InsufficientViews {
            needed: 3,
            got: views.len(),
        });
    }
    let homographies = views
        .iter()
        .map(|v| {
            let h0 = estimate_homography_dlt(v)?;
            Ok(refine_homography(&h0, v, &opts.lm)?.0)
        })
        .collect::<Result<Vec<_>, CalibError>>()?;
    let closed_form = zhang_closed_form(&homographies, width, height, opts.zero_skew)?;
    let poses = homographies
        .iter()
        .map(|h| pose_from_homography(h, &closed_form))
        .collect::<Result<Vec<_>, _>>()?;
    let mut k = closed_form;
    let mut d = Distortion::default();
    let mut poses = poses;
    let mut report = None;
    if opts.refine {
        let layout = Layout {
            zero_skew: opts.zero_skew,
            distortion: opts.estimate_distortion,
            width,
            height,
        };
        let x0 = layout.pack(&k, &d, &poses);
        let f = |x: &DVector<f64>| all_residuals(&layout, views, x);
        let jac = |x: &DVector<f64>| block_jacobian(&layout, views, x);
        let sol = lm_solve(&f, Jacobian::Analytic(&jac), x0, &opts.lm)?;
        (k, d) = layout.globals(sol.x.as_slice());
        poses = (0..views.len()).map(|i| layout.pose(sol.x.as_slice(), i)).collect();
        report = Some(sol.report);
    }
    let (rms, per_view_rms) = reprojection_stats(&k, &d, &poses, views);
    Ok(CameraCalibration {
        intrinsics: k,
        distortion: d,
        poses,
        rms,
        per_view_rms,
        closed_form,
        homographies,
        report,
    })
}
