use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};

use super::lm::{lm_solve, Jacobian, LmOptions, LmReport};
use super::CalibError;

/// Board point (metres, `z = 0` implicit) and where it appears in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence2D3D {
    pub image: Vector2<f64>,
    pub world: Vector2<f64>,
}

impl Correspondence2D3D {
    pub fn new(image: [f64; 2], world: [f64; 2]) -> Self {
        Self {
            image: Vector2::from(image),
            world: Vector2::from(world),
        }
    }
}

/// Board-to-image homography, scaled to unit Frobenius norm with `h33 >= 0`
/// (or, if `h33` vanishes, with its largest-magnitude entry positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, CalibError> {
        let norm = m.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(CalibError::DegenerateConfiguration("zero homography".into()));
        }
        let mut h = m / norm;
        let pivot = if h[(2, 2)].abs() > 1e-12 {
            h[(2, 2)]
        } else {
            h[h.iamax_full()]
        };
        if pivot < 0.0 {
            h = -h;
        }
        if h.determinant().abs() <= 1e-12 {
            return Err(CalibError::DegenerateConfiguration(
                "rank-deficient homography".into(),
            ));
        }
        Ok(Self { h })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    /// Image position of board point `(x, y)`.
    pub fn apply(&self, world: &Vector2<f64>) -> Vector2<f64> {
        let p = self.h * Vector3::new(world.x, world.y, 1.0);
        Vector2::new(p.x / p.z, p.y / p.z)
    }

    /// Board point seen at an image position.
    pub fn apply_inverse(&self, image: &Vector2<f64>) -> Vector2<f64> {
        let inv = self.h.try_inverse().expect("homography is full rank");
        let p = inv * Vector3::new(image.x, image.y, 1.0);
        Vector2::new(p.x / p.z, p.y / p.z)
    }

    /// Largest image-space distance between prediction and observation.
    pub fn max_transfer_error(&self, corrs: &[Correspondence2D3D]) -> f64 {
        corrs
            .iter()
            .map(|c| (self.apply(&c.world) - c.image).norm())
            .fold(0.0, f64::max)
    }

    pub fn rms_transfer_error(&self, corrs: &[Correspondence2D3D]) -> f64 {
        let s: f64 = corrs
            .iter()
            .map(|c| (self.apply(&c.world) - c.image).norm_squared())
            .sum();
        (s / corrs.len() as f64).sqrt()
    }
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn normalizing_transform(pts: impl Iterator<Item = Vector2<f64>> + Clone) -> Matrix3<f64> {
    let n = pts.clone().count() as f64;
    let c = pts.clone().fold(Vector2::zeros(), |a, p| a + p) / n;
    let mean_dist = pts.map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 {
        2f64.sqrt() / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    let q = t * Vector3::new(p.x, p.y, 1.0);
    Vector2::new(q.x / q.z, q.y / q.z)
}

/// Normalized DLT from at least four board/image correspondences.
pub fn estimate_homography_dlt(corrs: &[Correspondence2D3D]) -> Result<Homography, CalibError> {
    if corrs.len() < 4 {
        return Err(CalibError::DegenerateConfiguration(format!(
            "{} correspondences, need 4",
            corrs.len()
        )));
    }
    let tw = normalizing_transform(corrs.iter().map(|c| c.world));
    let ti = normalizing_transform(corrs.iter().map(|c| c.image));
    // Pad to at least nine rows so the SVD exposes the full right null space.
    let rows = (2 * corrs.len()).max(9);
    let mut a = DMatrix::zeros(rows, 9);
    for (k, c) in corrs.iter().enumerate() {
        let w = transform(&tw, &c.world);
        let p = transform(&ti, &c.image);
        let (x, y, u, v) = (w.x, w.y, p.x, p.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * k, j)] = r0[j];
            a[(2 * k + 1, j)] = r1[j];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    if sv[idx[7]] <= 1e-10 * sv[idx[0]] {
        return Err(CalibError::DegenerateConfiguration(
            "correspondences do not determine a homography (collinear points?)".into(),
        ));
    }
    let h = vt.row(idx[8]);
    let hn = Matrix3::from_row_slice(&h.iter().copied().collect::<Vec<_>>());
    let ti_inv = ti.try_inverse().expect("similarity is invertible");
    Homography::from_matrix(&(ti_inv * hn * tw))
}

fn transfer_residuals(h: &DVector<f64>, corrs: &[Correspondence2D3D]) -> DVector<f64> {
    let mut r = DVector::zeros(2 * corrs.len());
    for (k, c) in corrs.iter().enumerate() {
        let (x, y) = (c.world.x, c.world.y);
        let pu = h[0] * x + h[1] * y + h[2];
        let pv = h[3] * x + h[4] * y + h[5];
        let pw = h[6] * x + h[7] * y + h[8];
        r[2 * k] = pu / pw - c.image.x;
        r[2 * k + 1] = pv / pw - c.image.y;
    }
    r
}

fn transfer_jacobian(h: &DVector<f64>, corrs: &[Correspondence2D3D]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * corrs.len(), 9);
    for (k, c) in corrs.iter().enumerate() {
        let (x, y) = (c.world.x, c.world.y);
        let pu = h[0] * x + h[1] * y + h[2];
        let pv = h[3] * x + h[4] * y + h[5];
        let pw = h[6] * x + h[7] * y + h[8];
        let iw = 1.0 / pw;
        let (u, v) = (pu * iw, pv * iw);
        let m = [x, y, 1.0];
        for i in 0..3 {
            j[(2 * k, i)] = m[i] * iw;
            j[(2 * k, 6 + i)] = -u * m[i] * iw;
            j[(2 * k + 1, 3 + i)] = m[i] * iw;
            j[(2 * k + 1, 6 + i)] = -v * m[i] * iw;
        }
    }
    j
}

/// Minimizes the summed squared image transfer error over all nine entries
/// of `H`, starting from `h0`. The report flags a run that hit the
/// iteration cap; the best iterate is returned either way.
pub fn refine_homography(
    h0: &Homography,
    corrs: &[Correspondence2D3D],
    opts: &LmOptions,
) -> Result<(Homography, LmReport), CalibError> {
    let x0 = DVector::from_iterator(9, h0.matrix().transpose().iter().copied());
    let f = |h: &DVector<f64>| transfer_residuals(h, corrs);
    let jac = |h: &DVector<f64>| transfer_jacobian(h, corrs);
    let sol = lm_solve(&f, Jacobian::Analytic(&jac), x0, opts)?;
    let m = Matrix3::from_row_slice(sol.x.as_slice());
    Ok((Homography::from_matrix(&m)?, sol.report))
}

/// Transfer residuals and their analytic Jacobian as functions of the nine
/// row-major entries of `H`.
pub fn transfer_problem(
    corrs: &[Correspondence2D3D],
) -> (
    impl Fn(&DVector<f64>) -> DVector<f64> + '_,
    impl Fn(&DVector<f64>) -> DMatrix<f64> + '_,
) {
    (
        move |h: &DVector<f64>| transfer_residuals(h, corrs),
        move |h: &DVector<f64>| transfer_jacobian(h, corrs),
    )
}
