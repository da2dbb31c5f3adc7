//! Checkerboard inner-corner detection on rendered images.
//!
//! Candidates are local maxima of the saddle response `Ixy^2 - Ixx Iyy` of
//! a smoothed image. A candidate is kept when the intensity along a small
//! circle around it alternates dark/light exactly four times (an X
//! junction), which rejects the L-shaped corners at the pattern and sheet
//! borders. Survivors are refined to sub-pixel accuracy by the gradient
//! orthogonality condition and then by intersecting the two edge lines,
//! each fitted to coverage-based crossings along pixel rows or columns.
//! The points are then ordered by fitting the grid to the four
//! corners of their convex hull. Of the grid orientations that fit, the one
//! whose board +x axis points most to image right and +y most to image down
//! is chosen.

use nalgebra::{Matrix2, Vector2};

use super::{estimate_homography_dlt, CalibError, Correspondence2D3D};
use crate::image::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerDetectorOptions {
    pub smoothing_sigma: f64,
    /// Candidates need at least this fraction of the strongest response.
    pub min_response: f64,
    pub nms_radius: usize,
    /// Radius of the circle used for the X-junction test, pixels.
    pub ring_radius: f64,
    /// Half size of the sub-pixel refinement window; the window spans
    /// `2 * half_window + 1` pixels.
    pub half_window: usize,
    /// Follow the gradient refinement with the edge-line fit.
    pub edge_polish: bool,
    /// Largest distance from the corner at which edge samples are taken
    /// by [`refine_corner`]; the detector uses the corner spacing instead.
    pub edge_reach: f64,
    pub max_refine_iter: usize,
    /// Stop refining when the update is shorter than this, pixels.
    pub refine_eps: f64,
}

impl Default for CornerDetectorOptions {
    fn default() -> Self {
        Self {
            smoothing_sigma: 1.5,
            min_response: 0.05,
            nms_radius: 4,
            ring_radius: 4.0,
            half_window: 5,
            edge_polish: true,
            edge_reach: 12.0,
            max_refine_iter: 50,
            refine_eps: 1e-5,
        }
    }
}

fn saddle_response(s: &ImageBuffer) -> ImageBuffer {
    let (w, h) = (s.width(), s.height());
    let mut out = ImageBuffer::new(w, h, 1);
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let c = s.get(x, y);
            let ixx = s.get(x + 1, y) - 2.0 * c + s.get(x - 1, y);
            let iyy = s.get(x, y + 1) - 2.0 * c + s.get(x, y - 1);
            let ixy = (s.get(x + 1, y + 1) - s.get(x + 1, y - 1) - s.get(x - 1, y + 1)
                + s.get(x - 1, y - 1))
                / 4.0;
            out.set(x, y, (ixy * ixy - ixx * iyy).max(0.0));
        }
    }
    out
}

fn local_maxima(resp: &ImageBuffer, radius: usize, min_frac: f64) -> Vec<(usize, usize)> {
    let max = resp.data().iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let thr = max * min_frac;
    let (w, h) = (resp.width(), resp.height());
    let mut out = Vec::new();
    for y in radius..h.saturating_sub(radius) {
        'px: for x in radius..w.saturating_sub(radius) {
            let v = resp.get(x, y);
            if v < thr {
                continue;
            }
            for yy in y - radius..=y + radius {
                for xx in x - radius..=x + radius {
                    let o = resp.get(xx, yy);
                    // Strict on one side so plateaus keep exactly one pixel.
                    if o > v || (o == v && (yy, xx) < (y, x)) {
                        continue 'px;
                    }
                }
            }
            out.push((x, y));
        }
    }
    out
}

/// True when a circle around `p` crosses four alternating dark/light arcs.
fn is_x_junction(gray: &ImageBuffer, p: &Vector2<f64>, radius: f64) -> bool {
    const N: usize = 48;
    let samples: Vec<f64> = (0..N)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / N as f64;
            gray.sample_bilinear(p.x + radius * a.cos(), p.y + radius * a.sin())
        })
        .collect();
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-3) {
        return false;
    }
    let mid = (lo + hi) / 2.0;
    let signs: Vec<bool> = samples.iter().map(|&v| v > mid).collect();
    let changes = (0..N).filter(|&k| signs[k] != signs[(k + 1) % N]).count();
    if changes != 4 {
        return false;
    }
    // Each arc must span a few samples.
    let start = (0..N).find(|&k| signs[k] != signs[(k + N - 1) % N]).unwrap_or(0);
    let mut run = 0;
    for k in 0..N {
        let i = (start + k) % N;
        if k > 0 && signs[i] != signs[(i + N - 1) % N] {
            if run < 2 {
                return false;
            }
            run = 0;
        }
        run += 1;
    }
    run >= 2
}

struct Gradients {
    gx: ImageBuffer,
    gy: ImageBuffer,
}

fn gradients(gray: &ImageBuffer) -> Gradients {
    let (w, h) = (gray.width(), gray.height());
    let mut gx = ImageBuffer::new(w, h, 1);
    let mut gy = ImageBuffer::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            gx.set(x, y, (gray.get(xr, y) - gray.get(xl, y)) / (xr - xl).max(1) as f64);
            gy.set(x, y, (gray.get(x, yd) - gray.get(x, yu)) / (yd - yu).max(1) as f64);
        }
    }
    Gradients { gx, gy }
}

fn refine_with(g: &Gradients, start: Vector2<f64>, opts: &CornerDetectorOptions) -> Vector2<f64> {
    // Gradients are taken at pixel centres with a smooth Gaussian weight
    // (sigma = half_window / 2) that has decayed to e^-8 at the sampling
    // radius, so the sum is close to its continuous counterpart.
    let reach = 2 * opts.half_window as isize;
    let s2 = (opts.half_window as f64 / 2.0).powi(2);
    let (w, h) = (g.gx.width() as isize, g.gx.height() as isize);
    let mut c = start;
    for _ in 0..opts.max_refine_iter {
        let mut a = Matrix2::zeros();
        let mut b = Vector2::zeros();
        let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
        for y in (cy - reach).max(0)..=(cy + reach).min(h - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(w - 1) {
                let q = Vector2::new(x as f64, y as f64);
                let r2 = (q - c).norm_squared();
                if r2 > (reach * reach) as f64 {
                    continue;
                }
                let (gx, gy) = (g.gx.get(x as usize, y as usize), g.gy.get(x as usize, y as usize));
                let gg = Matrix2::new(gx * gx, gx * gy, gx * gy, gy * gy) * (-r2 / (2.0 * s2)).exp();
                a += gg;
                b += gg * q;
            }
        }
        let Some(next) = a.try_inverse().map(|inv| inv * b) else {
            break;
        };
        let step = (next - c).norm();
        if !step.is_finite() || (next - start).norm() > opts.half_window as f64 {
            break;
        }
        c = next;
        if step < opts.refine_eps {
            break;
        }
    }
    c
}

/// Angles of the four dark/light transitions on a circle around `c`.
fn ring_transitions(gray: &ImageBuffer, c: &Vector2<f64>, radius: f64) -> Option<[f64; 4]> {
    const N: usize = 96;
    let step = std::f64::consts::TAU / N as f64;
    let samples: Vec<f64> = (0..N)
        .map(|k| {
            let a = k as f64 * step;
            gray.sample_bilinear(c.x + radius * a.cos(), c.y + radius * a.sin())
        })
        .collect();
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = (lo + hi) / 2.0;
    let mut out = Vec::with_capacity(4);
    for k in 0..N {
        let (a, b) = (samples[k] - mid, samples[(k + 1) % N] - mid);
        if (a > 0.0) != (b > 0.0) {
            out.push((k as f64 + a / (a - b)) * step);
        }
    }
    out.try_into().ok()
}

/// Least-squares line through points `(s, e)` given as `e = alpha + beta s`
/// in a frame where `axis` is the sampled coordinate; returns a point on the
/// line and its unit direction in image coordinates.
fn fit_edge_line(samples: &[(f64, f64)], vertical: bool) -> Option<(Vector2<f64>, Vector2<f64>)> {
    let n = samples.len() as f64;
    let ms = samples.iter().map(|p| p.0).sum::<f64>() / n;
    let me = samples.iter().map(|p| p.1).sum::<f64>() / n;
    let sss: f64 = samples.iter().map(|p| (p.0 - ms).powi(2)).sum();
    if !(sss > 0.0) {
        return None;
    }
    let beta = samples.iter().map(|p| (p.0 - ms) * (p.1 - me)).sum::<f64>() / sss;
    // Vertical edges were sampled along rows: e is x, s is y.
    Some(if vertical {
        (Vector2::new(me, ms), Vector2::new(beta, 1.0).normalize())
    } else {
        (Vector2::new(ms, me), Vector2::new(1.0, beta).normalize())
    })
}

/// Sub-pixel edge crossings of the line `(p, d)` away from the corner,
/// measured by the coverage sum across each pixel row (or column). For a
/// box-filtered straight edge the sum of normalized intensities over a
/// segment equals the distance from the edge to the segment end exactly.
fn edge_crossings(
    gray: &ImageBuffer,
    c: &Vector2<f64>,
    d: &Vector2<f64>,
    other: &Vector2<f64>,
    reach: f64,
) -> (Vec<(f64, f64)>, bool) {
    const HALF: isize = 4;
    let vertical = d.y.abs() >= d.x.abs();
    // Work in (s, e) with s the scan index axis and e the crossing axis.
    let (cs, ce, ds, de) = if vertical { (c.y, c.x, d.y, d.x) } else { (c.x, c.y, d.x, d.y) };
    let (ns, ne) = if vertical {
        (gray.height() as isize, gray.width() as isize)
    } else {
        (gray.width() as isize, gray.height() as isize)
    };
    let at = |s: isize, e: isize| {
        if vertical {
            gray.get(e as usize, s as usize)
        } else {
            gray.get(s as usize, e as usize)
        }
    };
    let on = Vector2::new(-other.y, other.x);
    let span = (reach * ds.abs()).floor() as isize;
    let mut out = Vec::new();
    for k in -span..=span {
        let s = cs.round() as isize + k;
        let t = (s as f64 - cs) / ds;
        if t.abs() < 2.0 || t.abs() > reach || s < 0 || s >= ns {
            continue;
        }
        let e0 = ce + t * de;
        let (a, b) = (e0.round() as isize - HALF, e0.round() as isize + HALF);
        if a < 0 || b >= ne {
            continue;
        }
        // The segment must stay clear of the other edge through the corner.
        let clear = [(a as f64 - 0.5, s as f64 - 0.5), (b as f64 + 0.5, s as f64 - 0.5), (a as f64 - 0.5, s as f64 + 0.5), (b as f64 + 0.5, s as f64 + 0.5)]
            .iter()
            .map(|&(e, s)| {
                let q = if vertical { Vector2::new(e, s) } else { Vector2::new(s, e) };
                (q - c).dot(&on)
            })
            .collect::<Vec<_>>();
        let same_side = clear.iter().all(|v| *v > 1.5) || clear.iter().all(|v| *v < -1.5);
        if !same_side {
            continue;
        }
        let lo = (at(s, a) + at(s, a + 1)) / 2.0;
        let hi = (at(s, b - 1) + at(s, b)) / 2.0;
        if (hi - lo).abs() < 1e-3 {
            continue;
        }
        let sum: f64 = (a..=b).map(|e| (at(s, e) - lo) / (hi - lo)).sum();
        out.push((s as f64, b as f64 + 0.5 - sum));
    }
    (out, vertical)
}

/// Corner as the intersection of the two edge lines fitted to coverage
/// crossings. `None` when the geometry does not allow a stable fit.
fn polish_on_edges(gray: &ImageBuffer, c0: Vector2<f64>, reach: f64) -> Option<Vector2<f64>> {
    if reach < 4.0 {
        return None;
    }
    let a = ring_transitions(gray, &c0, (reach / 2.0).min(5.0))?;
    let u = |t: f64| Vector2::new(t.cos(), t.sin());
    let mut dirs = [(u(a[0]) - u(a[2])).try_normalize(1e-9)?, (u(a[1]) - u(a[3])).try_normalize(1e-9)?];
    let mut c = c0;
    for _ in 0..5 {
        let mut lines = Vec::with_capacity(2);
        for k in 0..2 {
            let (pts, vertical) = edge_crossings(gray, &c, &dirs[k], &dirs[1 - k], reach);
            if pts.len() < 4 {
                return None;
            }
            lines.push(fit_edge_line(&pts, vertical)?);
        }
        let ((p1, d1), (p2, d2)) = (lines[0], lines[1]);
        let m = Matrix2::from_columns(&[d1, -d2]);
        let ts = m.try_inverse()? * (p2 - p1);
        let next = p1 + d1 * ts.x;
        let moved = (next - c).norm();
        c = next;
        dirs = [d1, d2];
        if moved < 1e-9 {
            break;
        }
    }
    ((c - c0).norm() < 1.5).then_some(c)
}

/// Sub-pixel refinement of one corner estimate by the condition that image
/// gradients in the window are orthogonal to the vector from the corner,
/// optionally polished by intersecting the two fitted edge lines.
pub fn refine_corner(
    gray: &ImageBuffer,
    start: Vector2<f64>,
    opts: &CornerDetectorOptions,
) -> Vector2<f64> {
    let gray = gray.to_gray();
    let c = refine_with(&gradients(&gray), start, opts);
    if opts.edge_polish {
        polish_on_edges(&gray, c, opts.edge_reach).unwrap_or(c)
    } else {
        c
    }
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Indices of the convex hull, counter-clockwise in a y-up frame.
fn convex_hull(pts: &[Vector2<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a].x.total_cmp(&pts[b].x).then(pts[a].y.total_cmp(&pts[b].y))
    });
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(&pts[hull[hull.len() - 2]], &pts[hull[hull.len() - 1]], &pts[i]) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

fn quad_area(p: [&Vector2<f64>; 4]) -> f64 {
    0.5 * (cross(p[0], p[1], p[2]) + cross(p[0], p[2], p[3])).abs()
}

/// The four hull vertices spanning the largest quadrilateral, in hull order.
fn hull_quad(pts: &[Vector2<f64>], hull: &[usize]) -> Option<[usize; 4]> {
    let n = hull.len();
    // Drop vertices where the hull barely turns.
    let sharp: Vec<usize> = (0..n)
        .filter(|&k| {
            let (a, b, c) = (&pts[hull[(k + n - 1) % n]], &pts[hull[k]], &pts[hull[(k + 1) % n]]);
            let (u, v) = ((b - a).normalize(), (c - b).normalize());
            u.dot(&v) < (10f64).to_radians().cos()
        })
        .map(|k| hull[k])
        .collect();
    let cand = if sharp.len() >= 4 { sharp } else { hull.to_vec() };
    let m = cand.len();
    if m < 4 {
        return None;
    }
    let mut best = (0.0, None);
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                for d in c + 1..m {
                    let q = [cand[a], cand[b], cand[c], cand[d]];
                    let area = quad_area(q.map(|i| &pts[i]));
                    if area > best.0 {
                        best = (area, Some(q));
                    }
                }
            }
        }
    }
    best.1
}

/// Detects the `cols x rows` inner corners of a checkerboard and returns
/// them row-major (column index along board +x).
pub fn detect_corners(
    image: &ImageBuffer,
    cols: usize,
    rows: usize,
    opts: &CornerDetectorOptions,
) -> Result<Vec<Vector2<f64>>, CalibError> {
    let fail = |m: String| Err(CalibError::CornerDetection(m));
    let gray = image.to_gray();
    let r = (3.0 * opts.smoothing_sigma).ceil() as usize;
    let smooth = gray.gaussian_blur(opts.smoothing_sigma, r);
    let resp = saddle_response(&smooth);
    let margin = (opts.ring_radius.ceil() as usize + 1).max(opts.nms_radius);
    let grads = gradients(&gray);
    let mut pts: Vec<Vector2<f64>> = Vec::new();
    for (x, y) in local_maxima(&resp, margin, opts.min_response) {
        let p = Vector2::new(x as f64, y as f64);
        if !is_x_junction(&gray, &p, opts.ring_radius) {
            continue;
        }
        let q = refine_with(&grads, p, opts);
        if pts.iter().all(|o| (o - q).norm() > 2.0) {
            pts.push(q);
        }
    }
    if opts.edge_polish {
        let snapshot = pts.clone();
        for (i, q) in pts.iter_mut().enumerate() {
            let spacing = snapshot
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, o)| (o - *q).norm())
                .fold(f64::INFINITY, f64::min);
            if let Some(r) = polish_on_edges(&gray, *q, (spacing - 6.0).min(4.0 * spacing)) {
                *q = r;
            }
        }
    }
    let expected = cols * rows;
    if pts.len() != expected {
        return fail(format!("found {} X-junctions, expected {expected}", pts.len()));
    }
    let hull = convex_hull(&pts);
    let Some(quad) = hull_quad(&pts, &hull) else {
        return fail("could not find the grid outline".into());
    };
    let grid_corners = [
        [0.0, 0.0],
        [(cols - 1) as f64, 0.0],
        [(cols - 1) as f64, (rows - 1) as f64],
        [0.0, (rows - 1) as f64],
    ];
    let mut best: Option<(f64, Vec<Vector2<f64>>)> = None;
    for reflect in [false, true] {
        for rot in 0..4 {
            let corrs: Vec<Correspondence2D3D> = (0..4)
                .map(|k| {
                    let qi = if reflect { (rot + 4 - k) % 4 } else { (rot + k) % 4 };
                    Correspondence2D3D {
                        image: pts[quad[qi]],
                        world: Vector2::from(grid_corners[k]),
                    }
                })
                .collect();
            let Ok(h) = estimate_homography_dlt(&corrs) else {
                continue;
            };
            let Some(ordered) = match_grid(&pts, cols, rows, |i, j| {
                h.apply(&Vector2::new(i as f64, j as f64))
            }) else {
                continue;
            };
            let cx = (cols as f64 - 1.0) / 2.0;
            let cy = (rows as f64 - 1.0) / 2.0;
            let c0 = h.apply(&Vector2::new(cx, cy));
            let dx = (h.apply(&Vector2::new(cx + 1.0, cy)) - c0).normalize();
            let dy = (h.apply(&Vector2::new(cx, cy + 1.0)) - c0).normalize();
            let score = dx.x + dy.y;
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, ordered));
            }
        }
    }
    match best {
        Some((_, ordered)) => Ok(ordered),
        None => fail("detected points do not form the expected grid".into()),
    }
}

/// Assigns every predicted grid position to a distinct detected point within
/// a third of the local grid spacing.
fn match_grid(
    pts: &[Vector2<f64>],
    cols: usize,
    rows: usize,
    predict: impl Fn(usize, usize) -> Vector2<f64>,
) -> Option<Vec<Vector2<f64>>> {
    let mut used = vec![false; pts.len()];
    let mut out = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let p = predict(i, j);
            let ni = if i + 1 < cols { predict(i + 1, j) } else { predict(i - 1, j) };
            let nj = if j + 1 < rows { predict(i, j + 1) } else { predict(i, j - 1) };
            let tol = (ni - p).norm().min((nj - p).norm()) / 3.0;
            let (k, d) = pts
                .iter()
                .enumerate()
                .map(|(k, q)| (k, (q - p).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))?;
            if d > tol || used[k] {
                return None;
            }
            used[k] = true;
            out.push(pts[k]);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Anti-aliased checkerboard drawn by supersampling an affine map.
    fn draw_board(
        w: usize,
        h: usize,
        origin: Vector2<f64>,
        ex: Vector2<f64>,
        ey: Vector2<f64>,
        squares: (usize, usize),
    ) -> ImageBuffer {
        let m = Matrix2::from_columns(&[ex, ey]).try_inverse().unwrap();
        let ss = 32;
        ImageBuffer::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for sy in 0..ss {
                for sx in 0..ss {
                    let p = Vector2::new(
                        x as f64 - 0.5 + (sx as f64 + 0.5) / ss as f64,
                        y as f64 - 0.5 + (sy as f64 + 0.5) / ss as f64,
                    );
                    let b = m * (p - origin);
                    let inside = b.x >= 0.0
                        && b.y >= 0.0
                        && b.x < squares.0 as f64
                        && b.y < squares.1 as f64;
                    let v = if !inside {
                        0.9
                    } else if (b.x.floor() as i64 + b.y.floor() as i64) % 2 == 0 {
                        0.27
                    } else {
                        0.9
                    };
                    acc += v;
                }
            }
            acc / (ss * ss) as f64
        })
    }

    #[test]
    fn finds_and_orders_affine_grid() {
        let origin = Vector2::new(40.3, 30.7);
        let ex = Vector2::new(18.0, 3.0);
        let ey = Vector2::new(-2.5, 17.0);
        let img = draw_board(320, 240, origin, ex, ey, (7, 5));
        let found = detect_corners(&img, 6, 4, &CornerDetectorOptions::default()).unwrap();
        assert_eq!(found.len(), 24);
        for j in 0..4 {
            for i in 0..6 {
                let truth = origin + ex * (i + 1) as f64 + ey * (j + 1) as f64;
                let err = (found[j * 6 + i] - truth).norm();
                assert!(err < 0.01, "corner ({i},{j}) off by {err}");
            }
        }
    }

    #[test]
    fn upside_down_board_keeps_x_right() {
        // Rotated by 180 degrees: the pattern looks the same, ordering must
        // still run left to right.
        let origin = Vector2::new(200.0, 150.0);
        let img = draw_board(
            240,
            200,
            origin,
            Vector2::new(-20.0, 0.0),
            Vector2::new(0.0, -20.0),
            (7, 5),
        );
        let found = detect_corners(&img, 6, 4, &CornerDetectorOptions::default()).unwrap();
        assert!(found[1].x > found[0].x);
        assert!(found[6].y > found[0].y);
    }

    #[test]
    fn wrong_count_is_an_error() {
        let img = ImageBuffer::filled(50, 50, 1, 0.5);
        assert!(matches!(
            detect_corners(&img, 6, 4, &CornerDetectorOptions::default()),
            Err(CalibError::CornerDetection(_))
        ));
    }

    #[test]
    fn refinement_converges_from_offset_start() {
        let origin = Vector2::new(20.25, 20.6);
        let img = draw_board(100, 100, origin, Vector2::new(20.0, 0.0), Vector2::new(0.0, 20.0), (3, 3));
        let truth = origin + Vector2::new(20.0, 20.0);
        let got = refine_corner(&img, truth + Vector2::new(1.3, -1.1), &CornerDetectorOptions::default());
        // The drawn edges are quantized to 1/32 px.
        assert!((got - truth).norm() < 0.01);
        let plain = CornerDetectorOptions {
            edge_polish: false,
            ..Default::default()
        };
        assert!((refine_corner(&img, truth + Vector2::new(1.3, -1.1), &plain) - truth).norm() < 0.1);
    }
}
