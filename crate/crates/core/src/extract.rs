//! Laser stripe extraction.
//!
//! RGB pipeline: channel difference, negative values clipped, Gaussian
//! smoothing, global mean subtracted and clamped at zero, global
//! normalization to unit peak, values below the threshold discarded, then
//! the row-wise maximum as the discrete stripe position. Each discrete peak
//! is refined by fitting `A exp(-(x - mu)^2 / (2 s^2))` to the smoothed
//! difference image (before thresholding) in a window around it.
//!
//! The channel difference is the laser channel minus the mean of the other
//! two, e.g. `G - (R + B) / 2` for a green laser.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{lm_solve, Jacobian, LmOptions, Termination};
use crate::image::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaserColor {
    Red,
    Green,
    Blue,
}

impl LaserColor {
    fn channel(self) -> usize {
        match self {
            LaserColor::Red => 0,
            LaserColor::Green => 1,
            LaserColor::Blue => 2,
        }
    }

    /// Channel with the largest weight in an RGB laser colour.
    pub fn dominant(rgb: [f64; 3]) -> Self {
        let k = (0..3).max_by(|&a, &b| rgb[a].total_cmp(&rgb[b])).unwrap_or(0);
        [LaserColor::Red, LaserColor::Green, LaserColor::Blue][k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractParams {
    /// Smoothing kernel sigma in pixels; the kernel is cut at 3 sigma.
    pub smoothing_sigma: f64,
    /// Post-normalization threshold.
    pub threshold: f64,
    pub min_sigma: f64,
    pub max_sigma: f64,
    /// Secondary maxima above this fraction of the primary set `multi_peak`.
    pub multi_peak_ratio: f64,
    /// Treat columns as rows, for stripes that run horizontally.
    pub transpose: bool,
    pub lm: LmOptions,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            smoothing_sigma: 1.0,
            threshold: 0.1,
            min_sigma: 0.3,
            max_sigma: 20.0,
            multi_peak_ratio: 0.5,
            transpose: false,
            lm: LmOptions::default(),
        }
    }
}

impl ExtractParams {
    pub fn kernel_radius(&self) -> usize {
        (3.0 * self.smoothing_sigma).ceil() as usize
    }

    /// Half width of the fitting window.
    pub fn fit_half_window(&self) -> usize {
        ((3.0 * self.smoothing_sigma * 3.0).ceil() as usize).max(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    NoLaser,
    FitFailed,
    ThinMask,
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::NoLaser => "no_laser",
            InvalidReason::FitFailed => "fit_failed",
            InvalidReason::ThinMask => "thin_mask",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub row: usize,
    /// Sub-pixel column; pixel centres are at integers.
    pub col: f64,
    pub amplitude: f64,
    pub width_sigma: f64,
    pub valid: bool,
    pub reason: Option<InvalidReason>,
    pub multi_peak: bool,
}

impl ProfileRow {
    fn invalid(row: usize, reason: InvalidReason) -> Self {
        Self {
            row,
            col: f64::NAN,
            amplitude: 0.0,
            width_sigma: 0.0,
            valid: false,
            reason: Some(reason),
            multi_peak: false,
        }
    }
}

/// One entry per image row (per column when extracted transposed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserProfile {
    pub width: usize,
    pub height: usize,
    pub transposed: bool,
    pub rows: Vec<ProfileRow>,
}

impl LaserProfile {
    pub fn valid_rows(&self) -> impl Iterator<Item = &ProfileRow> {
        self.rows.iter().filter(|r| r.valid)
    }

    /// Image position `(u, v)` of a row entry.
    pub fn pixel(&self, r: &ProfileRow) -> (f64, f64) {
        if self.transposed {
            (r.row as f64, r.col)
        } else {
            (r.col, r.row as f64)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,amplitude,sigma,valid,reason,multi_peak\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.row,
                if r.col.is_finite() { format!("{:.9}", r.col) } else { String::new() },
                r.amplitude,
                r.width_sigma,
                u8::from(r.valid),
                r.reason.map_or("", InvalidReason::as_str),
                u8::from(r.multi_peak),
            );
        }
        s
    }
}

pub fn channel_difference(rgb: &ImageBuffer, color: LaserColor) -> ImageBuffer {
    assert_eq!(rgb.channels(), 3, "channel difference needs RGB");
    let c = color.channel();
    let (o1, o2) = ((c + 1) % 3, (c + 2) % 3);
    let data = rgb
        .data()
        .chunks_exact(3)
        .map(|p| p[c] - (p[o1] + p[o2]) / 2.0)
        .collect();
    ImageBuffer::from_vec(rgb.width(), rgb.height(), 1, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePeaks {
    /// Integer column of the row maximum, `None` when the row has no laser.
    pub peaks: Vec<Option<usize>>,
    /// Smoothed, clipped difference image (the fit target).
    pub smoothed: ImageBuffer,
    /// After mean removal, normalization and thresholding.
    pub normalized: ImageBuffer,
}

impl DiscretePeaks {
    /// Column of the strongest value in each separate above-threshold run
    /// of a row; more than one entry means several stripe candidates.
    pub fn candidates(&self, row: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut best: Option<(usize, f64)> = None;
        for (x, &v) in self.normalized.row(row).iter().enumerate() {
            if v > 0.0 {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((x, v));
                }
            } else if let Some((bx, _)) = best.take() {
                out.push(bx);
            }
        }
        if let Some((bx, _)) = best {
            out.push(bx);
        }
        out
    }
}

pub fn discrete_peaks(diff: &ImageBuffer, params: &ExtractParams) -> DiscretePeaks {
    let clipped = diff.map(|v| v.max(0.0));
    let smoothed = clipped.gaussian_blur(params.smoothing_sigma, params.kernel_radius());
    let n = smoothed.data().len().max(1) as f64;
    let mean = smoothed.data().iter().sum::<f64>() / n;
    let centred = smoothed.map(|v| (v - mean).max(0.0));
    let max = centred.data().iter().copied().fold(0.0, f64::max);
    let normalized = if max > 0.0 {
        centred.map(|v| {
            let u = v / max;
            if u < params.threshold {
                0.0
            } else {
                u
            }
        })
    } else {
        centred.map(|_| 0.0)
    };
    let peaks = (0..normalized.height())
        .map(|y| {
            let row = normalized.row(y);
            let mut best: Option<(usize, f64)> = None;
            for (x, &v) in row.iter().enumerate() {
                if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((x, v));
                }
            }
            best.map(|(x, _)| x)
        })
        .collect();
    DiscretePeaks {
        peaks,
        smoothed,
        normalized,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
}

/// Least-squares Gaussian through `samples[lo..=hi]` of one row, starting
/// at `peak`. Samples are scaled by their window maximum before fitting.
/// Returns `None` when the fit fails or leaves the window.
pub fn fit_gaussian_window(
    samples: &[f64],
    peak: usize,
    half_window: usize,
    lm: &LmOptions,
) -> Option<GaussianFit> {
    let lo = peak.saturating_sub(half_window);
    let hi = (peak + half_window).min(samples.len() - 1);
    let xs: Vec<f64> = (lo..=hi).map(|x| x as f64).collect();
    let scale = samples[lo..=hi].iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let ys: Vec<f64> = samples[lo..=hi].iter().map(|v| v / scale).collect();
    // Moment-based width estimate for the start point.
    let mass: f64 = ys.iter().map(|y| y.max(0.0)).sum();
    let var = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y.max(0.0) * (x - peak as f64).powi(2))
        .sum::<f64>()
        / mass;
    let s0 = var.sqrt().clamp(0.5, half_window as f64);
    let f = |p: &DVector<f64>| {
        DVector::from_iterator(
            xs.len(),
            xs.iter().zip(&ys).map(|(x, y)| {
                let z = (x - p[1]) / p[2];
                p[0] * (-0.5 * z * z).exp() - y
            }),
        )
    };
    let jac = |p: &DVector<f64>| {
        let mut j = DMatrix::zeros(xs.len(), 3);
        for (i, x) in xs.iter().enumerate() {
            let z = (x - p[1]) / p[2];
            let e = (-0.5 * z * z).exp();
            j[(i, 0)] = e;
            j[(i, 1)] = p[0] * e * z / p[2];
            j[(i, 2)] = p[0] * e * z * z / p[2];
        }
        j
    };
    let x0 = DVector::from_vec(vec![ys[peak - lo], peak as f64, s0]);
    let sol = lm_solve(&f, Jacobian::Analytic(&jac), x0, lm).ok()?;
    if sol.report.termination == Termination::MaxIterations || sol.x.iter().any(|v| !v.is_finite())
    {
        return None;
    }
    let (a, mu, s) = (sol.x[0] * scale, sol.x[1], sol.x[2].abs());
    if mu < lo as f64 || mu > hi as f64 {
        return None;
    }
    Some(GaussianFit {
        amplitude: a,
        center: mu,
        sigma: s,
    })
}

fn has_secondary_peak(samples: &[f64], peak: usize, half_window: usize, ratio: f64) -> bool {
    let lo = peak.saturating_sub(half_window);
    let hi = (peak + half_window).min(samples.len() - 1);
    let primary = samples[peak];
    (lo..=hi).any(|x| {
        if x == peak || x == 0 || x + 1 >= samples.len() {
            return false;
        }
        let v = samples[x];
        v > samples[x - 1] && v >= samples[x + 1] && v > ratio * primary
    })
}

pub fn subpixel_refine(
    smoothed: &ImageBuffer,
    peaks: &[Option<usize>],
    params: &ExtractParams,
) -> LaserProfile {
    let hw = params.fit_half_window();
    let rows = peaks
        .par_iter()
        .enumerate()
        .map(|(y, peak)| {
            let Some(peak) = *peak else {
                return ProfileRow::invalid(y, InvalidReason::NoLaser);
            };
            let samples = smoothed.row(y);
            match fit_gaussian_window(samples, peak, hw, &params.lm) {
                Some(g) if g.sigma >= params.min_sigma && g.sigma <= params.max_sigma => {
                    ProfileRow {
                        row: y,
                        col: g.center,
                        amplitude: g.amplitude,
                        width_sigma: g.sigma,
                        valid: true,
                        reason: None,
                        multi_peak: has_secondary_peak(samples, peak, hw, params.multi_peak_ratio),
                    }
                }
                _ => ProfileRow::invalid(y, InvalidReason::FitFailed),
            }
        })
        .collect();
    LaserProfile {
        width: smoothed.width(),
        height: smoothed.height(),
        transposed: params.transpose,
        rows,
    }
}

/// Full RGB pipeline.
pub fn extract_profile(rgb: &ImageBuffer, color: LaserColor, params: &ExtractParams) -> LaserProfile {
    let diff = channel_difference(rgb, color);
    let diff = if params.transpose { diff.transposed() } else { diff };
    let dp = discrete_peaks(&diff, params);
    subpixel_refine(&dp.smoothed, &dp.peaks, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthProfile {
    pub profile: LaserProfile,
    /// Interpolated depth at each valid row's sub-pixel position.
    pub depth: Vec<Option<f64>>,
}

const DEPTH_EPS: f64 = 1e-6;

/// Inverse-distance weighted depth over the finite values of the 3x3
/// neighbourhood of the pixel nearest to `(u, v)`.
pub fn interpolate_depth(depth: &ImageBuffer, u: f64, v: f64) -> Option<f64> {
    let (w, h) = (depth.width() as isize, depth.height() as isize);
    let (cx, cy) = (u.round() as isize, v.round() as isize);
    let (mut sw, mut swd) = (0.0, 0.0);
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (x, y) = (cx + dx, cy + dy);
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            let d = depth.get(x as usize, y as usize);
            if !d.is_finite() {
                continue;
            }
            let dist = ((x as f64 - u).powi(2) + (y as f64 - v).powi(2)).sqrt();
            let wgt = 1.0 / (DEPTH_EPS + dist);
            sw += wgt;
            swd += wgt * d;
        }
    }
    (sw > 0.0).then(|| swd / sw)
}

/// Sub-pixel stripe position from the laser mask pass (Gaussian fit per row)
/// and the depth interpolated there. Rows whose mask support around the
/// peak is narrower than three pixels are invalid.
pub fn ground_truth_profile(
    mask: &ImageBuffer,
    depth: &ImageBuffer,
    params: &ExtractParams,
) -> GroundTruthProfile {
    assert!(mask.same_shape(depth), "mask and depth must be aligned");
    let (mask, depth) = if params.transpose {
        (mask.transposed(), depth.transposed())
    } else {
        (mask.clone(), depth.clone())
    };
    let hw = params.fit_half_window();
    let rows: Vec<ProfileRow> = (0..mask.height())
        .into_par_iter()
        .map(|y| {
            let row = mask.row(y);
            let mut best: Option<(usize, f64)> = None;
            for (x, &v) in row.iter().enumerate() {
                if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                    best = Some((x, v));
                }
            }
            let Some((peak, _)) = best else {
                return ProfileRow::invalid(y, InvalidReason::NoLaser);
            };
            let mut lo = peak;
            while lo > 0 && row[lo - 1] > 0.0 {
                lo -= 1;
            }
            let mut hi = peak;
            while hi + 1 < row.len() && row[hi + 1] > 0.0 {
                hi += 1;
            }
            if hi - lo + 1 < 3 {
                return ProfileRow::invalid(y, InvalidReason::ThinMask);
            }
            match fit_gaussian_window(row, peak, hw, &params.lm) {
                Some(g) => ProfileRow {
                    row: y,
                    col: g.center,
                    amplitude: g.amplitude,
                    width_sigma: g.sigma,
                    valid: true,
                    reason: None,
                    multi_peak: false,
                },
                None => ProfileRow::invalid(y, InvalidReason::FitFailed),
            }
        })
        .collect();
    let depth_vals = rows
        .iter()
        .map(|r| {
            r.valid
                .then(|| interpolate_depth(&depth, r.col, r.row as f64))
                .flatten()
        })
        .collect();
    GroundTruthProfile {
        profile: LaserProfile {
            width: mask.width(),
            height: mask.height(),
            transposed: params.transpose,
            rows,
        },
        depth: depth_vals,
    }
}
