//! Float image buffers and their on-disk formats.
//!
//! PFM layout: `PF\n` (3 channels) or `Pf\n` (1 channel), then
//! `{width} {height}\n-1.0\n`, then little-endian `f32` samples with the
//! bottom image row first.

use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed PFM: {0}")]
    Format(String),
    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
}

/// Row-major float image with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        assert_eq!(data.len(), width * height * channels, "buffer size");
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        let n = self.width * self.channels;
        &self.data[y * n..(y + 1) * n]
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, f64> {
        let n = self.width * self.channels;
        self.data.chunks_mut(n.max(1))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Swaps rows and columns.
    pub fn transposed(&self) -> Self {
        let mut out = Self::new(self.height, self.width, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                out.pixel_mut(y, x).copy_from_slice(self.pixel(x, y));
            }
        }
        out
    }

    /// Channel mean as a single-channel image.
    pub fn to_gray(&self) -> Self {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (p[0] + p[1] + p[2]) / 3.0)
            .collect();
        Self::from_vec(self.width, self.height, 1, data)
    }

    /// Separable Gaussian blur of a single-channel image, kernel truncated at
    /// `radius` and renormalized, edges clamped.
    pub fn gaussian_blur(&self, sigma: f64, radius: usize) -> Self {
        assert_eq!(self.channels, 1, "blur expects one channel");
        let r = radius as isize;
        let mut kernel: Vec<f64> = (-r..=r)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);
        let (w, h) = (self.width as isize, self.height as isize);
        let mut tmp = vec![0.0; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let xx = (x + k as isize - r).clamp(0, w - 1);
                    acc += kv * self.data[(y * w + xx) as usize];
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let mut out = vec![0.0; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let yy = (y + k as isize - r).clamp(0, h - 1);
                    acc += kv * tmp[(yy * w + x) as usize];
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        Self::from_vec(self.width, self.height, 1, out)
    }

    /// Bilinear sample of channel 0 with clamped coordinates.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let (x, y) = (x.clamp(0.0, xm), y.clamp(0.0, ym));
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn write_pfm(&self, w: &mut impl Write) -> Result<(), ImageError> {
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        write!(w, "{tag}\n{} {}\n-1.0\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for y in (0..self.height).rev() {
            for v in self.row(y) {
                buf.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_pfm(r: &mut impl BufRead) -> Result<Self, ImageError> {
        let fmt = |m: &str| ImageError::Format(m.to_string());
        let mut line = String::new();
        r.read_line(&mut line)?;
        let channels = match line.trim() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(fmt(&format!("unknown tag {other:?}"))),
        };
        line.clear();
        r.read_line(&mut line)?;
        let dims: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| fmt("bad dimensions")))
            .collect::<Result<_, _>>()?;
        let [width, height] = dims[..] else {
            return Err(fmt("expected width and height"));
        };
        line.clear();
        r.read_line(&mut line)?;
        let scale: f64 = line.trim().parse().map_err(|_| fmt("bad scale"))?;
        if scale == 0.0 {
            return Err(fmt("zero scale"));
        }
        let mut raw = vec![0u8; width * height * channels * 4];
        r.read_exact(&mut raw)?;
        let mut data = vec![0.0; width * height * channels];
        let row_len = width * channels;
        for (k, chunk) in raw.chunks_exact(4).enumerate() {
            let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if scale < 0.0 {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            let (file_row, col) = (k / row_len, k % row_len);
            let y = height - 1 - file_row;
            data[y * row_len + col] = v as f64;
        }
        Ok(Self::from_vec(width, height, channels, data))
    }

    /// 8-bit preview: clamp to [0, 1], gamma 2.2.
    pub fn write_png_preview(&self, w: impl Write) -> Result<(), ImageError> {
        let mut enc = png::Encoder::new(w, self.width as u32, self.height as u32);
        enc.set_color(if self.channels == 3 {
            png::ColorType::Rgb
        } else {
            png::ColorType::Grayscale
        });
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| {
                let c = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
                (c.powf(1.0 / 2.2) * 255.0).round() as u8
            })
            .collect();
        writer.write_image_data(&bytes)?;
        writer.finish()?;
        Ok(())
    }
}
