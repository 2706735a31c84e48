//! Raster primitives shared by every stage of the pipeline.
//!
//! Intensities are stored as `f32` in `[0, 1]`; 8-bit values only appear at
//! the I/O boundary.

mod binary;
mod draw;
mod filter;
pub mod io;

pub use binary::{binarize, dilate_horizontal, label_blobs, otsu_threshold, BinaryImage, Blob, Threshold};
pub use draw::{draw_line, draw_quad};
pub use filter::{downsample_half, gaussian_blur, gaussian_kernel, resize_bilinear, sobel_vertical};

use crate::error::{Error, Result};

/// Single-channel raster with row-major `f32` samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    /// Wraps raw samples. Values are clamped into `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, mut data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("{width}x{height} image")));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        assert!(width >= 1 && height >= 1, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
        Self::from_vec(width, height, data)
    }

    /// Quantizes to 8 bits, rounding half up.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample at a real-valued position, edge-replicated.
    pub fn sample_bilinear(&self, x: f32, y: f32) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let a = self.get_clamped(xi, yi);
        let b = self.get_clamped(xi + 1, yi);
        let c = self.get_clamped(xi, yi + 1);
        let d = self.get_clamped(xi + 1, yi + 1);
        let top = a + (b - a) * fx;
        let bottom = c + (d - c) * fx;
        top + (bottom - top) * fy
    }

    /// Copies the inclusive rectangle `[x0, x1] × [y0, y1]`.
    pub fn crop(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x0 > x1 || y0 > y1 || x1 >= self.width || y1 >= self.height {
            return Err(Error::Dimension(format!(
                "crop ({x0},{y0})-({x1},{y1}) outside {}x{} image",
                self.width, self.height
            )));
        }
        let w = x1 - x0 + 1;
        let h = y1 - y0 + 1;
        let mut data = Vec::with_capacity(w * h);
        for y in y0..=y1 {
            data.extend_from_slice(&self.data[y * self.width + x0..=y * self.width + x1]);
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }
}

#[inline]
pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Interleaved 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `width * height * 3` bytes, RGBRGB...
    pub data: Vec<u8>,
}

impl RgbImage {
    /// Builds an interleaved raster from three separate channel planes.
    pub fn from_planes(
        width: usize,
        height: usize,
        r: &[u8],
        g: &[u8],
        b: &[u8],
    ) -> Result<Self> {
        let n = width * height;
        if r.len() != n || g.len() != n || b.len() != n {
            return Err(Error::Dimension(format!(
                "channel planes of lengths {}, {}, {} for a {width}x{height} image",
                r.len(),
                g.len(),
                b.len()
            )));
        }
        let mut data = Vec::with_capacity(3 * n);
        for i in 0..n {
            data.extend_from_slice(&[r[i], g[i], b[i]]);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }
}

/// Broadcast luma `0.299 R + 0.587 G + 0.114 B`, rounded half up.
pub fn to_grayscale(rgb: &RgbImage) -> Result<GrayImage> {
    if rgb.width == 0 || rgb.height == 0 || rgb.data.len() != rgb.width * rgb.height * 3 {
        return Err(Error::Dimension(format!(
            "{} bytes for a {}x{} RGB image",
            rgb.data.len(),
            rgb.width,
            rgb.height
        )));
    }
    let bytes: Vec<u8> = rgb
        .data
        .chunks_exact(3)
        .map(|p| {
            // integer form keeps the half-up rounding exact
            let y = 299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
            ((y + 500) / 1000) as u8
        })
        .collect();
    GrayImage::from_u8(rgb.width, rgb.height, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(r: u8, g: u8, b: u8) -> RgbImage {
        RgbImage {
            width: 2,
            height: 2,
            data: [r, g, b].repeat(4),
        }
    }

    #[test]
    fn luma_white_stays_white() {
        let g = to_grayscale(&solid(255, 255, 255)).unwrap();
        assert!(g.to_u8().iter().all(|&v| v == 255));
    }

    #[test]
    fn luma_pure_red() {
        // 0.299 * 255 = 76.245
        let g = to_grayscale(&solid(255, 0, 0)).unwrap();
        assert_eq!(g.to_u8(), vec![76; 4]);
    }

    #[test]
    fn luma_gray_is_fixed_point() {
        for v in 0..=255u8 {
            let g = to_grayscale(&solid(v, v, v)).unwrap();
            assert_eq!(g.to_u8()[0], v);
        }
    }

    #[test]
    fn mismatched_planes_rejected() {
        let err = RgbImage::from_planes(2, 2, &[0; 4], &[0; 3], &[0; 4]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        let bad = RgbImage {
            width: 2,
            height: 2,
            data: vec![0; 11],
        };
        assert!(matches!(to_grayscale(&bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn u8_round_trip() {
        let bytes: Vec<u8> = (0..=255).collect();
        let img = GrayImage::from_u8(16, 16, &bytes).unwrap();
        assert_eq!(img.to_u8(), bytes);
    }

    #[test]
    fn crop_bounds() {
        let img = GrayImage::from_fn(10, 5, |x, y| (x + y) as f32 / 20.0);
        let c = img.crop(2, 1, 4, 3).unwrap();
        assert_eq!(c.dimensions(), (3, 3));
        assert_eq!(c.get(0, 0), img.get(2, 1));
        assert!(img.crop(2, 1, 10, 3).is_err());
    }
}
