use super::GrayImage;
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian taps, radius `ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Result<Vec<f32>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    let radius = (4.0 * sigma).ceil() as isize;
    let denom = 2.0 * f64::from(sigma) * f64::from(sigma);
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.iter().map(|t| (t / sum) as f32).collect())
}

/// Separable Gaussian blur with edge replication.
///
/// Each output is accumulated as `center + Σ w·(neighbor − center)`, which
/// equals the plain weighted sum for a normalized kernel but leaves constant
/// regions bit-exact.
pub fn gaussian_blur(img: &GrayImage, sigma: f32) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma)?;
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = img.dimensions();
    let src = img.data();

    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let c = row[x];
            let mut acc = 0f32;
            for (k, &wt) in kernel.iter().enumerate() {
                let xx = (x as isize + k as isize - radius).clamp(0, w as isize - 1) as usize;
                acc += wt * (row[xx] - c);
            }
            tmp[y * w + x] = c + acc;
        }
    }

    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let c = tmp[y * w + x];
            let mut acc = 0f32;
            for (k, &wt) in kernel.iter().enumerate() {
                let yy = (y as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
                acc += wt * (tmp[yy * w + x] - c);
            }
            out[y * w + x] = (c + acc).clamp(0.0, 1.0);
        }
    }
    Ok(GrayImage::from_raw_unchecked(w, h, out))
}

/// Keeps every second pixel: output `(x, y)` = input `(2x, 2y)`.
pub fn downsample_half(img: &GrayImage) -> Result<GrayImage> {
    let (w, h) = img.dimensions();
    if w < 2 || h < 2 {
        return Err(Error::Dimension(format!("cannot halve a {w}x{h} image")));
    }
    let (ow, oh) = (w / 2, h / 2);
    let mut data = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            data.push(img.get(2 * x, 2 * y));
        }
    }
    Ok(GrayImage::from_raw_unchecked(ow, oh, data))
}

/// Absolute horizontal-derivative Sobel response (vertical edges), clamped
/// to `[0, 1]`, with a zero one-pixel border.
pub fn sobel_vertical(img: &GrayImage) -> Result<GrayImage> {
    let (w, h) = img.dimensions();
    if w < 3 || h < 3 {
        return Err(Error::Dimension(format!("{w}x{h} image is smaller than the 3x3 Sobel kernel")));
    }
    let s = img.data();
    let mut out = vec![0f32; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let up = (y - 1) * w;
            let mid = y * w;
            let dn = (y + 1) * w;
            let gx = (s[up + x + 1] - s[up + x - 1])
                + 2.0 * (s[mid + x + 1] - s[mid + x - 1])
                + (s[dn + x + 1] - s[dn + x - 1]);
            out[mid + x] = gx.abs().min(1.0);
        }
    }
    Ok(GrayImage::from_raw_unchecked(w, h, out))
}

/// Bilinear resize using pixel-center alignment. When shrinking, the source
/// is pre-blurred to limit aliasing.
pub fn resize_bilinear(img: &GrayImage, new_width: usize, new_height: usize) -> Result<GrayImage> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::Dimension(format!("cannot resize to {new_width}x{new_height}")));
    }
    let (w, h) = img.dimensions();
    let sx = w as f32 / new_width as f32;
    let sy = h as f32 / new_height as f32;
    let shrink = sx.max(sy);
    let blurred;
    let src = if shrink > 1.0 {
        blurred = gaussian_blur(img, 0.5 * (shrink * shrink - 1.0).sqrt().max(0.1))?;
        &blurred
    } else {
        img
    };
    Ok(GrayImage::from_fn(new_width, new_height, |x, y| {
        let u = (x as f32 + 0.5) * sx - 0.5;
        let v = (y as f32 + 0.5) * sy - 0.5;
        src.sample_bilinear(u, v)
    }))
}
