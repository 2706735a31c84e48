use crate::error::{Error, Result};
use crate::image::{downsample_half, gaussian_blur, resize_bilinear, GrayImage};

use super::SiftParams;

/// Smallest octave side the pyramid may produce.
pub const MIN_OCTAVE_SIDE: usize = 8;

/// One resolution level: `s + 3` progressively blurred images.
#[derive(Clone, Debug)]
pub struct Octave {
    pub images: Vec<GrayImage>,
    /// Absolute blur of each image, in input-image pixels.
    pub sigmas: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct ScaleSpace {
    pub octaves: Vec<Octave>,
    pub base_sigma: f32,
    pub scales_per_octave: usize,
    /// Input pixels per octave-0 pixel (0.5 when the input was upsampled).
    pub base_step: f32,
}

impl ScaleSpace {
    /// Input-image pixels per pixel of octave `o`.
    pub fn step(&self, octave: usize) -> f32 {
        self.base_step * (1u32 << octave) as f32
    }
}

/// Signed real-valued plane (DoG values may be negative).
#[derive(Clone, Debug, PartialEq)]
pub struct DogImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DogImage {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

#[derive(Clone, Debug)]
pub struct DogSpace {
    /// `s + 2` difference images per octave.
    pub octaves: Vec<Vec<DogImage>>,
}

fn auto_octaves(w: usize, h: usize) -> usize {
    let m = w.min(h);
    if m == 0 {
        return 0;
    }
    let log2 = usize::BITS - 1 - m.leading_zeros();
    (log2 as usize).saturating_sub(3)
}

/// Builds the Gaussian pyramid.
///
/// The input is assumed to carry `params.assumed_blur`; it is blurred up to
/// `base_sigma` and each octave image `i` then has blur `base_sigma·k^i`
/// relative to its own sampling grid, `k = 2^(1/s)`.
pub fn build_scale_space(img: &GrayImage, params: &SiftParams) -> Result<ScaleSpace> {
    let s = params.scales_per_octave;
    if s < 2 {
        return Err(Error::Parameter(format!("scales per octave must be >= 2, got {s}")));
    }
    if !(params.base_sigma > 0.0) {
        return Err(Error::Parameter("base sigma must be > 0".into()));
    }

    let (seed, base_step, assumed) = if params.upsample {
        let up = resize_bilinear(img, img.width() * 2, img.height() * 2)?;
        (up, 0.5f32, params.assumed_blur * 2.0)
    } else {
        (img.clone(), 1.0f32, params.assumed_blur)
    };
    let (w, h) = seed.dimensions();
    let octave_count = match params.octave_count {
        Some(n) => n,
        None => auto_octaves(w, h),
    };
    if octave_count == 0 || (w.min(h) >> (octave_count - 1)) < MIN_OCTAVE_SIDE {
        return Err(Error::Dimension(format!(
            "{}x{} image too small for {} octave(s) of at least {MIN_OCTAVE_SIDE}px",
            img.width(),
            img.height(),
            octave_count.max(1)
        )));
    }

    let k = 2f32.powf(1.0 / s as f32);
    let rel: Vec<f32> = (0..s + 3).map(|i| params.base_sigma * k.powi(i as i32)).collect();
    let increments: Vec<f32> = (1..s + 3)
        .map(|i| (rel[i] * rel[i] - rel[i - 1] * rel[i - 1]).sqrt())
        .collect();

    let initial = (params.base_sigma * params.base_sigma - assumed * assumed).max(0.01).sqrt();
    let mut current = gaussian_blur(&seed, initial)?;
    let mut octaves = Vec::with_capacity(octave_count);
    for o in 0..octave_count {
        let mut images = Vec::with_capacity(s + 3);
        images.push(current.clone());
        for inc in &increments {
            let next = gaussian_blur(images.last().unwrap(), *inc)?;
            images.push(next);
        }
        let step = base_step * (1u32 << o) as f32;
        let sigmas = rel.iter().map(|r| r * step).collect();
        if o + 1 < octave_count {
            // image s carries twice the base blur
            current = downsample_half(&images[s])?;
        }
        octaves.push(Octave { images, sigmas });
    }

    Ok(ScaleSpace {
        octaves,
        base_sigma: params.base_sigma,
        scales_per_octave: s,
        base_step,
    })
}

/// Adjacent differences `G[i+1] − G[i]` within each octave.
pub fn compute_dog(ss: &ScaleSpace) -> DogSpace {
    let octaves = ss
        .octaves
        .iter()
        .map(|oct| {
            oct.images
                .windows(2)
                .map(|pair| {
                    let (w, h) = pair[0].dimensions();
                    DogImage {
                        width: w,
                        height: h,
                        data: pair[1]
                            .data()
                            .iter()
                            .zip(pair[0].data())
                            .map(|(b, a)| b - a)
                            .collect(),
                    }
                })
                .collect()
        })
        .collect();
    DogSpace { octaves }
}
