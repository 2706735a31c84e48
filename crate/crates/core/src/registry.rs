//! Enrolled prefix templates and their on-disk form.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "PSREG" version:u8
//! params: s:u32 base_sigma:f32 assumed_blur:f32 octaves:u32(0=auto)
//!         contrast:f32 edge_ratio:f32 peak_ratio:f32 upsample:u8
//! min_template_features:u32 template_count:u32
//! per template:
//!   label_len:u32 label:utf8 width:u32 height:u32 source_hash:[u8;32]
//!   feature_count:u32
//!   per feature: x,y,sigma,orientation,contrast:f64 octave:u32 scale:u32
//!                descriptor:[f64;128]
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::sift::{extract_features, Descriptor, Keypoint, SiftParams, DESCRIPTOR_LEN};

pub const MAGIC: &[u8; 5] = b"PSREG";
pub const FORMAT_VERSION: u8 = b'1';
pub const DEFAULT_MIN_TEMPLATE_FEATURES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub label: String,
    pub image_size: (usize, usize),
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    pub source_hash: [u8; 32],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Registry {
    templates: Vec<Template>,
    extraction_params: SiftParams,
    min_template_features: usize,
}

/// SHA-256 over the dimensions and 8-bit pixels.
pub fn image_digest(img: &GrayImage) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((img.width() as u64).to_le_bytes());
    hasher.update((img.height() as u64).to_le_bytes());
    hasher.update(img.to_u8());
    hasher.finalize().into()
}

impl Registry {
    pub fn new(extraction_params: SiftParams) -> Self {
        Self {
            templates: Vec::new(),
            extraction_params,
            min_template_features: DEFAULT_MIN_TEMPLATE_FEATURES,
        }
    }

    pub fn with_min_template_features(mut self, n: usize) -> Self {
        self.min_template_features = n;
        self
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn extraction_params(&self) -> &SiftParams {
        &self.extraction_params
    }

    pub fn min_template_features(&self) -> usize {
        self.min_template_features
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.templates.iter().map(|t| t.label.as_str())
    }

    pub fn lookup(&self, label: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.label == label)
    }

    /// Extracts features from `img` and returns a registry with the new
    /// template appended. `self` is left untouched.
    pub fn enroll(&self, label: &str, img: &GrayImage) -> Result<Registry> {
        if label.is_empty() {
            return Err(Error::Parameter("template label must be non-empty".into()));
        }
        if self.lookup(label).is_some() {
            return Err(Error::Conflict(label.to_string()));
        }
        let features = match extract_features(img, &self.extraction_params) {
            Ok(f) => f,
            Err(Error::Dimension(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
        if features.len() < self.min_template_features {
            return Err(Error::InsufficientFeatures {
                found: features.len(),
                needed: self.min_template_features,
            });
        }
        let (keypoints, descriptors) = features.into_iter().map(|f| (f.keypoint, f.descriptor)).unzip();
        let mut next = self.clone();
        next.templates.push(Template {
            label: label.to_string(),
            image_size: img.dimensions(),
            keypoints,
            descriptors,
            source_hash: image_digest(img),
        });
        Ok(next)
    }

    /// Combines two registries built with identical extraction parameters.
    pub fn merge(&self, other: &Registry) -> Result<Registry> {
        if self.extraction_params != other.extraction_params {
            return Err(Error::ParamsMismatch);
        }
        let mut next = self.clone();
        for t in &other.templates {
            if next.lookup(&t.label).is_some() {
                return Err(Error::Conflict(t.label.clone()));
            }
            next.templates.push(t.clone());
        }
        Ok(next)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        w.push(FORMAT_VERSION);
        let p = &self.extraction_params;
        put_u32(&mut w, p.scales_per_octave as u32);
        w.extend_from_slice(&p.base_sigma.to_le_bytes());
        w.extend_from_slice(&p.assumed_blur.to_le_bytes());
        put_u32(&mut w, p.octave_count.unwrap_or(0) as u32);
        w.extend_from_slice(&p.contrast_threshold.to_le_bytes());
        w.extend_from_slice(&p.edge_ratio.to_le_bytes());
        w.extend_from_slice(&p.orientation_peak_ratio.to_le_bytes());
        w.push(u8::from(p.upsample));
        put_u32(&mut w, self.min_template_features as u32);
        put_u32(&mut w, self.templates.len() as u32);
        for t in &self.templates {
            put_u32(&mut w, t.label.len() as u32);
            w.extend_from_slice(t.label.as_bytes());
            put_u32(&mut w, t.image_size.0 as u32);
            put_u32(&mut w, t.image_size.1 as u32);
            w.extend_from_slice(&t.source_hash);
            put_u32(&mut w, t.keypoints.len() as u32);
            for (k, d) in t.keypoints.iter().zip(&t.descriptors) {
                for v in [k.x, k.y, k.sigma, k.orientation, k.contrast] {
                    w.extend_from_slice(&v.to_le_bytes());
                }
                put_u32(&mut w, k.octave as u32);
                put_u32(&mut w, k.scale_index as u32);
                for v in d.as_slice() {
                    w.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Registry> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Malformed("bad magic".into()));
        }
        let version = r.u8()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version(version));
        }
        let scales_per_octave = r.u32()? as usize;
        let base_sigma = r.f32()?;
        let assumed_blur = r.f32()?;
        let octaves = r.u32()? as usize;
        let contrast_threshold = r.f32()?;
        let edge_ratio = r.f32()?;
        let orientation_peak_ratio = r.f32()?;
        let upsample = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Malformed(format!("bad upsample flag {other}"))),
        };
        let extraction_params = SiftParams {
            scales_per_octave,
            base_sigma,
            assumed_blur,
            octave_count: (octaves > 0).then_some(octaves),
            contrast_threshold,
            edge_ratio,
            orientation_peak_ratio,
            upsample,
        };
        let min_template_features = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut templates = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let label = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Malformed("label is not UTF-8".into()))?
                .to_string();
            if label.is_empty() || templates.iter().any(|t: &Template| t.label == label) {
                return Err(Error::Malformed(format!("empty or duplicate label `{label}`")));
            }
            let image_size = (r.u32()? as usize, r.u32()? as usize);
            let source_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
            let n = r.u32()? as usize;
            let mut keypoints = Vec::with_capacity(n.min(1 << 16));
            let mut descriptors = Vec::with_capacity(n.min(1 << 16));
            for _ in 0..n {
                let x = r.f64()?;
                let y = r.f64()?;
                let sigma = r.f64()?;
                let orientation = r.f64()?;
                let contrast = r.f64()?;
                let octave = r.u32()? as usize;
                let scale_index = r.u32()? as usize;
                keypoints.push(Keypoint {
                    x,
                    y,
                    sigma,
                    orientation,
                    octave,
                    scale_index,
                    contrast,
                });
                let mut v = [0.0; DESCRIPTOR_LEN];
                for c in &mut v {
                    *c = r.f64()?;
                }
                descriptors.push(Descriptor::from_array(v));
            }
            templates.push(Template {
                label,
                image_size,
                keypoints,
                descriptors,
                source_hash,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Registry {
            templates,
            extraction_params,
            min_template_features,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Registry> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
