//! `key = value` pipeline configuration shared by every command.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.
//! Keys left out keep their defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::detector::DetectorParams;
use crate::error::{Error, Result};
use crate::image::Threshold;
use crate::recognition::PipelineParams;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub pipeline: PipelineParams,
    pub detector: DetectorParams,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.pipeline;
        let d = &mut self.detector;
        match key {
            "sift.scales_per_octave" => p.sift.scales_per_octave = parse(key, value)?,
            "sift.base_sigma" => p.sift.base_sigma = parse(key, value)?,
            "sift.assumed_blur" => p.sift.assumed_blur = parse(key, value)?,
            "sift.octave_count" => {
                p.sift.octave_count = match value {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "sift.contrast_threshold" => p.sift.contrast_threshold = parse(key, value)?,
            "sift.edge_ratio" => p.sift.edge_ratio = parse(key, value)?,
            "sift.orientation_peak_ratio" => p.sift.orientation_peak_ratio = parse(key, value)?,
            "sift.upsample" => p.sift.upsample = parse_bool(key, value)?,
            "match.ratio" => p.ratio = parse(key, value)?,
            "ransac.inlier_threshold" => p.robust.inlier_threshold = parse(key, value)?,
            "ransac.max_iters" => p.robust.max_iters = parse(key, value)?,
            "ransac.confidence" => p.robust.confidence = parse(key, value)?,
            "ransac.min_inliers" => p.robust.min_inliers = parse(key, value)?,
            "ransac.seed" => p.robust.seed = parse(key, value)?,
            "verify.min_area_ratio" => p.quad_area_range.0 = parse(key, value)?,
            "verify.max_area_ratio" => p.quad_area_range.1 = parse(key, value)?,
            "preprocess.margin" => p.preprocess.margin = parse(key, value)?,
            "preprocess.low_percentile" => p.preprocess.low_percentile = parse(key, value)?,
            "preprocess.high_percentile" => p.preprocess.high_percentile = parse(key, value)?,
            "detector.dilation_half_width" => d.dilation_half_width = parse(key, value)?,
            "detector.min_area" => d.area_range.0 = parse(key, value)?,
            "detector.max_area" => d.area_range.1 = parse(key, value)?,
            "detector.min_aspect" => d.aspect_range.0 = parse(key, value)?,
            "detector.max_aspect" => d.aspect_range.1 = parse(key, value)?,
            "detector.min_compactness" => d.min_compactness = parse(key, value)?,
            "detector.min_fill_ratio" => d.fill_ratio_range.0 = parse(key, value)?,
            "detector.max_fill_ratio" => d.fill_ratio_range.1 = parse(key, value)?,
            "detector.threshold" => {
                d.threshold = match value {
                    "otsu" => Threshold::Otsu,
                    v => Threshold::Fixed(parse(key, v)?),
                }
            }
            "detector.roi" => {
                d.roi = match value {
                    "none" => None,
                    v => {
                        let parts: Vec<usize> = v
                            .split(',')
                            .map(|s| parse(key, s.trim()))
                            .collect::<Result<_>>()?;
                        match parts[..] {
                            [x0, y0, x1, y1] if x0 <= x1 && y0 <= y1 => Some((x0, y0, x1, y1)),
                            _ => return Err(Error::Config(format!("`{key}` wants x0,y0,x1,y1, got `{v}`"))),
                        }
                    }
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.detector.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.pipeline;
        let d = &self.detector;
        writeln!(f, "sift.scales_per_octave = {}", p.sift.scales_per_octave)?;
        writeln!(f, "sift.base_sigma = {}", p.sift.base_sigma)?;
        writeln!(f, "sift.assumed_blur = {}", p.sift.assumed_blur)?;
        match p.sift.octave_count {
            Some(n) => writeln!(f, "sift.octave_count = {n}")?,
            None => writeln!(f, "sift.octave_count = auto")?,
        }
        writeln!(f, "sift.contrast_threshold = {}", p.sift.contrast_threshold)?;
        writeln!(f, "sift.edge_ratio = {}", p.sift.edge_ratio)?;
        writeln!(f, "sift.orientation_peak_ratio = {}", p.sift.orientation_peak_ratio)?;
        writeln!(f, "sift.upsample = {}", p.sift.upsample)?;
        writeln!(f, "match.ratio = {}", p.ratio)?;
        writeln!(f, "ransac.inlier_threshold = {}", p.robust.inlier_threshold)?;
        writeln!(f, "ransac.max_iters = {}", p.robust.max_iters)?;
        writeln!(f, "ransac.confidence = {}", p.robust.confidence)?;
        writeln!(f, "ransac.min_inliers = {}", p.robust.min_inliers)?;
        writeln!(f, "ransac.seed = {}", p.robust.seed)?;
        writeln!(f, "verify.min_area_ratio = {}", p.quad_area_range.0)?;
        writeln!(f, "verify.max_area_ratio = {}", p.quad_area_range.1)?;
        writeln!(f, "preprocess.margin = {}", p.preprocess.margin)?;
        writeln!(f, "preprocess.low_percentile = {}", p.preprocess.low_percentile)?;
        writeln!(f, "preprocess.high_percentile = {}", p.preprocess.high_percentile)?;
        writeln!(f, "detector.dilation_half_width = {}", d.dilation_half_width)?;
        writeln!(f, "detector.min_area = {}", d.area_range.0)?;
        writeln!(f, "detector.max_area = {}", d.area_range.1)?;
        writeln!(f, "detector.min_aspect = {}", d.aspect_range.0)?;
        writeln!(f, "detector.max_aspect = {}", d.aspect_range.1)?;
        writeln!(f, "detector.min_compactness = {}", d.min_compactness)?;
        writeln!(f, "detector.min_fill_ratio = {}", d.fill_ratio_range.0)?;
        writeln!(f, "detector.max_fill_ratio = {}", d.fill_ratio_range.1)?;
        match d.threshold {
            Threshold::Otsu => writeln!(f, "detector.threshold = otsu")?,
            Threshold::Fixed(t) => writeln!(f, "detector.threshold = {t}")?,
        }
        match d.roi {
            Some((x0, y0, x1, y1)) => writeln!(f, "detector.roi = {x0},{y0},{x1},{y1}"),
            None => writeln!(f, "detector.roi = none"),
        }
    }
}
