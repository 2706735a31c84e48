//! Deterministic synthetic plates: italic word templates composited onto
//! plate backgrounds with block-glyph digits, plus noise and blur.

mod font;

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::{write_manifest, GroundTruth, ManifestEntry};
use crate::homography::Quad;
use crate::image::io::{read_gray, write_pgm};
use crate::image::{gaussian_blur, GrayImage};
use crate::registry::Registry;

pub use font::{glyph, GLYPH_H, GLYPH_W};

pub const BACKGROUND: f32 = 0.1;
pub const INK: f32 = 0.9;
const FRAME: f32 = 0.8;

/// Rendering of an enrolled prefix word: glyph cells joined by round pen
/// strokes, sheared, with a ligature along the baseline between letters.
#[derive(Clone, Debug, PartialEq)]
pub struct WordStyle {
    /// Width of the text body in pixels; long words get narrower glyphs.
    pub text_width: f64,
    /// Height of one glyph row in pixels.
    pub row_height: f64,
    /// Pen radius as a fraction of the smaller cell side.
    pub pen: f64,
    /// Horizontal shift per pixel of height above the baseline.
    pub shear: f64,
    pub padding: usize,
    pub supersample: usize,
}

impl Default for WordStyle {
    fn default() -> Self {
        Self {
            text_width: 220.0,
            row_height: 7.0,
            pen: 0.35,
            shear: 0.3,
            padding: 10,
            supersample: 4,
        }
    }
}

fn glyphs_of(text: &str) -> Result<Vec<[[bool; GLYPH_W]; GLYPH_H]>> {
    if text.is_empty() {
        return Err(Error::Parameter("empty text".into()));
    }
    text.chars()
        .map(|c| glyph(c).ok_or_else(|| Error::Parameter(format!("no glyph for `{c}`"))))
        .collect()
}

type Segment = ((f64, f64), (f64, f64));

/// Pen strokes of one glyph in cell units: every pair of 4-neighbour lit
/// cells, diagonal pairs without a shared lit neighbour, and lone dots.
fn glyph_strokes(g: &[[bool; GLYPH_W]; GLYPH_H]) -> Vec<Segment> {
    let lit = |r: isize, c: isize| {
        r >= 0 && c >= 0 && (r as usize) < GLYPH_H && (c as usize) < GLYPH_W && g[r as usize][c as usize]
    };
    let centre = |r: isize, c: isize| (c as f64 + 0.5, r as f64 + 0.5);
    let mut out = Vec::new();
    for r in 0..GLYPH_H as isize {
        for c in 0..GLYPH_W as isize {
            if !lit(r, c) {
                continue;
            }
            let mut joined = false;
            for (dr, dc) in [(0, 1), (1, 0), (1, 1), (1, -1)] {
                let (nr, nc) = (r + dr, c + dc);
                if !lit(nr, nc) {
                    continue;
                }
                if dr != 0 && dc != 0 && (lit(r, nc) || lit(nr, c)) {
                    continue;
                }
                out.push((centre(r, c), centre(nr, nc)));
                joined = true;
            }
            let has_prev = [(0, -1), (-1, 0), (-1, -1), (-1, 1)].iter().any(|(dr, dc)| lit(r + dr, c + dc));
            if !joined && !has_prev {
                out.push((centre(r, c), centre(r, c)));
            }
        }
    }
    out
}

fn segment_distance((x, y): (f64, f64), ((ax, ay), (bx, by)): Segment) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x - ax - t * dx).hypot(y - ay - t * dy)
}

/// Renders `text` as a light italic word on a dark background.
pub fn render_word(text: &str, style: &WordStyle) -> Result<GrayImage> {
    let glyphs = glyphs_of(text)?;
    let n = glyphs.len();
    let cols = n * (GLYPH_W + 1) - 1;
    let (cw, ch) = (style.text_width / cols as f64, style.row_height);
    let text_h = ch * GLYPH_H as f64;
    let pad = style.padding as f64;
    let w = (style.text_width + style.shear * text_h + 2.0 * pad).ceil() as usize;
    let h = (text_h + 2.0 * pad).ceil() as usize;
    let radius = style.pen * cw.min(ch);

    // strokes per letter in pixel units of the unsheared text box
    let pitch = (GLYPH_W + 1) as f64 * cw;
    let to_px = |x0: f64, (u, v): (f64, f64)| (x0 + u * cw, v * ch);
    let mut strokes: Vec<Vec<Segment>> = glyphs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let x0 = i as f64 * pitch;
            glyph_strokes(g)
                .into_iter()
                .map(|(a, b)| (to_px(x0, a), to_px(x0, b)))
                .collect()
        })
        .collect();
    for i in 0..n.saturating_sub(1) {
        let base = (GLYPH_H as f64 - 0.5) * ch;
        let a = (i as f64 * pitch + (GLYPH_W as f64 - 0.5) * cw, base);
        let b = ((i + 1) as f64 * pitch + 0.5 * cw, base);
        strokes[i].push((a, b));
    }

    let ss = style.supersample.max(1);
    Ok(GrayImage::from_fn(w, h, |x, y| {
        let mut hits = 0;
        for sy in 0..ss {
            for sx in 0..ss {
                let py = y as f64 + (sy as f64 + 0.5) / ss as f64 - pad;
                let px = x as f64 + (sx as f64 + 0.5) / ss as f64 - pad - style.shear * (text_h - py);
                let letter = (px / pitch).floor();
                let near = (letter as isize - 1).max(0)..=(letter as isize + 1).min(n as isize - 1);
                let inked = near
                    .flat_map(|i| strokes[i as usize].iter())
                    .any(|&s| segment_distance((px, py), s) <= radius);
                if inked {
                    hits += 1;
                }
            }
        }
        let a = hits as f32 / (ss * ss) as f32;
        BACKGROUND + a * (INK - BACKGROUND)
    }))
}

/// Draws upright block glyphs with their top-left corner at `origin`.
pub fn draw_block_text(img: &mut GrayImage, text: &str, origin: (usize, usize), cell: usize) -> Result<()> {
    let glyphs = glyphs_of(text.trim())?;
    for (i, g) in glyphs.iter().enumerate() {
        let x0 = origin.0 + i * (GLYPH_W + 1) * cell;
        for (r, row) in g.iter().enumerate() {
            for (c, &on) in row.iter().enumerate() {
                if !on {
                    continue;
                }
                for dy in 0..cell {
                    for dx in 0..cell {
                        let (x, y) = (x0 + c * cell + dx, origin.1 + r * cell + dy);
                        if x < img.width() && y < img.height() {
                            img.set(x, y, INK);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Width in pixels of `n` block glyphs.
pub fn block_text_width(n: usize, cell: usize) -> usize {
    (n * (GLYPH_W + 1)).saturating_sub(1) * cell
}

/// Empty plate: dark field inside a thin light frame.
pub fn blank_plate(size: (usize, usize)) -> GrayImage {
    let (w, h) = size;
    GrayImage::from_fn(w, h, |x, y| {
        if x < 3 || y < 3 || x + 3 >= w || y + 3 >= h {
            FRAME
        } else {
            BACKGROUND
        }
    })
}

/// Similarity placement of a template on a plate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub rotation_deg: f64,
    pub scale: f64,
    /// Plate position of the template centre.
    pub center: (f64, f64),
}

impl Placement {
    fn forward(&self, template_size: (usize, usize)) -> impl Fn(f64, f64) -> (f64, f64) {
        let (cx, cy) = ((template_size.0 as f64 - 1.0) / 2.0, (template_size.1 as f64 - 1.0) / 2.0);
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (k, (px, py)) = (self.scale, self.center);
        move |x, y| {
            let (dx, dy) = (x - cx, y - cy);
            (px + k * (c * dx - s * dy), py + k * (s * dx + c * dy))
        }
    }

    fn inverse(&self, template_size: (usize, usize)) -> impl Fn(f64, f64) -> (f64, f64) {
        let (cx, cy) = ((template_size.0 as f64 - 1.0) / 2.0, (template_size.1 as f64 - 1.0) / 2.0);
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (k, (px, py)) = (self.scale, self.center);
        move |x, y| {
            let (dx, dy) = ((x - px) / k, (y - py) / k);
            (cx + c * dx + s * dy, cy - s * dx + c * dy)
        }
    }

    /// Template corners in plate coordinates, in `project_quad` order.
    pub fn quad(&self, template_size: (usize, usize)) -> Quad {
        let f = self.forward(template_size);
        let (w, h) = (template_size.0 as f64 - 1.0, template_size.1 as f64 - 1.0);
        [f(0.0, 0.0), f(w, 0.0), f(w, h), f(0.0, h)]
    }
}

/// Pastes the ink of `template` onto `plate` under `placement`, using the
/// template's brightness above background as coverage.
pub fn paste_template(plate: &mut GrayImage, template: &GrayImage, placement: &Placement) {
    let inv = placement.inverse(template.dimensions());
    let (tw, th) = (template.width() as f64, template.height() as f64);
    for y in 0..plate.height() {
        for x in 0..plate.width() {
            let (u, v) = inv(x as f64, y as f64);
            if u < -0.5 || v < -0.5 || u > tw - 0.5 || v > th - 0.5 {
                continue;
            }
            let t = template.sample_bilinear(u as f32, v as f32);
            let a = ((t - BACKGROUND) / (INK - BACKGROUND)).clamp(0.0, 1.0);
            let p = plate.get(x, y);
            plate.set(x, y, p * (1.0 - a) + INK * a);
        }
    }
}

/// Gaussian blur (skipped below 0.05) followed by additive Gaussian noise.
pub fn degrade(img: &GrayImage, blur_sigma: f64, noise_sigma: f64, rng: &mut impl Rng) -> Result<GrayImage> {
    let blurred = if blur_sigma >= 0.05 {
        gaussian_blur(img, blur_sigma as f32)?
    } else {
        img.clone()
    };
    if noise_sigma <= 0.0 {
        return Ok(blurred);
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    let data = blurred
        .data()
        .iter()
        .map(|&v| (v as f64 + noise.sample(rng)).clamp(0.0, 1.0) as f32)
        .collect();
    GrayImage::from_vec(blurred.width(), blurred.height(), data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub n_special: usize,
    pub n_normal: usize,
    pub seed: u64,
    pub rotation_range_deg: (f64, f64),
    pub scale_range: (f64, f64),
    pub noise_sigma: f64,
    pub blur_sigma_range: (f64, f64),
    pub plate_size: (usize, usize),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_special: 60,
            n_normal: 60,
            seed: 42,
            rotation_range_deg: (-15.0, 15.0),
            scale_range: (0.7, 1.3),
            noise_sigma: 0.02,
            blur_sigma_range: (0.0, 1.0),
            plate_size: (520, 190),
        }
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn random_chars(rng: &mut impl Rng, pool: &[u8], n: usize) -> String {
    (0..n).map(|_| pool[rng.random_range(0..pool.len())] as char).collect()
}

const DIGITS: &[u8] = b"0123456789";
const LETTERS: &[u8] = b"ABCDEFGHJKLMNPQRSTVWXY";

/// A special plate: the template in the left part, digits following it
/// on the right. Returns the clean image and the template's ground-truth
/// quad.
pub fn special_plate(template: &GrayImage, placement: &Placement, digits: &str, size: (usize, usize)) -> Result<(GrayImage, Quad)> {
    let mut plate = blank_plate(size);
    paste_template(&mut plate, template, placement);
    let quad = placement.quad(template.dimensions());
    let cell = 5;
    let dw = block_text_width(digits.len(), cell);
    // start at the template box edge; its padding keeps the ink apart
    let right = quad.iter().map(|p| p.0).fold(f64::MIN, f64::max).max(0.0).ceil() as usize;
    let x0 = right.min(size.0.saturating_sub(dw + 20));
    let y0 = (size.1 / 2).saturating_sub(GLYPH_H * cell / 2);
    draw_block_text(&mut plate, digits, (x0, y0), cell)?;
    Ok((plate, quad))
}

/// A standard plate: block letters and digits only, centred.
pub fn normal_plate(text: &str, size: (usize, usize)) -> Result<GrayImage> {
    let mut plate = blank_plate(size);
    // widest blank run inside a glyph pair is 3 cells, within reach of the
    // default detector dilation
    let cell = 5;
    let tw = block_text_width(text.chars().count(), cell);
    let x0 = size.0.saturating_sub(tw) / 2;
    let y0 = (size.1 / 2).saturating_sub(GLYPH_H * cell / 2);
    draw_block_text(&mut plate, text, (x0, y0), cell)?;
    Ok(plate)
}

/// Default plate placement region for the template centre.
fn template_center(size: (usize, usize)) -> (f64, f64) {
    (size.0 as f64 * 0.34, size.1 as f64 / 2.0)
}

/// One generated image with its ground truth.
#[derive(Clone, Debug)]
pub struct Sample {
    pub image: GrayImage,
    pub ground_truth: GroundTruth,
    /// Template quad in plate pixels for special samples.
    pub quad: Option<Quad>,
}

/// Generates the corpus in memory. Special labels are assigned round-robin
/// in `templates` order; specials come first, then normals.
pub fn generate_samples(templates: &[(String, GrayImage)], params: &SynthParams) -> Result<Vec<Sample>> {
    if params.n_special > 0 && templates.is_empty() {
        return Err(Error::Parameter("special plates requested without templates".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Vec::with_capacity(params.n_special + params.n_normal);
    for i in 0..params.n_special {
        let (label, template) = &templates[i % templates.len()];
        let placement = Placement {
            rotation_deg: uniform(&mut rng, params.rotation_range_deg),
            scale: uniform(&mut rng, params.scale_range),
            center: template_center(params.plate_size),
        };
        let digits = random_chars(&mut rng, DIGITS, 4);
        let (clean, quad) = special_plate(template, &placement, &digits, params.plate_size)?;
        let blur = uniform(&mut rng, params.blur_sigma_range);
        out.push(Sample {
            image: degrade(&clean, blur, params.noise_sigma, &mut rng)?,
            ground_truth: GroundTruth::Special(label.clone()),
            quad: Some(quad),
        });
    }
    for _ in 0..params.n_normal {
        let text = format!(
            "{}{}",
            random_chars(&mut rng, LETTERS, 3),
            random_chars(&mut rng, DIGITS, 4)
        );
        let clean = normal_plate(&text, params.plate_size)?;
        let blur = uniform(&mut rng, params.blur_sigma_range);
        out.push(Sample {
            image: degrade(&clean, blur, params.noise_sigma, &mut rng)?,
            ground_truth: GroundTruth::Normal,
            quad: None,
        });
    }
    Ok(out)
}

/// Finds `<label>.pgm` or `<label>.png` under `dir` for every enrolled label.
pub fn load_template_images(registry: &Registry, dir: &Path) -> Result<Vec<(String, GrayImage)>> {
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for label in registry.labels() {
        let path = ["pgm", "png"]
            .iter()
            .map(|ext| dir.join(format!("{label}.{ext}")))
            .find(|p| p.is_file());
        match path {
            Some(p) => {
                let img = read_gray(&p)?;
                let t = registry.lookup(label).expect("label from registry");
                if t.image_size != img.dimensions() {
                    log::warn!("{}: size differs from the enrolled template `{label}`", p.display());
                }
                found.push((label.to_string(), img));
            }
            None => missing.push(label.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingTemplates(missing));
    }
    Ok(found)
}

/// Writes `special_NNNN.pgm` / `normal_NNNN.pgm` into `out_dir` and the
/// manifest at `manifest_path`.
pub fn synth_corpus(
    registry: &Registry,
    template_dir: &Path,
    out_dir: &Path,
    manifest_path: &Path,
    params: &SynthParams,
) -> Result<Vec<ManifestEntry>> {
    if registry.is_empty() {
        return Err(Error::Parameter("registry has no templates".into()));
    }
    let templates = load_template_images(registry, template_dir)?;
    let samples = generate_samples(&templates, params)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (mut ns, mut nn) = (0, 0);
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let name = match s.ground_truth {
            GroundTruth::Special(_) => {
                ns += 1;
                format!("special_{:04}.pgm", ns - 1)
            }
            GroundTruth::Normal => {
                nn += 1;
                format!("normal_{:04}.pgm", nn - 1)
            }
        };
        let path: PathBuf = out_dir.join(name);
        write_pgm(&path, &s.image)?;
        entries.push(ManifestEntry {
            image_path: path,
            ground_truth: s.ground_truth,
        });
    }
    write_manifest(manifest_path, &entries)?;
    Ok(entries)
}
