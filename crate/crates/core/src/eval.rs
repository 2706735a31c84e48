//! Corpus evaluation: manifest I/O, per-image outcomes, counts and rates.
//!
//! Manifest lines are `path<TAB>normal` or `path<TAB>special:<label>`;
//! `#` starts a comment line. Relative paths resolve against the
//! manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use crate::error::{Error, Result};
use crate::image::io::read_gray;
use crate::image::GrayImage;
use crate::recognition::{recognize, PipelineParams};
use crate::registry::Registry;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundTruth {
    Special(String),
    Normal,
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundTruth::Special(l) => write!(f, "special:{l}"),
            GroundTruth::Normal => f.write_str("normal"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    pub ground_truth: GroundTruth,
}

pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |why: &str| Error::Parameter(format!("manifest line {}: {why}", n + 1));
        let (path, label) = line.split_once('\t').ok_or_else(|| bad("expected `path<TAB>label`"))?;
        if path.is_empty() {
            return Err(bad("empty path"));
        }
        let ground_truth = match label.trim() {
            "normal" => GroundTruth::Normal,
            l => match l.strip_prefix("special:") {
                Some(s) if !s.is_empty() => GroundTruth::Special(s.to_string()),
                _ => return Err(bad(&format!("unknown label `{l}`"))),
            },
        };
        let p = Path::new(path);
        out.push(ManifestEntry {
            image_path: if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) },
            ground_truth,
        });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
}

/// Renders entries with paths made relative to `manifest_dir` where
/// possible, absolute otherwise.
pub fn format_manifest(entries: &[ManifestEntry], manifest_dir: &Path) -> String {
    let mut s = String::from("# path\tnormal | special:<label>\n");
    for e in entries {
        let p = match e.image_path.strip_prefix(manifest_dir) {
            Ok(rel) => rel.to_path_buf(),
            Err(_) if e.image_path.is_relative() => std::env::current_dir()
                .map(|d| d.join(&e.image_path))
                .unwrap_or_else(|_| e.image_path.clone()),
            Err(_) => e.image_path.clone(),
        };
        s.push_str(&format!("{}\t{}\n", p.display(), e.ground_truth));
    }
    s
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new(""));
    fs::write(path, format_manifest(entries, dir)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageOutcome {
    pub image_path: PathBuf,
    pub ground_truth: GroundTruth,
    /// `Ok(None)` for Normal, `Ok(Some(label))` for Special, `Err` when the
    /// image could not be processed.
    pub predicted: std::result::Result<Option<String>, String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub n_special: usize,
    pub n_normal: usize,
    pub special_correct: usize,
    pub special_wrong_label: usize,
    pub special_missed: usize,
    pub normal_false_special: usize,
}

/// Percentages; zero when the denominator is empty.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rates {
    pub tpr: f64,
    pub fpr: f64,
    pub fnr: f64,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl EvalCounts {
    pub fn rates(&self) -> Rates {
        Rates {
            tpr: pct(self.special_correct, self.n_special),
            fpr: pct(
                self.normal_false_special + self.special_wrong_label,
                self.n_normal + self.n_special,
            ),
            fnr: pct(self.special_missed, self.n_special),
        }
    }
}

/// Two decimals, half-up.
pub fn format_percent(v: f64) -> String {
    let cents = (v * 100.0 + 0.5 + 1e-9).floor();
    format!("{:.2}", cents / 100.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub counts: EvalCounts,
    pub rates: Rates,
    pub outcomes: Vec<ImageOutcome>,
    /// Images that could not be read or processed.
    pub warnings: usize,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: Vec<ImageOutcome>) -> Self {
        let mut c = EvalCounts::default();
        let mut warnings = 0;
        for o in &outcomes {
            let pred = match &o.predicted {
                Ok(p) => p,
                Err(_) => {
                    warnings += 1;
                    continue;
                }
            };
            match (&o.ground_truth, pred) {
                (GroundTruth::Special(want), Some(got)) if want == got => {
                    c.n_special += 1;
                    c.special_correct += 1;
                }
                (GroundTruth::Special(_), Some(_)) => {
                    c.n_special += 1;
                    c.special_wrong_label += 1;
                }
                (GroundTruth::Special(_), None) => {
                    c.n_special += 1;
                    c.special_missed += 1;
                }
                (GroundTruth::Normal, Some(_)) => {
                    c.n_normal += 1;
                    c.normal_false_special += 1;
                }
                (GroundTruth::Normal, None) => c.n_normal += 1,
            }
        }
        EvalReport {
            counts: c,
            rates: c.rates(),
            outcomes,
            warnings,
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.counts;
        writeln!(
            f,
            "special: {} (correct {}, wrong label {}, missed {})",
            c.n_special, c.special_correct, c.special_wrong_label, c.special_missed
        )?;
        writeln!(f, "normal: {} (flagged special {})", c.n_normal, c.normal_false_special)?;
        if self.warnings > 0 {
            writeln!(f, "warnings: {} image(s) skipped", self.warnings)?;
        }
        writeln!(f, "TPR: {}%", format_percent(self.rates.tpr))?;
        writeln!(f, "FPR: {}%", format_percent(self.rates.fpr))?;
        write!(f, "FNR: {}%", format_percent(self.rates.fnr))
    }
}

/// Classifies every manifest image. Work is spread over threads; outcomes
/// keep manifest order.
pub fn evaluate(entries: &[ManifestEntry], registry: &Registry, params: &PipelineParams) -> Result<EvalReport> {
    evaluate_with(entries, registry, params, |p| read_gray(p))
}

/// [`evaluate`] with a caller-supplied image loader.
pub fn evaluate_with<L>(
    entries: &[ManifestEntry],
    registry: &Registry,
    params: &PipelineParams,
    load: L,
) -> Result<EvalReport>
where
    L: Fn(&Path) -> Result<GrayImage> + Sync,
{
    if entries.is_empty() {
        return Err(Error::Parameter("empty manifest".into()));
    }
    if registry.extraction_params() != &params.sift {
        return Err(Error::Config(
            "pipeline SIFT parameters differ from the registry's extraction parameters".into(),
        ));
    }
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(entries.len());
    let chunk = entries.len().div_ceil(workers);
    let classify = |e: &ManifestEntry| -> std::result::Result<Option<String>, String> {
        let img = load(&e.image_path).map_err(|err| err.to_string())?;
        let r = recognize(&img, registry, params).map_err(|err| err.to_string())?;
        Ok(r.classification.label().map(str::to_string))
    };
    let predictions: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = entries
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&classify).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let outcomes: Vec<ImageOutcome> = entries
        .iter()
        .zip(predictions)
        .map(|(e, predicted)| {
            if let Err(msg) = &predicted {
                log::warn!("{}: {msg}", e.image_path.display());
            }
            ImageOutcome {
                image_path: e.image_path.clone(),
                ground_truth: e.ground_truth.clone(),
                predicted,
            }
        })
        .collect();
    Ok(EvalReport::from_outcomes(outcomes))
}
