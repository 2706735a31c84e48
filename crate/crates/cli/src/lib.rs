//! `platesift` command line.
//!
//! Exit codes: 0 success, 1 domain rejection, 2 usage or configuration
//! error, 3 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use platesift::config::Config;
use platesift::detector::detect_candidates;
use platesift::eval::{evaluate, format_percent, read_manifest, EvalReport};
use platesift::homography::Quad;
use platesift::image::io::{read_gray, write_pgm};
use platesift::image::{draw_quad, GrayImage};
use platesift::recognition::{classify_frame, recognize, Classification, RecognitionResult};
use platesift::registry::Registry;
use platesift::synth::{render_word, synth_corpus, SynthParams, WordStyle};
use platesift::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const JSON_SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "platesift", version, about = "Special-prefix license plate recognition")]
struct Cli {
    /// Pipeline configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct JsonOut {
    /// Write a machine-readable result document (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Add a prefix template to a registry, creating the registry if needed.
    Enroll {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long)]
        image: PathBuf,
    },
    /// List plate candidates in a frame.
    Detect {
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        out: JsonOut,
    },
    /// Classify one plate image.
    Recognize {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// RANSAC seed (overrides the configuration).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the plate with the located prefix outlined, as PGM.
        #[arg(long)]
        annotate: Option<PathBuf>,
        #[command(flatten)]
        out: JsonOut,
    },
    /// Detect plates in a frame, classify each and draw located prefixes.
    Annotate {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        json: JsonOut,
    },
    /// Score a labelled manifest.
    Eval {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: JsonOut,
    },
    /// Generate a synthetic labelled corpus from template images.
    Synth {
        #[arg(long)]
        registry: PathBuf,
        /// Directory holding `<label>.pgm` or `<label>.png` per template.
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        n_special: usize,
        #[arg(long, default_value_t = 60)]
        n_normal: usize,
        /// Largest absolute rotation in degrees.
        #[arg(long, default_value_t = 15.0)]
        max_rotation: f64,
        #[arg(long, default_value_t = 0.7)]
        min_scale: f64,
        #[arg(long, default_value_t = 1.3)]
        max_scale: f64,
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long, default_value_t = 1.0)]
        max_blur: f64,
    },
    /// Render a word in the built-in italic style, for use as a template.
    RenderWord {
        #[arg(long)]
        text: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Error carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Decode(_) | Error::Malformed(_) | Error::Version(_) | Error::MissingTemplates(_) => {
                EXIT_IO
            }
            Error::Config(_) | Error::Parameter(_) | Error::ParamsMismatch => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    log::set_max_level(level);
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    let cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    log::info!("effective configuration:\n{}", cfg.to_string().trim_end());
    Ok(cfg)
}

fn emit_json(target: Option<&Path>, doc: Value) -> Result<(), Failure> {
    let Some(path) = target else { return Ok(()) };
    let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n";
    if path == Path::new("-") {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_failure(path, e))
    } else {
        fs::write(path, text).map_err(|e| io_failure(path, e))
    }
}

fn quad_json(q: &Quad) -> Value {
    json!(q.iter().map(|p| [p.0, p.1]).collect::<Vec<_>>())
}

fn recognition_json(r: &RecognitionResult) -> Value {
    let classification = match &r.classification {
        Classification::Special {
            label,
            quad,
            inlier_count,
            reproj_rmse,
        } => json!({
            "type": "special",
            "label": label,
            "quad": quad_json(quad),
            "inliers": inlier_count,
            "reproj_rmse": reproj_rmse,
        }),
        Classification::Normal => json!({ "type": "normal" }),
    };
    let diagnostics: Vec<Value> = r
        .diagnostics
        .iter()
        .map(|d| json!({ "label": d.label, "raw_matches": d.raw_matches, "inliers": d.inliers }))
        .collect();
    json!({
        "classification": classification,
        "diagnostics": diagnostics,
        "timing_ms": {
            "preprocess": r.timing.preprocess_ms,
            "extract": r.timing.extract_ms,
            "match": r.timing.match_ms,
            "verify": r.timing.verify_ms,
        },
    })
}

fn describe(c: &Classification) -> String {
    match c {
        Classification::Special {
            label,
            inlier_count,
            reproj_rmse,
            ..
        } => format!("special {label} (inliers {inlier_count}, rmse {reproj_rmse:.3} px)"),
        Classification::Normal => "normal".to_string(),
    }
}

fn annotated(img: &GrayImage, quads: impl IntoIterator<Item = Quad>) -> GrayImage {
    let mut out = img.clone();
    for q in quads {
        draw_quad(&mut out, &q, 1.0);
    }
    out
}

fn eval_json(report: &EvalReport) -> Value {
    let c = &report.counts;
    let outcomes: Vec<Value> = report
        .outcomes
        .iter()
        .map(|o| {
            let predicted = match &o.predicted {
                Ok(Some(l)) => json!(format!("special:{l}")),
                Ok(None) => json!("normal"),
                Err(_) => Value::Null,
            };
            json!({
                "image": o.image_path.display().to_string(),
                "ground_truth": o.ground_truth.to_string(),
                "predicted": predicted,
                "error": o.predicted.as_ref().err(),
            })
        })
        .collect();
    json!({
        "schema": JSON_SCHEMA,
        "command": "eval",
        "counts": {
            "n_special": c.n_special,
            "n_normal": c.n_normal,
            "special_correct": c.special_correct,
            "special_wrong_label": c.special_wrong_label,
            "special_missed": c.special_missed,
            "normal_false_special": c.normal_false_special,
        },
        "rates": {
            "tpr": report.rates.tpr,
            "fpr": report.rates.fpr,
            "fnr": report.rates.fnr,
        },
        "rates_text": {
            "tpr": format_percent(report.rates.tpr),
            "fpr": format_percent(report.rates.fpr),
            "fnr": format_percent(report.rates.fnr),
        },
        "warnings": report.warnings,
        "outcomes": outcomes,
    })
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Enroll { registry, label, image } => {
            let reg = if registry.exists() {
                let r = Registry::load(&registry)?;
                if r.extraction_params() != &cfg.pipeline.sift {
                    return Err(Error::ParamsMismatch.into());
                }
                r
            } else {
                Registry::new(cfg.pipeline.sift.clone())
            };
            let img = read_gray(&image)?;
            let reg = reg.enroll(&label, &img)?;
            reg.save(&registry)?;
            let n = reg.lookup(&label).map_or(0, |t| t.keypoints.len());
            println!("enrolled {label}: {n} features ({} template(s) in registry)", reg.len());
        }
        Command::Detect { image, out } => {
            let img = read_gray(&image)?;
            let cands = detect_candidates(&img, &cfg.detector)?;
            for c in &cands {
                println!(
                    "{} {} {} {} area {} aspect {:.2} compactness {:.2} fill {:.3}",
                    c.bbox.0, c.bbox.1, c.bbox.2, c.bbox.3, c.area, c.aspect, c.compactness, c.fill_ratio
                );
            }
            if cands.is_empty() {
                println!("no candidates");
            }
            let list: Vec<Value> = cands
                .iter()
                .map(|c| {
                    json!({
                        "bbox": [c.bbox.0, c.bbox.1, c.bbox.2, c.bbox.3],
                        "area": c.area,
                        "aspect": c.aspect,
                        "compactness": c.compactness,
                        "fill_ratio": c.fill_ratio,
                        "score": c.score,
                    })
                })
                .collect();
            emit_json(
                out.json.as_deref(),
                json!({ "schema": JSON_SCHEMA, "command": "detect", "candidates": list }),
            )?;
        }
        Command::Recognize {
            registry,
            image,
            seed,
            annotate,
            out,
        } => {
            if let Some(s) = seed {
                cfg.pipeline.robust.seed = s;
            }
            let reg = Registry::load(&registry)?;
            let img = read_gray(&image)?;
            let r = recognize(&img, &reg, &cfg.pipeline)?;
            println!("{}", describe(&r.classification));
            if let Some(path) = annotate {
                let quad = match &r.classification {
                    Classification::Special { quad, .. } => Some(*quad),
                    Classification::Normal => None,
                };
                write_pgm(&path, &annotated(&img, quad))?;
            }
            let mut doc = recognition_json(&r);
            doc["schema"] = json!(JSON_SCHEMA);
            doc["command"] = json!("recognize");
            emit_json(out.json.as_deref(), doc)?;
        }
        Command::Annotate {
            registry,
            image,
            out,
            seed,
            json: json_out,
        } => {
            if let Some(s) = seed {
                cfg.pipeline.robust.seed = s;
            }
            let reg = Registry::load(&registry)?;
            let img = read_gray(&image)?;
            let found = classify_frame(&img, &reg, &cfg.detector, &cfg.pipeline)?;
            let mut quads = Vec::new();
            let mut plates = Vec::new();
            for (c, r) in &found {
                println!("{} {} {} {}: {}", c.bbox.0, c.bbox.1, c.bbox.2, c.bbox.3, describe(&r.classification));
                if let Classification::Special { quad, .. } = &r.classification {
                    quads.push(*quad);
                }
                let mut doc = recognition_json(r);
                doc["bbox"] = json!([c.bbox.0, c.bbox.1, c.bbox.2, c.bbox.3]);
                plates.push(doc);
            }
            if found.is_empty() {
                println!("no candidates");
            }
            write_pgm(&out, &annotated(&img, quads))?;
            emit_json(
                json_out.json.as_deref(),
                json!({ "schema": JSON_SCHEMA, "command": "annotate", "plates": plates }),
            )?;
        }
        Command::Eval {
            registry,
            manifest,
            seed,
            out,
        } => {
            if let Some(s) = seed {
                cfg.pipeline.robust.seed = s;
            }
            let reg = Registry::load(&registry)?;
            let entries = read_manifest(&manifest)?;
            let report = evaluate(&entries, &reg, &cfg.pipeline)?;
            println!("{report}");
            emit_json(out.json.as_deref(), eval_json(&report))?;
        }
        Command::Synth {
            registry,
            templates,
            out,
            manifest,
            seed,
            n_special,
            n_normal,
            max_rotation,
            min_scale,
            max_scale,
            noise,
            max_blur,
        } => {
            if !(min_scale > 0.0 && min_scale <= max_scale) || max_rotation < 0.0 || noise < 0.0 || max_blur < 0.0 {
                return Err(Error::Parameter("synth ranges must be non-negative and ordered".into()).into());
            }
            let reg = Registry::load(&registry)?;
            let params = SynthParams {
                n_special,
                n_normal,
                seed,
                rotation_range_deg: (-max_rotation, max_rotation),
                scale_range: (min_scale, max_scale),
                noise_sigma: noise,
                blur_sigma_range: (0.0, max_blur),
                ..SynthParams::default()
            };
            let entries = synth_corpus(&reg, &templates, &out, &manifest, &params)?;
            println!("wrote {} images and {}", entries.len(), manifest.display());
        }
        Command::RenderWord { text, out } => {
            let img = render_word(&text, &WordStyle::default())?;
            write_pgm(&out, &img)?;
            println!("{}x{} -> {}", img.width(), img.height(), out.display());
        }
    }
    Ok(())
}
