//! Command line. Exit status: 0 on success (and for `--help`), 1 on a usage
//! error, 2 when the command itself fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use doorsom_core::canny::{self, canny, CannyParams};
use doorsom_core::doorfeat::{
    self, bottom_gap_profile, concavity, find_post_candidates, post_distance, raw_features,
    FeatureParams, Region,
};
use doorsom_core::linefit::{self, detect_lines, LineParams, LineSegment};
use doorsom_core::pipeline::{self, detect_doors, DoorModel, PipelineConfig};
use doorsom_core::som::{self, Class, TrainSchedule};
use doorsom_core::synth;

use crate::bench::{bench, DEFAULT_REPS};
use crate::corpus::{generate_corpus, load_corpus};
use crate::eval::{curve_text, evaluate_corpus, train_corpus};
use crate::model_io::{load_model, save_model};
use crate::pnm::{read_gray, write_pgm, write_ppm};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "doorsom",
    version,
    about = "Door detection with a self-organizing map"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic corpus: <out>/<category>/<index>.pgm and <out>/truth.txt.
    Synth(SynthArgs),
    /// Train a model on a corpus.
    Train(TrainArgs),
    /// Print one `class x_left y_top x_right y_bottom` record per candidate.
    Detect(DetectArgs),
    /// Print per-category detection accuracy on a corpus.
    Eval(EvalArgs),
    /// Print median stage timings.
    Bench(BenchArgs),
    /// Online learning: update a model from the candidates of one image.
    Update(UpdateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Images per category.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = synth::DEFAULT_WIDTH)]
    pub width: usize,
    #[arg(long, default_value_t = synth::DEFAULT_HEIGHT)]
    pub height: usize,
}

#[derive(Debug, Args)]
pub struct CannyArgs {
    /// Gaussian blur sigma.
    #[arg(long, default_value_t = canny::DEFAULT_SIGMA)]
    pub sigma: f64,
    /// Low hysteresis threshold, fraction of the maximum gradient.
    #[arg(long, default_value_t = canny::DEFAULT_LOW)]
    pub canny_lo: f64,
    /// High hysteresis threshold, fraction of the maximum gradient.
    #[arg(long, default_value_t = canny::DEFAULT_HIGH)]
    pub canny_hi: f64,
}

impl CannyArgs {
    pub fn params(&self) -> CannyParams {
        CannyParams {
            sigma: self.sigma,
            low: self.canny_lo,
            high: self.canny_hi,
        }
    }
}

#[derive(Debug, Args)]
pub struct LineArgs {
    /// Maximum point deviation from a fitted segment, px.
    #[arg(long, default_value_t = linefit::DEFAULT_DEV_TOL)]
    pub dev_tol: f64,
    /// Maximum direction difference when merging, radians.
    #[arg(long, default_value_t = linefit::DEFAULT_ANGLE_TOL)]
    pub angle_tol: f64,
    /// Maximum endpoint gap when merging, px.
    #[arg(long, default_value_t = linefit::DEFAULT_GAP_TOL)]
    pub gap_tol: f64,
    /// Maximum sideways offset when merging, px.
    #[arg(long, default_value_t = linefit::DEFAULT_MERGE_OFFSET)]
    pub merge_offset: f64,
    /// Shortest kept segment, px.
    #[arg(long, default_value_t = linefit::DEFAULT_MIN_LEN)]
    pub min_len: f64,
}

impl LineArgs {
    pub fn params(&self) -> LineParams {
        LineParams {
            dev_tol: self.dev_tol,
            angle_tol: self.angle_tol,
            gap_tol: self.gap_tol,
            merge_offset: self.merge_offset,
            min_len: self.min_len,
        }
    }
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Largest deviation of a post from vertical, degrees.
    #[arg(long, default_value_t = doorfeat::DEFAULT_VERTICAL_TOL_DEG)]
    pub vertical_tol: f64,
    /// Shortest post as a fraction of image height.
    #[arg(long, default_value_t = doorfeat::DEFAULT_MIN_POST_FRAC)]
    pub min_post_frac: f64,
    /// Posts must start above this fraction of image height.
    #[arg(long, default_value_t = doorfeat::DEFAULT_HORIZON_FRAC)]
    pub horizon_frac: f64,
    /// Narrowest post pair as a fraction of image width.
    #[arg(long, default_value_t = doorfeat::DEFAULT_MIN_WIDTH_FRAC)]
    pub min_width_frac: f64,
    /// Widest post pair as a fraction of image width.
    #[arg(long, default_value_t = doorfeat::DEFAULT_MAX_WIDTH_FRAC)]
    pub max_width_frac: f64,
    /// Columns sampled for concavity.
    #[arg(long, default_value_t = doorfeat::DEFAULT_COLUMNS)]
    pub columns: usize,
    /// Half height of the bottom-gap window, px.
    #[arg(long, default_value_t = doorfeat::DEFAULT_WINDOW)]
    pub window: usize,
    /// Bins of the bottom-gap profile.
    #[arg(long, default_value_t = doorfeat::DEFAULT_BINS)]
    pub bins: usize,
}

impl FeatureArgs {
    pub fn params(&self) -> FeatureParams {
        FeatureParams {
            vertical_tol_deg: self.vertical_tol,
            min_post_frac: self.min_post_frac,
            horizon_frac: self.horizon_frac,
            min_width_frac: self.min_width_frac,
            max_width_frac: self.max_width_frac,
            columns: self.columns,
            window: self.window,
            bins: self.bins,
        }
    }
}

#[derive(Debug, Args)]
pub struct SomArgs {
    #[arg(long, default_value_t = som::DEFAULT_ROWS)]
    pub rows: usize,
    #[arg(long, default_value_t = som::DEFAULT_COLS)]
    pub cols: usize,
    /// Initial ordering-phase learning rate.
    #[arg(long, default_value_t = som::DEFAULT_ETA_ORDER)]
    pub eta_order: f64,
    /// Convergence-phase learning rate.
    #[arg(long, default_value_t = som::DEFAULT_ETA_CONV)]
    pub eta_conv: f64,
    /// Initial neighbourhood spread.
    #[arg(long, default_value_t = som::DEFAULT_SIGMA0)]
    pub sigma0: f64,
    #[arg(long, default_value_t = som::DEFAULT_TAU_SIGMA)]
    pub tau_sigma: f64,
    #[arg(long, default_value_t = som::DEFAULT_TAU_ETA)]
    pub tau_eta: f64,
    /// Neighbourhood amplitude.
    #[arg(long, default_value_t = som::DEFAULT_H0)]
    pub h0: f64,
    /// Convergence-phase spread cap.
    #[arg(long, default_value_t = som::DEFAULT_SIGMA_MIN)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = som::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Fraction of iterations spent ordering.
    #[arg(long, default_value_t = som::DEFAULT_ORDER_FRAC)]
    pub order_frac: f64,
    /// Error-curve sampling period.
    #[arg(long, default_value_t = som::DEFAULT_SAMPLE_EVERY)]
    pub sample_every: usize,
}

impl SomArgs {
    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            eta_order: self.eta_order,
            eta_conv: self.eta_conv,
            sigma0: self.sigma0,
            tau_sigma: self.tau_sigma,
            tau_eta: self.tau_eta,
            h0: self.h0,
            sigma_min: self.sigma_min,
            iterations: self.iterations,
            order_frac: self.order_frac,
            sample_every: self.sample_every,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the training error curve here.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Candidate/door overlap needed to label a candidate a door.
    #[arg(long, default_value_t = pipeline::DEFAULT_IOU)]
    pub iou: f64,
    #[command(flatten)]
    pub canny: CannyArgs,
    #[command(flatten)]
    pub lines: LineArgs,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub som: SomArgs,
}

impl TrainArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            canny: self.canny.params(),
            lines: self.lines.params(),
            features: self.features.params(),
            rows: self.som.rows,
            cols: self.som.cols,
            schedule: self.som.schedule(),
            iou: self.iou,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Write a PPM copy of the image with detected doors outlined.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Write the binary post raster (0/1 PGM).
    #[arg(long)]
    pub raster: Option<PathBuf>,
    /// Write line segments as `x0 y0 x1 y1` lines.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Write candidates with their raw cues.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Door box in the image; without it every candidate is a non-door.
    #[arg(long, num_args = 4, value_names = ["X_LEFT", "Y_TOP", "X_RIGHT", "Y_BOTTOM"])]
    pub door: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first) and runs the command.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match run(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn segment_text(s: &LineSegment) -> String {
    format!("{:.2},{:.2},{:.2},{:.2}", s.p0.x, s.p0.y, s.p1.x, s.p1.y)
}

fn run(cmd: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        Command::Synth(a) => {
            let records = generate_corpus(&a.out, a.n, a.seed, a.width, a.height)?;
            writeln!(out, "wrote {} images to {}", records.len(), a.out.display())?;
        }
        Command::Train(a) => {
            let cfg = a.config();
            cfg.validate()?;
            let corpus = load_corpus(&a.corpus)?;
            let (model, report, counts) = train_corpus(&corpus, &cfg, a.seed)?;
            save_model(&a.out, &model)?;
            if let Some(path) = &a.curve {
                write_text(path, &curve_text(&report))?;
            }
            writeln!(
                out,
                "images {} candidates {} doors {}",
                counts.images, counts.candidates, counts.doors
            )?;
            if let (Some(first), Some(last)) = (report.initial_error(), report.final_error()) {
                writeln!(out, "quantization error {first:.6} -> {last:.6}")?;
            }
            if let Some(&(_, m)) = report.misclassification.last() {
                writeln!(out, "training misclassification {m:.6}")?;
            }
        }
        Command::Detect(a) => {
            let model = load_model(&a.model)?;
            let img = read_gray(&a.image)?;
            let res = detect_doors(&img, &model)?;
            for d in &res.detections {
                writeln!(out, "{d}")?;
            }
            if let Some(p) = &a.overlay {
                write_ppm(p, &res.overlay(&img))?;
            }
            if let Some(p) = &a.raster {
                write_pgm(p, &res.line_raster())?;
            }
            if a.segments.is_some() || a.candidates.is_some() {
                dump_debug(&a, &model, &img)?;
            }
        }
        Command::Eval(a) => {
            let model = load_model(&a.model)?;
            let corpus = load_corpus(&a.corpus)?;
            write!(out, "{}", evaluate_corpus(&model, &corpus)?.to_table())?;
        }
        Command::Bench(a) => {
            let model = load_model(&a.model)?;
            let img = read_gray(&a.image)?;
            write!(out, "{}", bench(&model, &img, a.reps)?.to_table())?;
        }
        Command::Update(a) => {
            let mut model = load_model(&a.model)?;
            let img = read_gray(&a.image)?;
            let door = match a.door.as_deref() {
                Some(&[x_left, y_top, x_right, y_bottom]) => {
                    if !(x_left < x_right && y_top < y_bottom) {
                        bail!("door box must have x_left < x_right and y_top < y_bottom");
                    }
                    Some(Region {
                        x_left,
                        y_top,
                        x_right,
                        y_bottom,
                    })
                }
                _ => None,
            };
            let samples = pipeline::labeled_features(&img, door.as_ref(), &model.config)?;
            for (raw, class) in &samples {
                model.update(raw, *class)?;
            }
            save_model(&a.out, &model)?;
            let doors = samples.iter().filter(|s| s.1 == Class::Door).count();
            writeln!(
                out,
                "updated from {} candidates, {} doors",
                samples.len(),
                doors
            )?;
        }
    }
    Ok(())
}

fn dump_debug(
    a: &DetectArgs,
    model: &DoorModel,
    img: &doorsom_core::GrayImage,
) -> anyhow::Result<()> {
    let cfg = &model.config;
    let segs = detect_lines(&canny(img, &cfg.canny)?, &cfg.lines);
    if let Some(p) = &a.segments {
        let text: String = segs
            .iter()
            .map(|s| format!("{:.2} {:.2} {:.2} {:.2}\n", s.p0.x, s.p0.y, s.p1.x, s.p1.y))
            .collect();
        write_text(p, &text)?;
    }
    if let Some(p) = &a.candidates {
        let mut text = String::new();
        for c in find_post_candidates(&segs, img, &cfg.features) {
            let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                text,
                "left({}) right({}) {:.2} {} {}",
                segment_text(&c.left_post),
                segment_text(&c.right_post),
                post_distance(&c),
                fmt_opt(concavity(&c, &cfg.features)),
                fmt_opt(bottom_gap_profile(&c, img, &cfg.features).map(|g| g.signed_contrast)),
            );
            debug_assert_eq!(
                raw_features(&c, img, &cfg.features).values.len(),
                cfg.features.dim()
            );
        }
        write_text(p, &text)?;
    }
    Ok(())
}
