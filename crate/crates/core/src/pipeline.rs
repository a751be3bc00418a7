//! End-to-end door detection: edges, lines, candidates, features and the
//! trained map, plus training from labeled images and evaluation counts.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::canny::{canny, CannyParams};
use crate::doorfeat::{
    build_feature_vector, find_post_candidates, raw_features, DoorCandidate, FeatureParams,
    FeatureVector, NormalizationStats, Region,
};
use crate::image::{GrayImage, RgbImage};
use crate::linefit::{detect_lines, LineParams, LineSegment};
use crate::som::{
    calibrate_labels, train_monitored, Class, NeuronLabelMap, Node, SomLattice, TrainReport,
    TrainSchedule, DEFAULT_COLS, DEFAULT_ROWS,
};
use crate::synth::Category;
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Overlap with the true door above which a candidate counts as the door.
pub const DEFAULT_IOU: f64 = 0.5;

/// Every tunable of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub canny: CannyParams,
    pub lines: LineParams,
    pub features: FeatureParams,
    pub rows: usize,
    pub cols: usize,
    pub schedule: TrainSchedule,
    /// IoU threshold for training labels and for counting a detection.
    pub iou: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            canny: CannyParams::default(),
            lines: LineParams::default(),
            features: FeatureParams::default(),
            rows: DEFAULT_ROWS,
            cols: DEFAULT_COLS,
            schedule: TrainSchedule::default(),
            iou: DEFAULT_IOU,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.schedule.validate()?;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("lattice needs at least one row and column"));
        }
        if !(self.iou > 0.0 && self.iou <= 1.0) {
            return Err(Error::invalid("IoU threshold outside (0, 1]"));
        }
        Ok(())
    }
}

/// Edges, lines and door candidates of one image.
pub fn extract_candidates(img: &GrayImage, cfg: &PipelineConfig) -> Result<Vec<DoorCandidate>> {
    let edges = canny(img, &cfg.canny)?;
    let segs = detect_lines(&edges, &cfg.lines);
    Ok(find_post_candidates(&segs, img, &cfg.features))
}

/// Candidates of one training image with raw features and labels: a
/// candidate is a door when its region overlaps the true door by at least
/// the IoU threshold.
pub fn labeled_features(
    img: &GrayImage,
    door: Option<&Region>,
    cfg: &PipelineConfig,
) -> Result<Vec<(FeatureVector, Class)>> {
    let cands = extract_candidates(img, cfg)?;
    Ok(cands
        .iter()
        .map(|c| {
            let region = c.region(img.width(), img.height());
            let class = match door {
                Some(d) if region.iou(d) >= cfg.iou => Class::Door,
                _ => Class::NonDoor,
            };
            (raw_features(c, img, &cfg.features), class)
        })
        .collect())
}

/// Trained classifier with everything needed to reproduce its features.
#[derive(Debug, Clone, PartialEq)]
pub struct DoorModel {
    pub lattice: SomLattice,
    pub labels: NeuronLabelMap,
    pub norm: NormalizationStats,
    pub config: PipelineConfig,
    pub format_version: u32,
}

impl DoorModel {
    /// Checks the parts agree with each other.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let d = self.config.features.dim();
        if self.lattice.dim() != d || self.norm.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: if self.lattice.dim() != d {
                    self.lattice.dim()
                } else {
                    self.norm.dim()
                },
            });
        }
        if self.labels.rows() != self.lattice.rows() || self.labels.cols() != self.lattice.cols() {
            return Err(Error::invalid("label map does not match lattice shape"));
        }
        Ok(())
    }

    /// Class of a normalized feature vector.
    pub fn classify(&self, x: &[f64]) -> Result<Class> {
        crate::som::classify(&self.lattice, &self.labels, x)
    }

    /// Online learning from one labeled raw vector: a single update at the
    /// convergence-phase rate and spread, after which the winning node takes
    /// the given label.
    pub fn update(&mut self, raw: &FeatureVector, class: Class) -> Result<Node> {
        let x = self.norm.normalize(raw)?;
        let s = &self.config.schedule;
        let bmu = self
            .lattice
            .update(&x.values, s.eta_conv, s.sigma_conv(), s.h0)?;
        self.labels.set(bmu, class);
        Ok(bmu)
    }
}

fn derive_seeds(seed: u64) -> (u64, u64) {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (rng.next_u64(), rng.next_u64())
}

/// Fits normalization, trains the map and calibrates node labels from the
/// labeled raw vectors of `images` training images.
pub fn fit_model(
    samples: &[(FeatureVector, Class)],
    images: usize,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(DoorModel, TrainReport)> {
    cfg.validate()?;
    if !samples.iter().any(|(_, c)| *c == Class::Door) {
        return Err(Error::NoPositiveCandidates {
            images,
            candidates: samples.len(),
        });
    }
    let raw: Vec<FeatureVector> = samples.iter().map(|(v, _)| v.clone()).collect();
    let norm = NormalizationStats::fit(&raw)?;
    let labeled: Vec<(Vec<f64>, Class)> = samples
        .iter()
        .map(|(v, c)| Ok((norm.normalize(v)?.values, *c)))
        .collect::<Result<_>>()?;
    let data: Vec<Vec<f64>> = labeled.iter().map(|(x, _)| x.clone()).collect();

    let (init_seed, train_seed) = derive_seeds(seed);
    let mut lattice = SomLattice::init(cfg.rows, cfg.cols, cfg.features.dim(), init_seed)?;
    let report = train_monitored(
        &mut lattice,
        &data,
        &cfg.schedule,
        train_seed,
        Some(&labeled),
    )?;
    let labels = calibrate_labels(&lattice, &labeled)?;
    let model = DoorModel {
        lattice,
        labels,
        norm,
        config: *cfg,
        format_version: MODEL_FORMAT_VERSION,
    };
    Ok((model, report))
}

/// Image with its door box, if it shows one.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: GrayImage,
    pub door: Option<Region>,
}

/// Extracts and labels candidates from every image, then [`fit_model`].
pub fn train_model(
    images: &[LabeledImage],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(DoorModel, TrainReport)> {
    cfg.validate()?;
    let mut samples = Vec::new();
    for li in images {
        samples.extend(labeled_features(&li.image, li.door.as_ref(), cfg)?);
    }
    fit_model(&samples, images.len(), cfg, seed)
}

/// One classified candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub candidate: DoorCandidate,
    pub class: Class,
    pub region: Region,
    /// Normalized features the class was decided on.
    pub features: FeatureVector,
}

impl fmt::Display for Detection {
    /// `class x_left y_top x_right y_bottom`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.region;
        write!(
            f,
            "{} {:.1} {:.1} {:.1} {:.1}",
            self.class.as_u8(),
            r.x_left,
            r.y_top,
            r.x_right,
            r.y_bottom
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub width: usize,
    pub height: usize,
    pub detections: Vec<Detection>,
}

impl DetectionResult {
    pub fn doors(&self) -> impl Iterator<Item = &Detection> {
        self.detections.iter().filter(|d| d.class == Class::Door)
    }

    /// Whether some door-class detection overlaps `truth` by at least `iou`.
    pub fn hits(&self, truth: &Region, iou: f64) -> bool {
        self.doors().any(|d| d.region.iou(truth) >= iou)
    }

    /// Binary raster of the posts: 1 on posts of door-class candidates, 0
    /// elsewhere (including posts of rejected candidates).
    pub fn line_raster(&self) -> GrayImage {
        let mut out = GrayImage::filled(self.width.max(1), self.height.max(1), 0)
            .expect("positive dimensions");
        for d in self.doors() {
            draw_segment(&mut out, &d.candidate.left_post, 1);
            draw_segment(&mut out, &d.candidate.right_post, 1);
        }
        out
    }

    /// Copy of `img` with door-class regions outlined in green.
    pub fn overlay(&self, img: &GrayImage) -> RgbImage {
        let mut rgb = RgbImage::from_gray(img);
        for d in self.doors() {
            let r = &d.region;
            rgb.draw_rect(
                libm::round(r.x_left) as usize,
                libm::round(r.y_top) as usize,
                libm::round(r.x_right) as usize,
                libm::round(r.y_bottom) as usize,
                [0, 255, 0],
            );
        }
        rgb
    }
}

fn draw_segment(img: &mut GrayImage, s: &LineSegment, value: u8) {
    let steps = libm::ceil((s.p1.x - s.p0.x).abs().max((s.p1.y - s.p0.y).abs())) as usize;
    for i in 0..=steps {
        let t = if steps == 0 {
            0.0
        } else {
            i as f64 / steps as f64
        };
        let x = libm::round(s.p0.x + t * (s.p1.x - s.p0.x));
        let y = libm::round(s.p0.y + t * (s.p1.y - s.p0.y));
        if x >= 0.0 && y >= 0.0 && (x as usize) < img.width() && (y as usize) < img.height() {
            img.set(x as usize, y as usize, value);
        }
    }
}

/// Classifies already extracted candidates of `img`.
pub fn classify_candidates(
    img: &GrayImage,
    candidates: &[DoorCandidate],
    model: &DoorModel,
) -> Result<DetectionResult> {
    let mut detections = Vec::with_capacity(candidates.len());
    for c in candidates {
        let features = build_feature_vector(c, img, &model.config.features, Some(&model.norm))?;
        detections.push(Detection {
            candidate: *c,
            class: model.classify(&features.values)?,
            region: c.region(img.width(), img.height()),
            features,
        });
    }
    Ok(DetectionResult {
        width: img.width(),
        height: img.height(),
        detections,
    })
}

/// Runs the whole pipeline on one image.
pub fn detect_doors(img: &GrayImage, model: &DoorModel) -> Result<DetectionResult> {
    let cands = extract_candidates(img, &model.config)?;
    classify_candidates(img, &cands, model)
}

/// Per-image evaluation record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageOutcome {
    pub category: Category,
    /// Doors shown in the image.
    pub doors: usize,
    /// Doors matched by a door-class detection.
    pub doors_found: usize,
    /// Door-class detections matching no door.
    pub false_positives: usize,
    /// Candidates matching no door.
    pub non_door_candidates: usize,
}

impl ImageOutcome {
    pub fn detected(&self) -> bool {
        self.doors_found > 0
    }
}

/// Scores one detection result against the image's door.
pub fn score_image(
    category: Category,
    result: &DetectionResult,
    door: Option<&Region>,
    iou: f64,
) -> ImageOutcome {
    let matches = |d: &Detection| door.is_some_and(|t| d.region.iou(t) >= iou);
    ImageOutcome {
        category,
        doors: usize::from(door.is_some()),
        doors_found: usize::from(result.doors().any(matches)),
        false_positives: result.doors().filter(|d| !matches(d)).count(),
        non_door_candidates: result.detections.iter().filter(|d| !matches(d)).count(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryCounts {
    pub images: usize,
    pub detected: usize,
    pub doors: usize,
    pub doors_found: usize,
    pub non_door_candidates: usize,
    pub false_positives: usize,
}

impl CategoryCounts {
    /// Share of images with at least one door found, percent.
    pub fn accuracy(&self) -> Option<f64> {
        percent(self.detected, self.images)
    }

    pub fn door_recall(&self) -> Option<f64> {
        percent(self.doors_found, self.doors)
    }

    /// Share of non-door candidates classified as doors, percent.
    pub fn false_positive_rate(&self) -> Option<f64> {
        percent(self.false_positives, self.non_door_candidates)
    }
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Accuracy table over the three lighting categories.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub counts: BTreeMap<Category, CategoryCounts>,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[ImageOutcome]) -> Self {
        let mut counts: BTreeMap<Category, CategoryCounts> = Category::ALL
            .iter()
            .map(|&c| (c, CategoryCounts::default()))
            .collect();
        for o in outcomes {
            let e = counts.entry(o.category).or_default();
            e.images += 1;
            e.detected += usize::from(o.detected());
            e.doors += o.doors;
            e.doors_found += o.doors_found;
            e.non_door_candidates += o.non_door_candidates;
            e.false_positives += o.false_positives;
        }
        Self { counts }
    }

    pub fn get(&self, category: Category) -> CategoryCounts {
        self.counts.get(&category).copied().unwrap_or_default()
    }

    /// Aligned text table: one column per category, one row per attribute.
    /// Undefined percentages print as `-`.
    pub fn to_table(&self) -> String {
        fn pct(v: Option<f64>) -> String {
            v.map_or_else(|| String::from("-"), |p| alloc::format!("{p:.2}"))
        }
        let cats: Vec<(Category, CategoryCounts)> =
            self.counts.iter().map(|(&k, &v)| (k, v)).collect();
        let rows: [(&str, Vec<String>); 5] = [
            (
                "Images",
                cats.iter()
                    .map(|(_, c)| alloc::format!("{}", c.images))
                    .collect(),
            ),
            (
                "Detected",
                cats.iter()
                    .map(|(_, c)| alloc::format!("{}", c.detected))
                    .collect(),
            ),
            (
                "Accuracy (%)",
                cats.iter().map(|(_, c)| pct(c.accuracy())).collect(),
            ),
            (
                "Door recall (%)",
                cats.iter().map(|(_, c)| pct(c.door_recall())).collect(),
            ),
            (
                "False positives (%)",
                cats.iter()
                    .map(|(_, c)| pct(c.false_positive_rate()))
                    .collect(),
            ),
        ];
        let mut out = String::new();
        let _ = write!(out, "{:<20}", "");
        for (cat, _) in &cats {
            let _ = write!(out, "{:>10}", cat.name());
        }
        out.push('\n');
        for (label, vals) in rows {
            let _ = write!(out, "{label:<20}");
            for v in vals {
                let _ = write!(out, "{v:>10}");
            }
            out.push('\n');
        }
        out
    }
}
