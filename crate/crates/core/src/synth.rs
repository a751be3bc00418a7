//! Synthetic fronto-parallel door scenes with exact ground truth.
//!
//! A scene is a flat wall above a floor, split by a horizontal wall/floor
//! line. The door is recessed: its bottom edge sits `concavity` rows above
//! the wall/floor line, with a thin strip under the door that is darker or
//! brighter than both the door and the floor. Optional distractors (a cabinet
//! standing flush on the floor or a window) provide door-like vertical pairs
//! without the door cues.

use alloc::vec;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::doorfeat::Region;
use crate::image::GrayImage;
use crate::{Error, Result};

pub const DEFAULT_WIDTH: usize = 320;
pub const DEFAULT_HEIGHT: usize = 240;

/// Weakest structural edge relative to the strongest step in a sampled scene.
const MIN_EDGE_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Day,
    Night,
    Shadow,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Day, Category::Night, Category::Shadow];

    pub fn name(self) -> &'static str {
        match self {
            Category::Day => "day",
            Category::Night => "night",
            Category::Shadow => "shadow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapPolarity {
    Dark,
    Bright,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistractorKind {
    /// Stands on the floor: no recess and no gap.
    Cabinet,
    /// Hangs on the wall, well above the floor.
    Window,
}

/// Door-like rectangle that is not a door. Columns `[x_left, x_right)`,
/// rows `[y_top, y_bottom)`; a cabinet's bottom is the wall/floor line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distractor {
    pub kind: DistractorKind,
    pub x_left: usize,
    pub x_right: usize,
    pub y_top: usize,
    pub y_bottom: usize,
    pub luminance: u8,
}

/// Vertical band of columns `[x0, x1)` darkened by `attenuation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowBand {
    pub x0: usize,
    pub x1: usize,
    pub attenuation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Door columns `[door_left, door_right)`.
    pub door_left: usize,
    pub door_right: usize,
    pub door_top: usize,
    /// First floor row under the door.
    pub door_bottom: usize,
    /// Rows between the door bottom and the wall/floor line, 0..=12.
    pub concavity: usize,
    /// Height of the strip under the door, 1..=6 rows.
    pub gap_height: usize,
    pub gap_polarity: GapPolarity,
    /// Gap luminance offset from the nearer of door and floor, 10..=80.
    pub gap_delta: u8,
    pub wall: u8,
    pub door: u8,
    pub floor: u8,
    pub category: Category,
    /// Night lamp centre, pixels.
    pub lamp: (f64, f64),
    pub shadow: Option<ShadowBand>,
    pub distractor: Option<Distractor>,
    /// Additive uniform noise amplitude, levels.
    pub noise: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Row where the wall meets the floor outside the door.
    pub fn floor_row(&self) -> usize {
        self.door_bottom + self.concavity
    }

    pub fn gap_luminance(&self) -> f64 {
        let (d, f, delta) = (
            f64::from(self.door),
            f64::from(self.floor),
            f64::from(self.gap_delta),
        );
        match self.gap_polarity {
            GapPolarity::Dark => d.min(f) - delta,
            GapPolarity::Bright => d.max(f) + delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width, self.height);
        let fail = |msg: &str| Err(Error::invalid(alloc::format!("scene: {msg}")));
        if w < 16 || h < 16 {
            return fail("image must be at least 16x16");
        }
        if !(1 <= self.door_left && self.door_left < self.door_right && self.door_right < w) {
            return fail("door columns outside image");
        }
        if self.concavity > 12 {
            return fail("concavity outside 0..=12");
        }
        if !(1..=6).contains(&self.gap_height) {
            return fail("gap height outside 1..=6");
        }
        if !(10..=80).contains(&self.gap_delta) {
            return fail("gap delta outside 10..=80");
        }
        if !(1 <= self.door_top && self.door_top + self.gap_height < self.door_bottom) {
            return fail("door rows do not leave room for the gap");
        }
        if self.floor_row() + 1 >= h {
            return fail("floor line outside image");
        }
        let g = self.gap_luminance();
        if !(0.0..=255.0).contains(&g) {
            return fail("gap luminance outside 0..=255");
        }
        if let Some(s) = self.shadow {
            if !(s.x0 < s.x1 && s.x1 <= w && s.attenuation > 0.0 && s.attenuation <= 1.0) {
                return fail("bad shadow band");
            }
        }
        if let Some(d) = self.distractor {
            if !(d.x_left >= 1 && d.x_left < d.x_right && d.x_right < w && d.y_top >= 1) {
                return fail("distractor columns outside image");
            }
            if d.y_top >= d.y_bottom || d.y_bottom > self.floor_row() {
                return fail("distractor rows outside wall");
            }
            if d.x_right > self.door_left && self.door_right > d.x_left {
                return fail("distractor overlaps the door");
            }
        }
        Ok(())
    }
}

/// Exact geometry of a rendered door.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub door: Region,
    /// Column of the wall/door transition on each side.
    pub left_post_x: f64,
    pub right_post_x: f64,
    pub concavity: f64,
    pub gap_delta: f64,
    pub floor_row: f64,
}

impl GroundTruth {
    pub fn post_distance(&self) -> f64 {
        self.right_post_x - self.left_post_x
    }
}

fn lighting_gain(spec: &SceneSpec, x: usize, y: usize) -> f64 {
    let mut gain = match spec.category {
        Category::Day | Category::Shadow => 1.0,
        Category::Night => {
            let (lx, ly) = spec.lamp;
            let s = 0.5 * spec.width as f64;
            let r2 = (x as f64 - lx) * (x as f64 - lx) + (y as f64 - ly) * (y as f64 - ly);
            0.6 * (0.75 + 0.25 * libm::exp(-r2 / (2.0 * s * s)))
        }
    };
    if let Some(band) = spec.shadow {
        if (band.x0..band.x1).contains(&x) {
            gain *= band.attenuation;
        }
    }
    gain
}

/// Scene luminance before lighting and noise.
fn albedo(spec: &SceneSpec, x: usize, y: usize) -> f64 {
    let floor_row = spec.floor_row();
    if (spec.door_left..spec.door_right).contains(&x) {
        if y >= spec.door_bottom {
            return f64::from(spec.floor);
        }
        if y >= spec.door_bottom - spec.gap_height {
            return spec.gap_luminance();
        }
        if y >= spec.door_top {
            return f64::from(spec.door);
        }
        return f64::from(spec.wall);
    }
    if let Some(d) = spec.distractor {
        if (d.x_left..d.x_right).contains(&x) && (d.y_top..d.y_bottom).contains(&y) {
            return f64::from(d.luminance);
        }
    }
    if y >= floor_row {
        f64::from(spec.floor)
    } else {
        f64::from(spec.wall)
    }
}

pub fn render_scene(spec: &SceneSpec) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = SplitMix64::seed_from_u64(spec.seed);
    let mut data = alloc::vec::Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut v = albedo(spec, x, y) * lighting_gain(spec, x, y);
            if spec.noise > 0.0 {
                v += spec.noise * (2.0 * rng.random::<f64>() - 1.0);
            }
            data.push(libm::round(v).clamp(0.0, 255.0) as u8);
        }
    }
    let image = GrayImage::from_raw(w, h, data)?;
    let truth = GroundTruth {
        door: Region {
            x_left: spec.door_left as f64,
            y_top: spec.door_top as f64,
            x_right: spec.door_right as f64,
            y_bottom: spec.door_bottom as f64,
        },
        left_post_x: spec.door_left as f64,
        right_post_x: spec.door_right as f64,
        concavity: spec.concavity as f64,
        gap_delta: f64::from(spec.gap_delta),
        floor_row: spec.floor_row() as f64,
    };
    Ok((image, truth))
}

fn uniform_usize(rng: &mut SplitMix64, lo: usize, hi: usize) -> usize {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn frac(n: usize, f: f64) -> usize {
    libm::round(n as f64 * f) as usize
}

fn luminance_apart(rng: &mut SplitMix64, lo: u8, hi: u8, from: &[u8], min_gap: u8) -> u8 {
    loop {
        let v: u8 = rng.random_range(lo..=hi);
        if from.iter().all(|&f| v.abs_diff(f) >= min_gap) {
            return v;
        }
    }
}

/// Per-scene seed derived from the corpus seed, category and index.
pub fn scene_seed(master: u64, category: Category, index: usize) -> u64 {
    let mut rng = SplitMix64::seed_from_u64(
        master ^ ((category as u64 + 1) << 56) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    rng.random()
}

/// Draws a scene from the documented parameter ranges.
///
/// Door width is 12-30% of the image width, concavity 2-10 px, gap height
/// 1-6 px with a 15-60 level offset, noise amplitude up to 4 levels. About
/// two thirds of the scenes carry a cabinet or window on the other side of
/// the image. Shadow scenes add a vertical band darkened to 55-80%.
pub fn sample_scene(
    category: Category,
    index: usize,
    master_seed: u64,
    width: usize,
    height: usize,
) -> SceneSpec {
    let seed = scene_seed(master_seed, category, index);
    let mut rng = SplitMix64::seed_from_u64(seed);
    let (w, h) = (width, height);

    let floor_row = uniform_usize(&mut rng, frac(h, 0.72), frac(h, 0.9));
    let concavity = uniform_usize(&mut rng, 2, 10);
    let door_bottom = floor_row - concavity;
    let door_top = uniform_usize(&mut rng, frac(h, 0.06), frac(h, 0.3));
    let door_w = uniform_usize(&mut rng, frac(w, 0.12), frac(w, 0.3));

    let with_distractor = rng.random::<f64>() < 0.65;
    let door_on_left = rng.random::<bool>();
    let margin = frac(w, 0.05).max(2);
    let (door_left, other_side) = if with_distractor {
        let half = w / 2;
        if door_on_left {
            let x = uniform_usize(&mut rng, margin, half - door_w - margin / 2);
            (x, (half + margin / 2, w - margin))
        } else {
            let x = uniform_usize(&mut rng, half + margin / 2, w - margin - door_w);
            (x, (margin, half - margin / 2))
        }
    } else {
        (uniform_usize(&mut rng, margin, w - margin - door_w), (0, 0))
    };

    let attenuation = (category == Category::Shadow).then(|| 0.55 + 0.25 * rng.random::<f64>());
    let gap_height = uniform_usize(&mut rng, 1, 6);
    let gap_polarity = if rng.random::<bool>() {
        GapPolarity::Dark
    } else {
        GapPolarity::Bright
    };
    // Redraw the palette until the structural edges (posts, floor line,
    // distractor outline) are at least half as strong as the strongest step
    // in the scene, so a detector with thresholds relative to the strongest
    // gradient can see them.
    let (door, floor, wall, gap_delta, distractor_lum) = loop {
        let door = rng.random_range(70..=180u8);
        let floor = rng.random_range(70..=180u8);
        let wall = luminance_apart(&mut rng, 50, 220, &[door, floor], 30);
        let gap_delta = rng.random_range(15..=60u8);
        let lum = luminance_apart(&mut rng, 40, 220, &[wall, floor], 30);
        let gap = match gap_polarity {
            GapPolarity::Dark => door.min(floor) - gap_delta,
            GapPolarity::Bright => door.max(floor) + gap_delta,
        };
        let mut structural = vec![wall.abs_diff(door), wall.abs_diff(floor)];
        let mut other = vec![door.abs_diff(gap), gap.abs_diff(floor), wall.abs_diff(gap)];
        if with_distractor {
            structural.push(lum.abs_diff(wall));
            other.push(lum.abs_diff(floor));
        }
        let weakest = f64::from(*structural.iter().min().unwrap());
        let brightest = [door, floor, wall, gap, lum].into_iter().max().unwrap();
        let strongest = structural
            .iter()
            .chain(&other)
            .map(|&v| f64::from(v))
            .chain(attenuation.map(|a| (1.0 - a) * f64::from(brightest)))
            .fold(0.0, f64::max);
        if weakest >= MIN_EDGE_RATIO * strongest {
            break (door, floor, wall, gap_delta, lum);
        }
    };

    let distractor = with_distractor.then(|| {
        let (lo, hi) = other_side;
        let dw = uniform_usize(&mut rng, frac(w, 0.12), frac(w, 0.25)).min(hi - lo - 1);
        let x_left = uniform_usize(&mut rng, lo, hi - dw);
        let luminance = distractor_lum;
        if rng.random::<bool>() {
            Distractor {
                kind: DistractorKind::Cabinet,
                x_left,
                x_right: x_left + dw,
                y_top: uniform_usize(&mut rng, frac(h, 0.12), frac(h, 0.4)),
                y_bottom: floor_row,
                luminance,
            }
        } else {
            let y_top = uniform_usize(&mut rng, frac(h, 0.08), frac(h, 0.2));
            let dh = uniform_usize(&mut rng, frac(h, 0.3), frac(h, 0.42));
            Distractor {
                kind: DistractorKind::Window,
                x_left,
                x_right: x_left + dw,
                y_top,
                y_bottom: (y_top + dh).min(floor_row - frac(h, 0.1)),
                luminance,
            }
        }
    });

    let shadow = (category == Category::Shadow).then(|| {
        let bw = uniform_usize(&mut rng, frac(w, 0.1), frac(w, 0.35));
        let x0 = uniform_usize(&mut rng, 0, w - bw);
        ShadowBand {
            x0,
            x1: x0 + bw,
            attenuation: attenuation.unwrap_or(1.0),
        }
    });

    let lamp = (
        w as f64 * rng.random::<f64>(),
        h as f64 * 0.3 * rng.random::<f64>(),
    );
    let noise = 4.0 * rng.random::<f64>();

    SceneSpec {
        width: w,
        height: h,
        door_left,
        door_right: door_left + door_w,
        door_top,
        door_bottom,
        concavity,
        gap_height,
        gap_polarity,
        gap_delta,
        wall,
        door,
        floor,
        category,
        lamp,
        shadow,
        distractor,
        noise,
        seed: rng.random(),
    }
}
