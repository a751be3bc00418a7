//! Door candidates and their three cues.
//!
//! A candidate is a pair of long near-vertical segments (the posts). For each
//! pair we measure the post separation, the concavity (how far the door's
//! bottom edge sits above the wall/floor line) and the intensity profile
//! across the strip under the door, which is darker or brighter than both the
//! door and the floor when a gap is present.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::image::GrayImage;
use crate::linefit::LineSegment;
use crate::{Error, Result};

pub const DEFAULT_VERTICAL_TOL_DEG: f64 = 10.0;
pub const DEFAULT_MIN_POST_FRAC: f64 = 0.25;
pub const DEFAULT_HORIZON_FRAC: f64 = 0.5;
pub const DEFAULT_MIN_WIDTH_FRAC: f64 = 0.05;
pub const DEFAULT_MAX_WIDTH_FRAC: f64 = 0.8;
pub const DEFAULT_COLUMNS: usize = 16;
pub const DEFAULT_WINDOW: usize = 6;
pub const DEFAULT_BINS: usize = 8;

/// The floor line is looked for in the lowest part of the image.
const FLOOR_REGION_FRAC: f64 = 0.4;
/// Segments within this distance of a line count as collinear with it.
const COLLINEAR_TOL: f64 = 0.75;
/// How far above the floor line a bottom edge may sit, px.
const BOTTOM_SEARCH: f64 = 16.0;
/// Minimum share of the post separation a bottom edge must cover.
const BOTTOM_MIN_OVERLAP: f64 = 0.5;
/// Intensity steps below this many levels are treated as noise.
const MIN_STEP: f64 = 4.0;
/// Relative step threshold when locating the lowest transition under a door.
const REL_STEP: f64 = 0.08;
/// Vertical posts closer than this are treated as the same edge, px.
const DUPLICATE_POST_DX: f64 = 1.5;
/// Concavity is scaled by this before clamping to `[0, 1]`, px.
const CONCAVITY_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    /// Maximum tilt of a post from vertical (and of a floor or bottom edge
    /// from horizontal), degrees.
    pub vertical_tol_deg: f64,
    /// Minimum post length as a fraction of the image height.
    pub min_post_frac: f64,
    /// Horizon row as a fraction of the image height; posts must reach above.
    pub horizon_frac: f64,
    /// Post separation bounds as fractions of the image width.
    pub min_width_frac: f64,
    pub max_width_frac: f64,
    /// Sample columns between the posts.
    pub columns: usize,
    /// Half height of the gap window, rows.
    pub window: usize,
    /// Gap profile bins.
    pub bins: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            vertical_tol_deg: DEFAULT_VERTICAL_TOL_DEG,
            min_post_frac: DEFAULT_MIN_POST_FRAC,
            horizon_frac: DEFAULT_HORIZON_FRAC,
            min_width_frac: DEFAULT_MIN_WIDTH_FRAC,
            max_width_frac: DEFAULT_MAX_WIDTH_FRAC,
            columns: DEFAULT_COLUMNS,
            window: DEFAULT_WINDOW,
            bins: DEFAULT_BINS,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.vertical_tol_deg > 0.0
            && self.vertical_tol_deg < 45.0
            && self.min_post_frac > 0.0
            && (0.0..=1.0).contains(&self.horizon_frac)
            && 0.0 <= self.min_width_frac
            && self.min_width_frac < self.max_width_frac
            && self.columns >= 2
            && self.window >= 1
            && self.bins >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("feature parameters out of range"))
        }
    }

    /// Length of the feature vector.
    pub fn dim(&self) -> usize {
        3 + self.bins
    }

    fn tol(&self) -> f64 {
        self.vertical_tol_deg.to_radians()
    }
}

fn is_vertical(s: &LineSegment, tol: f64) -> bool {
    (s.angle() - FRAC_PI_2).abs() <= tol
}

fn is_horizontal(s: &LineSegment, tol: f64) -> bool {
    let a = s.angle();
    a.min(core::f64::consts::PI - a) <= tol
}

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_left: f64,
    pub y_top: f64,
    pub x_right: f64,
    pub y_bottom: f64,
}

impl Region {
    pub fn area(&self) -> f64 {
        (self.x_right - self.x_left).max(0.0) * (self.y_bottom - self.y_top).max(0.0)
    }

    pub fn iou(&self, other: &Region) -> f64 {
        let inter = Region {
            x_left: self.x_left.max(other.x_left),
            y_top: self.y_top.max(other.y_top),
            x_right: self.x_right.min(other.x_right),
            y_bottom: self.y_bottom.min(other.y_bottom),
        }
        .area();
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    fn clamped(self, width: usize, height: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        Region {
            x_left: self.x_left.clamp(0.0, w),
            y_top: self.y_top.clamp(0.0, h),
            x_right: self.x_right.clamp(0.0, w),
            y_bottom: self.y_bottom.clamp(0.0, h),
        }
    }
}

/// Wall/floor boundary `y = intercept + slope * x`. The intercept is placed
/// on the first floor row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorLine {
    pub intercept: f64,
    pub slope: f64,
}

impl FloorLine {
    pub fn y_at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoorCandidate {
    pub left_post: LineSegment,
    pub right_post: LineSegment,
    pub bottom_edge: Option<LineSegment>,
    pub floor: Option<FloorLine>,
}

impl DoorCandidate {
    /// Row of the lower of the two post bottoms.
    pub fn base_row(&self) -> f64 {
        self.left_post.max_y().max(self.right_post.max_y())
    }

    pub fn region(&self, width: usize, height: usize) -> Region {
        let y = self.base_row();
        let (xl, xr) = (self.left_post.x_at(y), self.right_post.x_at(y));
        let y_bottom = match self.bottom_edge {
            Some(be) => be.y_at(0.5 * (xl + xr)),
            None => y,
        };
        Region {
            x_left: xl.min(xr),
            y_top: self.left_post.min_y().min(self.right_post.min_y()),
            x_right: xl.max(xr),
            y_bottom,
        }
        .clamped(width, height)
    }
}

fn mean_x(s: &LineSegment) -> f64 {
    0.5 * (s.p0.x + s.p1.x)
}

fn shift_x(s: &LineSegment, dx: f64) -> LineSegment {
    LineSegment::from_coords(s.p0.x + dx, s.p0.y, s.p1.x + dx, s.p1.y)
}

fn shift_y(s: &LineSegment, dy: f64) -> LineSegment {
    LineSegment::from_coords(s.p0.x, s.p0.y + dy, s.p1.x, s.p1.y + dy)
}

fn pixel(img: &GrayImage, x: isize, y: isize) -> f64 {
    f64::from(img.get_clamped(x, y))
}

fn round_i(v: f64) -> isize {
    libm::round(v) as isize
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Index of the largest value; ties go to the offset nearest zero, then the
/// lower offset.
fn argmax_offset(scores: &[(isize, f64)]) -> isize {
    let mut best = scores[0];
    for &(k, v) in &scores[1..] {
        if v > best.1 || (v == best.1 && k.abs() < best.0.abs()) {
            best = (k, v);
        }
    }
    best.0
}

/// Estimates the wall/floor line from near-horizontal segments in the lower
/// part of the image. Collinear segments are grouped and the group with the
/// widest horizontal extent wins; its length-weighted least-squares line is
/// then moved onto the strongest nearby row transition of the raw image.
pub fn estimate_floor_line(
    segs: &[LineSegment],
    img: &GrayImage,
    params: &FeatureParams,
) -> Option<FloorLine> {
    let min_y = (1.0 - FLOOR_REGION_FRAC) * img.height() as f64;
    let tol = params.tol();
    let cands: Vec<&LineSegment> = segs
        .iter()
        .filter(|s| is_horizontal(s, tol) && s.midpoint().y >= min_y)
        .collect();
    if cands.is_empty() {
        return None;
    }

    let mut best: Option<(f64, f64, Vec<&LineSegment>)> = None;
    for seed in &cands {
        let members: Vec<&LineSegment> = cands
            .iter()
            .copied()
            .filter(|s| (s.midpoint().y - seed.y_at(s.midpoint().x)).abs() <= COLLINEAR_TOL)
            .collect();
        let lo = members
            .iter()
            .map(|s| s.min_x())
            .fold(f64::INFINITY, f64::min);
        let hi = members
            .iter()
            .map(|s| s.max_x())
            .fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let mean_y = members.iter().map(|s| s.midpoint().y).sum::<f64>() / members.len() as f64;
        let better = match &best {
            None => true,
            Some((bs, by, _)) => span > *bs || (span == *bs && mean_y > *by),
        };
        if better {
            best = Some((span, mean_y, members));
        }
    }
    let (_, _, members) = best?;

    // Length-weighted least squares through the member endpoints.
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in &members {
        let w = 0.5 * s.length();
        for p in [s.p0, s.p1] {
            sw += w;
            sx += w * p.x;
            sy += w * p.y;
            sxx += w * p.x * p.x;
            sxy += w * p.x * p.y;
        }
    }
    let var = sxx - sx * sx / sw;
    let mut line = if var > 1e-9 {
        let slope = (sxy - sx * sy / sw) / var;
        FloorLine {
            intercept: (sy - slope * sx) / sw,
            slope,
        }
    } else {
        let lowest = members
            .iter()
            .map(|s| s.max_y())
            .fold(f64::NEG_INFINITY, f64::max);
        FloorLine {
            intercept: lowest,
            slope: 0.0,
        }
    };

    // Snap onto the raw transition: rows r+k-1 -> r+k, median over columns.
    let mut cols: Vec<isize> = Vec::new();
    for s in &members {
        let (a, b) = (
            libm::ceil(s.min_x()) as isize,
            libm::floor(s.max_x()) as isize,
        );
        cols.extend((a..=b).step_by(2));
    }
    cols.sort_unstable();
    cols.dedup();
    let residual = cols
        .iter()
        .map(|&x| round_i(line.y_at(x as f64)) as f64 - line.y_at(x as f64))
        .sum::<f64>()
        / cols.len().max(1) as f64;
    let scores: Vec<(isize, f64)> = (-3..=3)
        .map(|k| {
            let mut d: Vec<f64> = cols
                .iter()
                .map(|&x| {
                    let r = round_i(line.y_at(x as f64)) + k;
                    (pixel(img, x, r) - pixel(img, x, r - 1)).abs()
                })
                .collect();
            (k, median(&mut d))
        })
        .collect();
    line.intercept += argmax_offset(&scores) as f64 + residual;

    // Refit through the per-column transition rows, which removes the tilt
    // picked up from segment endpoints and from merged neighbouring edges.
    let pts: Vec<(f64, f64)> = cols
        .iter()
        .filter_map(|&x| {
            let r = round_i(line.y_at(x as f64));
            let y = strongest_step(|k| pixel(img, x, r + k) - pixel(img, x, r + k - 1), 1)?;
            Some((x as f64, (r + y) as f64))
        })
        .collect();
    if let Some((intercept, slope)) = robust_line(&pts) {
        line = FloorLine { intercept, slope };
    }
    Some(line)
}

/// Offset in `-reach..=reach` with the largest absolute step, if that step
/// is above the noise floor.
fn strongest_step(step: impl Fn(isize) -> f64, reach: isize) -> Option<isize> {
    let scores: Vec<(isize, f64)> = (-reach..=reach).map(|k| (k, step(k).abs())).collect();
    let k = argmax_offset(&scores);
    (scores[(k + reach) as usize].1 >= MIN_STEP).then_some(k)
}

/// Line `v = a + b u` through `pts`: Theil-Sen estimate, then least squares
/// over the points within 0.75 of it. `None` without spread in `u`.
fn robust_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let stride = pts.len().div_ceil(64);
    let sub: Vec<(f64, f64)> = pts.iter().copied().step_by(stride).collect();
    let mut slopes = Vec::new();
    for (i, p) in sub.iter().enumerate() {
        for q in &sub[i + 1..] {
            if (q.0 - p.0).abs() >= 1.0 {
                slopes.push((q.1 - p.1) / (q.0 - p.0));
            }
        }
    }
    if slopes.is_empty() {
        return None;
    }
    let b = median(&mut slopes);
    let mut offsets: Vec<f64> = pts.iter().map(|p| p.1 - b * p.0).collect();
    let a = median(&mut offsets);
    let inliers: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|p| (p.1 - a - b * p.0).abs() <= 0.75)
        .collect();
    Some(least_squares(&inliers).unwrap_or((a, b)))
}

/// Unweighted least-squares line `v = a + b u`; `None` without spread in `u`.
fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx < 1e-9 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Cuts the part of a near-vertical segment that lies below the floor line.
fn clip_at_floor(s: &LineSegment, floor: Option<&FloorLine>) -> Option<LineSegment> {
    let Some(f) = floor else {
        return Some(*s);
    };
    let (top, bottom) = (s.top(), s.bottom());
    let limit = f.y_at(s.x_at(f.intercept));
    let limit = f.y_at(s.x_at(limit));
    if top.y >= limit {
        return None;
    }
    if bottom.y <= limit {
        return Some(*s);
    }
    Some(LineSegment::from_coords(top.x, top.y, s.x_at(limit), limit))
}

/// Moves a post onto the strongest column transition within two pixels,
/// measured on the raw image along the post's rows.
fn refine_post(s: &LineSegment, img: &GrayImage) -> LineSegment {
    let (y0, y1) = (
        libm::ceil(s.min_y()) as isize + 2,
        libm::floor(s.max_y()) as isize - 2,
    );
    if y1 < y0 {
        return *s;
    }
    let rows: Vec<isize> = (y0..=y1).collect();
    let residual = rows
        .iter()
        .map(|&y| round_i(s.x_at(y as f64)) as f64 - s.x_at(y as f64))
        .sum::<f64>()
        / rows.len() as f64;
    let scores: Vec<(isize, f64)> = (-2..=2)
        .map(|k| {
            let total: f64 = rows
                .iter()
                .map(|&y| {
                    let c = round_i(s.x_at(y as f64)) + k;
                    (pixel(img, c, y) - pixel(img, c - 1, y)).abs()
                })
                .sum();
            (k, total / rows.len() as f64)
        })
        .collect();
    let snapped = shift_x(s, argmax_offset(&scores) as f64 + residual);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|&y| {
            let c = round_i(snapped.x_at(y as f64));
            let k = strongest_step(|k| pixel(img, c + k, y) - pixel(img, c + k - 1, y), 1)?;
            Some((y as f64, (c + k) as f64))
        })
        .collect();
    match robust_line(&pts) {
        Some((a, b)) => {
            let (top, bottom) = (s.min_y(), s.max_y());
            LineSegment::from_coords(a + b * top, top, a + b * bottom, bottom)
        }
        None => snapped,
    }
}

/// Evenly spaced columns strictly between the posts, two pixels clear of each.
fn sample_columns(xl: f64, xr: f64, n: usize) -> Vec<isize> {
    let (a, b) = (xl + 2.0, xr - 2.0);
    if b < a {
        return Vec::new();
    }
    let mut cols: Vec<isize> = (0..n)
        .map(|i| round_i(a + (b - a) * (i as f64 + 0.5) / n as f64))
        .collect();
    cols.dedup();
    cols
}

fn post_columns(left: &LineSegment, right: &LineSegment, y: f64, n: usize) -> Vec<isize> {
    sample_columns(left.x_at(y), right.x_at(y), n)
}

/// Mean intensity over `cols` of the rows `edge(x) + k` for each k in `ks`.
fn mean_profile(
    img: &GrayImage,
    edge: &LineSegment,
    cols: &[isize],
    ks: core::ops::RangeInclusive<isize>,
) -> Vec<f64> {
    ks.map(|k| {
        cols.iter()
            .map(|&x| pixel(img, x, round_i(edge.y_at(x as f64)) + k))
            .sum::<f64>()
            / cols.len() as f64
    })
    .collect()
}

/// Finds the door's bottom edge between two posts and moves it onto the
/// lowest significant row transition under the door (the first floor row).
fn find_bottom_edge(
    left: &LineSegment,
    right: &LineSegment,
    segs: &[LineSegment],
    floor: Option<&FloorLine>,
    img: &GrayImage,
    params: &FeatureParams,
) -> Option<LineSegment> {
    let y = left.max_y().max(right.max_y());
    let (xl, xr) = (left.x_at(y), right.x_at(y));
    let width = xr - xl;
    let tol = params.tol();
    let low_region = (1.0 - FLOOR_REGION_FRAC) * img.height() as f64;
    let mut best: Option<(f64, f64, LineSegment)> = None;
    for s in segs.iter().filter(|s| is_horizontal(s, tol)) {
        let m = s.midpoint();
        if !(xl < m.x && m.x < xr) {
            continue;
        }
        let in_band = match floor {
            Some(f) => {
                let fy = f.y_at(m.x);
                fy - BOTTOM_SEARCH <= m.y && m.y <= fy + 3.0
            }
            None => m.y >= low_region,
        };
        if !in_band {
            continue;
        }
        let overlap = s.max_x().min(xr) - s.min_x().max(xl);
        if overlap < BOTTOM_MIN_OVERLAP * width {
            continue;
        }
        let better = match best {
            None => true,
            Some((o, my, _)) => overlap > o || (overlap == o && m.y > my),
        };
        if better {
            best = Some((overlap, m.y, *s));
        }
    }
    let cols = post_columns(left, right, y, params.columns);
    match (best, floor) {
        (Some((_, _, seg)), floor) => {
            if cols.is_empty() {
                return Some(seg);
            }
            // Follow the floor direction rather than the segment's own, which
            // is tilted by its end pixels.
            let seg = match floor {
                Some(f) => {
                    let m = seg.midpoint();
                    let off = m.y - f.y_at(m.x);
                    LineSegment::from_coords(xl, f.y_at(xl) + off, xr, f.y_at(xr) + off)
                }
                None => seg,
            };
            let w = params.window as isize;
            Some(lowest_transition(img, &seg, &cols, -2, w + 1).unwrap_or(seg))
        }
        // The strip under a door is often too thin to survive smoothing, so
        // without a segment the raw profile above the floor line is searched.
        (None, Some(f)) if !cols.is_empty() => {
            let base = LineSegment::from_coords(xl, f.y_at(xl), xr, f.y_at(xr));
            lowest_transition(img, &base, &cols, -(BOTTOM_SEARCH as isize), 3)
        }
        _ => None,
    }
}

/// Shifts `base` onto the lowest row offset in `lo..=hi` whose mean step
/// (over `cols`, from the row above) is significant.
fn lowest_transition(
    img: &GrayImage,
    base: &LineSegment,
    cols: &[isize],
    lo: isize,
    hi: isize,
) -> Option<LineSegment> {
    let prof = mean_profile(img, base, cols, lo - 1..=hi);
    // d[i] is the step into row offset lo + i.
    let d: Vec<f64> = prof.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let peak = d.iter().copied().fold(0.0, f64::max);
    let thr = MIN_STEP.max(REL_STEP * peak);
    let i = d.iter().rposition(|&v| v >= thr)?;
    let k = lo + i as isize;
    let residual = cols
        .iter()
        .map(|&x| round_i(base.y_at(x as f64)) as f64 - base.y_at(x as f64))
        .sum::<f64>()
        / cols.len() as f64;
    Some(shift_y(base, k as f64 + residual))
}

/// Forms door candidates from line segments: long near-vertical segments
/// reaching above the horizon, cut at the floor line, paired left to right
/// when their separation is plausible for a door.
pub fn find_post_candidates(
    segs: &[LineSegment],
    img: &GrayImage,
    params: &FeatureParams,
) -> Vec<DoorCandidate> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let tol = params.tol();
    let floor = estimate_floor_line(segs, img, params);
    let horizon = params.horizon_frac * h;

    let mut posts: Vec<LineSegment> = segs
        .iter()
        .filter(|s| is_vertical(s, tol))
        .filter_map(|s| clip_at_floor(s, floor.as_ref()))
        .filter(|s| s.length() >= params.min_post_frac * h && s.top().y < horizon)
        .collect();
    posts.sort_by(|a, b| {
        b.length()
            .total_cmp(&a.length())
            .then_with(|| mean_x(a).total_cmp(&mean_x(b)))
    });
    let mut kept: Vec<LineSegment> = Vec::new();
    for p in posts {
        let dup = kept.iter().any(|k| {
            (mean_x(k) - mean_x(&p)).abs() <= DUPLICATE_POST_DX
                && k.min_y() < p.max_y()
                && p.min_y() < k.max_y()
        });
        if !dup {
            kept.push(refine_post(&p, img));
        }
    }
    kept.sort_by(|a, b| mean_x(a).total_cmp(&mean_x(b)));

    let (lo, hi) = (params.min_width_frac * w, params.max_width_frac * w);
    let mut out = Vec::new();
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            let sep = mean_x(&kept[j]) - mean_x(&kept[i]);
            if sep < lo || sep > hi {
                continue;
            }
            let (left, right) = (kept[i], kept[j]);
            out.push(DoorCandidate {
                left_post: left,
                right_post: right,
                bottom_edge: find_bottom_edge(&left, &right, segs, floor.as_ref(), img, params),
                floor,
            });
        }
    }
    out
}

/// Horizontal post separation at the row of the lower post bottom.
pub fn post_distance(c: &DoorCandidate) -> f64 {
    let y = c.base_row();
    (c.right_post.x_at(y) - c.left_post.x_at(y)).abs()
}

/// Mean vertical offset between the bottom edge and the floor line over the
/// columns between the posts; `None` when either is missing.
pub fn concavity(c: &DoorCandidate, params: &FeatureParams) -> Option<f64> {
    let (be, floor) = (c.bottom_edge?, c.floor?);
    let cols = post_columns(&c.left_post, &c.right_post, c.base_row(), params.columns);
    if cols.is_empty() {
        return None;
    }
    let total: f64 = cols
        .iter()
        .map(|&x| (be.y_at(x as f64) - floor.y_at(x as f64)).abs())
        .sum();
    Some(total / cols.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    /// Positive for a strip brighter than its surroundings, negative for a
    /// darker one; zero when there is no such strip.
    pub signed_contrast: f64,
    /// Mean intensity across the window, resampled and scaled to `[0, 1]`.
    pub bins: Vec<f64>,
}

impl GapProfile {
    pub fn contrast(&self) -> f64 {
        self.signed_contrast.abs()
    }
}

/// Area-weighted resampling of `src` onto `n` equal bins.
pub fn resample(src: &[f64], n: usize) -> Vec<f64> {
    let m = src.len() as f64;
    (0..n)
        .map(|k| {
            let (a, b) = (k as f64 * m / n as f64, (k + 1) as f64 * m / n as f64);
            let mut acc = 0.0;
            let mut i = libm::floor(a) as usize;
            while (i as f64) < b && i < src.len() {
                let lo = a.max(i as f64);
                let hi = b.min(i as f64 + 1.0);
                acc += src[i] * (hi - lo);
                i += 1;
            }
            acc / (b - a)
        })
        .collect()
}

/// Intensity profile across the bottom edge, averaged over the sample
/// columns. The strip just above the edge is compared with the door above it
/// and the floor below it; a strip darker than both or brighter than both
/// gives a nonzero contrast.
pub fn bottom_gap_profile(
    c: &DoorCandidate,
    img: &GrayImage,
    params: &FeatureParams,
) -> Option<GapProfile> {
    let be = c.bottom_edge?;
    let cols = post_columns(&c.left_post, &c.right_post, c.base_row(), params.columns);
    if cols.is_empty() {
        return None;
    }
    let w = params.window as isize;
    let rows_in_image = cols.iter().all(|&x| {
        let r = round_i(be.y_at(x as f64));
        r - w >= 0 && r + w <= img.height() as isize
    });
    if !rows_in_image && img.height() < 2 {
        return None;
    }
    // Offsets -w-3 ..= w+4 relative to the edge row.
    let base = -w - 3;
    let prof = mean_profile(img, &be, &cols, base..=w + 4);
    let at = |k: isize| prof[(k - base) as usize];
    let mean = |ks: core::ops::RangeInclusive<isize>| {
        let n = ks.clone().count() as f64;
        ks.map(at).sum::<f64>() / n
    };
    let above = mean(-w - 3..=-w - 1);
    let below = mean(2..=4);
    let strip: Vec<f64> = (-w..=1).map(at).collect();
    let gmin = strip.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = strip.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dark = (above.min(below) - gmin).max(0.0);
    let bright = (gmax - above.max(below)).max(0.0);
    let signed_contrast = if bright > dark { bright } else { -dark };

    let window: Vec<f64> = (-w..w).map(at).collect();
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let bins = resample(&window, params.bins)
        .into_iter()
        .map(|v| {
            if hi - lo > 1e-9 {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Some(GapProfile {
        signed_contrast,
        bins,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// `[post distance, concavity, gap contrast, profile bins...]`.
    pub values: Vec<f64>,
    pub concavity_absent: bool,
    pub gap_absent: bool,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Raw (unnormalized) features: post distance over image width, concavity
/// over 10 px clamped to `[0, 1]`, contrast over 255 and the profile bins.
/// Missing cues are encoded as zeros and flagged.
pub fn raw_features(c: &DoorCandidate, img: &GrayImage, params: &FeatureParams) -> FeatureVector {
    let mut values = Vec::with_capacity(params.dim());
    values.push(post_distance(c) / img.width() as f64);
    let conc = concavity(c, params);
    values.push(conc.map_or(0.0, |v| (v / CONCAVITY_SCALE).clamp(0.0, 1.0)));
    let gap = bottom_gap_profile(c, img, params);
    match &gap {
        Some(g) => {
            values.push(g.contrast() / 255.0);
            values.extend_from_slice(&g.bins);
        }
        None => values.resize(3 + params.bins, 0.0),
    }
    FeatureVector {
        values,
        concavity_absent: conc.is_none(),
        gap_absent: gap.is_none(),
    }
}

/// Raw features, min-max normalized when `stats` is given.
pub fn build_feature_vector(
    c: &DoorCandidate,
    img: &GrayImage,
    params: &FeatureParams,
    stats: Option<&NormalizationStats>,
) -> Result<FeatureVector> {
    let raw = raw_features(c, img, params);
    match stats {
        Some(s) => s.normalize(&raw),
        None => Ok(raw),
    }
}

/// Per-component minimum and maximum of the training vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl NormalizationStats {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                found: max.len(),
            });
        }
        if min
            .iter()
            .zip(&max)
            .any(|(a, b)| a.partial_cmp(b).is_none_or(|o| o.is_gt()))
        {
            return Err(Error::invalid("normalization minimum exceeds maximum"));
        }
        Ok(Self { min, max })
    }

    pub fn fit(vectors: &[FeatureVector]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyData("feature vectors"))?;
        let d = first.dim();
        let mut min = alloc::vec![f64::INFINITY; d];
        let mut max = alloc::vec![f64::NEG_INFINITY; d];
        for v in vectors {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.dim(),
                });
            }
            for (i, &x) in v.values.iter().enumerate() {
                min[i] = min[i].min(x);
                max[i] = max[i].max(x);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// Maps each component to `[0, 1]`; constant components map to 0 and
    /// absent cues stay 0.
    pub fn normalize(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.dim(),
            });
        }
        let mut values: Vec<f64> = v
            .values
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        if v.concavity_absent {
            values[1] = 0.0;
        }
        if v.gap_absent {
            for x in &mut values[2..] {
                *x = 0.0;
            }
        }
        Ok(FeatureVector {
            values,
            concavity_absent: v.concavity_absent,
            gap_absent: v.gap_absent,
        })
    }
}
