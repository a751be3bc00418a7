//! Edge linking and straight-line fitting.
//!
//! Edge pixels are tracked into chains that stop at junctions, each chain is
//! split recursively at its point of maximum deviation from the chord, and
//! nearly collinear neighbouring pieces are merged back together.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use crate::canny::EdgeMap;

pub const DEFAULT_DEV_TOL: f64 = 2.0;
pub const DEFAULT_ANGLE_TOL: f64 = 0.05;
pub const DEFAULT_GAP_TOL: f64 = 5.0;
pub const DEFAULT_MIN_LEN: f64 = 20.0;
pub const DEFAULT_MERGE_OFFSET: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    /// Maximum perpendicular deviation of a chain point from its segment, px.
    pub dev_tol: f64,
    /// Maximum direction difference for merging, radians.
    pub angle_tol: f64,
    /// Maximum distance between the nearest endpoints of merged segments, px.
    pub gap_tol: f64,
    /// Maximum sideways offset between merged segments, px.
    pub merge_offset: f64,
    /// Segments shorter than this are dropped, px.
    pub min_len: f64,
}

impl Default for LineParams {
    fn default() -> Self {
        Self {
            dev_tol: DEFAULT_DEV_TOL,
            angle_tol: DEFAULT_ANGLE_TOL,
            gap_tol: DEFAULT_GAP_TOL,
            merge_offset: DEFAULT_MERGE_OFFSET,
            min_len: DEFAULT_MIN_LEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    fn cmp_lex(&self, other: &Point) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }
}

/// Connected run of edge pixels in tracking order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeChain {
    pub label: usize,
    pub points: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub p0: Point,
    pub p1: Point,
}

impl LineSegment {
    pub const fn new(p0: Point, p1: Point) -> Self {
        Self { p0, p1 }
    }

    pub fn from_coords(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(Point::new(x0, y0), Point::new(x1, y1))
    }

    pub fn length(&self) -> f64 {
        self.p0.dist(self.p1)
    }

    /// Undirected orientation in `[0, pi)`.
    pub fn angle(&self) -> f64 {
        let a = libm::atan2(self.p1.y - self.p0.y, self.p1.x - self.p0.x);
        let a = if a < 0.0 { a + PI } else { a };
        if a >= PI {
            0.0
        } else {
            a
        }
    }

    pub fn midpoint(&self) -> Point {
        Point::new(0.5 * (self.p0.x + self.p1.x), 0.5 * (self.p0.y + self.p1.y))
    }

    pub fn min_x(&self) -> f64 {
        self.p0.x.min(self.p1.x)
    }

    pub fn max_x(&self) -> f64 {
        self.p0.x.max(self.p1.x)
    }

    pub fn min_y(&self) -> f64 {
        self.p0.y.min(self.p1.y)
    }

    pub fn max_y(&self) -> f64 {
        self.p0.y.max(self.p1.y)
    }

    /// Endpoint with the smaller y (higher in the image).
    pub fn top(&self) -> Point {
        if self.p0.y <= self.p1.y {
            self.p0
        } else {
            self.p1
        }
    }

    pub fn bottom(&self) -> Point {
        if self.p0.y <= self.p1.y {
            self.p1
        } else {
            self.p0
        }
    }

    /// x on the supporting line at row `y`; the mean x for horizontal segments.
    pub fn x_at(&self, y: f64) -> f64 {
        let dy = self.p1.y - self.p0.y;
        if dy.abs() < 1e-12 {
            return 0.5 * (self.p0.x + self.p1.x);
        }
        self.p0.x + (y - self.p0.y) * (self.p1.x - self.p0.x) / dy
    }

    /// y on the supporting line at column `x`; the mean y for vertical segments.
    pub fn y_at(&self, x: f64) -> f64 {
        let dx = self.p1.x - self.p0.x;
        if dx.abs() < 1e-12 {
            return 0.5 * (self.p0.y + self.p1.y);
        }
        self.p0.y + (x - self.p0.x) * (self.p1.y - self.p0.y) / dx
    }

    /// Perpendicular distance from `p` to the supporting line, or to `p0`
    /// when the segment is degenerate.
    pub fn distance_to_line(&self, p: Point) -> f64 {
        point_line_distance(p, self.p0, self.p1)
    }

    /// Same segment with endpoints in lexicographic (x, then y) order.
    pub fn canonical(self) -> Self {
        if self.p1.cmp_lex(&self.p0) == Ordering::Less {
            Self::new(self.p1, self.p0)
        } else {
            self
        }
    }
}

pub fn point_line_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = libm::hypot(dx, dy);
    if len < 1e-12 {
        return p.dist(a);
    }
    ((p.x - a.x) * dy - (p.y - a.y) * dx).abs() / len
}

/// Direction difference between two undirected angles in `[0, pi)`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % PI;
    d.min(PI - d)
}

const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Number of separate edge branches leaving a pixel: the count of
/// off-to-on transitions walking once around its 8-neighbourhood.
fn branch_count(edges: &EdgeMap, x: usize, y: usize) -> usize {
    let on = |k: usize| {
        let (dx, dy) = RING[k % 8];
        edges.get_signed(x as isize + dx, y as isize + dy)
    };
    (0..8).filter(|&k| !on(k) && on(k + 1)).count()
}

fn neighbor_count(edges: &EdgeMap, x: usize, y: usize) -> usize {
    RING.iter()
        .filter(|&&(dx, dy)| edges.get_signed(x as isize + dx, y as isize + dy))
        .count()
}

/// A junction is an edge pixel where more than two branches meet.
pub fn is_junction(edges: &EdgeMap, x: usize, y: usize) -> bool {
    edges.get(x, y) && branch_count(edges, x, y) > 2
}

struct Tracker<'a> {
    edges: &'a EdgeMap,
    junction: Vec<bool>,
    visited: Vec<bool>,
}

impl Tracker<'_> {
    fn idx(&self, p: (usize, usize)) -> usize {
        p.1 * self.edges.width() + p.0
    }

    fn is_junction(&self, p: (usize, usize)) -> bool {
        self.junction[self.idx(p)]
    }

    fn is_visited(&self, p: (usize, usize)) -> bool {
        self.visited[self.idx(p)]
    }

    fn mark(&mut self, p: (usize, usize)) {
        let i = self.idx(p);
        self.visited[i] = true;
    }

    /// Edge neighbours with 4-connected ones first, each group in ring order.
    fn neighbors(&self, p: (usize, usize)) -> Vec<(usize, usize)> {
        const ORDER: [usize; 8] = [0, 2, 4, 6, 1, 3, 5, 7];
        ORDER
            .iter()
            .filter_map(|&k| {
                let (dx, dy) = RING[k];
                let (nx, ny) = (p.0 as isize + dx, p.1 as isize + dy);
                self.edges
                    .get_signed(nx, ny)
                    .then_some((nx as usize, ny as usize))
            })
            .collect()
    }

    fn walk(&mut self, start: (usize, usize)) -> Vec<(usize, usize)> {
        let mut path = Vec::new();
        let mut prev: Option<(usize, usize)> = None;
        let mut cur = start;
        loop {
            let nbrs = self.neighbors(cur);
            // Past the first step a neighbouring junction ends the chain; an
            // unclaimed one becomes the chain's last point.
            if prev.is_some() {
                if let Some(&j) = nbrs
                    .iter()
                    .find(|&&n| Some(n) != prev && self.is_junction(n))
                {
                    if !self.is_visited(j) {
                        self.mark(j);
                        path.push(j);
                    }
                    break;
                }
            }
            if let Some(&n) = nbrs
                .iter()
                .find(|&&n| !self.is_visited(n) && !self.is_junction(n))
            {
                self.mark(n);
                path.push(n);
                prev = Some(cur);
                cur = n;
                continue;
            }
            if prev.is_none() && !self.is_junction(cur) {
                // A start pixel whose only way on is a junction.
                if let Some(&j) = nbrs.iter().find(|&&n| !self.is_visited(n)) {
                    self.mark(j);
                    path.push(j);
                }
            }
            break;
        }
        path
    }

    fn trace(&mut self, start: (usize, usize)) -> Vec<(usize, usize)> {
        self.mark(start);
        let forward = self.walk(start);
        let backward = self.walk(start);
        let mut points: Vec<_> = backward.into_iter().rev().collect();
        points.push(start);
        points.extend(forward);
        points
    }
}

/// Groups every edge pixel into exactly one chain. Tracking starts from line
/// ends, then from any remaining pixel (closed loops, segments bounded by
/// junctions on both sides), then from unclaimed junctions.
pub fn track_edge_chains(edges: &EdgeMap) -> Vec<EdgeChain> {
    let (w, h) = (edges.width(), edges.height());
    let mut junction = vec![false; w * h];
    for (x, y) in edges.pixels() {
        junction[y * w + x] = is_junction(edges, x, y);
    }
    let mut tracker = Tracker {
        edges,
        junction,
        visited: vec![false; w * h],
    };
    let mut chains = Vec::new();

    let ends: Vec<_> = edges
        .pixels()
        .filter(|&(x, y)| neighbor_count(edges, x, y) <= 1)
        .collect();
    let rest: Vec<_> = edges
        .pixels()
        .filter(|&(x, y)| !tracker.junction[y * w + x])
        .collect();
    let junctions: Vec<_> = edges
        .pixels()
        .filter(|&(x, y)| tracker.junction[y * w + x])
        .collect();

    for p in ends.into_iter().chain(rest).chain(junctions) {
        if !tracker.visited[p.1 * w + p.0] {
            let points = tracker.trace(p);
            chains.push(EdgeChain {
                label: chains.len(),
                points,
            });
        }
    }
    chains
}

/// Index ranges `(i, j)` of the chain covered by each fitted segment, in
/// chain order. Consecutive ranges share their boundary point.
pub fn split_ranges(points: &[(usize, usize)], dev_tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if points.len() < 2 {
        return out;
    }
    let pt = |i: usize| Point::new(points[i].0 as f64, points[i].1 as f64);
    let mut stack = vec![(0, points.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        let (a, b) = (pt(i), pt(j));
        let mut worst = (0.0, i);
        for k in i + 1..j {
            let d = point_line_distance(pt(k), a, b);
            if d > worst.0 {
                worst = (d, k);
            }
        }
        if worst.0 > dev_tol {
            stack.push((worst.1, j));
            stack.push((i, worst.1));
        } else {
            out.push((i, j));
        }
    }
    out
}

/// Recursively splits a chain at its point of maximum deviation from the
/// end-to-end chord until every point lies within `dev_tol` of its segment.
pub fn split_chain(chain: &EdgeChain, dev_tol: f64) -> Vec<LineSegment> {
    let pt = |i: usize| Point::new(chain.points[i].0 as f64, chain.points[i].1 as f64);
    split_ranges(&chain.points, dev_tol)
        .into_iter()
        .map(|(i, j)| LineSegment::new(pt(i), pt(j)))
        .filter(|s| s.length() > 0.0)
        .collect()
}

fn try_merge(a: &LineSegment, b: &LineSegment, params: &LineParams) -> Option<LineSegment> {
    if angle_diff(a.angle(), b.angle()) > params.angle_tol {
        return None;
    }
    let ends_a = [a.p0, a.p1];
    let ends_b = [b.p0, b.p1];
    let gap = ends_a
        .iter()
        .flat_map(|p| ends_b.iter().map(move |q| p.dist(*q)))
        .fold(f64::INFINITY, f64::min);
    if gap > params.gap_tol {
        return None;
    }
    let (long, short) = if a.length() >= b.length() {
        (a, b)
    } else {
        (b, a)
    };
    let offset = long
        .distance_to_line(short.p0)
        .max(long.distance_to_line(short.p1));
    if offset > params.merge_offset {
        return None;
    }
    let all = [a.p0, a.p1, b.p0, b.p1];
    let mut best = (a.p0, a.p1, -1.0);
    for i in 0..4 {
        for j in i + 1..4 {
            let d = all[i].dist(all[j]);
            if d > best.2 {
                best = (all[i], all[j], d);
            }
        }
    }
    Some(LineSegment::new(best.0, best.1).canonical())
}

fn sort_segments(segs: &mut [LineSegment]) {
    segs.sort_by(|a, b| {
        a.angle()
            .total_cmp(&b.angle())
            .then_with(|| a.p0.cmp_lex(&b.p0))
            .then_with(|| a.p1.cmp_lex(&b.p1))
    });
}

/// Merges pairs with similar direction, nearby endpoints and a small sideways
/// offset into the segment spanning their two farthest endpoints, until no
/// pair qualifies. Output is canonical and sorted by angle then position.
pub fn merge_segments(segs: &[LineSegment], params: &LineParams) -> Vec<LineSegment> {
    let mut segs: Vec<LineSegment> = segs.iter().map(|s| s.canonical()).collect();
    sort_segments(&mut segs);
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < segs.len() {
            let mut j = i + 1;
            while j < segs.len() {
                if let Some(m) = try_merge(&segs[i], &segs[j], params) {
                    segs[i] = m;
                    segs.remove(j);
                    changed = true;
                    j = i + 1;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !changed {
            break;
        }
        sort_segments(&mut segs);
    }
    segs
}

/// Track, split, merge and drop segments shorter than `min_len`.
pub fn detect_lines(edges: &EdgeMap, params: &LineParams) -> Vec<LineSegment> {
    let pieces: Vec<LineSegment> = track_edge_chains(edges)
        .iter()
        .flat_map(|c| split_chain(c, params.dev_tol))
        .collect();
    merge_segments(&pieces, params)
        .into_iter()
        .filter(|s| s.length() >= params.min_len)
        .collect()
}
