//! Canny edge detection: Gaussian smoothing, Sobel gradients, non-maximum
//! suppression along four quantized directions and hysteresis linking.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::image::{gaussian_blur, GrayImage, RealImage};
use crate::{Error, Result};

pub const DEFAULT_SIGMA: f64 = 1.4;
/// Low hysteresis threshold as a fraction of the image's maximum gradient magnitude.
pub const DEFAULT_LOW: f64 = 0.1;
/// High hysteresis threshold as a fraction of the image's maximum gradient magnitude.
pub const DEFAULT_HIGH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub sigma: f64,
    /// Fraction of the maximum gradient magnitude.
    pub low: f64,
    /// Fraction of the maximum gradient magnitude.
    pub high: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            low: DEFAULT_LOW,
            high: DEFAULT_HIGH,
        }
    }
}

/// Per-pixel Sobel response of a smoothed image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
    magnitude: Vec<f64>,
    direction: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gx(&self, x: usize, y: usize) -> f64 {
        self.gx[y * self.width + x]
    }

    pub fn gy(&self, x: usize, y: usize) -> f64 {
        self.gy[y * self.width + x]
    }

    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        self.magnitude[y * self.width + x]
    }

    /// Gradient angle in `(-pi, pi]`, with +x to the right and +y down.
    pub fn direction(&self, x: usize, y: usize) -> f64 {
        self.direction[y * self.width + x]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude.iter().copied().fold(0.0, f64::max)
    }
}

/// Binary edge raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    edge: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            edge: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.edge[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as non-edge.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.edge[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.edge.iter().filter(|&&e| e).count()
    }

    /// Edge pixel coordinates in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edge
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

pub fn sobel_gradients(image: &RealImage) -> Result<GradientField> {
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        return Err(Error::invalid("sobel needs an image of at least 3x3"));
    }
    let n = w * h;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    let mut direction = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| image.get_clamped(x as isize + dx, y as isize + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y * w + x;
            gx[i] = sx;
            gy[i] = sy;
            magnitude[i] = libm::sqrt(sx * sx + sy * sy);
            let mut a = libm::atan2(sy, sx);
            if a <= -PI {
                a += 2.0 * PI;
            }
            direction[i] = a;
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        direction,
    })
}

/// Neighbor offset along a gradient direction quantized to 0, 45, 90 or 135 degrees.
pub fn quantized_offset(direction: f64) -> (isize, isize) {
    let mut a = direction % PI;
    if a < 0.0 {
        a += PI;
    }
    match (libm::round(a / (PI / 4.0)) as usize) % 4 {
        0 => (1, 0),
        1 => (1, 1),
        2 => (0, 1),
        _ => (-1, 1),
    }
}

/// Keeps a pixel's magnitude only where it is a local maximum along its
/// quantized gradient direction. Plateaus keep their first pixel: a pixel
/// must strictly exceed the neighbor behind it and match or exceed the one
/// ahead, so flat-topped ridges thin to one pixel.
pub fn non_max_suppression(g: &GradientField) -> RealImage {
    let (w, h) = (g.width, g.height);
    let mut out = vec![0.0; w * h];
    let mag = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x as usize >= w || y as usize >= h {
            0.0
        } else {
            g.magnitude[y as usize * w + x as usize]
        }
    };
    for y in 0..h {
        for x in 0..w {
            let m = g.magnitude(x, y);
            if m <= 0.0 {
                continue;
            }
            let (dx, dy) = quantized_offset(g.direction(x, y));
            let (xi, yi) = (x as isize, y as isize);
            let behind = mag(xi - dx, yi - dy);
            let ahead = mag(xi + dx, yi + dy);
            if m > behind && m >= ahead {
                out[y * w + x] = m;
            }
        }
    }
    RealImage::from_raw(w, h, out).expect("dimensions come from a valid field")
}

/// Two-threshold edge linking: pixels at or above `high` seed edges, and pixels
/// at or above `low` join when 8-connected to a seed through other such pixels.
pub fn hysteresis(nms: &RealImage, low: f64, high: f64) -> Result<EdgeMap> {
    if !(low >= 0.0 && low < high) {
        return Err(Error::invalid("hysteresis thresholds need 0 <= low < high"));
    }
    let (w, h) = (nms.width(), nms.height());
    let mut map = EdgeMap::new(w, h);
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if nms.get(x, y) >= high && !map.get(x, y) {
                map.set(x, y, true);
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for (nx, ny) in neighbors8(cx, cy, w, h) {
                        if !map.get(nx, ny) && nms.get(nx, ny) >= low {
                            map.set(nx, ny, true);
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
    }
    Ok(map)
}

pub(crate) fn neighbors8(
    x: usize,
    y: usize,
    w: usize,
    h: usize,
) -> impl Iterator<Item = (usize, usize)> {
    const OFFSETS: [(isize, isize); 8] = [
        (-1, -1),
        (0, -1),
        (1, -1),
        (-1, 0),
        (1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
    ];
    OFFSETS.iter().filter_map(move |&(dx, dy)| {
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h)
            .then_some((nx as usize, ny as usize))
    })
}

/// Full detector. Thresholds in `params` are fractions of the maximum
/// gradient magnitude, so a constant image yields an empty map.
pub fn canny(image: &GrayImage, params: &CannyParams) -> Result<EdgeMap> {
    if !(params.low >= 0.0 && params.low < params.high) {
        return Err(Error::invalid("canny thresholds need 0 <= low < high"));
    }
    let smoothed = gaussian_blur(image, params.sigma)?;
    let grad = sobel_gradients(&smoothed)?;
    let nms = non_max_suppression(&grad);
    let max = grad.max_magnitude();
    if max <= 0.0 {
        return Ok(EdgeMap::new(image.width(), image.height()));
    }
    hysteresis(&nms, params.low * max, params.high * max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step_image(w: usize, h: usize, boundary: usize) -> GrayImage {
        let mut data = vec![0u8; w * h];
        for y in 0..h {
            for x in boundary..w {
                data[y * w + x] = 255;
            }
        }
        GrayImage::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn sobel_on_vertical_step() {
        let img = step_image(8, 5, 4).to_real();
        let g = sobel_gradients(&img).unwrap();
        // Hand convolution: columns 3 and 4 see 255 on the right and 0 on
        // the left, so gx = (1 + 2 + 1) * 255 and gy = 0.
        for y in 0..5 {
            for x in [3, 4] {
                assert_eq!(g.gx(x, y), 4.0 * 255.0);
                assert_eq!(g.gy(x, y), 0.0);
                assert_eq!(g.direction(x, y), 0.0);
                assert_eq!(g.magnitude(x, y), g.max_magnitude());
            }
            assert_eq!(g.magnitude(1, y), 0.0);
            assert_eq!(g.magnitude(6, y), 0.0);
        }
    }

    #[test]
    fn sobel_constant_and_small() {
        let img = GrayImage::filled(5, 5, 77).unwrap().to_real();
        let g = sobel_gradients(&img).unwrap();
        assert_eq!(g.max_magnitude(), 0.0);
        let tiny = GrayImage::filled(2, 5, 0).unwrap().to_real();
        assert!(sobel_gradients(&tiny).is_err());
    }

    #[test]
    fn sobel_transpose_swaps_components() {
        let mut data = vec![0u8; 7 * 6];
        for (i, v) in data.iter_mut().enumerate() {
            *v = ((i * 37) % 251) as u8;
        }
        let img = GrayImage::from_raw(7, 6, data).unwrap();
        let g = sobel_gradients(&img.to_real()).unwrap();
        let gt = sobel_gradients(&img.transpose().to_real()).unwrap();
        for y in 0..6 {
            for x in 0..7 {
                assert_eq!(g.gx(x, y), gt.gy(y, x));
                assert_eq!(g.gy(x, y), gt.gx(y, x));
                assert_eq!(g.magnitude(x, y), gt.magnitude(y, x));
            }
        }
    }

    #[test]
    fn direction_bins() {
        assert_eq!(quantized_offset(0.0), (1, 0));
        assert_eq!(quantized_offset(PI), (1, 0));
        assert_eq!(quantized_offset(PI / 4.0), (1, 1));
        assert_eq!(quantized_offset(-PI / 2.0), (0, 1));
        assert_eq!(quantized_offset(3.0 * PI / 4.0), (-1, 1));
        assert_eq!(quantized_offset(-PI / 4.0), (-1, 1));
    }

    #[test]
    fn nms_thins_ramp_to_one_pixel() {
        // Three-pixel-wide ramp between two flat regions.
        let row = [
            0.0, 0.0, 0.0, 0.0, 64.0, 128.0, 191.0, 255.0, 255.0, 255.0, 255.0,
        ];
        let w = row.len();
        let data: Vec<f64> = (0..6).flat_map(|_| row.iter().copied()).collect();
        let img = RealImage::from_raw(w, 6, data).unwrap();
        let nms = non_max_suppression(&sobel_gradients(&img).unwrap());
        for y in 0..6 {
            let kept = (0..w).filter(|&x| nms.get(x, y) > 0.0).count();
            assert_eq!(kept, 1, "row {y}");
        }
    }

    #[test]
    fn nms_constant_and_isolated() {
        let g = sobel_gradients(&GrayImage::filled(6, 6, 9).unwrap().to_real()).unwrap();
        assert!(non_max_suppression(&g).as_raw().iter().all(|&v| v == 0.0));

        let mut field = g.clone();
        field.magnitude[3 * 6 + 2] = 5.0;
        let nms = non_max_suppression(&field);
        assert_eq!(nms.get(2, 3), 5.0);
        assert_eq!(nms.as_raw().iter().filter(|&&v| v > 0.0).count(), 1);
    }

    #[test]
    fn hysteresis_cases() {
        let (lo, hi) = (10.0, 20.0);
        let all = RealImage::from_raw(3, 2, vec![hi; 6]).unwrap();
        assert_eq!(hysteresis(&all, lo, hi).unwrap().count(), 6);

        let chain =
            RealImage::from_raw(4, 1, vec![hi + 1.0, lo + 1.0, lo + 1.0, lo - 1.0]).unwrap();
        let map = hysteresis(&chain, lo, hi).unwrap();
        assert_eq!(
            (0..4).map(|x| map.get(x, 0)).collect::<Vec<_>>(),
            vec![true, true, true, false]
        );

        let weak = RealImage::from_raw(3, 1, vec![0.0, 15.0, 0.0]).unwrap();
        assert_eq!(hysteresis(&weak, lo, hi).unwrap().count(), 0);

        assert!(hysteresis(&weak, 20.0, 20.0).is_err());
        assert!(hysteresis(&weak, -1.0, 20.0).is_err());
    }

    #[test]
    fn canny_on_constant_image_is_empty() {
        let img = GrayImage::filled(20, 20, 128).unwrap();
        assert_eq!(canny(&img, &CannyParams::default()).unwrap().count(), 0);
    }

    #[test]
    fn canny_on_step_finds_one_pixel_per_row() {
        let img = step_image(40, 30, 20);
        let map = canny(&img, &CannyParams::default()).unwrap();
        for y in 2..28 {
            let xs: Vec<usize> = (2..38).filter(|&x| map.get(x, y)).collect();
            assert_eq!(xs.len(), 1, "row {y}: {xs:?}");
            assert!(xs[0] >= 19 && xs[0] <= 21);
        }
    }

    fn random_field() -> impl Strategy<Value = RealImage> {
        (3usize..16, 3usize..16).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0.0f64..100.0, w * h)
                .prop_map(move |d| RealImage::from_raw(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn raising_high_never_adds_edges(nms in random_field(), lo in 0.0f64..40.0, h1 in 40.0f64..70.0, dh in 0.0f64..30.0) {
            let a = hysteresis(&nms, lo, h1).unwrap();
            let b = hysteresis(&nms, lo, h1 + dh).unwrap();
            for (x, y) in b.pixels() {
                prop_assert!(a.get(x, y));
            }
        }

        #[test]
        fn lowering_low_never_removes_edges(nms in random_field(), lo in 10.0f64..40.0, dl in 0.0f64..10.0, hi in 40.0f64..80.0) {
            let a = hysteresis(&nms, lo, hi).unwrap();
            let b = hysteresis(&nms, lo - dl, hi).unwrap();
            for (x, y) in a.pixels() {
                prop_assert!(b.get(x, y));
            }
        }
    }
}
