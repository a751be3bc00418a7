//! Raster types and Gaussian smoothing.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Row-major 8-bit luminance raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    /// Image of the given size filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::invalid(alloc::format!(
                "gray raster of {width}x{height} needs {} bytes, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    /// Pixel at signed coordinates, clamped to the nearest border pixel.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    /// Transposed copy (rows become columns).
    pub fn transpose(&self) -> Self {
        let mut out = vec![0u8; self.data.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                out[x * self.height + y] = self.get(x, y);
            }
        }
        Self {
            width: self.height,
            height: self.width,
            data: out,
        }
    }

    /// Photometric inverse `255 - p`.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|p| 255 - p).collect(),
        }
    }

    pub fn to_real(&self) -> RealImage {
        RealImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&p| f64::from(p)).collect(),
        }
    }
}

/// Row-major RGB raster with 8-bit channels, used for detection overlays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != 3 * width * height {
            return Err(Error::invalid(alloc::format!(
                "rgb raster of {width}x{height} needs {} bytes, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_gray(gray: &GrayImage) -> Self {
        let data = gray.as_raw().iter().flat_map(|&p| [p, p, p]).collect();
        Self {
            width: gray.width(),
            height: gray.height(),
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    /// Outline of the axis-aligned box `[x0, x1] x [y0, y1]`, clipped to the image.
    pub fn draw_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, rgb: [u8; 3]) {
        let x1 = x1.min(self.width - 1);
        let y1 = y1.min(self.height - 1);
        if x0 > x1 || y0 > y1 {
            return;
        }
        for x in x0..=x1 {
            self.set(x, y0, rgb);
            self.set(x, y1, rgb);
        }
        for y in y0..=y1 {
            self.set(x0, y, rgb);
            self.set(x1, y, rgb);
        }
    }
}

/// Row-major real-valued raster for intermediate results.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::invalid(
                "real raster length does not match dimensions",
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::from_raw(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn as_raw(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Rounds to the nearest level and clamps to `[0, 255]`.
    pub fn quantize(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|&v| libm::round(v).clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(alloc::format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// One-sided sampled Gaussian of radius `ceil(3 sigma)`, normalized so the
/// full symmetric kernel sums to one. Index 0 is the center tap.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("gaussian sigma must be positive"));
    }
    let radius = libm::ceil(3.0 * sigma) as usize;
    let mut half: Vec<f64> = (0..=radius)
        .map(|k| {
            let k = k as f64;
            libm::exp(-(k * k) / (2.0 * sigma * sigma))
        })
        .collect();
    let total = half[0] + 2.0 * half[1..].iter().sum::<f64>();
    for w in &mut half {
        *w /= total;
    }
    Ok(half)
}

/// Separable Gaussian smoothing with replicated borders.
pub fn gaussian_blur(image: &GrayImage, sigma: f64) -> Result<RealImage> {
    gaussian_blur_real(&image.to_real(), sigma)
}

pub fn gaussian_blur_real(image: &RealImage, sigma: f64) -> Result<RealImage> {
    let kernel = gaussian_kernel(sigma)?;
    let (w, h) = (image.width, image.height);
    let r = kernel.len() as isize - 1;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = kernel[0] * image.get(x, y);
            for k in 1..=r {
                let left = image.get_clamped(x as isize - k, y as isize);
                let right = image.get_clamped(x as isize + k, y as isize);
                acc += kernel[k as usize] * (left + right);
            }
            tmp[y * w + x] = acc;
        }
    }
    let tmp = RealImage {
        width: w,
        height: h,
        data: tmp,
    };

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = kernel[0] * tmp.get(x, y);
            for k in 1..=r {
                let up = tmp.get_clamped(x as isize, y as isize - k);
                let down = tmp.get_clamped(x as isize, y as isize + k);
                acc += kernel[k as usize] * (up + down);
            }
            out[y * w + x] = acc;
        }
    }
    Ok(RealImage {
        width: w,
        height: h,
        data: out,
    })
}
