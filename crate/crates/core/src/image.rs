use crate::error::{Error, Result};

/// Grayscale image with intensities in `[0, 1]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Size(format!("image extents must be positive, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Data(format!("pixel {i} = {} lies outside [0,1]", pixels[i])));
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds an image from `f(row, col)`, clamping each value into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(clamp_unit(f(r, c)));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Copies the `height x width` block whose top-left pixel is `(top, left)`.
    pub fn sub_image(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Size(format!(
                "block {height}x{width} at ({top},{left}) exceeds {}x{} image",
                self.height, self.width
            )));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for r in top..top + height {
            pixels.extend_from_slice(&self.row(r)[left..left + width]);
        }
        Self::new(width, height, pixels)
    }

    /// Averages disjoint `factor x factor` blocks.
    pub fn downscale_mean(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::Size(format!(
                "{}x{} image is not divisible by factor {factor}",
                self.height, self.width
            )));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = (factor * factor) as f64;
        let mut pixels = vec![0.0; w * h];
        for r in 0..self.height {
            let out_row = &mut pixels[(r / factor) * w..(r / factor + 1) * w];
            for (c, &v) in self.row(r).iter().enumerate() {
                out_row[c / factor] += v;
            }
        }
        for p in &mut pixels {
            *p = clamp_unit(*p / norm);
        }
        Self::new(w, h, pixels)
    }

    /// Enlarges by pixel replication.
    pub fn upscale_nearest(&self, factor: usize) -> Result<Self> {
        Self::from_fn(self.width * factor, self.height * factor, |r, c| self.get(r / factor, c / factor))
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Binary image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Shape(format!("{width}x{height} mask needs {} bits", width * height)));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_range_and_extent() {
        assert!(GrayImage::new(2, 1, vec![0.0, 1.0]).is_ok());
        assert!(GrayImage::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(GrayImage::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn downscale_then_upscale_round_trips_block_images() {
        let small = GrayImage::from_fn(3, 2, |r, c| (r * 3 + c) as f64 / 8.0).unwrap();
        let big = small.upscale_nearest(4).unwrap();
        assert_eq!(big.width(), 12);
        assert_eq!(big.downscale_mean(4).unwrap(), small);
        assert!(big.downscale_mean(5).is_err());
    }
}
