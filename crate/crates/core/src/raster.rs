//! Pixel containers: the 8-bit RGB raster that flows through masking and
//! classification, and its CIELAB counterpart used by segmentation.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat, ImageReader, Limits};

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

/// Largest accepted edge length when decoding PNG input.
pub const MAX_DIMENSION: u32 = 16_384;

/// Immutable width×height grid of RGB pixels, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "image must have nonzero area, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::Input(format!(
                "pixel buffer holds {} pixels, expected {expected} for {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image where every pixel has the same color.
    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self> {
        Self::new(width, height, vec![color; width as usize * height as usize])
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn into_pixels(self) -> Vec<Rgb> {
        self.data
    }

    /// Decodes PNG bytes. Alpha is composited over opaque black; grayscale
    /// and 16-bit inputs are converted to 8-bit RGB.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png);
        let mut limits = Limits::default();
        limits.max_image_width = Some(MAX_DIMENSION);
        limits.max_image_height = Some(MAX_DIMENSION);
        reader.limits(limits);
        let decoded = reader.decode()?;

        let (width, height) = (decoded.width(), decoded.height());
        let data = if decoded.color().has_alpha() {
            decoded
                .to_rgba8()
                .pixels()
                .map(|p| {
                    let [r, g, b, a] = p.0;
                    [over_black(r, a), over_black(g, a), over_black(b, a)]
                })
                .collect()
        } else {
            decoded.to_rgb8().pixels().map(|p| p.0).collect()
        };
        Self::new(width, height, data)
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let raw: Vec<u8> = self.data.iter().flatten().copied().collect();
        PngEncoder::new(&mut out).write_image(&raw, self.width, self.height, ExtendedColorType::Rgb8)?;
        Ok(out)
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref())?;
        Self::from_png_bytes(&bytes)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_png_bytes()?)?;
        Ok(())
    }
}

fn over_black(channel: u8, alpha: u8) -> u8 {
    ((channel as u32 * alpha as u32 + 127) / 255) as u8
}

/// CIELAB pixel: `l` in [0, 100], `a` and `b` unbounded reals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub fn distance_sq(&self, other: &Lab) -> f64 {
        let dl = self.l - other.l;
        let da = self.a - other.a;
        let db = self.b - other.b;
        dl * dl + da * da + db * db
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: u32,
    height: u32,
    data: Vec<Lab>,
}

impl LabImage {
    pub fn new(width: u32, height: u32, data: Vec<Lab>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width as usize * height as usize {
            return Err(Error::Input(format!(
                "lab buffer of {} pixels does not fit {width}x{height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Lab] {
        &self.data
    }

    pub fn at(&self, x: u32, y: u32) -> Lab {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_area_and_bad_lengths() {
        assert!(RasterImage::new(0, 4, vec![]).is_err());
        assert!(RasterImage::new(2, 2, vec![[0, 0, 0]; 3]).is_err());
        assert!(RasterImage::new(2, 2, vec![[0, 0, 0]; 4]).is_ok());
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let img = RasterImage::from_fn(7, 5, |x, y| [x as u8 * 30, y as u8 * 50, 255 - x as u8]).unwrap();
        let decoded = RasterImage::from_png_bytes(&img.to_png_bytes().unwrap()).unwrap();
        assert_eq!(img, decoded);
    }

    #[test]
    fn alpha_is_composited_over_black() {
        let mut buf = Vec::new();
        let rgba = [200u8, 100, 50, 255, 200, 100, 50, 0, 255, 255, 255, 128];
        PngEncoder::new(&mut buf)
            .write_image(&rgba, 3, 1, ExtendedColorType::Rgba8)
            .unwrap();
        let img = RasterImage::from_png_bytes(&buf).unwrap();
        assert_eq!(img.pixels(), &[[200, 100, 50], [0, 0, 0], [128, 128, 128]]);
    }

    #[test]
    fn grayscale_expands_to_rgb() {
        let mut buf = Vec::new();
        PngEncoder::new(&mut buf)
            .write_image(&[0u8, 77, 255], 3, 1, ExtendedColorType::L8)
            .unwrap();
        let img = RasterImage::from_png_bytes(&buf).unwrap();
        assert_eq!(img.pixels(), &[[0, 0, 0], [77, 77, 77], [255, 255, 255]]);
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(RasterImage::from_png_bytes(b"not a png").is_err());
        assert!(RasterImage::from_png_bytes(&[]).is_err());
    }
}
