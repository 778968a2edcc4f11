use std::path::Path;

use crate::error::{Error, Result};

/// Grayscale line image stored column-major (`x * height + y`), matching the
/// `[W, H, 1]` network input layout. After preprocessing, values lie in
/// `[0, 1]` with ink high and background zero.
#[derive(Clone, Debug, PartialEq)]
pub struct LineImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl LineImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Image(format!(
                "{width}x{height} image with {} pixels",
                pixels.len()
            )));
        }
        Ok(LineImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, v: f32) -> Result<Self> {
        Self::new(width, height, vec![v; width * height])
    }

    /// Build from a row-major matrix (`rows[y][x]`).
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Image("ragged rows".into()));
        }
        let mut img = LineImage::filled(width, height, 0.0)?;
        for (y, r) in rows.iter().enumerate() {
            for (x, &v) in r.iter().enumerate() {
                img.set(x, y, v);
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[x * self.height + y]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.pixels[x * self.height + y] = v;
    }

    pub fn column(&self, x: usize) -> &[f32] {
        &self.pixels[x * self.height..(x + 1) * self.height]
    }

    /// Read any supported raster as raw 8-bit gray values in `[0, 255]`.
    pub fn read_raw(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
            .into_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut out = LineImage::filled(w, h, 0.0)?;
        for (x, y, p) in img.enumerate_pixels() {
            out.set(x as usize, y as usize, f32::from(p.0[0]));
        }
        Ok(out)
    }

    /// Write raw gray values (clamped to `[0, 255]`) as 8-bit PNG.
    pub fn write_raw_png(&self, path: &Path) -> Result<()> {
        let mut buf = image::GrayImage::new(self.width as u32, self.height as u32);
        for (x, y, p) in buf.enumerate_pixels_mut() {
            p.0[0] = self.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8;
        }
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }
}
