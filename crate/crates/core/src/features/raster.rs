use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width * height != pixels.len() {
            return Err(Error::InvalidRaster(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidRaster(format!("intensity {p} outside [0, 1]")));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
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
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (width, height) = (img.width() as usize, img.height() as usize);
        let pixels = match img {
            DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f32 / 255.0).collect(),
            DynamicImage::ImageLuma16(g) => g.pixels().map(|p| p.0[0] as f32 / 65535.0).collect(),
            other => other
                .to_rgb32f()
                .pixels()
                .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
                .collect(),
        };
        RasterImage {
            width,
            height,
            pixels,
        }
    }
}

/// Rec. 601 luma.
fn luminance(r: f32, g: f32, b: f32) -> f32 {
    (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 1.0)
}

/// Decodes a PGM/PPM (or any other format the `image` crate was built with)
/// into grayscale.
pub fn decode_raster(path: &Path) -> Result<RasterImage> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(RasterImage::from_dynamic(&img))
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    #[test]
    fn rejects_bad_shape_and_range() {
        assert!(RasterImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(RasterImage::new(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn decodes_binary_pgm_and_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let pgm = dir.path().join("a.pgm");
        let mut f = std::fs::File::create(&pgm).unwrap();
        f.write_all(b"P5\n2 1\n255\n").unwrap();
        f.write_all(&[0, 255]).unwrap();
        drop(f);
        let img = decode_raster(&pgm).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.pixels(), &[0.0, 1.0]);

        let ppm = dir.path().join("b.ppm");
        let mut f = std::fs::File::create(&ppm).unwrap();
        f.write_all(b"P6\n1 1\n255\n").unwrap();
        f.write_all(&[255, 0, 0]).unwrap();
        drop(f);
        let img = decode_raster(&ppm).unwrap();
        assert!((img.pixels()[0] - 0.299).abs() < 1e-6);
    }

    #[test]
    fn decode_failure_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.pgm");
        std::fs::write(&p, b"not an image").unwrap();
        let err = decode_raster(&p).unwrap_err();
        assert!(err.to_string().contains("junk.pgm"));
    }
}
