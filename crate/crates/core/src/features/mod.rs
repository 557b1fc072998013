//! Image sampling and description, plus the interchange files used to import
//! externally extracted descriptors.

mod descriptor;
pub mod io;
mod raster;

pub use descriptor::{describe_patch, DESCRIPTOR_CLAMP, DESCRIPTOR_DIM};
pub use raster::{decode_raster, RasterImage};

use crate::dataset::{FeatureVector, ImageFeatures};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingConfig {
    pub grid_step: usize,
    pub patch_size: usize,
    pub min_image_side: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            grid_step: 16,
            patch_size: 16,
            min_image_side: 16,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_step < 1 {
            return Err(Error::InvalidConfig("grid_step must be at least 1".into()));
        }
        if self.patch_size < 8 || !self.patch_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "patch_size must be even and at least 8, got {}",
                self.patch_size
            )));
        }
        Ok(())
    }
}

/// Pixel coordinates of a patch center. The patch covers
/// `[x - size/2, x + size/2)` horizontally, likewise vertically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PatchCenter {
    pub x: usize,
    pub y: usize,
}

/// Regular grid of patch centers, row by row, such that every patch lies
/// inside the image. Depends only on the image geometry.
pub fn dense_sample(img: &RasterImage, cfg: &SamplingConfig) -> Vec<PatchCenter> {
    let (w, h) = (img.width(), img.height());
    let half = cfg.patch_size / 2;
    if w < cfg.min_image_side || h < cfg.min_image_side || w < cfg.patch_size || h < cfg.patch_size {
        return Vec::new();
    }
    let axis = |len: usize| -> Vec<usize> {
        (half..=len - half).step_by(cfg.grid_step.max(1)).collect()
    };
    let xs = axis(w);
    let ys = axis(h);
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| PatchCenter { x, y }))
        .collect()
}

/// Result of running sampling and description over one image.
#[derive(Debug, Clone)]
pub struct Extraction<T> {
    pub features: ImageFeatures<T>,
    pub warning: Option<String>,
}

/// Dense sampling followed by description of every patch.
pub fn extract_features<T: Scalar>(
    id: &str,
    img: &RasterImage,
    cfg: &SamplingConfig,
) -> Result<Extraction<T>> {
    cfg.validate()?;
    let centers = dense_sample(img, cfg);
    let warning = centers.is_empty().then(|| {
        format!(
            "image {id:?} ({}x{}) is too small for patch size {} / minimum side {}; it has no features",
            img.width(),
            img.height(),
            cfg.patch_size,
            cfg.min_image_side
        )
    });
    let features = centers
        .iter()
        .map(|&c| describe_patch(img, c, cfg.patch_size))
        .collect::<Result<Vec<FeatureVector<T>>>>()?;
    Ok(Extraction {
        features: ImageFeatures::new(id, features)?,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blank(w: usize, h: usize) -> RasterImage {
        RasterImage::new(w, h, vec![0.5; w * h]).unwrap()
    }

    fn cfg(step: usize, patch: usize) -> SamplingConfig {
        SamplingConfig {
            grid_step: step,
            patch_size: patch,
            min_image_side: patch,
        }
    }

    #[test]
    fn grid_64x64() {
        let centers = dense_sample(&blank(64, 64), &cfg(16, 16));
        assert_eq!(centers.len(), 16);
        let xs: Vec<usize> = centers.iter().take(4).map(|c| c.x).collect();
        assert_eq!(xs, vec![8, 24, 40, 56]);
    }

    #[test]
    fn grid_32x64() {
        assert_eq!(dense_sample(&blank(32, 64), &cfg(16, 16)).len(), 8);
    }

    #[test]
    fn too_small() {
        assert!(dense_sample(&blank(12, 40), &cfg(16, 16)).is_empty());
        let e: Extraction<f32> = extract_features("tiny", &blank(12, 40), &cfg(16, 16)).unwrap();
        assert!(e.features.is_empty());
        assert!(e.warning.is_some());
    }

    #[test]
    fn patches_inside_bounds() {
        for (w, h, step, patch) in [(50, 37, 5, 8), (100, 20, 7, 20), (31, 31, 1, 30)] {
            for c in dense_sample(&blank(w, h), &cfg(step, patch)) {
                assert!(c.x >= patch / 2 && c.x + patch / 2 <= w);
                assert!(c.y >= patch / 2 && c.y + patch / 2 <= h);
            }
        }
    }

    #[test]
    fn geometry_only() {
        let noisy = RasterImage::new(
            40,
            40,
            (0..1600).map(|i| ((i * 7919) % 101) as f32 / 100.0).collect(),
        )
        .unwrap();
        assert_eq!(dense_sample(&noisy, &cfg(4, 8)), dense_sample(&blank(40, 40), &cfg(4, 8)));
    }

    #[test]
    fn invalid_patch_size() {
        assert!(cfg(4, 6).validate().is_err());
        assert!(cfg(4, 9).validate().is_err());
        assert!(cfg(0, 8).validate().is_err());
    }
}
