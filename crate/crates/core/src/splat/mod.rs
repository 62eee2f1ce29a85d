//! Forward splatting: pinhole projection of embedded Gaussians and
//! front-to-back alpha blending into a multi-channel feature map.
//!
//! Two renderers share one per-pixel blending routine: a brute-force path
//! that scans every projected Gaussian per pixel (the oracle) and a tiled
//! path that first bins Gaussians by the tiles their 3-sigma disc touches.
//! Both traverse Gaussians in global depth order, so they agree to the last
//! bit; the tiled path only skips Gaussians that cannot touch a pixel.

mod camera;
pub(crate) mod render;

pub use camera::{project, Camera, ProjectedGaussian};
pub use render::{
    render_bruteforce, render_tiled, ALPHA_CLAMP, DEFAULT_TILE_SIZE, SUPPORT_SIGMAS,
    TRANSMITTANCE_EPS,
};

use crate::scalar::Scalar;

/// Splatted multi-channel image plus the accumulated-alpha plane.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<S> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Pixel-major: `values[(y * width + x) * channels + c]`.
    pub values: Vec<S>,
    /// `alpha[y * width + x]` = 1 - prod(1 - alpha_j) over blended Gaussians.
    pub alpha: Vec<S>,
}

impl<S: Scalar> FeatureMap<S> {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        FeatureMap {
            width,
            height,
            channels,
            values: vec![S::zero(); width * height * channels],
            alpha: vec![S::zero(); width * height],
        }
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize, c: usize) -> S {
        self.values[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn alpha_at(&self, x: usize, y: usize) -> S {
        self.alpha[y * self.width + x]
    }

    /// Largest absolute componentwise difference over values and alpha.
    pub fn max_abs_diff(&self, other: &Self) -> S {
        let v = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max);
        let a = self
            .alpha
            .iter()
            .zip(&other.alpha)
            .map(|(a, b)| (*a - *b).abs())
            .fold(S::zero(), S::max);
        v.max(a)
    }

    pub fn cast<T: Scalar>(&self) -> FeatureMap<T> {
        FeatureMap {
            width: self.width,
            height: self.height,
            channels: self.channels,
            values: self.values.iter().map(|x| T::c(x.widen())).collect(),
            alpha: self.alpha.iter().map(|x| T::c(x.widen())).collect(),
        }
    }
}
