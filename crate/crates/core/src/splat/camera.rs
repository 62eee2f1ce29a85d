//! Pinhole camera and the projection of isotropic world Gaussians to
//! isotropic pixel-space Gaussians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::EmbeddedGaussians;
use crate::linalg::{Mat3, Vec2, Vec3};
use crate::scalar::Scalar;

use super::render::SUPPORT_SIGMAS;

/// Pinhole intrinsics plus a world-to-camera rigid transform.
///
/// Camera space is x-right, y-down, z-forward; a point projects to pixel
/// coordinates `(fx * x / z + cx, fy * y / z + cy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera<S> {
    pub fx: S,
    pub fy: S,
    pub cx: S,
    pub cy: S,
    pub rotation: Mat3<S>,
    pub translation: Vec3<S>,
    pub width: usize,
    pub height: usize,
    pub near: S,
}

impl<S: Scalar> Camera<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > S::zero()) || !(self.fy > S::zero()) {
            return Err(Error::InvalidRange {
                reason: format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy),
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidDimension {
                name: "image size",
                value: self.width.min(self.height),
            });
        }
        if !(self.near > S::zero()) {
            return Err(Error::InvalidRange {
                reason: format!("near plane must be positive, got {}", self.near),
            });
        }
        if self.rotation.orthonormality_error() > S::c(1e-9) {
            return Err(Error::InvalidRange {
                reason: "camera rotation is not orthonormal".to_string(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn world_to_camera(&self, p: Vec3<S>) -> Vec3<S> {
        self.rotation.mul_vec(p).add(self.translation)
    }

    /// Camera-space point back to world space.
    pub fn camera_to_world(&self, p: Vec3<S>) -> Vec3<S> {
        self.rotation.transpose().mul_vec(p.sub(self.translation))
    }

    pub fn cast<T: Scalar>(&self) -> Camera<T> {
        Camera {
            fx: T::c(self.fx.widen()),
            fy: T::c(self.fy.widen()),
            cx: T::c(self.cx.widen()),
            cy: T::c(self.cy.widen()),
            rotation: self.rotation.cast(),
            translation: self.translation.cast(),
            width: self.width,
            height: self.height,
            near: T::c(self.near.widen()),
        }
    }
}

/// A Gaussian after projection: pixel-space center, camera depth, and the
/// isotropic pixel footprint `sigma_px = scale * fx / depth`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedGaussian<S> {
    pub pixel_center: Vec2<S>,
    pub depth: S,
    pub pixel_radius_sigma: S,
    /// Index into the source [`EmbeddedGaussians`] arrays.
    pub index: usize,
}

/// Project all Gaussians, culling those behind the near plane and those whose
/// 3-sigma pixel disc misses the image. Output preserves input index order.
pub fn project<S: Scalar>(g: &EmbeddedGaussians<S>, cam: &Camera<S>) -> Vec<ProjectedGaussian<S>> {
    let support = S::c(SUPPORT_SIGMAS);
    let w = S::from_usize(cam.width).unwrap();
    let h = S::from_usize(cam.height).unwrap();
    let mut out = Vec::with_capacity(g.len());
    for (index, &pos) in g.positions.iter().enumerate() {
        let p_cam = cam.world_to_camera(pos);
        let z = p_cam.z();
        if z <= cam.near {
            continue;
        }
        let px = cam.fx * p_cam.x() / z + cam.cx;
        let py = cam.fy * p_cam.y() / z + cam.cy;
        let sigma = g.scales[index] * cam.fx / z;
        let r = support * sigma;
        if px + r < S::zero() || px - r > w || py + r < S::zero() || py - r > h {
            continue;
        }
        out.push(ProjectedGaussian {
            pixel_center: Vec2::new(px, py),
            depth: z,
            pixel_radius_sigma: sigma,
            index,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_camera(fx: f64, cx: f64, size: usize) -> Camera<f64> {
        Camera {
            fx,
            fy: fx,
            cx,
            cy: cx,
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
            width: size,
            height: size,
            near: 0.1,
        }
    }

    fn one_gaussian(pos: Vec3<f64>, scale: f64) -> EmbeddedGaussians<f64> {
        EmbeddedGaussians {
            channels: 1,
            positions: vec![pos],
            scales: vec![scale],
            opacities: vec![0.5],
            features: vec![0.25],
            source_texel: vec![0],
        }
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let cam = identity_camera(500.0, 256.0, 512);
        let g = one_gaussian(Vec3::new(0.0, 0.0, 3.0), 0.01);
        let p = project(&g, &cam);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].pixel_center, Vec2::new(256.0, 256.0));
        assert_eq!(p[0].depth, 3.0);
    }

    #[test]
    fn projection_hand_values() {
        // fx = fy = 500, cx = cy = 256: (0.2, -0.1, 2.0) -> (306, 231).
        let cam = identity_camera(500.0, 256.0, 512);
        let g = one_gaussian(Vec3::new(0.2, -0.1, 2.0), 0.01);
        let p = project(&g, &cam);
        assert_eq!(p.len(), 1);
        assert!((p[0].pixel_center.x() - 306.0).abs() < 1e-12);
        assert!((p[0].pixel_center.y() - 231.0).abs() < 1e-12);
        assert!((p[0].pixel_radius_sigma - 0.01 * 500.0 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn near_plane_cull() {
        let cam = identity_camera(500.0, 256.0, 512);
        let g = one_gaussian(Vec3::new(0.0, 0.0, 0.05), 0.01);
        assert!(project(&g, &cam).is_empty());
    }

    #[test]
    fn off_frame_disc_cull() {
        let cam = identity_camera(500.0, 256.0, 512);
        // Projects far outside the image; 3-sigma disc cannot reach it.
        let g = one_gaussian(Vec3::new(10.0, 0.0, 2.0), 0.001);
        assert!(project(&g, &cam).is_empty());
        // Same center but a footprint wide enough to reach the frame survives.
        let g = one_gaussian(Vec3::new(10.0, 0.0, 2.0), 8.0);
        assert_eq!(project(&g, &cam).len(), 1);
    }

    #[test]
    fn output_preserves_index_order() {
        let g = EmbeddedGaussians {
            channels: 1,
            positions: vec![
                Vec3::new(0.0, 0.0, 5.0),
                Vec3::new(0.0, 0.0, 0.01), // culled
                Vec3::new(0.1, 0.0, 2.0),
            ],
            scales: vec![0.01; 3],
            opacities: vec![0.5; 3],
            features: vec![0.0; 3],
            source_texel: vec![0, 1, 2],
        };
        let cam = identity_camera(500.0, 256.0, 512);
        let p = project(&g, &cam);
        assert_eq!(p.iter().map(|q| q.index).collect::<Vec<_>>(), vec![0, 2]);
    }
}
