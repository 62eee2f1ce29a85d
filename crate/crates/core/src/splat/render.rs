//! Brute-force and tiled rasterization of projected Gaussians.
//!
//! Depth convention: Gaussians blend front to back in ascending camera-space
//! z, ties broken by input index (a stable sort on depth). Per pixel, alpha
//! is `opacity * exp(-d^2 / (2 sigma_px^2))`, zero outside the 3-sigma disc,
//! clamped to [`ALPHA_CLAMP`]; the blend loop stops once remaining
//! transmittance drops below [`TRANSMITTANCE_EPS`].
//!
//! The isotropic footprint uses variance `scale^2` in camera units, i.e.
//! `sigma_px = scale * fx / z`; the exponent is `-d^2 / (2 sigma_px^2)`.

use rayon::prelude::*;

use crate::field::EmbeddedGaussians;
use crate::linalg::Vec2;
use crate::scalar::Scalar;

use super::camera::{project, Camera, ProjectedGaussian};
use super::FeatureMap;

/// Tile edge in pixels used by the CLI and the tiled default.
pub const DEFAULT_TILE_SIZE: usize = 16;

/// Per-Gaussian alpha ceiling; keeps transmittance (and gradients behind an
/// occluder) from reaching exactly zero.
pub const ALPHA_CLAMP: f64 = 0.9999;

/// Early termination threshold on remaining transmittance.
pub const TRANSMITTANCE_EPS: f64 = 1e-4;

/// Support cutoff: alpha is zero beyond this many sigmas from the center.
pub const SUPPORT_SIGMAS: f64 = 3.0;

#[inline]
fn pixel_center<S: Scalar>(x: usize, y: usize) -> Vec2<S> {
    Vec2::new(
        S::from_usize(x).unwrap() + S::c(0.5),
        S::from_usize(y).unwrap() + S::c(0.5),
    )
}

/// Project and depth-sort (stable, so equal depths keep input index order).
pub(crate) fn sorted_projection<S: Scalar>(
    g: &EmbeddedGaussians<S>,
    cam: &Camera<S>,
) -> Vec<ProjectedGaussian<S>> {
    let mut proj = project(g, cam);
    proj.sort_by(|a, b| a.depth.partial_cmp(&b.depth).unwrap());
    proj
}

/// Blend one pixel from candidates that must already be in global depth
/// order. Both render paths and the backward pass call this same routine (or
/// mirror its arithmetic exactly), which is what makes them agree bitwise.
#[inline]
pub(crate) fn blend_pixel<'a, S: Scalar>(
    g: &EmbeddedGaussians<S>,
    candidates: impl Iterator<Item = &'a ProjectedGaussian<S>>,
    px: Vec2<S>,
    out_values: &mut [S],
    out_alpha: &mut S,
) {
    let clamp = S::c(ALPHA_CLAMP);
    let t_eps = S::c(TRANSMITTANCE_EPS);
    let support_sq = S::c(SUPPORT_SIGMAS * SUPPORT_SIGMAS);
    let two = S::c(2.0);
    let mut transmittance = S::one();
    for p in candidates {
        let d2 = px.sub(p.pixel_center).norm_sq();
        let sigma_sq = p.pixel_radius_sigma * p.pixel_radius_sigma;
        if d2 > support_sq * sigma_sq {
            continue;
        }
        let alpha = (g.opacities[p.index] * (-d2 / (two * sigma_sq)).exp()).min(clamp);
        let weight = alpha * transmittance;
        for (out, &f) in out_values.iter_mut().zip(g.feature(p.index)) {
            *out += f * weight;
        }
        transmittance *= S::one() - alpha;
        if transmittance < t_eps {
            break;
        }
    }
    *out_alpha = S::one() - transmittance;
}

fn warn_anisotropic_intrinsics<S: Scalar>(cam: &Camera<S>) {
    let fx = cam.fx.widen();
    let fy = cam.fy.widen();
    if (fx - fy).abs() / fx > 0.05 {
        log::warn!(
            "isotropic pixel footprint assumes fx ~ fy; fx={fx} fy={fy} differ by more than 5%"
        );
    }
}

/// Reference renderer: every pixel scans the full depth-sorted list.
pub fn render_bruteforce<S: Scalar>(g: &EmbeddedGaussians<S>, cam: &Camera<S>) -> FeatureMap<S> {
    warn_anisotropic_intrinsics(cam);
    let sorted = sorted_projection(g, cam);
    let mut map = FeatureMap::zeros(cam.width, cam.height, g.channels);
    let (w, c) = (cam.width, g.channels);
    map.values
        .par_chunks_mut(w * c)
        .zip(map.alpha.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (value_row, alpha_row))| {
            for x in 0..w {
                blend_pixel(
                    g,
                    sorted.iter(),
                    pixel_center(x, y),
                    &mut value_row[x * c..(x + 1) * c],
                    &mut alpha_row[x],
                );
            }
        });
    map
}

/// Bin sorted Gaussians by the tiles their support disc touches. Bins stay in
/// depth order because the sorted list is traversed in order.
pub(crate) fn bin_by_tile<S: Scalar>(
    sorted: &[ProjectedGaussian<S>],
    width: usize,
    height: usize,
    tile_size: usize,
) -> (usize, usize, Vec<Vec<u32>>) {
    let ntx = width.div_ceil(tile_size);
    let nty = height.div_ceil(tile_size);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); ntx * nty];
    let ts = tile_size as f64;
    for (k, p) in sorted.iter().enumerate() {
        let r = SUPPORT_SIGMAS * p.pixel_radius_sigma.widen();
        let cx = p.pixel_center.x().widen();
        let cy = p.pixel_center.y().widen();
        let tx0 = ((cx - r) / ts).floor().clamp(0.0, (ntx - 1) as f64) as usize;
        let tx1 = ((cx + r) / ts).floor().clamp(0.0, (ntx - 1) as f64) as usize;
        let ty0 = ((cy - r) / ts).floor().clamp(0.0, (nty - 1) as f64) as usize;
        let ty1 = ((cy + r) / ts).floor().clamp(0.0, (nty - 1) as f64) as usize;
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                bins[ty * ntx + tx].push(k as u32);
            }
        }
    }
    (ntx, nty, bins)
}

/// Tiled renderer: numerically identical to [`render_bruteforce`] (same
/// per-pixel traversal order and arithmetic), faster because each pixel only
/// scans its tile's bin.
pub fn render_tiled<S: Scalar>(
    g: &EmbeddedGaussians<S>,
    cam: &Camera<S>,
    tile_size: usize,
) -> FeatureMap<S> {
    assert!(tile_size >= 1, "tile_size must be >= 1");
    warn_anisotropic_intrinsics(cam);
    let sorted = sorted_projection(g, cam);
    let (ntx, _nty, bins) = bin_by_tile(&sorted, cam.width, cam.height, tile_size);
    let mut map = FeatureMap::zeros(cam.width, cam.height, g.channels);
    let (w, c) = (cam.width, g.channels);
    // Parallelize over rows of tiles; tile rows own disjoint pixel rows.
    map.values
        .par_chunks_mut(w * c * tile_size)
        .zip(map.alpha.par_chunks_mut(w * tile_size))
        .enumerate()
        .for_each(|(ty, (value_rows, alpha_rows))| {
            let rows_here = alpha_rows.len() / w;
            for tx in 0..ntx {
                let bin = &bins[ty * ntx + tx];
                if bin.is_empty() {
                    continue;
                }
                let x_end = ((tx + 1) * tile_size).min(w);
                for dy in 0..rows_here {
                    let y = ty * tile_size + dy;
                    for x in tx * tile_size..x_end {
                        blend_pixel(
                            g,
                            bin.iter().map(|&k| &sorted[k as usize]),
                            pixel_center(x, y),
                            &mut value_rows[(dy * w + x) * c..(dy * w + x + 1) * c],
                            &mut alpha_rows[dy * w + x],
                        );
                    }
                }
            }
        });
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::random_scene;
    use crate::linalg::{rotation_x, rotation_y, Mat3, Vec3};

    fn camera(size: usize, cx: f64) -> Camera<f64> {
        Camera {
            fx: 100.0,
            fy: 100.0,
            cx,
            cy: cx,
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
            width: size,
            height: size,
            near: 0.1,
        }
    }

    fn stacked_pair(o1: f64, o2: f64, f1: f64, f2: f64) -> EmbeddedGaussians<f64> {
        EmbeddedGaussians {
            channels: 1,
            positions: vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 2.0)],
            scales: vec![0.01, 0.02],
            opacities: vec![o1, o2],
            features: vec![f1, f2],
            source_texel: vec![0, 1],
        }
    }

    #[test]
    fn empty_scene_renders_zero() {
        let g = EmbeddedGaussians::<f64> {
            channels: 3,
            positions: vec![],
            scales: vec![],
            opacities: vec![],
            features: vec![],
            source_texel: vec![],
        };
        let cam = camera(8, 4.0);
        let map = render_bruteforce(&g, &cam);
        assert!(map.values.iter().all(|&v| v == 0.0));
        assert!(map.alpha.iter().all(|&a| a == 0.0));
        assert_eq!(map, render_tiled(&g, &cam, 4));
    }

    #[test]
    fn single_clamped_gaussian_at_center() {
        // Opacity above the clamp: alpha at the center pixel is exactly 0.9999.
        let mut g = stacked_pair(0.99999, 0.5, 0.5, 0.0);
        g.positions.truncate(1);
        g.scales.truncate(1);
        g.opacities.truncate(1);
        g.features.truncate(1);
        g.source_texel.truncate(1);
        // 1x1 image with cx = cy = 0.5: the pixel center coincides with the
        // projected center, so d = 0 and alpha = min(opacity, clamp).
        let cam = camera(1, 0.5);
        let map = render_bruteforce(&g, &cam);
        assert_eq!(map.value(0, 0, 0), 0.9999 * 0.5);
        assert_eq!(map.alpha_at(0, 0), 0.9999);
    }

    #[test]
    fn two_gaussian_hand_blend() {
        // Eq-style hand expansion for two terms: value = a1 f1 + a2 (1-a1) f2.
        let (f1, f2) = (0.5, -0.25);
        let g = stacked_pair(0.5, 0.5, f1, f2);
        let cam = camera(1, 0.5);
        let map = render_bruteforce(&g, &cam);
        assert!((map.value(0, 0, 0) - (0.5 * f1 + 0.25 * f2)).abs() < 1e-12);
        assert!((map.alpha_at(0, 0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn tiled_matches_bruteforce_bitwise() {
        for seed in 0..4u64 {
            let (g, cam) = random_scene(seed, 60, 3, 32, 32);
            let brute = render_bruteforce(&g, &cam);
            for tile_size in [1, 5, 16, 32] {
                let tiled = render_tiled(&g, &cam, tile_size);
                assert_eq!(brute, tiled, "seed {seed} tile {tile_size}");
            }
        }
    }

    #[test]
    fn order_invariance_with_distinct_depths() {
        let (g, cam) = random_scene(9, 40, 2, 24, 24);
        let reference = render_tiled(&g, &cam, 8);
        // Reverse the input order; depths from random_scene are distinct.
        let n = g.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = EmbeddedGaussians {
            channels: g.channels,
            positions: perm.iter().map(|&i| g.positions[i]).collect(),
            scales: perm.iter().map(|&i| g.scales[i]).collect(),
            opacities: perm.iter().map(|&i| g.opacities[i]).collect(),
            features: perm.iter().flat_map(|&i| g.feature(i).to_vec()).collect(),
            source_texel: perm.iter().map(|&i| g.source_texel[i]).collect(),
        };
        assert_eq!(reference, render_tiled(&permuted, &cam, 8));
    }

    #[test]
    fn boundedness_and_alpha_range() {
        let (g, cam) = random_scene(5, 120, 4, 24, 24);
        let map = render_tiled(&g, &cam, 16);
        for y in 0..map.height {
            for x in 0..map.width {
                let a = map.alpha_at(x, y);
                assert!((0.0..1.0).contains(&a));
                for c in 0..map.channels {
                    assert!(map.value(x, y, c).abs() <= a + 1e-15);
                }
            }
        }
    }

    #[test]
    fn rigid_consistency_under_scene_rotation() {
        let (g, cam) = random_scene(13, 50, 2, 24, 24);
        let rot = rotation_y(0.8f64).mul_mat(rotation_x(-0.35));
        let rotated = EmbeddedGaussians {
            channels: g.channels,
            positions: g.positions.iter().map(|&p| rot.mul_vec(p)).collect(),
            scales: g.scales.clone(),
            opacities: g.opacities.clone(),
            features: g.features.clone(),
            source_texel: g.source_texel.clone(),
        };
        // Compose the camera with the inverse rotation so relative pose is
        // unchanged: R' = R * rot^T.
        let cam_rot = Camera {
            rotation: cam.rotation.mul_mat(rot.transpose()),
            ..cam
        };
        let a = render_tiled(&g, &cam, 8);
        let b = render_tiled(&rotated, &cam_rot, 8);
        assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn depth_ties_break_by_input_index() {
        // Two coincident Gaussians at the same depth: the first one in input
        // order must blend first (its feature dominates).
        let g = EmbeddedGaussians {
            channels: 1,
            positions: vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0)],
            scales: vec![0.01, 0.01],
            opacities: vec![0.9, 0.9],
            features: vec![1.0 - 2e-7, -1.0 + 2e-7],
            source_texel: vec![0, 1],
        };
        let cam = camera(1, 0.5);
        let map = render_bruteforce(&g, &cam);
        // front contributes 0.9, back 0.9 * 0.1: net positive.
        assert!(map.value(0, 0, 0) > 0.7);
    }
}
