//! Analytic backward pass through blending, projection, and activations,
//! plus a central-finite-difference checker.
//!
//! Per pixel the forward is `F = sum_m f_m a_m T_m` with
//! `T_m = prod_{j<m} (1 - a_j)` over the same depth-ordered, disc-culled,
//! early-terminated traversal as the renderer. The backward recomputes that
//! traversal per pixel, stores the visited (alpha, T) pairs in a scratch
//! buffer, and walks them back to front with the transmittance adjoint
//! `g_T_m = (u . f_m) a_m + g_T_{m+1} (1 - a_m)`, which gives
//! `dL/da_m = T_m ((u . f_m) - g_T_{m+1})` without dividing by `(1 - a)`.
//! Alphas that hit [`ALPHA_CLAMP`] propagate nothing through the alpha
//! branch (the feature branch still flows), and Gaussians dropped by the
//! early-out or the frustum cull get exactly zero gradient, so the checker
//! differentiates the very same function the renderer computes.
//!
//! Chain to the raw texel parameters:
//! `da/do = a / o`, `da/dsigma = a d^2 / sigma^3`, `sigma = s fx / z`,
//! `df/d(raw f) = 1 - f^2`, `do/d(raw o) = o (1 - o)`, `ds/d(raw s) = s`.
//! Positions are fixed by the surface and receive no gradient.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demo;
use crate::error::{Error, Result};
use crate::field::{embed, init_field, EmbeddedGaussians, GaussianFieldUv};
use crate::linalg::{rotation_x, rotation_y, Mat3, Vec2, Vec3};
use crate::scalar::{unit_f64, Scalar};
use crate::splat::render::{bin_by_tile, sorted_projection};
use crate::splat::{
    render_tiled, Camera, ALPHA_CLAMP, DEFAULT_TILE_SIZE, SUPPORT_SIGMAS, TRANSMITTANCE_EPS,
};
use crate::surface::{deform, DeformedMesh, RigidPose, UvMapping};

/// Parameters checked per scene before falling back to a seeded subsample.
pub const GRAD_CHECK_SUBSAMPLE: usize = 10_000;

/// Relative-error denominator floor; keeps finite-difference cancellation
/// noise on near-zero gradients from registering as disagreement.
pub const REL_ERR_FLOOR: f64 = 1e-5;

/// Pass threshold for [`grad_check`].
pub const GRAD_CHECK_TOL: f64 = 1e-4;

/// Gradients with respect to the raw field tensors, same layout as the field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGradient<S> {
    pub resolution: usize,
    pub channels: usize,
    pub d_raw_feature: Vec<S>,
    pub d_raw_opacity: Vec<S>,
    pub d_raw_scale: Vec<S>,
}

impl<S: Scalar> FieldGradient<S> {
    pub fn zeros(resolution: usize, channels: usize) -> Self {
        let texels = resolution * resolution;
        FieldGradient {
            resolution,
            channels,
            d_raw_feature: vec![S::zero(); texels * channels],
            d_raw_opacity: vec![S::zero(); texels],
            d_raw_scale: vec![S::zero(); texels],
        }
    }

    /// Flatten in the `[feature | opacity | scale]` layout of
    /// [`GaussianFieldUv::copy_params`].
    pub fn copy_flat(&self, out: &mut Vec<S>) {
        out.clear();
        out.extend_from_slice(&self.d_raw_feature);
        out.extend_from_slice(&self.d_raw_opacity);
        out.extend_from_slice(&self.d_raw_scale);
    }

    pub fn all_finite(&self) -> bool {
        self.d_raw_feature.iter().all(|x| x.is_finite())
            && self.d_raw_opacity.iter().all(|x| x.is_finite())
            && self.d_raw_scale.iter().all(|x| x.is_finite())
    }
}

/// One blended Gaussian recorded during the per-pixel forward replay.
#[derive(Clone, Copy)]
struct Blended<S> {
    slot: u32,
    gaussian: u32,
    alpha: S,
    t_before: S,
    d2: S,
    sigma: S,
    clamped: bool,
}

struct TileGrads<S> {
    d_feature: Vec<S>,
    d_opacity: Vec<S>,
    d_sigma: Vec<S>,
}

/// Backward pass: upstream is `dL/dFeatureMap.values` in pixel-major
/// `[H x W x C]` layout matching the camera and channel count.
pub fn backward<S: Scalar>(
    g: &EmbeddedGaussians<S>,
    cam: &Camera<S>,
    upstream: &[S],
    field: &GaussianFieldUv<S>,
) -> Result<FieldGradient<S>> {
    let (w, h, c) = (cam.width, cam.height, g.channels);
    if upstream.len() != w * h * c {
        return Err(Error::ShapeMismatch {
            context: "upstream gradient",
            got: upstream.len(),
            expected: w * h * c,
        });
    }
    if field.channels != c {
        return Err(Error::ShapeMismatch {
            context: "field channels",
            got: field.channels,
            expected: c,
        });
    }

    let sorted = sorted_projection(g, cam);
    let tile_size = DEFAULT_TILE_SIZE;
    let (ntx, _nty, bins) = bin_by_tile(&sorted, w, h, tile_size);

    let clamp = S::c(ALPHA_CLAMP);
    let t_eps = S::c(TRANSMITTANCE_EPS);
    let support_sq = S::c(SUPPORT_SIGMAS * SUPPORT_SIGMAS);
    let two = S::c(2.0);

    // Per-tile local accumulation, reduced sequentially in tile order below
    // so results do not depend on the thread count.
    let tile_grads: Vec<TileGrads<S>> = bins
        .par_iter()
        .enumerate()
        .map(|(tidx, bin)| {
            let mut local = TileGrads {
                d_feature: vec![S::zero(); bin.len() * c],
                d_opacity: vec![S::zero(); bin.len()],
                d_sigma: vec![S::zero(); bin.len()],
            };
            if bin.is_empty() {
                return local;
            }
            let tx = tidx % ntx;
            let ty = tidx / ntx;
            let x_end = ((tx + 1) * tile_size).min(w);
            let y_end = ((ty + 1) * tile_size).min(h);
            let mut scratch: Vec<Blended<S>> = Vec::with_capacity(bin.len());
            for y in ty * tile_size..y_end {
                for x in tx * tile_size..x_end {
                    let u = &upstream[(y * w + x) * c..(y * w + x + 1) * c];
                    let px = Vec2::new(
                        S::from_usize(x).unwrap() + S::c(0.5),
                        S::from_usize(y).unwrap() + S::c(0.5),
                    );
                    // Forward replay, identical traversal to the renderer.
                    scratch.clear();
                    let mut transmittance = S::one();
                    for (slot, &k) in bin.iter().enumerate() {
                        let p = &sorted[k as usize];
                        let d2 = px.sub(p.pixel_center).norm_sq();
                        let sigma_sq = p.pixel_radius_sigma * p.pixel_radius_sigma;
                        if d2 > support_sq * sigma_sq {
                            continue;
                        }
                        let raw_alpha = g.opacities[p.index] * (-d2 / (two * sigma_sq)).exp();
                        let alpha = raw_alpha.min(clamp);
                        scratch.push(Blended {
                            slot: slot as u32,
                            gaussian: p.index as u32,
                            alpha,
                            t_before: transmittance,
                            d2,
                            sigma: p.pixel_radius_sigma,
                            clamped: raw_alpha >= clamp,
                        });
                        transmittance *= S::one() - alpha;
                        if transmittance < t_eps {
                            break;
                        }
                    }
                    // Back-to-front adjoint walk.
                    let mut g_t_next = S::zero();
                    for e in scratch.iter().rev() {
                        let gi = e.gaussian as usize;
                        let f = g.feature(gi);
                        let mut dot_uf = S::zero();
                        for (uc, &fc) in u.iter().zip(f) {
                            dot_uf += *uc * fc;
                        }
                        let weight = e.alpha * e.t_before;
                        let base = e.slot as usize * c;
                        for (ci, &uc) in u.iter().enumerate() {
                            local.d_feature[base + ci] += uc * weight;
                        }
                        if !e.clamped {
                            let d_alpha = e.t_before * (dot_uf - g_t_next);
                            local.d_opacity[e.slot as usize] +=
                                d_alpha * (e.alpha / g.opacities[gi]);
                            local.d_sigma[e.slot as usize] +=
                                d_alpha * e.alpha * e.d2 / (e.sigma * e.sigma * e.sigma);
                        }
                        g_t_next = dot_uf * e.alpha + g_t_next * (S::one() - e.alpha);
                    }
                }
            }
            local
        })
        .collect();

    // Fixed-order reduction over tiles into per-sorted-Gaussian buffers.
    let n = sorted.len();
    let mut d_feature = vec![S::zero(); n * c];
    let mut d_opacity = vec![S::zero(); n];
    let mut d_sigma = vec![S::zero(); n];
    for (bin, local) in bins.iter().zip(&tile_grads) {
        for (slot, &k) in bin.iter().enumerate() {
            let k = k as usize;
            for ci in 0..c {
                d_feature[k * c + ci] += local.d_feature[slot * c + ci];
            }
            d_opacity[k] += local.d_opacity[slot];
            d_sigma[k] += local.d_sigma[slot];
        }
    }

    // Chain through sigma = s * fx / z and the activations to raw texels.
    let mut out = FieldGradient::zeros(field.resolution, field.channels);
    for (k, p) in sorted.iter().enumerate() {
        let gi = p.index;
        let t = g.source_texel[gi] as usize;
        let o = g.opacities[gi];
        let s = g.scales[gi];
        out.d_raw_scale[t] += d_sigma[k] * (cam.fx / p.depth) * s;
        out.d_raw_opacity[t] += d_opacity[k] * o * (S::one() - o);
        let f = g.feature(gi);
        for ci in 0..c {
            out.d_raw_feature[t * c + ci] += d_feature[k * c + ci] * (S::one() - f[ci] * f[ci]);
        }
    }
    Ok(out)
}

/// Where the worst finite-difference disagreement lives.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorstParam {
    /// Texel `(i, j)` on the UV grid.
    pub texel: [usize; 2],
    /// `"feature[c]"`, `"opacity"`, or `"scale"`.
    pub kind: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: WorstParam,
    /// Number of raw parameters compared.
    pub checked: usize,
    pub pass: bool,
}

fn param_location(field_res: usize, channels: usize, flat: usize) -> WorstParam {
    let texels = field_res * field_res;
    let (t, kind) = if flat < texels * channels {
        (flat / channels, format!("feature[{}]", flat % channels))
    } else if flat < texels * channels + texels {
        (flat - texels * channels, "opacity".to_string())
    } else {
        (flat - texels * channels - texels, "scale".to_string())
    };
    WorstParam {
        texel: [t % field_res, t / field_res],
        kind,
    }
}

/// Central finite differences of the scalar loss `L = sum(upstream * F)`
/// against [`backward`], over every raw parameter (or a seeded subsample
/// above [`GRAD_CHECK_SUBSAMPLE`]).
pub fn grad_check<S: Scalar>(
    field: &GaussianFieldUv<S>,
    mesh: &DeformedMesh<S>,
    mapping: &UvMapping<S>,
    cam: &Camera<S>,
    seed: u64,
    h: f64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidRange {
            reason: format!("finite-difference step h must be > 0, got {h}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let upstream: Vec<S> = (0..cam.width * cam.height * field.channels)
        .map(|_| S::c(2.0 * unit_f64(rng.next_u64()) - 1.0))
        .collect();

    let loss = |f: &GaussianFieldUv<S>| -> Result<f64> {
        let g = embed(f, mesh, mapping)?;
        let map = render_tiled(&g, cam, DEFAULT_TILE_SIZE);
        Ok(map
            .values
            .iter()
            .zip(&upstream)
            .map(|(v, u)| v.widen() * u.widen())
            .sum())
    };

    let g = embed(field, mesh, mapping)?;
    let map = render_tiled(&g, cam, DEFAULT_TILE_SIZE);
    debug_assert_eq!(map.values.len(), upstream.len());
    let analytic = backward(&g, cam, &upstream, field)?;
    let mut analytic_flat = Vec::new();
    analytic.copy_flat(&mut analytic_flat);

    // Choose which parameters to probe.
    let total = field.param_count();
    let indices: Vec<usize> = if total <= GRAD_CHECK_SUBSAMPLE {
        (0..total).collect()
    } else {
        // Seeded partial Fisher-Yates.
        let mut all: Vec<usize> = (0..total).collect();
        for i in 0..GRAD_CHECK_SUBSAMPLE {
            let j = i + (rng.next_u64() as usize) % (total - i);
            all.swap(i, j);
        }
        all.truncate(GRAD_CHECK_SUBSAMPLE);
        all
    };

    let mut params = Vec::new();
    field.copy_params(&mut params);
    let mut worst = (0.0f64, 0usize);
    let mut scratch = field.clone();
    for &idx in &indices {
        let orig = params[idx];
        params[idx] = orig + S::c(h);
        scratch.set_params(&params)?;
        let plus = loss(&scratch)?;
        params[idx] = orig - S::c(h);
        scratch.set_params(&params)?;
        let minus = loss(&scratch)?;
        params[idx] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let a = analytic_flat[idx].widen();
        let rel = (a - fd).abs() / (a.abs().max(fd.abs())).max(REL_ERR_FLOOR);
        if rel > worst.0 {
            worst = (rel, idx);
        }
    }
    Ok(GradCheckReport {
        max_rel_err: worst.0,
        worst_param: param_location(field.resolution, field.channels, worst.1),
        checked: indices.len(),
        pass: worst.0 < GRAD_CHECK_TOL,
    })
}

/// A self-contained scene for gradient verification.
pub struct GradFixture {
    pub name: &'static str,
    pub field: GaussianFieldUv<f64>,
    pub mesh: DeformedMesh<f64>,
    pub mapping: UvMapping<f64>,
    pub camera: Camera<f64>,
}

fn axis_camera(size: usize, fx: f64, principal: f64) -> Camera<f64> {
    Camera {
        fx,
        fy: fx,
        cx: principal,
        cy: principal,
        rotation: Mat3::identity(),
        translation: Vec3::zero(),
        width: size,
        height: size,
        near: 0.1,
    }
}

/// The fixture suite used by the CLI `gradcheck` command and the acceptance
/// tests: a planted tilted sheet, a five-Gaussian rig, and the occlusion rig
/// whose front Gaussian clamps at alpha = 0.9999 on its center pixel.
pub fn fixture_scenes(seed: u64) -> Vec<GradFixture> {
    let mut out = Vec::new();

    // Tilted quad sheet, 16 Gaussians.
    {
        let model = demo::quad_sheet(1.2, 0.0);
        let pose = RigidPose {
            rotation: rotation_x(0.3).mul_mat(rotation_y(0.2)),
            translation: Vec3::new(0.0, 0.0, 2.2),
        };
        let mesh = deform(&model, &[], &[], &pose).unwrap();
        let mapping = crate::surface::build_uv_mapping(&model, 4);
        let mut field = init_field(4, 3, seed, 0.21).unwrap();
        demo::randomize_field(&mut field, seed ^ 0xa5a5_5a5a, 1.5, 1.5, 0.3);
        out.push(GradFixture {
            name: "planted_quad",
            field,
            mesh,
            mapping,
            camera: axis_camera(16, 19.2, 8.0),
        });
    }

    // Exactly five Gaussians on a slanted band plus an island.
    {
        let model = demo::five_texel_model();
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let mapping = crate::surface::build_uv_mapping(&model, 4);
        let mut field = init_field(4, 2, seed.wrapping_add(1), 0.2).unwrap();
        demo::randomize_field(&mut field, seed ^ 0x0f0f_f0f0, 1.2, 1.2, 0.25);
        out.push(GradFixture {
            name: "five_gaussian",
            field,
            mesh,
            mapping,
            camera: axis_camera(16, 19.2, 8.0),
        });
    }

    // Occlusion: the front texel's opacity logit is pinned high enough that
    // its center-pixel alpha hits the clamp.
    {
        let model = demo::occlusion_model();
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let mapping = crate::surface::build_uv_mapping(&model, 2);
        let mut field = init_field(2, 2, seed.wrapping_add(2), 0.25).unwrap();
        demo::randomize_field(&mut field, seed ^ 0x3c3c_c3c3, 1.0, 0.8, 0.2);
        field.raw_opacity[0] = 10.0; // sigmoid(10) > 0.9999
        out.push(GradFixture {
            name: "occlusion",
            field,
            mesh,
            mapping,
            camera: axis_camera(8, 9.6, 4.5),
        });
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::sigmoid;
    use crate::surface::{build_uv_mapping, BlendBasis, SurfaceModel, TexelEntry};

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let fx = &fixture_scenes(3)[0];
        let g = embed(&fx.field, &fx.mesh, &fx.mapping).unwrap();
        let upstream = vec![0.0; fx.camera.width * fx.camera.height * fx.field.channels];
        let grad = backward(&g, &fx.camera, &upstream, &fx.field).unwrap();
        assert!(grad.d_raw_feature.iter().all(|&x| x == 0.0));
        assert!(grad.d_raw_opacity.iter().all(|&x| x == 0.0));
        assert!(grad.d_raw_scale.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_gaussian_single_pixel_closed_form() {
        // One texel, one pixel, gaussian dead center: alpha = sigmoid(0) = 0.5,
        // d(raw feature) = upstream * alpha * (1 - tanh(raw)^2).
        let model = SurfaceModel {
            template_vertices: vec![
                Vec3::new(-0.3, -0.2, 2.0),
                Vec3::new(0.3, -0.2, 2.0),
                Vec3::new(0.0, 0.4, 2.0),
            ],
            faces: vec![[0, 1, 2]],
            shape_basis: BlendBasis::zeros(3, 0),
            expr_basis: BlendBasis::zeros(3, 0),
            // UV centroid at the texel center (0.5, 0.5), so the barycentric
            // solve lands on (1/3, 1/3, 1/3) and the Gaussian sits exactly on
            // the optical axis.
            uv_coords: vec![[Vec2::new(0.5, 0.2), Vec2::new(0.8, 0.65), Vec2::new(0.2, 0.65)]],
        };
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let mapping = build_uv_mapping(&model, 1);
        assert_eq!(mapping.num_mapped(), 1);
        let mut field = init_field::<f64>(1, 1, 0, 0.5).unwrap();
        let raw = 0.7;
        field.raw_feature[0] = raw;
        let g = embed(&field, &mesh, &mapping).unwrap();
        let cam = axis_camera(1, 4.0, 0.5);
        let grad = backward(&g, &cam, &[1.0], &field).unwrap();
        let expect = 0.5 * (1.0 - raw.tanh() * raw.tanh());
        assert!((grad.d_raw_feature[0] - expect).abs() < 1e-12);
        // Opacity chain at the fixed point: dL/do = f, d(raw o) = f * o(1-o).
        let expect_o = raw.tanh() * 1.0 * 0.25;
        assert!((grad.d_raw_opacity[0] - expect_o).abs() < 1e-12);
        // Dead-center pixel: d2 is rounding-level, so the scale gradient
        // vanishes with it.
        assert!(grad.d_raw_scale[0].abs() < 1e-30);
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let fx = &fixture_scenes(11)[1];
        let g = embed(&fx.field, &fx.mesh, &fx.mapping).unwrap();
        let n = fx.camera.width * fx.camera.height * fx.field.channels;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let u1: Vec<f64> = (0..n).map(|_| 2.0 * unit_f64(rng.next_u64()) - 1.0).collect();
        let u2: Vec<f64> = (0..n).map(|_| 2.0 * unit_f64(rng.next_u64()) - 1.0).collect();
        let (a, b) = (0.7, -1.3);
        let combo: Vec<f64> = u1.iter().zip(&u2).map(|(x, y)| a * x + b * y).collect();
        let g1 = backward(&g, &fx.camera, &u1, &fx.field).unwrap();
        let g2 = backward(&g, &fx.camera, &u2, &fx.field).unwrap();
        let gc = backward(&g, &fx.camera, &combo, &fx.field).unwrap();
        let mut f1 = Vec::new();
        let mut f2 = Vec::new();
        let mut fc = Vec::new();
        g1.copy_flat(&mut f1);
        g2.copy_flat(&mut f2);
        gc.copy_flat(&mut fc);
        for i in 0..f1.len() {
            assert!((fc[i] - (a * f1[i] + b * f2[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn unmapped_and_culled_texels_have_exact_zero_gradient() {
        let fx = &fixture_scenes(5)[2]; // occlusion rig: texels 1 and 2 unmapped
        let g = embed(&fx.field, &fx.mesh, &fx.mapping).unwrap();
        let n = fx.camera.width * fx.camera.height * fx.field.channels;
        let upstream = vec![0.5; n];
        let grad = backward(&g, &fx.camera, &upstream, &fx.field).unwrap();
        for t in [1usize, 2] {
            assert!(matches!(fx.mapping.entries[t], TexelEntry::Unmapped));
            assert_eq!(grad.d_raw_opacity[t], 0.0);
            assert_eq!(grad.d_raw_scale[t], 0.0);
            for c in 0..fx.field.channels {
                assert_eq!(grad.d_raw_feature[t * fx.field.channels + c], 0.0);
            }
        }
        assert!(grad.all_finite());
    }

    #[test]
    fn out_of_frustum_gaussian_gets_zero_gradient() {
        // Second texel's surface point sits behind the camera.
        let model = SurfaceModel {
            template_vertices: vec![
                Vec3::new(-0.3, -0.2, 2.0),
                Vec3::new(0.3, -0.2, 2.0),
                Vec3::new(0.0, 0.4, 2.0),
                Vec3::new(-0.3, -0.2, -2.0),
                Vec3::new(0.3, -0.2, -2.0),
                Vec3::new(0.0, 0.4, -2.0),
            ],
            faces: vec![[0, 1, 2], [3, 4, 5]],
            shape_basis: BlendBasis::zeros(6, 0),
            expr_basis: BlendBasis::zeros(6, 0),
            uv_coords: vec![
                [Vec2::new(0.25, 0.05), Vec2::new(0.45, 0.35), Vec2::new(0.05, 0.35)],
                [Vec2::new(0.75, 0.55), Vec2::new(0.95, 0.85), Vec2::new(0.55, 0.85)],
            ],
        };
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let mapping = build_uv_mapping(&model, 2);
        assert_eq!(mapping.num_mapped(), 2);
        let mut field = init_field::<f64>(2, 1, 7, 0.3).unwrap();
        demo::randomize_field(&mut field, 8, 1.0, 1.0, 0.2);
        let g = embed(&field, &mesh, &mapping).unwrap();
        let cam = axis_camera(8, 9.6, 4.0);
        let upstream = vec![1.0; 64];
        let grad = backward(&g, &cam, &upstream, &field).unwrap();
        // Texel 3 maps to the behind-camera face: exact zeros.
        assert_eq!(grad.d_raw_opacity[3], 0.0);
        assert_eq!(grad.d_raw_scale[3], 0.0);
        assert_eq!(grad.d_raw_feature[3], 0.0);
        // The visible one has signal.
        assert!(grad.d_raw_opacity[0].abs() > 0.0);
    }

    #[test]
    fn grad_check_rejects_zero_step() {
        let fx = &fixture_scenes(0)[0];
        let err = grad_check(&fx.field, &fx.mesh, &fx.mapping, &fx.camera, 1, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidRange { .. }));
    }

    #[test]
    fn grad_check_passes_on_all_fixtures() {
        for fx in fixture_scenes(7) {
            let report =
                grad_check(&fx.field, &fx.mesh, &fx.mapping, &fx.camera, 7, 1e-5).unwrap();
            assert!(
                report.pass,
                "{}: max_rel_err = {:.3e} at {:?}",
                fx.name, report.max_rel_err, report.worst_param
            );
            assert!(report.checked > 0);
        }
    }

    #[test]
    fn five_gaussian_fixture_meets_tight_tolerance() {
        // The five-Gaussian scene: every parameter with non-negligible
        // analytic gradient agrees with central differences to 1e-5.
        let fx = &fixture_scenes(7)[1];
        let report = grad_check(&fx.field, &fx.mesh, &fx.mapping, &fx.camera, 7, 1e-5).unwrap();
        assert!(
            report.max_rel_err < 1e-5,
            "max_rel_err = {:.3e}",
            report.max_rel_err
        );
    }

    #[test]
    fn occlusion_fixture_clamps_and_agrees() {
        let fx = fixture_scenes(7).into_iter().find(|f| f.name == "occlusion").unwrap();
        let g = embed(&fx.field, &fx.mesh, &fx.mapping).unwrap();
        // The front Gaussian's center pixel clamps at exactly 0.9999.
        assert!(sigmoid(10.0f64) > ALPHA_CLAMP);
        let map = render_tiled(&g, &fx.camera, 8);
        let a_center = map.alpha_at(4, 4);
        // Front alpha 0.9999, back contributes nothing there (early-out).
        assert!((a_center - ALPHA_CLAMP).abs() < 1e-12);
        let report = grad_check(&fx.field, &fx.mesh, &fx.mapping, &fx.camera, 3, 1e-5).unwrap();
        assert!(report.pass, "max_rel_err = {:.3e}", report.max_rel_err);
    }
}
