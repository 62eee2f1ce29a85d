//! Multi-view camera sampling, cross-identity control signals, and the
//! 3D-consistency sweep.
//!
//! Views sit on a sphere around a look-at point, parameterized by yaw (about
//! +y) and pitch (elevation). The default sampling ranges are yaw in
//! [-60, 60] and pitch in [-30, 45] degrees; intrinsics default to
//! `fx = fy = width * 1.2` with the principal point at the image center.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{embed, GaussianFieldUv};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::{unit_f64, Scalar};
use crate::splat::{project, render_tiled, Camera, FeatureMap, DEFAULT_TILE_SIZE};
use crate::surface::{deform, DeformedMesh, RigidPose, SurfaceModel, UvMapping};

/// Default yaw sampling range in degrees.
pub const DEFAULT_YAW_RANGE: [f64; 2] = [-60.0, 60.0];
/// Default pitch sampling range in degrees.
pub const DEFAULT_PITCH_RANGE: [f64; 2] = [-30.0, 45.0];
/// Default image side in pixels.
pub const DEFAULT_IMAGE_SIZE: usize = 512;
/// Focal length is this factor times the image width.
pub const FOCAL_FACTOR: f64 = 1.2;
/// Default orbit radius; frames the demo head at roughly 80% of the image.
pub const DEFAULT_RADIUS: f64 = 3.0;

/// One view on the orbit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub radius: f64,
    pub look_at: Vec3<f64>,
}

impl ViewSpec {
    /// Build the camera for this view with default-style intrinsics for the
    /// given image size.
    pub fn camera(&self, width: usize, height: usize) -> Camera<f64> {
        let yaw = self.yaw_deg.to_radians();
        let pitch = self.pitch_deg.to_radians();
        let dir = Vec3::new(
            yaw.sin() * pitch.cos(),
            pitch.sin(),
            yaw.cos() * pitch.cos(),
        );
        let position = self.look_at.add(dir.scale(self.radius));
        let forward = self.look_at.sub(position).normalized();
        let up = Vec3::new(0.0, 1.0, 0.0);
        let side = up.cross(forward);
        let right = if side.norm() < 1e-12 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            side.normalized()
        };
        let down = right.cross(forward);
        let rotation = Mat3::from_rows(right, down, forward);
        let translation = rotation.mul_vec(position).scale(-1.0);
        Camera {
            fx: FOCAL_FACTOR * width as f64,
            fy: FOCAL_FACTOR * width as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            rotation,
            translation,
            width,
            height,
            near: 0.1,
        }
    }
}

/// Real/synthetic provenance label; the token id is determined by the kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Real,
    Synthetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLabel {
    pub kind: SampleKind,
    pub token_id: u32,
}

impl SampleLabel {
    pub fn new(kind: SampleKind) -> Self {
        let token_id = match kind {
            SampleKind::Real => 0,
            SampleKind::Synthetic => 1,
        };
        SampleLabel { kind, token_id }
    }
}

/// One line of the dataset manifest (JSON lines).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub subject_id: u64,
    pub view: ViewSpec,
    pub camera: Camera<f64>,
    pub label: SampleKind,
    pub token_id: u32,
    pub feature_map_path: Option<String>,
}

fn check_range(name: &str, range: [f64; 2]) -> Result<()> {
    if !(range[0] <= range[1]) || !range[0].is_finite() || !range[1].is_finite() {
        return Err(Error::InvalidRange {
            reason: format!("{name} range [{}, {}] is not well-ordered", range[0], range[1]),
        });
    }
    Ok(())
}

/// Sample `n` view specs uniformly from the yaw/pitch ranges (degrees).
pub fn sample_view_specs(
    n: usize,
    yaw_range: [f64; 2],
    pitch_range: [f64; 2],
    radius: f64,
    seed: u64,
) -> Result<Vec<ViewSpec>> {
    check_range("yaw", yaw_range)?;
    check_range("pitch", pitch_range)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidRange {
            reason: format!("radius must be positive, got {radius}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let yaw = yaw_range[0] + (yaw_range[1] - yaw_range[0]) * unit_f64(rng.next_u64());
            let pitch =
                pitch_range[0] + (pitch_range[1] - pitch_range[0]) * unit_f64(rng.next_u64());
            ViewSpec {
                yaw_deg: yaw,
                pitch_deg: pitch,
                radius,
                look_at: Vec3::zero(),
            }
        })
        .collect())
}

/// Sample `n` cameras with default intrinsics.
pub fn sample_views(
    n: usize,
    yaw_range: [f64; 2],
    pitch_range: [f64; 2],
    radius: f64,
    seed: u64,
) -> Result<Vec<Camera<f64>>> {
    Ok(sample_view_specs(n, yaw_range, pitch_range, radius, seed)?
        .iter()
        .map(|v| v.camera(DEFAULT_IMAGE_SIZE, DEFAULT_IMAGE_SIZE))
        .collect())
}

/// Render the control map for driving coefficients with a swapped identity:
/// the mesh is `deform(beta_ref, psi, pose)`, the field is untouched.
pub fn cross_identity_signal<S: Scalar>(
    field: &GaussianFieldUv<S>,
    model: &SurfaceModel<S>,
    mapping: &UvMapping<S>,
    beta_ref: &[S],
    psi: &[S],
    pose: &RigidPose<S>,
    cam: &Camera<S>,
) -> Result<FeatureMap<S>> {
    let mesh = deform(model, beta_ref, psi, pose)?;
    let g = embed(field, &mesh, mapping)?;
    Ok(render_tiled(&g, cam, DEFAULT_TILE_SIZE))
}

/// Sweep configuration. `fx_error` corrupts the projection that produces the
/// source pixels (a fractional focal error) while unprojection and the
/// target view stay clean; zero means an honest sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_views: usize,
    pub seed: u64,
    pub yaw_range: [f64; 2],
    pub pitch_range: [f64; 2],
    pub radius: f64,
    pub width: usize,
    pub height: usize,
    pub tolerance: f64,
    pub fx_error: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_views: 60,
            seed: 0,
            yaw_range: DEFAULT_YAW_RANGE,
            pitch_range: DEFAULT_PITCH_RANGE,
            radius: DEFAULT_RADIUS,
            width: DEFAULT_IMAGE_SIZE,
            height: DEFAULT_IMAGE_SIZE,
            tolerance: 1e-6,
            fx_error: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub n_views: usize,
    pub max_reproj_err: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Mean of the alpha plane per view, in view order.
    pub alpha_coverage: Vec<f64>,
    pub views: Vec<ViewSpec>,
}

/// Pairwise reprojection consistency of embedded Gaussian centers.
///
/// The same world-space Gaussians are projected into every view once; for
/// each ordered view pair (a, b) and each Gaussian visible in both, the
/// pixel+depth from view a is lifted back to world space and projected into
/// view b, and the distance to b's own projection of that Gaussian is
/// recorded. The maximum over all pairs must stay below the tolerance.
pub fn consistency_sweep(
    field: &GaussianFieldUv<f64>,
    mesh: &DeformedMesh<f64>,
    mapping: &UvMapping<f64>,
    config: &SweepConfig,
) -> Result<SweepReport> {
    if config.n_views < 2 {
        return Err(Error::InvalidRange {
            reason: format!("sweep needs at least 2 views, got {}", config.n_views),
        });
    }
    let views = sample_view_specs(
        config.n_views,
        config.yaw_range,
        config.pitch_range,
        config.radius,
        config.seed,
    )?;
    let cameras: Vec<Camera<f64>> =
        views.iter().map(|v| v.camera(config.width, config.height)).collect();

    // One embedding feeds every view; the representation itself carries no
    // camera dependence.
    let g = embed(field, mesh, mapping)?;
    let n = g.len();

    // Per view: source observations (pixel + depth, possibly with a corrupted
    // projector) and clean target projections.
    let mut source: Vec<Vec<Option<(f64, f64, f64)>>> = Vec::with_capacity(cameras.len());
    let mut target: Vec<Vec<Option<(f64, f64)>>> = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        let mut src = vec![None; n];
        let mut tgt = vec![None; n];
        let fx_src = cam.fx * (1.0 + config.fx_error);
        for p in project(&g, cam) {
            let pc = cam.world_to_camera(g.positions[p.index]);
            let px_src = fx_src * pc.x() / pc.z() + cam.cx;
            let py_src = cam.fy * pc.y() / pc.z() + cam.cy;
            src[p.index] = Some((px_src, py_src, p.depth));
            tgt[p.index] = Some((p.pixel_center.x(), p.pixel_center.y()));
        }
        source.push(src);
        target.push(tgt);
    }

    let mut max_err = 0.0f64;
    for (a, cam_a) in cameras.iter().enumerate() {
        for (b, cam_b) in cameras.iter().enumerate() {
            if a == b {
                continue;
            }
            for gi in 0..n {
                let (Some((px, py, depth)), Some((bx, by))) = (source[a][gi], target[b][gi])
                else {
                    continue;
                };
                // Lift pixel + depth to world with clean intrinsics.
                let x = (px - cam_a.cx) * depth / cam_a.fx;
                let y = (py - cam_a.cy) * depth / cam_a.fy;
                let world = cam_a.camera_to_world(Vec3::new(x, y, depth));
                let pc = cam_b.world_to_camera(world);
                if pc.z() <= cam_b.near {
                    continue;
                }
                let rx = cam_b.fx * pc.x() / pc.z() + cam_b.cx;
                let ry = cam_b.fy * pc.y() / pc.z() + cam_b.cy;
                let err = ((rx - bx).powi(2) + (ry - by).powi(2)).sqrt();
                max_err = max_err.max(err);
            }
        }
    }

    // Alpha coverage per view (mean of the alpha plane).
    let alpha_coverage: Vec<f64> = cameras
        .par_iter()
        .map(|cam| {
            let map = render_tiled(&g, cam, DEFAULT_TILE_SIZE);
            let total: f64 = map.alpha.iter().sum();
            total / (map.width * map.height) as f64
        })
        .collect();

    Ok(SweepReport {
        n_views: config.n_views,
        max_reproj_err: max_err,
        tolerance: config.tolerance,
        pass: max_err < config.tolerance,
        alpha_coverage,
        views,
    })
}
