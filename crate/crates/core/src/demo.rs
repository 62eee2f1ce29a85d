//! Procedurally built assets and fixture scenes.
//!
//! Everything here is deterministic so tests, the CLI demo asset, and the
//! benchmark need no external downloads. The demo head is an icosphere
//! (4 subdivisions: 2562 vertices, 5120 faces) shaped into a rough head, with
//! four shape and four expression blendshapes and a per-face UV atlas packed
//! on a square grid.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{EmbeddedGaussians, GaussianFieldUv};
use crate::linalg::{Mat3, Vec2, Vec3};
use crate::scalar::{unit_f64, Scalar};
use crate::splat::Camera;
use crate::surface::{BlendBasis, SurfaceModel};

/// Subdivided icosahedron on the unit sphere.
fn icosphere(subdivisions: u32) -> (Vec<Vec3<f64>>, Vec<[u32; 3]>) {
    let t = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints = std::collections::HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = vertices[a as usize].add(vertices[b as usize]).scale(0.5).normalized();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// Smooth bump: gaussian falloff of the distance between a unit-sphere point
/// and an anchor direction.
fn bump(n: Vec3<f64>, anchor: Vec3<f64>, radius: f64) -> f64 {
    let d = n.sub(anchor.normalized());
    (-d.norm_sq() / (2.0 * radius * radius)).exp()
}

/// Pack face `f` of `num_faces` into a per-face UV atlas: two faces per grid
/// square, split along the square's main diagonal.
fn atlas_uv(f: usize, grid: usize) -> [Vec2<f64>; 3] {
    let square = f / 2;
    let col = square % grid;
    let row = square / grid;
    let g = grid as f64;
    let u0 = col as f64 / g;
    let u1 = (col + 1) as f64 / g;
    let v0 = row as f64 / g;
    let v1 = (row + 1) as f64 / g;
    let a = Vec2::new(u0, v0);
    let b = Vec2::new(u1, v0);
    let c = Vec2::new(u1, v1);
    let d = Vec2::new(u0, v1);
    if f % 2 == 0 {
        [a, b, c]
    } else {
        [a, c, d]
    }
}

/// The demo head: icosphere-derived mesh with 4 shape and 4 expression
/// blendshapes and a full per-face UV atlas.
pub fn demo_head() -> SurfaceModel<f64> {
    let (sphere, faces) = icosphere(4);
    let num_vertices = sphere.len();

    // Head shaping: ellipsoid plus a nose bump. `sphere` keeps the unit
    // normal used to anchor all the displacement fields below.
    let template_vertices: Vec<Vec3<f64>> = sphere
        .iter()
        .map(|&n| {
            let mut v = Vec3::new(0.78 * n.x(), 1.02 * n.y(), 0.86 * n.z());
            let nose = bump(n, Vec3::new(0.0, -0.15, 0.99), 0.18);
            v.0[2] += 0.14 * nose;
            let chin = bump(n, Vec3::new(0.0, -0.85, 0.5), 0.25);
            v.0[2] += 0.05 * chin;
            v
        })
        .collect();

    let mut shape_basis = BlendBasis::zeros(num_vertices, 4);
    let mut expr_basis = BlendBasis::zeros(num_vertices, 4);
    for (vi, &n) in sphere.iter().enumerate() {
        let left = |a: Vec3<f64>, r: f64| bump(n, Vec3::new(-a.x(), a.y(), a.z()), r);
        let right = |a: Vec3<f64>, r: f64| bump(n, a, r);

        // Shape space: width, height, back-of-head, jaw width.
        *shape_basis.entry_mut(vi, 0, 0) = 0.12 * n.x();
        *shape_basis.entry_mut(vi, 1, 1) = 0.12 * n.y();
        *shape_basis.entry_mut(vi, 2, 2) = -0.15 * bump(n, Vec3::new(0.0, 0.0, -1.0), 0.5);
        let jaw_anchor = Vec3::new(0.72, -0.5, 0.4);
        *shape_basis.entry_mut(vi, 0, 3) =
            0.12 * (right(jaw_anchor, 0.3) - left(jaw_anchor, 0.3));

        // Expression space: jaw open, smile, brow raise, cheek puff.
        let chin = bump(n, Vec3::new(0.0, -0.8, 0.55), 0.3);
        *expr_basis.entry_mut(vi, 1, 0) = -0.16 * chin;
        *expr_basis.entry_mut(vi, 2, 0) = -0.02 * chin;
        let mouth = Vec3::new(0.45, -0.45, 0.85);
        *expr_basis.entry_mut(vi, 0, 1) = 0.05 * (right(mouth, 0.22) - left(mouth, 0.22));
        *expr_basis.entry_mut(vi, 1, 1) = 0.07 * (right(mouth, 0.22) + left(mouth, 0.22));
        *expr_basis.entry_mut(vi, 1, 2) = 0.10 * bump(n, Vec3::new(0.0, 0.35, 0.93), 0.25);
        let cheek = Vec3::new(0.62, -0.15, 0.7);
        let puff = 0.09 * (right(cheek, 0.28) + left(cheek, 0.28));
        for axis in 0..3 {
            *expr_basis.entry_mut(vi, axis, 3) = puff * n.0[axis];
        }
    }

    let grid = (faces.len().div_ceil(2) as f64).sqrt().ceil() as usize;
    let uv_coords = (0..faces.len()).map(|f| atlas_uv(f, grid)).collect();

    let model = SurfaceModel {
        template_vertices,
        faces,
        shape_basis,
        expr_basis,
        uv_coords,
    };
    debug_assert!(model.validate().is_ok());
    model
}

/// A flat square sheet whose UV atlas covers all of [0,1]^2 (two triangles),
/// centered on the z axis at `z_offset`, spanning `extent` in x and y.
pub fn quad_sheet(extent: f64, z_offset: f64) -> SurfaceModel<f64> {
    let h = extent / 2.0;
    SurfaceModel {
        template_vertices: vec![
            Vec3::new(-h, -h, z_offset),
            Vec3::new(h, -h, z_offset),
            Vec3::new(h, h, z_offset),
            Vec3::new(-h, h, z_offset),
        ],
        faces: vec![[0, 1, 2], [0, 2, 3]],
        shape_basis: BlendBasis::zeros(4, 0),
        expr_basis: BlendBasis::zeros(4, 0),
        uv_coords: vec![
            [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)],
            [Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
        ],
    }
}

/// Fill a field's raw tensors with seeded draws: features uniform in
/// `(-feature_amp, feature_amp)`, opacity logits uniform in
/// `(-opacity_amp, opacity_amp)`, log scales jittered by `(-scale_jitter,
/// scale_jitter)` around their current value.
pub fn randomize_field<S: Scalar>(
    field: &mut GaussianFieldUv<S>,
    seed: u64,
    feature_amp: f64,
    opacity_amp: f64,
    scale_jitter: f64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |amp: f64| S::c(amp * (2.0 * unit_f64(rng.next_u64()) - 1.0));
    for x in field.raw_feature.iter_mut() {
        *x = draw(feature_amp);
    }
    for x in field.raw_opacity.iter_mut() {
        *x = draw(opacity_amp);
    }
    for x in field.raw_scale.iter_mut() {
        let jitter = draw(scale_jitter);
        *x += jitter;
    }
}

/// Seeded random gaussians in front of a simple identity-pose camera.
/// Positions, scales, opacities, and features are drawn so that footprints
/// span roughly 0.5 to 8 pixels and everything lands in frame.
pub fn random_scene(
    seed: u64,
    n: usize,
    channels: usize,
    width: usize,
    height: usize,
) -> (EmbeddedGaussians<f64>, Camera<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || unit_f64(rng.next_u64());
    let cam = Camera {
        fx: 0.9 * width as f64,
        fy: 0.9 * width as f64,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        rotation: Mat3::identity(),
        translation: Vec3::zero(),
        width,
        height,
        near: 0.1,
    };
    let mut g = EmbeddedGaussians {
        channels,
        positions: Vec::with_capacity(n),
        scales: Vec::with_capacity(n),
        opacities: Vec::with_capacity(n),
        features: Vec::with_capacity(n * channels),
        source_texel: Vec::with_capacity(n),
    };
    for i in 0..n {
        let z = 2.0 + 4.0 * unit();
        let x = (unit() - 0.5) * 0.9 * z / 0.9;
        let y = (unit() - 0.5) * 0.9 * z / 0.9;
        g.positions.push(Vec3::new(x, y, z));
        g.scales.push(0.02 * (1.0 + 15.0 * unit()));
        g.opacities.push(0.05 + 0.9 * unit());
        for _ in 0..channels {
            g.features.push(1.98 * unit() - 0.99);
        }
        g.source_texel.push(i as u32);
    }
    (g, cam)
}

/// The benchmark scene: a fully mapped sheet (every texel of a `uv_res` grid
/// carries a Gaussian) viewed head-on at `size x size`. Footprints are sized
/// from the texel spacing so neighbors overlap without any single Gaussian
/// flooding the image.
pub fn bench_scene(
    uv_res: usize,
    channels: usize,
    size: usize,
) -> (EmbeddedGaussians<f64>, Camera<f64>) {
    let extent = 1.333;
    let model = quad_sheet(extent, 2.0);
    let mapping = crate::surface::build_uv_mapping(&model, uv_res);
    let field = crate::field::init_field(uv_res, channels, 3, 0.7 * extent / uv_res as f64)
        .expect("valid bench field");
    let mesh = crate::surface::deform(&model, &[], &[], &crate::surface::RigidPose::identity())
        .expect("rigid bench mesh");
    let g = crate::field::embed(&field, &mesh, &mapping).expect("bench embed");
    let cam = Camera {
        fx: 1.2 * size as f64,
        fy: 1.2 * size as f64,
        cx: size as f64 / 2.0,
        cy: size as f64 / 2.0,
        rotation: Mat3::identity(),
        translation: Vec3::zero(),
        width: size,
        height: size,
        near: 0.1,
    };
    (g, cam)
}

/// Occlusion rig: two single-triangle UV islands crossing the optical axis,
/// the front one at z = 1.4 and the back one at z = 2.6. With a 2x2 field,
/// texel (0,0) lands on the front face centroid (exactly on the axis) and
/// texel (1,1) on the back face centroid; the other two texels stay unmapped.
/// The UV triangles put both texel centers at barycentric (1/3, 1/3, 1/3), so
/// the embedded Gaussians sit exactly on the axis and an on-axis camera with
/// half-integer principal point sees them dead center on a pixel.
pub fn occlusion_model() -> SurfaceModel<f64> {
    SurfaceModel {
        template_vertices: vec![
            // front triangle, centroid (0, 0, 1.4)
            Vec3::new(-0.3, -0.2, 1.4),
            Vec3::new(0.3, -0.2, 1.4),
            Vec3::new(0.0, 0.4, 1.4),
            // back triangle, centroid (0, 0, 2.6)
            Vec3::new(-0.35, -0.25, 2.6),
            Vec3::new(0.35, -0.25, 2.6),
            Vec3::new(0.0, 0.5, 2.6),
        ],
        faces: vec![[0, 1, 2], [3, 4, 5]],
        shape_basis: BlendBasis::zeros(6, 0),
        expr_basis: BlendBasis::zeros(6, 0),
        uv_coords: vec![
            // centroids at the texel centers (0.25, 0.25) and (0.75, 0.75)
            [Vec2::new(0.25, 0.05), Vec2::new(0.45, 0.35), Vec2::new(0.05, 0.35)],
            [Vec2::new(0.75, 0.55), Vec2::new(0.95, 0.85), Vec2::new(0.55, 0.85)],
        ],
    }
}

/// A rig whose UV layout maps exactly five texels of a 4x4 grid: a slanted
/// band covers the bottom texel row (4) and a small island covers one more.
pub fn five_texel_model() -> SurfaceModel<f64> {
    SurfaceModel {
        template_vertices: vec![
            Vec3::new(-0.6, -0.15, 1.8),
            Vec3::new(0.6, -0.15, 2.3),
            Vec3::new(0.6, 0.15, 2.3),
            Vec3::new(-0.6, 0.15, 1.8),
            Vec3::new(-0.1, 0.3, 2.0),
            Vec3::new(0.4, 0.35, 2.2),
            Vec3::new(-0.1, 0.75, 2.1),
        ],
        faces: vec![[0, 1, 2], [0, 2, 3], [4, 5, 6]],
        shape_basis: BlendBasis::zeros(7, 0),
        expr_basis: BlendBasis::zeros(7, 0),
        uv_coords: vec![
            [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.3)],
            [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.3), Vec2::new(0.0, 0.3)],
            [Vec2::new(0.5, 0.5), Vec2::new(0.95, 0.5), Vec2::new(0.5, 0.95)],
        ],
    }
}
