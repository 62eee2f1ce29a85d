//! Linear blendshape surface with rigid pose, plus the texel-grid UV mapping
//! that anchors field texels to triangles.
//!
//! The surface is `pose.rotation * (template + shape_basis * beta +
//! expr_basis * psi) + pose.translation`. The UV mapping is precomputed on a
//! regular texel grid: texel (i, j) is mapped iff its center
//! `((i+0.5)/res, (j+0.5)/res)` lies inside some UV triangle, with a 1e-9
//! barycentric edge tolerance and ties broken toward the lower face index.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{solve2, Mat3, Vec2, Vec3};
use crate::scalar::Scalar;

/// Barycentric edge tolerance for point-in-triangle tests.
pub const EDGE_TOL: f64 = 1e-9;

/// Per-vertex displacement basis, stored as `[V x 3 x n]` with the
/// coefficient index fastest: `data[(v * 3 + axis) * n + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlendBasis<S> {
    pub num_vertices: usize,
    pub num_coeffs: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> BlendBasis<S> {
    pub fn zeros(num_vertices: usize, num_coeffs: usize) -> Self {
        BlendBasis {
            num_vertices,
            num_coeffs,
            data: vec![S::zero(); num_vertices * 3 * num_coeffs],
        }
    }

    #[inline]
    pub fn entry(&self, vertex: usize, axis: usize, coeff: usize) -> S {
        self.data[(vertex * 3 + axis) * self.num_coeffs + coeff]
    }

    #[inline]
    pub fn entry_mut(&mut self, vertex: usize, axis: usize, coeff: usize) -> &mut S {
        &mut self.data[(vertex * 3 + axis) * self.num_coeffs + coeff]
    }

    /// Displacement of `vertex` for the coefficient vector `coeffs`.
    fn displacement(&self, vertex: usize, coeffs: &[S]) -> Vec3<S> {
        let mut d = Vec3::zero();
        for axis in 0..3 {
            let base = (vertex * 3 + axis) * self.num_coeffs;
            let mut acc = S::zero();
            for (k, &c) in coeffs.iter().enumerate() {
                acc += c * self.data[base + k];
            }
            d.0[axis] = acc;
        }
        d
    }
}

/// Template mesh with shape/expression blendshape bases and a per-face-corner
/// UV atlas.
#[derive(Clone, Debug)]
pub struct SurfaceModel<S> {
    pub template_vertices: Vec<Vec3<S>>,
    pub faces: Vec<[u32; 3]>,
    pub shape_basis: BlendBasis<S>,
    pub expr_basis: BlendBasis<S>,
    /// UV coordinates per face corner, each in `[0, 1]^2`.
    pub uv_coords: Vec<[Vec2<S>; 3]>,
}

impl<S: Scalar> SurfaceModel<S> {
    pub fn num_vertices(&self) -> usize {
        self.template_vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_shape(&self) -> usize {
        self.shape_basis.num_coeffs
    }

    pub fn n_expr(&self) -> usize {
        self.expr_basis.num_coeffs
    }

    /// Check every structural invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        let v = self.num_vertices();
        for (fi, face) in self.faces.iter().enumerate() {
            for &idx in face {
                if idx as usize >= v {
                    return Err(Error::malformed(
                        "faces",
                        format!("face {fi} references vertex {idx} but num_vertices is {v}"),
                    ));
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::malformed(
                    "faces",
                    format!("face {fi} has repeated vertex indices {face:?}"),
                ));
            }
        }
        if self.uv_coords.len() != self.faces.len() {
            return Err(Error::malformed(
                "uv_coords",
                format!(
                    "{} UV triangles for {} faces",
                    self.uv_coords.len(),
                    self.faces.len()
                ),
            ));
        }
        for (fi, uv) in self.uv_coords.iter().enumerate() {
            for corner in uv {
                for &c in &corner.0 {
                    if !(c >= S::zero() && c <= S::one()) {
                        return Err(Error::malformed(
                            "uv_coords",
                            format!("face {fi} has UV component {c} outside [0,1]"),
                        ));
                    }
                }
            }
        }
        for (name, basis) in [("shape_basis", &self.shape_basis), ("expr_basis", &self.expr_basis)] {
            if basis.num_vertices != v {
                return Err(Error::malformed(
                    name,
                    format!("basis is over {} vertices, mesh has {v}", basis.num_vertices),
                ));
            }
            if basis.data.len() != v * 3 * basis.num_coeffs {
                return Err(Error::malformed(
                    name,
                    format!(
                        "basis has {} entries, expected {}",
                        basis.data.len(),
                        v * 3 * basis.num_coeffs
                    ),
                ));
            }
            if basis.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::malformed(name, "non-finite basis entry".to_string()));
            }
        }
        if self.template_vertices.iter().any(|p| p.0.iter().any(|x| !x.is_finite())) {
            return Err(Error::malformed("template_vertices", "non-finite vertex".to_string()));
        }
        Ok(())
    }

    /// Median length of the (deduplicated) template mesh edges.
    pub fn median_edge_length(&self) -> S {
        let mut edges = BTreeSet::new();
        for face in &self.faces {
            for k in 0..3 {
                let a = face[k];
                let b = face[(k + 1) % 3];
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let mut lengths: Vec<S> = edges
            .iter()
            .map(|&(a, b)| {
                self.template_vertices[b as usize]
                    .sub(self.template_vertices[a as usize])
                    .norm()
            })
            .collect();
        lengths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if lengths.is_empty() {
            S::zero()
        } else {
            lengths[lengths.len() / 2]
        }
    }

    pub fn cast<T: Scalar>(&self) -> SurfaceModel<T> {
        SurfaceModel {
            template_vertices: self.template_vertices.iter().map(|p| p.cast()).collect(),
            faces: self.faces.clone(),
            shape_basis: BlendBasis {
                num_vertices: self.shape_basis.num_vertices,
                num_coeffs: self.shape_basis.num_coeffs,
                data: self.shape_basis.data.iter().map(|x| T::c(x.widen())).collect(),
            },
            expr_basis: BlendBasis {
                num_vertices: self.expr_basis.num_vertices,
                num_coeffs: self.expr_basis.num_coeffs,
                data: self.expr_basis.data.iter().map(|x| T::c(x.widen())).collect(),
            },
            uv_coords: self
                .uv_coords
                .iter()
                .map(|tri| {
                    [
                        Vec2::new(T::c(tri[0].x().widen()), T::c(tri[0].y().widen())),
                        Vec2::new(T::c(tri[1].x().widen()), T::c(tri[1].y().widen())),
                        Vec2::new(T::c(tri[2].x().widen()), T::c(tri[2].y().widen())),
                    ]
                })
                .collect(),
        }
    }
}

/// Rigid pose: rotation followed by translation.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RigidPose<S> {
    pub rotation: Mat3<S>,
    pub translation: Vec3<S>,
}

impl<S: Scalar> RigidPose<S> {
    pub fn identity() -> Self {
        RigidPose {
            rotation: Mat3::identity(),
            translation: Vec3::zero(),
        }
    }

    pub fn from_translation(t: Vec3<S>) -> Self {
        RigidPose {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    /// Orthonormality and determinant check at the given tolerance.
    pub fn validate(&self, tol: S) -> Result<()> {
        if self.rotation.orthonormality_error() > tol {
            return Err(Error::InvalidRange {
                reason: "pose rotation is not orthonormal".to_string(),
            });
        }
        if (self.rotation.det() - S::one()).abs() > tol {
            return Err(Error::InvalidRange {
                reason: "pose rotation determinant is not 1".to_string(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, p: Vec3<S>) -> Vec3<S> {
        self.rotation.mul_vec(p).add(self.translation)
    }
}

/// Vertices of a deformed surface; faces are those of the parent model.
#[derive(Clone, Debug)]
pub struct DeformedMesh<S> {
    pub vertices: Vec<Vec3<S>>,
    pub faces: Vec<[u32; 3]>,
}

/// Evaluate the blendshape surface at the given coefficients and pose.
pub fn deform<S: Scalar>(
    model: &SurfaceModel<S>,
    beta: &[S],
    psi: &[S],
    pose: &RigidPose<S>,
) -> Result<DeformedMesh<S>> {
    if beta.len() != model.n_shape() {
        return Err(Error::CoefficientLengthMismatch {
            name: "beta",
            got: beta.len(),
            expected: model.n_shape(),
        });
    }
    if psi.len() != model.n_expr() {
        return Err(Error::CoefficientLengthMismatch {
            name: "psi",
            got: psi.len(),
            expected: model.n_expr(),
        });
    }
    let vertices = model
        .template_vertices
        .iter()
        .enumerate()
        .map(|(v, &tpl)| {
            let rest = tpl
                .add(model.shape_basis.displacement(v, beta))
                .add(model.expr_basis.displacement(v, psi));
            pose.apply(rest)
        })
        .collect();
    Ok(DeformedMesh {
        vertices,
        faces: model.faces.clone(),
    })
}

/// Per-texel mapping record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TexelEntry<S> {
    Mapped { face_id: u32, barycentric: [S; 3] },
    Unmapped,
}

impl<S> TexelEntry<S> {
    pub fn is_mapped(&self) -> bool {
        matches!(self, TexelEntry::Mapped { .. })
    }
}

/// Texel-grid inverse UV mapping: which triangle (and where inside it) each
/// texel center lands on.
#[derive(Clone, Debug, PartialEq)]
pub struct UvMapping<S> {
    pub resolution: usize,
    /// Row-major, `entries[j * resolution + i]` for texel `(i, j)`.
    pub entries: Vec<TexelEntry<S>>,
}

impl<S: Scalar> UvMapping<S> {
    pub fn num_mapped(&self) -> usize {
        self.entries.iter().filter(|e| e.is_mapped()).count()
    }

    /// UV coordinates of the center of texel `(i, j)`.
    pub fn texel_center(&self, i: usize, j: usize) -> Vec2<S> {
        let res = S::from_usize(self.resolution).unwrap();
        Vec2::new(
            (S::from_usize(i).unwrap() + S::c(0.5)) / res,
            (S::from_usize(j).unwrap() + S::c(0.5)) / res,
        )
    }
}

/// Barycentric coordinates of point `p` against UV triangle `(a, b, c)`,
/// or `None` when the triangle is degenerate.
fn barycentric<S: Scalar>(a: Vec2<S>, b: Vec2<S>, c: Vec2<S>, p: Vec2<S>) -> Option<[S; 3]> {
    let e1 = b.sub(a);
    let e2 = c.sub(a);
    let rhs = p.sub(a);
    let sol = solve2(
        [[e1.x(), e2.x()], [e1.y(), e2.y()]],
        [rhs.x(), rhs.y()],
        S::c(1e-30),
    )?;
    let b1 = sol[0];
    let b2 = sol[1];
    Some([S::one() - b1 - b2, b1, b2])
}

/// Precompute the texel-grid mapping for `model`'s UV atlas.
///
/// Ties on shared edges go to the lower face index. A resolution of zero
/// yields an empty (legal) mapping.
pub fn build_uv_mapping<S: Scalar>(model: &SurfaceModel<S>, resolution: usize) -> UvMapping<S> {
    let mut entries = vec![TexelEntry::Unmapped; resolution * resolution];
    if resolution == 0 {
        return UvMapping { resolution, entries };
    }
    let res_s = S::from_usize(resolution).unwrap();
    let pad = S::c(1e-8);

    // Bin faces by the texel cells their UV bbox can reach; per-cell candidate
    // lists stay in ascending face order because faces are visited in order.
    let mut cells: Vec<Vec<u32>> = vec![Vec::new(); resolution * resolution];
    for (fi, uv) in model.uv_coords.iter().enumerate() {
        let (mut umin, mut umax) = (uv[0].x(), uv[0].x());
        let (mut vmin, mut vmax) = (uv[0].y(), uv[0].y());
        for corner in &uv[1..] {
            umin = umin.min(corner.x());
            umax = umax.max(corner.x());
            vmin = vmin.min(corner.y());
            vmax = vmax.max(corner.y());
        }
        // Texel centers at (i+0.5)/res: the candidate index range for [m0, m1].
        let lo = |m: S| ((m - pad) * res_s - S::c(0.5)).ceil().to_isize().unwrap_or(0).max(0);
        let hi = |m: S| {
            ((m + pad) * res_s - S::c(0.5))
                .floor()
                .to_isize()
                .unwrap_or(-1)
                .min(resolution as isize - 1)
        };
        let (i0, i1) = (lo(umin), hi(umax));
        let (j0, j1) = (lo(vmin), hi(vmax));
        if i0 > i1 || j0 > j1 {
            continue;
        }
        for j in j0..=j1 {
            for i in i0..=i1 {
                cells[j as usize * resolution + i as usize].push(fi as u32);
            }
        }
    }

    let tol = S::c(EDGE_TOL);
    let upper = S::one() + tol;
    for j in 0..resolution {
        for i in 0..resolution {
            let center = Vec2::new(
                (S::from_usize(i).unwrap() + S::c(0.5)) / res_s,
                (S::from_usize(j).unwrap() + S::c(0.5)) / res_s,
            );
            for &fi in &cells[j * resolution + i] {
                let uv = &model.uv_coords[fi as usize];
                if let Some(bary) = barycentric(uv[0], uv[1], uv[2], center) {
                    if bary.iter().all(|&b| b >= -tol && b <= upper) {
                        entries[j * resolution + i] = TexelEntry::Mapped {
                            face_id: fi,
                            barycentric: bary,
                        };
                        break;
                    }
                }
            }
        }
    }
    UvMapping { resolution, entries }
}

/// Barycentric interpolation of a deformed face at a mapped texel entry.
pub fn surface_point<S: Scalar>(mesh: &DeformedMesh<S>, face_id: u32, barycentric: [S; 3]) -> Vec3<S> {
    let face = mesh.faces[face_id as usize];
    let v0 = mesh.vertices[face[0] as usize];
    let v1 = mesh.vertices[face[1] as usize];
    let v2 = mesh.vertices[face[2] as usize];
    v0.scale(barycentric[0])
        .add(v1.scale(barycentric[1]))
        .add(v2.scale(barycentric[2]))
}

/// Read a surface container file. See [`crate::formats::read_surface`].
pub fn load_surface<S: Scalar>(path: impl AsRef<Path>) -> Result<SurfaceModel<S>> {
    crate::formats::read_surface(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One triangle covering the lower-left half of UV space.
    fn single_triangle_model() -> SurfaceModel<f64> {
        SurfaceModel {
            template_vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(3.0, 0.0, 0.0),
                Vec3::new(0.0, 3.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
            shape_basis: BlendBasis::zeros(3, 0),
            expr_basis: BlendBasis::zeros(3, 0),
            uv_coords: vec![[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]],
        }
    }

    fn two_shape_model() -> SurfaceModel<f64> {
        let mut shape = BlendBasis::zeros(3, 2);
        // First blendshape moves vertex 1 along +x, second moves vertex 2 along +y.
        *shape.entry_mut(1, 0, 0) = 2.0;
        *shape.entry_mut(2, 1, 1) = -1.0;
        let mut expr = BlendBasis::zeros(3, 1);
        *expr.entry_mut(0, 2, 0) = 0.5;
        SurfaceModel {
            template_vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
            shape_basis: shape,
            expr_basis: expr,
            uv_coords: vec![[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]],
        }
    }

    #[test]
    fn deform_zero_coefficients_is_identity() {
        let model = two_shape_model();
        let mesh = deform(&model, &[0.0, 0.0], &[0.0], &RigidPose::identity()).unwrap();
        assert_eq!(mesh.vertices, model.template_vertices);
    }

    #[test]
    fn deform_translation_shifts_every_vertex() {
        let model = two_shape_model();
        let pose = RigidPose::from_translation(Vec3::new(1.0, 2.0, 3.0));
        let mesh = deform(&model, &[0.0, 0.0], &[0.0], &pose).unwrap();
        for (out, tpl) in mesh.vertices.iter().zip(&model.template_vertices) {
            assert_eq!(*out, tpl.add(Vec3::new(1.0, 2.0, 3.0)));
        }
    }

    #[test]
    fn deform_matches_elementwise_linear_combination() {
        let model = two_shape_model();
        let beta = [0.5, -0.25];
        let psi = [1.5];
        let mesh = deform(&model, &beta, &psi, &RigidPose::identity()).unwrap();
        // Independent elementwise oracle.
        for v in 0..3 {
            for axis in 0..3 {
                let mut expect = model.template_vertices[v].0[axis];
                for (k, b) in beta.iter().enumerate() {
                    expect += b * model.shape_basis.entry(v, axis, k);
                }
                for (k, p) in psi.iter().enumerate() {
                    expect += p * model.expr_basis.entry(v, axis, k);
                }
                assert!((mesh.vertices[v].0[axis] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn deform_rejects_wrong_coefficient_lengths() {
        let model = two_shape_model();
        let err = deform(&model, &[0.0], &[0.0], &RigidPose::identity()).unwrap_err();
        assert!(matches!(err, Error::CoefficientLengthMismatch { name: "beta", .. }));
        let err = deform(&model, &[0.0, 0.0], &[], &RigidPose::identity()).unwrap_err();
        assert!(matches!(err, Error::CoefficientLengthMismatch { name: "psi", .. }));
    }

    #[test]
    fn deform_rigid_equivariance() {
        let model = two_shape_model();
        let rot = crate::linalg::rotation_y(0.7).mul_mat(crate::linalg::rotation_x(-0.3));
        let pose = RigidPose {
            rotation: rot,
            translation: Vec3::new(0.1, -0.2, 0.3),
        };
        let posed = deform(&model, &[0.3, 0.4], &[-0.2], &pose).unwrap();
        let rest = deform(&model, &[0.3, 0.4], &[-0.2], &RigidPose::identity()).unwrap();
        for (a, b) in posed.vertices.iter().zip(&rest.vertices) {
            let expect = rot.mul_vec(*b).add(pose.translation);
            for axis in 0..3 {
                assert!((a.0[axis] - expect.0[axis]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uv_mapping_half_square_geometry() {
        let model = single_triangle_model();
        let mapping = build_uv_mapping(&model, 4);
        // Texel centers (i+0.5)/4; inside iff u + v <= 1 (with edge tolerance).
        for j in 0..4 {
            for i in 0..4 {
                let inside = (i as f64 + 0.5) / 4.0 + (j as f64 + 0.5) / 4.0 <= 1.0 + 1e-9;
                let entry = &mapping.entries[j * 4 + i];
                assert_eq!(entry.is_mapped(), inside, "texel ({i},{j})");
                if let TexelEntry::Mapped { face_id, .. } = entry {
                    assert_eq!(*face_id, 0);
                }
            }
        }
        assert_eq!(mapping.num_mapped(), 10);
    }

    #[test]
    fn uv_mapping_resolution_one_hand_solve() {
        let mut model = single_triangle_model();
        model.uv_coords = vec![[Vec2::new(0.1, 0.1), Vec2::new(0.9, 0.2), Vec2::new(0.3, 0.8)]];
        let mapping = build_uv_mapping(&model, 1);
        let TexelEntry::Mapped { face_id, barycentric } = mapping.entries[0] else {
            panic!("center texel should be mapped");
        };
        assert_eq!(face_id, 0);
        // Hand oracle: Cramer's rule for (b-a) b1 + (c-a) b2 = p - a.
        let (e1, e2, r) = ((0.8, 0.1), (0.2, 0.7), (0.4, 0.4));
        let det = e1.0 * e2.1 - e2.0 * e1.1;
        let b1 = (r.0 * e2.1 - e2.0 * r.1) / det;
        let b2 = (e1.0 * r.1 - r.0 * e1.1) / det;
        assert!((barycentric[1] - b1).abs() < 1e-15);
        assert!((barycentric[2] - b2).abs() < 1e-15);
        assert!((barycentric[0] - (1.0 - b1 - b2)).abs() < 1e-15);
    }

    #[test]
    fn uv_mapping_shared_edge_tie_breaks_low() {
        // Unit square split along the main diagonal; the res-1 texel center
        // (0.5, 0.5) lies exactly on the shared edge.
        let model = SurfaceModel::<f64> {
            template_vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2], [0, 2, 3]],
            shape_basis: BlendBasis::zeros(4, 0),
            expr_basis: BlendBasis::zeros(4, 0),
            uv_coords: vec![
                [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)],
                [Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
            ],
        };
        let mapping = build_uv_mapping(&model, 1);
        let TexelEntry::Mapped { face_id, .. } = mapping.entries[0] else {
            panic!("center should be mapped");
        };
        assert_eq!(face_id, 0, "ties go to the lower face index");
    }

    #[test]
    fn uv_mapping_is_deterministic_and_reconstructs_centers() {
        let model = crate::demo::demo_head();
        let a = build_uv_mapping(&model, 32);
        let b = build_uv_mapping(&model, 32);
        assert_eq!(a, b);
        assert!(a.num_mapped() > 0);
        for j in 0..32 {
            for i in 0..32 {
                if let TexelEntry::Mapped { face_id, barycentric } = a.entries[j * 32 + i] {
                    let uv = &model.uv_coords[face_id as usize];
                    let mut ru = 0.0;
                    let mut rv = 0.0;
                    for (corner, b) in uv.iter().zip(barycentric) {
                        ru += corner.x() * b;
                        rv += corner.y() * b;
                    }
                    let center = a.texel_center(i, j);
                    assert!((ru - center.x()).abs() < 1e-7);
                    assert!((rv - center.y()).abs() < 1e-7);
                    let sum: f64 = barycentric.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-9);
                    for b in barycentric {
                        assert!(b >= -1e-9 && b <= 1.0 + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn uv_mapping_resolution_zero_is_empty() {
        let mapping = build_uv_mapping(&single_triangle_model(), 0);
        assert_eq!(mapping.entries.len(), 0);
        assert_eq!(mapping.num_mapped(), 0);
    }

    #[test]
    fn surface_point_corner_and_centroid() {
        let model = single_triangle_model();
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let corner = surface_point(&mesh, 0, [1.0, 0.0, 0.0]);
        assert_eq!(corner, mesh.vertices[0]);
        let third = 1.0 / 3.0;
        let centroid = surface_point(&mesh, 0, [third, third, third]);
        for (got, expect) in centroid.0.iter().zip([1.0, 1.0, 0.0]) {
            assert!((got - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn surface_point_matches_dot_product_oracle() {
        let model = two_shape_model();
        let mesh = deform(&model, &[0.2, 0.8], &[0.1], &RigidPose::identity()).unwrap();
        let bary = [0.6, 0.3, 0.1];
        let p = surface_point(&mesh, 0, bary);
        for axis in 0..3 {
            let expect: f64 = (0..3)
                .map(|corner| bary[corner] * mesh.vertices[mesh.faces[0][corner] as usize].0[axis])
                .sum();
            assert!((p.0[axis] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn validate_rejects_out_of_range_face_index() {
        let mut model = single_triangle_model();
        model.faces[0] = [0, 1, 7];
        let err = model.validate().unwrap_err();
        assert!(matches!(err, Error::MalformedContainer { .. }));
        assert!(err.to_string().contains("faces"));
    }

    #[test]
    fn median_edge_length_of_unit_right_triangle() {
        let model = single_triangle_model();
        // Edges 3, 3, 3*sqrt(2): median is 3*... sorted = [3, 3, 4.2426], middle = 3.
        assert!((model.median_edge_length() - 3.0).abs() < 1e-12);
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn coeff() -> impl Strategy<Value = f64> {
        -10.0..10.0f64
    }

    proptest! {
        // deform is exactly linear in (beta, psi) for a fixed pose:
        // deform(a*b1 + b*b2) = a*deform(b1) + b*deform(b2) - (a+b-1)*deform(0).
        #[test]
        fn deform_linearity(
            a in coeff(), b in coeff(),
            b1 in proptest::array::uniform2(coeff()),
            b2 in proptest::array::uniform2(coeff()),
            psi in coeff(),
        ) {
            let model = tests_model();
            let pose = RigidPose::identity();
            let combo: Vec<f64> = b1.iter().zip(&b2).map(|(x, y)| a * x + b * y).collect();
            let lhs = deform(&model, &combo, &[psi], &pose).unwrap();
            let d1 = deform(&model, &b1, &[psi], &pose).unwrap();
            let d2 = deform(&model, &b2, &[psi], &pose).unwrap();
            let d0 = deform(&model, &[0.0, 0.0], &[psi], &pose).unwrap();
            for v in 0..model.num_vertices() {
                for axis in 0..3 {
                    let rhs = a * d1.vertices[v].0[axis] + b * d2.vertices[v].0[axis]
                        - (a + b - 1.0) * d0.vertices[v].0[axis];
                    prop_assert!((lhs.vertices[v].0[axis] - rhs).abs() < 1e-12);
                }
            }
        }
    }

    fn tests_model() -> SurfaceModel<f64> {
        let mut shape = BlendBasis::zeros(3, 2);
        *shape.entry_mut(0, 0, 0) = 0.3;
        *shape.entry_mut(1, 1, 0) = -0.7;
        *shape.entry_mut(2, 2, 1) = 0.9;
        *shape.entry_mut(0, 1, 1) = 0.11;
        let mut expr = BlendBasis::zeros(3, 1);
        *expr.entry_mut(1, 2, 0) = 0.25;
        SurfaceModel {
            template_vertices: vec![
                Vec3::new(0.1, 0.2, 0.3),
                Vec3::new(1.0, -0.2, 0.1),
                Vec3::new(-0.3, 0.9, -0.4),
            ],
            faces: vec![[0, 1, 2]],
            shape_basis: shape,
            expr_basis: expr,
            uv_coords: vec![[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]],
        }
    }
}
