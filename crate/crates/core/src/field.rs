//! The learnable UV-space Gaussian field and its embedding onto a deformed
//! surface.
//!
//! Each texel carries three raw (unconstrained) attributes: a feature vector,
//! an opacity logit, and a log scale. Activation maps them to their working
//! ranges: `tanh` for features in (-1, 1), `sigmoid` for opacity in (0, 1),
//! `exp` for a positive world-space scale. Embedding produces one isotropic
//! world-space Gaussian per mapped texel, positioned by barycentric
//! interpolation of the deformed mesh; attributes depend only on the field,
//! never on the mesh or any camera.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::{unit_f64, Scalar};
use crate::surface::{surface_point, DeformedMesh, SurfaceModel, TexelEntry, UvMapping};

/// Feature components are initialized uniformly in `(-AMP, AMP)`.
pub const FEATURE_INIT_AMPLITUDE: f64 = 0.1;

/// Default initial world scale: this factor times the template's median edge
/// length, so Gaussians on neighboring texels overlap at initialization.
pub const INITIAL_SCALE_FACTOR: f64 = 0.7;

/// Raw learnable attributes on a square UV texel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFieldUv<S> {
    pub resolution: usize,
    pub channels: usize,
    /// `[res x res x C]`, texel-major: `raw_feature[texel * C + c]`.
    pub raw_feature: Vec<S>,
    /// `[res x res]`, row-major texels.
    pub raw_opacity: Vec<S>,
    /// `[res x res]`, row-major texels.
    pub raw_scale: Vec<S>,
}

/// Initialize a field from a seed: features uniform in (-0.1, 0.1), opacity
/// at logit(0.5) = 0, scale at ln(initial_scale).
pub fn init_field<S: Scalar>(
    resolution: usize,
    channels: usize,
    seed: u64,
    initial_scale: S,
) -> Result<GaussianFieldUv<S>> {
    if resolution == 0 {
        return Err(Error::InvalidDimension { name: "resolution", value: resolution });
    }
    if channels == 0 {
        return Err(Error::InvalidDimension { name: "channels", value: channels });
    }
    if !(initial_scale > S::zero()) {
        return Err(Error::InvalidRange {
            reason: format!("initial_scale must be positive, got {initial_scale}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texels = resolution * resolution;
    let raw_feature = (0..texels * channels)
        .map(|_| S::c(FEATURE_INIT_AMPLITUDE * (2.0 * unit_f64(rng.next_u64()) - 1.0)))
        .collect();
    Ok(GaussianFieldUv {
        resolution,
        channels,
        raw_feature,
        raw_opacity: vec![S::zero(); texels],
        raw_scale: vec![initial_scale.ln(); texels],
    })
}

/// `INITIAL_SCALE_FACTOR` times the template's median edge length.
pub fn default_initial_scale<S: Scalar>(model: &SurfaceModel<S>) -> S {
    S::c(INITIAL_SCALE_FACTOR) * model.median_edge_length()
}

/// Numerically stable logistic function.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

impl<S: Scalar> GaussianFieldUv<S> {
    pub fn num_texels(&self) -> usize {
        self.resolution * self.resolution
    }

    /// Flat parameter count (features, then opacities, then scales).
    pub fn param_count(&self) -> usize {
        self.num_texels() * (self.channels + 2)
    }

    /// Activated attributes of texel `(i, j)`: (feature, opacity, scale).
    pub fn activate(&self, i: usize, j: usize) -> (Vec<S>, S, S) {
        let t = j * self.resolution + i;
        let feature = self.raw_feature[t * self.channels..(t + 1) * self.channels]
            .iter()
            .map(|&x| x.tanh())
            .collect();
        (feature, sigmoid(self.raw_opacity[t]), self.raw_scale[t].exp())
    }

    /// Copy all raw parameters into `out` in `[feature | opacity | scale]` order.
    pub fn copy_params(&self, out: &mut Vec<S>) {
        out.clear();
        out.extend_from_slice(&self.raw_feature);
        out.extend_from_slice(&self.raw_opacity);
        out.extend_from_slice(&self.raw_scale);
    }

    /// Overwrite all raw parameters from the flat layout of [`copy_params`].
    ///
    /// [`copy_params`]: GaussianFieldUv::copy_params
    pub fn set_params(&mut self, params: &[S]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                context: "field parameters",
                got: params.len(),
                expected: self.param_count(),
            });
        }
        let nf = self.raw_feature.len();
        let nt = self.num_texels();
        self.raw_feature.copy_from_slice(&params[..nf]);
        self.raw_opacity.copy_from_slice(&params[nf..nf + nt]);
        self.raw_scale.copy_from_slice(&params[nf + nt..]);
        Ok(())
    }

    pub fn cast<T: Scalar>(&self) -> GaussianFieldUv<T> {
        GaussianFieldUv {
            resolution: self.resolution,
            channels: self.channels,
            raw_feature: self.raw_feature.iter().map(|x| T::c(x.widen())).collect(),
            raw_opacity: self.raw_opacity.iter().map(|x| T::c(x.widen())).collect(),
            raw_scale: self.raw_scale.iter().map(|x| T::c(x.widen())).collect(),
        }
    }
}

/// World-space isotropic Gaussians produced by embedding a field on a mesh.
/// One entry per mapped texel, in row-major texel order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedGaussians<S> {
    pub channels: usize,
    pub positions: Vec<Vec3<S>>,
    pub scales: Vec<S>,
    pub opacities: Vec<S>,
    /// `[N x C]`, Gaussian-major.
    pub features: Vec<S>,
    /// Row-major linear texel index each Gaussian came from.
    pub source_texel: Vec<u32>,
}

impl<S: Scalar> EmbeddedGaussians<S> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn feature(&self, gaussian: usize) -> &[S] {
        &self.features[gaussian * self.channels..(gaussian + 1) * self.channels]
    }
}

/// Transform the field from UV space into world space on the given mesh.
pub fn embed<S: Scalar>(
    field: &GaussianFieldUv<S>,
    mesh: &DeformedMesh<S>,
    mapping: &UvMapping<S>,
) -> Result<EmbeddedGaussians<S>> {
    if mapping.resolution != field.resolution {
        return Err(Error::ResolutionMismatch {
            context: "uv mapping vs field",
            got: mapping.resolution,
            expected: field.resolution,
        });
    }
    let res = field.resolution;
    let mut out = EmbeddedGaussians {
        channels: field.channels,
        positions: Vec::new(),
        scales: Vec::new(),
        opacities: Vec::new(),
        features: Vec::new(),
        source_texel: Vec::new(),
    };
    for j in 0..res {
        for i in 0..res {
            let t = j * res + i;
            let TexelEntry::Mapped { face_id, barycentric } = mapping.entries[t] else {
                continue;
            };
            out.positions.push(surface_point(mesh, face_id, barycentric));
            let (feature, opacity, scale) = field.activate(i, j);
            out.features.extend_from_slice(&feature);
            out.opacities.push(opacity);
            out.scales.push(scale);
            out.source_texel.push(t as u32);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vec2;
    use crate::surface::{build_uv_mapping, deform, BlendBasis, RigidPose};

    fn quad_model() -> SurfaceModel<f64> {
        crate::demo::quad_sheet(1.0, 0.0)
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_field::<f64>(8, 3, 42, 0.5).unwrap();
        let b = init_field::<f64>(8, 3, 42, 0.5).unwrap();
        assert_eq!(a, b);
        let c = init_field::<f64>(8, 3, 43, 0.5).unwrap();
        assert_ne!(a.raw_feature, c.raw_feature);
    }

    #[test]
    fn init_default_paper_configuration() {
        let f = init_field::<f64>(256, 8, 0, 1.0).unwrap();
        assert_eq!(f.raw_feature.len(), 256 * 256 * 8);
        assert_eq!(f.raw_opacity.len(), 256 * 256);
        assert!(f.raw_feature.iter().all(|&x| x > -0.1 && x < 0.1));
        assert!(f.raw_opacity.iter().all(|&x| x == 0.0));
        assert!(f.raw_scale.iter().all(|&x| x == 0.0), "ln(1.0) = 0");
    }

    #[test]
    fn init_rejects_zero_dimensions() {
        assert!(matches!(
            init_field::<f64>(0, 8, 0, 1.0),
            Err(Error::InvalidDimension { name: "resolution", .. })
        ));
        assert!(matches!(
            init_field::<f64>(4, 0, 0, 1.0),
            Err(Error::InvalidDimension { name: "channels", .. })
        ));
        assert!(init_field::<f64>(4, 2, 0, 0.0).is_err());
    }

    #[test]
    fn activation_fixed_points() {
        let mut f = init_field::<f64>(2, 3, 1, 1.0).unwrap();
        f.raw_feature.iter_mut().for_each(|x| *x = 0.0);
        let (feature, opacity, scale) = f.activate(1, 0);
        assert_eq!(feature, vec![0.0, 0.0, 0.0]);
        assert_eq!(opacity, 0.5);
        assert_eq!(scale, 1.0);
    }

    #[test]
    fn activation_saturation_values() {
        // tanh(10) stays strictly below 1.
        let t = 10.0f64.tanh();
        assert!((t - 0.9999999958776927).abs() < 1e-15);
        assert!(t < 1.0);
        // sigmoid(-20) is tiny but positive.
        let s = sigmoid(-20.0f64);
        assert!(s < 1e-8);
        assert!(s > 0.0);
        // Monotone toward 0 as the logit decreases.
        assert!(sigmoid(-21.0f64) < s);
    }

    #[test]
    fn activation_ranges_hold_over_operating_regime() {
        // Saturation limits of f64 itself: tanh rounds to 1.0 near |x| ~ 19,
        // so the open-interval contract is exercised over |raw| <= 15.
        for k in -15..=15 {
            let x = k as f64;
            let f = x.tanh();
            assert!(f > -1.0 && f < 1.0);
            let o = sigmoid(x);
            assert!(o > 0.0 && o < 1.0);
            assert!(x.exp() > 0.0);
        }
    }

    #[test]
    fn embed_empty_mapping_gives_no_gaussians() {
        let model = quad_model();
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let field = init_field::<f64>(4, 2, 7, 0.5).unwrap();
        // A mapping whose entries are all unmapped.
        let mapping = UvMapping {
            resolution: 4,
            entries: vec![TexelEntry::Unmapped; 16],
        };
        let g = embed(&field, &mesh, &mapping).unwrap();
        assert_eq!(g.len(), 0);
    }

    #[test]
    fn embed_corner_texel_lands_on_vertex() {
        // One face whose UV triangle covers the single texel center with
        // barycentric (1, 0, 0): the Gaussian sits exactly on vertex v0.
        let model = SurfaceModel {
            template_vertices: vec![
                Vec3::new(0.25, -0.5, 2.0),
                Vec3::new(1.0, 0.0, 2.0),
                Vec3::new(0.0, 1.0, 2.0),
            ],
            faces: vec![[0, 1, 2]],
            shape_basis: BlendBasis::zeros(3, 0),
            expr_basis: BlendBasis::zeros(3, 0),
            uv_coords: vec![[Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.5), Vec2::new(0.5, 1.0)]],
        };
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let mapping = build_uv_mapping(&model, 1);
        let field = init_field::<f64>(1, 2, 3, 0.5).unwrap();
        let g = embed(&field, &mesh, &mapping).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.positions[0], model.template_vertices[0]);
        let (feature, opacity, scale) = field.activate(0, 0);
        assert_eq!(g.feature(0), &feature[..]);
        assert_eq!(g.opacities[0], opacity);
        assert_eq!(g.scales[0], scale);
        assert_eq!(g.source_texel[0], 0);
    }

    #[test]
    fn embed_attributes_invariant_under_deformation() {
        let model = crate::demo::demo_head();
        let mapping = build_uv_mapping(&model, 16);
        let field = init_field::<f64>(16, 4, 11, default_initial_scale(&model)).unwrap();
        let beta_a = vec![0.0; model.n_shape()];
        let mut beta_b = beta_a.clone();
        beta_b[0] = 1.0;
        beta_b[2] = -0.5;
        let psi = vec![0.3, 0.0, 0.0, -0.2];
        let mesh_a = deform(&model, &beta_a, &psi, &RigidPose::identity()).unwrap();
        let mesh_b = deform(&model, &beta_b, &psi, &RigidPose::identity()).unwrap();
        let ga = embed(&field, &mesh_a, &mapping).unwrap();
        let gb = embed(&field, &mesh_b, &mapping).unwrap();
        // Cross-identity property: attributes are bitwise equal, only
        // positions respond to the shape swap.
        assert_eq!(ga.features, gb.features);
        assert_eq!(ga.opacities, gb.opacities);
        assert_eq!(ga.scales, gb.scales);
        assert_eq!(ga.source_texel, gb.source_texel);
        assert_ne!(ga.positions, gb.positions);
    }

    #[test]
    fn embed_rejects_resolution_mismatch() {
        let model = quad_model();
        let mesh = deform(&model, &[], &[], &RigidPose::identity()).unwrap();
        let mapping = build_uv_mapping(&model, 8);
        let field = init_field::<f64>(4, 2, 7, 0.5).unwrap();
        assert!(matches!(
            embed(&field, &mesh, &mapping),
            Err(Error::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn param_roundtrip() {
        let mut f = init_field::<f64>(3, 2, 9, 0.25).unwrap();
        let mut flat = Vec::new();
        f.copy_params(&mut flat);
        assert_eq!(flat.len(), f.param_count());
        flat[0] = 2.5;
        flat[f.raw_feature.len()] = -1.0;
        *flat.last_mut().unwrap() = 0.125;
        f.set_params(&flat).unwrap();
        assert_eq!(f.raw_feature[0], 2.5);
        assert_eq!(f.raw_opacity[0], -1.0);
        assert_eq!(*f.raw_scale.last().unwrap(), 0.125);
        assert!(f.set_params(&flat[1..]).is_err());
    }
}
