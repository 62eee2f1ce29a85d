//! Learnable control-signal pipeline: isotropic 3D Gaussians with neural
//! feature attributes anchored on a deformable blendshape surface through a
//! UV atlas, splatted into multi-channel feature maps by depth-sorted alpha
//! blending, with an analytic backward pass so the features can be learned
//! from downstream losses.
//!
//! The crate is generic over the floating-point scalar (see [`Scalar`]);
//! `f64` is the reference precision used by the CLI and the acceptance
//! suite, `f32` is the fast path. Concrete aliases for both live at the
//! crate root.
//!
//! Pipeline at a glance:
//!
//! 1. [`surface`]: deform a blendshape template, precompute the texel-grid
//!    UV mapping.
//! 2. [`field`]: activate the learnable UV field and embed one Gaussian per
//!    mapped texel on the deformed surface.
//! 3. [`splat`]: project and blend into a [`FeatureMap`] (brute-force oracle
//!    and tiled fast path).
//! 4. [`gradients`]: pull a downstream loss back to the raw field tensors;
//!    verified against central finite differences.
//! 5. [`fit`] / [`views`]: desk-scale optimization experiments, multi-view
//!    sampling, cross-identity signals, and the 3D-consistency sweep.
//! 6. [`formats`]: versioned binary containers for every artifact.

pub mod demo;
pub mod error;
pub mod field;
pub mod fit;
pub mod formats;
pub mod gradients;
pub mod linalg;
pub mod scalar;
pub mod splat;
pub mod surface;
pub mod views;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use splat::FeatureMap;

/// 64-bit instantiations: the normative precision.
pub type SurfaceModel64 = surface::SurfaceModel<f64>;
pub type DeformedMesh64 = surface::DeformedMesh<f64>;
pub type RigidPose64 = surface::RigidPose<f64>;
pub type UvMapping64 = surface::UvMapping<f64>;
pub type GaussianField64 = field::GaussianFieldUv<f64>;
pub type EmbeddedGaussians64 = field::EmbeddedGaussians<f64>;
pub type Camera64 = splat::Camera<f64>;
pub type FeatureMap64 = splat::FeatureMap<f64>;
pub type FieldGradient64 = gradients::FieldGradient<f64>;

/// 32-bit instantiations: the optional fast path.
pub type SurfaceModel32 = surface::SurfaceModel<f32>;
pub type DeformedMesh32 = surface::DeformedMesh<f32>;
pub type RigidPose32 = surface::RigidPose<f32>;
pub type UvMapping32 = surface::UvMapping<f32>;
pub type GaussianField32 = field::GaussianFieldUv<f32>;
pub type EmbeddedGaussians32 = field::EmbeddedGaussians<f32>;
pub type Camera32 = splat::Camera<f32>;
pub type FeatureMap32 = splat::FeatureMap<f32>;
pub type FieldGradient32 = gradients::FieldGradient<f32>;
