//! First/second-moment adaptive optimizer and the two desk-scale learning
//! experiments: direct feature-map fitting, and indirect fitting through a
//! tiny per-pixel linear decoder. The indirect experiment is the one that
//! shows the field developing structure with no loss on the feature map
//! itself; supervision reaches it only through the decoder.

use std::path::Path;

use serde::{Deserialize, Serialize};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demo;
use crate::error::{Error, Result};
use crate::field::{default_initial_scale, embed, init_field, GaussianFieldUv};
use crate::formats;
use crate::gradients::backward;
use crate::scalar::{unit_f64, Scalar};
use crate::splat::{render_tiled, Camera, FeatureMap, DEFAULT_TILE_SIZE};
use crate::surface::{deform, DeformedMesh, RigidPose, SurfaceModel};
use crate::views::{sample_view_specs, ViewSpec, DEFAULT_PITCH_RANGE, DEFAULT_YAW_RANGE};

pub const DEFAULT_LR: f64 = 1e-2;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam state over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct OptimState<S> {
    pub step_count: u64,
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
    m: Vec<S>,
    v: Vec<S>,
}

impl<S: Scalar> OptimState<S> {
    pub fn new(len: usize) -> Self {
        Self::with_hyper(len, S::c(DEFAULT_LR), S::c(DEFAULT_BETA1), S::c(DEFAULT_BETA2), S::c(DEFAULT_EPSILON))
    }

    pub fn with_hyper(len: usize, lr: S, beta1: S, beta2: S, epsilon: S) -> Self {
        OptimState {
            step_count: 0,
            lr,
            beta1,
            beta2,
            epsilon,
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
        }
    }

    /// One bias-corrected update: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [S], grads: &[S]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                context: "optimizer parameters",
                got: params.len(),
                expected: self.m.len(),
            });
        }
        if grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                context: "optimizer gradients",
                got: grads.len(),
                expected: params.len(),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = S::one() - self.beta1.powi(t);
        let bc2 = S::one() - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (S::one() - self.beta1) * *g;
            *v = self.beta2 * *v + (S::one() - self.beta2) * *g * *g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Per-pixel linear decoder: 3 output channels from a feature vector plus a
/// bias column, `weights[r * (C + 1) + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxyDecoder<S> {
    pub channels: usize,
    pub weights: Vec<S>,
}

impl<S: Scalar> ProxyDecoder<S> {
    pub fn zeros(channels: usize) -> Self {
        ProxyDecoder {
            channels,
            weights: vec![S::zero(); 3 * (channels + 1)],
        }
    }

    pub fn init(channels: usize, seed: u64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ProxyDecoder {
            channels,
            weights: (0..3 * (channels + 1))
                .map(|_| S::c(amplitude * (2.0 * unit_f64(rng.next_u64()) - 1.0)))
                .collect(),
        }
    }

    #[inline]
    pub fn forward(&self, feature: &[S]) -> [S; 3] {
        let cols = self.channels + 1;
        let mut out = [S::zero(); 3];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * cols..(r + 1) * cols];
            let mut acc = row[self.channels]; // bias
            for (w, f) in row[..self.channels].iter().zip(feature) {
                acc += *w * *f;
            }
            *o = acc;
        }
        out
    }

    /// Decode a whole feature map into a 3-channel image.
    pub fn decode(&self, map: &FeatureMap<S>) -> FeatureMap<S> {
        let mut out = FeatureMap::zeros(map.width, map.height, 3);
        for p in 0..map.width * map.height {
            let rgb = self.forward(&map.values[p * map.channels..(p + 1) * map.channels]);
            out.values[p * 3..p * 3 + 3].copy_from_slice(&rgb);
        }
        out.alpha.copy_from_slice(&map.alpha);
        out
    }
}

/// One training sample: a camera, the mesh it observes, and the target map
/// (C channels for direct fitting, 3 for proxy RGB targets).
#[derive(Clone, Debug)]
pub struct FitSample<S> {
    pub camera: Camera<S>,
    pub mesh: DeformedMesh<S>,
    pub target: FeatureMap<S>,
}

fn check_sample<S: Scalar>(sample: &FitSample<S>, channels: usize) -> Result<()> {
    let t = &sample.target;
    if t.width != sample.camera.width || t.height != sample.camera.height {
        return Err(Error::ShapeMismatch {
            context: "target image size",
            got: t.width * t.height,
            expected: sample.camera.width * sample.camera.height,
        });
    }
    if t.channels != channels {
        return Err(Error::ShapeMismatch {
            context: "target channels",
            got: t.channels,
            expected: channels,
        });
    }
    Ok(())
}

/// Minimize mean squared error between rendered and target feature maps,
/// averaged over samples. Returns the per-iteration loss trace; the loss at
/// index `k` is evaluated before the `k`-th update.
pub fn fit_direct<S: Scalar>(
    field: &mut GaussianFieldUv<S>,
    mapping: &crate::surface::UvMapping<S>,
    samples: &[FitSample<S>],
    iters: usize,
    state: &mut OptimState<S>,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidRange {
            reason: "fit_direct needs at least one sample".to_string(),
        });
    }
    for s in samples {
        check_sample(s, field.channels)?;
    }
    let inv_samples = S::one() / S::from_usize(samples.len()).unwrap();
    let mut trace = Vec::with_capacity(iters);
    let mut grad_total = vec![S::zero(); field.param_count()];
    let mut grad_flat = Vec::new();
    let mut params = Vec::new();
    let mut upstream = Vec::new();
    for _ in 0..iters {
        grad_total.iter_mut().for_each(|g| *g = S::zero());
        let mut loss_total = S::zero();
        for sample in samples {
            let g = embed(field, &sample.mesh, mapping)?;
            let map = render_tiled(&g, &sample.camera, DEFAULT_TILE_SIZE);
            let n = S::from_usize(map.values.len()).unwrap();
            upstream.clear();
            let mut loss = S::zero();
            for (r, t) in map.values.iter().zip(&sample.target.values) {
                let d = *r - *t;
                loss += d * d;
                upstream.push(S::c(2.0) * d / (n * S::from_usize(samples.len()).unwrap()));
            }
            loss_total += loss / n * inv_samples;
            let fg = backward(&g, &sample.camera, &upstream, field)?;
            fg.copy_flat(&mut grad_flat);
            for (acc, d) in grad_total.iter_mut().zip(&grad_flat) {
                *acc += *d;
            }
        }
        assert!(loss_total.is_finite(), "non-finite loss");
        field.copy_params(&mut params);
        state.step(&mut params, &grad_total)?;
        assert!(params.iter().all(|p| p.is_finite()), "non-finite parameter");
        field.set_params(&params)?;
        trace.push(loss_total.widen());
    }
    Ok(trace)
}

/// Jointly optimize the field and a proxy decoder on mean squared RGB error.
/// The field never sees a direct loss; its gradient arrives through the
/// decoder weights.
pub fn fit_proxy<S: Scalar>(
    field: &mut GaussianFieldUv<S>,
    decoder: &mut ProxyDecoder<S>,
    mapping: &crate::surface::UvMapping<S>,
    samples: &[FitSample<S>],
    iters: usize,
    state_field: &mut OptimState<S>,
    state_decoder: &mut OptimState<S>,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidRange {
            reason: "fit_proxy needs at least one sample".to_string(),
        });
    }
    if decoder.channels != field.channels {
        return Err(Error::ShapeMismatch {
            context: "decoder channels",
            got: decoder.channels,
            expected: field.channels,
        });
    }
    for s in samples {
        check_sample(s, 3)?;
    }
    let c = field.channels;
    let cols = c + 1;
    let inv_samples = S::one() / S::from_usize(samples.len()).unwrap();
    let mut trace = Vec::with_capacity(iters);
    let mut grad_field = vec![S::zero(); field.param_count()];
    let mut grad_decoder = vec![S::zero(); decoder.weights.len()];
    let mut grad_flat = Vec::new();
    let mut params = Vec::new();
    let mut upstream_field = Vec::new();
    for _ in 0..iters {
        grad_field.iter_mut().for_each(|g| *g = S::zero());
        grad_decoder.iter_mut().for_each(|g| *g = S::zero());
        let mut loss_total = S::zero();
        for sample in samples {
            let g = embed(field, &sample.mesh, mapping)?;
            let map = render_tiled(&g, &sample.camera, DEFAULT_TILE_SIZE);
            let npix = map.width * map.height;
            let n = S::from_usize(npix * 3).unwrap();
            let norm = S::c(2.0) / (n * S::from_usize(samples.len()).unwrap());
            upstream_field.clear();
            upstream_field.resize(npix * c, S::zero());
            let mut loss = S::zero();
            for p in 0..npix {
                let feature = &map.values[p * c..(p + 1) * c];
                let pred = decoder.forward(feature);
                for r in 0..3 {
                    let d = pred[r] - sample.target.values[p * 3 + r];
                    loss += d * d;
                    let u = norm * d;
                    let row = &decoder.weights[r * cols..(r + 1) * cols];
                    for ci in 0..c {
                        upstream_field[p * c + ci] += u * row[ci];
                        grad_decoder[r * cols + ci] += u * feature[ci];
                    }
                    grad_decoder[r * cols + c] += u; // bias column
                }
            }
            loss_total += loss / n * inv_samples;
            let fg = backward(&g, &sample.camera, &upstream_field, field)?;
            fg.copy_flat(&mut grad_flat);
            for (acc, d) in grad_field.iter_mut().zip(&grad_flat) {
                *acc += *d;
            }
        }
        assert!(loss_total.is_finite(), "non-finite loss");
        field.copy_params(&mut params);
        state_field.step(&mut params, &grad_field)?;
        field.set_params(&params)?;
        state_decoder.step(&mut decoder.weights, &grad_decoder)?;
        assert!(decoder.weights.iter().all(|w| w.is_finite()), "non-finite decoder weight");
        trace.push(loss_total.widen());
    }
    Ok(trace)
}

// ---------------------------------------------------------------------------
// Manifest-driven experiments
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: DEFAULT_LR,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl OptimizerConfig {
    fn state(&self, len: usize) -> OptimState<f64> {
        OptimState::with_hyper(len, self.lr, self.beta1, self.beta2, self.epsilon)
    }
}

/// Everything needed to reproduce a fitting experiment. The planted target
/// field is derived from `seed_target`, the trainable one from `seed_init`;
/// relative output paths resolve against the process working directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentManifest {
    /// `"demo-head"`, `"quad-sheet"`, or a path to a GSRF surface file.
    pub surface: String,
    pub uv_resolution: usize,
    pub channels: usize,
    pub seed_target: u64,
    pub seed_init: u64,
    pub seed_decoder: u64,
    /// Raw feature amplitude of the planted field.
    pub planted_feature_amp: f64,
    pub iters: usize,
    pub image_size: usize,
    pub views: Vec<ViewSpec>,
    pub beta: Vec<f64>,
    /// Sample `k` is deformed with `psi_cycle[k % len]`.
    pub psi_cycle: Vec<Vec<f64>>,
    pub optimizer: OptimizerConfig,
    /// Learning rate for the proxy decoder (the field uses `optimizer.lr`).
    pub decoder_lr: f64,
    pub loss_trace: String,
    pub checkpoint: String,
}

impl ExperimentManifest {
    /// Desk-scale defaults for the direct (planted-field recovery) run.
    pub fn desk_direct() -> Self {
        ExperimentManifest {
            surface: "demo-head".to_string(),
            uv_resolution: 16,
            channels: 4,
            seed_target: 7,
            seed_init: 42,
            seed_decoder: 99,
            planted_feature_amp: 2.5,
            iters: 1500,
            image_size: 48,
            views: sample_view_specs(8, DEFAULT_YAW_RANGE, DEFAULT_PITCH_RANGE, 3.0, 3).unwrap(),
            beta: vec![0.0; 4],
            psi_cycle: vec![vec![0.0; 4]],
            optimizer: OptimizerConfig::default(),
            decoder_lr: 5e-3,
            loss_trace: "loss_direct.csv".to_string(),
            checkpoint: "field_direct.gsfd".to_string(),
        }
    }

    /// Desk-scale defaults for the proxy (indirect supervision) run. Two
    /// expressions alternate through the sample list.
    pub fn desk_proxy() -> Self {
        ExperimentManifest {
            iters: 2000,
            psi_cycle: vec![vec![0.0; 4], vec![0.7, 0.0, 0.4, 0.0]],
            loss_trace: "loss_proxy.csv".to_string(),
            checkpoint: "field_proxy.gsfd".to_string(),
            ..Self::desk_direct()
        }
    }

    fn load_surface(&self) -> Result<SurfaceModel<f64>> {
        match self.surface.as_str() {
            "demo-head" => Ok(demo::demo_head()),
            "quad-sheet" => Ok(demo::quad_sheet(1.2, 0.0)),
            path => formats::read_surface(Path::new(path)),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: String,
    pub iters: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_ratio: f64,
    pub variance_initial: Option<f64>,
    pub variance_final: Option<f64>,
    pub variance_ratio: Option<f64>,
    /// Max abs difference between rendered maps of the first two expressions
    /// in the cycle (shared field, same camera), when the cycle has two.
    pub expression_map_diff: Option<f64>,
    pub pass: bool,
}

/// Mean over channels of the per-channel pixel variance.
pub fn mean_channel_variance<S: Scalar>(map: &FeatureMap<S>) -> f64 {
    let npix = (map.width * map.height) as f64;
    let mut total = 0.0;
    for c in 0..map.channels {
        let mut mean = 0.0;
        for p in 0..map.width * map.height {
            mean += map.values[p * map.channels + c].widen();
        }
        mean /= npix;
        let mut var = 0.0;
        for p in 0..map.width * map.height {
            let d = map.values[p * map.channels + c].widen() - mean;
            var += d * d;
        }
        total += var / npix;
    }
    total / map.channels as f64
}

struct ExperimentScene {
    model: SurfaceModel<f64>,
    mapping: crate::surface::UvMapping<f64>,
    meshes: Vec<DeformedMesh<f64>>,
    cameras: Vec<Camera<f64>>,
    planted: GaussianFieldUv<f64>,
    init: GaussianFieldUv<f64>,
}

fn build_scene(m: &ExperimentManifest) -> Result<ExperimentScene> {
    let model = m.load_surface()?;
    let mapping = crate::surface::build_uv_mapping(&model, m.uv_resolution);
    let s0 = default_initial_scale(&model);
    let mut planted = init_field(m.uv_resolution, m.channels, m.seed_target, s0)?;
    // Plant strong features only; opacity and scale stay at their init
    // constants so the recovery target differs from the re-init in the
    // feature tensor alone.
    demo::randomize_field(&mut planted, m.seed_target, m.planted_feature_amp, 0.0, 0.0);
    let init = init_field(m.uv_resolution, m.channels, m.seed_init, s0)?;
    let mut meshes = Vec::with_capacity(m.views.len());
    let mut cameras = Vec::with_capacity(m.views.len());
    for (k, view) in m.views.iter().enumerate() {
        let psi = &m.psi_cycle[k % m.psi_cycle.len()];
        meshes.push(deform(&model, &m.beta, psi, &RigidPose::identity())?);
        cameras.push(view.camera(m.image_size, m.image_size));
    }
    Ok(ExperimentScene { model, mapping, meshes, cameras, planted, init })
}

/// Write a loss trace as `iter,loss` CSV.
pub fn write_loss_trace(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let mut out = String::from("iter,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l:e}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Planted-field recovery: render targets from a hidden field, re-init with
/// a different seed, fit directly, and require a 100x loss reduction.
pub fn run_direct_experiment(
    m: &ExperimentManifest,
) -> Result<(ExperimentReport, Vec<f64>, GaussianFieldUv<f64>)> {
    let scene = build_scene(m)?;
    let samples: Vec<FitSample<f64>> = scene
        .meshes
        .iter()
        .zip(&scene.cameras)
        .map(|(mesh, cam)| -> Result<FitSample<f64>> {
            let g = embed(&scene.planted, mesh, &scene.mapping)?;
            Ok(FitSample {
                camera: *cam,
                mesh: mesh.clone(),
                target: render_tiled(&g, cam, DEFAULT_TILE_SIZE),
            })
        })
        .collect::<Result<_>>()?;
    let mut field = scene.init.clone();
    let mut state = m.optimizer.state(field.param_count());
    let trace = fit_direct(&mut field, &scene.mapping, &samples, m.iters, &mut state)?;
    let initial = trace[0];
    let final_loss = *trace.last().unwrap();
    let ratio = if final_loss > 0.0 { initial / final_loss } else { f64::INFINITY };
    write_loss_trace(&m.loss_trace, &trace)?;
    formats::write_field(&field, &m.checkpoint)?;
    let report = ExperimentReport {
        mode: "direct".to_string(),
        iters: m.iters,
        initial_loss: initial,
        final_loss,
        loss_ratio: ratio,
        variance_initial: None,
        variance_final: None,
        variance_ratio: None,
        expression_map_diff: None,
        pass: ratio >= 100.0,
    };
    Ok((report, trace, field))
}

/// Indirect supervision: RGB targets are a fixed linear map of the planted
/// field's render; the trainable field only ever receives gradients through
/// the jointly learned decoder. Requires a 100x RGB loss reduction and a 10x
/// growth in rendered-map channel variance.
pub fn run_proxy_experiment(
    m: &ExperimentManifest,
) -> Result<(ExperimentReport, Vec<f64>, GaussianFieldUv<f64>)> {
    let scene = build_scene(m)?;
    let true_decoder = ProxyDecoder::<f64>::init(m.channels, m.seed_target ^ 0x00de_c0de, 1.0);
    let samples: Vec<FitSample<f64>> = scene
        .meshes
        .iter()
        .zip(&scene.cameras)
        .map(|(mesh, cam)| -> Result<FitSample<f64>> {
            let g = embed(&scene.planted, mesh, &scene.mapping)?;
            let map = render_tiled(&g, cam, DEFAULT_TILE_SIZE);
            Ok(FitSample {
                camera: *cam,
                mesh: mesh.clone(),
                target: true_decoder.decode(&map),
            })
        })
        .collect::<Result<_>>()?;

    let variance_of = |field: &GaussianFieldUv<f64>| -> Result<f64> {
        let mut total = 0.0;
        for (mesh, cam) in scene.meshes.iter().zip(&scene.cameras) {
            let g = embed(field, mesh, &scene.mapping)?;
            total += mean_channel_variance(&render_tiled(&g, cam, DEFAULT_TILE_SIZE));
        }
        Ok(total / scene.meshes.len() as f64)
    };

    let mut field = scene.init.clone();
    let var_initial = variance_of(&field)?;
    let mut decoder = ProxyDecoder::<f64>::init(m.channels, m.seed_decoder, 0.1);
    let mut state_field = m.optimizer.state(field.param_count());
    let mut state_decoder = OptimState::with_hyper(
        decoder.weights.len(),
        m.decoder_lr,
        m.optimizer.beta1,
        m.optimizer.beta2,
        m.optimizer.epsilon,
    );
    let trace = fit_proxy(
        &mut field,
        &mut decoder,
        &scene.mapping,
        &samples,
        m.iters,
        &mut state_field,
        &mut state_decoder,
    )?;
    let var_final = variance_of(&field)?;
    let initial = trace[0];
    let final_loss = *trace.last().unwrap();
    let ratio = if final_loss > 0.0 { initial / final_loss } else { f64::INFINITY };
    let var_ratio = if var_initial > 0.0 { var_final / var_initial } else { f64::INFINITY };

    // Expression separation: same field and camera, different psi.
    let expression_map_diff = if m.psi_cycle.len() >= 2 {
        let cam = &scene.cameras[0];
        let mesh_a = deform(&scene.model, &m.beta, &m.psi_cycle[0], &RigidPose::identity())?;
        let mesh_b = deform(&scene.model, &m.beta, &m.psi_cycle[1], &RigidPose::identity())?;
        let map_a = render_tiled(&embed(&field, &mesh_a, &scene.mapping)?, cam, DEFAULT_TILE_SIZE);
        let map_b = render_tiled(&embed(&field, &mesh_b, &scene.mapping)?, cam, DEFAULT_TILE_SIZE);
        Some(map_a.max_abs_diff(&map_b))
    } else {
        None
    };

    write_loss_trace(&m.loss_trace, &trace)?;
    formats::write_field(&field, &m.checkpoint)?;
    let report = ExperimentReport {
        mode: "proxy".to_string(),
        iters: m.iters,
        initial_loss: initial,
        final_loss,
        loss_ratio: ratio,
        variance_initial: Some(var_initial),
        variance_final: Some(var_final),
        variance_ratio: Some(var_ratio),
        expression_map_diff,
        pass: ratio >= 100.0 && var_ratio >= 10.0,
    };
    Ok((report, trace, field))
}
