//! Versioned binary containers and image export.
//!
//! Every container starts with an 8-byte magic, a little-endian `u32` header
//! length, and a JSON header, followed by packed little-endian payload
//! blocks. Readers validate magic, header, and byte counts and return typed
//! errors; they never panic on malformed input.
//!
//! - `GSRF0001` surface: f64 blocks `template_vertices [V x 3]`,
//!   `shape_basis [V x 3 x n_shape]`, `expr_basis [V x 3 x n_expr]`,
//!   `uv_coords [F x 3 x 2]`, then u32 `faces [F x 3]`; the header records
//!   absolute byte offsets per block.
//! - `GSFD0001` field: f64 blocks `raw_feature`, `raw_opacity`, `raw_scale`.
//! - `GSFM0001` feature map: f32 channel-major planes (C planes of H x W),
//!   then the alpha plane.
//! - `GSUV0001` uv mapping cache: per texel an i32 face id (-1 = unmapped)
//!   plus three f64 barycentrics.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GaussianFieldUv;
use crate::linalg::{Vec2, Vec3};
use crate::scalar::Scalar;
use crate::splat::FeatureMap;
use crate::surface::{BlendBasis, SurfaceModel, TexelEntry, UvMapping};

pub const SURFACE_MAGIC: &[u8; 8] = b"GSRF0001";
pub const FIELD_MAGIC: &[u8; 8] = b"GSFD0001";
pub const FEATURE_MAP_MAGIC: &[u8; 8] = b"GSFM0001";
pub const UV_MAPPING_MAGIC: &[u8; 8] = b"GSUV0001";

/// Cap on the JSON header length; anything larger is a corrupt prefix.
const MAX_HEADER_LEN: u32 = 16 * 1024 * 1024;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path: path.to_path_buf(), source }
        } else {
            Error::Io(source)
        }
    })
}

/// Split a container into (header JSON bytes, payload offset).
fn split_container<'a>(bytes: &'a [u8], magic: &[u8; 8]) -> Result<(&'a [u8], usize)> {
    if bytes.len() < 12 {
        return Err(Error::HeaderMismatch {
            reason: format!("file has {} bytes, shorter than any container prefix", bytes.len()),
        });
    }
    if &bytes[..8] != magic {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&bytes[..8]).into_owned(),
        });
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if len > MAX_HEADER_LEN {
        return Err(Error::HeaderMismatch {
            reason: format!("header length {len} exceeds the {MAX_HEADER_LEN} byte cap"),
        });
    }
    let end = 12usize
        .checked_add(len as usize)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::HeaderMismatch {
            reason: format!(
                "header claims {len} bytes but only {} remain after the prefix",
                bytes.len().saturating_sub(12)
            ),
        })?;
    Ok((&bytes[12..end], end))
}

fn parse_header<T: serde::de::DeserializeOwned>(header: &[u8]) -> Result<T> {
    serde_json::from_slice(header).map_err(|e| Error::HeaderMismatch {
        reason: format!("header is not valid JSON for this container: {e}"),
    })
}

fn write_container(path: &Path, magic: &[u8; 8], header: &impl Serialize, payload: &[u8]) -> Result<()> {
    let header_bytes = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(12 + header_bytes.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(payload);
    fs::write(path, out)?;
    Ok(())
}

fn expect_len(context: &str, got: usize, expected: u64) -> Result<()> {
    if got as u64 != expected {
        return Err(Error::HeaderMismatch {
            reason: format!("{context}: expected {expected} payload bytes, found {got}"),
        });
    }
    Ok(())
}

fn f64_block<S: Scalar>(bytes: &[u8]) -> Vec<S> {
    bytes
        .chunks_exact(8)
        .map(|c| S::c(f64::from_le_bytes(c.try_into().unwrap())))
        .collect()
}

fn push_f64s<S: Scalar>(out: &mut Vec<u8>, values: impl IntoIterator<Item = S>) {
    for v in values {
        out.extend_from_slice(&v.widen().to_le_bytes());
    }
}

// ---------------------------------------------------------------------------
// GSRF surface container
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SurfaceHeader {
    num_vertices: u64,
    num_faces: u64,
    n_shape: u64,
    n_expr: u64,
    offsets: SurfaceOffsets,
}

#[derive(Serialize, Deserialize)]
struct SurfaceOffsets {
    template_vertices: u64,
    shape_basis: u64,
    expr_basis: u64,
    uv_coords: u64,
    faces: u64,
}

pub fn write_surface<S: Scalar>(model: &SurfaceModel<S>, path: impl AsRef<Path>) -> Result<()> {
    let v = model.num_vertices() as u64;
    let f = model.num_faces() as u64;
    let (ns, ne) = (model.n_shape() as u64, model.n_expr() as u64);

    // Block offsets are collected relative to the payload start and patched
    // to absolute file offsets once the header length is known.
    let mut payload = Vec::new();
    let template_off = 0u64;
    push_f64s(&mut payload, model.template_vertices.iter().flat_map(|p| p.0));
    let shape_off = payload.len() as u64;
    push_f64s(&mut payload, model.shape_basis.data.iter().copied());
    let expr_off = payload.len() as u64;
    push_f64s(&mut payload, model.expr_basis.data.iter().copied());
    let uv_off = payload.len() as u64;
    push_f64s(&mut payload, model.uv_coords.iter().flatten().flat_map(|p| p.0));
    let faces_off = payload.len() as u64;
    for face in &model.faces {
        for &idx in face {
            payload.extend_from_slice(&idx.to_le_bytes());
        }
    }

    // Serialize the header twice: the absolute offsets depend on its length,
    // but the length is stable because the offset shift is the same for all.
    let mut header = SurfaceHeader {
        num_vertices: v,
        num_faces: f,
        n_shape: ns,
        n_expr: ne,
        offsets: SurfaceOffsets {
            template_vertices: template_off,
            shape_basis: shape_off,
            expr_basis: expr_off,
            uv_coords: uv_off,
            faces: faces_off,
        },
    };
    let mut header_len = serde_json::to_vec(&header)?.len() as u64;
    loop {
        let base = 12 + header_len;
        header.offsets = SurfaceOffsets {
            template_vertices: base + template_off,
            shape_basis: base + shape_off,
            expr_basis: base + expr_off,
            uv_coords: base + uv_off,
            faces: base + faces_off,
        };
        let actual = serde_json::to_vec(&header)?.len() as u64;
        if actual == header_len {
            break;
        }
        header_len = actual;
    }
    write_container(path.as_ref(), SURFACE_MAGIC, &header, &payload)
}

fn block<'a>(bytes: &'a [u8], offset: u64, size: u64, field: &str) -> Result<&'a [u8]> {
    let end = offset.checked_add(size).ok_or_else(|| Error::malformed(field, "offset overflow"))?;
    if end > bytes.len() as u64 {
        return Err(Error::HeaderMismatch {
            reason: format!(
                "{field}: expected {size} bytes at offset {offset}, file has {}",
                bytes.len()
            ),
        });
    }
    Ok(&bytes[offset as usize..end as usize])
}

pub fn read_surface<S: Scalar>(path: impl AsRef<Path>) -> Result<SurfaceModel<S>> {
    let bytes = read_bytes(path.as_ref())?;
    let (header, _) = split_container(&bytes, SURFACE_MAGIC)?;
    let header: SurfaceHeader = parse_header(header)?;
    let (v, f, ns, ne) = (header.num_vertices, header.num_faces, header.n_shape, header.n_expr);

    let mul = |a: u64, b: u64, field: &str| -> Result<u64> {
        a.checked_mul(b).ok_or_else(|| Error::malformed(field, "size overflow"))
    };
    let template_size = mul(v, 24, "template_vertices")?;
    let shape_size = mul(mul(v, 24, "shape_basis")?, ns, "shape_basis")?;
    let expr_size = mul(mul(v, 24, "expr_basis")?, ne, "expr_basis")?;
    let uv_size = mul(f, 48, "uv_coords")?;
    let faces_size = mul(f, 12, "faces")?;

    let template = f64_block::<S>(block(&bytes, header.offsets.template_vertices, template_size, "template_vertices")?);
    let shape = f64_block::<S>(block(&bytes, header.offsets.shape_basis, shape_size, "shape_basis")?);
    let expr = f64_block::<S>(block(&bytes, header.offsets.expr_basis, expr_size, "expr_basis")?);
    let uv = f64_block::<f64>(block(&bytes, header.offsets.uv_coords, uv_size, "uv_coords")?);
    let faces_bytes = block(&bytes, header.offsets.faces, faces_size, "faces")?;

    let template_vertices = template
        .chunks_exact(3)
        .map(|c| Vec3::new(c[0], c[1], c[2]))
        .collect();
    let uv_coords = uv
        .chunks_exact(6)
        .map(|c| {
            [
                Vec2::new(S::c(c[0]), S::c(c[1])),
                Vec2::new(S::c(c[2]), S::c(c[3])),
                Vec2::new(S::c(c[4]), S::c(c[5])),
            ]
        })
        .collect();
    let faces = faces_bytes
        .chunks_exact(12)
        .map(|c| {
            [
                u32::from_le_bytes(c[0..4].try_into().unwrap()),
                u32::from_le_bytes(c[4..8].try_into().unwrap()),
                u32::from_le_bytes(c[8..12].try_into().unwrap()),
            ]
        })
        .collect();

    let model = SurfaceModel {
        template_vertices,
        faces,
        shape_basis: BlendBasis {
            num_vertices: v as usize,
            num_coeffs: ns as usize,
            data: shape,
        },
        expr_basis: BlendBasis {
            num_vertices: v as usize,
            num_coeffs: ne as usize,
            data: expr,
        },
        uv_coords,
    };
    if model.template_vertices.len() != v as usize || model.faces.len() != f as usize {
        return Err(Error::malformed("counts", "header counts disagree with payload"));
    }
    model.validate()?;
    Ok(model)
}

// ---------------------------------------------------------------------------
// GSFD field checkpoint
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    resolution: u64,
    channels: u64,
}

pub fn write_field<S: Scalar>(field: &GaussianFieldUv<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::new();
    push_f64s(&mut payload, field.raw_feature.iter().copied());
    push_f64s(&mut payload, field.raw_opacity.iter().copied());
    push_f64s(&mut payload, field.raw_scale.iter().copied());
    let header = FieldHeader {
        resolution: field.resolution as u64,
        channels: field.channels as u64,
    };
    write_container(path.as_ref(), FIELD_MAGIC, &header, &payload)
}

pub fn read_field<S: Scalar>(path: impl AsRef<Path>) -> Result<GaussianFieldUv<S>> {
    let bytes = read_bytes(path.as_ref())?;
    let (header, payload_off) = split_container(&bytes, FIELD_MAGIC)?;
    let header: FieldHeader = parse_header(header)?;
    let texels = header
        .resolution
        .checked_mul(header.resolution)
        .ok_or_else(|| Error::malformed("resolution", "size overflow"))?;
    let total = texels
        .checked_mul(header.channels + 2)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::malformed("channels", "size overflow"))?;
    let payload = &bytes[payload_off..];
    expect_len("field payload", payload.len(), total)?;
    let all = f64_block::<S>(payload);
    let nf = (texels * header.channels) as usize;
    let nt = texels as usize;
    let field = GaussianFieldUv {
        resolution: header.resolution as usize,
        channels: header.channels as usize,
        raw_feature: all[..nf].to_vec(),
        raw_opacity: all[nf..nf + nt].to_vec(),
        raw_scale: all[nf + nt..].to_vec(),
    };
    if field.raw_feature.iter().any(|x| !x.is_finite())
        || field.raw_opacity.iter().any(|x| !x.is_finite())
        || field.raw_scale.iter().any(|x| !x.is_finite())
    {
        return Err(Error::malformed("field tensors", "non-finite entry"));
    }
    Ok(field)
}

// ---------------------------------------------------------------------------
// GSFM feature map
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FeatureMapHeader {
    width: u64,
    height: u64,
    channels: u64,
}

pub fn write_feature_map<S: Scalar>(map: &FeatureMap<S>, path: impl AsRef<Path>) -> Result<()> {
    let (w, h, c) = (map.width, map.height, map.channels);
    let mut payload = Vec::with_capacity((w * h * (c + 1)) * 4);
    // Channel-major planes.
    for ci in 0..c {
        for p in 0..w * h {
            payload.extend_from_slice(&(map.values[p * c + ci].widen() as f32).to_le_bytes());
        }
    }
    for a in &map.alpha {
        payload.extend_from_slice(&(a.widen() as f32).to_le_bytes());
    }
    let header = FeatureMapHeader {
        width: w as u64,
        height: h as u64,
        channels: c as u64,
    };
    write_container(path.as_ref(), FEATURE_MAP_MAGIC, &header, &payload)
}

pub fn read_feature_map<S: Scalar>(path: impl AsRef<Path>) -> Result<FeatureMap<S>> {
    let bytes = read_bytes(path.as_ref())?;
    let (header, payload_off) = split_container(&bytes, FEATURE_MAP_MAGIC)?;
    let header: FeatureMapHeader = parse_header(header)?;
    let pixels = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| Error::malformed("width*height", "size overflow"))?;
    let total = pixels
        .checked_mul(header.channels + 1)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::malformed("channels", "size overflow"))?;
    let payload = &bytes[payload_off..];
    expect_len("feature map payload", payload.len(), total)?;
    let floats: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (w, h, c) = (header.width as usize, header.height as usize, header.channels as usize);
    let mut values = vec![S::zero(); w * h * c];
    for ci in 0..c {
        for p in 0..w * h {
            values[p * c + ci] = S::c(floats[ci * w * h + p] as f64);
        }
    }
    let alpha = floats[w * h * c..].iter().map(|&a| S::c(a as f64)).collect();
    Ok(FeatureMap { width: w, height: h, channels: c, values, alpha })
}

// ---------------------------------------------------------------------------
// GSUV mapping cache
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct UvHeader {
    resolution: u64,
}

pub fn write_uv_mapping<S: Scalar>(mapping: &UvMapping<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::with_capacity(mapping.entries.len() * 28);
    for entry in &mapping.entries {
        match entry {
            TexelEntry::Mapped { face_id, barycentric } => {
                payload.extend_from_slice(&(*face_id as i32).to_le_bytes());
                for b in barycentric {
                    payload.extend_from_slice(&b.widen().to_le_bytes());
                }
            }
            TexelEntry::Unmapped => {
                payload.extend_from_slice(&(-1i32).to_le_bytes());
                payload.extend_from_slice(&[0u8; 24]);
            }
        }
    }
    let header = UvHeader { resolution: mapping.resolution as u64 };
    write_container(path.as_ref(), UV_MAPPING_MAGIC, &header, &payload)
}

pub fn read_uv_mapping<S: Scalar>(path: impl AsRef<Path>) -> Result<UvMapping<S>> {
    let bytes = read_bytes(path.as_ref())?;
    let (header, payload_off) = split_container(&bytes, UV_MAPPING_MAGIC)?;
    let header: UvHeader = parse_header(header)?;
    let texels = header
        .resolution
        .checked_mul(header.resolution)
        .ok_or_else(|| Error::malformed("resolution", "size overflow"))?;
    let total = texels
        .checked_mul(28)
        .ok_or_else(|| Error::malformed("resolution", "size overflow"))?;
    let payload = &bytes[payload_off..];
    expect_len("uv mapping payload", payload.len(), total)?;
    let entries = payload
        .chunks_exact(28)
        .map(|rec| {
            let face = i32::from_le_bytes(rec[0..4].try_into().unwrap());
            if face < 0 {
                Ok(TexelEntry::Unmapped)
            } else {
                let b: Vec<f64> = rec[4..]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                if b.iter().any(|x| !x.is_finite()) {
                    return Err(Error::malformed("barycentric", "non-finite entry"));
                }
                Ok(TexelEntry::Mapped {
                    face_id: face as u32,
                    barycentric: [S::c(b[0]), S::c(b[1]), S::c(b[2])],
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UvMapping { resolution: header.resolution as usize, entries })
}

// ---------------------------------------------------------------------------
// Channel image export
// ---------------------------------------------------------------------------

/// Export one channel as an 8-bit grayscale image:
/// `v -> round_half_away_from_zero((clamp(v, -1, 1) + 1) / 2 * 255)`.
pub fn export_channel_image<S: Scalar>(
    map: &FeatureMap<S>,
    channel: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    if channel >= map.channels {
        return Err(Error::ChannelOutOfRange { channel, channels: map.channels });
    }
    let pixels: Vec<u8> = (0..map.width * map.height)
        .map(|p| {
            let v = map.values[p * map.channels + channel].widen().clamp(-1.0, 1.0);
            ((v + 1.0) / 2.0 * 255.0).round() as u8
        })
        .collect();
    let img = image::GrayImage::from_raw(map.width as u32, map.height as u32, pixels)
        .expect("pixel buffer matches dimensions");
    img.save(path.as_ref())?;
    Ok(())
}

/// Quantize one value the way [`export_channel_image`] does.
pub fn quantize_channel_value(v: f64) -> u8 {
    ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * 255.0).round() as u8
}
