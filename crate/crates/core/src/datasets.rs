//! Synthetic surface/bed series, training patches, RMSE and file I/O.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;

/// Depth plane holding the water surface.
pub const SURFACE_PLANE: usize = 0;
/// Depth plane holding the bed.
pub const BED_PLANE: usize = 1;

pub const FIELD_MAGIC: &[u8; 8] = b"CSCDMD01";
const MANIFEST: &str = "manifest.json";

/// Parameters of the synthetic dune-field generator.
///
/// `bed_k(r, c) = bed_level + sum_i a_i sin(2 pi (c - c_i k) / l_i) w(r) + noise`
/// with the raised-cosine cross-channel window `w`, and
/// `surface_k = attenuation * smooth(bed_k - bed_level) + surface_level`
/// with circular Gaussian smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticRiverParams {
    /// `[rows, cols]`.
    pub grid: [usize; 2],
    pub n_frames: usize,
    pub dt: f64,
    pub wavelengths: Vec<f64>,
    /// Columns per frame.
    pub celerities: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Gaussian smoothing width, in cells.
    pub smoothing: f64,
    pub attenuation: f64,
    pub bed_level: f64,
    pub surface_level: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticRiverParams {
    fn default() -> Self {
        SyntheticRiverParams {
            grid: [32, 128],
            n_frames: 35,
            dt: 10.0,
            wavelengths: vec![64.0, 32.0, 128.0 / 3.0],
            celerities: vec![4.0, 2.5, -3.0],
            amplitudes: vec![0.12, 0.06, 0.04],
            smoothing: 2.0,
            attenuation: 0.6,
            bed_level: 0.4,
            surface_level: 0.7,
            noise_sigma: 0.005,
            seed: 7,
        }
    }
}

impl SyntheticRiverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.grid.contains(&0) {
            return bad(format!("grid {:?} must be nonempty", self.grid));
        }
        let n = self.wavelengths.len();
        if self.celerities.len() != n || self.amplitudes.len() != n {
            return bad("wavelengths, celerities and amplitudes must have equal length".into());
        }
        if self.wavelengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("wavelengths must be > 0".into());
        }
        if self.amplitudes.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return bad("amplitudes must be >= 0".into());
        }
        if self.celerities.iter().any(|c| !c.is_finite()) {
            return bad("celerities must be finite".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt {} must be > 0", self.dt));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return bad(format!("smoothing {} must be >= 0", self.smoothing));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if ![self.attenuation, self.bed_level, self.surface_level]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("levels and attenuation must be finite".into());
        }
        Ok(())
    }

    /// Checks that the grid tiles into `[M_y, M_x]` blocks.
    pub fn check_decimation(&self, decimation: [usize; 3]) -> Result<()> {
        if !self.grid[0].is_multiple_of(decimation[0]) || !self.grid[1].is_multiple_of(decimation[1]) || 2 % decimation[2] != 0 {
            return Err(Error::InvalidParameter(format!(
                "grid {:?}x2 is not divisible by decimation {:?}",
                self.grid, decimation
            )));
        }
        Ok(())
    }
}

/// Frames of shape `[rows, cols, 2]` sampled every `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub dt: f64,
    pub frames: Vec<Field>,
}

impl SnapshotSeries {
    pub fn new(dt: f64, frames: Vec<Field>) -> Result<Self> {
        if let Some(first) = frames.first() {
            if let Some(bad) = frames.iter().find(|f| f.shape() != first.shape()) {
                return Err(Error::shape(first.shape(), bad.shape()));
            }
        }
        Ok(SnapshotSeries { dt, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn shape(&self) -> Option<[usize; 3]> {
        self.frames.first().map(Field::shape)
    }

    /// `(frames[..n], frames[n..])`.
    pub fn split_at(&self, n: usize) -> Result<(SnapshotSeries, SnapshotSeries)> {
        if n > self.len() {
            return Err(Error::InvalidParameter(format!(
                "split at {n} exceeds {} frames",
                self.len()
            )));
        }
        Ok((
            SnapshotSeries { dt: self.dt, frames: self.frames[..n].to_vec() },
            SnapshotSeries { dt: self.dt, frames: self.frames[n..].to_vec() },
        ))
    }
}

fn cross_window(row: usize, rows: usize) -> f64 {
    let t = (row as f64 + 0.5) / rows as f64;
    0.5 - 0.5 * (2.0 * std::f64::consts::PI * t).cos()
}

fn gaussian_kernel(width: f64) -> Vec<f64> {
    if width == 0.0 {
        return vec![1.0];
    }
    let half = (4.0 * width).ceil() as i64;
    let k: Vec<f64> = (-half..=half)
        .map(|i| (-0.5 * (i as f64 / width).powi(2)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable circular Gaussian smoothing of a `rows x cols` plane.
fn smooth_circular(plane: &[f64], rows: usize, cols: usize, width: f64) -> Vec<f64> {
    let k = gaussian_kernel(width);
    let half = (k.len() / 2) as i64;
    let wrap = |i: i64, n: usize| i.rem_euclid(n as i64) as usize;
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            tmp[r * cols + c] = k
                .iter()
                .enumerate()
                .map(|(j, w)| w * plane[r * cols + wrap(c as i64 + j as i64 - half, cols)])
                .sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = k
                .iter()
                .enumerate()
                .map(|(j, w)| w * tmp[wrap(r as i64 + j as i64 - half, rows) * cols + c])
                .sum();
        }
    }
    out
}

/// Generates the coupled surface/bed series; deterministic given the seed.
pub fn generate_synthetic(params: &SyntheticRiverParams) -> Result<SnapshotSeries> {
    params.validate()?;
    let [rows, cols] = params.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let tau = 2.0 * std::f64::consts::PI;

    let frames = (0..params.n_frames)
        .map(|k| {
            let mut relief = vec![0.0; rows * cols];
            for r in 0..rows {
                let w = cross_window(r, rows);
                for c in 0..cols {
                    let mut v = 0.0;
                    for ((a, l), cel) in params
                        .amplitudes
                        .iter()
                        .zip(&params.wavelengths)
                        .zip(&params.celerities)
                    {
                        v += a * (tau * (c as f64 - cel * k as f64) / l).sin();
                    }
                    relief[r * cols + c] = v * w;
                }
            }
            if params.noise_sigma > 0.0 {
                for v in &mut relief {
                    *v += noise.sample(&mut rng);
                }
            }
            let smooth = smooth_circular(&relief, rows, cols, params.smoothing);
            let mut data = Vec::with_capacity(rows * cols * 2);
            for (b, s) in relief.iter().zip(&smooth) {
                data.push(params.attenuation * s + params.surface_level);
                data.push(b + params.bed_level);
            }
            Field::from_vec([rows, cols, 2], data)
        })
        .collect::<Result<Vec<_>>>()?;
    SnapshotSeries::new(params.dt, frames)
}

/// Draws `count` patches uniformly over frames and in-bounds positions.
pub fn sample_patches(
    series: &SnapshotSeries,
    count: usize,
    patch_dims: [usize; 3],
    seed: u64,
) -> Result<Vec<Field>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let shape = series
        .shape()
        .ok_or(Error::NotEnoughData("no frames to sample patches from"))?;
    if (0..3).any(|i| patch_dims[i] == 0 || patch_dims[i] > shape[i]) {
        return Err(Error::InvalidParameter(format!(
            "patch {patch_dims:?} does not fit in frame {shape:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [h, w, d] = patch_dims;
    Ok((0..count)
        .map(|_| {
            let f = &series.frames[rng.random_range(0..series.len())];
            let r0 = rng.random_range(0..=shape[0] - h);
            let c0 = rng.random_range(0..=shape[1] - w);
            let z0 = rng.random_range(0..=shape[2] - d);
            Field::from_fn(patch_dims, |r, c, z| f.get(r0 + r, c0 + c, z0 + z))
        })
        .collect())
}

/// `sqrt(mean((a - b)^2))`.
pub fn rmse(a: &Field, b: &Field) -> Result<f64> {
    b.check_shape(a.shape())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Serializes a field: magic, `u64` rank, `u64` dims, then `f64` payload,
/// all little-endian.
pub fn encode_field(f: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * 4 + 8 * f.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&3u64.to_le_bytes());
    for d in f.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in f.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u64(bytes: &[u8], at: usize) -> Result<u64> {
    let chunk = bytes.get(at..at + 8).ok_or(Error::TruncatedPayload {
        expected: (at + 8) as u64,
        found: bytes.len() as u64,
    })?;
    Ok(u64::from_le_bytes(chunk.try_into().expect("8 bytes")))
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < 8 || &bytes[..8] != FIELD_MAGIC {
        return Err(Error::BadMagic);
    }
    let rank = read_u64(bytes, 8)?;
    if rank != 3 {
        return Err(Error::UnsupportedRank(rank));
    }
    let mut shape = [0usize; 3];
    let mut count: u64 = 1;
    for (i, s) in shape.iter_mut().enumerate() {
        let d = read_u64(bytes, 16 + 8 * i)?;
        count = count.checked_mul(d).ok_or(Error::DimOverflow)?;
        *s = usize::try_from(d).map_err(|_| Error::DimOverflow)?;
    }
    let header = 16 + 8 * 3;
    let expected = count
        .checked_mul(8)
        .and_then(|n| n.checked_add(header as u64))
        .ok_or(Error::DimOverflow)?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingBytes(found - expected));
    }
    let data = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Field::from_vec(shape, data)
}

/// Writes a finite field to `path`.
pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    if !f.is_finite() {
        return Err(Error::NonFinite("field to write"));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_field(f)).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<Field> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    dt: f64,
    n_frames: usize,
    shape: [usize; 3],
    files: Vec<String>,
}

pub fn frame_file_name(k: usize) -> String {
    format!("frame_{k:04}.fld")
}

/// Writes `manifest.json` and one field file per frame into `dir`.
pub fn write_series(dir: &Path, series: &SnapshotSeries) -> Result<()> {
    let shape = series
        .shape()
        .ok_or(Error::NotEnoughData("cannot write an empty series"))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files: Vec<String> = (0..series.len()).map(frame_file_name).collect();
    for (f, name) in series.frames.iter().zip(&files) {
        write_field(&dir.join(name), f)?;
    }
    let manifest = Manifest {
        dt: series.dt,
        n_frames: series.len(),
        shape,
        files,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn read_series(dir: &Path) -> Result<SnapshotSeries> {
    let path: PathBuf = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.files.len() != manifest.n_frames {
        return Err(Error::InvalidParameter(format!(
            "{}: lists {} files for {} frames",
            path.display(),
            manifest.files.len(),
            manifest.n_frames
        )));
    }
    let frames = manifest
        .files
        .iter()
        .map(|name| {
            let f = read_field(&dir.join(name))?;
            f.check_shape(manifest.shape)?;
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    SnapshotSeries::new(manifest.dt, frames)
}

/// Derives an independent seed from a base seed, a component label and an
/// index (FNV-1a over the inputs, finished with a SplitMix64 mix).
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = seed
        .to_le_bytes()
        .into_iter()
        .chain(label.bytes())
        .chain(index.to_le_bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}
