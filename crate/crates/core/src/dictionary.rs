//! Parseval-tight convolutional synthesis dictionary.
//!
//! The analysis operator `D^T` is a lattice of orthogonal factors acting on
//! the polyphase (block) representation of a field:
//!
//! 1. gather each `M_y x M_x x M_z` block into a vector of length `m`;
//! 2. apply the initial block `V0` (`P x m`, orthonormal columns);
//! 3. for each of the `N_y + N_x + N_z` overlap stages: butterfly, a one-block
//!    circular delay of the lower channel half along the stage axis,
//!    butterfly, and an orthogonal mixing block `U_s` on the lower half.
//!
//! Every factor is orthogonal or an isometry, so `D^T` is an isometry and
//! `D D^T = I` holds for any parameter values. `V0` is `diag(1, W) [C; 0]`
//! where `C` is the separable orthonormal DCT-II of the block, whose first
//! row is constant; channel 0 is therefore the only channel that sees a
//! constant input, and the overlap stages keep it that way.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adagrad::AdaGrad;
use crate::error::{Error, Result};
use crate::field::{CoeffTensor, Field};
use crate::givens::{angle_count, angle_gradient, orthogonal_matrix};

/// Index of the channel carrying the block mean.
pub const LOWPASS_CHANNEL: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryGeometry {
    /// Decimation factors `[M_y, M_x, M_z]`.
    pub decimation: [usize; 3],
    /// Number of channels `P`.
    pub channels: usize,
    /// Polyphase order `[N_y, N_x, N_z]`: overlap stages per axis.
    pub polyphase_order: [usize; 3],
    /// Shape of the synthesized field.
    pub field_shape: [usize; 3],
}

impl DictionaryGeometry {
    /// `D = I`: one channel, unit decimation, no overlap.
    pub fn identity(field_shape: [usize; 3]) -> Self {
        DictionaryGeometry {
            decimation: [1, 1, 1],
            channels: 1,
            polyphase_order: [0, 0, 0],
            field_shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.decimation.contains(&0) {
            return Err(Error::InvalidGeometry("decimation factors must be >= 1".into()));
        }
        if self.field_shape.contains(&0) {
            return Err(Error::InvalidGeometry("field dimensions must be >= 1".into()));
        }
        if self.channels < self.block_size() {
            return Err(Error::InvalidGeometry(format!(
                "{} channels < decimation product {}",
                self.channels,
                self.block_size()
            )));
        }
        for axis in 0..3 {
            if !self.field_shape[axis].is_multiple_of(self.decimation[axis]) {
                return Err(Error::InvalidGeometry(format!(
                    "field dimension {} on axis {axis} is not divisible by decimation {}",
                    self.field_shape[axis], self.decimation[axis]
                )));
            }
        }
        Ok(())
    }

    /// `m = M_y M_x M_z`.
    pub fn block_size(&self) -> usize {
        self.decimation.iter().product()
    }

    pub fn grid(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.field_shape[a] / self.decimation[a])
    }

    pub fn blocks(&self) -> usize {
        self.grid().iter().product()
    }

    /// Length `L` of the feature vector.
    pub fn coeff_len(&self) -> usize {
        self.channels * self.blocks()
    }

    pub fn field_len(&self) -> usize {
        self.field_shape.iter().product()
    }

    /// Kernel support `(N + 1) M` per axis.
    pub fn kernel_extent(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| (self.polyphase_order[a] + 1) * self.decimation[a])
    }

    pub fn half(&self) -> usize {
        self.channels / 2
    }

    pub fn stage_axes(&self) -> Vec<usize> {
        (0..3)
            .flat_map(|a| std::iter::repeat_n(a, self.polyphase_order[a]))
            .collect()
    }

    pub fn initial_angle_count(&self) -> usize {
        angle_count(self.channels - 1)
    }

    pub fn stage_angle_count(&self) -> usize {
        angle_count(self.half())
    }

    /// Total number of lattice angles.
    pub fn angle_count(&self) -> usize {
        self.initial_angle_count() + self.stage_axes().len() * self.stage_angle_count()
    }

    pub fn with_field_shape(&self, field_shape: [usize; 3]) -> Self {
        DictionaryGeometry {
            field_shape,
            ..*self
        }
    }
}

/// How to initialize the lattice angles.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionaryInit {
    /// All angles zero: an order-0 lattice is then the plain block DCT.
    Identity,
    /// Angles drawn uniformly from `[-scale, scale]`.
    Random { seed: u64, scale: f64 },
    Angles(Vec<f64>),
}

/// Serializable form: geometry plus the angle list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryParams {
    pub geometry: DictionaryGeometry,
    pub angles: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Stage {
    axis: usize,
    /// `h x h`, row-major.
    mixing: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvDictionary {
    geometry: DictionaryGeometry,
    angles: Vec<f64>,
    /// Separable DCT-II of one block, `m x m`.
    dct: DMatrix<f64>,
    /// `V0`, `P x m`, row-major.
    initial: Vec<f64>,
    stages: Vec<Stage>,
    /// `block_index[b * m + j]`: field offset of polyphase component `j` of
    /// block `b`.
    block_index: Vec<usize>,
    lattice_exact: bool,
}

/// Gradient of `1/2 sum ||x_k - D y_k||^2` with respect to the lattice angles.
#[derive(Debug, Clone)]
pub struct DictionaryGradient {
    pub objective: f64,
    pub angles: Vec<f64>,
}

fn dct_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |k, i| {
        let alpha = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        alpha * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
    })
}

fn block_dct(decimation: [usize; 3]) -> DMatrix<f64> {
    let [cy, cx, cz] = decimation.map(dct_matrix);
    cy.kronecker(&cx).kronecker(&cz)
}

fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

impl ConvDictionary {
    pub fn new(geometry: DictionaryGeometry, init: DictionaryInit) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.angle_count();
        let angles = match init {
            DictionaryInit::Identity => vec![0.0; n],
            DictionaryInit::Random { seed, scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
            }
            DictionaryInit::Angles(a) => {
                if a.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "expected {n} lattice angles, got {}",
                        a.len()
                    )));
                }
                a
            }
        };
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("lattice angles"));
        }

        let [gy, gx, gz] = geometry.grid();
        let [my, mx, mz] = geometry.decimation;
        let [_, cols, depth] = geometry.field_shape;
        let mut block_index = Vec::with_capacity(geometry.field_len());
        for by in 0..gy {
            for bx in 0..gx {
                for bz in 0..gz {
                    for dy in 0..my {
                        for dx in 0..mx {
                            for dz in 0..mz {
                                let (r, c, z) = (by * my + dy, bx * mx + dx, bz * mz + dz);
                                block_index.push((r * cols + c) * depth + z);
                            }
                        }
                    }
                }
            }
        }

        let mut dict = ConvDictionary {
            geometry,
            angles,
            dct: block_dct(geometry.decimation),
            initial: Vec::new(),
            stages: Vec::new(),
            block_index,
            lattice_exact: true,
        };
        dict.realize();
        Ok(dict)
    }

    pub fn identity(field_shape: [usize; 3]) -> Result<Self> {
        Self::new(DictionaryGeometry::identity(field_shape), DictionaryInit::Identity)
    }

    pub fn from_params(params: &DictionaryParams) -> Result<Self> {
        Self::new(params.geometry, DictionaryInit::Angles(params.angles.clone()))
    }

    pub fn params(&self) -> DictionaryParams {
        DictionaryParams {
            geometry: self.geometry,
            angles: self.angles.clone(),
        }
    }

    /// Same lattice applied to fields of another shape.
    pub fn with_field_shape(&self, field_shape: [usize; 3]) -> Result<Self> {
        Self::new(
            self.geometry.with_field_shape(field_shape),
            DictionaryInit::Angles(self.angles.clone()),
        )
    }

    pub fn geometry(&self) -> &DictionaryGeometry {
        &self.geometry
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// True when the realized operator comes straight from the lattice
    /// angles, in which case `D D^T = I` holds by construction.
    pub fn is_lattice_exact(&self) -> bool {
        self.lattice_exact
    }

    pub fn coeff_len(&self) -> usize {
        self.geometry.coeff_len()
    }

    pub fn field_shape(&self) -> [usize; 3] {
        self.geometry.field_shape
    }

    pub fn zero_coeffs(&self) -> CoeffTensor {
        CoeffTensor::zeros(self.geometry.channels, self.geometry.grid())
    }

    fn realize(&mut self) {
        let g = &self.geometry;
        let (p, m, h) = (g.channels, g.block_size(), g.half());
        let n0 = g.initial_angle_count();
        let w = orthogonal_matrix(p - 1, &self.angles[..n0]);
        let mut v0 = DMatrix::zeros(p, m);
        v0.row_mut(0).copy_from(&self.dct.row(0));
        // rows 1.. = W[:, 0..m-1] * C[1..m, :]
        if p > 1 && m > 1 {
            let prod = w.columns(0, m - 1) * self.dct.rows(1, m - 1);
            v0.rows_mut(1, p - 1).copy_from(&prod);
        }
        self.initial = to_row_major(&v0);

        let ns = g.stage_angle_count();
        self.stages = g
            .stage_axes()
            .into_iter()
            .enumerate()
            .map(|(s, axis)| {
                let a = &self.angles[n0 + s * ns..n0 + (s + 1) * ns];
                Stage {
                    axis,
                    mixing: to_row_major(&orthogonal_matrix(h, a)),
                }
            })
            .collect();
    }

    /// The initial block `V0` as a `P x m` matrix.
    pub fn initial_block(&self) -> DMatrix<f64> {
        let g = &self.geometry;
        DMatrix::from_row_slice(g.channels, g.block_size(), &self.initial)
    }

    /// Copy whose realized initial block carries additive uniform noise of the
    /// given magnitude, breaking tightness. Used as a negative control.
    pub fn perturbed(&self, magnitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for v in &mut out.initial {
            *v += rng.random_range(-magnitude..=magnitude);
        }
        out.lattice_exact = false;
        out
    }

    fn butterfly(&self, y: &mut [f64]) {
        let h = self.geometry.half();
        let nb = self.geometry.blocks();
        let (upper, rest) = y.split_at_mut(h * nb);
        let lower = &mut rest[..h * nb];
        for (a, b) in upper.iter_mut().zip(lower.iter_mut()) {
            let (u, l) = (*a, *b);
            *a = (u + l) * std::f64::consts::FRAC_1_SQRT_2;
            *b = (u - l) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }

    /// Circular one-block shift of the lower half along `axis`:
    /// `out[b] = in[b - e_axis]` when `forward`, `out[b] = in[b + e_axis]`
    /// otherwise.
    fn delay(&self, y: &mut [f64], axis: usize, forward: bool, scratch: &mut Vec<f64>) {
        let h = self.geometry.half();
        let nb = self.geometry.blocks();
        let grid = self.geometry.grid();
        let n = grid[axis];
        if n == 1 || h == 0 {
            return;
        }
        let stride = match axis {
            0 => grid[1] * grid[2],
            1 => grid[2],
            _ => 1,
        };
        let shift = if forward { 1 } else { n - 1 };
        for ch in h..2 * h {
            let chan = &mut y[ch * nb..(ch + 1) * nb];
            scratch.clear();
            scratch.extend_from_slice(chan);
            for (b, out) in chan.iter_mut().enumerate() {
                let coord = (b / stride) % n;
                let src_coord = (coord + n - shift) % n;
                let src = b - coord * stride + src_coord * stride;
                *out = scratch[src];
            }
        }
    }

    /// `lower <- U lower` (or `U^T lower` when `transpose`) at every block.
    fn mix_lower(&self, y: &mut [f64], mixing: &[f64], transpose: bool, scratch: &mut Vec<f64>) {
        let h = self.geometry.half();
        let nb = self.geometry.blocks();
        if h == 0 {
            return;
        }
        let lower = &mut y[h * nb..2 * h * nb];
        scratch.clear();
        scratch.extend_from_slice(lower);
        lower.fill(0.0);
        for i in 0..h {
            let out = &mut lower[i * nb..(i + 1) * nb];
            for j in 0..h {
                let u = if transpose { mixing[j * h + i] } else { mixing[i * h + j] };
                if u == 0.0 {
                    continue;
                }
                let src = &scratch[j * nb..(j + 1) * nb];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += u * s;
                }
            }
        }
    }

    fn analyze_slice(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.geometry;
        let (p, m, nb) = (g.channels, g.block_size(), g.blocks());
        let mut y = vec![0.0; p * nb];
        let mut xb = vec![0.0; m];
        for b in 0..nb {
            for (j, v) in xb.iter_mut().enumerate() {
                *v = x[self.block_index[b * m + j]];
            }
            for ch in 0..p {
                let row = &self.initial[ch * m..(ch + 1) * m];
                y[ch * nb + b] = row.iter().zip(&xb).map(|(a, c)| a * c).sum();
            }
        }
        let mut scratch = Vec::new();
        for stage in &self.stages {
            self.butterfly(&mut y);
            self.delay(&mut y, stage.axis, true, &mut scratch);
            self.butterfly(&mut y);
            self.mix_lower(&mut y, &stage.mixing, false, &mut scratch);
        }
        y
    }

    /// Runs the synthesis lattice up to (not including) `V0^T`; optionally
    /// records the lower-half input of every mixing block, indexed by stage.
    fn synthesis_stages(&self, y: &[f64], record: Option<&mut Vec<Vec<f64>>>) -> Vec<f64> {
        let g = &self.geometry;
        let (h, nb) = (g.half(), g.blocks());
        let mut z = y.to_vec();
        let mut scratch = Vec::new();
        let mut recorded = vec![Vec::new(); self.stages.len()];
        for (s, stage) in self.stages.iter().enumerate().rev() {
            if record.is_some() {
                recorded[s] = z[h * nb..2 * h * nb].to_vec();
            }
            self.mix_lower(&mut z, &stage.mixing, true, &mut scratch);
            self.butterfly(&mut z);
            self.delay(&mut z, stage.axis, false, &mut scratch);
            self.butterfly(&mut z);
        }
        if let Some(out) = record {
            *out = recorded;
        }
        z
    }

    fn initial_transpose(&self, z: &[f64]) -> Vec<f64> {
        let g = &self.geometry;
        let (p, m, nb) = (g.channels, g.block_size(), g.blocks());
        let mut x = vec![0.0; g.field_len()];
        let mut xb = vec![0.0; m];
        for b in 0..nb {
            xb.fill(0.0);
            for ch in 0..p {
                let c = z[ch * nb + b];
                if c == 0.0 {
                    continue;
                }
                let row = &self.initial[ch * m..(ch + 1) * m];
                for (v, r) in xb.iter_mut().zip(row) {
                    *v += c * r;
                }
            }
            for (j, v) in xb.iter().enumerate() {
                x[self.block_index[b * m + j]] = *v;
            }
        }
        x
    }

    pub(crate) fn synthesize_slice(&self, y: &[f64]) -> Vec<f64> {
        let z = self.synthesis_stages(y, None);
        self.initial_transpose(&z)
    }

    pub(crate) fn analyze_vec(&self, x: &[f64]) -> Vec<f64> {
        self.analyze_slice(x)
    }

    /// `x = D y`.
    pub fn synthesize(&self, y: &CoeffTensor) -> Result<Field> {
        self.check_coeffs(y)?;
        Field::from_vec(self.geometry.field_shape, self.synthesize_slice(y.as_slice()))
    }

    /// `y = D^T x`, the exact adjoint of [`synthesize`](Self::synthesize).
    pub fn analyze(&self, x: &Field) -> Result<CoeffTensor> {
        x.check_shape(self.geometry.field_shape)?;
        CoeffTensor::from_vec(
            self.geometry.channels,
            self.geometry.grid(),
            self.analyze_slice(x.as_slice()),
        )
    }

    pub fn check_coeffs(&self, y: &CoeffTensor) -> Result<()> {
        let expected = (self.geometry.channels, self.geometry.grid());
        if (y.channels(), y.grid()) != expected {
            return Err(Error::shape(expected, (y.channels(), y.grid())));
        }
        Ok(())
    }

    /// Max over `trials` random unit vectors of `||D D^T x - x|| / ||x||`.
    pub fn check_tightness(&self, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.geometry.field_len();
        (0..trials.max(1))
            .map(|_| {
                let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nx = crate::field::norm(&x);
                x.iter_mut().for_each(|v| *v /= nx);
                let back = self.synthesize_slice(&self.analyze_slice(&x));
                back.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest non-lowpass coefficient magnitude produced by a constant input
    /// of value `c`, divided by `|c|`.
    pub fn dc_leakage(&self) -> f64 {
        let x = vec![1.0; self.geometry.field_len()];
        let y = self.analyze_slice(&x);
        let nb = self.geometry.blocks();
        y[(LOWPASS_CHANNEL + 1) * nb..]
            .iter()
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `1/2 sum_k ||x_k - D y_k||^2`.
    pub fn reconstruction_objective(&self, batch: &[(Field, CoeffTensor)]) -> Result<f64> {
        let mut total = 0.0;
        for (x, y) in batch {
            x.check_shape(self.geometry.field_shape)?;
            self.check_coeffs(y)?;
            let xs = self.synthesize_slice(y.as_slice());
            total += 0.5
                * xs.iter()
                    .zip(x.as_slice())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>();
        }
        Ok(total)
    }

    /// Per-item contribution: objective, `dJ/dV0` (`P x m`, row-major) and
    /// `dJ/dU_s` per stage (`h x h`, row-major).
    fn item_gradient(&self, x: &Field, y: &CoeffTensor) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let g = &self.geometry;
        let (p, m, h, nb) = (g.channels, g.block_size(), g.half(), g.blocks());

        let mut recorded = Vec::new();
        let z = self.synthesis_stages(y.as_slice(), Some(&mut recorded));
        let xs = self.initial_transpose(&z);
        let resid: Vec<f64> = xs.iter().zip(x.as_slice()).map(|(a, b)| a - b).collect();
        let objective = 0.5 * resid.iter().map(|r| r * r).sum::<f64>();

        // back through the block scatter and V0^T
        let mut d_initial = vec![0.0; p * m];
        let mut gz = vec![0.0; p * nb];
        let mut gb = vec![0.0; m];
        for b in 0..nb {
            for (j, v) in gb.iter_mut().enumerate() {
                *v = resid[self.block_index[b * m + j]];
            }
            for ch in 0..p {
                let zc = z[ch * nb + b];
                let row = &self.initial[ch * m..(ch + 1) * m];
                let drow = &mut d_initial[ch * m..(ch + 1) * m];
                let mut acc = 0.0;
                for j in 0..m {
                    drow[j] += zc * gb[j];
                    acc += row[j] * gb[j];
                }
                gz[ch * nb + b] = acc;
            }
        }

        // back through the stages, in analysis order
        let mut scratch = Vec::new();
        let mut d_stages = Vec::with_capacity(self.stages.len());
        for (s, stage) in self.stages.iter().enumerate() {
            self.butterfly(&mut gz);
            self.delay(&mut gz, stage.axis, true, &mut scratch);
            self.butterfly(&mut gz);
            // out = U^T in  =>  dJ/dU = sum_b in_b g_b^T
            let input = &recorded[s];
            let glow = &gz[h * nb..2 * h * nb];
            let mut du = vec![0.0; h * h];
            for i in 0..h {
                let ii = &input[i * nb..(i + 1) * nb];
                for j in 0..h {
                    let gj = &glow[j * nb..(j + 1) * nb];
                    du[i * h + j] = ii.iter().zip(gj).map(|(a, b)| a * b).sum();
                }
            }
            d_stages.push(du);
            self.mix_lower(&mut gz, &stage.mixing, false, &mut scratch);
        }
        (objective, d_initial, d_stages)
    }

    /// Analytic gradient of `1/2 sum ||x_k - D_Theta y_k||^2` with respect to
    /// the lattice angles. Items are processed in parallel and reduced in
    /// batch order.
    pub fn gradient(&self, batch: &[(Field, CoeffTensor)]) -> Result<DictionaryGradient> {
        for (x, y) in batch {
            x.check_shape(self.geometry.field_shape)?;
            self.check_coeffs(y)?;
        }
        let g = &self.geometry;
        let (p, m, h) = (g.channels, g.block_size(), g.half());
        let items: Vec<_> = batch
            .par_iter()
            .map(|(x, y)| self.item_gradient(x, y))
            .collect();

        let mut objective = 0.0;
        let mut d_initial = vec![0.0; p * m];
        let mut d_stages = vec![vec![0.0; h * h]; self.stages.len()];
        for (obj, di, ds) in items {
            objective += obj;
            d_initial.iter_mut().zip(&di).for_each(|(a, b)| *a += b);
            for (acc, d) in d_stages.iter_mut().zip(&ds) {
                acc.iter_mut().zip(d).for_each(|(a, b)| *a += b);
            }
        }

        // V0 = diag(1, W) [C; 0]  =>  dJ/dW = (dJ/dV0 [C; 0]^T)[1.., 1..]
        let mut angles = Vec::with_capacity(g.angle_count());
        if p > 1 {
            let dw = DMatrix::from_fn(p - 1, p - 1, |r, q| {
                let (r, q) = (r + 1, q + 1);
                if q >= m {
                    return 0.0;
                }
                (0..m).map(|j| d_initial[r * m + j] * self.dct[(q, j)]).sum()
            });
            let n0 = g.initial_angle_count();
            angles.extend(angle_gradient(p - 1, &self.angles[..n0], &dw));
        }
        let n0 = g.initial_angle_count();
        let ns = g.stage_angle_count();
        for (s, du) in d_stages.iter().enumerate() {
            let du = DMatrix::from_row_slice(h, h, du);
            angles.extend(angle_gradient(h, &self.angles[n0 + s * ns..n0 + (s + 1) * ns], &du));
        }
        Ok(DictionaryGradient { objective, angles })
    }

    /// Kernel of every channel over its `(N + 1) M` support, as fields.
    pub fn realized_kernels(&self) -> Result<Vec<Field>> {
        let extent = self.geometry.kernel_extent();
        let local = self.with_field_shape(extent)?;
        let [my, mx, mz] = self.geometry.decimation;
        (0..self.geometry.channels)
            .map(|ch| {
                let mut y = local.zero_coeffs();
                y.as_mut_slice()[ch * local.geometry.blocks()] = 1.0;
                let f = local.synthesize(&y)?;
                Ok(Field::from_fn(extent, |r, c, z| {
                    f.get(
                        (r + my) % extent[0],
                        (c + mx) % extent[1],
                        (z + mz) % extent[2],
                    )
                }))
            })
            .collect()
    }

    /// Kernels as CSV rows `channel,y,x,z,value`.
    pub fn kernels_csv(&self) -> Result<String> {
        let mut out = String::from("channel,y,x,z,value\n");
        for (ch, k) in self.realized_kernels()?.iter().enumerate() {
            let [ny, nx, nz] = k.shape();
            for r in 0..ny {
                for c in 0..nx {
                    for z in 0..nz {
                        writeln!(out, "{ch},{r},{c},{z},{:.16e}", k.get(r, c, z))
                            .expect("write to string");
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.params())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_params(&serde_json::from_str(s)?)
    }
}

/// One AdaGrad step on the lattice angles for `1/2 sum ||x_k - D y_k||^2`.
/// The returned dictionary is rebuilt from the updated angles and is therefore
/// still tight.
pub fn dictionary_update_step(
    dict: &ConvDictionary,
    batch: &[(Field, CoeffTensor)],
    optimizer: &mut AdaGrad,
) -> Result<ConvDictionary> {
    if batch.is_empty() {
        return Err(Error::NotEnoughData("dictionary update needs a nonempty batch"));
    }
    let grad = dict.gradient(batch)?;
    if grad.angles.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("dictionary gradient"));
    }
    let mut angles = dict.angles.clone();
    optimizer.step(&mut angles, &grad.angles);
    ConvDictionary::new(dict.geometry, DictionaryInit::Angles(angles))
}
