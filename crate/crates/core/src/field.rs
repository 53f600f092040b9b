//! Snapshot fields and multichannel coefficient tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real 3-D snapshot, `rows x cols x depth`, stored row-major (depth
/// fastest). For river states depth is 2: plane 0 is the water surface and
/// plane 1 the bed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField")]
pub struct Field {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Field {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::shape(len, data.len()));
        }
        Ok(Field { shape, data })
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.iter().product());
        for r in 0..shape[0] {
            for c in 0..shape[1] {
                for z in 0..shape[2] {
                    data.push(f(r, c, z));
                }
            }
        }
        Field { shape, data }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize, z: usize) -> usize {
        (r * self.shape[1] + c) * self.shape[2] + z
    }

    pub fn get(&self, r: usize, c: usize, z: usize) -> f64 {
        self.data[self.index(r, c, z)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn dot(&self, other: &Field) -> f64 {
        dot(&self.data, &other.data)
    }

    /// Copies planes `[start, end)` of the depth axis into a new field.
    pub fn planes(&self, start: usize, end: usize) -> Field {
        let [rows, cols, depth] = self.shape;
        assert!(start <= end && end <= depth, "plane range out of bounds");
        let d = end - start;
        let mut data = Vec::with_capacity(rows * cols * d);
        for px in self.data.chunks_exact(depth) {
            data.extend_from_slice(&px[start..end]);
        }
        Field {
            shape: [rows, cols, d],
            data,
        }
    }

    pub(crate) fn check_shape(&self, expected: [usize; 3]) -> Result<()> {
        if self.shape == expected {
            Ok(())
        } else {
            Err(Error::shape(expected, self.shape))
        }
    }
}

/// Coefficients of a convolutional dictionary: `channels` maps on a decimated
/// block grid. Stored channel-major; the flat vector is the feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoeffs")]
pub struct CoeffTensor {
    channels: usize,
    grid: [usize; 3],
    data: Vec<f64>,
}

impl CoeffTensor {
    pub fn zeros(channels: usize, grid: [usize; 3]) -> Self {
        CoeffTensor {
            channels,
            grid,
            data: vec![0.0; channels * grid.iter().product::<usize>()],
        }
    }

    pub fn from_vec(channels: usize, grid: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len = channels * grid.iter().product::<usize>();
        if data.len() != len {
            return Err(Error::shape(len, data.len()));
        }
        Ok(CoeffTensor {
            channels,
            grid,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn grid(&self) -> [usize; 3] {
        self.grid
    }

    pub fn blocks(&self) -> usize {
        self.grid.iter().product()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, p: usize) -> &[f64] {
        let b = self.blocks();
        &self.data[p * b..(p + 1) * b]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn dot(&self, other: &CoeffTensor) -> f64 {
        dot(&self.data, &other.data)
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }

    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).sum()
    }
}

#[derive(Deserialize)]
struct RawField {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl TryFrom<RawField> for Field {
    type Error = Error;

    fn try_from(r: RawField) -> Result<Self> {
        Field::from_vec(r.shape, r.data)
    }
}

#[derive(Deserialize)]
struct RawCoeffs {
    channels: usize,
    grid: [usize; 3],
    data: Vec<f64>,
}

impl TryFrom<RawCoeffs> for CoeffTensor {
    type Error = Error;

    fn try_from(r: RawCoeffs) -> Result<Self> {
        CoeffTensor::from_vec(r.channels, r.grid, r.data)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planes_split_and_index() {
        let f = Field::from_fn([2, 3, 2], |r, c, z| (100 * r + 10 * c + z) as f64);
        assert_eq!(f.get(1, 2, 1), 121.0);
        let bed = f.planes(1, 2);
        assert_eq!(bed.shape(), [2, 3, 1]);
        assert_eq!(bed.get(1, 0, 0), 101.0);
        assert!(Field::from_vec([2, 2, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn coeff_channels() {
        let y = CoeffTensor::from_vec(2, [1, 2, 1], vec![1.0, 0.0, -3.0, 4.0]).unwrap();
        assert_eq!(y.channel(1), &[-3.0, 4.0]);
        assert_eq!(y.nnz(), 3);
        assert_eq!(y.l1_norm(), 8.0);
        assert_eq!(y.norm(), 26f64.sqrt());
    }

    #[test]
    fn deserialization_checks_lengths() {
        let y: CoeffTensor = serde_json::from_str(r#"{"channels":2,"grid":[1,1,1],"data":[1.0,2.0]}"#).unwrap();
        assert_eq!(y.len(), 2);
        assert!(serde_json::from_str::<CoeffTensor>(r#"{"channels":2,"grid":[1,1,1],"data":[1.0]}"#).is_err());
        assert!(serde_json::from_str::<Field>(r#"{"shape":[1,1,2],"data":[1.0]}"#).is_err());
    }
}
